use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use fdsec_core::config::dbm_to_watts;
use fdsec_core::design::DesignJson;
use fdsec_core::harness::{self, check_design, solve_instance, trace_is_monotone, ExperimentSpec};
use fdsec_core::{Mode, SolverOptions, SystemConfig};

#[derive(Parser)]
#[command(name = "fdsec", version, about = "Secure full-duplex max-min secrecy-rate design")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an experiment spec and write the CSV rows and JSON summary.
    Run(RunArgs),
    /// Solve one instance and dump the design, trace and report.
    Single(SingleArgs),
    /// Re-verify a saved design against its instance.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct Tolerances {
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    eta_min: Option<f64>,
    #[arg(long)]
    conic_tol: Option<f64>,
}

#[derive(Args)]
struct RunArgs {
    spec: PathBuf,
    /// Output directory (overrides the spec).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Replace the seed list with a single seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    outage_samples: Option<usize>,
    #[arg(long)]
    record_timing: bool,
    #[command(flatten)]
    tol: Tolerances,
}

#[derive(Args)]
struct SingleArgs {
    /// System configuration TOML; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "proposed-fd")]
    mode: Mode,
    #[arg(long)]
    pbs_dbm: Option<f64>,
    /// UL secrecy target in bps/Hz.
    #[arg(long)]
    qos: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    outage_samples: usize,
    #[arg(long, default_value = "single")]
    out: PathBuf,
    #[command(flatten)]
    tol: Tolerances,
}

#[derive(Args)]
struct ValidateArgs {
    design: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "proposed-fd")]
    mode: Mode,
    #[arg(long)]
    pbs_dbm: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    outage_samples: usize,
}

fn load_config(path: Option<&Path>, seed: u64, pbs_dbm: Option<f64>) -> Result<SystemConfig> {
    let mut cfg = match path {
        Some(p) => SystemConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => SystemConfig::default(),
    };
    cfg.rng_seed = seed;
    if let Some(p) = pbs_dbm {
        cfg.p_bs_max = dbm_to_watts(p);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn apply_tol(t: &Tolerances, o: &mut SolverOptions) {
    if let Some(v) = t.max_iters {
        o.max_iters = v;
    }
    if let Some(v) = t.rel_tol {
        o.rel_tol = v;
    }
    if let Some(v) = t.eta_min {
        o.eta_min = v;
    }
    if let Some(v) = t.conic_tol {
        o.conic_tol = v;
    }
}

fn write_json<T: serde::Serialize>(path: &Path, v: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(v)?).with_context(|| format!("writing {}", path.display()))
}

fn cmd_run(a: RunArgs) -> Result<bool> {
    let mut spec = ExperimentSpec::load(&a.spec)?;
    if let Some(d) = a.out {
        spec.output.dir = d;
    }
    if let Some(w) = a.workers {
        spec.workers = w;
    }
    if let Some(s) = a.seed {
        spec.seeds = vec![s];
    }
    if let Some(n) = a.outage_samples {
        spec.outage_samples = n;
    }
    spec.record_timing |= a.record_timing;
    let t = &a.tol;
    spec.solver.max_iters = t.max_iters.unwrap_or(spec.solver.max_iters);
    spec.solver.rel_tol = t.rel_tol.unwrap_or(spec.solver.rel_tol);
    spec.solver.eta_min = t.eta_min.unwrap_or(spec.solver.eta_min);
    spec.solver.conic_tol = t.conic_tol.unwrap_or(spec.solver.conic_tol);
    spec.validate()?;

    let out = harness::run_and_write(&spec)?;
    for s in &out.summary {
        let qos = s.qos_bps.map_or(String::from("-"), |q| q.to_string());
        println!(
            "{:<16} {:>6.1} dBm  qos {:>4}  mean {:.4} +- {:.4} bps/Hz  ({}/{} solved, {} outage pass)",
            s.mode, s.pbs_dbm, qos, s.mean_sr_bps, s.ci95_bps, s.solved, s.rows, s.outage_pass
        );
    }
    println!("wrote {} and {}", out.csv_path.display(), out.summary_path.display());
    let bad = out.rows.iter().filter(|r| !r.invariants_ok).count();
    if bad > 0 {
        eprintln!("{bad} of {} rows failed an invariant check", out.rows.len());
    }
    Ok(bad == 0)
}

fn cmd_single(a: SingleArgs) -> Result<bool> {
    let cfg = load_config(a.config.as_deref(), a.seed, a.pbs_dbm)?;
    let mut opts = SolverOptions { qos_bps: a.qos, outage_samples: a.outage_samples, outage_seed: a.seed, ..Default::default() };
    apply_tol(&a.tol, &mut opts);
    let out = solve_instance(&cfg, a.mode, &opts)?;
    std::fs::create_dir_all(&a.out)?;
    write_json(&a.out.join("design.json"), &out.design.to_json())?;
    write_json(&a.out.join("trace.json"), &out.trace)?;
    write_json(&a.out.join("report.json"), &out.report)?;

    for r in &out.trace.records {
        println!(
            "{:<13} {:>3}  eta {:>10.6}  {:<15}  residual {:.1e}  tightness {:.1e}",
            serde_json::to_value(r.phase)?.as_str().unwrap_or(""),
            r.kappa,
            r.eta,
            format!("{:?}", r.status),
            r.residual,
            r.tightness
        );
    }
    let rep = &out.report;
    println!(
        "max-min secrecy rate {:.4} bps/Hz, tau {:?}, {} after {} iterations",
        rep.maxmin_secrecy / std::f64::consts::LN_2,
        rep.time.tau,
        if rep.converged { "converged" } else { "stopped" },
        rep.iterations
    );
    let outage_ok = rep.outage.as_ref().is_none_or(|o| o.all_ok());
    if let Some(o) = &rep.outage {
        println!("outage check: worst margin {:.4} ({})", o.worst_margin(), if outage_ok { "pass" } else { "FAIL" });
    }
    let ok = rep.verification.ok && trace_is_monotone(&out) && outage_ok;
    if !rep.verification.ok {
        eprintln!("design violates the exact constraints: {:?}", rep.verification);
    }
    println!("wrote {}", a.out.display());
    Ok(ok)
}

fn cmd_validate(a: ValidateArgs) -> Result<bool> {
    let cfg = load_config(a.config.as_deref(), a.seed, a.pbs_dbm)?;
    let text = std::fs::read_to_string(&a.design).with_context(|| format!("reading {}", a.design.display()))?;
    let design: DesignJson = serde_json::from_str(&text)?;
    let check = check_design(&cfg, a.mode, &design, a.outage_samples, a.seed)?;
    println!("{}", serde_json::to_string_pretty(&check)?);
    Ok(check.ok())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Run(a) => cmd_run(a),
        Cmd::Single(a) => cmd_single(a),
        Cmd::Validate(a) => cmd_validate(a),
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
