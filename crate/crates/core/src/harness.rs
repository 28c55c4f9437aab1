//! Batch experiments: seed and power sweeps over the transmission modes,
//! with CSV rows and a JSON summary.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::Instance;
use crate::config::{dbm_to_watts, ConfigFile, SystemConfig, NUM_GROUPS};
use crate::design::{DesignJson, DesignPoint};
use crate::error::{Error, Result};
use crate::outage::{empirical_outage, OutageReport};
use crate::path_following::{run, user_rates, verify, Phase, RunOutput, SolverOptions, UserRate, Verification};
use crate::scenario::{Mode, Scenario};

const LN2: f64 = std::f64::consts::LN_2;
/// Allowed drop of the objective between accepted iterates.
pub const MONOTONE_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub max_iters: usize,
    pub rel_tol: f64,
    pub eta_min: f64,
    pub conic_tol: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let o = SolverOptions::default();
        SolverSection { max_iters: o.max_iters, rel_tol: o.rel_tol, eta_min: o.eta_min, conic_tol: o.conic_tol }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub csv: String,
    pub summary: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: PathBuf::from("results"), csv: "results.csv".into(), summary: "summary.json".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub seeds: Vec<u64>,
    pub pbs_dbm: Vec<f64>,
    pub modes: Vec<Mode>,
    /// UL secrecy targets in bps/Hz; empty runs the joint max-min problem.
    pub qos_bps: Vec<f64>,
    /// Monte Carlo samples for the outage check of every row (0 disables it).
    pub outage_samples: usize,
    /// Write measured wall times; off by default so reruns are bit-identical.
    pub record_timing: bool,
    /// Worker threads; 0 uses all cores.
    pub workers: usize,
    pub system: ConfigFile,
    pub solver: SolverSection,
    pub output: OutputSection,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            seeds: (1..=20).collect(),
            pbs_dbm: vec![10.0, 14.0, 18.0, 22.0, 26.0, 30.0],
            modes: Mode::ALL.to_vec(),
            qos_bps: Vec::new(),
            outage_samples: 10_000,
            record_timing: false,
            workers: 0,
            system: ConfigFile::default(),
            solver: SolverSection::default(),
            output: OutputSection::default(),
        }
    }
}

impl ExperimentSpec {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let spec: ExperimentSpec = toml::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| io_ctx(e, path))?;
        Self::from_toml_str(&s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() || self.pbs_dbm.is_empty() || self.modes.is_empty() {
            return Err(Error::Config("experiment needs nonempty seeds, pbs_dbm and modes".into()));
        }
        if self.qos_bps.iter().any(|q| !(*q >= 0.0)) {
            return Err(Error::Config("QoS targets must be nonnegative".into()));
        }
        self.system.clone().into_config()?;
        self.options(None).validate()
    }

    pub fn base_config(&self) -> Result<SystemConfig> {
        self.system.clone().into_config()
    }

    pub fn options(&self, qos: Option<f64>) -> SolverOptions {
        SolverOptions {
            max_iters: self.solver.max_iters,
            rel_tol: self.solver.rel_tol,
            eta_min: self.solver.eta_min,
            conic_tol: self.solver.conic_tol,
            qos_bps: qos,
            outage_samples: self.outage_samples,
            ..SolverOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub seed: u64,
    pub mode: Mode,
    pub pbs_dbm: f64,
    pub qos_bps: Option<f64>,
    pub maxmin_sr_bps: Option<f64>,
    /// Ordered by original (group, index); empty for failed rows.
    pub sr_dl: Vec<f64>,
    pub sr_ul: Vec<f64>,
    pub tau1: Option<f64>,
    pub tau2: Option<f64>,
    pub iters: usize,
    pub ms: f64,
    pub outage_ok: Option<bool>,
    pub status: String,
    /// Exact feasibility, monotone trace and (if run) the outage check.
    #[serde(skip)]
    pub invariants_ok: bool,
}

/// Status column values.
pub mod status {
    pub const CONVERGED: &str = "converged";
    pub const MAX_ITERS: &str = "max-iters";
    pub const QOS_INFEASIBLE: &str = "qos-infeasible";
    pub const ERROR: &str = "error";
}

pub fn trace_is_monotone(out: &RunOutput) -> bool {
    [Phase::Init, Phase::Main, Phase::QosUplink, Phase::QosDownlink]
        .into_iter()
        .all(|p| out.trace.max_decrease(p) <= MONOTONE_SLACK)
}

/// Generates the instance for `config` and solves it in `mode`.
pub fn solve_instance(config: &SystemConfig, mode: Mode, opts: &SolverOptions) -> Result<RunOutput> {
    let inst = Instance::generate(config)?;
    let sc = Scenario::build(&inst, mode)?;
    run(&sc, opts)
}

fn io_ctx(e: std::io::Error, path: &Path) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy)]
struct Job {
    seed: u64,
    pbs_idx: usize,
    mode_idx: usize,
    qos_idx: Option<usize>,
}

fn run_job(spec: &ExperimentSpec, base: &SystemConfig, job: Job) -> ResultRow {
    let pbs_dbm = spec.pbs_dbm[job.pbs_idx];
    let mode = spec.modes[job.mode_idx];
    let qos = job.qos_idx.map(|q| spec.qos_bps[q]);
    let mut cfg = base.clone();
    cfg.rng_seed = job.seed;
    cfg.p_bs_max = dbm_to_watts(pbs_dbm);
    let mut opts = spec.options(qos);
    let tag = ((job.pbs_idx as u64) << 32) | ((job.mode_idx as u64) << 16) | job.qos_idx.map_or(0xFFFF, |q| q as u64);
    opts.outage_seed = splitmix(job.seed ^ splitmix(tag));

    let t0 = Instant::now();
    let result = solve_instance(&cfg, mode, &opts);
    let ms = if spec.record_timing { t0.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
    match result {
        Ok(out) => {
            let rep = &out.report;
            let outage_ok = rep.outage.as_ref().map(OutageReport::all_ok);
            let status = match (rep.qos_feasible, rep.converged) {
                (Some(false), _) => status::QOS_INFEASIBLE,
                (_, true) => status::CONVERGED,
                (_, false) => status::MAX_ITERS,
            };
            let qos_ok = rep.qos_feasible != Some(false);
            let tau = &rep.time.tau;
            ResultRow {
                seed: job.seed,
                mode,
                pbs_dbm,
                qos_bps: qos,
                maxmin_sr_bps: qos_ok.then_some(rep.maxmin_secrecy / LN2),
                sr_dl: rep.dl.iter().map(|u| u.secrecy / LN2).collect(),
                sr_ul: rep.ul.iter().map(|u| u.secrecy / LN2).collect(),
                tau1: tau.first().copied(),
                tau2: Some(tau.get(1).copied().unwrap_or(0.0)),
                iters: rep.iterations,
                ms,
                outage_ok,
                status: status.into(),
                invariants_ok: rep.verification.ok && trace_is_monotone(&out) && outage_ok.unwrap_or(true),
            }
        }
        Err(e) => {
            log::warn!("seed {} mode {} at {pbs_dbm} dBm failed: {e}", job.seed, mode);
            ResultRow {
                seed: job.seed,
                mode,
                pbs_dbm,
                qos_bps: qos,
                maxmin_sr_bps: None,
                sr_dl: Vec::new(),
                sr_ul: Vec::new(),
                tau1: None,
                tau2: None,
                iters: 0,
                ms,
                outage_ok: None,
                status: status::ERROR.into(),
                invariants_ok: !matches!(e, Error::Invariant(_)),
            }
        }
    }
}

fn row_key(r: &ResultRow) -> (Mode, u64, u64, u64) {
    (r.mode, r.pbs_dbm.to_bits(), r.qos_bps.map_or(0, |q| q.to_bits() + 1), r.seed)
}

/// Runs every (seed, power, mode, QoS target) combination; rows come back
/// sorted by mode, power, target and seed.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let base = spec.base_config()?;
    let qos_list: Vec<Option<usize>> =
        if spec.qos_bps.is_empty() { vec![None] } else { (0..spec.qos_bps.len()).map(Some).collect() };
    let mut jobs = Vec::new();
    for &seed in &spec.seeds {
        for pbs_idx in 0..spec.pbs_dbm.len() {
            for mode_idx in 0..spec.modes.len() {
                for &qos_idx in &qos_list {
                    jobs.push(Job { seed, pbs_idx, mode_idx, qos_idx });
                }
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let mut rows: Vec<ResultRow> = pool.install(|| jobs.par_iter().map(|j| run_job(spec, &base, *j)).collect());
    rows.sort_by(|a, b| {
        a.mode
            .cmp(&b.mode)
            .then(a.pbs_dbm.total_cmp(&b.pbs_dbm))
            .then(a.qos_bps.unwrap_or(-1.0).total_cmp(&b.qos_bps.unwrap_or(-1.0)))
            .then(a.seed.cmp(&b.seed))
    });
    rows.dedup_by_key(|r| row_key(r));
    Ok(rows)
}

pub fn csv_header(k: usize, l: usize) -> Vec<String> {
    let mut h: Vec<String> = ["seed", "mode", "pbs_dbm", "qos_bps", "maxmin_sr_bps"].map(String::from).to_vec();
    for i in 1..=NUM_GROUPS {
        for j in 1..=k {
            h.push(format!("sr_dl_{i}_{j}"));
        }
    }
    for i in 1..=NUM_GROUPS {
        for j in 1..=l {
            h.push(format!("sr_ul_{i}_{j}"));
        }
    }
    h.extend(["tau1", "tau2", "iters", "ms", "outage_ok", "status"].map(String::from));
    h
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

pub fn write_csv(path: &Path, rows: &[ResultRow], k: usize, l: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(csv_header(k, l))?;
    let (n_dl, n_ul) = (NUM_GROUPS * k, NUM_GROUPS * l);
    for r in rows {
        let mut rec = vec![
            r.seed.to_string(),
            r.mode.to_string(),
            r.pbs_dbm.to_string(),
            opt(r.qos_bps),
            opt(r.maxmin_sr_bps),
        ];
        rec.extend((0..n_dl).map(|j| opt(r.sr_dl.get(j))));
        rec.extend((0..n_ul).map(|j| opt(r.sr_ul.get(j))));
        rec.extend([
            opt(r.tau1),
            opt(r.tau2),
            r.iters.to_string(),
            r.ms.to_string(),
            opt(r.outage_ok),
            r.status.clone(),
        ]);
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

fn parse_opt<T: std::str::FromStr>(s: &str) -> Result<Option<T>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|_| Error::Parse(format!("bad CSV field {s:?}")))
}

fn parse_req<T: std::str::FromStr>(s: &str) -> Result<T> {
    parse_opt(s)?.ok_or_else(|| Error::Parse("missing CSV field".into()))
}

/// Reads rows written by [`write_csv`].
pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let n_dl = header.iter().filter(|h| h.starts_with("sr_dl_")).count();
    let n_ul = header.iter().filter(|h| h.starts_with("sr_ul_")).count();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let f = |i: usize| rec.get(i).unwrap_or("");
        let users = |start: usize, n: usize| -> Result<Vec<f64>> {
            let v: Vec<Option<f64>> = (start..start + n).map(|i| parse_opt(f(i))).collect::<Result<_>>()?;
            Ok(v.into_iter().flatten().collect())
        };
        let tail = 5 + n_dl + n_ul;
        rows.push(ResultRow {
            seed: parse_req(f(0))?,
            mode: f(1).parse()?,
            pbs_dbm: parse_req(f(2))?,
            qos_bps: parse_opt(f(3))?,
            maxmin_sr_bps: parse_opt(f(4))?,
            sr_dl: users(5, n_dl)?,
            sr_ul: users(5 + n_dl, n_ul)?,
            tau1: parse_opt(f(tail))?,
            tau2: parse_opt(f(tail + 1))?,
            iters: parse_req(f(tail + 2))?,
            ms: parse_req(f(tail + 3))?,
            outage_ok: parse_opt(f(tail + 4))?,
            status: f(tail + 5).to_string(),
            invariants_ok: true,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryEntry {
    pub mode: Mode,
    pub pbs_dbm: f64,
    pub qos_bps: Option<f64>,
    pub rows: usize,
    /// Rows with a reported max-min rate (solver errors and infeasible QoS excluded).
    pub solved: usize,
    pub mean_sr_bps: f64,
    pub std_sr_bps: f64,
    /// Half-width of the normal 95% interval of the mean.
    pub ci95_bps: f64,
    pub mean_iters: f64,
    pub qos_infeasible: usize,
    pub outage_pass: usize,
}

/// Mean and interval per (mode, power, QoS target), in row order.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryEntry> {
    let mut groups: BTreeMap<(Mode, u64, u64), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        let (m, p, q, _) = row_key(r);
        groups.entry((m, p, q)).or_default().push(r);
    }
    let mut out: Vec<SummaryEntry> = groups
        .into_values()
        .map(|rs| {
            let vals: Vec<f64> = rs.iter().filter_map(|r| r.maxmin_sr_bps).collect();
            let n = vals.len();
            let mean = if n > 0 { vals.iter().sum::<f64>() / n as f64 } else { f64::NAN };
            let std = if n > 1 {
                (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            SummaryEntry {
                mode: rs[0].mode,
                pbs_dbm: rs[0].pbs_dbm,
                qos_bps: rs[0].qos_bps,
                rows: rs.len(),
                solved: n,
                mean_sr_bps: mean,
                std_sr_bps: std,
                ci95_bps: if n > 1 { 1.96 * std / (n as f64).sqrt() } else { 0.0 },
                mean_iters: rs.iter().map(|r| r.iters as f64).sum::<f64>() / rs.len() as f64,
                qos_infeasible: rs.iter().filter(|r| r.status == status::QOS_INFEASIBLE).count(),
                outage_pass: rs.iter().filter(|r| r.outage_ok == Some(true)).count(),
            }
        })
        .collect();
    out.sort_by(|a, b| {
        a.mode
            .cmp(&b.mode)
            .then(a.pbs_dbm.total_cmp(&b.pbs_dbm))
            .then(a.qos_bps.unwrap_or(-1.0).total_cmp(&b.qos_bps.unwrap_or(-1.0)))
    });
    out
}

pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryEntry>,
    pub csv_path: PathBuf,
    pub summary_path: PathBuf,
}

impl ExperimentOutput {
    pub fn invariants_ok(&self) -> bool {
        self.rows.iter().all(|r| r.invariants_ok)
    }
}

/// Runs the experiment and writes the CSV and the JSON summary under `spec.output.dir`.
pub fn run_and_write(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    let rows = run_experiment(spec)?;
    let summary = summarize(&rows);
    std::fs::create_dir_all(&spec.output.dir)
        .map_err(|e| io_ctx(e, &spec.output.dir))?;
    let csv_path = spec.output.dir.join(&spec.output.csv);
    let summary_path = spec.output.dir.join(&spec.output.summary);
    write_csv(&csv_path, &rows, spec.system.k, spec.system.l)?;
    let json = serde_json::to_string_pretty(&summary)?;
    std::fs::write(&summary_path, json).map_err(|e| io_ctx(e, &summary_path))?;
    Ok(ExperimentOutput { rows, summary, csv_path, summary_path })
}

#[derive(Debug, Clone, Serialize)]
pub struct DesignCheck {
    pub verification: Verification,
    pub dl: Vec<UserRate>,
    pub ul: Vec<UserRate>,
    pub maxmin_sr_bps: f64,
    pub outage: Option<OutageReport>,
}

impl DesignCheck {
    pub fn ok(&self) -> bool {
        self.verification.ok && self.outage.as_ref().is_none_or(OutageReport::all_ok)
    }
}

/// Re-verifies a saved design (in physical units) against the instance it was computed for.
pub fn check_design(
    config: &SystemConfig,
    mode: Mode,
    design: &DesignJson,
    outage_samples: usize,
    outage_seed: u64,
) -> Result<DesignCheck> {
    let inst = Instance::generate(config)?;
    let sc = Scenario::build(&inst, mode)?;
    let d = DesignPoint::from(design);
    d.check_shape(&sc)?;
    let norm = sc.normalized();
    let dn = d.scaled(sc.amp_scale / norm.amp_scale);
    let (dl, ul) = user_rates(&norm, &dn)?;
    let maxmin = dl.iter().chain(&ul).map(|u| u.secrecy).fold(f64::INFINITY, f64::min);
    let outage = (outage_samples > 0).then(|| empirical_outage(&norm, &dn, outage_samples, outage_seed)).transpose()?;
    Ok(DesignCheck {
        verification: verify(&norm, &dn),
        dl,
        ul,
        maxmin_sr_bps: if maxmin.is_finite() { maxmin / LN2 } else { 0.0 },
        outage,
    })
}
