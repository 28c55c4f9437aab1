//! Acceptance report: one PASS/FAIL line per criterion. Failures are printed,
//! not raised, so that the report always runs to the end.

mod common;

use std::time::Instant;

use common::*;
use fdsec_core::config::dbm_to_watts;
use fdsec_core::conic::{solve, Affine, ConicProgram, Status};
use fdsec_core::harness::{solve_instance, trace_is_monotone};
use fdsec_core::path_following::{Phase, RunOutput, SolverOptions, TAU_TOL};
use fdsec_core::{Mode, SystemConfig};

const TIGHTNESS_ANCHORS: usize = 100;
const TIGHTNESS_TOL: f64 = 1e-8;
const DIRECTION_ANCHORS: usize = 100;
const DIRECTION_PER_ANCHOR: usize = 100;
const DIRECTION_SAMPLES: usize = 10_000;
const SEEDS: std::ops::RangeInclusive<u64> = 1..=20;
const MAX_ITERS: usize = 50;
const REL_TOL: f64 = 1e-4;
const OUTAGE_SAMPLES: usize = 10_000;
const EPSILON: f64 = 0.99;
const CONIC_TOL: f64 = 1e-8;
const MICRO_TOL: f64 = 1e-6;
const RESIDUAL_TOL: f64 = 10.0 * CONIC_TOL;
const ORDER_DBM: f64 = 26.0;
const TREND_DBM: [f64; 6] = [10.0, 14.0, 18.0, 22.0, 26.0, 30.0];
const TREND_QOS_BPS: f64 = 2.0;
const MMSE_INSTANCES: usize = 100;
const MMSE_TOL: f64 = 1e-9;

struct Report {
    passed: usize,
    failed: usize,
}

impl Report {
    fn line(&mut self, n: usize, name: &str, pass: bool, detail: String) {
        if pass {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
        println!("criterion {n} ({name}): {}  {detail}", if pass { "PASS" } else { "FAIL" });
    }
}

struct Run {
    seed: u64,
    mode: Mode,
    out: RunOutput,
    secs: f64,
}

fn options(qos: Option<f64>, outage: usize, seed: u64) -> SolverOptions {
    SolverOptions {
        max_iters: MAX_ITERS,
        rel_tol: REL_TOL,
        conic_tol: CONIC_TOL,
        qos_bps: qos,
        outage_samples: outage,
        outage_seed: seed,
        ..Default::default()
    }
}

fn solve_at(seed: u64, mode: Mode, dbm: f64, opts: &SolverOptions) -> Option<Run> {
    let cfg = SystemConfig { p_bs_max: dbm_to_watts(dbm), ..config(seed) };
    let t = Instant::now();
    match solve_instance(&cfg, mode, opts) {
        Ok(out) => Some(Run { seed, mode, out, secs: t.elapsed().as_secs_f64() }),
        Err(e) => {
            println!("  seed {seed} {mode} at {dbm} dBm: solver error: {e}");
            None
        }
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

fn micro_programs() -> Vec<(&'static str, bool)> {
    let mut out = Vec::new();

    let mut p = ConicProgram::new();
    let t = p.add_var("t");
    p.objective = -Affine::var(t);
    p.soc("norm", Affine::var(t), vec![Affine::constant(3.0), Affine::constant(4.0)]);
    let ok = solve(&p, CONIC_TOL).is_ok_and(|s| s.status == Status::Optimal && (s.x[t] - 5.0).abs() <= MICRO_TOL);
    out.push(("soc projection", ok));

    let mut p = ConicProgram::new();
    let (u, x, y) = (p.add_var("u"), p.add_var("x"), p.add_var("y"));
    p.objective = -Affine::var(u);
    p.zero("y", Affine::var(y) - 2.0);
    p.zero("x", Affine::var(x) - 4.0);
    p.rsoc("cone", Affine::var(u), Affine::var(y), vec![Affine::var(x)]);
    let ok = solve(&p, CONIC_TOL).is_ok_and(|s| s.status == Status::Optimal && (s.x[u] - 8.0).abs() <= MICRO_TOL);
    out.push(("rotated cone", ok));

    let mut p = ConicProgram::new();
    let x = p.add_var("x");
    p.nonneg("upper", -Affine::var(x));
    p.nonneg("lower", Affine::var(x) - 1.0);
    out.push(("infeasible rows", solve(&p, CONIC_TOL).is_ok_and(|s| s.status == Status::Infeasible)));
    out
}

fn main() {
    let start = Instant::now();
    let mut rep = Report { passed: 0, failed: 0 };

    // 1
    let t = Instant::now();
    let w = tightness_suite(TIGHTNESS_ANCHORS, 101);
    let worst = w.max();
    let secs = t.elapsed().as_secs_f64();
    let names: Vec<String> = w.0.iter().map(|(n, v)| format!("{n}={v:.1e}")).collect();
    rep.line(
        1,
        "surrogate tightness",
        worst <= TIGHTNESS_TOL && secs < 60.0,
        format!("worst {worst:.2e} (limit {TIGHTNESS_TOL:.0e}) over {TIGHTNESS_ANCHORS} anchors in {secs:.1}s [{}]", names.join(" ")),
    );

    // 2
    let s = direction_suite(DIRECTION_ANCHORS, DIRECTION_PER_ANCHOR, 102);
    let claimed: Vec<_> = s.0.iter().filter(|d| d.name != "ul_rate_joint_tangent").collect();
    let violations: usize = claimed.iter().map(|d| d.violations).sum();
    let min_checked = claimed.iter().map(|d| d.checked).min().unwrap_or(0);
    let thin: Vec<String> = claimed
        .iter()
        .filter(|d| d.checked < DIRECTION_SAMPLES)
        .map(|d| format!("{}={}", d.name, d.checked))
        .collect();
    let jt = s.get("ul_rate_joint_tangent");
    rep.line(
        2,
        "bound direction",
        violations == 0 && thin.is_empty(),
        format!(
            "{violations} violations over {} inequalities, fewest samples {min_checked} (need {DIRECTION_SAMPLES}){}",
            claimed.len(),
            if thin.is_empty() { String::new() } else { format!(" short: {}", thin.join(" ")) }
        ),
    );
    println!(
        "  note: joint-tangent UL form (not used as a bound) violates on {}/{} samples, worst gap {:.2e}",
        jt.violations, jt.checked, jt.worst
    );

    // Main sweep at the ordering power, all modes, with the outage check.
    let mut runs: Vec<Run> = Vec::new();
    let mut errors = 0;
    for mode in Mode::ALL {
        for seed in SEEDS {
            match solve_at(seed, mode, ORDER_DBM, &options(None, OUTAGE_SAMPLES, seed)) {
                Some(r) => runs.push(r),
                None => errors += 1,
            }
        }
    }

    // 3
    let proposed: Vec<&Run> = runs.iter().filter(|r| r.mode == Mode::ProposedFd).collect();
    let bad_mono: Vec<u64> = proposed.iter().filter(|r| !trace_is_monotone(&r.out)).map(|r| r.seed).collect();
    let bad_conv: Vec<u64> = proposed.iter().filter(|r| !r.out.report.converged).map(|r| r.seed).collect();
    let slowest = proposed.iter().map(|r| r.secs).fold(0.0, f64::max);
    let worst_drop = proposed.iter().map(|r| r.out.trace.max_decrease(Phase::Main)).fold(0.0, f64::max);
    let n_seeds = SEEDS.count();
    rep.line(
        3,
        "monotone convergence",
        proposed.len() == n_seeds && bad_mono.is_empty() && bad_conv.is_empty(),
        format!(
            "{}/{n_seeds} solved, non-monotone seeds {bad_mono:?}, not converged within {MAX_ITERS} seeds {bad_conv:?}, largest drop {worst_drop:.1e}, slowest run {slowest:.1}s",
            proposed.len()
        ),
    );

    // QoS sweep for the power trend; its designs also enter the feasibility check.
    let mut trend: Vec<(Mode, Vec<f64>, usize)> = Vec::new();
    let mut qos_runs: Vec<Run> = Vec::new();
    for mode in Mode::ALL {
        let mut means = Vec::new();
        let mut infeasible = 0;
        for dbm in TREND_DBM {
            let mut vals = Vec::new();
            for seed in SEEDS {
                if let Some(r) = solve_at(seed, mode, dbm, &options(Some(TREND_QOS_BPS), 0, seed)) {
                    if r.out.report.qos_feasible == Some(true) {
                        vals.push(r.out.report.maxmin_secrecy / std::f64::consts::LN_2);
                    } else {
                        infeasible += 1;
                    }
                    qos_runs.push(r);
                } else {
                    errors += 1;
                }
            }
            means.push(mean(&vals));
        }
        trend.push((mode, means, infeasible));
    }

    // 4
    let all: Vec<&Run> = runs.iter().chain(&qos_runs).collect();
    let infeasible: Vec<String> = all
        .iter()
        .filter(|r| !r.out.report.verification.ok || r.out.report.time.sum > 1.0 + TAU_TOL)
        .map(|r| format!("{}#{}", r.mode, r.seed))
        .collect();
    let worst_power = all.iter().map(|r| r.out.report.verification.bs_power_excess).fold(f64::NEG_INFINITY, f64::max);
    let worst_eve = all.iter().map(|r| r.out.report.verification.eve_excess).fold(f64::NEG_INFINITY, f64::max);
    let worst_tau = all.iter().map(|r| r.out.report.time.sum).fold(0.0, f64::max);
    rep.line(
        4,
        "exact feasibility",
        infeasible.is_empty() && errors == 0,
        format!(
            "{} designs, {} infeasible {infeasible:?}, {errors} solver errors; worst BS power excess {worst_power:.1e}, Eve excess {worst_eve:.1e}, tau sum {worst_tau:.10}",
            all.len(),
            infeasible.len()
        ),
    );

    // 5
    let mut constraints = 0;
    let mut failing = 0;
    let mut min_prob: f64 = 1.0;
    let mut designs_failing = 0;
    let mut negative_bounds = 0;
    let mut bound_pairs = 0;
    let mut bound_broken = 0;
    for r in &runs {
        let Some(o) = &r.out.report.outage else { continue };
        let f = o.constraints.iter().filter(|c| !c.ok()).count();
        constraints += o.constraints.len();
        failing += f;
        designs_failing += usize::from(f > 0);
        for c in &o.constraints {
            min_prob = min_prob.min(c.prob);
        }
        for (b, e, hw) in o.markov_pairs() {
            bound_pairs += 1;
            negative_bounds += usize::from(b < 0.0);
            bound_broken += usize::from(e > b + 3.0 * hw);
        }
    }
    rep.line(
        5,
        "outage guarantee",
        failing == 0 && constraints > 0,
        format!(
            "{failing}/{constraints} constraints below {EPSILON} - 3 hw in {designs_failing}/{} designs, lowest empirical probability {min_prob:.4} ({OUTAGE_SAMPLES} draws); per-Eve bound exceeded on {bound_broken}/{bound_pairs} pairs, {negative_bounds} bounds negative",
            runs.len()
        ),
    );

    // 6
    let micro = micro_programs();
    let micro_bad: Vec<&str> = micro.iter().filter(|m| !m.1).map(|m| m.0).collect();
    let mut solves = 0;
    let mut worst_res: f64 = 0.0;
    let mut over = 0;
    for r in &all {
        for it in &r.out.trace.records {
            if matches!(it.status, Status::Optimal | Status::NumericalLimit) {
                solves += 1;
                worst_res = worst_res.max(it.residual);
                over += usize::from(it.residual > RESIDUAL_TOL);
            }
        }
    }
    rep.line(
        6,
        "conic contract",
        micro_bad.is_empty() && over == 0,
        format!(
            "micro-programs failing {micro_bad:?}; {over}/{solves} accepted subproblem solves above {RESIDUAL_TOL:.0e} re-substitution residual, worst {worst_res:.1e}"
        ),
    );

    // 7
    let mean_at = |m: Mode| mean(&runs.iter().filter(|r| r.mode == m).map(|r| r.out.report.maxmin_secrecy / std::f64::consts::LN_2).collect::<Vec<_>>());
    let (p, c, h) = (mean_at(Mode::ProposedFd), mean_at(Mode::ConventionalFd), mean_at(Mode::Hd));
    let ordered = p > c && p > h;
    let rising: Vec<String> = trend
        .iter()
        .map(|(m, v, inf)| {
            let up = v.windows(2).all(|w| w[1] > w[0]);
            format!("{m} {} [{}] infeasible {inf}", if up { "rising" } else { "NOT rising" }, v.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join(" "))
        })
        .collect();
    let trend_ok = trend.iter().all(|(_, v, _)| v.windows(2).all(|w| w[1] > w[0]));
    rep.line(
        7,
        "ordering and power trend",
        ordered && trend_ok,
        format!(
            "mean max-min SR at {ORDER_DBM} dBm: proposed-fd {p:.3}, conventional-fd {c:.3}, hd {h:.3} bps/Hz (proposed > conventional: {}, proposed > hd: {}); DL SR at {TREND_QOS_BPS} bps/Hz UL target over {TREND_DBM:?} dBm: {}",
            p > c,
            p > h,
            rising.join("; ")
        ),
    );

    // 8
    let worst = mmse_identity_suite(MMSE_INSTANCES, 108);
    rep.line(8, "MMSE-SIC identity", worst <= MMSE_TOL, format!("worst |sum - logdet| {worst:.2e} over {MMSE_INSTANCES} instances (limit {MMSE_TOL:.0e})"));

    println!(
        "acceptance: {} passed, {} failed in {:.0}s",
        rep.passed,
        rep.failed,
        start.elapsed().as_secs_f64()
    );
}
