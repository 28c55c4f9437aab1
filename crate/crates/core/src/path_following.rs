//! The path-following loop: seeded initialization, repeated convex
//! approximation around the current iterate, and final verification.

use std::time::Instant;

use serde::Serialize;

use crate::conic::{solve, Status};
use crate::design::DesignPoint;
use crate::error::{Error, Result};
use crate::linalg::{quad_form, CMat, C64};
use crate::outage::{empirical_outage, OutageReport};
use crate::rates::{bs_power, chi_bar, dl_rate, psi_bar, ul_power, ul_rate};
use crate::scenario::{Mode, Scenario, TimeModel};
use crate::surrogates::{emit_subproblem, ExpansionOptions, ExpansionPoint, RowTarget, SubproblemSpec};

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub max_iters: usize,
    pub rel_tol: f64,
    /// Target objective of the Eve-free initialization, nats.
    pub eta_min: f64,
    pub conic_tol: f64,
    /// Minimum UL secrecy rate, bps/Hz; switches to the QoS formulation.
    pub qos_bps: Option<f64>,
    pub expansion: ExpansionOptions,
    /// Largest re-substitution violation for accepting a non-optimal solve.
    pub accept_violation: f64,
    /// Monte Carlo samples for the final outage check (0 disables it).
    pub outage_samples: usize,
    pub outage_seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iters: 50,
            rel_tol: 1e-4,
            eta_min: 0.05,
            conic_tol: 1e-8,
            qos_bps: None,
            expansion: ExpansionOptions::default(),
            accept_violation: 1e-6,
            outage_samples: 0,
            outage_seed: 0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || !(self.rel_tol > 0.0) || !(self.eta_min > 0.0) || !(self.conic_tol > 0.0) {
            return Err(Error::Config(
                "solver options need max_iters >= 1, rel_tol > 0, eta_min > 0 and conic_tol > 0".into(),
            ));
        }
        if let Some(q) = self.qos_bps {
            if !(q >= 0.0) {
                return Err(Error::Config(format!("QoS target must be nonnegative, got {q}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Init,
    Main,
    /// QoS formulation: raise the UL secrecy rates to the target.
    QosUplink,
    /// QoS formulation: maximize the minimum DL secrecy rate.
    QosDownlink,
}

#[derive(Debug, Clone, Serialize)]
pub struct IterRecord {
    pub phase: Phase,
    pub kappa: usize,
    pub eta: f64,
    pub status: Status,
    /// Worst re-substitution violation of the solved program.
    pub residual: f64,
    /// Worst |surrogate - exact| at the expansion point.
    pub tightness: f64,
    pub ms: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct IterationTrace {
    pub records: Vec<IterRecord>,
}

impl IterationTrace {
    pub fn phase(&self, phase: Phase) -> impl Iterator<Item = &IterRecord> {
        self.records.iter().filter(move |r| r.phase == phase)
    }

    /// Largest drop of the objective between consecutive accepted iterates of one phase.
    pub fn max_decrease(&self, phase: Phase) -> f64 {
        let etas: Vec<f64> = self.phase(phase).filter(|r| accepted(r.status)).map(|r| r.eta).collect();
        etas.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max)
    }
}

fn accepted(s: Status) -> bool {
    matches!(s, Status::Optimal | Status::NumericalLimit)
}

/// Time split recovered from the inverse fractions.
#[derive(Debug, Clone, Serialize)]
pub struct TimeSummary {
    pub tau: Vec<f64>,
    pub sum: f64,
    pub slack: f64,
}

pub fn recover_solution(alpha: &[f64]) -> Result<TimeSummary> {
    if let Some(a) = alpha.iter().find(|a| !(**a >= 1.0) || !a.is_finite()) {
        return Err(Error::Invariant(format!("inverse time fraction {a} must be at least 1")));
    }
    let tau: Vec<f64> = alpha.iter().map(|a| 1.0 / a).collect();
    let sum = tau.iter().sum();
    Ok(TimeSummary { tau, sum, slack: 1.0 - sum })
}

/// Exact constraint check of a design.
#[derive(Debug, Clone, Serialize)]
pub struct Verification {
    /// `(bs_power - P) / P`
    pub bs_power_excess: f64,
    /// Worst `(tau rho^2 - P_ul) / P_ul`.
    pub ul_power_excess: f64,
    pub min_rho: f64,
    pub tau_sum: f64,
    /// Worst relative violation of the deterministic Eve constraints.
    pub eve_excess: f64,
    pub ok: bool,
}

pub const FEAS_REL_TOL: f64 = 1e-6;
pub const TAU_TOL: f64 = 1e-9;

pub fn verify(sc: &Scenario, d: &DesignPoint) -> Verification {
    let bs_power_excess = (bs_power(d) - sc.p_bs_max) / sc.p_bs_max;
    let mut ul_power_excess = f64::NEG_INFINITY;
    let mut min_rho = f64::INFINITY;
    let mut eve_excess = f64::NEG_INFINITY;
    for (i, g) in sc.groups.iter().enumerate() {
        let gd = &d.groups[i];
        for (l, link) in g.ul.iter().enumerate() {
            ul_power_excess = ul_power_excess.max((ul_power(d, i, l) - link.p_max) / link.p_max);
            min_rho = min_rho.min(gd.rho[l]);
        }
        let alpha = d.alpha[i];
        for (m, e) in g.eves.iter().enumerate() {
            for (k, link) in g.dl.iter().enumerate() {
                let rhs = psi_bar(sc, d, i, k, m) + sc.eve_margin(link.epsilon, e.ne);
                let lhs = quad_form(&e.hbar, &gd.w[k]) / (alpha * gd.gamma_dl[k]).exp_m1();
                eve_excess = eve_excess.max((lhs - rhs) / rhs);
            }
            for (l, link) in g.ul.iter().enumerate() {
                let rhs = chi_bar(sc, d, i, l, m) + sc.eve_margin(link.epsilon, e.ne);
                let r = gd.rho[l];
                let lhs = r * r * e.gbar[l] / (alpha * gd.gamma_ul[l]).exp_m1();
                eve_excess = eve_excess.max((lhs - rhs) / rhs);
            }
        }
    }
    let tau_sum: f64 = match sc.time {
        TimeModel::Split => d.alpha.iter().map(|a| 1.0 / a).sum(),
        TimeModel::Fixed(ref t) => t.iter().sum(),
    };
    let ok = bs_power_excess <= FEAS_REL_TOL
        && ul_power_excess <= FEAS_REL_TOL
        && min_rho >= 0.0
        && tau_sum <= 1.0 + TAU_TOL
        && d.alpha.iter().all(|a| *a >= 1.0)
        && eve_excess <= FEAS_REL_TOL;
    Verification {
        bs_power_excess,
        ul_power_excess: ul_power_excess.max(-1.0),
        min_rho: if min_rho.is_finite() { min_rho } else { 0.0 },
        tau_sum,
        eve_excess: eve_excess.max(-1.0),
        ok,
    }
}

/// Seed of the initialization: matched-filter beamformers with 80% of the
/// budget, a scaled-identity AN matrix with 5%, UL amplitudes at 80% of
/// their power cap, and equal time fractions.
pub fn seed_point(sc: &Scenario) -> DesignPoint {
    let mut d = DesignPoint::zeros(sc);
    let taus = d.tau();
    let active_tau: f64 = sc.groups.iter().zip(&taus).filter(|(g, _)| g.transmits()).map(|(_, t)| t).sum();
    for (i, g) in sc.groups.iter().enumerate() {
        let gd = &mut d.groups[i];
        if g.transmits() && active_tau > 0.0 {
            let p_i = sc.p_bs_max / active_tau;
            if !g.dl.is_empty() {
                let per_user = 0.8 * p_i / g.dl.len() as f64;
                for (w, link) in gd.w.iter_mut().zip(&g.dl) {
                    *w = &link.h * C64::from(per_user.sqrt() / link.h.norm());
                }
            }
            gd.v = CMat::identity(g.nt, g.nt) * C64::from((0.05 * p_i / g.nt as f64).sqrt());
        }
        for (r, link) in gd.rho.iter_mut().zip(&g.ul) {
            *r = (0.8 * link.p_max / taus[i]).sqrt();
        }
    }
    d
}

/// Sets the Eve slacks of a design by equality in the deterministic Eve
/// constraints, then the rate caps and the objective accordingly.
pub fn attach_eve_slacks(sc: &Scenario, d: &mut DesignPoint, beta_min: f64) {
    for (i, g) in sc.groups.iter().enumerate() {
        let alpha = d.alpha[i];
        for k in 0..g.dl.len() {
            let mut beta: f64 = 0.0;
            for (m, e) in g.eves.iter().enumerate() {
                let rhs = psi_bar(sc, d, i, k, m) + sc.eve_margin(g.dl[k].epsilon, e.ne);
                beta = beta.max(quad_form(&e.hbar, &d.groups[i].w[k]) / rhs);
            }
            let beta = beta.max(beta_min);
            d.groups[i].beta_dl[k] = beta;
            d.groups[i].gamma_dl[k] = beta.ln_1p() / alpha;
        }
        for l in 0..g.ul.len() {
            let mut beta: f64 = 0.0;
            for (m, e) in g.eves.iter().enumerate() {
                let rhs = chi_bar(sc, d, i, l, m) + sc.eve_margin(g.ul[l].epsilon, e.ne);
                let r = d.groups[i].rho[l];
                beta = beta.max(r * r * e.gbar[l] / rhs);
            }
            let beta = beta.max(beta_min);
            d.groups[i].beta_ul[l] = beta;
            d.groups[i].gamma_ul[l] = beta.ln_1p() / alpha;
        }
    }
}

fn snap_alpha(sc: &Scenario, d: &mut DesignPoint) {
    if let TimeModel::Split = sc.time {
        let s: f64 = d.alpha.iter().map(|a| 1.0 / a).sum();
        if s > 1.0 {
            for a in &mut d.alpha {
                *a *= s;
            }
        }
    }
}

/// Worst gap between each rate surrogate and its exact value at the anchor.
pub fn tightness_residual(sc: &Scenario, exp: &ExpansionPoint) -> f64 {
    let d = &exp.design;
    let mut worst: f64 = 0.0;
    for (i, g) in sc.groups.iter().enumerate() {
        for k in 0..g.dl.len() {
            worst = worst.max((exp.dl_surrogate(sc, d, i, k) - dl_rate(sc, d, i, k)).abs());
        }
        for l in 0..g.ul.len() {
            let exact = ul_rate(sc, d, i, l).unwrap_or(f64::NAN);
            worst = worst.max((exp.ul_surrogate(sc, d, i, l) - exact).abs());
        }
    }
    worst
}

struct StepOutcome {
    design: Option<DesignPoint>,
    record: IterRecord,
}

fn step(
    sc: &Scenario,
    d: &DesignPoint,
    spec: SubproblemSpec,
    opts: &SolverOptions,
    phase: Phase,
    kappa: usize,
) -> Result<StepOutcome> {
    let t0 = Instant::now();
    let exp = ExpansionPoint::new(sc, d, &opts.expansion)?;
    let tightness = tightness_residual(sc, &exp);
    let (prog, layout) = emit_subproblem(sc, &exp, spec)?;
    let sol = solve(&prog, opts.conic_tol)?;
    let ok = match sol.status {
        Status::Optimal => true,
        Status::NumericalLimit => sol.max_violation <= opts.accept_violation,
        _ => false,
    };
    let design = ok.then(|| {
        let mut nd = layout.extract(sc, &exp, &sol.x);
        snap_alpha(sc, &mut nd);
        nd
    });
    let status = if ok || sol.status != Status::NumericalLimit { sol.status } else { Status::NumericalLimit };
    let record = IterRecord {
        phase,
        kappa,
        eta: design.as_ref().map_or(f64::NAN, |nd| nd.eta),
        status,
        residual: sol.max_violation,
        tightness,
        ms: t0.elapsed().as_secs_f64() * 1e3,
    };
    if !ok {
        log::debug!("{phase:?} step {kappa}: status {:?}, violation {:.3e}", sol.status, sol.max_violation);
    }
    Ok(StepOutcome { design, record })
}

/// Eve-free initialization: repeat until the max-min rate reaches `eta_min`.
pub fn initialize(sc: &Scenario, opts: &SolverOptions, trace: &mut IterationTrace) -> Result<DesignPoint> {
    let mut d = seed_point(sc);
    let mut best = f64::NEG_INFINITY;
    for kappa in 0..opts.max_iters {
        let out = step(sc, &d, SubproblemSpec::eve_free(), opts, Phase::Init, kappa)?;
        trace.records.push(out.record);
        match out.design {
            Some(nd) => {
                best = best.max(nd.eta);
                d = nd;
                if d.eta >= opts.eta_min {
                    return Ok(d);
                }
            }
            None => break,
        }
    }
    Err(Error::Initialization { best_eta: best })
}

struct LoopResult {
    design: DesignPoint,
    converged: bool,
    iterations: usize,
}

fn iterate(
    sc: &Scenario,
    start: DesignPoint,
    spec: SubproblemSpec,
    opts: &SolverOptions,
    phase: Phase,
    trace: &mut IterationTrace,
    stop_at: Option<f64>,
) -> Result<LoopResult> {
    let mut d = start;
    for kappa in 0..opts.max_iters {
        let out = step(sc, &d, spec, opts, phase, kappa)?;
        trace.records.push(out.record);
        let Some(nd) = out.design else {
            if kappa == 0 {
                return Err(Error::Initialization { best_eta: d.eta });
            }
            return Ok(LoopResult { design: d, converged: false, iterations: kappa + 1 });
        };
        let prev = d.eta;
        d = nd;
        if stop_at.is_some_and(|t| d.eta >= t) {
            return Ok(LoopResult { design: d, converged: true, iterations: kappa + 1 });
        }
        if kappa > 0 && (d.eta - prev).abs() <= opts.rel_tol * prev.abs().max(1.0) {
            return Ok(LoopResult { design: d, converged: true, iterations: kappa + 1 });
        }
    }
    Ok(LoopResult { design: d, converged: false, iterations: opts.max_iters })
}

/// Per-user summary of a final design.
#[derive(Debug, Clone, Serialize)]
pub struct UserRate {
    pub group: usize,
    pub index: usize,
    pub rate: f64,
    pub gamma: f64,
    /// `[rate - gamma]^+`, nats.
    pub secrecy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub mode: Mode,
    pub converged: bool,
    pub iterations: usize,
    /// QoS formulation only: whether every UL user met the target.
    pub qos_feasible: Option<bool>,
    pub eta: f64,
    pub dl: Vec<UserRate>,
    pub ul: Vec<UserRate>,
    /// Minimum secrecy rate over the users that are optimized (all users, or
    /// the DL users in the QoS formulation), nats.
    pub maxmin_secrecy: f64,
    pub time: TimeSummary,
    pub verification: Verification,
    pub outage: Option<OutageReport>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    /// Design in the units of the scenario passed to [`run`].
    pub design: DesignPoint,
    /// Same design in the normalized scenario.
    pub normalized_design: DesignPoint,
    pub normalized: Scenario,
    pub trace: IterationTrace,
    pub report: SolveReport,
}

/// Exact per-user rates with the rate caps standing in for Eve rates.
pub fn user_rates(sc: &Scenario, d: &DesignPoint) -> Result<(Vec<UserRate>, Vec<UserRate>)> {
    let mut dl = Vec::new();
    let mut ul = Vec::new();
    for (i, g) in sc.groups.iter().enumerate() {
        let gd = &d.groups[i];
        for (k, link) in g.dl.iter().enumerate() {
            let rate = dl_rate(sc, d, i, k);
            dl.push(UserRate {
                group: link.id.group,
                index: link.id.index,
                rate,
                gamma: gd.gamma_dl[k],
                secrecy: (rate - gd.gamma_dl[k]).max(0.0),
            });
        }
        for (l, link) in g.ul.iter().enumerate() {
            let rate = ul_rate(sc, d, i, l)?;
            ul.push(UserRate {
                group: link.id.group,
                index: link.id.index,
                rate,
                gamma: gd.gamma_ul[l],
                secrecy: (rate - gd.gamma_ul[l]).max(0.0),
            });
        }
    }
    dl.sort_by_key(|u| (u.group, u.index));
    ul.sort_by_key(|u| (u.group, u.index));
    Ok((dl, ul))
}

/// Runs the full algorithm on `sc` (any units; it is normalized internally).
pub fn run(sc: &Scenario, opts: &SolverOptions) -> Result<RunOutput> {
    opts.validate()?;
    let norm = sc.normalized();
    let mut trace = IterationTrace::default();
    let mut d = initialize(&norm, opts, &mut trace)?;
    attach_eve_slacks(&norm, &mut d, opts.expansion.beta_min);
    d.eta = min_margin(&norm, &d, true, true)?;

    let (result, qos_feasible) = match opts.qos_bps {
        None => (iterate(&norm, d, SubproblemSpec::full(), opts, Phase::Main, &mut trace, None)?, None),
        Some(q) => {
            let target = q * std::f64::consts::LN_2;
            let has_ul = norm.groups.iter().any(|g| !g.ul.is_empty());
            let mut start = d;
            let mut feasible = true;
            if has_ul {
                start.eta = min_margin(&norm, &start, false, true)?;
                if start.eta < target {
                    let spec = SubproblemSpec { with_eves: true, dl: RowTarget::Absent, ul: RowTarget::Eta };
                    let a = iterate(&norm, start, spec, opts, Phase::QosUplink, &mut trace, Some(target))?;
                    feasible = a.design.eta >= target;
                    start = a.design;
                }
            }
            if feasible {
                start.eta = min_margin(&norm, &start, true, false)?;
                let spec = SubproblemSpec { with_eves: true, dl: RowTarget::Eta, ul: RowTarget::Floor(target) };
                (iterate(&norm, start, spec, opts, Phase::QosDownlink, &mut trace, None)?, Some(true))
            } else {
                let iterations = trace.records.len();
                (LoopResult { design: start, converged: false, iterations }, Some(false))
            }
        }
    };

    let design_n = result.design;
    let (dl, ul) = user_rates(&norm, &design_n)?;
    let maxmin_secrecy = match opts.qos_bps {
        None => dl.iter().chain(&ul).map(|u| u.secrecy).fold(f64::INFINITY, f64::min),
        Some(_) => dl.iter().map(|u| u.secrecy).fold(f64::INFINITY, f64::min),
    };
    let outage = (opts.outage_samples > 0)
        .then(|| empirical_outage(&norm, &design_n, opts.outage_samples, opts.outage_seed))
        .transpose()?;
    let report = SolveReport {
        mode: sc.mode,
        converged: result.converged,
        iterations: result.iterations,
        qos_feasible,
        eta: design_n.eta,
        dl,
        ul,
        maxmin_secrecy: if maxmin_secrecy.is_finite() { maxmin_secrecy } else { 0.0 },
        time: recover_solution(&design_n.alpha)?,
        verification: verify(&norm, &design_n),
        outage,
    };
    let scale = norm.amp_scale / sc.amp_scale;
    Ok(RunOutput {
        design: design_n.scaled(scale),
        normalized_design: design_n,
        normalized: norm,
        trace,
        report,
    })
}

/// `min (C - Gamma)` over the selected user classes.
fn min_margin(sc: &Scenario, d: &DesignPoint, with_dl: bool, with_ul: bool) -> Result<f64> {
    let (dl, ul) = user_rates(sc, d)?;
    let mut m = f64::INFINITY;
    if with_dl {
        m = dl.iter().map(|u| u.rate - u.gamma).fold(m, f64::min);
    }
    if with_ul {
        m = ul.iter().map(|u| u.rate - u.gamma).fold(m, f64::min);
    }
    Ok(m)
}
