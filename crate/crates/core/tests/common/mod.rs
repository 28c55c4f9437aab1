#![allow(dead_code)]

use fdsec_core::linalg::{crandn, crandn_mat, CMat, C64};
use fdsec_core::rates::{chi_bar, dl_rate, psi_bar, ul_rate, ul_sum_rate_logdet};
use fdsec_core::scenario::TimeModel;
use fdsec_core::surrogates::{
    bilinear_upper, log_upper_coeffs, power_lhs_split, ul_power_split, zeta_coeffs, zeta_lower, ExpansionOptions,
    ExpansionPoint,
};
use fdsec_core::{DesignPoint, Instance, Mode, Scenario, SystemConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn config(seed: u64) -> SystemConfig {
    SystemConfig { rng_seed: seed, ..SystemConfig::default() }
}

pub fn raw_scenario(cfg: &SystemConfig, mode: Mode) -> Scenario {
    Scenario::build(&Instance::generate(cfg).unwrap(), mode).unwrap()
}

/// Normalized default scenario.
pub fn scenario(seed: u64, mode: Mode) -> Scenario {
    raw_scenario(&config(seed), mode).normalized()
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

/// Random design with every quantity in a plausible range for a normalized scenario.
pub fn random_design<R: Rng>(sc: &Scenario, rng: &mut R) -> DesignPoint {
    let mut d = DesignPoint::zeros(sc);
    if let TimeModel::Split = sc.time {
        d.alpha = vec![1.2 + 3.0 * rng.random::<f64>(), 1.2 + 3.0 * rng.random::<f64>()];
    }
    for (i, g) in sc.groups.iter().enumerate() {
        let gd = &mut d.groups[i];
        if g.transmits() {
            for w in gd.w.iter_mut() {
                *w = crandn(rng, g.nt) * C64::from((log_uniform(rng, 0.01, 0.5) / g.nt as f64).sqrt());
            }
            gd.v = crandn_mat(rng, g.nt, g.nt) * C64::from((log_uniform(rng, 1e-4, 0.1) / (g.nt * g.nt) as f64).sqrt());
        }
        for (r, link) in gd.rho.iter_mut().zip(&g.ul) {
            *r = (log_uniform(rng, 0.01, 1.0) * link.p_max).sqrt();
        }
        let alpha = d.alpha[i];
        for b in gd.beta_dl.iter_mut().chain(gd.beta_ul.iter_mut()) {
            *b = log_uniform(rng, 0.01, 5.0);
        }
        for (gm, b) in gd.gamma_dl.iter_mut().zip(&gd.beta_dl).chain(gd.gamma_ul.iter_mut().zip(&gd.beta_ul)) {
            *gm = b.ln_1p() / alpha * (1.0 + 0.5 * rng.random::<f64>());
        }
    }
    d
}

/// Random point around `d`; the perturbation size is drawn per call from near to far.
pub fn perturb<R: Rng>(sc: &Scenario, d: &DesignPoint, rng: &mut R) -> DesignPoint {
    let s = [0.01, 0.1, 0.5, 2.0][rng.random_range(0..4)];
    let mut x = d.clone();
    if let TimeModel::Split = sc.time {
        for a in x.alpha.iter_mut() {
            *a = 1.0 + (*a - 1.0) * (s * (2.0 * rng.random::<f64>() - 1.0)).exp();
        }
    }
    for (i, g) in sc.groups.iter().enumerate() {
        let gd = &mut x.groups[i];
        for w in gd.w.iter_mut() {
            let n = w.norm() / (g.nt as f64).sqrt();
            *w += crandn(rng, g.nt) * C64::from(s * n);
        }
        if g.transmits() {
            let n = gd.v.norm() / g.nt as f64;
            gd.v += crandn_mat(rng, g.nt, g.nt) * C64::from(s * n);
        }
        for r in gd.rho.iter_mut() {
            *r = (*r * (1.0 + s * (2.0 * rng.random::<f64>() - 1.0))).max(0.0);
        }
        for b in gd.beta_dl.iter_mut().chain(gd.beta_ul.iter_mut()) {
            *b *= (s * (2.0 * rng.random::<f64>() - 1.0)).exp();
        }
    }
    x
}

pub fn anchor<R: Rng>(sc: &Scenario, rng: &mut R) -> ExpansionPoint {
    loop {
        let d = random_design(sc, rng);
        if let Ok(e) = ExpansionPoint::new(sc, &d, &ExpansionOptions::default()) {
            return e;
        }
    }
}

/// Worst `|surrogate - exact|` at the anchor, per surrogate.
#[derive(Debug, Default, Clone)]
pub struct Worst(pub Vec<(&'static str, f64)>);

impl Worst {
    pub fn record(&mut self, name: &'static str, v: f64) {
        let v = if v.is_nan() { f64::INFINITY } else { v };
        match self.0.iter_mut().find(|(n, _)| *n == name) {
            Some(e) => e.1 = e.1.max(v),
            None => self.0.push((name, v)),
        }
    }

    pub fn max(&self) -> f64 {
        self.0.iter().map(|e| e.1).fold(0.0, f64::max)
    }
}

/// Tightness of every surrogate at `n` random anchors on default channels.
pub fn tightness_suite(n: usize, seed: u64) -> Worst {
    let mut rng = rng(seed);
    let mut w = Worst::default();
    for a in 0..n {
        let sc = scenario(1000 + a as u64, Mode::ProposedFd);
        let exp = anchor(&sc, &mut rng);
        let x = &exp.design;
        let (g, t) = (log_uniform(&mut rng, 1e-3, 1e4), log_uniform(&mut rng, 1.0, 10.0));
        w.record("zeta", (zeta_lower(zeta_coeffs(g, t).unwrap(), g, t) - g.ln_1p() / t).abs());
        for (i, grp) in sc.groups.iter().enumerate() {
            let alpha = x.alpha[i];
            for k in 0..grp.dl.len() {
                w.record("dl_rate", (exp.dl_surrogate(&sc, x, i, k) - dl_rate(&sc, x, i, k)).abs());
                for m in 0..grp.eves.len() {
                    w.record("psi_bar", (exp.psi_bar_lin(&sc, x, i, k, m) - psi_bar(&sc, x, i, k, m)).abs());
                }
                let b = x.groups[i].beta_dl[k];
                let ab = exp.groups[i].log_dl[k];
                w.record("log_tangent", (ab.0 + ab.1 * b - b.ln_1p()).abs());
                w.record("bilinear", (bilinear_upper(b, alpha, b, alpha).unwrap() - b / alpha).abs());
                w.record("eve_cap", (exp.eve_log_upper(ab, b, b, alpha, i).unwrap() - b.ln_1p() / alpha).abs());
            }
            for l in 0..grp.ul.len() {
                w.record("ul_rate", (exp.ul_surrogate(&sc, x, i, l) - ul_rate(&sc, x, i, l).unwrap()).abs());
                for m in 0..grp.eves.len() {
                    w.record("chi_bar", (exp.chi_bar_lin(&sc, x, i, l, m) - chi_bar(&sc, x, i, l, m)).abs());
                }
                let b = x.groups[i].beta_ul[l];
                let ab = exp.groups[i].log_ul[l];
                w.record("eve_cap", (exp.eve_log_upper(ab, b, b, alpha, i).unwrap() - b.ln_1p() / alpha).abs());
            }
        }
        w.record("bs_power", (exp.power_lhs_lin(x) - power_lhs_split(x)).abs());
        for l in 0..sc.groups[0].ul.len() {
            w.record("ul_power", (exp.ul_power_lin(x, l) - ul_power_split(x, l)).abs());
        }
    }
    w
}

/// Direction check of one inequality: counts samples with `lower > upper + tol`.
#[derive(Debug, Clone)]
pub struct Direction {
    pub name: &'static str,
    pub checked: usize,
    pub violations: usize,
    pub worst: f64,
}

#[derive(Debug, Default)]
pub struct DirectionSuite(pub Vec<Direction>);

pub const DIRECTION_TOL: f64 = 1e-9;

impl DirectionSuite {
    /// Records `lower <= upper` up to `1e-9 * max(1, |upper|)`; infinite lower values pass.
    pub fn check(&mut self, name: &'static str, lower: f64, upper: f64) {
        let idx = match self.0.iter().position(|d| d.name == name) {
            Some(i) => i,
            None => {
                self.0.push(Direction { name, checked: 0, violations: 0, worst: f64::NEG_INFINITY });
                self.0.len() - 1
            }
        };
        let d = &mut self.0[idx];
        if lower == f64::NEG_INFINITY {
            return;
        }
        d.checked += 1;
        let gap = (lower - upper) / upper.abs().max(1.0);
        d.worst = d.worst.max(gap);
        if gap.is_nan() || gap > DIRECTION_TOL {
            d.violations += 1;
        }
    }

    pub fn get(&self, name: &str) -> &Direction {
        self.0.iter().find(|d| d.name == name).unwrap()
    }
}

/// `anchors * per_anchor` sampled points per inequality. The joint-tangent
/// UL form is tracked under `ul_rate_joint_tangent` but is not a claimed bound.
pub fn direction_suite(anchors: usize, per_anchor: usize, seed: u64) -> DirectionSuite {
    let mut rng = rng(seed);
    let mut s = DirectionSuite::default();
    for a in 0..anchors {
        let sc = scenario(2000 + a as u64, Mode::ProposedFd);
        let exp = anchor(&sc, &mut rng);
        let a0 = &exp.design;
        for _ in 0..per_anchor {
            let (g0, t0) = (log_uniform(&mut rng, 1e-3, 1e4), log_uniform(&mut rng, 1.0, 10.0));
            let (g, t) = (log_uniform(&mut rng, 1e-4, 1e5), log_uniform(&mut rng, 1.0, 10.0));
            s.check("zeta", zeta_lower(zeta_coeffs(g0, t0).unwrap(), g, t), g.ln_1p() / t);
            let (x0, x1) = (log_uniform(&mut rng, 1e-6, 1e3), log_uniform(&mut rng, 1e-6, 1e3));
            let (la, lb) = log_upper_coeffs(x0).unwrap();
            s.check("log_tangent", x1.ln_1p(), la + lb * x1);
            let (b0, al0) = (log_uniform(&mut rng, 1e-3, 10.0), 1.0 + 4.0 * rng.random::<f64>());
            let b = log_uniform(&mut rng, 1e-4, 100.0);
            let al = al0 / 2.0 + 1e-6 + 6.0 * rng.random::<f64>();
            s.check("bilinear", b / al, bilinear_upper(b, al, b0, al0).unwrap());

            let x = perturb(&sc, a0, &mut rng);
            if x.alpha.iter().any(|&v| v <= 1.0) {
                continue;
            }
            for (i, grp) in sc.groups.iter().enumerate() {
                let two_alpha_ok = 2.0 * x.alpha[i] > a0.alpha[i];
                for k in 0..grp.dl.len() {
                    s.check("dl_rate", exp.dl_surrogate(&sc, &x, i, k), dl_rate(&sc, &x, i, k));
                    for m in 0..grp.eves.len() {
                        s.check("psi_bar", exp.psi_bar_lin(&sc, &x, i, k, m), psi_bar(&sc, &x, i, k, m));
                    }
                    if two_alpha_ok {
                        let b = x.groups[i].beta_dl[k];
                        let ub = exp.eve_log_upper(exp.groups[i].log_dl[k], a0.groups[i].beta_dl[k], b, x.alpha[i], i);
                        s.check("eve_cap", b.ln_1p() / x.alpha[i], ub.unwrap());
                    }
                }
                for l in 0..grp.ul.len() {
                    let exact = ul_rate(&sc, &x, i, l).unwrap();
                    s.check("ul_rate", exp.ul_surrogate(&sc, &x, i, l), exact);
                    s.check("ul_rate_joint_tangent", exp.ul_surrogate_joint_tangent(&sc, &x, i, l), exact);
                    for m in 0..grp.eves.len() {
                        s.check("chi_bar", exp.chi_bar_lin(&sc, &x, i, l, m), chi_bar(&sc, &x, i, l, m));
                    }
                    if two_alpha_ok {
                        let b = x.groups[i].beta_ul[l];
                        let ub = exp.eve_log_upper(exp.groups[i].log_ul[l], a0.groups[i].beta_ul[l], b, x.alpha[i], i);
                        s.check("eve_cap", b.ln_1p() / x.alpha[i], ub.unwrap());
                    }
                }
            }
            s.check("bs_power", power_lhs_split(&x), exp.power_lhs_lin(&x));
            for l in 0..sc.groups[0].ul.len() {
                s.check("ul_power", ul_power_split(&x, l), exp.ul_power_lin(&x, l));
            }
        }
    }
    s
}

/// Worst `|sum_l R_l - logdet|` over `n` random instances and designs (both modes with UL).
pub fn mmse_identity_suite(n: usize, seed: u64) -> f64 {
    let mut rng = rng(seed);
    let mut worst: f64 = 0.0;
    for t in 0..n {
        let mut cfg = config(3000 + t as u64);
        cfg.sigma_si = [0.0, 10f64.powf(-7.5), 1e-4, 1e-2][t % 4];
        let mode = if t % 2 == 0 { Mode::ProposedFd } else { Mode::ConventionalFd };
        let sc = raw_scenario(&cfg, mode).normalized();
        let d = random_design(&sc, &mut rng);
        for (i, g) in sc.groups.iter().enumerate() {
            let sum: f64 = (0..g.ul.len()).map(|l| ul_rate(&sc, &d, i, l).unwrap()).sum();
            let ld = ul_sum_rate_logdet(&sc, &d, i).unwrap();
            worst = worst.max((sum - ld).abs());
        }
    }
    worst
}

/// Hermitian matrix with the given eigenvalues and a random basis.
pub fn hermitian_with_eigs<R: Rng>(rng: &mut R, eigs: &[f64]) -> CMat {
    let n = eigs.len();
    let q = crandn_mat(rng, n, n).qr().q();
    let d = CMat::from_diagonal(&nalgebra::DVector::from_iterator(n, eigs.iter().map(|&e| C64::from(e))));
    &q * d * q.adjoint()
}
