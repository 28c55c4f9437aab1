//! Conic emission of the per-iteration convex program.
//!
//! Rows are scaled so that every quantity is O(1) at the anchor:
//! `t' = gamma_bar * t`, `x' = gamma_bar * x`, `beta' = beta / beta_bar`,
//! and Eve cones are divided by the anchor value of their right-hand side.

use crate::conic::{Affine, CMatVar, CVecVar, ConicProgram};
use crate::design::DesignPoint;
use crate::error::Result;
use crate::linalg::{hermitian_factor, CVec};
use crate::rates::dl_interference;
use crate::scenario::{Scenario, TimeModel};

use super::expansion::ExpansionPoint;

/// Right-hand side of a legitimate-rate row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RowTarget {
    /// `rate >= eta + Gamma`
    Eta,
    /// `rate >= value + Gamma` (nats)
    Floor(f64),
    /// No rate row.
    Absent,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubproblemSpec {
    pub with_eves: bool,
    pub dl: RowTarget,
    pub ul: RowTarget,
}

impl SubproblemSpec {
    pub fn full() -> Self {
        SubproblemSpec { with_eves: true, dl: RowTarget::Eta, ul: RowTarget::Eta }
    }

    pub fn eve_free() -> Self {
        SubproblemSpec { with_eves: false, dl: RowTarget::Eta, ul: RowTarget::Eta }
    }
}

#[derive(Debug, Clone, Default)]
pub struct GroupVars {
    pub w: Vec<CVecVar>,
    pub v: Option<CMatVar>,
    pub rho: Vec<usize>,
    pub alpha: Option<usize>,
    pub tinv: Option<usize>,
    pub r: Option<usize>,
    pub p: Option<usize>,
    pub t_dl: Vec<usize>,
    pub x_ul: Vec<usize>,
    pub q_ul: Vec<usize>,
    pub beta_dl: Vec<usize>,
    pub beta_ul: Vec<usize>,
    pub bq_dl: Vec<usize>,
    pub bq_ul: Vec<usize>,
    pub gamma_dl: Vec<usize>,
    pub gamma_ul: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Layout {
    pub groups: Vec<GroupVars>,
    pub eta: usize,
    pub spec: SubproblemSpec,
    pub num_vars: usize,
}

fn complex_parts(pair: (Affine, Affine)) -> [Affine; 2] {
    [pair.0, pair.1]
}

fn alpha_expr(gv: &GroupVars, exp: &ExpansionPoint, i: usize) -> Affine {
    match gv.alpha {
        Some(a) => Affine::var(a),
        None => Affine::constant(exp.alpha(i)),
    }
}

fn tinv_expr(gv: &GroupVars, exp: &ExpansionPoint, i: usize) -> Affine {
    match gv.tinv {
        Some(t) => Affine::var(t),
        None => Affine::constant(1.0 / exp.alpha(i)),
    }
}

/// Rows of `||X_i||` (all beamformers and AN columns).
fn tx_rows(gv: &GroupVars) -> Vec<Affine> {
    let mut rows: Vec<Affine> = gv.w.iter().flat_map(|w| w.norm_rows()).collect();
    if let Some(v) = &gv.v {
        rows.extend(v.norm_rows());
    }
    rows
}

/// `Re{Xbar^H X}` over beamformers and AN.
fn cross_expr(gv: &GroupVars, anchor: &crate::design::GroupDesign) -> Affine {
    let mut e = Affine::default();
    for (wv, wb) in gv.w.iter().zip(&anchor.w) {
        e += wv.re_inner(wb);
    }
    if let Some(v) = &gv.v {
        for (c, col) in v.cols.iter().enumerate() {
            e += col.re_inner(&anchor.v.column(c).into_owned());
        }
    }
    e
}

/// `Re{sum_j (Q a_j)^H x_j}` style linear form with a shared Hermitian `Q`.
fn hbar_cross(gv: &GroupVars, anchor: &crate::design::GroupDesign, hbar: &crate::linalg::CMat, skip_w: Option<usize>) -> Affine {
    let mut e = Affine::default();
    for (j, (wv, wb)) in gv.w.iter().zip(&anchor.w).enumerate() {
        if Some(j) != skip_w {
            e += wv.re_inner(&(hbar * wb));
        }
    }
    if let Some(v) = &gv.v {
        for (c, col) in v.cols.iter().enumerate() {
            e += col.re_inner(&(hbar * anchor.v.column(c).into_owned()));
        }
    }
    e
}

/// Builds the convex program around `exp`.
pub fn emit_subproblem(sc: &Scenario, exp: &ExpansionPoint, spec: SubproblemSpec) -> Result<(ConicProgram, Layout)> {
    let mut p = ConicProgram::new();
    let split = matches!(sc.time, TimeModel::Split);
    let eta = p.add_var("eta");
    p.objective = Affine::var(eta);

    // variables
    let mut groups = Vec::with_capacity(sc.groups.len());
    for (i, g) in sc.groups.iter().enumerate() {
        let mut gv = GroupVars {
            w: (0..g.dl.len()).map(|k| p.add_complex(&format!("w[{i}][{k}]"), g.nt)).collect(),
            v: g.transmits().then(|| CMatVar::add(&mut p, &format!("V[{i}]"), g.nt, g.nt)),
            rho: (0..g.ul.len()).map(|l| p.add_var(format!("rho[{i}][{l}]"))).collect(),
            ..Default::default()
        };
        if split {
            gv.alpha = Some(p.add_var(format!("alpha[{i}]")));
            gv.tinv = Some(p.add_var(format!("tinv[{i}]")));
            if spec.with_eves {
                gv.r = Some(p.add_var(format!("r[{i}]")));
            }
        }
        if g.transmits() {
            gv.p = Some(p.add_var(format!("p[{i}]")));
        }
        gv.t_dl = (0..g.dl.len()).map(|k| p.add_var(format!("t_dl[{i}][{k}]"))).collect();
        gv.x_ul = (0..g.ul.len()).map(|l| p.add_var(format!("x_ul[{i}][{l}]"))).collect();
        gv.q_ul = (0..g.ul.len()).map(|l| p.add_var(format!("q_ul[{i}][{l}]"))).collect();
        if spec.with_eves {
            gv.beta_dl = (0..g.dl.len()).map(|k| p.add_var(format!("beta_dl[{i}][{k}]"))).collect();
            gv.beta_ul = (0..g.ul.len()).map(|l| p.add_var(format!("beta_ul[{i}][{l}]"))).collect();
            gv.gamma_dl = (0..g.dl.len()).map(|k| p.add_var(format!("Gamma_dl[{i}][{k}]"))).collect();
            gv.gamma_ul = (0..g.ul.len()).map(|l| p.add_var(format!("Gamma_ul[{i}][{l}]"))).collect();
            if split {
                gv.bq_dl = (0..g.dl.len()).map(|k| p.add_var(format!("bq_dl[{i}][{k}]"))).collect();
                gv.bq_ul = (0..g.ul.len()).map(|l| p.add_var(format!("bq_ul[{i}][{l}]"))).collect();
            }
        }
        groups.push(gv);
    }

    for (i, g) in sc.groups.iter().enumerate() {
        let gv = &groups[i];
        let cache = &exp.groups[i];
        let anchor = &exp.design.groups[i];
        let alpha = alpha_expr(gv, exp, i);

        for (l, &r) in gv.rho.iter().enumerate() {
            p.nonneg(format!("rho_nonneg[{i}][{l}]"), Affine::var(r));
        }

        // time fractions
        if let (Some(a), Some(t)) = (gv.alpha, gv.tinv) {
            p.rsoc(format!("tinv[{i}]"), Affine::var(t), Affine::var(a), vec![Affine::constant(1.0)]);
            if let Some(r) = gv.r {
                p.rsoc(
                    format!("inv_lin_alpha[{i}]"),
                    Affine::var(r),
                    Affine::term(a, 2.0) - exp.alpha(i),
                    vec![Affine::constant(1.0)],
                );
            }
        }

        let rate_rhs = |target: RowTarget, gamma: Option<usize>| -> Option<Affine> {
            let base = match target {
                RowTarget::Eta => Affine::var(eta),
                RowTarget::Floor(v) => Affine::constant(v),
                RowTarget::Absent => return None,
            };
            Some(match gamma {
                Some(gm) => base + Affine::var(gm),
                None => base,
            })
        };

        // DL rate surrogates
        for (k, link) in g.dl.iter().enumerate() {
            let c = &cache.dl[k];
            let re_hw = gv.w[k].re_inner(&link.h);
            p.nonneg(format!("re_gain[{i}][{k}]"), re_hw.clone());
            p.nonneg(
                format!("trust[{i}][{k}]"),
                re_hw.clone() * (2.0 / c.rbar) - 1.0 - c.delta / c.rbar,
            );
            let s = 1.0 / c.phi.sqrt();
            let mut u = Vec::new();
            for (_, wv) in gv.w.iter().enumerate().filter(|(j, _)| *j != k) {
                u.extend(complex_parts(wv.inner(&link.h)).map(|a| a * s));
            }
            if let Some(v) = &gv.v {
                for col in &v.cols {
                    u.extend(complex_parts(col.inner(&link.h)).map(|a| a * s));
                }
            }
            for (l, f) in link.cci.iter().enumerate() {
                u.push(Affine::term(gv.rho[l], f.norm() * s));
            }
            u.push(Affine::constant(sc.noise_power.sqrt() * s));
            p.rsoc(
                format!("dl_epi[{i}][{k}]"),
                Affine::var(gv.t_dl[k]),
                re_hw * (2.0 / c.rbar) - 1.0,
                u,
            );
            let gamma = spec.with_eves.then(|| gv.gamma_dl[k]);
            if let Some(rhs) = rate_rhs(spec.dl, gamma) {
                let (a, b, cc) = c.coeffs;
                let lhs = Affine::constant(a) - Affine::term(gv.t_dl[k], b / c.gamma) - alpha.clone() * cc;
                p.nonneg(format!("dl_rate[{i}][{k}]"), lhs - rhs);
            }
        }

        // UL rate surrogates
        for l in 0..g.ul.len() {
            let c = &cache.ul[l];
            let s = 1.0 / c.c1.sqrt();
            let mut z = Vec::new();
            for j in (l + 1)..g.ul.len() {
                z.push(Affine::term(gv.rho[j], g.ul[j].g.dotc(&c.ghat).norm() * s));
            }
            if let Some(si) = &g.si {
                let sv: CVec = si * &c.ghat;
                for wv in &gv.w {
                    z.extend(complex_parts(wv.inner(&sv)).map(|a| a * s));
                }
                if let Some(v) = &gv.v {
                    for col in &v.cols {
                        z.extend(complex_parts(col.inner(&sv)).map(|a| a * s));
                    }
                }
            }
            let e0 = sc.noise_power * c.ghat.norm_squared() / c.c1;
            p.rsoc(format!("ul_quad[{i}][{l}]"), Affine::var(gv.q_ul[l]), Affine::constant(1.0), z);
            let rb = anchor.rho[l];
            p.rsoc(
                format!("ul_epi[{i}][{l}]"),
                Affine::var(gv.x_ul[l]),
                Affine::term(gv.rho[l], 2.0 / rb) - Affine::var(gv.q_ul[l]) - e0,
                vec![Affine::constant(1.0)],
            );
            let gamma = spec.with_eves.then(|| gv.gamma_ul[l]);
            if let Some(rhs) = rate_rhs(spec.ul, gamma) {
                let (a, b, cc) = c.coeffs;
                let lhs = Affine::constant(a) - Affine::term(gv.x_ul[l], b / c.gamma) - alpha.clone() * cc;
                p.nonneg(format!("ul_rate[{i}][{l}]"), lhs - rhs);
            }
        }

        // eavesdroppers
        if spec.with_eves {
            let tinv = tinv_expr(gv, exp, i);
            for (m, e) in g.eves.iter().enumerate() {
                let rfac = hermitian_factor(&e.hbar)?;
                for k in 0..g.dl.len() {
                    let ec = &cache.eve_dl[m][k];
                    let dbar = ec.stat + ec.margin;
                    let bb = anchor.beta_dl[k];
                    let s = 1.0 / (bb * dbar).sqrt();
                    let u: Vec<Affine> = gv.w[k].matrix_rows(&rfac).into_iter().map(|a| a * s).collect();
                    let mut lin = hbar_cross(gv, anchor, &e.hbar, Some(k)) * 2.0;
                    for (l, gb) in e.gbar.iter().enumerate() {
                        lin.add_term(gv.rho[l], 2.0 * anchor.rho[l] * gb);
                    }
                    let rhs = (lin - ec.stat + ec.margin) * (1.0 / dbar);
                    p.rsoc(format!("eve_dl[{i}][{k}][{m}]"), Affine::var(gv.beta_dl[k]), rhs, u);
                }
                for l in 0..g.ul.len() {
                    let ec = &cache.eve_ul[m][l];
                    let dbar = ec.stat + ec.margin;
                    let bb = anchor.beta_ul[l];
                    let s = (e.gbar[l] / (bb * dbar)).sqrt();
                    let u = vec![Affine::term(gv.rho[l], s)];
                    let mut lin = hbar_cross(gv, anchor, &e.hbar, None) * 2.0;
                    for (j, gb) in e.gbar.iter().enumerate().filter(|(j, _)| *j != l) {
                        lin.add_term(gv.rho[j], 2.0 * anchor.rho[j] * gb);
                    }
                    let rhs = (lin - ec.stat + ec.margin) * (1.0 / dbar);
                    p.rsoc(format!("eve_ul[{i}][{l}][{m}]"), Affine::var(gv.beta_ul[l]), rhs, u);
                }
            }
            let mut cap_row = |label: String, beta_var: usize, bq: Option<usize>, gamma_var: usize, bb: f64, ab: (f64, f64)| {
                let (a, b) = ab;
                let bound = match (bq, gv.r) {
                    (Some(q), Some(r)) => {
                        p.rsoc(
                            format!("{label}.sq"),
                            Affine::var(q),
                            Affine::constant(1.0),
                            vec![Affine::var(beta_var)],
                        );
                        tinv.clone() * a
                            + (Affine::term(q, 1.0 / exp.alpha(i)) + Affine::var(r)) * (0.5 * b * bb)
                    }
                    _ => (Affine::term(beta_var, b * bb) + a) * (1.0 / exp.alpha(i)),
                };
                p.nonneg(label, Affine::var(gamma_var) - bound);
            };
            for k in 0..g.dl.len() {
                let bq = gv.bq_dl.get(k).copied();
                cap_row(format!("eve_cap_dl[{i}][{k}]"), gv.beta_dl[k], bq, gv.gamma_dl[k], anchor.beta_dl[k], cache.log_dl[k]);
            }
            for l in 0..g.ul.len() {
                let bq = gv.bq_ul.get(l).copied();
                cap_row(format!("eve_cap_ul[{i}][{l}]"), gv.beta_ul[l], bq, gv.gamma_ul[l], anchor.beta_ul[l], cache.log_ul[l]);
            }
        }
    }

    // power budgets and time sharing
    if split {
        let (g0, g1) = (&groups[0], &groups[1]);
        let a2 = exp.alpha(1);
        let a2v = g1.alpha.expect("split layout has alpha");
        if let (Some(p0), Some(p1)) = (g0.p, g1.p) {
            p.rsoc("bs_power[0]", Affine::var(p0), Affine::constant(1.0), tx_rows(g0));
            p.rsoc("bs_power[1]", Affine::var(p1), Affine::var(a2v), tx_rows(g1));
            let pbar = exp.design.groups[0].tx_power();
            let lhs = Affine::var(p0) + Affine::var(p1) - cross_expr(g0, &exp.design.groups[0]) * (2.0 / a2)
                + Affine::term(a2v, pbar / (a2 * a2));
            p.nonneg("bs_budget", Affine::constant(sc.p_bs_max) - lhs);
        }
        for (l, link) in sc.groups[0].ul.iter().enumerate() {
            let rb = exp.design.groups[0].rho[l];
            let rhs = Affine::constant(link.p_max) + Affine::term(g0.rho[l], 2.0 * rb / a2)
                - Affine::term(a2v, rb * rb / (a2 * a2));
            p.rsoc(format!("ul_budget[0][{l}]"), Affine::constant(1.0), rhs, vec![Affine::var(g0.rho[l])]);
        }
        for (l, link) in sc.groups[1].ul.iter().enumerate() {
            p.rsoc(
                format!("ul_budget[1][{l}]"),
                Affine::var(a2v),
                Affine::constant(1.0),
                vec![Affine::term(g1.rho[l], 1.0 / link.p_max.sqrt())],
            );
        }
        let t0 = g0.tinv.expect("split layout has tinv");
        let t1 = g1.tinv.expect("split layout has tinv");
        p.nonneg("time_share", Affine::constant(1.0) - Affine::var(t0) - Affine::var(t1));
    } else {
        let mut budget = Affine::constant(sc.p_bs_max);
        for (i, gv) in groups.iter().enumerate() {
            if let Some(pv) = gv.p {
                p.rsoc(format!("bs_power[{i}]"), Affine::var(pv), Affine::constant(1.0), tx_rows(gv));
                budget = budget - Affine::term(pv, 1.0 / exp.alpha(i));
            }
            for (l, link) in sc.groups[i].ul.iter().enumerate() {
                let cap = (link.p_max * exp.alpha(i)).sqrt();
                p.nonneg(format!("ul_budget[{i}][{l}]"), Affine::constant(cap) - Affine::var(gv.rho[l]));
            }
        }
        p.nonneg("bs_budget", budget);
    }

    let num_vars = p.num_vars();
    Ok((p, Layout { groups, eta, spec, num_vars }))
}

impl Layout {
    /// Reads a design point back out of a program vector.
    pub fn extract(&self, sc: &Scenario, exp: &ExpansionPoint, x: &[f64]) -> DesignPoint {
        let mut d = DesignPoint::zeros(sc);
        for (i, gv) in self.groups.iter().enumerate() {
            let gd = &mut d.groups[i];
            let anchor = &exp.design.groups[i];
            gd.w = gv.w.iter().map(|w| w.extract(x)).collect();
            if let Some(v) = &gv.v {
                gd.v = v.extract(x);
            }
            gd.rho = gv.rho.iter().map(|&r| x[r].max(0.0)).collect();
            if self.spec.with_eves {
                gd.beta_dl = gv.beta_dl.iter().zip(&anchor.beta_dl).map(|(&b, bb)| x[b] * bb).collect();
                gd.beta_ul = gv.beta_ul.iter().zip(&anchor.beta_ul).map(|(&b, bb)| x[b] * bb).collect();
                gd.gamma_dl = gv.gamma_dl.iter().map(|&g| x[g]).collect();
                gd.gamma_ul = gv.gamma_ul.iter().map(|&g| x[g]).collect();
            }
            d.alpha[i] = gv.alpha.map_or(exp.alpha(i), |a| x[a]);
        }
        d.eta = x[self.eta];
        d
    }

    /// Program vector of a design point with every auxiliary variable at its
    /// tightest value. At the anchor itself this vector is feasible.
    pub fn embed(&self, sc: &Scenario, exp: &ExpansionPoint, d: &DesignPoint) -> Vec<f64> {
        let mut x = vec![0.0; self.num_vars];
        x[self.eta] = d.eta;
        for (i, gv) in self.groups.iter().enumerate() {
            let g = &sc.groups[i];
            let gd = &d.groups[i];
            let cache = &exp.groups[i];
            let anchor = &exp.design.groups[i];
            let alpha = d.alpha[i];
            for (wv, w) in gv.w.iter().zip(&gd.w) {
                wv.write(w, &mut x);
            }
            if let Some(v) = &gv.v {
                v.write(&gd.v, &mut x);
            }
            for (&r, &val) in gv.rho.iter().zip(&gd.rho) {
                x[r] = val;
            }
            if let Some(a) = gv.alpha {
                x[a] = alpha;
            }
            if let Some(t) = gv.tinv {
                x[t] = 1.0 / alpha;
            }
            if let Some(r) = gv.r {
                x[r] = 1.0 / (2.0 * alpha - exp.alpha(i));
            }
            if let Some(pv) = gv.p {
                let split_second = matches!(sc.time, TimeModel::Split) && i == 1;
                x[pv] = gd.tx_power() / if split_second { alpha } else { 1.0 };
            }
            for k in 0..g.dl.len() {
                let c = &cache.dl[k];
                let phi = dl_interference(sc, d, i, k);
                x[gv.t_dl[k]] = c.gamma * phi / exp.psi_lin(sc, d, i, k);
            }
            for l in 0..g.ul.len() {
                let c = &cache.ul[l];
                let q = crate::rates::ul_phi(sc, d, i, l);
                let quad = c.ghat.dotc(&(&q * &c.ghat)).re;
                x[gv.q_ul[l]] = (quad - sc.noise_power * c.ghat.norm_squared()) / c.c1;
                x[gv.x_ul[l]] = c.gamma / exp.ul_gamma_lb(sc, d, i, l);
            }
            if self.spec.with_eves {
                for k in 0..g.dl.len() {
                    let b = gd.beta_dl[k] / anchor.beta_dl[k];
                    x[gv.beta_dl[k]] = b;
                    if let Some(&q) = gv.bq_dl.get(k) {
                        x[q] = b * b;
                    }
                    x[gv.gamma_dl[k]] = gd.gamma_dl[k];
                }
                for l in 0..g.ul.len() {
                    let b = gd.beta_ul[l] / anchor.beta_ul[l];
                    x[gv.beta_ul[l]] = b;
                    if let Some(&q) = gv.bq_ul.get(l) {
                        x[q] = b * b;
                    }
                    x[gv.gamma_ul[l]] = gd.gamma_ul[l];
                }
            }
        }
        x
    }
}
