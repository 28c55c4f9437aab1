use crate::design::DesignPoint;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, hpd_inverse, CMat, CVec, C64};
use crate::rates::{chi_bar, dl_interference, psi_bar, ul_phi};
use crate::scenario::{Scenario, TimeModel};

use super::{log_upper_coeffs, zeta_coeffs, zeta_lower};

#[derive(Debug, Clone, Copy)]
pub struct ExpansionOptions {
    /// `rho` anchors are floored at this fraction of `sqrt(P_ul_max)`.
    pub rho_floor_frac: f64,
    /// Lower clamp of the Eve SINR slacks.
    pub beta_min: f64,
    /// Trust margin factor: `delta = factor * ||h|| * ||w||`.
    pub trust_factor: f64,
}

impl Default for ExpansionOptions {
    fn default() -> Self {
        ExpansionOptions { rho_floor_frac: 1e-6, beta_min: 1e-9, trust_factor: 1e-8 }
    }
}

#[derive(Debug, Clone)]
pub struct DlCache {
    pub gamma: f64,
    /// `Re{h^H w}` at the (rotated) anchor.
    pub rbar: f64,
    pub phi: f64,
    pub coeffs: (f64, f64, f64),
    pub delta: f64,
}

#[derive(Debug, Clone)]
pub struct UlCache {
    pub gamma: f64,
    pub phi_inv: CMat,
    /// `Phi^{-1} g`
    pub ghat: CVec,
    /// `g^H Phi^{-1} g`
    pub c1: f64,
    pub coeffs: (f64, f64, f64),
    /// `Phi_l^{-1} - Phi_{l-1}^{-1}`
    pub omega: CMat,
    pub omega_min_eig: f64,
    /// `(A~, B~, C~)` of the joint tangent form.
    pub joint_coeffs: (f64, f64, f64),
}

#[derive(Debug, Clone)]
pub struct EveCache {
    /// `psi_bar` (DL) or `chi_bar` (UL) at the anchor, noise excluded.
    pub stat: f64,
    /// `(1 - eps^(1/M)) Ne sigma^2`
    pub margin: f64,
}

#[derive(Debug, Clone)]
pub struct GroupCache {
    pub dl: Vec<DlCache>,
    pub ul: Vec<UlCache>,
    /// `eve_dl[m][k]`
    pub eve_dl: Vec<Vec<EveCache>>,
    pub eve_ul: Vec<Vec<EveCache>>,
    /// Tangent coefficients of `ln(1+beta)` at each anchor slack.
    pub log_dl: Vec<(f64, f64)>,
    pub log_ul: Vec<(f64, f64)>,
}

/// Anchor of one convex-approximation step, with everything the surrogates need.
#[derive(Debug, Clone)]
pub struct ExpansionPoint {
    pub design: DesignPoint,
    pub groups: Vec<GroupCache>,
    pub split: bool,
}

impl ExpansionPoint {
    pub fn new(sc: &Scenario, d: &DesignPoint, opts: &ExpansionOptions) -> Result<Self> {
        d.check_shape(sc)?;
        let mut design = d.clone();
        let split = matches!(sc.time, TimeModel::Split);
        for (i, a) in design.alpha.iter().enumerate() {
            let ok = if split { *a > 1.0 } else { *a >= 1.0 };
            if !ok || !a.is_finite() {
                return Err(Error::InvalidExpansion(format!("alpha[{i}] = {a} is out of range")));
            }
        }
        for (g, gd) in sc.groups.iter().zip(design.groups.iter_mut()) {
            for (link, w) in g.dl.iter().zip(gd.w.iter_mut()) {
                let z = link.h.dotc(w);
                if !(z.norm() > 0.0) {
                    return Err(Error::InvalidExpansion(format!(
                        "beamformer of DL user {:?} has zero gain",
                        link.id
                    )));
                }
                *w *= z.conj() / z.norm();
            }
            for (link, r) in g.ul.iter().zip(gd.rho.iter_mut()) {
                *r = r.max(opts.rho_floor_frac * link.p_max.sqrt());
            }
            for b in gd.beta_dl.iter_mut().chain(gd.beta_ul.iter_mut()) {
                *b = if b.is_finite() { b.max(opts.beta_min) } else { opts.beta_min };
            }
        }

        let mut groups = Vec::with_capacity(sc.groups.len());
        for (i, g) in sc.groups.iter().enumerate() {
            let alpha = design.alpha[i];
            let gd = &design.groups[i];
            let mut dl = Vec::with_capacity(g.dl.len());
            for (k, link) in g.dl.iter().enumerate() {
                let phi = dl_interference(sc, &design, i, k);
                let rbar = link.h.dotc(&gd.w[k]).re;
                let gamma = rbar * rbar / phi;
                dl.push(DlCache {
                    gamma,
                    rbar,
                    phi,
                    coeffs: zeta_coeffs(gamma, alpha)?,
                    delta: opts.trust_factor * link.h.norm() * gd.w[k].norm(),
                });
            }
            let mut ul = Vec::with_capacity(g.ul.len());
            for (l, link) in g.ul.iter().enumerate() {
                let phi = ul_phi(sc, &design, i, l);
                let phi_inv = hpd_inverse(&phi)?;
                let ghat = &phi_inv * &link.g;
                let c1 = link.g.dotc(&ghat).re;
                let rho = gd.rho[l];
                let gamma = rho * rho * c1;
                // Phi^-1 - (Phi + rho^2 g g^H)^-1, in rank-one form
                let omega = &ghat * ghat.adjoint() * C64::from(rho * rho / (1.0 + gamma));
                let omega_min_eig = hermitian_eigenvalues(&omega).first().copied().unwrap_or(0.0);
                if omega_min_eig < -1e-12 * omega.norm().max(1.0) {
                    log::warn!("Omega for UL user {:?} has eigenvalue {omega_min_eig:.3e}", link.id);
                }
                let cbar = gamma.ln_1p() / alpha;
                ul.push(UlCache {
                    gamma,
                    phi_inv,
                    ghat,
                    c1,
                    coeffs: zeta_coeffs(gamma, alpha)?,
                    omega,
                    omega_min_eig,
                    joint_coeffs: (2.0 * cbar - gamma / alpha, 2.0 * gamma / (rho * alpha), cbar / alpha),
                });
            }
            let eve_dl = (0..g.eves.len())
                .map(|m| {
                    (0..g.dl.len())
                        .map(|k| EveCache {
                            stat: psi_bar(sc, &design, i, k, m),
                            margin: sc.eve_margin(g.dl[k].epsilon, g.eves[m].ne),
                        })
                        .collect()
                })
                .collect();
            let eve_ul = (0..g.eves.len())
                .map(|m| {
                    (0..g.ul.len())
                        .map(|l| EveCache {
                            stat: chi_bar(sc, &design, i, l, m),
                            margin: sc.eve_margin(g.ul[l].epsilon, g.eves[m].ne),
                        })
                        .collect()
                })
                .collect();
            let log_dl = gd.beta_dl.iter().map(|&b| log_upper_coeffs(b)).collect::<Result<_>>()?;
            let log_ul = gd.beta_ul.iter().map(|&b| log_upper_coeffs(b)).collect::<Result<_>>()?;
            groups.push(GroupCache { dl, ul, eve_dl, eve_ul, log_dl, log_ul });
        }
        Ok(ExpansionPoint { design, groups, split })
    }

    pub fn alpha(&self, i: usize) -> f64 {
        self.design.alpha[i]
    }

    /// `Psi = rbar (2 Re{h^H w} - rbar)`
    pub fn psi_lin(&self, sc: &Scenario, x: &DesignPoint, i: usize, k: usize) -> f64 {
        let c = &self.groups[i].dl[k];
        c.rbar * (2.0 * sc.groups[i].dl[k].h.dotc(&x.groups[i].w[k]).re - c.rbar)
    }

    /// DL rate surrogate `A - B phi/Psi - C alpha`; `-inf` outside the trust region.
    pub fn dl_surrogate(&self, sc: &Scenario, x: &DesignPoint, i: usize, k: usize) -> f64 {
        let c = &self.groups[i].dl[k];
        let psi = self.psi_lin(sc, x, i, k);
        if !(psi > 0.0) {
            return f64::NEG_INFINITY;
        }
        let phi = dl_interference(sc, x, i, k);
        c.coeffs.0 - c.coeffs.1 * phi / psi - c.coeffs.2 * x.alpha[i]
    }

    /// Concave minorant of the UL SINR: `2 rho rhobar c1 - rhobar^2 ghat^H Phi(X) ghat`.
    pub fn ul_gamma_lb(&self, sc: &Scenario, x: &DesignPoint, i: usize, l: usize) -> f64 {
        let c = &self.groups[i].ul[l];
        let rb = self.design.groups[i].rho[l];
        let q = ul_phi(sc, x, i, l);
        let quad = c.ghat.dotc(&(&q * &c.ghat)).re;
        2.0 * x.groups[i].rho[l] * rb * c.c1 - rb * rb * quad
    }

    /// UL rate surrogate `A - B/gamma_lb(X) - C alpha`; `-inf` where `gamma_lb <= 0`.
    pub fn ul_surrogate(&self, sc: &Scenario, x: &DesignPoint, i: usize, l: usize) -> f64 {
        let lb = self.ul_gamma_lb(sc, x, i, l);
        if !(lb > 0.0) {
            return f64::NEG_INFINITY;
        }
        zeta_lower(self.groups[i].ul[l].coeffs, lb, x.alpha[i])
    }

    /// Joint first-order form `A~ + B~ rho - Tr((rho^2 g g^H + Phi(X)) Omega)/alphabar - C~ alpha`.
    ///
    /// Tight at the anchor, but not a global minorant when `X` and `alpha`
    /// move together; kept for diagnostics only.
    pub fn ul_surrogate_joint_tangent(&self, sc: &Scenario, x: &DesignPoint, i: usize, l: usize) -> f64 {
        let c = &self.groups[i].ul[l];
        let g = &sc.groups[i].ul[l].g;
        let rho = x.groups[i].rho[l];
        let m = ul_phi(sc, x, i, l) + g * g.adjoint() * C64::from(rho * rho);
        let phi_k = (m * &c.omega).trace().re;
        let (a, b, cc) = c.joint_coeffs;
        a + b * rho - phi_k / self.alpha(i) - cc * x.alpha[i]
    }

    /// Linearized `psi_bar` (noise excluded).
    pub fn psi_bar_lin(&self, sc: &Scenario, x: &DesignPoint, i: usize, k: usize, m: usize) -> f64 {
        let e = &sc.groups[i].eves[m];
        let (a, b) = (&self.design.groups[i], &x.groups[i]);
        let mut s = 0.0;
        for j in (0..a.w.len()).filter(|&j| j != k) {
            s += (&e.hbar * &a.w[j]).dotc(&b.w[j]).re;
        }
        s += (a.v.adjoint() * &e.hbar * &b.v).trace().re;
        for (l, gb) in e.gbar.iter().enumerate() {
            s += a.rho[l] * b.rho[l] * gb;
        }
        2.0 * s - self.groups[i].eve_dl[m][k].stat
    }

    /// Linearized `chi_bar` (noise excluded).
    pub fn chi_bar_lin(&self, sc: &Scenario, x: &DesignPoint, i: usize, l: usize, m: usize) -> f64 {
        let e = &sc.groups[i].eves[m];
        let (a, b) = (&self.design.groups[i], &x.groups[i]);
        let mut s = 0.0;
        for j in 0..a.w.len() {
            s += (&e.hbar * &a.w[j]).dotc(&b.w[j]).re;
        }
        s += (a.v.adjoint() * &e.hbar * &b.v).trace().re;
        for (j, gb) in e.gbar.iter().enumerate().filter(|(j, _)| *j != l) {
            s += a.rho[j] * b.rho[j] * gb;
        }
        2.0 * s - self.groups[i].eve_ul[m][l].stat
    }

    /// Upper bound `a/alpha + b W(beta, alpha)` of `ln(1+beta)/alpha` for the DL slack.
    pub fn eve_log_upper(&self, ab: (f64, f64), beta0: f64, beta: f64, alpha: f64, i: usize) -> Result<f64> {
        if self.split {
            Ok(ab.0 / alpha + ab.1 * super::bilinear_upper(beta, alpha, beta0, self.alpha(i))?)
        } else {
            Ok((ab.0 + ab.1 * beta) / alpha)
        }
    }

    /// Inner-approximated BS power LHS; exact counterpart is [`power_lhs_split`].
    pub fn power_lhs_lin(&self, x: &DesignPoint) -> f64 {
        let a2 = self.alpha(1);
        let xb = &self.design.groups[0];
        let p1 = x.groups[0].tx_power();
        let p2 = x.groups[1].tx_power();
        let cross: f64 = xb.w.iter().zip(&x.groups[0].w).map(|(a, b)| a.dotc(b).re).sum::<f64>()
            + xb.v.iter().zip(x.groups[0].v.iter()).map(|(a, b)| (a.conj() * b).re).sum::<f64>();
        p1 + p2 / x.alpha[1] - 2.0 / a2 * cross + xb.tx_power() * x.alpha[1] / (a2 * a2)
    }

    /// Inner-approximated group-1 UL power LHS.
    pub fn ul_power_lin(&self, x: &DesignPoint, l: usize) -> f64 {
        let a2 = self.alpha(1);
        let rb = self.design.groups[0].rho[l];
        let r = x.groups[0].rho[l];
        r * r - 2.0 * rb * r / a2 + rb * rb * x.alpha[1] / (a2 * a2)
    }
}

/// `(1 - 1/alpha_2) P_1 + P_2 / alpha_2`
pub fn power_lhs_split(x: &DesignPoint) -> f64 {
    let a2 = x.alpha[1];
    (1.0 - 1.0 / a2) * x.groups[0].tx_power() + x.groups[1].tx_power() / a2
}

/// `(1 - 1/alpha_2) rho_{1,l}^2`
pub fn ul_power_split(x: &DesignPoint, l: usize) -> f64 {
    let r = x.groups[0].rho[l];
    (1.0 - 1.0 / x.alpha[1]) * r * r
}
