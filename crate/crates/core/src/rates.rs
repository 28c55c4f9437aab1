//! Exact rate and power expressions for a design point.
//!
//! All rates are in nats/s/Hz.

use serde::Serialize;

use crate::design::DesignPoint;
use crate::error::Result;
use crate::linalg::{hpd_solve, log_det_hpd, quad_form, CMat, C64};
use crate::scenario::{GroupEveSample, Scenario};

pub fn tau(d: &DesignPoint, i: usize) -> f64 {
    1.0 / d.alpha[i]
}

/// Interference-plus-noise `phi` at DL user `(i, k)`.
pub fn dl_interference(sc: &Scenario, d: &DesignPoint, i: usize, k: usize) -> f64 {
    let g = &sc.groups[i];
    let gd = &d.groups[i];
    let h = &g.dl[k].h;
    let mui: f64 = gd
        .w
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != k)
        .map(|(_, w)| h.dotc(w).norm_sqr())
        .sum();
    let an = (h.adjoint() * &gd.v).norm_squared();
    let cci: f64 = g.dl[k]
        .cci
        .iter()
        .zip(&gd.rho)
        .map(|(f, r)| r * r * f.norm_sqr())
        .sum();
    mui + an + cci + sc.noise_power
}

pub fn dl_sinr(sc: &Scenario, d: &DesignPoint, i: usize, k: usize) -> f64 {
    let h = &sc.groups[i].dl[k].h;
    h.dotc(&d.groups[i].w[k]).norm_sqr() / dl_interference(sc, d, i, k)
}

pub fn dl_rate(sc: &Scenario, d: &DesignPoint, i: usize, k: usize) -> f64 {
    tau(d, i) * dl_sinr(sc, d, i, k).ln_1p()
}

/// `sigma_si G^H (sum_k w w^H + V V^H) G + sigma^2 I`
pub fn ul_noise_cov(sc: &Scenario, d: &DesignPoint, i: usize) -> CMat {
    let g = &sc.groups[i];
    let gd = &d.groups[i];
    let mut phi = CMat::identity(g.nr, g.nr) * C64::from(sc.noise_power);
    if let Some(si) = &g.si {
        let sh = si.adjoint();
        for w in &gd.w {
            let a = &sh * w;
            phi += &a * a.adjoint();
        }
        let b = &sh * &gd.v;
        phi += &b * b.adjoint();
    }
    phi
}

/// Covariance `Phi_{i,l}` seen when decoding UL user `l` (users `j > l` still present).
pub fn ul_phi(sc: &Scenario, d: &DesignPoint, i: usize, l: usize) -> CMat {
    let mut phi = ul_noise_cov(sc, d, i);
    let g = &sc.groups[i];
    for j in (l + 1)..g.ul.len() {
        let r = d.groups[i].rho[j];
        phi += &g.ul[j].g * g.ul[j].g.adjoint() * C64::from(r * r);
    }
    phi
}

pub fn ul_sinr(sc: &Scenario, d: &DesignPoint, i: usize, l: usize) -> Result<f64> {
    let g = &sc.groups[i].ul[l].g;
    let phi = ul_phi(sc, d, i, l);
    let x = hpd_solve(&phi, g)?;
    let r = d.groups[i].rho[l];
    Ok(r * r * g.dotc(&x).re)
}

pub fn ul_rate(sc: &Scenario, d: &DesignPoint, i: usize, l: usize) -> Result<f64> {
    Ok(tau(d, i) * ul_sinr(sc, d, i, l)?.ln_1p())
}

/// `tau * (ln det(Phi_noise + sum rho^2 g g^H) - ln det Phi_noise)`
pub fn ul_sum_rate_logdet(sc: &Scenario, d: &DesignPoint, i: usize) -> Result<f64> {
    let noise = ul_noise_cov(sc, d, i);
    let mut full = noise.clone();
    for (u, r) in sc.groups[i].ul.iter().zip(&d.groups[i].rho) {
        full += &u.g * u.g.adjoint() * C64::from(r * r);
    }
    Ok(tau(d, i) * (log_det_hpd(&full)? - log_det_hpd(&noise)?))
}

/// Time-averaged BS transmit power `sum_i tau_i (sum_k ||w||^2 + ||V||_F^2)`.
pub fn bs_power(d: &DesignPoint) -> f64 {
    d.groups
        .iter()
        .zip(&d.alpha)
        .map(|(g, a)| g.tx_power() / a)
        .sum()
}

/// `tau_i rho^2`
pub fn ul_power(d: &DesignPoint, i: usize, l: usize) -> f64 {
    let r = d.groups[i].rho[l];
    r * r / d.alpha[i]
}

/// `Tr(V^H Hbar V)`
fn an_leak(hbar: &CMat, v: &CMat) -> f64 {
    (v.adjoint() * hbar * v).trace().re
}

/// Expected Eve interference for DL user `(i, k)` at Eve `m`, without noise.
pub fn psi_bar(sc: &Scenario, d: &DesignPoint, i: usize, k: usize, m: usize) -> f64 {
    let e = &sc.groups[i].eves[m];
    let gd = &d.groups[i];
    let mui: f64 = gd
        .w
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != k)
        .map(|(_, w)| quad_form(&e.hbar, w))
        .sum();
    let ul: f64 = gd.rho.iter().zip(&e.gbar).map(|(r, gb)| r * r * gb).sum();
    mui + an_leak(&e.hbar, &gd.v) + ul
}

/// Expected Eve interference for UL user `(i, l)` at Eve `m`, without noise.
pub fn chi_bar(sc: &Scenario, d: &DesignPoint, i: usize, l: usize, m: usize) -> f64 {
    let e = &sc.groups[i].eves[m];
    let gd = &d.groups[i];
    let dl: f64 = gd.w.iter().map(|w| quad_form(&e.hbar, w)).sum();
    let ul: f64 = gd
        .rho
        .iter()
        .zip(&e.gbar)
        .enumerate()
        .filter(|(j, _)| *j != l)
        .map(|(_, (r, gb))| r * r * gb)
        .sum();
    dl + an_leak(&e.hbar, &gd.v) + ul
}

/// Eve `m` rates against every DL and UL user of group `i` for one sampled channel.
pub fn eve_rates(
    sc: &Scenario,
    d: &DesignPoint,
    sample: &GroupEveSample,
    i: usize,
    m: usize,
) -> (Vec<f64>, Vec<f64>) {
    let g = &sc.groups[i];
    let gd = &d.groups[i];
    let t = tau(d, i);
    let hm = &sample.h[m];
    let noise = g.eves[m].ne as f64 * sc.noise_power;
    let sig: Vec<f64> = gd.w.iter().map(|w| (hm.adjoint() * w).norm_squared()).collect();
    let an = if g.nt > 0 { (hm.adjoint() * &gd.v).norm_squared() } else { 0.0 };
    let ulp: Vec<f64> = gd
        .rho
        .iter()
        .zip(&sample.g[m])
        .map(|(r, gv)| r * r * gv.norm_squared())
        .collect();
    let sig_total: f64 = sig.iter().sum();
    let ul_total: f64 = ulp.iter().sum();
    let dl = sig
        .iter()
        .map(|s| {
            let psi = sig_total - s + an + ul_total + noise;
            t * (s / psi).ln_1p()
        })
        .collect();
    let ul = ulp
        .iter()
        .map(|p| {
            let chi = sig_total + an + ul_total - p + noise;
            t * (p / chi).ln_1p()
        })
        .collect();
    (dl, ul)
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupRates {
    pub dl_rate: Vec<f64>,
    pub ul_rate: Vec<f64>,
    /// `eve_dl_rate[m][k]`; empty in statistic mode.
    pub eve_dl_rate: Vec<Vec<f64>>,
    pub eve_ul_rate: Vec<Vec<f64>>,
    pub secrecy_dl: Vec<f64>,
    pub secrecy_ul: Vec<f64>,
    pub ul_power: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateReport {
    pub groups: Vec<GroupRates>,
    pub bs_power: f64,
}

impl RateReport {
    pub fn min_secrecy(&self) -> f64 {
        self.groups
            .iter()
            .flat_map(|g| g.secrecy_dl.iter().chain(&g.secrecy_ul))
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Exact rates and secrecy rates. With `eves = Some(..)` the Eve rates come
/// from the sampled channels; otherwise the `Gamma` caps of the design stand in.
pub fn secrecy_rates(sc: &Scenario, d: &DesignPoint, eves: Option<&[GroupEveSample]>) -> Result<RateReport> {
    let mut groups = Vec::with_capacity(sc.groups.len());
    for (i, g) in sc.groups.iter().enumerate() {
        let gd = &d.groups[i];
        let dl_rate: Vec<f64> = (0..g.dl.len()).map(|k| dl_rate(sc, d, i, k)).collect();
        let ul_rate: Vec<f64> = (0..g.ul.len()).map(|l| ul_rate(sc, d, i, l)).collect::<Result<_>>()?;
        let (eve_dl_rate, eve_ul_rate): (Vec<_>, Vec<_>) = match eves {
            Some(s) => (0..g.eves.len()).map(|m| eve_rates(sc, d, &s[i], i, m)).unzip(),
            None => (Vec::new(), Vec::new()),
        };
        let cap = |own: f64, idx: usize, per_eve: &Vec<Vec<f64>>, gamma: &[f64]| {
            let leak = if eves.is_some() {
                per_eve.iter().map(|r| r[idx]).fold(0.0, f64::max)
            } else {
                gamma[idx]
            };
            (own - leak).max(0.0)
        };
        let secrecy_dl = dl_rate
            .iter()
            .enumerate()
            .map(|(k, &r)| cap(r, k, &eve_dl_rate, &gd.gamma_dl))
            .collect();
        let secrecy_ul = ul_rate
            .iter()
            .enumerate()
            .map(|(l, &r)| cap(r, l, &eve_ul_rate, &gd.gamma_ul))
            .collect();
        groups.push(GroupRates {
            dl_rate,
            ul_rate,
            eve_dl_rate,
            eve_ul_rate,
            secrecy_dl,
            secrecy_ul,
            ul_power: (0..g.ul.len()).map(|l| ul_power(d, i, l)).collect(),
        });
    }
    Ok(RateReport { groups, bs_power: bs_power(d) })
}
