//! Monte Carlo check of the probabilistic Eve constraints and of the
//! Markov-type bound behind their deterministic replacement.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::design::DesignPoint;
use crate::error::{Error, Result};
use crate::linalg::quad_form;
use crate::rates::{chi_bar, eve_rates, psi_bar};
use crate::scenario::{Scenario, UserId};

pub const MIN_SAMPLES: usize = 1000;
const CHUNK: usize = 512;
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkKind {
    Dl,
    Ul,
}

/// Wilson score interval for `k` successes out of `n`.
pub fn wilson(k: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n_f = n as f64;
    let p = k as f64 / n_f;
    let z2 = Z95 * Z95;
    let den = 1.0 + z2 / n_f;
    let centre = (p + z2 / (2.0 * n_f)) / den;
    let half = Z95 * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / den;
    ((centre - half).max(0.0).min(p), (centre + half).min(1.0).max(p))
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstraintOutage {
    pub kind: LinkKind,
    pub user: UserId,
    pub epsilon: f64,
    pub gamma: f64,
    /// Empirical `Prob(max_m C_Eve <= Gamma)`.
    pub prob: f64,
    pub ci: (f64, f64),
    /// Per Eve: empirical `Prob(C_Eve,m >= Gamma)`.
    pub exceed: Vec<f64>,
    /// Per Eve: analytic bound on `Prob(C_Eve,m >= Gamma)`.
    pub markov_bound: Vec<f64>,
}

impl ConstraintOutage {
    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci.1 - self.ci.0)
    }

    /// `prob >= epsilon - 3 * half-width`
    pub fn ok(&self) -> bool {
        self.prob >= self.epsilon - 3.0 * self.half_width()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OutageReport {
    pub n_samples: usize,
    pub constraints: Vec<ConstraintOutage>,
}

impl OutageReport {
    pub fn all_ok(&self) -> bool {
        self.constraints.iter().all(ConstraintOutage::ok)
    }

    pub fn worst_margin(&self) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.prob - (c.epsilon - 3.0 * c.half_width()))
            .fold(f64::INFINITY, f64::min)
    }

    /// `(bound, empirical, half-width)` per constraint and Eve.
    pub fn markov_pairs(&self) -> Vec<(f64, f64, f64)> {
        let n = self.n_samples;
        self.constraints
            .iter()
            .flat_map(|c| {
                c.markov_bound.iter().zip(&c.exceed).map(move |(b, e)| {
                    let k = (e * n as f64).round() as usize;
                    let (lo, hi) = wilson(k, n);
                    (*b, *e, 0.5 * (hi - lo))
                })
            })
            .collect()
    }
}

/// `(w^H Hbar w + (1 - e^{alpha Gamma}) psi) / ((e^{alpha Gamma} - 1) Ne sigma^2)`;
/// infinite when `Gamma = 0`.
fn markov_value(signal: f64, interference: f64, alpha: f64, gamma: f64, ne: usize, noise: f64) -> f64 {
    let e = (alpha * gamma).exp_m1();
    if !(e > 0.0) {
        return f64::INFINITY;
    }
    (signal - e * interference) / (e * ne as f64 * noise)
}

#[derive(Default, Clone)]
struct Counts {
    /// Per constraint: samples with `max_m C <= Gamma`.
    within: Vec<usize>,
    /// Per constraint and Eve: samples with `C_m >= Gamma`.
    exceed: Vec<Vec<usize>>,
}

impl Counts {
    fn zeros(shape: &[usize]) -> Self {
        Counts { within: vec![0; shape.len()], exceed: shape.iter().map(|&m| vec![0; m]).collect() }
    }

    fn add(mut self, other: Counts) -> Self {
        for (a, b) in self.within.iter_mut().zip(other.within) {
            *a += b;
        }
        for (a, b) in self.exceed.iter_mut().zip(other.exceed) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        self
    }
}

/// Draws `n_samples` independent Eve channel sets and counts, for every
/// rate cap, how often the best Eve stays below it.
pub fn empirical_outage(sc: &Scenario, d: &DesignPoint, n_samples: usize, seed: u64) -> Result<OutageReport> {
    if n_samples < MIN_SAMPLES {
        return Err(Error::Config(format!("outage check needs at least {MIN_SAMPLES} samples, got {n_samples}")));
    }
    d.check_shape(sc)?;
    let mut entries = Vec::new();
    for (i, g) in sc.groups.iter().enumerate() {
        let gd = &d.groups[i];
        let alpha = d.alpha[i];
        for (k, link) in g.dl.iter().enumerate() {
            let bound = g
                .eves
                .iter()
                .enumerate()
                .map(|(m, e)| {
                    let s = quad_form(&e.hbar, &gd.w[k]);
                    markov_value(s, psi_bar(sc, d, i, k, m), alpha, gd.gamma_dl[k], e.ne, sc.noise_power)
                })
                .collect();
            entries.push((LinkKind::Dl, i, k, link.id, link.epsilon, gd.gamma_dl[k], bound));
        }
        for (l, link) in g.ul.iter().enumerate() {
            let bound = g
                .eves
                .iter()
                .enumerate()
                .map(|(m, e)| {
                    let r = gd.rho[l];
                    let s = r * r * e.gbar[l];
                    markov_value(s, chi_bar(sc, d, i, l, m), alpha, gd.gamma_ul[l], e.ne, sc.noise_power)
                })
                .collect();
            entries.push((LinkKind::Ul, i, l, link.id, link.epsilon, gd.gamma_ul[l], bound));
        }
    }
    let shape: Vec<usize> = entries.iter().map(|e| sc.groups[e.1].eves.len()).collect();

    let chunks = n_samples.div_ceil(CHUNK);
    let counts = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let n = CHUNK.min(n_samples - c * CHUNK);
            let mut acc = Counts::zeros(&shape);
            for _ in 0..n {
                let sample = sc.sample_eves(&mut rng);
                let per_group: Vec<Vec<(Vec<f64>, Vec<f64>)>> = (0..sc.groups.len())
                    .map(|i| (0..sc.groups[i].eves.len()).map(|m| eve_rates(sc, d, &sample[i], i, m)).collect())
                    .collect();
                for (c_idx, (kind, i, j, _, _, gamma, _)) in entries.iter().enumerate() {
                    let mut worst = f64::NEG_INFINITY;
                    for (m, (dl, ul)) in per_group[*i].iter().enumerate() {
                        let rate = match kind {
                            LinkKind::Dl => dl[*j],
                            LinkKind::Ul => ul[*j],
                        };
                        if rate >= *gamma {
                            acc.exceed[c_idx][m] += 1;
                        }
                        worst = worst.max(rate);
                    }
                    if worst <= *gamma {
                        acc.within[c_idx] += 1;
                    }
                }
            }
            acc
        })
        .reduce(|| Counts::zeros(&shape), Counts::add);

    let nf = n_samples as f64;
    let constraints = entries
        .into_iter()
        .enumerate()
        .map(|(c, (kind, _, _, user, epsilon, gamma, markov_bound))| ConstraintOutage {
            kind,
            user,
            epsilon,
            gamma,
            prob: counts.within[c] as f64 / nf,
            ci: wilson(counts.within[c], n_samples),
            exceed: counts.exceed[c].iter().map(|&x| x as f64 / nf).collect(),
            markov_bound,
        })
        .collect();
    Ok(OutageReport { n_samples, constraints })
}

/// Per constraint and Eve, `(bound, empirical exceed probability, half-width)`.
pub fn markov_bound_check(sc: &Scenario, d: &DesignPoint, n_samples: usize, seed: u64) -> Result<Vec<(f64, f64, f64)>> {
    Ok(empirical_outage(sc, d, n_samples, seed)?.markov_pairs())
}
