use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec, C64};
use crate::scenario::{Scenario, TimeModel};

/// Decision variables of one scenario group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupDesign {
    pub w: Vec<CVec>,
    /// AN shaping matrix, `nt x nt`.
    pub v: CMat,
    pub rho: Vec<f64>,
    pub beta_dl: Vec<f64>,
    pub beta_ul: Vec<f64>,
    pub gamma_dl: Vec<f64>,
    pub gamma_ul: Vec<f64>,
}

impl GroupDesign {
    pub fn zeros(nt: usize, k: usize, l: usize) -> Self {
        GroupDesign {
            w: vec![CVec::zeros(nt); k],
            v: CMat::zeros(nt, nt),
            rho: vec![0.0; l],
            beta_dl: vec![0.0; k],
            beta_ul: vec![0.0; l],
            gamma_dl: vec![0.0; k],
            gamma_ul: vec![0.0; l],
        }
    }

    /// `sum_k ||w_k||^2 + ||V||_F^2`
    pub fn tx_power(&self) -> f64 {
        self.w.iter().map(|w| w.norm_squared()).sum::<f64>() + self.v.norm_squared()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignPoint {
    pub groups: Vec<GroupDesign>,
    /// Inverse time fractions, one per group.
    pub alpha: Vec<f64>,
    pub eta: f64,
}

impl DesignPoint {
    pub fn zeros(sc: &Scenario) -> Self {
        let groups = sc
            .groups
            .iter()
            .map(|g| GroupDesign::zeros(g.nt, g.dl.len(), g.ul.len()))
            .collect();
        let alpha = match &sc.time {
            TimeModel::Split => vec![2.0; sc.groups.len()],
            TimeModel::Fixed(t) => t.iter().map(|t| 1.0 / t).collect(),
        };
        DesignPoint { groups, alpha, eta: 0.0 }
    }

    pub fn tau(&self) -> Vec<f64> {
        self.alpha.iter().map(|a| 1.0 / a).collect()
    }

    /// Multiplies every amplitude (w, V, rho) by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        let cs = C64::from(s);
        for g in &mut out.groups {
            for w in &mut g.w {
                *w *= cs;
            }
            g.v *= cs;
            for r in &mut g.rho {
                *r *= s;
            }
        }
        out
    }

    pub fn check_shape(&self, sc: &Scenario) -> Result<()> {
        let bad = |m: String| Err(Error::Invariant(m));
        if self.groups.len() != sc.groups.len() || self.alpha.len() != sc.groups.len() {
            return bad("design and scenario disagree on the group count".into());
        }
        for (gd, g) in self.groups.iter().zip(&sc.groups) {
            if gd.w.len() != g.dl.len()
                || gd.w.iter().any(|w| w.len() != g.nt)
                || gd.v.shape() != (g.nt, g.nt)
                || gd.rho.len() != g.ul.len()
                || gd.beta_dl.len() != g.dl.len()
                || gd.gamma_dl.len() != g.dl.len()
                || gd.beta_ul.len() != g.ul.len()
                || gd.gamma_ul.len() != g.ul.len()
            {
                return bad("design variable dimensions do not match the scenario".into());
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> DesignJson {
        DesignJson {
            alpha: self.alpha.clone(),
            eta: self.eta,
            groups: self
                .groups
                .iter()
                .map(|g| GroupJson {
                    w: g.w.iter().map(|w| w.iter().map(|z| [z.re, z.im]).collect()).collect(),
                    v: (0..g.v.nrows())
                        .map(|r| (0..g.v.ncols()).map(|c| [g.v[(r, c)].re, g.v[(r, c)].im]).collect())
                        .collect(),
                    rho: g.rho.clone(),
                    beta_dl: g.beta_dl.clone(),
                    beta_ul: g.beta_ul.clone(),
                    gamma_dl: g.gamma_dl.clone(),
                    gamma_ul: g.gamma_ul.clone(),
                })
                .collect(),
        }
    }
}

/// Serializable form; complex numbers are `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignJson {
    pub alpha: Vec<f64>,
    pub eta: f64,
    pub groups: Vec<GroupJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupJson {
    pub w: Vec<Vec<[f64; 2]>>,
    pub v: Vec<Vec<[f64; 2]>>,
    pub rho: Vec<f64>,
    pub beta_dl: Vec<f64>,
    pub beta_ul: Vec<f64>,
    pub gamma_dl: Vec<f64>,
    pub gamma_ul: Vec<f64>,
}

impl From<&DesignJson> for DesignPoint {
    fn from(j: &DesignJson) -> Self {
        let cx = |p: &[f64; 2]| C64::new(p[0], p[1]);
        DesignPoint {
            alpha: j.alpha.clone(),
            eta: j.eta,
            groups: j
                .groups
                .iter()
                .map(|g| {
                    let n = g.v.len();
                    GroupDesign {
                        w: g.w.iter().map(|w| CVec::from_iterator(w.len(), w.iter().map(cx))).collect(),
                        v: CMat::from_fn(n, n, |r, c| cx(&g.v[r][c])),
                        rho: g.rho.clone(),
                        beta_dl: g.beta_dl.clone(),
                        beta_ul: g.beta_ul.clone(),
                        gamma_dl: g.gamma_dl.clone(),
                        gamma_ul: g.gamma_ul.clone(),
                    }
                })
                .collect(),
        }
    }
}
