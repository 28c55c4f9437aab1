//! Scenario constants and their on-disk (TOML) form.
//!
//! Everything is stored in watts and linear units inside [`SystemConfig`];
//! dB/dBm only appear in [`ConfigFile`], the text-facing representation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_GROUPS: usize = 2;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// DL users per group.
    pub k: usize,
    /// UL users per group.
    pub l: usize,
    /// Number of eavesdroppers.
    pub m: usize,
    pub nt: usize,
    pub nr: usize,
    /// Antennas per Eve.
    pub ne: Vec<usize>,
    pub p_bs_max: f64,
    /// `p_ul_max[i][l]`, watts.
    pub p_ul_max: Vec<Vec<f64>>,
    pub noise_psd_dbm_hz: f64,
    pub bandwidth_hz: f64,
    /// Residual self-interference gain, linear.
    pub sigma_si: f64,
    pub rician_k_db: f64,
    pub cell_radius_m: f64,
    pub inner_radius_m: f64,
    pub min_bs_distance_m: f64,
    pub epsilon_dl: Vec<Vec<f64>>,
    pub epsilon_ul: Vec<Vec<f64>>,
    pub rng_seed: u64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        ConfigFile::default()
            .into_config()
            .expect("default configuration is valid")
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.k + self.l == 0 {
            return bad("each group needs at least one user (k + l >= 1)".into());
        }
        if self.nt == 0 || self.nr == 0 {
            return bad("nt and nr must be at least 1".into());
        }
        if self.m == 0 {
            return bad("at least one eavesdropper is required".into());
        }
        if self.ne.len() != self.m || self.ne.contains(&0) {
            return bad(format!("ne must list {} positive antenna counts", self.m));
        }
        if !(0.0..1.0).contains(&self.sigma_si) {
            return bad(format!("sigma_si must lie in [0, 1), got {}", self.sigma_si));
        }
        if !(self.p_bs_max > 0.0 && self.p_bs_max.is_finite()) {
            return bad("p_bs_max must be positive".into());
        }
        if !(self.bandwidth_hz > 0.0) {
            return bad("bandwidth_hz must be positive".into());
        }
        check_grid("p_ul_max", &self.p_ul_max, self.l, |p| p > 0.0 && p.is_finite())?;
        check_grid("epsilon_dl", &self.epsilon_dl, self.k, |e| e > 0.0 && e < 1.0)?;
        check_grid("epsilon_ul", &self.epsilon_ul, self.l, |e| e > 0.0 && e < 1.0)?;
        if !(self.min_bs_distance_m > 0.0
            && self.min_bs_distance_m < self.inner_radius_m
            && self.inner_radius_m < self.cell_radius_m)
        {
            return bad(format!(
                "geometry must satisfy 0 < min_bs_distance_m ({}) < inner_radius_m ({}) < cell_radius_m ({})",
                self.min_bs_distance_m, self.inner_radius_m, self.cell_radius_m
            ));
        }
        Ok(())
    }

    pub fn noise_power_watts(&self) -> f64 {
        noise_power_watts(self.noise_psd_dbm_hz, self.bandwidth_hz)
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(s)?;
        file.into_config()
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}

fn check_grid(name: &str, g: &[Vec<f64>], per_group: usize, ok: impl Fn(f64) -> bool) -> Result<()> {
    if g.len() != NUM_GROUPS || g.iter().any(|row| row.len() != per_group) {
        return Err(Error::Config(format!(
            "{name} must be a {NUM_GROUPS} x {per_group} grid"
        )));
    }
    if let Some(v) = g.iter().flatten().find(|&&v| !ok(v)) {
        return Err(Error::Config(format!("{name} has an out-of-range entry {v}")));
    }
    Ok(())
}

/// `sigma^2 = 10^((psd - 30)/10) * bandwidth`
pub fn noise_power_watts(noise_psd_dbm_hz: f64, bandwidth_hz: f64) -> f64 {
    dbm_to_watts(noise_psd_dbm_hz) * bandwidth_hz
}

/// A scalar that is broadcast, or an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    fn expand(&self, n: usize, name: &str) -> Result<Vec<T>> {
        match self {
            OneOrMany::One(v) => Ok(vec![v.clone(); n]),
            OneOrMany::Many(v) if v.len() == n => Ok(v.clone()),
            OneOrMany::Many(v) => Err(Error::Config(format!(
                "{name} lists {} values, expected {n}",
                v.len()
            ))),
        }
    }
}

/// Per-group grid: a scalar or a `[[group-1 ...], [group-2 ...]]` array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Scalar(f64),
    Nested(Vec<Vec<f64>>),
}

impl Grid {
    fn expand(&self, per_group: usize, name: &str) -> Result<Vec<Vec<f64>>> {
        match self {
            Grid::Scalar(v) => Ok(vec![vec![*v; per_group]; NUM_GROUPS]),
            Grid::Nested(g) => {
                if g.len() != NUM_GROUPS || g.iter().any(|r| r.len() != per_group) {
                    return Err(Error::Config(format!(
                        "{name} must be a {NUM_GROUPS} x {per_group} grid"
                    )));
                }
                Ok(g.clone())
            }
        }
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Grid {
        match self {
            Grid::Scalar(v) => Grid::Scalar(f(*v)),
            Grid::Nested(g) => Grid::Nested(g.iter().map(|r| r.iter().map(|&v| f(v)).collect()).collect()),
        }
    }
}

/// Flat key/value form of [`SystemConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub k: usize,
    pub l: usize,
    pub m: usize,
    pub nt: usize,
    pub nr: usize,
    pub ne: OneOrMany<usize>,
    pub p_bs_max_dbm: f64,
    pub p_ul_max_dbm: Grid,
    pub noise_psd_dbm_hz: f64,
    pub bandwidth_hz: f64,
    /// Residual SI gain in dB; ignored when `sigma_si` is given.
    pub sigma_si_db: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_si: Option<f64>,
    pub rician_k_db: f64,
    pub cell_radius_m: f64,
    pub inner_radius_m: f64,
    pub min_bs_distance_m: f64,
    pub epsilon_dl: Grid,
    pub epsilon_ul: Grid,
    pub rng_seed: u64,
}

impl Default for ConfigFile {
    fn default() -> Self {
        ConfigFile {
            k: 2,
            l: 2,
            m: 2,
            nt: 5,
            nr: 5,
            ne: OneOrMany::One(2),
            p_bs_max_dbm: 26.0,
            p_ul_max_dbm: Grid::Scalar(23.0),
            noise_psd_dbm_hz: -174.0,
            bandwidth_hz: 10e6,
            sigma_si_db: -75.0,
            sigma_si: None,
            rician_k_db: 5.0,
            cell_radius_m: 100.0,
            inner_radius_m: 50.0,
            min_bs_distance_m: 10.0,
            epsilon_dl: Grid::Scalar(0.99),
            epsilon_ul: Grid::Scalar(0.99),
            rng_seed: 0,
        }
    }
}

impl ConfigFile {
    pub fn into_config(self) -> Result<SystemConfig> {
        let cfg = SystemConfig {
            k: self.k,
            l: self.l,
            m: self.m,
            nt: self.nt,
            nr: self.nr,
            ne: self.ne.expand(self.m, "ne")?,
            p_bs_max: dbm_to_watts(self.p_bs_max_dbm),
            p_ul_max: self.p_ul_max_dbm.map(dbm_to_watts).expand(self.l, "p_ul_max_dbm")?,
            noise_psd_dbm_hz: self.noise_psd_dbm_hz,
            bandwidth_hz: self.bandwidth_hz,
            sigma_si: self.sigma_si.unwrap_or_else(|| db_to_linear(self.sigma_si_db)),
            rician_k_db: self.rician_k_db,
            cell_radius_m: self.cell_radius_m,
            inner_radius_m: self.inner_radius_m,
            min_bs_distance_m: self.min_bs_distance_m,
            epsilon_dl: self.epsilon_dl.expand(self.k, "epsilon_dl")?,
            epsilon_ul: self.epsilon_ul.expand(self.l, "epsilon_ul")?,
            rng_seed: self.rng_seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
