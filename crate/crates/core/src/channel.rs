//! Topology placement, channel realizations and eavesdropper statistics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{db_to_linear, SystemConfig, NUM_GROUPS};
use crate::error::{Error, Result};
use crate::linalg::{crandn, crandn_scalar, CMat, CVec, C64};

/// Path loss in dB for a link of `d_km` kilometres.
pub fn path_loss_db(d_km: f64, los: bool) -> Result<f64> {
    if !(d_km > 0.0) || !d_km.is_finite() {
        return Err(Error::Domain(format!("path loss distance must be positive, got {d_km}")));
    }
    Ok(if los {
        103.8 + 20.9 * d_km.log10()
    } else {
        145.4 + 37.5 * d_km.log10()
    })
}

/// Linear power gain `10^(-PL/10)` for a distance in metres.
pub fn path_gain(d_m: f64, los: bool) -> Result<f64> {
    Ok(db_to_linear(-path_loss_db(d_m / 1000.0, los)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Zone {
    /// Disc between the minimum BS distance and the inner radius.
    Inner,
    /// Annulus between the inner radius and the cell edge.
    Outer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Node {
    pub distance_m: f64,
    pub angle_rad: f64,
    pub zone: Zone,
}

impl Node {
    pub fn distance_to(&self, other: &Node) -> f64 {
        let dphi = self.angle_rad - other.angle_rad;
        (self.distance_m.powi(2) + other.distance_m.powi(2)
            - 2.0 * self.distance_m * other.distance_m * dphi.cos())
        .max(0.0)
        .sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Topology {
    /// `dl[i][k]`
    pub dl: Vec<Vec<Node>>,
    /// `ul[i][l]`, in the original (unsorted) user order.
    pub ul: Vec<Vec<Node>>,
    pub eves: Vec<Node>,
}

pub fn dl_zone(group: usize) -> Zone {
    if group == 0 {
        Zone::Inner
    } else {
        Zone::Outer
    }
}

pub fn ul_zone(group: usize) -> Zone {
    if group == 0 {
        Zone::Outer
    } else {
        Zone::Inner
    }
}

pub fn eve_zone(m: usize) -> Zone {
    if m.is_multiple_of(2) {
        Zone::Inner
    } else {
        Zone::Outer
    }
}

pub fn zone_bounds(config: &SystemConfig, zone: Zone) -> (f64, f64) {
    match zone {
        Zone::Inner => (config.min_bs_distance_m, config.inner_radius_m),
        Zone::Outer => (config.inner_radius_m, config.cell_radius_m),
    }
}

/// Uniform-in-area point of a zone: `r = sqrt(a^2 + U (b^2 - a^2))`.
pub fn sample_in_zone<R: Rng + ?Sized>(config: &SystemConfig, zone: Zone, rng: &mut R) -> Node {
    let (a, b) = zone_bounds(config, zone);
    let u: f64 = rng.random();
    let r = (a * a + u * (b * b - a * a)).sqrt();
    let angle_rad = rng.random::<f64>() * std::f64::consts::TAU;
    Node { distance_m: r, angle_rad, zone }
}

/// Radial CDF of [`sample_in_zone`].
pub fn zone_radial_cdf(config: &SystemConfig, zone: Zone, r: f64) -> f64 {
    let (a, b) = zone_bounds(config, zone);
    ((r * r - a * a) / (b * b - a * a)).clamp(0.0, 1.0)
}

pub fn place_users<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> Topology {
    let dl = (0..NUM_GROUPS)
        .map(|i| (0..config.k).map(|_| sample_in_zone(config, dl_zone(i), rng)).collect())
        .collect();
    let ul = (0..NUM_GROUPS)
        .map(|i| (0..config.l).map(|_| sample_in_zone(config, ul_zone(i), rng)).collect())
        .collect();
    let eves = (0..config.m).map(|m| sample_in_zone(config, eve_zone(m), rng)).collect();
    Topology { dl, ul, eves }
}

/// Second-order statistics of one eavesdropper.
#[derive(Debug, Clone)]
pub struct EveStats {
    pub ne: usize,
    /// LOS gain of the BS-to-Eve link.
    pub bs_gain: f64,
    /// `E{H H^H} = bs_gain * ne * I`
    pub hbar: CMat,
    /// `ul_gain[i][l]`: LOS gain UL user to Eve, in decoding order.
    pub ul_gain: Vec<Vec<f64>>,
    /// `gbar[i][l] = ul_gain * ne`
    pub gbar: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct ChannelSet {
    pub nt: usize,
    pub nr: usize,
    /// `h[i][k]`
    pub h: Vec<Vec<CVec>>,
    /// `g[i][l]`, sorted within each group by descending norm (decoding order).
    pub g: Vec<Vec<CVec>>,
    /// `ul_order[i][l]` = original index of the UL user decoded `l`-th.
    pub ul_order: Vec<Vec<usize>>,
    /// `f[i][k][j][l]`: UL user `(j, l)` (decoding order) to DL user `(i, k)`.
    pub f: Vec<Vec<Vec<Vec<C64>>>>,
    /// Loop channel, `nt x nr`, unit per-entry second moment.
    pub g_si: CMat,
    pub sigma_si: f64,
    pub eves: Vec<EveStats>,
    pub noise_power: f64,
}

fn clamp_distance(config: &SystemConfig, d: f64) -> f64 {
    d.max(config.min_bs_distance_m)
}

/// Draws one realization of all channels for the given BS antenna counts.
pub fn draw_channels<R: Rng + ?Sized>(
    config: &SystemConfig,
    topo: &Topology,
    nt: usize,
    nr: usize,
    rng: &mut R,
) -> Result<ChannelSet> {
    let h: Vec<Vec<CVec>> = topo
        .dl
        .iter()
        .map(|grp| {
            grp.iter()
                .map(|n| Ok(crandn(rng, nt) * C64::from(path_gain(n.distance_m, true)?.sqrt())))
                .collect::<Result<_>>()
        })
        .collect::<Result<_>>()?;

    let mut g = Vec::with_capacity(NUM_GROUPS);
    let mut ul_order = Vec::with_capacity(NUM_GROUPS);
    for grp in &topo.ul {
        let raw: Vec<CVec> = grp
            .iter()
            .map(|n| Ok(crandn(rng, nr) * C64::from(path_gain(n.distance_m, true)?.sqrt())))
            .collect::<Result<_>>()?;
        let mut order: Vec<usize> = (0..raw.len()).collect();
        order.sort_by(|&a, &b| raw[b].norm().total_cmp(&raw[a].norm()));
        g.push(order.iter().map(|&o| raw[o].clone()).collect::<Vec<_>>());
        ul_order.push(order);
    }

    let mut f = Vec::with_capacity(NUM_GROUPS);
    for dl_grp in &topo.dl {
        let mut per_dl = Vec::with_capacity(dl_grp.len());
        for dl_node in dl_grp {
            let mut per_group = Vec::with_capacity(NUM_GROUPS);
            for (j, ul_grp) in topo.ul.iter().enumerate() {
                let mut row = Vec::with_capacity(ul_grp.len());
                for &o in &ul_order[j] {
                    let d = clamp_distance(config, dl_node.distance_to(&ul_grp[o]));
                    row.push(crandn_scalar(rng) * path_gain(d, false)?.sqrt());
                }
                per_group.push(row);
            }
            per_dl.push(per_group);
        }
        f.push(per_dl);
    }

    let kf = db_to_linear(config.rician_k_db);
    let los_amp = (kf / (kf + 1.0)).sqrt();
    let nlos_amp = (1.0 / (kf + 1.0)).sqrt();
    let g_si = CMat::from_fn(nt, nr, |_, _| {
        let phase = rng.random::<f64>() * std::f64::consts::TAU;
        C64::from_polar(los_amp, phase) + crandn_scalar(rng) * nlos_amp
    });

    let mut eves = Vec::with_capacity(topo.eves.len());
    for (m, node) in topo.eves.iter().enumerate() {
        let ne = config.ne[m];
        let bs_gain = path_gain(node.distance_m, true)?;
        let mut ul_gain = Vec::with_capacity(NUM_GROUPS);
        for (j, ul_grp) in topo.ul.iter().enumerate() {
            let row = ul_order[j]
                .iter()
                .map(|&o| path_gain(clamp_distance(config, node.distance_to(&ul_grp[o])), true))
                .collect::<Result<Vec<f64>>>()?;
            ul_gain.push(row);
        }
        let gbar = ul_gain
            .iter()
            .map(|r| r.iter().map(|&s| s * ne as f64).collect())
            .collect();
        eves.push(EveStats {
            ne,
            bs_gain,
            hbar: CMat::identity(nt, nt) * C64::from(bs_gain * ne as f64),
            ul_gain,
            gbar,
        });
    }

    Ok(ChannelSet {
        nt,
        nr,
        h,
        g,
        ul_order,
        f,
        g_si,
        sigma_si: config.sigma_si,
        eves,
        noise_power: config.noise_power_watts(),
    })
}

/// One concrete draw of every Eve channel.
#[derive(Debug, Clone)]
pub struct EveSample {
    /// `h[m]`: `nt x ne` BS-to-Eve matrix.
    pub h: Vec<CMat>,
    /// `g[m][i][l]`: UL-user-to-Eve vectors (decoding order).
    pub g: Vec<Vec<Vec<CVec>>>,
}

impl ChannelSet {
    pub fn k(&self) -> usize {
        self.h.first().map_or(0, |v| v.len())
    }

    pub fn l(&self) -> usize {
        self.g.first().map_or(0, |v| v.len())
    }

    /// Gaussian Eve channels whose second moments match the stored statistics.
    pub fn sample_eves<R: Rng + ?Sized>(&self, rng: &mut R) -> EveSample {
        let mut h = Vec::with_capacity(self.eves.len());
        let mut g = Vec::with_capacity(self.eves.len());
        for e in &self.eves {
            let s = e.bs_gain.sqrt();
            h.push(CMat::from_fn(self.nt, e.ne, |_, _| crandn_scalar(rng) * s));
            g.push(
                e.ul_gain
                    .iter()
                    .map(|row| row.iter().map(|&u| crandn(rng, e.ne) * C64::from(u.sqrt())).collect())
                    .collect(),
            );
        }
        EveSample { h, g }
    }
}

/// A placed topology with its FD channels and the `nt + nr` antenna HD channels.
#[derive(Debug, Clone)]
pub struct Instance {
    pub config: SystemConfig,
    pub topology: Topology,
    pub fd: ChannelSet,
    pub hd: ChannelSet,
}

impl Instance {
    pub fn generate(config: &SystemConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        let topology = place_users(config, &mut rng);
        let fd = draw_channels(config, &topology, config.nt, config.nr, &mut rng)?;
        let mut hd_rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        hd_rng.set_stream(1);
        let n = config.nt + config.nr;
        let hd = draw_channels(config, &topology, n, n, &mut hd_rng)?;
        Ok(Instance { config: config.clone(), topology, fd, hd })
    }
}
