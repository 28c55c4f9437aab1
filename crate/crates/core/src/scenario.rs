//! Optimization-facing view of a channel set for one transmission mode.
//!
//! A [`Scenario`] lists the user groups that are served in separate time
//! fractions. The proposed FD scheme has two groups sharing the block through
//! `tau_i = 1/alpha_i`; conventional FD collapses everyone into one group with
//! `tau = 1`; HD serves all DL users, then all UL users, each for half the block.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelSet, Instance};
use crate::config::{SystemConfig, NUM_GROUPS};
use crate::error::{Error, Result};
use crate::linalg::{crandn, crandn_scalar, CMat, CVec, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    ProposedFd,
    ConventionalFd,
    Hd,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::ProposedFd, Mode::ConventionalFd, Mode::Hd];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::ProposedFd => "proposed-fd",
            Mode::ConventionalFd => "conventional-fd",
            Mode::Hd => "hd",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proposed-fd" => Ok(Mode::ProposedFd),
            "conventional-fd" => Ok(Mode::ConventionalFd),
            "hd" => Ok(Mode::Hd),
            other => Err(Error::Config(format!(
                "unknown mode `{other}` (expected proposed-fd, conventional-fd or hd)"
            ))),
        }
    }
}

/// How time fractions are obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum TimeModel {
    /// Two groups, `tau_i = 1/alpha_i` optimized subject to `sum tau_i <= 1`.
    Split,
    /// Constant fractions, one per group.
    Fixed(Vec<f64>),
}

/// User identifier in the original configuration: group and index within it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UserId {
    pub group: usize,
    pub index: usize,
}

#[derive(Debug, Clone)]
pub struct DlLink {
    pub id: UserId,
    pub h: CVec,
    /// CCI coefficient from every UL link of the same scenario group.
    pub cci: Vec<C64>,
    pub epsilon: f64,
}

#[derive(Debug, Clone)]
pub struct UlLink {
    pub id: UserId,
    pub g: CVec,
    pub p_max: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone)]
pub struct EveLink {
    pub ne: usize,
    pub bs_gain: f64,
    /// `E{H H^H}`, size `nt x nt` of the group.
    pub hbar: CMat,
    /// Per UL link of the group.
    pub ul_gain: Vec<f64>,
    pub gbar: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Group {
    /// Transmit antennas in use (0 when the BS is silent).
    pub nt: usize,
    pub nr: usize,
    pub dl: Vec<DlLink>,
    /// UL links in decoding order.
    pub ul: Vec<UlLink>,
    /// Effective loop channel `sqrt(sigma_si) * G_SI` (`nt x nr`), if any.
    pub si: Option<CMat>,
    pub eves: Vec<EveLink>,
}

impl Group {
    pub fn transmits(&self) -> bool {
        self.nt > 0
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub mode: Mode,
    pub groups: Vec<Group>,
    pub time: TimeModel,
    pub p_bs_max: f64,
    pub noise_power: f64,
    /// Number of eavesdroppers `M`.
    pub m: usize,
    /// Channel and power scaling applied by [`Scenario::normalized`]:
    /// design amplitudes here times `amp_scale` give watts^(1/2).
    pub amp_scale: f64,
}

impl Scenario {
    pub fn build(inst: &Instance, mode: Mode) -> Result<Self> {
        match mode {
            Mode::ProposedFd => Ok(proposed(&inst.config, &inst.fd)),
            Mode::ConventionalFd => Ok(conventional(&inst.config, &inst.fd)),
            Mode::Hd => Ok(half_duplex(&inst.config, &inst.hd)),
        }
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    /// Rescales to unit noise power and unit BS power budget. Rates and
    /// feasibility are unchanged once designs are mapped with `amp_scale`.
    pub fn normalized(&self) -> Scenario {
        let p = self.p_bs_max;
        let s2 = self.noise_power;
        let ch = (p / s2).sqrt();
        let pow = p / s2;
        let cs = C64::from(ch);
        let groups = self
            .groups
            .iter()
            .map(|g| Group {
                nt: g.nt,
                nr: g.nr,
                dl: g
                    .dl
                    .iter()
                    .map(|d| DlLink {
                        id: d.id,
                        h: &d.h * cs,
                        cci: d.cci.iter().map(|f| f * ch).collect(),
                        epsilon: d.epsilon,
                    })
                    .collect(),
                ul: g
                    .ul
                    .iter()
                    .map(|u| UlLink { id: u.id, g: &u.g * cs, p_max: u.p_max / p, epsilon: u.epsilon })
                    .collect(),
                si: g.si.as_ref().map(|s| s * cs),
                eves: g
                    .eves
                    .iter()
                    .map(|e| EveLink {
                        ne: e.ne,
                        bs_gain: e.bs_gain * pow,
                        hbar: &e.hbar * C64::from(pow),
                        ul_gain: e.ul_gain.iter().map(|x| x * pow).collect(),
                        gbar: e.gbar.iter().map(|x| x * pow).collect(),
                    })
                    .collect(),
            })
            .collect();
        Scenario {
            mode: self.mode,
            groups,
            time: self.time.clone(),
            p_bs_max: 1.0,
            noise_power: 1.0,
            m: self.m,
            amp_scale: self.amp_scale * p.sqrt(),
        }
    }

    /// Draws Eve channels independently per group, Gaussian with the stored second moments.
    pub fn sample_eves<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Vec<GroupEveSample> {
        self.groups
            .iter()
            .map(|g| {
                let mut h = Vec::with_capacity(g.eves.len());
                let mut gv = Vec::with_capacity(g.eves.len());
                for e in &g.eves {
                    let s = e.bs_gain.sqrt();
                    h.push(CMat::from_fn(g.nt, e.ne, |_, _| crandn_scalar(rng) * s));
                    gv.push(e.ul_gain.iter().map(|&u| crandn(rng, e.ne) * C64::from(u.sqrt())).collect());
                }
                GroupEveSample { h, g: gv }
            })
            .collect()
    }

    /// `(1 - eps^(1/M)) * Ne * sigma^2`
    pub fn eve_margin(&self, epsilon: f64, ne: usize) -> f64 {
        (1.0 - epsilon.powf(1.0 / self.m as f64)) * ne as f64 * self.noise_power
    }
}

/// One draw of Eve channels for a scenario group.
#[derive(Debug, Clone)]
pub struct GroupEveSample {
    /// `h[m]`: `nt x ne`.
    pub h: Vec<CMat>,
    /// `g[m][l]`: per UL link.
    pub g: Vec<Vec<CVec>>,
}

struct UlRef {
    group: usize,
    pos: usize,
}

fn ul_link(cfg: &SystemConfig, ch: &ChannelSet, r: &UlRef) -> UlLink {
    let orig = ch.ul_order[r.group][r.pos];
    UlLink {
        id: UserId { group: r.group, index: orig },
        g: ch.g[r.group][r.pos].clone(),
        p_max: cfg.p_ul_max[r.group][orig],
        epsilon: cfg.epsilon_ul[r.group][orig],
    }
}

fn make_group(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    dl: &[(usize, usize)],
    ul: &[UlRef],
    nt: usize,
    nr: usize,
    with_si: bool,
) -> Group {
    let dl_links = dl
        .iter()
        .map(|&(i, k)| DlLink {
            id: UserId { group: i, index: k },
            h: ch.h[i][k].clone(),
            cci: ul.iter().map(|r| ch.f[i][k][r.group][r.pos]).collect(),
            epsilon: cfg.epsilon_dl[i][k],
        })
        .collect();
    let ul_links = ul.iter().map(|r| ul_link(cfg, ch, r)).collect();
    let si = (with_si && nt > 0 && nr > 0).then(|| &ch.g_si * C64::from(ch.sigma_si.sqrt()));
    let eves = ch
        .eves
        .iter()
        .map(|e| EveLink {
            ne: e.ne,
            bs_gain: e.bs_gain,
            hbar: CMat::identity(nt, nt) * C64::from(e.bs_gain * e.ne as f64),
            ul_gain: ul.iter().map(|r| e.ul_gain[r.group][r.pos]).collect(),
            gbar: ul.iter().map(|r| e.gbar[r.group][r.pos]).collect(),
        })
        .collect();
    Group { nt, nr, dl: dl_links, ul: ul_links, si, eves }
}

fn proposed(cfg: &SystemConfig, ch: &ChannelSet) -> Scenario {
    let groups = (0..NUM_GROUPS)
        .map(|i| {
            let dl: Vec<_> = (0..cfg.k).map(|k| (i, k)).collect();
            let ul: Vec<_> = (0..cfg.l).map(|pos| UlRef { group: i, pos }).collect();
            make_group(cfg, ch, &dl, &ul, ch.nt, ch.nr, true)
        })
        .collect();
    Scenario {
        mode: Mode::ProposedFd,
        groups,
        time: TimeModel::Split,
        p_bs_max: cfg.p_bs_max,
        noise_power: ch.noise_power,
        m: cfg.m,
        amp_scale: 1.0,
    }
}

fn all_dl(cfg: &SystemConfig) -> Vec<(usize, usize)> {
    (0..NUM_GROUPS).flat_map(|i| (0..cfg.k).map(move |k| (i, k))).collect()
}

/// All UL users, re-sorted by descending channel norm for a joint SIC order.
fn all_ul_sorted(cfg: &SystemConfig, ch: &ChannelSet) -> Vec<UlRef> {
    let mut refs: Vec<UlRef> = (0..NUM_GROUPS)
        .flat_map(|group| (0..cfg.l).map(move |pos| UlRef { group, pos }))
        .collect();
    refs.sort_by(|a, b| ch.g[b.group][b.pos].norm().total_cmp(&ch.g[a.group][a.pos].norm()));
    refs
}

fn conventional(cfg: &SystemConfig, ch: &ChannelSet) -> Scenario {
    let group = make_group(cfg, ch, &all_dl(cfg), &all_ul_sorted(cfg, ch), ch.nt, ch.nr, true);
    Scenario {
        mode: Mode::ConventionalFd,
        groups: vec![group],
        time: TimeModel::Fixed(vec![1.0]),
        p_bs_max: cfg.p_bs_max,
        noise_power: ch.noise_power,
        m: cfg.m,
        amp_scale: 1.0,
    }
}

fn half_duplex(cfg: &SystemConfig, ch: &ChannelSet) -> Scenario {
    let dl_phase = make_group(cfg, ch, &all_dl(cfg), &[], ch.nt, 0, false);
    let ul_phase = make_group(cfg, ch, &[], &all_ul_sorted(cfg, ch), 0, ch.nr, false);
    Scenario {
        mode: Mode::Hd,
        groups: vec![dl_phase, ul_phase],
        time: TimeModel::Fixed(vec![0.5, 0.5]),
        p_bs_max: cfg.p_bs_max,
        noise_power: ch.noise_power,
        m: cfg.m,
        amp_scale: 1.0,
    }
}
