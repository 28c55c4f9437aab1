mod common;

use common::*;
use fdsec_core::linalg::{CMat, CVec, C64};
use fdsec_core::outage::{empirical_outage, wilson, LinkKind};
use fdsec_core::path_following::{run, SolverOptions};
use fdsec_core::scenario::{DlLink, EveLink, Group, TimeModel, UserId};
use fdsec_core::{DesignPoint, Mode, Scenario};

/// One single-antenna DL user, no AN, no UL users, `m` identical
/// single-antenna Eves with mean channel gain `gain`.
fn scalar(m: usize, gain: f64) -> Scenario {
    Scenario {
        mode: Mode::ConventionalFd,
        groups: vec![Group {
            nt: 1,
            nr: 1,
            dl: vec![DlLink {
                id: UserId { group: 0, index: 0 },
                h: CVec::from_element(1, C64::new(1.0, 0.0)),
                cci: vec![],
                epsilon: 0.9,
            }],
            ul: vec![],
            si: None,
            eves: (0..m)
                .map(|_| EveLink {
                    ne: 1,
                    bs_gain: gain,
                    hbar: CMat::from_element(1, 1, C64::from(gain)),
                    ul_gain: vec![],
                    gbar: vec![],
                })
                .collect(),
        }],
        time: TimeModel::Fixed(vec![1.0]),
        p_bs_max: 4.0,
        noise_power: 1.0,
        m,
        amp_scale: 1.0,
    }
}

fn scalar_design(sc: &Scenario, power: f64, gamma: f64) -> DesignPoint {
    let mut d = DesignPoint::zeros(sc);
    d.groups[0].w[0] = CVec::from_element(1, C64::from(power.sqrt()));
    d.groups[0].gamma_dl[0] = gamma;
    d
}

#[test]
fn scalar_outage_matches_exponential_cdf() {
    // |h|^2 p / sigma^2 is exponential with mean p * gain.
    let (p, gain) = (2.0, 0.5);
    let sc = scalar(1, gain);
    for x in [0.35, 1.2, 3.0] {
        let gamma = f64::ln_1p(x);
        let d = scalar_design(&sc, p, gamma);
        let rep = empirical_outage(&sc, &d, 20_000, 41).unwrap();
        let c = &rep.constraints[0];
        assert_eq!(c.kind, LinkKind::Dl);
        let want = 1.0 - (-x / (p * gain)).exp();
        assert!((c.prob - want).abs() <= 4.0 * c.half_width(), "x {x}: {} vs {want}", c.prob);
    }
}

#[test]
fn limits_of_the_rate_cap() {
    let sc = scalar(2, 0.5);
    let d = scalar_design(&sc, 2.0, 1e6);
    let rep = empirical_outage(&sc, &d, 2000, 42).unwrap();
    assert_eq!(rep.constraints[0].prob, 1.0);
    assert!(rep.constraints[0].exceed.iter().all(|&e| e == 0.0));
    let d = scalar_design(&sc, 2.0, 0.0);
    let rep = empirical_outage(&sc, &d, 2000, 42).unwrap();
    assert!(rep.constraints[0].prob < 1e-3);
    assert!(rep.constraints[0].markov_bound.iter().all(|b| b.is_infinite()));
}

#[test]
fn per_eve_margin_composes_over_independent_eves() {
    // Each Eve stays below the cap with probability eps^(1/M); with
    // independent Eves the joint probability is eps.
    let eps: f64 = 0.99;
    for m in [1usize, 2, 4] {
        let sc = scalar(m, 0.5);
        let q = eps.powf(1.0 / m as f64);
        let x = -(1.0 - q).ln() * 2.0 * 0.5;
        let d = scalar_design(&sc, 2.0, x.ln_1p());
        let rep = empirical_outage(&sc, &d, 20_000, 43 + m as u64).unwrap();
        let c = &rep.constraints[0];
        assert!((c.prob - eps).abs() <= 4.0 * c.half_width(), "M = {m}: {}", c.prob);
        for e in &c.exceed {
            let (lo, hi) = wilson((e * 20_000.0).round() as usize, 20_000);
            assert!(*e <= 1.0 - q + 2.0 * (hi - lo), "M = {m}: {e}");
        }
    }
    let sc = scalar(1, 1.0);
    let mut last = f64::INFINITY;
    for e in [0.5, 0.9, 0.95, 0.99] {
        let v = sc.eve_margin(e, 2);
        assert!(v < last);
        last = v;
    }
    let two = scalar(2, 1.0);
    assert!(two.eve_margin(0.9, 1) < sc.eve_margin(0.9, 1));
}

#[test]
fn markov_bound_holds_without_interference() {
    let sc = scalar(1, 0.5);
    for x in [0.5, 2.0, 8.0] {
        let d = scalar_design(&sc, 2.0, f64::ln_1p(x));
        let rep = empirical_outage(&sc, &d, 10_000, 44).unwrap();
        for (bound, emp, hw) in rep.markov_pairs() {
            assert!((bound - 1.0 / x).abs() < 1e-12);
            assert!(emp <= bound + 3.0 * hw, "{emp} > {bound}");
        }
    }
}

#[test]
fn sampling_is_reproducible() {
    let sc = scenario(6, Mode::ProposedFd);
    let out = run(&sc, &SolverOptions::default()).unwrap();
    let a = empirical_outage(&out.normalized, &out.normalized_design, 3000, 7).unwrap();
    let b = empirical_outage(&out.normalized, &out.normalized_design, 3000, 7).unwrap();
    let probs = |r: &fdsec_core::OutageReport| r.constraints.iter().map(|c| c.prob).collect::<Vec<_>>();
    assert_eq!(probs(&a), probs(&b));
    assert_eq!(a.constraints.len(), 2 * (2 + 2));
    assert!(empirical_outage(&out.normalized, &out.normalized_design, 10, 7).is_err());
}
