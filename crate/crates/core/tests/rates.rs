mod common;

use common::*;
use fdsec_core::linalg::C64;
use fdsec_core::rates::{
    bs_power, chi_bar, dl_interference, dl_rate, eve_rates, psi_bar, secrecy_rates, ul_rate, ul_sum_rate_logdet,
};
use fdsec_core::{Mode, SystemConfig};
use proptest::prelude::*;

#[test]
fn dl_interference_matches_straight_line_sum() {
    let mut r = rng(21);
    for seed in 1..=5 {
        let sc = scenario(seed, Mode::ProposedFd);
        let d = random_design(&sc, &mut r);
        for (i, g) in sc.groups.iter().enumerate() {
            let gd = &d.groups[i];
            for k in 0..g.dl.len() {
                let h = &g.dl[k].h;
                let mut phi = sc.noise_power;
                for (j, w) in gd.w.iter().enumerate() {
                    if j == k {
                        continue;
                    }
                    let mut s = C64::new(0.0, 0.0);
                    for n in 0..g.nt {
                        s += h[n].conj() * w[n];
                    }
                    phi += s.norm_sqr();
                }
                for c in 0..g.nt {
                    let mut s = C64::new(0.0, 0.0);
                    for n in 0..g.nt {
                        s += h[n].conj() * gd.v[(n, c)];
                    }
                    phi += s.norm_sqr();
                }
                for (l, f) in g.dl[k].cci.iter().enumerate() {
                    phi += gd.rho[l].powi(2) * f.norm_sqr();
                }
                let got = dl_interference(&sc, &d, i, k);
                assert!((got - phi).abs() <= 1e-12 * phi, "{got} vs {phi}");
            }
        }
    }
}

#[test]
fn sic_rates_sum_to_log_det() {
    let worst = mmse_identity_suite(100, 22);
    assert!(worst <= 1e-9, "{worst:e}");
}

#[test]
fn rates_survive_normalization() {
    let mut r = rng(23);
    for mode in Mode::ALL {
        let raw = raw_scenario(&config(7), mode);
        let norm = raw.normalized();
        let dn = random_design(&norm, &mut r);
        let dr = dn.scaled(norm.amp_scale / raw.amp_scale);
        for (i, g) in raw.groups.iter().enumerate() {
            for k in 0..g.dl.len() {
                let (a, b) = (dl_rate(&raw, &dr, i, k), dl_rate(&norm, &dn, i, k));
                assert!((a - b).abs() <= 1e-9 * b.max(1.0), "{mode} dl: {a} vs {b}");
            }
            for l in 0..g.ul.len() {
                let (a, b) = (ul_rate(&raw, &dr, i, l).unwrap(), ul_rate(&norm, &dn, i, l).unwrap());
                assert!((a - b).abs() <= 1e-9 * b.max(1.0), "{mode} ul: {a} vs {b}");
            }
        }
        let pr = bs_power(&dr) / raw.p_bs_max;
        assert!((pr - bs_power(&dn)).abs() <= 1e-9 * pr.max(1.0));
    }
}

#[test]
fn ul_rates_fall_as_self_interference_grows() {
    let mut r = rng(24);
    for seed in 1..=5 {
        let base = scenario(seed, Mode::ProposedFd);
        let d = random_design(&base, &mut r);
        let mut prev: Option<Vec<f64>> = None;
        for si_db in [-200.0, -150.0, -120.0, -110.0, -100.0, -90.0, -75.0] {
            let cfg = SystemConfig { sigma_si: 10f64.powf(si_db / 10.0), ..config(seed) };
            let sc = raw_scenario(&cfg, Mode::ProposedFd).normalized();
            let rates: Vec<f64> = (0..2)
                .flat_map(|i| (0..sc.groups[i].ul.len()).map(move |l| (i, l)))
                .map(|(i, l)| ul_rate(&sc, &d, i, l).unwrap())
                .collect();
            if let Some(p) = &prev {
                for (a, b) in rates.iter().zip(p) {
                    assert!(*a <= b + 1e-12 * b.max(1.0), "sigma_si {si_db} dB: {a} > {b}");
                }
            }
            prev = Some(rates);
        }
    }
}

#[test]
fn scalar_eve_statistics_by_hand() {
    let cfg = SystemConfig::from_toml_str("k = 1\nl = 1\nm = 1\nnt = 2\nnr = 2\nne = 1\nrng_seed = 5").unwrap();
    let sc = raw_scenario(&cfg, Mode::ProposedFd).normalized();
    let mut r = rng(25);
    let d = random_design(&sc, &mut r);
    for (i, g) in sc.groups.iter().enumerate() {
        let e = &g.eves[0];
        let gd = &d.groups[i];
        let an = e.bs_gain * gd.v.norm_squared();
        let ul = gd.rho[0].powi(2) * e.ul_gain[0];
        let dl = e.bs_gain * gd.w[0].norm_squared();
        let psi = psi_bar(&sc, &d, i, 0, 0);
        let chi = chi_bar(&sc, &d, i, 0, 0);
        assert!((psi - (an + ul)).abs() <= 1e-12 * psi);
        assert!((chi - (an + dl)).abs() <= 1e-12 * chi);
    }
}

#[test]
fn eve_dl_rate_grows_with_beam_power() {
    let mut r = rng(26);
    for seed in 1..=4 {
        let sc = scenario(seed, Mode::ProposedFd);
        let d = random_design(&sc, &mut r);
        let sample = sc.sample_eves(&mut r);
        for (i, si) in sample.iter().enumerate() {
            for k in 0..sc.groups[i].dl.len() {
                let mut prev = f64::NEG_INFINITY;
                for c in [0.0, 0.1, 0.5, 1.0, 2.0, 10.0] {
                    let mut x = d.clone();
                    x.groups[i].w[k] *= C64::from(c);
                    for m in 0..sc.groups[i].eves.len() {
                        let v = eve_rates(&sc, &x, si, i, m).0[k];
                        if m == 0 {
                            assert!(v >= prev - 1e-14, "{v} < {prev}");
                            prev = v;
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn secrecy_uses_the_strongest_of_two_eves() {
    let sc = scenario(8, Mode::ProposedFd);
    assert_eq!(sc.m, 2);
    let mut r = rng(27);
    let d = random_design(&sc, &mut r);
    for _ in 0..50 {
        let sample = sc.sample_eves(&mut r);
        let rep = secrecy_rates(&sc, &d, Some(&sample)).unwrap();
        for (i, si) in sample.iter().enumerate() {
            let (a0, b0) = eve_rates(&sc, &d, si, i, 0);
            let (a1, b1) = eve_rates(&sc, &d, si, i, 1);
            let g = &rep.groups[i];
            for k in 0..a0.len() {
                let leak = if a0[k] > a1[k] { a0[k] } else { a1[k] };
                let want = if g.dl_rate[k] > leak { g.dl_rate[k] - leak } else { 0.0 };
                assert_eq!(g.secrecy_dl[k], want);
            }
            for l in 0..b0.len() {
                let leak = if b0[l] > b1[l] { b0[l] } else { b1[l] };
                let want = if g.ul_rate[l] > leak { g.ul_rate[l] - leak } else { 0.0 };
                assert_eq!(g.secrecy_ul[l], want);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn log_det_chain_rule(seed in 1u64..500, design_seed in 0u64..1000) {
        let sc = scenario(seed, Mode::ConventionalFd);
        let d = random_design(&sc, &mut rng(design_seed));
        let sum: f64 = (0..sc.groups[0].ul.len()).map(|l| ul_rate(&sc, &d, 0, l).unwrap()).sum();
        let ld = ul_sum_rate_logdet(&sc, &d, 0).unwrap();
        prop_assert!((sum - ld).abs() <= 1e-9 * ld.abs().max(1.0));
    }

    #[test]
    fn secrecy_never_negative(seed in 1u64..200, design_seed in 0u64..1000) {
        let sc = scenario(seed, Mode::ProposedFd);
        let mut r = rng(design_seed);
        let d = random_design(&sc, &mut r);
        let rep = secrecy_rates(&sc, &d, Some(&sc.sample_eves(&mut r))).unwrap();
        for g in &rep.groups {
            for (s, own) in g.secrecy_dl.iter().zip(&g.dl_rate).chain(g.secrecy_ul.iter().zip(&g.ul_rate)) {
                prop_assert!(*s >= 0.0 && *s <= *own);
            }
        }
    }
}
