use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use cfsim_core::catalog::{bob_sites, site_grid_index};
use cfsim_core::circuit::{evolve_backward, evolve_forward, outcome_distribution};
use cfsim_core::{build, Error, ModeLabel, Outcome, Polarization, ProtocolName, ProtocolSpec, RunParams};

fn click(c: &cfsim_core::Circuit, d: &str) -> f64 {
    outcome_distribution(c, &RunParams::ideal()).unwrap()[&Outcome::detector(d, Polarization::H)]
}

#[test]
fn names_round_trip() {
    for name in ProtocolName::ALL {
        assert_eq!(name.as_str().parse::<ProtocolName>().unwrap(), name);
    }
    assert!("zeno_chain".parse::<ProtocolName>().is_err());
}

#[test]
fn parameter_validation() {
    for (m, n) in [(1, 4), (2, 3), (4, 7)] {
        let err = build(&ProtocolSpec::zeno(m, n)).unwrap_err();
        assert!(matches!(err, Error::Validation { .. }), "({m},{n})");
    }
    assert!(build(&ProtocolSpec::new(ProtocolName::AsbChain).n(1)).is_err());
    assert!(build(&ProtocolSpec::new(ProtocolName::KPath).k(0)).is_err());
    assert!(build(&ProtocolSpec::new(ProtocolName::CoherentBounce).k(0)).is_err());
    assert!(build(&ProtocolSpec::new(ProtocolName::AvZeno).m(2).n(4)).is_ok());
}

#[test]
fn site_registries() {
    let (m, n) = (3, 8);
    let sites = bob_sites(&ProtocolSpec::zeno(m, n)).unwrap();
    assert_eq!(sites.len(), m * n);
    let idx: Vec<(usize, usize)> = sites.iter().map(|s| site_grid_index(s.id.as_str()).unwrap()).collect();
    let want: Vec<(usize, usize)> = (1..=m).flat_map(|a| (1..=n).map(move |b| (a, b))).collect();
    assert_eq!(idx, want);

    assert_eq!(bob_sites(&ProtocolSpec::new(ProtocolName::AvZeno).m(m).n(n)).unwrap().len(), 2 * m * n);
    let ev: Vec<String> = bob_sites(&ProtocolSpec::new(ProtocolName::EvIfm))
        .unwrap()
        .into_iter()
        .map(|s| s.id.to_string())
        .collect();
    assert_eq!(ev, ["B"]);
    assert_eq!(bob_sites(&ProtocolSpec::new(ProtocolName::AvNested)).unwrap().len(), 2);
    assert_eq!(bob_sites(&ProtocolSpec::new(ProtocolName::KPath).k(5)).unwrap().len(), 5);
    assert_eq!(bob_sites(&ProtocolSpec::new(ProtocolName::AsbChain).n(6)).unwrap().len(), 6);
}

#[test]
fn reference_path_counts() {
    let k = |spec: ProtocolSpec| build(&spec).unwrap().reference_path_count();
    assert_eq!(k(ProtocolSpec::new(ProtocolName::KPath).k(6)), 6);
    assert_eq!(k(ProtocolSpec::new(ProtocolName::Reference)), 1);
    assert_eq!(k(ProtocolSpec::new(ProtocolName::CoherentBounce).k(6)), 1);
}

#[test]
fn nested_mzi_blocked_is_dark() {
    let c = build(&ProtocolSpec::new(ProtocolName::NestedMzi).blocked(true)).unwrap();
    assert!(click(&c, "D") < 1e-20);
}

#[test]
fn zeno_open_and_blocked() {
    for m in [4usize, 8, 16] {
        let n = 8 * m;
        let open = build(&ProtocolSpec::zeno(m, n)).unwrap();
        let mf = m as f64;
        assert!(click(&open, "D0") >= 1.0 - PI * PI / (4.0 * mf) - 2.0 / n as f64);
        let d1 = click(&open, "D1");
        let want = PI * PI / (4.0 * mf * mf);
        assert!((d1 - want).abs() <= 10.0 / mf * want, "M = {m}: {d1} vs {want}");

        let blocked = build(&ProtocolSpec::zeno(m, n).blocked(true)).unwrap();
        assert!(click(&blocked, "D0") <= 2.0 * (PI / (2.0 * mf)).sin().powi(2));
        assert!(click(&blocked, "D1") > 1.0 - PI * PI / (2.0 * mf));
    }
}

#[test]
fn zeno_forward_amplitudes() {
    let (m, n) = (3, 8);
    let c = build(&ProtocolSpec::zeno(m, n)).unwrap();
    let states = evolve_forward(&c, &RunParams::ideal()).unwrap().states;
    let ext = PI / (2.0 * m as f64);
    let int = PI / (2.0 * n as f64);
    for s in c.bob_sites() {
        let (mm, nn) = site_grid_index(s.id.as_str()).unwrap();
        let a = states[s.slice].amplitude(&ModeLabel::path(s.path.as_str())).norm();
        // Open inner chains rotate fully into Bob's arm.
        let want = ext.cos().powi(mm as i32 - 1) * ext.sin() * (nn as f64 * int).sin();
        assert!((a - want).abs() < 1e-10, "{}: {a} vs {want}", s.id);
    }
}

#[test]
fn zeno_d1_backward_lives_in_last_row() {
    let (m, n) = (4, 16);
    let c = build(&ProtocolSpec::zeno(m, n)).unwrap();
    let back = evolve_backward(&c, "D1", &RunParams::ideal()).unwrap();
    let (mut inside, mut outside): (f64, f64) = (0.0, 0.0);
    for s in c.bob_sites() {
        let (mm, _) = site_grid_index(s.id.as_str()).unwrap();
        let a = back[s.slice].amplitude(&ModeLabel::path(s.path.as_str())).norm();
        if mm == m {
            inside = inside.max(a);
        } else {
            outside = outside.max(a);
        }
    }
    assert!(outside < 0.2 * inside, "{outside} vs {inside}");
}

#[test]
fn asb_blocked_alice_click() {
    for n in [4usize, 16] {
        let c = build(&ProtocolSpec::new(ProtocolName::AsbChain).n(n).blocked(true)).unwrap();
        let want = (PI / (2.0 * n as f64)).cos().powi(2 * n as i32);
        assert_abs_diff_eq!(click(&c, "alice"), want, epsilon = 1e-12);
        let open = build(&ProtocolSpec::new(ProtocolName::AsbChain).n(n)).unwrap();
        assert!(click(&open, "alice") < 1e-20);
    }
}

#[test]
fn every_protocol_builds_both_ways() {
    for name in ProtocolName::ALL {
        for blocked in [false, true] {
            let spec = ProtocolSpec::new(name).m(2).n(4).k(2).blocked(blocked);
            let c = build(&spec).unwrap();
            assert!(!c.legitimate_outcomes().is_empty());
            assert!(c.bob_sites().count() >= 1);
        }
    }
}
