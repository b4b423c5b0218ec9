#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use cfsim_core::circuit::{CircuitDoc, Owner, SiteDescriptor, Source};
use cfsim_core::{Circuit, Element, PathId, Polarization, SiteId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Small random circuit: 2 to 4 in-place paths, a mixing layer, then a
/// random sequence of splitters, phases and Bob sites (at most 5), one
/// detector per path and a random non-empty legitimate set.
pub fn random_circuit(seed: u64) -> Circuit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_paths = rng.gen_range(2..=4);
    let path = |i: usize| format!("p{i}");
    let mut slices: Vec<Vec<Element>> = Vec::new();
    let mut sites = Vec::new();

    let bs = |rng: &mut ChaCha8Rng| {
        let a = rng.gen_range(0..n_paths);
        let mut b = rng.gen_range(0..n_paths - 1);
        if b >= a {
            b += 1;
        }
        let angle = rng.gen_range(0.15..1.4);
        Element::beam_splitter(path(a), path(b), path(a), path(b), angle)
    };
    for i in 1..n_paths {
        let angle = rng.gen_range(0.3..1.2);
        slices.push(vec![Element::beam_splitter(path(0), path(i), path(0), path(i), angle)]);
    }

    let n_sites = rng.gen_range(1..=5);
    let mut placed = 0;
    let layers = rng.gen_range(3..=8);
    for layer in 0..layers {
        let remaining = layers - layer;
        let must_place = n_sites - placed >= remaining;
        match rng.gen_range(0..3) {
            _ if must_place || (placed < n_sites && rng.gen_bool(0.5)) => {
                let p = path(rng.gen_range(0..n_paths));
                let id = format!("s{placed}");
                sites.push(SiteDescriptor {
                    id: SiteId::new(&id),
                    path: PathId::new(&p),
                    slice: slices.len(),
                    owner: Owner::Bob,
                });
                slices.push(vec![Element::coupler(p.as_str(), id.as_str())]);
                slices.push(vec![Element::rotator(p.as_str(), id.as_str())]);
                placed += 1;
            }
            0 => {
                let p = path(rng.gen_range(0..n_paths));
                slices.push(vec![Element::mirror(p.as_str(), rng.gen_range(-3.0..3.0))]);
            }
            _ => slices.push(vec![bs(&mut rng)]),
        }
    }
    slices.push(vec![bs(&mut rng)]);

    let detectors: BTreeMap<String, PathId> =
        (0..n_paths).map(|i| (format!("d{i}"), PathId::new(path(i)))).collect();
    let mut legit: BTreeSet<String> = detectors
        .keys()
        .filter(|_| rng.gen_bool(0.5))
        .cloned()
        .collect();
    if legit.is_empty() {
        legit.insert("d0".into());
    }
    Circuit::new(CircuitDoc {
        name: format!("random-{seed}"),
        slices,
        source: Source {
            path: PathId::new(path(0)),
            polarization: Polarization::H,
        },
        detectors,
        sites,
        legitimate_outcomes: legit,
        reference_path_count: 1,
        parameters: BTreeMap::new(),
    })
    .expect("generated circuit is valid")
}
