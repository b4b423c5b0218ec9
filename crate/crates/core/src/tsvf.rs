//! Two-state vectors and weak values of path projectors.
//!
//! Weak values are taken on the undistorted circuit (ε = θ = 0) with an
//! H-polarized postselection, at the boundary just before the site's coupler.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circuit::engine::{EngineParams, EnvMode};
use crate::circuit::{evolve_backward, evolve_forward, Circuit, RunParams, SiteDescriptor};
use crate::error::{Error, Result};
use crate::state::{inner_product, CovectorState, ModeLabel, PureState, SiteId};

/// Overlaps below this make weak values singular.
pub const SINGULAR_OVERLAP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TwoStateVector {
    pub forward: PureState,
    pub backward: CovectorState,
    pub slice: usize,
    pub overlap: Complex64,
}

impl TwoStateVector {
    /// Weak value of the projector onto the labels selected by `predicate`.
    pub fn weak_value<F>(&self, predicate: F) -> WeakValue
    where
        F: Fn(&ModeLabel) -> bool,
    {
        if self.overlap.norm() < SINGULAR_OVERLAP {
            return WeakValue::Singular;
        }
        let num: Complex64 = self
            .backward
            .amplitudes()
            .filter(|(l, _)| predicate(l))
            .map(|(l, b)| b * self.forward.amplitude(l))
            .sum();
        WeakValue::Value(num / self.overlap)
    }

    pub fn path_weak_value(&self, path: &str) -> WeakValue {
        self.weak_value(|l| l.path.as_str() == path)
    }
}

/// Pre- and postselected states at `boundary` for a click of `detector`.
pub fn two_state_vector(
    circuit: &Circuit,
    detector: &str,
    boundary: usize,
) -> Result<TwoStateVector> {
    if boundary > circuit.n_slices() {
        return Err(Error::validation(
            "slice",
            format!("boundary {boundary} out of range 0..={}", circuit.n_slices()),
        ));
    }
    let params = RunParams::ideal();
    let forward = evolve_forward(circuit, &params)?.states.swap_remove(boundary);
    let backward = evolve_backward(circuit, detector, &params)?.swap_remove(boundary);
    let overlap = inner_product(&backward, &forward);
    Ok(TwoStateVector {
        forward,
        backward,
        slice: boundary,
        overlap,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeakValue {
    Value(Complex64),
    Singular,
}

impl WeakValue {
    pub fn value(self) -> Option<Complex64> {
        match self {
            WeakValue::Value(v) => Some(v),
            WeakValue::Singular => None,
        }
    }

    pub fn is_singular(self) -> bool {
        matches!(self, WeakValue::Singular)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakValueTable {
    pub detector: String,
    pub overlap: Complex64,
    pub values: BTreeMap<SiteId, WeakValue>,
}

impl WeakValueTable {
    pub fn get(&self, site: &str) -> Option<WeakValue> {
        self.values.get(site).copied()
    }

    pub fn is_singular(&self) -> bool {
        self.overlap.norm() < SINGULAR_OVERLAP
    }
}

/// Forward amplitudes `(H, V)` on each site's path at the site boundary.
pub(crate) fn forward_at_sites(circuit: &Circuit, sites: &[&SiteDescriptor]) -> Vec<[Complex64; 2]> {
    let prog = circuit.program();
    let by_boundary = group_by_boundary(circuit, sites);
    let mut out = vec![[Complex64::new(0.0, 0.0); 2]; sites.len()];
    let ep = EngineParams {
        epsilon: 0.0,
        theta: 0.0,
        distorted: &[],
        env: EnvMode::Off,
    };
    let mut reg = prog.initial();
    prog.run_forward(&mut reg, 0, prog.n_slices(), &ep, |b, r| {
        for &(i, p) in &by_boundary[b] {
            out[i] = [r.base[2 * p], r.base[2 * p + 1]];
        }
    });
    out
}

/// Overlap and backward amplitudes on each site's path for an H click at
/// `detector`.
pub(crate) fn backward_at_sites(
    circuit: &Circuit,
    detector: &str,
    sites: &[&SiteDescriptor],
) -> Result<(Complex64, Vec<[Complex64; 2]>)> {
    let prog = circuit.program();
    let mut reg = prog
        .detector_covector(detector, crate::state::Polarization::H)
        .ok_or_else(|| {
            Error::validation("detector", format!("{detector:?} is not a detector"))
        })?;
    let by_boundary = group_by_boundary(circuit, sites);
    let mut out = vec![[Complex64::new(0.0, 0.0); 2]; sites.len()];
    let ep = EngineParams {
        epsilon: 0.0,
        theta: 0.0,
        distorted: &[],
        env: EnvMode::Off,
    };
    prog.run_backward(&mut reg, prog.n_slices(), 0, &ep, |b, r| {
        for &(i, p) in &by_boundary[b] {
            out[i] = [r.base[2 * p], r.base[2 * p + 1]];
        }
    });
    let src = 2 * prog.source + prog.source_pol.index();
    Ok((reg.base[src], out))
}

fn group_by_boundary(circuit: &Circuit, sites: &[&SiteDescriptor]) -> Vec<Vec<(usize, usize)>> {
    let prog = circuit.program();
    let mut by_boundary = vec![Vec::new(); prog.n_slices() + 1];
    for (i, s) in sites.iter().enumerate() {
        by_boundary[s.slice].push((i, prog.path_index[&s.path]));
    }
    by_boundary
}

pub(crate) fn ratio_or_singular(num: Complex64, overlap: Complex64) -> WeakValue {
    if overlap.norm() < SINGULAR_OVERLAP {
        WeakValue::Singular
    } else {
        WeakValue::Value(num / overlap)
    }
}

/// `⟨φ|P_site|ψ⟩ / ⟨φ|ψ⟩` for a click at `detector`.
pub fn weak_value(circuit: &Circuit, detector: &str, site: &str) -> Result<WeakValue> {
    let desc = circuit
        .site(site)
        .ok_or_else(|| Error::validation("site", format!("{site:?} is not a site")))?;
    let fwd = forward_at_sites(circuit, &[desc]);
    let (overlap, bwd) = backward_at_sites(circuit, detector, &[desc])?;
    Ok(ratio_or_singular(
        bwd[0][0] * fwd[0][0] + bwd[0][1] * fwd[0][1],
        overlap,
    ))
}

/// Weak values at every Bob site for a click at `detector`.
pub fn weak_value_table(circuit: &Circuit, detector: &str) -> Result<WeakValueTable> {
    let sites: Vec<&SiteDescriptor> = circuit.bob_sites().collect();
    let fwd = forward_at_sites(circuit, &sites);
    table_from(circuit, detector, &sites, &fwd)
}

pub(crate) fn table_from(
    circuit: &Circuit,
    detector: &str,
    sites: &[&SiteDescriptor],
    fwd: &[[Complex64; 2]],
) -> Result<WeakValueTable> {
    let (overlap, bwd) = backward_at_sites(circuit, detector, sites)?;
    let values = sites
        .iter()
        .zip(fwd.iter().zip(&bwd))
        .map(|(s, (f, b))| {
            (
                s.id.clone(),
                ratio_or_singular(b[0] * f[0] + b[1] * f[1], overlap),
            )
        })
        .collect();
    Ok(WeakValueTable {
        detector: detector.to_string(),
        overlap,
        values,
    })
}
