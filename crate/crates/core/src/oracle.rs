//! Brute-force reference simulator.
//!
//! Carries the full joint state of photon and environment as a dense array
//! (path × polarization × environment) and applies circuit elements
//! directly, without the compiled engine or any first-order truncation.
//!
//! Incoherent model: one qubit per Bob site with the exact coupling
//! `χ → √(1−ε²)χ + εχ⊥`. Coherent model: a single shared qubit whose `χ⊥`
//! amplitude grows by `ε` times the `χ` amplitude at every coupler (the
//! small-momentum linearization), so results are exact relative to that
//! model only.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Element, Outcome};
use crate::error::{Error, Result};
use crate::state::{PathId, Polarization, SiteId};
use crate::trace::CouplingModel;

/// Largest number of Bob sites the oracle accepts.
pub const ORACLE_SITE_LIMIT: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub model: CouplingModel,
    pub exact_outcome_probs: BTreeMap<Outcome, f64>,
    /// Probability that at least one site is in `χ⊥`, given the outcome.
    pub exact_orthogonal_prob: BTreeMap<Outcome, f64>,
    pub state_dimension: usize,
}

impl OracleResult {
    /// Click probability summed over polarizations.
    pub fn detector_prob(&self, detector: &str) -> f64 {
        Polarization::ALL
            .iter()
            .map(|&p| {
                self.exact_outcome_probs
                    .get(&Outcome::detector(detector, p))
                    .copied()
                    .unwrap_or(0.0)
            })
            .sum()
    }

    /// Joint probability of the click and an orthogonal environment.
    pub fn detector_joint(&self, detector: &str) -> f64 {
        Polarization::ALL
            .iter()
            .map(|&p| {
                let o = Outcome::detector(detector, p);
                self.exact_outcome_probs.get(&o).copied().unwrap_or(0.0)
                    * self.exact_orthogonal_prob.get(&o).copied().unwrap_or(0.0)
            })
            .sum()
    }

    pub fn detector_conditional(&self, detector: &str) -> f64 {
        let p = self.detector_prob(detector);
        if p > 0.0 {
            self.detector_joint(detector) / p
        } else {
            0.0
        }
    }

    /// Combined orthogonal-component probability over the legitimate clicks.
    pub fn combined_trace(&self, circuit: &Circuit, postselected: bool) -> f64 {
        let legit = circuit.legitimate_outcomes();
        let joint: f64 = legit.iter().map(|d| self.detector_joint(d)).sum();
        if !postselected {
            return joint;
        }
        let norm: f64 = legit.iter().map(|d| self.detector_prob(d)).sum();
        if norm > 0.0 {
            joint / norm
        } else {
            0.0
        }
    }

    /// Probabilities in [`Circuit::outcomes`] order.
    pub fn probs_in_order(&self, circuit: &Circuit) -> Vec<f64> {
        circuit
            .outcomes()
            .iter()
            .map(|o| self.exact_outcome_probs.get(o).copied().unwrap_or(0.0))
            .collect()
    }
}

struct Dense {
    env_dim: usize,
    amp: Vec<Complex64>,
    lost: f64,
}

impl Dense {
    fn idx(&self, path: usize, pol: usize, env: usize) -> usize {
        (path * 2 + pol) * self.env_dim + env
    }

    fn slot(&self, path: usize) -> std::ops::Range<usize> {
        let start = self.idx(path, 0, 0);
        start..start + 2 * self.env_dim
    }
}

/// Evolve the full joint state and tabulate every outcome.
pub fn oracle_run(
    circuit: &Circuit,
    epsilon: f64,
    theta: f64,
    distorted_sites: &BTreeSet<SiteId>,
    model: CouplingModel,
) -> Result<OracleResult> {
    let bob: Vec<&SiteId> = circuit.bob_sites().map(|s| &s.id).collect();
    if bob.len() > ORACLE_SITE_LIMIT {
        return Err(Error::TooLarge {
            sites: bob.len(),
            limit: ORACLE_SITE_LIMIT,
        });
    }
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::validation("epsilon", format!("{epsilon} outside [0, 1)")));
    }
    let bit: HashMap<&SiteId, usize> = bob.iter().enumerate().map(|(i, s)| (*s, 1 << i)).collect();
    let env_dim = match model {
        CouplingModel::Incoherent => 1usize << bob.len(),
        CouplingModel::Coherent => 2,
    };

    let mut paths: BTreeSet<&PathId> = BTreeSet::new();
    paths.insert(&circuit.source().path);
    paths.extend(circuit.detectors().values());
    for el in circuit.slices().iter().flatten() {
        paths.extend(el.paths());
    }
    let index: HashMap<&PathId, usize> = paths.iter().enumerate().map(|(i, p)| (*p, i)).collect();

    let mut st = Dense {
        env_dim,
        amp: vec![Complex64::new(0.0, 0.0); paths.len() * 2 * env_dim],
        lost: 0.0,
    };
    let src = st.idx(
        index[&circuit.source().path],
        pol_index(circuit.source().polarization),
        0,
    );
    st.amp[src] = Complex64::new(1.0, 0.0);

    let zero = Complex64::new(0.0, 0.0);
    for el in circuit.slices().iter().flatten() {
        match el {
            Element::BeamSplitter {
                in_a,
                in_b,
                out_a,
                out_b,
                angle,
            } => {
                let (c, s) = (angle.cos(), angle.sin());
                let (ia, ib, oa, ob) = (index[in_a], index[in_b], index[out_a], index[out_b]);
                for pol in 0..2 {
                    for e in 0..env_dim {
                        let x = st.amp[st.idx(ia, pol, e)];
                        let y = st.amp[st.idx(ib, pol, e)];
                        let (i, j) = (st.idx(ia, pol, e), st.idx(ib, pol, e));
                        st.amp[i] = zero;
                        st.amp[j] = zero;
                        let (k, l) = (st.idx(oa, pol, e), st.idx(ob, pol, e));
                        st.amp[k] = c * x + s * y;
                        st.amp[l] = s * x - c * y;
                    }
                }
            }
            Element::Mirror { r#in, out, phase } => {
                let f = Complex64::from_polar(1.0, *phase);
                let moved: Vec<Complex64> = st.slot(index[r#in]).map(|i| st.amp[i]).collect();
                for i in st.slot(index[r#in]) {
                    st.amp[i] = zero;
                }
                for (i, x) in st.slot(index[out]).zip(moved) {
                    st.amp[i] = f * x;
                }
            }
            Element::Relabel { from, to } => {
                let moved: Vec<Complex64> = st.slot(index[from]).map(|i| st.amp[i]).collect();
                for i in st.slot(index[from]) {
                    st.amp[i] = zero;
                }
                for (i, x) in st.slot(index[to]).zip(moved) {
                    st.amp[i] = x;
                }
            }
            Element::Absorber { path } => {
                for i in st.slot(index[path]) {
                    st.lost += st.amp[i].norm_sqr();
                    st.amp[i] = zero;
                }
            }
            Element::EnvCoupler {
                path,
                site,
                epsilon: own,
            } => {
                let eps = own.unwrap_or(epsilon);
                let p = index[path];
                match model {
                    CouplingModel::Incoherent => {
                        let b = bit[site];
                        let c = (1.0 - eps * eps).sqrt();
                        for pol in 0..2 {
                            for e in (0..env_dim).filter(|e| e & b == 0) {
                                let (i0, i1) = (st.idx(p, pol, e), st.idx(p, pol, e | b));
                                let (x0, x1) = (st.amp[i0], st.amp[i1]);
                                st.amp[i0] = c * x0 - eps * x1;
                                st.amp[i1] = eps * x0 + c * x1;
                            }
                        }
                    }
                    CouplingModel::Coherent => {
                        for pol in 0..2 {
                            let (i0, i1) = (st.idx(p, pol, 0), st.idx(p, pol, 1));
                            let x0 = st.amp[i0];
                            st.amp[i1] += eps * x0;
                        }
                    }
                }
            }
            Element::PolRotator { path, site, .. } => {
                if theta != 0.0 && distorted_sites.contains(site) {
                    let (s, c) = theta.sin_cos();
                    let p = index[path];
                    for e in 0..env_dim {
                        let (ih, iv) = (st.idx(p, 0, e), st.idx(p, 1, e));
                        let (h, v) = (st.amp[ih], st.amp[iv]);
                        st.amp[ih] = c * h - s * v;
                        st.amp[iv] = s * h + c * v;
                    }
                }
            }
        }
    }

    let mut probs = BTreeMap::new();
    let mut orth = BTreeMap::new();
    for (d, path) in circuit.detectors() {
        let p = index[path];
        for pol in Polarization::ALL {
            let weights: Vec<f64> = (0..env_dim)
                .map(|e| st.amp[st.idx(p, pol_index(pol), e)].norm_sqr())
                .collect();
            let (prob, cond) = match model {
                CouplingModel::Incoherent => {
                    let total: f64 = weights.iter().sum();
                    let perp: f64 = weights[1..].iter().sum();
                    (total, if total > 0.0 { perp / total } else { 0.0 })
                }
                CouplingModel::Coherent => {
                    let (a, b) = (weights[0], weights[1]);
                    (a, if a > 0.0 { b / a } else { 0.0 })
                }
            };
            let o = Outcome::detector(d.clone(), pol);
            probs.insert(o.clone(), prob);
            orth.insert(o, cond);
        }
    }
    probs.insert(Outcome::Lost, st.lost);
    orth.insert(Outcome::Lost, 0.0);

    Ok(OracleResult {
        model,
        exact_outcome_probs: probs,
        exact_orthogonal_prob: orth,
        state_dimension: st.amp.len(),
    })
}

fn pol_index(p: Polarization) -> usize {
    match p {
        Polarization::H => 0,
        Polarization::V => 1,
    }
}
