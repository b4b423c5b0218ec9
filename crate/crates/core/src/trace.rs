//! Weak-trace analysis: the probability of finding an orthogonal
//! environment component at Bob's sites.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circuit::engine::{EngineParams, EnvMode};
use crate::circuit::{outcome_probs, Circuit, RunParams, SiteDescriptor};
use crate::error::{Error, Result};
use crate::tsvf::{backward_at_sites, forward_at_sites, WeakValue, WeakValueTable, SINGULAR_OVERLAP};

/// Largest ε for which the first-order weak-value formula is trusted.
pub const MAX_TRACE_EPSILON: f64 = 0.05;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingModel {
    /// One independent environment qubit per site.
    #[default]
    Incoherent,
    /// All sites share one environment; amplitudes add before squaring.
    Coherent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeTrace {
    /// Probability of the click.
    pub probability: f64,
    /// Probability of an orthogonal component given the click.
    pub conditional: f64,
    /// `probability · conditional`.
    pub joint: f64,
    /// The click has zero overlap with the preselection; values come from
    /// the exact joint evolution at ε instead of weak values.
    pub singular: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    pub model: CouplingModel,
    pub epsilon: f64,
    pub postselected: bool,
    pub per_outcome: BTreeMap<String, OutcomeTrace>,
    pub combined: f64,
    pub reference: f64,
    pub ratio: f64,
    /// Clicks outside the legitimate set, with raw probabilities.
    pub excluded: BTreeMap<String, OutcomeTrace>,
    /// `Σ joint` over every detector, legitimate or not.
    pub all_outcomes_total: f64,
    pub weak_values: BTreeMap<String, WeakValueTable>,
}

fn check_epsilon(eps: f64) -> Result<()> {
    if !(0.0..=MAX_TRACE_EPSILON).contains(&eps) {
        return Err(Error::validation(
            "epsilon",
            format!("{eps} outside the first-order range [0, {MAX_TRACE_EPSILON}]"),
        ));
    }
    Ok(())
}

/// Above this many sites, singular clicks of the incoherent model use the
/// leading-order amplitudes instead of the exact joint evolution.
pub const EXACT_JOINT_SITE_LIMIT: usize = 64;

/// Excitation cap for the exact joint route.
fn joint_cap(n_sites: usize) -> usize {
    if n_sites <= 64 {
        3
    } else {
        2
    }
}

/// Exact joint evolution with explicit environments. Returns, per detector
/// in id order, the click probability and the part with a disturbed
/// environment.
pub fn joint_orthogonal(
    circuit: &Circuit,
    epsilon: f64,
    model: CouplingModel,
) -> Result<BTreeMap<String, (f64, f64)>> {
    let prog = circuit.program();
    let env = match model {
        CouplingModel::Incoherent => EnvMode::PerSite {
            max_excitations: joint_cap(circuit.bob_sites().count()),
        },
        CouplingModel::Coherent => EnvMode::Shared,
    };
    let ep = EngineParams {
        epsilon,
        theta: 0.0,
        distorted: &[],
        env,
    };
    let mut reg = prog.initial();
    prog.run_forward(&mut reg, 0, prog.n_slices(), &ep, |_, _| {});
    Ok(prog
        .detectors
        .iter()
        .map(|(d, _)| d.clone())
        .zip(prog.detector_split(&reg))
        .collect())
}

struct Analysis {
    traces: BTreeMap<String, OutcomeTrace>,
    tables: BTreeMap<String, WeakValueTable>,
}

fn conditional(model: CouplingModel, weak: &[Complex64], eps: f64) -> f64 {
    let c = match model {
        CouplingModel::Incoherent => weak.iter().map(|w| w.norm_sqr()).sum::<f64>(),
        CouplingModel::Coherent => weak.iter().sum::<Complex64>().norm_sqr(),
    } * eps
        * eps;
    c.clamp(0.0, 1.0)
}

fn analyze<'a>(
    circuit: &Circuit,
    detectors: impl Iterator<Item = &'a str>,
    epsilon: f64,
    model: CouplingModel,
) -> Result<Analysis> {
    check_epsilon(epsilon)?;
    let probs0 = outcome_probs(circuit, &RunParams::ideal(), EnvMode::Off)?;
    let prog = circuit.program();
    let sites: Vec<&SiteDescriptor> = circuit.bob_sites().collect();
    let fwd = forward_at_sites(circuit, &sites);
    let mut joint: Option<BTreeMap<String, (f64, f64)>> = None;

    let mut traces = BTreeMap::new();
    let mut tables = BTreeMap::new();
    for d in detectors {
        let di = prog
            .detectors
            .iter()
            .position(|(id, _)| id == d)
            .ok_or_else(|| Error::validation("detector", format!("{d:?} is not a detector")))?;
        let (overlap, bwd) = backward_at_sites(circuit, d, &sites)?;
        let trace = if overlap.norm() >= SINGULAR_OVERLAP {
            let weak: Vec<Complex64> = fwd
                .iter()
                .zip(&bwd)
                .map(|(f, b)| (b[0] * f[0] + b[1] * f[1]) / overlap)
                .collect();
            let probability = probs0[2 * di] + probs0[2 * di + 1];
            let cond = conditional(model, &weak, epsilon);
            tables.insert(
                d.to_string(),
                WeakValueTable {
                    detector: d.to_string(),
                    overlap,
                    values: sites
                        .iter()
                        .zip(&weak)
                        .map(|(s, w)| (s.id.clone(), WeakValue::Value(*w)))
                        .collect(),
                },
            );
            OutcomeTrace {
                probability,
                conditional: cond,
                joint: probability * cond,
                singular: false,
            }
        } else {
            let (total, excited) = if model == CouplingModel::Incoherent
                && sites.len() > EXACT_JOINT_SITE_LIMIT
            {
                // Leading order: the click needs one site excited, with
                // amplitude ε⟨φ|P_j|ψ⟩ per site.
                let p: f64 = fwd
                    .iter()
                    .zip(&bwd)
                    .map(|(f, b)| (b[0] * f[0] + b[1] * f[1]).norm_sqr())
                    .sum::<f64>()
                    * epsilon
                    * epsilon;
                (p, p)
            } else {
                if joint.is_none() {
                    joint = Some(joint_orthogonal(circuit, epsilon, model)?);
                }
                joint.as_ref().expect("just computed")[d]
            };
            let cond = if total > 0.0 {
                (excited / total).clamp(0.0, 1.0)
            } else {
                0.0
            };
            tables.insert(
                d.to_string(),
                WeakValueTable {
                    detector: d.to_string(),
                    overlap,
                    values: sites
                        .iter()
                        .map(|s| (s.id.clone(), WeakValue::Singular))
                        .collect(),
                },
            );
            OutcomeTrace {
                probability: total,
                conditional: cond,
                joint: total * cond,
                singular: true,
            }
        };
        traces.insert(d.to_string(), trace);
    }
    Ok(Analysis { traces, tables })
}

/// Orthogonal-component probability given a click at `detector`, with
/// independent environments per site.
pub fn trace_incoherent(circuit: &Circuit, detector: &str, epsilon: f64) -> Result<f64> {
    let a = analyze(circuit, std::iter::once(detector), epsilon, CouplingModel::Incoherent)?;
    Ok(a.traces[detector].conditional)
}

/// As [`trace_incoherent`] but with one shared environment for all sites.
pub fn trace_coherent(circuit: &Circuit, detector: &str, epsilon: f64) -> Result<f64> {
    let a = analyze(circuit, std::iter::once(detector), epsilon, CouplingModel::Coherent)?;
    Ok(a.traces[detector].conditional)
}

/// Combined trace over the legitimate outcomes, normalized over them.
pub fn trace_combined(
    circuit: &Circuit,
    epsilon: f64,
    model: CouplingModel,
) -> Result<TraceReport> {
    trace_combined_with(circuit, epsilon, model, true)
}

pub fn trace_combined_with(
    circuit: &Circuit,
    epsilon: f64,
    model: CouplingModel,
    postselected: bool,
) -> Result<TraceReport> {
    let all: Vec<String> = circuit.detectors().keys().cloned().collect();
    let Analysis { traces, mut tables } =
        analyze(circuit, all.iter().map(String::as_str), epsilon, model)?;

    let (per_outcome, excluded): (BTreeMap<_, _>, BTreeMap<_, _>) = traces
        .into_iter()
        .partition(|(d, _)| circuit.is_legitimate(d));
    tables.retain(|d, _| circuit.is_legitimate(d));

    let joint_sum: f64 = per_outcome.values().map(|t| t.joint).sum();
    let combined = if postselected {
        let norm: f64 = per_outcome.values().map(|t| t.probability).sum();
        if norm > 0.0 {
            joint_sum / norm
        } else {
            0.0
        }
    } else {
        joint_sum
    };
    let all_outcomes_total =
        joint_sum + excluded.values().map(|t: &OutcomeTrace| t.joint).sum::<f64>();
    let reference = epsilon * epsilon / circuit.reference_path_count() as f64;
    let ratio = if reference > 0.0 {
        combined / reference
    } else {
        0.0
    };
    Ok(TraceReport {
        model,
        epsilon,
        postselected,
        per_outcome,
        combined,
        reference,
        ratio,
        excluded,
        all_outcomes_total,
        weak_values: tables,
    })
}
