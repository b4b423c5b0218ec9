//! Run configuration, report documents and parameter sweeps.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::{build, ProtocolName, ProtocolSpec};
use crate::circuit::{outcome_distribution, Circuit, Outcome, RunParams};
use crate::error::{Error, Result};
use crate::fisher::{
    extrapolate, fisher_report, FisherMode, FisherOptions, FisherReport,
};
use crate::oracle::{oracle_run, ORACLE_SITE_LIMIT};
use crate::state::SiteId;
use crate::trace::{trace_combined_with, CouplingModel, TraceReport, MAX_TRACE_EPSILON};

pub const WORKERS_ENV: &str = "CFSIM_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Trace,
    Fisher,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    M,
    N,
    K,
    #[serde(rename = "epsilon")]
    Epsilon,
}

impl std::str::FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "M" => Ok(SweepParam::M),
            "N" => Ok(SweepParam::N),
            "K" => Ok(SweepParam::K),
            "epsilon" => Ok(SweepParam::Epsilon),
            _ => Err(Error::validation(
                "sweep.param",
                format!("{s:?} is not one of M, N, K, epsilon"),
            )),
        }
    }
}

impl std::fmt::Display for SweepParam {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SweepParam::M => "M",
            SweepParam::N => "N",
            SweepParam::K => "K",
            SweepParam::Epsilon => "epsilon",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub param: SweepParam,
    pub values: Vec<f64>,
    /// When sweeping M, also set N = n_per_m · M.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_per_m: Option<f64>,
}

fn default_epsilon() -> f64 {
    1e-3
}

fn default_criteria() -> BTreeSet<Criterion> {
    [Criterion::Trace, Criterion::Fisher].into_iter().collect()
}

fn default_true() -> bool {
    true
}

fn default_threshold() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub protocol: ProtocolSpec,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_criteria")]
    pub criteria: BTreeSet<Criterion>,
    #[serde(default)]
    pub coupling: CouplingModel,
    #[serde(default)]
    pub fisher_mode: FisherMode,
    #[serde(default = "default_true")]
    pub postselected: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Counterfactual iff ratio < threshold.
    #[serde(default = "default_threshold")]
    pub verdict_threshold: f64,
}

impl RunConfig {
    pub fn new(protocol: ProtocolSpec) -> Self {
        RunConfig {
            protocol,
            epsilon: default_epsilon(),
            criteria: default_criteria(),
            coupling: CouplingModel::default(),
            fisher_mode: FisherMode::default(),
            postselected: true,
            sweep: None,
            output: None,
            verdict_threshold: default_threshold(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.protocol.validate()?;
        if !(self.epsilon > 0.0 && self.epsilon <= MAX_TRACE_EPSILON) {
            return Err(Error::validation(
                "epsilon",
                format!("{} outside (0, {MAX_TRACE_EPSILON}]", self.epsilon),
            ));
        }
        if self.criteria.is_empty() {
            return Err(Error::validation("criteria", "select at least one of trace, fisher"));
        }
        if !(self.verdict_threshold > 0.0) {
            return Err(Error::validation("verdict_threshold", "must be positive"));
        }
        if let Some(sw) = &self.sweep {
            if sw.values.is_empty() {
                return Err(Error::validation("sweep.values", "sweep list is empty"));
            }
            if sw.param != SweepParam::Epsilon {
                for v in &sw.values {
                    if !(v.fract() == 0.0 && *v >= 1.0) {
                        return Err(Error::validation(
                            "sweep.values",
                            format!("{} must be a positive integer, got {v}", sw.param),
                        ));
                    }
                }
            }
            if let Some(r) = sw.n_per_m {
                if sw.param != SweepParam::M || !(r > 0.0) {
                    return Err(Error::validation(
                        "sweep.n_per_m",
                        "only valid as a positive ratio when sweeping M",
                    ));
                }
            }
        }
        Ok(())
    }

    fn fisher_options(&self) -> FisherOptions {
        FisherOptions {
            postselected: self.postselected,
            ..FisherOptions::default()
        }
    }

    /// The configuration of one sweep row.
    fn at(&self, param: SweepParam, value: f64, n_per_m: Option<f64>) -> RunConfig {
        let mut c = self.clone();
        c.sweep = None;
        match param {
            SweepParam::M => {
                c.protocol.params.m = Some(value as usize);
                if let Some(r) = n_per_m {
                    c.protocol.params.n = Some((r * value).round() as usize);
                }
            }
            SweepParam::N => c.protocol.params.n = Some(value as usize),
            SweepParam::K => c.protocol.params.k = Some(value as usize),
            SweepParam::Epsilon => c.epsilon = value,
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitSummary {
    pub name: String,
    pub paths: usize,
    pub slices: usize,
    pub bob_sites: usize,
    pub reference_path_count: usize,
    pub legitimate_outcomes: BTreeSet<String>,
    pub parameters: BTreeMap<String, f64>,
}

impl CircuitSummary {
    fn of(c: &Circuit) -> Self {
        CircuitSummary {
            name: c.name().to_string(),
            paths: c.paths().len(),
            slices: c.n_slices(),
            bob_sites: c.bob_sites().count(),
            reference_path_count: c.reference_path_count(),
            legitimate_outcomes: c.legitimate_outcomes().clone(),
            parameters: c.parameters().clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub ratio: f64,
    pub threshold: f64,
    pub counterfactual: bool,
}

impl Verdict {
    fn new(ratio: f64, threshold: f64) -> Self {
        Verdict {
            ratio,
            threshold,
            counterfactual: ratio < threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleDeltas {
    pub model: CouplingModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_oracle: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fisher_oracle: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fisher_delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub protocol: ProtocolSpec,
    pub circuit: CircuitSummary,
    pub epsilon: f64,
    pub coupling: CouplingModel,
    pub fisher_mode: FisherMode,
    pub postselected: bool,
    /// Ideal (ε = θ = 0) outcome distribution.
    pub outcome_probs: BTreeMap<Outcome, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<TraceReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fisher: Option<FisherReport>,
    pub verdicts: BTreeMap<Criterion, Verdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleDeltas>,
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Build the protocol, run the selected analyses and, within the oracle's
/// site bound, cross-check them against the brute-force simulator.
pub fn run(config: &RunConfig) -> Result<Report> {
    config.validate()?;
    let circuit = build(&config.protocol)?;
    let outcome_probs = outcome_distribution(&circuit, &RunParams::ideal())?;
    let mut verdicts = BTreeMap::new();

    let trace = if config.criteria.contains(&Criterion::Trace) {
        let t = trace_combined_with(&circuit, config.epsilon, config.coupling, config.postselected)?;
        verdicts.insert(Criterion::Trace, Verdict::new(t.ratio, config.verdict_threshold));
        Some(t)
    } else {
        None
    };
    let opts = config.fisher_options();
    let fisher = if config.criteria.contains(&Criterion::Fisher) {
        let f = fisher_report(&circuit, config.fisher_mode, &opts)?;
        verdicts.insert(Criterion::Fisher, Verdict::new(f.ratio, config.verdict_threshold));
        Some(f)
    } else {
        None
    };

    let oracle = if circuit.bob_sites().count() <= ORACLE_SITE_LIMIT {
        Some(oracle_deltas(
            &circuit,
            config,
            trace.as_ref(),
            fisher.as_ref(),
            &opts,
        )?)
    } else {
        None
    };

    Ok(Report {
        protocol: config.protocol,
        circuit: CircuitSummary::of(&circuit),
        epsilon: config.epsilon,
        coupling: config.coupling,
        fisher_mode: config.fisher_mode,
        postselected: config.postselected,
        outcome_probs,
        trace,
        fisher,
        verdicts,
        oracle,
    })
}

fn oracle_deltas(
    circuit: &Circuit,
    config: &RunConfig,
    trace: Option<&TraceReport>,
    fisher: Option<&FisherReport>,
    opts: &FisherOptions,
) -> Result<OracleDeltas> {
    let mut out = OracleDeltas {
        model: config.coupling,
        trace_oracle: None,
        trace_delta: None,
        fisher_oracle: None,
        fisher_delta: None,
    };
    if let Some(t) = trace {
        let r = oracle_run(circuit, config.epsilon, 0.0, &BTreeSet::new(), config.coupling)?;
        let v = r.combined_trace(circuit, config.postselected);
        out.trace_oracle = Some(v);
        out.trace_delta = Some((t.combined - v).abs());
    }
    if let Some(f) = fisher {
        let lax = FisherOptions {
            strict: false,
            ..opts.clone()
        };
        let patterns: Vec<BTreeSet<SiteId>> = match config.fisher_mode {
            FisherMode::PerSiteSum => circuit
                .bob_sites()
                .map(|s| [s.id.clone()].into_iter().collect())
                .collect(),
            FisherMode::CommonTheta => vec![circuit.all_bob_site_ids()],
        };
        let mut total = 0.0;
        for sites in patterns {
            let dist = |theta: f64| -> Result<Vec<f64>> {
                Ok(oracle_run(circuit, 0.0, theta, &sites, CouplingModel::Incoherent)?
                    .probs_in_order(circuit))
            };
            total += extrapolate(circuit, &dist, &lax)?.total;
        }
        out.fisher_oracle = Some(total);
        out.fisher_delta = Some((f.total - total).abs());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: String,
    pub value: f64,
    pub protocol: String,
    #[serde(rename = "M")]
    pub m: Option<usize>,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    #[serde(rename = "K")]
    pub k: Option<usize>,
    pub epsilon: f64,
    /// `outcome=probability` pairs joined by `;`.
    pub outcome_probs: String,
    pub trace: Option<f64>,
    pub trace_reference: Option<f64>,
    pub trace_ratio: Option<f64>,
    pub fisher: Option<f64>,
    pub fisher_reference: Option<f64>,
    pub fisher_ratio: Option<f64>,
    pub fisher_residual: Option<f64>,
    pub fisher_converged: Option<bool>,
}

impl SweepRow {
    fn from_report(param: SweepParam, value: f64, r: &Report) -> Self {
        let uses = |p: &str| -> bool {
            matches!(
                (p, r.protocol.name),
                ("M", ProtocolName::Zeno | ProtocolName::AvZeno)
                    | ("N", ProtocolName::Zeno | ProtocolName::AvZeno | ProtocolName::AsbChain)
                    | ("K", ProtocolName::KPath | ProtocolName::CoherentBounce)
            )
        };
        let spec = &r.protocol;
        SweepRow {
            param: param.to_string(),
            value,
            protocol: spec.name.to_string(),
            m: uses("M").then(|| spec.get_m()),
            n: uses("N").then(|| spec.get_n()),
            k: uses("K").then(|| spec.get_k()),
            epsilon: r.epsilon,
            outcome_probs: r
                .outcome_probs
                .iter()
                .map(|(o, p)| format!("{o}={p:e}"))
                .collect::<Vec<_>>()
                .join(";"),
            trace: r.trace.as_ref().map(|t| t.combined),
            trace_reference: r.trace.as_ref().map(|t| t.reference),
            trace_ratio: r.trace.as_ref().map(|t| t.ratio),
            fisher: r.fisher.as_ref().map(|f| f.total),
            fisher_reference: r.fisher.as_ref().map(|f| f.reference),
            fisher_ratio: r.fisher.as_ref().map(|f| f.ratio),
            fisher_residual: r.fisher.as_ref().map(|f| f.extrapolation_residual),
            fisher_converged: r.fisher.as_ref().map(|f| f.converged),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Worker count from `CFSIM_WORKERS`, if set.
pub fn workers_from_env() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::validation(
                WORKERS_ENV,
                format!("{v:?} is not a positive integer"),
            )),
        },
        Err(_) => Ok(None),
    }
}

/// One report row per sweep value, in input order.
pub fn sweep(config: &RunConfig) -> Result<SweepTable> {
    config.validate()?;
    let sw = config
        .sweep
        .as_ref()
        .ok_or_else(|| Error::validation("sweep", "no sweep given"))?;
    let configs: Vec<RunConfig> = sw
        .values
        .iter()
        .map(|&v| config.at(sw.param, v, sw.n_per_m))
        .collect();
    for c in &configs {
        c.validate()?;
    }
    let work = || -> Result<Vec<SweepRow>> {
        configs
            .par_iter()
            .zip(sw.values.par_iter())
            .map(|(c, &v)| run(c).map(|r| SweepRow::from_report(sw.param, v, &r)))
            .collect()
    };
    let rows = match workers_from_env()? {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::validation(WORKERS_ENV, e.to_string()))?
            .install(work)?,
        None => work()?,
    };
    Ok(SweepTable { rows })
}
