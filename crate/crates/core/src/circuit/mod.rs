//! Layered optical circuits: element definitions, validation, serialization
//! and forward/backward evolution.

pub(crate) mod engine;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::state::{CovectorState, PathId, Polarization, PureState, SiteId};
pub use engine::EnvMode;
use engine::{EngineParams, Program, Register};

/// The only symbolic rotation parameter a circuit may reference.
pub const THETA_KEY: &str = "theta";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Element {
    /// `[[cos α, sin α], [sin α, −cos α]]` from `(in_a, in_b)` to `(out_a, out_b)`.
    BeamSplitter {
        in_a: PathId,
        in_b: PathId,
        out_a: PathId,
        out_b: PathId,
        angle: f64,
    },
    Mirror {
        #[serde(rename = "in")]
        r#in: PathId,
        out: PathId,
        phase: f64,
    },
    Absorber {
        path: PathId,
    },
    /// Couples the photon on `path` to the two-level environment of `site`.
    /// `epsilon` overrides the run value when set.
    EnvCoupler {
        path: PathId,
        site: SiteId,
        #[serde(default)]
        epsilon: Option<f64>,
    },
    PolRotator {
        path: PathId,
        site: SiteId,
        theta_key: String,
    },
    Relabel {
        from: PathId,
        to: PathId,
    },
}

impl Element {
    pub fn beam_splitter(
        in_a: impl Into<PathId>,
        in_b: impl Into<PathId>,
        out_a: impl Into<PathId>,
        out_b: impl Into<PathId>,
        angle: f64,
    ) -> Self {
        Element::BeamSplitter {
            in_a: in_a.into(),
            in_b: in_b.into(),
            out_a: out_a.into(),
            out_b: out_b.into(),
            angle,
        }
    }

    pub fn mirror(path: impl Into<PathId>, phase: f64) -> Self {
        let p = path.into();
        Element::Mirror {
            r#in: p.clone(),
            out: p,
            phase,
        }
    }

    pub fn absorber(path: impl Into<PathId>) -> Self {
        Element::Absorber { path: path.into() }
    }

    pub fn coupler(path: impl Into<PathId>, site: impl Into<SiteId>) -> Self {
        Element::EnvCoupler {
            path: path.into(),
            site: site.into(),
            epsilon: None,
        }
    }

    pub fn rotator(path: impl Into<PathId>, site: impl Into<SiteId>) -> Self {
        Element::PolRotator {
            path: path.into(),
            site: site.into(),
            theta_key: THETA_KEY.to_string(),
        }
    }

    pub fn relabel(from: impl Into<PathId>, to: impl Into<PathId>) -> Self {
        Element::Relabel {
            from: from.into(),
            to: to.into(),
        }
    }

    /// (consumed inputs, produced outputs). In-place elements report their
    /// path in both.
    fn io(&self) -> (Vec<&PathId>, Vec<&PathId>) {
        match self {
            Element::BeamSplitter {
                in_a,
                in_b,
                out_a,
                out_b,
                ..
            } => (vec![in_a, in_b], vec![out_a, out_b]),
            Element::Mirror { r#in, out, .. } => (vec![r#in], vec![out]),
            Element::Relabel { from, to } => (vec![from], vec![to]),
            Element::Absorber { path }
            | Element::EnvCoupler { path, .. }
            | Element::PolRotator { path, .. } => (vec![path], vec![path]),
        }
    }

    /// Every path the element touches.
    pub fn paths(&self) -> Vec<&PathId> {
        let (i, o) = self.io();
        let mut all: Vec<&PathId> = i.into_iter().chain(o).collect();
        all.sort();
        all.dedup();
        all
    }

    fn kind(&self) -> &'static str {
        match self {
            Element::BeamSplitter { .. } => "beam_splitter",
            Element::Mirror { .. } => "mirror",
            Element::Absorber { .. } => "absorber",
            Element::EnvCoupler { .. } => "env_coupler",
            Element::PolRotator { .. } => "pol_rotator",
            Element::Relabel { .. } => "relabel",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Owner {
    Alice,
    Bob,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteDescriptor {
    pub id: SiteId,
    pub path: PathId,
    /// For Bob sites, the slice holding the site's coupler. Alice sites are
    /// markers: `slice` is the boundary at which the marker is read.
    pub slice: usize,
    pub owner: Owner,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Source {
    pub path: PathId,
    pub polarization: Polarization,
}

/// Serialized circuit document. Converted to [`Circuit`] by validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitDoc {
    pub name: String,
    pub slices: Vec<Vec<Element>>,
    pub source: Source,
    pub detectors: BTreeMap<String, PathId>,
    pub sites: Vec<SiteDescriptor>,
    pub legitimate_outcomes: BTreeSet<String>,
    pub reference_path_count: usize,
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
}

/// A validated, immutable circuit.
#[derive(Debug, Clone)]
pub struct Circuit {
    doc: CircuitDoc,
    program: Arc<Program>,
    /// Slice index of each site's rotator (Bob sites only).
    rotator_slice: HashMap<SiteId, usize>,
}

impl PartialEq for Circuit {
    fn eq(&self, other: &Self) -> bool {
        self.doc == other.doc
    }
}

impl Serialize for Circuit {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.doc.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Circuit {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = CircuitDoc::deserialize(d)?;
        Circuit::new(doc).map_err(serde::de::Error::custom)
    }
}

impl TryFrom<CircuitDoc> for Circuit {
    type Error = Error;

    fn try_from(doc: CircuitDoc) -> Result<Self> {
        Circuit::new(doc)
    }
}

impl From<Circuit> for CircuitDoc {
    fn from(c: Circuit) -> Self {
        c.doc
    }
}

fn invalid(field: &str, msg: impl Into<String>) -> Error {
    Error::validation(field, msg)
}

impl Circuit {
    pub fn new(doc: CircuitDoc) -> Result<Self> {
        let rotator_slice = validate(&doc)?;
        let site_ids: Vec<SiteId> = doc.sites.iter().map(|s| s.id.clone()).collect();
        let program = Program::compile(
            &doc.slices,
            &doc.source.path,
            doc.source.polarization,
            &doc.detectors,
            &site_ids,
        );
        Ok(Circuit {
            doc,
            program: Arc::new(program),
            rotator_slice,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: CircuitDoc = serde_json::from_str(text)?;
        Circuit::new(doc)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.doc)?)
    }

    pub fn doc(&self) -> &CircuitDoc {
        &self.doc
    }

    pub fn name(&self) -> &str {
        &self.doc.name
    }

    pub fn slices(&self) -> &[Vec<Element>] {
        &self.doc.slices
    }

    pub fn n_slices(&self) -> usize {
        self.doc.slices.len()
    }

    pub fn source(&self) -> &Source {
        &self.doc.source
    }

    pub fn detectors(&self) -> &BTreeMap<String, PathId> {
        &self.doc.detectors
    }

    pub fn sites(&self) -> &[SiteDescriptor] {
        &self.doc.sites
    }

    pub fn bob_sites(&self) -> impl Iterator<Item = &SiteDescriptor> {
        self.doc.sites.iter().filter(|s| s.owner == Owner::Bob)
    }

    pub fn site(&self, id: &str) -> Option<&SiteDescriptor> {
        self.doc.sites.iter().find(|s| s.id.as_str() == id)
    }

    pub fn legitimate_outcomes(&self) -> &BTreeSet<String> {
        &self.doc.legitimate_outcomes
    }

    pub fn is_legitimate(&self, detector: &str) -> bool {
        self.doc.legitimate_outcomes.contains(detector)
    }

    pub fn reference_path_count(&self) -> usize {
        self.doc.reference_path_count
    }

    pub fn parameters(&self) -> &BTreeMap<String, f64> {
        &self.doc.parameters
    }

    pub fn paths(&self) -> &[PathId] {
        &self.program.paths
    }

    pub(crate) fn program(&self) -> &Program {
        &self.program
    }

    pub(crate) fn rotator_slice(&self, site: &str) -> Option<usize> {
        self.rotator_slice.get(site).copied()
    }

    /// Outcome list in distribution order: detector × {H, V}, then lost.
    pub fn outcomes(&self) -> &[Outcome] {
        &self.program.outcomes
    }

    /// Per-site flags for a set of distorted site ids.
    pub(crate) fn distortion_mask(&self, sites: &BTreeSet<SiteId>) -> Vec<bool> {
        self.program
            .sites
            .iter()
            .map(|s| sites.contains(s))
            .collect()
    }

    pub fn all_bob_site_ids(&self) -> BTreeSet<SiteId> {
        self.bob_sites().map(|s| s.id.clone()).collect()
    }

    fn require_detector(&self, detector: &str) -> Result<()> {
        if self.doc.detectors.contains_key(detector) {
            Ok(())
        } else {
            Err(invalid(
                "detector",
                format!("{detector:?} is not a detector of circuit {:?}", self.doc.name),
            ))
        }
    }
}

/// Returns the rotator slice of every Bob site.
fn validate(doc: &CircuitDoc) -> Result<HashMap<SiteId, usize>> {
    if doc.reference_path_count == 0 {
        return Err(invalid("reference_path_count", "must be a positive integer"));
    }
    if doc.legitimate_outcomes.is_empty() {
        return Err(invalid("legitimate_outcomes", "must name at least one detector"));
    }
    for d in &doc.legitimate_outcomes {
        if !doc.detectors.contains_key(d) {
            return Err(invalid(
                "legitimate_outcomes",
                format!("{d:?} is not a detector id"),
            ));
        }
    }
    let mut seen_paths = HashSet::new();
    for (d, p) in &doc.detectors {
        if !seen_paths.insert(p) {
            return Err(invalid(
                "detectors",
                format!("detector {d:?} shares path {p} with another detector"),
            ));
        }
    }

    let mut site_ids = HashMap::new();
    for s in &doc.sites {
        if site_ids.insert(s.id.clone(), s).is_some() {
            return Err(invalid("sites", format!("duplicate site id {}", s.id)));
        }
        if s.slice > doc.slices.len() || (s.owner == Owner::Bob && s.slice >= doc.slices.len()) {
            return Err(invalid(
                "sites",
                format!("site {} references slice {} out of range", s.id, s.slice),
            ));
        }
    }

    let mut live: HashSet<&PathId> = HashSet::new();
    live.insert(&doc.source.path);
    let mut couplers: HashMap<&SiteId, (usize, &PathId)> = HashMap::new();
    let mut rotators: HashMap<SiteId, (usize, &PathId)> = HashMap::new();

    for (si, slice) in doc.slices.iter().enumerate() {
        let mut touched: HashSet<&PathId> = HashSet::new();
        for el in slice {
            let field = format!("slices[{si}].{}", el.kind());
            for p in el.paths() {
                if !touched.insert(p) {
                    return Err(invalid(
                        &field,
                        format!("path {p} is used by more than one element in slice {si}"),
                    ));
                }
            }
            match el {
                Element::BeamSplitter {
                    in_a,
                    in_b,
                    out_a,
                    out_b,
                    angle,
                } => {
                    if in_a == in_b || out_a == out_b {
                        return Err(invalid(&field, "ports must be distinct paths"));
                    }
                    if !angle.is_finite() {
                        return Err(invalid(&field, "angle must be finite"));
                    }
                }
                Element::Mirror { phase, .. } if !phase.is_finite() => {
                    return Err(invalid(&field, "phase must be finite"));
                }
                Element::EnvCoupler {
                    path,
                    site,
                    epsilon,
                } => {
                    if let Some(e) = epsilon {
                        if !(0.0..1.0).contains(e) {
                            return Err(invalid(&field, format!("epsilon {e} outside [0, 1)")));
                        }
                    }
                    match site_ids.get(site) {
                        Some(d) if d.owner == Owner::Bob => {}
                        _ => {
                            return Err(invalid(
                                &field,
                                format!("site {site} is not a declared Bob site"),
                            ))
                        }
                    }
                    if couplers.insert(site, (si, path)).is_some() {
                        return Err(invalid(&field, format!("site {site} has two couplers")));
                    }
                }
                Element::PolRotator {
                    path,
                    site,
                    theta_key,
                } => {
                    if theta_key != THETA_KEY {
                        return Err(invalid(
                            &format!("{field}.theta_key"),
                            format!("unknown parameter {theta_key:?}, expected {THETA_KEY:?}"),
                        ));
                    }
                    match site_ids.get(site) {
                        Some(d) if d.owner == Owner::Bob => {}
                        _ => {
                            return Err(invalid(
                                &field,
                                format!("site {site} is not a declared Bob site"),
                            ))
                        }
                    }
                    if rotators.insert(site.clone(), (si, path)).is_some() {
                        return Err(invalid(&field, format!("site {site} has two rotators")));
                    }
                }
                _ => {}
            }

            let (inputs, outputs) = el.io();
            for o in &outputs {
                if !inputs.contains(o) && live.contains(o) {
                    return Err(invalid(
                        &field,
                        format!("output path {o} is still occupied in slice {si}"),
                    ));
                }
            }
            for i in &inputs {
                live.remove(i);
            }
            for o in outputs {
                live.insert(o);
            }
        }
    }

    let detector_paths: HashSet<&PathId> = doc.detectors.values().collect();
    for p in &live {
        if !detector_paths.contains(p) {
            return Err(invalid(
                "detectors",
                format!("path {p} is still occupied at the end but has no detector"),
            ));
        }
    }
    for (d, p) in &doc.detectors {
        if !live.contains(p) {
            return Err(invalid(
                "detectors",
                format!("detector {d:?} path {p} is not an output at the end of the circuit"),
            ));
        }
    }

    let mut rotator_slice = HashMap::new();
    for s in doc.sites.iter().filter(|s| s.owner == Owner::Bob) {
        let (cs, cp) = couplers.get(&s.id).ok_or_else(|| {
            invalid("sites", format!("Bob site {} has no environment coupler", s.id))
        })?;
        if *cs != s.slice || **cp != s.path {
            return Err(invalid(
                "sites",
                format!(
                    "site {} declared at ({}, {}) but its coupler is at ({}, {})",
                    s.id, s.path, s.slice, cp, cs
                ),
            ));
        }
        let (rs, rp) = rotators
            .get(&s.id)
            .ok_or_else(|| invalid("sites", format!("Bob site {} has no rotator", s.id)))?;
        if **rp != s.path {
            return Err(invalid(
                "sites",
                format!("site {} rotator is on path {rp}, expected {}", s.id, s.path),
            ));
        }
        rotator_slice.insert(s.id.clone(), *rs);
    }
    Ok(rotator_slice)
}

/// A measurement outcome: a detector click with a polarization, or loss.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Outcome {
    Detector {
        detector: String,
        polarization: Polarization,
    },
    Lost,
}

impl Outcome {
    pub fn detector(detector: impl Into<String>, polarization: Polarization) -> Self {
        Outcome::Detector {
            detector: detector.into(),
            polarization,
        }
    }

    pub fn detector_id(&self) -> Option<&str> {
        match self {
            Outcome::Detector { detector, .. } => Some(detector),
            Outcome::Lost => None,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Detector {
                detector,
                polarization,
            } => write!(f, "{detector}:{polarization}"),
            Outcome::Lost => f.write_str("lost"),
        }
    }
}

impl FromStr for Outcome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "lost" {
            return Ok(Outcome::Lost);
        }
        let (d, p) = s
            .rsplit_once(':')
            .ok_or_else(|| invalid("outcome", format!("cannot parse {s:?}")))?;
        let polarization = match p {
            "H" => Polarization::H,
            "V" => Polarization::V,
            _ => return Err(invalid("outcome", format!("bad polarization in {s:?}"))),
        };
        Ok(Outcome::detector(d, polarization))
    }
}

impl Serialize for Outcome {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Outcome {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Run-time parameters shared by all evolutions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunParams {
    pub epsilon: f64,
    pub theta: f64,
    pub distorted_sites: BTreeSet<SiteId>,
}

impl RunParams {
    pub fn ideal() -> Self {
        RunParams::default()
    }

    pub fn with_epsilon(epsilon: f64) -> Self {
        RunParams {
            epsilon,
            ..Self::default()
        }
    }

    pub fn with_theta<I, S>(theta: f64, sites: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<SiteId>,
    {
        RunParams {
            theta,
            distorted_sites: sites.into_iter().map(Into::into).collect(),
            ..Self::default()
        }
    }

    fn validate(&self, circuit: &Circuit) -> Result<()> {
        if !(0.0..0.5).contains(&self.epsilon) {
            return Err(invalid("epsilon", format!("{} outside [0, 0.5)", self.epsilon)));
        }
        if !(self.theta.abs() < 0.5) {
            return Err(invalid("theta", format!("|{}| not below 0.5", self.theta)));
        }
        for s in &self.distorted_sites {
            if !matches!(circuit.site(s.as_str()), Some(d) if d.owner == Owner::Bob) {
                return Err(invalid(
                    "distorted_sites",
                    format!("{s} is not a Bob site of circuit {:?}", circuit.name()),
                ));
            }
        }
        Ok(())
    }
}

/// Forward state at every slice boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionRecord {
    pub states: Vec<PureState>,
    pub final_state: PureState,
}

/// Exact environment treatment used by the state-level API: every site gets
/// its own qubit and nothing is truncated.
const EXACT: EnvMode = EnvMode::PerSite {
    max_excitations: usize::MAX,
};

pub fn evolve_forward(circuit: &Circuit, params: &RunParams) -> Result<EvolutionRecord> {
    params.validate(circuit)?;
    let prog = circuit.program();
    evolve_register(circuit, prog.initial(), 0, params)
}

/// Continue a forward evolution from `state` at boundary `start`. Returned
/// states cover boundaries `start..=n_slices`.
pub fn evolve_forward_from(
    circuit: &Circuit,
    state: &PureState,
    start: usize,
    params: &RunParams,
) -> Result<EvolutionRecord> {
    params.validate(circuit)?;
    if start > circuit.n_slices() {
        return Err(invalid("start", format!("boundary {start} out of range")));
    }
    let reg = circuit
        .program()
        .load(state.amplitudes(), state.lost_weight())
        .map_err(|m| invalid("state", m))?;
    evolve_register(circuit, reg, start, params)
}

fn evolve_register(
    circuit: &Circuit,
    mut reg: Register,
    start: usize,
    params: &RunParams,
) -> Result<EvolutionRecord> {
    let prog = circuit.program();
    let mask = circuit.distortion_mask(&params.distorted_sites);
    let ep = EngineParams {
        epsilon: params.epsilon,
        theta: params.theta,
        distorted: &mask,
        env: EXACT,
    };
    let mut states = Vec::with_capacity(prog.n_slices() + 1 - start);
    prog.run_forward(&mut reg, start, prog.n_slices(), &ep, |_, r| {
        states.push(prog.to_pure(r))
    });
    let final_state = states.last().cloned().unwrap_or_default();
    Ok(EvolutionRecord {
        states,
        final_state,
    })
}

/// Backward-evolving covector from `detector` (polarization H) at every
/// boundary; index `b` is the covector at boundary `b`.
pub fn evolve_backward(
    circuit: &Circuit,
    detector: &str,
    params: &RunParams,
) -> Result<Vec<CovectorState>> {
    evolve_backward_pol(circuit, detector, Polarization::H, params)
}

pub fn evolve_backward_pol(
    circuit: &Circuit,
    detector: &str,
    polarization: Polarization,
    params: &RunParams,
) -> Result<Vec<CovectorState>> {
    params.validate(circuit)?;
    circuit.require_detector(detector)?;
    let prog = circuit.program();
    let mask = circuit.distortion_mask(&params.distorted_sites);
    let ep = EngineParams {
        epsilon: params.epsilon,
        theta: params.theta,
        distorted: &mask,
        env: EXACT,
    };
    let mut reg = prog
        .detector_covector(detector, polarization)
        .expect("detector checked");
    let n = prog.n_slices();
    let mut out = vec![CovectorState::default(); n + 1];
    prog.run_backward(&mut reg, n, 0, &ep, |b, r| out[b] = prog.to_covector(r));
    Ok(out)
}

/// Probability of every outcome, including loss.
pub fn outcome_distribution(
    circuit: &Circuit,
    params: &RunParams,
) -> Result<BTreeMap<Outcome, f64>> {
    let probs = outcome_probs(circuit, params, EXACT)?;
    Ok(circuit
        .outcomes()
        .iter()
        .cloned()
        .zip(probs)
        .collect())
}

/// Outcome probabilities in [`Circuit::outcomes`] order.
pub(crate) fn outcome_probs(
    circuit: &Circuit,
    params: &RunParams,
    env: EnvMode,
) -> Result<Vec<f64>> {
    params.validate(circuit)?;
    let prog = circuit.program();
    let mask = circuit.distortion_mask(&params.distorted_sites);
    let ep = EngineParams {
        epsilon: params.epsilon,
        theta: params.theta,
        distorted: &mask,
        env,
    };
    let mut reg = prog.initial();
    prog.run_forward(&mut reg, 0, prog.n_slices(), &ep, |_, _| {});
    Ok(prog.outcome_probs(&reg))
}
