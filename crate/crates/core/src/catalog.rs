//! Protocol builders.
//!
//! Every builder uses the global beam-splitter convention
//! `[[cos α, sin α], [sin α, −cos α]]`; free splitting ratios are solved
//! from the protocol's dark-port conditions and recorded in
//! [`Circuit::parameters`]. Each built circuit is checked against its
//! interference conditions before it is returned.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circuit::{
    outcome_distribution, Circuit, CircuitDoc, Element, Outcome, Owner, RunParams, SiteDescriptor,
    Source,
};
use crate::error::{Error, Result};
use crate::state::{PathId, Polarization, SiteId};
use crate::tsvf::{backward_at_sites, forward_at_sites, two_state_vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolName {
    Reference,
    EvIfm,
    NestedMzi,
    TwoWay,
    Zeno,
    KPath,
    AsbChain,
    CoherentBounce,
    AvNested,
    AvTwoWay,
    AvZeno,
}

impl ProtocolName {
    pub const ALL: [ProtocolName; 11] = [
        ProtocolName::Reference,
        ProtocolName::EvIfm,
        ProtocolName::NestedMzi,
        ProtocolName::TwoWay,
        ProtocolName::Zeno,
        ProtocolName::KPath,
        ProtocolName::AsbChain,
        ProtocolName::CoherentBounce,
        ProtocolName::AvNested,
        ProtocolName::AvTwoWay,
        ProtocolName::AvZeno,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProtocolName::Reference => "reference",
            ProtocolName::EvIfm => "ev_ifm",
            ProtocolName::NestedMzi => "nested_mzi",
            ProtocolName::TwoWay => "two_way",
            ProtocolName::Zeno => "zeno",
            ProtocolName::KPath => "k_path",
            ProtocolName::AsbChain => "asb_chain",
            ProtocolName::CoherentBounce => "coherent_bounce",
            ProtocolName::AvNested => "av_nested",
            ProtocolName::AvTwoWay => "av_two_way",
            ProtocolName::AvZeno => "av_zeno",
        }
    }
}

impl fmt::Display for ProtocolName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProtocolName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProtocolName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = ProtocolName::ALL.iter().map(|n| n.as_str()).collect();
                Error::validation(
                    "protocol",
                    format!("unknown protocol {s:?}, expected one of {}", names.join(", ")),
                )
            })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolParams {
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default)]
    pub blocked: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolSpec {
    pub name: ProtocolName,
    #[serde(default)]
    pub params: ProtocolParams,
}

pub const DEFAULT_M: usize = 8;
pub const DEFAULT_N: usize = 64;
pub const DEFAULT_ASB_N: usize = 16;
pub const DEFAULT_K: usize = 4;

impl ProtocolSpec {
    pub fn new(name: ProtocolName) -> Self {
        ProtocolSpec {
            name,
            params: ProtocolParams::default(),
        }
    }

    pub fn blocked(mut self, blocked: bool) -> Self {
        self.params.blocked = blocked;
        self
    }

    pub fn m(mut self, m: usize) -> Self {
        self.params.m = Some(m);
        self
    }

    pub fn n(mut self, n: usize) -> Self {
        self.params.n = Some(n);
        self
    }

    pub fn k(mut self, k: usize) -> Self {
        self.params.k = Some(k);
        self
    }

    pub fn zeno(m: usize, n: usize) -> Self {
        Self::new(ProtocolName::Zeno).m(m).n(n)
    }

    pub fn get_m(&self) -> usize {
        self.params.m.unwrap_or(DEFAULT_M)
    }

    pub fn get_n(&self) -> usize {
        let default = match self.name {
            ProtocolName::AsbChain => DEFAULT_ASB_N,
            _ => DEFAULT_N,
        };
        self.params.n.unwrap_or(default)
    }

    pub fn get_k(&self) -> usize {
        self.params.k.unwrap_or(DEFAULT_K)
    }

    pub fn validate(&self) -> Result<()> {
        match self.name {
            ProtocolName::Zeno | ProtocolName::AvZeno => {
                let (m, n) = (self.get_m(), self.get_n());
                if m < 2 {
                    return Err(Error::validation("M", format!("{m} < 2 (need N ≥ 2M ≥ 4)")));
                }
                if n < 2 * m {
                    return Err(Error::validation("N", format!("{n} < 2M = {} (need N ≥ 2M ≥ 4)", 2 * m)));
                }
            }
            ProtocolName::AsbChain if self.get_n() < 2 => {
                return Err(Error::validation("N", format!("{} < 2", self.get_n())));
            }
            ProtocolName::KPath | ProtocolName::CoherentBounce if self.get_k() < 1 => {
                return Err(Error::validation("K", "must be at least 1"));
            }
            _ => {}
        }
        Ok(())
    }
}

struct Builder {
    name: String,
    slices: Vec<Vec<Element>>,
    sites: Vec<SiteDescriptor>,
    detectors: BTreeMap<String, PathId>,
    legitimate: BTreeSet<String>,
    k: usize,
    parameters: BTreeMap<String, f64>,
}

impl Builder {
    fn new(name: &str) -> Self {
        Builder {
            name: name.to_string(),
            slices: Vec::new(),
            sites: Vec::new(),
            detectors: BTreeMap::new(),
            legitimate: BTreeSet::new(),
            k: 1,
            parameters: BTreeMap::new(),
        }
    }

    fn push(&mut self, slice: Vec<Element>) {
        self.slices.push(slice);
    }

    fn bs(&mut self, in_a: &str, in_b: &str, out_a: &str, out_b: &str, angle: f64) {
        self.push(vec![Element::beam_splitter(in_a, in_b, out_a, out_b, angle)]);
    }

    /// Couplers for all `(path, site)` pairs in one slice, rotators in the next.
    fn sites(&mut self, list: &[(String, String)]) {
        let slice = self.slices.len();
        self.push(list.iter().map(|(p, s)| Element::coupler(p.as_str(), s.as_str())).collect());
        self.push(list.iter().map(|(p, s)| Element::rotator(p.as_str(), s.as_str())).collect());
        for (p, s) in list {
            self.sites.push(SiteDescriptor {
                id: SiteId::new(s),
                path: PathId::new(p),
                slice,
                owner: Owner::Bob,
            });
        }
    }

    fn site(&mut self, path: &str, id: &str) {
        self.sites(&[(path.to_string(), id.to_string())]);
    }

    fn detector(&mut self, id: &str, legit: bool) {
        self.detectors.insert(id.to_string(), PathId::new(id));
        if legit {
            self.legitimate.insert(id.to_string());
        }
    }

    fn finish(self, source: &str) -> Result<Circuit> {
        Circuit::new(CircuitDoc {
            name: self.name,
            slices: self.slices,
            source: Source {
                path: PathId::new(source),
                polarization: Polarization::H,
            },
            detectors: self.detectors,
            sites: self.sites,
            legitimate_outcomes: self.legitimate,
            reference_path_count: self.k,
            parameters: self.parameters,
        })
    }
}

/// Build a protocol circuit and verify its interference conditions.
pub fn build(spec: &ProtocolSpec) -> Result<Circuit> {
    spec.validate()?;
    let blocked = spec.params.blocked;
    let circuit = match spec.name {
        ProtocolName::Reference => reference(blocked),
        ProtocolName::EvIfm => ev_ifm(blocked),
        ProtocolName::NestedMzi => nested_mzi(blocked),
        ProtocolName::TwoWay => two_way(blocked, 1),
        ProtocolName::AvTwoWay => two_way(blocked, 2),
        ProtocolName::Zeno => zeno(spec.get_m(), spec.get_n(), blocked, 1),
        ProtocolName::AvZeno => zeno(spec.get_m(), spec.get_n(), blocked, 2),
        ProtocolName::KPath => k_path(spec.get_k(), blocked),
        ProtocolName::AsbChain => asb_chain(spec.get_n(), blocked),
        ProtocolName::CoherentBounce => coherent_bounce(spec.get_k(), blocked),
        ProtocolName::AvNested => av_nested(blocked),
    }?;
    verify(spec, &circuit)?;
    Ok(circuit)
}

/// Bob's sites in registry order; Zeno sites are `B[m,n]` row-major.
pub fn bob_sites(spec: &ProtocolSpec) -> Result<Vec<SiteDescriptor>> {
    Ok(build(spec)?.bob_sites().cloned().collect())
}

/// Parse the `(m, n)` index of a Zeno-style site id such as `B[3,17]`.
pub fn site_grid_index(id: &str) -> Option<(usize, usize)> {
    let inner = id.split_once('[')?.1.strip_suffix(']')?;
    let (m, n) = inner.split_once(',')?;
    Some((m.trim().parse().ok()?, n.trim().parse().ok()?))
}

fn reference(blocked: bool) -> Result<Circuit> {
    let mut b = Builder::new("reference");
    if blocked {
        b.push(vec![Element::absorber("B")]);
    }
    b.site("B", "B");
    b.push(vec![Element::relabel("B", "D")]);
    b.detector("D", true);
    b.finish("B")
}

fn ev_ifm(blocked: bool) -> Result<Circuit> {
    let mut b = Builder::new("ev_ifm");
    b.bs("in", "in2", "A", "B", FRAC_PI_4);
    if blocked {
        b.push(vec![Element::absorber("B")]);
    }
    b.site("B", "B");
    b.bs("A", "B", "bright", "D", FRAC_PI_4);
    b.detector("D", true);
    b.detector("bright", false);
    b.finish("in")
}

fn nested_mzi(blocked: bool) -> Result<Circuit> {
    let mut b = Builder::new("nested_mzi");
    // |C|² = 1/3, |R|² = 2/3.
    let outer = (1.0f64 / 3.0).sqrt().acos();
    // D = sin α·C − cos α·E is dark when blocked (E = C/√2).
    let last = (0.5f64).sqrt().atan();
    b.parameters.insert("outer_angle".into(), outer);
    b.parameters.insert("final_angle".into(), last);
    b.bs("in", "in2", "C", "R", outer);
    b.bs("R", "vR", "A", "B", FRAC_PI_4);
    if blocked {
        b.push(vec![Element::absorber("B")]);
    }
    let slice = b.slices.len();
    b.site("B", "B");
    for p in ["A", "C"] {
        b.sites.push(SiteDescriptor {
            id: SiteId::new(p),
            path: PathId::new(p),
            slice,
            owner: Owner::Alice,
        });
    }
    b.bs("A", "B", "X", "E", FRAC_PI_4);
    b.bs("C", "E", "bright", "D", last);
    b.detector("D", true);
    b.detector("bright", false);
    b.detector("X", false);
    b.finish("in")
}

/// Chain of `stages` small MZIs on `input`; each sends the photon to its
/// `X` port when empty and passes half the amplitude to `E` when blocked.
/// Returns the final `E` path.
fn inner_stages(b: &mut Builder, input: &str, stages: usize, blocked: bool) -> String {
    let tag = |p: &str, k: usize| {
        if stages == 1 {
            p.to_string()
        } else {
            format!("{p}{k}")
        }
    };
    let mut current = input.to_string();
    for k in 1..=stages {
        let (a, bb, x, e, v) = (tag("A", k), tag("B", k), tag("X", k), tag("E", k), tag("v", k));
        b.bs(&current, &v, &a, &bb, FRAC_PI_4);
        if blocked {
            b.push(vec![Element::absorber(bb.as_str())]);
        }
        b.site(&bb, &bb);
        b.bs(&a, &bb, &x, &e, FRAC_PI_4);
        b.detector(&x, false);
        current = e;
    }
    current
}

/// Amplitude reaching the output of the blocked inner stages per unit input.
fn blocked_transmission(stages: usize) -> Result<f64> {
    let mut b = Builder::new("probe");
    let out = inner_stages(&mut b, "R", stages, true);
    b.detector(&out, true);
    let c = b.finish("R")?;
    let p = outcome_distribution(&c, &RunParams::ideal())?;
    let amp = p[&Outcome::detector(out, Polarization::H)].sqrt();
    // Each blocked stage passes +1/√2·1/√2 of its input, so the sign is positive.
    Ok(amp)
}

fn two_way(blocked: bool, stages: usize) -> Result<Circuit> {
    let name = if stages == 1 { "two_way" } else { "av_two_way" };
    let mut b = Builder::new(name);
    // Blocked: Q = (E − C2)/√2 must cancel C1, i.e. E = 2√2·L/√3 with
    // C1 = L/√3, C2 = √2·L/√3.
    let g = blocked_transmission(stages)?;
    let target = 2.0 * 2f64.sqrt() / 3f64.sqrt();
    let first = (target / g).atan();
    let left = 2f64.sqrt().atan();
    b.parameters.insert("first_angle".into(), first);
    b.parameters.insert("left_angle".into(), left);
    b.parameters.insert("blocked_transmission".into(), g);

    b.bs("in", "vac", "L", "R", first);
    b.bs("L", "vL", "C1", "C2", left);
    let e = inner_stages(&mut b, "R", stages, blocked);
    b.bs(&e, "C2", "P", "Q", FRAC_PI_4);
    b.bs("C1", "Q", "D1", "D0", FRAC_PI_4);
    b.detector("D0", true);
    b.detector("D1", true);
    b.detector("P", false);
    b.finish("in")
}

fn av_nested(blocked: bool) -> Result<Circuit> {
    let mut b = Builder::new("av_nested");
    let g = blocked_transmission(2)?;
    // D = sin α·C − cos α·E2 with C = R: dark when blocked iff tan α = g.
    let last = g.atan();
    b.parameters.insert("outer_angle".into(), FRAC_PI_4);
    b.parameters.insert("final_angle".into(), last);
    b.parameters.insert("blocked_transmission".into(), g);
    b.bs("in", "in2", "C", "R", FRAC_PI_4);
    let e = inner_stages(&mut b, "R", 2, blocked);
    b.bs("C", &e, "bright", "D", last);
    b.detector("D", true);
    b.detector("bright", false);
    b.finish("in")
}

/// Zeno chain: `M` outer splittings of π/2M (plus one on exit), each outer
/// arm carrying `chains` inner chains of `N` splittings of π/2N.
fn zeno(m_count: usize, n_count: usize, blocked: bool, chains: usize) -> Result<Circuit> {
    let name = if chains == 1 { "zeno" } else { "av_zeno" };
    let mut b = Builder::new(name);
    let outer = FRAC_PI_2 / m_count as f64;
    let inner = FRAC_PI_2 / n_count as f64;
    b.parameters.insert("outer_angle".into(), outer);
    b.parameters.insert("inner_angle".into(), inner);
    b.k = m_count * n_count;
    for m in 1..=m_count {
        b.push(vec![Element::mirror("A", PI)]);
        b.bs("C", "A", "C", "A", outer);
        for chain in 1..=chains {
            for n in 1..=n_count {
                b.push(vec![Element::mirror("B", PI)]);
                b.bs("A", "B", "A", "B", inner);
                if blocked {
                    b.push(vec![Element::absorber("B")]);
                }
                let site = if chains == 1 {
                    format!("B[{m},{n}]")
                } else {
                    format!("B{chain}[{m},{n}]")
                };
                b.site("B", &site);
            }
            let x = if chains == 1 {
                format!("X{m}")
            } else {
                format!("X{m}.{chain}")
            };
            b.push(vec![Element::relabel("B", x.as_str())]);
            b.detector(&x, false);
        }
    }
    b.push(vec![Element::mirror("A", PI)]);
    b.bs("C", "A", "D0", "D1", outer);
    b.detector("D0", true);
    b.detector("D1", true);
    b.finish("C")
}

fn k_path(k: usize, blocked: bool) -> Result<Circuit> {
    let mut b = Builder::new("k_path");
    b.k = k;
    let angle = |j: usize| (1.0 / ((k - j + 1) as f64).sqrt()).asin();
    for j in 1..k {
        b.bs("r", &format!("v{j}"), "r", &format!("k{j}"), angle(j));
    }
    b.push(vec![Element::relabel("r", format!("k{k}").as_str())]);
    let paths: Vec<(String, String)> = (1..=k).map(|j| (format!("k{j}"), format!("k{j}"))).collect();
    if blocked {
        b.push(paths.iter().map(|(p, _)| Element::absorber(p.as_str())).collect());
    }
    b.sites(&paths);
    b.push(vec![Element::relabel(format!("k{k}").as_str(), "r")]);
    for j in (1..k).rev() {
        b.bs("r", &format!("k{j}"), "r", &format!("v{j}"), angle(j));
        b.detector(&format!("v{j}"), false);
    }
    b.push(vec![Element::relabel("r", "D")]);
    b.detector("D", true);
    b.finish("r")
}

fn coherent_bounce(k: usize, blocked: bool) -> Result<Circuit> {
    let mut b = Builder::new("coherent_bounce");
    if blocked {
        b.push(vec![Element::absorber("B")]);
    }
    for j in 1..=k {
        b.site("B", &format!("B{j}"));
    }
    b.push(vec![Element::relabel("B", "D")]);
    b.detector("D", true);
    b.finish("B")
}

fn asb_chain(n_count: usize, blocked: bool) -> Result<Circuit> {
    let mut b = Builder::new("asb_chain");
    b.k = n_count;
    let inner = FRAC_PI_2 / n_count as f64;
    b.parameters.insert("inner_angle".into(), inner);
    for n in 1..=n_count {
        b.push(vec![Element::mirror("B", PI)]);
        b.bs("A", "B", "A", "B", inner);
        if blocked {
            b.push(vec![Element::absorber("B")]);
        }
        b.site("B", &format!("B[{n}]"));
    }
    b.push(vec![Element::relabel("B", "escape"), Element::relabel("A", "alice")]);
    b.detector("alice", true);
    b.detector("escape", false);
    b.finish("A")
}

const DARK: f64 = 1e-20;

fn fail(spec: &ProtocolSpec, condition: impl Into<String>) -> Error {
    Error::validation(
        "interference",
        format!("{}: {}", spec.name, condition.into()),
    )
}

fn click(dist: &BTreeMap<Outcome, f64>, detector: &str) -> f64 {
    dist.get(&Outcome::detector(detector, Polarization::H))
        .copied()
        .unwrap_or(0.0)
        + dist
            .get(&Outcome::detector(detector, Polarization::V))
            .copied()
            .unwrap_or(0.0)
}

fn verify(spec: &ProtocolSpec, c: &Circuit) -> Result<()> {
    let dist = outcome_distribution(c, &RunParams::ideal())?;
    let total: f64 = dist.values().sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(fail(spec, format!("probabilities sum to {total}")));
    }
    let blocked = spec.params.blocked;
    let dark = |d: &str| -> Result<()> {
        let p = click(&dist, d);
        if p < DARK {
            Ok(())
        } else {
            Err(fail(spec, format!("port {d} should be dark, has probability {p:e}")))
        }
    };
    let close = |what: &str, got: f64, want: f64, tol: f64| -> Result<()> {
        if (got - want).abs() <= tol {
            Ok(())
        } else {
            Err(fail(spec, format!("{what} = {got}, expected {want}")))
        }
    };
    match spec.name {
        ProtocolName::Reference | ProtocolName::CoherentBounce | ProtocolName::KPath => {
            if !blocked {
                close("P(D)", click(&dist, "D"), 1.0, 1e-12)?;
            }
        }
        ProtocolName::EvIfm => {
            if blocked {
                close("P(D)", click(&dist, "D"), 0.25, 1e-12)?;
            } else {
                dark("D")?;
            }
        }
        ProtocolName::NestedMzi => {
            if blocked {
                dark("D")?;
            } else {
                close("P(X)", click(&dist, "X"), 2.0 / 3.0, 1e-12)?;
            }
        }
        ProtocolName::TwoWay | ProtocolName::AvTwoWay => {
            if blocked {
                dark("D0")?;
            } else {
                dark("D1")?;
                if spec.name == ProtocolName::TwoWay {
                    check_two_way_amplitudes(spec, c)?;
                }
            }
        }
        ProtocolName::AvNested => {
            if blocked {
                dark("D")?;
            }
        }
        ProtocolName::Zeno | ProtocolName::AvZeno => {
            let m = spec.get_m() as f64;
            let (s, co) = (PI / (2.0 * m)).sin_cos();
            if blocked {
                let p0 = click(&dist, "D0");
                if p0 > 2.0 * s * s {
                    return Err(fail(spec, format!("P(D0) = {p0} exceeds 2·sin²(π/2M)")));
                }
            } else {
                close("P(D1)", click(&dist, "D1"), s * s * co.powf(2.0 * m), 1e-10)?;
            }
        }
        ProtocolName::AsbChain => {
            let n = spec.get_n() as f64;
            if blocked {
                let want = (PI / (2.0 * n)).cos().powf(2.0 * n);
                close("P(alice)", click(&dist, "alice"), want, 1e-12)?;
            } else {
                dark("alice")?;
            }
        }
    }
    if matches!(
        spec.name,
        ProtocolName::AvNested | ProtocolName::AvTwoWay | ProtocolName::AvZeno
    ) && !blocked
    {
        check_av_separation(spec, c)?;
    }
    Ok(())
}

fn check_two_way_amplitudes(spec: &ProtocolSpec, c: &Circuit) -> Result<()> {
    let slice = c.site("B").expect("two_way has site B").slice;
    let r35 = 35f64.sqrt();
    let fwd = [
        ("B", 4.0 / r35),
        ("A", 4.0 / r35),
        ("C1", 1.0 / r35),
        ("C2", 2f64.sqrt() / r35),
    ];
    let r8 = 8f64.sqrt();
    let d0 = [("B", 1.0 / r8), ("A", -1.0 / r8), ("C1", 0.5f64.sqrt()), ("C2", 0.5)];
    let d1 = [("B", -1.0 / r8), ("A", 1.0 / r8), ("C1", 0.5f64.sqrt()), ("C2", -0.5)];
    for (det, back) in [("D0", d0), ("D1", d1)] {
        let tsv = two_state_vector(c, det, slice)?;
        for ((p, want_f), (_, want_b)) in fwd.iter().zip(back.iter()) {
            let label = crate::state::ModeLabel::path(*p);
            let got_f = tsv.forward.amplitude(&label);
            let got_b = tsv.backward.amplitude(&label);
            if (got_f - Complex64::new(*want_f, 0.0)).norm() > 1e-10
                || (got_b - Complex64::new(*want_b, 0.0)).norm() > 1e-10
            {
                return Err(fail(
                    spec,
                    format!("amplitude on {p} for {det}: forward {got_f}, backward {got_b}"),
                ));
            }
        }
    }
    Ok(())
}

/// Forward state never reaches the second inner stage, backward states from
/// legitimate clicks never reach the first.
fn check_av_separation(spec: &ProtocolSpec, c: &Circuit) -> Result<()> {
    let first: Vec<&SiteDescriptor> = c.bob_sites().filter(|s| s.id.as_str().starts_with("B1")).collect();
    let second: Vec<&SiteDescriptor> = c.bob_sites().filter(|s| s.id.as_str().starts_with("B2")).collect();
    for (s, a) in second.iter().zip(forward_at_sites(c, &second)) {
        if a[0].norm() + a[1].norm() > 1e-10 {
            return Err(fail(spec, format!("forward amplitude reaches {}", s.id)));
        }
    }
    for d in c.legitimate_outcomes() {
        let (_, back) = backward_at_sites(c, d, &first)?;
        for (s, a) in first.iter().zip(back) {
            if a[0].norm() + a[1].norm() > 1e-10 {
                return Err(fail(spec, format!("backward amplitude from {d} reaches {}", s.id)));
            }
        }
    }
    Ok(())
}
