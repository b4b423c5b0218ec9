//! Sparse single-photon states over composite mode labels.
//!
//! A mode label combines a spatial path, a polarization and the configuration
//! of the environment sites the photon may have disturbed. Sites default to
//! their undisturbed state `χ`; only sites in the orthogonal state `χ⊥` are
//! stored, so a label never carries an explicit `χ` entry.
//!
//! Bra states ([`CovectorState`]) store their amplitudes already conjugated:
//! `⟨φ|ψ⟩` is the plain sum `Σ_ℓ bra(ℓ)·ket(ℓ)` over shared labels.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Amplitudes with magnitude below this are dropped from sparse states.
pub const PRUNE_THRESHOLD: f64 = 1e-15;

/// Norms below this cannot be normalized.
pub const NULL_NORM: f64 = 1e-14;

macro_rules! interned_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(Arc<str>);

        impl $name {
            pub fn new(id: impl AsRef<str>) -> Self {
                $name(Arc::from(id.as_ref()))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{:?}", &*self.0)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name::new(s)
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                $name(Arc::from(s))
            }
        }

        impl std::borrow::Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }
    };
}

interned_id!(
    /// Spatial path token, e.g. `"B"`, `"C1"` or `"X3"`.
    PathId
);
interned_id!(
    /// Environment site token, e.g. `"B"` or `"B[3,17]"`.
    SiteId
);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Polarization {
    H,
    V,
}

impl Polarization {
    pub const ALL: [Polarization; 2] = [Polarization::H, Polarization::V];

    pub(crate) fn index(self) -> usize {
        match self {
            Polarization::H => 0,
            Polarization::V => 1,
        }
    }

    pub(crate) fn from_index(i: usize) -> Self {
        if i == 0 {
            Polarization::H
        } else {
            Polarization::V
        }
    }
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Polarization::H => f.write_str("H"),
            Polarization::V => f.write_str("V"),
        }
    }
}

/// State of a single two-level environment site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvLevel {
    Chi,
    ChiPerp,
}

/// Sparse environment configuration: the set of sites found in `χ⊥`.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EnvConfig(BTreeSet<SiteId>);

impl EnvConfig {
    pub fn undisturbed() -> Self {
        EnvConfig::default()
    }

    /// Build from explicit per-site levels; `χ` entries are dropped.
    pub fn from_levels<I>(levels: I) -> Self
    where
        I: IntoIterator<Item = (SiteId, EnvLevel)>,
    {
        EnvConfig(
            levels
                .into_iter()
                .filter(|(_, l)| *l == EnvLevel::ChiPerp)
                .map(|(s, _)| s)
                .collect(),
        )
    }

    pub fn with_perp(mut self, site: SiteId) -> Self {
        self.0.insert(site);
        self
    }

    pub fn level(&self, site: &str) -> EnvLevel {
        if self.0.contains(site) {
            EnvLevel::ChiPerp
        } else {
            EnvLevel::Chi
        }
    }

    pub fn is_undisturbed(&self) -> bool {
        self.0.is_empty()
    }

    pub fn disturbed_sites(&self) -> impl Iterator<Item = &SiteId> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModeLabel {
    pub path: PathId,
    pub polarization: Polarization,
    pub env: EnvConfig,
}

impl ModeLabel {
    pub fn new(path: impl Into<PathId>, polarization: Polarization) -> Self {
        ModeLabel {
            path: path.into(),
            polarization,
            env: EnvConfig::undisturbed(),
        }
    }

    /// Shorthand for an H-polarized label with an undisturbed environment.
    pub fn path(path: impl Into<PathId>) -> Self {
        Self::new(path, Polarization::H)
    }

    pub fn with_env(mut self, env: EnvConfig) -> Self {
        self.env = env;
        self
    }
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{},{}", self.path, self.polarization)?;
        for s in self.env.disturbed_sites() {
            write!(f, ",{s}⊥")?;
        }
        f.write_str("⟩")
    }
}

fn prune(amplitudes: &mut BTreeMap<ModeLabel, Complex64>) {
    amplitudes.retain(|_, a| a.norm() >= PRUNE_THRESHOLD);
}

/// Forward-evolving (ket) state, plus the probability absorbed so far.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PureState {
    amplitudes: BTreeMap<ModeLabel, Complex64>,
    lost_weight: f64,
}

impl PureState {
    pub fn new<I>(amplitudes: I) -> Self
    where
        I: IntoIterator<Item = (ModeLabel, Complex64)>,
    {
        Self::with_lost_weight(amplitudes, 0.0)
    }

    pub fn with_lost_weight<I>(amplitudes: I, lost_weight: f64) -> Self
    where
        I: IntoIterator<Item = (ModeLabel, Complex64)>,
    {
        let mut map = BTreeMap::new();
        for (label, a) in amplitudes {
            *map.entry(label).or_insert(Complex64::new(0.0, 0.0)) += a;
        }
        prune(&mut map);
        PureState {
            amplitudes: map,
            lost_weight,
        }
    }

    /// A single basis state with unit amplitude.
    pub fn basis(label: ModeLabel) -> Self {
        Self::new([(label, Complex64::new(1.0, 0.0))])
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn amplitude(&self, label: &ModeLabel) -> Complex64 {
        self.amplitudes
            .get(label)
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn amplitudes(&self) -> impl Iterator<Item = (&ModeLabel, &Complex64)> {
        self.amplitudes.iter()
    }

    pub fn support_len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn lost_weight(&self) -> f64 {
        self.lost_weight
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Squared norm plus absorbed weight; conserved by every evolution step.
    pub fn total_weight(&self) -> f64 {
        self.norm_sqr() + self.lost_weight
    }

    /// Summed probability on one path, over polarizations and environments.
    pub fn path_weight(&self, path: &str) -> f64 {
        self.amplitudes
            .iter()
            .filter(|(l, _)| l.path.as_str() == path)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// Re-apply the pruning threshold. Idempotent.
    pub fn canonicalize(&self) -> Self {
        let mut amplitudes = self.amplitudes.clone();
        prune(&mut amplitudes);
        PureState {
            amplitudes,
            lost_weight: self.lost_weight,
        }
    }

    /// Multiply every amplitude by a constant.
    pub fn scaled(&self, factor: Complex64) -> Self {
        Self::with_lost_weight(
            self.amplitudes.iter().map(|(l, a)| (l.clone(), a * factor)),
            self.lost_weight * factor.norm_sqr(),
        )
    }

    pub fn add(&self, other: &PureState) -> Self {
        Self::with_lost_weight(
            self.amplitudes
                .iter()
                .chain(other.amplitudes.iter())
                .map(|(l, a)| (l.clone(), *a)),
            self.lost_weight + other.lost_weight,
        )
    }
}

/// Backward-evolving (bra) state with conjugated amplitudes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CovectorState {
    amplitudes: BTreeMap<ModeLabel, Complex64>,
}

impl CovectorState {
    /// Build from amplitudes that are already conjugated (bra components).
    pub fn new<I>(amplitudes: I) -> Self
    where
        I: IntoIterator<Item = (ModeLabel, Complex64)>,
    {
        let mut map = BTreeMap::new();
        for (label, a) in amplitudes {
            *map.entry(label).or_insert(Complex64::new(0.0, 0.0)) += a;
        }
        prune(&mut map);
        CovectorState { amplitudes: map }
    }

    pub fn basis(label: ModeLabel) -> Self {
        Self::new([(label, Complex64::new(1.0, 0.0))])
    }

    /// The dual of a ket: conjugates every amplitude.
    pub fn dual(ket: &PureState) -> Self {
        Self::new(ket.amplitudes().map(|(l, a)| (l.clone(), a.conj())))
    }

    pub fn amplitude(&self, label: &ModeLabel) -> Complex64 {
        self.amplitudes
            .get(label)
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn amplitudes(&self) -> impl Iterator<Item = (&ModeLabel, &Complex64)> {
        self.amplitudes.iter()
    }

    pub fn support_len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn canonicalize(&self) -> Self {
        let mut amplitudes = self.amplitudes.clone();
        prune(&mut amplitudes);
        CovectorState { amplitudes }
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self::new(self.amplitudes.iter().map(|(l, a)| (l.clone(), a * factor)))
    }
}

/// `⟨bra|ket⟩` as the plain sum of products over shared labels.
pub fn inner_product(bra: &CovectorState, ket: &PureState) -> Complex64 {
    let (small, large) = if bra.amplitudes.len() <= ket.amplitudes.len() {
        (&bra.amplitudes, &ket.amplitudes)
    } else {
        (&ket.amplitudes, &bra.amplitudes)
    };
    small
        .iter()
        .filter_map(|(l, a)| large.get(l).map(|b| a * b))
        .sum()
}

/// Keep the components whose label satisfies `predicate`. Returns the
/// unnormalized projected state and its squared norm.
pub fn project<F>(state: &PureState, predicate: F) -> (PureState, f64)
where
    F: Fn(&ModeLabel) -> bool,
{
    let projected = PureState::with_lost_weight(
        state
            .amplitudes
            .iter()
            .filter(|(l, _)| predicate(l))
            .map(|(l, a)| (l.clone(), *a)),
        state.lost_weight,
    );
    let p = projected.norm_sqr();
    (projected, p)
}

/// Rescale to unit norm and clear the absorbed weight.
pub fn normalize(state: &PureState) -> Result<PureState> {
    let norm = state.norm();
    if norm <= NULL_NORM {
        return Err(Error::NullState { norm });
    }
    Ok(PureState::new(
        state.amplitudes.iter().map(|(l, a)| (l.clone(), a / norm)),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn three_box() -> (CovectorState, PureState) {
        let r = 1.0 / 3f64.sqrt();
        let ket = PureState::new([
            (ModeLabel::path("C"), c(r, 0.0)),
            (ModeLabel::path("B"), c(r, 0.0)),
            (ModeLabel::path("A"), c(r, 0.0)),
        ]);
        let bra = CovectorState::new([
            (ModeLabel::path("C"), c(r, 0.0)),
            (ModeLabel::path("B"), c(r, 0.0)),
            (ModeLabel::path("A"), c(-r, 0.0)),
        ]);
        (bra, ket)
    }

    #[test]
    fn three_box_overlap_is_one_third() {
        let (bra, ket) = three_box();
        let o = inner_product(&bra, &ket);
        assert_relative_eq!(o.re, 1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(o.im, 0.0);
    }

    #[test]
    fn dual_overlap_is_norm() {
        let ket = PureState::new([
            (ModeLabel::path("A"), c(0.6, 0.0)),
            (ModeLabel::path("B"), c(0.0, 0.8)),
        ]);
        let o = inner_product(&CovectorState::dual(&ket), &ket);
        assert_relative_eq!(o.re, 1.0, epsilon = 1e-15);
        assert_relative_eq!(o.im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn disjoint_supports_are_orthogonal() {
        let ket = PureState::basis(ModeLabel::path("A"));
        let bra = CovectorState::basis(ModeLabel::path("B"));
        assert_eq!(inner_product(&bra, &ket), c(0.0, 0.0));
        let v = CovectorState::basis(ModeLabel::new("A", Polarization::V));
        assert_eq!(inner_product(&v, &ket), c(0.0, 0.0));
    }

    #[test]
    fn project_equal_superposition() {
        let r = 0.5f64.sqrt();
        let ket = PureState::new([
            (ModeLabel::path("A"), c(r, 0.0)),
            (ModeLabel::path("B"), c(r, 0.0)),
        ]);
        let (p, prob) = project(&ket, |l| l.path.as_str() == "B");
        assert_relative_eq!(prob, 0.5, epsilon = 1e-15);
        assert_eq!(p.support_len(), 1);
        assert_relative_eq!(p.amplitude(&ModeLabel::path("B")).re, r);

        let (all, prob) = project(&ket, |_| true);
        assert_eq!(all, ket);
        assert_relative_eq!(prob, ket.norm_sqr());
    }

    #[test]
    fn project_onto_orthogonal_environment() {
        let eps: f64 = 0.03;
        let site = SiteId::new("B");
        let ket = PureState::new([
            (ModeLabel::path("0"), c((1.0 - eps * eps).sqrt(), 0.0)),
            (
                ModeLabel::path("0").with_env(EnvConfig::undisturbed().with_perp(site.clone())),
                c(eps, 0.0),
            ),
        ]);
        let (_, prob) = project(&ket, |l| l.env.level("B") == EnvLevel::ChiPerp);
        assert_relative_eq!(prob, eps * eps, epsilon = 1e-16);
    }

    #[test]
    fn normalize_cases() {
        let two_a = PureState::new([(ModeLabel::path("A"), c(2.0, 0.0))]);
        assert_eq!(
            normalize(&two_a).unwrap(),
            PureState::basis(ModeLabel::path("A"))
        );

        let unit = PureState::new([
            (ModeLabel::path("A"), c(0.6, 0.0)),
            (ModeLabel::path("B"), c(0.0, 0.8)),
        ]);
        let n = normalize(&unit).unwrap();
        for (l, a) in unit.amplitudes() {
            assert_relative_eq!((n.amplitude(l) - a).norm(), 0.0, epsilon = 1e-15);
        }

        assert!(matches!(
            normalize(&PureState::zero()),
            Err(Error::NullState { .. })
        ));
    }

    #[test]
    fn normalize_clears_lost_weight() {
        let s = PureState::with_lost_weight([(ModeLabel::path("A"), c(0.5, 0.0))], 0.75);
        let n = normalize(&s).unwrap();
        assert_eq!(n.lost_weight(), 0.0);
        assert_relative_eq!(n.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn env_config_never_stores_chi() {
        let env = EnvConfig::from_levels([
            (SiteId::new("a"), EnvLevel::Chi),
            (SiteId::new("b"), EnvLevel::ChiPerp),
        ]);
        assert_eq!(env.len(), 1);
        assert_eq!(env.level("a"), EnvLevel::Chi);
        assert_eq!(env.level("b"), EnvLevel::ChiPerp);
        assert_eq!(
            EnvConfig::from_levels([(SiteId::new("a"), EnvLevel::Chi)]),
            EnvConfig::undisturbed()
        );
    }

    #[test]
    fn pruning_drops_tiny_amplitudes() {
        let s = PureState::new([
            (ModeLabel::path("A"), c(1.0, 0.0)),
            (ModeLabel::path("B"), c(1e-16, 0.0)),
        ]);
        assert_eq!(s.support_len(), 1);
    }
}
