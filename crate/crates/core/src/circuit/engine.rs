//! Compiled form of a circuit: integer path indices, flat op list and dense
//! amplitude registers (one per environment branch).

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_complex::Complex64;

use super::{Element, Outcome};
use crate::state::{CovectorState, EnvConfig, ModeLabel, PathId, Polarization, PureState, SiteId};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Sorted indices of the sites in `χ⊥`.
pub(crate) type EnvKey = Vec<u32>;

/// Key used for the single shared environment in the additive model.
pub(crate) const SHARED_KEY: u32 = u32::MAX;
pub(crate) const SHARED_SITE: &str = "*";

#[derive(Debug, Clone)]
pub(crate) enum Op {
    Mix {
        ia: usize,
        ib: usize,
        oa: usize,
        ob: usize,
        c: f64,
        s: f64,
    },
    Swap {
        a: usize,
        b: usize,
    },
    Phase {
        path: usize,
        phase: Complex64,
    },
    Absorb {
        path: usize,
    },
    Couple {
        path: usize,
        site: u32,
        epsilon: Option<f64>,
    },
    Rotate {
        path: usize,
        site: u32,
    },
}

/// How environment couplers act during a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvMode {
    /// Couplers are skipped (first-order and Fisher runs).
    Off,
    /// One qubit per site, exact unitary coupling, branches with more than
    /// `max_excitations` disturbed sites are dropped.
    PerSite { max_excitations: usize },
    /// A single shared environment whose `χ⊥` amplitude grows additively.
    Shared,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct EngineParams<'a> {
    pub epsilon: f64,
    pub theta: f64,
    pub distorted: &'a [bool],
    pub env: EnvMode,
}

#[derive(Debug, Clone)]
pub(crate) struct Register {
    pub base: Vec<Complex64>,
    pub excited: BTreeMap<EnvKey, Vec<Complex64>>,
    pub lost: f64,
}

impl Register {
    pub fn zeros(width: usize) -> Self {
        Register {
            base: vec![ZERO; width],
            excited: BTreeMap::new(),
            lost: 0.0,
        }
    }

    fn for_each_mut(&mut self, mut f: impl FnMut(&mut [Complex64])) {
        f(&mut self.base);
        for v in self.excited.values_mut() {
            f(v);
        }
    }

    pub fn branches(&self) -> impl Iterator<Item = (&[u32], &[Complex64])> {
        std::iter::once((&[][..], &self.base[..]))
            .chain(self.excited.iter().map(|(k, v)| (&k[..], &v[..])))
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Program {
    pub paths: Vec<PathId>,
    pub path_index: HashMap<PathId, usize>,
    pub sites: Vec<SiteId>,
    pub site_index: HashMap<SiteId, u32>,
    pub ops: Vec<Op>,
    /// `slice_start[s]..slice_start[s + 1]` are the ops of slice `s`.
    pub slice_start: Vec<usize>,
    pub source: usize,
    pub source_pol: Polarization,
    /// Detector ids with their path index, in id order.
    pub detectors: Vec<(String, usize)>,
    pub outcomes: Vec<Outcome>,
}

fn snapped_phase(phase: f64) -> Complex64 {
    let snap = |x: f64| if x.abs() < 1e-15 { 0.0 } else { x };
    Complex64::new(snap(phase.cos()), snap(phase.sin()))
}

impl Program {
    pub fn compile(
        slices: &[Vec<Element>],
        source: &PathId,
        source_pol: Polarization,
        detectors: &BTreeMap<String, PathId>,
        sites: &[SiteId],
    ) -> Program {
        let mut paths: BTreeSet<PathId> = BTreeSet::new();
        paths.insert(source.clone());
        paths.extend(detectors.values().cloned());
        for el in slices.iter().flatten() {
            paths.extend(el.paths().into_iter().cloned());
        }
        let paths: Vec<PathId> = paths.into_iter().collect();
        let path_index: HashMap<PathId, usize> =
            paths.iter().enumerate().map(|(i, p)| (p.clone(), i)).collect();
        let site_index: HashMap<SiteId, u32> = sites
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as u32))
            .collect();
        let p = |id: &PathId| path_index[id];

        let mut ops = Vec::new();
        let mut slice_start = Vec::with_capacity(slices.len() + 1);
        for slice in slices {
            slice_start.push(ops.len());
            for el in slice {
                match el {
                    Element::BeamSplitter {
                        in_a,
                        in_b,
                        out_a,
                        out_b,
                        angle,
                    } => ops.push(Op::Mix {
                        ia: p(in_a),
                        ib: p(in_b),
                        oa: p(out_a),
                        ob: p(out_b),
                        c: angle.cos(),
                        s: angle.sin(),
                    }),
                    Element::Mirror { r#in, out, phase } => {
                        if r#in != out {
                            ops.push(Op::Swap {
                                a: p(r#in),
                                b: p(out),
                            });
                        }
                        let ph = snapped_phase(*phase);
                        if ph != Complex64::new(1.0, 0.0) {
                            ops.push(Op::Phase {
                                path: p(out),
                                phase: ph,
                            });
                        }
                    }
                    Element::Absorber { path } => ops.push(Op::Absorb { path: p(path) }),
                    Element::EnvCoupler {
                        path,
                        site,
                        epsilon,
                    } => ops.push(Op::Couple {
                        path: p(path),
                        site: site_index[site],
                        epsilon: *epsilon,
                    }),
                    Element::PolRotator { path, site, .. } => ops.push(Op::Rotate {
                        path: p(path),
                        site: site_index[site],
                    }),
                    Element::Relabel { from, to } => {
                        if from != to {
                            ops.push(Op::Swap {
                                a: p(from),
                                b: p(to),
                            })
                        }
                    }
                }
            }
        }
        slice_start.push(ops.len());

        let detectors: Vec<(String, usize)> =
            detectors.iter().map(|(d, path)| (d.clone(), p(path))).collect();
        let mut outcomes = Vec::with_capacity(2 * detectors.len() + 1);
        for (d, _) in &detectors {
            for pol in Polarization::ALL {
                outcomes.push(Outcome::Detector {
                    detector: d.clone(),
                    polarization: pol,
                });
            }
        }
        outcomes.push(Outcome::Lost);

        Program {
            source: p(source),
            source_pol,
            paths,
            path_index,
            sites: sites.to_vec(),
            site_index,
            ops,
            slice_start,
            detectors,
            outcomes,
        }
    }

    pub fn width(&self) -> usize {
        2 * self.paths.len()
    }

    pub fn n_slices(&self) -> usize {
        self.slice_start.len() - 1
    }

    pub fn initial(&self) -> Register {
        let mut r = Register::zeros(self.width());
        r.base[2 * self.source + self.source_pol.index()] = Complex64::new(1.0, 0.0);
        r
    }

    /// Unit covector on a detector path.
    pub fn detector_covector(&self, detector: &str, pol: Polarization) -> Option<Register> {
        let (_, path) = self.detectors.iter().find(|(d, _)| d == detector)?;
        let mut r = Register::zeros(self.width());
        r.base[2 * path + pol.index()] = Complex64::new(1.0, 0.0);
        Some(r)
    }

    /// Apply slices `from..to` forward, calling `observe(b, reg)` at every
    /// boundary `b` in `from..=to` before any slice at `b` is applied.
    pub fn run_forward(
        &self,
        reg: &mut Register,
        from: usize,
        to: usize,
        params: &EngineParams,
        mut observe: impl FnMut(usize, &Register),
    ) {
        for s in from..to {
            observe(s, reg);
            for op in &self.ops[self.slice_start[s]..self.slice_start[s + 1]] {
                apply_forward(op, reg, params);
            }
        }
        observe(to, reg);
    }

    /// Apply slice adjoints from boundary `from` down to boundary `to`
    /// (`from ≥ to`), observing every boundary after it is reached.
    pub fn run_backward(
        &self,
        reg: &mut Register,
        from: usize,
        to: usize,
        params: &EngineParams,
        mut observe: impl FnMut(usize, &Register),
    ) {
        for s in (to..from).rev() {
            observe(s + 1, reg);
            for op in self.ops[self.slice_start[s]..self.slice_start[s + 1]]
                .iter()
                .rev()
            {
                apply_backward(op, reg, params);
            }
        }
        observe(to, reg);
    }

    /// Probabilities in `self.outcomes` order: detector × {H, V}, then lost.
    pub fn outcome_probs(&self, reg: &Register) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.outcomes.len());
        for (_, path) in &self.detectors {
            for pol in 0..2 {
                let i = 2 * path + pol;
                out.push(reg.branches().map(|(_, v)| v[i].norm_sqr()).sum());
            }
        }
        out.push(reg.lost);
        out
    }

    /// Per detector: total probability and the part with a disturbed environment.
    pub fn detector_split(&self, reg: &Register) -> Vec<(f64, f64)> {
        self.detectors
            .iter()
            .map(|(_, path)| {
                let mut total = 0.0;
                let mut excited = 0.0;
                for (key, v) in reg.branches() {
                    let p = v[2 * path].norm_sqr() + v[2 * path + 1].norm_sqr();
                    total += p;
                    if !key.is_empty() {
                        excited += p;
                    }
                }
                (total, excited)
            })
            .collect()
    }

    fn env_config(&self, key: &[u32]) -> EnvConfig {
        key.iter().fold(EnvConfig::undisturbed(), |env, &k| {
            if k == SHARED_KEY {
                env.with_perp(SiteId::new(SHARED_SITE))
            } else {
                env.with_perp(self.sites[k as usize].clone())
            }
        })
    }

    fn labelled(&self, reg: &Register) -> Vec<(ModeLabel, Complex64)> {
        let mut out = Vec::new();
        for (key, v) in reg.branches() {
            let env = self.env_config(key);
            for (i, a) in v.iter().enumerate() {
                if *a != ZERO {
                    out.push((
                        ModeLabel::new(self.paths[i / 2].clone(), Polarization::from_index(i % 2))
                            .with_env(env.clone()),
                        *a,
                    ));
                }
            }
        }
        out
    }

    pub fn to_pure(&self, reg: &Register) -> PureState {
        PureState::with_lost_weight(self.labelled(reg), reg.lost)
    }

    pub fn to_covector(&self, reg: &Register) -> CovectorState {
        CovectorState::new(self.labelled(reg))
    }

    /// Load a sparse state. Labels on unknown paths or sites are rejected.
    pub fn load<'a>(
        &self,
        amplitudes: impl Iterator<Item = (&'a ModeLabel, &'a Complex64)>,
        lost: f64,
    ) -> Result<Register, String> {
        let mut reg = Register::zeros(self.width());
        reg.lost = lost;
        for (label, a) in amplitudes {
            let path = *self
                .path_index
                .get(&label.path)
                .ok_or_else(|| format!("unknown path {}", label.path))?;
            let mut key: EnvKey = Vec::new();
            for s in label.env.disturbed_sites() {
                let k = if s.as_str() == SHARED_SITE {
                    SHARED_KEY
                } else {
                    *self
                        .site_index
                        .get(s)
                        .ok_or_else(|| format!("unknown site {s}"))?
                };
                key.push(k);
            }
            key.sort_unstable();
            let i = 2 * path + label.polarization.index();
            if key.is_empty() {
                reg.base[i] += a;
            } else {
                reg.excited
                    .entry(key)
                    .or_insert_with(|| vec![ZERO; self.width()])[i] += a;
            }
        }
        Ok(reg)
    }
}

fn apply_forward(op: &Op, reg: &mut Register, params: &EngineParams) {
    match *op {
        Op::Mix {
            ia,
            ib,
            oa,
            ob,
            c,
            s,
        } => reg.for_each_mut(|v| {
            for p in 0..2 {
                let x = v[2 * ia + p];
                let y = v[2 * ib + p];
                v[2 * ia + p] = ZERO;
                v[2 * ib + p] = ZERO;
                v[2 * oa + p] = x * c + y * s;
                v[2 * ob + p] = x * s - y * c;
            }
        }),
        Op::Swap { a, b } => reg.for_each_mut(|v| {
            v.swap(2 * a, 2 * b);
            v.swap(2 * a + 1, 2 * b + 1);
        }),
        Op::Phase { path, phase } => reg.for_each_mut(|v| {
            v[2 * path] *= phase;
            v[2 * path + 1] *= phase;
        }),
        Op::Absorb { path } => {
            let mut lost = 0.0;
            reg.for_each_mut(|v| {
                lost += v[2 * path].norm_sqr() + v[2 * path + 1].norm_sqr();
                v[2 * path] = ZERO;
                v[2 * path + 1] = ZERO;
            });
            reg.lost += lost;
        }
        Op::Couple {
            path,
            site,
            epsilon,
        } => {
            let eps = epsilon.unwrap_or(params.epsilon);
            couple(reg, path, site, eps, params.env);
        }
        Op::Rotate { path, site } => rotate(reg, path, site, params.theta, params.distorted),
    }
}

fn apply_backward(op: &Op, reg: &mut Register, params: &EngineParams) {
    match *op {
        Op::Mix {
            ia,
            ib,
            oa,
            ob,
            c,
            s,
        } => reg.for_each_mut(|v| {
            for p in 0..2 {
                let x = v[2 * oa + p];
                let y = v[2 * ob + p];
                v[2 * oa + p] = ZERO;
                v[2 * ob + p] = ZERO;
                v[2 * ia + p] = x * c + y * s;
                v[2 * ib + p] = x * s - y * c;
            }
        }),
        Op::Swap { .. } | Op::Phase { .. } => apply_forward(op, reg, params),
        Op::Absorb { path } => reg.for_each_mut(|v| {
            v[2 * path] = ZERO;
            v[2 * path + 1] = ZERO;
        }),
        Op::Couple {
            path,
            site,
            epsilon,
        } => {
            let eps = epsilon.unwrap_or(params.epsilon);
            match params.env {
                EnvMode::Shared => couple_shared_transposed(reg, path, eps),
                mode => couple(reg, path, site, -eps, mode),
            }
        }
        Op::Rotate { path, site } => rotate(reg, path, site, -params.theta, params.distorted),
    }
}

fn rotate(reg: &mut Register, path: usize, site: u32, theta: f64, distorted: &[bool]) {
    if theta == 0.0 || !distorted.get(site as usize).copied().unwrap_or(false) {
        return;
    }
    let (s, c) = theta.sin_cos();
    reg.for_each_mut(|v| {
        let h = v[2 * path];
        let vv = v[2 * path + 1];
        v[2 * path] = h * c - vv * s;
        v[2 * path + 1] = h * s + vv * c;
    });
}

fn couple(reg: &mut Register, path: usize, site: u32, eps: f64, mode: EnvMode) {
    if eps == 0.0 {
        return;
    }
    match mode {
        EnvMode::Off => {}
        EnvMode::Shared => {
            let width = reg.base.len();
            let (i, j) = (2 * path, 2 * path + 1);
            let (h, v) = (reg.base[i], reg.base[j]);
            let perp = reg
                .excited
                .entry(vec![SHARED_KEY])
                .or_insert_with(|| vec![ZERO; width]);
            perp[i] += h * eps;
            perp[j] += v * eps;
        }
        EnvMode::PerSite { max_excitations } => {
            couple_per_site(reg, path, site, eps, max_excitations)
        }
    }
}

fn couple_shared_transposed(reg: &mut Register, path: usize, eps: f64) {
    if eps == 0.0 {
        return;
    }
    if let Some(perp) = reg.excited.get(&vec![SHARED_KEY]) {
        let (h, v) = (perp[2 * path], perp[2 * path + 1]);
        reg.base[2 * path] += h * eps;
        reg.base[2 * path + 1] += v * eps;
    }
}

/// χ → √(1−ε²)χ + εχ⊥ and χ⊥ → −εχ + √(1−ε²)χ⊥ on the site qubit, for the
/// amplitude on `path` only.
fn couple_per_site(reg: &mut Register, path: usize, site: u32, eps: f64, cap: usize) {
    let c = (1.0 - eps * eps).sqrt();
    let width = reg.base.len();
    let (i, j) = (2 * path, 2 * path + 1);

    // Pair every branch key with its partner differing only in `site`.
    let mut bases: BTreeSet<EnvKey> = BTreeSet::new();
    bases.insert(Vec::new());
    for k in reg.excited.keys() {
        let mut b = k.clone();
        if let Ok(pos) = b.binary_search(&site) {
            b.remove(pos);
        }
        bases.insert(b);
    }

    for base in bases {
        let mut with = base.clone();
        let pos = with.binary_search(&site).unwrap_err();
        with.insert(pos, site);

        let lo = if base.is_empty() {
            Some(&reg.base)
        } else {
            reg.excited.get(&base)
        };
        let (lh, lv) = lo.map(|v| (v[i], v[j])).unwrap_or((ZERO, ZERO));
        let (hh, hv) = reg
            .excited
            .get(&with)
            .map(|v| (v[i], v[j]))
            .unwrap_or((ZERO, ZERO));
        if lh == ZERO && lv == ZERO && hh == ZERO && hv == ZERO {
            continue;
        }

        let new_lo = (lh * c - hh * eps, lv * c - hv * eps);
        let new_hi = (lh * eps + hh * c, lv * eps + hv * c);

        let lo_vec = if base.is_empty() {
            &mut reg.base
        } else {
            reg.excited
                .entry(base.clone())
                .or_insert_with(|| vec![ZERO; width])
        };
        lo_vec[i] = new_lo.0;
        lo_vec[j] = new_lo.1;

        if with.len() <= cap {
            let hi_vec = reg.excited.entry(with).or_insert_with(|| vec![ZERO; width]);
            hi_vec[i] = new_hi.0;
            hi_vec[j] = new_hi.1;
        } else if let Some(hi_vec) = reg.excited.get_mut(&with) {
            hi_vec[i] = ZERO;
            hi_vec[j] = ZERO;
        }
    }
}
