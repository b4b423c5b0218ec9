//! Fisher information about the polarization distortion θ available at
//! Alice's detectors, extrapolated to θ → 0.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::engine::{EngineParams, EnvMode, Register};
use crate::circuit::{Circuit, Owner};
use crate::error::{Error, Result};
use crate::state::SiteId;
use crate::tsvf::weak_value_table;

/// Probabilities below this use the quadratic-limit rule `4P/θ²`.
pub const QUADRATIC_LIMIT: f64 = 1e-14;

pub const DEFAULT_THETA_GRID: [f64; 4] = [0.02, 0.01, 0.005, 0.0025];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FisherMode {
    /// Distort one site at a time and sum the information.
    #[default]
    PerSiteSum,
    /// Distort every Bob site by the same θ.
    CommonTheta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherOptions {
    /// Normalize `P(i|θ)` over the legitimate outcomes.
    pub postselected: bool,
    /// Decreasing, at least two points.
    pub theta_grid: Vec<f64>,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Fail with [`Error::Unconverged`] instead of flagging the report.
    pub strict: bool,
}

impl Default for FisherOptions {
    fn default() -> Self {
        FisherOptions {
            postselected: true,
            theta_grid: DEFAULT_THETA_GRID.to_vec(),
            rel_tol: 1e-3,
            abs_tol: 1e-10,
            strict: true,
        }
    }
}

impl FisherOptions {
    pub fn unnormalized() -> Self {
        FisherOptions {
            postselected: false,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let g = &self.theta_grid;
        if g.len() < 2 {
            return Err(Error::validation("theta_grid", "needs at least two values"));
        }
        if g.iter().any(|t| !(1e-4..=0.1).contains(t)) {
            return Err(Error::validation("theta_grid", "values must lie in [1e-4, 0.1]"));
        }
        if g.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::validation("theta_grid", "must be strictly decreasing"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherReport {
    pub mode: FisherMode,
    pub postselected: bool,
    /// Per distorted site (per-site mode only).
    pub per_site: BTreeMap<String, f64>,
    pub per_detector: BTreeMap<String, f64>,
    pub total: f64,
    pub reference: f64,
    pub ratio: f64,
    pub theta_grid: Vec<f64>,
    pub extrapolation_residual: f64,
    pub converged: bool,
    /// Information carried by clicks outside the legitimate set, unnormalized.
    pub excluded: BTreeMap<String, f64>,
    pub excluded_total: f64,
}

/// Extrapolated Fisher information for one distortion pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherLimit {
    pub per_detector: BTreeMap<String, f64>,
    pub excluded: BTreeMap<String, f64>,
    pub total: f64,
    pub residual: f64,
    pub converged: bool,
}

/// Outcome probabilities as a function of θ, in [`Circuit::outcomes`] order.
pub trait Distribution: Sync {
    fn probs(&self, theta: f64) -> Result<Vec<f64>>;
}

impl<F> Distribution for F
where
    F: Fn(f64) -> Result<Vec<f64>> + Sync,
{
    fn probs(&self, theta: f64) -> Result<Vec<f64>> {
        self(theta)
    }
}

struct Terms {
    legit: Vec<f64>,
    excluded: Vec<f64>,
}

fn contribution(p: f64, dp: f64, theta: f64) -> f64 {
    if p < QUADRATIC_LIMIT {
        4.0 * p.max(0.0) / (theta * theta)
    } else {
        dp * dp / p
    }
}

/// Per-detector Fisher terms at `theta`; detectors in id order, each split
/// into the legitimate and excluded vectors (zero in the other).
fn terms(
    circuit: &Circuit,
    dist: &dyn Distribution,
    theta: f64,
    postselected: bool,
) -> Result<Terms> {
    let h = theta / 8.0;
    let pm = dist.probs(theta - h)?;
    let p0 = dist.probs(theta)?;
    let pp = dist.probs(theta + h)?;
    let prog = circuit.program();
    let nd = prog.detectors.len();
    let legit: Vec<bool> = prog
        .detectors
        .iter()
        .map(|(d, _)| circuit.is_legitimate(d))
        .collect();

    let norm = |p: &[f64]| -> f64 {
        if !postselected {
            return 1.0;
        }
        (0..nd)
            .filter(|&d| legit[d])
            .map(|d| p[2 * d] + p[2 * d + 1])
            .sum()
    };
    let (sm, s0, sp) = (norm(&pm), norm(&p0), norm(&pp));

    let mut out = Terms {
        legit: vec![0.0; nd],
        excluded: vec![0.0; nd],
    };
    for d in 0..nd {
        let mut f = 0.0;
        for i in [2 * d, 2 * d + 1] {
            let (a, b, c) = if legit[d] {
                if s0 <= 0.0 || sm <= 0.0 || sp <= 0.0 {
                    (0.0, 0.0, 0.0)
                } else {
                    (pm[i] / sm, p0[i] / s0, pp[i] / sp)
                }
            } else {
                (pm[i], p0[i], pp[i])
            };
            f += contribution(b, (c - a) / (2.0 * h), theta);
        }
        if legit[d] {
            out.legit[d] = f;
        } else {
            out.excluded[d] = f;
        }
    }
    Ok(out)
}

/// Fisher information summed over the legitimate outcomes at one θ.
pub fn fisher_at(
    circuit: &Circuit,
    theta: f64,
    distorted_sites: &BTreeSet<SiteId>,
    opts: &FisherOptions,
) -> Result<f64> {
    if !(1e-4..=0.1).contains(&theta.abs()) {
        return Err(Error::validation("theta", format!("{theta} outside [1e-4, 0.1]")));
    }
    let dist = EngineDistribution::new(circuit, distorted_sites)?;
    Ok(terms(circuit, &dist, theta, opts.postselected)?.legit.iter().sum())
}

/// Romberg table over a halving grid; returns (estimate, |R[n][n] − R[n−1][n−1]|).
pub fn richardson(grid: &[f64], values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mut table: Vec<Vec<f64>> = vec![vec![0.0; n]; n];
    for i in 0..n {
        table[i][0] = values[i];
        for j in 1..=i {
            let factor = (grid[i - 1] / grid[i]).powi(2 * j as i32);
            table[i][j] =
                table[i][j - 1] + (table[i][j - 1] - table[i - 1][j - 1]) / (factor - 1.0);
        }
    }
    let best = table[n - 1][n - 1];
    let prev = if n >= 2 { table[n - 2][n - 2] } else { best };
    (best, (best - prev).abs())
}

/// Extrapolate θ → 0 for an arbitrary distribution source.
pub fn extrapolate(
    circuit: &Circuit,
    dist: &dyn Distribution,
    opts: &FisherOptions,
) -> Result<FisherLimit> {
    opts.validate()?;
    let prog = circuit.program();
    let nd = prog.detectors.len();
    let mut legit_rows = vec![Vec::with_capacity(opts.theta_grid.len()); nd];
    let mut excl_rows = vec![Vec::with_capacity(opts.theta_grid.len()); nd];
    for &t in &opts.theta_grid {
        let tm = terms(circuit, dist, t, opts.postselected)?;
        for d in 0..nd {
            legit_rows[d].push(tm.legit[d]);
            excl_rows[d].push(tm.excluded[d]);
        }
    }
    let mut per_detector = BTreeMap::new();
    let mut excluded = BTreeMap::new();
    let mut total = 0.0;
    let mut residual = 0.0;
    for (d, (id, _)) in prog.detectors.iter().enumerate() {
        if circuit.is_legitimate(id) {
            let (f, r) = richardson(&opts.theta_grid, &legit_rows[d]);
            let f = f.max(0.0);
            per_detector.insert(id.clone(), f);
            total += f;
            residual += r;
        } else {
            let (f, _) = richardson(&opts.theta_grid, &excl_rows[d]);
            excluded.insert(id.clone(), f.max(0.0));
        }
    }
    let converged = residual <= opts.rel_tol * total.abs() + opts.abs_tol;
    Ok(FisherLimit {
        per_detector,
        excluded,
        total,
        residual,
        converged,
    })
}

/// Outcome distributions from the compiled engine, resuming from a cached
/// θ-independent prefix.
struct EngineDistribution<'a> {
    circuit: &'a Circuit,
    mask: Vec<bool>,
    start: usize,
    prefix: Register,
}

impl<'a> EngineDistribution<'a> {
    fn new(circuit: &'a Circuit, distorted: &BTreeSet<SiteId>) -> Result<Self> {
        let mut start = circuit.n_slices();
        for s in distorted {
            match circuit.site(s.as_str()) {
                Some(d) if d.owner == Owner::Bob => {
                    start = start.min(circuit.rotator_slice(s.as_str()).expect("validated"));
                }
                _ => {
                    return Err(Error::validation(
                        "distorted_sites",
                        format!("{s} is not a Bob site"),
                    ))
                }
            }
        }
        let prog = circuit.program();
        let mut prefix = prog.initial();
        prog.run_forward(&mut prefix, 0, start, &undistorted(), |_, _| {});
        Ok(Self::with_prefix(circuit, distorted, start, prefix))
    }

    fn with_prefix(
        circuit: &'a Circuit,
        distorted: &BTreeSet<SiteId>,
        start: usize,
        prefix: Register,
    ) -> Self {
        EngineDistribution {
            circuit,
            mask: circuit.distortion_mask(distorted),
            start,
            prefix,
        }
    }
}

fn undistorted() -> EngineParams<'static> {
    EngineParams {
        epsilon: 0.0,
        theta: 0.0,
        distorted: &[],
        env: EnvMode::Off,
    }
}

impl Distribution for EngineDistribution<'_> {
    fn probs(&self, theta: f64) -> Result<Vec<f64>> {
        let prog = self.circuit.program();
        let mut reg = self.prefix.clone();
        let ep = EngineParams {
            epsilon: 0.0,
            theta,
            distorted: &self.mask,
            env: EnvMode::Off,
        };
        prog.run_forward(&mut reg, self.start, prog.n_slices(), &ep, |_, _| {});
        Ok(prog.outcome_probs(&reg))
    }
}

/// `fisher_limit` for a set of distorted sites.
pub fn fisher_limit(
    circuit: &Circuit,
    distorted_sites: &BTreeSet<SiteId>,
    opts: &FisherOptions,
) -> Result<FisherLimit> {
    let dist = EngineDistribution::new(circuit, distorted_sites)?;
    let lim = extrapolate(circuit, &dist, opts)?;
    check(&lim, opts, None)?;
    Ok(lim)
}

fn check(lim: &FisherLimit, opts: &FisherOptions, site: Option<&str>) -> Result<()> {
    if opts.strict && !lim.converged {
        let err = Error::Unconverged {
            site: None,
            estimate: lim.total,
            residual: lim.residual,
            tolerance: opts.rel_tol * lim.total.abs() + opts.abs_tol,
        };
        return Err(match site {
            Some(s) => err.at_site(s),
            None => err,
        });
    }
    Ok(())
}

fn reference(circuit: &Circuit) -> f64 {
    4.0 / circuit.reference_path_count() as f64
}

/// Distort each Bob site alone, extrapolate, and sum.
pub fn fisher_per_site_sum(circuit: &Circuit, opts: &FisherOptions) -> Result<FisherReport> {
    opts.validate()?;
    let prog = circuit.program();
    let sites: Vec<SiteId> = circuit.bob_sites().map(|s| s.id.clone()).collect();
    let starts: Vec<usize> = sites
        .iter()
        .map(|s| circuit.rotator_slice(s.as_str()).expect("validated"))
        .collect();

    // Cache the undistorted register at every rotator slice.
    let mut order: Vec<usize> = (0..sites.len()).collect();
    order.sort_by_key(|&i| starts[i]);
    let mut prefixes: Vec<Option<Register>> = vec![None; sites.len()];
    {
        let mut reg = prog.initial();
        let mut at = 0;
        for &i in &order {
            prog.run_forward(&mut reg, at, starts[i], &undistorted(), |_, _| {});
            at = starts[i];
            prefixes[i] = Some(reg.clone());
        }
    }

    let limits: Vec<Result<FisherLimit>> = sites
        .par_iter()
        .zip(prefixes.into_par_iter())
        .zip(starts.par_iter())
        .map(|((site, prefix), &start)| {
            let one: BTreeSet<SiteId> = [site.clone()].into_iter().collect();
            let dist = EngineDistribution::with_prefix(
                circuit,
                &one,
                start,
                prefix.expect("filled above"),
            );
            let lim = extrapolate(circuit, &dist, opts)?;
            check(&lim, opts, Some(site.as_str()))?;
            Ok(lim)
        })
        .collect();

    let mut per_site = BTreeMap::new();
    let mut per_detector: BTreeMap<String, f64> = BTreeMap::new();
    let mut excluded: BTreeMap<String, f64> = BTreeMap::new();
    let mut total = 0.0;
    let mut residual = 0.0;
    let mut converged = true;
    for (site, lim) in sites.iter().zip(limits) {
        let lim = lim?;
        per_site.insert(site.to_string(), lim.total);
        for (d, f) in &lim.per_detector {
            *per_detector.entry(d.clone()).or_default() += f;
        }
        for (d, f) in &lim.excluded {
            *excluded.entry(d.clone()).or_default() += f;
        }
        total += lim.total;
        residual += lim.residual;
        converged &= lim.converged;
    }
    Ok(report(
        circuit,
        FisherMode::PerSiteSum,
        opts,
        per_site,
        per_detector,
        excluded,
        total,
        residual,
        converged,
    ))
}

/// Largest accumulated rotation `θ·|Σ W|` allowed at the coarsest grid point.
pub const MAX_COMMON_ROTATION: f64 = 0.1;

/// Grid for a shared θ: with many sites the polarization turns by about
/// `θ·Σ W`, so the grid is shrunk until that stays small (but never below
/// the 1e-4 floor).
fn common_grid(circuit: &Circuit, opts: &FisherOptions) -> Result<Vec<f64>> {
    let mut sum: f64 = 0.0;
    for d in circuit.legitimate_outcomes() {
        let table = weak_value_table(circuit, d)?;
        if table.is_singular() {
            continue;
        }
        let total: num_complex::Complex64 = table.values.values().filter_map(|w| w.value()).sum();
        sum = sum.max(total.norm());
    }
    let grid = &opts.theta_grid;
    let coarse = grid[0];
    let finest = grid[grid.len() - 1];
    let mut scale = if coarse * sum > MAX_COMMON_ROTATION {
        MAX_COMMON_ROTATION / (coarse * sum)
    } else {
        1.0
    };
    scale = scale.max(1.000_001e-4 / finest).min(1.0);
    Ok(grid.iter().map(|t| t * scale).collect())
}

/// Distort every Bob site by the same θ.
pub fn fisher_common_theta(circuit: &Circuit, opts: &FisherOptions) -> Result<FisherReport> {
    opts.validate()?;
    let opts = &FisherOptions {
        theta_grid: common_grid(circuit, opts)?,
        ..opts.clone()
    };
    let lim = fisher_limit(circuit, &circuit.all_bob_site_ids(), opts)?;
    Ok(report(
        circuit,
        FisherMode::CommonTheta,
        opts,
        BTreeMap::new(),
        lim.per_detector,
        lim.excluded,
        lim.total,
        lim.residual,
        lim.converged,
    ))
}

pub fn fisher_report(
    circuit: &Circuit,
    mode: FisherMode,
    opts: &FisherOptions,
) -> Result<FisherReport> {
    match mode {
        FisherMode::PerSiteSum => fisher_per_site_sum(circuit, opts),
        FisherMode::CommonTheta => fisher_common_theta(circuit, opts),
    }
}

#[allow(clippy::too_many_arguments)]
fn report(
    circuit: &Circuit,
    mode: FisherMode,
    opts: &FisherOptions,
    per_site: BTreeMap<String, f64>,
    per_detector: BTreeMap<String, f64>,
    excluded: BTreeMap<String, f64>,
    total: f64,
    residual: f64,
    converged: bool,
) -> FisherReport {
    let reference = reference(circuit);
    FisherReport {
        mode,
        postselected: opts.postselected,
        per_site,
        per_detector,
        total,
        reference,
        ratio: total / reference,
        theta_grid: opts.theta_grid.clone(),
        extrapolation_residual: residual,
        converged,
        excluded_total: excluded.values().sum(),
        excluded,
    }
}
