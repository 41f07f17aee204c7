//! Grid sweeps that check each inequality in the direction it is proved,
//! against the exact law where the support is enumerable and against seeded
//! Monte Carlo elsewhere.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    agrawal_delta_bound, agrawal_tail, bdd_diff_variance, center_from_moments, center_from_tails, disc_grad_bound,
    g_half_df_threshold, main_theorem_params, range_thresholds, raw_moment_bound, sanov_tail, ConstantsConfig,
    SubGammaParams,
};
use crate::error::{Error, Result};
use crate::exact::{compositions, enumerate_law, support_size, ExactLaw};
use crate::math::{chain_decompose, g_func, z_statistic, Counts, Distribution};
use crate::montecarlo::{draw_counts, mc_moment, sample_z, McRun};
use crate::special::{ln_gamma, log_binomial_pmf, log_sum_exp};

/// Tolerance for comparisons between exactly computed quantities.
pub const EXACT_TOL: f64 = 1e-10;
/// Tolerance for tail domination by closed-form bounds.
pub const TAIL_TOL: f64 = 1e-12;
/// Relative tolerance of the chain-rule identity.
pub const CHAIN_TOL: f64 = 1e-12;
/// Monte Carlo comparisons allow this many standard errors.
pub const MC_SIGMAS: f64 = 5.0;
/// At most this many failures are listed in a report (all are counted).
pub const MAX_LISTED_FAILURES: usize = 100;

// ---------------------------------------------------------------------------
// Distributions on the grid

/// A family of distributions, instantiated for each alphabet size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PShape {
    Uniform,
    /// p_i ∝ ratio^i.
    Geometric(f64),
    /// The first ⌈k/2⌉ symbols carry `ratio` times the mass of the others.
    TwoLevel(f64),
    /// Flat Dirichlet draw from a seeded stream.
    Dirichlet(u64),
    /// k-1 symbols at exactly α, the rest on the last one.
    MinMass(f64),
}

impl PShape {
    pub fn build(&self, k: usize) -> Result<Distribution> {
        if k == 0 {
            return Err(Error::domain("a distribution needs k >= 1"));
        }
        match *self {
            PShape::Uniform => Distribution::uniform(k),
            PShape::Geometric(r) => {
                if !(r > 0.0 && r <= 1.0) {
                    return Err(Error::domain("geometric ratio must lie in (0, 1]"));
                }
                let w: Vec<f64> = (0..k).map(|i| r.powi(i as i32)).collect();
                Distribution::from_weights(&w)
            }
            PShape::TwoLevel(ratio) => {
                if !(ratio > 0.0 && ratio.is_finite()) {
                    return Err(Error::domain("two-level ratio must be positive"));
                }
                let heavy = k.div_ceil(2);
                let w: Vec<f64> = (0..k).map(|i| if i < heavy { ratio } else { 1.0 }).collect();
                Distribution::from_weights(&w)
            }
            PShape::Dirichlet(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(k as u64);
                let w: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
                Distribution::from_weights(&w)
            }
            PShape::MinMass(a) => {
                if !(a > 0.0 && a * k as f64 <= 1.0 + 1e-12) {
                    return Err(Error::domain("min-mass alpha must lie in (0, 1/k]"));
                }
                let mut probs = vec![a; k];
                probs[k - 1] = (1.0 - (k - 1) as f64 * a).max(a);
                Distribution::from_weights(&probs)
            }
        }
    }

    /// Parses a CLI shape name; `seed` feeds the Dirichlet draw.
    pub fn from_name(name: &str, seed: u64) -> Result<Self> {
        match name {
            "uniform" => Ok(PShape::Uniform),
            "geometric" => Ok(PShape::Geometric(0.5)),
            "two-level" => Ok(PShape::TwoLevel(3.0)),
            "dirichlet" => Ok(PShape::Dirichlet(seed)),
            other => other.parse(),
        }
    }
}

impl fmt::Display for PShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PShape::Uniform => write!(f, "uniform"),
            PShape::Geometric(r) => write!(f, "geometric({r})"),
            PShape::TwoLevel(r) => write!(f, "two-level({r})"),
            PShape::Dirichlet(s) => write!(f, "dirichlet({s})"),
            PShape::MinMass(a) => write!(f, "min-mass({a})"),
        }
    }
}

impl FromStr for PShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::domain(format!("unknown p-shape `{s}`"));
        if s == "uniform" {
            return Ok(PShape::Uniform);
        }
        let (head, rest) = s.split_once('(').ok_or_else(bad)?;
        let arg = rest.strip_suffix(')').ok_or_else(bad)?;
        let real = || arg.parse::<f64>().map_err(|_| bad());
        match head {
            "geometric" => Ok(PShape::Geometric(real()?)),
            "two-level" => Ok(PShape::TwoLevel(real()?)),
            "dirichlet" => Ok(PShape::Dirichlet(arg.parse().map_err(|_| bad())?)),
            "min-mass" => Ok(PShape::MinMass(real()?)),
            _ => Err(bad()),
        }
    }
}

impl Serialize for PShape {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PShape {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The default eight shapes.
pub fn default_shapes() -> Vec<PShape> {
    let mut v = vec![PShape::Uniform, PShape::Geometric(0.5), PShape::TwoLevel(3.0)];
    v.extend((1..=5).map(PShape::Dirichlet));
    v
}

// ---------------------------------------------------------------------------
// Grid

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    /// Sample sizes checked against the exact law.
    pub n_values: Vec<u64>,
    /// Sample sizes checked by Monte Carlo.
    pub mc_n_values: Vec<u64>,
    pub k_values: Vec<usize>,
    /// Each α adds a min-mass(α) shape for every k with α ≤ 1/k.
    pub alpha_values: Vec<f64>,
    pub p_shapes: Vec<PShape>,
    /// Points of the uniform t-grid over [0, t_max].
    pub t_points: usize,
    /// Defaults to agrawal_delta_bound(k, 0.01) per k.
    pub t_max: Option<f64>,
    /// Also evaluate tails at every atom of the exact law.
    pub include_atom_points: bool,
    pub outcome_cap: u64,
    pub mc_samples: u64,
    pub seeds: Vec<u64>,
    pub f_n_max: u64,
    pub grad_n_max: u64,
    pub binary_n_max: u64,
    pub binary_p_values: Vec<f64>,
    pub g_half_n_cap: u64,
    pub g_tail_k_values: Vec<usize>,
    pub g_tail_n_cap: u64,
    pub chi2_n_per_k: u64,
    pub moment_max: u32,
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n_values: (1..=12).collect(),
            mc_n_values: vec![50, 200, 1000],
            k_values: vec![2, 3, 4],
            alpha_values: Vec::new(),
            p_shapes: default_shapes(),
            t_points: 21,
            t_max: None,
            include_atom_points: true,
            outcome_cap: 10_000_000,
            mc_samples: 20_000,
            seeds: vec![1],
            f_n_max: 500,
            grad_n_max: 2000,
            binary_n_max: 2000,
            binary_p_values: (1..=19).map(|i| f64::from(i) * 0.05).collect(),
            g_half_n_cap: 100_000_000,
            g_tail_k_values: vec![2, 3],
            g_tail_n_cap: 60_000,
            chi2_n_per_k: 10_000,
            moment_max: 10,
            threads: None,
        }
    }
}

/// One (k, distribution) pair of the grid.
#[derive(Debug, Clone)]
pub struct Instance {
    pub k: usize,
    pub label: String,
    pub p: Distribution,
    /// min_i p_i, the α the bounds are evaluated at.
    pub alpha: f64,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_values.is_empty()
            || self.k_values.is_empty()
            || self.p_shapes.is_empty() && self.alpha_values.is_empty()
        {
            return Err(Error::domain("grid needs n values, k values and at least one p-shape"));
        }
        if self.n_values.contains(&0) || self.mc_n_values.contains(&0) {
            return Err(Error::domain("grid sample sizes must be >= 1"));
        }
        if self.k_values.iter().any(|&k| k < 2) {
            return Err(Error::domain("grid alphabet sizes must be >= 2"));
        }
        if self.alpha_values.iter().any(|&a| !(a > 0.0 && a <= 0.5)) {
            return Err(Error::domain("grid alpha values must lie in (0, 1/2]"));
        }
        if self.t_points < 2 {
            return Err(Error::domain("t-grid needs at least two points"));
        }
        if self.seeds.is_empty() || self.mc_samples < 2 {
            return Err(Error::domain("Monte Carlo cells need a seed and at least two samples"));
        }
        Ok(())
    }

    /// Every (k, shape) pair, in grid order. Shapes that cannot be built for a
    /// k (min-mass above 1/k) are left out.
    pub fn instances(&self) -> Vec<Instance> {
        self.instances_for(&self.k_values)
    }

    pub fn instances_for(&self, ks: &[usize]) -> Vec<Instance> {
        let mut out = Vec::new();
        for &k in ks {
            let shapes = self
                .p_shapes
                .iter()
                .copied()
                .chain(self.alpha_values.iter().map(|&a| PShape::MinMass(a)));
            for shape in shapes {
                if let Ok(p) = shape.build(k) {
                    let alpha = p.alpha().min(1.0 / k as f64);
                    out.push(Instance {
                        k,
                        label: shape.to_string(),
                        p,
                        alpha,
                    });
                }
            }
        }
        out
    }

    fn t_grid(&self, k: usize, cfg: &ConstantsConfig) -> Vec<f64> {
        let top = self
            .t_max
            .unwrap_or_else(|| agrawal_delta_bound(k, 0.01, cfg).expect("valid k"));
        let last = (self.t_points - 1) as f64;
        (0..self.t_points).map(|j| top * j as f64 / last).collect()
    }

    fn run(&self, seed: u64) -> McRun {
        McRun {
            samples: self.mc_samples,
            seed,
            threads: self.threads,
        }
    }

    fn enumerable(&self, n: u64, k: usize) -> bool {
        support_size(n, k).is_some_and(|s| s <= u128::from(self.outcome_cap))
    }
}

// ---------------------------------------------------------------------------
// Reports

/// Coordinates of one check, enough to replay it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Cell {
    fn of(inst: &Instance, n: u64) -> Self {
        Cell {
            n: Some(n),
            k: Some(inst.k),
            p: Some(inst.label.clone()),
            alpha: Some(inst.alpha),
            ..Cell::default()
        }
    }

    fn t(mut self, t: f64) -> Self {
        self.t = Some(t);
        self
    }

    fn m(mut self, m: u32) -> Self {
        self.m = Some(m);
        self
    }

    fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    fn detail(mut self, d: impl Into<String>) -> Self {
        self.detail = Some(d.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub cell: Cell,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub property: String,
    pub passed: bool,
    pub cells_checked: u64,
    pub cells_skipped: u64,
    pub failure_count: u64,
    /// The first [`MAX_LISTED_FAILURES`] failures in grid order.
    pub failures: Vec<Failure>,
    /// min(rhs - lhs) over inequality checks.
    pub min_slack: Option<f64>,
    /// max |lhs - rhs| over identity checks.
    pub max_abs_error: Option<f64>,
    pub notes: Vec<String>,
}

#[derive(Debug, Default)]
struct Tally {
    checked: u64,
    skipped: u64,
    failure_count: u64,
    failures: Vec<Failure>,
    min_slack: Option<f64>,
    max_abs_error: Option<f64>,
}

impl Tally {
    fn fail(&mut self, cell: Cell, lhs: f64, rhs: f64, slack: f64) {
        self.failure_count += 1;
        if self.failures.len() < MAX_LISTED_FAILURES {
            self.failures.push(Failure { cell, lhs, rhs, slack });
        }
    }

    /// lhs ≤ rhs + tol.
    fn le(&mut self, cell: impl FnOnce() -> Cell, lhs: f64, rhs: f64, tol: f64) {
        self.checked += 1;
        let slack = rhs - lhs;
        if !slack.is_nan() {
            self.min_slack = Some(self.min_slack.map_or(slack, |s| s.min(slack)));
        }
        if !(slack >= -tol) {
            self.fail(cell(), lhs, rhs, slack);
        }
    }

    /// |lhs - rhs| ≤ tol.
    fn eq(&mut self, cell: impl FnOnce() -> Cell, lhs: f64, rhs: f64, tol: f64) {
        self.checked += 1;
        let err = (lhs - rhs).abs();
        if !err.is_nan() {
            self.max_abs_error = Some(self.max_abs_error.map_or(err, |e| e.max(err)));
        }
        if !(err <= tol) {
            self.fail(cell(), lhs, rhs, tol - err);
        }
    }

    fn skip(&mut self) {
        self.skipped += 1;
    }

    fn absorb(&mut self, other: Tally) {
        self.checked += other.checked;
        self.skipped += other.skipped;
        self.failure_count += other.failure_count;
        for f in other.failures {
            if self.failures.len() < MAX_LISTED_FAILURES {
                self.failures.push(f);
            }
        }
        self.min_slack = match (self.min_slack, other.min_slack) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        self.max_abs_error = match (self.max_abs_error, other.max_abs_error) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
    }

    fn report(self, property: &str, notes: Vec<String>) -> VerifyReport {
        VerifyReport {
            property: property.to_string(),
            passed: self.failure_count == 0,
            cells_checked: self.checked,
            cells_skipped: self.skipped,
            failure_count: self.failure_count,
            failures: self.failures,
            min_slack: self.min_slack,
            max_abs_error: self.max_abs_error,
            notes,
        }
    }
}

/// Runs `job` per item in parallel and merges the tallies in item order.
fn sweep<I: Sync, F>(items: &[I], job: F) -> Result<Tally>
where
    F: Fn(&I) -> Result<Tally> + Sync,
{
    let parts: Vec<Result<Tally>> = items.par_iter().map(&job).collect();
    let mut total = Tally::default();
    for part in parts {
        total.absorb(part?);
    }
    Ok(total)
}

fn in_pool<R: Send>(threads: Option<usize>, job: impl FnOnce() -> R + Send) -> Result<R> {
    match threads {
        None => Ok(job()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t.max(1))
                .build()
                .map_err(|e| Error::domain(format!("thread pool: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

// ---------------------------------------------------------------------------
// Property catalogue

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    ChainRule,
    BernsteinMean,
    FMonotoneAndBound,
    DiscGradient,
    SanovDominates,
    AgrawalDominates,
    MainMgfEnvelope,
    BinaryMgf,
    GHalfDf,
    GSubgaussianTail,
    BddDiffEnvelope,
    RawMomentGrowth,
    CenteringMaps,
    Chi2Limit,
}

impl Property {
    pub const ALL: [Property; 14] = [
        Property::ChainRule,
        Property::BernsteinMean,
        Property::FMonotoneAndBound,
        Property::DiscGradient,
        Property::SanovDominates,
        Property::AgrawalDominates,
        Property::MainMgfEnvelope,
        Property::BinaryMgf,
        Property::GHalfDf,
        Property::GSubgaussianTail,
        Property::BddDiffEnvelope,
        Property::RawMomentGrowth,
        Property::CenteringMaps,
        Property::Chi2Limit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Property::ChainRule => "chain_rule",
            Property::BernsteinMean => "bernstein_mean",
            Property::FMonotoneAndBound => "f_monotone_and_bound",
            Property::DiscGradient => "disc_gradient",
            Property::SanovDominates => "sanov_dominates",
            Property::AgrawalDominates => "agrawal_dominates",
            Property::MainMgfEnvelope => "main_mgf_envelope",
            Property::BinaryMgf => "binary_mgf",
            Property::GHalfDf => "g_half_df",
            Property::GSubgaussianTail => "g_subgaussian_tail",
            Property::BddDiffEnvelope => "bdd_diff_envelope",
            Property::RawMomentGrowth => "raw_moment_growth",
            Property::CenteringMaps => "centering_maps",
            Property::Chi2Limit => "chi2_limit",
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Property {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Property::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::domain(format!("unknown property `{s}`")))
    }
}

/// Checks one property over the grid.
pub fn verify(property: Property, grid: &GridSpec, cfg: &ConstantsConfig) -> Result<VerifyReport> {
    grid.validate()?;
    cfg.validate()?;
    in_pool(grid.threads, || run_property(property, grid, cfg))?
}

/// The whole catalogue, in catalogue order.
pub fn verify_all(grid: &GridSpec, cfg: &ConstantsConfig) -> Result<Vec<VerifyReport>> {
    Property::ALL.iter().map(|&p| verify(p, grid, cfg)).collect()
}

fn run_property(property: Property, grid: &GridSpec, cfg: &ConstantsConfig) -> Result<VerifyReport> {
    let name = property.name();
    let mut notes = Vec::new();
    let tally = match property {
        Property::ChainRule => chain_rule(grid)?,
        Property::BernsteinMean => bernstein_mean(grid)?,
        Property::FMonotoneAndBound => f_monotone_and_bound(grid)?,
        Property::DiscGradient => disc_gradient(grid)?,
        Property::SanovDominates => tail_domination(grid, cfg, TailBound::Sanov)?,
        Property::AgrawalDominates => tail_domination(grid, cfg, TailBound::Agrawal)?,
        Property::MainMgfEnvelope => {
            if cfg.cg_prime_defaulted {
                notes.push("Cg_prime and cg_prime default to Cg and cg".to_string());
            }
            exact_mgf_envelope(grid, cfg, Envelope::Main)?
        }
        Property::BinaryMgf => binary_mgf(grid)?,
        Property::GHalfDf => g_half_df(grid)?,
        Property::GSubgaussianTail => g_subgaussian_tail(grid)?,
        Property::BddDiffEnvelope => exact_mgf_envelope(grid, cfg, Envelope::BoundedDifferences)?,
        Property::RawMomentGrowth => raw_moment_growth(grid, cfg)?,
        Property::CenteringMaps => centering_maps()?,
        Property::Chi2Limit => {
            notes.push("the 0.05 tolerance is a harness policy, not a proved rate".to_string());
            chi2_limit(grid)?
        }
    };
    Ok(tally.report(name, notes))
}

/// (instance, n) pairs with an enumerable support, plus the skipped count.
fn exact_cells(grid: &GridSpec) -> (Vec<(Instance, u64)>, u64) {
    let mut cells = Vec::new();
    let mut skipped = 0;
    for inst in grid.instances() {
        for &n in &grid.n_values {
            if grid.enumerable(n, inst.k) {
                cells.push((inst.clone(), n));
            } else {
                skipped += 1;
            }
        }
    }
    (cells, skipped)
}

fn with_law<F>(grid: &GridSpec, check: F) -> Result<Tally>
where
    F: Fn(&Instance, u64, &ExactLaw) -> Result<Tally> + Sync,
{
    let (cells, skipped) = exact_cells(grid);
    let mut tally = sweep(&cells, |(inst, n)| {
        let law = enumerate_law(*n, &inst.p, u128::from(grid.outcome_cap))?;
        check(inst, *n, &law)
    })?;
    tally.skipped += skipped;
    Ok(tally)
}

fn chain_rule(grid: &GridSpec) -> Result<Tally> {
    let (cells, skipped) = exact_cells(grid);
    let mut tally = sweep(&cells, |(inst, n)| {
        let mut t = Tally::default();
        if inst.k < 3 {
            t.skip();
            return Ok(t);
        }
        for x in compositions(*n, inst.k) {
            let counts = Counts::new(x.clone())?;
            let z = z_statistic(&counts, &inst.p)?;
            let parts = chain_decompose(&counts, &inst.p)?;
            if !z.is_finite() {
                t.skip();
                continue;
            }
            t.eq(
                || Cell::of(inst, *n).detail(format!("counts={x:?}")),
                parts.total(),
                z,
                CHAIN_TOL * z.max(1.0),
            );
        }
        Ok(t)
    })?;
    tally.skipped += skipped;
    Ok(tally)
}

/// The chain-rule identity on `instances` random (counts, p) pairs with
/// k ∈ {3, …, 6}, n ∈ {1, …, 1000} and flat-Dirichlet p.
pub fn chain_rule_random(instances: usize, seed: u64) -> Result<VerifyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = Tally::default();
    for i in 0..instances {
        let k = rng.random_range(3..=6usize);
        let n = rng.random_range(1..=1000u64);
        let w: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let p = Distribution::from_weights(&w)?;
        let mut x = vec![0; k];
        draw_counts(&mut rng, n, p.probs(), &mut x);
        let counts = Counts::new(x.clone())?;
        let z = z_statistic(&counts, &p)?;
        let total = chain_decompose(&counts, &p)?.total();
        tally.eq(
            || Cell {
                n: Some(n),
                k: Some(k),
                seed: Some(seed),
                detail: Some(format!("instance={i} counts={x:?} p={:?}", p.probs())),
                ..Cell::default()
            },
            total,
            z,
            CHAIN_TOL * z.max(1.0),
        );
    }
    Ok(tally.report(
        Property::ChainRule.name(),
        vec![format!("{instances} random instances")],
    ))
}

fn bernstein_mean(grid: &GridSpec) -> Result<Tally> {
    let mut tally = with_law(grid, |inst, n, law| {
        let mut t = Tally::default();
        t.eq(|| Cell::of(inst, n), 2.0 * g_func(n, &inst.p), law.mean(), EXACT_TOL);
        Ok(t)
    })?;
    let mc_cells = mc_cells(grid);
    tally.absorb(sweep(&mc_cells, |(inst, n, seed)| {
        let mut t = Tally::default();
        let est = mc_moment(*n, &inst.p, 1, false, &grid.run(*seed))?;
        let target = 2.0 * g_func(*n, &inst.p);
        t.le(
            || Cell::of(inst, *n).seed(*seed).detail("monte carlo"),
            (est.estimate - target).abs(),
            MC_SIGMAS * est.std_error,
            0.0,
        );
        Ok(t)
    })?);
    Ok(tally)
}

fn mc_cells(grid: &GridSpec) -> Vec<(Instance, u64, u64)> {
    let mut out = Vec::new();
    for inst in grid.instances() {
        for &n in &grid.mc_n_values {
            for &seed in &grid.seeds {
                out.push((inst.clone(), n, seed));
            }
        }
    }
    out
}

/// f(1), …, f(last) for one instance.
fn f_values(inst: &Instance, last: u64) -> Vec<f64> {
    (1..=last).map(|n| g_func(n, &inst.p) / n as f64).collect()
}

fn f_monotone_and_bound(grid: &GridSpec) -> Result<Tally> {
    let instances = grid.instances();
    sweep(&instances, |inst| {
        let mut t = Tally::default();
        let f = f_values(inst, grid.f_n_max + 1);
        let df = (inst.k - 1) as f64;
        for n in 1..=grid.f_n_max {
            let fn_ = f[n as usize - 1];
            t.le(
                || Cell::of(inst, n).detail("f(n) <= (k-1)/n"),
                fn_,
                df / n as f64,
                EXACT_TOL,
            );
            t.le(
                || Cell::of(inst, n).detail("f(n+1) <= f(n)"),
                f[n as usize],
                fn_,
                EXACT_TOL,
            );
        }
        Ok(t)
    })
}

fn disc_gradient(grid: &GridSpec) -> Result<Tally> {
    let instances = grid.instances();
    sweep(&instances, |inst| {
        let mut t = Tally::default();
        if grid.grad_n_max < 4 {
            t.skip();
            return Ok(t);
        }
        let f = f_values(inst, grid.grad_n_max + 1);
        for n in 4..=grid.grad_n_max {
            let drop = f[n as usize - 1] - f[n as usize];
            t.le(|| Cell::of(inst, n).detail("f(n) - f(n+1) >= 0"), -drop, 0.0, EXACT_TOL);
            let bound = disc_grad_bound(n, inst.k)?;
            t.le(
                || Cell::of(inst, n).detail("f(n) - f(n+1) <= bound"),
                drop,
                bound,
                EXACT_TOL,
            );
        }
        Ok(t)
    })
}

#[derive(Clone, Copy, PartialEq)]
enum TailBound {
    Sanov,
    Agrawal,
}

impl TailBound {
    fn eval(self, n: u64, k: usize, t: f64) -> Result<Option<f64>> {
        match self {
            TailBound::Sanov => sanov_tail(n, k, t).map(Some),
            TailBound::Agrawal => agrawal_tail(k, t),
        }
    }
}

fn tail_domination(grid: &GridSpec, cfg: &ConstantsConfig, which: TailBound) -> Result<Tally> {
    let mut tally = with_law(grid, |inst, n, law| {
        let mut t = Tally::default();
        let mut points = grid.t_grid(inst.k, cfg);
        if grid.include_atom_points {
            points.extend(law.atoms().iter().map(|a| a.z));
        }
        for tt in points {
            match which.eval(n, inst.k, tt)? {
                Some(bound) => t.le(|| Cell::of(inst, n).t(tt), law.tail(tt), bound, TAIL_TOL),
                None => t.skip(),
            }
        }
        Ok(t)
    })?;
    let mc_cells = mc_cells(grid);
    tally.absorb(sweep(&mc_cells, |(inst, n, seed)| {
        let mut t = Tally::default();
        let z = sample_z(*n, &inst.p, &grid.run(*seed))?;
        let m = z.len() as f64;
        for tt in grid.t_grid(inst.k, cfg) {
            let Some(bound) = which.eval(*n, inst.k, tt)? else {
                t.skip();
                continue;
            };
            let ph = if tt <= 0.0 {
                1.0
            } else {
                z.iter().filter(|&&v| v >= tt).count() as f64 / m
            };
            let se = (ph * (1.0 - ph) / m).sqrt();
            t.le(
                || Cell::of(inst, *n).t(tt).seed(*seed).detail("monte carlo"),
                ph - MC_SIGMAS * se,
                bound,
                0.0,
            );
        }
        Ok(t)
    })?);
    Ok(tally)
}

#[derive(Clone, Copy, PartialEq)]
enum Envelope {
    Main,
    BoundedDifferences,
}

fn exact_mgf_envelope(grid: &GridSpec, cfg: &ConstantsConfig, which: Envelope) -> Result<Tally> {
    with_law(grid, |inst, n, law| {
        let mut t = Tally::default();
        let (v, ts): (f64, Vec<f64>) = match which {
            Envelope::Main => {
                let v = main_theorem_params(inst.k, inst.alpha, cfg)?.v;
                let edge = 1.0 / (2.0 * cfg.c_main);
                (v, (0..=20).map(|j| -edge + edge * f64::from(j) / 10.0).collect())
            }
            Envelope::BoundedDifferences => {
                let v = bdd_diff_variance(n, inst.alpha)?;
                let mags = [0.01, 0.03, 0.1, 0.3, 1.0, 3.0];
                (v, mags.iter().flat_map(|&m| [m, -m]).collect())
            }
        };
        for tt in ts {
            t.le(
                || Cell::of(inst, n).t(tt),
                law.log_mgf(tt, true),
                v * tt * tt,
                EXACT_TOL,
            );
        }
        Ok(t)
    })
}

/// E[exp(Z_{n,2,p}/4)] by exact summation over the binomial count.
pub fn binary_mgf_quarter(n: u64, p: f64) -> f64 {
    let q = 1.0 - p;
    let nf = n as f64;
    let logs: Vec<f64> = (0..=n)
        .map(|x| {
            let xf = x as f64;
            let y = nf - xf;
            let mut z = 0.0;
            if x > 0 {
                z += xf * (xf / (nf * p)).ln();
            }
            if y > 0.0 {
                z += y * (y / (nf * q)).ln();
            }
            log_binomial_pmf(x, n, p, q) + 0.5 * z.max(0.0)
        })
        .collect();
    log_sum_exp(&logs).exp()
}

fn binary_mgf(grid: &GridSpec) -> Result<Tally> {
    sweep(&grid.binary_p_values, |&p| {
        let mut t = Tally::default();
        if !(p > 0.0 && p < 1.0) {
            t.skip();
            return Ok(t);
        }
        for n in 1..=grid.binary_n_max {
            t.le(
                || Cell {
                    n: Some(n),
                    k: Some(2),
                    p: Some(format!("({p}, {})", 1.0 - p)),
                    ..Cell::default()
                },
                binary_mgf_quarter(n, p),
                2.0,
                EXACT_TOL,
            );
        }
        Ok(t)
    })
}

fn g_half_df(grid: &GridSpec) -> Result<Tally> {
    let instances = grid.instances();
    sweep(&instances, |inst| {
        let mut t = Tally::default();
        let n0 = g_half_df_threshold(inst.k, inst.alpha)?;
        let half = (inst.k - 1) as f64 / 2.0;
        for n in [n0, 2 * n0, 4 * n0] {
            if n > grid.g_half_n_cap {
                t.skip();
                continue;
            }
            let g = g_func(n, &inst.p);
            t.le(|| Cell::of(inst, n), (g - half).abs(), 1.0, EXACT_TOL);
        }
        Ok(t)
    })
}

/// P(|g(Y) - (k-1)/2| > t) for Y ~ Bin(n, r), by exact summation over Y.
/// Returns the tail at each requested t.
pub fn g_binomial_tails(p: &Distribution, n: u64, r: f64, ts: &[f64]) -> Vec<f64> {
    let half = (p.k() - 1) as f64 / 2.0;
    let q = 1.0 - r;
    let mode = (((n + 1) as f64) * r).floor().min(n as f64) as u64;
    // Y outside the window carries well under 1e-15 of the mass; it is
    // charged to every tail instead of being evaluated.
    let cut = log_binomial_pmf(mode, n, r, q) - 46.0;
    let mut mass_dev: Vec<(f64, f64)> = Vec::new();
    let mut visit = |y: u64| -> bool {
        let lp = log_binomial_pmf(y, n, r, q);
        if lp < cut {
            return false;
        }
        let g = if y == 0 { 0.0 } else { g_func(y, p) };
        mass_dev.push((lp.exp(), (g - half).abs()));
        true
    };
    let mut y = mode;
    while visit(y) && y > 0 {
        y -= 1;
    }
    let mut y = mode + 1;
    while y <= n && visit(y) {
        y += 1;
    }
    let all: Vec<f64> = mass_dev.iter().map(|&(m, _)| m).collect();
    let omitted = (1.0 - crate::special::pairwise_sum(&all)).max(0.0);
    mass_dev.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)));
    ts.iter()
        .map(|&t| {
            let start = mass_dev.partition_point(|&(_, d)| d <= t);
            let masses: Vec<f64> = mass_dev[start..].iter().map(|&(m, _)| m).collect();
            (crate::special::pairwise_sum(&masses) + omitted).min(1.0)
        })
        .collect()
}

fn g_subgaussian_tail(grid: &GridSpec) -> Result<Tally> {
    let instances = grid.instances_for(&grid.g_tail_k_values);
    let mut jobs = Vec::new();
    let mut skipped = 0;
    for inst in instances {
        let n = range_thresholds(inst.k, inst.alpha)?.r3_lemma.ceil() as u64;
        if n > grid.g_tail_n_cap {
            skipped += 1;
            continue;
        }
        let k = inst.k as f64;
        for r in [1.0 - 1.0 / k, 1.0 - 1.0 / (2.0 * k), 1.0] {
            jobs.push((inst.clone(), n, r));
        }
    }
    let mut tally = sweep(&jobs, |(inst, n, r)| {
        let mut t = Tally::default();
        let k = inst.k as f64;
        let ts: Vec<f64> = (1..=10).map(|j| f64::from(j) * (k + 1.0) / 10.0).collect();
        let tails = g_binomial_tails(&inst.p, *n, *r, &ts);
        for (&tt, &tail) in ts.iter().zip(&tails) {
            t.le(
                || Cell::of(inst, *n).t(tt).detail(format!("Y ~ Bin(n, {r})")),
                tail,
                2.0 * (-tt * tt / 4.0).exp(),
                EXACT_TOL,
            );
        }
        Ok(t)
    })?;
    tally.skipped += skipped;
    Ok(tally)
}

fn raw_moment_growth(grid: &GridSpec, cfg: &ConstantsConfig) -> Result<Tally> {
    with_law(grid, |inst, n, law| {
        let mut t = Tally::default();
        for m in 1..=grid.moment_max {
            let norm = law.moment(m, false).powf(1.0 / f64::from(m));
            let bound = raw_moment_bound(inst.k, m, cfg.C_agrawal_delta)?;
            t.le(|| Cell::of(inst, n).m(m), norm, bound, EXACT_TOL);
        }
        Ok(t)
    })
}

/// A two-point law: `x.0` with probability `w`, `x.1` otherwise.
struct TwoPoint {
    x: (f64, f64),
    w: f64,
}

impl TwoPoint {
    fn bound(&self) -> f64 {
        self.x.0.abs().max(self.x.1.abs())
    }

    fn even_moment(&self, q: u32) -> f64 {
        let e = 2 * q as i32;
        self.w * self.x.0.powi(e) + (1.0 - self.w) * self.x.1.powi(e)
    }

    fn abs_tail(&self, s: f64) -> f64 {
        let mut p = 0.0;
        if self.x.0.abs() > s {
            p += self.w;
        }
        if self.x.1.abs() > s {
            p += 1.0 - self.w;
        }
        p
    }

    fn centered_log_mgf(&self, t: f64) -> f64 {
        let mean = self.w * self.x.0 + (1.0 - self.w) * self.x.1;
        log_sum_exp(&[
            self.w.ln() + t * (self.x.0 - mean),
            (1.0 - self.w).ln() + t * (self.x.1 - mean),
        ])
    }

    fn label(&self) -> String {
        format!("x={:?} w={}", self.x, self.w)
    }
}

fn envelope_points(params: &SubGammaParams, scale: f64) -> Vec<f64> {
    let mut mags: Vec<f64> = [0.01, 0.1, 0.5, 1.0, 2.0, 5.0].iter().map(|m| m / scale).collect();
    if params.c > 0.0 {
        mags.retain(|&m| params.c * m < 1.0);
        mags.extend([0.5 / params.c, 0.9 / params.c, 0.99 / params.c]);
    }
    mags.iter().flat_map(|&m| [m, -m]).collect()
}

fn centering_maps() -> Result<Tally> {
    let mut t = Tally::default();
    let supports = [(-1.0, 1.0), (0.0, 1.0), (-2.0, 0.5), (0.0, 5.0)];
    let weights = [0.1, 0.3, 0.5, 0.9];
    for &x in &supports {
        for &w in &weights {
            let law = TwoPoint { x, w };
            let b = law.bound();
            // Moment hypothesis: E X^{2q} ≤ q! A^q + (2q)! B^{2q} for all q.
            for (a, bb) in [(b * b, 0.0), (0.0, b), (b * b / 2.0, b / 2.0)] {
                let holds = (1..=40u32).all(|q| {
                    let qf = f64::from(q);
                    let rhs_a = if a > 0.0 {
                        (ln_gamma(qf + 1.0) + qf * a.ln()).exp()
                    } else {
                        0.0
                    };
                    let rhs_b = if bb > 0.0 {
                        (ln_gamma(2.0 * qf + 1.0) + 2.0 * qf * bb.ln()).exp()
                    } else {
                        0.0
                    };
                    law.even_moment(q) <= (rhs_a + rhs_b) * (1.0 + 1e-12)
                });
                if !holds {
                    t.skip();
                    continue;
                }
                let params = center_from_moments(a, bb)?;
                check_envelope(&mut t, &law, &params, format!("moments A={a} B={bb}"));
            }
            // Tail hypothesis: P(|X| > √(A s) + B s) ≤ 2e^{-s} for all s ≥ 0.
            let l2 = std::f64::consts::LN_2;
            for (a, bb) in [(b * b / l2, 0.0), (0.0, b / l2)] {
                let holds = (0..=400).all(|j| {
                    let s = f64::from(j) * 0.025;
                    law.abs_tail((a * s).sqrt() + bb * s) <= 2.0 * (-s).exp()
                });
                if !holds {
                    t.skip();
                    continue;
                }
                let params = center_from_tails(a, bb)?;
                check_envelope(&mut t, &law, &params, format!("tails A={a} B={bb}"));
            }
        }
    }
    Ok(t)
}

fn check_envelope(t: &mut Tally, law: &TwoPoint, params: &SubGammaParams, how: String) {
    for s in envelope_points(params, law.bound()) {
        let Some(env) = params.log_mgf_envelope(s) else {
            t.skip();
            continue;
        };
        t.le(
            || Cell {
                t: Some(s),
                detail: Some(format!("{} {how}", law.label())),
                ..Cell::default()
            },
            law.centered_log_mgf(s),
            env,
            EXACT_TOL,
        );
    }
}

fn chi2_limit(grid: &GridSpec) -> Result<Tally> {
    let mut t = Tally::default();
    for &k in &grid.k_values {
        let n = grid.chi2_n_per_k * k as u64;
        let p = Distribution::<f64>::uniform(k)?;
        let lhs = (2.0 * g_func(n, &p) - (k - 1) as f64).abs();
        t.le(
            || Cell {
                n: Some(n),
                k: Some(k),
                p: Some("uniform".into()),
                ..Cell::default()
            },
            lhs,
            0.05,
            0.0,
        );
    }
    Ok(t)
}

// ---------------------------------------------------------------------------
// Text output

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.3e}"))
}

/// Fixed-width summary, one row per report.
pub fn render_table(reports: &[VerifyReport]) -> String {
    let mut out = format!(
        "{:<22} {:<6} {:>9} {:>8} {:>8} {:>11} {:>11}\n",
        "property", "status", "checked", "skipped", "failed", "min slack", "max |err|"
    );
    for r in reports {
        out.push_str(&format!(
            "{:<22} {:<6} {:>9} {:>8} {:>8} {:>11} {:>11}\n",
            r.property,
            if r.passed { "PASS" } else { "FAIL" },
            r.cells_checked,
            r.cells_skipped,
            r.failure_count,
            fmt_opt(r.min_slack),
            fmt_opt(r.max_abs_error),
        ));
        for f in r.failures.iter().take(5) {
            out.push_str(&format!(
                "    at {}: lhs {:.6e} rhs {:.6e}\n",
                serde_json::to_string(&f.cell).unwrap_or_default(),
                f.lhs,
                f.rhs
            ));
        }
    }
    out
}
