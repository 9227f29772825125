//! Synthetic data generators and the seeded Monte Carlo experiment runner.
//!
//! Instances plant a shared column space and row space, build each source
//! matrix from one of four similarity types (both sides informative, left
//! only, right only, neither), and sample uniform noisy entry observations.
//! The runner replays a scenario across seeded replications, runs the
//! requested estimators, and aggregates relative completion errors.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::completion::{
    crude_complete, debiased_estimate, CrudeSolverConfig, DebiasedMatrix, Observation,
    ObservationSet,
};
use crate::error::{Error, Result};
use crate::linalg::{orthonormalize, top_eigvecs_sym, Subspace};
use crate::seed::child_seed;
use crate::subspace::SelectionConfig;
use crate::transfer::{nora_transfer, oracle_transfer, GateConfig};

/// Fold count used by the experiment runner when debiasing sources.
pub const DEFAULT_FOLDS: usize = 5;

/// Which similarity type the target matrix is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    /// Target from type (i): both planted representations are useful.
    A,
    /// Target from type (ii): only the column representation is useful.
    B,
    /// Target from type (iv): no planted representation is useful.
    C,
}

/// How one source's singular subspaces relate to the planted spans.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SourceType {
    /// Both sides near the planted spans.
    #[serde(rename = "i")]
    TypeI,
    /// Left side near the planted span, right side Haar-random.
    #[serde(rename = "ii")]
    TypeII,
    /// Left side Haar-random, right side near the planted span.
    #[serde(rename = "iii")]
    TypeIII,
    /// Both sides Haar-random.
    #[serde(rename = "iv")]
    TypeIV,
}

/// Fractions of sources drawn from each similarity type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceMix {
    pub type_i: f64,
    pub type_ii: f64,
    pub type_iii: f64,
    pub type_iv: f64,
}

impl Default for SourceMix {
    fn default() -> Self {
        Self { type_i: 0.5, type_ii: 1.0 / 6.0, type_iii: 1.0 / 6.0, type_iv: 1.0 / 6.0 }
    }
}

impl SourceMix {
    /// Integer counts per type: non-type-i counts are floored, the remainder
    /// goes to type i.
    pub fn counts(&self, k: usize) -> [usize; 4] {
        let c2 = (k as f64 * self.type_ii).floor() as usize;
        let c3 = (k as f64 * self.type_iii).floor() as usize;
        let c4 = (k as f64 * self.type_iv).floor() as usize;
        [k - c2 - c3 - c4, c2, c3, c4]
    }
}

fn default_p() -> usize {
    100
}
fn default_cut() -> usize {
    5
}
fn default_r() -> usize {
    3
}
fn default_h() -> f64 {
    0.1
}
fn default_k() -> usize {
    24
}
fn default_n() -> usize {
    2500
}
fn default_sigma() -> f64 {
    1.0
}

/// Full description of one synthetic scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    #[serde(default = "default_p")]
    pub p: usize,
    #[serde(default = "default_p")]
    pub q: usize,
    /// Planted column-space dimension.
    #[serde(default = "default_cut")]
    pub p0: usize,
    /// Planted row-space dimension.
    #[serde(default = "default_cut")]
    pub q0: usize,
    /// Common rank of every generated matrix.
    #[serde(default = "default_r")]
    pub r: usize,
    /// Scale of the symmetric perturbation applied to planted projectors.
    #[serde(default = "default_h")]
    pub h: f64,
    /// Number of sources.
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_n")]
    pub n_target: usize,
    #[serde(default = "default_n")]
    pub n_source: usize,
    /// Noise scale; observation noise is `(pq)^{-1/2} * sigma * N(0,1)`.
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    pub scenario: Scenario,
    #[serde(default)]
    pub source_mix: SourceMix,
    #[serde(default)]
    pub seed: u64,
}

impl GeneratorConfig {
    /// The paper-style defaults for a given scenario.
    pub fn scenario_default(scenario: Scenario) -> Self {
        Self {
            p: default_p(),
            q: default_p(),
            p0: default_cut(),
            q0: default_cut(),
            r: default_r(),
            h: default_h(),
            k: default_k(),
            n_target: default_n(),
            n_source: default_n(),
            sigma: default_sigma(),
            scenario,
            source_mix: SourceMix::default(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 2 || self.q < 2 {
            return Err(Error::InvalidInput("p and q must be >= 2".into()));
        }
        if self.p0 == 0 || self.p0 > self.p || self.q0 == 0 || self.q0 > self.q {
            return Err(Error::InvalidInput("cut dimensions must lie in [1, p] and [1, q]".into()));
        }
        if self.r == 0 || self.r > self.p0.min(self.q0) {
            return Err(Error::InvalidInput(format!(
                "rank {} out of range 1..=min(p0, q0) = {}",
                self.r,
                self.p0.min(self.q0)
            )));
        }
        if !(self.h >= 0.0 && self.h.is_finite()) {
            return Err(Error::InvalidInput("h must be finite and >= 0".into()));
        }
        if self.k == 0 {
            return Err(Error::InvalidInput("at least one source is required (k >= 1)".into()));
        }
        if self.n_target == 0 || self.n_source == 0 {
            return Err(Error::InvalidInput("sample sizes must be >= 1".into()));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidInput("sigma must be finite and >= 0".into()));
        }
        let m = &self.source_mix;
        let parts = [m.type_i, m.type_ii, m.type_iii, m.type_iv];
        if parts.iter().any(|f| !(*f >= 0.0)) {
            return Err(Error::InvalidInput("source mix fractions must be >= 0".into()));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "source mix fractions sum to {sum}, expected 1"
            )));
        }
        Ok(())
    }
}

/// One generated problem instance with its ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticInstance {
    pub truth_target: DMatrix<f64>,
    pub truth_sources: Vec<DMatrix<f64>>,
    pub obs_target: ObservationSet,
    pub obs_sources: Vec<ObservationSet>,
    pub planted_u: Subspace,
    pub planted_v: Subspace,
    pub source_types: Vec<SourceType>,
}

/// Symmetric Gaussian-ensemble matrix: off-diagonal entries `N(0, 1/(2 dim))`,
/// diagonal entries `N(0, 1/dim)`.
pub fn sample_goe(dim: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    goe_with_rng(dim, &mut rng)
}

pub fn goe_with_rng<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DMatrix<f64> {
    let off_sd = (1.0 / (2.0 * dim as f64)).sqrt();
    let diag_sd = (1.0 / dim as f64).sqrt();
    let mut m = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in i..dim {
            let z: f64 = rng.sample(StandardNormal);
            let value = if i == j { diag_sd * z } else { off_sd * z };
            m[(i, j)] = value;
            m[(j, i)] = value;
        }
    }
    m
}

/// Haar-uniform subspace: the orthonormalized column span of a standard
/// Gaussian matrix.
pub fn sample_haar_subspace(ambient: usize, dim: usize, seed: u64) -> Subspace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    haar_subspace_with_rng(ambient, dim, &mut rng)
}

pub fn haar_subspace_with_rng<R: Rng + ?Sized>(ambient: usize, dim: usize, rng: &mut R) -> Subspace {
    assert!(dim >= 1 && dim <= ambient, "haar subspace requires 1 <= dim <= ambient");
    // A Gaussian matrix is rank-deficient with probability zero; retry on the
    // measure-zero event instead of failing.
    loop {
        let g = DMatrix::from_fn(ambient, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        if let Ok(s) = orthonormalize(&g) {
            return s;
        }
    }
}

/// Uniform-with-replacement entry observations of `theta` with noise scale
/// `(pq)^{-1/2} * sigma`.
pub fn sample_observations(theta: &DMatrix<f64>, n: usize, sigma: f64, seed: u64) -> Result<ObservationSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    observations_with_rng(theta, n, sigma, &mut rng)
}

fn observations_with_rng<R: Rng + ?Sized>(
    theta: &DMatrix<f64>,
    n: usize,
    sigma: f64,
    rng: &mut R,
) -> Result<ObservationSet> {
    let (p, q) = theta.shape();
    let noise_scale = sigma / ((p * q) as f64).sqrt();
    let samples = (0..n)
        .map(|_| {
            let a = rng.random_range(0..p);
            let b = rng.random_range(0..q);
            let z: f64 = rng.sample(StandardNormal);
            Observation { a, b, y: theta[(a, b)] + noise_scale * z }
        })
        .collect();
    ObservationSet::new(p, q, samples)
}

/// Draws one factor-side basis for a source of the given informativeness.
fn side_basis<R: Rng + ?Sized>(
    informative: bool,
    planted: &Subspace,
    h: f64,
    r: usize,
    rng: &mut R,
) -> Result<Subspace> {
    let ambient = planted.ambient_dim();
    if informative {
        let perturbed = planted.projector().matrix() + goe_with_rng(ambient, rng) * h;
        top_eigvecs_sym(&perturbed, r)
    } else {
        Ok(haar_subspace_with_rng(ambient, r, rng))
    }
}

fn informative_sides(t: SourceType) -> (bool, bool) {
    match t {
        SourceType::TypeI => (true, true),
        SourceType::TypeII => (true, false),
        SourceType::TypeIII => (false, true),
        SourceType::TypeIV => (false, false),
    }
}

fn draw_matrix<R: Rng + ?Sized>(
    t: SourceType,
    planted_u: &Subspace,
    planted_v: &Subspace,
    h: f64,
    r: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let (left_inf, right_inf) = informative_sides(t);
    let u = side_basis(left_inf, planted_u, h, r, rng)?;
    let v = side_basis(right_inf, planted_v, h, r, rng)?;
    let spectrum = Uniform::new(1.0, 2.0).expect("valid uniform range");
    let mut lambda = DMatrix::zeros(r, r);
    for i in 0..r {
        lambda[(i, i)] = spectrum.sample(rng);
    }
    Ok(u.basis() * lambda * v.basis().transpose())
}

/// Generates a full synthetic instance: planted spans, target and source
/// matrices by type, and uniform noisy observations of each.
///
/// Draw order is fixed (planted spans, target matrix, source matrices in
/// order, then observations target-first), so instances are reproducible
/// from the seed alone.
pub fn generate_instance(cfg: &GeneratorConfig) -> Result<SyntheticInstance> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let planted_u = haar_subspace_with_rng(cfg.p, cfg.p0, &mut rng);
    let planted_v = haar_subspace_with_rng(cfg.q, cfg.q0, &mut rng);

    let target_type = match cfg.scenario {
        Scenario::A => SourceType::TypeI,
        Scenario::B => SourceType::TypeII,
        Scenario::C => SourceType::TypeIV,
    };
    let truth_target = draw_matrix(target_type, &planted_u, &planted_v, cfg.h, cfg.r, &mut rng)?;

    let counts = cfg.source_mix.counts(cfg.k);
    let mut source_types = Vec::with_capacity(cfg.k);
    for (t, &c) in [SourceType::TypeI, SourceType::TypeII, SourceType::TypeIII, SourceType::TypeIV]
        .iter()
        .zip(counts.iter())
    {
        source_types.extend(std::iter::repeat(*t).take(c));
    }
    let truth_sources: Vec<DMatrix<f64>> = source_types
        .iter()
        .map(|&t| draw_matrix(t, &planted_u, &planted_v, cfg.h, cfg.r, &mut rng))
        .collect::<Result<_>>()?;

    let obs_target = observations_with_rng(&truth_target, cfg.n_target, cfg.sigma, &mut rng)?;
    let obs_sources: Vec<ObservationSet> = truth_sources
        .iter()
        .map(|t| observations_with_rng(t, cfg.n_source, cfg.sigma, &mut rng))
        .collect::<Result<_>>()?;

    Ok(SyntheticInstance {
        truth_target,
        truth_sources,
        obs_target,
        obs_sources,
        planted_u,
        planted_v,
        source_types,
    })
}

/// Squared relative Frobenius error `|est - truth|_F^2 / |truth|_F^2`.
pub fn relative_error(estimate: &DMatrix<f64>, truth: &DMatrix<f64>) -> f64 {
    (estimate - truth).norm_squared() / truth.norm_squared()
}

/// Completion using the target samples only.
pub fn baseline_target_only(target: &ObservationSet, cfg: &CrudeSolverConfig) -> Result<DMatrix<f64>> {
    crude_complete(target, cfg)
}

/// Two-step baseline: crude completion on the pooled samples (target plus
/// all sources), then a crude fit of the contrast on the target residuals.
pub fn baseline_pooled_two_step(
    target: &ObservationSet,
    sources: &[ObservationSet],
    cfg: &CrudeSolverConfig,
) -> Result<DMatrix<f64>> {
    for (k, s) in sources.iter().enumerate() {
        if s.p() != target.p() || s.q() != target.q() {
            return Err(Error::DimensionMismatch(format!(
                "source {k} is {}x{} but the target is {}x{}",
                s.p(),
                s.q(),
                target.p(),
                target.q()
            )));
        }
    }
    let mut pooled = target.samples().to_vec();
    for s in sources {
        pooled.extend_from_slice(s.samples());
    }
    let pooled = ObservationSet::new(target.p(), target.q(), pooled)?;
    let pool_fit = crude_complete(&pooled, cfg)?;

    let contrast_samples: Vec<Observation> = target
        .samples()
        .iter()
        .map(|s| Observation { a: s.a, b: s.b, y: s.y - pool_fit[(s.a, s.b)] })
        .collect();
    let contrast = ObservationSet::new(target.p(), target.q(), contrast_samples)?;
    let delta = crude_complete(&contrast, cfg)?;
    Ok(pool_fit + delta)
}

/// Estimators the experiment runner can compare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    TargetOnly,
    PooledTwoStep,
    OracleTransfer,
    NoraTransfer,
}

impl Method {
    pub const ALL: [Method; 4] =
        [Method::TargetOnly, Method::PooledTwoStep, Method::OracleTransfer, Method::NoraTransfer];

    pub fn label(&self) -> &'static str {
        match self {
            Method::TargetOnly => "target-only",
            Method::PooledTwoStep => "pooled-two-step",
            Method::OracleTransfer => "oracle-transfer",
            Method::NoraTransfer => "nora-transfer",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .iter()
            .find(|m| m.label() == s)
            .copied()
            .ok_or_else(|| Error::InvalidInput(format!("unknown method label: {s}")))
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Per-method aggregate over replications.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    /// Relative error per replication; `None` marks a failed replication.
    pub per_rep: Vec<Option<f64>>,
    pub mean: Option<f64>,
    pub std_error: Option<f64>,
    pub failed: usize,
}

/// A replication that did not produce an estimate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RepFailure {
    pub rep: usize,
    /// `None` when instance generation or source debiasing failed, so every
    /// method was skipped.
    pub method: Option<Method>,
    pub message: String,
}

/// Full result of a Monte Carlo comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: GeneratorConfig,
    pub reps: usize,
    pub base_seed: u64,
    pub rep_seeds: Vec<u64>,
    pub methods: Vec<MethodSummary>,
    pub failures: Vec<RepFailure>,
}

fn mean_and_se(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let m = values.iter().sum::<f64>() / values.len() as f64;
    if values.len() < 2 {
        return (Some(m), None);
    }
    let var = values.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (values.len() - 1) as f64;
    (Some(m), Some((var / values.len() as f64).sqrt()))
}

type RepOutcome = Vec<(Method, std::result::Result<f64, String>)>;

fn run_one_rep(cfg: &GeneratorConfig, methods: &[Method], rep_seed: u64) -> RepOutcome {
    let mut inst_cfg = cfg.clone();
    inst_cfg.seed = child_seed(rep_seed, 0);
    let instance = match generate_instance(&inst_cfg) {
        Ok(i) => i,
        Err(e) => {
            let msg = format!("instance generation failed: {e}");
            return methods.iter().map(|&m| (m, Err(msg.clone()))).collect();
        }
    };
    let crude_cfg = CrudeSolverConfig::new(cfg.r);

    let needs_debiased =
        methods.iter().any(|m| matches!(m, Method::OracleTransfer | Method::NoraTransfer));
    let debiased: std::result::Result<Vec<DebiasedMatrix>, String> = if needs_debiased {
        let per_source: Vec<Result<DebiasedMatrix>> = instance
            .obs_sources
            .par_iter()
            .enumerate()
            .map(|(k, obs)| {
                debiased_estimate(
                    obs,
                    &crude_cfg,
                    DEFAULT_FOLDS,
                    child_seed(rep_seed, 1 + k as u64),
                    format!("source-{}", k + 1),
                )
            })
            .collect();
        per_source
            .into_iter()
            .collect::<Result<Vec<_>>>()
            .map_err(|e| format!("source debiasing failed: {e}"))
    } else {
        Ok(Vec::new())
    };

    methods
        .iter()
        .map(|&m| {
            let estimate: std::result::Result<DMatrix<f64>, String> = match m {
                Method::TargetOnly => {
                    baseline_target_only(&instance.obs_target, &crude_cfg).map_err(|e| e.to_string())
                }
                Method::PooledTwoStep => {
                    baseline_pooled_two_step(&instance.obs_target, &instance.obs_sources, &crude_cfg)
                        .map_err(|e| e.to_string())
                }
                Method::OracleTransfer => debiased.clone().and_then(|d| {
                    oracle_transfer(&instance.obs_target, &d, cfg.p0, cfg.q0)
                        .map(|model| model.theta_hat)
                        .map_err(|e| e.to_string())
                }),
                Method::NoraTransfer => debiased.clone().and_then(|d| {
                    nora_transfer(
                        &instance.obs_target,
                        &d,
                        cfg.p0,
                        cfg.q0,
                        &SelectionConfig::default(),
                        &SelectionConfig::default(),
                        &GateConfig::new(cfg.r),
                        &crude_cfg,
                        child_seed(rep_seed, 1000),
                    )
                    .map(|model| model.theta_hat)
                    .map_err(|e| e.to_string())
                }),
            };
            (m, estimate.map(|est| relative_error(&est, &instance.truth_target)))
        })
        .collect()
}

/// Runs `reps` seeded replications of the scenario and aggregates the
/// relative error of each requested method.
///
/// Replications use child seeds of `base_seed` and may execute concurrently;
/// the aggregate is identical to a sequential run. Failed replications are
/// recorded in `failures` and excluded from the means.
pub fn run_experiment(
    cfg: &GeneratorConfig,
    methods: &[Method],
    reps: usize,
    base_seed: u64,
) -> Result<ExperimentResult> {
    cfg.validate()?;
    if reps == 0 {
        return Err(Error::InvalidInput("reps must be >= 1".into()));
    }
    if methods.is_empty() {
        return Err(Error::InvalidInput("no methods requested".into()));
    }
    let mut unique: Vec<Method> = Vec::new();
    for &m in methods {
        if !unique.contains(&m) {
            unique.push(m);
        }
    }

    let rep_seeds: Vec<u64> = (0..reps).map(|r| child_seed(base_seed, r as u64)).collect();
    let outcomes: Vec<RepOutcome> = rep_seeds
        .par_iter()
        .map(|&rep_seed| run_one_rep(cfg, &unique, rep_seed))
        .collect();

    let mut failures = Vec::new();
    let mut summaries = Vec::with_capacity(unique.len());
    for (mi, &m) in unique.iter().enumerate() {
        let mut per_rep = Vec::with_capacity(reps);
        for (rep, outcome) in outcomes.iter().enumerate() {
            match &outcome[mi].1 {
                Ok(err) => per_rep.push(Some(*err)),
                Err(msg) => {
                    per_rep.push(None);
                    failures.push(RepFailure { rep, method: Some(m), message: msg.clone() });
                }
            }
        }
        let ok: Vec<f64> = per_rep.iter().flatten().copied().collect();
        let (mean, std_error) = mean_and_se(&ok);
        summaries.push(MethodSummary {
            method: m,
            failed: reps - ok.len(),
            per_rep,
            mean,
            std_error,
        });
    }

    Ok(ExperimentResult {
        config: cfg.clone(),
        reps,
        base_seed,
        rep_seeds,
        methods: summaries,
        failures,
    })
}
