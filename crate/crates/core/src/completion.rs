//! Observation data model, crude low-rank completion, and J-fold debiasing.
//!
//! Entries of a `p x q` matrix are observed as i.i.d. uniform samples with
//! replacement, `y = Theta[a, b] + (pq)^{-1/2} * noise`. The crude solver is a
//! balanced factorized gradient descent started from a spectral
//! initialization; [`debiased_estimate`] wraps it in J-fold sample splitting
//! with a one-step correction per fold, producing an unbiased dense estimate
//! whose singular subspaces can be aggregated across sources.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::thin_svd;

/// One sampled entry: 0-based indices and the noisy response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub a: usize,
    pub b: usize,
    pub y: f64,
}

/// Sparse uniform samples of one `p x q` matrix. Duplicate cells are
/// permitted and kept as distinct samples (sampling is with replacement).
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    p: usize,
    q: usize,
    samples: Vec<Observation>,
}

impl ObservationSet {
    pub fn new(p: usize, q: usize, samples: Vec<Observation>) -> Result<Self> {
        if p == 0 || q == 0 {
            return Err(Error::InvalidInput("matrix dimensions must be positive".into()));
        }
        for (i, s) in samples.iter().enumerate() {
            if s.a >= p || s.b >= q {
                return Err(Error::InvalidInput(format!(
                    "sample {i} indexes cell ({}, {}) outside a {p}x{q} matrix",
                    s.a, s.b
                )));
            }
            if !s.y.is_finite() {
                return Err(Error::InvalidInput(format!("sample {i} has non-finite response")));
            }
        }
        Ok(Self { p, q, samples })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn n(&self) -> usize {
        self.samples.len()
    }

    pub fn samples(&self) -> &[Observation] {
        &self.samples
    }

    /// Sum of squared responses, used for residual summaries.
    pub fn response_sum_sq(&self) -> f64 {
        self.samples.iter().map(|s| s.y * s.y).sum()
    }
}

/// Step-size policy for the crude solver. Serializes as the string `"auto"`
/// or a plain number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    /// `0.25 / lambda_1(M_hat)` where `M_hat` is the spectral-init fill-in.
    Auto,
    Fixed(f64),
}

impl serde::Serialize for StepSize {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            StepSize::Auto => serializer.serialize_str("auto"),
            StepSize::Fixed(v) => serializer.serialize_f64(*v),
        }
    }
}

impl<'de> serde::Deserialize<'de> for StepSize {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct Visitor;
        impl serde::de::Visitor<'_> for Visitor {
            type Value = StepSize;

            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("the string \"auto\" or a positive number")
            }

            fn visit_str<E: serde::de::Error>(self, s: &str) -> std::result::Result<StepSize, E> {
                if s == "auto" {
                    Ok(StepSize::Auto)
                } else {
                    Err(E::custom(format!("unknown step size {s:?}, expected \"auto\" or a number")))
                }
            }

            fn visit_f64<E: serde::de::Error>(self, v: f64) -> std::result::Result<StepSize, E> {
                Ok(StepSize::Fixed(v))
            }

            fn visit_u64<E: serde::de::Error>(self, v: u64) -> std::result::Result<StepSize, E> {
                Ok(StepSize::Fixed(v as f64))
            }

            fn visit_i64<E: serde::de::Error>(self, v: i64) -> std::result::Result<StepSize, E> {
                Ok(StepSize::Fixed(v as f64))
            }
        }
        deserializer.deserialize_any(Visitor)
    }
}

/// Configuration of the factorized gradient-descent completion solver.
#[derive(Debug, Clone, PartialEq)]
pub struct CrudeSolverConfig {
    /// Working rank of the factorization.
    pub rank: usize,
    pub max_iters: usize,
    pub step_size: StepSize,
    /// Stop once the relative loss decrease of an accepted step falls below
    /// this threshold.
    pub rel_tol: f64,
    /// Weight of the `|A'A - B'B|_F^2` balance regularizer.
    pub balance_weight: f64,
}

impl CrudeSolverConfig {
    pub fn new(rank: usize) -> Self {
        Self {
            rank,
            max_iters: 500,
            step_size: StepSize::Auto,
            rel_tol: 1e-6,
            balance_weight: 0.125,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::InvalidInput("solver rank must be >= 1".into()));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidInput("rel_tol must be > 0".into()));
        }
        if let StepSize::Fixed(s) = self.step_size {
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::InvalidInput("step size must be positive and finite".into()));
            }
        }
        if !(self.balance_weight >= 0.0) {
            return Err(Error::InvalidInput("balance weight must be >= 0".into()));
        }
        Ok(())
    }
}

/// A debiased dense estimate of one source matrix.
#[derive(Debug, Clone)]
pub struct DebiasedMatrix {
    pub estimate: DMatrix<f64>,
    /// Total sample size the estimate was built from.
    pub n: usize,
    /// Working rank used for the crude fits.
    pub rank: usize,
    pub source_id: String,
}

impl DebiasedMatrix {
    pub fn new(estimate: DMatrix<f64>, n: usize, rank: usize, source_id: impl Into<String>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("debiased matrix requires n >= 1".into()));
        }
        if estimate.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("debiased matrix has non-finite entries".into()));
        }
        Ok(Self { estimate, n, rank, source_id: source_id.into() })
    }
}

/// Inverse-propensity-weighted fill-in `(pq/n) * sum_i y_i e_{a_i} e_{b_i}'`.
fn fill_in(obs: &ObservationSet) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(obs.p, obs.q);
    for s in &obs.samples {
        m[(s.a, s.b)] += s.y;
    }
    m * ((obs.p * obs.q) as f64 / obs.n() as f64)
}

/// Best rank-`rank` approximation of the inverse-propensity-weighted fill-in.
pub fn spectral_init(obs: &ObservationSet, rank: usize) -> Result<DMatrix<f64>> {
    if obs.n() == 0 {
        return Err(Error::InvalidInput("spectral init requires at least one observation".into()));
    }
    if rank == 0 || rank > obs.p.min(obs.q) {
        return Err(Error::InvalidInput(format!(
            "rank {rank} out of range 1..={} for a {}x{} matrix",
            obs.p.min(obs.q),
            obs.p,
            obs.q
        )));
    }
    let m = fill_in(obs);
    if m.iter().all(|x| *x == 0.0) {
        return Ok(m);
    }
    Ok(thin_svd(&m, rank)?.reconstruct())
}

/// Returns a human-readable warning when the sample size is below the
/// `rank * (p + q)` rule of thumb for a well-posed factorized fit.
pub fn sample_size_warning(obs: &ObservationSet, cfg: &CrudeSolverConfig) -> Option<String> {
    let recommended = cfg.rank * (obs.p + obs.q);
    if obs.n() < recommended {
        Some(format!(
            "sample size {} is below the recommended rank*(p+q) = {} for a {}x{} rank-{} fit",
            obs.n(),
            recommended,
            obs.p,
            obs.q,
            cfg.rank
        ))
    } else {
        None
    }
}

/// Row-major factor pair; `a` is `p x r`, `b` is `q x r`.
struct Factors {
    p: usize,
    q: usize,
    r: usize,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl Factors {
    fn product(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.p, self.q, |i, j| {
            let ar = &self.a[i * self.r..(i + 1) * self.r];
            let br = &self.b[j * self.r..(j + 1) * self.r];
            ar.iter().zip(br).map(|(x, y)| x * y).sum()
        })
    }

    /// Projects factor rows onto the row-norm balls of an incoherent
    /// factorization. Without this projection the factored fit can drive the
    /// empirical loss down while blowing up never-observed cells in sparse
    /// regimes.
    fn clip_rows(&mut self, bound_a: f64, bound_b: f64) {
        for row in self.a.chunks_exact_mut(self.r) {
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > bound_a {
                let f = bound_a / norm;
                row.iter_mut().for_each(|x| *x *= f);
            }
        }
        for row in self.b.chunks_exact_mut(self.r) {
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > bound_b {
                let f = bound_b / norm;
                row.iter_mut().for_each(|x| *x *= f);
            }
        }
    }
}

/// Empirical loss `(pq/n) * sum_i (<AB', X_i> - y_i)^2 + w * |A'A - B'B|_F^2`.
fn loss(f: &Factors, obs: &ObservationSet, balance_weight: f64) -> f64 {
    let r = f.r;
    let mut data = 0.0;
    for s in &obs.samples {
        let ar = &f.a[s.a * r..s.a * r + r];
        let br = &f.b[s.b * r..s.b * r + r];
        let pred: f64 = ar.iter().zip(br).map(|(x, y)| x * y).sum();
        let c = pred - s.y;
        data += c * c;
    }
    data *= (f.p * f.q) as f64 / obs.n() as f64;
    data + balance_weight * balance_gap(f).1
}

/// Returns `D = A'A - B'B` (row-major r x r) and its squared Frobenius norm.
fn balance_gap(f: &Factors) -> (Vec<f64>, f64) {
    let r = f.r;
    let mut d = vec![0.0f64; r * r];
    for row in f.a.chunks_exact(r) {
        for i in 0..r {
            for j in 0..r {
                d[i * r + j] += row[i] * row[j];
            }
        }
    }
    for row in f.b.chunks_exact(r) {
        for i in 0..r {
            for j in 0..r {
                d[i * r + j] -= row[i] * row[j];
            }
        }
    }
    let sq = d.iter().map(|x| x * x).sum();
    (d, sq)
}

fn gradients(f: &Factors, obs: &ObservationSet, balance_weight: f64) -> (Vec<f64>, Vec<f64>) {
    let r = f.r;
    let coeff = 2.0 * (f.p * f.q) as f64 / obs.n() as f64;
    let mut ga = vec![0.0f64; f.p * r];
    let mut gb = vec![0.0f64; f.q * r];
    for s in &obs.samples {
        let ar = &f.a[s.a * r..s.a * r + r];
        let br = &f.b[s.b * r..s.b * r + r];
        let pred: f64 = ar.iter().zip(br).map(|(x, y)| x * y).sum();
        let c = coeff * (pred - s.y);
        for j in 0..r {
            ga[s.a * r + j] += c * br[j];
            gb[s.b * r + j] += c * ar[j];
        }
    }
    if balance_weight > 0.0 {
        let (d, _) = balance_gap(f);
        let w4 = 4.0 * balance_weight;
        for (row, grow) in f.a.chunks_exact(r).zip(ga.chunks_exact_mut(r)) {
            for j in 0..r {
                let mut acc = 0.0;
                for i in 0..r {
                    acc += row[i] * d[i * r + j];
                }
                grow[j] += w4 * acc;
            }
        }
        for (row, grow) in f.b.chunks_exact(r).zip(gb.chunks_exact_mut(r)) {
            for j in 0..r {
                let mut acc = 0.0;
                for i in 0..r {
                    acc += row[i] * d[i * r + j];
                }
                grow[j] -= w4 * acc;
            }
        }
    }
    (ga, gb)
}

/// Crude low-rank completion: balanced factorized gradient descent from a
/// spectral initialization.
///
/// Steps that would increase the loss are rejected and retried at half the
/// step size, so the loss is non-increasing across accepted iterations.
pub fn crude_complete(obs: &ObservationSet, cfg: &CrudeSolverConfig) -> Result<DMatrix<f64>> {
    cfg.validate()?;
    if obs.n() == 0 {
        return Err(Error::InvalidInput("completion requires at least one observation".into()));
    }
    if cfg.rank > obs.p.min(obs.q) {
        return Err(Error::InvalidInput(format!(
            "rank {} exceeds min(p, q) = {}",
            cfg.rank,
            obs.p.min(obs.q)
        )));
    }
    if let Some(w) = sample_size_warning(obs, cfg) {
        log::warn!("{w}");
    }

    let r = cfg.rank;
    let m_hat = fill_in(obs);
    let all_zero = m_hat.iter().all(|x| *x == 0.0);
    let (mut f, top_sv) = if all_zero {
        // Zero responses: the zero factorization is already optimal for the
        // data term and balanced.
        (
            Factors { p: obs.p, q: obs.q, r, a: vec![0.0; obs.p * r], b: vec![0.0; obs.q * r] },
            1.0,
        )
    } else {
        let svd = thin_svd(&m_hat, r)?;
        let mut a = vec![0.0f64; obs.p * r];
        let mut b = vec![0.0f64; obs.q * r];
        for j in 0..r {
            let scale = svd.singular_values[j].max(0.0).sqrt();
            for i in 0..obs.p {
                a[i * r + j] = svd.u[(i, j)] * scale;
            }
            for i in 0..obs.q {
                b[i * r + j] = svd.v[(i, j)] * scale;
            }
        }
        (Factors { p: obs.p, q: obs.q, r, a, b }, svd.singular_values[0])
    };

    let step0 = match cfg.step_size {
        StepSize::Auto => 0.25 / top_sv.max(f64::MIN_POSITIVE),
        StepSize::Fixed(s) => s,
    };
    // Incoherence ball: true balanced factors of a completable matrix have
    // row norms of order sqrt(lambda_1 * r / dim). The ball only needs to be
    // tight while many cells are unobserved; past full coverage the loss
    // itself pins every cell, so the bound relaxes with the oversampling
    // ratio and its influence vanishes as n grows.
    let oversample = (obs.n() as f64 / (obs.p * obs.q) as f64).sqrt().max(1.0);
    let bound_a =
        2.0 * oversample * (top_sv * r as f64 / obs.p as f64).sqrt().max(f64::MIN_POSITIVE);
    let bound_b =
        2.0 * oversample * (top_sv * r as f64 / obs.q as f64).sqrt().max(f64::MIN_POSITIVE);
    f.clip_rows(bound_a, bound_b);

    let mut current = loss(&f, obs, cfg.balance_weight);
    if !current.is_finite() {
        return Err(Error::NumericFailure("loss is not finite at initialization".into()));
    }
    let mut step = step0;
    for iter in 0..cfg.max_iters {
        if current <= 1e-28 {
            break;
        }
        let (ga, gb) = gradients(&f, obs, cfg.balance_weight);
        let mut accepted = None;
        while step >= step0 * 1e-12 {
            let mut trial = Factors {
                p: f.p,
                q: f.q,
                r,
                a: f.a.iter().zip(&ga).map(|(x, g)| x - step * g).collect(),
                b: f.b.iter().zip(&gb).map(|(x, g)| x - step * g).collect(),
            };
            trial.clip_rows(bound_a, bound_b);
            let trial_loss = loss(&trial, obs, cfg.balance_weight);
            if trial_loss.is_nan() {
                return Err(Error::NumericFailure(format!(
                    "loss became NaN at iteration {iter}"
                )));
            }
            if trial_loss <= current {
                accepted = Some((trial, trial_loss));
                break;
            }
            step *= 0.5;
        }
        let Some((trial, trial_loss)) = accepted else {
            break; // step underflow: no descent direction left at this scale
        };
        let decrease = current - trial_loss;
        f = trial;
        let stop = decrease <= cfg.rel_tol * current.max(f64::MIN_POSITIVE);
        current = trial_loss;
        if stop {
            break;
        }
        // Accepted cleanly: let the step grow back so the convergence tail
        // is not stuck at a conservative scale.
        step = (step * 1.25).min(step0 * 16.0);
    }
    Ok(f.product())
}

/// Splits the samples into `J` (train, holdout) pairs.
///
/// The holdouts partition the sample indices; sizes differ by at most one,
/// with the remainder spread over the first folds. Deterministic given
/// `seed`.
pub fn kfold_split(
    obs: &ObservationSet,
    j: usize,
    seed: u64,
) -> Result<Vec<(ObservationSet, ObservationSet)>> {
    if j < 2 {
        return Err(Error::InvalidInput("J-fold splitting requires J >= 2".into()));
    }
    if j > obs.n() {
        return Err(Error::InvalidInput(format!(
            "cannot split {} samples into {j} folds",
            obs.n()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..obs.n()).collect();
    indices.shuffle(&mut rng);

    let base = obs.n() / j;
    let rem = obs.n() % j;
    let mut folds = Vec::with_capacity(j);
    let mut start = 0usize;
    for fold in 0..j {
        let size = base + usize::from(fold < rem);
        let holdout_idx = &indices[start..start + size];
        let holdout: Vec<Observation> = holdout_idx.iter().map(|&i| obs.samples[i]).collect();
        let mut in_holdout = vec![false; obs.n()];
        for &i in holdout_idx {
            in_holdout[i] = true;
        }
        let train: Vec<Observation> = (0..obs.n())
            .filter(|&i| !in_holdout[i])
            .map(|i| obs.samples[i])
            .collect();
        folds.push((
            ObservationSet::new(obs.p, obs.q, train)?,
            ObservationSet::new(obs.p, obs.q, holdout)?,
        ));
        start += size;
    }
    Ok(folds)
}

/// One-step debiasing of a crude estimate against a holdout fold:
/// `Theta_tilde = crude + (J*p*q/n_total) * sum_i (y_i - crude[a_i, b_i]) X_i`.
pub fn debias_fold(
    crude: &DMatrix<f64>,
    holdout: &ObservationSet,
    j: usize,
    n_total: usize,
) -> Result<DMatrix<f64>> {
    if crude.nrows() != holdout.p || crude.ncols() != holdout.q {
        return Err(Error::DimensionMismatch(format!(
            "crude estimate is {}x{} but holdout indexes a {}x{} matrix",
            crude.nrows(),
            crude.ncols(),
            holdout.p,
            holdout.q
        )));
    }
    if n_total == 0 {
        return Err(Error::InvalidInput("n_total must be >= 1".into()));
    }
    if j == 0 {
        return Err(Error::InvalidInput("fold count must be >= 1".into()));
    }
    let factor = (j * holdout.p * holdout.q) as f64 / n_total as f64;
    let mut out = crude.clone();
    for s in &holdout.samples {
        let resid = s.y - crude[(s.a, s.b)];
        out[(s.a, s.b)] += factor * resid;
    }
    Ok(out)
}

/// Full debiased estimate: J-fold split, per-fold crude fit on the training
/// part, one-step correction on the holdout, then the average over folds.
pub fn debiased_estimate(
    obs: &ObservationSet,
    cfg: &CrudeSolverConfig,
    j: usize,
    seed: u64,
    source_id: impl Into<String>,
) -> Result<DebiasedMatrix> {
    cfg.validate()?;
    let folds = kfold_split(obs, j, seed)?;
    let per_fold: Vec<Result<DMatrix<f64>>> = folds
        .par_iter()
        .map(|(train, holdout)| {
            let crude = crude_complete(train, cfg)?;
            debias_fold(&crude, holdout, j, obs.n())
        })
        .collect();
    let mut acc = DMatrix::zeros(obs.p, obs.q);
    for fold in per_fold {
        acc += fold?;
    }
    acc /= j as f64;
    DebiasedMatrix::new(acc, obs.n(), cfg.rank, source_id)
}
