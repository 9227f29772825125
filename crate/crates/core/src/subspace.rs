//! Subspace extraction and integration across sources.
//!
//! Each debiased source matrix contributes its leading left/right singular
//! subspaces as orthogonal projectors. [`barycenter`] integrates them through
//! the top eigenvectors of the sample-size-weighted Euclidean mean of the
//! projectors; [`rectified_kmeans`] alternates that averaging with a
//! trace-alignment selection rule so that only sources whose subspaces are
//! close to the current estimate contribute, which makes the integration
//! robust to non-informative sources.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::completion::DebiasedMatrix;
use crate::error::{Error, Result};
use crate::linalg::{alignment, sym_eigenvalues, thin_svd, top_eigvecs_sym, Projector, Subspace};

/// Left/right singular-subspace projectors of one source, with the sample
/// size used for weighting.
#[derive(Debug, Clone)]
pub struct SourceSubspaces {
    pub source_id: String,
    /// Sample size `n_k` of the source.
    pub n: usize,
    /// Working rank `r_k` of the extraction.
    pub r: usize,
    /// `p x p` projector onto the left singular subspace.
    pub left: Projector,
    /// `q x q` projector onto the right singular subspace.
    pub right: Projector,
}

impl SourceSubspaces {
    pub fn new(
        source_id: impl Into<String>,
        n: usize,
        r: usize,
        left: Projector,
        right: Projector,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("source sample size must be >= 1".into()));
        }
        for (side, p) in [("left", &left), ("right", &right)] {
            if (p.matrix().trace() - r as f64).abs() > 1e-6 {
                return Err(Error::InvalidInput(format!(
                    "{side} projector has rank {} but the source rank is {r}",
                    p.rank()
                )));
            }
        }
        Ok(Self { source_id: source_id.into(), n, r, left, right })
    }
}

/// Which side of the matrices to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    fn projector<'a>(&self, s: &'a SourceSubspaces) -> &'a Projector {
        match self {
            Side::Left => &s.left,
            Side::Right => &s.right,
        }
    }
}

/// Initialization of the rectified K-means iteration.
#[derive(Debug, Clone)]
pub enum SelectionInit {
    /// Start from the barycenter over every source.
    AllSources,
    /// Start from a caller-supplied subspace of the cut dimension.
    Explicit(Subspace),
}

/// Configuration of the rectified selection iteration.
#[derive(Debug, Clone)]
pub struct SelectionConfig {
    /// Alignment slack: source `k` is kept while `tr(P_k P) >= r_k - tau`.
    pub tau: f64,
    pub max_iters: usize,
    pub init: SelectionInit,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self { tau: 0.5, max_iters: 100, init: SelectionInit::AllSources }
    }
}

/// Output of an integration: the integrated subspace (absent when no source
/// was selected), the selected source set, and the achieved objective.
#[derive(Debug, Clone)]
pub struct IntegrationResult {
    pub subspace: Option<Subspace>,
    pub selected: BTreeSet<String>,
    pub iterations: usize,
    pub objective: f64,
}

/// Alignment comparisons tolerate this much floating-point slack.
const SELECTION_EPS: f64 = 1e-9;

/// Extracts the leading `r_k` left and right singular subspaces of a
/// debiased estimate as projectors.
pub fn extract_subspaces(theta: &DebiasedMatrix) -> Result<SourceSubspaces> {
    let svd = thin_svd(&theta.estimate, theta.rank)?;
    let left = Subspace::new(svd.u.clone())?.projector();
    let right = Subspace::new(svd.v.clone())?.projector();
    SourceSubspaces::new(theta.source_id.clone(), theta.n, theta.rank, left, right)
}

/// Extracts subspaces for a batch of sources in parallel, preserving order.
pub fn extract_all(sources: &[DebiasedMatrix]) -> Result<Vec<SourceSubspaces>> {
    let out: Vec<Result<SourceSubspaces>> = sources.par_iter().map(extract_subspaces).collect();
    out.into_iter().collect()
}

fn check_ambient(sources: &[SourceSubspaces], side: Side) -> Result<usize> {
    let Some(first) = sources.first() else {
        return Err(Error::InvalidInput("source list is empty".into()));
    };
    let ambient = side.projector(first).ambient_dim();
    for s in sources {
        if side.projector(s).ambient_dim() != ambient {
            return Err(Error::DimensionMismatch(format!(
                "source {} has ambient dimension {} != {}",
                s.source_id,
                side.projector(s).ambient_dim(),
                ambient
            )));
        }
    }
    Ok(ambient)
}

fn check_sources(sources: &[SourceSubspaces], side: Side, cut_dim: usize) -> Result<usize> {
    let ambient = check_ambient(sources, side)?;
    if cut_dim == 0 || cut_dim > ambient {
        return Err(Error::InvalidInput(format!(
            "cut dimension {cut_dim} out of range 1..={ambient}"
        )));
    }
    if let Some(max_r) = sources.iter().map(|s| s.r).max() {
        if cut_dim < max_r {
            log::warn!(
                "cut dimension {cut_dim} is below the largest source rank {max_r}; \
                 integrated subspace cannot contain every source subspace"
            );
        }
    }
    Ok(ambient)
}

/// Weighted Euclidean mean of the selected projectors.
fn weighted_projector_mean(
    sources: &[SourceSubspaces],
    side: Side,
    selected: &BTreeSet<String>,
    ambient: usize,
) -> DMatrix<f64> {
    let mut sigma = DMatrix::zeros(ambient, ambient);
    let mut total = 0.0f64;
    for s in sources {
        if selected.contains(&s.source_id) {
            sigma += side.projector(s).matrix() * s.n as f64;
            total += s.n as f64;
        }
    }
    sigma / total.max(f64::MIN_POSITIVE)
}

fn all_ids(sources: &[SourceSubspaces]) -> BTreeSet<String> {
    sources.iter().map(|s| s.source_id.clone()).collect()
}

/// One-round Grassmannian barycenter over every source: top `cut_dim`
/// eigenvectors of `(1/N) * sum_k n_k P_k`.
///
/// The reported objective is the weighted mean alignment
/// `sum_k (n_k/N) * tr(P_k P_hat)`.
pub fn barycenter(sources: &[SourceSubspaces], side: Side, cut_dim: usize) -> Result<IntegrationResult> {
    let ambient = check_sources(sources, side, cut_dim)?;
    let selected = all_ids(sources);
    let sigma = weighted_projector_mean(sources, side, &selected, ambient);
    let subspace = top_eigvecs_sym(&sigma, cut_dim)?;
    let proj = subspace.projector();
    let total: f64 = sources.iter().map(|s| s.n as f64).sum();
    let mut objective = 0.0;
    for s in sources {
        objective += s.n as f64 / total * alignment(side.projector(s), &proj)?;
    }
    Ok(IntegrationResult { subspace: Some(subspace), selected, iterations: 1, objective })
}

/// Rectified objective `(1/N) * sum_k n_k * max{tr(P_k P), r_k - tau}`; the
/// subspace may be absent (empty selection), in which case the constant part
/// alone is reported.
fn rectified_objective(
    sources: &[SourceSubspaces],
    side: Side,
    subspace: Option<&Subspace>,
    tau: f64,
) -> Result<f64> {
    let total: f64 = sources.iter().map(|s| s.n as f64).sum();
    let proj = subspace.map(Subspace::projector);
    let mut acc = 0.0;
    for s in sources {
        let floor = s.r as f64 - tau;
        let value = match &proj {
            Some(p) => alignment(side.projector(s), p)?.max(floor),
            None => floor,
        };
        acc += s.n as f64 / total * value;
    }
    Ok(acc)
}

fn select_aligned(
    sources: &[SourceSubspaces],
    side: Side,
    proj: &Projector,
    tau: f64,
) -> Result<BTreeSet<String>> {
    let mut selected = BTreeSet::new();
    for s in sources {
        let a = alignment(side.projector(s), proj)?;
        if a >= s.r as f64 - tau - SELECTION_EPS {
            selected.insert(s.source_id.clone());
        }
    }
    Ok(selected)
}

/// Rectified Grassmannian K-means: alternate between selecting the sources
/// aligned with the current subspace (within slack `tau`) and re-averaging
/// over the selected set.
///
/// Stops when the selected set repeats or after `max_iters` averaging steps.
/// An empty selection at any point yields a result with no subspace; callers
/// treat that as "no informative sources" and fall back to target-only
/// estimation.
pub fn rectified_kmeans(
    sources: &[SourceSubspaces],
    side: Side,
    cut_dim: usize,
    cfg: &SelectionConfig,
) -> Result<IntegrationResult> {
    let ambient = check_sources(sources, side, cut_dim)?;
    if !(0.0..=cut_dim as f64).contains(&cfg.tau) {
        return Err(Error::InvalidInput(format!(
            "tau = {} out of range [0, {cut_dim}]",
            cfg.tau
        )));
    }
    if cfg.max_iters == 0 {
        return Err(Error::InvalidInput("max_iters must be >= 1".into()));
    }

    let mut current = match &cfg.init {
        SelectionInit::AllSources => barycenter(sources, side, cut_dim)?
            .subspace
            .expect("all-sources barycenter always yields a subspace"),
        SelectionInit::Explicit(s) => {
            if s.ambient_dim() != ambient || s.dim() != cut_dim {
                return Err(Error::InvalidInput(format!(
                    "explicit init is {}x{} but expected {}x{}",
                    s.ambient_dim(),
                    s.dim(),
                    ambient,
                    cut_dim
                )));
            }
            s.clone()
        }
    };

    let mut previous: Option<BTreeSet<String>> = None;
    let mut updates = 0usize;
    for _ in 0..cfg.max_iters {
        let selected = select_aligned(sources, side, &current.projector(), cfg.tau)?;
        if selected.is_empty() {
            let objective = rectified_objective(sources, side, None, cfg.tau)?;
            return Ok(IntegrationResult { subspace: None, selected, iterations: updates, objective });
        }
        if previous.as_ref() == Some(&selected) {
            let objective = rectified_objective(sources, side, Some(&current), cfg.tau)?;
            return Ok(IntegrationResult {
                subspace: Some(current),
                selected,
                iterations: updates,
                objective,
            });
        }
        let sigma = weighted_projector_mean(sources, side, &selected, ambient);
        current = top_eigvecs_sym(&sigma, cut_dim)?;
        previous = Some(selected);
        updates += 1;
    }
    let selected = previous.unwrap_or_default();
    let objective = rectified_objective(sources, side, Some(&current), cfg.tau)?;
    Ok(IntegrationResult { subspace: Some(current), selected, iterations: updates, objective })
}

/// Eigenvalue-ratio heuristic for the cut dimension: the `j <= max_dim`
/// maximizing `lambda_j / lambda_{j+1}` of the weighted projector mean, ties
/// broken by the smaller `j`.
pub fn select_cut_dim(sources: &[SourceSubspaces], side: Side, max_dim: usize) -> Result<usize> {
    let ambient = check_ambient(sources, side)?;
    if max_dim == 0 || max_dim >= ambient {
        return Err(Error::InvalidInput(format!(
            "max_dim {max_dim} out of range 1..{ambient}"
        )));
    }
    let sigma = weighted_projector_mean(sources, side, &all_ids(sources), ambient);
    let eigs = sym_eigenvalues(&sigma)?;
    let spectrum: Vec<f64> = eigs.iter().map(|&x| x.max(0.0)).collect();
    select_rank_from_spectrum(&spectrum, max_dim)
}

/// Shared ratio rule over a non-increasing non-negative spectrum.
pub fn select_rank_from_spectrum(spectrum: &[f64], max_dim: usize) -> Result<usize> {
    if spectrum.len() < 2 || max_dim >= spectrum.len() {
        return Err(Error::InvalidInput(format!(
            "need at least max_dim + 1 = {} spectrum values, got {}",
            max_dim + 1,
            spectrum.len()
        )));
    }
    let top = spectrum[0];
    if top < 1e-12 {
        return Err(Error::DegenerateInput("spectrum is numerically zero".into()));
    }
    let floor = top * 1e-15;
    let mut best_j = 0usize;
    let mut best_ratio = -1.0f64;
    for j in 1..=max_dim {
        if spectrum[j - 1] < 1e-12 {
            continue; // ratios inside the noise floor carry no signal
        }
        let ratio = spectrum[j - 1] / spectrum[j].max(floor);
        if ratio > best_ratio {
            best_ratio = ratio;
            best_j = j;
        }
    }
    if best_j == 0 {
        return Err(Error::DegenerateInput("spectrum is numerically zero".into()));
    }
    Ok(best_j)
}
