//! End-to-end transfer pipelines: representations, optional gate, projected
//! least squares, reconstructed target matrix.
//!
//! [`oracle_transfer`] trusts every source, integrating all subspaces with
//! the barycenter. [`nora_transfer`] additionally selects sources per side
//! with the rectified K-means and gates the integrated representation
//! against the target's own crude singular subspaces, so a useless
//! representation degrades gracefully to target-only estimation instead of
//! causing negative transfer.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};

use crate::completion::{
    crude_complete, debiased_estimate, CrudeSolverConfig, DebiasedMatrix, ObservationSet,
};
use crate::error::{Error, Result};
use crate::linalg::{alignment, thin_svd, Subspace};
use crate::subspace::{extract_all, rectified_kmeans, Side};
use crate::subspace::{barycenter, SelectionConfig};

/// Numeric slack for gate threshold comparisons.
const GATE_EPS: f64 = 1e-9;

/// Optional-transfer gate settings.
#[derive(Debug, Clone)]
pub struct GateConfig {
    /// Slack for adopting the transferred left representation.
    pub delta_u: f64,
    /// Slack for adopting the transferred right representation.
    pub delta_v: f64,
    /// Target rank `r0` used for the target's own crude subspaces.
    pub target_rank: usize,
    /// Debias the target estimate (J-fold) before taking its singular
    /// subspaces for the gate comparison. Off by default: the gate compares
    /// against the plain crude fit.
    pub debias_target: bool,
    /// Fold count used when `debias_target` is set.
    pub debias_folds: usize,
}

impl GateConfig {
    /// Defaults: `delta = 0.3 * r0` per side, no target debiasing.
    pub fn new(target_rank: usize) -> Self {
        let delta = 0.3 * target_rank as f64;
        Self { delta_u: delta, delta_v: delta, target_rank, debias_target: false, debias_folds: 5 }
    }

    pub fn validate(&self) -> Result<()> {
        let r0 = self.target_rank as f64;
        if self.target_rank == 0 {
            return Err(Error::InvalidInput("target rank must be >= 1".into()));
        }
        for (name, d) in [("delta_u", self.delta_u), ("delta_v", self.delta_v)] {
            if !(0.0..=r0).contains(&d) {
                return Err(Error::InvalidInput(format!("{name} = {d} out of range [0, {r0}]")));
            }
        }
        Ok(())
    }
}

/// Fitted transfer model: representations, low-dimensional coefficients, and
/// the reconstructed target matrix, plus selection and gate diagnostics.
#[derive(Debug, Clone)]
pub struct TransferModel {
    pub u_hat: Subspace,
    pub v_hat: Subspace,
    /// Coefficient matrix of the projected regression, `u_dim x v_dim`.
    pub gamma: DMatrix<f64>,
    /// `u_hat * gamma * v_hat'`.
    pub theta_hat: DMatrix<f64>,
    pub gate_u_used_transfer: bool,
    pub gate_v_used_transfer: bool,
    pub selected_u: BTreeSet<String>,
    pub selected_v: BTreeSet<String>,
    /// Sum of squared target residuals `sum_i (y_i - theta_hat[a_i, b_i])^2`.
    pub residual_ss: f64,
}

impl TransferModel {
    fn assemble(
        u_hat: Subspace,
        v_hat: Subspace,
        gamma: DMatrix<f64>,
        gate_u: bool,
        gate_v: bool,
        selected_u: BTreeSet<String>,
        selected_v: BTreeSet<String>,
        obs: &ObservationSet,
    ) -> Self {
        let theta_hat = u_hat.basis() * &gamma * v_hat.basis().transpose();
        let residual_ss = obs
            .samples()
            .iter()
            .map(|s| {
                let r = s.y - theta_hat[(s.a, s.b)];
                r * r
            })
            .sum();
        Self {
            u_hat,
            v_hat,
            gamma,
            theta_hat,
            gate_u_used_transfer: gate_u,
            gate_v_used_transfer: gate_v,
            selected_u,
            selected_v,
            residual_ss,
        }
    }
}

/// Ordinary least squares on the projected features.
///
/// Each sample contributes the regressor row `vec(u_row_a' * v_row_b)` in
/// row-major order; the minimum-norm solution is computed through an SVD of
/// the design with singular values below `1e-10 * sigma_1` treated as zero.
pub fn target_ols(obs: &ObservationSet, u: &Subspace, v: &Subspace) -> Result<DMatrix<f64>> {
    if u.ambient_dim() != obs.p() || v.ambient_dim() != obs.q() {
        return Err(Error::DimensionMismatch(format!(
            "representations are {}x{} / {}x{} but observations index a {}x{} matrix",
            u.ambient_dim(),
            u.dim(),
            v.ambient_dim(),
            v.dim(),
            obs.p(),
            obs.q()
        )));
    }
    let n = obs.n();
    if n == 0 {
        return Err(Error::InvalidInput("regression requires at least one observation".into()));
    }
    let (du, dv) = (u.dim(), v.dim());
    let mut design = DMatrix::zeros(n, du * dv);
    let mut max_abs = 0.0f64;
    for (i, s) in obs.samples().iter().enumerate() {
        for su in 0..du {
            let uu = u.basis()[(s.a, su)];
            for sv in 0..dv {
                let w = uu * v.basis()[(s.b, sv)];
                design[(i, su * dv + sv)] = w;
                max_abs = max_abs.max(w.abs());
            }
        }
    }
    if max_abs <= 1e-12 {
        return Err(Error::DegenerateInput(
            "design is zero: the representations vanish at every observed index".into(),
        ));
    }
    let y = DVector::from_iterator(n, obs.samples().iter().map(|s| s.y));
    let svd = design
        .try_svd(true, true, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::NumericFailure("design svd did not converge".into()))?;
    let top = svd.singular_values.max();
    let coef = svd
        .solve(&y, 1e-10 * top)
        .map_err(|e| Error::NumericFailure(format!("least-squares solve failed: {e}")))?;
    Ok(DMatrix::from_fn(du, dv, |i, j| coef[i * dv + j]))
}

/// Oracle pipeline: integrate every source's subspaces with the barycenter,
/// then solve the projected regression on the target samples.
pub fn oracle_transfer(
    target: &ObservationSet,
    sources: &[DebiasedMatrix],
    p0: usize,
    q0: usize,
) -> Result<TransferModel> {
    check_source_dims(target, sources)?;
    if sources.is_empty() {
        return Err(Error::InvalidInput("oracle transfer requires at least one source".into()));
    }
    let subs = extract_all(sources)?;
    let left = barycenter(&subs, Side::Left, p0)?;
    let right = barycenter(&subs, Side::Right, q0)?;
    let u_hat = left.subspace.expect("barycenter always yields a subspace");
    let v_hat = right.subspace.expect("barycenter always yields a subspace");
    let gamma = target_ols(target, &u_hat, &v_hat)?;
    Ok(TransferModel::assemble(
        u_hat,
        v_hat,
        gamma,
        true,
        true,
        left.selected,
        right.selected,
        target,
    ))
}

fn check_source_dims(target: &ObservationSet, sources: &[DebiasedMatrix]) -> Result<()> {
    for s in sources {
        if s.estimate.nrows() != target.p() || s.estimate.ncols() != target.q() {
            return Err(Error::DimensionMismatch(format!(
                "source {} is {}x{} but the target is {}x{}",
                s.source_id,
                s.estimate.nrows(),
                s.estimate.ncols(),
                target.p(),
                target.q()
            )));
        }
    }
    Ok(())
}

/// Result of the optional-transfer gate, per side.
#[derive(Debug, Clone)]
pub struct GateOutcome {
    pub chosen_u: Subspace,
    pub chosen_v: Subspace,
    pub used_u: bool,
    pub used_v: bool,
}

/// Adopts a candidate representation only when it aligns with the target's
/// own subspace within slack `delta`; otherwise keeps the target's subspace.
/// An absent candidate always falls back.
pub fn optional_gate(
    target_u: &Subspace,
    target_v: &Subspace,
    candidate_u: Option<&Subspace>,
    candidate_v: Option<&Subspace>,
    cfg: &GateConfig,
) -> Result<GateOutcome> {
    cfg.validate()?;
    let r0 = cfg.target_rank;
    if target_u.dim() != r0 || target_v.dim() != r0 {
        return Err(Error::InvalidInput(format!(
            "target subspaces have dims {} / {} but the gate expects rank {r0}",
            target_u.dim(),
            target_v.dim()
        )));
    }
    let decide = |own: &Subspace, cand: Option<&Subspace>, delta: f64| -> Result<(Subspace, bool)> {
        match cand {
            Some(c) => {
                let a = alignment(&own.projector(), &c.projector())?;
                if a >= r0 as f64 - delta - GATE_EPS {
                    Ok((c.clone(), true))
                } else {
                    Ok((own.clone(), false))
                }
            }
            None => Ok((own.clone(), false)),
        }
    };
    let (chosen_u, used_u) = decide(target_u, candidate_u, cfg.delta_u)?;
    let (chosen_v, used_v) = decide(target_v, candidate_v, cfg.delta_v)?;
    Ok(GateOutcome { chosen_u, chosen_v, used_u, used_v })
}

/// Non-oracle pipeline: per-side rectified selection, optional gate against
/// the target's own crude subspaces, then the projected regression with
/// whichever representations survived.
#[allow(clippy::too_many_arguments)]
pub fn nora_transfer(
    target: &ObservationSet,
    sources: &[DebiasedMatrix],
    p0: usize,
    q0: usize,
    sel_u: &SelectionConfig,
    sel_v: &SelectionConfig,
    gate: &GateConfig,
    crude_cfg: &CrudeSolverConfig,
    seed: u64,
) -> Result<TransferModel> {
    check_source_dims(target, sources)?;
    gate.validate()?;

    let (left, right) = if sources.is_empty() {
        (None, None)
    } else {
        let subs = extract_all(sources)?;
        (
            Some(rectified_kmeans(&subs, Side::Left, p0, sel_u)?),
            Some(rectified_kmeans(&subs, Side::Right, q0, sel_v)?),
        )
    };
    let candidate_u = left.as_ref().and_then(|r| r.subspace.clone());
    let candidate_v = right.as_ref().and_then(|r| r.subspace.clone());
    let selected_u = left.as_ref().map(|r| r.selected.clone()).unwrap_or_default();
    let selected_v = right.as_ref().map(|r| r.selected.clone()).unwrap_or_default();

    let r0 = gate.target_rank;
    let mut target_cfg = crude_cfg.clone();
    target_cfg.rank = r0;
    let target_estimate = if gate.debias_target {
        debiased_estimate(target, &target_cfg, gate.debias_folds, seed, "target")?.estimate
    } else {
        crude_complete(target, &target_cfg)?
    };
    let svd = thin_svd(&target_estimate, r0)?;
    let target_u = Subspace::new(svd.u)?;
    let target_v = Subspace::new(svd.v)?;

    let outcome = optional_gate(
        &target_u,
        &target_v,
        candidate_u.as_ref(),
        candidate_v.as_ref(),
        gate,
    )?;
    let gamma = target_ols(target, &outcome.chosen_u, &outcome.chosen_v)?;
    Ok(TransferModel::assemble(
        outcome.chosen_u,
        outcome.chosen_v,
        gamma,
        outcome.used_u,
        outcome.used_v,
        selected_u,
        selected_v,
        target,
    ))
}
