//! End-to-end pipeline checks on constructed and generated instances.

mod common;

use matcomp_core::completion::{
    crude_complete, CrudeSolverConfig, DebiasedMatrix, Observation, ObservationSet,
};
use matcomp_core::inference::{bilinear_ci, sigma_l_sq, BilinearQuery};
use matcomp_core::linalg::{thin_svd, Subspace};
use matcomp_core::seed::child_seed;
use matcomp_core::sim::{generate_instance, GeneratorConfig, Scenario, SourceMix};
use matcomp_core::subspace::SelectionConfig;
use matcomp_core::transfer::{nora_transfer, oracle_transfer, target_ols, GateConfig};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn full_one_pass(theta: &DMatrix<f64>) -> ObservationSet {
    let samples = (0..theta.nrows())
        .flat_map(|a| (0..theta.ncols()).map(move |b| (a, b)))
        .map(|(a, b)| Observation { a, b, y: theta[(a, b)] })
        .collect();
    ObservationSet::new(theta.nrows(), theta.ncols(), samples).unwrap()
}

/// A family of exact rank-r sources sharing planted spans, plus a target
/// representable in those spans.
struct ExactFamily {
    sources: Vec<DebiasedMatrix>,
    target_truth: DMatrix<f64>,
    target_obs: ObservationSet,
}

fn exact_family(p: usize, q: usize, p0: usize, q0: usize, r: usize, k: usize, seed: u64) -> ExactFamily {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = matcomp_core::sim::haar_subspace_with_rng(p, p0, &mut rng);
    let v = matcomp_core::sim::haar_subspace_with_rng(q, q0, &mut rng);
    let mut sources = Vec::new();
    for kk in 0..k {
        // Random r-dim rotation inside the planted spans.
        let mix_u = common::gaussian_matrix(p0, r, seed * 31 + kk as u64 + 1);
        let mix_v = common::gaussian_matrix(q0, r, seed * 37 + kk as u64 + 2);
        let uk = matcomp_core::linalg::orthonormalize(&(u.basis() * mix_u)).unwrap();
        let vk = matcomp_core::linalg::orthonormalize(&(v.basis() * mix_v)).unwrap();
        let mut lambda = DMatrix::zeros(r, r);
        for i in 0..r {
            lambda[(i, i)] = 1.0 + rng.random::<f64>();
        }
        let theta = uk.basis() * lambda * vk.basis().transpose();
        sources.push(DebiasedMatrix::new(theta, 1000, r, format!("s{kk}")).unwrap());
    }
    let mix_u = common::gaussian_matrix(p0, r, seed * 41 + 5);
    let mix_v = common::gaussian_matrix(q0, r, seed * 43 + 6);
    let u0 = matcomp_core::linalg::orthonormalize(&(u.basis() * mix_u)).unwrap();
    let v0 = matcomp_core::linalg::orthonormalize(&(v.basis() * mix_v)).unwrap();
    let mut lambda = DMatrix::zeros(r, r);
    for i in 0..r {
        lambda[(i, i)] = 1.0 + rng.random::<f64>();
    }
    let target_truth = u0.basis() * lambda * v0.basis().transpose();
    let target_obs = full_one_pass(&target_truth);
    ExactFamily { sources, target_truth, target_obs }
}

/// Exact sources spanning the target's representation plus dense noiseless
/// target observations: the oracle pipeline recovers the target.
#[test]
fn oracle_exact_recovery() {
    let fam = exact_family(20, 16, 4, 3, 2, 5, 9);
    let model = oracle_transfer(&fam.target_obs, &fam.sources, 4, 3).unwrap();
    let rel = matcomp_core::sim::relative_error(&model.theta_hat, &fam.target_truth);
    assert!(rel <= 1e-6, "relative error {rel}");
    assert!(model.gate_u_used_transfer && model.gate_v_used_transfer);
    assert_eq!(model.selected_u.len(), 5);
    // Residuals vanish on a noiseless realizable fit.
    assert!(model.residual_ss <= 1e-9, "residual ss {}", model.residual_ss);
}

/// In the same exact setting the non-oracle pipeline keeps every source,
/// passes both gates, and reproduces the oracle output.
#[test]
fn nora_equals_oracle_on_exact_aligned_family() {
    let fam = exact_family(20, 16, 4, 3, 2, 5, 23);
    let oracle = oracle_transfer(&fam.target_obs, &fam.sources, 4, 3).unwrap();
    let nora = nora_transfer(
        &fam.target_obs,
        &fam.sources,
        4,
        3,
        &SelectionConfig { tau: 4.0, ..Default::default() },
        &SelectionConfig { tau: 3.0, ..Default::default() },
        &GateConfig::new(2),
        &CrudeSolverConfig::new(2),
        55,
    )
    .unwrap();
    assert!(nora.gate_u_used_transfer && nora.gate_v_used_transfer);
    assert_eq!(nora.selected_u.len(), 5);
    assert_eq!(nora.selected_v.len(), 5);
    assert!((&nora.theta_hat - &oracle.theta_hat).norm() <= 1e-8);
}

/// With delta = 0 and a transferred representation that differs from the
/// target's own subspaces, the fitted model's spaces are exactly the
/// target's crude-SVD subspaces.
#[test]
fn nora_delta_zero_reduces_to_target_subspaces() {
    let mut cfg = GeneratorConfig::scenario_default(Scenario::C);
    cfg.p = 30;
    cfg.q = 30;
    cfg.p0 = 4;
    cfg.q0 = 4;
    cfg.r = 2;
    cfg.k = 4;
    cfg.n_target = 900;
    cfg.n_source = 900;
    cfg.seed = 3;
    let inst = generate_instance(&cfg).unwrap();
    let crude_cfg = CrudeSolverConfig::new(2);
    let sources: Vec<DebiasedMatrix> = inst
        .truth_sources
        .iter()
        .enumerate()
        .map(|(k, t)| DebiasedMatrix::new(t.clone(), 900, 2, format!("s{k}")).unwrap())
        .collect();
    let gate = GateConfig { delta_u: 0.0, delta_v: 0.0, ..GateConfig::new(2) };
    let model = nora_transfer(
        &inst.obs_target,
        &sources,
        4,
        4,
        &SelectionConfig::default(),
        &SelectionConfig::default(),
        &gate,
        &crude_cfg,
        77,
    )
    .unwrap();
    assert!(!model.gate_u_used_transfer && !model.gate_v_used_transfer);

    let crude = crude_complete(&inst.obs_target, &crude_cfg).unwrap();
    let svd = thin_svd(&crude, 2).unwrap();
    let tu = Subspace::new(svd.u).unwrap();
    let tv = Subspace::new(svd.v).unwrap();
    assert!((model.u_hat.projector().matrix() - tu.projector().matrix()).norm() <= 1e-10);
    assert!((model.v_hat.projector().matrix() - tv.projector().matrix()).norm() <= 1e-10);
}

/// Zero sources: the non-oracle pipeline falls back to target-only
/// representations without erroring.
#[test]
fn nora_with_zero_sources_falls_back() {
    let mut cfg = GeneratorConfig::scenario_default(Scenario::A);
    cfg.p = 25;
    cfg.q = 20;
    cfg.p0 = 3;
    cfg.q0 = 3;
    cfg.r = 2;
    cfg.k = 1;
    cfg.n_target = 500;
    cfg.n_source = 10;
    cfg.seed = 8;
    let inst = generate_instance(&cfg).unwrap();
    let model = nora_transfer(
        &inst.obs_target,
        &[],
        3,
        3,
        &SelectionConfig::default(),
        &SelectionConfig::default(),
        &GateConfig::new(2),
        &CrudeSolverConfig::new(2),
        1,
    )
    .unwrap();
    assert!(!model.gate_u_used_transfer && !model.gate_v_used_transfer);
    assert!(model.selected_u.is_empty() && model.selected_v.is_empty());
    assert!(model.theta_hat.iter().all(|x| x.is_finite()));
}

/// Projected-feature regression matches the normal-equations oracle on a
/// full-rank design.
#[test]
fn target_ols_matches_normal_equations() {
    let u = matcomp_core::linalg::orthonormalize(&common::gaussian_matrix(3, 2, 61)).unwrap();
    let v = matcomp_core::linalg::orthonormalize(&common::gaussian_matrix(3, 2, 62)).unwrap();
    let gamma_true = DMatrix::from_row_slice(2, 2, &[1.0, -0.5, 0.25, 2.0]);
    let theta = u.basis() * &gamma_true * v.basis().transpose();
    let obs = full_one_pass(&theta);

    let gamma = target_ols(&obs, &u, &v).unwrap();

    // Oracle: explicit design matrix + normal equations.
    let n = obs.n();
    let mut design = DMatrix::zeros(n, 4);
    let mut y = DVector::zeros(n);
    for (i, s) in obs.samples().iter().enumerate() {
        for su in 0..2 {
            for sv in 0..2 {
                design[(i, su * 2 + sv)] = u.basis()[(s.a, su)] * v.basis()[(s.b, sv)];
            }
        }
        y[i] = s.y;
    }
    let coef = common::normal_equations_ols(&design, &y);
    let oracle = DMatrix::from_fn(2, 2, |i, j| coef[i * 2 + j]);
    assert!((gamma - oracle).norm() <= 1e-8);
}

/// Orthogonally re-parameterizing the representation re-parameterizes the
/// coefficients and leaves the fitted matrix unchanged.
#[test]
fn target_ols_rotation_equivariance() {
    let u = matcomp_core::linalg::orthonormalize(&common::gaussian_matrix(6, 3, 71)).unwrap();
    let v = matcomp_core::linalg::orthonormalize(&common::gaussian_matrix(5, 2, 72)).unwrap();
    let theta = u.basis()
        * DMatrix::from_row_slice(3, 2, &[1.0, 0.2, -0.7, 1.1, 0.4, -0.3])
        * v.basis().transpose();
    let obs = full_one_pass(&theta);
    let gamma = target_ols(&obs, &u, &v).unwrap();

    let rot = matcomp_core::linalg::orthonormalize(&common::gaussian_matrix(3, 3, 73)).unwrap();
    let u_rot = Subspace::new(u.basis() * rot.basis()).unwrap();
    let gamma_rot = target_ols(&obs, &u_rot, &v).unwrap();
    assert!((rot.basis().transpose() * &gamma - &gamma_rot).norm() <= 1e-10);

    let theta_a = u.basis() * gamma * v.basis().transpose();
    let theta_b = u_rot.basis() * gamma_rot * v.basis().transpose();
    assert!((theta_a - theta_b).norm() <= 1e-10);
}

/// Inference on a fitted oracle model: interval width scales as 1/sqrt(n0)
/// when the observation set is replicated, and the variance factorizes over
/// query pairs.
#[test]
fn inference_width_and_factorization() {
    let fam = exact_family(12, 10, 3, 3, 2, 3, 77);
    // Noisy target observations so residuals are nonzero.
    let obs = matcomp_core::sim::sample_observations(&fam.target_truth, 400, 1.0, 5).unwrap();
    let model = oracle_transfer(&obs, &fam.sources, 3, 3).unwrap();

    let e = |n: usize, i: usize| {
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        v
    };
    let q = BilinearQuery::new(e(12, 0), e(10, 0));
    let base = bilinear_ci(&model, &obs, &q).unwrap();

    // Replicate the sample 4 times: same residual mean square, double the
    // root sample size, half the width.
    let mut repl = obs.samples().to_vec();
    for _ in 0..3 {
        repl.extend_from_slice(obs.samples());
    }
    let obs4 = ObservationSet::new(12, 10, repl).unwrap();
    let wide = bilinear_ci(&model, &obs4, &q).unwrap();
    let w1 = base.ci_hi - base.ci_lo;
    let w4 = wide.ci_hi - wide.ci_lo;
    assert!((w4 / w1 - 0.5).abs() <= 1e-9, "width ratio {}", w4 / w1);

    // Factorization of the plug-in variance across query pairs.
    let (u1, v1) = (e(12, 0), e(10, 0));
    let (u2, v2) = (e(12, 3), e(10, 2));
    let s11 = sigma_l_sq(&model, &obs, &u1, &v1).unwrap();
    let s22 = sigma_l_sq(&model, &obs, &u2, &v2).unwrap();
    let s12 = sigma_l_sq(&model, &obs, &u1, &v2).unwrap();
    let s21 = sigma_l_sq(&model, &obs, &u2, &v1).unwrap();
    assert!((s11 * s22 - s12 * s21).abs() <= 1e-12 * (s11 * s22).abs().max(1e-300));

    // Scale equivariance in the query vectors.
    let c = 2.5;
    let scaled = sigma_l_sq(&model, &obs, &(&u1 * c), &v1).unwrap();
    assert!((scaled - c * c * s11).abs() <= 1e-12 * scaled.abs());
}
