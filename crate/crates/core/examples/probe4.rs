use matcomp_core::completion::{debiased_estimate, CrudeSolverConfig};
use matcomp_core::inference::{bilinear_ci, BilinearQuery};
use matcomp_core::seed::child_seed;
use matcomp_core::sim::*;
use matcomp_core::subspace::SelectionConfig;
use matcomp_core::transfer::{nora_transfer, oracle_transfer, GateConfig};
use nalgebra::DVector;
use rayon::prelude::*;

fn main() {
    // Scenario B and C gate behavior over 10 reps each (fast check).
    for scenario in [Scenario::B, Scenario::C] {
        let cfg = GeneratorConfig::scenario_default(scenario);
        let outcomes: Vec<(bool, bool, f64, f64)> = (0..10u64).into_par_iter().map(|rep| {
            let rep_seed = child_seed(1234, rep);
            let mut c = cfg.clone();
            c.seed = child_seed(rep_seed, 0);
            let inst = generate_instance(&c).unwrap();
            let crude_cfg = CrudeSolverConfig::new(cfg.r);
            let debiased: Vec<_> = inst.obs_sources.par_iter().enumerate().map(|(k, o)| {
                debiased_estimate(o, &crude_cfg, 5, child_seed(rep_seed, 1 + k as u64), format!("s{k}")).unwrap()
            }).collect();
            let nora = nora_transfer(&inst.obs_target, &debiased, cfg.p0, cfg.q0,
                &SelectionConfig::default(), &SelectionConfig::default(),
                &GateConfig::new(cfg.r), &crude_cfg, child_seed(rep_seed, 1000)).unwrap();
            let tonly = baseline_target_only(&inst.obs_target, &crude_cfg).unwrap();
            (nora.gate_u_used_transfer, nora.gate_v_used_transfer,
             relative_error(&nora.theta_hat, &inst.truth_target),
             relative_error(&tonly, &inst.truth_target))
        }).collect();
        let left_pass = outcomes.iter().filter(|o| o.0).count();
        let right_pass = outcomes.iter().filter(|o| o.1).count();
        let nora_mean: f64 = outcomes.iter().map(|o| o.2).sum::<f64>() / 10.0;
        let tonly_mean: f64 = outcomes.iter().map(|o| o.3).sum::<f64>() / 10.0;
        println!("{scenario:?}: left gate pass {left_pass}/10, right pass {right_pass}/10, nora mean {nora_mean:.4}, target-only mean {tonly_mean:.4}");
    }

    // Coverage probe: oracle pipeline at p=q=60, h=0, all type-i, 50 reps.
    let t0 = std::time::Instant::now();
    for (k, n_source, j) in [(12usize, 2500usize, 2usize), (24, 10000, 2)] {
        let mut cfg = GeneratorConfig::scenario_default(Scenario::A);
        cfg.p = 60; cfg.q = 60; cfg.h = 0.0; cfg.k = k;
        cfg.n_source = n_source; cfg.n_target = 2500;
        cfg.source_mix = SourceMix { type_i: 1.0, type_ii: 0.0, type_iii: 0.0, type_iv: 0.0 };
        let hits: usize = (0..50u64).into_par_iter().map(|rep| {
            let rep_seed = child_seed(777, rep);
            let mut c = cfg.clone();
            c.seed = child_seed(rep_seed, 0);
            let inst = generate_instance(&c).unwrap();
            let crude_cfg = CrudeSolverConfig::new(cfg.r);
            let debiased: Vec<_> = inst.obs_sources.par_iter().enumerate().map(|(kk, o)| {
                debiased_estimate(o, &crude_cfg, j, child_seed(rep_seed, 1 + kk as u64), format!("s{kk}")).unwrap()
            }).collect();
            let model = oracle_transfer(&inst.obs_target, &debiased, cfg.p0, cfg.q0).unwrap();
            let mut u = DVector::zeros(60); u[0] = 1.0;
            let mut v = DVector::zeros(60); v[0] = 1.0;
            let ci = bilinear_ci(&model, &inst.obs_target, &BilinearQuery::new(u, v)).unwrap();
            let truth = inst.truth_target[(0, 0)];
            usize::from(ci.ci_lo <= truth && truth <= ci.ci_hi)
        }).sum();
        println!("coverage probe K={k} n_src={n_source} J={j}: {hits}/50 in {:?}", t0.elapsed());
    }
}
