use matcomp_core::completion::{debiased_estimate, CrudeSolverConfig};
use matcomp_core::inference::{bilinear_ci, BilinearQuery};
use matcomp_core::seed::child_seed;
use matcomp_core::sim::*;
use matcomp_core::transfer::oracle_transfer;
use nalgebra::DVector;
use rayon::prelude::*;

fn main() {
    for (k, n_source, n_target, p0, label) in [
        (24usize, 40000usize, 1000usize, 5usize, "A"),
        (24, 40000, 500, 5, "B"),
        (24, 40000, 1000, 8, "C"),
        (24, 80000, 1000, 5, "D"),
    ] {
        let mut cfg = GeneratorConfig::scenario_default(Scenario::A);
        cfg.p = 60; cfg.q = 60; cfg.h = 0.0; cfg.k = k;
        cfg.p0 = p0; cfg.q0 = p0;
        cfg.n_source = n_source; cfg.n_target = n_target;
        cfg.source_mix = SourceMix { type_i: 1.0, type_ii: 0.0, type_iii: 0.0, type_iv: 0.0 };
        let t0 = std::time::Instant::now();
        let rows: Vec<(f64, f64, bool)> = (0..100u64).into_par_iter().map(|rep| {
            let rep_seed = child_seed(777, rep);
            let mut c = cfg.clone();
            c.seed = child_seed(rep_seed, 0);
            let inst = generate_instance(&c).unwrap();
            let crude_cfg = CrudeSolverConfig::new(cfg.r);
            let debiased: Vec<_> = inst.obs_sources.par_iter().enumerate().map(|(kk, o)| {
                debiased_estimate(o, &crude_cfg, 2, child_seed(rep_seed, 1 + kk as u64), format!("s{kk}")).unwrap()
            }).collect();
            let model = oracle_transfer(&inst.obs_target, &debiased, cfg.p0, cfg.q0).unwrap();
            let mut u = DVector::zeros(60); u[0] = 1.0;
            let mut v = DVector::zeros(60); v[0] = 1.0;
            let ci = bilinear_ci(&model, &inst.obs_target, &BilinearQuery::new(u, v)).unwrap();
            let truth = inst.truth_target[(0, 0)];
            (ci.point - truth, (ci.ci_hi - ci.ci_lo) / 2.0, ci.ci_lo <= truth && truth <= ci.ci_hi)
        }).collect();
        let hits = rows.iter().filter(|r| r.2).count();
        let rms_err: f64 = (rows.iter().map(|r| r.0 * r.0).sum::<f64>() / 100.0).sqrt();
        let mean_hw: f64 = rows.iter().map(|r| r.1).sum::<f64>() / 100.0;
        println!("{label}: cover {hits}/100, rms err {rms_err:.2e}, mean hw {mean_hw:.2e}, sigma_ci {:.2e}, t={:?}",
            mean_hw / 1.96, t0.elapsed());
    }
}
