use matcomp_core::completion::{debiased_estimate, CrudeSolverConfig};
use matcomp_core::inference::{bilinear_ci, BilinearQuery};
use matcomp_core::seed::child_seed;
use matcomp_core::sim::*;
use matcomp_core::transfer::oracle_transfer;
use nalgebra::DVector;
use rayon::prelude::*;

fn main() {
    for (k, n_source, n_target, j, label) in [
        (24usize, 10000usize, 1000usize, 2usize, "n0=1000"),
        (24, 40000, 2500, 2, "nsrc=40k"),
        (48, 10000, 2500, 2, "K=48"),
        (24, 40000, 1000, 2, "nsrc=40k,n0=1000"),
    ] {
        let mut cfg = GeneratorConfig::scenario_default(Scenario::A);
        cfg.p = 60; cfg.q = 60; cfg.h = 0.0; cfg.k = k;
        cfg.n_source = n_source; cfg.n_target = n_target;
        cfg.source_mix = SourceMix { type_i: 1.0, type_ii: 0.0, type_iii: 0.0, type_iv: 0.0 };
        let t0 = std::time::Instant::now();
        let rows: Vec<(f64, f64, bool)> = (0..50u64).into_par_iter().map(|rep| {
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
            (ci.point - truth, (ci.ci_hi - ci.ci_lo) / 2.0, ci.ci_lo <= truth && truth <= ci.ci_hi)
        }).collect();
        let hits = rows.iter().filter(|r| r.2).count();
        let mean_err: f64 = rows.iter().map(|r| r.0).sum::<f64>() / 50.0;
        let rms_err: f64 = (rows.iter().map(|r| r.0 * r.0).sum::<f64>() / 50.0).sqrt();
        let mean_hw: f64 = rows.iter().map(|r| r.1).sum::<f64>() / 50.0;
        println!("{label}: cover {hits}/50, mean signed err {mean_err:.2e}, rms err {rms_err:.2e}, mean halfwidth {mean_hw:.2e}, t={:?}", t0.elapsed());
    }
}
