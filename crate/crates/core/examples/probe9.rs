use matcomp_core::completion::{crude_complete, spectral_init, CrudeSolverConfig};
use matcomp_core::seed::child_seed;
use matcomp_core::sim::*;

fn main() {
    let cfg = GeneratorConfig::scenario_default(Scenario::A);
    for rep in 0..20u64 {
        let rep_seed = child_seed(7, rep);
        let mut c = cfg.clone();
        c.seed = child_seed(rep_seed, 0);
        let inst = generate_instance(&c).unwrap();
        let sc = CrudeSolverConfig::new(3);
        let est = crude_complete(&inst.obs_target, &sc).unwrap();
        let err = relative_error(&est, &inst.truth_target);
        if err > 0.15 {
            let init = spectral_init(&inst.obs_target, 3).unwrap();
            let init_err = relative_error(&init, &inst.truth_target);
            // try longer runs and different tolerances
            let mut sc2 = CrudeSolverConfig::new(3);
            sc2.max_iters = 5000; sc2.rel_tol = 1e-10;
            let est2 = crude_complete(&inst.obs_target, &sc2).unwrap();
            let err2 = relative_error(&est2, &inst.truth_target);
            // singular values of the truth
            let sv = matcomp_core::linalg::thin_svd(&inst.truth_target, 3).unwrap().singular_values;
            println!("rep {rep}: err {err:.3} | init err {init_err:.3} | long-run err {err2:.3} | truth sv {:.3} {:.3} {:.3}",
                sv[0], sv[1], sv[2]);
        }
    }
}
