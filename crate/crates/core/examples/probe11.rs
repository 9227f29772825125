use matcomp_core::completion::{crude_complete, CrudeSolverConfig};
use matcomp_core::seed::child_seed;
use matcomp_core::sim::*;
use rayon::prelude::*;

fn main() {
    for n in [1500usize, 6000] {
        let mut errs: Vec<f64> = (0..50u64).into_par_iter().map(|rep| {
            let mut cfg = GeneratorConfig::scenario_default(Scenario::A);
            cfg.p = 30; cfg.q = 30; cfg.p0 = 4; cfg.q0 = 4; cfg.r = 2;
            cfg.k = 1; cfg.sigma = 0.5; cfg.n_target = n; cfg.n_source = 10;
            cfg.seed = child_seed(500, rep);
            let inst = generate_instance(&cfg).unwrap();
            let est = crude_complete(&inst.obs_target, &CrudeSolverConfig::new(2)).unwrap();
            (est - &inst.truth_target).abs().max()
        }).collect();
        errs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let thr = 0.5 / 30.0;
        println!("n={n}: min {:.5} p10 {:.5} median {:.5} p90 {:.5} max {:.5} | /thr: p90 = {:.3}",
            errs[0], errs[5], errs[25], errs[45], errs[49], errs[45] / thr);
    }
}
