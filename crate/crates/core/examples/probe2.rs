use matcomp_core::completion::{crude_complete, CrudeSolverConfig, StepSize};
use matcomp_core::seed::child_seed;
use matcomp_core::sim::*;

fn main() {
    for (mi, rt, step) in [
        (500usize, 1e-6f64, StepSize::Auto),
        (2000, 1e-8, StepSize::Auto),
        (8000, 1e-10, StepSize::Auto),
        (2000, 1e-8, StepSize::Fixed(0.5)),
    ] {
        let threshold = 0.5 / 30.0;
        let mut hits = 0;
        let mut errs = Vec::new();
        let t0 = std::time::Instant::now();
        for rep in 0..50u64 {
            let mut cfg = GeneratorConfig::scenario_default(Scenario::A);
            cfg.p = 30; cfg.q = 30; cfg.p0 = 4; cfg.q0 = 4; cfg.r = 2;
            cfg.k = 1; cfg.sigma = 0.5; cfg.n_target = 1500; cfg.n_source = 10;
            cfg.seed = child_seed(500, rep);
            let inst = generate_instance(&cfg).unwrap();
            let mut sc = CrudeSolverConfig::new(2);
            sc.max_iters = mi; sc.rel_tol = rt; sc.step_size = step;
            let est = crude_complete(&inst.obs_target, &sc).unwrap();
            let linf = (est - &inst.truth_target).abs().max();
            if linf < threshold { hits += 1; }
            errs.push(linf);
        }
        errs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        println!("iters={mi} rtol={rt:e} step={step:?}: hits {hits}/50 median {:.5} thr {:.5} t={:?}", errs[25], threshold, t0.elapsed());
    }
}
