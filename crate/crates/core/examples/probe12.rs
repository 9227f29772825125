use matcomp_core::completion::{debiased_estimate, CrudeSolverConfig};
use matcomp_core::linalg::{alignment, thin_svd, Subspace};
use matcomp_core::seed::child_seed;
use matcomp_core::sim::*;
use rayon::prelude::*;

fn main() {
    for j in [2usize, 5] {
        for n in [2500usize, 4000] {
            let mut aligns: Vec<f64> = (0..20u64).into_par_iter().map(|rep| {
                let mut cfg = GeneratorConfig::scenario_default(Scenario::A);
                cfg.k = 1; cfg.h = 0.0; cfg.n_source = n;
                cfg.source_mix = SourceMix { type_i: 1.0, type_ii: 0.0, type_iii: 0.0, type_iv: 0.0 };
                cfg.seed = child_seed(900 + j as u64, rep);
                let inst = generate_instance(&cfg).unwrap();
                let d = debiased_estimate(&inst.obs_sources[0], &CrudeSolverConfig::new(3), j, child_seed(901, rep), "s").unwrap();
                let est = Subspace::new(thin_svd(&d.estimate, 3).unwrap().u).unwrap();
                let tru = Subspace::new(thin_svd(&inst.truth_sources[0], 3).unwrap().u).unwrap();
                alignment(&est.projector(), &tru.projector()).unwrap()
            }).collect();
            aligns.sort_by(|a, b| a.partial_cmp(b).unwrap());
            println!("J={j} n={n}: median {:.3} min {:.3}", aligns[10], aligns[0]);
        }
    }
}
