use matcomp_core::completion::{crude_complete, CrudeSolverConfig};
use matcomp_core::seed::child_seed;
use matcomp_core::sim::*;
use nalgebra::DMatrix;

// Exact ALS (block least squares per row, no balance term) as a solver-quality
// cross-check: is the GD solution at the LS optimum?
fn als(obs: &matcomp_core::completion::ObservationSet, r: usize, sweeps: usize) -> DMatrix<f64> {
    let (p, q) = (obs.p(), obs.q());
    let init = matcomp_core::completion::spectral_init(obs, r).unwrap();
    let svd = matcomp_core::linalg::thin_svd(&init, r).unwrap();
    let mut a = DMatrix::<f64>::zeros(p, r);
    let mut b = DMatrix::<f64>::zeros(q, r);
    for j in 0..r {
        let s = svd.singular_values[j].sqrt();
        for i in 0..p { a[(i,j)] = svd.u[(i,j)]*s; }
        for i in 0..q { b[(i,j)] = svd.v[(i,j)]*s; }
    }
    // group observations by row and by column
    let mut by_row: Vec<Vec<(usize,f64)>> = vec![Vec::new(); p];
    let mut by_col: Vec<Vec<(usize,f64)>> = vec![Vec::new(); q];
    for s in obs.samples() {
        by_row[s.a].push((s.b, s.y));
        by_col[s.b].push((s.a, s.y));
    }
    for _ in 0..sweeps {
        for i in 0..p {
            if by_row[i].is_empty() { continue; }
            let mut g = DMatrix::<f64>::zeros(r, r);
            let mut rhs = nalgebra::DVector::<f64>::zeros(r);
            for &(bj, y) in &by_row[i] {
                for s in 0..r { for t in 0..r { g[(s,t)] += b[(bj,s)]*b[(bj,t)]; } rhs[s] += b[(bj,s)]*y; }
            }
            for s in 0..r { g[(s,s)] += 1e-9; }
            if let Some(sol) = g.lu().solve(&rhs) { for s in 0..r { a[(i,s)] = sol[s]; } }
        }
        for j in 0..q {
            if by_col[j].is_empty() { continue; }
            let mut g = DMatrix::<f64>::zeros(r, r);
            let mut rhs = nalgebra::DVector::<f64>::zeros(r);
            for &(ai, y) in &by_col[j] {
                for s in 0..r { for t in 0..r { g[(s,t)] += a[(ai,s)]*a[(ai,t)]; } rhs[s] += a[(ai,s)]*y; }
            }
            for s in 0..r { g[(s,s)] += 1e-9; }
            if let Some(sol) = g.lu().solve(&rhs) { for s in 0..r { b[(j,s)] = sol[s]; } }
        }
    }
    &a * b.transpose()
}

fn main() {
    let threshold = 0.5 / 30.0;
    for n in [1500usize, 6000] {
        let mut gd_hits = 0; let mut als_hits = 0;
        let mut gd_err = Vec::new(); let mut als_err = Vec::new();
        for rep in 0..50u64 {
            let mut cfg = GeneratorConfig::scenario_default(Scenario::A);
            cfg.p = 30; cfg.q = 30; cfg.p0 = 4; cfg.q0 = 4; cfg.r = 2;
            cfg.k = 1; cfg.sigma = 0.5; cfg.n_target = n; cfg.n_source = 10;
            cfg.seed = child_seed(500, rep);
            let inst = generate_instance(&cfg).unwrap();
            let gd = crude_complete(&inst.obs_target, &CrudeSolverConfig::new(2)).unwrap();
            let al = als(&inst.obs_target, 2, 30);
            let e1 = (gd - &inst.truth_target).abs().max();
            let e2 = (al - &inst.truth_target).abs().max();
            if e1 < threshold { gd_hits += 1; }
            if e2 < threshold { als_hits += 1; }
            gd_err.push(e1); als_err.push(e2);
        }
        gd_err.sort_by(|a,b| a.partial_cmp(b).unwrap());
        als_err.sort_by(|a,b| a.partial_cmp(b).unwrap());
        println!("n={n}: GD hits {gd_hits}/50 median {:.5} | ALS hits {als_hits}/50 median {:.5} | thr {threshold:.5}", gd_err[25], als_err[25]);
    }
}
