use matcomp_core::sim::*;

fn main() {
    for scenario in [Scenario::A, Scenario::C, Scenario::B] {
        let cfg = GeneratorConfig::scenario_default(scenario);
        let methods = [Method::NoraTransfer, Method::TargetOnly, Method::PooledTwoStep];
        let t0 = std::time::Instant::now();
        let res = run_experiment(&cfg, &methods, 20, 2024).unwrap();
        print!("{scenario:?} ({:?}):", t0.elapsed());
        for m in &res.methods {
            print!("  {} mean {:.4} se {:.4} fail {}", m.method.label(), m.mean.unwrap(), m.std_error.unwrap(), m.failed);
        }
        println!();
        let nora = &res.methods[0];
        let tonly = &res.methods[1];
        let pooled = &res.methods[2];
        let margin_t = tonly.mean.unwrap() - nora.mean.unwrap();
        let margin_p = pooled.mean.unwrap() - nora.mean.unwrap();
        let pooled_se_t = (nora.std_error.unwrap().powi(2) + tonly.std_error.unwrap().powi(2)).sqrt();
        let pooled_se_p = (nora.std_error.unwrap().powi(2) + pooled.std_error.unwrap().powi(2)).sqrt();
        println!("   margin vs target-only: {margin_t:.4} = {:.1} pooled SE; vs pooled: {margin_p:.4} = {:.1} pooled SE",
            margin_t / pooled_se_t, margin_p / pooled_se_p);
    }
}
