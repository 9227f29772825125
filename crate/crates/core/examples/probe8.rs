use matcomp_core::sim::*;

fn main() {
    for seed in [1u64, 7, 42, 1234, 2024, 31415] {
        let cfg = GeneratorConfig::scenario_default(Scenario::A);
        let methods = [Method::NoraTransfer, Method::TargetOnly, Method::PooledTwoStep];
        let res = run_experiment(&cfg, &methods, 20, seed).unwrap();
        let nora = &res.methods[0];
        let tonly = &res.methods[1];
        let pooled = &res.methods[2];
        let m_t = tonly.mean.unwrap() - nora.mean.unwrap();
        let m_p = pooled.mean.unwrap() - nora.mean.unwrap();
        let se_t = (nora.std_error.unwrap().powi(2) + tonly.std_error.unwrap().powi(2)).sqrt();
        let se_p = (nora.std_error.unwrap().powi(2) + pooled.std_error.unwrap().powi(2)).sqrt();
        println!(
            "seed {seed}: nora {:.4} tonly {:.4} pooled {:.4} | margins {:.1} SE, {:.1} SE",
            nora.mean.unwrap(), tonly.mean.unwrap(), pooled.mean.unwrap(),
            m_t / se_t, m_p / se_p
        );
    }
}
