//! Subcommand implementations.

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use matcomp_core::completion::{
    debiased_estimate, kfold_split, sample_size_warning, CrudeSolverConfig, ObservationSet,
    StepSize,
};
use matcomp_core::inference::{bilinear_ci, BilinearQuery, InferenceResult};
use matcomp_core::io;
use matcomp_core::seed::child_seed;
use matcomp_core::sim::{run_experiment, GeneratorConfig, Method};
use matcomp_core::subspace::{select_rank_from_spectrum, SelectionConfig};
use matcomp_core::transfer::{nora_transfer, oracle_transfer, GateConfig, TransferModel};
use matcomp_core::{Error, Result};

use crate::manifest::{ManifestBuilder, RunManifest};

/// Crude-solver options as they appear in config files (the working rank is
/// supplied separately per use).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CrudeOptions {
    pub max_iters: usize,
    pub step_size: StepSize,
    pub rel_tol: f64,
    pub balance_weight: f64,
}

impl Default for CrudeOptions {
    fn default() -> Self {
        let d = CrudeSolverConfig::new(1);
        Self {
            max_iters: d.max_iters,
            step_size: d.step_size,
            rel_tol: d.rel_tol,
            balance_weight: d.balance_weight,
        }
    }
}

impl CrudeOptions {
    pub fn with_rank(&self, rank: usize) -> CrudeSolverConfig {
        CrudeSolverConfig {
            rank,
            max_iters: self.max_iters,
            step_size: self.step_size,
            rel_tol: self.rel_tol,
            balance_weight: self.balance_weight,
        }
    }
}

fn default_folds() -> usize {
    5
}
fn default_tau() -> f64 {
    0.5
}
fn default_sel_iters() -> usize {
    100
}

/// Configuration file for the `transfer` subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferConfig {
    pub p: usize,
    pub q: usize,
    pub p0: usize,
    pub q0: usize,
    /// Working rank for every source fit.
    pub source_rank: usize,
    /// Target rank; resolved by a spectrum heuristic when omitted.
    #[serde(default)]
    pub target_rank: Option<usize>,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_tau")]
    pub tau_u: f64,
    #[serde(default = "default_tau")]
    pub tau_v: f64,
    /// Gate slacks; default to 0.3 * target_rank when omitted.
    #[serde(default)]
    pub delta_u: Option<f64>,
    #[serde(default)]
    pub delta_v: Option<f64>,
    #[serde(default = "default_sel_iters")]
    pub selection_max_iters: usize,
    #[serde(default)]
    pub debias_target_before_gate: bool,
    #[serde(default)]
    pub crude: CrudeOptions,
}

/// Wrapper for model artifacts: manifest plus payload.
#[derive(Debug, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub manifest: RunManifest,
    pub model: io::ModelJson,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct InferenceArtifact {
    pub manifest: RunManifest,
    pub inference: InferenceJson,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InferenceJson {
    pub point: f64,
    pub sigma_l: f64,
    pub z: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub level: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ExperimentArtifact {
    pub manifest: RunManifest,
    pub result: matcomp_core::sim::ExperimentResult,
}

pub struct CompleteArgs {
    pub obs: PathBuf,
    pub p: usize,
    pub q: usize,
    pub rank: usize,
    pub folds: usize,
    pub out: PathBuf,
    pub seed: u64,
    pub quiet: bool,
}

pub fn cmd_complete(args: CompleteArgs) -> Result<()> {
    let config = serde_json::json!({
        "obs": args.obs.display().to_string(),
        "p": args.p,
        "q": args.q,
        "rank": args.rank,
        "folds": args.folds,
        "seed": args.seed,
        "out": args.out.display().to_string(),
    });
    let mut manifest = ManifestBuilder::new("complete", config);
    manifest.add_input(&args.obs)?;

    let obs = io::read_observations_csv(&args.obs, args.p, args.q)?;
    let cfg = CrudeSolverConfig::new(args.rank);
    if let Some(w) = sample_size_warning(&obs, &cfg) {
        manifest.warn(&w);
    }
    // Surface the fold precondition before doing any work.
    kfold_split(&obs, args.folds, args.seed)?;
    let debiased = debiased_estimate(&obs, &cfg, args.folds, args.seed, "target")?;
    io::write_matrix_csv(&args.out, &debiased.estimate)?;

    for w in manifest.warnings() {
        eprintln!("warning: {w}");
    }
    let manifest = manifest.finish();
    io::write_json(&manifest_path(&args.out), &manifest)?;
    if !args.quiet {
        println!(
            "wrote {} ({}x{}, rank {}, n {})",
            args.out.display(),
            args.p,
            args.q,
            args.rank,
            debiased.n
        );
    }
    Ok(())
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferMode {
    Oracle,
    Nora,
}

pub struct TransferArgs {
    pub target: PathBuf,
    pub sources: Vec<PathBuf>,
    pub mode: TransferMode,
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
    pub quiet: bool,
}

/// Resolves an omitted target rank: debias the target at a generous working
/// rank and apply the eigenvalue-ratio rule to its singular spectrum. Falls
/// back to 3 when the probe cannot run.
fn resolve_target_rank(
    obs: &ObservationSet,
    cfg: &TransferConfig,
    seed: u64,
) -> usize {
    let work = cfg.p.min(cfg.q).saturating_sub(1).min(10).max(1);
    let probe = cfg.crude.with_rank(work);
    let spectrum = debiased_estimate(obs, &probe, cfg.folds, seed, "target-rank-probe")
        .and_then(|d| matcomp_core::linalg::thin_svd(&d.estimate, (work + 1).min(cfg.p.min(cfg.q))));
    match spectrum {
        Ok(svd) => {
            let values: Vec<f64> = svd.singular_values.iter().copied().collect();
            select_rank_from_spectrum(&values, work.min(values.len() - 1)).unwrap_or(3)
        }
        Err(_) => 3,
    }
}

pub fn cmd_transfer(args: TransferArgs) -> Result<()> {
    let cfg: TransferConfig = io::read_json(&args.config)?;
    let mode_label = match args.mode {
        TransferMode::Oracle => "oracle",
        TransferMode::Nora => "nora",
    };
    let config_echo = serde_json::json!({
        "target": args.target.display().to_string(),
        "sources": args.sources.iter().map(|s| s.display().to_string()).collect::<Vec<_>>(),
        "mode": mode_label,
        "seed": args.seed,
        "settings": serde_json::to_value(&cfg)?,
    });
    let mut manifest = ManifestBuilder::new("transfer", config_echo.clone());
    manifest.add_input(&args.config)?;
    manifest.add_input(&args.target)?;
    for s in &args.sources {
        manifest.add_input(s)?;
    }

    let target = io::read_observations_csv(&args.target, cfg.p, cfg.q)?;
    let source_cfg = cfg.crude.with_rank(cfg.source_rank);
    let mut debiased = Vec::with_capacity(args.sources.len());
    for (k, path) in args.sources.iter().enumerate() {
        let obs = io::read_observations_csv(path, cfg.p, cfg.q)?;
        if let Some(w) = sample_size_warning(&obs, &source_cfg) {
            manifest.warn(format!("{}: {w}", path.display()));
        }
        let label = path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| format!("source-{}", k + 1));
        debiased.push(debiased_estimate(
            &obs,
            &source_cfg,
            cfg.folds,
            child_seed(args.seed, 1 + k as u64),
            label,
        )?);
    }

    let model = match args.mode {
        TransferMode::Oracle => {
            if debiased.is_empty() {
                return Err(Error::InvalidInput(
                    "oracle transfer requires at least one source".into(),
                ));
            }
            oracle_transfer(&target, &debiased, cfg.p0, cfg.q0)?
        }
        TransferMode::Nora => {
            let r0 = match cfg.target_rank {
                Some(r) => r,
                None => resolve_target_rank(&target, &cfg, child_seed(args.seed, 900)),
            };
            if debiased.is_empty() {
                manifest.warn("no sources supplied: gate falls back to target-only estimation");
            }
            let sel_u = SelectionConfig {
                tau: cfg.tau_u,
                max_iters: cfg.selection_max_iters,
                ..Default::default()
            };
            let sel_v = SelectionConfig {
                tau: cfg.tau_v,
                max_iters: cfg.selection_max_iters,
                ..Default::default()
            };
            let gate = GateConfig {
                delta_u: cfg.delta_u.unwrap_or(0.3 * r0 as f64),
                delta_v: cfg.delta_v.unwrap_or(0.3 * r0 as f64),
                target_rank: r0,
                debias_target: cfg.debias_target_before_gate,
                debias_folds: cfg.folds,
            };
            let model = nora_transfer(
                &target,
                &debiased,
                cfg.p0,
                cfg.q0,
                &sel_u,
                &sel_v,
                &gate,
                &cfg.crude.with_rank(r0),
                child_seed(args.seed, 0),
            )?;
            if !model.gate_u_used_transfer && !model.gate_v_used_transfer && !debiased.is_empty() {
                manifest.warn(
                    "both gates fell back to the target's own subspaces (no usable transfer)",
                );
            }
            model
        }
    };

    for w in manifest.warnings() {
        eprintln!("warning: {w}");
    }
    let artifact = ModelArtifact {
        manifest: manifest.finish(),
        model: io::model_to_json(&model, config_echo),
    };
    io::write_json(&args.out, &artifact)?;
    if !args.quiet {
        println!("{}", transfer_summary(&model, &target));
    }
    Ok(())
}

fn transfer_summary(model: &TransferModel, target: &ObservationSet) -> String {
    let ss = target.response_sum_sq();
    let rel = if ss > 0.0 { (model.residual_ss / ss).sqrt() } else { 0.0 };
    format!(
        "relative residual {rel:.4}, p0 {}, q0 {}, |I_U| {}, |I_V| {}, gates ({}, {})",
        model.u_hat.dim(),
        model.v_hat.dim(),
        model.selected_u.len(),
        model.selected_v.len(),
        model.gate_u_used_transfer,
        model.gate_v_used_transfer,
    )
}

pub struct InferArgs {
    pub model: PathBuf,
    pub obs: PathBuf,
    pub u_spec: String,
    pub v_spec: String,
    pub level: f64,
    pub out: Option<PathBuf>,
    pub json: bool,
    pub quiet: bool,
}

fn parse_vector_spec(spec: &str, len: usize, what: &str) -> Result<DVector<f64>> {
    if let Some(idx) = spec.strip_prefix("e:") {
        let i: usize = idx.parse().map_err(|_| {
            Error::InvalidInput(format!("{what}: expected e:<index>, got {spec:?}"))
        })?;
        if i >= len {
            return Err(Error::InvalidInput(format!(
                "{what}: basis index {i} out of range for dimension {len}"
            )));
        }
        let mut v = DVector::zeros(len);
        v[i] = 1.0;
        Ok(v)
    } else {
        let v = io::read_vector_csv(Path::new(spec))?;
        if v.len() != len {
            return Err(Error::InvalidInput(format!(
                "{what}: vector file has length {} but the model expects {len}",
                v.len()
            )));
        }
        Ok(v)
    }
}

pub fn cmd_infer(args: InferArgs) -> Result<()> {
    if !(args.level > 0.0 && args.level < 1.0) {
        return Err(Error::InvalidInput(format!(
            "confidence level {} out of range (0, 1)",
            args.level
        )));
    }
    let config = serde_json::json!({
        "model": args.model.display().to_string(),
        "obs": args.obs.display().to_string(),
        "u": args.u_spec,
        "v": args.v_spec,
        "level": args.level,
    });
    let mut manifest = ManifestBuilder::new("infer", config);
    manifest.add_input(&args.model)?;
    manifest.add_input(&args.obs)?;

    let artifact: ModelArtifact = io::read_json(&args.model)?;
    let model = io::model_from_json(&artifact.model)?;
    let obs = io::read_observations_csv(&args.obs, artifact.model.p, artifact.model.q)?;
    let u = parse_vector_spec(&args.u_spec, artifact.model.p, "u")?;
    let v = parse_vector_spec(&args.v_spec, artifact.model.q, "v")?;
    let query = BilinearQuery::new(u, v).with_level(args.level);
    let result: InferenceResult = bilinear_ci(&model, &obs, &query)?;

    let json = InferenceJson {
        point: result.point,
        sigma_l: result.sigma_l,
        z: result.z,
        ci_lo: result.ci_lo,
        ci_hi: result.ci_hi,
        level: args.level,
    };
    if args.json {
        println!("{}", serde_json::to_string_pretty(&json)?);
    } else if !args.quiet {
        println!(
            "point {:.6}, sigma_l {:.6}, half-width {:.6} (z {:.6}), {}% CI [{:.6}, {:.6}]",
            json.point,
            json.sigma_l,
            json.z * json.sigma_l / (obs.n() as f64).sqrt(),
            json.z,
            args.level * 100.0,
            json.ci_lo,
            json.ci_hi
        );
    }
    if let Some(out) = &args.out {
        let artifact = InferenceArtifact { manifest: manifest.finish(), inference: json };
        io::write_json(out, &artifact)?;
    }
    Ok(())
}

/// Configuration file for the `simulate` subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub generator: GeneratorConfig,
    pub methods: Vec<String>,
    pub reps: usize,
}

pub struct SimulateArgs {
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
    pub quiet: bool,
}

pub fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let cfg: SimulateConfig = io::read_json(&args.config)?;
    let methods: Vec<Method> =
        cfg.methods.iter().map(|m| m.parse::<Method>()).collect::<Result<_>>()?;

    let config_echo = serde_json::json!({
        "config": args.config.display().to_string(),
        "seed": args.seed,
        "settings": serde_json::to_value(&cfg)?,
    });
    let mut manifest = ManifestBuilder::new("simulate", config_echo);
    manifest.add_input(&args.config)?;

    let result = run_experiment(&cfg.generator, &methods, cfg.reps, args.seed)?;
    if !result.failures.is_empty() {
        manifest.warn(format!(
            "{} replication(s) failed and were excluded from the means",
            result.failures.len()
        ));
    }

    if !args.quiet {
        for m in &result.methods {
            match (m.mean, m.std_error) {
                (Some(mean), Some(se)) => println!(
                    "{}: mean relative error {mean:.4} (se {se:.4}, {} reps, {} failed)",
                    m.method.label(),
                    cfg.reps - m.failed,
                    m.failed
                ),
                (Some(mean), None) => {
                    println!("{}: mean relative error {mean:.4} (1 rep)", m.method.label())
                }
                _ => println!("{}: all replications failed", m.method.label()),
            }
        }
    }
    for w in manifest.warnings() {
        eprintln!("warning: {w}");
    }

    io::write_experiment_csv(&args.out.with_extension("csv"), &result)?;
    let artifact = ExperimentArtifact { manifest: manifest.finish(), result };
    io::write_json(&args.out, &artifact)?;
    Ok(())
}
