//! Command-line front end: run configs and the `train`, `eval` and
//! `project-demo` commands.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{DataSource, Dataset};
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::linalg::vector::{dot, norm, sub};
use crate::linalg::{dense_kernel_projector, dense_rank, kernel_project, LinearMap};
use crate::metrics::{auroc, ood_scores, regression_bands, softmax_rows, Mat, MetricsRecord};
use crate::net::{jacobian_rows, Batch, LossKind, ModelSpec};
use crate::train::{
    evaluate, posterior_samples, sample_predictions, train_mode, warmup_mle, EpochRecord, Mode, Observer,
    TrainConfig, TrainData,
};
use crate::viking::{estimate_rank, init_kernel_noise, Checkpoint, Posterior};

pub const CHECKPOINT_FILE: &str = "checkpoint.vkck";
pub const LOG_FILE: &str = "train_log.jsonl";
pub const METRICS_FILE: &str = "metrics.json";
pub const EVAL_METRICS_FILE: &str = "eval_metrics.json";
pub const BANDS_FILE: &str = "bands.csv";
pub const CONFIG_FILE: &str = "config.toml";
pub const DEMO_FILE: &str = "project_demo.json";
/// Largest parameter count for which `project-demo` builds the dense oracle.
pub const DEMO_MAX_PARAMS: usize = 5000;

fn default_out() -> PathBuf {
    PathBuf::from("runs/default")
}

/// One TOML file describing a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub mode: Mode,
    pub model: ModelSpec,
    pub data: DataSource,
    #[serde(default)]
    pub train: TrainConfig,
}

fn toml_error(path: &Path, text: &str, e: toml::de::Error) -> Error {
    let line = e
        .span()
        .map_or(0, |s| text[..s.start.min(text.len())].matches('\n').count() as u64 + 1);
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: e.message().to_string(),
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| toml_error(Path::new("<config>"), text, e))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Contract(format!("config does not serialize: {e}")))
    }

    /// Reads a config file. Relative data paths are taken relative to the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg: Self = toml::from_str(&text).map_err(|e| toml_error(path, &text, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.data = resolve_paths(cfg.data, base);
        Ok(cfg)
    }

    /// Every problem with the config, as one error.
    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        if let Err(e) = self.model.validate() {
            v.push(format!("model: {e}"));
        } else {
            v.extend(self.data.violations(&self.model));
        }
        v.extend(self.train.violations());
        let t = &self.train;
        match self.mode {
            Mode::WarmupOnly => {}
            Mode::Posthoc => {
                if !t.learn_sigmas {
                    v.push("mode posthoc needs train.learn_sigmas = true".into());
                }
                if t.sigma_tune_epochs + t.elbo_epochs == 0 {
                    v.push("mode posthoc needs train.sigma_tune_epochs + train.elbo_epochs ≥ 1".into());
                }
            }
            Mode::FullViking => {
                if t.elbo_epochs == 0 {
                    v.push("mode full-viking needs train.elbo_epochs ≥ 1".into());
                }
            }
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }
}

fn resolve_paths(source: DataSource, base: &Path) -> DataSource {
    let fix = |p: PathBuf| if p.is_relative() { base.join(p) } else { p };
    match source {
        DataSource::Csv {
            path,
            target,
            target_kind,
            split,
        } => DataSource::Csv {
            path: fix(path),
            target,
            target_kind,
            split,
        },
        DataSource::Idx { images, labels, split } => DataSource::Idx {
            images: fix(images),
            labels: fix(labels),
            split,
        },
        other => other,
    }
}

/// Reads a standalone data-source file, e.g. the `--ood-data` argument.
pub fn load_data_source(path: &Path) -> Result<DataSource> {
    let text = std::fs::read_to_string(path)?;
    let source: DataSource = toml::from_str(&text).map_err(|e| toml_error(path, &text, e))?;
    Ok(resolve_paths(source, path.parent().unwrap_or(Path::new(""))))
}

/// Writes a checkpoint every `every` epochs.
struct PeriodicCheckpoint<'a> {
    every: Option<usize>,
    out: &'a Path,
    spec: &'a ModelSpec,
    seed: u64,
}

impl Observer for PeriodicCheckpoint<'_> {
    fn on_epoch(&mut self, record: &EpochRecord, posterior: &Posterior) -> Result<()> {
        match self.every {
            Some(k) if record.epoch.is_multiple_of(k) => {
                let path = self.out.join(format!("checkpoint-{:04}.vkck", record.epoch));
                Checkpoint::new(self.spec.clone(), posterior.clone(), self.seed)?.save(&path)
            }
            _ => Ok(()),
        }
    }
}

fn eval_split(
    cfg: &RunConfig,
    posterior: &Posterior,
    data: &Dataset,
    seed: u64,
) -> Result<(MetricsRecord, Vec<crate::viking::PosteriorSample>)> {
    let samples = posterior_samples(&cfg.model, posterior, &data.train, &cfg.train, cfg.train.eval_samples, seed)?;
    let mut metrics = MetricsRecord::default();
    let ev = evaluate(&cfg.model, posterior, &samples, &data.train, cfg.train.predictive)?;
    metrics.extend_prefixed("train.", &ev.metrics);
    if let Some(val) = &data.val {
        let ev = evaluate(&cfg.model, posterior, &samples, val, cfg.train.predictive)?;
        metrics.extend_prefixed("val.", &ev.metrics);
    }
    metrics.insert("sigma_ker", posterior.sigma_ker());
    metrics.insert("sigma_im", posterior.sigma_im());
    Ok((metrics, samples))
}

/// `x, mean, std` rows over the dense grid.
pub fn bands_csv(grid: &Mat, outputs: &[Mat]) -> Result<Vec<u8>> {
    let (mean, std) = if outputs.len() >= 2 {
        let b = regression_bands(outputs)?;
        (b.mean, b.std)
    } else {
        (outputs[0].clone(), Mat::zeros(grid.nrows(), 1))
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Contract(format!("csv write: {e}"));
    w.write_record(["x", "mean", "std"]).map_err(csv_err)?;
    for i in 0..grid.nrows() {
        w.serialize((grid[(i, 0)], mean[(i, 0)], std[(i, 0)])).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Contract(format!("csv write: {e}")))
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub metrics: MetricsRecord,
    pub out: PathBuf,
    pub epochs: usize,
}

/// Trains per the config and writes checkpoint, log, metrics, the effective
/// config and, for 1-D regression data with a grid, the bands file.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainSummary> {
    cfg.validate()?;
    let data = cfg.data.load()?;
    let t = &cfg.train;
    let init = cfg.model.init_params(t.seed);
    let train = TrainData::new(data.train.clone(), data.val.clone());
    let mut obs = PeriodicCheckpoint {
        every: t.checkpoint_every,
        out: &cfg.out,
        spec: &cfg.model,
        seed: t.seed,
    };
    let (posterior, log) = train_mode(&cfg.model, &train, t, &init, cfg.mode, &mut obs)?;
    let (metrics, samples) = eval_split(cfg, &posterior, &data, t.seed)?;

    let bands = match (&data.grid, &cfg.model.loss) {
        (Some(grid), LossKind::GaussianRegression { .. }) => {
            let outputs = sample_predictions(&cfg.model, &posterior, &samples, grid, t.predictive)?;
            Some(bands_csv(grid, &outputs)?)
        }
        _ => None,
    };
    let ckpt = Checkpoint::new(cfg.model.clone(), posterior, t.seed)?;
    write_atomic(&cfg.out.join(CHECKPOINT_FILE), &ckpt.to_bytes())?;
    log.save(&cfg.out.join(LOG_FILE))?;
    write_atomic(&cfg.out.join(METRICS_FILE), &metrics.to_json()?)?;
    write_atomic(&cfg.out.join(CONFIG_FILE), cfg.to_toml()?.as_bytes())?;
    if let Some(bytes) = bands {
        write_atomic(&cfg.out.join(BANDS_FILE), &bytes)?;
    }
    Ok(TrainSummary {
        metrics,
        out: cfg.out.clone(),
        epochs: log.records.len(),
    })
}

fn check_compatible(ckpt: &Checkpoint, model: &ModelSpec, data: &Dataset) -> Result<()> {
    if ckpt.spec.fingerprint() != model.fingerprint() {
        return Err(Error::Incompatible(format!(
            "checkpoint model {:016x} differs from config model {:016x}",
            ckpt.spec.fingerprint(),
            model.fingerprint()
        )));
    }
    if data.train.inputs.ncols() != model.input_dim() {
        return Err(Error::Incompatible(format!(
            "model takes {} inputs, data have {} columns",
            model.input_dim(),
            data.train.inputs.ncols()
        )));
    }
    Ok(())
}

/// Re-draws posterior samples from a saved checkpoint and scores them. With
/// `ood` set, also the AUROC of in-distribution (validation, else train)
/// against OOD variance scores.
pub fn cmd_eval(cfg: &RunConfig, checkpoint: Option<&Path>, ood: Option<&Path>) -> Result<MetricsRecord> {
    cfg.validate()?;
    let default = cfg.out.join(CHECKPOINT_FILE);
    let ckpt = Checkpoint::load(checkpoint.unwrap_or(&default))?;
    let data = cfg.data.load()?;
    check_compatible(&ckpt, &cfg.model, &data)?;
    let posterior = &ckpt.posterior;
    let (mut metrics, samples) = eval_split(cfg, posterior, &data, cfg.train.seed)?;

    if let Some(path) = ood {
        if cfg.model.loss != LossKind::Categorical {
            return Err(Error::Contract("OOD scoring needs a categorical model".into()));
        }
        let raw = load_data_source(path)?.raw().load()?.all()?;
        let mut ood_inputs = raw.inputs;
        if ood_inputs.ncols() != cfg.model.input_dim() {
            return Err(Error::Incompatible(format!(
                "OOD data have {} columns, model takes {}",
                ood_inputs.ncols(),
                cfg.model.input_dim()
            )));
        }
        if let Some(s) = &data.standardizer {
            ood_inputs = s.apply(&ood_inputs);
        }
        let scores = |inputs: &Mat| -> Result<Vec<f64>> {
            let raw = sample_predictions(&cfg.model, posterior, &samples, inputs, cfg.train.predictive)?;
            ood_scores(&raw.iter().map(softmax_rows).collect::<Vec<_>>())
        };
        let in_batch: &Batch = data.val.as_ref().unwrap_or(&data.train);
        let in_scores = scores(&in_batch.inputs)?;
        let out_scores = scores(&ood_inputs)?;
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        metrics.insert("ood.auroc", auroc(&in_scores, &out_scores)?);
        metrics.insert("ood.in_mean_score", mean(&in_scores));
        metrics.insert("ood.out_mean_score", mean(&out_scores));
        metrics.insert("ood.points", out_scores.len() as f64);
    }
    write_atomic(&cfg.out.join(EVAL_METRICS_FILE), &metrics.to_json()?)?;
    Ok(metrics)
}

/// Compares matrix-free kernel projection against the dense SVD projector on
/// the full training Jacobian at the warmup solution.
pub fn cmd_project_demo(cfg: &RunConfig) -> Result<MetricsRecord> {
    cfg.validate()?;
    let d = cfg.model.num_params();
    if d > DEMO_MAX_PARAMS {
        return Err(Error::Refused(format!(
            "project-demo builds a dense {d} × {d} oracle; refusing above D = {DEMO_MAX_PARAMS}"
        )));
    }
    let t = &cfg.train;
    let data = cfg.data.load()?;
    let theta = warmup_mle(&cfg.model, &data.train, &cfg.model.init_params(t.seed), t)?;
    let j = jacobian_rows(&cfg.model, &theta, &data.train, t.jacobian)?;
    let mut rng = ChaCha8Rng::seed_from_u64(t.seed);
    let eps: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
    let cg = t.cg();
    let (ker, report) = kernel_project(&j, &eps, &cg)?;
    let im = sub(&eps, &ker);
    let (twice, _) = kernel_project(&j, &ker, &cg)?;
    let p = dense_kernel_projector(&j);
    let oracle = &p * nalgebra::DVector::from_column_slice(&eps);
    let je = norm(&j.apply(&eps));
    let e2 = dot(&eps, &eps);

    let mut m = MetricsRecord::default();
    m.insert("dim", d as f64);
    m.insert("jacobian_rows", j.rows() as f64);
    m.insert(
        "kernel_residual",
        if je == 0.0 { 0.0 } else { norm(&j.apply(&ker)) / je },
    );
    m.insert("inner_product", dot(&ker, &im).abs() / e2);
    m.insert("idempotence", norm(&sub(&twice, &ker)) / e2.sqrt());
    m.insert(
        "oracle_deviation",
        ker.iter().zip(oracle.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max),
    );
    m.insert("cg_iterations", report.iterations as f64);

    // the minibatch route used in training, for the kernel dimension
    let batches: Vec<Batch> = (0..data.train.len())
        .collect::<Vec<_>>()
        .chunks(t.batch_size)
        .map(|c| data.train.select(c))
        .collect();
    let posterior = Posterior::with_defaults(theta);
    let samples = t.eval_samples.max(2);
    let state = init_kernel_noise(
        &posterior,
        &batches,
        &cfg.model,
        t.jacobian,
        &cg,
        samples,
        t.projection_passes,
        t.gamma,
        ChaCha8Rng::seed_from_u64(t.seed.wrapping_add(1)),
    )?;
    let rank = estimate_rank(state.pairs());
    m.insert("r_hat", rank.r_hat);
    m.insert("r_hat_samples", rank.samples as f64);
    m.insert("svd_kernel_dim", (d - dense_rank(&j)) as f64);
    let alt_dev = (0..samples)
        .map(|s| {
            let e0 = nalgebra::DVector::from_column_slice(state.eps0(s));
            let exact = &p * &e0;
            norm(&sub(state.eps_ker(s), exact.as_slice())) / e0.norm()
        })
        .fold(0.0, f64::max);
    m.insert("alternating_oracle_deviation", alt_dev);
    write_atomic(&cfg.out.join(DEMO_FILE), &m.to_json()?)?;
    Ok(m)
}

#[derive(Debug, Parser)]
#[command(name = "viking", version, about = "Kernel/image variational inference for small networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every command; each overrides the config file.
#[derive(Debug, Clone, Args)]
pub struct Common {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub eval_samples: Option<usize>,
}

impl Common {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.train.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        if let Some(mode) = self.mode {
            cfg.mode = mode;
        }
        if let Some(s) = self.eval_samples {
            cfg.train.eval_samples = s;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train and write checkpoint, log, metrics and bands.
    Train(Common),
    /// Score a saved checkpoint.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Defaults to `<out>/checkpoint.vkck`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Data-source TOML whose inputs are scored as out-of-distribution.
        #[arg(long)]
        ood_data: Option<PathBuf>,
    },
    /// Projection diagnostics against the dense oracle.
    ProjectDemo(Common),
}

fn render(title: &str, m: &MetricsRecord) -> String {
    let mut s = format!("{title}\n");
    for (k, v) in &m.0 {
        let _ = writeln!(s, "  {k:<28} {v:.6}");
    }
    s
}

/// Runs a parsed command line and returns the text to print.
pub fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Train(common) => {
            let cfg = common.resolve()?;
            let summary = cmd_train(&cfg)?;
            Ok(render(
                &format!(
                    "trained {} ({} epochs) -> {}",
                    cfg.mode.name(),
                    summary.epochs,
                    summary.out.display()
                ),
                &summary.metrics,
            ))
        }
        Command::Eval {
            common,
            checkpoint,
            ood_data,
        } => {
            let cfg = common.resolve()?;
            let m = cmd_eval(&cfg, checkpoint.as_deref(), ood_data.as_deref())?;
            Ok(render("evaluation", &m))
        }
        Command::ProjectDemo(common) => {
            let cfg = common.resolve()?;
            Ok(render("projection diagnostics", &cmd_project_demo(&cfg)?))
        }
    }
}
