//! Maximum-likelihood warmup, post-hoc σ tuning and full β-ELBO training.

mod adam;
mod config;
mod log;
mod predict;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use adam::{adam_step, Adam, BETA1, BETA2, EPSILON};
pub use config::TrainConfig;
pub use log::{EpochRecord, Phase, SplitScore, TrainLog};
pub use predict::{evaluate, posterior_samples, sample_predictions, Evaluation};

use crate::error::{Error, Result};
use crate::linalg::vector::dot;
use crate::net::{forward, jacobian_rows, mean_nll_grad, per_datum_losses, Batch, LossKind, ModelSpec, ParamVector, Targets};
use crate::viking::{
    compose, draw_all, elbo_gradient, estimate_rank, init_kernel_noise, kl, ElboContext, Posterior, PosteriorSample,
    ProjectionState,
};

/// Training split plus an optional validation split.
#[derive(Debug, Clone)]
pub struct TrainData {
    pub train: Batch,
    pub val: Option<Batch>,
}

impl TrainData {
    pub fn new(train: Batch, val: Option<Batch>) -> Self {
        Self { train, val }
    }
}

/// Hooks into the training loop. `on_step` sees the parameters after every
/// optimizer step: `θ` during warmup, `[θ̂, log α, log σ_im]` afterwards.
pub trait Observer {
    fn on_step(&mut self, _phase: Phase, _params: &[f64]) {}

    fn on_epoch(&mut self, _record: &EpochRecord, _posterior: &Posterior) -> Result<()> {
        Ok(())
    }
}

impl Observer for () {}

/// Records every optimizer step.
#[derive(Debug, Default)]
pub struct Trajectory(pub Vec<(Phase, Vec<f64>)>);

impl Observer for Trajectory {
    fn on_step(&mut self, phase: Phase, params: &[f64]) {
        self.0.push((phase, params.to_vec()));
    }
}

// Separate ChaCha streams: batch order depends on the seed alone, so every
// phase (and every mode) sees the same shuffles.
const SHUFFLE_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;
pub(crate) const EVAL_STREAM: u64 = 3;

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn epoch_batches(train: &Batch, batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Batch> {
    let mut idx: Vec<usize> = (0..train.len()).collect();
    idx.shuffle(rng);
    idx.chunks(batch_size).map(|c| train.select(c)).collect()
}

/// Batches in data order, used where no shuffle is involved.
pub(crate) fn ordered_batches(train: &Batch, batch_size: usize) -> Vec<Batch> {
    let idx: Vec<usize> = (0..train.len()).collect();
    idx.chunks(batch_size).map(|c| train.select(c)).collect()
}

/// NLL and accuracy or RMSE of a single parameter vector.
pub fn point_score(spec: &ModelSpec, params: &[f64], batch: &Batch) -> Result<SplitScore> {
    let losses = per_datum_losses(spec, params, batch)?;
    let nll = losses.iter().sum::<f64>() / losses.len() as f64;
    let out = forward(spec, params, &batch.inputs)?;
    let (accuracy, rmse) = match (&batch.targets, &spec.loss) {
        (Targets::Labels(y), LossKind::Categorical) => {
            let hits = out
                .row_iter()
                .zip(y)
                .filter(|(row, &label)| {
                    let best = (0..row.len()).fold(0, |b, i| if row[i] > row[b] { i } else { b });
                    best == label
                })
                .count();
            (Some(hits as f64 / y.len() as f64), None)
        }
        (Targets::Values(y), _) => {
            let mse = (&out - y).norm_squared() / y.len() as f64;
            (None, Some(mse.sqrt()))
        }
        _ => return Err(Error::Shape("targets do not match the loss".into())),
    };
    Ok(SplitScore { nll, accuracy, rmse })
}

fn training_error(phase: Phase, epoch: usize, step: usize) -> impl Fn(Error) -> Error {
    move |e| Error::Training {
        phase: phase.name(),
        epoch,
        step,
        reason: e.to_string(),
    }
}

struct EpochStats {
    elbo: f64,
    overlap: f64,
    cg_residual: Option<f64>,
    steps: usize,
}

impl EpochStats {
    fn new() -> Self {
        Self {
            elbo: 0.0,
            overlap: 0.0,
            cg_residual: None,
            steps: 0,
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn record(
    spec: &ModelSpec,
    data: (&Batch, Option<&Batch>),
    posterior: &Posterior,
    phase: Phase,
    phase_epoch: usize,
    stats: Option<(&EpochStats, f64)>,
    started: Instant,
) -> Result<EpochRecord> {
    let train = point_score(spec, &posterior.theta_hat, data.0)?;
    let val = data.1.map(|v| point_score(spec, &posterior.theta_hat, v)).transpose()?;
    let d = posterior.dim();
    let (elbo, kl_value, r_hat, im_overlap, cg_residual) = match stats {
        Some((s, r)) => {
            let steps = s.steps.max(1) as f64;
            let k = kl(posterior, r, d).ok().filter(|k| k.is_finite());
            (Some(s.elbo / steps), k, Some(r), Some(s.overlap / steps), s.cg_residual)
        }
        None => (None, None, None, None, None),
    };
    Ok(EpochRecord {
        epoch: 0,
        phase,
        phase_epoch,
        train,
        val,
        elbo,
        kl: kl_value,
        r_hat,
        log_alpha: posterior.log_alpha,
        log_sigma_im: posterior.log_sigma_im,
        sigma_ker: posterior.sigma_ker(),
        sigma_im: posterior.sigma_im(),
        im_overlap,
        cg_residual,
        wall_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Adam on the mean negative log-likelihood for `cfg.warmup_epochs` epochs
/// at `cfg.warmup_lr`.
pub fn warmup_mle(spec: &ModelSpec, train: &Batch, init: &ParamVector, cfg: &TrainConfig) -> Result<ParamVector> {
    let mut log = TrainLog::default();
    warmup_phase(spec, (train, None), init, cfg, &mut log, &mut ())
}

fn warmup_phase(
    spec: &ModelSpec,
    data: (&Batch, Option<&Batch>),
    init: &ParamVector,
    cfg: &TrainConfig,
    log: &mut TrainLog,
    obs: &mut dyn Observer,
) -> Result<ParamVector> {
    spec.check_params(init)?;
    let mut theta = init.clone();
    let mut adam = Adam::new(theta.len(), cfg.warmup_lr, cfg.clip);
    let mut shuffle = stream_rng(cfg.seed, SHUFFLE_STREAM);
    for epoch in 1..=cfg.warmup_epochs {
        let started = Instant::now();
        for (step, batch) in epoch_batches(data.0, cfg.batch_size, &mut shuffle).iter().enumerate() {
            let (_, grad) = mean_nll_grad(spec, &theta, batch).map_err(training_error(Phase::Warmup, epoch, step))?;
            adam.step(&mut theta, &grad);
            if !theta.is_finite() {
                return Err(training_error(Phase::Warmup, epoch, step)(Error::Contract(
                    "parameters became non-finite".into(),
                )));
            }
            obs.on_step(Phase::Warmup, &theta);
        }
        let point = Posterior::point(theta.clone());
        let rec = record(spec, data, &point, Phase::Warmup, epoch, None, started)?;
        log.push(rec);
        obs.on_epoch(log.last().expect("just pushed"), &point)?;
    }
    Ok(theta)
}

/// Tunes only `(log α, log σ_im)` around a frozen `θ̂` for `epochs` epochs.
///
/// Kernel directions are projected once at `θ̂` and reused for every step.
pub fn posthoc_tune_sigmas(
    spec: &ModelSpec,
    train: &Batch,
    posterior: Posterior,
    cfg: &TrainConfig,
    epochs: usize,
) -> Result<(Posterior, TrainLog)> {
    let mut log = TrainLog::default();
    let p = sigma_phase(spec, (train, None), posterior, cfg, epochs, &mut log, &mut ())?;
    Ok((p, log))
}

fn sigma_phase(
    spec: &ModelSpec,
    data: (&Batch, Option<&Batch>),
    mut posterior: Posterior,
    cfg: &TrainConfig,
    epochs: usize,
    log: &mut TrainLog,
    obs: &mut dyn Observer,
) -> Result<Posterior> {
    if epochs == 0 {
        return Ok(posterior);
    }
    spec.check_params(&posterior.theta_hat)?;
    let d = posterior.dim();
    let cg = cfg.cg();
    let mut shuffle = stream_rng(cfg.seed, SHUFFLE_STREAM);
    let mut noise = stream_rng(cfg.seed, NOISE_STREAM);
    let partition = epoch_batches(data.0, cfg.batch_size, &mut stream_rng(cfg.seed, SHUFFLE_STREAM));
    let state = init_kernel_noise(
        &posterior,
        &partition,
        spec,
        cfg.jacobian,
        &cg,
        cfg.samples,
        cfg.projection_passes,
        cfg.gamma,
        ChaCha8Rng::from_rng(&mut noise),
    )
    .map_err(training_error(Phase::SigmaTune, 0, 0))?;
    let rank = estimate_rank(state.pairs()).clamped(d);
    let directions: Vec<(Vec<f64>, Vec<f64>)> = draw_all(&posterior, &state)
        .into_iter()
        .map(|s| (s.eps_ker, s.eps_im))
        .collect();
    let overlap = mean_overlap(&state, &directions);
    let ctx = ElboContext {
        spec,
        rank,
        beta: cfg.beta,
        n_total: data.0.len(),
        predictive: cfg.predictive,
    };
    let mask = vec![cfg.learn_sigmas; 2];
    let mut adam = Adam::new(2, cfg.elbo_lr, cfg.clip).with_mask(mask);
    let mut sigmas = [posterior.log_alpha, posterior.log_sigma_im];
    for epoch in 1..=epochs {
        let started = Instant::now();
        let mut stats = EpochStats::new();
        stats.overlap = overlap;
        for (step, batch) in epoch_batches(data.0, cfg.batch_size, &mut shuffle).iter().enumerate() {
            let err = training_error(Phase::SigmaTune, epoch, step);
            let samples: Vec<PosteriorSample> = directions
                .iter()
                .map(|(k, i)| compose(&posterior, k.clone(), i.clone()))
                .collect();
            let (est, grad) = elbo_gradient(&posterior, &samples, batch, &ctx).map_err(&err)?;
            if !est.value.is_finite() {
                return Err(err(Error::Contract(format!("ELBO estimate is {}", est.value))));
            }
            stats.elbo += est.value;
            stats.steps += 1;
            adam.step(&mut sigmas, &grad[d..]);
            posterior.log_alpha = sigmas[0];
            posterior.log_sigma_im = sigmas[1];
            obs.on_step(Phase::SigmaTune, &sigmas);
        }
        stats.overlap *= stats.steps as f64;
        let rec = record(spec, data, &posterior, Phase::SigmaTune, epoch, Some((&stats, rank)), started)?;
        log.push(rec);
        obs.on_epoch(log.last().expect("just pushed"), &posterior)?;
    }
    Ok(posterior)
}

fn mean_overlap(state: &ProjectionState, directions: &[(Vec<f64>, Vec<f64>)]) -> f64 {
    let total: f64 = directions
        .iter()
        .enumerate()
        .map(|(s, (k, i))| {
            let e0 = state.eps0(s);
            dot(k, i).abs() / dot(e0, e0).max(f64::MIN_POSITIVE)
        })
        .sum();
    total / directions.len() as f64
}

/// Full VIKING run: MLE warmup, σ-only tuning, then β-ELBO epochs over
/// `[θ̂, log α, log σ_im]` with one shared Adam instance.
pub fn train_viking(
    spec: &ModelSpec,
    data: &TrainData,
    cfg: &TrainConfig,
    init: &ParamVector,
) -> Result<(Posterior, TrainLog)> {
    train_viking_observed(spec, data, cfg, init, &mut ())
}

pub fn train_viking_observed(
    spec: &ModelSpec,
    data: &TrainData,
    cfg: &TrainConfig,
    init: &ParamVector,
    obs: &mut dyn Observer,
) -> Result<(Posterior, TrainLog)> {
    train_mode(spec, data, cfg, init, Mode::FullViking, obs)
}

/// Which phases a run goes through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// MLE only; the result is a point posterior.
    WarmupOnly,
    /// MLE, then σ tuning around the frozen mean for
    /// `sigma_tune_epochs + elbo_epochs` epochs.
    Posthoc,
    #[default]
    FullViking,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::WarmupOnly => "warmup-only",
            Mode::Posthoc => "posthoc",
            Mode::FullViking => "full-viking",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "warmup-only" => Ok(Mode::WarmupOnly),
            "posthoc" => Ok(Mode::Posthoc),
            "full-viking" => Ok(Mode::FullViking),
            _ => Err(Error::Contract(format!(
                "unknown mode {s:?}; expected warmup-only, posthoc or full-viking"
            ))),
        }
    }
}

pub fn train_mode(
    spec: &ModelSpec,
    data: &TrainData,
    cfg: &TrainConfig,
    init: &ParamVector,
    mode: Mode,
    obs: &mut dyn Observer,
) -> Result<(Posterior, TrainLog)> {
    let violations = cfg.violations();
    if !violations.is_empty() {
        return Err(Error::Config(violations));
    }
    data.train.check(spec)?;
    if let Some(v) = &data.val {
        v.check(spec)?;
    }
    let split = (&data.train, data.val.as_ref());
    let mut log = TrainLog::default();
    let theta = warmup_phase(spec, split, init, cfg, &mut log, obs)?;
    if mode == Mode::WarmupOnly {
        return Ok((Posterior::point(theta), log));
    }
    let posterior = Posterior::new(theta, cfg.init_log_alpha, cfg.init_log_sigma_im);
    let tune = match (cfg.learn_sigmas, mode) {
        (false, _) => 0,
        (true, Mode::Posthoc) => cfg.sigma_tune_epochs + cfg.elbo_epochs,
        (true, _) => cfg.sigma_tune_epochs,
    };
    let posterior = sigma_phase(spec, split, posterior, cfg, tune, &mut log, obs)?;
    if mode == Mode::Posthoc {
        return Ok((posterior, log));
    }
    let posterior = elbo_phase(spec, split, posterior, cfg, &mut log, obs)?;
    Ok((posterior, log))
}

fn elbo_phase(
    spec: &ModelSpec,
    data: (&Batch, Option<&Batch>),
    posterior: Posterior,
    cfg: &TrainConfig,
    log: &mut TrainLog,
    obs: &mut dyn Observer,
) -> Result<Posterior> {
    let d = posterior.dim();
    let cg = cfg.cg();
    let mut params: Vec<f64> = posterior.theta_hat.to_vec();
    params.push(posterior.log_alpha);
    params.push(posterior.log_sigma_im);
    let unpack = |p: &[f64]| Posterior::new(ParamVector::new(p[..d].to_vec()), p[d], p[d + 1]);
    let mut mask = vec![true; d + 2];
    mask[d] = cfg.learn_sigmas;
    mask[d + 1] = cfg.learn_sigmas;
    let mut adam = Adam::new(d + 2, cfg.elbo_lr, cfg.clip).with_mask(mask);
    let mut shuffle = stream_rng(cfg.seed, SHUFFLE_STREAM);
    let mut noise = stream_rng(cfg.seed, NOISE_STREAM);
    let mut rank: Option<f64> = None;
    let mut current = posterior;

    for epoch in 1..=cfg.elbo_epochs {
        let started = Instant::now();
        let batches = epoch_batches(data.0, cfg.batch_size, &mut shuffle);
        let mut state = init_kernel_noise(
            &current,
            &batches,
            spec,
            cfg.jacobian,
            &cg,
            cfg.samples,
            cfg.projection_passes,
            cfg.gamma,
            ChaCha8Rng::from_rng(&mut noise),
        )
        .map_err(training_error(Phase::Elbo, epoch, 0))?;
        // the pre-pass pairs are the ones where ε_ker is the projection of ε
        let fresh = estimate_rank(state.pairs()).clamped(d);
        let r = match rank {
            None => fresh,
            Some(prev) => cfg.rank_smoothing * prev + (1.0 - cfg.rank_smoothing) * fresh,
        };
        rank = Some(r);
        let ctx = ElboContext {
            spec,
            rank: r,
            beta: cfg.beta,
            n_total: data.0.len(),
            predictive: cfg.predictive,
        };
        let mut stats = EpochStats::new();
        for (step, batch) in batches.iter().enumerate() {
            let err = training_error(Phase::Elbo, epoch, step);
            let j = jacobian_rows(spec, &current.theta_hat, batch, cfg.jacobian).map_err(&err)?;
            let reports = state.step(&j, &cg).map_err(&err)?;
            for rep in &reports {
                let worst = stats.cg_residual.unwrap_or(0.0).max(rep.relative_residual);
                stats.cg_residual = Some(worst);
            }
            let samples = draw_all(&current, &state);
            stats.overlap += samples
                .iter()
                .enumerate()
                .map(|(s, smp)| {
                    let e0 = state.eps0(s);
                    dot(&smp.eps_ker, &smp.eps_im).abs() / dot(e0, e0).max(f64::MIN_POSITIVE)
                })
                .sum::<f64>()
                / samples.len() as f64;
            let (est, grad) = elbo_gradient(&current, &samples, batch, &ctx).map_err(&err)?;
            if !est.value.is_finite() {
                return Err(err(Error::Contract(format!("ELBO estimate is {}", est.value))));
            }
            stats.elbo += est.value;
            stats.steps += 1;
            adam.step(&mut params, &grad);
            current = unpack(&params);
            if !current.theta_hat.is_finite() {
                return Err(err(Error::Contract("parameters became non-finite".into())));
            }
            obs.on_step(Phase::Elbo, &params);
        }
        let rec = record(spec, data, &current, Phase::Elbo, epoch, Some((&stats, r)), started)?;
        log.push(rec);
        obs.on_epoch(log.last().expect("just pushed"), &current)?;
    }
    Ok(current)
}
