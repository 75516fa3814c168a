//! Behavior cloning on expert training trajectories.

mod data;

pub use data::{Batch, BatchItem, Dataset, PairFeatures, Sample};

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::compose::{sample_loss, CaseModel, ComposeError, LossValues, LossWeights, ModelConfig, Negatives};
use crate::fingerprint::{fingerprint, substream};
use crate::nn::{adam_step, AdamConfig, Checkpoint, NnError};
use crate::num::Scalar;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("dataset has no training timesteps")]
    EmptyDataset,
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("non-finite loss at step {step} (pairs {pairs:?}, timesteps {timesteps:?}); config: {config}")]
    NonFinite {
        step: u64,
        pairs: Vec<u64>,
        timesteps: Vec<usize>,
        config: String,
    },
    #[error(transparent)]
    Compose(#[from] ComposeError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub k: usize,
    pub lambda_h: f64,
    pub lambda_p: f64,
    pub margin: f64,
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Zero the encoder's gradients before every update.
    pub freeze_encoder: bool,
    /// Sample grid symmetries and swapped trajectory roles.
    pub augment: bool,
    /// Steps between metrics rows (0 disables the CSV).
    pub log_every: u64,
    /// Steps between intermediate checkpoints (0: final checkpoint only).
    pub checkpoint_every: u64,
    /// Stop early after this many total steps; the checkpoint can be resumed.
    pub halt_at: Option<u64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelConfig::default(),
            k: 4,
            lambda_h: 1.0,
            lambda_p: 1.0,
            margin: 1.0,
            lr: 1e-3,
            batch: 64,
            epochs: 30,
            seed: 0,
            freeze_encoder: false,
            augment: true,
            log_every: 50,
            checkpoint_every: 0,
            halt_at: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if self.batch == 0 {
            return bad("batch must be positive");
        }
        if !(self.lambda_h >= 0.0 && self.lambda_p >= 0.0) {
            return bad("loss weights must be non-negative");
        }
        if !(self.margin > 0.0) {
            return bad("margin must be positive");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("learning rate must be positive");
        }
        Ok(())
    }

    /// Loss weights actually applied: only the variant with assistive losses
    /// uses the configured lambdas.
    pub fn effective_lambdas(&self) -> (f64, f64) {
        if self.model.variant.has_assistive_losses() {
            (self.lambda_h, self.lambda_p)
        } else {
            (0.0, 0.0)
        }
    }

    /// Every setting that influences the trained parameters.
    pub fn to_map(&self) -> BTreeMap<String, String> {
        let mut m = self.model.to_map();
        let mut put = |k: &str, v: String| {
            m.insert(format!("train.{k}"), v);
        };
        put("k", self.k.to_string());
        put("lambda_h", format!("{:?}", self.lambda_h));
        put("lambda_p", format!("{:?}", self.lambda_p));
        put("margin", format!("{:?}", self.margin));
        put("lr", format!("{:?}", self.lr));
        put("batch", self.batch.to_string());
        put("epochs", self.epochs.to_string());
        put("seed", self.seed.to_string());
        put("freeze_encoder", self.freeze_encoder.to_string());
        put("augment", self.augment.to_string());
        m
    }

    pub fn steps_per_epoch(&self, data_timesteps: usize) -> u64 {
        data_timesteps.div_ceil(self.batch) as u64
    }
}

/// One row of the metrics CSV: batch-mean losses of the logged step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub step: u64,
    pub total: f64,
    pub policy: f64,
    pub h: f64,
    pub p: f64,
}

pub const METRICS_HEADER: &str = "step,loss_total,loss_policy,loss_H,loss_P";

impl MetricsRow {
    pub fn csv(&self) -> String {
        format!("{},{:?},{:?},{:?},{:?}", self.step, self.total, self.policy, self.h, self.p)
    }
}

/// Forward, backward and one Adam update over `batch`; returns mean losses.
pub fn train_step<S: Scalar>(
    model: &mut CaseModel<S>,
    data: &Dataset<S>,
    batch: &Batch,
    config: &TrainConfig,
) -> Result<LossValues<f64>, TrainError> {
    let (lh, lp) = config.effective_lambdas();
    let weights = LossWeights {
        policy: S::one(),
        lambda_h: S::of(lh),
        lambda_p: S::of(lp),
        margin: S::of(config.margin),
        grad_scale: S::one() / S::of(batch.items.len() as f64),
    };
    let needs_neg = lh != 0.0 || lp != 0.0;
    model.store.zero_grads();
    let mut sum = LossValues::<f64>::default();
    for it in &batch.items {
        let x = data.sample(it, config.k, needs_neg)?;
        let neg = x.negative.as_ref().map(|[u0, un, r0, rt]| Negatives::States { u0, un, r0, rt });
        let v = sample_loss(model, x.inputs(), x.action, neg, weights)?;
        sum.policy += v.policy.as_f64();
        sum.h += v.h.as_f64();
        sum.p += v.p.as_f64();
        sum.total += v.total.as_f64();
    }
    let n = batch.items.len() as f64;
    let mean = LossValues {
        policy: sum.policy / n,
        h: sum.h / n,
        p: sum.p / n,
        total: sum.total / n,
    };
    if !mean.total.is_finite() || !model.store.grads_finite() {
        return Err(TrainError::NonFinite {
            step: model.store.step_count(),
            pairs: batch.items.iter().map(|it| data.pairs()[it.pair].pair_id).collect(),
            timesteps: batch.items.iter().map(|it| it.t).collect(),
            config: crate::fingerprint::canonical_text(&config.to_map()).replace('\n', " "),
        });
    }
    if config.freeze_encoder {
        let ids: Vec<_> = model
            .store
            .ids()
            .filter(|&id| model.store.names()[id.0].starts_with("enc."))
            .collect();
        for id in ids {
            model.store.grad_mut(id).fill_zero();
        }
    }
    adam_step(&mut model.store, &AdamConfig { lr: config.lr, ..AdamConfig::default() });
    Ok(mean)
}

/// Where `train_loop` writes its artifacts.
#[derive(Debug, Clone)]
pub struct TrainOutputs {
    pub checkpoint: PathBuf,
    pub metrics: Option<PathBuf>,
}

impl TrainOutputs {
    pub fn in_dir(dir: &Path) -> Self {
        TrainOutputs {
            checkpoint: dir.join("checkpoint.json"),
            metrics: Some(dir.join("metrics.csv")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainResult<S> {
    pub model: CaseModel<S>,
    pub metrics: Vec<MetricsRow>,
    pub steps: u64,
}

/// Checkpoint config: the training settings plus caller-supplied extras
/// (e.g. a dataset digest).
pub fn checkpoint_config(config: &TrainConfig, extra: &BTreeMap<String, String>) -> BTreeMap<String, String> {
    let mut m = config.to_map();
    m.extend(extra.iter().map(|(k, v)| (k.clone(), v.clone())));
    m
}

/// Runs `epochs` passes (each `ceil(timesteps / batch)` steps), continuing
/// from `resume` when given. Batches depend only on `(seed, step)`, so a
/// resumed run matches an uninterrupted one bit for bit.
pub fn train_loop<S: Scalar>(
    config: &TrainConfig,
    data: &Dataset<S>,
    extra: &BTreeMap<String, String>,
    outputs: Option<&TrainOutputs>,
    resume: Option<Checkpoint<S>>,
) -> Result<TrainResult<S>, TrainError> {
    config.validate()?;
    if data.total_timesteps() == 0 {
        return Err(TrainError::EmptyDataset);
    }
    if (data.width(), data.height()) != (config.model.width, config.model.height) {
        return Err(TrainError::Config(format!(
            "dataset grid {}x{} does not match model grid {}x{}",
            data.width(),
            data.height(),
            config.model.width,
            config.model.height
        )));
    }
    let ck_config = checkpoint_config(config, extra);
    let mut model = match resume {
        Some(ck) => {
            let expected = fingerprint(&ck_config);
            if ck.fingerprint() != expected {
                return Err(NnError::FingerprintMismatch {
                    expected,
                    found: ck.fingerprint(),
                }
                .into());
            }
            CaseModel::from_store(config.model.clone(), ck.store)?
        }
        None => CaseModel::new(config.model.clone(), substream_seed(config.seed))?,
    };
    let total = config.epochs as u64 * config.steps_per_epoch(data.total_timesteps());
    let save = |model: &CaseModel<S>| -> Result<(), TrainError> {
        if let Some(out) = outputs {
            Checkpoint::new(ck_config.clone(), model.store.clone()).save(&out.checkpoint)?;
        }
        Ok(())
    };

    let mut metrics_file = match outputs.and_then(|o| o.metrics.as_ref()) {
        Some(path) if config.log_every > 0 => {
            let fresh = model.store.step_count() == 0 || !path.exists();
            let mut f = fs::OpenOptions::new()
                .create(true)
                .write(true)
                .append(!fresh)
                .truncate(fresh)
                .open(path)?;
            if fresh {
                writeln!(f, "{METRICS_HEADER}")?;
            }
            Some(f)
        }
        _ => None,
    };

    let mut metrics = Vec::new();
    let stop = config.halt_at.map_or(total, |h| h.min(total));
    while model.store.step_count() < stop {
        let step = model.store.step_count();
        let mut rng = substream(config.seed, "train/batch", step);
        let batch = data.sample_batch(config.batch, config.augment, &mut rng)?;
        let v = train_step(&mut model, data, &batch, config)?;
        let done = step + 1;
        if config.log_every > 0 && (done % config.log_every == 0 || done == total) {
            let row = MetricsRow {
                step: done,
                total: v.total,
                policy: v.policy,
                h: v.h,
                p: v.p,
            };
            if let Some(f) = metrics_file.as_mut() {
                writeln!(f, "{}", row.csv())?;
            }
            metrics.push(row);
        }
        if config.checkpoint_every > 0 && done % config.checkpoint_every == 0 && done < total {
            save(&model)?;
        }
    }
    if let Some(f) = metrics_file.as_mut() {
        f.flush()?;
    }
    save(&model)?;
    Ok(TrainResult {
        steps: model.store.step_count(),
        model,
        metrics,
    })
}

fn substream_seed(seed: u64) -> u64 {
    crate::fingerprint::subseed(seed, "train/init", 0)
}
