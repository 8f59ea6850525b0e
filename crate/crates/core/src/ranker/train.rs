//! Staged mini-batch gradient descent with dev-set checkpoint selection.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{loss_and_gradient_featurized, PairFeatures, RankerModel};
use crate::metaeval::{kendall_like_tau, JudgedPair, TieMode};
use crate::rng::{derive_seed, seeded};
use crate::types::{EvaluationSample, Label, Provenance};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("loss became non-finite at step {step}")]
    DivergedLoss { step: usize },
    #[error("no training data for stage {0}")]
    MissingStageData(Stage),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
}

/// Curriculum stages, applied strictly in sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    /// Cross-lingual NLI pairs.
    Nli,
    /// Reference versus machine translation.
    RefDiscrimination,
    /// Metric-labeled and perturbation pairs.
    Synthetic,
    /// Human DA relative-ranking pairs.
    HumanDarr,
}

impl Stage {
    /// Stage that trains on samples of this provenance, if any.
    pub fn for_provenance(p: Provenance) -> Option<Stage> {
        match p {
            Provenance::Nli => Some(Stage::Nli),
            Provenance::RefDiscrimination => Some(Stage::RefDiscrimination),
            Provenance::MetricLabeled | Provenance::Perturbation => Some(Stage::Synthetic),
            Provenance::Darr => Some(Stage::HumanDarr),
            Provenance::Challenge => None,
        }
    }

    fn tag(self) -> &'static str {
        match self {
            Stage::Nli => "nli",
            Stage::RefDiscrimination => "ref",
            Stage::Synthetic => "synthetic",
            Stage::HumanDarr => "human",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nli" => Ok(Stage::Nli),
            "ref" | "ref-discrimination" => Ok(Stage::RefDiscrimination),
            "synthetic" | "synth" => Ok(Stage::Synthetic),
            "human" | "human-darr" | "darr" => Ok(Stage::HumanDarr),
            other => Err(format!("unknown stage {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Steps per stage.
    pub max_steps: usize,
    pub eval_every: usize,
    /// Stop a stage after this many evaluations without a new best dev tau.
    pub early_stop_patience: Option<usize>,
    pub rng_seed: u64,
    pub stage_order: Vec<Stage>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            batch_size: 32,
            max_steps: 2000,
            eval_every: 1000,
            early_stop_patience: None,
            rng_seed: 0,
            stage_order: vec![Stage::Nli, Stage::RefDiscrimination, Stage::Synthetic],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(TrainError::InvalidConfig("learning_rate must be > 0".into()));
        }
        if self.eval_every == 0 {
            return Err(TrainError::InvalidConfig("eval_every must be > 0".into()));
        }
        if self.batch_size == 0 {
            return Err(TrainError::InvalidConfig("batch_size must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub step: usize,
    /// Mean training loss since the previous evaluation (NaN at step 0).
    #[serde(with = "nan_as_null")]
    pub train_loss: f64,
    pub dev_tau: f64,
}

mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StageHistory {
    pub steps_run: usize,
    pub evals: Vec<EvalPoint>,
    /// Step of the selected checkpoint (0 = the incoming model).
    pub best_step: usize,
    pub best_dev_tau: Option<f64>,
}

/// Dev tau of `model` on pre-featurized pairs, ties discordant.
pub fn dev_tau(model: &RankerModel, dev: &[PairFeatures]) -> Option<f64> {
    let judged: Vec<JudgedPair> = dev
        .iter()
        .map(|p| JudgedPair {
            label: if p.label > 0.5 { Label::SecondBetter } else { Label::FirstBetter },
            predicted_p: model.predict_delta(&p.delta),
            group_key: None,
        })
        .collect();
    kendall_like_tau(&judged, TieMode::Discordant).ok().map(|r| r.tau)
}

/// Trains one stage.
///
/// Samples are reshuffled at every epoch with `config.rng_seed`. When `dev`
/// is non-empty the model is scored every `eval_every` steps and at the last
/// step, and the checkpoint with the highest dev tau is returned; the
/// incoming model competes as step 0. Without dev data the final model is
/// returned.
pub fn train_stage(
    model: &RankerModel,
    train: &[EvaluationSample],
    dev: &[EvaluationSample],
    config: &TrainConfig,
) -> Result<(RankerModel, StageHistory), TrainError> {
    config.validate()?;
    let train: Vec<PairFeatures> = train.iter().map(PairFeatures::from_sample).collect();
    let dev: Vec<PairFeatures> = dev.iter().map(PairFeatures::from_sample).collect();
    train_featurized(model, &train, &dev, config)
}

pub fn train_featurized(
    model: &RankerModel,
    train: &[PairFeatures],
    dev: &[PairFeatures],
    config: &TrainConfig,
) -> Result<(RankerModel, StageHistory), TrainError> {
    config.validate()?;
    let mut history = StageHistory::default();
    let mut best = model.clone();
    let mut best_tau = dev_tau(model, dev);
    if let Some(t) = best_tau {
        history.evals.push(EvalPoint {
            step: 0,
            train_loss: f64::NAN,
            dev_tau: t,
        });
    }
    history.best_dev_tau = best_tau;
    if config.max_steps == 0 || train.is_empty() {
        return Ok((best, history));
    }

    let mut rng = seeded(config.rng_seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    order.shuffle(&mut rng);
    let mut pos = 0;
    let mut current = model.clone();
    let mut batch = Vec::with_capacity(config.batch_size);
    let (mut loss_sum, mut loss_n) = (0.0, 0usize);
    let mut stale_evals = 0;

    for step in 1..=config.max_steps {
        batch.clear();
        let end = (pos + config.batch_size).min(order.len());
        batch.extend(order[pos..end].iter().map(|&i| train[i].clone()));
        pos = end;
        if pos == order.len() {
            order.shuffle(&mut rng);
            pos = 0;
        }

        let (loss, grad) = loss_and_gradient_featurized(&current, &batch);
        if !loss.is_finite() {
            return Err(TrainError::DivergedLoss { step });
        }
        for (w, g) in current.weights.iter_mut().zip(&grad) {
            *w -= config.learning_rate * g;
        }
        if current.weights.iter().any(|w| !w.is_finite()) {
            return Err(TrainError::DivergedLoss { step });
        }
        loss_sum += loss;
        loss_n += 1;
        history.steps_run = step;

        let at_eval = step % config.eval_every == 0 || step == config.max_steps;
        if !at_eval || dev.is_empty() {
            continue;
        }
        let tau = dev_tau(&current, dev).unwrap_or(f64::NEG_INFINITY);
        history.evals.push(EvalPoint {
            step,
            train_loss: loss_sum / loss_n as f64,
            dev_tau: tau,
        });
        (loss_sum, loss_n) = (0.0, 0);
        if best_tau.is_none_or(|b| tau > b) {
            best_tau = Some(tau);
            best = current.clone();
            history.best_step = step;
            stale_evals = 0;
        } else {
            stale_evals += 1;
            if config.early_stop_patience.is_some_and(|p| stale_evals >= p) {
                break;
            }
        }
    }
    history.best_dev_tau = best_tau;
    if dev.is_empty() {
        history.best_step = history.steps_run;
        return Ok((current, history));
    }
    Ok((best, history))
}

/// Training samples per stage.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageData {
    pub stages: BTreeMap<Stage, Vec<EvaluationSample>>,
}

impl StageData {
    /// Routes samples to stages by provenance. Challenge samples are dropped.
    pub fn from_samples(samples: impl IntoIterator<Item = EvaluationSample>) -> Self {
        let mut stages: BTreeMap<Stage, Vec<EvaluationSample>> = BTreeMap::new();
        for s in samples {
            if let Some(stage) = Stage::for_provenance(s.provenance()) {
                stages.entry(stage).or_default().push(s);
            }
        }
        Self { stages }
    }

    pub fn with(mut self, stage: Stage, samples: Vec<EvaluationSample>) -> Self {
        self.stages.entry(stage).or_default().extend(samples);
        self
    }

    pub fn get(&self, stage: Stage) -> &[EvaluationSample] {
        self.stages.get(&stage).map(Vec::as_slice).unwrap_or(&[])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: Stage,
    pub seed: u64,
    pub history: StageHistory,
}

/// How a checkpoint was produced.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingProvenance {
    pub config: Option<TrainConfig>,
    pub stages: Vec<StageReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineResult {
    pub model: RankerModel,
    /// One checkpoint per completed stage, in order.
    pub checkpoints: Vec<RankerModel>,
    pub provenance: TrainingProvenance,
}

/// Runs `config.stage_order` in sequence, threading the model through.
/// Each stage gets its own seed derived from `config.rng_seed` and its
/// position.
pub fn run_pipeline(
    initial: &RankerModel,
    data: &StageData,
    dev: &[EvaluationSample],
    config: &TrainConfig,
) -> Result<PipelineResult, TrainError> {
    config.validate()?;
    if config.stage_order.is_empty() {
        return Err(TrainError::InvalidConfig("stage_order is empty".into()));
    }
    for stage in &config.stage_order {
        if data.get(*stage).is_empty() {
            return Err(TrainError::MissingStageData(*stage));
        }
    }
    let dev: Vec<PairFeatures> = dev.iter().map(PairFeatures::from_sample).collect();
    let mut model = initial.clone();
    let mut checkpoints = Vec::new();
    let mut reports = Vec::new();
    for (i, stage) in config.stage_order.iter().enumerate() {
        let seed = derive_seed(config.rng_seed, &format!("stage{i}:{stage}"));
        let stage_cfg = TrainConfig {
            rng_seed: seed,
            ..config.clone()
        };
        let train: Vec<PairFeatures> = data.get(*stage).iter().map(PairFeatures::from_sample).collect();
        let (next, history) = train_featurized(&model, &train, &dev, &stage_cfg)?;
        model = next;
        checkpoints.push(model.clone());
        reports.push(StageReport {
            stage: *stage,
            seed,
            history,
        });
    }
    Ok(PipelineResult {
        model,
        checkpoints,
        provenance: TrainingProvenance {
            config: Some(config.clone()),
            stages: reports,
        },
    })
}
