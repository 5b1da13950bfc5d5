//! Tumbling-window driver for a single run.

use std::collections::BTreeSet;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{macro_f1, mean};
use crate::evolve::{Evolver, EvolverConfig};
use crate::model::{initialize_model, Label, LabeledPoint, Mode, Model, Prediction};

pub const DEFAULT_WINDOW: usize = 250;

/// Random stream of the run seed used for model initialization.
const INIT_STREAM: u64 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub window_size: usize,
    pub mode: Mode,
    pub evolver: EvolverConfig,
    pub seed: u64,
    pub num_agents: usize,
    pub radius: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            window_size: DEFAULT_WINDOW,
            mode: Mode::Abstain,
            evolver: EvolverConfig::default(),
            seed: 0,
            num_agents: 20,
            radius: 2.5,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_size == 0 {
            return Err(Error::invalid("window size must be >= 1"));
        }
        if self.num_agents == 0 {
            return Err(Error::invalid("numAgents must be >= 1"));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::invalid(format!("radius must be > 0, got {}", self.radius)));
        }
        self.evolver.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub per_window_f1: Vec<f64>,
    pub mean_f1: f64,
    pub wall_time_seconds: f64,
    pub windows: usize,
    pub config: RunConfig,
    pub seed: u64,
    pub warnings: Vec<String>,
}

impl RunReport {
    /// Copy with the wall time zeroed, for comparing runs field by field.
    pub fn untimed(&self) -> RunReport {
        RunReport {
            wall_time_seconds: 0.0,
            ..self.clone()
        }
    }
}

/// State handed to an observer after each window has been scored, evolved
/// and decayed.
pub struct WindowRecord<'a> {
    pub index: usize,
    pub predictions: &'a [Prediction],
    pub f1: f64,
    pub model: &'a Model,
}

pub fn run_stream(training: &[LabeledPoint], stream: &[LabeledPoint], cfg: &RunConfig) -> Result<RunReport> {
    run_stream_observed(training, stream, cfg, |_| {})
}

/// Runs the full protocol and calls `observer` at every window boundary.
///
/// The model is built once from `training`. For each tumbling window of the
/// stream: classify every point in order, score the window, evolve every
/// ensemble, then decay fitness. Stream labels are only used for scoring.
pub fn run_stream_observed(
    training: &[LabeledPoint],
    stream: &[LabeledPoint],
    cfg: &RunConfig,
    mut observer: impl FnMut(&WindowRecord<'_>),
) -> Result<RunReport> {
    let start = Instant::now();
    cfg.validate()?;
    if training.is_empty() {
        return Err(Error::EmptyTraining);
    }
    if stream.is_empty() {
        return Err(Error::EmptyStream);
    }

    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    init_rng.set_stream(INIT_STREAM);
    let mut model = initialize_model(training, cfg.num_agents, cfg.radius, &mut init_rng)?;
    let labels: Vec<Label> = model.labels().cloned().collect();
    check_stream(stream, &labels, model.dim())?;

    let mut evolver = Evolver::new(cfg.evolver.clone(), &model, cfg.seed)?;
    let mut per_window_f1 = Vec::with_capacity(stream.len().div_ceil(cfg.window_size));
    let mut predictions = Vec::with_capacity(cfg.window_size);
    let mut truths = Vec::with_capacity(cfg.window_size);

    for (index, window) in stream.chunks(cfg.window_size).enumerate() {
        predictions.clear();
        truths.clear();
        for item in window {
            predictions.push(model.classify(&item.point, cfg.mode)?);
            truths.push(item.label.clone());
        }
        let f1 = macro_f1(&predictions, &truths, &labels)?;
        per_window_f1.push(f1);
        evolver.update(&mut model)?;
        model.decay_fitness();
        observer(&WindowRecord {
            index,
            predictions: &predictions,
            f1,
            model: &model,
        });
    }

    Ok(RunReport {
        mean_f1: mean(&per_window_f1),
        windows: per_window_f1.len(),
        per_window_f1,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        config: cfg.clone(),
        seed: cfg.seed,
        warnings: model.warnings().to_vec(),
    })
}

fn check_stream(stream: &[LabeledPoint], labels: &[Label], dim: usize) -> Result<()> {
    let known: BTreeSet<&Label> = labels.iter().collect();
    for (index, item) in stream.iter().enumerate() {
        if item.point.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: item.point.dim(),
            });
        }
        if !known.contains(&item.label) {
            return Err(Error::UnknownLabel {
                index,
                label: item.label.to_string(),
            });
        }
    }
    Ok(())
}
