//! Repetition batches, agent-count sweeps and evolver comparisons, plus the
//! report writers used by the command-line driver.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{load_csv_stream, DriftKind, DriftSpec};
use crate::engine::{run_stream, RunConfig, RunReport};
use crate::error::{Error, Result};
use crate::eval::{mean, population_std, wilcoxon_signed_rank, Reference, TestResult};
use crate::evolve::EvolverKind;
use crate::model::LabeledPoint;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_REPETITIONS: usize = 20;
pub const DEFAULT_TRAIN_SIZE: usize = 250;

/// A generator preset with optional overrides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub kind: DriftKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_separation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_sigma: Option<f64>,
}

impl GeneratorSpec {
    pub fn preset(kind: DriftKind) -> Self {
        GeneratorSpec {
            kind,
            classes: None,
            dimension: None,
            samples: None,
            class_separation: None,
            drift_rate: None,
            noise_sigma: None,
        }
    }

    /// Preset values with overrides applied. A rotating stream whose sample
    /// count is overridden without a rate still turns exactly once.
    pub fn resolve(&self, seed: u64) -> DriftSpec {
        let mut d = DriftSpec::preset(self.kind);
        d.seed = seed;
        d.classes = self.classes.unwrap_or(d.classes);
        d.dimension = self.dimension.unwrap_or(d.dimension);
        d.samples = self.samples.unwrap_or(d.samples);
        d.class_separation = self.class_separation.unwrap_or(d.class_separation);
        d.noise_sigma = self.noise_sigma.unwrap_or(d.noise_sigma);
        d.drift_rate = match (self.drift_rate, self.kind) {
            (Some(r), _) => r,
            (None, DriftKind::Rotate) => 2.0 * std::f64::consts::PI / d.samples as f64,
            (None, _) => d.drift_rate,
        };
        d
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum StreamSource {
    /// Regenerated for every repetition with that repetition's seed.
    Generator(GeneratorSpec),
    /// Read once and shared by every repetition.
    Csv {
        path: PathBuf,
        label_column: usize,
        #[serde(default)]
        header: bool,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(Error::invalid(format!("unknown output format {other:?}"))),
        }
    }
}

/// One experiment: a stream, a run configuration and the batch protocol
/// around it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub source: StreamSource,
    /// Leading stream items used as the labelled training set.
    pub train_size: usize,
    pub run: RunConfig,
    pub repetitions: usize,
    /// Agent counts to sweep; `None` uses `run.num_agents` only.
    pub sweep: Option<Vec<usize>>,
    /// Extra evolvers run on the same streams and seeds as `run.evolver`.
    pub baselines: Vec<EvolverKind>,
    /// Published score to test the primary evolver against.
    pub reference_f1: Option<f64>,
    /// Worker threads; 0 uses every available core.
    pub jobs: usize,
    pub output: Option<PathBuf>,
    pub format: OutputFormat,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            source: StreamSource::Generator(GeneratorSpec::preset(DriftKind::Translate)),
            train_size: DEFAULT_TRAIN_SIZE,
            run: RunConfig::default(),
            repetitions: DEFAULT_REPETITIONS,
            sweep: None,
            baselines: Vec::new(),
            reference_f1: None,
            jobs: 0,
            output: None,
            format: OutputFormat::Json,
        }
    }
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.run.validate()?;
        if self.repetitions == 0 {
            return Err(Error::invalid("repetitions must be >= 1"));
        }
        if self.train_size == 0 {
            return Err(Error::invalid("train_size must be >= 1"));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.is_empty() || sweep.contains(&0) {
                return Err(Error::invalid("sweep values must be positive and non-empty"));
            }
        }
        if let StreamSource::Generator(g) = &self.source {
            let d = g.resolve(self.run.seed);
            d.validate()?;
            if d.samples <= self.train_size {
                return Err(Error::invalid(format!(
                    "train_size {} leaves no stream out of {} samples",
                    self.train_size, d.samples
                )));
            }
        }
        Ok(())
    }

    /// Seed of repetition `i`.
    pub fn run_seed(&self, i: usize) -> u64 {
        self.run.seed.wrapping_add(i as u64)
    }

    fn evolvers(&self) -> Vec<EvolverKind> {
        let mut kinds = vec![self.run.evolver.kind];
        for b in &self.baselines {
            if !kinds.contains(b) {
                kinds.push(*b);
            }
        }
        kinds
    }

    fn agent_counts(&self) -> Vec<usize> {
        self.sweep.clone().unwrap_or_else(|| vec![self.run.num_agents])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowStat {
    pub window_index: usize,
    pub mean_f1: f64,
    pub std: f64,
}

/// All repetitions of one (evolver, agent count) pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub evolver: EvolverKind,
    pub num_agents: usize,
    pub runs: Vec<RunReport>,
    pub mean_f1: f64,
    pub std_f1: f64,
    pub mean_wall_time: f64,
    pub std_wall_time: f64,
    pub per_window: Vec<WindowStat>,
}

impl Section {
    pub fn from_runs(evolver: EvolverKind, num_agents: usize, runs: Vec<RunReport>) -> Self {
        let scores: Vec<f64> = runs.iter().map(|r| r.mean_f1).collect();
        let times: Vec<f64> = runs.iter().map(|r| r.wall_time_seconds).collect();
        let windows = runs.iter().map(|r| r.per_window_f1.len()).min().unwrap_or(0);
        let per_window = (0..windows)
            .map(|w| {
                let col: Vec<f64> = runs.iter().map(|r| r.per_window_f1[w]).collect();
                WindowStat {
                    window_index: w,
                    mean_f1: mean(&col),
                    std: population_std(&col),
                }
            })
            .collect();
        Section {
            evolver,
            num_agents,
            mean_f1: mean(&scores),
            std_f1: population_std(&scores),
            mean_wall_time: mean(&times),
            std_wall_time: population_std(&times),
            per_window,
            runs,
        }
    }

    pub fn scores(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.mean_f1).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Against {
    Evolver(EvolverKind),
    Constant(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub num_agents: usize,
    pub evolver: EvolverKind,
    pub against: Against,
    pub result: TestResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub schema_version: u32,
    /// Standard deviations are population std (divide by n).
    pub std_convention: String,
    pub repetitions: usize,
    pub base_seed: u64,
    pub sections: Vec<Section>,
    pub comparisons: Vec<Comparison>,
}

impl BatchReport {
    pub fn section(&self, evolver: EvolverKind, num_agents: usize) -> Option<&Section> {
        self.sections
            .iter()
            .find(|s| s.evolver == evolver && s.num_agents == num_agents)
    }
}

/// Loads or generates the stream for repetition `i` and splits off the
/// training prefix.
fn materialize(spec: &ExperimentSpec, i: usize, csv: Option<&[LabeledPoint]>) -> Result<Vec<LabeledPoint>> {
    match (&spec.source, csv) {
        (_, Some(data)) => Ok(data.to_vec()),
        (StreamSource::Generator(g), None) => g.resolve(spec.run_seed(i)).generate(),
        (StreamSource::Csv { .. }, None) => unreachable!("csv data is loaded up front"),
    }
}

fn split_training(data: &[LabeledPoint], train_size: usize) -> Result<(&[LabeledPoint], &[LabeledPoint])> {
    if data.len() <= train_size {
        return Err(Error::invalid(format!(
            "train_size {train_size} leaves no stream out of {} items",
            data.len()
        )));
    }
    Ok(data.split_at(train_size))
}

/// Executes every repetition of every (agent count, evolver) section.
///
/// Repetition `i` uses seed `run.seed + i` for both stream generation and
/// the run itself, so all sections see identical streams. Results are
/// ordered by section then repetition whatever order the workers finish in.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<BatchReport> {
    spec.validate()?;
    let csv_data = match &spec.source {
        StreamSource::Csv {
            path,
            label_column,
            header,
        } => Some(load_csv_stream(path, *label_column, *header)?.0),
        StreamSource::Generator(_) => None,
    };

    let streams: Vec<Vec<LabeledPoint>> = (0..spec.repetitions)
        .map(|i| materialize(spec, i, csv_data.as_deref()))
        .collect::<Result<_>>()?;

    let mut jobs = Vec::new();
    for &agents in &spec.agent_counts() {
        for &kind in &spec.evolvers() {
            for rep in 0..spec.repetitions {
                jobs.push((agents, kind, rep));
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.jobs)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let results: Vec<Result<RunReport>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(agents, kind, rep)| {
                let (training, stream) = split_training(&streams[rep], spec.train_size)?;
                let mut cfg = spec.run.clone();
                cfg.num_agents = agents;
                cfg.evolver.kind = kind;
                cfg.seed = spec.run_seed(rep);
                run_stream(training, stream, &cfg).map_err(|e| Error::Run {
                    run: rep,
                    source: Box::new(e),
                })
            })
            .collect()
    });

    let mut sections = Vec::new();
    let mut results = results.into_iter();
    for &agents in &spec.agent_counts() {
        for &kind in &spec.evolvers() {
            let runs = results
                .by_ref()
                .take(spec.repetitions)
                .collect::<Result<Vec<_>>>()?;
            sections.push(Section::from_runs(kind, agents, runs));
        }
    }

    let comparisons = compare(spec, &sections)?;
    Ok(BatchReport {
        schema_version: SCHEMA_VERSION,
        std_convention: "population".into(),
        repetitions: spec.repetitions,
        base_seed: spec.run.seed,
        sections,
        comparisons,
    })
}

fn compare(spec: &ExperimentSpec, sections: &[Section]) -> Result<Vec<Comparison>> {
    let primary = spec.run.evolver.kind;
    let mut out = Vec::new();
    for &agents in &spec.agent_counts() {
        let find = |k: EvolverKind| {
            sections
                .iter()
                .find(|s| s.evolver == k && s.num_agents == agents)
                .expect("every section was run")
        };
        let main = find(primary).scores();
        for &kind in spec.evolvers().iter().skip(1) {
            let other = find(kind).scores();
            out.push(Comparison {
                num_agents: agents,
                evolver: primary,
                against: Against::Evolver(kind),
                result: wilcoxon_signed_rank(&main, Reference::Paired(&other))?,
            });
        }
        if let Some(c) = spec.reference_f1 {
            out.push(Comparison {
                num_agents: agents,
                evolver: primary,
                against: Against::Constant(c),
                result: wilcoxon_signed_rank(&main, Reference::Constant(c))?,
            });
        }
    }
    Ok(out)
}

/// Files written for the CSV format: per-run summaries and per-window means.
pub fn csv_paths(path: &Path) -> (PathBuf, PathBuf) {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let dir = path.parent().unwrap_or(Path::new(""));
    (dir.join(format!("{stem}_runs.csv")), dir.join(format!("{stem}_windows.csv")))
}

pub fn render_json(report: &BatchReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)? + "\n")
}

pub fn render_runs_csv(report: &BatchReport) -> String {
    let mut s = String::from("evolver,num_agents,run,seed,mean_f1,wall_time\n");
    for sec in &report.sections {
        for (i, r) in sec.runs.iter().enumerate() {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                sec.evolver, sec.num_agents, i, r.seed, r.mean_f1, r.wall_time_seconds
            );
        }
    }
    s
}

pub fn render_windows_csv(report: &BatchReport) -> String {
    let mut s = String::from("evolver,num_agents,window_index,mean_f1,std\n");
    for sec in &report.sections {
        for w in &sec.per_window {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                sec.evolver, sec.num_agents, w.window_index, w.mean_f1, w.std
            );
        }
    }
    s
}

/// Writes the report. JSON goes to `path`; CSV produces the two files named
/// by [`csv_paths`]. Returns the paths written.
pub fn emit_report(report: &BatchReport, format: OutputFormat, path: &Path) -> Result<Vec<PathBuf>> {
    let write = |p: &Path, body: &str| fs::write(p, body).map_err(|e| Error::io(format!("writing {}", p.display()), e));
    match format {
        OutputFormat::Json => {
            write(path, &render_json(report)?)?;
            Ok(vec![path.to_path_buf()])
        }
        OutputFormat::Csv => {
            let (runs, windows) = csv_paths(path);
            write(&runs, &render_runs_csv(report))?;
            write(&windows, &render_windows_csv(report))?;
            Ok(vec![runs, windows])
        }
    }
}

pub fn load_report(path: &Path) -> Result<BatchReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    Ok(serde_json::from_str(&text)?)
}
