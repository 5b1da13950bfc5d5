use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use evlstream::datagen::DriftKind;
use evlstream::experiment::{emit_report, render_json, run_experiment, ExperimentSpec, GeneratorSpec, OutputFormat, StreamSource};
use evlstream::{Error, EvolverKind, Mode};

/// Run stream-classification experiments and write JSON or CSV reports.
///
/// A config file describes one experiment; flags override its fields.
#[derive(Debug, Parser)]
#[command(name = "evlstream", version)]
struct Cli {
    /// TOML experiment file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Synthetic stream: translate, rotate or random-walk.
    #[arg(long, conflicts_with = "csv")]
    stream: Option<DriftKind>,
    /// Stream file (comma-separated, one item per row).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// 0-based label column of the CSV file (default: last column).
    #[arg(long, requires = "csv")]
    label_column: Option<usize>,
    /// CSV file starts with a header row.
    #[arg(long, requires = "csv")]
    header: bool,
    /// Number of leading items used as labelled training data.
    #[arg(long)]
    train: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    agents: Option<usize>,
    #[arg(long)]
    radius: Option<f64>,
    /// ga, pso or static.
    #[arg(long)]
    evolver: Option<EvolverKind>,
    /// abstain or force.
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated agent counts, e.g. 10,20,50,100.
    #[arg(long, value_delimiter = ',')]
    sweep: Option<Vec<usize>>,
    /// Comma-separated evolvers to compare against.
    #[arg(long, value_delimiter = ',')]
    baselines: Option<Vec<EvolverKind>>,
    /// Published score to test against.
    #[arg(long)]
    reference: Option<f64>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Output path; JSON goes to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// json or csv.
    #[arg(long)]
    format: Option<OutputFormat>,
}

fn csv_label_column(path: &PathBuf) -> Result<usize, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Csv {
        path: path.clone(),
        line: 0,
        column: 0,
        message: format!("cannot read file: {e}"),
    })?;
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    Ok(first.split(',').count().saturating_sub(1))
}

fn build_spec(cli: Cli) -> Result<ExperimentSpec, Error> {
    let mut spec = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            ExperimentSpec::from_toml(&text)?
        }
        None => ExperimentSpec::default(),
    };
    if let Some(kind) = cli.stream {
        spec.source = StreamSource::Generator(GeneratorSpec::preset(kind));
    }
    if let Some(path) = cli.csv {
        let label_column = match cli.label_column {
            Some(c) => c,
            None => csv_label_column(&path)?,
        };
        spec.source = StreamSource::Csv {
            path,
            label_column,
            header: cli.header,
        };
    }
    if let Some(v) = cli.train {
        spec.train_size = v;
    }
    if let Some(v) = cli.window {
        spec.run.window_size = v;
    }
    if let Some(v) = cli.agents {
        spec.run.num_agents = v;
    }
    if let Some(v) = cli.radius {
        spec.run.radius = v;
    }
    if let Some(v) = cli.evolver {
        spec.run.evolver.kind = v;
    }
    if let Some(v) = cli.mode {
        spec.run.mode = v;
    }
    if let Some(v) = cli.reps {
        spec.repetitions = v;
    }
    if let Some(v) = cli.seed {
        spec.run.seed = v;
    }
    if let Some(v) = cli.sweep {
        spec.sweep = Some(v);
    }
    if let Some(v) = cli.baselines {
        spec.baselines = v;
    }
    if let Some(v) = cli.reference {
        spec.reference_f1 = Some(v);
    }
    if let Some(v) = cli.jobs {
        spec.jobs = v;
    }
    if let Some(v) = cli.out {
        spec.output = Some(v);
    }
    if let Some(v) = cli.format {
        spec.format = v;
    }
    if spec.format == OutputFormat::Csv && spec.output.is_none() {
        return Err(Error::Config("--format csv needs --out".into()));
    }
    spec.validate()?;
    Ok(spec)
}

fn run(cli: Cli) -> Result<(), Error> {
    let spec = build_spec(cli)?;
    let report = run_experiment(&spec)?;

    for s in &report.sections {
        eprintln!(
            "{:<7} agents={:<4} f1={:.3}({:.3}) secs={:.3}",
            s.evolver.to_string(),
            s.num_agents,
            s.mean_f1,
            s.std_f1,
            s.mean_wall_time
        );
    }
    for c in &report.comparisons {
        eprintln!(
            "{} vs {:?} agents={}: W={} p={:.4} n={}",
            c.evolver, c.against, c.num_agents, c.result.statistic, c.result.p_value, c.result.n_effective
        );
    }

    match &spec.output {
        Some(path) => {
            for p in emit_report(&report, spec.format, path)? {
                eprintln!("wrote {}", p.display());
            }
        }
        None => print!("{}", render_json(&report)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
