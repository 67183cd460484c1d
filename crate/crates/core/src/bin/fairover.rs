use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fairover::harness::{self, ReportFormat};
use fairover::{
    oversample, run_experiment, ClassifierKind, Dataset, DatasetSchema, Error, EvaluationReport, ExperimentPlan,
    ExperimentSettings, OversamplerConfig, Technique,
};

#[derive(Parser)]
#[command(name = "fairover", version, about = "Fair oversampling over class × group clusters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print dataset characteristics and cluster imbalance degrees.
    Inspect {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        /// Emit JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Oversample a dataset and write the augmented CSV.
    Oversample {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long, default_value = "heterofair")]
        technique: Technique,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
        /// Interpolate protected-attribute feature columns instead of copying them.
        #[arg(long)]
        no_pin: bool,
        #[arg(long, default_value_t = 10)]
        max_pair_retries: usize,
    },
    /// Run the experiment described by a plan file.
    Benchmark {
        #[arg(long)]
        plan: PathBuf,
    },
    /// Evaluate every technique with every classifier.
    Compare {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        output_dir: PathBuf,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        /// Comma-separated base seeds.
        #[arg(long, value_delimiter = ',', default_values_t = [0u64, 1, 2, 3, 4])]
        seeds: Vec<u64>,
    },
}

fn load(input: &Path, schema: &Path) -> fairover::Result<Dataset> {
    let schema = DatasetSchema::load(schema)?;
    Dataset::load_csv(input, &schema)
}

fn inspect(input: &Path, schema: &Path, json: bool) -> fairover::Result<()> {
    let summary = harness::summarize(&load(input, schema)?);
    if json {
        let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Serialization(e.to_string()))?;
        println!("{text}");
    } else {
        print!("{summary}");
    }
    Ok(())
}

fn run_oversample(
    input: &Path,
    schema: &Path,
    cfg: &OversamplerConfig,
    output: &Path,
) -> fairover::Result<()> {
    let ds = load(input, schema)?;
    let aug = oversample(&ds, cfg)?;
    for w in &aug.batch.warnings {
        eprintln!("warning: {w}");
    }
    aug.dataset.save_csv(output, Some(&aug.row_tags()))?;
    for (key, s) in &aug.batch.clusters {
        let fallbacks = if s.fallbacks.is_empty() {
            "none".to_string()
        } else {
            s.fallbacks
                .iter()
                .map(|(f, n)| format!("{} x{n}", f.name()))
                .collect::<Vec<_>>()
                .join(", ")
        };
        println!(
            "{key} [{}]: original {}, generated {}, fallbacks {fallbacks}",
            ds.group_names()[key.group],
            s.original,
            s.generated
        );
    }
    Ok(())
}

fn emit(report: &EvaluationReport, dir: &Path) -> fairover::Result<()> {
    for s in &report.skipped {
        eprintln!(
            "warning: skipped {} / {} seed {} fold {}: {}",
            s.technique, s.classifier, s.seed, s.fold, s.reason
        );
    }
    for cell in report.cells.iter().filter(|c| c.means.is_none()) {
        eprintln!("warning: {} / {} unavailable, every fold skipped", cell.technique, cell.classifier);
    }
    if !report.warnings.is_empty() {
        eprintln!("warning: {} oversampling warnings recorded in report.json", report.warnings.len());
    }
    for format in ReportFormat::ALL {
        harness::write_report(report, format, dir)?;
    }
    print!("{}", harness::render_report(report, ReportFormat::AlignedText));
    println!("reports written to {}", dir.display());
    Ok(())
}

fn dispatch(cmd: Command) -> fairover::Result<()> {
    match cmd {
        Command::Inspect { input, schema, json } => inspect(&input, &schema, json),
        Command::Oversample {
            input,
            schema,
            technique,
            k,
            seed,
            output,
            no_pin,
            max_pair_retries,
        } => {
            let cfg = OversamplerConfig {
                technique,
                k,
                seed,
                pin_protected: !no_pin,
                max_pair_retries,
            };
            run_oversample(&input, &schema, &cfg, &output)
        }
        Command::Benchmark { plan } => {
            let plan = ExperimentPlan::load(&plan)?;
            let report = run_experiment(&plan)?;
            emit(&report, &plan.output_dir)
        }
        Command::Compare {
            input,
            schema,
            output_dir,
            k,
            folds,
            seeds,
        } => {
            let settings = ExperimentSettings {
                techniques: Technique::ALL.to_vec(),
                classifiers: ClassifierKind::ALL.to_vec(),
                k,
                folds,
                seeds,
                ..Default::default()
            };
            let ds = load(&input, &schema)?;
            let name = input
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let report = fairover::evaluate(&ds, &name, &settings)?;
            emit(&report, &output_dir)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
