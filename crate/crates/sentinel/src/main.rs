use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use icn_sentinel::commands::{self, DetectOptions, Method, TrainOptions};
use icn_sentinel::config::{RunConfig, SEED_ENV};
use icn_sentinel::Result;
use icn_sentinel_core::classifiers::ClassifierKind;
use icn_sentinel_core::data::{Group, SensitivityDegree};
use icn_sentinel_core::harness::DatasetKind;

/// Threshold and inter-arrival-curve anomaly detection for industrial process data.
#[derive(Parser)]
#[command(name = "icn-sentinel", version, about)]
struct Cli {
    /// JSON run configuration (defaults apply when omitted)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed
    #[arg(long, global = true, env = SEED_ENV)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

fn sensitivity(s: &str) -> std::result::Result<SensitivityDegree, String> {
    let pct: u8 = s.parse().map_err(|_| format!("`{s}` is not one of 20, 60, 100"))?;
    SensitivityDegree::from_pct(pct).map_err(|e| e.to_string())
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic campaign
    Gen {
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a classifier, threshold profile and curve model on labeled rows
    Train {
        #[arg(long)]
        algo: ClassifierKind,
        #[arg(long)]
        data: PathBuf,
        /// Event file aligned with the rows (default: DATA with .events)
        #[arg(long)]
        events: Option<PathBuf>,
        #[arg(long, default_value = "reduced")]
        dataset: DatasetKind,
        /// Comma-separated feature names; overrides --dataset
        #[arg(long, value_delimiter = ',')]
        features: Option<Vec<String>>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        c: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        w_delta: Option<usize>,
        #[arg(long, default_value = "model")]
        out: PathBuf,
    },
    /// Score rows with a trained model
    Detect {
        /// Directory written by `train`
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        events: Option<PathBuf>,
        #[arg(long, default_value = "100", value_parser = sensitivity)]
        sensitivity: SensitivityDegree,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        sigma_th: Option<f64>,
        #[arg(long, default_value = "detections")]
        out: PathBuf,
    },
    /// Wrapper feature selection over a campaign directory or labeled CSV
    Select {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "both")]
        method: Method,
        /// Campaign scenario to select on
        #[arg(long, value_parser = sensitivity)]
        sensitivity: Option<SensitivityDegree>,
        #[arg(long, default_value = "selection")]
        out: PathBuf,
    },
    /// Run the evaluation matrix over a generated campaign
    Evaluate {
        /// Campaign directory written by `gen`
        #[arg(long)]
        data: PathBuf,
        /// Report directory (default: DATA/report)
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        groups: Option<Vec<Group>>,
        #[arg(long, value_delimiter = ',')]
        dataset: Option<Vec<DatasetKind>>,
        #[arg(long, value_delimiter = ',', value_parser = sensitivity)]
        sensitivity: Option<Vec<SensitivityDegree>>,
        #[arg(long, value_delimiter = ',')]
        algo: Option<Vec<ClassifierKind>>,
    },
}

fn run(cli: Cli) -> Result<ExitCode> {
    let config = || RunConfig::load_or_default(cli.config.as_deref())?.resolve(cli.seed);
    match cli.command {
        Command::Gen { ref out } => {
            let config = config()?;
            let manifest = commands::gen(&config, out)?;
            println!("wrote {} files to {} (seed {})", manifest.files.len(), out.display(), manifest.seed);
        }
        Command::Train { algo, ref data, ref events, dataset, ref features, k, c, epochs, w_delta, ref out } => {
            let opts = TrainOptions {
                algo,
                data: data.clone(),
                events: events.clone(),
                dataset,
                features: features.clone(),
                k,
                c,
                epochs,
                w_delta,
                out: out.clone(),
            };
            commands::train(&config()?, &opts)?;
            println!("wrote {algo} model to {}", out.display());
        }
        Command::Detect { ref model, ref data, ref events, sensitivity, alpha, sigma_th, ref out } => {
            let opts = DetectOptions {
                model: model.clone(),
                data: data.clone(),
                events: events.clone(),
                sensitivity,
                alpha,
                sigma_th,
                out: out.clone(),
            };
            let summary = commands::detect(&opts)?;
            println!("{} of {} rows anomalous", summary.anomalous, summary.rows);
        }
        Command::Select { ref data, method, sensitivity, ref out } => {
            let mut config = config()?;
            if let Some(s) = sensitivity {
                config.select.s_pct = s.pct();
            }
            let file = commands::select(&config, data, method, out)?;
            for s in &file.selections {
                println!("{}: {} (score {:.4})", s.method, s.features.join(","), s.score);
            }
        }
        Command::Evaluate { ref data, ref out, groups, dataset, sensitivity, algo } => {
            let given = cli.config.as_deref().map(RunConfig::load).transpose()?;
            let out = out.clone().unwrap_or_else(|| data.join("report"));
            let eval = commands::evaluate(data, given, &out, |c| c.filter_matrix(groups, dataset, sensitivity, algo))?;
            print!("{}", icn_sentinel_core::harness::render_tables(&eval.report));
            if !eval.failures.is_empty() {
                for f in &eval.failures {
                    eprintln!("acceptance: {f}");
                }
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
