use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bob_url::dataset::{self, Dataset, PrepareOptions};
use bob_url::metrics::{self, RocCurve};
use bob_url::model_io::{self, LoadOptions};
use bob_url::optim::{OptimizerConfig, OptimizerKind};
use bob_url::trainer::{self, EpochRecord, TrainConfig, VectorSet};
use bob_url::{synthetic, vectorize, MlpModel};
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Classify URLs as benign or phishing from their byte statistics.
#[derive(Debug, Parser)]
#[command(name = "bob-url", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the 512-dimensional vector of a URL.
    Vectorize {
        url: String,
        #[arg(long, value_enum, default_value_t = VectorFormat::Lines)]
        format: VectorFormat,
    },
    /// Build training and validation sets.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Train a model and write it with its learning curve.
    Train(TrainArgs),
    /// Score a labeled dataset and write a metrics report and ROC curve.
    Evaluate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        data: PathBuf,
        /// JSON report path; printed to stdout when omitted.
        #[arg(long)]
        report: Option<PathBuf>,
        /// ROC curve CSV path (`fpr,tpr`).
        #[arg(long)]
        roc: Option<PathBuf>,
    },
    /// Print the malicious-class probability and verdict for URLs.
    Predict {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, conflicts_with = "stdin", required_unless_present = "stdin")]
        url: Option<String>,
        /// Score one URL per line of standard input.
        #[arg(long)]
        stdin: bool,
    },
    /// Write the ROC curve of a model on a labeled dataset.
    Roc {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        data: PathBuf,
        /// CSV path; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum VectorFormat {
    Lines,
    Csv,
}

#[derive(Debug, Args)]
struct ModelArgs {
    #[arg(long)]
    model: PathBuf,
    /// Accept models whose layer widths differ from 512-256-256-2.
    #[arg(long)]
    allow_any_dims: bool,
}

impl ModelArgs {
    fn load(&self) -> Result<MlpModel, Failure> {
        Ok(model_io::load(
            &self.model,
            LoadOptions {
                allow_any_dims: self.allow_any_dims,
            },
        )?)
    }
}

#[derive(Debug, Subcommand)]
enum DatasetCommand {
    /// Blacklist + access log → cleansed, hour-balanced, equal-size train/val split.
    Prepare {
        /// PhishTank CSV dump.
        #[arg(long)]
        blacklist: PathBuf,
        /// Access log of `epoch<TAB>url` lines.
        #[arg(long)]
        whitelist_log: PathBuf,
        /// PhishTank CSV whose URLs are removed from the log; defaults to the blacklist.
        #[arg(long)]
        cleanse_with: Option<PathBuf>,
        #[arg(long, default_value_t = 10_000)]
        per_hour: usize,
        /// Entries per class; defaults to the blacklist size.
        #[arg(long)]
        size: Option<usize>,
        #[arg(long, default_value_t = 0.8)]
        train_fraction: f64,
        /// Drop repeated blacklist URLs before sizing.
        #[arg(long)]
        dedup: bool,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out_train: PathBuf,
        #[arg(long)]
        out_val: PathBuf,
    },
    /// Generate two separable URL families and split them.
    Synth {
        #[arg(long, default_value_t = 5_000)]
        per_class: usize,
        #[arg(long, default_value_t = 0.8)]
        train_fraction: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out_train: PathBuf,
        #[arg(long)]
        out_val: PathBuf,
    },
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    val: PathBuf,
    #[arg(long, default_value = "adam", value_parser = parse_optimizer)]
    optimizer: OptimizerKind,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 100)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.75)]
    dropout: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out_model: PathBuf,
    /// Learning curve CSV path.
    #[arg(long)]
    curve: Option<PathBuf>,
    /// SGD learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// Adam step size.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta1: Option<f64>,
    #[arg(long)]
    beta2: Option<f64>,
    /// AdaDelta decay rate.
    #[arg(long)]
    rho: Option<f64>,
    /// Adam or AdaDelta epsilon.
    #[arg(long)]
    eps: Option<f64>,
}

fn parse_optimizer(s: &str) -> Result<OptimizerKind, String> {
    s.parse().map_err(|e: bob_url::Error| e.to_string())
}

enum Failure {
    Usage(String),
    Data(String),
    Diverged(String),
}

impl Failure {
    fn io(path: &Path, e: io::Error) -> Self {
        Failure::Data(format!("{}: {e}", path.display()))
    }
}

impl From<bob_url::Error> for Failure {
    fn from(e: bob_url::Error) -> Self {
        match e {
            bob_url::Error::Divergence { .. } => Failure::Diverged(e.to_string()),
            other => Failure::Data(other.to_string()),
        }
    }
}

fn threads() -> Result<usize, Failure> {
    match std::env::var("BOB_URL_THREADS") {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map_err(|_| Failure::Usage(format!("BOB_URL_THREADS={v:?} is not a thread count"))),
        _ => Ok(0),
    }
}

/// Shortest round-trip decimal, always with a fractional part.
fn real(v: f64) -> String {
    let s = v.to_string();
    if s.contains(['.', 'e', 'N', 'i']) {
        s
    } else {
        s + ".0"
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::io(path, e))
}

fn roc_csv(curve: &RocCurve) -> String {
    let mut out = String::from("fpr,tpr\n");
    for &(fpr, tpr) in &curve.points {
        writeln!(out, "{},{}", real(fpr), real(tpr)).unwrap();
    }
    out
}

fn scores_for(model: &MlpModel, data: &Path) -> Result<Vec<metrics::Scored>, Failure> {
    let d = dataset::load_labeled(data)?;
    if d.is_empty() {
        return Err(Failure::Data(format!("{}: no samples", data.display())));
    }
    Ok(trainer::score(model, &VectorSet::from_dataset(&d, threads()?)?)?)
}

fn optimizer_config(args: &TrainArgs) -> Result<OptimizerConfig, Failure> {
    let given = [
        ("--lr", args.lr.is_some(), OptimizerKind::Sgd == args.optimizer),
        ("--alpha", args.alpha.is_some(), OptimizerKind::Adam == args.optimizer),
        ("--beta1", args.beta1.is_some(), OptimizerKind::Adam == args.optimizer),
        ("--beta2", args.beta2.is_some(), OptimizerKind::Adam == args.optimizer),
        ("--rho", args.rho.is_some(), OptimizerKind::AdaDelta == args.optimizer),
        ("--eps", args.eps.is_some(), OptimizerKind::Sgd != args.optimizer),
    ];
    if let Some((flag, ..)) = given.iter().find(|(_, set, applies)| *set && !applies) {
        return Err(Failure::Usage(format!("{flag} does not apply to --optimizer {}", args.optimizer)));
    }
    let config = match OptimizerConfig::default_for(args.optimizer) {
        OptimizerConfig::Sgd { lr } => OptimizerConfig::Sgd { lr: args.lr.unwrap_or(lr) },
        OptimizerConfig::Adam { alpha, beta1, beta2, eps } => OptimizerConfig::Adam {
            alpha: args.alpha.unwrap_or(alpha),
            beta1: args.beta1.unwrap_or(beta1),
            beta2: args.beta2.unwrap_or(beta2),
            eps: args.eps.unwrap_or(eps),
        },
        OptimizerConfig::AdaDelta { rho, eps } => OptimizerConfig::AdaDelta {
            rho: args.rho.unwrap_or(rho),
            eps: args.eps.unwrap_or(eps),
        },
    };
    config.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(config)
}

fn save_split(train: &Dataset, val: &Dataset, out_train: &Path, out_val: &Path) -> Result<(), Failure> {
    dataset::save_labeled(train, out_train)?;
    dataset::save_labeled(val, out_val)?;
    eprintln!("wrote {} training and {} validation samples", train.len(), val.len());
    Ok(())
}

fn run_dataset(command: DatasetCommand) -> Result<(), Failure> {
    match command {
        DatasetCommand::Prepare {
            blacklist,
            whitelist_log,
            cleanse_with,
            per_hour,
            size,
            train_fraction,
            dedup,
            seed,
            out_train,
            out_val,
        } => {
            let black = dataset::load_phishtank_csv(&blacklist)?;
            let cleanse = match cleanse_with {
                Some(path) => dataset::load_phishtank_csv(path)?.dataset,
                None => black.dataset.clone(),
            };
            let log = dataset::load_access_log(&whitelist_log)?;
            let options = PrepareOptions {
                per_hour,
                size,
                train_fraction,
                seed,
                dedup_blacklist: dedup,
            };
            let (train, val, summary) = dataset::prepare(black, log, &cleanse, &options)?;
            eprintln!(
                "blacklist {} ({} rows skipped), log {} ({} lines skipped), {} removed by cleansing, {} per class",
                summary.blacklist,
                summary.blacklist_skipped,
                summary.log_entries,
                summary.log_skipped,
                summary.cleansed_away,
                summary.per_class
            );
            save_split(&train, &val, &out_train, &out_val)
        }
        DatasetCommand::Synth {
            per_class,
            train_fraction,
            seed,
            out_train,
            out_val,
        } => {
            let (black, white) = synthetic::generate(per_class, seed);
            let (train, val) = dataset::merge_shuffle_split(&black, &white, train_fraction, seed)?;
            save_split(&train, &val, &out_train, &out_val)
        }
    }
}

fn run_train(args: TrainArgs) -> Result<(), Failure> {
    let config = TrainConfig {
        batch_size: args.batch_size,
        epochs: args.epochs,
        dropout_ratio: args.dropout,
        optimizer: optimizer_config(&args)?,
        threads: threads()?,
        ..TrainConfig::new(args.seed)
    };
    config.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let train_set = dataset::load_labeled(&args.train)?;
    let val_set = dataset::load_labeled(&args.val)?;

    let mut curve = String::from(EpochRecord::CSV_HEADER);
    curve.push('\n');
    let result = trainer::train_observed(&config, &train_set, &val_set, |r| {
        eprintln!(
            "epoch {:>3}  train loss {:.5} acc {:.4}  val loss {:.5} acc {:.4}  {:.2}s",
            r.epoch, r.train_loss, r.train_accuracy, r.val_loss, r.val_accuracy, r.seconds
        );
        curve.push_str(&r.csv_row());
        curve.push('\n');
    });
    // The curve up to the failing epoch is still useful after a divergence.
    if let Some(path) = &args.curve {
        write_file(path, &curve)?;
    }
    let outcome = result?;
    model_io::save(&outcome.model, &args.out_model)?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let stdout = io::stdout();
    let mut out = io::BufWriter::new(stdout.lock());
    let stdout_err = |e: io::Error| Failure::Data(format!("stdout: {e}"));
    match cli.command {
        Command::Vectorize { url, format } => {
            let v = vectorize(&url)?;
            let values: Vec<String> = v.as_slice().iter().map(|&x| real(x)).collect();
            let sep = match format {
                VectorFormat::Lines => "\n",
                VectorFormat::Csv => ",",
            };
            writeln!(out, "{}", values.join(sep)).map_err(stdout_err)?;
        }
        Command::Dataset(command) => run_dataset(command)?,
        Command::Train(args) => run_train(args)?,
        Command::Evaluate { model, data, report, roc } => {
            let model = model.load()?;
            let scores = scores_for(&model, &data)?;
            let (summary, curve) = metrics::evaluate_scores(&scores)?;
            let json = serde_json::to_string_pretty(&summary).expect("report serializes") + "\n";
            match report {
                Some(path) => write_file(&path, &json)?,
                None => out.write_all(json.as_bytes()).map_err(stdout_err)?,
            }
            match (roc, curve) {
                (Some(path), Some(curve)) => write_file(&path, &roc_csv(&curve))?,
                (Some(path), None) => {
                    eprintln!("{}: only one class present, no ROC curve written", path.display())
                }
                _ => {}
            }
        }
        Command::Predict { model, url, stdin } => {
            let model = model.load()?;
            let mut line = |url: &str| -> Result<(), Failure> {
                let (_, p) = model.predict_proba(vectorize(url)?.as_slice())?;
                writeln!(out, "p_malicious={} verdict={}", real(p), metrics::predicted_label(p))
                    .map_err(stdout_err)
            };
            if stdin {
                for (n, input) in io::stdin().lock().lines().enumerate() {
                    let input = input.map_err(|e| Failure::Data(format!("stdin: {e}")))?;
                    let url = input.trim_end_matches('\r');
                    line(url).map_err(|e| match e {
                        Failure::Data(m) => Failure::Data(format!("stdin line {}: {m}", n + 1)),
                        other => other,
                    })?;
                }
            } else if let Some(url) = url {
                line(&url)?;
            }
        }
        Command::Roc { model, data, out: path } => {
            let model = model.load()?;
            let curve = metrics::roc(&scores_for(&model, &data)?)?;
            match path {
                Some(path) => write_file(&path, &roc_csv(&curve))?,
                None => out.write_all(roc_csv(&curve).as_bytes()).map_err(stdout_err)?,
            }
        }
    }
    out.flush().map_err(stdout_err)
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Diverged(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}
