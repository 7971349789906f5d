use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use reconcap::data::corpus::{write_corpus_dir, CAPTIONS_FILE, FEATURES_DIR};
use reconcap::data::{gen_synthetic, read_features, sample_frames, Corpus, SyntheticSpec};
use reconcap::model::CaptionModel;
use reconcap::train::config::parse_kv;
use reconcap::train::{
    evaluate, hidden_diagnostic, lambda_sweep, train, write_epoch_csv, Checkpoint, TrainConfig, SWEEP_HEADER,
};
use reconcap::Error;

const EXIT_USAGE: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_CORRUPT: u8 = 4;

#[derive(Parser)]
#[command(name = "reconcap", version, about = "Video captioning with hidden-state reconstruction")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a deterministic synthetic corpus
    GenSynthetic {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        num_videos: u32,
        #[arg(long, default_value_t = 32, value_parser = clap::value_parser!(u32).range(8..))]
        dim: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train a model and write a checkpoint and epoch log
    Train(TrainArgs),
    /// Score a checkpoint on a split; prints a JSON report
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(1..))]
        beam: u32,
    },
    /// Caption one feature file
    Caption {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(1..))]
        beam: u32,
    },
    /// Export last decoder hidden states under teacher forcing and greedy decoding
    Diagnose {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = "test")]
        split: String,
        /// CSV destination
        #[arg(long)]
        out: PathBuf,
    },
    /// Joint training over several λ values; prints a CSV
    SweepLambda {
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2,0.5,1.0")]
        lambdas: Vec<f64>,
    },
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Corpus directory holding captions.jsonl, features/ and split files
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    features_dir: Option<PathBuf>,
    #[arg(long)]
    captions: Option<PathBuf>,
    #[arg(long)]
    splits_dir: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct TrainArgs {
    /// Flat `key = value` configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    data: DataArgs,
    /// Output directory for the checkpoint and epoch log
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    stage: Option<String>,
    #[arg(long)]
    reconstructor: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Extra `key=value` overrides, applied last
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Numeric(String),
    Corrupt(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Divergence { .. } => Failure::Numeric(e.to_string()),
            e => Failure::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type CliResult<T = ()> = Result<T, Failure>;

const PATH_KEYS: [&str; 5] = ["corpus_dir", "features_dir", "captions_file", "splits_dir", "out_dir"];

/// Resolved corpus locations.
struct DataPaths {
    features: PathBuf,
    captions: PathBuf,
    splits: PathBuf,
}

impl DataPaths {
    fn resolve(args: &DataArgs, file: &std::collections::BTreeMap<String, String>) -> CliResult<Self> {
        let from_file = |k: &str| file.get(k).map(PathBuf::from);
        let corpus = args.corpus.clone().or_else(|| from_file("corpus_dir"));
        let pick = |flag: &Option<PathBuf>, key: &str, default: Option<PathBuf>| {
            flag.clone().or_else(|| from_file(key)).or(default)
        };
        let features = pick(&args.features_dir, "features_dir", corpus.as_ref().map(|c| c.join(FEATURES_DIR)));
        let captions = pick(&args.captions, "captions_file", corpus.as_ref().map(|c| c.join(CAPTIONS_FILE)));
        let splits = pick(&args.splits_dir, "splits_dir", corpus.clone());
        match (features, captions, splits) {
            (Some(features), Some(captions), Some(splits)) => {
                let paths = DataPaths {
                    features,
                    captions,
                    splits,
                };
                for p in [&paths.features, &paths.captions, &paths.splits] {
                    if !p.exists() {
                        return Err(Failure::Usage(format!("missing path {}", p.display())));
                    }
                }
                Ok(paths)
            }
            _ => Err(Failure::Usage(
                "corpus location required: --corpus or --features-dir/--captions/--splits-dir".into(),
            )),
        }
    }
}

fn load_checkpoint(path: &Path) -> CliResult<(Checkpoint, CaptionModel)> {
    if !path.exists() {
        return Err(Failure::Usage(format!("missing path {}", path.display())));
    }
    let ck = Checkpoint::load(path).map_err(|e| Failure::Corrupt(format!("{}: {e}", path.display())))?;
    let model = ck.model().map_err(|e| Failure::Corrupt(format!("{}: {e}", path.display())))?;
    Ok((ck, model))
}

fn load_eval_corpus(ck: &Checkpoint, data: &DataArgs) -> CliResult<Corpus> {
    let paths = DataPaths::resolve(data, &Default::default())?;
    let corpus = Corpus::load_with_vocab(&paths.features, &paths.captions, &paths.splits, ck.vocab.clone())?;
    if let Some(d) = corpus.feature_dim() {
        if d != ck.feature_dim {
            return Err(Failure::Usage(format!(
                "corpus features have dimension {d}, checkpoint expects {}",
                ck.feature_dim
            )));
        }
    }
    Ok(corpus)
}

struct TrainSetup {
    cfg: TrainConfig,
    corpus: Corpus,
    out: Option<PathBuf>,
}

fn train_setup(args: &TrainArgs) -> CliResult<TrainSetup> {
    let file = match &args.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
            parse_kv(&text)?
        }
        None => Default::default(),
    };
    let mut cfg = TrainConfig::default();
    for (k, v) in &file {
        if !PATH_KEYS.contains(&k.as_str()) {
            cfg.set(k, v)?;
        }
    }
    let flags = [
        ("stage", args.stage.clone()),
        ("reconstructor", args.reconstructor.clone()),
        ("lambda", args.lambda.clone()),
        ("seed", args.seed.map(|s| s.to_string())),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            cfg.set(k, &v)?;
        }
    }
    for kv in &args.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    cfg.validate()?;
    let out = args.out.clone().or_else(|| file.get("out_dir").map(PathBuf::from));
    let paths = DataPaths::resolve(&args.data, &file)?;
    let corpus = Corpus::load(&paths.features, &paths.captions, &paths.splits, cfg.min_count)?;
    Ok(TrainSetup { cfg, corpus, out })
}

fn print_stdout(s: &str) -> CliResult {
    let mut out = std::io::stdout().lock();
    out.write_all(s.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    match cli.cmd {
        Command::GenSynthetic {
            out,
            num_videos,
            dim,
            seed,
        } => {
            let corpus = gen_synthetic(SyntheticSpec::new(seed, num_videos as usize, dim as usize));
            write_corpus_dir(&out, &corpus.features, &corpus.captions, &corpus.splits)?;
            log::info!(
                "wrote {} videos to {} (train {}, val {}, test {})",
                num_videos,
                out.display(),
                corpus.splits.train.len(),
                corpus.splits.val.len(),
                corpus.splits.test.len()
            );
            Ok(())
        }
        Command::Train(args) => {
            let setup = train_setup(&args)?;
            let out = setup
                .out
                .ok_or_else(|| Failure::Usage("--out (or out_dir in the config) is required".into()))?;
            fs::create_dir_all(&out).map_err(|e| Failure::Usage(format!("{}: {e}", out.display())))?;
            let outcome = train(setup.cfg, &setup.corpus)?;
            let ck_path = out.join("checkpoint.rcnc");
            outcome.checkpoint.save(&ck_path)?;
            let log_path = out.join("epochs.csv");
            let mut buf = Vec::new();
            write_epoch_csv(&outcome.log, &mut buf)?;
            fs::write(&log_path, buf).map_err(|e| Failure::Usage(format!("{}: {e}", log_path.display())))?;
            let phases: Vec<_> = outcome
                .phases
                .iter()
                .map(|p| {
                    json!({
                        "phase": p.phase.to_string(),
                        "epochs": p.epochs,
                        "best_epoch": p.best_epoch,
                        "best_val_cider": p.best_cider,
                    })
                })
                .collect();
            let summary = json!({
                "checkpoint": ck_path,
                "epoch_log": log_path,
                "best_val_cider": outcome.checkpoint.best_cider,
                "phases": phases,
            });
            print_stdout(&format!("{summary}\n"))
        }
        Command::Eval {
            checkpoint,
            data,
            split,
            beam,
        } => {
            let (ck, model) = load_checkpoint(&checkpoint)?;
            let corpus = load_eval_corpus(&ck, &data)?;
            let ev = evaluate(&model, &corpus, &split, beam as usize, ck.config.cider_variant)?;
            print_stdout(&format!("{}\n", serde_json::to_string(&ev.report).expect("serializable report")))
        }
        Command::Caption {
            checkpoint,
            features,
            beam,
        } => {
            let (ck, model) = load_checkpoint(&checkpoint)?;
            if !features.exists() {
                return Err(Failure::Usage(format!("missing path {}", features.display())));
            }
            let vf = read_features(&features)?;
            if vf.dim() != ck.feature_dim {
                return Err(Failure::Usage(format!(
                    "features have dimension {}, checkpoint expects {}",
                    vf.dim(),
                    ck.feature_dim
                )));
            }
            let decoded = model.beam(&sample_frames(&vf)?, beam as usize)?;
            print_stdout(&format!("{}\n", ck.vocab.render(&decoded.tokens)))
        }
        Command::Diagnose {
            checkpoint,
            data,
            split,
            out,
        } => {
            let (ck, model) = load_checkpoint(&checkpoint)?;
            let corpus = load_eval_corpus(&ck, &data)?;
            let entries = corpus.split_entries(&split)?;
            let diag = hidden_diagnostic(&model, &entries)?;
            let mut buf = Vec::new();
            diag.write_csv(&mut buf)?;
            fs::write(&out, buf).map_err(|e| Failure::Usage(format!("{}: {e}", out.display())))?;
            let summary = json!({
                "discrepancy": diag.discrepancy,
                "rows": diag.rows.len(),
                "csv": out,
            });
            print_stdout(&format!("{summary}\n"))
        }
        Command::SweepLambda { train, lambdas } => {
            let setup = train_setup(&train)?;
            let rows = lambda_sweep(&setup.cfg, &setup.corpus, &lambdas)?;
            let mut csv = format!("{SWEEP_HEADER}\n");
            for r in &rows {
                csv.push_str(&r.csv_row());
                csv.push('\n');
            }
            if let Some(dir) = setup.out {
                fs::create_dir_all(&dir).map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))?;
                let p = dir.join("lambda_sweep.csv");
                fs::write(&p, &csv).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
            }
            print_stdout(&csv)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (code, msg) = match f {
                Failure::Usage(m) => (EXIT_USAGE, m),
                Failure::Numeric(m) => (EXIT_NUMERIC, m),
                Failure::Corrupt(m) => (EXIT_CORRUPT, m),
            };
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
