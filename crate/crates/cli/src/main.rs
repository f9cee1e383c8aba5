use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use zeromatch_core::data::{export_dataset, import_dataset, split_semisupervised, Split};
use zeromatch_core::harness::{
    self, check_acceptance, load_criteria, load_results, render_verdicts, results_path, summarize, summary_csv,
    summary_table, ExperimentConfig, Format, OracleSource,
};
use zeromatch_core::nn::save_checkpoint;
use zeromatch_core::oracle;
use zeromatch_core::seeding::derive;
use zeromatch_core::ssl::{evaluate, train, write_step_log, Method};
use zeromatch_core::{Error, Result};

#[derive(Parser)]
#[command(name = "zeromatch", version, about = "Semi-supervised learning with simulated foundation-model pseudo-labels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// `key = value` experiment config; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic dataset and write it as CSV.
    GenData {
        #[command(flatten)]
        common: Common,
    },
    /// Simulate a teacher and write its pseudo-label file.
    GenPseudolabels {
        #[command(flatten)]
        common: Common,
        /// Dataset CSV; generated from the config when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Oracle preset name or accuracy; the config's first oracle when omitted.
        #[arg(long)]
        oracle: Option<String>,
    },
    /// Train one student and report its test accuracy.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "zeromatch")]
        method: String,
        /// Labeled samples per class.
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        pseudolabels: Option<PathBuf>,
        #[arg(long)]
        oracle: Option<String>,
    },
    /// Run the full method × oracle × budget × seed grid (resumable).
    RunSuite {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Median and std per cell from a results file.
    Summarize {
        #[command(flatten)]
        common: Common,
        /// Results JSON-lines file; `<out>/results.jsonl` when omitted.
        #[arg(long)]
        results: Option<PathBuf>,
    },
    /// Evaluate acceptance criteria; exits nonzero on any failure.
    Check {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        results: Option<PathBuf>,
        #[arg(long)]
        criteria: PathBuf,
    },
    /// Write raw and summary tables.
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        results: Option<PathBuf>,
        #[arg(long, default_value = "csv")]
        format: String,
    },
}

fn config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &common.out {
        cfg.output = out.clone();
    }
    Ok(cfg)
}

fn out_dir(common: &Common, cfg: &ExperimentConfig) -> Result<PathBuf> {
    let dir = common.out.clone().unwrap_or_else(|| cfg.output.clone());
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
    Ok(dir)
}

fn oracle_source(arg: Option<&str>, cfg: &ExperimentConfig) -> Result<OracleSource> {
    match arg {
        Some(s) => Ok(match s.parse::<f64>() {
            Ok(a) => OracleSource::Accuracy(a),
            Err(_) => OracleSource::Preset(s.to_string()),
        }),
        None => cfg
            .oracles
            .first()
            .cloned()
            .ok_or_else(|| Error::Config("no oracle configured".into())),
    }
}

fn dataset(data: Option<&Path>, cfg: &ExperimentConfig) -> Result<zeromatch_core::data::SemiDataset> {
    match data {
        Some(p) => import_dataset(p),
        None => harness::load_dataset(cfg),
    }
}

fn pseudo_labels(
    src: &OracleSource,
    cfg: &ExperimentConfig,
    ds: &zeromatch_core::data::SemiDataset,
    seed: u64,
) -> Result<oracle::PseudoLabelSet> {
    match src {
        OracleSource::Import(p) => oracle::load(p),
        _ => {
            let spec = cfg.oracle_spec(src, ds.num_classes, seed)?.expect("simulated oracle");
            oracle::generate(&spec, ds, true)
        }
    }
}

fn results_file(results: Option<&PathBuf>, common: &Common) -> Result<PathBuf> {
    match results {
        Some(p) => Ok(p.clone()),
        None => Ok(results_path(&config(common)?.output)),
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::GenData { common } => {
            let mut cfg = config(&common)?;
            if let (Some(seed), harness::DatasetSource::Generate(spec)) = (common.seed, &mut cfg.dataset) {
                spec.seed = seed;
            }
            let ds = harness::load_dataset(&cfg)?;
            let path = out_dir(&common, &cfg)?.join("dataset.csv");
            export_dataset(&ds, &path)?;
            println!("wrote {} ({} train, {} test)", path.display(), ds.n_train(), ds.n_test());
        }
        Command::GenPseudolabels { common, data, oracle: name } => {
            let cfg = config(&common)?;
            let ds = dataset(data.as_deref(), &cfg)?;
            let src = oracle_source(name.as_deref(), &cfg)?;
            let pls = pseudo_labels(&src, &cfg, &ds, common.seed.unwrap_or(cfg.master_seed))?;
            let path = out_dir(&common, &cfg)?.join("pseudolabels.tsv");
            oracle::save(&pls, &path)?;
            let acc = oracle::zero_shot_accuracy(&pls, &ds, Split::Test)?;
            println!("wrote {} ({} records, test accuracy {acc:.4})", path.display(), pls.len());
        }
        Command::Train {
            common,
            method,
            k,
            data,
            pseudolabels,
            oracle: name,
        } => {
            let cfg = config(&common)?;
            let method: Method = method.parse()?;
            let seed = common.seed.unwrap_or(cfg.master_seed);
            let base = dataset(data.as_deref(), &cfg)?;
            let ds = split_semisupervised(&base, k, derive(seed, "split"))?;
            let pls = match (&pseudolabels, method.needs_pseudo_labels() || name.is_some()) {
                (Some(p), _) => Some(oracle::load(p)?),
                (None, true) => Some(pseudo_labels(
                    &oracle_source(name.as_deref(), &cfg)?,
                    &cfg,
                    &ds,
                    derive(seed, "oracle"),
                )?),
                (None, false) => None,
            };
            let out = train::<f64>(method, &ds, pls.as_ref(), &cfg.hyper, derive(seed, "train"))?;
            let acc = evaluate(&out.model, &ds, Split::Test, pls.as_ref())?;
            let dir = out_dir(&common, &cfg)?;
            save_checkpoint(&dir.join("model.ckpt"), &out.model.named_params())?;
            write_step_log(&dir.join("train_log.csv"), &out.log)?;
            let zs = match &pls {
                Some(p) => Some(oracle::zero_shot_accuracy(p, &ds, Split::Test)?),
                None => None,
            };
            let summary = serde_json::json!({
                "method": method,
                "k": k,
                "seed": seed,
                "test_acc": acc,
                "zero_shot_acc": zs,
                "stage1_steps": out.stage1_steps,
                "stage2_steps": out.stage2_steps,
                "final_mask_rate": out.final_mask_rate,
                "stage1_agreement": out.stage1_agreement,
            });
            let path = dir.join("result.json");
            std::fs::write(&path, format!("{summary:#}\n")).map_err(|e| Error::Io { path, source: e })?;
            println!("{method} k={k} seed={seed}: test accuracy {acc:.4}");
        }
        Command::RunSuite { common, workers } => {
            let mut cfg = config(&common)?;
            if let Some(seed) = common.seed {
                cfg.master_seed = seed;
            }
            if let Some(w) = workers {
                cfg.workers = w;
            }
            let total = harness::cells(&cfg).len();
            let mut n = 0;
            let results = harness::run_suite_with(&cfg, |r| {
                n += 1;
                match &r.error {
                    None => eprintln!(
                        "[{n}] {} {} k={} seed={}: {:.4} ({:.1}s)",
                        r.method, r.oracle, r.k, r.seed, r.test_acc, r.wall_seconds
                    ),
                    Some(e) => eprintln!("[{n}] {} {} k={} seed={}: error: {e}", r.method, r.oracle, r.k, r.seed),
                }
            })?;
            let rows = summarize(&results);
            std::fs::write(cfg.output.join("summary.csv"), summary_csv(&rows)?)
                .map_err(|e| Error::Io { path: cfg.output.join("summary.csv"), source: e })?;
            print!("{}", summary_table(&rows));
            eprintln!("{n} new runs, {}/{total} cells complete", results.len());
            return Ok(results.len() == total);
        }
        Command::Summarize { common, results } => {
            let path = results_file(results.as_ref(), &common)?;
            let rows = summarize(&load_results(&path)?);
            if let Some(out) = &common.out {
                std::fs::create_dir_all(out).map_err(|e| Error::Io { path: out.clone(), source: e })?;
                let p = out.join("summary.csv");
                std::fs::write(&p, summary_csv(&rows)?).map_err(|e| Error::Io { path: p, source: e })?;
            }
            print!("{}", summary_table(&rows));
        }
        Command::Check { common, results, criteria } => {
            let path = results_file(results.as_ref(), &common)?;
            let rows = summarize(&load_results(&path)?);
            let verdicts = check_acceptance(&rows, &load_criteria(&criteria)?);
            print!("{}", render_verdicts(&verdicts));
            let failed = verdicts.iter().filter(|v| !v.passed).count();
            println!("{} passed, {failed} failed", verdicts.len() - failed);
            return Ok(failed == 0);
        }
        Command::Report { common, results, format } => {
            let format: Format = format.parse()?;
            let path = results_file(results.as_ref(), &common)?;
            let runs = harness::latest_ok(&load_results(&path)?);
            let rows = summarize(&runs);
            let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("report"));
            for p in harness::report(&runs, &rows, format, &dir)? {
                println!("wrote {}", p.display());
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
