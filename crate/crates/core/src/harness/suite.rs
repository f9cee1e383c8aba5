use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{DatasetSource, ExperimentConfig, OracleSource};
use crate::data::{gen_blobs, import_dataset, split_semisupervised, SemiDataset, Split};
use crate::error::{Error, Result};
use crate::oracle::{self, zero_shot_accuracy, PseudoLabelSet};
use crate::seeding::{derive, fnv1a};
use crate::ssl::{evaluate, train, Method};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub fingerprint: String,
    pub method: Method,
    pub oracle: String,
    pub k: usize,
    pub seed: u64,
    pub test_acc: f64,
    pub zero_shot_acc: Option<f64>,
    pub stage1_steps: usize,
    pub stage2_steps: usize,
    pub wall_seconds: f64,
    pub final_mask_rate: Option<f64>,
    #[serde(default)]
    pub error: Option<String>,
}

impl RunResult {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

/// Coordinates of one grid cell.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cell {
    pub method: Method,
    pub oracle: usize,
    pub k: usize,
    pub seed: u64,
}

pub fn oracle_label(src: &OracleSource) -> String {
    match src {
        OracleSource::Preset(name) => name.clone(),
        OracleSource::Accuracy(a) => format!("a={a}"),
        OracleSource::Import(p) => p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into()),
    }
}

pub fn cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    for &method in &cfg.methods {
        for oracle in 0..cfg.oracles.len().max(1) {
            for &k in &cfg.budgets {
                for &seed in &cfg.seeds {
                    out.push(Cell { method, oracle, k, seed });
                }
            }
        }
    }
    out
}

fn cell_oracle_label(cfg: &ExperimentConfig, cell: &Cell) -> String {
    cfg.oracles.get(cell.oracle).map_or_else(|| "none".to_string(), oracle_label)
}

pub fn fingerprint(cfg: &ExperimentConfig, cell: &Cell) -> String {
    let text = format!(
        "{}method={}\noracle={}\nk={}\nseed={}\n",
        cfg.identity_text(),
        cell.method,
        cell.oracle_key(cfg),
        cell.k,
        cell.seed
    );
    format!("{:016x}", fnv1a(text.as_bytes()))
}

impl Cell {
    fn oracle_key(&self, cfg: &ExperimentConfig) -> String {
        match cfg.oracles.get(self.oracle) {
            Some(OracleSource::Import(p)) => format!("import:{}", p.display()),
            Some(src) => oracle_label(src),
            None => "none".into(),
        }
    }

    /// Seeds of the split, the teacher and training. Method is not an input,
    /// so every method in a cell group sees the same split, labels and streams.
    fn seeds(&self, cfg: &ExperimentConfig) -> (u64, u64, u64) {
        let m = cfg.master_seed;
        let s = self.seed;
        let oracle = self.oracle_key(cfg);
        (
            derive(m, &format!("split/k={}/seed={s}", self.k)),
            derive(m, &format!("oracle/{oracle}/seed={s}")),
            derive(m, &format!("train/{oracle}/k={}/seed={s}", self.k)),
        )
    }
}

pub fn load_dataset(cfg: &ExperimentConfig) -> Result<SemiDataset> {
    match &cfg.dataset {
        DatasetSource::Generate(spec) => gen_blobs(spec),
        DatasetSource::Import(path) => import_dataset(path),
    }
}

fn teacher(cfg: &ExperimentConfig, ds: &SemiDataset, cell: &Cell, seed: u64) -> Result<Option<PseudoLabelSet>> {
    let Some(src) = cfg.oracles.get(cell.oracle) else {
        return Ok(None);
    };
    if let OracleSource::Import(path) = src {
        let pls = oracle::load(path)?;
        if pls.num_classes != ds.num_classes {
            return Err(Error::Config(format!(
                "{} has {} classes, dataset has {}",
                path.display(),
                pls.num_classes,
                ds.num_classes
            )));
        }
        return Ok(Some(pls));
    }
    let spec = cfg
        .oracle_spec(src, ds.num_classes, seed)?
        .expect("simulated source");
    Ok(Some(oracle::generate(&spec, ds, true)?))
}

/// Train and evaluate one cell.
pub fn run_cell(cfg: &ExperimentConfig, base: &SemiDataset, cell: &Cell) -> RunResult {
    let start = Instant::now();
    let mut result = RunResult {
        fingerprint: fingerprint(cfg, cell),
        method: cell.method,
        oracle: cell_oracle_label(cfg, cell),
        k: cell.k,
        seed: cell.seed,
        test_acc: 0.0,
        zero_shot_acc: None,
        stage1_steps: 0,
        stage2_steps: 0,
        wall_seconds: 0.0,
        final_mask_rate: None,
        error: None,
    };
    let run = || -> Result<_> {
        let (split_seed, oracle_seed, train_seed) = cell.seeds(cfg);
        let ds = split_semisupervised(base, cell.k, split_seed)?;
        let pls = teacher(cfg, &ds, cell, oracle_seed)?;
        let zs = match &pls {
            Some(p) => Some(zero_shot_accuracy(p, &ds, Split::Test)?),
            None => None,
        };
        let out = train::<f64>(cell.method, &ds, pls.as_ref(), &cfg.hyper, train_seed)?;
        let acc = evaluate(&out.model, &ds, Split::Test, pls.as_ref())?;
        Ok((acc, zs, out))
    };
    match run() {
        Ok((acc, zs, out)) => {
            result.test_acc = acc;
            result.zero_shot_acc = zs;
            result.stage1_steps = out.stage1_steps;
            result.stage2_steps = out.stage2_steps;
            result.final_mask_rate = out.final_mask_rate;
        }
        Err(e) => result.error = Some(e.to_string()),
    }
    result.wall_seconds = start.elapsed().as_secs_f64();
    result
}

pub fn results_path(dir: &Path) -> PathBuf {
    dir.join("results.jsonl")
}

/// Read a JSON-lines results file; a missing file is empty.
pub fn load_results(path: &Path) -> Result<Vec<RunResult>> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(path, e)),
    };
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::parse(path, n + 1, e.to_string()))?);
    }
    Ok(out)
}

/// Latest successful result per fingerprint, in grid order.
pub fn latest_ok(results: &[RunResult]) -> Vec<RunResult> {
    let mut by_fp: BTreeMap<&str, &RunResult> = BTreeMap::new();
    for r in results.iter().filter(|r| r.is_ok()) {
        by_fp.insert(&r.fingerprint, r);
    }
    let mut out: Vec<RunResult> = by_fp.into_values().cloned().collect();
    sort_results(&mut out);
    out
}

pub fn sort_results(results: &mut [RunResult]) {
    results.sort_by(|a, b| {
        (a.method, &a.oracle, a.k, a.seed)
            .cmp(&(b.method, &b.oracle, b.k, b.seed))
            .then(a.fingerprint.cmp(&b.fingerprint))
    });
}

/// Run every cell not already completed in `<output>/results.jsonl`.
///
/// Returns the successful results for this config's cells (old and new) in
/// grid order. Failed cells are recorded with their error and retried on the
/// next invocation.
pub fn run_suite(cfg: &ExperimentConfig) -> Result<Vec<RunResult>> {
    run_suite_with(cfg, |_| {})
}

/// As [`run_suite`], calling `progress` for each newly finished cell.
pub fn run_suite_with(cfg: &ExperimentConfig, mut progress: impl FnMut(&RunResult)) -> Result<Vec<RunResult>> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.output).map_err(|e| Error::io(&cfg.output, e))?;
    let path = results_path(&cfg.output);
    let existing = load_results(&path)?;
    let done: BTreeSet<String> = existing.iter().filter(|r| r.is_ok()).map(|r| r.fingerprint.clone()).collect();
    let pending: Vec<Cell> = cells(cfg)
        .into_iter()
        .filter(|c| !done.contains(&fingerprint(cfg, c)))
        .collect();

    let mut fresh = Vec::new();
    if !pending.is_empty() {
        let base = load_dataset(cfg)?;
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        let next = AtomicUsize::new(0);
        let (tx, rx) = mpsc::channel::<RunResult>();
        let workers = cfg.workers.min(pending.len());
        std::thread::scope(|scope| -> Result<()> {
            for _ in 0..workers {
                let tx = tx.clone();
                let (next, pending, base) = (&next, &pending, &base);
                scope.spawn(move || loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(cell) = pending.get(i) else { break };
                    if tx.send(run_cell(cfg, base, cell)).is_err() {
                        break;
                    }
                });
            }
            drop(tx);
            for r in rx {
                let line = serde_json::to_string(&r)?;
                writeln!(file, "{line}").map_err(|e| Error::io(&path, e))?;
                file.flush().map_err(|e| Error::io(&path, e))?;
                progress(&r);
                fresh.push(r);
            }
            Ok(())
        })?;
    }

    let wanted: BTreeSet<String> = cells(cfg).iter().map(|c| fingerprint(cfg, c)).collect();
    let all: Vec<RunResult> = existing.into_iter().chain(fresh).filter(|r| wanted.contains(&r.fingerprint)).collect();
    Ok(latest_ok(&all))
}
