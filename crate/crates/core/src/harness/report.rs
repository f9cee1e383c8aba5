use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::summary::SummaryRow;
use super::suite::RunResult;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Jsonl,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "jsonl" => Ok(Format::Jsonl),
            _ => Err(Error::Config(format!("unknown report format `{s}` (csv|jsonl)"))),
        }
    }
}

const RUN_COLUMNS: [&str; 12] = [
    "fingerprint",
    "method",
    "oracle",
    "k",
    "seed",
    "test_acc",
    "zero_shot_acc",
    "stage1_steps",
    "stage2_steps",
    "wall_seconds",
    "final_mask_rate",
    "error",
];

const SUMMARY_COLUMNS: [&str; 6] = ["method", "oracle", "k", "median_acc", "std_acc", "n_seeds"];

fn csv_bytes<T: serde::Serialize>(rows: &[T], header: &[&str]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Config(e.to_string()))
}

pub fn runs_csv(results: &[RunResult]) -> Result<String> {
    Ok(String::from_utf8(csv_bytes(results, &RUN_COLUMNS)?).expect("utf-8"))
}

pub fn runs_jsonl(results: &[RunResult]) -> Result<String> {
    let mut s = String::new();
    for r in results {
        s.push_str(&serde_json::to_string(r)?);
        s.push('\n');
    }
    Ok(s)
}

pub fn parse_runs_csv(text: &str) -> Result<Vec<RunResult>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn parse_runs_jsonl(text: &str) -> Result<Vec<RunResult>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

pub fn summary_csv(rows: &[SummaryRow]) -> Result<String> {
    Ok(String::from_utf8(csv_bytes(rows, &SUMMARY_COLUMNS)?).expect("utf-8"))
}

pub fn parse_summary_csv(text: &str) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Aligned plain-text table of the summary.
pub fn summary_table(rows: &[SummaryRow]) -> String {
    let mut s = String::from("# test accuracy: median ± population std over seeds\n");
    let _ = writeln!(s, "{:<18} {:<22} {:>4} {:>8} {:>8} {:>6}", "method", "oracle", "k", "median", "std", "seeds");
    for r in rows {
        let _ = writeln!(
            s,
            "{:<18} {:<22} {:>4} {:>8.4} {:>8.4} {:>6}",
            r.method, r.oracle, r.k, r.median_acc, r.std_acc, r.n_seeds
        );
    }
    s
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Write the raw run table and summary tables into `dir`; returns the paths.
pub fn report(results: &[RunResult], summary: &[SummaryRow], format: Format, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (name, raw) = match format {
        Format::Csv => ("runs.csv", runs_csv(results)?),
        Format::Jsonl => ("runs.jsonl", runs_jsonl(results)?),
    };
    let paths = vec![dir.join(name), dir.join("summary.csv"), dir.join("summary.txt")];
    write(&paths[0], &raw)?;
    write(&paths[1], &summary_csv(summary)?)?;
    write(&paths[2], &summary_table(summary))?;
    Ok(paths)
}
