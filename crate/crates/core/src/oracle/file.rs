//! Line-oriented pseudo-label interchange file.
//!
//! ```text
//! #K=4
//! #N=3
//! #source=desk-high
//! #seed=7
//! #d_e=2
//! 0	1	0.1,0.7,0.1,0.1	1.5,-0.25
//! 1	3		0.5,0.5
//! 2	0
//! ```
//!
//! Data lines are `index<TAB>hard[<TAB>soft][<TAB>embedding]`. An empty soft
//! field means "no soft distribution". Floats carry 17 significant digits.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{PseudoLabelSet, PseudoRecord};
use crate::error::{Error, Result};

fn join(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:.16e}")).collect::<Vec<_>>().join(",")
}

pub fn serialize(pls: &PseudoLabelSet) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "#K={}", pls.num_classes);
    let _ = writeln!(out, "#N={}", pls.len());
    let _ = writeln!(out, "#source={}", pls.source);
    let _ = writeln!(out, "#seed={}", pls.seed);
    let _ = writeln!(out, "#d_e={}", pls.embed_dim);
    for (index, r) in &pls.records {
        let _ = write!(out, "{index}\t{}", r.hard);
        match (&r.soft, &r.embedding) {
            (None, None) => {}
            (Some(s), None) => {
                let _ = write!(out, "\t{}", join(s));
            }
            (s, Some(e)) => {
                let _ = write!(out, "\t{}\t{}", s.as_deref().map(join).unwrap_or_default(), join(e));
            }
        }
        out.push('\n');
    }
    out
}

pub fn save(pls: &PseudoLabelSet, path: &Path) -> Result<()> {
    std::fs::write(path, serialize(pls)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<PseudoLabelSet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text, path)
}

fn floats(field: &str, path: &Path, line: usize) -> Result<Vec<f64>> {
    field
        .split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| Error::parse(path, line, format!("bad number `{v}`")))
        })
        .collect()
}

/// Split a header line (leading `#` removed) into `key=value` tokens; a new
/// token starts at every `#` that follows whitespace.
fn header_tokens(header: &str) -> Vec<&str> {
    let bytes = header.as_bytes();
    let mut tokens = Vec::new();
    let mut start = 0;
    for i in 1..bytes.len() {
        if bytes[i] == b'#' && bytes[i - 1].is_ascii_whitespace() {
            tokens.push(header[start..i].trim_end());
            start = i + 1;
        }
    }
    tokens.push(header[start..].trim_end());
    tokens
}

pub fn parse(text: &str, path: &Path) -> Result<PseudoLabelSet> {
    let mut k = None;
    let mut n = None;
    let mut source = String::new();
    let mut seed = 0;
    let mut embed_dim = 0;
    let mut records = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim_end_matches('\r');
        if trimmed.trim().is_empty() {
            continue;
        }
        if let Some(header) = trimmed.strip_prefix('#') {
            for token in header_tokens(header) {
                let (key, value) = token
                    .split_once('=')
                    .ok_or_else(|| Error::parse(path, line, format!("bad header `{token}`")))?;
                let key = key.trim();
                let int = || {
                    value
                        .trim()
                        .parse::<u64>()
                        .map_err(|_| Error::parse(path, line, format!("bad integer for {key}")))
                };
                match key {
                    "K" => k = Some(int()? as usize),
                    "N" => n = Some(int()? as usize),
                    "seed" => seed = int()?,
                    "d_e" => embed_dim = int()? as usize,
                    "source" => source = value.to_string(),
                    _ => return Err(Error::parse(path, line, format!("unknown header key `{key}`"))),
                }
            }
            continue;
        }
        let k = k.ok_or_else(|| Error::parse(path, line, "data before #K header"))?;
        let fields: Vec<&str> = trimmed.split('\t').collect();
        if fields.len() < 2 || fields.len() > 4 {
            return Err(Error::parse(path, line, format!("expected 2-4 tab-separated fields, got {}", fields.len())));
        }
        let index: usize = fields[0]
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, line, format!("bad index `{}`", fields[0])))?;
        let hard: usize = fields[1]
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, line, format!("bad label `{}`", fields[1])))?;
        if hard >= k {
            return Err(Error::Validation {
                index,
                message: format!("label {hard} outside 0..{k}"),
            });
        }
        let (mut soft, mut embedding) = (None, None);
        match fields.len() {
            3 if !fields[2].is_empty() => {
                let v = floats(fields[2], path, line)?;
                if embed_dim > 0 && v.len() == embed_dim && v.len() != k {
                    embedding = Some(v);
                } else {
                    soft = Some(v);
                }
            }
            4 => {
                if !fields[2].is_empty() {
                    soft = Some(floats(fields[2], path, line)?);
                }
                embedding = Some(floats(fields[3], path, line)?);
            }
            _ => {}
        }
        if records.insert(index, PseudoRecord { hard, soft, embedding }).is_some() {
            return Err(Error::parse(path, line, format!("duplicate index {index}")));
        }
    }
    let k = k.ok_or_else(|| Error::parse(path, 1, "missing #K header"))?;
    if let Some(n) = n {
        if n != records.len() {
            return Err(Error::parse(path, 1, format!("#N={n} but {} records", records.len())));
        }
    }
    let pls = PseudoLabelSet {
        num_classes: k,
        embed_dim,
        source,
        seed,
        records,
    };
    pls.validate()?;
    Ok(pls)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_blobs, BlobSpec};
    use crate::oracle::{generate, EmbeddingSpec, OracleSpec};

    #[test]
    fn round_trip_with_all_fields() {
        let ds = gen_blobs(&BlobSpec {
            n_per_class: 25,
            ..Default::default()
        })
        .unwrap();
        let spec = OracleSpec {
            embedding: Some(EmbeddingSpec::new(5, 0.5)),
            soft_smoothing: Some(0.2),
            ..OracleSpec::new(4, 0.6, 3)
        };
        let pls = generate(&spec, &ds, false).unwrap();
        assert_eq!(pls.len(), 80);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pl.tsv");
        save(&pls, &p).unwrap();
        assert_eq!(load(&p).unwrap(), pls);
    }

    #[test]
    fn embedding_without_soft_round_trips() {
        let ds = gen_blobs(&BlobSpec {
            n_per_class: 10,
            ..Default::default()
        })
        .unwrap();
        let spec = OracleSpec {
            embedding: Some(EmbeddingSpec::new(4, 0.5)),
            ..OracleSpec::new(4, 0.6, 3)
        };
        let pls = generate(&spec, &ds, true).unwrap();
        assert_eq!(parse(&serialize(&pls), Path::new("mem")).unwrap(), pls);
    }

    #[test]
    fn hard_only_external_file() {
        let text = "#K=3 #N=2 #source=hand written #seed=0 #d_e=0\n5\t2\n9\t0\n";
        let pls = parse(text, Path::new("ext")).unwrap();
        assert_eq!(pls.len(), 2);
        assert_eq!(pls.source, "hand written");
        assert_eq!(pls.get(5).unwrap().hard, 2);
        assert!(pls.get(9).unwrap().soft.is_none() && pls.get(9).unwrap().embedding.is_none());
    }

    #[test]
    fn out_of_range_label_names_index() {
        let text = "#K=3\n#N=1\n#source=x\n#seed=0\n#d_e=0\n17\t3\n";
        match parse(text, Path::new("x")) {
            Err(Error::Validation { index: 17, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let text = "#K=3\n#N=1\n#source=x\n#seed=0\n#d_e=0\n0\tone\n";
        assert!(matches!(parse(text, Path::new("x")), Err(Error::Parse { line: 6, .. })));
    }
}
