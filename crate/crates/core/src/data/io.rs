use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{BlobSpec, SemiDataset, Split};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Sidecar record written next to an exported dataset CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub num_classes: usize,
    pub dim: usize,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub labeled_indices: Vec<usize>,
    pub generator: Option<BlobSpec>,
    pub class_means: Option<Vec<Vec<f64>>>,
}

pub fn meta_path(csv_path: &Path) -> PathBuf {
    let mut name = csv_path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".meta.json");
    csv_path.with_file_name(name)
}

/// Write `split,index,label,f0..f{d-1}` rows plus `<path>.meta.json`.
pub fn export_dataset(ds: &SemiDataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["split".to_string(), "index".into(), "label".into()];
    header.extend((0..ds.dim()).map(|j| format!("f{j}")));
    w.write_record(&header)?;
    for split in [Split::Train, Split::Test] {
        let feats = ds.features(split);
        for (row, &label) in ds.labels(split).iter().enumerate() {
            let mut rec = vec![
                split.as_str().to_string(),
                ds.global_index(split, row).to_string(),
                label.to_string(),
            ];
            rec.extend(feats.row(row).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    let meta = DatasetMeta {
        num_classes: ds.num_classes,
        dim: ds.dim(),
        seed: ds.seed,
        n_train: ds.n_train(),
        n_test: ds.n_test(),
        labeled_indices: ds.labeled_indices.clone(),
        generator: ds.generator,
        class_means: ds.class_means.clone(),
    };
    let mp = meta_path(path);
    std::fs::write(&mp, serde_json::to_string_pretty(&meta)?).map_err(|e| Error::io(&mp, e))
}

pub fn import_dataset(path: &Path) -> Result<SemiDataset> {
    let mp = meta_path(path);
    let meta: DatasetMeta =
        serde_json::from_str(&std::fs::read_to_string(&mp).map_err(|e| Error::io(&mp, e))?)?;
    let mut r = csv::Reader::from_path(path)?;
    let mut train = vec![None; meta.n_train];
    let mut test = vec![None; meta.n_test];
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() != 3 + meta.dim {
            return Err(Error::parse(path, line, format!("expected {} columns, got {}", 3 + meta.dim, rec.len())));
        }
        let index: usize = rec[1].parse().map_err(|_| Error::parse(path, line, "bad index"))?;
        let label: usize = rec[2].parse().map_err(|_| Error::parse(path, line, "bad label"))?;
        if label >= meta.num_classes {
            return Err(Error::Validation {
                index,
                message: format!("label {label} outside 0..{}", meta.num_classes),
            });
        }
        let x: Vec<f64> = (3..rec.len())
            .map(|j| rec[j].parse().map_err(|_| Error::parse(path, line, format!("bad feature `{}`", &rec[j]))))
            .collect::<Result<_>>()?;
        let slot = match &rec[0] {
            "train" if index < meta.n_train => &mut train[index],
            "test" if index >= meta.n_train && index - meta.n_train < meta.n_test => &mut test[index - meta.n_train],
            other => return Err(Error::parse(path, line, format!("bad split/index `{other}`/{index}"))),
        };
        *slot = Some((x, label));
    }
    let pack = |rows: Vec<Option<(Vec<f64>, usize)>>, offset: usize| -> Result<(Tensor<f64>, Vec<usize>)> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * meta.dim);
        let mut labels = Vec::with_capacity(n);
        for (i, row) in rows.into_iter().enumerate() {
            let (x, y) = row.ok_or_else(|| Error::Coverage { missing: vec![offset + i] })?;
            data.extend(x);
            labels.push(y);
        }
        Ok((Tensor::new(vec![n, meta.dim], data)?, labels))
    };
    let (train_features, train_labels) = pack(train, 0)?;
    let (test_features, test_labels) = pack(test, meta.n_train)?;
    Ok(SemiDataset {
        num_classes: meta.num_classes,
        train_features,
        train_labels,
        test_features,
        test_labels,
        labeled_indices: meta.labeled_indices,
        seed: meta.seed,
        generator: meta.generator,
        class_means: meta.class_means,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_blobs, split_semisupervised};

    #[test]
    fn export_import_round_trip() {
        let base = gen_blobs(&BlobSpec {
            n_per_class: 15,
            dim: 5,
            ..Default::default()
        })
        .unwrap();
        let ds = split_semisupervised(&base, 2, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("blobs.csv");
        export_dataset(&ds, &p).unwrap();
        assert!(meta_path(&p).exists());
        let header = std::fs::read_to_string(&p).unwrap();
        assert!(header.starts_with("split,index,label,f0,f1,f2,f3,f4\n"));
        assert_eq!(import_dataset(&p).unwrap(), ds);
    }
}
