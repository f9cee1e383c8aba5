//! Line-oriented `key = value` experiment configuration.
//!
//! Blank lines and `#` comments are ignored; list values are comma-separated.
//! See the README for the full key reference.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::data::BlobSpec;
use crate::error::{Error, Result};
use crate::optim::AdamWConfig;
use crate::oracle::{preset, Confusion, EmbeddingSpec, OracleSpec};
use crate::ssl::{KdInput, Method, SslHyper};

#[derive(Clone, Debug, PartialEq)]
pub enum DatasetSource {
    Generate(BlobSpec),
    Import(PathBuf),
}

/// One teacher in the grid.
#[derive(Clone, Debug, PartialEq)]
pub enum OracleSource {
    Preset(String),
    Accuracy(f64),
    Import(PathBuf),
}

/// Settings applied on top of every simulated oracle.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OracleOverrides {
    pub confusion: Option<Confusion>,
    pub fallback_rate: Option<f64>,
    pub default_class: Option<usize>,
    pub embedding_dim: Option<usize>,
    pub embedding_noise: Option<f64>,
    pub embedding_scale: Option<f64>,
    pub soft_smoothing: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub oracles: Vec<OracleSource>,
    pub oracle: OracleOverrides,
    pub methods: Vec<Method>,
    pub budgets: Vec<usize>,
    pub seeds: Vec<u64>,
    pub master_seed: u64,
    pub hyper: SslHyper,
    pub output: PathBuf,
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSource::Generate(BlobSpec::default()),
            oracles: ["desk-high", "desk-mid", "desk-low"]
                .into_iter()
                .map(|s| OracleSource::Preset(s.into()))
                .collect(),
            oracle: OracleOverrides {
                embedding_dim: Some(16),
                embedding_noise: Some(0.5),
                ..Default::default()
            },
            methods: vec![
                Method::Supervised,
                Method::Adamatch,
                Method::Zeromatch,
                Method::ZmNoAux,
                Method::ZmNoStage1,
                Method::PseudoSupervise,
                Method::PlFeature,
                Method::DoublyRobust,
                Method::ZeromatchEmb,
            ],
            budgets: vec![1, 2, 8],
            seeds: vec![0, 1, 2],
            master_seed: 0,
            hyper: SslHyper::default(),
            output: PathBuf::from("runs"),
            workers: 1,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(key, s))
        .collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!("bad boolean `{value}` for `{key}`"))),
    }
}

fn parse_confusion(value: &str) -> Result<Confusion> {
    match value.trim() {
        "uniform" | "uniform-wrong" => Ok(Confusion::UniformWrong),
        "adjacent" | "adjacent-class" => Ok(Confusion::AdjacentClass),
        other => {
            let rows = other
                .split(';')
                .map(|row| parse_list::<f64>("oracle.confusion", row))
                .collect::<Result<Vec<_>>>()?;
            Ok(Confusion::Custom(rows))
        }
    }
}

fn confusion_text(c: &Confusion) -> String {
    match c {
        Confusion::UniformWrong => "uniform".into(),
        Confusion::AdjacentClass => "adjacent".into(),
        Confusion::Custom(rows) => rows
            .iter()
            .map(|r| r.iter().map(f64::to_string).collect::<Vec<_>>().join(","))
            .collect::<Vec<_>>()
            .join(";"),
    }
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(", ")
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        let mut blobs = BlobSpec::default();
        let mut seen = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(path, n + 1, "expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            if seen.insert(key.to_string(), n + 1).is_some() {
                return Err(Error::parse(path, n + 1, format!("duplicate key `{key}`")));
            }
            cfg.apply(key, value, &mut blobs)
                .map_err(|e| Error::parse(path, n + 1, e.to_string()))?;
        }
        if let DatasetSource::Generate(_) = cfg.dataset {
            cfg.dataset = DatasetSource::Generate(blobs);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, key: &str, v: &str, blobs: &mut BlobSpec) -> Result<()> {
        let h = &mut self.hyper;
        let o = &mut self.oracle;
        match key {
            "dataset.import" => self.dataset = DatasetSource::Import(PathBuf::from(v)),
            "dataset.classes" => blobs.classes = parse_value(key, v)?,
            "dataset.dim" => blobs.dim = parse_value(key, v)?,
            "dataset.per_class" => blobs.n_per_class = parse_value(key, v)?,
            "dataset.separation" => blobs.separation = parse_value(key, v)?,
            "dataset.test_fraction" => blobs.test_fraction = parse_value(key, v)?,
            "dataset.seed" => blobs.seed = parse_value(key, v)?,
            "oracle.presets" => {
                self.oracles = parse_list::<String>(key, v)?.into_iter().map(OracleSource::Preset).collect()
            }
            "oracle.accuracy" => self.oracles = parse_list(key, v)?.into_iter().map(OracleSource::Accuracy).collect(),
            "oracle.import" => {
                self.oracles = v
                    .split(',')
                    .map(|s| OracleSource::Import(PathBuf::from(s.trim())))
                    .collect()
            }
            "oracle.confusion" => o.confusion = Some(parse_confusion(v)?),
            "oracle.fallback_rate" => o.fallback_rate = Some(parse_value(key, v)?),
            "oracle.default_class" => o.default_class = Some(parse_value(key, v)?),
            "oracle.embedding_dim" => {
                let d: usize = parse_value(key, v)?;
                o.embedding_dim = (d > 0).then_some(d);
            }
            "oracle.embedding_noise" => o.embedding_noise = Some(parse_value(key, v)?),
            "oracle.embedding_scale" => o.embedding_scale = Some(parse_value(key, v)?),
            "oracle.soft_smoothing" => o.soft_smoothing = Some(parse_value(key, v)?),
            "suite.methods" => self.methods = parse_list(key, v)?,
            "suite.budgets" => self.budgets = parse_list(key, v)?,
            "suite.seeds" => self.seeds = parse_list(key, v)?,
            "suite.master_seed" => self.master_seed = parse_value(key, v)?,
            "suite.output" => self.output = PathBuf::from(v),
            "suite.workers" => self.workers = parse_value(key, v)?,
            "train.threshold" => h.threshold = parse_value(key, v)?,
            "train.lambda_p" => h.lambda_p = parse_value(key, v)?,
            "train.anneal" => h.anneal = parse_bool(key, v)?,
            "train.batch_labeled" => h.batch_labeled = parse_value(key, v)?,
            "train.batch_unlabeled" => h.batch_unlabeled = parse_value(key, v)?,
            "train.stage1_steps" => h.stage1_steps = parse_value(key, v)?,
            "train.stage2_steps" => h.stage2_steps = parse_value(key, v)?,
            "train.lr" => h.lr = parse_value(key, v)?,
            "train.warmup" => h.warmup = parse_value(key, v)?,
            "train.beta1" => h.adamw.beta1 = parse_value(key, v)?,
            "train.beta2" => h.adamw.beta2 = parse_value(key, v)?,
            "train.eps" => h.adamw.eps = parse_value(key, v)?,
            "train.weight_decay" => h.adamw.weight_decay = parse_value(key, v)?,
            "train.da_momentum" => h.da_momentum = parse_value(key, v)?,
            "train.weak_sigma" => h.augment.weak_sigma = parse_value(key, v)?,
            "train.strong_sigma" => h.augment.strong_sigma = parse_value(key, v)?,
            "train.mask_rate" => h.augment.mask_rate = parse_value(key, v)?,
            "train.kd_input" => {
                h.kd_input = match v {
                    "none" => KdInput::None,
                    "weak" => KdInput::Weak,
                    _ => return Err(Error::Config(format!("bad value `{v}` for `{key}`"))),
                }
            }
            "train.relative_threshold" => h.relative_threshold = parse_bool(key, v)?,
            "train.soft_kd" => h.soft_kd = parse_bool(key, v)?,
            "train.encoder_widths" => h.encoder_widths = parse_list(key, v)?,
            "train.head_hidden" => h.head_hidden = parse_list(key, v)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.seeds.is_empty() {
            return bad("seed list is empty".into());
        }
        if self.methods.is_empty() {
            return bad("method list is empty".into());
        }
        if self.budgets.is_empty() || self.budgets.contains(&0) {
            return bad("label budgets must be a nonempty list of positive counts".into());
        }
        if self.workers == 0 {
            return bad("workers must be positive".into());
        }
        if self.oracles.is_empty() && self.methods.iter().any(|m| m.needs_pseudo_labels()) {
            return bad("methods needing pseudo-labels require an oracle or import path".into());
        }
        for src in &self.oracles {
            if let OracleSource::Preset(name) = src {
                if preset(name, 2, 0).is_none() {
                    return bad(format!("unknown oracle preset `{name}`"));
                }
            }
        }
        if self.methods.contains(&Method::ZeromatchEmb)
            && self.oracle.embedding_dim.is_none()
            && self.oracles.iter().any(|o| !matches!(o, OracleSource::Import(_)))
        {
            return bad("zeromatch_emb needs oracle.embedding_dim".into());
        }
        self.hyper.validate()
    }

    /// Oracle spec for a simulated source; `None` for imported files.
    pub fn oracle_spec(&self, src: &OracleSource, num_classes: usize, seed: u64) -> Result<Option<OracleSpec>> {
        let mut spec = match src {
            OracleSource::Import(_) => return Ok(None),
            OracleSource::Preset(name) => preset(name, num_classes, seed)
                .ok_or_else(|| Error::Config(format!("unknown oracle preset `{name}`")))?,
            OracleSource::Accuracy(a) => OracleSpec::new(num_classes, *a, seed),
        };
        let o = &self.oracle;
        if let Some(c) = &o.confusion {
            spec.confusion = c.clone();
        }
        if let Some(f) = o.fallback_rate {
            spec.fallback_rate = f;
        }
        if let Some(c) = o.default_class {
            spec.default_class = c;
        }
        if let Some(d) = o.embedding_dim {
            let mut e = EmbeddingSpec::new(d, o.embedding_noise.unwrap_or(0.5));
            if let Some(s) = o.embedding_scale {
                e.scale = s;
            }
            spec.embedding = Some(e);
        }
        spec.soft_smoothing = o.soft_smoothing;
        spec.validate()?;
        Ok(Some(spec))
    }

    /// Canonical text form; parsing it yields an equal config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        match &self.dataset {
            DatasetSource::Import(p) => put("dataset.import", p.display().to_string()),
            DatasetSource::Generate(b) => {
                put("dataset.classes", b.classes.to_string());
                put("dataset.dim", b.dim.to_string());
                put("dataset.per_class", b.n_per_class.to_string());
                put("dataset.separation", b.separation.to_string());
                put("dataset.test_fraction", b.test_fraction.to_string());
                put("dataset.seed", b.seed.to_string());
            }
        }
        let presets: Vec<&str> = self
            .oracles
            .iter()
            .filter_map(|o| match o {
                OracleSource::Preset(n) => Some(n.as_str()),
                _ => None,
            })
            .collect();
        let accs: Vec<f64> = self
            .oracles
            .iter()
            .filter_map(|o| match o {
                OracleSource::Accuracy(a) => Some(*a),
                _ => None,
            })
            .collect();
        let imports: Vec<String> = self
            .oracles
            .iter()
            .filter_map(|o| match o {
                OracleSource::Import(p) => Some(p.display().to_string()),
                _ => None,
            })
            .collect();
        if !presets.is_empty() {
            put("oracle.presets", presets.join(", "));
        }
        if !accs.is_empty() {
            put("oracle.accuracy", join(&accs));
        }
        if !imports.is_empty() {
            put("oracle.import", imports.join(", "));
        }
        let o = &self.oracle;
        if let Some(c) = &o.confusion {
            put("oracle.confusion", confusion_text(c));
        }
        if let Some(v) = o.fallback_rate {
            put("oracle.fallback_rate", v.to_string());
        }
        if let Some(v) = o.default_class {
            put("oracle.default_class", v.to_string());
        }
        put("oracle.embedding_dim", o.embedding_dim.unwrap_or(0).to_string());
        if let Some(v) = o.embedding_noise {
            put("oracle.embedding_noise", v.to_string());
        }
        if let Some(v) = o.embedding_scale {
            put("oracle.embedding_scale", v.to_string());
        }
        if let Some(v) = o.soft_smoothing {
            put("oracle.soft_smoothing", v.to_string());
        }
        put("suite.methods", join(&self.methods));
        put("suite.budgets", join(&self.budgets));
        put("suite.seeds", join(&self.seeds));
        put("suite.master_seed", self.master_seed.to_string());
        put("suite.output", self.output.display().to_string());
        put("suite.workers", self.workers.to_string());
        let h = &self.hyper;
        put("train.threshold", h.threshold.to_string());
        put("train.lambda_p", h.lambda_p.to_string());
        put("train.anneal", h.anneal.to_string());
        put("train.batch_labeled", h.batch_labeled.to_string());
        put("train.batch_unlabeled", h.batch_unlabeled.to_string());
        put("train.stage1_steps", h.stage1_steps.to_string());
        put("train.stage2_steps", h.stage2_steps.to_string());
        put("train.lr", h.lr.to_string());
        put("train.warmup", h.warmup.to_string());
        let AdamWConfig {
            beta1,
            beta2,
            eps,
            weight_decay,
        } = h.adamw;
        put("train.beta1", beta1.to_string());
        put("train.beta2", beta2.to_string());
        put("train.eps", eps.to_string());
        put("train.weight_decay", weight_decay.to_string());
        put("train.da_momentum", h.da_momentum.to_string());
        put("train.weak_sigma", h.augment.weak_sigma.to_string());
        put("train.strong_sigma", h.augment.strong_sigma.to_string());
        put("train.mask_rate", h.augment.mask_rate.to_string());
        put(
            "train.kd_input",
            match h.kd_input {
                KdInput::None => "none",
                KdInput::Weak => "weak",
            }
            .into(),
        );
        put("train.relative_threshold", h.relative_threshold.to_string());
        put("train.soft_kd", h.soft_kd.to_string());
        put("train.encoder_widths", join(&h.encoder_widths));
        put("train.head_hidden", join(&h.head_hidden));
        s
    }

    /// Settings shared by every cell that can change its result; the grid
    /// axes themselves are excluded so extending a grid keeps old cells valid.
    pub fn identity_text(&self) -> String {
        const AXES: [&str; 8] = [
            "suite.output",
            "suite.workers",
            "suite.methods",
            "suite.budgets",
            "suite.seeds",
            "oracle.presets",
            "oracle.accuracy",
            "oracle.import",
        ];
        self.to_text()
            .lines()
            .filter(|l| !AXES.iter().any(|a| l.starts_with(a)))
            .map(|l| format!("{l}\n"))
            .collect()
    }
}
