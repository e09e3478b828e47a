use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{macro_f1, mean_var, micro_f1};
use crate::error::{Error, Result};
use crate::skipgram::NodeVectors;

/// Node labels: one or more label ids per node.
#[derive(Clone, Debug, PartialEq)]
pub struct Labels {
    label_names: Vec<String>,
    nodes: Vec<String>,
    sets: Vec<Vec<usize>>,
}

impl Labels {
    pub fn new(entries: Vec<(String, Vec<String>)>) -> Self {
        let mut label_names: Vec<String> = Vec::new();
        let mut ids: HashMap<String, usize> = HashMap::new();
        let mut nodes = Vec::with_capacity(entries.len());
        let mut sets = Vec::with_capacity(entries.len());
        for (node, ls) in entries {
            let mut set: Vec<usize> = ls
                .into_iter()
                .map(|l| {
                    *ids.entry(l.clone()).or_insert_with(|| {
                        label_names.push(l);
                        label_names.len() - 1
                    })
                })
                .collect();
            set.sort_unstable();
            set.dedup();
            nodes.push(node);
            sets.push(set);
        }
        Labels { label_names, nodes, sets }
    }

    /// Single-label entries from `(node, label id)` pairs.
    pub fn from_ids(entries: impl IntoIterator<Item = (String, usize)>) -> Self {
        Self::new(entries.into_iter().map(|(n, l)| (n, vec![l.to_string()])).collect())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn label_count(&self) -> usize {
        self.label_names.len()
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }

    pub fn is_multilabel(&self) -> bool {
        self.sets.iter().any(|s| s.len() > 1)
    }
}

/// Reads `<node-id><TAB><label>[,label...]` lines.
pub fn read_labels(path: &Path) -> Result<Labels> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut entries = Vec::new();
    let mut seen = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let mut parts = line.split_whitespace();
        let (Some(node), Some(ls), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(err("expected '<node-id> <label>[,label...]'".into()));
        };
        if let Some(prev) = seen.insert(node.to_string(), i + 1) {
            return Err(err(format!("node '{node}' already labeled on line {prev}")));
        }
        let labels: Vec<String> = ls.split(',').filter(|s| !s.is_empty()).map(str::to_string).collect();
        if labels.is_empty() {
            return Err(err(format!("node '{node}' has no labels")));
        }
        entries.push((node.to_string(), labels));
    }
    Ok(Labels::new(entries))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogRegConfig {
    pub l2: f64,
    pub iters: usize,
    pub lr: f64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig {
            l2: 1e-4,
            iters: 500,
            lr: 0.1,
        }
    }
}

/// Binary logistic regression on standardized features, fit by full-batch
/// gradient descent. The bias is not penalized.
#[derive(Clone, Debug, PartialEq)]
pub struct LogisticModel {
    mean: Vec<f64>,
    scale: Vec<f64>,
    weights: Vec<f64>,
    bias: f64,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl LogisticModel {
    pub fn fit(features: &[Vec<f64>], targets: &[bool], cfg: &LogRegConfig) -> Result<Self> {
        let (x, mean, scale) = standardize(features)?;
        if targets.len() != features.len() {
            return Err(Error::DimensionMismatch(features.len(), targets.len()));
        }
        let y: Vec<f64> = targets.iter().map(|&t| t as u8 as f64).collect();
        let (weights, bias) = fit_standardized(&x, &y, mean.len(), cfg);
        Ok(LogisticModel {
            mean,
            scale,
            weights,
            bias,
        })
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        let z: f64 = x
            .iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .zip(&self.weights)
            .map(|(((xi, m), s), w)| w * (xi - m) / s)
            .sum();
        sigmoid(z + self.bias)
    }
}

/// Row-major standardized copy plus the per-column mean and scale (1 for
/// constant columns).
fn standardize(features: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let n = features.len();
    let d = features.first().ok_or(Error::Empty("features"))?.len();
    if let Some(bad) = features.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch(d, bad.len()));
    }
    if features.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("feature matrix".into()));
    }
    let mut mean = vec![0.0; d];
    for r in features {
        mean.iter_mut().zip(r).for_each(|(m, x)| *m += x / n as f64);
    }
    let mut scale = vec![0.0; d];
    for r in features {
        scale.iter_mut().zip(r).zip(&mean).for_each(|((s, x), m)| *s += (x - m).powi(2) / n as f64);
    }
    for s in &mut scale {
        *s = if *s > 1e-24 { s.sqrt() } else { 1.0 };
    }
    let mut x = Vec::with_capacity(n * d);
    for r in features {
        x.extend(r.iter().zip(&mean).zip(&scale).map(|((v, m), s)| (v - m) / s));
    }
    Ok((x, mean, scale))
}

fn fit_standardized(x: &[f64], y: &[f64], d: usize, cfg: &LogRegConfig) -> (Vec<f64>, f64) {
    let n = y.len();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut grad = vec![0.0; d];
    for _ in 0..cfg.iters {
        grad.iter_mut().zip(&w).for_each(|(g, wi)| *g = cfg.l2 * wi);
        let mut gb = 0.0;
        for (row, &yi) in x.chunks_exact(d.max(1)).zip(y) {
            let z: f64 = row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + b;
            let r = (sigmoid(z) - yi) / n as f64;
            gb += r;
            grad.iter_mut().zip(row).for_each(|(g, a)| *g += r * a);
        }
        w.iter_mut().zip(&grad).for_each(|(wi, g)| *wi -= cfg.lr * g);
        b -= cfg.lr * gb;
    }
    (w, b)
}

/// One binary model per label.
#[derive(Clone, Debug, PartialEq)]
pub struct OvrClassifier {
    models: Vec<LogisticModel>,
    multilabel: bool,
}

pub fn train_logreg_ovr(
    features: &[Vec<f64>],
    labels: &[Vec<usize>],
    n_labels: usize,
    multilabel: bool,
    cfg: &LogRegConfig,
) -> Result<OvrClassifier> {
    if features.len() != labels.len() {
        return Err(Error::DimensionMismatch(features.len(), labels.len()));
    }
    if n_labels < 2 {
        return Err(Error::Degenerate("classification needs at least two labels".into()));
    }
    let (x, mean, scale) = standardize(features)?;
    let d = mean.len();
    let models = (0..n_labels)
        .map(|l| {
            let y: Vec<f64> = labels.iter().map(|s| s.contains(&l) as u8 as f64).collect();
            let (weights, bias) = fit_standardized(&x, &y, d, cfg);
            LogisticModel {
                mean: mean.clone(),
                scale: scale.clone(),
                weights,
                bias,
            }
        })
        .collect();
    Ok(OvrClassifier { models, multilabel })
}

impl OvrClassifier {
    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        self.models.iter().map(|m| m.probability(x)).collect()
    }

    /// Labels above 0.5 in multi-label mode, else the single argmax.
    pub fn predict(&self, features: &[Vec<f64>]) -> Vec<Vec<usize>> {
        features
            .iter()
            .map(|x| {
                let p = self.probabilities(x);
                if self.multilabel {
                    (0..p.len()).filter(|&l| p[l] > 0.5).collect()
                } else {
                    let best = (0..p.len()).max_by(|&a, &b| p[a].total_cmp(&p[b]).then(b.cmp(&a)));
                    best.into_iter().collect()
                }
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassifyConfig {
    pub repeats: usize,
    pub train_fraction: f64,
    pub seed: u64,
    pub logreg: LogRegConfig,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            repeats: 10,
            train_fraction: 0.5,
            seed: 0,
            logreg: LogRegConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassificationRun {
    pub micro_f1: f64,
    pub macro_f1: f64,
    /// Micro-F1 of always predicting the most frequent training label.
    pub baseline_micro_f1: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassificationReport {
    pub runs: Vec<ClassificationRun>,
    pub micro_mean: f64,
    pub micro_var: f64,
    pub macro_mean: f64,
    pub macro_var: f64,
    pub baseline_micro_mean: f64,
    pub seed: u64,
    pub train_size: usize,
    pub test_size: usize,
}

impl ClassificationReport {
    pub fn tsv(&self) -> String {
        let mut s = String::from("run\tmicro_f1\tmacro_f1\tbaseline_micro_f1\n");
        for (i, r) in self.runs.iter().enumerate() {
            let _ = writeln!(s, "{i}\t{:.6}\t{:.6}\t{:.6}", r.micro_f1, r.macro_f1, r.baseline_micro_f1);
        }
        s
    }

    pub fn key_values(&self) -> String {
        format!(
            "repeats={}\ntrain_size={}\ntest_size={}\nseed={}\nmicro_f1_mean={:.6}\nmicro_f1_var={:.6e}\nmacro_f1_mean={:.6}\nmacro_f1_var={:.6e}\nbaseline_micro_f1_mean={:.6}\n",
            self.runs.len(),
            self.train_size,
            self.test_size,
            self.seed,
            self.micro_mean,
            self.micro_var,
            self.macro_mean,
            self.macro_var,
            self.baseline_micro_mean
        )
    }
}

pub(crate) fn split_seed(seed: u64, run: usize) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ (run as u64).wrapping_add(1).wrapping_mul(0xd1b5_4a32_d192_ed03)
}

/// Repeated random train/test splits of the labeled nodes.
pub fn classification_protocol(
    vectors: &NodeVectors,
    labels: &Labels,
    cfg: &ClassifyConfig,
) -> Result<ClassificationReport> {
    let n = labels.len();
    let train_size = (n as f64 * cfg.train_fraction).round() as usize;
    if cfg.repeats == 0 {
        return Err(Error::InvalidConfig("repeats must be at least 1".into()));
    }
    if train_size == 0 || train_size >= n {
        return Err(Error::Degenerate(format!(
            "{n} labeled nodes cannot be split with train fraction {}",
            cfg.train_fraction
        )));
    }
    let features: Vec<Vec<f64>> = labels
        .nodes()
        .iter()
        .map(|name| {
            vectors
                .get(name)
                .map(<[f64]>::to_vec)
                .ok_or_else(|| Error::UnknownNode(format!("{name} (no embedding)")))
        })
        .collect::<Result<_>>()?;
    let n_labels = labels.label_count();
    let multilabel = labels.is_multilabel();

    let runs = (0..cfg.repeats)
        .into_par_iter()
        .map(|r| -> Result<ClassificationRun> {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut ChaCha8Rng::seed_from_u64(split_seed(cfg.seed, r)));
            let (tr, te) = idx.split_at(train_size);
            let pick_x = |ix: &[usize]| ix.iter().map(|&i| features[i].clone()).collect::<Vec<_>>();
            let pick_y = |ix: &[usize]| ix.iter().map(|&i| labels.sets()[i].clone()).collect::<Vec<_>>();
            let (ytr, yte) = (pick_y(tr), pick_y(te));
            let clf = train_logreg_ovr(&pick_x(tr), &ytr, n_labels, multilabel, &cfg.logreg)?;
            let pred = clf.predict(&pick_x(te));

            let mut freq = vec![0usize; n_labels];
            ytr.iter().flatten().for_each(|&l| freq[l] += 1);
            let majority = (0..n_labels).max_by_key(|&l| (freq[l], std::cmp::Reverse(l))).unwrap_or(0);
            let base = vec![vec![majority]; te.len()];
            Ok(ClassificationRun {
                micro_f1: micro_f1(&pred, &yte, n_labels)?,
                macro_f1: macro_f1(&pred, &yte, n_labels)?,
                baseline_micro_f1: micro_f1(&base, &yte, n_labels)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let col = |f: fn(&ClassificationRun) -> f64| runs.iter().map(f).collect::<Vec<_>>();
    let (micro_mean, micro_var) = mean_var(&col(|r| r.micro_f1));
    let (macro_mean, macro_var) = mean_var(&col(|r| r.macro_f1));
    let (baseline_micro_mean, _) = mean_var(&col(|r| r.baseline_micro_f1));
    Ok(ClassificationReport {
        runs,
        micro_mean,
        micro_var,
        macro_mean,
        macro_var,
        baseline_micro_mean,
        seed: cfg.seed,
        train_size,
        test_size: n - train_size,
    })
}
