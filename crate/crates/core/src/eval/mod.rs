//! Node classification, link prediction and stationarity diagnostics.

mod classify;
mod linkpred;
mod trace;

use crate::error::{Error, Result};

pub use classify::{
    classification_protocol, read_labels, train_logreg_ovr, ClassificationReport, ClassificationRun, ClassifyConfig,
    Labels, LogRegConfig, LogisticModel, OvrClassifier,
};
pub use linkpred::{edge_features, link_prediction, lp_split, EdgeOp, LinkPredictionReport, LpSplit};
pub use trace::{parameter_sweep, stationarity_trace, SweepAxis, SweepRow, TraceConfig, TraceKind};

/// Area under the ROC curve via the Mann-Whitney rank statistic; ties get
/// their mid-rank.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch(scores.len(), labels.len()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Degenerate("AUC needs both classes".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("NaN score".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1..=j+1 share their mean
        let mid = (i + j + 2) as f64 / 2.0;
        rank_sum += mid * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Per-label true positive, false positive and false negative counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LabelCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl LabelCounts {
    pub fn f1(&self) -> f64 {
        f1(self.tp, self.fp, self.fn_)
    }
}

fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// Streams over aligned label sets and tallies per-label counts.
pub fn label_counts(preds: &[Vec<usize>], truth: &[Vec<usize>], n_labels: usize) -> Result<Vec<LabelCounts>> {
    if preds.is_empty() {
        return Err(Error::Empty("predictions"));
    }
    if preds.len() != truth.len() {
        return Err(Error::DimensionMismatch(preds.len(), truth.len()));
    }
    let mut counts = vec![LabelCounts::default(); n_labels];
    for (p, t) in preds.iter().zip(truth) {
        for &l in p {
            if t.contains(&l) {
                counts[l].tp += 1;
            } else {
                counts[l].fp += 1;
            }
        }
        for &l in t {
            if !p.contains(&l) {
                counts[l].fn_ += 1;
            }
        }
    }
    Ok(counts)
}

/// F1 over counts pooled across labels.
pub fn micro_f1(preds: &[Vec<usize>], truth: &[Vec<usize>], n_labels: usize) -> Result<f64> {
    let c = label_counts(preds, truth, n_labels)?;
    Ok(f1(
        c.iter().map(|x| x.tp).sum(),
        c.iter().map(|x| x.fp).sum(),
        c.iter().map(|x| x.fn_).sum(),
    ))
}

/// Unweighted mean of per-label F1.
pub fn macro_f1(preds: &[Vec<usize>], truth: &[Vec<usize>], n_labels: usize) -> Result<f64> {
    let c = label_counts(preds, truth, n_labels)?;
    Ok(c.iter().map(LabelCounts::f1).sum::<f64>() / n_labels.max(1) as f64)
}

/// Jensen-Shannon divergence in bits.
pub fn js_divergence(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "distributions over different supports");
    let kl_half = |a: f64, m: f64| if a > 0.0 { a * (a / m).log2() } else { 0.0 };
    let js: f64 = p
        .iter()
        .zip(q)
        .map(|(&a, &b)| {
            let m = 0.5 * (a + b);
            0.5 * (kl_half(a, m) + kl_half(b, m))
        })
        .sum();
    js.clamp(0.0, 1.0)
}

/// Mean and population variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.max(0.0))
}
