use crate::error::{Error, Result};

/// Number of points in the threshold grid 0.10, 0.11, ..., 0.90.
pub const GRID_POINTS: usize = 81;

/// The decision-threshold grid, each point computed as an exact `k / 100`.
pub fn threshold_grid() -> Vec<f64> {
    (10..=90).map(|k| f64::from(k) / 100.0).collect()
}

fn check(y: &[u8], p: &[f64]) -> Result<()> {
    if y.len() != p.len() {
        return Err(Error::shape("metric inputs", (y.len(), 1), (p.len(), 1)));
    }
    if y.is_empty() {
        return Err(Error::UndefinedMetric("empty input".into()));
    }
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("score".into()));
    }
    Ok(())
}

fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    let den = 2 * tp + fp + fn_;
    if den == 0 {
        0.0
    } else {
        2.0 * tp as f64 / den as f64
    }
}

/// Accuracy and macro-F1 of the rule `p >= tau`. A class with no actual and
/// no predicted members scores F1 = 0.
pub fn confusion_metrics(y: &[u8], p: &[f64], tau: f64) -> Result<(f64, f64)> {
    check(y, p)?;
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&yi, &pi) in y.iter().zip(p) {
        match (yi == 1, pi >= tau) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (false, false) => tn += 1,
            (true, false) => fn_ += 1,
        }
    }
    let acc = (tp + tn) as f64 / y.len() as f64;
    let macro_f1 = 0.5 * (f1(tp, fp, fn_) + f1(tn, fn_, fp));
    Ok((acc, macro_f1))
}

/// Exact Mann–Whitney AUC with ties counted half, via mid-ranks.
pub fn roc_auc(y: &[u8], p: &[f64]) -> Result<f64> {
    check(y, p)?;
    let n_pos = y.iter().filter(|&&v| v == 1).count();
    let n_neg = y.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric("ROC-AUC needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
    // twice the positive rank sum keeps mid-ranks integral
    let mut rank2_sum: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && p[order[j]] == p[order[i]] {
            j += 1;
        }
        let mid2 = (i + 1 + j) as u64;
        let pos = order[i..j].iter().filter(|&&k| y[k] == 1).count() as u64;
        rank2_sum += pos * mid2;
        i = j;
    }
    let np = n_pos as u64;
    let u2 = rank2_sum - np * (np + 1);
    Ok(u2 as f64 / (2 * np * n_neg as u64) as f64)
}

/// Average precision over descending scores; equal scores enter together.
pub fn pr_auc(y: &[u8], p: &[f64]) -> Result<f64> {
    check(y, p)?;
    let total_pos = y.iter().filter(|&&v| v == 1).count();
    if total_pos == 0 {
        return Err(Error::UndefinedMetric("PR-AUC needs a positive sample".into()));
    }
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| p[b].total_cmp(&p[a]));
    let (mut tp, mut seen, mut ap) = (0usize, 0usize, 0.0);
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && p[order[j]] == p[order[i]] {
            j += 1;
        }
        let group_pos = order[i..j].iter().filter(|&&k| y[k] == 1).count();
        tp += group_pos;
        seen += j - i;
        if group_pos > 0 {
            ap += (group_pos as f64 / total_pos as f64) * (tp as f64 / seen as f64);
        }
        i = j;
    }
    Ok(ap)
}

/// Grid threshold maximizing macro-F1 on `(y, p)`; ties go to the smallest.
pub fn sweep_threshold(y: &[u8], p: &[f64]) -> Result<f64> {
    let mut best = (f64::NEG_INFINITY, 0.0);
    for tau in threshold_grid() {
        let (_, f) = confusion_metrics(y, p, tau)?;
        if f > best.0 {
            best = (f, tau);
        }
    }
    Ok(best.1)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n − 1); 0 for fewer than two values.
pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}
