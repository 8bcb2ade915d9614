//! Binary classification metrics.
//!
//! AUC counts ties as half a correctly ordered pair. EER sweeps every distinct
//! score as a threshold (predict positive when `score >= t`) and linearly
//! interpolates between the two sweep points that bracket `FPR = FNR`.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check(scores: &[f64], labels: &[u8]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidInput("NaN score".into()));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::InvalidInput("labels must be 0 or 1".into()));
    }
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric("both classes must be present".into()));
    }
    Ok((pos, neg))
}

/// Mann-Whitney estimate of the area under the ROC curve.
pub fn compute_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (pos, neg) = check(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Average ranks (1-based) over tie groups.
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            if labels[k] == 1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdMetrics {
    pub acc: f64,
    pub pr: f64,
    pub re: f64,
    pub f1: f64,
    /// No positive predictions, so precision was set to 0.
    pub pr_undefined: bool,
}

/// Confusion-matrix metrics predicting positive when `score >= threshold`.
pub fn compute_threshold_metrics(scores: &[f64], labels: &[u8], threshold: f64) -> Result<ThresholdMetrics> {
    let (pos, neg) = check(scores, labels)?;
    let (mut tp, mut fp, mut tn) = (0usize, 0usize, 0usize);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => {}
        }
    }
    let n = (pos + neg) as f64;
    let acc = (tp + tn) as f64 / n;
    let re = tp as f64 / pos as f64;
    let pr_undefined = tp + fp == 0;
    let pr = if pr_undefined {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let f1 = if pr + re > 0.0 { 2.0 * pr * re / (pr + re) } else { 0.0 };
    Ok(ThresholdMetrics {
        acc,
        pr,
        re,
        f1,
        pr_undefined,
    })
}

/// Equal error rate and the (interpolated) threshold where it occurs.
pub fn compute_eer(scores: &[f64], labels: &[u8]) -> Result<(f64, f64)> {
    let (pos, neg) = check(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal));

    // Sweep point k uses the k-th distinct score as threshold; everything at
    // or above it is predicted positive. A final point above every score
    // predicts nothing positive.
    let mut points: Vec<(f64, f64, f64)> = Vec::new(); // (threshold, fpr, fnr)
    let (mut fn_count, mut tn_count) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        let fpr = (neg - tn_count) as f64 / neg as f64;
        let fnr = fn_count as f64 / pos as f64;
        points.push((t, fpr, fnr));
        while i < order.len() && scores[order[i]] == t {
            if labels[order[i]] == 1 {
                fn_count += 1;
            } else {
                tn_count += 1;
            }
            i += 1;
        }
    }
    let top = scores[order[order.len() - 1]];
    points.push((f64::INFINITY, 0.0, 1.0));

    for w in points.windows(2) {
        let (t0, fpr0, fnr0) = w[0];
        let (t1, fpr1, fnr1) = w[1];
        let d0 = fpr0 - fnr0;
        let d1 = fpr1 - fnr1;
        if d0 == 0.0 {
            return Ok((fpr0, t0));
        }
        if d0 > 0.0 && d1 <= 0.0 {
            let lambda = d0 / (d0 - d1);
            let eer = fpr0 + lambda * (fpr1 - fpr0);
            let t = if t1.is_finite() { t0 + lambda * (t1 - t0) } else { top };
            return Ok((eer, t));
        }
    }
    unreachable!("FPR - FNR goes from 1 to -1 across the sweep")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_reference_cases() {
        assert_eq!(compute_auc(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(compute_auc(&[0.5; 6], &[0, 1, 0, 1, 1, 0]).unwrap(), 0.5);
        assert_eq!(compute_auc(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]).unwrap(), 0.75);
    }

    #[test]
    fn single_class_is_undefined() {
        assert!(matches!(
            compute_auc(&[0.1, 0.2], &[1, 1]),
            Err(Error::UndefinedMetric(_))
        ));
        assert!(matches!(
            compute_eer(&[0.1, 0.2], &[0, 0]),
            Err(Error::UndefinedMetric(_))
        ));
        assert!(matches!(
            compute_threshold_metrics(&[0.1, 0.2], &[0, 0], 0.5),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn perfect_predictions() {
        let m = compute_threshold_metrics(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1], 0.5).unwrap();
        assert_eq!((m.acc, m.pr, m.re, m.f1), (1.0, 1.0, 1.0, 1.0));
        assert!(!m.pr_undefined);
    }

    #[test]
    fn everything_predicted_positive() {
        let m = compute_threshold_metrics(&[0.9; 4], &[0, 1, 0, 1], 0.5).unwrap();
        assert_eq!((m.acc, m.re, m.pr), (0.5, 1.0, 0.5));
    }

    #[test]
    fn nothing_predicted_positive_flags_precision() {
        let m = compute_threshold_metrics(&[0.1; 4], &[0, 1, 0, 1], 0.5).unwrap();
        assert!(m.pr_undefined);
        assert_eq!((m.pr, m.re, m.f1, m.acc), (0.0, 0.0, 0.0, 0.5));
    }

    #[test]
    fn eer_reference_cases() {
        let (eer, t) = compute_eer(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap();
        assert_eq!(eer, 0.0);
        assert_eq!(t, 0.8);
        // Every score tied: the sweep runs from (FPR 1, FNR 0) to (0, 1).
        let (eer, _) = compute_eer(&[0.3; 4], &[0, 1, 1, 0]).unwrap();
        assert_eq!(eer, 0.5);
    }
}
