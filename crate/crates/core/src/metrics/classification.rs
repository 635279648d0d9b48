use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_labels(len: usize, labels: &[u8]) -> Result<(usize, usize)> {
    if len != labels.len() {
        return Err(Error::invalid(format!(
            "{len} values but {} labels",
            labels.len()
        )));
    }
    if let Some(bad) = labels.iter().find(|l| **l > 1) {
        return Err(Error::invalid(format!("labels must be 0 or 1, found {bad}")));
    }
    let pos = labels.iter().filter(|l| **l == 1).count();
    Ok((pos, labels.len() - pos))
}

/// Area under the ROC curve, computed as the Mann-Whitney statistic
/// `P(s_pos > s_neg) + P(s_pos == s_neg) / 2` from midranks.
pub fn auroc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (pos, neg) = check_labels(scores.len(), labels)?;
    if pos == 0 || neg == 0 {
        return Err(Error::invalid("AUROC needs both positive and negative labels"));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("scores contain NaN"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut positive_rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // ranks start+1 ..= end share their mean
        let midrank = (start + 1 + end) as f64 / 2.0;
        let tied_pos = order[start..end].iter().filter(|&&i| labels[i] == 1).count();
        positive_rank_sum += midrank * tied_pos as f64;
        start = end;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((positive_rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub false_positive_rate: f64,
    pub true_positive_rate: f64,
}

/// ROC operating points for every distinct score threshold (predict positive
/// when `score >= threshold`), starting at (0, 0).
pub fn roc_curve(scores: &[f64], labels: &[u8]) -> Result<Vec<RocPoint>> {
    let (pos, neg) = check_labels(scores.len(), labels)?;
    if pos == 0 || neg == 0 {
        return Err(Error::invalid("ROC needs both positive and negative labels"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        false_positive_rate: 0.0,
        true_positive_rate: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut k = 0;
    while k < order.len() {
        let threshold = scores[order[k]];
        while k < order.len() && scores[order[k]] == threshold {
            if labels[order[k]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        points.push(RocPoint {
            threshold,
            false_positive_rate: fp as f64 / neg as f64,
            true_positive_rate: tp as f64 / pos as f64,
        });
    }
    Ok(points)
}

/// F1 of the positive (OOD) class. When there are no positives at all and
/// none were predicted the score is defined as 1 and `degenerate` is set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct F1Score {
    pub value: f64,
    pub degenerate: bool,
}

pub fn f1_score(predictions: &[u8], labels: &[u8]) -> Result<F1Score> {
    if predictions.is_empty() {
        return Err(Error::invalid("F1 needs at least one prediction"));
    }
    check_labels(predictions.len(), labels)?;
    check_labels(predictions.len(), predictions)?;
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&p, &l) in predictions.iter().zip(labels) {
        match (p, l) {
            (1, 1) => tp += 1,
            (1, 0) => fp += 1,
            (0, 1) => fn_ += 1,
            _ => {}
        }
    }
    if tp + fp + fn_ == 0 {
        return Ok(F1Score {
            value: 1.0,
            degenerate: true,
        });
    }
    Ok(F1Score {
        value: 2.0 * tp as f64 / (2 * tp + fp + fn_) as f64,
        degenerate: false,
    })
}

/// Relative change of a detector's F1 against the baseline detector.
pub fn f1_hat(candidate: f64, baseline: f64) -> Result<f64> {
    if !(baseline > 0.0) {
        return Err(Error::invalid(format!(
            "baseline F1 must be positive, got {baseline}"
        )));
    }
    Ok(candidate / baseline - 1.0)
}
