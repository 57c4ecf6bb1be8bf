use serde::Serialize;

use crate::error::{Error, Result};

/// Probability floor applied before taking logs.
const PROB_FLOOR: f64 = 1e-12;

/// Area under the ROC curve via the Mann-Whitney rank statistic. Tied
/// scores share their average rank, so a tied (positive, negative) pair
/// counts 1/2.
pub fn roc_auc(scores: &[f64], positive: &[bool]) -> Result<f64> {
    if scores.len() != positive.len() {
        return Err(Error::Shape {
            expected: scores.len(),
            found: positive.len(),
        });
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedAuc);
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::validation("NaN score"));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Sum of 1-based ranks of the positives, ties averaged.
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        let pos_in_group = order[i..j].iter().filter(|&&k| positive[k]).count();
        rank_sum += avg_rank * pos_in_group as f64;
        i = j;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metrics {
    /// `None` for multiclass predictions or single-class truth.
    pub auc: Option<f64>,
    pub accuracy: f64,
    pub cross_entropy: f64,
}

impl Metrics {
    /// `{"auc":…,"accuracy":…,"cross_entropy":…}` on one line.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("metrics serialize")
    }
}

/// Accuracy by argmax (lowest index wins ties), mean cross-entropy with
/// probabilities floored at 1e-12, and AUC of the class-1 column for binary
/// problems.
pub fn evaluate(probs: &[Vec<f64>], truth: &[usize]) -> Result<Metrics> {
    if probs.len() != truth.len() {
        return Err(Error::Shape {
            expected: probs.len(),
            found: truth.len(),
        });
    }
    if probs.is_empty() {
        return Err(Error::validation("nothing to evaluate"));
    }
    let classes = probs[0].len();
    let mut correct = 0usize;
    let mut ce = 0.0;
    for (p, &t) in probs.iter().zip(truth) {
        if p.len() != classes {
            return Err(Error::Shape {
                expected: classes,
                found: p.len(),
            });
        }
        if t >= classes {
            return Err(Error::validation(format!("truth class {t} outside [0,{classes})")));
        }
        let best = p
            .iter()
            .enumerate()
            .fold(0, |best, (i, &x)| if x > p[best] { i } else { best });
        correct += usize::from(best == t);
        ce -= p[t].max(PROB_FLOOR).ln();
    }
    let n = probs.len() as f64;
    let auc = if classes == 2 {
        let scores: Vec<f64> = probs.iter().map(|p| p[1]).collect();
        let positive: Vec<bool> = truth.iter().map(|&t| t == 1).collect();
        roc_auc(&scores, &positive).ok()
    } else {
        None
    };
    Ok(Metrics {
        auc,
        accuracy: correct as f64 / n,
        cross_entropy: ce / n,
    })
}
