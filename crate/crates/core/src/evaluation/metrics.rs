use crate::error::{Error, Result};
use crate::skeleton::Assessment;

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!("{a} predictions for {b} labels")));
    }
    if a == 0 {
        return Err(Error::UndefinedMetric("no samples".into()));
    }
    Ok(())
}

pub fn accuracy(predictions: &[Assessment], truth: &[Assessment]) -> Result<f64> {
    check_lengths(predictions.len(), truth.len())?;
    let hits = predictions.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// Probability that a random correct sample outscores a random incorrect one,
/// ties counting one half. Computed from average ranks.
pub fn auc_roc(scores: &[f64], truth: &[Assessment]) -> Result<f64> {
    check_lengths(scores.len(), truth.len())?;
    let n_pos = truth.iter().filter(|z| z.is_correct()).count();
    let n_neg = truth.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric("AUC ROC needs both classes".into()));
    }
    let ranks = average_ranks(scores);
    let rank_sum: f64 = ranks.iter().zip(truth).filter(|(_, z)| z.is_correct()).map(|(r, _)| r).sum();
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos * n_neg) as f64)
}

/// Average precision: precision at each distinct threshold weighted by the
/// recall gained there. Tied scores enter together.
pub fn auc_pr(scores: &[f64], truth: &[Assessment]) -> Result<f64> {
    check_lengths(scores.len(), truth.len())?;
    let n_pos = truth.iter().filter(|z| z.is_correct()).count();
    if n_pos == 0 {
        return Err(Error::UndefinedMetric("AUC PR needs at least one correct sample".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut seen, mut ap) = (0usize, 0usize, 0.0);
    let mut i = 0;
    while i < order.len() {
        let level = scores[order[i]];
        let mut gained = 0;
        while i < order.len() && scores[order[i]] == level {
            if truth[order[i]].is_correct() {
                gained += 1;
            }
            seen += 1;
            i += 1;
        }
        tp += gained;
        if gained > 0 {
            ap += (gained as f64 / n_pos as f64) * (tp as f64 / seen as f64);
        }
    }
    Ok(ap)
}

/// Pearson correlation of average ranks.
pub fn spearman(predicted: &[f64], truth: &[f64]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::Shape(format!("{} predictions for {} targets", predicted.len(), truth.len())));
    }
    if predicted.len() < 2 {
        return Err(Error::UndefinedMetric("Spearman needs at least two samples".into()));
    }
    pearson(&average_ranks(predicted), &average_ranks(truth))
        .ok_or_else(|| Error::UndefinedMetric("Spearman undefined for a constant vector".into()))
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// 1-based ranks, ties sharing their mean rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let mean = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = mean;
        }
        i = j + 1;
    }
    ranks
}

pub fn mean_squared_error(predicted: &[f64], truth: &[f64]) -> Result<f64> {
    check_lengths(predicted.len(), truth.len())?;
    Ok(predicted.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / truth.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Assessment::{Correct as P, Incorrect as N};

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[P, N], &[P, N]).unwrap(), 1.0);
        assert_eq!(accuracy(&[P, P, N, N], &[P, N, P, N]).unwrap(), 0.5);
        assert!(accuracy(&[P], &[P, N]).is_err());
    }

    #[test]
    fn auc_roc_examples() {
        assert_eq!(auc_roc(&[0.9, 0.1], &[P, N]).unwrap(), 1.0);
        assert_eq!(auc_roc(&[0.3; 4], &[P, N, P, N]).unwrap(), 0.5);
        assert_eq!(auc_roc(&[0.8, 0.4, 0.6, 0.2], &[P, P, N, N]).unwrap(), 0.75);
        assert!(matches!(auc_roc(&[0.1, 0.2], &[P, P]), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn auc_pr_examples() {
        assert_eq!(auc_pr(&[0.9, 0.8, 0.7], &[P, N, N]).unwrap(), 1.0);
        assert!((auc_pr(&[0.9, 0.3, 0.7], &[P, P, N]).unwrap() - 5.0 / 6.0).abs() < 1e-12);
        assert!(auc_pr(&[0.9], &[N]).is_err());
    }

    #[test]
    fn spearman_examples() {
        let t = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert!((spearman(&t, &t).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&[5.0, 4.0, 3.0, 2.0, 1.0], &t).unwrap() + 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0, 5.0, 4.0], &t).unwrap() - 0.9).abs() < 1e-12);
        assert!(matches!(spearman(&[1.0, 1.0], &[1.0, 2.0]), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn ties_share_ranks() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }
}
