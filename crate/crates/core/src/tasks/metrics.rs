use rand::Rng as _;

use crate::error::{Error, Result};
use crate::seeds;

fn check(pred: &[usize], truth: &[usize]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} labels",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::invalid("no predictions to score"));
    }
    Ok(())
}

pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check(pred, truth)?;
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Micro-averaged F1 over all classes: `TP / (TP + (FP + FN) / 2)` with global
/// counts. Single-label, so every miss is one FP and one FN.
pub fn micro_f1(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check(pred, truth)?;
    let tp = pred.iter().zip(truth).filter(|(p, t)| p == t).count() as f64;
    let miss = pred.len() as f64 - tp;
    let (fp, fn_) = (miss, miss);
    Ok(tp / (tp + (fp + fn_) / 2.0))
}

/// Micro-F1 of uniformly random guesses over `class_count` classes.
pub fn random_guess_micro_f1(truth: &[usize], class_count: usize, seed: u64) -> Result<f64> {
    if class_count == 0 {
        return Err(Error::invalid("class_count must be positive"));
    }
    let mut rng = seeds::rng(seed);
    let pred: Vec<usize> = truth.iter().map(|_| rng.random_range(0..class_count)).collect();
    micro_f1(&pred, truth)
}

/// Area under the ROC curve by the rank-sum statistic; ties count one half.
pub fn roc_auc(pos: &[f64], neg: &[f64]) -> Result<f64> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::invalid("AUC needs at least one positive and one negative"));
    }
    if pos.iter().chain(neg).any(|x| x.is_nan()) {
        return Err(Error::NonFinite("AUC score".into()));
    }
    let mut all: Vec<(f64, bool)> = pos.iter().map(|&s| (s, true)).chain(neg.iter().map(|&s| (s, false))).collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    // sum of 1-based ranks of positives, ties get the mean rank
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        let mean_rank = (i + 1 + j) as f64 / 2.0;
        rank_sum += mean_rank * all[i..j].iter().filter(|x| x.1).count() as f64;
        i = j;
    }
    let (np, nn) = (pos.len() as f64, neg.len() as f64);
    Ok((rank_sum - np * (np + 1.0) / 2.0) / (np * nn))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_counted_example() {
        assert_eq!(micro_f1(&[0, 1, 1, 1], &[0, 0, 1, 2]).unwrap(), 0.5);
    }

    #[test]
    fn perfect_and_all_wrong() {
        assert_eq!(micro_f1(&[0, 1, 2], &[0, 1, 2]).unwrap(), 1.0);
        assert_eq!(micro_f1(&[1, 0, 1, 0], &[0, 1, 0, 1]).unwrap(), 0.0);
    }

    #[test]
    fn length_mismatch_and_empty_rejected() {
        assert!(micro_f1(&[0], &[0, 1]).is_err());
        assert!(micro_f1(&[], &[]).is_err());
    }

    fn brute_auc(pos: &[f64], neg: &[f64]) -> f64 {
        let mut s = 0.0;
        for p in pos {
            for q in neg {
                s += if p > q {
                    1.0
                } else if p == q {
                    0.5
                } else {
                    0.0
                };
            }
        }
        s / (pos.len() * neg.len()) as f64
    }

    #[test]
    fn auc_separated_and_reversed() {
        assert_eq!(roc_auc(&[3.0, 4.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), 0.0);
        assert_eq!(roc_auc(&[1.0], &[1.0]).unwrap(), 0.5);
    }

    proptest! {
        #[test]
        fn micro_f1_is_accuracy(pairs in prop::collection::vec((0usize..5, 0usize..5), 1..60)) {
            let (p, t): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
            let hits = p.iter().zip(&t).filter(|(a, b)| a == b).count() as f64;
            prop_assert!((micro_f1(&p, &t).unwrap() - hits / p.len() as f64).abs() < 1e-15);
        }

        #[test]
        fn auc_matches_pairwise_count(
            pos in prop::collection::vec(0i32..8, 1..20),
            neg in prop::collection::vec(0i32..8, 1..20),
        ) {
            let pos: Vec<f64> = pos.into_iter().map(f64::from).collect();
            let neg: Vec<f64> = neg.into_iter().map(f64::from).collect();
            prop_assert!((roc_auc(&pos, &neg).unwrap() - brute_auc(&pos, &neg)).abs() < 1e-12);
        }
    }
}
