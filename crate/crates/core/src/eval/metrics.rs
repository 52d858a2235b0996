use crate::error::{Result, VadError};

/// Detection rates with speech (label 1) as the positive class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub tp_rate: f64,
    pub tn_rate: f64,
    pub fp_rate: f64,
    pub fn_rate: f64,
    /// Fraction of correct decisions over all frames.
    pub accuracy: f64,
    pub positives: usize,
    pub negatives: usize,
}

pub fn compute_metrics(predictions: &[u8], labels: &[u8]) -> Result<Metrics> {
    if predictions.len() != labels.len() {
        return Err(VadError::Dimension(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let (mut tp, mut tn, mut fp, mut fneg) = (0usize, 0usize, 0usize, 0usize);
    for (&p, &y) in predictions.iter().zip(labels) {
        match (p != 0, y != 0) {
            (true, true) => tp += 1,
            (false, false) => tn += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
        }
    }
    let positives = tp + fneg;
    let negatives = tn + fp;
    if positives == 0 || negatives == 0 {
        return Err(VadError::SingleClass(format!(
            "metrics need both classes ({positives} speech, {negatives} non-speech frames)"
        )));
    }
    Ok(Metrics {
        tp_rate: tp as f64 / positives as f64,
        tn_rate: tn as f64 / negatives as f64,
        fp_rate: fp as f64 / negatives as f64,
        fn_rate: fneg as f64 / positives as f64,
        accuracy: (tp + tn) as f64 / labels.len() as f64,
        positives,
        negatives,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn extremes_and_counts() {
        let y = [0u8, 1, 1, 0, 1];
        assert_eq!(compute_metrics(&y, &y).unwrap().accuracy, 1.0);
        let flipped: Vec<u8> = y.iter().map(|v| 1 - v).collect();
        assert_eq!(compute_metrics(&flipped, &y).unwrap().accuracy, 0.0);
        let labels: Vec<u8> = (0..100).map(|i| (i % 2) as u8).collect();
        let preds: Vec<u8> = (0..100).map(|i| if i < 50 { (i % 2) as u8 } else { 1 - (i % 2) as u8 }).collect();
        assert_eq!(compute_metrics(&preds, &labels).unwrap().accuracy, 0.5);
        assert!(compute_metrics(&[1], &[1, 0]).is_err());
        assert!(compute_metrics(&[1, 0], &[1, 1]).is_err());
    }

    proptest! {
        #[test]
        fn rates_complement_and_permutation_invariance(
            pairs in proptest::collection::vec((0u8..2, 0u8..2), 2..200),
            rot in 0usize..200,
        ) {
            let (p, y): (Vec<u8>, Vec<u8>) = pairs.iter().cloned().unzip();
            prop_assume!(y.contains(&0) && y.contains(&1));
            let m = compute_metrics(&p, &y).unwrap();
            prop_assert!((m.tp_rate + m.fn_rate - 1.0).abs() < 1e-12);
            prop_assert!((m.tn_rate + m.fp_rate - 1.0).abs() < 1e-12);
            let mut rotated = pairs.clone();
            let len = rotated.len();
            rotated.rotate_left(rot % len);
            let (p2, y2): (Vec<u8>, Vec<u8>) = rotated.into_iter().unzip();
            prop_assert_eq!(compute_metrics(&p2, &y2).unwrap(), m);
        }
    }
}
