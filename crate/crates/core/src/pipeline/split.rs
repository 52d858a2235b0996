use rand::seq::SliceRandom;
use sha2::{Digest, Sha256};

use crate::error::{Result, VadError};
use crate::seed;

/// Per-hypothesis frame-level partition fractions.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    pub ded_train_fraction: f64,
    pub classifier_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            ded_train_fraction: 0.70,
            classifier_fraction: 0.15,
            test_fraction: 0.15,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let f = [self.ded_train_fraction, self.classifier_fraction, self.test_fraction];
        if f.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
            return Err(VadError::Config("split fractions must lie in (0, 1)".into()));
        }
        if (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(VadError::Config(format!(
                "split fractions must sum to 1, got {}",
                f.iter().sum::<f64>()
            )));
        }
        Ok(())
    }
}

/// Row indices of each split. Classifier and test indices are sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Splits {
    /// DED training rows for H⁰ and H¹.
    pub ded_train: [Vec<usize>; 2],
    pub classifier: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    /// Both hypotheses' DED training rows, sorted.
    pub fn ded_train_all(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.ded_train.iter().flatten().copied().collect();
        all.sort_unstable();
        all
    }

    pub fn index_hash(indices: &[usize]) -> String {
        let mut h = Sha256::new();
        for i in indices {
            h.update((*i as u64).to_le_bytes());
        }
        crate::config::hex(&h.finalize())
    }

    pub fn test_hash(&self) -> String {
        Self::index_hash(&self.test)
    }
}

/// Seeded shuffle of each hypothesis' rows, cut into the three fractions.
/// The test split is then balanced: the larger hypothesis keeps only as many
/// test rows as the smaller one has, so accuracy is TP+TN on equal classes.
pub fn split_dataset(labels: &[u8], spec: &SplitSpec) -> Result<Splits> {
    spec.validate()?;
    let mut ded_train: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    let mut classifier = Vec::new();
    let mut tests: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for class in 0..2u8 {
        let mut idx: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, &y)| (y != 0) == (class == 1))
            .map(|(i, _)| i)
            .collect();
        let n = idx.len();
        let n_ded = (n as f64 * spec.ded_train_fraction).round() as usize;
        let n_cls = (n as f64 * spec.classifier_fraction).round() as usize;
        if n_ded == 0 || n_cls == 0 || n_ded + n_cls >= n {
            return Err(VadError::InsufficientData(format!(
                "hypothesis {class} has {n} frames, too few for a three-way split"
            )));
        }
        idx.shuffle(&mut seed::rng(spec.seed, 0x5B17 + class as u64));
        ded_train[class as usize] = idx[..n_ded].to_vec();
        classifier.extend_from_slice(&idx[n_ded..n_ded + n_cls]);
        tests[class as usize] = idx[n_ded + n_cls..].to_vec();
    }
    let n_test = tests[0].len().min(tests[1].len());
    let mut test: Vec<usize> = tests.iter().flat_map(|t| t[..n_test].iter().copied()).collect();
    classifier.sort_unstable();
    test.sort_unstable();
    Ok(Splits {
        ded_train,
        classifier,
        test,
    })
}
