//! Classification metrics with Correct (1) as the positive class.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn from_labels(predictions: &[u8], truths: &[u8]) -> Result<Self> {
        if predictions.len() != truths.len() {
            return Err(Error::LengthMismatch { expected: truths.len(), got: predictions.len() });
        }
        let mut c = Self::default();
        for (&p, &t) in predictions.iter().zip(truths) {
            match (p != 0, t != 0) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// Harmonic mean of precision and recall; 0 when both are 0.
    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.tp + self.tn + self.fp + self.fn_)
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// F1 of the positive class. Errors on unequal or empty inputs.
pub fn f1_score(predictions: &[u8], truths: &[u8]) -> Result<f64> {
    if truths.is_empty() {
        return Err(Error::LengthMismatch { expected: 1, got: 0 });
    }
    Ok(Confusion::from_labels(predictions, truths)?.f1())
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn f1_examples() {
        assert_eq!(f1_score(&[1, 0, 1], &[1, 0, 1]).unwrap(), 1.0);
        // TP=2 FP=1 FN=1
        let f = f1_score(&[1, 1, 1, 0, 0], &[1, 1, 0, 1, 0]).unwrap();
        assert!((f - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(f1_score(&[0, 0], &[0, 0]).unwrap(), 0.0);
        assert!(matches!(f1_score(&[1], &[1, 0]), Err(Error::LengthMismatch { .. })));
        assert!(f1_score(&[], &[]).is_err());
    }

    #[test]
    fn mean_std_population() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn f1_permutation_invariant(pairs in prop::collection::vec((0u8..2, 0u8..2), 1..40), rot in 0usize..40) {
            let (p, t): (Vec<u8>, Vec<u8>) = pairs.iter().copied().unzip();
            let k = rot % pairs.len();
            let mut rp = p.clone();
            let mut rt = t.clone();
            rp.rotate_left(k);
            rt.rotate_left(k);
            rp.reverse();
            rt.reverse();
            prop_assert_eq!(f1_score(&p, &t).unwrap(), f1_score(&rp, &rt).unwrap());
            let f = f1_score(&p, &t).unwrap();
            prop_assert!((0.0..=1.0).contains(&f));
        }
    }
}
