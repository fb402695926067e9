//! Meta-features built from the two branch outputs, and error-overlap
//! diagnostics between the branches.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::prep::check_binary_labels;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FusionScheme {
    /// Labels thresholded at probability 0.5.
    Hard,
    /// QNN logit and raw QSVM decision value.
    Margin,
    /// QNN sigmoid output and QSVM Platt probability.
    Probability,
}

impl FusionScheme {
    pub const ALL: [FusionScheme; 3] = [FusionScheme::Hard, FusionScheme::Margin, FusionScheme::Probability];

    pub fn as_str(self) -> &'static str {
        match self {
            FusionScheme::Hard => "hard",
            FusionScheme::Margin => "margin",
            FusionScheme::Probability => "probability",
        }
    }
}

impl fmt::Display for FusionScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FusionScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FusionScheme::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(alloc::format!("unknown fusion scheme '{s}'")))
    }
}

/// Per-sample output of one branch: an unbounded score (QNN logit or QSVM
/// margin) and an attack probability.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BranchOutputs {
    pub ids: Vec<usize>,
    pub score: Vec<f64>,
    pub prob: Vec<f64>,
}

impl BranchOutputs {
    pub fn new(ids: Vec<usize>, score: Vec<f64>, prob: Vec<f64>) -> Result<Self> {
        if score.len() != ids.len() || prob.len() != ids.len() {
            return Err(Error::DimensionMismatch { expected: ids.len(), actual: score.len().min(prob.len()) });
        }
        if let Some(&p) = prob.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Probability(p));
        }
        if score.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("branch scores"));
        }
        Ok(Self { ids, score, prob })
    }

    /// Ids `0..n` in order.
    pub fn sequential(score: Vec<f64>, prob: Vec<f64>) -> Result<Self> {
        Self::new((0..score.len()).collect(), score, prob)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.prob.iter().map(|&p| threshold(p)).collect()
    }
}

pub fn threshold(prob: f64) -> u8 {
    u8::from(prob >= 0.5)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetaFeatureTable {
    pub scheme: FusionScheme,
    pub ids: Vec<usize>,
    pub qnn: Vec<f64>,
    pub qsvm: Vec<f64>,
}

impl MetaFeatureTable {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// One row per sample: `[qnn, qsvm]`.
    pub fn to_matrix(&self) -> Matrix {
        let data = self.qnn.iter().zip(&self.qsvm).flat_map(|(&a, &b)| [a, b]).collect();
        Matrix::from_vec(self.len(), 2, data).expect("columns have equal length")
    }
}

pub fn extract_meta_features(
    qnn: &BranchOutputs,
    qsvm: &BranchOutputs,
    scheme: FusionScheme,
) -> Result<MetaFeatureTable> {
    if qnn.ids != qsvm.ids {
        return Err(Error::InvalidArgument("branch outputs cover different samples".into()));
    }
    let pick = |b: &BranchOutputs| -> Vec<f64> {
        match scheme {
            FusionScheme::Hard => b.prob.iter().map(|&p| f64::from(threshold(p))).collect(),
            FusionScheme::Margin => b.score.clone(),
            FusionScheme::Probability => b.prob.clone(),
        }
    };
    Ok(MetaFeatureTable { scheme, ids: qnn.ids.clone(), qnn: pick(qnn), qsvm: pick(qsvm) })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DisagreementReport {
    pub n_samples: usize,
    pub errors_qsvm: usize,
    pub errors_qnn: usize,
    pub errors_both: usize,
    pub disagreements: usize,
    pub rate: f64,
}

pub fn disagreement_report(qnn_labels: &[u8], qsvm_labels: &[u8], truth: &[u8]) -> Result<DisagreementReport> {
    let n = truth.len();
    for len in [qnn_labels.len(), qsvm_labels.len()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, actual: len });
        }
    }
    if n == 0 {
        return Err(Error::Empty("disagreement input"));
    }
    for l in [qnn_labels, qsvm_labels, truth] {
        check_binary_labels(l)?;
    }
    let mut r =
        DisagreementReport { n_samples: n, errors_qsvm: 0, errors_qnn: 0, errors_both: 0, disagreements: 0, rate: 0.0 };
    for i in 0..n {
        let a = qnn_labels[i] != truth[i];
        let b = qsvm_labels[i] != truth[i];
        r.errors_qnn += usize::from(a);
        r.errors_qsvm += usize::from(b);
        r.errors_both += usize::from(a && b);
        r.disagreements += usize::from(qnn_labels[i] != qsvm_labels[i]);
    }
    r.rate = r.disagreements as f64 / n as f64;
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn outputs(score: &[f64], prob: &[f64]) -> BranchOutputs {
        BranchOutputs::sequential(score.to_vec(), prob.to_vec()).unwrap()
    }

    #[test]
    fn scheme_projections() {
        let qnn = outputs(&[1.3], &[0.9]);
        let qsvm = outputs(&[-0.7], &[0.2]);
        let hard = extract_meta_features(&qnn, &qsvm, FusionScheme::Hard).unwrap();
        assert_eq!((hard.qnn[0], hard.qsvm[0]), (1.0, 0.0));
        let prob = extract_meta_features(&qnn, &qsvm, FusionScheme::Probability).unwrap();
        assert_eq!((prob.qnn[0], prob.qsvm[0]), (0.9, 0.2));
        let margin = extract_meta_features(&qnn, &qsvm, FusionScheme::Margin).unwrap();
        assert_eq!((margin.qnn[0], margin.qsvm[0]), (1.3, -0.7));
        assert_eq!(margin.to_matrix().row(0), &[1.3, -0.7]);
    }

    #[test]
    fn misaligned_ids_rejected() {
        let a = BranchOutputs::new(vec![0, 1], vec![0.0, 0.0], vec![0.5, 0.5]).unwrap();
        let b = BranchOutputs::new(vec![0, 2], vec![0.0, 0.0], vec![0.5, 0.5]).unwrap();
        assert!(extract_meta_features(&a, &b, FusionScheme::Hard).is_err());
        assert!(BranchOutputs::new(vec![0], vec![0.0], vec![1.5]).is_err());
    }

    #[test]
    fn hard_features_agree_between_logit_and_probability() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let z: f64 = rng.random_range(-5.0..5.0);
            let p = crate::qnn::sigmoid(z);
            assert_eq!(u8::from(z >= 0.0), threshold(p));
        }
        assert_eq!(threshold(crate::qnn::sigmoid(0.0)), 1);
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in FusionScheme::ALL {
            assert_eq!(s.as_str().parse::<FusionScheme>().unwrap(), s);
        }
        assert!("soft".parse::<FusionScheme>().is_err());
    }

    /// Label vectors with the requested error counts; the overlap is placed
    /// first so the remaining errors are disjoint.
    fn construct(n: usize, e_qsvm: usize, e_qnn: usize, both: usize) -> (Vec<u8>, Vec<u8>, Vec<u8>) {
        let truth: Vec<u8> = (0..n).map(|i| (i % 3 == 0) as u8).collect();
        let mut qnn = truth.clone();
        let mut qsvm = truth.clone();
        for i in 0..both {
            qnn[i] ^= 1;
            qsvm[i] ^= 1;
        }
        qsvm[both..e_qsvm].iter_mut().for_each(|v| *v ^= 1);
        qnn[e_qsvm..e_qsvm + (e_qnn - both)].iter_mut().for_each(|v| *v ^= 1);
        (qnn, qsvm, truth)
    }

    #[test]
    fn reproduces_error_table() {
        for (e_qsvm, e_qnn, both, rate) in [(97, 62, 46, 0.067), (28, 7, 4, 0.027)] {
            let (qnn, qsvm, truth) = construct(1000, e_qsvm, e_qnn, both);
            let r = disagreement_report(&qnn, &qsvm, &truth).unwrap();
            assert_eq!((r.errors_qsvm, r.errors_qnn, r.errors_both), (e_qsvm, e_qnn, both));
            assert!((r.rate - rate).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_and_disjoint_predictions() {
        let (qnn, _, truth) = construct(30, 5, 5, 5);
        let r = disagreement_report(&qnn, &qnn, &truth).unwrap();
        assert_eq!(r.rate, 0.0);
        assert_eq!(r.errors_both, r.errors_qsvm);
        let (qnn, qsvm, truth) = construct(30, 4, 6, 0);
        let r = disagreement_report(&qnn, &qsvm, &truth).unwrap();
        assert_eq!(r.errors_both, 0);
        assert!(disagreement_report(&qnn, &qsvm[..3], &truth).is_err());
    }

    #[test]
    fn rate_matches_symmetric_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let n = rng.random_range(1..200);
            let gen = |rng: &mut ChaCha8Rng| -> Vec<u8> { (0..n).map(|_| rng.random_range(0..2u8)).collect() };
            let (a, b, t) = (gen(&mut rng), gen(&mut rng), gen(&mut rng));
            let r = disagreement_report(&a, &b, &t).unwrap();
            let mut sym = 0;
            for i in 0..n {
                let in_a = a[i] != t[i];
                let in_b = b[i] != t[i];
                if in_a != in_b {
                    sym += 1;
                }
            }
            assert_eq!(r.disagreements, sym);
            assert!(r.errors_both <= r.errors_qnn.min(r.errors_qsvm));
            assert!((0.0..=1.0).contains(&r.rate));
        }
    }
}
