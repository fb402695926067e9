//! Classification metrics: confusion counts, ROC/PR curves, low-FPR
//! operating points, Brier score and expected calibration error.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::prep::check_binary_labels;

pub const DEFAULT_BINS: usize = 15;
pub const FPR_CAPS: [f64; 2] = [0.001, 0.01];

fn check_aligned(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch { expected: a, actual: b });
    }
    if a == 0 {
        return Err(Error::Empty("evaluation set"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[cfg_attr(feature = "serde", serde(rename = "fn"))]
    pub fn_: u64,
}

/// Rates derived from a [`Confusion`]. A zero denominator yields 0 and sets
/// the matching `*_undefined` flag.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PointMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
    pub f1_undefined: bool,
}

impl Confusion {
    pub fn from_predictions(labels: &[u8], predictions: &[u8]) -> Result<Self> {
        check_aligned(labels.len(), predictions.len())?;
        check_binary_labels(labels)?;
        check_binary_labels(predictions)?;
        let mut c = Confusion::default();
        for (&y, &p) in labels.iter().zip(predictions) {
            match (y, p) {
                (1, 1) => c.tp += 1,
                (0, 1) => c.fp += 1,
                (0, 0) => c.tn += 1,
                _ => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn metrics(&self) -> PointMetrics {
        let ratio = |num: u64, den: u64| if den == 0 { (0.0, true) } else { (num as f64 / den as f64, false) };
        let (accuracy, _) = ratio(self.tp + self.tn, self.total());
        let (precision, precision_undefined) = ratio(self.tp, self.tp + self.fp);
        let (recall, recall_undefined) = ratio(self.tp, self.tp + self.fn_);
        let (f1, f1_undefined) = ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_);
        PointMetrics { accuracy, precision, recall, f1, precision_undefined, recall_undefined, f1_undefined }
    }
}

pub fn confusion_and_point_metrics(labels: &[u8], predictions: &[u8]) -> Result<(Confusion, PointMetrics)> {
    let c = Confusion::from_predictions(labels, predictions)?;
    Ok((c, c.metrics()))
}

fn class_counts(labels: &[u8]) -> Result<(u64, u64)> {
    check_binary_labels(labels)?;
    let pos = labels.iter().filter(|&&y| y == 1).count() as u64;
    let neg = labels.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    Ok((pos, neg))
}

// Distinct scores in descending order with (positives, negatives) at each.
fn score_groups(scores: &[f64], labels: &[u8]) -> Result<Vec<(f64, u64, u64)>> {
    check_aligned(scores.len(), labels.len())?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("scores"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut groups: Vec<(f64, u64, u64)> = Vec::new();
    for i in order {
        let (p, n) = if labels[i] == 1 { (1, 0) } else { (0, 1) };
        match groups.last_mut() {
            Some(g) if g.0 == scores[i] => {
                g.1 += p;
                g.2 += n;
            }
            _ => groups.push((scores[i], p, n)),
        }
    }
    Ok(groups)
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (pos, neg) = class_counts(labels)?;
    let groups = score_groups(scores, labels)?;
    // doubled concordance count keeps the half credits integral
    let mut twice: u128 = 0;
    let mut neg_below = neg;
    for &(_, p, n) in &groups {
        neg_below -= n;
        twice += u128::from(p) * (2 * u128::from(neg_below) + u128::from(n));
    }
    Ok(twice as f64 / (2.0 * pos as f64 * neg as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// Operating points for `score >= threshold` at +∞ and every distinct score.
pub fn roc_curve(scores: &[f64], labels: &[u8]) -> Result<Vec<RocPoint>> {
    let (pos, neg) = class_counts(labels)?;
    let groups = score_groups(scores, labels)?;
    let mut out = vec![RocPoint { threshold: f64::INFINITY, fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0u64, 0u64);
    for (s, p, n) in groups {
        tp += p;
        fp += n;
        out.push(RocPoint { threshold: s, fpr: fp as f64 / neg as f64, tpr: tp as f64 / pos as f64 });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PrPoint {
    pub threshold: f64,
    pub recall: f64,
    pub precision: f64,
}

/// Precision/recall at every distinct score, highest threshold first.
pub fn pr_curve(scores: &[f64], labels: &[u8]) -> Result<Vec<PrPoint>> {
    let (pos, _) = class_counts(labels)?;
    let groups = score_groups(scores, labels)?;
    let (mut tp, mut fp) = (0u64, 0u64);
    Ok(groups
        .into_iter()
        .map(|(s, p, n)| {
            tp += p;
            fp += n;
            PrPoint { threshold: s, recall: tp as f64 / pos as f64, precision: tp as f64 / (tp + fp) as f64 }
        })
        .collect())
}

/// Step-interpolated area under the PR curve: Σ (Rₖ − Rₖ₋₁)·Pₖ.
pub fn pr_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let mut prev = 0.0;
    let mut area = 0.0;
    for pt in pr_curve(scores, labels)? {
        area += (pt.recall - prev) * pt.precision;
        prev = pt.recall;
    }
    Ok(area)
}

/// Highest TPR among thresholds whose FPR does not exceed `cap`.
pub fn tpr_at_fpr(scores: &[f64], labels: &[u8], cap: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&cap) {
        return Err(Error::Probability(cap));
    }
    Ok(roc_curve(scores, labels)?.into_iter().filter(|p| p.fpr <= cap).map(|p| p.tpr).fold(0.0, f64::max))
}

fn check_probs(probs: &[f64]) -> Result<()> {
    match probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        Some(&p) => Err(Error::Probability(p)),
        None => Ok(()),
    }
}

pub fn brier(probs: &[f64], labels: &[u8]) -> Result<f64> {
    check_aligned(probs.len(), labels.len())?;
    check_probs(probs)?;
    check_binary_labels(labels)?;
    let sum: f64 = probs.iter().zip(labels).map(|(p, &y)| (p - f64::from(y)) * (p - f64::from(y))).sum();
    Ok(sum / probs.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReliabilityBin {
    pub lower: f64,
    pub upper: f64,
    pub count: u64,
    /// Mean predicted probability; 0 for an empty bin.
    pub confidence: f64,
    /// Fraction of positives; 0 for an empty bin.
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Calibration {
    pub ece: f64,
    pub bins: Vec<ReliabilityBin>,
}

/// Expected calibration error over `n_bins` equal-width bins. A probability
/// of exactly 1 falls in the last bin.
pub fn ece(probs: &[f64], labels: &[u8], n_bins: usize) -> Result<Calibration> {
    if n_bins < 1 {
        return Err(Error::InvalidArgument("need at least one bin".into()));
    }
    check_aligned(probs.len(), labels.len())?;
    check_probs(probs)?;
    check_binary_labels(labels)?;
    let mut count = vec![0u64; n_bins];
    let mut conf = vec![0.0; n_bins];
    let mut pos = vec![0u64; n_bins];
    for (&p, &y) in probs.iter().zip(labels) {
        let b = (libm::floor(p * n_bins as f64) as usize).min(n_bins - 1);
        count[b] += 1;
        conf[b] += p;
        pos[b] += u64::from(y);
    }
    let total = probs.len() as f64;
    let mut e = 0.0;
    let bins = (0..n_bins)
        .map(|b| {
            let (confidence, accuracy) =
                if count[b] == 0 { (0.0, 0.0) } else { (conf[b] / count[b] as f64, pos[b] as f64 / count[b] as f64) };
            e += count[b] as f64 / total * (accuracy - confidence).abs();
            ReliabilityBin {
                lower: b as f64 / n_bins as f64,
                upper: (b + 1) as f64 / n_bins as f64,
                count: count[b],
                confidence,
                accuracy,
            }
        })
        .collect();
    Ok(Calibration { ece: e, bins })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub n_samples: u64,
    pub confusion: Confusion,
    pub metrics: PointMetrics,
    pub roc_auc: f64,
    pub pr_auc: f64,
    pub tpr_at_fpr_0_1pct: f64,
    pub tpr_at_fpr_1pct: f64,
    pub brier: f64,
    pub ece: f64,
    pub reliability: Vec<ReliabilityBin>,
}

/// Full report for hard `predictions` and attack `probs`.
pub fn evaluate(labels: &[u8], predictions: &[u8], probs: &[f64], n_bins: usize) -> Result<EvalReport> {
    check_aligned(labels.len(), probs.len())?;
    let (confusion, metrics) = confusion_and_point_metrics(labels, predictions)?;
    let cal = ece(probs, labels, n_bins)?;
    Ok(EvalReport {
        n_samples: confusion.total(),
        confusion,
        metrics,
        roc_auc: roc_auc(probs, labels)?,
        pr_auc: pr_auc(probs, labels)?,
        tpr_at_fpr_0_1pct: tpr_at_fpr(probs, labels, FPR_CAPS[0])?,
        tpr_at_fpr_1pct: tpr_at_fpr(probs, labels, FPR_CAPS[1])?,
        brier: brier(probs, labels)?,
        ece: cal.ece,
        reliability: cal.bins,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fixture_predictions(tp: usize, fp: usize, tn: usize, fn_: usize) -> (Vec<u8>, Vec<u8>) {
        let mut y = Vec::new();
        let mut p = Vec::new();
        for (n, yy, pp) in [(tp, 1, 1), (fp, 0, 1), (tn, 0, 0), (fn_, 1, 0)] {
            y.extend(core::iter::repeat(yy).take(n));
            p.extend(core::iter::repeat(pp).take(n));
        }
        (y, p)
    }

    #[test]
    fn confusion_fixture_from_table() {
        let (y, p) = fixture_predictions(22, 5, 318, 5);
        let (c, m) = confusion_and_point_metrics(&y, &p).unwrap();
        assert_eq!(c, Confusion { tp: 22, fp: 5, tn: 318, fn_: 5 });
        assert!((m.accuracy - 0.9714).abs() < 5e-4);
        assert!((m.f1 - 0.8148).abs() < 5e-4);
        // independent path: harmonic mean of precision and recall
        let f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
        assert!((f1 - m.f1).abs() < 1e-12);
    }

    #[test]
    fn perfect_and_all_negative() {
        let y = [1, 0, 1, 0];
        let m = confusion_and_point_metrics(&y, &y).unwrap().1;
        assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (1.0, 1.0, 1.0, 1.0));
        let m = confusion_and_point_metrics(&y, &[0, 0, 0, 0]).unwrap().1;
        assert_eq!(m.recall, 0.0);
        assert!(m.precision_undefined && !m.recall_undefined);
        assert!(confusion_and_point_metrics(&y, &[0, 0]).is_err());
    }

    fn brute_auc(scores: &[f64], labels: &[u8]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if labels[i] == 1 && labels[j] == 0 {
                    den += 1.0;
                    if scores[i] > scores[j] {
                        num += 1.0;
                    } else if scores[i] == scores[j] {
                        num += 0.5;
                    }
                }
            }
        }
        num / den
    }

    #[test]
    fn auc_small_fixtures() {
        assert_eq!(roc_auc(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]).unwrap(), 0.75);
        assert_eq!(roc_auc(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(pr_auc(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.5; 4], &[0, 1, 0, 1]).unwrap(), 0.5);
        assert_eq!(roc_auc(&[0.5; 2], &[1, 1]).unwrap_err(), Error::SingleClass);
    }

    #[test]
    fn auc_matches_pair_counting() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for m in [2usize, 5, 17, 60, 200] {
            for _ in 0..20 {
                // coarse scores force plenty of ties
                let scores: Vec<f64> = (0..m).map(|_| f64::from(rng.random_range(0..8u8)) / 8.0).collect();
                let mut labels: Vec<u8> = (0..m).map(|_| rng.random_range(0..2u8)).collect();
                labels[0] = 0;
                labels[1] = 1;
                assert_eq!(roc_auc(&scores, &labels).unwrap(), brute_auc(&scores, &labels));
            }
        }
    }

    #[test]
    fn auc_of_noise_is_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let scores: Vec<f64> = (0..20_000).map(|_| rng.random()).collect();
        let labels: Vec<u8> = (0..20_000).map(|_| rng.random_range(0..2u8)).collect();
        assert!((roc_auc(&scores, &labels).unwrap() - 0.5).abs() < 0.05);
    }

    #[test]
    fn average_precision_by_hand() {
        // ranks: 1(+) 0(−) 1(+) → recall steps 0.5 at P=1, 0.5 at P=2/3
        let ap = pr_auc(&[0.9, 0.8, 0.7], &[1, 0, 1]).unwrap();
        assert!((ap - (0.5 + 0.5 * 2.0 / 3.0)).abs() < 1e-15);
    }

    fn sweep_oracle(scores: &[f64], labels: &[u8], cap: f64) -> f64 {
        let pos = labels.iter().filter(|&&y| y == 1).count() as f64;
        let neg = labels.len() as f64 - pos;
        let mut best = 0.0f64;
        let mut thresholds: Vec<f64> = scores.to_vec();
        thresholds.push(f64::INFINITY);
        thresholds.push(f64::NEG_INFINITY);
        for t in thresholds {
            let tp = scores.iter().zip(labels).filter(|(s, &y)| **s >= t && y == 1).count() as f64;
            let fp = scores.iter().zip(labels).filter(|(s, &y)| **s >= t && y == 0).count() as f64;
            if fp / neg <= cap {
                best = best.max(tp / pos);
            }
        }
        best
    }

    #[test]
    fn tpr_at_fpr_cases() {
        let sep = [0.1, 0.2, 0.9, 0.95];
        let y = [0, 0, 1, 1];
        assert_eq!(tpr_at_fpr(&sep, &y, 0.001).unwrap(), 1.0);
        assert_eq!(tpr_at_fpr(&sep, &y, 0.01).unwrap(), 1.0);
        assert_eq!(tpr_at_fpr(&[0.4; 4], &y, 0.01).unwrap(), 0.0);

        // one negative outranks 30% of the positives
        let mut scores = vec![0.0; 1000];
        let mut labels = vec![0u8; 1000];
        scores[0] = 0.75;
        for i in 0..100 {
            scores.push(if i < 70 { 0.8 } else { 0.7 });
            labels.push(1);
        }
        for cap in FPR_CAPS {
            assert_eq!(tpr_at_fpr(&scores, &labels, cap).unwrap(), sweep_oracle(&scores, &labels, cap));
        }
        assert_eq!(tpr_at_fpr(&scores, &labels, 0.0005).unwrap(), 0.7);
        assert_eq!(tpr_at_fpr(&scores, &labels, 0.001).unwrap(), 1.0);
    }

    #[test]
    fn tpr_at_fpr_matches_sweep_on_random_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..50 {
            let m = rng.random_range(2..300);
            let scores: Vec<f64> = (0..m).map(|_| f64::from(rng.random_range(0..40u8))).collect();
            let mut labels: Vec<u8> = (0..m).map(|_| rng.random_range(0..2u8)).collect();
            labels[0] = 0;
            labels[1] = 1;
            for cap in [0.0, 0.001, 0.01, 0.1, 0.5] {
                assert_eq!(tpr_at_fpr(&scores, &labels, cap).unwrap(), sweep_oracle(&scores, &labels, cap));
            }
        }
    }

    #[test]
    fn brier_values() {
        assert_eq!(brier(&[1.0, 0.0], &[1, 0]).unwrap(), 0.0);
        assert_eq!(brier(&[0.5; 3], &[1, 0, 1]).unwrap(), 0.25);
        assert!((brier(&[0.8, 0.3], &[1, 0]).unwrap() - 0.065).abs() < 1e-12);
        assert_eq!(brier(&[1.2], &[1]), Err(Error::Probability(1.2)));
    }

    #[test]
    fn ece_values() {
        let cal = ece(&[0.2, 0.2, 0.9, 0.9], &[1, 0, 1, 1], 2).unwrap();
        assert!((cal.ece - 0.20).abs() < 1e-12);
        assert_eq!(cal.bins.iter().map(|b| b.count).sum::<u64>(), 4);
        assert_eq!(ece(&[1.0; 3], &[0; 3], 15).unwrap().ece, 1.0);
        let exact = ece(&[0.25, 0.25, 0.25, 0.25], &[1, 0, 0, 0], 15).unwrap();
        assert_eq!(exact.ece, 0.0);
        assert!(ece(&[0.5], &[1], 0).is_err());
    }

    #[test]
    fn single_bin_ece_is_mean_gap() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let probs: Vec<f64> = (0..300).map(|_| rng.random()).collect();
        let labels: Vec<u8> = (0..300).map(|_| rng.random_range(0..2u8)).collect();
        let mp = probs.iter().sum::<f64>() / 300.0;
        let ml = labels.iter().map(|&y| f64::from(y)).sum::<f64>() / 300.0;
        assert!((ece(&probs, &labels, 1).unwrap().ece - (mp - ml).abs()).abs() < 1e-12);
    }

    #[test]
    fn probability_one_lands_in_last_bin() {
        let cal = ece(&[1.0, 0.0], &[1, 0], 15).unwrap();
        assert_eq!(cal.bins[14].count, 1);
        assert_eq!(cal.bins[0].count, 1);
    }

    #[test]
    fn report_counts_are_consistent() {
        let y = [1, 0, 1, 0, 1, 0];
        let probs = [0.9, 0.2, 0.6, 0.55, 0.3, 0.1];
        let preds: Vec<u8> = probs.iter().map(|&p| u8::from(p >= 0.5)).collect();
        let r = evaluate(&y, &preds, &probs, DEFAULT_BINS).unwrap();
        assert_eq!(r.n_samples, 6);
        assert_eq!(r.reliability.len(), 15);
        assert_eq!(r.reliability.iter().map(|b| b.count).sum::<u64>(), 6);
        for v in [r.roc_auc, r.pr_auc, r.brier, r.ece, r.tpr_at_fpr_1pct, r.metrics.f1] {
            assert!((0.0..=1.0).contains(&v));
        }
    }
}
