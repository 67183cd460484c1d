//! Confusion counts, balanced accuracy, and group fairness metrics.
//!
//! Each fairness metric yields one value `F_g` per group, the gap between an
//! overall rate and the same rate restricted to group `g`. Disparity is
//! `max_g F_g - min_g F_g`, which is never negative.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub true_pos: usize,
    pub false_neg: usize,
    pub false_pos: usize,
    pub true_neg: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.true_pos + self.false_neg + self.false_pos + self.true_neg
    }
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Parameter(format!("length mismatch: {a} vs {b}")));
    }
    if a == 0 {
        return Err(Error::Parameter("empty prediction vector".into()));
    }
    Ok(())
}

/// Class 1 is the positive class.
pub fn confusion(y_true: &[u8], y_pred: &[u8]) -> Result<ConfusionMatrix> {
    check_lengths(y_true.len(), y_pred.len())?;
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t != 0, p != 0) {
            (true, true) => cm.true_pos += 1,
            (true, false) => cm.false_neg += 1,
            (false, true) => cm.false_pos += 1,
            (false, false) => cm.true_neg += 1,
        }
    }
    Ok(cm)
}

/// Mean of true-positive and true-negative rates.
pub fn balanced_accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let pos = cm.true_pos + cm.false_neg;
    let neg = cm.true_neg + cm.false_pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedRate(
            "balanced accuracy needs both true classes".into(),
        ));
    }
    Ok(0.5 * (cm.true_pos as f64 / pos as f64 + cm.true_neg as f64 / neg as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FairnessMetric {
    StatisticalParity,
    EqualOpportunity,
    EqualizedOdds,
}

impl fmt::Display for FairnessMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FairnessMetric::StatisticalParity => "SP",
            FairnessMetric::EqualOpportunity => "E.Opp.",
            FairnessMetric::EqualizedOdds => "E.Odds",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMetricSet {
    pub kind: FairnessMetric,
    /// `F_g` for each group id.
    pub per_group: Vec<f64>,
    pub disparity: f64,
    /// Equalized odds only: the per-group gaps for true class 0 and true class 1,
    /// before averaging.
    pub class_gaps: Option<[Vec<f64>; 2]>,
}

pub fn disparity(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    (max - min).abs()
}

/// Rate of `y_pred == 1` over selected instances, overall and per group.
fn conditional_rates(
    y_pred: &[u8],
    groups: &[usize],
    m: usize,
    select: impl Fn(usize) -> bool,
    hit: impl Fn(u8) -> bool,
    what: &str,
) -> Result<(f64, Vec<f64>)> {
    let mut total = (0usize, 0usize);
    let mut per = vec![(0usize, 0usize); m];
    for (idx, (&p, &g)) in y_pred.iter().zip(groups).enumerate() {
        if g >= m {
            return Err(Error::Parameter(format!("group id {g} is not below {m}")));
        }
        if select(idx) {
            let h = usize::from(hit(p));
            total.0 += h;
            total.1 += 1;
            per[g].0 += h;
            per[g].1 += 1;
        }
    }
    if total.1 == 0 {
        return Err(Error::UndefinedRate(format!("no instances with {what}")));
    }
    let rates = per
        .iter()
        .enumerate()
        .map(|(g, &(h, n))| {
            if n == 0 {
                Err(Error::UndefinedRate(format!("group {g} has no instances with {what}")))
            } else {
                Ok(h as f64 / n as f64)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((total.0 as f64 / total.1 as f64, rates))
}

fn gaps(overall: f64, per_group: &[f64]) -> Vec<f64> {
    per_group.iter().map(|r| overall - r).collect()
}

/// `F_g = P(Ŷ=1) - P(Ŷ=1 | G=g)`.
pub fn statistical_parity(y_pred: &[u8], groups: &[usize], m: usize) -> Result<GroupMetricSet> {
    check_lengths(y_pred.len(), groups.len())?;
    let (overall, rates) = conditional_rates(y_pred, groups, m, |_| true, |p| p != 0, "any label")?;
    let per_group = gaps(overall, &rates);
    Ok(GroupMetricSet {
        kind: FairnessMetric::StatisticalParity,
        disparity: disparity(&per_group),
        per_group,
        class_gaps: None,
    })
}

/// `F_g = P(Ŷ=1 | Y=1) - P(Ŷ=1 | Y=1, G=g)`.
pub fn equal_opportunity(y_true: &[u8], y_pred: &[u8], groups: &[usize], m: usize) -> Result<GroupMetricSet> {
    check_lengths(y_true.len(), y_pred.len())?;
    check_lengths(y_true.len(), groups.len())?;
    let (overall, rates) =
        conditional_rates(y_pred, groups, m, |i| y_true[i] != 0, |p| p != 0, "true label 1")?;
    let per_group = gaps(overall, &rates);
    Ok(GroupMetricSet {
        kind: FairnessMetric::EqualOpportunity,
        disparity: disparity(&per_group),
        per_group,
        class_gaps: None,
    })
}

/// `F_g = ½ Σ_y [P(Ŷ=y | Y=y) - P(Ŷ=y | Y=y, G=g)]`.
pub fn equalized_odds(y_true: &[u8], y_pred: &[u8], groups: &[usize], m: usize) -> Result<GroupMetricSet> {
    check_lengths(y_true.len(), y_pred.len())?;
    check_lengths(y_true.len(), groups.len())?;
    let (o1, r1) = conditional_rates(y_pred, groups, m, |i| y_true[i] != 0, |p| p != 0, "true label 1")?;
    let (o0, r0) = conditional_rates(y_pred, groups, m, |i| y_true[i] == 0, |p| p == 0, "true label 0")?;
    let g1 = gaps(o1, &r1);
    let g0 = gaps(o0, &r0);
    let per_group: Vec<f64> = g0.iter().zip(&g1).map(|(a, b)| 0.5 * (a + b)).collect();
    Ok(GroupMetricSet {
        kind: FairnessMetric::EqualizedOdds,
        disparity: disparity(&per_group),
        per_group,
        class_gaps: Some([g0, g1]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn confusion_enumeration() {
        let cm = confusion(&[1, 1, 0, 0], &[1, 0, 0, 1]).unwrap();
        assert_eq!(
            cm,
            ConfusionMatrix {
                true_pos: 1,
                false_neg: 1,
                false_pos: 1,
                true_neg: 1
            }
        );
        let cm = confusion(&[1, 0, 1], &[1, 0, 1]).unwrap();
        assert_eq!((cm.false_neg, cm.false_pos), (0, 0));
        assert!(confusion(&[1], &[1, 0]).is_err());
        assert!(confusion(&[], &[]).is_err());
    }

    #[test]
    fn balanced_accuracy_examples() {
        let cm = ConfusionMatrix {
            true_pos: 8,
            false_neg: 2,
            true_neg: 6,
            false_pos: 4,
        };
        assert!((balanced_accuracy(&cm).unwrap() - 0.7).abs() < 1e-15);
        let perfect = confusion(&[1, 0, 1, 0], &[1, 0, 1, 0]).unwrap();
        assert_eq!(balanced_accuracy(&perfect).unwrap(), 1.0);
        let constant = confusion(&[1, 0, 1, 0], &[1, 1, 1, 1]).unwrap();
        assert_eq!(balanced_accuracy(&constant).unwrap(), 0.5);
        let one_class = confusion(&[1, 1], &[1, 0]).unwrap();
        assert!(matches!(balanced_accuracy(&one_class), Err(Error::UndefinedRate(_))));
    }

    #[test]
    fn statistical_parity_gap() {
        // overall rate 0.5; group 0 rate 0.3, group 1 rate 0.7
        let mut pred = vec![1, 1, 1, 0, 0, 0, 0, 0, 0, 0];
        pred.extend([1, 1, 1, 1, 1, 1, 1, 0, 0, 0]);
        let mut groups = vec![0; 10];
        groups.extend(vec![1; 10]);
        let sp = statistical_parity(&pred, &groups, 2).unwrap();
        assert!((sp.per_group[0] - 0.2).abs() < 1e-12);
        assert!((sp.per_group[1] + 0.2).abs() < 1e-12);
        assert!((sp.disparity - 0.4).abs() < 1e-12);
        let even = statistical_parity(&[1, 0, 1, 0], &[0, 0, 1, 1], 2).unwrap();
        assert_eq!(even.disparity, 0.0);
    }

    #[test]
    fn empty_group_is_undefined() {
        assert!(matches!(
            statistical_parity(&[1, 0], &[0, 0], 2),
            Err(Error::UndefinedRate(msg)) if msg.contains("group 1")
        ));
        assert!(matches!(
            equal_opportunity(&[1, 0], &[1, 0], &[0, 1], 2),
            Err(Error::UndefinedRate(_))
        ));
        assert!(matches!(
            equalized_odds(&[1, 1, 0], &[1, 0, 0], &[0, 1, 0], 2),
            Err(Error::UndefinedRate(_))
        ));
    }

    #[test]
    fn equal_opportunity_gap() {
        // group 0: 5 positives, TPR 1.0; group 1: 5 positives, TPR 0.6; overall 0.8
        let y_true = vec![1; 10];
        let y_pred = vec![1, 1, 1, 1, 1, 1, 1, 1, 0, 0];
        let groups = vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
        let eo = equal_opportunity(&y_true, &y_pred, &groups, 2).unwrap();
        assert!((eo.per_group[1] - 0.2).abs() < 1e-12);
        let perfect = equal_opportunity(&[1, 0, 1, 0], &[1, 0, 1, 0], &[0, 0, 1, 1], 2).unwrap();
        assert_eq!(perfect.disparity, 0.0);
        assert!(perfect.per_group.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn equalized_odds_averages_class_gaps() {
        // group 1: TPR gap 0.2 and TNR gap 0.1 relative to overall
        // overall TPR 0.8 (8/10), group 1 TPR 0.6 (3/5)
        // overall TNR 0.9 (9/10), group 1 TNR 0.8 (4/5)
        let mut y_true = vec![1; 10];
        y_true.extend(vec![0; 10]);
        let y_pred = [
            1, 1, 1, 1, 1, // g0 positives: all correct
            1, 1, 1, 0, 0, // g1 positives: 3/5
            0, 0, 0, 0, 0, // g0 negatives: all correct
            0, 0, 0, 0, 1, // g1 negatives: 4/5
        ];
        let groups = [0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
        let eodds = equalized_odds(&y_true, &y_pred, &groups, 2).unwrap();
        assert!((eodds.per_group[1] - 0.15).abs() < 1e-12);
        let [g0, g1] = eodds.class_gaps.unwrap();
        assert!((g1[1] - 0.2).abs() < 1e-12);
        assert!((g0[1] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn single_group_has_no_disparity() {
        let y_true = [1, 0, 1, 0, 1];
        let y_pred = [1, 1, 0, 0, 1];
        let groups = [0; 5];
        assert_eq!(statistical_parity(&y_pred, &groups, 1).unwrap().disparity, 0.0);
        assert_eq!(equal_opportunity(&y_true, &y_pred, &groups, 1).unwrap().disparity, 0.0);
        assert_eq!(equalized_odds(&y_true, &y_pred, &groups, 1).unwrap().disparity, 0.0);
    }

    fn labelled(n: usize, m: usize) -> impl Strategy<Value = (Vec<u8>, Vec<u8>, Vec<usize>)> {
        (
            prop::collection::vec(0u8..2, n),
            prop::collection::vec(0u8..2, n),
            prop::collection::vec(0..m, n),
        )
    }

    proptest! {
        #[test]
        fn relabeling_groups_keeps_disparity((t, p, g) in labelled(60, 3), rot in 1usize..3) {
            let g2: Vec<usize> = g.iter().map(|&x| (x + rot) % 3).collect();
            let pairs = [
                (statistical_parity(&p, &g, 3), statistical_parity(&p, &g2, 3)),
                (equal_opportunity(&t, &p, &g, 3), equal_opportunity(&t, &p, &g2, 3)),
                (equalized_odds(&t, &p, &g, 3), equalized_odds(&t, &p, &g2, 3)),
            ];
            for (a, b) in pairs {
                if let (Ok(a), Ok(b)) = (a, b) {
                    prop_assert!((a.disparity - b.disparity).abs() < 1e-12);
                    for grp in 0..3 {
                        prop_assert_eq!(a.per_group[grp], b.per_group[(grp + rot) % 3]);
                    }
                    prop_assert!((0.0..=1.0).contains(&a.disparity));
                }
            }
        }

        #[test]
        fn flipping_predictions_negates_parity((_t, p, g) in labelled(50, 2)) {
            let flipped: Vec<u8> = p.iter().map(|&v| 1 - v).collect();
            if let (Ok(a), Ok(b)) = (statistical_parity(&p, &g, 2), statistical_parity(&flipped, &g, 2)) {
                for (x, y) in a.per_group.iter().zip(&b.per_group) {
                    prop_assert!((x + y).abs() < 1e-12);
                }
                prop_assert!((a.disparity - b.disparity).abs() < 1e-12);
            }
        }
    }
}
