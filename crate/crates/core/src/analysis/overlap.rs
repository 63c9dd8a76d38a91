use super::Table;
use crate::error::{Error, Result};
use crate::probe::ProbeId;
use crate::records::ProbeRecordSet;
use crate::select::{column_extreme, Pattern};

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionSummary {
    pub probe: ProbeId,
    pub truthful_values: Vec<f64>,
    pub untruthful_values: Vec<f64>,
    /// Pooled-threshold AUROC, oriented so that 1.0 means the pattern's
    /// extremum always marks truthful content.
    pub auroc: f64,
    pub within_item_accuracy: f64,
}

/// Probability that a random positive outranks a random negative, ties
/// counting one half. Equivalent to the area under the ROC curve swept
/// over every pooled threshold.
pub fn auroc(positives: &[f64], negatives: &[f64]) -> f64 {
    let (np, nn) = (positives.len(), negatives.len());
    if np == 0 || nn == 0 {
        return 0.5;
    }
    let mut pooled: Vec<(f64, bool)> = positives
        .iter()
        .map(|&v| (v, true))
        .chain(negatives.iter().map(|&v| (v, false)))
        .collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Sum of average ranks of the positives.
    let mut rank_sum = 0.0f64;
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        while j + 1 < pooled.len() && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        let pos = pooled[i..=j].iter().filter(|x| x.1).count();
        rank_sum += avg * pos as f64;
        i = j + 1;
    }
    let u = rank_sum - (np * (np + 1)) as f64 / 2.0;
    u / (np as f64 * nn as f64)
}

/// Splits one probe's values into truthful and untruthful pools over a
/// binary-choice record set.
pub fn activation_distributions(
    records: &ProbeRecordSet,
    probe: &ProbeId,
    pattern: Pattern,
) -> Result<DistributionSummary> {
    let pattern = pattern.ensure_base()?;
    let col = records
        .column_of(probe)
        .ok_or_else(|| Error::MissingProbe(probe.to_string()))?;
    let labels = records.labels()?;
    let mut truthful = Vec::with_capacity(labels.len());
    let mut untruthful = Vec::with_capacity(labels.len());
    let mut correct = 0usize;
    for (item, &label) in records.items().iter().zip(&labels) {
        if item.values.rows() != 2 {
            return Err(Error::InvalidInput(format!(
                "item `{}` has {} candidates; the overlap analysis needs exactly 2",
                item.item_id,
                item.values.rows()
            )));
        }
        truthful.push(item.values.get(label, col));
        untruthful.push(item.values.get(1 - label, col));
        if column_extreme(&item.values, col, pattern) == label {
            correct += 1;
        }
    }
    let up = auroc(&truthful, &untruthful);
    Ok(DistributionSummary {
        probe: *probe,
        auroc: if pattern == Pattern::Argmin { 1.0 - up } else { up },
        within_item_accuracy: correct as f64 / labels.len().max(1) as f64,
        truthful_values: truthful,
        untruthful_values: untruthful,
    })
}

impl DistributionSummary {
    /// Long-format values for external density plots.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["probe", "group", "value"]);
        let probe = self.probe.to_string();
        for (group, vals) in [("truthful", &self.truthful_values), ("untruthful", &self.untruthful_values)] {
            for v in vals {
                t.push(vec![probe.clone(), group.into(), v.to_string()]);
            }
        }
        t
    }

    pub fn summary_table(&self) -> Table {
        let mut t = Table::new(&["probe", "n_items", "auroc", "within_item_accuracy"]);
        t.push(vec![
            self.probe.to_string(),
            self.truthful_values.len().to_string(),
            self.auroc.to_string(),
            self.within_item_accuracy.to_string(),
        ]);
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(pos: &[f64], neg: &[f64]) -> f64 {
        let mut s = 0.0;
        for p in pos {
            for n in neg {
                s += if p > n { 1.0 } else if p == n { 0.5 } else { 0.0 };
            }
        }
        s / (pos.len() * neg.len()) as f64
    }

    #[test]
    fn separated_and_constant() {
        assert_eq!(auroc(&[3.0, 4.0], &[1.0, 2.0]), 1.0);
        assert_eq!(auroc(&[1.0, 2.0], &[3.0, 4.0]), 0.0);
        assert_eq!(auroc(&[1.0; 5], &[1.0; 7]), 0.5);
    }

    proptest! {
        #[test]
        fn matches_pairwise_count(
            pos in prop::collection::vec(-5i32..5, 1..30),
            neg in prop::collection::vec(-5i32..5, 1..30),
        ) {
            let p: Vec<f64> = pos.iter().map(|&v| v as f64).collect();
            let n: Vec<f64> = neg.iter().map(|&v| v as f64).collect();
            prop_assert!((auroc(&p, &n) - brute(&p, &n)).abs() < 1e-12);
        }

        #[test]
        fn invariant_under_increasing_transform(
            pos in prop::collection::vec(-50.0f64..50.0, 1..30),
            neg in prop::collection::vec(-50.0f64..50.0, 1..30),
        ) {
            let f = |v: &f64| (v / 10.0).exp() + 3.0 * v;
            let tp: Vec<f64> = pos.iter().map(f).collect();
            let tn: Vec<f64> = neg.iter().map(f).collect();
            prop_assert_eq!(auroc(&pos, &neg), auroc(&tp, &tn));
        }
    }
}
