//! Probe scoring and top-p selection.
//!
//! A probe's accuracy is the fraction of items where its arg-extremum over
//! candidates (argmax or argmin) lands on the labeled answer. Probes are
//! ranked by that accuracy and the best `max(1, floor(p * total))` kept.

use std::cmp::Ordering;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probe::ProbeId;
use crate::records::{ProbeRecordSet, ValueMatrix};

/// Default selection fraction.
pub const DEFAULT_P: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    Argmax,
    Argmin,
    /// Ensemble-time union of an argmax and an argmin selection.
    Combined,
}

impl Pattern {
    pub fn as_str(self) -> &'static str {
        match self {
            Pattern::Argmax => "argmax",
            Pattern::Argmin => "argmin",
            Pattern::Combined => "combined",
        }
    }

    pub fn ensure_base(self) -> Result<Self> {
        match self {
            Pattern::Combined => Err(Error::Selection(
                "the combined pattern only applies when ensembling".into(),
            )),
            p => Ok(p),
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "argmax" => Ok(Pattern::Argmax),
            "argmin" => Ok(Pattern::Argmin),
            "combined" => Ok(Pattern::Combined),
            o => Err(Error::InvalidInput(format!("unknown pattern `{o}`"))),
        }
    }
}

/// Candidate index holding the largest (argmax) or smallest (argmin) value
/// of column `col`. Ties go to the lowest index.
#[inline]
pub fn column_extreme(m: &ValueMatrix, col: usize, pattern: Pattern) -> usize {
    let mut best = 0;
    let mut best_v = m.get(0, col);
    for r in 1..m.rows() {
        let v = m.get(r, col);
        let better = match pattern {
            Pattern::Argmin => v < best_v,
            _ => v > best_v,
        };
        if better {
            best = r;
            best_v = v;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProbeScore {
    pub probe: ProbeId,
    pub correct: u64,
    pub n_items: u64,
    /// 1-based position in the full ranking.
    pub rank: usize,
}

impl ProbeScore {
    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.n_items as f64
    }

    /// Descending accuracy, exact rational comparison.
    pub fn cmp_accuracy(&self, other: &Self) -> Ordering {
        let a = u128::from(self.correct) * u128::from(other.n_items);
        let b = u128::from(other.correct) * u128::from(self.n_items);
        b.cmp(&a)
    }

    /// Full ranking order: accuracy, then the probe tie-break.
    pub fn cmp_rank(&self, other: &Self) -> Ordering {
        self.cmp_accuracy(other)
            .then_with(|| self.probe.tie_break_cmp(&other.probe))
    }
}

/// Scores every probe column of `records`; results are in column order with
/// `rank` filled in.
pub fn score_probes(records: &ProbeRecordSet, pattern: Pattern) -> Result<Vec<ProbeScore>> {
    let pattern = pattern.ensure_base()?;
    let labels = records.labels()?;
    if labels.is_empty() {
        return Err(Error::Selection("cannot score probes on zero items".into()));
    }
    let items = records.items();
    let n = items.len() as u64;
    let mut scores: Vec<ProbeScore> = records
        .probes()
        .par_iter()
        .enumerate()
        .map(|(col, probe)| {
            let correct = items
                .iter()
                .zip(&labels)
                .filter(|(it, &l)| column_extreme(&it.values, col, pattern) == l)
                .count() as u64;
            ProbeScore {
                probe: *probe,
                correct,
                n_items: n,
                rank: 0,
            }
        })
        .collect();
    assign_ranks(&mut scores);
    Ok(scores)
}

fn assign_ranks(scores: &mut [ProbeScore]) {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].cmp_rank(&scores[b]));
    for (r, &i) in order.iter().enumerate() {
        scores[i].rank = r + 1;
    }
}

/// Number of probes kept for fraction `p` of `total`.
pub fn selection_size(p: f64, total: usize) -> usize {
    // The relative nudge keeps e.g. 0.29 * 100 from flooring to 28.
    let raw = (p * total as f64 * (1.0 + 1e-12)).floor() as usize;
    raw.clamp(1, total.max(1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub pattern: Pattern,
    pub p: f64,
    /// Descending accuracy; `rank` runs 1..=len.
    pub probes: Vec<ProbeScore>,
    pub source_dataset: String,
    pub budget_n: usize,
    pub total_probe_count: usize,
}

impl Selection {
    pub fn probe_ids(&self) -> Vec<ProbeId> {
        self.probes.iter().map(|s| s.probe).collect()
    }
}

pub fn select_top(
    scores: &[ProbeScore],
    p: f64,
    total_probe_count: usize,
    pattern: Pattern,
    source_dataset: &str,
) -> Result<Selection> {
    let pattern = pattern.ensure_base()?;
    if scores.is_empty() {
        return Err(Error::Selection("empty score list".into()));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Selection(format!("p must lie in (0, 1], got {p}")));
    }
    let k = selection_size(p, total_probe_count).min(scores.len());
    let mut ranked = scores.to_vec();
    ranked.sort_by(ProbeScore::cmp_rank);
    ranked.truncate(k);
    for (i, s) in ranked.iter_mut().enumerate() {
        s.rank = i + 1;
    }
    Ok(Selection {
        pattern,
        p,
        probes: ranked,
        source_dataset: source_dataset.to_string(),
        budget_n: scores[0].n_items as usize,
        total_probe_count,
    })
}

/// Scores `records` under `pattern` and keeps the top `p` fraction of all
/// its probes.
pub fn select(records: &ProbeRecordSet, pattern: Pattern, p: f64) -> Result<Selection> {
    let scores = score_probes(records, pattern)?;
    select_top(&scores, p, records.n_probes(), pattern, records.dataset_name())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualityViolation {
    pub probe: ProbeId,
    pub argmin_correct: u64,
    pub negated_argmax_correct: u64,
    /// Items where this probe has an exact within-item tie.
    pub tied_items: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualityReport {
    pub probes_checked: usize,
    pub items_with_ties: usize,
    pub violations: Vec<DualityViolation>,
}

/// Checks that argmin scores equal argmax scores of the negated records,
/// probe by probe.
pub fn negate_pattern_check(records: &ProbeRecordSet) -> Result<DualityReport> {
    let min = score_probes(records, Pattern::Argmin)?;
    let neg = score_probes(&records.negated(), Pattern::Argmax)?;
    let tied = |col: usize| -> Vec<String> {
        records
            .items()
            .iter()
            .filter(|it| {
                let mut v = it.values.column(col);
                v.sort_by(f64::total_cmp);
                v.windows(2).any(|w| w[0] == w[1])
            })
            .map(|it| it.item_id.clone())
            .collect()
    };
    let items_with_ties = records
        .items()
        .iter()
        .filter(|it| {
            (0..records.n_probes()).any(|c| {
                let mut v = it.values.column(c);
                v.sort_by(f64::total_cmp);
                v.windows(2).any(|w| w[0] == w[1])
            })
        })
        .count();
    let violations = min
        .iter()
        .zip(&neg)
        .enumerate()
        .filter(|(_, (a, b))| a.correct != b.correct)
        .map(|(col, (a, b))| DualityViolation {
            probe: a.probe,
            argmin_correct: a.correct,
            negated_argmax_correct: b.correct,
            tied_items: tied(col),
        })
        .collect();
    Ok(DualityReport {
        probes_checked: min.len(),
        items_with_ties,
        violations,
    })
}

#[derive(Serialize, Deserialize)]
struct SelectionHeader {
    pattern: Pattern,
    p: f64,
    source_dataset: String,
    budget_n: usize,
    total_probes: usize,
}

#[derive(Serialize, Deserialize)]
struct SelectionLine {
    #[serde(flatten)]
    probe: ProbeId,
    accuracy_num: u64,
    accuracy_den: u64,
    rank: usize,
}

pub fn encode_selection(sel: &Selection) -> String {
    let header = SelectionHeader {
        pattern: sel.pattern,
        p: sel.p,
        source_dataset: sel.source_dataset.clone(),
        budget_n: sel.budget_n,
        total_probes: sel.total_probe_count,
    };
    let mut out = serde_json::to_string(&header).expect("header serialises");
    out.push('\n');
    for s in &sel.probes {
        let line = SelectionLine {
            probe: s.probe,
            accuracy_num: s.correct,
            accuracy_den: s.n_items,
            rank: s.rank,
        };
        out.push_str(&serde_json::to_string(&line).expect("line serialises"));
        out.push('\n');
    }
    out
}

pub fn decode_selection(text: &str) -> Result<Selection> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: SelectionHeader = serde_json::from_str(
        lines
            .next()
            .ok_or_else(|| Error::Selection("empty selection file".into()))?,
    )
    .map_err(|e| Error::json("selection header", e))?;
    let mut probes = Vec::new();
    for line in lines {
        let l: SelectionLine =
            serde_json::from_str(line).map_err(|e| Error::json("selection line", e))?;
        l.probe
            .validate_shape()
            .map_err(|e| Error::Selection(e.to_string()))?;
        if l.accuracy_den == 0 || l.accuracy_num > l.accuracy_den {
            return Err(Error::Selection(format!(
                "invalid accuracy {}/{} for {}",
                l.accuracy_num, l.accuracy_den, l.probe
            )));
        }
        probes.push(ProbeScore {
            probe: l.probe,
            correct: l.accuracy_num,
            n_items: l.accuracy_den,
            rank: l.rank,
        });
    }
    if probes.is_empty() {
        return Err(Error::Selection("selection lists no probes".into()));
    }
    if probes
        .windows(2)
        .any(|w| w[0].cmp_accuracy(&w[1]) == Ordering::Greater)
    {
        return Err(Error::Selection("probes are not in descending accuracy order".into()));
    }
    if header.pattern == Pattern::Combined {
        return Err(Error::Selection("a stored selection must be argmax or argmin".into()));
    }
    Ok(Selection {
        pattern: header.pattern,
        p: header.p,
        probes,
        source_dataset: header.source_dataset,
        budget_n: header.budget_n,
        total_probe_count: header.total_probes,
    })
}

pub fn write_selection(sel: &Selection, path: &Path) -> Result<()> {
    fs::write(path, encode_selection(sel)).map_err(|e| Error::io(path, e))
}

pub fn read_selection(path: &Path) -> Result<Selection> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode_selection(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::ItemRecord;

    fn records(rows_per_item: Vec<(Vec<Vec<f64>>, usize)>) -> ProbeRecordSet {
        let n_cols = rows_per_item[0].0[0].len();
        let probes = (0..n_cols).map(|i| ProbeId::mlp_key(0, i)).collect();
        let items = rows_per_item
            .into_iter()
            .enumerate()
            .map(|(i, (rows, label))| ItemRecord {
                item_id: format!("i{i:03}"),
                label: Some(label),
                values: ValueMatrix::from_rows(rows).unwrap(),
            })
            .collect();
        ProbeRecordSet::new("t", probes, items).unwrap()
    }

    #[test]
    fn perfect_argmax_probe() {
        // Probe 0 is largest at the label; probe 1 is constant.
        let r = records(vec![
            (vec![vec![1.0, 0.0], vec![3.0, 0.0], vec![2.0, 0.0]], 1),
            (vec![vec![9.0, 0.0], vec![3.0, 0.0], vec![2.0, 0.0]], 0),
            (vec![vec![1.0, 0.0], vec![3.0, 0.0], vec![5.0, 0.0]], 2),
        ]);
        let max = score_probes(&r, Pattern::Argmax).unwrap();
        assert_eq!(max[0].correct, 3);
        assert_eq!(max[0].rank, 1);
        // Constant probe: correct only where label == 0.
        assert_eq!(max[1].correct, 1);
        let min = score_probes(&r, Pattern::Argmin).unwrap();
        assert_eq!(min[0].correct, 0);
        assert_eq!(min[1].correct, 1);
    }

    #[test]
    fn unlabeled_and_combined_are_rejected() {
        let mut r = records(vec![(vec![vec![1.0], vec![2.0]], 0)]);
        assert!(score_probes(&r, Pattern::Combined).is_err());
        let items = vec![ItemRecord {
            item_id: "u".into(),
            label: None,
            values: ValueMatrix::from_rows(vec![vec![1.0]]).unwrap(),
        }];
        r = ProbeRecordSet::new("t", vec![ProbeId::mlp_key(0, 0)], items).unwrap();
        assert!(matches!(score_probes(&r, Pattern::Argmax), Err(Error::Unlabeled(_))));
    }

    #[test]
    fn selection_size_arithmetic() {
        assert_eq!(selection_size(0.001, 96_000), 96);
        assert_eq!(selection_size(1.0, 96), 96);
        assert_eq!(selection_size(0.0001, 10), 1);
        assert_eq!(selection_size(0.29, 100), 29);
        // Cross-check the floor by counting.
        for total in [1usize, 7, 999, 96_000, 123_457] {
            for p in [0.0001, 0.001, 0.01, 0.5] {
                let by_count = (1..=total)
                    .filter(|&k| (k as f64) <= p * total as f64 + 1e-9)
                    .count()
                    .max(1);
                assert_eq!(selection_size(p, total), by_count, "{p} {total}");
            }
        }
    }

    #[test]
    fn select_top_breaks_ties_by_layer_then_index() {
        let s = |probe, correct| ProbeScore {
            probe,
            correct,
            n_items: 10,
            rank: 0,
        };
        let scores = vec![
            s(ProbeId::mlp_key(2, 0), 9),
            s(ProbeId::attn_head(1, 4), 9),
            s(ProbeId::mlp_key(1, 4), 9),
            s(ProbeId::mlp_key(0, 9), 5),
        ];
        let sel = select_top(&scores, 1.0, 4, Pattern::Argmax, "d").unwrap();
        let ids = sel.probe_ids();
        assert_eq!(
            ids,
            vec![
                ProbeId::mlp_key(1, 4),
                ProbeId::attn_head(1, 4),
                ProbeId::mlp_key(2, 0),
                ProbeId::mlp_key(0, 9)
            ]
        );
        assert_eq!(sel.probes.iter().map(|p| p.rank).collect::<Vec<_>>(), vec![1, 2, 3, 4]);
        assert!(select_top(&[], 0.5, 0, Pattern::Argmax, "d").is_err());
        assert!(select_top(&scores, 0.0, 4, Pattern::Argmax, "d").is_err());
        assert!(select_top(&scores, 0.5, 4, Pattern::Combined, "d").is_err());
    }

    #[test]
    fn default_p_is_one_in_a_thousand() {
        assert_eq!(DEFAULT_P, 0.001);
    }

    #[test]
    fn single_candidate_items_score_one() {
        let r = records(vec![(vec![vec![1.0, -2.0]], 0), (vec![vec![0.0, 3.0]], 0)]);
        for p in [Pattern::Argmax, Pattern::Argmin] {
            assert!(score_probes(&r, p).unwrap().iter().all(|s| s.correct == 2));
        }
        assert!(negate_pattern_check(&r).unwrap().violations.is_empty());
    }

    #[test]
    fn ties_do_not_break_duality() {
        let r = records(vec![
            (vec![vec![1.0, 2.0], vec![1.0, 0.0]], 1),
            (vec![vec![4.0, 2.0], vec![3.0, 5.0]], 1),
        ]);
        let rep = negate_pattern_check(&r).unwrap();
        assert_eq!(rep.probes_checked, 2);
        assert_eq!(rep.items_with_ties, 1);
        assert!(rep.violations.is_empty());
    }

    #[test]
    fn selection_file_round_trip() {
        let r = records(vec![
            (vec![vec![1.0, 2.0, 0.5], vec![3.0, 0.0, 0.4]], 1),
            (vec![vec![4.0, 2.0, 0.1], vec![3.0, 5.0, 0.2]], 1),
        ]);
        let sel = select(&r, Pattern::Argmax, 1.0).unwrap();
        let text = encode_selection(&sel);
        assert!(text.starts_with(
            "{\"pattern\":\"argmax\",\"p\":1.0,\"source_dataset\":\"t\",\"budget_n\":2,\"total_probes\":3}\n"
        ));
        // Every column scores 1/2, so index order decides.
        let first = text.lines().nth(1).unwrap();
        assert_eq!(
            first,
            "{\"kind\":\"mlp_key\",\"layer\":0,\"index\":0,\"accuracy_num\":1,\"accuracy_den\":2,\"rank\":1}"
        );
        assert_eq!(decode_selection(&text).unwrap(), sel);
    }
}
