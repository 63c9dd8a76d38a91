//! Majority-vote ensembling of selected probes, plus the log-likelihood
//! and attention-norm baselines which share the same machinery.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{assemble_prompt, Dataset};
use crate::error::{Error, Result};
use crate::model::{trace_values, ModelBundle};
use crate::probe::{ProbeId, ProbeKind};
use crate::records::{ItemRecord, ProbeRecordSet, ValueMatrix};
use crate::select::{column_extreme, select, Pattern, Selection};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    TruthvArgmax,
    TruthvArgmin,
    TruthvCombined,
    NovoNorm,
    LogLikelihood,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::TruthvArgmax => "truthv_argmax",
            Method::TruthvArgmin => "truthv_argmin",
            Method::TruthvCombined => "truthv_combined",
            Method::NovoNorm => "novo_norm",
            Method::LogLikelihood => "log_likelihood",
        }
    }

    fn for_pattern(p: Pattern) -> Method {
        match p {
            Pattern::Argmax => Method::TruthvArgmax,
            Pattern::Argmin => Method::TruthvArgmin,
            Pattern::Combined => Method::TruthvCombined,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub item_id: String,
    pub chosen: usize,
    pub votes: BTreeMap<usize, u32>,
    pub voter_count: u32,
    pub method: Method,
}

/// One voting probe: which column of the item matrix it reads and which
/// extremum it votes for. Voters are passed in priority order; the first
/// is the highest-ranked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Voter {
    pub column: usize,
    pub pattern: Pattern,
}

/// Each voter picks its arg-extremum candidate; the candidate with the
/// most votes wins. On a vote tie the winner is the tied candidate backed
/// by the highest-priority voter.
pub fn predict_item(
    item_id: &str,
    values: &ValueMatrix,
    voters: &[Voter],
    method: Method,
) -> Result<Prediction> {
    if voters.is_empty() {
        return Err(Error::Selection("no voters".into()));
    }
    if let Some(v) = voters.iter().find(|v| v.column >= values.cols()) {
        return Err(Error::Selection(format!(
            "voter column {} out of range for {} columns",
            v.column,
            values.cols()
        )));
    }
    let picks: Vec<usize> = voters
        .iter()
        .map(|v| Ok(column_extreme(values, v.column, v.pattern.ensure_base()?)))
        .collect::<Result<_>>()?;
    let mut votes = BTreeMap::new();
    for &c in &picks {
        *votes.entry(c).or_insert(0u32) += 1;
    }
    let top = *votes.values().max().expect("at least one vote");
    let chosen = picks
        .iter()
        .copied()
        .find(|c| votes[c] == top)
        .expect("a voter backs every counted candidate");
    Ok(Prediction {
        item_id: item_id.to_string(),
        chosen,
        votes,
        voter_count: voters.len() as u32,
        method,
    })
}

/// Selection provenance carried into a report.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionMeta {
    pub pattern: Pattern,
    pub p: f64,
    pub source_dataset: String,
    pub budget_n: usize,
    pub total_probe_count: usize,
    pub n_selected: usize,
}

impl SelectionMeta {
    fn of(sel: &Selection) -> Self {
        SelectionMeta {
            pattern: sel.pattern,
            p: sel.p,
            source_dataset: sel.source_dataset.clone(),
            budget_n: sel.budget_n,
            total_probe_count: sel.total_probe_count,
            n_selected: sel.probes.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub dataset: String,
    pub method: Method,
    /// `None` when the evaluated items carry no labels.
    pub accuracy: Option<f64>,
    pub correct: usize,
    pub n_items: usize,
    pub per_item: Vec<Prediction>,
    pub selection: Vec<SelectionMeta>,
}

fn columns_for(records: &ProbeRecordSet, probes: &[ProbeId]) -> Result<Vec<usize>> {
    probes
        .iter()
        .map(|p| {
            records
                .column_of(p)
                .ok_or_else(|| Error::MissingProbe(p.to_string()))
        })
        .collect()
}

/// Uses `dataset` labels in place of the record labels after checking that
/// both cover the same items.
pub fn align_labels(records: &ProbeRecordSet, dataset: Option<&Dataset>) -> Result<ProbeRecordSet> {
    let Some(ds) = dataset else {
        return Ok(records.clone());
    };
    let by_id: HashMap<&str, (Option<usize>, usize)> = ds
        .items
        .iter()
        .map(|i| (i.item_id.as_str(), (i.label, i.candidates.len())))
        .collect();
    let rec_ids: HashSet<&str> = records.items().iter().map(|i| i.item_id.as_str()).collect();
    if rec_ids.len() != by_id.len() || !by_id.keys().all(|k| rec_ids.contains(k)) {
        return Err(Error::InvalidInput(format!(
            "records for `{}` and dataset `{}` cover different items",
            records.dataset_name(),
            ds.name
        )));
    }
    for item in records.items() {
        if by_id[item.item_id.as_str()].1 != item.values.rows() {
            return Err(Error::InvalidInput(format!(
                "item `{}` candidate count differs between records and dataset",
                item.item_id
            )));
        }
    }
    let labels: HashMap<String, Option<usize>> = by_id
        .iter()
        .map(|(k, v)| (k.to_string(), v.0))
        .collect();
    records.relabel(&labels)
}

fn run_votes(
    records: &ProbeRecordSet,
    voters: &[Voter],
    method: Method,
    selection: Vec<SelectionMeta>,
) -> Result<EvalReport> {
    let per_item: Vec<Prediction> = records
        .items()
        .par_iter()
        .map(|it| predict_item(&it.item_id, &it.values, voters, method))
        .collect::<Result<_>>()?;
    report(records, per_item, method, selection)
}

fn report(
    records: &ProbeRecordSet,
    per_item: Vec<Prediction>,
    method: Method,
    selection: Vec<SelectionMeta>,
) -> Result<EvalReport> {
    let labeled = records.items().iter().filter(|i| i.label.is_some()).count();
    let n = records.items().len();
    let (accuracy, correct) = if labeled == 0 {
        (None, 0)
    } else if labeled < n {
        let missing = records.items().iter().find(|i| i.label.is_none()).unwrap();
        return Err(Error::Unlabeled(missing.item_id.clone()));
    } else {
        let correct = records
            .items()
            .iter()
            .zip(&per_item)
            .filter(|(it, p)| it.label == Some(p.chosen))
            .count();
        (Some(correct as f64 / n as f64), correct)
    };
    Ok(EvalReport {
        dataset: records.dataset_name().to_string(),
        method,
        accuracy,
        correct,
        n_items: n,
        per_item,
        selection,
    })
}

/// Majority vote over the probes of `selection`.
pub fn evaluate(
    records: &ProbeRecordSet,
    selection: &Selection,
    dataset: Option<&Dataset>,
) -> Result<EvalReport> {
    let pattern = selection.pattern.ensure_base()?;
    let records = align_labels(records, dataset)?;
    let cols = columns_for(&records, &selection.probe_ids())?;
    let voters: Vec<Voter> = cols
        .into_iter()
        .map(|column| Voter { column, pattern })
        .collect();
    run_votes(
        &records,
        &voters,
        Method::for_pattern(pattern),
        vec![SelectionMeta::of(selection)],
    )
}

/// Pools an argmax and an argmin selection into one vote. A probe present
/// in both casts two votes. Priority interleaves the two rankings, argmax
/// first at equal rank.
pub fn combine_patterns(
    sel_max: &Selection,
    sel_min: &Selection,
    records: &ProbeRecordSet,
) -> Result<EvalReport> {
    if sel_max.pattern != Pattern::Argmax || sel_min.pattern != Pattern::Argmin {
        return Err(Error::Selection(
            "combine needs one argmax and one argmin selection".into(),
        ));
    }
    let max_cols = columns_for(records, &sel_max.probe_ids())?;
    let min_cols = columns_for(records, &sel_min.probe_ids())?;
    let mut voters = Vec::with_capacity(max_cols.len() + min_cols.len());
    for i in 0..max_cols.len().max(min_cols.len()) {
        if let Some(&column) = max_cols.get(i) {
            voters.push(Voter {
                column,
                pattern: Pattern::Argmax,
            });
        }
        if let Some(&column) = min_cols.get(i) {
            voters.push(Voter {
                column,
                pattern: Pattern::Argmin,
            });
        }
    }
    run_votes(
        records,
        &voters,
        Method::TruthvCombined,
        vec![SelectionMeta::of(sel_max), SelectionMeta::of(sel_min)],
    )
}

/// Picks the candidate with the highest log-likelihood probe value.
pub fn log_likelihood_baseline(records: &ProbeRecordSet) -> Result<EvalReport> {
    let column = records
        .column_of(&ProbeId::log_likelihood())
        .ok_or_else(|| Error::MissingProbe(ProbeId::log_likelihood().to_string()))?;
    let voters = [Voter {
        column,
        pattern: Pattern::Argmax,
    }];
    run_votes(records, &voters, Method::LogLikelihood, Vec::new())
}

/// Which tokens a model-computed log-likelihood covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LoglikScope {
    /// Sum over the answer tokens (the baseline).
    #[default]
    AnswerSum,
    /// Answer-token sum divided by the answer length.
    AnswerMean,
    /// Sum over every token after BOS.
    FullSequence,
}

/// Log-likelihood records computed directly from a model.
pub fn log_likelihood_records(
    model: &ModelBundle,
    dataset: &Dataset,
    scope: LoglikScope,
) -> Result<ProbeRecordSet> {
    let probe = [ProbeId::log_likelihood()];
    let items = dataset
        .items
        .par_iter()
        .map(|item| {
            let rows = (0..item.candidates.len())
                .map(|c| {
                    let annotate = |e: Error| Error::Capture {
                        item_id: item.item_id.clone(),
                        candidate: c,
                        source: Box::new(e),
                    };
                    let prompt = assemble_prompt(dataset, item, c, model.config().max_seq_len)
                        .map_err(annotate)?;
                    let span = match scope {
                        LoglikScope::FullSequence => 1..prompt.tokens.len(),
                        _ => prompt.answer_span.clone(),
                    };
                    let n = span.len() as f64;
                    let ll = trace_values(model, &prompt.tokens, span, &probe).map_err(annotate)?[0];
                    Ok(vec![if scope == LoglikScope::AnswerMean { ll / n } else { ll }])
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(ItemRecord {
                item_id: item.item_id.clone(),
                label: item.label,
                values: ValueMatrix::from_rows(rows)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ProbeRecordSet::new(dataset.name.clone(), probe.to_vec(), items)
}

/// Attention-norm voting: select the top `p` heads under argmax on
/// `budget`, then vote on `eval`.
pub fn novo_baseline(
    budget: &ProbeRecordSet,
    eval: &ProbeRecordSet,
    p: f64,
) -> Result<EvalReport> {
    let heads = budget.of_kind(ProbeKind::AttnHeadNorm);
    if heads.n_probes() == 0 {
        return Err(Error::MissingProbe("attn_head_norm".into()));
    }
    let sel = select(&heads, Pattern::Argmax, p)?;
    let cols = columns_for(eval, &sel.probe_ids())?;
    let voters: Vec<Voter> = cols
        .into_iter()
        .map(|column| Voter {
            column,
            pattern: Pattern::Argmax,
        })
        .collect();
    run_votes(eval, &voters, Method::NovoNorm, vec![SelectionMeta::of(&sel)])
}

impl EvalReport {
    pub fn accuracy_text(&self) -> String {
        match self.accuracy {
            Some(a) => format!("{a:.4}"),
            None => "n/a".into(),
        }
    }

    /// Human-readable summary.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("dataset: {}\n", self.dataset));
        s.push_str(&format!("method: {}\n", self.method));
        s.push_str(&format!("items: {}\n", self.n_items));
        s.push_str(&format!("correct: {}\n", self.correct));
        s.push_str(&format!("accuracy: {}\n", self.accuracy_text()));
        for m in &self.selection {
            s.push_str(&format!(
                "selection: pattern={} p={} source={} budget_n={} selected={}/{}\n",
                m.pattern, m.p, m.source_dataset, m.budget_n, m.n_selected, m.total_probe_count
            ));
        }
        s
    }

    /// One JSON object per item.
    pub fn predictions_jsonl(&self) -> String {
        let mut s = String::new();
        for p in &self.per_item {
            s.push_str(&serde_json::to_string(p).expect("prediction serialises"));
            s.push('\n');
        }
        s
    }

    /// Writes the text report to `path` and predictions next to it;
    /// returns the predictions path.
    pub fn write(&self, path: &Path) -> Result<PathBuf> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))?;
        let mut pred = path.as_os_str().to_owned();
        pred.push(".predictions.jsonl");
        let pred = PathBuf::from(pred);
        fs::write(&pred, self.predictions_jsonl()).map_err(|e| Error::io(&pred, e))?;
        Ok(pred)
    }
}
