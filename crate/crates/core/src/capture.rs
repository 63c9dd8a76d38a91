//! Runs a model over every (item, candidate) prompt and collects probe
//! values into a [`ProbeRecordSet`].

use rayon::prelude::*;

use crate::data::{assemble_prompt, Dataset};
use crate::error::{Error, Result};
use crate::model::{trace_values, ModelBundle};
use crate::probe::ProbeId;
use crate::records::{ItemRecord, ProbeRecordSet, ValueMatrix};

/// Every MLP key, every head norm, and the answer log-likelihood.
pub fn all_probes(model: &ModelBundle) -> Vec<ProbeId> {
    let c = model.config();
    let mut v = c.all_mlp_probes();
    v.extend(c.all_head_probes());
    v.push(ProbeId::log_likelihood());
    v
}

pub fn capture(model: &ModelBundle, dataset: &Dataset, probes: &[ProbeId]) -> Result<ProbeRecordSet> {
    for p in probes {
        model.config().check_probe(p)?;
    }
    let mut sorted = probes.to_vec();
    sorted.sort();
    sorted.dedup();

    let jobs: Vec<(usize, usize)> = dataset
        .items
        .iter()
        .enumerate()
        .flat_map(|(i, item)| (0..item.candidates.len()).map(move |c| (i, c)))
        .collect();
    // Indexed parallel collect keeps job order, so the output does not
    // depend on scheduling.
    let rows: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(i, c)| {
            let item = &dataset.items[i];
            let annotate = |e: Error| Error::Capture {
                item_id: item.item_id.clone(),
                candidate: c,
                source: Box::new(e),
            };
            let prompt =
                assemble_prompt(dataset, item, c, model.config().max_seq_len).map_err(annotate)?;
            trace_values(model, &prompt.tokens, prompt.answer_span, &sorted).map_err(annotate)
        })
        .collect::<Result<_>>()?;

    let mut rows = rows.into_iter();
    let mut items = Vec::with_capacity(dataset.items.len());
    for item in &dataset.items {
        let m = item.candidates.len();
        let data: Vec<f64> = rows.by_ref().take(m).flatten().collect();
        items.push(ItemRecord {
            item_id: item.item_id.clone(),
            label: item.label,
            values: ValueMatrix::new(m, sorted.len(), data)?,
        });
    }
    ProbeRecordSet::new(dataset.name.clone(), sorted, items)
}
