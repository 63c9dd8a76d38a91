use super::Table;
use crate::error::{Error, Result};
use crate::model::{project_to_vocab, value_vector, ModelBundle};
use crate::probe::{ProbeId, ProbeKind};
use crate::select::Selection;
use crate::tokenizer::ByteTokenizer;

pub const DEFAULT_TOP_K: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct VocabEntry {
    pub probe: ProbeId,
    pub rank: usize,
    /// `(token_id, score, rendered token)`
    pub tokens: Vec<(usize, f64, String)>,
}

fn mlp_coords(probe: &ProbeId) -> Result<(usize, usize)> {
    match (probe.kind, probe.layer, probe.index) {
        (ProbeKind::MlpKey, Some(l), Some(i)) => Ok((l, i)),
        _ => Err(Error::InvalidInput(format!(
            "vocabulary projection needs mlp_key probes, got {probe}"
        ))),
    }
}

/// Top-`top_k` vocabulary projection of every selected value vector.
pub fn vocab_report(model: &ModelBundle, selection: &Selection, top_k: usize) -> Result<Vec<VocabEntry>> {
    let tok = ByteTokenizer;
    selection
        .probes
        .iter()
        .map(|s| {
            let (l, i) = mlp_coords(&s.probe)?;
            let tokens = project_to_vocab(model, l, i, top_k)?
                .into_iter()
                .map(|(id, score)| (id, score, tok.token_text(id)))
                .collect();
            Ok(VocabEntry {
                probe: s.probe,
                rank: s.rank,
                tokens,
            })
        })
        .collect()
}

pub fn vocab_tsv(entries: &[VocabEntry]) -> String {
    let mut t = Table::new(&["rank", "probe", "position", "token_id", "token", "score"]);
    for e in entries {
        for (pos, (id, score, text)) in e.tokens.iter().enumerate() {
            t.push(vec![
                e.rank.to_string(),
                e.probe.to_string(),
                (pos + 1).to_string(),
                id.to_string(),
                text.escape_default().to_string(),
                score.to_string(),
            ]);
        }
    }
    t.to_tsv()
}

/// Raw value vectors of the selection, one row per probe, for external
/// embedding tools.
pub fn value_vectors_tsv(model: &ModelBundle, selection: &Selection) -> Result<String> {
    let d = model.config().d_model;
    let mut cols = vec!["rank".to_string(), "probe".to_string()];
    cols.extend((0..d).map(|j| format!("v{j}")));
    let mut t = Table {
        columns: cols,
        rows: Vec::new(),
    };
    for s in &selection.probes {
        let (l, i) = mlp_coords(&s.probe)?;
        let mut row = vec![s.rank.to_string(), s.probe.to_string()];
        row.extend(value_vector(model, l, i)?.iter().map(|v| v.to_string()));
        t.push(row);
    }
    Ok(t.to_tsv())
}
