use super::Table;
use crate::ensemble::evaluate;
use crate::error::{Error, Result};
use crate::records::ProbeRecordSet;
use crate::select::{select, Pattern};

/// One dataset in a transfer study: records to select on and records to
/// evaluate on (possibly the same).
#[derive(Debug, Clone, Copy)]
pub struct TransferInput<'a> {
    pub name: &'a str,
    pub select: &'a ProbeRecordSet,
    pub eval: &'a ProbeRecordSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferCell {
    pub source_dataset: String,
    pub target_dataset: String,
    pub accuracy: f64,
    pub random_guess: f64,
}

/// Selects on every source and evaluates on every target, diagonal
/// included. Cells are emitted source-major.
pub fn transfer_matrix(
    inputs: &[TransferInput<'_>],
    p: f64,
    pattern: Pattern,
) -> Result<Vec<TransferCell>> {
    let pattern = pattern.ensure_base()?;
    let Some(first) = inputs.first() else {
        return Ok(Vec::new());
    };
    let universe = first.select.probes();
    for inp in inputs {
        if inp.select.probes() != universe || inp.eval.probes() != universe {
            return Err(Error::InvalidInput(format!(
                "dataset `{}` has a different probe universe",
                inp.name
            )));
        }
    }
    let mut cells = Vec::with_capacity(inputs.len() * inputs.len());
    for src in inputs {
        let sel = select(src.select, pattern, p)?;
        for tgt in inputs {
            let rep = evaluate(tgt.eval, &sel, None)?;
            cells.push(TransferCell {
                source_dataset: src.name.to_string(),
                target_dataset: tgt.name.to_string(),
                accuracy: rep
                    .accuracy
                    .ok_or_else(|| Error::Unlabeled(format!("target `{}`", tgt.name)))?,
                random_guess: tgt.eval.random_guess(),
            });
        }
    }
    Ok(cells)
}

pub fn transfer_tsv(cells: &[TransferCell]) -> String {
    let mut t = Table::new(&["source", "target", "accuracy", "random_guess"]);
    for c in cells {
        t.push(vec![
            c.source_dataset.clone(),
            c.target_dataset.clone(),
            c.accuracy.to_string(),
            c.random_guess.to_string(),
        ]);
    }
    t.to_tsv()
}
