use std::collections::BTreeMap;

use super::Table;
use crate::error::{Error, Result};
use crate::select::{select_top, Pattern, ProbeScore};

#[derive(Debug, Clone, PartialEq)]
pub struct LayerHistogram {
    pub fraction_used: f64,
    /// Every layer in `0..n_layers`, including empty ones.
    pub counts: BTreeMap<usize, usize>,
    pub pattern: Pattern,
    pub total_selected: usize,
}

/// Where the top `fraction` of layered probes sit.
pub fn layer_histogram(
    scores: &[ProbeScore],
    fraction: f64,
    n_layers: usize,
    pattern: Pattern,
) -> Result<LayerHistogram> {
    let layered: Vec<ProbeScore> = scores.iter().filter(|s| s.probe.layer.is_some()).copied().collect();
    let sel = select_top(&layered, fraction, layered.len(), pattern, "")?;
    let mut counts: BTreeMap<usize, usize> = (0..n_layers).map(|l| (l, 0)).collect();
    for s in &sel.probes {
        let l = s.probe.layer.expect("filtered to layered probes");
        if l >= n_layers {
            return Err(Error::InvalidInput(format!(
                "probe {} lies beyond n_layers = {n_layers}",
                s.probe
            )));
        }
        *counts.entry(l).or_default() += 1;
    }
    Ok(LayerHistogram {
        fraction_used: fraction,
        counts,
        pattern: sel.pattern,
        total_selected: sel.probes.len(),
    })
}

impl LayerHistogram {
    /// Adds another histogram (e.g. from a second dataset) into this one.
    pub fn merge(&mut self, other: &LayerHistogram) {
        for (l, c) in &other.counts {
            *self.counts.entry(*l).or_default() += c;
        }
        self.total_selected += other.total_selected;
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["layer", "count", "fraction", "pattern"]);
        for (l, c) in &self.counts {
            t.push(vec![
                l.to_string(),
                c.to_string(),
                self.fraction_used.to_string(),
                self.pattern.to_string(),
            ]);
        }
        t
    }
}
