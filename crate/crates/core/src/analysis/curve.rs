use super::Table;
use crate::error::{Error, Result};
use crate::probe::ProbeId;
use crate::select::ProbeScore;

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub rank: usize,
    pub probe: ProbeId,
    pub acc_argmax: f64,
    pub acc_argmin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingCurve {
    /// Ordered by argmax rank.
    pub rows: Vec<CurveRow>,
    /// Mean of `1/M` over the scored items.
    pub random_guess: f64,
}

/// Pairs argmax and argmin accuracies per probe, ordered by argmax rank.
/// Both score lists must cover the same probes in the same order.
pub fn ranking_curve(
    argmax: &[ProbeScore],
    argmin: &[ProbeScore],
    random_guess: f64,
) -> Result<RankingCurve> {
    if argmax.len() != argmin.len()
        || argmax.iter().zip(argmin).any(|(a, b)| a.probe != b.probe)
    {
        return Err(Error::InvalidInput(
            "argmax and argmin scores cover different probes".into(),
        ));
    }
    let mut rows: Vec<CurveRow> = argmax
        .iter()
        .zip(argmin)
        .map(|(a, b)| CurveRow {
            rank: a.rank,
            probe: a.probe,
            acc_argmax: a.accuracy(),
            acc_argmin: b.accuracy(),
        })
        .collect();
    rows.sort_by_key(|r| r.rank);
    Ok(RankingCurve { rows, random_guess })
}

impl RankingCurve {
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["rank", "probe", "acc_argmax", "acc_argmin", "random_guess"]);
        for r in &self.rows {
            t.push(vec![
                r.rank.to_string(),
                r.probe.to_string(),
                r.acc_argmax.to_string(),
                r.acc_argmin.to_string(),
                self.random_guess.to_string(),
            ]);
        }
        t
    }
}
