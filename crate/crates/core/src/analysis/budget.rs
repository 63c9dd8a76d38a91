use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use super::Table;
use crate::data::sample_ids;
use crate::ensemble::evaluate;
use crate::error::{Error, Result};
use crate::records::ProbeRecordSet;
use crate::select::{score_probes, select_top, Pattern};

/// Grid searched for the full-budget row: 0.01% to 1%.
pub const DEFAULT_P_GRID: [f64; 7] = [0.0001, 0.0002, 0.0005, 0.001, 0.002, 0.005, 0.01];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Budget {
    Count(usize),
    All,
}

impl fmt::Display for Budget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Budget::Count(n) => write!(f, "{n}"),
            Budget::All => f.write_str("all"),
        }
    }
}

impl FromStr for Budget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "all" {
            return Ok(Budget::All);
        }
        s.parse()
            .map(Budget::Count)
            .map_err(|_| Error::InvalidInput(format!("budget must be an integer or `all`, got `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetConfig {
    pub budgets: Vec<Budget>,
    /// Fraction used for sampled budgets.
    pub p: f64,
    /// Fractions searched for the `all` budget.
    pub p_grid: Vec<f64>,
    pub seeds: Vec<u64>,
    pub pattern: Pattern,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetRow {
    pub budget: Budget,
    /// `None` for the full budget, which involves no sampling.
    pub seed: Option<u64>,
    pub p: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetTable {
    pub rows: Vec<BudgetRow>,
    pub pattern: Pattern,
    pub p_grid_min: f64,
    pub p_grid_max: f64,
}

impl BudgetTable {
    pub fn mean_accuracy(&self, budget: Budget) -> Option<f64> {
        let accs: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.budget == budget)
            .map(|r| r.accuracy)
            .collect();
        (!accs.is_empty()).then(|| accs.iter().sum::<f64>() / accs.len() as f64)
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&[
            "budget",
            "seed",
            "p",
            "accuracy",
            "pattern",
            "p_grid_min",
            "p_grid_max",
        ]);
        for r in &self.rows {
            t.push(vec![
                r.budget.to_string(),
                r.seed.map_or("-".into(), |s| s.to_string()),
                r.p.to_string(),
                r.accuracy.to_string(),
                self.pattern.to_string(),
                self.p_grid_min.to_string(),
                self.p_grid_max.to_string(),
            ]);
        }
        t
    }
}

fn accuracy_at(
    pool: &ProbeRecordSet,
    eval: &ProbeRecordSet,
    pattern: Pattern,
    p: f64,
) -> Result<f64> {
    let scores = score_probes(pool, pattern)?;
    let sel = select_top(&scores, p, pool.n_probes(), pattern, pool.dataset_name())?;
    let rep = evaluate(eval, &sel, None)?;
    rep.accuracy
        .ok_or_else(|| Error::Unlabeled(format!("evaluation split `{}`", eval.dataset_name())))
}

/// Selects on budget-sized subsets of `pool` and evaluates on `eval`.
/// Sampled budgets use `cfg.p` once per seed; the full budget reports the
/// best accuracy over `cfg.p_grid`.
pub fn budget_scaling(
    pool: &ProbeRecordSet,
    eval: &ProbeRecordSet,
    cfg: &BudgetConfig,
) -> Result<BudgetTable> {
    let pattern = cfg.pattern.ensure_base()?;
    let eval_ids: HashSet<&str> = eval.items().iter().map(|i| i.item_id.as_str()).collect();
    if let Some(shared) = pool.items().iter().find(|i| eval_ids.contains(i.item_id.as_str())) {
        return Err(Error::InvalidInput(format!(
            "selection pool and evaluation split share item `{}`",
            shared.item_id
        )));
    }
    if cfg.p_grid.is_empty() {
        return Err(Error::InvalidInput("empty p grid".into()));
    }
    let labeled: Vec<String> = pool
        .items()
        .iter()
        .filter(|i| i.label.is_some())
        .map(|i| i.item_id.clone())
        .collect();

    let mut rows = Vec::new();
    for &budget in &cfg.budgets {
        match budget {
            Budget::Count(n) => {
                if n > labeled.len() {
                    return Err(Error::InvalidInput(format!(
                        "budget {n} exceeds the {} labeled pool items",
                        labeled.len()
                    )));
                }
                for &seed in &cfg.seeds {
                    let ids: HashSet<String> =
                        sample_ids(labeled.clone(), n, seed)?.into_iter().collect();
                    let sub = pool.subset(&ids);
                    rows.push(BudgetRow {
                        budget,
                        seed: Some(seed),
                        p: cfg.p,
                        accuracy: accuracy_at(&sub, eval, pattern, cfg.p)?,
                    });
                }
            }
            Budget::All => {
                let mut best: Option<(f64, f64)> = None;
                for &p in &cfg.p_grid {
                    let acc = accuracy_at(pool, eval, pattern, p)?;
                    if best.is_none_or(|(_, b)| acc > b) {
                        best = Some((p, acc));
                    }
                }
                let (p, accuracy) = best.expect("non-empty grid");
                rows.push(BudgetRow {
                    budget,
                    seed: None,
                    p,
                    accuracy,
                });
            }
        }
    }
    Ok(BudgetTable {
        rows,
        pattern,
        p_grid_min: cfg.p_grid.iter().copied().fold(f64::INFINITY, f64::min),
        p_grid_max: cfg.p_grid.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}
