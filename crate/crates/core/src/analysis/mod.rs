//! Data-emitting analyses over probe scores and records. Every result can
//! be rendered as tab-separated text with a single header line.

mod budget;
mod curve;
mod layers;
mod overlap;
mod transfer;
mod vocab;

pub use budget::{budget_scaling, Budget, BudgetConfig, BudgetRow, BudgetTable, DEFAULT_P_GRID};
pub use curve::{ranking_curve, CurveRow, RankingCurve};
pub use layers::{layer_histogram, LayerHistogram};
pub use overlap::{activation_distributions, auroc, DistributionSummary};
pub use transfer::{transfer_matrix, transfer_tsv, TransferCell, TransferInput};
pub use vocab::{value_vectors_tsv, vocab_report, vocab_tsv, VocabEntry, DEFAULT_TOP_K};

/// Tab-separated table with a one-line header.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_tsv(&self) -> String {
        let mut s = self.columns.join("\t");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join("\t"));
            s.push('\n');
        }
        s
    }
}
