use serde::{Deserialize, Serialize};

use super::{DiffLine, LineKind};

/// Line-level change accounting.
///
/// Precision is matched lines over revised length, recall is matched lines
/// over original length. Values are kept unrounded; [`DiffMetrics::summary`]
/// prints them to four decimals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffMetrics {
    pub matched: usize,
    pub removed: usize,
    pub added: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl DiffMetrics {
    pub fn from_counts(matched: usize, removed: usize, added: usize) -> Self {
        let original_len = matched + removed;
        let revised_len = matched + added;
        if original_len == 0 && revised_len == 0 {
            return DiffMetrics {
                matched,
                removed,
                added,
                precision: 1.0,
                recall: 1.0,
                f1: 1.0,
            };
        }
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(matched, revised_len);
        let recall = ratio(matched, original_len);
        // Harmonic mean of the two ratios, written over counts.
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            (2 * matched) as f64 / (2 * matched + added + removed) as f64
        };
        DiffMetrics {
            matched,
            removed,
            added,
            precision,
            recall,
            f1,
        }
    }

    pub fn original_len(&self) -> usize {
        self.matched + self.removed
    }

    pub fn revised_len(&self) -> usize {
        self.matched + self.added
    }

    /// `precision=0.6667 recall=0.6667 f1=0.6667`
    pub fn summary(&self) -> String {
        format!(
            "precision={:.4} recall={:.4} f1={:.4}",
            self.precision, self.recall, self.f1
        )
    }
}

pub fn compute_metrics(diff: &[DiffLine]) -> DiffMetrics {
    let (mut matched, mut removed, mut added) = (0, 0, 0);
    for l in diff {
        match l.kind {
            LineKind::Unchanged => matched += 1,
            LineKind::Removed => removed += 1,
            LineKind::Added => added += 1,
        }
    }
    DiffMetrics::from_counts(matched, removed, added)
}
