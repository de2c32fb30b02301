//! Margin reports: the uniform result shape for congruence checks. Each
//! entry records the level a difference was required to vanish to and the
//! valuation actually observed, rather than a bare boolean, so reports
//! stay auditable.

use crate::tower::PiVal;

#[derive(Debug, Clone)]
pub struct MarginEntry {
    pub label: String,
    /// Required pi-adic vanishing level.
    pub required: u64,
    /// Observed valuation of the difference.
    pub observed: PiVal,
}

impl MarginEntry {
    pub fn passes(&self) -> bool {
        self.observed.at_least(self.required)
    }

    /// observed lower bound minus required level (>= 0 on pass).
    pub fn margin(&self) -> i64 {
        self.observed.lower_bound() as i64 - self.required as i64
    }
}

#[derive(Debug, Clone, Default)]
pub struct MarginReport {
    pub entries: Vec<MarginEntry>,
    /// Labels where the truncation or precision could not certify anything.
    pub uncertified: Vec<String>,
}

impl MarginReport {
    pub fn push(&mut self, label: impl Into<String>, required: u64, observed: PiVal) {
        self.entries.push(MarginEntry { label: label.into(), required, observed });
    }

    pub fn push_uncertified(&mut self, label: impl Into<String>) {
        self.uncertified.push(label.into());
    }

    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.passes())
    }

    pub fn worst_margin(&self) -> Option<i64> {
        self.entries.iter().map(|e| e.margin()).min()
    }

    pub fn failures(&self) -> Vec<&MarginEntry> {
        self.entries.iter().filter(|e| !e.passes()).collect()
    }
}
