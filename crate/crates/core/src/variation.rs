//! Structural current variation across banks and rows.

use serde::{Deserialize, Serialize};

use crate::trace::NUM_BANKS;

/// Multipliers capturing systematic, layout-driven current differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructuralVariation {
    /// Idle-current multiplier for each bank while it holds an open row.
    pub bank_idle_factor: [f64; NUM_BANKS],
    /// Read-current multiplier for each bank.
    pub bank_read_factor: [f64; NUM_BANKS],
    /// Fractional ACT/PRE current increase per `1` bit in the row address.
    pub row_ones_slope: f64,
}

/// What a bank factor is looked up for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BankContext {
    Idle,
    Read,
    Write,
}

impl StructuralVariation {
    /// All factors 1 and no row slope: the engine behaves as if variation
    /// were not modelled.
    pub const NONE: StructuralVariation = StructuralVariation {
        bank_idle_factor: [1.0; NUM_BANKS],
        bank_read_factor: [1.0; NUM_BANKS],
        row_ones_slope: 0.0,
    };

    pub fn row_factor(&self, row: u16) -> f64 {
        1.0 + self.row_ones_slope * row.count_ones() as f64
    }

    /// Writes show no bank-to-bank variation, so the write context is always 1.
    pub fn bank_factor(&self, bank: u8, ctx: BankContext) -> f64 {
        let b = bank as usize;
        match ctx {
            BankContext::Idle => self.bank_idle_factor[b],
            BankContext::Read => self.bank_read_factor[b],
            BankContext::Write => 1.0,
        }
    }

    /// Mean idle factor over a set of active banks (1.0 for an empty set).
    pub fn mean_idle_factor(&self, banks: impl IntoIterator<Item = usize>) -> f64 {
        let (sum, n) = banks
            .into_iter()
            .fold((0.0, 0usize), |(s, n), b| (s + self.bank_idle_factor[b], n + 1));
        if n == 0 {
            1.0
        } else {
            sum / n as f64
        }
    }

    pub fn issues(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, table) in [("bank_idle_factor", &self.bank_idle_factor), ("bank_read_factor", &self.bank_read_factor)] {
            if table[0] != 1.0 {
                out.push(format!("variation.{name}[0] must be 1.0 (bank 0 is the reference)"));
            }
            if let Some((i, v)) = table.iter().enumerate().find(|(_, v)| !(**v > 0.0) || !v.is_finite()) {
                out.push(format!("variation.{name}[{i}] must be > 0, got {v}"));
            }
        }
        if !(self.row_ones_slope >= 0.0) || !self.row_ones_slope.is_finite() {
            out.push(format!("variation.row_ones_slope must be >= 0, got {}", self.row_ones_slope));
        }
        out
    }
}

impl Default for StructuralVariation {
    fn default() -> Self {
        StructuralVariation::NONE
    }
}
