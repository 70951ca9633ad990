//! RAM cost model for deploying an `N:P:H:M` network on a microcontroller.
//!
//! Algorithm 1 streams reservoir entries and never stores `W`; Algorithm 2
//! stores `W` before projecting. Everything else is shared.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::Architecture;

/// Fixed platform costs in bytes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RamCosts {
    pub variables: u64,
    pub serial_port: u64,
    pub math: u64,
    /// Bytes per float array element.
    pub float_bytes: u64,
    /// Bytes per stored weight.
    pub weight_bytes: u64,
}

impl Default for RamCosts {
    fn default() -> Self {
        RamCosts { variables: 20, serial_port: 178, math: 200, float_bytes: 4, weight_bytes: 2 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    /// Streaming reservoir, `W` never stored.
    Alg1,
    /// Materialized `W`.
    Alg2,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RamItem {
    pub name: &'static str,
    pub bytes: u64,
    /// Counted by Algorithm 2 only.
    pub materialized_only: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RamBreakdown {
    pub arch: Architecture,
    pub items: Vec<RamItem>,
    pub alg1: u64,
    pub alg2: u64,
    pub saving: u64,
}

impl RamBreakdown {
    pub fn total(&self, alg: Algorithm) -> u64 {
        match alg {
            Algorithm::Alg1 => self.alg1,
            Algorithm::Alg2 => self.alg2,
        }
    }

    /// One summary row: architecture, Alg1, Alg2, saving.
    pub fn table_row(&self) -> String {
        format!("{:<14} {:>10} {:>10} {:>10}", self.arch.to_string(), self.alg1, self.alg2, self.saving)
    }

    /// Per-item listing with both totals.
    pub fn listing(&self) -> String {
        let mut out = String::new();
        for item in &self.items {
            let tag = if item.materialized_only { " (Alg2 only)" } else { "" };
            let _ = writeln!(out, "  {:<22} {:>8} B{tag}", item.name, item.bytes);
        }
        let _ = writeln!(out, "  {:<22} {:>8} B", "total Alg1", self.alg1);
        let _ = writeln!(out, "  {:<22} {:>8} B", "total Alg2", self.alg2);
        out
    }
}

/// Header matching [`RamBreakdown::table_row`].
pub fn table_header() -> String {
    format!("{:<14} {:>10} {:>10} {:>10}", "Model", "Alg1, B", "Alg2, B", "Saving, B")
}

pub fn estimate(arch: Architecture) -> RamBreakdown {
    estimate_with(arch, &RamCosts::default())
}

pub fn estimate_with(arch: Architecture, c: &RamCosts) -> RamBreakdown {
    let (n, p, h, m) = (arch.inputs as u64, arch.reservoir as u64, arch.hidden as u64, arch.classes as u64);
    let f = c.float_bytes;
    let item = |name, bytes, materialized_only| RamItem { name, bytes, materialized_only };
    let items = vec![
        item("array Y", (n + 1) * f, false),
        item("matrix W", (n + 1) * p * f, true),
        item("weights S_h -> S_h2", (p + 1) * h * c.weight_bytes, false),
        item("weights S_h2 -> S_out", (h + 1) * m * c.weight_bytes, false),
        item("array S_h", (p + 1) * f, false),
        item("array S_h2", (h + 1) * f, false),
        item("array S_out", m * f, false),
        item("auxiliary arrays", p * 3 * 2, false),
        item("variables", c.variables, false),
        item("serial port", c.serial_port, false),
        item("math scratch", c.math, false),
    ];
    let alg1 = items.iter().filter(|i| !i.materialized_only).map(|i| i.bytes).sum();
    let alg2: u64 = items.iter().map(|i| i.bytes).sum();
    RamBreakdown { arch, items, alg1, alg2, saving: alg2 - alg1 }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fit {
    pub algorithm: Algorithm,
    pub limit: u64,
    pub total: u64,
    pub fits: bool,
    /// `limit - total`; negative when over budget.
    pub headroom: i64,
}

pub fn fits(arch: Architecture, limit: u64, alg: Algorithm) -> Result<Fit> {
    fits_with(arch, limit, alg, &RamCosts::default())
}

pub fn fits_with(arch: Architecture, limit: u64, alg: Algorithm, c: &RamCosts) -> Result<Fit> {
    if limit == 0 {
        return Err(Error::Config("RAM limit must be positive".into()));
    }
    let total = estimate_with(arch, c).total(alg);
    Ok(Fit { algorithm: alg, limit, total, fits: total <= limit, headroom: limit as i64 - total as i64 })
}
