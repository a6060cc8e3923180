//! Refinement studies: observed orders and text tables.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

/// Observed order `log(e_coarse / e_fine) / log(h_coarse / h_fine)`.
pub fn observed_order(e_coarse: f64, e_fine: f64, h_coarse: f64, h_fine: f64) -> f64 {
    (e_coarse / e_fine).ln() / (h_coarse / h_fine).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinementRow {
    pub n: usize,
    pub h: f64,
    pub value: f64,
    /// Order against the previous (coarser) row.
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementTable {
    pub label: String,
    pub rows: Vec<RefinementRow>,
}

impl RefinementTable {
    pub fn new(label: impl Into<String>) -> Self {
        Self { label: label.into(), rows: Vec::new() }
    }

    pub fn push(&mut self, n: usize, h: f64, value: f64) {
        let order = self.rows.last().map(|p| observed_order(p.value, value, p.h, h));
        self.rows.push(RefinementRow { n, h, value, order });
    }

    pub fn orders(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.order).collect()
    }

    pub fn last_order(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.order)
    }

    /// True when every observed order lies in `target +- tol`.
    pub fn orders_within(&self, target: f64, tol: f64) -> bool {
        let o = self.orders();
        !o.is_empty() && o.iter().all(|v| (v - target).abs() <= tol)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# {}", self.label);
        let _ = writeln!(s, "{:>6} {:>12} {:>14} {:>8}", "n", "h", "value", "order");
        for r in &self.rows {
            let order = r.order.map_or("-".to_string(), |o| format!("{o:.3}"));
            let _ = writeln!(s, "{:>6} {:>12.5e} {:>14.6e} {:>8}", r.n, r.h, r.value, order);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn second_order_sequence() {
        let mut t = RefinementTable::new("demo");
        for n in [32usize, 64, 128] {
            let h = 1.0 / (n - 1) as f64;
            t.push(n, h, 3.0 * h * h);
        }
        assert!(t.orders_within(2.0, 1e-12));
        assert!(t.render().contains("2.000"));
    }

    #[test]
    fn empty_table_has_no_orders() {
        assert!(!RefinementTable::new("x").orders_within(2.0, 1.0));
    }
}
