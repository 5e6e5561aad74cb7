//! Benchmark fixtures: representative markets at the sizes the harness runs.

use rfmarket_core::model::{EapType, Market, PhysicalParams};

/// Strictly ascending geometric type ladder normalized to max 1.
pub fn ladder_thetas(k: usize) -> Vec<f64> {
    let ratio: f64 = 1.6;
    (0..k)
        .map(|i| ratio.powi(i as i32 - (k as i32 - 1)))
        .collect()
}

pub fn market(n_eaps: usize, k: usize, gamma: f64) -> Market {
    let types = ladder_thetas(k)
        .into_iter()
        .map(|t| EapType::new(t).unwrap())
        .collect();
    let params = PhysicalParams::new(0.5, 1.0, 1e-8, 1e-6, 1.0).unwrap();
    Market::new(n_eaps, types, gamma, params).unwrap()
}
