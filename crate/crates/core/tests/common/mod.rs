//! Shared scenario builders for the integration suites.

use rfmarket_core::contract::{self, ContractSolution};
use rfmarket_core::harness::{generate_market, Normalization, ScenarioConfig, TypeGen};
use rfmarket_core::model::Market;

/// Deployment-range config (a ∈ [0.1, 1], d ∈ [5, 10] m, unit-normalized
/// types) with a direct γ.
pub fn table1_cfg(n_eaps: usize, n_types: usize, gamma: f64, seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        n_eaps,
        n_types,
        gamma: Some(gamma),
        physical: None,
        type_gen: Some(TypeGen {
            a_range: [0.1, 1.0],
            d_ms_range: [5.0, 10.0],
            normalization: Normalization::Unit,
            seed: None,
        }),
        types: None,
        bandwidth_w: 1.0,
        mc_draws: 1,
        seed,
    }
}

/// First `want` seeds (scanning upward from `start`) whose sampled market
/// admits a solvable contract. Irregularly spaced type draws are rejected by
/// design (no ironing), so the suites run on the markets that do solve.
pub fn solvable_markets(
    n_eaps: usize,
    n_types: usize,
    gamma: f64,
    want: usize,
    start: u64,
) -> Vec<(u64, Market, ContractSolution)> {
    let mut found = Vec::new();
    let mut seed = start;
    while found.len() < want {
        let cfg = table1_cfg(n_eaps, n_types, gamma, seed);
        if let Ok(market) = generate_market(&cfg) {
            if let Ok(solution) = contract::solve_contract(&market) {
                found.push((seed, market, solution));
            }
        }
        seed += 1;
        assert!(
            seed < start + 10_000,
            "could not find {want} solvable markets from seed {start}"
        );
    }
    found
}
