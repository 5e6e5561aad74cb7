//! Stackelberg pricing mechanisms: the closed-form complete-information
//! equilibrium and the fixed-point asymmetric-information equilibrium, plus
//! realized/expected outcome evaluation.
//!
//! In both regimes the DAP (leader) posts a price per unit received power and
//! each EAP (follower) responds with q = θλ/2. Under complete information the
//! leader adapts the price to the realized types; under asymmetric
//! information it fixes one price against the type-count distribution. The
//! price is common to all EAPs: per-EAP prices are exchangeable when types
//! are iid, so the unconstrained multi-price optimum is symmetric.

use crate::combinatorics::{enumerate_compositions, EnumerationError, KahanSum};
use crate::model::{self, Market, ModelError};
use crate::solver::{self, SolverError};
use thiserror::Error;

use std::f64::consts::LOG2_E;

#[derive(Debug, Error)]
pub enum StackelbergError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Enumeration(#[from] EnumerationError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("at least one realized EAP type is required")]
    NoRealizedTypes,
}

/// A solved pricing scheme.
///
/// For [`solve_complete`] the vectors are per EAP and the scalars are the
/// realized utility/welfare; for [`solve_complete_by_counts`] and
/// [`solve_asymmetric`] the vectors are per type. [`solve_asymmetric`]
/// reports *expected* utility and welfare over the type-count distribution.
#[derive(Debug, Clone)]
pub struct StackelbergOutcome {
    /// Equilibrium price per unit received power; common to all EAPs.
    pub lambda_star: f64,
    /// Best responses q = θλ*/2, mW.
    pub q_star: Vec<f64>,
    /// DAP utility (realized or expected, see above).
    pub dap_utility: f64,
    /// Follower utilities λ*²θ/4, one per entry of `q_star`.
    pub eap_utilities: Vec<f64>,
    /// Social welfare (realized or expected).
    pub welfare: f64,
}

/// Follower best response to price λ: q = θλ/2.
pub fn best_response(lambda: f64, theta: f64) -> Result<f64, ModelError> {
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(ModelError::NonPositive {
            name: "theta",
            value: theta,
        });
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(ModelError::Negative {
            name: "lambda",
            value: lambda,
        });
    }
    Ok(theta * lambda / 2.0)
}

/// Closed-form complete-information price for a realized type mass Θ = Σθ:
/// λ* = (√(log₂(e)·γ²·W·Θ + 1) − 1)/(γΘ), evaluated in the cancellation-free
/// form λ* = log₂(e)·γ·W / (√(log₂(e)·γ²·W·Θ + 1) + 1).
fn complete_price(theta_sum: f64, gamma: f64, bandwidth_w: f64) -> f64 {
    let x = LOG2_E * gamma * gamma * bandwidth_w * theta_sum;
    LOG2_E * gamma * bandwidth_w / ((x + 1.0).sqrt() + 1.0)
}

/// Solves the complete-information game for N realized EAP types.
pub fn solve_complete(
    realized_thetas: &[f64],
    market: &Market,
) -> Result<StackelbergOutcome, StackelbergError> {
    if realized_thetas.is_empty() {
        return Err(StackelbergError::NoRealizedTypes);
    }
    for &theta in realized_thetas {
        if !(theta > 0.0) || !theta.is_finite() {
            return Err(StackelbergError::Model(ModelError::NonPositive {
                name: "theta",
                value: theta,
            }));
        }
    }
    let gamma = market.gamma();
    let w = market.bandwidth();
    let theta_sum: f64 = realized_thetas.iter().sum();
    let lambda = complete_price(theta_sum, gamma, w);
    let q_star: Vec<f64> = realized_thetas.iter().map(|&t| t * lambda / 2.0).collect();
    let total_q: f64 = q_star.iter().sum();
    let rate = w * (1.0 + gamma * total_q).log2();
    let eap_utilities: Vec<f64> = realized_thetas
        .iter()
        .map(|&t| lambda * lambda * t / 4.0)
        .collect();
    Ok(StackelbergOutcome {
        lambda_star: lambda,
        dap_utility: rate - lambda * total_q,
        welfare: rate - lambda * lambda * theta_sum / 4.0,
        q_star,
        eap_utilities,
    })
}

/// Complete-information solve for a realized type-count vector; the outcome
/// is per type (length K).
pub fn solve_complete_by_counts(
    counts: &[u32],
    market: &Market,
) -> Result<StackelbergOutcome, StackelbergError> {
    let k = market.num_types();
    if counts.len() != k {
        return Err(StackelbergError::Model(ModelError::LengthMismatch {
            what: "counts",
            expected: k,
            actual: counts.len(),
        }));
    }
    if counts.iter().all(|&c| c == 0) {
        return Err(StackelbergError::NoRealizedTypes);
    }
    let gamma = market.gamma();
    let w = market.bandwidth();
    let theta_sum: f64 = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| c as f64 * market.theta(i))
        .sum();
    let lambda = complete_price(theta_sum, gamma, w);
    let q_star: Vec<f64> = (0..k).map(|i| market.theta(i) * lambda / 2.0).collect();
    let total_q = lambda * theta_sum / 2.0;
    let rate = w * (1.0 + gamma * total_q).log2();
    let eap_utilities: Vec<f64> = (0..k)
        .map(|i| lambda * lambda * market.theta(i) / 4.0)
        .collect();
    Ok(StackelbergOutcome {
        lambda_star: lambda,
        dap_utility: rate - lambda * total_q,
        welfare: rate - lambda * lambda * theta_sum / 4.0,
        q_star,
        eap_utilities,
    })
}

/// Per-composition weights for the asymmetric-information objective: the
/// probability Φ and the realized type mass s = Σ n_k θ_k of each composition.
struct TypeMassTable {
    probs: Vec<f64>,
    masses: Vec<f64>,
    mean_mass: f64,
}

impl TypeMassTable {
    fn new(market: &Market) -> Result<Self, EnumerationError> {
        let k = market.num_types();
        let n = market.n_eaps() as u32;
        let mut probs = Vec::new();
        let mut masses = Vec::new();
        let mut mean = KahanSum::default();
        for comp in enumerate_compositions(n, k)? {
            let s: f64 = comp
                .counts()
                .iter()
                .enumerate()
                .map(|(i, &c)| c as f64 * market.theta(i))
                .sum();
            mean.add(comp.prob() * s);
            probs.push(comp.prob());
            masses.push(s);
        }
        Ok(Self {
            probs,
            masses,
            mean_mass: mean.value(),
        })
    }

    /// E[s/(2+γλs)] / E[s]: the mass-weighted mean of 1/(2+γλs). Equals ½ at
    /// λ = 0 and decreases in λ, which gives the bisection bracket.
    fn weighted_omega(&self, lambda: f64, gamma: f64) -> f64 {
        let mut sum = KahanSum::default();
        for (&p, &s) in self.probs.iter().zip(&self.masses) {
            sum.add(p * s / (2.0 + gamma * lambda * s));
        }
        sum.value() / self.mean_mass
    }

    /// Expected DAP utility at a common price λ:
    /// E[W·log₂(1+γλs/2)] − (λ²/2)·E[s].
    fn expected_dap_utility(&self, lambda: f64, gamma: f64, w: f64) -> f64 {
        let mut rate = KahanSum::default();
        for (&p, &s) in self.probs.iter().zip(&self.masses) {
            rate.add(p * w * (1.0 + 0.5 * gamma * lambda * s).log2());
        }
        rate.value() - 0.5 * lambda * lambda * self.mean_mass
    }

    /// Expected social welfare at a common price λ:
    /// E[W·log₂(1+γλs/2)] − (λ²/4)·E[s].
    fn expected_welfare(&self, lambda: f64, gamma: f64, w: f64) -> f64 {
        let mut rate = KahanSum::default();
        for (&p, &s) in self.probs.iter().zip(&self.masses) {
            rate.add(p * w * (1.0 + 0.5 * gamma * lambda * s).log2());
        }
        rate.value() - 0.25 * lambda * lambda * self.mean_mass
    }
}

/// Solves the asymmetric-information game: the single price maximizing the
/// DAP's expected utility over the type-count distribution.
///
/// The stationarity condition is the scalar fixed point
/// λ = W·log₂(e)·γ·E[s/(2+γλs)]/E[s] with s = Σ n_k θ_k, solved by bisection
/// on (0, W·log₂(e)·γ/2]. Returns per-type best responses q_k = θ_k λ*/2 and
/// the expected DAP utility and welfare.
pub fn solve_asymmetric(market: &Market) -> Result<StackelbergOutcome, StackelbergError> {
    let table = TypeMassTable::new(market)?;
    let gamma = market.gamma();
    let w = market.bandwidth();
    let scale = w * LOG2_E * gamma;
    let residual = |lambda: f64| lambda - scale * table.weighted_omega(lambda, gamma);
    let hi = 0.5 * scale;
    let lambda = solver::bisect_root(residual, 0.0, hi, hi * 1e-14)?;

    let k = market.num_types();
    let q_star: Vec<f64> = (0..k).map(|i| market.theta(i) * lambda / 2.0).collect();
    let eap_utilities: Vec<f64> = (0..k)
        .map(|i| lambda * lambda * market.theta(i) / 4.0)
        .collect();
    Ok(StackelbergOutcome {
        lambda_star: lambda,
        dap_utility: table.expected_dap_utility(lambda, gamma, w),
        welfare: table.expected_welfare(lambda, gamma, w),
        q_star,
        eap_utilities,
    })
}

/// Realized (not expected) DAP utility and social welfare of a per-type
/// outcome under one realized count vector. Used to replay a
/// distribution-fitted price on individual draws.
pub fn evaluate_realization(
    outcome: &StackelbergOutcome,
    counts: &[u32],
    market: &Market,
) -> Result<(f64, f64), StackelbergError> {
    let k = market.num_types();
    if outcome.q_star.len() != k {
        return Err(StackelbergError::Model(ModelError::LengthMismatch {
            what: "outcome.q_star",
            expected: k,
            actual: outcome.q_star.len(),
        }));
    }
    if counts.len() != k {
        return Err(StackelbergError::Model(ModelError::LengthMismatch {
            what: "counts",
            expected: k,
            actual: counts.len(),
        }));
    }
    let total_q: f64 = counts
        .iter()
        .zip(&outcome.q_star)
        .map(|(&c, &q)| c as f64 * q)
        .sum();
    let rate = market.bandwidth() * (1.0 + market.gamma() * total_q).log2();
    let dap = rate - outcome.lambda_star * total_q;
    let welfare = model::social_welfare(counts, &outcome.q_star, market)?;
    Ok((dap, welfare))
}

/// The expected leader objective as a function of a per-type price vector:
/// E[W·log₂(1 + (γ/2)·Σ n_k θ_k λ_k) − ½·Σ n_k θ_k λ_k²].
///
/// [`solve_asymmetric`] only ever needs its restriction to equal prices, but
/// the full vector form is exposed for gradient audits and oracle tests.
pub struct ExpectedLeaderObjective {
    counts: Vec<f64>, // flattened, K per composition
    probs: Vec<f64>,
    thetas: Vec<f64>,
    gamma: f64,
    bandwidth_w: f64,
}

impl ExpectedLeaderObjective {
    pub fn new(market: &Market) -> Result<Self, EnumerationError> {
        let k = market.num_types();
        let n = market.n_eaps() as u32;
        let mut counts = Vec::new();
        let mut probs = Vec::new();
        for comp in enumerate_compositions(n, k)? {
            counts.extend(comp.counts().iter().map(|&c| c as f64));
            probs.push(comp.prob());
        }
        Ok(Self {
            counts,
            probs,
            thetas: market.thetas(),
            gamma: market.gamma(),
            bandwidth_w: market.bandwidth(),
        })
    }

    pub fn dim(&self) -> usize {
        self.thetas.len()
    }

    pub fn value(&self, lambdas: &[f64]) -> f64 {
        let k = self.thetas.len();
        let mut total = KahanSum::default();
        for (ci, &p) in self.probs.iter().enumerate() {
            let row = &self.counts[ci * k..(ci + 1) * k];
            let mut mass = 0.0;
            let mut quad = 0.0;
            for i in 0..k {
                let nt = row[i] * self.thetas[i];
                mass += nt * lambdas[i];
                quad += nt * lambdas[i] * lambdas[i];
            }
            total.add(p * (self.bandwidth_w * (1.0 + 0.5 * self.gamma * mass).log2() - 0.5 * quad));
        }
        total.value()
    }

    pub fn gradient(&self, lambdas: &[f64]) -> Vec<f64> {
        let k = self.thetas.len();
        let mut grad = vec![KahanSum::default(); k];
        for (ci, &p) in self.probs.iter().enumerate() {
            let row = &self.counts[ci * k..(ci + 1) * k];
            let mut mass = 0.0;
            for i in 0..k {
                mass += row[i] * self.thetas[i] * lambdas[i];
            }
            let rate_slope = self.bandwidth_w * LOG2_E * self.gamma / (2.0 + self.gamma * mass);
            for i in 0..k {
                let nt = row[i] * self.thetas[i];
                grad[i].add(p * nt * (rate_slope - lambdas[i]));
            }
        }
        grad.into_iter().map(|s| s.value()).collect()
    }
}

/// The complete-information leader objective after substituting the follower
/// best responses, as a function of per-EAP prices:
/// W·log₂(1 + (γ/2)·Σ θ_m λ_m) − ½·Σ θ_m λ_m².
pub struct CompleteLeaderObjective {
    thetas: Vec<f64>,
    gamma: f64,
    bandwidth_w: f64,
}

impl CompleteLeaderObjective {
    pub fn new(realized_thetas: &[f64], gamma: f64, bandwidth_w: f64) -> Self {
        Self {
            thetas: realized_thetas.to_vec(),
            gamma,
            bandwidth_w,
        }
    }

    pub fn dim(&self) -> usize {
        self.thetas.len()
    }

    pub fn value(&self, lambdas: &[f64]) -> f64 {
        let mut mass = 0.0;
        let mut quad = 0.0;
        for (i, &t) in self.thetas.iter().enumerate() {
            mass += t * lambdas[i];
            quad += t * lambdas[i] * lambdas[i];
        }
        self.bandwidth_w * (1.0 + 0.5 * self.gamma * mass).log2() - 0.5 * quad
    }

    pub fn gradient(&self, lambdas: &[f64]) -> Vec<f64> {
        let mut mass = 0.0;
        for (i, &t) in self.thetas.iter().enumerate() {
            mass += t * lambdas[i];
        }
        let rate_slope = self.bandwidth_w * LOG2_E * self.gamma / (2.0 + self.gamma * mass);
        self.thetas
            .iter()
            .enumerate()
            .map(|(i, &t)| t * (rate_slope - lambdas[i]))
            .collect()
    }
}
