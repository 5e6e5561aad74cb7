//! The optimal contract menu under asymmetric information and the centralized
//! complete-information benchmark.
//!
//! The DAP publishes K energy-reward pairs, one per market type. Feasibility
//! means every type participates voluntarily (IR) and self-selects its own
//! item (IC). The K IR and K(K−1) IC constraints reduce to a binding chain:
//! the lowest type earns zero, and each reward equals the type's cost plus
//! the information rent accumulated from all lower types. Substituting the
//! chain into the DAP's expected utility leaves a concave problem in the
//! energies alone; the rewards are recovered afterwards.
//!
//! The reduction is only valid when the optimal energies are nondecreasing in
//! the type. That holds for regularly spaced types but *not* universally:
//! nearly-tied consecutive types invert the quadratic coefficients below, and
//! in that case [`solve_contract`] fails loudly rather than producing a menu
//! that is not incentive compatible (no ironing is attempted).

use crate::combinatorics::{enumerate_compositions, EnumerationError, KahanSum};
use crate::model::{eap_utility_contract, ContractItem, ContractMenu, Market, ModelError};
use crate::solver::{maximize_concave_nonneg, SolveOptions, SolveReport, SolverError};
use thiserror::Error;

use std::f64::consts::LOG2_E;

/// Absolute feasibility tolerance in currency units; solver residuals are
/// ≤ 1e−9, one order of slack on top.
pub const FEASIBILITY_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum ContractError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Enumeration(#[from] EnumerationError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("solver stopped after {iterations} iterations with KKT residual {residual:e}")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error(
        "optimal energies are not monotone (q[{index}] = {value} under q[{prev_index}] = {prev}); \
         the type spacing breaks the menu reduction, refusing to emit a non-IC menu"
    )]
    MonotonicityViolated {
        index: usize,
        value: f64,
        prev_index: usize,
        prev: f64,
    },
    #[error(
        "solved menu failed its feasibility audit (ir_ok={ir}, ic_ok={ic}, monotone_ok={mono})"
    )]
    Infeasible { ir: bool, ic: bool, mono: bool },
    #[error("thetas must be positive and strictly increasing")]
    ThetasNotAscending,
}

/// Outcome of auditing a menu against the full, unreduced constraint set.
#[derive(Debug, Clone)]
pub struct FeasibilityReport {
    /// Every type's own item yields utility ≥ −tol.
    pub ir_ok: bool,
    /// Type with the smallest participation margin.
    pub ir_worst_type: usize,
    pub ir_worst_margin: f64,
    /// Every type prefers its own item to every other, up to tol.
    pub ic_ok: bool,
    /// (type, alternative item) with the smallest self-selection margin.
    pub ic_worst_pair: (usize, usize),
    pub ic_worst_margin: f64,
    /// Rewards nondecreasing in the type.
    pub monotone_ok: bool,
    /// Tolerance the flags were computed at.
    pub tol: f64,
}

impl FeasibilityReport {
    pub fn feasible(&self) -> bool {
        self.ir_ok && self.ic_ok && self.monotone_ok
    }
}

/// A solved menu together with its expected performance.
#[derive(Debug, Clone)]
pub struct ContractSolution {
    pub menu: ContractMenu,
    pub expected_dap_utility: f64,
    pub expected_welfare: f64,
    pub solve: SolveReport,
    pub feasibility: FeasibilityReport,
}

/// Evaluates all K IR and K(K−1) IC inequalities explicitly (no reduction)
/// and reports the worst margins.
pub fn check_feasibility(
    menu: &ContractMenu,
    market: &Market,
    tol: f64,
) -> Result<FeasibilityReport, ContractError> {
    let k = market.num_types();
    if menu.len() != k {
        return Err(ContractError::Model(ModelError::LengthMismatch {
            what: "menu",
            expected: k,
            actual: menu.len(),
        }));
    }
    let own: Vec<f64> = (0..k)
        .map(|i| eap_utility_contract(menu.item(i), market.theta(i)))
        .collect::<Result<_, _>>()?;

    let mut ir_worst = (0usize, f64::INFINITY);
    for (i, &u) in own.iter().enumerate() {
        if u < ir_worst.1 {
            ir_worst = (i, u);
        }
    }

    let mut ic_worst = ((0usize, 0usize), f64::INFINITY);
    for i in 0..k {
        for j in 0..k {
            if i == j {
                continue;
            }
            let cross = eap_utility_contract(menu.item(j), market.theta(i))?;
            let margin = own[i] - cross;
            if margin < ic_worst.1 {
                ic_worst = ((i, j), margin);
            }
        }
    }
    // degenerate K = 1: no IC constraints exist
    if k == 1 {
        ic_worst = ((0, 0), f64::INFINITY);
    }

    let monotone_ok = (1..k).all(|i| menu.item(i).reward >= menu.item(i - 1).reward - tol);

    Ok(FeasibilityReport {
        ir_ok: ir_worst.1 >= -tol,
        ir_worst_type: ir_worst.0,
        ir_worst_margin: ir_worst.1,
        ic_ok: k == 1 || ic_worst.1 >= -tol,
        ic_worst_pair: ic_worst.0,
        ic_worst_margin: ic_worst.1,
        monotone_ok,
        tol,
    })
}

fn next_up_nonneg(x: f64) -> f64 {
    debug_assert!(x >= 0.0 && x.is_finite());
    f64::from_bits(x.to_bits() + 1)
}

/// Recovers the rewards of the binding chain for given energies:
/// π₁ = q₁²/θ₁ and π_k − q_k²/θ_k = π_{k−1} − q_{k−1}²/θ_k for k ≥ 2.
///
/// Each reward is nudged up by ulps if needed so the binding inequality also
/// holds under f64 evaluation of the utility expression itself; the optimal
/// menu ties adjacent items exactly, and without the nudge the discrete
/// self-selection argmax could flip on roundoff.
pub fn recover_rewards(q: &[f64], thetas: &[f64]) -> Result<Vec<f64>, ContractError> {
    if q.len() != thetas.len() || q.is_empty() {
        return Err(ContractError::Model(ModelError::LengthMismatch {
            what: "q",
            expected: thetas.len().max(1),
            actual: q.len(),
        }));
    }
    for w in thetas.windows(2) {
        if !(w[0] < w[1]) {
            return Err(ContractError::ThetasNotAscending);
        }
    }
    if !(thetas[0] > 0.0) {
        return Err(ContractError::ThetasNotAscending);
    }
    for &qi in q {
        if !(qi >= 0.0) || !qi.is_finite() {
            return Err(ContractError::Model(ModelError::Negative {
                name: "q",
                value: qi,
            }));
        }
    }

    let k = q.len();
    let mut rewards = Vec::with_capacity(k);
    rewards.push(q[0] * q[0] / thetas[0]);
    for i in 1..k {
        let prev = ContractItem {
            q: q[i - 1],
            reward: rewards[i - 1],
        };
        // utility type i gets from taking the item below; the own item must
        // match it, never undercut it, when evaluated with the same expression
        let floor = eap_utility_contract(prev, thetas[i])?;
        let mut reward = floor + q[i] * q[i] / thetas[i];
        for _ in 0..64 {
            let own = ContractItem { q: q[i], reward };
            if eap_utility_contract(own, thetas[i])? >= floor {
                break;
            }
            reward = next_up_nonneg(reward);
        }
        rewards.push(reward);
    }
    Ok(rewards)
}

/// Per-composition table shared by the two menu objectives: flattened count
/// vectors, their probabilities, and the expected count per type.
struct CompositionTable {
    counts: Vec<f64>, // K entries per composition
    probs: Vec<f64>,
    expected_counts: Vec<f64>,
}

impl CompositionTable {
    fn new(market: &Market) -> Result<Self, EnumerationError> {
        let k = market.num_types();
        let n = market.n_eaps() as u32;
        let mut counts = Vec::new();
        let mut probs = Vec::new();
        let mut expected = vec![KahanSum::default(); k];
        for comp in enumerate_compositions(n, k)? {
            for (i, &c) in comp.counts().iter().enumerate() {
                counts.push(c as f64);
                expected[i].add(comp.prob() * c as f64);
            }
            probs.push(comp.prob());
        }
        Ok(Self {
            counts,
            probs,
            expected_counts: expected.into_iter().map(|s| s.value()).collect(),
        })
    }

    fn k(&self) -> usize {
        self.expected_counts.len()
    }

    /// E[W·log₂(1 + γ·Σ n_k q_k)] over the compositions.
    fn expected_rate(&self, q: &[f64], gamma: f64, w: f64) -> f64 {
        let k = self.k();
        let mut rate = KahanSum::default();
        for (ci, &p) in self.probs.iter().enumerate() {
            let row = &self.counts[ci * k..(ci + 1) * k];
            let total: f64 = row.iter().zip(q).map(|(&n, &qi)| n * qi).sum();
            rate.add(p * w * (1.0 + gamma * total).log2());
        }
        rate.value()
    }

    /// Gradient of [`Self::expected_rate`].
    fn expected_rate_gradient(&self, q: &[f64], gamma: f64, w: f64) -> Vec<f64> {
        let k = self.k();
        let mut grad = vec![KahanSum::default(); k];
        for (ci, &p) in self.probs.iter().enumerate() {
            let row = &self.counts[ci * k..(ci + 1) * k];
            let total: f64 = row.iter().zip(q).map(|(&n, &qi)| n * qi).sum();
            let slope = p * w * LOG2_E * gamma / (1.0 + gamma * total);
            for i in 0..k {
                grad[i].add(slope * row[i]);
            }
        }
        grad.into_iter().map(|s| s.value()).collect()
    }
}

/// The reduced menu objective over energies q ≥ 0, with the binding-chain
/// rewards substituted out:
/// E[W·log₂(1+γΣn_k q_k)] − Σ_k E[S_k/θ_k − S_{k+1}/θ_{k+1}]·q_k²,
/// where S_k = Σ_{i≥k} n_i is the count of types at or above k.
pub struct ReducedObjective {
    table: CompositionTable,
    quad_coef: Vec<f64>,
    gamma: f64,
    bandwidth_w: f64,
}

impl ReducedObjective {
    pub fn new(market: &Market) -> Result<Self, ContractError> {
        let table = CompositionTable::new(market)?;
        let k = table.k();
        let thetas = market.thetas();
        let mut coef = vec![KahanSum::default(); k];
        for (ci, &p) in table.probs.iter().enumerate() {
            let row = &table.counts[ci * k..(ci + 1) * k];
            let mut suffix = 0.0; // S_{i+1}
            for i in (0..k).rev() {
                let s_next_term = if i + 1 < k {
                    suffix / thetas[i + 1]
                } else {
                    0.0
                };
                suffix += row[i];
                let c = suffix / thetas[i] - s_next_term;
                // ascending thetas and S_i >= S_{i+1} make every coefficient
                // nonnegative, which is what keeps the objective concave
                debug_assert!(c >= 0.0, "negative quadratic coefficient {c}");
                coef[i].add(p * c);
            }
        }
        Ok(Self {
            table,
            quad_coef: coef.into_iter().map(|s| s.value()).collect(),
            gamma: market.gamma(),
            bandwidth_w: market.bandwidth(),
        })
    }

    pub fn dim(&self) -> usize {
        self.table.k()
    }

    pub fn value(&self, q: &[f64]) -> f64 {
        let rate = self.table.expected_rate(q, self.gamma, self.bandwidth_w);
        let quad: f64 = self
            .quad_coef
            .iter()
            .zip(q)
            .map(|(&c, &qi)| c * qi * qi)
            .sum();
        rate - quad
    }

    pub fn gradient(&self, q: &[f64]) -> Vec<f64> {
        let mut grad = self
            .table
            .expected_rate_gradient(q, self.gamma, self.bandwidth_w);
        for (i, g) in grad.iter_mut().enumerate() {
            *g -= 2.0 * self.quad_coef[i] * q[i];
        }
        grad
    }
}

/// The centralized benchmark objective: expected social welfare
/// E[W·log₂(1+γΣn_k q_k)] − Σ_k E[n_k]·q_k²/θ_k over energies q ≥ 0.
pub struct WelfareObjective {
    table: CompositionTable,
    cost_coef: Vec<f64>, // E[n_k]/θ_k
    gamma: f64,
    bandwidth_w: f64,
}

impl WelfareObjective {
    pub fn new(market: &Market) -> Result<Self, ContractError> {
        let table = CompositionTable::new(market)?;
        let cost_coef = table
            .expected_counts
            .iter()
            .zip(market.thetas())
            .map(|(&e, t)| e / t)
            .collect();
        Ok(Self {
            table,
            cost_coef,
            gamma: market.gamma(),
            bandwidth_w: market.bandwidth(),
        })
    }

    pub fn dim(&self) -> usize {
        self.table.k()
    }

    pub fn value(&self, q: &[f64]) -> f64 {
        let rate = self.table.expected_rate(q, self.gamma, self.bandwidth_w);
        let cost: f64 = self
            .cost_coef
            .iter()
            .zip(q)
            .map(|(&c, &qi)| c * qi * qi)
            .sum();
        rate - cost
    }

    pub fn gradient(&self, q: &[f64]) -> Vec<f64> {
        let mut grad = self
            .table
            .expected_rate_gradient(q, self.gamma, self.bandwidth_w);
        for (i, g) in grad.iter_mut().enumerate() {
            *g -= 2.0 * self.cost_coef[i] * q[i];
        }
        grad
    }
}

fn solve_opts() -> SolveOptions {
    SolveOptions {
        // audit the analytic gradients whenever debug assertions are on
        fd_check: cfg!(debug_assertions),
        ..SolveOptions::default()
    }
}

fn run_solver(
    value: impl Fn(&[f64]) -> f64,
    gradient: impl Fn(&[f64]) -> Vec<f64>,
    dim: usize,
) -> Result<SolveReport, ContractError> {
    // interior start keeps the first iterate off the measure-zero KKT point
    // at the origin
    let x0 = vec![1e-3; dim];
    let report = maximize_concave_nonneg(&value, &gradient, &x0, &solve_opts())?;
    if !report.converged {
        return Err(ContractError::NonConvergence {
            iterations: report.iterations,
            residual: report.kkt_residual,
        });
    }
    Ok(report)
}

/// Solves for the optimal incentive-compatible menu under asymmetric
/// information.
pub fn solve_contract(market: &Market) -> Result<ContractSolution, ContractError> {
    let objective = ReducedObjective::new(market)?;
    let report = run_solver(
        |q| objective.value(q),
        |q| objective.gradient(q),
        objective.dim(),
    )?;
    let q = report.x_star.clone();

    // the reduction is sound only for nondecreasing energies; solver noise
    // sits at the residual scale, anything beyond that is a real inversion
    let k = q.len();
    let q_scale = q.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for i in 1..k {
        if q[i] < q[i - 1] - 1e-9 * q_scale {
            return Err(ContractError::MonotonicityViolated {
                index: i,
                value: q[i],
                prev_index: i - 1,
                prev: q[i - 1],
            });
        }
    }

    let thetas = market.thetas();
    let rewards = recover_rewards(&q, &thetas)?;
    let items: Vec<ContractItem> = q
        .iter()
        .zip(&rewards)
        .map(|(&q, &reward)| ContractItem { q, reward })
        .collect();
    let menu = ContractMenu::new(items)?;

    let feasibility = check_feasibility(&menu, market, FEASIBILITY_TOL)?;
    if !feasibility.feasible() {
        return Err(ContractError::Infeasible {
            ir: feasibility.ir_ok,
            ic: feasibility.ic_ok,
            mono: feasibility.monotone_ok,
        });
    }

    let rate = objective
        .table
        .expected_rate(&q, market.gamma(), market.bandwidth());
    let expected_payment: f64 = objective
        .table
        .expected_counts
        .iter()
        .zip(&rewards)
        .map(|(&e, &r)| e * r)
        .sum();
    let expected_dap_utility = rate - expected_payment;
    debug_assert!(
        (expected_dap_utility - report.objective).abs() <= 1e-9 * report.objective.abs().max(1.0),
        "reward substitution diverged from the reduced objective"
    );
    let expected_cost: f64 = objective
        .table
        .expected_counts
        .iter()
        .zip(&q)
        .zip(&thetas)
        .map(|((&e, &qi), &t)| e * qi * qi / t)
        .sum();
    let expected_welfare = rate - expected_cost;

    Ok(ContractSolution {
        menu,
        expected_dap_utility,
        expected_welfare,
        solve: report,
        feasibility,
    })
}

/// Solves the centralized complete-information benchmark: welfare-optimal
/// energies with rewards at exact cost (IR binds, IC is not enforced — the
/// principal observes types, so self-selection is moot).
pub fn solve_centralized(market: &Market) -> Result<ContractSolution, ContractError> {
    let objective = WelfareObjective::new(market)?;
    let report = run_solver(
        |q| objective.value(q),
        |q| objective.gradient(q),
        objective.dim(),
    )?;
    let q = report.x_star.clone();
    let thetas = market.thetas();
    let items: Vec<ContractItem> = q
        .iter()
        .zip(&thetas)
        .map(|(&q, &t)| ContractItem {
            q,
            reward: q * q / t,
        })
        .collect();
    let menu = ContractMenu::new(items)?;
    let feasibility = check_feasibility(&menu, market, FEASIBILITY_TOL)?;
    // transfers equal costs, so expected utility and welfare coincide
    Ok(ContractSolution {
        menu,
        expected_dap_utility: report.objective,
        expected_welfare: report.objective,
        solve: report,
        feasibility,
    })
}

/// Utility a type-θ EAP would get from each item of the menu, in menu order.
/// For a feasible menu the argmax (ties resolved upward, the truthful
/// convention) sits at the item designed for θ.
pub fn ic_profile(menu: &ContractMenu, theta: f64) -> Result<Vec<f64>, ModelError> {
    menu.items()
        .iter()
        .map(|&item| eap_utility_contract(item, theta))
        .collect()
}

/// Index of the utility-maximizing item with ties resolved to the highest
/// index.
pub fn profile_argmax(profile: &[f64]) -> usize {
    let mut best = 0;
    for (i, &u) in profile.iter().enumerate() {
        if u >= profile[best] {
            best = i;
        }
    }
    best
}
