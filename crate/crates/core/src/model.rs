//! Domain types and the utility/welfare/throughput functions shared by every
//! scheme.
//!
//! Quantities are dimensionless floating point with documented units: received
//! power in mW, bandwidth in Hz, rewards and prices in currency units. The
//! transmission block duration is normalized to one, so energy and power are
//! interchangeable.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("{name} must be nonnegative, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("{name} must be finite, got {value}")]
    NonFinite { name: &'static str, value: f64 },
    #[error("energy-harvesting efficiency must lie strictly in (0, 1), got {0}")]
    EtaOutOfRange(f64),
    #[error("types must be strictly increasing: types[{index}] = {value} does not exceed {prev}")]
    TypesNotAscending { index: usize, value: f64, prev: f64 },
    #[error("market needs at least one EAP")]
    NoEaps,
    #[error("market needs at least one type")]
    NoTypes,
    #[error("{what}: expected length {expected}, got {actual}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
}

fn require_positive(name: &'static str, value: f64) -> Result<f64, ModelError> {
    if !value.is_finite() {
        return Err(ModelError::NonFinite { name, value });
    }
    if value <= 0.0 {
        return Err(ModelError::NonPositive { name, value });
    }
    Ok(value)
}

fn require_nonnegative(name: &'static str, value: f64) -> Result<f64, ModelError> {
    if !value.is_finite() {
        return Err(ModelError::NonFinite { name, value });
    }
    if value < 0.0 {
        return Err(ModelError::Negative { name, value });
    }
    Ok(value)
}

/// Physical constants of the deployment.
///
/// `unit_cost_c` is the DAP's reward cost coefficient; every utility below is
/// written in the normalized form with c = 1 (validated here, applied nowhere),
/// which also makes the welfare identity of [`social_welfare`] exact.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalParams {
    /// Energy-harvesting efficiency η, dimensionless in (0, 1).
    pub eta: f64,
    /// Channel bandwidth W in Hz.
    pub bandwidth_w: f64,
    /// Noise power at the DAP in mW.
    pub noise_n0: f64,
    /// Channel power gain from the information source to the DAP.
    pub gain_das: f64,
    /// DAP reward cost coefficient, normalized to 1.
    pub unit_cost_c: f64,
}

impl PhysicalParams {
    pub fn new(
        eta: f64,
        bandwidth_w: f64,
        noise_n0: f64,
        gain_das: f64,
        unit_cost_c: f64,
    ) -> Result<Self, ModelError> {
        if !eta.is_finite() || eta <= 0.0 || eta >= 1.0 {
            return Err(ModelError::EtaOutOfRange(eta));
        }
        Ok(Self {
            eta,
            bandwidth_w: require_positive("bandwidth_w", bandwidth_w)?,
            noise_n0: require_positive("noise_n0", noise_n0)?,
            gain_das: require_positive("gain_das", gain_das)?,
            unit_cost_c: require_positive("unit_cost_c", unit_cost_c)?,
        })
    }

    /// Composite SNR coefficient γ = η·G_{a,s}/N₀ (per mW).
    pub fn gamma(&self) -> f64 {
        self.eta * self.gain_das / self.noise_n0
    }
}

impl Default for PhysicalParams {
    /// Deployment defaults: η = 0.5, W = 1 MHz, N₀ = 10⁻⁸ mW, source-DAP gain
    /// from the d⁻² path-loss model at 20 m with 30 dB attenuation at 1 m.
    fn default() -> Self {
        Self {
            eta: 0.5,
            bandwidth_w: 1.0e6,
            noise_n0: 1.0e-8,
            gain_das: 1.0e-3 * 20.0f64.powi(-2),
            unit_cost_c: 1.0,
        }
    }
}

/// Market type θ = G²/a of an EAP: channel gain squared over energy-cost
/// coefficient. Higher θ means cheaper received power at the sensor.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct EapType {
    theta: f64,
}

impl EapType {
    pub fn new(theta: f64) -> Result<Self, ModelError> {
        Ok(Self {
            theta: require_positive("theta", theta)?,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

/// Physical description of one EAP; its market type derives from it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EapPhysical {
    /// Energy-cost coefficient a > 0 (cost per mW²).
    pub cost_coeff_a: f64,
    /// Channel power gain from the EAP to the information source.
    pub gain_gms: f64,
}

impl EapPhysical {
    pub fn new(cost_coeff_a: f64, gain_gms: f64) -> Result<Self, ModelError> {
        Ok(Self {
            cost_coeff_a: require_positive("cost_coeff_a", cost_coeff_a)?,
            gain_gms: require_positive("gain_gms", gain_gms)?,
        })
    }

    /// θ = G²_{m,s}/a.
    pub fn eap_type(&self) -> EapType {
        EapType {
            theta: self.gain_gms * self.gain_gms / self.cost_coeff_a,
        }
    }

    /// Transmit power needed to deliver `q` mW at the sensor.
    pub fn transmit_power(&self, q: f64) -> f64 {
        q / self.gain_gms
    }
}

/// The DAP-side world model: N EAPs, an ordered type set of size K with a
/// uniform type distribution, and the physical constants.
#[derive(Debug, Clone, PartialEq)]
pub struct Market {
    n_eaps: usize,
    types: Vec<EapType>,
    gamma: f64,
    params: PhysicalParams,
}

impl Market {
    /// Builds a market with an explicitly supplied γ.
    pub fn new(
        n_eaps: usize,
        types: Vec<EapType>,
        gamma: f64,
        params: PhysicalParams,
    ) -> Result<Self, ModelError> {
        if n_eaps == 0 {
            return Err(ModelError::NoEaps);
        }
        if types.is_empty() {
            return Err(ModelError::NoTypes);
        }
        for i in 1..types.len() {
            if types[i].theta() <= types[i - 1].theta() {
                return Err(ModelError::TypesNotAscending {
                    index: i,
                    value: types[i].theta(),
                    prev: types[i - 1].theta(),
                });
            }
        }
        require_positive("gamma", gamma)?;
        Ok(Self {
            n_eaps,
            types,
            gamma,
            params,
        })
    }

    /// Builds a market deriving γ = η·G_{a,s}/N₀ from the physical parameters.
    pub fn from_params(
        n_eaps: usize,
        types: Vec<EapType>,
        params: PhysicalParams,
    ) -> Result<Self, ModelError> {
        let gamma = params.gamma();
        Self::new(n_eaps, types, gamma, params)
    }

    pub fn n_eaps(&self) -> usize {
        self.n_eaps
    }

    /// Number of types K.
    pub fn num_types(&self) -> usize {
        self.types.len()
    }

    pub fn types(&self) -> &[EapType] {
        &self.types
    }

    pub fn theta(&self, k: usize) -> f64 {
        self.types[k].theta()
    }

    pub fn thetas(&self) -> Vec<f64> {
        self.types.iter().map(|t| t.theta()).collect()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn bandwidth(&self) -> f64 {
        self.params.bandwidth_w
    }

    pub fn params(&self) -> &PhysicalParams {
        &self.params
    }
}

/// One energy-reward pair of a contract menu.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractItem {
    /// Received power at the sensor, mW.
    pub q: f64,
    /// Reward paid for delivering it, currency units.
    pub reward: f64,
}

/// A menu of K energy-reward pairs, one per market type.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractMenu {
    items: Vec<ContractItem>,
}

impl ContractMenu {
    pub fn new(items: Vec<ContractItem>) -> Result<Self, ModelError> {
        if items.is_empty() {
            return Err(ModelError::NoTypes);
        }
        for item in &items {
            require_nonnegative("q", item.q)?;
            require_nonnegative("reward", item.reward)?;
        }
        Ok(Self { items })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[ContractItem] {
        &self.items
    }

    pub fn item(&self, k: usize) -> ContractItem {
        self.items[k]
    }

    pub fn energies(&self) -> Vec<f64> {
        self.items.iter().map(|i| i.q).collect()
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.items.iter().map(|i| i.reward).collect()
    }
}

/// Per-type (or per-EAP) prices per unit received energy.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceVector {
    lambdas: Vec<f64>,
}

impl PriceVector {
    pub fn new(lambdas: Vec<f64>) -> Result<Self, ModelError> {
        for &l in &lambdas {
            require_nonnegative("lambda", l)?;
        }
        Ok(Self { lambdas })
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }
}

/// Achievable throughput W·log₂(1 + γ·Σq) in bits/s.
///
/// Strictly increasing and concave in `total_q`.
pub fn throughput(gamma: f64, total_q: f64, bandwidth_w: f64) -> Result<f64, ModelError> {
    require_positive("gamma", gamma)?;
    require_nonnegative("total_q", total_q)?;
    require_positive("bandwidth_w", bandwidth_w)?;
    Ok(bandwidth_w * (1.0 + gamma * total_q).log2())
}

/// Utility of an EAP of type θ accepting a contract item: reward − q²/θ.
pub fn eap_utility_contract(item: ContractItem, theta: f64) -> Result<f64, ModelError> {
    require_positive("theta", theta)?;
    Ok(item.reward - item.q * item.q / theta)
}

/// Utility of an EAP of type θ selling `q` at price λ: λq − q²/θ.
pub fn eap_utility_stackelberg(lambda: f64, q: f64, theta: f64) -> Result<f64, ModelError> {
    require_nonnegative("lambda", lambda)?;
    require_nonnegative("q", q)?;
    require_positive("theta", theta)?;
    Ok(lambda * q - q * q / theta)
}

/// Social welfare of a realized draw: throughput value minus total energy
/// cost, W·log₂(1+γΣN_k q_k) − ΣN_k q_k²/θ_k. Rewards are internal transfers
/// and cancel exactly.
pub fn social_welfare(counts: &[u32], q: &[f64], market: &Market) -> Result<f64, ModelError> {
    let k = market.num_types();
    check_len("counts", counts.len(), k)?;
    check_len("q", q.len(), k)?;
    let mut total_q = 0.0;
    let mut cost = 0.0;
    for i in 0..k {
        let n = counts[i] as f64;
        total_q += n * q[i];
        cost += n * q[i] * q[i] / market.theta(i);
    }
    Ok(market.bandwidth() * (1.0 + market.gamma() * total_q).log2() - cost)
}

/// DAP utility of a realized draw under a contract menu:
/// W·log₂(1+γΣN_k q_k) − ΣN_k π_k.
pub fn dap_utility_contract(
    counts: &[u32],
    menu: &ContractMenu,
    market: &Market,
) -> Result<f64, ModelError> {
    let k = market.num_types();
    check_len("counts", counts.len(), k)?;
    check_len("menu", menu.len(), k)?;
    let mut total_q = 0.0;
    let mut paid = 0.0;
    for i in 0..k {
        let n = counts[i] as f64;
        let item = menu.item(i);
        total_q += n * item.q;
        paid += n * item.reward;
    }
    Ok(market.bandwidth() * (1.0 + market.gamma() * total_q).log2() - paid)
}

fn check_len(what: &'static str, actual: usize, expected: usize) -> Result<(), ModelError> {
    if actual != expected {
        return Err(ModelError::LengthMismatch {
            what,
            expected,
            actual,
        });
    }
    Ok(())
}
