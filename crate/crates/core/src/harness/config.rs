//! Scenario configuration: a JSON file mirroring [`ScenarioConfig`] field
//! names exactly; unknown keys are rejected.

use serde::Deserialize;
use std::path::Path;

use super::HarnessError;

/// Monte Carlo draw count used when the config does not specify one.
pub const DEFAULT_MC_DRAWS: usize = 10_000;

fn default_bandwidth() -> f64 {
    1.0
}

fn default_mc_draws() -> usize {
    DEFAULT_MC_DRAWS
}

/// Full description of one market scenario.
///
/// Exactly one of `gamma`/`physical` and exactly one of `type_gen`/`types`
/// must be supplied.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Number of EAPs in the market (N).
    pub n_eaps: usize,
    /// Number of market types (K).
    pub n_types: usize,
    /// Direct composite SNR coefficient γ.
    #[serde(default)]
    pub gamma: Option<f64>,
    /// Physical alternative to a direct γ.
    #[serde(default)]
    pub physical: Option<PhysicalBlock>,
    /// Random type generation from physical ranges.
    #[serde(default)]
    pub type_gen: Option<TypeGen>,
    /// Explicit strictly ascending type list.
    #[serde(default)]
    pub types: Option<Vec<f64>>,
    /// Channel bandwidth; defaults to 1 (throughput in Mbps units).
    #[serde(default = "default_bandwidth")]
    pub bandwidth_w: f64,
    /// Monte Carlo sample count.
    #[serde(default = "default_mc_draws")]
    pub mc_draws: usize,
    /// Seed for market generation and the counter-based Monte Carlo stream.
    pub seed: u64,
}

/// Physical derivation of γ = η·G_{a,s}/N₀ with the source-DAP distance
/// sampled from `d_as_range` under the path-loss model
/// G(d) = 10^(−attenuation_db/10)·d^(−α).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalBlock {
    pub eta: f64,
    pub noise_n0: f64,
    pub d_as_range: [f64; 2],
    #[serde(default = "default_attenuation_db")]
    pub attenuation_db: f64,
    #[serde(default = "default_path_loss_alpha")]
    pub path_loss_alpha: f64,
}

fn default_attenuation_db() -> f64 {
    30.0
}

fn default_path_loss_alpha() -> f64 {
    2.0
}

/// Sampling ranges for the per-EAP cost coefficient and EAP-sensor distance;
/// θ = G(d)²/a. Path-loss parameters come from the `physical` block when one
/// is present, otherwise the deployment defaults above.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TypeGen {
    pub a_range: [f64; 2],
    pub d_ms_range: [f64; 2],
    #[serde(default)]
    pub normalization: Normalization,
    /// Falls back to the scenario seed when absent.
    #[serde(default)]
    pub seed: Option<u64>,
}

/// How sampled types are scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// Rescale so the largest type is exactly 1.
    #[default]
    Unit,
    /// Keep physical units (θ ≈ 1e−10..1.6e−8 for the default ranges).
    Raw,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: ScenarioConfig =
            serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let err = |msg: String| Err(HarnessError::Config(msg));
        if self.n_eaps == 0 {
            return err("n_eaps must be at least 1".into());
        }
        if self.n_types == 0 {
            return err("n_types must be at least 1".into());
        }
        if self.mc_draws == 0 {
            return err("mc_draws must be at least 1".into());
        }
        if !(self.bandwidth_w > 0.0) {
            return err(format!(
                "bandwidth_w must be positive, got {}",
                self.bandwidth_w
            ));
        }
        match (&self.gamma, &self.physical) {
            (Some(g), None) => {
                if !(g.is_finite() && *g > 0.0) {
                    return err(format!("gamma must be positive, got {g}"));
                }
            }
            (None, Some(p)) => p.validate()?,
            (Some(_), Some(_)) => {
                return err("supply exactly one of gamma/physical, got both".into())
            }
            (None, None) => return err("supply exactly one of gamma/physical, got neither".into()),
        }
        match (&self.type_gen, &self.types) {
            (Some(t), None) => t.validate()?,
            (None, Some(list)) => {
                if list.len() != self.n_types {
                    return err(format!(
                        "types has {} entries but n_types is {}",
                        list.len(),
                        self.n_types
                    ));
                }
                for w in list.windows(2) {
                    if !(w[0] < w[1]) {
                        return err(format!(
                            "explicit types must be strictly ascending, got {} then {}",
                            w[0], w[1]
                        ));
                    }
                }
                if !(list[0] > 0.0 && list.iter().all(|v| v.is_finite())) {
                    return err("explicit types must be positive and finite".into());
                }
            }
            (Some(_), Some(_)) => {
                return err("supply exactly one of type_gen/types, got both".into())
            }
            (None, None) => return err("supply exactly one of type_gen/types, got neither".into()),
        }
        Ok(())
    }
}

fn check_range(name: &str, range: [f64; 2]) -> Result<(), HarnessError> {
    if !(range[0].is_finite() && range[1].is_finite() && range[0] > 0.0 && range[0] <= range[1]) {
        return Err(HarnessError::Config(format!(
            "{name} must be a positive range [lo, hi] with lo <= hi, got [{}, {}]",
            range[0], range[1]
        )));
    }
    Ok(())
}

impl PhysicalBlock {
    fn validate(&self) -> Result<(), HarnessError> {
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(HarnessError::Config(format!(
                "eta must lie in (0, 1), got {}",
                self.eta
            )));
        }
        if !(self.noise_n0 > 0.0) {
            return Err(HarnessError::Config(format!(
                "noise_n0 must be positive, got {}",
                self.noise_n0
            )));
        }
        if !(self.path_loss_alpha > 0.0) {
            return Err(HarnessError::Config(format!(
                "path_loss_alpha must be positive, got {}",
                self.path_loss_alpha
            )));
        }
        check_range("d_as_range", self.d_as_range)
    }

    /// Channel power gain at distance d.
    pub fn gain_at(&self, d: f64) -> f64 {
        10f64.powf(-self.attenuation_db / 10.0) * d.powf(-self.path_loss_alpha)
    }
}

impl TypeGen {
    fn validate(&self) -> Result<(), HarnessError> {
        check_range("a_range", self.a_range)?;
        check_range("d_ms_range", self.d_ms_range)
    }
}
