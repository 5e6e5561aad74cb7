//! Scenario generation, scheme comparison, parameter sweeps and CSV output.
//!
//! Everything here is deterministic under the config seed: market generation
//! and the Monte Carlo draws use a counter-based random stream (seed → key,
//! draw index → stream), and all floating point goes through fixed iteration
//! orders. Identical config and seed give byte-identical CSV.

mod config;

pub use config::{Normalization, PhysicalBlock, ScenarioConfig, TypeGen, DEFAULT_MC_DRAWS};

use crate::combinatorics::{composition_count, EnumerationError, KahanSum};
use crate::contract::{self, ContractError, ContractSolution};
use crate::model::{self, EapType, Market, ModelError, PhysicalParams};
use crate::stackelberg::{self, StackelbergError, StackelbergOutcome};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;
use thiserror::Error;

/// Compositions are summed exactly only up to this count; beyond it the
/// comparison falls back to Monte Carlo alone.
pub const EXACT_EXPECTATION_THRESHOLD: u128 = 100_000;

/// Random-stream indices: market generation draws on low streams, Monte Carlo
/// draw i uses stream `MC_STREAM_BASE + i`.
const STREAM_GAMMA: u64 = 0;
const STREAM_TYPES: u64 = 1;
const MC_STREAM_BASE: u64 = 1_000;

const TYPE_RESAMPLE_ATTEMPTS: usize = 64;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("scenario generation: {0}")]
    Generation(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Enumeration(#[from] EnumerationError),
    #[error(transparent)]
    Contract(#[from] ContractError),
    #[error(transparent)]
    Stackelberg(#[from] StackelbergError),
    #[error("self-selection audit failed: probe type {probe} peaks at item {argmax}")]
    IcPeakMismatch { probe: usize, argmax: usize },
}

/// The four mechanisms under comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Centralized,
    Contract,
    StackelbergComplete,
    StackelbergAsym,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [
        Scheme::Centralized,
        Scheme::Contract,
        Scheme::StackelbergComplete,
        Scheme::StackelbergAsym,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            Scheme::Centralized => "centralized",
            Scheme::Contract => "contract",
            Scheme::StackelbergComplete => "stackelberg-complete",
            Scheme::StackelbergAsym => "stackelberg-asym",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Scheme {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "centralized" => Ok(Scheme::Centralized),
            "contract" => Ok(Scheme::Contract),
            "stackelberg-complete" => Ok(Scheme::StackelbergComplete),
            "stackelberg-asym" => Ok(Scheme::StackelbergAsym),
            other => Err(HarnessError::Config(format!(
                "unknown scheme {other:?}; expected contract, stackelberg-complete, \
                 stackelberg-asym or centralized"
            ))),
        }
    }
}

/// Parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Gamma,
    NEaps,
}

impl SweepParam {
    pub fn id(&self) -> &'static str {
        match self {
            SweepParam::Gamma => "gamma",
            SweepParam::NEaps => "n",
        }
    }
}

impl FromStr for SweepParam {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gamma" => Ok(SweepParam::Gamma),
            "n" | "n_eaps" => Ok(SweepParam::NEaps),
            other => Err(HarnessError::Config(format!(
                "unknown sweep parameter {other:?}; expected gamma or n"
            ))),
        }
    }
}

/// Whether expected values are computed exactly over the composition set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExactPolicy {
    /// Exact when the composition count is at most
    /// [`EXACT_EXPECTATION_THRESHOLD`].
    #[default]
    Auto,
    Always,
    Never,
}

/// One scheme evaluated at one parameter point.
#[derive(Debug, Clone)]
pub struct ComparisonRow {
    pub scheme: Scheme,
    pub param: String,
    pub value: f64,
    /// Expected welfare from the exact composition sum, when computed.
    pub welfare_exact: Option<f64>,
    /// Monte Carlo estimate over the common draws.
    pub welfare_mc: Option<f64>,
    /// Expected welfare over the centralized benchmark's.
    pub normalized_welfare: Option<f64>,
    /// Expected DAP utility (exact when available, otherwise Monte Carlo).
    pub dap_utility: Option<f64>,
    /// λ* for the pricing schemes, a menu hash for the menu schemes.
    pub digest: String,
    /// Wall-clock solve+evaluation time. Not part of the CSV contract, which
    /// must be byte-deterministic.
    pub runtime_ms: f64,
    /// "ok" or the error that stopped this scheme.
    pub status: String,
}

/// One point of a self-selection profile.
#[derive(Debug, Clone)]
pub struct IcProfileRow {
    /// 1-based probe type index.
    pub probe_type: usize,
    /// 1-based menu item index.
    pub item: usize,
    pub utility: f64,
}

fn market_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Builds the market a config describes; deterministic under the seed.
pub fn generate_market(cfg: &ScenarioConfig) -> Result<Market, HarnessError> {
    cfg.validate()?;

    let (gamma, params) = match (&cfg.gamma, &cfg.physical) {
        (Some(g), None) => {
            let params = PhysicalParams {
                bandwidth_w: cfg.bandwidth_w,
                ..PhysicalParams::default()
            };
            (*g, params)
        }
        (None, Some(block)) => {
            let mut rng = market_rng(cfg.seed, STREAM_GAMMA);
            let d_as = rng.gen_range(block.d_as_range[0]..=block.d_as_range[1]);
            let params = PhysicalParams::new(
                block.eta,
                cfg.bandwidth_w,
                block.noise_n0,
                block.gain_at(d_as),
                1.0,
            )?;
            (params.gamma(), params)
        }
        _ => unreachable!("validated"),
    };

    let thetas: Vec<f64> = match (&cfg.type_gen, &cfg.types) {
        (None, Some(list)) => list.clone(),
        (Some(tg), None) => {
            let seed = tg.seed.unwrap_or(cfg.seed);
            let mut rng = market_rng(seed, STREAM_TYPES);
            // path-loss model shared with the physical block when present
            let gain = |d: f64| match &cfg.physical {
                Some(block) => block.gain_at(d),
                None => 1e-3 * d.powf(-2.0),
            };
            let mut result = None;
            for _ in 0..TYPE_RESAMPLE_ATTEMPTS {
                let mut sampled: Vec<f64> = (0..cfg.n_types)
                    .map(|_| {
                        let a = rng.gen_range(tg.a_range[0]..=tg.a_range[1]);
                        let d = rng.gen_range(tg.d_ms_range[0]..=tg.d_ms_range[1]);
                        let g = gain(d);
                        g * g / a
                    })
                    .collect();
                if tg.normalization == Normalization::Unit {
                    let max = sampled.iter().cloned().fold(f64::MIN, f64::max);
                    for v in &mut sampled {
                        *v /= max;
                    }
                }
                sampled.sort_by(|a, b| a.partial_cmp(b).unwrap());
                if sampled.windows(2).all(|w| w[0] < w[1]) {
                    result = Some(sampled);
                    break;
                }
            }
            result.ok_or_else(|| {
                HarnessError::Generation(format!(
                    "could not draw {} distinct types in {TYPE_RESAMPLE_ATTEMPTS} attempts",
                    cfg.n_types
                ))
            })?
        }
        _ => unreachable!("validated"),
    };

    let types: Vec<EapType> = thetas
        .into_iter()
        .map(EapType::new)
        .collect::<Result<_, _>>()?;
    Ok(Market::new(cfg.n_eaps, types, gamma, params)?)
}

/// Draws the type counts of Monte Carlo draw `index` (counter-based, so any
/// subset of draws can be reproduced independently).
pub fn draw_counts(seed: u64, index: u64, n_eaps: usize, n_types: usize) -> Vec<u32> {
    let mut rng = market_rng(seed, MC_STREAM_BASE + index);
    let mut counts = vec![0u32; n_types];
    for _ in 0..n_eaps {
        counts[rng.gen_range(0..n_types)] += 1;
    }
    counts
}

fn fnv1a_digest(values: impl IntoIterator<Item = f64>) -> String {
    let mut hash: u64 = 0xcbf29ce484222325;
    for v in values {
        for b in v.to_bits().to_le_bytes() {
            hash ^= b as u64;
            hash = hash.wrapping_mul(0x100000001b3);
        }
    }
    format!("{hash:016x}")
}

enum Solved {
    Menu(ContractSolution),
    Price(StackelbergOutcome),
    /// Re-solved per draw; holds the exact expected (welfare, dap) when
    /// computed.
    PerDraw(Option<(f64, f64)>),
}

struct SchemeRun {
    welfare_exact: Option<f64>,
    welfare_mc: f64,
    dap_exact: Option<f64>,
    dap_mc: f64,
    digest: String,
    runtime_ms: f64,
}

fn run_scheme(
    scheme: Scheme,
    market: &Market,
    draws: &[Vec<u32>],
    exact: bool,
) -> Result<SchemeRun, HarnessError> {
    let start = Instant::now();
    let solved = match scheme {
        Scheme::Contract => Solved::Menu(contract::solve_contract(market)?),
        Scheme::Centralized => Solved::Menu(contract::solve_centralized(market)?),
        Scheme::StackelbergAsym => Solved::Price(stackelberg::solve_asymmetric(market)?),
        Scheme::StackelbergComplete => {
            let expectation = if exact {
                let n = market.n_eaps() as u32;
                let k = market.num_types();
                let mut welfare = KahanSum::default();
                let mut dap = KahanSum::default();
                for comp in crate::combinatorics::enumerate_compositions(n, k)? {
                    let out = stackelberg::solve_complete_by_counts(comp.counts(), market)?;
                    welfare.add(comp.prob() * out.welfare);
                    dap.add(comp.prob() * out.dap_utility);
                }
                Some((welfare.value(), dap.value()))
            } else {
                None
            };
            Solved::PerDraw(expectation)
        }
    };

    let mut welfare_mc = KahanSum::default();
    let mut dap_mc = KahanSum::default();
    for counts in draws {
        let (dap, welfare) = match &solved {
            Solved::Menu(sol) => (
                model::dap_utility_contract(counts, &sol.menu, market)?,
                model::social_welfare(counts, &sol.menu.energies(), market)?,
            ),
            Solved::Price(out) => stackelberg::evaluate_realization(out, counts, market)?,
            Solved::PerDraw(_) => {
                let out = stackelberg::solve_complete_by_counts(counts, market)?;
                (out.dap_utility, out.welfare)
            }
        };
        welfare_mc.add(welfare);
        dap_mc.add(dap);
    }
    let n_draws = draws.len() as f64;

    let (welfare_exact, dap_exact, digest) = match &solved {
        Solved::Menu(sol) => (
            exact.then_some(sol.expected_welfare),
            exact.then_some(sol.expected_dap_utility),
            format!(
                "menu:{}",
                fnv1a_digest(
                    sol.menu
                        .items()
                        .iter()
                        .flat_map(|i| [i.q, i.reward])
                        .collect::<Vec<_>>()
                )
            ),
        ),
        Solved::Price(out) => (
            exact.then_some(out.welfare),
            exact.then_some(out.dap_utility),
            format!("lambda={:.11e}", out.lambda_star),
        ),
        Solved::PerDraw(expectation) => (
            expectation.map(|(w, _)| w),
            expectation.map(|(_, d)| d),
            "per-draw".to_string(),
        ),
    };

    Ok(SchemeRun {
        welfare_exact,
        welfare_mc: welfare_mc.value() / n_draws,
        dap_exact,
        dap_mc: dap_mc.value() / n_draws,
        digest,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

fn exact_enabled(market: &Market, policy: ExactPolicy) -> Result<bool, HarnessError> {
    Ok(match policy {
        ExactPolicy::Always => true,
        ExactPolicy::Never => false,
        ExactPolicy::Auto => {
            composition_count(market.n_eaps() as u32, market.num_types())?
                <= EXACT_EXPECTATION_THRESHOLD
        }
    })
}

/// Runs the requested schemes on the config's market, sharing one set of
/// Monte Carlo draws (common random numbers) across all of them.
///
/// Per-scheme failures are recorded in the row's `status` and do not abort
/// the other schemes.
pub fn run_comparison(
    cfg: &ScenarioConfig,
    schemes: &[Scheme],
    policy: ExactPolicy,
) -> Result<Vec<ComparisonRow>, HarnessError> {
    if schemes.is_empty() {
        return Err(HarnessError::Config("no schemes requested".into()));
    }
    let market = generate_market(cfg)?;
    run_comparison_on(cfg, &market, schemes, policy, "gamma", market.gamma())
}

/// Like [`run_comparison`] for a single scheme, but solver failures propagate
/// as typed errors instead of landing in the row status.
pub fn run_single(
    cfg: &ScenarioConfig,
    scheme: Scheme,
    policy: ExactPolicy,
) -> Result<ComparisonRow, HarnessError> {
    let market = generate_market(cfg)?;
    let exact = exact_enabled(&market, policy)?;
    let draws: Vec<Vec<u32>> = (0..cfg.mc_draws as u64)
        .map(|i| draw_counts(cfg.seed, i, market.n_eaps(), market.num_types()))
        .collect();
    let run = run_scheme(scheme, &market, &draws, exact)?;
    let bench_values = if scheme == Scheme::Centralized {
        Some((run.welfare_exact, run.welfare_mc))
    } else {
        run_scheme(Scheme::Centralized, &market, &draws, exact)
            .ok()
            .map(|r| (r.welfare_exact, r.welfare_mc))
    };
    Ok(assemble_row(
        scheme,
        "gamma",
        market.gamma(),
        run,
        bench_values,
    ))
}

fn run_comparison_on(
    cfg: &ScenarioConfig,
    market: &Market,
    schemes: &[Scheme],
    policy: ExactPolicy,
    param: &str,
    value: f64,
) -> Result<Vec<ComparisonRow>, HarnessError> {
    let exact = exact_enabled(market, policy)?;
    let draws: Vec<Vec<u32>> = (0..cfg.mc_draws as u64)
        .map(|i| draw_counts(cfg.seed, i, market.n_eaps(), market.num_types()))
        .collect();

    let runs: Vec<(Scheme, Result<SchemeRun, HarnessError>)> = schemes
        .iter()
        .map(|&s| (s, run_scheme(s, market, &draws, exact)))
        .collect();

    // benchmark for normalization; reuse the requested centralized run if any
    let benchmark: Option<SchemeRun> = match runs.iter().find(|(s, _)| *s == Scheme::Centralized) {
        Some((_, Ok(_))) | Some((_, Err(_))) => None, // taken from `runs` below
        None => run_scheme(Scheme::Centralized, market, &draws, exact).ok(),
    };
    let bench_values: Option<(Option<f64>, f64)> = runs
        .iter()
        .find(|(s, _)| *s == Scheme::Centralized)
        .and_then(|(_, r)| r.as_ref().ok().map(|r| (r.welfare_exact, r.welfare_mc)))
        .or_else(|| benchmark.as_ref().map(|r| (r.welfare_exact, r.welfare_mc)));

    let rows = runs
        .into_iter()
        .map(|(scheme, result)| match result {
            Ok(run) => assemble_row(scheme, param, value, run, bench_values),
            Err(err) => error_row(scheme, param, value, &err.to_string()),
        })
        .collect();
    Ok(rows)
}

fn assemble_row(
    scheme: Scheme,
    param: &str,
    value: f64,
    run: SchemeRun,
    bench_values: Option<(Option<f64>, f64)>,
) -> ComparisonRow {
    let normalized =
        bench_values.map(
            |(bench_exact, bench_mc)| match (run.welfare_exact, bench_exact) {
                (Some(w), Some(b)) => w / b,
                _ => run.welfare_mc / bench_mc,
            },
        );
    ComparisonRow {
        scheme,
        param: param.to_string(),
        value,
        welfare_exact: run.welfare_exact,
        welfare_mc: Some(run.welfare_mc),
        normalized_welfare: normalized,
        dap_utility: run.dap_exact.or(Some(run.dap_mc)),
        digest: run.digest,
        runtime_ms: run.runtime_ms,
        status: "ok".into(),
    }
}

/// Runs [`run_comparison`] at each value of the swept parameter, keeping the
/// seed (and therefore the Monte Carlo draws) common across points.
///
/// Per-value errors become error rows; the sweep continues.
pub fn sweep(
    cfg: &ScenarioConfig,
    param: SweepParam,
    values: &[f64],
    schemes: &[Scheme],
    policy: ExactPolicy,
) -> Result<Vec<ComparisonRow>, HarnessError> {
    if values.is_empty() {
        return Err(HarnessError::Config(
            "sweep needs at least one value".into(),
        ));
    }
    if schemes.is_empty() {
        return Err(HarnessError::Config("no schemes requested".into()));
    }
    let mut rows = Vec::new();
    for &value in values {
        let mut point_cfg = cfg.clone();
        let point_err = match param {
            SweepParam::Gamma => {
                if value.is_finite() && value > 0.0 {
                    point_cfg.gamma = Some(value);
                    point_cfg.physical = None;
                    None
                } else {
                    Some(format!("gamma value {value} must be positive"))
                }
            }
            SweepParam::NEaps => {
                if value.fract() == 0.0 && value >= 1.0 && value <= u32::MAX as f64 {
                    point_cfg.n_eaps = value as usize;
                    None
                } else {
                    Some(format!("n value {value} must be a positive integer"))
                }
            }
        };
        if let Some(msg) = point_err {
            for &scheme in schemes {
                rows.push(error_row(scheme, param.id(), value, &msg));
            }
            continue;
        }
        match generate_market(&point_cfg).and_then(|market| {
            run_comparison_on(&point_cfg, &market, schemes, policy, param.id(), value)
        }) {
            Ok(mut point_rows) => rows.append(&mut point_rows),
            Err(err) => {
                let msg = err.to_string();
                for &scheme in schemes {
                    rows.push(error_row(scheme, param.id(), value, &msg));
                }
            }
        }
    }
    Ok(rows)
}

fn error_row(scheme: Scheme, param: &str, value: f64, msg: &str) -> ComparisonRow {
    ComparisonRow {
        scheme,
        param: param.to_string(),
        value,
        welfare_exact: None,
        welfare_mc: None,
        normalized_welfare: None,
        dap_utility: None,
        digest: String::new(),
        runtime_ms: 0.0,
        status: format!("error: {msg}").replace(',', ";"),
    }
}

/// Solves the config's contract and tabulates every probe type's utility
/// across all menu items, asserting that each probe peaks at its own item.
/// Probe indices are 1-based.
pub fn emit_ic_profile(
    cfg: &ScenarioConfig,
    probes: &[usize],
) -> Result<(ContractSolution, Vec<IcProfileRow>), HarnessError> {
    let market = generate_market(cfg)?;
    let solution = contract::solve_contract(&market)?;
    let k = market.num_types();
    let mut rows = Vec::new();
    for &probe in probes {
        if probe == 0 || probe > k {
            return Err(HarnessError::Config(format!(
                "probe type {probe} out of range 1..={k}"
            )));
        }
        let theta = market.theta(probe - 1);
        let profile = contract::ic_profile(&solution.menu, theta)?;
        let argmax = contract::profile_argmax(&profile);
        if argmax != probe - 1 {
            return Err(HarnessError::IcPeakMismatch {
                probe,
                argmax: argmax + 1,
            });
        }
        for (j, &utility) in profile.iter().enumerate() {
            rows.push(IcProfileRow {
                probe_type: probe,
                item: j + 1,
                utility,
            });
        }
    }
    Ok((solution, rows))
}

/// Formats a float with 12 significant digits.
pub fn fmt_sig12(x: f64) -> String {
    format!("{x:.11e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_sig12).unwrap_or_default()
}

/// Renders comparison rows as CSV (LF line endings, 12-significant-digit
/// floats, empty cells for unavailable values).
pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::from(
        "scheme,param,value,welfare_exact,welfare_mc,normalized_welfare,dap_utility,digest,status\n",
    );
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            row.scheme,
            row.param,
            fmt_sig12(row.value),
            fmt_opt(row.welfare_exact),
            fmt_opt(row.welfare_mc),
            fmt_opt(row.normalized_welfare),
            fmt_opt(row.dap_utility),
            row.digest,
            row.status,
        ));
    }
    out
}

/// Renders self-selection profile rows as CSV.
pub fn ic_profile_csv(rows: &[IcProfileRow]) -> String {
    let mut out = String::from("probe_type,item,utility\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{}\n",
            row.probe_type,
            row.item,
            fmt_sig12(row.utility)
        ));
    }
    out
}

/// Draws N realized types (as θ values) for one Monte Carlo draw. Exposed for
/// tests that need the complete-information scheme on raw type lists.
pub fn draw_thetas(seed: u64, index: u64, market: &Market) -> Vec<f64> {
    draw_counts(seed, index, market.n_eaps(), market.num_types())
        .iter()
        .enumerate()
        .flat_map(|(k, &c)| std::iter::repeat_n(market.theta(k), c as usize))
        .collect()
}

/// Convenience used by tests: a market with explicit types and direct γ.
pub fn explicit_market(
    n_eaps: usize,
    thetas: &[f64],
    gamma: f64,
    bandwidth_w: f64,
    mc_draws: usize,
    seed: u64,
) -> (ScenarioConfig, Market) {
    let cfg = ScenarioConfig {
        n_eaps,
        n_types: thetas.len(),
        gamma: Some(gamma),
        physical: None,
        type_gen: None,
        types: Some(thetas.to_vec()),
        bandwidth_w,
        mc_draws,
        seed,
    };
    let market = generate_market(&cfg).expect("explicit market");
    (cfg, market)
}
