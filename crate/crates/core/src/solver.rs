//! Numerical kernels: concave maximization over the nonnegative orthant and
//! scalar root bracketing, with a built-in finite-difference gradient audit.
//!
//! Every scheme objective in this crate is smooth, concave and low-dimensional
//! (K ≤ ~10), so the maximizer is a projected gradient ascent with
//! Barzilai-Borwein step sizes and Armijo backtracking on the projection arc.
//! Robustness beats speed here.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("{what} returned a non-finite value")]
    NonFinite { what: &'static str },
    #[error("invalid bracket [{lo}, {hi}]: g(lo) = {g_lo}, g(hi) = {g_hi} have the same sign")]
    InvalidBracket {
        lo: f64,
        hi: f64,
        g_lo: f64,
        g_hi: f64,
    },
    #[error("gradient audit failed: finite differences deviate by {deviation:e}")]
    GradientAudit { deviation: f64 },
    #[error("{0}")]
    BadInput(&'static str),
}

/// Options for [`maximize_concave_nonneg`].
#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// First-order residual tolerance on the projected gradient.
    pub grad_tol: f64,
    /// Iteration cap; exhausting it yields `converged = false`, not an error.
    pub max_iters: usize,
    /// Audit the supplied gradient against central finite differences at the
    /// start point before iterating.
    pub fd_check: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            grad_tol: 1e-9,
            max_iters: 10_000,
            fd_check: false,
        }
    }
}

/// Outcome of a maximization run.
///
/// `kkt_residual` is max_i |min(x_i, −∂f/∂x_i)|: at a stationary point of the
/// bound-constrained problem each coordinate either sits at zero with a
/// nonpositive partial derivative or has a vanishing one.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub x_star: Vec<f64>,
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn kkt_residual(x: &[f64], grad: &[f64]) -> f64 {
    x.iter()
        .zip(grad)
        .map(|(&xi, &gi)| xi.min(-gi).abs())
        .fold(0.0, f64::max)
}

/// Maximizes a smooth concave `f` with gradient `grad` over x ≥ 0.
///
/// Non-convergence within `opts.max_iters` is reported, not raised; only
/// non-finite evaluations and a failed gradient audit are errors.
pub fn maximize_concave_nonneg<F, G>(
    f: F,
    grad: G,
    x0: &[f64],
    opts: &SolveOptions,
) -> Result<SolveReport, SolverError>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    if x0.is_empty() {
        return Err(SolverError::BadInput("empty start point"));
    }
    if !(opts.grad_tol > 0.0) || opts.max_iters == 0 {
        return Err(SolverError::BadInput("invalid solve options"));
    }

    let eval_f = |x: &[f64]| -> Result<f64, SolverError> {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(SolverError::NonFinite { what: "objective" })
        }
    };
    let eval_g = |x: &[f64]| -> Result<Vec<f64>, SolverError> {
        let g = grad(x);
        if g.len() != x.len() {
            return Err(SolverError::BadInput("gradient length mismatch"));
        }
        if g.iter().all(|v| v.is_finite()) {
            Ok(g)
        } else {
            Err(SolverError::NonFinite { what: "gradient" })
        }
    };

    let mut x: Vec<f64> = x0.iter().map(|&v| v.max(0.0)).collect();
    if opts.fd_check {
        let dev = check_gradient(&f, &grad, &x, 1e-6)?;
        if dev > 1e-4 {
            return Err(SolverError::GradientAudit { deviation: dev });
        }
    }

    let mut fx = eval_f(&x)?;
    let mut g = eval_g(&x)?;
    let g_scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut step = 1.0 / g_scale.max(1.0);
    let mut iterations = 0;
    let mut residual = kkt_residual(&x, &g);

    while residual > opts.grad_tol && iterations < opts.max_iters {
        // Armijo backtracking along the projection arc. Near the optimum the
        // true gain drops below the float resolution of f, so acceptance
        // allows for evaluation noise; convergence is judged on the gradient
        // residual, not on f.
        let noise = 1e-14 * (1.0 + fx.abs());
        let mut t = step;
        let mut accepted: Option<(Vec<f64>, f64)> = None;
        for _ in 0..80 {
            let cand: Vec<f64> = x
                .iter()
                .zip(&g)
                .map(|(&xi, &gi)| (xi + t * gi).max(0.0))
                .collect();
            if cand == x {
                break; // step below float resolution; nothing to gain
            }
            let fc = eval_f(&cand)?;
            let ascent: f64 = g
                .iter()
                .zip(cand.iter().zip(&x))
                .map(|(&gi, (&ci, &xi))| gi * (ci - xi))
                .sum();
            if fc >= fx + 1e-4 * ascent - noise {
                accepted = Some((cand, fc));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, fc)) = accepted else { break };

        let g_new = eval_g(&cand)?;
        // Barzilai-Borwein step from the accepted move
        let mut sts = 0.0;
        let mut sty = 0.0;
        for i in 0..x.len() {
            let s = cand[i] - x[i];
            sts += s * s;
            sty += s * (g[i] - g_new[i]);
        }
        step = if sty > 0.0 && sts > 0.0 {
            (sts / sty).clamp(1e-14, 1e14)
        } else {
            (t * 2.0).clamp(1e-14, 1e14)
        };

        x = cand;
        fx = fc;
        g = g_new;
        iterations += 1;
        residual = kkt_residual(&x, &g);
    }

    Ok(SolveReport {
        converged: residual <= opts.grad_tol,
        x_star: x,
        objective: fx,
        kkt_residual: residual,
        iterations,
    })
}

/// Bisects a continuous monotone `g` for its root on `[lo, hi]`.
///
/// Requires a sign change over the bracket; the returned point is the center
/// of a bracket of width ≤ `tol` (or the float-resolution limit).
pub fn bisect_root<G>(g: G, lo: f64, hi: f64, tol: f64) -> Result<f64, SolverError>
where
    G: Fn(f64) -> f64,
{
    if !(lo.is_finite() && hi.is_finite() && lo < hi) || !(tol >= 0.0) {
        return Err(SolverError::BadInput("invalid bracket or tolerance"));
    }
    let g_lo = g(lo);
    let g_hi = g(hi);
    if !(g_lo.is_finite() && g_hi.is_finite()) {
        return Err(SolverError::NonFinite {
            what: "bracket endpoint",
        });
    }
    if g_lo == 0.0 {
        return Ok(lo);
    }
    if g_hi == 0.0 {
        return Ok(hi);
    }
    if g_lo.signum() == g_hi.signum() {
        return Err(SolverError::InvalidBracket { lo, hi, g_lo, g_hi });
    }

    let (mut lo, mut hi) = (lo, hi);
    let sign_lo = g_lo.signum();
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break; // interval no longer splittable in f64
        }
        let g_mid = g(mid);
        if !g_mid.is_finite() {
            return Err(SolverError::NonFinite {
                what: "bisection midpoint",
            });
        }
        if g_mid == 0.0 {
            return Ok(mid);
        }
        if g_mid.signum() == sign_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Compares `grad` against central finite differences at `x` with base step
/// `h`, returning the largest relative deviation across coordinates.
pub fn check_gradient<F, G>(f: F, grad: G, x: &[f64], h: f64) -> Result<f64, SolverError>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    if !(h > 0.0) {
        return Err(SolverError::BadInput("step h must be positive"));
    }
    let g = grad(x);
    if g.len() != x.len() {
        return Err(SolverError::BadInput("gradient length mismatch"));
    }
    let mut worst = 0.0f64;
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let hi = h * x[i].abs().max(1.0);
        probe[i] = x[i] + hi;
        let f_plus = f(&probe);
        probe[i] = x[i] - hi;
        let f_minus = f(&probe);
        probe[i] = x[i];
        if !(f_plus.is_finite() && f_minus.is_finite() && g[i].is_finite()) {
            return Err(SolverError::NonFinite {
                what: "finite-difference probe",
            });
        }
        let fd = (f_plus - f_minus) / (2.0 * hi);
        let denom = g[i].abs().max(fd.abs()).max(1.0);
        worst = worst.max((fd - g[i]).abs() / denom);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn opts(tol: f64) -> SolveOptions {
        SolveOptions {
            grad_tol: tol,
            max_iters: 10_000,
            fd_check: true,
        }
    }

    #[test]
    fn unconstrained_quadratic_peak() {
        let f = |x: &[f64]| -(x[0] - 3.0) * (x[0] - 3.0);
        let g = |x: &[f64]| vec![-2.0 * (x[0] - 3.0)];
        let r = maximize_concave_nonneg(f, g, &[0.0], &opts(1e-9)).unwrap();
        assert!(r.converged);
        assert!((r.x_star[0] - 3.0).abs() < 1e-8, "x* = {}", r.x_star[0]);
        assert!(r.kkt_residual <= 1e-9);
    }

    #[test]
    fn active_bound_at_zero() {
        let f = |x: &[f64]| -(x[0] + 1.0) * (x[0] + 1.0);
        let g = |x: &[f64]| vec![-2.0 * (x[0] + 1.0)];
        let r = maximize_concave_nonneg(f, g, &[5.0], &opts(1e-9)).unwrap();
        assert!(r.converged);
        assert_eq!(r.x_star[0], 0.0);
    }

    #[test]
    fn mixed_active_set_in_three_dims() {
        // peak at (2, -1, 0.5) -> constrained optimum (2, 0, 0.5)
        let c = [2.0, -1.0, 0.5];
        let f = |x: &[f64]| {
            -x.iter()
                .zip(c)
                .map(|(xi, ci)| (xi - ci) * (xi - ci))
                .sum::<f64>()
        };
        let g = |x: &[f64]| x.iter().zip(c).map(|(xi, ci)| -2.0 * (xi - ci)).collect();
        let r = maximize_concave_nonneg(f, g, &[1e-3, 1e-3, 1e-3], &opts(1e-10)).unwrap();
        assert!(r.converged);
        assert!((r.x_star[0] - 2.0).abs() < 1e-9);
        assert_eq!(r.x_star[1], 0.0);
        assert!((r.x_star[2] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn log_quadratic_matches_interior_stationarity() {
        // shape of the scheme objectives: W log2(1 + a.x) - sum b_i x_i^2
        let a = [0.8, 1.7];
        let b = [0.6, 1.1];
        let f = move |x: &[f64]| {
            let s: f64 = 1.0 + a[0] * x[0] + a[1] * x[1];
            s.log2() - b[0] * x[0] * x[0] - b[1] * x[1] * x[1]
        };
        let g = move |x: &[f64]| {
            let s: f64 = 1.0 + a[0] * x[0] + a[1] * x[1];
            let c = std::f64::consts::LOG2_E / s;
            vec![a[0] * c - 2.0 * b[0] * x[0], a[1] * c - 2.0 * b[1] * x[1]]
        };
        let r = maximize_concave_nonneg(f, g, &[1e-3, 1e-3], &opts(1e-10)).unwrap();
        assert!(r.converged);
        for (i, &xi) in r.x_star.iter().enumerate() {
            assert!(xi > 0.0, "coordinate {i} unexpectedly pinned");
        }
        let gv = g(&r.x_star);
        assert!(gv.iter().all(|v| v.abs() <= 1e-9));
    }

    #[test]
    fn converged_reports_satisfy_kkt_scaling() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..50 {
            let dim = rng.gen_range(1..5usize);
            let c: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..3.0)).collect();
            let scale: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.2..4.0)).collect();
            let cf = c.clone();
            let sf = scale.clone();
            let f = move |x: &[f64]| {
                -x.iter()
                    .zip(&cf)
                    .zip(&sf)
                    .map(|((xi, ci), si)| si * (xi - ci) * (xi - ci))
                    .sum::<f64>()
            };
            let cg = c.clone();
            let sg = scale.clone();
            let g = move |x: &[f64]| {
                x.iter()
                    .zip(&cg)
                    .zip(&sg)
                    .map(|((xi, ci), si)| -2.0 * si * (xi - ci))
                    .collect::<Vec<_>>()
            };
            let x0 = vec![1e-3; dim];
            let r = maximize_concave_nonneg(&f, &g, &x0, &opts(1e-9)).unwrap();
            assert!(r.converged);
            let gv = g(&r.x_star);
            for (xi, gi) in r.x_star.iter().zip(&gv) {
                assert!(xi * gi.abs() <= 1e-9 * xi.abs().max(1.0));
                if *xi == 0.0 {
                    assert!(*gi <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn symmetric_objective_gives_symmetric_solution() {
        let f = |x: &[f64]| {
            let s: f64 = 1.0 + x.iter().sum::<f64>();
            s.log2() - x.iter().map(|v| v * v).sum::<f64>()
        };
        let g = |x: &[f64]| {
            let s: f64 = 1.0 + x.iter().sum::<f64>();
            let c = std::f64::consts::LOG2_E / s;
            x.iter().map(|v| c - 2.0 * v).collect::<Vec<_>>()
        };
        let r = maximize_concave_nonneg(f, g, &[1e-3, 1e-3, 1e-3], &opts(1e-10)).unwrap();
        assert!(r.converged);
        let spread = r.x_star.iter().cloned().fold(f64::MIN, f64::max)
            - r.x_star.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread <= 1e-8, "asymmetric solution {:?}", r.x_star);
    }

    #[test]
    fn solution_commutes_with_coordinate_permutation() {
        // solving under permuted coordinates permutes the solution
        let b = [0.4, 1.3, 2.6];
        let value = move |x: &[f64]| {
            let s: f64 = 1.0 + x.iter().sum::<f64>();
            s.log2() - x.iter().zip(b).map(|(v, bi)| bi * v * v).sum::<f64>()
        };
        let gradient = move |x: &[f64]| {
            let s: f64 = 1.0 + x.iter().sum::<f64>();
            let c = std::f64::consts::LOG2_E / s;
            x.iter()
                .zip(b)
                .map(|(v, bi)| c - 2.0 * bi * v)
                .collect::<Vec<_>>()
        };
        let perm = [2usize, 0, 1];
        let value_p = move |x: &[f64]| value(&[x[perm[0]], x[perm[1]], x[perm[2]]]);
        let gradient_p = move |x: &[f64]| {
            let g = gradient(&[x[perm[0]], x[perm[1]], x[perm[2]]]);
            let mut out = vec![0.0; 3];
            for (slot, &p) in perm.iter().enumerate() {
                out[p] = g[slot];
            }
            out
        };
        let tol = 1e-10;
        let base = maximize_concave_nonneg(&value, &gradient, &[1e-3; 3], &opts(tol)).unwrap();
        let permuted =
            maximize_concave_nonneg(&value_p, &gradient_p, &[1e-3; 3], &opts(tol)).unwrap();
        assert!(base.converged && permuted.converged);
        for (slot, &p) in perm.iter().enumerate() {
            assert!(
                (permuted.x_star[p] - base.x_star[slot]).abs() <= 10.0 * tol,
                "permutation broke the solution: {:?} vs {:?}",
                base.x_star,
                permuted.x_star
            );
        }
    }

    #[test]
    fn audit_catches_a_wrong_gradient() {
        let f = |x: &[f64]| -(x[0] - 1.0) * (x[0] - 1.0);
        let bad_g = |x: &[f64]| vec![-3.5 * (x[0] - 1.0) + 0.2];
        let err = maximize_concave_nonneg(f, bad_g, &[0.5], &opts(1e-9)).unwrap_err();
        assert!(matches!(err, SolverError::GradientAudit { .. }));
    }

    #[test]
    fn nonfinite_objective_is_an_error() {
        let f = |x: &[f64]| if x[0] > 0.5 { f64::NAN } else { x[0] };
        let g = |_: &[f64]| vec![1.0];
        let mut o = opts(1e-9);
        o.fd_check = false;
        assert!(matches!(
            maximize_concave_nonneg(f, g, &[0.4], &o),
            Err(SolverError::NonFinite { .. })
        ));
    }

    #[test]
    fn iteration_cap_reports_unconverged() {
        // one iteration cannot reach a 1e-15 residual on a log objective
        let f = |x: &[f64]| (1.0 + x[0]).log2() - x[0] * x[0];
        let g = |x: &[f64]| vec![std::f64::consts::LOG2_E / (1.0 + x[0]) - 2.0 * x[0]];
        let o = SolveOptions {
            grad_tol: 1e-15,
            max_iters: 1,
            fd_check: false,
        };
        let r = maximize_concave_nonneg(f, g, &[0.0], &o).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn bisect_known_roots() {
        let r = bisect_root(|x| x - 1.0, 0.0, 2.0, 1e-12).unwrap();
        assert!((r - 1.0).abs() < 1e-11);
        let r = bisect_root(|x| x * x - 2.0, 0.0, 2.0, 1e-13).unwrap();
        assert!((r - std::f64::consts::SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn bisect_is_deterministic_and_validates_bracket() {
        let g = |x: f64| x * x * x - x - 2.0;
        let a = bisect_root(g, 1.0, 2.0, 1e-13).unwrap();
        let b = bisect_root(g, 1.0, 2.0, 1e-13).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert!(matches!(
            bisect_root(|x| x + 1.0, 0.0, 2.0, 1e-12),
            Err(SolverError::InvalidBracket { .. })
        ));
    }

    #[test]
    fn gradient_check_on_quadratics_is_tight() {
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..20 {
            let a: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let af = a.clone();
            let f = move |x: &[f64]| {
                x.iter()
                    .zip(&af)
                    .map(|(xi, ai)| ai * xi * xi + xi)
                    .sum::<f64>()
            };
            let ag = a.clone();
            let g = move |x: &[f64]| {
                x.iter()
                    .zip(&ag)
                    .map(|(xi, ai)| 2.0 * ai * xi + 1.0)
                    .collect::<Vec<_>>()
            };
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let dev = check_gradient(&f, &g, &x, 1e-5).unwrap();
            assert!(dev < 1e-8, "deviation {dev}");
        }
    }
}
