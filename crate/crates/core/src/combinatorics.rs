//! Exact enumeration of type-count compositions with multinomial weights.
//!
//! Asymmetric-information objectives are expectations over the assignment of
//! N EAPs to K types. With a uniform type distribution, the count vector
//! (n₁,…,n_K) follows a multinomial with weight Φ = N!/(n₁!…n_K!·Kᴺ); this
//! module enumerates all C(N+K−1, K−1) compositions and provides the
//! expectation operator built on them.

use thiserror::Error;

/// Largest composition count enumerated by default before erroring out.
/// Exactness is load-bearing for the schemes; sampling must be an explicit
/// caller choice, not a silent fallback.
pub const DEFAULT_ENUMERATION_CAP: u64 = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnumerationError {
    #[error("enumerating {count} compositions (n = {n}, k = {k}) exceeds the cap of {cap}")]
    CapExceeded {
        n: u32,
        k: usize,
        count: u128,
        cap: u64,
    },
    #[error("composition count for n = {n}, k = {k} overflows")]
    CountOverflow { n: u32, k: usize },
    #[error("need at least one type bucket")]
    EmptyTypeSet,
}

/// One assignment (n₁,…,n_K) of EAP counts to types together with its
/// multinomial probability Φ under the uniform type distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Composition {
    counts: Vec<u32>,
    prob: f64,
}

impl Composition {
    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn prob(&self) -> f64 {
        self.prob
    }
}

/// Number of compositions of `n` into `k` nonnegative parts: C(n+k−1, k−1).
pub fn composition_count(n: u32, k: usize) -> Result<u128, EnumerationError> {
    if k == 0 {
        return Err(EnumerationError::EmptyTypeSet);
    }
    // C(n+k-1, k-1) via the multiplicative rule, exact in u128
    let top = n as u128 + k as u128 - 1;
    let r = (k - 1) as u128;
    let r = r.min(top - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc
            .checked_mul(top - i)
            .ok_or(EnumerationError::CountOverflow { n, k })?;
        acc /= i + 1; // always divides exactly for prefix products
    }
    Ok(acc)
}

/// Iterator over all compositions of `n` into `k` parts, in ascending
/// lexicographic order of the count vector, each carrying its weight Φ.
#[derive(Debug)]
pub struct Compositions {
    current: Option<Vec<u32>>,
    ln_factorial: Vec<f64>,
    ln_k: f64,
    n: u32,
    remaining: u128,
}

impl Compositions {
    fn new(n: u32, k: usize, total: u128) -> Self {
        // ln i! by cumulative summation; n stays small enough (cap bounds it)
        // that the accumulated error is far below the 1e-12 normalization
        // budget.
        let mut ln_factorial = vec![0.0; n as usize + 1];
        for i in 1..=n as usize {
            ln_factorial[i] = ln_factorial[i - 1] + (i as f64).ln();
        }
        let mut first = vec![0u32; k];
        first[k - 1] = n;
        Self {
            current: Some(first),
            ln_factorial,
            ln_k: (k as f64).ln(),
            n,
            remaining: total,
        }
    }

    fn prob_of(&self, counts: &[u32]) -> f64 {
        let mut ln = self.ln_factorial[self.n as usize] - self.n as f64 * self.ln_k;
        for &c in counts {
            ln -= self.ln_factorial[c as usize];
        }
        ln.exp()
    }

    /// Exact number of compositions left to yield.
    pub fn remaining(&self) -> u128 {
        self.remaining
    }
}

impl Iterator for Compositions {
    type Item = Composition;

    fn next(&mut self) -> Option<Composition> {
        let counts = self.current.take()?;
        let prob = self.prob_of(&counts);
        self.remaining -= 1;

        // successor: bump the rightmost index that still has mass after it,
        // then push everything beyond it onto the last slot
        let k = counts.len();
        let mut next = counts.clone();
        let mut suffix: u32 = 0;
        let mut found = None;
        for j in (0..k - 1).rev() {
            suffix += next[j + 1];
            if suffix > 0 {
                found = Some((j, suffix));
                break;
            }
        }
        if let Some((j, suffix)) = found {
            next[j] += 1;
            for slot in next[j + 1..].iter_mut() {
                *slot = 0;
            }
            next[k - 1] = suffix - 1;
            self.current = Some(next);
        }

        Some(Composition { counts, prob })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let r = usize::try_from(self.remaining).unwrap_or(usize::MAX);
        (r, Some(r))
    }
}

/// Enumerates compositions of `n` into `k` parts under the default cap.
pub fn enumerate_compositions(n: u32, k: usize) -> Result<Compositions, EnumerationError> {
    enumerate_compositions_with_cap(n, k, DEFAULT_ENUMERATION_CAP)
}

/// Enumerates compositions of `n` into `k` parts, erroring if their number
/// exceeds `cap`.
pub fn enumerate_compositions_with_cap(
    n: u32,
    k: usize,
    cap: u64,
) -> Result<Compositions, EnumerationError> {
    let total = composition_count(n, k)?;
    if total > cap as u128 {
        return Err(EnumerationError::CapExceeded {
            n,
            k,
            count: total,
            cap,
        });
    }
    Ok(Compositions::new(n, k, total))
}

/// Expectation ΣΦ·f(composition) over all compositions of `n` into `k`,
/// accumulated with compensated summation.
pub fn expect<F>(n: u32, k: usize, mut f: F) -> Result<f64, EnumerationError>
where
    F: FnMut(&Composition) -> f64,
{
    let mut sum = KahanSum::default();
    for comp in enumerate_compositions(n, k)? {
        sum.add(comp.prob() * f(&comp));
    }
    Ok(sum.value())
}

/// Neumaier-compensated accumulator; composition weights span many orders of
/// magnitude, so order-independent partial sums need the correction term.
#[derive(Debug, Default, Clone, Copy)]
pub struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn collect(n: u32, k: usize) -> Vec<Composition> {
        enumerate_compositions(n, k).unwrap().collect()
    }

    #[test]
    fn two_draws_two_types_is_a_fair_binomial() {
        let comps = collect(2, 2);
        assert_eq!(comps.len(), 3);
        // lexicographic: (0,2), (1,1), (2,0)
        assert_eq!(comps[0].counts(), &[0, 2]);
        assert_eq!(comps[1].counts(), &[1, 1]);
        assert_eq!(comps[2].counts(), &[2, 0]);
        assert!((comps[0].prob() - 0.25).abs() < 1e-12);
        assert!((comps[1].prob() - 0.5).abs() < 1e-12);
        assert!((comps[2].prob() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn single_draw_is_uniform() {
        let comps = collect(1, 3);
        assert_eq!(comps.len(), 3);
        for c in &comps {
            assert!((c.prob() - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn five_draws_ten_types_counts_and_normalizes() {
        // stars and bars: C(14, 9) = 2002
        assert_eq!(composition_count(5, 10).unwrap(), 2002);
        let comps = collect(5, 10);
        assert_eq!(comps.len(), 2002);
        let mut sum = KahanSum::default();
        for c in &comps {
            assert_eq!(c.counts().iter().sum::<u32>(), 5);
            assert!(c.prob() > 0.0);
            sum.add(c.prob());
        }
        assert!((sum.value() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn count_matches_closed_form_exactly() {
        for n in 0..=12u32 {
            for k in 1..=10usize {
                let expected = binomial_u128(n as u128 + k as u128 - 1, k as u128 - 1);
                assert_eq!(composition_count(n, k).unwrap(), expected);
                let listed = collect(n, k).len() as u128;
                assert_eq!(listed, expected, "n={n} k={k}");
            }
        }
    }

    fn binomial_u128(n: u128, r: u128) -> u128 {
        if r > n {
            return 0;
        }
        let r = r.min(n - r);
        let mut acc = 1u128;
        for i in 0..r {
            acc = acc * (n - i) / (i + 1);
        }
        acc
    }

    #[test]
    fn probabilities_normalize_across_sizes() {
        for n in 0..=12u32 {
            for k in 1..=10usize {
                let total = expect(n, k, |_| 1.0).unwrap();
                assert!(
                    (total - 1.0).abs() < 1e-12,
                    "n={n} k={k} sum of probs = {total}"
                );
            }
        }
    }

    #[test]
    fn expected_count_per_type_is_n_over_k() {
        for n in [1u32, 4, 9] {
            for k in [2usize, 3, 5] {
                for j in 0..k {
                    let mean = expect(n, k, |c| c.counts()[j] as f64).unwrap();
                    assert!(
                        (mean - n as f64 / k as f64).abs() < 1e-12,
                        "E[n_{j}] off for n={n} k={k}: {mean}"
                    );
                }
            }
        }
    }

    #[test]
    fn binomial_mean_example() {
        let mean = expect(4, 2, |c| c.counts()[0] as f64).unwrap();
        assert!((mean - 2.0).abs() < 1e-12);
    }

    #[test]
    fn cap_is_enforced() {
        let err = enumerate_compositions_with_cap(5, 10, 2001).unwrap_err();
        match err {
            EnumerationError::CapExceeded { count, cap, .. } => {
                assert_eq!(count, 2002);
                assert_eq!(cap, 2001);
            }
            other => panic!("unexpected error {other:?}"),
        }
        assert!(enumerate_compositions_with_cap(5, 10, 2002).is_ok());
        assert!(composition_count(4, 0).is_err());
    }

    #[test]
    fn zero_draws_has_the_empty_composition() {
        let comps = collect(0, 4);
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].counts(), &[0, 0, 0, 0]);
        assert!((comps[0].prob() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn expectation_matches_monte_carlo() {
        // fixed per-type energies; f = realized social welfare against a
        // 10^6-draw Monte Carlo average, within 3 standard errors
        let (n, k) = (4u32, 3usize);
        let thetas = [0.3, 0.7, 1.0];
        let q = [0.2, 0.5, 0.9];
        let (gamma, w) = (2.2, 1.0);
        let welfare = |counts: &[u32]| -> f64 {
            let total: f64 = counts.iter().zip(q).map(|(&c, qi)| c as f64 * qi).sum();
            let cost: f64 = counts
                .iter()
                .zip(q)
                .zip(thetas)
                .map(|((&c, qi), th)| c as f64 * qi * qi / th)
                .sum();
            w * (1.0 + gamma * total).log2() - cost
        };
        let exact = expect(n, k, |c| welfare(c.counts())).unwrap();

        let mut rng = StdRng::seed_from_u64(2024);
        let draws = 1_000_000usize;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..draws {
            let mut counts = [0u32; 3];
            for _ in 0..n {
                counts[rng.gen_range(0..k)] += 1;
            }
            let v = welfare(&counts);
            sum += v;
            sum_sq += v * v;
        }
        let mean = sum / draws as f64;
        let var = (sum_sq / draws as f64 - mean * mean).max(0.0);
        let stderr = (var / draws as f64).sqrt();
        assert!(
            (mean - exact).abs() <= 3.0 * stderr,
            "exact {exact} vs MC {mean} (stderr {stderr})"
        );
    }

    #[test]
    fn kahan_sum_handles_scale_spread() {
        let mut s = KahanSum::default();
        s.add(1e16);
        for _ in 0..10_000 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 10_000.0);
    }
}
