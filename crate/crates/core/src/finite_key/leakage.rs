//! Error-correction leakage estimates.
//!
//! The finite-size reconciliation estimate needs the `eps_c` quantile of a
//! binomial distribution whose trial count can reach 1e11, so the lower tail
//! is evaluated by direct summation for narrow distributions and by a
//! continuity-corrected Lugannani-Rice saddlepoint approximation otherwise.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use super::binary_entropy;

/// Default reconciliation efficiency for the fixed-efficiency model.
pub const DEFAULT_F_EC: f64 = 1.16;

/// Variance below which binomial tails are summed exactly.
const EXACT_VARIANCE_LIMIT: f64 = 1e4;

/// How the error-correction leakage is modelled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum Reconciliation {
    /// Finite-size estimate built on the inverse binomial CDF.
    FiniteSize,
    /// `f_ec * n * h(Q)`.
    FixedEfficiency { f_ec: f64 },
}

impl Default for Reconciliation {
    fn default() -> Self {
        Reconciliation::FiniteSize
    }
}

/// Bits leaked while reconciling `n_x` sifted bits with error rate `qber_x`.
pub fn ec_leakage(n_x: f64, qber_x: f64, eps_c: f64, model: Reconciliation) -> f64 {
    if !(n_x >= 1.0) || !(qber_x > 0.0) {
        return 0.0;
    }
    let q = qber_x.min(0.5);
    match model {
        Reconciliation::FixedEfficiency { f_ec } => f_ec * n_x * binary_entropy(q).unwrap_or(1.0),
        Reconciliation::FiniteSize => {
            let trials = n_x.floor() as u64;
            let quantile = (binomial_quantile(eps_c, trials, 1.0 - q) as f64).clamp(0.0, n_x);
            let odds = ((1.0 - q) / q).log2();
            let h = binary_entropy(q).unwrap_or(1.0);
            let leak = n_x * h + (n_x * (1.0 - q) - quantile - 1.0) * odds - 0.5 * n_x.log2() - (1.0 / eps_c).log2();
            leak.max(0.0)
        }
    }
}

/// Smallest `k` in `[0, n]` with `P(X <= k) >= q` for `X ~ Bin(n, p)`.
pub fn binomial_quantile(q: f64, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 || q <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    if binomial_cdf(0, n, p) >= q {
        return 0;
    }
    let nf = n as f64;
    let sigma = (nf * p * (1.0 - p)).sqrt();
    let mut lo = (nf * p - 60.0 * sigma - 100.0).max(0.0) as u64;
    if binomial_cdf(lo, n, p) >= q {
        lo = 0;
    }
    let mut hi = n;
    // cdf(lo) < q <= cdf(hi)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if binomial_cdf(mid, n, p) >= q {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// `P(X <= k)` for `X ~ Bin(n, p)`.
pub fn binomial_cdf(k: u64, n: u64, p: f64) -> f64 {
    if k >= n || p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return 0.0;
    }
    let nf = n as f64;
    let mean = nf * p;
    let var = mean * (1.0 - p);
    let kf = k as f64;
    if var < EXACT_VARIANCE_LIMIT {
        if kf <= mean {
            lower_tail_sum(k, n, p)
        } else {
            1.0 - upper_tail_sum(k + 1, n, p)
        }
    } else if kf + 0.5 < mean {
        // P(X <= k) = P(n - X >= n - k)
        upper_tail_saddlepoint(n - k, n, 1.0 - p)
    } else {
        1.0 - upper_tail_saddlepoint(k + 1, n, p)
    }
}

fn ln_pmf(k: u64, n: u64, p: f64) -> f64 {
    let (kf, nf) = (k as f64, n as f64);
    ln_gamma(nf + 1.0) - ln_gamma(kf + 1.0) - ln_gamma(nf - kf + 1.0) + kf * p.ln() + (nf - kf) * (1.0 - p).ln()
}

fn lower_tail_sum(k: u64, n: u64, p: f64) -> f64 {
    let mut term = ln_pmf(k, n, p).exp();
    let mut sum = term;
    let ratio = (1.0 - p) / p;
    let mut i = k;
    while i > 0 && term > sum * 1e-18 {
        term *= i as f64 / (n - i + 1) as f64 * ratio;
        sum += term;
        i -= 1;
    }
    sum.min(1.0)
}

fn upper_tail_sum(j: u64, n: u64, p: f64) -> f64 {
    if j > n {
        return 0.0;
    }
    let mut term = ln_pmf(j, n, p).exp();
    let mut sum = term;
    let ratio = p / (1.0 - p);
    let mut i = j;
    while i < n && term > sum * 1e-18 {
        term *= (n - i) as f64 / (i + 1) as f64 * ratio;
        sum += term;
        i += 1;
    }
    sum.min(1.0)
}

/// `P(X >= j)` by the Lugannani-Rice formula with Daniels' continuity correction.
fn upper_tail_saddlepoint(j: u64, n: u64, p: f64) -> f64 {
    if j == 0 {
        return 1.0;
    }
    if j > n {
        return 0.0;
    }
    if j == n {
        return (n as f64 * p.ln()).exp();
    }
    let nf = n as f64;
    let x = j as f64 - 0.5;
    let mean = nf * p;
    let q = 1.0 - p;
    let sd = (mean * q).sqrt();
    if (x - mean).abs() < 1e-6 * sd {
        return 0.5 * erfc((x - mean) / (sd * std::f64::consts::SQRT_2));
    }
    // Saddlepoint s solves K'(s) = x; K(s) = n ln(q + p e^s).
    let s = (x / (nf - x)).ln() + (q / p).ln();
    // s x - K(s) = x ln(x / np) + (n - x) ln((n - x) / nq)
    let rel_up = (x - mean) / mean;
    let rel_dn = (mean - x) / (nf * q);
    let kl = x * rel_up.ln_1p() + (nf - x) * rel_dn.ln_1p();
    let w = s.signum() * (2.0 * kl.max(0.0)).sqrt();
    let curvature = x * (nf - x) / nf;
    let u = 2.0 * (s / 2.0).sinh() * curvature.sqrt();
    let tail = 0.5 * erfc(w / std::f64::consts::SQRT_2);
    let density = (-0.5 * w * w).exp() / (2.0 * std::f64::consts::PI).sqrt();
    (tail + density * (1.0 / u - 1.0 / w)).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn exact_cdf(k: u64, n: u64, p: f64) -> f64 {
        (0..=k).map(|i| ln_pmf(i, n, p).exp()).sum()
    }

    #[test]
    fn small_exact_cdf() {
        for &(k, n, p) in &[(3u64, 10u64, 0.4), (0, 5, 0.2), (17, 40, 0.6)] {
            assert_relative_eq!(binomial_cdf(k, n, p), exact_cdf(k, n, p), max_relative = 1e-12);
        }
    }

    #[test]
    fn saddlepoint_tracks_exact_sum_in_deep_tail() {
        // variance 2.5e4 forces the saddlepoint path
        let (n, p) = (100_000u64, 0.5);
        let k = 48_800;
        let exact = lower_tail_sum(k, n, p);
        assert_relative_eq!(binomial_cdf(k, n, p), exact, max_relative = 1e-3);
    }

    #[test]
    fn quantiles_match_reference_values() {
        // reference: scipy.stats.binom.ppf(1e-15, n, p)
        assert_eq!(binomial_quantile(1e-15, 1000, 0.9), 817);
        assert_eq!(binomial_quantile(1e-15, 1_000_000, 0.98), 978_878);
        assert_eq!(binomial_quantile(1e-15, 123_456_789, 0.97), 119_738_023);
        assert_eq!(binomial_quantile(1e-15, 1_000_000_000, 0.99), 989_975_003);
        assert_eq!(binomial_quantile(1e-15, 100_000_000_000, 0.995), 99_499_822_860);
    }

    #[test]
    fn leakage_edge_cases() {
        assert_eq!(ec_leakage(0.0, 0.02, 1e-15, Reconciliation::FiniteSize), 0.0);
        assert_eq!(ec_leakage(1e6, 0.0, 1e-15, Reconciliation::FiniteSize), 0.0);
    }

    #[test]
    fn fixed_efficiency_leakage() {
        let leak = ec_leakage(1e6, 0.02, 1e-15, Reconciliation::FixedEfficiency { f_ec: 1.16 });
        assert_relative_eq!(leak, 164_071.029_348_512, max_relative = 1e-9);
    }
}
