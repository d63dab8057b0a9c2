//! Log-space factorials and binomials.
//!
//! Kraus coefficients involve ratios like `sqrt(C(m+n, n))` with indices in
//! the thousands, so everything is kept in log space and exponentiated per term.

use std::sync::OnceLock;

const TABLE_LEN: usize = 1 << 14;

fn table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(TABLE_LEN);
        t.push(0.0);
        let mut acc = 0.0;
        for k in 1..TABLE_LEN {
            acc += (k as f64).ln();
            t.push(acc);
        }
        t
    })
}

/// `ln(n!)`. Tabulated below 16384, Stirling series above.
pub fn ln_factorial(n: usize) -> f64 {
    if n < TABLE_LEN {
        return table()[n];
    }
    let x = n as f64;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    x * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI * x).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 / 1260.0))
}

/// `ln C(n, k)`, or `-inf` when `k > n`.
pub fn ln_binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// `C(n, k)` as a float.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        0.0
    } else {
        ln_binomial(n, k).exp()
    }
}

/// `ln(base) * exp` with the convention `0^0 = 1`.
///
/// Returns `-inf` for `0^k`, `k > 0`. `base` must be non-negative.
#[inline]
pub fn ln_pow(base: f64, exp: usize) -> f64 {
    if exp == 0 {
        0.0
    } else {
        base.ln() * exp as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_factorials_are_exact() {
        let mut f = 1.0f64;
        for n in 0..20 {
            if n > 0 {
                f *= n as f64;
            }
            assert!((ln_factorial(n).exp() - f).abs() <= 1e-12 * f);
        }
    }

    #[test]
    fn stirling_matches_table_at_the_seam() {
        let n = TABLE_LEN - 1;
        let x = n as f64;
        let inv = 1.0 / x;
        let stirling = x * x.ln() - x
            + 0.5 * (2.0 * std::f64::consts::PI * x).ln()
            + inv / 12.0
            - inv.powi(3) / 360.0;
        assert!((stirling - ln_factorial(n)).abs() < 1e-8);
        assert!(ln_factorial(TABLE_LEN) > ln_factorial(TABLE_LEN - 1));
    }

    #[test]
    fn pascal_rule() {
        for n in 1..60 {
            for k in 1..n {
                let lhs = binomial(n, k);
                let rhs = binomial(n - 1, k - 1) + binomial(n - 1, k);
                assert!((lhs - rhs).abs() <= 1e-12 * lhs);
            }
        }
        assert_eq!(binomial(3, 5), 0.0);
    }

    #[test]
    fn zero_to_the_zero() {
        assert_eq!(ln_pow(0.0, 0), 0.0);
        assert_eq!(ln_pow(0.0, 3), f64::NEG_INFINITY);
    }
}
