//! Fock-basis matrix elements of the two-mode squeezer and the beamsplitter.
//!
//! Both are elements of `U†` between two-mode number states, with
//! `U†(μ) = exp(μ(a₁†a₂† - a₁a₂))` and `U†(θ) = exp(θ(a₁†a₂ - a₁a₂†))`.

use super::combinatorics::{ln_binomial, ln_factorial};

/// `(ln|b^e|, sign)` with `0^0 = 1`.
fn signed_ln_pow(base: f64, exp: usize) -> (f64, f64) {
    if exp == 0 {
        return (0.0, 1.0);
    }
    let sign = if base < 0.0 && exp % 2 == 1 { -1.0 } else { 1.0 };
    (base.abs().ln() * exp as f64, sign)
}

/// `⟨m1, m2| U†(μ) |n1, n2⟩` given `tanh μ` and `sech μ`, with
/// `m2 = n2 + m1 - n1` implied. Requires `m1 + n2 ≥ n1`.
pub fn tms_coefficient(tanh: f64, sech: f64, m1: usize, n1: usize, n2: usize) -> f64 {
    debug_assert!(m1 + n2 >= n1);
    let m2 = n2 + m1 - n1;
    let pref = 0.5 * (ln_factorial(n1) + ln_factorial(m2) - ln_factorial(n2) - ln_factorial(m1));
    let lo = n1.saturating_sub(m1);
    let hi = n1.min(n2);
    let ln_sech = sech.ln();
    let mut acc = 0.0;
    for r in lo..=hi {
        let (lt, st) = signed_ln_pow(tanh, 2 * r + m1 - n1);
        let l = pref
            + ln_binomial(n2, r)
            + ln_binomial(m1, n1 - r)
            + ln_sech * (n1 + n2 - 2 * r + 1) as f64
            + lt;
        let sign = if r % 2 == 1 { -st } else { st };
        acc += sign * l.exp();
    }
    acc
}

/// Two-mode squeezer element `⟨m1, m2| U†(μ) |n1, n2⟩`.
pub fn tms_matrix_element(mu: f64, m1: usize, m2: usize, n1: usize, n2: usize) -> f64 {
    if m2 + n1 != n2 + m1 {
        return 0.0;
    }
    tms_coefficient(mu.tanh(), 1.0 / mu.cosh(), m1, n1, n2)
}

/// `⟨m1, m2| U†(θ) |n1, n2⟩` given `sin θ`, `cos θ`, with `m1 = n1 + n2 - m2`.
///
/// The sign carried by each term is `(-1)^r`, which makes the `n2 = 0` row
/// reduce to `√C(n, m) (-sin θ)^m cos^(n-m) θ`.
pub fn bs_coefficient(sin: f64, cos: f64, m2: usize, n1: usize, n2: usize) -> f64 {
    let total = n1 + n2;
    debug_assert!(m2 <= total);
    let m1 = total - m2;
    let pref = 0.5 * (ln_factorial(m1) + ln_factorial(m2) - ln_factorial(n1) - ln_factorial(n2));
    let lo = m2.saturating_sub(n2);
    let hi = n1.min(m2);
    let mut acc = 0.0;
    for r in lo..=hi {
        let (ls, ss) = signed_ln_pow(sin, 2 * r + n2 - m2);
        let (lc, sc) = signed_ln_pow(cos, n1 + m2 - 2 * r);
        let l = pref + ln_binomial(n1, r) + ln_binomial(n2, m2 - r) + ls + lc;
        let sign = if r % 2 == 1 { -ss * sc } else { ss * sc };
        acc += sign * l.exp();
    }
    acc
}

/// Beamsplitter element `⟨m1, m2| U†(θ) |n1, n2⟩`.
pub fn bs_matrix_element(theta: f64, m1: usize, m2: usize, n1: usize, n2: usize) -> f64 {
    if m1 + m2 != n1 + n2 {
        return 0.0;
    }
    bs_coefficient(theta.sin(), theta.cos(), m2, n1, n2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use num_complex::Complex64;

    /// `exp(G)` for a real antisymmetric `G`, through the Hermitian `iG`.
    fn expm_antisymmetric(g: &DMatrix<f64>) -> DMatrix<f64> {
        let h: DMatrix<Complex64> = g.map(|e| Complex64::new(0.0, e));
        let eig = nalgebra::SymmetricEigen::new(h);
        let v = &eig.eigenvectors;
        let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| Complex64::new(0.0, -l).exp()));
        (v * d * v.adjoint()).map(|z| z.re)
    }

    /// Brute-force squeezer on the sector `n1 - n2 = d`, truncated to `k < len`.
    fn tms_oracle(mu: f64, d: isize, len: usize) -> impl Fn(usize, usize) -> f64 {
        let off1 = d.max(0) as usize;
        let off2 = (-d).max(0) as usize;
        let mut g = DMatrix::zeros(len, len);
        for k in 0..len - 1 {
            let (p, q) = ((k + off1) as f64, (k + off2) as f64);
            let amp = mu * ((p + 1.0) * (q + 1.0)).sqrt();
            g[(k + 1, k)] = amp;
            g[(k, k + 1)] = -amp;
        }
        let u = expm_antisymmetric(&g);
        move |m1: usize, n1: usize| u[(m1 - off1, n1 - off1)]
    }

    fn bs_oracle(theta: f64, total: usize) -> DMatrix<f64> {
        // basis |k, total - k⟩ indexed by k
        let n = total as f64;
        let mut g = DMatrix::zeros(total + 1, total + 1);
        for k in 0..total {
            let kf = k as f64;
            // a1† a2 |k, n-k⟩ = √(k+1)√(n-k) |k+1, n-k-1⟩
            let amp = theta * ((kf + 1.0) * (n - kf)).sqrt();
            g[(k + 1, k)] += amp;
            g[(k, k + 1)] -= amp;
        }
        expm_antisymmetric(&g)
    }

    #[test]
    fn squeezer_matches_exponential() {
        for mu in [0.2, 0.7, 1.1] {
            for d in -4isize..=4 {
                let oracle = tms_oracle(mu, d, 160);
                for n1 in 0..8usize {
                    let Some(n2) = (n1 as isize - d).try_into().ok() else { continue };
                    for m1 in d.max(0) as usize..10 {
                        let m2 = (m1 as isize - d) as usize;
                        let want = oracle(m1, n1);
                        let got = tms_matrix_element(mu, m1, m2, n1, n2);
                        assert!((want - got).abs() < 1e-10, "mu={mu} ({m1},{m2})<-({n1},{n2}) {want} vs {got}");
                    }
                }
            }
        }
    }

    #[test]
    fn squeezer_vacuum_row() {
        let mu: f64 = 0.6;
        for m in 0..10 {
            let want = mu.tanh().powi(m as i32) / mu.cosh();
            assert!((tms_matrix_element(mu, m, m, 0, 0) - want).abs() < 1e-14);
        }
    }

    #[test]
    fn beamsplitter_matches_exponential() {
        for theta in [0.3, -0.9, std::f64::consts::FRAC_PI_4, 2.0] {
            for total in 0..12usize {
                let u = bs_oracle(theta, total);
                for n1 in 0..=total {
                    for m1 in 0..=total {
                        let (n2, m2) = (total - n1, total - m1);
                        let got = bs_matrix_element(theta, m1, m2, n1, n2);
                        let want = u[(m1, n1)];
                        assert!((want - got).abs() < 1e-11, "θ={theta} ({m1},{m2})<-({n1},{n2}) {want} vs {got}");
                    }
                }
            }
        }
    }

    #[test]
    fn beamsplitter_single_photon() {
        let t = std::f64::consts::FRAC_PI_4;
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((bs_matrix_element(t, 1, 0, 1, 0) - h).abs() < 1e-15);
        assert!((bs_matrix_element(t, 0, 1, 1, 0) + h).abs() < 1e-15);
    }
}
