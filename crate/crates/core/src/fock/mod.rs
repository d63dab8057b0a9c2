//! Truncated Fock space: states, displacements, position wavefunctions.

pub mod combinatorics;
pub mod elements;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::repr::{self, Pair};
use combinatorics::ln_factorial;

pub use elements::{bs_matrix_element, tms_matrix_element};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Leakage above which truncated states are flagged.
pub const LEAKAGE_WARN: f64 = 1e-8;

/// Pure state on levels `0..dim`. `leakage` is the norm² that did not fit.
#[derive(Clone, Debug, PartialEq)]
pub struct FockState {
    pub amplitudes: CVector,
    pub leakage: f64,
}

impl FockState {
    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn density(&self) -> FockOperator {
        let a = &self.amplitudes;
        FockOperator { matrix: a * a.adjoint(), leakage: self.leakage }
    }

    pub fn leaks(&self) -> bool {
        self.leakage > LEAKAGE_WARN
    }
}

/// Square operator on levels `0..dim`, usually a density matrix.
///
/// `leakage` accumulates trace known to have left the truncated space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OperatorRepr", into = "OperatorRepr")]
pub struct FockOperator {
    pub matrix: CMatrix,
    pub leakage: f64,
}

#[derive(Serialize, Deserialize)]
struct OperatorRepr {
    dim: usize,
    #[serde(default)]
    leakage: f64,
    matrix: Vec<Vec<Pair>>,
}

impl TryFrom<OperatorRepr> for FockOperator {
    type Error = Error;
    fn try_from(r: OperatorRepr) -> Result<Self> {
        let m = repr::rows_to_mat(&r.matrix)?;
        if m.nrows() != r.dim || m.ncols() != r.dim {
            return Err(Error::DimensionMismatch { expected: r.dim, found: m.nrows() });
        }
        Ok(FockOperator { matrix: m, leakage: r.leakage })
    }
}

impl From<FockOperator> for OperatorRepr {
    fn from(o: FockOperator) -> Self {
        OperatorRepr { dim: o.dim(), leakage: o.leakage, matrix: repr::mat_to_rows(&o.matrix) }
    }
}

impl FockOperator {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), found: matrix.ncols() });
        }
        Ok(FockOperator { matrix, leakage: 0.0 })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    /// `Tr ρ²` for a Hermitian `ρ`.
    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Zero-pads or truncates to `dim` levels.
    pub fn resized(&self, dim: usize) -> FockOperator {
        let n = self.dim().min(dim);
        let mut m = CMatrix::zeros(dim, dim);
        m.view_mut((0, 0), (n, n)).copy_from(&self.matrix.view((0, 0), (n, n)));
        let lost = self.trace().re - m.trace().re;
        FockOperator { matrix: m, leakage: self.leakage + lost.max(0.0) }
    }
}

fn dim_check(dim: usize) -> Result<()> {
    if dim == 0 {
        Err(invalid("truncation dimension must be at least 1"))
    } else {
        Ok(())
    }
}

/// Number state `|n⟩`.
pub fn fock_state(n: usize, dim: usize) -> Result<FockState> {
    dim_check(dim)?;
    if n >= dim {
        return Err(invalid(format!("|{n}⟩ does not fit in {dim} levels")));
    }
    let mut a = CVector::zeros(dim);
    a[n] = Complex64::new(1.0, 0.0);
    Ok(FockState { amplitudes: a, leakage: 0.0 })
}

/// Coherent state `|β⟩ = e^{-|β|²/2} Σ βⁿ/√n! |n⟩`, truncated.
pub fn coherent_state(beta: Complex64, dim: usize) -> Result<FockState> {
    dim_check(dim)?;
    Ok(coherent_unchecked(beta, dim))
}

pub(crate) fn coherent_unchecked(beta: Complex64, dim: usize) -> FockState {
    let mut a = CVector::zeros(dim);
    let mut c = Complex64::new((-0.5 * beta.norm_sqr()).exp(), 0.0);
    a[0] = c;
    for n in 1..dim {
        c = c * beta / (n as f64).sqrt();
        a[n] = c;
    }
    let kept: f64 = a.iter().map(|z| z.norm_sqr()).sum();
    FockState { amplitudes: a, leakage: (1.0 - kept).max(0.0) }
}

/// Thermal state with covariance `ν I`: populations `(1-y) yⁿ`, `y = (ν-1)/(ν+1)`.
pub fn thermal_state(nu: f64, dim: usize) -> Result<FockOperator> {
    dim_check(dim)?;
    if !(nu >= 1.0 && nu.is_finite()) {
        return Err(invalid(format!("thermal state needs finite ν ≥ 1, got {nu}")));
    }
    let y = (nu - 1.0) / (nu + 1.0);
    let mut m = CMatrix::zeros(dim, dim);
    let mut p = 1.0 - y;
    for n in 0..dim {
        m[(n, n)] = Complex64::new(p, 0.0);
        p *= y;
    }
    Ok(FockOperator { matrix: m, leakage: y.powi(dim as i32) })
}

/// Generalised Laguerre `L_n^{(k)}(x)` for `n = 0..len`.
fn laguerre_row(k: usize, x: f64, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    if len == 0 {
        return out;
    }
    let kf = k as f64;
    out.push(1.0);
    if len > 1 {
        out.push(1.0 + kf - x);
    }
    for j in 1..len.saturating_sub(1) {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + kf - x) * out[j] - (jf + kf) * out[j - 1]) / (jf + 1.0);
        out.push(next);
    }
    out
}

/// Truncated displacement `D(β)` with entries from the Laguerre closed form.
///
/// Entries are exact elements of the infinite operator, so `P D P` is the
/// restriction rather than a re-normalised approximation.
pub fn displacement_operator(beta: Complex64, dim: usize) -> Result<CMatrix> {
    dim_check(dim)?;
    Ok(displacement_unchecked(beta, dim))
}

pub(crate) fn displacement_unchecked(beta: Complex64, dim: usize) -> CMatrix {
    let mut d = CMatrix::zeros(dim, dim);
    let x = beta.norm_sqr();
    if x == 0.0 {
        return CMatrix::identity(dim, dim);
    }
    let ln_abs = beta.norm().ln();
    let phase = beta / beta.norm();
    let minus_conj = -phase.conj();
    for k in 0..dim {
        let lag = laguerre_row(k, x, dim - k);
        let ph_lo = phase.powi(k as i32);
        let ph_hi = minus_conj.powi(k as i32);
        for (n, l) in lag.iter().enumerate() {
            let m = n + k;
            let mag = (0.5 * (ln_factorial(n) - ln_factorial(m)) + k as f64 * ln_abs - 0.5 * x).exp() * l;
            d[(m, n)] = ph_lo * mag;
            if k > 0 {
                d[(n, m)] = ph_hi * mag;
            }
        }
    }
    d
}

/// `⟨x|n⟩` for `n = 0..dim`: normalised Hermite functions by recurrence.
pub fn position_amplitudes(x: f64, dim: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(dim);
    if dim == 0 {
        return out;
    }
    let p0 = std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp();
    out.push(p0);
    if dim > 1 {
        out.push(std::f64::consts::SQRT_2 * x * p0);
    }
    for n in 2..dim {
        let nf = n as f64;
        let v = (2.0 / nf).sqrt() * x * out[n - 1] - ((nf - 1.0) / nf).sqrt() * out[n - 2];
        out.push(v);
    }
    out
}

/// Single position amplitude `⟨x|n⟩`.
pub fn position_amplitude(n: usize, x: f64) -> f64 {
    position_amplitudes(x, n + 1)[n]
}

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Truncated lowering operator.
pub fn annihilation(dim: usize) -> CMatrix {
    let mut a = CMatrix::zeros(dim, dim);
    for n in 1..dim {
        a[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Columns of `D(β)` from `D(β)|n⟩ = (a† - β*) D(β)|n-1⟩ / √n`,
    /// which is closed on the truncated space.
    fn displacement_by_recurrence(beta: Complex64, dim: usize) -> CMatrix {
        let mut d = CMatrix::zeros(dim, dim);
        let c0 = coherent_unchecked(beta, dim).amplitudes;
        d.set_column(0, &c0);
        for n in 1..dim {
            let prev = d.column(n - 1).clone_owned();
            for m in 0..dim {
                let up = if m > 0 { prev[m - 1] * (m as f64).sqrt() } else { Complex64::new(0.0, 0.0) };
                d[(m, n)] = (up - beta.conj() * prev[m]) / (n as f64).sqrt();
            }
        }
        d
    }

    #[test]
    fn displacement_closed_form_matches_recurrence() {
        for beta in [Complex64::new(0.3, -0.2), Complex64::new(2.0, 1.0), Complex64::new(-4.5, 0.0)] {
            // the recurrence loses digits with column index; it is only a coarse oracle
            let a = displacement_operator(beta, 60).unwrap();
            let b = displacement_by_recurrence(beta, 60);
            let err = max_abs(&(a.columns(0, 15) - b.columns(0, 15)));
            assert!(err < 1e-8, "β={beta} err={err}");
        }
    }

    #[test]
    fn displacement_high_order_diagonal() {
        // e^{-5/2} L_59(5), evaluated at 50 digits
        let d = displacement_operator(Complex64::new(2.0, 1.0), 60).unwrap();
        assert!((d[(59, 59)].re + 0.077071089488242616).abs() < 1e-13);
        let d = displacement_operator(Complex64::new(-4.5, 0.0), 60).unwrap();
        assert!((d[(39, 14)].re + 0.068667495036352597).abs() < 1e-13);
    }

    #[test]
    fn displacement_inverse() {
        let beta = Complex64::new(1.5, -0.7);
        let n = 70;
        let p = displacement_operator(beta, n).unwrap() * displacement_operator(-beta, n).unwrap();
        let block = p.view((0, 0), (20, 20)).clone_owned();
        assert!(max_abs(&(block - CMatrix::identity(20, 20))) < 1e-12);
    }

    #[test]
    fn displacement_maps_vacuum_to_coherent() {
        let beta = Complex64::new(1.2, 0.4);
        let d = displacement_operator(beta, 40).unwrap();
        let c = coherent_state(beta, 40).unwrap();
        assert!((d.column(0) - &c.amplitudes).iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn hermite_functions_are_orthonormal() {
        let h = 0.01;
        let dim = 20;
        let mut gram = DMatrix::<f64>::zeros(dim, dim);
        let mut x = -12.0;
        while x <= 12.0 {
            let v = position_amplitudes(x, dim);
            for i in 0..dim {
                for j in 0..dim {
                    gram[(i, j)] += h * v[i] * v[j];
                }
            }
            x += h;
        }
        assert!((gram - DMatrix::identity(dim, dim)).amax() < 1e-10);
    }

    #[test]
    fn hermite_low_orders() {
        let x: f64 = 0.7;
        let g = std::f64::consts::PI.powf(-0.25) * (-x * x / 2.0).exp();
        let h2 = (4.0 * x * x - 2.0) / (8.0f64).sqrt();
        assert!((position_amplitude(2, x) - h2 * g).abs() < 1e-15);
    }

    #[test]
    fn thermal_normalisation() {
        let t = thermal_state(2.0, 60).unwrap();
        assert!((t.trace().re + t.leakage - 1.0).abs() < 1e-14);
        assert!(thermal_state(0.5, 10).is_err());
    }

    #[test]
    fn coherent_leakage_is_tracked() {
        let c = coherent_state(Complex64::new(3.0, 0.0), 10).unwrap();
        assert!(c.leaks());
        let c = coherent_state(Complex64::new(1.0, 0.0), 60).unwrap();
        assert!(!c.leaks());
    }

    #[test]
    fn operator_json_roundtrip() {
        let rho = coherent_state(Complex64::new(0.3, 0.1), 5).unwrap().density();
        let s = serde_json::to_string(&rho).unwrap();
        let back: FockOperator = serde_json::from_str(&s).unwrap();
        assert_eq!(back, rho);
    }
}
