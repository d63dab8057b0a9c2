//! Covariance matrices, canonical single-mode Gaussian channels and their
//! two-mode (Choi-like) output statistics.
//!
//! Quadratures are `q = (a + a†)/√2`, `p = (a - a†)/(i√2)`, ordered
//! `(q1, p1, q2, p2)`. Covariance matrices use `V_ij = <{Δξ_i, Δξ_j}>`, so the
//! vacuum is the identity.

use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Tolerance used by the complete-positivity and entanglement-breaking tests.
pub const PHYSICALITY_TOL: f64 = 1e-9;

/// Squeezing of the reference state used by the entanglement-breaking test.
pub const EB_TEST_SQUEEZING: f64 = 1.0;

const SIGMA3: [f64; 4] = [1.0, 0.0, 0.0, -1.0];

fn sigma3() -> Matrix2<f64> {
    Matrix2::from_row_slice(&SIGMA3)
}

/// Covariance matrix plus first moments for one or two modes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CovMatRepr", into = "CovMatRepr")]
pub struct CovMat {
    matrix: DMatrix<f64>,
    mean: DVector<f64>,
}

#[derive(Serialize, Deserialize)]
struct CovMatRepr {
    matrix: Vec<Vec<f64>>,
    mean: Vec<f64>,
}

impl TryFrom<CovMatRepr> for CovMat {
    type Error = Error;
    fn try_from(r: CovMatRepr) -> Result<Self> {
        let n = r.matrix.len();
        if r.matrix.iter().any(|row| row.len() != n) {
            return Err(Error::Format("covariance matrix must be square".into()));
        }
        let m = DMatrix::from_fn(n, n, |i, j| r.matrix[i][j]);
        CovMat::new(m, DVector::from_vec(r.mean))
    }
}

impl From<CovMat> for CovMatRepr {
    fn from(c: CovMat) -> Self {
        let n = c.matrix.nrows();
        CovMatRepr {
            matrix: (0..n).map(|i| (0..n).map(|j| c.matrix[(i, j)]).collect()).collect(),
            mean: c.mean.iter().copied().collect(),
        }
    }
}

impl CovMat {
    /// Builds a covariance matrix, checking shape and symmetry.
    pub fn new(matrix: DMatrix<f64>, mean: DVector<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n || !(n == 2 || n == 4) {
            return Err(Error::NotPhysical(format!(
                "expected a 2x2 or 4x4 matrix, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if mean.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: mean.len() });
        }
        let scale = matrix.amax().max(1.0);
        if (&matrix - matrix.transpose()).amax() > 1e-9 * scale {
            return Err(Error::NotPhysical("covariance matrix is not symmetric".into()));
        }
        let sym = (&matrix + matrix.transpose()) * 0.5;
        Ok(CovMat { matrix: sym, mean })
    }

    /// Zero-mean covariance matrix.
    pub fn centered(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        Self::new(matrix, DVector::zeros(n))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn modes(&self) -> usize {
        self.matrix.nrows() / 2
    }

    /// Whether `V + iΩ ≥ 0`, i.e. every symplectic eigenvalue is at least one.
    pub fn is_physical(&self) -> bool {
        symplectic_eigenvalues(&self.matrix)
            .map(|nu| nu.iter().all(|&v| v >= 1.0 - PHYSICALITY_TOL))
            .unwrap_or(false)
    }

    /// Largest absolute entry difference over both matrix and mean.
    pub fn max_abs_diff(&self, other: &CovMat) -> f64 {
        if self.matrix.shape() != other.matrix.shape() {
            return f64::INFINITY;
        }
        let dm = (&self.matrix - &other.matrix).amax();
        let dv = (&self.mean - &other.mean).amax();
        dm.max(dv)
    }
}

/// Symplectic form `⊕ [[0, 1], [-1, 0]]` for `modes` modes.
pub fn omega(modes: usize) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(2 * modes, 2 * modes);
    for k in 0..modes {
        w[(2 * k, 2 * k + 1)] = 1.0;
        w[(2 * k + 1, 2 * k)] = -1.0;
    }
    w
}

pub fn vacuum_cm() -> CovMat {
    CovMat::centered(DMatrix::identity(2, 2)).expect("identity is a valid covariance matrix")
}

/// Coherent state `|β⟩`: vacuum noise, mean `√2 (Re β, Im β)`.
pub fn coherent_cm(beta: Complex64) -> CovMat {
    let s = std::f64::consts::SQRT_2;
    CovMat::new(DMatrix::identity(2, 2), DVector::from_vec(vec![s * beta.re, s * beta.im]))
        .expect("valid coherent covariance")
}

/// Thermal state with `V = ν I`, mean photon number `(ν - 1)/2`.
pub fn thermal_cm(nu: f64) -> Result<CovMat> {
    if !(nu >= 1.0) {
        return Err(invalid(format!("thermal state needs ν ≥ 1, got {nu}")));
    }
    CovMat::centered(DMatrix::identity(2, 2) * nu)
}

/// Two-mode squeezed vacuum: `cosh 2r` on the diagonal blocks and
/// `sinh 2r σ3` off the diagonal.
pub fn tmsv_cm(r: f64) -> CovMat {
    let c = (2.0 * r).cosh();
    let s = (2.0 * r).sinh();
    let mut v = DMatrix::identity(4, 4) * c;
    v[(0, 2)] = s;
    v[(2, 0)] = s;
    v[(1, 3)] = -s;
    v[(3, 1)] = -s;
    CovMat::centered(v).expect("tmsv is a valid covariance matrix")
}

/// Canonical families of single-mode phase-insensitive Gaussian channels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChannelFamily {
    /// Attenuator, `X = κI`, `0 < κ ≤ 1`.
    C1,
    /// Amplifier, `X = κI`, `κ ≥ 1`.
    C2,
    /// Phase conjugation, `X = κσ3`.
    D,
    /// Complete erasure, `X = 0`.
    A1,
    /// Homodyne-and-prepare, `X = (I + σ3)/2`.
    A2,
    /// Additive noise on `q` only, `Y = α(I + σ3)/2`.
    B1,
    /// Additive classical noise, `X = I`, `Y = αI`.
    B2,
}

impl ChannelFamily {
    pub const ALL: [ChannelFamily; 7] = [
        ChannelFamily::C1,
        ChannelFamily::C2,
        ChannelFamily::D,
        ChannelFamily::A1,
        ChannelFamily::A2,
        ChannelFamily::B1,
        ChannelFamily::B2,
    ];

    /// Whether the family is parametrised by a gain `κ`.
    pub fn has_kappa(self) -> bool {
        matches!(self, ChannelFamily::C1 | ChannelFamily::C2 | ChannelFamily::D)
    }

    pub fn name(self) -> &'static str {
        match self {
            ChannelFamily::C1 => "C1",
            ChannelFamily::C2 => "C2",
            ChannelFamily::D => "D",
            ChannelFamily::A1 => "A1",
            ChannelFamily::A2 => "A2",
            ChannelFamily::B1 => "B1",
            ChannelFamily::B2 => "B2",
        }
    }
}

impl std::fmt::Display for ChannelFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ChannelFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ChannelFamily::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| invalid(format!("unknown channel family `{s}`")))
    }
}

/// A canonical channel `V ↦ XᵀVX + Y`, `d ↦ Xᵀd`.
///
/// Construction validates the parameter domain of the family; complete
/// positivity is a separate question answered by [`is_cp`].
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianChannel {
    family: ChannelFamily,
    kappa: f64,
    alpha: f64,
    x: Matrix2<f64>,
    y: Matrix2<f64>,
}

impl GaussianChannel {
    /// `kappa` is ignored for the `A` and `B` families.
    pub fn new(family: ChannelFamily, kappa: f64, alpha: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(invalid(format!("α must be finite and non-negative, got {alpha}")));
        }
        if family.has_kappa() && !(kappa.is_finite() && kappa > 0.0) {
            return Err(invalid(format!("κ must be positive and finite, got {kappa}")));
        }
        let id = Matrix2::identity();
        let (kappa, x, y) = match family {
            ChannelFamily::C1 => {
                if kappa > 1.0 {
                    return Err(invalid(format!("attenuator needs κ ≤ 1, got {kappa}")));
                }
                (kappa, id * kappa, id * alpha)
            }
            ChannelFamily::C2 => {
                if kappa < 1.0 {
                    return Err(invalid(format!("amplifier needs κ ≥ 1, got {kappa}")));
                }
                (kappa, id * kappa, id * alpha)
            }
            ChannelFamily::D => (kappa, sigma3() * kappa, id * alpha),
            ChannelFamily::A1 => (0.0, Matrix2::zeros(), id * alpha),
            ChannelFamily::A2 => (1.0, (id + sigma3()) * 0.5, id * alpha),
            ChannelFamily::B1 => (1.0, id, (id + sigma3()) * (0.5 * alpha)),
            ChannelFamily::B2 => (1.0, id, id * alpha),
        };
        Ok(GaussianChannel { family, kappa, alpha, x, y })
    }

    /// Quantum-limited member of a gain family: the smallest CP noise.
    pub fn quantum_limited(family: ChannelFamily, kappa: f64) -> Result<Self> {
        let alpha = match family {
            ChannelFamily::C1 | ChannelFamily::C2 => (kappa * kappa - 1.0).abs(),
            ChannelFamily::D => kappa * kappa + 1.0,
            ChannelFamily::A1 | ChannelFamily::A2 => 1.0,
            ChannelFamily::B1 | ChannelFamily::B2 => 0.0,
        };
        Self::new(family, kappa, alpha)
    }

    /// Recognises a raw `(X, Y)` pair as one of the canonical families.
    ///
    /// Reduction of arbitrary pairs to canonical form is not attempted.
    pub fn from_matrices(x: Matrix2<f64>, y: Matrix2<f64>) -> Result<Self> {
        let tol = 1e-12;
        let close = |a: &Matrix2<f64>, b: &Matrix2<f64>| (a - b).amax() <= tol * a.amax().max(1.0);
        let id = Matrix2::identity();
        let s3 = sigma3();
        let a = y[(0, 0)];
        let (family, kappa) = if close(&y, &((id + s3) * (0.5 * a))) && close(&x, &id) && y[(1, 1)].abs() <= tol && a > tol {
            (ChannelFamily::B1, 1.0)
        } else if !close(&y, &(id * a)) {
            return Err(Error::Unsupported(
                "Y is not proportional to the identity; non-canonical channels are not reduced".into(),
            ));
        } else if close(&x, &Matrix2::zeros()) {
            (ChannelFamily::A1, 0.0)
        } else if close(&x, &((id + s3) * 0.5)) {
            (ChannelFamily::A2, 1.0)
        } else if close(&x, &(id * x[(0, 0)])) && x[(0, 0)] > 0.0 {
            let k = x[(0, 0)];
            if (k - 1.0).abs() <= tol {
                (ChannelFamily::B2, 1.0)
            } else if k < 1.0 {
                (ChannelFamily::C1, k)
            } else {
                (ChannelFamily::C2, k)
            }
        } else if close(&x, &(s3 * x[(0, 0)])) && x[(0, 0)] > 0.0 {
            (ChannelFamily::D, x[(0, 0)])
        } else {
            return Err(Error::Unsupported("X is not of canonical form".into()));
        };
        Self::new(family, kappa, a)
    }

    pub fn family(&self) -> ChannelFamily {
        self.family
    }

    /// Gain; 0 for `A1` and 1 for `A2`, `B1`, `B2`.
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn x(&self) -> &Matrix2<f64> {
        &self.x
    }

    pub fn y(&self) -> &Matrix2<f64> {
        &self.y
    }

    /// The same channel with a different noise parameter.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::new(self.family, self.kappa, alpha)
    }
}

/// JSON description of a channel: `{family, kappa, alpha}` or `{X, Y}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChannelSpec {
    Named {
        family: ChannelFamily,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        kappa: Option<f64>,
        alpha: f64,
    },
    Matrices {
        #[serde(rename = "X")]
        x: [[f64; 2]; 2],
        #[serde(rename = "Y")]
        y: [[f64; 2]; 2],
    },
}

impl ChannelSpec {
    pub fn build(&self) -> Result<GaussianChannel> {
        match *self {
            ChannelSpec::Named { family, kappa, alpha } => {
                let kappa = match (family.has_kappa(), kappa) {
                    (true, Some(k)) => k,
                    (true, None) => return Err(invalid(format!("family {family} needs κ"))),
                    (false, _) => 1.0,
                };
                GaussianChannel::new(family, kappa, alpha)
            }
            ChannelSpec::Matrices { x, y } => {
                let m = |a: [[f64; 2]; 2]| Matrix2::new(a[0][0], a[0][1], a[1][0], a[1][1]);
                GaussianChannel::from_matrices(m(x), m(y))
            }
        }
    }
}

impl From<&GaussianChannel> for ChannelSpec {
    fn from(ch: &GaussianChannel) -> Self {
        ChannelSpec::Named {
            family: ch.family,
            kappa: ch.family.has_kappa().then_some(ch.kappa),
            alpha: ch.alpha,
        }
    }
}

fn to_dyn(m: &Matrix2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(2, 2, |i, j| m[(i, j)])
}

/// `V ↦ XᵀVX + Y`, `d ↦ Xᵀd`. A two-mode input is transformed on mode 1 only.
pub fn apply_channel_cm(ch: &GaussianChannel, v: &CovMat) -> CovMat {
    let n = v.matrix.nrows();
    let x = to_dyn(&ch.x);
    let y = to_dyn(&ch.y);
    let mut big_x = DMatrix::identity(n, n);
    let mut big_y = DMatrix::zeros(n, n);
    big_x.view_mut((0, 0), (2, 2)).copy_from(&x);
    big_y.view_mut((0, 0), (2, 2)).copy_from(&y);
    let m = big_x.transpose() * &v.matrix * &big_x + big_y;
    let d = big_x.transpose() * &v.mean;
    CovMat::new(m, d).expect("channel action preserves symmetry")
}

/// `(Φ ⊗ 1)` acting on the two-mode squeezed vacuum of squeezing `r`.
pub fn one_sided_output_cm(ch: &GaussianChannel, r: f64) -> CovMat {
    apply_channel_cm(ch, &tmsv_cm(r))
}

/// Symplectic eigenvalues in ascending order, one per mode.
///
/// Uses the Cholesky factor `V = LLᵀ` and the Hermitian spectrum of
/// `Lᵀ(iΩ)L`, whose eigenvalues are `±ν`. Falls back to the general spectrum
/// of `ΩV` when `V` is not positive definite.
pub fn symplectic_eigenvalues(v: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = v.nrows();
    if n % 2 != 0 || v.ncols() != n || n == 0 {
        return Err(Error::NotPhysical(format!("{}x{} is not a phase-space matrix", n, v.ncols())));
    }
    let modes = n / 2;
    let w = omega(modes);
    let mut nus: Vec<f64> = if let Some(ch) = nalgebra::Cholesky::new(v.clone()) {
        let l = ch.l();
        let m = l.transpose() * &w * &l;
        let h: DMatrix<Complex64> = m.map(|e| Complex64::new(0.0, e));
        let eig = nalgebra::SymmetricEigen::new(h);
        let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().filter(|e| *e > 0.0).collect();
        if ev.len() != modes {
            ev = eig.eigenvalues.iter().map(|e| e.abs()).collect();
            ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
            ev.truncate(modes);
        }
        ev
    } else {
        let ev = (&w * v).complex_eigenvalues();
        let mut ev: Vec<f64> = ev.iter().map(|z| z.im.abs()).collect();
        ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
        ev.truncate(modes);
        ev
    };
    nus.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(nus)
}

/// Symplectic eigenvalues of the partial transpose on mode 2 (sign flip of `p2`).
pub fn pt_symplectic_eigenvalues(v: &DMatrix<f64>) -> Result<Vec<f64>> {
    if v.nrows() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, found: v.nrows() });
    }
    let mut pt = v.clone();
    for k in 0..4 {
        if k != 3 {
            pt[(k, 3)] = -pt[(k, 3)];
            pt[(3, k)] = -pt[(3, k)];
        }
    }
    symplectic_eigenvalues(&pt)
}

/// `det Y - (det X - 1)²`; non-negative exactly for CP channels.
pub fn cp_margin(ch: &GaussianChannel) -> f64 {
    let dx = ch.x.determinant();
    ch.y.determinant() - (dx - 1.0) * (dx - 1.0)
}

/// Complete positivity, `det Y ≥ (det X - 1)²`, inclusive within [`PHYSICALITY_TOL`].
pub fn is_cp(ch: &GaussianChannel) -> bool {
    cp_margin(ch) >= -PHYSICALITY_TOL
}

/// CP with the bound saturated.
pub fn is_quantum_limited(ch: &GaussianChannel) -> bool {
    cp_margin(ch).abs() <= PHYSICALITY_TOL
}

/// Errors unless the channel is completely positive.
pub fn require_cp(ch: &GaussianChannel) -> Result<()> {
    if is_cp(ch) {
        Ok(())
    } else {
        let dx = ch.x.determinant();
        Err(Error::NotCompletelyPositive { det_y: ch.y.determinant(), bound: (dx - 1.0).powi(2) })
    }
}

/// Smallest partially transposed symplectic eigenvalue of the one-sided
/// output at squeezing `r`.
pub fn eb_pt_minimum(ch: &GaussianChannel, r: f64) -> f64 {
    let v = one_sided_output_cm(ch, r);
    pt_symplectic_eigenvalues(v.matrix()).expect("4x4 input")[0]
}

/// Entanglement breaking: the one-sided output of a squeezed reference stays
/// PPT. Evaluated at `r = 1`.
pub fn is_entanglement_breaking(ch: &GaussianChannel) -> Result<bool> {
    is_entanglement_breaking_at(ch, EB_TEST_SQUEEZING)
}

pub fn is_entanglement_breaking_at(ch: &GaussianChannel, r: f64) -> Result<bool> {
    require_cp(ch)?;
    if !(r > 0.0) {
        return Err(invalid("entanglement-breaking test needs r > 0"));
    }
    Ok(eb_pt_minimum(ch, r) >= 1.0 - PHYSICALITY_TOL)
}

/// The smallest `α` at which the family becomes entanglement breaking, if
/// the answer is a threshold. `Some(0.0)` for families that are always EB,
/// `None` for `B1`, which never is.
pub fn eb_noise_threshold(family: ChannelFamily, kappa: f64) -> Option<f64> {
    match family {
        ChannelFamily::C1 | ChannelFamily::C2 => Some(kappa * kappa + 1.0),
        ChannelFamily::B2 => Some(2.0),
        ChannelFamily::D | ChannelFamily::A1 | ChannelFamily::A2 => Some(0.0),
        ChannelFamily::B1 => None,
    }
}

/// The passive transformation that diagonalises the one-sided output.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diagonalizer {
    /// Two-mode squeezer of strength `mu`; `mu0` is its `r → ∞` limit.
    Squeezer { mu: f64, mu0: f64 },
    /// Beamsplitter of angle `theta`; `theta0` is its `r → ∞` limit.
    BeamSplitter { theta: f64, theta0: f64 },
}

/// Normal-mode data of the one-sided output at squeezing `r`.
///
/// The output equals `U† (ρ_th(ν₊) ⊗ ρ_th(ν₋)) U` with `U` given by
/// [`Diagonalizer`]; `x± = √((ν± - 1)/(ν± + 1))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagParams {
    pub r: f64,
    pub nu_plus: f64,
    pub nu_minus: f64,
    pub x_plus: f64,
    pub x_minus: f64,
    /// `cosh² r (1 - x₊²)(1 - x₋²)`.
    pub norm: f64,
    pub rotation: Diagonalizer,
}

impl DiagParams {
    pub fn tanh_mu(&self) -> Option<f64> {
        match self.rotation {
            Diagonalizer::Squeezer { mu, .. } => Some(mu.tanh()),
            Diagonalizer::BeamSplitter { .. } => None,
        }
    }
}

/// `x(ν) = √((ν - 1)/(ν + 1))`, with round-off below one snapped to zero.
pub fn thermal_ratio(nu: f64) -> f64 {
    let d = nu - 1.0;
    if d <= 1e-12 * nu {
        0.0
    } else {
        (d / (nu + 1.0)).sqrt()
    }
}

/// Normal-mode decomposition for `C1`, `C2`, `D` (and `B2` as `κ = 1`).
pub fn diag_params(ch: &GaussianChannel, r: f64) -> Result<DiagParams> {
    require_cp(ch)?;
    if !(r >= 0.0 && r.is_finite()) {
        return Err(invalid(format!("squeezing must be finite and non-negative, got {r}")));
    }
    let k = ch.kappa;
    let a = ch.alpha;
    let c = (2.0 * r).cosh();
    let s = (2.0 * r).sinh();
    // ν₊ν₋ = sqrt(det V) = αc + κ², which lets the smaller eigenvalue be
    // recovered without cancellation.
    let prod = a * c + k * k;
    let (nu_plus, nu_minus, rotation) = match ch.family {
        ChannelFamily::C1 | ChannelFamily::C2 | ChannelFamily::B2 => {
            let u = a + (k * k + 1.0) * c;
            let z = ((u - 2.0 * k * s) * (u + 2.0 * k * s)).max(0.0).sqrt();
            let w = a + (k * k - 1.0) * c;
            let (np, nm) = if w >= 0.0 {
                let np = 0.5 * (z + w);
                (np, prod / np)
            } else {
                let nm = 0.5 * (z - w);
                (prod / nm, nm)
            };
            let mu = 0.5 * (2.0 * k * s / u).atanh();
            let mu0 = match ch.family {
                ChannelFamily::C2 => (1.0 / k).atanh(),
                _ => k.atanh(),
            };
            (np, nm, Diagonalizer::Squeezer { mu, mu0 })
        }
        ChannelFamily::D => {
            let t = a + (k * k - 1.0) * c;
            let z = (t * t + 4.0 * k * k * s * s).sqrt();
            let w = a + (k * k + 1.0) * c;
            let np = 0.5 * (w + z);
            let theta = 0.5 * (-2.0 * k * s).atan2(a - (1.0 - k * k) * c);
            let theta0 = (-1.0f64).atan2(k);
            (np, prod / np, Diagonalizer::BeamSplitter { theta, theta0 })
        }
        other => {
            return Err(Error::Unsupported(format!(
                "normal-mode decomposition is defined for C1, C2, D and B2, not {other}"
            )))
        }
    };
    let x_plus = thermal_ratio(nu_plus);
    let x_minus = thermal_ratio(nu_minus);
    let ch2 = r.cosh().powi(2);
    Ok(DiagParams {
        r,
        nu_plus,
        nu_minus,
        x_plus,
        x_minus,
        norm: ch2 * (1.0 - x_plus * x_plus) * (1.0 - x_minus * x_minus),
        rotation,
    })
}

/// Symplectic matrix of the diagonalising transformation, such that the
/// one-sided output is `S diag(ν₊, ν₊, ν₋, ν₋) Sᵀ`.
pub fn diagonalizer_symplectic(rot: &Diagonalizer) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(4, 4);
    match *rot {
        Diagonalizer::Squeezer { mu, .. } => {
            let (ch, sh) = (mu.cosh(), mu.sinh());
            for (i, sg) in [(0usize, 1.0), (1, -1.0)] {
                m[(i, i)] = ch;
                m[(i + 2, i + 2)] = ch;
                m[(i, i + 2)] = sg * sh;
                m[(i + 2, i)] = sg * sh;
            }
        }
        Diagonalizer::BeamSplitter { theta, .. } => {
            let (c, s) = (theta.cos(), theta.sin());
            for i in 0..2 {
                m[(i, i)] = c;
                m[(i + 2, i + 2)] = c;
                m[(i, i + 2)] = s;
                m[(i + 2, i)] = -s;
            }
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ch(f: ChannelFamily, k: f64, a: f64) -> GaussianChannel {
        GaussianChannel::new(f, k, a).unwrap()
    }

    #[test]
    fn tmsv_spectrum() {
        for r in [0.0, 0.3, 1.0, 2.5] {
            let v = tmsv_cm(r);
            let nu = symplectic_eigenvalues(v.matrix()).unwrap();
            assert!(nu.iter().all(|n| (n - 1.0).abs() < 1e-10), "{nu:?}");
            let pt = pt_symplectic_eigenvalues(v.matrix()).unwrap();
            assert!((pt[0] - (-2.0 * r).exp()).abs() < 1e-10 * (2.0 * r).exp());
        }
    }

    #[test]
    fn fallback_path_agrees_with_cholesky() {
        let v = tmsv_cm(0.7);
        let w = omega(2);
        let ev = (&w * v.matrix()).complex_eigenvalues();
        let mut nu: Vec<f64> = ev.iter().map(|z| z.im.abs()).collect();
        nu.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let direct = symplectic_eigenvalues(v.matrix()).unwrap();
        assert!((nu[0] - direct[0]).abs() < 1e-10);
        assert!((nu[3] - direct[1]).abs() < 1e-10);
    }

    #[test]
    fn thermal_spectrum_is_nu() {
        let v = thermal_cm(3.5).unwrap();
        let nu = symplectic_eigenvalues(v.matrix()).unwrap();
        assert!((nu[0] - 3.5).abs() < 1e-12);
    }

    #[test]
    fn channel_action_on_coherent_and_thermal() {
        let d = ch(ChannelFamily::D, 0.8, 2.0);
        let out = apply_channel_cm(&d, &coherent_cm(Complex64::new(1.0, 0.5)));
        let s2 = std::f64::consts::SQRT_2;
        assert!((out.mean()[0] - 0.8 * s2).abs() < 1e-14);
        assert!((out.mean()[1] + 0.8 * 0.5 * s2).abs() < 1e-14);
        assert!((out.matrix()[(0, 0)] - (0.64 + 2.0)).abs() < 1e-14);
        let a2 = ch(ChannelFamily::A2, 1.0, 1.0);
        let out = apply_channel_cm(&a2, &vacuum_cm());
        assert!((out.matrix()[(0, 0)] - 2.0).abs() < 1e-14);
        assert!((out.matrix()[(1, 1)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cp_boundaries() {
        assert!(is_cp(&ch(ChannelFamily::C1, 0.5, 0.75)));
        assert!(is_quantum_limited(&ch(ChannelFamily::C1, 0.5, 0.75)));
        assert!(!is_cp(&ch(ChannelFamily::C1, 0.5, 0.4)));
        assert!(is_cp(&ch(ChannelFamily::D, 0.7, 1.49)));
        assert!(!is_cp(&ch(ChannelFamily::D, 0.7, 1.48)));
        assert!(!is_cp(&ch(ChannelFamily::A1, 0.0, 0.99)));
        assert!(is_cp(&ch(ChannelFamily::B1, 0.0, 0.0)));
    }

    #[test]
    fn eb_thresholds() {
        let c1 = ch(ChannelFamily::C1, 0.5, 1.25);
        for r in [0.3, 1.0, 2.0] {
            assert!((eb_pt_minimum(&c1, r) - 1.0).abs() < 1e-9);
        }
        assert!(is_entanglement_breaking(&c1).unwrap());
        assert!(!is_entanglement_breaking(&c1.with_alpha(1.2).unwrap()).unwrap());
        assert!(is_entanglement_breaking(&ch(ChannelFamily::D, 0.7, 1.49)).unwrap());
        assert!(!is_entanglement_breaking(&ch(ChannelFamily::B1, 1.0, 5.0)).unwrap());
        assert!(is_entanglement_breaking(&ch(ChannelFamily::A1, 0.0, 1.0)).unwrap());
        assert!(is_entanglement_breaking(&ch(ChannelFamily::A2, 0.0, 1.0)).unwrap());
        assert!(is_entanglement_breaking(&ch(ChannelFamily::C1, 0.5, 0.4)).is_err());
    }

    #[test]
    fn raw_matrices_are_recognised() {
        let c = ch(ChannelFamily::D, 0.7, 2.0);
        let back = GaussianChannel::from_matrices(*c.x(), *c.y()).unwrap();
        assert_eq!(back, c);
        let b1 = ch(ChannelFamily::B1, 1.0, 0.5);
        assert_eq!(GaussianChannel::from_matrices(*b1.x(), *b1.y()).unwrap(), b1);
        let bad = Matrix2::new(1.0, 0.2, 0.0, 1.0);
        assert!(GaussianChannel::from_matrices(bad, Matrix2::identity()).is_err());
    }

    #[test]
    fn diag_params_at_zero_squeezing() {
        let c1 = diag_params(&ch(ChannelFamily::C1, 0.6, 0.9), 0.0).unwrap();
        assert_eq!(c1.tanh_mu(), Some(0.0));
        assert!((c1.nu_plus - (0.36 + 0.9)).abs() < 1e-14);
        assert!((c1.nu_minus - 1.0).abs() < 1e-14);
        let d = diag_params(&ch(ChannelFamily::D, 0.6, 2.0), 0.0).unwrap();
        let Diagonalizer::BeamSplitter { theta, .. } = d.rotation else { panic!() };
        assert_eq!(theta, 0.0);
    }

    #[test]
    fn quantum_limited_closed_forms() {
        let r: f64 = 0.9;
        let t = r.tanh();
        let k: f64 = 0.7;
        let att = diag_params(&GaussianChannel::quantum_limited(ChannelFamily::C1, k).unwrap(), r).unwrap();
        assert!((att.norm - 1.0 / (1.0 - k * k * t * t)).abs() < 1e-12);
        assert!((att.tanh_mu().unwrap() - k * t).abs() < 1e-12);
        let x = ((1.0 - k * k) / (1.0 / (t * t) - k * k)).sqrt();
        assert!((att.x_minus - x).abs() < 1e-12 && att.x_plus == 0.0);

        let k: f64 = 1.4;
        let amp = diag_params(&GaussianChannel::quantum_limited(ChannelFamily::C2, k).unwrap(), r).unwrap();
        assert!((amp.norm - 1.0 / (k * k - t * t)).abs() < 1e-12);
        assert!((amp.tanh_mu().unwrap() - t / k).abs() < 1e-12);
        let x = ((k * k - 1.0) / (k * k - t * t)).sqrt();
        assert!((amp.x_plus - x).abs() < 1e-12 && amp.x_minus == 0.0);

        let k: f64 = 0.8;
        let pc = diag_params(&GaussianChannel::quantum_limited(ChannelFamily::D, k).unwrap(), r).unwrap();
        assert!((pc.norm - 1.0 / (1.0 + k * k)).abs() < 1e-12);
        let x = ((k * k + t * t) / (k * k + 1.0)).sqrt();
        assert!((pc.x_plus - x).abs() < 1e-12 && pc.x_minus == 0.0);
        let Diagonalizer::BeamSplitter { theta, .. } = pc.rotation else { panic!() };
        let n = (k * k + t * t).sqrt();
        assert!((theta.sin() + t / n).abs() < 1e-12);
        assert!((theta.cos() - k / n).abs() < 1e-12);
    }

    #[test]
    fn diagonalizer_reproduces_output() {
        let cases = [
            ch(ChannelFamily::C1, 0.6, 0.9),
            ch(ChannelFamily::C1, 0.3, 2.5),
            ch(ChannelFamily::C2, 1.3, 1.2),
            ch(ChannelFamily::C2, 1.7, 1.89),
            ch(ChannelFamily::B2, 1.0, 0.7),
            ch(ChannelFamily::D, 0.8, 1.64),
            ch(ChannelFamily::D, 1.5, 4.0),
            ch(ChannelFamily::D, 0.4, 1.16),
        ];
        for c in cases {
            for r in [0.2, 0.8, 2.0] {
                let p = diag_params(&c, r).unwrap();
                let s = diagonalizer_symplectic(&p.rotation);
                let d = DMatrix::from_diagonal(&DVector::from_vec(vec![
                    p.nu_plus, p.nu_plus, p.nu_minus, p.nu_minus,
                ]));
                let rebuilt = &s * d * s.transpose();
                let v = one_sided_output_cm(&c, r);
                let err = (rebuilt - v.matrix()).amax();
                assert!(err < 1e-9 * v.matrix().amax(), "{c:?} r={r} err={err}");
                // symplectic
                let w = omega(2);
                assert!((&s * &w * s.transpose() - &w).amax() < 1e-12);
            }
        }
    }

    #[test]
    fn channel_spec_forms() {
        let named: ChannelSpec = serde_json::from_str(r#"{"family": "C1", "kappa": 0.5, "alpha": 0.75}"#).unwrap();
        let raw: ChannelSpec = serde_json::from_str(r#"{"X": [[0.5, 0], [0, 0.5]], "Y": [[0.75, 0], [0, 0.75]]}"#).unwrap();
        assert_eq!(named.build().unwrap(), raw.build().unwrap());
        let b1: ChannelSpec = serde_json::from_str(r#"{"family": "B1", "alpha": 2}"#).unwrap();
        assert_eq!(b1.build().unwrap().family(), ChannelFamily::B1);
        let missing: ChannelSpec = serde_json::from_str(r#"{"family": "D", "alpha": 2}"#).unwrap();
        assert!(missing.build().is_err());
        let ch = GaussianChannel::new(ChannelFamily::D, 0.7, 1.49).unwrap();
        assert_eq!(ChannelSpec::from(&ch).build().unwrap(), ch);
    }
}
