//! Kraus families: storage, action on density matrices, completeness.

mod families;
mod file;
mod quadrature;

pub use families::*;
pub use file::{load_family, read_family, save_family, write_family, FamilyFile};
pub use quadrature::*;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{CMatrix, CVector, FockOperator};
use crate::phase_space::GaussianChannel;

/// Where a monomial operator sends the number state `|j⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// `|j⟩ ↦ |j + s⟩`
    Shift(isize),
    /// `|j⟩ ↦ |t - j⟩`
    Reflect(isize),
}

impl Target {
    #[inline]
    pub fn of(self, j: usize) -> isize {
        match self {
            Target::Shift(s) => j as isize + s,
            Target::Reflect(t) => t - j as isize,
        }
    }

    /// `self ∘ inner`: first `inner`, then `self`.
    pub fn after(self, inner: Target) -> Target {
        match (self, inner) {
            (Target::Shift(a), Target::Shift(b)) => Target::Shift(a + b),
            (Target::Shift(a), Target::Reflect(u)) => Target::Reflect(u + a),
            (Target::Reflect(t), Target::Shift(s)) => Target::Reflect(t - s),
            (Target::Reflect(t), Target::Reflect(u)) => Target::Shift(t - u),
        }
    }
}

/// Operator with at most one non-zero entry per column:
/// `K|j⟩ = coeffs[j] |target(j)⟩` for inputs `j < dim`.
///
/// Targets outside `0..dim` are kept in `coeffs`. They drop out of the
/// truncated action but still count in `K†K`, which is therefore exact on
/// the retained input levels.
#[derive(Clone, Debug, PartialEq)]
pub struct Monomial {
    pub target: Target,
    pub coeffs: CVector,
}

impl Monomial {
    fn out_index(&self, j: usize, dim: usize) -> Option<usize> {
        let t = self.target.of(j);
        (t >= 0 && (t as usize) < dim).then_some(t as usize)
    }

    fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.norm_sqr() == 0.0)
    }
}

/// One Kraus operator on a `dim`-level truncation.
#[derive(Clone, Debug, PartialEq)]
pub enum KrausOp {
    Dense(CMatrix),
    Monomial(Monomial),
    /// `|ket⟩⟨bra|`
    RankOne { ket: CVector, bra: CVector },
}

impl KrausOp {
    pub fn dim(&self) -> usize {
        match self {
            KrausOp::Dense(m) => m.ncols(),
            KrausOp::Monomial(m) => m.coeffs.len(),
            KrausOp::RankOne { bra, .. } => bra.len(),
        }
    }

    /// Truncated matrix `P K P`.
    pub fn to_dense(&self) -> CMatrix {
        match self {
            KrausOp::Dense(m) => m.clone(),
            KrausOp::Monomial(m) => {
                let n = m.coeffs.len();
                let mut d = CMatrix::zeros(n, n);
                for j in 0..n {
                    if let Some(i) = m.out_index(j, n) {
                        d[(i, j)] = m.coeffs[j];
                    }
                }
                d
            }
            KrausOp::RankOne { ket, bra } => ket * bra.adjoint(),
        }
    }

    /// `K|j⟩` restricted to the truncation.
    pub fn column(&self, j: usize) -> CVector {
        match self {
            KrausOp::Dense(m) => m.column(j).clone_owned(),
            KrausOp::Monomial(m) => {
                let n = m.coeffs.len();
                let mut v = CVector::zeros(n);
                if let Some(i) = m.out_index(j, n) {
                    v[i] = m.coeffs[j];
                }
                v
            }
            KrausOp::RankOne { ket, bra } => ket * bra[j].conj(),
        }
    }

    fn is_zero(&self) -> bool {
        match self {
            KrausOp::Dense(m) => m.iter().all(|z| z.norm_sqr() == 0.0),
            KrausOp::Monomial(m) => m.is_zero(),
            KrausOp::RankOne { ket, bra } => {
                ket.iter().all(|z| z.norm_sqr() == 0.0) || bra.iter().all(|z| z.norm_sqr() == 0.0)
            }
        }
    }

    /// Adds `w K ρ K†` into `out`.
    fn accumulate_action(&self, w: f64, rho: &CMatrix, out: &mut CMatrix) {
        match self {
            KrausOp::Dense(k) => {
                let t = k * rho * k.adjoint();
                *out += t * Complex64::new(w, 0.0);
            }
            KrausOp::Monomial(m) => {
                let n = m.coeffs.len();
                let idx: Vec<(usize, usize, Complex64)> = (0..n)
                    .filter_map(|j| m.out_index(j, n).map(|i| (j, i, m.coeffs[j])))
                    .filter(|(_, _, c)| c.norm_sqr() != 0.0)
                    .collect();
                for &(j, i, cj) in &idx {
                    let wc = cj * w;
                    for &(l, k, cl) in &idx {
                        out[(i, k)] += wc * rho[(j, l)] * cl.conj();
                    }
                }
            }
            KrausOp::RankOne { ket, bra } => {
                let s = (bra.adjoint() * rho * bra)[(0, 0)];
                let t = ket * ket.adjoint();
                *out += t * (s * w);
            }
        }
    }

    /// Adds `w K† O K` into `out`.
    fn accumulate_heisenberg(&self, w: f64, o: &CMatrix, out: &mut CMatrix) {
        match self {
            KrausOp::Dense(k) => {
                let t = k.adjoint() * o * k;
                *out += t * Complex64::new(w, 0.0);
            }
            KrausOp::Monomial(m) => {
                let n = m.coeffs.len();
                let idx: Vec<(usize, usize, Complex64)> = (0..n)
                    .filter_map(|j| m.out_index(j, n).map(|i| (j, i, m.coeffs[j])))
                    .filter(|(_, _, c)| c.norm_sqr() != 0.0)
                    .collect();
                for &(j, i, cj) in &idx {
                    for &(l, k, cl) in &idx {
                        out[(j, l)] += cj.conj() * o[(i, k)] * cl * w;
                    }
                }
            }
            KrausOp::RankOne { ket, bra } => {
                let s = (ket.adjoint() * o * ket)[(0, 0)];
                let t = bra * bra.adjoint();
                *out += t * (s * w);
            }
        }
    }

    /// Adds `w K†K` into `out`, using untruncated columns where they are known.
    fn accumulate_gram(&self, w: f64, out: &mut CMatrix) {
        match self {
            KrausOp::Dense(k) => {
                let t = k.adjoint() * k;
                *out += t * Complex64::new(w, 0.0);
            }
            KrausOp::Monomial(m) => {
                let n = m.coeffs.len();
                for j in 0..n {
                    if m.target.of(j) >= 0 {
                        out[(j, j)] += m.coeffs[j].norm_sqr() * w;
                    }
                }
            }
            KrausOp::RankOne { ket, bra } => {
                let s = ket.norm_squared();
                let t = bra * bra.adjoint();
                *out += t * Complex64::new(s * w, 0.0);
            }
        }
    }

    /// `second ∘ self`.
    fn then(&self, second: &KrausOp) -> KrausOp {
        match (self, second) {
            (KrausOp::Monomial(a), KrausOp::Monomial(b)) => {
                let n = a.coeffs.len();
                let coeffs = CVector::from_fn(n, |j, _| match a.out_index(j, n) {
                    Some(i) => a.coeffs[j] * b.coeffs[i],
                    None => Complex64::new(0.0, 0.0),
                });
                KrausOp::Monomial(Monomial { target: b.target.after(a.target), coeffs })
            }
            _ => KrausOp::Dense(second.to_dense() * self.to_dense()),
        }
    }
}

/// Label carried by each operator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TermLabel {
    Index(usize),
    Pair(usize, usize),
    Point(f64),
    Point2(f64, f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct KrausTerm {
    pub label: TermLabel,
    /// Quadrature weight; 1 for discrete families.
    pub weight: f64,
    pub op: KrausOp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexKind {
    Single,
    Double,
    Continuous1d,
    Continuous2d,
}

/// Squeezing of the reference state the family was built from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Squeezing {
    Finite(f64),
    Limit,
}

/// How the operators were obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    /// Single-index families of quantum-limited channels.
    QuantumLimited,
    /// Double-index families from the normal-mode decomposition.
    NormalMode,
    /// Rank-one measure-and-prepare operators.
    RankOne,
    /// Homodyne-and-prepare operators `|x/√2⟩⟨x|`.
    Homodyne,
    /// Gaussian-weighted displacements.
    Displacement,
    /// Products of two families.
    Product,
}

/// An ordered list of weighted Kraus operators on a common truncation.
///
/// For `Squeezing::Limit` the family represents the channel itself and
/// `Σ w K†K = I`. For `Squeezing::Finite(r)` it reproduces the one-sided
/// output at squeezing `r`, and `Σ w K†K = diag(tanh^{2j} r)`.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausFamily {
    pub channel: GaussianChannel,
    pub squeezing: Squeezing,
    pub construction: Construction,
    pub index_kind: IndexKind,
    pub dim: usize,
    pub terms: Vec<KrausTerm>,
}

impl KrausFamily {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Diagonal of `Σ w K†K` expected on exact completeness.
    pub fn completeness_target(&self) -> Vec<f64> {
        match self.squeezing {
            Squeezing::Limit => vec![1.0; self.dim],
            Squeezing::Finite(r) => {
                let t2 = r.tanh().powi(2);
                let mut v = Vec::with_capacity(self.dim);
                let mut p = 1.0;
                for _ in 0..self.dim {
                    v.push(p);
                    p *= t2;
                }
                v
            }
        }
    }

    /// Removes operators that are identically zero.
    pub(crate) fn prune(mut self) -> Self {
        self.terms.retain(|t| t.weight != 0.0 && !t.op.is_zero());
        self
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if n != self.dim {
            Err(Error::DimensionMismatch { expected: self.dim, found: n })
        } else {
            Ok(())
        }
    }

    /// `Φ†(O) = Σ w K† O K`.
    pub fn heisenberg(&self, o: &CMatrix) -> Result<CMatrix> {
        self.check_dim(o.nrows())?;
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for t in &self.terms {
            t.op.accumulate_heisenberg(t.weight, o, &mut out);
        }
        Ok(out)
    }

    /// `Σ w K†K`.
    pub fn gram(&self) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for t in &self.terms {
            t.op.accumulate_gram(t.weight, &mut out);
        }
        out
    }

    /// `Φ(|j⟩⟨k|) = Σ w K|j⟩(K|k⟩)†`.
    pub fn apply_to_outer(&self, j: usize, k: usize) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for t in &self.terms {
            let a = t.op.column(j);
            let b = if j == k { a.clone() } else { t.op.column(k) };
            out += (a * b.adjoint()) * Complex64::new(t.weight, 0.0);
        }
        out
    }

    /// Applies the family, then operators that act after it.
    pub fn compose(&self, second: &KrausFamily) -> Result<KrausFamily> {
        if self.dim != second.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: second.dim });
        }
        let x = self.channel.x() * second.channel.x();
        let y = second.channel.x().transpose() * self.channel.y() * second.channel.x() + second.channel.y();
        let channel = GaussianChannel::from_matrices(x, y)?;
        let single = |l: TermLabel| match l {
            TermLabel::Index(i) => Some(i),
            _ => None,
        };
        let mut terms = Vec::with_capacity(self.len() * second.len());
        for (a_i, a) in self.terms.iter().enumerate() {
            for (b_i, b) in second.terms.iter().enumerate() {
                let label = match (single(a.label), single(b.label)) {
                    (Some(i), Some(j)) => TermLabel::Pair(i, j),
                    _ => TermLabel::Pair(a_i, b_i),
                };
                terms.push(KrausTerm { label, weight: a.weight * b.weight, op: a.op.then(&b.op) });
            }
        }
        Ok(KrausFamily {
            channel,
            squeezing: Squeezing::Limit,
            construction: Construction::Product,
            index_kind: IndexKind::Double,
            dim: self.dim,
            terms,
        }
        .prune())
    }
}

/// `ρ ↦ Σ w K ρ K†`.
///
/// The output's `leakage` adds `Tr(ρ · target) - Tr(output)`: the trace that
/// left through truncation or index cutoffs.
pub fn apply_kraus(fam: &KrausFamily, rho: &FockOperator) -> Result<FockOperator> {
    fam.check_dim(rho.dim())?;
    let mut out = CMatrix::zeros(fam.dim, fam.dim);
    for t in &fam.terms {
        t.op.accumulate_action(t.weight, &rho.matrix, &mut out);
    }
    let target = fam.completeness_target();
    let expected: f64 = (0..fam.dim).map(|j| target[j] * rho.matrix[(j, j)].re).sum();
    let deficit = expected - out.trace().re;
    Ok(FockOperator { matrix: out, leakage: rho.leakage + deficit.max(0.0) })
}

/// Deviation of `Σ w K†K` from its target.
#[derive(Clone, Debug)]
pub struct CompletenessDefect {
    /// `Σ w K†K - target`.
    pub matrix: CMatrix,
}

impl CompletenessDefect {
    /// Largest diagonal and off-diagonal deviation on the first `levels` levels.
    pub fn on_levels(&self, levels: usize) -> (f64, f64) {
        let n = levels.min(self.matrix.nrows());
        let mut diag = 0.0f64;
        let mut off = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let e = self.matrix[(i, j)].norm();
                if i == j {
                    diag = diag.max(e);
                } else {
                    off = off.max(e);
                }
            }
        }
        (diag, off)
    }

    /// Largest deviation of either kind on the first `levels` levels.
    pub fn max_abs(&self, levels: usize) -> f64 {
        let (d, o) = self.on_levels(levels);
        d.max(o)
    }
}

/// `Σ w K†K` minus the identity (limit families) or `diag(tanh^{2j} r)`.
pub fn completeness_defect(fam: &KrausFamily) -> CompletenessDefect {
    let mut m = fam.gram();
    for (j, t) in fam.completeness_target().into_iter().enumerate() {
        m[(j, j)] -= t;
    }
    CompletenessDefect { matrix: m }
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{coherent_state, max_abs};

    fn mono(target: Target, c: &[f64]) -> KrausOp {
        KrausOp::Monomial(Monomial {
            target,
            coeffs: CVector::from_iterator(c.len(), c.iter().map(|&x| Complex64::new(x, 0.0))),
        })
    }

    #[test]
    fn monomial_matches_dense_action() {
        let ops = [
            mono(Target::Shift(-1), &[0.0, 0.5, 0.7, 0.2, 0.9]),
            mono(Target::Shift(2), &[0.3, 0.1, 0.2, 0.4, 0.6]),
            mono(Target::Reflect(3), &[0.2, 0.4, 0.1, 0.8, 0.0]),
        ];
        let rho = coherent_state(Complex64::new(0.6, 0.3), 5).unwrap().density();
        let o = crate::fock::annihilation(5);
        for op in ops {
            let d = op.to_dense();
            let mut a = CMatrix::zeros(5, 5);
            op.accumulate_action(0.5, &rho.matrix, &mut a);
            let want = &d * &rho.matrix * d.adjoint() * Complex64::new(0.5, 0.0);
            assert!(max_abs(&(a - want)) < 1e-15);
            let mut h = CMatrix::zeros(5, 5);
            op.accumulate_heisenberg(1.0, &o, &mut h);
            assert!(max_abs(&(h - d.adjoint() * &o * &d)) < 1e-15);
        }
    }

    #[test]
    fn monomial_composition() {
        let a = mono(Target::Shift(-1), &[0.0, 0.5, 0.7, 0.2, 0.9]);
        let b = mono(Target::Reflect(3), &[0.2, 0.4, 0.1, 0.8, 0.3]);
        for (x, y) in [(&a, &b), (&b, &a), (&a, &a), (&b, &b)] {
            let p = x.then(y);
            let want = y.to_dense() * x.to_dense();
            assert!(max_abs(&(p.to_dense() - want)) < 1e-15);
        }
    }

    #[test]
    fn target_algebra() {
        let ts = [Target::Shift(2), Target::Shift(-3), Target::Reflect(4), Target::Reflect(-1)];
        for &a in &ts {
            for &b in &ts {
                for j in 0..6 {
                    assert_eq!(a.after(b).of(j), {
                        let m = b.of(j);
                        match a {
                            Target::Shift(s) => m + s,
                            Target::Reflect(t) => t - m,
                        }
                    });
                }
            }
        }
    }
}
