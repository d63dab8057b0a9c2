//! Fock-basis families: quantum-limited single-index families and the
//! double-index normal-mode families of noisy channels.

use num_complex::Complex64;

use super::{Construction, IndexKind, KrausFamily, KrausOp, KrausTerm, Monomial, Squeezing, Target, TermLabel};
use crate::error::{invalid, Error, Result};
use crate::fock::combinatorics::{ln_binomial, ln_pow};
use crate::fock::elements::{bs_coefficient, tms_coefficient};
use crate::fock::CVector;
use crate::phase_space::{diag_params, require_cp, ChannelFamily, Diagonalizer, GaussianChannel};

/// Index ranges `n1 ∈ 0..n1`, `n2 ∈ 0..n2` for double-index families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Cutoffs {
    pub n1: usize,
    pub n2: usize,
}

impl Cutoffs {
    pub fn square(n: usize) -> Self {
        Cutoffs { n1: n, n2: n }
    }
}

fn check_dims(dim: usize, n_max: usize) -> Result<()> {
    if dim == 0 || n_max == 0 {
        return Err(invalid("dimension and index cutoff must be at least 1"));
    }
    Ok(())
}

fn check_r(r: f64) -> Result<()> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(invalid(format!("finite-r families need 0 < r < ∞, got {r}")));
    }
    Ok(())
}

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn single_index(channel: GaussianChannel, squeezing: Squeezing, dim: usize, ops: Vec<KrausOp>) -> KrausFamily {
    let terms = ops
        .into_iter()
        .enumerate()
        .map(|(n, op)| KrausTerm { label: TermLabel::Index(n), weight: 1.0, op })
        .collect();
    KrausFamily {
        channel,
        squeezing,
        construction: Construction::QuantumLimited,
        index_kind: IndexKind::Single,
        dim,
        terms,
    }
    .prune()
}

/// Lowering ladder `Σ_m c(m) |m⟩⟨m + n|` with `c` given in log space.
fn lowering(n: usize, dim: usize, ln_c: impl Fn(usize) -> f64) -> KrausOp {
    let coeffs = CVector::from_fn(dim, |j, _| if j >= n { real(ln_c(j - n).exp()) } else { real(0.0) });
    KrausOp::Monomial(Monomial { target: Target::Shift(-(n as isize)), coeffs })
}

/// Raising ladder `Σ_m c(m) |m + n⟩⟨m|`.
fn raising(n: usize, dim: usize, ln_c: impl Fn(usize) -> f64) -> KrausOp {
    let coeffs = CVector::from_fn(dim, |m, _| real(ln_c(m).exp()));
    KrausOp::Monomial(Monomial { target: Target::Shift(n as isize), coeffs })
}

/// Anti-diagonal `Σ_{m ≤ n} c(m) |n - m⟩⟨m|`.
fn reflection(n: usize, dim: usize, c: impl Fn(usize) -> f64) -> KrausOp {
    let coeffs = CVector::from_fn(dim, |m, _| if m <= n { real(c(m)) } else { real(0.0) });
    KrausOp::Monomial(Monomial { target: Target::Reflect(n as isize), coeffs })
}

fn gain_channel(family: ChannelFamily, kappa: f64) -> Result<GaussianChannel> {
    GaussianChannel::quantum_limited(family, kappa)
}

/// Quantum-limited attenuator, `r → ∞`:
/// `B_n = Σ_m √C(m+n, n) κ^m (1-κ²)^{n/2} |m⟩⟨m+n|`.
pub fn attenuator_ql(kappa: f64, dim: usize, n_max: usize) -> Result<KrausFamily> {
    check_dims(dim, n_max)?;
    let ch = gain_channel(ChannelFamily::C1, kappa)?;
    let loss = (1.0 - kappa * kappa).max(0.0).sqrt();
    let ops = (0..n_max.min(dim))
        .map(|n| lowering(n, dim, |m| 0.5 * ln_binomial(m + n, n) + ln_pow(kappa, m) + ln_pow(loss, n)))
        .collect();
    Ok(single_index(ch, Squeezing::Limit, dim, ops))
}

/// Quantum-limited attenuator at finite squeezing,
/// `T_n = √N x^n Σ_m √C(m+n, n) tanh^m μ sech^{n+1} μ |m⟩⟨m+n|`
/// with `tanh μ = κ tanh r`, `x = √((1-κ²)/(coth² r - κ²))`,
/// `N = 1/(1 - κ² tanh² r)`.
pub fn attenuator_finite_r(r: f64, kappa: f64, dim: usize, n_max: usize) -> Result<KrausFamily> {
    check_dims(dim, n_max)?;
    check_r(r)?;
    let ch = gain_channel(ChannelFamily::C1, kappa)?;
    let t = r.tanh();
    let tm = kappa * t;
    let ln_sech = 0.5 * (1.0 - tm * tm).ln();
    let x = ((1.0 - kappa * kappa) / (1.0 / (t * t) - kappa * kappa)).max(0.0).sqrt();
    let ln_norm = -0.5 * (1.0 - tm * tm).ln();
    let ops = (0..n_max.min(dim))
        .map(|n| {
            lowering(n, dim, |m| {
                ln_norm + ln_pow(x, n) + 0.5 * ln_binomial(m + n, n) + ln_pow(tm, m) + ln_sech * (n + 1) as f64
            })
        })
        .collect();
    Ok(single_index(ch, Squeezing::Finite(r), dim, ops))
}

/// Quantum-limited amplifier, `r → ∞`:
/// `A_n = Σ_m √C(m+n, n) κ^{-(m+1)} (√(κ²-1)/κ)^n |m+n⟩⟨m|`.
///
/// Operators with `n ≥ dim` are kept: their columns leave the truncation but
/// still enter `Σ A_n†A_n`.
pub fn amplifier_ql(kappa: f64, dim: usize, n_max: usize) -> Result<KrausFamily> {
    check_dims(dim, n_max)?;
    let ch = gain_channel(ChannelFamily::C2, kappa)?;
    let ln_k = kappa.ln();
    let ln_g = ((kappa * kappa - 1.0).sqrt() / kappa).ln();
    let ops = (0..n_max)
        .map(|n| {
            raising(n, dim, |m| {
                0.5 * ln_binomial(m + n, n) - (m + 1) as f64 * ln_k + if n == 0 { 0.0 } else { n as f64 * ln_g }
            })
        })
        .collect();
    Ok(single_index(ch, Squeezing::Limit, dim, ops))
}

/// Quantum-limited amplifier at finite squeezing,
/// `T_n = √N x^n Σ_m √C(m+n, n) tanh^m μ sech^{n+1} μ |m+n⟩⟨m|`
/// with `tanh μ = tanh r / κ`, `x = √((κ²-1)/(κ² - tanh² r))`,
/// `N = 1/(κ² - tanh² r)`.
pub fn amplifier_finite_r(r: f64, kappa: f64, dim: usize, n_max: usize) -> Result<KrausFamily> {
    check_dims(dim, n_max)?;
    check_r(r)?;
    let ch = gain_channel(ChannelFamily::C2, kappa)?;
    let t = r.tanh();
    let tm = t / kappa;
    let ln_sech = 0.5 * (1.0 - tm * tm).ln();
    let d = kappa * kappa - t * t;
    let x = ((kappa * kappa - 1.0) / d).sqrt();
    let ln_norm = -0.5 * d.ln();
    let ops = (0..n_max)
        .map(|n| {
            raising(n, dim, |m| {
                ln_norm + ln_pow(x, n) + 0.5 * ln_binomial(m + n, n) + ln_pow(tm, m) + ln_sech * (n + 1) as f64
            })
        })
        .collect();
    Ok(single_index(ch, Squeezing::Finite(r), dim, ops))
}

fn pc_coefficient(n: usize, m: usize, ln_pref: f64, minus_sin: f64, cos: f64) -> f64 {
    (ln_pref + 0.5 * ln_binomial(n, m) + ln_pow(minus_sin, m) + ln_pow(cos, n - m)).exp()
}

/// Quantum-limited phase conjugation, `r → ∞`:
/// `C_n = (1+κ²)^{-1/2} Σ_{m ≤ n} √C(n, m) (κ/√(1+κ²))^{n-m} (1/√(1+κ²))^m |n-m⟩⟨m|`.
pub fn phase_conj_ql(kappa: f64, dim: usize, n_max: usize) -> Result<KrausFamily> {
    check_dims(dim, n_max)?;
    let ch = gain_channel(ChannelFamily::D, kappa)?;
    let s = (1.0 + kappa * kappa).sqrt();
    let (ms, c) = (1.0 / s, kappa / s);
    let ln_pref = -s.ln();
    let ops = (0..n_max).map(|n| reflection(n, dim, |m| pc_coefficient(n, m, ln_pref, ms, c))).collect();
    Ok(single_index(ch, Squeezing::Limit, dim, ops))
}

/// Quantum-limited phase conjugation at finite squeezing,
/// `T_n = √N x^n Σ_{m ≤ n} √C(n, m) (-sin θ)^m cos^{n-m} θ |n-m⟩⟨m|`
/// with `N = 1/(1+κ²)`, `x = √((κ² + tanh² r)/(κ² + 1))`,
/// `sin θ = -tanh r/√(κ² + tanh² r)`, `cos θ = κ/√(κ² + tanh² r)`.
pub fn phase_conj_finite_r(r: f64, kappa: f64, dim: usize, n_max: usize) -> Result<KrausFamily> {
    check_dims(dim, n_max)?;
    check_r(r)?;
    let ch = gain_channel(ChannelFamily::D, kappa)?;
    let t = r.tanh();
    let h = (kappa * kappa + t * t).sqrt();
    let (ms, c) = (t / h, kappa / h);
    let x = (h * h / (kappa * kappa + 1.0)).sqrt();
    let ln_norm = -0.5 * (1.0 + kappa * kappa).ln();
    let ops = (0..n_max)
        .map(|n| {
            let ln_pref = ln_norm + ln_pow(x, n);
            reflection(n, dim, |m| pc_coefficient(n, m, ln_pref, ms, c))
        })
        .collect();
    Ok(single_index(ch, Squeezing::Finite(r), dim, ops))
}

/// Quantum-limited family for a gain channel, at finite `r` or in the limit.
pub fn quantum_limited_family(
    family: ChannelFamily,
    kappa: f64,
    squeezing: Squeezing,
    dim: usize,
    n_max: usize,
) -> Result<KrausFamily> {
    match (family, squeezing) {
        (ChannelFamily::C1, Squeezing::Limit) => attenuator_ql(kappa, dim, n_max),
        (ChannelFamily::C1, Squeezing::Finite(r)) => attenuator_finite_r(r, kappa, dim, n_max),
        (ChannelFamily::C2, Squeezing::Limit) => amplifier_ql(kappa, dim, n_max),
        (ChannelFamily::C2, Squeezing::Finite(r)) => amplifier_finite_r(r, kappa, dim, n_max),
        (ChannelFamily::D, Squeezing::Limit) => phase_conj_ql(kappa, dim, n_max),
        (ChannelFamily::D, Squeezing::Finite(r)) => phase_conj_finite_r(r, kappa, dim, n_max),
        (f, _) => Err(Error::Unsupported(format!("no single-index family for {f}"))),
    }
}

/// Coefficient rule `γ(m; n1, n2)` of a double-index family.
enum Rule {
    /// `Σ_{m1} γ(m1) |m1⟩⟨n2 + m1 - n1|`, squeezer coefficients.
    Squeezer { ln_pref: Box<dyn Fn(usize, usize) -> f64>, tanh: f64, sech: f64 },
    /// `Σ_{m2 ≤ n1+n2} γ(m2) |n1 + n2 - m2⟩⟨m2|`, beamsplitter coefficients.
    BeamSplitter { ln_pref: Box<dyn Fn(usize, usize) -> f64>, sin: f64, cos: f64 },
}

fn double_index(channel: GaussianChannel, squeezing: Squeezing, dim: usize, cut: Cutoffs, rule: Rule) -> Result<KrausFamily> {
    check_dims(dim, cut.n1.min(cut.n2))?;
    let mut terms = Vec::new();
    for n1 in 0..cut.n1 {
        for n2 in 0..cut.n2 {
            let op = match &rule {
                Rule::Squeezer { ln_pref, tanh, sech } => {
                    let lp = ln_pref(n1, n2);
                    if lp == f64::NEG_INFINITY || n2 >= dim + n1 {
                        continue;
                    }
                    let pref = lp.exp();
                    let coeffs = CVector::from_fn(dim, |j, _| {
                        if j + n1 < n2 {
                            return real(0.0);
                        }
                        let m1 = j + n1 - n2;
                        real(pref * tms_coefficient(*tanh, *sech, m1, n1, n2))
                    });
                    KrausOp::Monomial(Monomial { target: Target::Shift(n1 as isize - n2 as isize), coeffs })
                }
                Rule::BeamSplitter { ln_pref, sin, cos } => {
                    let lp = ln_pref(n1, n2);
                    if lp == f64::NEG_INFINITY {
                        continue;
                    }
                    let pref = lp.exp();
                    let total = n1 + n2;
                    reflection(total, dim, |m2| pref * bs_coefficient(*sin, *cos, m2, n1, n2))
                }
            };
            terms.push(KrausTerm { label: TermLabel::Pair(n1, n2), weight: 1.0, op });
        }
    }
    Ok(KrausFamily {
        channel,
        squeezing,
        construction: Construction::NormalMode,
        index_kind: IndexKind::Double,
        dim,
        terms,
    }
    .prune())
}

/// Double-index family of a noisy `C1`, `C2` or `D` channel in the `r → ∞`
/// limit.
///
/// `C1`: `γ = √(2/(α+1-κ²)) ((α+κ²-1)/(α+1-κ²))^{n1/2} h[μ0]`, `tanh μ0 = κ`.
/// `C2`: `γ = √(2/(α+κ²-1)) ((α-κ²+1)/(α+κ²-1))^{n2/2} h[μ0]`, `tanh μ0 = 1/κ`.
/// `D`:  `γ = √(2/(α+κ²+1)) ((α-κ²-1)/(α+κ²+1))^{n2/2} h[θ0]`,
/// `sin θ0 = -1/√(1+κ²)`, `cos θ0 = κ/√(1+κ²)`.
pub fn noisy_family(ch: &GaussianChannel, dim: usize, cut: Cutoffs) -> Result<KrausFamily> {
    require_cp(ch)?;
    let k = ch.kappa();
    let a = ch.alpha();
    let k2 = k * k;
    let rule = match ch.family() {
        ChannelFamily::C1 if k < 1.0 => {
            let base = 0.5 * (2.0 / (a + 1.0 - k2)).ln();
            let ratio = ((a + k2 - 1.0) / (a + 1.0 - k2)).max(0.0);
            Rule::Squeezer {
                ln_pref: Box::new(move |n1, _| base + 0.5 * ln_pow(ratio, n1)),
                tanh: k,
                sech: (1.0 - k2).sqrt(),
            }
        }
        ChannelFamily::C2 if k > 1.0 => {
            let base = 0.5 * (2.0 / (a + k2 - 1.0)).ln();
            let ratio = ((a - k2 + 1.0) / (a + k2 - 1.0)).max(0.0);
            Rule::Squeezer {
                ln_pref: Box::new(move |_, n2| base + 0.5 * ln_pow(ratio, n2)),
                tanh: 1.0 / k,
                sech: (1.0 - 1.0 / k2).sqrt(),
            }
        }
        ChannelFamily::D => {
            let base = 0.5 * (2.0 / (a + k2 + 1.0)).ln();
            let ratio = ((a - k2 - 1.0) / (a + k2 + 1.0)).max(0.0);
            let s = (1.0 + k2).sqrt();
            Rule::BeamSplitter {
                ln_pref: Box::new(move |_, n2| base + 0.5 * ln_pow(ratio, n2)),
                sin: -1.0 / s,
                cos: k / s,
            }
        }
        f => {
            return Err(Error::Unsupported(format!(
                "the limit normal-mode family needs C1 with κ < 1, C2 with κ > 1, or D; got {f} with κ = {k}"
            )))
        }
    };
    double_index(ch.clone(), Squeezing::Limit, dim, cut, rule)
}

/// Double-index family at finite squeezing:
/// `γ = √N x₊^{n1} x₋^{n2} h[μ or θ]` with the normal-mode data of
/// [`diag_params`].
pub fn noisy_family_finite_r(ch: &GaussianChannel, r: f64, dim: usize, cut: Cutoffs) -> Result<KrausFamily> {
    check_r(r)?;
    let p = diag_params(ch, r)?;
    let ln_n = 0.5 * p.norm.ln();
    let (xp, xm) = (p.x_plus, p.x_minus);
    let ln_pref = Box::new(move |n1: usize, n2: usize| ln_n + ln_pow(xp, n1) + ln_pow(xm, n2));
    let rule = match p.rotation {
        Diagonalizer::Squeezer { mu, .. } => {
            let t = mu.tanh();
            Rule::Squeezer { ln_pref, tanh: t, sech: (1.0 - t * t).sqrt() }
        }
        Diagonalizer::BeamSplitter { theta, .. } => Rule::BeamSplitter { ln_pref, sin: theta.sin(), cos: theta.cos() },
    };
    double_index(ch.clone(), Squeezing::Finite(r), dim, cut, rule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::max_abs;
    use crate::kraus::completeness_defect;

    fn dense_diff(a: &KrausFamily, b: &KrausFamily) -> f64 {
        assert_eq!(a.len(), b.len());
        a.terms
            .iter()
            .zip(&b.terms)
            .map(|(x, y)| max_abs(&(x.op.to_dense() - y.op.to_dense())))
            .fold(0.0, f64::max)
    }

    /// Keep only `n1 = 0` or `n2 = 0` terms, relabelled by the other index.
    fn single_row(f: &KrausFamily, first_zero: bool) -> KrausFamily {
        let mut g = f.clone();
        g.terms.retain(|t| matches!(t.label, TermLabel::Pair(a, b) if if first_zero { a == 0 } else { b == 0 }));
        for t in &mut g.terms {
            if let TermLabel::Pair(a, b) = t.label {
                t.label = TermLabel::Index(if first_zero { b } else { a });
            }
        }
        g
    }

    #[test]
    fn noisy_limit_reduces_to_quantum_limited() {
        let dim = 25;
        let att = noisy_family(&GaussianChannel::quantum_limited(ChannelFamily::C1, 0.6).unwrap(), dim, Cutoffs::square(25)).unwrap();
        assert!(att.terms.iter().all(|t| matches!(t.label, TermLabel::Pair(0, _))));
        assert!(dense_diff(&single_row(&att, true), &attenuator_ql(0.6, dim, 25).unwrap()) < 1e-13);

        let amp = noisy_family(&GaussianChannel::quantum_limited(ChannelFamily::C2, 1.4).unwrap(), dim, Cutoffs::square(25)).unwrap();
        assert!(dense_diff(&single_row(&amp, false), &amplifier_ql(1.4, dim, 25).unwrap()) < 1e-13);

        let pc = noisy_family(&GaussianChannel::quantum_limited(ChannelFamily::D, 0.8).unwrap(), dim, Cutoffs::square(25)).unwrap();
        assert!(dense_diff(&single_row(&pc, false), &phase_conj_ql(0.8, dim, 25).unwrap()) < 1e-13);
    }

    #[test]
    fn finite_r_general_path_matches_closed_forms() {
        let dim = 20;
        for r in [0.4, 1.3] {
            let c1 = GaussianChannel::quantum_limited(ChannelFamily::C1, 0.7).unwrap();
            let g = noisy_family_finite_r(&c1, r, dim, Cutoffs::square(20)).unwrap();
            assert!(dense_diff(&single_row(&g, true), &attenuator_finite_r(r, 0.7, dim, 20).unwrap()) < 1e-12);

            let c2 = GaussianChannel::quantum_limited(ChannelFamily::C2, 1.3).unwrap();
            let g = noisy_family_finite_r(&c2, r, dim, Cutoffs::square(20)).unwrap();
            assert!(dense_diff(&single_row(&g, false), &amplifier_finite_r(r, 1.3, dim, 20).unwrap()) < 1e-12);

            let d = GaussianChannel::quantum_limited(ChannelFamily::D, 0.8).unwrap();
            let g = noisy_family_finite_r(&d, r, dim, Cutoffs::square(20)).unwrap();
            assert!(dense_diff(&single_row(&g, false), &phase_conj_finite_r(r, 0.8, dim, 20).unwrap()) < 1e-12);
        }
    }

    #[test]
    fn finite_r_completeness_is_tanh_powers() {
        let dim = 30;
        let fams = [
            attenuator_finite_r(0.7, 0.5, dim, 30).unwrap(),
            amplifier_finite_r(0.7, 1.5, dim, 400).unwrap(),
            phase_conj_finite_r(0.7, 0.9, dim, 200).unwrap(),
        ];
        for f in &fams {
            let d = completeness_defect(f);
            let (diag, off) = d.on_levels(15);
            assert!(diag < 1e-10 && off < 1e-12, "{:?}: {diag} {off}", f.channel.family());
        }
    }

    #[test]
    fn noisy_completeness() {
        let cases = [
            (ChannelFamily::C1, 0.7, 1.0),
            (ChannelFamily::C2, 1.3, 1.2),
            (ChannelFamily::D, 0.8, 2.5),
        ];
        for (f, k, a) in cases {
            let ch = GaussianChannel::new(f, k, a).unwrap();
            let fam = noisy_family(&ch, 50, Cutoffs { n1: 100, n2: 50 }).unwrap();
            let d = completeness_defect(&fam).max_abs(15);
            assert!(d < 1e-6, "{f}: {d}");
            let fin = noisy_family_finite_r(&ch, 0.8, 50, Cutoffs { n1: 100, n2: 50 }).unwrap();
            let d = completeness_defect(&fin).max_abs(15);
            assert!(d < 1e-6, "{f} finite: {d}");
        }
    }
}
