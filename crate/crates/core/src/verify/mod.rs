//! Independent checks of Kraus families against phase-space predictions.

pub mod acceptance;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fock::{annihilation, coherent_state, max_abs, fock_state, thermal_state, CMatrix, FockOperator};
use crate::kraus::{
    apply_kraus, attenuator_ql, amplifier_ql, b2_displacement, eb_rank_one, noisy_family, Cutoffs, DiscGrid,
    KrausFamily, LineGrid, Squeezing, TermLabel, quantum_limited_family,
};
use crate::phase_space::{
    apply_channel_cm, coherent_cm, one_sided_output_cm, thermal_cm, vacuum_cm, ChannelFamily, CovMat,
    GaussianChannel,
};

/// Population in the top truncation level above which moments are flagged.
pub const MOMENT_LEAKAGE_WARN: f64 = 1e-6;

/// Input states used by the checks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestState {
    Vacuum,
    Coherent { re: f64, im: f64 },
    Thermal { nu: f64 },
    Fock { n: usize },
}

impl TestState {
    pub fn coherent(beta: f64) -> Self {
        TestState::Coherent { re: beta, im: 0.0 }
    }

    pub fn density(&self, dim: usize) -> Result<FockOperator> {
        match *self {
            TestState::Vacuum => Ok(fock_state(0, dim)?.density()),
            TestState::Coherent { re, im } => Ok(coherent_state(Complex64::new(re, im), dim)?.density()),
            TestState::Thermal { nu } => thermal_state(nu, dim),
            TestState::Fock { n } => Ok(fock_state(n, dim)?.density()),
        }
    }

    /// Phase-space description, `None` for non-Gaussian states.
    pub fn cm(&self) -> Option<CovMat> {
        match *self {
            TestState::Vacuum => Some(vacuum_cm()),
            TestState::Coherent { re, im } => Some(coherent_cm(Complex64::new(re, im))),
            TestState::Thermal { nu } => thermal_cm(nu).ok(),
            TestState::Fock { .. } => None,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            TestState::Vacuum => "vacuum".into(),
            TestState::Coherent { re, im } if im == 0.0 => format!("coherent({re})"),
            TestState::Coherent { re, im } => format!("coherent({re}{im:+}i)"),
            TestState::Thermal { nu } => format!("thermal({nu})"),
            TestState::Fock { n } => format!("fock({n})"),
        }
    }
}

impl std::str::FromStr for TestState {
    type Err = Error;
    /// `vacuum`, `coherent:RE[,IM]`, `thermal:NU`, `fock:N`.
    fn from_str(s: &str) -> Result<Self> {
        let (head, tail) = s.split_once(':').unwrap_or((s, ""));
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| invalid(format!("bad number in state `{s}`")));
        match head.trim() {
            "vacuum" => Ok(TestState::Vacuum),
            "coherent" => {
                let (re, im) = tail.split_once(',').unwrap_or((tail, "0"));
                Ok(TestState::Coherent { re: num(re)?, im: num(im)? })
            }
            "thermal" => Ok(TestState::Thermal { nu: num(tail)? }),
            "fock" => Ok(TestState::Fock {
                n: tail.trim().parse().map_err(|_| invalid(format!("bad level in `{s}`")))?,
            }),
            _ => Err(invalid(format!("unknown state `{s}`"))),
        }
    }
}

/// Outcome of one check. `pass` is `value <= tolerance` by construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub check: String,
    pub params: BTreeMap<String, serde_json::Value>,
    pub metric: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Trace lost to truncation and index cutoffs in the compared states.
    pub leakage: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl VerificationReport {
    pub fn new(check: &str, metric: &str, value: f64, tolerance: f64) -> Self {
        VerificationReport {
            check: check.into(),
            params: BTreeMap::new(),
            metric: metric.into(),
            value,
            tolerance,
            pass: value <= tolerance,
            leakage: 0.0,
            note: None,
        }
    }

    pub fn param(mut self, key: &str, v: impl Into<serde_json::Value>) -> Self {
        self.params.insert(key.into(), v.into());
        self
    }

    pub fn with_leakage(mut self, leakage: f64) -> Self {
        self.leakage = leakage;
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// One CSV row: check, metric, value, tolerance, pass, leakage, params.
    pub fn csv_row(&self) -> String {
        let params: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!(
            "{},{},{:.6e},{:.3e},{},{:.3e},\"{}\"",
            self.check,
            self.metric,
            self.value,
            self.tolerance,
            self.pass,
            self.leakage,
            params.join(";").replace('"', "'")
        )
    }

    pub const CSV_HEADER: &'static str = "check,metric,value,tolerance,pass,leakage,params";
}

/// `½ Σ |λ_i|` of the Hermitian part of `a - b`.
pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    let d = a - b;
    let h = (&d + d.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = nalgebra::SymmetricEigen::new(h);
    0.5 * eig.eigenvalues.iter().map(|l| l.abs()).sum::<f64>()
}

/// Number of singular values above `cutoff` times the largest.
pub fn numerical_rank(m: &CMatrix, cutoff: f64) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.iter().cloned().fold(0.0, f64::max);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > cutoff * top).count()
}

/// Covariance matrix estimated from a truncated density matrix.
#[derive(Clone, Debug)]
pub struct MomentEstimate {
    pub cm: CovMat,
    /// Recorded leakage plus the population of the top level.
    pub leakage: f64,
    pub warning: Option<String>,
}

/// Single-mode CM from `⟨a⟩`, `⟨a²⟩`, `⟨a†a⟩`.
pub fn single_mode_cm(a: Complex64, a2: Complex64, n: f64) -> CovMat {
    let vqq = 2.0 * a2.re + 2.0 * n + 1.0 - 4.0 * a.re * a.re;
    let vpp = -2.0 * a2.re + 2.0 * n + 1.0 - 4.0 * a.im * a.im;
    let vqp = 2.0 * a2.im - 4.0 * a.re * a.im;
    let s = std::f64::consts::SQRT_2;
    CovMat::new(DMatrix::from_row_slice(2, 2, &[vqq, vqp, vqp, vpp]), DVector::from_vec(vec![s * a.re, s * a.im]))
        .expect("symmetric by construction")
}

/// Two-mode moments: mode 1 `a`, mode 2 `b`.
#[derive(Clone, Copy, Debug, Default)]
pub struct TwoModeMoments {
    pub a: Complex64,
    pub a2: Complex64,
    pub na: f64,
    pub b: Complex64,
    pub b2: Complex64,
    pub nb: f64,
    pub ab: Complex64,
    pub ab_dag: Complex64,
}

pub fn two_mode_cm(m: &TwoModeMoments) -> CovMat {
    let first = single_mode_cm(m.a, m.a2, m.na);
    let second = single_mode_cm(m.b, m.b2, m.nb);
    let mut v = DMatrix::zeros(4, 4);
    v.view_mut((0, 0), (2, 2)).copy_from(first.matrix());
    v.view_mut((2, 2), (2, 2)).copy_from(second.matrix());
    let mean = [first.mean()[0], first.mean()[1], second.mean()[0], second.mean()[1]];
    let cross = [
        [m.ab.re + m.ab_dag.re, m.ab.im - m.ab_dag.im],
        [m.ab.im + m.ab_dag.im, -m.ab.re + m.ab_dag.re],
    ];
    for i in 0..2 {
        for j in 0..2 {
            let c = 2.0 * cross[i][j] - 2.0 * mean[i] * mean[2 + j];
            v[(i, 2 + j)] = c;
            v[(2 + j, i)] = c;
        }
    }
    CovMat::new(v, DVector::from_row_slice(&mean)).expect("symmetric by construction")
}

/// CM of a single-mode density matrix; moments are normalised by the trace.
pub fn cm_from_density(rho: &FockOperator) -> Result<MomentEstimate> {
    let n = rho.dim();
    if n < 2 {
        return Err(invalid("need at least two levels to form moments"));
    }
    let a = annihilation(n);
    let tr = rho.trace().re;
    if !(tr > 0.0) {
        return Err(Error::NotPhysical("density matrix has non-positive trace".into()));
    }
    let ex = |o: &CMatrix| (&rho.matrix * o).trace() / tr;
    let ea = ex(&a);
    let ea2 = ex(&(&a * &a));
    let en = ex(&(a.adjoint() * &a)).re;
    let top = rho.matrix[(n - 1, n - 1)].re / tr;
    let leakage = rho.leakage + top.abs();
    let warning = (leakage > MOMENT_LEAKAGE_WARN)
        .then(|| format!("truncation leakage {leakage:.2e} exceeds {MOMENT_LEAKAGE_WARN:.0e}"));
    Ok(MomentEstimate { cm: single_mode_cm(ea, ea2, en), leakage, warning })
}

fn require_limit(fam: &KrausFamily) -> Result<()> {
    match fam.squeezing {
        Squeezing::Limit => Ok(()),
        Squeezing::Finite(_) => Err(invalid("finite-r families are not channels; use the completeness or Choi checks")),
    }
}

fn family_params(fam: &KrausFamily) -> BTreeMap<String, serde_json::Value> {
    let mut p = BTreeMap::new();
    p.insert("family".into(), fam.channel.family().name().into());
    p.insert("kappa".into(), fam.channel.kappa().into());
    p.insert("alpha".into(), fam.channel.alpha().into());
    p.insert("construction".into(), serde_json::to_value(fam.construction).unwrap());
    p.insert("dim".into(), fam.dim.into());
    p.insert("operators".into(), fam.len().into());
    p
}

/// Applies the family to `input` and compares the CM and mean extracted from
/// the output with `XᵀVX + Y`, `Xᵀd`.
pub fn oracle_equivalence(fam: &KrausFamily, input: TestState, tolerance: f64) -> Result<VerificationReport> {
    require_limit(fam)?;
    let cm_in = input.cm().ok_or_else(|| invalid("oracle check needs a Gaussian input"))?;
    let rho = input.density(fam.dim)?;
    let out = apply_kraus(fam, &rho)?;
    let est = cm_from_density(&out)?;
    let expected = apply_channel_cm(&fam.channel, &cm_in);
    let mut r = VerificationReport::new("oracle_equivalence", "max_abs_cm_and_mean", est.cm.max_abs_diff(&expected), tolerance)
        .with_leakage(est.leakage)
        .param("input", input.label());
    r.params.extend(family_params(fam));
    if let Some(w) = est.warning {
        r = r.with_note(w);
    }
    Ok(r)
}

/// Moments of `(Φ ⊗ 1)|Ψ_r⟩⟨Ψ_r|` on the truncated two-mode squeezed vacuum.
///
/// Uses `Tr[(Φ⊗1)(Ψ)(O₁⊗O₂)] = Tr[Ψ (Φ†(O₁) ⊗ O₂)]`, so only `Φ†` of a few
/// single-mode operators is needed rather than the full two-mode state.
pub fn choi_moments(fam: &KrausFamily, r: f64) -> Result<(TwoModeMoments, f64)> {
    let n = fam.dim;
    let t = r.tanh();
    let c: Vec<f64> = (0..n).map(|j| t.powi(j as i32)).collect();
    let z: f64 = c.iter().map(|x| x * x).sum();
    let a = annihilation(n);
    let id = CMatrix::identity(n, n);
    let h_id = fam.heisenberg(&id)?;
    let h_a = fam.heisenberg(&a)?;
    let h_a2 = fam.heisenberg(&(&a * &a))?;
    let h_n = fam.heisenberg(&(a.adjoint() * &a))?;
    // ⟨O₁⊗O₂⟩ = Σ_{jk} c_j c_k Φ†(O₁)_{kj} ⟨k|O₂|j⟩ / Z
    let pair = |h: &CMatrix, o2: &CMatrix| {
        let mut s = Complex64::new(0.0, 0.0);
        for j in 0..n {
            for k in 0..n {
                let e = o2[(k, j)];
                if e != Complex64::new(0.0, 0.0) {
                    s += h[(k, j)] * e * c[j] * c[k];
                }
            }
        }
        s / z
    };
    let norm = pair(&h_id, &id).re;
    let b = a.clone();
    let bd = a.adjoint();
    let m = TwoModeMoments {
        a: pair(&h_a, &id) / norm,
        a2: pair(&h_a2, &id) / norm,
        na: pair(&h_n, &id).re / norm,
        b: pair(&h_id, &b) / norm,
        b2: pair(&h_id, &(&b * &b)) / norm,
        nb: pair(&h_id, &(&bd * &b)).re / norm,
        ab: pair(&h_a, &b) / norm,
        ab_dag: pair(&h_a, &bd) / norm,
    };
    Ok((m, 1.0 - norm))
}

/// Compares the one-sided output CM built from the family with
/// [`one_sided_output_cm`].
pub fn choi_cm_check(fam: &KrausFamily, r: f64, tolerance: f64) -> Result<VerificationReport> {
    require_limit(fam)?;
    if !(r > 0.0) {
        return Err(invalid("Choi check needs r > 0"));
    }
    let (m, lost) = choi_moments(fam, r)?;
    let got = two_mode_cm(&m);
    let want = one_sided_output_cm(&fam.channel, r);
    let mut rep = VerificationReport::new("choi_cm", "max_abs_cm", got.max_abs_diff(&want), tolerance)
        .with_leakage(lost.max(0.0))
        .param("r", r);
    rep.params.extend(family_params(fam));
    Ok(rep)
}

/// Largest entry difference between the finite-r operators of a
/// quantum-limited gain family and their limit, over indices `n ≤ window` on
/// the leading `block × block` corner.
pub fn convergence_gap(family: ChannelFamily, kappa: f64, r: f64, window: usize, block: usize) -> Result<f64> {
    let fin = quantum_limited_family(family, kappa, Squeezing::Finite(r), block, window + 1)?;
    let lim = quantum_limited_family(family, kappa, Squeezing::Limit, block, window + 1)?;
    let pick = |f: &KrausFamily, n: usize| {
        f.terms
            .iter()
            .find(|t| t.label == TermLabel::Index(n))
            .map(|t| t.op.to_dense())
            .unwrap_or_else(|| CMatrix::zeros(block, block))
    };
    Ok((0..=window).map(|n| max_abs(&(pick(&fin, n) - pick(&lim, n)))).fold(0.0, f64::max))
}

/// Settings shared by the state-comparison checks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonConfig {
    pub dim: usize,
    pub cutoffs: Cutoffs,
    pub disc: DiscGrid,
    pub gaussian_2d: LineGrid,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        ComparisonConfig {
            dim: 60,
            cutoffs: Cutoffs { n1: 60, n2: 60 },
            disc: DiscGrid::DEFAULT,
            gaussian_2d: LineGrid::GAUSSIAN_2D,
        }
    }
}

fn compare_outputs(
    check: &str,
    a: &KrausFamily,
    b: &KrausFamily,
    states: &[TestState],
    tolerance: f64,
) -> Result<Vec<VerificationReport>> {
    states
        .iter()
        .map(|s| {
            let rho = s.density(a.dim)?;
            let oa = apply_kraus(a, &rho)?;
            let ob = apply_kraus(b, &rho)?;
            let d = trace_distance(&oa.matrix, &ob.matrix);
            Ok(VerificationReport::new(check, "trace_distance", d, tolerance)
                .with_leakage(oa.leakage.max(ob.leakage))
                .param("input", s.label()))
        })
        .collect()
}

/// Rank-one measure-and-prepare family against the double-index family of
/// the same channel at `α = κ² + 1`.
pub fn measure_prepare_equivalence(
    kappa: f64,
    states: &[TestState],
    cfg: &ComparisonConfig,
    tolerance: f64,
) -> Result<Vec<VerificationReport>> {
    let tag = if kappa < 1.0 {
        ChannelFamily::C1
    } else if kappa > 1.0 {
        ChannelFamily::C2
    } else {
        return Err(invalid("κ = 1 has no double-index family; use B2 directly"));
    };
    let ch = GaussianChannel::new(tag, kappa, kappa * kappa + 1.0)?;
    let rank_one = eb_rank_one(tag, kappa, cfg.dim, cfg.disc)?;
    let direct = noisy_family(&ch, cfg.dim, cfg.cutoffs)?;
    Ok(compare_outputs("measure_prepare", &rank_one, &direct, states, tolerance)?
        .into_iter()
        .map(|r| r.param("family", tag.name()).param("kappa", kappa).param("alpha", kappa * kappa + 1.0))
        .collect())
}

/// Direct family of the composite channel `C2(κ2) ∘ C1(κ1)`.
pub fn composite_reference(kappa1: f64, kappa2: f64, cfg: &ComparisonConfig) -> Result<KrausFamily> {
    let k = kappa1 * kappa2;
    let alpha = kappa2 * kappa2 * (1.0 - kappa1 * kappa1) + kappa2 * kappa2 - 1.0;
    if (k - 1.0).abs() < 1e-12 {
        b2_displacement(alpha, cfg.dim, cfg.gaussian_2d)
    } else {
        let tag = if k < 1.0 { ChannelFamily::C1 } else { ChannelFamily::C2 };
        noisy_family(&GaussianChannel::new(tag, k, alpha)?, cfg.dim, cfg.cutoffs)
    }
}

/// Result of [`composition_check`].
#[derive(Clone, Debug)]
pub struct CompositionOutcome {
    pub reports: Vec<VerificationReport>,
    /// `"amplifier_after_attenuator"` or `"attenuator_after_amplifier"`,
    /// whichever product family reproduces the composite channel; `None` if
    /// neither does.
    pub matching_ordering: Option<&'static str>,
}

/// Attenuator `B(κ1)` followed by amplifier `A(κ2)`, compared with the
/// direct family of the composite, and the two product orderings.
pub fn composition_check(
    kappa1: f64,
    kappa2: f64,
    states: &[TestState],
    cfg: &ComparisonConfig,
    tolerance: f64,
) -> Result<CompositionOutcome> {
    if !(kappa1 > 0.0 && kappa1 < 1.0 && kappa2 > 1.0) {
        return Err(invalid("composition check needs 0 < κ1 < 1 < κ2"));
    }
    let n_amp = 4 * cfg.dim;
    let att = attenuator_ql(kappa1, cfg.dim, cfg.dim)?;
    let amp = amplifier_ql(kappa2, cfg.dim, n_amp)?;
    let direct = composite_reference(kappa1, kappa2, cfg)?;
    let tag = |r: VerificationReport, what: &str| r.param("kappa1", kappa1).param("kappa2", kappa2).param("compared", what.to_string());

    let mut reports = Vec::new();
    for s in states {
        let rho = s.density(cfg.dim)?;
        let seq = apply_kraus(&amp, &apply_kraus(&att, &rho)?)?;
        let dir = apply_kraus(&direct, &rho)?;
        let d = trace_distance(&seq.matrix, &dir.matrix);
        reports.push(tag(
            VerificationReport::new("composition", "trace_distance", d, tolerance)
                .with_leakage(seq.leakage.max(dir.leakage))
                .param("input", s.label()),
            "sequential_vs_direct",
        ));
    }
    let orderings: [(&'static str, &KrausFamily, &KrausFamily); 2] = [
        ("amplifier_after_attenuator", &att, &amp),
        ("attenuator_after_amplifier", &amp, &att),
    ];
    let mut matching = None;
    for (name, first, second) in orderings {
        let prod = first.compose(second)?;
        let mut all = true;
        for s in states {
            let rho = s.density(cfg.dim)?;
            let po = apply_kraus(&prod, &rho)?;
            let dir = apply_kraus(&direct, &rho)?;
            let d = trace_distance(&po.matrix, &dir.matrix);
            let rep = tag(
                VerificationReport::new("composition_product", "trace_distance", d, tolerance)
                    .with_leakage(po.leakage)
                    .param("input", s.label())
                    .param("ordering", name),
                "product_vs_direct",
            );
            all &= rep.pass;
            reports.push(rep);
        }
        if all && matching.is_none() {
            matching = Some(name);
        }
    }
    Ok(CompositionOutcome { reports, matching_ordering: matching })
}

/// What the beamsplitter check expects of the reduced state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Separability {
    /// Product output: report `1 - purity`.
    Product,
    /// Entangled output: report `purity`, which must stay below `1 - gap`.
    Entangled,
}

/// Beamsplitter of angle `theta` on `|ψ⟩ ⊗ |0⟩`; purity of the reduced
/// state of mode 1.
pub fn reduced_purity_after_beamsplitter(psi: &crate::fock::FockState, theta: f64) -> f64 {
    let n = psi.dim();
    let mut out = CMatrix::zeros(n, n);
    let (s, c) = (theta.sin(), theta.cos());
    for n1 in 0..n {
        let amp = psi.amplitudes[n1];
        if amp == Complex64::new(0.0, 0.0) {
            continue;
        }
        for m2 in 0..=n1 {
            let m1 = n1 - m2;
            out[(m1, m2)] += amp * crate::fock::elements::bs_coefficient(s, c, m2, n1, 0);
        }
    }
    let rho1 = &out * out.adjoint();
    let tr = rho1.trace().re;
    rho1.iter().map(|z| z.norm_sqr()).sum::<f64>() / (tr * tr)
}

pub fn beamsplitter_product_check(input: TestState, theta: f64, dim: usize, expect: Separability, tolerance: f64) -> Result<VerificationReport> {
    let psi = match input {
        TestState::Vacuum => fock_state(0, dim)?,
        TestState::Coherent { re, im } => coherent_state(Complex64::new(re, im), dim)?,
        TestState::Fock { n } => fock_state(n, dim)?,
        TestState::Thermal { .. } => return Err(invalid("the beamsplitter check needs a pure input")),
    };
    let p = reduced_purity_after_beamsplitter(&psi, theta);
    let rep = match expect {
        Separability::Product => VerificationReport::new("beamsplitter_product", "one_minus_purity", (1.0 - p).max(0.0), tolerance),
        Separability::Entangled => VerificationReport::new("beamsplitter_product", "purity", p, 1.0 - tolerance)
            .with_note(format!("1 - purity = {:.6e}, required ≥ {tolerance:e}", 1.0 - p)),
    };
    Ok(rep.param("input", input.label()).param("theta", theta).param("dim", dim).with_leakage(psi.leakage))
}
