//! Continuous-index families discretised on grids: rank-one
//! measure-and-prepare operators, homodyne-and-prepare, and Gaussian-weighted
//! displacements.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Construction, IndexKind, KrausFamily, KrausOp, KrausTerm, Squeezing, TermLabel};
use crate::error::{invalid, Error, Result};
use crate::fock::{coherent_unchecked, displacement_unchecked, position_amplitudes, CVector};
use crate::phase_space::{eb_noise_threshold, ChannelFamily, GaussianChannel};

/// Uniform grid on `[-half_width, half_width]` with spacing `step`.
///
/// For Gaussian-weighted families the abscissa is in units of the standard
/// deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineGrid {
    pub half_width: f64,
    pub step: f64,
}

impl LineGrid {
    pub const HOMODYNE: LineGrid = LineGrid { half_width: 8.0, step: 0.05 };
    pub const GAUSSIAN: LineGrid = LineGrid { half_width: 8.0, step: 0.05 };
    pub const GAUSSIAN_2D: LineGrid = LineGrid { half_width: 7.0, step: 0.5 };

    fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.half_width > 0.0 && self.half_width.is_finite()) {
            return Err(invalid(format!("bad grid {self:?}")));
        }
        if self.half_width / self.step > 1e6 {
            return Err(invalid("grid has too many points"));
        }
        Ok(())
    }

    /// Grid points, symmetric about zero.
    pub fn points(&self) -> Vec<f64> {
        let k = (self.half_width / self.step + 1e-9).floor() as i64;
        (-k..=k).map(|i| i as f64 * self.step).collect()
    }
}

/// Cartesian grid of spacing `step` clipped to the disc `|β| ≤ radius`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscGrid {
    pub radius: f64,
    pub step: f64,
}

impl DiscGrid {
    pub const DEFAULT: DiscGrid = DiscGrid { radius: 6.0, step: 0.15 };

    pub fn points(&self) -> Vec<Complex64> {
        let k = (self.radius / self.step + 1e-9).floor() as i64;
        let r2 = self.radius * self.radius * (1.0 + 1e-12);
        let mut out = Vec::new();
        for i in -k..=k {
            for j in -k..=k {
                let b = Complex64::new(i as f64 * self.step, j as f64 * self.step);
                if b.norm_sqr() <= r2 {
                    out.push(b);
                }
            }
        }
        out
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        Err(invalid("dimension must be at least 1"))
    } else {
        Ok(())
    }
}

fn family(channel: GaussianChannel, construction: Construction, index_kind: IndexKind, dim: usize, terms: Vec<KrausTerm>) -> KrausFamily {
    KrausFamily { channel, squeezing: Squeezing::Limit, construction, index_kind, dim, terms }.prune()
}

/// Noise of the channel realised by [`eb_rank_one`]: the least `α` that is
/// both completely positive and entanglement breaking.
pub fn rank_one_alpha(family_tag: ChannelFamily, kappa: f64) -> Option<f64> {
    match family_tag {
        ChannelFamily::C1 | ChannelFamily::C2 | ChannelFamily::D | ChannelFamily::B2 | ChannelFamily::A1 => {
            let ql = GaussianChannel::quantum_limited(family_tag, kappa).ok()?.alpha();
            Some(eb_noise_threshold(family_tag, kappa)?.max(ql))
        }
        _ => None,
    }
}

/// Rank-one measure-and-prepare family of an entanglement-breaking channel at
/// its threshold, `∫ d²β/π |f(β)⟩⟨β|` with
/// `f(β) = κβ` (C1, C2), `κβ*` (D), `β` (B2) or `0` (A1).
pub fn eb_rank_one(family_tag: ChannelFamily, kappa: f64, dim: usize, grid: DiscGrid) -> Result<KrausFamily> {
    check_dim(dim)?;
    if !(grid.step > 0.0 && grid.radius > 0.0) {
        return Err(invalid(format!("bad grid {grid:?}")));
    }
    let alpha = rank_one_alpha(family_tag, kappa)
        .ok_or_else(|| Error::Unsupported(format!("no rank-one family for {family_tag}")))?;
    let channel = GaussianChannel::new(family_tag, kappa, alpha)?;
    let w = grid.step * grid.step / std::f64::consts::PI;
    let k = channel.kappa();
    let terms = grid
        .points()
        .into_iter()
        .map(|b| {
            let out = match family_tag {
                ChannelFamily::C1 | ChannelFamily::C2 => b * k,
                ChannelFamily::D => b.conj() * k,
                ChannelFamily::B2 => b,
                _ => Complex64::new(0.0, 0.0),
            };
            KrausTerm {
                label: TermLabel::Point2(b.re, b.im),
                weight: w,
                op: KrausOp::RankOne {
                    ket: coherent_unchecked(out, dim).amplitudes,
                    bra: coherent_unchecked(b, dim).amplitudes,
                },
            }
        })
        .collect();
    Ok(family(channel, Construction::RankOne, IndexKind::Continuous2d, dim, terms))
}

/// Quantum-limited `A2`: `∫ dx |x/√2⟩⟨x|`, coherent output, position bra.
pub fn a2_kraus(dim: usize, grid: LineGrid) -> Result<KrausFamily> {
    check_dim(dim)?;
    grid.validate()?;
    let channel = GaussianChannel::quantum_limited(ChannelFamily::A2, 1.0)?;
    let terms = grid
        .points()
        .into_iter()
        .map(|x| {
            let bra = position_amplitudes(x, dim);
            KrausTerm {
                label: TermLabel::Point(x),
                weight: grid.step,
                op: KrausOp::RankOne {
                    ket: coherent_unchecked(Complex64::new(x / std::f64::consts::SQRT_2, 0.0), dim).amplitudes,
                    bra: CVector::from_iterator(dim, bra.into_iter().map(|v| Complex64::new(v, 0.0))),
                },
            }
        })
        .collect();
    Ok(family(channel, Construction::Homodyne, IndexKind::Continuous1d, dim, terms))
}

fn gauss(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `B1(α)`: real displacements `D(x)` with `x ~ N(0, α/4)`, adding `α` to
/// the `q` variance. `α = 0` gives the identity.
pub fn b1_kraus(alpha: f64, dim: usize, grid: LineGrid) -> Result<KrausFamily> {
    check_dim(dim)?;
    grid.validate()?;
    let channel = GaussianChannel::new(ChannelFamily::B1, 1.0, alpha)?;
    if alpha == 0.0 {
        let t = KrausTerm { label: TermLabel::Point(0.0), weight: 1.0, op: KrausOp::Dense(crate::fock::CMatrix::identity(dim, dim)) };
        return Ok(family(channel, Construction::Displacement, IndexKind::Continuous1d, dim, vec![t]));
    }
    let sigma = alpha.sqrt() / 2.0;
    let terms = grid
        .points()
        .into_iter()
        .map(|u| KrausTerm {
            label: TermLabel::Point(sigma * u),
            weight: gauss(u) * grid.step,
            op: KrausOp::Dense(displacement_unchecked(Complex64::new(sigma * u, 0.0), dim)),
        })
        .collect();
    Ok(family(channel, Construction::Displacement, IndexKind::Continuous1d, dim, terms))
}

/// `B2(α)`: displacements `D(β)` with `Re β, Im β ~ N(0, α/4)` independently.
///
/// `grid` is applied to both axes in standard-deviation units.
pub fn b2_displacement(alpha: f64, dim: usize, grid: LineGrid) -> Result<KrausFamily> {
    check_dim(dim)?;
    grid.validate()?;
    let channel = GaussianChannel::new(ChannelFamily::B2, 1.0, alpha)?;
    if alpha == 0.0 {
        let t = KrausTerm { label: TermLabel::Point2(0.0, 0.0), weight: 1.0, op: KrausOp::Dense(crate::fock::CMatrix::identity(dim, dim)) };
        return Ok(family(channel, Construction::Displacement, IndexKind::Continuous2d, dim, vec![t]));
    }
    let sigma = alpha.sqrt() / 2.0;
    let pts = grid.points();
    let mut terms = Vec::with_capacity(pts.len() * pts.len());
    for &u in &pts {
        for &v in &pts {
            let b = Complex64::new(sigma * u, sigma * v);
            terms.push(KrausTerm {
                label: TermLabel::Point2(b.re, b.im),
                weight: gauss(u) * gauss(v) * grid.step * grid.step,
                op: KrausOp::Dense(displacement_unchecked(b, dim)),
            });
        }
    }
    Ok(family(channel, Construction::Displacement, IndexKind::Continuous2d, dim, terms))
}
