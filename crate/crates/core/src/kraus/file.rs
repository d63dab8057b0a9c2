//! JSON files holding a Kraus family.
//!
//! Floats are written with shortest round-trip formatting, so a family read
//! back from disk is bit-for-bit the one that was written.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{Construction, IndexKind, KrausFamily, KrausOp, KrausTerm, Monomial, Squeezing, Target, TermLabel};
use crate::error::{Error, Result};
use crate::phase_space::{ChannelFamily, GaussianChannel};
use crate::repr::{mat_to_rows, pairs_to_vec, rows_to_mat, vec_to_pairs, Pair};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RParam {
    Value(f64),
    /// Must be the string `"limit"`.
    Tag(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyParams {
    pub kappa: f64,
    pub alpha: f64,
    pub r: RParam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonomialRecord {
    #[serde(flatten)]
    pub target: Target,
    pub coeffs: Vec<Pair>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankOneRecord {
    pub ket: Vec<Pair>,
    pub bra: Vec<Pair>,
}

/// Exactly one of `index` / `point` and one of `matrix` / `monomial` /
/// `rank_one` is present.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<serde_json::Value>,
    #[serde(default = "one")]
    pub weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<Pair>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monomial: Option<MonomialRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_one: Option<RankOneRecord>,
}

fn one() -> f64 {
    1.0
}

/// On-disk layout of a [`KrausFamily`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyFile {
    pub family: ChannelFamily,
    pub construction: Construction,
    pub params: FamilyParams,
    pub dim: usize,
    pub index_kind: IndexKind,
    /// Generator settings, recorded so the file documents how it was made.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub header: BTreeMap<String, serde_json::Value>,
    pub operators: Vec<OperatorRecord>,
}

fn vector(p: &[Pair], dim: usize, what: &str) -> Result<DVector<num_complex::Complex64>> {
    if p.len() != dim {
        return Err(Error::Format(format!("{what} has {} entries, expected {dim}", p.len())));
    }
    Ok(pairs_to_vec(p))
}

impl FamilyFile {
    pub fn from_family(fam: &KrausFamily, header: BTreeMap<String, serde_json::Value>) -> Self {
        let operators = fam
            .terms
            .iter()
            .map(|t| {
                let (index, point) = match t.label {
                    TermLabel::Index(_) | TermLabel::Pair(..) => (Some(serde_json::to_value(t.label).unwrap()), None),
                    TermLabel::Point(_) | TermLabel::Point2(..) => (None, Some(serde_json::to_value(t.label).unwrap())),
                };
                let mut rec = OperatorRecord { index, point, weight: t.weight, matrix: None, monomial: None, rank_one: None };
                match &t.op {
                    KrausOp::Dense(m) => rec.matrix = Some(mat_to_rows(m)),
                    KrausOp::Monomial(m) => rec.monomial = Some(MonomialRecord { target: m.target, coeffs: vec_to_pairs(&m.coeffs) }),
                    KrausOp::RankOne { ket, bra } => rec.rank_one = Some(RankOneRecord { ket: vec_to_pairs(ket), bra: vec_to_pairs(bra) }),
                }
                rec
            })
            .collect();
        FamilyFile {
            family: fam.channel.family(),
            construction: fam.construction,
            params: FamilyParams {
                kappa: fam.channel.kappa(),
                alpha: fam.channel.alpha(),
                r: match fam.squeezing {
                    Squeezing::Limit => RParam::Tag("limit".into()),
                    Squeezing::Finite(r) => RParam::Value(r),
                },
            },
            dim: fam.dim,
            index_kind: fam.index_kind,
            header,
            operators,
        }
    }

    pub fn into_family(self) -> Result<KrausFamily> {
        let channel = GaussianChannel::new(self.family, self.params.kappa, self.params.alpha)?;
        let squeezing = match self.params.r {
            RParam::Value(r) if r.is_finite() && r > 0.0 => Squeezing::Finite(r),
            RParam::Tag(ref s) if s == "limit" => Squeezing::Limit,
            other => return Err(Error::Format(format!("params.r must be a positive number or \"limit\", got {other:?}"))),
        };
        let dim = self.dim;
        let mut terms = Vec::with_capacity(self.operators.len());
        for (i, rec) in self.operators.into_iter().enumerate() {
            let ctx = |m: &str| Error::Format(format!("operator {i}: {m}"));
            let raw = match (rec.index, rec.point) {
                (Some(v), None) | (None, Some(v)) => v,
                _ => return Err(ctx("exactly one of `index` and `point` is required")),
            };
            let label: TermLabel = serde_json::from_value(raw).map_err(|e| ctx(&e.to_string()))?;
            let op = match (rec.matrix, rec.monomial, rec.rank_one) {
                (Some(rows), None, None) => {
                    let m = rows_to_mat(&rows)?;
                    if m.nrows() != dim || m.ncols() != dim {
                        return Err(ctx(&format!("matrix is {}×{}, expected {dim}×{dim}", m.nrows(), m.ncols())));
                    }
                    KrausOp::Dense(m)
                }
                (None, Some(mono), None) => {
                    KrausOp::Monomial(Monomial { target: mono.target, coeffs: vector(&mono.coeffs, dim, "monomial")? })
                }
                (None, None, Some(r1)) => {
                    KrausOp::RankOne { ket: vector(&r1.ket, dim, "ket")?, bra: vector(&r1.bra, dim, "bra")? }
                }
                _ => return Err(ctx("exactly one of `matrix`, `monomial`, `rank_one` is required")),
            };
            if !rec.weight.is_finite() || rec.weight < 0.0 {
                return Err(ctx("weight must be finite and non-negative"));
            }
            terms.push(KrausTerm { label, weight: rec.weight, op });
        }
        Ok(KrausFamily { channel, squeezing, construction: self.construction, index_kind: self.index_kind, dim, terms })
    }
}

pub fn write_family<W: Write>(fam: &KrausFamily, header: BTreeMap<String, serde_json::Value>, w: W) -> Result<()> {
    serde_json::to_writer(w, &FamilyFile::from_family(fam, header))?;
    Ok(())
}

/// Reads a family and its header.
pub fn read_family<R: Read>(r: R) -> Result<(KrausFamily, BTreeMap<String, serde_json::Value>)> {
    let file: FamilyFile = serde_json::from_reader(r)?;
    let header = file.header.clone();
    Ok((file.into_family()?, header))
}

pub fn save_family(fam: &KrausFamily, header: BTreeMap<String, serde_json::Value>, path: &Path) -> Result<()> {
    let f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_family(fam, header, f)
}

pub fn load_family(path: &Path) -> Result<(KrausFamily, BTreeMap<String, serde_json::Value>)> {
    read_family(std::io::BufReader::new(std::fs::File::open(path)?))
}
