//! Plain-JSON shapes for complex vectors and matrices: `[re, im]` pairs,
//! matrices row-major as nested arrays.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Pair = [f64; 2];

pub fn c_to_pair(z: Complex64) -> Pair {
    [z.re, z.im]
}

pub fn pair_to_c(p: Pair) -> Complex64 {
    Complex64::new(p[0], p[1])
}

pub fn vec_to_pairs(v: &DVector<Complex64>) -> Vec<Pair> {
    v.iter().map(|z| c_to_pair(*z)).collect()
}

pub fn pairs_to_vec(p: &[Pair]) -> DVector<Complex64> {
    DVector::from_iterator(p.len(), p.iter().map(|q| pair_to_c(*q)))
}

pub fn mat_to_rows(m: &DMatrix<Complex64>) -> Vec<Vec<Pair>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| c_to_pair(m[(i, j)])).collect())
        .collect()
}

pub fn rows_to_mat(rows: &[Vec<Pair>]) -> Result<DMatrix<Complex64>> {
    let n = rows.len();
    let c = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != c) {
        return Err(Error::Format("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(n, c, |i, j| pair_to_c(rows[i][j])))
}
