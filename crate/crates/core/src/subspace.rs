//! Rank and row-space dimension arithmetic over real matrices.
//!
//! Every information-index evaluation bottoms out in [`numeric_rank`]. Ranks are
//! counted by singular-value thresholding: a singular value `σ` counts when
//! `σ > tol · σ_max · max(rows, cols)`. Empty and all-zero matrices have rank 0.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative threshold used to decide which singular values are numerically zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankTolerance(f64);

impl RankTolerance {
    pub const DEFAULT: RankTolerance = RankTolerance(1e-9);

    pub fn new(relative_threshold: f64) -> Result<Self> {
        if relative_threshold > 0.0 && relative_threshold < 1.0 {
            Ok(RankTolerance(relative_threshold))
        } else {
            Err(Error::Input(format!(
                "rank tolerance must lie in (0, 1), got {relative_threshold}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for RankTolerance {
    fn default() -> Self {
        Self::DEFAULT
    }
}

pub(crate) fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    if let Some(pos) = m.iter().position(|v| !v.is_finite()) {
        let (r, c) = (pos % m.nrows(), pos / m.nrows());
        return Err(Error::Input(format!("non-finite entry at ({r}, {c})")));
    }
    Ok(())
}

/// Rank without the finiteness check; callers guarantee finite input.
pub(crate) fn rank_unchecked(m: &DMatrix<f64>, tol: RankTolerance) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    // the SVD is cheaper on the tall orientation
    let sv = if m.nrows() >= m.ncols() {
        m.singular_values()
    } else {
        m.transpose().singular_values()
    };
    let largest = sv.iter().cloned().fold(0.0_f64, f64::max);
    if largest == 0.0 {
        return 0;
    }
    let cutoff = tol.value() * largest * m.nrows().max(m.ncols()) as f64;
    sv.iter().filter(|&&s| s > cutoff).count()
}

pub fn numeric_rank(m: &DMatrix<f64>, tol: RankTolerance) -> Result<usize> {
    check_finite(m)?;
    Ok(rank_unchecked(m, tol))
}

/// Vertical concatenation. All blocks must share a column count; an empty list
/// yields a 0×0 matrix.
pub fn vstack(blocks: &[&DMatrix<f64>]) -> Result<DMatrix<f64>> {
    let Some(first) = blocks.first() else {
        return Ok(DMatrix::zeros(0, 0));
    };
    let cols = first.ncols();
    if let Some(bad) = blocks.iter().find(|b| b.ncols() != cols) {
        return Err(Error::Dimension(format!(
            "cannot stack a block with {} columns onto blocks with {cols}",
            bad.ncols()
        )));
    }
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        out.rows_mut(at, b.nrows()).copy_from(*b);
        at += b.nrows();
    }
    Ok(out)
}

/// Dimension of the row space of the vertical stack of `blocks`, i.e. the
/// dimension of the sum of the blocks' row spaces.
pub fn stacked_row_space_dim(blocks: &[&DMatrix<f64>], tol: RankTolerance) -> Result<usize> {
    let stacked = vstack(blocks)?;
    numeric_rank(&stacked, tol)
}

/// Dimension of the intersection of the row spaces of `m1` and `m2`, via
/// `rank(m1) + rank(m2) - rank([m1; m2])`.
pub fn intersection_dim(m1: &DMatrix<f64>, m2: &DMatrix<f64>, tol: RankTolerance) -> Result<usize> {
    let joint = vstack(&[m1, m2])?;
    check_finite(&joint)?;
    let r1 = rank_unchecked(m1, tol);
    let r2 = rank_unchecked(m2, tol);
    let r12 = rank_unchecked(&joint, tol);
    Ok((r1 + r2).saturating_sub(r12))
}

/// Whether every row of `candidate` lies in the row space of `container`.
pub fn row_space_contains(
    container: &DMatrix<f64>,
    candidate: &DMatrix<f64>,
    tol: RankTolerance,
) -> Result<bool> {
    let joint = vstack(&[container, candidate])?;
    check_finite(&joint)?;
    Ok(rank_unchecked(&joint, tol) == rank_unchecked(container, tol))
}
