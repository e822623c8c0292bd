//! Small dense least-squares solves with conditioning diagnostics.

use nalgebra::{DMatrix, DVector, SVD};

/// Relative singular-value floor below which a design matrix is rank deficient.
pub const RANK_RTOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct Lstsq {
    pub x: DVector<f64>,
    /// `||A x - b||_2`
    pub residual: f64,
    /// `sigma_max / sigma_min`
    pub cond: f64,
}

/// The rank-deficient case: the (unit) direction in parameter space that the
/// design matrix cannot see.
#[derive(Debug, Clone)]
pub struct NullDirection {
    pub direction: DVector<f64>,
    pub cond: f64,
}

fn svd_padded(a: &DMatrix<f64>) -> SVD<f64, nalgebra::Dyn, nalgebra::Dyn> {
    let (m, n) = a.shape();
    if m >= n {
        SVD::new(a.clone(), true, true)
    } else {
        let mut padded = DMatrix::zeros(n, n);
        padded.rows_mut(0, m).copy_from(a);
        SVD::new(padded, true, true)
    }
}

/// Condition number of `a` (infinite when a column direction is unseen).
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let svd = svd_padded(a);
    let max = svd.singular_values.max();
    let min = svd.singular_values.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<Lstsq, NullDirection> {
    let svd = svd_padded(a);
    let sv = &svd.singular_values;
    let max = sv.max();
    let (imin, min) = sv.argmin();
    let cond = if min == 0.0 { f64::INFINITY } else { max / min };
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    if a.nrows() < a.ncols() || max == 0.0 || min <= RANK_RTOL * max {
        return Err(NullDirection {
            direction: v_t.row(imin).transpose(),
            cond,
        });
    }
    let u = svd.u.as_ref().expect("u requested");
    // x = V Σ^-1 U^T b, with U truncated to the rows of `a`
    let ub = u.rows(0, a.nrows()).transpose() * b;
    let scaled = DVector::from_iterator(sv.len(), ub.iter().zip(sv.iter()).map(|(c, s)| c / s));
    let x = v_t.transpose() * scaled;
    let residual = (a * &x - b).norm();
    Ok(Lstsq { x, residual, cond })
}
