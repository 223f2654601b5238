//! Dense rank oracles for windows: Gaussian elimination rank, Krylov rank,
//! cokernel dimension and projection residuals.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative pivot threshold.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;
pub const DEFAULT_DIMENSION_CAP: usize = 4096;

const RUIZ_SWEEPS: usize = 30;

pub(crate) fn check_cap(dim: usize, cap: usize) -> Result<()> {
    if dim > cap {
        Err(Error::DimensionCap { dim, cap })
    } else {
        Ok(())
    }
}

/// Rank by Gaussian elimination with partial pivoting on unit-norm columns;
/// a pivot counts when it exceeds `rank_tol`.
pub fn numerical_rank(m: &DMatrix<f64>, rank_tol: f64) -> usize {
    let mut a = m.clone();
    for mut c in a.column_iter_mut() {
        let n = c.norm();
        if n > 0.0 {
            c /= n;
        }
    }
    let (rows, cols) = a.shape();
    let mut rank = 0;
    for c in 0..cols {
        if rank == rows {
            break;
        }
        let (offset, pivot) = a
            .view((rank, c), (rows - rank, 1))
            .iter()
            .enumerate()
            .map(|(i, x)| (i, x.abs()))
            .fold((0, 0.0), |best, x| if x.1 > best.1 { x } else { best });
        if pivot <= rank_tol {
            continue;
        }
        a.swap_rows(rank, rank + offset);
        let p = a[(rank, c)];
        for r in rank + 1..rows {
            let f = a[(r, c)] / p;
            if f != 0.0 {
                for k in c..cols {
                    let x = a[(rank, k)];
                    a[(r, k)] -= f * x;
                }
            }
        }
        rank += 1;
    }
    rank
}

fn pow2_near_sqrt(x: f64) -> f64 {
    if x > 0.0 {
        2f64.powi((0.5 * x.log2()).round() as i32)
    } else {
        1.0
    }
}

/// Ruiz scaling by powers of two, so entries are rescaled without rounding
/// and the rank is unchanged.
pub fn equilibrate(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut a = m.clone();
    for _ in 0..RUIZ_SWEEPS {
        for mut row in a.row_iter_mut() {
            let s = pow2_near_sqrt(row.amax());
            row /= s;
        }
        for mut col in a.column_iter_mut() {
            let s = pow2_near_sqrt(col.amax());
            col /= s;
        }
    }
    a
}

pub fn equilibrated_rank(m: &DMatrix<f64>, rank_tol: f64) -> usize {
    numerical_rank(&equilibrate(m), rank_tol)
}

/// Dimension of `span{x, Mx, M²x, …}` by Arnoldi with two Gram–Schmidt
/// passes. Step `j` adds a direction while the part of `M q_j` orthogonal to
/// `q_0, …, q_j` exceeds `rank_tol · ‖M q_j‖`; the spaces are nested, so the
/// first breakdown ends the count.
///
/// Elimination on the power basis `[x, Mx, …]` loses directions once its
/// columns align, which happens within a few steps for small weights.
pub fn krylov_rank(m: &DMatrix<f64>, x: &DVector<f64>, rank_tol: f64, cap: usize) -> Result<usize> {
    let d = m.nrows();
    if m.ncols() != d || x.len() != d {
        return Err(Error::ShapeMismatch(format!(
            "Krylov needs a square matrix and a matching vector, got {}x{} and {}",
            d,
            m.ncols(),
            x.len()
        )));
    }
    check_cap(d, cap)?;
    let n = x.norm();
    if n == 0.0 {
        return Ok(0);
    }
    let mut basis = vec![x / n];
    while basis.len() < d {
        let mut w = m * basis.last().expect("nonempty");
        let scale = w.norm();
        if scale == 0.0 {
            break;
        }
        for _ in 0..2 {
            for q in &basis {
                let h = q.dot(&w);
                w.axpy(-h, q, 1.0);
            }
        }
        let rest = w.norm();
        if rest <= rank_tol * scale {
            break;
        }
        basis.push(w / rest);
    }
    Ok(basis.len())
}

/// `rows − rank`.
pub fn cokernel_dimension(m: &DMatrix<f64>, rank_tol: f64, cap: usize) -> Result<usize> {
    check_cap(m.nrows().max(m.ncols()), cap)?;
    Ok(m.nrows() - numerical_rank(m, rank_tol))
}

/// `max_i dist(e_i, span of the columns)`, using the left singular vectors
/// whose singular values exceed `rank_tol · σ_max`.
pub fn projection_residual(m: &DMatrix<f64>, rank_tol: f64) -> f64 {
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.max();
    let keep: Vec<usize> =
        (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > rank_tol * smax).collect();
    (0..m.nrows())
        .map(|i| {
            let captured: f64 = keep.iter().map(|&t| u[(i, t)] * u[(i, t)]).sum();
            (1.0 - captured).max(0.0).sqrt()
        })
        .fold(0.0, f64::max)
}
