use crate::scalar::Scalar;

use super::{LinalgError, Mat};

/// Relative pivot threshold below which `solve_linear` reports a singular matrix.
pub const PIVOT_RELATIVE_TOL: f64 = 1e-12;

/// Solves `A X = B` by Gaussian elimination with partial pivoting.
pub fn solve_linear<T: Scalar>(a: &Mat<T>, b: &Mat<T>) -> Result<Mat<T>, LinalgError> {
    let n = a.rows();
    if !a.is_square() {
        return Err(LinalgError::NotSquare { rows: a.rows(), cols: a.cols() });
    }
    if b.rows() != n {
        return Err(LinalgError::Shape {
            op: "solve_linear",
            expected: (n, b.cols()),
            found: b.shape(),
        });
    }
    let k = b.cols();
    let threshold = T::of(PIVOT_RELATIVE_TOL) * a.max_abs();
    let mut lu = a.clone();
    let mut x = b.clone();

    for col in 0..n {
        let (piv, piv_abs) = (col..n)
            .map(|r| (r, lu[(r, col)].abs()))
            .fold((col, -T::one()), |best, cur| if cur.1 > best.1 { cur } else { best });
        if piv_abs < threshold || piv_abs == T::zero() {
            return Err(LinalgError::Singular { pivot: piv_abs.as_f64(), column: col });
        }
        if piv != col {
            for j in 0..n {
                let tmp = lu[(col, j)];
                lu[(col, j)] = lu[(piv, j)];
                lu[(piv, j)] = tmp;
            }
            for j in 0..k {
                let tmp = x[(col, j)];
                x[(col, j)] = x[(piv, j)];
                x[(piv, j)] = tmp;
            }
        }
        let d = lu[(col, col)];
        for r in col + 1..n {
            let f = lu[(r, col)] / d;
            if f == T::zero() {
                continue;
            }
            lu[(r, col)] = T::zero();
            for j in col + 1..n {
                let v = lu[(col, j)];
                lu[(r, j)] -= f * v;
            }
            for j in 0..k {
                let v = x[(col, j)];
                x[(r, j)] -= f * v;
            }
        }
    }

    for col in (0..n).rev() {
        let d = lu[(col, col)];
        for j in 0..k {
            let mut s = x[(col, j)];
            for c in col + 1..n {
                s -= lu[(col, c)] * x[(c, j)];
            }
            x[(col, j)] = s / d;
        }
    }
    Ok(x)
}

pub fn inverse<T: Scalar>(a: &Mat<T>) -> Result<Mat<T>, LinalgError> {
    solve_linear(a, &Mat::identity(a.rows()))
}

/// Numerical rank by Gaussian elimination with complete pivoting; pivots
/// below `rel_tol · ‖M‖_max` count as zero.
pub fn rank<T: Scalar>(m: &Mat<T>, rel_tol: T) -> usize {
    let (rows, cols) = m.shape();
    let threshold = rel_tol * m.max_abs();
    let mut w = m.clone();
    let mut r = 0;
    while r < rows.min(cols) {
        let mut best = (r, r, T::zero());
        for i in r..rows {
            for j in r..cols {
                let v = w[(i, j)].abs();
                if v > best.2 {
                    best = (i, j, v);
                }
            }
        }
        if best.2 <= threshold || best.2 == T::zero() {
            break;
        }
        let (pi, pj, _) = best;
        for j in 0..cols {
            let tmp = w[(r, j)];
            w[(r, j)] = w[(pi, j)];
            w[(pi, j)] = tmp;
        }
        for i in 0..rows {
            let tmp = w[(i, r)];
            w[(i, r)] = w[(i, pj)];
            w[(i, pj)] = tmp;
        }
        let d = w[(r, r)];
        for i in r + 1..rows {
            let f = w[(i, r)] / d;
            for j in r..cols {
                let v = w[(r, j)];
                w[(i, j)] -= f * v;
            }
        }
        r += 1;
    }
    r
}

/// Rank of the complex matrix `re + i·im`, computed through the real
/// embedding `[[re, −im], [im, re]]` whose rank is twice the complex rank.
pub fn complex_rank<T: Scalar>(re: &Mat<T>, im: &Mat<T>, rel_tol: T) -> usize {
    assert_eq!(re.shape(), im.shape(), "complex_rank parts differ in shape");
    let (r, c) = re.shape();
    let mut big = Mat::zeros(2 * r, 2 * c);
    big.set_block(0, 0, re);
    big.set_block(0, c, &-im);
    big.set_block(r, 0, im);
    big.set_block(r, c, re);
    // Round up: the embedding rank is even in exact arithmetic.
    rank(&big, rel_tol).div_ceil(2)
}

/// Thin singular value decomposition `A = U Σ Vᵀ` by one-sided Jacobi.
#[derive(Debug, Clone)]
pub struct Svd<T> {
    pub u: Mat<T>,
    pub sigma: Vec<T>,
    pub v: Mat<T>,
}

const JACOBI_MAX_SWEEPS: usize = 60;

pub fn svd<T: Scalar>(a: &Mat<T>) -> Result<Svd<T>, LinalgError> {
    let (m, n) = a.shape();
    let mut u = a.clone();
    let mut v = Mat::identity(n);
    let eps = T::epsilon();
    // Columns below this squared norm are numerically zero and left alone.
    let frob2 = a.as_slice().iter().fold(T::zero(), |s, v| s + *v * *v);
    let negligible = eps * eps * frob2;

    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (T::zero(), T::zero(), T::zero());
                for i in 0..m {
                    alpha += u[(i, p)] * u[(i, p)];
                    beta += u[(i, q)] * u[(i, q)];
                    gamma += u[(i, p)] * u[(i, q)];
                }
                if alpha <= negligible
                    || beta <= negligible
                    || gamma.abs() <= eps * (alpha * beta).sqrt()
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::of(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let up = u[(i, p)];
                    let uq = u[(i, q)];
                    u[(i, p)] = c * up - s * uq;
                    u[(i, q)] = s * up + c * uq;
                }
                for i in 0..n {
                    let vp = v[(i, p)];
                    let vq = v[(i, q)];
                    v[(i, p)] = c * vp - s * vq;
                    v[(i, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(LinalgError::NoConvergence { iterations: JACOBI_MAX_SWEEPS });
    }

    let sigma: Vec<T> = (0..n)
        .map(|j| (0..m).fold(T::zero(), |s, i| s + u[(i, j)] * u[(i, j)]).sqrt())
        .collect();
    for (j, &sj) in sigma.iter().enumerate() {
        if sj > T::zero() {
            for i in 0..m {
                u[(i, j)] /= sj;
            }
        }
    }
    Ok(Svd { u, sigma, v })
}

/// Minimum-norm least-squares solution of `A X ≈ B`.
#[derive(Debug, Clone)]
pub struct LeastSquares<T> {
    pub x: Mat<T>,
    pub rank: usize,
    /// `‖A X − B‖_max`.
    pub residual: T,
}

/// Solves `A X ≈ B` in the least-squares sense, returning the minimum-norm
/// solution. Singular values below `rel_tol · σ_max` are treated as zero.
pub fn lstsq_min_norm<T: Scalar>(
    a: &Mat<T>,
    b: &Mat<T>,
    rel_tol: T,
) -> Result<LeastSquares<T>, LinalgError> {
    if a.rows() != b.rows() {
        return Err(LinalgError::Shape {
            op: "lstsq_min_norm",
            expected: (a.rows(), b.cols()),
            found: b.shape(),
        });
    }
    let Svd { u, sigma, v } = svd(a)?;
    let smax = sigma.iter().fold(T::zero(), |m, s| m.max(*s));
    let cutoff = rel_tol * smax;
    let utb = &u.transpose() * b;
    let mut scaled = Mat::zeros(sigma.len(), b.cols());
    let mut rank = 0;
    for (j, &sj) in sigma.iter().enumerate() {
        if sj > cutoff && sj > T::zero() {
            rank += 1;
            for c in 0..b.cols() {
                scaled[(j, c)] = utb[(j, c)] / sj;
            }
        }
    }
    let x = &v * &scaled;
    let residual = (a * &x).max_abs_diff(b);
    Ok(LeastSquares { x, rank, residual })
}
