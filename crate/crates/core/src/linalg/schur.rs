use num_complex::Complex;

use crate::scalar::Scalar;

use super::{LinalgError, Mat};

/// Real Schur factorization `T = V S Vᵀ` with `V` orthogonal and `T`
/// quasi-upper-triangular.
#[derive(Debug, Clone)]
pub struct SchurResult<T> {
    pub v: Mat<T>,
    pub t: Mat<T>,
    /// Sizes (1 or 2) of the diagonal blocks of `t`, top to bottom. Every
    /// 2×2 block carries a complex-conjugate eigenvalue pair.
    pub block_sizes: Vec<usize>,
}

impl<T: Scalar> SchurResult<T> {
    /// Eigenvalues read off the diagonal blocks, in block order.
    pub fn eigenvalues(&self) -> Vec<Complex<T>> {
        let mut out = Vec::with_capacity(self.t.rows());
        let mut i = 0;
        for &size in &self.block_sizes {
            if size == 1 {
                out.push(Complex::new(self.t[(i, i)], T::zero()));
            } else {
                let (l1, l2) = block_eigenvalues(
                    self.t[(i, i)],
                    self.t[(i, i + 1)],
                    self.t[(i + 1, i)],
                    self.t[(i + 1, i + 1)],
                );
                out.push(l1);
                out.push(l2);
            }
            i += size;
        }
        out
    }

    /// Row offsets of each diagonal block.
    pub fn block_offsets(&self) -> Vec<usize> {
        self.block_sizes
            .iter()
            .scan(0, |acc, &s| {
                let start = *acc;
                *acc += s;
                Some(start)
            })
            .collect()
    }
}

fn block_eigenvalues<T: Scalar>(a: T, b: T, c: T, d: T) -> (Complex<T>, Complex<T>) {
    let half = T::of(0.5);
    let mean = (a + d) * half;
    let p = (a - d) * half;
    let disc = p * p + b * c;
    if disc < T::zero() {
        let im = (-disc).sqrt();
        (Complex::new(mean, im), Complex::new(mean, -im))
    } else {
        let r = disc.sqrt();
        (Complex::new(mean + r, T::zero()), Complex::new(mean - r, T::zero()))
    }
}

/// Householder reduction to upper Hessenberg form: returns `(H, Q)` with
/// `A = Q H Qᵀ`.
pub fn hessenberg<T: Scalar>(a: &Mat<T>) -> (Mat<T>, Mat<T>) {
    let n = a.rows();
    let mut h = a.clone();
    let mut q = Mat::identity(n);
    if n < 3 {
        return (h, q);
    }
    let high = n - 1;
    let mut ort = vec![T::zero(); n];

    for m in 1..high {
        let scale = (m..=high).fold(T::zero(), |s, i| s + h[(i, m - 1)].abs());
        if scale == T::zero() {
            continue;
        }
        let mut hh = T::zero();
        for i in (m..=high).rev() {
            ort[i] = h[(i, m - 1)] / scale;
            hh += ort[i] * ort[i];
        }
        let mut g = hh.sqrt();
        if ort[m] > T::zero() {
            g = -g;
        }
        hh -= ort[m] * g;
        ort[m] -= g;

        for j in m..n {
            let mut f = T::zero();
            for i in (m..=high).rev() {
                f += ort[i] * h[(i, j)];
            }
            f /= hh;
            for i in m..=high {
                h[(i, j)] -= f * ort[i];
            }
        }
        for i in 0..=high {
            let mut f = T::zero();
            for j in (m..=high).rev() {
                f += ort[j] * h[(i, j)];
            }
            f /= hh;
            for j in m..=high {
                h[(i, j)] -= f * ort[j];
            }
        }
        ort[m] *= scale;
        h[(m, m - 1)] = scale * g;
    }

    // Accumulate the reflectors; their tails are still stored below the
    // subdiagonal of `h`.
    for m in (1..high).rev() {
        if h[(m, m - 1)] == T::zero() {
            continue;
        }
        for i in m + 1..=high {
            ort[i] = h[(i, m - 1)];
        }
        for j in m..=high {
            let mut g = T::zero();
            for i in m..=high {
                g += ort[i] * q[(i, j)];
            }
            g = (g / ort[m]) / h[(m, m - 1)];
            for i in m..=high {
                q[(i, j)] += g * ort[i];
            }
        }
    }
    for i in 2..n {
        for j in 0..i - 1 {
            h[(i, j)] = T::zero();
        }
    }
    (h, q)
}

/// Real Schur form via Hessenberg reduction and Francis double-shift QR.
///
/// Fails with `NoConvergence` once the QR iteration exceeds `100·n` sweeps.
pub fn real_schur<T: Scalar>(s: &Mat<T>) -> Result<SchurResult<T>, LinalgError> {
    if !s.is_square() {
        return Err(LinalgError::NotSquare { rows: s.rows(), cols: s.cols() });
    }
    if !s.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let nn = s.rows();
    if nn == 0 {
        return Ok(SchurResult { v: Mat::zeros(0, 0), t: Mat::zeros(0, 0), block_sizes: vec![] });
    }
    let (mut h, mut z) = hessenberg(s);
    francis_qr(&mut h, &mut z)?;
    // The bulge chase leaves stale values below the subdiagonal.
    for i in 2..nn {
        for j in 0..i - 1 {
            h[(i, j)] = T::zero();
        }
    }

    let mut block_sizes = Vec::new();
    let mut i = 0;
    while i < nn {
        if i + 1 < nn && h[(i + 1, i)] != T::zero() {
            block_sizes.push(2);
            i += 2;
        } else {
            block_sizes.push(1);
            i += 1;
        }
    }
    Ok(SchurResult { v: z.transpose(), t: h, block_sizes })
}

/// In-place Francis QR on Hessenberg `h`, accumulating into `z` so that the
/// original matrix equals `z h zᵀ` on exit. Deflated subdiagonal entries are
/// set to exact zeros and real 2×2 pairs are split by a rotation.
fn francis_qr<T: Scalar>(h: &mut Mat<T>, z: &mut Mat<T>) -> Result<(), LinalgError> {
    let nn = h.rows();
    let low = 0usize;
    let high = nn - 1;
    let eps = T::epsilon();
    let two = T::of(2.0);
    let max_iterations = 100 * nn;

    let mut exshift = T::zero();
    let (mut p, mut q, mut r, mut s, mut zz);
    let (mut w, mut x, mut y);

    let mut norm = T::zero();
    for i in 0..nn {
        for j in i.saturating_sub(1)..nn {
            norm += h[(i, j)].abs();
        }
    }

    let mut iter = 0usize;
    let mut total = 0usize;
    let mut n = nn as isize - 1;
    while n >= low as isize {
        let nu = n as usize;
        // Look for a single small subdiagonal element.
        let mut l = nu;
        while l > low {
            s = h[(l - 1, l - 1)].abs() + h[(l, l)].abs();
            if s == T::zero() {
                s = norm;
            }
            if h[(l, l - 1)].abs() <= eps * s {
                break;
            }
            l -= 1;
        }

        if l == nu {
            // One root found.
            h[(nu, nu)] += exshift;
            if nu > low {
                h[(nu, nu - 1)] = T::zero();
            }
            n -= 1;
            iter = 0;
        } else if l + 1 == nu {
            // Two roots found.
            w = h[(nu, nu - 1)] * h[(nu - 1, nu)];
            p = (h[(nu - 1, nu - 1)] - h[(nu, nu)]) / two;
            q = p * p + w;
            zz = q.abs().sqrt();
            h[(nu, nu)] += exshift;
            h[(nu - 1, nu - 1)] += exshift;
            if nu - 1 > low {
                h[(nu - 1, nu - 2)] = T::zero();
            }

            if q >= T::zero() {
                // Real pair: rotate the block to upper triangular.
                zz = if p >= T::zero() { p + zz } else { p - zz };
                x = h[(nu, nu - 1)];
                s = x.abs() + zz.abs();
                p = x / s;
                q = zz / s;
                r = (p * p + q * q).sqrt();
                p /= r;
                q /= r;
                for j in nu - 1..nn {
                    let t = h[(nu - 1, j)];
                    h[(nu - 1, j)] = q * t + p * h[(nu, j)];
                    h[(nu, j)] = q * h[(nu, j)] - p * t;
                }
                for i in 0..=nu {
                    let t = h[(i, nu - 1)];
                    h[(i, nu - 1)] = q * t + p * h[(i, nu)];
                    h[(i, nu)] = q * h[(i, nu)] - p * t;
                }
                for i in low..=high {
                    let t = z[(i, nu - 1)];
                    z[(i, nu - 1)] = q * t + p * z[(i, nu)];
                    z[(i, nu)] = q * z[(i, nu)] - p * t;
                }
                h[(nu, nu - 1)] = T::zero();
            }
            n -= 2;
            iter = 0;
        } else {
            total += 1;
            if total > max_iterations {
                return Err(LinalgError::NoConvergence { iterations: max_iterations });
            }
            x = h[(nu, nu)];
            y = T::zero();
            w = T::zero();
            if l < nu {
                y = h[(nu - 1, nu - 1)];
                w = h[(nu, nu - 1)] * h[(nu - 1, nu)];
            }

            // Exceptional shifts to break cycles.
            if iter == 10 {
                exshift += x;
                for i in low..=nu {
                    h[(i, i)] -= x;
                }
                s = h[(nu, nu - 1)].abs() + h[(nu - 1, nu - 2)].abs();
                x = T::of(0.75) * s;
                y = x;
                w = T::of(-0.4375) * s * s;
            }
            if iter == 30 {
                s = (y - x) / two;
                s = s * s + w;
                if s > T::zero() {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / two + s);
                    for i in low..=nu {
                        h[(i, i)] -= s;
                    }
                    exshift += s;
                    x = T::of(0.964);
                    y = x;
                    w = x;
                }
            }
            iter += 1;

            // Look for two consecutive small subdiagonal elements.
            let mut m = nu - 2;
            loop {
                zz = h[(m, m)];
                r = x - zz;
                s = y - zz;
                p = (r * s - w) / h[(m + 1, m)] + h[(m, m + 1)];
                q = h[(m + 1, m + 1)] - zz - r - s;
                r = h[(m + 2, m + 1)];
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if h[(m, m - 1)].abs() * (q.abs() + r.abs())
                    < eps * (p.abs() * (h[(m - 1, m - 1)].abs() + zz.abs() + h[(m + 1, m + 1)].abs()))
                {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=nu {
                h[(i, i - 2)] = T::zero();
                if i > m + 2 {
                    h[(i, i - 3)] = T::zero();
                }
            }

            // Double QR step on rows l..=n, columns m..=n.
            for k in m..nu {
                let notlast = k + 1 != nu;
                if k != m {
                    p = h[(k, k - 1)];
                    q = h[(k + 1, k - 1)];
                    r = if notlast { h[(k + 2, k - 1)] } else { T::zero() };
                    x = p.abs() + q.abs() + r.abs();
                    if x == T::zero() {
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < T::zero() {
                    s = -s;
                }
                if s == T::zero() {
                    continue;
                }
                if k != m {
                    h[(k, k - 1)] = -s * x;
                } else if l != m {
                    h[(k, k - 1)] = -h[(k, k - 1)];
                }
                p += s;
                x = p / s;
                y = q / s;
                zz = r / s;
                q /= p;
                r /= p;

                for j in k..nn {
                    p = h[(k, j)] + q * h[(k + 1, j)];
                    if notlast {
                        p += r * h[(k + 2, j)];
                        h[(k + 2, j)] -= p * zz;
                    }
                    h[(k, j)] -= p * x;
                    h[(k + 1, j)] -= p * y;
                }
                for i in 0..=nu.min(k + 3) {
                    p = x * h[(i, k)] + y * h[(i, k + 1)];
                    if notlast {
                        p += zz * h[(i, k + 2)];
                        h[(i, k + 2)] -= p * r;
                    }
                    h[(i, k)] -= p;
                    h[(i, k + 1)] -= p * q;
                }
                for i in low..=high {
                    p = x * z[(i, k)] + y * z[(i, k + 1)];
                    if notlast {
                        p += zz * z[(i, k + 2)];
                        z[(i, k + 2)] -= p * r;
                    }
                    z[(i, k)] -= p;
                    z[(i, k + 1)] -= p * q;
                }
            }
        }
    }
    Ok(())
}

/// All eigenvalues of `m`, read from its real Schur form.
pub fn eigenvalues<T: Scalar>(m: &Mat<T>) -> Result<Vec<Complex<T>>, LinalgError> {
    Ok(real_schur(m)?.eigenvalues())
}

/// `max |λ|` over the eigenvalues of `m`.
pub fn spectral_radius<T: Scalar>(m: &Mat<T>) -> Result<T, LinalgError> {
    Ok(eigenvalues(m)?.iter().fold(T::zero(), |acc, l| acc.max(l.norm())))
}

/// Largest real part over the eigenvalues of `m` (the spectral abscissa).
pub fn spectral_abscissa<T: Scalar>(m: &Mat<T>) -> Result<T, LinalgError> {
    Ok(eigenvalues(m)?.iter().fold(T::neg_infinity(), |acc, l| acc.max(l.re)))
}

/// True when every eigenvalue has a strictly negative real part.
pub fn is_hurwitz<T: Scalar>(m: &Mat<T>) -> Result<bool, LinalgError> {
    Ok(spectral_abscissa(m)? < T::zero())
}
