use crate::scalar::Scalar;

use super::Mat;

/// Terms kept in the Taylor core after scaling. With `‖M t‖₁ / 2^s ≤ 0.5` the
/// truncation error is below `0.5^19 / 19!`.
const TAYLOR_TERMS: usize = 18;
const SCALED_NORM_BOUND: f64 = 0.5;

/// `e^{M t}` by scaling and squaring around a fixed-order Taylor core.
///
/// Panics if `m` is not square.
pub fn expm<T: Scalar>(m: &Mat<T>, t: T) -> Mat<T> {
    assert!(m.is_square(), "expm needs a square matrix");
    let n = m.rows();
    let mt = m.scale(t);
    let norm = mt.norm_1();
    if norm == T::zero() {
        return Mat::identity(n);
    }

    let mut squarings = 0u32;
    let mut scaled_norm = norm;
    let bound = T::of(SCALED_NORM_BOUND);
    while scaled_norm > bound {
        scaled_norm /= T::of(2.0);
        squarings += 1;
    }
    let a = mt.scale(T::one() / T::of(2.0).powi(squarings as i32));

    // Horner form: I + A(I + A/2(I + A/3(...)))
    let ident = Mat::identity(n);
    let mut acc = ident.clone();
    for k in (1..=TAYLOR_TERMS).rev() {
        acc = &ident + &(&a * &acc).scale(T::one() / T::of(k as f64));
    }
    for _ in 0..squarings {
        acc = &acc * &acc;
    }
    acc
}
