use num_complex::Complex;

use crate::linalg::{complex_rank, eigenvalues, rank, spectral_abscissa, solve_linear, Mat};
use crate::scalar::Scalar;
use crate::tolerance::Tolerances;

use super::{AgentModel, GainSet, PlantError, Role};

/// PBH stabilizability: `rank [A − λI, B] = n` for every eigenvalue of `A`
/// with `Re λ ≥ −marginal`.
pub fn pbh_stabilizable<T: Scalar>(a: &Mat<T>, b: &Mat<T>, tol: &Tolerances) -> Result<bool, PlantError> {
    let n = a.rows();
    if !a.is_square() || b.rows() != n {
        return Err(PlantError::Dimension { field: "B", expected: (n, b.cols()), found: b.shape() });
    }
    let marginal = T::of(-tol.marginal);
    for lambda in eigenvalues(a)? {
        if lambda.re < marginal {
            continue;
        }
        let re = (a - &Mat::identity(n).scale(lambda.re)).hstack(b)?;
        let im = Mat::identity(n).scale(-lambda.im).hstack(&Mat::zeros(n, b.cols()))?;
        if complex_rank(&re, &im, T::of(tol.rank)) < n {
            return Ok(false);
        }
    }
    Ok(true)
}

/// PBH detectability of `(C, A)`, the dual of [`pbh_stabilizable`].
pub fn pbh_detectable<T: Scalar>(c: &Mat<T>, a: &Mat<T>, tol: &Tolerances) -> Result<bool, PlantError> {
    if c.cols() != a.rows() {
        return Err(PlantError::Dimension { field: "C", expected: (c.rows(), a.rows()), found: c.shape() });
    }
    pbh_stabilizable(&a.transpose(), &c.transpose(), tol)
}

/// Leader pair `Ā = [[A, E], [0, S]]`, `C̄ = [C, F]`.
pub fn augment_leader<T: Scalar>(m: &AgentModel<T>, s: &Mat<T>) -> Result<(Mat<T>, Mat<T>), PlantError> {
    if m.role != Role::Leader {
        return Err(PlantError::RoleMismatch { expected: "leader" });
    }
    m.check_dimensions(s.rows())?;
    let (nx, q) = (m.nx(), s.rows());
    let mut abar = Mat::zeros(nx + q, nx + q);
    abar.set_block(0, 0, &m.a);
    abar.set_block(0, nx, &m.e);
    abar.set_block(nx, nx, s);
    let cbar = m.c.hstack(&m.f)?;
    Ok((abar, cbar))
}

/// Controller poles `{−2, −3, …}` used when gains are synthesized.
pub fn default_controller_poles<T: Scalar>(n: usize) -> Vec<Complex<T>> {
    (0..n).map(|j| Complex::new(T::of(-2.0 - j as f64), T::zero())).collect()
}

/// Observer poles `{−4, −5, …}`, faster than the controller.
pub fn default_observer_poles<T: Scalar>(n: usize) -> Vec<Complex<T>> {
    (0..n).map(|j| Complex::new(T::of(-4.0 - j as f64), T::zero())).collect()
}

/// Monic polynomial coefficients `[c0, c1, …, c_{n−1}]` (leading one
/// omitted) with the given roots. Roots must be closed under conjugation.
fn monic_from_roots<T: Scalar>(roots: &[Complex<T>]) -> Result<Vec<T>, PlantError> {
    let n = roots.len();
    let scale = roots.iter().fold(T::one(), |m, r| m.max(r.norm()));
    let tol = T::of(1e-9) * scale;
    let mut used = vec![false; n];
    for (i, r) in roots.iter().enumerate() {
        if r.im.abs() <= tol || used[i] {
            continue;
        }
        let partner = (0..n).find(|&j| j != i && !used[j] && (roots[j] - r.conj()).norm() <= tol);
        match partner {
            Some(j) => {
                used[i] = true;
                used[j] = true;
            }
            None => return Err(PlantError::BadSpectrum { expected: n }),
        }
    }
    // coeffs[k] multiplies λ^k, highest first grows as we multiply.
    let mut coeffs = vec![Complex::new(T::one(), T::zero())];
    for r in roots {
        let mut next = vec![Complex::new(T::zero(), T::zero()); coeffs.len() + 1];
        for (k, c) in coeffs.iter().enumerate() {
            next[k + 1] += *c;
            next[k] -= *c * r;
        }
        coeffs = next;
    }
    Ok(coeffs[..n].iter().map(|c| c.re).collect())
}

/// Ackermann pole placement: returns the `1 × n` row `k` such that
/// `A + b k` has the requested spectrum.
pub fn place_poles_single_input<T: Scalar>(
    a: &Mat<T>,
    b: &Mat<T>,
    desired: &[Complex<T>],
) -> Result<Mat<T>, PlantError> {
    let n = a.rows();
    if !a.is_square() || b.shape() != (n, 1) {
        return Err(PlantError::Dimension { field: "b", expected: (n, 1), found: b.shape() });
    }
    if desired.len() != n {
        return Err(PlantError::BadSpectrum { expected: n });
    }
    let coeffs = monic_from_roots(desired)?;

    let mut ctrb = Mat::zeros(n, n);
    let mut col = b.clone();
    for j in 0..n {
        ctrb.set_block(0, j, &col);
        col = a * &col;
    }
    let r = rank(&ctrb, T::of(1e-10));
    if r < n {
        return Err(PlantError::Uncontrollable { rank: r, needed: n });
    }

    // φ(A) = A^n + c_{n−1} A^{n−1} + … + c_0 I by Horner.
    let mut phi = Mat::identity(n);
    for k in (0..n).rev() {
        phi = &(a * &phi) + &Mat::identity(n).scale(coeffs[k]);
    }
    // k = −e_nᵀ 𝒞⁻¹ φ(A)  ⇔  solve 𝒞ᵀ w = e_n, k = −wᵀ φ(A).
    let mut en = Mat::zeros(n, 1);
    en[(n - 1, 0)] = T::one();
    let w = solve_linear(&ctrb.transpose(), &en)?;
    Ok(-&(&w.transpose() * &phi))
}

/// Dual placement for a single-output pair: returns the `n × 1` column `l`
/// such that `A + l c` has the requested spectrum.
pub fn place_observer_single_output<T: Scalar>(
    a: &Mat<T>,
    c: &Mat<T>,
    desired: &[Complex<T>],
) -> Result<Mat<T>, PlantError> {
    if c.rows() != 1 {
        return Err(PlantError::MultiChannel { what: "output", gain: "the observer gain" });
    }
    Ok(place_poles_single_input(&a.transpose(), &c.transpose(), desired)?.transpose())
}

/// Gains from the default pole sets. Only single-input and single-output
/// agents are supported; others must be given gains explicitly.
pub fn synthesize_gains<T: Scalar>(m: &AgentModel<T>, s: &Mat<T>) -> Result<GainSet<T>, PlantError> {
    m.check_dimensions(s.rows())?;
    if m.nu() != 1 {
        return Err(PlantError::MultiChannel { what: "input", gain: "K" });
    }
    if m.ny() != 1 {
        return Err(PlantError::MultiChannel { what: "output", gain: "L1/L2" });
    }
    let nx = m.nx();
    let k = place_poles_single_input(&m.a, &m.b, &default_controller_poles(nx))?;
    match m.role {
        Role::Follower => {
            let l1 = place_observer_single_output(&m.a, &m.c, &default_observer_poles(nx))?;
            Ok(GainSet { k, l1, l2: None })
        }
        Role::Leader => {
            let (abar, cbar) = augment_leader(m, s)?;
            let lbar = place_observer_single_output(&abar, &cbar, &default_observer_poles(abar.rows()))?;
            Ok(GainSet {
                k,
                l1: lbar.block(0, 0, nx, 1),
                l2: Some(lbar.block(nx, 0, s.rows(), 1)),
            })
        }
    }
}

/// Stability of the closed-loop matrices a gain set must render Hurwitz.
#[derive(Debug, Clone, PartialEq)]
pub struct GainCheck {
    /// Spectral abscissa of `A + BK`.
    pub controller_abscissa: f64,
    /// Spectral abscissa of `A + L1 C` (followers) or `Ā + L̄ C̄` (leaders).
    pub observer_abscissa: f64,
}

impl GainCheck {
    pub fn controller_stable(&self) -> bool {
        self.controller_abscissa < 0.0
    }

    pub fn observer_stable(&self) -> bool {
        self.observer_abscissa < 0.0
    }

    pub fn passed(&self) -> bool {
        self.controller_stable() && self.observer_stable()
    }
}

pub fn check_gains<T: Scalar>(m: &AgentModel<T>, s: &Mat<T>, g: &GainSet<T>) -> Result<GainCheck, PlantError> {
    m.check_dimensions(s.rows())?;
    g.check_dimensions(m)?;
    let controller = spectral_abscissa(&(&m.a + &(&m.b * &g.k)))?;
    let observer = match (m.role, &g.l2) {
        (Role::Leader, Some(l2)) => {
            let (abar, cbar) = augment_leader(m, s)?;
            let lbar = g.l1.vstack(l2)?;
            spectral_abscissa(&(&abar + &(&lbar * &cbar)))?
        }
        _ => spectral_abscissa(&(&m.a + &(&g.l1 * &m.c)))?,
    };
    Ok(GainCheck {
        controller_abscissa: controller.as_f64(),
        observer_abscissa: observer.as_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Mat<f64> {
        Mat::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn leader() -> AgentModel<f64> {
        AgentModel {
            a: m(&[&[0.0, 1.0], &[0.0, 0.0]]),
            b: m(&[&[0.0], &[1.0]]),
            c: m(&[&[1.0, 0.0]]),
            d: m(&[&[0.0]]),
            e: m(&[&[0.0, 0.0], &[0.0, 1.0]]),
            f: m(&[&[-1.0, 0.0]]),
            ce: m(&[&[1.0, 0.0]]),
            de: m(&[&[0.0]]),
            fe: m(&[&[-1.0, 0.0]]),
            role: Role::Leader,
        }
    }

    fn rotation() -> Mat<f64> {
        m(&[&[0.0, 1.0], &[-1.0, 0.0]])
    }

    fn sorted_re(v: &[Complex<f64>]) -> Vec<f64> {
        let mut r: Vec<f64> = v.iter().map(|z| z.re).collect();
        r.sort_by(|a, b| a.partial_cmp(b).unwrap());
        r
    }

    #[test]
    fn stabilizability_examples() {
        assert!(pbh_stabilizable(&m(&[&[0.0, 1.0], &[0.0, 0.0]]), &m(&[&[0.0], &[1.0]]), &tol()).unwrap());
        assert!(pbh_stabilizable(&(-&Mat::<f64>::identity(2)), &Mat::zeros(2, 1), &tol()).unwrap());
        assert!(!pbh_stabilizable(&Mat::diag(&[1.0, -1.0]), &m(&[&[0.0], &[1.0]]), &tol()).unwrap());
    }

    #[test]
    fn detectability_examples() {
        let a = m(&[&[0.0, 1.0], &[-2.0, -2.0]]);
        assert!(pbh_detectable(&m(&[&[1.0, 0.0]]), &a, &tol()).unwrap());
        assert!(pbh_detectable(&Mat::identity(2), &Mat::diag(&[5.0, 3.0]), &tol()).unwrap());
        assert!(!pbh_detectable(&m(&[&[0.0, 1.0]]), &Mat::diag(&[1.0, -1.0]), &tol()).unwrap());
    }

    #[test]
    fn marginal_modes_count_as_unstable() {
        // Pure rotation with no input: imaginary-axis modes are not stabilizable.
        assert!(!pbh_stabilizable(&rotation(), &Mat::zeros(2, 1), &tol()).unwrap());
    }

    #[test]
    fn augmented_leader_blocks() {
        let (abar, cbar) = augment_leader(&leader(), &rotation()).unwrap();
        assert_eq!(abar.shape(), (4, 4));
        assert_eq!(abar.block(0, 2, 2, 2), m(&[&[0.0, 0.0], &[0.0, 1.0]]));
        assert_eq!(abar.block(2, 2, 2, 2), rotation());
        assert_eq!(abar.block(2, 0, 2, 2), Mat::zeros(2, 2));
        assert_eq!(cbar, m(&[&[1.0, 0.0, -1.0, 0.0]]));

        let mut plain = leader();
        plain.e = Mat::zeros(2, 2);
        plain.f = Mat::zeros(1, 2);
        let (abar, cbar) = augment_leader(&plain, &rotation()).unwrap();
        assert_eq!(abar.block(0, 2, 2, 2), Mat::zeros(2, 2));
        assert_eq!(cbar, m(&[&[1.0, 0.0, 0.0, 0.0]]));

        let mut follower = leader();
        follower.role = Role::Follower;
        assert!(matches!(augment_leader(&follower, &rotation()), Err(PlantError::RoleMismatch { .. })));
    }

    #[test]
    fn ackermann_places_poles() {
        let a = m(&[&[0.0, 1.0], &[-2.0, -2.0]]);
        let b = m(&[&[0.0], &[1.0]]);
        let want = [Complex::new(-3.0, 0.0), Complex::new(-4.0, 0.0)];
        let k = place_poles_single_input(&a, &b, &want).unwrap();
        let ev = eigenvalues(&(&a + &(&b * &k))).unwrap();
        let got = sorted_re(&ev);
        assert!((got[0] + 4.0).abs() < 1e-6 && (got[1] + 3.0).abs() < 1e-6);
    }

    #[test]
    fn ackermann_complex_pair() {
        let a = m(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[1.0, 0.0, 0.0]]);
        let b = m(&[&[0.0], &[0.0], &[1.0]]);
        let want = [Complex::new(-1.0, 2.0), Complex::new(-1.0, -2.0), Complex::new(-5.0, 0.0)];
        let k = place_poles_single_input(&a, &b, &want).unwrap();
        let ev = eigenvalues(&(&a + &(&b * &k))).unwrap();
        for w in &want {
            assert!(ev.iter().any(|e| (e - w).norm() < 1e-6), "missing {w}");
        }
        assert!(matches!(
            place_poles_single_input(&a, &b, &[Complex::new(-1.0, 2.0), Complex::new(-2.0, 0.0), Complex::new(-3.0, 0.0)]),
            Err(PlantError::BadSpectrum { .. })
        ));
    }

    #[test]
    fn already_placed_spectrum() {
        // A + b·0 already has {−1, −2}; placement still lands on the target.
        let a = m(&[&[0.0, 1.0], &[-2.0, -3.0]]);
        let b = m(&[&[0.0], &[1.0]]);
        let want = [Complex::new(-1.0, 0.0), Complex::new(-2.0, 0.0)];
        let k = place_poles_single_input(&a, &b, &want).unwrap();
        let got = sorted_re(&eigenvalues(&(&a + &(&b * &k))).unwrap());
        assert!((got[0] + 2.0).abs() < 1e-6 && (got[1] + 1.0).abs() < 1e-6);
    }

    #[test]
    fn uncontrollable_pair_rejected() {
        let err = place_poles_single_input(
            &Mat::diag(&[1.0, -1.0]),
            &m(&[&[0.0], &[1.0]]),
            &[Complex::new(-1.0, 0.0), Complex::new(-2.0, 0.0)],
        )
        .unwrap_err();
        assert!(matches!(err, PlantError::Uncontrollable { rank: 1, needed: 2 }));
    }

    #[test]
    fn explicit_example_gains_are_accepted() {
        let mut follower = leader();
        follower.role = Role::Follower;
        follower.a = m(&[&[0.0, 1.0], &[-2.0, -2.0]]);
        follower.e = Mat::zeros(2, 2);
        follower.f = Mat::zeros(1, 2);
        let g = GainSet { k: m(&[&[-10.0, -8.0]]), l1: m(&[&[-10.0], &[-10.0]]), l2: None };
        assert!(check_gains(&follower, &rotation(), &g).unwrap().passed());

        let g = GainSet {
            k: m(&[&[-10.0, -8.0]]),
            l1: m(&[&[-15.0], &[-25.0]]),
            l2: Some(m(&[&[-10.0], &[-10.0]])),
        };
        assert!(check_gains(&leader(), &rotation(), &g).unwrap().passed());

        let bad = GainSet { k: m(&[&[5.0, 5.0]]), l1: m(&[&[-10.0], &[-10.0]]), l2: None };
        assert!(!check_gains(&follower, &rotation(), &bad).unwrap().controller_stable());
    }

    #[test]
    fn synthesized_gains_are_stabilizing() {
        let g = synthesize_gains(&leader(), &rotation()).unwrap();
        let check = check_gains(&leader(), &rotation(), &g).unwrap();
        assert!((check.controller_abscissa + 2.0).abs() < 1e-6);
        assert!((check.observer_abscissa + 4.0).abs() < 1e-5);

        let mut follower = leader();
        follower.role = Role::Follower;
        let g = synthesize_gains(&follower, &rotation()).unwrap();
        assert!(g.l2.is_none());
        assert!(check_gains(&follower, &rotation(), &g).unwrap().passed());
    }
}
