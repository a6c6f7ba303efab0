use crate::linalg::{lstsq_min_norm, Mat};
use crate::scalar::Scalar;
use crate::tolerance::Tolerances;

use super::{AgentModel, PlantError, RegulatorSolution};

/// Solves the regulator equations for one agent.
///
/// Both equations are vectorized column-wise into a single linear system in
/// `z = [vec Π; vec Γ]`:
///
/// ```text
/// [Sᵀ⊗I − I⊗A   −I⊗B ] z = [ vec E  ]
/// [  I⊗Ce        I⊗De] z   [−vec Fe ]
/// ```
///
/// and solved in the least-squares sense; the minimum-norm solution is
/// returned when the system is underdetermined.
pub fn solve_regulator_equations<T: Scalar>(
    m: &AgentModel<T>,
    s: &Mat<T>,
    tol: &Tolerances,
) -> Result<RegulatorSolution<T>, PlantError> {
    let q = s.rows();
    m.check_dimensions(q)?;
    let (nx, nu, pe) = (m.nx(), m.nu(), m.pe());
    let iq = Mat::identity(q);
    let ix = Mat::identity(nx);

    let n_pi = nx * q;
    let n_gamma = nu * q;
    let rows = nx * q + pe * q;
    let mut lhs = Mat::zeros(rows, n_pi + n_gamma);
    lhs.set_block(0, 0, &(&s.transpose().kron(&ix) - &iq.kron(&m.a)));
    lhs.set_block(0, n_pi, &-&iq.kron(&m.b));
    lhs.set_block(nx * q, 0, &iq.kron(&m.ce));
    lhs.set_block(nx * q, n_pi, &iq.kron(&m.de));

    let rhs = m.e.vec_cols().vstack(&-&m.fe.vec_cols())?;
    let ls = lstsq_min_norm(&lhs, &rhs, T::of(tol.singular_value))?;
    if ls.residual.as_f64() > tol.regulator_unsolvable {
        return Err(PlantError::Unsolvable { residual: ls.residual.as_f64() });
    }

    let z = ls.x.as_slice();
    let pi = Mat::unvec_cols(&z[..n_pi], nx, q);
    let gamma = Mat::unvec_cols(&z[n_pi..], nu, q);
    let residual_dynamic = (&(&pi * s) - &(&(&(&m.a * &pi) + &(&m.b * &gamma)) + &m.e)).max_abs();
    let residual_output = (&(&(&m.ce * &pi) + &(&m.de * &gamma)) + &m.fe).max_abs();
    let worst = residual_dynamic.max(residual_output).as_f64();
    if worst > tol.regulator_residual {
        return Err(PlantError::Inaccurate { residual: worst, tolerance: tol.regulator_residual });
    }
    Ok(RegulatorSolution {
        pi,
        gamma,
        nullity: n_pi + n_gamma - ls.rank,
        residual_dynamic,
        residual_output,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::Role;

    fn m(rows: &[&[f64]]) -> Mat<f64> {
        Mat::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn rotation() -> Mat<f64> {
        m(&[&[0.0, 1.0], &[-1.0, 0.0]])
    }

    fn example_agent(a: f64, b: f64, c: f64) -> AgentModel<f64> {
        AgentModel {
            a: m(&[&[0.0, 1.0], &[a, a]]),
            b: m(&[&[0.0], &[1.0]]),
            c: m(&[&[1.0, 0.0]]),
            d: m(&[&[0.0]]),
            e: m(&[&[0.0, 0.0], &[0.0, b]]),
            f: m(&[&[c, 0.0]]),
            ce: m(&[&[1.0, 0.0]]),
            de: m(&[&[0.0]]),
            fe: m(&[&[-1.0, 0.0]]),
            role: Role::Follower,
        }
    }

    #[test]
    fn closed_form_family() {
        for (a, b) in [(-2.0, 0.0), (0.0, 1.0), (-2.0, 1.0), (0.0, 0.0)] {
            let sol = solve_regulator_equations(&example_agent(a, b, 0.0), &rotation(), &Tolerances::default())
                .unwrap();
            assert!(sol.pi.max_abs_diff(&Mat::identity(2)) < 1e-12, "a={a} b={b}");
            let want = m(&[&[-(1.0 + a), -(a + b)]]);
            assert!(sol.gamma.max_abs_diff(&want) < 1e-12, "a={a} b={b}");
            assert!(sol.residual_dynamic <= 1e-8 && sol.residual_output <= 1e-8);
            assert_eq!(sol.nullity, 0);
        }
    }

    #[test]
    fn zero_forcing_gives_zero_solution() {
        let mut agent = example_agent(-2.0, 0.0, 0.0);
        agent.e = Mat::zeros(2, 2);
        agent.fe = Mat::zeros(1, 2);
        let sol = solve_regulator_equations(&agent, &rotation(), &Tolerances::default()).unwrap();
        assert_eq!(sol.pi.max_abs(), 0.0);
        assert_eq!(sol.gamma.max_abs(), 0.0);
    }

    #[test]
    fn inconsistent_output_equation() {
        // Ce = 0, De = 0 leaves 0 = Fe, impossible for Fe ≠ 0.
        let mut agent = example_agent(-2.0, 0.0, 0.0);
        agent.ce = Mat::zeros(1, 2);
        let err = solve_regulator_equations(&agent, &rotation(), &Tolerances::default()).unwrap_err();
        assert!(matches!(err, PlantError::Unsolvable { residual } if (residual - 1.0).abs() < 1e-9));
    }

    #[test]
    fn underdetermined_reports_nullity() {
        // Two inputs acting identically: Γ is free along one direction.
        let mut agent = example_agent(-2.0, 0.0, 0.0);
        agent.b = m(&[&[0.0, 0.0], &[1.0, 1.0]]);
        agent.d = Mat::zeros(1, 2);
        agent.de = Mat::zeros(1, 2);
        let sol = solve_regulator_equations(&agent, &rotation(), &Tolerances::default()).unwrap();
        assert_eq!(sol.nullity, 2);
        // Minimum norm splits the effort equally.
        assert!((sol.gamma[(0, 0)] - 0.5).abs() < 1e-12);
        assert!((sol.gamma[(1, 0)] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn dimension_errors_name_the_field() {
        let mut agent = example_agent(-2.0, 0.0, 0.0);
        agent.b = Mat::zeros(3, 1);
        let err = solve_regulator_equations(&agent, &rotation(), &Tolerances::default()).unwrap_err();
        assert!(matches!(err, PlantError::Dimension { field: "B", .. }));
    }
}
