use crate::linalg::eigenvalues;
use crate::scalar::Scalar;
use crate::tolerance::Tolerances;

use super::{
    augment_leader, pbh_detectable, pbh_stabilizable, solve_regulator_equations, AgentModel,
    ExoSystem, PlantError, RegulatorSolution, Role,
};

/// Per-agent solvability checks.
#[derive(Debug, Clone)]
pub struct AgentAssumptions<T> {
    pub role: Role,
    /// `(A, B)` stabilizable.
    pub stabilizable: Result<bool, PlantError>,
    /// `(C, A)` detectable for followers, `(C̄, Ā)` for leaders.
    pub detectable: Result<bool, PlantError>,
    /// Regulator equations solved.
    pub regulator: Result<RegulatorSolution<T>, PlantError>,
}

impl<T> AgentAssumptions<T> {
    pub fn stabilizable_ok(&self) -> bool {
        matches!(self.stabilizable, Ok(true))
    }

    pub fn detectable_ok(&self) -> bool {
        matches!(self.detectable, Ok(true))
    }

    pub fn regulator_ok(&self) -> bool {
        self.regulator.is_ok()
    }

    pub fn passed(&self) -> bool {
        self.stabilizable_ok() && self.detectable_ok() && self.regulator_ok()
    }
}

#[derive(Debug, Clone)]
pub struct AssumptionReport<T> {
    pub agents: Vec<AgentAssumptions<T>>,
    /// Largest `|Re λ|` over the exosystem spectrum.
    pub exo_max_abs_real: f64,
    /// Bound the exosystem spectrum was held to.
    pub exo_bound: f64,
    /// Eigenvalue failure of the exosystem, if any.
    pub exo_error: Option<PlantError>,
}

impl<T> AssumptionReport<T> {
    /// Exosystem spectrum lies on the imaginary axis.
    pub fn exo_marginal(&self) -> bool {
        self.exo_error.is_none() && self.exo_max_abs_real <= self.exo_bound
    }

    pub fn agents_passed(&self) -> bool {
        self.agents.iter().all(AgentAssumptions::passed)
    }

    pub fn passed(&self) -> bool {
        self.agents_passed() && self.exo_marginal()
    }
}

/// Runs the stabilizability, detectability and regulator-equation checks
/// for every agent and the imaginary-axis check for the exosystem. Failures
/// are recorded in the report rather than returned.
pub fn validate_assumptions<T: Scalar>(
    models: &[AgentModel<T>],
    exo: &ExoSystem<T>,
    tol: &Tolerances,
) -> AssumptionReport<T> {
    let s = &exo.s;
    let agents = models
        .iter()
        .map(|m| {
            let dims = m.check_dimensions(exo.q());
            let stabilizable = dims.clone().and_then(|_| pbh_stabilizable(&m.a, &m.b, tol));
            let detectable = dims.and_then(|_| match m.role {
                Role::Follower => pbh_detectable(&m.c, &m.a, tol),
                Role::Leader => {
                    let (abar, cbar) = augment_leader(m, s)?;
                    pbh_detectable(&cbar, &abar, tol)
                }
            });
            AgentAssumptions {
                role: m.role,
                stabilizable,
                detectable,
                regulator: solve_regulator_equations(m, s, tol),
            }
        })
        .collect();

    let exo_bound = tol.imaginary_axis * (1.0 + s.max_abs().as_f64());
    let (exo_max_abs_real, exo_error) = match eigenvalues(s) {
        Ok(ev) => (ev.iter().fold(0.0f64, |m, l| m.max(l.re.as_f64().abs())), None),
        Err(e) => (f64::INFINITY, Some(e.into())),
    };
    AssumptionReport { agents, exo_max_abs_real, exo_bound, exo_error }
}
