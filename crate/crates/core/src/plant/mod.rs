//! Agent and exosystem models, regulator equations, solvability checks and
//! gain synthesis.

mod regulator;
mod synthesis;
mod validate;

use thiserror::Error;

use crate::linalg::{LinalgError, Mat};
use crate::scalar::Scalar;

pub use regulator::solve_regulator_equations;
pub use synthesis::{
    augment_leader, check_gains, default_controller_poles, default_observer_poles,
    pbh_detectable, pbh_stabilizable, place_observer_single_output, place_poles_single_input,
    synthesize_gains, GainCheck,
};
pub use validate::{validate_assumptions, AgentAssumptions, AssumptionReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Follower,
    Leader,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Follower => "follower",
            Role::Leader => "leader",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlantError {
    #[error("{field}: expected {expected:?}, found {found:?}")]
    Dimension {
        field: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("regulator equations are unsolvable (least-squares residual {residual:e})")]
    Unsolvable { residual: f64 },
    #[error("regulator solution residual {residual:e} exceeds tolerance {tolerance:e}")]
    Inaccurate { residual: f64, tolerance: f64 },
    #[error("pair is not controllable: controllability rank {rank} < {needed}")]
    Uncontrollable { rank: usize, needed: usize },
    #[error("desired spectrum must have {expected} values closed under conjugation")]
    BadSpectrum { expected: usize },
    #[error("automatic synthesis needs a single {what}; supply {gain} explicitly")]
    MultiChannel { what: &'static str, gain: &'static str },
    #[error("operation requires a {expected} agent")]
    RoleMismatch { expected: &'static str },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Linear agent `ẋ = Ax + Bu + Eυ`, `y = Cx + Du + Fυ`, with regulated error
/// `e = Ce x + De u + Fe υ`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentModel<T> {
    pub a: Mat<T>,
    pub b: Mat<T>,
    pub c: Mat<T>,
    pub d: Mat<T>,
    pub e: Mat<T>,
    pub f: Mat<T>,
    pub ce: Mat<T>,
    pub de: Mat<T>,
    pub fe: Mat<T>,
    pub role: Role,
}

impl<T: Scalar> AgentModel<T> {
    /// State dimension.
    pub fn nx(&self) -> usize {
        self.a.rows()
    }

    pub fn nu(&self) -> usize {
        self.b.cols()
    }

    pub fn ny(&self) -> usize {
        self.c.rows()
    }

    pub fn pe(&self) -> usize {
        self.ce.rows()
    }

    /// Exosystem dimension this model is built for.
    pub fn q(&self) -> usize {
        self.e.cols()
    }

    /// Checks every block against `A`, `B`, `C`, `Ce` and the shared `q`.
    pub fn check_dimensions(&self, q: usize) -> Result<(), PlantError> {
        let nx = self.a.rows();
        let nu = self.b.cols();
        let ny = self.c.rows();
        let pe = self.ce.rows();
        let expect = |field, m: &Mat<T>, shape: (usize, usize)| {
            if m.shape() == shape {
                Ok(())
            } else {
                Err(PlantError::Dimension { field, expected: shape, found: m.shape() })
            }
        };
        expect("A", &self.a, (nx, nx))?;
        expect("B", &self.b, (nx, nu))?;
        expect("C", &self.c, (ny, nx))?;
        expect("D", &self.d, (ny, nu))?;
        expect("E", &self.e, (nx, q))?;
        expect("F", &self.f, (ny, q))?;
        expect("Ce", &self.ce, (pe, nx))?;
        expect("De", &self.de, (pe, nu))?;
        expect("Fe", &self.fe, (pe, q))?;
        Ok(())
    }
}

/// Autonomous exosystem `υ̇ = Sυ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExoSystem<T> {
    pub s: Mat<T>,
    pub upsilon0: Vec<T>,
}

impl<T: Scalar> ExoSystem<T> {
    pub fn q(&self) -> usize {
        self.s.rows()
    }

    pub fn check_dimensions(&self) -> Result<(), PlantError> {
        let q = self.s.rows();
        if !self.s.is_square() {
            return Err(PlantError::Dimension { field: "S", expected: (q, q), found: self.s.shape() });
        }
        if self.upsilon0.len() != q {
            return Err(PlantError::Dimension {
                field: "upsilon0",
                expected: (q, 1),
                found: (self.upsilon0.len(), 1),
            });
        }
        Ok(())
    }
}

/// Solution `(Π, Γ)` of `ΠS = AΠ + BΓ + E`, `0 = CeΠ + DeΓ + Fe`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegulatorSolution<T> {
    pub pi: Mat<T>,
    pub gamma: Mat<T>,
    /// Dimension of the solution set's null space; zero when unique.
    pub nullity: usize,
    /// `‖ΠS − AΠ − BΓ − E‖_max`.
    pub residual_dynamic: T,
    /// `‖CeΠ + DeΓ + Fe‖_max`.
    pub residual_output: T,
}

/// Controller gain `K`, observer gain `L1`, and for leaders the exosystem
/// observer gain `L2`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSet<T> {
    pub k: Mat<T>,
    pub l1: Mat<T>,
    pub l2: Option<Mat<T>>,
}

impl<T: Scalar> GainSet<T> {
    pub fn check_dimensions(&self, model: &AgentModel<T>) -> Result<(), PlantError> {
        let (nx, nu, ny, q) = (model.nx(), model.nu(), model.ny(), model.q());
        if self.k.shape() != (nu, nx) {
            return Err(PlantError::Dimension { field: "K", expected: (nu, nx), found: self.k.shape() });
        }
        if self.l1.shape() != (nx, ny) {
            return Err(PlantError::Dimension { field: "L1", expected: (nx, ny), found: self.l1.shape() });
        }
        match (model.role, &self.l2) {
            (Role::Leader, Some(l2)) if l2.shape() != (q, ny) => Err(PlantError::Dimension {
                field: "L2",
                expected: (q, ny),
                found: l2.shape(),
            }),
            (Role::Leader, None) => Err(PlantError::Dimension { field: "L2", expected: (q, ny), found: (0, 0) }),
            _ => Ok(()),
        }
    }
}
