//! Numerical thresholds used by the certificate checks, gathered in one place.

/// Default global relative tolerance.
pub const DEFAULT_GLOBAL: f64 = 1e-8;

/// Environment variable that rescales every tolerance.
pub const ENV_VAR: &str = "COOPREG_TOL";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Max residual accepted for each regulator equation.
    pub regulator_residual: f64,
    /// Least-squares residual above which the regulator equations are unsolvable.
    pub regulator_unsolvable: f64,
    /// Relative singular-value cutoff for the minimum-norm solve.
    pub singular_value: f64,
    /// Relative pivot threshold for rank decisions.
    pub rank: f64,
    /// Eigenvalues with `Re λ ≥ −marginal` count as unstable or marginal.
    pub marginal: f64,
    /// Assumption on the exosystem: `|Re λ| ≤ imaginary_axis · (1 + ‖S‖_max)`.
    pub imaginary_axis: f64,
    /// Smallest entry of `−L₁⁻¹L₂` still counted as nonnegative (negated).
    pub stochastic_entry: f64,
    /// Allowed deviation of each row sum of `−L₁⁻¹L₂` from one.
    pub stochastic_row_sum: f64,
    /// Agreement between the two regulated-error computations.
    pub error_decomposition: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            regulator_residual: 1e-8,
            regulator_unsolvable: 1e-6,
            singular_value: 1e-12,
            rank: 1e-9,
            marginal: 1e-9,
            imaginary_axis: 1e-7,
            stochastic_entry: 1e-10,
            stochastic_row_sum: 1e-8,
            error_decomposition: 1e-9,
        }
    }
}

impl Tolerances {
    /// Every default multiplied by `global / DEFAULT_GLOBAL`.
    pub fn scaled(global: f64) -> Self {
        let k = global / DEFAULT_GLOBAL;
        let d = Self::default();
        Self {
            regulator_residual: d.regulator_residual * k,
            regulator_unsolvable: d.regulator_unsolvable * k,
            singular_value: d.singular_value * k,
            rank: d.rank * k,
            marginal: d.marginal * k,
            imaginary_axis: d.imaginary_axis * k,
            stochastic_entry: d.stochastic_entry * k,
            stochastic_row_sum: d.stochastic_row_sum * k,
            error_decomposition: d.error_decomposition * k,
        }
    }

    /// Defaults, rescaled by `COOPREG_TOL` when it holds a positive number.
    pub fn from_env() -> Self {
        std::env::var(ENV_VAR)
            .ok()
            .and_then(|v| v.trim().parse::<f64>().ok())
            .filter(|v| v.is_finite() && *v > 0.0)
            .map_or_else(Self::default, Self::scaled)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaling_at_default_is_identity() {
        assert_eq!(Tolerances::scaled(DEFAULT_GLOBAL), Tolerances::default());
        let loose = Tolerances::scaled(1e-6);
        assert!((loose.regulator_residual - 1e-6).abs() < 1e-20);
    }
}
