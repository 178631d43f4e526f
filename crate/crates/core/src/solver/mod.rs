//! Multi-structure recovery: minimize `Σ_p λ_p f_p(Ψ_p x)` subject to `‖y − Φx‖ ≤ ε`.
//!
//! The variable is always an `N × R` matrix; vector problems use `R = 1`. Every
//! regularizer is evaluated on its operator output, with `f_p` one of the L1 norm,
//! the group L2/L1 norm (applied per column) or the nuclear norm of the output
//! reshaped to a declared shape.

mod admm;
mod least_squares;
mod presets;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{mismatch, Error, Result};
use crate::ops::AnalysisOperator;
use crate::prox::{nuclear_norm, GroupStructure};

pub use admm::solve;
pub use least_squares::{least_squares_recover, min_norm_in_ball};
pub use presets::{make_preset, Preset, PresetParams};

#[derive(Debug, Clone, PartialEq)]
pub enum Norm {
    L1,
    GroupL2L1(GroupStructure),
    /// Nuclear norm of the operator output reshaped (column-major) to `rows × cols`.
    Nuclear {
        rows: usize,
        cols: usize,
    },
}

/// One weighted term `λ_p f_p(Ψ_p x)`.
#[derive(Debug, Clone)]
pub struct Regularizer {
    operator: AnalysisOperator,
    norm: Norm,
    weight: f64,
}

impl Regularizer {
    pub fn new(operator: AnalysisOperator, norm: Norm, weight: f64) -> Result<Self> {
        if !weight.is_finite() || weight < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "regularizer weight must be finite and nonnegative, got {weight}"
            )));
        }
        match &norm {
            Norm::GroupL2L1(groups) if groups.len() != operator.rows() => {
                return Err(mismatch("group structure", operator.rows(), groups.len()));
            }
            Norm::Nuclear { rows, cols } if *rows == 0 || *cols == 0 => {
                return Err(Error::InvalidDimension(
                    "nuclear shape must be non-empty".into(),
                ));
            }
            _ => {}
        }
        Ok(Self {
            operator,
            norm,
            weight,
        })
    }

    pub fn l1(operator: AnalysisOperator, weight: f64) -> Result<Self> {
        Self::new(operator, Norm::L1, weight)
    }

    pub fn operator(&self) -> &AnalysisOperator {
        &self.operator
    }

    pub fn norm(&self) -> &Norm {
        &self.norm
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Unweighted `f_p(Ψ_p X)`.
    pub fn evaluate(&self, x: &DMatrix<f64>) -> Result<f64> {
        let theta = self.operator.apply(x)?;
        Ok(self.norm_of(&theta))
    }

    pub(crate) fn norm_of(&self, theta: &DMatrix<f64>) -> f64 {
        match &self.norm {
            Norm::L1 => theta.iter().map(|v| v.abs()).sum(),
            Norm::GroupL2L1(groups) => theta.column_iter().map(|c| groups.norm(c.as_slice())).sum(),
            Norm::Nuclear { rows, cols } => {
                nuclear_norm(&DMatrix::from_column_slice(*rows, *cols, theta.as_slice()))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Vector,
    Matrix,
}

/// Measurements, sensing matrix, residual bound and regularizer stack.
#[derive(Debug, Clone)]
pub struct RecoveryProblem {
    measurements: DMatrix<f64>,
    sensing: DMatrix<f64>,
    epsilon: f64,
    regularizers: Vec<Regularizer>,
    mode: Mode,
}

impl RecoveryProblem {
    pub fn vector(
        measurements: DVector<f64>,
        sensing: DMatrix<f64>,
        epsilon: f64,
        regularizers: Vec<Regularizer>,
    ) -> Result<Self> {
        let y = DMatrix::from_column_slice(measurements.len(), 1, measurements.as_slice());
        Self::new(y, sensing, epsilon, regularizers, Mode::Vector)
    }

    pub fn matrix(
        measurements: DMatrix<f64>,
        sensing: DMatrix<f64>,
        epsilon: f64,
        regularizers: Vec<Regularizer>,
    ) -> Result<Self> {
        Self::new(measurements, sensing, epsilon, regularizers, Mode::Matrix)
    }

    pub fn new(
        measurements: DMatrix<f64>,
        sensing: DMatrix<f64>,
        epsilon: f64,
        regularizers: Vec<Regularizer>,
        mode: Mode,
    ) -> Result<Self> {
        if sensing.nrows() == 0 || sensing.ncols() == 0 {
            return Err(Error::InvalidDimension("sensing matrix is empty".into()));
        }
        if measurements.nrows() != sensing.nrows() {
            return Err(mismatch(
                "measurements",
                sensing.nrows(),
                measurements.nrows(),
            ));
        }
        if mode == Mode::Vector && measurements.ncols() != 1 {
            return Err(mismatch("vector measurements", 1, measurements.ncols()));
        }
        if measurements.ncols() == 0 {
            return Err(Error::InvalidDimension("no measurement columns".into()));
        }
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be finite and nonnegative, got {epsilon}"
            )));
        }
        if measurements.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("measurements"));
        }
        if sensing.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sensing matrix"));
        }
        if regularizers.is_empty() {
            return Err(Error::InvalidParameter(
                "a recovery problem needs at least one regularizer".into(),
            ));
        }
        let n = sensing.ncols();
        let r = measurements.ncols();
        for reg in &regularizers {
            if reg.operator.cols() != n {
                return Err(mismatch("regularizer operator", n, reg.operator.cols()));
            }
            if let Norm::Nuclear { rows, cols } = reg.norm {
                if rows * cols != reg.operator.rows() * r {
                    return Err(mismatch(
                        "nuclear shape",
                        reg.operator.rows() * r,
                        rows * cols,
                    ));
                }
            }
        }
        Ok(Self {
            measurements,
            sensing,
            epsilon,
            regularizers,
            mode,
        })
    }

    pub fn measurements(&self) -> &DMatrix<f64> {
        &self.measurements
    }

    pub fn sensing(&self) -> &DMatrix<f64> {
        &self.sensing
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn regularizers(&self) -> &[Regularizer] {
        &self.regularizers
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Signal length `N`.
    pub fn signal_len(&self) -> usize {
        self.sensing.ncols()
    }

    /// Number of signal columns `R`.
    pub fn columns(&self) -> usize {
        self.measurements.ncols()
    }

    /// `Σ_p λ_p f_p(Ψ_p X)`.
    pub fn objective(&self, x: &DMatrix<f64>) -> Result<f64> {
        let mut total = 0.0;
        for reg in &self.regularizers {
            if reg.weight > 0.0 {
                total += reg.weight * reg.evaluate(x)?;
            }
        }
        Ok(total)
    }

    /// `‖Y − ΦX‖` (Frobenius).
    pub fn data_misfit(&self, x: &DMatrix<f64>) -> f64 {
        (&self.measurements - &self.sensing * x).norm()
    }

    /// Same problem with a different residual bound.
    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be finite and nonnegative, got {epsilon}"
            )));
        }
        self.epsilon = epsilon;
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iterations: usize,
    pub abs_tolerance: f64,
    pub rel_tolerance: f64,
    pub penalty: f64,
    pub penalty_adaptation: bool,
    pub seed: Option<u64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            abs_tolerance: 1e-6,
            rel_tolerance: 1e-4,
            penalty: 1.0,
            penalty_adaptation: true,
            seed: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter(
                "max_iterations must be positive".into(),
            ));
        }
        for (name, v) in [
            ("abs_tolerance", self.abs_tolerance),
            ("rel_tolerance", self.rel_tolerance),
            ("penalty", self.penalty),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RecoveryResult {
    pub estimate: DMatrix<f64>,
    pub mode: Mode,
    pub converged: bool,
    pub iterations: usize,
    pub primal_residual_history: Vec<f64>,
    pub dual_residual_history: Vec<f64>,
    pub objective_history: Vec<f64>,
    /// `‖y − Φx̂‖` at the returned estimate.
    pub final_data_misfit: f64,
    /// `Σ λ_p f_p(Ψ_p x̂)` at the returned estimate.
    pub objective: f64,
    /// Set when a rank-deficient system forced a regularized linear solve.
    pub regularized: bool,
    /// Primal and dual stopping thresholds at the last iteration (zero when no
    /// iteration ran).
    pub final_tolerances: (f64, f64),
}

impl RecoveryResult {
    /// First column of the estimate, i.e. `x̂` for vector problems.
    pub fn estimate_vector(&self) -> DVector<f64> {
        self.estimate.column(0).into_owned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regularizer_rejects_negative_weight() {
        let id = AnalysisOperator::identity(3).unwrap();
        assert!(Regularizer::l1(id.clone(), -1.0).is_err());
        assert!(Regularizer::l1(id.clone(), f64::NAN).is_err());
        let g = GroupStructure::singletons(4).unwrap();
        assert!(Regularizer::new(id, Norm::GroupL2L1(g), 1.0).is_err());
    }

    #[test]
    fn problem_validation() {
        let id = AnalysisOperator::identity(3).unwrap();
        let phi = DMatrix::identity(2, 3);
        let reg = Regularizer::l1(id.clone(), 1.0).unwrap();
        let y = DVector::from_column_slice(&[1.0, 2.0]);
        assert!(RecoveryProblem::vector(y.clone(), phi.clone(), -1.0, vec![reg.clone()]).is_err());
        assert!(RecoveryProblem::vector(y.clone(), phi.clone(), 0.0, vec![]).is_err());
        let wrong = DVector::from_column_slice(&[1.0]);
        assert!(RecoveryProblem::vector(wrong, phi.clone(), 0.0, vec![reg.clone()]).is_err());
        let bad_phi = DMatrix::from_element(2, 3, f64::INFINITY);
        assert!(RecoveryProblem::vector(y.clone(), bad_phi, 0.0, vec![reg.clone()]).is_err());
        let nuc = Regularizer::new(id, Norm::Nuclear { rows: 2, cols: 2 }, 1.0).unwrap();
        assert!(RecoveryProblem::vector(y.clone(), phi.clone(), 0.0, vec![nuc]).is_err());
        let p = RecoveryProblem::vector(y, phi, 0.5, vec![reg]).unwrap();
        assert_eq!(p.signal_len(), 3);
        assert_eq!(p.columns(), 1);
    }

    #[test]
    fn objective_sums_weighted_terms() {
        let id = AnalysisOperator::identity(2).unwrap();
        let regs = vec![
            Regularizer::l1(id.clone(), 1.0).unwrap(),
            Regularizer::new(id, Norm::GroupL2L1(GroupStructure::single(2).unwrap()), 0.5).unwrap(),
        ];
        let p = RecoveryProblem::vector(
            DVector::from_column_slice(&[0.0, 0.0]),
            DMatrix::identity(2, 2),
            0.0,
            regs,
        )
        .unwrap();
        let x = DMatrix::from_column_slice(2, 1, &[3.0, -4.0]);
        assert!((p.objective(&x).unwrap() - (7.0 + 2.5)).abs() < 1e-14);
        assert!((p.data_misfit(&x) - 5.0).abs() < 1e-14);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = SolverConfig {
            penalty: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
