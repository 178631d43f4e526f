//! Consensus ADMM for the multi-structure program.
//!
//! Each active regularizer `p` gets a split variable `Z_p = Ψ_p X`. The residual
//! constraint stays in the `X`-update, which becomes
//!
//! ```text
//! min_X ½ Σ_p ‖Ψ_p X − V_p‖²   s.t.  ‖Y − ΦX‖_F ≤ ε
//! ```
//!
//! With `H = Σ_p Ψ_pᵀΨ_p = LLᵀ` and `W = LᵀX` this is a Euclidean projection onto
//! `{W : ‖GW − Y‖ ≤ ε}`, `G = ΦL⁻ᵀ`. One SVD of `G` up front turns every such
//! projection into a scalar root search for the multiplier. The `Z`-updates are the
//! closed-form proximal maps of module `prox`.

use nalgebra::linalg::Cholesky;
use nalgebra::{DMatrix, DVector, Dyn};

use super::least_squares::min_norm_in_ball;
use super::{Norm, RecoveryProblem, RecoveryResult, Regularizer, SolverConfig};
use crate::error::{Error, Result};
use crate::prox::{
    project_l2_ball_in_place, prox_group_l2_in_place, prox_l1_in_place, prox_nuclear,
};

const RELAXATION: f64 = 1.6;
const BALANCE_RATIO: f64 = 10.0;
const PENALTY_FACTOR: f64 = 2.0;
const PENALTY_RANGE: (f64, f64) = (1e-8, 1e8);
/// The penalty is frozen after this many iterations so the tail of the run is plain
/// fixed-penalty ADMM; unbounded rebalancing can cycle without converging.
const ADAPT_UNTIL: usize = 100;

/// Solve the recovery program.
///
/// Every iterate satisfies the residual constraint up to rounding whenever `Φ` has
/// full row rank; a final minimum-norm correction removes the rounding.
pub fn solve(problem: &RecoveryProblem, config: &SolverConfig) -> Result<RecoveryResult> {
    config.validate()?;
    let active: Vec<&Regularizer> = problem
        .regularizers()
        .iter()
        .filter(|r| r.weight() > 0.0)
        .collect();
    if active.is_empty() {
        // Every structure term is switched off: any feasible point is optimal.
        let mut result =
            min_norm_in_ball(problem.measurements(), problem.sensing(), problem.epsilon())?;
        result.mode = problem.mode();
        result.objective = 0.0;
        return Ok(result);
    }

    let n = problem.signal_len();
    let cols = problem.columns();
    let projector = DataProjector::new(problem, &active)?;

    let apply = |j: usize, x: &DMatrix<f64>| active[j].operator().apply(x);
    let adjoint_sum = |blocks: &[DMatrix<f64>]| -> Result<DMatrix<f64>> {
        let mut acc = DMatrix::zeros(n, cols);
        for (reg, b) in active.iter().zip(blocks) {
            acc += reg.operator().adjoint(b)?;
        }
        Ok(acc)
    };

    let total_rows: usize = active.iter().map(|r| r.operator().rows()).sum();
    let mut x = projector.project(&DMatrix::zeros(n, cols), &DMatrix::zeros(n, cols));
    let mut z: Vec<DMatrix<f64>> = (0..active.len())
        .map(|j| apply(j, &x))
        .collect::<Result<_>>()?;
    let mut u: Vec<DMatrix<f64>> = z
        .iter()
        .map(|b| DMatrix::zeros(b.nrows(), b.ncols()))
        .collect();

    let mut rho = config.penalty;
    let mut primal_history = Vec::new();
    let mut dual_history = Vec::new();
    let mut objective_history = Vec::new();
    let mut converged = false;
    let mut at_z = adjoint_sum(&z)?;
    let mut final_tolerances = (0.0, 0.0);

    for iteration in 1..=config.max_iterations {
        let at_u = adjoint_sum(&u)?;
        x = projector.project(&(&at_z - &at_u), &x);

        let mut primal_sq = 0.0;
        let mut ax_sq = 0.0;
        let mut z_sq = 0.0;
        let mut objective = 0.0;
        for (j, reg) in active.iter().enumerate() {
            let ax = apply(j, &x)?;
            objective += reg.weight() * reg.norm_of(&ax);
            let relaxed = &ax * RELAXATION + &z[j] * (1.0 - RELAXATION);
            let v = prox_block(reg, &relaxed + &u[j], reg.weight() / rho)?;
            u[j] += relaxed - &v;
            z[j] = v;
            primal_sq += (&ax - &z[j]).norm_squared();
            ax_sq += ax.norm_squared();
            z_sq += z[j].norm_squared();
        }
        let at_z_new = adjoint_sum(&z)?;
        let dual = rho * (&at_z_new - &at_z).norm();
        at_z = at_z_new;
        let primal = primal_sq.sqrt();
        primal_history.push(primal);
        dual_history.push(dual);
        objective_history.push(objective);

        let eps_primal = ((total_rows * cols) as f64).sqrt() * config.abs_tolerance
            + config.rel_tolerance * ax_sq.sqrt().max(z_sq.sqrt());
        let eps_dual = ((n * cols) as f64).sqrt() * config.abs_tolerance
            + config.rel_tolerance * rho * adjoint_sum(&u)?.norm();
        final_tolerances = (eps_primal, eps_dual);
        if primal <= eps_primal && dual <= eps_dual {
            converged = true;
            break;
        }

        if config.penalty_adaptation && iteration <= ADAPT_UNTIL {
            let (p, d) = (primal / eps_primal, dual / eps_dual);
            let factor = if p > BALANCE_RATIO * d && rho * PENALTY_FACTOR <= PENALTY_RANGE.1 {
                PENALTY_FACTOR
            } else if d > BALANCE_RATIO * p && rho / PENALTY_FACTOR >= PENALTY_RANGE.0 {
                1.0 / PENALTY_FACTOR
            } else {
                1.0
            };
            if factor != 1.0 {
                rho *= factor;
                for block in &mut u {
                    *block /= factor;
                }
            }
        }
    }

    let estimate = polish(problem, &x)?;
    let objective = problem.objective(&estimate)?;
    Ok(RecoveryResult {
        final_data_misfit: problem.data_misfit(&estimate),
        objective,
        estimate,
        mode: problem.mode(),
        converged,
        iterations: primal_history.len(),
        primal_residual_history: primal_history,
        dual_residual_history: dual_history,
        objective_history,
        regularized: projector.proximal_shift > 0.0,
        final_tolerances,
    })
}

fn prox_block(reg: &Regularizer, mut v: DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    match reg.norm() {
        Norm::L1 => prox_l1_in_place(v.as_mut_slice(), t),
        Norm::GroupL2L1(groups) => {
            for mut c in v.column_iter_mut() {
                prox_group_l2_in_place(c.as_mut_slice(), groups, t);
            }
        }
        Norm::Nuclear { rows, cols } => {
            let shaped = DMatrix::from_column_slice(*rows, *cols, v.as_slice());
            let shrunk = prox_nuclear(&shaped, t)?;
            v.as_mut_slice().copy_from_slice(shrunk.as_slice());
        }
    }
    Ok(v)
}

/// Solves the constrained `X`-update in whitened coordinates.
struct DataProjector {
    factor: Cholesky<f64, Dyn>,
    /// Right singular vectors of `G` with nonzero singular value (`N × k`).
    right: DMatrix<f64>,
    singular: DVector<f64>,
    /// `UᵀY` (`k × R`).
    projected_target: DMatrix<f64>,
    /// `‖Y‖² − ‖UᵀY‖²`, the part of `Y` no `X` can reach.
    unreachable_sq: f64,
    epsilon: f64,
    /// Weight of the proximal term `½δ‖X − X_prev‖²` used when `H` is singular.
    proximal_shift: f64,
}

impl DataProjector {
    fn new(problem: &RecoveryProblem, active: &[&Regularizer]) -> Result<Self> {
        let n = problem.signal_len();
        let mut gram = DMatrix::zeros(n, n);
        for reg in active {
            gram += reg.operator().gram();
        }
        let (factor, proximal_shift) = factor_spd(gram)?;

        // G = Φ L⁻ᵀ, i.e. Gᵀ = L⁻¹ Φᵀ.
        let g_t = factor
            .l_dirty()
            .solve_lower_triangular(&problem.sensing().transpose())
            .ok_or_else(|| Error::Decomposition("triangular solve failed".into()))?;
        let svd = g_t.transpose().svd(true, true);
        let u = svd
            .u
            .ok_or_else(|| Error::Decomposition("SVD did not return U".into()))?;
        let v_t = svd
            .v_t
            .ok_or_else(|| Error::Decomposition("SVD did not return Vᵀ".into()))?;
        let s_max = svd.singular_values.max();
        let cutoff = s_max * (n.max(problem.sensing().nrows()) as f64) * f64::EPSILON;
        let kept: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&i| svd.singular_values[i] > cutoff)
            .collect();
        let right = DMatrix::from_fn(n, kept.len(), |r, c| v_t[(kept[c], r)]);
        let left = DMatrix::from_fn(u.nrows(), kept.len(), |r, c| u[(r, kept[c])]);
        let singular =
            DVector::from_iterator(kept.len(), kept.iter().map(|&i| svd.singular_values[i]));
        let y = problem.measurements();
        let projected_target = left.tr_mul(y);
        let unreachable_sq = (y.norm_squared() - projected_target.norm_squared()).max(0.0);
        Ok(Self {
            factor,
            right,
            singular,
            projected_target,
            unreachable_sq,
            epsilon: problem.epsilon(),
            proximal_shift,
        })
    }

    /// `argmin ½⟨X, HX⟩ − ⟨B, X⟩ + ½δ‖X − X_prev‖²` over the residual ball.
    fn project(&self, rhs: &DMatrix<f64>, previous: &DMatrix<f64>) -> DMatrix<f64> {
        let mut rhs = rhs.clone();
        if self.proximal_shift > 0.0 {
            rhs += previous * self.proximal_shift;
        }
        let l = self.factor.l_dirty();
        let c = l
            .solve_lower_triangular(&rhs)
            .expect("Cholesky factor has a nonzero diagonal");
        let coords = self.right.tr_mul(&c);
        let k = self.singular.len();

        // Residual component along each retained direction: s_i c_i − (UᵀY)_i.
        let gaps: Vec<f64> = (0..k)
            .map(|i| {
                (coords.row(i) * self.singular[i] - self.projected_target.row(i)).norm_squared()
            })
            .collect();
        let residual_sq = |mu: f64| -> f64 {
            gaps.iter()
                .zip(self.singular.iter())
                .map(|(g, s)| g / (1.0 + mu * s * s).powi(2))
                .sum::<f64>()
                + self.unreachable_sq
        };
        let eps_sq = self.epsilon * self.epsilon;

        let new_coords = if residual_sq(0.0) <= eps_sq {
            return l
                .tr_solve_lower_triangular(&c)
                .expect("Cholesky factor has a nonzero diagonal");
        } else if eps_sq <= self.unreachable_sq {
            // μ → ∞: least-squares fit in the reachable directions.
            DMatrix::from_fn(k, c.ncols(), |i, r| {
                self.projected_target[(i, r)] / self.singular[i]
            })
        } else {
            let mu = self.multiplier(&residual_sq, eps_sq);
            DMatrix::from_fn(k, c.ncols(), |i, r| {
                let s = self.singular[i];
                (coords[(i, r)] + mu * s * self.projected_target[(i, r)]) / (1.0 + mu * s * s)
            })
        };
        let w = &c + &self.right * (new_coords - coords);
        l.tr_solve_lower_triangular(&w)
            .expect("Cholesky factor has a nonzero diagonal")
    }

    /// Smallest `μ` with `residual_sq(μ) ≤ ε²`, to near machine precision.
    fn multiplier(&self, residual_sq: &dyn Fn(f64) -> f64, eps_sq: f64) -> f64 {
        let s_max = self.singular.max();
        let mut hi = 1.0 / (s_max * s_max);
        while residual_sq(hi) > eps_sq && hi < 1e300 {
            hi *= 4.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = if lo == 0.0 {
                hi / 4.0
            } else {
                (lo * hi).sqrt()
            };
            if residual_sq(mid) > eps_sq {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= hi * 1e-15 {
                break;
            }
        }
        hi
    }
}

fn factor_spd(gram: DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64)> {
    if let Some(f) = Cholesky::new(gram.clone()) {
        let diag = f.l_dirty().diagonal();
        let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &d| {
            (lo.min(d), hi.max(d))
        });
        if lo > hi * 1e-7 {
            return Ok((f, 0.0));
        }
    }
    let n = gram.nrows();
    let shift = 1e-3 * gram.trace() / n as f64;
    let shifted = gram + DMatrix::identity(n, n) * shift;
    Cholesky::new(shifted)
        .map(|f| (f, shift))
        .ok_or_else(|| Error::Decomposition("splitting system is not positive definite".into()))
}

/// Minimum-norm correction `X + Φ⁺(W − ΦX)` with `W` the projection of `ΦX` onto the ball.
fn polish(problem: &RecoveryProblem, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let phi = problem.sensing();
    let fitted = phi * x;
    let mut target = fitted.clone();
    project_l2_ball_in_place(&mut target, problem.measurements(), problem.epsilon());
    let gap = target - fitted;
    if gap.norm() == 0.0 {
        return Ok(x.clone());
    }
    let correction = match (phi.nrows() <= phi.ncols())
        .then(|| Cholesky::new(phi * phi.transpose()))
        .flatten()
    {
        Some(f) => phi.tr_mul(&f.solve(&gap)),
        None => {
            let svd = phi.clone().svd(true, true);
            let tol =
                f64::EPSILON * phi.nrows().max(phi.ncols()) as f64 * svd.singular_values.max();
            svd.solve(&gap, tol)
                .map_err(|e| Error::Decomposition(e.to_string()))?
        }
    };
    let polished = x + correction;
    if problem.data_misfit(&polished) <= problem.data_misfit(x) {
        Ok(polished)
    } else {
        Ok(x.clone())
    }
}
