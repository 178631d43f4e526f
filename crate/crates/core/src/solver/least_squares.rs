use nalgebra::{DMatrix, DVector};

use super::{Mode, RecoveryResult};
use crate::error::{mismatch, Error, Result};

/// Minimum-norm point of `{x : ‖y − Φx‖₂ ≤ ε}`.
pub fn least_squares_recover(
    y: &DVector<f64>,
    sensing: &DMatrix<f64>,
    epsilon: f64,
) -> Result<RecoveryResult> {
    let y = DMatrix::from_column_slice(y.len(), 1, y.as_slice());
    let mut result = min_norm_in_ball(&y, sensing, epsilon)?;
    result.mode = Mode::Vector;
    Ok(result)
}

/// Minimum-Frobenius-norm `X` with `‖Y − ΦX‖_F ≤ ε`, found along the Tikhonov path
/// `X(μ) = Φᵀ(ΦΦᵀ + μI)⁻¹Y` whose residual grows monotonically in `μ`.
pub fn min_norm_in_ball(
    y: &DMatrix<f64>,
    sensing: &DMatrix<f64>,
    epsilon: f64,
) -> Result<RecoveryResult> {
    if !epsilon.is_finite() || epsilon < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be finite and nonnegative, got {epsilon}"
        )));
    }
    if y.nrows() != sensing.nrows() {
        return Err(mismatch("measurements", sensing.nrows(), y.nrows()));
    }
    if y.iter().chain(sensing.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("least-squares input"));
    }
    let (m, n) = sensing.shape();
    let r = y.ncols();
    let y_norm = y.norm();
    let mode = if r == 1 { Mode::Vector } else { Mode::Matrix };
    let finish = |estimate: DMatrix<f64>, converged: bool, regularized: bool| {
        let misfit = (y - sensing * &estimate).norm();
        RecoveryResult {
            objective: estimate.norm(),
            estimate,
            mode,
            converged,
            iterations: 0,
            primal_residual_history: Vec::new(),
            dual_residual_history: Vec::new(),
            objective_history: Vec::new(),
            final_data_misfit: misfit,
            regularized,
            final_tolerances: (0.0, 0.0),
        }
    };
    if y_norm <= epsilon {
        return Ok(finish(DMatrix::zeros(n, r), true, false));
    }

    let svd = sensing.clone().svd(true, true);
    let u = svd
        .u
        .ok_or_else(|| Error::Decomposition("SVD did not return U".into()))?;
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Decomposition("SVD did not return Vᵀ".into()))?;
    let sigma = svd.singular_values;
    let s_max = sigma.max();
    let cutoff = s_max * (m.max(n) as f64) * f64::EPSILON;
    let rank = sigma.iter().filter(|&&s| s > cutoff).count();
    let rank_deficient = rank < m;

    // Coordinates of Y in the retained left singular directions.
    let coeffs: Vec<DVector<f64>> = (0..sigma.len())
        .filter(|&i| sigma[i] > cutoff)
        .map(|i| (y.tr_mul(&u.column(i))).column(0).into_owned())
        .collect();
    let kept: Vec<usize> = (0..sigma.len()).filter(|&i| sigma[i] > cutoff).collect();
    let in_range: f64 = coeffs.iter().map(|c| c.norm_squared()).sum();
    let outside = (y_norm * y_norm - in_range).max(0.0).sqrt();

    let solution = |mu: f64| {
        let mut x = DMatrix::zeros(n, r);
        for (c, &i) in coeffs.iter().zip(&kept) {
            let s = sigma[i];
            let gain = s / (s * s + mu);
            let v_col = v_t.row(i).transpose();
            x += &v_col * (c.transpose() * gain);
        }
        x
    };
    let residual = |mu: f64| {
        let inside: f64 = coeffs
            .iter()
            .zip(&kept)
            .map(|(c, &i)| {
                let f = mu / (sigma[i] * sigma[i] + mu);
                f * f * c.norm_squared()
            })
            .sum();
        (inside + outside * outside).sqrt()
    };

    if outside >= epsilon {
        // Even the pseudoinverse solution cannot enter the ball (or ε = 0).
        let x = solution(0.0);
        let feasible = (y - sensing * &x).norm() <= epsilon + 1e-10 * y_norm.max(1.0);
        return Ok(finish(x, feasible, rank_deficient));
    }

    // Bisection on log μ for residual(μ) = ε.
    let scale = s_max * s_max;
    let (mut lo, mut hi) = ((scale * 1e-16).ln(), (scale * 1e16).ln());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if residual(mid.exp()) > epsilon {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(finish(solution(lo.exp()), true, rank_deficient))
}
