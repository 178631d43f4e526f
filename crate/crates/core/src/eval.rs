//! Error metrics, the Monte Carlo benchmark harness, K-fold tuning and the
//! brute-force L0 oracle used on tiny instances.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{mismatch, Error, Result};
use crate::ops::AnalysisOperator;
use crate::solver::{RecoveryResult, SolverConfig};

/// Which entrywise norm an error is measured in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorNorm {
    L1,
    L2,
}

/// `‖vec(X − X̂)‖_b`.
pub fn trial_error(original: &DMatrix<f64>, estimate: &DMatrix<f64>, b: ErrorNorm) -> Result<f64> {
    if original.shape() != estimate.shape() {
        return Err(mismatch(
            "error metric",
            format!("{:?}", original.shape()),
            format!("{:?}", estimate.shape()),
        ));
    }
    let diff = original.iter().zip(estimate.iter()).map(|(a, b)| a - b);
    Ok(match b {
        ErrorNorm::L1 => diff.map(f64::abs).sum(),
        ErrorNorm::L2 => diff.map(|d| d * d).sum::<f64>().sqrt(),
    })
}

fn trial_errors(
    originals: &[DMatrix<f64>],
    estimates: &[DMatrix<f64>],
    b: ErrorNorm,
) -> Result<Vec<f64>> {
    if originals.len() != estimates.len() {
        return Err(mismatch("trial count", originals.len(), estimates.len()));
    }
    if originals.is_empty() {
        return Err(Error::InvalidParameter("no trials to average".into()));
    }
    originals
        .iter()
        .zip(estimates)
        .map(|(x, e)| trial_error(x, e, b))
        .collect()
}

/// `(1/C) Σ_c ‖x_c − x̂_c‖_b`.
pub fn mean_error(
    originals: &[DMatrix<f64>],
    estimates: &[DMatrix<f64>],
    b: ErrorNorm,
) -> Result<f64> {
    Ok(mean(&trial_errors(originals, estimates, b)?))
}

/// Sample standard deviation (divisor `C − 1`) of the per-trial errors.
pub fn std_error(
    originals: &[DMatrix<f64>],
    estimates: &[DMatrix<f64>],
    b: ErrorNorm,
) -> Result<f64> {
    let errors = trial_errors(originals, estimates, b)?;
    if errors.len() < 2 {
        return Err(Error::InvalidParameter(
            "standard deviation needs at least two trials".into(),
        ));
    }
    Ok(sample_std(&errors))
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn sample_std(values: &[f64]) -> f64 {
    let mu = mean(values);
    let ss: f64 = values.iter().map(|v| (v - mu) * (v - mu)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Ground truth and measurements of one Monte Carlo draw.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub original: DMatrix<f64>,
    pub measurements: DMatrix<f64>,
    pub sensing: DMatrix<f64>,
}

/// Produces the draw for trial `index` at measurement count `m`. Must be a pure
/// function of its arguments so that every method sees the same draw.
pub trait TrialSource: Sync {
    fn trial(&self, m: usize, index: usize) -> Result<Trial>;
}

/// A recovery method under benchmark.
pub trait Method: Sync {
    fn name(&self) -> String;
    fn recover(&self, trial: &Trial, solver: &SolverConfig) -> Result<RecoveryResult>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub method: String,
    pub m: usize,
    pub trial_index: usize,
    pub l1_error: f64,
    pub l2_error: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Only filled when timing is requested, since it breaks byte-identical reruns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
    /// Solver error message for a failed trial; its errors are those of `x̂ = 0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub m: usize,
    pub mean_l1: f64,
    pub mean_l2: f64,
    /// Zero when only one trial was run.
    pub std_l1: f64,
    pub std_l2: f64,
    pub trials: usize,
    pub converged: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSummary {
    pub rows: Vec<SummaryRow>,
}

impl BenchmarkSummary {
    /// Aggregate reports per `(method, m)`, in order of first appearance.
    pub fn from_trials(reports: &[TrialReport]) -> Self {
        let mut keys: Vec<(&str, usize)> = Vec::new();
        for r in reports {
            if !keys.contains(&(r.method.as_str(), r.m)) {
                keys.push((r.method.as_str(), r.m));
            }
        }
        let rows = keys
            .into_iter()
            .map(|(method, m)| {
                let cell: Vec<&TrialReport> = reports
                    .iter()
                    .filter(|r| r.method == method && r.m == m)
                    .collect();
                let l1: Vec<f64> = cell.iter().map(|r| r.l1_error).collect();
                let l2: Vec<f64> = cell.iter().map(|r| r.l2_error).collect();
                let spread = |v: &[f64]| if v.len() > 1 { sample_std(v) } else { 0.0 };
                SummaryRow {
                    method: method.to_string(),
                    m,
                    mean_l1: mean(&l1),
                    mean_l2: mean(&l2),
                    std_l1: spread(&l1),
                    std_l2: spread(&l2),
                    trials: cell.len(),
                    converged: cell.iter().filter(|r| r.converged).count(),
                }
            })
            .collect();
        Self { rows }
    }

    pub fn get(&self, method: &str, m: usize) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.method == method && r.m == m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkOutcome {
    pub summary: BenchmarkSummary,
    pub trials: Vec<TrialReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkPlan {
    pub m_values: Vec<usize>,
    pub trials: usize,
    pub solver: SolverConfig,
    pub record_timing: bool,
}

/// Run every method on `plan.trials` paired draws per measurement count.
///
/// Draws are generated once per `(m, c)` and shared by all methods. Cells run in
/// parallel; the report order is `(method, m, c)` regardless of scheduling.
pub fn run_benchmark<M: Method>(
    methods: &[M],
    source: &dyn TrialSource,
    plan: &BenchmarkPlan,
) -> Result<BenchmarkOutcome> {
    if methods.is_empty() || plan.m_values.is_empty() || plan.trials == 0 {
        return Err(Error::InvalidParameter(
            "benchmark needs at least one method, one m and one trial".into(),
        ));
    }
    plan.solver.validate()?;
    let jobs: Vec<(usize, usize)> = plan
        .m_values
        .iter()
        .flat_map(|&m| (0..plan.trials).map(move |c| (m, c)))
        .collect();
    let per_job: Vec<Vec<TrialReport>> = jobs
        .par_iter()
        .map(|&(m, c)| {
            let trial = source.trial(m, c)?;
            Ok(methods
                .iter()
                .map(|method| run_trial(method, &trial, m, c, plan))
                .collect())
        })
        .collect::<Result<_>>()?;

    let mut reports = Vec::with_capacity(jobs.len() * methods.len());
    for k in 0..methods.len() {
        for job in &per_job {
            reports.push(job[k].clone());
        }
    }
    Ok(BenchmarkOutcome {
        summary: BenchmarkSummary::from_trials(&reports),
        trials: reports,
    })
}

fn run_trial<M: Method>(
    method: &M,
    trial: &Trial,
    m: usize,
    c: usize,
    plan: &BenchmarkPlan,
) -> TrialReport {
    let start = Instant::now();
    let outcome = method.recover(trial, &plan.solver);
    let elapsed = start.elapsed().as_secs_f64();
    let (estimate, converged, iterations, failure) = match outcome {
        Ok(r) => (r.estimate, r.converged, r.iterations, None),
        Err(e) => {
            log::warn!("{} failed on trial {c} at m = {m}: {e}", method.name());
            let zero = DMatrix::zeros(trial.original.nrows(), trial.original.ncols());
            (zero, false, 0, Some(e.to_string()))
        }
    };
    let error = |b| trial_error(&trial.original, &estimate, b).unwrap_or(f64::INFINITY);
    TrialReport {
        method: method.name(),
        m,
        trial_index: c,
        l1_error: error(ErrorNorm::L1),
        l2_error: error(ErrorNorm::L2),
        converged,
        iterations,
        wall_time: plan.record_timing.then_some(elapsed),
        failure,
    }
}

/// Candidate values of one tunable weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterGrid {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidationConfig {
    pub folds: usize,
    pub grid: Vec<ParameterGrid>,
    pub delta: f64,
    pub seed: u64,
}

impl Default for CrossValidationConfig {
    fn default() -> Self {
        Self {
            folds: 10,
            grid: Vec::new(),
            delta: 0.2,
            seed: 0,
        }
    }
}

impl CrossValidationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::InvalidParameter(format!(
                "cross-validation needs at least 2 folds, got {}",
                self.folds
            )));
        }
        if self.grid.is_empty() || self.grid.iter().any(|g| g.values.is_empty()) {
            return Err(Error::InvalidParameter(
                "every parameter grid must be non-empty".into(),
            ));
        }
        if !(self.delta >= 0.0) {
            return Err(Error::InvalidParameter("delta must be nonnegative".into()));
        }
        Ok(())
    }

    /// Cartesian product of the grids, first parameter varying slowest.
    pub fn grid_points(&self) -> Vec<Vec<f64>> {
        self.grid.iter().fold(vec![Vec::new()], |acc, g| {
            acc.iter()
                .flat_map(|prefix| {
                    g.values.iter().map(move |&v| {
                        let mut p = prefix.clone();
                        p.push(v);
                        p
                    })
                })
                .collect()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub held_out: usize,
    pub selected: Vec<f64>,
    pub training_residual: f64,
    pub testing_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningReport {
    pub parameters: Vec<String>,
    /// Per-parameter mean of the fold selections.
    pub lambda_bar: Vec<f64>,
    pub r_training: f64,
    pub r_testing: f64,
    pub passed: bool,
    pub folds: Vec<FoldReport>,
    pub grid_points: Vec<Vec<f64>>,
    /// `residuals[group][point]`: mean `‖x̂ − x‖₂` of the group, `None` if any solve
    /// in the group failed or did not converge.
    pub residuals: Vec<Vec<Option<f64>>>,
}

/// K-fold exhaustive-grid tuning of the weights.
///
/// `groups` holds the `T` data groups. In fold `t` the grid point with the smallest
/// mean residual over the other `T − 1` groups is selected and then scored on group
/// `t`. `recover` solves one trial at one grid point.
pub fn k_fold_tune<F>(
    groups: &[Vec<Trial>],
    cv: &CrossValidationConfig,
    solver: &SolverConfig,
    recover: F,
) -> Result<TuningReport>
where
    F: Fn(&[f64], &Trial, &SolverConfig) -> Result<RecoveryResult> + Sync,
{
    cv.validate()?;
    if groups.len() != cv.folds {
        return Err(mismatch("cross-validation groups", cv.folds, groups.len()));
    }
    if groups.iter().any(|g| g.is_empty()) {
        return Err(Error::InvalidParameter(
            "every data group needs a trial".into(),
        ));
    }
    let points = cv.grid_points();
    let cells: Vec<(usize, usize)> = (0..groups.len())
        .flat_map(|g| (0..points.len()).map(move |p| (g, p)))
        .collect();
    let scores: Vec<Option<f64>> = cells
        .par_iter()
        .map(|&(g, p)| group_residual(&groups[g], &points[p], solver, &recover))
        .collect();
    let residuals: Vec<Vec<Option<f64>>> = scores
        .chunks(points.len())
        .map(|row| row.to_vec())
        .collect();

    let t = groups.len();
    let mut folds = Vec::with_capacity(t);
    for held_out in 0..t {
        let mut best: Option<(usize, f64)> = None;
        for p in 0..points.len() {
            let training: Option<Vec<f64>> = (0..t)
                .filter(|&g| g != held_out)
                .map(|g| residuals[g][p])
                .collect();
            if let Some(values) = training {
                let r = mean(&values);
                if best.is_none_or(|(_, b)| r < b) {
                    best = Some((p, r));
                }
            }
        }
        let (p, training_residual) = best.ok_or(Error::FoldFailed { fold: held_out })?;
        let testing_residual =
            residuals[held_out][p].ok_or(Error::FoldFailed { fold: held_out })?;
        folds.push(FoldReport {
            held_out,
            selected: points[p].clone(),
            training_residual,
            testing_residual,
        });
    }

    let lambda_bar = (0..cv.grid.len())
        .map(|k| folds.iter().map(|f| f.selected[k]).sum::<f64>() / t as f64)
        .collect();
    let r_training = folds.iter().map(|f| f.training_residual).sum::<f64>() / t as f64;
    let r_testing = folds.iter().map(|f| f.testing_residual).sum::<f64>() / t as f64;
    Ok(TuningReport {
        parameters: cv.grid.iter().map(|g| g.name.clone()).collect(),
        lambda_bar,
        r_training,
        r_testing,
        passed: (r_testing - r_training).abs() <= cv.delta * r_training.abs(),
        folds,
        grid_points: points,
        residuals,
    })
}

fn group_residual<F>(
    group: &[Trial],
    point: &[f64],
    solver: &SolverConfig,
    recover: &F,
) -> Option<f64>
where
    F: Fn(&[f64], &Trial, &SolverConfig) -> Result<RecoveryResult>,
{
    let mut total = 0.0;
    for trial in group {
        match recover(point, trial, solver) {
            Ok(r) if r.converged => {
                total += trial_error(&trial.original, &r.estimate, ErrorNorm::L2).ok()?;
            }
            Ok(_) => return None,
            Err(e) => {
                log::warn!("tuning solve failed at {point:?}: {e}");
                return None;
            }
        }
    }
    Some(total / group.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub enum L0Solution {
    Found {
        estimate: DVector<f64>,
        support: Vec<usize>,
    },
    NotFound,
}

/// Largest signal length the support enumeration accepts.
pub const L0_MAX_LEN: usize = 16;
/// Largest support size the enumeration accepts.
pub const L0_MAX_SPARSITY: usize = 3;

/// Sparsest exact solution of `y = Φx` with at most `k_max` nonzeros, by trying
/// every support. Among supports of the minimal size the smallest-norm fit wins.
pub fn l0_oracle(
    y: &DVector<f64>,
    sensing: &DMatrix<f64>,
    dictionary: &AnalysisOperator,
    k_max: usize,
) -> Result<L0Solution> {
    let (m, n) = sensing.shape();
    if !dictionary.is_identity() || dictionary.cols() != n {
        return Err(Error::InvalidParameter(
            "the L0 oracle only supports the identity dictionary".into(),
        ));
    }
    if n > L0_MAX_LEN || k_max > L0_MAX_SPARSITY {
        return Err(Error::InvalidParameter(format!(
            "L0 oracle limited to N <= {L0_MAX_LEN} and k <= {L0_MAX_SPARSITY}"
        )));
    }
    if y.len() != m {
        return Err(mismatch("measurements", m, y.len()));
    }
    let tolerance = 1e-9 * y.norm().max(1.0);
    if y.norm() <= tolerance {
        return Ok(L0Solution::Found {
            estimate: DVector::zeros(n),
            support: Vec::new(),
        });
    }
    for k in 1..=k_max.min(n) {
        let mut best: Option<(f64, DVector<f64>, Vec<usize>)> = None;
        for support in combinations(n, k) {
            let sub = sensing.select_columns(&support);
            let Ok(coef) = sub.clone().svd(true, true).solve(y, 1e-12) else {
                continue;
            };
            if (y - &sub * &coef).norm() > tolerance {
                continue;
            }
            let norm = coef.norm();
            if best.as_ref().is_none_or(|(b, _, _)| norm < *b) {
                let mut estimate = DVector::zeros(n);
                for (&i, &v) in support.iter().zip(coef.iter()) {
                    estimate[i] = v;
                }
                best = Some((norm, estimate, support));
            }
        }
        if let Some((_, estimate, support)) = best {
            return Ok(L0Solution::Found { estimate, support });
        }
    }
    Ok(L0Solution::NotFound)
}

/// All `k`-subsets of `0..n` in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(current.clone());
        let Some(i) = (0..k).rev().find(|&i| current[i] < n - k + i) else {
            return out;
        };
        current[i] += 1;
        for j in i + 1..k {
            current[j] = current[j - 1] + 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(v.len(), 1, v)
    }

    #[test]
    fn mean_error_hand_cases() {
        let originals = [col(&[1.0, 0.0]), col(&[0.0, 1.0])];
        let zeros = [col(&[0.0, 0.0]), col(&[0.0, 0.0])];
        assert_eq!(mean_error(&originals, &zeros, ErrorNorm::L1).unwrap(), 1.0);
        assert_eq!(mean_error(&originals, &zeros, ErrorNorm::L2).unwrap(), 1.0);
        assert_eq!(
            mean_error(&originals, &originals, ErrorNorm::L2).unwrap(),
            0.0
        );
    }

    #[test]
    fn std_error_hand_cases() {
        let originals = [col(&[0.0]), col(&[2.0])];
        let zeros = [col(&[0.0]), col(&[0.0])];
        let s = std_error(&originals, &zeros, ErrorNorm::L1).unwrap();
        assert!((s - 2f64.sqrt()).abs() < 1e-12);
        let same = [col(&[1.0]), col(&[1.0])];
        assert_eq!(std_error(&same, &zeros, ErrorNorm::L2).unwrap(), 0.0);
        assert!(std_error(&originals[..1], &zeros[..1], ErrorNorm::L2).is_err());
    }

    #[test]
    fn metric_rejects_bad_shapes() {
        assert!(mean_error(&[col(&[1.0])], &[col(&[1.0, 2.0])], ErrorNorm::L1).is_err());
        assert!(mean_error(&[], &[], ErrorNorm::L1).is_err());
    }

    #[test]
    fn combinations_count() {
        assert_eq!(combinations(5, 2).len(), 10);
        assert_eq!(combinations(4, 0), vec![Vec::<usize>::new()]);
        assert_eq!(combinations(3, 3), vec![vec![0, 1, 2]]);
        assert!(combinations(2, 3).is_empty());
    }

    #[test]
    fn grid_points_product() {
        let cv = CrossValidationConfig {
            grid: vec![
                ParameterGrid {
                    name: "a".into(),
                    values: vec![1.0, 2.0],
                },
                ParameterGrid {
                    name: "b".into(),
                    values: vec![3.0, 4.0, 5.0],
                },
            ],
            ..Default::default()
        };
        let pts = cv.grid_points();
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[0], vec![1.0, 3.0]);
        assert_eq!(pts[5], vec![2.0, 5.0]);
    }
}
