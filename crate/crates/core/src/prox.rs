//! Proximal maps `argmin_u t·f(u) + ½‖u − v‖²` and the residual-ball projection.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{mismatch, Error, Result};

/// Disjoint index blocks covering `0..len`, the `Ψ_d` row sets of a group norm.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupStructure {
    blocks: Vec<Vec<usize>>,
    len: usize,
}

impl GroupStructure {
    pub fn new(blocks: Vec<Vec<usize>>, len: usize) -> Result<Self> {
        let mut seen = vec![false; len];
        for block in &blocks {
            if block.is_empty() {
                return Err(Error::InvalidGroups("empty block".into()));
            }
            for &i in block {
                if i >= len {
                    return Err(Error::InvalidGroups(format!("index {i} outside 0..{len}")));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::InvalidGroups(format!("index {i} appears twice")));
                }
            }
        }
        if len == 0 || seen.iter().any(|s| !s) {
            return Err(Error::InvalidGroups(format!(
                "blocks must cover every index of 0..{len}"
            )));
        }
        Ok(Self { blocks, len })
    }

    /// Consecutive runs of `width` indices; the last run may be shorter.
    pub fn contiguous(len: usize, width: usize) -> Result<Self> {
        if width == 0 {
            return Err(Error::InvalidGroups("block width must be positive".into()));
        }
        let blocks = (0..len)
            .step_by(width)
            .map(|start| (start..(start + width).min(len)).collect())
            .collect();
        Self::new(blocks, len)
    }

    pub fn singletons(len: usize) -> Result<Self> {
        Self::contiguous(len, 1)
    }

    /// One block holding every index.
    pub fn single(len: usize) -> Result<Self> {
        Self::new(vec![(0..len).collect()], len)
    }

    /// Pairs `(k, n + k)` of a stacked `[re; im]` vector of length `2n`, so the group
    /// norm equals the complex-modulus L1 norm.
    pub fn complex_pairs(n: usize) -> Result<Self> {
        Self::new((0..n).map(|k| vec![k, n + k]).collect(), 2 * n)
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// `Σ_d ‖v_d‖₂`.
    pub fn norm(&self, v: &[f64]) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.iter().map(|&i| v[i] * v[i]).sum::<f64>().sqrt())
            .sum()
    }
}

fn check_threshold(t: f64) -> Result<()> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "threshold must be nonnegative, got {t}"
        )));
    }
    Ok(())
}

#[inline]
pub(crate) fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Elementwise soft-thresholding.
pub fn prox_l1(v: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
    check_threshold(t)?;
    Ok(v.map(|x| soft_threshold(x, t)))
}

pub(crate) fn prox_l1_in_place(v: &mut [f64], t: f64) {
    for x in v {
        *x = soft_threshold(*x, t);
    }
}

/// Block soft-thresholding: each block is scaled by `max(1 − t/‖v_d‖₂, 0)`.
pub fn prox_group_l2(v: &DVector<f64>, groups: &GroupStructure, t: f64) -> Result<DVector<f64>> {
    check_threshold(t)?;
    if v.len() != groups.len() {
        return Err(mismatch("group prox", groups.len(), v.len()));
    }
    let mut out = v.clone();
    prox_group_l2_in_place(out.as_mut_slice(), groups, t);
    Ok(out)
}

pub(crate) fn prox_group_l2_in_place(v: &mut [f64], groups: &GroupStructure, t: f64) {
    for block in &groups.blocks {
        let norm = block.iter().map(|&i| v[i] * v[i]).sum::<f64>().sqrt();
        let scale = if norm > t { 1.0 - t / norm } else { 0.0 };
        for &i in block {
            v[i] *= scale;
        }
    }
}

/// Singular value thresholding.
pub fn prox_nuclear(v: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    check_threshold(t)?;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("nuclear prox input"));
    }
    if v.is_empty() {
        return Ok(v.clone());
    }
    let svd = v.clone().svd(true, true);
    let u = svd
        .u
        .ok_or_else(|| Error::Decomposition("SVD did not return U".into()))?;
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Decomposition("SVD did not return Vᵀ".into()))?;
    let shrunk = svd.singular_values.map(|s| (s - t).max(0.0));
    let mut scaled_u = u;
    for (mut c, s) in scaled_u.column_iter_mut().zip(shrunk.iter()) {
        c *= *s;
    }
    Ok(scaled_u * v_t)
}

/// Sum of singular values.
pub fn nuclear_norm(v: &DMatrix<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.singular_values().sum()
}

/// Euclidean (Frobenius) projection onto `{u : ‖u − center‖ ≤ radius}`.
pub fn project_l2_ball(
    v: &DMatrix<f64>,
    center: &DMatrix<f64>,
    radius: f64,
) -> Result<DMatrix<f64>> {
    if radius.is_nan() || radius < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "ball radius must be nonnegative, got {radius}"
        )));
    }
    if v.shape() != center.shape() {
        return Err(mismatch(
            "ball projection",
            format!("{:?}", center.shape()),
            format!("{:?}", v.shape()),
        ));
    }
    let mut out = v.clone();
    project_l2_ball_in_place(&mut out, center, radius);
    Ok(out)
}

pub(crate) fn project_l2_ball_in_place(v: &mut DMatrix<f64>, center: &DMatrix<f64>, radius: f64) {
    let dist = v
        .iter()
        .zip(center.iter())
        .map(|(a, c)| (a - c) * (a - c))
        .sum::<f64>()
        .sqrt();
    if dist <= radius {
        return;
    }
    let scale = radius / dist;
    for (a, c) in v.iter_mut().zip(center.iter()) {
        *a = c + scale * (*a - c);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn col(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn l1_closed_form() {
        assert_eq!(
            prox_l1(&col(&[3.0, -0.5, 0.0]), 1.0).unwrap(),
            col(&[2.0, 0.0, 0.0])
        );
        let v = col(&[1.5, -2.0, 0.25]);
        assert_eq!(prox_l1(&v, 0.0).unwrap(), v);
        assert_eq!(prox_l1(&col(&[1.0, -1.0]), 1.0).unwrap(), col(&[0.0, 0.0]));
        assert!(prox_l1(&v, -1.0).is_err());
    }

    #[test]
    fn group_scaling_and_annihilation() {
        let g = GroupStructure::single(2).unwrap();
        let v = col(&[2.0_f64.sqrt(), 2.0_f64.sqrt()]);
        let out = prox_group_l2(&v, &g, 1.0).unwrap();
        assert!((out - &v / 2.0).norm() < 1e-15);
        let g = GroupStructure::contiguous(4, 2).unwrap();
        let out = prox_group_l2(&col(&[0.3, 0.4, 3.0, 4.0]), &g, 0.5).unwrap();
        assert_eq!(out.rows(0, 2), col(&[0.0, 0.0]).rows(0, 2));
        assert!((out[2] - 2.7).abs() < 1e-15 && (out[3] - 3.6).abs() < 1e-15);
    }

    #[test]
    fn group_zero_block_stays_zero() {
        let g = GroupStructure::contiguous(4, 2).unwrap();
        let out = prox_group_l2(&col(&[0.0, 0.0, 1.0, 0.0]), &g, 0.0).unwrap();
        assert_eq!(out, col(&[0.0, 0.0, 1.0, 0.0]));
    }

    #[test]
    fn group_structure_validation() {
        assert!(GroupStructure::new(vec![vec![0], vec![0, 1]], 2).is_err());
        assert!(GroupStructure::new(vec![vec![0]], 2).is_err());
        assert!(GroupStructure::new(vec![vec![], vec![0, 1]], 2).is_err());
        assert!(GroupStructure::new(vec![vec![2]], 2).is_err());
        let g = GroupStructure::contiguous(5, 2).unwrap();
        assert_eq!(g.blocks().len(), 3);
        assert!(prox_group_l2(&col(&[1.0; 4]), &g, 0.1).is_err());
    }

    #[test]
    fn nuclear_diagonal() {
        let v = DMatrix::from_diagonal(&col(&[3.0, 1.0]));
        let out = prox_nuclear(&v, 2.0).unwrap();
        assert!((out - DMatrix::from_diagonal(&col(&[1.0, 0.0]))).norm() < 1e-12);
    }

    #[test]
    fn nuclear_identity_at_zero() {
        let v = DMatrix::from_row_slice(3, 2, &[1.0, -2.0, 0.5, 4.0, 3.0, 0.0]);
        assert!((prox_nuclear(&v, 0.0).unwrap() - &v).norm() < 1e-10 * v.norm());
    }

    #[test]
    fn nuclear_rejects_nan() {
        let v = DMatrix::from_element(2, 2, f64::NAN);
        assert!(matches!(prox_nuclear(&v, 1.0), Err(Error::NonFinite(_))));
    }

    #[test]
    fn ball_projection_cases() {
        let c = DMatrix::zeros(2, 1);
        let v = DMatrix::from_column_slice(2, 1, &[3.0, 4.0]);
        let p = project_l2_ball(&v, &c, 1.0).unwrap();
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
        let inside = DMatrix::from_column_slice(2, 1, &[0.1, 0.2]);
        assert_eq!(project_l2_ball(&inside, &c, 1.0).unwrap(), inside);
        let center = DMatrix::from_column_slice(2, 1, &[1.0, -1.0]);
        assert_eq!(project_l2_ball(&v, &center, 0.0).unwrap(), center);
        assert!(project_l2_ball(&v, &c, -0.1).is_err());
        assert!(project_l2_ball(&v, &DMatrix::zeros(3, 1), 1.0).is_err());
    }

    fn vec_strategy(len: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-5.0..5.0f64, len)
    }

    proptest! {
        #[test]
        fn l1_is_nonexpansive(a in vec_strategy(6), b in vec_strategy(6), t in 0.0..3.0f64) {
            let (a, b) = (col(&a), col(&b));
            let d = (prox_l1(&a, t).unwrap() - prox_l1(&b, t).unwrap()).norm();
            prop_assert!(d <= (a - b).norm() + 1e-12);
        }

        #[test]
        fn group_is_nonexpansive(a in vec_strategy(6), b in vec_strategy(6), t in 0.0..3.0f64) {
            let g = GroupStructure::contiguous(6, 2).unwrap();
            let (a, b) = (col(&a), col(&b));
            let d = (prox_group_l2(&a, &g, t).unwrap() - prox_group_l2(&b, &g, t).unwrap()).norm();
            prop_assert!(d <= (a - b).norm() + 1e-12);
        }

        #[test]
        fn singleton_groups_equal_l1(a in vec_strategy(7), t in 0.0..3.0f64) {
            let g = GroupStructure::singletons(7).unwrap();
            let a = col(&a);
            let d = (prox_group_l2(&a, &g, t).unwrap() - prox_l1(&a, t).unwrap()).amax();
            prop_assert!(d < 1e-12);
        }

        #[test]
        fn complex_pairs_are_modulus_shrinkage(re in vec_strategy(5), im in vec_strategy(5), t in 0.0..3.0f64) {
            let g = GroupStructure::complex_pairs(5).unwrap();
            let stacked = DVector::from_iterator(10, re.iter().chain(im.iter()).copied());
            let out = prox_group_l2(&stacked, &g, t).unwrap();
            for k in 0..5 {
                let modulus = re[k].hypot(im[k]);
                let shrunk = (modulus - t).max(0.0);
                prop_assert!((out[k].hypot(out[5 + k]) - shrunk).abs() < 1e-12);
                if shrunk > 0.0 {
                    // phase is preserved
                    prop_assert!((out[k] * im[k] - out[5 + k] * re[k]).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn ball_projection_is_nonexpansive(a in vec_strategy(4), b in vec_strategy(4), r in 0.0..4.0f64) {
            let c = DMatrix::from_column_slice(4, 1, &[0.5, -0.5, 1.0, 0.0]);
            let a = DMatrix::from_column_slice(4, 1, &a);
            let b = DMatrix::from_column_slice(4, 1, &b);
            let pa = project_l2_ball(&a, &c, r).unwrap();
            let pb = project_l2_ball(&b, &c, r).unwrap();
            prop_assert!((&pa - &c).norm() <= r + 1e-12);
            prop_assert!((pa - pb).norm() <= (a - b).norm() + 1e-12);
        }

        #[test]
        fn nuclear_shrinks_nuclear_norm(v in vec_strategy(12), t in 0.0..2.0f64) {
            let v = DMatrix::from_column_slice(4, 3, &v);
            let out = prox_nuclear(&v, t).unwrap();
            prop_assert!(nuclear_norm(&out) <= nuclear_norm(&v) + 1e-10);
        }
    }
}
