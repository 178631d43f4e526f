//! Analysis operators `Ψ` and their adjoints.
//!
//! Every operator acts column-wise on an `N × R` matrix, so a vector signal is
//! simply the `R = 1` case. Operators are immutable once built and can be shared
//! across threads.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{mismatch, Error, Result};

/// Which differencing matrix to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
    /// Forward rows on top of backward rows.
    Stacked,
}

/// Treatment of the trailing rows of a differencing matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Square matrix; the last `order` rows keep only their diagonal entry.
    PaperExact,
    /// Only the `N - order` genuine difference rows.
    Truncated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaveletFamily {
    Haar,
    Db4,
    Db10,
}

impl WaveletFamily {
    /// Scaling (low-pass reconstruction) filter, normalized to sum `√2`.
    pub fn scaling_filter(self) -> &'static [f64] {
        match self {
            WaveletFamily::Haar => &HAAR,
            WaveletFamily::Db4 => &DB4,
            WaveletFamily::Db10 => &DB10,
        }
    }
}

const HAAR: [f64; 2] = [
    std::f64::consts::FRAC_1_SQRT_2,
    std::f64::consts::FRAC_1_SQRT_2,
];

const DB4: [f64; 8] = [
    0.2303778133088965,
    0.7148465705529157,
    0.6308807679298589,
    -0.027983769416859854,
    -0.18703481171909309,
    0.030841381835560764,
    0.0328830116668852,
    -0.010597401785069032,
];

const DB10: [f64; 20] = [
    0.026670057900555554,
    0.1881768000776915,
    0.5272011889317256,
    0.6884590394536035,
    0.2811723436605775,
    -0.24984642432731538,
    -0.19594627437737705,
    0.12736934033579325,
    0.09305736460357235,
    -0.07139414716639708,
    -0.029457536821875813,
    0.033212674059341,
    0.0036065535669561697,
    -0.010733175483330575,
    0.001395351747052901,
    0.001992405295185056,
    -0.0006858566949597116,
    -0.00011646685512928545,
    9.358867032006959e-05,
    -1.3264202894521244e-05,
];

/// Cached forward/inverse FFT plans for the unitary DFT operator.
#[derive(Clone)]
struct DftPlan {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for DftPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DftPlan")
            .field("len", &self.forward.len())
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum OperatorKind {
    Identity,
    ExplicitMatrix(DMatrix<f64>),
    /// Unitary DFT; output rows are the real parts followed by the imaginary parts.
    Dft,
    Difference {
        order: usize,
        direction: Direction,
        boundary: Boundary,
    },
    Wavelet {
        family: WaveletFamily,
        levels: usize,
    },
    /// Gathers the entries of each block in turn; `Ψ_d x` is the `d`-th run of the output.
    BlockPartition {
        blocks: Vec<Vec<usize>>,
    },
}

/// A linear map `Ψ: R^N → R^L` with its transpose.
#[derive(Debug, Clone)]
pub struct AnalysisOperator {
    kind: OperatorKind,
    rows: usize,
    cols: usize,
    dft: Option<DftPlan>,
}

/// Real-arithmetic representation of a complex vector, used as the codomain of the DFT.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexStackedVector {
    pub real_part: DVector<f64>,
    pub imag_part: DVector<f64>,
}

impl ComplexStackedVector {
    pub fn new(real_part: DVector<f64>, imag_part: DVector<f64>) -> Result<Self> {
        if real_part.len() != imag_part.len() {
            return Err(mismatch(
                "complex stacked vector",
                real_part.len(),
                imag_part.len(),
            ));
        }
        Ok(Self {
            real_part,
            imag_part,
        })
    }

    /// Splits a `[re; im]` column of even length.
    pub fn from_stacked(stacked: &DVector<f64>) -> Result<Self> {
        if !stacked.len().is_multiple_of(2) {
            return Err(Error::InvalidDimension(format!(
                "stacked complex vector must have even length, got {}",
                stacked.len()
            )));
        }
        let half = stacked.len() / 2;
        Ok(Self {
            real_part: stacked.rows(0, half).into_owned(),
            imag_part: stacked.rows(half, half).into_owned(),
        })
    }

    pub fn to_stacked(&self) -> DVector<f64> {
        let half = self.real_part.len();
        DVector::from_fn(2 * half, |i, _| {
            if i < half {
                self.real_part[i]
            } else {
                self.imag_part[i - half]
            }
        })
    }

    pub fn len(&self) -> usize {
        self.real_part.len()
    }

    pub fn is_empty(&self) -> bool {
        self.real_part.is_empty()
    }

    /// Complex modulus of each entry.
    pub fn modulus(&self) -> DVector<f64> {
        self.real_part
            .zip_map(&self.imag_part, |re, im| re.hypot(im))
    }
}

impl AnalysisOperator {
    pub fn identity(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDimension("identity of size 0".into()));
        }
        Ok(Self::from_kind(OperatorKind::Identity, n, n))
    }

    pub fn explicit(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(Error::InvalidDimension(
                "explicit operator must be non-empty".into(),
            ));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("explicit operator"));
        }
        let (rows, cols) = matrix.shape();
        Ok(Self::from_kind(
            OperatorKind::ExplicitMatrix(matrix),
            rows,
            cols,
        ))
    }

    /// Unitary `n`-point DFT, output stacked as `[Re Fx; Im Fx]`.
    pub fn dft(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDimension("DFT of length 0".into()));
        }
        let mut planner = FftPlanner::new();
        let plan = DftPlan {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        };
        let mut op = Self::from_kind(OperatorKind::Dft, 2 * n, n);
        op.dft = Some(plan);
        Ok(op)
    }

    /// Lag-`order` differencing matrix: forward rows compute `x[r + order] - x[r]`,
    /// backward rows the negation.
    pub fn difference(
        order: usize,
        direction: Direction,
        boundary: Boundary,
        n: usize,
    ) -> Result<Self> {
        if order == 0 || order >= n {
            return Err(Error::InvalidDimension(format!(
                "difference order {order} requires 1 <= order < n = {n}"
            )));
        }
        let single = match boundary {
            Boundary::PaperExact => n,
            Boundary::Truncated => n - order,
        };
        let rows = match direction {
            Direction::Stacked => 2 * single,
            _ => single,
        };
        Ok(Self::from_kind(
            OperatorKind::Difference {
                order,
                direction,
                boundary,
            },
            rows,
            n,
        ))
    }

    /// Periodic orthonormal wavelet analysis with `levels` decomposition stages.
    ///
    /// Coefficients are laid out coarse to fine: `[a_J, d_J, d_{J-1}, ..., d_1]`.
    pub fn wavelet(family: WaveletFamily, levels: usize, n: usize) -> Result<Self> {
        if levels == 0 {
            return Err(Error::InvalidDimension(
                "wavelet needs at least one level".into(),
            ));
        }
        if levels >= usize::BITS as usize || n == 0 || !n.is_multiple_of(1usize << levels) {
            return Err(Error::InvalidDimension(format!(
                "signal length {n} is not divisible by 2^{levels}"
            )));
        }
        Ok(Self::from_kind(
            OperatorKind::Wavelet { family, levels },
            n,
            n,
        ))
    }

    /// Largest admissible number of wavelet levels for length `n`.
    pub fn max_wavelet_levels(n: usize) -> usize {
        if n == 0 {
            0
        } else {
            n.trailing_zeros() as usize
        }
    }

    /// Permutes `x` so that each block's entries are contiguous; the blocks must
    /// partition `0..n`.
    pub fn block_partition(blocks: Vec<Vec<usize>>, n: usize) -> Result<Self> {
        let mut seen = vec![false; n];
        for block in &blocks {
            if block.is_empty() {
                return Err(Error::InvalidGroups("empty block".into()));
            }
            for &i in block {
                if i >= n {
                    return Err(Error::InvalidGroups(format!("index {i} outside 0..{n}")));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::InvalidGroups(format!("index {i} in two blocks")));
                }
            }
        }
        if n == 0 || seen.iter().any(|s| !s) {
            return Err(Error::InvalidGroups(
                "blocks do not cover every index".into(),
            ));
        }
        Ok(Self::from_kind(
            OperatorKind::BlockPartition { blocks },
            n,
            n,
        ))
    }

    fn from_kind(kind: OperatorKind, rows: usize, cols: usize) -> Self {
        Self {
            kind,
            rows,
            cols,
            dft: None,
        }
    }

    pub fn kind(&self) -> &OperatorKind {
        &self.kind
    }

    /// Output dimension `L`.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Input dimension `N`.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.kind, OperatorKind::Identity)
    }

    /// `ΨX`, applied column by column.
    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.nrows() != self.cols {
            return Err(mismatch("operator apply", self.cols, x.nrows()));
        }
        let mut out = DMatrix::zeros(self.rows, x.ncols());
        for (src, mut dst) in x.column_iter().zip(out.column_iter_mut()) {
            self.apply_column(src.as_slice(), dst.as_mut_slice());
        }
        Ok(out)
    }

    /// `Ψᵀ U`, applied column by column.
    pub fn adjoint(&self, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if u.nrows() != self.rows {
            return Err(mismatch("operator adjoint", self.rows, u.nrows()));
        }
        let mut out = DMatrix::zeros(self.cols, u.ncols());
        for (src, mut dst) in u.column_iter().zip(out.column_iter_mut()) {
            self.adjoint_column(src.as_slice(), dst.as_mut_slice());
        }
        Ok(out)
    }

    pub fn apply_vector(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.cols {
            return Err(mismatch("operator apply", self.cols, x.len()));
        }
        let mut out = DVector::zeros(self.rows);
        self.apply_column(x.as_slice(), out.as_mut_slice());
        Ok(out)
    }

    pub fn adjoint_vector(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        if u.len() != self.rows {
            return Err(mismatch("operator adjoint", self.rows, u.len()));
        }
        let mut out = DVector::zeros(self.cols);
        self.adjoint_column(u.as_slice(), out.as_mut_slice());
        Ok(out)
    }

    /// DFT of a real vector as a complex value. Only valid for the DFT kind.
    pub fn apply_complex(&self, x: &DVector<f64>) -> Result<ComplexStackedVector> {
        if !matches!(self.kind, OperatorKind::Dft) {
            return Err(Error::InvalidParameter(
                "complex output is only defined for the DFT operator".into(),
            ));
        }
        ComplexStackedVector::from_stacked(&self.apply_vector(x)?)
    }

    pub fn adjoint_complex(&self, u: &ComplexStackedVector) -> Result<DVector<f64>> {
        if !matches!(self.kind, OperatorKind::Dft) {
            return Err(Error::InvalidParameter(
                "complex input is only defined for the DFT operator".into(),
            ));
        }
        self.adjoint_vector(&u.to_stacked())
    }

    /// Dense `L × N` matrix of the operator.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.rows, self.cols);
        let mut e = vec![0.0; self.cols];
        for j in 0..self.cols {
            e[j] = 1.0;
            self.apply_column(&e, out.column_mut(j).as_mut_slice());
            e[j] = 0.0;
        }
        out
    }

    /// `ΨᵀΨ` as a dense `N × N` matrix.
    pub fn gram(&self) -> DMatrix<f64> {
        match &self.kind {
            OperatorKind::Identity
            | OperatorKind::Dft
            | OperatorKind::Wavelet { .. }
            | OperatorKind::BlockPartition { .. } => DMatrix::identity(self.cols, self.cols),
            OperatorKind::ExplicitMatrix(m) => m.tr_mul(m),
            OperatorKind::Difference { .. } => {
                let d = self.to_dense();
                d.tr_mul(&d)
            }
        }
    }

    fn apply_column(&self, x: &[f64], out: &mut [f64]) {
        match &self.kind {
            OperatorKind::Identity => out.copy_from_slice(x),
            OperatorKind::ExplicitMatrix(m) => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = m.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
                }
            }
            OperatorKind::Dft => {
                let plan = self.dft.as_ref().expect("DFT plan");
                let n = self.cols;
                let scale = 1.0 / (n as f64).sqrt();
                let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
                plan.forward.process(&mut buf);
                for (k, c) in buf.iter().enumerate() {
                    out[k] = c.re * scale;
                    out[n + k] = c.im * scale;
                }
            }
            OperatorKind::Difference {
                order,
                direction,
                boundary,
            } => {
                let single = match boundary {
                    Boundary::PaperExact => self.cols,
                    Boundary::Truncated => self.cols - order,
                };
                match direction {
                    Direction::Forward => forward_difference(x, *order, &mut out[..single], 1.0),
                    Direction::Backward => forward_difference(x, *order, &mut out[..single], -1.0),
                    Direction::Stacked => {
                        let (top, bottom) = out.split_at_mut(single);
                        forward_difference(x, *order, top, 1.0);
                        forward_difference(x, *order, bottom, -1.0);
                    }
                }
            }
            OperatorKind::Wavelet { family, levels } => {
                wavelet_analysis(family.scaling_filter(), *levels, x, out)
            }
            OperatorKind::BlockPartition { blocks } => {
                for (o, &i) in out.iter_mut().zip(blocks.iter().flatten()) {
                    *o = x[i];
                }
            }
        }
    }

    fn adjoint_column(&self, u: &[f64], out: &mut [f64]) {
        match &self.kind {
            OperatorKind::Identity => out.copy_from_slice(u),
            OperatorKind::ExplicitMatrix(m) => {
                out.fill(0.0);
                for (i, &ui) in u.iter().enumerate() {
                    for (o, a) in out.iter_mut().zip(m.row(i).iter()) {
                        *o += a * ui;
                    }
                }
            }
            OperatorKind::Dft => {
                let plan = self.dft.as_ref().expect("DFT plan");
                let n = self.cols;
                let scale = 1.0 / (n as f64).sqrt();
                let mut buf: Vec<Complex64> =
                    (0..n).map(|k| Complex64::new(u[k], u[n + k])).collect();
                plan.inverse.process(&mut buf);
                for (o, c) in out.iter_mut().zip(&buf) {
                    *o = c.re * scale;
                }
            }
            OperatorKind::Difference {
                order,
                direction,
                boundary,
            } => {
                let single = match boundary {
                    Boundary::PaperExact => self.cols,
                    Boundary::Truncated => self.cols - order,
                };
                out.fill(0.0);
                match direction {
                    Direction::Forward => {
                        forward_difference_adjoint(&u[..single], *order, out, 1.0)
                    }
                    Direction::Backward => {
                        forward_difference_adjoint(&u[..single], *order, out, -1.0)
                    }
                    Direction::Stacked => {
                        forward_difference_adjoint(&u[..single], *order, out, 1.0);
                        forward_difference_adjoint(&u[single..], *order, out, -1.0);
                    }
                }
            }
            OperatorKind::Wavelet { family, levels } => {
                wavelet_synthesis(family.scaling_filter(), *levels, u, out)
            }
            OperatorKind::BlockPartition { blocks } => {
                for (&v, &i) in u.iter().zip(blocks.iter().flatten()) {
                    out[i] = v;
                }
            }
        }
    }
}

/// `out[r] = sign * (x[r + order] - x[r])`; rows past `n - order` keep only `-x[r]`.
fn forward_difference(x: &[f64], order: usize, out: &mut [f64], sign: f64) {
    let n = x.len();
    for (r, o) in out.iter_mut().enumerate() {
        let ahead = if r + order < n { x[r + order] } else { 0.0 };
        *o = sign * (ahead - x[r]);
    }
}

/// Accumulates the transpose of [`forward_difference`] into `out`.
fn forward_difference_adjoint(u: &[f64], order: usize, out: &mut [f64], sign: f64) {
    let n = out.len();
    for (r, &ur) in u.iter().enumerate() {
        out[r] -= sign * ur;
        if r + order < n {
            out[r + order] += sign * ur;
        }
    }
}

fn wavelet_highpass(scaling: &[f64]) -> Vec<f64> {
    let len = scaling.len();
    (0..len)
        .map(|j| {
            let s = if j % 2 == 0 { 1.0 } else { -1.0 };
            s * scaling[len - 1 - j]
        })
        .collect()
}

fn wavelet_analysis(scaling: &[f64], levels: usize, x: &[f64], out: &mut [f64]) {
    let highpass = wavelet_highpass(scaling);
    let mut approx = x.to_vec();
    let mut len = x.len();
    for _ in 0..levels {
        let half = len / 2;
        let mut a = vec![0.0; half];
        let mut d = vec![0.0; half];
        for k in 0..half {
            let (mut sa, mut sd) = (0.0, 0.0);
            for (j, (h, g)) in scaling.iter().zip(&highpass).enumerate() {
                let v = approx[(2 * k + j) % len];
                sa += h * v;
                sd += g * v;
            }
            a[k] = sa;
            d[k] = sd;
        }
        out[half..len].copy_from_slice(&d);
        approx = a;
        len = half;
    }
    out[..len].copy_from_slice(&approx);
}

fn wavelet_synthesis(scaling: &[f64], levels: usize, u: &[f64], out: &mut [f64]) {
    let highpass = wavelet_highpass(scaling);
    let n = u.len();
    let mut len = n >> levels;
    let mut approx = u[..len].to_vec();
    for _ in 0..levels {
        let full = 2 * len;
        let detail = &u[len..full];
        let mut next = vec![0.0; full];
        for k in 0..len {
            for (j, (h, g)) in scaling.iter().zip(&highpass).enumerate() {
                next[(2 * k + j) % full] += h * approx[k] + g * detail[k];
            }
        }
        approx = next;
        len = full;
    }
    out.copy_from_slice(&approx);
}
