//! Measurement ensembles, simulated block signals and the measurement model.
//!
//! All randomness flows from explicit `u64` seeds through ChaCha generators, so a
//! `(spec, seed)` pair always reproduces the same draw on every platform.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{mismatch, Error, Result};

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mixes a base seed with stream/index tags into an independent child seed (splitmix64).
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mut state = base;
    for &t in tags {
        state = splitmix(state ^ splitmix(t.wrapping_add(0x9E37_79B9_7F4A_7C15)));
    }
    splitmix(state)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensingKind {
    /// i.i.d. standard normal entries.
    Gaussian,
    /// i.i.d. ±1 entries.
    Bernoulli,
    /// Distinct rows of the orthonormal real Fourier basis.
    PartialFourier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensingSpec {
    pub kind: SensingKind,
    pub m: usize,
    pub n: usize,
    pub seed: u64,
}

pub fn generate_matrix(spec: &SensingSpec) -> Result<DMatrix<f64>> {
    let SensingSpec { kind, m, n, seed } = *spec;
    if m == 0 || n == 0 || m > n {
        return Err(Error::InvalidDimension(format!(
            "sensing matrix needs 1 <= M <= N, got M = {m}, N = {n}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    Ok(match kind {
        SensingKind::Gaussian => DMatrix::from_fn(m, n, |_, _| rng.sample(StandardNormal)),
        SensingKind::Bernoulli => {
            DMatrix::from_fn(m, n, |_, _| if rng.gen::<bool>() { 1.0 } else { -1.0 })
        }
        SensingKind::PartialFourier => {
            let rows = sample(&mut rng, n, m).into_vec();
            let mut phi = DMatrix::zeros(m, n);
            for (i, &k) in rows.iter().enumerate() {
                for j in 0..n {
                    phi[(i, j)] = real_fourier_entry(k, j, n);
                }
            }
            phi
        }
    })
}

/// Row `k` of the orthonormal real Fourier basis: DC, paired cosine/sine rows, and
/// the alternating Nyquist row for even `n`.
fn real_fourier_entry(k: usize, j: usize, n: usize) -> f64 {
    let nf = n as f64;
    if k == 0 {
        return 1.0 / nf.sqrt();
    }
    if n.is_multiple_of(2) && k == n - 1 {
        return if j.is_multiple_of(2) { 1.0 } else { -1.0 } / nf.sqrt();
    }
    let freq = k.div_ceil(2);
    let angle = 2.0 * PI * (freq * j % n) as f64 / nf;
    let s = (2.0 / nf).sqrt();
    if k % 2 == 1 {
        s * angle.cos()
    } else {
        s * angle.sin()
    }
}

/// Linear power signal-to-noise ratio; `Infinite` means no noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Snr {
    Infinite,
    Linear(f64),
}

impl Snr {
    pub fn linear(value: f64) -> Result<Self> {
        if value.is_nan() || value <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "SNR must be positive, got {value}"
            )));
        }
        Ok(if value.is_infinite() {
            Snr::Infinite
        } else {
            Snr::Linear(value)
        })
    }

    pub fn from_db(db: f64) -> Result<Self> {
        Self::linear(10f64.powf(db / 10.0))
    }
}

impl fmt::Display for Snr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Snr::Infinite => f.write_str("inf"),
            Snr::Linear(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for Snr {
    type Err = Error;

    /// Accepts `inf`, a linear ratio such as `5`, or decibels such as `7db`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        if matches!(t.as_str(), "inf" | "infinity" | "none") {
            return Ok(Snr::Infinite);
        }
        let parse = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("cannot parse SNR `{s}`")))
        };
        match t.strip_suffix("db") {
            Some(db) => Self::from_db(parse(db)?),
            None => Self::linear(parse(&t)?),
        }
    }
}

impl Serialize for Snr {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Snr {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Number(v) => Snr::linear(v),
            Raw::Text(s) => s.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    /// Constant block.
    Rectangle,
    /// Linear ramp rising across the block.
    Triangle,
    /// One full period of a sine.
    Sine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulatedSignalSpec {
    pub n: usize,
    pub block_width: usize,
    pub block_kind: BlockKind,
    pub snr: Snr,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedSignal {
    /// Unit-norm noiseless signal.
    pub clean: DVector<f64>,
    /// `clean` plus white Gaussian noise at the requested SNR.
    pub noisy: DVector<f64>,
    /// Index of the first block sample.
    pub offset: usize,
}

/// One nonzero block at a uniformly random offset, normalized to unit L2 norm.
pub fn simulate_signal(spec: &SimulatedSignalSpec) -> Result<SimulatedSignal> {
    let SimulatedSignalSpec {
        n,
        block_width: w,
        block_kind,
        snr,
        seed,
    } = *spec;
    if w == 0 || w > n {
        return Err(Error::InvalidDimension(format!(
            "block width {w} must lie in 1..={n}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let offset = rng.gen_range(0..=n - w);
    let noise_seed: u64 = rng.gen();
    let mut clean = DVector::zeros(n);
    for j in 0..w {
        let t = j as f64 / w as f64;
        clean[offset + j] = match block_kind {
            BlockKind::Rectangle => 1.0,
            BlockKind::Triangle => (j + 1) as f64 / w as f64,
            BlockKind::Sine => (2.0 * PI * t).sin(),
        };
    }
    let norm = clean.norm();
    if norm > 0.0 {
        clean /= norm;
    }
    let noisy = add_noise(&clean, snr, noise_seed)?;
    Ok(SimulatedSignal {
        clean,
        noisy,
        offset,
    })
}

/// `x + n` with white Gaussian `n` scaled so that `‖x‖² / E‖n‖² = snr`.
pub fn add_noise(x: &DVector<f64>, snr: Snr, seed: u64) -> Result<DVector<f64>> {
    match snr {
        Snr::Infinite => Ok(x.clone()),
        Snr::Linear(ratio) => {
            if ratio.is_nan() || ratio <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "SNR must be positive, got {ratio}"
                )));
            }
            if x.is_empty() {
                return Ok(x.clone());
            }
            let sigma = (x.norm_squared() / (ratio * x.len() as f64)).sqrt();
            let mut rng = rng_from_seed(seed);
            Ok(x.map(|v| v + sigma * rng.sample::<f64, _>(StandardNormal)))
        }
    }
}

/// `y = Φx` (or `Y = ΦX` column-wise).
pub fn sense(sensing: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if sensing.ncols() != x.nrows() {
        return Err(mismatch("sense", sensing.ncols(), x.nrows()));
    }
    Ok(sensing * x)
}

pub fn sense_vector(sensing: &DMatrix<f64>, x: &DVector<f64>) -> Result<DVector<f64>> {
    if sensing.ncols() != x.len() {
        return Err(mismatch("sense", sensing.ncols(), x.len()));
    }
    Ok(sensing * x)
}
