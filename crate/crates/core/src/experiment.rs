//! Declarative experiments: a config names the signal source, the sensing ensemble,
//! the methods and the sweep, and [`run`] executes it and writes the artifacts.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{
    k_fold_tune, run_benchmark, BenchmarkOutcome, BenchmarkPlan, CrossValidationConfig, Method,
    ParameterGrid, Trial, TrialSource, TuningReport,
};
use crate::io::{self, ingest_signal, Ingested, Layout, OutputFormat};
use crate::ops::{AnalysisOperator, Boundary, Direction, WaveletFamily};
use crate::prox::GroupStructure;
use crate::sensing::{
    derive_seed, generate_matrix, rng_from_seed, simulate_signal, BlockKind, SensingKind,
    SensingSpec, SimulatedSignalSpec, Snr,
};
use crate::solver::{
    least_squares_recover, make_preset, min_norm_in_ball, solve, Preset, PresetParams,
    RecoveryResult, SolverConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Benchmark on simulated signals.
    #[serde(alias = "simulate_blocks")]
    Simulate,
    /// Benchmark on signals ingested from a file.
    #[serde(alias = "recover_file")]
    Recover,
    /// Benchmark on any source.
    Benchmark,
    /// K-fold tuning of the first method's weights.
    Tune,
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simulate" | "simulate_blocks" => Ok(Self::Simulate),
            "recover" | "recover_file" => Ok(Self::Recover),
            "benchmark" => Ok(Self::Benchmark),
            "tune" => Ok(Self::Tune),
            other => Err(config_error(
                "kind",
                format!("unknown experiment kind `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalSource {
    /// One randomly placed block per trial.
    Blocks {
        n: usize,
        block_width: usize,
        block_kind: BlockKind,
        snr: Snr,
    },
    /// Single-column CSV cut into unit-norm sections; trial `c` uses section `c mod count`.
    File {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        section_length: Option<usize>,
    },
    /// Fresh low-rank piecewise-constant image per trial.
    SyntheticImage {
        #[serde(default = "default_image_size")]
        size: usize,
        #[serde(default = "default_image_rank")]
        rank: usize,
        /// Constant segments per factor vector.
        #[serde(default = "default_image_pieces")]
        pieces: usize,
    },
    /// Matrix CSV normalized by its largest entry.
    ImageFile { path: PathBuf },
}

fn default_image_size() -> usize {
    32
}

fn default_image_rank() -> usize {
    3
}

fn default_image_pieces() -> usize {
    6
}

/// Residual radius of a method, from the measurements of each trial.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonRule {
    /// `ε = 0`.
    #[default]
    Exact,
    Absolute(f64),
    /// `ε = fraction · ‖Y‖_F`.
    Relative(f64),
}

impl EpsilonRule {
    pub fn resolve(self, measurements: &DMatrix<f64>) -> f64 {
        match self {
            EpsilonRule::Exact => 0.0,
            EpsilonRule::Absolute(v) => v,
            EpsilonRule::Relative(f) => f * measurements.norm(),
        }
    }

    fn validate(self) -> std::result::Result<(), String> {
        match self {
            EpsilonRule::Exact => Ok(()),
            EpsilonRule::Absolute(v) | EpsilonRule::Relative(v) if v.is_finite() && v >= 0.0 => {
                Ok(())
            }
            _ => Err("epsilon must be finite and nonnegative".into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DictionarySpec {
    Identity,
    Dft,
    Difference {
        #[serde(default = "default_order")]
        order: usize,
        #[serde(default = "default_direction")]
        direction: Direction,
        #[serde(default = "default_boundary")]
        boundary: Boundary,
    },
    Wavelet {
        family: WaveletFamily,
        /// Deepest admissible level when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        levels: Option<usize>,
    },
}

fn default_order() -> usize {
    1
}

fn default_direction() -> Direction {
    Direction::Forward
}

fn default_boundary() -> Boundary {
    Boundary::PaperExact
}

impl DictionarySpec {
    pub fn build(&self, n: usize) -> Result<AnalysisOperator> {
        match *self {
            DictionarySpec::Identity => AnalysisOperator::identity(n),
            DictionarySpec::Dft => AnalysisOperator::dft(n),
            DictionarySpec::Difference {
                order,
                direction,
                boundary,
            } => AnalysisOperator::difference(order, direction, boundary, n),
            DictionarySpec::Wavelet { family, levels } => AnalysisOperator::wavelet(
                family,
                levels.unwrap_or_else(|| AnalysisOperator::max_wavelet_levels(n)),
                n,
            ),
        }
    }
}

/// One recovery method of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    /// Label in the artifacts; the preset label when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// A preset key (`bp`, `l1tv`, ...) or `ls` for the minimum-norm baseline.
    pub preset: String,
    #[serde(default)]
    pub epsilon: EpsilonRule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tv2_weight: Option<f64>,
    /// Sparsifying dictionary `Ψ`; identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dictionary: Option<DictionarySpec>,
    /// Differencing operator of the TV terms; first-order truncated forward when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tv: Option<DictionarySpec>,
    /// Width of the contiguous blocks of `Ψx` for the group programs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_width: Option<usize>,
}

const LS_KEY: &str = "ls";

impl MethodSpec {
    pub fn new(preset: &str) -> Self {
        Self {
            name: None,
            preset: preset.to_string(),
            epsilon: EpsilonRule::Exact,
            lambda2: None,
            tv2_weight: None,
            dictionary: None,
            tv: None,
            group_width: None,
        }
    }

    /// `None` for the least-squares baseline.
    pub fn preset(&self) -> Result<Option<Preset>> {
        if self.preset.eq_ignore_ascii_case(LS_KEY) {
            Ok(None)
        } else {
            Preset::from_str(&self.preset).map(Some)
        }
    }

    pub fn label(&self) -> String {
        match (&self.name, self.preset()) {
            (Some(name), _) => name.clone(),
            (None, Ok(Some(p))) => p.label().to_string(),
            (None, _) => "LS".to_string(),
        }
    }

    /// Set a tunable weight by name.
    pub fn set_parameter(&mut self, name: &str, value: f64) -> Result<()> {
        match name {
            "lambda2" => self.lambda2 = Some(value),
            "tv2_weight" => self.tv2_weight = Some(value),
            other => {
                return Err(config_error(
                    "tune.grid",
                    format!("unknown parameter `{other}`, expected lambda2 or tv2_weight"),
                ))
            }
        }
        Ok(())
    }

    fn validate(&self, field: &str) -> Result<()> {
        let preset = self
            .preset()
            .map_err(|e| config_error(&format!("{field}.preset"), e.to_string()))?;
        self.epsilon
            .validate()
            .map_err(|m| config_error(&format!("{field}.epsilon"), m))?;
        let Some(preset) = preset else {
            return Ok(());
        };
        let needs_lambda2 = matches!(
            preset,
            Preset::L1tv | Preset::L2l1tv | Preset::L1l1 | Preset::L1nuclear | Preset::L1tv1tv2
        );
        let needs_groups = matches!(preset, Preset::L2l1 | Preset::L2l1tv);
        let checks = [
            (needs_lambda2, self.lambda2.is_some(), "lambda2"),
            (needs_groups, self.group_width.is_some(), "group_width"),
            (
                preset == Preset::L1tv1tv2,
                self.tv2_weight.is_some(),
                "tv2_weight",
            ),
        ];
        for (needed, present, name) in checks {
            if needed && !present {
                return Err(config_error(
                    &format!("{field}.{name}"),
                    format!("required by preset {}", preset.label()),
                ));
            }
        }
        for (name, value) in [("lambda2", self.lambda2), ("tv2_weight", self.tv2_weight)] {
            if let Some(v) = value {
                if !v.is_finite() || v < 0.0 {
                    return Err(config_error(
                        &format!("{field}.{name}"),
                        "must be finite and nonnegative".into(),
                    ));
                }
            }
        }
        if self.group_width == Some(0) {
            return Err(config_error(
                &format!("{field}.group_width"),
                "must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Solve one trial with this method.
    pub fn recover_trial(&self, trial: &Trial, solver: &SolverConfig) -> Result<RecoveryResult> {
        let epsilon = self.epsilon.resolve(&trial.measurements);
        let Some(preset) = self.preset()? else {
            return if trial.measurements.ncols() == 1 {
                least_squares_recover(
                    &trial.measurements.column(0).into_owned(),
                    &trial.sensing,
                    epsilon,
                )
            } else {
                min_norm_in_ball(&trial.measurements, &trial.sensing, epsilon)
            };
        };
        let n = trial.sensing.ncols();
        let dictionary = self.dictionary.map(|d| d.build(n)).transpose()?;
        let groups = match self.group_width {
            Some(w) => {
                let rows = dictionary.as_ref().map_or(n, AnalysisOperator::rows);
                Some(GroupStructure::contiguous(rows, w)?)
            }
            None => None,
        };
        let params = PresetParams {
            epsilon,
            dictionary,
            groups,
            tv_operator: self.tv.map(|d| d.build(n)).transpose()?,
            lambda2: self.lambda2,
            tv2_weight: self.tv2_weight,
        };
        let problem = make_preset(
            preset,
            trial.measurements.clone(),
            trial.sensing.clone(),
            &params,
        )?;
        solve(&problem, solver)
    }
}

impl Method for MethodSpec {
    fn name(&self) -> String {
        self.label()
    }

    fn recover(&self, trial: &Trial, solver: &SolverConfig) -> Result<RecoveryResult> {
        self.recover_trial(trial, solver)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuneConfig {
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_trials_per_group")]
    pub trials_per_group: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
    pub grid: Vec<ParameterGrid>,
}

fn default_folds() -> usize {
    10
}

fn default_trials_per_group() -> usize {
    1
}

fn default_delta() -> f64 {
    0.2
}

/// Where and how artifacts are written. Not part of the serialized config, so an
/// embedded config reproduces the same bytes wherever it is rerun.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_output_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub format: OutputFormat,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_output_dir(),
            format: OutputFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    pub signal: SignalSource,
    #[serde(default = "default_sensing")]
    pub sensing: SensingKind,
    #[serde(default)]
    pub solver: SolverConfig,
    pub methods: Vec<MethodSpec>,
    pub m_values: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Record per-trial wall time; makes artifacts differ between runs.
    #[serde(default)]
    pub record_timing: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tune: Option<TuneConfig>,
    #[serde(default, skip_serializing)]
    pub output: OutputConfig,
}

fn default_sensing() -> SensingKind {
    SensingKind::Gaussian
}

fn default_trials() -> usize {
    1
}

fn config_error(field: &str, message: String) -> Error {
    Error::Config {
        field: field.to_string(),
        message,
    }
}

impl ExperimentConfig {
    /// Parse a `.json` file as JSON and anything else as TOML.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Input {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let is_json = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Accepts a bare config or a results document with a `config` entry.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let config = match value.get("config") {
            Some(inner) if value.get("summary").is_some() || value.get("report").is_some() => {
                inner.clone()
            }
            _ => value,
        };
        Ok(serde_json::from_value(config)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.solver
            .validate()
            .map_err(|e| config_error("solver", e.to_string()))?;
        if self.methods.is_empty() {
            return Err(config_error(
                "methods",
                "at least one method is required".into(),
            ));
        }
        for (i, m) in self.methods.iter().enumerate() {
            m.validate(&format!("methods[{i}]"))?;
        }
        if self.m_values.is_empty() {
            return Err(config_error(
                "m_values",
                "at least one measurement count is required".into(),
            ));
        }
        if self.trials == 0 {
            return Err(config_error("trials", "must be positive".into()));
        }
        match (&self.signal, self.kind) {
            (
                SignalSource::File { .. } | SignalSource::ImageFile { .. },
                ExperimentKind::Simulate,
            ) => {
                return Err(config_error(
                    "signal",
                    "simulate needs a simulated source".into(),
                ))
            }
            (
                SignalSource::Blocks { .. } | SignalSource::SyntheticImage { .. },
                ExperimentKind::Recover,
            ) => return Err(config_error("signal", "recover needs a file source".into())),
            _ => {}
        }
        match &self.signal {
            SignalSource::Blocks { n, block_width, .. } => {
                if *block_width == 0 || block_width > n {
                    return Err(config_error(
                        "signal.block_width",
                        format!("must lie in 1..={n}"),
                    ));
                }
            }
            SignalSource::File { path, .. } | SignalSource::ImageFile { path } => {
                if !path.is_file() {
                    return Err(config_error(
                        "signal.path",
                        format!("{} does not exist", path.display()),
                    ));
                }
            }
            SignalSource::SyntheticImage { size, rank, pieces } => {
                if *size == 0 || *rank == 0 || *pieces == 0 {
                    return Err(config_error(
                        "signal",
                        "image size, rank and pieces must be positive".into(),
                    ));
                }
            }
        }
        if self.kind == ExperimentKind::Tune {
            let Some(tune) = &self.tune else {
                return Err(config_error("tune", "required for kind = \"tune\"".into()));
            };
            if tune.folds < 2 {
                return Err(config_error("tune.folds", "must be at least 2".into()));
            }
            if tune.trials_per_group == 0 {
                return Err(config_error(
                    "tune.trials_per_group",
                    "must be positive".into(),
                ));
            }
            if tune.grid.is_empty() || tune.grid.iter().any(|g| g.values.is_empty()) {
                return Err(config_error(
                    "tune.grid",
                    "every grid must be non-empty".into(),
                ));
            }
            let mut probe = self.methods[0].clone();
            for g in &tune.grid {
                probe.set_parameter(&g.name, g.values[0])?;
            }
        }
        Ok(())
    }

    /// Build the trial source; checks every `m` against the signal length.
    pub fn trial_source(&self) -> Result<Box<dyn TrialSource>> {
        let source: Box<dyn TrialSource> = match &self.signal {
            SignalSource::Blocks {
                n,
                block_width,
                block_kind,
                snr,
            } => Box::new(BlockSource {
                n: *n,
                block_width: *block_width,
                block_kind: *block_kind,
                snr: *snr,
                sensing: self.sensing,
                seed: self.seed,
            }),
            SignalSource::File {
                path,
                section_length,
            } => match ingest_signal(path, Layout::SingleColumn, *section_length)? {
                Ingested::Sections(sections) => Box::new(FixedSource {
                    signals: sections
                        .into_iter()
                        .map(|s| DMatrix::from_column_slice(s.len(), 1, s.as_slice()))
                        .collect(),
                    sensing: self.sensing,
                    seed: self.seed,
                }),
                Ingested::Matrix(_) => unreachable!("single-column layout yields sections"),
            },
            SignalSource::ImageFile { path } => {
                match ingest_signal(path, Layout::MultiColumnMatrix, None)? {
                    Ingested::Matrix(image) => Box::new(FixedSource {
                        signals: vec![image],
                        sensing: self.sensing,
                        seed: self.seed,
                    }),
                    Ingested::Sections(_) => unreachable!("matrix layout yields a matrix"),
                }
            }
            SignalSource::SyntheticImage { size, rank, pieces } => Box::new(ImageSource {
                size: *size,
                rank: *rank,
                pieces: *pieces,
                sensing: self.sensing,
                seed: self.seed,
            }),
        };
        let n = source
            .trial(self.m_values[0].max(1).min(self.signal_len_hint()), 0)?
            .original
            .nrows();
        if let Some(&bad) = self.m_values.iter().find(|&&m| m == 0 || m > n) {
            return Err(config_error(
                "m_values",
                format!("measurement count {bad} must lie in 1..={n}"),
            ));
        }
        Ok(source)
    }

    fn signal_len_hint(&self) -> usize {
        match &self.signal {
            SignalSource::Blocks { n, .. } => *n,
            SignalSource::SyntheticImage { size, .. } => *size,
            _ => 1,
        }
    }
}

/// Stream tags that keep the per-trial draws independent.
const SIGNAL_STREAM: u64 = 1;
const SENSING_STREAM: u64 = 2;

fn sensing_matrix(
    kind: SensingKind,
    m: usize,
    n: usize,
    seed: u64,
    c: usize,
) -> Result<DMatrix<f64>> {
    generate_matrix(&SensingSpec {
        kind,
        m,
        n,
        seed: derive_seed(seed, &[SENSING_STREAM, m as u64, c as u64]),
    })
}

/// Simulated block signals. The signal of trial `c` is shared by every `m`; the
/// measurement matrix is fresh for every `(m, c)`.
#[derive(Debug, Clone)]
pub struct BlockSource {
    pub n: usize,
    pub block_width: usize,
    pub block_kind: BlockKind,
    pub snr: Snr,
    pub sensing: SensingKind,
    pub seed: u64,
}

impl TrialSource for BlockSource {
    fn trial(&self, m: usize, index: usize) -> Result<Trial> {
        let signal = simulate_signal(&SimulatedSignalSpec {
            n: self.n,
            block_width: self.block_width,
            block_kind: self.block_kind,
            snr: self.snr,
            seed: derive_seed(self.seed, &[SIGNAL_STREAM, index as u64]),
        })?;
        let phi = sensing_matrix(self.sensing, m, self.n, self.seed, index)?;
        let y = &phi * &signal.noisy;
        Ok(Trial {
            original: DMatrix::from_column_slice(self.n, 1, signal.clean.as_slice()),
            measurements: DMatrix::from_column_slice(m, 1, y.as_slice()),
            sensing: phi,
        })
    }
}

/// Fixed signals (ingested data) cycled over the trials, each with a fresh matrix.
#[derive(Debug, Clone)]
pub struct FixedSource {
    pub signals: Vec<DMatrix<f64>>,
    pub sensing: SensingKind,
    pub seed: u64,
}

impl TrialSource for FixedSource {
    fn trial(&self, m: usize, index: usize) -> Result<Trial> {
        if self.signals.is_empty() {
            return Err(Error::InvalidParameter("no signals to recover".into()));
        }
        let x = &self.signals[index % self.signals.len()];
        let phi = sensing_matrix(self.sensing, m, x.nrows(), self.seed, index)?;
        Ok(Trial {
            measurements: &phi * x,
            original: x.clone(),
            sensing: phi,
        })
    }
}

/// Synthetic low-rank piecewise-constant images, one per trial.
#[derive(Debug, Clone)]
pub struct ImageSource {
    pub size: usize,
    pub rank: usize,
    pub pieces: usize,
    pub sensing: SensingKind,
    pub seed: u64,
}

impl TrialSource for ImageSource {
    fn trial(&self, m: usize, index: usize) -> Result<Trial> {
        let image = synthetic_image(
            self.size,
            self.rank,
            self.pieces,
            derive_seed(self.seed, &[SIGNAL_STREAM, index as u64]),
        );
        let phi = sensing_matrix(self.sensing, m, self.size, self.seed, index)?;
        Ok(Trial {
            measurements: &phi * &image,
            original: image,
            sensing: phi,
        })
    }
}

/// Sum of `rank` outer products of nonnegative step vectors with `pieces` constant
/// segments each, scaled so its largest entry is 1. Rows and columns are piecewise
/// constant and the rank is at most `rank`.
pub fn synthetic_image(size: usize, rank: usize, pieces: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = rng_from_seed(seed);
    let pieces = pieces.max(1);
    let mut step_vector = || {
        let mut cuts: Vec<usize> = (1..pieces).map(|_| rng.gen_range(1..size.max(2))).collect();
        cuts.sort_unstable();
        let levels: Vec<f64> = (0..pieces).map(|_| rng.gen_range(0.0..1.0)).collect();
        DVector::from_fn(size, |i, _| {
            levels[cuts.iter().filter(|&&c| c <= i).count()]
        })
    };
    let mut image = DMatrix::zeros(size, size);
    for _ in 0..rank {
        let u = step_vector();
        let v = step_vector();
        image += &u * v.transpose();
    }
    let peak = image.amax();
    if peak > 0.0 {
        image /= peak;
    }
    image
}

/// Artifacts and results of one run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub artifacts: Vec<PathBuf>,
    pub benchmark: Option<BenchmarkOutcome>,
    pub tuning: Option<TuningReport>,
}

#[derive(Serialize)]
struct TuningDocument<'a> {
    config: &'a ExperimentConfig,
    report: &'a TuningReport,
}

pub const TUNING_JSON: &str = "tuning.json";

/// Validate and execute the experiment, writing artifacts into `config.output.dir`.
pub fn run(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    let source = config.trial_source()?;
    match config.kind {
        ExperimentKind::Simulate | ExperimentKind::Recover | ExperimentKind::Benchmark => {
            let plan = BenchmarkPlan {
                m_values: config.m_values.clone(),
                trials: config.trials,
                solver: config.solver.clone(),
                record_timing: config.record_timing,
            };
            let outcome = run_benchmark(&config.methods, source.as_ref(), &plan)?;
            let artifacts =
                io::emit_results(&config.output.dir, &outcome, config, config.output.format)?;
            Ok(RunOutput {
                artifacts,
                benchmark: Some(outcome),
                tuning: None,
            })
        }
        ExperimentKind::Tune => {
            let report = tune(config, source.as_ref())?;
            fs::create_dir_all(&config.output.dir)?;
            let path = config.output.dir.join(TUNING_JSON);
            let doc = TuningDocument {
                config,
                report: &report,
            };
            io::write_atomic(&path, io::to_json(&doc)?.as_bytes())?;
            Ok(RunOutput {
                artifacts: vec![path],
                benchmark: None,
                tuning: Some(report),
            })
        }
    }
}

/// K-fold tuning of `methods[0]` on groups drawn at `m_values[0]`.
pub fn tune(config: &ExperimentConfig, source: &dyn TrialSource) -> Result<TuningReport> {
    let tune = config
        .tune
        .as_ref()
        .ok_or_else(|| config_error("tune", "missing".into()))?;
    let m = config.m_values[0];
    let groups: Vec<Vec<Trial>> = (0..tune.folds)
        .map(|g| {
            (0..tune.trials_per_group)
                .map(|i| source.trial(m, g * tune.trials_per_group + i))
                .collect()
        })
        .collect::<Result<_>>()?;
    let cv = CrossValidationConfig {
        folds: tune.folds,
        grid: tune.grid.clone(),
        delta: tune.delta,
        seed: config.seed,
    };
    let base = &config.methods[0];
    k_fold_tune(&groups, &cv, &config.solver, |point, trial, solver| {
        let mut method = base.clone();
        for (g, &v) in tune.grid.iter().zip(point) {
            method.set_parameter(&g.name, v)?;
        }
        method.recover_trial(trial, solver)
    })
}
