//! Named recovery programs built on top of the generic regularizer stack.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Mode, Norm, RecoveryProblem, Regularizer};
use crate::error::{Error, Result};
use crate::ops::{AnalysisOperator, Boundary, Direction};
use crate::prox::GroupStructure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// `min ‖Ψx‖₁` s.t. `y = Φx`.
    Bp,
    /// `min ‖Ψx‖₁` s.t. `‖y − Φx‖ ≤ ε`.
    Bpdn,
    /// `min Σ_d ‖Ψ_d x‖₂` s.t. `‖y − Φx‖ ≤ ε`.
    L2l1,
    /// `min ‖Dx‖₁` s.t. `‖y − Φx‖ ≤ ε`.
    Tv,
    /// `min ‖X‖_*` s.t. `Y = ΦX`.
    Nuclear,
    /// `min ‖Dx‖₁ + λ₂‖Ψx‖₁`.
    L1tv,
    /// `min ‖Dx‖₁ + λ₂ Σ_d ‖Ψ_d x‖₂`.
    L2l1tv,
    /// `min ‖x‖₁ + λ₂‖Fx‖₁` with the complex-modulus L1 norm of the DFT.
    L1l1,
    /// `min ‖vec(ΨX)‖₁ + λ₂‖X‖_*`.
    L1nuclear,
    /// `min ‖Dx‖₁ + λ‖Dx‖₂ + λ₂‖Ψx‖₁`.
    L1tv1tv2,
}

impl Preset {
    pub const ALL: [Preset; 10] = [
        Preset::Bp,
        Preset::Bpdn,
        Preset::L2l1,
        Preset::Tv,
        Preset::Nuclear,
        Preset::L1tv,
        Preset::L2l1tv,
        Preset::L1l1,
        Preset::L1nuclear,
        Preset::L1tv1tv2,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Preset::Bp => "BP",
            Preset::Bpdn => "BPDN",
            Preset::L2l1 => "L2/L1",
            Preset::Tv => "TV",
            Preset::Nuclear => "NUCLEAR",
            Preset::L1tv => "L1-TV",
            Preset::L2l1tv => "L2/L1-TV",
            Preset::L1l1 => "L1-L1",
            Preset::L1nuclear => "L1-NUCLEAR",
            Preset::L1tv1tv2 => "L1-TV1-TV2",
        }
    }

    fn key(self) -> &'static str {
        match self {
            Preset::Bp => "bp",
            Preset::Bpdn => "bpdn",
            Preset::L2l1 => "l2l1",
            Preset::Tv => "tv",
            Preset::Nuclear => "nuclear",
            Preset::L1tv => "l1tv",
            Preset::L2l1tv => "l2l1tv",
            Preset::L1l1 => "l1l1",
            Preset::L1nuclear => "l1nuclear",
            Preset::L1tv1tv2 => "l1tv1tv2",
        }
    }

    /// Programs whose variable is a matrix.
    pub fn requires_matrix(self) -> bool {
        matches!(self, Preset::Nuclear | Preset::L1nuclear)
    }

    /// Programs with an equality data constraint.
    pub fn is_exact_fit(self) -> bool {
        matches!(self, Preset::Bp | Preset::Nuclear)
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let wanted = s.to_ascii_lowercase();
        Preset::ALL
            .into_iter()
            .find(|p| p.key() == wanted || p.label().to_ascii_lowercase() == wanted)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown preset `{s}`")))
    }
}

/// Inputs shared by the presets; which fields are required depends on the preset.
#[derive(Debug, Clone, Default)]
pub struct PresetParams {
    /// Residual bound; ignored by the exact-fit programs.
    pub epsilon: f64,
    /// Sparsifying dictionary `Ψ`; identity when absent.
    pub dictionary: Option<AnalysisOperator>,
    /// Blocks of `Ψx` for the group programs.
    pub groups: Option<GroupStructure>,
    /// Differencing operator for the TV terms; first-order forward truncated when absent.
    pub tv_operator: Option<AnalysisOperator>,
    /// Weight of the second structure term.
    pub lambda2: Option<f64>,
    /// Weight of the TV2 term in the combined TV1 + TV2 program.
    pub tv2_weight: Option<f64>,
}

/// Build the regularizer stack of a named program. The leading term always has weight 1.
pub fn make_preset(
    preset: Preset,
    measurements: DMatrix<f64>,
    sensing: DMatrix<f64>,
    params: &PresetParams,
) -> Result<RecoveryProblem> {
    let n = sensing.ncols();
    let r = measurements.ncols();
    let mode = if preset.requires_matrix() || r > 1 {
        Mode::Matrix
    } else {
        Mode::Vector
    };
    let name = preset.label();
    let dictionary = || match &params.dictionary {
        Some(d) => Ok(d.clone()),
        None => AnalysisOperator::identity(n),
    };
    let tv = || match &params.tv_operator {
        Some(d) => Ok(d.clone()),
        None => AnalysisOperator::difference(1, Direction::Forward, Boundary::Truncated, n),
    };
    let lambda2 = || {
        params.lambda2.ok_or(Error::MissingParameter {
            preset: name,
            parameter: "lambda2",
        })
    };
    let groups = || {
        params.groups.clone().ok_or(Error::MissingParameter {
            preset: name,
            parameter: "groups",
        })
    };
    let nuclear = || {
        Regularizer::new(
            AnalysisOperator::identity(n)?,
            Norm::Nuclear { rows: n, cols: r },
            1.0,
        )
    };
    let with_weight = |reg: Regularizer, w: f64| Regularizer::new(reg.operator, reg.norm, w);

    let regularizers = match preset {
        Preset::Bp | Preset::Bpdn => vec![Regularizer::l1(dictionary()?, 1.0)?],
        Preset::L2l1 => vec![Regularizer::new(
            dictionary()?,
            Norm::GroupL2L1(groups()?),
            1.0,
        )?],
        Preset::Tv => vec![Regularizer::l1(tv()?, 1.0)?],
        Preset::Nuclear => vec![nuclear()?],
        Preset::L1tv => vec![
            Regularizer::l1(tv()?, 1.0)?,
            Regularizer::l1(dictionary()?, lambda2()?)?,
        ],
        Preset::L2l1tv => vec![
            Regularizer::l1(tv()?, 1.0)?,
            Regularizer::new(dictionary()?, Norm::GroupL2L1(groups()?), lambda2()?)?,
        ],
        Preset::L1l1 => vec![
            Regularizer::l1(AnalysisOperator::identity(n)?, 1.0)?,
            Regularizer::new(
                AnalysisOperator::dft(n)?,
                Norm::GroupL2L1(GroupStructure::complex_pairs(n)?),
                lambda2()?,
            )?,
        ],
        Preset::L1nuclear => vec![
            Regularizer::l1(dictionary()?, 1.0)?,
            with_weight(nuclear()?, lambda2()?)?,
        ],
        Preset::L1tv1tv2 => {
            let d = tv()?;
            let mix = params.tv2_weight.ok_or(Error::MissingParameter {
                preset: name,
                parameter: "tv2_weight",
            })?;
            let whole = GroupStructure::single(d.rows())?;
            vec![
                Regularizer::l1(d.clone(), 1.0)?,
                Regularizer::new(d, Norm::GroupL2L1(whole), mix)?,
                Regularizer::l1(dictionary()?, lambda2()?)?,
            ]
        }
    };
    let epsilon = if preset.is_exact_fit() {
        0.0
    } else {
        params.epsilon
    };
    RecoveryProblem::new(measurements, sensing, epsilon, regularizers, mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::OperatorKind;

    fn setup(r: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        (DMatrix::from_element(3, r, 1.0), DMatrix::identity(3, 6))
    }

    #[test]
    fn bpdn_is_single_identity_l1() {
        let (y, phi) = setup(1);
        let params = PresetParams {
            epsilon: 0.3,
            ..Default::default()
        };
        let p = make_preset(Preset::Bpdn, y, phi, &params).unwrap();
        assert_eq!(p.regularizers().len(), 1);
        let reg = &p.regularizers()[0];
        assert!(reg.operator().is_identity());
        assert_eq!(*reg.norm(), Norm::L1);
        assert_eq!(reg.weight(), 1.0);
        assert_eq!(p.epsilon(), 0.3);
        assert_eq!(p.mode(), Mode::Vector);
    }

    #[test]
    fn bp_forces_exact_fit() {
        let (y, phi) = setup(1);
        let params = PresetParams {
            epsilon: 0.3,
            ..Default::default()
        };
        assert_eq!(
            make_preset(Preset::Bp, y, phi, &params).unwrap().epsilon(),
            0.0
        );
    }

    #[test]
    fn l1l1_stack() {
        let (y, phi) = setup(1);
        let params = PresetParams {
            epsilon: 0.1,
            lambda2: Some(0.05),
            ..Default::default()
        };
        let p = make_preset(Preset::L1l1, y, phi, &params).unwrap();
        let regs = p.regularizers();
        assert_eq!(regs.len(), 2);
        assert!(regs[0].operator().is_identity());
        assert_eq!(regs[0].weight(), 1.0);
        assert!(matches!(regs[1].operator().kind(), OperatorKind::Dft));
        assert_eq!(
            *regs[1].norm(),
            Norm::GroupL2L1(GroupStructure::complex_pairs(6).unwrap())
        );
        assert_eq!(regs[1].weight(), 0.05);
    }

    #[test]
    fn l1nuclear_stack() {
        let (y, phi) = setup(4);
        let d =
            AnalysisOperator::difference(1, Direction::Forward, Boundary::Truncated, 6).unwrap();
        let params = PresetParams {
            dictionary: Some(d),
            lambda2: Some(3.0),
            ..Default::default()
        };
        let p = make_preset(Preset::L1nuclear, y, phi, &params).unwrap();
        assert_eq!(p.mode(), Mode::Matrix);
        let regs = p.regularizers();
        assert!(matches!(
            regs[0].operator().kind(),
            OperatorKind::Difference { order: 1, .. }
        ));
        assert_eq!(*regs[0].norm(), Norm::L1);
        assert_eq!(regs[0].weight(), 1.0);
        assert!(regs[1].operator().is_identity());
        assert_eq!(*regs[1].norm(), Norm::Nuclear { rows: 6, cols: 4 });
        assert_eq!(regs[1].weight(), 3.0);
    }

    #[test]
    fn missing_parameters_are_named() {
        let (y, phi) = setup(1);
        let err = make_preset(
            Preset::L1tv,
            y.clone(),
            phi.clone(),
            &PresetParams::default(),
        );
        assert!(matches!(
            err,
            Err(Error::MissingParameter {
                parameter: "lambda2",
                ..
            })
        ));
        let err = make_preset(
            Preset::L2l1,
            y.clone(),
            phi.clone(),
            &PresetParams::default(),
        );
        assert!(matches!(
            err,
            Err(Error::MissingParameter {
                parameter: "groups",
                ..
            })
        ));
        let params = PresetParams {
            lambda2: Some(1.0),
            ..Default::default()
        };
        assert!(matches!(
            make_preset(Preset::L1tv1tv2, y, phi, &params),
            Err(Error::MissingParameter {
                parameter: "tv2_weight",
                ..
            })
        ));
    }

    #[test]
    fn tv_mix_stack() {
        let (y, phi) = setup(1);
        let params = PresetParams {
            lambda2: Some(0.2),
            tv2_weight: Some(0.5),
            ..Default::default()
        };
        let p = make_preset(Preset::L1tv1tv2, y, phi, &params).unwrap();
        let w: Vec<f64> = p.regularizers().iter().map(|r| r.weight()).collect();
        assert_eq!(w, vec![1.0, 0.5, 0.2]);
        assert!(matches!(p.regularizers()[1].norm(), Norm::GroupL2L1(g) if g.blocks().len() == 1));
    }

    #[test]
    fn preset_names_parse() {
        for p in Preset::ALL {
            assert_eq!(p.label().parse::<Preset>().unwrap(), p);
            assert_eq!(p.key().parse::<Preset>().unwrap(), p);
        }
        assert!("nope".parse::<Preset>().is_err());
    }
}
