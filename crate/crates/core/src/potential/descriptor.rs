//! JSON descriptors for potentials.
//!
//! A descriptor is either a library entry `{"name": ..., "params": {...}}`
//! or a custom potential:
//!
//! ```json
//! {
//!   "breakpoints": [-1.0, 1.0],
//!   "pieces": [[], [{"kind": "const", "coeff": [2.0, 0.0]}], []],
//!   "spikes": [{"x": 0.0, "c": 5.0}],
//!   "modes": [
//!     {"j": 1, "breakpoints": [-1.0, 1.0], "pieces": [[], [{"kind": "const", "coeff": [0.0, -0.5]}], []]},
//!     {"j": -1, "breakpoints": [-1.0, 1.0], "pieces": [[], [{"kind": "const", "coeff": [0.0, 0.5]}], []]}
//!   ],
//!   "epsilon": 0.05
//! }
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{
    library, MicroTerm, PeriodicProfile, Piece, PiecewiseSmoothFn, SingularPart, Spike,
    TwoScalePotential, DEFAULT_J_MAX,
};
use crate::error::{Error, Result};

fn default_j_max() -> usize {
    DEFAULT_J_MAX
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeDescriptor {
    pub j: i64,
    #[serde(default)]
    pub breakpoints: Vec<f64>,
    pub pieces: Vec<Piece>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomPotential {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub breakpoints: Vec<f64>,
    #[serde(default)]
    pub pieces: Vec<Piece>,
    #[serde(default)]
    pub spikes: Vec<Spike>,
    #[serde(default)]
    pub modes: Vec<ModeDescriptor>,
    #[serde(default)]
    pub micro: Vec<MicroTerm>,
    pub epsilon: f64,
    #[serde(default = "default_j_max")]
    pub jmax: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PotentialDescriptor {
    Custom(CustomPotential),
    Library {
        name: String,
        #[serde(default)]
        params: BTreeMap<String, f64>,
    },
}

impl PotentialDescriptor {
    pub fn library(name: &str, params: BTreeMap<String, f64>) -> Self {
        PotentialDescriptor::Library {
            name: name.to_string(),
            params,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn build(&self) -> Result<TwoScalePotential> {
        match self {
            PotentialDescriptor::Library { name, params } => library(name, params),
            PotentialDescriptor::Custom(c) => {
                let v_reg = if c.pieces.is_empty() && c.breakpoints.is_empty() {
                    PiecewiseSmoothFn::zero()
                } else {
                    PiecewiseSmoothFn::new(c.breakpoints.clone(), c.pieces.clone())?
                };
                let mut micro = c.micro.clone();
                for m in &c.modes {
                    if m.j == 0 {
                        return Err(Error::InvalidInput(
                            "mode j = 0 violates the mean-zero condition".into(),
                        ));
                    }
                    micro.push(MicroTerm {
                        envelope: PiecewiseSmoothFn::new(m.breakpoints.clone(), m.pieces.clone())?,
                        profile: PeriodicProfile::Fourier {
                            coeffs: vec![(m.j, Complex64::new(1.0, 0.0))],
                        },
                    });
                }
                TwoScalePotential::new(
                    c.name.clone().unwrap_or_else(|| "custom".into()),
                    v_reg,
                    SingularPart::new(c.spikes.clone())?,
                    micro,
                    c.epsilon,
                    c.jmax,
                )
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Side;
    use approx::assert_abs_diff_eq;

    #[test]
    fn library_descriptor_round_trip() {
        let d = PotentialDescriptor::from_json(
            r#"{"name": "vex1", "params": {"theta": 0.5, "epsilon": 0.05}}"#,
        )
        .unwrap();
        let p = d.build().unwrap();
        assert_eq!(p.epsilon, 0.05);
        let s = serde_json::to_string(&d).unwrap();
        assert_eq!(PotentialDescriptor::from_json(&s).unwrap(), d);
    }

    #[test]
    fn custom_descriptor_with_modes() {
        let json = r#"{
          "breakpoints": [-1.0, 1.0],
          "pieces": [[], [{"kind": "const", "coeff": [2.0, 0.0]}], []],
          "spikes": [{"x": 0.0, "c": 5.0}],
          "modes": [
            {"j": 1, "breakpoints": [-1.0, 1.0], "pieces": [[], [{"kind": "const", "coeff": [0.0, -0.5]}], []]},
            {"j": -1, "breakpoints": [-1.0, 1.0], "pieces": [[], [{"kind": "const", "coeff": [0.0, 0.5]}], []]}
          ],
          "epsilon": 0.1
        }"#;
        let p = PotentialDescriptor::from_json(json)
            .unwrap()
            .build()
            .unwrap();
        assert!(p.is_real());
        assert_eq!(p.v_sing.spikes().len(), 1);
        assert_abs_diff_eq!(p.v_reg_value(0.2, Side::Interior).unwrap(), 2.0);
        // q = sin(2 pi x / eps)
        let x = 0.025;
        assert_abs_diff_eq!(p.q_exact(x, Side::Interior).unwrap(), 1.0, epsilon = 1e-14);
        assert_eq!(p.modes().len(), 2);
    }

    #[test]
    fn exp_bump_and_poly_kinds_parse() {
        let json = r#"{
          "breakpoints": [-0.5, 0.5],
          "pieces": [[], [{"kind": "exp_bump", "coeff": [1.0, 0.0], "center": 0.0, "half_width": 0.5},
                          {"kind": "poly", "coeff": [1.0, 0.0], "coeffs": [0.0, 1.0]},
                          {"kind": "cosine", "coeff": [1.0, 0.0], "freq": 3.0, "phase": 0.0}], []],
          "epsilon": 0.1
        }"#;
        let p = PotentialDescriptor::from_json(json)
            .unwrap()
            .build()
            .unwrap();
        let v = p.v_reg_value(0.1, Side::Interior).unwrap();
        let expected = (-0.01f64 / (0.25 - 0.01)).exp() + 0.1 + (0.3f64).cos();
        assert_abs_diff_eq!(v, expected, epsilon = 1e-14);
    }

    #[test]
    fn zero_mode_rejected() {
        let json = r#"{"modes": [{"j": 0, "pieces": [[{"kind": "const", "coeff": [1.0, 0.0]}]]}], "epsilon": 0.1}"#;
        assert!(PotentialDescriptor::from_json(json)
            .unwrap()
            .build()
            .is_err());
    }
}
