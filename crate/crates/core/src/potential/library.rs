//! Named example potentials.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use super::{
    MicroTerm, PeriodicProfile, Piece, PiecewiseSmoothFn, Shape, SingularPart, Spike, Term,
    TwoScalePotential, DEFAULT_J_MAX,
};
use crate::error::{Error, Result};

pub const LIBRARY_NAMES: &[&str] = &[
    "free",
    "single_delta",
    "fig1_left",
    "fig1_center",
    "fig1_right",
    "fig2",
    "vex1",
    "vex2",
];

/// Strength of each of the three spikes.
const SPIKE_STRENGTH: f64 = 40.0;
/// Spike locations shared by the figure 1 and figure 2 potentials.
const SPIKE_LOCATIONS: [f64; 3] = [0.0, 0.5, 1.0];
/// Amplitude and half-width of the microstructure envelope in figures 1 and 2.
const ENVELOPE_AMPLITUDE: f64 = 40.0;
const ENVELOPE_HALF_WIDTH: f64 = 2.0 / 3.0;

struct Params<'a> {
    name: &'a str,
    map: &'a BTreeMap<String, f64>,
    allowed: &'a [&'a str],
}

impl Params<'_> {
    fn check(&self) -> Result<()> {
        for key in self.map.keys() {
            if !self.allowed.contains(&key.as_str()) {
                return Err(Error::ParamOutOfRange(format!(
                    "`{}` does not take parameter `{key}` (allowed: {})",
                    self.name,
                    self.allowed.join(", ")
                )));
            }
        }
        Ok(())
    }

    fn get(&self, key: &str, default: f64) -> Result<f64> {
        let v = self.map.get(key).copied().unwrap_or(default);
        if !v.is_finite() {
            return Err(Error::ParamOutOfRange(format!("{key} = {v} is not finite")));
        }
        Ok(v)
    }

    fn positive(&self, key: &str, default: f64) -> Result<f64> {
        let v = self.get(key, default)?;
        if v <= 0.0 {
            return Err(Error::ParamOutOfRange(format!(
                "{key} must be positive, got {v}"
            )));
        }
        Ok(v)
    }

    fn j_max(&self) -> Result<usize> {
        let v = self.get("jmax", DEFAULT_J_MAX as f64)?;
        if v < 1.0 || v.fract() != 0.0 || v > 100_000.0 {
            return Err(Error::ParamOutOfRange(format!(
                "jmax must be an integer in [1, 100000], got {v}"
            )));
        }
        Ok(v as usize)
    }
}

fn three_spikes() -> SingularPart {
    SingularPart::new(
        SPIKE_LOCATIONS
            .iter()
            .map(|&x| Spike {
                x,
                c: SPIKE_STRENGTH,
            })
            .collect(),
    )
    .expect("static spike data is valid")
}

/// 40 (delta_rho(x) + delta_rho(x - 0.5) + delta_rho(x - 1)),
/// delta_rho(x) = exp(-x^2/rho^2) / (rho sqrt(pi)).
fn smoothed_spikes(rho: f64) -> PiecewiseSmoothFn {
    let amp = SPIKE_STRENGTH / (rho * PI.sqrt());
    PiecewiseSmoothFn::smooth(Piece {
        terms: SPIKE_LOCATIONS
            .iter()
            .map(|&c| {
                Term::real(
                    amp,
                    Shape::Gaussian {
                        center: c,
                        width: rho,
                    },
                )
            })
            .collect(),
    })
}

fn flat_envelope(a: f64, amp: f64) -> PiecewiseSmoothFn {
    PiecewiseSmoothFn::windowed(-a, a, Piece::single(amp, Shape::Const))
        .expect("static envelope is valid")
}

fn bump_envelope(a: f64, amp: f64) -> PiecewiseSmoothFn {
    PiecewiseSmoothFn::windowed(
        -a,
        a,
        Piece::single(
            amp,
            Shape::ExpBump {
                center: 0.0,
                half_width: a,
            },
        ),
    )
    .expect("static envelope is valid")
}

/// Build a library potential by name.
///
/// Every entry accepts `epsilon` (default 0.1) and `jmax` (default 64).
/// Extra parameters: `single_delta` takes `c` (default 40) and `x0`
/// (default 0); `fig2` takes `rho` (default 0.1); `vex1` and `vex2` take
/// `theta` (default 0).
pub fn library(name: &str, params: &BTreeMap<String, f64>) -> Result<TwoScalePotential> {
    let allowed: &[&str] = match name {
        "free" | "fig1_left" | "fig1_center" | "fig1_right" => &["epsilon", "jmax"],
        "single_delta" => &["epsilon", "jmax", "c", "x0"],
        "fig2" => &["epsilon", "jmax", "rho"],
        "vex1" | "vex2" => &["epsilon", "jmax", "theta"],
        other => return Err(Error::UnknownPotential(other.to_string())),
    };
    let p = Params {
        name,
        map: params,
        allowed,
    };
    p.check()?;
    let eps = p.positive("epsilon", 0.1)?;
    let j_max = p.j_max()?;
    let sine = || PeriodicProfile::Sine { phase: 0.0 };
    let (v_reg, v_sing, micro) = match name {
        "free" => (PiecewiseSmoothFn::zero(), SingularPart::empty(), Vec::new()),
        "single_delta" => {
            let c = p.get("c", SPIKE_STRENGTH)?;
            let x0 = p.get("x0", 0.0)?;
            (
                PiecewiseSmoothFn::zero(),
                SingularPart::new(vec![Spike { x: x0, c }])?,
                Vec::new(),
            )
        }
        "fig1_left" => (
            PiecewiseSmoothFn::zero(),
            three_spikes(),
            vec![MicroTerm {
                envelope: flat_envelope(ENVELOPE_HALF_WIDTH, ENVELOPE_AMPLITUDE),
                profile: sine(),
            }],
        ),
        "fig1_center" => (
            PiecewiseSmoothFn::zero(),
            three_spikes(),
            vec![MicroTerm {
                envelope: bump_envelope(ENVELOPE_HALF_WIDTH, ENVELOPE_AMPLITUDE),
                profile: sine(),
            }],
        ),
        "fig1_right" | "fig2" => {
            let rho = if name == "fig2" {
                p.positive("rho", 0.1)?
            } else {
                0.1
            };
            (
                smoothed_spikes(rho),
                SingularPart::empty(),
                vec![MicroTerm {
                    envelope: bump_envelope(ENVELOPE_HALF_WIDTH, ENVELOPE_AMPLITUDE),
                    profile: sine(),
                }],
            )
        }
        "vex1" => {
            let theta = p.get("theta", 0.0)?;
            (
                PiecewiseSmoothFn::zero(),
                SingularPart::empty(),
                vec![MicroTerm {
                    envelope: flat_envelope(1.0, 1.0),
                    profile: PeriodicProfile::Cosine { phase: theta },
                }],
            )
        }
        "vex2" => {
            let theta = p.get("theta", 0.0)?;
            (
                PiecewiseSmoothFn::zero(),
                SingularPart::empty(),
                vec![MicroTerm {
                    envelope: bump_envelope(1.0, 1.0),
                    profile: PeriodicProfile::Square { shift: theta },
                }],
            )
        }
        _ => unreachable!(),
    };
    let mut full_name = name.to_string();
    if name == "fig2" {
        full_name = format!("fig2(rho={})", p.positive("rho", 0.1)?);
    }
    if matches!(name, "vex1" | "vex2") {
        full_name = format!("{name}(theta={})", p.get("theta", 0.0)?);
    }
    TwoScalePotential::new(full_name, v_reg, v_sing, micro, eps, j_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Side;
    use approx::assert_abs_diff_eq;

    fn none() -> BTreeMap<String, f64> {
        BTreeMap::new()
    }

    #[test]
    fn free_is_zero() {
        let p = library("free", &none()).unwrap();
        assert!(p.v_reg.is_identically_zero());
        assert!(p.v_sing.is_empty());
        assert!(p.micro.is_empty());
        assert_eq!(p.support().unwrap(), None);
    }

    #[test]
    fn fig1_left_spikes_and_envelope() {
        let p = library("fig1_left", &none()).unwrap();
        let s: Vec<(f64, f64)> = p.v_sing.spikes().iter().map(|s| (s.x, s.c)).collect();
        assert_eq!(s, vec![(0.0, 40.0), (0.5, 40.0), (1.0, 40.0)]);
        let env = &p.micro[0].envelope;
        assert_eq!(env.evaluate(0.3, Side::Interior).unwrap().re, 40.0);
        assert_eq!(env.jump(2.0 / 3.0, 0).unwrap().re, -40.0);
    }

    #[test]
    fn fig2_smoothed_deltas() {
        let mut m = none();
        m.insert("rho".into(), 0.1);
        let p = library("fig2", &m).unwrap();
        assert!(p.v_sing.is_empty());
        let v = p.v_reg.evaluate(0.5, Side::Interior).unwrap().re;
        // peak of delta_rho plus the tails of its neighbours
        let amp = 40.0 / (0.1 * PI.sqrt());
        let expected = amp * (1.0 + 2.0 * (-25.0f64).exp());
        assert_abs_diff_eq!(v, expected, epsilon = 1e-9);
        // each smoothed delta carries unit mass times 40
        let n = 20000;
        let (a, b) = (-1.0, 2.0);
        let h = (b - a) / n as f64;
        let mass: f64 = (0..n)
            .map(|i| {
                p.v_reg
                    .evaluate(a + (i as f64 + 0.5) * h, Side::Interior)
                    .unwrap()
                    .re
                    * h
            })
            .sum();
        assert_abs_diff_eq!(mass, 120.0, epsilon = 1e-8);
    }

    #[test]
    fn unknown_name_and_bad_params() {
        assert!(matches!(
            library("nope", &none()),
            Err(Error::UnknownPotential(_))
        ));
        let mut m = none();
        m.insert("epsilon".into(), -1.0);
        assert!(matches!(
            library("vex1", &m),
            Err(Error::ParamOutOfRange(_))
        ));
        let mut m = none();
        m.insert("rho".into(), 0.1);
        assert!(matches!(
            library("vex1", &m),
            Err(Error::ParamOutOfRange(_))
        ));
    }

    #[test]
    fn vex1_is_odd_at_half_pi() {
        let mut m = none();
        m.insert("theta".into(), PI / 2.0);
        m.insert("epsilon".into(), 0.07);
        let p = library("vex1", &m).unwrap();
        for i in 0..50 {
            let x = 0.019 * i as f64 + 0.001;
            let a = p.sample_microstructure(x, Side::Interior).unwrap().value;
            let b = p.sample_microstructure(-x, Side::Interior).unwrap().value;
            // cos(2 pi x/eps + pi/2) = -sin(2 pi x/eps) is odd in x
            assert_abs_diff_eq!(a, -b, epsilon = 1e-12);
        }
    }
}
