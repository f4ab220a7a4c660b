//! One-periodic, mean-zero profiles in the fast variable y.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::piecewise::Side;
use crate::error::{Error, Result};

/// Points of y closer than this to a jump are treated as sitting on it.
const JUMP_TOL: f64 = 1e-10;

/// A 1-periodic profile with zero mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PeriodicProfile {
    /// sin(2 pi y + phase)
    Sine { phase: f64 },
    /// cos(2 pi y + phase)
    Cosine { phase: f64 },
    /// h(y + shift) with h = -1 on (0, 1/2] and +1 on (1/2, 1], extended periodically.
    Square { shift: f64 },
    /// Explicit finite Fourier series sum_j c_j exp(2 pi i j y).
    Fourier { coeffs: Vec<(i64, Complex64)> },
}

impl PeriodicProfile {
    pub fn validate(&self) -> Result<()> {
        match self {
            PeriodicProfile::Sine { phase } | PeriodicProfile::Cosine { phase } => {
                if !phase.is_finite() {
                    return Err(Error::InvalidInput("profile phase must be finite".into()));
                }
            }
            PeriodicProfile::Square { shift } => {
                if !shift.is_finite() {
                    return Err(Error::InvalidInput("profile shift must be finite".into()));
                }
            }
            PeriodicProfile::Fourier { coeffs } => {
                if coeffs.iter().any(|(j, _)| *j == 0) {
                    return Err(Error::InvalidInput(
                        "a j = 0 mode violates the mean-zero condition".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Fourier coefficient of index `j`.
    pub fn coefficient(&self, j: i64) -> Complex64 {
        let zero = Complex64::new(0.0, 0.0);
        let i = Complex64::i();
        match self {
            PeriodicProfile::Sine { phase } => match j {
                1 => Complex64::from_polar(1.0, *phase) / (2.0 * i),
                -1 => -Complex64::from_polar(1.0, -*phase) / (2.0 * i),
                _ => zero,
            },
            PeriodicProfile::Cosine { phase } => match j {
                1 => Complex64::from_polar(0.5, *phase),
                -1 => Complex64::from_polar(0.5, -*phase),
                _ => zero,
            },
            PeriodicProfile::Square { shift } => {
                if j % 2 == 0 {
                    zero
                } else {
                    let base = 2.0 * i / (PI * j as f64);
                    base * Complex64::from_polar(1.0, 2.0 * PI * j as f64 * shift)
                }
            }
            PeriodicProfile::Fourier { coeffs } => coeffs
                .iter()
                .filter(|(m, _)| *m == j)
                .map(|(_, c)| *c)
                .sum(),
        }
    }

    /// Nonzero coefficients with `0 < |j| <= j_max`, ordered by j.
    pub fn modes(&self, j_max: usize) -> Vec<(i64, Complex64)> {
        let jm = j_max as i64;
        let candidates: Vec<i64> = match self {
            PeriodicProfile::Fourier { coeffs } => {
                let mut js: Vec<i64> = coeffs.iter().map(|(j, _)| *j).collect();
                js.sort_unstable();
                js.dedup();
                js
            }
            PeriodicProfile::Sine { .. } | PeriodicProfile::Cosine { .. } => vec![-1, 1],
            PeriodicProfile::Square { .. } => (-jm..=jm).collect(),
        };
        candidates
            .into_iter()
            .filter(|j| *j != 0 && j.abs() <= jm)
            .map(|j| (j, self.coefficient(j)))
            .filter(|(_, c)| c.norm() > 0.0)
            .collect()
    }

    /// Largest |j| carrying a nonzero coefficient, or `None` when the series is infinite.
    pub fn bandwidth(&self) -> Option<usize> {
        match self {
            PeriodicProfile::Sine { .. } | PeriodicProfile::Cosine { .. } => Some(1),
            PeriodicProfile::Square { .. } => None,
            PeriodicProfile::Fourier { coeffs } => Some(
                coeffs
                    .iter()
                    .map(|(j, _)| j.unsigned_abs() as usize)
                    .max()
                    .unwrap_or(0),
            ),
        }
    }

    /// Estimate of sum over |j| > j_max of |c_j| / |j|^power.
    pub fn tail(&self, j_max: usize, power: f64) -> f64 {
        match self {
            PeriodicProfile::Square { .. } => {
                // |c_j| = 2/(pi |j|) on odd j, both signs of j.
                let mut s = 0.0;
                let start = if j_max.is_multiple_of(2) {
                    j_max + 1
                } else {
                    j_max + 2
                };
                let stop = start + 20_000;
                let mut j = start;
                while j < stop {
                    s += (j as f64).powf(-1.0 - power);
                    j += 2;
                }
                // remaining odd terms approximated by half the integral
                let rest = if power > 0.0 {
                    0.5 * (stop as f64).powf(-power) / power
                } else {
                    f64::INFINITY
                };
                2.0 * (2.0 / PI) * (s + rest)
            }
            _ => self
                .modes(usize::MAX / 4)
                .iter()
                .filter(|(j, _)| j.unsigned_abs() as usize > j_max)
                .map(|(j, c)| c.norm() / (j.abs() as f64).powf(power))
                .sum(),
        }
    }

    /// y-values in [0, 1) where the profile jumps.
    pub fn jump_points(&self) -> Vec<f64> {
        match self {
            PeriodicProfile::Square { shift } => {
                let a = (-shift).rem_euclid(1.0);
                let b = (0.5 - shift).rem_euclid(1.0);
                let mut v = vec![a, b];
                v.sort_by(|x, y| x.partial_cmp(y).unwrap());
                v
            }
            _ => Vec::new(),
        }
    }

    pub fn is_real(&self) -> bool {
        match self {
            PeriodicProfile::Fourier { coeffs } => {
                let c = |j: i64| -> Complex64 {
                    coeffs
                        .iter()
                        .filter(|(m, _)| *m == j)
                        .map(|(_, v)| *v)
                        .sum()
                };
                coeffs
                    .iter()
                    .all(|(j, _)| (c(*j) - c(-*j).conj()).norm() <= 1e-14 * (1.0 + c(*j).norm()))
            }
            _ => true,
        }
    }

    /// Exact profile value at y; one-sided at jumps.
    pub fn value(&self, y: f64, side: Side) -> Result<Complex64> {
        let two_pi = 2.0 * PI;
        match self {
            PeriodicProfile::Sine { phase } => Ok(Complex64::new(
                (two_pi * y.rem_euclid(1.0) + phase).sin(),
                0.0,
            )),
            PeriodicProfile::Cosine { phase } => Ok(Complex64::new(
                (two_pi * y.rem_euclid(1.0) + phase).cos(),
                0.0,
            )),
            PeriodicProfile::Square { shift } => {
                let z = (y + shift).rem_euclid(1.0);
                let v = if z < JUMP_TOL || 1.0 - z < JUMP_TOL {
                    match side {
                        Side::Left => 1.0,
                        Side::Right => -1.0,
                        Side::Interior => return Err(Error::SideRequired { x: y }),
                    }
                } else if (z - 0.5).abs() < JUMP_TOL {
                    match side {
                        Side::Left => -1.0,
                        Side::Right => 1.0,
                        Side::Interior => return Err(Error::SideRequired { x: y }),
                    }
                } else if z < 0.5 {
                    -1.0
                } else {
                    1.0
                };
                Ok(Complex64::new(v, 0.0))
            }
            PeriodicProfile::Fourier { coeffs } => Ok(coeffs
                .iter()
                .map(|(j, c)| {
                    c * Complex64::from_polar(1.0, two_pi * *j as f64 * y.rem_euclid(1.0))
                })
                .sum()),
        }
    }

    /// Truncated Fourier sum at y.
    pub fn partial_sum(&self, y: f64, j_max: usize) -> Complex64 {
        let yr = y.rem_euclid(1.0);
        self.modes(j_max)
            .iter()
            .map(|(j, c)| c * Complex64::from_polar(1.0, 2.0 * PI * *j as f64 * yr))
            .sum()
    }

    /// Distance in y from `y` to the nearest jump (infinite for continuous profiles).
    pub fn distance_to_jump(&self, y: f64) -> f64 {
        self.jump_points()
            .iter()
            .map(|&d| {
                let r = (y - d).rem_euclid(1.0);
                r.min(1.0 - r)
            })
            .fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn square_wave_one_sided_at_half() {
        let h = PeriodicProfile::Square { shift: 0.0 };
        assert_eq!(h.value(0.5, Side::Left).unwrap().re, -1.0);
        assert_eq!(h.value(0.5, Side::Right).unwrap().re, 1.0);
        assert!(h.value(0.5, Side::Interior).is_err());
        assert_eq!(h.value(0.25, Side::Interior).unwrap().re, -1.0);
        assert_eq!(h.value(0.75, Side::Interior).unwrap().re, 1.0);
    }

    #[test]
    fn square_wave_coefficients_match_quadrature() {
        for shift in [0.0, 0.13, 0.5] {
            let h = PeriodicProfile::Square { shift };
            for j in -5i64..=5 {
                if j == 0 {
                    continue;
                }
                // midpoint rule on a fine grid that avoids the jumps
                let n = 200_000;
                let mut s = Complex64::new(0.0, 0.0);
                for m in 0..n {
                    let y = (m as f64 + 0.5) / n as f64;
                    let v = h.value(y, Side::Right).unwrap();
                    s += v * Complex64::from_polar(1.0, -2.0 * PI * j as f64 * y);
                }
                s /= n as f64;
                assert!((s - h.coefficient(j)).norm() < 1e-4, "shift={shift} j={j}");
            }
        }
    }

    #[test]
    fn sine_and_cosine_coefficients() {
        let s = PeriodicProfile::Sine { phase: 0.3 };
        let c = PeriodicProfile::Cosine { phase: 0.3 };
        for y in [0.0, 0.1, 0.77] {
            assert_abs_diff_eq!(
                s.partial_sum(y, 1).re,
                s.value(y, Side::Interior).unwrap().re,
                epsilon = 1e-14
            );
            assert_abs_diff_eq!(
                c.partial_sum(y, 1).re,
                c.value(y, Side::Interior).unwrap().re,
                epsilon = 1e-14
            );
            assert!(s.partial_sum(y, 1).im.abs() < 1e-15);
        }
    }

    #[test]
    fn square_wave_tail_decreases() {
        let h = PeriodicProfile::Square { shift: 0.0 };
        let t1 = h.tail(64, 1.0);
        let t2 = h.tail(64, 2.0);
        assert!(t1 > t2);
        // crude closed-form estimate (2/pi) * J^-p / p for the odd-only sum of both signs
        assert!((t1 / ((2.0 / PI) / 64.0) - 1.0).abs() < 0.1);
    }

    #[test]
    fn zero_mode_rejected() {
        let p = PeriodicProfile::Fourier {
            coeffs: vec![(0, Complex64::new(1.0, 0.0))],
        };
        assert!(p.validate().is_err());
    }
}
