//! Numerical estimate of the weighted norm
//! |||Q||| = || <D>^{-1} <x>^sigma Q <x>^sigma <D>^{-1} ||_{L^2 -> L^2},
//! with <D> = (1 - d^2/dx^2)^{1/2} and <x> = (1 + x^2)^{1/2}.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{Side, TwoScalePotential};
use crate::quadrature::gauss_legendre;

/// Gauss-Legendre points per sub-cell in the cell averages of the weight.
const CELL_ORDER: usize = 4;

/// Settings of the periodic-box discretization and of the power iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NormOptions {
    /// Weight exponent; must exceed 4.
    pub sigma: f64,
    /// The box is [-R, R] with R this many times the support radius.
    pub box_factor: f64,
    /// Number of grid points (a power of two is fastest).
    pub points: usize,
    /// Relative change of the norm estimate at which iteration stops.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NormOptions {
    fn default() -> Self {
        NormOptions {
            sigma: 4.5,
            box_factor: 8.0,
            points: 1 << 14,
            tol: 1e-10,
            max_iter: 20_000,
        }
    }
}

/// Result of [`q_norm_estimate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub value: f64,
    /// |value - value on a grid with half the points|.
    pub refinement_delta: f64,
    pub iterations: usize,
    pub points: usize,
    pub box_radius: f64,
    pub sigma: f64,
}

struct Discretization {
    n: usize,
    weight: Vec<f64>,
    multiplier: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Discretization {
    /// The weight <x>^{2 sigma} Q is sampled at the grid points, except in
    /// cells containing a jump of Q, where its cell average is used.
    fn new(q: &dyn Fn(f64) -> f64, breaks: &[f64], radius: f64, n: usize, sigma: f64) -> Self {
        let h = 2.0 * radius / n as f64;
        let (gx, gw) = gauss_legendre(CELL_ORDER);
        let w = |x: f64| (1.0 + x * x).powf(sigma) * q(x);
        let weight = (0..n)
            .map(|i| {
                let lo = -radius + h * (i as f64 - 0.5);
                let hi = lo + h;
                let first = breaks.partition_point(|b| *b <= lo);
                let last = breaks.partition_point(|b| *b < hi);
                if first == last {
                    return w(lo + 0.5 * h);
                }
                let mut edges = Vec::with_capacity(2 + last - first);
                edges.push(lo);
                edges.extend_from_slice(&breaks[first..last]);
                edges.push(hi);
                let mut sum = 0.0;
                for e in edges.windows(2) {
                    let (c, r) = (0.5 * (e[0] + e[1]), 0.5 * (e[1] - e[0]));
                    sum += r * gx
                        .iter()
                        .zip(&gw)
                        .map(|(x, wt)| wt * w(c + r * x))
                        .sum::<f64>();
                }
                sum / h
            })
            .collect();
        let multiplier = (0..n)
            .map(|m| {
                let m = if m <= n / 2 {
                    m as f64
                } else {
                    m as f64 - n as f64
                };
                let xi = std::f64::consts::PI * m / radius;
                1.0 / (1.0 + xi * xi).sqrt()
            })
            .collect();
        let mut planner = FftPlanner::new();
        Discretization {
            n,
            weight,
            multiplier,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    fn smooth(&self, v: &mut [Complex64]) {
        self.forward.process(v);
        let scale = 1.0 / self.n as f64;
        for (a, m) in v.iter_mut().zip(&self.multiplier) {
            *a *= m * scale;
        }
        self.inverse.process(v);
    }

    /// v <- <D>^{-1} w <D>^{-1} v.
    fn apply(&self, v: &mut [Complex64]) {
        self.smooth(v);
        for (a, w) in v.iter_mut().zip(&self.weight) {
            *a *= w;
        }
        self.smooth(v);
    }

    /// Largest |eigenvalue| of the self-adjoint discretized operator by power
    /// iteration on its square.
    fn norm(&self, tol: f64, max_iter: usize) -> Result<(f64, usize)> {
        if self.weight.iter().all(|w| *w == 0.0) {
            return Ok((0.0, 0));
        }
        let h = 1.0 / self.n as f64;
        let mut v: Vec<Complex64> = (0..self.n)
            .map(|i| {
                let s = 2.0 * (i as f64 * h) - 1.0;
                Complex64::new((-4.0 * s * s).exp() * (1.0 + s), 0.0)
            })
            .collect();
        let normalize = |v: &mut [Complex64]| -> f64 {
            let n = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            if n > 0.0 {
                for a in v.iter_mut() {
                    *a /= n;
                }
            }
            n
        };
        normalize(&mut v);
        let mut prev = 0.0;
        for it in 1..=max_iter {
            self.apply(&mut v);
            self.apply(&mut v);
            let lambda = normalize(&mut v);
            if !lambda.is_finite() {
                return Err(Error::NoConvergence(
                    "power iteration produced a non-finite value".into(),
                ));
            }
            if lambda == 0.0 {
                return Ok((0.0, it));
            }
            if (lambda - prev).abs() <= tol * lambda {
                return Ok((lambda.sqrt(), it));
            }
            prev = lambda;
        }
        Err(Error::NoConvergence(format!(
            "power iteration did not settle within {max_iter} steps"
        )))
    }
}

/// Estimate |||Q||| for a Q supported in [-support_radius, support_radius]
/// whose discontinuities are listed in `breaks`.
pub fn q_norm_estimate(
    q: &dyn Fn(f64) -> f64,
    support_radius: f64,
    breaks: &[f64],
    opts: &NormOptions,
) -> Result<NormEstimate> {
    if !(opts.sigma > 4.0) {
        return Err(Error::ParamOutOfRange(format!(
            "sigma must exceed 4, got {}",
            opts.sigma
        )));
    }
    if !(support_radius > 0.0) || !support_radius.is_finite() {
        return Err(Error::InvalidInput(
            "support radius must be positive".into(),
        ));
    }
    if opts.points < 16 || !(opts.box_factor > 1.0) {
        return Err(Error::InvalidInput(
            "need at least 16 points and a box larger than the support".into(),
        ));
    }
    let radius = opts.box_factor * support_radius;
    let mut breaks = breaks.to_vec();
    breaks.retain(|b| b.is_finite());
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.dedup();
    let fine = Discretization::new(q, &breaks, radius, opts.points, opts.sigma);
    let (value, iterations) = fine.norm(opts.tol, opts.max_iter)?;
    let coarse = Discretization::new(q, &breaks, radius, opts.points / 2, opts.sigma);
    let (coarse_value, _) = coarse.norm(opts.tol, opts.max_iter)?;
    Ok(NormEstimate {
        value,
        refinement_delta: (value - coarse_value).abs(),
        iterations,
        points: opts.points,
        box_radius: radius,
        sigma: opts.sigma,
    })
}

/// |||q_eps||| for the microstructure of a potential at period eps.
pub fn microstructure_norm(
    p: &TwoScalePotential,
    eps: f64,
    opts: &NormOptions,
) -> Result<NormEstimate> {
    let pe = p.with_epsilon(eps)?;
    let mut r: f64 = 0.0;
    for m in &pe.micro {
        if let Some((a, b)) = m.envelope.support_or_empty()? {
            r = r.max(a.abs()).max(b.abs());
        }
    }
    if r == 0.0 {
        return Ok(NormEstimate {
            value: 0.0,
            refinement_delta: 0.0,
            iterations: 0,
            points: opts.points,
            box_radius: 0.0,
            sigma: opts.sigma,
        });
    }
    let mut breaks = pe.breakpoints();
    breaks.extend(pe.profile_jump_locations()?);
    let q = |x: f64| pe.q_exact(x, Side::Right).unwrap_or(0.0);
    q_norm_estimate(&q, r, &breaks, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss(x: f64) -> f64 {
        (-4.0 * x * x).exp()
    }

    #[test]
    fn zero_has_zero_norm() {
        let z = |_: f64| 0.0;
        let r = q_norm_estimate(&z, 1.0, &[], &NormOptions::default()).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn homogeneous_of_degree_one() {
        let opts = NormOptions {
            points: 1 << 12,
            ..Default::default()
        };
        let a = q_norm_estimate(&gauss, 2.0, &[], &opts).unwrap();
        let twice = |x: f64| 2.0 * gauss(x);
        let b = q_norm_estimate(&twice, 2.0, &[], &opts).unwrap();
        assert!((b.value - 2.0 * a.value).abs() < 1e-7 * a.value);
        let neg = |x: f64| -gauss(x);
        let c = q_norm_estimate(&neg, 2.0, &[], &opts).unwrap();
        assert!((c.value - a.value).abs() < 1e-7 * a.value);
    }

    #[test]
    fn bounded_by_weighted_sup_norm() {
        // ||<D>^{-1}|| = 1, so |||Q||| <= sup <x>^{2 sigma} |Q|
        let opts = NormOptions {
            points: 1 << 12,
            ..Default::default()
        };
        let r = q_norm_estimate(&gauss, 2.0, &[], &opts).unwrap();
        let sup = (0..4000)
            .map(|i| {
                let x = -2.0 + 4.0 * i as f64 / 4000.0;
                (1.0 + x * x).powf(4.5) * gauss(x)
            })
            .fold(0.0, f64::max);
        assert!(r.value > 0.0 && r.value <= sup * (1.0 + 1e-9));
        assert!(r.refinement_delta < 1e-6 * r.value);
    }

    #[test]
    fn rejects_small_sigma() {
        let opts = NormOptions {
            sigma: 3.0,
            ..Default::default()
        };
        assert!(matches!(
            q_norm_estimate(&gauss, 1.0, &[], &opts),
            Err(Error::ParamOutOfRange(_))
        ));
    }

    #[test]
    fn square_wave_estimate_is_resolved_and_first_order() {
        use crate::potential::library;
        use std::collections::BTreeMap;
        let p = library("vex2", &BTreeMap::new()).unwrap();
        let opts = NormOptions::default();
        let a = microstructure_norm(&p, 0.04, &opts).unwrap();
        let b = microstructure_norm(&p, 0.02, &opts).unwrap();
        assert!(a.refinement_delta < 3e-2 * a.value);
        assert!(b.refinement_delta < 3e-2 * b.value);
        let slope = (a.value / b.value).ln() / 2f64.ln();
        assert!((slope - 1.0).abs() < 0.1, "{slope}");
    }
}
