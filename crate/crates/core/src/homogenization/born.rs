//! First and second Born terms of the transmission coefficient for a
//! perturbation Q of a background V0.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{PanelRule, DEFAULT_ORDER};
use crate::scattering::{JostSolutions, Wave};

/// Longest panel used for non-oscillatory perturbations.
pub const BORN_PANEL: f64 = 0.05;

/// t1[Q] and t2[Q, Q] together with the size of the quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BornTerms {
    pub t1: Complex64,
    pub t2: Complex64,
    pub nodes: usize,
}

/// A perturbation with known breakpoints, vanishing outside [first, last].
pub struct Perturbation<'a> {
    pub q: &'a (dyn Fn(f64) -> Complex64 + Sync),
    pub breaks: Vec<f64>,
    /// Longest quadrature panel; at most half a period for oscillatory Q.
    pub max_panel: f64,
}

/// Evaluate t1[Q] = (1/2ik) int Q e+ e- and
/// t2[Q, Q] = (1/2ik)(1/(2ik t0)) int Q e- (e+ I_l + e- I_r),
/// I_l(z) = int_{-inf}^z Q e+ e-, I_r(z) = int_z^inf Q e+^2,
/// with e+- the distorted plane waves of the background.
pub fn born_terms(bg: &JostSolutions, pert: &Perturbation) -> Result<BornTerms> {
    let k = bg.k();
    if k == 0.0 {
        return Err(Error::InvalidInput("Born terms need k != 0".into()));
    }
    let zero = Complex64::new(0.0, 0.0);
    let mut breaks = pert.breaks.clone();
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.dedup();
    let (Some(&a), Some(&b)) = (breaks.first(), breaks.last()) else {
        return Ok(BornTerms {
            t1: zero,
            t2: zero,
            nodes: 0,
        });
    };
    breaks.extend(
        bg.propagator()
            .node_positions()
            .into_iter()
            .filter(|x| *x > a && *x < b),
    );
    breaks.sort_by(|x, y| x.partial_cmp(y).unwrap());
    breaks.dedup();
    let rule = PanelRule::new(&breaks, pert.max_panel, DEFAULT_ORDER)?;
    let nodes = rule.nodes();
    let ep = bg.eval_points(Wave::DistortedPlus, nodes)?;
    let em = bg.eval_points(Wave::DistortedMinus, nodes)?;
    let q: Vec<Complex64> = nodes.iter().map(|&x| (pert.q)(x)).collect();
    let qpm: Vec<Complex64> = (0..nodes.len()).map(|i| q[i] * ep[i].u * em[i].u).collect();
    let qpp: Vec<Complex64> = (0..nodes.len()).map(|i| q[i] * ep[i].u * ep[i].u).collect();
    let ik2 = Complex64::new(0.0, 2.0 * k);
    let t1 = rule.integrate(&qpm) / ik2;
    let il = rule.cumulative_left(&qpm);
    let ir = rule.cumulative_right(&qpp);
    let outer: Vec<Complex64> = (0..nodes.len())
        .map(|i| q[i] * em[i].u * (ep[i].u * il[i] + em[i].u * ir[i]))
        .collect();
    let t0 = bg.t()?;
    let t2 = rule.integrate(&outer) / (ik2 * ik2 * t0);
    Ok(BornTerms {
        t1,
        t2,
        nodes: nodes.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::TwoScalePotential;
    use crate::propagator::SolverOptions;

    fn free(k: f64) -> JostSolutions {
        JostSolutions::new(&TwoScalePotential::free(), k, &SolverOptions::default()).unwrap()
    }

    /// Exact transmission through a barrier of height h on [0, 1].
    fn barrier_t(h: f64, k: f64) -> Complex64 {
        let kappa = Complex64::new(k * k - h, 0.0).sqrt();
        let kk = Complex64::new(k, 0.0);
        let denom = kappa.cos()
            - Complex64::i() * (kk * kk + kappa * kappa) / (2.0 * kk * kappa) * kappa.sin();
        Complex64::from_polar(1.0, -k) / denom
    }

    #[test]
    fn zero_perturbation() {
        let z = |_: f64| Complex64::new(0.0, 0.0);
        let r = born_terms(
            &free(1.0),
            &Perturbation {
                q: &z,
                breaks: vec![0.0, 1.0],
                max_panel: 0.1,
            },
        )
        .unwrap();
        assert_eq!(r.t1, Complex64::new(0.0, 0.0));
        assert_eq!(r.t2, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn first_term_closed_form_on_free_background() {
        // e+ e- = 1 for V0 = 0, so t1[Q] = (1/2ik) int Q
        let one = |_: f64| Complex64::new(1.0, 0.0);
        let ramp = |x: f64| Complex64::new(x, 0.0);
        for k in [0.5, 1.0, 3.7] {
            let run = |q: &(dyn Fn(f64) -> Complex64 + Sync)| {
                born_terms(
                    &free(k),
                    &Perturbation {
                        q,
                        breaks: vec![0.0, 1.0],
                        max_panel: 0.1,
                    },
                )
                .unwrap()
                .t1
            };
            let ik2 = Complex64::new(0.0, 2.0 * k);
            assert!((run(&one) - 1.0 / ik2).norm() < 1e-13, "k={k}");
            assert!((run(&ramp) - 0.5 / ik2).norm() < 1e-13, "k={k}");
        }
    }

    #[test]
    fn indicator_second_term_matches_barrier_expansion() {
        let one = |_: f64| Complex64::new(1.0, 0.0);
        for k in [0.8, 2.0] {
            let r = born_terms(
                &free(k),
                &Perturbation {
                    q: &one,
                    breaks: vec![0.0, 1.0],
                    max_panel: 0.1,
                },
            )
            .unwrap();
            let h = 1e-3;
            // even part of t(h) isolates the quadratic term up to O(h^4)
            let t2 = (barrier_t(h, k) + barrier_t(-h, k) - 2.0) / (2.0 * h * h);
            let t1 = (barrier_t(h, k) - barrier_t(-h, k)) / (2.0 * h);
            assert!((r.t1 - t1).norm() < 1e-6, "k={k}: {} vs {t1}", r.t1);
            assert!((r.t2 - t2).norm() < 1e-5, "k={k}: {} vs {t2}", r.t2);
        }
    }

    #[test]
    fn delta_background_second_term_matches_direct_expansion() {
        use crate::potential::{library, Piece, PiecewiseSmoothFn, Shape};
        use std::collections::BTreeMap;
        // background single spike, perturbation a smooth bump added to V_reg
        let k = 1.7;
        let mut params = BTreeMap::new();
        params.insert("c".to_string(), 3.0);
        params.insert("x0".to_string(), 0.2);
        let bg_pot = library("single_delta", &params).unwrap();
        let bg = JostSolutions::new(&bg_pot, k, &SolverOptions::default()).unwrap();
        let shape = Shape::ExpBump {
            center: 0.0,
            half_width: 1.0,
        };
        let bump_shape = shape.clone();
        let bump = move |x: f64| Complex64::new(bump_shape.value(x), 0.0);
        let r = born_terms(
            &bg,
            &Perturbation {
                q: &bump,
                breaks: vec![-1.0, 1.0],
                max_panel: 0.05,
            },
        )
        .unwrap();
        let opts = SolverOptions::with_tolerances(1e-12, 1e-14);
        let t_of = |h: f64| {
            let mut p = bg_pot.clone();
            p.v_reg =
                PiecewiseSmoothFn::windowed(-1.0, 1.0, Piece::single(h, shape.clone())).unwrap();
            crate::scattering::scattering_coefficients(&p, k, &opts)
                .unwrap()
                .t
        };
        let h = 1e-2;
        let (tp, tm, t0) = (t_of(h), t_of(-h), bg.t().unwrap());
        let t1 = (tp - tm) / (2.0 * h);
        let t2 = (tp + tm - 2.0 * t0) / (2.0 * h * h);
        assert!((r.t1 - t1).norm() < 1e-4, "{} vs {t1}", r.t1);
        assert!((r.t2 - t2).norm() < 1e-3, "{} vs {t2}", r.t2);
    }
}
