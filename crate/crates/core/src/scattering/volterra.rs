//! Integral-equation route to the Jost solution f+ = m+ e^{ikx}.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::potential::{Side, TwoScalePotential};
use crate::quadrature::{PanelRule, DEFAULT_ORDER};

/// Picard iterates are stopped once successive ones differ by less than this.
pub const PICARD_TOL: f64 = 1e-10;
/// Iteration cap for the Picard scheme.
pub const PICARD_MAX_ITER: usize = 500;

/// m+ sampled on a quadrature grid.
#[derive(Debug, Clone)]
pub struct VolterraJost {
    pub k: f64,
    pub nodes: Vec<f64>,
    pub m_plus: Vec<Complex64>,
    /// First Picard iterate minus one: the Born approximation of m+ - 1.
    pub born: Vec<Complex64>,
    pub iterations: usize,
    /// int_x^inf (1 + |s|) |W(s)| ds at each node.
    pub weighted_tail: Vec<f64>,
}

impl VolterraJost {
    /// Right-hand side of the uniform bound on |m+ - 1| at node i.
    pub fn bound(&self, i: usize) -> f64 {
        let x = self.nodes[i];
        (1.0 + (-x).max(0.0)) / (1.0 + self.k.abs()) * self.weighted_tail[i]
    }
}

/// Solve m+(x) = 1 + int_x^inf D_k(z - x) W(z) m+(z) dz,
/// D_k(s) = (e^{2iks} - 1)/(2ik) (and D_0(s) = s), by Picard iteration.
///
/// Only potentials without delta spikes are accepted.
pub fn jost_volterra_oracle(p: &TwoScalePotential, k: f64, max_panel: f64) -> Result<VolterraJost> {
    if !p.v_sing.is_empty() {
        return Err(Error::InvalidInput(
            "the integral-equation oracle takes spike-free potentials".into(),
        ));
    }
    let Some((lo, hi)) = p.support()? else {
        return Ok(VolterraJost {
            k,
            nodes: Vec::new(),
            m_plus: Vec::new(),
            born: Vec::new(),
            iterations: 0,
            weighted_tail: Vec::new(),
        });
    };
    let mut breaks: Vec<f64> = p
        .breakpoints()
        .into_iter()
        .filter(|x| *x > lo && *x < hi)
        .collect();
    breaks.extend(p.profile_jump_locations()?);
    breaks.push(lo);
    breaks.push(hi);
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.dedup();
    let panel = if p.has_microstructure() {
        max_panel.min(0.5 * p.epsilon)
    } else {
        max_panel
    };
    let rule = PanelRule::new(&breaks, panel, DEFAULT_ORDER)?;
    let nodes = rule.nodes().to_vec();
    let w: Vec<f64> = nodes
        .iter()
        .map(|&x| p.smooth_value(x, Side::Interior))
        .collect::<Result<_>>()?;
    let abs_w: Vec<Complex64> = nodes
        .iter()
        .zip(&w)
        .map(|(x, v)| Complex64::new((1.0 + x.abs()) * v.abs(), 0.0))
        .collect();
    let weighted_tail: Vec<f64> = rule.cumulative_right(&abs_w).iter().map(|c| c.re).collect();

    let apply = |m: &[Complex64]| -> Vec<Complex64> {
        let wm: Vec<Complex64> = m.iter().zip(&w).map(|(m, w)| m * w).collect();
        let i0 = rule.cumulative_right(&wm);
        if k == 0.0 {
            let zwm: Vec<Complex64> = wm.iter().zip(&nodes).map(|(v, z)| v * z).collect();
            let i1 = rule.cumulative_right(&zwm);
            return nodes
                .iter()
                .zip(i0.iter().zip(&i1))
                .map(|(x, (a, b))| 1.0 + b - x * a)
                .collect();
        }
        let ewm: Vec<Complex64> = wm
            .iter()
            .zip(&nodes)
            .map(|(v, z)| v * Complex64::from_polar(1.0, 2.0 * k * z))
            .collect();
        let i1 = rule.cumulative_right(&ewm);
        let ik2 = Complex64::new(0.0, 2.0 * k);
        nodes
            .iter()
            .zip(i0.iter().zip(&i1))
            .map(|(x, (a, b))| 1.0 + (Complex64::from_polar(1.0, -2.0 * k * x) * b - a) / ik2)
            .collect()
    };

    let one = vec![Complex64::new(1.0, 0.0); nodes.len()];
    let first = apply(&one);
    let born: Vec<Complex64> = first.iter().map(|m| m - 1.0).collect();
    let mut m = first;
    let mut iterations = 1;
    loop {
        let next = apply(&m);
        let diff = next
            .iter()
            .zip(&m)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        m = next;
        iterations += 1;
        if diff < PICARD_TOL {
            break;
        }
        if iterations >= PICARD_MAX_ITER || !diff.is_finite() {
            return Err(Error::NoConvergence(format!(
                "Picard iteration stalled at difference {diff:e} after {iterations} sweeps"
            )));
        }
    }
    Ok(VolterraJost {
        k,
        nodes,
        m_plus: m,
        born,
        iterations,
        weighted_tail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{Piece, PiecewiseSmoothFn, Shape, SingularPart};
    use crate::propagator::SolverOptions;
    use crate::scattering::{JostSolutions, Wave};

    fn bump_potential(amp: f64) -> TwoScalePotential {
        let v = PiecewiseSmoothFn::windowed(
            -1.0,
            1.0,
            Piece::single(
                amp,
                Shape::ExpBump {
                    center: 0.0,
                    half_width: 1.0,
                },
            ),
        )
        .unwrap();
        TwoScalePotential::new("bump", v, SingularPart::empty(), vec![], 1.0, 8).unwrap()
    }

    #[test]
    fn free_gives_one() {
        let r = jost_volterra_oracle(&TwoScalePotential::free(), 1.0, 0.1).unwrap();
        assert!(r.m_plus.is_empty());
    }

    #[test]
    fn agrees_with_ode_route() {
        let p = bump_potential(6.0);
        for k in [0.0, 0.7, 2.5] {
            let r = jost_volterra_oracle(&p, k, 0.05).unwrap();
            let j = JostSolutions::new(&p, k, &SolverOptions::default()).unwrap();
            for (x, m) in r.nodes.iter().zip(&r.m_plus).step_by(7) {
                let f = j.eval(Wave::JostPlus, *x).unwrap().u;
                let m_ode = f * Complex64::from_polar(1.0, -k * x);
                assert!((m - m_ode).norm() < 1e-6, "k={k} x={x}: {m} vs {m_ode}");
            }
        }
    }

    #[test]
    fn uniform_bound_holds_for_weak_potential() {
        let p = bump_potential(0.5);
        for k in [0.3, 1.0, 4.0] {
            let r = jost_volterra_oracle(&p, k, 0.05).unwrap();
            for i in 0..r.nodes.len() {
                assert!((r.m_plus[i] - 1.0).norm() <= r.bound(i) + 1e-12);
            }
        }
    }
}
