//! Outgoing resolvent of -d^2/dx^2 + V - k^2.

use num_complex::Complex64;

use super::field::{FieldMeta, WaveField};
use super::jost::{JostSolutions, Wave};
use crate::error::{Error, Result};
use crate::propagator::{Position, StateVector};
use crate::quadrature::{PanelRule, DEFAULT_ORDER};

/// Default longest quadrature panel for resolvent integrals.
pub const DEFAULT_PANEL: f64 = 0.05;

/// A compactly supported source with known breakpoints.
pub struct Source<'a> {
    pub f: &'a (dyn Fn(f64) -> Complex64 + Sync),
    /// Sorted points where F may jump or kink; F vanishes outside [first, last].
    pub breaks: Vec<f64>,
}

/// Apply the outgoing resolvent to a source and sample U and U' on a grid.
///
/// Uses the Jost form U = (1/W)[f+(x) int_{-inf}^x f- F + f-(x) int_x^inf f+ F]
/// with W = W(f+, f-), which equals
/// -(1/(2ik t))[e+(x) int e- F + e-(x) int e+ F] for k != 0 and stays
/// valid at k = 0 for a generic potential.
pub fn resolvent_apply(
    jost: &JostSolutions,
    source: &Source,
    grid: Vec<Position>,
    max_panel: f64,
) -> Result<WaveField> {
    let w = jost.jost_wronskian();
    if w.norm() == 0.0 || !w.is_finite() {
        return Err(Error::NonGenericPole {
            wronskian: w.norm(),
        });
    }
    if jost.k() == 0.0 && w.norm() < 1e-10 {
        return Err(Error::NonGenericPole {
            wronskian: w.norm(),
        });
    }
    let meta = FieldMeta {
        kind: "resolvent".into(),
        k: jost.k(),
        potential: jost.potential().name.clone(),
    };
    let zero = Complex64::new(0.0, 0.0);
    let (Some(&a), Some(&b)) = (source.breaks.first(), source.breaks.last()) else {
        let states = vec![StateVector::new(zero, zero); grid.len()];
        return WaveField::from_states(grid, &states, meta);
    };
    if b <= a {
        let states = vec![StateVector::new(zero, zero); grid.len()];
        return WaveField::from_states(grid, &states, meta);
    }
    let mut edges: Vec<f64> = source.breaks.clone();
    edges.extend(
        jost.propagator()
            .node_positions()
            .into_iter()
            .filter(|x| *x > a && *x < b),
    );
    edges.extend(grid.iter().map(|p| p.x).filter(|x| *x > a && *x < b));
    edges.sort_by(|x, y| x.partial_cmp(y).unwrap());
    edges.dedup();
    let rule = PanelRule::new(&edges, max_panel, DEFAULT_ORDER)?;
    let nodes = rule.nodes();
    let fp = jost.eval_points(Wave::JostPlus, nodes)?;
    let fm = jost.eval_points(Wave::JostMinus, nodes)?;
    let fv: Vec<Complex64> = nodes.iter().map(|&x| (source.f)(x)).collect();
    let gm: Vec<Complex64> = fm.iter().zip(&fv).map(|(s, f)| s.u * f).collect();
    let gp: Vec<Complex64> = fp.iter().zip(&fv).map(|(s, f)| s.u * f).collect();
    // cumulative integrals at panel edges
    let pm = rule.panel_integrals(&gm);
    let pp = rule.panel_integrals(&gp);
    let ed = rule.edges();
    let mut left = vec![zero; ed.len()];
    for i in 0..pm.len() {
        left[i + 1] = left[i] + pm[i];
    }
    let mut right = vec![zero; ed.len()];
    for i in (0..pp.len()).rev() {
        right[i] = right[i + 1] + pp[i];
    }
    let total_left = *left.last().unwrap();
    let total_right = right[0];
    let lookup = |x: f64| -> (Complex64, Complex64) {
        if x <= a {
            (zero, total_right)
        } else if x >= b {
            (total_left, zero)
        } else {
            let i = ed.partition_point(|e| *e < x);
            debug_assert!(ed[i] == x, "grid point must be a panel edge");
            (left[i], right[i])
        }
    };
    let sp = jost.eval_many(Wave::JostPlus, &grid)?;
    let sm = jost.eval_many(Wave::JostMinus, &grid)?;
    let states: Vec<StateVector> = grid
        .iter()
        .zip(sp.iter().zip(&sm))
        .map(|(p, (fp, fm))| {
            let (il, ir) = lookup(p.x);
            StateVector::new((fp.u * il + fm.u * ir) / w, (fp.du * il + fm.du * ir) / w)
        })
        .collect();
    WaveField::from_states(grid, &states, meta)
}

/// Resolvent applied to a source and evaluated at plain points.
pub fn resolvent_at(jost: &JostSolutions, source: &Source, xs: &[f64]) -> Result<Vec<StateVector>> {
    let grid: Vec<Position> = xs.iter().map(|&x| Position::left(x)).collect();
    let f = resolvent_apply(jost, source, grid, DEFAULT_PANEL)?;
    Ok(f.values
        .iter()
        .zip(&f.dvalues)
        .map(|(u, du)| StateVector::new(*u, *du))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{library, TwoScalePotential};
    use crate::propagator::SolverOptions;
    use std::collections::BTreeMap;

    fn bump(x: f64) -> Complex64 {
        if x.abs() >= 1.0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new((-1.0 / (1.0 - x * x)).exp(), 0.3 * x)
        }
    }

    #[test]
    fn free_resolvent_matches_green_function() {
        let k = 2.0;
        let j =
            JostSolutions::new(&TwoScalePotential::free(), k, &SolverOptions::default()).unwrap();
        let src = Source {
            f: &bump,
            breaks: vec![-1.0, 1.0],
        };
        let xs = [-2.0, -0.5, 0.0, 0.3, 1.7];
        let u = resolvent_at(&j, &src, &xs).unwrap();
        for (x, s) in xs.iter().zip(&u) {
            // -(1/2ik) int e^{ik|x - z|} F(z) dz by brute force
            let g = |z: f64| bump(z) * Complex64::from_polar(1.0, k * (x - z).abs());
            let mut pts = vec![-1.0, 1.0];
            if x.abs() < 1.0 {
                pts.insert(1, *x);
            }
            let q = crate::quadrature::adaptive_split(g, &pts, 1e-13, 1e-15).unwrap();
            let expected = -q.value / Complex64::new(0.0, 2.0 * k);
            assert!((s.u - expected).norm() < 1e-11, "x={x}");
        }
    }

    #[test]
    fn resolvent_solves_the_equation() {
        let p = library("fig1_right", &BTreeMap::new())
            .unwrap()
            .homogenized();
        let k = 3.0;
        let j = JostSolutions::new(&p, k, &SolverOptions::default()).unwrap();
        let src = Source {
            f: &bump,
            breaks: vec![-1.0, 1.0],
        };
        let h = 1e-4;
        for x in [-0.7, -0.2, 0.35, 0.8] {
            let u = resolvent_at(&j, &src, &[x - h, x, x + h]).unwrap();
            let upp = (u[2].du - u[0].du) / (2.0 * h);
            let v = p.v_reg_value(x, crate::potential::Side::Interior).unwrap();
            let residual = -upp + (v - k * k) * u[1].u - bump(x);
            assert!(residual.norm() < 1e-5 * (1.0 + v), "x={x}: {residual}");
        }
        // outgoing: U ~ c e^{ikx} to the right
        let u = resolvent_at(&j, &src, &[2.5]).unwrap()[0];
        assert!((u.du - Complex64::new(0.0, k) * u.u).norm() < 1e-10 * (1.0 + u.u.norm()));
    }

    #[test]
    fn zero_source_gives_zero() {
        let j =
            JostSolutions::new(&TwoScalePotential::free(), 1.0, &SolverOptions::default()).unwrap();
        let zero = |_: f64| Complex64::new(0.0, 0.0);
        let src = Source {
            f: &zero,
            breaks: vec![-1.0, 1.0],
        };
        let u = resolvent_at(&j, &src, &[0.0, 3.0]).unwrap();
        assert!(u.iter().all(|s| s.u.norm() == 0.0 && s.du.norm() == 0.0));
    }

    #[test]
    fn free_potential_at_zero_energy_is_a_pole() {
        let j =
            JostSolutions::new(&TwoScalePotential::free(), 0.0, &SolverOptions::default()).unwrap();
        let src = Source {
            f: &bump,
            breaks: vec![-1.0, 1.0],
        };
        assert!(matches!(
            resolvent_at(&j, &src, &[0.0]),
            Err(Error::NonGenericPole { .. })
        ));
    }
}
