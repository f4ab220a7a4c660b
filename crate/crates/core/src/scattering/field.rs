//! Sampled solutions on a grid with one-sided rows at interfaces.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::jost::{JostSolutions, Wave};
use crate::error::{Error, Result};
use crate::potential::Side;
use crate::propagator::{Position, StateVector};

/// What a [`WaveField`] holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    /// Solution label, e.g. `e_plus` or `resolvent`.
    pub kind: String,
    pub k: f64,
    pub potential: String,
}

/// Values and derivatives of a solution on a sorted grid.
///
/// Interface points appear twice, as a `Left` row followed by a `Right` row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveField {
    pub grid: Vec<Position>,
    pub values: Vec<Complex64>,
    pub dvalues: Vec<Complex64>,
    pub meta: FieldMeta,
}

/// Grid positions for a field: the given points plus every interface inside
/// their range, the latter duplicated as left and right rows.
pub fn field_grid(xs: &[f64], interfaces: &[f64]) -> Vec<Position> {
    let mut v: Vec<f64> = xs.iter().copied().filter(|x| x.is_finite()).collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v.dedup();
    let (Some(&lo), Some(&hi)) = (v.first(), v.last()) else {
        return Vec::new();
    };
    let mut out: Vec<Position> = Vec::with_capacity(v.len() + 2 * interfaces.len());
    for &x in &v {
        if !interfaces.contains(&x) {
            out.push(Position {
                x,
                side: Side::Interior,
            });
        }
    }
    for &a in interfaces {
        if a >= lo && a <= hi {
            out.push(Position::left(a));
            out.push(Position::right(a));
        }
    }
    out.sort_by(|a, b| {
        a.x.partial_cmp(&b.x)
            .unwrap()
            .then_with(|| side_rank(a.side).cmp(&side_rank(b.side)))
    });
    out
}

fn side_rank(s: Side) -> u8 {
    match s {
        Side::Left => 0,
        Side::Interior => 1,
        Side::Right => 2,
    }
}

fn side_tag(s: Side) -> &'static str {
    match s {
        Side::Left => "L",
        Side::Right => "R",
        Side::Interior => "I",
    }
}

impl WaveField {
    pub fn from_states(
        grid: Vec<Position>,
        states: &[StateVector],
        meta: FieldMeta,
    ) -> Result<Self> {
        if grid.len() != states.len() {
            return Err(Error::InvalidInput("grid and state lengths differ".into()));
        }
        Ok(WaveField {
            grid,
            values: states.iter().map(|s| s.u).collect(),
            dvalues: states.iter().map(|s| s.du).collect(),
            meta,
        })
    }

    /// Sample one of the Jost or distorted waves on a grid.
    pub fn sample(jost: &JostSolutions, wave: Wave, grid: Vec<Position>) -> Result<Self> {
        let states = jost.eval_many(wave, &grid)?;
        WaveField::from_states(
            grid,
            &states,
            FieldMeta {
                kind: wave.label().to_string(),
                k: jost.k(),
                potential: jost.potential().name.clone(),
            },
        )
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Row index of x; at a duplicated interface `side` picks the row.
    pub fn index_of(&self, x: f64, side: Side) -> Result<usize> {
        let i = self.grid.partition_point(|p| p.x < x);
        let rows: Vec<usize> = (i..self.grid.len())
            .take_while(|&j| self.grid[j].x == x)
            .collect();
        match rows.len() {
            0 => Err(Error::NotOnGrid(x)),
            1 => Ok(rows[0]),
            _ => match side {
                Side::Left => Ok(rows[0]),
                Side::Right => Ok(*rows.last().unwrap()),
                Side::Interior => Err(Error::SideRequired { x }),
            },
        }
    }

    pub fn state_at(&self, x: f64, side: Side) -> Result<StateVector> {
        let i = self.index_of(x, side)?;
        Ok(StateVector::new(self.values[i], self.dvalues[i]))
    }

    /// Largest |[u'] - c u| and |[u]| over the given spikes.
    pub fn jump_residual(&self, spikes: &[(f64, f64)]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for &(x, c) in spikes {
            let l = self.state_at(x, Side::Left)?;
            let r = self.state_at(x, Side::Right)?;
            let scale = 1.0 + l.u.norm();
            worst = worst
                .max((r.u - l.u).norm() / scale)
                .max((r.du - l.du - c * l.u).norm() / scale);
        }
        Ok(worst)
    }

    /// CSV with columns x, side, re_u, im_u, re_du, im_du, tag.
    pub fn write_csv<W: Write>(&self, mut w: W, tag: &str) -> Result<()> {
        writeln!(w, "x,side,re_u,im_u,re_du,im_du,tag")?;
        for ((p, u), du) in self.grid.iter().zip(&self.values).zip(&self.dvalues) {
            writeln!(
                w,
                "{:.17e},{},{:.17e},{:.17e},{:.17e},{:.17e},{}",
                p.x,
                side_tag(p.side),
                u.re,
                u.im,
                du.re,
                du.im,
                tag
            )?;
        }
        Ok(())
    }
}

/// A B' - A' B at x; either row of a duplicated interface may be used since
/// the Wronskian is continuous there.
pub fn wronskian(a: &WaveField, b: &WaveField, x: f64) -> Result<Complex64> {
    let side = Side::Left;
    let sa = a
        .state_at(x, side)
        .or_else(|_| a.state_at(x, Side::Interior))?;
    let sb = b
        .state_at(x, side)
        .or_else(|_| b.state_at(x, Side::Interior))?;
    Ok(sa.wronskian(&sb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::library;
    use crate::propagator::SolverOptions;
    use std::collections::BTreeMap;

    #[test]
    fn grid_duplicates_interfaces() {
        let g = field_grid(&[-1.0, 0.0, 0.25, 1.0], &[0.0, 0.5, 3.0]);
        let tags: Vec<(f64, &str)> = g.iter().map(|p| (p.x, side_tag(p.side))).collect();
        assert_eq!(
            tags,
            vec![
                (-1.0, "I"),
                (0.0, "L"),
                (0.0, "R"),
                (0.25, "I"),
                (0.5, "L"),
                (0.5, "R"),
                (1.0, "I")
            ]
        );
    }

    #[test]
    fn fields_satisfy_jump_conditions_and_wronskian() {
        let p = library("fig1_left", &BTreeMap::new()).unwrap();
        let k = 5.5;
        let j = JostSolutions::new(&p, k, &SolverOptions::default()).unwrap();
        let xs: Vec<f64> = (0..=60).map(|i| -1.5 + 0.05 * i as f64).collect();
        let interfaces: Vec<f64> = p.interfaces().iter().map(|i| i.x).collect();
        let ep = WaveField::sample(&j, Wave::DistortedPlus, field_grid(&xs, &interfaces)).unwrap();
        let em = WaveField::sample(&j, Wave::DistortedMinus, field_grid(&xs, &interfaces)).unwrap();
        let spikes: Vec<(f64, f64)> = p.v_sing.spikes().iter().map(|s| (s.x, s.c)).collect();
        assert!(ep.jump_residual(&spikes).unwrap() < 1e-9);
        assert!(em.jump_residual(&spikes).unwrap() < 1e-9);
        let t = j.t().unwrap();
        let expected = Complex64::new(0.0, -2.0 * k) * t;
        for &x in &xs {
            let w = wronskian(&ep, &em, x).unwrap();
            assert!((w - expected).norm() < 1e-8 * expected.norm());
        }
        assert_eq!(wronskian(&ep, &ep, 0.25).unwrap(), Complex64::new(0.0, 0.0));
        assert!(matches!(
            wronskian(&ep, &em, 0.123),
            Err(Error::NotOnGrid(_))
        ));
        let mut buf = Vec::new();
        ep.write_csv(&mut buf, "e_plus").unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), ep.len() + 1);
        assert!(text.lines().nth(1).unwrap().ends_with(",e_plus"));
    }
}
