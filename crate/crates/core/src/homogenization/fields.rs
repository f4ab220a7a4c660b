//! Bulk fields of the two-scale expansion of e+ and the assembled
//! corrected expansion through order eps^2.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::Homogenizer;
use crate::error::Result;
use crate::potential::{Side, TwoScalePotential};
use crate::propagator::{Position, SolverOptions, StateVector};
use crate::scattering::{resolvent_apply, JostSolutions, Source, Wave, WaveField, DEFAULT_PANEL};

/// Values of the four bulk fields at one (x, y).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BulkValues {
    pub u2p: Complex64,
    pub u3p: Complex64,
    pub u2h: Complex64,
    pub u3h: Complex64,
}

/// Sup-norm errors of the corrected expansion and of the leading term e+
/// against a direct solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldErrors {
    pub expansion: f64,
    pub leading: f64,
    /// Where the expansion error is largest.
    pub x_at_max: f64,
}

/// The corrected expansion e+ + eps U1 + eps^2 (U2h + U2p(x, x/eps) + U2) on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionField {
    pub epsilon: f64,
    pub k: f64,
    pub grid: Vec<Position>,
    pub e_plus: Vec<Complex64>,
    /// Sum of the order-eps interface correctors.
    pub u1: Vec<Complex64>,
    pub u2h: Vec<Complex64>,
    /// U2p evaluated at y = x/eps.
    pub u2p: Vec<Complex64>,
    /// Sum of the order-eps^2 interface correctors.
    pub u2: Vec<Complex64>,
    pub total: Vec<Complex64>,
}

fn phase(j: i64, y: f64) -> Complex64 {
    Complex64::from_polar(
        1.0,
        2.0 * PI * ((j as f64 * y.rem_euclid(1.0)).rem_euclid(1.0)),
    )
}

impl Homogenizer {
    fn e_plus_at(&self, pos: Position) -> Result<StateVector> {
        self.background().eval(Wave::DistortedPlus, pos)
    }

    /// U2p(x, y) = -(e+(x)/(4 pi^2)) sum_j q_j(x) e^{2 pi i j y} / j^2.
    pub fn u2p(&self, x: f64, side: Side, y: f64) -> Result<Complex64> {
        let jets = self.potential().mode_jets(x, side)?;
        if jets.is_empty() {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let ep = self.e_plus_at(Position { x, side })?.u;
        let s: Complex64 = jets
            .iter()
            .map(|(j, q)| q[0] * phase(*j, y) / (j * j) as f64)
            .sum();
        Ok(-ep * s / (4.0 * PI * PI))
    }

    /// U3p(x, y) = -(i/(4 pi^3)) sum_j d/dx(e+ q_j)(x) e^{2 pi i j y} / j^3.
    pub fn u3p(&self, x: f64, side: Side, y: f64) -> Result<Complex64> {
        let jets = self.potential().mode_jets(x, side)?;
        if jets.is_empty() {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let ep = self.e_plus_at(Position { x, side })?;
        let s: Complex64 = jets
            .iter()
            .map(|(j, q)| (ep.du * q[0] + ep.u * q[1]) * phase(*j, y) / (j * j * j) as f64)
            .sum();
        Ok(-Complex64::i() * s / (4.0 * PI * PI * PI))
    }

    /// Source of the U2h equation: (e+/(4 pi^2)) sum_j q_j q_{-j} / j^2.
    pub fn u2h_source(&self, x: f64) -> Complex64 {
        let Ok(jets) = self.potential().mode_jets(x, Side::Left) else {
            return Complex64::new(0.0, 0.0);
        };
        if jets.is_empty() {
            return Complex64::new(0.0, 0.0);
        }
        let s: Complex64 = jets
            .iter()
            .filter_map(|(j, q)| {
                let partner = jets.iter().find(|(m, _)| *m == -*j)?;
                Some(q[0] * partner.1[0] / (j * j) as f64)
            })
            .sum();
        match self.e_plus_at(Position::left(x)) {
            Ok(ep) => ep.u * s / (4.0 * PI * PI),
            Err(_) => Complex64::new(f64::NAN, f64::NAN),
        }
    }

    /// Source of the U3h equation: (i/(4 pi^3)) sum_j d/dx(e+ q_j) q_{-j} / j^3.
    pub fn u3h_source(&self, x: f64) -> Complex64 {
        let Ok(jets) = self.potential().mode_jets(x, Side::Left) else {
            return Complex64::new(0.0, 0.0);
        };
        if jets.is_empty() {
            return Complex64::new(0.0, 0.0);
        }
        let Ok(ep) = self.e_plus_at(Position::left(x)) else {
            return Complex64::new(f64::NAN, f64::NAN);
        };
        let s: Complex64 = jets
            .iter()
            .filter_map(|(j, q)| {
                let partner = jets.iter().find(|(m, _)| *m == -*j)?;
                Some((ep.du * q[0] + ep.u * q[1]) * partner.1[0] / (j * j * j) as f64)
            })
            .sum();
        Complex64::i() * s / (4.0 * PI * PI * PI)
    }

    /// Breakpoints of the micro sources: their overall support plus every
    /// envelope breakpoint and spike inside it.
    fn source_breaks(&self) -> Result<Vec<f64>> {
        let p = self.potential();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for m in &p.micro {
            if let Some((a, b)) = m.envelope.support_or_empty()? {
                lo = lo.min(a);
                hi = hi.max(b);
            }
        }
        if lo >= hi {
            return Ok(Vec::new());
        }
        let mut breaks = vec![lo, hi];
        breaks.extend(p.breakpoints().into_iter().filter(|x| *x > lo && *x < hi));
        breaks.extend(
            p.v_sing
                .spikes()
                .iter()
                .map(|s| s.x)
                .filter(|x| *x > lo && *x < hi),
        );
        breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        breaks.dedup();
        Ok(breaks)
    }

    /// The order-eps^2 homogenized field U2h = R_{V0}(k) [u2h_source] on a grid.
    pub fn u2h_field(&self, grid: Vec<Position>) -> Result<WaveField> {
        let f = |x: f64| self.u2h_source(x);
        let src = Source {
            f: &f,
            breaks: self.source_breaks()?,
        };
        let mut w = resolvent_apply(self.background(), &src, grid, DEFAULT_PANEL)?;
        w.meta.kind = "u2h".into();
        Ok(w)
    }

    /// The order-eps^3 homogenized field U3h = R_{V0}(k) [u3h_source] on a grid.
    pub fn u3h_field(&self, grid: Vec<Position>) -> Result<WaveField> {
        let f = |x: f64| self.u3h_source(x);
        let src = Source {
            f: &f,
            breaks: self.source_breaks()?,
        };
        let mut w = resolvent_apply(self.background(), &src, grid, DEFAULT_PANEL)?;
        w.meta.kind = "u3h".into();
        Ok(w)
    }

    /// All four bulk fields at one point.
    pub fn bulk_fields(&self, x: f64, side: Side, y: f64) -> Result<BulkValues> {
        let pos = Position { x, side };
        let u2h = self.u2h_field(vec![pos])?.values[0];
        let u3h = self.u3h_field(vec![pos])?.values[0];
        Ok(BulkValues {
            u2p: self.u2p(x, side, y)?,
            u3p: self.u3p(x, side, y)?,
            u2h,
            u3h,
        })
    }

    /// Assemble the corrected expansion of e_{V+} at period eps on a grid.
    pub fn expansion_field(&self, eps: f64, grid: Vec<Position>) -> Result<ExpansionField> {
        let k = self.k();
        let t0 = self.t0_hom();
        let bg = self.background();
        let ep = bg.eval_many(Wave::DistortedPlus, &grid)?;
        let em = bg.eval_many(Wave::DistortedMinus, &grid)?;
        let first: Vec<_> = self
            .interfaces()
            .iter()
            .map(|ip| ip.first_corrector(k, t0, eps))
            .collect::<Result<_>>()?;
        let second = self.second_correctors(eps)?;
        let u2h = self.u2h_field(grid.clone())?.values;
        let mut u1 = Vec::with_capacity(grid.len());
        let mut u2 = Vec::with_capacity(grid.len());
        let mut u2p = Vec::with_capacity(grid.len());
        let mut total = Vec::with_capacity(grid.len());
        for (i, pos) in grid.iter().enumerate() {
            let c1: Complex64 = first
                .iter()
                .map(|c| c.state(pos.x, pos.side, &ep[i], &em[i]).u)
                .sum();
            let c2: Complex64 = second
                .iter()
                .map(|c| c.state(pos.x, pos.side, &ep[i], &em[i]).u)
                .sum();
            let p = self.u2p(pos.x, pos.side, pos.x / eps)?;
            u1.push(c1);
            u2.push(c2);
            u2p.push(p);
            total.push(ep[i].u + eps * c1 + eps * eps * (u2h[i] + p + c2));
        }
        Ok(ExpansionField {
            epsilon: eps,
            k,
            grid,
            e_plus: ep.iter().map(|s| s.u).collect(),
            u1,
            u2h,
            u2p,
            u2,
            total,
        })
    }

    /// Compare the expansion at the period of `p` with the direct e_{V+} of `p` on a grid.
    pub fn field_errors(
        &self,
        p: &TwoScalePotential,
        grid: &[Position],
        opts: &SolverOptions,
    ) -> Result<FieldErrors> {
        let f = self.expansion_field(p.epsilon, grid.to_vec())?;
        let direct = JostSolutions::new(p, self.k(), opts)?.eval_many(Wave::DistortedPlus, grid)?;
        let mut out = FieldErrors {
            expansion: 0.0,
            leading: 0.0,
            x_at_max: grid.first().map_or(0.0, |g| g.x),
        };
        for (i, d) in direct.iter().enumerate() {
            let e = (f.total[i] - d.u).norm();
            if e > out.expansion {
                out.expansion = e;
                out.x_at_max = grid[i].x;
            }
            out.leading = out.leading.max((f.e_plus[i] - d.u).norm());
        }
        Ok(out)
    }
}
