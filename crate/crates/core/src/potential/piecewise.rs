//! Piecewise-smooth functions described by closed-form pieces.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::Jet3;

/// Which limit to take when evaluating at a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
    Interior,
}

/// Gaussians are treated as vanishing beyond this many widths from their center.
pub const GAUSSIAN_CUTOFF_WIDTHS: f64 = 9.0;

/// Closed-form smooth shapes that a piece is assembled from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Const,
    /// Polynomial in x, coefficients in ascending order.
    Poly {
        coeffs: Vec<f64>,
    },
    /// exp(-((x - center)/width)^2)
    Gaussian {
        center: f64,
        width: f64,
    },
    /// exp(-s^2/(a^2 - s^2)) for |s| < a with s = x - center, zero otherwise.
    ExpBump {
        center: f64,
        half_width: f64,
    },
    /// cos(freq * x + phase)
    Cosine {
        freq: f64,
        phase: f64,
    },
}

impl Shape {
    pub fn jet(&self, x: f64) -> Jet3 {
        match self {
            Shape::Const => Jet3::constant(1.0),
            Shape::Poly { coeffs } => {
                let xv = Jet3::var(x);
                let mut acc = Jet3::ZERO;
                for &c in coeffs.iter().rev() {
                    acc = acc * xv + Jet3::constant(c);
                }
                acc
            }
            Shape::Gaussian { center, width } => {
                let s = Jet3::var(x - center).scale(1.0 / width);
                (-(s * s)).exp()
            }
            Shape::ExpBump { center, half_width } => {
                let s0 = x - center;
                let a2 = half_width * half_width;
                if s0.abs() >= *half_width {
                    return Jet3::ZERO;
                }
                let s = Jet3::var(s0);
                let inner = -(s * s) * (Jet3::constant(a2) - s * s).recip();
                if inner.value() < -700.0 {
                    return Jet3::ZERO;
                }
                let j = inner.exp();
                if j.is_finite() {
                    j
                } else {
                    Jet3::ZERO
                }
            }
            Shape::Cosine { freq, phase } => Jet3::var(x).scale(*freq).add_const(*phase).cos(),
        }
    }

    /// Value only, cheaper than the full jet.
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Shape::Const => 1.0,
            Shape::Poly { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c),
            Shape::Gaussian { center, width } => {
                let s = (x - center) / width;
                (-s * s).exp()
            }
            Shape::ExpBump { center, half_width } => {
                let s = x - center;
                if s.abs() >= *half_width {
                    0.0
                } else {
                    (-s * s / (half_width * half_width - s * s)).exp()
                }
            }
            Shape::Cosine { freq, phase } => (freq * x + phase).cos(),
        }
    }

    /// Interval outside of which the shape vanishes, if any.
    fn support(&self) -> Option<(f64, f64)> {
        match self {
            Shape::Gaussian { center, width } => Some((
                center - GAUSSIAN_CUTOFF_WIDTHS * width.abs(),
                center + GAUSSIAN_CUTOFF_WIDTHS * width.abs(),
            )),
            Shape::ExpBump { center, half_width } => {
                Some((center - half_width.abs(), center + half_width.abs()))
            }
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            Shape::Const => true,
            Shape::Poly { coeffs } => coeffs.iter().all(|c| c.is_finite()),
            Shape::Gaussian { center, width } => {
                center.is_finite() && width.is_finite() && *width > 0.0
            }
            Shape::ExpBump { center, half_width } => {
                center.is_finite() && half_width.is_finite() && *half_width > 0.0
            }
            Shape::Cosine { freq, phase } => freq.is_finite() && phase.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "bad shape parameters: {self:?}"
            )))
        }
    }
}

impl Jet3 {
    fn add_const(self, c: f64) -> Jet3 {
        self + Jet3::constant(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coeff: Complex64,
    #[serde(flatten)]
    pub shape: Shape,
}

impl Term {
    pub fn real(c: f64, shape: Shape) -> Self {
        Term {
            coeff: Complex64::new(c, 0.0),
            shape,
        }
    }
}

/// A sum of terms, smooth on its open interval.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Piece {
    pub terms: Vec<Term>,
}

impl Piece {
    pub fn zero() -> Self {
        Piece { terms: Vec::new() }
    }

    pub fn single(coeff: f64, shape: Shape) -> Self {
        Piece {
            terms: vec![Term::real(coeff, shape)],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms
            .iter()
            .all(|t| t.coeff == Complex64::new(0.0, 0.0))
    }

    pub fn value(&self, x: f64) -> Complex64 {
        self.terms.iter().map(|t| t.coeff * t.shape.value(x)).sum()
    }

    pub fn jet(&self, x: f64) -> [Complex64; 4] {
        let mut out = [Complex64::new(0.0, 0.0); 4];
        for t in &self.terms {
            let j = t.shape.jet(x);
            for (o, d) in out.iter_mut().zip(j.d.iter()) {
                *o += t.coeff * d;
            }
        }
        out
    }
}

/// A function given by smooth pieces between sorted breakpoints.
///
/// With breakpoints `a_1 < ... < a_M` there are `M + 1` pieces; piece `i`
/// lives on `(a_i, a_{i+1})` with `a_0 = -inf` and `a_{M+1} = +inf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseSmoothFn {
    breakpoints: Vec<f64>,
    pieces: Vec<Piece>,
}

impl PiecewiseSmoothFn {
    pub fn new(breakpoints: Vec<f64>, pieces: Vec<Piece>) -> Result<Self> {
        if pieces.len() != breakpoints.len() + 1 {
            return Err(Error::InvalidInput(format!(
                "{} breakpoints need {} pieces, got {}",
                breakpoints.len(),
                breakpoints.len() + 1,
                pieces.len()
            )));
        }
        if breakpoints.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidInput("breakpoints must be finite".into()));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        for p in &pieces {
            for t in &p.terms {
                t.shape.validate()?;
                if !(t.coeff.re.is_finite() && t.coeff.im.is_finite()) {
                    return Err(Error::InvalidInput("non-finite coefficient".into()));
                }
            }
        }
        Ok(PiecewiseSmoothFn {
            breakpoints,
            pieces,
        })
    }

    pub fn zero() -> Self {
        PiecewiseSmoothFn {
            breakpoints: Vec::new(),
            pieces: vec![Piece::zero()],
        }
    }

    pub fn constant(c: f64) -> Self {
        PiecewiseSmoothFn {
            breakpoints: Vec::new(),
            pieces: vec![Piece::single(c, Shape::Const)],
        }
    }

    /// `inner` on `[a, b]`, zero outside.
    pub fn windowed(a: f64, b: f64, inner: Piece) -> Result<Self> {
        Self::new(vec![a, b], vec![Piece::zero(), inner, Piece::zero()])
    }

    /// A smooth function without breakpoints.
    pub fn smooth(piece: Piece) -> Self {
        PiecewiseSmoothFn {
            breakpoints: Vec::new(),
            pieces: vec![piece],
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn is_identically_zero(&self) -> bool {
        self.pieces.iter().all(|p| p.is_zero())
    }

    pub fn is_real(&self) -> bool {
        self.pieces
            .iter()
            .all(|p| p.terms.iter().all(|t| t.coeff.im == 0.0))
    }

    /// Index of the piece that supplies the requested value.
    pub fn piece_index(&self, x: f64, side: Side) -> Result<usize> {
        if !x.is_finite() {
            return Err(Error::InvalidInput(format!("x = {x} is not finite")));
        }
        let idx = self.breakpoints.partition_point(|&b| b < x);
        if idx < self.breakpoints.len() && self.breakpoints[idx] == x {
            match side {
                Side::Left => Ok(idx),
                Side::Right => Ok(idx + 1),
                Side::Interior => Err(Error::SideRequired { x }),
            }
        } else {
            Ok(idx)
        }
    }

    /// Value and derivatives of orders 0..=3.
    pub fn eval_jet(&self, x: f64, side: Side) -> Result<[Complex64; 4]> {
        let i = self.piece_index(x, side)?;
        Ok(self.pieces[i].jet(x))
    }

    pub fn evaluate(&self, x: f64, side: Side) -> Result<Complex64> {
        let i = self.piece_index(x, side)?;
        Ok(self.pieces[i].value(x))
    }

    /// Smallest length scale of the shapes (Gaussian widths, bump half-widths, cosine periods).
    pub fn min_length_scale(&self) -> f64 {
        self.pieces
            .iter()
            .flat_map(|p| p.terms.iter())
            .map(|t| match &t.shape {
                Shape::Gaussian { width, .. } => width.abs(),
                Shape::ExpBump { half_width, .. } => half_width.abs(),
                Shape::Cosine { freq, .. } if *freq != 0.0 => {
                    2.0 * std::f64::consts::PI / freq.abs()
                }
                _ => f64::INFINITY,
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn derivative(&self, x: f64, side: Side, order: usize) -> Result<Complex64> {
        if order > 3 {
            return Err(Error::InvalidInput(format!(
                "derivative order {order} exceeds 3"
            )));
        }
        Ok(self.eval_jet(x, side)?[order])
    }

    /// Right limit minus left limit of the derivative of the given order.
    pub fn jump(&self, a: f64, order: usize) -> Result<Complex64> {
        if !a.is_finite() {
            return Err(Error::InvalidInput(format!("a = {a} is not finite")));
        }
        Ok(self.derivative(a, Side::Right, order)? - self.derivative(a, Side::Left, order)?)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let pieces = self
            .pieces
            .iter()
            .map(|p| Piece {
                terms: p
                    .terms
                    .iter()
                    .map(|t| Term {
                        coeff: t.coeff * s,
                        shape: t.shape.clone(),
                    })
                    .collect(),
            })
            .collect();
        PiecewiseSmoothFn {
            breakpoints: self.breakpoints.clone(),
            pieces,
        }
    }

    pub fn conj(&self) -> Self {
        let pieces = self
            .pieces
            .iter()
            .map(|p| Piece {
                terms: p
                    .terms
                    .iter()
                    .map(|t| Term {
                        coeff: t.coeff.conj(),
                        shape: t.shape.clone(),
                    })
                    .collect(),
            })
            .collect();
        PiecewiseSmoothFn {
            breakpoints: self.breakpoints.clone(),
            pieces,
        }
    }

    /// Pointwise sum; the breakpoint set is the union of both.
    pub fn add(&self, other: &Self) -> Self {
        let mut bps: Vec<f64> = self
            .breakpoints
            .iter()
            .chain(other.breakpoints.iter())
            .copied()
            .collect();
        bps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        bps.dedup();
        let mut pieces = Vec::with_capacity(bps.len() + 1);
        for i in 0..=bps.len() {
            let probe = match (i, bps.len()) {
                (_, 0) => 0.0,
                (0, _) => bps[0] - 1.0,
                (i, n) if i == n => bps[n - 1] + 1.0,
                (i, _) => 0.5 * (bps[i - 1] + bps[i]),
            };
            let a = self.piece_index(probe, Side::Interior).unwrap();
            let b = other.piece_index(probe, Side::Interior).unwrap();
            let mut terms = self.pieces[a].terms.clone();
            terms.extend(other.pieces[b].terms.iter().cloned());
            pieces.push(Piece { terms });
        }
        PiecewiseSmoothFn {
            breakpoints: bps,
            pieces,
        }
    }

    /// Closed interval outside of which the function vanishes. `None` when
    /// the function is identically zero or has no compact support; use
    /// [`PiecewiseSmoothFn::support_or_empty`] to tell the two apart.
    pub fn support(&self) -> Option<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (i, p) in self.pieces.iter().enumerate() {
            if p.is_zero() {
                continue;
            }
            let left = if i == 0 {
                f64::NEG_INFINITY
            } else {
                self.breakpoints[i - 1]
            };
            let right = if i == self.breakpoints.len() {
                f64::INFINITY
            } else {
                self.breakpoints[i]
            };
            let mut plo = f64::INFINITY;
            let mut phi = f64::NEG_INFINITY;
            for t in &p.terms {
                match t.shape.support() {
                    Some((a, b)) => {
                        plo = plo.min(a);
                        phi = phi.max(b);
                    }
                    None => {
                        plo = f64::NEG_INFINITY;
                        phi = f64::INFINITY;
                    }
                }
            }
            let a = plo.max(left);
            let b = phi.min(right);
            if a < b {
                lo = lo.min(a);
                hi = hi.max(b);
            }
        }
        if lo.is_finite() && hi.is_finite() {
            Some((lo, hi))
        } else {
            None
        }
    }

    /// Support as an interval, an empty result for the zero function, or an
    /// error when the function does not decay.
    pub fn support_or_empty(&self) -> Result<Option<(f64, f64)>> {
        if self.is_identically_zero() {
            return Ok(None);
        }
        match self.support() {
            Some(s) => Ok(Some(s)),
            None => Err(Error::Support(
                "function does not have compact support".into(),
            )),
        }
    }

    /// Whether the open interval `(a, b)` lies inside a single zero piece.
    pub fn vanishes_on(&self, a: f64, b: f64) -> bool {
        let mid = 0.5 * (a + b);
        let idx = self.breakpoints.partition_point(|&x| x < mid);
        let piece = &self.pieces[idx];
        if piece.is_zero() {
            return true;
        }
        piece.terms.iter().all(|t| match t.shape.support() {
            Some((lo, hi)) => b <= lo || a >= hi,
            None => false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn bump_envelope() -> PiecewiseSmoothFn {
        let a = 2.0 / 3.0;
        PiecewiseSmoothFn::windowed(
            -a,
            a,
            Piece::single(
                40.0,
                Shape::ExpBump {
                    center: 0.0,
                    half_width: a,
                },
            ),
        )
        .unwrap()
    }

    #[test]
    fn constant_evaluates_to_itself() {
        let f = PiecewiseSmoothFn::constant(1.0);
        for x in [-3.0, 0.0, 0.25, 1e6] {
            assert_eq!(
                f.evaluate(x, Side::Interior).unwrap(),
                Complex64::new(1.0, 0.0)
            );
        }
    }

    #[test]
    fn bump_vanishes_at_the_edge() {
        let f = bump_envelope();
        let v = f.evaluate(2.0 / 3.0, Side::Left).unwrap();
        assert_eq!(v.norm(), 0.0);
        let near = f.evaluate(2.0 / 3.0 - 1e-4, Side::Interior).unwrap();
        assert!(near.norm() < 1e-100);
        assert_abs_diff_eq!(
            f.evaluate(0.0, Side::Interior).unwrap().re,
            40.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn interior_evaluation_at_breakpoint_is_rejected() {
        let f = bump_envelope();
        assert_eq!(
            f.evaluate(2.0 / 3.0, Side::Interior),
            Err(Error::SideRequired { x: 2.0 / 3.0 })
        );
    }

    #[test]
    fn jumps_of_truncated_constant() {
        let f = PiecewiseSmoothFn::windowed(-1.0, 1.0, Piece::single(2.5, Shape::Const)).unwrap();
        assert_eq!(f.jump(-1.0, 0).unwrap().re, 2.5);
        assert_eq!(f.jump(1.0, 0).unwrap().re, -2.5);
        assert_eq!(f.jump(1.0, 1).unwrap().re, 0.0);
        assert_eq!(f.jump(0.3, 0).unwrap().re, 0.0);
    }

    #[test]
    fn truncated_cosine_jump_at_one() {
        let eps = 0.037;
        let f = PiecewiseSmoothFn::windowed(
            -1.0,
            1.0,
            Piece::single(
                1.0,
                Shape::Cosine {
                    freq: 2.0 * std::f64::consts::PI / eps,
                    phase: 0.0,
                },
            ),
        )
        .unwrap();
        let expected = -(2.0 * std::f64::consts::PI / eps).cos();
        assert_abs_diff_eq!(f.jump(1.0, 0).unwrap().re, expected, epsilon = 1e-12);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let f = PiecewiseSmoothFn::smooth(Piece {
            terms: vec![
                Term::real(
                    3.0,
                    Shape::Gaussian {
                        center: 0.2,
                        width: 0.4,
                    },
                ),
                Term::real(
                    -1.5,
                    Shape::Poly {
                        coeffs: vec![1.0, -2.0, 0.5, 0.1],
                    },
                ),
                Term::real(
                    0.7,
                    Shape::Cosine {
                        freq: 3.0,
                        phase: 0.4,
                    },
                ),
                Term::real(
                    2.0,
                    Shape::ExpBump {
                        center: 0.0,
                        half_width: 1.0,
                    },
                ),
            ],
        });
        let h = 1e-5;
        for &x in &[-0.6, -0.1, 0.35, 0.8] {
            let j = f.eval_jet(x, Side::Interior).unwrap();
            for order in 0..3 {
                let p = f.eval_jet(x + h, Side::Interior).unwrap()[order];
                let m = f.eval_jet(x - h, Side::Interior).unwrap()[order];
                let fd = (p - m) / (2.0 * h);
                let exact = j[order + 1];
                assert!(
                    (fd - exact).norm() <= 1e-6 * (1.0 + exact.norm()),
                    "x={x} order={order}"
                );
            }
        }
    }

    #[test]
    fn sum_merges_breakpoints() {
        let a = PiecewiseSmoothFn::windowed(-1.0, 1.0, Piece::single(1.0, Shape::Const)).unwrap();
        let b = PiecewiseSmoothFn::windowed(0.0, 2.0, Piece::single(2.0, Shape::Const)).unwrap();
        let s = a.add(&b);
        assert_eq!(s.breakpoints(), &[-1.0, 0.0, 1.0, 2.0]);
        assert_eq!(s.evaluate(0.5, Side::Interior).unwrap().re, 3.0);
        assert_eq!(s.evaluate(1.5, Side::Interior).unwrap().re, 2.0);
        assert_eq!(s.support(), Some((-1.0, 2.0)));
    }

    #[test]
    fn rejects_unsorted_breakpoints() {
        let r = PiecewiseSmoothFn::new(vec![1.0, 0.0], vec![Piece::zero(); 3]);
        assert!(r.is_err());
    }

    #[test]
    fn support_of_gaussian_and_constant() {
        let g = PiecewiseSmoothFn::smooth(Piece::single(
            1.0,
            Shape::Gaussian {
                center: 1.0,
                width: 0.1,
            },
        ));
        let (lo, hi) = g.support().unwrap();
        assert_abs_diff_eq!(lo, 1.0 - 0.9, epsilon = 1e-12);
        assert_abs_diff_eq!(hi, 1.0 + 0.9, epsilon = 1e-12);
        assert!(PiecewiseSmoothFn::constant(1.0).support_or_empty().is_err());
        assert_eq!(PiecewiseSmoothFn::zero().support_or_empty().unwrap(), None);
    }
}
