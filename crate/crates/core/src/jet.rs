//! Truncated Taylor jets carrying a value and its first three derivatives.
//!
//! Piece descriptors are evaluated through jets so that derivatives up to
//! third order come out of the same code path as values.

use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet3 {
    pub d: [f64; 4],
}

impl Jet3 {
    pub const ZERO: Jet3 = Jet3 { d: [0.0; 4] };

    pub fn constant(c: f64) -> Self {
        Jet3 {
            d: [c, 0.0, 0.0, 0.0],
        }
    }

    /// The independent variable evaluated at `x`.
    pub fn var(x: f64) -> Self {
        Jet3 {
            d: [x, 1.0, 0.0, 0.0],
        }
    }

    pub fn value(&self) -> f64 {
        self.d[0]
    }

    pub fn scale(self, s: f64) -> Self {
        Jet3 {
            d: [s * self.d[0], s * self.d[1], s * self.d[2], s * self.d[3]],
        }
    }

    /// Chain rule for an outer function whose derivatives at `self.d[0]` are `g`.
    fn compose(self, g: [f64; 4]) -> Self {
        let [_, f1, f2, f3] = self.d;
        Jet3 {
            d: [
                g[0],
                g[1] * f1,
                g[2] * f1 * f1 + g[1] * f2,
                g[3] * f1 * f1 * f1 + 3.0 * g[2] * f1 * f2 + g[1] * f3,
            ],
        }
    }

    pub fn exp(self) -> Self {
        let e = self.d[0].exp();
        self.compose([e; 4])
    }

    pub fn sin(self) -> Self {
        let (s, c) = self.d[0].sin_cos();
        self.compose([s, c, -s, -c])
    }

    pub fn cos(self) -> Self {
        let (s, c) = self.d[0].sin_cos();
        self.compose([c, -s, -c, s])
    }

    pub fn recip(self) -> Self {
        let r = 1.0 / self.d[0];
        let r2 = r * r;
        self.compose([r, -r2, 2.0 * r2 * r, -6.0 * r2 * r2])
    }

    pub fn is_finite(&self) -> bool {
        self.d.iter().all(|v| v.is_finite())
    }
}

impl Add for Jet3 {
    type Output = Jet3;
    fn add(self, o: Jet3) -> Jet3 {
        Jet3 {
            d: [
                self.d[0] + o.d[0],
                self.d[1] + o.d[1],
                self.d[2] + o.d[2],
                self.d[3] + o.d[3],
            ],
        }
    }
}

impl Sub for Jet3 {
    type Output = Jet3;
    fn sub(self, o: Jet3) -> Jet3 {
        self + (-o)
    }
}

impl Neg for Jet3 {
    type Output = Jet3;
    fn neg(self) -> Jet3 {
        self.scale(-1.0)
    }
}

impl Mul for Jet3 {
    type Output = Jet3;
    fn mul(self, o: Jet3) -> Jet3 {
        let [f0, f1, f2, f3] = self.d;
        let [g0, g1, g2, g3] = o.d;
        Jet3 {
            d: [
                f0 * g0,
                f1 * g0 + f0 * g1,
                f2 * g0 + 2.0 * f1 * g1 + f0 * g2,
                f3 * g0 + 3.0 * f2 * g1 + 3.0 * f1 * g2 + f0 * g3,
            ],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule_matches_closed_form() {
        // x^2 * x = x^3
        let x = Jet3::var(1.5);
        let j = x * x * x;
        assert!((j.d[0] - 3.375).abs() < 1e-14);
        assert!((j.d[1] - 6.75).abs() < 1e-14);
        assert!((j.d[2] - 9.0).abs() < 1e-14);
        assert!((j.d[3] - 6.0).abs() < 1e-14);
    }

    #[test]
    fn exp_of_square() {
        // d/dx exp(x^2) = 2x exp(x^2), second = (2 + 4x^2) exp(x^2), third = (12x + 8x^3) exp(x^2)
        let x0 = 0.7;
        let x = Jet3::var(x0);
        let j = (x * x).exp();
        let e = (x0 * x0).exp();
        assert!((j.d[1] - 2.0 * x0 * e).abs() < 1e-13);
        assert!((j.d[2] - (2.0 + 4.0 * x0 * x0) * e).abs() < 1e-13);
        assert!((j.d[3] - (12.0 * x0 + 8.0 * x0.powi(3)) * e).abs() < 1e-12);
    }

    #[test]
    fn recip_and_trig() {
        let x0 = 0.3;
        let r = Jet3::var(x0).recip();
        assert!((r.d[3] + 6.0 / x0.powi(4)).abs() < 1e-9);
        let s = Jet3::var(x0).scale(2.0).sin();
        assert!((s.d[3] + 8.0 * (2.0 * x0).cos()).abs() < 1e-13);
    }
}
