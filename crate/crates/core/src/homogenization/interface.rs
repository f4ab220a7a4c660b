//! Interface data: one-sided background waves and mode jumps at the points
//! where the microstructure or the spikes break smoothness, and the
//! piecewise correctors that restore the jump conditions there.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{Side, TwoScalePotential};
use crate::propagator::{Position, StateVector};
use crate::scattering::{JostSolutions, Wave};

/// One-sided jets of a Fourier mode q_j at an interface.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeJump {
    pub j: i64,
    /// (q_j, q_j', q_j'', q_j''') at a-.
    pub left: [Complex64; 4],
    /// (q_j, q_j', q_j'', q_j''') at a+.
    pub right: [Complex64; 4],
}

impl ModeJump {
    pub fn jump(&self, order: usize) -> Complex64 {
        self.right[order] - self.left[order]
    }
}

/// Epsilon-independent data at one interface point a.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfacePoint {
    pub a: f64,
    /// Spike strength at a (0 if none).
    pub c: f64,
    /// e+ at a- and a+ (values agree, derivatives jump by c e+).
    pub e_plus: [StateVector; 2],
    pub e_minus: [StateVector; 2],
    pub modes: Vec<ModeJump>,
    /// Envelope jumps per micro term with the profile tail sums, for truncation reports:
    /// (|[env]|, |D(a-)| + |D(a+)| with D = d/dx(e+ e- env), tail of 1/|l|, tail of 1/l^2).
    pub tails: Vec<(f64, f64, f64, f64)>,
}

impl InterfacePoint {
    pub fn build(p: &TwoScalePotential, bg: &JostSolutions, a: f64) -> Result<Self> {
        let l = Position::left(a);
        let r = Position::right(a);
        let e_plus = [
            bg.eval(Wave::DistortedPlus, l)?,
            bg.eval(Wave::DistortedPlus, r)?,
        ];
        let e_minus = [
            bg.eval(Wave::DistortedMinus, l)?,
            bg.eval(Wave::DistortedMinus, r)?,
        ];
        let left = p.mode_jets(a, Side::Left)?;
        let right = p.mode_jets(a, Side::Right)?;
        let mut js: Vec<i64> = left.iter().chain(right.iter()).map(|(j, _)| *j).collect();
        js.sort_unstable();
        js.dedup();
        let zero = [Complex64::new(0.0, 0.0); 4];
        let find = |v: &[(i64, [Complex64; 4])], j: i64| {
            v.iter()
                .find(|(m, _)| *m == j)
                .map(|(_, q)| *q)
                .unwrap_or(zero)
        };
        let modes = js
            .into_iter()
            .map(|j| ModeJump {
                j,
                left: find(&left, j),
                right: find(&right, j),
            })
            .collect();
        let mut tails = Vec::new();
        for m in &p.micro {
            if m.profile.bandwidth().is_some_and(|b| b <= p.j_max) {
                continue;
            }
            let el = m.envelope.eval_jet(a, Side::Left)?;
            let er = m.envelope.eval_jet(a, Side::Right)?;
            let d = |s: usize, env: &[Complex64; 4]| -> f64 {
                let ep = e_plus[s];
                let em = e_minus[s];
                ((ep.du * em.u + ep.u * em.du) * env[0] + ep.u * em.u * env[1]).norm()
            };
            tails.push((
                (er[0] - el[0]).norm(),
                d(0, &el) + d(1, &er),
                m.profile.tail(p.j_max, 1.0),
                m.profile.tail(p.j_max, 2.0),
            ));
        }
        Ok(InterfacePoint {
            a,
            c: p.v_sing.strength_at(a),
            e_plus,
            e_minus,
            modes,
            tails,
        })
    }

    /// e+(a), continuous across a.
    pub fn e_plus_value(&self) -> Complex64 {
        self.e_plus[0].u
    }

    pub fn e_minus_value(&self) -> Complex64 {
        self.e_minus[0].u
    }

    /// y = a/eps reduced to [0, 1) for accurate phases.
    fn fast_phase(&self, eps: f64) -> f64 {
        (self.a / eps).rem_euclid(1.0)
    }

    /// e^{2 pi i j a / eps}.
    pub fn phase(&self, j: i64, eps: f64) -> Complex64 {
        let y = self.fast_phase(eps);
        Complex64::from_polar(1.0, 2.0 * PI * ((j as f64 * y).rem_euclid(1.0)))
    }

    /// [d/dx (e+ q_j)] at a.
    pub fn jump_d_eplus_q(&self, m: &ModeJump) -> Complex64 {
        let (l, r) = (self.e_plus[0], self.e_plus[1]);
        (r.du * m.right[0] + r.u * m.right[1]) - (l.du * m.left[0] + l.u * m.left[1])
    }

    /// [d/dx (e+ e- q_j)] at a from one-sided values.
    pub fn jump_d_eplus_eminus_q(&self, m: &ModeJump) -> Complex64 {
        let side = |s: usize, q: &[Complex64; 4]| {
            let (p, n) = (self.e_plus[s], self.e_minus[s]);
            (p.du * n.u + p.u * n.du) * q[0] + p.u * n.u * q[1]
        };
        side(1, &m.right) - side(0, &m.left)
    }

    /// sum_l [q_l]_a e^{2 pi i l a/eps} / l.
    pub fn jump_sum(&self, eps: f64) -> Complex64 {
        self.modes
            .iter()
            .map(|m| m.jump(0) * self.phase(m.j, eps) / m.j as f64)
            .sum()
    }

    /// Contribution of this point to t1_eps.
    pub fn t1_eps(&self, k: f64, eps: f64) -> Complex64 {
        self.e_plus_value() * self.e_minus_value() * self.jump_sum(eps) / (4.0 * PI * k)
    }

    /// Contribution of this point to t2_cross, given the value of the summed
    /// order-eps corrector U1 at a.
    pub fn t2_cross(&self, k: f64, eps: f64, u1: Complex64) -> Complex64 {
        u1 * self.e_minus_value() * self.jump_sum(eps) / (4.0 * PI * k)
    }

    /// Derivative jump left by the microstructure acting on the order-eps corrector:
    /// -(i/(2 pi)) U1(a) sum_l [q_l]_a e^{2 pi i l a/eps} / l.
    pub fn cross_jump(&self, eps: f64, u1: Complex64) -> Complex64 {
        -Complex64::i() * u1 * self.jump_sum(eps) / (2.0 * PI)
    }

    /// Contribution of this point to t2_eps.
    pub fn t2_eps(&self, k: f64, eps: f64) -> Complex64 {
        let s: Complex64 = self
            .modes
            .iter()
            .map(|m| self.jump_d_eplus_eminus_q(m) * self.phase(m.j, eps) / (m.j * m.j) as f64)
            .sum();
        Complex64::new(0.0, 1.0) * s / (8.0 * PI * PI * k)
    }

    /// Truncation bounds on the omitted |l| > J part of the t1 and t2 sums at this point.
    pub fn truncation_tails(&self, k: f64) -> (f64, f64) {
        let ee = (self.e_plus_value() * self.e_minus_value()).norm();
        let mut t1: f64 = 0.0;
        let mut t2: f64 = 0.0;
        for &(env_jump, d, tail1, tail2) in &self.tails {
            t1 += ee * env_jump * tail1 / (4.0 * PI * k.abs());
            t2 += d * tail2 / (8.0 * PI * PI * k.abs());
        }
        (t1, t2)
    }

    /// Jump data F2, G2, H2, G3 at this point for a given epsilon.
    pub fn jump_data(&self, eps: f64) -> InterfaceJumpData {
        let ep = self.e_plus_value();
        let mut f2 = Complex64::new(0.0, 0.0);
        let mut g2 = Complex64::new(0.0, 0.0);
        let mut h2 = Complex64::new(0.0, 0.0);
        for m in &self.modes {
            let e = self.phase(m.j, eps);
            let jf = m.j as f64;
            f2 += m.jump(0) * e / (jf * jf);
            g2 += m.jump(0) * e / jf;
            h2 += self.jump_d_eplus_q(m) * e / (jf * jf);
        }
        let i = Complex64::i();
        InterfaceJumpData {
            a: self.a,
            c: self.c,
            f2: -ep * f2 / (4.0 * PI * PI),
            g2: -i * ep * g2 / (2.0 * PI),
            h2: -h2 / (4.0 * PI * PI),
            g3: h2 / (2.0 * PI * PI),
        }
    }

    /// U2p(a-, a/eps) = -(e+(a)/(4 pi^2)) sum_j q_j(a-) e^{2 pi i j a/eps}/j^2.
    pub fn u2p_left(&self, eps: f64) -> Complex64 {
        let s: Complex64 = self
            .modes
            .iter()
            .map(|m| m.left[0] * self.phase(m.j, eps) / (m.j * m.j) as f64)
            .sum();
        -self.e_plus_value() * s / (4.0 * PI * PI)
    }

    /// Order-eps interface corrector: [U] = 0, [U'] - c U(a-) = -G2.
    pub fn first_corrector(&self, k: f64, t0: Complex64, eps: f64) -> Result<CorrectorField> {
        let d = self.jump_data(eps);
        corrector_coeffs(self, k, t0, Complex64::new(0.0, 0.0), -d.g2)
    }

    /// Order-eps^2 interface corrector: [U] = -F2,
    /// [U'] - c U(a-) = -H2 - G3 + c U2p(a-) - cross_jump, where `u1` is the
    /// summed order-eps corrector at a.
    pub fn second_corrector(
        &self,
        k: f64,
        t0: Complex64,
        eps: f64,
        u1: Complex64,
    ) -> Result<CorrectorField> {
        let d = self.jump_data(eps);
        let f2 = -d.h2 - d.g3 + self.c * self.u2p_left(eps) - self.cross_jump(eps, u1);
        corrector_coeffs(self, k, t0, -d.f2, f2)
    }
}

/// The jump defects of the order-eps^2 and eps^3 bulk fields at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterfaceJumpData {
    pub a: f64,
    pub c: f64,
    pub f2: Complex64,
    pub g2: Complex64,
    pub h2: Complex64,
    pub g3: Complex64,
}

/// Outgoing piecewise solution equal to alpha e- left of a and beta e+ right of a.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectorField {
    pub a: f64,
    pub alpha: Complex64,
    pub beta: Complex64,
    pub c: f64,
    /// Prescribed [U]_a.
    pub f1: Complex64,
    /// Prescribed [U']_a - c U(a-).
    pub f2: Complex64,
}

/// Solve for alpha and beta so that [U]_a = F1 and [U']_a - c U(a-) = F2:
/// alpha = (F2 e+(a) - F1 e+'(a+)) / (2ik t0), beta = (F2 e-(a) - F1 e-'(a+)) / (2ik t0).
pub fn corrector_coeffs(
    point: &InterfacePoint,
    k: f64,
    t0: Complex64,
    f1: Complex64,
    f2: Complex64,
) -> Result<CorrectorField> {
    let det = Complex64::new(0.0, 2.0 * k) * t0;
    if det.norm() == 0.0 || !det.is_finite() {
        return Err(Error::NonGenericPole {
            wronskian: det.norm(),
        });
    }
    let ep = point.e_plus[1];
    let em = point.e_minus[1];
    Ok(CorrectorField {
        a: point.a,
        alpha: (f2 * ep.u - f1 * ep.du) / det,
        beta: (f2 * em.u - f1 * em.du) / det,
        c: point.c,
        f1,
        f2,
    })
}

impl CorrectorField {
    /// Value and derivative at x given the background waves there.
    pub fn state(
        &self,
        x: f64,
        side: Side,
        e_plus: &StateVector,
        e_minus: &StateVector,
    ) -> StateVector {
        let right = x > self.a || (x == self.a && side == Side::Right);
        if right {
            e_plus.scale(self.beta)
        } else {
            e_minus.scale(self.alpha)
        }
    }

    /// Largest violation of the two prescribed jump conditions.
    pub fn substitution_residual(&self, point: &InterfacePoint) -> f64 {
        let l = point.e_minus[0].scale(self.alpha);
        let r = point.e_plus[1].scale(self.beta);
        let jump = r.u - l.u;
        let djump = r.du - l.du - self.c * l.u;
        (jump - self.f1).norm().max((djump - self.f2).norm())
    }

    /// Contribution to the transmission coefficient: beta t0.
    pub fn transmission(&self, t0: Complex64) -> Complex64 {
        self.beta * t0
    }

    /// Value at an interface point other than its own (continuous there).
    pub fn value_at(&self, point: &InterfacePoint) -> Complex64 {
        if point.a > self.a {
            self.beta * point.e_plus_value()
        } else {
            self.alpha * point.e_minus_value()
        }
    }
}
