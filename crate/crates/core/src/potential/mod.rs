//! Two-scale potentials V = V_reg + sum c_j delta(x - x_j) + q(x, x/eps).

pub mod descriptor;
pub mod library;
pub mod piecewise;
pub mod profile;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use descriptor::PotentialDescriptor;
pub use library::library;
pub use piecewise::{Piece, PiecewiseSmoothFn, Shape, Side, Term};
pub use profile::PeriodicProfile;

/// Default number of retained Fourier modes per sign for infinite series.
pub const DEFAULT_J_MAX: usize = 64;

/// Tail estimates above this trigger a truncation warning.
pub const DEFAULT_TAIL_TOL: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spike {
    pub x: f64,
    pub c: f64,
}

/// The delta-spike part of the potential.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SingularPart {
    spikes: Vec<Spike>,
}

impl SingularPart {
    pub fn new(spikes: Vec<Spike>) -> Result<Self> {
        if spikes.iter().any(|s| !s.x.is_finite() || !s.c.is_finite()) {
            return Err(Error::InvalidInput("spike data must be finite".into()));
        }
        if spikes.windows(2).any(|w| w[0].x >= w[1].x) {
            return Err(Error::InvalidInput(
                "spike locations must be strictly increasing".into(),
            ));
        }
        Ok(SingularPart { spikes })
    }

    pub fn empty() -> Self {
        SingularPart { spikes: Vec::new() }
    }

    pub fn spikes(&self) -> &[Spike] {
        &self.spikes
    }

    pub fn is_empty(&self) -> bool {
        self.spikes.is_empty()
    }

    /// Strength at `x`, zero when there is no spike there.
    pub fn strength_at(&self, x: f64) -> f64 {
        self.spikes
            .iter()
            .find(|s| s.x == x)
            .map(|s| s.c)
            .unwrap_or(0.0)
    }
}

/// One envelope-times-profile contribution f(x) p(x/eps) to the microstructure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicroTerm {
    pub envelope: PiecewiseSmoothFn,
    pub profile: PeriodicProfile,
}

/// The Fourier coefficient q_j(x) of the microstructure.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierMode {
    pub j: i64,
    pub coeff: PiecewiseSmoothFn,
}

/// Pointwise Fourier data of all retained modes: (j, [q_j, q_j', q_j'', q_j''']).
pub type ModeJets = Vec<(i64, [Complex64; 4])>;

/// Result of sampling the truncated microstructure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MicroSample {
    pub value: f64,
    /// Imaginary part left over after truncation, zero up to rounding for real inputs.
    pub imag_residual: f64,
    pub tail_estimate: f64,
    pub warning: bool,
}

/// A point of the interface set: a spike location, an envelope breakpoint, or both.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interface {
    pub x: f64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonnegativityReport {
    pub min_value: f64,
    pub argmin: f64,
    pub spikes_nonnegative: bool,
    pub nonnegative: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoScalePotential {
    pub name: String,
    pub v_reg: PiecewiseSmoothFn,
    pub v_sing: SingularPart,
    pub micro: Vec<MicroTerm>,
    pub epsilon: f64,
    pub j_max: usize,
}

impl TwoScalePotential {
    pub fn new(
        name: impl Into<String>,
        v_reg: PiecewiseSmoothFn,
        v_sing: SingularPart,
        micro: Vec<MicroTerm>,
        epsilon: f64,
        j_max: usize,
    ) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::ParamOutOfRange(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        if j_max == 0 {
            return Err(Error::ParamOutOfRange("j_max must be at least 1".into()));
        }
        if !v_reg.is_real() {
            return Err(Error::InvalidInput(
                "the regular part must be real-valued".into(),
            ));
        }
        for m in &micro {
            m.profile.validate()?;
        }
        let p = TwoScalePotential {
            name: name.into(),
            v_reg,
            v_sing,
            micro,
            epsilon,
            j_max,
        };
        p.support()?;
        Ok(p)
    }

    pub fn free() -> Self {
        TwoScalePotential {
            name: "free".into(),
            v_reg: PiecewiseSmoothFn::zero(),
            v_sing: SingularPart::empty(),
            micro: Vec::new(),
            epsilon: 1.0,
            j_max: DEFAULT_J_MAX,
        }
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::ParamOutOfRange(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        let mut p = self.clone();
        p.epsilon = epsilon;
        Ok(p)
    }

    /// The y-averaged potential V0 (microstructure dropped).
    pub fn homogenized(&self) -> Self {
        let mut p = self.clone();
        p.micro.clear();
        p.name = format!("{}:hom", self.name);
        p
    }

    pub fn has_microstructure(&self) -> bool {
        self.micro.iter().any(|m| !m.envelope.is_identically_zero())
    }

    /// Whether q is real: q_{-j} = conj(q_j), checked at sample points of the support.
    pub fn is_real(&self) -> bool {
        if self
            .micro
            .iter()
            .all(|m| m.envelope.is_real() && m.profile.is_real())
        {
            return true;
        }
        let Ok(Some((a, b))) = self.support() else {
            return true;
        };
        let n = 97;
        (0..n).all(|i| {
            let x = a + (b - a) * (i as f64 + 0.5) / n as f64;
            let Ok(jets) = self.mode_jets(x, Side::Right) else {
                return false;
            };
            jets.iter().all(|(j, q)| {
                let partner = jets
                    .iter()
                    .find(|(m, _)| *m == -*j)
                    .map(|(_, v)| v[0])
                    .unwrap_or_default();
                (q[0] - partner.conj()).norm() <= 1e-12 * (1.0 + q[0].norm())
            })
        })
    }

    /// Whether the truncation at `j_max` keeps every mode.
    pub fn modes_exact(&self) -> bool {
        self.micro
            .iter()
            .all(|m| m.profile.bandwidth().is_some_and(|b| b <= self.j_max))
    }

    /// Fourier modes q_j(x) for 0 < |j| <= j_max.
    pub fn modes(&self) -> Vec<FourierMode> {
        let mut out: Vec<FourierMode> = Vec::new();
        for m in &self.micro {
            for (j, c) in m.profile.modes(self.j_max) {
                let f = m.envelope.scale(c);
                match out.iter_mut().find(|fm| fm.j == j) {
                    Some(fm) => fm.coeff = fm.coeff.add(&f),
                    None => out.push(FourierMode { j, coeff: f }),
                }
            }
        }
        out.sort_by_key(|m| m.j);
        out
    }

    /// Values and derivatives of every retained q_j at x.
    pub fn mode_jets(&self, x: f64, side: Side) -> Result<ModeJets> {
        let mut out: ModeJets = Vec::new();
        for m in &self.micro {
            let env = m.envelope.eval_jet(x, side)?;
            if env.iter().all(|v| v.norm() == 0.0) {
                continue;
            }
            for (j, c) in m.profile.modes(self.j_max) {
                let jet = [c * env[0], c * env[1], c * env[2], c * env[3]];
                match out.iter_mut().find(|(jj, _)| *jj == j) {
                    Some((_, acc)) => {
                        for (a, b) in acc.iter_mut().zip(jet.iter()) {
                            *a += b;
                        }
                    }
                    None => out.push((j, jet)),
                }
            }
        }
        out.sort_by_key(|(j, _)| *j);
        Ok(out)
    }

    /// Sum over retained j of |q_j(x)|^2 / j^power.
    pub fn mode_power_sum(&self, x: f64, side: Side, power: i32) -> Result<f64> {
        Ok(self
            .mode_jets(x, side)?
            .iter()
            .map(|(j, q)| q[0].norm_sqr() / (*j as f64).abs().powi(power))
            .sum())
    }

    /// Truncation tail of sum |c_j|/|j|^power, weighted by envelope size at x.
    pub fn tail_estimate(&self, x: f64, side: Side, power: f64) -> Result<f64> {
        let mut t = 0.0;
        for m in &self.micro {
            let env = m.envelope.evaluate(x, side)?.norm();
            if env > 0.0 {
                t += env * m.profile.tail(self.j_max, power);
            }
        }
        Ok(t)
    }

    /// Largest truncation tail of sum |c_j|/|j|^power over all micro terms, per unit envelope.
    pub fn profile_tail(&self, power: f64) -> f64 {
        self.micro
            .iter()
            .map(|m| m.profile.tail(self.j_max, power))
            .fold(0.0, f64::max)
    }

    /// Exact microstructure q(x, x/eps), no truncation.
    pub fn q_exact(&self, x: f64, side: Side) -> Result<f64> {
        let mut s = 0.0;
        let y = x / self.epsilon;
        for m in &self.micro {
            let env = m.envelope.evaluate(x, side)?;
            if env.norm() == 0.0 {
                continue;
            }
            s += (env * m.profile.value(y, side)?).re;
        }
        Ok(s)
    }

    /// Truncated Fourier sum of q at x, with a truncation diagnostic.
    pub fn sample_microstructure(&self, x: f64, side: Side) -> Result<MicroSample> {
        let y = x / self.epsilon;
        let mut v = Complex64::new(0.0, 0.0);
        let mut tail = 0.0;
        for m in &self.micro {
            let env = m.envelope.evaluate(x, side)?;
            if env.norm() == 0.0 {
                continue;
            }
            v += env * m.profile.partial_sum(y, self.j_max);
            if m.profile.bandwidth().is_none_or(|b| b > self.j_max) {
                // partial sums of a jump function: error ~ 2/(pi J sin(pi d)) at distance d from a jump
                let d = m.profile.distance_to_jump(y).max(1e-300);
                tail +=
                    2.0 * env.norm() / (PI * self.j_max as f64 * (PI * d).sin().abs().max(1e-300));
            }
        }
        Ok(MicroSample {
            value: v.re,
            imag_residual: v.im,
            tail_estimate: tail,
            warning: tail > DEFAULT_TAIL_TOL,
        })
    }

    /// Regular part of V0 at x.
    pub fn v_reg_value(&self, x: f64, side: Side) -> Result<f64> {
        Ok(self.v_reg.evaluate(x, side)?.re)
    }

    /// Everything except the delta spikes: V_reg(x) + q(x, x/eps).
    pub fn smooth_value(&self, x: f64, side: Side) -> Result<f64> {
        Ok(self.v_reg_value(x, side)? + self.q_exact(x, side)?)
    }

    /// The interface set: spike locations and envelope breakpoints, sorted.
    pub fn interfaces(&self) -> Vec<Interface> {
        let mut xs: Vec<f64> = self.v_sing.spikes().iter().map(|s| s.x).collect();
        for m in &self.micro {
            xs.extend_from_slice(m.envelope.breakpoints());
        }
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        xs.dedup();
        xs.into_iter()
            .map(|x| Interface {
                x,
                c: self.v_sing.strength_at(x),
            })
            .collect()
    }

    /// Smallest closed interval containing all of the potential.
    pub fn support(&self) -> Result<Option<(f64, f64)>> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut extend = |s: Option<(f64, f64)>| {
            if let Some((a, b)) = s {
                lo = lo.min(a);
                hi = hi.max(b);
            }
        };
        extend(self.v_reg.support_or_empty()?);
        for s in self.v_sing.spikes() {
            extend(Some((s.x, s.x)));
        }
        for m in &self.micro {
            extend(m.envelope.support_or_empty()?);
        }
        Ok(if lo <= hi { Some((lo, hi)) } else { None })
    }

    /// Locations x where some profile jumps, inside the open support of its envelope.
    pub fn profile_jump_locations(&self) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for m in &self.micro {
            let jumps = m.profile.jump_points();
            if jumps.is_empty() {
                continue;
            }
            let Some((a, b)) = m.envelope.support_or_empty()? else {
                continue;
            };
            // profile jumps where x/eps + shift hits a jump of h; jump_points already include the shift
            let n0 = (a / self.epsilon).floor() as i64 - 1;
            let n1 = (b / self.epsilon).ceil() as i64 + 1;
            for n in n0..=n1 {
                for &yd in &jumps {
                    let x = self.epsilon * (n as f64 + yd);
                    if x > a && x < b {
                        out.push(x);
                    }
                }
            }
        }
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.dedup();
        Ok(out)
    }

    /// Breakpoints of all pieces (regular part and envelopes), sorted.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut xs: Vec<f64> = self.v_reg.breakpoints().to_vec();
        for m in &self.micro {
            xs.extend_from_slice(m.envelope.breakpoints());
        }
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        xs.dedup();
        xs
    }

    /// Rough size of the potential: L1 norm of the regular and oscillatory parts plus spike strengths.
    pub fn l1_size(&self) -> f64 {
        let spikes: f64 = self.v_sing.spikes().iter().map(|s| s.c.abs()).sum();
        let Ok(Some((a, b))) = self.support() else {
            return spikes;
        };
        let n = 4000;
        let h = (b - a) / n as f64;
        let mut s = 0.0;
        for i in 0..n {
            let x = a + (i as f64 + 0.5) * h;
            s += self
                .smooth_value(x, Side::Right)
                .map(f64::abs)
                .unwrap_or(0.0)
                * h;
        }
        spikes + s
    }

    /// Sampled check of V >= 0. Only a diagnostic: examples with sign-changing
    /// microstructure are accepted.
    pub fn nonnegativity_check(&self, samples: usize) -> NonnegativityReport {
        let spikes_nonnegative = self.v_sing.spikes().iter().all(|s| s.c >= 0.0);
        let mut min_value = 0.0;
        let mut argmin = 0.0;
        if let Ok(Some((a, b))) = self.support() {
            let n = samples.max(2);
            for i in 0..n {
                let x = a + (b - a) * (i as f64 + 0.5) / n as f64;
                if let Ok(v) = self.smooth_value(x, Side::Right) {
                    if v < min_value {
                        min_value = v;
                        argmin = x;
                    }
                }
            }
        }
        NonnegativityReport {
            min_value,
            argmin,
            spikes_nonnegative,
            nonnegative: spikes_nonnegative && min_value >= 0.0,
        }
    }
}
