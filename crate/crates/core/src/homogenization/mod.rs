//! Corrected homogenization of the transmission coefficient.
//!
//! For V = V0 + q(x, x/eps) the transmission coefficient behaves like
//! t0_hom + eps t1_eps + eps^2 (t2_hom + t2_eps + t2_cross) + O(eps^3), where
//! t1_eps and t2_eps come from the interfaces (spikes and envelope
//! discontinuities), t2_hom from the bulk, and t2_cross from the microstructure
//! acting on the order-eps interface corrector. t2_cross vanishes when q is
//! continuous in x. [`Homogenizer`] caches the eps-independent data
//! (distorted waves of V0, one-sided interface data, t2_hom) so that sweeps
//! over eps are cheap.

pub mod born;
pub mod fields;
pub mod interface;
pub mod norm;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{Side, TwoScalePotential};
use crate::propagator::SolverOptions;
use crate::quadrature::{PanelRule, DEFAULT_ORDER};
use crate::scattering::{JostSolutions, Wave};

pub use born::{born_terms, BornTerms, Perturbation, BORN_PANEL};
pub use fields::{BulkValues, ExpansionField, FieldErrors};
pub use interface::{
    corrector_coeffs, CorrectorField, InterfaceJumpData, InterfacePoint, ModeJump,
};
pub use norm::{microstructure_norm, q_norm_estimate, NormEstimate, NormOptions};

/// Longest panel for the bulk integral of t2_hom.
pub const HOM_PANEL: f64 = 0.05;

/// Expansion coefficients of t at one (k, eps) with truncation diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectorSet {
    pub k: f64,
    pub epsilon: f64,
    pub t0_hom: Complex64,
    pub t1_eps: Complex64,
    pub t2_hom: Complex64,
    pub t2_eps: Complex64,
    /// Interaction of q_eps with the order-eps interface corrector; zero for continuous q.
    pub t2_cross: Complex64,
    pub j_max: usize,
    /// Bound on the omitted |l| > J part of t1_eps.
    pub t1_tail: f64,
    /// Bound on the omitted |l| > J part of t2_eps.
    pub t2_tail: f64,
    /// Estimate of the omitted |j| > J part of t2_hom.
    pub t2_hom_tail: f64,
    /// Difference between two quadrature resolutions of t2_hom.
    pub t2_hom_quadrature: f64,
}

impl CorrectorSet {
    /// t0_hom + eps t1_eps.
    pub fn order1(&self) -> Complex64 {
        self.t0_hom + self.epsilon * self.t1_eps
    }

    /// t0_hom + eps t1_eps + eps^2 (t2_hom + t2_eps + t2_cross).
    pub fn order2(&self) -> Complex64 {
        self.order1() + self.epsilon * self.epsilon * (self.t2_hom + self.t2_eps + self.t2_cross)
    }

    /// The order-2 truncation without t2_cross.
    pub fn order2_without_cross(&self) -> Complex64 {
        self.order1() + self.epsilon * self.epsilon * (self.t2_hom + self.t2_eps)
    }

    /// CSV header matching [`CorrectorSet::csv_row`].
    pub fn csv_header() -> &'static str {
        "epsilon,k,re_t0_hom,im_t0_hom,re_t1_eps,im_t1_eps,re_t2_hom,im_t2_hom,re_t2_eps,im_t2_eps,re_t2_cross,im_t2_cross,j_max,t1_tail,t2_tail,t2_hom_tail,t2_hom_quadrature"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{},{:.6e},{:.6e},{:.6e},{:.6e}",
            self.epsilon,
            self.k,
            self.t0_hom.re,
            self.t0_hom.im,
            self.t1_eps.re,
            self.t1_eps.im,
            self.t2_hom.re,
            self.t2_hom.im,
            self.t2_eps.re,
            self.t2_eps.im,
            self.t2_cross.re,
            self.t2_cross.im,
            self.j_max,
            self.t1_tail,
            self.t2_tail,
            self.t2_hom_tail,
            self.t2_hom_quadrature
        )
    }
}

/// The eps-independent part of the expansion for one potential family at one k.
#[derive(Debug, Clone)]
pub struct Homogenizer {
    potential: TwoScalePotential,
    background: JostSolutions,
    t0: Complex64,
    interfaces: Vec<InterfacePoint>,
    t2_hom: Complex64,
    t2_hom_tail: f64,
    t2_hom_quadrature: f64,
}

/// Sum over j_max < |j| <= j_max + 20000 of |c_j|^2 / j^2 for an infinite profile.
fn squared_mode_tail(profile: &crate::potential::PeriodicProfile, j_max: usize) -> f64 {
    if profile.bandwidth().is_some_and(|b| b <= j_max) {
        return 0.0;
    }
    let mut s = 0.0;
    for j in (j_max as i64 + 1)..=(j_max as i64 + 20_000) {
        let jf = (j * j) as f64;
        s += (profile.coefficient(j).norm_sqr() + profile.coefficient(-j).norm_sqr()) / jf;
    }
    s
}

impl Homogenizer {
    pub fn new(p: &TwoScalePotential, k: f64, opts: &SolverOptions) -> Result<Self> {
        if k == 0.0 || !k.is_finite() {
            return Err(Error::InvalidInput(
                "the corrector expansion needs a finite k != 0".into(),
            ));
        }
        let v0 = p.homogenized();
        let background = JostSolutions::new(&v0, k, opts)?;
        let t0 = background.t()?;
        let interfaces = p
            .interfaces()
            .iter()
            .map(|i| InterfacePoint::build(p, &background, i.x))
            .collect::<Result<Vec<_>>>()?;
        let mut h = Homogenizer {
            potential: p.clone(),
            background,
            t0,
            interfaces,
            t2_hom: Complex64::new(0.0, 0.0),
            t2_hom_tail: 0.0,
            t2_hom_quadrature: 0.0,
        };
        let coarse = h.bulk_integral(HOM_PANEL)?;
        let fine = h.bulk_integral(0.5 * HOM_PANEL)?;
        let pref = Complex64::new(0.0, 1.0 / (8.0 * k * PI * PI));
        h.t2_hom = pref * fine.0;
        h.t2_hom_quadrature = (pref * (fine.0 - coarse.0)).norm();
        h.t2_hom_tail = fine.1 / (8.0 * k.abs() * PI * PI);
        Ok(h)
    }

    /// int sum_j |q_j|^2 / j^2 e+ e- and the matching truncation tail.
    fn bulk_integral(&self, panel: f64) -> Result<(Complex64, f64)> {
        let breaks = self.integration_breaks()?;
        if breaks.len() < 2 {
            return Ok((Complex64::new(0.0, 0.0), 0.0));
        }
        let rule = PanelRule::new(&breaks, panel, DEFAULT_ORDER)?;
        let nodes = rule.nodes();
        let ep = self.background.eval_points(Wave::DistortedPlus, nodes)?;
        let em = self.background.eval_points(Wave::DistortedMinus, nodes)?;
        let p = &self.potential;
        let mut vals = Vec::with_capacity(nodes.len());
        let mut tail_vals = Vec::with_capacity(nodes.len());
        let tails: Vec<f64> = p
            .micro
            .iter()
            .map(|m| squared_mode_tail(&m.profile, p.j_max))
            .collect();
        for (i, &x) in nodes.iter().enumerate() {
            let ee = ep[i].u * em[i].u;
            vals.push(ee * p.mode_power_sum(x, Side::Left, 2)?);
            let mut t = 0.0;
            for (m, tail) in p.micro.iter().zip(&tails) {
                if *tail > 0.0 {
                    t += m.envelope.evaluate(x, Side::Left)?.norm_sqr() * tail;
                }
            }
            tail_vals.push(Complex64::new(t * ee.norm(), 0.0));
        }
        Ok((rule.integrate(&vals), rule.integrate(&tail_vals).re))
    }

    /// Overall micro support split at envelope breakpoints, spikes and V0 nodes.
    fn integration_breaks(&self) -> Result<Vec<f64>> {
        let p = &self.potential;
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
        breaks.extend(p.breakpoints());
        breaks.extend(p.v_sing.spikes().iter().map(|s| s.x));
        breaks.extend(self.background.propagator().node_positions());
        breaks.retain(|x| *x >= lo && *x <= hi);
        breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        breaks.dedup();
        Ok(breaks)
    }

    pub fn k(&self) -> f64 {
        self.background.k()
    }

    pub fn potential(&self) -> &TwoScalePotential {
        &self.potential
    }

    /// Stored Jost solutions of the homogenized potential V0.
    pub fn background(&self) -> &JostSolutions {
        &self.background
    }

    pub fn interfaces(&self) -> &[InterfacePoint] {
        &self.interfaces
    }

    pub fn t0_hom(&self) -> Complex64 {
        self.t0
    }

    pub fn t2_hom(&self) -> Complex64 {
        self.t2_hom
    }

    pub fn t1_eps(&self, eps: f64) -> Complex64 {
        let k = self.k();
        self.interfaces.iter().map(|ip| ip.t1_eps(k, eps)).sum()
    }

    pub fn t2_eps(&self, eps: f64) -> Complex64 {
        let k = self.k();
        self.interfaces.iter().map(|ip| ip.t2_eps(k, eps)).sum()
    }

    /// Value of the summed order-eps corrector at each interface point.
    pub fn first_corrector_values(&self, eps: f64) -> Vec<Complex64> {
        let first: Vec<CorrectorField> = self
            .interfaces
            .iter()
            .filter_map(|ip| ip.first_corrector(self.k(), self.t0, eps).ok())
            .collect();
        self.interfaces
            .iter()
            .map(|ip| first.iter().map(|c| c.value_at(ip)).sum())
            .collect()
    }

    pub fn t2_cross(&self, eps: f64) -> Complex64 {
        let k = self.k();
        self.interfaces
            .iter()
            .zip(self.first_corrector_values(eps))
            .map(|(ip, u1)| ip.t2_cross(k, eps, u1))
            .sum()
    }

    pub fn correctors(&self, eps: f64) -> CorrectorSet {
        let k = self.k();
        let (t1_tail, t2_tail) = self
            .interfaces
            .iter()
            .map(|ip| ip.truncation_tails(k))
            .fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
        CorrectorSet {
            k,
            epsilon: eps,
            t0_hom: self.t0,
            t1_eps: self.t1_eps(eps),
            t2_hom: self.t2_hom,
            t2_eps: self.t2_eps(eps),
            t2_cross: self.t2_cross(eps),
            j_max: self.potential.j_max,
            t1_tail,
            t2_tail,
            t2_hom_tail: self.t2_hom_tail,
            t2_hom_quadrature: self.t2_hom_quadrature,
        }
    }

    fn interface(&self, a: f64) -> Result<&InterfacePoint> {
        self.interfaces
            .iter()
            .find(|ip| ip.a == a)
            .ok_or_else(|| Error::InvalidInput(format!("x = {a} is not an interface point")))
    }

    pub fn interface_jump_data(&self, a: f64, eps: f64) -> Result<InterfaceJumpData> {
        Ok(self.interface(a)?.jump_data(eps))
    }

    /// Order-eps interface correctors, one per interface point.
    pub fn first_correctors(&self, eps: f64) -> Result<Vec<CorrectorField>> {
        self.interfaces
            .iter()
            .map(|ip| ip.first_corrector(self.k(), self.t0, eps))
            .collect()
    }

    /// Order-eps^2 interface correctors, one per interface point.
    pub fn second_correctors(&self, eps: f64) -> Result<Vec<CorrectorField>> {
        self.interfaces
            .iter()
            .zip(self.first_corrector_values(eps))
            .map(|(ip, u1)| ip.second_corrector(self.k(), self.t0, eps, u1))
            .collect()
    }

    /// Born terms t1[q_eps] and t2[q_eps, q_eps] about V0, with per-period panels.
    pub fn born(&self, eps: f64) -> Result<BornTerms> {
        let pe = self.potential.with_epsilon(eps)?;
        let mut breaks = self.integration_breaks()?;
        if breaks.is_empty() {
            return Ok(BornTerms {
                t1: Complex64::new(0.0, 0.0),
                t2: Complex64::new(0.0, 0.0),
                nodes: 0,
            });
        }
        breaks.extend(pe.profile_jump_locations()?);
        let q = |x: f64| Complex64::new(pe.q_exact(x, Side::Left).unwrap_or(f64::NAN), 0.0);
        born_terms(
            &self.background,
            &Perturbation {
                q: &q,
                breaks,
                max_panel: BORN_PANEL.min(0.5 * eps),
            },
        )
    }
}

/// Transmission coefficient of the homogenized potential V0.
pub fn t0_hom(p: &TwoScalePotential, k: f64, opts: &SolverOptions) -> Result<Complex64> {
    Ok(crate::scattering::scattering_coefficients(&p.homogenized(), k, opts)?.t)
}

/// All expansion coefficients of p at its own eps.
pub fn correctors(p: &TwoScalePotential, k: f64, opts: &SolverOptions) -> Result<CorrectorSet> {
    Ok(Homogenizer::new(p, k, opts)?.correctors(p.epsilon))
}

/// t1[q_eps] about V0 at the eps stored in p.
pub fn born_t1(p: &TwoScalePotential, k: f64, opts: &SolverOptions) -> Result<Complex64> {
    Ok(Homogenizer::new(p, k, opts)?.born(p.epsilon)?.t1)
}

/// t2[q_eps, q_eps] about V0 at the eps stored in p.
pub fn born_t2(p: &TwoScalePotential, k: f64, opts: &SolverOptions) -> Result<Complex64> {
    Ok(Homogenizer::new(p, k, opts)?.born(p.epsilon)?.t2)
}
