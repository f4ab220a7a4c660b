//! Quadrature: composite Gauss-Legendre panels with cumulative integrals,
//! and adaptive Gauss-Kronrod.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Default number of Gauss-Legendre nodes per panel.
pub const DEFAULT_ORDER: usize = 16;

/// Gauss-Legendre nodes and weights on [-1, 1], nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d != 0.0 {
            dp = d;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// P_n(z) and P_n'(z).
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Integrals of the Lagrange basis on the reference nodes:
/// `s[i][j] = int_{-1}^{x_i} l_j(s) ds`.
fn integration_matrix(x: &[f64]) -> Vec<Vec<f64>> {
    let n = x.len();
    let (gx, gw) = gauss_legendre(n);
    let basis = |j: usize, s: f64| -> f64 {
        let mut v = 1.0;
        for (m, &xm) in x.iter().enumerate() {
            if m != j {
                v *= (s - xm) / (x[j] - xm);
            }
        }
        v
    };
    let mut out = vec![vec![0.0; n]; n];
    for (i, &xi) in x.iter().enumerate() {
        let half = 0.5 * (xi + 1.0);
        for (j, o) in out[i].iter_mut().enumerate() {
            *o = gx
                .iter()
                .zip(gw.iter())
                .map(|(&g, &wg)| wg * half * basis(j, -1.0 + half * (g + 1.0)))
                .sum();
        }
    }
    out
}

/// A composite Gauss-Legendre rule on [breaks[0], breaks[last]].
///
/// Panels never straddle a break, so integrands may jump or kink there.
#[derive(Debug, Clone)]
pub struct PanelRule {
    order: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// Panel end points, length `panels + 1`.
    edges: Vec<f64>,
    /// Reference integration matrix.
    smat: Vec<Vec<f64>>,
}

impl PanelRule {
    /// `breaks` must be sorted; each gap is split into equal panels no longer than `max_len`.
    pub fn new(breaks: &[f64], max_len: f64, order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::Quadrature("panel order must be positive".into()));
        }
        if !(max_len > 0.0) {
            return Err(Error::Quadrature("panel length must be positive".into()));
        }
        if breaks.iter().any(|b| !b.is_finite()) {
            return Err(Error::Quadrature("breaks must be finite".into()));
        }
        if breaks.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Quadrature("breaks must be sorted".into()));
        }
        let mut edges = Vec::new();
        for w in breaks.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b <= a {
                continue;
            }
            let n = ((b - a) / max_len).ceil().max(1.0) as usize;
            if edges.is_empty() {
                edges.push(a);
            }
            for i in 1..=n {
                edges.push(if i == n {
                    b
                } else {
                    a + (b - a) * i as f64 / n as f64
                });
            }
        }
        let (gx, gw) = gauss_legendre(order);
        let mut nodes = Vec::with_capacity(order * edges.len());
        let mut weights = Vec::with_capacity(order * edges.len());
        for e in edges.windows(2) {
            let (a, b) = (e[0], e[1]);
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (x, w) in gx.iter().zip(gw.iter()) {
                nodes.push(mid + half * x);
                weights.push(half * w);
            }
        }
        Ok(PanelRule {
            order,
            nodes,
            weights,
            edges,
            smat: integration_matrix(&gx),
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn num_panels(&self) -> usize {
        self.edges.len().saturating_sub(1)
    }

    pub fn integrate(&self, values: &[Complex64]) -> Complex64 {
        assert_eq!(values.len(), self.nodes.len());
        values
            .iter()
            .zip(self.weights.iter())
            .map(|(v, w)| v * w)
            .sum()
    }

    /// Integral over each panel.
    pub fn panel_integrals(&self, values: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(values.len(), self.nodes.len());
        values
            .chunks(self.order)
            .zip(self.weights.chunks(self.order))
            .map(|(v, w)| v.iter().zip(w).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `int_{start}^{x_i} f` at every node.
    pub fn cumulative_left(&self, values: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(values.len(), self.nodes.len());
        let n = self.order;
        let mut out = Vec::with_capacity(values.len());
        let mut acc = Complex64::new(0.0, 0.0);
        for (p, v) in values.chunks(n).enumerate() {
            let half = 0.5 * (self.edges[p + 1] - self.edges[p]);
            for i in 0..n {
                let partial: Complex64 = (0..n).map(|j| v[j] * self.smat[i][j]).sum();
                out.push(acc + partial * half);
            }
            acc += v
                .iter()
                .zip(&self.weights[p * n..(p + 1) * n])
                .map(|(a, b)| a * b)
                .sum::<Complex64>();
        }
        out
    }

    /// `int_{x_i}^{end} f` at every node.
    pub fn cumulative_right(&self, values: &[Complex64]) -> Vec<Complex64> {
        let total = self.integrate(values);
        self.cumulative_left(values)
            .into_iter()
            .map(|c| total - c)
            .collect()
    }
}

// Gauss-Kronrod 7-15 abscissae (non-negative half) and weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: FnMut(f64) -> Complex64>(f: &mut F, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        rk += s * WGK[j];
        if j % 2 == 1 {
            rg += s * WG[j / 2];
        }
    }
    let val = rk * h;
    let err = ((rk - rg) * h).norm();
    (val, err)
}

struct Segment {
    a: f64,
    b: f64,
    val: Complex64,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Segment {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err.total_cmp(&o.err)
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: Complex64,
    pub error: f64,
    pub evaluations: usize,
}

/// Adaptive Gauss-Kronrod integration of a complex function over [a, b].
///
/// Stops when the summed error estimate is below `max(atol, rtol |I|)`.
pub fn adaptive<F: FnMut(f64) -> Complex64>(
    mut f: F,
    a: f64,
    b: f64,
    rtol: f64,
    atol: f64,
    max_segments: usize,
) -> Result<Integral> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Quadrature(
            "integration limits must be finite".into(),
        ));
    }
    if a == b {
        return Ok(Integral {
            value: Complex64::new(0.0, 0.0),
            error: 0.0,
            evaluations: 0,
        });
    }
    let mut heap = BinaryHeap::new();
    let (v, e) = gk15(&mut f, a, b);
    let mut total = v;
    let mut err = e;
    let mut evals = 15;
    heap.push(Segment {
        a,
        b,
        val: v,
        err: e,
    });
    while err > atol.max(rtol * total.norm()) {
        if heap.len() >= max_segments {
            return Err(Error::Quadrature(format!(
                "no convergence on [{a}, {b}] with {max_segments} segments (error {err:e})"
            )));
        }
        let s = heap.pop().expect("heap is non-empty");
        let m = 0.5 * (s.a + s.b);
        let (v1, e1) = gk15(&mut f, s.a, m);
        let (v2, e2) = gk15(&mut f, m, s.b);
        evals += 30;
        total += v1 + v2 - s.val;
        err += e1 + e2 - s.err;
        heap.push(Segment {
            a: s.a,
            b: m,
            val: v1,
            err: e1,
        });
        heap.push(Segment {
            a: m,
            b: s.b,
            val: v2,
            err: e2,
        });
        if !total.is_finite() {
            return Err(Error::Quadrature("non-finite integrand".into()));
        }
    }
    // re-sum to shed accumulated rounding from the running updates
    let value = heap.iter().map(|s| s.val).sum();
    let error = heap.iter().map(|s| s.err).sum();
    Ok(Integral {
        value,
        error,
        evaluations: evals,
    })
}

/// Adaptive integration split at the given interior points.
pub fn adaptive_split<F: FnMut(f64) -> Complex64>(
    mut f: F,
    points: &[f64],
    rtol: f64,
    atol: f64,
) -> Result<Integral> {
    let mut out = Integral {
        value: Complex64::new(0.0, 0.0),
        error: 0.0,
        evaluations: 0,
    };
    let pieces = points.len().saturating_sub(1).max(1) as f64;
    for w in points.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let r = adaptive(&mut f, w[0], w[1], rtol, atol / pieces, 100_000)?;
        out.value += r.value;
        out.error += r.error;
        out.evaluations += r.evaluations;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gauss_legendre_is_exact_on_polynomials() {
        for n in [1, 2, 5, 16, 33] {
            let (x, w) = gauss_legendre(n);
            assert_abs_diff_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-14);
            for deg in 0..(2 * n) {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 {
                    0.0
                } else {
                    2.0 / (deg as f64 + 1.0)
                };
                assert_abs_diff_eq!(q, exact, epsilon = 1e-13);
            }
            assert!(x.windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn panel_rule_respects_breaks() {
        let r = PanelRule::new(&[-1.0, 0.0, 0.3, 2.0], 0.25, 8).unwrap();
        for b in [0.0, 0.3] {
            assert!(r.edges().contains(&b));
        }
        assert!(r.edges().windows(2).all(|e| e[1] - e[0] <= 0.25 + 1e-15));
        // a step function integrates exactly when the jump is a break
        let vals: Vec<Complex64> = r
            .nodes()
            .iter()
            .map(|&x| Complex64::new(if x < 0.3 { 1.0 } else { -2.0 }, 0.0))
            .collect();
        assert_abs_diff_eq!(r.integrate(&vals).re, 1.3 - 2.0 * 1.7, epsilon = 1e-13);
    }

    #[test]
    fn cumulative_integrals_of_an_exponential() {
        let k = 7.0;
        let r = PanelRule::new(&[0.0, 1.0], 0.1, 16).unwrap();
        let f = |x: f64| Complex64::from_polar(1.0, k * x);
        let vals: Vec<Complex64> = r.nodes().iter().map(|&x| f(x)).collect();
        let left = r.cumulative_left(&vals);
        let right = r.cumulative_right(&vals);
        let i = Complex64::i();
        for (j, &x) in r.nodes().iter().enumerate() {
            let exact_l = (f(x) - 1.0) / (i * k);
            let exact_r = (f(1.0) - f(x)) / (i * k);
            assert!((left[j] - exact_l).norm() < 1e-13);
            assert!((right[j] - exact_r).norm() < 1e-13);
        }
    }

    #[test]
    fn adaptive_handles_peaks() {
        let f = |x: f64| Complex64::new(1.0 / (1e-4 + x * x), 0.0);
        let r = adaptive(f, -1.0, 1.0, 1e-12, 1e-14, 10_000).unwrap();
        let exact = 2.0 * (1.0 / 1e-2) * (1.0f64 / 1e-2).atan();
        assert!((r.value.re - exact).abs() < 1e-9 * exact);
        let s = adaptive_split(
            |x| Complex64::new(x.abs(), 0.0),
            &[-1.0, 0.0, 2.0],
            1e-13,
            1e-15,
        )
        .unwrap();
        assert_abs_diff_eq!(s.value.re, 2.5, epsilon = 1e-13);
    }
}
