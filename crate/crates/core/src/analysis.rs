//! Sweeps over the period eps, error curves against the corrector models,
//! and log-log slope fits.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::homogenization::{CorrectorSet, Homogenizer};
use crate::potential::TwoScalePotential;
use crate::propagator::SolverOptions;
use crate::scattering::scattering_coefficients;

/// Default sweep grid: 40 log-spaced points in [1/200, 1/10].
pub const DEFAULT_EPS_MAX: f64 = 0.1;
pub const DEFAULT_EPS_MIN: f64 = 0.005;
pub const DEFAULT_EPS_COUNT: usize = 40;
/// Direct solves whose flux residual exceeds this are flagged as failed rows.
pub const FLUX_CHECK: f64 = 1e-6;

/// Which truncation of the expansion the direct t is compared with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorModel {
    /// t - t0_hom.
    VsT0,
    /// t - t0_hom - eps t1_eps.
    VsOrder1,
    /// t - t0_hom - eps t1_eps - eps^2 (t2_hom + t2_eps + t2_cross).
    VsOrder2,
    /// The order-2 error without t2_cross; O(eps^2) when q jumps.
    VsOrder2NoCross,
}

impl ErrorModel {
    pub const ALL: [ErrorModel; 4] = [
        ErrorModel::VsT0,
        ErrorModel::VsOrder1,
        ErrorModel::VsOrder2,
        ErrorModel::VsOrder2NoCross,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            ErrorModel::VsT0 => "vs_t0",
            ErrorModel::VsOrder1 => "vs_order1",
            ErrorModel::VsOrder2 => "vs_order2",
            ErrorModel::VsOrder2NoCross => "vs_order2_no_cross",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        ErrorModel::ALL
            .into_iter()
            .find(|m| m.label() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown error model `{s}`")))
    }

    pub fn error(&self, t: Complex64, c: &CorrectorSet) -> Complex64 {
        match self {
            ErrorModel::VsT0 => t - c.t0_hom,
            ErrorModel::VsOrder1 => t - c.order1(),
            ErrorModel::VsOrder2 => t - c.order2(),
            ErrorModel::VsOrder2NoCross => t - c.order2_without_cross(),
        }
    }
}

/// One eps of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub t_direct: Complex64,
    pub flux_residual: f64,
    pub correctors: CorrectorSet,
    pub errors: BTreeMap<ErrorModel, Complex64>,
    /// Set when the direct solve failed or did not pass its checks.
    pub failure: Option<String>,
}

impl SweepRow {
    pub fn ok(&self) -> bool {
        self.failure.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub potential: String,
    pub k: f64,
    /// Sorted by decreasing eps.
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// (eps, |error|) pairs of one model over the successful rows.
    pub fn error_pairs(&self, model: ErrorModel) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.ok())
            .filter_map(|r| r.errors.get(&model).map(|e| (r.epsilon, e.norm())))
            .collect()
    }

    /// CSV with one row per eps; complex values split into Re/Im columns.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W, tag: &str) -> Result<()> {
        let models: Vec<ErrorModel> = self
            .rows
            .first()
            .map(|r| r.errors.keys().copied().collect())
            .unwrap_or_default();
        let mut header = String::from("epsilon,re_t,im_t,flux_residual,");
        header.push_str(
            &CorrectorSet::csv_header()
                .split(',')
                .skip(1)
                .collect::<Vec<_>>()
                .join(","),
        );
        for m in &models {
            header.push_str(&format!(",re_err_{0},im_err_{0},abs_err_{0}", m.label()));
        }
        header.push_str(",status,tag");
        writeln!(w, "{header}")?;
        for r in &self.rows {
            let corr = r.correctors.csv_row();
            let corr_tail = corr.split_once(',').map(|x| x.1).unwrap_or("");
            let mut line = format!(
                "{:.17e},{:.17e},{:.17e},{:.3e},{}",
                r.epsilon, r.t_direct.re, r.t_direct.im, r.flux_residual, corr_tail
            );
            for m in &models {
                let e = r
                    .errors
                    .get(m)
                    .copied()
                    .unwrap_or(Complex64::new(f64::NAN, f64::NAN));
                line.push_str(&format!(",{:.17e},{:.17e},{:.17e}", e.re, e.im, e.norm()));
            }
            let status = match &r.failure {
                None => "ok".to_string(),
                Some(s) => format!("failed: {}", s.replace(',', ";")),
            };
            line.push_str(&format!(",{status},{tag}"));
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// `count` log-spaced values from `eps_max` down to `eps_min`.
pub fn geometric_grid(eps_max: f64, eps_min: f64, count: usize) -> Result<Vec<f64>> {
    if !(eps_min > 0.0 && eps_max > eps_min) || count < 2 {
        return Err(Error::InvalidInput(format!(
            "need 0 < eps_min < eps_max and at least 2 points, got [{eps_min}, {eps_max}] x {count}"
        )));
    }
    let (a, b) = (eps_max.ln(), eps_min.ln());
    Ok((0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect())
}

/// Direct t and corrector models at every eps, computed in parallel.
pub fn epsilon_sweep(
    p: &TwoScalePotential,
    k: f64,
    epsilons: &[f64],
    models: &[ErrorModel],
    opts: &SolverOptions,
) -> Result<SweepResult> {
    let hom = Homogenizer::new(p, k, opts)?;
    sweep_with(&hom, epsilons, models, opts)
}

/// As [`epsilon_sweep`] with a prepared [`Homogenizer`].
pub fn sweep_with(
    hom: &Homogenizer,
    epsilons: &[f64],
    models: &[ErrorModel],
    opts: &SolverOptions,
) -> Result<SweepResult> {
    if epsilons.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
        return Err(Error::InvalidInput(
            "every eps must be positive and finite".into(),
        ));
    }
    let p = hom.potential();
    let k = hom.k();
    let mut rows: Vec<SweepRow> = epsilons
        .par_iter()
        .map(|&eps| {
            let correctors = hom.correctors(eps);
            let direct = p
                .with_epsilon(eps)
                .and_then(|pe| scattering_coefficients(&pe, k, opts));
            match direct {
                Ok(sc) => {
                    let failure = (sc.flux_residual > FLUX_CHECK)
                        .then(|| format!("flux residual {:.2e}", sc.flux_residual));
                    SweepRow {
                        epsilon: eps,
                        t_direct: sc.t,
                        flux_residual: sc.flux_residual,
                        correctors,
                        errors: models
                            .iter()
                            .map(|m| (*m, m.error(sc.t, &correctors)))
                            .collect(),
                        failure,
                    }
                }
                Err(e) => SweepRow {
                    epsilon: eps,
                    t_direct: Complex64::new(f64::NAN, f64::NAN),
                    flux_residual: f64::NAN,
                    correctors,
                    errors: BTreeMap::new(),
                    failure: Some(e.to_string()),
                },
            }
        })
        .collect();
    rows.sort_by(|a, b| b.epsilon.partial_cmp(&a.epsilon).unwrap());
    rows.dedup_by(|a, b| a.epsilon == b.epsilon);
    Ok(SweepResult {
        potential: p.name.clone(),
        k,
        rows,
    })
}

/// Options of [`slope_fit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    /// Number of largest eps dropped.
    pub trim_large: usize,
    /// Number of smallest eps dropped.
    pub trim_small: usize,
    /// Errors at or below this are treated as noise and dropped.
    pub noise_floor: f64,
    /// Fit the upper envelope (maximum per log-eps bin) instead of all points.
    pub envelope: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            trim_large: 3,
            trim_small: 3,
            noise_floor: 1e-8,
            envelope: false,
        }
    }
}

impl FitOptions {
    pub fn untrimmed() -> Self {
        FitOptions {
            trim_large: 0,
            trim_small: 0,
            ..Default::default()
        }
    }
}

/// Least-squares line through (log eps, log |error|).
///
/// `slope` is d log|error| / d log eps, so an error of size eps^p has slope p.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// (largest, smallest) eps used.
    pub window: (f64, f64),
    pub points: usize,
}

/// Minimum number of points for a fit.
pub const MIN_FIT_POINTS: usize = 5;

pub fn slope_fit(pairs: &[(f64, f64)], opts: &FitOptions) -> Result<SlopeFit> {
    let mut pts: Vec<(f64, f64)> = pairs
        .iter()
        .copied()
        .filter(|(e, v)| *e > 0.0 && e.is_finite() && v.is_finite())
        .collect();
    pts.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let n = pts.len();
    if n < opts.trim_large + opts.trim_small + MIN_FIT_POINTS {
        return Err(Error::InsufficientData(format!(
            "{n} points leave fewer than {MIN_FIT_POINTS} after trimming"
        )));
    }
    let pts: Vec<(f64, f64)> = pts[opts.trim_large..n - opts.trim_small]
        .iter()
        .copied()
        .filter(|(_, v)| *v > opts.noise_floor)
        .collect();
    if pts.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData(format!(
            "only {} points above the noise floor {:e}",
            pts.len(),
            opts.noise_floor
        )));
    }
    let window = (pts[0].0, pts[pts.len() - 1].0);
    let mut xy: Vec<(f64, f64)> = pts.iter().map(|(e, v)| (e.ln(), v.ln())).collect();
    if opts.envelope {
        xy = upper_envelope(&xy);
        if xy.len() < 2 {
            return Err(Error::InsufficientData(
                "envelope has fewer than 2 bins".into(),
            ));
        }
    }
    let m = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / m;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = xy.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all eps values coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Ok(SlopeFit {
        slope,
        intercept,
        r_squared,
        window,
        points: xy.len(),
    })
}

/// Maximum of log|error| in each of max(5, n/4) equal bins of log eps.
fn upper_envelope(xy: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let lo = xy.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = xy.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let bins = (xy.len() / 4).max(MIN_FIT_POINTS);
    let width = (hi - lo) / bins as f64;
    let mut best: Vec<Option<(f64, f64)>> = vec![None; bins];
    for &(x, y) in xy {
        let b = (((x - lo) / width) as usize).min(bins - 1);
        if best[b].is_none_or(|(_, v)| y > v) {
            best[b] = Some((x, y));
        }
    }
    best.into_iter().flatten().collect()
}

/// Outcome of [`limit_indeterminacy_probe`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub order: u32,
    /// Scaled differences eps^{-order} (t - t0_hom) along each subsequence.
    pub values_a: Vec<(f64, Complex64)>,
    pub values_b: Vec<(f64, Complex64)>,
    pub cluster_a: Complex64,
    pub cluster_b: Complex64,
    /// Spread of the last values of each subsequence, used as the error bar.
    pub spread_a: f64,
    pub spread_b: f64,
    pub separated: bool,
}

/// Number of trailing values averaged into a cluster.
const CLUSTER_TAIL: usize = 3;

/// Compare eps^{-order} (t - t0_hom) along two subsequences of eps.
///
/// The clusters are the means of the last few values; they count as separated
/// when their distance exceeds three times the combined spread plus a small
/// absolute margin.
pub fn limit_indeterminacy_probe(
    p: &TwoScalePotential,
    k: f64,
    seq_a: &[f64],
    seq_b: &[f64],
    order: u32,
    opts: &SolverOptions,
) -> Result<ProbeResult> {
    if seq_a.len() < CLUSTER_TAIL || seq_b.len() < CLUSTER_TAIL {
        return Err(Error::InsufficientData(format!(
            "each subsequence needs at least {CLUSTER_TAIL} values"
        )));
    }
    let hom = Homogenizer::new(p, k, opts)?;
    let t0 = hom.t0_hom();
    let scaled = |seq: &[f64]| -> Result<Vec<(f64, Complex64)>> {
        let mut v: Vec<(f64, Complex64)> = seq
            .par_iter()
            .map(|&eps| {
                let sc = scattering_coefficients(&p.with_epsilon(eps)?, k, opts)?;
                Ok((eps, (sc.t - t0) / eps.powi(order as i32)))
            })
            .collect::<Result<_>>()?;
        v.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        Ok(v)
    };
    let values_a = scaled(seq_a)?;
    let values_b = scaled(seq_b)?;
    let cluster = |v: &[(f64, Complex64)]| -> (Complex64, f64) {
        let tail = &v[v.len() - CLUSTER_TAIL..];
        let mean = tail.iter().map(|x| x.1).sum::<Complex64>() / CLUSTER_TAIL as f64;
        let spread = tail.iter().map(|x| (x.1 - mean).norm()).fold(0.0, f64::max);
        (mean, spread)
    };
    let (cluster_a, spread_a) = cluster(&values_a);
    let (cluster_b, spread_b) = cluster(&values_b);
    let margin = 1e-6 * (1.0 + cluster_a.norm().max(cluster_b.norm()));
    let separated = (cluster_a - cluster_b).norm() > 3.0 * (spread_a + spread_b) + margin;
    Ok(ProbeResult {
        order,
        values_a,
        values_b,
        cluster_a,
        cluster_b,
        spread_a,
        spread_b,
        separated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::library;
    use std::f64::consts::PI;

    fn synthetic(f: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
        geometric_grid(0.1, 0.005, 40)
            .unwrap()
            .into_iter()
            .map(|e| (e, f(e)))
            .collect()
    }

    #[test]
    fn exact_power_law() {
        let fit = slope_fit(&synthetic(|e| e * e), &FitOptions::default()).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert_eq!(fit.points, 34);
    }

    #[test]
    fn constant_error_has_zero_slope() {
        let fit = slope_fit(&synthetic(|_| 0.3), &FitOptions::default()).unwrap();
        assert!(fit.slope.abs() < 1e-12);
    }

    #[test]
    fn envelope_fit_of_oscillating_error() {
        let pairs: Vec<(f64, f64)> = geometric_grid(0.1, 0.005, 400)
            .unwrap()
            .into_iter()
            .map(|e| (e, e * (2.0 * PI / e).sin().abs()))
            .collect();
        let opts = FitOptions {
            envelope: true,
            noise_floor: 0.0,
            ..Default::default()
        };
        let fit = slope_fit(&pairs, &opts).unwrap();
        assert!((fit.slope - 1.0).abs() < 0.05, "{}", fit.slope);
    }

    #[test]
    fn too_few_points() {
        let pairs = vec![(0.1, 1.0), (0.05, 0.5), (0.02, 0.2)];
        assert!(matches!(
            slope_fit(&pairs, &FitOptions::untrimmed()),
            Err(Error::InsufficientData(_))
        ));
        let floor = synthetic(|_| 1e-12);
        assert!(slope_fit(&floor, &FitOptions::default()).is_err());
    }

    #[test]
    fn grid_is_decreasing() {
        let g = geometric_grid(0.1, 0.005, 40).unwrap();
        assert_eq!(g.len(), 40);
        assert!((g[0] - 0.1).abs() < 1e-15 && (g[39] - 0.005).abs() < 1e-15);
        assert!(g.windows(2).all(|w| w[1] < w[0]));
        assert!(geometric_grid(0.1, 0.2, 5).is_err());
    }

    #[test]
    fn sweep_rows_are_ordered_and_checked() {
        let p = library("vex1", &BTreeMap::new()).unwrap();
        let eps = [0.021, 0.1, 0.047];
        let r = epsilon_sweep(&p, 1.0, &eps, &ErrorModel::ALL, &SolverOptions::default()).unwrap();
        let got: Vec<f64> = r.rows.iter().map(|r| r.epsilon).collect();
        assert_eq!(got, vec![0.1, 0.047, 0.021]);
        assert!(r
            .rows
            .iter()
            .all(|r| r.ok() && r.errors.len() == ErrorModel::ALL.len()));
        let row = &r.rows[1];
        let e1 = row.errors[&ErrorModel::VsOrder1].norm();
        let e0 = row.errors[&ErrorModel::VsT0].norm();
        assert!(e1 < e0);
        let mut buf = Vec::new();
        r.write_csv(&mut buf, "test").unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header_cols = text.lines().next().unwrap().split(',').count();
        assert!(text
            .lines()
            .skip(1)
            .all(|l| l.split(',').count() == header_cols));
    }

    #[test]
    fn probe_without_first_corrector_is_not_separated() {
        // smooth envelope and smooth background: t1_eps vanishes identically
        let p = library("fig1_right", &BTreeMap::new()).unwrap();
        let a: Vec<f64> = (10..13).map(|n| 1.0 / n as f64).collect();
        let b: Vec<f64> = (10..13).map(|n| 4.0 / (4 * n + 1) as f64).collect();
        let r = limit_indeterminacy_probe(&p, 5.5, &a, &b, 1, &SolverOptions::default()).unwrap();
        assert!(!r.separated, "{r:?}");
    }
}
