//! The subcommands. Each writes deterministic CSV files (no timestamps) with
//! a trailing tag column and returns a JSON summary.

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::manifest::{now_unix, Manifest, OutputFile};
use super::{CliError, CliResult, CommandKind, RunConfig};
use crate::analysis::{epsilon_sweep, slope_fit, ErrorModel, FitOptions, SlopeFit};
use crate::homogenization::{microstructure_norm, CorrectorSet, Homogenizer};
use crate::potential::{library, TwoScalePotential};
use crate::propagator::{Position, SolverOptions};
use crate::scattering::scattering_coefficients;

/// Tolerance on the fitted slopes of the figure panels.
pub const FIGURE_SLOPE_TOL: f64 = 0.2;

/// Outcome of one figure panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureCheck {
    pub panel: String,
    pub potential: String,
    pub k: f64,
    pub slope: Option<f64>,
    pub r_squared: Option<f64>,
    /// Expected slope, when the panel has one.
    pub expected: Option<f64>,
    pub tolerance: f64,
    pub pass: Option<bool>,
}

/// What a run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub summary: Value,
    pub outputs: Vec<OutputFile>,
    pub checks: Vec<FigureCheck>,
    /// Set by `figures --check` when a panel misses its band.
    pub check_failure: Option<String>,
}

fn cx(z: Complex64) -> Value {
    json!([z.re, z.im])
}

fn fit_json(fit: &crate::Result<SlopeFit>) -> Value {
    match fit {
        Ok(f) => serde_json::to_value(f).expect("fit serializes"),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

fn fit_options(config: &RunConfig) -> FitOptions {
    FitOptions {
        envelope: config.envelope_fit,
        ..FitOptions::default()
    }
}

/// Write a CSV whose rows get `tag` appended as the last column.
fn write_csv(
    dir: &Path,
    file: &str,
    tag: &str,
    header: &str,
    rows: &[String],
) -> CliResult<OutputFile> {
    let mut text = String::with_capacity(64 * (rows.len() + 1));
    text.push_str(header);
    text.push_str(",tag\n");
    for r in rows {
        text.push_str(r);
        text.push(',');
        text.push_str(tag);
        text.push('\n');
    }
    std::fs::write(dir.join(file), text)
        .map_err(|e| CliError::Config(format!("cannot write {file}: {e}")))?;
    Ok(OutputFile {
        file: file.to_string(),
        tag: tag.to_string(),
        rows: rows.len(),
    })
}

fn k_label(k: f64) -> String {
    format!("k{k}")
}

pub(super) fn execute(config: &RunConfig) -> CliResult<RunReport> {
    let started = now_unix();
    let clock = std::time::Instant::now();
    let opts = config.solver_options()?;
    let dir = config.out.as_path();
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
    let mut report = match config.command {
        CommandKind::Solve => solve(config, &opts, dir)?,
        CommandKind::Sweep => sweep(config, &opts, dir)?,
        CommandKind::Correctors => correctors(config, &opts, dir)?,
        CommandKind::ExpansionCheck => expansion_check(config, &opts, dir)?,
        CommandKind::NormEstimate => norm_estimate(config, dir)?,
        CommandKind::Figures => figures(config, &opts, dir)?,
    };
    std::fs::write(dir.join("config.json"), config.to_json())
        .map_err(|e| CliError::Config(format!("cannot write config.json: {e}")))?;
    std::fs::write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(&report.summary).expect("summary serializes"),
    )
    .map_err(|e| CliError::Config(format!("cannot write summary.json: {e}")))?;
    let mut manifest = Manifest::new(config, opts, started);
    manifest.outputs = report.outputs.clone();
    manifest.wall_time_seconds = clock.elapsed().as_secs_f64();
    manifest.write(dir)?;
    if let Value::Object(m) = &mut report.summary {
        m.insert("out".into(), json!(dir.display().to_string()));
    }
    Ok(report)
}

/// t = 1/(1 - c/(2ik)) when the potential is one spike of strength c and nothing else.
fn single_spike_closed_form(p: &TwoScalePotential, k: f64) -> Option<Complex64> {
    let spikes = p.v_sing.spikes();
    if spikes.len() != 1 || !p.v_reg.is_identically_zero() || p.has_microstructure() {
        return None;
    }
    let c = spikes[0].c;
    Some(1.0 / (1.0 - c / Complex64::new(0.0, 2.0 * k)))
}

fn solve(config: &RunConfig, opts: &SolverOptions, dir: &Path) -> CliResult<RunReport> {
    let p = config.build_potential()?;
    let mut rows = Vec::new();
    let mut results = Vec::new();
    for &k in &config.k {
        let s = scattering_coefficients(&p, k, opts)?;
        let closed = single_spike_closed_form(&p, k);
        let closed_err = closed.map(|c| (c - s.t).norm());
        let (cre, cim, cerr) = match (closed, closed_err) {
            (Some(c), Some(e)) => (
                format!("{:.17e}", c.re),
                format!("{:.17e}", c.im),
                format!("{e:.3e}"),
            ),
            _ => (String::new(), String::new(), String::new()),
        };
        rows.push(format!(
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.3e},{:.3e},{},{},{},{}",
            k,
            s.t.re,
            s.t.im,
            s.r_plus.re,
            s.r_plus.im,
            s.r_minus.re,
            s.r_minus.im,
            s.flux_residual,
            s.reciprocity_residual,
            s.ill_conditioned,
            cre,
            cim,
            cerr
        ));
        let mut r = json!({
            "k": k,
            "t": cx(s.t),
            "abs_t": s.t.norm(),
            "r_plus": cx(s.r_plus),
            "r_minus": cx(s.r_minus),
            "flux_residual": s.flux_residual,
            "reciprocity_residual": s.reciprocity_residual,
            "ill_conditioned": s.ill_conditioned,
        });
        if let (Some(c), Some(e)) = (closed, closed_err) {
            r["t_closed_form"] = cx(c);
            r["closed_form_error"] = json!(e);
        }
        results.push(r);
    }
    let out = write_csv(
        dir,
        "solve.csv",
        "transmission",
        "k,re_t,im_t,re_r_plus,im_r_plus,re_r_minus,im_r_minus,flux_residual,reciprocity_residual,ill_conditioned,re_t_closed_form,im_t_closed_form,closed_form_error",
        &rows,
    )?;
    Ok(RunReport {
        summary: json!({
            "command": "solve",
            "potential": p.name,
            "epsilon": p.epsilon,
            "results": results,
        }),
        outputs: vec![out],
        checks: Vec::new(),
        check_failure: None,
    })
}

fn sweep(config: &RunConfig, opts: &SolverOptions, dir: &Path) -> CliResult<RunReport> {
    let p = config.build_potential()?;
    let grid = config.eps_grid()?;
    let fit = fit_options(config);
    let mut outputs = Vec::new();
    let mut per_k = Vec::new();
    for &k in &config.k {
        let res = epsilon_sweep(&p, k, &grid, &ErrorModel::ALL, opts)?;
        let mut buf = Vec::new();
        res.write_csv(&mut buf, "error_curves")?;
        let file = format!("sweep_{}.csv", k_label(k));
        std::fs::write(dir.join(&file), &buf)
            .map_err(|e| CliError::Config(format!("cannot write {file}: {e}")))?;
        outputs.push(OutputFile {
            file,
            tag: "error_curves".into(),
            rows: res.rows.len(),
        });
        let fits: BTreeMap<&str, Value> = ErrorModel::ALL
            .iter()
            .map(|m| (m.label(), fit_json(&slope_fit(&res.error_pairs(*m), &fit))))
            .collect();
        per_k.push(json!({
            "k": k,
            "rows": res.rows.len(),
            "failed_rows": res.rows.iter().filter(|r| !r.ok()).count(),
            "slopes": fits,
        }));
    }
    Ok(RunReport {
        summary: json!({
            "command": "sweep",
            "potential": p.name,
            "eps_grid": [grid.first(), grid.last(), grid.len()],
            "fit": fit,
            "results": per_k,
        }),
        outputs,
        checks: Vec::new(),
        check_failure: None,
    })
}

fn correctors(config: &RunConfig, opts: &SolverOptions, dir: &Path) -> CliResult<RunReport> {
    let p = config.build_potential()?;
    let eps = config.eps_values()?;
    let mut rows = Vec::new();
    let mut results = Vec::new();
    for &k in &config.k {
        let hom = Homogenizer::new(&p, k, opts)?;
        for &e in &eps {
            let c = hom.correctors(e);
            rows.push(c.csv_row());
            results.push(serde_json::to_value(c).expect("correctors serialize"));
        }
    }
    let out = write_csv(
        dir,
        "correctors.csv",
        "expansion_coefficients",
        CorrectorSet::csv_header(),
        &rows,
    )?;
    Ok(RunReport {
        summary: json!({ "command": "correctors", "potential": p.name, "results": results }),
        outputs: vec![out],
        checks: Vec::new(),
        check_failure: None,
    })
}

/// Uniform sample grid of expansion-check.
pub fn sample_positions(x_min: f64, x_max: f64, count: usize) -> Vec<Position> {
    let h = (x_max - x_min) / (count - 1) as f64;
    (0..count)
        .map(|i| {
            Position::left(if i + 1 == count {
                x_max
            } else {
                x_min + h * i as f64
            })
        })
        .collect()
}

fn expansion_check(config: &RunConfig, opts: &SolverOptions, dir: &Path) -> CliResult<RunReport> {
    let p = config.build_potential()?;
    let grid = config.eps_grid()?;
    let xs = sample_positions(config.x_min, config.x_max, config.x_count);
    let fit = fit_options(config);
    let mut outputs = Vec::new();
    let mut results = Vec::new();
    for &k in &config.k {
        let hom = Homogenizer::new(&p, k, opts)?;
        let mut rows = Vec::new();
        let mut pairs = Vec::new();
        let mut leading = Vec::new();
        for &e in &grid {
            let r = hom.field_errors(&p.with_epsilon(e)?, &xs, opts)?;
            rows.push(format!(
                "{:.17e},{:.17e},{:.17e},{:.17e}",
                e, r.expansion, r.leading, r.x_at_max
            ));
            pairs.push((e, r.expansion));
            leading.push((e, r.leading));
        }
        let file = format!("expansion_check_{}.csv", k_label(k));
        outputs.push(write_csv(
            dir,
            &file,
            "field_expansion",
            "epsilon,sup_error_expansion,sup_error_leading,x_at_max",
            &rows,
        )?);
        results.push(json!({
            "k": k,
            "slope_expansion": fit_json(&slope_fit(&pairs, &fit)),
            "slope_leading": fit_json(&slope_fit(&leading, &fit)),
        }));
    }
    Ok(RunReport {
        summary: json!({
            "command": "expansion-check",
            "potential": p.name,
            "x_range": [config.x_min, config.x_max, config.x_count],
            "results": results,
        }),
        outputs,
        checks: Vec::new(),
        check_failure: None,
    })
}

fn norm_estimate(config: &RunConfig, dir: &Path) -> CliResult<RunReport> {
    let p = config.build_potential()?;
    let opts = config.norm_options();
    let eps = config.eps_values()?;
    let mut rows = Vec::new();
    let mut pairs = Vec::new();
    let mut results = Vec::new();
    for &e in &eps {
        let r = microstructure_norm(&p, e, &opts)?;
        rows.push(format!(
            "{:.17e},{:.17e},{:.3e},{},{},{:.17e},{}",
            e, r.value, r.refinement_delta, r.iterations, r.points, r.box_radius, r.sigma
        ));
        pairs.push((e, r.value));
        results.push(json!({ "epsilon": e, "estimate": r }));
    }
    let out = write_csv(
        dir,
        "norm_estimate.csv",
        "weighted_norm",
        "epsilon,value,refinement_delta,iterations,points,box_radius,sigma",
        &rows,
    )?;
    let mut summary =
        json!({ "command": "norm-estimate", "potential": p.name, "results": results });
    if pairs.len() > 1 {
        summary["slope"] = fit_json(&slope_fit(&pairs, &FitOptions::untrimmed()));
    }
    Ok(RunReport {
        summary,
        outputs: vec![out],
        checks: Vec::new(),
        check_failure: None,
    })
}

/// One panel of a figure: library potential, its parameters, k and the expected slope.
struct Panel {
    tag: &'static str,
    name: &'static str,
    params: &'static [(&'static str, f64)],
    k: f64,
    expected: Option<f64>,
}

const FIGURE_1: &[Panel] = &[
    Panel {
        tag: "fig1_left",
        name: "fig1_left",
        params: &[],
        k: 5.5,
        expected: Some(1.0),
    },
    Panel {
        tag: "fig1_center",
        name: "fig1_center",
        params: &[],
        k: 5.5,
        expected: Some(2.0),
    },
    Panel {
        tag: "fig1_right",
        name: "fig1_right",
        params: &[],
        k: 5.5,
        expected: Some(2.0),
    },
];

const FIGURE_2: &[Panel] = &[
    Panel {
        tag: "fig2_rho0.001",
        name: "fig2",
        params: &[("rho", 0.001)],
        k: 5.5,
        expected: None,
    },
    Panel {
        tag: "fig2_rho0.01",
        name: "fig2",
        params: &[("rho", 0.01)],
        k: 5.5,
        expected: None,
    },
    Panel {
        tag: "fig2_rho0.1",
        name: "fig2",
        params: &[("rho", 0.1)],
        k: 5.5,
        expected: Some(2.0),
    },
];

const FIGURE_3: &[Panel] = &[
    Panel {
        tag: "fig3_left",
        name: "vex1",
        params: &[("theta", 0.0)],
        k: 1.0,
        expected: Some(1.0),
    },
    Panel {
        tag: "fig3_right",
        name: "vex2",
        params: &[("theta", 0.0)],
        k: 1.0,
        expected: Some(2.0),
    },
];

fn figures(config: &RunConfig, opts: &SolverOptions, dir: &Path) -> CliResult<RunReport> {
    let grid = config.eps_grid()?;
    let fit = fit_options(config);
    let mut outputs = Vec::new();
    let mut checks = Vec::new();
    for w in &config.which {
        let panels = match w {
            1 => FIGURE_1,
            2 => FIGURE_2,
            _ => FIGURE_3,
        };
        for panel in panels {
            let params: BTreeMap<String, f64> = panel
                .params
                .iter()
                .map(|(a, b)| (a.to_string(), *b))
                .collect();
            let mut p = library(panel.name, &params)?;
            if let Some(j) = config.jmax {
                p.j_max = j;
            }
            let res = epsilon_sweep(&p, panel.k, &grid, &ErrorModel::ALL, opts)?;
            let mut buf = Vec::new();
            res.write_csv(&mut buf, panel.tag)?;
            let file = format!("{}.csv", panel.tag);
            std::fs::write(dir.join(&file), &buf)
                .map_err(|e| CliError::Config(format!("cannot write {file}: {e}")))?;
            outputs.push(OutputFile {
                file,
                tag: panel.tag.into(),
                rows: res.rows.len(),
            });
            let f = slope_fit(&res.error_pairs(ErrorModel::VsT0), &fit).ok();
            let pass = panel.expected.map(|want| {
                f.as_ref()
                    .is_some_and(|f| (f.slope - want).abs() <= FIGURE_SLOPE_TOL)
            });
            checks.push(FigureCheck {
                panel: panel.tag.into(),
                potential: p.name.clone(),
                k: panel.k,
                slope: f.as_ref().map(|f| f.slope),
                r_squared: f.as_ref().map(|f| f.r_squared),
                expected: panel.expected,
                tolerance: FIGURE_SLOPE_TOL,
                pass,
            });
        }
    }
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| c.pass == Some(false))
        .map(|c| c.panel.as_str())
        .collect();
    let check_failure = (config.check && !failed.is_empty())
        .then(|| format!("slopes outside +-{FIGURE_SLOPE_TOL}: {}", failed.join(", ")));
    Ok(RunReport {
        summary: json!({
            "command": "figures",
            "which": config.which,
            "eps_grid": [grid.first(), grid.last(), grid.len()],
            "fit": fit,
            "panels": checks,
        }),
        outputs,
        checks,
        check_failure,
    })
}
