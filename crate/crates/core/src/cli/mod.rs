//! Command-line front end: argument parsing, run configuration, exit codes.
//!
//! Every subcommand writes its artifacts (CSV data, a JSON summary and a
//! manifest) into the output directory and prints the summary to stdout.
//! Failures print a JSON object to stderr and map to exit codes
//! 2 (configuration), 3 (numerical failure) or 4 (failed `figures --check`).

mod commands;
mod manifest;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::analysis::{DEFAULT_EPS_COUNT, DEFAULT_EPS_MAX, DEFAULT_EPS_MIN};
use crate::error::Error;
use crate::homogenization::NormOptions;
use crate::potential::{PotentialDescriptor, TwoScalePotential};
use crate::propagator::{SolverOptions, DEFAULT_ATOL, DEFAULT_RTOL};

pub use commands::{sample_positions, FigureCheck, RunReport};
pub use manifest::{Manifest, OutputFile};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_CHECK: i32 = 4;

/// Failure of a CLI run, classified by exit code.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(Error),
    #[error("acceptance check failed: {0}")]
    CheckFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::CheckFailed(_) => EXIT_CHECK,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Numerical(_) => "numerical",
            CliError::CheckFailed(_) => "check_failed",
        }
    }

    /// The machine-readable form printed on stderr.
    pub fn to_json(&self) -> Value {
        let mut obj = serde_json::json!({
            "error": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        });
        if let CliError::Numerical(e) = self {
            obj["detail"] = Value::String(format!("{e:?}"));
        }
        obj
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidInput(_)
            | Error::UnknownPotential(_)
            | Error::ParamOutOfRange(_)
            | Error::EpsilonFloor { .. }
            | Error::Serde(_)
            | Error::Support(_)
            | Error::SideRequired { .. } => CliError::Config(e.to_string()),
            Error::Io(m) => CliError::Config(format!("i/o error: {m}")),
            other => CliError::Numerical(other),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// The subcommands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Solve,
    Sweep,
    Correctors,
    ExpansionCheck,
    NormEstimate,
    Figures,
}

impl CommandKind {
    pub fn name(&self) -> &'static str {
        match self {
            CommandKind::Solve => "solve",
            CommandKind::Sweep => "sweep",
            CommandKind::Correctors => "correctors",
            CommandKind::ExpansionCheck => "expansion-check",
            CommandKind::NormEstimate => "norm-estimate",
            CommandKind::Figures => "figures",
        }
    }
}

/// Everything a run depends on. Serialized into the output directory and
/// the manifest; reading that file back reproduces the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: CommandKind,
    pub potential: PotentialDescriptor,
    /// Wave numbers; `figures` uses the fixed values of each figure instead.
    pub k: Vec<f64>,
    /// Single period; overrides the grid for solve, correctors and norm-estimate.
    pub eps: Option<f64>,
    pub eps_min: f64,
    pub eps_max: f64,
    pub eps_count: usize,
    pub rtol: f64,
    pub atol: f64,
    /// Fourier truncation; `None` keeps the potential's own value.
    pub jmax: Option<usize>,
    pub out: PathBuf,
    /// For `figures`: exit with code 4 when a fitted slope misses its band.
    pub check: bool,
    /// Figures to regenerate (1, 2, 3).
    pub which: Vec<u8>,
    /// Fit the upper envelope of oscillatory error curves in summaries.
    pub envelope_fit: bool,
    /// Weight exponent of the norm estimator.
    pub sigma: f64,
    /// Grid size of the norm estimator.
    pub norm_points: usize,
    /// Sample grid of expansion-check.
    pub x_min: f64,
    pub x_max: f64,
    pub x_count: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: CommandKind::Solve,
            potential: PotentialDescriptor::library("free", BTreeMap::new()),
            k: Vec::new(),
            eps: None,
            eps_min: DEFAULT_EPS_MIN,
            eps_max: DEFAULT_EPS_MAX,
            eps_count: DEFAULT_EPS_COUNT,
            rtol: DEFAULT_RTOL,
            atol: DEFAULT_ATOL,
            jmax: None,
            out: PathBuf::from("out"),
            check: false,
            which: vec![1, 2, 3],
            envelope_fit: false,
            sigma: NormOptions::default().sigma,
            norm_points: NormOptions::default().points,
            x_min: -2.0,
            x_max: 2.0,
            x_count: 4001,
        }
    }
}

impl RunConfig {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json(s: &str) -> CliResult<Self> {
        serde_json::from_str(s).map_err(|e| CliError::Config(format!("bad config: {e}")))
    }

    /// Overlay the keys of a JSON object on this configuration.
    pub fn merged_with(&self, overlay: &Value) -> CliResult<Self> {
        let Value::Object(over) = overlay else {
            return Err(CliError::Config(
                "config file must hold a JSON object".into(),
            ));
        };
        let mut base = serde_json::to_value(self).expect("config serializes");
        let obj = base.as_object_mut().expect("config is an object");
        for (key, v) in over {
            obj.insert(key.clone(), v.clone());
        }
        serde_json::from_value(base).map_err(|e| CliError::Config(format!("bad config: {e}")))
    }

    pub fn solver_options(&self) -> CliResult<SolverOptions> {
        let o = SolverOptions::with_tolerances(self.rtol, self.atol);
        o.validate()?;
        Ok(o)
    }

    pub fn norm_options(&self) -> NormOptions {
        NormOptions {
            sigma: self.sigma,
            points: self.norm_points,
            ..NormOptions::default()
        }
    }

    /// Build the potential with the jmax and eps overrides applied.
    pub fn build_potential(&self) -> CliResult<TwoScalePotential> {
        let mut p = self.potential.build()?;
        if let Some(j) = self.jmax {
            if j == 0 {
                return Err(CliError::Config("jmax must be at least 1".into()));
            }
            p.j_max = j;
        }
        if let Some(eps) = self.eps {
            p = p.with_epsilon(eps)?;
        }
        Ok(p)
    }

    pub fn eps_grid(&self) -> CliResult<Vec<f64>> {
        Ok(crate::analysis::geometric_grid(
            self.eps_max,
            self.eps_min,
            self.eps_count,
        )?)
    }

    /// The single eps if given, the sweep grid otherwise.
    pub fn eps_values(&self) -> CliResult<Vec<f64>> {
        match self.eps {
            Some(e) => Ok(vec![e]),
            None => self.eps_grid(),
        }
    }

    fn validate(&self) -> CliResult<()> {
        if !matches!(
            self.command,
            CommandKind::Figures | CommandKind::NormEstimate
        ) {
            if self.k.is_empty() {
                return Err(CliError::Config(format!(
                    "`{}` needs at least one --k",
                    self.command.name()
                )));
            }
            if let Some(k) = self.k.iter().find(|k| !k.is_finite() || **k <= 0.0) {
                return Err(CliError::Config(format!(
                    "k must be positive and finite, got {k}"
                )));
            }
        }
        if let Some(f) = self.which.iter().find(|w| !(1..=3).contains(*w)) {
            return Err(CliError::Config(format!(
                "unknown figure {f} (choose 1, 2 or 3)"
            )));
        }
        if self.x_count < 2 || !(self.x_min < self.x_max) {
            return Err(CliError::Config(
                "expansion-check needs x_min < x_max and x_count >= 2".into(),
            ));
        }
        self.solver_options()?;
        Ok(())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "homscatter",
    version,
    about = "Transmission through potentials with delta spikes and periodic microstructure: direct solves, corrector expansions, convergence studies"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Scattering coefficients of the full potential.
    Solve(CommonArgs),
    /// Direct t against the expansion models over an eps grid, with slope fits.
    Sweep(CommonArgs),
    /// Expansion coefficients t0_hom, t1_eps, t2_hom, t2_eps, t2_cross.
    Correctors(CommonArgs),
    /// Sup-norm error of the corrected field expansion against direct solves.
    ExpansionCheck(CommonArgs),
    /// Weighted operator norm of the microstructure.
    NormEstimate(CommonArgs),
    /// Regenerate the data behind figures 1, 2 and 3.
    Figures(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Library name or path to a JSON potential descriptor.
    #[arg(long)]
    pub potential: Option<String>,
    /// Library parameters as key=value pairs, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub params: Vec<String>,
    /// Spike strength (single_delta).
    #[arg(long)]
    pub c: Option<f64>,
    /// Spike location (single_delta).
    #[arg(long)]
    pub x0: Option<f64>,
    /// Profile phase or shift (vex1, vex2).
    #[arg(long)]
    pub theta: Option<f64>,
    /// Smoothing width of the approximate deltas (fig2).
    #[arg(long)]
    pub rho: Option<f64>,
    /// Wave number; repeat or comma separate for several.
    #[arg(long, value_delimiter = ',')]
    pub k: Vec<f64>,
    /// Single period eps.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Smallest eps of the sweep grid.
    #[arg(long)]
    pub eps_min: Option<f64>,
    /// Largest eps of the sweep grid.
    #[arg(long)]
    pub eps_max: Option<f64>,
    /// Number of log-spaced eps in the sweep grid.
    #[arg(long)]
    pub eps_count: Option<usize>,
    /// Relative tolerance of the ODE integrator.
    #[arg(long)]
    pub rtol: Option<f64>,
    /// Absolute tolerance of the ODE integrator.
    #[arg(long)]
    pub atol: Option<f64>,
    /// Number of Fourier modes kept in the microstructure sums.
    #[arg(long)]
    pub jmax: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Exit with code 4 when a figure slope misses its tolerance band.
    #[arg(long)]
    pub check: bool,
    /// Figures to regenerate: 1, 2, 3 or all.
    #[arg(long, value_delimiter = ',')]
    pub which: Vec<String>,
    /// Fit the upper envelope of oscillatory error curves.
    #[arg(long)]
    pub envelope: bool,
    /// Weight exponent for norm-estimate (must exceed 4).
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Grid size for norm-estimate.
    #[arg(long)]
    pub norm_points: Option<usize>,
    /// Left end of the expansion-check sample grid.
    #[arg(long)]
    pub x_min: Option<f64>,
    /// Right end of the expansion-check sample grid.
    #[arg(long)]
    pub x_max: Option<f64>,
    /// Number of expansion-check sample points.
    #[arg(long)]
    pub x_count: Option<usize>,
    /// JSON configuration used as the base; flags given explicitly override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn parse_params(args: &CommonArgs) -> CliResult<BTreeMap<String, f64>> {
    let mut params = BTreeMap::new();
    for item in &args.params {
        if item.trim().is_empty() {
            continue;
        }
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--params expects key=value, got `{item}`")))?;
        let v: f64 = value.trim().parse().map_err(|_| {
            CliError::Config(format!("parameter `{key}` is not a number: `{value}`"))
        })?;
        params.insert(key.trim().to_string(), v);
    }
    for (key, v) in [
        ("c", args.c),
        ("x0", args.x0),
        ("theta", args.theta),
        ("rho", args.rho),
    ] {
        if let Some(v) = v {
            params.insert(key.to_string(), v);
        }
    }
    Ok(params)
}

fn potential_descriptor(args: &CommonArgs) -> CliResult<Option<PotentialDescriptor>> {
    let params = parse_params(args)?;
    let Some(source) = &args.potential else {
        if !params.is_empty() {
            return Err(CliError::Config(
                "potential parameters given without --potential".into(),
            ));
        }
        return Ok(None);
    };
    let path = Path::new(source);
    if source.ends_with(".json") || path.is_file() {
        if !params.is_empty() {
            return Err(CliError::Config(
                "parameters apply to library potentials only; put them in the descriptor file"
                    .into(),
            ));
        }
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        return Ok(Some(PotentialDescriptor::from_json(&text)?));
    }
    Ok(Some(PotentialDescriptor::library(source, params)))
}

fn parse_which(items: &[String]) -> CliResult<Option<Vec<u8>>> {
    if items.is_empty() {
        return Ok(None);
    }
    let mut out = Vec::new();
    for w in items {
        match w.trim() {
            "all" => out.extend([1, 2, 3]),
            s => out.push(
                s.parse::<u8>()
                    .map_err(|_| CliError::Config(format!("unknown figure `{s}`")))?,
            ),
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(Some(out))
}

/// Turn parsed arguments into a run configuration.
pub fn config_from_cli(cli: &Cli) -> CliResult<RunConfig> {
    let (command, args) = match &cli.command {
        Cmd::Solve(a) => (CommandKind::Solve, a),
        Cmd::Sweep(a) => (CommandKind::Sweep, a),
        Cmd::Correctors(a) => (CommandKind::Correctors, a),
        Cmd::ExpansionCheck(a) => (CommandKind::ExpansionCheck, a),
        Cmd::NormEstimate(a) => (CommandKind::NormEstimate, a),
        Cmd::Figures(a) => (CommandKind::Figures, a),
    };
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            let overlay: Value = serde_json::from_str(&text).map_err(|e| {
                CliError::Config(format!("{} is not valid JSON: {e}", path.display()))
            })?;
            RunConfig::default().merged_with(&overlay)?
        }
        None => RunConfig::default(),
    };
    cfg.command = command;
    if let Some(p) = potential_descriptor(args)? {
        cfg.potential = p;
    }
    if !args.k.is_empty() {
        cfg.k = args.k.clone();
    }
    if let Some(w) = parse_which(&args.which)? {
        cfg.which = w;
    }
    if args.eps.is_some() {
        cfg.eps = args.eps;
    }
    if args.jmax.is_some() {
        cfg.jmax = args.jmax;
    }
    if let Some(out) = &args.out {
        cfg.out = out.clone();
    }
    cfg.check |= args.check;
    cfg.envelope_fit |= args.envelope;
    for (slot, flag) in [
        (&mut cfg.eps_min, args.eps_min),
        (&mut cfg.eps_max, args.eps_max),
        (&mut cfg.rtol, args.rtol),
        (&mut cfg.atol, args.atol),
        (&mut cfg.sigma, args.sigma),
        (&mut cfg.x_min, args.x_min),
        (&mut cfg.x_max, args.x_max),
    ] {
        if let Some(v) = flag {
            *slot = v;
        }
    }
    for (slot, flag) in [
        (&mut cfg.eps_count, args.eps_count),
        (&mut cfg.norm_points, args.norm_points),
        (&mut cfg.x_count, args.x_count),
    ] {
        if let Some(v) = flag {
            *slot = v;
        }
    }
    Ok(cfg)
}

/// Execute a configuration, writing artifacts into `config.out`.
pub fn run(config: &RunConfig) -> CliResult<RunReport> {
    config.validate()?;
    commands::execute(config)
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return EXIT_OK;
            }
            let err = CliError::Config(e.to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return err.exit_code();
        }
    };
    let result = config_from_cli(&cli).and_then(|cfg| {
        let report = run(&cfg)?;
        println!(
            "{}",
            serde_json::to_string_pretty(&report.summary).expect("summary serializes")
        );
        match &report.check_failure {
            Some(msg) => Err(CliError::CheckFailed(msg.clone())),
            None => Ok(()),
        }
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> CliResult<RunConfig> {
        let cli = Cli::try_parse_from(std::iter::once("homscatter").chain(args.iter().copied()))
            .map_err(|e| CliError::Config(e.to_string()))?;
        config_from_cli(&cli)
    }

    #[test]
    fn library_flags_become_params() {
        let c = parse(&[
            "solve",
            "--potential",
            "single_delta",
            "--c",
            "40",
            "--k",
            "5.5",
        ])
        .unwrap();
        assert_eq!(c.command, CommandKind::Solve);
        assert_eq!(c.k, vec![5.5]);
        match &c.potential {
            PotentialDescriptor::Library { name, params } => {
                assert_eq!(name, "single_delta");
                assert_eq!(params.get("c"), Some(&40.0));
            }
            other => panic!("unexpected descriptor {other:?}"),
        }
    }

    #[test]
    fn params_list_and_grid_flags() {
        let c = parse(&[
            "sweep",
            "--potential",
            "vex1",
            "--params",
            "theta=0.3,jmax=32",
            "--k",
            "1,2",
            "--eps-min",
            "0.01",
            "--eps-count",
            "7",
        ])
        .unwrap();
        assert_eq!(c.k, vec![1.0, 2.0]);
        assert_eq!(c.eps_min, 0.01);
        assert_eq!(c.eps_count, 7);
        assert_eq!(c.eps_max, DEFAULT_EPS_MAX);
        let p = c.build_potential().unwrap();
        assert_eq!(p.j_max, 32);
    }

    #[test]
    fn config_round_trips_exactly() {
        let c = RunConfig {
            k: vec![0.1 + 0.2, 5.5, 1.0 / 3.0],
            eps: Some(std::f64::consts::PI / 100.0),
            rtol: 1.234_567_890_123_456_7e-11,
            ..RunConfig::default()
        };
        let s = c.to_json();
        let back = RunConfig::from_json(&s).unwrap();
        assert_eq!(back, c);
        for (a, b) in back.k.iter().zip(&c.k) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(back.to_json(), s);
    }

    #[test]
    fn flags_override_config_file_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        let file = parse(&[
            "sweep",
            "--potential",
            "vex1",
            "--k",
            "1",
            "--eps-count",
            "7",
            "--rtol",
            "1e-9",
        ])
        .unwrap();
        std::fs::write(&path, file.to_json()).unwrap();
        let p = path.to_str().unwrap();
        let c = parse(&[
            "sweep",
            "--config",
            p,
            "--eps-count",
            "9",
            "--out",
            "elsewhere",
        ])
        .unwrap();
        assert_eq!(c.eps_count, 9);
        assert_eq!(c.out, PathBuf::from("elsewhere"));
        assert_eq!(c.k, vec![1.0]);
        assert_eq!(c.rtol, 1e-9);
        assert_eq!(c.potential, file.potential);
        // a partial file fills the remaining keys from the defaults
        std::fs::write(&path, r#"{"k": [2.0], "command": "solve"}"#).unwrap();
        let c = parse(&["correctors", "--config", p]).unwrap();
        assert_eq!(c.command, CommandKind::Correctors);
        assert_eq!(c.k, vec![2.0]);
        assert_eq!(c.eps_count, DEFAULT_EPS_COUNT);
        std::fs::write(&path, r#"{"bogus": 1}"#).unwrap();
        assert!(matches!(
            parse(&["sweep", "--config", p]),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn errors_map_to_exit_codes() {
        assert_eq!(
            CliError::from(Error::UnknownPotential("x".into())).exit_code(),
            EXIT_CONFIG
        );
        let num = CliError::from(Error::IntegrationFailure {
            x: 0.0,
            reason: "r".into(),
        });
        assert_eq!(num.exit_code(), EXIT_NUMERICAL);
        assert_eq!(CliError::CheckFailed("s".into()).exit_code(), EXIT_CHECK);
        let j = num.to_json();
        assert_eq!(j["error"], "numerical");
        assert_eq!(j["exit_code"], 3);
    }

    #[test]
    fn missing_k_is_a_config_error() {
        let c = parse(&["solve", "--potential", "free"]).unwrap();
        assert!(matches!(run(&c), Err(CliError::Config(_))));
    }

    #[test]
    fn which_accepts_all() {
        let c = parse(&["figures", "--which", "all"]).unwrap();
        assert_eq!(c.which, vec![1, 2, 3]);
        assert!(parse(&["figures", "--which", "x"]).is_err());
    }
}
