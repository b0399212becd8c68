//! Command-line front end: `simulate`, `analyze`, `phase`, `ensemble` and
//! `export` over built-in models or model files.
//!
//! Errors go to standard error as one line `error[<code>]: <message>` where
//! `<code>` is one of `usage`, `model`, `numerical` or `io`. Usage and model
//! errors exit with status 2, numerical and I/O failures with status 1.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use onestep::analysis::{find_fixed_points, multi_start, phase_portrait, stability};
use onestep::formats::{
    load_model_file, render_model, write_ensemble, write_trajectory, AnalysisReport, ModelFileError, ReportEntry,
    ReportError, TableError,
};
use onestep::models::{BuiltinModel, InterestPolicy, ModelError};
use onestep::scheme::{Scheme, SchemeError};
use onestep::simulate::{
    ensemble, integrate_ode, integrate_sde, ssa_run, EnsembleMode, RunConfig, SimError, Trajectory,
};

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "onestep", version, about = "Simulate and analyze one-step population models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one trajectory and write it as CSV.
    Simulate(SimulateArgs),
    /// Locate fixed points and classify their stability.
    Analyze(AnalyzeArgs),
    /// Deterministic trajectories from a center plus deviations, one CSV each.
    Phase(PhaseArgs),
    /// Mean and variance over repeated stochastic runs.
    Ensemble(EnsembleArgs),
    /// Write a model in the model-file format.
    Export(ExportArgs),
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Built-in model: fasttrack, bittorrent-closed, bittorrent-open,
    /// bittorrent-chunks or bittorrent-aggregated.
    #[arg(long, conflicts_with = "model_file", required_unless_present = "model_file")]
    pub model: Option<String>,
    /// Model definition file.
    #[arg(long, value_name = "PATH")]
    pub model_file: Option<PathBuf>,
    /// Parameter override; repeatable. `m` selects the chunk count of
    /// bittorrent-chunks.
    #[arg(short = 'p', long = "param", value_name = "NAME=VALUE", value_parser = parse_param)]
    pub params: Vec<(String, f64)>,
    /// Interest policy of bittorrent-chunks.
    #[arg(long, value_parser = parse_policy)]
    pub policy: Option<InterestPolicy>,
}

#[derive(Debug, Args)]
pub struct TimeArgs {
    #[arg(long, default_value_t = 100.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    /// Keep every k-th step (every k-th event for SSA).
    #[arg(long, default_value_t = 1)]
    pub record_every: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Ode,
    Sde,
    Ssa,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StochasticMode {
    Sde,
    Ssa,
}

/// Initial condition: `10,1` in species order or `n=10,l=1` by name.
#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    Positional(Vec<f64>),
    /// Unlisted species start at 0.
    Named(Vec<(String, f64)>),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value_t = Mode::Ode)]
    pub mode: Mode,
    #[command(flatten)]
    pub time: TimeArgs,
    #[arg(long, env = "ONESTEP_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Multiplier on the noise term of `sde` runs.
    #[arg(long, default_value_t = 1.0)]
    pub noise_scale: f64,
    #[arg(long, value_parser = parse_init, allow_hyphen_values = true)]
    pub init: InitSpec,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Extra Newton starting point; repeatable.
    #[arg(long, value_parser = parse_init, allow_hyphen_values = true)]
    pub guess: Vec<InitSpec>,
    /// Number of random starting points.
    #[arg(long, default_value_t = 8)]
    pub starts: usize,
    #[arg(long, env = "ONESTEP_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = onestep::analysis::DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = onestep::analysis::DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PhaseArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Center of the portrait; defaults to the closed-form steady state of
    /// built-in models that have one.
    #[arg(long, value_parser = parse_init, allow_hyphen_values = true)]
    pub center: Option<InitSpec>,
    /// Offset from the center; repeatable, one trajectory each.
    #[arg(long, required = true, value_parser = parse_init, allow_hyphen_values = true)]
    pub deviation: Vec<InitSpec>,
    #[command(flatten)]
    pub time: TimeArgs,
    /// Directory receiving `phase_000.csv`, `phase_001.csv`, …
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value_t = StochasticMode::Sde)]
    pub mode: StochasticMode,
    #[arg(long, default_value_t = 100)]
    pub runs: usize,
    #[command(flatten)]
    pub time: TimeArgs,
    #[arg(long, env = "ONESTEP_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub noise_scale: f64,
    #[arg(long, value_parser = parse_init, allow_hyphen_values = true)]
    pub init: InitSpec,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s.split_once('=').ok_or_else(|| format!("expected NAME=VALUE, got `{s}`"))?;
    let value: f64 = value.trim().parse().map_err(|_| format!("`{}` is not a number", value.trim()))?;
    Ok((name.trim().to_string(), value))
}

fn parse_policy(s: &str) -> Result<InterestPolicy, String> {
    s.parse().map_err(|e: ModelError| e.to_string())
}

fn parse_init(s: &str) -> Result<InitSpec, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let named = parts.iter().filter(|p| p.contains('=')).count();
    if named == 0 {
        let values = parts
            .iter()
            .map(|p| p.parse::<f64>().map_err(|_| format!("`{p}` is not a number")))
            .collect::<Result<_, _>>()?;
        Ok(InitSpec::Positional(values))
    } else if named == parts.len() {
        parts.iter().map(|p| parse_param(p)).collect::<Result<_, _>>().map(InitSpec::Named)
    } else {
        Err("positional and named components cannot be mixed".into())
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    ModelFile(#[from] ModelFileError),
    #[error("{0}")]
    Numerical(String),
    #[error("{context}: {source}")]
    Io { context: String, source: io::Error },
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Model(_) | CliError::ModelFile(ModelFileError::Syntax { .. } | ModelFileError::Scheme(_)) => {
                "model"
            }
            CliError::ModelFile(ModelFileError::Io(_)) | CliError::Io { .. } => "io",
            CliError::Numerical(_) => "numerical",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.code() {
            "usage" | "model" => EXIT_USAGE,
            _ => EXIT_FAILURE,
        }
    }
}

impl From<SchemeError> for CliError {
    fn from(e: SchemeError) -> Self {
        CliError::Model(ModelError::Scheme(e))
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidConfig(m) | SimError::InvalidInitial(m) => CliError::Usage(m),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

fn io_error(path: Option<&Path>, source: io::Error) -> CliError {
    let context = match path {
        Some(p) => format!("cannot write `{}`", p.display()),
        None => "cannot write to standard output".into(),
    };
    CliError::Io { context, source }
}

fn table_error(path: Option<&Path>, e: TableError) -> CliError {
    match e {
        TableError::Io(source) => io_error(path, source),
        other => io_error(path, io::Error::other(other.to_string())),
    }
}

/// Parses arguments (program name first). Help and version requests come back
/// as `Err` as well; check [`clap::Error::kind`].
pub fn parse_args<I, T>(argv: I) -> Result<Cli, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    Cli::try_parse_from(argv)
}

/// Full program: parse, run, report. Returns the process exit status.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match parse_args(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let rendered = e.render().to_string();
            let body = rendered.strip_prefix("error: ").unwrap_or(&rendered);
            eprint!("error[usage]: {body}");
            return EXIT_USAGE;
        }
    };
    match run(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error[{}]: {}", e.code(), e.to_string().replace('\n', "; "));
            e.exit_code()
        }
    }
}

/// A resolved model: the scheme plus the built-in it came from, if any.
pub struct LoadedModel {
    pub scheme: Scheme,
    pub builtin: Option<BuiltinModel>,
}

pub fn load_model(args: &ModelArgs) -> Result<LoadedModel, CliError> {
    match (&args.model, &args.model_file) {
        (Some(name), None) => {
            let builtin: BuiltinModel = name.parse()?;
            let scheme = builtin.build(&args.params, args.policy)?;
            Ok(LoadedModel { scheme, builtin: Some(builtin) })
        }
        (None, Some(path)) => {
            if args.policy.is_some() {
                return Err(CliError::Usage("--policy only applies to --model bittorrent-chunks".into()));
            }
            let scheme = load_model_file(path)?.with_parameters(&args.params)?;
            Ok(LoadedModel { scheme, builtin: None })
        }
        _ => Err(CliError::Usage("give exactly one of --model or --model-file".into())),
    }
}

/// Resolves an initial condition against the scheme's species. Names match
/// exactly or, failing that, case-insensitively.
pub fn resolve_init(spec: &InitSpec, scheme: &Scheme) -> Result<Vec<f64>, CliError> {
    let names: Vec<&str> = scheme.species_names().collect();
    match spec {
        InitSpec::Positional(v) => {
            if v.len() != names.len() {
                return Err(CliError::Usage(format!(
                    "{} values given, model `{}` has {} species ({})",
                    v.len(),
                    scheme.name(),
                    names.len(),
                    names.join(", ")
                )));
            }
            Ok(v.clone())
        }
        InitSpec::Named(pairs) => {
            let mut x = vec![0.0; names.len()];
            let mut set = vec![false; names.len()];
            for (key, value) in pairs {
                let exact = names.iter().position(|n| n == key);
                let folded: Vec<usize> =
                    (0..names.len()).filter(|&i| names[i].eq_ignore_ascii_case(key)).collect();
                let i = match (exact, folded.as_slice()) {
                    (Some(i), _) => i,
                    (None, [i]) => *i,
                    (None, []) => {
                        return Err(CliError::Usage(format!(
                            "unknown species `{key}` (model has {})",
                            names.join(", ")
                        )))
                    }
                    (None, _) => return Err(CliError::Usage(format!("species name `{key}` is ambiguous"))),
                };
                if set[i] {
                    return Err(CliError::Usage(format!("species `{}` given twice", names[i])));
                }
                set[i] = true;
                x[i] = *value;
            }
            Ok(x)
        }
    }
}

fn run_config(time: &TimeArgs, seed: u64, noise_scale: f64) -> Result<RunConfig, CliError> {
    let cfg = RunConfig { t_end: time.t_end, dt: time.dt, seed, record_every: time.record_every, noise_scale };
    cfg.validate()?;
    Ok(cfg)
}

fn with_output(
    out: Option<&Path>,
    write: impl FnOnce(&mut dyn Write) -> Result<(), CliError>,
) -> Result<(), CliError> {
    match out {
        Some(path) => {
            let file = File::create(path).map_err(|e| io_error(Some(path), e))?;
            let mut w = BufWriter::new(file);
            write(&mut w)?;
            w.flush().map_err(|e| io_error(Some(path), e))
        }
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            write(&mut w)?;
            w.flush().map_err(|e| io_error(None, e))
        }
    }
}

fn emit_trajectory(out: Option<&Path>, scheme: &Scheme, traj: &Trajectory) -> Result<(), CliError> {
    let names: Vec<&str> = scheme.species_names().collect();
    with_output(out, |w| write_trajectory(w, &names, traj).map_err(|e| table_error(out, e)))
}

pub fn run(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Simulate(a) => simulate(a),
        Command::Analyze(a) => analyze(a),
        Command::Phase(a) => phase(a),
        Command::Ensemble(a) => run_ensemble(a),
        Command::Export(a) => export(a),
    }
}

fn integer_counts(x: &[f64]) -> Result<Vec<i64>, CliError> {
    x.iter()
        .map(|&v| {
            if v.fract() == 0.0 && (0.0..9.0e15).contains(&v) {
                Ok(v as i64)
            } else {
                Err(CliError::Usage(format!("ssa needs nonnegative integer counts, got {v}")))
            }
        })
        .collect()
}

fn simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let model = load_model(&a.model)?;
    let x0 = resolve_init(&a.init, &model.scheme)?;
    let cfg = run_config(&a.time, a.seed, a.noise_scale)?;
    let result = match a.mode {
        Mode::Ode => integrate_ode(&model.scheme, &x0, &cfg),
        Mode::Sde => integrate_sde(&model.scheme, &x0, &cfg),
        Mode::Ssa => ssa_run(&model.scheme, &integer_counts(&x0)?, &cfg),
    };
    match result {
        Ok(traj) => emit_trajectory(a.out.as_deref(), &model.scheme, &traj),
        Err(e) => {
            // keep what was computed before the failure
            if let (Some(partial), Some(_)) = (e.partial(), a.out.as_deref()) {
                emit_trajectory(a.out.as_deref(), &model.scheme, partial)?;
            }
            Err(e.into())
        }
    }
}

fn analyze(a: &AnalyzeArgs) -> Result<(), CliError> {
    if !a.tol.is_finite() || a.tol <= 0.0 {
        return Err(CliError::Usage(format!("--tol must be positive, got {}", a.tol)));
    }
    let model = load_model(&a.model)?;
    let scheme = &model.scheme;
    let anchor = model.builtin.and_then(|b| b.analytic_fixed_point(scheme));
    let mut guesses = a.guess.iter().map(|g| resolve_init(g, scheme)).collect::<Result<Vec<_>, _>>()?;
    guesses.extend(multi_start(scheme.species_count(), anchor.as_deref(), a.starts, a.seed));
    if guesses.is_empty() {
        return Err(CliError::Usage("no starting points: give --guess or --starts > 0".into()));
    }
    let points = find_fixed_points(scheme, &guesses, a.tol, a.max_iter);
    let mut entries = Vec::with_capacity(points.len());
    for fp in &points {
        if fp.converged {
            let report = stability(scheme, fp.clone()).map_err(|e| CliError::Numerical(e.to_string()))?;
            entries.push(ReportEntry::from(&report));
        } else {
            entries.push(ReportEntry::from(fp));
        }
    }
    let report = AnalysisReport { model: scheme.name().to_string(), fixed_points: entries };
    let text = report.to_toml().map_err(|e: ReportError| CliError::Numerical(e.to_string()))?;
    with_output(a.out.as_deref(), |w| w.write_all(text.as_bytes()).map_err(|e| io_error(a.out.as_deref(), e)))?;
    if points.iter().any(|p| p.converged) {
        Ok(())
    } else {
        Err(CliError::Numerical(format!("Newton did not converge from any of {} starts", guesses.len())))
    }
}

fn phase(a: &PhaseArgs) -> Result<(), CliError> {
    let model = load_model(&a.model)?;
    let scheme = &model.scheme;
    let center = match &a.center {
        Some(c) => resolve_init(c, scheme)?,
        None => model.builtin.and_then(|b| b.analytic_fixed_point(scheme)).ok_or_else(|| {
            CliError::Usage("this model has no closed-form steady state; give --center".into())
        })?,
    };
    let deviations = a.deviation.iter().map(|d| resolve_init(d, scheme)).collect::<Result<Vec<_>, _>>()?;
    let cfg = run_config(&a.time, 0, 1.0)?;
    let trajectories = phase_portrait(scheme, &center, &deviations, &cfg)?;
    std::fs::create_dir_all(&a.out).map_err(|e| io_error(Some(&a.out), e))?;
    for (k, traj) in trajectories.iter().enumerate() {
        let path = a.out.join(format!("phase_{k:03}.csv"));
        emit_trajectory(Some(&path), scheme, traj)?;
        println!("{}", path.display());
    }
    Ok(())
}

fn run_ensemble(a: &EnsembleArgs) -> Result<(), CliError> {
    let model = load_model(&a.model)?;
    let x0 = resolve_init(&a.init, &model.scheme)?;
    let cfg = run_config(&a.time, a.seed, a.noise_scale)?;
    let mode = match a.mode {
        StochasticMode::Sde => EnsembleMode::Sde,
        StochasticMode::Ssa => {
            integer_counts(&x0)?;
            EnsembleMode::Ssa
        }
    };
    let stats = ensemble(&model.scheme, &x0, &cfg, a.runs, mode)?;
    let names: Vec<&str> = model.scheme.species_names().collect();
    let out = a.out.as_deref();
    with_output(out, |w| write_ensemble(w, &names, &stats).map_err(|e| table_error(out, e)))
}

fn export(a: &ExportArgs) -> Result<(), CliError> {
    let model = load_model(&a.model)?;
    let text = render_model(model.scheme.definition());
    with_output(a.out.as_deref(), |w| w.write_all(text.as_bytes()).map_err(|e| io_error(a.out.as_deref(), e)))
}
