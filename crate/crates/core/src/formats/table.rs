//! CSV emission and re-ingestion of trajectories and ensemble summaries.
//!
//! Values are written with 17 significant digits, which is enough for every
//! `f64` to parse back to the identical value.

use std::io::{Read, Write};

use thiserror::Error;

use crate::simulate::{EnsembleStats, Trajectory, TrajectoryKind};

pub const TRAJECTORY_HEADER: &str = "# onestep trajectory v1";
pub const ENSEMBLE_HEADER: &str = "# onestep ensemble v1";

#[derive(Debug, Error)]
pub enum TableError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("malformed table: {0}")]
    Malformed(String),
}

fn fmt_value(v: f64) -> String {
    format!("{v:.16e}")
}

fn kind_name(kind: TrajectoryKind) -> &'static str {
    match kind {
        TrajectoryKind::Ode => "ode",
        TrajectoryKind::Sde => "sde",
        TrajectoryKind::Ssa => "ssa",
    }
}

/// Writes `traj` as `t,<species…>` rows after a version comment.
pub fn write_trajectory<W: Write>(mut out: W, species: &[&str], traj: &Trajectory) -> Result<(), TableError> {
    writeln!(out, "{TRAJECTORY_HEADER} kind={}", kind_name(traj.kind))?;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t"];
    header.extend_from_slice(species);
    w.write_record(&header)?;
    for (t, state) in traj.times.iter().zip(&traj.states) {
        if state.len() != species.len() {
            return Err(TableError::Malformed(format!(
                "state has {} components but {} species names were given",
                state.len(),
                species.len()
            )));
        }
        let mut row = Vec::with_capacity(state.len() + 1);
        row.push(fmt_value(*t));
        row.extend(state.iter().map(|v| fmt_value(*v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Splits off the leading version comment and checks it.
fn strip_header<'a>(text: &'a str, expected: &str) -> Result<(&'a str, &'a str), TableError> {
    let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
    let first = first.trim_end_matches('\r');
    match first.strip_prefix(expected) {
        Some(tail) => Ok((tail.trim(), rest)),
        None => Err(TableError::Malformed(format!("expected header `{expected}`, found `{first}`"))),
    }
}

fn parse_row(record: &csv::StringRecord, width: usize, row: usize) -> Result<Vec<f64>, TableError> {
    if record.len() != width {
        return Err(TableError::Malformed(format!("row {row} has {} fields, expected {width}", record.len())));
    }
    record
        .iter()
        .map(|f| {
            f.trim()
                .parse::<f64>()
                .map_err(|_| TableError::Malformed(format!("row {row}: `{f}` is not a number")))
        })
        .collect()
}

/// Reads a trajectory CSV, returning the species names and the trajectory.
pub fn read_trajectory<R: Read>(mut input: R) -> Result<(Vec<String>, Trajectory), TableError> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let (tail, body) = strip_header(&text, TRAJECTORY_HEADER)?;
    let kind = match tail.strip_prefix("kind=") {
        Some("ode") | None => TrajectoryKind::Ode,
        Some("sde") => TrajectoryKind::Sde,
        Some("ssa") => TrajectoryKind::Ssa,
        Some(other) => return Err(TableError::Malformed(format!("unknown trajectory kind `{other}`"))),
    };
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header = r.headers()?.clone();
    if header.get(0) != Some("t") {
        return Err(TableError::Malformed("first column must be `t`".into()));
    }
    let species: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut traj = Trajectory { times: Vec::new(), states: Vec::new(), kind };
    for (row, rec) in r.records().enumerate() {
        let values = parse_row(&rec?, header.len(), row + 1)?;
        traj.times.push(values[0]);
        traj.states.push(values[1..].to_vec());
    }
    Ok((species, traj))
}

/// Writes `t,mean_<X>…,var_<X>…` rows.
pub fn write_ensemble<W: Write>(mut out: W, species: &[&str], stats: &EnsembleStats) -> Result<(), TableError> {
    writeln!(out, "{ENSEMBLE_HEADER} runs={}", stats.run_count)?;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend(species.iter().map(|s| format!("mean_{s}")));
    header.extend(species.iter().map(|s| format!("var_{s}")));
    w.write_record(&header)?;
    for k in 0..stats.times.len() {
        let mut row = vec![fmt_value(stats.times[k])];
        row.extend(stats.mean[k].iter().map(|v| fmt_value(*v)));
        row.extend(stats.variance[k].iter().map(|v| fmt_value(*v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an ensemble CSV back, returning species names and statistics.
pub fn read_ensemble<R: Read>(mut input: R) -> Result<(Vec<String>, EnsembleStats), TableError> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let (tail, body) = strip_header(&text, ENSEMBLE_HEADER)?;
    let run_count = tail
        .strip_prefix("runs=")
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| TableError::Malformed("missing `runs=` in header".into()))?;
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header = r.headers()?.clone();
    let n = header.len().saturating_sub(1) / 2;
    if header.get(0) != Some("t") || header.len() != 2 * n + 1 {
        return Err(TableError::Malformed("expected columns t, mean_*, var_*".into()));
    }
    let species: Vec<String> = (1..=n)
        .map(|i| header[i].strip_prefix("mean_").unwrap_or(&header[i]).to_string())
        .collect();
    let mut stats = EnsembleStats { times: Vec::new(), mean: Vec::new(), variance: Vec::new(), run_count };
    for (row, rec) in r.records().enumerate() {
        let values = parse_row(&rec?, header.len(), row + 1)?;
        stats.times.push(values[0]);
        stats.mean.push(values[1..=n].to_vec());
        stats.variance.push(values[n + 1..].to_vec());
    }
    Ok((species, stats))
}
