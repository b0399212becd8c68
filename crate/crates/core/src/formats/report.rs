//! TOML stability reports.
//!
//! ```toml
//! # onestep analysis report v1
//! model = "fasttrack"
//!
//! [[fixed_points]]
//! fixed_point = [5.0, 2.0]
//! residual_norm = 0.0
//! converged = true
//! jacobian = [[-0.2, -0.5], [0.2, 0.0]]
//! eigenvalues = [[-0.1, 0.3], [-0.1, -0.3]]
//! classification = "stable-focus"
//! ```
//!
//! Entries for starts that did not converge carry only the first three keys.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{Classification, FixedPoint, StabilityReport};

pub const REPORT_HEADER: &str = "# onestep analysis report v1";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot encode report: {0}")]
    Encode(#[from] toml::ser::Error),
    #[error("cannot parse report: {0}")]
    Decode(#[from] toml::de::Error),
    #[error("missing header `{REPORT_HEADER}`")]
    MissingHeader,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub fixed_point: Vec<f64>,
    pub residual_norm: f64,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jacobian: Option<Vec<Vec<f64>>>,
    /// `[re, im]` pairs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigenvalues: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classification: Option<Classification>,
}

impl From<&FixedPoint> for ReportEntry {
    fn from(fp: &FixedPoint) -> Self {
        ReportEntry {
            fixed_point: fp.state.clone(),
            residual_norm: fp.residual_norm,
            converged: fp.converged,
            jacobian: None,
            eigenvalues: None,
            classification: None,
        }
    }
}

impl From<&StabilityReport> for ReportEntry {
    fn from(r: &StabilityReport) -> Self {
        let j = &r.jacobian;
        ReportEntry {
            jacobian: Some((0..j.nrows()).map(|i| j.row(i).iter().copied().collect()).collect()),
            eigenvalues: Some(r.eigenvalues.iter().map(|z| [z.re, z.im]).collect()),
            classification: Some(r.classification),
            ..ReportEntry::from(&r.fixed_point)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub model: String,
    #[serde(default)]
    pub fixed_points: Vec<ReportEntry>,
}

impl AnalysisReport {
    pub fn to_toml(&self) -> Result<String, ReportError> {
        Ok(format!("{REPORT_HEADER}\n{}", toml::to_string(self)?))
    }

    pub fn from_toml(text: &str) -> Result<Self, ReportError> {
        let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
        if first.trim() != REPORT_HEADER {
            return Err(ReportError::MissingHeader);
        }
        Ok(toml::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{find_fixed_points, stability, DEFAULT_MAX_ITER, DEFAULT_TOL};
    use crate::models::{fasttrack, FastTrackParams};

    #[test]
    fn fasttrack_report_round_trip() {
        let s = fasttrack(&FastTrackParams::default()).unwrap();
        let fps = find_fixed_points(&s, &[vec![4.0, 1.5]], DEFAULT_TOL, DEFAULT_MAX_ITER);
        let rep = stability(&s, fps[0].clone()).unwrap();
        let report = AnalysisReport { model: "fasttrack".into(), fixed_points: vec![(&rep).into()] };
        let text = report.to_toml().unwrap();
        assert!(text.starts_with(REPORT_HEADER));
        assert!(text.contains("classification = \"stable-focus\""), "{text}");
        let back = AnalysisReport::from_toml(&text).unwrap();
        assert_eq!(back, report);
        let e = back.fixed_points[0].eigenvalues.as_ref().unwrap();
        assert!((e[0][0] + 0.1).abs() < 1e-12 && (e[0][1] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn unconverged_entry_omits_linearization() {
        let fp = FixedPoint { state: vec![1.0], residual_norm: 2.0, converged: false };
        let report = AnalysisReport { model: "m".into(), fixed_points: vec![(&fp).into()] };
        let text = report.to_toml().unwrap();
        assert!(!text.contains("eigenvalues"));
        assert_eq!(AnalysisReport::from_toml(&text).unwrap(), report);
        assert!(matches!(AnalysisReport::from_toml("model = \"m\""), Err(ReportError::MissingHeader)));
    }
}
