//! Steady states and their linear stability.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::{eigenvalues, EigenError};
use crate::kinetics::{drift, jacobian};
use crate::models::FastTrackParams;
use crate::scheme::Scheme;
use crate::simulate::{integrate_ode, RunConfig, SimError, Trajectory};

/// Half-width of the zero-real-part band used by [`classify`].
pub const CLASSIFY_EPS: f64 = 1e-9;
/// Max-norm radius within which fixed points are merged.
pub const DEDUP_RADIUS: f64 = 1e-6;
pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 100;
const MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPoint {
    pub state: Vec<f64>,
    /// Max-norm of the drift at `state`.
    pub residual_norm: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    StableNode,
    StableFocus,
    UnstableNode,
    UnstableFocus,
    Saddle,
    Center,
    Degenerate,
}

impl Classification {
    pub fn name(self) -> &'static str {
        match self {
            Classification::StableNode => "stable-node",
            Classification::StableFocus => "stable-focus",
            Classification::UnstableNode => "unstable-node",
            Classification::UnstableFocus => "unstable-focus",
            Classification::Saddle => "saddle",
            Classification::Center => "center",
            Classification::Degenerate => "degenerate",
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Classification {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        use Classification::*;
        [StableNode, StableFocus, UnstableNode, UnstableFocus, Saddle, Center, Degenerate]
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown classification `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub fixed_point: FixedPoint,
    pub jacobian: DMatrix<f64>,
    pub eigenvalues: Vec<Complex64>,
    pub classification: Classification,
}

fn max_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Damped Newton iteration on the drift from a single start.
///
/// Each step solves `J δ = −A`; when `J` is singular the steepest-descent
/// direction `−Jᵀ A` of `½‖A‖²` is used instead. The step is halved until the
/// Euclidean residual decreases, at most 30 times.
///
/// A start with no negative component keeps every iterate in the nonnegative
/// orthant: trial points are projected onto it. Outside the orthant the
/// clamped propensities flatten the drift and Newton would stall there.
pub fn newton(scheme: &Scheme, start: &[f64], tol: f64, max_iter: usize) -> FixedPoint {
    let mut x = DVector::from_column_slice(start);
    let project = start.iter().all(|&v| v >= 0.0);
    let mut a = drift(scheme, x.as_slice());
    let mut polished = false;
    for _ in 0..max_iter {
        if max_norm(&a) < tol {
            // one extra step tightens the state well below the residual tolerance
            if polished {
                break;
            }
            polished = true;
        }
        let jac = jacobian(scheme, x.as_slice());
        let newton_dir = jac.clone().lu().solve(&(-&a)).filter(|d| d.iter().all(|v| v.is_finite()));
        let gradient_dir = -(jac.transpose() * &a);
        let directions = newton_dir.into_iter().chain(std::iter::once(gradient_dir));

        let norm = a.norm();
        let mut moved = false;
        'dirs: for dir in directions {
            let mut scale = 1.0;
            for _ in 0..=MAX_HALVINGS {
                let mut trial = &x + &dir * scale;
                if project {
                    trial.iter_mut().for_each(|v| *v = v.max(0.0));
                }
                let ta = drift(scheme, trial.as_slice());
                if ta.norm() < norm {
                    x = trial;
                    a = ta;
                    moved = true;
                    break 'dirs;
                }
                scale *= 0.5;
            }
        }
        if !moved {
            break;
        }
    }
    let residual_norm = max_norm(&a);
    FixedPoint { state: x.as_slice().to_vec(), residual_norm, converged: residual_norm < tol }
}

/// Multi-start Newton. Converged points within [`DEDUP_RADIUS`] of each other
/// are merged; starts that fail are reported with `converged = false`.
pub fn find_fixed_points(
    scheme: &Scheme,
    initial_guesses: &[Vec<f64>],
    tol: f64,
    max_iter: usize,
) -> Vec<FixedPoint> {
    assert!(tol > 0.0, "tolerance must be positive");
    let mut converged: Vec<FixedPoint> = Vec::new();
    let mut failed: Vec<FixedPoint> = Vec::new();
    for guess in initial_guesses {
        assert_eq!(guess.len(), scheme.species_count(), "guess dimension mismatch");
        let fp = newton(scheme, guess, tol, max_iter);
        let bucket = if fp.converged { &mut converged } else { &mut failed };
        let duplicate = bucket.iter().any(|q| {
            q.state.iter().zip(&fp.state).all(|(a, b)| (a - b).abs() <= DEDUP_RADIUS)
        });
        if !duplicate {
            bucket.push(fp);
        }
    }
    converged.extend(failed);
    converged
}

/// Starting points for [`find_fixed_points`]: the anchor (when known), the
/// anchor with each component scaled by 0.5 and by 1.5, and `random`
/// uniformly drawn positive points in `(0, 2·scale]` per component, where
/// `scale` is the anchor's largest component or 10 without an anchor.
pub fn multi_start(n: usize, anchor: Option<&[f64]>, random: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let mut scale = 10.0;
    if let Some(p) = anchor {
        out.push(p.to_vec());
        for i in 0..n {
            for f in [0.5, 1.5] {
                let mut q = p.to_vec();
                q[i] *= f;
                out.push(q);
            }
        }
        scale = p.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        if !(scale > 0.0 && scale.is_finite()) {
            scale = 10.0;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..random {
        out.push((0..n).map(|_| 2.0 * scale * (1.0 - rng.random::<f64>())).collect());
    }
    out
}

/// Type of an equilibrium from its spectrum; see [`CLASSIFY_EPS`].
pub fn classify(eigenvalues: &[Complex64]) -> Classification {
    assert!(!eigenvalues.is_empty(), "classification needs at least one eigenvalue");
    let eps = CLASSIFY_EPS;
    if eigenvalues.iter().any(|e| e.re.abs() <= eps) {
        let pure_imaginary = eigenvalues.iter().all(|e| e.re.abs() <= eps && e.im.abs() > eps);
        return if pure_imaginary { Classification::Center } else { Classification::Degenerate };
    }
    let oscillating = eigenvalues.iter().any(|e| e.im.abs() > eps);
    if eigenvalues.iter().all(|e| e.re < -eps) {
        if oscillating {
            Classification::StableFocus
        } else {
            Classification::StableNode
        }
    } else if eigenvalues.iter().all(|e| e.re > eps) {
        if oscillating {
            Classification::UnstableFocus
        } else {
            Classification::UnstableNode
        }
    } else {
        Classification::Saddle
    }
}

/// Closed-form FastTrack rule: `βλ < 4μ²` gives a stable focus, `βλ > 4μ²`
/// a stable node, equality is degenerate.
pub fn fasttrack_classification(params: &FastTrackParams) -> Classification {
    let lhs = params.beta * params.lambda;
    let rhs = 4.0 * params.mu * params.mu;
    if lhs < rhs {
        Classification::StableFocus
    } else if lhs > rhs {
        Classification::StableNode
    } else {
        Classification::Degenerate
    }
}

/// Jacobian, spectrum and classification at a fixed point.
pub fn stability(scheme: &Scheme, fixed_point: FixedPoint) -> Result<StabilityReport, EigenError> {
    let jac = jacobian(scheme, &fixed_point.state);
    let eigenvalues = eigenvalues(&jac)?;
    let classification = classify(&eigenvalues);
    Ok(StabilityReport { fixed_point, jacobian: jac, eigenvalues, classification })
}

/// One RK4 trajectory per initial condition `center + deviation`, computed in
/// parallel and returned in input order.
pub fn phase_portrait(
    scheme: &Scheme,
    center: &[f64],
    deviations: &[Vec<f64>],
    config: &RunConfig,
) -> Result<Vec<Trajectory>, SimError> {
    deviations
        .par_iter()
        .map(|dev| {
            if dev.len() != center.len() {
                return Err(SimError::InvalidInitial(format!(
                    "deviation has {} components, center has {}",
                    dev.len(),
                    center.len()
                )));
            }
            let start: Vec<f64> = center.iter().zip(dev).map(|(c, d)| c + d).collect();
            integrate_ode(scheme, &start, config)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{fasttrack, FastTrackParams};
    use crate::scheme::{InteractionScheme, Species};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn newton_finds_fasttrack_steady_state() {
        let s = fasttrack(&FastTrackParams::new(1.0, 0.1, 0.5)).unwrap();
        let fp = find_fixed_points(&s, &[vec![4.0, 3.0]], DEFAULT_TOL, DEFAULT_MAX_ITER);
        assert_eq!(fp.len(), 1);
        assert!(fp[0].converged);
        assert!((fp[0].state[0] - 5.0).abs() < 1e-12 && (fp[0].state[1] - 2.0).abs() < 1e-12);

        let s = fasttrack(&FastTrackParams::new(2.0, 0.5, 1.0)).unwrap();
        let fp = newton(&s, &[1.0, 1.0], DEFAULT_TOL, DEFAULT_MAX_ITER);
        assert!(fp.converged);
        assert!((fp.state[0] - 2.0).abs() < 1e-12 && (fp.state[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn empty_scheme_keeps_guess() {
        let def = InteractionScheme {
            name: "still".into(),
            species: vec![Species { name: "A".into(), index: 0 }, Species { name: "B".into(), index: 1 }],
            ..Default::default()
        };
        let s = Scheme::new(def).unwrap();
        let fp = find_fixed_points(&s, &[vec![3.0, 4.0]], DEFAULT_TOL, 10);
        assert_eq!(fp, vec![FixedPoint { state: vec![3.0, 4.0], residual_norm: 0.0, converged: true }]);
    }

    #[test]
    fn duplicates_merge() {
        let s = fasttrack(&FastTrackParams::default()).unwrap();
        let starts = multi_start(2, Some(&[5.0, 2.0]), 8, 1);
        assert_eq!(starts.len(), 1 + 4 + 8);
        let fp = find_fixed_points(&s, &starts, DEFAULT_TOL, DEFAULT_MAX_ITER);
        let good: Vec<_> = fp.iter().filter(|f| f.converged).collect();
        assert_eq!(good.len(), 1);
    }

    #[test]
    fn iterates_stay_nonnegative() {
        // steady state hugs n = 0; unprojected steps overshoot into n < 0
        let p = FastTrackParams::new(3.1668761802035763, 1.61029871882977, 0.07346765871564859);
        let s = fasttrack(&p).unwrap();
        let fp = newton(&s, &[11.95, 18.39], DEFAULT_TOL, DEFAULT_MAX_ITER);
        assert!(fp.converged);
        let want = crate::models::fasttrack_fixed_point(&p);
        assert!((fp.state[0] - want[0]).abs() < 1e-12 && (fp.state[1] - want[1]).abs() < 1e-9);
    }

    #[test]
    fn non_convergence_is_reported() {
        // pure influx: the drift is the constant λ and never vanishes
        let s = crate::formats::parse_scheme(
            "# onestep model v1\n[parameters]\nlambda = 2\n[species]\nN\n[reactions]\nin: 0 -> N @ lambda\n",
        )
        .unwrap();
        let fp = newton(&s, &[5.0], DEFAULT_TOL, DEFAULT_MAX_ITER);
        assert!(!fp.converged);
        assert_eq!(fp.residual_norm, 2.0);
        assert_eq!(fp.state, vec![5.0]);

        // a start that needs several steps is cut off by the iteration cap
        let s = fasttrack(&FastTrackParams::default()).unwrap();
        let fp = newton(&s, &[500.0, 0.01], DEFAULT_TOL, 1);
        assert!(!fp.converged);
    }

    #[test]
    fn classification_rules() {
        assert_eq!(classify(&[c(-0.1, 0.3), c(-0.1, -0.3)]), Classification::StableFocus);
        assert_eq!(classify(&[c(-0.536, 0.0), c(-7.464, 0.0)]), Classification::StableNode);
        assert_eq!(classify(&[c(1.0, 0.0), c(-1.0, 0.0)]), Classification::Saddle);
        assert_eq!(classify(&[c(0.2, 1.0), c(0.2, -1.0)]), Classification::UnstableFocus);
        assert_eq!(classify(&[c(2.0, 0.0), c(0.5, 0.0)]), Classification::UnstableNode);
        assert_eq!(classify(&[c(0.0, 1.0), c(0.0, -1.0)]), Classification::Center);
        assert_eq!(classify(&[c(0.0, 0.0), c(-1.0, 0.0)]), Classification::Degenerate);
    }

    #[test]
    fn closed_form_fasttrack_rule() {
        let f = |l, b, m| fasttrack_classification(&FastTrackParams::new(l, b, m));
        assert_eq!(f(1.0, 0.1, 0.5), Classification::StableFocus);
        assert_eq!(f(4.0, 1.0, 0.5), Classification::StableNode);
        assert_eq!(f(1.0, 4.0, 1.0), Classification::Degenerate);
    }

    #[test]
    fn stability_at_fasttrack_steady_state() {
        let s = fasttrack(&FastTrackParams::new(4.0, 1.0, 0.5)).unwrap();
        let fp = newton(&s, &[1.0, 5.0], DEFAULT_TOL, DEFAULT_MAX_ITER);
        let rep = stability(&s, fp).unwrap();
        assert_eq!(rep.classification, Classification::StableNode);
        let r3 = 3f64.sqrt();
        assert!((rep.eigenvalues[0].re - (-4.0 + 2.0 * r3)).abs() < 1e-12);
        assert!((rep.eigenvalues[1].re - (-4.0 - 2.0 * r3)).abs() < 1e-12);
    }

    #[test]
    fn classification_names_round_trip() {
        for name in ["stable-node", "stable-focus", "saddle", "center", "degenerate"] {
            assert_eq!(name.parse::<Classification>().unwrap().name(), name);
        }
    }

    #[test]
    fn phase_portrait_zero_deviation_is_constant() {
        let s = fasttrack(&FastTrackParams::new(1.0, 0.1, 0.5)).unwrap();
        let trajs = phase_portrait(&s, &[5.0, 2.0], &[vec![0.0, 0.0], vec![1.0, 1.0]], &RunConfig::new(50.0, 0.01))
            .unwrap();
        assert_eq!(trajs.len(), 2);
        for w in trajs[0].states.windows(2) {
            assert!((w[0][0] - w[1][0]).abs() < 1e-8 && (w[0][1] - w[1][1]).abs() < 1e-8);
        }
        assert_eq!(trajs[1].states[0], vec![6.0, 3.0]);
        assert!(phase_portrait(&s, &[5.0, 2.0], &[vec![1.0]], &RunConfig::new(1.0, 0.1)).is_err());
    }
}
