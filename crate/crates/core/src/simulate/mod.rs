//! Time evolution of a scheme.
//!
//! Three engines share one [`Trajectory`] type:
//!
//! * [`integrate_ode`]: classical fixed-step RK4 on `dx/dt = A(x)`;
//! * [`integrate_sde`]: Euler–Maruyama on the Langevin form
//!   `dx = A dt + b dW`, with one Wiener increment per reaction;
//! * [`ssa_run`]: Gillespie's direct method on the integer jump process.
//!
//! [`ensemble`] repeats stochastic runs with derived seeds and returns
//! pointwise mean and variance on the deterministic time grid.

mod ensemble;
pub mod rng;
mod ssa;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinetics::drift_into;
use crate::scheme::Scheme;

pub use ensemble::{ensemble, ensemble_with_seeds, EnsembleMode, EnsembleStats};
pub use rng::{derive_seed, RandomStream};
pub use ssa::ssa_run;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrajectoryKind {
    Ode,
    Sde,
    Ssa,
}

/// Recorded states over time, one state vector per entry of `times`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub kind: TrajectoryKind,
}

impl Trajectory {
    fn new(kind: TrajectoryKind) -> Self {
        Trajectory { times: Vec::new(), states: Vec::new(), kind }
    }

    fn push(&mut self, t: f64, state: &[f64]) {
        self.times.push(t);
        self.states.push(state.to_vec());
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> Option<&[f64]> {
        self.states.last().map(Vec::as_slice)
    }

    /// Values of one species over time.
    pub fn component(&self, species: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[species]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub t_end: f64,
    /// Fixed step for ODE/SDE runs and the ensemble time grid.
    pub dt: f64,
    pub seed: u64,
    /// Keep every `record_every`-th step (or SSA event). The final state is
    /// always kept.
    pub record_every: usize,
    /// Multiplier on the noise factor; zero turns the SDE into explicit Euler.
    pub noise_scale: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { t_end: 100.0, dt: 0.01, seed: 0, record_every: 1, noise_scale: 1.0 }
    }
}

impl RunConfig {
    pub fn new(t_end: f64, dt: f64) -> Self {
        RunConfig { t_end, dt, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidConfig(msg));
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if self.record_every == 0 {
            return bad("record_every must be at least 1".into());
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return bad(format!("noise_scale must be nonnegative, got {}", self.noise_scale));
        }
        if self.t_end / self.dt > 1e9 {
            return bad(format!("t_end / dt = {} steps is too many", self.t_end / self.dt));
        }
        Ok(())
    }

    /// Number of fixed steps; the last step lands within `dt` of `t_end`.
    pub fn steps(&self) -> usize {
        ((self.t_end / self.dt) - 1e-9).ceil().max(1.0) as usize
    }

    fn records(&self, step: usize) -> bool {
        step.is_multiple_of(self.record_every) || step == self.steps()
    }

    /// Times recorded by fixed-step integrators under this config.
    pub fn grid(&self) -> Vec<f64> {
        (0..=self.steps()).filter(|&k| self.records(k)).map(|k| k as f64 * self.dt).collect()
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid initial state: {0}")]
    InvalidInitial(String),
    #[error("non-finite state at t = {time}")]
    NonFinite { time: f64, partial: Box<Trajectory> },
    #[error("species `{species}` became negative at t = {time}")]
    NegativePopulation { time: f64, species: String, partial: Box<Trajectory> },
    #[error("ensemble run {run} failed: {source}")]
    EnsembleRun {
        run: usize,
        #[source]
        source: Box<SimError>,
    },
}

impl SimError {
    /// Trajectory recorded up to the failure, if the run produced one.
    pub fn partial(&self) -> Option<&Trajectory> {
        match self {
            SimError::NonFinite { partial, .. } | SimError::NegativePopulation { partial, .. } => {
                Some(partial)
            }
            SimError::EnsembleRun { source, .. } => source.partial(),
            _ => None,
        }
    }
}

fn check_initial(scheme: &Scheme, initial: &[f64]) -> Result<(), SimError> {
    if initial.len() != scheme.species_count() {
        return Err(SimError::InvalidInitial(format!(
            "{} components given, scheme `{}` has {} species",
            initial.len(),
            scheme.name(),
            scheme.species_count()
        )));
    }
    if let Some(x) = initial.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(SimError::InvalidInitial(format!("components must be finite and nonnegative, got {x}")));
    }
    Ok(())
}

/// Scratch buffers for repeated drift evaluation.
#[derive(Debug, Clone)]
struct Workspace {
    aggregates: Vec<f64>,
    propensities: Vec<f64>,
}

impl Workspace {
    fn new(scheme: &Scheme) -> Self {
        Workspace {
            aggregates: vec![0.0; scheme.definition().aggregates.len()],
            propensities: vec![0.0; scheme.reaction_count()],
        }
    }

    fn drift(&mut self, scheme: &Scheme, state: &[f64], out: &mut [f64]) {
        scheme.propensities_into(state, &mut self.aggregates, &mut self.propensities);
        drift_into(scheme, &self.propensities, out);
    }
}

/// Runs a fixed-step integrator, recording per `config` and stopping at the
/// first non-finite state.
fn run_fixed_step(
    scheme: &Scheme,
    initial: &[f64],
    config: &RunConfig,
    kind: TrajectoryKind,
    mut step: impl FnMut(&mut [f64]),
) -> Result<Trajectory, SimError> {
    config.validate()?;
    check_initial(scheme, initial)?;
    let steps = config.steps();
    let mut traj = Trajectory::new(kind);
    let mut x = initial.to_vec();
    traj.push(0.0, &x);
    for k in 1..=steps {
        step(&mut x);
        let t = k as f64 * config.dt;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SimError::NonFinite { time: t, partial: Box::new(traj) });
        }
        if config.records(k) {
            traj.push(t, &x);
        }
    }
    Ok(traj)
}

/// Classical fourth-order Runge–Kutta with fixed step `config.dt`.
pub fn integrate_ode(scheme: &Scheme, initial: &[f64], config: &RunConfig) -> Result<Trajectory, SimError> {
    let n = scheme.species_count();
    let dt = config.dt;
    let mut ws = Workspace::new(scheme);
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    run_fixed_step(scheme, initial, config, TrajectoryKind::Ode, |x| {
        ws.drift(scheme, x, &mut k1);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * dt * k1[i];
        }
        ws.drift(scheme, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * dt * k2[i];
        }
        ws.drift(scheme, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = x[i] + dt * k3[i];
        }
        ws.drift(scheme, &tmp, &mut k4);
        for i in 0..n {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    })
}

/// Explicit Euler on the drift; the zero-noise limit of [`integrate_sde`].
pub fn integrate_euler(scheme: &Scheme, initial: &[f64], config: &RunConfig) -> Result<Trajectory, SimError> {
    let n = scheme.species_count();
    let dt = config.dt;
    let mut ws = Workspace::new(scheme);
    let mut a = vec![0.0; n];
    run_fixed_step(scheme, initial, config, TrajectoryKind::Ode, |x| {
        ws.drift(scheme, x, &mut a);
        for i in 0..n {
            x[i] += a[i] * dt;
        }
    })
}

/// One step of a stochastic integrator for the Langevin form of a scheme.
pub trait SdeStepper {
    fn advance(
        &mut self,
        scheme: &Scheme,
        state: &mut [f64],
        dt: f64,
        noise_scale: f64,
        noise: &mut RandomStream,
    );
}

/// `x ← x + A dt + noise_scale · b ξ √dt` with `b[:, α] = r^α √s⁺_α` and
/// `ξ` one standard normal per reaction.
#[derive(Debug, Clone)]
pub struct EulerMaruyama {
    ws: Workspace,
    drift: Vec<f64>,
}

impl EulerMaruyama {
    pub fn new(scheme: &Scheme) -> Self {
        EulerMaruyama { ws: Workspace::new(scheme), drift: vec![0.0; scheme.species_count()] }
    }
}

impl SdeStepper for EulerMaruyama {
    fn advance(
        &mut self,
        scheme: &Scheme,
        state: &mut [f64],
        dt: f64,
        noise_scale: f64,
        noise: &mut RandomStream,
    ) {
        // propensities stay in the workspace for the noise term below
        self.ws.drift(scheme, state, &mut self.drift);
        for (x, a) in state.iter_mut().zip(&self.drift) {
            *x += a * dt;
        }
        if noise_scale == 0.0 {
            return;
        }
        let sqrt_dt = dt.sqrt();
        for (r, s) in scheme.changes().iter().zip(&self.ws.propensities) {
            let xi = noise.standard_normal();
            let w = noise_scale * s.max(0.0).sqrt() * xi * sqrt_dt;
            if w == 0.0 {
                continue;
            }
            for (x, &ri) in state.iter_mut().zip(r) {
                if ri != 0 {
                    *x += ri as f64 * w;
                }
            }
        }
    }
}

/// Euler–Maruyama integration of the Langevin equation.
pub fn integrate_sde(scheme: &Scheme, initial: &[f64], config: &RunConfig) -> Result<Trajectory, SimError> {
    integrate_sde_with(&mut EulerMaruyama::new(scheme), scheme, initial, config)
}

/// SDE integration with a caller-supplied stepper.
pub fn integrate_sde_with(
    stepper: &mut impl SdeStepper,
    scheme: &Scheme,
    initial: &[f64],
    config: &RunConfig,
) -> Result<Trajectory, SimError> {
    let mut noise = RandomStream::new(config.seed);
    let (dt, scale) = (config.dt, config.noise_scale);
    run_fixed_step(scheme, initial, config, TrajectoryKind::Sde, |x| {
        stepper.advance(scheme, x, dt, scale, &mut noise);
    })
    .map(|mut t| {
        t.kind = TrajectoryKind::Sde;
        t
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{bittorrent_closed, fasttrack, FastTrackParams};

    fn ft() -> Scheme {
        fasttrack(&FastTrackParams::new(1.0, 0.1, 0.5)).unwrap()
    }

    #[test]
    fn step_count_and_grid() {
        let c = RunConfig::new(1.0, 0.1);
        assert_eq!(c.steps(), 10);
        let g = c.grid();
        assert_eq!(g.len(), 11);
        assert!((g[10] - 1.0).abs() < 1e-12);
        let c = RunConfig { record_every: 4, ..RunConfig::new(1.0, 0.1) };
        assert_eq!(c.grid().len(), 4); // 0, 4, 8, 10
        let c = RunConfig::new(1.05, 0.1);
        assert_eq!(c.steps(), 11);
    }

    #[test]
    fn config_validation() {
        assert!(RunConfig::new(0.0, 0.1).validate().is_err());
        assert!(RunConfig::new(1.0, -0.1).validate().is_err());
        assert!(RunConfig { record_every: 0, ..Default::default() }.validate().is_err());
        assert!(RunConfig { noise_scale: -1.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn equilibrium_is_constant() {
        let t = integrate_ode(&ft(), &[5.0, 2.0], &RunConfig::new(100.0, 0.01)).unwrap();
        for s in &t.states {
            assert!((s[0] - 5.0).abs() < 1e-10 && (s[1] - 2.0).abs() < 1e-10);
        }
        assert!((t.times.last().unwrap() - 100.0).abs() < 0.01);
    }

    #[test]
    fn closed_system_conserves_total() {
        let s = bittorrent_closed(0.5).unwrap();
        let t = integrate_ode(&s, &[10.0, 1.0], &RunConfig::new(50.0, 0.01)).unwrap();
        for st in &t.states {
            assert!((st[0] + st[1] - 11.0).abs() < 1e-9);
        }
    }

    #[test]
    fn focus_regime_converges() {
        let t = integrate_ode(&ft(), &[10.0, 1.0], &RunConfig::new(200.0, 0.01)).unwrap();
        let last = t.final_state().unwrap();
        assert!((last[0] - 5.0).abs() < 1e-4 && (last[1] - 2.0).abs() < 1e-4, "{last:?}");
    }

    #[test]
    fn sde_is_deterministic_per_seed() {
        let cfg = RunConfig { seed: 9, ..RunConfig::new(10.0, 0.01) };
        let a = integrate_sde(&ft(), &[10.0, 1.0], &cfg).unwrap();
        let b = integrate_sde(&ft(), &[10.0, 1.0], &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.kind, TrajectoryKind::Sde);
        let c = integrate_sde(&ft(), &[10.0, 1.0], &RunConfig { seed: 10, ..cfg }).unwrap();
        assert_ne!(a.states, c.states);
    }

    #[test]
    fn zero_noise_matches_euler_bitwise() {
        let cfg = RunConfig { noise_scale: 0.0, ..RunConfig::new(20.0, 0.05) };
        let a = integrate_sde(&ft(), &[10.0, 1.0], &cfg).unwrap();
        let b = integrate_euler(&ft(), &[10.0, 1.0], &cfg).unwrap();
        assert_eq!(a.states, b.states);
    }

    #[test]
    fn rejects_wrong_initial() {
        assert!(matches!(
            integrate_ode(&ft(), &[1.0], &RunConfig::default()),
            Err(SimError::InvalidInitial(_))
        ));
        assert!(matches!(
            integrate_ode(&ft(), &[1.0, -1.0], &RunConfig::default()),
            Err(SimError::InvalidInitial(_))
        ));
    }

    #[test]
    fn blow_up_returns_partial_trajectory() {
        use crate::scheme::{Factor, InteractionScheme, RateLaw, Reaction, Source, Species};
        // A → 2A at rate A²: explicit Euler overflows within a few steps
        let def = InteractionScheme {
            name: "explode".into(),
            parameters: [("k".to_string(), 1.0)].into_iter().collect(),
            species: vec![Species { name: "A".into(), index: 0 }],
            aggregates: vec![],
            reactions: vec![Reaction {
                label: "grow".into(),
                reactants: vec![1],
                products: vec![2],
                rate: RateLaw::new("k", vec![Factor { source: Source::Species(0), exponent: 2 }]),
            }],
        };
        let s = Scheme::new(def).unwrap();
        let err = integrate_euler(&s, &[10.0], &RunConfig::new(100.0, 1.0)).unwrap_err();
        let partial = err.partial().expect("partial trajectory");
        assert!(!partial.is_empty() && partial.len() < 100);
        assert!(matches!(err, SimError::NonFinite { .. }));
    }
}
