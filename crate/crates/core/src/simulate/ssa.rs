//! Gillespie direct method.

use super::rng::RandomStream;
use super::{RunConfig, SimError, Trajectory, TrajectoryKind};
use crate::scheme::Scheme;

/// Why the event loop stopped.
pub(super) enum SsaEnd {
    /// Total propensity hit zero.
    Absorbed,
    /// Next event would fall after `t_end`.
    Horizon,
}

/// Core event loop. `on_event(t, state)` is called after every firing with the
/// new state; the initial state is not reported.
pub(super) fn ssa_events(
    scheme: &Scheme,
    initial: &[i64],
    t_end: f64,
    noise: &mut RandomStream,
    mut on_event: impl FnMut(f64, &[i64]) -> Result<(), SimError>,
) -> Result<SsaEnd, SimError> {
    let n = scheme.species_count();
    let mut counts = initial.to_vec();
    let mut x: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let mut aggregates = vec![0.0; scheme.definition().aggregates.len()];
    let mut props = vec![0.0; scheme.reaction_count()];
    let mut t = 0.0;
    loop {
        scheme.propensities_into(&x, &mut aggregates, &mut props);
        let total: f64 = props.iter().sum();
        // also catches NaN
        if total.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Ok(SsaEnd::Absorbed);
        }
        let tau = -noise.uniform_open0().ln() / total;
        if t + tau > t_end {
            return Ok(SsaEnd::Horizon);
        }
        t += tau;

        let target = noise.uniform() * total;
        let mut acc = 0.0;
        let mut chosen = None;
        for (alpha, &p) in props.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            chosen = Some(alpha);
            acc += p;
            if target < acc {
                break;
            }
        }
        // rounding can leave `target` just above the running sum; the last
        // reaction with positive rate is then the right choice
        let alpha = chosen.expect("positive total propensity");
        for (i, &r) in scheme.change(alpha).iter().enumerate() {
            counts[i] += r;
        }
        for i in 0..n {
            x[i] = counts[i] as f64;
        }
        on_event(t, &counts)?;
    }
}

pub(super) fn check_counts(scheme: &Scheme, initial: &[i64]) -> Result<(), SimError> {
    if initial.len() != scheme.species_count() {
        return Err(SimError::InvalidInitial(format!(
            "{} components given, scheme `{}` has {} species",
            initial.len(),
            scheme.name(),
            scheme.species_count()
        )));
    }
    if let Some(c) = initial.iter().find(|&&c| c < 0) {
        return Err(SimError::InvalidInitial(format!("counts must be nonnegative, got {c}")));
    }
    Ok(())
}

pub(super) fn negative_species(scheme: &Scheme, counts: &[i64]) -> Option<String> {
    counts
        .iter()
        .position(|&c| c < 0)
        .map(|i| scheme.definition().species[i].name.clone())
}

/// Exact stochastic simulation. Every `record_every`-th event is recorded,
/// plus the initial state and the final state. A run that reaches `t_end`
/// gets a closing record at `t_end`; an absorbed run ends at its last event.
pub fn ssa_run(scheme: &Scheme, initial: &[i64], config: &RunConfig) -> Result<Trajectory, SimError> {
    config.validate()?;
    check_counts(scheme, initial)?;
    let mut noise = RandomStream::new(config.seed);
    let mut traj = Trajectory::new(TrajectoryKind::Ssa);
    let as_f64 = |c: &[i64]| c.iter().map(|&v| v as f64).collect::<Vec<_>>();
    traj.push(0.0, &as_f64(initial));
    let mut events = 0usize;
    let mut last = (0.0, initial.to_vec());
    let end = ssa_events(scheme, initial, config.t_end, &mut noise, |t, counts| {
        events += 1;
        if let Some(species) = negative_species(scheme, counts) {
            traj.push(t, &as_f64(counts));
            return Err(SimError::NegativePopulation {
                time: t,
                species,
                partial: Box::new(std::mem::replace(&mut traj, Trajectory::new(TrajectoryKind::Ssa))),
            });
        }
        if events.is_multiple_of(config.record_every) {
            traj.push(t, &as_f64(counts));
        }
        last = (t, counts.to_vec());
        Ok(())
    })?;
    if !events.is_multiple_of(config.record_every) {
        traj.push(last.0, &as_f64(&last.1));
    }
    if let SsaEnd::Horizon = end {
        if *traj.times.last().unwrap() < config.t_end {
            traj.push(config.t_end, &as_f64(&last.1));
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{bittorrent_closed, fasttrack, FastTrackParams};

    #[test]
    fn single_possible_event() {
        let s = bittorrent_closed(0.3).unwrap();
        for seed in 0..20 {
            let cfg = RunConfig { seed, ..RunConfig::new(1e6, 0.01) };
            let t = ssa_run(&s, &[1, 1], &cfg).unwrap();
            assert_eq!(t.len(), 2);
            assert_eq!(t.final_state().unwrap(), &[0.0, 2.0]);
        }
    }

    #[test]
    fn absorbing_start_has_one_record() {
        let s = bittorrent_closed(0.3).unwrap();
        let t = ssa_run(&s, &[0, 7], &RunConfig::new(10.0, 0.1)).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.states[0], vec![0.0, 7.0]);
    }

    #[test]
    fn closed_total_is_exact_and_states_integral() {
        let s = bittorrent_closed(0.01).unwrap();
        let t = ssa_run(&s, &[200, 3], &RunConfig { seed: 5, ..RunConfig::new(5.0, 0.1) }).unwrap();
        for st in &t.states {
            assert_eq!(st[0] + st[1], 203.0);
            assert!(st.iter().all(|v| v.fract() == 0.0 && *v >= 0.0));
        }
        assert!(t.times.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn horizon_run_ends_at_t_end() {
        let s = fasttrack(&FastTrackParams::new(10.0, 0.01, 0.5)).unwrap();
        let cfg = RunConfig { seed: 3, record_every: 7, ..RunConfig::new(4.0, 0.1) };
        let t = ssa_run(&s, &[50, 20], &cfg).unwrap();
        assert_eq!(*t.times.last().unwrap(), 4.0);
        assert!(t.times.windows(2).all(|w| w[0] < w[1]));
        let again = ssa_run(&s, &[50, 20], &cfg).unwrap();
        assert_eq!(t, again);
    }

    #[test]
    fn negative_counts_are_reported() {
        use crate::scheme::{InteractionScheme, RateLaw, Reaction, Species};
        // removal that does not look at its own reactant
        let def = InteractionScheme {
            name: "leaky".into(),
            parameters: [("k".to_string(), 1.0)].into_iter().collect(),
            species: vec![Species { name: "A".into(), index: 0 }],
            aggregates: vec![],
            reactions: vec![Reaction {
                label: "drain".into(),
                reactants: vec![1],
                products: vec![0],
                rate: RateLaw::new("k", vec![]),
            }],
        };
        let s = Scheme::new(def).unwrap();
        let err = ssa_run(&s, &[2], &RunConfig::new(1e3, 0.1)).unwrap_err();
        assert!(matches!(err, SimError::NegativePopulation { ref species, .. } if species == "A"));
        assert_eq!(err.partial().unwrap().final_state().unwrap(), &[-1.0]);
    }
}
