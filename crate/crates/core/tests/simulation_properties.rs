use onestep::models::{bittorrent_chunks, bittorrent_closed, fasttrack, ChunkModelParams, FastTrackParams};
use onestep::scheme::Scheme;
use onestep::simulate::{
    ensemble, integrate_euler, integrate_ode, integrate_sde, ssa_run, EnsembleMode, RunConfig, Trajectory,
};
use proptest::prelude::*;

fn influx(lambda: f64) -> Scheme {
    onestep::formats::parse_scheme(&format!(
        "# onestep model v1\n[parameters]\nlambda = {lambda:?}\n[species]\nN\n[reactions]\nin: 0 -> N @ lambda\n"
    ))
    .unwrap()
}

fn total_drift(t: &Trajectory, expect: f64) -> f64 {
    t.states.iter().map(|s| (s.iter().sum::<f64>() - expect).abs()).fold(0.0, f64::max)
}

#[test]
fn runs_are_deterministic() {
    let s = fasttrack(&FastTrackParams::default()).unwrap();
    let cfg = RunConfig { seed: 99, ..RunConfig::new(20.0, 0.01) };
    assert_eq!(integrate_ode(&s, &[10.0, 1.0], &cfg).unwrap(), integrate_ode(&s, &[10.0, 1.0], &cfg).unwrap());
    assert_eq!(integrate_sde(&s, &[10.0, 1.0], &cfg).unwrap(), integrate_sde(&s, &[10.0, 1.0], &cfg).unwrap());
    assert_eq!(ssa_run(&s, &[10, 1], &cfg).unwrap(), ssa_run(&s, &[10, 1], &cfg).unwrap());
    let other = RunConfig { seed: 100, ..cfg };
    assert_ne!(integrate_sde(&s, &[10.0, 1.0], &cfg).unwrap(), integrate_sde(&s, &[10.0, 1.0], &other).unwrap());
}

#[test]
fn closed_population_is_conserved() {
    let s = bittorrent_closed(0.02).unwrap();
    let x0 = [95.0, 5.0];
    let cfg = RunConfig { seed: 4, ..RunConfig::new(100.0, 0.01) };
    assert_eq!(cfg.steps(), 10_000);
    let ode = integrate_ode(&s, &x0, &cfg).unwrap();
    assert!(total_drift(&ode, 100.0) <= 1e-9);
    let sde = integrate_sde(&s, &x0, &cfg).unwrap();
    assert!(total_drift(&sde, 100.0) <= 1e-9);
    let ssa = ssa_run(&s, &[95, 5], &cfg).unwrap();
    assert_eq!(total_drift(&ssa, 100.0), 0.0);
}

#[test]
fn ssa_states_are_nonnegative_integers() {
    let mut p = ChunkModelParams::with_chunks(4);
    p.lambda = 5.0;
    let schemes = [fasttrack(&FastTrackParams::new(5.0, 0.05, 0.5)).unwrap(), bittorrent_chunks(&p).unwrap()];
    for s in &schemes {
        let x0: Vec<i64> = (0..s.species_count() as i64).map(|i| 3 + i).collect();
        for seed in 0..5 {
            let t = ssa_run(s, &x0, &RunConfig { seed, ..RunConfig::new(30.0, 0.1) }).unwrap();
            assert!(t.times.windows(2).all(|w| w[0] < w[1]));
            for st in &t.states {
                assert_eq!(st.len(), s.species_count());
                assert!(st.iter().all(|v| *v >= 0.0 && v.fract() == 0.0));
            }
        }
    }
}

fn endpoint(s: &Scheme, dt: f64) -> Vec<f64> {
    integrate_ode(s, &[10.0, 1.0], &RunConfig::new(10.0, dt)).unwrap().final_state().unwrap().to_vec()
}

fn err(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn rk4_is_fourth_order() {
    let s = fasttrack(&FastTrackParams::default()).unwrap();
    let reference = endpoint(&s, 0.1 / 64.0);
    let e1 = err(&endpoint(&s, 0.2), &reference);
    let e2 = err(&endpoint(&s, 0.1), &reference);
    let ratio = e1 / e2;
    assert!((12.0..=20.0).contains(&ratio), "ratio {ratio} ({e1} / {e2})");
}

#[test]
fn zero_noise_sde_is_euler_bitwise() {
    let s = fasttrack(&FastTrackParams::default()).unwrap();
    let cfg = RunConfig { noise_scale: 0.0, seed: 17, ..RunConfig::new(30.0, 0.01) };
    let sde = integrate_sde(&s, &[10.0, 1.0], &cfg).unwrap();
    let euler = integrate_euler(&s, &[10.0, 1.0], &cfg).unwrap();
    assert_eq!(sde.times, euler.times);
    for (a, b) in sde.states.iter().zip(&euler.states) {
        assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}

#[test]
fn euler_maruyama_is_weakly_consistent_for_influx() {
    let lambda = 3.0;
    let s = influx(lambda);
    let cfg = RunConfig { seed: 2024, ..RunConfig::new(2.0, 0.05) };
    let stats = ensemble(&s, &[0.0], &cfg, 10_000, EnsembleMode::Sde).unwrap();
    for (k, &t) in stats.times.iter().enumerate().skip(1) {
        let se = stats.standard_error(k, 0);
        assert!((stats.mean[k][0] - lambda * t).abs() <= 3.0 * se, "t={t}");
    }
    // variance grows like λt
    let last = stats.times.len() - 1;
    assert!((stats.variance[last][0] / (lambda * 2.0) - 1.0).abs() < 0.1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ensemble_variance_nonnegative(seed in any::<u64>(), runs in 2usize..6) {
        let s = fasttrack(&FastTrackParams::default()).unwrap();
        let cfg = RunConfig { seed, ..RunConfig::new(2.0, 0.1) };
        for mode in [EnsembleMode::Sde, EnsembleMode::Ssa] {
            let st = ensemble(&s, &[10.0, 1.0], &cfg, runs, mode).unwrap();
            prop_assert!(st.variance.iter().flatten().all(|&v| v >= 0.0));
            prop_assert_eq!(st.run_count, runs);
            prop_assert_eq!(st.times.len(), cfg.grid().len());
        }
    }

    #[test]
    fn ode_times_strictly_increase(t_end in 0.05..5.0f64, dt in 0.001..0.5f64, every in 1usize..10) {
        let s = fasttrack(&FastTrackParams::default()).unwrap();
        let cfg = RunConfig { record_every: every, ..RunConfig::new(t_end, dt) };
        let t = integrate_ode(&s, &[10.0, 1.0], &cfg).unwrap();
        prop_assert!(t.times.windows(2).all(|w| w[0] < w[1]));
        prop_assert!((t.times.last().unwrap() - t_end).abs() < 1e-9 * t_end.max(1.0) + dt);
        prop_assert_eq!(t.times[0], 0.0);
    }
}
