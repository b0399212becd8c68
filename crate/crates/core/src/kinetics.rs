//! Drift, diffusion and Langevin noise factor of a scheme.
//!
//! With zero reverse rates the first two Kramers–Moyal coefficients are
//!
//! ```text
//! A   = Σ_α r^α s⁺_α(x)
//! B   = Σ_α r^α (r^α)ᵀ s⁺_α(x)
//! ```
//!
//! and the noise factor uses one column per reaction, `b[:, α] = r^α √s⁺_α`,
//! so that `b bᵀ = B` holds term by term, including on rank-deficient states.

use nalgebra::{DMatrix, DVector};

use crate::scheme::Scheme;

/// Drift, diffusion and noise factor evaluated at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticCoefficients {
    pub drift: DVector<f64>,
    pub diffusion: DMatrix<f64>,
    /// `n_species × n_reactions`.
    pub noise_factor: DMatrix<f64>,
}

pub fn coefficients(scheme: &Scheme, state: &[f64]) -> KineticCoefficients {
    let s = scheme.propensities(state);
    KineticCoefficients {
        drift: drift_from(scheme, &s),
        diffusion: diffusion_from(scheme, &s),
        noise_factor: noise_factor_from(scheme, &s),
    }
}

pub fn drift(scheme: &Scheme, state: &[f64]) -> DVector<f64> {
    drift_from(scheme, &scheme.propensities(state))
}

/// Drift written into a plain slice, given precomputed propensities.
pub fn drift_into(scheme: &Scheme, propensities: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|a| *a = 0.0);
    for (r, &s) in scheme.changes().iter().zip(propensities) {
        if s == 0.0 {
            continue;
        }
        for (a, &ri) in out.iter_mut().zip(r) {
            if ri != 0 {
                *a += ri as f64 * s;
            }
        }
    }
}

fn drift_from(scheme: &Scheme, propensities: &[f64]) -> DVector<f64> {
    let mut out = DVector::zeros(scheme.species_count());
    drift_into(scheme, propensities, out.as_mut_slice());
    out
}

pub fn diffusion(scheme: &Scheme, state: &[f64]) -> DMatrix<f64> {
    diffusion_from(scheme, &scheme.propensities(state))
}

fn diffusion_from(scheme: &Scheme, propensities: &[f64]) -> DMatrix<f64> {
    let n = scheme.species_count();
    let mut b = DMatrix::zeros(n, n);
    for (r, &s) in scheme.changes().iter().zip(propensities) {
        if s == 0.0 {
            continue;
        }
        for i in 0..n {
            if r[i] == 0 {
                continue;
            }
            for j in 0..n {
                b[(i, j)] += (r[i] * r[j]) as f64 * s;
            }
        }
    }
    b
}

pub fn noise_factor(scheme: &Scheme, state: &[f64]) -> DMatrix<f64> {
    noise_factor_from(scheme, &scheme.propensities(state))
}

fn noise_factor_from(scheme: &Scheme, propensities: &[f64]) -> DMatrix<f64> {
    let n = scheme.species_count();
    let mut b = DMatrix::zeros(n, scheme.reaction_count());
    for (alpha, (r, &s)) in scheme.changes().iter().zip(propensities).enumerate() {
        let root = s.max(0.0).sqrt();
        for i in 0..n {
            b[(i, alpha)] = r[i] as f64 * root;
        }
    }
    b
}

/// Analytic Jacobian `∂A_i/∂x_j` of the drift.
pub fn jacobian(scheme: &Scheme, state: &[f64]) -> DMatrix<f64> {
    let n = scheme.species_count();
    let aggregates = scheme.aggregate_values(state);
    let mut grad = vec![0.0; n];
    let mut jac = DMatrix::zeros(n, n);
    for (alpha, r) in scheme.changes().iter().enumerate() {
        scheme.propensity_gradient(alpha, state, &aggregates, &mut grad);
        for i in 0..n {
            if r[i] == 0 {
                continue;
            }
            for j in 0..n {
                jac[(i, j)] += r[i] as f64 * grad[j];
            }
        }
    }
    jac
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{bittorrent_closed, fasttrack, FastTrackParams};
    use approx::assert_abs_diff_eq;
    use nalgebra::dmatrix;

    fn ft() -> Scheme {
        fasttrack(&FastTrackParams { lambda: 1.0, beta: 0.1, mu: 0.5 }).unwrap()
    }

    #[test]
    fn fasttrack_drift_values() {
        let s = ft();
        assert_abs_diff_eq!(drift(&s, &[5.0, 2.0]), DVector::from_vec(vec![0.0, 0.0]), epsilon = 1e-15);
        assert_abs_diff_eq!(drift(&s, &[10.0, 1.0]), DVector::from_vec(vec![0.0, 0.5]), epsilon = 1e-15);
    }

    #[test]
    fn closed_bittorrent_coefficients() {
        let s = bittorrent_closed(0.5).unwrap();
        let c = coefficients(&s, &[2.0, 3.0]);
        assert_abs_diff_eq!(c.drift, DVector::from_vec(vec![-3.0, 3.0]), epsilon = 1e-15);
        assert_abs_diff_eq!(c.diffusion, dmatrix![3.0, -3.0; -3.0, 3.0], epsilon = 1e-15);
        let r3 = 3f64.sqrt();
        assert_abs_diff_eq!(c.noise_factor, dmatrix![-r3; r3], epsilon = 1e-15);
    }

    #[test]
    fn fasttrack_diffusion_and_noise_at_fixed_point() {
        let s = ft();
        let c = coefficients(&s, &[5.0, 2.0]);
        assert_abs_diff_eq!(c.diffusion, dmatrix![2.0, -1.0; -1.0, 2.0], epsilon = 1e-14);
        assert_abs_diff_eq!(c.noise_factor, dmatrix![1.0, -1.0, 0.0; 0.0, 1.0, -1.0], epsilon = 1e-14);
        let bbt = &c.noise_factor * c.noise_factor.transpose();
        assert_abs_diff_eq!(bbt, c.diffusion, epsilon = 1e-14);
    }

    #[test]
    fn vanishing_propensities_give_zero_matrices() {
        let s = bittorrent_closed(0.5).unwrap();
        let c = coefficients(&s, &[0.0, 4.0]);
        assert_eq!(c.diffusion, DMatrix::zeros(2, 2));
        assert_eq!(c.noise_factor, DMatrix::zeros(2, 1));
    }

    #[test]
    fn fasttrack_jacobian_at_fixed_point() {
        let j = jacobian(&ft(), &[5.0, 2.0]);
        assert_abs_diff_eq!(j, dmatrix![-0.2, -0.5; 0.2, 0.0], epsilon = 1e-15);
        // s² + (βλ/μ)s + βλ
        let trace = j.trace();
        let det = j.determinant();
        assert_abs_diff_eq!(-trace, 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(det, 0.1, epsilon = 1e-12);
    }

    #[test]
    fn influx_only_has_zero_jacobian() {
        use crate::scheme::{InteractionScheme, RateLaw, Reaction, Species};
        let def = InteractionScheme {
            name: "influx".into(),
            parameters: [("lambda".to_string(), 2.0)].into_iter().collect(),
            species: vec![Species { name: "N".into(), index: 0 }],
            aggregates: vec![],
            reactions: vec![Reaction {
                label: "arrive".into(),
                reactants: vec![0],
                products: vec![1],
                rate: RateLaw::new("lambda", vec![]),
            }],
        };
        let s = Scheme::new(def).unwrap();
        assert_eq!(jacobian(&s, &[3.0]), DMatrix::zeros(1, 1));
        assert_eq!(drift(&s, &[3.0])[0], 2.0);
    }
}
