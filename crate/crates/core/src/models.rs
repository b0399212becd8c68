//! Built-in peer-to-peer protocol models.
//!
//! * FastTrack: new nodes `N` arrive, download the whole file from a
//!   supernode `L` and become supernodes, which eventually leave.
//! * BitTorrent, one chunk: a closed system (`N + C → 2C` only) and an open
//!   one that is FastTrack with the second species renamed to `C`.
//! * BitTorrent, `m` chunks: peers `N`, leecher classes `L1 … L{m-1}` (class
//!   `i` holds `i` chunks) and seeders `C`.
//! * BitTorrent, aggregated: the two-variable reduction of the `m`-chunk
//!   model in terms of peers and the combined leecher+seeder count `Y`.
//!
//! The `m`-chunk model needs the number of leechers that hold chunks of
//! interest to class `i`. That count is not pinned down by the protocol
//! description, so it is an [`Aggregate`] chosen by [`InterestPolicy`].
//!
//! The printed aggregated system writes the departure term as `μc` while its
//! state is the combined count `y`. Here departure is `μ·f·y` with a seeder
//! fraction `f` that defaults to 1, which makes the reduction exactly
//! FastTrack-shaped.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use thiserror::Error;

use crate::scheme::{
    Aggregate, Factor, InteractionScheme, RateLaw, Reaction, Scheme, SchemeError, Species,
};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model parameters: {0}")]
    InvalidParameters(String),
    #[error("unknown built-in model `{0}`")]
    UnknownModel(String),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FastTrackParams {
    pub lambda: f64,
    pub beta: f64,
    pub mu: f64,
}

impl Default for FastTrackParams {
    fn default() -> Self {
        FastTrackParams { lambda: 1.0, beta: 0.1, mu: 0.5 }
    }
}

impl FastTrackParams {
    pub fn new(lambda: f64, beta: f64, mu: f64) -> Self {
        FastTrackParams { lambda, beta, mu }
    }

    fn check(&self) -> Result<(), ModelError> {
        for (name, v) in [("lambda", self.lambda), ("beta", self.beta), ("mu", self.mu)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ModelError::InvalidParameters(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Which leechers count as holding chunks of interest to class `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InterestPolicy {
    /// Every leecher class `1 … m-1`.
    #[default]
    AllLeechers,
    /// Every leecher class except `i` itself.
    OthersOnly,
    /// Classes strictly above `i`.
    HigherClasses,
}

impl InterestPolicy {
    pub fn name(self) -> &'static str {
        match self {
            InterestPolicy::AllLeechers => "all-leechers",
            InterestPolicy::OthersOnly => "others-only",
            InterestPolicy::HigherClasses => "higher-classes",
        }
    }

    fn includes(self, class: usize, other: usize) -> bool {
        match self {
            InterestPolicy::AllLeechers => true,
            InterestPolicy::OthersOnly => other != class,
            InterestPolicy::HigherClasses => other > class,
        }
    }
}

impl fmt::Display for InterestPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InterestPolicy {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all-leechers" => Ok(InterestPolicy::AllLeechers),
            "others-only" => Ok(InterestPolicy::OthersOnly),
            "higher-classes" => Ok(InterestPolicy::HigherClasses),
            _ => Err(ModelError::InvalidParameters(format!(
                "unknown interest policy `{s}` (expected all-leechers, others-only or higher-classes)"
            ))),
        }
    }
}

/// Coefficients of the `m`-chunk model. Vectors are indexed from class 1,
/// so `beta_i[0]` is `β₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkModelParams {
    pub m: usize,
    pub lambda: f64,
    pub mu: f64,
    /// Peer–seeder coefficient.
    pub beta: f64,
    /// Peer–leecher coefficients, length `m-1`.
    pub beta_i: Vec<f64>,
    /// Leecher–leecher coefficients, length `m-1`. Only classes `1 … m-2`
    /// drive an interior advance; the last class completes through
    /// `gamma_last_peer`.
    pub delta_i: Vec<f64>,
    /// Leecher–seeder coefficients for interior classes, length `m-2`.
    pub gamma_i: Vec<f64>,
    /// Completion of class `m-1` through another leecher.
    pub gamma_last_peer: f64,
    /// Completion of class `m-1` through a seeder.
    pub gamma_last_seed: f64,
    pub interest_policy: InterestPolicy,
}

impl ChunkModelParams {
    /// Default coefficients for `m` chunks.
    pub fn with_chunks(m: usize) -> Self {
        ChunkModelParams {
            m,
            lambda: 1.0,
            mu: 0.5,
            beta: 0.1,
            beta_i: vec![0.05; m.saturating_sub(1)],
            delta_i: vec![0.05; m.saturating_sub(1)],
            gamma_i: vec![0.1; m.saturating_sub(2)],
            gamma_last_peer: 0.05,
            gamma_last_seed: 0.1,
            interest_policy: InterestPolicy::AllLeechers,
        }
    }

    fn check(&self) -> Result<(), ModelError> {
        let m = self.m;
        if m < 2 {
            return Err(ModelError::InvalidParameters(format!(
                "chunk count m must be at least 2, got {m} (use the open one-chunk model instead)"
            )));
        }
        for (name, len, want) in [
            ("beta_i", self.beta_i.len(), m - 1),
            ("delta_i", self.delta_i.len(), m - 1),
            ("gamma_i", self.gamma_i.len(), m - 2),
        ] {
            if len != want {
                return Err(ModelError::InvalidParameters(format!(
                    "{name} has length {len}, expected {want} for m = {m}"
                )));
            }
        }
        let scalars = [self.lambda, self.mu, self.beta, self.gamma_last_peer, self.gamma_last_seed];
        let all = scalars.iter().chain(&self.beta_i).chain(&self.delta_i).chain(&self.gamma_i);
        for &v in all {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(ModelError::InvalidParameters(format!(
                    "coefficients must be finite and nonnegative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

fn species(names: &[&str]) -> Vec<Species> {
    names
        .iter()
        .enumerate()
        .map(|(index, n)| Species { name: (*n).to_string(), index })
        .collect()
}

fn stoich(n: usize, entries: &[(usize, u32)]) -> Vec<u32> {
    let mut v = vec![0; n];
    for &(i, k) in entries {
        v[i] += k;
    }
    v
}

/// The three-reaction birth/infection/death shape shared by FastTrack, the
/// open BitTorrent model and the aggregated reduction.
fn three_reaction(
    name: &str,
    second: &str,
    parameters: Vec<(&str, f64)>,
    departure_rate: Vec<&str>,
) -> Result<Scheme, ModelError> {
    let def = InteractionScheme {
        name: name.to_string(),
        parameters: parameters.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        species: species(&["N", second]),
        aggregates: vec![],
        reactions: vec![
            Reaction {
                label: "arrival".into(),
                reactants: vec![0, 0],
                products: vec![1, 0],
                rate: RateLaw::new("lambda", vec![]),
            },
            Reaction {
                label: "download".into(),
                reactants: vec![1, 1],
                products: vec![0, 2],
                rate: RateLaw::new("beta", vec![Factor::species(0), Factor::species(1)]),
            },
            Reaction {
                label: "departure".into(),
                reactants: vec![0, 1],
                products: vec![0, 0],
                rate: RateLaw {
                    coefficients: departure_rate.into_iter().map(String::from).collect(),
                    factors: vec![Factor::species(1)],
                },
            },
        ],
    };
    Ok(Scheme::new(def)?)
}

/// `0 →λ N`, `N + L →β 2L`, `L →μ 0`.
pub fn fasttrack(params: &FastTrackParams) -> Result<Scheme, ModelError> {
    params.check()?;
    three_reaction(
        "fasttrack",
        "L",
        vec![("lambda", params.lambda), ("beta", params.beta), ("mu", params.mu)],
        vec!["mu"],
    )
}

/// Closed-form steady state `(μ/β, λ/μ)`.
pub fn fasttrack_fixed_point(params: &FastTrackParams) -> [f64; 2] {
    [params.mu / params.beta, params.lambda / params.mu]
}

/// Roots of `s² + (βλ/μ) s + βλ = 0`, the characteristic equation of the
/// FastTrack Jacobian at its steady state. The root with the larger real part
/// (or positive imaginary part) comes first.
pub fn fasttrack_char_roots(params: &FastTrackParams) -> [Complex64; 2] {
    let FastTrackParams { lambda, beta, mu } = *params;
    let b = beta * lambda / mu;
    let disc = b * b - 4.0 * beta * lambda;
    if disc >= 0.0 {
        let root = disc.sqrt();
        [Complex64::new(0.5 * (-b + root), 0.0), Complex64::new(0.5 * (-b - root), 0.0)]
    } else {
        let im = 0.5 * (-disc).sqrt();
        [Complex64::new(-0.5 * b, im), Complex64::new(-0.5 * b, -im)]
    }
}

/// `N + C →β 2C`.
pub fn bittorrent_closed(beta: f64) -> Result<Scheme, ModelError> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(ModelError::InvalidParameters(format!("beta must be positive, got {beta}")));
    }
    let def = InteractionScheme {
        name: "bittorrent-closed".into(),
        parameters: [("beta".to_string(), beta)].into_iter().collect(),
        species: species(&["N", "C"]),
        aggregates: vec![],
        reactions: vec![Reaction {
            label: "download".into(),
            reactants: vec![1, 1],
            products: vec![0, 2],
            rate: RateLaw::new("beta", vec![Factor::species(0), Factor::species(1)]),
        }],
    };
    Ok(Scheme::new(def)?)
}

/// Open one-chunk BitTorrent: FastTrack with seeders `C` in place of `L`.
pub fn bittorrent_open(params: &FastTrackParams) -> Result<Scheme, ModelError> {
    params.check()?;
    three_reaction(
        "bittorrent-open",
        "C",
        vec![("lambda", params.lambda), ("beta", params.beta), ("mu", params.mu)],
        vec!["mu"],
    )
}

/// Aggregated reduction with seeder fraction 1.
pub fn bittorrent_aggregated(params: &FastTrackParams) -> Result<Scheme, ModelError> {
    bittorrent_aggregated_with_fraction(params, 1.0)
}

/// Aggregated reduction `dn/dt = λ − β n y`, `dy/dt = β n y − μ f y`.
pub fn bittorrent_aggregated_with_fraction(
    params: &FastTrackParams,
    seed_fraction: f64,
) -> Result<Scheme, ModelError> {
    params.check()?;
    if !(0.0..=1.0).contains(&seed_fraction) {
        return Err(ModelError::InvalidParameters(format!(
            "seed_fraction must lie in [0, 1], got {seed_fraction}"
        )));
    }
    three_reaction(
        "bittorrent-aggregated",
        "Y",
        vec![
            ("lambda", params.lambda),
            ("beta", params.beta),
            ("mu", params.mu),
            ("seed_fraction", seed_fraction),
        ],
        vec!["mu", "seed_fraction"],
    )
}

/// The `m`-chunk BitTorrent model. Species are `N, L1, …, L{m-1}, C`.
#[allow(clippy::needless_range_loop)] // classes are 1-based
pub fn bittorrent_chunks(params: &ChunkModelParams) -> Result<Scheme, ModelError> {
    params.check()?;
    let m = params.m;
    let n_species = m + 1;
    let peer = 0;
    let seed = m;
    let leecher = |i: usize| i; // class i (1-based) sits at index i

    let mut names = vec!["N".to_string()];
    names.extend((1..m).map(|i| format!("L{i}")));
    names.push("C".into());

    let mut parameters: Vec<(String, f64)> = vec![
        ("lambda".into(), params.lambda),
        ("beta".into(), params.beta),
        ("mu".into(), params.mu),
    ];
    for (i, v) in params.beta_i.iter().enumerate() {
        parameters.push((format!("beta_{}", i + 1), *v));
    }
    for (i, v) in params.delta_i.iter().enumerate() {
        parameters.push((format!("delta_{}", i + 1), *v));
    }
    for (i, v) in params.gamma_i.iter().enumerate() {
        parameters.push((format!("gamma_{}", i + 1), *v));
    }
    parameters.push(("gamma_last_peer".into(), params.gamma_last_peer));
    parameters.push(("gamma_last_seed".into(), params.gamma_last_seed));

    // Interest aggregates for classes whose policy set is nonempty.
    let mut aggregates = Vec::new();
    let mut interest = vec![None; m];
    for class in 1..m {
        let mut weights = vec![0.0; n_species];
        for other in 1..m {
            if params.interest_policy.includes(class, other) {
                weights[leecher(other)] = 1.0;
            }
        }
        if weights.iter().any(|&w| w != 0.0) {
            interest[class] = Some(aggregates.len());
            aggregates.push(Aggregate { name: format!("lbar_{class}"), weights });
        }
    }

    let mut reactions = vec![
        Reaction {
            label: "arrival".into(),
            reactants: stoich(n_species, &[]),
            products: stoich(n_species, &[(peer, 1)]),
            rate: RateLaw::new("lambda", vec![]),
        },
        Reaction {
            label: "peer_from_seed".into(),
            reactants: stoich(n_species, &[(peer, 1), (seed, 1)]),
            products: stoich(n_species, &[(leecher(1), 1), (seed, 1)]),
            rate: RateLaw::new("beta", vec![Factor::species(peer), Factor::species(seed)]),
        },
    ];
    for i in 1..m {
        reactions.push(Reaction {
            label: format!("peer_from_leecher_{i}"),
            reactants: stoich(n_species, &[(peer, 1), (leecher(i), 1)]),
            products: stoich(n_species, &[(leecher(1), 1), (leecher(i), 1)]),
            rate: RateLaw::new(
                &format!("beta_{i}"),
                vec![Factor::species(peer), Factor::species(leecher(i))],
            ),
        });
    }
    for i in 1..m.saturating_sub(1) {
        if let Some(a) = interest[i] {
            reactions.push(Reaction {
                label: format!("advance_via_leecher_{i}"),
                reactants: stoich(n_species, &[(leecher(i), 1)]),
                products: stoich(n_species, &[(leecher(i + 1), 1)]),
                rate: RateLaw::new(
                    &format!("delta_{i}"),
                    vec![Factor::species(leecher(i)), Factor::aggregate(a)],
                ),
            });
        }
        reactions.push(Reaction {
            label: format!("advance_via_seed_{i}"),
            reactants: stoich(n_species, &[(leecher(i), 1), (seed, 1)]),
            products: stoich(n_species, &[(leecher(i + 1), 1), (seed, 1)]),
            rate: RateLaw::new(
                &format!("gamma_{i}"),
                vec![Factor::species(leecher(i)), Factor::species(seed)],
            ),
        });
    }
    let last = leecher(m - 1);
    if let Some(a) = interest[m - 1] {
        reactions.push(Reaction {
            label: "complete_via_leecher".into(),
            reactants: stoich(n_species, &[(last, 1)]),
            products: stoich(n_species, &[(seed, 1)]),
            rate: RateLaw::new("gamma_last_peer", vec![Factor::species(last), Factor::aggregate(a)]),
        });
    }
    reactions.push(Reaction {
        label: "complete_via_seed".into(),
        reactants: stoich(n_species, &[(last, 1), (seed, 1)]),
        products: stoich(n_species, &[(seed, 2)]),
        rate: RateLaw::new("gamma_last_seed", vec![Factor::species(last), Factor::species(seed)]),
    });
    reactions.push(Reaction {
        label: "departure".into(),
        reactants: stoich(n_species, &[(seed, 1)]),
        products: stoich(n_species, &[]),
        rate: RateLaw::new("mu", vec![Factor::species(seed)]),
    });

    let def = InteractionScheme {
        name: "bittorrent-chunks".into(),
        parameters: parameters.into_iter().collect(),
        species: names
            .into_iter()
            .enumerate()
            .map(|(index, name)| Species { name, index })
            .collect(),
        aggregates,
        reactions,
    };
    Ok(Scheme::new(def)?)
}

/// Built-in models addressable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinModel {
    FastTrack,
    BitTorrentClosed,
    BitTorrentOpen,
    BitTorrentChunks,
    BitTorrentAggregated,
}

impl BuiltinModel {
    pub const ALL: [BuiltinModel; 5] = [
        BuiltinModel::FastTrack,
        BuiltinModel::BitTorrentClosed,
        BuiltinModel::BitTorrentOpen,
        BuiltinModel::BitTorrentChunks,
        BuiltinModel::BitTorrentAggregated,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BuiltinModel::FastTrack => "fasttrack",
            BuiltinModel::BitTorrentClosed => "bittorrent-closed",
            BuiltinModel::BitTorrentOpen => "bittorrent-open",
            BuiltinModel::BitTorrentChunks => "bittorrent-chunks",
            BuiltinModel::BitTorrentAggregated => "bittorrent-aggregated",
        }
    }

    /// Builds the model with default coefficients, then applies `overrides`
    /// by parameter name. For the chunk model the pseudo-parameter `m`
    /// selects the chunk count; `policy` is only accepted by that model.
    pub fn build(
        self,
        overrides: &[(String, f64)],
        policy: Option<InterestPolicy>,
    ) -> Result<Scheme, ModelError> {
        if policy.is_some() && self != BuiltinModel::BitTorrentChunks {
            return Err(ModelError::InvalidParameters(format!(
                "an interest policy only applies to bittorrent-chunks, not {}",
                self.name()
            )));
        }
        let mut rest: Vec<(String, f64)> = Vec::with_capacity(overrides.len());
        let mut chunks = None;
        for (k, v) in overrides {
            if k == "m" && self == BuiltinModel::BitTorrentChunks {
                if v.fract() != 0.0 || *v < 0.0 || *v > 1e6 {
                    return Err(ModelError::InvalidParameters(format!("m must be an integer, got {v}")));
                }
                chunks = Some(*v as usize);
            } else {
                rest.push((k.clone(), *v));
            }
        }
        let base = match self {
            BuiltinModel::FastTrack => fasttrack(&FastTrackParams::default())?,
            BuiltinModel::BitTorrentClosed => bittorrent_closed(0.5)?,
            BuiltinModel::BitTorrentOpen => bittorrent_open(&FastTrackParams::default())?,
            BuiltinModel::BitTorrentAggregated => bittorrent_aggregated(&FastTrackParams::default())?,
            BuiltinModel::BitTorrentChunks => {
                let mut p = ChunkModelParams::with_chunks(chunks.unwrap_or(3));
                p.interest_policy = policy.unwrap_or_default();
                bittorrent_chunks(&p)?
            }
        };
        let scheme = base.with_parameters(&rest)?;
        if matches!(
            self,
            BuiltinModel::FastTrack | BuiltinModel::BitTorrentOpen | BuiltinModel::BitTorrentAggregated
        ) {
            read_fasttrack_params(&scheme).check()?;
        }
        if self == BuiltinModel::BitTorrentClosed {
            let beta = scheme.parameter("beta").unwrap_or(0.0);
            if beta <= 0.0 {
                return Err(ModelError::InvalidParameters(format!("beta must be positive, got {beta}")));
            }
        }
        Ok(scheme)
    }

    /// Closed-form steady state, where one exists.
    pub fn analytic_fixed_point(self, scheme: &Scheme) -> Option<Vec<f64>> {
        match self {
            BuiltinModel::FastTrack | BuiltinModel::BitTorrentOpen => {
                Some(fasttrack_fixed_point(&read_fasttrack_params(scheme)).to_vec())
            }
            BuiltinModel::BitTorrentAggregated => {
                let p = read_fasttrack_params(scheme);
                let f = scheme.parameter("seed_fraction")?;
                (f > 0.0).then(|| vec![p.mu * f / p.beta, p.lambda / (p.mu * f)])
            }
            BuiltinModel::BitTorrentClosed | BuiltinModel::BitTorrentChunks => None,
        }
    }
}

fn read_fasttrack_params(scheme: &Scheme) -> FastTrackParams {
    let get = |k: &str| scheme.parameter(k).unwrap_or(f64::NAN);
    FastTrackParams { lambda: get("lambda"), beta: get("beta"), mu: get("mu") }
}

impl fmt::Display for BuiltinModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BuiltinModel {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BuiltinModel::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| ModelError::UnknownModel(s.to_string()))
    }
}
