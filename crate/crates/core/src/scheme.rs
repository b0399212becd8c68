//! Interaction schemes for one-step processes.
//!
//! A scheme is a symbolic list of reactions over a fixed set of species. Each
//! reaction carries a before-operator (`reactants`), an after-operator
//! (`products`) and a rate law of the form
//!
//! ```text
//! s⁺(x) = (p₁ · p₂ · …) · Π_k v_k(x)^{e_k}
//! ```
//!
//! where the `p` are named parameters and each `v_k` is either a species count
//! or an [`Aggregate`], i.e. a fixed linear combination of species counts.
//! Reverse transition rates are always zero; a scheme that wants one encodes
//! it as a separate reaction.
//!
//! [`InteractionScheme`] is the plain, editable record. [`Scheme`] is the
//! validated form used by every numerical routine: parameter references are
//! resolved to numbers and change vectors are precomputed.

use std::collections::HashSet;
use std::fmt;

use indexmap::IndexMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Species {
    pub name: String,
    /// Position in the state vector.
    pub index: usize,
}

/// What a rate-law factor reads from the state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Source {
    Species(usize),
    Aggregate(usize),
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Species(i) => write!(f, "species #{i}"),
            Source::Aggregate(i) => write!(f, "aggregate #{i}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Factor {
    pub source: Source,
    pub exponent: u32,
}

impl Factor {
    pub fn species(index: usize) -> Self {
        Factor { source: Source::Species(index), exponent: 1 }
    }

    pub fn aggregate(index: usize) -> Self {
        Factor { source: Source::Aggregate(index), exponent: 1 }
    }
}

/// Monomial rate law: product of named parameters times a product of powers
/// of species counts and aggregates. An empty `coefficients` list means a
/// constant factor of one.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RateLaw {
    pub coefficients: Vec<String>,
    pub factors: Vec<Factor>,
}

impl RateLaw {
    pub fn new(coefficient: &str, factors: Vec<Factor>) -> Self {
        RateLaw { coefficients: vec![coefficient.to_string()], factors }
    }
}

/// A named linear combination of species counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub name: String,
    /// One weight per species.
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reaction {
    pub label: String,
    /// Before-operator: multiplicity of each species consumed.
    pub reactants: Vec<u32>,
    /// After-operator: multiplicity of each species produced.
    pub products: Vec<u32>,
    pub rate: RateLaw,
}

/// Change vector `r = products − reactants`.
pub fn change_vector(reaction: &Reaction) -> Vec<i64> {
    reaction
        .products
        .iter()
        .zip(&reaction.reactants)
        .map(|(&m, &n)| i64::from(m) - i64::from(n))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct InteractionScheme {
    pub name: String,
    pub parameters: IndexMap<String, f64>,
    pub species: Vec<Species>,
    pub aggregates: Vec<Aggregate>,
    pub reactions: Vec<Reaction>,
}

/// A single problem found by [`InteractionScheme::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    InvalidName { kind: &'static str, name: String },
    DuplicateSpecies(String),
    SpeciesIndex { name: String, expected: usize, found: usize },
    DuplicateAggregate(String),
    DuplicateReaction(String),
    DuplicateName(String),
    AggregateDimension { name: String, expected: usize, found: usize },
    EmptyAggregate(String),
    NonFiniteWeight(String),
    NonFiniteParameter(String),
    ReactionDimension { label: String, expected: usize, found: usize },
    UnresolvedSource { label: String, source: Source },
    UnresolvedParameter { label: String, name: String },
    NegativeRateConstant { label: String, value: f64 },
    ZeroExponent { label: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::InvalidName { kind, name } => write!(f, "invalid {kind} name `{name}`"),
            Violation::DuplicateSpecies(n) => write!(f, "duplicate species `{n}`"),
            Violation::SpeciesIndex { name, expected, found } => {
                write!(f, "species `{name}` has index {found}, expected {expected}")
            }
            Violation::DuplicateAggregate(n) => write!(f, "duplicate aggregate `{n}`"),
            Violation::DuplicateReaction(n) => write!(f, "duplicate reaction label `{n}`"),
            Violation::DuplicateName(n) => {
                write!(f, "name `{n}` is used by more than one parameter/species/aggregate")
            }
            Violation::AggregateDimension { name, expected, found } => {
                write!(f, "aggregate `{name}` has {found} weights, expected {expected}")
            }
            Violation::EmptyAggregate(n) => write!(f, "aggregate `{n}` has no nonzero weight"),
            Violation::NonFiniteWeight(n) => write!(f, "aggregate `{n}` has a non-finite weight"),
            Violation::NonFiniteParameter(n) => write!(f, "parameter `{n}` is not finite"),
            Violation::ReactionDimension { label, expected, found } => write!(
                f,
                "reaction `{label}`: stoichiometry has {found} entries, expected {expected}"
            ),
            Violation::UnresolvedSource { label, source } => {
                write!(f, "reaction `{label}`: unresolved source {source}")
            }
            Violation::UnresolvedParameter { label, name } => {
                write!(f, "reaction `{label}`: unresolved parameter `{name}`")
            }
            Violation::NegativeRateConstant { label, value } => {
                write!(f, "reaction `{label}`: negative rate constant {value}")
            }
            Violation::ZeroExponent { label } => {
                write!(f, "reaction `{label}`: rate-law exponents must be at least 1")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum SchemeError {
    #[error("invalid scheme: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Identifier rule shared by the model-file format: `[A-Za-z_][A-Za-z0-9_]*`.
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl InteractionScheme {
    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s.name == name)
    }

    pub fn aggregate_index(&self, name: &str) -> Option<usize> {
        self.aggregates.iter().position(|a| a.name == name)
    }

    /// Checks the whole scheme and reports every violation found.
    pub fn validate(&self) -> Result<(), Vec<Violation>> {
        let mut out = Vec::new();
        let n = self.species.len();

        let mut all_names = HashSet::new();
        let mut claim = |name: &str, out: &mut Vec<Violation>| {
            if !all_names.insert(name.to_string()) {
                out.push(Violation::DuplicateName(name.to_string()));
            }
        };

        for (name, value) in &self.parameters {
            if !is_identifier(name) {
                out.push(Violation::InvalidName { kind: "parameter", name: name.clone() });
            }
            if !value.is_finite() {
                out.push(Violation::NonFiniteParameter(name.clone()));
            }
            claim(name, &mut out);
        }

        let mut seen = HashSet::new();
        for (i, sp) in self.species.iter().enumerate() {
            if !is_identifier(&sp.name) {
                out.push(Violation::InvalidName { kind: "species", name: sp.name.clone() });
            }
            if !seen.insert(sp.name.as_str()) {
                out.push(Violation::DuplicateSpecies(sp.name.clone()));
            } else {
                claim(&sp.name, &mut out);
            }
            if sp.index != i {
                out.push(Violation::SpeciesIndex {
                    name: sp.name.clone(),
                    expected: i,
                    found: sp.index,
                });
            }
        }

        let mut seen = HashSet::new();
        for agg in &self.aggregates {
            if !is_identifier(&agg.name) {
                out.push(Violation::InvalidName { kind: "aggregate", name: agg.name.clone() });
            }
            if !seen.insert(agg.name.as_str()) {
                out.push(Violation::DuplicateAggregate(agg.name.clone()));
            } else {
                claim(&agg.name, &mut out);
            }
            if agg.weights.len() != n {
                out.push(Violation::AggregateDimension {
                    name: agg.name.clone(),
                    expected: n,
                    found: agg.weights.len(),
                });
            }
            if agg.weights.iter().any(|w| !w.is_finite()) {
                out.push(Violation::NonFiniteWeight(agg.name.clone()));
            } else if agg.weights.iter().all(|&w| w == 0.0) {
                out.push(Violation::EmptyAggregate(agg.name.clone()));
            }
        }

        let mut seen = HashSet::new();
        for r in &self.reactions {
            let label = &r.label;
            if !is_identifier(label) {
                out.push(Violation::InvalidName { kind: "reaction", name: label.clone() });
            }
            if !seen.insert(label.as_str()) {
                out.push(Violation::DuplicateReaction(label.clone()));
            }
            for len in [r.reactants.len(), r.products.len()] {
                if len != n {
                    out.push(Violation::ReactionDimension {
                        label: label.clone(),
                        expected: n,
                        found: len,
                    });
                    break;
                }
            }
            for f in &r.rate.factors {
                let resolved = match f.source {
                    Source::Species(i) => i < n,
                    Source::Aggregate(i) => i < self.aggregates.len(),
                };
                if !resolved {
                    out.push(Violation::UnresolvedSource { label: label.clone(), source: f.source });
                }
                if f.exponent == 0 {
                    out.push(Violation::ZeroExponent { label: label.clone() });
                }
            }
            let mut constant = 1.0;
            let mut all_resolved = true;
            for p in &r.rate.coefficients {
                match self.parameters.get(p) {
                    Some(v) => constant *= v,
                    None => {
                        all_resolved = false;
                        out.push(Violation::UnresolvedParameter {
                            label: label.clone(),
                            name: p.clone(),
                        });
                    }
                }
            }
            if all_resolved && constant < 0.0 {
                out.push(Violation::NegativeRateConstant { label: label.clone(), value: constant });
            }
        }

        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }
}

/// A validated, immutable interaction scheme with resolved rate constants.
#[derive(Debug, Clone, PartialEq)]
pub struct Scheme {
    def: InteractionScheme,
    constants: Vec<f64>,
    changes: Vec<Vec<i64>>,
}

impl Scheme {
    pub fn new(def: InteractionScheme) -> Result<Self, SchemeError> {
        def.validate().map_err(SchemeError::Invalid)?;
        let constants = def
            .reactions
            .iter()
            .map(|r| r.rate.coefficients.iter().map(|p| def.parameters[p]).product())
            .collect();
        let changes = def.reactions.iter().map(change_vector).collect();
        Ok(Scheme { def, constants, changes })
    }

    /// Returns a copy with some parameter values replaced. Unknown names are
    /// rejected.
    pub fn with_parameters(&self, overrides: &[(String, f64)]) -> Result<Self, SchemeError> {
        let mut def = self.def.clone();
        for (name, value) in overrides {
            match def.parameters.get_mut(name) {
                Some(v) => *v = *value,
                None => return Err(SchemeError::UnknownParameter(name.clone())),
            }
        }
        Scheme::new(def)
    }

    pub fn definition(&self) -> &InteractionScheme {
        &self.def
    }

    pub fn into_definition(self) -> InteractionScheme {
        self.def
    }

    pub fn name(&self) -> &str {
        &self.def.name
    }

    pub fn species_count(&self) -> usize {
        self.def.species.len()
    }

    pub fn reaction_count(&self) -> usize {
        self.def.reactions.len()
    }

    pub fn species_names(&self) -> impl Iterator<Item = &str> {
        self.def.species.iter().map(|s| s.name.as_str())
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.def.reactions
    }

    pub fn parameter(&self, name: &str) -> Option<f64> {
        self.def.parameters.get(name).copied()
    }

    pub fn change(&self, reaction: usize) -> &[i64] {
        &self.changes[reaction]
    }

    pub fn changes(&self) -> &[Vec<i64>] {
        &self.changes
    }

    /// Product of the reaction's parameter references.
    pub fn rate_constant(&self, reaction: usize) -> f64 {
        self.constants[reaction]
    }

    /// Evaluates every aggregate at `state`.
    pub fn aggregate_values(&self, state: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.def.aggregates.len()];
        self.aggregate_values_into(state, &mut out);
        out
    }

    pub fn aggregate_values_into(&self, state: &[f64], out: &mut [f64]) {
        for (slot, agg) in out.iter_mut().zip(&self.def.aggregates) {
            *slot = agg.weights.iter().zip(state).map(|(w, x)| w * x).sum();
        }
    }

    #[inline]
    fn source_value(src: Source, state: &[f64], aggregates: &[f64]) -> f64 {
        match src {
            Source::Species(i) => state[i],
            Source::Aggregate(i) => aggregates[i],
        }
    }

    /// Rate law before clamping at zero.
    fn raw_propensity(&self, reaction: usize, state: &[f64], aggregates: &[f64]) -> f64 {
        self.def.reactions[reaction]
            .rate
            .factors
            .iter()
            .fold(self.constants[reaction], |acc, f| {
                acc * Self::source_value(f.source, state, aggregates).powi(f.exponent as i32)
            })
    }

    /// Transition rate of one reaction. Negative raw values, which only arise
    /// from negative continuous states, are clamped to zero.
    ///
    /// # Panics
    /// If `state` does not have one entry per species.
    pub fn propensity(&self, reaction: usize, state: &[f64]) -> f64 {
        self.check_dim(state);
        let aggregates = self.aggregate_values(state);
        self.raw_propensity(reaction, state, &aggregates).max(0.0)
    }

    pub fn propensities(&self, state: &[f64]) -> Vec<f64> {
        let mut aggregates = vec![0.0; self.def.aggregates.len()];
        let mut out = vec![0.0; self.reaction_count()];
        self.propensities_into(state, &mut aggregates, &mut out);
        out
    }

    /// Allocation-free form of [`propensities`](Self::propensities);
    /// `aggregates` is scratch space of length `aggregates.len()`.
    pub fn propensities_into(&self, state: &[f64], aggregates: &mut [f64], out: &mut [f64]) {
        self.check_dim(state);
        self.aggregate_values_into(state, aggregates);
        for (alpha, slot) in out.iter_mut().enumerate() {
            *slot = self.raw_propensity(alpha, state, aggregates).max(0.0);
        }
    }

    /// Gradient of the (clamped) propensity of `reaction` with respect to the
    /// state, written into `out`. Aggregates contribute through their weights.
    pub fn propensity_gradient(
        &self,
        reaction: usize,
        state: &[f64],
        aggregates: &[f64],
        out: &mut [f64],
    ) {
        out.iter_mut().for_each(|g| *g = 0.0);
        if self.raw_propensity(reaction, state, aggregates) < 0.0 {
            return;
        }
        let factors = &self.def.reactions[reaction].rate.factors;
        let constant = self.constants[reaction];
        for (k, fk) in factors.iter().enumerate() {
            let vk = Self::source_value(fk.source, state, aggregates);
            let mut d = constant * f64::from(fk.exponent) * vk.powi(fk.exponent as i32 - 1);
            for (l, fl) in factors.iter().enumerate() {
                if l != k {
                    d *= Self::source_value(fl.source, state, aggregates).powi(fl.exponent as i32);
                }
            }
            if d == 0.0 {
                continue;
            }
            match fk.source {
                Source::Species(i) => out[i] += d,
                Source::Aggregate(a) => {
                    for (g, w) in out.iter_mut().zip(&self.def.aggregates[a].weights) {
                        *g += d * w;
                    }
                }
            }
        }
    }

    fn check_dim(&self, state: &[f64]) {
        assert_eq!(
            state.len(),
            self.species_count(),
            "state has {} components, scheme `{}` has {} species",
            state.len(),
            self.def.name,
            self.species_count()
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_species(reactions: Vec<Reaction>) -> InteractionScheme {
        InteractionScheme {
            name: "t".into(),
            parameters: [("k".to_string(), 0.1)].into_iter().collect(),
            species: vec![
                Species { name: "A".into(), index: 0 },
                Species { name: "B".into(), index: 1 },
            ],
            aggregates: vec![],
            reactions,
        }
    }

    fn reaction(label: &str, n: [u32; 2], m: [u32; 2], rate: RateLaw) -> Reaction {
        Reaction { label: label.into(), reactants: n.to_vec(), products: m.to_vec(), rate }
    }

    #[test]
    fn catalytic_reaction_has_zero_change() {
        let r = reaction("cat", [1, 1], [1, 1], RateLaw::new("k", vec![]));
        assert_eq!(change_vector(&r), vec![0, 0]);
    }

    #[test]
    fn zero_reactant_annihilates_propensity() {
        let def = two_species(vec![reaction(
            "ab",
            [1, 1],
            [0, 2],
            RateLaw::new("k", vec![Factor::species(0), Factor::species(1)]),
        )]);
        let s = Scheme::new(def).unwrap();
        assert_eq!(s.propensity(0, &[0.0, 7.0]), 0.0);
        assert_eq!(s.propensity(0, &[10.0, 1.0]), 0.1 * 10.0);
    }

    #[test]
    fn negative_state_clamps() {
        let def = two_species(vec![reaction(
            "ab",
            [1, 1],
            [0, 2],
            RateLaw::new("k", vec![Factor::species(0), Factor::species(1)]),
        )]);
        let s = Scheme::new(def).unwrap();
        assert_eq!(s.propensity(0, &[-0.5, 3.0]), 0.0);
        let mut g = [1.0; 2];
        s.propensity_gradient(0, &[-0.5, 3.0], &[], &mut g);
        assert_eq!(g, [0.0, 0.0]);
    }

    #[test]
    fn exponents_and_aggregates() {
        let mut def = two_species(vec![reaction(
            "sq",
            [1, 0],
            [0, 1],
            RateLaw {
                coefficients: vec!["k".into(), "k".into()],
                factors: vec![Factor { source: Source::Species(0), exponent: 2 }, Factor::aggregate(0)],
            },
        )]);
        def.aggregates.push(Aggregate { name: "tot".into(), weights: vec![1.0, 0.5] });
        let s = Scheme::new(def).unwrap();
        // 0.01 * 3² * (3 + 0.5*4)
        let x = [3.0, 4.0];
        assert!((s.propensity(0, &x) - 0.01 * 9.0 * 5.0).abs() < 1e-15);
        let mut g = [0.0; 2];
        s.propensity_gradient(0, &x, &s.aggregate_values(&x), &mut g);
        // d/dA = 0.01 * (2*3*5 + 9*1), d/dB = 0.01 * 9 * 0.5
        assert!((g[0] - 0.01 * 39.0).abs() < 1e-15);
        assert!((g[1] - 0.01 * 4.5).abs() < 1e-15);
    }

    #[test]
    fn duplicate_species_reported() {
        let mut def = two_species(vec![]);
        def.species[1].name = "A".into();
        let v = def.validate().unwrap_err();
        assert!(v.iter().any(|v| v.to_string().contains("duplicate species")));
    }

    #[test]
    fn undefined_aggregate_is_unresolved() {
        let def = two_species(vec![reaction(
            "x",
            [1, 0],
            [0, 1],
            RateLaw::new("k", vec![Factor::aggregate(3)]),
        )]);
        let v = def.validate().unwrap_err();
        assert!(v.iter().any(|v| v.to_string().contains("unresolved source")), "{v:?}");
    }

    #[test]
    fn all_violations_collected() {
        let mut def = two_species(vec![
            reaction("x", [1, 0], [0, 1], RateLaw::new("nope", vec![])),
            reaction("x", [1, 0], [0, 1], RateLaw::new("k", vec![Factor::species(9)])),
        ]);
        def.reactions[1].reactants.pop();
        def.parameters.insert("A".into(), 1.0);
        let v = def.validate().unwrap_err();
        let text: Vec<String> = v.iter().map(ToString::to_string).collect();
        for needle in ["unresolved parameter", "duplicate reaction", "stoichiometry", "unresolved source", "more than one"] {
            assert!(text.iter().any(|t| t.contains(needle)), "missing {needle}: {text:?}");
        }
    }

    #[test]
    fn negative_constant_names_reaction() {
        let mut def = two_species(vec![reaction("decay", [1, 0], [0, 0], RateLaw::new("k", vec![]))]);
        def.parameters["k"] = -1.0;
        let v = def.validate().unwrap_err();
        assert_eq!(v, vec![Violation::NegativeRateConstant { label: "decay".into(), value: -1.0 }]);
    }

    #[test]
    fn overrides_reject_unknown_names() {
        let s = Scheme::new(two_species(vec![])).unwrap();
        assert!(matches!(
            s.with_parameters(&[("zzz".into(), 1.0)]),
            Err(SchemeError::UnknownParameter(_))
        ));
        let s2 = s.with_parameters(&[("k".into(), 2.0)]).unwrap();
        assert_eq!(s2.parameter("k"), Some(2.0));
    }
}
