//! Plain-text model definition files.
//!
//! ```text
//! # onestep model v1
//! name = fasttrack
//!
//! [parameters]
//! lambda = 1.0
//! beta = 0.1
//! mu = 0.5
//!
//! [species]
//! N
//! L
//!
//! [aggregates]
//! everyone = N + 0.5*L
//!
//! [reactions]
//! arrival: 0 -> N @ lambda
//! download: N + L -> 2 L @ beta * N * L
//! departure: L -> 0 @ mu * L
//! ```
//!
//! * The first non-blank line must be the version header `# onestep model v1`.
//!   Elsewhere `#` starts a comment that runs to the end of the line.
//! * Before any section only `name = <text>` is allowed.
//! * Sections are `[parameters]` (`name = number`), `[species]` (one
//!   identifier per line, in state-vector order), `[aggregates]`
//!   (`name = term + term …`, each term `weight*Species` or `Species`) and
//!   `[reactions]` (`label: side -> side @ rate`). Sections may appear in any
//!   order but at most once.
//! * A reaction side is `0` or terms `[count] Species` joined by `+`.
//! * A rate is `1` or factors joined by `*`. A factor naming a parameter
//!   multiplies the rate constant; a factor naming a species or aggregate,
//!   optionally raised to a positive integer power with `^k`, multiplies the
//!   monomial.
//! * Identifiers match `[A-Za-z_][A-Za-z0-9_]*`. Unknown sections, keys and
//!   names are errors.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::scheme::{
    Aggregate, Factor, InteractionScheme, RateLaw, Reaction, Scheme, SchemeError, Source, Species,
};

pub const MODEL_HEADER: &str = "# onestep model v1";

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error("cannot read model file: {0}")]
    Io(#[from] std::io::Error),
}

fn syntax<T>(line: usize, column: usize, message: impl Into<String>) -> Result<T, ModelFileError> {
    Err(ModelFileError::Syntax { line, column, message: message.into() })
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    Plus,
    Minus,
    Star,
    Caret,
    Arrow,
    Colon,
    At,
    Equals,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Number(s) => format!("number `{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Caret => "`^`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::Colon => "`:`".into(),
            Tok::At => "`@`".into(),
            Tok::Equals => "`=`".into(),
        }
    }
}

/// Tokens of one line with their 1-based columns.
struct Line {
    number: usize,
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end_column: usize,
}

impl Line {
    fn lex(number: usize, text: &str) -> Result<Line, ModelFileError> {
        let chars: Vec<char> = text.chars().collect();
        let mut toks = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let col = i + 1;
            if c == '#' {
                break;
            }
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            if c.is_ascii_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                toks.push((Tok::Ident(chars[start..i].iter().collect()), col));
                continue;
            }
            if c.is_ascii_digit() || c == '.' {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                // exponent only when followed by digits, so `2e` stays `2` + ident
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        while j < chars.len() && chars[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                toks.push((Tok::Number(chars[start..i].iter().collect()), col));
                continue;
            }
            let tok = match c {
                '+' => Tok::Plus,
                '*' => Tok::Star,
                '^' => Tok::Caret,
                ':' => Tok::Colon,
                '@' => Tok::At,
                '=' => Tok::Equals,
                '-' if chars.get(i + 1) == Some(&'>') => {
                    i += 1;
                    Tok::Arrow
                }
                '-' => Tok::Minus,
                _ => return syntax(number, col, format!("unexpected character `{c}`")),
            };
            toks.push((tok, col));
            i += 1;
        }
        let end_column = text.trim_end().chars().count() + 1;
        Ok(Line { number, toks, pos: 0, end_column })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn column(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_column, |(_, c)| *c)
    }

    fn next(&mut self) -> Option<(Tok, usize)> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ModelFileError> {
        syntax(self.number, self.column(), message)
    }

    fn unexpected<T>(&self, wanted: &str) -> Result<T, ModelFileError> {
        match self.peek() {
            Some(t) => self.err(format!("expected {wanted}, found {}", t.describe())),
            None => self.err(format!("expected {wanted}, found end of line")),
        }
    }

    fn expect(&mut self, tok: Tok, wanted: &str) -> Result<(), ModelFileError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            self.unexpected(wanted)
        }
    }

    fn ident(&mut self, wanted: &str) -> Result<(String, usize), ModelFileError> {
        match self.peek() {
            Some(Tok::Ident(_)) => match self.next() {
                Some((Tok::Ident(s), c)) => Ok((s, c)),
                _ => unreachable!(),
            },
            _ => self.unexpected(wanted),
        }
    }

    fn number(&mut self, wanted: &str) -> Result<(f64, usize), ModelFileError> {
        let negative = if self.peek() == Some(&Tok::Minus) {
            self.pos += 1;
            true
        } else {
            false
        };
        match self.peek() {
            Some(Tok::Number(_)) => {
                let (tok, col) = self.next().unwrap();
                let Tok::Number(s) = tok else { unreachable!() };
                match s.parse::<f64>() {
                    Ok(v) => Ok((if negative { -v } else { v }, col)),
                    Err(_) => syntax(self.number, col, format!("malformed number `{s}`")),
                }
            }
            _ => self.unexpected(wanted),
        }
    }

    fn done(&self) -> Result<(), ModelFileError> {
        match self.peek() {
            None => Ok(()),
            Some(t) => self.err(format!("unexpected {} after end of statement", t.describe())),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Section {
    Parameters,
    Species,
    Aggregates,
    Reactions,
}

/// Parses model text into an (unvalidated) scheme definition.
pub fn parse_model(text: &str) -> Result<InteractionScheme, ModelFileError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

    // header
    loop {
        match lines.next() {
            Some((_, l)) if l.trim().is_empty() => continue,
            Some((_, l)) if l.trim() == MODEL_HEADER => break,
            Some((n, _)) => return syntax(n, 1, format!("expected version header `{MODEL_HEADER}`")),
            None => return syntax(1, 1, format!("empty file, expected `{MODEL_HEADER}`")),
        }
    }

    let mut name: Option<String> = None;
    let mut current: Option<Section> = None;
    let mut seen: Vec<Section> = Vec::new();
    let mut body: Vec<(Section, Line)> = Vec::new();
    for (number, raw) in lines {
        let code = raw.split('#').next().unwrap_or("");
        let trimmed = code.trim();
        if trimmed.is_empty() {
            continue;
        }
        let indent = code.len() - code.trim_start().len() + 1;
        if trimmed.starts_with('[') {
            let Some(inner) = trimmed.strip_prefix('[').and_then(|t| t.strip_suffix(']')) else {
                return syntax(number, indent, "malformed section header");
            };
            let section = match inner.trim() {
                "parameters" => Section::Parameters,
                "species" => Section::Species,
                "aggregates" => Section::Aggregates,
                "reactions" => Section::Reactions,
                other => return syntax(number, indent, format!("unknown section `[{other}]`")),
            };
            if seen.contains(&section) {
                return syntax(number, indent, format!("section `[{}]` appears twice", inner.trim()));
            }
            seen.push(section);
            current = Some(section);
            continue;
        }
        match current {
            Some(section) => body.push((section, Line::lex(number, code)?)),
            None => {
                let Some((key, value)) = trimmed.split_once('=') else {
                    return syntax(number, indent, "expected `name = …` or a section header");
                };
                if key.trim() != "name" {
                    return syntax(number, indent, format!("unknown key `{}`", key.trim()));
                }
                if name.is_some() {
                    return syntax(number, indent, "`name` given twice");
                }
                name = Some(value.trim().to_string());
            }
        }
    }

    let mut def = InteractionScheme { name: name.unwrap_or_default(), ..Default::default() };

    for (_, line) in body.iter_mut().filter(|(s, _)| *s == Section::Parameters) {
        let (key, col) = line.ident("parameter name")?;
        line.expect(Tok::Equals, "`=`")?;
        let (value, _) = line.number("a number")?;
        line.done()?;
        if def.parameters.contains_key(&key) {
            return syntax(line.number, col, format!("parameter `{key}` defined twice"));
        }
        def.parameters.insert(key, value);
    }

    for (_, line) in body.iter_mut().filter(|(s, _)| *s == Section::Species) {
        let (sp, col) = line.ident("species name")?;
        line.done()?;
        if def.species_index(&sp).is_some() {
            return syntax(line.number, col, format!("species `{sp}` declared twice"));
        }
        let index = def.species.len();
        def.species.push(Species { name: sp, index });
    }
    let n = def.species.len();

    for (_, line) in body.iter_mut().filter(|(s, _)| *s == Section::Aggregates) {
        let (agg, col) = line.ident("aggregate name")?;
        line.expect(Tok::Equals, "`=`")?;
        let mut weights = vec![0.0; n];
        loop {
            let weight = if matches!(line.peek(), Some(Tok::Number(_) | Tok::Minus)) {
                let (w, _) = line.number("a weight")?;
                line.expect(Tok::Star, "`*`")?;
                w
            } else {
                1.0
            };
            let (sp, scol) = line.ident("species name")?;
            let Some(i) = def.species_index(&sp) else {
                return syntax(line.number, scol, format!("unknown species `{sp}`"));
            };
            weights[i] += weight;
            if line.peek() == Some(&Tok::Plus) {
                line.pos += 1;
            } else {
                break;
            }
        }
        line.done()?;
        if def.aggregate_index(&agg).is_some() {
            return syntax(line.number, col, format!("aggregate `{agg}` defined twice"));
        }
        def.aggregates.push(Aggregate { name: agg, weights });
    }

    for (_, line) in body.iter_mut().filter(|(s, _)| *s == Section::Reactions) {
        let (label, _) = line.ident("reaction label")?;
        line.expect(Tok::Colon, "`:`")?;
        let reactants = parse_side(line, &def)?;
        line.expect(Tok::Arrow, "`->`")?;
        let products = parse_side(line, &def)?;
        line.expect(Tok::At, "`@` followed by a rate")?;
        let rate = parse_rate(line, &def)?;
        line.done()?;
        def.reactions.push(Reaction { label, reactants, products, rate });
    }

    Ok(def)
}

fn parse_side(line: &mut Line, def: &InteractionScheme) -> Result<Vec<u32>, ModelFileError> {
    let mut counts = vec![0u32; def.species.len()];
    if line.peek() == Some(&Tok::Number("0".into())) {
        line.pos += 1;
        return Ok(counts);
    }
    loop {
        let count = if let Some(Tok::Number(s)) = line.peek() {
            let col = line.column();
            let s = s.clone();
            line.pos += 1;
            match s.parse::<u32>() {
                Ok(k) if k > 0 => k,
                _ => return syntax(line.number, col, format!("stoichiometric count must be a positive integer, got `{s}`")),
            }
        } else {
            1
        };
        let (sp, col) = line.ident("species name")?;
        let Some(i) = def.species_index(&sp) else {
            return syntax(line.number, col, format!("unknown species `{sp}`"));
        };
        counts[i] += count;
        if line.peek() == Some(&Tok::Plus) {
            line.pos += 1;
        } else {
            return Ok(counts);
        }
    }
}

fn parse_rate(line: &mut Line, def: &InteractionScheme) -> Result<RateLaw, ModelFileError> {
    let mut rate = RateLaw::default();
    if line.peek() == Some(&Tok::Number("1".into())) {
        line.pos += 1;
        return Ok(rate);
    }
    loop {
        let (name, col) = line.ident("parameter, species or aggregate name")?;
        let param = def.parameters.contains_key(&name);
        let species = def.species_index(&name);
        let aggregate = def.aggregate_index(&name);
        let hits = usize::from(param) + usize::from(species.is_some()) + usize::from(aggregate.is_some());
        if hits > 1 {
            return syntax(line.number, col, format!("ambiguous name `{name}`"));
        }
        let exponent = if line.peek() == Some(&Tok::Caret) {
            line.pos += 1;
            let ecol = line.column();
            match line.next() {
                Some((Tok::Number(s), _)) => match s.parse::<u32>() {
                    Ok(k) if k > 0 => Some(k),
                    _ => return syntax(line.number, ecol, format!("exponent must be a positive integer, got `{s}`")),
                },
                _ => return syntax(line.number, ecol, "expected an exponent"),
            }
        } else {
            None
        };
        if param {
            if exponent.is_some() {
                return syntax(line.number, col, format!("parameter `{name}` cannot carry an exponent"));
            }
            rate.coefficients.push(name);
        } else if let Some(i) = species {
            rate.factors.push(Factor { source: Source::Species(i), exponent: exponent.unwrap_or(1) });
        } else if let Some(a) = aggregate {
            rate.factors.push(Factor { source: Source::Aggregate(a), exponent: exponent.unwrap_or(1) });
        } else {
            return syntax(line.number, col, format!("unknown name `{name}`"));
        }
        if line.peek() == Some(&Tok::Star) {
            line.pos += 1;
        } else {
            return Ok(rate);
        }
    }
}

/// Parses and validates model text.
pub fn parse_scheme(text: &str) -> Result<Scheme, ModelFileError> {
    Ok(Scheme::new(parse_model(text)?)?)
}

pub fn load_model_file(path: impl AsRef<Path>) -> Result<Scheme, ModelFileError> {
    parse_scheme(&std::fs::read_to_string(path)?)
}

fn render_side(def: &InteractionScheme, counts: &[u32]) -> String {
    let terms: Vec<String> = counts
        .iter()
        .zip(&def.species)
        .filter(|(k, _)| **k > 0)
        .map(|(k, s)| if *k == 1 { s.name.clone() } else { format!("{k} {}", s.name) })
        .collect();
    if terms.is_empty() {
        "0".into()
    } else {
        terms.join(" + ")
    }
}

fn source_name(def: &InteractionScheme, src: Source) -> &str {
    match src {
        Source::Species(i) => &def.species[i].name,
        Source::Aggregate(i) => &def.aggregates[i].name,
    }
}

/// Renders a definition in the model-file format. Numbers use the shortest
/// representation that parses back to the same value.
///
/// # Panics
/// If a rate law refers to a species or aggregate index that does not exist;
/// validated schemes never do.
pub fn render_model(def: &InteractionScheme) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MODEL_HEADER}");
    if !def.name.is_empty() {
        let _ = writeln!(out, "name = {}", def.name);
    }
    let _ = writeln!(out, "\n[parameters]");
    for (k, v) in &def.parameters {
        let _ = writeln!(out, "{k} = {v:?}");
    }
    let _ = writeln!(out, "\n[species]");
    for s in &def.species {
        let _ = writeln!(out, "{}", s.name);
    }
    if !def.aggregates.is_empty() {
        let _ = writeln!(out, "\n[aggregates]");
        for a in &def.aggregates {
            let terms: Vec<String> = a
                .weights
                .iter()
                .zip(&def.species)
                .filter(|(w, _)| **w != 0.0)
                .map(|(w, s)| if *w == 1.0 { s.name.clone() } else { format!("{w:?}*{}", s.name) })
                .collect();
            let _ = writeln!(out, "{} = {}", a.name, terms.join(" + "));
        }
    }
    let _ = writeln!(out, "\n[reactions]");
    for r in &def.reactions {
        let mut factors: Vec<String> = r.rate.coefficients.clone();
        factors.extend(r.rate.factors.iter().map(|f| {
            let name = source_name(def, f.source);
            if f.exponent == 1 {
                name.to_string()
            } else {
                format!("{name}^{}", f.exponent)
            }
        }));
        let rate = if factors.is_empty() { "1".to_string() } else { factors.join(" * ") };
        let _ = writeln!(
            out,
            "{}: {} -> {} @ {}",
            r.label,
            render_side(def, &r.reactants),
            render_side(def, &r.products),
            rate
        );
    }
    out
}
