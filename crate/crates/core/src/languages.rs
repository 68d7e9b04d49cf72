//! Executable subregular language definitions, positive/negative samplers and
//! labelled datasets.
//!
//! Samplers draw symbols uniformly one at a time and repair or reject until
//! the membership oracle agrees; they do not sample the language uniformly.
//! Every returned string is re-checked against [`membership`].

use std::collections::BTreeSet;
use std::fmt;
use std::io::{BufRead, Write};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::predicates::{gram_is_feasible, pad_width_for, ClassParams, ClassTag, Predicate, PredicateKind, TierScope};
use crate::seeds::{derive_seed, fingerprint, rng_from_seed, Rng};
use crate::strings::{
    contains_subsequence, contains_substring, count_occurrences, pad_unchecked, project_tier, Alphabet, Str,
    StringError, Sym, Tier,
};

/// Attempts per sample before giving up.
pub const RETRY_BUDGET: usize = 10_000;

/// Recorded in dataset fingerprints: which sampling scheme produced the data.
pub const SAMPLER_TAG: &str = "symbolwise-rejection-repair/v1";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LanguageError {
    #[error("class `{class}` needs parameter `{name}`")]
    MissingParameter { class: ClassTag, name: &'static str },
    #[error("parameter `{0}` must be at least 1")]
    ZeroParameter(&'static str),
    #[error("pattern `{pattern}`: {reason}")]
    BadPattern { pattern: String, reason: String },
    #[error("unknown comparator `{0}` (expected >= or <=)")]
    BadComparator(String),
    #[error(transparent)]
    Symbol(#[from] StringError),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SamplerError {
    #[error("no {kind} sample found within {attempts} attempts for lengths {lo}..={hi}")]
    Exhausted { kind: &'static str, attempts: usize, lo: usize, hi: usize },
    #[error("invalid length range {0}..={1}")]
    BadRange(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = "<=")]
    AtMost,
}

impl Comparator {
    pub fn holds(self, count: usize, bound: u32) -> bool {
        match self {
            Comparator::AtLeast => count >= bound as usize,
            Comparator::AtMost => count <= bound as usize,
        }
    }
}

impl std::str::FromStr for Comparator {
    type Err = LanguageError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            ">=" | "ge" | "at_least" => Ok(Comparator::AtLeast),
            "<=" | "le" | "at_most" => Ok(Comparator::AtMost),
            other => Err(LanguageError::BadComparator(other.to_string())),
        }
    }
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Comparator::AtLeast => ">=",
            Comparator::AtMost => "<=",
        })
    }
}

/// `count(gram in x̃) cmp bound`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThresholdConstraint {
    pub gram: Vec<Sym>,
    pub cmp: Comparator,
    pub bound: u32,
}

impl ThresholdConstraint {
    fn holds_padded(&self, padded: &[Sym]) -> bool {
        self.cmp.holds(count_occurrences(padded, &self.gram), self.bound)
    }
}

/// Edge kinds usable in LT literals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LiteralKind {
    Substring,
    Prefix,
    Suffix,
}

/// An LT_k predicate that must (or must not) hold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LtLiteral {
    pub predicate: Predicate,
    pub required: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Constraints {
    Sl { k: usize, forbidden: Vec<Vec<Sym>> },
    Sp { k: usize, forbidden: Vec<Vec<Sym>> },
    Tsl { k: usize, tier: Tier, forbidden: Vec<Vec<Sym>> },
    Pt { m: usize, forbidden: Vec<Vec<Sym>> },
    Lt { k: usize, literals: Vec<LtLiteral> },
    Ltt { k: usize, constraints: Vec<ThresholdConstraint> },
}

/// A parameterized subregular language with a membership oracle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "LanguageSpecDoc", into = "LanguageSpecDoc")]
pub struct LanguageSpec {
    alphabet: Alphabet,
    constraints: Constraints,
}

fn bad(alphabet: &Alphabet, g: &[Sym], reason: impl Into<String>) -> LanguageError {
    LanguageError::BadPattern { pattern: alphabet.render(g), reason: reason.into() }
}

fn parse_patterns(alphabet: &Alphabet, patterns: &[impl AsRef<str>]) -> Result<Vec<Vec<Sym>>, LanguageError> {
    patterns.iter().map(|p| Ok(alphabet.parse(p.as_ref())?.into_inner())).collect()
}

impl LanguageSpec {
    pub fn new(alphabet: Alphabet, constraints: Constraints) -> Result<Self, LanguageError> {
        let spec = LanguageSpec { alphabet, constraints };
        spec.validate()?;
        Ok(spec)
    }

    pub fn sl(alphabet: Alphabet, k: usize, forbidden: &[&str]) -> Result<Self, LanguageError> {
        let forbidden = parse_patterns(&alphabet, forbidden)?;
        Self::new(alphabet, Constraints::Sl { k, forbidden })
    }

    pub fn sp(alphabet: Alphabet, k: usize, forbidden: &[&str]) -> Result<Self, LanguageError> {
        let forbidden = parse_patterns(&alphabet, forbidden)?;
        Self::new(alphabet, Constraints::Sp { k, forbidden })
    }

    pub fn pt(alphabet: Alphabet, m: usize, forbidden: &[&str]) -> Result<Self, LanguageError> {
        let forbidden = parse_patterns(&alphabet, forbidden)?;
        Self::new(alphabet, Constraints::Pt { m, forbidden })
    }

    pub fn tsl(alphabet: Alphabet, k: usize, tier: &[&str], forbidden: &[&str]) -> Result<Self, LanguageError> {
        let tier = Tier::new(&alphabet, tier)?;
        let forbidden = parse_patterns(&alphabet, forbidden)?;
        Self::new(alphabet, Constraints::Tsl { k, tier, forbidden })
    }

    pub fn ltt(alphabet: Alphabet, k: usize, constraints: &[(&str, Comparator, u32)]) -> Result<Self, LanguageError> {
        let constraints = constraints
            .iter()
            .map(|&(g, cmp, bound)| Ok(ThresholdConstraint { gram: alphabet.parse(g)?.into_inner(), cmp, bound }))
            .collect::<Result<Vec<_>, LanguageError>>()?;
        Self::new(alphabet, Constraints::Ltt { k, constraints })
    }

    pub fn lt(alphabet: Alphabet, k: usize, literals: &[(LiteralKind, &str, bool)]) -> Result<Self, LanguageError> {
        let literals = literals
            .iter()
            .map(|&(kind, pattern, required)| {
                let p = alphabet.parse(pattern)?.into_inner();
                Ok(LtLiteral { predicate: lt_predicate(kind, p, k), required })
            })
            .collect::<Result<Vec<_>, LanguageError>>()?;
        Self::new(alphabet, Constraints::Lt { k, literals })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn constraints(&self) -> &Constraints {
        &self.constraints
    }

    pub fn class_tag(&self) -> ClassTag {
        match self.constraints {
            Constraints::Sl { .. } => ClassTag::Sl,
            Constraints::Sp { .. } => ClassTag::Sp,
            Constraints::Tsl { .. } => ClassTag::Tsl,
            Constraints::Pt { .. } => ClassTag::Pt,
            Constraints::Lt { .. } => ClassTag::Lt,
            Constraints::Ltt { .. } => ClassTag::Ltt,
        }
    }

    fn order(&self) -> usize {
        match &self.constraints {
            Constraints::Sl { k, .. }
            | Constraints::Sp { k, .. }
            | Constraints::Tsl { k, .. }
            | Constraints::Lt { k, .. }
            | Constraints::Ltt { k, .. } => *k,
            Constraints::Pt { m, .. } => *m,
        }
    }

    pub fn pad_width(&self) -> usize {
        pad_width_for(self.order())
    }

    /// Class parameters whose predicate set decides this language.
    pub fn deciding_params(&self) -> ClassParams {
        match &self.constraints {
            Constraints::Sl { k, .. } => ClassParams::Sl { k: *k },
            Constraints::Sp { k, .. } => ClassParams::Sp { k: *k },
            Constraints::Pt { m, .. } => ClassParams::Pt { m: *m },
            Constraints::Lt { k, .. } => ClassParams::Lt { k: *k },
            Constraints::Tsl { k, tier, .. } => {
                ClassParams::Tsl { k: *k, tiers: TierScope::Listed(vec![tier.names(&self.alphabet)]) }
            }
            Constraints::Ltt { k, constraints } => {
                let tau = constraints
                    .iter()
                    .map(|c| match c.cmp {
                        Comparator::AtLeast => c.bound,
                        Comparator::AtMost => c.bound + 1,
                    })
                    .max()
                    .unwrap_or(1)
                    .max(1);
                ClassParams::ltt_uniform(*k, tau)
            }
        }
    }

    /// Stable digest of the definition and the sampling scheme.
    pub fn fingerprint(&self) -> String {
        let doc = serde_json::to_string(self).expect("language spec serializes");
        fingerprint(&format!("{doc}|{SAMPLER_TAG}"))
    }

    fn validate(&self) -> Result<(), LanguageError> {
        let a = &self.alphabet;
        let order = self.order();
        if order == 0 {
            return Err(LanguageError::ZeroParameter(if self.class_tag() == ClassTag::Pt { "m" } else { "k" }));
        }
        match &self.constraints {
            Constraints::Sl { k, forbidden } | Constraints::Sp { k, forbidden } => {
                for g in forbidden {
                    if g.len() != *k {
                        return Err(bad(a, g, format!("expected length {k}")));
                    }
                }
            }
            Constraints::Pt { m, forbidden } => {
                for g in forbidden {
                    if g.is_empty() || g.len() > *m {
                        return Err(bad(a, g, format!("expected length 1..={m}")));
                    }
                }
            }
            Constraints::Tsl { k, tier, forbidden } => {
                for g in forbidden {
                    if g.len() != *k {
                        return Err(bad(a, g, format!("expected length {k}")));
                    }
                    if g.iter().any(|&s| !s.is_boundary() && !tier.contains(s)) {
                        return Err(bad(a, g, "uses symbols outside the tier"));
                    }
                }
            }
            Constraints::Ltt { k, constraints } => {
                for c in constraints {
                    if c.gram.is_empty() || c.gram.len() > *k {
                        return Err(bad(a, &c.gram, format!("expected length 1..={k}")));
                    }
                }
            }
            Constraints::Lt { k, literals } => {
                for lit in literals {
                    let (p, want) = match &lit.predicate.kind {
                        PredicateKind::Substring(g) => (g, *k),
                        PredicateKind::Prefix(u) | PredicateKind::Suffix(u) => {
                            if u.iter().any(|s| s.is_boundary()) {
                                return Err(bad(a, u, "edge literals range over alphabet symbols"));
                            }
                            (u, k - 1)
                        }
                        _ => unreachable!("LT literals are substring/prefix/suffix"),
                    };
                    if p.len() != want || p.is_empty() {
                        return Err(bad(a, p, format!("expected length {want}")));
                    }
                }
            }
        }
        Ok(())
    }
}

fn lt_predicate(kind: LiteralKind, pattern: Vec<Sym>, k: usize) -> Predicate {
    match kind {
        LiteralKind::Substring => Predicate::new(PredicateKind::Substring(pattern), pad_width_for(k)),
        LiteralKind::Prefix => Predicate::new(PredicateKind::Prefix(pattern), 0),
        LiteralKind::Suffix => Predicate::new(PredicateKind::Suffix(pattern), 0),
    }
}

/// Config-file form of a [`LanguageSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageSpecDoc {
    pub class: ClassTag,
    pub alphabet: Vec<String>,
    #[serde(default = "default_boundary")]
    pub boundary: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub forbidden: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tier: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub constraints: Vec<ThresholdDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub literals: Vec<LiteralDoc>,
}

fn default_boundary() -> String {
    crate::strings::DEFAULT_BOUNDARY.to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdDoc {
    pub gram: String,
    pub cmp: Comparator,
    pub bound: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiteralDoc {
    pub kind: LiteralKind,
    pub pattern: String,
    pub present: bool,
}

impl TryFrom<LanguageSpecDoc> for LanguageSpec {
    type Error = LanguageError;

    fn try_from(doc: LanguageSpecDoc) -> Result<Self, Self::Error> {
        let alphabet = Alphabet::with_boundary(doc.alphabet, doc.boundary)?;
        let need_k = |class| doc.k.ok_or(LanguageError::MissingParameter { class, name: "k" });
        let forbidden = parse_patterns(&alphabet, &doc.forbidden)?;
        let constraints = match doc.class {
            ClassTag::Sl => Constraints::Sl { k: need_k(ClassTag::Sl)?, forbidden },
            ClassTag::Sp => Constraints::Sp { k: need_k(ClassTag::Sp)?, forbidden },
            ClassTag::Pt => Constraints::Pt {
                m: doc.m.ok_or(LanguageError::MissingParameter { class: ClassTag::Pt, name: "m" })?,
                forbidden,
            },
            ClassTag::Tsl => {
                Constraints::Tsl { k: need_k(ClassTag::Tsl)?, tier: Tier::new(&alphabet, &doc.tier)?, forbidden }
            }
            ClassTag::Ltt => Constraints::Ltt {
                k: need_k(ClassTag::Ltt)?,
                constraints: doc
                    .constraints
                    .iter()
                    .map(|c| {
                        Ok(ThresholdConstraint {
                            gram: alphabet.parse(&c.gram)?.into_inner(),
                            cmp: c.cmp,
                            bound: c.bound,
                        })
                    })
                    .collect::<Result<_, LanguageError>>()?,
            },
            ClassTag::Lt => {
                let k = need_k(ClassTag::Lt)?;
                Constraints::Lt {
                    k,
                    literals: doc
                        .literals
                        .iter()
                        .map(|l| {
                            let p = alphabet.parse(&l.pattern)?.into_inner();
                            Ok(LtLiteral { predicate: lt_predicate(l.kind, p, k), required: l.present })
                        })
                        .collect::<Result<_, LanguageError>>()?,
                }
            }
        };
        LanguageSpec::new(alphabet, constraints)
    }
}

impl From<LanguageSpec> for LanguageSpecDoc {
    fn from(spec: LanguageSpec) -> Self {
        let a = &spec.alphabet;
        let render_all = |v: &[Vec<Sym>]| v.iter().map(|g| a.render(g)).collect::<Vec<_>>();
        let mut doc = LanguageSpecDoc {
            class: spec.class_tag(),
            alphabet: a.symbol_names().to_vec(),
            boundary: a.boundary().to_string(),
            k: None,
            m: None,
            forbidden: Vec::new(),
            tier: Vec::new(),
            constraints: Vec::new(),
            literals: Vec::new(),
        };
        match &spec.constraints {
            Constraints::Sl { k, forbidden } | Constraints::Sp { k, forbidden } => {
                doc.k = Some(*k);
                doc.forbidden = render_all(forbidden);
            }
            Constraints::Pt { m, forbidden } => {
                doc.m = Some(*m);
                doc.forbidden = render_all(forbidden);
            }
            Constraints::Tsl { k, tier, forbidden } => {
                doc.k = Some(*k);
                doc.tier = tier.names(a);
                doc.forbidden = render_all(forbidden);
            }
            Constraints::Ltt { k, constraints } => {
                doc.k = Some(*k);
                doc.constraints = constraints
                    .iter()
                    .map(|c| ThresholdDoc { gram: a.render(&c.gram), cmp: c.cmp, bound: c.bound })
                    .collect();
            }
            Constraints::Lt { k, literals } => {
                doc.k = Some(*k);
                doc.literals = literals
                    .iter()
                    .map(|l| {
                        let (kind, p) = match &l.predicate.kind {
                            PredicateKind::Substring(g) => (LiteralKind::Substring, g),
                            PredicateKind::Prefix(u) => (LiteralKind::Prefix, u),
                            PredicateKind::Suffix(v) => (LiteralKind::Suffix, v),
                            _ => unreachable!("LT literals are substring/prefix/suffix"),
                        };
                        LiteralDoc { kind, pattern: a.render(p), present: l.required }
                    })
                    .collect();
            }
        }
        doc
    }
}

/// Membership oracle. `x` must be boundary-free.
pub fn membership(spec: &LanguageSpec, x: &[Sym]) -> bool {
    let padded = pad_unchecked(x, spec.pad_width());
    match &spec.constraints {
        Constraints::Sl { forbidden, .. } => !forbidden.iter().any(|g| contains_substring(&padded, g)),
        Constraints::Sp { forbidden, .. } | Constraints::Pt { forbidden, .. } => {
            !forbidden.iter().any(|h| contains_subsequence(&padded, h))
        }
        Constraints::Tsl { tier, forbidden, .. } => {
            let projected = project_tier(&padded, tier);
            !forbidden.iter().any(|g| contains_substring(&projected, g))
        }
        Constraints::Lt { literals, .. } => literals.iter().all(|l| l.predicate.eval(x) == l.required),
        Constraints::Ltt { constraints, .. } => constraints.iter().all(|c| c.holds_padded(&padded)),
    }
}

/// All strings over the alphabet of length `0..=max_len`, shortest first.
pub fn enumerate_strings(alphabet: &Alphabet, max_len: usize) -> Vec<Str> {
    let sigma: Vec<Sym> = alphabet.syms().collect();
    (0..=max_len).flat_map(|len| crate::predicates::words_over(&sigma, len).into_iter().map(Str)).collect()
}

/// True when a forbidden item already occurs in the left-padded prefix; such
/// a violation survives every continuation.
fn prefix_violates(spec: &LanguageSpec, left_padded: &[Sym]) -> bool {
    match &spec.constraints {
        Constraints::Sl { forbidden, .. } => forbidden.iter().any(|g| left_padded.ends_with(g)),
        Constraints::Sp { forbidden, .. } | Constraints::Pt { forbidden, .. } => {
            forbidden.iter().any(|h| contains_subsequence(left_padded, h))
        }
        Constraints::Tsl { tier, forbidden, .. } => {
            let projected = project_tier(left_padded, tier);
            forbidden.iter().any(|g| projected.ends_with(g))
        }
        Constraints::Lt { .. } | Constraints::Ltt { .. } => false,
    }
}

fn check_range((lo, hi): (usize, usize)) -> Result<(), SamplerError> {
    if lo > hi {
        return Err(SamplerError::BadRange(lo, hi));
    }
    Ok(())
}

fn uniform_string(alphabet: &Alphabet, len: usize, rng: &mut Rng) -> Vec<Sym> {
    let n = alphabet.len() as u16;
    (0..len).map(|_| Sym(rng.random_range(1..=n))).collect()
}

/// One symbol-by-symbol draw of exactly `len` symbols that never creates a
/// persistent violation. `None` on a dead end.
fn grow_avoiding(spec: &LanguageSpec, len: usize, rng: &mut Rng) -> Option<Vec<Sym>> {
    let k = spec.pad_width();
    let mut buf: Vec<Sym> = vec![Sym::BOUNDARY; k];
    let sigma: Vec<Sym> = spec.alphabet.syms().collect();
    let mut options = Vec::with_capacity(sigma.len());
    for _ in 0..len {
        options.clear();
        for &s in &sigma {
            buf.push(s);
            if !prefix_violates(spec, &buf) {
                options.push(s);
            }
            buf.pop();
        }
        buf.push(*options.choose(rng)?);
    }
    Some(buf.split_off(k))
}

/// Repair goals on the padded string.
#[derive(Debug, Clone)]
enum Goal<'a> {
    /// Raise occurrences of a padded-string gram to at least `target`.
    Raise(&'a [Sym], usize),
    /// Lower occurrences of a padded-string gram to at most `target`.
    Lower(&'a [Sym], usize),
    SetPrefix(&'a [Sym]),
    BreakPrefix(&'a [Sym]),
    SetSuffix(&'a [Sym]),
    BreakSuffix(&'a [Sym]),
}

impl Goal<'_> {
    fn met(&self, x: &[Sym], pad: usize) -> bool {
        match *self {
            Goal::Raise(g, t) => count_occurrences(&pad_unchecked(x, pad), g) >= t,
            Goal::Lower(g, t) => count_occurrences(&pad_unchecked(x, pad), g) <= t,
            Goal::SetPrefix(u) => x.starts_with(u),
            Goal::BreakPrefix(u) => !x.starts_with(u),
            Goal::SetSuffix(v) => x.ends_with(v),
            Goal::BreakSuffix(v) => !x.ends_with(v),
        }
    }
}

fn other_symbol(alphabet: &Alphabet, current: Sym, rng: &mut Rng) -> Option<Sym> {
    let choices: Vec<Sym> = alphabet.syms().filter(|&s| s != current).collect();
    choices.choose(rng).copied()
}

/// Where the alphabet core of `g` may be written into an `len`-symbol string
/// so that `g` occurs in the padded string. `None` when it cannot fit.
fn plant_positions(g: &[Sym], len: usize) -> Option<(Vec<Sym>, Vec<usize>)> {
    if !gram_is_feasible(g) {
        return None;
    }
    let lead = g.iter().take_while(|s| s.is_boundary()).count();
    let core: Vec<Sym> = g.iter().copied().filter(|s| !s.is_boundary()).collect();
    if core.is_empty() || core.len() > len {
        return None;
    }
    let trail = g.len() - lead - core.len();
    let last = len - core.len();
    let starts: Vec<usize> = match (lead > 0, trail > 0) {
        (true, true) if core.len() == len => vec![0],
        (true, true) => vec![],
        (true, false) => vec![0],
        (false, true) => vec![last],
        (false, false) => (0..=last).collect(),
    };
    if starts.is_empty() {
        None
    } else {
        Some((core, starts))
    }
}

/// Applies one random move towards `goal`, editing in place (length is kept).
fn step_towards(goal: &Goal, x: &mut [Sym], pad: usize, alphabet: &Alphabet, rng: &mut Rng) -> bool {
    match *goal {
        Goal::Raise(g, _) => {
            let Some((core, starts)) = plant_positions(g, x.len()) else { return false };
            let at = *starts.choose(rng).expect("non-empty");
            x[at..at + core.len()].copy_from_slice(&core);
            true
        }
        Goal::Lower(g, _) => {
            let padded = pad_unchecked(x, pad);
            let covered: Vec<usize> = padded
                .windows(g.len())
                .enumerate()
                .filter(|(_, w)| *w == g)
                .flat_map(|(start, _)| start..start + g.len())
                .filter(|&p| p >= pad && p < pad + x.len())
                .map(|p| p - pad)
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            let Some(&pos) = covered.choose(rng) else { return false };
            match other_symbol(alphabet, x[pos], rng) {
                Some(s) => {
                    x[pos] = s;
                    true
                }
                None => false,
            }
        }
        Goal::SetPrefix(u) => {
            if u.len() > x.len() {
                return false;
            }
            x[..u.len()].copy_from_slice(u);
            true
        }
        Goal::SetSuffix(v) => {
            if v.len() > x.len() {
                return false;
            }
            let n = x.len();
            x[n - v.len()..].copy_from_slice(v);
            true
        }
        Goal::BreakPrefix(u) | Goal::BreakSuffix(u) => {
            if u.is_empty() || u.len() > x.len() {
                return false;
            }
            let offset = if matches!(goal, Goal::BreakPrefix(_)) { 0 } else { x.len() - u.len() };
            let pos = offset + rng.random_range(0..u.len());
            match other_symbol(alphabet, x[pos], rng) {
                Some(s) => {
                    x[pos] = s;
                    true
                }
                None => false,
            }
        }
    }
}

/// Goals that together are equivalent to membership for LT/LTT specs, and
/// the goal that violates each one.
fn conjunctive_goals(spec: &LanguageSpec) -> Vec<(Goal<'_>, Goal<'_>)> {
    match &spec.constraints {
        Constraints::Ltt { constraints, .. } => constraints
            .iter()
            .map(|c| {
                let t = c.bound as usize;
                match c.cmp {
                    Comparator::AtLeast => (Goal::Raise(&c.gram, t), Goal::Lower(&c.gram, t.saturating_sub(1))),
                    Comparator::AtMost => (Goal::Lower(&c.gram, t), Goal::Raise(&c.gram, t + 1)),
                }
            })
            .collect(),
        Constraints::Lt { literals, .. } => literals
            .iter()
            .map(|l| match (&l.predicate.kind, l.required) {
                (PredicateKind::Substring(g), true) => (Goal::Raise(g, 1), Goal::Lower(g, 0)),
                (PredicateKind::Substring(g), false) => (Goal::Lower(g, 0), Goal::Raise(g, 1)),
                (PredicateKind::Prefix(u), true) => (Goal::SetPrefix(u), Goal::BreakPrefix(u)),
                (PredicateKind::Prefix(u), false) => (Goal::BreakPrefix(u), Goal::SetPrefix(u)),
                (PredicateKind::Suffix(v), true) => (Goal::SetSuffix(v), Goal::BreakSuffix(v)),
                (PredicateKind::Suffix(v), false) => (Goal::BreakSuffix(v), Goal::SetSuffix(v)),
                _ => unreachable!("LT literals are substring/prefix/suffix"),
            })
            .collect(),
        _ => Vec::new(),
    }
}

fn draw_len((lo, hi): (usize, usize), rng: &mut Rng) -> usize {
    rng.random_range(lo..=hi)
}

/// Draws a member of `spec` with length in `len_range`.
pub fn sample_positive(spec: &LanguageSpec, len_range: (usize, usize), rng: &mut Rng) -> Result<Str, SamplerError> {
    check_range(len_range)?;
    for _ in 0..RETRY_BUDGET {
        let len = draw_len(len_range, rng);
        if let Some(x) = positive_attempt(spec, len, rng) {
            debug_assert!(membership(spec, &x));
            return Ok(Str(x));
        }
    }
    Err(SamplerError::Exhausted { kind: "positive", attempts: RETRY_BUDGET, lo: len_range.0, hi: len_range.1 })
}

fn positive_attempt(spec: &LanguageSpec, len: usize, rng: &mut Rng) -> Option<Vec<Sym>> {
    let x = match spec.constraints {
        Constraints::Sl { .. } | Constraints::Sp { .. } | Constraints::Pt { .. } | Constraints::Tsl { .. } => {
            grow_avoiding(spec, len, rng)?
        }
        Constraints::Lt { .. } | Constraints::Ltt { .. } => {
            let mut x = uniform_string(&spec.alphabet, len, rng);
            let goals = conjunctive_goals(spec);
            let pad = spec.pad_width();
            for _ in 0..4 * (len + goals.len()) {
                let unmet: Vec<&Goal> = goals.iter().map(|(keep, _)| keep).filter(|g| !g.met(&x, pad)).collect();
                let Some(goal) = unmet.choose(rng) else { break };
                step_towards(goal, &mut x, pad, &spec.alphabet, rng);
            }
            x
        }
    };
    membership(spec, &x).then_some(x)
}

/// Draws a non-member with length in `len_range` by planting a violation
/// into a positive draft (for LTT/LT: breaking exactly one constraint).
pub fn sample_negative(spec: &LanguageSpec, len_range: (usize, usize), rng: &mut Rng) -> Result<Str, SamplerError> {
    check_range(len_range)?;
    for _ in 0..RETRY_BUDGET {
        let len = draw_len(len_range, rng);
        if let Some(x) = negative_attempt(spec, len, rng) {
            debug_assert!(!membership(spec, &x));
            return Ok(Str(x));
        }
    }
    Err(SamplerError::Exhausted { kind: "negative", attempts: RETRY_BUDGET, lo: len_range.0, hi: len_range.1 })
}

fn draft(spec: &LanguageSpec, len: usize, rng: &mut Rng) -> Vec<Sym> {
    positive_attempt(spec, len, rng).unwrap_or_else(|| uniform_string(&spec.alphabet, len, rng))
}

fn negative_attempt(spec: &LanguageSpec, len: usize, rng: &mut Rng) -> Option<Vec<Sym>> {
    let x = match &spec.constraints {
        Constraints::Sl { forbidden, .. } | Constraints::Tsl { forbidden, .. } => {
            let g = forbidden.choose(rng)?;
            let (core, starts) = plant_positions(g, len)?;
            let mut x = draft(spec, len, rng);
            let at = *starts.choose(rng)?;
            x[at..at + core.len()].copy_from_slice(&core);
            x
        }
        Constraints::Sp { forbidden, .. } | Constraints::Pt { forbidden, .. } => {
            let h = forbidden.choose(rng)?;
            let core: Vec<Sym> = h.iter().copied().filter(|s| !s.is_boundary()).collect();
            if core.len() > len {
                return None;
            }
            let mut x = draft(spec, len, rng);
            let mut slots: Vec<usize> = rand::seq::index::sample(rng, len, core.len()).into_vec();
            slots.sort_unstable();
            for (slot, sym) in slots.into_iter().zip(core) {
                x[slot] = sym;
            }
            x
        }
        Constraints::Lt { .. } | Constraints::Ltt { .. } => {
            let mut x = positive_attempt(spec, len, rng)?;
            let goals = conjunctive_goals(spec);
            let pad = spec.pad_width();
            let mut order: Vec<usize> = (0..goals.len()).collect();
            order.shuffle(rng);
            let mut broken = None;
            for target in order {
                let mut trial = x.clone();
                for _ in 0..4 * len.max(1) {
                    if goals[target].1.met(&trial, pad) {
                        break;
                    }
                    let mut next = trial.clone();
                    if !step_towards(&goals[target].1, &mut next, pad, &spec.alphabet, rng) {
                        break;
                    }
                    // Reject moves that disturb any other constraint.
                    let others_hold =
                        goals.iter().enumerate().all(|(i, (keep, _))| i == target || keep.met(&next, pad));
                    if others_hold {
                        trial = next;
                    }
                }
                if goals[target].1.met(&trial, pad) {
                    broken = Some(trial);
                    break;
                }
            }
            x = broken?;
            x
        }
    };
    (!membership(spec, &x)).then_some(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Pos,
    Neg,
    Flipped,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledItem {
    pub string: Str,
    /// +1 or -1.
    pub label: i8,
    pub source: Source,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub items: Vec<LabeledItem>,
    pub seed: u64,
    pub noise_rate: f64,
    pub spec_fingerprint: String,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn strings(&self) -> Vec<&[Sym]> {
        self.items.iter().map(|it| &it.string[..]).collect()
    }

    pub fn labels(&self) -> Vec<i8> {
        self.items.iter().map(|it| it.label).collect()
    }

    /// Writes one JSON record per line: `{"string", "label", "source"}`.
    pub fn write_jsonl<W: Write>(&self, alphabet: &Alphabet, mut w: W) -> std::io::Result<()> {
        for it in &self.items {
            let rec = DatasetRecord { string: alphabet.render(&it.string), label: it.label, source: it.source };
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(alphabet: &Alphabet, r: R) -> Result<Self, DatasetError> {
        let mut items = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|e| DatasetError::Io(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: DatasetRecord =
                serde_json::from_str(&line).map_err(|e| DatasetError::Record { line: i + 1, reason: e.to_string() })?;
            if rec.label != 1 && rec.label != -1 {
                return Err(DatasetError::Record { line: i + 1, reason: format!("label {} is not ±1", rec.label) });
            }
            let string = alphabet
                .parse_word(&rec.string)
                .map_err(|e| DatasetError::Record { line: i + 1, reason: e.to_string() })?;
            items.push(LabeledItem { string, label: rec.label, source: rec.source });
        }
        let noise_rate = if items.is_empty() {
            0.0
        } else {
            items.iter().filter(|it| it.source == Source::Flipped).count() as f64 / items.len() as f64
        };
        Ok(LabeledDataset { items, seed: 0, noise_rate, spec_fingerprint: String::new() })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub string: String,
    pub label: i8,
    pub source: Source,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DatasetError {
    #[error("line {line}: {reason}")]
    Record { line: usize, reason: String },
    #[error("i/o error: {0}")]
    Io(String),
}

/// `n_pos` members and `n_neg` non-members, shuffled. Item `i` draws from its
/// own stream derived from `(seed, i)`, so generation is order-independent.
pub fn generate_dataset(
    spec: &LanguageSpec,
    n_pos: usize,
    n_neg: usize,
    len_range: (usize, usize),
    seed: u64,
) -> Result<LabeledDataset, SamplerError> {
    check_range(len_range)?;
    let mut items = (0..n_pos + n_neg)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_from_seed(derive_seed(seed, "item", &[i as u64]));
            if i < n_pos {
                sample_positive(spec, len_range, &mut rng).map(|s| LabeledItem {
                    string: s,
                    label: 1,
                    source: Source::Pos,
                })
            } else {
                sample_negative(spec, len_range, &mut rng).map(|s| LabeledItem {
                    string: s,
                    label: -1,
                    source: Source::Neg,
                })
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    items.shuffle(&mut rng_from_seed(derive_seed(seed, "shuffle", &[])));
    Ok(LabeledDataset { items, seed, noise_rate: 0.0, spec_fingerprint: spec.fingerprint() })
}

/// Negates each label independently with probability `rate`.
pub fn flip_labels(d: &LabeledDataset, rate: f64, seed: u64) -> LabeledDataset {
    assert!((0.0..=1.0).contains(&rate), "flip rate {rate} outside [0, 1]");
    let mut rng = rng_from_seed(derive_seed(seed, "flip", &[]));
    let items = d
        .items
        .iter()
        .map(|it| {
            if rng.random_bool(rate) {
                LabeledItem { string: it.string.clone(), label: -it.label, source: Source::Flipped }
            } else {
                it.clone()
            }
        })
        .collect();
    LabeledDataset { items, seed: d.seed, noise_rate: rate, spec_fingerprint: d.spec_fingerprint.clone() }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abcd() -> Alphabet {
        Alphabet::from_chars("abcd").unwrap()
    }

    fn ltt2() -> LanguageSpec {
        LanguageSpec::ltt(
            abcd(),
            2,
            &[
                ("a", Comparator::AtLeast, 2),
                ("#a", Comparator::AtLeast, 1),
                ("bb", Comparator::AtMost, 1),
                ("c#", Comparator::AtMost, 0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn sl3_membership_example() {
        let a = Alphabet::from_chars("eghlnt").unwrap();
        let spec = LanguageSpec::sl(a.clone(), 3, &["ngt"]).unwrap();
        assert!(!membership(&spec, &a.parse("length").unwrap()));
        assert!(membership(&spec, &a.parse("lent").unwrap()));
    }

    #[test]
    fn sp2_membership_example() {
        let a = abcd();
        let spec = LanguageSpec::sp(a.clone(), 2, &["ac", "bd"]).unwrap();
        assert!(!membership(&spec, &a.parse("abc").unwrap()));
        assert!(membership(&spec, &a.parse("adb").unwrap()));
    }

    #[test]
    fn ltt2_membership_example() {
        let spec = ltt2();
        let a = spec.alphabet().clone();
        assert!(membership(&spec, &a.parse("aab").unwrap()));
        assert!(!membership(&spec, &a.parse("bab").unwrap()));
        assert!(!membership(&spec, &a.parse("abbabb").unwrap()));
        assert!(!membership(&spec, &a.parse("aac").unwrap()));
        assert!(!membership(&spec, &a.parse("abd").unwrap()));
    }

    #[test]
    fn deciding_params_cover_constraint_thresholds() {
        assert_eq!(ltt2().deciding_params(), ClassParams::ltt_uniform(2, 2));
        let tsl = LanguageSpec::tsl(abcd(), 2, &["a", "c"], &["ac"]).unwrap();
        assert_eq!(
            tsl.deciding_params(),
            ClassParams::Tsl { k: 2, tiers: TierScope::Listed(vec![vec!["a".into(), "c".into()]]) }
        );
    }

    #[test]
    fn spec_validation() {
        assert!(matches!(LanguageSpec::sl(abcd(), 3, &["ab"]), Err(LanguageError::BadPattern { .. })));
        assert!(matches!(LanguageSpec::tsl(abcd(), 2, &["a"], &["ab"]), Err(LanguageError::BadPattern { .. })));
        assert!(matches!(LanguageSpec::sl(abcd(), 0, &[]), Err(LanguageError::ZeroParameter("k"))));
        assert!(matches!(LanguageSpec::sl(abcd(), 2, &["az"]), Err(LanguageError::Symbol(_))));
    }

    #[test]
    fn doc_round_trip() {
        let lt =
            LanguageSpec::lt(abcd(), 2, &[(LiteralKind::Prefix, "a", true), (LiteralKind::Substring, "bb", false)])
                .unwrap();
        for spec in [ltt2(), lt, LanguageSpec::tsl(abcd(), 2, &["a", "c"], &["#c", "aa"]).unwrap()] {
            let text = serde_json::to_string(&spec).unwrap();
            let back: LanguageSpec = serde_json::from_str(&text).unwrap();
            assert_eq!(back, spec);
            assert_eq!(back.fingerprint(), spec.fingerprint());
        }
    }

    #[test]
    fn samplers_respect_the_oracle_and_length() {
        let specs = [
            LanguageSpec::sl(abcd(), 3, &["acd", "bba", "#dc"]).unwrap(),
            LanguageSpec::sp(abcd(), 2, &["ac", "bd"]).unwrap(),
            ltt2(),
            LanguageSpec::tsl(abcd(), 2, &["a", "c"], &["ac", "#c"]).unwrap(),
            LanguageSpec::pt(abcd(), 2, &["d", "ba"]).unwrap(),
            LanguageSpec::lt(abcd(), 2, &[(LiteralKind::Prefix, "a", true), (LiteralKind::Substring, "cd", false)])
                .unwrap(),
        ];
        let mut rng = rng_from_seed(3);
        for spec in &specs {
            for _ in 0..200 {
                let p = sample_positive(spec, (5, 15), &mut rng).unwrap();
                assert!(membership(spec, &p) && (5..=15).contains(&p.len()), "{:?}", spec.class_tag());
                let n = sample_negative(spec, (5, 15), &mut rng).unwrap();
                assert!(!membership(spec, &n) && (5..=15).contains(&n.len()), "{:?}", spec.class_tag());
            }
        }
    }

    #[test]
    fn ltt_negatives_break_exactly_one_constraint() {
        let spec = ltt2();
        let Constraints::Ltt { constraints, .. } = spec.constraints() else { unreachable!() };
        let mut rng = rng_from_seed(11);
        let mut broken_kinds = BTreeSet::new();
        for _ in 0..300 {
            let x = sample_negative(&spec, (5, 15), &mut rng).unwrap();
            let padded = pad_unchecked(&x, spec.pad_width());
            let broken: Vec<usize> =
                (0..constraints.len()).filter(|&i| !constraints[i].holds_padded(&padded)).collect();
            assert_eq!(broken.len(), 1, "{}", spec.alphabet().render(&x));
            broken_kinds.insert(broken[0]);
        }
        assert_eq!(broken_kinds.len(), 4);
    }

    #[test]
    fn unsatisfiable_spec_exhausts() {
        // "##" always occurs in the padded string of any word.
        let spec = LanguageSpec::sp(abcd(), 2, &["##"]).unwrap();
        let mut rng = rng_from_seed(0);
        assert!(matches!(sample_positive(&spec, (1, 3), &mut rng), Err(SamplerError::Exhausted { .. })));
        assert_eq!(sample_positive(&spec, (3, 1), &mut rng), Err(SamplerError::BadRange(3, 1)));
    }

    #[test]
    fn generate_dataset_is_deterministic_and_correct() {
        let spec = LanguageSpec::sl(abcd(), 3, &["acd", "bba", "#dc"]).unwrap();
        let d1 = generate_dataset(&spec, 100, 100, (5, 15), 7).unwrap();
        let d2 = generate_dataset(&spec, 100, 100, (5, 15), 7).unwrap();
        assert_eq!(d1, d2);
        assert_eq!(d1.len(), 200);
        assert!(d1.items.iter().all(|it| (it.label == 1) == membership(&spec, &it.string)));
        assert_eq!(d1.items.iter().filter(|it| it.label == 1).count(), 100);
        assert!(generate_dataset(&spec, 0, 0, (5, 15), 7).unwrap().is_empty());
    }

    #[test]
    fn flip_labels_extremes() {
        let spec = LanguageSpec::sl(abcd(), 3, &["acd"]).unwrap();
        let d = generate_dataset(&spec, 20, 20, (5, 10), 1).unwrap();
        let same = flip_labels(&d, 0.0, 9);
        assert_eq!(same.items, d.items);
        let all = flip_labels(&d, 1.0, 9);
        assert!(all.items.iter().zip(&d.items).all(|(a, b)| a.label == -b.label && a.source == Source::Flipped));
        assert_eq!(all.noise_rate, 1.0);
    }

    #[test]
    fn jsonl_round_trip() {
        let spec = LanguageSpec::sl(abcd(), 3, &["acd"]).unwrap();
        let d = flip_labels(&generate_dataset(&spec, 5, 5, (3, 6), 2).unwrap(), 0.3, 4);
        let mut buf = Vec::new();
        d.write_jsonl(spec.alphabet(), &mut buf).unwrap();
        let back = LabeledDataset::read_jsonl(spec.alphabet(), &buf[..]).unwrap();
        assert_eq!(back.items, d.items);
        let bad = b"{\"string\":\"ab\",\"label\":2,\"source\":\"pos\"}\n";
        assert!(matches!(
            LabeledDataset::read_jsonl(spec.alphabet(), &bad[..]),
            Err(DatasetError::Record { line: 1, .. })
        ));
    }
}
