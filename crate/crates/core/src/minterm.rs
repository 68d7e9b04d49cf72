//! Minterm embedding and the explicit margin-1/2 separator.
//!
//! A truth vector `r` of length `n` maps to the one-hot basis vector of
//! `{0,1}^(2^n)` at the index whose binary expansion is `r` (bit 0 is the most
//! significant digit). Any accept set `S` of truth vectors is then separated by
//! `w = 1_S`, `b = -1/2`, with score exactly `±1/2` on every input.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::languages::{enumerate_strings, membership, LanguageSpec};
use crate::predicates::{truth_vector, PredicateSet, TruthVector};
use crate::strings::Alphabet;

pub const DEFAULT_MAX_BITS: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MintermError {
    #[error("{n} predicates exceed the minterm cap of {cap} bits")]
    TooManyBits { n: usize, cap: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("truth vector {cell} is shared by member `{positive}` and non-member `{negative}`")]
    CellConflict { cell: String, positive: String, negative: String },
    #[error("malformed separator document: {0}")]
    Malformed(String),
}

/// One-hot vector of dimension `2^n`, stored by its active index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MintermVector {
    pub index: usize,
    pub n: usize,
}

impl MintermVector {
    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.dim()];
        v[self.index] = 1.0;
        v
    }
}

/// Set of accepted truth-vector patterns, all of length `n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AcceptSet {
    n: usize,
    members: BTreeSet<Vec<bool>>,
}

impl AcceptSet {
    pub fn new(n: usize) -> Self {
        AcceptSet { n, members: BTreeSet::new() }
    }

    pub fn from_patterns<I>(n: usize, patterns: I) -> Result<Self, MintermError>
    where
        I: IntoIterator<Item = Vec<bool>>,
    {
        let mut s = AcceptSet::new(n);
        for p in patterns {
            s.insert(p)?;
        }
        Ok(s)
    }

    /// Every pattern in `{0,1}^n`.
    pub fn full(n: usize) -> Result<Self, MintermError> {
        check_cap(n, DEFAULT_MAX_BITS)?;
        Self::from_patterns(n, (0..1usize << n).map(|i| index_to_bits(i, n)))
    }

    pub fn insert(&mut self, pattern: Vec<bool>) -> Result<bool, MintermError> {
        if pattern.len() != self.n {
            return Err(MintermError::DimensionMismatch { expected: self.n, got: pattern.len() });
        }
        Ok(self.members.insert(pattern))
    }

    pub fn contains(&self, pattern: &[bool]) -> bool {
        self.members.contains(pattern)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Vec<bool>> {
        self.members.iter()
    }
}

/// Hyperplane over minterm coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Separator {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl Separator {
    pub fn n(&self) -> usize {
        self.weights.len().trailing_zeros() as usize
    }

    pub fn weight_norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
    }

    /// `min |score| / ||w||` over all cells; for constructed separators with a
    /// non-empty accept set this is `1 / (2 sqrt(|S|))`.
    pub fn geometric_margin(&self) -> f64 {
        let functional = self.weights.iter().map(|w| (w + self.bias).abs()).fold(f64::INFINITY, f64::min);
        functional / self.weight_norm()
    }

    pub fn to_doc(&self) -> SeparatorDoc {
        let accept = self.weights.iter().enumerate().filter(|(_, &w)| w != 0.0).map(|(i, _)| i).collect();
        SeparatorDoc { n: self.n(), accept, bias: self.bias }
    }

    pub fn from_doc(doc: &SeparatorDoc) -> Result<Self, MintermError> {
        check_cap(doc.n, DEFAULT_MAX_BITS)?;
        let mut weights = vec![0.0; 1 << doc.n];
        for &i in &doc.accept {
            *weights
                .get_mut(i)
                .ok_or_else(|| MintermError::Malformed(format!("index {i} out of range for n = {}", doc.n)))? = 1.0;
        }
        Ok(Separator { weights, bias: doc.bias })
    }
}

/// Serialized separator: `n`, sorted accept indices and bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparatorDoc {
    pub n: usize,
    pub accept: Vec<usize>,
    pub bias: f64,
}

fn check_cap(n: usize, cap: usize) -> Result<(), MintermError> {
    if n > cap {
        return Err(MintermError::TooManyBits { n, cap });
    }
    Ok(())
}

/// MSB-first: bit 0 of the pattern is the highest binary digit.
pub fn bits_to_index(bits: &[bool]) -> usize {
    bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize)
}

pub fn index_to_bits(index: usize, n: usize) -> Vec<bool> {
    (0..n).map(|j| (index >> (n - 1 - j)) & 1 == 1).collect()
}

pub fn minterm_embed(r: &TruthVector) -> Result<MintermVector, MintermError> {
    minterm_embed_capped(r, DEFAULT_MAX_BITS)
}

pub fn minterm_embed_capped(r: &TruthVector, cap: usize) -> Result<MintermVector, MintermError> {
    check_cap(r.len(), cap)?;
    Ok(MintermVector { index: bits_to_index(r.bits()), n: r.len() })
}

pub fn build_separator(accept: &AcceptSet, n: usize) -> Result<Separator, MintermError> {
    check_cap(n, DEFAULT_MAX_BITS)?;
    if accept.n() != n {
        return Err(MintermError::DimensionMismatch { expected: n, got: accept.n() });
    }
    let mut weights = vec![0.0; 1 << n];
    for pattern in accept.iter() {
        weights[bits_to_index(pattern)] = 1.0;
    }
    Ok(Separator { weights, bias: -0.5 })
}

/// Returns `(accept, score)` with `score = w[index] + b`.
pub fn decide(sep: &Separator, m: &MintermVector) -> Result<(bool, f64), MintermError> {
    if sep.weights.len() != m.dim() {
        return Err(MintermError::DimensionMismatch { expected: sep.weights.len(), got: m.dim() });
    }
    let score = sep.weights[m.index] + sep.bias;
    Ok((score > 0.0, score))
}

fn render_bits(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

/// Collects the truth vectors of all members of `spec` up to `max_len`,
/// failing if any truth vector is also realized by a non-member.
pub fn accept_set_for_language(
    spec: &LanguageSpec,
    set: &PredicateSet,
    max_len: usize,
) -> Result<AcceptSet, MintermError> {
    let alphabet: &Alphabet = spec.alphabet();
    // cell -> (member witness, non-member witness)
    let mut cells: BTreeMap<Vec<bool>, (Option<String>, Option<String>)> = BTreeMap::new();
    for x in enumerate_strings(alphabet, max_len) {
        let r = truth_vector(set, &x).0;
        let entry = cells.entry(r).or_default();
        let slot = if membership(spec, &x) { &mut entry.0 } else { &mut entry.1 };
        if slot.is_none() {
            *slot = Some(alphabet.render(&x));
        }
    }
    let mut accept = AcceptSet::new(set.len());
    for (cell, (pos, neg)) in cells {
        match (pos, neg) {
            (Some(positive), Some(negative)) => {
                return Err(MintermError::CellConflict { cell: render_bits(&cell), positive, negative });
            }
            (Some(_), None) => {
                accept.insert(cell)?;
            }
            _ => {}
        }
    }
    Ok(accept)
}
