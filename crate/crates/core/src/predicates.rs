//! Finite predicate families for the subregular classes and the boolean
//! feature vectors they induce.
//!
//! A [`PredicateSet`] is a pure function of `(alphabet, class parameters)`:
//! enumeration order is the derived `Ord` on [`Predicate`], i.e. kind rank,
//! then pattern tokens (boundary first, then alphabet order), then threshold.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::strings::{
    contains_subsequence, contains_substring, count_occurrences, pad_unchecked, project_tier, Alphabet, StringError,
    Sym, Tier,
};

/// Upper bound on enumerated predicates; larger sets are almost certainly a
/// configuration mistake.
pub const MAX_PREDICATES: usize = 1 << 20;

/// Alphabets larger than this refuse all-subsets tier enumeration.
pub const MAX_ALL_TIERS_ALPHABET: usize = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PredicateError {
    #[error("class parameter `{name}` must be at least 1")]
    ZeroParameter { name: &'static str },
    #[error("cannot enumerate predicates over an empty alphabet")]
    EmptyAlphabet,
    #[error("TSL predicate sets need at least one tier")]
    NoTiers,
    #[error(
        "all-subsets tier enumeration is limited to alphabets of at most {MAX_ALL_TIERS_ALPHABET} symbols (got {0})"
    )]
    TooManyTiers(usize),
    #[error("predicate set would hold {0} predicates (limit {MAX_PREDICATES})")]
    TooManyPredicates(usize),
    #[error("malformed predicate `{0}`")]
    Malformed(String),
    #[error(transparent)]
    Symbol(#[from] StringError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassTag {
    Sl,
    Sp,
    Lt,
    Pt,
    Ltt,
    Tsl,
}

impl ClassTag {
    pub fn as_str(self) -> &'static str {
        match self {
            ClassTag::Sl => "sl",
            ClassTag::Sp => "sp",
            ClassTag::Lt => "lt",
            ClassTag::Pt => "pt",
            ClassTag::Ltt => "ltt",
            ClassTag::Tsl => "tsl",
        }
    }
}

impl fmt::Display for ClassTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ClassTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sl" => Ok(ClassTag::Sl),
            "sp" => Ok(ClassTag::Sp),
            "lt" => Ok(ClassTag::Lt),
            "pt" => Ok(ClassTag::Pt),
            "ltt" => Ok(ClassTag::Ltt),
            "tsl" => Ok(ClassTag::Tsl),
            other => Err(format!("unknown class `{other}` (expected sl|sp|lt|pt|ltt|tsl)")),
        }
    }
}

/// Which tiers a TSL predicate set covers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TierScope {
    /// Explicit tiers, each a list of alphabet symbols.
    Listed(Vec<Vec<String>>),
    /// Every non-empty subset of the alphabet.
    AllSubsets,
}

/// Class parameters that determine a predicate set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "lowercase")]
pub enum ClassParams {
    Sl {
        k: usize,
    },
    Sp {
        k: usize,
    },
    Lt {
        k: usize,
    },
    Pt {
        m: usize,
    },
    Ltt {
        k: usize,
        /// Uniform threshold bound applied to every gram.
        tau: u32,
        /// Per-gram overrides keyed by the gram's token string.
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        tau_overrides: BTreeMap<String, u32>,
        /// Adds the (k-1)-length prefix/suffix indicators.
        #[serde(default)]
        edges: bool,
    },
    Tsl {
        k: usize,
        tiers: TierScope,
    },
}

impl ClassParams {
    pub fn tag(&self) -> ClassTag {
        match self {
            ClassParams::Sl { .. } => ClassTag::Sl,
            ClassParams::Sp { .. } => ClassTag::Sp,
            ClassParams::Lt { .. } => ClassTag::Lt,
            ClassParams::Pt { .. } => ClassTag::Pt,
            ClassParams::Ltt { .. } => ClassTag::Ltt,
            ClassParams::Tsl { .. } => ClassTag::Tsl,
        }
    }

    /// The locality/piece parameter (k or m).
    pub fn order(&self) -> usize {
        match self {
            ClassParams::Sl { k }
            | ClassParams::Sp { k }
            | ClassParams::Lt { k }
            | ClassParams::Ltt { k, .. }
            | ClassParams::Tsl { k, .. } => *k,
            ClassParams::Pt { m } => *m,
        }
    }

    /// Padding width used when evaluating this family: `max(order - 1, 1)`.
    pub fn pad_width(&self) -> usize {
        pad_width_for(self.order())
    }

    pub fn ltt_uniform(k: usize, tau: u32) -> Self {
        ClassParams::Ltt { k, tau, tau_overrides: BTreeMap::new(), edges: false }
    }
}

pub fn pad_width_for(order: usize) -> usize {
    order.saturating_sub(1).max(1)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PredicateKind {
    Substring(Vec<Sym>),
    Subsequence(Vec<Sym>),
    Prefix(Vec<Sym>),
    Suffix(Vec<Sym>),
    ThresholdCount { gram: Vec<Sym>, threshold: u32 },
    TierSubstring { tier: Tier, gram: Vec<Sym> },
}

/// A boolean observation of a boundary-free string, evaluated on the string
/// padded with `pad_width` boundary symbols on each side.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Predicate {
    pub kind: PredicateKind,
    pub pad_width: usize,
}

impl Predicate {
    pub fn new(kind: PredicateKind, pad_width: usize) -> Self {
        Predicate { kind, pad_width }
    }

    pub fn eval(&self, x: &[Sym]) -> bool {
        debug_assert!(x.iter().all(|s| !s.is_boundary()), "predicate input must be boundary-free");
        let padded = pad_unchecked(x, self.pad_width);
        self.eval_padded(&padded)
    }

    fn eval_padded(&self, padded: &[Sym]) -> bool {
        match &self.kind {
            PredicateKind::Substring(g) => contains_substring(padded, g),
            PredicateKind::Subsequence(h) => contains_subsequence(padded, h),
            PredicateKind::Prefix(u) => padded.starts_with(u),
            PredicateKind::Suffix(v) => padded.ends_with(v),
            PredicateKind::ThresholdCount { gram, threshold } => count_occurrences(padded, gram) >= *threshold as usize,
            PredicateKind::TierSubstring { tier, gram } => contains_substring(&project_tier(padded, tier), gram),
        }
    }

    /// Human-readable name, e.g. `substr(#ab)`, `count(bb)>=2`, `tier{a,i}(ai)`.
    pub fn describe(&self, alphabet: &Alphabet) -> String {
        let r = |g: &[Sym]| alphabet.render(g);
        match &self.kind {
            PredicateKind::Substring(g) => format!("substr({})", r(g)),
            PredicateKind::Subsequence(h) => format!("subseq({})", r(h)),
            PredicateKind::Prefix(u) => format!("prefix({})", r(u)),
            PredicateKind::Suffix(v) => format!("suffix({})", r(v)),
            PredicateKind::ThresholdCount { gram, threshold } => format!("count({})>={}", r(gram), threshold),
            PredicateKind::TierSubstring { tier, gram } => {
                format!("tier{{{}}}({})", tier.names(alphabet).join(","), r(gram))
            }
        }
    }
}

/// Truth vector r(x): bit j is predicate j evaluated on x.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TruthVector(pub Vec<bool>);

impl TruthVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }
}

impl From<Vec<bool>> for TruthVector {
    fn from(v: Vec<bool>) -> Self {
        TruthVector(v)
    }
}

/// Row-major boolean matrix; rows are strings, columns predicates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoolMatrix {
    cols: usize,
    rows: Vec<Vec<bool>>,
}

impl BoolMatrix {
    pub fn new(cols: usize, rows: Vec<Vec<bool>>) -> Self {
        assert!(rows.iter().all(|r| r.len() == cols), "ragged boolean matrix");
        BoolMatrix { cols, rows }
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[bool] {
        &self.rows[i]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[bool]> {
        self.rows.iter().map(Vec::as_slice)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredicateSet {
    alphabet: Alphabet,
    params: ClassParams,
    predicates: Vec<Predicate>,
}

impl PredicateSet {
    /// Assembles a set from explicit predicates, sorting and deduplicating them.
    pub fn from_predicates(alphabet: Alphabet, params: ClassParams, predicates: Vec<Predicate>) -> Self {
        let predicates: Vec<Predicate> = predicates.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        PredicateSet { alphabet, params, predicates }
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn params(&self) -> &ClassParams {
        &self.params
    }

    pub fn class_tag(&self) -> ClassTag {
        self.params.tag()
    }

    pub fn predicates(&self) -> &[Predicate] {
        &self.predicates
    }

    pub fn len(&self) -> usize {
        self.predicates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predicates.is_empty()
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.predicates.iter().map(|p| p.describe(&self.alphabet)).collect()
    }

    /// Keeps only the predicates at `indices` (in set order).
    pub fn restrict(&self, mut indices: Vec<usize>) -> PredicateSet {
        indices.sort_unstable();
        indices.dedup();
        PredicateSet {
            alphabet: self.alphabet.clone(),
            params: self.params.clone(),
            predicates: indices.into_iter().map(|i| self.predicates[i].clone()).collect(),
        }
    }

    pub fn to_doc(&self) -> PredicateSetDoc {
        PredicateSetDoc {
            alphabet: self.alphabet.clone(),
            params: self.params.clone(),
            predicates: self.predicates.iter().map(|p| PredicateDoc::from_predicate(p, &self.alphabet)).collect(),
        }
    }

    pub fn from_doc(doc: PredicateSetDoc) -> Result<Self, PredicateError> {
        let predicates = doc.predicates.iter().map(|p| p.to_predicate(&doc.alphabet)).collect::<Result<Vec<_>, _>>()?;
        Ok(PredicateSet::from_predicates(doc.alphabet, doc.params, predicates))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("predicate set serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, PredicateError> {
        let doc: PredicateSetDoc = serde_json::from_str(text).map_err(|e| PredicateError::Malformed(e.to_string()))?;
        Self::from_doc(doc)
    }
}

/// Serialized form of a predicate set: class, parameters and the explicit
/// ordered predicate list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredicateSetDoc {
    pub alphabet: Alphabet,
    pub params: ClassParams,
    pub predicates: Vec<PredicateDoc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateDoc {
    pub kind: String,
    pub pattern: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tier: Option<Vec<String>>,
    pub pad: usize,
}

impl PredicateDoc {
    fn from_predicate(p: &Predicate, alphabet: &Alphabet) -> Self {
        let (kind, pattern, threshold, tier) = match &p.kind {
            PredicateKind::Substring(g) => ("substring", g, None, None),
            PredicateKind::Subsequence(h) => ("subsequence", h, None, None),
            PredicateKind::Prefix(u) => ("prefix", u, None, None),
            PredicateKind::Suffix(v) => ("suffix", v, None, None),
            PredicateKind::ThresholdCount { gram, threshold } => ("count", gram, Some(*threshold), None),
            PredicateKind::TierSubstring { tier, gram } => ("tier_substring", gram, None, Some(tier.names(alphabet))),
        };
        PredicateDoc { kind: kind.to_string(), pattern: alphabet.render(pattern), threshold, tier, pad: p.pad_width }
    }

    fn to_predicate(&self, alphabet: &Alphabet) -> Result<Predicate, PredicateError> {
        let pattern = alphabet.parse(&self.pattern)?.into_inner();
        if pattern.is_empty() {
            return Err(PredicateError::Malformed(format!("{} with empty pattern", self.kind)));
        }
        let kind = match (self.kind.as_str(), self.threshold, &self.tier) {
            ("substring", None, None) => PredicateKind::Substring(pattern),
            ("subsequence", None, None) => PredicateKind::Subsequence(pattern),
            ("prefix", None, None) => PredicateKind::Prefix(pattern),
            ("suffix", None, None) => PredicateKind::Suffix(pattern),
            ("count", Some(t), None) if t >= 1 => PredicateKind::ThresholdCount { gram: pattern, threshold: t },
            ("tier_substring", None, Some(names)) => {
                let tier = Tier::new(alphabet, names)?;
                if pattern.iter().any(|&s| !s.is_boundary() && !tier.contains(s)) {
                    return Err(PredicateError::Malformed(format!("tier gram `{}` leaves its tier", self.pattern)));
                }
                PredicateKind::TierSubstring { tier, gram: pattern }
            }
            _ => return Err(PredicateError::Malformed(format!("{} `{}`", self.kind, self.pattern))),
        };
        Ok(Predicate::new(kind, self.pad))
    }
}

/// All sequences of exactly `len` symbols over `symbols`, lexicographic in
/// the order of `symbols`.
pub(crate) fn words_over(symbols: &[Sym], len: usize) -> Vec<Vec<Sym>> {
    let mut out = vec![Vec::with_capacity(len)];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|w| {
                symbols.iter().map(move |&s| {
                    let mut next = w.clone();
                    next.push(s);
                    next
                })
            })
            .collect();
    }
    out
}

/// A gram can occur in some `#^K x #^K` (with `2K >= |g|`) iff no boundary
/// sits strictly between two alphabet symbols.
pub(crate) fn gram_is_feasible(g: &[Sym]) -> bool {
    let first = g.iter().position(|s| !s.is_boundary());
    let last = g.iter().rposition(|s| !s.is_boundary());
    match (first, last) {
        (Some(i), Some(j)) => g[i..=j].iter().all(|s| !s.is_boundary()),
        _ => true,
    }
}

fn feasible_grams(symbols: &[Sym], len: usize) -> Vec<Vec<Sym>> {
    words_over(symbols, len).into_iter().filter(|g| gram_is_feasible(g)).collect()
}

fn check_size(alphabet_size: usize, len: usize) -> Result<(), PredicateError> {
    let count = (alphabet_size as u128).checked_pow(len as u32).unwrap_or(u128::MAX);
    if count > MAX_PREDICATES as u128 {
        return Err(PredicateError::TooManyPredicates(count.min(usize::MAX as u128) as usize));
    }
    Ok(())
}

/// Prefix and suffix indicators of length `k - 1` read off the unpadded
/// string; true only when the string is long enough.
fn edge_indicators(alphabet: &Alphabet, k: usize) -> Result<Vec<Predicate>, PredicateError> {
    if k < 2 {
        return Ok(Vec::new());
    }
    let sigma: Vec<Sym> = alphabet.syms().collect();
    check_size(sigma.len(), k - 1)?;
    let words = words_over(&sigma, k - 1);
    let mut out = Vec::with_capacity(words.len() * 2);
    for u in &words {
        out.push(Predicate::new(PredicateKind::Prefix(u.clone()), 0));
        out.push(Predicate::new(PredicateKind::Suffix(u.clone()), 0));
    }
    Ok(out)
}

fn nonempty_subsets(alphabet: &Alphabet) -> Vec<Tier> {
    let syms: Vec<Sym> = alphabet.syms().collect();
    (1u32..(1 << syms.len()))
        .map(|mask| Tier::from_syms(syms.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, &s)| s)))
        .collect()
}

pub fn build_predicate_set(alphabet: &Alphabet, params: &ClassParams) -> Result<PredicateSet, PredicateError> {
    if alphabet.is_empty() {
        return Err(PredicateError::EmptyAlphabet);
    }
    let order = params.order();
    if order == 0 {
        let name = if matches!(params, ClassParams::Pt { .. }) { "m" } else { "k" };
        return Err(PredicateError::ZeroParameter { name });
    }
    let pad = params.pad_width();
    let ext = alphabet.extended();
    let mut preds = Vec::new();
    match params {
        ClassParams::Sl { k } => {
            check_size(ext.len(), *k)?;
            preds
                .extend(feasible_grams(&ext, *k).into_iter().map(|g| Predicate::new(PredicateKind::Substring(g), pad)));
        }
        ClassParams::Sp { k } => {
            check_size(ext.len(), *k)?;
            preds.extend(words_over(&ext, *k).into_iter().map(|h| Predicate::new(PredicateKind::Subsequence(h), pad)));
        }
        ClassParams::Lt { k } => {
            check_size(ext.len(), *k)?;
            preds
                .extend(feasible_grams(&ext, *k).into_iter().map(|g| Predicate::new(PredicateKind::Substring(g), pad)));
            preds.extend(edge_indicators(alphabet, *k)?);
        }
        ClassParams::Pt { m } => {
            check_size(ext.len(), *m)?;
            for len in 1..=*m {
                preds.extend(
                    words_over(&ext, len).into_iter().map(|h| Predicate::new(PredicateKind::Subsequence(h), pad)),
                );
            }
        }
        ClassParams::Ltt { k, tau, tau_overrides, edges } => {
            if *tau == 0 {
                return Err(PredicateError::ZeroParameter { name: "tau" });
            }
            check_size(ext.len(), *k)?;
            let mut overrides: HashMap<Vec<Sym>, u32> = HashMap::new();
            for (text, &t) in tau_overrides {
                if t == 0 {
                    return Err(PredicateError::ZeroParameter { name: "tau" });
                }
                overrides.insert(alphabet.parse(text)?.into_inner(), t);
            }
            for len in 1..=*k {
                for g in feasible_grams(&ext, len) {
                    let bound = overrides.get(&g).copied().unwrap_or(*tau);
                    for t in 1..=bound {
                        preds
                            .push(Predicate::new(PredicateKind::ThresholdCount { gram: g.clone(), threshold: t }, pad));
                    }
                }
            }
            if *edges {
                preds.extend(edge_indicators(alphabet, *k)?);
            }
        }
        ClassParams::Tsl { k, tiers } => {
            let tiers = match tiers {
                TierScope::Listed(list) => {
                    if list.is_empty() {
                        return Err(PredicateError::NoTiers);
                    }
                    list.iter().map(|names| Tier::new(alphabet, names)).collect::<Result<Vec<_>, _>>()?
                }
                TierScope::AllSubsets => {
                    if alphabet.len() > MAX_ALL_TIERS_ALPHABET {
                        return Err(PredicateError::TooManyTiers(alphabet.len()));
                    }
                    nonempty_subsets(alphabet)
                }
            };
            for tier in tiers {
                let symbols: Vec<Sym> = std::iter::once(Sym::BOUNDARY).chain(tier.members()).collect();
                check_size(symbols.len(), *k)?;
                for g in feasible_grams(&symbols, *k) {
                    preds.push(Predicate::new(PredicateKind::TierSubstring { tier: tier.clone(), gram: g }, pad));
                }
            }
        }
    }
    if preds.len() > MAX_PREDICATES {
        return Err(PredicateError::TooManyPredicates(preds.len()));
    }
    Ok(PredicateSet::from_predicates(alphabet.clone(), params.clone(), preds))
}

pub fn eval_predicate(p: &Predicate, x: &[Sym]) -> bool {
    p.eval(x)
}

pub fn truth_vector(set: &PredicateSet, x: &[Sym]) -> TruthVector {
    // Predicates in one set share at most a couple of pad widths; pad once per width.
    let mut padded: Vec<(usize, Vec<Sym>)> = Vec::with_capacity(2);
    let bits = set
        .predicates
        .iter()
        .map(|p| {
            let idx = match padded.iter().position(|(w, _)| *w == p.pad_width) {
                Some(i) => i,
                None => {
                    padded.push((p.pad_width, pad_unchecked(x, p.pad_width)));
                    padded.len() - 1
                }
            };
            p.eval_padded(&padded[idx].1)
        })
        .collect();
    TruthVector(bits)
}

pub fn feature_matrix<S: AsRef<[Sym]> + Sync>(set: &PredicateSet, xs: &[S]) -> BoolMatrix {
    let rows = xs.par_iter().map(|x| truth_vector(set, x.as_ref()).0).collect();
    BoolMatrix::new(set.len(), rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ab() -> Alphabet {
        Alphabet::from_chars("ab").unwrap()
    }

    #[test]
    fn sl2_over_ab_keeps_all_nine_grams() {
        let set = build_predicate_set(&ab(), &ClassParams::Sl { k: 2 }).unwrap();
        assert_eq!(set.len(), 9);
    }

    #[test]
    fn sl3_drops_interior_boundaries() {
        let a = ab();
        let set = build_predicate_set(&a, &ClassParams::Sl { k: 3 }).unwrap();
        let names = set.feature_names();
        assert_eq!(set.len(), 23);
        assert!(!names.contains(&"substr(a#b)".to_string()));
        assert!(names.contains(&"substr(#a#)".to_string()));
        assert!(names.contains(&"substr(###)".to_string()));
    }

    #[test]
    fn sp2_over_four_symbols_has_25_predicates() {
        let a = Alphabet::from_chars("abcd").unwrap();
        let set = build_predicate_set(&a, &ClassParams::Sp { k: 2 }).unwrap();
        assert_eq!(set.len(), 25);
    }

    #[test]
    fn pt1_over_unary_alphabet() {
        let a = Alphabet::from_chars("a").unwrap();
        let set = build_predicate_set(&a, &ClassParams::Pt { m: 1 }).unwrap();
        assert_eq!(set.feature_names(), vec!["subseq(#)", "subseq(a)"]);
    }

    #[test]
    fn ltt_counts_thresholds_per_gram() {
        let a = ab();
        let set = build_predicate_set(&a, &ClassParams::ltt_uniform(2, 2)).unwrap();
        // 3 unigrams + 9 bigrams, two thresholds each.
        assert_eq!(set.len(), 24);
        let mut overrides = BTreeMap::new();
        overrides.insert("bb".to_string(), 3);
        let set =
            build_predicate_set(&a, &ClassParams::Ltt { k: 2, tau: 1, tau_overrides: overrides, edges: true }).unwrap();
        // 12 grams at tau 1, one extra threshold pair for bb, plus 2 prefix + 2 suffix indicators.
        assert_eq!(set.len(), 12 + 2 + 4);
        assert!(set.feature_names().contains(&"count(bb)>=3".to_string()));
    }

    #[test]
    fn lt_adds_edge_indicators() {
        let set = build_predicate_set(&ab(), &ClassParams::Lt { k: 3 }).unwrap();
        assert_eq!(set.len(), 23 + 8);
        let a = ab();
        let i = set.feature_names().iter().position(|n| n == "prefix(ab)").unwrap();
        assert!(set.predicates()[i].eval(&a.parse("abba").unwrap()));
        assert!(!set.predicates()[i].eval(&a.parse("a").unwrap()));
    }

    #[test]
    fn tsl_grams_stay_on_tier() {
        let a = Alphabet::from_chars("abc").unwrap();
        let set = build_predicate_set(
            &a,
            &ClassParams::Tsl { k: 2, tiers: TierScope::Listed(vec![vec!["a".into(), "c".into()]]) },
        )
        .unwrap();
        assert_eq!(set.len(), 9);
        let all = build_predicate_set(&a, &ClassParams::Tsl { k: 2, tiers: TierScope::AllSubsets }).unwrap();
        // tiers of size 1,2,3: 3*4 + 3*9 + 1*16
        assert_eq!(all.len(), 12 + 27 + 16);
    }

    #[test]
    fn rejects_unusable_params() {
        assert_eq!(
            build_predicate_set(&ab(), &ClassParams::Sl { k: 0 }),
            Err(PredicateError::ZeroParameter { name: "k" })
        );
        assert_eq!(
            build_predicate_set(&ab(), &ClassParams::Pt { m: 0 }),
            Err(PredicateError::ZeroParameter { name: "m" })
        );
        let empty = Alphabet::new(Vec::<String>::new()).unwrap();
        assert_eq!(build_predicate_set(&empty, &ClassParams::Sl { k: 2 }), Err(PredicateError::EmptyAlphabet));
        assert!(matches!(
            build_predicate_set(&ab(), &ClassParams::Tsl { k: 2, tiers: TierScope::Listed(vec![vec!["z".into()]]) }),
            Err(PredicateError::Symbol(_))
        ));
        let big = Alphabet::from_chars("abcdefghi").unwrap();
        assert_eq!(
            build_predicate_set(&big, &ClassParams::Tsl { k: 2, tiers: TierScope::AllSubsets }),
            Err(PredicateError::TooManyTiers(9))
        );
    }

    #[test]
    fn eval_examples() {
        let a = Alphabet::from_chars("abeghilnt").unwrap();
        let a2 = Alphabet::from_chars("eghlnt").unwrap();
        let ngt = Predicate::new(PredicateKind::Substring(a2.parse("ngt").unwrap().into_inner()), 2);
        assert!(!ngt.eval(&a2.parse("lentgh").unwrap()));
        assert!(ngt.eval(&a2.parse("lengt").unwrap()));

        let ai = Tier::new(&a, ["a", "i"]).unwrap();
        let tier =
            Predicate::new(PredicateKind::TierSubstring { tier: ai, gram: a.parse("ai").unwrap().into_inner() }, 1);
        assert!(tier.eval(&a.parse("bbaibb").unwrap()));
        assert!(tier.eval(&a.parse("abbbbi").unwrap()));

        let two_a =
            Predicate::new(PredicateKind::ThresholdCount { gram: a.parse("a").unwrap().into_inner(), threshold: 2 }, 1);
        assert!(two_a.eval(&a.parse("aba").unwrap()));
        assert!(!two_a.eval(&a.parse("ab").unwrap()));
    }

    #[test]
    fn length_is_a_substring_example() {
        // "length" contains the 3-gram "ngt".
        let a = Alphabet::from_chars("eghlnt").unwrap();
        let ngt = Predicate::new(PredicateKind::Substring(a.parse("ngt").unwrap().into_inner()), 2);
        assert!(ngt.eval(&a.parse("length").unwrap()));
    }

    #[test]
    fn truth_vector_on_restricted_sp2() {
        let a = ab();
        let set = PredicateSet::from_predicates(
            a.clone(),
            ClassParams::Sp { k: 2 },
            vec![
                Predicate::new(PredicateKind::Subsequence(a.parse("ab").unwrap().into_inner()), 1),
                Predicate::new(PredicateKind::Subsequence(a.parse("ba").unwrap().into_inner()), 1),
            ],
        );
        assert_eq!(truth_vector(&set, &a.parse("ab").unwrap()).0, vec![true, false]);
    }

    #[test]
    fn empty_string_fires_only_boundary_grams() {
        let a = ab();
        let set = build_predicate_set(&a, &ClassParams::Sl { k: 2 }).unwrap();
        let r = truth_vector(&set, &[]);
        for (p, bit) in set.predicates().iter().zip(&r.0) {
            let PredicateKind::Substring(g) = &p.kind else { unreachable!() };
            assert_eq!(*bit, g.iter().all(|s| s.is_boundary()));
        }
    }

    #[test]
    fn feature_matrix_rows_match_truth_vectors() {
        let a = ab();
        let set = build_predicate_set(&a, &ClassParams::Pt { m: 2 }).unwrap();
        let xs: Vec<_> = ["", "ab", "bba"].iter().map(|t| a.parse(t).unwrap()).collect();
        let m = feature_matrix(&set, &xs);
        assert_eq!((m.nrows(), m.ncols()), (3, set.len()));
        for (i, x) in xs.iter().enumerate() {
            assert_eq!(m.row(i), truth_vector(&set, x).bits());
        }
        let none: Vec<crate::strings::Str> = Vec::new();
        let empty = feature_matrix(&set, &none);
        assert_eq!((empty.nrows(), empty.ncols()), (0, set.len()));
    }

    #[test]
    fn json_round_trip_preserves_order_and_semantics() {
        let a = Alphabet::from_chars("abc").unwrap();
        for params in [
            ClassParams::Lt { k: 2 },
            ClassParams::ltt_uniform(2, 2),
            ClassParams::Tsl { k: 2, tiers: TierScope::Listed(vec![vec!["a".into(), "b".into()]]) },
        ] {
            let set = build_predicate_set(&a, &params).unwrap();
            let back = PredicateSet::from_json(&set.to_json()).unwrap();
            assert_eq!(back, set);
        }
    }
}
