//! Affix-sequence well-formedness: corpus loading, heuristic segmentation,
//! perturbation negatives, piecewise + threshold features over the affix
//! alphabet, and model inspection.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::learners::{
    evaluate, normalized_margins, train_logreg, LearnError, LinearModel, LogRegConfig, Matrix, Metrics,
};
use crate::predicates::{build_predicate_set, feature_matrix, ClassParams, PredicateError, PredicateSet};
use crate::seeds::{derive_seed, rng_from_seed, Rng};
use crate::strings::{Alphabet, StringError, Sym};

pub const BUNDLED_AFFIXES: &str = include_str!("../data/affixes.txt");
pub const BUNDLED_CORPUS: &str = include_str!("../data/toy_corpus.tsv");

/// Draws per negative before giving up on a mode.
const NEGATIVE_ATTEMPTS: usize = 32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MorphError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
    #[error("affix `{0}` is neither a prefix (`x-`) nor a suffix (`-x`)")]
    BadAffix(String),
    #[error("affix `{0}` listed as both prefix and suffix")]
    OverlappingAffix(String),
    #[error("affix inventory is empty")]
    EmptyInventory,
    #[error("unknown affix `{0}`")]
    UnknownAffix(String),
    #[error("no negative possible: {0}")]
    NoNegativePossible(String),
    #[error("split ratios must be non-negative and sum to 1, got {0:?}")]
    BadRatios((f64, f64, f64)),
    #[error("no entries")]
    NoEntries,
    #[error("empty dataset")]
    EmptyDataset,
    #[error("bins must be at least 1")]
    NoBins,
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Predicate(#[from] PredicateError),
}

impl From<StringError> for MorphError {
    fn from(e: StringError) -> Self {
        MorphError::Predicate(PredicateError::Symbol(e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Prefix,
    Suffix,
}

fn side_of(token: &str) -> Option<(Side, &str)> {
    if let Some(body) = token.strip_suffix('-').filter(|b| !b.is_empty() && !b.starts_with('-')) {
        Some((Side::Prefix, body))
    } else if let Some(body) = token.strip_prefix('-').filter(|b| !b.is_empty() && !b.ends_with('-')) {
        Some((Side::Suffix, body))
    } else {
        None
    }
}

/// Prefix tokens (`un-`) and suffix tokens (`-ness`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffixInventory {
    prefixes: BTreeSet<String>,
    suffixes: BTreeSet<String>,
}

impl AffixInventory {
    pub fn new<I, S>(tokens: I) -> Result<Self, MorphError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut prefixes = BTreeSet::new();
        let mut suffixes = BTreeSet::new();
        for t in tokens {
            let t = t.as_ref().trim().to_lowercase();
            match side_of(&t) {
                Some((Side::Prefix, _)) => prefixes.insert(t),
                Some((Side::Suffix, _)) => suffixes.insert(t),
                None => return Err(MorphError::BadAffix(t)),
            };
        }
        let bare = |set: &BTreeSet<String>| -> BTreeSet<String> {
            set.iter().map(|t| t.trim_matches('-').to_string()).collect()
        };
        if let Some(x) = bare(&prefixes).intersection(&bare(&suffixes)).next() {
            return Err(MorphError::OverlappingAffix(x.clone()));
        }
        if prefixes.is_empty() && suffixes.is_empty() {
            return Err(MorphError::EmptyInventory);
        }
        Ok(AffixInventory { prefixes, suffixes })
    }

    /// One token per line; blank lines and `#` comments ignored.
    pub fn parse(text: &str) -> Result<Self, MorphError> {
        Self::new(text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')))
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED_AFFIXES).expect("bundled inventory parses")
    }

    pub fn load(path: &Path) -> Result<Self, MorphError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| MorphError::Io { path: path.display().to_string(), reason: e.to_string() })?;
        Self::parse(&text)
    }

    pub fn prefixes(&self) -> &BTreeSet<String> {
        &self.prefixes
    }

    pub fn suffixes(&self) -> &BTreeSet<String> {
        &self.suffixes
    }

    pub fn contains(&self, token: &str) -> bool {
        self.prefixes.contains(token) || self.suffixes.contains(token)
    }

    pub fn side(&self, token: &str) -> Option<Side> {
        if self.prefixes.contains(token) {
            Some(Side::Prefix)
        } else if self.suffixes.contains(token) {
            Some(Side::Suffix)
        } else {
            None
        }
    }

    pub fn len(&self) -> usize {
        self.prefixes.len() + self.suffixes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Prefixes then suffixes, each sorted.
    pub fn tokens(&self) -> Vec<String> {
        self.prefixes.iter().chain(&self.suffixes).cloned().collect()
    }

    fn same_side(&self, side: Side) -> &BTreeSet<String> {
        match side {
            Side::Prefix => &self.prefixes,
            Side::Suffix => &self.suffixes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntrySource {
    Lexicon,
    Segmenter,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AffixEntry {
    pub word: String,
    pub affixes: Vec<String>,
    pub source: EntrySource,
}

/// A row skipped during loading.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub line: usize,
    pub word: String,
    pub reason: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {} ({}): {}", self.line, self.word, self.reason)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CorpusLoad {
    pub entries: Vec<AffixEntry>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Greedy peeling: longest prefixes from the left, then longest suffixes
/// from the right, each only while the stem keeps `min_stem` letters.
/// Returns affixes in surface order.
pub fn segment_affixes(word: &str, inventory: &AffixInventory, min_stem: usize) -> Vec<String> {
    let mut stem = word.to_lowercase();
    let longest = |set: &BTreeSet<String>, stem: &str, side: Side| -> Option<(String, usize)> {
        set.iter()
            .filter_map(|t| {
                let body = t.trim_matches('-');
                let fits = match side {
                    Side::Prefix => stem.starts_with(body),
                    Side::Suffix => stem.ends_with(body),
                };
                (fits && stem.len() - body.len() >= min_stem).then(|| (t.clone(), body.len()))
            })
            .max_by_key(|(t, len)| (*len, std::cmp::Reverse(t.clone())))
    };
    let mut prefixes = Vec::new();
    while let Some((t, len)) = longest(&inventory.prefixes, &stem, Side::Prefix) {
        stem.drain(..len);
        prefixes.push(t);
    }
    let mut suffixes = Vec::new();
    while let Some((t, len)) = longest(&inventory.suffixes, &stem, Side::Suffix) {
        stem.truncate(stem.len() - len);
        suffixes.push(t);
    }
    suffixes.reverse();
    prefixes.extend(suffixes);
    prefixes
}

/// Reads `{<pre<(root)>suf>}`-style segmentations into affix tokens.
fn parse_bracketed(annotation: &str) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    let mut chars = annotation.chars().peekable();
    while let Some(c) = chars.next() {
        let (close, make): (char, fn(&str) -> Option<String>) = match c {
            '{' | '}' => continue,
            c if c.is_whitespace() => continue,
            '<' => ('<', |s| Some(format!("{s}-"))),
            '>' => ('>', |s| Some(format!("-{s}"))),
            '(' => (')', |_| None),
            other => return Err(format!("unexpected `{other}` in segmentation")),
        };
        let mut body = String::new();
        loop {
            match chars.next() {
                Some(ch) if ch == close => break,
                Some(ch) if "<>(){}".contains(ch) => return Err(format!("unexpected `{ch}` inside `{c}…{close}`")),
                Some(ch) => body.push(ch),
                None => return Err(format!("unterminated `{c}`")),
            }
        }
        if body.is_empty() {
            return Err(format!("empty `{c}{close}` group"));
        }
        out.extend(make(&body.to_lowercase()));
    }
    Ok(out)
}

/// Parses a corpus TSV: `word<TAB>annotation`, where the annotation is
/// space-separated tokens (`un- -ness`), a bracketed segmentation, or empty
/// (routed to the segmenter). A first row whose word is `word` is a header.
pub fn parse_affix_corpus(text: &str, inventory: &AffixInventory, min_stem: usize) -> Result<CorpusLoad, MorphError> {
    let mut load = CorpusLoad::default();
    let mut seen = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let row = raw.trim_end_matches('\r');
        if row.trim().is_empty() || row.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = row.split('\t').collect();
        if fields.len() > 2 {
            return Err(MorphError::Malformed {
                line,
                reason: format!("expected at most 2 columns, got {}", fields.len()),
            });
        }
        let word = fields[0].trim().to_lowercase();
        if word.is_empty() {
            return Err(MorphError::Malformed { line, reason: "empty word".into() });
        }
        if line == 1 && word == "word" {
            continue;
        }
        let annotation = fields.get(1).map(|s| s.trim()).unwrap_or("");
        let mut drop = |reason: String| load.diagnostics.push(Diagnostic { line, word: word.clone(), reason });
        if !seen.insert(word.clone()) {
            drop("duplicate word".into());
            continue;
        }
        let (affixes, source) = if annotation.is_empty() {
            if !word.chars().all(|c| c.is_ascii_lowercase()) {
                drop("unannotated word is not alphabetic".into());
                continue;
            }
            (segment_affixes(&word, inventory, min_stem), EntrySource::Segmenter)
        } else if annotation.starts_with(['{', '<', '(']) {
            let tokens = parse_bracketed(annotation).map_err(|reason| MorphError::Malformed { line, reason })?;
            (tokens, EntrySource::Lexicon)
        } else {
            (annotation.split_whitespace().map(str::to_lowercase).collect(), EntrySource::Lexicon)
        };
        if affixes.is_empty() {
            drop("no affixes".into());
            continue;
        }
        if let Some(bad) = affixes.iter().find(|t| !inventory.contains(t)) {
            drop(format!("affix `{bad}` not in inventory"));
            continue;
        }
        load.entries.push(AffixEntry { word, affixes, source });
    }
    Ok(load)
}

pub fn load_affix_corpus(path: &Path, inventory: &AffixInventory, min_stem: usize) -> Result<CorpusLoad, MorphError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| MorphError::Io { path: path.display().to_string(), reason: e.to_string() })?;
    parse_affix_corpus(&text, inventory, min_stem)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NegativeMode {
    Permute,
    Substitute,
}

impl NegativeMode {
    fn other(self) -> Self {
        match self {
            NegativeMode::Permute => NegativeMode::Substitute,
            NegativeMode::Substitute => NegativeMode::Permute,
        }
    }
}

/// A reordering or a same-side substitution of `seq`, never equal to it.
pub fn generate_negative(
    seq: &[String],
    mode: NegativeMode,
    inventory: &AffixInventory,
    rng: &mut Rng,
) -> Result<Vec<String>, MorphError> {
    if seq.is_empty() {
        return Err(MorphError::NoNegativePossible("empty sequence".into()));
    }
    match mode {
        NegativeMode::Permute => {
            if seq.iter().all(|t| *t == seq[0]) {
                return Err(MorphError::NoNegativePossible(format!("every reordering of {seq:?} equals it")));
            }
            let mut out = seq.to_vec();
            loop {
                out.shuffle(rng);
                if out != seq {
                    return Ok(out);
                }
            }
        }
        NegativeMode::Substitute => {
            let options: Vec<(usize, Vec<&String>)> = seq
                .iter()
                .enumerate()
                .filter_map(|(i, t)| {
                    let side = inventory.side(t)?;
                    let alts: Vec<&String> = inventory.same_side(side).iter().filter(|a| *a != t).collect();
                    (!alts.is_empty()).then_some((i, alts))
                })
                .collect();
            let (pos, alts) = options
                .choose(rng)
                .ok_or_else(|| MorphError::NoNegativePossible(format!("no same-side alternative for {seq:?}")))?;
            let mut out = seq.to_vec();
            out[*pos] = (*alts.choose(rng).expect("non-empty")).clone();
            Ok(out)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MorphItem {
    pub affixes: Vec<String>,
    pub label: i8,
    pub word: String,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MorphDataset {
    pub items: Vec<MorphItem>,
    /// Positives for which no admissible negative was found.
    pub skipped: Vec<String>,
}

impl MorphDataset {
    pub fn split(&self, split: Split) -> Vec<&MorphItem> {
        self.items.iter().filter(|it| it.split == split).collect()
    }

    /// Words occurring in more than one split.
    pub fn leaked_words(&self) -> Vec<String> {
        let mut splits: HashMap<&str, BTreeSet<Split>> = HashMap::new();
        for it in &self.items {
            splits.entry(&it.word).or_default().insert(it.split);
        }
        let mut leaked: Vec<String> =
            splits.into_iter().filter(|(_, s)| s.len() > 1).map(|(w, _)| w.to_string()).collect();
        leaked.sort();
        leaked
    }
}

fn check_ratios(r: (f64, f64, f64)) -> Result<(), MorphError> {
    let ok = [r.0, r.1, r.2].iter().all(|x| *x >= 0.0 && x.is_finite()) && ((r.0 + r.1 + r.2) - 1.0).abs() < 1e-9;
    if ok {
        Ok(())
    } else {
        Err(MorphError::BadRatios(r))
    }
}

/// Positives are the attested sequences. Each word is assigned a split first;
/// its negatives follow it. Negatives alternate modes from a random start and
/// never coincide with any attested sequence.
pub fn build_morph_dataset(
    entries: &[AffixEntry],
    inventory: &AffixInventory,
    neg_per_pos: usize,
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<MorphDataset, MorphError> {
    check_ratios(ratios)?;
    if entries.is_empty() {
        return Err(MorphError::NoEntries);
    }
    let mut words: Vec<&str> = entries.iter().map(|e| e.word.as_str()).collect::<BTreeSet<_>>().into_iter().collect();
    words.shuffle(&mut rng_from_seed(derive_seed(seed, "split", &[])));
    let n = words.len();
    let n_train = (ratios.0 * n as f64).round() as usize;
    let n_dev = ((ratios.1 * n as f64).round() as usize).min(n - n_train.min(n));
    let split_of: HashMap<&str, Split> = words
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let s = if i < n_train {
                Split::Train
            } else if i < n_train + n_dev {
                Split::Dev
            } else {
                Split::Test
            };
            (*w, s)
        })
        .collect();

    let attested: HashSet<&[String]> = entries.iter().map(|e| e.affixes.as_slice()).collect();
    let mut data = MorphDataset::default();
    for (idx, e) in entries.iter().enumerate() {
        let split = split_of[e.word.as_str()];
        data.items.push(MorphItem { affixes: e.affixes.clone(), label: 1, word: e.word.clone(), split });
        let mut rng = rng_from_seed(derive_seed(seed, "negative", &[idx as u64]));
        let start = if rng.random_bool(0.5) { NegativeMode::Permute } else { NegativeMode::Substitute };
        for d in 0..neg_per_pos {
            let first = if d % 2 == 0 { start } else { start.other() };
            let found = [first, first.other()].into_iter().find_map(|mode| {
                (0..NEGATIVE_ATTEMPTS).find_map(|_| {
                    generate_negative(&e.affixes, mode, inventory, &mut rng)
                        .ok()
                        .filter(|neg| !attested.contains(neg.as_slice()))
                })
            });
            match found {
                Some(neg) => data.items.push(MorphItem { affixes: neg, label: -1, word: e.word.clone(), split }),
                None => data.skipped.push(e.word.clone()),
            }
        }
    }
    Ok(data)
}

/// Piecewise (subsequences of length ≤ 2) and thresholded bigram-count
/// predicates over the affix alphabet, in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct MorphFeaturizer {
    set: PredicateSet,
}

impl MorphFeaturizer {
    pub fn new(inventory: &AffixInventory) -> Result<Self, MorphError> {
        let alphabet = Alphabet::new(inventory.tokens())?;
        let pt = build_predicate_set(&alphabet, &ClassParams::Pt { m: 2 })?;
        let ltt = build_predicate_set(&alphabet, &ClassParams::ltt_uniform(2, 1))?;
        let mut all = pt.predicates().to_vec();
        all.extend_from_slice(ltt.predicates());
        Ok(MorphFeaturizer { set: PredicateSet::from_predicates(alphabet, ClassParams::ltt_uniform(2, 1), all) })
    }

    pub fn predicate_set(&self) -> &PredicateSet {
        &self.set
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.set.feature_names()
    }

    pub fn encode(&self, seq: &[String]) -> Result<Vec<Sym>, MorphError> {
        let a = self.set.alphabet();
        seq.iter().map(|t| a.sym(t).ok_or_else(|| MorphError::UnknownAffix(t.clone()))).collect()
    }

    pub fn featurize(&self, seq: &[String]) -> Result<Vec<bool>, MorphError> {
        Ok(crate::predicates::truth_vector(&self.set, &self.encode(seq)?).0)
    }

    pub fn matrix(&self, items: &[&MorphItem]) -> Result<(Matrix, Vec<i8>), MorphError> {
        let encoded = items.iter().map(|it| self.encode(&it.affixes)).collect::<Result<Vec<_>, _>>()?;
        let x = Matrix::from_bool(&feature_matrix(&self.set, &encoded));
        Ok((x, items.iter().map(|it| it.label).collect()))
    }
}

/// The `k` largest-magnitude weights, descending; ties keep feature order.
pub fn top_features(model: &LinearModel, k: usize) -> Vec<(String, f64)> {
    let mut idx: Vec<usize> = (0..model.dim()).collect();
    idx.sort_by(|&a, &b| model.weights[b].abs().total_cmp(&model.weights[a].abs()).then(a.cmp(&b)));
    idx.into_iter().take(k).map(|i| (model.feature_names[i].clone(), model.weights[i])).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` ascending edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Equal-width bins over `[min, max]`; the maximum falls in the last bin. A
/// degenerate range is widened by ±0.5.
pub fn histogram(values: &[f64], bins: usize) -> Result<Histogram, MorphError> {
    if bins == 0 {
        return Err(MorphError::NoBins);
    }
    if values.is_empty() {
        return Err(MorphError::EmptyDataset);
    }
    let (mut lo, mut hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| if i == bins { hi } else { lo + width * i as f64 }).collect();
    let mut counts = vec![0; bins];
    for &v in values {
        let b = (((v - lo) / width).floor() as usize).min(bins - 1);
        counts[b] += 1;
    }
    Ok(Histogram { edges, counts })
}

pub fn margin_histogram(model: &LinearModel, x: &Matrix, y: &[i8], bins: usize) -> Result<Histogram, MorphError> {
    if x.nrows() == 0 {
        return Err(MorphError::EmptyDataset);
    }
    histogram(&normalized_margins(model, x, y)?, bins)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorphConfig {
    pub neg_per_pos: usize,
    pub ratios: (f64, f64, f64),
    pub seed: u64,
    pub min_stem: usize,
    pub learner: LogRegConfig,
    pub top_k: usize,
    pub bins: usize,
}

impl Default for MorphConfig {
    fn default() -> Self {
        MorphConfig {
            neg_per_pos: 1,
            ratios: (0.8, 0.1, 0.1),
            seed: 0,
            min_stem: 3,
            learner: LogRegConfig::NOISY,
            top_k: 10,
            bins: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MorphReport {
    pub dataset: MorphDataset,
    pub model: LinearModel,
    pub dev: Option<Metrics>,
    pub test: Metrics,
    pub top_features: Vec<(String, f64)>,
    pub histogram: Histogram,
    pub leaked_words: Vec<String>,
}

/// Builds the dataset, trains on the train split and reports on test.
pub fn run_pipeline(
    entries: &[AffixEntry],
    inventory: &AffixInventory,
    cfg: &MorphConfig,
) -> Result<MorphReport, MorphError> {
    let dataset = build_morph_dataset(entries, inventory, cfg.neg_per_pos, cfg.ratios, cfg.seed)?;
    let feats = MorphFeaturizer::new(inventory)?;
    let (train_x, train_y) = feats.matrix(&dataset.split(Split::Train))?;
    let (test_x, test_y) = feats.matrix(&dataset.split(Split::Test))?;
    if train_x.nrows() == 0 || test_x.nrows() == 0 {
        return Err(MorphError::EmptyDataset);
    }
    let model = train_logreg(&train_x, &train_y, cfg.learner)?.model.with_feature_names(feats.feature_names())?;
    let dev_items = dataset.split(Split::Dev);
    let dev = if dev_items.is_empty() {
        None
    } else {
        let (dx, dy) = feats.matrix(&dev_items)?;
        Some(evaluate(&model, &dx, &dy)?)
    };
    let test = evaluate(&model, &test_x, &test_y)?;
    let histogram = margin_histogram(&model, &test_x, &test_y, cfg.bins)?;
    let leaked_words = dataset.leaked_words();
    Ok(MorphReport {
        top_features: top_features(&model, cfg.top_k),
        dataset,
        model,
        dev,
        test,
        histogram,
        leaked_words,
    })
}
