//! Noise, size and low-quantile margin sweeps over synthetic languages, the
//! unary counterexample search, and CSV output.

use std::collections::HashMap;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::languages::{
    flip_labels, generate_dataset, membership, Comparator, LabeledDataset, LanguageSpec, SamplerError,
};
use crate::learners::{
    evaluate, margin_quantile, normalized_margins, train_logreg, LearnError, LinearModel, LogRegConfig, Matrix, Metrics,
};
use crate::predicates::{
    build_predicate_set, feature_matrix, pad_width_for, truth_vector, ClassParams, Predicate, PredicateError,
    PredicateKind, PredicateSet, TruthVector,
};
use crate::seeds::{derive_seed, fingerprint, rng_from_seed, Rng};
use crate::strings::{Alphabet, Str, Sym};

pub const DEFAULT_NOISE_GRID: [f64; 5] = [0.0, 0.05, 0.1, 0.2, 0.3];
pub const DEFAULT_SIZE_GRID: [f64; 6] = [50.0, 100.0, 200.0, 500.0, 1000.0, 2000.0];
pub const DEFAULT_TRIALS: usize = 5;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("grid value {grid_value}, trial {trial}: {source}")]
    Sampler { grid_value: f64, trial: usize, source: SamplerError },
    #[error("grid value {grid_value}, trial {trial}: {source}")]
    Learn { grid_value: f64, trial: usize, source: LearnError },
    #[error(transparent)]
    Predicate(#[from] PredicateError),
    #[error("invalid sweep config: {0}")]
    Config(String),
    #[error("counterexample search needs m > 2^n (n = {n}, m = {m})")]
    ModulusTooSmall { n: usize, m: usize },
    #[error("counterexample search needs a one-symbol alphabet, got {0} symbols")]
    NotUnary(usize),
    #[error("no witness among lengths 0..={bound}")]
    NoWitness { bound: usize },
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
}

/// The three benchmark languages with their length ranges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Sl3,
    Sp2,
    Ltt2,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Sl3, Preset::Sp2, Preset::Ltt2];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Sl3 => "sl3",
            Preset::Sp2 => "sp2",
            Preset::Ltt2 => "ltt2",
        }
    }

    pub fn spec(self) -> LanguageSpec {
        let alphabet = Alphabet::from_chars("abcd").expect("static alphabet");
        match self {
            Preset::Sl3 => LanguageSpec::sl(alphabet, 3, &["acd", "bba", "#dc"]),
            Preset::Sp2 => LanguageSpec::sp(alphabet, 2, &["ac", "bd"]),
            Preset::Ltt2 => LanguageSpec::ltt(
                alphabet,
                2,
                &[
                    ("a", Comparator::AtLeast, 2),
                    ("#a", Comparator::AtLeast, 1),
                    ("bb", Comparator::AtMost, 1),
                    ("c#", Comparator::AtMost, 0),
                ],
            ),
        }
        .expect("static preset")
    }

    pub fn len_range(self) -> (usize, usize) {
        match self {
            Preset::Sl3 | Preset::Ltt2 => (5, 15),
            Preset::Sp2 => (6, 18),
        }
    }

    pub fn sweep(self, grid_kind: GridKind) -> SweepConfig {
        let spec = self.spec();
        SweepConfig {
            name: self.name().to_string(),
            features: spec.deciding_params(),
            spec,
            len_range: self.len_range(),
            grid_kind,
            grid: match grid_kind {
                GridKind::Noise => DEFAULT_NOISE_GRID.to_vec(),
                GridKind::Size => DEFAULT_SIZE_GRID.to_vec(),
            },
            n_train: 2000,
            n_test: 1000,
            noise: 0.0,
            trials: DEFAULT_TRIALS,
            base_seed: 0,
            learner: LogRegConfig::NOISY,
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sl3" | "sl" => Ok(Preset::Sl3),
            "sp2" | "sp" => Ok(Preset::Sp2),
            "ltt2" | "ltt" => Ok(Preset::Ltt2),
            other => Err(ExperimentError::Config(format!("unknown preset `{other}` (sl3, sp2, ltt2)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    /// Grid values are train-label flip rates.
    Noise,
    /// Grid values are training set sizes.
    Size,
}

impl GridKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GridKind::Noise => "noise",
            GridKind::Size => "size",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub name: String,
    pub spec: LanguageSpec,
    pub features: ClassParams,
    pub len_range: (usize, usize),
    pub grid_kind: GridKind,
    pub grid: Vec<f64>,
    pub n_train: usize,
    pub n_test: usize,
    /// Flip rate used when the grid varies size.
    pub noise: f64,
    pub trials: usize,
    pub base_seed: u64,
    pub learner: LogRegConfig,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let err = |m: String| Err(ExperimentError::Config(m));
        if self.grid.is_empty() {
            return err("grid is empty".into());
        }
        if self.n_test == 0 {
            return err("n_test must be positive".into());
        }
        if self.trials == 0 {
            return err("trials must be at least 1".into());
        }
        if self.len_range.0 > self.len_range.1 {
            return err(format!("length range {}..={} is empty", self.len_range.0, self.len_range.1));
        }
        let rate_ok = |r: f64| (0.0..=1.0).contains(&r);
        match self.grid_kind {
            GridKind::Noise => {
                if let Some(r) = self.grid.iter().find(|r| !rate_ok(**r)) {
                    return err(format!("noise rate {r} outside [0, 1]"));
                }
            }
            GridKind::Size => {
                if let Some(s) = self.grid.iter().find(|s| !(s.fract() == 0.0 && **s >= 1.0)) {
                    return err(format!("train size {s} is not a positive integer"));
                }
                if !rate_ok(self.noise) {
                    return err(format!("noise rate {} outside [0, 1]", self.noise));
                }
            }
        }
        Ok(())
    }

    /// Digest of every setting that affects results.
    pub fn config_hash(&self) -> String {
        fingerprint(&serde_json::to_string(self).expect("sweep config serializes"))
    }

    fn train_size_at(&self, grid_value: f64) -> usize {
        match self.grid_kind {
            GridKind::Noise => self.n_train,
            GridKind::Size => grid_value as usize,
        }
    }

    fn noise_at(&self, grid_value: f64) -> f64 {
        match self.grid_kind {
            GridKind::Noise => grid_value,
            GridKind::Size => self.noise,
        }
    }

    fn trial_seed(&self, grid_value: f64, trial: usize) -> u64 {
        derive_seed(self.base_seed, "trial", &[grid_value.to_bits(), trial as u64])
    }

    /// Clean test set shared by every grid point of a trial.
    fn test_seed(&self, trial: usize) -> u64 {
        derive_seed(self.base_seed, "test", &[trial as u64])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub class: String,
    pub grid_kind: GridKind,
    pub grid_value: f64,
    pub trial: usize,
    pub train_size: usize,
    pub noise: f64,
    pub accuracy: f64,
    pub f1: f64,
    /// NaN when the trained weights are all zero.
    pub q01: f64,
    pub seed: u64,
    pub config_hash: String,
}

/// Everything produced by one (grid value, trial) cell.
#[derive(Debug, Clone)]
pub struct TrialRun {
    pub row: ResultRow,
    pub model: LinearModel,
    pub metrics: Metrics,
    pub test_x: Matrix,
    pub test_y: Vec<i8>,
    pub margins: Option<Vec<f64>>,
}

fn balanced(
    spec: &LanguageSpec,
    n: usize,
    len_range: (usize, usize),
    seed: u64,
) -> Result<LabeledDataset, SamplerError> {
    generate_dataset(spec, n - n / 2, n / 2, len_range, seed)
}

fn to_matrix(set: &PredicateSet, d: &LabeledDataset) -> (Matrix, Vec<i8>) {
    (Matrix::from_bool(&feature_matrix(set, &d.strings())), d.labels())
}

/// Trains and evaluates one grid cell.
pub fn run_trial(
    cfg: &SweepConfig,
    set: &PredicateSet,
    grid_value: f64,
    trial: usize,
) -> Result<TrialRun, ExperimentError> {
    let seed = cfg.trial_seed(grid_value, trial);
    let sampler = |source| ExperimentError::Sampler { grid_value, trial, source };
    let learn = |source| ExperimentError::Learn { grid_value, trial, source };
    let train_size = cfg.train_size_at(grid_value);
    let noise = cfg.noise_at(grid_value);

    let clean = balanced(&cfg.spec, train_size, cfg.len_range, seed).map_err(sampler)?;
    let train = flip_labels(&clean, noise, seed);
    let test = balanced(&cfg.spec, cfg.n_test, cfg.len_range, cfg.test_seed(trial)).map_err(sampler)?;

    let (train_x, train_y) = to_matrix(set, &train);
    let (test_x, test_y) = to_matrix(set, &test);
    let model = train_logreg(&train_x, &train_y, cfg.learner)
        .map_err(learn)?
        .model
        .with_feature_names(set.feature_names())
        .map_err(learn)?;
    let metrics = evaluate(&model, &test_x, &test_y).map_err(learn)?;
    let margins = match normalized_margins(&model, &test_x, &test_y) {
        Ok(m) => Some(m),
        Err(LearnError::ZeroWeights) => None,
        Err(e) => return Err(learn(e)),
    };
    let q01 = match &margins {
        Some(m) => margin_quantile(m, 0.01).map_err(learn)?,
        None => f64::NAN,
    };
    let row = ResultRow {
        class: cfg.spec.class_tag().to_string(),
        grid_kind: cfg.grid_kind,
        grid_value,
        trial,
        train_size,
        noise,
        accuracy: metrics.accuracy,
        f1: metrics.f1,
        q01,
        seed,
        config_hash: cfg.config_hash(),
    };
    Ok(TrialRun { row, model, metrics, test_x, test_y, margins })
}

/// One row per (grid value, trial), sorted by grid then trial.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<ResultRow>, ExperimentError> {
    cfg.validate()?;
    let set = build_predicate_set(cfg.spec.alphabet(), &cfg.features)?;
    let cells: Vec<(usize, usize)> = (0..cfg.grid.len()).flat_map(|g| (0..cfg.trials).map(move |t| (g, t))).collect();
    let mut rows = cells
        .into_par_iter()
        .map(|(g, t)| run_trial(cfg, &set, cfg.grid[g], t).map(|r| ((g, t), r.row)))
        .collect::<Result<Vec<_>, _>>()?;
    rows.sort_by_key(|(key, _)| *key);
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

/// Sweep over train flip rates; test labels stay clean.
pub fn noise_sweep(cfg: &SweepConfig) -> Result<Vec<ResultRow>, ExperimentError> {
    expect_kind(cfg, GridKind::Noise)?;
    run_sweep(cfg)
}

/// Sweep over training set sizes against a fixed clean test set per trial.
pub fn size_sweep(cfg: &SweepConfig) -> Result<Vec<ResultRow>, ExperimentError> {
    expect_kind(cfg, GridKind::Size)?;
    run_sweep(cfg)
}

/// Noise sweep whose rows are read for their `q01` column.
pub fn quantile_sweep(cfg: &SweepConfig) -> Result<Vec<ResultRow>, ExperimentError> {
    noise_sweep(cfg)
}

fn expect_kind(cfg: &SweepConfig, kind: GridKind) -> Result<(), ExperimentError> {
    if cfg.grid_kind != kind {
        return Err(ExperimentError::Config(format!(
            "expected a {} grid, got {}",
            kind.as_str(),
            cfg.grid_kind.as_str()
        )));
    }
    Ok(())
}

/// Mean of `f` per grid value, in grid order.
pub fn grid_means(rows: &[ResultRow], f: impl Fn(&ResultRow) -> f64) -> Vec<(f64, f64)> {
    let mut order: Vec<u64> = Vec::new();
    let mut acc: HashMap<u64, (f64, usize)> = HashMap::new();
    for r in rows {
        let key = r.grid_value.to_bits();
        let e = acc.entry(key).or_insert_with(|| {
            order.push(key);
            (0.0, 0)
        });
        e.0 += f(r);
        e.1 += 1;
    }
    order.into_iter().map(|k| (f64::from_bits(k), acc[&k].0 / acc[&k].1 as f64)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparabilityResult {
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub seconds: f64,
}

/// Unregularized fit on clean data with the deciding features.
pub fn separability_check(
    preset: Preset,
    n_train: usize,
    n_test: usize,
    seed: u64,
) -> Result<SeparabilityResult, ExperimentError> {
    let start = Instant::now();
    let mut cfg = preset.sweep(GridKind::Noise);
    cfg.grid = vec![0.0];
    cfg.n_train = n_train;
    cfg.n_test = n_test;
    cfg.trials = 1;
    cfg.base_seed = seed;
    cfg.learner = LogRegConfig::SEPARABLE;
    cfg.validate()?;
    let set = build_predicate_set(cfg.spec.alphabet(), &cfg.features)?;
    let run = run_trial(&cfg, &set, 0.0, 0)?;
    let train = balanced(&cfg.spec, n_train, cfg.len_range, cfg.trial_seed(0.0, 0))
        .map_err(|source| ExperimentError::Sampler { grid_value: 0.0, trial: 0, source })?;
    let (train_x, train_y) = to_matrix(&set, &train);
    let train_accuracy = evaluate(&run.model, &train_x, &train_y)
        .map_err(|source| ExperimentError::Learn { grid_value: 0.0, trial: 0, source })?
        .accuracy;
    Ok(SeparabilityResult {
        train_accuracy,
        test_accuracy: run.metrics.accuracy,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Two unary strings with the same truth vector, exactly one of which is in
/// `{a^k : k ≡ 0 mod m}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub shorter: usize,
    pub longer: usize,
    pub truth_vector: Vec<bool>,
    pub shorter_member: bool,
    pub longer_member: bool,
    pub m: usize,
}

impl Witness {
    /// Re-evaluates both strings against `set` and the modular language.
    pub fn verify(&self, set: &PredicateSet) -> bool {
        let a = Sym(1);
        let tv = |len| truth_vector(set, &vec![a; len]);
        let x = tv(self.shorter);
        x == tv(self.longer)
            && x.0 == self.truth_vector
            && (self.shorter.is_multiple_of(self.m)) == self.shorter_member
            && (self.longer.is_multiple_of(self.m)) == self.longer_member
            && self.shorter_member != self.longer_member
    }

    pub fn describe(&self, alphabet: &Alphabet) -> String {
        let sym = alphabet.symbol_names()[0].clone();
        let bits: String = self.truth_vector.iter().map(|&b| if b { '1' } else { '0' }).collect();
        format!(
            "{sym}^{} ({}) and {sym}^{} ({}) share truth vector {bits}",
            self.shorter,
            if self.shorter_member { "in L" } else { "not in L" },
            self.longer,
            if self.longer_member { "in L" } else { "not in L" },
        )
    }
}

fn find_witness(tvs: &[TruthVector], lengths: std::ops::RangeInclusive<usize>, m: usize) -> Option<(usize, usize)> {
    let mut seen: HashMap<&TruthVector, Vec<usize>> = HashMap::new();
    for j in lengths {
        let tv = &tvs[j];
        if let Some(prev) = seen.get(tv) {
            if let Some(&i) = prev.iter().rev().find(|&&i| (i % m == 0) != (j % m == 0)) {
                return Some((i, j));
            }
        }
        seen.entry(tv).or_default().push(j);
    }
    None
}

/// Scans `a^1 … a^(2^n + m)` for two lengths in one predicate cell with
/// different membership in the mod-`m` language, then retries from `a^0`.
pub fn counterexample_demo(set: &PredicateSet, m: usize) -> Result<Witness, ExperimentError> {
    let alphabet = set.alphabet();
    if alphabet.len() != 1 {
        return Err(ExperimentError::NotUnary(alphabet.len()));
    }
    let n = set.len();
    let cells = 1usize.checked_shl(n as u32).filter(|&c| c < usize::MAX / 2);
    let Some(cells) = cells else { return Err(ExperimentError::ModulusTooSmall { n, m }) };
    if m <= cells {
        return Err(ExperimentError::ModulusTooSmall { n, m });
    }
    let bound = cells + m;
    let a = Sym(1);
    let tvs: Vec<TruthVector> = (0..=bound).map(|len| truth_vector(set, &vec![a; len])).collect();
    let (i, j) = find_witness(&tvs, 1..=bound, m)
        .or_else(|| find_witness(&tvs, 0..=bound, m))
        .ok_or(ExperimentError::NoWitness { bound })?;
    Ok(Witness {
        shorter: i,
        longer: j,
        truth_vector: tvs[i].0.clone(),
        shorter_member: i % m == 0,
        longer_member: j % m == 0,
        m,
    })
}

pub fn unary_alphabet() -> Alphabet {
    Alphabet::from_chars("a").expect("static alphabet")
}

fn unary_set(predicates: Vec<Predicate>) -> PredicateSet {
    let n = predicates.len();
    PredicateSet::from_predicates(unary_alphabet(), ClassParams::Sl { k: n.max(1) }, predicates)
}

/// `contains a^2, contains a^4, …, contains a^(2n)`.
pub fn unary_ladder(n: usize) -> PredicateSet {
    let a = Sym(1);
    unary_set((1..=n).map(|i| Predicate::new(PredicateKind::Substring(vec![a; 2 * i]), pad_width_for(2 * i))).collect())
}

/// Every short unary predicate whose value on `a^L` is constant for `L ≥ 3`.
pub fn unary_pool() -> Vec<Predicate> {
    let a = Sym(1);
    let b = Sym::BOUNDARY;
    let mut pool = Vec::new();
    for j in 1..=3 {
        pool.push(Predicate::new(PredicateKind::Substring(vec![a; j]), 1));
        pool.push(Predicate::new(PredicateKind::Subsequence(vec![a; j]), 1));
        pool.push(Predicate::new(PredicateKind::ThresholdCount { gram: vec![a], threshold: j as u32 }, 1));
        pool.push(Predicate::new(PredicateKind::Prefix(vec![a; j]), 0));
        pool.push(Predicate::new(PredicateKind::Suffix(vec![a; j]), 0));
    }
    for j in 0..=2 {
        let core = vec![a; j];
        let mut both = vec![b];
        both.extend(&core);
        both.push(b);
        pool.push(Predicate::new(PredicateKind::Substring(both), 1));
        if j > 0 {
            let mut left = vec![b];
            left.extend(&core);
            pool.push(Predicate::new(PredicateKind::Substring(left), 1));
            let mut right = core.clone();
            right.push(b);
            pool.push(Predicate::new(PredicateKind::Substring(right), 1));
        }
    }
    pool.sort();
    pool.dedup();
    pool
}

/// `n` distinct predicates drawn from [`unary_pool`].
pub fn random_unary_set(n: usize, rng: &mut Rng) -> PredicateSet {
    let mut pool = unary_pool();
    pool.shuffle(rng);
    pool.truncate(n);
    unary_set(pool)
}

pub fn random_unary_set_from_seed(n: usize, seed: u64) -> PredicateSet {
    random_unary_set(n, &mut rng_from_seed(seed))
}

/// Six significant digits in plain decimal notation.
pub fn format_real(v: f64) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.5e}");
    let exp: i32 = sci.rsplit('e').next().and_then(|e| e.parse().ok()).expect("exponent");
    let decimals = (5 - exp).max(0) as usize;
    format!("{v:.decimals$}")
}

pub const CSV_HEADER: [&str; 11] = [
    "class",
    "grid_kind",
    "grid_value",
    "trial",
    "train_size",
    "noise",
    "accuracy",
    "f1",
    "q01",
    "seed",
    "config_hash",
];

fn grid_value_text(kind: GridKind, v: f64) -> String {
    match kind {
        GridKind::Size => format!("{}", v as u64),
        GridKind::Noise => format_real(v),
    }
}

pub fn write_csv<W: std::io::Write>(rows: &[ResultRow], w: W) -> csv::Result<()> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    out.write_record(CSV_HEADER)?;
    for r in rows {
        out.write_record([
            r.class.clone(),
            r.grid_kind.as_str().to_string(),
            grid_value_text(r.grid_kind, r.grid_value),
            r.trial.to_string(),
            r.train_size.to_string(),
            format_real(r.noise),
            format_real(r.accuracy),
            format_real(r.f1),
            format_real(r.q01),
            r.seed.to_string(),
            r.config_hash.clone(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn csv_string(rows: &[ResultRow]) -> String {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv is utf-8")
}

pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<(), ExperimentError> {
    let io = |reason: String| ExperimentError::Io { path: path.display().to_string(), reason };
    let file = std::fs::File::create(path).map_err(|e| io(e.to_string()))?;
    write_csv(rows, std::io::BufWriter::new(file)).map_err(|e| io(e.to_string()))
}

/// Membership of every string, for auditing datasets.
pub fn oracle_labels(spec: &LanguageSpec, strings: &[Str]) -> Vec<bool> {
    strings.iter().map(|s| membership(spec, s)).collect()
}
