//! `subreg`: dataset generation, featurization, training, sweeps, the unary
//! counterexample search and the affix pipeline from one binary.
//!
//! Every subcommand accepts `--config FILE.toml` whose keys mirror the long
//! flags (snake_case); flags win. The effective settings are written to
//! `<out>/config.toml`. Exit codes: 0 success, 1 usage, 2 runtime failure.

mod config;

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use subreg::experiments::{
    counterexample_demo, emit_csv, grid_means, random_unary_set_from_seed, run_sweep, unary_alphabet, unary_ladder,
    GridKind, Preset, SweepConfig, DEFAULT_NOISE_GRID, DEFAULT_SIZE_GRID, DEFAULT_TRIALS,
};
use subreg::languages::{flip_labels, generate_dataset, LabeledDataset, LanguageSpec, LanguageSpecDoc};
use subreg::learners::{
    evaluate, margin_quantile, normalized_margins, train_logreg, train_perceptron, LogRegConfig, Matrix,
    PerceptronConfig, SavedModel, TrainConfig,
};
use subreg::morphology::{
    load_affix_corpus, parse_affix_corpus, run_pipeline, AffixInventory, MorphConfig, Split, BUNDLED_CORPUS,
};
use subreg::predicates::{build_predicate_set, feature_matrix, ClassParams, ClassTag, PredicateSet};
use subreg::seeds::fingerprint;

use config::{merge_config, CliError};

const OUT_ENV: &str = "SUBREG_OUT";
const DEFAULT_OUT: &str = "results";

#[derive(Parser)]
#[command(name = "subreg", version, about = "Subregular languages as linear classifiers over predicate features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a labelled dataset from a language.
    Gen(GenArgs),
    /// Evaluate a predicate set on a dataset.
    Featurize(FeaturizeArgs),
    /// Fit a linear model on a dataset.
    Train(TrainArgs),
    /// Score a saved model on a dataset.
    Eval(EvalArgs),
    /// Accuracy and margins as train-label noise grows.
    SweepNoise(SweepArgs),
    /// Accuracy as the training set grows.
    SweepSize(SweepArgs),
    /// Lowest-percentile normalized margins across noise rates.
    SweepQuantile(SweepArgs),
    /// Two unary strings no fixed predicate set can tell apart modulo m.
    Counterexample(CounterArgs),
    /// Affix-order classification on a word list.
    Morph(MorphArgs),
}

#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
struct Common {
    /// TOML file with defaults for any flag.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory [default: $SUBREG_OUT or ./results].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
struct LangArgs {
    /// Language definition (TOML or JSON).
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Class tag: sl, sp, lt, pt, ltt or tsl. With no --forbidden, picks a built-in language.
    #[arg(long)]
    class: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    /// Symbols: a string of characters or a comma-separated list.
    #[arg(long)]
    alphabet: Option<String>,
    #[arg(long, value_delimiter = ',')]
    forbidden: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    tier: Option<Vec<String>>,
    #[arg(long)]
    min_len: Option<usize>,
    #[arg(long)]
    max_len: Option<usize>,
}

#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
struct LearnArgs {
    /// logreg or perceptron.
    #[arg(long)]
    learner: Option<String>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
struct GenArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    lang: LangArgs,
    #[arg(long)]
    n_pos: Option<usize>,
    #[arg(long)]
    n_neg: Option<usize>,
    /// Label flip rate.
    #[arg(long)]
    noise: Option<f64>,
}

#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
struct FeaturizeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    lang: LangArgs,
    /// Dataset in JSON lines.
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
struct TrainArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    lang: LangArgs,
    #[command(flatten)]
    #[serde(flatten)]
    learn: LearnArgs,
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
struct EvalArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
struct SweepArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    lang: LangArgs,
    #[command(flatten)]
    #[serde(flatten)]
    learn: LearnArgs,
    /// Comma-separated grid values.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    /// Label flip rate for size sweeps.
    #[arg(long)]
    noise: Option<f64>,
}

#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
struct CounterArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
    /// Number of predicates.
    #[arg(long)]
    n_preds: Option<usize>,
    /// Modulus [default: 2^n + 1].
    #[arg(long)]
    m: Option<usize>,
    /// Draw predicates at random (from --seed) instead of the a², a⁴, … ladder.
    #[arg(long)]
    random: Option<bool>,
}

#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
struct MorphArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    learn: LearnArgs,
    /// Word list TSV [default: bundled toy corpus].
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Affix inventory, one token per line [default: bundled].
    #[arg(long)]
    affixes: Option<PathBuf>,
    #[arg(long)]
    neg_per_pos: Option<usize>,
    /// Train,dev,test fractions.
    #[arg(long, value_delimiter = ',')]
    ratios: Option<Vec<f64>>,
    #[arg(long)]
    min_stem: Option<usize>,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long)]
    bins: Option<usize>,
}

trait HasCommon {
    fn common(&self) -> &Common;
}

macro_rules! has_common {
    ($($t:ty),*) => {$(
        impl HasCommon for $t {
            fn common(&self) -> &Common {
                &self.common
            }
        }
    )*};
}
has_common!(GenArgs, FeaturizeArgs, TrainArgs, EvalArgs, SweepArgs, CounterArgs, MorphArgs);

fn main() -> ExitCode {
    ExitCode::from(run(std::env::args_os()))
}

fn run<I, T>(argv: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("\nFor more information, try '--help'.");
            1
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Gen(a) => with_config(a, "gen", cmd_gen),
        Command::Featurize(a) => with_config(a, "featurize", cmd_featurize),
        Command::Train(a) => with_config(a, "train", cmd_train),
        Command::Eval(a) => with_config(a, "eval", cmd_eval),
        Command::SweepNoise(a) => with_config(a, "sweep-noise", |a, o| cmd_sweep(a, o, SweepKind::Noise)),
        Command::SweepSize(a) => with_config(a, "sweep-size", |a, o| cmd_sweep(a, o, SweepKind::Size)),
        Command::SweepQuantile(a) => with_config(a, "sweep-quantile", |a, o| cmd_sweep(a, o, SweepKind::Quantile)),
        Command::Counterexample(a) => with_config(a, "counterexample", cmd_counterexample),
        Command::Morph(a) => with_config(a, "morph", cmd_morph),
    }
}

/// Merges the config file under the flags, resolves the output directory and
/// worker count, then runs `f`. The config echo is written only on success.
fn with_config<A, F>(flags: A, name: &str, f: F) -> Result<(), CliError>
where
    A: HasCommon + Serialize + for<'de> Deserialize<'de>,
    F: FnOnce(&A, &Path) -> Result<(), CliError>,
{
    let args: A = merge_config(&flags, flags.common().config.as_deref())?;
    let common = args.common();
    if let Some(jobs) = common.jobs {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        // Fails only if a pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    let out = common
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    f(&args, &out)?;
    let mut echo = toml::Table::new();
    echo.insert("command".into(), toml::Value::String(name.into()));
    echo.insert("out".into(), toml::Value::String(out.display().to_string()));
    if let toml::Value::Table(t) = toml::Value::try_from(&args).map_err(|e| CliError::Runtime(e.into()))? {
        for (k, v) in t {
            echo.entry(k).or_insert(v);
        }
    }
    write_file(&out.join("config.toml"), &toml::to_string(&echo).map_err(|e| CliError::Runtime(e.into()))?)?;
    Ok(())
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn runtime(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Runtime(e.into())
}

fn required<'a, T>(v: &'a Option<T>, flag: &str) -> Result<&'a T, CliError> {
    v.as_ref().ok_or_else(|| usage(format!("missing required flag --{flag}")))
}

fn prepare_out(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display())).map_err(runtime)
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display())).map_err(runtime)
}

/// A language plus the length range to sample from.
struct Language {
    spec: LanguageSpec,
    len_range: (usize, usize),
    preset: Option<Preset>,
}

fn read_spec(path: &Path) -> Result<LanguageSpec, CliError> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(runtime)?;
    let parsed = if path.extension().is_some_and(|e| e == "toml") {
        toml::from_str::<LanguageSpec>(&text).map_err(anyhow::Error::from)
    } else {
        serde_json::from_str::<LanguageSpec>(&text).map_err(anyhow::Error::from)
    };
    parsed.with_context(|| format!("parsing {}", path.display())).map_err(runtime)
}

fn resolve_language(lang: &LangArgs) -> Result<Language, CliError> {
    let (spec, preset) = if let Some(path) = &lang.spec {
        (read_spec(path)?, None)
    } else {
        let class = required(&lang.class, "class (or --spec)")?;
        let tag = class.parse::<ClassTag>().map_err(|e| usage(e.to_string()))?;
        match &lang.forbidden {
            Some(forbidden) => {
                let alphabet = required(&lang.alphabet, "alphabet")?;
                let symbols: Vec<String> = if alphabet.contains(',') {
                    alphabet.split(',').map(|s| s.trim().to_string()).collect()
                } else {
                    alphabet.chars().map(String::from).collect()
                };
                let doc = LanguageSpecDoc {
                    class: tag,
                    alphabet: symbols,
                    boundary: "#".into(),
                    k: lang.k,
                    m: lang.m,
                    forbidden: forbidden.clone(),
                    tier: lang.tier.clone().unwrap_or_default(),
                    constraints: Vec::new(),
                    literals: Vec::new(),
                };
                (LanguageSpec::try_from(doc).map_err(|e| usage(e.to_string()))?, None)
            }
            None => {
                let preset: Preset = class.parse().map_err(|e| usage(format!("{e}; pass --forbidden or --spec")))?;
                let spec = preset.spec();
                let order = match spec.deciding_params() {
                    ClassParams::Sl { k } | ClassParams::Sp { k } => k,
                    other => other.order(),
                };
                if let Some(k) = lang.k.filter(|&k| k != order) {
                    return Err(usage(format!(
                        "no built-in {class} language with k = {k}; pass --forbidden or --spec"
                    )));
                }
                (spec, Some(preset))
            }
        }
    };
    let default = preset.map(Preset::len_range).unwrap_or((5, 15));
    let len_range = (lang.min_len.unwrap_or(default.0), lang.max_len.unwrap_or(default.1));
    if len_range.0 > len_range.1 {
        return Err(usage(format!("--min-len {} exceeds --max-len {}", len_range.0, len_range.1)));
    }
    Ok(Language { spec, len_range, preset })
}

fn logreg_config(learn: &LearnArgs, base: LogRegConfig) -> LogRegConfig {
    LogRegConfig {
        l2: learn.l2.unwrap_or(base.l2),
        lr: learn.lr.unwrap_or(base.lr),
        epochs: learn.epochs.unwrap_or(base.epochs),
        tol: learn.tol.unwrap_or(base.tol),
    }
}

fn read_dataset(path: &Path, spec_alphabet: &subreg::strings::Alphabet) -> Result<LabeledDataset, CliError> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display())).map_err(runtime)?;
    LabeledDataset::read_jsonl(spec_alphabet, BufReader::new(file))
        .with_context(|| format!("reading {}", path.display()))
        .map_err(runtime)
}

fn dataset_fingerprint(path: &Path) -> Result<String, CliError> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(runtime)?;
    Ok(fingerprint(&text))
}

fn cmd_gen(a: &GenArgs, out: &Path) -> Result<(), CliError> {
    let lang = resolve_language(&a.lang)?;
    let noise = a.noise.unwrap_or(0.0);
    if !(0.0..=1.0).contains(&noise) {
        return Err(usage(format!("--noise {noise} outside [0, 1]")));
    }
    let seed = a.common.seed.unwrap_or(0);
    let clean = generate_dataset(&lang.spec, a.n_pos.unwrap_or(500), a.n_neg.unwrap_or(500), lang.len_range, seed)
        .map_err(runtime)?;
    let data = flip_labels(&clean, noise, seed);
    prepare_out(out)?;
    let mut buf = Vec::new();
    data.write_jsonl(lang.spec.alphabet(), &mut buf).map_err(runtime)?;
    write_file(&out.join("dataset.jsonl"), &String::from_utf8(buf).map_err(runtime)?)?;
    write_file(&out.join("spec.json"), &(serde_json::to_string_pretty(&lang.spec).map_err(runtime)? + "\n"))?;
    eprintln!("wrote {} items to {}", data.len(), out.join("dataset.jsonl").display());
    Ok(())
}

fn features_for(spec: &LanguageSpec) -> Result<PredicateSet, CliError> {
    build_predicate_set(spec.alphabet(), &spec.deciding_params()).map_err(runtime)
}

fn cmd_featurize(a: &FeaturizeArgs, out: &Path) -> Result<(), CliError> {
    let data_path = required(&a.data, "data")?;
    let lang = resolve_language(&a.lang)?;
    let set = features_for(&lang.spec)?;
    let data = read_dataset(data_path, lang.spec.alphabet())?;
    let m = feature_matrix(&set, &data.strings());
    prepare_out(out)?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let mut header = vec!["string".to_string()];
    header.extend(set.feature_names());
    header.push("label".into());
    w.write_record(&header).map_err(runtime)?;
    for (i, item) in data.items.iter().enumerate() {
        let mut rec = vec![lang.spec.alphabet().render(&item.string)];
        rec.extend(m.row(i).iter().map(|&b| if b { "1" } else { "0" }.to_string()));
        rec.push(item.label.to_string());
        w.write_record(&rec).map_err(runtime)?;
    }
    let bytes = w.into_inner().map_err(|e| runtime(anyhow!("{e}")))?;
    write_file(&out.join("features.csv"), &String::from_utf8(bytes).map_err(runtime)?)?;
    write_file(&out.join("features.json"), &(set.to_json() + "\n"))?;
    eprintln!("{} rows × {} predicates", m.nrows(), m.ncols());
    Ok(())
}

fn cmd_train(a: &TrainArgs, out: &Path) -> Result<(), CliError> {
    let data_path = required(&a.data, "data")?;
    let lang = resolve_language(&a.lang)?;
    let set = features_for(&lang.spec)?;
    let data = read_dataset(data_path, lang.spec.alphabet())?;
    let x = Matrix::from_bool(&feature_matrix(&set, &data.strings()));
    let y = data.labels();
    let (model, config) = match a.learn.learner.as_deref().unwrap_or("logreg") {
        "logreg" => {
            let cfg = logreg_config(&a.learn, LogRegConfig::NOISY);
            (train_logreg(&x, &y, cfg).map_err(runtime)?.model, TrainConfig::Logreg(cfg))
        }
        "perceptron" => {
            let cfg = PerceptronConfig { max_epochs: a.learn.epochs.unwrap_or(1000), fit_bias: true };
            let run = train_perceptron(&x, &y, cfg).map_err(runtime)?;
            eprintln!("perceptron: {} mistakes over {} epochs", run.mistakes, run.epochs);
            (run.model, TrainConfig::Perceptron(cfg))
        }
        other => return Err(usage(format!("unknown learner `{other}` (logreg, perceptron)"))),
    };
    let model = model.with_feature_names(set.feature_names()).map_err(runtime)?;
    let metrics = evaluate(&model, &x, &y).map_err(runtime)?;
    let saved = SavedModel {
        model,
        config,
        dataset_fingerprint: dataset_fingerprint(data_path)?,
        features: Some(set.to_doc()),
    };
    prepare_out(out)?;
    saved.save(&out.join("model.json")).map_err(runtime)?;
    write_file(&out.join("train_metrics.json"), &(serde_json::to_string_pretty(&metrics).map_err(runtime)? + "\n"))?;
    eprintln!("training accuracy {:.4}", metrics.accuracy);
    Ok(())
}

#[derive(Serialize)]
struct EvalReport {
    metrics: subreg::learners::Metrics,
    q01: Option<f64>,
    n: usize,
    model_dataset_fingerprint: String,
    dataset_fingerprint: String,
}

fn cmd_eval(a: &EvalArgs, out: &Path) -> Result<(), CliError> {
    let model_path = required(&a.model, "model")?;
    let data_path = required(&a.data, "data")?;
    let saved = SavedModel::load(model_path).map_err(runtime)?;
    let doc = saved.features.clone().ok_or_else(|| runtime(anyhow!("{} has no feature set", model_path.display())))?;
    let set = PredicateSet::from_doc(doc).map_err(runtime)?;
    let data = read_dataset(data_path, set.alphabet())?;
    let x = Matrix::from_bool(&feature_matrix(&set, &data.strings()));
    let y = data.labels();
    let metrics = evaluate(&saved.model, &x, &y).map_err(runtime)?;
    let q01 = match normalized_margins(&saved.model, &x, &y) {
        Ok(m) if !m.is_empty() => Some(margin_quantile(&m, 0.01).map_err(runtime)?),
        _ => None,
    };
    let report = EvalReport {
        metrics,
        q01,
        n: data.len(),
        model_dataset_fingerprint: saved.dataset_fingerprint.clone(),
        dataset_fingerprint: dataset_fingerprint(data_path)?,
    };
    prepare_out(out)?;
    write_file(&out.join("eval.json"), &(serde_json::to_string_pretty(&report).map_err(runtime)? + "\n"))?;
    println!("accuracy {:.4}  f1 {:.4}", metrics.accuracy, metrics.f1);
    Ok(())
}

#[derive(Clone, Copy)]
enum SweepKind {
    Noise,
    Size,
    Quantile,
}

fn cmd_sweep(a: &SweepArgs, out: &Path, kind: SweepKind) -> Result<(), CliError> {
    let lang = resolve_language(&a.lang)?;
    let grid_kind = match kind {
        SweepKind::Noise | SweepKind::Quantile => GridKind::Noise,
        SweepKind::Size => GridKind::Size,
    };
    let default_grid = match grid_kind {
        GridKind::Noise => DEFAULT_NOISE_GRID.to_vec(),
        GridKind::Size => DEFAULT_SIZE_GRID.to_vec(),
    };
    let name = lang.preset.map(|p| p.name().to_string()).unwrap_or_else(|| lang.spec.class_tag().to_string());
    let cfg = SweepConfig {
        name: name.clone(),
        features: lang.spec.deciding_params(),
        spec: lang.spec,
        len_range: lang.len_range,
        grid_kind,
        grid: a.grid.clone().unwrap_or(default_grid),
        n_train: a.n_train.unwrap_or(2000),
        n_test: a.n_test.unwrap_or(1000),
        noise: a.noise.unwrap_or(0.0),
        trials: a.trials.unwrap_or(DEFAULT_TRIALS),
        base_seed: a.common.seed.unwrap_or(0),
        learner: logreg_config(&a.learn, LogRegConfig::NOISY),
    };
    if let Some(l) = a.learn.learner.as_deref().filter(|l| *l != "logreg") {
        return Err(usage(format!("sweeps train logistic regression only, got --learner {l}")));
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let rows = run_sweep(&cfg).map_err(runtime)?;
    for (g, acc) in grid_means(&rows, |r| r.accuracy) {
        let q: Vec<f64> = rows.iter().filter(|r| r.grid_value == g).map(|r| r.q01).collect();
        let q01 = q.iter().sum::<f64>() / q.len() as f64;
        eprintln!("{name} {} = {g}: mean accuracy {acc:.4}, mean q01 {q01:.4}", grid_kind.as_str());
    }
    prepare_out(out)?;
    let file = match kind {
        SweepKind::Noise => "noise_sweep.csv",
        SweepKind::Size => "size_sweep.csv",
        SweepKind::Quantile => "quantile_sweep.csv",
    };
    emit_csv(&rows, &out.join(file)).map_err(runtime)?;
    eprintln!("wrote {} rows to {}", rows.len(), out.join(file).display());
    Ok(())
}

#[derive(Serialize)]
struct CounterReport {
    predicates: Vec<String>,
    witness: subreg::experiments::Witness,
    verified: bool,
}

fn cmd_counterexample(a: &CounterArgs, out: &Path) -> Result<(), CliError> {
    let n = *required(&a.n_preds, "n-preds")?;
    if n == 0 || n > 20 {
        return Err(usage("--n-preds must be between 1 and 20"));
    }
    let m = a.m.unwrap_or((1 << n) + 1);
    if m <= 1 << n {
        return Err(usage(format!("--m must exceed 2^n = {}", 1usize << n)));
    }
    let set = if a.random.unwrap_or(false) {
        random_unary_set_from_seed(n, a.common.seed.unwrap_or(0))
    } else {
        unary_ladder(n)
    };
    let witness = counterexample_demo(&set, m).map_err(runtime)?;
    let verified = witness.verify(&set);
    let report = CounterReport { predicates: set.feature_names(), witness, verified };
    println!("predicates: {}", report.predicates.join(", "));
    println!("witness: {}", report.witness.describe(&unary_alphabet()));
    prepare_out(out)?;
    write_file(&out.join("counterexample.json"), &(serde_json::to_string_pretty(&report).map_err(runtime)? + "\n"))?;
    if !verified {
        return Err(runtime(anyhow!("witness failed re-verification")));
    }
    Ok(())
}

#[derive(Serialize)]
struct MorphSummary {
    entries: usize,
    diagnostics: usize,
    skipped_negatives: usize,
    leaked_words: Vec<String>,
    split_sizes: Vec<(Split, usize)>,
    dev: Option<subreg::learners::Metrics>,
    test: subreg::learners::Metrics,
    top_features: Vec<(String, f64)>,
    histogram: subreg::morphology::Histogram,
}

fn cmd_morph(a: &MorphArgs, out: &Path) -> Result<(), CliError> {
    let inventory = match &a.affixes {
        Some(p) => AffixInventory::load(p).map_err(runtime)?,
        None => AffixInventory::bundled(),
    };
    let ratios = match a.ratios.as_deref() {
        None => (0.8, 0.1, 0.1),
        Some([t, d, e]) => (*t, *d, *e),
        Some(_) => return Err(usage("--ratios takes three comma-separated fractions")),
    };
    let cfg = MorphConfig {
        neg_per_pos: a.neg_per_pos.unwrap_or(1),
        ratios,
        seed: a.common.seed.unwrap_or(0),
        min_stem: a.min_stem.unwrap_or(3),
        learner: logreg_config(&a.learn, LogRegConfig::NOISY),
        top_k: a.top_k.unwrap_or(10),
        bins: a.bins.unwrap_or(10),
    };
    let load = match &a.corpus {
        Some(p) => load_affix_corpus(p, &inventory, cfg.min_stem),
        None => parse_affix_corpus(BUNDLED_CORPUS, &inventory, cfg.min_stem),
    }
    .map_err(runtime)?;
    let report = run_pipeline(&load.entries, &inventory, &cfg).map_err(runtime)?;
    let split_sizes =
        [Split::Train, Split::Dev, Split::Test].into_iter().map(|s| (s, report.dataset.split(s).len())).collect();
    let summary = MorphSummary {
        entries: load.entries.len(),
        diagnostics: load.diagnostics.len(),
        skipped_negatives: report.dataset.skipped.len(),
        leaked_words: report.leaked_words.clone(),
        split_sizes,
        dev: report.dev,
        test: report.test,
        top_features: report.top_features.clone(),
        histogram: report.histogram.clone(),
    };
    prepare_out(out)?;
    write_file(&out.join("morph_report.json"), &(serde_json::to_string_pretty(&summary).map_err(runtime)? + "\n"))?;
    let mut top = String::from("rank\tweight\tpredicate\n");
    for (i, (name, w)) in report.top_features.iter().enumerate() {
        top.push_str(&format!("{}\t{w:+.4}\t{name}\n", i + 1));
    }
    write_file(&out.join("top_features.tsv"), &top)?;
    let mut hist = String::from("lo,hi,count\n");
    for (i, c) in report.histogram.counts.iter().enumerate() {
        hist.push_str(&format!("{:.6},{:.6},{c}\n", report.histogram.edges[i], report.histogram.edges[i + 1]));
    }
    write_file(&out.join("margin_histogram.csv"), &hist)?;
    let diag: String = load.diagnostics.iter().map(|d| format!("{d}\n")).collect();
    write_file(&out.join("diagnostics.txt"), &diag)?;
    let c = report.test.confusion;
    println!(
        "test accuracy {:.4}  f1 {:.4}  (tp {} fp {} fn {} tn {})",
        report.test.accuracy, report.test.f1, c.tp, c.fp, c.fn_, c.tn
    );
    Ok(())
}
