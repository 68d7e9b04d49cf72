//! Runs every acceptance criterion and prints one line per check.
//!
//! A check listed in `EXPECTED_FAILURES` may print FAIL without failing the
//! target; every other FAIL exits non-zero.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng as _;
use subreg::experiments::{
    counterexample_demo, csv_string, random_unary_set_from_seed, run_sweep, separability_check, unary_alphabet,
    GridKind, Preset, ResultRow,
};
use subreg::languages::{enumerate_strings, membership, LanguageSpec};
use subreg::learners::{logistic_objective, train_perceptron, Matrix, PerceptronConfig};
use subreg::minterm::{build_separator, decide, index_to_bits, minterm_embed, AcceptSet};
use subreg::morphology::{
    load_affix_corpus, parse_affix_corpus, run_pipeline, AffixInventory, MorphConfig, Split, BUNDLED_CORPUS,
};
use subreg::predicates::TruthVector;
use subreg::seeds::rng_from_seed;
use subreg::strings::{contains_subsequence, contains_substring, count_occurrences, Alphabet, Sym};

/// Checks whose failure is known and explained in the README.
const EXPECTED_FAILURES: &[&str] = &["8b"];

struct Check {
    id: &'static str,
    name: &'static str,
    passed: bool,
    detail: String,
}

fn check(id: &'static str, name: &'static str, passed: bool, detail: impl Into<String>) -> Check {
    let c = Check { id, name, passed, detail: detail.into() };
    let status = match (c.passed, EXPECTED_FAILURES.contains(&id)) {
        (true, _) => "PASS",
        (false, true) => "FAIL (expected)",
        (false, false) => "FAIL",
    };
    println!("[{status}] {:<3} {}: {}", c.id, c.name, c.detail);
    c
}

fn separability() -> Check {
    let mut worst = f64::INFINITY;
    let mut slowest = 0.0f64;
    let mut ok = 0;
    let mut total = 0;
    for preset in Preset::ALL {
        for seed in 0..5 {
            let r = separability_check(preset, 2000, 1000, seed).expect("separability run");
            total += 1;
            worst = worst.min(r.test_accuracy);
            slowest = slowest.max(r.seconds);
            if r.test_accuracy >= 0.995 && r.seconds < 60.0 {
                ok += 1;
            } else {
                println!(
                    "      {} seed {seed}: test accuracy {:.4} in {:.1}s",
                    preset.name(),
                    r.test_accuracy,
                    r.seconds
                );
            }
        }
    }
    check(
        "1",
        "noise-free separability",
        ok == total,
        format!("{ok}/{total} runs with test accuracy >= 0.995 (worst {worst:.4}, slowest {slowest:.2}s)"),
    )
}

fn minterm() -> Check {
    let start = Instant::now();
    let mut rng = rng_from_seed(2);
    let mut disagreements = 0;
    let mut bad_scores = 0;
    let mut cases = 0;
    for n in 0..=4usize {
        for _ in 0..50 {
            let s = AcceptSet::from_patterns(
                n,
                (0..1usize << n).filter(|_| rng.random_bool(0.5)).map(|i| index_to_bits(i, n)),
            )
            .unwrap();
            let sep = build_separator(&s, n).unwrap();
            for i in 0..1usize << n {
                let bits = index_to_bits(i, n);
                let (accept, score) = decide(&sep, &minterm_embed(&TruthVector(bits.clone())).unwrap()).unwrap();
                cases += 1;
                disagreements += usize::from(accept != s.contains(&bits));
                bad_scores += usize::from(score.abs() != 0.5);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        "2",
        "minterm separator",
        disagreements == 0 && bad_scores == 0 && secs < 1.0,
        format!("{cases} patterns, {disagreements} disagreements, {bad_scores} scores off 0.5, {secs:.3}s"),
    )
}

fn perceptron_bound() -> Check {
    let n = 4;
    let mut within = 0;
    let mut worst_ratio = 0.0f64;
    for run in 0..100u64 {
        let size = [1usize, 2, 4, 8][run as usize % 4];
        let mut rng = rng_from_seed(1000 + run);
        let mut cells: Vec<usize> = (0..1 << n).collect();
        cells.shuffle(&mut rng);
        let accept = &cells[..size];
        let mut x = Matrix::new(1 << n);
        let mut y = Vec::new();
        for _ in 0..200 {
            let i = rng.random_range(0..1usize << n);
            x.push_one_hot(i).unwrap();
            y.push(if accept.contains(&i) { 1 } else { -1 });
        }
        let r = train_perceptron(&x, &y, PerceptronConfig::default()).unwrap();
        worst_ratio = worst_ratio.max(r.mistakes as f64 / (4 * size) as f64);
        within += usize::from(r.converged && r.mistakes <= 4 * size);
    }
    check(
        "3",
        "perceptron mistake bound",
        within == 100,
        format!("{within}/100 runs with mistakes <= 4|S| (worst mistakes/4|S| = {worst_ratio:.3})"),
    )
}

fn counterexample() -> Check {
    let alphabet = unary_alphabet();
    let mut ok = 0;
    let mut example = String::new();
    for run in 0..20u64 {
        let n = 1 + run as usize % 3;
        let m = (1 << n) + 1;
        let set = random_unary_set_from_seed(n, 500 + run);
        match counterexample_demo(&set, m) {
            Ok(w) if w.verify(&set) && w.longer <= (1 << n) + m => {
                ok += 1;
                if run == 0 {
                    example = w.describe(&alphabet);
                }
            }
            Ok(w) => println!("      run {run}: witness rejected: {}", w.describe(&alphabet)),
            Err(e) => println!("      run {run}: {e}"),
        }
    }
    check(
        "4",
        "unary counterexample",
        ok == 20,
        format!("{ok}/20 verified witnesses within the scan bound; e.g. {example}"),
    )
}

fn string_oracles() -> Check {
    fn substring(s: &[Sym], g: &[Sym]) -> bool {
        (0..=s.len()).any(|i| i + g.len() <= s.len() && (0..g.len()).all(|j| s[i + j] == g[j]))
    }
    fn subsequence(s: &[Sym], h: &[Sym]) -> bool {
        (0u32..1 << s.len()).any(|mask| {
            mask.count_ones() as usize == h.len()
                && (0..s.len()).filter(|i| mask >> i & 1 == 1).map(|i| s[i]).eq(h.iter().copied())
        })
    }
    fn count(s: &[Sym], g: &[Sym]) -> usize {
        (0..s.len()).filter(|&i| i + g.len() <= s.len() && s[i..i + g.len()] == *g).count()
    }
    let alphabet = Alphabet::from_chars("abc").unwrap();
    let strings = enumerate_strings(&alphabet, 8);
    let patterns: Vec<_> = enumerate_strings(&alphabet, 3).into_iter().filter(|g| !g.0.is_empty()).collect();
    let mut mismatches = 0;
    for s in &strings {
        for g in &patterns {
            mismatches += usize::from(contains_substring(&s.0, &g.0) != substring(&s.0, &g.0));
            mismatches += usize::from(contains_subsequence(&s.0, &g.0) != subsequence(&s.0, &g.0));
            mismatches += usize::from(count_occurrences(&s.0, &g.0) != count(&s.0, &g.0));
        }
    }
    check(
        "5",
        "string primitives vs oracles",
        mismatches == 0,
        format!("{} strings x {} patterns, {mismatches} mismatches", strings.len(), patterns.len()),
    )
}

fn tsl_projection() -> Check {
    let alphabet = Alphabet::from_chars("abc").unwrap();
    let cases: &[(usize, &[&str], &[&str])] = &[
        (2, &["a", "b"], &["ab", "ba"]),
        (2, &["a"], &["aa", "#a"]),
        (2, &["b", "c"], &["cb", "b#"]),
        (3, &["a", "c"], &["aca", "#cc"]),
        (2, &["a", "b", "c"], &["ca"]),
    ];
    let strings = enumerate_strings(&alphabet, 6);
    let mut mismatches = 0;
    for &(k, tier, forbidden) in cases {
        let tsl = LanguageSpec::tsl(alphabet.clone(), k, tier, forbidden).unwrap();
        let sl = LanguageSpec::sl(alphabet.clone(), k, forbidden).unwrap();
        for x in &strings {
            let kept: String =
                alphabet.render(&x.0).chars().filter(|c| tier.contains(&c.to_string().as_str())).collect();
            let projected = alphabet.parse(&kept).unwrap();
            mismatches += usize::from(membership(&tsl, &x.0) != membership(&sl, &projected.0));
        }
    }
    check(
        "6",
        "TSL equals SL on the tier",
        mismatches == 0,
        format!("{} specs x {} strings, {mismatches} mismatches", cases.len(), strings.len()),
    )
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn at(rows: &[ResultRow], g: f64, f: impl Fn(&ResultRow) -> f64) -> Vec<f64> {
    rows.iter().filter(|r| r.grid_value == g).map(f).collect()
}

fn noise_sweeps() -> BTreeMap<&'static str, Vec<ResultRow>> {
    Preset::ALL
        .into_iter()
        .map(|p| {
            let mut cfg = p.sweep(GridKind::Noise);
            cfg.grid = vec![0.0, 0.3];
            (p.name(), run_sweep(&cfg).expect("noise sweep"))
        })
        .collect()
}

fn noise_degradation(sweeps: &BTreeMap<&'static str, Vec<ResultRow>>) -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, rows) in sweeps {
        let clean = mean(&at(rows, 0.0, |r| r.accuracy));
        let noisy = mean(&at(rows, 0.3, |r| r.accuracy));
        ok &= noisy < clean;
        parts.push(format!("{name} {clean:.4} -> {noisy:.4}"));
    }
    check("7", "accuracy drops under label noise", ok, parts.join(", "))
}

fn quantile_signs(sweeps: &BTreeMap<&'static str, Vec<ResultRow>>) -> Vec<Check> {
    let fmt = |q: &[f64]| q.iter().map(|v| format!("{v:+.3}")).collect::<Vec<_>>().join(" ");
    let sl = at(&sweeps["sl3"], 0.0, |r| r.q01);
    let ltt = at(&sweeps["ltt2"], 0.0, |r| r.q01);
    let sl_pos = sl.iter().filter(|&&q| q > 0.0).count();
    let ltt_neg = ltt.iter().filter(|&&q| q < 0.0).count();
    let ltt_noisy = at(&sweeps["ltt2"], 0.3, |r| r.q01);
    vec![
        check("8a", "SL q0.01 > 0 at noise 0", sl_pos >= 4, format!("{sl_pos}/5 seeds positive: {}", fmt(&sl))),
        check(
            "8b",
            "LTT q0.01 < 0 at noise 0",
            ltt_neg >= 4,
            format!(
                "{ltt_neg}/5 seeds negative: {} (at noise 0.3: {}); a negative q0.01 over 1000 test items needs >= 10 errors, which contradicts the noise-free accuracy target",
                fmt(&ltt),
                fmt(&ltt_noisy)
            ),
        ),
    ]
}

fn gradient_check() -> Check {
    let h = 1e-5;
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let mut rng = rng_from_seed(9000 + seed);
        let (rows, cols) = (rng.random_range(2..10), rng.random_range(1..6));
        let dense: Vec<Vec<f64>> =
            (0..rows).map(|_| (0..cols).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let x = Matrix::from_dense(cols, &dense).unwrap();
        let y: Vec<i8> = (0..rows).map(|_| if rng.random_bool(0.5) { 1 } else { -1 }).collect();
        let w: Vec<f64> = (0..cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b = rng.random_range(-1.0..1.0);
        let l2 = rng.random_range(0.0..0.1);
        let f = |w: &[f64], b: f64| logistic_objective(&x, &y, w, b, l2).0;
        let (_, gw, gb) = logistic_objective(&x, &y, &w, b, l2);
        let rel = |a: f64, n: f64| (a - n).abs() / (a.abs() + n.abs()).max(1e-8);
        for j in 0..cols {
            let (mut up, mut down) = (w.clone(), w.clone());
            up[j] += h;
            down[j] -= h;
            worst = worst.max(rel(gw[j], (f(&up, b) - f(&down, b)) / (2.0 * h)));
        }
        worst = worst.max(rel(gb, (f(&w, b + h) - f(&w, b - h)) / (2.0 * h)));
    }
    check("9", "logistic gradient check", worst < 1e-6, format!("20 instances, worst relative error {worst:.2e}"))
}

fn morphology() -> Vec<Check> {
    let inventory = AffixInventory::bundled();
    let load = parse_affix_corpus(BUNDLED_CORPUS, &inventory, 3).expect("bundled corpus");
    let (mut correct, mut total, mut leaks) = (0usize, 0usize, 0usize);
    let mut per_seed = Vec::new();
    for seed in 0..20 {
        let cfg = MorphConfig { seed, ..MorphConfig::default() };
        let report = run_pipeline(&load.entries, &inventory, &cfg).expect("morph pipeline");
        let c = report.test.confusion;
        correct += c.tp + c.tn;
        total += c.total();
        per_seed.push(report.test.accuracy);
        let mut split_of: BTreeMap<&str, Split> = BTreeMap::new();
        for it in &report.dataset.items {
            if *split_of.entry(&it.word).or_insert(it.split) != it.split {
                leaks += 1;
            }
        }
        leaks += report.leaked_words.len();
    }
    let pooled = correct as f64 / total as f64;
    let lo = per_seed.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = per_seed.iter().cloned().fold(0.0, f64::max);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lexicon.tsv");
    std::fs::write(&path, BUNDLED_CORPUS).unwrap();
    let external = load_affix_corpus(&path, &inventory, 3)
        .map_err(|e| e.to_string())
        .and_then(|l| run_pipeline(&l.entries, &inventory, &MorphConfig::default()).map_err(|e| e.to_string()));
    let external_ok = matches!(&external, Ok(r) if !r.top_features.is_empty() && r.histogram.total() > 0);
    vec![
        check(
            "10a",
            "affix-order pipeline on the toy corpus",
            pooled >= 0.80 && leaks == 0,
            format!(
                "pooled test accuracy {pooled:.4} over 20 splits ({total} items; per split {lo:.3}..{hi:.3}), {leaks} leaked words"
            ),
        ),
        check(
            "10b",
            "pipeline on a user-supplied lexicon file",
            external_ok,
            match &external {
                Ok(r) => format!(
                    "accuracy {:.4}, f1 {:.4}, {} top features, {} histogram counts",
                    r.test.accuracy,
                    r.test.f1,
                    r.top_features.len(),
                    r.histogram.total()
                ),
                Err(e) => e.clone(),
            },
        ),
    ]
}

fn determinism() -> Check {
    let mut identical = 0;
    let mut bytes = 0;
    let mut runs = 0;
    for preset in Preset::ALL {
        for kind in [GridKind::Noise, GridKind::Size] {
            let mut cfg = preset.sweep(kind);
            cfg.trials = 2;
            cfg.n_train = 300;
            cfg.n_test = 200;
            cfg.base_seed = 77;
            cfg.grid = match kind {
                GridKind::Noise => vec![0.0, 0.2],
                GridKind::Size => vec![50.0, 200.0],
            };
            let first = csv_string(&run_sweep(&cfg).unwrap());
            let second = csv_string(&run_sweep(&cfg.clone()).unwrap());
            runs += 1;
            bytes += first.len();
            identical += usize::from(first.as_bytes() == second.as_bytes());
        }
    }
    check(
        "11",
        "sweep determinism",
        identical == runs,
        format!("{identical}/{runs} reruns byte-identical ({bytes} bytes)"),
    )
}

fn main() {
    let start = Instant::now();
    let mut checks =
        vec![separability(), minterm(), perceptron_bound(), counterexample(), string_oracles(), tsl_projection()];
    let sweeps = noise_sweeps();
    checks.push(noise_degradation(&sweeps));
    checks.extend(quantile_signs(&sweeps));
    checks.push(gradient_check());
    checks.extend(morphology());
    checks.push(determinism());

    let failed: Vec<&Check> = checks.iter().filter(|c| !c.passed).collect();
    let unexpected: Vec<&str> = failed.iter().filter(|c| !EXPECTED_FAILURES.contains(&c.id)).map(|c| c.id).collect();
    println!(
        "acceptance: {} passed, {} failed ({} expected) in {:.1}s",
        checks.len() - failed.len(),
        failed.len(),
        failed.len() - unexpected.len(),
        start.elapsed().as_secs_f64()
    );
    for c in &failed {
        println!("  failed {}: {}", c.id, c.name);
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {}", unexpected.join(", "));
        std::process::exit(1);
    }
}
