//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Run with `cargo test --test acceptance`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use sha2::{Digest, Sha256};
use statrs::distribution::{ContinuousCDF, StudentsT};
use traitsteer::backend::ToyCorpora;
use traitsteer::pipeline::{run_pipeline, PipelineOptions};
use traitsteer_core::analysis::{
    category_frequencies, frobenius_distance, pearson_matrix, sign_test_p, welch_t_test, LexiconCategory, Matrix, ScoreMatrix,
};
use traitsteer_core::dataset::{export_dpo, validate_dataset, Scenario};
use traitsteer_core::logits::{combine_logits, softmax, LogitVector, SamplerConfig};
use traitsteer_core::ngram::NgramModel;
use traitsteer_core::personality::{tertile_split, zscore_normalize, Bucket, ContinuousLabels, Level, Trait, TraitSpec, TraitValues};
use traitsteer_core::psychometrics::{score_item, score_questionnaire, ItemResponse, Questionnaire, QuestionnaireItem, Scale};
use traitsteer_core::scorer::{
    evaluate_binary_accuracy, mse, mse_gradient, train_linear_scorer, Binarization, TrainOptions,
};
use traitsteer_core::steering::{generate_base, generate_steered, SteeringPolicy};
use traitsteer_core::text::{WhitespaceSplitter, WordTokenizer};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let held: bool = $cond;
        if !held {
            return Err(format!($($fmt)+));
        }
    };
}

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    check: fn() -> Outcome,
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "zero-gamma reduction", budget: Duration::from_secs(10), check: zero_gamma_reduction },
        Criterion { id: 2, name: "expert dominance", budget: Duration::from_secs(5), check: expert_dominance },
        Criterion { id: 3, name: "pipeline cardinality", budget: Duration::from_secs(120), check: pipeline_cardinality },
        Criterion { id: 4, name: "questionnaire scoring oracle", budget: Duration::from_secs(5), check: questionnaire_oracle },
        Criterion { id: 5, name: "correlation / Frobenius oracle", budget: Duration::from_secs(10), check: correlation_oracle },
        Criterion { id: 6, name: "tertile rule", budget: Duration::from_secs(5), check: tertile_rule },
        Criterion { id: 7, name: "ridge scorer", budget: Duration::from_secs(30), check: ridge_scorer },
        Criterion { id: 8, name: "Welch t-test reference", budget: Duration::from_secs(5), check: welch_reference },
        Criterion { id: 9, name: "directional steering", budget: Duration::from_secs(60), check: directional_steering },
        Criterion { id: 10, name: "CLI reproducibility", budget: Duration::from_secs(120), check: cli_reproducibility },
    ];
    let quiet: Box<dyn Fn(&std::panic::PanicHookInfo<'_>) + Sync + Send> = Box::new(|_| {});
    let default_hook = std::panic::take_hook();
    std::panic::set_hook(quiet);
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(c.check)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let elapsed = start.elapsed();
        let result = match result {
            Ok(detail) if elapsed > c.budget => Err(format!("{detail}; over the {:?} budget", c.budget)),
            other => other,
        };
        let (status, detail) = match &result {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{status} [{:>2}] {:<32} {:>8.2}s  {detail}", c.id, c.name, elapsed.as_secs_f64());
    }
    std::panic::set_hook(default_hook);
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

const TOY_WORDS: [&str; 8] = ["a", "b", "c", "d", "e", "f", "<stop>", "<unk>"];

fn random_corpus(rng: &mut impl Rng) -> String {
    let mut out = String::new();
    for _ in 0..rng.random_range(5..25) {
        for _ in 0..rng.random_range(2..10) {
            out.push_str(TOY_WORDS[rng.random_range(0..7)]);
            out.push(' ');
        }
        out.push('\n');
    }
    out
}

fn zero_gamma_reduction() -> Outcome {
    let mut rng = StdRng::seed_from_u64(1);
    let tok = Arc::new(WordTokenizer::new(TOY_WORDS).unwrap());
    for case in 0..100 {
        let order = rng.random_range(1..4);
        let base = NgramModel::train("base", tok.clone(), &random_corpus(&mut rng), order, rng.random_range(0.01..1.0)).unwrap();
        let expert = NgramModel::train("expert", tok.clone(), &random_corpus(&mut rng), order, rng.random_range(0.01..1.0)).unwrap();
        let policy = SteeringPolicy {
            gamma: 0.0,
            prefix_words: rng.random_range(0..6),
            max_new_tokens: 40,
            stop_sequences: vec!["<stop>".into()],
            ..Default::default()
        };
        let sampler = if case % 4 == 0 { SamplerConfig::greedy() } else { SamplerConfig::temperature(rng.random_range(0.3..2.0), rng.random()) };
        let steered = generate_steered(&base, &expert, "a b", &policy, &sampler).map_err(|e| e.to_string())?;
        let plain = generate_base(&base, "a b", &policy, &sampler).map_err(|e| e.to_string())?;
        ensure!(steered.tokens == plain.tokens && steered.text == plain.text, "case {case}: sequences differ");
    }
    Ok("100/100 token-identical".into())
}

fn expert_dominance() -> Outcome {
    const GRID: [f64; 7] = [0.0, 0.25, 0.5, 1.0, 2.0, 5.0, 10.0];
    let mut rng = StdRng::seed_from_u64(2);
    let mut limit_checked = 0;
    for case in 0..1_000 {
        let n = rng.random_range(2..100);
        let base = LogitVector::new((0..n).map(|_| rng.random_range(-10.0..10.0)).collect()).unwrap();
        let expert = LogitVector::new((0..n).map(|_| rng.random_range(-10.0..10.0)).collect()).unwrap();
        let j = expert.argmax() as usize;
        let mut last = f64::NEG_INFINITY;
        for g in GRID {
            let p = softmax(&combine_logits(&base, &expert, g).unwrap(), 1.0).unwrap().values()[j];
            ensure!(p >= last - 1e-12, "case {case}: p fell from {last} to {p} at gamma {g}");
            last = p;
        }
        let mut sorted = expert.values().to_vec();
        sorted.sort_by(|a, b| b.total_cmp(a));
        if sorted[0] - sorted[1] >= 1e-3 {
            limit_checked += 1;
            let combined = combine_logits(&base, &expert, 1e6).unwrap();
            ensure!(combined.argmax() as usize == j, "case {case}: gamma=1e6 argmax differs from expert argmax");
        }
    }
    Ok(format!("1000 pairs monotone; limit argmax held on {limit_checked} pairs with gap >= 1e-3"))
}

fn pipeline_cardinality() -> Outcome {
    const S: usize = 200;
    let backends = ToyCorpora::demo().train(2, 0.01).map_err(|e| e.to_string())?;
    let openers = ["Do you want to come along", "I finished the report", "Can you help me move", "We lost the game", "The meeting moved"];
    let scenarios: Vec<Scenario> = (0..S)
        .map(|i| Scenario {
            scenario_id: format!("toy-{i:04}"),
            narrative: format!("Scene {i}."),
            speaker_x_utterance: format!("{} on day {}?", openers[i % openers.len()], i),
            original_y_response: None,
        })
        .collect();
    let opts = PipelineOptions {
        policy: SteeringPolicy { stop_sequences: vec!["<eos>".into()], ..Default::default() },
        sampler: SamplerConfig::greedy(),
        run_seed: 2024,
        workers: 4,
        max_retries: 2,
    };
    let records = run_pipeline(&scenarios, &backends.base, &backends, &opts).map_err(|e| e.to_string())?;
    ensure!(records.len() == 10 * S, "{} records, expected {}", records.len(), 10 * S);
    let report = validate_dataset(&records);
    ensure!(report.is_valid(), "validation findings: {:?}", report.findings);
    for spec in TraitSpec::all() {
        ensure!(report.count(spec) == S, "{spec:?}: {} records", report.count(spec));
    }
    for pair in records.chunks(2) {
        ensure!(pair[0].scenario_id == pair[1].scenario_id && pair[0].trait_name == pair[1].trait_name, "records not paired");
        ensure!(pair[0].speaker_x.as_bytes() == pair[1].speaker_x.as_bytes(), "speaker_x differs in {}", pair[0].scenario_id);
    }
    for target in Level::BOTH {
        let pairs = export_dpo(&records, target).map_err(|e| e.to_string())?;
        ensure!(pairs.len() == 5 * S, "{} DPO pairs for target {target:?}", pairs.len());
        for p in &pairs {
            let find = |level: Level, text: &str| {
                records.iter().any(|r| r.trait_name == p.trait_name && r.level == level && r.speaker_y == text && p.prompt.ends_with(&r.speaker_x))
            };
            ensure!(find(target, &p.chosen) && find(target.opposite(), &p.rejected), "pair levels wrong for {:?}", p.trait_name);
        }
    }
    Ok(format!("{} records, valid, {} DPO pairs per target level", records.len(), 5 * S))
}

fn bfi_structure(rng: &mut impl Rng) -> Questionnaire {
    let counts = [
        (Trait::Extraversion, 8),
        (Trait::Agreeableness, 9),
        (Trait::Conscientiousness, 9),
        (Trait::Neuroticism, 8),
        (Trait::Openness, 10),
    ];
    let mut items = Vec::new();
    for (t, n) in counts {
        for _ in 0..n {
            let id = format!("item{}", items.len() + 1);
            items.push(QuestionnaireItem { item_id: id, text: String::new(), trait_name: t, reverse_keyed: rng.random_bool(0.5) });
        }
    }
    Questionnaire::new("bfi-structure", items, 1, 5).unwrap()
}

fn questionnaire_oracle() -> Outcome {
    let mut rng = StdRng::seed_from_u64(4);
    for case in 0..1_000 {
        let q = bfi_structure(&mut rng);
        let ratings: Vec<i64> = (0..44).map(|_| rng.random_range(1..=5)).collect();
        let responses: Vec<ItemResponse> =
            q.items().iter().zip(&ratings).map(|(i, &r)| ItemResponse { item_id: i.item_id.clone(), rating: r, raw_text: String::new() }).collect();
        let got = score_questionnaire(&responses, &q).map_err(|e| e.to_string())?.mean;
        for t in Trait::ALL {
            let (mut sum, mut n) = (0i64, 0i64);
            for (item, &r) in q.items().iter().zip(&ratings) {
                if item.trait_name == t {
                    sum += if item.reverse_keyed { 6 - r } else { r };
                    n += 1;
                }
            }
            ensure!(got[t] == sum as f64 / n as f64, "case {case}, {t:?}: {} vs {}/{}", got[t], sum, n);
        }
        let threes: Vec<ItemResponse> = q.items().iter().map(|i| ItemResponse { item_id: i.item_id.clone(), rating: 3, raw_text: String::new() }).collect();
        ensure!(score_questionnaire(&threes, &q).unwrap().mean.0 == [3.0; 5], "all-3 responses do not give 3.0");
    }
    let scale = Scale { min: 1, max: 5 };
    let item = QuestionnaireItem { item_id: "r".into(), text: String::new(), trait_name: Trait::Openness, reverse_keyed: true };
    for x in 1..=5 {
        let twice = score_item(score_item(x, &item, &scale).unwrap() as i64, &item, &scale).unwrap();
        ensure!(twice == x as f64, "reverse keying is not an involution at {x}");
    }
    Ok("1000 response sets exact; all-3 gives 3.0; reverse keying involutive".into())
}

fn covariance_oracle(rows: &[[f64; 5]]) -> [[f64; 5]; 5] {
    let n = rows.len() as f64;
    let mut out = [[0.0; 5]; 5];
    for i in 0..5 {
        for j in 0..5 {
            let (mut sx, mut sy, mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for r in rows {
                sx += r[i];
                sy += r[j];
                sxy += r[i] * r[j];
                sxx += r[i] * r[i];
                syy += r[j] * r[j];
            }
            let cov = sxy / n - (sx / n) * (sy / n);
            let vx = sxx / n - (sx / n) * (sx / n);
            let vy = syy / n - (sy / n) * (sy / n);
            out[i][j] = cov / (vx * vy).sqrt();
        }
    }
    out
}

fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_rows(&(0..rows).map(|_| (0..cols).map(|_| rng.random_range(-2.0..2.0)).collect()).collect::<Vec<_>>()).unwrap()
}

fn correlation_oracle() -> Outcome {
    let mut rng = StdRng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let rows: Vec<[f64; 5]> = (0..50).map(|_| std::array::from_fn(|_| rng.random_range(1.0..5.0))).collect();
        let got = pearson_matrix(&ScoreMatrix::new(rows.clone()).unwrap()).map_err(|e| e.to_string())?;
        let want = covariance_oracle(&rows);
        for (i, want_row) in want.iter().enumerate() {
            for (j, want_ij) in want_row.iter().enumerate() {
                let d = (got.0[i][j] - want_ij).abs();
                worst = worst.max(d);
                ensure!(d <= 1e-9, "case {case}: entry ({i},{j}) off by {d}");
            }
        }
    }
    for case in 0..1_000 {
        let (r, c) = (rng.random_range(1..6), rng.random_range(1..6));
        let (a, b, m) = (random_matrix(&mut rng, r, c), random_matrix(&mut rng, r, c), random_matrix(&mut rng, r, c));
        let d = |x: &Matrix, y: &Matrix| frobenius_distance(x, y).unwrap();
        ensure!(d(&a, &a) == 0.0, "case {case}: d(a,a) != 0");
        ensure!(d(&a, &b) >= 0.0 && (d(&a, &b) > 0.0) == (a != b), "case {case}: positivity");
        ensure!(d(&a, &b) == d(&b, &a), "case {case}: symmetry");
        ensure!(d(&a, &b) <= d(&a, &m) + d(&m, &b) + 1e-12, "case {case}: triangle inequality");
    }
    let root2 = frobenius_distance(&Matrix::identity(2), &Matrix::zeros(2, 2)).unwrap();
    ensure!((root2 - std::f64::consts::SQRT_2).abs() < 1e-15, "identity vs zero gave {root2}");
    Ok(format!("max Pearson deviation {worst:.1e}; metric axioms on 1000 triples; I2 vs 0 = sqrt(2)"))
}

fn tertile_rule() -> Outcome {
    let mut rng = StdRng::seed_from_u64(6);
    for case in 0..1_000 {
        let n = rng.random_range(3..300);
        let mut values: Vec<f64> = Vec::with_capacity(n);
        while values.len() < n {
            let v: f64 = rng.random_range(-5.0..5.0);
            if !values.contains(&v) {
                values.push(v);
            }
        }
        let (_, buckets) = tertile_split(&values).map_err(|e| e.to_string())?;
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        let lo = n.div_ceil(3);
        let hi = (2 * n).div_ceil(3);
        for (v, b) in values.iter().zip(&buckets) {
            let rank = sorted.iter().position(|s| s == v).unwrap();
            let want = if rank < lo { Bucket::Low } else if rank >= hi { Bucket::High } else { Bucket::Mid };
            ensure!(*b == want, "case {case}: value at rank {rank} of {n} bucketed {b:?}");
        }
        for target in [Bucket::Low, Bucket::Mid, Bucket::High] {
            let size = buckets.iter().filter(|b| **b == target).count() as f64;
            ensure!((size - n as f64 / 3.0).abs() <= 1.0, "case {case}: {target:?} has {size} of {n}");
        }
        let (_, z) = tertile_split(&zscore_normalize(&values).unwrap()).unwrap();
        ensure!(z == buckets, "case {case}: z-scoring changed buckets");
    }
    Ok("1000 vectors match the sort-and-count oracle; z-scoring preserves buckets".into())
}

fn ridge_scorer() -> Outcome {
    let mut rng = StdRng::seed_from_u64(7);
    const COEF: [[f64; 4]; 5] = [
        [0.02, -0.01, 0.03, 0.0],
        [0.01, 0.01, 0.01, 0.01],
        [-0.03, 0.02, 0.0, 0.015],
        [0.0, 0.0, 0.04, -0.02],
        [0.025, -0.02, -0.01, 0.01],
    ];
    let words = ["alpha", "beta", "gamma", "delta"];
    let corpus: Vec<(String, ContinuousLabels)> = (0..200)
        .map(|_| {
            let counts: [usize; 4] = std::array::from_fn(|_| rng.random_range(0..5));
            let mut text: Vec<&str> = Vec::new();
            for (w, &c) in words.iter().zip(&counts) {
                text.extend(std::iter::repeat_n(*w, c));
            }
            text.push("pad");
            let labels = std::array::from_fn(|k| 0.5 + COEF[k].iter().zip(&counts).map(|(a, &c)| a * c as f64).sum::<f64>());
            (text.join(" "), TraitValues(labels))
        })
        .collect();
    let model = train_linear_scorer(&corpus, &TrainOptions { l2_lambda: 1e-8, min_doc_freq: 2, length_normalize: false })
        .map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for (text, labels) in &corpus {
        let p = model.predict_traits(text);
        for k in 0..5 {
            worst = worst.max((p.0[k] - labels.0[k]).abs());
        }
    }
    ensure!(worst <= 1e-6, "recovery error {worst}");

    let mut worst_grad: f64 = 0.0;
    for _ in 0..20 {
        let x: Vec<Vec<f64>> = (0..8).map(|_| (0..4).map(|_| rng.random_range(0..4) as f64).collect()).collect();
        let y: Vec<[f64; 5]> = (0..8).map(|_| std::array::from_fn(|_| rng.random_range(0.0..1.0))).collect();
        let mut w: [Vec<f64>; 5] = std::array::from_fn(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect());
        let b: [f64; 5] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let (gw, _) = mse_gradient(&w, &b, &x, &y);
        for k in 0..5 {
            for j in 0..4 {
                let h = 1e-5;
                let orig = w[k][j];
                w[k][j] = orig + h;
                let up = mse(&w, &b, &x, &y);
                w[k][j] = orig - h;
                let down = mse(&w, &b, &x, &y);
                w[k][j] = orig;
                let numeric = (up - down) / (2.0 * h);
                let rel = (gw[k][j] - numeric).abs() / gw[k][j].abs().max(numeric.abs()).max(1e-8);
                worst_grad = worst_grad.max(rel);
            }
        }
    }
    ensure!(worst_grad <= 1e-5, "gradient relative error {worst_grad}");

    let separable = |rng: &mut StdRng, n: usize| -> Vec<(String, ContinuousLabels, TraitSpec)> {
        (0..n)
            .map(|i| {
                let mut words = vec!["so".to_string()];
                let mut labels = [0.0; 5];
                let mut levels = [Level::Low; 5];
                for t in Trait::ALL {
                    let high = rng.random_bool(0.5);
                    levels[t.index()] = if high { Level::High } else { Level::Low };
                    labels[t.index()] = if high { rng.random_range(0.75..0.95) } else { rng.random_range(0.05..0.25) };
                    words.push(format!("{}{}", t.code(), if high { "plus" } else { "minus" }));
                }
                let t = Trait::ALL[i % 5];
                (words.join(" "), TraitValues(labels), TraitSpec::new(t, levels[t.index()]))
            })
            .collect()
    };
    let train: Vec<(String, ContinuousLabels)> = separable(&mut rng, 300).into_iter().map(|(t, l, _)| (t, l)).collect();
    let model = train_linear_scorer(&train, &TrainOptions::default()).map_err(|e| e.to_string())?;
    let eval: Vec<(String, TraitSpec)> = separable(&mut rng, 1_000).into_iter().map(|(t, _, s)| (t, s)).collect();
    let acc = evaluate_binary_accuracy(&model, &eval, &Binarization::scale_midpoint()).map_err(|e| e.to_string())?;
    ensure!(acc.average >= 0.95, "separable accuracy {}", acc.average);
    Ok(format!("recovery {worst:.1e}; gradient rel. error {worst_grad:.1e}; separable accuracy {:.3}", acc.average))
}

fn welch_reference() -> Outcome {
    let mut rng = StdRng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let a: Vec<f64> = (0..rng.random_range(3..40)).map(|_| rng.random_range(0.0..10.0)).collect();
        let shift = rng.random_range(-2.0..2.0);
        let b: Vec<f64> = (0..rng.random_range(3..40)).map(|_| rng.random_range(0.0..7.0) + shift).collect();
        let got = welch_t_test(&a, &b).map_err(|e| e.to_string())?;
        let (na, nb) = (a.len() as f64, b.len() as f64);
        let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
        let var = |x: &[f64]| {
            let m = mean(x);
            x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
        };
        let (sa, sb) = (var(&a) / na, var(&b) / nb);
        let t = (mean(&a) - mean(&b)) / (sa + sb).sqrt();
        let df = (sa + sb).powi(2) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
        let p = 2.0 * StudentsT::new(0.0, 1.0, df).unwrap().cdf(-t.abs());
        let d = (got.p - p).abs();
        worst = worst.max(d);
        ensure!(d <= 1e-6, "case {case}: p {} vs reference {p}", got.p);
        ensure!((got.t - t).abs() <= 1e-9 * t.abs().max(1.0), "case {case}: t {} vs {t}", got.t);
    }
    let s = [2.0, 3.5, 1.0, 4.25, 3.0];
    let same = welch_t_test(&s, &s).map_err(|e| e.to_string())?;
    ensure!(same.t == 0.0 && same.p == 1.0, "identical samples gave t={}, p={}", same.t, same.p);
    Ok(format!("100 pairs, max |dp| {worst:.1e}; identical samples t=0, p=1"))
}

fn directional_steering() -> Outcome {
    let base_corpus = "\
        i feel happy about the day and it was great .\n\
        i feel sad about the news and it was awful .\n\
        the trip was fine but the weather was bad .\n\
        we love the music but hate the noise .\n\
        it was a good day with some angry people .\n\
        the food was nice and the service was terrible .\n\
        i am glad you came but i am upset about the delay .\n\
        they said it was okay and then it was worse .\n";
    let expert_corpus = "\
        happy glad love great joy\n\
        i love it , so happy and glad\n\
        great joy and love , wonderful and happy\n\
        wonderful , glad , great\n";
    let lexicon = [LexiconCategory::new("positive", ["happy", "glad", "lov*", "great", "joy*", "wonderful", "good", "nice"]).unwrap()];
    let tok = Arc::new(WordTokenizer::from_texts([base_corpus, expert_corpus], &["<unk>"]).unwrap());
    let base = NgramModel::train("mixed", tok.clone(), base_corpus, 2, 0.1).unwrap();
    let expert = NgramModel::train("positive", tok, expert_corpus, 2, 0.1).unwrap();
    let (mut wins, trials) = (0, 50);
    let (mut f_plain, mut f_steered) = (0.0, 0.0);
    for seed in 0..trials as u64 {
        let sampler = SamplerConfig::temperature(1.0, 1_000 + seed);
        let run = |gamma: f64| {
            let policy = SteeringPolicy { gamma, max_new_tokens: 40, ..Default::default() };
            let text = generate_steered(&base, &expert, "how was your day ?", &policy, &sampler).unwrap().text;
            category_frequencies(&[text], &lexicon, 100, &WhitespaceSplitter).unwrap().frequency("positive").unwrap()
        };
        let (plain, steered) = (run(0.0), run(2.0));
        f_plain += plain / trials as f64;
        f_steered += steered / trials as f64;
        if steered > plain {
            wins += 1;
        }
    }
    let p = sign_test_p(wins, trials);
    ensure!(p < 0.01, "only {wins}/{trials} wins, sign test p = {p:.3e}");
    Ok(format!("gamma=2 beat gamma=0 in {wins}/{trials} (p = {p:.1e}); mean positive/100 tokens {f_plain:.1} -> {f_steered:.1}"))
}

fn digest(path: &Path) -> String {
    hex::encode(Sha256::digest(std::fs::read(path).unwrap()))
}

fn cli_reproducibility() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_traitsteer");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    let scenarios: Vec<String> = (0..6)
        .map(|i| format!("{{\"scenario_id\":\"c{i}\",\"narrative\":\"Friends meet.\",\"speaker_x_utterance\":\"What should we do on day {i}?\"}}"))
        .collect();
    std::fs::write(d.join("s.jsonl"), scenarios.join("\n")).unwrap();
    std::fs::write(d.join("lex.txt"), "[positive]\nhappy\nlov*\nenjoy\n[negative]\nworr*\nannoying\n").unwrap();
    let mut labeled = String::new();
    let mut leveled = String::new();
    let mut rng = StdRng::seed_from_u64(10);
    for i in 0..60 {
        let v: [f64; 5] = std::array::from_fn(|_| (rng.random_range(0..=100) as f64) / 100.0);
        let words: Vec<String> = Trait::ALL.iter().map(|t| format!("{}{}", t.code(), if v[t.index()] > 0.5 { "up" } else { "down" })).collect();
        let text = words.join(" ");
        labeled.push_str(&format!(
            "{{\"text\":\"{text}\",\"openness\":{},\"conscientiousness\":{},\"extraversion\":{},\"agreeableness\":{},\"neuroticism\":{}}}\n",
            v[0], v[1], v[2], v[3], v[4]
        ));
        let t = Trait::ALL[i % 5];
        leveled.push_str(&format!("{{\"text\":\"{text}\",\"trait\":\"{}\",\"level\":\"{}\"}}\n", t.name(), if v[t.index()] > 0.5 { "high" } else { "low" }));
    }
    std::fs::write(d.join("labeled.jsonl"), labeled).unwrap();
    std::fs::write(d.join("leveled.jsonl"), leveled).unwrap();

    let steps: Vec<(Vec<&str>, Vec<&str>)> = vec![
        (vec!["generate", "--scenarios", "s.jsonl", "--out", "d.jsonl", "--gamma", "3", "--seed", "7", "--workers", "3"], vec!["d.jsonl"]),
        (
            vec!["generate", "--scenarios", "s.jsonl", "--out", "dt.jsonl", "--gamma", "1", "--temperature", "0.7", "--seed", "8"],
            vec!["dt.jsonl"],
        ),
        (vec!["export", "--dataset", "d.jsonl", "--format", "sft", "--out", "sft.jsonl"], vec!["sft.jsonl"]),
        (vec!["export", "--dataset", "d.jsonl", "--format", "dpo", "--target", "low", "--out", "dpo.jsonl"], vec!["dpo.jsonl"]),
        (
            vec!["administer", "--seed", "3", "--runs", "3", "--out", "a.json", "--transcript", "a.jsonl", "--scores", "a.csv"],
            vec!["a.json", "a.jsonl", "a.csv"],
        ),
        (
            vec![
                "administer", "--seed", "4", "--runs", "3", "--persona", "demonstration", "--trait", "agreeableness", "--level", "high",
                "--demos", "d.jsonl", "--out", "b.json", "--scores", "b.csv",
            ],
            vec!["b.json", "b.csv"],
        ),
        (vec!["analyze", "correlations", "--scores", "a.csv", "--reference", "b.csv", "--out", "corr.json"], vec!["corr.json"]),
        (vec!["analyze", "corpus", "--dataset", "d.jsonl", "--out", "corpus.csv"], vec!["corpus.csv"]),
        (vec!["analyze", "categories", "--dataset", "d.jsonl", "--lexicon", "lex.txt", "--out", "cat.csv"], vec!["cat.csv"]),
        (vec!["analyze", "welch", "--a", "a.csv", "--b", "b.csv", "--out", "welch.csv"], vec!["welch.csv"]),
        (vec!["train-scorer", "--corpus", "labeled.jsonl", "--out", "model.txt", "--min-df", "1"], vec!["model.txt"]),
        (vec!["score", "--model", "model.txt", "--input", "d.jsonl", "--out", "scores.csv"], vec!["scores.csv"]),
        (vec!["evaluate", "--model", "model.txt", "--labeled", "leveled.jsonl", "--out", "eval.json"], vec!["eval.json"]),
    ];
    let mut files = 0;
    for (args, outputs) in &steps {
        let mut hashes = Vec::new();
        for round in 0..2 {
            let o = Command::new(bin).current_dir(d).args(args).output().map_err(|e| e.to_string())?;
            ensure!(o.status.success(), "`{}` failed in round {round}: {}", args.join(" "), String::from_utf8_lossy(&o.stderr));
            hashes.push(outputs.iter().map(|f| digest(&d.join(f))).collect::<Vec<_>>());
        }
        ensure!(hashes[0] == hashes[1], "`{}` produced different bytes on rerun", args.join(" "));
        files += outputs.len();
    }
    Ok(format!("{} commands, {files} output files byte-identical across reruns", steps.len()))
}
