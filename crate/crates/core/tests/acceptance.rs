//! Acceptance gate. Runs every primary criterion, prints one PASS/FAIL line
//! each and exits non-zero if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use hatelab_core::annotation::{
    cohen_kappa_decisions, make_assignments, percent_agreement_decisions, AssignmentConfig, Decision,
};
use hatelab_core::corpus::{clean_pipeline, write_jsonl, CleanPost, CleanResources, PipelineConfig};
use hatelab_core::encoding::{detect_encoding, zawgyi_to_unicode, EncodingLabel};
use hatelab_core::features::FeatureConfig;
use hatelab_core::lexicon::{build_matcher, merge_lexicons, HateTerm, Lexicon};
use hatelab_core::models::brf::BrfHyper;
use hatelab_core::models::fasttext::FastTextHyper;
use hatelab_core::models::svm::SvmHyper;
use hatelab_core::models::{
    cross_validate_with_models, evaluate, random_oversample, stratified_folds, train, Dataset, FeatureSpec,
    ModelArtifact, ModelSpec,
};
use hatelab_core::synth::{generate, SynthConfig, SynthCorpus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GOLDEN: &str = include_str!("fixtures/zawgyi_golden.tsv");
const DETECT: &str = include_str!("fixtures/encoding_detect.tsv");

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn kappa_pathology() -> Outcome {
    let a = vec![Decision::No; 100];
    let mut b = a.clone();
    b[63] = Decision::Yes;
    let p = percent_agreement_decisions(&a, &b).map_err(|e| e.to_string())?;
    let k = cohen_kappa_decisions(&a, &b).map_err(|e| e.to_string())?;
    check((p - 0.99).abs() < 1e-12 && k.abs() < 1e-12, format!("agreement {p}, kappa {k}"))
}

fn lexicon(terms: &[String], source: &str) -> Lexicon {
    Lexicon::from_terms(terms.iter().map(|t| HateTerm { term: t.clone(), source: source.into(), note: String::new() }))
}

fn lexicon_arithmetic() -> Outcome {
    let a: Vec<String> = (0..72).map(|i| format!("ka{i:02}")).collect();
    // two exact duplicates, one term containing an entry of the first list
    let mut b: Vec<String> = (0..85).map(|i| format!("kb{i:02}")).collect();
    b.extend(["ka10".to_string(), "ka20".to_string(), "ka30x".to_string()]);
    let (merged, report) = merge_lexicons(&lexicon(&a, "first"), &lexicon(&b, "second"));
    let kept = merged.terms.iter().any(|t| t.term == "ka30x") && merged.terms.iter().any(|t| t.term == "ka30");
    let contained = report.containments.pairs.contains(&("ka30".to_string(), "ka30x".to_string()));
    check(
        merged.len() == 158 && report.exact_duplicates.terms == ["ka10", "ka20"] && kept && contained,
        format!(
            "{} terms, duplicates {:?}, {} containments",
            merged.len(),
            report.exact_duplicates.terms,
            report.containments.count
        ),
    )
}

fn assignment_arithmetic() -> Outcome {
    let annotators: Vec<String> = (1..=8).map(|i| format!("annotator{i}")).collect();
    let posts: Vec<String> = (0..5646).map(|i| format!("post{i:05}")).collect();
    let plan = make_assignments(&annotators, &posts, &AssignmentConfig::with_seed(7)).map_err(|e| e.to_string())?;
    let paired: BTreeSet<&String> = plan.rounds.iter().flatten().flatten().collect();
    let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
    for s in &plan.solo {
        *sizes.entry(s.posts.len()).or_default() += 1;
    }
    let want: BTreeMap<usize, usize> = [(505, 2), (506, 6)].into();
    check(
        plan.pairs.len() == 4 && paired.len() == 1600 && sizes == want,
        format!("{} pairs, {} paired posts, solo sizes {:?}", plan.pairs.len(), paired.len(), sizes),
    )
}

fn clean_synth(n: usize, seed: u64, noise: bool) -> (SynthCorpus, Vec<CleanPost>) {
    let mut cfg = SynthConfig::new(n, seed);
    cfg.noise = noise;
    let corpus = generate(&cfg);
    let res = CleanResources::with_matcher(build_matcher(&corpus.lexicon()));
    let (clean, _) = clean_pipeline(corpus.posts.clone(), &PipelineConfig::with_seed(seed), &res).expect("pipeline");
    (corpus, clean)
}

fn oversampling_specs() -> Vec<ModelSpec> {
    let features = FeatureConfig::word(1, 2, 1);
    vec![
        ModelSpec::Svm { features: features.clone(), hyper: SvmHyper::default() },
        ModelSpec::Brf { features, hyper: BrfHyper { min_samples_leaf: 5, ..BrfHyper::default() } },
        ModelSpec::Fasttext { hyper: FastTextHyper { buckets: 200_000, ..FastTextHyper::default() } },
    ]
}

fn oversampling_direction() -> Outcome {
    let start = Instant::now();
    let specs = oversampling_specs();
    // [model][without, with] sums of (recall, macro-F1)
    let mut sums = vec![[(0.0, 0.0); 2]; specs.len()];
    let seeds = 5;
    for seed in 0..seeds {
        let (corpus, clean) = clean_synth(10_000, seed, false);
        let data = corpus.dataset(&clean);
        let labels: Vec<bool> = data.examples.iter().map(|e| e.label).collect();
        let folds = stratified_folds(&labels, 5, seed).map_err(|e| e.to_string())?;
        let train_idx: Vec<usize> = (0..data.len()).filter(|&i| folds[i] != 0).collect();
        let test_idx: Vec<usize> = (0..data.len()).filter(|&i| folds[i] == 0).collect();
        let train_set = data.subset(&train_idx);
        let test_set = data.subset(&test_idx);
        let gold: Vec<(String, bool)> = test_set.examples.iter().map(|e| (e.post_id.clone(), e.label)).collect();
        let over = random_oversample(&train_set, seed).map_err(|e| e.to_string())?;
        for (m, spec) in specs.iter().enumerate() {
            for (v, set) in [&train_set, &over].into_iter().enumerate() {
                let model = train(spec, set, seed).map_err(|e| e.to_string())?;
                let pred: Vec<(String, bool)> =
                    test_set.examples.iter().map(|e| (e.post_id.clone(), model.predict_tokens(&e.tokens).0)).collect();
                let r = evaluate(&pred, &gold).map_err(|e| e.to_string())?;
                sums[m][v].0 += r.hate().recall;
                sums[m][v].1 += r.macro_f1;
            }
        }
    }
    let k = seeds as f64;
    let mut recall_ok = true;
    let mut f1_gains = 0;
    let mut parts = Vec::new();
    for (spec, s) in specs.iter().zip(&sums) {
        let (r0, f0) = (s[0].0 / k, s[0].1 / k);
        let (r1, f1) = (s[1].0 / k, s[1].1 / k);
        recall_ok &= r1 >= r0;
        f1_gains += (f1 > f0) as usize;
        parts.push(format!("{} recall {r0:.3}->{r1:.3} F1 {f0:.3}->{f1:.3}", spec.model_type()));
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        recall_ok && f1_gains >= 2 && secs < 300.0,
        format!("{}; F1 improved for {f1_gains}/3; {secs:.0}s", parts.join("; ")),
    )
}

fn rows(src: &str) -> impl Iterator<Item = (&str, &str)> {
    src.lines().filter(|l| !l.starts_with('#') && !l.is_empty()).map(|l| l.split_once('\t').expect("two columns"))
}

fn zawgyi_golden() -> Outcome {
    let mut pairs = 0;
    let mut exact = 0;
    for (zg, uni) in rows(GOLDEN) {
        pairs += 1;
        exact += (zawgyi_to_unicode(zg) == uni) as usize;
    }
    let mut total = 0;
    let mut correct = 0;
    for (label, text) in rows(DETECT) {
        let want = match label {
            "zawgyi" => EncodingLabel::Zawgyi,
            "unicode" => EncodingLabel::Unicode,
            _ => EncodingLabel::Neutral,
        };
        total += 1;
        correct += (detect_encoding(text).label == want) as usize;
    }
    let acc = correct as f64 / total as f64;
    check(
        pairs >= 50 && exact == pairs && total >= 100 && acc >= 0.95,
        format!("{exact}/{pairs} golden pairs exact; detector {correct}/{total} = {acc:.3}"),
    )
}

fn pipeline_invariants() -> Outcome {
    let mut cfg = SynthConfig::new(10_000, 17);
    cfg.noise = true;
    let corpus = generate(&cfg);
    let res = CleanResources::with_matcher(build_matcher(&corpus.lexicon()));
    let pcfg = PipelineConfig::with_seed(17);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut stores = Vec::new();
    let mut reports = Vec::new();
    let mut last = None;
    for run in 0..2 {
        let (clean, report) = clean_pipeline(corpus.posts.clone(), &pcfg, &res).map_err(|e| e.to_string())?;
        let path = dir.path().join(format!("run{run}.jsonl"));
        write_jsonl(&path, &clean).map_err(|e| e.to_string())?;
        stores.push(std::fs::read(&path).map_err(|e| e.to_string())?);
        reports.push(serde_json::to_vec(&report).map_err(|e| e.to_string())?);
        last = Some((clean, report));
    }
    let (clean, report) = last.expect("ran");
    let identical = stores[0] == stores[1] && reports[0] == reports[1];
    let monotone = report.steps.iter().all(|s| s.output_count <= s.input_count)
        && report.steps.windows(2).all(|w| w[0].output_count == w[1].input_count);
    let mut by_source: BTreeMap<&str, usize> = BTreeMap::new();
    for p in &clean {
        *by_source.entry(p.source_id.as_str()).or_default() += 1;
    }
    let feasible = by_source.values().max().copied().unwrap_or(0) <= clean.len().div_ceil(2);
    let adjacent = clean.windows(2).filter(|w| w[0].source_id == w[1].source_id).count();
    check(
        identical && monotone && feasible && adjacent == 0 && report.shuffle_adjacencies == 0,
        format!(
            "{} rows -> {} posts; identical runs {identical}; monotone {monotone}; adjacencies {adjacent}",
            corpus.posts.len(),
            clean.len()
        ),
    )
}

fn cv_hygiene() -> Outcome {
    let (corpus, clean) = clean_synth(2000, 5, false);
    let mut data = corpus.dataset(&clean);
    for e in &mut data.examples {
        e.tokens.push(format!("sentinel{}", e.post_id));
    }
    let label: BTreeMap<&str, bool> = data.examples.iter().map(|e| (e.post_id.as_str(), e.label)).collect();
    let spec = ModelSpec::Svm { features: FeatureConfig::word(1, 2, 1), hyper: SvmHyper::default() };
    let k = 5;
    let (report, folds) = cross_validate_with_models(&data, &spec, k, 5, true).map_err(|e| e.to_string())?;
    let mut leaks = 0;
    let mut tested: BTreeMap<&str, usize> = BTreeMap::new();
    let mut per_fold = Vec::new();
    for f in &folds {
        let FeatureSpec::Vocab(v) = &f.artifact.feature_config else { return Err("no vocab".into()) };
        let mut yes = 0;
        for id in &f.test_ids {
            leaks += v.index_of(&format!("sentinel{id}")).is_some() as usize;
            *tested.entry(id.as_str()).or_default() += 1;
            yes += label[id.as_str()] as usize;
        }
        per_fold.push((yes, f.test_ids.len() - yes));
    }
    let once = tested.len() == data.len() && tested.values().all(|&c| c == 1) && report.confusion.total() == data.len();
    let spread = |xs: Vec<usize>| xs.iter().max().unwrap() - xs.iter().min().unwrap();
    let stratified = spread(per_fold.iter().map(|p| p.0).collect()) <= 1 && spread(per_fold.iter().map(|p| p.1).collect()) <= 1;
    check(
        leaks == 0 && once && stratified,
        format!("{leaks} sentinel leaks; each of {} tested once: {once}; fold (yes, no) {per_fold:?}", data.len()),
    )
}

fn metric_oracle() -> Outcome {
    let ids = |v: &[bool]| -> Vec<(String, bool)> { v.iter().enumerate().map(|(i, &l)| (format!("m{i}"), l)).collect() };
    let fixed = evaluate(&ids(&[true, false, false, false]), &ids(&[true, true, false, false])).map_err(|e| e.to_string())?;
    let fixed_ok = (fixed.macro_f1 - 11.0 / 15.0).abs() < 1e-9;
    let div = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut mismatches = 0;
    for _ in 0..100 {
        let n = rng.gen_range(1..25);
        let gold: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.3)).collect();
        let pred: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
        let r = evaluate(&ids(&pred), &ids(&gold)).map_err(|e| e.to_string())?;
        let mut f1s = Vec::new();
        for (c, class) in [true, false].into_iter().enumerate() {
            let hit = (0..n).filter(|&i| pred[i] == class && gold[i] == class).count();
            let p = div(hit, pred.iter().filter(|&&x| x == class).count());
            let rc = div(hit, gold.iter().filter(|&&x| x == class).count());
            let f = if p + rc == 0.0 { 0.0 } else { 2.0 * p * rc / (p + rc) };
            let m = &r.classes[c];
            if (m.precision - p).abs() > 1e-12 || (m.recall - rc).abs() > 1e-12 || (m.f1 - f).abs() > 1e-12 {
                mismatches += 1;
            }
            f1s.push(f);
        }
        if (r.macro_f1 - (f1s[0] + f1s[1]) / 2.0).abs() > 1e-12 {
            mismatches += 1;
        }
    }
    check(fixed_ok && mismatches == 0, format!("fixture macro-F1 {:.10}; {mismatches} mismatches in 100 random sets", fixed.macro_f1))
}

fn model_round_trip() -> Outcome {
    let (corpus, clean) = clean_synth(1500, 8, false);
    let data: Dataset = corpus.dataset(&clean);
    let (_, probe) = clean_synth(700, 9, false);
    let probe = &probe[..500.min(probe.len())];
    if probe.len() < 500 {
        return Err(format!("fixture has only {} items", probe.len()));
    }
    let specs = [
        ModelSpec::Svm { features: FeatureConfig::word(1, 2, 1), hyper: SvmHyper::default() },
        ModelSpec::Brf { features: FeatureConfig::word(1, 2, 1), hyper: BrfHyper { n_trees: 30, ..BrfHyper::default() } },
        ModelSpec::Fasttext { hyper: FastTextHyper { epochs: 5, buckets: 100_000, ..FastTextHyper::default() } },
    ];
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut parts = Vec::new();
    let mut ok = true;
    for spec in &specs {
        let m = train(spec, &data, 8).map_err(|e| e.to_string())?;
        let path = dir.path().join(format!("{}.json", spec.model_type()));
        m.save(&path).map_err(|e| e.to_string())?;
        let back = ModelArtifact::load(&path).map_err(|e| e.to_string())?;
        let same = probe
            .iter()
            .filter(|p| {
                let (a, b) = (m.predict_tokens(&p.tokens), back.predict_tokens(&p.tokens));
                a.0 == b.0 && a.1.to_bits() == b.1.to_bits()
            })
            .count();
        ok &= same == probe.len() && back.to_json() == m.to_json();
        parts.push(format!("{} {same}/{}", spec.model_type(), probe.len()));
    }
    check(ok, parts.join(", "))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("kappa pathology", kappa_pathology),
        ("lexicon arithmetic", lexicon_arithmetic),
        ("assignment arithmetic", assignment_arithmetic),
        ("oversampling direction", oversampling_direction),
        ("zawgyi golden file", zawgyi_golden),
        ("pipeline invariants", pipeline_invariants),
        ("cv hygiene", cv_hygiene),
        ("metric oracle", metric_oracle),
        ("model round-trip", model_round_trip),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
