//! Holdout comparison of training with and without minority oversampling on
//! the synthetic corpus.
//!
//! cargo run --release --example oversampling -- [seeds] [posts] [svm,brf,fasttext]

use std::time::Instant;

use hatelab_core::corpus::{clean_pipeline, CleanResources, PipelineConfig};
use hatelab_core::lexicon::build_matcher;
use hatelab_core::models::{
    evaluate, random_oversample, stratified_folds, train, ModelSpec, ModelType,
};
use hatelab_core::synth::{generate, SynthConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let seeds: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let n: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(10_000);
    let models: Vec<ModelType> = args
        .get(3)
        .map_or("svm,brf,fasttext", String::as_str)
        .split(',')
        .map(|m| m.parse().expect("model type"))
        .collect();
    for mt in models {
        let spec = ModelSpec::default_for(mt);
        let (mut r0, mut r1, mut f0, mut f1) = (0.0, 0.0, 0.0, 0.0);
        let t = Instant::now();
        for seed in 0..seeds {
            let corpus = generate(&SynthConfig::new(n, seed));
            let res = CleanResources::with_matcher(build_matcher(&corpus.lexicon()));
            let (clean, _) = clean_pipeline(corpus.posts.clone(), &PipelineConfig::with_seed(seed), &res).unwrap();
            let data = corpus.dataset(&clean);
            let labels: Vec<bool> = data.examples.iter().map(|e| e.label).collect();
            let folds = stratified_folds(&labels, 5, seed).unwrap();
            let tr: Vec<usize> = (0..data.len()).filter(|&i| folds[i] != 0).collect();
            let te: Vec<usize> = (0..data.len()).filter(|&i| folds[i] == 0).collect();
            let train_set = data.subset(&tr);
            let test_set = data.subset(&te);
            let gold: Vec<(String, bool)> = test_set.examples.iter().map(|e| (e.post_id.clone(), e.label)).collect();
            for over in [false, true] {
                let set = if over { random_oversample(&train_set, seed).unwrap() } else { train_set.clone() };
                let m = train(&spec, &set, seed).unwrap();
                let pred: Vec<(String, bool)> =
                    test_set.examples.iter().map(|e| (e.post_id.clone(), m.predict_tokens(&e.tokens).0)).collect();
                let rep = evaluate(&pred, &gold).unwrap();
                println!("{mt} seed {seed} over {over}: recall {:.3} macro-F1 {:.3}", rep.hate().recall, rep.macro_f1);
                if over {
                    r1 += rep.hate().recall;
                    f1 += rep.macro_f1;
                } else {
                    r0 += rep.hate().recall;
                    f0 += rep.macro_f1;
                }
            }
        }
        let k = seeds as f64;
        println!(
            "{mt}: recall {:.3} -> {:.3}, macro-F1 {:.3} -> {:.3} ({:.1}s)",
            r0 / k,
            r1 / k,
            f0 / k,
            f1 / k,
            t.elapsed().as_secs_f64()
        );
    }
}
