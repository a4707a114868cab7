use hatelab_core::annotation::Decision;
use hatelab_core::corpus::{clean_pipeline, CleanResources, PipelineConfig};
use hatelab_core::lexicon::build_matcher;
use hatelab_core::models::{train, ModelSpec, ModelType};
use hatelab_core::review::{
    disagreement_report, infer_batch, sample_for_review, ErrorCategory, ReviewError, ReviewItem, Strategy as Pick,
};
use hatelab_core::synth::{generate, SynthConfig};
use proptest::prelude::*;

fn items() -> impl Strategy<Value = Vec<ReviewItem>> {
    prop::collection::vec((0u32..20, 0usize..3, any::<bool>()), 0..40).prop_map(|rows| {
        rows.into_iter()
            .enumerate()
            .map(|(i, (s, hits, expert))| {
                let score = s as f64 / 20.0;
                let mut it = ReviewItem {
                    post_id: format!("r{:03}", (i * 37) % 101),
                    model_label: if score > 0.5 { Decision::Yes } else { Decision::No },
                    model_score: score,
                    expert_label: None,
                    lexicon_hit_count: hits,
                    error_category: None,
                };
                it.expert_label = Some(if expert { Decision::Yes } else { Decision::No });
                it
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn categories_partition_items(items in items()) {
        let r = disagreement_report(&items).unwrap();
        prop_assert_eq!(r.counts.values().sum::<usize>(), items.len());
        prop_assert_eq!(r.counts.len(), 4);
        for it in &r.items {
            let want = ErrorCategory::of(it.model_label, it.expert_label.unwrap(), it.lexicon_hit_count);
            prop_assert_eq!(it.error_category, Some(want));
        }
    }

    #[test]
    fn uncertainty_order_is_total(items in items(), seed in any::<u64>()) {
        let n = items.len();
        let all = sample_for_review(&items, Pick::Uncertainty, n, seed).unwrap();
        for w in all.windows(2) {
            let (a, b) = ((w[0].model_score - 0.5).abs(), (w[1].model_score - 0.5).abs());
            prop_assert!(a < b || (a == b && w[0].post_id <= w[1].post_id));
        }
        let mut reversed = items.clone();
        reversed.reverse();
        prop_assert_eq!(sample_for_review(&reversed, Pick::Uncertainty, n, 0).unwrap(), all.clone());
        let k = n / 2;
        let r = sample_for_review(&items, Pick::Random, k, seed).unwrap();
        prop_assert_eq!(r.len(), k);
        prop_assert_eq!(sample_for_review(&items, Pick::Random, k, seed).unwrap(), r);
    }
}

#[test]
fn inference_over_a_cleaned_corpus() {
    let corpus = generate(&SynthConfig::new(800, 2));
    let res = CleanResources::with_matcher(build_matcher(&corpus.lexicon()));
    let (clean, _) = clean_pipeline(corpus.posts.clone(), &PipelineConfig::with_seed(2), &res).unwrap();
    let model = train(&ModelSpec::default_for(ModelType::Svm), &corpus.dataset(&clean), 2).unwrap();
    let out = infer_batch(&model, &clean).unwrap();
    assert_eq!(out.len(), clean.len());
    for (it, p) in out.iter().zip(&clean) {
        assert_eq!(it.post_id, p.post_id);
        assert!((0.0..=1.0).contains(&it.model_score));
        assert_eq!(it.model_label.is_yes(), it.model_score > 0.5);
        assert_eq!(it.lexicon_hit_count, p.lexicon_hits.len());
        assert!(it.expert_label.is_none() && it.error_category.is_none());
    }
    let top = sample_for_review(&out, Pick::TopPositive, 10, 0).unwrap();
    assert!(top.windows(2).all(|w| w[0].model_score >= w[1].model_score));
    assert!(matches!(
        sample_for_review(&out, Pick::Random, out.len() + 1, 0),
        Err(ReviewError::SampleTooLarge { .. })
    ));
}

#[test]
fn strategy_names() {
    assert_eq!("uncertainty".parse::<Pick>().unwrap(), Pick::Uncertainty);
    assert_eq!("top_positive".parse::<Pick>().unwrap(), Pick::TopPositive);
    assert!("loudest".parse::<Pick>().is_err());
}
