use std::collections::BTreeSet;

use num_rational::Ratio;
use proptest::prelude::*;
use textlab_core::corpus::{DocId, Document};
use textlab_core::textclf::{
    predict_nb, run_pipeline, score_counts, score_term, train_logreg_traced, train_nb, update_nb,
    ConfusionMatrix, LogRegParams, NaiveBayesModel, PipelineParams, SearchTerm,
};

fn categories(k: usize) -> Vec<String> {
    (0..k).map(|c| format!("c{c}")).collect()
}

/// Documents over a vocabulary `w0..w{v-1}`, labeled with one of `k` categories.
fn docs_strategy(max_docs: usize, k: usize, v: usize) -> impl Strategy<Value = Vec<Document>> {
    prop::collection::vec((prop::collection::vec(0..v, 0..8), 0..k), 1..=max_docs).prop_map(|rows| {
        rows.into_iter()
            .enumerate()
            .map(|(i, (words, c))| {
                let text: Vec<String> = words.iter().map(|w| format!("w{w}")).collect();
                Document::new(DocId(i as u64), text.join(" "), format!("c{c}"))
            })
            .collect()
    })
}

fn tokens(words: &[usize]) -> Vec<String> {
    words.iter().map(|w| format!("w{w}")).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fold_of_updates_equals_batch(docs in docs_strategy(200, 3, 15)) {
        let cats = categories(3);
        let batch = train_nb(&docs, &cats, None, 1.0).unwrap();
        let mut folded = NaiveBayesModel::empty(&cats, 1.0, None).unwrap();
        for doc in &docs {
            folded = update_nb(&folded, &doc.tokens, &doc.category).unwrap();
        }
        prop_assert_eq!(folded, batch);
    }

    #[test]
    fn posterior_is_a_distribution(docs in docs_strategy(20, 3, 15), query in prop::collection::vec(0usize..20, 0..12)) {
        let model = train_nb(&docs, &categories(3), None, 1.0).unwrap();
        let p = predict_nb(&model, &tokens(&query)).probabilities;
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(p.iter().all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn training_order_does_not_matter(
        docs in docs_strategy(40, 2, 10),
        perm_seed in any::<u64>(),
        query in prop::collection::vec(0usize..10, 1..8),
    ) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let cats = categories(2);
        let mut shuffled = docs.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(perm_seed));
        let a = train_nb(&docs, &cats, None, 1.0).unwrap();
        let b = train_nb(&shuffled, &cats, None, 1.0).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(predict_nb(&a, &tokens(&query)), predict_nb(&b, &tokens(&query)));

        let terms = vec![SearchTerm::new("w1*", "r").unwrap(), SearchTerm::new("w3", "r").unwrap()];
        let test: Vec<&Document> = docs.iter().take(10).collect();
        let params = PipelineParams::default();
        let r1 = run_pipeline(&docs.iter().collect::<Vec<_>>(), &test, &cats, &terms, &params);
        let r2 = run_pipeline(&shuffled.iter().collect::<Vec<_>>(), &test, &cats, &terms, &params);
        prop_assert_eq!(r1, r2);
    }

    /// With equal token totals per category, `P(w|c)` is increasing in the
    /// count of `w` in `c` for every `α`, so the likeliest category of a word
    /// does not depend on `α`.
    #[test]
    fn word_category_is_alpha_invariant_for_balanced_totals(
        counts in prop::collection::vec(prop::collection::vec(0u64..6, 3), 1..6),
        scale in 0.01f64..100.0,
    ) {
        let cats = categories(3);
        let mut model = NaiveBayesModel::empty(&cats, 1.0, None).unwrap();
        let mut scaled = NaiveBayesModel::empty(&cats, scale, None).unwrap();
        for (w, row) in counts.iter().enumerate() {
            for (c, &n) in row.iter().enumerate() {
                let toks = vec![format!("w{w}"); n as usize];
                model.observe(&toks, &cats[c]).unwrap();
                scaled.observe(&toks, &cats[c]).unwrap();
            }
        }
        // Pad with a filler word so every category has the same token total.
        let totals = model.category_token_totals().to_vec();
        let max = *totals.iter().max().unwrap();
        for (c, total) in totals.iter().enumerate() {
            let pad = vec!["filler".to_string(); (max - total) as usize];
            model.observe(&pad, &cats[c]).unwrap();
            scaled.observe(&pad, &cats[c]).unwrap();
        }
        for (w, row) in counts.iter().enumerate() {
            let best = row.iter().max().unwrap();
            if row.iter().filter(|n| *n == best).count() > 1 {
                continue;
            }
            let word = format!("w{w}");
            prop_assert_eq!(model.likeliest_category(&word), scaled.likeliest_category(&word));
        }
    }

    #[test]
    fn score_is_monotone(k in 2usize..6, targeted in 0u64..200, a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(score_term(lo, targeted, k) <= score_term(hi, targeted, k));
        if hi > 1.0 / k as f64 {
            prop_assert!(score_term(hi, targeted, k) <= score_term(hi, targeted + 1, k));
        }
    }

    #[test]
    fn exact_score_matches_rational_rounding(k in 2usize..6, targeted in 1u64..500, frac in 0.0f64..=1.0) {
        let correct = (frac * targeted as f64).floor() as u64;
        // targeted * max(0, c/t - 1/k) / (1 - 1/k) = max(0, k c - t) / (k - 1), rounded half up.
        let kk = k as i64;
        let raw = Ratio::new((kk * correct as i64 - targeted as i64).max(0), kk - 1);
        let oracle = (raw + Ratio::new(1, 2)).floor().to_integer() as u64;
        prop_assert_eq!(score_counts(correct, targeted, k), oracle);
        let float = score_term(correct as f64 / targeted as f64, targeted, k);
        prop_assert!(float.abs_diff(oracle) <= 1);
    }

    #[test]
    fn confusion_totals(pairs in prop::collection::vec((0usize..4, 0usize..4), 0..100)) {
        let mut m = ConfusionMatrix::new(categories(4));
        for &(g, p) in &pairs {
            m.record(g, p);
        }
        prop_assert_eq!(m.total(), pairs.len() as u64);
        let hits = pairs.iter().filter(|(g, p)| g == p).count() as u64;
        if pairs.is_empty() {
            prop_assert_eq!(m.accuracy(), None);
        } else {
            prop_assert_eq!(m.accuracy(), Some(Ratio::new(hits, pairs.len() as u64)));
        }
    }
}

/// The likeliest category of a word can change with `α` once category
/// totals differ: `c0` has the word once in 20 tokens, `c1` has a single
/// other token, and the vocabulary has 5 words.
#[test]
fn word_category_can_depend_on_alpha_for_unbalanced_totals() {
    let cats = categories(2);
    let build = |alpha: f64| {
        let mut m = NaiveBayesModel::empty(&cats, alpha, None).unwrap();
        let mut c0 = vec!["target".to_string()];
        c0.extend(["a", "b", "c"].iter().cycle().take(19).map(|s| s.to_string()));
        m.observe(&c0, "c0").unwrap();
        m.observe(&["d".to_string()], "c1").unwrap();
        m
    };
    assert_eq!(build(1.0).vocabulary_size(), 5);
    assert_eq!(build(1.0).likeliest_category("target"), 1);
    assert_eq!(build(0.01).likeliest_category("target"), 0);
}

#[test]
fn empty_model_predicts_uniform() {
    let model = NaiveBayesModel::empty(&categories(4), 1.0, None).unwrap();
    let p = predict_nb(&model, &tokens(&[1, 2])).probabilities;
    assert_eq!(p, vec![0.25; 4]);
}

#[test]
fn logreg_loss_never_increases_on_separable_data() {
    let mut docs = Vec::new();
    for i in 0..10 {
        docs.push(Document::new(DocId(i), format!("good great w{i}"), "pos"));
        docs.push(Document::new(DocId(100 + i), format!("bad awful w{i}"), "neg"));
    }
    let cats = vec!["neg".to_string(), "pos".to_string()];
    let features: BTreeSet<String> = ["good", "great", "bad", "awful"].iter().map(|s| s.to_string()).collect();
    let (model, trace) = train_logreg_traced(&docs, &cats, &features, LogRegParams::default()).unwrap();
    assert_eq!(trace.len(), 501);
    assert!(trace.windows(2).all(|w| w[1] <= w[0]));
    let p = textlab_core::textclf::predict_logreg(&model, &["good".to_string()]);
    assert_eq!(p.best(), "pos");
}

#[test]
fn zero_epochs_give_uniform_predictions() {
    let docs = vec![
        Document::new(DocId(0), "good", "pos"),
        Document::new(DocId(1), "bad", "neg"),
    ];
    let cats = vec!["neg".to_string(), "pos".to_string()];
    let features: BTreeSet<String> = ["good", "bad"].iter().map(|s| s.to_string()).collect();
    let params = LogRegParams { epochs: 0, ..LogRegParams::default() };
    let (model, _) = train_logreg_traced(&docs, &cats, &features, params).unwrap();
    let p = textlab_core::textclf::predict_logreg(&model, &["good".to_string()]);
    assert_eq!(p.probabilities, vec![0.5, 0.5]);
}
