use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use credence::corpus::{load_corpus, LabelPartition, Post, StatementInstance};
use credence::evaluation::{cohen_kappa, ndcg, run_experiment, Algorithm, ExperimentConfig, METRICS};
use credence::features::{build_clique_vectors, moments, FeatureExtractor, Standardizer};
use credence::graph::{build_graph, partition};
use credence::inference::{conditional_from_potentials, gibbs_conditional, TrustScores};
use credence::matrix::FeatureMatrix;
use credence::par::Parallelism;
use credence::synth::{generate, SynthConfig};

fn inst(s: &str, p: &str, u: &str) -> StatementInstance {
    StatementInstance {
        statement_id: s.into(),
        post_id: p.into(),
        user_id: u.into(),
    }
}

fn is_non_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[0] >= w[1])
}

proptest! {
    #[test]
    fn ndcg_bounded_and_maximal_when_sorted(rel in prop::collection::vec(0u8..4, 1..12)) {
        let rel: Vec<f64> = rel.into_iter().map(f64::from).collect();
        let v = ndcg(&rel);
        prop_assert!(v <= 1.0 + 1e-12);
        let mut sorted = rel.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        if rel.iter().any(|&r| r > 0.0) {
            prop_assert!((ndcg(&sorted) - 1.0).abs() < 1e-12);
        }
        // Positions 1 and 2 share the discount 1, so their order is free.
        if (v - 1.0).abs() < 1e-12 && rel.len() >= 2 {
            let mut swapped = rel.clone();
            if swapped[0] < swapped[1] {
                swapped.swap(0, 1);
            }
            prop_assert!(is_non_increasing(&swapped));
        }
    }

    #[test]
    fn kappa_symmetric_and_self_agreement(pairs in prop::collection::vec(any::<(bool, bool)>(), 2..40)) {
        let (a, b): (Vec<bool>, Vec<bool>) = pairs.into_iter().unzip();
        prop_assert_eq!(cohen_kappa(&a, &b).unwrap(), cohen_kappa(&b, &a).unwrap());
        if a.iter().any(|&x| x) && a.iter().any(|&x| !x) {
            prop_assert_eq!(cohen_kappa(&a, &a).unwrap(), Some(1.0));
        }
    }

    #[test]
    fn scaling_potentials_leaves_conditional_unchanged(
        pairs in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..10),
        log_c in -20.0f64..20.0,
    ) {
        let base = conditional_from_potentials(pairs.iter().copied());
        let scaled = conditional_from_potentials(pairs.iter().map(|(a, b)| (a + log_c, b + log_c)));
        prop_assert!((base - scaled).abs() < 1e-12);
    }

    #[test]
    fn higher_trust_raises_conditional(
        authors in prop::collection::vec(0usize..3, 1..6),
        t in prop::collection::vec(0.05f64..0.9, 3),
        bump in 0.01f64..0.09,
    ) {
        let insts: Vec<_> = authors.iter().enumerate().map(|(j, u)| inst("s", &format!("p{j}"), &format!("u{u}"))).collect();
        let g = build_graph(&insts, &FeatureMatrix::zeros(insts.len(), 1)).unwrap();
        let eta = vec![0.0; g.num_cliques()];
        let n = g.users().len();
        let low = TrustScores { scores: t[..n].to_vec(), positive: vec![0.0; n], total: vec![0.0; n] };
        let mut high = low.clone();
        high.scores.iter_mut().for_each(|s| *s += bump);
        let (pl, ph) = (gibbs_conditional(&g, &eta, Some(&low), 0), gibbs_conditional(&g, &eta, Some(&high), 0));
        prop_assert!(ph > pl, "{ph} <= {pl}");
    }

    #[test]
    fn cliques_partition_into_statement_and_user_lists(
        triples in prop::collection::vec((0u8..5, 0u8..8, 0u8..4), 1..30),
        rotate in 0usize..30,
    ) {
        let mut insts: Vec<_> = triples.iter().map(|(s, p, u)| inst(&format!("s{s}"), &format!("p{p}-{u}"), &format!("u{u}"))).collect();
        let g = build_graph(&insts, &FeatureMatrix::zeros(insts.len(), 1)).unwrap();
        let distinct: BTreeSet<_> = insts.iter().cloned().collect();
        prop_assert_eq!(g.num_cliques(), distinct.len());
        let mut by_s = vec![0; g.num_cliques()];
        let mut by_u = vec![0; g.num_cliques()];
        for s in 0..g.statements().len() {
            g.statement_cliques(s).iter().for_each(|&c| by_s[c] += 1);
        }
        for u in 0..g.users().len() {
            g.user_cliques(u).iter().for_each(|&c| by_u[c] += 1);
        }
        prop_assert!(by_s.iter().chain(&by_u).all(|&k| k == 1));
        let k = rotate % insts.len();
        insts.rotate_left(k);
        let g2 = build_graph(&insts, &FeatureMatrix::zeros(insts.len(), 1)).unwrap();
        prop_assert_eq!(g, g2);
    }

    #[test]
    fn standardized_columns_have_zero_mean(rows in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 3), 2..20)) {
        let m = FeatureMatrix::from_rows(3, &rows);
        let z = Standardizer::fit(&m).unwrap().transform(&m);
        for j in 0..3 {
            let mean = z.iter_rows().map(|r| r[j]).sum::<f64>() / z.rows() as f64;
            prop_assert!(mean.abs() < 1e-9);
        }
    }

    #[test]
    fn symmetric_lengths_have_zero_skew(half in prop::collection::vec(0.0f64..50.0, 1..10), center in 0.0f64..100.0) {
        let mut xs: Vec<f64> = half.iter().map(|d| center + d).collect();
        xs.extend(half.iter().map(|d| center - d));
        prop_assert!(moments(&xs).skewness.abs() < 1e-9);
        prop_assert_eq!(moments(&[center]).variance, 0.0);
    }

    #[test]
    fn user_language_is_pooled_ratio(
        posts in prop::collection::vec(prop::collection::vec(
            prop::sample::select(vec!["can", "will", "if", "not", "the", "i", "you", "it", "why", "sad", "anxious", "love", "filler", "text"]), 0..15), 1..6),
    ) {
        let ex = FeatureExtractor::default();
        let posts: Vec<Post> = posts.iter().enumerate().map(|(i, w)| Post::new(format!("p{i}"), "u", w.join(" "))).collect();
        let (sty, aff) = ex.aggregate_user_language(&posts);
        let counts: Vec<_> = posts.iter().map(|p| ex.post_counts(&p.text)).collect();
        let len: usize = counts.iter().map(|c| c.length).sum();
        for (j, v) in sty.iter().enumerate() {
            let n: u32 = counts.iter().map(|c| c.stylistic[j]).sum();
            let expect = if len == 0 { 0.0 } else { f64::from(n) / len as f64 };
            prop_assert!((v - expect).abs() < 1e-15 && (0.0..=1.0).contains(v));
        }
        for (j, v) in aff.iter().enumerate() {
            let n: u32 = counts.iter().map(|c| c.affective[j]).sum();
            let expect = if len == 0 { 0.0 } else { f64::from(n) / len as f64 };
            prop_assert!((v - expect).abs() < 1e-15);
        }
    }
}

fn small_world(seed: u64) -> credence::synth::SynthWorld {
    generate(&SynthConfig {
        seed,
        users: 40,
        statements: 60,
        ..SynthConfig::default()
    })
    .unwrap()
}

#[test]
fn corpus_round_trip_is_identity() {
    let w = small_world(1);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    w.write(a.path()).unwrap();
    let load = |d: &std::path::Path| load_corpus(&d.join("users.jsonl"), &d.join("posts.jsonl"), &d.join("labels.tsv")).unwrap().0;
    let first = load(a.path());
    first.write(b.path()).unwrap();
    assert_eq!(first, load(b.path()));
}

#[test]
fn planted_agreement_rates_within_binomial_bounds() {
    let c = SynthConfig {
        seed: 5,
        users: 200,
        statements: 300,
        posts_min: 40,
        posts_max: 60,
        ..SynthConfig::default()
    };
    let w = generate(&c).unwrap();
    let mut tally: BTreeMap<bool, (f64, f64)> = BTreeMap::new();
    for i in &w.instances {
        let trusted = w.planted_trust[&i.user_id] == c.t_high;
        let e = tally.entry(trusted).or_default();
        e.0 += f64::from(u8::from(w.ground_truth[&i.statement_id]));
        e.1 += 1.0;
    }
    for (trusted, (hits, n)) in tally {
        let p = if trusted { c.t_high } else { c.t_low };
        let sigma = (p * (1.0 - p) / n).sqrt();
        let rate = hits / n;
        assert!((rate - p).abs() <= 3.0 * sigma, "trusted={trusted}: rate {rate} vs {p} ± {}", 3.0 * sigma);
    }
}

#[test]
fn experiment_means_are_means_of_repeats() {
    let w = small_world(2);
    let par = Parallelism::SEQUENTIAL;
    let ex = FeatureExtractor::new(Default::default(), Default::default(), Some(w.catalog.clone()));
    let g = build_graph(&w.instances, &build_clique_vectors(&w.corpus, &w.instances, &ex, par)).unwrap();
    let config = ExperimentConfig {
        algorithms: vec![Algorithm::Freq, Algorithm::Svm, Algorithm::SvmDs],
        repeats: 4,
        seed: 9,
        ..ExperimentConfig::default()
    };
    let labels = &w.corpus.labels().labeled;
    let r = run_experiment(&g, labels, &BTreeSet::new(), &config, par).unwrap();
    assert_eq!(r.repeats.len(), 4);
    for row in &r.rows {
        let xs: Vec<f64> = r.repeats.iter().filter_map(|m| m.get(&(row.algorithm, row.metric)).copied()).collect();
        assert_eq!(xs.len(), row.n);
        assert!((row.mean - xs.iter().sum::<f64>() / xs.len() as f64).abs() < 1e-12);
    }
    let single = run_experiment(&g, labels, &BTreeSet::new(), &ExperimentConfig { repeats: 1, ..config }, par).unwrap();
    assert_eq!(single.repeats[0], r.repeats[0]);
    assert!(METRICS.contains(&r.rows[0].metric));
}

#[test]
fn distant_supervision_has_one_example_per_clique() {
    let w = small_world(3);
    let par = Parallelism::SEQUENTIAL;
    let ex = FeatureExtractor::new(Default::default(), Default::default(), Some(w.catalog.clone()));
    let g = build_graph(&w.instances, &build_clique_vectors(&w.corpus, &w.instances, &ex, par)).unwrap();
    let p = partition(&g, &LabelPartition::new(w.corpus.labels().labeled.clone()));
    let cfg = Default::default();
    let agg = credence::baselines::train_linear_aggregate(&g, &p, &cfg, par).unwrap();
    let ds = credence::baselines::train_linear_distant(&g, &p, &cfg, par).unwrap();
    let cliques: usize = p.labeled.iter().map(|&s| g.statement_cliques(s).len()).sum();
    assert_eq!(agg.examples, p.labeled.len());
    assert_eq!(ds.examples, cliques);
    assert!(ds.examples >= agg.examples);
}

#[test]
fn feature_extraction_is_worker_invariant() {
    let w = small_world(4);
    let ex = FeatureExtractor::new(Default::default(), Default::default(), Some(w.catalog.clone()));
    let one = build_clique_vectors(&w.corpus, &w.instances, &ex, Parallelism::new(1));
    let four = build_clique_vectors(&w.corpus, &w.instances, &ex, Parallelism::new(4));
    assert_eq!(one, four);
}
