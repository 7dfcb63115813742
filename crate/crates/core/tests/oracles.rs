mod common;

use common::*;
use phee_core::filtering::{augment_filter, train_filter, ScoreRecord, ScoreSplit, ScoreStats, VarianceConvention};
use phee_core::metrics::{em_f1, f_test_variance, token_f1, EvalOptions, Tail};
use phee_core::retrieval::{tree_kernel_similarity, Bm25Index, Bm25Params, DEFAULT_MAX_PATH};
use phee_core::schema::{linearize, parse_linearized, ArgumentKind};
use phee_core::text::tokenize;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn metrics_equal_brute_force_on_random_corpora() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let (gold, pred) = random_corpus_pair(&mut rng);
        let em = em_f1(&pred, &gold, EvalOptions::default()).unwrap();
        let tok = token_f1(&pred, &gold, EvalOptions::default()).unwrap();
        let (be, bt) = (brute_em(&pred, &gold), brute_token(&pred, &gold));
        for (rep, brute) in [(&em, &be), (&tok, &bt)] {
            assert!((rep.main.f1 - brute_f1(brute, "main")).abs() < 1e-12);
            assert!((rep.sub.f1 - brute_f1(brute, "sub")).abs() < 1e-12);
            assert!((rep.overall.f1 - brute_f1(brute, "overall")).abs() < 1e-12);
            for kind in ArgumentKind::ALL {
                assert!((rep.kind(kind).f1 - brute_f1(brute, kind.name())).abs() < 1e-12, "{kind}");
            }
        }
    }
}

#[test]
fn metrics_are_symmetric_under_swap() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let (gold, pred) = random_corpus_pair(&mut rng);
        for f in [em_f1, token_f1] {
            let a = f(&pred, &gold, EvalOptions::default()).unwrap().overall;
            let b = f(&gold, &pred, EvalOptions::default()).unwrap().overall;
            assert_eq!((a.precision, a.recall), (b.recall, b.precision));
            assert!((a.f1 - b.f1).abs() < 1e-15);
        }
    }
}

#[test]
fn linearization_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..1000 {
        let events = random_linearizable(&mut rng);
        assert_eq!(parse_linearized(&linearize(&events, true)).unwrap(), events);
    }
}

#[test]
fn bm25_equals_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let params = Bm25Params::default();
    for _ in 0..100 {
        let (docs, query) = random_bm25_corpus(&mut rng);
        let index = Bm25Index::build(docs.iter().map(|(i, t)| (i.clone(), t.as_str())), params).unwrap();
        for (id, _) in &docs {
            let got = index.score(&tokenize(&query), id).unwrap();
            let want = brute_bm25(&docs, &query, id, params.k1, params.b);
            assert!((got - want).abs() < 1e-9, "{id}: {got} vs {want}");
        }
    }
}

#[test]
fn bm25_two_document_example() {
    let docs = vec![("d1".to_string(), "drug rash".to_string()), ("d2".to_string(), "drug".to_string())];
    let index = Bm25Index::build(docs.iter().map(|(i, t)| (i.clone(), t.as_str())), Bm25Params::default()).unwrap();
    // N=2, df(rash)=1, |d1|=2, avg=1.5, tf=1
    let idf = (1.5f64 / 1.5 + 1.0).ln();
    let hand = idf * 2.2 / (1.0 + 1.2 * (0.25 + 0.75 * 2.0 / 1.5));
    let q = vec!["rash".to_string()];
    assert!((index.score(&q, "d1").unwrap() - hand).abs() < 1e-12);
    assert_eq!(index.score(&q, "d2").unwrap(), 0.0);
}

#[test]
fn tree_kernel_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..200 {
        let a = random_tree(&mut rng, &format!("a{i}"));
        let b = random_tree(&mut rng, &format!("b{i}"));
        let ab = tree_kernel_similarity(&a, &b, DEFAULT_MAX_PATH);
        assert_eq!(ab, tree_kernel_similarity(&b, &a, DEFAULT_MAX_PATH));
        assert!((0.0..=1.0).contains(&ab));
        assert_eq!(tree_kernel_similarity(&a, &a, DEFAULT_MAX_PATH), 1.0);
    }
}

#[test]
fn filters_equal_set_builder_on_random_tables() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..1000 {
        let n = rng.random_range(1..30);
        let recs: Vec<ScoreRecord> = (0..n)
            .map(|i| {
                let g = if rng.random_bool(0.3) { rng.random_range(0..=4) as f64 / 4.0 } else { rng.random::<f64>() };
                ScoreRecord::new(format!("r{i}"), g, Some(rng.random::<f64>()), ScoreSplit::Train)
            })
            .collect();
        let m = recs.iter().map(|r| r.s_gold).sum::<f64>() / n as f64;
        let want: std::collections::BTreeSet<String> =
            recs.iter().filter(|r| r.s_gold >= m).map(|r| r.id.clone()).collect();
        assert_eq!(train_filter(&recs).unwrap(), want);

        let st = ScoreStats {
            gold_mean: rng.random(),
            gold_std: rng.random_range(0.01..0.5),
            pred_mean: rng.random(),
            pred_std: rng.random_range(0.01..0.5),
            n: 50,
            variance_convention: VarianceConvention::Population,
        };
        let want: std::collections::BTreeSet<String> = recs
            .iter()
            .filter(|r| {
                let zg = (r.s_gold - st.gold_mean) / st.gold_std;
                let zp = (r.s_pred.unwrap() - st.pred_mean) / st.pred_std;
                zg >= 0.0 && zg >= zp
            })
            .map(|r| r.id.clone())
            .collect();
        assert_eq!(augment_filter(&recs, &st, Default::default()).unwrap(), want);
    }
}

#[test]
fn f_test_matches_numeric_integration() {
    let a = [1.0, 2.0, 3.0, 4.0, 5.0];
    let b = [2.0, 4.0, 6.0, 8.0, 10.0];
    let got = f_test_variance(&a, &b, Tail::TwoSided).unwrap();
    let (f, p) = f_test_oracle(&a, &b);
    assert!((got.f - f).abs() < 1e-12);
    assert!((got.p - p).abs() < 1e-6, "{} vs {p}", got.p);
    assert_eq!(f_test_variance(&a, &a, Tail::TwoSided).unwrap().p, 1.0);

    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..20 {
        let xs: Vec<f64> = (0..rng.random_range(3..8)).map(|_| rng.random::<f64>()).collect();
        let ys: Vec<f64> = (0..rng.random_range(3..8)).map(|_| rng.random::<f64>()).collect();
        let got = f_test_variance(&xs, &ys, Tail::TwoSided).unwrap();
        let (f, p) = f_test_oracle(&xs, &ys);
        assert!((got.f - f).abs() < 1e-9);
        assert!((got.p - p).abs() < 1e-6, "{} vs {p}", got.p);
    }
}

#[test]
fn upper_tail_reproduces_reported_fold_p_values() {
    // Five runs with a prescribed sample standard deviation.
    let with_std = |s: f64| -> Vec<f64> { [-2.0, -1.0, 0.0, 1.0, 2.0].iter().map(|x| 50.0 + x * s / 2.5f64.sqrt()).collect() };
    let em = f_test_variance(&with_std(1.46), &with_std(1.09), Tail::Upper).unwrap();
    let tok = f_test_variance(&with_std(1.27), &with_std(1.09), Tail::Upper).unwrap();
    assert!((em.p - 0.29).abs() < 0.005, "{}", em.p);
    assert!((tok.p - 0.39).abs() < 0.005, "{}", tok.p);
    let cdf = f_cdf_oracle(em.f, 4.0, 4.0);
    assert!((em.p - (1.0 - cdf)).abs() < 1e-6);
}
