mod common;

use std::collections::BTreeMap;

use common::{random_store, small_spec, synth_corpus};
use drem::corpus::{Corpus, EntityRef, EntityType};
use drem::explain::{ExplainConfig, Explainer, TemplateSet};
use drem::model::ModelKind;
use drem::quality::{
    best_split, build_group_vector, build_pair_dataset, cross_validate, feature_exist_confidence,
    feature_existence_rate, fleiss_kappa, gbdt_predict, gbdt_train, group_layout, Aspect, AssociationIndex, Case,
    GbdtParams, GroupContext, Node, Preference, GROUP_VECTOR_LEN,
};
use rand::Rng;

fn ctx() -> GroupContext {
    GroupContext {
        model_mrr: 0.4,
        log_purchase_prob: -1.5,
    }
}

#[test]
fn iuf_counts_users() {
    // 100 users; brand b0 reached by exactly 9 of them.
    let mut triples = String::from("item\ti0\tbrand\tbrand\tb0\nitem\ti1\tbrand\tbrand\tb1\n");
    triples.push_str("item\ti2\tbrand\tbrand\tb1\n");
    let mut purchases = String::new();
    for u in 0..100 {
        let item = if u < 9 { "i0" } else { "i1" };
        purchases.push_str(&format!("u{u}\tq\t{item}\n"));
    }
    let corpus = Corpus::from_strs(&triples, &purchases, 1).unwrap();
    let assoc = AssociationIndex::build(&corpus);
    let b0 = EntityRef::new(EntityType::Brand, 0);
    assert!((assoc.iuf(b0) - 10f64.ln()).abs() < 1e-12);
    let b1 = EntityRef::new(EntityType::Brand, 1);
    assert!((assoc.iuf(b1) - (100.0f64 / 92.0).ln()).abs() < 1e-12);
    // b1 is linked to two items, b0 to one.
    assert!((assoc.iif(b1) - (3.0f64 / 3.0).ln()).abs() < 1e-12);
    assert!((assoc.iif(b0) - (3.0f64 / 2.0).ln()).abs() < 1e-12);
}

#[test]
fn pmi_counting_oracle() {
    let corpus = synth_corpus(&small_spec(), 8);
    let assoc = AssociationIndex::build(&corpus);
    // Recount associations by hand.
    let mut edges: Vec<(EntityRef, EntityRef)> = Vec::new();
    for p in corpus.train_purchases() {
        let u = EntityRef::new(EntityType::User, p.user);
        edges.push((u, EntityRef::new(EntityType::Item, p.item)));
        for t in corpus.triples() {
            if t.head == EntityRef::new(EntityType::Item, p.item) && matches!(t.tail.kind, EntityType::Brand | EntityType::Category) {
                edges.push((u, t.tail));
            }
        }
    }
    edges.extend(corpus.triples().iter().map(|t| (t.head, t.tail)));
    let n = edges.len() as f64;
    let deg = |x: EntityRef| edges.iter().filter(|(a, b)| *a == x || *b == x).count() as f64 + 0.0;
    let joint = |x: EntityRef, y: EntityRef| edges.iter().filter(|&&(a, b)| (a == x && b == y) || (a == y && b == x)).count() as f64;
    let u = EntityRef::new(EntityType::User, 0);
    for b in 0..corpus.count(EntityType::Brand) {
        let e = EntityRef::new(EntityType::Brand, b);
        let want = (n * (joint(u, e) + 1.0) / (deg(u).max(1.0) * deg(e).max(1.0))).ln();
        assert!((assoc.pmi(u, e) - want).abs() < 1e-12);
        assert!((assoc.pmi(u, e) - assoc.pmi(e, u)).abs() < 1e-15);
    }
}

#[test]
fn group_vectors_fixed_layout_and_deterministic() {
    let corpus = synth_corpus(&small_spec(), 9);
    let assoc = AssociationIndex::build(&corpus);
    let mut rng = drem::rng::fork(9, "groups");
    let drem = random_store(&corpus, ModelKind::Drem, 4, 1, &mut rng);
    let hgn = random_store(&corpus, ModelKind::DremHgn, 4, 2, &mut rng);
    let ex = Explainer::new(&corpus, TemplateSet::default(), ExplainConfig::default()).unwrap();
    assert_eq!(group_layout().len(), GROUP_VECTOR_LEN);
    for u in 0..4 {
        let mae = ex.mae(&drem, u, 0, 1).unwrap();
        let mie = ex.mie(&hgn, u, 0, 1).unwrap();
        for g in [&mae, &mie] {
            let v = build_group_vector(g, ctx(), &corpus, &assoc);
            assert_eq!(v.len(), GROUP_VECTOR_LEN);
            assert!(v.iter().all(|x| x.is_finite()));
            assert_eq!(v, build_group_vector(g, ctx(), &corpus, &assoc));
        }
        for e in &mie.explanations {
            assert!(feature_exist_confidence(e).iter().all(|&c| c == 1.0));
            assert_eq!(feature_existence_rate(e, &mie, &corpus), 1.0);
        }
        for e in &mae.explanations {
            let want = if e.entities.is_empty() { vec![e.score] } else { e.entity_scores.clone() };
            assert_eq!(feature_exist_confidence(e), want);
        }
    }
    let mut empty = ex.mie(&hgn, 0, 0, 1).unwrap();
    empty.explanations.clear();
    let v = build_group_vector(&empty, ctx(), &corpus, &assoc);
    assert!(v[..GROUP_VECTOR_LEN - 2].iter().all(|&x| x == 0.0));
    assert_eq!(&v[GROUP_VECTOR_LEN - 2..], &[0.4, -1.5]);
}

#[test]
fn stump_matches_exhaustive_scan() {
    let mut rng = drem::rng::fork(11, "stump");
    for _ in 0..20 {
        let x: Vec<Vec<f64>> = (0..40).map(|_| vec![rng.gen_range(0..15) as f64]).collect();
        let r: Vec<f64> = (0..40).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let rows: Vec<usize> = (0..40).collect();
        let found = best_split(&x, &r, &rows, 1);
        let mut best: Option<(f64, f64)> = None;
        let mut values: Vec<f64> = x.iter().map(|v| v[0]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        let total: f64 = r.iter().sum();
        for w in values.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let (mut sl, mut nl) = (0.0, 0.0);
            for i in 0..40 {
                if x[i][0] <= t {
                    sl += r[i];
                    nl += 1.0;
                }
            }
            let sr = total - sl;
            let gain = sl * sl / nl + sr * sr / (40.0 - nl) - total * total / 40.0;
            if best.is_none_or(|(g, _)| gain > g) {
                best = Some((gain, t));
            }
        }
        match (found, best) {
            (Some(f), Some((g, t))) if g > 1e-12 => {
                assert_eq!(f.threshold, t);
                assert!((f.gain - g).abs() < 1e-9);
            }
            (None, b) => assert!(b.is_none_or(|(g, _)| g <= 1e-12)),
            other => panic!("mismatch {other:?}"),
        }
    }
}

#[test]
fn separable_data_fits_within_fifty_trees() {
    let mut rng = drem::rng::fork(12, "separable");
    let x: Vec<Vec<f64>> = (0..200).map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let y: Vec<bool> = x.iter().map(|r| r[0] > 0.0).collect();
    let params = GbdtParams {
        n_trees: 50,
        learning_rate: 0.3,
        max_depth: 5,
        max_leaves: 10,
        min_leaf: 10,
    };
    let model = gbdt_train(&x, &y, &params).unwrap();
    let acc = x.iter().zip(&y).filter(|(r, &t)| (gbdt_predict(&model, r) >= 0.5) == t).count();
    assert_eq!(acc, 200);
    assert!(x.iter().all(|r| {
        let p = gbdt_predict(&model, r);
        p > 0.0 && p < 1.0
    }));
    assert!(matches!(model.trees[0].nodes[0], Node::Split { feature: 0, .. }));
}

#[test]
fn shifting_a_column_keeps_predictions() {
    let mut rng = drem::rng::fork(13, "shift");
    let x: Vec<Vec<f64>> = (0..120).map(|_| (0..3).map(|_| rng.gen_range(0..32) as f64 / 8.0).collect()).collect();
    let y: Vec<bool> = x.iter().map(|r| r[1] + r[2] > 4.0).collect();
    let shift = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> { rows.iter().map(|r| vec![r[0], r[1] + 1024.0, r[2]]).collect() };
    let params = GbdtParams::default();
    let a = gbdt_train(&x, &y, &params).unwrap();
    let b = gbdt_train(&shift(&x), &y, &params).unwrap();
    for (r, s) in x.iter().zip(shift(&x)) {
        assert_eq!(gbdt_predict(&a, r), gbdt_predict(&b, &s));
    }
}

#[test]
fn perfect_labels_have_no_errors() {
    let mut rng = drem::rng::fork(14, "perfect");
    let mut cases = Vec::new();
    let mut labels = BTreeMap::new();
    for c in 0..40 {
        let good: Vec<f64> = vec![rng.gen_range(2.0..3.0), rng.gen_range(0.0..1.0)];
        let bad: Vec<f64> = vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
        let mie_wins = rng.gen_bool(0.5);
        let id = format!("c{c}");
        let (mie, mae) = if mie_wins { (good, bad) } else { (bad, good) };
        cases.push(Case { case_id: id.clone(), mie, mae });
        for a in Aspect::ALL {
            labels.insert((id.clone(), a), if mie_wins { Preference::First } else { Preference::Second });
        }
    }
    let pairs = build_pair_dataset(&cases, &labels).unwrap();
    let grid = [GbdtParams { min_leaf: 5, ..GbdtParams::default() }];
    let report = cross_validate(&pairs, 5, &grid, 0).unwrap();
    for row in &report.rows {
        assert_eq!((row.total, row.type1, row.type2), (80, 0, 0));
    }
    assert_eq!(report, cross_validate(&pairs, 5, &grid, 0).unwrap());
    assert!(report.to_csv().starts_with("aspect,total,correct,type1,type2\n"));
}

#[test]
fn random_ratings_have_near_zero_kappa() {
    let mut rng = drem::rng::fork(15, "kappa");
    let ratings: Vec<Vec<usize>> = (0..1000).map(|_| (0..3).map(|_| rng.gen_range(0..2)).collect()).collect();
    let k = fleiss_kappa(&ratings, 2).unwrap();
    assert!(k.abs() < 0.1, "kappa {k}");
}
