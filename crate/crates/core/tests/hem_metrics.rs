mod common;

use common::{oracle, rel_err, rng};
use hemfair::hem_gesture::{hem_ges, max_hem_ges, pearson, CorrVector, PAIR_COUNT};
use hemfair::hem_verbal::{eig_sym, hem_tr, topic_hem_tr, SymMatrix, TopicMatrix};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

fn sym(a: &oracle::Dense) -> SymMatrix {
    SymMatrix::from_rows(a).unwrap()
}

#[test]
fn jacobi_matches_oracle_on_random_psd() {
    let mut r = rng(11);
    for _ in 0..60 {
        let n = r.random_range(2..=17);
        let a = oracle::random_psd(&mut r, n);
        let got = eig_sym(&sym(&a)).unwrap();
        let want = oracle::eigenvalues(&a);
        for (g, w) in got.iter().zip(&want) {
            assert!(rel_err(*g, *w) < 1e-8, "n={n}: {g} vs {w}");
        }
        let k = r.random_range(1..=n);
        let product: f64 = want[..k].iter().product();
        assert!(rel_err(hem_tr(&sym(&a), k).unwrap().value, product) < 1e-8);
    }
}

#[test]
fn oracle_sanity() {
    let a = vec![vec![2.0, 1.0], vec![1.0, 2.0]];
    assert_eq!(oracle::eigenvalues(&a), vec![3.0, 1.0]);
    let b = vec![vec![2.0, 0.0, 0.0], vec![0.0, 3.0, 4.0], vec![0.0, 4.0, 9.0]];
    let e = oracle::eigenvalues(&b);
    assert!((e[0] - 11.0).abs() < 1e-12 && (e[1] - 2.0).abs() < 1e-12 && (e[2] - 1.0).abs() < 1e-12);
    let c: oracle::Dense = (0..5)
        .map(|i| (0..5).map(|j| if i == j { (i + 1) as f64 } else { 0.0 }).collect())
        .collect();
    assert_eq!(oracle::qr_eigenvalues(&c).len(), 5);
    let mut q = oracle::qr_eigenvalues(&c);
    q.sort_by(f64::total_cmp);
    assert_eq!(q, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
}

fn random_topics(r: &mut impl Rng, k: usize, d: usize) -> oracle::Dense {
    (0..k)
        .map(|_| (0..d).map(|_| r.sample::<f64, _>(StandardNormal)).collect())
        .collect()
}

#[test]
fn hem_tr_invariances() {
    let mut r = rng(12);
    let d = 40;
    for _ in 0..10 {
        let t = random_topics(&mut r, 10, d);
        let base = topic_hem_tr(&TopicMatrix { rows: t.clone() }, 5).unwrap().value;

        let q = oracle::random_orthogonal(&mut r, d);
        let rotated = oracle::mat_mul(&t, &q);
        let rot = topic_hem_tr(&TopicMatrix { rows: rotated }, 5).unwrap().value;
        assert!(rel_err(rot, base) < 1e-8);

        let mut perm = t.clone();
        perm.shuffle(&mut r);
        assert_eq!(topic_hem_tr(&TopicMatrix { rows: perm }, 5).unwrap().value, base);

        let scaled: oracle::Dense = t.iter().map(|row| row.iter().map(|v| 2.0 * v).collect()).collect();
        let s = topic_hem_tr(&TopicMatrix { rows: scaled }, 5).unwrap().value;
        assert!(rel_err(s, base * 2f64.powi(10)) < 1e-8);
    }
}

#[test]
fn hem_tr_uses_gram_eigenvalues() {
    let mut r = rng(13);
    let t = random_topics(&mut r, 6, 20);
    let want: f64 = oracle::eigenvalues(&oracle::gram(&t))[..3].iter().product();
    let got = topic_hem_tr(&TopicMatrix { rows: t }, 3).unwrap().value;
    assert!(rel_err(got, want) < 1e-8);
}

fn corr_vector(v: &[f64]) -> CorrVector {
    CorrVector(v.try_into().unwrap())
}

fn random_corr(r: &mut impl Rng) -> Vec<f64> {
    (0..PAIR_COUNT).map(|_| r.random_range(-1.0..=1.0)).collect()
}

#[test]
fn hem_ges_matches_brute_force() {
    let mut r = rng(14);
    for _ in 0..50 {
        let s = r.random_range(1..=20);
        let raw: Vec<Vec<f64>> = (0..s).map(|_| random_corr(&mut r)).collect();
        let vecs: Vec<CorrVector> = raw.iter().map(|v| corr_vector(v)).collect();
        let got = hem_ges(&vecs).unwrap().value;
        assert_eq!(got, oracle::max_pairwise_distance(&raw));
        assert!((0.0..=max_hem_ges()).contains(&got));
    }
    assert_eq!(max_hem_ges(), 2.0 * (PAIR_COUNT as f64).sqrt());
}

#[test]
fn pearson_matches_oracle() {
    let mut r = rng(15);
    for _ in 0..100 {
        let n = r.random_range(3..60);
        let x: Vec<f64> = (0..n).map(|_| r.random_range(-5.0..5.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.3 * v + r.random_range(-3.0..3.0)).collect();
        assert!((pearson(&x, &y).unwrap() - oracle::pearson(&x, &y)).abs() < 1e-10);
    }
}

proptest! {
    #[test]
    fn appending_segments_never_lowers_hem_ges(
        seed in 0u64..1000,
        s in 1usize..12,
        dup in 0usize..12,
    ) {
        let mut r = rng(seed);
        let raw: Vec<Vec<f64>> = (0..s).map(|_| random_corr(&mut r)).collect();
        let mut vecs: Vec<CorrVector> = raw.iter().map(|v| corr_vector(v)).collect();
        let before = hem_ges(&vecs).unwrap().value;

        let mut with_dup = vecs.clone();
        with_dup.push(vecs[dup % s].clone());
        prop_assert_eq!(hem_ges(&with_dup).unwrap().value, before);

        vecs.push(corr_vector(&random_corr(&mut r)));
        prop_assert!(hem_ges(&vecs).unwrap().value >= before);
    }

    #[test]
    fn hem_tr_scales_with_topic_norms(seed in 0u64..1000, k in 1usize..5) {
        let mut r = rng(seed);
        let t = random_topics(&mut r, 6, 12);
        let base = topic_hem_tr(&TopicMatrix { rows: t.clone() }, k).unwrap().value;
        let c = 3.0;
        let scaled: oracle::Dense = t.iter().map(|row| row.iter().map(|v| c * v).collect()).collect();
        let s = topic_hem_tr(&TopicMatrix { rows: scaled }, k).unwrap().value;
        prop_assert!(rel_err(s, base * c.powi(2 * k as i32)) < 1e-8);
    }
}
