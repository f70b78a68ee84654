mod common;

use std::collections::BTreeSet;

use mpa_core::dsep::{d_separated, is_d_separated, list_paths};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use common::{moral_separated, names, random_dag, triples};

#[test]
fn bayes_ball_matches_moralization_on_random_dags() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut queries = 0usize;
    for _ in 0..1000 {
        let n = rng.random_range(2..=10);
        let g = random_dag(&mut rng, n, 0.3);
        for (a, b, s) in triples(&names(&g), 3) {
            let fast = is_d_separated(&g, &a, &b, &s).unwrap();
            assert_eq!(fast, moral_separated(&g, &a, &b, &s), "{a} {b} {s:?}\n{g}");
            assert_eq!(fast, is_d_separated(&g, &b, &a, &s).unwrap());
            queries += 1;
        }
    }
    assert!(queries > 100_000);
}

#[test]
fn verdicts_agree_with_path_listing() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..200 {
        let n = rng.random_range(2..=8);
        let g = random_dag(&mut rng, n, 0.3);
        let all = triples(&names(&g), 2);
        for _ in 0..10 {
            let (a, b, s) = &all[rng.random_range(0..all.len())];
            let v = d_separated(&g, a, b, s).unwrap();
            let paths = list_paths(&g, a, b, s).unwrap();
            let open: Vec<_> = paths.iter().filter(|p| p.is_open()).cloned().collect();
            assert_eq!(v.separated, open.is_empty());
            assert_eq!(v.open_paths, open);
            for p in &paths {
                // a path is open iff nothing blocks it; colliders are
                // accounted for exactly once
                assert_eq!(p.is_open(), p.blocking_nodes.is_empty());
                let colliders = p
                    .directions
                    .windows(2)
                    .filter(|w| {
                        w[0] == mpa_core::dsep::Direction::Forward
                            && w[1] == mpa_core::dsep::Direction::Backward
                    })
                    .count();
                let counted = p.opening_colliders.len()
                    + p.blocking_nodes
                        .iter()
                        .filter(|(_, r)| *r == mpa_core::dsep::BlockReason::ColliderUnconditioned)
                        .count();
                assert_eq!(colliders, counted);
            }
            let mut sorted = paths.clone();
            sorted.sort_by(|x, y| x.nodes.cmp(&y.nodes));
            assert_eq!(sorted, paths);
        }
    }
}

/// Partial correlation of `a` and `b` given `s` from a covariance matrix.
fn partial_corr(cov: &DMatrix<f64>, a: usize, b: usize, s: &[usize]) -> f64 {
    let idx: Vec<usize> = [a, b].iter().chain(s).copied().collect();
    let k = idx.len();
    let sub = DMatrix::from_fn(k, k, |i, j| cov[(idx[i], idx[j])]);
    let p = sub.try_inverse().expect("covariance is positive definite");
    -p[(0, 1)] / (p[(0, 0)] * p[(1, 1)]).sqrt()
}

#[test]
fn separated_pairs_are_uncorrelated_in_linear_gaussian_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let rows = 50_000;
    let mut checked = 0;
    for _ in 0..50 {
        let n = rng.random_range(3..=8);
        let g = random_dag(&mut rng, n, 0.3);
        let order = g.topological_order();
        let pos = |name: &str| order.iter().position(|o| o == name).unwrap();
        let weights: Vec<Vec<(usize, f64)>> = order
            .iter()
            .map(|v| {
                g.parents(v)
                    .unwrap()
                    .into_iter()
                    .map(|p| {
                        let w: f64 = rng.random_range(0.5..1.2);
                        (pos(p), if rng.random_bool(0.5) { w } else { -w })
                    })
                    .collect()
            })
            .collect();
        let mut data = DMatrix::<f64>::zeros(rows, n);
        for r in 0..rows {
            for (j, ws) in weights.iter().enumerate() {
                let noise: f64 = StandardNormal.sample(&mut rng);
                let mean: f64 = ws.iter().map(|(p, w)| w * data[(r, *p)]).sum();
                data[(r, j)] = mean + noise;
            }
        }
        let means = data.row_mean();
        let centred = DMatrix::from_fn(rows, n, |r, c| data[(r, c)] - means[c]);
        let cov = centred.transpose() * &centred / (rows as f64 - 1.0);

        let all = triples(&order, 2);
        let separated: Vec<_> = all
            .iter()
            .filter(|(a, b, s)| is_d_separated(&g, a, b, s).unwrap())
            .collect();
        for _ in 0..separated.len().min(20) {
            let (a, b, s) = separated[rng.random_range(0..separated.len())];
            let s_idx: Vec<usize> = s.iter().map(|x| pos(x)).collect();
            let r = partial_corr(&cov, pos(a), pos(b), &s_idx);
            assert!(r.abs() < 0.02, "{a} ⊥ {b} | {s:?}: r = {r}\n{g}");
            checked += 1;
        }
    }
    assert!(checked > 100);
}

#[test]
fn empty_conditioning_on_isolated_nodes() {
    let g = mpa_core::graph::parse_graph("dag { A B }").unwrap();
    assert!(is_d_separated(&g, "A", "B", &BTreeSet::new()).unwrap());
}
