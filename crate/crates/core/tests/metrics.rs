mod common;

use common::*;
use crs_sim::corpus::{prune_and_split, Interaction, SplitRatios};
use crs_sim::dialog::{rank_candidates, start_episode};
use crs_sim::eval::{auc_item_prediction, pairwise_auc, summarize, NegativeSampling};
use crs_sim::fm::GlobalMatrices;
use crs_sim::policy::PolicyParams;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn exhaustive_auc_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20 {
        let (users, items, attrs, dim) = (4, rng.gen_range(5..25), 4, 3);
        let catalog = random_catalog(&mut rng, items, attrs, 0.4);
        let m = GlobalMatrices::random(items, attrs, dim, 1.0, &mut rng);
        let emb: Vec<Vec<f64>> = (0..users).map(|_| normals(&mut rng, dim, 1.0)).collect();
        let known: Vec<Vec<usize>> = (0..users)
            .map(|_| (0..items).filter(|_| rng.gen_bool(0.3)).collect())
            .collect();
        let positives: Vec<Interaction> = (0..users)
            .flat_map(|u| known[u].iter().map(move |&v| Interaction::new(u, v)))
            .collect();
        if positives.is_empty() {
            continue;
        }
        for with_attrs in [false, true] {
            let refs: Vec<&[f64]> = emb.iter().map(|e| e.as_slice()).collect();
            let got = auc_item_prediction(&refs, &m, &catalog, &positives, &known, with_attrs, NegativeSampling::Exhaustive, 0);
            let (mut num, mut den) = (0.0, 0usize);
            for it in &positives {
                let stated = if with_attrs { catalog.attributes(it.item).to_vec() } else { vec![] };
                let s = |v: usize| {
                    let mut q = emb[it.user].clone();
                    for &p in &stated {
                        for k in 0..dim {
                            q[k] += m.attributes.row(p)[k];
                        }
                    }
                    (0..dim).map(|k| q[k] * m.items.row(v)[k]).sum::<f64>()
                };
                for v in (0..items).filter(|v| !known[it.user].contains(v)) {
                    den += 1;
                    let (a, b) = (s(it.item), s(v));
                    num += if a > b { 1.0 } else if a == b { 0.5 } else { 0.0 };
                }
            }
            match got {
                Ok(auc) => assert!((auc - num / den as f64).abs() < 1e-12),
                Err(_) => assert_eq!(den, 0),
            }
        }
    }
}

#[test]
fn auc_tie_case_is_one_half() {
    assert_eq!(pairwise_auc(&[1.0, 1.0], &[1.0, 1.0, 1.0]), Some(0.5));
    // Zero embeddings score everything equally.
    let catalog = random_catalog(&mut ChaCha8Rng::seed_from_u64(0), 10, 3, 0.5);
    let m = GlobalMatrices::zeros(10, 3, 4);
    let user = vec![0.0; 4];
    let auc = auc_item_prediction(
        &[&user],
        &m,
        &catalog,
        &[Interaction::new(0, 2)],
        &[vec![2]],
        true,
        NegativeSampling::Sampled(5),
        1,
    )
    .unwrap();
    assert_eq!(auc, 0.5);
    assert_eq!(pairwise_auc(&[2.0], &[1.0]), Some(1.0));
    assert_eq!(pairwise_auc(&[], &[1.0]), None);
}

#[test]
fn ranking_matches_sort_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..200 {
        let items = rng.gen_range(2..30);
        let catalog = random_catalog(&mut rng, items, 3, 0.6);
        // Coarse values force score ties, which must break toward the lower id.
        let mut m = GlobalMatrices::zeros(items, 3, 2);
        for x in m.items.as_mut_slice() {
            *x = rng.gen_range(-2..3) as f64;
        }
        for x in m.attributes.as_mut_slice() {
            *x = rng.gen_range(-1..2) as f64;
        }
        let user = vec![rng.gen_range(-2..3) as f64, 1.0];
        let target = rng.gen_range(0..items);
        let state = start_episode(&catalog, &[], target, 15, &mut rng).unwrap();
        let k = rng.gen_range(1..6);
        let got = rank_candidates(&state, &user, &m, k).unwrap();
        let score = |v: usize| {
            let mut s: f64 = (0..2).map(|d| user[d] * m.items.row(v)[d]).sum();
            for &p in &state.confirmed {
                s += (0..2).map(|d| m.items.row(v)[d] * m.attributes.row(p)[d]).sum::<f64>();
            }
            s
        };
        let mut expect = state.candidates.clone();
        expect.sort_by(|&a, &b| score(b).partial_cmp(&score(a)).unwrap().then(a.cmp(&b)));
        expect.truncate(k);
        assert_eq!(got, expect);
    }
}

proptest! {
    #[test]
    fn success_curve_is_monotone(outcomes in prop::collection::vec((any::<bool>(), 1usize..=15), 1..200)) {
        let r = summarize(&outcomes, 15).unwrap();
        prop_assert_eq!(r.sr_at.len(), 15);
        prop_assert!(r.sr_at.windows(2).all(|w| w[0] <= w[1]));
        let succ = outcomes.iter().filter(|o| o.0).count() as f64 / outcomes.len() as f64;
        prop_assert!((r.final_sr() - succ).abs() < 1e-12);
        let at: f64 = outcomes.iter().map(|&(s, t)| if s { t } else { 15 } as f64).sum::<f64>() / outcomes.len() as f64;
        prop_assert!((r.average_turns - at).abs() < 1e-12);
    }

    #[test]
    fn split_partitions_each_user(
        raw in prop::collection::vec((0usize..15, 0usize..30), 1..300),
        min in 1usize..6,
        seed: u64,
    ) {
        let catalog = crs_sim::corpus::Catalog::new(15, 2, vec![vec![0]; 30]).unwrap();
        let inter: Vec<Interaction> = raw.iter().map(|&(u, v)| Interaction::new(u, v)).collect();
        let mut per_user = std::collections::BTreeMap::<usize, std::collections::BTreeSet<usize>>::new();
        for it in &inter {
            per_user.entry(it.user).or_default().insert(it.item);
        }
        let kept: Vec<_> = per_user.values().filter(|s| s.len() >= min).cloned().collect();
        let ratios = SplitRatios::default();
        match prune_and_split(&catalog, &inter, min, ratios, seed) {
            Err(_) => prop_assert!(kept.is_empty()),
            Ok(split) => {
                prop_assert_eq!(split.num_users(), kept.len());
                for (u, items) in kept.iter().enumerate() {
                    let of = |s: &[Interaction]| -> Vec<usize> { let mut v: Vec<usize> = s.iter().filter(|i| i.user == u).map(|i| i.item).collect(); v.sort_unstable(); v };
                    let (tr, va, te) = (of(&split.train), of(&split.validation), of(&split.test));
                    let (a, b, c) = ratios.sizes(items.len());
                    prop_assert_eq!((tr.len(), va.len(), te.len()), (a, b, c));
                    let mut all: Vec<usize> = tr.iter().chain(&va).chain(&te).copied().collect();
                    all.sort_unstable();
                    let expect: Vec<usize> = items.iter().copied().collect();
                    prop_assert_eq!(all, expect);
                }
            }
        }
    }

    #[test]
    fn softmax_ignores_shared_logit_shift(seed: u64, shift in -20.0f64..20.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = PolicyParams::random(3, 4, 6, false, &mut rng);
        let state = normals(&mut rng, 7, 1.0);
        let mask: Vec<bool> = (0..5).map(|a| a == 0 || rng.gen_bool(0.6)).collect();
        let mut shifted = theta.clone();
        let n = shifted.params.len();
        for b in &mut shifted.params[n - 5..] {
            *b += shift;
        }
        let p = theta.masked_distribution(&state, Some(&mask)).unwrap();
        let q = shifted.masked_distribution(&state, Some(&mask)).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
