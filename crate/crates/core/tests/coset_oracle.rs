//! Coset indexing and normal form against brute-force enumeration.

use std::collections::BTreeSet;

use isocodec::coset::{canonical_rep, normal_form, CosetIndexing};
use isocodec::{PermGroup, Permutation};
use num_bigint::BigUint;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Closure of a generator set by breadth-first multiplication.
fn closure(n: usize, gens: &[Permutation]) -> BTreeSet<Permutation> {
    let mut seen = BTreeSet::new();
    seen.insert(Permutation::identity(n));
    let mut frontier = vec![Permutation::identity(n)];
    while let Some(p) = frontier.pop() {
        for g in gens {
            let q = p.then(g);
            if seen.insert(q.clone()) {
                frontier.push(q);
            }
        }
    }
    seen
}

/// Sorted list of lex-least coset members of πΓ for π ∈ H.
fn coset_minima(h: &BTreeSet<Permutation>, gamma: &BTreeSet<Permutation>) -> Vec<Permutation> {
    let mut mins = BTreeSet::new();
    for pi in h {
        mins.insert(gamma.iter().map(|g| pi.then(g)).min().unwrap());
    }
    mins.into_iter().collect()
}

fn check_pair(n: usize, hg: &[Permutation], gg: &[Permutation]) {
    let h_set = closure(n, hg);
    let g_set = closure(n, gg);
    let mins = coset_minima(&h_set, &g_set);
    let idx = CosetIndexing::new(
        PermGroup::new(n, hg.to_vec()).unwrap(),
        PermGroup::new(n, gg.to_vec()).unwrap(),
    )
    .unwrap();
    assert_eq!(idx.count(), &BigUint::from(mins.len()));
    for (i, m) in mins.iter().enumerate() {
        assert_eq!(&idx.unrank(&BigUint::from(i)).unwrap(), m);
    }
    let gamma = idx.gamma().clone();
    for pi in &h_set {
        let rep = canonical_rep(pi, &gamma).unwrap();
        let k = mins.binary_search(&rep).expect("canonical rep is a coset minimum");
        assert_eq!(idx.rank(pi).unwrap(), BigUint::from(k));
    }
}

#[test]
fn every_subgroup_pair_of_s4() {
    let elems: Vec<Permutation> = Permutation::all(4).collect();
    // every subgroup of S4 is generated by two elements
    let mut subgroups: Vec<(Vec<Permutation>, BTreeSet<Permutation>)> = Vec::new();
    for a in &elems {
        for b in &elems {
            let gens = vec![a.clone(), b.clone()];
            let set = closure(4, &gens);
            if !subgroups.iter().any(|(_, s)| *s == set) {
                subgroups.push((gens, set));
            }
        }
    }
    assert_eq!(subgroups.len(), 30);
    let mut pairs = 0;
    for (hg, hs) in &subgroups {
        for (gg, gs) in &subgroups {
            if gs.is_subset(hs) {
                check_pair(4, hg, gg);
                pairs += 1;
            }
        }
    }
    assert!(pairs > 30);
}

#[test]
fn random_pairs_in_s5() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let elems: Vec<Permutation> = Permutation::all(5).collect();
    for _ in 0..25 {
        let gg: Vec<Permutation> = (0..rng.gen_range(0..3))
            .map(|_| elems[rng.gen_range(0..elems.len())].clone())
            .collect();
        let mut hg = gg.clone();
        hg.push(elems[rng.gen_range(0..elems.len())].clone());
        check_pair(5, &hg, &gg);
    }
}

#[test]
fn normal_form_depends_only_on_the_group() {
    let elems: Vec<Permutation> = Permutation::all(4).collect();
    let mut by_group: Vec<(BTreeSet<Permutation>, Vec<Permutation>)> = Vec::new();
    for a in &elems {
        for b in &elems {
            let set = closure(4, &[a.clone(), b.clone()]);
            let nf = normal_form(4, &[a.clone(), b.clone()]).unwrap();
            assert_eq!(closure(4, &nf), set);
            match by_group.iter().find(|(s, _)| *s == set) {
                Some((_, seen)) => assert_eq!(seen, &nf),
                None => by_group.push((set, nf)),
            }
        }
    }
    assert_eq!(by_group.len(), 30);
}

fn perm_strategy(n: usize) -> impl Strategy<Value = Permutation> {
    Just((0..n).collect::<Vec<usize>>())
        .prop_shuffle()
        .prop_map(|v| Permutation::from_images(v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rank_is_constant_on_cosets(
        g1 in perm_strategy(6),
        g2 in perm_strategy(6),
        pi in perm_strategy(6),
        a in 0u64..6,
        b in 0u64..6,
    ) {
        let w = g1.pow(a).then(&g2.pow(b)).then(&g1);
        let gamma = PermGroup::new(6, vec![g1, g2]).unwrap();
        let idx = CosetIndexing::in_symmetric(gamma).unwrap();
        let r = idx.rank(&pi).unwrap();
        prop_assert_eq!(idx.rank(&pi.then(&w)).unwrap(), r.clone());
        let rep = idx.unrank(&r).unwrap();
        prop_assert_eq!(rep.clone(), canonical_rep(&pi, idx.gamma()).unwrap());
        prop_assert!(rep <= pi);
    }
}
