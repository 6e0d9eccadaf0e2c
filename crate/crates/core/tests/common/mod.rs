//! Brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashSet};

use isocodec::fq::MatrixFq;
use isocodec::iso::{GroupElement, UniverseElement};
use isocodec::{BitString, Permutation};
use rand::seq::SliceRandom;
use rand::Rng;

/// Closure of a generator set by breadth-first multiplication.
pub fn closure(n: usize, gens: &[Permutation]) -> BTreeSet<Permutation> {
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

pub fn random_perm<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Permutation {
    let mut images: Vec<usize> = (0..n).collect();
    images.shuffle(rng);
    Permutation::from_images(images).unwrap()
}

pub fn random_gens<R: Rng + ?Sized>(n: usize, max: usize, rng: &mut R) -> Vec<Permutation> {
    let k = rng.gen_range(0..=max);
    (0..k).map(|_| random_perm(n, rng)).collect()
}

/// Every group element, by enumeration.
pub fn group_elements(w: &UniverseElement) -> Vec<GroupElement> {
    w.group().elements().unwrap()
}

/// `Aut(ω)` by enumeration.
pub fn aut(w: &UniverseElement) -> Vec<GroupElement> {
    let inv = w.invariant();
    group_elements(w)
        .into_iter()
        .filter(|g| w.act(g).unwrap().invariant() == inv)
        .collect()
}

/// Orbit of `ω` as a set of invariants, by enumeration.
pub fn orbit(w: &UniverseElement) -> HashSet<BitString> {
    group_elements(w)
        .iter()
        .map(|g| w.act(g).unwrap().invariant())
        .collect()
}

pub fn isomorphic(a: &UniverseElement, b: &UniverseElement) -> bool {
    let target = b.invariant();
    group_elements(a).iter().any(|g| a.act(g).unwrap().invariant() == target)
}

pub fn random_graph<R: Rng + ?Sized>(n: usize, rng: &mut R) -> UniverseElement {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen() {
                edges.push((i, j));
            }
        }
    }
    UniverseElement::graph(n, &edges).unwrap()
}

pub fn random_rigid_graph<R: Rng + ?Sized>(n: usize, rng: &mut R) -> UniverseElement {
    loop {
        let g = random_graph(n, rng);
        if aut(&g).len() == 1 {
            return g;
        }
    }
}

/// Uniform `d × n` matrix over F_q of full row rank.
pub fn random_code<R: Rng + ?Sized>(d: usize, n: usize, q: u64, rng: &mut R) -> UniverseElement {
    loop {
        let entries = (0..d * n).map(|_| rng.gen_range(0..q)).collect();
        let m = MatrixFq::new(q, d, n, entries).unwrap();
        if m.rank() == d {
            return UniverseElement::Code(m);
        }
    }
}

pub fn random_matrix_space<R: Rng + ?Sized>(d: usize, n: usize, q: u64, rng: &mut R) -> UniverseElement {
    loop {
        let basis: Vec<MatrixFq> = (0..d)
            .map(|_| MatrixFq::new(q, n, n, (0..n * n).map(|_| rng.gen_range(0..q)).collect()).unwrap())
            .collect();
        let w = UniverseElement::MatrixSpace { n, q, basis };
        if w.validate().is_ok() {
            return w;
        }
    }
}

pub fn random_subgroup<R: Rng + ?Sized>(n: usize, rng: &mut R) -> UniverseElement {
    UniverseElement::Subgroup {
        n,
        gens: random_gens(n, 2, rng),
    }
}
