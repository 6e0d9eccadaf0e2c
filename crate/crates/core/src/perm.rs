//! Permutations of `[n]` and the Lehmer indexing of the symmetric group.
//!
//! Points are 0-based in memory. The text form and the `*_one_based`
//! constructors use 1-based points, so `"2 1 3"` is the transposition of the
//! first two points.
//!
//! Composition reads left to right: `g.then(&h)` is the permutation
//! `x ↦ h(g(x))`, i.e. apply `g` first.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{domain, parse, range, Error, Result};

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    images: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Self {
            images: (0..n).collect(),
        }
    }

    /// Builds a permutation from its 0-based image table.
    pub fn from_images(images: Vec<usize>) -> Result<Self> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &v in &images {
            if v >= n || seen[v] {
                return Err(domain(format!("{images:?} is not a permutation of 0..{n}")));
            }
            seen[v] = true;
        }
        Ok(Self { images })
    }

    /// Builds a permutation from a 1-based image table, e.g. `[2, 1, 3]`.
    pub fn from_one_based(images: &[usize]) -> Result<Self> {
        if images.contains(&0) {
            return Err(domain("point 0 in a 1-based image table"));
        }
        Self::from_images(images.iter().map(|&v| v - 1).collect())
    }

    /// Builds a permutation of degree `n` from disjoint cycles written with
    /// 1-based points, e.g. `from_cycles(4, &[&[1, 2], &[3, 4]])`.
    pub fn from_cycles(n: usize, cycles: &[&[usize]]) -> Result<Self> {
        let mut images: Vec<usize> = (0..n).collect();
        let mut touched = vec![false; n];
        for cycle in cycles {
            for (k, &p) in cycle.iter().enumerate() {
                if p == 0 || p > n {
                    return Err(domain(format!("cycle point {p} outside 1..={n}")));
                }
                if touched[p - 1] {
                    return Err(domain(format!("cycles are not disjoint at point {p}")));
                }
                touched[p - 1] = true;
                let next = cycle[(k + 1) % cycle.len()];
                if next == 0 || next > n {
                    return Err(domain(format!("cycle point {next} outside 1..={n}")));
                }
                images[p - 1] = next - 1;
            }
        }
        Self::from_images(images)
    }

    pub fn degree(&self) -> usize {
        self.images.len()
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    /// 1-based image table.
    pub fn one_based(&self) -> Vec<usize> {
        self.images.iter().map(|v| v + 1).collect()
    }

    /// Image of the 0-based point `i`.
    pub fn apply(&self, i: usize) -> Result<usize> {
        self.images
            .get(i)
            .copied()
            .ok_or_else(|| domain(format!("point {i} outside 0..{}", self.degree())))
    }

    /// Image of `i`; the caller guarantees `i < degree`.
    #[inline]
    pub fn at(&self, i: usize) -> usize {
        self.images[i]
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &v)| i == v)
    }

    /// `x ↦ h(g(x))` where `g = self`.
    pub fn compose(&self, h: &Permutation) -> Result<Permutation> {
        if self.degree() != h.degree() {
            return Err(domain(format!(
                "cannot compose degree {} with degree {}",
                self.degree(),
                h.degree()
            )));
        }
        Ok(self.then(h))
    }

    /// Unchecked [`compose`](Self::compose); panics on mismatched degrees.
    pub fn then(&self, h: &Permutation) -> Permutation {
        assert_eq!(self.degree(), h.degree(), "degree mismatch");
        Permutation {
            images: self.images.iter().map(|&x| h.images[x]).collect(),
        }
    }

    pub fn inverse(&self) -> Permutation {
        let mut images = vec![0; self.degree()];
        for (i, &v) in self.images.iter().enumerate() {
            images[v] = i;
        }
        Permutation { images }
    }

    /// `self^k` for `k ≥ 0`.
    pub fn pow(&self, mut k: u64) -> Permutation {
        let mut base = self.clone();
        let mut acc = Permutation::identity(self.degree());
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.then(&base);
            }
            base = base.then(&base);
            k >>= 1;
        }
        acc
    }

    /// 0-based rank in the lexicographic order of image sequences.
    pub fn lehmer_rank(&self) -> BigUint {
        let n = self.degree();
        let mut rank = BigUint::zero();
        for i in 0..n {
            let smaller_after = self.images[i + 1..]
                .iter()
                .filter(|&&v| v < self.images[i])
                .count();
            rank = rank * BigUint::from(n - i) + BigUint::from(smaller_after);
        }
        rank
    }

    /// Inverse of [`lehmer_rank`](Self::lehmer_rank).
    pub fn lehmer_unrank(k: &BigUint, n: usize) -> Result<Permutation> {
        if k >= &factorial(n) {
            return Err(range(format!("rank {k} is not below {n}!")));
        }
        // factorial-base digits, least significant (radix 1) last
        let mut digits = vec![0usize; n];
        let mut rest = k.clone();
        for i in (0..n).rev() {
            let radix = BigUint::from(n - i);
            let (q, r) = rest.div_rem(&radix);
            digits[i] = r.to_usize().expect("digit below radix");
            rest = q;
        }
        let mut pool: Vec<usize> = (0..n).collect();
        let images = digits.into_iter().map(|d| pool.remove(d)).collect();
        Ok(Permutation { images })
    }

    /// Advances to the lexicographic successor; returns `false` at the last
    /// permutation.
    pub fn next_lex(&mut self) -> bool {
        let a = &mut self.images;
        let n = a.len();
        if n < 2 {
            return false;
        }
        let mut i = n - 1;
        while i > 0 && a[i - 1] >= a[i] {
            i -= 1;
        }
        if i == 0 {
            return false;
        }
        let mut j = n - 1;
        while a[j] <= a[i - 1] {
            j -= 1;
        }
        a.swap(i - 1, j);
        a[i..].reverse();
        true
    }

    /// All of `S_n` in lexicographic order.
    pub fn all(n: usize) -> impl Iterator<Item = Permutation> {
        let mut next = Some(Permutation::identity(n));
        std::iter::from_fn(move || {
            let cur = next.take()?;
            let mut succ = cur.clone();
            if succ.next_lex() {
                next = Some(succ);
            }
            Some(cur)
        })
    }
}

pub fn factorial(n: usize) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, k| acc * BigUint::from(k))
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for v in &self.images {
            if !first {
                f.write_str(" ")?;
            }
            first = false;
            write!(f, "{}", v + 1)?;
        }
        Ok(())
    }
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{self}]")
    }
}

impl FromStr for Permutation {
    type Err = Error;

    /// Parses the one-line text form: space-separated 1-based images.
    fn from_str(s: &str) -> Result<Self> {
        let images = s
            .split_whitespace()
            .map(|tok| {
                tok.parse::<usize>()
                    .map_err(|e| parse(1, format!("bad image {tok:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_one_based(&images).map_err(|e| parse(1, e.to_string()))
    }
}
