//! Canonical coset representatives, the lexicographic indexing of the left
//! cosets of `Γ` in `H` (for `Γ ≤ H ≤ S_n`), and the subgroup normal form.
//!
//! Left cosets are `πΓ = { π·g : g ∈ Γ }` with `π·g = π.then(g)` (apply `π`
//! first). The canonical representative of `πΓ` is its lexicographically
//! least element, comparing image sequences.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use num_bigint::BigUint;
use num_traits::Zero;

use crate::error::{domain, range, Error, Result};
use crate::group::PermGroup;
use crate::perm::Permutation;

/// Lexicographically least element of the left coset `πΓ`.
///
/// Fixes the images of `0, 1, …` in turn: at step `k` the image of `k` is
/// pushed to the minimum of its orbit under the pointwise stabilizer (in
/// `Γ`) of the images already fixed.
pub fn canonical_rep(pi: &Permutation, gamma: &PermGroup) -> Result<Permutation> {
    if pi.degree() != gamma.degree() {
        return Err(domain(format!(
            "permutation of degree {} against group of degree {}",
            pi.degree(),
            gamma.degree()
        )));
    }
    let mut current = pi.clone();
    let mut stab = gamma.clone();
    for k in 0..pi.degree() {
        if stab.is_trivial() {
            break;
        }
        let x = current.at(k);
        let m = stab.orbit(x)?[0];
        if m != x {
            let tau = stab
                .transporter(x, m)?
                .ok_or_else(|| Error::Invariant("orbit minimum not reachable".into()))?;
            current = current.then(&tau);
        }
        stab = stab.stabilizer(m)?;
    }
    Ok(current)
}

/// Per-prefix data: the pointwise stabilizers `H_T`, `Γ_T` of the set `T` of
/// images fixed so far, and the orbit structure needed to count canonical
/// representatives.
struct LevelData {
    h: PermGroup,
    gamma: PermGroup,
    /// `|H_T| / |Γ_T|`
    ratio: BigUint,
    /// For each point: the minimum of its `Γ_T`-orbit.
    gamma_min: Vec<usize>,
}

impl LevelData {
    fn new(h: PermGroup, gamma: PermGroup) -> Self {
        let ratio = h.order() / gamma.order();
        let mut gamma_min = vec![0; h.degree()];
        for orbit in gamma.orbits() {
            for &x in &orbit {
                gamma_min[x] = orbit[0];
            }
        }
        Self {
            h,
            gamma,
            ratio,
            gamma_min,
        }
    }

    /// Candidate values at the next position: minima of the `Γ_T`-orbits
    /// inside the `H_T`-orbit of `x`, ascending.
    fn candidates(&self, x: usize) -> Result<Vec<usize>> {
        let mut mins: Vec<usize> = self.h.orbit(x)?.into_iter().map(|y| self.gamma_min[y]).collect();
        mins.sort_unstable();
        mins.dedup();
        Ok(mins)
    }
}

/// Indexing of the left cosets of `Γ` in `H` by `0..|H|/|Γ|`, in the
/// lexicographic order of their canonical representatives.
pub struct CosetIndexing {
    h: PermGroup,
    gamma: PermGroup,
    count: BigUint,
    cache: RwLock<HashMap<Vec<usize>, Arc<LevelData>>>,
}

impl CosetIndexing {
    pub fn new(h: PermGroup, gamma: PermGroup) -> Result<Self> {
        if h.degree() != gamma.degree() {
            return Err(domain("H and Γ have different degrees"));
        }
        if !h.contains_group(&gamma) {
            return Err(domain("Γ is not a subgroup of H"));
        }
        let count = h.order() / gamma.order();
        let root = Arc::new(LevelData::new(h.clone(), gamma.clone()));
        let mut cache = HashMap::new();
        cache.insert(Vec::new(), root);
        Ok(Self {
            h,
            gamma,
            count,
            cache: RwLock::new(cache),
        })
    }

    /// Cosets of `Γ` in `S_n`.
    pub fn in_symmetric(gamma: PermGroup) -> Result<Self> {
        Self::new(PermGroup::symmetric(gamma.degree()), gamma)
    }

    pub fn h(&self) -> &PermGroup {
        &self.h
    }

    pub fn gamma(&self) -> &PermGroup {
        &self.gamma
    }

    pub fn degree(&self) -> usize {
        self.h.degree()
    }

    /// `|H| / |Γ|`.
    pub fn count(&self) -> &BigUint {
        &self.count
    }

    /// Level data for the sorted prefix set `key`, derived from `parent`
    /// by stabilizing `v`.
    fn level(&self, parent: &[usize], v: usize) -> Result<Arc<LevelData>> {
        let mut key = parent.to_vec();
        if let Err(pos) = key.binary_search(&v) {
            key.insert(pos, v);
        }
        if let Some(hit) = self.cache.read().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let up = self.root_or(parent)?;
        let data = Arc::new(LevelData::new(up.h.stabilizer(v)?, up.gamma.stabilizer(v)?));
        self.cache.write().unwrap().insert(key, data.clone());
        Ok(data)
    }

    fn root_or(&self, key: &[usize]) -> Result<Arc<LevelData>> {
        if let Some(hit) = self.cache.read().unwrap().get(key) {
            return Ok(hit.clone());
        }
        // rebuild along the key; every prefix is inserted on the way
        let mut acc: Vec<usize> = Vec::new();
        let mut data = self.cache.read().unwrap().get(&acc).unwrap().clone();
        for &v in key {
            data = self.level(&acc, v)?;
            acc.push(v);
            acc.sort_unstable();
        }
        Ok(data)
    }

    /// The canonical representative with index `i` (0-based).
    pub fn unrank(&self, i: &BigUint) -> Result<Permutation> {
        if i >= &self.count {
            return Err(range(format!("coset index {i} not below {}", self.count)));
        }
        let n = self.degree();
        let mut rest = i.clone();
        let mut sigma = Permutation::identity(n);
        let mut fixed: Vec<usize> = Vec::with_capacity(n);
        let mut data = self.root_or(&[])?;
        for k in 0..n {
            if data.ratio == BigUint::from(1u8) {
                // one coset left: the current σ is already canonical for it
                break;
            }
            let x = sigma.at(k);
            let mut chosen = None;
            for m in data.candidates(x)? {
                let child = self.level(&fixed, m)?;
                if rest < child.ratio {
                    chosen = Some((m, child));
                    break;
                }
                rest -= &child.ratio;
            }
            let (m, child) = chosen.ok_or_else(|| Error::Invariant("coset counts do not cover the index".into()))?;
            if m != x {
                let tau = data
                    .h
                    .transporter(x, m)?
                    .ok_or_else(|| Error::Invariant("candidate outside H-orbit".into()))?;
                sigma = sigma.then(&tau);
            }
            if let Err(pos) = fixed.binary_search(&m) {
                fixed.insert(pos, m);
            }
            data = child;
        }
        // the prefix is already canonical; finish the tail modulo Γ
        self.canonical(&sigma)
    }

    /// [`canonical_rep`] modulo `Γ`, reusing the cached stabilizers.
    pub fn canonical(&self, pi: &Permutation) -> Result<Permutation> {
        if pi.degree() != self.degree() {
            return Err(domain("permutation has the wrong degree"));
        }
        let mut current = pi.clone();
        let mut fixed: Vec<usize> = Vec::new();
        let mut data = self.root_or(&[])?;
        for k in 0..self.degree() {
            if data.gamma.is_trivial() {
                break;
            }
            let x = current.at(k);
            let m = data.gamma_min[x];
            if m != x {
                let tau = data
                    .gamma
                    .transporter(x, m)?
                    .ok_or_else(|| Error::Invariant("orbit minimum not reachable".into()))?;
                current = current.then(&tau);
            }
            data = self.level(&fixed, m)?;
            if let Err(pos) = fixed.binary_search(&m) {
                fixed.insert(pos, m);
            }
        }
        Ok(current)
    }

    /// Index of the coset `πΓ`; constant on each coset.
    pub fn rank(&self, pi: &Permutation) -> Result<BigUint> {
        if pi.degree() != self.degree() || !self.h.contains(pi) {
            return Err(domain(format!("{pi} is not an element of H")));
        }
        let rho = self.canonical(pi)?;
        let mut rank = BigUint::zero();
        let mut fixed: Vec<usize> = Vec::new();
        let mut data = self.root_or(&[])?;
        for k in 0..self.degree() {
            if data.ratio == BigUint::from(1u8) {
                break;
            }
            let target = rho.at(k);
            let mut found = false;
            for m in data.candidates(target)? {
                let child = self.level(&fixed, m)?;
                if m == target {
                    data = child;
                    found = true;
                    break;
                }
                rank += &child.ratio;
            }
            if !found {
                return Err(Error::Invariant(format!(
                    "canonical representative {rho} takes a non-minimal value at {k}"
                )));
            }
            if let Err(pos) = fixed.binary_search(&target) {
                fixed.insert(pos, target);
            }
        }
        Ok(rank)
    }
}

/// Normal form of the subgroup generated by `gens`: for each point `i`, in
/// order, and each other point `j` of the orbit of `i` under the pointwise
/// stabilizer `Γ_[i]` of `0..i`, the canonical representative of the left
/// coset `{ g ∈ Γ_[i] : g(j) = i }` of `Γ_[i+1]`.
///
/// Two lists generating the same subgroup produce the same output.
pub fn normal_form(degree: usize, gens: &[Permutation]) -> Result<Vec<Permutation>> {
    let mut current = PermGroup::new(degree, gens.to_vec())?;
    let mut out = Vec::new();
    for i in 0..degree {
        if current.is_trivial() {
            break;
        }
        let next = current.stabilizer(i)?;
        for j in current.orbit(i)? {
            if j == i {
                continue;
            }
            let g = current
                .transporter(j, i)?
                .ok_or_else(|| Error::Invariant("orbit point without transporter".into()))?;
            out.push(canonical_rep(&g, &next)?);
        }
        current = next;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cyc(n: usize, cycles: &[&[usize]]) -> Permutation {
        Permutation::from_cycles(n, cycles).unwrap()
    }

    #[test]
    fn canonical_rep_trivial_and_full() {
        let pi = Permutation::from_one_based(&[3, 1, 4, 2]).unwrap();
        assert_eq!(canonical_rep(&pi, &PermGroup::trivial(4)).unwrap(), pi);
        assert!(canonical_rep(&pi, &PermGroup::symmetric(4)).unwrap().is_identity());
        assert!(canonical_rep(&pi, &PermGroup::trivial(3)).is_err());
    }

    #[test]
    fn s3_mod_transposition() {
        let gamma = PermGroup::new(3, vec![cyc(3, &[&[1, 2]])]).unwrap();
        let idx = CosetIndexing::in_symmetric(gamma.clone()).unwrap();
        assert_eq!(idx.count(), &BigUint::from(3u8));
        let reps: Vec<_> = (0..3u8).map(|i| idx.unrank(&BigUint::from(i)).unwrap()).collect();
        assert!(reps[0].is_identity());
        assert!(reps[0] < reps[1] && reps[1] < reps[2]);
        for r in &reps {
            assert_eq!(&canonical_rep(r, &gamma).unwrap(), r);
        }
        assert!(matches!(idx.unrank(&BigUint::from(3u8)), Err(Error::Range(_))));
    }

    #[test]
    fn rank_requires_membership() {
        let h = PermGroup::new(4, vec![cyc(4, &[&[1, 2, 3, 4]])]).unwrap();
        let idx = CosetIndexing::new(h, PermGroup::trivial(4)).unwrap();
        assert!(matches!(idx.rank(&cyc(4, &[&[1, 2]])), Err(Error::Domain(_))));
        assert!(idx.rank(&Permutation::identity(4)).unwrap().is_zero());
    }

    #[test]
    fn rejects_non_subgroup() {
        let h = PermGroup::new(3, vec![cyc(3, &[&[1, 2, 3]])]).unwrap();
        let g = PermGroup::new(3, vec![cyc(3, &[&[1, 2]])]).unwrap();
        assert!(CosetIndexing::new(h, g).is_err());
    }

    #[test]
    fn lehmer_is_the_trivial_subgroup_case() {
        let idx = CosetIndexing::in_symmetric(PermGroup::trivial(5)).unwrap();
        for (k, p) in Permutation::all(5).enumerate() {
            assert_eq!(idx.rank(&p).unwrap(), BigUint::from(k));
            assert_eq!(idx.unrank(&BigUint::from(k)).unwrap(), p);
        }
    }

    #[test]
    fn normal_form_examples() {
        assert!(normal_form(4, &[]).unwrap().is_empty());
        let a = normal_form(3, &[cyc(3, &[&[1, 2]]), cyc(3, &[&[1, 3]])]).unwrap();
        let b = normal_form(3, &[cyc(3, &[&[1, 2]]), cyc(3, &[&[1, 2, 3]])]).unwrap();
        assert_eq!(a, b);
        let g = PermGroup::new(3, a).unwrap();
        assert!(g.same_group(&PermGroup::symmetric(3)));
    }
}
