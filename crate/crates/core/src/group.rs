//! Permutation groups given by generators.
//!
//! Queries are answered from a stabilizer chain built by deterministic
//! Schreier–Sims. The default base is `0, 1, …, n-1`; stabilizer
//! computations put the stabilized point first and reuse the tail of that
//! chain for the result.

use std::collections::VecDeque;
use std::fmt;
use std::sync::OnceLock;

use num_bigint::BigUint;
use num_traits::One;
use rand::Rng;

use crate::error::{domain, parse, Error, Result};
use crate::perm::Permutation;

#[derive(Clone, Debug)]
struct Level {
    base: usize,
    gens: Vec<Permutation>,
    /// `trans[x]` maps `base` to `x`, for `x` in the basic orbit.
    trans: Vec<Option<Permutation>>,
    orbit: Vec<usize>,
}

impl Level {
    fn new(base: usize, n: usize) -> Self {
        let mut trans = vec![None; n];
        trans[base] = Some(Permutation::identity(n));
        Self {
            base,
            gens: Vec::new(),
            trans,
            orbit: vec![base],
        }
    }

    /// Closes the basic orbit under the current generators.
    fn close_orbit(&mut self) {
        let mut i = 0;
        while i < self.orbit.len() {
            let x = self.orbit[i];
            for s in &self.gens {
                let y = s.at(x);
                if self.trans[y].is_none() {
                    let u = self.trans[x].as_ref().unwrap().then(s);
                    self.trans[y] = Some(u);
                    self.orbit.push(y);
                }
            }
            i += 1;
        }
    }
}

#[derive(Clone, Debug)]
struct StabChain {
    levels: Vec<Level>,
}

impl StabChain {
    fn build(n: usize, base: &[usize], gens: &[Permutation]) -> Self {
        let mut chain = StabChain {
            levels: base.iter().map(|&b| Level::new(b, n)).collect(),
        };
        for g in gens {
            let (residue, depth) = chain.sift(g, 0);
            if !residue.is_identity() {
                chain.extend(0, depth, residue);
            }
        }
        chain
    }

    /// Sifts `g` from level `from` on; returns the residue and the level at
    /// which sifting stopped (`levels.len()` when it went all the way).
    fn sift(&self, g: &Permutation, from: usize) -> (Permutation, usize) {
        let mut g = g.clone();
        for (i, level) in self.levels.iter().enumerate().skip(from) {
            let x = g.at(level.base);
            match &level.trans[x] {
                Some(u) => g = g.then(&u.inverse()),
                None => return (g, i),
            }
        }
        (g, self.levels.len())
    }

    fn schreier_pass(&mut self, i: usize) {
        loop {
            let level = &self.levels[i];
            let mut pending = None;
            'outer: for &x in &level.orbit {
                let ux = level.trans[x].as_ref().unwrap();
                for s in &level.gens {
                    let y = s.at(x);
                    let uy = level.trans[y].as_ref().unwrap();
                    let schreier = ux.then(s).then(&uy.inverse());
                    if schreier.is_identity() {
                        continue;
                    }
                    let (residue, depth) = self.sift(&schreier, i + 1);
                    if !residue.is_identity() {
                        pending = Some((depth, residue));
                        break 'outer;
                    }
                }
            }
            match pending {
                // strictly deeper than i, so extend cannot loop on this level
                Some((depth, residue)) => self.extend(i + 1, depth, residue),
                None => return,
            }
        }
    }

    /// Adds `g` as a strong generator on levels `from..=depth` (it fixes the
    /// base points before `depth`), then restores the chain property on
    /// those levels by sifting their Schreier generators.
    fn extend(&mut self, from: usize, depth: usize, g: Permutation) {
        let target = depth.min(self.levels.len() - 1);
        for level in &mut self.levels[from..=target] {
            if level.gens.iter().any(|s| s == &g) {
                continue;
            }
            level.gens.push(g.clone());
            level.close_orbit();
        }
        for i in (from..=target).rev() {
            self.schreier_pass(i);
        }
    }

    fn order(&self) -> BigUint {
        self.levels
            .iter()
            .fold(BigUint::one(), |acc, l| acc * BigUint::from(l.orbit.len()))
    }
}

/// A subgroup of `S_n` given by a generator list.
#[derive(Clone)]
pub struct PermGroup {
    degree: usize,
    generators: Vec<Permutation>,
    base_prefix: Vec<usize>,
    chain: OnceLock<StabChain>,
}

impl PermGroup {
    pub fn new(degree: usize, generators: Vec<Permutation>) -> Result<Self> {
        if let Some(g) = generators.iter().find(|g| g.degree() != degree) {
            return Err(domain(format!(
                "generator {g} has degree {}, expected {degree}",
                g.degree()
            )));
        }
        Ok(Self {
            degree,
            generators,
            base_prefix: Vec::new(),
            chain: OnceLock::new(),
        })
    }

    pub fn trivial(degree: usize) -> Self {
        Self::new(degree, Vec::new()).unwrap()
    }

    /// The full symmetric group on `degree` points.
    pub fn symmetric(degree: usize) -> Self {
        let mut gens = Vec::new();
        if degree >= 2 {
            gens.push(Permutation::from_cycles(degree, &[&[1, 2]]).unwrap());
        }
        if degree >= 3 {
            let cycle: Vec<usize> = (1..=degree).collect();
            gens.push(Permutation::from_cycles(degree, &[&cycle]).unwrap());
        }
        Self::new(degree, gens).unwrap()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn generators(&self) -> &[Permutation] {
        &self.generators
    }

    fn base(&self) -> Vec<usize> {
        let mut base = self.base_prefix.clone();
        base.extend((0..self.degree).filter(|p| !self.base_prefix.contains(p)));
        base
    }

    fn chain(&self) -> &StabChain {
        self.chain
            .get_or_init(|| StabChain::build(self.degree, &self.base(), &self.generators))
    }

    pub fn order(&self) -> BigUint {
        self.chain().order()
    }

    pub fn is_trivial(&self) -> bool {
        self.generators.iter().all(Permutation::is_identity)
    }

    fn check_point(&self, i: usize) -> Result<()> {
        if i >= self.degree {
            return Err(domain(format!("point {i} outside 0..{}", self.degree)));
        }
        Ok(())
    }

    /// Orbit of `i` with a transversal: `trans[x]` maps `i` to `x`.
    fn orbit_with_transversal(&self, i: usize) -> (Vec<usize>, Vec<Option<Permutation>>) {
        let mut trans = vec![None; self.degree];
        trans[i] = Some(Permutation::identity(self.degree));
        let mut orbit = vec![i];
        let mut queue = VecDeque::from([i]);
        while let Some(x) = queue.pop_front() {
            for s in &self.generators {
                let y = s.at(x);
                if trans[y].is_none() {
                    trans[y] = Some(trans[x].as_ref().unwrap().then(s));
                    orbit.push(y);
                    queue.push_back(y);
                }
            }
        }
        (orbit, trans)
    }

    /// The orbit of the 0-based point `i`, sorted ascending.
    pub fn orbit(&self, i: usize) -> Result<Vec<usize>> {
        self.check_point(i)?;
        let mut orbit = self.orbit_with_transversal(i).0;
        orbit.sort_unstable();
        Ok(orbit)
    }

    /// Orbits of all points, each sorted, ordered by their minimum.
    pub fn orbits(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.degree];
        let mut out = Vec::new();
        for p in 0..self.degree {
            if seen[p] {
                continue;
            }
            let mut orbit = self.orbit_with_transversal(p).0;
            orbit.sort_unstable();
            for &x in &orbit {
                seen[x] = true;
            }
            out.push(orbit);
        }
        out
    }

    /// Some `g` in the group with `g(u) = v`, or `None` when `v` is not in
    /// the orbit of `u`.
    pub fn transporter(&self, u: usize, v: usize) -> Result<Option<Permutation>> {
        self.check_point(u)?;
        self.check_point(v)?;
        if u == v {
            return Ok(Some(Permutation::identity(self.degree)));
        }
        let (_, mut trans) = self.orbit_with_transversal(u);
        Ok(trans[v].take())
    }

    /// Generators for the stabilizer of `v`.
    pub fn stabilizer(&self, v: usize) -> Result<PermGroup> {
        self.check_point(v)?;
        let mut prefix = vec![v];
        prefix.extend(self.base_prefix.iter().copied().filter(|&p| p != v));
        let chain = if self.base_prefix.first() == Some(&v) {
            self.chain().clone()
        } else {
            let probe = PermGroup {
                degree: self.degree,
                generators: self.generators.clone(),
                base_prefix: prefix.clone(),
                chain: OnceLock::new(),
            };
            probe.chain().clone()
        };
        let tail: Vec<Level> = chain.levels[1..].to_vec();
        let mut gens: Vec<Permutation> = Vec::new();
        for level in &tail {
            for g in &level.gens {
                if !gens.contains(g) {
                    gens.push(g.clone());
                }
            }
        }
        let result = PermGroup {
            degree: self.degree,
            generators: gens,
            base_prefix: prefix[1..].to_vec(),
            chain: OnceLock::new(),
        };
        // the tail is a valid chain for the stabilizer over the remaining base
        let _ = result.chain.set(StabChain { levels: tail });
        Ok(result)
    }

    /// Pointwise stabilizer of a set of points.
    pub fn pointwise_stabilizer(&self, points: &[usize]) -> Result<PermGroup> {
        let mut g = self.clone();
        for &p in points {
            g = g.stabilizer(p)?;
        }
        Ok(g)
    }

    pub fn contains(&self, p: &Permutation) -> bool {
        if p.degree() != self.degree {
            return false;
        }
        let chain = self.chain();
        let (residue, _) = chain.sift(p, 0);
        residue.is_identity()
    }

    /// True when every generator of `other` lies in `self`.
    pub fn contains_group(&self, other: &PermGroup) -> bool {
        other.generators.iter().all(|g| self.contains(g))
    }

    pub fn same_group(&self, other: &PermGroup) -> bool {
        self.degree == other.degree
            && self.order() == other.order()
            && self.contains_group(other)
    }

    /// A minimal-ish generating list: each kept generator enlarges the group
    /// generated by the ones kept before it.
    pub fn reduced_generators(&self) -> Vec<Permutation> {
        let mut kept: Vec<Permutation> = Vec::new();
        let mut current = PermGroup::trivial(self.degree);
        for g in &self.generators {
            if !current.contains(g) {
                kept.push(g.clone());
                current = PermGroup::new(self.degree, kept.clone()).unwrap();
            }
        }
        kept
    }

    /// All elements, by walking the stabilizer chain. Intended for small
    /// groups only.
    pub fn elements(&self) -> Vec<Permutation> {
        let chain = self.chain();
        let mut out = vec![Permutation::identity(self.degree)];
        for level in chain.levels.iter().rev() {
            let mut next = Vec::with_capacity(out.len() * level.orbit.len());
            for g in &out {
                for &x in &level.orbit {
                    next.push(g.then(level.trans[x].as_ref().unwrap()));
                }
            }
            out = next;
        }
        out
    }

    /// Parses the generator-list text format: a header line `n k` followed
    /// by `k` permutation lines.
    pub fn parse(text: &str) -> Result<Self> {
        let (n, gens) = parse_generator_list(text)?;
        PermGroup::new(n, gens)
    }
}

impl fmt::Debug for PermGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PermGroup")
            .field("degree", &self.degree)
            .field("generators", &self.generators)
            .finish()
    }
}

impl fmt::Display for PermGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_generator_list(self.degree, &self.generators))
    }
}

pub fn format_generator_list(n: usize, gens: &[Permutation]) -> String {
    let mut out = format!("{} {}\n", n, gens.len());
    for g in gens {
        out.push_str(&g.to_string());
        out.push('\n');
    }
    out
}

pub fn parse_generator_list(text: &str) -> Result<(usize, Vec<Permutation>)> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| parse(1, "missing 'n k' header"))?;
    let nums: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|e| parse(1, format!("bad header field {t:?}: {e}"))))
        .collect::<Result<_>>()?;
    let [n, k] = nums[..] else {
        return Err(parse(1, "header must be 'n k'"));
    };
    let mut gens = Vec::with_capacity(k);
    for _ in 0..k {
        let (idx, line) = lines
            .next()
            .ok_or_else(|| parse(0, format!("expected {k} generator lines")))?;
        let g: Permutation = line.parse().map_err(|e: Error| parse(idx + 1, e.to_string()))?;
        if g.degree() != n {
            return Err(parse(idx + 1, format!("generator has degree {}, expected {n}", g.degree())));
        }
        gens.push(g);
    }
    if let Some((idx, _)) = lines.next() {
        return Err(parse(idx + 1, "trailing content after generator list"));
    }
    Ok((n, gens))
}

/// `h₁^{r₁} h₂^{r₂} ⋯ h_k^{r_k}` for independent uniform bits `r_i`.
pub fn random_subproduct<R: Rng + ?Sized>(list: &[Permutation], rng: &mut R) -> Result<Permutation> {
    let first = list.first().ok_or_else(|| domain("random subproduct of an empty list"))?;
    let mut acc = Permutation::identity(first.degree());
    for h in list {
        if rng.gen::<bool>() {
            acc = acc.compose(h)?;
        }
    }
    Ok(acc)
}

/// Near-uniform sampler built from an Erdős–Rényi style list: the list is
/// seeded with the generators and lengthened by random subproducts of
/// itself; each draw is one random subproduct of the final list.
///
/// No uniformity bound is claimed; the distribution is validated
/// empirically at small scale.
#[derive(Clone, Debug)]
pub struct NearUniformSampler {
    degree: usize,
    list: Vec<Permutation>,
}

impl NearUniformSampler {
    pub fn new<R: Rng + ?Sized>(group: &PermGroup, rng: &mut R) -> Self {
        let degree = group.degree();
        let mut list: Vec<Permutation> = group
            .generators()
            .iter()
            .filter(|g| !g.is_identity())
            .cloned()
            .collect();
        if list.is_empty() {
            return Self { degree, list };
        }
        let log_order = group.order().bits() as usize;
        let target = log_order * log_order + degree + 16;
        while list.len() < target {
            let next = random_subproduct(&list, rng).expect("nonempty list");
            list.push(next);
        }
        Self { degree, list }
    }

    pub fn list_len(&self) -> usize {
        self.list.len()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Permutation {
        if self.list.is_empty() {
            return Permutation::identity(self.degree);
        }
        random_subproduct(&self.list, rng).expect("nonempty list")
    }
}

/// One near-uniform element of `group`. Builds a fresh sampler; callers
/// drawing many elements should keep a [`NearUniformSampler`] instead.
pub fn near_uniform_element<R: Rng + ?Sized>(group: &PermGroup, rng: &mut R) -> Permutation {
    NearUniformSampler::new(group, rng).sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cyc(n: usize, cycles: &[&[usize]]) -> Permutation {
        Permutation::from_cycles(n, cycles).unwrap()
    }

    fn group(n: usize, gens: Vec<Permutation>) -> PermGroup {
        PermGroup::new(n, gens).unwrap()
    }

    #[test]
    fn order_examples() {
        assert_eq!(PermGroup::trivial(5).order(), BigUint::from(1u8));
        let s3 = group(3, vec![cyc(3, &[&[1, 2]]), cyc(3, &[&[1, 2, 3]])]);
        assert_eq!(s3.order(), BigUint::from(6u8));
        let klein = group(4, vec![cyc(4, &[&[1, 2], &[3, 4]]), cyc(4, &[&[1, 3], &[2, 4]])]);
        assert_eq!(klein.order(), BigUint::from(4u8));
        assert_eq!(PermGroup::symmetric(7).order(), BigUint::from(5040u32));
    }

    #[test]
    fn orbit_examples() {
        assert_eq!(PermGroup::trivial(4).orbit(2).unwrap(), vec![2]);
        let c3 = group(3, vec![cyc(3, &[&[1, 2, 3]])]);
        assert_eq!(c3.orbit(0).unwrap(), vec![0, 1, 2]);
        let t = group(4, vec![cyc(4, &[&[1, 2]])]);
        assert_eq!(t.orbit(3).unwrap(), vec![3]);
        assert!(t.orbit(4).is_err());
    }

    #[test]
    fn transporter_examples() {
        let c3 = group(3, vec![cyc(3, &[&[1, 2, 3]])]);
        assert!(c3.transporter(1, 1).unwrap().unwrap().is_identity());
        let g = c3.transporter(0, 2).unwrap().unwrap();
        assert_eq!(g.at(0), 2);
        assert!(c3.contains(&g));
        let t = group(3, vec![cyc(3, &[&[1, 2]])]);
        assert!(t.transporter(0, 2).unwrap().is_none());
    }

    #[test]
    fn stabilizer_examples() {
        assert!(PermGroup::trivial(3).stabilizer(1).unwrap().order() == BigUint::one());
        let s3 = PermGroup::symmetric(3);
        let st = s3.stabilizer(0).unwrap();
        assert_eq!(st.order(), BigUint::from(2u8));
        assert!(st.generators().iter().all(|g| g.at(0) == 0));
    }

    #[test]
    fn contains_examples() {
        let c3 = group(3, vec![cyc(3, &[&[1, 2, 3]])]);
        assert!(c3.contains(&Permutation::identity(3)));
        assert!(!c3.contains(&cyc(3, &[&[1, 2]])));
        let s3 = group(3, vec![cyc(3, &[&[1, 2]]), cyc(3, &[&[1, 2, 3]])]);
        assert!(Permutation::all(3).all(|p| s3.contains(&p)));
    }

    #[test]
    fn chained_stabilizers_keep_orbit_stabilizer() {
        let s6 = PermGroup::symmetric(6);
        let st = s6.pointwise_stabilizer(&[3, 0, 5]).unwrap();
        assert_eq!(st.order(), BigUint::from(6u8));
        let st2 = st.stabilizer(1).unwrap();
        assert_eq!(st2.order(), BigUint::from(2u8));
        assert!(st2.contains(&cyc(6, &[&[3, 5]])));
        assert!(!st2.contains(&cyc(6, &[&[2, 3]])));
    }

    #[test]
    fn elements_enumerates_group() {
        let g = group(5, vec![cyc(5, &[&[1, 2, 3, 4, 5]]), cyc(5, &[&[2, 5], &[3, 4]])]);
        let els = g.elements();
        assert_eq!(els.len(), 10);
        let mut dedup = els.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), 10);
        assert!(els.iter().all(|e| g.contains(e)));
    }

    #[test]
    fn random_subproduct_statistics() {
        let t = cyc(2, &[&[1, 2]]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 10_000;
        let swaps = (0..draws)
            .filter(|_| !random_subproduct(std::slice::from_ref(&t), &mut rng).unwrap().is_identity())
            .count();
        let frac = swaps as f64 / draws as f64;
        assert!((frac - 0.5).abs() <= 0.05, "{frac}");
        assert!(random_subproduct(&[], &mut rng).is_err());
    }

    #[test]
    fn subproduct_always_member() {
        let gens = vec![cyc(5, &[&[1, 2, 3]]), cyc(5, &[&[3, 4, 5]])];
        let g = group(5, gens.clone());
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            assert!(g.contains(&random_subproduct(&gens, &mut rng).unwrap()));
        }
    }

    #[test]
    fn generator_list_text_round_trip() {
        let g = group(4, vec![cyc(4, &[&[1, 2]]), cyc(4, &[&[1, 2, 3, 4]])]);
        let text = g.to_string();
        assert_eq!(text, "4 2\n2 1 3 4\n2 3 4 1\n");
        let back = PermGroup::parse(&text).unwrap();
        assert_eq!(back.generators(), g.generators());
        assert!(PermGroup::parse("3 1\n1 2\n").is_err());
        assert!(PermGroup::parse("3 2\n1 2 3\n").is_err());
    }

    #[test]
    fn reduced_generators_drop_redundancy() {
        let a = cyc(4, &[&[1, 2]]);
        let b = cyc(4, &[&[1, 2, 3, 4]]);
        let g = group(4, vec![a.clone(), a.clone(), b.clone(), a.then(&b)]);
        assert_eq!(g.reduced_generators(), vec![a, b]);
    }
}
