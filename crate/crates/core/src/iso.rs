//! Isomorphism problems as group actions: graphs and linear codes under
//! coordinate permutations, permutation groups under conjugation in S_n,
//! and matrix spaces under conjugation by GL_n(F_q).
//!
//! Actions follow the composition convention of [`Permutation::then`]:
//! `act(g·h, w) = act(h, act(g, w))`. For matrices `g·h` is the matrix
//! product `h·g`, so that `X` acts by `V ↦ X V X⁻¹`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::bits::{index_width, width_for, BitString};
use crate::coset::normal_form;
use crate::error::{domain, parse, Error, Result};
use crate::fq::{gl_order, gl_rank, gl_unrank, is_prime, random_gl, MatrixFq};
use crate::group::{format_generator_list, parse_generator_list, PermGroup};
use crate::perm::{factorial, Permutation};

/// Groups larger than this are never enumerated.
pub const ENUMERATION_LIMIT: u64 = 1 << 22;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Kind {
    Graph,
    LinearCode,
    PermGroupConjugacy,
    MatrixSubspace,
}

impl Kind {
    pub const ALL: [Kind; 4] = [
        Kind::Graph,
        Kind::LinearCode,
        Kind::PermGroupConjugacy,
        Kind::MatrixSubspace,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Graph => "graph",
            Kind::LinearCode => "linear-code",
            Kind::PermGroupConjugacy => "perm-group-conjugacy",
            Kind::MatrixSubspace => "matrix-subspace",
        }
    }

    pub fn tag(self) -> u64 {
        Kind::ALL.iter().position(|&k| k == self).unwrap() as u64
    }

    pub fn from_tag(tag: u64) -> Result<Kind> {
        Kind::ALL
            .get(tag as usize)
            .copied()
            .ok_or_else(|| domain(format!("unknown kind tag {tag}")))
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Kind> {
        Kind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| parse(1, format!("unknown kind {:?}", s.trim())))
    }
}

/// Element of S_n or of GL_n(F_q).
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum GroupElement {
    Perm(Permutation),
    Matrix(MatrixFq),
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupElement::Perm(p) => write!(f, "{p}"),
            GroupElement::Matrix(m) => write!(f, "{m}"),
        }
    }
}

/// The acting group of an instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ActingGroup {
    Symmetric(usize),
    General { n: usize, q: u64 },
}

fn vec_index(v: &[u64], q: u64) -> usize {
    v.iter().rev().fold(0usize, |acc, &d| acc * q as usize + d as usize) - 1
}

fn vec_from_index(k: usize, n: usize, q: u64) -> Vec<u64> {
    let mut x = k + 1;
    (0..n)
        .map(|_| {
            let d = (x % q as usize) as u64;
            x /= q as usize;
            d
        })
        .collect()
}

fn primitive_root(q: u64) -> u64 {
    (1..q)
        .find(|&g| {
            let mut x = 1u64;
            (1..q - 1).all(|_| {
                x = x * g % q;
                x != 1
            })
        })
        .unwrap_or(1)
}

impl ActingGroup {
    pub fn order(&self) -> BigUint {
        match *self {
            ActingGroup::Symmetric(n) => factorial(n),
            ActingGroup::General { n, q } => gl_order(n, q).expect("validated modulus"),
        }
    }

    /// Bits of one element written as its rank.
    pub fn element_bits(&self) -> usize {
        index_width(&self.order())
    }

    pub fn identity(&self) -> GroupElement {
        match *self {
            ActingGroup::Symmetric(n) => GroupElement::Perm(Permutation::identity(n)),
            ActingGroup::General { n, q } => GroupElement::Matrix(MatrixFq::identity(q, n).expect("validated modulus")),
        }
    }

    pub fn check(&self, g: &GroupElement) -> Result<()> {
        let ok = match (self, g) {
            (ActingGroup::Symmetric(n), GroupElement::Perm(p)) => p.degree() == *n,
            (ActingGroup::General { n, q }, GroupElement::Matrix(m)) => {
                m.q() == *q && m.rows() == *n && m.cols() == *n && m.is_invertible()
            }
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(domain(format!("{g} is not an element of {self:?}")))
        }
    }

    /// `g·h`: apply `g` first.
    pub fn compose(&self, g: &GroupElement, h: &GroupElement) -> Result<GroupElement> {
        match (g, h) {
            (GroupElement::Perm(a), GroupElement::Perm(b)) => Ok(GroupElement::Perm(a.compose(b)?)),
            (GroupElement::Matrix(a), GroupElement::Matrix(b)) => Ok(GroupElement::Matrix(b.mul(a)?)),
            _ => Err(domain("mixed group elements")),
        }
    }

    pub fn inverse(&self, g: &GroupElement) -> Result<GroupElement> {
        match g {
            GroupElement::Perm(p) => Ok(GroupElement::Perm(p.inverse())),
            GroupElement::Matrix(m) => Ok(GroupElement::Matrix(m.inverse()?)),
        }
    }

    /// Uniform element.
    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> GroupElement {
        match *self {
            ActingGroup::Symmetric(n) => {
                let mut images: Vec<usize> = (0..n).collect();
                images.shuffle(rng);
                GroupElement::Perm(Permutation::from_images(images).unwrap())
            }
            ActingGroup::General { n, q } => GroupElement::Matrix(random_gl(n, q, rng).unwrap()),
        }
    }

    pub fn rank(&self, g: &GroupElement) -> Result<BigUint> {
        self.check(g)?;
        match g {
            GroupElement::Perm(p) => Ok(p.lehmer_rank()),
            GroupElement::Matrix(m) => gl_rank(m),
        }
    }

    pub fn unrank(&self, k: &BigUint) -> Result<GroupElement> {
        match *self {
            ActingGroup::Symmetric(n) => Ok(GroupElement::Perm(Permutation::lehmer_unrank(k, n)?)),
            ActingGroup::General { n, q } => Ok(GroupElement::Matrix(gl_unrank(k, n, q)?)),
        }
    }

    /// Every element, in rank order. Refuses large groups.
    pub fn elements(&self) -> Result<Vec<GroupElement>> {
        let order = self.order();
        match order.to_u64() {
            Some(o) if o <= ENUMERATION_LIMIT => {}
            _ => return Err(domain(format!("group of order {order} is too large to enumerate"))),
        }
        match *self {
            ActingGroup::Symmetric(n) => Ok(Permutation::all(n).map(GroupElement::Perm).collect()),
            ActingGroup::General { .. } => {
                let o = order.to_u64().unwrap();
                (0..o).map(|k| self.unrank(&BigUint::from(k))).collect()
            }
        }
    }

    /// Degree of the permutation representation: `n` for S_n, the
    /// `q^n − 1` nonzero column vectors for GL_n(F_q).
    pub fn perm_degree(&self) -> usize {
        match *self {
            ActingGroup::Symmetric(n) => n,
            ActingGroup::General { n, q } => (q as usize).pow(n as u32) - 1,
        }
    }

    /// Faithful permutation representation; for matrices `v ↦ Xv`.
    pub fn to_perm(&self, g: &GroupElement) -> Result<Permutation> {
        self.check(g)?;
        match (self, g) {
            (ActingGroup::Symmetric(_), GroupElement::Perm(p)) => Ok(p.clone()),
            (&ActingGroup::General { n, q }, GroupElement::Matrix(m)) => {
                let images = (0..self.perm_degree())
                    .map(|k| {
                        let v = vec_from_index(k, n, q);
                        let w: Vec<u64> = (0..n)
                            .map(|r| (0..n).map(|c| m.get(r, c) * v[c]).sum::<u64>() % q)
                            .collect();
                        vec_index(&w, q)
                    })
                    .collect();
                Permutation::from_images(images)
            }
            _ => unreachable!(),
        }
    }

    /// Inverse of [`to_perm`](Self::to_perm) on its image.
    pub fn from_perm(&self, p: &Permutation) -> Result<GroupElement> {
        if p.degree() != self.perm_degree() {
            return Err(domain("permutation has the wrong degree"));
        }
        match *self {
            ActingGroup::Symmetric(_) => Ok(GroupElement::Perm(p.clone())),
            ActingGroup::General { n, q } => {
                let mut m = MatrixFq::zero(q, n, n)?;
                for c in 0..n {
                    let mut e = vec![0u64; n];
                    e[c] = 1;
                    let col = vec_from_index(p.at(vec_index(&e, q)), n, q);
                    for (r, &x) in col.iter().enumerate() {
                        m.set(r, c, x);
                    }
                }
                let g = GroupElement::Matrix(m);
                if &self.to_perm(&g)? != p {
                    return Err(domain("permutation is not induced by a matrix"));
                }
                Ok(g)
            }
        }
    }

    /// The group itself in its permutation representation.
    pub fn perm_group(&self) -> PermGroup {
        match *self {
            ActingGroup::Symmetric(n) => PermGroup::symmetric(n),
            ActingGroup::General { n, q } => {
                let mut gens = Vec::new();
                for i in 0..n {
                    for j in 0..n {
                        if i != j {
                            let mut t = MatrixFq::identity(q, n).unwrap();
                            t.set(i, j, 1);
                            gens.push(GroupElement::Matrix(t));
                        }
                    }
                }
                if q > 2 {
                    let mut d = MatrixFq::identity(q, n).unwrap();
                    d.set(0, 0, primitive_root(q));
                    gens.push(GroupElement::Matrix(d));
                }
                let perms = gens.iter().map(|g| self.to_perm(g).unwrap()).collect();
                PermGroup::new(self.perm_degree(), perms).unwrap()
            }
        }
    }
}

/// An object in the universe of one of the four kinds.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum UniverseElement {
    /// Adjacency matrix, row-major.
    Graph { n: usize, adj: Vec<bool> },
    /// Generator matrix, `d × n`.
    Code(MatrixFq),
    Subgroup { n: usize, gens: Vec<Permutation> },
    /// Basis of a `d`-dimensional space of `n × n` matrices.
    MatrixSpace { n: usize, q: u64, basis: Vec<MatrixFq> },
}

/// Shape parameters shared by all objects of one universe.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Dims {
    pub kind: Kind,
    pub n: usize,
    pub q: u64,
    pub d: usize,
}

impl Dims {
    pub fn group(&self) -> ActingGroup {
        match self.kind {
            Kind::MatrixSubspace => ActingGroup::General { n: self.n, q: self.q },
            _ => ActingGroup::Symmetric(self.n),
        }
    }

    fn entry_bits(&self) -> usize {
        width_for(self.q)
    }

    /// Length of the canonical bit string.
    pub fn invariant_len(&self) -> usize {
        match self.kind {
            Kind::Graph => self.n * self.n,
            Kind::LinearCode => self.d * self.n * self.entry_bits(),
            Kind::PermGroupConjugacy => self.n * self.n.saturating_sub(1) / 2 * index_width(&factorial(self.n)),
            Kind::MatrixSubspace => self.d * self.n * self.n * self.entry_bits(),
        }
    }

    /// Self-delimiting header: kind tag then the kind's dimensions.
    pub fn write(&self, out: &mut BitString) {
        out.push_uint(self.kind.tag(), 2);
        out.push_gamma(self.n as u64);
        if matches!(self.kind, Kind::LinearCode | Kind::MatrixSubspace) {
            out.push_gamma(self.q);
            out.push_gamma(self.d as u64);
        }
    }

    pub fn read(r: &mut crate::bits::BitReader<'_>) -> Result<Dims> {
        let kind = Kind::from_tag(r.read_uint(2)?)?;
        let n = r.read_gamma()? as usize;
        let (q, d) = if matches!(kind, Kind::LinearCode | Kind::MatrixSubspace) {
            (r.read_gamma()?, r.read_gamma()? as usize)
        } else {
            (0, 0)
        };
        if q != 0 && !is_prime(q) {
            return Err(domain(format!("modulus {q} is not prime")));
        }
        if n > 64 || (q != 0 && (q as usize).checked_pow(n as u32).is_none()) {
            return Err(domain("dimensions out of range"));
        }
        Ok(Dims { kind, n, q, d })
    }
}

fn rref_bits(m: &MatrixFq, w: usize, out: &mut BitString) {
    for &e in m.rref().entries() {
        out.push_uint(e, w);
    }
}

fn flatten(n: usize, q: u64, basis: &[MatrixFq]) -> Result<MatrixFq> {
    let rows: Vec<Vec<u64>> = basis.iter().map(|b| b.entries().to_vec()).collect();
    if rows.is_empty() {
        return MatrixFq::zero(q, 0, n * n);
    }
    MatrixFq::from_rows(q, &rows)
}

impl UniverseElement {
    pub fn kind(&self) -> Kind {
        match self {
            UniverseElement::Graph { .. } => Kind::Graph,
            UniverseElement::Code(_) => Kind::LinearCode,
            UniverseElement::Subgroup { .. } => Kind::PermGroupConjugacy,
            UniverseElement::MatrixSpace { .. } => Kind::MatrixSubspace,
        }
    }

    pub fn dims(&self) -> Dims {
        let kind = self.kind();
        match self {
            UniverseElement::Graph { n, .. } | UniverseElement::Subgroup { n, .. } => Dims { kind, n: *n, q: 0, d: 0 },
            UniverseElement::Code(m) => Dims {
                kind,
                n: m.cols(),
                q: m.q(),
                d: m.rows(),
            },
            UniverseElement::MatrixSpace { n, q, basis } => Dims {
                kind,
                n: *n,
                q: *q,
                d: basis.len(),
            },
        }
    }

    pub fn group(&self) -> ActingGroup {
        self.dims().group()
    }

    pub fn graph(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adj = vec![false; n * n];
        for &(a, b) in edges {
            if a >= n || b >= n || a == b {
                return Err(domain(format!("bad edge ({a}, {b}) on {n} vertices")));
            }
            adj[a * n + b] = true;
            adj[b * n + a] = true;
        }
        Ok(UniverseElement::Graph { n, adj })
    }

    /// Checks the kind-specific well-formedness conditions.
    pub fn validate(&self) -> Result<()> {
        match self {
            UniverseElement::Graph { n, adj } => {
                if adj.len() != n * n {
                    return Err(domain("adjacency matrix has the wrong size"));
                }
                for i in 0..*n {
                    if adj[i * n + i] {
                        return Err(domain(format!("loop at vertex {}", i + 1)));
                    }
                    for j in 0..i {
                        if adj[i * n + j] != adj[j * n + i] {
                            return Err(domain("adjacency matrix is not symmetric"));
                        }
                    }
                }
            }
            UniverseElement::Code(m) => {
                if m.rank() != m.rows() {
                    return Err(domain("generator matrix does not have full row rank"));
                }
            }
            UniverseElement::Subgroup { n, gens } => {
                if gens.iter().any(|g| g.degree() != *n) {
                    return Err(domain("generator of the wrong degree"));
                }
            }
            UniverseElement::MatrixSpace { n, q, basis } => {
                if basis.iter().any(|b| b.rows() != *n || b.cols() != *n || b.q() != *q) {
                    return Err(domain("basis matrix of the wrong shape"));
                }
                if flatten(*n, *q, basis)?.rank() != basis.len() {
                    return Err(domain("basis matrices are linearly dependent"));
                }
            }
        }
        Ok(())
    }

    pub fn act(&self, g: &GroupElement) -> Result<UniverseElement> {
        self.group().check(g)?;
        match (self, g) {
            (UniverseElement::Graph { n, adj }, GroupElement::Perm(p)) => {
                let mut out = vec![false; n * n];
                for i in 0..*n {
                    for j in 0..*n {
                        out[p.at(i) * n + p.at(j)] = adj[i * n + j];
                    }
                }
                Ok(UniverseElement::Graph { n: *n, adj: out })
            }
            (UniverseElement::Code(m), GroupElement::Perm(p)) => {
                let mut out = MatrixFq::zero(m.q(), m.rows(), m.cols())?;
                for r in 0..m.rows() {
                    for c in 0..m.cols() {
                        out.set(r, p.at(c), m.get(r, c));
                    }
                }
                Ok(UniverseElement::Code(out))
            }
            (UniverseElement::Subgroup { n, gens }, GroupElement::Perm(p)) => {
                let inv = p.inverse();
                Ok(UniverseElement::Subgroup {
                    n: *n,
                    gens: gens.iter().map(|g| inv.then(g).then(p)).collect(),
                })
            }
            (UniverseElement::MatrixSpace { n, q, basis }, GroupElement::Matrix(x)) => {
                let xi = x.inverse()?;
                let basis = basis
                    .iter()
                    .map(|a| x.mul(a)?.mul(&xi))
                    .collect::<Result<Vec<_>>>()?;
                Ok(UniverseElement::MatrixSpace { n: *n, q: *q, basis })
            }
            _ => Err(domain("group element does not act on this kind")),
        }
    }

    /// Canonical bit string: equal exactly for equal abstract objects.
    ///
    /// Graphs: adjacency bits row-major. Codes: RREF of the generator
    /// matrix, fixed-width entries row-major. Subgroups: the normal form,
    /// one Lehmer-rank slot per entry, zero-padded to `n(n−1)/2` slots.
    /// Matrix spaces: RREF of the `d × n²` matrix of flattened basis
    /// elements.
    pub fn invariant(&self) -> BitString {
        let dims = self.dims();
        let mut out = BitString::new();
        match self {
            UniverseElement::Graph { adj, .. } => {
                for &b in adj {
                    out.push(b);
                }
            }
            UniverseElement::Code(m) => rref_bits(m, dims.entry_bits(), &mut out),
            UniverseElement::Subgroup { n, gens } => {
                let nf = normal_form(*n, gens).expect("generators validated");
                let w = index_width(&factorial(*n));
                let slots = n * n.saturating_sub(1) / 2;
                for k in 0..slots {
                    match nf.get(k) {
                        Some(p) => out.push_big(&p.lehmer_rank(), w),
                        None => out.push_big(&BigUint::from(0u8), w),
                    }
                }
            }
            UniverseElement::MatrixSpace { n, q, basis } => {
                rref_bits(&flatten(*n, *q, basis).expect("shapes validated"), dims.entry_bits(), &mut out)
            }
        }
        debug_assert_eq!(out.len(), dims.invariant_len());
        out
    }

    /// Rebuilds a representative from its canonical bit string.
    pub fn from_invariant(dims: Dims, bits: &BitString) -> Result<UniverseElement> {
        if bits.len() != dims.invariant_len() {
            return Err(domain(format!(
                "{} bits where a {} invariant has {}",
                bits.len(),
                dims.kind,
                dims.invariant_len()
            )));
        }
        let mut r = bits.reader();
        let w = dims.entry_bits();
        let obj = match dims.kind {
            Kind::Graph => UniverseElement::Graph {
                n: dims.n,
                adj: bits.iter().collect(),
            },
            Kind::LinearCode => {
                let entries = (0..dims.d * dims.n).map(|_| r.read_uint(w)).collect::<Result<_>>()?;
                UniverseElement::Code(MatrixFq::new(dims.q, dims.d, dims.n, entries)?)
            }
            Kind::PermGroupConjugacy => {
                let width = index_width(&factorial(dims.n));
                let slots = dims.n * dims.n.saturating_sub(1) / 2;
                let mut gens = Vec::new();
                for _ in 0..slots {
                    let k = r.read_big(width)?;
                    if k != BigUint::from(0u8) {
                        gens.push(Permutation::lehmer_unrank(&k, dims.n)?);
                    }
                }
                UniverseElement::Subgroup { n: dims.n, gens }
            }
            Kind::MatrixSubspace => {
                let nn = dims.n * dims.n;
                let mut basis = Vec::with_capacity(dims.d);
                for _ in 0..dims.d {
                    let entries = (0..nn).map(|_| r.read_uint(w)).collect::<Result<_>>()?;
                    basis.push(MatrixFq::new(dims.q, dims.n, dims.n, entries)?);
                }
                UniverseElement::MatrixSpace {
                    n: dims.n,
                    q: dims.q,
                    basis,
                }
            }
        };
        obj.validate()?;
        if obj.invariant() != *bits {
            return Err(domain("bit string is not a canonical invariant"));
        }
        Ok(obj)
    }

    /// `invariant(act(h, w))` for a uniformly random `h`.
    pub fn sample_isomorphic_copy<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<BitString> {
        let h = self.group().random(rng);
        Ok(self.act(&h)?.invariant())
    }

    pub fn parse(kind: Kind, text: &str) -> Result<UniverseElement> {
        let obj = match kind {
            Kind::Graph => {
                let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
                let (hl, head) = lines.next().ok_or_else(|| parse(1, "empty graph"))?;
                let n: usize = head
                    .trim()
                    .parse()
                    .map_err(|_| parse(hl + 1, format!("bad vertex count {:?}", head.trim())))?;
                let mut adj = Vec::with_capacity(n * n);
                for _ in 0..n {
                    let (ln, line) = lines.next().ok_or_else(|| parse(hl + 1, "missing adjacency rows"))?;
                    let row = BitString::parse(line).map_err(|_| parse(ln + 1, "bad adjacency row"))?;
                    if row.len() != n {
                        return Err(parse(ln + 1, format!("expected {n} entries, found {}", row.len())));
                    }
                    adj.extend(row.iter());
                }
                if let Some((ln, _)) = lines.next() {
                    return Err(parse(ln + 1, "trailing input after graph"));
                }
                UniverseElement::Graph { n, adj }
            }
            Kind::LinearCode => UniverseElement::Code(MatrixFq::parse(text)?),
            Kind::PermGroupConjugacy => {
                let (n, gens) = parse_generator_list(text)?;
                UniverseElement::Subgroup { n, gens }
            }
            Kind::MatrixSubspace => {
                let lines: Vec<(usize, &str)> = text
                    .lines()
                    .enumerate()
                    .map(|(i, l)| (i + 1, l))
                    .filter(|(_, l)| !l.trim().is_empty())
                    .collect();
                let (hl, head) = *lines.first().ok_or_else(|| parse(1, "empty matrix space"))?;
                let d: usize = head
                    .trim()
                    .parse()
                    .map_err(|_| parse(hl, format!("bad dimension {:?}", head.trim())))?;
                let mut pos = 1;
                let mut basis = Vec::with_capacity(d);
                for _ in 0..d {
                    let (ln, header) = *lines.get(pos).ok_or_else(|| parse(hl, "missing basis matrix"))?;
                    let rows: usize = header
                        .split_whitespace()
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| parse(ln, "bad matrix header"))?;
                    let end = pos + 1 + rows;
                    if end > lines.len() {
                        return Err(parse(ln, "truncated basis matrix"));
                    }
                    let block: Vec<&str> = lines[pos..end].iter().map(|(_, l)| *l).collect();
                    basis.push(MatrixFq::parse(&block.join("\n")).map_err(|e| match e {
                        Error::Parse { line, msg } => parse(ln + line - 1, msg),
                        other => other,
                    })?);
                    pos = end;
                }
                if let Some((ln, _)) = lines.get(pos) {
                    return Err(parse(*ln, "trailing input after matrix space"));
                }
                let (n, q) = basis.first().map_or((0, 2), |b| (b.rows(), b.q()));
                UniverseElement::MatrixSpace { n, q, basis }
            }
        };
        obj.validate().map_err(|e| parse(1, e.to_string()))?;
        Ok(obj)
    }
}

impl fmt::Display for UniverseElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UniverseElement::Graph { n, adj } => {
                writeln!(f, "{n}")?;
                for r in 0..*n {
                    let row: BitString = adj[r * n..(r + 1) * n].iter().copied().collect();
                    writeln!(f, "{row}")?;
                }
                Ok(())
            }
            UniverseElement::Code(m) => write!(f, "{m}"),
            UniverseElement::Subgroup { n, gens } => f.write_str(&format_generator_list(*n, gens)),
            UniverseElement::MatrixSpace { basis, .. } => {
                writeln!(f, "{}", basis.len())?;
                for b in basis {
                    write!(f, "{b}")?;
                }
                Ok(())
            }
        }
    }
}

/// Two objects of the same universe.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IsoInstance {
    pub kind: Kind,
    pub x0: UniverseElement,
    pub x1: UniverseElement,
}

impl IsoInstance {
    pub fn new(x0: UniverseElement, x1: UniverseElement) -> Result<Self> {
        if x0.dims() != x1.dims() {
            return Err(domain("the two objects lie in different universes"));
        }
        x0.validate()?;
        x1.validate()?;
        Ok(Self {
            kind: x0.kind(),
            x0,
            x1,
        })
    }

    pub fn side(&self, r: usize) -> &UniverseElement {
        if r == 0 {
            &self.x0
        } else {
            &self.x1
        }
    }

    pub fn group(&self) -> ActingGroup {
        self.x0.group()
    }

    /// Instance file: the kind name, then the two payloads separated by a
    /// blank line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().skip_while(|(_, l)| l.trim().is_empty());
        let (kl, kind_line) = lines.next().ok_or_else(|| parse(1, "empty instance"))?;
        let kind: Kind = kind_line.parse().map_err(|_| parse(kl + 1, format!("unknown kind {:?}", kind_line.trim())))?;
        let rest: Vec<(usize, &str)> = lines.skip_while(|(_, l)| l.trim().is_empty()).collect();
        let split = rest
            .iter()
            .position(|(_, l)| l.trim().is_empty())
            .ok_or_else(|| parse(kl + 1, "expected two payloads separated by a blank line"))?;
        let offset = |part: &[(usize, &str)], e: Error| match e {
            Error::Parse { line, msg } => parse(part.first().map_or(0, |p| p.0) + line, msg),
            other => other,
        };
        let first = &rest[..split];
        let second: Vec<(usize, &str)> = rest[split..]
            .iter()
            .copied()
            .skip_while(|(_, l)| l.trim().is_empty())
            .collect();
        let join = |part: &[(usize, &str)]| part.iter().map(|(_, l)| *l).collect::<Vec<_>>().join("\n");
        let x0 = UniverseElement::parse(kind, &join(first)).map_err(|e| offset(first, e))?;
        let x1 = UniverseElement::parse(kind, &join(&second)).map_err(|e| offset(&second, e))?;
        IsoInstance::new(x0, x1).map_err(|e| parse(kl + 1, e.to_string()))
    }
}

impl fmt::Display for IsoInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.kind)?;
        write!(f, "{}", self.x0)?;
        writeln!(f)?;
        write!(f, "{}", self.x1)
    }
}

/// Every group element, grouped by the invariant of its image of `w`.
/// Desk-scale inversion of the orbit map.
pub struct OrbitTable {
    preimages: HashMap<BitString, Vec<GroupElement>>,
}

impl OrbitTable {
    pub fn build(w: &UniverseElement) -> Result<Self> {
        let mut preimages: HashMap<BitString, Vec<GroupElement>> = HashMap::new();
        for g in w.group().elements()? {
            preimages.entry(w.act(&g)?.invariant()).or_default().push(g);
        }
        Ok(Self { preimages })
    }

    pub fn orbit_size(&self) -> usize {
        self.preimages.len()
    }

    pub fn contains(&self, inv: &BitString) -> bool {
        self.preimages.contains_key(inv)
    }

    /// All `g` with `invariant(act(g, w)) = inv`.
    pub fn preimages(&self, inv: &BitString) -> &[GroupElement] {
        self.preimages.get(inv).map_or(&[], Vec::as_slice)
    }

    pub fn first_preimage(&self, inv: &BitString) -> Option<&GroupElement> {
        self.preimages(inv).first()
    }

    pub fn orbit(&self) -> impl Iterator<Item = &BitString> {
        self.preimages.keys()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn path4() -> UniverseElement {
        UniverseElement::graph(4, &[(0, 1), (1, 2), (2, 3)]).unwrap()
    }

    #[test]
    fn kind_names_round_trip() {
        for k in Kind::ALL {
            assert_eq!(k.name().parse::<Kind>().unwrap(), k);
            assert_eq!(Kind::from_tag(k.tag()).unwrap(), k);
        }
        assert!("hypergraph".parse::<Kind>().is_err());
    }

    #[test]
    fn triangle_is_vertex_transitive() {
        let tri = UniverseElement::graph(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let swap = GroupElement::Perm(Permutation::from_cycles(3, &[&[1, 2]]).unwrap());
        assert_eq!(tri.act(&swap).unwrap(), tri);
    }

    #[test]
    fn path_orbit_has_twelve_graphs() {
        let table = OrbitTable::build(&path4()).unwrap();
        assert_eq!(table.orbit_size(), 12);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut seen = std::collections::HashSet::new();
        for _ in 0..2000 {
            seen.insert(path4().sample_isomorphic_copy(&mut rng).unwrap());
        }
        assert_eq!(seen.len(), 12);
        assert!(seen.iter().all(|s| table.contains(s)));
    }

    #[test]
    fn action_laws() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let code = UniverseElement::Code(MatrixFq::from_rows(3, &[vec![1, 2, 0, 1], vec![0, 1, 1, 2]]).unwrap());
        let space = UniverseElement::MatrixSpace {
            n: 2,
            q: 3,
            basis: vec![
                MatrixFq::from_rows(3, &[vec![1, 0], vec![0, 0]]).unwrap(),
                MatrixFq::from_rows(3, &[vec![0, 1], vec![2, 0]]).unwrap(),
            ],
        };
        let sub = UniverseElement::Subgroup {
            n: 4,
            gens: vec![Permutation::from_cycles(4, &[&[1, 2, 3]]).unwrap()],
        };
        for w in [path4(), code, space, sub] {
            let grp = w.group();
            assert_eq!(w.act(&grp.identity()).unwrap().invariant(), w.invariant());
            for _ in 0..10 {
                let g = grp.random(&mut rng);
                let h = grp.random(&mut rng);
                let gh = grp.compose(&g, &h).unwrap();
                assert_eq!(
                    w.act(&gh).unwrap().invariant(),
                    w.act(&g).unwrap().act(&h).unwrap().invariant()
                );
            }
        }
    }

    #[test]
    fn invariants_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let code = UniverseElement::Code(MatrixFq::from_rows(3, &[vec![1, 2, 0, 1], vec![0, 1, 1, 2]]).unwrap());
        let sub = UniverseElement::Subgroup {
            n: 4,
            gens: vec![Permutation::from_cycles(4, &[&[1, 2], &[3, 4]]).unwrap()],
        };
        for w in [path4(), code, sub] {
            let copy = w.act(&w.group().random(&mut rng)).unwrap();
            let inv = copy.invariant();
            let back = UniverseElement::from_invariant(copy.dims(), &inv).unwrap();
            assert_eq!(back.invariant(), inv);
        }
    }

    #[test]
    fn conjugation_preserves_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let sub = UniverseElement::Subgroup {
            n: 5,
            gens: vec![Permutation::from_cycles(5, &[&[1, 2, 3], &[4, 5]]).unwrap()],
        };
        let UniverseElement::Subgroup { gens, .. } = sub.act(&ActingGroup::Symmetric(5).random(&mut rng)).unwrap() else {
            unreachable!()
        };
        assert_eq!(PermGroup::new(5, gens).unwrap().order(), BigUint::from(6u8));
    }

    #[test]
    fn gl_permutation_representation() {
        for (n, q) in [(1usize, 5u64), (2, 2), (2, 3), (3, 2)] {
            let g = ActingGroup::General { n, q };
            assert_eq!(g.perm_group().order(), g.order());
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            for _ in 0..10 {
                let a = g.random(&mut rng);
                let b = g.random(&mut rng);
                let pa = g.to_perm(&a).unwrap();
                assert_eq!(g.from_perm(&pa).unwrap(), a);
                let ab = g.compose(&a, &b).unwrap();
                assert_eq!(g.to_perm(&ab).unwrap(), pa.then(&g.to_perm(&b).unwrap()));
            }
        }
    }

    #[test]
    fn rejects_malformed_objects() {
        assert!(UniverseElement::Graph {
            n: 2,
            adj: vec![false, true, false, false]
        }
        .validate()
        .is_err());
        let dep = UniverseElement::Code(MatrixFq::from_rows(2, &[vec![1, 1], vec![1, 1]]).unwrap());
        assert!(dep.validate().is_err());
    }

    #[test]
    fn instance_text_round_trip() {
        let inst = IsoInstance::new(path4(), UniverseElement::graph(4, &[(0, 2), (2, 1), (1, 3)]).unwrap()).unwrap();
        let text = inst.to_string();
        assert_eq!(IsoInstance::parse(&text).unwrap(), inst);

        let space = UniverseElement::MatrixSpace {
            n: 2,
            q: 2,
            basis: vec![MatrixFq::identity(2, 2).unwrap()],
        };
        let inst = IsoInstance::new(space.clone(), space).unwrap();
        assert_eq!(IsoInstance::parse(&inst.to_string()).unwrap(), inst);

        let err = IsoInstance::parse("graph\n2\n01\n10\n").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
        let err = IsoInstance::parse("graph\n2\n01\n1x\n\n2\n01\n10\n").unwrap_err();
        assert_eq!(err, parse(4, "bad adjacency row"));
    }
}
