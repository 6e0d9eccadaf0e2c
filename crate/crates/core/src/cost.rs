//! Description cost: a computable upper-bound model of the length of the
//! shortest description of a string.
//!
//! A description names a registered codec, a parameter blob and an index.
//! Its cost is `|params| + index bits + c_machine`. The cost of a string is
//! the least cost among the supplied descriptions that decode to it, and the
//! literal description is always available.

use std::fmt;
use std::sync::{Arc, Mutex};

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use crate::bits::{index_width, width_for, BitReader, BitString};
use crate::coset::CosetIndexing;
use crate::error::{domain, range, Error, Result};
use crate::flat::{BitSampler, FlatScheme, LinearHash};
use crate::group::PermGroup;
use crate::iso::{ActingGroup, Dims, GroupElement, Kind, UniverseElement};
use crate::perm::{factorial, Permutation};

/// Flat surcharge per description.
pub const C_MACHINE: usize = 64;

pub const LITERAL: &str = "literal";
pub const BLOCKED_COSET: &str = "blocked-coset";
pub const BLOCKED_LEHMER: &str = "blocked-lehmer";
pub const BLOCKED_GL: &str = "blocked-gl";
pub const FLAT_SCHEME: &str = "flat-scheme";

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Description {
    pub codec: String,
    pub params: BitString,
    pub index: BigUint,
    pub index_bits: usize,
}

impl Description {
    pub fn literal(y: &BitString) -> Self {
        Self {
            codec: LITERAL.into(),
            params: BitString::new(),
            index: y.to_biguint(),
            index_bits: y.len(),
        }
    }
}

/// A decoder from `(params, index)` to strings.
pub trait Codec: Send + Sync {
    fn id(&self) -> &'static str;

    /// Index width declared by `params`; `None` if the width is free.
    fn index_bits(&self, params: &BitString) -> Result<Option<usize>>;

    fn decode(&self, params: &BitString, index: &BigUint, index_bits: usize) -> Result<BitString>;

    /// Bits charged for a description, before the machine surcharge.
    fn charged_bits(&self, params_bits: usize, index_bits: usize) -> usize {
        params_bits + index_bits
    }

    /// Whether descriptions carry a parameter blob at all.
    fn takes_params(&self) -> bool {
        true
    }
}

struct Literal;

impl Codec for Literal {
    fn id(&self) -> &'static str {
        LITERAL
    }

    fn index_bits(&self, params: &BitString) -> Result<Option<usize>> {
        if !params.is_empty() {
            return Err(domain("the literal codec takes no parameters"));
        }
        Ok(None)
    }

    fn decode(&self, _: &BitString, index: &BigUint, index_bits: usize) -> Result<BitString> {
        let mut out = BitString::new();
        out.push_big(index, index_bits);
        Ok(out)
    }

    fn takes_params(&self) -> bool {
        false
    }
}

/// Block lengths for `t` samples in blocks of `b`; the last may be short.
pub fn block_layout(t: usize, b: usize) -> Vec<usize> {
    let b = b.max(1);
    let mut out = vec![b; t / b];
    if !t.is_multiple_of(b) {
        out.push(t % b);
    }
    out
}

/// Packs per-sample values in `[0, radix)`: each block becomes one integer
/// in base `radix` (first sample most significant) written in
/// `⌈log₂ radix^len⌉` bits; blocks are concatenated in order.
pub fn pack_blocks(values: &[BigUint], radix: &BigUint, b: usize) -> Result<(BigUint, usize)> {
    let mut index = BigUint::zero();
    let mut bits = 0;
    let mut pos = 0;
    for len in block_layout(values.len(), b) {
        let mut v = BigUint::zero();
        for x in &values[pos..pos + len] {
            if x >= radix {
                return Err(range(format!("sample value {x} not below {radix}")));
            }
            v = v * radix + x;
        }
        let w = index_width(&radix.pow(len as u32));
        index = (index << w) | v;
        bits += w;
        pos += len;
    }
    Ok((index, bits))
}

/// Width of the packed index for `t` samples.
pub fn packed_bits(radix: &BigUint, t: usize, b: usize) -> usize {
    block_layout(t, b)
        .into_iter()
        .map(|len| index_width(&radix.pow(len as u32)))
        .sum()
}

pub fn unpack_blocks(index: &BigUint, index_bits: usize, radix: &BigUint, t: usize, b: usize) -> Result<Vec<BigUint>> {
    if index.bits() as usize > index_bits {
        return Err(range("index wider than declared"));
    }
    let mut field = BitString::new();
    field.push_big(index, index_bits);
    let mut r = field.reader();
    let mut out = Vec::with_capacity(t);
    for len in block_layout(t, b) {
        let cap = radix.pow(len as u32);
        let mut v = r.read_big(index_width(&cap))?;
        if v >= cap {
            return Err(range("block value outside its range"));
        }
        let mut digits = vec![BigUint::zero(); len];
        for d in digits.iter_mut().rev() {
            *d = &v % radix;
            v /= radix;
        }
        out.extend(digits);
    }
    Ok(out)
}

fn write_element(group: &ActingGroup, g: &GroupElement, out: &mut BitString) -> Result<()> {
    out.push_big(&group.rank(g)?, group.element_bits());
    Ok(())
}

fn read_element(group: &ActingGroup, r: &mut BitReader<'_>) -> Result<GroupElement> {
    let k = r.read_big(group.element_bits())?;
    group.unrank(&k)
}

fn write_object(obj: &UniverseElement, out: &mut BitString) {
    out.extend(&obj.invariant());
}

fn read_object(dims: Dims, r: &mut BitReader<'_>) -> Result<UniverseElement> {
    let bits = BitString::from_iter((0..dims.invariant_len()).map(|_| r.read_bit()).collect::<Result<Vec<_>>>()?);
    UniverseElement::from_invariant(dims, &bits)
}

fn perm_bits(n: usize) -> usize {
    index_width(&factorial(n))
}

fn read_count(r: &mut BitReader<'_>, limit: u64) -> Result<usize> {
    let v = r.read_gamma()?;
    if v > limit {
        return Err(domain(format!("count {v} exceeds {limit}")));
    }
    Ok(v as usize)
}

fn finish(r: &BitReader<'_>) -> Result<()> {
    if r.remaining() != 0 {
        return Err(domain("trailing parameter bits"));
    }
    Ok(())
}

/// What the blocked-coset codec indexes.
#[derive(Clone, Debug, PartialEq)]
pub enum CosetSpace {
    /// Orbits of one or more base objects. Sample values
    /// `[0, N_0)`, `[N_0, N_0 + N_1)`, ... select the base, and within a
    /// base the coset of its listed automorphisms.
    Orbits {
        bases: Vec<(UniverseElement, Vec<GroupElement>)>,
    },
    /// Left cosets of `⟨gamma⟩` in `⟨h⟩`, rendered as canonical
    /// representatives (image tables).
    Cosets {
        degree: usize,
        h: Vec<Permutation>,
        gamma: Vec<Permutation>,
    },
}

/// Parameters of a blocked-coset description.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockedParams {
    pub space: CosetSpace,
    pub b: usize,
    pub t: usize,
}

impl BlockedParams {
    pub fn to_bits(&self) -> Result<BitString> {
        let mut out = BitString::new();
        match &self.space {
            CosetSpace::Orbits { bases } => {
                out.push(false);
                let dims = bases.first().ok_or_else(|| domain("no base objects"))?.0.dims();
                dims.write(&mut out);
                out.push_gamma(bases.len() as u64);
                let group = dims.group();
                for (obj, aut) in bases {
                    if obj.dims() != dims {
                        return Err(domain("base objects from different universes"));
                    }
                    write_object(obj, &mut out);
                    out.push_gamma(aut.len() as u64);
                    for g in aut {
                        write_element(&group, g, &mut out)?;
                    }
                }
            }
            CosetSpace::Cosets { degree, h, gamma } => {
                out.push(true);
                out.push_gamma(*degree as u64);
                for list in [h, gamma] {
                    out.push_gamma(list.len() as u64);
                    for p in list {
                        if p.degree() != *degree {
                            return Err(domain("generator of the wrong degree"));
                        }
                        out.push_big(&p.lehmer_rank(), perm_bits(*degree));
                    }
                }
            }
        }
        out.push_gamma(self.b as u64);
        out.push_gamma(self.t as u64);
        Ok(out)
    }

    pub fn from_bits(bits: &BitString) -> Result<Self> {
        let mut r = bits.reader();
        let space = if !r.read_bit()? {
            let dims = Dims::read(&mut r)?;
            let group = dims.group();
            let count = read_count(&mut r, 16)?;
            let mut bases = Vec::with_capacity(count);
            for _ in 0..count {
                let obj = read_object(dims, &mut r)?;
                let k = read_count(&mut r, 256)?;
                let aut = (0..k).map(|_| read_element(&group, &mut r)).collect::<Result<Vec<_>>>()?;
                bases.push((obj, aut));
            }
            if bases.is_empty() {
                return Err(domain("no base objects"));
            }
            CosetSpace::Orbits { bases }
        } else {
            let degree = read_count(&mut r, 64)?;
            let mut lists = Vec::with_capacity(2);
            for _ in 0..2 {
                let k = read_count(&mut r, 256)?;
                let list = (0..k)
                    .map(|_| Permutation::lehmer_unrank(&r.read_big(perm_bits(degree))?, degree))
                    .collect::<Result<Vec<_>>>()?;
                lists.push(list);
            }
            let gamma = lists.pop().unwrap();
            let h = lists.pop().unwrap();
            CosetSpace::Cosets { degree, h, gamma }
        };
        let b = read_count(&mut r, u32::MAX as u64)?;
        let t = read_count(&mut r, u32::MAX as u64)?;
        finish(&r)?;
        if b == 0 {
            return Err(domain("block size must be positive"));
        }
        Ok(Self { space, b, t })
    }
}

struct Part {
    idx: CosetIndexing,
    group: ActingGroup,
    base: Option<UniverseElement>,
    offset: BigUint,
}

/// A blocked-coset parameter set made ready for decoding and encoding.
pub struct CompiledCosets {
    parts: Vec<Part>,
    radix: BigUint,
    sample_len: usize,
    pub b: usize,
    pub t: usize,
}

impl CompiledCosets {
    pub fn new(params: &BlockedParams) -> Result<Self> {
        let mut parts = Vec::new();
        let mut offset = BigUint::zero();
        let sample_len;
        match &params.space {
            CosetSpace::Orbits { bases } => {
                let group = bases[0].0.group();
                sample_len = bases[0].0.dims().invariant_len();
                let h = group.perm_group();
                for (obj, aut) in bases {
                    let base_inv = obj.invariant();
                    let mut perms = Vec::with_capacity(aut.len());
                    for g in aut {
                        if obj.act(g)?.invariant() != base_inv {
                            return Err(domain("listed automorphism moves its base object"));
                        }
                        perms.push(group.to_perm(g)?);
                    }
                    let gamma = PermGroup::new(group.perm_degree(), perms)?;
                    let idx = CosetIndexing::new(h.clone(), gamma)?;
                    let count = idx.count().clone();
                    parts.push(Part {
                        idx,
                        group,
                        base: Some(obj.clone()),
                        offset: offset.clone(),
                    });
                    offset += count;
                }
            }
            CosetSpace::Cosets { degree, h, gamma } => {
                sample_len = degree * width_for(*degree as u64);
                let idx = CosetIndexing::new(PermGroup::new(*degree, h.clone())?, PermGroup::new(*degree, gamma.clone())?)?;
                offset = idx.count().clone();
                parts.push(Part {
                    idx,
                    group: ActingGroup::Symmetric(*degree),
                    base: None,
                    offset: BigUint::zero(),
                });
            }
        }
        Ok(Self {
            parts,
            radix: offset,
            sample_len,
            b: params.b,
            t: params.t,
        })
    }

    /// Number of distinct sample values.
    pub fn radix(&self) -> &BigUint {
        &self.radix
    }

    pub fn sample_len(&self) -> usize {
        self.sample_len
    }

    pub fn index_bits(&self) -> usize {
        packed_bits(&self.radix, self.t, self.b)
    }

    fn render(&self, v: &BigUint) -> Result<BitString> {
        let part = self
            .parts
            .iter()
            .rev()
            .find(|p| &p.offset <= v)
            .ok_or_else(|| range("sample value out of range"))?;
        let rho = part.idx.unrank(&(v - &part.offset))?;
        match &part.base {
            Some(obj) => {
                let g = part.group.from_perm(&rho.inverse())?;
                Ok(obj.act(&g)?.invariant())
            }
            None => {
                let w = width_for(rho.degree() as u64);
                let mut out = BitString::new();
                for &x in rho.images() {
                    out.push_uint(x as u64, w);
                }
                Ok(out)
            }
        }
    }

    pub fn decode(&self, index: &BigUint, index_bits: usize) -> Result<BitString> {
        if index_bits != self.index_bits() {
            return Err(domain("index width does not match the parameters"));
        }
        let mut out = BitString::new();
        for v in unpack_blocks(index, index_bits, &self.radix, self.t, self.b)? {
            out.extend(&self.render(&v)?);
        }
        Ok(out)
    }

    /// Sample value for a copy `act(g, base_j)` (orbit spaces) or for the
    /// coset `gΓ` (coset spaces).
    pub fn value(&self, part: usize, g: &GroupElement) -> Result<BigUint> {
        let p = self.parts.get(part).ok_or_else(|| domain("no such base"))?;
        let perm = p.group.to_perm(g)?;
        let rank = match p.base {
            Some(_) => p.idx.rank(&perm.inverse())?,
            None => p.idx.rank(&perm)?,
        };
        Ok(&p.offset + rank)
    }
}

/// Builds a blocked-coset description from per-sample `(base, element)`
/// choices.
pub fn blocked_coset_description(space: CosetSpace, b: usize, choices: &[(usize, GroupElement)]) -> Result<Description> {
    let params = BlockedParams {
        space,
        b,
        t: choices.len(),
    };
    let compiled = CompiledCosets::new(&params)?;
    blocked_coset_with(&compiled, &params, choices)
}

/// Same as [`blocked_coset_description`] with a precompiled space.
pub fn blocked_coset_with(compiled: &CompiledCosets, params: &BlockedParams, choices: &[(usize, GroupElement)]) -> Result<Description> {
    if params.t != choices.len() {
        return Err(domain("sample count does not match the parameters"));
    }
    let values = choices
        .iter()
        .map(|(j, g)| compiled.value(*j, g))
        .collect::<Result<Vec<_>>>()?;
    let (index, index_bits) = pack_blocks(&values, compiled.radix(), params.b)?;
    Ok(Description {
        codec: BLOCKED_COSET.into(),
        params: params.to_bits()?,
        index,
        index_bits,
    })
}

/// Keeps the last compiled parameter block; hints for one reduction share it.
#[derive(Default)]
struct BlockedCoset {
    last: Mutex<Option<(BitString, Arc<CompiledCosets>)>>,
}

impl BlockedCoset {
    fn compiled(&self, params: &BitString) -> Result<Arc<CompiledCosets>> {
        let mut last = self.last.lock().unwrap_or_else(|e| e.into_inner());
        if let Some((bits, c)) = last.as_ref() {
            if bits == params {
                return Ok(c.clone());
            }
        }
        let c = Arc::new(CompiledCosets::new(&BlockedParams::from_bits(params)?)?);
        *last = Some((params.clone(), c.clone()));
        Ok(c)
    }
}

impl Codec for BlockedCoset {
    fn id(&self) -> &'static str {
        BLOCKED_COSET
    }

    fn index_bits(&self, params: &BitString) -> Result<Option<usize>> {
        Ok(Some(self.compiled(params)?.index_bits()))
    }

    fn decode(&self, params: &BitString, index: &BigUint, index_bits: usize) -> Result<BitString> {
        self.compiled(params)?.decode(index, index_bits)
    }
}

/// One base object, each sample written as the full rank of a group
/// element: the Lehmer code for S_n, the GL indexing for matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupBlockParams {
    pub base: UniverseElement,
    pub b: usize,
    pub t: usize,
}

impl GroupBlockParams {
    pub fn to_bits(&self) -> BitString {
        let mut out = BitString::new();
        self.base.dims().write(&mut out);
        write_object(&self.base, &mut out);
        out.push_gamma(self.b as u64);
        out.push_gamma(self.t as u64);
        out
    }

    pub fn from_bits(bits: &BitString) -> Result<Self> {
        let mut r = bits.reader();
        let dims = Dims::read(&mut r)?;
        let base = read_object(dims, &mut r)?;
        let b = read_count(&mut r, u32::MAX as u64)?;
        let t = read_count(&mut r, u32::MAX as u64)?;
        finish(&r)?;
        if b == 0 {
            return Err(domain("block size must be positive"));
        }
        Ok(Self { base, b, t })
    }
}

struct BlockedGroup {
    id: &'static str,
    matrices: bool,
}

impl BlockedGroup {
    fn parse(&self, params: &BitString) -> Result<GroupBlockParams> {
        let p = GroupBlockParams::from_bits(params)?;
        if (p.base.kind() == Kind::MatrixSubspace) != self.matrices {
            return Err(domain(format!("{} does not handle {}", self.id, p.base.kind())));
        }
        Ok(p)
    }
}

impl Codec for BlockedGroup {
    fn id(&self) -> &'static str {
        self.id
    }

    fn index_bits(&self, params: &BitString) -> Result<Option<usize>> {
        let p = self.parse(params)?;
        Ok(Some(packed_bits(&p.base.group().order(), p.t, p.b)))
    }

    fn decode(&self, params: &BitString, index: &BigUint, index_bits: usize) -> Result<BitString> {
        let p = self.parse(params)?;
        let group = p.base.group();
        let radix = group.order();
        if index_bits != packed_bits(&radix, p.t, p.b) {
            return Err(domain("index width does not match the parameters"));
        }
        let mut out = BitString::new();
        for v in unpack_blocks(index, index_bits, &radix, p.t, p.b)? {
            out.extend(&p.base.act(&group.unrank(&v)?)?.invariant());
        }
        Ok(out)
    }
}

/// Blocked-Lehmer (S_n kinds) or blocked-GL (matrix spaces) description of
/// the copies `act(g_i, base)`.
pub fn blocked_group_description(base: &UniverseElement, b: usize, elems: &[GroupElement]) -> Result<Description> {
    let group = base.group();
    let values = elems.iter().map(|g| group.rank(g)).collect::<Result<Vec<_>>>()?;
    let (index, index_bits) = pack_blocks(&values, &group.order(), b)?;
    let params = GroupBlockParams {
        base: base.clone(),
        b,
        t: elems.len(),
    };
    Ok(Description {
        codec: if base.kind() == Kind::MatrixSubspace {
            BLOCKED_GL
        } else {
            BLOCKED_LEHMER
        }
        .into(),
        params: params.to_bits(),
        index,
        index_bits,
    })
}

/// Maps `ℓ` input bits to a copy of `base`: the bits, read as an integer
/// modulo `|H|`, select a group element by rank.
pub struct OrbitSampler {
    pub base: UniverseElement,
    pub ell: usize,
    order: BigUint,
}

/// Extra input bits beyond `⌈log₂|H|⌉`; keeps the modular bias of the
/// sampler within a factor `1 + 2^-SLACK`.
pub const SAMPLER_SLACK: usize = 3;

impl OrbitSampler {
    pub fn new(base: UniverseElement) -> Self {
        let order = base.group().order();
        let ell = index_width(&order) + SAMPLER_SLACK;
        Self { base, ell, order }
    }

    /// Input whose output is `act(g, base)`.
    pub fn input_for(&self, g: &GroupElement) -> Result<BitString> {
        let k = self.base.group().rank(g)?;
        let mut out = BitString::new();
        out.push_big(&k, self.ell);
        Ok(out)
    }
}

impl BitSampler for OrbitSampler {
    type Outcome = BitString;

    fn input_len(&self) -> usize {
        self.ell
    }

    fn run(&self, sigma: &BitString) -> BitString {
        let k = sigma.to_biguint() % &self.order;
        let g = self.base.group().unrank(&k).expect("rank below the order");
        self.base.act(&g).expect("element of the acting group").invariant()
    }
}

fn write_scheme(scheme: &FlatScheme, out: &mut BitString) {
    out.push_gamma(scheme.input_len() as u64);
    out.push_gamma(scheme.output_len() as u64);
    out.push_gamma(crate::flat::ceil_s(scheme.entropy_bound()) as u64);
    out.push_gamma(scheme.hashes().len() as u64);
    for h in scheme.hashes() {
        for row in h.rows() {
            out.extend(&row);
        }
        out.extend(&h.offset());
    }
}

fn read_scheme(r: &mut BitReader<'_>) -> Result<FlatScheme> {
    let ell = read_count(r, 4096)?;
    let m = read_count(r, 4096)?;
    let s = read_count(r, 4096)? as f64;
    let count = read_count(r, 1 << 16)?;
    let mut hashes = Vec::with_capacity(count);
    for _ in 0..count {
        let mut rows = Vec::with_capacity(m);
        for _ in 0..m {
            rows.push((0..ell).map(|_| r.read_bit()).collect::<Result<BitString>>()?);
        }
        let v = (0..m).map(|_| r.read_bit()).collect::<Result<BitString>>()?;
        hashes.push(LinearHash::new(ell, rows, v)?);
    }
    FlatScheme::new(ell, m, s, hashes)
}

/// Flat-scheme parameters: the sampled object and a hash list for its
/// orbit sampler.
pub struct FlatParams {
    pub base: UniverseElement,
    pub scheme: FlatScheme,
    pub t: usize,
}

impl FlatParams {
    pub fn to_bits(&self) -> BitString {
        let mut out = BitString::new();
        self.base.dims().write(&mut out);
        write_object(&self.base, &mut out);
        write_scheme(&self.scheme, &mut out);
        out.push_gamma(self.t as u64);
        out
    }

    pub fn from_bits(bits: &BitString) -> Result<Self> {
        let mut r = bits.reader();
        let dims = Dims::read(&mut r)?;
        let base = read_object(dims, &mut r)?;
        let scheme = read_scheme(&mut r)?;
        let t = read_count(&mut r, u32::MAX as u64)?;
        finish(&r)?;
        if scheme.input_len() != OrbitSampler::new(base.clone()).ell {
            return Err(domain("scheme input length does not match the sampler"));
        }
        Ok(Self { base, scheme, t })
    }
}

struct FlatCodec;

impl Codec for FlatCodec {
    fn id(&self) -> &'static str {
        FLAT_SCHEME
    }

    fn index_bits(&self, params: &BitString) -> Result<Option<usize>> {
        let p = FlatParams::from_bits(params)?;
        Ok(Some(p.t * p.scheme.index_bits()))
    }

    fn decode(&self, params: &BitString, index: &BigUint, index_bits: usize) -> Result<BitString> {
        let p = FlatParams::from_bits(params)?;
        let w = p.scheme.index_bits();
        if index_bits != p.t * w || index.bits() as usize > index_bits {
            return Err(domain("index width does not match the parameters"));
        }
        let sampler = OrbitSampler::new(p.base.clone());
        let mut field = BitString::new();
        field.push_big(index, index_bits);
        let mut r = field.reader();
        let mut out = BitString::new();
        for _ in 0..p.t {
            out.extend(&p.scheme.decode(&sampler, &r.read_big(w)?)?);
        }
        Ok(out)
    }
}

/// Flat-scheme description of the copies `act(g_i, base)`.
pub fn flat_description(base: &UniverseElement, scheme: &FlatScheme, copies: &[BitString]) -> Result<Description> {
    let sampler = OrbitSampler::new(base.clone());
    let w = scheme.index_bits();
    let mut index = BigUint::zero();
    for y in copies {
        index = (index << w) | scheme.encode(&sampler, y)?;
    }
    let params = FlatParams {
        base: base.clone(),
        scheme: scheme.clone(),
        t: copies.len(),
    };
    Ok(Description {
        codec: FLAT_SCHEME.into(),
        params: params.to_bits(),
        index,
        index_bits: copies.len() * w,
    })
}

/// One accounted description.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CostLine {
    pub codec: String,
    pub params_bits: usize,
    pub index_bits: usize,
    pub total: usize,
}

impl fmt::Display for CostLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} {}", self.codec, self.params_bits, self.index_bits, self.total)
    }
}

#[derive(Clone, Debug)]
pub struct CostReport {
    /// Cheapest description that decoded to the string.
    pub best: CostLine,
    pub accepted: Vec<CostLine>,
    /// Hints that failed, with the reason.
    pub rejected: Vec<(String, String)>,
}

impl CostReport {
    pub fn total(&self) -> usize {
        self.best.total
    }
}

/// Analytic count of the strings a model can describe cheaply.
#[derive(Clone, Debug)]
pub struct AuditCertificate {
    pub c: usize,
    pub ell: usize,
    /// Bits left for params and index: `c − c_machine`.
    pub budget: Option<usize>,
    pub per_codec: Vec<(String, BigUint)>,
    pub total: BigUint,
    /// `min(total, 2^ell)`.
    pub capped: BigUint,
    /// `2^(c+1)`.
    pub limit: BigUint,
}

impl fmt::Display for AuditCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "audit c={} ell={}", self.c, self.ell)?;
        for (id, n) in &self.per_codec {
            writeln!(f, "  {id} <= {n}")?;
        }
        write!(f, "  total {} capped {} < {}", self.total, self.capped, self.limit)
    }
}

pub struct CostModel {
    pub c_machine: usize,
    codecs: Vec<Box<dyn Codec>>,
}

impl CostModel {
    /// All shipped codecs with the default surcharge.
    pub fn standard() -> Self {
        Self::with_c_machine(C_MACHINE)
    }

    pub fn with_c_machine(c_machine: usize) -> Self {
        let mut m = Self::literal_only(c_machine);
        m.register(Box::<BlockedCoset>::default());
        m.register(Box::new(BlockedGroup {
            id: BLOCKED_LEHMER,
            matrices: false,
        }));
        m.register(Box::new(BlockedGroup {
            id: BLOCKED_GL,
            matrices: true,
        }));
        m.register(Box::new(FlatCodec));
        m
    }

    pub fn literal_only(c_machine: usize) -> Self {
        Self {
            c_machine,
            codecs: vec![Box::new(Literal)],
        }
    }

    pub fn register(&mut self, codec: Box<dyn Codec>) {
        self.codecs.retain(|c| c.id() != codec.id());
        self.codecs.push(codec);
    }

    pub fn codec_ids(&self) -> Vec<&'static str> {
        self.codecs.iter().map(|c| c.id()).collect()
    }

    fn codec(&self, id: &str) -> Result<&dyn Codec> {
        self.codecs
            .iter()
            .find(|c| c.id() == id)
            .map(|c| c.as_ref())
            .ok_or_else(|| domain(format!("unknown codec {id:?}")))
    }

    /// Decodes `d` and returns its cost line.
    pub fn evaluate(&self, d: &Description) -> Result<(BitString, CostLine)> {
        let codec = self.codec(&d.codec)?;
        if let Some(w) = codec.index_bits(&d.params)? {
            if w != d.index_bits {
                return Err(domain(format!("index declared {} bits, params fix {w}", d.index_bits)));
            }
        }
        if d.index.bits() as usize > d.index_bits {
            return Err(range("index wider than its declared width"));
        }
        let y = codec.decode(&d.params, &d.index, d.index_bits)?;
        let line = CostLine {
            codec: d.codec.clone(),
            params_bits: d.params.len(),
            index_bits: d.index_bits,
            total: codec.charged_bits(d.params.len(), d.index_bits) + self.c_machine,
        };
        Ok((y, line))
    }

    /// Least cost over the literal description and every hint that decodes
    /// to `y`.
    pub fn cost(&self, y: &BitString, hints: &[Description]) -> CostReport {
        let (_, literal) = self.evaluate(&Description::literal(y)).expect("literal always decodes");
        let mut accepted = vec![literal];
        let mut rejected = Vec::new();
        for h in hints {
            match self.evaluate(h) {
                Ok((z, line)) if &z == y => accepted.push(line),
                Ok(_) => rejected.push((h.codec.clone(), "decodes to a different string".into())),
                Err(e) => rejected.push((h.codec.clone(), e.to_string())),
            }
        }
        let best = accepted.iter().min_by_key(|l| l.total).unwrap().clone();
        CostReport {
            best,
            accepted,
            rejected,
        }
    }

    /// Bounds the number of `ell`-bit strings of cost at most `c`.
    ///
    /// A codec whose descriptions total `m` charged bits has at most `m+1`
    /// ways to split them between params and index and at most `2^m`
    /// descriptions per split, each decoding to one string; parameterless
    /// codecs have one split. The sum over codecs and `m ≤ c − c_machine`
    /// must stay below `2^(c+1)`. Fails if a codec charges fewer bits than
    /// it reads.
    pub fn counting_audit(&self, c: usize, ell: usize) -> Result<AuditCertificate> {
        for codec in &self.codecs {
            for p in [0usize, 1, 7, 64, 1000] {
                for i in [0usize, 1, 13, 500] {
                    let charged = codec.charged_bits(p, i);
                    if charged < p + i {
                        return Err(Error::Audit(format!(
                            "codec {} charges {charged} bits for {p} parameter bits and {i} index bits",
                            codec.id()
                        )));
                    }
                }
            }
        }
        let budget = c.checked_sub(self.c_machine);
        let one = BigUint::one();
        let per_codec: Vec<(String, BigUint)> = self
            .codecs
            .iter()
            .map(|codec| {
                let n = match budget {
                    None => BigUint::zero(),
                    // Σ_{m≤L} 2^m
                    Some(l) if !codec.takes_params() => (&one << (l + 1)) - &one,
                    // Σ_{m≤L} (m+1) 2^m = L·2^(L+1) + 1
                    Some(l) => BigUint::from(l) * (&one << (l + 1)) + &one,
                };
                (codec.id().to_string(), n)
            })
            .collect();
        let total: BigUint = per_codec.iter().map(|(_, n)| n).sum();
        let all = &one << ell;
        let capped = if total < all { total.clone() } else { all };
        let limit = &one << (c + 1);
        if capped >= limit {
            return Err(Error::Audit(format!(
                "{} strings of cost at most {c} exceed 2^{}",
                capped,
                c + 1
            )));
        }
        Ok(AuditCertificate {
            c,
            ell,
            budget,
            per_codec,
            total,
            capped,
            limit,
        })
    }
}

impl Default for CostModel {
    fn default() -> Self {
        Self::standard()
    }
}

/// `log₂` of a big integer, accurate to double precision.
pub fn log2_big(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().unwrap_or(f64::INFINITY).log2();
    }
    let shift = bits - 64;
    (x >> shift).to_f64().unwrap().log2() + shift as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flat::build_scheme;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rigid6() -> UniverseElement {
        UniverseElement::graph(6, &[(0, 1), (0, 2), (0, 3), (0, 5), (1, 5), (3, 4), (4, 5)]).unwrap()
    }

    #[test]
    fn literal_costs() {
        let m = CostModel::standard();
        assert_eq!(m.cost(&BitString::new(), &[]).total(), C_MACHINE);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for len in [1usize, 17, 200] {
            let y: BitString = (0..len).map(|_| rng.gen()).collect();
            assert_eq!(m.cost(&y, &[]).total(), len + C_MACHINE);
        }
    }

    #[test]
    fn block_packing_round_trip() {
        let radix = BigUint::from(720u32);
        let values: Vec<BigUint> = (0..19u32).map(|i| BigUint::from(i * 37 % 720)).collect();
        let (index, bits) = pack_blocks(&values, &radix, 8).unwrap();
        assert_eq!(bits, 76 + 76 + 29);
        assert_eq!(unpack_blocks(&index, bits, &radix, 19, 8).unwrap(), values);
        assert!(pack_blocks(std::slice::from_ref(&radix), &radix, 1).is_err());
    }

    #[test]
    fn single_block_is_exact() {
        // t = b: one index of ⌈b·log₂ N⌉ bits
        assert_eq!(packed_bits(&BigUint::from(720u32), 8, 8), 76);
    }

    #[test]
    fn coset_hint_for_rigid_graph() {
        let g = rigid6();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let group = g.group();
        let elems: Vec<GroupElement> = (0..64).map(|_| group.random(&mut rng)).collect();
        let mut y = BitString::new();
        for h in &elems {
            y.extend(&g.act(h).unwrap().invariant());
        }
        let choices: Vec<(usize, GroupElement)> = elems.iter().cloned().map(|h| (0, h)).collect();
        let d = blocked_coset_description(
            CosetSpace::Orbits {
                bases: vec![(g.clone(), vec![])],
            },
            8,
            &choices,
        )
        .unwrap();
        let m = CostModel::standard();
        let report = m.cost(&y, std::slice::from_ref(&d));
        assert!(report.rejected.is_empty(), "{:?}", report.rejected);
        assert_eq!(report.best.codec, BLOCKED_COSET);
        assert_eq!(report.best.index_bits, 8 * 76);
        assert!(report.total() <= 64 * 10 + d.params.len() + C_MACHINE);

        let lehmer = blocked_group_description(&g, 8, &elems).unwrap();
        assert_eq!(m.evaluate(&lehmer).unwrap().0, y);
    }

    #[test]
    fn wrong_hint_is_rejected() {
        let g = rigid6();
        let d = blocked_group_description(&g, 1, &[g.group().identity()]).unwrap();
        let y = BitString::zeros(36);
        let report = CostModel::standard().cost(&y, &[d]);
        assert_eq!(report.best.codec, LITERAL);
        assert_eq!(report.rejected.len(), 1);
    }

    #[test]
    fn hints_never_increase_cost() {
        let g = rigid6();
        let y = g.invariant();
        let m = CostModel::standard();
        let base = m.cost(&y, &[]).total();
        let d = blocked_group_description(&g, 1, &[g.group().identity()]).unwrap();
        assert!(m.cost(&y, &[d]).total() <= base);
    }

    #[test]
    fn coset_space_round_trip() {
        let h = vec![Permutation::from_cycles(8, &[&[1, 2, 3, 4, 5, 6, 7, 8]]).unwrap()];
        let space = CosetSpace::Cosets {
            degree: 8,
            h: h.clone(),
            gamma: vec![],
        };
        let g = &h[0];
        let choices: Vec<(usize, GroupElement)> = (0..10u64).map(|k| (0, GroupElement::Perm(g.pow(k)))).collect();
        let d = blocked_coset_description(space, 4, &choices).unwrap();
        let (y, line) = CostModel::standard().evaluate(&d).unwrap();
        assert_eq!(y.len(), 10 * 8 * 3);
        assert_eq!(line.index_bits, 30);
    }

    #[test]
    fn union_of_two_bases() {
        let g0 = rigid6();
        let g1 = UniverseElement::graph(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (1, 4), (0, 2)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let group = g0.group();
        let mut y = BitString::new();
        let mut choices = Vec::new();
        for i in 0..20 {
            let h = group.random(&mut rng);
            let side = i % 2;
            let obj = if side == 0 { &g0 } else { &g1 };
            y.extend(&obj.act(&h).unwrap().invariant());
            choices.push((side, h));
        }
        let aut1: Vec<GroupElement> = group
            .elements()
            .unwrap()
            .into_iter()
            .filter(|h| g1.act(h).unwrap() == g1)
            .collect();
        let d = blocked_coset_description(
            CosetSpace::Orbits {
                bases: vec![(g0, vec![]), (g1, aut1)],
            },
            5,
            &choices,
        )
        .unwrap();
        assert_eq!(CostModel::standard().evaluate(&d).unwrap().0, y);
    }

    #[test]
    fn flat_scheme_codec() {
        let g = UniverseElement::graph(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let sampler = OrbitSampler::new(g.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = crate::flat::max_entropy(&sampler).unwrap();
        let scheme = build_scheme(&sampler, s, &mut rng).unwrap();
        let copies: Vec<BitString> = (0..12).map(|_| g.sample_isomorphic_copy(&mut rng).unwrap()).collect();
        let d = flat_description(&g, &scheme, &copies).unwrap();
        let (y, _) = CostModel::standard().evaluate(&d).unwrap();
        assert_eq!(y, copies.iter().fold(BitString::new(), |mut acc, c| {
            acc.extend(c);
            acc
        }));
    }

    #[test]
    fn params_round_trip() {
        let p = BlockedParams {
            space: CosetSpace::Orbits {
                bases: vec![(rigid6(), vec![])],
            },
            b: 8,
            t: 1024,
        };
        assert_eq!(BlockedParams::from_bits(&p.to_bits().unwrap()).unwrap(), p);
        let q = GroupBlockParams { base: rigid6(), b: 3, t: 9 };
        assert_eq!(GroupBlockParams::from_bits(&q.to_bits()).unwrap(), q);
    }

    struct FreeParams;
    impl Codec for FreeParams {
        fn id(&self) -> &'static str {
            "free-params"
        }
        fn index_bits(&self, _: &BitString) -> Result<Option<usize>> {
            Ok(None)
        }
        fn decode(&self, params: &BitString, _: &BigUint, _: usize) -> Result<BitString> {
            Ok(params.clone())
        }
        fn charged_bits(&self, _: usize, index_bits: usize) -> usize {
            index_bits
        }
    }

    #[test]
    fn audit() {
        let lit = CostModel::literal_only(C_MACHINE);
        let cert = lit.counting_audit(80, 16).unwrap();
        assert_eq!(cert.total, (BigUint::one() << 17u32) - 1u8);
        assert!(cert.capped < cert.limit);
        assert!(lit.counting_audit(10, 16).unwrap().total.is_zero());

        let full = CostModel::standard();
        let cert = full.counting_audit(200, 300).unwrap();
        assert_eq!(cert.per_codec.len(), 5);

        let mut bad = CostModel::standard();
        bad.register(Box::new(FreeParams));
        assert!(matches!(bad.counting_audit(100, 100), Err(Error::Audit(_))));
    }

    #[test]
    fn log2_of_big_numbers() {
        assert!((log2_big(&BigUint::from(720u32)) - 720f64.log2()).abs() < 1e-12);
        let big = BigUint::one() << 5000u32;
        assert!((log2_big(&big) - 5000.0).abs() < 1e-9);
    }
}
