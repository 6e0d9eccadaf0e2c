//! Short encodings for samplable, nearly flat distributions, built from
//! random affine hashes `σ ↦ Uσ + v` over F_2.
//!
//! An outcome `y` is encoded by the position `i` of a hash that works for it
//! together with the index `j` of some preimage of `y` inside that hash's
//! zero set; the index is `k = 2^(⌈s⌉+3)·i + j`.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::hash::Hash;

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rand::Rng;

use crate::bits::{index_width, BitString};
use crate::error::{domain, parse, range, Error, Result};

/// Inputs longer than this are verified by sampling instead of exhaustion.
pub const EXHAUSTIVE_LIMIT: usize = 20;
/// Fresh hash lists drawn before giving up.
pub const RETRY_BUDGET: usize = 64;
/// Random inputs drawn per attempt when coverage is checked by sampling.
pub const SAMPLE_CHECKS: usize = 4096;

/// A deterministic program from `{0,1}^ℓ` to outcomes.
pub trait BitSampler {
    type Outcome: Clone + Eq + Hash + Ord;

    fn input_len(&self) -> usize;

    fn run(&self, sigma: &BitString) -> Self::Outcome;
}

fn words(len: usize) -> usize {
    len.div_ceil(64)
}

fn pack(bits: &BitString) -> Vec<u64> {
    let mut out = vec![0u64; words(bits.len())];
    for (i, b) in bits.iter().enumerate() {
        if b {
            out[i / 64] |= 1 << (i % 64);
        }
    }
    out
}

fn unpack(w: &[u64], len: usize) -> BitString {
    (0..len).map(|i| (w[i / 64] >> (i % 64)) & 1 == 1).collect()
}

fn bit(w: &[u64], i: usize) -> bool {
    (w[i / 64] >> (i % 64)) & 1 == 1
}

fn flip(w: &mut [u64], i: usize) {
    w[i / 64] ^= 1 << (i % 64);
}

fn xor_into(dst: &mut [u64], src: &[u64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d ^= s;
    }
}

/// Solution space of `Uσ = v`: one particular solution and a kernel basis.
#[derive(Clone, Debug)]
struct Kernel {
    particular: Option<Vec<u64>>,
    basis: Vec<Vec<u64>>,
}

/// `σ ↦ Uσ + v` with `U` an `m×ℓ` binary matrix.
#[derive(Clone, PartialEq, Eq)]
pub struct LinearHash {
    ell: usize,
    u: Vec<Vec<u64>>,
    v: Vec<bool>,
}

impl LinearHash {
    pub fn new(ell: usize, u: Vec<BitString>, v: BitString) -> Result<Self> {
        if u.len() != v.len() {
            return Err(domain(format!("{} rows of U but v has length {}", u.len(), v.len())));
        }
        if let Some(r) = u.iter().find(|r| r.len() != ell) {
            return Err(domain(format!("row of length {} in a hash on {ell} bits", r.len())));
        }
        Ok(Self {
            ell,
            u: u.iter().map(pack).collect(),
            v: v.iter().collect(),
        })
    }

    pub fn random<R: Rng + ?Sized>(ell: usize, m: usize, rng: &mut R) -> Self {
        let u = (0..m)
            .map(|_| {
                let mut row: Vec<u64> = (0..words(ell)).map(|_| rng.gen()).collect();
                if !ell.is_multiple_of(64) {
                    let last = row.len() - 1;
                    row[last] &= (1u64 << (ell % 64)) - 1;
                }
                row
            })
            .collect();
        let v = (0..m).map(|_| rng.gen()).collect();
        Self { ell, u, v }
    }

    pub fn input_len(&self) -> usize {
        self.ell
    }

    pub fn output_len(&self) -> usize {
        self.v.len()
    }

    /// Rows of `U`.
    pub fn rows(&self) -> Vec<BitString> {
        self.u.iter().map(|r| unpack(r, self.ell)).collect()
    }

    pub fn offset(&self) -> BitString {
        self.v.iter().copied().collect()
    }

    fn zero_at(&self, sigma: &[u64]) -> bool {
        self.u.iter().zip(&self.v).all(|(row, &vb)| {
            let parity = row.iter().zip(sigma).map(|(a, b)| (a & b).count_ones()).sum::<u32>() & 1;
            (parity == 1) == vb
        })
    }

    pub fn eval(&self, sigma: &BitString) -> Result<BitString> {
        if sigma.len() != self.ell {
            return Err(domain("input length mismatch"));
        }
        let w = pack(sigma);
        Ok(self
            .u
            .iter()
            .zip(&self.v)
            .map(|(row, &vb)| {
                let parity = row.iter().zip(&w).map(|(a, b)| (a & b).count_ones()).sum::<u32>() & 1;
                (parity == 1) ^ vb
            })
            .collect())
    }

    /// Gaussian elimination on `[U | v]`.
    fn kernel(&self) -> Kernel {
        let ell = self.ell;
        let mut rows: Vec<(Vec<u64>, bool)> = self.u.iter().cloned().zip(self.v.iter().copied()).collect();
        let mut pivots: Vec<usize> = Vec::new();
        let mut r = 0;
        for c in 0..ell {
            let Some(p) = (r..rows.len()).find(|&i| bit(&rows[i].0, c)) else {
                continue;
            };
            rows.swap(p, r);
            let (prow, pv) = rows[r].clone();
            for (i, (row, rv)) in rows.iter_mut().enumerate() {
                if i != r && bit(row, c) {
                    xor_into(row, &prow);
                    *rv ^= pv;
                }
            }
            pivots.push(c);
            r += 1;
        }
        let solvable = rows[r..].iter().all(|(_, rv)| !rv);
        let particular = solvable.then(|| {
            let mut sol = vec![0u64; words(ell)];
            for (i, &c) in pivots.iter().enumerate() {
                if rows[i].1 {
                    flip(&mut sol, c);
                }
            }
            sol
        });
        let basis = (0..ell)
            .filter(|c| !pivots.contains(c))
            .map(|f| {
                let mut b = vec![0u64; words(ell)];
                flip(&mut b, f);
                for (i, &c) in pivots.iter().enumerate() {
                    if bit(&rows[i].0, f) {
                        flip(&mut b, c);
                    }
                }
                b
            })
            .collect();
        Kernel { particular, basis }
    }

    /// `log₂ |h⁻¹(0^m)|`, or `None` when the zero set is empty.
    pub fn zero_set_log_size(&self) -> Option<usize> {
        let k = self.kernel();
        k.particular.map(|_| k.basis.len())
    }

    /// The `j`-th element of `h⁻¹(0^m)`: the particular solution plus the
    /// kernel-basis vectors selected by the binary digits of `j` (bit 0
    /// selects the first basis vector).
    pub fn kernel_unrank(&self, j: &BigUint) -> Result<BitString> {
        kernel_element(&self.kernel(), self.ell, j)
    }
}

fn kernel_element(k: &Kernel, ell: usize, j: &BigUint) -> Result<BitString> {
    let Some(p) = &k.particular else {
        return Err(domain("hash has an empty zero set"));
    };
    if j.bits() as usize > k.basis.len() {
        return Err(range(format!("kernel index {j} not below 2^{}", k.basis.len())));
    }
    let mut out = p.clone();
    for (i, b) in k.basis.iter().enumerate() {
        if j.bit(i as u64) {
            xor_into(&mut out, b);
        }
    }
    Ok(unpack(&out, ell))
}

impl fmt::Debug for LinearHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LinearHash({}x{})", self.v.len(), self.ell)
    }
}

/// A verified list of hashes for one sampler.
#[derive(Clone, Debug)]
pub struct FlatScheme {
    ell: usize,
    m: usize,
    s: f64,
    hashes: Vec<LinearHash>,
    kernels: Vec<Kernel>,
    /// Coverage was checked on random inputs only.
    pub probabilistic: bool,
}

/// `⌈s⌉`, clamped at zero.
pub fn ceil_s(s: f64) -> usize {
    if s <= 0.0 {
        0
    } else {
        s.ceil() as usize
    }
}

/// Hash output length `max(0, ℓ − ⌈s⌉ − 2)`.
pub fn output_len(ell: usize, s: f64) -> usize {
    ell.saturating_sub(ceil_s(s) + 2)
}

/// Number of hashes: `3⌈s⌉`, at least one.
pub fn hash_count(s: f64) -> usize {
    (3 * ceil_s(s)).max(1)
}

impl FlatScheme {
    /// Scheme from an explicit hash list; every hash must map `ell` bits to
    /// `m` bits.
    pub fn new(ell: usize, m: usize, s: f64, hashes: Vec<LinearHash>) -> Result<Self> {
        if hashes.iter().any(|h| h.ell != ell || h.v.len() != m) {
            return Err(domain("hash dimensions disagree with the scheme"));
        }
        Ok(Self::from_hashes(ell, m, s, hashes))
    }

    fn from_hashes(ell: usize, m: usize, s: f64, hashes: Vec<LinearHash>) -> Self {
        let kernels = hashes.iter().map(LinearHash::kernel).collect();
        Self {
            ell,
            m,
            s,
            hashes,
            kernels,
            probabilistic: false,
        }
    }

    pub fn input_len(&self) -> usize {
        self.ell
    }

    pub fn output_len(&self) -> usize {
        self.m
    }

    pub fn entropy_bound(&self) -> f64 {
        self.s
    }

    pub fn hashes(&self) -> &[LinearHash] {
        &self.hashes
    }

    /// `2^(⌈s⌉+3)`: the per-hash slot size.
    pub fn slot(&self) -> BigUint {
        BigUint::from(1u8) << (ceil_s(self.s) + 3)
    }

    /// Size of the index range.
    pub fn index_range(&self) -> BigUint {
        self.slot() * self.hashes.len()
    }

    /// Encoding length in bits: `⌈s⌉ + 3 + ⌈log(count)⌉`.
    pub fn index_bits(&self) -> usize {
        index_width(&self.index_range())
    }

    fn small(&self, i: usize) -> bool {
        let k = &self.kernels[i];
        k.particular.is_some() && k.basis.len() <= ceil_s(self.s) + 3
    }

    /// Outcomes reachable through hash `i` with their smallest slot index.
    fn reachable<S: BitSampler>(&self, sampler: &S, i: usize) -> HashMap<S::Outcome, usize> {
        let mut out = HashMap::new();
        if !self.small(i) {
            return out;
        }
        let size = 1usize << self.kernels[i].basis.len();
        for j in 0..size {
            let sigma = kernel_element(&self.kernels[i], self.ell, &BigUint::from(j)).unwrap();
            out.entry(sampler.run(&sigma)).or_insert(j);
        }
        out
    }

    /// Index of `y`, or an invariant error if no hash works for it.
    pub fn encode<S: BitSampler>(&self, sampler: &S, y: &S::Outcome) -> Result<BigUint> {
        self.check_sampler(sampler)?;
        for i in 0..self.hashes.len() {
            if let Some(&j) = self.reachable(sampler, i).get(y) {
                return Ok(self.slot() * i + j);
            }
        }
        Err(Error::Invariant("no hash in the scheme works for this outcome".into()))
    }

    /// Total on `0..index_range()`. Slots that fall outside a hash's zero
    /// set wrap around it; a hash with an empty zero set decodes its slot
    /// index directly as the input bits.
    pub fn decode<S: BitSampler>(&self, sampler: &S, k: &BigUint) -> Result<S::Outcome> {
        self.check_sampler(sampler)?;
        if k >= &self.index_range() {
            return Err(range(format!("scheme index {k} not below {}", self.index_range())));
        }
        let slot = self.slot();
        let i = (k / &slot).to_usize().unwrap();
        let j = k % &slot;
        let kern = &self.kernels[i];
        let sigma = if kern.particular.is_some() {
            let size = BigUint::from(1u8) << kern.basis.len();
            kernel_element(kern, self.ell, &(j % size))?
        } else {
            (0..self.ell).map(|b| j.bit(b as u64)).collect()
        };
        Ok(sampler.run(&sigma))
    }

    fn check_sampler<S: BitSampler>(&self, sampler: &S) -> Result<()> {
        if sampler.input_len() != self.ell {
            return Err(domain(format!(
                "scheme built for {}-bit inputs, sampler takes {}",
                self.ell,
                sampler.input_len()
            )));
        }
        Ok(())
    }

    /// Serialized parameters: header "ℓ m s count", then per hash `m` rows
    /// of `ℓ` bits and one line holding `v`.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {} {}\n", self.ell, self.m, self.s, self.hashes.len());
        for h in &self.hashes {
            for row in &h.u {
                out.push_str(&unpack(row, self.ell).to_string());
                out.push('\n');
            }
            let v: BitString = h.v.iter().copied().collect();
            out.push_str(&v.to_string());
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let lines: Vec<&str> = text.lines().collect();
        let header = lines.first().ok_or_else(|| parse(1, "empty scheme"))?;
        let f: Vec<&str> = header.split_whitespace().collect();
        if f.len() != 4 {
            return Err(parse(1, "header must be \"ell m s count\""));
        }
        let num = |t: &str| t.parse::<usize>().map_err(|_| parse(1, format!("bad header field {t:?}")));
        let (ell, m, count) = (num(f[0])?, num(f[1])?, num(f[3])?);
        let s: f64 = f[2].parse().map_err(|_| parse(1, format!("bad entropy bound {:?}", f[2])))?;
        if lines.len() != 1 + count * (m + 1) {
            return Err(parse(lines.len(), "line count does not match the header"));
        }
        let mut hashes = Vec::with_capacity(count);
        for h in 0..count {
            let base = 1 + h * (m + 1);
            let mut u = Vec::with_capacity(m);
            for r in 0..m {
                let row = BitString::parse(lines[base + r]).map_err(|_| parse(base + r + 1, "bad hash row"))?;
                u.push(row);
            }
            let v = BitString::parse(lines[base + m]).map_err(|_| parse(base + m + 1, "bad offset row"))?;
            hashes.push(LinearHash::new(ell, u, v).map_err(|e| parse(base + 1, e.to_string()))?);
        }
        Ok(Self::from_hashes(ell, m, s, hashes))
    }
}

/// All outcomes of a sampler by running it on every input. Only for short
/// inputs.
pub fn outcome_counts<S: BitSampler>(sampler: &S) -> Result<HashMap<S::Outcome, u64>> {
    let ell = sampler.input_len();
    if ell > EXHAUSTIVE_LIMIT {
        return Err(domain(format!("{ell}-bit inputs are too many to exhaust")));
    }
    let mut counts = HashMap::new();
    for x in 0..(1u64 << ell) {
        let sigma: BitString = (0..ell).map(|i| (x >> i) & 1 == 1).collect();
        *counts.entry(sampler.run(&sigma)).or_insert(0) += 1;
    }
    Ok(counts)
}

/// Max-entropy of the induced distribution, `log₂(2^ℓ / min_y |S_y|)`, by
/// exhaustion.
pub fn max_entropy<S: BitSampler>(sampler: &S) -> Result<f64> {
    let counts = outcome_counts(sampler)?;
    let least = counts.values().copied().min().unwrap_or(1);
    Ok(sampler.input_len() as f64 - (least as f64).log2())
}

/// Draws hash lists until every outcome has a working hash.
///
/// For `ℓ ≤ 20` coverage is checked against the full outcome set; for longer
/// inputs against the outcomes of [`SAMPLE_CHECKS`] random inputs, and the
/// scheme is flagged probabilistic.
pub fn build_scheme<S: BitSampler, R: Rng + ?Sized>(sampler: &S, s: f64, rng: &mut R) -> Result<FlatScheme> {
    let ell = sampler.input_len();
    let m = output_len(ell, s);
    let count = hash_count(s);
    let (targets, probabilistic): (BTreeSet<S::Outcome>, bool) = if ell <= EXHAUSTIVE_LIMIT {
        (outcome_counts(sampler)?.into_keys().collect(), false)
    } else {
        let set = (0..SAMPLE_CHECKS)
            .map(|_| {
                let sigma: BitString = (0..ell).map(|_| rng.gen()).collect();
                sampler.run(&sigma)
            })
            .collect();
        (set, true)
    };
    for _ in 0..RETRY_BUDGET {
        let hashes = (0..count).map(|_| LinearHash::random(ell, m, rng)).collect();
        let mut scheme = FlatScheme::from_hashes(ell, m, s, hashes);
        scheme.probabilistic = probabilistic;
        let mut missing = targets.clone();
        for i in 0..count {
            if missing.is_empty() {
                break;
            }
            for y in scheme.reachable(sampler, i).into_keys() {
                missing.remove(&y);
            }
        }
        if missing.is_empty() {
            return Ok(scheme);
        }
    }
    Err(Error::Build(format!(
        "no covering hash list in {RETRY_BUDGET} attempts; the entropy bound {s} is probably too small"
    )))
}

/// Whether `h` works for the outcome `y`: some preimage of `y` hashes to
/// zero and the zero set has at most `2^(⌈s⌉+3)` elements.
pub fn works_for<S: BitSampler>(h: &LinearHash, s: f64, sampler: &S, y: &S::Outcome) -> bool {
    let k = h.kernel();
    if k.particular.is_none() || k.basis.len() > ceil_s(s) + 3 {
        return false;
    }
    (0..1usize << k.basis.len()).any(|j| {
        let sigma = kernel_element(&k, h.ell, &BigUint::from(j)).unwrap();
        &sampler.run(&sigma) == y
    })
}

/// Zero-set membership without materializing the kernel.
pub fn hashes_to_zero(h: &LinearHash, sigma: &BitString) -> bool {
    h.zero_at(&pack(sigma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Zero;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct Constant(usize);
    impl BitSampler for Constant {
        type Outcome = u8;
        fn input_len(&self) -> usize {
            self.0
        }
        fn run(&self, _: &BitString) -> u8 {
            7
        }
    }

    struct Identity(usize);
    impl BitSampler for Identity {
        type Outcome = BitString;
        fn input_len(&self) -> usize {
            self.0
        }
        fn run(&self, sigma: &BitString) -> BitString {
            sigma.clone()
        }
    }

    /// Uniform over 32 outcomes: the low five input bits.
    struct LowBits;
    impl BitSampler for LowBits {
        type Outcome = u32;
        fn input_len(&self) -> usize {
            12
        }
        fn run(&self, sigma: &BitString) -> u32 {
            (0..5).map(|i| (sigma.get(i) as u32) << i).sum()
        }
    }

    #[test]
    fn zero_hash_enumerates_everything() {
        let h = LinearHash::new(3, vec![], BitString::new()).unwrap();
        let got: Vec<String> = (0..8u8)
            .map(|j| h.kernel_unrank(&BigUint::from(j)).unwrap().to_string())
            .collect();
        assert_eq!(got, ["000", "100", "010", "110", "001", "101", "011", "111"]);
        assert!(h.kernel_unrank(&BigUint::from(8u8)).is_err());
    }

    #[test]
    fn kernel_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut done = 0;
        while done < 20 {
            let h = LinearHash::random(4, 2, &mut rng);
            let v_zero = h.v.iter().all(|b| !b);
            let full_rank = h.kernel().basis.len() == 2;
            if !(v_zero && full_rank) {
                continue;
            }
            let mut expected: Vec<BitString> = (0..16u32)
                .map(|x| (0..4).map(|i| (x >> i) & 1 == 1).collect::<BitString>())
                .filter(|s| hashes_to_zero(&h, s))
                .collect();
            let mut got: Vec<BitString> = (0..4u8).map(|j| h.kernel_unrank(&BigUint::from(j)).unwrap()).collect();
            expected.sort();
            got.sort();
            got.dedup();
            assert_eq!(got, expected);
            done += 1;
        }
    }

    #[test]
    fn unsolvable_hash_has_no_zero_set() {
        let u = vec![BitString::parse("10").unwrap(), BitString::parse("10").unwrap()];
        let h = LinearHash::new(2, u, BitString::parse("01").unwrap()).unwrap();
        assert_eq!(h.zero_set_log_size(), None);
        assert!(matches!(h.kernel_unrank(&BigUint::zero()), Err(Error::Domain(_))));
    }

    #[test]
    fn constant_sampler() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let scheme = build_scheme(&Constant(10), 0.0, &mut rng).unwrap();
        assert_eq!(scheme.output_len(), 8);
        let k = scheme.encode(&Constant(10), &7).unwrap();
        assert_eq!(scheme.decode(&Constant(10), &k).unwrap(), 7);
    }

    #[test]
    fn identity_sampler_clamps_output_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let id = Identity(6);
        let scheme = build_scheme(&id, 6.0, &mut rng).unwrap();
        assert_eq!(scheme.output_len(), 0);
        for x in 0..64u32 {
            let y: BitString = (0..6).map(|i| (x >> i) & 1 == 1).collect();
            let k = scheme.encode(&id, &y).unwrap();
            assert_eq!(scheme.decode(&id, &k).unwrap(), y);
        }
    }

    #[test]
    fn round_trip_and_length_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let scheme = build_scheme(&LowBits, 5.0, &mut rng).unwrap();
        assert!(!scheme.probabilistic);
        assert_eq!(scheme.index_bits(), 5 + 3 + 4);
        for y in 0..32u32 {
            let k = scheme.encode(&LowBits, &y).unwrap();
            assert!(k.bits() as usize <= scheme.index_bits());
            assert_eq!(scheme.decode(&LowBits, &k).unwrap(), y);
        }
        assert!(scheme.decode(&LowBits, &scheme.index_range()).is_err());
    }

    #[test]
    fn works_for_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = output_len(12, 5.0);
        let mut hits = 0;
        let trials = 1000;
        for t in 0..trials {
            let h = LinearHash::random(12, m, &mut rng);
            if works_for(&h, 5.0, &LowBits, &((t % 32) as u32)) {
                hits += 1;
            }
        }
        assert!(hits as f64 / trials as f64 >= 0.25 - 0.05, "{hits}");
    }

    #[test]
    fn text_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let scheme = build_scheme(&LowBits, 5.0, &mut rng).unwrap();
        let back = FlatScheme::parse(&scheme.to_text()).unwrap();
        assert_eq!(back.hashes(), scheme.hashes());
        for y in [0u32, 17, 31] {
            let k = scheme.encode(&LowBits, &y).unwrap();
            assert_eq!(back.decode(&LowBits, &k).unwrap(), y);
        }
        let id = build_scheme(&Identity(4), 4.0, &mut rng).unwrap();
        assert_eq!(FlatScheme::parse(&id.to_text()).unwrap().hashes(), id.hashes());
    }

    #[test]
    fn max_entropy_by_exhaustion() {
        assert_eq!(max_entropy(&LowBits).unwrap(), 5.0);
        assert_eq!(max_entropy(&Constant(4)).unwrap(), 0.0);
    }
}
