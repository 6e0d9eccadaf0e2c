//! Soundness of the description-cost model on distributions of known
//! min-entropy.

use isocodec::cost::{blocked_group_description, Codec, CostModel, Description, C_MACHINE};
use isocodec::error::Result;
use isocodec::iso::UniverseElement;
use isocodec::BitString;
use num_bigint::BigUint;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `x ↦ x·0^16` with `x` written in as few bits as its value needs: short
/// descriptions for strings whose first half has leading zeros.
struct ZeroPad;

impl Codec for ZeroPad {
    fn id(&self) -> &'static str {
        "zero-pad"
    }
    fn index_bits(&self, _: &BitString) -> Result<Option<usize>> {
        Ok(None)
    }
    fn decode(&self, _: &BitString, index: &BigUint, index_bits: usize) -> Result<BitString> {
        if index_bits > 16 {
            return Err(isocodec::Error::Domain("index too wide".into()));
        }
        let mut out = BitString::new();
        out.push_big(index, 16);
        out.extend(&BitString::zeros(16));
        Ok(out)
    }
}

fn padded(x: u64) -> BitString {
    let mut y = BitString::new();
    y.push_uint(x, 16);
    y.extend(&BitString::zeros(16));
    y
}

fn zero_pad_hint(x: u64) -> Description {
    let w = 64 - x.leading_zeros() as usize;
    Description {
        codec: "zero-pad".into(),
        params: BitString::new(),
        index: BigUint::from(x),
        index_bits: w,
    }
}

/// Observed `Pr[cost(y) ≤ 16 − k]` for `y` uniform on a support of size
/// 2^16, with the cheapest hint supplied for every sample.
fn tail_rate(model: &CostModel, k: usize, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hits = (0..samples)
        .filter(|_| {
            let x: u64 = rng.gen_range(0..1 << 16);
            model.cost(&padded(x), &[zero_pad_hint(x)]).total() + k <= 16
        })
        .count();
    hits as f64 / samples as f64
}

#[test]
fn soundness_on_a_flat_support() {
    // small enough to matter, large enough for the audit to close with six codecs
    let mut model = CostModel::with_c_machine(6);
    model.register(Box::new(ZeroPad));
    for c in [8, 12, 16] {
        model.counting_audit(c, 32).unwrap();
    }
    let mut bare = CostModel::with_c_machine(0);
    bare.register(Box::new(ZeroPad));
    assert!(bare.counting_audit(16, 32).is_err());

    for k in [4usize, 8] {
        let rate = tail_rate(&model, k, 10_000, 81 + k as u64);
        assert!(rate <= 3.0 * 2f64.powi(-(k as i32) + 1), "k={k}: {rate}");
    }
    // the codec does reach below the entropy, so the test has teeth
    assert!(tail_rate(&model, 4, 10_000, 85) > 0.0);
    let mut standard = CostModel::standard();
    standard.register(Box::new(ZeroPad));
    assert_eq!(tail_rate(&standard, 8, 1000, 3), 0.0);
}

#[test]
fn audit_closes_for_shipped_codecs() {
    let model = CostModel::standard();
    for (c, ell) in [(64, 16), (80, 16), (100, 1000), (200, 64), (C_MACHINE + 8, 36)] {
        let cert = model.counting_audit(c, ell).unwrap();
        assert!(cert.capped < cert.limit);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn hints_are_monotone_and_pure(seed in any::<u64>(), extra in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = UniverseElement::graph(5, &[(0, 1), (1, 2), (2, 3), (3, 4)]).unwrap();
        let group = g.group();
        let elems: Vec<_> = (0..6).map(|_| group.random(&mut rng)).collect();
        let mut y = BitString::new();
        for h in &elems {
            y.extend(&g.act(h).unwrap().invariant());
        }
        let good = blocked_group_description(&g, 3, &elems).unwrap();
        let junk: Vec<Description> = (0..extra)
            .map(|_| blocked_group_description(&g, 2, &[group.random(&mut rng)]).unwrap())
            .collect();
        let model = CostModel::standard();
        let base = model.cost(&y, &junk).total();
        let mut all = junk.clone();
        all.push(good);
        let with = model.cost(&y, &all);
        prop_assert!(with.total() <= base);
        prop_assert_eq!(model.cost(&y, &all).best, with.best);
    }
}
