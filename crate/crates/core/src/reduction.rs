//! The randomized reduction from an isomorphism instance to a cost
//! threshold question, the entropy estimators around it, and the
//! experiment sweep.
//!
//! `reduce` draws `t` samples `y_i = invariant(act(h_i, ω_{r_i}))` with a
//! fresh side bit `r_i` and a uniform group element `h_i`, and sets the
//! threshold `θ = t(s̃ + ½)`. Isomorphic sides make `y` cheap to describe
//! (one orbit); non-isomorphic sides force about one extra bit per sample.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bits::{width_for, BitString};
use crate::cost::{
    blocked_coset_description, blocked_group_description, flat_description, log2_big, CostModel, CosetSpace, Description,
    OrbitSampler, C_MACHINE,
};
use crate::error::{domain, Error, Result};
use crate::flat::{build_scheme, max_entropy};
use crate::group::{near_uniform_element, PermGroup};
use crate::iso::{ActingGroup, GroupElement, IsoInstance, OrbitTable, UniverseElement};
use crate::perm::Permutation;
use crate::coset::CosetIndexing;

/// Deviation bound carried by the estimator reports.
pub const DELTA: f64 = 0.25;
/// Random automorphism candidates tried by the sampling strategy.
pub const AUT_ROUNDS: usize = 24;
/// Default witness-search budget (group elements tried).
pub const DEFAULT_BUDGET: u64 = 10_000;
/// Fresh samples per side for the two-sided threshold estimate.
pub const THRESHOLD_SAMPLES: usize = 4096;
pub const THRESHOLD_BLOCK: usize = 64;

/// `⌈√t⌉`.
pub fn default_block(t: usize) -> usize {
    let mut b = (t as f64).sqrt() as usize;
    while b * b < t {
        b += 1;
    }
    b.max(1)
}

/// Seed for a sub-task; a SplitMix64 step over the parts.
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut x = 0x9e37_79b9_7f4a_7c15u64;
    for &p in parts {
        x ^= p;
        x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = x;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        x = z ^ (z >> 31);
    }
    x
}

#[derive(Clone, Debug)]
pub struct Transcript {
    pub seed: u64,
    /// `(r_i, h_i)` per sample.
    pub choices: Vec<(usize, GroupElement)>,
    /// How `s̃` was obtained.
    pub s_source: String,
}

#[derive(Clone, Debug)]
pub struct ReductionOutput {
    pub y: BitString,
    pub theta: f64,
    pub s_tilde: f64,
    pub t: usize,
    pub b: usize,
    pub sample_len: usize,
    pub transcript: Transcript,
}

impl ReductionOutput {
    pub fn sample(&self, i: usize) -> BitString {
        self.y.slice(i * self.sample_len, (i + 1) * self.sample_len)
    }
}

/// Draws the `t` samples of the reduction.
pub fn reduce(inst: &IsoInstance, t: usize, s_tilde: f64, b: usize, seed: u64) -> Result<ReductionOutput> {
    if t == 0 || b == 0 {
        return Err(domain("t and b must be positive"));
    }
    if s_tilde.is_nan() || s_tilde < 0.0 {
        return Err(domain("s̃ must be non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let group = inst.group();
    let mut y = BitString::new();
    let mut choices = Vec::with_capacity(t);
    for _ in 0..t {
        let r = rng.gen_range(0..2usize);
        let h = group.random(&mut rng);
        y.extend(&inst.side(r).act(&h)?.invariant());
        choices.push((r, h));
    }
    Ok(ReductionOutput {
        y,
        theta: t as f64 * (s_tilde + 0.5),
        s_tilde,
        t,
        b,
        sample_len: inst.x0.dims().invariant_len(),
        transcript: Transcript {
            seed,
            choices,
            s_source: "given".into(),
        },
    })
}

/// Descriptions of `y` as copies of `ω₀`. Uses the witness `w` with
/// `act(w, ω₀) ≅ ω₁` when given, and otherwise inverts the orbit map of
/// `ω₀` by enumeration. Fails if some sample lies outside the orbit.
pub fn hint_for_isomorphic(
    out: &ReductionOutput,
    inst: &IsoInstance,
    witness: Option<&GroupElement>,
    aut0: &[GroupElement],
) -> Result<Vec<Description>> {
    let group = inst.group();
    let elems: Vec<GroupElement> = match witness {
        Some(w) => {
            if inst.x0.act(w)?.invariant() != inst.x1.invariant() {
                return Err(domain("witness does not map the first object to the second"));
            }
            out.transcript
                .choices
                .iter()
                .map(|(r, h)| if *r == 0 { Ok(h.clone()) } else { group.compose(w, h) })
                .collect::<Result<_>>()?
        }
        None => {
            let table = OrbitTable::build(&inst.x0)?;
            (0..out.t)
                .map(|i| {
                    table
                        .first_preimage(&out.sample(i))
                        .cloned()
                        .ok_or_else(|| domain(format!("sample {i} is not a copy of the first object")))
                })
                .collect::<Result<_>>()?
        }
    };
    let choices: Vec<(usize, GroupElement)> = elems.iter().map(|g| (0, g.clone())).collect();
    let space = CosetSpace::Orbits {
        bases: vec![(inst.x0.clone(), aut0.to_vec())],
    };
    Ok(vec![
        blocked_coset_description(space, out.b, &choices)?,
        blocked_group_description(&inst.x0, out.b, &elems)?,
    ])
}

/// Description of `y` as a union of the two orbits, from the transcript.
pub fn union_hint(out: &ReductionOutput, inst: &IsoInstance, aut0: &[GroupElement], aut1: &[GroupElement]) -> Result<Description> {
    let space = CosetSpace::Orbits {
        bases: vec![(inst.x0.clone(), aut0.to_vec()), (inst.x1.clone(), aut1.to_vec())],
    };
    blocked_coset_description(space, out.b, &out.transcript.choices)
}

/// Flat-scheme description of copies of `base`, for small groups.
pub fn flat_hint<R: Rng + ?Sized>(base: &UniverseElement, copies: &[BitString], rng: &mut R) -> Result<Description> {
    let sampler = OrbitSampler::new(base.clone());
    let s = max_entropy(&sampler)?;
    let scheme = build_scheme(&sampler, s, rng)?;
    flat_description(base, &scheme, copies)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AutStrategy {
    /// Enumerate the group.
    Exhaustive,
    /// Pair random elements with random preimages of their images.
    Sampling,
}

impl FromStr for AutStrategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exhaustive" => Ok(Self::Exhaustive),
            "sampling" => Ok(Self::Sampling),
            _ => Err(domain(format!("unknown strategy {s:?}"))),
        }
    }
}

impl fmt::Display for AutStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Exhaustive => "exhaustive",
            Self::Sampling => "sampling",
        })
    }
}

/// Elements of `Aut(ω)`. Every returned element is checked to fix `ω`.
pub fn aut_generators<R: Rng + ?Sized>(w: &UniverseElement, strategy: AutStrategy, rng: &mut R) -> Result<Vec<GroupElement>> {
    let group = w.group();
    let inv = w.invariant();
    let fixes = |g: &GroupElement| -> Result<bool> { Ok(w.act(g)?.invariant() == inv) };
    let mut found = Vec::new();
    match strategy {
        AutStrategy::Exhaustive => {
            for g in group.elements()? {
                if fixes(&g)? {
                    found.push(g);
                }
            }
            found = reduce_generators(&group, found)?;
        }
        AutStrategy::Sampling => match OrbitTable::build(w) {
            Ok(table) => {
                for _ in 0..AUT_ROUNDS {
                    let pi = group.random(rng);
                    let image = w.act(&pi)?.invariant();
                    let tau = table
                        .preimages(&image)
                        .choose(rng)
                        .ok_or_else(|| Error::Invariant("orbit table misses an image".into()))?;
                    let g = group.compose(&pi, &group.inverse(tau)?)?;
                    if fixes(&g)? {
                        found.push(g);
                    }
                }
            }
            // too large to invert: keep whatever random elements happen to fix ω
            Err(_) => {
                for _ in 0..AUT_ROUNDS * 16 {
                    let g = group.random(rng);
                    if fixes(&g)? {
                        found.push(g);
                    }
                }
            }
        },
    }
    let id = group.identity();
    found.retain(|g| g != &id);
    found.dedup();
    Ok(found)
}

fn reduce_generators(group: &ActingGroup, elems: Vec<GroupElement>) -> Result<Vec<GroupElement>> {
    let perms = elems.iter().map(|g| group.to_perm(g)).collect::<Result<Vec<_>>>()?;
    let g = PermGroup::new(group.perm_degree(), perms)?;
    g.reduced_generators().iter().map(|p| group.from_perm(p)).collect()
}

/// Order of the subgroup generated by `gens`.
pub fn generated_order(group: &ActingGroup, gens: &[GroupElement]) -> Result<BigUint> {
    let perms = gens.iter().map(|g| group.to_perm(g)).collect::<Result<Vec<_>>>()?;
    Ok(PermGroup::new(group.perm_degree(), perms)?.order())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EstimatorMode {
    PacOver,
    PacUnder,
    ProbablyCorrectOver,
}

impl fmt::Display for EstimatorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::PacOver => "pac-over",
            Self::PacUnder => "pac-under",
            Self::ProbablyCorrectOver => "probably-correct-over",
        })
    }
}

#[derive(Clone, Debug)]
pub struct EstimatorReport {
    pub value: f64,
    pub mode: EstimatorMode,
    pub deviation: f64,
    pub trace: Vec<String>,
}

/// `log|H| − log|Γ|` for the automorphisms `Γ` found by `strategy`. Never
/// below `log(|H|/|Aut(ω)|)`, exact when `Γ = Aut(ω)`.
pub fn log_orbit_overestimate<R: Rng + ?Sized>(w: &UniverseElement, strategy: AutStrategy, rng: &mut R) -> Result<(EstimatorReport, Vec<GroupElement>)> {
    let group = w.group();
    let aut = aut_generators(w, strategy, rng)?;
    let order = generated_order(&group, &aut)?;
    let value = log2_big(&group.order()) - log2_big(&order);
    let report = EstimatorReport {
        value,
        mode: EstimatorMode::ProbablyCorrectOver,
        deviation: DELTA,
        trace: vec![
            format!("strategy {strategy}"),
            format!("generators {}", aut.len()),
            format!("|H| {} |Γ| {}", group.order(), order),
        ],
    };
    Ok((report, aut))
}

/// A sampler that can also describe its own samples.
pub trait HintedSampler {
    type Choice: Clone;
    fn draw(&self, rng: &mut ChaCha8Rng) -> Result<(BitString, Self::Choice)>;
    fn hints(&self, choices: &[Self::Choice], b: usize) -> Result<Vec<Description>>;
}

/// Random isomorphic copies of one object.
pub struct ObjectSampler {
    pub base: UniverseElement,
    pub aut: Vec<GroupElement>,
}

impl HintedSampler for ObjectSampler {
    type Choice = GroupElement;

    fn draw(&self, rng: &mut ChaCha8Rng) -> Result<(BitString, GroupElement)> {
        let h = self.base.group().random(rng);
        Ok((self.base.act(&h)?.invariant(), h))
    }

    fn hints(&self, choices: &[GroupElement], b: usize) -> Result<Vec<Description>> {
        let space = CosetSpace::Orbits {
            bases: vec![(self.base.clone(), self.aut.clone())],
        };
        let c: Vec<(usize, GroupElement)> = choices.iter().map(|g| (0, g.clone())).collect();
        Ok(vec![blocked_coset_description(space, b, &c)?])
    }
}

/// Canonical representatives of random cosets `hΓ` in `H`, written as
/// image tables. Flat on `|H|/|Γ|` outcomes.
pub struct CosetSampler {
    pub degree: usize,
    pub h: Vec<Permutation>,
    pub gamma: Vec<Permutation>,
    idx: CosetIndexing,
}

impl CosetSampler {
    pub fn new(degree: usize, h: Vec<Permutation>, gamma: Vec<Permutation>) -> Result<Self> {
        let idx = CosetIndexing::new(PermGroup::new(degree, h.clone())?, PermGroup::new(degree, gamma.clone())?)?;
        Ok(Self { degree, h, gamma, idx })
    }
}

impl HintedSampler for CosetSampler {
    type Choice = Permutation;

    fn draw(&self, rng: &mut ChaCha8Rng) -> Result<(BitString, Permutation)> {
        let p = near_uniform_element(self.idx.h(), rng);
        let rep = self.idx.canonical(&p)?;
        let w = width_for(self.degree as u64);
        let mut out = BitString::new();
        for &x in rep.images() {
            out.push_uint(x as u64, w);
        }
        Ok((out, p))
    }

    fn hints(&self, choices: &[Permutation], b: usize) -> Result<Vec<Description>> {
        let space = CosetSpace::Cosets {
            degree: self.degree,
            h: self.h.clone(),
            gamma: self.gamma.clone(),
        };
        let c: Vec<(usize, GroupElement)> = choices.iter().map(|p| (0, GroupElement::Perm(p.clone()))).collect();
        Ok(vec![blocked_coset_description(space, b, &c)?])
    }
}

/// `cost(y₁…y_t)/t` for `t` fresh samples.
pub fn entropy_underestimate<S: HintedSampler>(sampler: &S, t: usize, b: usize, model: &CostModel, seed: u64) -> Result<EstimatorReport> {
    if t == 0 {
        return Err(domain("t must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = BitString::new();
    let mut choices = Vec::with_capacity(t);
    for _ in 0..t {
        let (s, c) = sampler.draw(&mut rng)?;
        y.extend(&s);
        choices.push(c);
    }
    let report = model.cost(&y, &sampler.hints(&choices, b)?);
    Ok(EstimatorReport {
        value: report.total() as f64 / t as f64,
        mode: EstimatorMode::PacUnder,
        deviation: DELTA,
        trace: vec![format!("t {t} b {b}"), format!("best {}", report.best)],
    })
}

/// The two-sided threshold `θ̃ = t(min(s̃₀, s̃₁) + ½)` from fresh samples of
/// each side.
pub fn estimate_threshold(inst: &IsoInstance, t: usize, strategy: AutStrategy, model: &CostModel, seed: u64) -> Result<(f64, [EstimatorReport; 2])> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, 0]));
    let mut reports = Vec::with_capacity(2);
    for r in 0..2 {
        let base = inst.side(r).clone();
        let aut = aut_generators(&base, strategy, &mut rng)?;
        let sampler = ObjectSampler { base, aut };
        reports.push(entropy_underestimate(
            &sampler,
            THRESHOLD_SAMPLES,
            THRESHOLD_BLOCK,
            model,
            derive_seed(&[seed, 1 + r as u64]),
        )?);
    }
    let s = reports[0].value.min(reports[1].value);
    let reports: [EstimatorReport; 2] = reports.try_into().unwrap();
    Ok((t as f64 * (s + 0.5), reports))
}

#[derive(Clone, Debug)]
pub enum WitnessSearch {
    Found(GroupElement),
    /// Every group element was tried.
    Exhausted,
    BudgetSpent,
}

/// Looks for `h` with `act(h, ω₀) ≅ ω₁`: over all of `H` when
/// `|H| ≤ budget`, otherwise over `budget` random elements.
pub fn find_witness<R: Rng + ?Sized>(inst: &IsoInstance, budget: u64, rng: &mut R) -> Result<WitnessSearch> {
    let group = inst.group();
    let target = inst.x1.invariant();
    let order = group.order();
    match order.to_u64() {
        Some(o) if o <= budget => {
            for k in 0..o {
                let g = group.unrank(&BigUint::from(k))?;
                if inst.x0.act(&g)?.invariant() == target {
                    return Ok(WitnessSearch::Found(g));
                }
            }
            Ok(WitnessSearch::Exhausted)
        }
        _ => {
            for _ in 0..budget {
                let g = group.random(rng);
                if inst.x0.act(&g)?.invariant() == target {
                    return Ok(WitnessSearch::Found(g));
                }
            }
            Ok(WitnessSearch::BudgetSpent)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    NoFalseNegatives,
    NoFalsePositives,
    ZeroError,
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "no-false-negatives" => Ok(Self::NoFalseNegatives),
            "no-false-positives" => Ok(Self::NoFalsePositives),
            "zero-error" => Ok(Self::ZeroError),
            _ => Err(domain(format!("unknown mode {s:?}"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::NoFalseNegatives => "no-false-negatives",
            Self::NoFalsePositives => "no-false-positives",
            Self::ZeroError => "zero-error",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Isomorphic,
    NonIsomorphic,
    Unknown,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Isomorphic => "isomorphic",
            Self::NonIsomorphic => "non-isomorphic",
            Self::Unknown => "unknown",
        })
    }
}

#[derive(Clone, Debug)]
pub struct DecideConfig {
    pub t: usize,
    /// Block size; `None` means `⌈√t⌉`.
    pub b: Option<usize>,
    pub budget: u64,
    pub strategy: AutStrategy,
    pub c_machine: usize,
}

impl Default for DecideConfig {
    fn default() -> Self {
        Self {
            t: 1024,
            b: None,
            budget: DEFAULT_BUDGET,
            strategy: AutStrategy::Sampling,
            c_machine: C_MACHINE,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Decision {
    pub verdict: Verdict,
    pub s_tilde: f64,
    pub theta: f64,
    /// Cost of `y` under the model, when the reduction ran.
    pub cost: Option<usize>,
    pub b: usize,
    pub witness: Option<GroupElement>,
    pub trace: Vec<String>,
}

/// Runs the reduction on `inst` and turns the cost comparison and the
/// witness search into a verdict.
///
/// * no-false-negatives: non-isomorphic iff `cost(y) > θ`. Hints for the
///   one-orbit description need a witness; if the search neither finds
///   one nor exhausts `H` the verdict is unknown.
/// * no-false-positives: isomorphic iff a checked witness is found;
///   non-isomorphic only after exhausting `H`.
/// * zero-error: a verified witness, or a cost above `θ` with `H`
///   exhausted; otherwise unknown.
pub fn decide(inst: &IsoInstance, mode: Mode, cfg: &DecideConfig, seed: u64) -> Result<Decision> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, 10]));
    let mut trace = Vec::new();
    let search = find_witness(inst, cfg.budget, &mut rng)?;
    let witness = match &search {
        WitnessSearch::Found(w) => Some(w.clone()),
        _ => None,
    };
    trace.push(format!(
        "witness search: {}",
        match &search {
            WitnessSearch::Found(_) => "found",
            WitnessSearch::Exhausted => "exhausted",
            WitnessSearch::BudgetSpent => "budget spent",
        }
    ));
    let b = cfg.b.unwrap_or_else(|| default_block(cfg.t));
    let nfp = match search {
        WitnessSearch::Found(_) => Verdict::Isomorphic,
        WitnessSearch::Exhausted => Verdict::NonIsomorphic,
        WitnessSearch::BudgetSpent => Verdict::Unknown,
    };
    if mode == Mode::NoFalsePositives {
        return Ok(Decision {
            verdict: nfp,
            s_tilde: f64::NAN,
            theta: f64::NAN,
            cost: None,
            b,
            witness,
            trace,
        });
    }

    let (rep0, aut0) = log_orbit_overestimate(&inst.x0, cfg.strategy, &mut rng)?;
    let (rep1, aut1) = log_orbit_overestimate(&inst.x1, cfg.strategy, &mut rng)?;
    let s_tilde = rep0.value.min(rep1.value);
    trace.push(format!("s0 {:.6} s1 {:.6} ({})", rep0.value, rep1.value, cfg.strategy));

    let mut out = reduce(inst, cfg.t, s_tilde, b, derive_seed(&[seed, 20]))?;
    out.transcript.s_source = format!("log-orbit-overestimate/{}", cfg.strategy);
    let mut hints = vec![union_hint(&out, inst, &aut0, &aut1)?];
    if let Some(w) = &witness {
        hints.extend(hint_for_isomorphic(&out, inst, Some(w), &aut0)?);
    }
    let model = CostModel::with_c_machine(cfg.c_machine);
    let report = model.cost(&out.y, &hints);
    trace.push(format!("best {}", report.best));
    for (codec, why) in &report.rejected {
        trace.push(format!("rejected {codec}: {why}"));
    }
    let cost = report.total();
    let above = cost as f64 > out.theta;
    let nfn = if witness.is_none() && nfp == Verdict::Unknown {
        // no one-orbit hint could be built and none was ruled out
        Verdict::Unknown
    } else if above {
        Verdict::NonIsomorphic
    } else {
        Verdict::Isomorphic
    };
    let verdict = match mode {
        Mode::NoFalseNegatives => nfn,
        _ => match (nfp, nfn) {
            (Verdict::Isomorphic, _) => Verdict::Isomorphic,
            (Verdict::NonIsomorphic, Verdict::NonIsomorphic) => Verdict::NonIsomorphic,
            _ => Verdict::Unknown,
        },
    };
    Ok(Decision {
        verdict,
        s_tilde,
        theta: out.theta,
        cost: Some(cost),
        b,
        witness,
        trace,
    })
}

/// Ground truth by exhaustive search.
pub fn brute_force_isomorphic(inst: &IsoInstance) -> Result<bool> {
    let target = inst.x1.invariant();
    for g in inst.group().elements()? {
        if inst.x0.act(&g)?.invariant() == target {
            return Ok(true);
        }
    }
    Ok(false)
}

/// `G(n, ½)`.
pub fn random_graph<R: Rng + ?Sized>(n: usize, rng: &mut R) -> UniverseElement {
    let edges: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .filter(|_| rng.gen())
        .collect::<Vec<_>>();
    UniverseElement::graph(n, &edges).unwrap()
}

/// A graph and, with probability ½, a relabeled copy of it, otherwise an
/// independent random graph.
pub fn random_graph_pair<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<IsoInstance> {
    let g0 = random_graph(n, rng);
    let g1 = if rng.gen() {
        g0.act(&ActingGroup::Symmetric(n).random(rng))?
    } else {
        random_graph(n, rng)
    };
    IsoInstance::new(g0, g1)
}

/// Experiment sweep configuration, read from `key=value` lines.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    /// `(id, instance)` pairs.
    pub instances: Vec<(String, IsoInstance)>,
    pub t: Vec<usize>,
    pub b: Option<usize>,
    pub seeds: Vec<u64>,
    pub mode: Mode,
    pub strategy: AutStrategy,
    pub budget: u64,
    pub c_machine: usize,
}

fn config_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Config { line, msg: msg.into() }
}

fn parse_list<T: FromStr>(line: usize, v: &str) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for part in v.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        out.push(part.parse().map_err(|_| config_err(line, format!("bad value {part:?}")))?);
    }
    if out.is_empty() {
        return Err(config_err(line, "empty list"));
    }
    Ok(out)
}

fn parse_seeds(line: usize, v: &str) -> Result<Vec<u64>> {
    if let Some((a, b)) = v.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| config_err(line, "bad seed range"))?;
        let b: u64 = b.trim().parse().map_err(|_| config_err(line, "bad seed range"))?;
        if a >= b {
            return Err(config_err(line, "empty seed range"));
        }
        return Ok((a..b).collect());
    }
    parse_list(line, v)
}

impl ExperimentConfig {
    /// Parses a config. `load` resolves `instance=` paths to file contents.
    ///
    /// Keys: `instance` (repeatable), `random_graph_pairs`, `n`, `pair_seed`,
    /// `t` (list), `b` (number or `auto`), `seeds` (list or `a..b`), `mode`,
    /// `strategy`, `budget`, `c_machine`. `#` starts a comment.
    pub fn parse(text: &str, load: impl Fn(&str) -> std::io::Result<String>) -> Result<Self> {
        let mut instances = Vec::new();
        let mut pairs = 0usize;
        let mut n = 6usize;
        let mut pair_seed = 0u64;
        let mut cfg = ExperimentConfig {
            instances: Vec::new(),
            t: vec![1024],
            b: None,
            seeds: vec![0],
            mode: Mode::ZeroError,
            strategy: AutStrategy::Sampling,
            budget: DEFAULT_BUDGET,
            c_machine: C_MACHINE,
        };
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap().trim();
            if content.is_empty() {
                continue;
            }
            let (k, v) = content
                .split_once('=')
                .ok_or_else(|| config_err(line, "expected key=value"))?;
            let (k, v) = (k.trim(), v.trim());
            let num = |v: &str| -> Result<u64> { v.parse().map_err(|_| config_err(line, format!("bad number {v:?}"))) };
            match k {
                "instance" => {
                    let body = load(v).map_err(|e| config_err(line, format!("{v}: {e}")))?;
                    let inst = IsoInstance::parse(&body).map_err(|e| config_err(line, format!("{v}: {e}")))?;
                    instances.push((v.to_string(), inst));
                }
                "random_graph_pairs" => pairs = num(v)? as usize,
                "n" => n = num(v)? as usize,
                "pair_seed" => pair_seed = num(v)?,
                "t" => cfg.t = parse_list(line, v)?,
                "b" if v == "auto" => cfg.b = None,
                "b" => cfg.b = Some(num(v)? as usize),
                "seeds" => cfg.seeds = parse_seeds(line, v)?,
                "mode" => cfg.mode = v.parse().map_err(|e: Error| config_err(line, e.to_string()))?,
                "strategy" => cfg.strategy = v.parse().map_err(|e: Error| config_err(line, e.to_string()))?,
                "budget" => cfg.budget = num(v)?,
                "c_machine" => cfg.c_machine = num(v)? as usize,
                _ => return Err(config_err(line, format!("unknown key {k:?}"))),
            }
        }
        if cfg.t.contains(&0) || cfg.b == Some(0) {
            return Err(config_err(0, "t and b must be positive"));
        }
        if !(1..=8).contains(&n) {
            return Err(config_err(0, "n must be between 1 and 8"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(pair_seed);
        for k in 0..pairs {
            instances.push((format!("pair-{k}"), random_graph_pair(n, &mut rng)?));
        }
        if instances.is_empty() {
            return Err(config_err(0, "no instances"));
        }
        cfg.instances = instances;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentRow {
    pub instance: String,
    pub truth: Option<bool>,
    pub t: usize,
    pub b: usize,
    pub s_tilde: f64,
    pub theta: f64,
    pub cost: Option<usize>,
    pub verdict: Verdict,
    pub seed: u64,
}

impl ExperimentRow {
    /// A verdict contradicting the ground truth.
    pub fn violation(&self) -> bool {
        matches!(
            (self.truth, self.verdict),
            (Some(true), Verdict::NonIsomorphic) | (Some(false), Verdict::Isomorphic)
        )
    }
}

pub const CSV_HEADER: [&str; 9] = ["instance", "truth", "t", "b", "s_tilde", "theta", "cost", "verdict", "seed"];

/// Runs every `(instance, t, seed)` trial; trials run in parallel and
/// come back in config order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRow>> {
    let truths: Vec<Option<bool>> = cfg
        .instances
        .par_iter()
        .map(|(_, inst)| brute_force_isomorphic(inst).ok())
        .collect();
    let mut trials = Vec::new();
    for (ii, _) in cfg.instances.iter().enumerate() {
        for &t in &cfg.t {
            for &seed in &cfg.seeds {
                trials.push((ii, t, seed));
            }
        }
    }
    trials
        .par_iter()
        .map(|&(ii, t, seed)| {
            let (id, inst) = &cfg.instances[ii];
            let dc = DecideConfig {
                t,
                b: cfg.b,
                budget: cfg.budget,
                strategy: cfg.strategy,
                c_machine: cfg.c_machine,
            };
            let d = decide(inst, cfg.mode, &dc, derive_seed(&[seed, ii as u64, t as u64]))?;
            Ok(ExperimentRow {
                instance: id.clone(),
                truth: truths[ii],
                t,
                b: d.b,
                s_tilde: d.s_tilde,
                theta: d.theta,
                cost: d.cost,
                verdict: d.verdict,
                seed,
            })
        })
        .collect()
}

pub fn write_csv<W: Write>(rows: &[ExperimentRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Invariant(format!("csv output: {e}"));
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in rows {
        let truth = match r.truth {
            Some(true) => "isomorphic",
            Some(false) => "non-isomorphic",
            None => "unknown",
        };
        let fmt_f = |x: f64| if x.is_finite() { format!("{x:.6}") } else { String::new() };
        w.write_record([
            r.instance.clone(),
            truth.to_string(),
            r.t.to_string(),
            r.b.to_string(),
            fmt_f(r.s_tilde),
            fmt_f(r.theta),
            r.cost.map_or(String::new(), |c| c.to_string()),
            r.verdict.to_string(),
            r.seed.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Invariant(format!("csv output: {e}")))?;
    Ok(())
}
