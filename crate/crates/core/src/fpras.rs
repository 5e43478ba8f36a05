//! Approximate counting of the repairs entailing a conjunctive query, self-joins
//! allowed, by Karp–Luby estimation over homomorphic images; plus the naive
//! Monte-Carlo estimator for comparison.

use std::collections::BTreeSet;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fd::ChainCover;
use crate::model::{entails, enumerate_homomorphisms, ConjunctiveQuery, Database, Fact, FdSet, Substitution};
use crate::repair::{count_repairs_with, in_conflict};
use crate::sampler::{conditional_database, random_below, RepairSampler};

/// A consistent image `h(Q)` together with one homomorphism producing it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HomImage {
    pub facts: BTreeSet<Fact>,
    pub witness: Substitution,
}

/// Distinct consistent homomorphic images of `query` in `db`, sorted by fact
/// set.
pub fn hom_images(query: &ConjunctiveQuery, db: &Database, sigma: &FdSet) -> Vec<HomImage> {
    let mut images: Vec<HomImage> = Vec::new();
    let mut seen = BTreeSet::new();
    for h in enumerate_homomorphisms(query, db) {
        let facts: BTreeSet<Fact> = query
            .atoms()
            .iter()
            .map(|a| a.ground(&h).expect("homomorphisms bind every variable"))
            .collect();
        if seen.contains(&facts) {
            continue;
        }
        let list: Vec<&Fact> = facts.iter().collect();
        let consistent = list
            .iter()
            .enumerate()
            .all(|(i, f)| list[i + 1..].iter().all(|g| !in_conflict(f, g, sigma)));
        seen.insert(facts.clone());
        if consistent {
            images.push(HomImage { facts, witness: h });
        }
    }
    images.sort_by(|a, b| a.facts.cmp(&b.facts));
    images
}

/// Number of repairs of `db` containing the consistent fact set `h`.
pub fn count_conditional(db: &Database, sigma: &FdSet, h: &BTreeSet<Fact>) -> Result<BigUint> {
    let cover = ChainCover::new(db.schema().clone(), sigma)?;
    Ok(count_repairs_with(&conditional_database(db, sigma, h)?, &cover))
}

/// Accuracy and confidence of an approximate count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ApproxParams {
    pub epsilon: f64,
    pub delta: f64,
    pub seed: u64,
    /// Refuse queries with more homomorphic images than this.
    pub image_cap: Option<usize>,
}

impl ApproxParams {
    pub fn new(epsilon: f64, delta: f64, seed: u64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::Precondition(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Precondition(format!("delta must lie in (0, 1), got {delta}")));
        }
        Ok(ApproxParams {
            epsilon,
            delta,
            seed,
            image_cap: None,
        })
    }

    pub fn with_image_cap(mut self, cap: usize) -> Self {
        self.image_cap = Some(cap);
        self
    }

    /// Number of trials for `images` sets: `ceil(4 n ln(2/delta) / eps^2)`.
    pub fn trials(&self, images: usize) -> u64 {
        (4.0 * images as f64 * (2.0 / self.delta).ln() / (self.epsilon * self.epsilon)).ceil() as u64
    }
}

/// Outcome of [`karp_luby_count`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KarpLubyEstimate {
    pub images: usize,
    /// Sum of the per-image conditional counts.
    pub total_weight: BigUint,
    pub trials: u64,
    pub successes: u64,
    /// `total_weight * successes / trials`.
    pub raw: BigRational,
    /// `raw` rounded to the nearest integer.
    pub estimate: BigUint,
    /// The estimate is exact (no or a single image).
    pub exact: bool,
}

impl KarpLubyEstimate {
    fn exact(images: usize, count: BigUint) -> Self {
        KarpLubyEstimate {
            images,
            total_weight: count.clone(),
            trials: 0,
            successes: 0,
            raw: BigRational::from_integer(BigInt::from(count.clone())),
            estimate: count,
            exact: true,
        }
    }
}

/// Nearest integer to a non-negative rational, halves rounded up.
pub fn round_ratio(r: &BigRational) -> BigUint {
    let two = BigInt::from(2);
    (r.numer() * &two + r.denom())
        .div_floor(&(r.denom() * &two))
        .to_biguint()
        .expect("non-negative")
}

/// Chooses an index with probability proportional to its weight.
#[derive(Clone, Debug)]
struct Picker {
    small: Option<Vec<u64>>,
    big: Vec<BigUint>,
}

impl Picker {
    fn new(weights: &[BigUint]) -> Self {
        let mut acc = BigUint::zero();
        let big: Vec<BigUint> = weights
            .iter()
            .map(|w| {
                acc += w;
                acc.clone()
            })
            .collect();
        let small = big.iter().map(|c| c.to_u64()).collect();
        Picker { small, big }
    }

    fn pick<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match &self.small {
            Some(w) => {
                let r = rng.gen_range(0..*w.last().unwrap());
                w.partition_point(|&c| c <= r)
            }
            None => {
                let r = random_below(rng, self.big.last().unwrap());
                self.big.partition_point(|c| c <= &r)
            }
        }
    }
}

/// Karp–Luby machinery for one instance, built once and reusable across runs.
pub struct KarpLuby {
    images: Vec<Vec<usize>>,
    weights: Vec<BigUint>,
    samplers: Vec<RepairSampler>,
    picker: Option<Picker>,
    words: usize,
}

impl KarpLuby {
    pub fn new(db: &Database, sigma: &FdSet, query: &ConjunctiveQuery, image_cap: Option<usize>) -> Result<Self> {
        let cover = ChainCover::new(db.schema().clone(), sigma)?;
        let images = hom_images(query, db, sigma);
        if let Some(cap) = image_cap {
            if images.len() > cap {
                return Err(Error::Precondition(format!(
                    "{} homomorphic images exceed the cap of {cap}",
                    images.len()
                )));
            }
        }
        let all: Vec<&Fact> = db.facts().collect();
        let id_of = |f: &Fact| all.binary_search(&f).expect("fact of db");
        let mut ids = Vec::new();
        let mut weights = Vec::new();
        let mut samplers = Vec::new();
        for img in &images {
            let rest = conditional_database(db, sigma, &img.facts)?;
            let sampler = RepairSampler::with_ids(&rest, &cover, id_of);
            weights.push(sampler.count().clone());
            samplers.push(sampler);
            ids.push(img.facts.iter().map(id_of).collect());
        }
        let picker = (images.len() > 1).then(|| Picker::new(&weights));
        Ok(KarpLuby {
            images: ids,
            weights,
            samplers,
            picker,
            words: all.len().div_ceil(64),
        })
    }

    pub fn images(&self) -> usize {
        self.images.len()
    }

    pub fn weights(&self) -> &[BigUint] {
        &self.weights
    }

    pub fn total_weight(&self) -> BigUint {
        self.weights.iter().sum()
    }

    /// Index of the first image contained in the repair given as a bitset.
    fn first_contained(&self, bits: &[u64]) -> Option<usize> {
        self.images
            .iter()
            .position(|img| img.iter().all(|&i| bits[i / 64] >> (i % 64) & 1 == 1))
    }

    /// One trial: whether the sampled pair is canonical.
    pub fn trial<R: Rng + ?Sized>(&self, rng: &mut R, scratch: &mut Vec<usize>, bits: &mut Vec<u64>) -> bool {
        let picker = self.picker.as_ref().expect("trials need at least two images");
        let i = picker.pick(rng);
        scratch.clear();
        self.samplers[i].sample_ids(rng, scratch);
        bits.clear();
        bits.resize(self.words, 0);
        for &id in scratch.iter() {
            bits[id / 64] |= 1 << (id % 64);
        }
        self.first_contained(bits) == Some(i)
    }

    /// Runs the estimator; trial `t` uses stream `t` of a generator seeded
    /// with `params.seed`.
    pub fn run(&self, params: &ApproxParams) -> KarpLubyEstimate {
        match self.images.len() {
            0 => return KarpLubyEstimate::exact(0, BigUint::zero()),
            1 => return KarpLubyEstimate::exact(1, self.weights[0].clone()),
            _ => {}
        }
        let trials = params.trials(self.images.len());
        let mut scratch = Vec::new();
        let mut bits = Vec::new();
        let mut successes = 0u64;
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        for t in 0..trials {
            rng.set_stream(t);
            rng.set_word_pos(0);
            if self.trial(&mut rng, &mut scratch, &mut bits) {
                successes += 1;
            }
        }
        let total = self.total_weight();
        let raw = BigRational::new(
            BigInt::from(total.clone()) * BigInt::from(successes),
            BigInt::from(trials),
        );
        KarpLubyEstimate {
            images: self.images.len(),
            estimate: round_ratio(&raw),
            total_weight: total,
            trials,
            successes,
            raw,
            exact: false,
        }
    }
}

/// `(epsilon, delta)`-approximation of the number of repairs entailing `query`.
pub fn karp_luby_count(db: &Database, sigma: &FdSet, query: &ConjunctiveQuery, params: &ApproxParams) -> Result<KarpLubyEstimate> {
    Ok(KarpLuby::new(db, sigma, query, params.image_cap)?.run(params))
}

/// Outcome of [`monte_carlo_count`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MonteCarloEstimate {
    pub samples: u64,
    pub hits: u64,
    pub repairs: BigUint,
    pub raw: BigRational,
    pub estimate: BigUint,
}

/// Number of repairs times the fraction of `samples` uniform repairs that
/// entail `query`.
pub fn monte_carlo_count<R: Rng + ?Sized>(db: &Database, sigma: &FdSet, query: &ConjunctiveQuery, samples: u64, rng: &mut R) -> Result<MonteCarloEstimate> {
    if samples == 0 {
        return Err(Error::Precondition("at least one sample is needed".into()));
    }
    let cover = ChainCover::new(db.schema().clone(), sigma)?;
    let sampler = RepairSampler::new(db, &cover);
    let hits = (0..samples).filter(|_| entails(&sampler.sample(rng), query)).count() as u64;
    let repairs = sampler.count().clone();
    let raw = BigRational::new(BigInt::from(repairs.clone()) * BigInt::from(hits), BigInt::from(samples));
    Ok(MonteCarloEstimate {
        samples,
        hits,
        estimate: round_ratio(&raw),
        repairs,
        raw,
    })
}
