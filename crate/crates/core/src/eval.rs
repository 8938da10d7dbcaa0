//! Leave-one-out offline evaluation.
//!
//! A user `u` is drawn from `P(u)`, one of their items `i` from `P(i|u,ω)`,
//! `i` is hidden, and the recommender sees the remaining profile `u_{-i}`.
//! The score is the expected quality of the recommendation at recovering `i`.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{build_snapshot, InteractionLog, ItemIdx, Snapshot, Timestamp, UserIdx};
use crate::error::{Error, Result};
use crate::prob::{ItemDistribution, ProbabilityModel, WeightVector, Weighted};
use crate::scalar::Scalar;

/// Number of stochastic draws generated from one random substream.
pub const DRAWS_PER_BLOCK: u64 = 1024;

/// A ranked recommendation. Slots can hold items unknown to the snapshot
/// (`None`); they keep their rank but never match a hidden item.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Ranking(pub Vec<Option<ItemIdx>>);

impl Ranking {
    /// 1-based rank of `item`, if recommended.
    pub fn rank_of(&self, item: ItemIdx) -> Option<usize> {
        self.0.iter().position(|s| *s == Some(item)).map(|r| r + 1)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Produces a ranking of at most `k` distinct items from a partial profile.
pub trait Recommender: Sync {
    fn recommend(&self, profile: &[ItemIdx], snap: &Snapshot) -> Ranking;
}

/// Recommends the same items to everyone, whatever the profile or time.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstantRecommender {
    items: Vec<String>,
}

impl ConstantRecommender {
    pub fn new<S: Into<String>>(items: impl IntoIterator<Item = S>) -> Result<Self> {
        let items: Vec<String> = items.into_iter().map(Into::into).collect();
        let mut seen = HashSet::new();
        if let Some(dup) = items.iter().find(|i| !seen.insert(i.as_str())) {
            return Err(Error::InvalidConfig(format!(
                "item `{dup}` is recommended twice"
            )));
        }
        Ok(ConstantRecommender { items })
    }

    /// Keep only the first `k` items.
    pub fn with_k(mut self, k: usize) -> Self {
        self.items.truncate(k);
        self
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn k(&self) -> usize {
        self.items.len()
    }
}

impl Recommender for ConstantRecommender {
    fn recommend(&self, _profile: &[ItemIdx], snap: &Snapshot) -> Ranking {
        Ranking(self.items.iter().map(|id| snap.item_index(id)).collect())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum QualityFunction {
    /// 1 if the hidden item is recommended, else 0.
    #[default]
    HitInTopK,
    /// 1 / rank of the hidden item (1-based), 0 if absent.
    InverseRank,
}

impl QualityFunction {
    pub fn score<T: Scalar>(self, rank: Option<usize>) -> T {
        match (self, rank) {
            (_, None) => T::zero(),
            (QualityFunction::HitInTopK, Some(_)) => T::one(),
            (QualityFunction::InverseRank, Some(r)) => T::one() / T::from_count(r),
        }
    }
}

impl fmt::Display for QualityFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QualityFunction::HitInTopK => "hit",
            QualityFunction::InverseRank => "invrank",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EvalMode {
    /// Every (user, item) pair, weighted by its selection probability.
    Exhaustive,
    /// Monte Carlo estimate from `draws` (user, item) samples.
    Stochastic { draws: u64, seed: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalConfig<T = f64> {
    pub mode: EvalMode,
    /// Item weights reshaping `P(i|u)`; `None` means all ones.
    pub weights: Option<WeightVector<T>>,
    /// Per-time weights for [`timeline_evaluate`]; a time without an entry
    /// falls back to `weights`.
    pub schedule: BTreeMap<Timestamp, WeightVector<T>>,
}

impl<T: Scalar> EvalConfig<T> {
    pub fn exhaustive() -> Self {
        EvalConfig {
            mode: EvalMode::Exhaustive,
            weights: None,
            schedule: BTreeMap::new(),
        }
    }

    pub fn stochastic(draws: u64, seed: u64) -> Self {
        EvalConfig {
            mode: EvalMode::Stochastic { draws, seed },
            weights: None,
            schedule: BTreeMap::new(),
        }
    }

    pub fn with_weights(mut self, weights: WeightVector<T>) -> Self {
        self.weights = Some(weights);
        self
    }

    pub fn with_schedule(mut self, schedule: BTreeMap<Timestamp, WeightVector<T>>) -> Self {
        self.schedule = schedule;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalResult<T = f64> {
    pub score: T,
    /// Standard error of the estimate; zero for exhaustive evaluation.
    pub std_error: T,
    pub pairs_evaluated: u64,
    /// Seed of the random stream, for stochastic evaluation.
    pub seed: Option<u64>,
}

/// `profile` without `item`. The result may be empty.
pub fn remove_item<I>(profile: &[I], item: &I) -> Result<Vec<I>>
where
    I: PartialEq + Clone + fmt::Display,
{
    let pos = profile
        .iter()
        .position(|x| x == item)
        .ok_or_else(|| Error::ItemNotInProfile {
            user: None,
            item: item.to_string(),
        })?;
    let mut rest = Vec::with_capacity(profile.len().saturating_sub(1));
    rest.extend_from_slice(&profile[..pos]);
    rest.extend_from_slice(&profile[pos + 1..]);
    Ok(rest)
}

fn fill_without(profile: &[ItemIdx], pos: usize, buf: &mut Vec<ItemIdx>) {
    buf.clear();
    buf.extend_from_slice(&profile[..pos]);
    buf.extend_from_slice(&profile[pos + 1..]);
}

/// Offline score of `rec` on `snap`.
///
/// Stochastic mode draws a user by inverting the cumulative table of `P(u)`
/// with one uniform variate, then an item by inverting the cumulative
/// `P(·|u,ω)` over the profile with a second variate. Draw `n` belongs to
/// block `n / DRAWS_PER_BLOCK`, whose variates come from ChaCha8 seeded with
/// `seed` on stream `block`; results do not depend on the thread count.
pub fn evaluate<T: Scalar, R: Recommender + ?Sized>(
    rec: &R,
    snap: &Snapshot,
    model: &ProbabilityModel<T>,
    quality: QualityFunction,
    cfg: &EvalConfig<T>,
) -> Result<EvalResult<T>> {
    let bound = model.bind(snap)?;
    let identity = WeightVector::identity();
    let weighted = bound.weighted(cfg.weights.as_ref().unwrap_or(&identity));
    match cfg.mode {
        EvalMode::Exhaustive => Ok(exhaustive(rec, &weighted, quality)),
        EvalMode::Stochastic { draws, seed } => {
            if draws == 0 {
                return Err(Error::InvalidConfig("draws must be >= 1".into()));
            }
            Ok(stochastic(rec, &weighted, quality, draws, seed))
        }
    }
}

fn exhaustive<T: Scalar, R: Recommender + ?Sized>(
    rec: &R,
    weighted: &Weighted<'_, '_, T>,
    quality: QualityFunction,
) -> EvalResult<T> {
    let snap = weighted.snapshot();
    let per_user: Vec<T> = (0..snap.n_users() as u32)
        .into_par_iter()
        .map_init(Vec::new, |buf, u| {
            let u = UserIdx(u);
            let profile = snap.profile(u);
            let start = snap.profile_range(u).start;
            let mut acc = T::zero();
            for (pos, &i) in profile.iter().enumerate() {
                fill_without(profile, pos, buf);
                let ranking = rec.recommend(buf, snap);
                let q: T = quality.score(ranking.rank_of(i));
                acc += weighted.cond_at(u, i, start + pos) * q;
            }
            acc * weighted.model().user_prob(u)
        })
        .collect();
    EvalResult {
        score: per_user.into_iter().fold(T::zero(), |a, x| a + x),
        std_error: T::zero(),
        pairs_evaluated: snap.nnz() as u64,
        seed: None,
    }
}

// running (count, mean, sum of squared deviations)
#[derive(Clone, Copy)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if other.n == 0.0 {
            return self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * other.n / n,
            m2: self.m2 + other.m2 + d * d * self.n * other.n / n,
        }
    }
}

fn stochastic<T: Scalar, R: Recommender + ?Sized>(
    rec: &R,
    weighted: &Weighted<'_, '_, T>,
    quality: QualityFunction,
    draws: u64,
    seed: u64,
) -> EvalResult<T> {
    let snap = weighted.snapshot();
    let mut cumulative = Vec::with_capacity(snap.n_users());
    let mut acc = 0.0f64;
    for &p in weighted.model().user_probs() {
        acc += p.as_f64();
        cumulative.push(acc);
    }
    let n_blocks = draws.div_ceil(DRAWS_PER_BLOCK);
    let blocks: Vec<Moments> = (0..n_blocks)
        .into_par_iter()
        .map(|block| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(block);
            let first = block * DRAWS_PER_BLOCK;
            let count = DRAWS_PER_BLOCK.min(draws - first);
            let mut buf = Vec::new();
            let mut m = Moments {
                n: 0.0,
                mean: 0.0,
                m2: 0.0,
            };
            for _ in 0..count {
                let r: f64 = rng.gen::<f64>() * acc;
                let u = cumulative
                    .partition_point(|&c| c <= r)
                    .min(snap.n_users() - 1);
                let u = UserIdx(u as u32);
                let pos = draw_item(weighted, u, rng.gen::<f64>());
                let profile = snap.profile(u);
                fill_without(profile, pos, &mut buf);
                let ranking = rec.recommend(&buf, snap);
                let q: T = quality.score(ranking.rank_of(profile[pos]));
                m.push(q.as_f64());
            }
            m
        })
        .collect();
    let total = blocks.into_iter().fold(
        Moments {
            n: 0.0,
            mean: 0.0,
            m2: 0.0,
        },
        Moments::merge,
    );
    let std_error = if total.n > 1.0 {
        (total.m2 / (total.n - 1.0)).sqrt() / total.n.sqrt()
    } else {
        0.0
    };
    EvalResult {
        score: T::lit(total.mean),
        std_error: T::lit(std_error),
        pairs_evaluated: draws,
        seed: Some(seed),
    }
}

// profile position of the item selected by the uniform variate `r`
fn draw_item<T: Scalar>(weighted: &Weighted<'_, '_, T>, u: UserIdx, r: f64) -> usize {
    let snap = weighted.snapshot();
    let start = snap.profile_range(u).start;
    let profile = snap.profile(u);
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (pos, &i) in profile.iter().enumerate() {
        let p = weighted.cond_at(u, i, start + pos).as_f64();
        if p > 0.0 {
            last_positive = pos;
        }
        acc += p;
        if r < acc {
            return pos;
        }
    }
    last_positive
}

/// Score of a constant recommendation from the item marginal alone:
/// `Σ_i P(i) q(items, i)`.
pub fn constant_score<T: Scalar, S: AsRef<str>>(
    items: &[S],
    dist: &ItemDistribution<T>,
    quality: QualityFunction,
) -> T {
    let mut seen: HashSet<&str> = HashSet::new();
    let mut total = T::zero();
    for (r, item) in items.iter().enumerate() {
        let item = item.as_ref();
        if seen.insert(item) {
            total += dist.get(item) * quality.score::<T>(Some(r + 1));
        }
    }
    total
}

/// Evaluate `rec` on the snapshot of `log` at each of `times`.
pub fn timeline_evaluate<T: Scalar, R: Recommender + ?Sized>(
    rec: &R,
    log: &InteractionLog,
    times: &[Timestamp],
    model: &ProbabilityModel<T>,
    quality: QualityFunction,
    cfg: &EvalConfig<T>,
) -> Result<Vec<(Timestamp, EvalResult<T>)>> {
    if times.is_empty() {
        return Err(Error::InvalidConfig(
            "timeline needs at least one time".into(),
        ));
    }
    if times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig(
            "timeline times must be strictly increasing".into(),
        ));
    }
    times
        .iter()
        .map(|&t| {
            let snap = build_snapshot(log, t)?;
            let step_cfg = EvalConfig {
                mode: cfg.mode,
                weights: cfg.schedule.get(&t).or(cfg.weights.as_ref()).cloned(),
                schedule: BTreeMap::new(),
            };
            Ok((t, evaluate(rec, &snap, model, quality, &step_cfg)?))
        })
        .collect()
}
