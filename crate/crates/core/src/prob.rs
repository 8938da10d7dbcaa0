//! Selection probabilities of the leave-one-out procedure: the user law
//! `P(u)`, the conditional item law `P(i|u)`, their reweighted form
//! `P(i|u,ω) = ω_i P(i|u) / Σ_{j∈I_u} ω_j P(j|u)`, the induced item marginal
//! and the pairwise joint of two independent item draws.
//!
//! All sums run user-major over the snapshot's sparse profiles in index order,
//! so results are reproducible bit for bit.

use std::collections::{BTreeMap, HashMap};

use crate::data::{ItemIdx, Snapshot, UserIdx};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Tolerance on the normalization of `P(u)` and of each `P(·|u)`.
pub const MODEL_SUM_TOL: f64 = 1e-12;
/// Tolerance on the normalization of an item distribution.
pub const DISTRIBUTION_SUM_TOL: f64 = 1e-9;

#[derive(Clone, Debug, Default, PartialEq)]
pub enum UserLaw<T = f64> {
    /// `P(u) = 1 / #U`.
    #[default]
    Uniform,
    /// Explicit probabilities by user identifier; users absent get 0.
    Explicit(HashMap<String, T>),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub enum ConditionalLaw<T = f64> {
    /// `P(i|u) = 1 / #I_u` for `i ∈ I_u`.
    #[default]
    Uniform,
    /// Explicit `user -> item -> P(i|u)`; every profile item must be listed.
    Explicit(HashMap<String, HashMap<String, T>>),
}

/// Rules for `P(u)` and `P(i|u)`. A model is a rule, not a table: it is
/// resolved against a particular snapshot with [`ProbabilityModel::bind`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProbabilityModel<T = f64> {
    pub user_law: UserLaw<T>,
    pub conditional_law: ConditionalLaw<T>,
}

impl<T: Scalar> ProbabilityModel<T> {
    /// Uniform users and uniform items within each profile.
    pub fn uniform() -> Self {
        ProbabilityModel {
            user_law: UserLaw::Uniform,
            conditional_law: ConditionalLaw::Uniform,
        }
    }

    /// Resolve the laws into dense tables over `snap`'s users and pairs.
    pub fn bind<'s>(&self, snap: &'s Snapshot) -> Result<BoundModel<'s, T>> {
        let user_prob = match &self.user_law {
            UserLaw::Uniform => {
                let p = T::one() / T::from_count(snap.n_users());
                vec![p; snap.n_users()]
            }
            UserLaw::Explicit(law) => {
                let probs: Vec<T> = snap
                    .user_ids()
                    .iter()
                    .map(|id| law.get(id).copied().unwrap_or_else(T::zero))
                    .collect();
                check_law(&probs, "user law")?;
                probs
            }
        };

        let mut cond_prob = Vec::with_capacity(snap.nnz());
        for u in snap.users() {
            let profile = snap.profile(u);
            match &self.conditional_law {
                ConditionalLaw::Uniform => {
                    let p = T::one() / T::from_count(profile.len());
                    cond_prob.extend(std::iter::repeat_n(p, profile.len()));
                }
                ConditionalLaw::Explicit(law) => {
                    let user = snap.user_id(u);
                    let row = law.get(user).ok_or_else(|| {
                        Error::InvalidModel(format!("no conditional law for user `{user}`"))
                    })?;
                    let start = cond_prob.len();
                    for &i in profile {
                        let item = snap.item_id(i);
                        let p = row.get(item).copied().ok_or_else(|| {
                            Error::InvalidModel(format!(
                                "no conditional probability for (`{user}`, `{item}`)"
                            ))
                        })?;
                        cond_prob.push(p);
                    }
                    check_law(&cond_prob[start..], &format!("conditional law of `{user}`"))?;
                }
            }
        }

        Ok(BoundModel {
            snap,
            user_prob,
            cond_prob,
        })
    }
}

fn check_law<T: Scalar>(probs: &[T], what: &str) -> Result<()> {
    if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < T::zero()) {
        return Err(Error::InvalidModel(format!(
            "{what} has invalid probability {p}"
        )));
    }
    let total: T = probs.iter().copied().sum();
    if (total - T::one()).abs() > T::sum_tolerance(MODEL_SUM_TOL, probs.len()) {
        return Err(Error::InvalidModel(format!(
            "{what} sums to {total}, not 1"
        )));
    }
    Ok(())
}

/// A probability model resolved against one snapshot.
#[derive(Clone, Debug)]
pub struct BoundModel<'s, T = f64> {
    snap: &'s Snapshot,
    user_prob: Vec<T>,
    // aligned with the snapshot's flat pair order
    cond_prob: Vec<T>,
}

impl<'s, T: Scalar> BoundModel<'s, T> {
    pub fn snapshot(&self) -> &'s Snapshot {
        self.snap
    }

    pub fn user_prob(&self, u: UserIdx) -> T {
        self.user_prob[u.index()]
    }

    pub fn user_probs(&self) -> &[T] {
        &self.user_prob
    }

    /// `P(i|u)` for the pair at flat position `pos`.
    pub fn cond_prob_at(&self, pos: usize) -> T {
        self.cond_prob[pos]
    }

    /// `P(i|u)`, zero when `i ∉ I_u`.
    pub fn cond_prob(&self, u: UserIdx, i: ItemIdx) -> T {
        self.snap
            .pair_position(u, i)
            .map_or_else(T::zero, |pos| self.cond_prob[pos])
    }

    /// Attach a weight vector, precomputing every per-user normalizer.
    pub fn weighted(&self, weights: &WeightVector<T>) -> Weighted<'_, 's, T> {
        Weighted::new(self, weights.dense(self.snap), weights.is_identity())
    }

    /// Attach dense weights indexed by [`ItemIdx`]. Every entry must be > 0.
    pub fn weighted_dense(&self, weights: Vec<T>) -> Weighted<'_, 's, T> {
        assert_eq!(weights.len(), self.snap.n_items());
        Weighted::new(self, weights, false)
    }

    /// The unweighted item marginal, as a dense vector.
    pub fn marginal_dense(&self) -> Vec<T> {
        self.weighted(&WeightVector::identity()).marginal_dense()
    }
}

/// A bound model together with item weights: the laws `P(i|u,ω)`.
#[derive(Clone, Debug)]
pub struct Weighted<'m, 's, T = f64> {
    model: &'m BoundModel<'s, T>,
    weights: Vec<T>,
    // Σ_{j∈I_u} ω_j P(j|u), unused when `identity`
    norms: Vec<T>,
    identity: bool,
}

impl<'m, 's, T: Scalar> Weighted<'m, 's, T> {
    fn new(model: &'m BoundModel<'s, T>, weights: Vec<T>, identity: bool) -> Self {
        let snap = model.snap;
        let norms = if identity {
            Vec::new()
        } else {
            snap.users()
                .map(|u| {
                    let range = snap.profile_range(u);
                    snap.profile(u)
                        .iter()
                        .zip(&model.cond_prob[range])
                        .map(|(&i, &p)| weights[i.index()] * p)
                        .sum()
                })
                .collect()
        };
        Weighted {
            model,
            weights,
            norms,
            identity,
        }
    }

    pub fn model(&self) -> &'m BoundModel<'s, T> {
        self.model
    }

    pub fn snapshot(&self) -> &'s Snapshot {
        self.model.snap
    }

    pub fn weight(&self, i: ItemIdx) -> T {
        self.weights[i.index()]
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// `P(i|u,ω)` for item `i` stored at flat pair position `pos` of user `u`.
    #[inline]
    pub fn cond_at(&self, u: UserIdx, i: ItemIdx, pos: usize) -> T {
        let p = self.model.cond_prob[pos];
        if self.identity {
            p
        } else {
            self.weights[i.index()] * p / self.norms[u.index()]
        }
    }

    /// `P(i|u,ω)`, zero when `i ∉ I_u`.
    pub fn cond(&self, u: UserIdx, i: ItemIdx) -> T {
        self.model
            .snap
            .pair_position(u, i)
            .map_or_else(T::zero, |pos| self.cond_at(u, i, pos))
    }

    /// Visit `(item, P(i|u,ω))` over the profile of `u`.
    pub fn for_each_in_profile(&self, u: UserIdx, mut f: impl FnMut(ItemIdx, T)) {
        let snap = self.model.snap;
        let start = snap.profile_range(u).start;
        for (k, &i) in snap.profile(u).iter().enumerate() {
            f(i, self.cond_at(u, i, start + k));
        }
    }

    /// `P(i|ω) = Σ_u P(i|u,ω) P(u)` for every item, in one pass over the pairs.
    pub fn marginal_dense(&self) -> Vec<T> {
        let snap = self.model.snap;
        let mut probs = vec![T::zero(); snap.n_items()];
        for u in snap.users() {
            let pu = self.model.user_prob[u.index()];
            self.for_each_in_profile(u, |i, c| probs[i.index()] += c * pu);
        }
        probs
    }

    pub fn marginal(&self) -> ItemDistribution<T> {
        ItemDistribution::from_dense(self.model.snap, &self.marginal_dense())
    }

    /// `P(i,k|ω) = Σ_{u ∈ U_i ∩ U_k} P(i|u,ω) P(k|u,ω) P(u)`.
    pub fn pairwise(&self, i: ItemIdx, k: ItemIdx) -> T {
        let snap = self.model.snap;
        let (hi, hk) = (snap.holders(i), snap.holders(k));
        // walk the shorter holder list; both yield U_i ∩ U_k in user order
        let (walk, other) = if hk.len() < hi.len() {
            (hk, i)
        } else {
            (hi, k)
        };
        walk.iter()
            .filter(|&&u| snap.contains(u, other))
            .map(|&u| self.cond(u, i) * self.cond(u, k) * self.model.user_prob[u.index()])
            .fold(T::zero(), |acc, x| acc + x)
    }
}

/// Positive per-item weights; items without an entry have weight 1.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeightVector<T = f64> {
    weights: BTreeMap<String, T>,
}

impl<T: Scalar> WeightVector<T> {
    /// All weights equal to 1.
    pub fn identity() -> Self {
        WeightVector {
            weights: BTreeMap::new(),
        }
    }

    pub fn from_pairs<I, S>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
    {
        let mut w = Self::identity();
        for (item, weight) in pairs {
            w.set(item, weight)?;
        }
        Ok(w)
    }

    /// The same weight `c` on every listed item.
    pub fn constant<'a>(items: impl IntoIterator<Item = &'a str>, c: T) -> Result<Self> {
        Self::from_pairs(items.into_iter().map(|i| (i, c)))
    }

    pub fn set(&mut self, item: impl Into<String>, weight: T) -> Result<()> {
        let item = item.into();
        if !(weight.is_finite() && weight > T::zero()) {
            return Err(Error::InvalidWeight {
                item,
                weight: weight.as_f64(),
            });
        }
        self.weights.insert(item, weight);
        Ok(())
    }

    pub fn get(&self, item: &str) -> T {
        self.weights.get(item).copied().unwrap_or_else(T::one)
    }

    /// Explicitly stored weights, sorted by item identifier.
    pub fn iter(&self) -> impl Iterator<Item = (&str, T)> {
        self.weights.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// True when every weight is exactly 1.
    pub fn is_identity(&self) -> bool {
        self.weights.values().all(|w| *w == T::one())
    }

    /// Weights of `snap`'s items indexed by [`ItemIdx`]; entries for items
    /// outside the snapshot are ignored.
    pub fn dense(&self, snap: &Snapshot) -> Vec<T> {
        let mut dense = vec![T::one(); snap.n_items()];
        for (item, w) in &self.weights {
            if let Some(i) = snap.item_index(item) {
                dense[i.index()] = *w;
            }
        }
        dense
    }
}

/// A probability distribution over item identifiers.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ItemDistribution<T = f64> {
    probs: BTreeMap<String, T>,
}

impl<T: Scalar> ItemDistribution<T> {
    /// Validates non-negativity and normalization (±1e-9).
    pub fn new(probs: BTreeMap<String, T>) -> Result<Self> {
        if let Some((item, p)) = probs
            .iter()
            .find(|(_, p)| !p.is_finite() || **p < T::zero())
        {
            return Err(Error::InvalidDistribution(format!(
                "item `{item}` has probability {p}"
            )));
        }
        let total: T = probs.values().copied().sum();
        if (total - T::one()).abs() > T::sum_tolerance(DISTRIBUTION_SUM_TOL, probs.len()) {
            return Err(Error::InvalidDistribution(format!(
                "sums to {total}, not 1"
            )));
        }
        Ok(ItemDistribution { probs })
    }

    pub fn from_pairs<I, S>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
    {
        Self::new(pairs.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }

    pub(crate) fn from_dense(snap: &Snapshot, dense: &[T]) -> Self {
        ItemDistribution {
            probs: snap
                .item_ids()
                .iter()
                .cloned()
                .zip(dense.iter().copied())
                .collect(),
        }
    }

    /// Probability of `item`; zero for unknown items.
    pub fn get(&self, item: &str) -> T {
        self.probs.get(item).copied().unwrap_or_else(T::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, T)> {
        self.probs.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Items with positive probability, sorted by identifier.
    pub fn support(&self) -> impl Iterator<Item = &str> {
        self.probs
            .iter()
            .filter(|(_, p)| **p > T::zero())
            .map(|(k, _)| k.as_str())
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn total(&self) -> T {
        self.probs.values().copied().sum()
    }

    /// Items sorted by decreasing probability, ties by identifier.
    pub fn ranked(&self) -> Vec<(&str, T)> {
        let mut v: Vec<(&str, T)> = self.iter().collect();
        v.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(b.0)));
        v
    }
}

fn lookup(snap: &Snapshot, user: &str, item: &str) -> Result<(UserIdx, ItemIdx)> {
    let u = snap
        .user_index(user)
        .ok_or_else(|| Error::UnknownUser(user.to_string()))?;
    let i = snap
        .item_index(item)
        .filter(|&i| snap.contains(u, i))
        .ok_or_else(|| Error::ItemNotInProfile {
            user: Some(user.to_string()),
            item: item.to_string(),
        })?;
    Ok((u, i))
}

/// `P(i|u,ω)` for `i ∈ I_u`.
pub fn weighted_conditional<T: Scalar>(
    snap: &Snapshot,
    model: &ProbabilityModel<T>,
    user: &str,
    item: &str,
    weights: &WeightVector<T>,
) -> Result<T> {
    let (u, i) = lookup(snap, user, item)?;
    let bound = model.bind(snap)?;
    Ok(bound.weighted(weights).cond(u, i))
}

/// The weighted item marginal `P(i|ω)` over the snapshot's items.
pub fn item_marginal<T: Scalar>(
    snap: &Snapshot,
    model: &ProbabilityModel<T>,
    weights: &WeightVector<T>,
) -> Result<ItemDistribution<T>> {
    Ok(model.bind(snap)?.weighted(weights).marginal())
}

/// The probability that two independent item draws for the same user
/// return `i` then `k`.
pub fn pairwise_joint<T: Scalar>(
    snap: &Snapshot,
    model: &ProbabilityModel<T>,
    weights: &WeightVector<T>,
    i: &str,
    k: &str,
) -> Result<T> {
    let ii = snap
        .item_index(i)
        .ok_or_else(|| Error::UnknownItem(i.to_string()))?;
    let kk = snap
        .item_index(k)
        .ok_or_else(|| Error::UnknownItem(k.to_string()))?;
    Ok(model.bind(snap)?.weighted(weights).pairwise(ii, kk))
}
