//! Item reweighting that makes the item marginal of a later snapshot mimic
//! a reference marginal.
//!
//! The objective is
//!
//! ```text
//! D(ω) = Σ_{i ∈ I_0} P_0(i) ln(P_0(i) / P_1(i|ω))
//! ```
//!
//! summed over the reference support `I_0` only, without renormalizing
//! `P_1(·|ω)` on it. Its partial derivatives are
//!
//! ```text
//! ∂D/∂ω_k = Σ_i P_0(i) / (ω_k P_1(i|ω)) · (P_1(i,k|ω) − δ_ik P_1(k|ω))
//!         = (Σ_{u ∈ U_k} P(u) P(k|u,ω) Σ_{i ∈ I_u} r_i P(i|u,ω) − P_0(k)) / ω_k
//! ```
//!
//! with `r_i = P_0(i) / P_1(i|ω)`, so one coordinate costs a single pass over
//! the users holding `k` and their profiles, bounded by the number of pairs.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ItemIdx, Snapshot};
use crate::error::{Error, Result};
use crate::prob::{BoundModel, ItemDistribution, ProbabilityModel, WeightVector, Weighted};
use crate::scalar::Scalar;

/// Reference marginal to reproduce.
#[derive(Clone, Debug, PartialEq)]
pub struct DebiasTarget<T = f64> {
    reference: ItemDistribution<T>,
}

impl<T: Scalar> DebiasTarget<T> {
    pub fn new(reference: ItemDistribution<T>) -> Result<Self> {
        if reference.support().next().is_none() {
            return Err(Error::InvalidDistribution(
                "target has empty support".into(),
            ));
        }
        Ok(DebiasTarget { reference })
    }

    /// The unweighted item marginal of `snap` under `model`.
    pub fn from_snapshot(snap: &Snapshot, model: &ProbabilityModel<T>) -> Result<Self> {
        Self::new(
            model
                .bind(snap)?
                .weighted(&WeightVector::identity())
                .marginal(),
        )
    }

    pub fn reference(&self) -> &ItemDistribution<T> {
        &self.reference
    }

    pub fn support(&self) -> impl Iterator<Item = &str> {
        self.reference.support()
    }
}

/// Items whose weights are tuned, in selection order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ActiveSet {
    items: Vec<String>,
}

impl ActiveSet {
    pub fn new<S: Into<String>>(items: impl IntoIterator<Item = S>) -> Self {
        ActiveSet {
            items: items.into_iter().map(Into::into).collect(),
        }
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn p(&self) -> usize {
        self.items.len()
    }

    pub fn contains(&self, item: &str) -> bool {
        self.items.iter().any(|i| i == item)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Active-set size.
    pub p: usize,
    /// Initial step in log-weight space.
    pub step: f64,
    pub max_iters: usize,
    /// Stop when the log-space gradient norm falls below this.
    pub grad_tol: f64,
    /// Stop when an accepted step improves D by less than this fraction.
    pub kl_tol: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            p: 20,
            step: 1.0,
            max_iters: 500,
            grad_tol: 1e-7,
            kl_tol: 1e-9,
        }
    }
}

impl OptimizerConfig {
    pub fn with_p(p: usize) -> Self {
        OptimizerConfig {
            p,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if self.p == 0
            || self.max_iters == 0
            || !positive(self.step)
            || !positive(self.grad_tol)
            || !positive(self.kl_tol)
        {
            return Err(Error::InvalidConfig(format!(
                "optimizer parameters must all be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Halvings tried before a step is declared a failure.
pub const MAX_HALVINGS: usize = 30;
/// Step growth after an accepted step.
pub const STEP_GROWTH: f64 = 1.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The starting point already has zero divergence.
    AlreadyOptimal,
    GradientTolerance,
    KlTolerance,
    MaxIterations,
    /// No decreasing step within the halving budget.
    LineSearchExhausted,
}

impl StopReason {
    pub fn is_converged(self) -> bool {
        matches!(
            self,
            StopReason::AlreadyOptimal | StopReason::GradientTolerance | StopReason::KlTolerance
        )
    }
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::AlreadyOptimal => "already_optimal",
            StopReason::GradientTolerance => "gradient_tolerance",
            StopReason::KlTolerance => "kl_tolerance",
            StopReason::MaxIterations => "max_iterations",
            StopReason::LineSearchExhausted => "line_search_exhausted",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimizerReport<T = f64> {
    pub iterations: usize,
    /// D at the start point followed by every accepted iterate.
    pub kl_trace: Vec<T>,
    pub initial_kl: T,
    pub final_kl: T,
    pub converged: bool,
    pub reason: StopReason,
    pub active_set: ActiveSet,
    #[serde(skip)]
    pub final_weights: WeightVector<T>,
}

/// The divergence objective over one bound t₁ model, with the reference
/// aligned to the t₁ item indices.
pub struct KlObjective<'m, 's, T = f64> {
    model: &'m BoundModel<'s, T>,
    reference: Vec<T>,
}

/// Objective state at one weight vector.
pub struct KlState<'m, 's, T = f64> {
    pub weighted: Weighted<'m, 's, T>,
    pub marginal: Vec<T>,
    pub kl: T,
    // P_0(i) / P_1(i|ω), zero off the reference support
    ratio: Vec<T>,
}

impl<'m, 's, T: Scalar> KlObjective<'m, 's, T> {
    /// Fails with `SupportMismatch` when a reference item is missing from
    /// the t₁ snapshot.
    pub fn new(target: &DebiasTarget<T>, model: &'m BoundModel<'s, T>) -> Result<Self> {
        let snap = model.snapshot();
        let mut reference = vec![T::zero(); snap.n_items()];
        let mut missing = Vec::new();
        for (item, p) in target.reference.iter() {
            if p <= T::zero() {
                continue;
            }
            match snap.item_index(item) {
                Some(i) => reference[i.index()] = p,
                None => missing.push(item.to_string()),
            }
        }
        if !missing.is_empty() {
            return Err(Error::SupportMismatch { items: missing });
        }
        Ok(KlObjective { model, reference })
    }

    pub fn snapshot(&self) -> &'s Snapshot {
        self.model.snapshot()
    }

    pub fn reference(&self, i: ItemIdx) -> T {
        self.reference[i.index()]
    }

    pub fn state(&self, weights: Vec<T>) -> Result<KlState<'m, 's, T>> {
        self.state_of(self.model.weighted_dense(weights))
    }

    pub fn state_of(&self, weighted: Weighted<'m, 's, T>) -> Result<KlState<'m, 's, T>> {
        let marginal = weighted.marginal_dense();
        let snap = self.snapshot();
        let mut missing = Vec::new();
        let mut kl = T::zero();
        let mut ratio = vec![T::zero(); marginal.len()];
        for (k, (&p0, &p1)) in self.reference.iter().zip(&marginal).enumerate() {
            if p0 <= T::zero() {
                continue;
            }
            if p1 <= T::zero() {
                missing.push(snap.item_id(ItemIdx(k as u32)).to_string());
                continue;
            }
            let r = p0 / p1;
            kl += p0 * r.ln();
            ratio[k] = r;
        }
        if !missing.is_empty() {
            return Err(Error::SupportMismatch { items: missing });
        }
        Ok(KlState {
            weighted,
            marginal,
            kl,
            ratio,
        })
    }

    /// `ω_k ∂D/∂ω_k`: the gradient with respect to `ln ω_k`.
    pub fn log_gradient_coord(&self, state: &KlState<'m, 's, T>, k: ItemIdx) -> T {
        let snap = self.snapshot();
        let mut acc = T::zero();
        for &u in snap.holders(k) {
            let mut inner = T::zero();
            let mut cond_k = T::zero();
            state.weighted.for_each_in_profile(u, |i, c| {
                inner += state.ratio[i.index()] * c;
                if i == k {
                    cond_k = c;
                }
            });
            acc += self.model.user_prob(u) * cond_k * inner;
        }
        acc - self.reference[k.index()]
    }

    /// `∂D/∂ω_k` for each active item, coordinates computed independently.
    pub fn gradient(&self, state: &KlState<'m, 's, T>, active: &[ItemIdx]) -> Vec<T> {
        active
            .par_iter()
            .map(|&k| self.log_gradient_coord(state, k) / state.weighted.weight(k))
            .collect()
    }

    pub fn log_gradient(&self, state: &KlState<'m, 's, T>, active: &[ItemIdx]) -> Vec<T> {
        active
            .par_iter()
            .map(|&k| self.log_gradient_coord(state, k))
            .collect()
    }
}

/// `D(ω)` of the weighted t₁ marginal against the target.
pub fn kl_divergence<T: Scalar>(
    target: &DebiasTarget<T>,
    snap: &Snapshot,
    model: &ProbabilityModel<T>,
    weights: &WeightVector<T>,
) -> Result<T> {
    let bound = model.bind(snap)?;
    let objective = KlObjective::new(target, &bound)?;
    Ok(objective.state_of(bound.weighted(weights))?.kl)
}

/// The `p` current items whose probability moved most, in absolute value,
/// away from the target. Items absent from the target count as probability
/// zero there; ties go to the smaller identifier.
pub fn select_active_set<T: Scalar>(
    target: &DebiasTarget<T>,
    current: &ItemDistribution<T>,
    p: usize,
) -> ActiveSet {
    let mut gaps: Vec<(&str, T)> = current
        .iter()
        .map(|(item, prob)| (item, (target.reference.get(item) - prob).abs()))
        .collect();
    gaps.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("probabilities are finite")
            .then_with(|| a.0.cmp(b.0))
    });
    ActiveSet::new(gaps.into_iter().take(p).map(|(item, _)| item))
}

fn active_indices(snap: &Snapshot, active: &ActiveSet) -> Result<Vec<ItemIdx>> {
    active
        .items
        .iter()
        .map(|item| {
            snap.item_index(item)
                .ok_or_else(|| Error::UnknownItem(item.clone()))
        })
        .collect()
}

/// `∂D/∂ω_k` for every `k` in `active`.
pub fn kl_gradient<T: Scalar>(
    target: &DebiasTarget<T>,
    snap: &Snapshot,
    model: &ProbabilityModel<T>,
    weights: &WeightVector<T>,
    active: &ActiveSet,
) -> Result<BTreeMap<String, T>> {
    let bound = model.bind(snap)?;
    let objective = KlObjective::new(target, &bound)?;
    let idx = active_indices(snap, active)?;
    let state = objective.state_of(bound.weighted(weights))?;
    let grad = objective.gradient(&state, &idx);
    Ok(active.items.iter().cloned().zip(grad).collect())
}

fn norm<T: Scalar>(v: &[T]) -> T {
    v.iter().map(|x| *x * *x).sum::<T>().sqrt()
}

/// Gradient descent on `ln ω` over the active set, starting from ω ≡ 1.
///
/// The active set is chosen once from the unweighted t₁ marginal. A trial
/// step that does not decrease D is halved (at most [`MAX_HALVINGS`] times);
/// an accepted step grows by [`STEP_GROWTH`]. Weights outside the active set
/// stay exactly 1.
pub fn optimize_weights<T: Scalar>(
    target: &DebiasTarget<T>,
    snap: &Snapshot,
    model: &ProbabilityModel<T>,
    cfg: &OptimizerConfig,
) -> Result<(WeightVector<T>, OptimizerReport<T>)> {
    cfg.validate()?;
    let bound = model.bind(snap)?;
    let objective = KlObjective::new(target, &bound)?;

    let mut state = objective.state(vec![T::one(); snap.n_items()])?;
    let current = ItemDistribution::from_dense(snap, &state.marginal);
    let active = select_active_set(target, &current, cfg.p);
    let idx = active_indices(snap, &active)?;

    let initial_kl = state.kl;
    let mut trace = vec![initial_kl];
    let mut log_w = vec![T::zero(); idx.len()];
    let mut step = T::lit(cfg.step);
    let grad_tol = T::lit(cfg.grad_tol);
    let kl_tol = T::lit(cfg.kl_tol);

    let reason = if initial_kl == T::zero() {
        StopReason::AlreadyOptimal
    } else {
        loop {
            let iterations = trace.len() - 1;
            if iterations >= cfg.max_iters {
                break StopReason::MaxIterations;
            }
            let grad = objective.log_gradient(&state, &idx);
            if norm(&grad) < grad_tol {
                break StopReason::GradientTolerance;
            }

            let mut accepted = None;
            for _ in 0..=MAX_HALVINGS {
                let trial_log: Vec<T> = log_w
                    .iter()
                    .zip(&grad)
                    .map(|(&t, &g)| t - step * g)
                    .collect();
                let mut weights = vec![T::one(); snap.n_items()];
                for (k, &t) in idx.iter().zip(&trial_log) {
                    weights[k.index()] = t.exp();
                }
                let trial = objective.state(weights)?;
                if trial.kl.is_finite() && trial.kl < state.kl {
                    accepted = Some((trial_log, trial));
                    break;
                }
                step /= T::lit(2.0);
            }
            let Some((trial_log, trial)) = accepted else {
                if iterations == 0 {
                    return Err(Error::NoProgress);
                }
                break StopReason::LineSearchExhausted;
            };

            let improvement = (state.kl - trial.kl) / state.kl;
            log_w = trial_log;
            state = trial;
            trace.push(state.kl);
            step *= T::lit(STEP_GROWTH);
            if state.kl <= T::zero() {
                break StopReason::AlreadyOptimal;
            }
            if improvement < kl_tol {
                break StopReason::KlTolerance;
            }
        }
    };

    let mut weights = WeightVector::identity();
    for (k, t) in idx.iter().zip(&log_w) {
        weights.set(snap.item_id(*k), t.exp())?;
    }
    let report = OptimizerReport {
        iterations: trace.len() - 1,
        final_kl: *trace.last().expect("trace starts with the initial value"),
        kl_trace: trace,
        initial_kl,
        converged: reason.is_converged(),
        reason,
        active_set: active,
        final_weights: weights.clone(),
    };
    Ok((weights, report))
}
