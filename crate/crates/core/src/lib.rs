//! Offline evaluation of recommenders on timestamped interaction data, and
//! correction of the bias that feedback loops introduce into it.
//!
//! A snapshot of the log at time `t` defines which (user, item) pairs the
//! leave-one-out procedure can select. When a production recommender or a
//! campaign pushes items to users, the item marginal of later snapshots
//! drifts, and so do the offline scores of algorithms that never changed.
//! [`debias`] learns item weights that make a later snapshot's weighted
//! marginal match an earlier reference marginal; [`eval`] then scores
//! recommenders under those weights.
//!
//! Probability computations are generic over [`Scalar`] (`f32` or `f64`);
//! the aliases at the crate root fix the scalar to `f64`.
//!
//! ```
//! use offbias::simworld::{build_scenario, ScenarioConfig};
//! use offbias::*;
//!
//! let scenario = ScenarioConfig::s1();
//! let log = build_scenario(&scenario)?;
//! let (t0, t1) = (build_snapshot(&log, 300)?, build_snapshot(&log, 500)?);
//! let model = ProbabilityModel::uniform();
//! let q = QualityFunction::HitInTopK;
//! let g1 = ConstantRecommender::new(scenario.campaign_items())?;
//!
//! let before = evaluate(&g1, &t0, &model, q, &EvalConfig::exhaustive())?.score;
//! let drifted = evaluate(&g1, &t1, &model, q, &EvalConfig::exhaustive())?.score;
//!
//! let target = DebiasTarget::from_snapshot(&t0, &model)?;
//! let (weights, _) = optimize_weights(&target, &t1, &model, &OptimizerConfig::with_p(20))?;
//! let corrected =
//!     evaluate(&g1, &t1, &model, q, &EvalConfig::exhaustive().with_weights(weights))?.score;
//! assert!((corrected - before).abs() < 0.5 * (drifted - before).abs());
//! # Ok::<(), offbias::Error>(())
//! ```

pub mod data;
pub mod debias;
pub mod error;
pub mod eval;
pub mod io;
pub mod prob;
pub mod scalar;
pub mod simworld;

pub use data::{
    build_snapshot, InteractionEvent, InteractionLog, ItemIdx, Snapshot, Timestamp, UserIdx,
};
pub use debias::{
    kl_divergence, kl_gradient, optimize_weights, select_active_set, ActiveSet, OptimizerConfig,
    StopReason,
};
pub use error::{Error, Result};
pub use eval::{
    constant_score, evaluate, remove_item, timeline_evaluate, ConstantRecommender, EvalMode,
    QualityFunction, Ranking, Recommender,
};
pub use prob::{item_marginal, pairwise_joint, weighted_conditional, ConditionalLaw, UserLaw};
pub use scalar::Scalar;

pub type ProbabilityModel = prob::ProbabilityModel<f64>;
pub type WeightVector = prob::WeightVector<f64>;
pub type ItemDistribution = prob::ItemDistribution<f64>;
pub type EvalConfig = eval::EvalConfig<f64>;
pub type EvalResult = eval::EvalResult<f64>;
pub type DebiasTarget = debias::DebiasTarget<f64>;
pub type OptimizerReport = debias::OptimizerReport<f64>;

pub type ProbabilityModel32 = prob::ProbabilityModel<f32>;
pub type WeightVector32 = prob::WeightVector<f32>;
pub type ItemDistribution32 = prob::ItemDistribution<f32>;
pub type EvalConfig32 = eval::EvalConfig<f32>;
pub type EvalResult32 = eval::EvalResult<f32>;
pub type DebiasTarget32 = debias::DebiasTarget<f32>;
pub type OptimizerReport32 = debias::OptimizerReport<f32>;
