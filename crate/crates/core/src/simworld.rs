//! Synthetic interaction dynamics: power-law profiles, organic background
//! additions, and recommendation campaigns that push a few items to many
//! users at once and so shift the item marginal.

use std::collections::HashSet;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{InteractionEvent, InteractionLog, Timestamp};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationConfig {
    pub n_users: usize,
    pub n_items: usize,
    /// Exponent of the profile-size power law.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Expected profile size after scaling.
    #[serde(default = "default_target_mean")]
    pub target_mean: f64,
    /// Exponent of the item-popularity power law (by popularity rank).
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_alpha() -> f64 {
    2.0
}

fn default_target_mean() -> f64 {
    5.33
}

fn default_beta() -> f64 {
    1.5
}

impl PopulationConfig {
    pub fn new(n_users: usize, n_items: usize, seed: u64) -> Self {
        PopulationConfig {
            n_users,
            n_items,
            alpha: default_alpha(),
            target_mean: default_target_mean(),
            beta: default_beta(),
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_users == 0 || self.n_items == 0 {
            return Err(Error::InvalidConfig(
                "n_users and n_items must be >= 1".into(),
            ));
        }
        if !(self.alpha > 1.0 && self.beta > 1.0) {
            return Err(Error::InvalidConfig("alpha and beta must be > 1".into()));
        }
        if self.target_mean.is_nan() || self.target_mean < 1.0 {
            return Err(Error::InvalidConfig("target_mean must be >= 1".into()));
        }
        if self.target_mean > self.n_items as f64 {
            return Err(Error::InfeasibleConfig(format!(
                "target_mean {} exceeds n_items {}",
                self.target_mean, self.n_items
            )));
        }
        Ok(())
    }

    pub fn user_id(&self, u: usize) -> String {
        format!("u{:0w$}", u, w = id_width(self.n_users))
    }

    /// Identifier of the item with popularity rank `r` (0 = most popular).
    pub fn item_id(&self, r: usize) -> String {
        format!("i{:0w$}", r, w = id_width(self.n_items))
    }
}

fn id_width(n: usize) -> usize {
    (n.saturating_sub(1)).to_string().len().max(4)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub time: Timestamp,
    pub items: Vec<String>,
    /// Fraction of users targeted.
    pub reach: f64,
    /// Probability a targeted user lacking a campaign item adds it.
    pub accept_prob: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub population: PopulationConfig,
    /// Per-day probability that a user adds an item drawn from the
    /// popularity law.
    pub background_rate: f64,
    #[serde(default)]
    pub campaigns: Vec<CampaignConfig>,
    pub horizon: Timestamp,
}

/// Popularity ranks of the items pushed by both campaigns of scenario S1.
pub const S1_CAMPAIGN_RANKS: [usize; 5] = [10, 11, 12, 13, 14];

impl ScenarioConfig {
    /// The reference drift scenario: 2000 users, 300 items, campaigns at
    /// t=330 and t=430 pushing the same five mid-popularity items.
    pub fn s1() -> Self {
        let population = PopulationConfig::new(2000, 300, 7);
        let items: Vec<String> = S1_CAMPAIGN_RANKS
            .iter()
            .map(|&r| population.item_id(r))
            .collect();
        let campaign = |time, seed| CampaignConfig {
            time,
            items: items.clone(),
            reach: 0.6,
            accept_prob: 0.35,
            seed,
        };
        ScenarioConfig {
            population,
            background_rate: 0.002,
            campaigns: vec![campaign(330, 330), campaign(430, 430)],
            horizon: 500,
        }
    }

    /// Items pushed by at least one campaign, in first-seen order.
    pub fn campaign_items(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        self.campaigns
            .iter()
            .flat_map(|c| c.items.iter())
            .filter(|i| seen.insert(i.as_str()))
            .cloned()
            .collect()
    }
}

/// Expected size of `ceil(scale · X)` clamped to `[1, n]`, with `X` Pareto:
/// `P(X > x) = x^{-(alpha-1)}` for `x >= 1`.
fn expected_size(scale: f64, alpha: f64, n: usize) -> f64 {
    // E[S] = Σ_{s>=1} P(S >= s) = 1 + Σ_{s=1}^{n-1} P(scale·X > s)
    1.0 + (1..n)
        .map(|s| (s as f64 / scale).powf(1.0 - alpha).min(1.0))
        .sum::<f64>()
}

/// Scale whose clamped, discretized power law has mean `target`.
fn fit_scale(target: f64, alpha: f64, n: usize) -> f64 {
    if target <= 1.0 {
        return 0.0;
    }
    if target >= n as f64 {
        return f64::INFINITY;
    }
    let (mut lo, mut hi) = (1e-9f64.ln(), (1e9 * n as f64).ln());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if expected_size(mid.exp(), alpha, n) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi)).exp()
}

fn popularity_weights(n_items: usize, beta: f64) -> Vec<f64> {
    (0..n_items).map(|r| ((r + 1) as f64).powf(-beta)).collect()
}

/// `count` distinct ranks drawn with probability proportional to `weights`.
fn draw_distinct<R: Rng>(
    rng: &mut R,
    count: usize,
    weights: &[f64],
    index: &WeightedIndex<f64>,
) -> Vec<usize> {
    let n = weights.len();
    if count >= n {
        return (0..n).collect();
    }
    if count * 4 <= n {
        let mut chosen = Vec::with_capacity(count);
        let mut seen = HashSet::with_capacity(count);
        for _ in 0..count * 50 {
            let r = index.sample(rng);
            if seen.insert(r) {
                chosen.push(r);
                if chosen.len() == count {
                    return chosen;
                }
            }
        }
    }
    // Efraimidis-Spirakis: keep the `count` largest ln(u) / w
    let mut keyed: Vec<(f64, usize)> = weights
        .iter()
        .enumerate()
        .map(|(r, &w)| (rng.gen::<f64>().ln() / w, r))
        .collect();
    keyed.select_nth_unstable_by(count - 1, |a, b| b.0.total_cmp(&a.0));
    keyed.truncate(count);
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0));
    keyed.into_iter().map(|(_, r)| r).collect()
}

/// Initial profiles, all at timestamp 0.
///
/// Profile sizes follow a power law with exponent `alpha`, scaled so the
/// mean is `target_mean` and truncated to `[1, n_items]`; sizes are taken at
/// stratified quantiles so the empirical mean tracks the target closely.
/// Items are drawn without replacement from the popularity law.
pub fn generate_population(cfg: &PopulationConfig) -> Result<InteractionLog> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.n_items;
    let scale = fit_scale(cfg.target_mean, cfg.alpha, n);
    let mut sizes: Vec<usize> = (0..cfg.n_users)
        .map(|j| {
            let v = (j as f64 + rng.gen::<f64>()) / cfg.n_users as f64;
            let x = (1.0 - v)
                .max(f64::MIN_POSITIVE)
                .powf(-1.0 / (cfg.alpha - 1.0));
            let s = (scale * x).ceil();
            if s >= n as f64 {
                n
            } else {
                (s as usize).max(1)
            }
        })
        .collect();
    sizes.shuffle(&mut rng);

    let weights = popularity_weights(n, cfg.beta);
    let index = WeightedIndex::new(&weights).expect("positive weights");
    let mut log = InteractionLog::new();
    for (u, &size) in sizes.iter().enumerate() {
        let user = cfg.user_id(u);
        for r in draw_distinct(&mut rng, size, &weights, &index) {
            log.push(InteractionEvent::new(user.clone(), cfg.item_id(r), 0));
        }
    }
    Ok(log)
}

fn validate_campaign(cfg: &CampaignConfig) -> Result<()> {
    let unit = |x: f64| (0.0..=1.0).contains(&x);
    if !unit(cfg.reach) || !unit(cfg.accept_prob) {
        return Err(Error::InvalidConfig(
            "campaign reach and accept_prob must lie in [0, 1]".into(),
        ));
    }
    if cfg.items.is_empty() {
        return Err(Error::InvalidConfig("campaign has no items".into()));
    }
    Ok(())
}

/// Push the campaign items to a `reach` fraction of the log's users. Each
/// targeted user adds each campaign item they do not hold at `cfg.time` with
/// probability `accept_prob`. New events are appended after the input's.
pub fn run_campaign(log: &InteractionLog, cfg: &CampaignConfig) -> Result<InteractionLog> {
    validate_campaign(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut users: Vec<&str> = log.events().iter().map(|e| e.user.as_str()).collect();
    users.sort_unstable();
    users.dedup();
    let held: HashSet<(&str, &str)> = log
        .events()
        .iter()
        .filter(|e| e.timestamp <= cfg.time)
        .map(|e| (e.user.as_str(), e.item.as_str()))
        .collect();

    let reached = ((cfg.reach * users.len() as f64).round() as usize).min(users.len());
    let mut targeted = rand::seq::index::sample(&mut rng, users.len(), reached).into_vec();
    targeted.sort_unstable();

    let mut added = Vec::new();
    for u in targeted {
        let user = users[u];
        for item in &cfg.items {
            if held.contains(&(user, item.as_str())) {
                continue;
            }
            if rng.gen_bool(cfg.accept_prob) {
                added.push(InteractionEvent::new(user, item.clone(), cfg.time));
            }
        }
    }
    let mut out = log.clone();
    out.extend(added);
    Ok(out)
}

/// Population at t=0, then day by day: background additions, followed by
/// the campaigns scheduled that day.
pub fn build_scenario(cfg: &ScenarioConfig) -> Result<InteractionLog> {
    if !(0.0..=1.0).contains(&cfg.background_rate) {
        return Err(Error::InvalidConfig(
            "background_rate must lie in [0, 1]".into(),
        ));
    }
    if cfg.campaigns.windows(2).any(|w| w[0].time > w[1].time) {
        return Err(Error::InvalidConfig(
            "campaigns must be sorted by time".into(),
        ));
    }
    if let Some(c) = cfg.campaigns.iter().find(|c| c.time > cfg.horizon) {
        return Err(Error::InvalidConfig(format!(
            "campaign at t={} is past the horizon {}",
            c.time, cfg.horizon
        )));
    }
    for c in &cfg.campaigns {
        validate_campaign(c)?;
    }

    let pop = &cfg.population;
    let mut log = generate_population(pop)?;
    let mut held: HashSet<(String, String)> = log
        .events()
        .iter()
        .map(|e| (e.user.clone(), e.item.clone()))
        .collect();
    let users: Vec<String> = (0..pop.n_users).map(|u| pop.user_id(u)).collect();
    let index =
        WeightedIndex::new(popularity_weights(pop.n_items, pop.beta)).expect("positive weights");
    let mut rng = ChaCha8Rng::seed_from_u64(pop.seed);
    rng.set_stream(1);

    let mut campaigns = cfg.campaigns.iter().peekable();
    for day in 0..=cfg.horizon {
        if day > 0 && cfg.background_rate > 0.0 {
            for user in &users {
                if !rng.gen_bool(cfg.background_rate) {
                    continue;
                }
                let item = pop.item_id(index.sample(&mut rng));
                if held.insert((user.clone(), item.clone())) {
                    log.push(InteractionEvent::new(user.clone(), item, day));
                }
            }
        }
        while let Some(c) = campaigns.next_if(|c| c.time == day) {
            let before = log.len();
            log = run_campaign(&log, c)?;
            for e in &log.events()[before..] {
                held.insert((e.user.clone(), e.item.clone()));
            }
        }
    }
    Ok(log)
}
