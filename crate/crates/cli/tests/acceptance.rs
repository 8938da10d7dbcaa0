//! Acceptance suite. Runs every criterion in sequence, so timings are not
//! disturbed by other tests, and prints one PASS/FAIL line for each.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use offbias::prob::ItemDistribution as Dist;
use offbias::simworld::{build_scenario, ScenarioConfig};
use offbias::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = fn() -> Result<String, String>;

fn main() {
    let criteria: [(u32, &str, u64, Check); 9] = [
        (1, "identity reduction", 1, identity_reduction),
        (
            2,
            "constant-score equivalence",
            1,
            constant_score_equivalence,
        ),
        (3, "gradient oracle", 10, gradient_oracle),
        (4, "optimizer correctness", 5, optimizer_correctness),
        (5, "bias reproduction", 60, bias_reproduction),
        (6, "stabilization", 120, stabilization),
        (7, "stochastic estimator", 60, stochastic_estimator),
        (8, "complexity scaling", 120, complexity_scaling),
        (9, "determinism", 60, determinism),
    ];
    let mut failed = 0;
    for (n, name, limit, check) in criteria {
        let started = Instant::now();
        let outcome = check();
        let elapsed = started.elapsed();
        let in_time = elapsed <= Duration::from_secs(limit);
        let (pass, detail) = match outcome {
            Ok(d) if in_time => (true, d),
            Ok(d) => (false, format!("{d}; too slow")),
            Err(d) => (false, d),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {n} {name} ({:.2}s, limit {limit}s): {detail}",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Random membership matrix with no empty rows and every item held once.
fn random_matrix(rng: &mut ChaCha8Rng, max_users: usize, max_items: usize) -> Vec<Vec<bool>> {
    let nu = rng.gen_range(1..=max_users);
    let ni = rng.gen_range(1..=max_items);
    let density = rng.gen_range(0.1..0.9);
    let mut m: Vec<Vec<bool>> = (0..nu)
        .map(|_| (0..ni).map(|_| rng.gen_bool(density)).collect())
        .collect();
    for (u, row) in m.iter_mut().enumerate() {
        if !row.contains(&true) {
            row[u % ni] = true;
        }
    }
    for i in 0..ni {
        if !m.iter().any(|row| row[i]) {
            m[i % nu][i] = true;
        }
    }
    m
}

fn snapshot_of(m: &[Vec<bool>]) -> Snapshot {
    let mut log = InteractionLog::new();
    for (u, row) in m.iter().enumerate() {
        for (i, &held) in row.iter().enumerate() {
            if held {
                log.push(InteractionEvent::new(
                    format!("u{u:03}"),
                    format!("i{i:03}"),
                    0,
                ));
            }
        }
    }
    build_snapshot(&log, 0).unwrap()
}

fn item_name(i: usize) -> String {
    format!("i{i:03}")
}

/// Dense reference for uniform laws: columns are items in matrix order.
struct Dense<'a>(&'a [Vec<bool>]);

impl Dense<'_> {
    fn conditional(&self, u: usize, i: usize, w: &[f64]) -> f64 {
        let row = &self.0[u];
        if !row[i] {
            return 0.0;
        }
        let norm: f64 = (0..row.len()).filter(|&j| row[j]).map(|j| w[j]).sum();
        w[i] / norm
    }

    fn marginal(&self, w: &[f64]) -> Vec<f64> {
        let pu = 1.0 / self.0.len() as f64;
        (0..w.len())
            .map(|i| {
                (0..self.0.len())
                    .map(|u| pu * self.conditional(u, i, w))
                    .sum()
            })
            .collect()
    }

    fn kl(&self, target: &[f64], w: &[f64]) -> f64 {
        let m = self.marginal(w);
        target
            .iter()
            .zip(&m)
            .filter(|(t, _)| **t > 0.0)
            .map(|(t, p)| t * (t / p).ln())
            .sum()
    }
}

fn weight_vector(w: &[f64]) -> WeightVector {
    WeightVector::from_pairs(w.iter().enumerate().map(|(i, &x)| (item_name(i), x))).unwrap()
}

fn identity_reduction() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let model = ProbabilityModel::uniform();
    let explicit_ones = |snap: &Snapshot| {
        WeightVector::constant(snap.item_ids().iter().map(String::as_str), 1.0).unwrap()
    };
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let m = random_matrix(&mut rng, 50, 30);
        let snap = snapshot_of(&m);
        let n_users = m.len() as f64;
        for weights in [WeightVector::identity(), explicit_ones(&snap)] {
            let marg = item_marginal(&snap, &model, &weights).map_err(err)?;
            for id in snap.item_ids() {
                let col: usize = id[1..].parse().unwrap();
                let mut plain_marginal = 0.0;
                for (u, row) in m.iter().enumerate() {
                    if !row[col] {
                        continue;
                    }
                    let plain = 1.0 / row.iter().filter(|&&b| b).count() as f64;
                    plain_marginal += plain / n_users;
                    let weighted =
                        weighted_conditional(&snap, &model, &format!("u{u:03}"), id, &weights)
                            .map_err(err)?;
                    worst = worst.max((weighted - plain).abs());
                }
                worst = worst.max((marg.get(id) - plain_marginal).abs());
            }
        }
    }
    ensure(worst <= 1e-15, || {
        format!("max deviation {worst:e} > 1e-15")
    })?;
    Ok(format!("50 snapshots, max deviation {worst:e}"))
}

fn constant_score_equivalence() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let model = ProbabilityModel::uniform();
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for r in 0..20 {
        // FIX1 first, then random fixtures of the same size
        let m = if r == 0 {
            vec![vec![true, true, false], vec![false, true, true]]
        } else {
            random_matrix(&mut rng, 4, 5)
        };
        let snap = snapshot_of(&m);
        let n_items = m[0].len();
        let mut pool: Vec<String> = (0..n_items + 1).map(item_name).collect();
        pool.shuffle(&mut rng);
        let k = rng.gen_range(1..=pool.len().min(5));
        let items: Vec<String> = pool[..k].to_vec();
        let rec = ConstantRecommender::new(items.clone()).map_err(err)?;
        for _ in 0..10 {
            let w: Vec<f64> = (0..n_items).map(|_| rng.gen_range(0.1..10.0)).collect();
            let weights = weight_vector(&w);
            let marg = item_marginal(&snap, &model, &weights).map_err(err)?;
            for q in [QualityFunction::HitInTopK, QualityFunction::InverseRank] {
                let cfg = EvalConfig::exhaustive().with_weights(weights.clone());
                let direct = evaluate(&rec, &snap, &model, q, &cfg).map_err(err)?.score;
                worst = worst.max((direct - constant_score(&items, &marg, q)).abs());
                cases += 1;
            }
        }
    }
    ensure(worst <= 1e-12, || format!("max gap {worst:e} > 1e-12"))?;
    Ok(format!("{cases} comparisons, max gap {worst:e}"))
}

fn gradient_oracle() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let model = ProbabilityModel::uniform();
    let h = 1e-6;
    let mut worst_rel: f64 = 0.0;
    let mut coords = 0;
    let mut on_floor = 0;
    let instances = 150;
    for _ in 0..instances {
        let m = random_matrix(&mut rng, 20, 15);
        let n_items = m[0].len();
        let snap = snapshot_of(&m);
        let dense = Dense(&m);
        let w: Vec<f64> = (0..n_items).map(|_| rng.gen_range(0.2..5.0)).collect();
        // a random reference on a random subset of the items
        let mut raw: Vec<f64> = (0..n_items)
            .map(|_| {
                if rng.gen_bool(0.8) {
                    rng.gen_range(0.05..1.0)
                } else {
                    0.0
                }
            })
            .collect();
        if raw.iter().all(|&x| x == 0.0) {
            raw[0] = 1.0;
        }
        let total: f64 = raw.iter().sum();
        let target: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let reference = Dist::from_pairs(
            target
                .iter()
                .enumerate()
                .filter(|(_, &t)| t > 0.0)
                .map(|(i, &t)| (item_name(i), t)),
        )
        .map_err(err)?;
        let goal = DebiasTarget::new(reference).map_err(err)?;
        let active = ActiveSet::new((0..n_items).map(item_name));
        let grad = kl_gradient(&goal, &snap, &model, &weight_vector(&w), &active).map_err(err)?;
        for k in 0..n_items {
            let (mut plus, mut minus) = (w.clone(), w.clone());
            plus[k] += h;
            minus[k] -= h;
            let fd = (dense.kl(&target, &plus) - dense.kl(&target, &minus)) / (2.0 * h);
            let g = grad[&item_name(k)];
            let gap = (g - fd).abs();
            // a relative bound is meaningless for a vanishing derivative
            if gap > 1e-6 * fd.abs() && gap > 1e-9 {
                return Err(format!(
                    "coordinate {k}: analytic {g:e}, finite difference {fd:e}"
                ));
            }
            if gap <= 1e-6 * fd.abs() {
                worst_rel = worst_rel.max(gap / fd.abs());
            } else {
                on_floor += 1;
            }
            coords += 1;
        }
    }
    Ok(format!(
        "{instances} instances, {coords} coordinates, max relative error {worst_rel:.2e}; \
         {on_floor} near-zero coordinates within 1e-9 absolute"
    ))
}

/// Minimizes the dense KL over log-weights of a and c (b fixed at 1, the
/// objective being scale invariant) by a shrinking grid search.
fn grid_search(dense: &Dense, target: &[f64]) -> (Vec<f64>, f64) {
    let (mut la, mut lc) = (0.0f64, 0.0f64);
    let mut width = 4.0;
    let mut best = dense.kl(target, &[1.0, 1.0, 1.0]);
    while width > 1e-9 {
        let mut improved = (la, lc);
        for da in -10..=10 {
            for dc in -10..=10 {
                let a = la + width * da as f64 / 10.0;
                let c = lc + width * dc as f64 / 10.0;
                let d = dense.kl(target, &[a.exp(), 1.0, c.exp()]);
                if d < best {
                    best = d;
                    improved = (a, c);
                }
            }
        }
        (la, lc) = improved;
        width /= 2.0;
    }
    (vec![la.exp(), 1.0, lc.exp()], best)
}

fn optimizer_correctness() -> Result<String, String> {
    let m = vec![vec![true, true, false], vec![false, true, true]];
    let snap = snapshot_of(&m);
    let model = ProbabilityModel::uniform();
    let target = [0.3, 0.5, 0.2];
    let goal = DebiasTarget::new(
        Dist::from_pairs(target.iter().enumerate().map(|(i, &t)| (item_name(i), t)))
            .map_err(err)?,
    )
    .map_err(err)?;
    let (weights, report) =
        optimize_weights(&goal, &snap, &model, &OptimizerConfig::with_p(3)).map_err(err)?;
    ensure(report.final_kl < 1e-6 * report.initial_kl, || {
        format!(
            "final_kl {:e} vs initial {:e}",
            report.final_kl, report.initial_kl
        )
    })?;
    let fitted = item_marginal(&snap, &model, &weights).map_err(err)?;
    let dense = Dense(&m);
    let (grid_w, grid_kl) = grid_search(&dense, &target);
    let grid_marg = dense.marginal(&grid_w);
    let mut worst_target: f64 = 0.0;
    let mut worst_grid: f64 = 0.0;
    for (i, &t) in target.iter().enumerate() {
        let p = fitted.get(&item_name(i));
        worst_target = worst_target.max((p - t).abs());
        worst_grid = worst_grid.max((p - grid_marg[i]).abs());
    }
    ensure(worst_target <= 1e-3, || {
        format!("marginal off target by {worst_target:e}")
    })?;
    ensure(worst_grid <= 1e-3, || {
        format!("marginal off grid search by {worst_grid:e}")
    })?;
    ensure(report.final_kl <= grid_kl + 1e-9, || {
        format!(
            "grid search found a lower KL ({grid_kl:e} < {:e})",
            report.final_kl
        )
    })?;
    Ok(format!(
        "KL {:.3e} -> {:.3e} in {} iterations; max |P-target| {worst_target:.1e}; grid KL {grid_kl:.1e}",
        report.initial_kl, report.final_kl, report.iterations
    ))
}

struct S1 {
    log: InteractionLog,
    before: Snapshot,
    after: Snapshot,
    g1: ConstantRecommender,
    g2: ConstantRecommender,
}

/// The agreeing recommender g1 pushes the campaign items; g2 pushes the
/// five most-held other items at t=300.
fn s1() -> Result<S1, String> {
    let cfg = ScenarioConfig::s1();
    let log = build_scenario(&cfg).map_err(err)?;
    let before = build_snapshot(&log, 300).map_err(err)?;
    let after = build_snapshot(&log, 500).map_err(err)?;
    let campaign = cfg.campaign_items();
    let mut held: Vec<(std::cmp::Reverse<usize>, &str)> = before
        .items()
        .map(|i| {
            (
                std::cmp::Reverse(before.holders(i).len()),
                before.item_id(i),
            )
        })
        .filter(|(_, id)| !campaign.iter().any(|c| c == id))
        .collect();
    held.sort();
    let g2_items: Vec<String> = held.iter().take(5).map(|(_, id)| id.to_string()).collect();
    Ok(S1 {
        g1: ConstantRecommender::new(campaign).map_err(err)?,
        g2: ConstantRecommender::new(g2_items).map_err(err)?,
        log,
        before,
        after,
    })
}

fn bias_reproduction() -> Result<String, String> {
    let world = s1()?;
    let model = ProbabilityModel::uniform();
    let times = [300, 350, 400, 450, 500];
    let mut detail = Vec::new();
    for (name, g, rises) in [("g1", &world.g1, true), ("g2", &world.g2, false)] {
        let rows = timeline_evaluate(
            g,
            &world.log,
            &times,
            &model,
            QualityFunction::HitInTopK,
            &EvalConfig::exhaustive(),
        )
        .map_err(err)?;
        let (first, last) = (rows[0].1.score, rows[rows.len() - 1].1.score);
        let change = (last - first) / first;
        let ok = if rises {
            change >= 0.05
        } else {
            change <= -0.05
        };
        ensure(ok, || format!("{name} changed by {:+.1}%", 100.0 * change))?;
        detail.push(format!(
            "{name} {first:.4} -> {last:.4} ({:+.1}%)",
            100.0 * change
        ));
    }
    Ok(detail.join(", "))
}

fn stabilization() -> Result<String, String> {
    let world = s1()?;
    let model = ProbabilityModel::uniform();
    let q = QualityFunction::HitInTopK;
    let target = DebiasTarget::from_snapshot(&world.before, &model).map_err(err)?;
    let score = |g: &ConstantRecommender, snap: &Snapshot, cfg: &EvalConfig| {
        evaluate(g, snap, &model, q, cfg)
            .map(|r| r.score)
            .map_err(err)
    };
    let plain = EvalConfig::exhaustive();
    let small_p = ScenarioConfig::s1().campaign_items().len();
    let mut stab = BTreeMap::new();
    for p in [small_p, 20] {
        let (weights, _) =
            optimize_weights(&target, &world.after, &model, &OptimizerConfig::with_p(p))
                .map_err(err)?;
        let weighted = EvalConfig::exhaustive().with_weights(weights);
        for (name, g) in [("g1", &world.g1), ("g2", &world.g2)] {
            let l300 = score(g, &world.before, &plain)?;
            let l500 = score(g, &world.after, &plain)?;
            let lw = score(g, &world.after, &weighted)?;
            stab.insert((name, p), 1.0 - (lw - l300).abs() / (l500 - l300).abs());
        }
    }
    let s = |name, p| stab[&(name, p)];
    ensure(s("g1", 20) >= 0.5 && s("g2", 20) >= 0.5, || {
        format!("p=20 shrinkage g1 {:.3} g2 {:.3}", s("g1", 20), s("g2", 20))
    })?;
    ensure(s("g1", small_p) >= 0.5, || {
        format!("p={small_p} shrinkage g1 {:.3}", s("g1", small_p))
    })?;
    ensure(s("g2", small_p) <= s("g2", 20), || {
        format!(
            "g2 shrinkage p={small_p} {:.3} > p=20 {:.3}",
            s("g2", small_p),
            s("g2", 20)
        )
    })?;
    Ok(format!(
        "gap shrinkage p=20: g1 {:.3} g2 {:.3}; p={small_p}: g1 {:.3} g2 {:.3}",
        s("g1", 20),
        s("g2", 20),
        s("g1", small_p),
        s("g2", small_p)
    ))
}

fn stochastic_estimator() -> Result<String, String> {
    let world = s1()?;
    let model = ProbabilityModel::uniform();
    let q = QualityFunction::HitInTopK;
    let exact = evaluate(
        &world.g1,
        &world.after,
        &model,
        q,
        &EvalConfig::exhaustive(),
    )
    .map_err(err)?
    .score;
    let mut inside = 0;
    for seed in 0..100 {
        let r = evaluate(
            &world.g1,
            &world.after,
            &model,
            q,
            &EvalConfig::stochastic(20_000, seed),
        )
        .map_err(err)?;
        if (r.score - exact).abs() <= 4.0 * r.std_error {
            inside += 1;
        }
    }
    ensure(inside >= 99, || {
        format!("{inside}/100 runs within 4 standard errors")
    })?;
    Ok(format!(
        "{inside}/100 runs within 4 standard errors of {exact:.4}"
    ))
}

/// Every user holds `per_user` of `n_items` items, spread evenly.
fn dense_world(n_users: usize, n_items: usize, per_user: usize, seed: u64) -> Snapshot {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let items: Vec<usize> = (0..n_items).collect();
    let mut log = InteractionLog::new();
    for u in 0..n_users {
        for &i in items.choose_multiple(&mut rng, per_user) {
            log.push(InteractionEvent::new(format!("u{u:06}"), item_name(i), 0));
        }
    }
    build_snapshot(&log, 0).unwrap()
}

/// Times `kl_gradient` on one snapshot with a fixed target and weights.
struct GradientBench {
    snap: Snapshot,
    target: DebiasTarget,
    weights: WeightVector,
}

impl GradientBench {
    fn new(snap: Snapshot) -> Result<Self, String> {
        let raw = |k: usize| (1 + k % 3) as f64;
        let total: f64 = (0..snap.n_items()).map(raw).sum();
        let target = DebiasTarget::new(
            Dist::from_pairs(
                snap.item_ids()
                    .iter()
                    .enumerate()
                    .map(|(k, id)| (id.clone(), raw(k) / total)),
            )
            .map_err(err)?,
        )
        .map_err(err)?;
        let weights = WeightVector::from_pairs(
            snap.item_ids()
                .iter()
                .enumerate()
                .map(|(k, id)| (id.clone(), 0.5 + (k % 5) as f64 * 0.25)),
        )
        .map_err(err)?;
        Ok(GradientBench {
            snap,
            target,
            weights,
        })
    }

    /// Mean wall time of one gradient over a batch of calls.
    fn seconds_per_gradient(&self, p: usize) -> Result<f64, String> {
        const BATCH: u32 = 10;
        let model = ProbabilityModel::uniform();
        let active = ActiveSet::new(self.snap.item_ids().iter().take(p).cloned());
        let started = Instant::now();
        for _ in 0..BATCH {
            let g = kl_gradient(&self.target, &self.snap, &model, &self.weights, &active)
                .map_err(err)?;
            std::hint::black_box(g);
        }
        Ok(started.elapsed().as_secs_f64() / f64::from(BATCH))
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[xs.len() / 2]
}

fn complexity_scaling() -> Result<String, String> {
    // one worker, so that the measured time tracks total work
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(err)?;
    pool.install(|| {
        let (n_items, per_user, p) = (64, 16, 32);
        let base = GradientBench::new(dense_world(6_250, n_items, per_user, 8))?;
        let doubled = GradientBench::new(dense_world(12_500, n_items, per_user, 8))?;
        base.seconds_per_gradient(2 * p)?;
        doubled.seconds_per_gradient(p)?;
        let (mut r_nnz, mut r_p, mut t_base) = (Vec::new(), Vec::new(), Vec::new());
        // configurations interleaved within each trial, so drift hits all alike
        for _ in 0..5 {
            let t = base.seconds_per_gradient(p)?;
            r_nnz.push(doubled.seconds_per_gradient(p)? / t);
            r_p.push(base.seconds_per_gradient(2 * p)? / t);
            t_base.push(t);
        }
        let (r_nnz, r_p) = (median(r_nnz), median(r_p));
        let detail = format!(
            "nnz {} -> {}: ratio {r_nnz:.2}; p {p} -> {}: ratio {r_p:.2} (base {:.1} ms)",
            base.snap.nnz(),
            doubled.snap.nnz(),
            2 * p,
            median(t_base) * 1e3
        );
        let within = |r: f64| (1.5..=3.0).contains(&r);
        ensure(within(r_nnz) && within(r_p), || detail.clone())?;
        Ok(detail)
    })
}

fn offbias_cli(dir: &Path, args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_offbias"))
        .current_dir(dir)
        .args(args)
        .output()
        .map_err(err)?;
    ensure(out.status.success(), || {
        format!(
            "`offbias {}` failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        )
    })?;
    Ok(out.stdout)
}

/// Runs the full pipeline in `dir`; returns every artifact's bytes by name.
fn pipeline(dir: &Path, threads: &str) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let run = |args: &[&str]| {
        let mut all = args.to_vec();
        all.extend(["--threads", threads]);
        offbias_cli(dir, &all)
    };
    run(&["simulate", "--out", "s1.csv"])?;
    run(&[
        "optimize", "--log", "s1.csv", "--t0", "300", "--t1", "500", "--p", "20", "--out", "w.csv",
    ])?;
    let g1 = "i0010,i0011,i0012,i0013,i0014";
    run(&[
        "timeline",
        "--log",
        "s1.csv",
        "--from",
        "300",
        "--to",
        "500",
        "--step",
        "50",
        "--recommend",
        g1,
        "--mode",
        "stochastic",
        "--draws",
        "20000",
        "--seed",
        "42",
        "--out",
        "raw.csv",
    ])?;
    run(&[
        "timeline",
        "--log",
        "s1.csv",
        "--from",
        "300",
        "--to",
        "500",
        "--step",
        "50",
        "--recommend",
        g1,
        "--weights",
        "w.csv",
        "--out",
        "weighted.csv",
        "--svg",
        "chart.svg",
        "--overlay",
        "raw.csv",
    ])?;
    let eval = run(&[
        "eval",
        "--log",
        "s1.csv",
        "--at",
        "500",
        "--mode",
        "stochastic",
        "--draws",
        "20000",
        "--seed",
        "7",
        "--weights",
        "w.csv",
    ])?;
    let mut files = BTreeMap::new();
    files.insert("eval.stdout".to_string(), eval);
    for entry in std::fs::read_dir(dir).map_err(err)? {
        let path = entry.map_err(err)?.path();
        files.insert(
            path.file_name().unwrap().to_string_lossy().into_owned(),
            std::fs::read(&path).map_err(err)?,
        );
    }
    Ok(files)
}

fn determinism() -> Result<String, String> {
    let first = tempfile::tempdir().map_err(err)?;
    let second = tempfile::tempdir().map_err(err)?;
    let a = pipeline(first.path(), "1")?;
    let b = pipeline(second.path(), "4")?;
    ensure(a.keys().eq(b.keys()), || {
        format!("artifact sets differ: {:?} vs {:?}", a.keys(), b.keys())
    })?;
    let differing: Vec<&String> = a
        .iter()
        .filter(|(k, v)| b[*k] != **v)
        .map(|(k, _)| k)
        .collect();
    ensure(differing.is_empty(), || {
        format!("artifacts differ: {differing:?}")
    })?;
    Ok(format!(
        "{} artifacts byte-identical across two runs (1 and 4 threads)",
        a.len()
    ))
}
