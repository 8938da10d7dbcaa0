use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use offbias::io::{read_log, read_weights, write_log, write_timeline, write_weights, TimelineRow};
use offbias::simworld::{build_scenario, ScenarioConfig};
use offbias::{
    build_snapshot, evaluate, optimize_weights, timeline_evaluate, ConstantRecommender,
    DebiasTarget, EvalConfig, InteractionLog, OptimizerConfig, OptimizerReport, ProbabilityModel,
    QualityFunction, Snapshot, Timestamp,
};
use serde::Serialize;
use serde_json::json;

use crate::args::{
    Cli, Command, EvalArgs, Mode, OptimizeArgs, ScoringArgs, SimulateArgs, StatsArgs, TimelineArgs,
};
use crate::manifest::{write_json, Manifest};
use crate::svg::{render_series, Series};
use crate::CliError;

type Out<'a> = &'a mut (dyn Write + Send);

pub fn dispatch(cli: Cli, stdout: Out, stderr: Out) -> Result<(), CliError> {
    match cli.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(usize::from(n))
                .build()
                .map_err(|e| CliError::Usage(format!("--threads: {e}")))?;
            pool.install(|| run_command(cli.command, stdout, stderr))
        }
        None => run_command(cli.command, stdout, stderr),
    }
}

fn run_command(command: Command, stdout: Out, stderr: Out) -> Result<(), CliError> {
    let started = Instant::now();
    let name = match &command {
        Command::Eval(_) => "eval",
        Command::Timeline(_) => "timeline",
        Command::Optimize(_) => "optimize",
        Command::Simulate(_) => "simulate",
        Command::Stats(_) => "stats",
    };
    match command {
        Command::Eval(a) => eval(a, stdout),
        Command::Timeline(a) => timeline(a, stderr),
        Command::Optimize(a) => optimize(a, stderr),
        Command::Simulate(a) => simulate(a, stderr),
        Command::Stats(a) => stats(a, stdout),
    }?;
    let _ = writeln!(
        stderr,
        "offbias: {name} finished in {:.3}s",
        started.elapsed().as_secs_f64()
    );
    Ok(())
}

fn print_json<S: Serialize>(stdout: Out, value: &S) -> Result<(), CliError> {
    let text = serde_json::to_string(value).map_err(|e| CliError::Data(e.to_string()))?;
    writeln!(stdout, "{text}").map_err(|e| CliError::Data(format!("<stdout>: {e}")))
}

fn load_log(path: &Path) -> Result<InteractionLog, CliError> {
    let log = read_log(path)?;
    if log.is_empty() {
        return Err(CliError::Data(format!(
            "{}: log has no events",
            path.display()
        )));
    }
    Ok(log)
}

fn last_time(log: &InteractionLog) -> Timestamp {
    log.max_timestamp().unwrap_or(0)
}

fn first_time(log: &InteractionLog) -> Timestamp {
    log.events().iter().map(|e| e.timestamp).min().unwrap_or(0)
}

/// Same file, unless `explicit` overrides it: `<out stem>.<suffix>`.
fn sibling(out: &Path, explicit: Option<PathBuf>, suffix: &str) -> PathBuf {
    explicit.unwrap_or_else(|| out.with_extension(suffix))
}

/// The k items held by most users at `snap`, ties by id.
fn most_held(snap: &Snapshot, k: usize) -> Vec<String> {
    let mut items: Vec<_> = snap
        .items()
        .map(|i| (std::cmp::Reverse(snap.holders(i).len()), snap.item_id(i)))
        .collect();
    items.sort();
    items
        .into_iter()
        .take(k)
        .map(|(_, id)| id.to_string())
        .collect()
}

fn recommender(a: &ScoringArgs, snap: &Snapshot) -> Result<ConstantRecommender, CliError> {
    let k = a.k as usize;
    let items = if a.recommend.is_empty() {
        most_held(snap, k)
    } else {
        a.recommend.clone()
    };
    ConstantRecommender::new(items)
        .map(|r| r.with_k(k))
        .map_err(|e| CliError::Usage(format!("--recommend: {e}")))
}

/// Checks flag combinations before any file is read.
fn check_mode(a: &ScoringArgs) -> Result<(), CliError> {
    if a.mode == Mode::Stochastic && a.draws.is_none() {
        return Err(CliError::Usage(
            "--draws <N> is required with --mode stochastic (the usual protocol uses 20000)".into(),
        ));
    }
    Ok(())
}

fn eval_config(a: &ScoringArgs, stderr: Option<Out>) -> Result<EvalConfig, CliError> {
    let mut cfg = match (a.mode, a.draws) {
        (Mode::Stochastic, Some(d)) => EvalConfig::stochastic(d, a.seed),
        (Mode::Stochastic, None) => unreachable!("checked by check_mode"),
        (Mode::Exhaustive, draws) => {
            if let (Some(_), Some(err)) = (draws, stderr) {
                let _ = writeln!(err, "offbias: --draws is ignored in exhaustive mode");
            }
            EvalConfig::exhaustive()
        }
    };
    if let Some(path) = &a.weights {
        cfg = cfg.with_weights(read_weights(path)?);
    }
    Ok(cfg)
}

fn scoring_parameters(a: &ScoringArgs, rec: &ConstantRecommender) -> serde_json::Value {
    json!({
        "recommend": rec.items(),
        "k": a.k,
        "quality": QualityFunction::from(a.quality).to_string(),
        "mode": match a.mode { Mode::Exhaustive => "exhaustive", Mode::Stochastic => "stochastic" },
        "draws": if a.mode == Mode::Stochastic { a.draws } else { None },
        "seed": if a.mode == Mode::Stochastic { Some(a.seed) } else { None },
        "weighted": a.weights.is_some(),
    })
}

#[derive(Serialize)]
struct EvalOutput {
    at: Timestamp,
    score: f64,
    std_error: f64,
    pairs_evaluated: u64,
    seed: Option<u64>,
    parameters: serde_json::Value,
}

fn eval(a: EvalArgs, stdout: Out) -> Result<(), CliError> {
    let s = &a.scoring;
    check_mode(s)?;
    let log = load_log(&s.log)?;
    let at = a.at.unwrap_or_else(|| last_time(&log));
    let snap = build_snapshot(&log, at)?;
    let rec = recommender(s, &snap)?;
    let cfg = eval_config(s, None)?;
    let r = evaluate(
        &rec,
        &snap,
        &ProbabilityModel::uniform(),
        s.quality.into(),
        &cfg,
    )?;
    print_json(
        stdout,
        &EvalOutput {
            at,
            score: r.score,
            std_error: r.std_error,
            pairs_evaluated: r.pairs_evaluated,
            seed: r.seed,
            parameters: scoring_parameters(s, &rec),
        },
    )
}

fn timeline_times(a: &TimelineArgs, log: &InteractionLog) -> Result<Vec<Timestamp>, CliError> {
    if !a.times.is_empty() {
        return Ok(a.times.clone());
    }
    let from = a.from.unwrap_or_else(|| first_time(log));
    let to = a.to.unwrap_or_else(|| last_time(log));
    if from > to {
        return Err(CliError::Usage(format!("--from {from} is after --to {to}")));
    }
    Ok((from..=to).step_by(a.step as usize).collect())
}

fn timeline(a: TimelineArgs, stderr: Out) -> Result<(), CliError> {
    let s = &a.scoring;
    check_mode(s)?;
    let log = load_log(&s.log)?;
    let times = timeline_times(&a, &log)?;
    let first = build_snapshot(&log, times[0])?;
    let rec = recommender(s, &first)?;
    let cfg = eval_config(s, Some(&mut *stderr))?;
    let overlays = a
        .overlay
        .iter()
        .map(|p| Series::read(p))
        .collect::<Result<Vec<_>, _>>()?;

    let results = timeline_evaluate(
        &rec,
        &log,
        &times,
        &ProbabilityModel::uniform(),
        s.quality.into(),
        &cfg,
    )
    .map_err(|e| match e {
        offbias::Error::InvalidConfig(m) => CliError::Usage(format!("--times: {m}")),
        other => other.into(),
    })?;
    let rows: Vec<TimelineRow> = results.iter().map(TimelineRow::from).collect();
    write_timeline(&a.out, &rows)?;

    let mut manifest = Manifest::new("timeline", scoring_parameters(s, &rec));
    manifest.input(&s.log)?;
    if let Some(w) = &s.weights {
        manifest.input(w)?;
    }
    if s.mode == Mode::Stochastic {
        manifest.seeds.push(s.seed);
    }
    manifest.output(&a.out)?;
    if let Some(svg) = &a.svg {
        let name = a.out.file_stem().map_or_else(
            || "series".to_string(),
            |n| n.to_string_lossy().into_owned(),
        );
        let mut series = vec![Series { name, rows }];
        series.extend(overlays);
        render_series(&series, svg)?;
        for p in &a.overlay {
            manifest.input(p)?;
        }
        manifest.output(svg)?;
    }
    manifest.write(&sibling(&a.out, a.manifest, "manifest.json"))?;
    let _ = writeln!(
        stderr,
        "offbias: wrote {} timeline rows to {}",
        times.len(),
        a.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct OptimizeOutput<'r> {
    t0: Timestamp,
    t1: Timestamp,
    #[serde(flatten)]
    report: &'r OptimizerReport,
}

fn optimize(a: OptimizeArgs, stderr: Out) -> Result<(), CliError> {
    if a.t0 >= a.t1 {
        return Err(CliError::Usage(format!(
            "--t0 {} must be earlier than --t1 {}",
            a.t0, a.t1
        )));
    }
    let log = load_log(&a.log)?;
    let model = ProbabilityModel::uniform();
    let target = DebiasTarget::from_snapshot(&build_snapshot(&log, a.t0)?, &model)?;
    let drifted = build_snapshot(&log, a.t1)?;
    let cfg = OptimizerConfig {
        max_iters: a.max_iters,
        ..OptimizerConfig::with_p(a.p as usize)
    };
    let (weights, report) = optimize_weights(&target, &drifted, &model, &cfg)?;
    write_weights(&a.out, &weights)?;
    let report_path = sibling(&a.out, a.report, "report.json");
    write_json(
        &report_path,
        &OptimizeOutput {
            t0: a.t0,
            t1: a.t1,
            report: &report,
        },
    )?;

    let mut manifest = Manifest::new(
        "optimize",
        json!({
            "t0": a.t0,
            "t1": a.t1,
            "p": a.p,
            "max_iters": a.max_iters,
            "step": cfg.step,
            "grad_tol": cfg.grad_tol,
            "kl_tol": cfg.kl_tol,
        }),
    );
    manifest.input(&a.log)?;
    manifest.output(&a.out)?;
    manifest.output(&report_path)?;
    manifest.write(&sibling(&a.out, a.manifest, "manifest.json"))?;
    let _ = writeln!(
        stderr,
        "offbias: KL {:.6e} -> {:.6e} after {} iterations ({})",
        report.initial_kl, report.final_kl, report.iterations, report.reason
    );
    Ok(())
}

fn simulate(a: SimulateArgs, stderr: Out) -> Result<(), CliError> {
    let mut scenario = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            serde_json::from_str::<ScenarioConfig>(&text)
                .map_err(|e| CliError::Data(format!("{}:{}: {e}", path.display(), e.line())))?
        }
        None => ScenarioConfig::s1(),
    };
    if let Some(seed) = a.seed {
        scenario.population.seed = seed;
    }
    let log = build_scenario(&scenario)?;
    write_log(&a.out, &log)?;

    let mut manifest = Manifest::new(
        "simulate",
        serde_json::to_value(&scenario).map_err(|e| CliError::Data(e.to_string()))?,
    );
    manifest.seeds.push(scenario.population.seed);
    manifest
        .seeds
        .extend(scenario.campaigns.iter().map(|c| c.seed));
    if let Some(path) = &a.config {
        manifest.input(path)?;
    }
    manifest.output(&a.out)?;
    manifest.write(&sibling(&a.out, a.manifest, "manifest.json"))?;
    let _ = writeln!(
        stderr,
        "offbias: wrote {} events to {}",
        log.len(),
        a.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct StatsOutput {
    time: Timestamp,
    n_users: usize,
    n_items: usize,
    nnz: usize,
    mean_profile_size: f64,
}

fn stats(a: StatsArgs, stdout: Out) -> Result<(), CliError> {
    let log = load_log(&a.log)?;
    let snap = build_snapshot(&log, a.at.unwrap_or_else(|| last_time(&log)))?;
    print_json(
        stdout,
        &StatsOutput {
            time: snap.time(),
            n_users: snap.n_users(),
            n_items: snap.n_items(),
            nnz: snap.nnz(),
            mean_profile_size: snap.mean_profile_size(),
        },
    )
}
