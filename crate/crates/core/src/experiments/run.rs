//! Multi-seed execution, resumable on-disk logs, aggregation, and report files.
//!
//! Layout of an experiment directory:
//!
//! ```text
//! <dir>/ppo_seed3.toml     training config of the run
//! <dir>/ppo_seed3.ckpt     final parameters
//! <dir>/ppo_seed3.jsonl    JSON-lines training log; written last, marks the run complete
//! <dir>/report.csv         summary table
//! <dir>/curves.svg         evaluation reward and episode length against steps (--plot)
//! <dir>/heuristic_<kind>_<strategy>.txt / .svg
//! ```
//!
//! A run whose log exists and whose stored config equals the requested one is loaded
//! instead of retrained. Wall-clock time is measured but never written to files, so
//! repeated invocations produce byte-identical output.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use super::config::{reference_fill_rate, ExperimentConfig};
use super::plot::{boards_svg, line_chart_svg, Series};
use crate::env::NUM_BOARDS;
use crate::error::{Error, Result};
use crate::heuristics::{replay, run_heuristic, HeuristicKind, OrderingStrategy, PackingResult};
use crate::neural::write_checkpoint;
use crate::rl::{train_with, Agent, EvalMetrics, LogRecord, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub agents: Vec<Agent>,
    pub heuristics: Vec<HeuristicKind>,
    pub strategies: Vec<OrderingStrategy>,
    /// Where logs, checkpoints and reports go; `None` keeps everything in memory.
    pub out_dir: Option<PathBuf>,
    pub plot: bool,
    /// Worker threads for independent seeds.
    pub jobs: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            agents: vec![Agent::Ppo, Agent::A2c],
            heuristics: vec![HeuristicKind::MaxrectBl],
            strategies: OrderingStrategy::ALL.to_vec(),
            out_dir: None,
            plot: false,
            jobs: 1,
        }
    }
}

/// One deterministic evaluation during training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalPoint {
    pub steps: usize,
    pub episodes: usize,
    pub metrics: EvalMetrics,
}

/// One agent trained with one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub agent: Agent,
    pub seed: u64,
    pub evals: Vec<EvalPoint>,
    pub steps: usize,
    pub episodes: usize,
    /// True when the run was loaded from an existing log rather than trained.
    pub resumed: bool,
}

impl SeedRun {
    pub fn final_eval(&self) -> Option<&EvalMetrics> {
        self.evals.last().map(|e| &e.metrics)
    }

    pub fn best_placement_rate(&self) -> Option<f64> {
        self.evals.iter().map(|e| e.metrics.placement_rate).reduce(f64::max)
    }

    fn from_log(agent: Agent, seed: u64, log: &[LogRecord], resumed: bool) -> Self {
        let mut run = SeedRun { agent, seed, evals: Vec::new(), steps: 0, episodes: 0, resumed };
        for record in log {
            match *record {
                LogRecord::Update { steps, episodes, .. } => {
                    run.steps = steps;
                    run.episodes = episodes;
                }
                LogRecord::Eval { steps, episodes, metrics, .. } => run.evals.push(EvalPoint { steps, episodes, metrics }),
            }
        }
        run
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub experiment: ExperimentConfig,
    pub runs: Vec<SeedRun>,
    pub heuristics: Vec<PackingResult>,
    /// Time spent in this invocation. Not part of any written file.
    pub wall_clock: Duration,
}

pub fn log_file_name(agent: Agent, seed: u64) -> String {
    format!("{agent}_seed{seed}.jsonl")
}

pub fn checkpoint_file_name(agent: Agent, seed: u64) -> String {
    format!("{agent}_seed{seed}.ckpt")
}

fn config_file_name(agent: Agent, seed: u64) -> String {
    format!("{agent}_seed{seed}.toml")
}

pub fn heuristic_file_stem(kind: HeuristicKind, strategy: OrderingStrategy) -> String {
    format!("heuristic_{kind}_{strategy}")
}

pub fn read_log(path: &Path) -> Result<Vec<LogRecord>> {
    fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

/// Load a completed run if its log exists and was produced with `cfg`.
fn load_completed(dir: &Path, agent: Agent, seed: u64, cfg: &TrainConfig) -> Result<Option<SeedRun>> {
    let log_path = dir.join(log_file_name(agent, seed));
    let cfg_path = dir.join(config_file_name(agent, seed));
    if !log_path.exists() || !cfg_path.exists() {
        return Ok(None);
    }
    let stored: TrainConfig = toml::from_str(&fs::read_to_string(&cfg_path)?)?;
    if &stored != cfg {
        return Ok(None);
    }
    Ok(Some(SeedRun::from_log(agent, seed, &read_log(&log_path)?, true)))
}

/// Train one seed. With a directory, the log streams to a temporary file that is renamed
/// into place once the checkpoint has been written.
pub fn train_seed(experiment: &ExperimentConfig, agent: Agent, seed: u64, dir: Option<&Path>) -> Result<SeedRun> {
    let cfg = experiment.seeded(agent, seed);
    let Some(dir) = dir else {
        let outcome = train_with::<f32, _>(&experiment.env, &cfg, |_, _| Ok(()))?;
        return Ok(SeedRun::from_log(agent, seed, &outcome.log, false));
    };
    if let Some(run) = load_completed(dir, agent, seed, &cfg)? {
        return Ok(run);
    }
    fs::create_dir_all(dir)?;
    let log_path = dir.join(log_file_name(agent, seed));
    let partial = dir.join(format!("{}.partial", log_file_name(agent, seed)));
    let _ = fs::remove_file(&log_path);
    fs::write(dir.join(config_file_name(agent, seed)), toml::to_string(&cfg).expect("train config serializes"))?;
    let mut file = std::io::BufWriter::new(fs::File::create(&partial)?);
    let outcome = train_with::<f32, _>(&experiment.env, &cfg, |_, record| {
        file.write_all(record.to_json_line().as_bytes())?;
        Ok(())
    })?;
    file.flush()?;
    drop(file);
    write_checkpoint(&outcome.params, &dir.join(checkpoint_file_name(agent, seed)))?;
    fs::rename(&partial, &log_path)?;
    Ok(SeedRun::from_log(agent, seed, &outcome.log, false))
}

/// Run every (agent, seed) pair on up to `jobs` threads. Results come back in
/// agent-then-seed order regardless of scheduling.
fn train_all(experiment: &ExperimentConfig, agents: &[Agent], dir: Option<&Path>, jobs: usize) -> Result<Vec<SeedRun>> {
    let tasks: Vec<(Agent, u64)> =
        agents.iter().flat_map(|&a| experiment.seeds.iter().map(move |&s| (a, s))).collect();
    let results: Vec<Mutex<Option<Result<SeedRun>>>> = tasks.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let worker = || loop {
        let i = next.fetch_add(1, Ordering::Relaxed);
        let Some(&(agent, seed)) = tasks.get(i) else { break };
        let result = train_seed(experiment, agent, seed, dir);
        *results[i].lock().expect("result slot") = Some(result);
    };
    std::thread::scope(|scope| {
        for _ in 1..jobs.clamp(1, tasks.len().max(1)) {
            scope.spawn(worker);
        }
        worker();
    });
    results.into_iter().map(|slot| slot.into_inner().expect("result slot").expect("every task ran")).collect()
}

/// Heuristic runs, one per (kind, strategy). Level heuristics sort by height themselves,
/// so they run once with the `none` strategy.
pub fn run_heuristics(
    experiment: &ExperimentConfig,
    kinds: &[HeuristicKind],
    strategies: &[OrderingStrategy],
) -> Result<Vec<PackingResult>> {
    let mut out = Vec::new();
    for &kind in kinds {
        let strategies: &[OrderingStrategy] =
            if kind == HeuristicKind::MaxrectBl { strategies } else { &[OrderingStrategy::None] };
        for &strategy in strategies {
            out.push(run_heuristic(&experiment.env, kind, strategy)?);
        }
    }
    Ok(out)
}

/// Train each agent for every seed (reusing completed logs), run the heuristics, and write
/// report files when an output directory is given.
pub fn run_experiment(experiment: &ExperimentConfig, opts: &RunOptions) -> Result<RunReport> {
    if experiment.seeds.is_empty() && !opts.agents.is_empty() {
        return Err(Error::Config("at least one seed is required".into()));
    }
    experiment.env.validate()?;
    let start = Instant::now();
    let dir = opts.out_dir.as_deref();
    let runs = train_all(experiment, &opts.agents, dir, opts.jobs)?;
    let heuristics = run_heuristics(experiment, &opts.heuristics, &opts.strategies)?;
    let report = RunReport { experiment: experiment.clone(), runs, heuristics, wall_clock: start.elapsed() };
    if let Some(dir) = dir {
        write_report_files(&report, dir, opts.plot)?;
    }
    Ok(report)
}

/// Rebuild a report from the completed logs in `dir` without training anything.
pub fn load_report(
    experiment: &ExperimentConfig,
    dir: &Path,
    kinds: &[HeuristicKind],
    strategies: &[OrderingStrategy],
) -> Result<RunReport> {
    let start = Instant::now();
    let mut found: Vec<(Agent, u64)> = Vec::new();
    if dir.is_dir() {
        for entry in fs::read_dir(dir)? {
            let name = entry?.file_name().to_string_lossy().into_owned();
            if let Some(key) = parse_log_name(&name) {
                found.push(key);
            }
        }
    }
    found.sort();
    let runs = found
        .into_iter()
        .map(|(agent, seed)| Ok(SeedRun::from_log(agent, seed, &read_log(&dir.join(log_file_name(agent, seed)))?, true)))
        .collect::<Result<Vec<_>>>()?;
    let heuristics = run_heuristics(experiment, kinds, strategies)?;
    Ok(RunReport { experiment: experiment.clone(), runs, heuristics, wall_clock: start.elapsed() })
}

fn parse_log_name(name: &str) -> Option<(Agent, u64)> {
    let stem = name.strip_suffix(".jsonl")?;
    let (agent, seed) = stem.split_once("_seed")?;
    Some((agent.parse().ok()?, seed.parse().ok()?))
}

/// Write `report.csv`, heuristic placement files and, with `plot`, the SVG figures.
pub fn write_report_files(report: &RunReport, dir: &Path, plot: bool) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.csv"), summary_csv(&aggregate(std::slice::from_ref(report))))?;
    for result in &report.heuristics {
        let stem = heuristic_file_stem(result.heuristic, result.strategy);
        fs::write(dir.join(format!("{stem}.txt")), result.placements_text())?;
        if plot {
            let (env, _) = replay(&report.experiment.env, &result.placements)?;
            let title = format!("{} {} / {}", report.experiment.name, result.heuristic, result.strategy);
            fs::write(dir.join(format!("{stem}.svg")), boards_svg(&title, env.boards()))?;
        }
    }
    if plot && !report.runs.is_empty() {
        fs::write(dir.join("curves.svg"), learning_curves_svg(report))?;
    }
    Ok(())
}

pub fn learning_curves_svg(report: &RunReport) -> String {
    let series = |f: fn(&EvalMetrics) -> f64| -> Vec<Series> {
        report
            .runs
            .iter()
            .map(|r| Series {
                label: format!("{} seed {}", r.agent, r.seed),
                points: r.evals.iter().map(|e| (e.steps as f64, f(&e.metrics))).collect(),
            })
            .collect()
    };
    line_chart_svg(
        "environment steps",
        &[
            ("evaluation episode reward", series(|m| m.mean_reward)),
            ("evaluation episode length", series(|m| m.mean_episode_length)),
        ],
    )
}

/// One line of the comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub experiment: u32,
    pub name: String,
    pub uniform_height: bool,
    /// Agent name, or `<heuristic>/<strategy>`.
    pub source: String,
    pub metric: &'static str,
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation; absent for a single value.
    pub std: Option<f64>,
    /// Full-scale reference (mean, std) in percent, for agent fill rates.
    pub reference: Option<(f64, f64)>,
}

pub const METRICS: [&str; 5] = ["placement_pct", "coverage_pct", "coverage_board0_pct", "coverage_board1_pct", "episode_length"];

fn metric_values(placement_rate: f64, coverage: [f64; NUM_BOARDS], length: f64) -> [f64; 5] {
    [placement_rate * 100.0, (coverage[0] + coverage[1]) / 2.0, coverage[0], coverage[1], length]
}

/// Mean and sample std. Values are sorted first so the result does not depend on seed order.
pub fn mean_std(values: &[f64]) -> (f64, Option<f64>) {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = (v.len() >= 2).then(|| {
        let mut sq: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
        sq.sort_by(f64::total_cmp);
        (sq.iter().sum::<f64>() / (n - 1.0)).sqrt()
    });
    (mean, std)
}

/// Per experiment and source, mean/std of each metric over the final evaluations of all
/// seeds. Heuristic rows are single deterministic runs.
pub fn aggregate(reports: &[RunReport]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for report in reports {
        let exp = &report.experiment;
        let row = |source: String, metric: &'static str, values: &[f64], reference| {
            let (mean, std) = mean_std(values);
            SummaryRow {
                experiment: exp.id,
                name: exp.name.clone(),
                uniform_height: exp.uniform_height,
                source,
                metric,
                n: values.len(),
                mean,
                std,
                reference,
            }
        };
        let mut agents: Vec<Agent> = report.runs.iter().map(|r| r.agent).collect();
        agents.sort();
        agents.dedup();
        for agent in agents {
            let finals: Vec<[f64; 5]> = report
                .runs
                .iter()
                .filter(|r| r.agent == agent)
                .filter_map(|r| r.final_eval())
                .map(|m| metric_values(m.placement_rate, m.coverage, m.mean_episode_length))
                .collect();
            if finals.is_empty() {
                continue;
            }
            for (k, metric) in METRICS.iter().enumerate() {
                let values: Vec<f64> = finals.iter().map(|v| v[k]).collect();
                let reference = (k == 0).then(|| reference_fill_rate(exp.id, agent)).flatten();
                rows.push(row(agent.to_string(), metric, &values, reference));
            }
        }
        for h in &report.heuristics {
            let length = (h.placements.len() + 1) as f64;
            let values = metric_values(h.placement_rate, h.coverage, length);
            for (k, metric) in METRICS.iter().enumerate().take(4) {
                rows.push(row(format!("{}/{}", h.heuristic, h.strategy), metric, &values[k..=k], None));
            }
        }
    }
    rows
}

pub const SUMMARY_CSV_HEADER: &str =
    "experiment,name,uniform_height,source,metric,n,mean,std,reference_mean,reference_std";

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_default();
    let mut out = String::from(SUMMARY_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{:.4},{},{},{}\n",
            r.experiment,
            r.name,
            r.uniform_height,
            r.source,
            r.metric,
            r.n,
            r.mean,
            opt(r.std),
            opt(r.reference.map(|x| x.0)),
            opt(r.reference.map(|x| x.1)),
        ));
    }
    out
}

/// Human-readable version of the placement and coverage rows.
pub fn summary_table(rows: &[SummaryRow]) -> String {
    let mut out = format!(
        "{:<6} {:<22} {:<14} {:>3} {:>9} {:>8} {:>14}\n",
        "exp", "source", "metric", "n", "mean", "std", "full-scale ref"
    );
    for r in rows.iter().filter(|r| r.metric == "placement_pct" || r.metric == "coverage_pct") {
        let std = r.std.map(|s| format!("{s:.2}")).unwrap_or_else(|| "-".into());
        let reference = r.reference.map(|(m, s)| format!("{m:.0} ± {s:.0}")).unwrap_or_else(|| "-".into());
        out.push_str(&format!(
            "{:<6} {:<22} {:<14} {:>3} {:>9.2} {:>8} {:>14}\n",
            r.name, r.source, r.metric, r.n, r.mean, std, reference
        ));
    }
    out
}
