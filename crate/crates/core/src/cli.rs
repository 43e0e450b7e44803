//! Command-line front end. Exit status: 0 success, 1 usage error, 2 runtime error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::{render_ascii, Action, PackingEnv, StepOutcome};
use crate::error::{Error, Result};
use crate::experiments::{
    aggregate, boards_svg, heuristic_file_stem, load_report, run_experiment, summary_csv, summary_table,
    write_report_files, ExperimentConfig, RunOptions, RunReport,
};
use crate::heuristics::{replay, run_heuristic, HeuristicKind, OrderingStrategy, PackingResult, Placement};
use crate::neural::read_checkpoint;
use crate::rl::{evaluate_policy, Agent, EvalMetrics};

#[derive(Debug, Parser)]
#[command(name = "pack2d", version, about = "Two-board 2D+1 packing: heuristics, PPO/A2C training, and reports")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Pack an experiment with a deterministic heuristic and render the boards.
    Heuristic(HeuristicArgs),
    /// Train an agent for one or more seeds; logs, checkpoints and a report go under --out.
    Train(TrainArgs),
    /// Evaluate a saved checkpoint and print the metrics as a CSV row.
    Evaluate(EvaluateArgs),
    /// Step a placements file through the environment and show the rewards.
    Replay(ReplayArgs),
    /// Aggregate completed training logs into a comparison report.
    Report(ReportArgs),
    /// Play random actions and print every step.
    EnvDemo(EnvDemoArgs),
}

#[derive(Debug, Args)]
pub struct ExperimentArg {
    /// Built-in experiment 1-6, `mini`, or a path to an experiment config file.
    #[arg(long, short = 'e', value_name = "ID|PATH")]
    pub experiment: String,
}

#[derive(Debug, Args)]
pub struct HeuristicArgs {
    #[command(flatten)]
    pub experiment: ExperimentArg,
    #[arg(long, default_value = "maxrect-bl", value_parser = parse_heuristic)]
    pub heuristic: HeuristicKind,
    /// Piece order for MaxRect-BL; the level heuristics always sort by height.
    #[arg(long, default_value = "none", value_parser = parse_strategy)]
    pub strategy: OrderingStrategy,
    /// Directory for the placements file (and the SVG with --plot).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Also write an SVG of the boards (requires --out).
    #[arg(long)]
    pub plot: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub experiment: ExperimentArg,
    #[arg(long, default_value = "ppo", value_parser = parse_agent)]
    pub agent: Agent,
    /// Environment step budget per seed (overrides the config).
    #[arg(long)]
    pub steps: Option<usize>,
    /// Train a single seed.
    #[arg(long, conflicts_with = "seeds")]
    pub seed: Option<u64>,
    /// Seed list such as `0-9` or `0,3,5`; defaults to the experiment's seeds.
    #[arg(long, value_parser = parse_seeds)]
    pub seeds: Option<Seeds>,
    /// Output root; files go to `<out>/<experiment name>/`.
    #[arg(long, default_value = "runs", value_name = "DIR")]
    pub out: PathBuf,
    /// Also write SVG learning curves and board plots.
    #[arg(long)]
    pub plot: bool,
    /// Seeds trained in parallel.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long, value_name = "PATH")]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub experiment: ExperimentArg,
    #[arg(long, default_value_t = 10)]
    pub episodes: usize,
    /// Take the most likely action instead of sampling.
    #[arg(long)]
    pub deterministic: bool,
    /// Seed for sampled actions.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[command(flatten)]
    pub experiment: ExperimentArg,
    /// File with one `piece board x y` placement per line; `#` starts a comment.
    #[arg(long, value_name = "PATH")]
    pub placements: PathBuf,
    /// Directory for the SVG written with --plot.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub plot: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// One or more experiments (repeat the flag).
    #[arg(long, short = 'e', value_name = "ID|PATH", required = true)]
    pub experiment: Vec<String>,
    /// Output root used by `train`.
    #[arg(long, default_value = "runs", value_name = "DIR")]
    pub out: PathBuf,
    #[arg(long)]
    pub plot: bool,
}

#[derive(Debug, Args)]
pub struct EnvDemoArgs {
    #[command(flatten)]
    pub experiment: ExperimentArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Maximum number of random actions.
    #[arg(long, default_value_t = 20)]
    pub steps: usize,
}

/// Parsed `--seeds` value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Seeds(pub Vec<u64>);

/// Comma-separated seeds and inclusive ranges, e.g. `0-4,7`.
pub fn parse_seeds(s: &str) -> std::result::Result<Seeds, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim) {
        let num = |t: &str| t.trim().parse::<u64>().map_err(|_| format!("bad seed '{t}'"));
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b) = (num(a)?, num(b)?);
                if a > b {
                    return Err(format!("empty seed range '{part}'"));
                }
                out.extend(a..=b);
            }
            None => out.push(num(part)?),
        }
    }
    let mut dedup = out.clone();
    dedup.sort_unstable();
    dedup.dedup();
    if dedup.len() != out.len() {
        return Err("duplicate seeds".into());
    }
    Ok(Seeds(out))
}

fn parse_heuristic(s: &str) -> std::result::Result<HeuristicKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_strategy(s: &str) -> std::result::Result<OrderingStrategy, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_agent(s: &str) -> std::result::Result<Agent, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Parse `args` (including the program name), run the command, and return the exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = stderr.write_all(text.as_bytes());
                1
            } else {
                let _ = stdout.write_all(text.as_bytes());
                0
            };
        }
    };
    match dispatch(&cli.command, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            if e.is_usage() {
                1
            } else {
                2
            }
        }
    }
}

pub fn dispatch(command: &Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match command {
        Command::Heuristic(a) => heuristic(a, out),
        Command::Train(a) => train(a, out, err),
        Command::Evaluate(a) => evaluate(a, out),
        Command::Replay(a) => replay_cmd(a, out),
        Command::Report(a) => report(a, out),
        Command::EnvDemo(a) => env_demo(a, out),
    }
}

fn experiment(arg: &str) -> Result<ExperimentConfig> {
    let exp = ExperimentConfig::resolve(arg)?;
    exp.env.validate()?;
    Ok(exp)
}

fn uniform_note(exp: &ExperimentConfig, out: &mut dyn Write) -> Result<()> {
    if exp.uniform_height {
        writeln!(out, "note: uniform-height experiment, every piece height set to the board height")?;
    }
    Ok(())
}

fn describe(result: &PackingResult, env: &PackingEnv) -> String {
    let total = env.config().total_pieces();
    let mut skipped = [0usize; 4];
    for &p in &result.skipped {
        skipped[p] += 1;
    }
    let skipped_text: Vec<String> =
        skipped.iter().enumerate().filter(|(_, &n)| n > 0).map(|(p, n)| format!("P{} x{n}", p + 1)).collect();
    format!(
        "placed {}/{} (placement rate {:.4}), skipped {}{}\ncoverage board0 {:.2}% board1 {:.2}%\ntotal reward {}\n",
        result.placements.len(),
        total,
        result.placement_rate,
        result.skipped.len(),
        if skipped_text.is_empty() { String::new() } else { format!(" ({})", skipped_text.join(", ")) },
        result.coverage[0],
        result.coverage[1],
        result.total_reward
    )
}

fn heuristic(a: &HeuristicArgs, out: &mut dyn Write) -> Result<()> {
    if a.plot && a.out.is_none() {
        return Err(Error::Usage("--plot needs --out".into()));
    }
    let exp = experiment(&a.experiment.experiment)?;
    let result = run_heuristic(&exp.env, a.heuristic, a.strategy)?;
    let (env, _) = replay(&exp.env, &result.placements)?;
    writeln!(out, "{} {} / {}", exp.name, a.heuristic, result.strategy)?;
    uniform_note(&exp, out)?;
    out.write_all(render_ascii(&env).as_bytes())?;
    out.write_all(describe(&result, &env).as_bytes())?;
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir)?;
        let stem = heuristic_file_stem(a.heuristic, result.strategy);
        fs::write(dir.join(format!("{stem}.txt")), result.placements_text())?;
        if a.plot {
            let title = format!("{} {} / {}", exp.name, a.heuristic, result.strategy);
            fs::write(dir.join(format!("{stem}.svg")), boards_svg(&title, env.boards()))?;
        }
    }
    Ok(())
}

fn experiment_dir(root: &Path, exp: &ExperimentConfig) -> PathBuf {
    root.join(&exp.name)
}

fn train(a: &TrainArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    if a.jobs == 0 {
        return Err(Error::Usage("--jobs must be at least 1".into()));
    }
    let mut exp = experiment(&a.experiment.experiment)?;
    if let Some(seed) = a.seed {
        exp.seeds = vec![seed];
    } else if let Some(Seeds(seeds)) = &a.seeds {
        exp.seeds = seeds.clone();
    }
    if let Some(steps) = a.steps {
        match a.agent {
            Agent::Ppo => exp.ppo.total_steps = steps,
            Agent::A2c => exp.a2c.total_steps = steps,
        }
    }
    exp.train_config(a.agent).validate()?;
    let dir = experiment_dir(&a.out, &exp);
    let opts = RunOptions {
        agents: vec![a.agent],
        heuristics: vec![],
        strategies: vec![],
        out_dir: Some(dir.clone()),
        plot: a.plot,
        jobs: a.jobs,
    };
    let report = run_experiment(&exp, &opts)?;
    for run in &report.runs {
        let last = run.final_eval().copied().unwrap_or_else(|| EvalMetrics::from_episodes(&[]));
        writeln!(
            out,
            "{} seed {}: steps {} episodes {} final placement rate {:.4} coverage {:.2}/{:.2} best placement rate {:.4}{}",
            run.agent,
            run.seed,
            run.steps,
            run.episodes,
            last.placement_rate,
            last.coverage[0],
            last.coverage[1],
            run.best_placement_rate().unwrap_or(0.0),
            if run.resumed { " (from log)" } else { "" }
        )?;
    }
    let full = full_report(&exp, &dir)?;
    write_report_files(&full, &dir, a.plot)?;
    out.write_all(summary_table(&aggregate(std::slice::from_ref(&full))).as_bytes())?;
    writeln!(out, "wrote {}", dir.display())?;
    writeln!(err, "elapsed {:.1}s", report.wall_clock.as_secs_f64())?;
    Ok(())
}

/// Every completed run in `dir` plus all MaxRect-BL orderings and both level heuristics.
fn full_report(exp: &ExperimentConfig, dir: &Path) -> Result<RunReport> {
    load_report(exp, dir, &[HeuristicKind::MaxrectBl, HeuristicKind::Bfdh, HeuristicKind::Nfdh], &OrderingStrategy::ALL)
}

fn evaluate(a: &EvaluateArgs, out: &mut dyn Write) -> Result<()> {
    let exp = experiment(&a.experiment.experiment)?;
    let net = read_checkpoint(&a.checkpoint)?;
    if net.input_dim() != exp.env.observation_len() || net.head_sizes() != exp.env.action_dims() {
        return Err(Error::Usage(format!(
            "checkpoint expects {} inputs and heads {:?}, experiment '{}' has {} and {:?}",
            net.input_dim(),
            net.head_sizes(),
            exp.name,
            exp.env.observation_len(),
            exp.env.action_dims()
        )));
    }
    if a.episodes == 0 {
        return Err(Error::Usage("--episodes must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let metrics = evaluate_policy(&exp.env, &mut &net, a.episodes, a.deterministic, &mut rng)?;
    writeln!(out, "{}", EvalMetrics::CSV_HEADER)?;
    writeln!(out, "{}", metrics.csv_row())?;
    Ok(())
}

fn read_placements(path: &Path) -> Result<Vec<Placement>> {
    fs::read_to_string(path)?
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(Placement::parse_line)
        .collect()
}

fn replay_cmd(a: &ReplayArgs, out: &mut dyn Write) -> Result<()> {
    if a.plot && a.out.is_none() {
        return Err(Error::Usage("--plot needs --out".into()));
    }
    let exp = experiment(&a.experiment.experiment)?;
    let placements = read_placements(&a.placements)?;
    let mut env = PackingEnv::new(exp.env.clone())?;
    let (mut total, mut invalid) = (0.0, 0usize);
    for (i, p) in placements.iter().enumerate() {
        if env.is_done() {
            writeln!(out, "episode ended; {} placements ignored", placements.len() - i)?;
            break;
        }
        let step = env.step(p.action())?;
        total += step.reward;
        invalid += usize::from(step.reward < 0.0);
        writeln!(out, "step {:>3}: {} -> {:?} reward {}", i + 1, p.to_line(), step.info.outcome, step.reward)?;
    }
    if !env.is_done() && env.is_terminal() {
        let step = env.step(Action::new(0, 0, 0, 0))?;
        debug_assert_eq!(step.info.outcome, StepOutcome::Terminal);
        total += step.reward;
        writeln!(out, "terminal reward {}", step.reward)?;
    }
    uniform_note(&exp, out)?;
    out.write_all(render_ascii(&env).as_bytes())?;
    writeln!(
        out,
        "placed {}/{} (placement rate {:.4}), invalid steps {invalid}, total reward {total}",
        env.placed(),
        exp.env.total_pieces(),
        env.placement_rate()
    )?;
    if let (true, Some(dir)) = (a.plot, &a.out) {
        fs::create_dir_all(dir)?;
        let stem = a.placements.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "replay".into());
        fs::write(dir.join(format!("{stem}.svg")), boards_svg(&format!("{} replay", exp.name), env.boards()))?;
    }
    Ok(())
}

fn report(a: &ReportArgs, out: &mut dyn Write) -> Result<()> {
    let mut reports = Vec::new();
    for spec in &a.experiment {
        let exp = experiment(spec)?;
        let dir = experiment_dir(&a.out, &exp);
        let report = full_report(&exp, &dir)?;
        write_report_files(&report, &dir, a.plot)?;
        reports.push(report);
    }
    let rows = aggregate(&reports);
    fs::create_dir_all(&a.out)?;
    fs::write(a.out.join("report.csv"), summary_csv(&rows))?;
    out.write_all(summary_table(&rows).as_bytes())?;
    writeln!(out, "wrote {}", a.out.join("report.csv").display())?;
    Ok(())
}

fn env_demo(a: &EnvDemoArgs, out: &mut dyn Write) -> Result<()> {
    let exp = experiment(&a.experiment.experiment)?;
    let mut env = PackingEnv::new(exp.env.clone())?;
    let dims = exp.env.action_dims();
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut total = 0.0;
    for i in 0..a.steps {
        let action = Action::from_array(std::array::from_fn(|k| rng.random_range(0..dims[k])));
        let step = env.step(action)?;
        total += step.reward;
        writeln!(
            out,
            "step {:>3}: piece {} board {} at ({}, {}) -> {:?} at {:?}, reward {}",
            i + 1,
            action.piece,
            action.board,
            action.x,
            action.y,
            step.info.outcome,
            step.info.clipped_xy,
            step.reward
        )?;
        if step.done {
            break;
        }
    }
    out.write_all(render_ascii(&env).as_bytes())?;
    writeln!(out, "steps {} placed {} total reward {total}", env.steps_taken(), env.placed())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("0-3,7").unwrap(), Seeds(vec![0, 1, 2, 3, 7]));
        assert_eq!(parse_seeds("5").unwrap(), Seeds(vec![5]));
        assert!(parse_seeds("3-1").is_err());
        assert!(parse_seeds("1,1").is_err());
        assert!(parse_seeds("a").is_err());
    }

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        let code = run(std::iter::once("pack2d").chain(args.iter().copied()), &mut o, &mut e);
        (code, String::from_utf8(o).unwrap(), String::from_utf8(e).unwrap())
    }

    #[test]
    fn usage_errors_exit_with_one() {
        assert_eq!(run_args(&["frobnicate"]).0, 1);
        assert_eq!(run_args(&["heuristic", "--experiment", "1", "--bogus"]).0, 1);
        assert_eq!(run_args(&["heuristic", "--experiment", "1", "--strategy", "sideways"]).0, 1);
        assert_eq!(run_args(&["heuristic", "--experiment", "1", "--plot"]).0, 1);
        assert_eq!(run_args(&[]).0, 1);
    }

    #[test]
    fn runtime_errors_exit_with_two() {
        let (code, _, err) = run_args(&["heuristic", "--experiment", "9"]);
        assert_eq!(code, 2, "{err}");
        assert_eq!(run_args(&["heuristic", "--experiment", "/no/such/file.toml"]).0, 2);
    }

    #[test]
    fn help_goes_to_stdout_with_zero() {
        let (code, out, _) = run_args(&["train", "--help"]);
        assert_eq!(code, 0);
        for flag in ["--experiment", "--agent", "--steps", "--seed", "--seeds", "--out", "--plot"] {
            assert!(out.contains(flag), "{flag} missing from help");
        }
    }

    #[test]
    fn env_demo_is_reproducible() {
        let a = run_args(&["env-demo", "--experiment", "mini", "--seed", "3", "--steps", "30"]);
        assert_eq!(a.0, 0);
        assert_eq!(a, run_args(&["env-demo", "--experiment", "mini", "--seed", "3", "--steps", "30"]));
    }
}
