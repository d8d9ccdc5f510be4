//! Experiment harness CLI: seeded benchmark runs, domain dumps, and
//! trace-pair analysis.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use advicerl::analysis::RewardTrace;
use advicerl::domains::{BlockDudeSpec, GridWorldSpec};
use advicerl::experiment::{
    analyze_traces, emit_svg, run_experiment, smooth, write_analysis_csv, write_analysis_json,
    write_outputs, write_traces, Algorithm, Domain, ExperimentConfig, SvgSeries, TeacherKind,
};
use advicerl::mdp::{relative_value_iteration, validate};

#[derive(Parser)]
#[command(
    name = "advicerl",
    version,
    about = "Multi-teacher policy advice experiments on average-reward tabular MDPs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experimental setting (or `--algo all` for the whole suite)
    /// and write learning-curve CSV, summary JSON, and SVG plots.
    Run(Box<RunArgs>),
    /// Build a benchmark domain and dump its MDP JSON document.
    BuildDomain(BuildDomainArgs),
    /// Analyze a candidate trace against a baseline trace: cumulative
    /// regret, empirical Bernstein intervals, regret-ratio bounds, and the
    /// negative-transfer verdict.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct RunArgs {
    /// grid-world | combination-lock | block-dude
    #[arg(long)]
    domain: Option<String>,
    /// ours | regal-no-advice | optimal-policy | best-teacher-baseline | all
    #[arg(long)]
    algo: Option<String>,
    /// optimal | worst | random
    #[arg(long)]
    teacher: Option<String>,
    /// TOML config file; explicit flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed; trial k runs with seed base+k.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    trials: Option<usize>,
    /// Steps per iteration (the per-iteration dataset size).
    #[arg(long)]
    steps_per_iter: Option<usize>,
    /// Number of outer iterations.
    #[arg(long)]
    iters: Option<usize>,
    /// Base of the exponential mixing schedule beta_i = base^i.
    #[arg(long)]
    beta_base: Option<f64>,
    /// Span ceiling for the constrained planner.
    #[arg(long = "H")]
    span_ceiling: Option<f64>,
    /// Confidence-set failure probability.
    #[arg(long)]
    delta: Option<f64>,
    /// Combination-lock size n (the chain has n+1 states).
    #[arg(long)]
    lock_n: Option<usize>,
    /// Number of teachers k.
    #[arg(long)]
    teachers: Option<usize>,
    /// Visited-pair planning radius multiplier in [0, 1]
    /// (default: empirical rows, optimism on unvisited pairs only).
    #[arg(long)]
    radius_scale: Option<f64>,
    /// Smoothing window for plotted curves, in steps.
    #[arg(long)]
    smoothing_window: Option<usize>,
    /// Also write one trace CSV per trial.
    #[arg(long)]
    emit_traces: bool,
}

impl RunArgs {
    fn to_config(&self) -> Result<(ExperimentConfig, bool)> {
        let mut config = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                ExperimentConfig::from_toml(&text)?
            }
            None => ExperimentConfig::default(),
        };
        let mut run_all = false;
        if let Some(d) = &self.domain {
            config.domain = d.parse()?;
        }
        if let Some(a) = &self.algo {
            if a == "all" {
                run_all = true;
            } else {
                config.algorithm = a.parse()?;
            }
        }
        if let Some(t) = &self.teacher {
            config.teacher = t.parse()?;
        }
        if let Some(s) = self.seed {
            config.base_seed = s;
        }
        if let Some(t) = self.trials {
            config.trials = t;
        }
        if let Some(s) = self.steps_per_iter {
            config.steps_per_iter = s;
        }
        if let Some(m) = self.iters {
            config.iterations = m;
        }
        if let Some(b) = self.beta_base {
            config.beta_base = b;
        }
        if let Some(h) = self.span_ceiling {
            config.span_ceiling = h;
        }
        if let Some(d) = self.delta {
            config.delta = d;
        }
        if let Some(n) = self.lock_n {
            config.lock_size = n;
        }
        if let Some(k) = self.teachers {
            config.num_teachers = k;
        }
        if let Some(r) = self.radius_scale {
            config.radius_scale = Some(r);
        }
        if let Some(w) = self.smoothing_window {
            config.smoothing_window = w;
        }
        Ok((config, run_all))
    }
}

fn run(args: &RunArgs) -> Result<()> {
    let (base, run_all) = args.to_config()?;
    let settings: Vec<ExperimentConfig> = if run_all {
        // The full comparison suite: the advice learner under each teacher
        // kind, plus the three baselines.
        vec![
            ExperimentConfig {
                algorithm: Algorithm::Ours,
                teacher: TeacherKind::Optimal,
                ..base.clone()
            },
            ExperimentConfig {
                algorithm: Algorithm::Ours,
                teacher: TeacherKind::Worst,
                ..base.clone()
            },
            ExperimentConfig {
                algorithm: Algorithm::Ours,
                teacher: TeacherKind::Random,
                ..base.clone()
            },
            ExperimentConfig {
                algorithm: Algorithm::RegalNoAdvice,
                ..base.clone()
            },
            ExperimentConfig {
                algorithm: Algorithm::OptimalPolicy,
                ..base.clone()
            },
            ExperimentConfig {
                algorithm: Algorithm::BestTeacherBaseline,
                ..base.clone()
            },
        ]
    } else {
        vec![base.clone()]
    };

    std::fs::create_dir_all(&args.out)?;
    let mut series = Vec::new();
    for config in &settings {
        let result = run_experiment(config)
            .with_context(|| format!("running setting {}", config.label()))?;
        let paths = write_outputs(&result, &args.out)?;
        if args.emit_traces {
            write_traces(&result, &args.out)?;
        }
        for p in &paths {
            println!("wrote {}", p.display());
        }
        println!(
            "{}: gain* = {:.6}, mean final-window reward = {:.4}",
            config.label(),
            result.gain_star,
            result.mean_final_window()
        );
        series.push(SvgSeries {
            label: config.label(),
            values: smooth(&result.aggregate_rewards, config.smoothing_window),
        });
    }
    if series.len() > 1 {
        let combined = args.out.join(format!("curves_{}.svg", base.domain));
        emit_svg(
            &series,
            &format!(
                "{} (smoothed mean reward, window {})",
                base.domain, base.smoothing_window
            ),
            &combined,
        )?;
        println!("wrote {}", combined.display());
    }
    Ok(())
}

#[derive(Args)]
struct BuildDomainArgs {
    /// grid-world | combination-lock | block-dude
    #[arg(long)]
    domain: String,
    /// Combination-lock size n.
    #[arg(long)]
    lock_n: Option<usize>,
    /// Output file (defaults to <domain>.json).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Force the sparse transitions encoding.
    #[arg(long)]
    sparse: bool,
    /// Print an ASCII map of the layout (grid-world and block-dude).
    #[arg(long)]
    map: bool,
}

fn build_domain(args: &BuildDomainArgs) -> Result<()> {
    let domain: Domain = args.domain.parse()?;
    let mdp = domain.build(args.lock_n.unwrap_or(5))?;
    let report = validate(&mdp);
    if !report.is_ok() {
        bail!("built domain failed validation: {report:?}");
    }
    if args.map {
        match domain {
            Domain::GridWorld => print!("{}", GridWorldSpec::default().ascii_map()),
            Domain::BlockDude => print!("{}", BlockDudeSpec::default().ascii_map()),
            Domain::CombinationLock => {}
        }
    }
    let (gb, _) = relative_value_iteration(&mdp, 1e-9, 1_000_000)?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{domain}.json")));
    let text = if args.sparse {
        mdp.to_json_with(false)
    } else {
        mdp.to_json()
    };
    std::fs::write(&out, text)?;
    println!(
        "wrote {} ({} states, gain* = {:.6}, bias span = {:.4})",
        out.display(),
        mdp.num_states(),
        gb.gain,
        gb.span
    );
    Ok(())
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Candidate trace CSV (e.g. the transferred policy in the target task).
    #[arg(long)]
    trace_a: PathBuf,
    /// Baseline trace CSV (e.g. a learning run in the target task).
    #[arg(long)]
    trace_b: PathBuf,
    /// Optional trace of the candidate policy in its source task; enables
    /// the transfer-gap condition.
    #[arg(long)]
    source_trace: Option<PathBuf>,
    /// Optimal gain of the (target) task.
    #[arg(long)]
    gain: f64,
    /// Failure probability for the Bernstein intervals.
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Reward magnitude bound; defaults to the largest |reward| in the
    /// traces.
    #[arg(long)]
    r_max: Option<f64>,
    /// Checkpoint spacing (steps) for the report table.
    #[arg(long, default_value_t = 100)]
    checkpoint_every: usize,
    /// Output prefix; writes <prefix>.json and <prefix>.csv.
    #[arg(long, default_value = "analysis")]
    out: PathBuf,
}

fn analyze(args: &AnalyzeArgs) -> Result<()> {
    let read_trace = |path: &PathBuf| -> Result<RewardTrace> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading trace {}", path.display()))?;
        Ok(RewardTrace::from_csv(&text)?)
    };
    let candidate = read_trace(&args.trace_a)?;
    let baseline = read_trace(&args.trace_b)?;
    let source = args.source_trace.as_ref().map(read_trace).transpose()?;
    let r_max = args.r_max.unwrap_or_else(|| {
        candidate
            .steps()
            .iter()
            .chain(baseline.steps())
            .map(|s| s.reward.abs())
            .fold(0.0, f64::max)
    });
    let analysis = analyze_traces(
        &candidate,
        &baseline,
        source.as_ref(),
        args.gain,
        args.delta,
        r_max,
        args.checkpoint_every,
    )?;
    let json_path = args.out.with_extension("json");
    let csv_path = args.out.with_extension("csv");
    write_analysis_json(&analysis, &json_path)?;
    write_analysis_csv(&analysis, &csv_path)?;
    println!("wrote {}", json_path.display());
    println!("wrote {}", csv_path.display());
    match (analysis.rho_lower, analysis.rho_upper) {
        (Some(lo), Some(hi)) => println!(
            "rho_hat = {:.4} in [{lo:.4}, {hi:.4}]; negative transfer: {}",
            analysis.rho_hat.unwrap_or(f64::NAN),
            analysis
                .negative_transfer
                .map(|b| if b { "yes" } else { "no" })
                .unwrap_or("n/a")
        ),
        _ => println!("baseline regret too small for ratio bounds"),
    }
    if let Some(gap) = analysis.transfer_gap {
        println!(
            "transfer gap d = {gap:.4}; gap condition holds: {}",
            analysis
                .gap_condition_holds
                .map(|b| if b { "yes" } else { "no" })
                .unwrap_or("n/a")
        );
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run(args),
        Command::BuildDomain(args) => build_domain(args),
        Command::Analyze(args) => analyze(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
