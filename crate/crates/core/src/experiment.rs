//! Configured, seeded experiment runner for the benchmark settings; emits
//! CSV learning curves, JSON summaries, and SVG plots.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::rngs::StdRng;
use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::advice::{
    best_teacher_baseline, make_optimal_teacher, make_random_teacher, make_worst_teacher,
    multi_teacher_advice, AdviceModel, GrandTeacher, MixSchedule, TeacherPolicy,
};
use crate::analysis::{
    cumulative_regret, cumulative_regret_from_rewards, empirical_bernstein,
    negative_transfer_check, BernsteinInterval, FiredBy, RegretCurve, RegretRatio, RewardTrace,
};
use crate::domains::{build_block_dude, build_combination_lock, BlockDudeSpec, GridWorldSpec};
use crate::error::{Error, Result};
use crate::mdp::{
    policy_gain_by_state, relative_value_iteration, DeterministicPolicy, StepRecord, TabularMdp,
};
use crate::regal::RegalParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    GridWorld,
    CombinationLock,
    BlockDude,
}

impl Domain {
    pub fn build(&self, lock_size: usize) -> Result<TabularMdp> {
        match self {
            Domain::GridWorld => GridWorldSpec::default().build(),
            Domain::CombinationLock => build_combination_lock(lock_size),
            Domain::BlockDude => Ok(build_block_dude(&BlockDudeSpec::default())?.mdp),
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Domain::GridWorld => "grid-world",
            Domain::CombinationLock => "combination-lock",
            Domain::BlockDude => "block-dude",
        };
        f.write_str(s)
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grid-world" => Ok(Domain::GridWorld),
            "combination-lock" => Ok(Domain::CombinationLock),
            "block-dude" => Ok(Domain::BlockDude),
            other => Err(Error::Config(format!("unknown domain {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// The mixed-policy advice learner.
    Ours,
    RegalNoAdvice,
    /// Fixed oracle-optimal policy, no learning.
    OptimalPolicy,
    BestTeacherBaseline,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Algorithm::Ours => "ours",
            Algorithm::RegalNoAdvice => "regal-no-advice",
            Algorithm::OptimalPolicy => "optimal-policy",
            Algorithm::BestTeacherBaseline => "best-teacher-baseline",
        };
        f.write_str(s)
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ours" => Ok(Algorithm::Ours),
            "regal-no-advice" => Ok(Algorithm::RegalNoAdvice),
            "optimal-policy" => Ok(Algorithm::OptimalPolicy),
            "best-teacher-baseline" => Ok(Algorithm::BestTeacherBaseline),
            other => Err(Error::Config(format!("unknown algorithm {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TeacherKind {
    Optimal,
    Worst,
    Random,
}

impl fmt::Display for TeacherKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TeacherKind::Optimal => "optimal",
            TeacherKind::Worst => "worst",
            TeacherKind::Random => "random",
        };
        f.write_str(s)
    }
}

impl FromStr for TeacherKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "optimal" => Ok(TeacherKind::Optimal),
            "worst" => Ok(TeacherKind::Worst),
            "random" => Ok(TeacherKind::Random),
            other => Err(Error::Config(format!("unknown teacher kind {other:?}"))),
        }
    }
}

/// One experimental setting. Defaults are the benchmark values: 10 teachers
/// with budget `|S|` each, 10 iterations of 200 steps, `beta_i = 0.5^i`,
/// `H = 1000`, `delta = 0.8`, 10 trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub domain: Domain,
    pub algorithm: Algorithm,
    pub teacher: TeacherKind,
    pub num_teachers: usize,
    pub iterations: usize,
    pub steps_per_iter: usize,
    pub beta_base: f64,
    pub span_ceiling: f64,
    pub delta: f64,
    pub trials: usize,
    pub base_seed: u64,
    pub lock_size: usize,
    pub smoothing_window: usize,
    pub planner_tol: f64,
    /// Planning-radius multiplier; `None` selects the per-pair Hoeffding
    /// scale `1 / sqrt(|S|)`.
    pub radius_scale: Option<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            domain: Domain::CombinationLock,
            algorithm: Algorithm::Ours,
            teacher: TeacherKind::Optimal,
            num_teachers: 10,
            iterations: 10,
            steps_per_iter: 200,
            beta_base: 0.5,
            span_ceiling: 1000.0,
            delta: 0.8,
            trials: 10,
            base_seed: 0,
            lock_size: 5,
            smoothing_window: 200,
            planner_tol: 1e-6,
            radius_scale: None,
        }
    }
}

impl ExperimentConfig {
    pub fn total_steps(&self) -> usize {
        self.iterations * self.steps_per_iter
    }

    pub fn regal_params(&self) -> RegalParams {
        RegalParams {
            span_ceiling: self.span_ceiling,
            delta: self.delta,
            tol: self.planner_tol,
            max_sweeps: 200_000,
            radius_scale: self.radius_scale,
        }
    }

    /// File-name stem identifying this setting.
    pub fn label(&self) -> String {
        match self.algorithm {
            Algorithm::Ours => format!(
                "{}_{}_{}-teacher",
                self.domain, self.algorithm, self.teacher
            ),
            Algorithm::BestTeacherBaseline => {
                format!(
                    "{}_{}_{}-teacher",
                    self.domain, self.algorithm, self.teacher
                )
            }
            _ => format!("{}_{}", self.domain, self.algorithm),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.iterations == 0 || self.steps_per_iter == 0 {
            return Err(Error::Config(
                "iterations and steps-per-iter must be positive".into(),
            ));
        }
        if self.num_teachers == 0 {
            return Err(Error::Config("need at least one teacher".into()));
        }
        if !(0.0..=1.0).contains(&self.beta_base) {
            return Err(Error::Config(format!(
                "beta base {} outside [0, 1]",
                self.beta_base
            )));
        }
        if !(0.0 < self.delta && self.delta < 1.0) {
            return Err(Error::Config(format!(
                "delta {} outside (0, 1)",
                self.delta
            )));
        }
        if self.span_ceiling.is_nan() || self.span_ceiling <= 0.0 {
            return Err(Error::Config(format!(
                "span ceiling {} not positive",
                self.span_ceiling
            )));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config parse error: {e}")))
    }
}

/// One seeded trial of a setting.
#[derive(Debug, Clone)]
pub struct TrialResult {
    pub seed: u64,
    pub trace: RewardTrace,
    /// Trailing-window mean of the per-step rewards.
    pub smoothed: Vec<f64>,
    pub final_policy: DeterministicPolicy,
    /// Oracle start-state gain of the final policy on the true MDP.
    pub final_policy_gain: f64,
    pub regret: RegretCurve,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub gain_star: f64,
    pub span_star: f64,
    pub trials: Vec<TrialResult>,
    /// Pointwise mean of the per-step rewards over trials.
    pub aggregate_rewards: Vec<f64>,
    pub aggregate_regret: RegretCurve,
}

impl ExperimentResult {
    pub fn mean_final_window(&self) -> f64 {
        let w = self.config.smoothing_window * 2;
        self.trials
            .iter()
            .map(|t| t.trace.final_window_average(w))
            .sum::<f64>()
            / self.trials.len() as f64
    }
}

/// Trailing-window running mean.
pub fn smooth(rewards: &[f64], window: usize) -> Vec<f64> {
    let w = window.max(1);
    let mut out = Vec::with_capacity(rewards.len());
    let mut sum = 0.0;
    for (i, &r) in rewards.iter().enumerate() {
        sum += r;
        if i >= w {
            sum -= rewards[i - w];
        }
        out.push(sum / (i + 1).min(w) as f64);
    }
    out
}

fn build_teachers(
    kind: TeacherKind,
    k: usize,
    mdp: &TabularMdp,
    optimal: &TeacherPolicy,
    worst: &TeacherPolicy,
    rng: &mut StdRng,
) -> Vec<TeacherPolicy> {
    match kind {
        TeacherKind::Optimal => vec![optimal.clone(); k],
        TeacherKind::Worst => vec![worst.clone(); k],
        TeacherKind::Random => (0..k).map(|_| make_random_teacher(mdp, rng)).collect(),
    }
}

/// Runs all trials of a setting (seeds `base_seed + trial`), in parallel.
/// The aggregate curve is the pointwise mean; everything is deterministic
/// given the base seed.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let mdp = config.domain.build(config.lock_size)?;
    let (gb, pi_star) = relative_value_iteration(&mdp, 1e-9, 1_000_000)?;
    // Shared oracle teachers; random teachers are drawn per trial.
    let optimal = make_optimal_teacher(&mdp)?;
    let worst = make_worst_teacher(&mdp)?;

    let trials: Result<Vec<TrialResult>> = (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let seed = config.base_seed + trial as u64;
            run_trial(config, &mdp, &gb.gain, &pi_star, &optimal, &worst, seed)
        })
        .collect();
    let trials = trials?;

    let total = trials[0].trace.len();
    let mut aggregate_rewards = vec![0.0; total];
    for t in &trials {
        for (i, step) in t.trace.steps().iter().enumerate() {
            aggregate_rewards[i] += step.reward;
        }
    }
    for x in aggregate_rewards.iter_mut() {
        *x /= trials.len() as f64;
    }
    let aggregate_regret = cumulative_regret_from_rewards(&aggregate_rewards, gb.gain);

    Ok(ExperimentResult {
        config: config.clone(),
        gain_star: gb.gain,
        span_star: gb.span,
        trials,
        aggregate_rewards,
        aggregate_regret,
    })
}

fn run_trial(
    config: &ExperimentConfig,
    mdp: &TabularMdp,
    gain_star: &f64,
    pi_star: &DeterministicPolicy,
    optimal: &TeacherPolicy,
    worst: &TeacherPolicy,
    seed: u64,
) -> Result<TrialResult> {
    let mut rng = StdRng::seed_from_u64(seed);
    let params = config.regal_params();
    let total = config.total_steps();

    let (trace, final_policy) = match config.algorithm {
        Algorithm::Ours => {
            let teachers = build_teachers(
                config.teacher,
                config.num_teachers,
                mdp,
                optimal,
                worst,
                &mut rng,
            );
            let model = AdviceModel::new(teachers)?;
            let mut gt = GrandTeacher::online(model, mdp.num_states());
            let schedule = MixSchedule::exponential(config.beta_base, config.iterations)?;
            let run = multi_teacher_advice(
                mdp,
                Some(&mut gt),
                &schedule,
                config.steps_per_iter,
                &params,
                &mut rng,
            )?;
            (run.trace, run.final_policy)
        }
        Algorithm::RegalNoAdvice => {
            let schedule = MixSchedule::constant(0.0, config.iterations)?;
            let run = multi_teacher_advice(
                mdp,
                None,
                &schedule,
                config.steps_per_iter,
                &params,
                &mut rng,
            )?;
            (run.trace, run.final_policy)
        }
        Algorithm::OptimalPolicy => {
            let mut trace = RewardTrace::new();
            let mut s = mdp.start_state();
            for i in 0..total {
                if i % config.steps_per_iter == 0 {
                    trace.begin_iteration();
                }
                let a = pi_star.action(s);
                let (s2, r) = mdp.step(s, a, &mut rng)?;
                trace.push(
                    StepRecord {
                        state: s,
                        action: a,
                        next_state: s2,
                        reward: r,
                    },
                    FiredBy::Student,
                );
                s = s2;
            }
            (trace, pi_star.clone())
        }
        Algorithm::BestTeacherBaseline => {
            let teachers = build_teachers(
                config.teacher,
                config.num_teachers,
                mdp,
                optimal,
                worst,
                &mut rng,
            );
            let model = AdviceModel::new(teachers)?;
            let eval_steps = (total / config.num_teachers).max(1);
            let run = best_teacher_baseline(mdp, &model, eval_steps, &mut rng)?;
            (run.trace, run.policy)
        }
    };

    let rewards = trace.rewards();
    let smoothed = smooth(&rewards, config.smoothing_window);
    let regret = cumulative_regret(&trace, *gain_star);
    // Reporting-grade tolerance: learned policies can mix slowly (e.g.
    // wall-bumping grid policies under slip), and the summary only needs a
    // few digits.
    let final_policy_gain =
        policy_gain_by_state(mdp, &final_policy, 1e-6, 2_000_000)?[mdp.start_state()];
    Ok(TrialResult {
        seed,
        trace,
        smoothed,
        final_policy,
        final_policy_gain,
        regret,
    })
}

// ---------------------------------------------------------------------------
// Output files
// ---------------------------------------------------------------------------

/// Writes the learning-curve CSV: one row per step with the aggregate mean
/// reward, each trial's reward, and the aggregate cumulative regret.
pub fn emit_csv(result: &ExperimentResult, path: &Path) -> Result<()> {
    let mut out = String::from("step,mean_reward");
    for t in 0..result.trials.len() {
        out.push_str(&format!(",trial_{t}"));
    }
    out.push_str(",cumulative_regret\n");
    for i in 0..result.aggregate_rewards.len() {
        out.push_str(&format!("{}", i + 1));
        out.push_str(&format!(",{}", result.aggregate_rewards[i]));
        for t in &result.trials {
            out.push_str(&format!(",{}", t.trace.steps()[i].reward));
        }
        out.push_str(&format!(",{}\n", result.aggregate_regret.cumulative[i]));
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[derive(Serialize)]
struct TrialSummary {
    seed: u64,
    total_reward: f64,
    final_window_average: f64,
    final_policy_gain: f64,
    final_regret: f64,
}

#[derive(Serialize)]
struct ExperimentSummary<'a> {
    config: &'a ExperimentConfig,
    gain_star: f64,
    span_star: f64,
    total_steps: usize,
    smoothing_window: usize,
    trials: Vec<TrialSummary>,
    mean_final_window_average: f64,
    mean_final_regret: f64,
}

/// Writes the per-experiment JSON summary.
pub fn emit_summary_json(result: &ExperimentResult, path: &Path) -> Result<()> {
    let window = result.config.smoothing_window * 2;
    let trials: Vec<TrialSummary> = result
        .trials
        .iter()
        .map(|t| TrialSummary {
            seed: t.seed,
            total_reward: t.trace.total_reward(),
            final_window_average: t.trace.final_window_average(window),
            final_policy_gain: t.final_policy_gain,
            final_regret: t.regret.final_regret(),
        })
        .collect();
    let mean_final_window_average =
        trials.iter().map(|t| t.final_window_average).sum::<f64>() / trials.len() as f64;
    let mean_final_regret =
        trials.iter().map(|t| t.final_regret).sum::<f64>() / trials.len() as f64;
    let summary = ExperimentSummary {
        config: &result.config,
        gain_star: result.gain_star,
        span_star: result.span_star,
        total_steps: result.config.total_steps(),
        smoothing_window: result.config.smoothing_window,
        trials,
        mean_final_window_average,
        mean_final_regret,
    };
    std::fs::write(path, serde_json::to_string_pretty(&summary)?)?;
    Ok(())
}

/// A labeled curve for the SVG plot.
#[derive(Debug, Clone)]
pub struct SvgSeries {
    pub label: String,
    pub values: Vec<f64>,
}

fn svg_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

const SVG_PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

/// Writes a line chart (one series per setting) as a standalone SVG file.
pub fn emit_svg(series: &[SvgSeries], title: &str, path: &Path) -> Result<()> {
    if series.is_empty() || series.iter().all(|s| s.values.is_empty()) {
        return Err(Error::EmptyInput("svg series"));
    }
    let (width, height) = (800.0, 480.0);
    let (ml, mr, mt, mb) = (60.0, 160.0, 40.0, 40.0);
    let plot_w = width - ml - mr;
    let plot_h = height - mt - mb;
    let max_len = series.iter().map(|s| s.values.len()).max().unwrap_or(1) as f64;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in series {
        for &v in &s.values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if lo == hi {
        lo -= 1.0;
        hi += 1.0;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let x_of = |i: usize| ml + plot_w * (i as f64 / (max_len - 1.0).max(1.0));
    let y_of = |v: f64| mt + plot_h * (1.0 - (v - lo) / (hi - lo));

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n"
    ));
    svg.push_str(&format!(
        "  <text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n",
        ml + plot_w / 2.0,
        svg_escape(title)
    ));
    svg.push_str(&format!(
        "  <rect x=\"{ml}\" y=\"{mt}\" width=\"{plot_w}\" height=\"{plot_h}\" fill=\"none\" stroke=\"#333\"/>\n"
    ));
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let y = y_of(v);
        svg.push_str(&format!(
            "  <line x1=\"{ml}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"#ddd\"/>\n",
            ml + plot_w
        ));
        svg.push_str(&format!(
            "  <text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{v:.3}</text>\n",
            ml - 6.0,
            y + 4.0
        ));
    }
    svg.push_str(&format!(
        "  <text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">step</text>\n",
        ml + plot_w / 2.0,
        height - 10.0
    ));
    for (si, s) in series.iter().enumerate() {
        let color = SVG_PALETTE[si % SVG_PALETTE.len()];
        let points: Vec<String> = s
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| format!("{:.2},{:.2}", x_of(i), y_of(v)))
            .collect();
        svg.push_str(&format!(
            "  <polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            points.join(" ")
        ));
        let ly = mt + 16.0 * si as f64 + 10.0;
        svg.push_str(&format!(
            "  <line x1=\"{:.2}\" y1=\"{ly:.2}\" x2=\"{:.2}\" y2=\"{ly:.2}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            ml + plot_w + 8.0,
            ml + plot_w + 28.0
        ));
        svg.push_str(&format!(
            "  <text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
            ml + plot_w + 34.0,
            ly + 4.0,
            svg_escape(&s.label)
        ));
    }
    svg.push_str("</svg>\n");
    std::fs::write(path, svg)?;
    Ok(())
}

/// Writes `curve_<label>.csv`, `summary_<label>.json`, and
/// `curve_<label>.svg` into `dir`; returns the paths written.
pub fn write_outputs(result: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let label = result.config.label();
    let csv = dir.join(format!("curve_{label}.csv"));
    emit_csv(result, &csv)?;
    let json = dir.join(format!("summary_{label}.json"));
    emit_summary_json(result, &json)?;
    let svg = dir.join(format!("curve_{label}.svg"));
    emit_svg(
        &[SvgSeries {
            label: label.clone(),
            values: smooth(&result.aggregate_rewards, result.config.smoothing_window),
        }],
        &format!(
            "{label} (smoothed mean reward, window {})",
            result.config.smoothing_window
        ),
        &svg,
    )?;
    Ok(vec![csv, json, svg])
}

/// Writes one trace CSV per trial.
pub fn write_traces(result: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let label = result.config.label();
    let mut paths = Vec::new();
    for t in &result.trials {
        let path = dir.join(format!("trace_{label}_seed{}.csv", t.seed));
        std::fs::write(&path, t.trace.to_csv())?;
        paths.push(path);
    }
    Ok(paths)
}

// ---------------------------------------------------------------------------
// Two-trace analysis
// ---------------------------------------------------------------------------

/// Checkpointed comparison row.
#[derive(Debug, Clone, Serialize)]
pub struct CheckpointRow {
    pub step: usize,
    pub candidate_cumulative_reward: f64,
    pub baseline_cumulative_reward: f64,
    pub candidate_regret: f64,
    pub baseline_regret: f64,
    pub rho_lower: Option<f64>,
    pub rho_upper: Option<f64>,
}

/// Regret-ratio analysis of a candidate trace against a baseline trace, with
/// empirical Bernstein intervals on both accumulated returns. When a
/// source-task trace of the candidate policy is supplied, the transfer gap
/// `d` and the gap condition are evaluated as well.
#[derive(Debug, Clone, Serialize)]
pub struct TraceAnalysis {
    pub horizon: usize,
    pub gain: f64,
    pub delta: f64,
    pub r_max: f64,
    pub candidate_total: f64,
    pub baseline_total: f64,
    pub candidate_interval: BernsteinInterval,
    pub baseline_interval: BernsteinInterval,
    pub rho_hat: Option<f64>,
    pub rho_lower: Option<f64>,
    pub rho_upper: Option<f64>,
    pub negative_transfer: Option<bool>,
    pub transfer_gap: Option<f64>,
    pub gap_condition_holds: Option<bool>,
    pub checkpoints: Vec<CheckpointRow>,
}

pub fn analyze_traces(
    candidate: &RewardTrace,
    baseline: &RewardTrace,
    candidate_in_source: Option<&RewardTrace>,
    gain: f64,
    delta: f64,
    r_max: f64,
    checkpoint_every: usize,
) -> Result<TraceAnalysis> {
    if candidate.len() != baseline.len() {
        return Err(Error::HorizonMismatch {
            left: candidate.len(),
            right: baseline.len(),
        });
    }
    if let Some(src) = candidate_in_source {
        if src.len() != candidate.len() {
            return Err(Error::HorizonMismatch {
                left: src.len(),
                right: candidate.len(),
            });
        }
    }
    let horizon = candidate.len();
    if horizon < 2 {
        return Err(Error::EmptyInput("trace"));
    }
    let cand_rewards = candidate.rewards();
    let base_rewards = baseline.rewards();
    let cand_curve = cumulative_regret_from_rewards(&cand_rewards, gain);
    let base_curve = cumulative_regret_from_rewards(&base_rewards, gain);

    let every = checkpoint_every.max(1);
    let mut checkpoints = Vec::new();
    let mut cand_cum = 0.0;
    let mut base_cum = 0.0;
    let mut full: Option<(
        BernsteinInterval,
        BernsteinInterval,
        Option<TransferNumbers>,
    )> = None;
    for t in 1..=horizon {
        cand_cum += cand_rewards[t - 1];
        base_cum += base_rewards[t - 1];
        if t % every != 0 && t != horizon {
            continue;
        }
        let bounds = if t >= 2 {
            let ci = empirical_bernstein(&cand_rewards[..t], delta, r_max)?.scaled_to_total(t);
            let bi = empirical_bernstein(&base_rewards[..t], delta, r_max)?.scaled_to_total(t);
            let gap = candidate_in_source
                .map(|src| src.steps()[..t].iter().map(|s| s.reward).sum::<f64>() - cand_cum)
                .unwrap_or(0.0);
            let numbers = negative_transfer_check(gain, t, gap, cand_cum + gap, base_cum, &ci, &bi)
                .ok()
                .map(|rep| TransferNumbers {
                    rho_hat: rep.rho_hat,
                    rho_lower: rep.rho_lower,
                    rho_upper: rep.rho_upper,
                    negative_transfer: rep.negative_transfer,
                    gap: rep.gap,
                    gap_condition_holds: rep.gap_condition_holds,
                });
            if t == horizon {
                full = Some((ci, bi, numbers.clone()));
            }
            numbers
        } else {
            None
        };
        checkpoints.push(CheckpointRow {
            step: t,
            candidate_cumulative_reward: cand_cum,
            baseline_cumulative_reward: base_cum,
            candidate_regret: cand_curve.cumulative[t - 1],
            baseline_regret: base_curve.cumulative[t - 1],
            rho_lower: bounds.as_ref().map(|b| b.rho_lower),
            rho_upper: bounds.as_ref().map(|b| b.rho_upper),
        });
    }

    let (candidate_interval, baseline_interval, numbers) =
        full.ok_or(Error::EmptyInput("trace"))?;
    let rho_point =
        match crate::analysis::regret_ratio_from_returns(gain, horizon, cand_cum, base_cum) {
            RegretRatio::Ratio(r) => Some(r),
            RegretRatio::BaselineOptimal => None,
        };
    Ok(TraceAnalysis {
        horizon,
        gain,
        delta,
        r_max,
        candidate_total: cand_cum,
        baseline_total: base_cum,
        candidate_interval,
        baseline_interval,
        rho_hat: numbers.as_ref().map(|n| n.rho_hat).or(rho_point),
        rho_lower: numbers.as_ref().map(|n| n.rho_lower),
        rho_upper: numbers.as_ref().map(|n| n.rho_upper),
        negative_transfer: numbers.as_ref().map(|n| n.negative_transfer),
        transfer_gap: candidate_in_source
            .is_some()
            .then(|| numbers.as_ref().map(|n| n.gap))
            .flatten(),
        gap_condition_holds: candidate_in_source
            .is_some()
            .then(|| numbers.as_ref().map(|n| n.gap_condition_holds))
            .flatten(),
        checkpoints,
    })
}

#[derive(Debug, Clone)]
struct TransferNumbers {
    rho_hat: f64,
    rho_lower: f64,
    rho_upper: f64,
    negative_transfer: bool,
    gap: f64,
    gap_condition_holds: bool,
}

/// Writes the checkpoint table of an analysis as CSV.
pub fn write_analysis_csv(analysis: &TraceAnalysis, path: &Path) -> Result<()> {
    let mut out = String::from(
        "step,candidate_cumulative_reward,baseline_cumulative_reward,candidate_regret,baseline_regret,rho_lower,rho_upper\n",
    );
    for row in &analysis.checkpoints {
        let fmt_opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.step,
            row.candidate_cumulative_reward,
            row.baseline_cumulative_reward,
            row.candidate_regret,
            row.baseline_regret,
            fmt_opt(row.rho_lower),
            fmt_opt(row.rho_upper),
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_analysis_json(analysis: &TraceAnalysis, path: &Path) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(analysis)?)?;
    Ok(())
}
