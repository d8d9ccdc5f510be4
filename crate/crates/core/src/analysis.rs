//! Regret accounting, regret-ratio and negative-transfer estimation with
//! empirical Bernstein intervals, one-way diameter, and the sample-complexity
//! / regret-bound validation statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::TransitionCounts;
use crate::mdp::{StepRecord, TabularMdp};

/// Which policy produced an executed step of a mixed rollout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FiredBy {
    Student,
    Teacher,
}

/// One executed step with its attribution flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub state: usize,
    pub action: usize,
    pub next_state: usize,
    pub reward: f64,
    pub fired_by: FiredBy,
}

impl TraceStep {
    pub fn record(&self) -> StepRecord {
        StepRecord {
            state: self.state,
            action: self.action,
            next_state: self.next_state,
            reward: self.reward,
        }
    }
}

/// Per-step reward log with iteration boundaries and fired-by flags.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardTrace {
    steps: Vec<TraceStep>,
    /// Start offset of each iteration, ascending.
    iteration_starts: Vec<usize>,
}

impl RewardTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn begin_iteration(&mut self) {
        self.iteration_starts.push(self.steps.len());
    }

    pub fn push(&mut self, record: StepRecord, fired_by: FiredBy) {
        if self.iteration_starts.is_empty() {
            self.iteration_starts.push(0);
        }
        self.steps.push(TraceStep {
            state: record.state,
            action: record.action,
            next_state: record.next_state,
            reward: record.reward,
            fired_by,
        });
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn steps(&self) -> &[TraceStep] {
        &self.steps
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.reward).collect()
    }

    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    pub fn num_iterations(&self) -> usize {
        self.iteration_starts.len()
    }

    pub fn iteration_range(&self, i: usize) -> Result<std::ops::Range<usize>> {
        if i >= self.iteration_starts.len() {
            return Err(Error::IndexOutOfRange {
                what: "iteration",
                index: i,
                limit: self.iteration_starts.len(),
            });
        }
        let start = self.iteration_starts[i];
        let end = self
            .iteration_starts
            .get(i + 1)
            .copied()
            .unwrap_or(self.steps.len());
        Ok(start..end)
    }

    pub fn iteration_steps(&self, i: usize) -> Result<&[TraceStep]> {
        Ok(&self.steps[self.iteration_range(i)?])
    }

    /// Mean reward over the trailing `window` steps (whole trace if shorter).
    pub fn final_window_average(&self, window: usize) -> f64 {
        if self.steps.is_empty() {
            return 0.0;
        }
        let start = self.steps.len().saturating_sub(window);
        let tail = &self.steps[start..];
        tail.iter().map(|s| s.reward).sum::<f64>() / tail.len() as f64
    }

    const CSV_HEADER: &'static str = "step,iteration,state,action,next_state,reward,fired_by";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        let mut iter = 0usize;
        for (i, step) in self.steps.iter().enumerate() {
            while iter + 1 < self.iteration_starts.len() && self.iteration_starts[iter + 1] <= i {
                iter += 1;
            }
            let fired = match step.fired_by {
                FiredBy::Student => "student",
                FiredBy::Teacher => "teacher",
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                i, iter, step.state, step.action, step.next_state, step.reward, fired
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == Self::CSV_HEADER => {}
            _ => return Err(Error::Config("trace CSV header mismatch".into())),
        }
        let mut trace = Self::new();
        let mut last_iter: Option<usize> = None;
        for (lineno, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 7 {
                return Err(Error::Config(format!(
                    "trace CSV line {}: expected 7 fields, got {}",
                    lineno + 2,
                    fields.len()
                )));
            }
            let parse_usize = |f: &str, what: &str| {
                f.trim().parse::<usize>().map_err(|_| {
                    Error::Config(format!("trace CSV line {}: bad {what}", lineno + 2))
                })
            };
            let iteration = parse_usize(fields[1], "iteration")?;
            let state = parse_usize(fields[2], "state")?;
            let action = parse_usize(fields[3], "action")?;
            let next_state = parse_usize(fields[4], "next_state")?;
            let reward: f64 = fields[5]
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("trace CSV line {}: bad reward", lineno + 2)))?;
            let fired_by = match fields[6].trim() {
                "student" => FiredBy::Student,
                "teacher" => FiredBy::Teacher,
                other => {
                    return Err(Error::Config(format!(
                        "trace CSV line {}: bad fired_by {other:?}",
                        lineno + 2
                    )))
                }
            };
            if last_iter != Some(iteration) {
                trace.begin_iteration();
                last_iter = Some(iteration);
            }
            trace.push(
                StepRecord {
                    state,
                    action,
                    next_state,
                    reward,
                },
                fired_by,
            );
        }
        Ok(trace)
    }
}

/// Cumulative regret curve: `regret[t] = gain * (t+1) - sum of the first
/// `t+1` rewards`, an exact bookkeeping identity over the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretCurve {
    pub gain: f64,
    pub cumulative: Vec<f64>,
}

impl RegretCurve {
    pub fn final_regret(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }
}

pub fn cumulative_regret(trace: &RewardTrace, gain: f64) -> RegretCurve {
    cumulative_regret_from_rewards(&trace.rewards(), gain)
}

pub fn cumulative_regret_from_rewards(rewards: &[f64], gain: f64) -> RegretCurve {
    let mut cumulative = Vec::with_capacity(rewards.len());
    let mut sum = 0.0;
    for (t, r) in rewards.iter().enumerate() {
        sum += r;
        cumulative.push(gain * (t + 1) as f64 - sum);
    }
    RegretCurve { gain, cumulative }
}

/// Regret ratio of two reward logs against a common gain, or the
/// distinguished outcome when the baseline has no regret to compare against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegretRatio {
    Ratio(f64),
    BaselineOptimal,
}

impl RegretRatio {
    pub fn value(self) -> Option<f64> {
        match self {
            RegretRatio::Ratio(r) => Some(r),
            RegretRatio::BaselineOptimal => None,
        }
    }
}

/// `rho(pi1, pi2, T) = (gain*T - R1) / (gain*T - R2)` over the first `t`
/// steps of each trace.
pub fn regret_ratio(
    trace1: &RewardTrace,
    trace2: &RewardTrace,
    gain: f64,
    t: usize,
) -> Result<RegretRatio> {
    if trace1.len() < t {
        return Err(Error::HorizonMismatch {
            left: trace1.len(),
            right: t,
        });
    }
    if trace2.len() < t {
        return Err(Error::HorizonMismatch {
            left: trace2.len(),
            right: t,
        });
    }
    let r1: f64 = trace1.steps()[..t].iter().map(|s| s.reward).sum();
    let r2: f64 = trace2.steps()[..t].iter().map(|s| s.reward).sum();
    Ok(regret_ratio_from_returns(gain, t, r1, r2))
}

/// Ratio from accumulated returns (e.g. oracle `gain_of_policy * T`).
pub fn regret_ratio_from_returns(gain: f64, t: usize, return1: f64, return2: f64) -> RegretRatio {
    let lt = gain * t as f64;
    let den = lt - return2;
    if den.abs() <= 1e-9 * lt.abs().max(1.0) {
        RegretRatio::BaselineOptimal
    } else {
        RegretRatio::Ratio((lt - return1) / den)
    }
}

// ---------------------------------------------------------------------------
// Empirical Bernstein intervals
// ---------------------------------------------------------------------------

/// Two-sided empirical Bernstein interval around a sample mean:
/// `eps = sigma_bar * sqrt(2 ln(3/delta) / n) + 6 r_max ln(3/delta) / n`
/// with the biased sample standard deviation `sigma_bar`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BernsteinInterval {
    pub center: f64,
    pub half_width: f64,
    pub n: usize,
    pub delta: f64,
    pub r_max: f64,
    pub sigma_bar: f64,
}

impl BernsteinInterval {
    pub fn low(&self) -> f64 {
        self.center - self.half_width
    }

    pub fn high(&self) -> f64 {
        self.center + self.half_width
    }

    pub fn contains(&self, x: f64) -> bool {
        self.low() <= x && x <= self.high()
    }

    /// The same interval scaled from means to `horizon`-step totals.
    pub fn scaled_to_total(&self, horizon: usize) -> BernsteinInterval {
        BernsteinInterval {
            center: self.center * horizon as f64,
            half_width: self.half_width * horizon as f64,
            ..*self
        }
    }
}

pub fn empirical_bernstein(samples: &[f64], delta: f64, r_max: f64) -> Result<BernsteinInterval> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::InvalidParameter {
            name: "sample count",
            value: n as f64,
        });
    }
    if !(0.0 < delta && delta < 1.0) {
        return Err(Error::InvalidParameter {
            name: "delta",
            value: delta,
        });
    }
    let max_abs = samples.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if r_max < max_abs {
        return Err(Error::InvalidParameter {
            name: "r_max (below max |sample|)",
            value: r_max,
        });
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / nf;
    let sigma_bar = var.sqrt();
    let log_term = (3.0 / delta).ln();
    let half_width = sigma_bar * (2.0 * log_term / nf).sqrt() + 6.0 * r_max * log_term / nf;
    Ok(BernsteinInterval {
        center: mean,
        half_width,
        n,
        delta,
        r_max,
        sigma_bar,
    })
}

// ---------------------------------------------------------------------------
// Transfer gap and negative transfer
// ---------------------------------------------------------------------------

/// An accumulated-reward estimate over a fixed horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnEstimate {
    pub total_reward: f64,
    pub horizon: usize,
}

/// `d_t^s(pi_s)`: the source policy's accumulated reward in the source task
/// minus its accumulated reward in the target task, over equal horizons.
pub fn transfer_gap(source: &ReturnEstimate, target: &ReturnEstimate) -> Result<f64> {
    if source.horizon != target.horizon {
        return Err(Error::HorizonMismatch {
            left: source.horizon,
            right: target.horizon,
        });
    }
    Ok(source.total_reward - target.total_reward)
}

/// Outcome of the negative-transfer condition check.
///
/// `negative_transfer` holds iff the interval-based lower bound on the
/// estimated regret ratio exceeds 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub rho_hat: f64,
    /// The source-vs-target gap `d_t^s` the report was computed from.
    pub gap: f64,
    pub rho_lower: f64,
    pub rho_upper: f64,
    pub negative_transfer: bool,
    /// Whether the gap exceeds the expected-return difference between the
    /// source policy at home and the target baseline at home.
    pub gap_condition_holds: bool,
}

/// Sandwiches the estimated regret ratio
/// `rho_hat = (gain*T + d - R_s) / (gain*T - R_t)` between the bounds
/// obtained by replacing the return estimates with their Bernstein interval
/// endpoints (source upper/lower in the numerator, target lower/upper in the
/// denominator).
pub fn negative_transfer_check(
    gain: f64,
    horizon: usize,
    gap: f64,
    source_expected_total: f64,
    target_expected_total: f64,
    source_interval: &BernsteinInterval,
    target_interval: &BernsteinInterval,
) -> Result<TransferReport> {
    let lt = gain * horizon as f64;
    let scale = lt.abs().max(1.0);
    let eps = 1e-9 * scale;
    let den_wide = lt - target_interval.low();
    let den_narrow = lt - target_interval.high();
    let den_center = lt - target_interval.center;
    // When even the largest denominator vanishes, the baseline shows no
    // regret anywhere in its interval and no ratio is defined.
    if den_wide <= eps {
        return Err(Error::DegenerateBaseline {
            denominator: den_wide,
        });
    }
    let rho_lower = (lt + gap - source_interval.high()) / den_wide;
    // The smallest denominator can cross zero when the baseline interval
    // reaches the optimal return; the ratio is then unbounded from above.
    let rho_upper = if den_narrow <= eps {
        f64::INFINITY
    } else {
        (lt + gap - source_interval.low()) / den_narrow
    };
    let rho_hat = if den_center <= eps {
        f64::INFINITY
    } else {
        (lt + gap - source_interval.center) / den_center
    };
    Ok(TransferReport {
        rho_hat,
        gap,
        rho_lower,
        rho_upper,
        negative_transfer: rho_lower > 1.0,
        gap_condition_holds: gap > source_expected_total - target_expected_total,
    })
}

// ---------------------------------------------------------------------------
// One-way diameter
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OneWayDiameter {
    Finite(f64),
    /// The bias-maximizing state is unreachable from some start.
    Infinite,
}

impl OneWayDiameter {
    pub fn finite(self) -> Option<f64> {
        match self {
            OneWayDiameter::Finite(x) => Some(x),
            OneWayDiameter::Infinite => None,
        }
    }
}

/// Worst-case (over start states) minimal expected hitting time to the
/// bias-maximizing state, via stochastic-shortest-path value iteration.
/// Ties in the bias argmax break to the lowest state index.
pub fn one_way_diameter(mdp: &TabularMdp, bias: &[f64]) -> Result<OneWayDiameter> {
    let n = mdp.num_states();
    if bias.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "bias has {} entries for {} states",
            bias.len(),
            n
        )));
    }
    if n == 0 {
        return Err(Error::EmptyInput("state set"));
    }
    let mut target = 0usize;
    for (s, &b) in bias.iter().enumerate() {
        if b > bias[target] {
            target = s;
        }
    }

    // Reverse reachability: states that can reach the target at all.
    let mut radj = vec![Vec::new(); n];
    for s in 0..n {
        for a in 0..mdp.num_actions(s) {
            for &(s2, p) in mdp.row(s, a) {
                if p > 0.0 {
                    radj[s2].push(s);
                }
            }
        }
    }
    let mut reach = vec![false; n];
    reach[target] = true;
    let mut stack = vec![target];
    while let Some(s) = stack.pop() {
        for &p in &radj[s] {
            if !reach[p] {
                reach[p] = true;
                stack.push(p);
            }
        }
    }
    if reach.iter().any(|&r| !r) {
        return Ok(OneWayDiameter::Infinite);
    }

    let mut h = vec![0.0_f64; n];
    let mut next = vec![0.0_f64; n];
    let tol = 1e-10;
    for _ in 0..1_000_000 {
        let mut change: f64 = 0.0;
        for s in 0..n {
            if s == target {
                next[s] = 0.0;
                continue;
            }
            let mut best = f64::INFINITY;
            for a in 0..mdp.num_actions(s) {
                let mut exp = 1.0;
                for &(s2, p) in mdp.row(s, a) {
                    if s2 != target {
                        exp += p * h[s2];
                    }
                }
                best = best.min(exp);
            }
            change = change.max((best - h[s]).abs());
            next[s] = best;
        }
        std::mem::swap(&mut h, &mut next);
        if change < tol {
            let max = h.iter().cloned().fold(0.0, f64::max);
            return Ok(OneWayDiameter::Finite(max));
        }
    }
    Err(Error::NonConvergence {
        iters: 1_000_000,
        residual: f64::NAN,
    })
}

// ---------------------------------------------------------------------------
// Regret bound envelope
// ---------------------------------------------------------------------------

/// Evaluates the regret-bound shape
/// `(1 - beta + rho*beta) * H * |S| * sqrt(|A| T log(|A| T / delta))`
/// with the unknown big-O constant taken as 1, for plotting measured regret
/// against the theoretical envelope. `one_minus_beta` is
/// `max_i (1 - beta_i)`.
pub fn regret_bound_envelope(
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    span_ceiling: f64,
    delta: f64,
    one_minus_beta: f64,
    rho: f64,
) -> f64 {
    let at = num_actions as f64 * horizon as f64;
    let coeff = one_minus_beta + rho * (1.0 - one_minus_beta);
    coeff * span_ceiling * num_states as f64 * (at * (at / delta).ln()).sqrt()
}

// ---------------------------------------------------------------------------
// Regret decomposition bookkeeping
// ---------------------------------------------------------------------------

/// Per-iteration regret split by the fired-by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRegret {
    pub iteration: usize,
    pub total: f64,
    pub student: f64,
    pub teacher: f64,
    pub student_steps: usize,
    pub teacher_steps: usize,
}

/// Splits each iteration's regret `sum (gain - r_t)` into the student-fired
/// and teacher-fired parts. The two parts sum to the iteration total exactly
/// (up to float reordering).
pub fn regret_decomposition(trace: &RewardTrace, gain: f64) -> Vec<IterationRegret> {
    (0..trace.num_iterations())
        .map(|i| {
            let steps = trace.iteration_steps(i).expect("iteration in range");
            let mut out = IterationRegret {
                iteration: i,
                total: 0.0,
                student: 0.0,
                teacher: 0.0,
                student_steps: 0,
                teacher_steps: 0,
            };
            for st in steps {
                let r = gain - st.reward;
                out.total += r;
                match st.fired_by {
                    FiredBy::Student => {
                        out.student += r;
                        out.student_steps += 1;
                    }
                    FiredBy::Teacher => {
                        out.teacher += r;
                        out.teacher_steps += 1;
                    }
                }
            }
            out
        })
        .collect()
}

/// The same per-iteration regret computed from counter deltas:
/// `sum over (s, a) of v_i(s, a) * (gain - R(s, a))`. Cross-checks the trace
/// bookkeeping against the counters.
pub fn iteration_regret_from_counts(
    counts: &TransitionCounts,
    rewards: &[Vec<f64>],
    gain: f64,
    iteration: usize,
) -> Result<f64> {
    let deltas = counts.visit_deltas(iteration)?;
    let mut total = 0.0;
    for (s, row) in deltas.iter().enumerate() {
        for (a, &v) in row.iter().enumerate() {
            if v > 0 {
                total += v as f64 * (gain - rewards[s][a]);
            }
        }
    }
    Ok(total)
}

/// Arithmetic check of the decomposed regret bound on logged quantities.
///
/// Per iteration, with `x_i` the realized student-step fraction and
/// per-step averages `s_i` (student) and `t_i` (teacher), take
/// `D_i = s_i * n_i` (counterfactual all-student regret) and
/// `rho_i = t_i / s_i`; then `x_i D_i` is the realized student part,
/// `rho_i (D_i - x_i D_i)` the realized teacher part, and the bound replaces
/// each `rho_i` by their maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecomposedBoundReport {
    pub lhs: f64,
    pub rhs: f64,
    pub max_rho: f64,
    /// Every iteration with teacher steps also had student steps with
    /// nonnegative average regrets, so the bound is meaningful.
    pub well_defined: bool,
    pub holds: bool,
}

pub fn decomposed_regret_bound(trace: &RewardTrace, gain: f64) -> DecomposedBoundReport {
    let iters = regret_decomposition(trace, gain);
    let mut lhs = 0.0;
    let mut rhs_student_side = 0.0;
    let mut max_rho: f64 = 0.0;
    let mut well_defined = true;
    let mut teacher_parts: Vec<f64> = Vec::new();
    for it in &iters {
        lhs += it.total;
        rhs_student_side += it.student;
        if it.teacher_steps == 0 {
            continue;
        }
        if it.student_steps == 0 {
            well_defined = false;
            continue;
        }
        let s_avg = it.student / it.student_steps as f64;
        let t_avg = it.teacher / it.teacher_steps as f64;
        if s_avg <= 0.0 || t_avg < 0.0 {
            well_defined = false;
            continue;
        }
        let rho_i = t_avg / s_avg;
        max_rho = max_rho.max(rho_i);
        // D_i - x_i D_i = s_avg * teacher_steps.
        teacher_parts.push(s_avg * it.teacher_steps as f64);
    }
    let rhs = max_rho * teacher_parts.iter().sum::<f64>() + rhs_student_side;
    let scale = lhs.abs().max(rhs.abs()).max(1.0);
    DecomposedBoundReport {
        lhs,
        rhs,
        max_rho,
        well_defined,
        holds: well_defined && lhs <= rhs + 1e-9 * scale,
    }
}
