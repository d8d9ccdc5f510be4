//! Teacher policies with budgets, grand-teacher construction (online and
//! offline majority-vote ensembles), the mixed-policy advice loop, and the
//! best-teacher selection baseline.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{FiredBy, RewardTrace};
use crate::error::{Error, Result};
use crate::estimation::TransitionCounts;
use crate::mdp::{
    relative_value_iteration, DeterministicPolicy, StepRecord, TabularMdp, DEFAULT_MAX_ITERS,
    DEFAULT_TOL,
};
use crate::regal::{regal_c, RegalParams};

/// A teacher: a fixed advice policy plus a query budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeacherPolicy {
    policy: DeterministicPolicy,
    budget: u64,
    spent: u64,
}

impl TeacherPolicy {
    pub fn new(policy: DeterministicPolicy, budget: u64) -> Self {
        Self {
            policy,
            budget,
            spent: 0,
        }
    }

    /// Answers one advice query, or abstains once the budget is spent.
    pub fn advise(&mut self, s: usize) -> Option<usize> {
        if self.spent >= self.budget {
            return None;
        }
        self.spent += 1;
        Some(self.policy.action(s))
    }

    pub fn policy(&self) -> &DeterministicPolicy {
        &self.policy
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn spent(&self) -> u64 {
        self.spent
    }
}

/// The m-teacher advice model: a non-empty set of teachers with budgets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdviceModel {
    teachers: Vec<TeacherPolicy>,
}

impl AdviceModel {
    pub fn new(teachers: Vec<TeacherPolicy>) -> Result<Self> {
        if teachers.is_empty() {
            return Err(Error::EmptyInput("teacher set"));
        }
        Ok(Self { teachers })
    }

    pub fn len(&self) -> usize {
        self.teachers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.teachers.is_empty()
    }

    pub fn teachers(&self) -> &[TeacherPolicy] {
        &self.teachers
    }
}

/// Most frequent action; ties break to the lowest action index.
pub fn majority_vote(advices: &[usize]) -> Result<usize> {
    if advices.is_empty() {
        return Err(Error::EmptyInput("advice list"));
    }
    let mut counts: std::collections::BTreeMap<usize, usize> = Default::default();
    for &a in advices {
        *counts.entry(a).or_insert(0) += 1;
    }
    let mut best = (usize::MAX, 0usize);
    for (&action, &count) in &counts {
        if count > best.1 {
            best = (action, count);
        }
    }
    Ok(best.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Construction {
    Online,
    Offline,
}

/// Majority-vote meta-policy over the teacher set.
///
/// Online construction is lazy: the first advice query for a state polls
/// every teacher (spending budget) and caches the vote; later queries hit
/// the cache for free. Offline construction fills the cache for every state
/// up front by exploring the MDP. Budget-exhausted teachers abstain from
/// votes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrandTeacher {
    construction: Construction,
    cache: Vec<Option<usize>>,
    model: AdviceModel,
}

impl GrandTeacher {
    pub fn online(model: AdviceModel, num_states: usize) -> Self {
        Self {
            construction: Construction::Online,
            cache: vec![None; num_states],
            model,
        }
    }

    pub fn construction(&self) -> Construction {
        self.construction
    }

    /// Majority advice for `s`, polling teachers on first visit. `None` when
    /// every teacher abstained (budgets exhausted before `s` was seen).
    pub fn advise(&mut self, s: usize) -> Option<usize> {
        if let Some(a) = self.cache[s] {
            return Some(a);
        }
        let votes: Vec<usize> = self
            .model
            .teachers
            .iter_mut()
            .filter_map(|t| t.advise(s))
            .collect();
        let action = majority_vote(&votes).ok()?;
        self.cache[s] = Some(action);
        Some(action)
    }

    pub fn cached(&self, s: usize) -> Option<usize> {
        self.cache[s]
    }

    /// The complete meta-policy; errors while some state is still unadvised.
    pub fn policy(&self) -> Result<DeterministicPolicy> {
        let actions: Option<Vec<usize>> = self.cache.iter().copied().collect();
        match actions {
            Some(actions) => Ok(DeterministicPolicy::from_vec_unchecked(actions)),
            None => Err(Error::Config(
                "grand teacher cache incomplete (unvisited or budget-starved states)".into(),
            )),
        }
    }

    pub fn queries_used(&self) -> Vec<u64> {
        self.model.teachers.iter().map(|t| t.spent()).collect()
    }

    pub fn model(&self) -> &AdviceModel {
        &self.model
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("grand teacher serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Step cap factor for offline construction: `1e6 * |S|` steps.
const OFFLINE_STEP_CAP_PER_STATE: u64 = 1_000_000;

/// Offline meta-teacher construction: explore with uniform-random actions
/// until every state has been visited, querying all teachers exactly once
/// per newly visited state. Returns the constructed teacher and the number
/// of environment steps taken.
pub fn build_grand_teacher_offline<R: Rng>(
    mdp: &TabularMdp,
    model: AdviceModel,
    rng: &mut R,
) -> Result<(GrandTeacher, u64)> {
    let n = mdp.num_states();
    let mut gt = GrandTeacher {
        construction: Construction::Offline,
        cache: vec![None; n],
        model,
    };
    let mut visited = vec![false; n];
    let mut unvisited = n;
    let mut s = mdp.start_state();
    visited[s] = true;
    unvisited -= 1;
    gt.advise(s);
    let cap = OFFLINE_STEP_CAP_PER_STATE * n as u64;
    let mut steps = 0u64;
    while unvisited > 0 {
        if steps >= cap {
            return Err(Error::StepCapExceeded { cap, unvisited });
        }
        let a = rng.gen_range(0..mdp.num_actions(s));
        let (s2, _) = mdp.step(s, a, rng)?;
        steps += 1;
        s = s2;
        if !visited[s] {
            visited[s] = true;
            unvisited -= 1;
            gt.advise(s);
        }
    }
    Ok((gt, steps))
}

fn one_step_values(mdp: &TabularMdp, bias: &[f64], s: usize) -> Vec<f64> {
    (0..mdp.num_actions(s))
        .map(|a| {
            mdp.reward(s, a)
                + mdp
                    .row(s, a)
                    .iter()
                    .map(|&(s2, p)| p * bias[s2])
                    .sum::<f64>()
        })
        .collect()
}

/// Teacher that is greedy with respect to the optimal bias (ties to the
/// lowest action index). Budget defaults to `|S|`.
pub fn make_optimal_teacher(mdp: &TabularMdp) -> Result<TeacherPolicy> {
    let (gb, _) = relative_value_iteration(mdp, DEFAULT_TOL, DEFAULT_MAX_ITERS)?;
    let actions = (0..mdp.num_states())
        .map(|s| {
            let q = one_step_values(mdp, &gb.bias, s);
            argmax_lowest(&q)
        })
        .collect();
    Ok(TeacherPolicy::new(
        DeterministicPolicy::from_vec_unchecked(actions),
        mdp.num_states() as u64,
    ))
}

/// Teacher advising the lowest-valued action everywhere.
pub fn make_worst_teacher(mdp: &TabularMdp) -> Result<TeacherPolicy> {
    let (gb, _) = relative_value_iteration(mdp, DEFAULT_TOL, DEFAULT_MAX_ITERS)?;
    let actions = (0..mdp.num_states())
        .map(|s| {
            let q = one_step_values(mdp, &gb.bias, s);
            argmin_lowest(&q)
        })
        .collect();
    Ok(TeacherPolicy::new(
        DeterministicPolicy::from_vec_unchecked(actions),
        mdp.num_states() as u64,
    ))
}

/// Teacher with a uniformly drawn action per state, fixed at construction.
pub fn make_random_teacher<R: Rng>(mdp: &TabularMdp, rng: &mut R) -> TeacherPolicy {
    TeacherPolicy::new(
        DeterministicPolicy::uniform_random(mdp, rng),
        mdp.num_states() as u64,
    )
}

fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn argmin_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// Per-iteration mixing weights `beta_i`, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixSchedule {
    betas: Vec<f64>,
}

impl MixSchedule {
    pub fn new(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::EmptyInput("mixing schedule"));
        }
        for &b in &betas {
            if !(0.0..=1.0).contains(&b) {
                return Err(Error::InvalidParameter {
                    name: "beta",
                    value: b,
                });
            }
        }
        Ok(Self { betas })
    }

    /// `beta_i = base^i` for `i = 1..=m`.
    pub fn exponential(base: f64, m: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&base) {
            return Err(Error::InvalidParameter {
                name: "beta base",
                value: base,
            });
        }
        Self::new((1..=m).map(|i| base.powi(i as i32)).collect())
    }

    pub fn constant(beta: f64, m: usize) -> Result<Self> {
        Self::new(vec![beta; m])
    }

    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }

    pub fn beta(&self, iteration: usize) -> f64 {
        self.betas[iteration]
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    /// `max_i (1 - beta_i)`, the coefficient entering the regret envelope.
    pub fn one_minus_beta(&self) -> f64 {
        self.betas.iter().map(|b| 1.0 - b).fold(0.0, f64::max)
    }
}

/// Per-step Bernoulli mixing: the teacher's action with probability `beta`,
/// the student's otherwise. The degenerate weights 0 and 1 consume no
/// randomness, so a zero schedule replays identically to a run with no
/// teacher at all.
pub fn mixed_choice<R: Rng>(
    beta: f64,
    teacher_action: usize,
    student_action: usize,
    rng: &mut R,
) -> Result<(usize, FiredBy)> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::InvalidParameter {
            name: "beta",
            value: beta,
        });
    }
    let teacher_fires = if beta <= 0.0 {
        false
    } else if beta >= 1.0 {
        true
    } else {
        rng.gen::<f64>() < beta
    };
    Ok(if teacher_fires {
        (teacher_action, FiredBy::Teacher)
    } else {
        (student_action, FiredBy::Student)
    })
}

pub fn mixed_action<R: Rng>(
    beta: f64,
    teacher_action: usize,
    student_action: usize,
    rng: &mut R,
) -> Result<usize> {
    mixed_choice(beta, teacher_action, student_action, rng).map(|(a, _)| a)
}

/// Output of the advice learning loop.
#[derive(Debug, Clone)]
pub struct AdviceRun {
    /// The last planned student policy.
    pub final_policy: DeterministicPolicy,
    pub trace: RewardTrace,
    pub counts: TransitionCounts,
    /// The policy planned after each iteration (the last one is the final
    /// policy).
    pub iteration_policies: Vec<DeterministicPolicy>,
}

/// The advice learning loop: per iteration, execute the per-step mixture of
/// the grand-teacher and the current student policy for `steps_per_iter`
/// steps, then replan the student from all data collected so far.
///
/// The initial student policy (an arbitrary input of the loop) is the
/// uniform-random exploration policy, the same choice the offline
/// grand-teacher construction uses: student-fired steps of the first
/// iteration draw a uniformly random action. From the second iteration on
/// the student plays the planned policies. The returned final policy is the
/// last planned one.
///
/// The number of iterations is the schedule length. With no grand teacher
/// (or a zero schedule) this is plain no-advice learning.
pub fn multi_teacher_advice<R: Rng>(
    mdp: &TabularMdp,
    mut grand_teacher: Option<&mut GrandTeacher>,
    schedule: &MixSchedule,
    steps_per_iter: usize,
    params: &RegalParams,
    rng: &mut R,
) -> Result<AdviceRun> {
    if steps_per_iter == 0 {
        return Err(Error::InvalidParameter {
            name: "steps_per_iter",
            value: 0.0,
        });
    }
    let mut counts = TransitionCounts::for_mdp(mdp);
    let mut student: Option<DeterministicPolicy> = None;
    let mut iteration_policies = Vec::with_capacity(schedule.len());
    let mut trace = RewardTrace::new();
    let mut s = mdp.start_state();
    let mut total_t: u64 = 0;

    for i in 0..schedule.len() {
        let beta = schedule.beta(i);
        trace.begin_iteration();
        let mut dataset = Vec::with_capacity(steps_per_iter);
        for _ in 0..steps_per_iter {
            let advice = if beta > 0.0 {
                grand_teacher.as_mut().and_then(|gt| gt.advise(s))
            } else {
                None
            };
            let teacher_fires = match advice {
                Some(_) if beta >= 1.0 => true,
                Some(_) if beta > 0.0 => rng.gen::<f64>() < beta,
                _ => false,
            };
            let (a, fired_by) = if teacher_fires {
                (advice.expect("advice present"), FiredBy::Teacher)
            } else {
                let a = match &student {
                    Some(pi) => pi.action(s),
                    None => rng.gen_range(0..mdp.num_actions(s)),
                };
                (a, FiredBy::Student)
            };
            let (s2, r) = mdp.step(s, a, rng)?;
            let record = StepRecord {
                state: s,
                action: a,
                next_state: s2,
                reward: r,
            };
            dataset.push(record);
            trace.push(record, fired_by);
            s = s2;
        }
        total_t += steps_per_iter as u64;
        let planned = regal_c(&dataset, &mut counts, mdp.rewards(), total_t, params)?;
        iteration_policies.push(planned.clone());
        student = Some(planned);
    }

    Ok(AdviceRun {
        final_policy: student.expect("at least one iteration"),
        trace,
        counts,
        iteration_policies,
    })
}

/// Output of the best-teacher selection baseline.
#[derive(Debug, Clone)]
pub struct BaselineRun {
    pub policy: DeterministicPolicy,
    pub chosen_index: usize,
    pub per_teacher_mean: Vec<f64>,
    /// Concatenated evaluation rollouts, one iteration per teacher.
    pub trace: RewardTrace,
}

/// Simplified best-teacher selection: roll out each teacher from the start
/// state for `eval_steps` steps and return the one with the highest
/// empirical average reward (ties to the lowest teacher index). Never
/// improves on the teacher set.
pub fn best_teacher_baseline<R: Rng>(
    mdp: &TabularMdp,
    model: &AdviceModel,
    eval_steps: usize,
    rng: &mut R,
) -> Result<BaselineRun> {
    if eval_steps == 0 {
        return Err(Error::InvalidParameter {
            name: "eval_steps",
            value: 0.0,
        });
    }
    let mut trace = RewardTrace::new();
    let mut per_teacher_mean = Vec::with_capacity(model.len());
    for teacher in model.teachers() {
        trace.begin_iteration();
        let mut s = mdp.start_state();
        let mut sum = 0.0;
        for _ in 0..eval_steps {
            let a = teacher.policy().action(s);
            let (s2, r) = mdp.step(s, a, rng)?;
            trace.push(
                StepRecord {
                    state: s,
                    action: a,
                    next_state: s2,
                    reward: r,
                },
                FiredBy::Teacher,
            );
            sum += r;
            s = s2;
        }
        per_teacher_mean.push(sum / eval_steps as f64);
    }
    let mut chosen = 0;
    for (i, &m) in per_teacher_mean.iter().enumerate().skip(1) {
        if m > per_teacher_mean[chosen] {
            chosen = i;
        }
    }
    Ok(BaselineRun {
        policy: model.teachers()[chosen].policy().clone(),
        chosen_index: chosen,
        per_teacher_mean,
        trace,
    })
}
