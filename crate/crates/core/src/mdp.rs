//! Tabular average-reward MDPs: representation, validation, simulation, and
//! exact planning via relative value iteration.
//!
//! Transition rows are stored sparsely (sorted `(next_state, probability)`
//! pairs) so that large deterministic domains stay cheap. The JSON envelope
//! supports both dense and sparse row encodings; dense is the canonical form
//! for small MDPs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default convergence tolerance for the iterative solvers.
pub const DEFAULT_TOL: f64 = 1e-9;
/// Default sweep cap for the iterative solvers.
pub const DEFAULT_MAX_ITERS: usize = 1_000_000;

/// Self-loop weight of the aperiodicity transformation applied inside the
/// solvers. Value iteration on `P' = τI + (1-τ)P` with rewards scaled by
/// `(1-τ)` has the same optimal actions and the same bias vector as the
/// original problem, with gain scaled by `(1-τ)`; the self-loops keep
/// periodic chains (e.g. deterministic cycles) from oscillating.
const DAMPING: f64 = 0.5;

/// A sparse transition row: `(next_state, probability)` sorted by state index.
pub type SparseRow = Vec<(usize, f64)>;

/// Finite state/action MDP with a transition kernel and a reward table.
///
/// Action counts may differ per state. Rewards are a function of the
/// state-action pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    num_states: usize,
    start_state: usize,
    /// `transitions[s][a]` is the sparse row for pair `(s, a)`.
    transitions: Vec<Vec<SparseRow>>,
    /// `rewards[s][a]`.
    rewards: Vec<Vec<f64>>,
}

impl TabularMdp {
    /// Builds an MDP from sparse rows. Checks structural validity only
    /// (shapes, index bounds); probability values are checked by
    /// [`validate`], which must be able to report on malformed kernels.
    pub fn new(
        transitions: Vec<Vec<SparseRow>>,
        rewards: Vec<Vec<f64>>,
        start_state: usize,
    ) -> Result<Self> {
        let num_states = transitions.len();
        if num_states == 0 {
            return Err(Error::EmptyInput("state set"));
        }
        if rewards.len() != num_states {
            return Err(Error::ShapeMismatch(format!(
                "rewards has {} states, transitions has {}",
                rewards.len(),
                num_states
            )));
        }
        if start_state >= num_states {
            return Err(Error::IndexOutOfRange {
                what: "start state",
                index: start_state,
                limit: num_states,
            });
        }
        for (s, (rows, rs)) in transitions.iter().zip(rewards.iter()).enumerate() {
            if rows.is_empty() {
                return Err(Error::InvalidMdp(format!("state {s} has no actions")));
            }
            if rows.len() != rs.len() {
                return Err(Error::ShapeMismatch(format!(
                    "state {s}: {} transition rows vs {} rewards",
                    rows.len(),
                    rs.len()
                )));
            }
            for row in rows {
                for &(s2, _) in row {
                    if s2 >= num_states {
                        return Err(Error::IndexOutOfRange {
                            what: "next state",
                            index: s2,
                            limit: num_states,
                        });
                    }
                }
                if !row.windows(2).all(|w| w[0].0 < w[1].0) {
                    return Err(Error::InvalidMdp(format!(
                        "state {s}: transition row not sorted by state index"
                    )));
                }
            }
        }
        Ok(Self {
            num_states,
            start_state,
            transitions,
            rewards,
        })
    }

    /// Builds an MDP from dense `P[s][a][s']` tables. Zero entries are
    /// dropped; everything else (including malformed values) is kept so that
    /// [`validate`] can report on it.
    pub fn from_dense(
        transitions: Vec<Vec<Vec<f64>>>,
        rewards: Vec<Vec<f64>>,
        start_state: usize,
    ) -> Result<Self> {
        let num_states = transitions.len();
        let mut sparse = Vec::with_capacity(num_states);
        for (s, rows) in transitions.into_iter().enumerate() {
            let mut state_rows = Vec::with_capacity(rows.len());
            for row in rows {
                if row.len() != num_states {
                    return Err(Error::ShapeMismatch(format!(
                        "state {s}: dense row has {} entries, expected {}",
                        row.len(),
                        num_states
                    )));
                }
                state_rows.push(
                    row.into_iter()
                        .enumerate()
                        .filter(|&(_, p)| p != 0.0)
                        .collect::<SparseRow>(),
                );
            }
            sparse.push(state_rows);
        }
        Self::new(sparse, rewards, start_state)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn start_state(&self) -> usize {
        self.start_state
    }

    pub fn num_actions(&self, s: usize) -> usize {
        self.transitions[s].len()
    }

    /// Largest action count over all states; the `|A|` used in confidence
    /// radii for variable-action MDPs.
    pub fn max_num_actions(&self) -> usize {
        self.transitions.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn actions_per_state(&self) -> Vec<usize> {
        self.transitions.iter().map(Vec::len).collect()
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[s][a]
    }

    pub fn rewards(&self) -> &[Vec<f64>] {
        &self.rewards
    }

    pub fn row(&self, s: usize, a: usize) -> &SparseRow {
        &self.transitions[s][a]
    }

    /// `max |R(s, a)|` over all pairs.
    pub fn r_max(&self) -> f64 {
        self.rewards
            .iter()
            .flat_map(|rs| rs.iter())
            .fold(0.0_f64, |m, r| m.max(r.abs()))
    }

    fn check_pair(&self, s: usize, a: usize) -> Result<()> {
        if s >= self.num_states {
            return Err(Error::IndexOutOfRange {
                what: "state",
                index: s,
                limit: self.num_states,
            });
        }
        if a >= self.transitions[s].len() {
            return Err(Error::IndexOutOfRange {
                what: "action",
                index: a,
                limit: self.transitions[s].len(),
            });
        }
        Ok(())
    }

    /// Samples one environment transition. Deterministic given the generator
    /// state; consumes exactly one draw per call.
    pub fn step<R: Rng>(&self, s: usize, a: usize, rng: &mut R) -> Result<(usize, f64)> {
        self.check_pair(s, a)?;
        let row = &self.transitions[s][a];
        if row.is_empty() {
            return Err(Error::InvalidMdp(format!(
                "cannot simulate empty transition row ({s}, {a})"
            )));
        }
        let u: f64 = rng.gen::<f64>();
        let mut acc = 0.0;
        let mut next = row[row.len() - 1].0;
        for &(s2, p) in row {
            acc += p;
            if u < acc {
                next = s2;
                break;
            }
        }
        Ok((next, self.rewards[s][a]))
    }

    /// Rolls a fixed policy forward from the start state for `steps` steps.
    pub fn rollout<R: Rng>(
        &self,
        policy: &DeterministicPolicy,
        steps: usize,
        rng_seed: u64,
        rng: &mut R,
    ) -> Result<Rollout> {
        let mut states = Vec::with_capacity(steps + 1);
        let mut actions = Vec::with_capacity(steps);
        let mut rewards = Vec::with_capacity(steps);
        let mut s = self.start_state;
        states.push(s);
        for _ in 0..steps {
            let a = policy.action(s);
            let (s2, r) = self.step(s, a, rng)?;
            actions.push(a);
            rewards.push(r);
            states.push(s2);
            s = s2;
        }
        Ok(Rollout {
            states,
            actions,
            rewards,
            rng_seed,
        })
    }

    /// Directed reachability graph induced by all actions: `s -> s'` iff some
    /// action moves `s` to `s'` with positive probability.
    fn union_graph(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_states];
        for (s, rows) in self.transitions.iter().enumerate() {
            let mut next: Vec<usize> = rows
                .iter()
                .flat_map(|row| row.iter().filter(|&&(_, p)| p > 0.0).map(|&(s2, _)| s2))
                .collect();
            next.sort_unstable();
            next.dedup();
            adj[s] = next;
        }
        adj
    }
}

/// One recorded environment transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub state: usize,
    pub action: usize,
    pub next_state: usize,
    pub reward: f64,
}

/// A trajectory under a fixed policy, reproducible from its seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub rng_seed: u64,
}

impl Rollout {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn mean_reward(&self) -> f64 {
        if self.rewards.is_empty() {
            0.0
        } else {
            self.rewards.iter().sum::<f64>() / self.rewards.len() as f64
        }
    }
}

/// State -> action map covering every state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeterministicPolicy {
    actions: Vec<usize>,
}

impl DeterministicPolicy {
    pub fn new(actions: Vec<usize>, mdp: &TabularMdp) -> Result<Self> {
        if actions.len() != mdp.num_states() {
            return Err(Error::ShapeMismatch(format!(
                "policy covers {} states, MDP has {}",
                actions.len(),
                mdp.num_states()
            )));
        }
        for (s, &a) in actions.iter().enumerate() {
            if a >= mdp.num_actions(s) {
                return Err(Error::IndexOutOfRange {
                    what: "policy action",
                    index: a,
                    limit: mdp.num_actions(s),
                });
            }
        }
        Ok(Self { actions })
    }

    pub fn from_vec_unchecked(actions: Vec<usize>) -> Self {
        Self { actions }
    }

    /// Uniform draw per state, fixed at construction.
    pub fn uniform_random<R: Rng>(mdp: &TabularMdp, rng: &mut R) -> Self {
        let actions = (0..mdp.num_states())
            .map(|s| rng.gen_range(0..mdp.num_actions(s)))
            .collect();
        Self { actions }
    }

    pub fn action(&self, s: usize) -> usize {
        self.actions[s]
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Optimal gain and bias pair produced by the average-reward solvers.
///
/// The bias is re-centered so `min(bias) = 0` (it is only defined up to an
/// additive constant); `span = max(bias) - min(bias)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainBias {
    pub gain: f64,
    pub bias: Vec<f64>,
    pub span: f64,
}

/// `max(h) - min(h)`.
pub fn span(h: &[f64]) -> Result<f64> {
    if h.is_empty() {
        return Err(Error::EmptyInput("span vector"));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &x in h {
        lo = lo.min(x);
        hi = hi.max(x);
    }
    Ok(hi - lo)
}

/// Solves the average-reward Bellman optimality equation by relative value
/// iteration with span-based stopping: iterate until
/// `sp(V^{l+1} - V^l) < tol`, read the gain off the settled difference, and
/// return the bias re-centered to `min = 0` together with the greedy policy
/// (ties break to the lowest action index).
pub fn relative_value_iteration(
    mdp: &TabularMdp,
    tol: f64,
    max_iters: usize,
) -> Result<(GainBias, DeterministicPolicy)> {
    if tol <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "tol",
            value: tol,
        });
    }
    let n = mdp.num_states();
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut policy = vec![0usize; n];
    let scaled_tol = tol * (1.0 - DAMPING);
    let mut residual = f64::INFINITY;
    for _ in 0..max_iters {
        for s in 0..n {
            let mut best = f64::NEG_INFINITY;
            let mut best_a = 0;
            for a in 0..mdp.num_actions(s) {
                let mut exp = 0.0;
                for &(s2, p) in mdp.row(s, a) {
                    exp += p * v[s2];
                }
                let q = (1.0 - DAMPING) * (mdp.reward(s, a) + exp) + DAMPING * v[s];
                if q > best {
                    best = q;
                    best_a = a;
                }
            }
            w[s] = best;
            policy[s] = best_a;
        }
        let (sp_diff, mid) = {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for s in 0..n {
                let d = w[s] - v[s];
                lo = lo.min(d);
                hi = hi.max(d);
            }
            (hi - lo, 0.5 * (hi + lo))
        };
        residual = sp_diff;
        if sp_diff < scaled_tol {
            let gain = mid / (1.0 - DAMPING);
            let lo = w.iter().cloned().fold(f64::INFINITY, f64::min);
            let bias: Vec<f64> = w.iter().map(|x| x - lo).collect();
            let span = span(&bias)?;
            return Ok((
                GainBias { gain, bias, span },
                DeterministicPolicy { actions: policy },
            ));
        }
        let lo = w.iter().cloned().fold(f64::INFINITY, f64::min);
        for s in 0..n {
            v[s] = w[s] - lo;
        }
    }
    Err(Error::NonConvergence {
        iters: max_iters,
        residual: residual / (1.0 - DAMPING),
    })
}

/// Long-run average reward of a fixed policy, by policy-specific relative
/// value iteration. Requires the policy chain to have a single recurrent
/// class (state-independent gain); a chain whose value differences settle to
/// a state-dependent vector is reported as non-convergent.
pub fn evaluate_policy_average_reward(
    mdp: &TabularMdp,
    policy: &DeterministicPolicy,
    tol: f64,
) -> Result<f64> {
    evaluate_policy_with_iters(mdp, policy, tol, DEFAULT_MAX_ITERS)
}

pub fn evaluate_policy_with_iters(
    mdp: &TabularMdp,
    policy: &DeterministicPolicy,
    tol: f64,
    max_iters: usize,
) -> Result<f64> {
    if tol <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "tol",
            value: tol,
        });
    }
    if policy.len() != mdp.num_states() {
        return Err(Error::ShapeMismatch(format!(
            "policy covers {} states, MDP has {}",
            policy.len(),
            mdp.num_states()
        )));
    }
    let n = mdp.num_states();
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n];
    let scaled_tol = tol * (1.0 - DAMPING);
    let mut residual = f64::INFINITY;
    let mut stall_check = f64::INFINITY;
    for iter in 0..max_iters {
        for s in 0..n {
            let a = policy.action(s);
            let mut exp = 0.0;
            for &(s2, p) in mdp.row(s, a) {
                exp += p * v[s2];
            }
            w[s] = (1.0 - DAMPING) * (mdp.reward(s, a) + exp) + DAMPING * v[s];
        }
        let (sp_diff, mid) = {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for s in 0..n {
                let d = w[s] - v[s];
                lo = lo.min(d);
                hi = hi.max(d);
            }
            (hi - lo, 0.5 * (hi + lo))
        };
        residual = sp_diff;
        if sp_diff < scaled_tol {
            return Ok(mid / (1.0 - DAMPING));
        }
        // A difference span that stops shrinking signals a state-dependent
        // gain (multichain policy), which this contract does not cover.
        if iter % 1024 == 1023 {
            if sp_diff > stall_check * 0.999 {
                return Err(Error::NonConvergence {
                    iters: iter + 1,
                    residual: sp_diff / (1.0 - DAMPING),
                });
            }
            stall_check = sp_diff;
        }
        let lo = w.iter().cloned().fold(f64::INFINITY, f64::min);
        for s in 0..n {
            v[s] = w[s] - lo;
        }
    }
    Err(Error::NonConvergence {
        iters: max_iters,
        residual: residual / (1.0 - DAMPING),
    })
}

/// Per-state long-run average reward of a fixed policy, as the limit of the
/// value-difference vector. Unlike [`evaluate_policy_average_reward`] this
/// does not require a single recurrent class: a transient start state gets
/// the reachability-weighted mix of the gains of the classes it can fall
/// into. Convergence is measured on successive difference vectors.
pub fn policy_gain_by_state(
    mdp: &TabularMdp,
    policy: &DeterministicPolicy,
    tol: f64,
    max_iters: usize,
) -> Result<Vec<f64>> {
    if tol <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "tol",
            value: tol,
        });
    }
    if policy.len() != mdp.num_states() {
        return Err(Error::ShapeMismatch(format!(
            "policy covers {} states, MDP has {}",
            policy.len(),
            mdp.num_states()
        )));
    }
    let n = mdp.num_states();
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut diff = vec![0.0; n];
    let mut prev_diff = vec![f64::INFINITY; n];
    let scaled_tol = tol * (1.0 - DAMPING);
    let mut residual = f64::INFINITY;
    for _ in 0..max_iters {
        for s in 0..n {
            let a = policy.action(s);
            let mut exp = 0.0;
            for &(s2, p) in mdp.row(s, a) {
                exp += p * v[s2];
            }
            w[s] = (1.0 - DAMPING) * (mdp.reward(s, a) + exp) + DAMPING * v[s];
        }
        let mut change: f64 = 0.0;
        for s in 0..n {
            diff[s] = w[s] - v[s];
            change = change.max((diff[s] - prev_diff[s]).abs());
        }
        residual = change;
        if change < scaled_tol {
            return Ok(diff.iter().map(|d| d / (1.0 - DAMPING)).collect());
        }
        std::mem::swap(&mut diff, &mut prev_diff);
        let lo = w.iter().cloned().fold(f64::INFINITY, f64::min);
        for s in 0..n {
            v[s] = w[s] - lo;
        }
    }
    Err(Error::NonConvergence {
        iters: max_iters,
        residual: residual / (1.0 - DAMPING),
    })
}

/// Row-level violation found by [`validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowSumViolation {
    pub state: usize,
    pub action: usize,
    pub sum: f64,
}

/// Entry-level violation found by [`validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryViolation {
    pub state: usize,
    pub action: usize,
    pub next_state: usize,
    pub value: f64,
}

/// Report-only validation outcome: stochasticity of every row, finiteness of
/// rewards, and the weak-communication status of the induced state graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub row_sum_violations: Vec<RowSumViolation>,
    pub out_of_range_entries: Vec<EntryViolation>,
    pub non_finite_rewards: Vec<(usize, usize)>,
    pub weakly_communicating: bool,
    /// Number of closed communicating classes in the all-action reachability
    /// graph. Weak communication holds iff this is exactly 1: the single
    /// closed class is the communicating set and every remaining state can
    /// reach it.
    pub closed_class_count: usize,
    /// States of the (first, by lowest contained index) closed class.
    pub communicating_class: Vec<usize>,
    /// States outside every closed class.
    pub transient_states: Vec<usize>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.row_sum_violations.is_empty()
            && self.out_of_range_entries.is_empty()
            && self.non_finite_rewards.is_empty()
            && self.weakly_communicating
    }
}

const ROW_SUM_TOL: f64 = 1e-12;

/// Checks stochasticity (row sums within `1e-12` of 1, entries in `[0, 1]`),
/// reward finiteness, and weak communication. Never fails; malformed kernels
/// come back described in the report.
pub fn validate(mdp: &TabularMdp) -> ValidationReport {
    let mut row_sum_violations = Vec::new();
    let mut out_of_range_entries = Vec::new();
    let mut non_finite_rewards = Vec::new();
    for s in 0..mdp.num_states() {
        for a in 0..mdp.num_actions(s) {
            let mut sum = 0.0;
            for &(s2, p) in mdp.row(s, a) {
                sum += p;
                if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                    out_of_range_entries.push(EntryViolation {
                        state: s,
                        action: a,
                        next_state: s2,
                        value: p,
                    });
                }
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                row_sum_violations.push(RowSumViolation {
                    state: s,
                    action: a,
                    sum,
                });
            }
            if !mdp.reward(s, a).is_finite() {
                non_finite_rewards.push((s, a));
            }
        }
    }

    let components = strongly_connected_components(&mdp.union_graph());
    let closed: Vec<&Vec<usize>> = components
        .iter()
        .filter(|c| c.closed)
        .map(|c| &c.states)
        .collect();
    let communicating_class = closed.first().map(|c| (*c).clone()).unwrap_or_default();
    let in_closed: std::collections::HashSet<usize> =
        closed.iter().flat_map(|c| c.iter().copied()).collect();
    let transient_states: Vec<usize> = (0..mdp.num_states())
        .filter(|s| !in_closed.contains(s))
        .collect();

    ValidationReport {
        row_sum_violations,
        out_of_range_entries,
        non_finite_rewards,
        weakly_communicating: closed.len() == 1,
        closed_class_count: closed.len(),
        communicating_class,
        transient_states,
    }
}

struct Component {
    states: Vec<usize>,
    closed: bool,
}

/// Kosaraju SCC over the reachability graph; components are marked closed
/// when no edge leaves them. Iterative DFS keeps large domains off the call
/// stack.
fn strongly_connected_components(adj: &[Vec<usize>]) -> Vec<Component> {
    let n = adj.len();
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut stack = vec![(start, 0usize)];
        seen[start] = true;
        while let Some(&mut (s, ref mut i)) = stack.last_mut() {
            if *i < adj[s].len() {
                let t = adj[s][*i];
                *i += 1;
                if !seen[t] {
                    seen[t] = true;
                    stack.push((t, 0));
                }
            } else {
                order.push(s);
                stack.pop();
            }
        }
    }

    let mut radj = vec![Vec::new(); n];
    for (s, next) in adj.iter().enumerate() {
        for &t in next {
            radj[t].push(s);
        }
    }

    let mut comp = vec![usize::MAX; n];
    let mut components: Vec<Vec<usize>> = Vec::new();
    for &start in order.iter().rev() {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = components.len();
        let mut states = Vec::new();
        let mut stack = vec![start];
        comp[start] = id;
        while let Some(s) = stack.pop() {
            states.push(s);
            for &t in &radj[s] {
                if comp[t] == usize::MAX {
                    comp[t] = id;
                    stack.push(t);
                }
            }
        }
        states.sort_unstable();
        components.push(states);
    }

    components
        .into_iter()
        .enumerate()
        .map(|(id, states)| {
            let closed = states
                .iter()
                .all(|&s| adj[s].iter().all(|&t| comp[t] == id));
            Component { states, closed }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// JSON envelope
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum TransitionsJson {
    /// `[s][a][s']` probability tables.
    Dense(Vec<Vec<Vec<f64>>>),
    /// `[s][a]` lists of `[next_state, probability]` pairs, for MDPs too
    /// large to write densely.
    Sparse(Vec<Vec<Vec<(usize, f64)>>>),
}

#[derive(Serialize, Deserialize)]
struct MdpJson {
    num_states: usize,
    actions_per_state: Vec<usize>,
    #[serde(default)]
    start_state: usize,
    transitions: TransitionsJson,
    rewards: Vec<Vec<f64>>,
}

/// States above this threshold serialize sparsely by default.
const DENSE_JSON_LIMIT: usize = 512;

impl TabularMdp {
    pub fn to_json(&self) -> String {
        self.to_json_with(self.num_states <= DENSE_JSON_LIMIT)
    }

    pub fn to_json_with(&self, dense: bool) -> String {
        let transitions = if dense {
            TransitionsJson::Dense(
                (0..self.num_states)
                    .map(|s| {
                        (0..self.num_actions(s))
                            .map(|a| {
                                let mut row = vec![0.0; self.num_states];
                                for &(s2, p) in self.row(s, a) {
                                    row[s2] = p;
                                }
                                row
                            })
                            .collect()
                    })
                    .collect(),
            )
        } else {
            TransitionsJson::Sparse(self.transitions.clone())
        };
        let doc = MdpJson {
            num_states: self.num_states,
            actions_per_state: self.actions_per_state(),
            start_state: self.start_state,
            transitions,
            rewards: self.rewards.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("MDP document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: MdpJson = serde_json::from_str(text)?;
        let mdp = match doc.transitions {
            TransitionsJson::Dense(dense) => Self::from_dense(dense, doc.rewards, doc.start_state)?,
            TransitionsJson::Sparse(rows) => Self::new(rows, doc.rewards, doc.start_state)?,
        };
        if mdp.num_states() != doc.num_states {
            return Err(Error::ShapeMismatch(format!(
                "document claims {} states, transitions have {}",
                doc.num_states,
                mdp.num_states()
            )));
        }
        if mdp.actions_per_state() != doc.actions_per_state {
            return Err(Error::ShapeMismatch(
                "actions_per_state disagrees with transition table".into(),
            ));
        }
        Ok(mdp)
    }
}
