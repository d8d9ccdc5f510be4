//! Visit counters and the empirical transition model with per-pair L1
//! confidence radii.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{SparseRow, TabularMdp};

/// Visitation counters `N(s, a, s')` / `N(s, a)` plus pair-count snapshots
/// taken at iteration boundaries, from which the per-iteration visit deltas
/// `v_i(s, a) = N_{i+1}(s, a) - N_i(s, a)` are read off.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionCounts {
    num_states: usize,
    actions_per_state: Vec<usize>,
    pair: Vec<Vec<u64>>,
    /// `triple[s][a]` holds `(next_state, count)` sorted by state index.
    triple: Vec<Vec<Vec<(usize, u64)>>>,
    /// Pair-count snapshots; snapshot 0 is taken at construction.
    snapshots: Vec<Vec<Vec<u64>>>,
    total_steps: u64,
}

impl TransitionCounts {
    pub fn new(num_states: usize, actions_per_state: Vec<usize>) -> Result<Self> {
        if num_states == 0 {
            return Err(Error::EmptyInput("state set"));
        }
        if actions_per_state.len() != num_states {
            return Err(Error::ShapeMismatch(format!(
                "{} action counts for {} states",
                actions_per_state.len(),
                num_states
            )));
        }
        let pair: Vec<Vec<u64>> = actions_per_state.iter().map(|&a| vec![0; a]).collect();
        let triple = actions_per_state
            .iter()
            .map(|&a| vec![Vec::new(); a])
            .collect();
        Ok(Self {
            num_states,
            actions_per_state,
            snapshots: vec![pair.clone()],
            pair,
            triple,
            total_steps: 0,
        })
    }

    pub fn for_mdp(mdp: &TabularMdp) -> Self {
        Self::new(mdp.num_states(), mdp.actions_per_state()).expect("MDP shape is valid")
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn actions_per_state(&self) -> &[usize] {
        &self.actions_per_state
    }

    pub fn max_num_actions(&self) -> usize {
        self.actions_per_state.iter().copied().max().unwrap_or(0)
    }

    pub fn total_steps(&self) -> u64 {
        self.total_steps
    }

    fn check_pair(&self, s: usize, a: usize) -> Result<()> {
        if s >= self.num_states {
            return Err(Error::IndexOutOfRange {
                what: "state",
                index: s,
                limit: self.num_states,
            });
        }
        if a >= self.actions_per_state[s] {
            return Err(Error::IndexOutOfRange {
                what: "action",
                index: a,
                limit: self.actions_per_state[s],
            });
        }
        Ok(())
    }

    /// Increments both counters for one observed transition.
    pub fn record(&mut self, s: usize, a: usize, s2: usize) -> Result<()> {
        self.check_pair(s, a)?;
        if s2 >= self.num_states {
            return Err(Error::IndexOutOfRange {
                what: "next state",
                index: s2,
                limit: self.num_states,
            });
        }
        self.pair[s][a] += 1;
        let row = &mut self.triple[s][a];
        match row.binary_search_by_key(&s2, |&(k, _)| k) {
            Ok(i) => row[i].1 += 1,
            Err(i) => row.insert(i, (s2, 1)),
        }
        self.total_steps += 1;
        Ok(())
    }

    pub fn pair_count(&self, s: usize, a: usize) -> u64 {
        self.pair[s][a]
    }

    pub fn triple_count(&self, s: usize, a: usize, s2: usize) -> u64 {
        self.triple[s][a]
            .binary_search_by_key(&s2, |&(k, _)| k)
            .map(|i| self.triple[s][a][i].1)
            .unwrap_or(0)
    }

    /// `N(s, a, s') / max{N(s, a), 1}`.
    pub fn empirical_transition(&self, s: usize, a: usize, s2: usize) -> f64 {
        let n = self.pair[s][a].max(1);
        self.triple_count(s, a, s2) as f64 / n as f64
    }

    /// Sparse empirical row for `(s, a)`; empty when the pair is unvisited.
    pub fn empirical_row(&self, s: usize, a: usize) -> SparseRow {
        let n = self.pair[s][a].max(1) as f64;
        self.triple[s][a]
            .iter()
            .map(|&(s2, c)| (s2, c as f64 / n))
            .collect()
    }

    /// Snapshots the pair counts; call at each iteration boundary.
    pub fn mark_iteration(&mut self) {
        self.snapshots.push(self.pair.clone());
    }

    /// Number of completed iterations (= snapshots - 1).
    pub fn num_iterations(&self) -> usize {
        self.snapshots.len() - 1
    }

    /// `v_i(s, a)` for 0-based iteration `i`.
    pub fn visit_deltas(&self, i: usize) -> Result<Vec<Vec<u64>>> {
        if i + 1 >= self.snapshots.len() {
            return Err(Error::IndexOutOfRange {
                what: "iteration",
                index: i,
                limit: self.num_iterations(),
            });
        }
        let before = &self.snapshots[i];
        let after = &self.snapshots[i + 1];
        Ok(before
            .iter()
            .zip(after)
            .map(|(b, a)| a.iter().zip(b).map(|(x, y)| x - y).collect())
            .collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("counts serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// L1 confidence radius for pair `(s, a)` at time `t`:
/// `sqrt(12 |S| log(2 |A| t / delta) / max{N(s, a; t), 1})`, with `|A|` the
/// largest per-state action count.
pub fn confidence_radius(
    counts: &TransitionCounts,
    s: usize,
    a: usize,
    t: u64,
    delta: f64,
) -> Result<f64> {
    counts.check_pair(s, a)?;
    radius_from_count(
        counts.num_states,
        counts.max_num_actions(),
        counts.pair[s][a],
        t,
        delta,
    )
}

fn radius_from_count(
    num_states: usize,
    num_actions: usize,
    n: u64,
    t: u64,
    delta: f64,
) -> Result<f64> {
    if t < 1 {
        return Err(Error::InvalidParameter {
            name: "t",
            value: t as f64,
        });
    }
    if !(0.0 < delta && delta < 1.0) {
        return Err(Error::InvalidParameter {
            name: "delta",
            value: delta,
        });
    }
    let s = num_states as f64;
    let a = num_actions as f64;
    let log_term = (2.0 * a * t as f64 / delta).ln();
    Ok((12.0 * s * log_term / n.max(1) as f64).sqrt())
}

/// Empirical row of a confidence set: the normalized counts once the pair
/// has been visited, the uniform default otherwise.
#[derive(Debug, Clone, PartialEq)]
pub enum EmpiricalRow {
    Visited(SparseRow),
    /// Uniform `1/|S|` over every state.
    Unvisited,
}

/// Snapshot of the empirical model and its per-pair L1 radii at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceSet {
    num_states: usize,
    actions_per_state: Vec<usize>,
    rewards: Vec<Vec<f64>>,
    rows: Vec<Vec<EmpiricalRow>>,
    radii: Vec<Vec<f64>>,
    t: u64,
    delta: f64,
}

impl ConfidenceSet {
    /// Builds the set from counters plus the (known) reward table.
    pub fn from_counts(
        counts: &TransitionCounts,
        rewards: &[Vec<f64>],
        t: u64,
        delta: f64,
    ) -> Result<Self> {
        if rewards.len() != counts.num_states {
            return Err(Error::ShapeMismatch(format!(
                "rewards cover {} states, counts {}",
                rewards.len(),
                counts.num_states
            )));
        }
        for (s, (r, &a)) in rewards.iter().zip(&counts.actions_per_state).enumerate() {
            if r.len() != a {
                return Err(Error::ShapeMismatch(format!(
                    "state {s}: {} rewards for {a} actions",
                    r.len()
                )));
            }
        }
        let mut rows = Vec::with_capacity(counts.num_states);
        let mut radii = Vec::with_capacity(counts.num_states);
        for s in 0..counts.num_states {
            let mut state_rows = Vec::with_capacity(counts.actions_per_state[s]);
            let mut state_radii = Vec::with_capacity(counts.actions_per_state[s]);
            for a in 0..counts.actions_per_state[s] {
                state_rows.push(if counts.pair[s][a] == 0 {
                    EmpiricalRow::Unvisited
                } else {
                    EmpiricalRow::Visited(counts.empirical_row(s, a))
                });
                state_radii.push(radius_from_count(
                    counts.num_states,
                    counts.max_num_actions(),
                    counts.pair[s][a],
                    t,
                    delta,
                )?);
            }
            rows.push(state_rows);
            radii.push(state_radii);
        }
        Ok(Self {
            num_states: counts.num_states,
            actions_per_state: counts.actions_per_state.clone(),
            rewards: rewards.to_vec(),
            rows,
            radii,
            t,
            delta,
        })
    }

    /// Set centered on a known model with one fixed radius everywhere.
    /// Radius 0 makes the set a singleton.
    pub fn from_model(mdp: &TabularMdp, radius: f64, t: u64, delta: f64) -> Self {
        let rows = (0..mdp.num_states())
            .map(|s| {
                (0..mdp.num_actions(s))
                    .map(|a| EmpiricalRow::Visited(mdp.row(s, a).clone()))
                    .collect()
            })
            .collect();
        let radii = mdp
            .actions_per_state()
            .iter()
            .map(|&a| vec![radius; a])
            .collect();
        Self {
            num_states: mdp.num_states(),
            actions_per_state: mdp.actions_per_state(),
            rewards: mdp.rewards().to_vec(),
            rows,
            radii,
            t,
            delta,
        }
    }

    /// The same set with every visited pair's radius multiplied by `factor`
    /// in `[0, 1]`. Unvisited pairs keep the full formula radius, so they
    /// stay maximally optimistic. Used by the learning loop to plan with
    /// tempered optimism on estimated rows while the literal formula remains
    /// the analysis-facing radius; factor 0 plans visited pairs at their
    /// empirical estimates.
    pub fn with_scaled_visited_radii(mut self, factor: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&factor) {
            return Err(Error::InvalidParameter {
                name: "radius factor",
                value: factor,
            });
        }
        for (rows, radii) in self.rows.iter().zip(self.radii.iter_mut()) {
            for (row, r) in rows.iter().zip(radii.iter_mut()) {
                if matches!(row, EmpiricalRow::Visited(_)) {
                    *r *= factor;
                }
            }
        }
        Ok(self)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn actions_per_state(&self) -> &[usize] {
        &self.actions_per_state
    }

    pub fn rewards(&self) -> &[Vec<f64>] {
        &self.rewards
    }

    pub fn row(&self, s: usize, a: usize) -> &EmpiricalRow {
        &self.rows[s][a]
    }

    pub fn radius(&self, s: usize, a: usize) -> f64 {
        self.radii[s][a]
    }

    pub fn time(&self) -> u64 {
        self.t
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// True iff every transition row of `candidate` lies within its pair's
    /// L1 radius of the empirical model.
    pub fn contains(&self, candidate: &TabularMdp) -> Result<bool> {
        if candidate.num_states() != self.num_states
            || candidate.actions_per_state() != self.actions_per_state
        {
            return Err(Error::ShapeMismatch(
                "candidate MDP shape differs from confidence set".into(),
            ));
        }
        const SLACK: f64 = 1e-9;
        for s in 0..self.num_states {
            for a in 0..self.actions_per_state[s] {
                let dist = match &self.rows[s][a] {
                    EmpiricalRow::Visited(row) => l1_sparse(candidate.row(s, a), row),
                    EmpiricalRow::Unvisited => {
                        l1_from_uniform(candidate.row(s, a), self.num_states)
                    }
                };
                if dist > self.radii[s][a] + SLACK {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

fn l1_sparse(a: &SparseRow, b: &SparseRow) -> f64 {
    let mut dist = 0.0;
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        match (a.get(i), b.get(j)) {
            (Some(&(sa, pa)), Some(&(sb, pb))) => {
                if sa == sb {
                    dist += (pa - pb).abs();
                    i += 1;
                    j += 1;
                } else if sa < sb {
                    dist += pa.abs();
                    i += 1;
                } else {
                    dist += pb.abs();
                    j += 1;
                }
            }
            (Some(&(_, pa)), None) => {
                dist += pa.abs();
                i += 1;
            }
            (None, Some(&(_, pb))) => {
                dist += pb.abs();
                j += 1;
            }
            (None, None) => break,
        }
    }
    dist
}

fn l1_from_uniform(row: &SparseRow, num_states: usize) -> f64 {
    let u = 1.0 / num_states as f64;
    let on_support: f64 = row.iter().map(|&(_, p)| (p - u).abs()).sum();
    on_support + (num_states - row.len()) as f64 * u
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::build_combination_lock;
    use crate::mdp::DeterministicPolicy;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn fresh(states: usize, actions: usize) -> TransitionCounts {
        TransitionCounts::new(states, vec![actions; states]).unwrap()
    }

    #[test]
    fn record_updates_both_counters() {
        let mut c = fresh(3, 2);
        c.record(0, 1, 2).unwrap();
        assert_eq!(c.triple_count(0, 1, 2), 1);
        assert_eq!(c.pair_count(0, 1), 1);
        c.record(0, 1, 2).unwrap();
        assert_eq!(c.triple_count(0, 1, 2), 2);
        assert_eq!(c.pair_count(0, 1), 2);
        assert!(c.record(0, 5, 0).is_err());
        assert!(c.record(9, 0, 0).is_err());
    }

    #[test]
    fn counter_consistency_after_random_records() {
        let mut c = fresh(4, 3);
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..500 {
            let s = rng.gen_range(0..4);
            let a = rng.gen_range(0..3);
            let s2 = rng.gen_range(0..4);
            c.record(s, a, s2).unwrap();
        }
        for s in 0..4 {
            for a in 0..3 {
                let sum: u64 = (0..4).map(|s2| c.triple_count(s, a, s2)).sum();
                assert_eq!(sum, c.pair_count(s, a));
            }
        }
        assert_eq!(c.total_steps(), 500);
    }

    #[test]
    fn empirical_transition_formula() {
        let mut c = fresh(3, 1);
        for _ in 0..3 {
            c.record(0, 0, 2).unwrap();
        }
        for _ in 0..7 {
            c.record(0, 0, 1).unwrap();
        }
        assert!((c.empirical_transition(0, 0, 2) - 0.3).abs() < 1e-15);
        // Unvisited pair: zero for every next state.
        for s2 in 0..3 {
            assert_eq!(c.empirical_transition(1, 0, s2), 0.0);
        }
        let mut d = fresh(2, 1);
        for _ in 0..7 {
            d.record(0, 0, 1).unwrap();
        }
        assert_eq!(d.empirical_transition(0, 0, 1), 1.0);
    }

    #[test]
    fn empirical_row_close_to_truth() {
        // 1000 draws from a known row land within 0.05 in L1.
        let truth = [(0usize, 0.5), (1, 0.3), (2, 0.2)];
        let mut rng = StdRng::seed_from_u64(7);
        let mut c = fresh(3, 1);
        for _ in 0..1000 {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut s2 = 2;
            for &(k, p) in &truth {
                acc += p;
                if u < acc {
                    s2 = k;
                    break;
                }
            }
            c.record(0, 0, s2).unwrap();
        }
        let row = c.empirical_row(0, 0);
        let dist = l1_sparse(&row, &truth.to_vec());
        assert!(dist < 0.05, "L1 distance {dist}");
    }

    #[test]
    fn radius_matches_direct_evaluation() {
        // sqrt(24 ln 8) for |S|=2, |A|=2, t=1, delta=0.5, N=1.
        let mut c = fresh(2, 2);
        c.record(0, 0, 1).unwrap();
        let r = confidence_radius(&c, 0, 0, 1, 0.5).unwrap();
        let direct = (24.0 * 8.0_f64.ln()).sqrt();
        assert!((r - direct).abs() < 1e-12);
        assert!((r - 7.064460135092848).abs() < 1e-9);
    }

    #[test]
    fn radius_scaling_and_clamp() {
        let mut c = fresh(2, 2);
        c.record(0, 0, 1).unwrap();
        let r1 = confidence_radius(&c, 0, 0, 100, 0.1).unwrap();
        c.record(0, 0, 1).unwrap();
        let r2 = confidence_radius(&c, 0, 0, 100, 0.1).unwrap();
        assert!((r2 - r1 / 2.0_f64.sqrt()).abs() < 1e-12);
        // N = 0 and N = 1 share the clamped denominator.
        let r0 = confidence_radius(&c, 1, 0, 100, 0.1).unwrap();
        let mut c1 = fresh(2, 2);
        c1.record(1, 0, 0).unwrap();
        let r1v = confidence_radius(&c1, 1, 0, 100, 0.1).unwrap();
        assert_eq!(r0, r1v);
    }

    #[test]
    fn radius_monotonicity() {
        let mut c = fresh(3, 2);
        let base = confidence_radius(&c, 0, 0, 10, 0.1).unwrap();
        assert!(confidence_radius(&c, 0, 0, 100, 0.1).unwrap() > base);
        assert!(confidence_radius(&c, 0, 0, 10, 0.01).unwrap() > base);
        c.record(0, 0, 0).unwrap();
        c.record(0, 0, 1).unwrap();
        assert!(confidence_radius(&c, 0, 0, 10, 0.1).unwrap() < base);
    }

    #[test]
    fn radius_rejects_bad_arguments() {
        let c = fresh(2, 2);
        assert!(confidence_radius(&c, 0, 0, 0, 0.1).is_err());
        assert!(confidence_radius(&c, 0, 0, 1, 0.0).is_err());
        assert!(confidence_radius(&c, 0, 0, 1, 1.0).is_err());
    }

    #[test]
    fn snapshots_and_visit_deltas() {
        let mut c = fresh(2, 2);
        c.record(0, 0, 1).unwrap();
        c.record(0, 0, 1).unwrap();
        c.mark_iteration();
        c.record(0, 1, 0).unwrap();
        c.mark_iteration();
        assert_eq!(c.num_iterations(), 2);
        let v0 = c.visit_deltas(0).unwrap();
        assert_eq!(v0[0][0], 2);
        assert_eq!(v0[0][1], 0);
        let v1 = c.visit_deltas(1).unwrap();
        assert_eq!(v1[0][1], 1);
        let total: u64 = (0..2)
            .map(|i| {
                c.visit_deltas(i)
                    .unwrap()
                    .iter()
                    .flat_map(|r| r.iter())
                    .sum::<u64>()
            })
            .sum();
        assert_eq!(total, c.total_steps());
        assert!(c.visit_deltas(2).is_err());
    }

    #[test]
    fn counts_json_round_trip() {
        let mut c = fresh(3, 2);
        c.record(0, 0, 1).unwrap();
        c.mark_iteration();
        c.record(2, 1, 0).unwrap();
        let back = TransitionCounts::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn empirical_model_rows_sum_to_one_when_visited() {
        let mdp = build_combination_lock(3).unwrap();
        let mut rng = StdRng::seed_from_u64(5);
        let mut c = TransitionCounts::for_mdp(&mdp);
        let mut s = mdp.start_state();
        for _ in 0..2000 {
            let a = rng.gen_range(0..mdp.num_actions(s));
            let (s2, _) = mdp.step(s, a, &mut rng).unwrap();
            c.record(s, a, s2).unwrap();
            s = s2;
        }
        for s in 0..mdp.num_states() {
            for a in 0..mdp.num_actions(s) {
                if c.pair_count(s, a) > 0 {
                    let sum: f64 = c.empirical_row(s, a).iter().map(|&(_, p)| p).sum();
                    assert!((sum - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn contains_empirical_model_and_perturbations() {
        let mdp = build_combination_lock(2).unwrap();
        let cs = ConfidenceSet::from_model(&mdp, 0.3, 10, 0.1);
        assert!(cs.contains(&mdp).unwrap());

        // Perturb one row past its radius.
        let mut transitions: Vec<Vec<SparseRow>> = (0..mdp.num_states())
            .map(|s| {
                (0..mdp.num_actions(s))
                    .map(|a| mdp.row(s, a).clone())
                    .collect()
            })
            .collect();
        transitions[0][0] = vec![(0, 0.4), (1, 0.6)]; // L1 distance 0.8 > 0.3
        let perturbed =
            TabularMdp::new(transitions, mdp.rewards().to_vec(), mdp.start_state()).unwrap();
        assert!(!cs.contains(&perturbed).unwrap());

        // Shape mismatch is an error, not `false`.
        let other = build_combination_lock(3).unwrap();
        assert!(cs.contains(&other).is_err());
    }

    #[test]
    fn contains_true_mdp_with_high_probability() {
        // Coverage experiment: the generating MDP stays in the set in at
        // least 90% of seeded replications at delta = 0.1.
        let mdp = build_combination_lock(2).unwrap();
        let pi = DeterministicPolicy::uniform_random(&mdp, &mut StdRng::seed_from_u64(1));
        let mut hits = 0;
        let reps = 200;
        for rep in 0..reps {
            let mut rng = StdRng::seed_from_u64(1000 + rep);
            let mut c = TransitionCounts::for_mdp(&mdp);
            let mut s = mdp.start_state();
            for _ in 0..10_000 {
                let a = if rng.gen::<bool>() {
                    pi.action(s).min(mdp.num_actions(s) - 1)
                } else {
                    rng.gen_range(0..mdp.num_actions(s))
                };
                let (s2, _) = mdp.step(s, a, &mut rng).unwrap();
                c.record(s, a, s2).unwrap();
                s = s2;
            }
            let cs = ConfidenceSet::from_counts(&c, mdp.rewards(), 10_000, 0.1).unwrap();
            if cs.contains(&mdp).unwrap() {
                hits += 1;
            }
        }
        assert!(hits * 10 >= reps * 9, "contained in {hits}/{reps}");
    }

    #[test]
    fn l1_helpers() {
        let a: SparseRow = vec![(0, 0.5), (2, 0.5)];
        let b: SparseRow = vec![(0, 0.25), (1, 0.25), (2, 0.5)];
        assert!((l1_sparse(&a, &b) - 0.5).abs() < 1e-15);
        assert!((l1_from_uniform(&vec![(0, 1.0)], 4) - 1.5).abs() < 1e-15);
    }
}
