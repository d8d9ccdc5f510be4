//! Python bindings: the tabular-MDP core, the benchmark domains, the
//! experiment runner, and the analysis helpers.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::rngs::StdRng;
use rand::SeedableRng;

use advicerl::analysis;
use advicerl::domains::{build_block_dude, build_combination_lock, BlockDudeSpec, GridWorldSpec};
use advicerl::experiment;
use advicerl::mdp;

fn err(e: advicerl::Error) -> PyErr {
    match e {
        advicerl::Error::IndexOutOfRange { .. }
        | advicerl::Error::InvalidParameter { .. }
        | advicerl::Error::EmptyInput(_)
        | advicerl::Error::ShapeMismatch(_)
        | advicerl::Error::HorizonMismatch { .. }
        | advicerl::Error::Config(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// A finite state/action MDP with a transition kernel and reward table.
#[pyclass(name = "Mdp", skip_from_py_object)]
#[derive(Clone)]
struct PyMdp {
    inner: mdp::TabularMdp,
}

#[pymethods]
impl PyMdp {
    /// The 11x11 four-room grid world.
    #[staticmethod]
    fn grid_world() -> PyResult<Self> {
        Ok(Self {
            inner: GridWorldSpec::default().build().map_err(err)?,
        })
    }

    /// The n+1 state combination lock.
    #[staticmethod]
    fn combination_lock(n: usize) -> PyResult<Self> {
        Ok(Self {
            inner: build_combination_lock(n).map_err(err)?,
        })
    }

    /// The block-pushing maze (383 reachable states on the default level).
    #[staticmethod]
    fn block_dude() -> PyResult<Self> {
        Ok(Self {
            inner: build_block_dude(&BlockDudeSpec::default())
                .map_err(err)?
                .mdp,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: mdp::TabularMdp::from_json(text).map_err(err)?,
        })
    }

    #[pyo3(signature = (dense=None))]
    fn to_json(&self, dense: Option<bool>) -> String {
        match dense {
            Some(d) => self.inner.to_json_with(d),
            None => self.inner.to_json(),
        }
    }

    #[getter]
    fn num_states(&self) -> usize {
        self.inner.num_states()
    }

    #[getter]
    fn start_state(&self) -> usize {
        self.inner.start_state()
    }

    #[getter]
    fn actions_per_state(&self) -> Vec<usize> {
        self.inner.actions_per_state()
    }

    fn reward(&self, state: usize, action: usize) -> f64 {
        self.inner.reward(state, action)
    }

    fn transition_row(&self, state: usize, action: usize) -> Vec<(usize, f64)> {
        self.inner.row(state, action).clone()
    }

    /// Stochasticity and weak-communication report.
    fn validate<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let report = mdp::validate(&self.inner);
        let out = PyDict::new(py);
        out.set_item("ok", report.is_ok())?;
        out.set_item("weakly_communicating", report.weakly_communicating)?;
        out.set_item("closed_class_count", report.closed_class_count)?;
        out.set_item("communicating_class", report.communicating_class.clone())?;
        out.set_item("transient_states", report.transient_states.clone())?;
        out.set_item(
            "row_sum_violations",
            report
                .row_sum_violations
                .iter()
                .map(|v| (v.state, v.action, v.sum))
                .collect::<Vec<_>>(),
        )?;
        Ok(out)
    }

    /// Relative value iteration: returns (gain, bias, span, policy).
    #[pyo3(signature = (tol=1e-9, max_iters=1_000_000))]
    fn solve(&self, tol: f64, max_iters: usize) -> PyResult<(f64, Vec<f64>, f64, Vec<usize>)> {
        let (gb, pi) = mdp::relative_value_iteration(&self.inner, tol, max_iters).map_err(err)?;
        Ok((gb.gain, gb.bias, gb.span, pi.actions().to_vec()))
    }

    /// Long-run average reward of a fixed policy (single recurrent class).
    #[pyo3(signature = (policy, tol=1e-9))]
    fn evaluate_policy(&self, policy: Vec<usize>, tol: f64) -> PyResult<f64> {
        let pi = mdp::DeterministicPolicy::new(policy, &self.inner).map_err(err)?;
        mdp::evaluate_policy_average_reward(&self.inner, &pi, tol).map_err(err)
    }

    /// Start-state gain of a fixed policy (multichain-safe).
    #[pyo3(signature = (policy, tol=1e-8))]
    fn policy_gain_from_start(&self, policy: Vec<usize>, tol: f64) -> PyResult<f64> {
        let pi = mdp::DeterministicPolicy::new(policy, &self.inner).map_err(err)?;
        let gains = mdp::policy_gain_by_state(&self.inner, &pi, tol, 1_000_000).map_err(err)?;
        Ok(gains[self.inner.start_state()])
    }

    /// Seeded rollout of a fixed policy from the start state:
    /// returns (states, actions, rewards).
    fn rollout(
        &self,
        policy: Vec<usize>,
        steps: usize,
        seed: u64,
    ) -> PyResult<(Vec<usize>, Vec<usize>, Vec<f64>)> {
        let pi = mdp::DeterministicPolicy::new(policy, &self.inner).map_err(err)?;
        let mut rng = StdRng::seed_from_u64(seed);
        let rollout = self
            .inner
            .rollout(&pi, steps, seed, &mut rng)
            .map_err(err)?;
        Ok((rollout.states, rollout.actions, rollout.rewards))
    }

    /// One seeded environment transition: returns (next_state, reward).
    fn step(&self, state: usize, action: usize, seed: u64) -> PyResult<(usize, f64)> {
        let mut rng = StdRng::seed_from_u64(seed);
        self.inner.step(state, action, &mut rng).map_err(err)
    }

    /// Worst-case minimal expected hitting time to the bias-maximizing
    /// state; None when it is unreachable from somewhere.
    fn one_way_diameter(&self, bias: Vec<f64>) -> PyResult<Option<f64>> {
        Ok(analysis::one_way_diameter(&self.inner, &bias)
            .map_err(err)?
            .finite())
    }

    fn __repr__(&self) -> String {
        format!("Mdp(num_states={})", self.inner.num_states())
    }
}

/// Two-sided empirical Bernstein interval around a sample mean.
#[pyclass(name = "BernsteinInterval", skip_from_py_object)]
#[derive(Clone)]
struct PyInterval {
    inner: analysis::BernsteinInterval,
}

#[pymethods]
impl PyInterval {
    #[getter]
    fn center(&self) -> f64 {
        self.inner.center
    }

    #[getter]
    fn half_width(&self) -> f64 {
        self.inner.half_width
    }

    #[getter]
    fn low(&self) -> f64 {
        self.inner.low()
    }

    #[getter]
    fn high(&self) -> f64 {
        self.inner.high()
    }

    fn contains(&self, x: f64) -> bool {
        self.inner.contains(x)
    }

    /// The same interval scaled from means to horizon-step totals.
    fn scaled_to_total(&self, horizon: usize) -> Self {
        Self {
            inner: self.inner.scaled_to_total(horizon),
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "BernsteinInterval(center={}, half_width={})",
            self.inner.center, self.inner.half_width
        )
    }
}

/// max(values) - min(values).
#[pyfunction]
fn span(values: Vec<f64>) -> PyResult<f64> {
    mdp::span(&values).map_err(err)
}

/// Most frequent action; ties break to the lowest index.
#[pyfunction]
fn majority_vote(advices: Vec<usize>) -> PyResult<usize> {
    advicerl::advice::majority_vote(&advices).map_err(err)
}

/// Cumulative regret curve for a reward sequence against a gain.
#[pyfunction]
fn cumulative_regret(rewards: Vec<f64>, gain: f64) -> Vec<f64> {
    analysis::cumulative_regret_from_rewards(&rewards, gain).cumulative
}

#[pyfunction]
fn empirical_bernstein(samples: Vec<f64>, delta: f64, r_max: f64) -> PyResult<PyInterval> {
    Ok(PyInterval {
        inner: analysis::empirical_bernstein(&samples, delta, r_max).map_err(err)?,
    })
}

/// Regret-bound envelope (big-O constant 1):
/// (1 - beta + rho * beta) * H * |S| * sqrt(|A| T log(|A| T / delta)).
#[pyfunction]
fn regret_bound_envelope(
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    span_ceiling: f64,
    delta: f64,
    one_minus_beta: f64,
    rho: f64,
) -> f64 {
    analysis::regret_bound_envelope(
        num_states,
        num_actions,
        horizon,
        span_ceiling,
        delta,
        one_minus_beta,
        rho,
    )
}

/// Negative-transfer check from interval-bounded return estimates; returns
/// a dict with rho bounds and the verdicts.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn negative_transfer_check<'py>(
    py: Python<'py>,
    gain: f64,
    horizon: usize,
    gap: f64,
    source_expected_total: f64,
    target_expected_total: f64,
    source_interval: &PyInterval,
    target_interval: &PyInterval,
) -> PyResult<Bound<'py, PyDict>> {
    let report = analysis::negative_transfer_check(
        gain,
        horizon,
        gap,
        source_expected_total,
        target_expected_total,
        &source_interval.inner,
        &target_interval.inner,
    )
    .map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("rho_hat", report.rho_hat)?;
    out.set_item("rho_lower", report.rho_lower)?;
    out.set_item("rho_upper", report.rho_upper)?;
    out.set_item("negative_transfer", report.negative_transfer)?;
    out.set_item("gap", report.gap)?;
    out.set_item("gap_condition_holds", report.gap_condition_holds)?;
    Ok(out)
}

/// Run one experimental setting; returns a dict with the optimal gain, the
/// aggregate reward curve, and per-trial summaries. Defaults are the
/// benchmark values (k=10 teachers, m=10 iterations of 200 steps,
/// beta_i = 0.5^i, H=1000, delta=0.8, 10 trials).
#[pyfunction]
#[pyo3(signature = (domain="combination-lock", algorithm="ours", teacher="optimal",
                    trials=10, iterations=10, steps_per_iter=200, beta_base=0.5,
                    span_ceiling=1000.0, delta=0.8, seed=0, lock_n=5,
                    num_teachers=10, radius_scale=None, smoothing_window=200))]
#[allow(clippy::too_many_arguments)]
fn run_experiment<'py>(
    py: Python<'py>,
    domain: &str,
    algorithm: &str,
    teacher: &str,
    trials: usize,
    iterations: usize,
    steps_per_iter: usize,
    beta_base: f64,
    span_ceiling: f64,
    delta: f64,
    seed: u64,
    lock_n: usize,
    num_teachers: usize,
    radius_scale: Option<f64>,
    smoothing_window: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let config = experiment::ExperimentConfig {
        domain: domain.parse().map_err(err)?,
        algorithm: algorithm.parse().map_err(err)?,
        teacher: teacher.parse().map_err(err)?,
        trials,
        iterations,
        steps_per_iter,
        beta_base,
        span_ceiling,
        delta,
        base_seed: seed,
        lock_size: lock_n,
        num_teachers,
        radius_scale,
        smoothing_window,
        planner_tol: 1e-6,
    };
    let result = experiment::run_experiment(&config).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("gain_star", result.gain_star)?;
    out.set_item("span_star", result.span_star)?;
    out.set_item("aggregate_rewards", result.aggregate_rewards.clone())?;
    out.set_item(
        "aggregate_regret",
        result.aggregate_regret.cumulative.clone(),
    )?;
    out.set_item("mean_final_window", result.mean_final_window())?;
    let trials_out: Vec<Bound<'py, PyDict>> = result
        .trials
        .iter()
        .map(|t| {
            let d = PyDict::new(py);
            d.set_item("seed", t.seed)?;
            d.set_item("total_reward", t.trace.total_reward())?;
            d.set_item(
                "final_window_average",
                t.trace.final_window_average(smoothing_window * 2),
            )?;
            d.set_item("final_policy", t.final_policy.actions().to_vec())?;
            d.set_item("final_policy_gain", t.final_policy_gain)?;
            d.set_item("final_regret", t.regret.final_regret())?;
            Ok(d)
        })
        .collect::<PyResult<_>>()?;
    out.set_item("trials", trials_out)?;
    Ok(out)
}

#[pymodule]
fn advicerl_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMdp>()?;
    m.add_class::<PyInterval>()?;
    m.add_function(wrap_pyfunction!(span, m)?)?;
    m.add_function(wrap_pyfunction!(majority_vote, m)?)?;
    m.add_function(wrap_pyfunction!(cumulative_regret, m)?)?;
    m.add_function(wrap_pyfunction!(empirical_bernstein, m)?)?;
    m.add_function(wrap_pyfunction!(regret_bound_envelope, m)?)?;
    m.add_function(wrap_pyfunction!(negative_transfer_check, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
