//! Closed-loop simulation of the hybrid SDE under a feedback policy.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::domain::{drift, Mode, Scenario};
use crate::error::{Error, Result};
use crate::parallel::{map_indices, Execution};
use crate::solver::{Action, PolicyField};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimState {
    pub t: f64,
    /// `(x1, x2, x3)`: position and wind direction.
    pub x: [f64; 3],
    pub q: Mode,
    /// Last steering angle applied (NaN before the first motion step).
    pub u: f64,
}

impl SimState {
    pub fn new(x: [f64; 3], q: Mode) -> Self {
        SimState { t: 0.0, x, q, u: f64::NAN }
    }
}

/// Seeded stream of standard Gaussian increments.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    seed: u64,
    rng: ChaCha8Rng,
}

impl NoiseSource {
    pub fn new(seed: u64) -> Self {
        NoiseSource {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_gaussian(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    TargetHit,
    Timeout,
    BoundaryExit,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::TargetHit => "target-hit",
            Termination::Timeout => "timeout",
            Termination::BoundaryExit => "boundary-exit",
        }
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    Start,
    Step,
    Switch,
}

impl Event {
    pub fn as_str(self) -> &'static str {
        match self {
            Event::Start => "start",
            Event::Step => "step",
            Event::Switch => "switch",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub state: SimState,
    pub event: Event,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchEvent {
    pub t: f64,
    pub from: Mode,
    pub to: Mode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub switches: Vec<SwitchEvent>,
    pub termination: Termination,
    /// Discounted time plus discounted switch costs (plus the stopping cost on
    /// boundary exit), accumulated step by step.
    pub cost: f64,
    pub seed: u64,
    pub dt: f64,
}

impl Trajectory {
    pub fn final_time(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.state.t)
    }

    pub fn switch_count(&self) -> usize {
        self.switches.len()
    }

    /// Arrival time, if the target was reached.
    pub fn arrival(&self) -> Option<f64> {
        (self.termination == Termination::TargetHit).then(|| self.final_time())
    }

    /// Cost functional evaluated in closed form from the recorded events.
    pub fn functional_cost(&self, scenario: &Scenario) -> f64 {
        let lambda = scenario.costs.discount;
        let t = self.final_time();
        let mut j = -(-lambda * t).exp_m1() / lambda;
        for s in &self.switches {
            j += scenario.costs.switching.get(s.from, s.to) * (-lambda * s.t).exp();
        }
        if self.termination == Termination::BoundaryExit {
            j += scenario.costs.stopping_cost * (-lambda * t).exp();
        }
        j
    }

    /// `(1/T) ∫ x1 dt` with the left-endpoint rule; the start abscissa for an
    /// empty or instantaneous run.
    pub fn time_average_x1(&self) -> Option<f64> {
        let first = self.samples.first()?;
        let total = self.final_time();
        if total <= 0.0 {
            return Some(first.state.x[0]);
        }
        let mut acc = 0.0;
        for w in self.samples.windows(2) {
            acc += w[0].state.x[0] * (w[1].state.t - w[0].state.t);
        }
        Some(acc / total)
    }
}

/// Outcome of a policy lookup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lookup {
    Act(Action),
    Stop(Termination),
}

/// Nearest-node policy lookup, preceded by the target and domain tests.
/// Target nodes carry no meaningful action, so a state outside the disc
/// reads the nearest node off the target.
pub fn lookup_action(scenario: &Scenario, policy: &PolicyField, state: &SimState) -> Lookup {
    let [x1, x2, x3] = state.x;
    if scenario.target.contains(x1, x2) {
        return Lookup::Stop(Termination::TargetHit);
    }
    if !scenario.grid.contains_xy(x1, x2) {
        return Lookup::Stop(Termination::BoundaryExit);
    }
    Lookup::Act(policy.get(state.q, policy.nearest_free_node([x1, x2, x3])))
}

/// One Euler–Maruyama step (or an instantaneous switch). `xi` is the standard
/// Gaussian increment of the wind-direction noise; it is ignored by switches.
pub fn em_step(scenario: &Scenario, state: &SimState, action: Action, dt: f64, xi: f64) -> Result<SimState> {
    match action {
        Action::Switch(q) => {
            if !scenario.modes.contains(q) {
                return Err(crate::error::DomainError::InvalidMode(q.number()).into());
            }
            Ok(SimState { q, ..*state })
        }
        Action::Continue(u) => {
            let f = drift(scenario, state.x, state.q, u)?;
            let sigma = scenario.wind.diffusion;
            let [lo, hi] = scenario.wind.theta_box;
            let x3 = state.x[2] + f[2] * dt + sigma * dt.sqrt() * xi;
            Ok(SimState {
                t: state.t + dt,
                x: [state.x[0] + f[0] * dt, state.x[1] + f[1] * dt, x3.clamp(lo, hi)],
                q: state.q,
                u,
            })
        }
    }
}

/// Kahan–Babuška compensated sum.
#[derive(Debug, Clone, Copy, Default)]
struct Accumulator {
    sum: f64,
    c: f64,
}

impl Accumulator {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.c += (self.sum - t) + v;
        } else {
            self.c += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.c
    }
}

/// Simulates one run with the solver time step.
pub fn simulate(
    scenario: &Scenario,
    policy: &PolicyField,
    x0: [f64; 3],
    q0: Mode,
    seed: u64,
    t_max: f64,
) -> Result<Trajectory> {
    simulate_with_step(scenario, policy, x0, q0, seed, t_max, scenario.grid.dt)
}

/// Simulates one run with an explicit time step.
pub fn simulate_with_step(
    scenario: &Scenario,
    policy: &PolicyField,
    x0: [f64; 3],
    q0: Mode,
    seed: u64,
    t_max: f64,
    dt: f64,
) -> Result<Trajectory> {
    if !(dt > 0.0) || !(t_max > 0.0) {
        return Err(crate::error::DomainError::Precondition("dt and t_max must be positive".into()).into());
    }
    if !scenario.modes.contains(q0) {
        return Err(crate::error::DomainError::InvalidMode(q0.number()).into());
    }
    let lambda = scenario.costs.discount;
    let step_weight = -(-lambda * dt).exp_m1() / lambda;
    let mut noise = NoiseSource::new(seed);
    let mut state = SimState::new(x0, q0);
    let mut samples = Vec::new();
    let mut switches = Vec::new();
    let mut cost = Accumulator::default();
    let mut just_switched = false;

    let termination = loop {
        let action = match lookup_action(scenario, policy, &state) {
            Lookup::Stop(t) => break t,
            Lookup::Act(a) => a,
        };
        if samples.is_empty() {
            samples.push(Sample {
                state,
                event: Event::Start,
            });
        }
        if state.t >= t_max - 1e-9 * dt {
            break Termination::Timeout;
        }
        let discount = (-lambda * state.t).exp();
        match action {
            Action::Switch(to) => {
                if just_switched {
                    return Err(Error::PolicyCycle {
                        time: state.t,
                        to: to.number(),
                    });
                }
                let from = state.q;
                state = em_step(scenario, &state, action, dt, 0.0)?;
                cost.add(scenario.costs.switching.get(from, to) * discount);
                switches.push(SwitchEvent { t: state.t, from, to });
                samples.push(Sample {
                    state,
                    event: Event::Switch,
                });
                just_switched = true;
            }
            Action::Continue(_) => {
                let xi = noise.next_gaussian();
                state = em_step(scenario, &state, action, dt, xi)?;
                cost.add(discount * step_weight);
                samples.push(Sample {
                    state,
                    event: Event::Step,
                });
                just_switched = false;
            }
        }
    };
    if termination == Termination::BoundaryExit {
        cost.add(scenario.costs.stopping_cost * (-lambda * state.t).exp());
    }
    Ok(Trajectory {
        samples,
        switches,
        termination,
        cost: cost.value(),
        seed,
        dt,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub seed: u64,
    pub termination: Termination,
    pub final_time: f64,
    pub switches: usize,
    pub cost: f64,
    pub mean_x1: f64,
}

/// Monte Carlo summary. Standard deviations use the `n − 1` denominator
/// (zero for a single run); arrival statistics cover target-hitting runs only.
#[derive(Debug, Clone, PartialEq)]
pub struct McSummary {
    pub runs: Vec<RunRecord>,
    pub arrival_mean: f64,
    pub arrival_std: f64,
    pub switch_mean: f64,
    pub switch_std: f64,
    pub hit_fraction: f64,
    /// Mean over runs of the time-averaged `x1`.
    pub mean_x1: f64,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() == 1 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl McSummary {
    pub fn from_runs(runs: Vec<RunRecord>) -> Self {
        let arrivals: Vec<f64> = runs
            .iter()
            .filter(|r| r.termination == Termination::TargetHit)
            .map(|r| r.final_time)
            .collect();
        let switches: Vec<f64> = runs.iter().map(|r| r.switches as f64).collect();
        let xs: Vec<f64> = runs.iter().map(|r| r.mean_x1).collect();
        let (arrival_mean, arrival_std) = mean_std(&arrivals);
        let (switch_mean, switch_std) = mean_std(&switches);
        let (mean_x1, _) = mean_std(&xs);
        McSummary {
            hit_fraction: arrivals.len() as f64 / runs.len().max(1) as f64,
            runs,
            arrival_mean,
            arrival_std,
            switch_mean,
            switch_std,
            mean_x1,
        }
    }
}

/// `n_runs` independent runs with seeds `seed0 + i`, merged in run order.
#[allow(clippy::too_many_arguments)]
pub fn mc_stats(
    scenario: &Scenario,
    policy: &PolicyField,
    x0: [f64; 3],
    q0: Mode,
    n_runs: usize,
    seed0: u64,
    t_max: f64,
    exec: Execution,
) -> Result<McSummary> {
    if n_runs == 0 {
        return Err(crate::error::DomainError::Precondition("n_runs must be at least 1".into()).into());
    }
    let results = map_indices(exec, n_runs, |i| {
        let seed = seed0.wrapping_add(i as u64);
        simulate(scenario, policy, x0, q0, seed, t_max).map(|tr| RunRecord {
            seed,
            termination: tr.termination,
            final_time: tr.final_time(),
            switches: tr.switch_count(),
            cost: tr.cost,
            mean_x1: tr.time_average_x1().unwrap_or(x0[0]),
        })
    });
    let runs = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(McSummary::from_runs(runs))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_PI_4;

    use super::*;
    use crate::domain::tests::frozen_scenario;
    use crate::solver::PolicyField;

    fn constant_policy(s: &Scenario, a: impl Fn(Mode) -> Action) -> PolicyField {
        let lat_n = s.grid.node_count();
        let n = s.modes.count();
        let mut actions = Vec::with_capacity(n * lat_n);
        for q in 0..n {
            actions.extend(std::iter::repeat_n(a(Mode::from_index(q)), lat_n));
        }
        let plane = s.grid.x1().len() * s.grid.x2().len();
        PolicyField::new(&s.grid, n, actions, vec![false; plane])
    }

    #[test]
    fn em_step_examples() {
        let s = frozen_scenario();
        let st = SimState::new([0.0, 0.0, 0.0], Mode::new(2));
        let next = em_step(&s, &st, Action::Continue(FRAC_PI_4), 0.1, 0.0).unwrap();
        let d = 0.05 * 0.1 * std::f64::consts::FRAC_1_SQRT_2;
        assert!((next.x[0] - d).abs() < 1e-15);
        assert!((next.x[1] - d).abs() < 1e-15);
        assert!((next.x[0] - 0.00353553).abs() < 1e-8);
        assert_eq!(next.t, 0.1);

        let sw = em_step(&s, &next, Action::Switch(Mode::new(1)), 0.1, 5.0).unwrap();
        assert_eq!(sw.x, next.x);
        assert_eq!(sw.t, next.t);
        assert_eq!(sw.q, Mode::new(1));

        let mut drifting = s.clone();
        drifting.wind.drift = 0.15;
        let n = em_step(&drifting, &st, Action::Continue(FRAC_PI_4), 0.1, 0.0).unwrap();
        assert!((n.x[2] - 0.015).abs() < 1e-15);
    }

    #[test]
    fn wind_direction_is_clamped() {
        let mut s = frozen_scenario();
        s.wind.diffusion = 1.0;
        let st = SimState::new([0.0, 0.0, 0.95], Mode::new(1));
        let n = em_step(&s, &st, Action::Continue(FRAC_PI_4), 0.1, 10.0).unwrap();
        assert_eq!(n.x[2], 1.0);
    }

    #[test]
    fn start_inside_target_is_empty() {
        let s = frozen_scenario();
        let p = constant_policy(&s, |_| Action::Continue(FRAC_PI_4));
        let tr = simulate(&s, &p, [0.0, 1.8, 0.0], Mode::new(1), 7, 100.0).unwrap();
        assert!(tr.samples.is_empty());
        assert_eq!(tr.termination, Termination::TargetHit);
        assert_eq!(tr.cost, 0.0);
    }

    #[test]
    fn switch_then_motion_and_cost_accounting() {
        let mut s = frozen_scenario();
        s.wind.diffusion = 0.0;
        // Port everywhere switches to starboard; starboard heads up-right.
        let p = constant_policy(&s, |q| {
            if q.number() == 1 {
                Action::Switch(Mode::new(2))
            } else {
                Action::Continue(FRAC_PI_4)
            }
        });
        let tr = simulate(&s, &p, [0.0, 0.0, 0.0], Mode::new(1), 1, 5.0).unwrap();
        assert_eq!(tr.switch_count(), 1);
        assert_eq!(tr.switches[0].t, 0.0);
        assert_eq!(tr.samples[1].event, Event::Switch);
        assert_eq!(tr.termination, Termination::Timeout);
        assert!((tr.final_time() - 5.0).abs() < 1e-9);
        assert!((tr.cost - tr.functional_cost(&s)).abs() < 1e-12);
        assert!((tr.cost - (5.0 + 2.0)).abs() < 1e-4);
    }

    #[test]
    fn alternating_switches_are_a_cycle() {
        let s = frozen_scenario();
        let p = constant_policy(&s, |q| Action::Switch(Mode::from_index(1 - q.index())));
        let err = simulate(&s, &p, [0.0, 0.0, 0.0], Mode::new(1), 1, 5.0).unwrap_err();
        assert!(matches!(err, Error::PolicyCycle { to: 1, .. }));
    }

    #[test]
    fn leaving_the_box_charges_stopping_cost() {
        let s = frozen_scenario();
        let p = constant_policy(&s, |_| Action::Continue(FRAC_PI_4));
        let tr = simulate(&s, &p, [1.38, 0.5, 0.0], Mode::new(2), 1, 100.0).unwrap();
        assert_eq!(tr.termination, Termination::BoundaryExit);
        assert!(tr.cost > 100.0);
        assert!((tr.cost - tr.functional_cost(&s)).abs() < 1e-12);
    }

    #[test]
    fn same_seed_same_trajectory() {
        let mut s = frozen_scenario();
        s.wind.diffusion = 0.1;
        let p = constant_policy(&s, |_| Action::Continue(FRAC_PI_4));
        let a = simulate(&s, &p, [0.0, 0.0, 0.0], Mode::new(1), 42, 20.0).unwrap();
        let b = simulate(&s, &p, [0.0, 0.0, 0.0], Mode::new(1), 42, 20.0).unwrap();
        let c = simulate(&s, &p, [0.0, 0.0, 0.0], Mode::new(1), 43, 20.0).unwrap();
        // Debug output compares the NaN start angle too.
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
        assert_ne!(format!("{a:?}"), format!("{c:?}"));
    }

    #[test]
    fn mc_single_run_and_deterministic_spread() {
        let s = frozen_scenario();
        let p = constant_policy(&s, |_| Action::Continue(FRAC_PI_4));
        let one = mc_stats(&s, &p, [0.0, 0.0, 0.0], Mode::new(2), 1, 9, 30.0, Execution::Sequential).unwrap();
        let tr = simulate(&s, &p, [0.0, 0.0, 0.0], Mode::new(2), 9, 30.0).unwrap();
        assert_eq!(one.switch_mean, tr.switch_count() as f64);
        assert_eq!(one.switch_std, 0.0);
        assert_eq!(one.runs[0].final_time, tr.final_time());

        let mut det = s.clone();
        det.wind.diffusion = 0.0;
        let many = mc_stats(&det, &p, [0.0, 0.0, 0.0], Mode::new(2), 5, 0, 30.0, Execution::Parallel).unwrap();
        assert_eq!(many.switch_std, 0.0);
        assert!(many.runs.iter().all(|r| r.final_time == many.runs[0].final_time));
        let seeds: Vec<u64> = many.runs.iter().map(|r| r.seed).collect();
        assert_eq!(seeds, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn time_average_of_a_straight_run() {
        let mut s = frozen_scenario();
        s.wind.diffusion = 0.0;
        let p = constant_policy(&s, |_| Action::Continue(FRAC_PI_4));
        let tr = simulate(&s, &p, [0.0, 0.0, 0.0], Mode::new(1), 0, 10.0).unwrap();
        // x1(t) = −v t on [0, 10]; left rule over steps of 0.1.
        let v = 0.05 * std::f64::consts::FRAC_1_SQRT_2;
        let expect = -v * (0..100).map(|k| k as f64 * 0.1).sum::<f64>() * 0.1 / 10.0;
        assert!((tr.time_average_x1().unwrap() - expect).abs() < 1e-12);
    }
}
