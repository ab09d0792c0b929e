//! Monotone value iteration for the discrete quasi-variational HJB system.
//!
//! The scheme at node `(x_j, q)` is `V = min(N V, Σ(V))` where `N` is the exact
//! switching operator and `Σ` the semi-Lagrangian operator
//! `Δt + e^{−λΔt} min_u (1/2d) Σ_i 𝕀[V](x_j + Δt f ± √(dΔt) σ e_i)` with
//! multilinear `𝕀`. Starting from the constant supersolution
//! `Δt / (1 − e^{−λΔt})` the iterates decrease monotonically to the fixed point.

mod policy;
mod scheme;
mod value;

use serde::{Deserialize, Serialize};

pub use policy::{extract_policy, Action, PolicyField};
pub use scheme::{initial_bound, Scheme};
pub use value::ValueField;

use crate::domain::{validate_scenario, Scenario};
use crate::error::{Error, Result};
use crate::parallel::Execution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMode {
    /// Every node reads the previous iterate; parallel and schedule-independent.
    #[default]
    Jacobi,
    /// Sequential sweep reading the latest values.
    InPlace,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Number of uniformly spaced control samples (ignored with a frozen angle).
    pub control_samples: usize,
    /// Sup-norm change between iterates at which iteration stops.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub sweep: SweepMode,
    pub execution: Execution,
    /// Switching must beat continuing by more than this to be selected.
    pub tie_epsilon: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            control_samples: 32,
            tolerance: 1e-6,
            max_iterations: 100_000,
            sweep: SweepMode::Jacobi,
            execution: Execution::Parallel,
            tie_epsilon: 1e-12,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Vec<crate::domain::Violation> {
        let mut v = Vec::new();
        if self.control_samples < 2 {
            v.push(violation("solver.controls", "need at least two control samples"));
        }
        if !(self.tolerance > 0.0) {
            v.push(violation("solver.tolerance", "must be positive"));
        }
        if self.max_iterations == 0 {
            v.push(violation("solver.max_iterations", "must be positive"));
        }
        v
    }
}

fn violation(path: &str, message: &str) -> crate::domain::Violation {
    crate::domain::Violation {
        path: path.into(),
        message: message.into(),
    }
}

/// Solver output: the approximate fixed point and its feedback policy.
#[derive(Debug, Clone)]
pub struct Solution {
    pub value: ValueField,
    pub policy: PolicyField,
}

impl Solution {
    pub fn converged(&self) -> bool {
        self.value.converged
    }
}

/// Snapshot handed to a [`solve_with`] observer after every iteration.
pub struct Iteration<'a> {
    /// 1-based iteration number.
    pub k: usize,
    pub previous: &'a ValueField,
    pub current: &'a ValueField,
    /// Sup-norm change `‖V_k − V_{k−1}‖∞`.
    pub change: f64,
}

/// Value iteration to the tolerance, then policy extraction.
pub fn solve(scenario: &Scenario, config: &SolverConfig) -> Result<Solution> {
    solve_with(scenario, config, |_| {})
}

/// [`solve`] with a callback after every iteration.
///
/// Non-convergence is not an error: the field comes back flagged with
/// `converged == false` and its last residual.
pub fn solve_with(
    scenario: &Scenario,
    config: &SolverConfig,
    mut observer: impl FnMut(&Iteration<'_>),
) -> Result<Solution> {
    let mut violations = validate_scenario(scenario);
    violations.extend(config.validate());
    if !violations.is_empty() {
        return Err(Error::Invalid(violations));
    }

    let scheme = Scheme::new(scenario, config);
    let mut cur = scheme.initial_field();
    let mut other = cur.clone();
    let mut change = f64::INFINITY;
    let mut k = 0;
    while k < config.max_iterations {
        // `other` ends up holding the previous iterate in both modes.
        change = match config.sweep {
            SweepMode::Jacobi => scheme.sweep(SweepMode::Jacobi, &mut cur, &mut other, config.execution),
            SweepMode::InPlace => {
                other.values.copy_from_slice(&cur.values);
                scheme.gauss_seidel(&mut cur)
            }
        };
        k += 1;
        debug_assert!(
            cur.values.iter().zip(&other.values).all(|(a, b)| a <= b),
            "value iteration is not monotone at iteration {k}"
        );
        observer(&Iteration {
            k,
            previous: &other,
            current: &cur,
            change,
        });
        if change <= config.tolerance {
            break;
        }
    }
    cur.iterations = k;
    cur.residual = change;
    cur.converged = change <= config.tolerance;
    let policy = extract_policy(&scheme, &cur, config.execution);
    Ok(Solution { value: cur, policy })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    use super::*;
    use crate::domain::*;

    fn tiny() -> Scenario {
        Scenario {
            modes: ModeSet::tacks(),
            wind: WindModel {
                mean_speed: 1.0,
                drift: 0.0,
                diffusion: 0.0,
                theta_box: [-1.0, 1.0],
                heading: HeadingConvention::Rotation,
            },
            polar: PolarModel {
                kind: PolarKind::Constant { speed: 0.05 },
                control: [0.0, FRAC_PI_2],
                frozen_angle: Some(FRAC_PI_4),
            },
            grid: GridSpec::new(
                Axis::new(-1.4, 1.4, 0.1),
                Axis::new(0.0, 2.0, 0.1),
                Axis::new(-1.0, 1.0, 0.5),
                0.5,
            ),
            costs: CostSpec {
                discount: 1e-6,
                stopping_cost: 100.0,
                switching: SwitchCostTable::uniform(2, 2.0),
            },
            target: TargetSpec {
                center: [0.0, 1.8],
                radius: 0.1,
            },
            obstacles: None,
        }
    }

    #[test]
    fn domain_inside_target_converges_at_once() {
        let mut s = tiny();
        s.grid = GridSpec::new(
            Axis::new(-0.1, 0.1, 0.1),
            Axis::new(1.7, 1.9, 0.1),
            Axis::new(-1.0, 1.0, 1.0),
            0.1,
        );
        s.target.radius = 0.5;
        let sol = solve(&s, &SolverConfig::default()).unwrap();
        assert!(sol.converged());
        assert_eq!(sol.value.iterations, 1);
        assert!(sol.value.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn non_convergence_is_flagged() {
        let cfg = SolverConfig {
            max_iterations: 1,
            ..SolverConfig::default()
        };
        let sol = solve(&tiny(), &cfg).unwrap();
        assert!(!sol.converged());
        assert_eq!(sol.value.iterations, 1);
        assert!(sol.value.residual > cfg.tolerance);
    }

    #[test]
    fn invalid_scenario_is_rejected() {
        let mut s = tiny();
        s.wind.diffusion = -1.0;
        assert!(matches!(solve(&s, &SolverConfig::default()), Err(Error::Invalid(_))));
    }

    #[test]
    fn target_nodes_stay_zero_and_iterates_decrease() {
        let s = tiny();
        let mut checks = 0;
        let sol = solve_with(&s, &SolverConfig::default(), |it| {
            for (a, b) in it.current.values().iter().zip(it.previous.values()) {
                assert!(a <= b);
            }
            checks += 1;
        })
        .unwrap();
        assert!(sol.converged());
        assert_eq!(checks, sol.value.iterations);
        let g = s.grid;
        for i3 in 0..g.x3().len() {
            for q in [Mode::new(1), Mode::new(2)] {
                // (0, 1.8) is the target center node.
                assert_eq!(sol.value.get(q, [14, 18, i3]), 0.0);
            }
        }
    }

    #[test]
    fn jacobi_and_in_place_agree_at_the_fixed_point() {
        let s = tiny();
        let a = solve(&s, &SolverConfig::default()).unwrap();
        let b = solve(
            &s,
            &SolverConfig {
                sweep: SweepMode::InPlace,
                ..SolverConfig::default()
            },
        )
        .unwrap();
        assert!(a.converged() && b.converged());
        assert!(b.value.iterations < a.value.iterations);
        assert!(a.value.max_abs_diff(&b.value) < 1e-4);
    }

    #[test]
    fn sequential_and_parallel_are_bit_identical() {
        let mut s = tiny();
        s.wind.diffusion = 0.05;
        let seq = solve(
            &s,
            &SolverConfig {
                execution: Execution::Sequential,
                ..SolverConfig::default()
            },
        )
        .unwrap();
        let par = solve(&s, &SolverConfig::default()).unwrap();
        assert_eq!(seq.value.values(), par.value.values());
        assert_eq!(seq.policy.actions(), par.policy.actions());
    }
}
