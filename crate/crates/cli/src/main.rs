use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tackroute::analysis::{analytic_value, switching_map, triangle_width, Label, SwitchingMap};
use tackroute::io::presets::WINDWARD_STARTS;
use tackroute::io::{
    export_policy, export_stats, export_trajectory, export_value, import_policy, import_value, output_dir,
    resolve_scenario, write_manifest, ScenarioBundle,
};
use tackroute::sim::mc_stats;
use tackroute::{simulate, solve, Error, Execution, Mode, SweepMode, Violation};

/// Exit statuses.
const EXIT_INVALID: u8 = 1;
const EXIT_NOT_CONVERGED: u8 = 2;
const EXIT_IO: u8 = 3;

/// Minimum-time sailing routes under a random wind.
#[derive(Parser)]
#[command(name = "tackroute", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the value function and export value, policy and manifest.
    Solve {
        #[command(flatten)]
        scenario: ScenarioArg,
        /// Output directory (default: $TACKROUTE_OUT_DIR, else ./out).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        max_iterations: Option<usize>,
        #[arg(long)]
        tolerance: Option<f64>,
        #[arg(long, value_enum)]
        sweep: Option<Sweep>,
        /// Run the sweeps on one thread.
        #[arg(long)]
        sequential: bool,
    },
    /// Simulate closed-loop trajectories under a solved policy.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArg,
        /// Directory holding `policy.txt` from `solve`.
        #[arg(long)]
        policy: PathBuf,
        /// Start point `x1,x2,x3`.
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        start: [f64; 3],
        #[arg(long, default_value_t = 1)]
        mode: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        runs: usize,
        #[arg(long, default_value_t = 200.0)]
        tmax: f64,
        /// Output directory (default: $TACKROUTE_OUT_DIR, else ./out).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write every run's trajectory, not only the first.
        #[arg(long)]
        all_trajectories: bool,
    },
    /// Print the switching map of one mode on one wind-direction plane.
    Regions {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        x3: f64,
        #[arg(long, default_value_t = 1)]
        mode: usize,
    },
    /// Compare a solved value field with the analytic two-leg value.
    OracleCheck {
        #[command(flatten)]
        scenario: ScenarioArg,
        /// Directory holding `value.txt` from `solve`.
        #[arg(long)]
        policy: PathBuf,
        /// Largest accepted relative error.
        #[arg(long, default_value_t = 0.10)]
        tolerance: f64,
    },
    /// Check a scenario file or preset name.
    Validate {
        #[command(flatten)]
        scenario: ScenarioArg,
    },
}

#[derive(Args)]
struct ScenarioArg {
    /// Scenario file, or a preset such as `test1`, `test2:drift=0.3,sigma=0.05`.
    scenario: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum Sweep {
    Jacobi,
    InPlace,
}

fn parse_point(s: &str) -> Result<[f64; 3], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("{t:?} is not a number")))
        .collect::<Result<_, _>>()?;
    v.try_into().map_err(|_| "expected x1,x2,x3".to_string())
}

/// Failure with its exit status.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io { .. } => EXIT_IO,
            _ => EXIT_INVALID,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn invalid(path: &str, message: impl Into<String>) -> Failure {
    Error::Invalid(vec![Violation {
        path: path.into(),
        message: message.into(),
    }])
    .into()
}

fn mode_arg(bundle: &ScenarioBundle, q: usize) -> Result<Mode, Failure> {
    let count = bundle.scenario.modes.count();
    if q == 0 || q > count {
        return Err(invalid("--mode", format!("must be between 1 and {count}")));
    }
    Ok(Mode::new(q))
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure {
        code: EXIT_IO,
        message: format!("cannot create {}: {e}", dir.display()),
    })
}

fn check_grid(bundle: &ScenarioBundle, grid: &tackroute::GridSpec, what: &Path) -> Result<(), Failure> {
    if *grid != bundle.scenario.grid {
        return Err(invalid(
            "grid",
            format!("{} was solved on a different grid", what.display()),
        ));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Validate { scenario } => {
            let b = resolve_scenario(&scenario.scenario)?;
            let [n1, n2, n3] = b.scenario.grid.shape();
            println!(
                "ok: {} ({n1}x{n2}x{n3} nodes, {} modes)",
                scenario.scenario,
                b.scenario.modes.count()
            );
            Ok(())
        }
        Command::Solve {
            scenario,
            out,
            max_iterations,
            tolerance,
            sweep,
            sequential,
        } => {
            let mut b = resolve_scenario(&scenario.scenario)?;
            if let Some(m) = max_iterations {
                b.solver.max_iterations = m;
            }
            if let Some(t) = tolerance {
                b.solver.tolerance = t;
            }
            match sweep {
                Some(Sweep::Jacobi) => b.solver.sweep = SweepMode::Jacobi,
                Some(Sweep::InPlace) => b.solver.sweep = SweepMode::InPlace,
                None => {}
            }
            if sequential {
                b.solver.execution = Execution::Sequential;
            }
            let dir = output_dir(out.as_deref());
            create_dir(&dir)?;
            let sol = solve(&b.scenario, &b.solver)?;
            export_value(&sol.value, &b.scenario.target, dir.join("value.txt"))?;
            export_policy(&sol.policy, &b.scenario.target, dir.join("policy.txt"))?;
            write_manifest(
                &dir,
                "manifest",
                &b,
                &[("command", "solve".into()), ("scenario", scenario.scenario.clone())],
            )?;
            println!(
                "iterations {} residual {:e} converged {}",
                sol.value.iterations, sol.value.residual, sol.value.converged
            );
            println!("wrote {}", dir.display());
            if !sol.converged() {
                return Err(Failure {
                    code: EXIT_NOT_CONVERGED,
                    message: format!(
                        "not converged after {} iterations (residual {:e} > {:e})",
                        sol.value.iterations, sol.value.residual, b.solver.tolerance
                    ),
                });
            }
            Ok(())
        }
        Command::Simulate {
            scenario,
            policy,
            start,
            mode,
            seed,
            runs,
            tmax,
            out,
            all_trajectories,
        } => {
            let b = resolve_scenario(&scenario.scenario)?;
            let q = mode_arg(&b, mode)?;
            if runs == 0 {
                return Err(invalid("--runs", "must be at least 1"));
            }
            if tmax.is_nan() || tmax <= 0.0 {
                return Err(invalid("--tmax", "must be positive"));
            }
            let path = policy.join("policy.txt");
            let pf = import_policy(&path)?;
            check_grid(&b, pf.grid(), &path)?;
            let dir = output_dir(out.as_deref());
            create_dir(&dir)?;
            let s = &b.scenario;
            let summary = mc_stats(s, &pf, start, q, runs, seed, tmax, b.solver.execution)?;
            export_stats(&summary, dir.join("stats.txt"))?;
            let count = if all_trajectories { runs } else { 1 };
            for i in 0..count {
                let sd = seed.wrapping_add(i as u64);
                let tr = simulate(s, &pf, start, q, sd, tmax)?;
                let name = if all_trajectories {
                    format!("trajectory-{sd}.txt")
                } else {
                    "trajectory.txt".to_string()
                };
                export_trajectory(&tr, dir.join(name))?;
            }
            let run_params = [
                ("command", "simulate".to_string()),
                ("scenario", scenario.scenario.clone()),
                ("policy", path.display().to_string()),
                ("start", format!("{:?},{:?},{:?}", start[0], start[1], start[2])),
                ("mode", mode.to_string()),
                ("seed", seed.to_string()),
                ("runs", runs.to_string()),
                ("tmax", format!("{tmax:?}")),
            ];
            write_manifest(&dir, "simulate-manifest", &b, &run_params)?;
            println!(
                "runs {} hit_fraction {:.4} arrival_mean {:.4} switch_mean {:.4} mean_x1 {:.4}",
                runs, summary.hit_fraction, summary.arrival_mean, summary.switch_mean, summary.mean_x1
            );
            println!("wrote {}", dir.display());
            Ok(())
        }
        Command::Regions {
            scenario,
            policy,
            x3,
            mode,
        } => {
            let b = resolve_scenario(&scenario.scenario)?;
            let q = mode_arg(&b, mode)?;
            let path = policy.join("policy.txt");
            let pf = import_policy(&path)?;
            check_grid(&b, pf.grid(), &path)?;
            let map = switching_map(&pf, q, x3).map_err(Error::from)?;
            print!("{}", render(&map, &b));
            let other: Vec<SwitchingMap> = b
                .scenario
                .modes
                .iter()
                .map(|m| switching_map(&pf, m, x3))
                .collect::<Result<_, _>>()
                .map_err(Error::from)?;
            if other.len() == 2 && map.x1.contains(0.0) {
                for y in [0.5, 1.0, 1.5] {
                    if let Ok(w) = triangle_width(&other[0], &other[1], y) {
                        println!("triangle width at x2 = {y}: {w:.4}");
                    }
                }
            }
            Ok(())
        }
        Command::OracleCheck {
            scenario,
            policy,
            tolerance,
        } => {
            let b = resolve_scenario(&scenario.scenario)?;
            let path = policy.join("value.txt");
            let vf = import_value(&path)?;
            check_grid(&b, vf.grid(), &path)?;
            let mut worst: f64 = 0.0;
            println!("start mode value oracle rel_error");
            for x in WINDWARD_STARTS {
                for q in b.scenario.modes.iter() {
                    let oracle = analytic_value(x, q, &b.scenario).map_err(Error::from)?;
                    let v = vf.interpolate(q, x);
                    let rel = (v - oracle).abs() / oracle;
                    worst = worst.max(rel);
                    println!(
                        "({},{},{}) {q} {v:.6} {oracle:.6} {rel:.4}{}",
                        x[0],
                        x[1],
                        x[2],
                        if rel <= tolerance { "" } else { " FAIL" }
                    );
                }
            }
            if worst > tolerance {
                return Err(Failure {
                    code: EXIT_INVALID,
                    message: format!("largest relative error {worst:.4} exceeds {tolerance}"),
                });
            }
            println!("ok: largest relative error {worst:.4}");
            Ok(())
        }
    }
}

/// North-up character map: `.` continue, digit = switch target, `T` target,
/// `#` obstacle.
fn render(map: &SwitchingMap, b: &ScenarioBundle) -> String {
    let mut s = format!(
        "mode {} at x3 = {:.4}: x1 in [{}, {}], x2 in [{}, {}]\n",
        map.mode, map.x3, map.x1.min, map.x1.max, map.x2.min, map.x2.max
    );
    let n1 = map.x1.len();
    for i2 in (0..map.x2.len()).rev() {
        for i1 in 0..n1 {
            let blocked = b
                .scenario
                .obstacles
                .as_ref()
                .is_some_and(|m| m.cells[i1 + n1 * i2]);
            s.push(match map.get(i1, i2) {
                _ if blocked => '#',
                Label::NoSwitch => '.',
                Label::Target => 'T',
                Label::SwitchTo(q) => char::from_digit(q.number() as u32 % 10, 10).unwrap_or('?'),
            });
        }
        s.push('\n');
    }
    s
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
