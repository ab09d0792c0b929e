//! Hybrid dynamics, wind and polar models, costs and grid geometry.

mod grid;
mod polar;

use std::collections::HashSet;
use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use grid::{Axis, GridSpec, ObstacleMask, TargetSpec};
pub use polar::{polar_speed, PolarKind, PolarModel};

use crate::error::DomainError;

/// Discrete mode, numbered from 1 (odd = port tack, even = starboard tack).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Mode(usize);

impl Mode {
    /// # Panics
    /// If `number == 0`.
    pub fn new(number: usize) -> Self {
        assert!(number >= 1, "modes are numbered from 1");
        Mode(number)
    }

    pub fn from_index(index: usize) -> Self {
        Mode(index + 1)
    }

    pub fn number(self) -> usize {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 - 1
    }

    /// `(-1)^q`.
    pub fn tack_sign(self) -> f64 {
        if self.0.is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSet {
    pub labels: Vec<String>,
}

impl ModeSet {
    pub fn tacks() -> Self {
        ModeSet {
            labels: vec!["port".into(), "starboard".into()],
        }
    }

    pub fn count(&self) -> usize {
        self.labels.len()
    }

    pub fn contains(&self, q: Mode) -> bool {
        q.number() <= self.count()
    }

    pub fn iter(&self) -> impl Iterator<Item = Mode> {
        (0..self.count()).map(Mode::from_index)
    }
}

/// State-independent switching costs; `cost(q, q) = 0` means "stay".
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchCostTable {
    n: usize,
    cost: Vec<f64>,
}

impl SwitchCostTable {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let n = rows.len();
        let cost = rows.into_iter().flatten().collect();
        SwitchCostTable { n, cost }
    }

    /// Every actual switch costs `c`.
    pub fn uniform(n: usize, c: f64) -> Self {
        let cost = (0..n * n)
            .map(|k| if k / n == k % n { 0.0 } else { c })
            .collect();
        SwitchCostTable { n, cost }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, from: Mode, to: Mode) -> f64 {
        self.cost[from.index() * self.n + to.index()]
    }

    #[inline]
    pub(crate) fn by_index(&self, from: usize, to: usize) -> f64 {
        self.cost[from * self.n + to]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.cost.chunks(self.n.max(1)).map(|r| r.to_vec()).collect()
    }

    fn is_square(&self) -> bool {
        self.cost.len() == self.n * self.n
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostSpec {
    /// Discount rate λ of the Kružkov-transformed minimum-time cost.
    pub discount: f64,
    /// Stopping cost charged when leaving the horizontal box.
    pub stopping_cost: f64,
    pub switching: SwitchCostTable,
}

/// How the wind direction enters the heading of the boat.
///
/// `AsPublished` uses `(sin(−θ + (−1)^q u), cos(θ + (−1)^q u))`; `Rotation` uses
/// the same angle `−θ + (−1)^q u` in both components, so the velocity is a
/// pure rotation of magnitude `r`. The two coincide at `θ = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeadingConvention {
    AsPublished,
    #[default]
    Rotation,
}

/// Constant-speed wind whose direction `x3` follows `dθ = ā dt + σ̄ dW`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindModel {
    pub mean_speed: f64,
    pub drift: f64,
    pub diffusion: f64,
    pub theta_box: [f64; 2],
    #[serde(default)]
    pub heading: HeadingConvention,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub modes: ModeSet,
    pub wind: WindModel,
    pub polar: PolarModel,
    pub grid: GridSpec,
    pub costs: CostSpec,
    pub target: TargetSpec,
    pub obstacles: Option<ObstacleMask>,
}

impl Scenario {
    pub fn is_deterministic(&self) -> bool {
        self.wind.diffusion == 0.0
    }
}

/// `r(x, s, q, u)`: the polar speed, or exactly zero inside the obstacle region.
pub fn masked_speed(
    polar: &PolarModel,
    mask: Option<&ObstacleMask>,
    x: [f64; 2],
    wind_speed: f64,
    mode: Mode,
    angle: f64,
) -> Result<f64, DomainError> {
    let r = polar_speed(polar, wind_speed, mode, angle)?;
    match mask {
        Some(m) if m.contains(x[0], x[1]) => Ok(0.0),
        _ => Ok(r),
    }
}

/// Heading components `(sin ψ₁, cos ψ₂)` for unit speed.
#[inline]
pub(crate) fn heading(convention: HeadingConvention, theta: f64, mode: Mode, u: f64) -> [f64; 2] {
    let su = mode.tack_sign() * u;
    match convention {
        HeadingConvention::AsPublished => [(-theta + su).sin(), (theta + su).cos()],
        HeadingConvention::Rotation => [(-theta + su).sin(), (-theta + su).cos()],
    }
}

/// Drift `f(x, q, u)` of the hybrid state equation.
pub fn drift(scenario: &Scenario, x: [f64; 3], q: Mode, u: f64) -> Result<[f64; 3], DomainError> {
    if !scenario.modes.contains(q) {
        return Err(DomainError::InvalidMode(q.number()));
    }
    let r = masked_speed(
        &scenario.polar,
        scenario.obstacles.as_ref(),
        [x[0], x[1]],
        scenario.wind.mean_speed,
        q,
        u,
    )?;
    let h = heading(scenario.wind.heading, x[2], q, u);
    Ok([r * h[0], r * h[1], scenario.wind.drift])
}

/// Diffusion column `σ = (0, 0, σ̄)`: only the wind direction is noisy.
pub fn diffusion(scenario: &Scenario, _x: [f64; 3], _q: Mode) -> [f64; 3] {
    [0.0, 0.0, scenario.wind.diffusion]
}

/// A violated invariant, tagged with the path of the offending field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl Violation {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Violation {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Checks every scenario invariant; an empty list means the scenario is valid.
pub fn validate_scenario(s: &Scenario) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |p: &str, m: &str| out.push(Violation::new(p, m));

    // modes
    let n = s.modes.count();
    if n == 0 {
        push("modes.labels", "at least one mode required");
    }
    let unique: HashSet<&String> = s.modes.labels.iter().collect();
    if unique.len() != n {
        push("modes.labels", "labels must be unique");
    }

    // switching costs
    let c = &s.costs.switching;
    if c.size() != n || !c.is_square() {
        push("costs.switch", "matrix must be square with one row per mode");
    } else {
        if c.cost.iter().any(|v| !v.is_finite() || *v < 0.0) {
            push("costs.switch", "entries must be finite and nonnegative");
        }
        if (0..n).any(|i| c.by_index(i, i) != 0.0) {
            push("costs.switch", "diagonal must be zero");
        }
        let off_min = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| c.by_index(i, j))
            .fold(f64::INFINITY, f64::min);
        if n >= 2 && !(off_min > 0.0) {
            push("costs.switch", "switch cost infimum not positive");
        }
        let strict = (0..n).all(|a| {
            (0..n).all(|b| {
                (0..n).all(|k| {
                    a == b
                        || b == k
                        || a == k
                        || c.by_index(a, k) < c.by_index(a, b) + c.by_index(b, k)
                })
            })
        });
        if !strict {
            push("costs.switch", "triangle inequality not strict");
        }
    }
    if !(s.costs.discount > 0.0) || !s.costs.discount.is_finite() {
        push("costs.discount", "must be positive");
    }
    if !(s.costs.stopping_cost > 0.0) || !s.costs.stopping_cost.is_finite() {
        push("costs.stopping_cost", "must be positive");
    }

    // wind
    let w = &s.wind;
    if !(w.diffusion >= 0.0) || !w.diffusion.is_finite() {
        push("wind.diffusion", "must be nonnegative");
    }
    if !w.drift.is_finite() {
        push("wind.drift", "must be finite");
    }
    if !(w.mean_speed >= 0.0) || !w.mean_speed.is_finite() {
        push("wind.mean_speed", "must be nonnegative");
    }
    if !(w.theta_box[0] < w.theta_box[1]) {
        push("wind.theta", "theta box must be nonempty");
    }

    // grid
    for (k, name) in ["grid.x1", "grid.x2", "grid.x3"].iter().enumerate() {
        let a = &s.grid.axes[k];
        if !(a.step > 0.0) || !a.step.is_finite() {
            push(name, "step must be positive");
        } else if !(a.max > a.min) {
            push(name, "axis must contain at least two nodes");
        } else if !a.is_integral() {
            push(name, "extent must be an integer multiple of the step");
        }
    }
    if !(s.grid.dt > 0.0) || !s.grid.dt.is_finite() {
        push("grid.dt", "must be positive");
    }
    let x3 = s.grid.axes[2];
    if (x3.min - w.theta_box[0]).abs() > 1e-12 || (x3.max - w.theta_box[1]).abs() > 1e-12 {
        push("grid.x3", "x3 axis must span the wind theta box");
    }

    // polar
    let p = &s.polar;
    let [ulo, uhi] = p.control;
    if !(ulo >= 0.0 && uhi <= PI + 1e-12 && ulo <= uhi) {
        push("polar.control", "control interval must lie in [0, π]");
    }
    if let Some(us) = p.frozen_angle {
        if !p.in_control_interval(us) {
            push("polar.frozen_angle", "frozen angle outside control interval");
        }
    }
    match &p.kind {
        PolarKind::Constant { speed } => {
            if !(*speed >= 0.0) {
                push("polar.speed", "must be nonnegative");
            }
            if p.frozen_angle.is_none() {
                push("polar.frozen_angle", "constant polar requires a frozen angle");
            }
        }
        PolarKind::Parabolic { coefficient, peak } => {
            if !(*coefficient >= 0.0) {
                push("polar.coefficient", "must be nonnegative");
            }
            if !(*peak > 0.0 && *peak <= PI) {
                push("polar.peak", "must lie in (0, π]");
            }
        }
        PolarKind::Tabulated { angles, speeds } => {
            if angles.len() != speeds.len() || angles.len() < 2 {
                push("polar.angles", "need at least two (angle, speed) pairs of equal length");
            } else {
                if !angles.windows(2).all(|w| w[1] > w[0]) {
                    push("polar.angles", "angles must be strictly increasing");
                }
                if speeds.iter().any(|v| !(*v >= 0.0)) {
                    push("polar.speeds", "speeds must be nonnegative");
                }
                if angles[0] != 0.0 || speeds[0] != 0.0 {
                    push("polar.angles", "table must start at angle 0 with speed 0");
                }
                if angles[0] > ulo || angles[angles.len() - 1] < uhi {
                    push("polar.angles", "table must cover the control interval");
                }
            }
        }
    }

    // target
    let t = &s.target;
    if !(t.radius > 0.0) {
        push("target.radius", "must be positive");
    } else {
        let (a1, a2) = (s.grid.axes[0], s.grid.axes[1]);
        let n1 = t.center[0].clamp(a1.min, a1.max);
        let n2 = t.center[1].clamp(a2.min, a2.max);
        let d = ((t.center[0] - n1).powi(2) + (t.center[1] - n2).powi(2)).sqrt();
        if d >= t.radius {
            push("target", "target disc does not intersect the domain");
        }
    }

    // obstacles
    if let Some(m) = &s.obstacles {
        let (a1, a2) = (s.grid.axes[0], s.grid.axes[1]);
        if m.dims() != (a1.len(), a2.len()) || m.cells.len() != a1.len() * a2.len() {
            push("obstacles", "mask dimensions do not match the (x1, x2) grid");
        } else {
            let hit = (0..a2.len()).any(|i2| {
                (0..a1.len()).any(|i1| {
                    m.node(i1, i2) && t.covers_node(a1.coord(i1), a2.coord(i2), a1.step)
                })
            }) || m.contains(t.center[0], t.center[1]);
            if hit {
                push("obstacles", "target disc intersects the obstacle region");
            }
        }
    }

    out
}

#[cfg(test)]
pub(crate) mod tests {
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    use super::*;

    pub(crate) fn frozen_scenario() -> Scenario {
        Scenario {
            modes: ModeSet::tacks(),
            wind: WindModel {
                mean_speed: 1.0,
                drift: 0.0,
                diffusion: 0.0,
                theta_box: [-1.0, 1.0],
                heading: HeadingConvention::AsPublished,
            },
            polar: PolarModel {
                kind: PolarKind::Constant { speed: 0.05 },
                control: [0.0, FRAC_PI_2],
                frozen_angle: Some(FRAC_PI_4),
            },
            grid: GridSpec::new(
                Axis::new(-1.4, 1.4, 0.1),
                Axis::new(0.0, 2.0, 0.1),
                Axis::new(-1.0, 1.0, 0.1),
                0.1,
            ),
            costs: CostSpec {
                discount: 1e-6,
                stopping_cost: 100.0,
                switching: SwitchCostTable::uniform(2, 2.0),
            },
            target: TargetSpec {
                center: [0.0, 1.8],
                radius: 0.04,
            },
            obstacles: None,
        }
    }

    #[test]
    fn drift_examples() {
        let s = frozen_scenario();
        let f = drift(&s, [0.0, 0.0, 0.0], Mode::new(2), FRAC_PI_4).unwrap();
        assert_abs_diff_eq!(f[0], 0.0353553, epsilon = 1e-7);
        assert_abs_diff_eq!(f[1], 0.0353553, epsilon = 1e-7);
        assert_eq!(f[2], 0.0);
        let f = drift(&s, [0.0, 0.0, 0.0], Mode::new(1), FRAC_PI_4).unwrap();
        assert_abs_diff_eq!(f[0], -0.0353553, epsilon = 1e-7);
        assert_abs_diff_eq!(f[1], 0.0353553, epsilon = 1e-7);

        let mut p = s.clone();
        p.polar.kind = PolarKind::standard_parabola();
        p.polar.frozen_angle = None;
        p.wind.drift = 0.15;
        for q in [1, 2] {
            let f = drift(&p, [0.3, 0.4, 0.2], Mode::new(q), 0.0).unwrap();
            assert_eq!(f, [0.0, 0.0, 0.15]);
        }
    }

    #[test]
    fn drift_rejects_unknown_mode_and_angle() {
        let s = frozen_scenario();
        assert_eq!(
            drift(&s, [0.0; 3], Mode::new(3), 0.5),
            Err(DomainError::InvalidMode(3))
        );
        assert!(drift(&s, [0.0; 3], Mode::new(1), 2.0).is_err());
    }

    #[test]
    fn diffusion_examples() {
        let mut s = frozen_scenario();
        for sigma in [0.02, 0.0, 0.1] {
            s.wind.diffusion = sigma;
            assert_eq!(diffusion(&s, [0.5, 0.5, 0.5], Mode::new(2)), [0.0, 0.0, sigma]);
        }
    }

    #[test]
    fn masked_speed_examples() {
        let s = frozen_scenario();
        let a = s.grid.axes;
        let mask = ObstacleMask::from_fn(a[0], a[1], |x1, _| x1 > 0.5);
        let q = Mode::new(1);
        assert_eq!(masked_speed(&s.polar, Some(&mask), [1.0, 1.0], 1.0, q, FRAC_PI_4).unwrap(), 0.0);
        assert_eq!(masked_speed(&s.polar, Some(&mask), [0.0, 1.0], 1.0, q, FRAC_PI_4).unwrap(), 0.05);
        assert_eq!(masked_speed(&s.polar, None, [1.0, 1.0], 1.0, q, FRAC_PI_4).unwrap(), 0.05);
    }

    #[test]
    fn validate_accepts_reference_and_flags_costs() {
        let s = frozen_scenario();
        assert!(validate_scenario(&s).is_empty(), "{:?}", validate_scenario(&s));

        let mut z = s.clone();
        z.costs.switching = SwitchCostTable::from_rows(vec![vec![0.0, 0.0], vec![2.0, 0.0]]);
        let v = validate_scenario(&z);
        assert!(v.iter().any(|v| v.message == "switch cost infimum not positive"));

        let mut t = s.clone();
        t.modes.labels.push("reach".into());
        t.costs.switching = SwitchCostTable::from_rows(vec![
            vec![0.0, 1.0, 2.0],
            vec![1.0, 0.0, 1.0],
            vec![2.0, 1.0, 0.0],
        ]);
        let v = validate_scenario(&t);
        assert!(v.iter().any(|v| v.message == "triangle inequality not strict"), "{v:?}");
    }

    #[test]
    fn validate_flags_other_invariants() {
        let mut s = frozen_scenario();
        s.wind.diffusion = -0.1;
        s.polar.frozen_angle = None;
        s.target.center = [5.0, 5.0];
        s.modes.labels = vec!["a".into(), "a".into()];
        let paths: Vec<String> = validate_scenario(&s).into_iter().map(|v| v.path).collect();
        for p in ["wind.diffusion", "polar.frozen_angle", "target", "modes.labels"] {
            assert!(paths.iter().any(|x| x == p), "missing {p} in {paths:?}");
        }
    }

    #[test]
    fn validate_flags_obstacle_on_target() {
        let mut s = frozen_scenario();
        let a = s.grid.axes;
        s.obstacles = Some(ObstacleMask::from_fn(a[0], a[1], |_, _| true));
        assert!(validate_scenario(&s).iter().any(|v| v.path == "obstacles"));
    }

    proptest! {
        #[test]
        fn tack_mirror_symmetry(theta in -1.0f64..1.0, u in 0.0f64..FRAC_PI_2) {
            let mut s = frozen_scenario();
            s.polar.kind = PolarKind::standard_parabola();
            s.polar.frozen_angle = None;
            for conv in [HeadingConvention::AsPublished, HeadingConvention::Rotation] {
                s.wind.heading = conv;
                let a = drift(&s, [0.1, 0.2, -theta], Mode::new(2), u).unwrap();
                let b = drift(&s, [0.1, 0.2, theta], Mode::new(1), u).unwrap();
                prop_assert!((a[0] + b[0]).abs() < 1e-15);
                prop_assert!((a[1] - b[1]).abs() < 1e-15);
            }
        }

        #[test]
        fn rotation_drift_has_polar_magnitude(theta in -1.0f64..1.0, u in 0.0f64..FRAC_PI_2, q in 1usize..=2) {
            let mut s = frozen_scenario();
            s.polar.kind = PolarKind::standard_parabola();
            s.polar.frozen_angle = None;
            s.wind.heading = HeadingConvention::Rotation;
            let f = drift(&s, [0.0, 0.5, theta], Mode::new(q), u).unwrap();
            let r = polar_speed(&s.polar, 1.0, Mode::new(q), u).unwrap();
            prop_assert!((f[0].hypot(f[1]) - r).abs() < 1e-15);
        }

        #[test]
        fn parabola_nonnegative_inside(u in 0.0f64..FRAC_PI_2) {
            let p = PolarModel { kind: PolarKind::standard_parabola(), control: [0.0, FRAC_PI_2], frozen_angle: None };
            let r = polar_speed(&p, 1.0, Mode::new(1), u).unwrap();
            prop_assert!(r >= 0.0);
            if u > 1e-9 && u < FRAC_PI_2 - 1e-9 { prop_assert!(r > 0.0); }
        }

        #[test]
        fn masked_speed_never_exceeds_polar(x1 in -1.4f64..1.4, x2 in 0.0f64..2.0, u in 0.0f64..FRAC_PI_2) {
            let s = frozen_scenario();
            let a = s.grid.axes;
            let mask = ObstacleMask::from_fn(a[0], a[1], |p, q| (p * 7.0).sin() * (q * 5.0).cos() > 0.3);
            let mut p = s.polar.clone();
            p.kind = PolarKind::standard_parabola();
            p.frozen_angle = None;
            let q = Mode::new(1);
            let m = masked_speed(&p, Some(&mask), [x1, x2], 1.0, q, u).unwrap();
            let r = polar_speed(&p, 1.0, q, u).unwrap();
            prop_assert!(m <= r);
            if !mask.contains(x1, x2) { prop_assert_eq!(m, r); }
        }
    }
}
