//! Diagnostics derived from solved fields: switching maps, tacking-triangle
//! widths, lay lines, and the closed-form value of the deterministic
//! two-leg problem used as an oracle.

use std::fmt;

use crate::domain::{heading, Axis, Mode, ObstacleMask, PolarKind, Scenario};
use crate::error::DomainError;
use crate::solver::{Action, PolicyField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    NoSwitch,
    SwitchTo(Mode),
    /// Node frozen inside the target.
    Target,
}

impl Label {
    pub fn is_switch(self) -> bool {
        matches!(self, Label::SwitchTo(_))
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::NoSwitch => f.write_str("none"),
            Label::SwitchTo(q) => write!(f, "switch:{q}"),
            Label::Target => f.write_str("target"),
        }
    }
}

/// Switch/no-switch labels on one `x3` plane of one mode.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchingMap {
    pub mode: Mode,
    /// Coordinate of the plane actually used.
    pub x3: f64,
    pub x1: Axis,
    pub x2: Axis,
    /// `x1` fastest.
    pub labels: Vec<Label>,
}

impl SwitchingMap {
    pub fn get(&self, i1: usize, i2: usize) -> Label {
        self.labels[i1 + self.x1.len() * i2]
    }

    pub fn switch_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_switch()).count()
    }
}

/// Relabels the policy plane nearest to `x3`.
pub fn switching_map(policy: &PolicyField, q: Mode, x3: f64) -> Result<SwitchingMap, DomainError> {
    let grid = policy.grid();
    if !grid.x3().contains(x3) {
        return Err(DomainError::Precondition(format!(
            "x3 = {x3} outside [{}, {}]",
            grid.x3().min,
            grid.x3().upper()
        )));
    }
    if q.index() >= policy.modes() {
        return Err(DomainError::InvalidMode(q.number()));
    }
    let i3 = grid.x3().nearest(x3);
    let (n1, n2) = (grid.x1().len(), grid.x2().len());
    let mut labels = Vec::with_capacity(n1 * n2);
    for i2 in 0..n2 {
        for i1 in 0..n1 {
            labels.push(if policy.is_frozen(i1, i2) {
                Label::Target
            } else {
                match policy.get(q, [i1, i2, i3]) {
                    Action::Switch(to) => Label::SwitchTo(to),
                    Action::Continue(_) => Label::NoSwitch,
                }
            });
        }
    }
    Ok(SwitchingMap {
        mode: q,
        x3: grid.x3().coord(i3),
        x1: *grid.x1(),
        x2: *grid.x2(),
        labels,
    })
}

/// Width in `x1` units of the maximal band of nodes on row `x2` that contains
/// `x1 = 0` and is switch-free in both maps. Zero when the central node
/// switches in either map or lies in the target.
pub fn triangle_width(a: &SwitchingMap, b: &SwitchingMap, x2: f64) -> Result<f64, DomainError> {
    if !a.x2.contains(x2) {
        return Err(DomainError::Precondition(format!("row x2 = {x2} outside the domain")));
    }
    if a.x1 != b.x1 || a.x2 != b.x2 {
        return Err(DomainError::Precondition("maps on different grids".into()));
    }
    if !a.x1.contains(0.0) {
        return Err(DomainError::Precondition("x1 = 0 outside the domain".into()));
    }
    let i2 = a.x2.nearest(x2);
    let c = a.x1.nearest(0.0);
    let free = |i1: usize| !a.get(i1, i2).is_switch() && !b.get(i1, i2).is_switch();
    if a.get(c, i2) == Label::Target || !free(c) {
        return Ok(0.0);
    }
    let mut lo = c;
    while lo > 0 && free(lo - 1) {
        lo -= 1;
    }
    let mut hi = c;
    while hi + 1 < a.x1.len() && free(hi + 1) {
        hi += 1;
    }
    Ok(a.x1.coord(hi) - a.x1.coord(lo))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleProfile {
    pub x2: Vec<f64>,
    pub width: Vec<f64>,
}

/// [`triangle_width`] on every row of the grid.
pub fn triangle_profile(a: &SwitchingMap, b: &SwitchingMap) -> Result<TriangleProfile, DomainError> {
    let rows: Vec<f64> = (0..a.x2.len()).map(|i| a.x2.coord(i)).collect();
    let width = rows
        .iter()
        .map(|&y| triangle_width(a, b, y))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TriangleProfile { x2: rows, width })
}

fn frozen_constant(scenario: &Scenario) -> Result<(f64, f64), DomainError> {
    let fail = |m: &str| Err(DomainError::Precondition(m.into()));
    if scenario.wind.diffusion != 0.0 || scenario.wind.drift != 0.0 {
        return fail("wind must be deterministic and drift-free");
    }
    if scenario.obstacles.as_ref().is_some_and(|m| m.count() > 0) {
        return fail("obstacles not supported");
    }
    let Some(u) = scenario.polar.frozen_angle else {
        return fail("frozen steering angle required");
    };
    let PolarKind::Constant { speed } = scenario.polar.kind else {
        return fail("constant polar speed required");
    };
    if scenario.modes.count() != 2 {
        return fail("exactly two tacks required");
    }
    Ok((u, speed))
}

/// Velocity of each tack at wind direction `x3`.
fn tack_velocities(scenario: &Scenario, x3: f64, u: f64, r: f64) -> [[f64; 2]; 2] {
    let v = |q: usize| {
        let h = heading(scenario.wind.heading, x3, Mode::from_index(q), u);
        [r * h[0], r * h[1]]
    };
    [v(0), v(1)]
}

/// Closed-form discounted cost from `x0` in mode `q0` for deterministic,
/// frozen-angle, constant-speed dynamics.
///
/// The displacement to the target center is split into nonnegative legs
/// along the two tack velocities; the current tack is sailed first and the
/// single switch happens at the lay line. The final leg is shortened by
/// `radius / r̄`. When no such split exists, the best single leg whose ray
/// meets the disc is used, and `+∞` when none does.
pub fn analytic_value(x0: [f64; 3], q0: Mode, scenario: &Scenario) -> Result<f64, DomainError> {
    let (u, r) = frozen_constant(scenario)?;
    if !scenario.modes.contains(q0) {
        return Err(DomainError::InvalidMode(q0.number()));
    }
    let lambda = scenario.costs.discount;
    let target = &scenario.target;
    let d = [target.center[0] - x0[0], target.center[1] - x0[1]];
    if target.contains(x0[0], x0[1]) {
        return Ok(0.0);
    }
    let kruzkov = |t: f64| -(-lambda * t).exp_m1() / lambda;
    let cost = |from: usize, to: usize| scenario.costs.switching.by_index(from, to);
    let v = tack_velocities(scenario, x0[2], u, r);

    let det = v[0][0] * v[1][1] - v[0][1] * v[1][0];
    if det.abs() > 1e-15 {
        let t = [
            (d[0] * v[1][1] - d[1] * v[1][0]) / det,
            (v[0][0] * d[1] - v[0][1] * d[0]) / det,
        ];
        let tol = 1e-9 * (t[0].abs() + t[1].abs());
        let t = t.map(|x| if x.abs() <= tol { 0.0 } else { x });
        if t[0] >= 0.0 && t[1] >= 0.0 {
            let (first, other) = (q0.index(), 1 - q0.index());
            let total = (t[0] + t[1] - target.radius / r).max(0.0);
            let mut j = kruzkov(total);
            if t[other] > 0.0 {
                let ts = t[first];
                j += cost(first, other) * (-lambda * ts).exp();
            }
            return Ok(j);
        }
    }

    // Single legs that pass through the disc.
    let mut best = f64::INFINITY;
    for (q, vq) in v.iter().enumerate() {
        let dir = [vq[0] / r, vq[1] / r];
        let along = d[0] * dir[0] + d[1] * dir[1];
        let off2 = (d[0] * d[0] + d[1] * d[1]) - along * along;
        let rad2 = target.radius * target.radius;
        if along <= 0.0 || off2 > rad2 {
            continue;
        }
        let time = (along - (rad2 - off2).max(0.0).sqrt()) / r;
        let mut j = kruzkov(time);
        if q != q0.index() {
            j += cost(q0.index(), q);
        }
        best = best.min(j);
    }
    Ok(best)
}

/// Half-line from the target center along `−d_q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayLine {
    pub mode: Mode,
    pub origin: [f64; 2],
    /// Unit direction pointing away from the target.
    pub direction: [f64; 2],
}

impl LayLine {
    /// `dx2/dx1` of the supporting line (infinite when vertical).
    pub fn slope(&self) -> f64 {
        self.direction[1] / self.direction[0]
    }

    /// Distance from `x` to the supporting line.
    pub fn distance(&self, x: [f64; 2]) -> f64 {
        let d = [x[0] - self.origin[0], x[1] - self.origin[1]];
        (d[0] * self.direction[1] - d[1] * self.direction[0]).abs()
    }
}

/// Lay lines at wind direction `x3 = 0`.
pub fn lay_lines(scenario: &Scenario) -> Result<[LayLine; 2], DomainError> {
    lay_lines_at(scenario, 0.0)
}

pub fn lay_lines_at(scenario: &Scenario, x3: f64) -> Result<[LayLine; 2], DomainError> {
    let (u, r) = frozen_constant(scenario)?;
    let v = tack_velocities(scenario, x3, u, r);
    let line = |q: usize| LayLine {
        mode: Mode::from_index(q),
        origin: scenario.target.center,
        direction: [-v[q][0] / r, -v[q][1] / r],
    };
    Ok([line(0), line(1)])
}

/// Signed distance from `x` to the outside of the cone between the two lay
/// lines: positive inside the cone, negative outside.
pub fn cone_depth(lines: &[LayLine; 2], x: [f64; 2]) -> f64 {
    // Inside means `x − c = s0 e0 + s1 e1` with both coefficients ≥ 0.
    let [e0, e1] = [lines[0].direction, lines[1].direction];
    let c = lines[0].origin;
    let d = [x[0] - c[0], x[1] - c[1]];
    let det = e0[0] * e1[1] - e0[1] * e1[0];
    let s0 = (d[0] * e1[1] - d[1] * e1[0]) / det;
    let s1 = (e0[0] * d[1] - e0[1] * d[0]) / det;
    if s0 >= 0.0 && s1 >= 0.0 {
        lines[0].distance(x).min(lines[1].distance(x))
    } else {
        -lines[0].distance(x).min(lines[1].distance(x))
    }
}

/// Deterministic Hamiltonian `H(x, q, p) = max_u { −f(x, q, u)·p } − 1` over
/// the given control samples. The drift component in `x3` is included.
pub fn hamiltonian(scenario: &Scenario, x: [f64; 3], q: Mode, p: [f64; 3], controls: &[f64]) -> Result<f64, DomainError> {
    let mut best = f64::NEG_INFINITY;
    for &u in controls {
        let f = crate::domain::drift(scenario, x, q, u)?;
        best = best.max(-(f[0] * p[0] + f[1] * p[1] + f[2] * p[2]));
    }
    Ok(best - 1.0)
}

/// How far `x` lies inside the obstacle region: the Euclidean distance to
/// the nearest free cell (cells are the Voronoi squares of the mask nodes).
/// Zero for free points.
pub fn obstacle_depth(mask: &ObstacleMask, x: [f64; 2]) -> f64 {
    if !mask.contains(x[0], x[1]) {
        return 0.0;
    }
    let (h1, h2) = (mask.x1.step / 2.0, mask.x2.step / 2.0);
    let (n1, n2) = mask.dims();
    let mut best = f64::INFINITY;
    for i2 in 0..n2 {
        for i1 in 0..n1 {
            if mask.node(i1, i2) {
                continue;
            }
            let c = [mask.x1.coord(i1), mask.x2.coord(i2)];
            let dx = ((x[0] - c[0]).abs() - h1).max(0.0);
            let dy = ((x[1] - c[1]).abs() - h2).max(0.0);
            best = best.min((dx * dx + dy * dy).sqrt());
        }
    }
    best
}
