use crate::domain::{diffusion, heading, Mode, Scenario};
use crate::parallel::{map_chunks_mut, Execution};

use super::value::{Lattice, ValueField};
use super::{SolverConfig, SweepMode};

/// One interpolation point of the semi-Lagrangian stencil, relative to the
/// node it is evaluated at. On a uniform grid the foot point `x_j + Δt f` has
/// the same cell offset and weights for every node of an `x3` plane, so the
/// bilinear part is stored as column offsets and the `x3` part as absolute
/// planes (the `x3` axis is clamped, not shifted).
#[derive(Debug, Clone, Copy)]
struct Probe {
    cols: [isize; 4],
    colw: [f64; 4],
    ncol: usize,
    /// Valid `i1` and `i2` ranges (inclusive); outside them the point has left
    /// the box and takes the stopping cost.
    lo: [isize; 2],
    hi: [isize; 2],
    planes: [usize; 2],
    planew: [f64; 2],
    nplane: usize,
    /// How many of the `2d` stencil points coincide with this one.
    mult: f64,
}

/// Cell shift and weights of a displacement `d` along an axis of step `h`.
fn split(d: f64, h: f64) -> (isize, f64) {
    let mut s = d / h;
    let r = s.round();
    if (s - r).abs() < 1e-9 {
        s = r;
    }
    let f = s.floor();
    (f as isize, s - f)
}

impl Probe {
    fn new(lat: &Lattice, d: [f64; 2], x3: f64, mult: f64) -> Probe {
        let n1 = lat.ax[0].n as isize;
        let (s1, t1) = split(d[0], lat.ax[0].step);
        let (s2, t2) = split(d[1], lat.ax[1].step);
        let mut p = Probe {
            cols: [0; 4],
            colw: [0.0; 4],
            ncol: 0,
            lo: [-s1, -s2],
            hi: [
                lat.ax[0].n as isize - 1 - s1 - (t1 > 0.0) as isize,
                lat.ax[1].n as isize - 1 - s2 - (t2 > 0.0) as isize,
            ],
            planes: [0; 2],
            planew: [0.0; 2],
            nplane: 0,
            mult,
        };
        for (d2, w2) in [(0isize, 1.0 - t2), (1, t2)] {
            if w2 == 0.0 {
                continue;
            }
            for (d1, w1) in [(0isize, 1.0 - t1), (1, t1)] {
                if w1 == 0.0 {
                    continue;
                }
                p.cols[p.ncol] = (s1 + d1) + n1 * (s2 + d2);
                p.colw[p.ncol] = w1 * w2;
                p.ncol += 1;
            }
        }
        let (i3, t3) = lat.ax[2].locate(x3);
        let plane = lat.plane();
        for (k, w) in [(i3, 1.0 - t3), (i3 + 1, t3)] {
            if w != 0.0 {
                p.planes[p.nplane] = k * plane;
                p.planew[p.nplane] = w;
                p.nplane += 1;
            }
        }
        p
    }

    #[inline(always)]
    fn value(&self, slice: &[f64], outside: f64, i1: isize, i2: isize, col: isize) -> f64 {
        if i1 < self.lo[0] || i1 > self.hi[0] || i2 < self.lo[1] || i2 > self.hi[1] {
            return outside;
        }
        let mut acc = 0.0;
        for j in 0..self.nplane {
            let base = self.planes[j] as isize + col;
            let mut s = 0.0;
            for k in 0..self.ncol {
                s += self.colw[k] * slice[(base + self.cols[k]) as usize];
            }
            acc += self.planew[j] * s;
        }
        acc
    }
}

/// Precomputed discrete operators of the fixed-point scheme
/// `V = min(N V, Σ(V))` on one scenario grid.
///
/// Everything that does not depend on the value field is tabulated once:
/// the control samples, the interpolation stencils per `(mode, x3 plane,
/// control)`, the obstacle and target columns, and the constants `Δt`, `e^{−λΔt}`.
#[derive(Debug, Clone)]
pub struct Scheme {
    pub(crate) lat: Lattice,
    pub(crate) grid: crate::domain::GridSpec,
    pub(crate) modes: usize,
    pub(crate) controls: Vec<f64>,
    /// Indexed `((q * n3 + i3) * n_u + k) * per + p`.
    probes: Vec<Probe>,
    /// Zero-displacement stencils for obstacle nodes, indexed `i3 * per + p`.
    still: Vec<Probe>,
    /// Distinct stencil points per foot point.
    per: usize,
    pub(crate) dt: f64,
    pub(crate) gamma: f64,
    pub(crate) vmax: f64,
    pub(crate) outside: f64,
    pub(crate) frozen: Vec<bool>,
    blocked: Vec<bool>,
    costs: Vec<f64>,
    pub(crate) tie_epsilon: f64,
}

/// Dimension of the continuous state.
const DIM: usize = 3;

/// Stencil points `δ±_i − x_j` for displacement `d` as `(dx1, dx2, dx3, count)`,
/// with coincident points merged.
fn stencil(d: [f64; 3], spread: [f64; 3]) -> Vec<([f64; 3], f64)> {
    let mut pts: Vec<([f64; 3], f64)> = vec![(d, 0.0)];
    for i in 0..DIM {
        let h = spread[i];
        if h == 0.0 {
            pts[0].1 += 2.0;
        } else {
            for sgn in [1.0, -1.0] {
                let mut p = d;
                p[i] += sgn * h;
                pts.push((p, 1.0));
            }
        }
    }
    pts
}

impl Scheme {
    pub fn new(scenario: &Scenario, config: &SolverConfig) -> Self {
        let lat = Lattice::new(&scenario.grid);
        let modes = scenario.modes.count();
        let controls = scenario.polar.control_samples(config.control_samples);
        let n3 = lat.ax[2].n;
        let dt = scenario.grid.dt;

        let sigma = diffusion(scenario, [0.0; 3], Mode::new(1));
        let root = (DIM as f64 * dt).sqrt();
        let spread = [root * sigma[0], root * sigma[1], root * sigma[2]];
        let dx3 = dt * scenario.wind.drift;
        let per = stencil([0.0; 3], spread).len();

        let probes_for = |d: [f64; 2], i3: usize| {
            let x3 = lat.ax[2].coord(i3);
            stencil([d[0], d[1], dx3], spread)
                .into_iter()
                .map(move |(p, m)| Probe::new(&lat, [p[0], p[1]], x3 + p[2], m))
        };
        let mut probes = Vec::with_capacity(modes * n3 * controls.len() * per);
        for q in 0..modes {
            let mode = Mode::from_index(q);
            for i3 in 0..n3 {
                let theta = lat.ax[2].coord(i3);
                for &u in &controls {
                    let r = scenario.polar.raw_speed(u);
                    let h = heading(scenario.wind.heading, theta, mode, u);
                    probes.extend(probes_for([dt * r * h[0], dt * r * h[1]], i3));
                }
            }
        }
        let still = (0..n3).flat_map(|i3| probes_for([0.0, 0.0], i3)).collect();

        let gamma = (-scenario.costs.discount * dt).exp();
        let vmax = initial_bound(dt, scenario.costs.discount);

        let blocked = match &scenario.obstacles {
            Some(m) => m.cells.clone(),
            None => vec![false; lat.plane()],
        };
        let costs = (0..modes)
            .flat_map(|a| (0..modes).map(move |b| (a, b)))
            .map(|(a, b)| scenario.costs.switching.by_index(a, b))
            .collect();

        Scheme {
            lat,
            grid: scenario.grid,
            modes,
            controls,
            probes,
            still,
            per,
            dt,
            gamma,
            vmax,
            outside: scenario.costs.stopping_cost,
            frozen: lat.target_columns(&scenario.target),
            blocked,
            costs,
            tie_epsilon: config.tie_epsilon,
        }
    }

    pub fn controls(&self) -> &[f64] {
        &self.controls
    }

    /// Upper bound `Δt / (1 − e^{−λΔt})` of every iterate; also the initial value
    /// off the target.
    pub fn initial_bound(&self) -> f64 {
        self.vmax
    }

    /// `V₀`: zero on target columns, [`Self::initial_bound`] elsewhere.
    pub fn initial_field(&self) -> ValueField {
        let n = self.lat.spatial();
        let plane = self.lat.plane();
        let mut values = vec![self.vmax; self.modes * n];
        for (k, v) in values.iter_mut().enumerate() {
            if self.frozen[(k % n) % plane] {
                *v = 0.0;
            }
        }
        ValueField {
            grid: self.grid,
            lat: self.lat,
            modes: self.modes,
            values,
            frozen: self.frozen.clone(),
            outside: self.outside,
            iterations: 0,
            residual: f64::INFINITY,
            converged: false,
        }
    }

    /// `N V(x_j, q) = min_{q'} { V(x_j, q') + C(q, q') }`, stay included at zero cost.
    pub fn switch_operator(&self, v: &ValueField, node: [usize; 3], q: Mode) -> f64 {
        let j = self.lat.index(node[0], node[1], node[2]);
        self.switch_at(&v.values, j, q.index()).0
    }

    /// `Σ(x_j, q, V)` and the minimizing control.
    pub fn sl_operator(&self, v: &ValueField, node: [usize; 3], q: Mode) -> (f64, f64) {
        let (val, k) = self.sl_at(v.mode_slice(q), q.index(), node);
        (val, self.controls[k])
    }

    /// One Jacobi application of `S(V) = min(N V, Σ(V))`, returning `(S(V), ‖S(V) − V‖∞)`.
    pub fn bellman_update(&self, v: &ValueField, exec: Execution) -> (ValueField, f64) {
        let mut next = v.clone();
        let res = self.jacobi_into(&v.values, &mut next.values, exec);
        (next, res)
    }

    /// Applies the update in place in lexicographic node order (mode, x3, x2,
    /// x1), each node reading the latest values. Returns the sup-norm change.
    pub fn gauss_seidel(&self, v: &mut ValueField) -> f64 {
        let [n1, n2, n3] = [self.lat.ax[0].n, self.lat.ax[1].n, self.lat.ax[2].n];
        let n = self.lat.spatial();
        let mut res: f64 = 0.0;
        for q in 0..self.modes {
            for i3 in 0..n3 {
                for i2 in 0..n2 {
                    for i1 in 0..n1 {
                        let new = self.node_update(&v.values, q, [i1, i2, i3]);
                        let k = q * n + self.lat.index(i1, i2, i3);
                        res = res.max((new - v.values[k]).abs());
                        v.values[k] = new;
                    }
                }
            }
        }
        res
    }

    pub(crate) fn sweep(&self, mode: SweepMode, cur: &mut ValueField, next: &mut ValueField, exec: Execution) -> f64 {
        match mode {
            SweepMode::Jacobi => {
                let r = self.jacobi_into(&cur.values, &mut next.values, exec);
                std::mem::swap(cur, next);
                r
            }
            SweepMode::InPlace => self.gauss_seidel(cur),
        }
    }

    /// Plane by plane, controls in the outer loop so each stencil is loaded
    /// once per plane. Node results equal [`Self::node_update`] bit for bit.
    fn jacobi_into(&self, cur: &[f64], out: &mut [f64], exec: Execution) -> f64 {
        let [n1, n2, n3] = [self.lat.ax[0].n, self.lat.ax[1].n, self.lat.ax[2].n];
        let plane = self.lat.plane();
        let n = self.lat.spatial();
        let nu = self.controls.len();
        let res = map_chunks_mut(exec, out, plane, |c, chunk| {
            let q = c / n3;
            let i3 = c % n3;
            let base = q * n + i3 * plane;
            let slice = &cur[q * n..(q + 1) * n];
            let mut best = vec![f64::INFINITY; plane];
            let row = (q * n3 + i3) * nu * self.per;
            for k in 0..nu {
                let probes = &self.probes[row + k * self.per..row + (k + 1) * self.per];
                for i2 in 0..n2 {
                    for i1 in 0..n1 {
                        let s = i1 + n1 * i2;
                        if self.frozen[s] || self.blocked[s] {
                            continue;
                        }
                        let m = self.mean(slice, probes, i1, i2);
                        if m < best[s] {
                            best[s] = m;
                        }
                    }
                }
            }
            let still = &self.still[i3 * self.per..(i3 + 1) * self.per];
            let mut r: f64 = 0.0;
            for i2 in 0..n2 {
                for i1 in 0..n1 {
                    let s = i1 + n1 * i2;
                    let new = if self.frozen[s] {
                        0.0
                    } else {
                        let b = if self.blocked[s] { self.mean(slice, still, i1, i2) } else { best[s] };
                        let (nv, _) = self.switch_at(cur, i3 * plane + s, q);
                        nv.min(self.dt + self.gamma * b).min(self.vmax)
                    };
                    r = r.max((new - cur[base + s]).abs());
                    chunk[s] = new;
                }
            }
            r
        });
        res.into_iter().fold(0.0, f64::max)
    }

    #[inline]
    pub(crate) fn node_update(&self, values: &[f64], q: usize, node: [usize; 3]) -> f64 {
        let col = node[0] + self.lat.ax[0].n * node[1];
        if self.frozen[col] {
            return 0.0;
        }
        let n = self.lat.spatial();
        let j = self.lat.index(node[0], node[1], node[2]);
        let (nv, _) = self.switch_at(values, j, q);
        let (sigma, _) = self.sl_at(&values[q * n..(q + 1) * n], q, node);
        nv.min(sigma).min(self.vmax)
    }

    /// Minimum over all modes (stay included) and the minimizing mode index;
    /// ties go to the smallest index.
    #[inline]
    pub(crate) fn switch_at(&self, values: &[f64], j: usize, q: usize) -> (f64, usize) {
        let n = self.lat.spatial();
        let mut best = f64::INFINITY;
        let mut arg = q;
        for q2 in 0..self.modes {
            let v = values[q2 * n + j] + self.costs[q * self.modes + q2];
            if v < best {
                best = v;
                arg = q2;
            }
        }
        (best, arg)
    }

    /// Best actual switch (target different from `q`); ties go to the smallest index.
    pub(crate) fn best_switch(&self, values: &[f64], j: usize, q: usize) -> Option<(f64, usize)> {
        let n = self.lat.spatial();
        (0..self.modes)
            .filter(|&q2| q2 != q)
            .map(|q2| (values[q2 * n + j] + self.costs[q * self.modes + q2], q2))
            .fold(None, |acc: Option<(f64, usize)>, c| match acc {
                Some(a) if a.0 <= c.0 => Some(a),
                _ => Some(c),
            })
    }

    /// Semi-Lagrangian operator on one mode slice: value and index of the
    /// minimizing control sample (first minimum wins). Obstacle nodes do not
    /// move, so every control gives the same value and index 0 is reported.
    #[inline]
    pub(crate) fn sl_at(&self, slice: &[f64], q: usize, node: [usize; 3]) -> (f64, usize) {
        let [i1, i2, i3] = node;
        if self.blocked[i1 + self.lat.ax[0].n * i2] {
            let still = &self.still[i3 * self.per..(i3 + 1) * self.per];
            return (self.dt + self.gamma * self.mean(slice, still, i1, i2), 0);
        }
        let nu = self.controls.len();
        let row = (q * self.lat.ax[2].n + i3) * nu * self.per;
        let mut best = f64::INFINITY;
        let mut arg = 0;
        for k in 0..nu {
            let probes = &self.probes[row + k * self.per..row + (k + 1) * self.per];
            let m = self.mean(slice, probes, i1, i2);
            if m < best {
                best = m;
                arg = k;
            }
        }
        (self.dt + self.gamma * best, arg)
    }

    /// `(1/2d) Σ_i (𝕀[V](δ⁺_i) + 𝕀[V](δ⁻_i))` at node column `(i1, i2)`.
    #[inline(always)]
    fn mean(&self, slice: &[f64], probes: &[Probe], i1: usize, i2: usize) -> f64 {
        let (a, b) = (i1 as isize, i2 as isize);
        let col = a + self.lat.ax[0].n as isize * b;
        let mut sum = 0.0;
        for p in probes {
            sum += p.mult * p.value(slice, self.outside, a, b, col);
        }
        sum / (2 * DIM) as f64
    }
}

/// Smallest constant `K` with `K ≥ Δt + e^{−λΔt} K`.
pub fn initial_bound(dt: f64, discount: f64) -> f64 {
    dt / -(-discount * dt).exp_m1()
}
