use crate::domain::{Axis, GridSpec, Mode, TargetSpec};

/// Axis geometry with the node count cached for the inner loops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct AxisGeom {
    pub min: f64,
    pub step: f64,
    pub n: usize,
    pub upper: f64,
}

const SNAP: f64 = 1e-9;

impl AxisGeom {
    fn new(a: &Axis) -> Self {
        AxisGeom {
            min: a.min,
            step: a.step,
            n: a.len(),
            upper: a.upper(),
        }
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        self.min + i as f64 * self.step
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        x >= self.min && x <= self.upper
    }

    /// Cell index and weights `(1 - t, t)` of a point inside the axis.
    #[inline]
    pub fn locate(&self, x: f64) -> (usize, f64) {
        let mut s = (x - self.min) / self.step;
        let r = s.round();
        if (s - r).abs() < SNAP {
            s = r;
        }
        let last = (self.n - 1) as f64;
        let s = if s < 0.0 { 0.0 } else if s > last { last } else { s };
        let i = (s as usize).min(self.n - 2);
        (i, s - i as f64)
    }

    #[inline]
    pub fn nearest(&self, x: f64) -> usize {
        let s = ((x - self.min) / self.step).round();
        if s <= 0.0 {
            0
        } else {
            (s as usize).min(self.n - 1)
        }
    }
}

/// Node layout shared by value and policy fields: `x1` fastest, then `x2`,
/// `x3`, and the mode outermost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Lattice {
    pub ax: [AxisGeom; 3],
}

impl Lattice {
    pub fn new(grid: &GridSpec) -> Self {
        Lattice {
            ax: [
                AxisGeom::new(&grid.axes[0]),
                AxisGeom::new(&grid.axes[1]),
                AxisGeom::new(&grid.axes[2]),
            ],
        }
    }

    #[inline]
    pub fn plane(&self) -> usize {
        self.ax[0].n * self.ax[1].n
    }

    #[inline]
    pub fn spatial(&self) -> usize {
        self.plane() * self.ax[2].n
    }

    #[inline]
    pub fn index(&self, i1: usize, i2: usize, i3: usize) -> usize {
        i1 + self.ax[0].n * (i2 + self.ax[1].n * i3)
    }

    pub fn nearest(&self, x: [f64; 3]) -> [usize; 3] {
        [
            self.ax[0].nearest(x[0]),
            self.ax[1].nearest(x[1]),
            self.ax[2].nearest(x[2]),
        ]
    }

    /// Nodes inside the target disc, per `(x1, x2)` column.
    pub fn target_columns(&self, target: &TargetSpec) -> Vec<bool> {
        let mut out = Vec::with_capacity(self.plane());
        for i2 in 0..self.ax[1].n {
            for i1 in 0..self.ax[0].n {
                out.push(target.covers_node(
                    self.ax[0].coord(i1),
                    self.ax[1].coord(i2),
                    self.ax[0].step.min(self.ax[1].step),
                ));
            }
        }
        out
    }
}

/// Bilinear stencil in the `(x1, x2)` plane: up to four column offsets with
/// nonnegative weights. Zero-weight corners are dropped.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Planar {
    offs: [usize; 4],
    w: [f64; 4],
    len: usize,
}

impl Planar {
    #[inline]
    pub fn new(lat: &Lattice, x1: f64, x2: f64) -> Planar {
        let (i1, t1) = lat.ax[0].locate(x1);
        let (i2, t2) = lat.ax[1].locate(x2);
        let n1 = lat.ax[0].n;
        let mut p = Planar {
            offs: [0; 4],
            w: [0.0; 4],
            len: 0,
        };
        for (d2, w2) in [(0usize, 1.0 - t2), (1, t2)] {
            if w2 == 0.0 {
                continue;
            }
            for (d1, w1) in [(0usize, 1.0 - t1), (1, t1)] {
                if w1 == 0.0 {
                    continue;
                }
                p.offs[p.len] = (i1 + d1) + n1 * (i2 + d2);
                p.w[p.len] = w1 * w2;
                p.len += 1;
            }
        }
        p
    }

    #[inline]
    fn eval_plane(&self, values: &[f64], base: usize) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.len {
            acc += self.w[k] * values[base + self.offs[k]];
        }
        acc
    }

    /// Multilinear value at height `x3` (clamped into the axis) for a single
    /// mode slice of length `lat.spatial()`.
    #[inline]
    pub fn eval(&self, lat: &Lattice, values: &[f64], x3: f64) -> f64 {
        let (i3, t3) = lat.ax[2].locate(x3);
        let plane = lat.plane();
        let mut acc = 0.0;
        if t3 != 1.0 {
            acc += (1.0 - t3) * self.eval_plane(values, plane * i3);
        }
        if t3 != 0.0 {
            acc += t3 * self.eval_plane(values, plane * (i3 + 1));
        }
        acc
    }
}

/// Multilinear interpolation of one mode slice. Points with `(x1, x2)` outside
/// the box take the stopping cost; `x3` is clamped into the theta box.
#[inline]
pub(crate) fn interpolate_slice(lat: &Lattice, values: &[f64], outside: f64, x: [f64; 3]) -> f64 {
    if !lat.ax[0].contains(x[0]) || !lat.ax[1].contains(x[1]) {
        return outside;
    }
    Planar::new(lat, x[0], x[1]).eval(lat, values, x[2])
}

/// Per-mode grid of approximate values plus convergence metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueField {
    pub(crate) grid: GridSpec,
    pub(crate) lat: Lattice,
    pub(crate) modes: usize,
    pub(crate) values: Vec<f64>,
    pub(crate) frozen: Vec<bool>,
    pub(crate) outside: f64,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

impl ValueField {
    /// Field with values from `f(mode, node coordinates)`; target columns are
    /// flagged frozen but keep whatever `f` returns.
    pub fn from_fn(
        grid: &GridSpec,
        modes: usize,
        target: &TargetSpec,
        stopping_cost: f64,
        f: impl Fn(Mode, [f64; 3]) -> f64,
    ) -> Self {
        let lat = Lattice::new(grid);
        let [n1, n2, n3] = [lat.ax[0].n, lat.ax[1].n, lat.ax[2].n];
        let mut values = Vec::with_capacity(modes * lat.spatial());
        for q in 0..modes {
            for i3 in 0..n3 {
                for i2 in 0..n2 {
                    for i1 in 0..n1 {
                        values.push(f(Mode::from_index(q), grid.node(i1, i2, i3)));
                    }
                }
            }
        }
        ValueField {
            grid: *grid,
            lat,
            modes,
            values,
            frozen: lat.target_columns(target),
            outside: stopping_cost,
            iterations: 0,
            residual: f64::INFINITY,
            converged: false,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn stopping_cost(&self) -> f64 {
        self.outside
    }

    /// All values, mode-major with `x1` fastest.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn mode_slice(&self, q: Mode) -> &[f64] {
        let n = self.lat.spatial();
        &self.values[q.index() * n..(q.index() + 1) * n]
    }

    pub fn get(&self, q: Mode, node: [usize; 3]) -> f64 {
        self.values[q.index() * self.lat.spatial() + self.lat.index(node[0], node[1], node[2])]
    }

    pub fn set(&mut self, q: Mode, node: [usize; 3], v: f64) {
        let k = q.index() * self.lat.spatial() + self.lat.index(node[0], node[1], node[2]);
        self.values[k] = v;
    }

    /// Whether the `(x1, x2)` column of `node` lies in the target.
    pub fn is_frozen(&self, node: [usize; 3]) -> bool {
        self.frozen[node[0] + self.lat.ax[0].n * node[1]]
    }

    pub fn frozen_columns(&self) -> &[bool] {
        &self.frozen
    }

    /// `𝕀[V](x, q)`.
    pub fn interpolate(&self, q: Mode, x: [f64; 3]) -> f64 {
        interpolate_slice(&self.lat, self.mode_slice(q), self.outside, x)
    }

    /// Value at the node nearest to `x` (no interpolation).
    pub fn nearest(&self, q: Mode, x: [f64; 3]) -> f64 {
        self.get(q, self.lat.nearest(x))
    }

    pub fn max_abs_diff(&self, other: &ValueField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_grid() -> GridSpec {
        GridSpec::new(
            Axis::new(0.0, 1.0, 0.25),
            Axis::new(0.0, 1.0, 0.5),
            Axis::new(-1.0, 1.0, 1.0),
            0.1,
        )
    }

    fn far_target() -> TargetSpec {
        TargetSpec {
            center: [0.0, 0.0],
            radius: 0.01,
        }
    }

    #[test]
    fn reproduces_node_values() {
        let g = small_grid();
        let f = ValueField::from_fn(&g, 2, &far_target(), 100.0, |q, x| {
            (x[0] * 3.0).sin() + x[1] * x[2] + q.number() as f64
        });
        for q in [Mode::new(1), Mode::new(2)] {
            for i3 in 0..3 {
                for i2 in 0..3 {
                    for i1 in 0..5 {
                        let x = g.node(i1, i2, i3);
                        assert_eq!(f.interpolate(q, x), f.get(q, [i1, i2, i3]));
                    }
                }
            }
        }
    }

    #[test]
    fn cell_center_is_corner_mean() {
        let g = small_grid();
        let f = ValueField::from_fn(&g, 1, &far_target(), 100.0, |_, x| {
            (x[0] * 7.0).cos() * 3.0 + x[1].powi(3) - x[2] * x[0]
        });
        let q = Mode::new(1);
        let center = [0.375, 0.25, -0.5];
        let mut mean = 0.0;
        for (a, b, c) in corners() {
            mean += f.get(q, [1 + a, b, c]);
        }
        mean /= 8.0;
        assert!((f.interpolate(q, center) - mean).abs() < 1e-14);
    }

    fn corners() -> Vec<(usize, usize, usize)> {
        let mut v = Vec::new();
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    v.push((a, b, c));
                }
            }
        }
        v
    }

    #[test]
    fn outside_box_returns_stopping_cost_and_theta_clamps() {
        let g = small_grid();
        let f = ValueField::from_fn(&g, 1, &far_target(), 100.0, |_, x| x[2]);
        let q = Mode::new(1);
        assert_eq!(f.interpolate(q, [-0.01, 0.5, 0.0]), 100.0);
        assert_eq!(f.interpolate(q, [0.5, 1.2, 0.0]), 100.0);
        assert_eq!(f.interpolate(q, [0.5, 0.5, 3.0]), 1.0);
        assert_eq!(f.interpolate(q, [0.5, 0.5, -3.0]), -1.0);
        // Boundary itself is inside.
        assert_eq!(f.interpolate(q, [1.0, 1.0, 0.5]), 0.5);
    }

    #[test]
    fn frozen_columns_follow_target() {
        let g = small_grid();
        let t = TargetSpec {
            center: [0.5, 0.5],
            radius: 0.3,
        };
        let f = ValueField::from_fn(&g, 2, &t, 100.0, |_, _| 1.0);
        assert!(f.is_frozen([2, 1, 0]));
        assert!(f.is_frozen([1, 1, 2]));
        assert!(!f.is_frozen([0, 1, 0]));
        assert!(!f.is_frozen([2, 0, 0]));
    }
}
