use serde::{Deserialize, Serialize};

/// One uniformly spaced coordinate axis. Node `i` sits at `min + i * step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

/// Node positions within this fraction of a step are snapped onto the node.
const SNAP: f64 = 1e-9;

impl Axis {
    pub fn new(min: f64, max: f64, step: f64) -> Self {
        Axis { min, max, step }
    }

    /// Number of nodes. Meaningful only for a valid axis.
    pub fn len(&self) -> usize {
        if !(self.step > 0.0) || !(self.max >= self.min) {
            return 0;
        }
        ((self.max - self.min) / self.step).round() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.min + i as f64 * self.step
    }

    /// Coordinate of the last node; this is the effective upper bound.
    pub fn upper(&self) -> f64 {
        self.coord(self.len().saturating_sub(1))
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.min && x <= self.upper()
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.max(self.min).min(self.upper())
    }

    /// Nearest node index, clamped into the axis.
    pub fn nearest(&self, x: f64) -> usize {
        let s = ((x - self.min) / self.step).round();
        if s <= 0.0 {
            0
        } else {
            (s as usize).min(self.len() - 1)
        }
    }

    /// Lower cell index and local coordinate `t ∈ [0, 1]` of `x` (assumed
    /// inside the axis). Positions within [`SNAP`] of a node land exactly on it.
    #[inline]
    pub fn locate(&self, x: f64) -> (usize, f64) {
        let n = self.len();
        let mut s = (x - self.min) / self.step;
        let r = s.round();
        if (s - r).abs() < SNAP {
            s = r;
        }
        let s = s.max(0.0).min((n - 1) as f64);
        let i = (s.floor() as usize).min(n - 2);
        (i, s - i as f64)
    }

    /// Whether the extent is an integer multiple of the step.
    pub fn is_integral(&self) -> bool {
        let s = (self.max - self.min) / self.step;
        (s - s.round()).abs() < 1e-6
    }
}

/// Discretization of the state box `x1 × x2 × x3` plus the time step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub axes: [Axis; 3],
    pub dt: f64,
}

impl GridSpec {
    pub fn new(x1: Axis, x2: Axis, x3: Axis, dt: f64) -> Self {
        GridSpec {
            axes: [x1, x2, x3],
            dt,
        }
    }

    pub fn x1(&self) -> &Axis {
        &self.axes[0]
    }
    pub fn x2(&self) -> &Axis {
        &self.axes[1]
    }
    pub fn x3(&self) -> &Axis {
        &self.axes[2]
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.axes[0].len(), self.axes[1].len(), self.axes[2].len()]
    }

    /// Number of spatial nodes (all three axes).
    pub fn node_count(&self) -> usize {
        self.shape().iter().product()
    }

    /// Whether `(x1, x2)` lies in the closed horizontal box.
    pub fn contains_xy(&self, x1: f64, x2: f64) -> bool {
        self.axes[0].contains(x1) && self.axes[1].contains(x2)
    }

    pub fn node(&self, i1: usize, i2: usize, i3: usize) -> [f64; 3] {
        [
            self.axes[0].coord(i1),
            self.axes[1].coord(i2),
            self.axes[2].coord(i3),
        ]
    }
}

/// Disc-shaped target in the `(x1, x2)` plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub center: [f64; 2],
    pub radius: f64,
}

impl TargetSpec {
    pub fn contains(&self, x1: f64, x2: f64) -> bool {
        let (d1, d2) = (x1 - self.center[0], x2 - self.center[1]);
        d1 * d1 + d2 * d2 <= self.radius * self.radius
    }

    /// Node membership. The slack absorbs the rounding of node coordinates so
    /// that nodes placed symmetrically about the center classify identically.
    pub fn covers_node(&self, x1: f64, x2: f64, step: f64) -> bool {
        let (d1, d2) = (x1 - self.center[0], x2 - self.center[1]);
        (d1 * d1 + d2 * d2).sqrt() <= self.radius + 1e-9 * step
    }
}

/// Rasterized obstacle region Γ on the `(x1, x2)` node lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleMask {
    pub x1: Axis,
    pub x2: Axis,
    /// Row-major with `x1` fastest; `true` means inside Γ.
    pub cells: Vec<bool>,
}

impl ObstacleMask {
    pub fn empty(x1: Axis, x2: Axis) -> Self {
        let cells = vec![false; x1.len() * x2.len()];
        ObstacleMask { x1, x2, cells }
    }

    pub fn from_fn(x1: Axis, x2: Axis, f: impl Fn(f64, f64) -> bool) -> Self {
        let mut cells = Vec::with_capacity(x1.len() * x2.len());
        for i2 in 0..x2.len() {
            for i1 in 0..x1.len() {
                cells.push(f(x1.coord(i1), x2.coord(i2)));
            }
        }
        ObstacleMask { x1, x2, cells }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.x1.len(), self.x2.len())
    }

    pub fn node(&self, i1: usize, i2: usize) -> bool {
        self.cells[i1 + self.x1.len() * i2]
    }

    /// Membership of an arbitrary point via its nearest node; points outside
    /// the lattice are free.
    pub fn contains(&self, x1: f64, x2: f64) -> bool {
        if !self.x1.contains(x1) || !self.x2.contains(x2) {
            return false;
        }
        self.node(self.x1.nearest(x1), self.x2.nearest(x2))
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }
}
