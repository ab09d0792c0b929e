use std::fmt;

use crate::domain::{GridSpec, Mode};
use crate::parallel::{map_indices, Execution};

use super::scheme::Scheme;
use super::value::{Lattice, ValueField};

/// Feedback action at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Action {
    /// Keep the mode and sail at this angle to the wind.
    Continue(f64),
    /// Switch instantaneously to another mode.
    Switch(Mode),
}

impl Action {
    pub fn is_switch(&self) -> bool {
        matches!(self, Action::Switch(_))
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Continue(u) => write!(f, "continue:{u:.16e}"),
            Action::Switch(q) => write!(f, "switch:{q}"),
        }
    }
}

/// Per-mode, per-node optimal action.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyField {
    pub(crate) grid: GridSpec,
    pub(crate) lat: Lattice,
    pub(crate) modes: usize,
    pub(crate) actions: Vec<Action>,
    pub(crate) frozen: Vec<bool>,
}

impl PolicyField {
    pub fn new(grid: &GridSpec, modes: usize, actions: Vec<Action>, frozen: Vec<bool>) -> Self {
        let lat = Lattice::new(grid);
        assert_eq!(actions.len(), modes * lat.spatial());
        assert_eq!(frozen.len(), lat.plane());
        PolicyField {
            grid: *grid,
            lat,
            modes,
            actions,
            frozen,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn get(&self, q: Mode, node: [usize; 3]) -> Action {
        self.actions[q.index() * self.lat.spatial() + self.lat.index(node[0], node[1], node[2])]
    }

    pub fn is_frozen(&self, i1: usize, i2: usize) -> bool {
        self.frozen[i1 + self.lat.ax[0].n * i2]
    }

    pub fn frozen_columns(&self) -> &[bool] {
        &self.frozen
    }

    /// Node nearest to `x` (each coordinate clamped into the grid).
    pub fn nearest_node(&self, x: [f64; 3]) -> [usize; 3] {
        self.lat.nearest(x)
    }

    /// Nearest node whose column is not frozen. Used for states just outside
    /// the target disc whose nearest node lies inside it.
    pub fn nearest_free_node(&self, x: [f64; 3]) -> [usize; 3] {
        let node = self.lat.nearest(x);
        let n1 = self.lat.ax[0].n as isize;
        let n2 = self.lat.ax[1].n as isize;
        if !self.frozen[node[0] + node[1] * n1 as usize] {
            return node;
        }
        let dist = |i1: isize, i2: isize| {
            let d1 = self.lat.ax[0].coord(i1 as usize) - x[0];
            let d2 = self.lat.ax[1].coord(i2 as usize) - x[1];
            d1 * d1 + d2 * d2
        };
        let (c1, c2) = (node[0] as isize, node[1] as isize);
        let mut best: Option<(f64, isize, isize)> = None;
        let mut found_at = None;
        for w in 1..n1.max(n2) {
            // One extra ring after the first hit catches diagonal corners.
            if found_at.is_some_and(|f| w > f + 1) {
                break;
            }
            for i2 in (c2 - w).max(0)..=(c2 + w).min(n2 - 1) {
                for i1 in (c1 - w).max(0)..=(c1 + w).min(n1 - 1) {
                    if (i1 - c1).abs() != w && (i2 - c2).abs() != w {
                        continue;
                    }
                    if self.frozen[(i1 + n1 * i2) as usize] {
                        continue;
                    }
                    let d = dist(i1, i2);
                    if best.is_none_or(|b| d < b.0) {
                        best = Some((d, i1, i2));
                    }
                }
            }
            if best.is_some() && found_at.is_none() {
                found_at = Some(w);
            }
        }
        match best {
            Some((_, i1, i2)) => [i1 as usize, i2 as usize, node[2]],
            None => node,
        }
    }

    pub fn switch_count(&self) -> usize {
        self.actions.iter().filter(|a| a.is_switch()).count()
    }
}

/// Reads the optimal action off a value field: switch only when the best
/// switch beats the continuous operator by more than the tie tolerance.
pub fn extract_policy(scheme: &Scheme, v: &ValueField, exec: Execution) -> PolicyField {
    let lat = scheme.lat;
    let [n1, n2, n3] = [lat.ax[0].n, lat.ax[1].n, lat.ax[2].n];
    let plane = lat.plane();
    let n = lat.spatial();
    let planes = map_indices(exec, scheme.modes * n3, |c| {
        let q = c / n3;
        let i3 = c % n3;
        let slice = &v.values[q * n..(q + 1) * n];
        let mut out = Vec::with_capacity(plane);
        for i2 in 0..n2 {
            for i1 in 0..n1 {
                if scheme.frozen[i1 + n1 * i2] {
                    // Inert: lookups never land on target nodes.
                    out.push(Action::Continue(scheme.controls[0]));
                    continue;
                }
                let (sigma, k) = scheme.sl_at(slice, q, [i1, i2, i3]);
                let j = lat.index(i1, i2, i3);
                let action = match scheme.best_switch(&v.values, j, q) {
                    Some((nv, q2)) if nv < sigma - scheme.tie_epsilon => {
                        Action::Switch(Mode::from_index(q2))
                    }
                    _ => Action::Continue(scheme.controls[k]),
                };
                out.push(action);
            }
        }
        out
    });
    PolicyField {
        grid: scheme.grid,
        lat,
        modes: scheme.modes,
        actions: planes.into_iter().flatten().collect(),
        frozen: scheme.frozen.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::tests::frozen_scenario;

    #[test]
    fn lookup_skips_target_nodes() {
        let s = frozen_scenario();
        let v = ValueField::from_fn(&s.grid, 2, &s.target, 100.0, |_, _| 0.0);
        let p = PolicyField::new(&s.grid, 2, vec![Action::Continue(0.0); v.values.len()], v.frozen_columns().to_vec());
        let c = p.nearest_node([0.0, 1.8, 0.0]);
        assert!(p.is_frozen(c[0], c[1]));
        // Just below the disc: the nearest node is the center, the nearest free
        // one is directly south.
        let f = p.nearest_free_node([0.01, 1.75, 0.0]);
        assert!(!p.is_frozen(f[0], f[1]));
        assert_eq!(f, p.nearest_node([0.0, 1.7, 0.0]));
        // Away from the target both lookups agree.
        assert_eq!(p.nearest_free_node([0.33, 0.41, 0.2]), p.nearest_node([0.33, 0.41, 0.2]));
    }
}
