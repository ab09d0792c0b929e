use std::f64::consts::FRAC_PI_4;

use serde::{Deserialize, Serialize};

use super::Mode;
use crate::error::DomainError;

/// Boat speed as a function of the angle to the wind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PolarKind {
    /// `r ≡ speed`. Only meaningful together with a frozen angle.
    Constant { speed: f64 },
    /// `r(u) = coefficient · (peak² − (u − peak)²)`, clipped at zero.
    Parabolic { coefficient: f64, peak: f64 },
    /// Piecewise-linear interpolation of sampled `(angle, speed)` pairs.
    Tabulated { angles: Vec<f64>, speeds: Vec<f64> },
}

impl PolarKind {
    /// The parabolic polar used in the windward tests: peak at π/4, coefficient 0.05.
    pub fn standard_parabola() -> Self {
        PolarKind::Parabolic {
            coefficient: 0.05,
            peak: FRAC_PI_4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarModel {
    pub kind: PolarKind,
    /// Admissible angles `[u_min, u_max] ⊆ [0, π]`.
    pub control: [f64; 2],
    /// When set, the continuous control is frozen at this angle and only
    /// switching remains.
    pub frozen_angle: Option<f64>,
}

const ANGLE_SLACK: f64 = 1e-12;

impl PolarModel {
    pub fn in_control_interval(&self, u: f64) -> bool {
        u >= self.control[0] - ANGLE_SLACK && u <= self.control[1] + ANGLE_SLACK
    }

    /// Speed without the control-interval check.
    pub(crate) fn raw_speed(&self, u: f64) -> f64 {
        match &self.kind {
            PolarKind::Constant { speed } => *speed,
            PolarKind::Parabolic { coefficient, peak } => {
                let d = u - peak;
                (coefficient * (peak * peak - d * d)).max(0.0)
            }
            PolarKind::Tabulated { angles, speeds } => piecewise_linear(angles, speeds, u),
        }
    }

    /// Control samples used by the discrete minimization: the frozen angle
    /// alone, or `n` uniformly spaced angles with both endpoints included.
    pub fn control_samples(&self, n: usize) -> Vec<f64> {
        if let Some(u) = self.frozen_angle {
            return vec![u];
        }
        let [lo, hi] = self.control;
        if n < 2 || hi <= lo {
            return vec![lo];
        }
        (0..n)
            .map(|k| {
                if k == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * k as f64 / (n - 1) as f64
                }
            })
            .collect()
    }
}

fn piecewise_linear(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => ys[0],
        n => {
            if x <= xs[0] {
                return ys[0];
            }
            if x >= xs[n - 1] {
                return ys[n - 1];
            }
            let k = xs.partition_point(|&a| a <= x).clamp(1, n - 1);
            let t = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
            (1.0 - t) * ys[k - 1] + t * ys[k]
        }
    }
}

/// Polar speed `r(s, q, u)`. Wind speed and mode are accepted for the general
/// signature; none of the shipped polar kinds depends on them.
pub fn polar_speed(
    polar: &PolarModel,
    _wind_speed: f64,
    _mode: Mode,
    angle: f64,
) -> Result<f64, DomainError> {
    if !polar.in_control_interval(angle) {
        return Err(DomainError::AngleOutOfRange {
            angle,
            min: polar.control[0],
            max: polar.control[1],
        });
    }
    Ok(polar.raw_speed(angle))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, PI};

    use approx::assert_abs_diff_eq;

    use super::*;

    fn parabolic() -> PolarModel {
        PolarModel {
            kind: PolarKind::standard_parabola(),
            control: [0.0, FRAC_PI_2],
            frozen_angle: None,
        }
    }

    #[test]
    fn parabola_values() {
        let p = parabolic();
        let q = Mode::new(1);
        assert_eq!(polar_speed(&p, 1.0, q, 0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(polar_speed(&p, 1.0, q, FRAC_PI_2).unwrap(), 0.0, epsilon = 1e-15);
        // 0.05 * (π/4)^2 by hand: 0.05 * 0.6168502750680849
        assert_abs_diff_eq!(
            polar_speed(&p, 1.0, q, FRAC_PI_4).unwrap(),
            0.030842513753404245,
            epsilon = 1e-15
        );
    }

    #[test]
    fn angle_outside_interval_is_rejected() {
        let p = parabolic();
        let err = polar_speed(&p, 1.0, Mode::new(2), 2.0).unwrap_err();
        assert!(matches!(err, DomainError::AngleOutOfRange { .. }));
        assert!(polar_speed(&p, 1.0, Mode::new(2), -0.1).is_err());
    }

    #[test]
    fn parabola_is_clipped_on_wide_interval() {
        let mut p = parabolic();
        p.control = [0.0, PI];
        assert_eq!(polar_speed(&p, 1.0, Mode::new(1), 3.0).unwrap(), 0.0);
    }

    #[test]
    fn tabulated_interpolates_linearly() {
        let p = PolarModel {
            kind: PolarKind::Tabulated {
                angles: vec![0.0, 0.5, 1.0],
                speeds: vec![0.0, 0.04, 0.02],
            },
            control: [0.0, 1.0],
            frozen_angle: None,
        };
        let q = Mode::new(1);
        assert_abs_diff_eq!(polar_speed(&p, 1.0, q, 0.25).unwrap(), 0.02, epsilon = 1e-15);
        assert_abs_diff_eq!(polar_speed(&p, 1.0, q, 0.75).unwrap(), 0.03, epsilon = 1e-15);
        assert_eq!(polar_speed(&p, 1.0, q, 0.5).unwrap(), 0.04);
    }

    #[test]
    fn control_samples_include_endpoints() {
        let p = parabolic();
        let u = p.control_samples(32);
        assert_eq!(u.len(), 32);
        assert_eq!(u[0], 0.0);
        assert_eq!(u[31], FRAC_PI_2);
        assert!(u.windows(2).all(|w| w[1] > w[0]));
        let mut frozen = p.clone();
        frozen.frozen_angle = Some(FRAC_PI_4);
        assert_eq!(frozen.control_samples(32), vec![FRAC_PI_4]);
    }
}
