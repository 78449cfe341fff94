//! Compactly supported curvature profiles of the boundary.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::OnceLock;

/// `∫_{-1}^{1} exp(-1/(1-x²)) dx`, by the trapezoid rule (which converges
/// faster than any power for this integrand).
pub fn bump_integral() -> f64 {
    static VALUE: OnceLock<f64> = OnceLock::new();
    *VALUE.get_or_init(|| {
        let n = 2048;
        let h = 2.0 / n as f64;
        h * (1..n).map(|i| unit_bump(-1.0 + i as f64 * h)[0]).sum::<f64>()
    })
}

/// Standard bump and its first two derivatives at `x`.
fn unit_bump(x: f64) -> [f64; 3] {
    if x.abs() >= 1.0 {
        return [0.0; 3];
    }
    let q = 1.0 - x * x;
    let b = (-1.0 / q).exp();
    if b == 0.0 {
        return [0.0; 3];
    }
    let g1 = -2.0 * x / (q * q);
    let g2 = -(2.0 + 6.0 * x * x) / (q * q * q);
    [b, b * g1, b * (g2 + g1 * g1)]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileKind {
    /// One bump centred at `s = 0` with half-width `L`.
    Bump,
    /// Two disjoint bumps of half-width `0.4 L` centred at `∓L/2`,
    /// turning by `first_theta` and `theta - first_theta`.
    TwoBump { first_theta: f64 },
}

/// Parameters of a profile, without its samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    Bump { theta: f64, half_support: f64 },
    TwoBump { theta: f64, first_theta: f64, half_support: f64 },
}

impl ProfileSpec {
    pub fn theta(&self) -> f64 {
        match *self {
            ProfileSpec::Bump { theta, .. } | ProfileSpec::TwoBump { theta, .. } => theta,
        }
    }

    pub fn half_support(&self) -> f64 {
        match *self {
            ProfileSpec::Bump { half_support, .. } | ProfileSpec::TwoBump { half_support, .. } => half_support,
        }
    }

    /// Half-width of the narrowest curvature bump.
    pub fn feature_width(&self) -> f64 {
        match *self {
            ProfileSpec::Bump { half_support, .. } => half_support,
            ProfileSpec::TwoBump { half_support, .. } => 0.4 * half_support,
        }
    }

    pub fn build(&self, samples: usize) -> Result<BoundaryProfile> {
        match *self {
            ProfileSpec::Bump { theta, half_support } => BoundaryProfile::bump(theta, half_support, samples),
            ProfileSpec::TwoBump { theta, first_theta, half_support } => {
                BoundaryProfile::two_bump(theta, first_theta, half_support, samples)
            }
        }
    }
}

/// Curvature `κ(s)` supported in `[-L, L]` with `∫κ = θ`, together with
/// samples on a uniform grid that extends a quarter of `L` past each end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryProfile {
    pub kind: ProfileKind,
    pub theta: f64,
    pub half_support: f64,
    pub s_grid: Vec<f64>,
    pub kappa: Vec<f64>,
    pub kappa_dot: Vec<f64>,
    pub kappa_ddot: Vec<f64>,
}

pub const DEFAULT_SAMPLES: usize = 4001;

impl BoundaryProfile {
    pub fn bump(theta: f64, half_support: f64, samples: usize) -> Result<Self> {
        Self::build(ProfileKind::Bump, theta, half_support, samples)
    }

    pub fn two_bump(theta: f64, first_theta: f64, half_support: f64, samples: usize) -> Result<Self> {
        Self::build(ProfileKind::TwoBump { first_theta }, theta, half_support, samples)
    }

    pub fn build(kind: ProfileKind, theta: f64, half_support: f64, samples: usize) -> Result<Self> {
        if !theta.is_finite() || theta.abs() > PI || theta == PI {
            return Err(Error::ConfigInvalid(format!("bending angle {theta} outside [-pi, pi)")));
        }
        if !(half_support.is_finite() && half_support > 0.0) {
            return Err(Error::ConfigInvalid(format!("half support {half_support} must be positive")));
        }
        if samples < 64 {
            return Err(Error::ConfigInvalid(format!("{samples} profile samples is too few")));
        }
        if let ProfileKind::TwoBump { first_theta } = kind {
            if !first_theta.is_finite() {
                return Err(Error::ConfigInvalid("first bump angle must be finite".into()));
            }
        }
        let mut profile = Self {
            kind,
            theta,
            half_support,
            s_grid: Vec::new(),
            kappa: Vec::new(),
            kappa_dot: Vec::new(),
            kappa_ddot: Vec::new(),
        };
        let extent = 1.25 * half_support;
        let ds = 2.0 * extent / (samples - 1) as f64;
        for i in 0..samples {
            let s = -extent + i as f64 * ds;
            let [k0, k1, k2] = profile.derivatives(s);
            profile.s_grid.push(s);
            profile.kappa.push(k0);
            profile.kappa_dot.push(k1);
            profile.kappa_ddot.push(k2);
        }
        Ok(profile)
    }

    /// Flat boundary on the same sampling as `self`.
    pub fn straight_like(&self) -> Self {
        let mut p = self.clone();
        p.theta = 0.0;
        if let ProfileKind::TwoBump { first_theta } = &mut p.kind {
            *first_theta = 0.0;
        }
        p.kappa.iter_mut().for_each(|v| *v = 0.0);
        p.kappa_dot.iter_mut().for_each(|v| *v = 0.0);
        p.kappa_ddot.iter_mut().for_each(|v| *v = 0.0);
        p
    }

    /// `κ`, `κ'`, `κ''` at arc length `s`.
    pub fn derivatives(&self, s: f64) -> [f64; 3] {
        let l = self.half_support;
        let norm = bump_integral();
        let scaled = |angle: f64, center: f64, width: f64| -> [f64; 3] {
            let [b0, b1, b2] = unit_bump((s - center) / width);
            let c = angle / (width * norm);
            [c * b0, c * b1 / width, c * b2 / (width * width)]
        };
        match self.kind {
            ProfileKind::Bump => scaled(self.theta, 0.0, l),
            ProfileKind::TwoBump { first_theta } => {
                let a = scaled(first_theta, -0.5 * l, 0.4 * l);
                let b = scaled(self.theta - first_theta, 0.5 * l, 0.4 * l);
                [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
            }
        }
    }

    pub fn kappa_at(&self, s: f64) -> f64 {
        self.derivatives(s)[0]
    }

    pub fn spacing(&self) -> f64 {
        self.s_grid[1] - self.s_grid[0]
    }

    pub fn max_abs_kappa(&self) -> f64 {
        self.kappa.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Trapezoid integral of sampled values over the profile grid.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.s_grid.len());
        let n = values.len();
        self.spacing() * (values.iter().sum::<f64>() - 0.5 * (values[0] + values[n - 1]))
    }

    /// Running trapezoid integral, starting from zero at the left end.
    pub fn cumulative(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.s_grid.len());
        let h = self.spacing();
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(values.len());
        out.push(0.0);
        for w in values.windows(2) {
            acc += 0.5 * h * (w[0] + w[1]);
            out.push(acc);
        }
        out
    }

    /// Sampled `∫κ ds`.
    pub fn total_angle(&self) -> f64 {
        self.integrate(&self.kappa)
    }

    /// Sampled `∫κ² ds`.
    pub fn kappa_sq_integral(&self) -> f64 {
        let sq: Vec<f64> = self.kappa.iter().map(|k| k * k).collect();
        self.integrate(&sq)
    }

    /// Same angle, support stretched by `factor`: `κ(s) -> κ(s/λ)/λ`.
    pub fn stretched(&self, factor: f64) -> Result<Self> {
        Self::build(self.kind, self.theta, self.half_support * factor, self.s_grid.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bump_constant() {
        assert!((bump_integral() - 0.443_993_816_168_079_4).abs() < 1e-15);
    }

    #[test]
    fn compact_support_and_angle() {
        let p = BoundaryProfile::bump(0.4, 1.0, DEFAULT_SAMPLES).unwrap();
        for (s, k) in p.s_grid.iter().zip(&p.kappa) {
            if s.abs() >= 1.0 {
                assert_eq!(*k, 0.0);
            }
        }
        assert!((p.total_angle() - 0.4).abs() < 1e-10);
        let q = BoundaryProfile::two_bump(0.4, 0.1, 1.0, DEFAULT_SAMPLES).unwrap();
        assert!((q.total_angle() - 0.4).abs() < 1e-10);
        assert_eq!(q.kappa_at(0.0), 0.0);
    }

    #[test]
    fn derivatives_match_differences() {
        let p = BoundaryProfile::bump(0.7, 1.3, DEFAULT_SAMPLES).unwrap();
        let d = 1e-5;
        for s in [-0.9, -0.3, 0.0, 0.45, 1.1] {
            let [_, k1, k2] = p.derivatives(s);
            let fd1 = (p.kappa_at(s + d) - p.kappa_at(s - d)) / (2.0 * d);
            let fd2 = (p.kappa_at(s + d) - 2.0 * p.kappa_at(s) + p.kappa_at(s - d)) / (d * d);
            assert!((k1 - fd1).abs() < 1e-7 * (1.0 + k1.abs()), "{s}: {k1} {fd1}");
            assert!((k2 - fd2).abs() < 1e-4 * (1.0 + k2.abs()), "{s}: {k2} {fd2}");
        }
    }

    #[test]
    fn rejects_straight_angle() {
        assert!(BoundaryProfile::bump(PI, 1.0, 200).is_err());
        assert!(BoundaryProfile::bump(3.5, 1.0, 200).is_err());
        assert!(BoundaryProfile::bump(-PI, 1.0, 200).is_ok());
    }

    #[test]
    fn stretching_rescales_square_integral() {
        let p = BoundaryProfile::bump(0.4, 1.0, DEFAULT_SAMPLES).unwrap();
        let q = p.stretched(2.0).unwrap();
        assert!((q.total_angle() - 0.4).abs() < 1e-10);
        assert!((q.kappa_sq_integral() - 0.5 * p.kappa_sq_integral()).abs() < 1e-12);
    }

    #[test]
    fn spec_roundtrip() {
        let spec: ProfileSpec = serde_json::from_str(r#"{"kind":"two_bump","theta":0.4,"first_theta":0.1,"half_support":1.0}"#).unwrap();
        assert_eq!(spec.build(200).unwrap(), BoundaryProfile::two_bump(0.4, 0.1, 1.0, 200).unwrap());
        let bad = serde_json::from_str::<ProfileSpec>(r#"{"kind":"bump","theta":0.4,"half_support":1.0,"width":2}"#);
        assert!(bad.is_err());
    }

    proptest! {
        #[test]
        fn angle_is_preserved(theta in -3.0f64..3.0, l in 0.2f64..5.0, first in -1.0f64..1.0) {
            let p = BoundaryProfile::bump(theta, l, 2001).unwrap();
            prop_assert!((p.total_angle() - theta).abs() < 1e-10);
            let q = BoundaryProfile::two_bump(theta, first, l, 2001).unwrap();
            prop_assert!((q.total_angle() - theta).abs() < 1e-10);
        }

        #[test]
        fn linear_in_angle(theta in -1.5f64..1.5, s in -1.2f64..1.2) {
            let p = BoundaryProfile::bump(theta, 1.0, 200).unwrap();
            let q = BoundaryProfile::bump(2.0 * theta, 1.0, 200).unwrap();
            let (a, b) = (p.derivatives(s), q.derivatives(s));
            for i in 0..3 {
                prop_assert_eq!(2.0 * a[i], b[i]);
            }
        }
    }
}
