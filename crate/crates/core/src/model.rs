//! Physical constants, the x-only damping coefficient and the transverse
//! sine basis `e_j(y) = sqrt(2) sin(xi_j y)`.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, SQRT_2};

use crate::error::{Error, Result};

/// Material constants of the coupled elastic/electric system.
///
/// `alpha1 = alpha - gamma^2 beta` is the effective elastic stiffness that
/// appears in the energy; it is strictly positive for every accepted set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub rho: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub mu: f64,
    pub beta: f64,
    pub alpha1: f64,
}

impl PhysicalParams {
    /// Validates the five raw constants and derives `alpha1`.
    pub fn new(rho: f64, alpha: f64, gamma: f64, mu: f64, beta: f64) -> Result<Self> {
        for (name, value) in [("rho", rho), ("alpha", alpha), ("mu", mu), ("beta", beta)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::NonPositiveParameter { name, value });
            }
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::NonPositiveParameter {
                name: "gamma",
                value: gamma,
            });
        }
        let coupling = gamma * gamma * beta;
        if alpha <= coupling {
            return Err(Error::StiffnessBelowCoupling { alpha, coupling });
        }
        Ok(Self {
            rho,
            alpha,
            gamma,
            mu,
            beta,
            alpha1: alpha - coupling,
        })
    }

    /// Re-runs validation on the stored raw constants.
    pub fn revalidate(&self) -> Result<Self> {
        Self::new(self.rho, self.alpha, self.gamma, self.mu, self.beta)
    }

    /// Largest wave slowness bound `max(sqrt(rho/alpha1), sqrt(mu/beta))`.
    pub fn slowness_bound(&self) -> f64 {
        (self.rho / self.alpha1).sqrt().max((self.mu / self.beta).sqrt())
    }

    /// Exact slowness of the slower of the two undamped wave branches.
    pub fn slow_branch_slowness(&self) -> f64 {
        let b = self.rho * self.beta + self.mu * self.alpha;
        let disc = (b * b - 4.0 * self.rho * self.mu * self.beta * self.alpha1).max(0.0);
        let c2_min = (b - disc.sqrt()) / (2.0 * self.rho * self.mu);
        1.0 / c2_min.sqrt()
    }
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self::new(1.0, 2.0, 0.5, 1.0, 1.0).expect("default parameters are valid")
    }
}

/// Shape of the damping coefficient inside its support `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DampingShape {
    Indicator,
    /// C^1 cubic ramp from 0 to `d0` over width `eps` at each end of `(a, b)`.
    SmoothRamp { eps: f64 },
}

/// Anything usable as the damping coefficient `d(x)` during assembly.
///
/// `breakpoints` lists the points where `d` fails to be polynomial; assembly
/// splits elements there so quadrature is exact for piecewise cubics.
pub trait DampingCoefficient: Sync {
    fn value(&self, x: f64) -> f64;

    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

impl<F: Fn(f64) -> f64 + Sync> DampingCoefficient for F {
    fn value(&self, x: f64) -> f64 {
        self(x)
    }
}

/// The x-only damping coefficient, supported on `(a, b)` with floor `d0`.
///
/// `d0 = 0` is accepted and yields the conservative (undamped) system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DampingProfile {
    pub a: f64,
    pub b: f64,
    pub d0: f64,
    pub shape: DampingShape,
}

impl DampingProfile {
    pub fn new(a: f64, b: f64, d0: f64, shape: DampingShape) -> Result<Self> {
        if !(0.0 < a && a < b && b < 1.0) {
            return Err(Error::InvalidDamping(format!(
                "support must satisfy 0 < a < b < 1, got a = {a}, b = {b}"
            )));
        }
        if !(d0 >= 0.0 && d0.is_finite()) {
            return Err(Error::InvalidDamping(format!(
                "d0 must be finite and non-negative, got {d0}"
            )));
        }
        if let DampingShape::SmoothRamp { eps } = shape {
            if !(eps > 0.0 && 2.0 * eps < b - a) {
                return Err(Error::InvalidDamping(format!(
                    "ramp width must satisfy 0 < eps < (b - a)/2, got {eps}"
                )));
            }
        }
        Ok(Self { a, b, d0, shape })
    }

    pub fn indicator(a: f64, b: f64, d0: f64) -> Result<Self> {
        Self::new(a, b, d0, DampingShape::Indicator)
    }

    /// Same support and shape with `d0` multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.a, self.b, self.d0 * factor, self.shape)
    }

    pub fn is_zero(&self) -> bool {
        self.d0 == 0.0
    }

    /// Upper bound of `d` over `[0, 1]`.
    pub fn d_max(&self) -> f64 {
        self.d0
    }

    fn ramp_width(&self) -> f64 {
        match self.shape {
            DampingShape::Indicator => 0.0,
            DampingShape::SmoothRamp { eps } => eps,
        }
    }

    /// Interval on which `d >= d0` is guaranteed.
    pub fn plateau(&self) -> (f64, f64) {
        let eps = self.ramp_width();
        (self.a + eps, self.b - eps)
    }
}

impl Default for DampingProfile {
    fn default() -> Self {
        Self::indicator(0.3, 0.7, 1.0).expect("default profile is valid")
    }
}

fn smoothstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * (3.0 - 2.0 * s)
}

impl DampingCoefficient for DampingProfile {
    fn value(&self, x: f64) -> f64 {
        if x <= self.a || x >= self.b {
            return 0.0;
        }
        match self.shape {
            DampingShape::Indicator => self.d0,
            DampingShape::SmoothRamp { eps } => {
                let left = smoothstep((x - self.a) / eps);
                let right = smoothstep((self.b - x) / eps);
                self.d0 * left.min(right)
            }
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self.shape {
            DampingShape::Indicator => vec![self.a, self.b],
            DampingShape::SmoothRamp { eps } => {
                vec![self.a, self.a + eps, self.b - eps, self.b]
            }
        }
    }
}

/// Transverse frequency `xi_j = (2j + 1) pi / 2`.
pub fn xi(j: usize) -> f64 {
    (2 * j + 1) as f64 * FRAC_PI_2
}

/// Index of a transverse mode together with its frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ModeIndex(pub usize);

impl ModeIndex {
    pub fn xi(self) -> f64 {
        xi(self.0)
    }

    /// `e_j(y) = sqrt(2) sin(xi_j y)`; vanishes at `y = 0`.
    pub fn basis(self, y: f64) -> f64 {
        SQRT_2 * (self.xi() * y).sin()
    }

    /// `e_j'(y)`; vanishes at `y = 1`.
    pub fn basis_derivative(self, y: f64) -> f64 {
        let xi = self.xi();
        SQRT_2 * xi * (xi * y).cos()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn alpha1_examples() {
        let p = PhysicalParams::new(1.0, 2.0, 0.5, 1.0, 1.0).unwrap();
        assert_relative_eq!(p.alpha1, 1.75);
        let p = PhysicalParams::new(1.0, 1.0, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(p.alpha1, 1.0);
        assert!(matches!(
            PhysicalParams::new(1.0, 0.2, 1.0, 1.0, 1.0),
            Err(Error::StiffnessBelowCoupling { .. })
        ));
    }

    #[test]
    fn rejects_non_positive() {
        assert!(matches!(
            PhysicalParams::new(0.0, 2.0, 0.5, 1.0, 1.0),
            Err(Error::NonPositiveParameter { name: "rho", .. })
        ));
        assert!(matches!(
            PhysicalParams::new(1.0, 2.0, -0.5, 1.0, 1.0),
            Err(Error::NonPositiveParameter { name: "gamma", .. })
        ));
        assert!(matches!(
            PhysicalParams::new(1.0, 2.0, 0.5, 1.0, f64::NAN),
            Err(Error::NonPositiveParameter { name: "beta", .. })
        ));
    }

    #[test]
    fn xi_values() {
        assert_relative_eq!(xi(0), PI / 2.0);
        assert_relative_eq!(xi(1), 3.0 * PI / 2.0);
        assert_relative_eq!(xi(10), 21.0 * PI / 2.0);
    }

    #[test]
    fn basis_boundary_conditions() {
        for j in 0..50 {
            let m = ModeIndex(j);
            assert_eq!(m.basis(0.0), 0.0);
            assert!(m.basis_derivative(1.0).abs() < 1e-12 * m.xi());
        }
    }

    #[test]
    fn indicator_values() {
        let d = DampingProfile::indicator(0.3, 0.7, 1.0).unwrap();
        assert_eq!(d.value(0.5), 1.0);
        assert_eq!(d.value(0.1), 0.0);
        assert_eq!(d.value(0.9), 0.0);
    }

    #[test]
    fn ramp_is_continuous_and_bounded() {
        let d = DampingProfile::new(0.3, 0.7, 2.0, DampingShape::SmoothRamp { eps: 0.05 }).unwrap();
        assert_eq!(d.value(0.3), 0.0);
        assert_eq!(d.value(0.7), 0.0);
        assert_eq!(d.value(0.5), 2.0);
        assert_relative_eq!(d.value(0.35), 2.0);
        // one-sided slopes vanish at the support edge
        let h = 1e-6;
        assert!(d.value(0.3 + h) / h < 1e-2);
        let (lo, hi) = d.plateau();
        for k in 0..=100 {
            let x = k as f64 / 100.0;
            let v = d.value(x);
            assert!((0.0..=d.d_max()).contains(&v));
            if x > lo && x < hi {
                assert!(v >= d.d0);
            }
        }
    }

    #[test]
    fn profile_validation() {
        assert!(DampingProfile::indicator(0.0, 0.7, 1.0).is_err());
        assert!(DampingProfile::indicator(0.7, 0.3, 1.0).is_err());
        assert!(DampingProfile::indicator(0.3, 0.7, -1.0).is_err());
        assert!(DampingProfile::new(0.3, 0.7, 1.0, DampingShape::SmoothRamp { eps: 0.3 }).is_err());
        assert!(DampingProfile::indicator(0.3, 0.7, 0.0).unwrap().is_zero());
    }

    #[test]
    fn slowness() {
        let p = PhysicalParams::default();
        assert_relative_eq!(p.slowness_bound(), 1.0);
        // slow branch speed^2 = (3 - sqrt 2)/2 for the defaults
        let c2 = (3.0 - 2f64.sqrt()) / 2.0;
        assert_relative_eq!(p.slow_branch_slowness(), 1.0 / c2.sqrt(), epsilon = 1e-12);
    }

    fn trapezoid(f: impl Fn(f64) -> f64, k: usize) -> f64 {
        let h = 1.0 / (k - 1) as f64;
        (0..k)
            .map(|i| {
                let w = if i == 0 || i == k - 1 { 0.5 } else { 1.0 };
                w * f(i as f64 * h)
            })
            .sum::<f64>()
            * h
    }

    #[test]
    fn discrete_orthonormality() {
        for j in 0..=8 {
            for k in 0..=8 {
                let ip = trapezoid(|y| ModeIndex(j).basis(y) * ModeIndex(k).basis(y), 2048);
                let delta = if j == k { 1.0 } else { 0.0 };
                assert!((ip - delta).abs() <= 1e-5, "j={j} k={k} ip={ip}");
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn validation_is_idempotent(
            rho in 1e-3f64..1e3, alpha in 1e-3f64..1e3, gamma in 0f64..10.0,
            mu in 1e-3f64..1e3, beta in 1e-3f64..1e3,
        ) {
            if let Ok(p) = PhysicalParams::new(rho, alpha, gamma, mu, beta) {
                proptest::prop_assert!(p.alpha1 > 0.0);
                proptest::prop_assert!((p.alpha1 + gamma * gamma * beta - alpha).abs() <= f64::EPSILON * alpha);
                proptest::prop_assert_eq!(p.revalidate().unwrap(), p);
            } else {
                proptest::prop_assert!(alpha <= gamma * gamma * beta);
            }
        }
    }
}
