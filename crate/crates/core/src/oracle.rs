//! Independent reference computations: analytic undamped frequencies,
//! dense matrix-exponential propagation and mesh convergence studies.
//!
//! # Undamped dispersion relation
//!
//! With `d = 0` and the boundary conditions (Dirichlet on `x = 0, y = 0`,
//! Neumann on `x = 1, y = 1`), both fields separate as
//! `sin(eta_m x) sqrt(2) sin(xi_j y) e^{i omega t}` with
//! `eta_m = (2m + 1) pi / 2`. Writing `kappa^2 = xi_j^2 + eta_m^2`, the
//! amplitudes `(V, P)` satisfy
//!
//! ```text
//! [ alpha kappa^2 - rho omega^2     -gamma beta kappa^2     ] [V]   [0]
//! [ -gamma beta kappa^2          beta kappa^2 - mu omega^2  ] [P] = [0]
//! ```
//!
//! and the determinant gives the quadratic in `omega^2`
//! `rho mu omega^4 - (rho beta + mu alpha) kappa^2 omega^2 + beta alpha1 kappa^4 = 0`,
//! using `alpha beta - gamma^2 beta^2 = beta alpha1`. Its discriminant is
//! `(rho beta - mu alpha)^2 + 4 rho mu gamma^2 beta^2 >= 0`, and both roots
//! are positive because their product and sum are.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::analysis;
use crate::assembly::{Grid1D, ModalOperator};
use crate::error::{Error, Result};
use crate::model::{xi, PhysicalParams};

/// The two undamped frequencies of the separated mode `(j, m)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DispersionRoots {
    pub j: usize,
    pub m: usize,
    pub kappa_sq: f64,
    pub omega_plus: f64,
    pub omega_minus: f64,
}

impl DispersionRoots {
    /// Value of the quartic at `omega^2 = w`.
    pub fn quartic(params: &PhysicalParams, kappa_sq: f64, w: f64) -> f64 {
        let PhysicalParams {
            rho,
            alpha,
            mu,
            beta,
            alpha1,
            ..
        } = *params;
        rho * mu * w * w - (rho * beta + mu * alpha) * kappa_sq * w + beta * alpha1 * kappa_sq * kappa_sq
    }
}

pub fn eta(m: usize) -> f64 {
    (2 * m + 1) as f64 * FRAC_PI_2
}

/// Exact roots of the undamped dispersion relation.
pub fn undamped_frequencies(params: &PhysicalParams, j: usize, m: usize) -> DispersionRoots {
    let PhysicalParams {
        rho,
        alpha,
        gamma,
        mu,
        beta,
        alpha1,
    } = *params;
    let kappa_sq = xi(j).powi(2) + eta(m).powi(2);
    let b = (rho * beta + mu * alpha) * kappa_sq;
    let c = beta * alpha1 * kappa_sq * kappa_sq;
    // discriminant written as a sum of squares to avoid cancellation
    let disc = ((rho * beta - mu * alpha).powi(2) + 4.0 * rho * mu * (gamma * beta).powi(2)).sqrt() * kappa_sq;
    let plus = (b + disc) / (2.0 * rho * mu);
    // product of roots / larger root
    let minus = c / (rho * mu * plus);
    DispersionRoots {
        j,
        m,
        kappa_sq,
        omega_plus: plus.sqrt(),
        omega_minus: minus.sqrt(),
    }
}

/// Size cap for the dense exponential oracle.
pub const EXPM_SIZE_CAP: usize = 512;
const MAX_SQUARINGS: u32 = 64;

// [6/6] Pade coefficients of exp
const PADE6: [f64; 7] = [
    1.0,
    1.0 / 2.0,
    5.0 / 44.0,
    1.0 / 66.0,
    1.0 / 792.0,
    1.0 / 15840.0,
    1.0 / 665280.0,
];

/// Matrix exponential by scaling and squaring with a diagonal [6/6] Pade
/// kernel, scaled so that the 1-norm of the kernel argument is at most 1/2.
pub fn expm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: a.ncols(),
        });
    }
    let norm1 = (0..n).map(|c| a.column(c).abs().sum()).fold(0.0, f64::max);
    let mut squarings = 0u32;
    if norm1 > 0.5 {
        squarings = (norm1 / 0.5).log2().ceil() as u32;
    }
    if squarings > MAX_SQUARINGS {
        return Err(Error::OverScaleLimit {
            squarings,
            limit: MAX_SQUARINGS,
        });
    }
    let x = a / 2f64.powi(squarings as i32);
    let id = DMatrix::<f64>::identity(n, n);
    let x2 = &x * &x;
    let x4 = &x2 * &x2;
    let x6 = &x4 * &x2;
    let even = &id * PADE6[0] + &x2 * PADE6[2] + &x4 * PADE6[4] + &x6 * PADE6[6];
    let odd = &x * (&id * PADE6[1] + &x2 * PADE6[3] + &x4 * PADE6[5]);
    let num = &even + &odd;
    let den = &even - &odd;
    let mut e = den.lu().solve(&num).ok_or(Error::LinearSolveFailure { row: 0 })?;
    for _ in 0..squarings {
        e = &e * &e;
    }
    Ok(e)
}

/// `exp(t A_j) U0` through the dense exponential.
pub fn dense_expm_propagate(op: &ModalOperator, u0: &[f64], t: f64) -> Result<Vec<f64>> {
    if op.dim() > EXPM_SIZE_CAP {
        return Err(Error::DenseSizeCap {
            size: op.dim(),
            cap: EXPM_SIZE_CAP,
        });
    }
    if u0.len() != op.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            found: u0.len(),
        });
    }
    if t == 0.0 {
        return Ok(u0.to_vec());
    }
    let e = expm(&(op.to_dense() * t))?;
    Ok((e * DVector::from_column_slice(u0)).as_slice().to_vec())
}

/// Which root of the dispersion quadratic a target refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Minus,
    Plus,
}

/// Errors of one discrete undamped frequency across a refinement sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceStudy {
    pub j: usize,
    pub m: usize,
    pub branch: Branch,
    pub exact: f64,
    pub n_list: Vec<usize>,
    pub numerical: Vec<f64>,
    pub errors: Vec<f64>,
    /// `log(e_k / e_{k+1}) / log(n_{k+1} / n_k)` for consecutive pairs.
    pub observed_orders: Vec<f64>,
    /// Order estimated from the last three numerical values alone.
    pub richardson_order: Option<f64>,
}

impl ConvergenceStudy {
    pub fn min_order(&self) -> f64 {
        self.observed_orders.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn target_frequency(params: &PhysicalParams, j: usize, m: usize, branch: Branch) -> f64 {
    let roots = undamped_frequencies(params, j, m);
    match branch {
        Branch::Plus => roots.omega_plus,
        Branch::Minus => roots.omega_minus,
    }
}

/// Undamped frequencies of the discrete `A_j` (positive imaginary parts, ascending).
pub fn discrete_frequencies(params: &PhysicalParams, grid: Grid1D, j: usize) -> Result<Vec<f64>> {
    let op = ModalOperator::assemble(*params, &|_x: f64| 0.0, grid, j)?;
    let eig = analysis::spectrum(&op)?;
    let mut w: Vec<f64> = eig.iter().filter(|e| e.im > 0.0).map(|e| e.im).collect();
    w.sort_by(f64::total_cmp);
    Ok(w)
}

/// Refinement study of the discrete frequency matching `(j, m, branch)`.
pub fn convergence_study(
    params: &PhysicalParams,
    j: usize,
    m: usize,
    branch: Branch,
    n_list: &[usize],
) -> Result<ConvergenceStudy> {
    if n_list.len() < 3 || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput(
            "refinement needs at least three strictly increasing grid sizes".into(),
        ));
    }
    let exact = target_frequency(params, j, m, branch);
    if !(exact > 0.0) {
        return Err(Error::InvalidInput(format!("exact frequency must be positive, got {exact}")));
    }
    let mut numerical = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let w = discrete_frequencies(params, Grid1D::new(n)?, j)?;
        // nearest discrete frequency; valid while the discretization error
        // stays below half the local spectral gap
        let value = w
            .iter()
            .copied()
            .min_by(|a, b| (a - exact).abs().total_cmp(&(b - exact).abs()))
            .ok_or_else(|| Error::InvalidInput(format!("grid n = {n} resolves no frequencies")))?;
        numerical.push(value);
    }
    let errors: Vec<f64> = numerical.iter().map(|w| (w - exact).abs()).collect();
    let observed_orders = errors
        .windows(2)
        .zip(n_list.windows(2))
        .map(|(e, n)| (e[0] / e[1]).ln() / (n[1] as f64 / n[0] as f64).ln())
        .collect();
    let k = numerical.len();
    let richardson_order = {
        let (w1, w2, w3) = (numerical[k - 3], numerical[k - 2], numerical[k - 1]);
        let ratio = n_list[k - 1] as f64 / n_list[k - 2] as f64;
        let q = (w1 - w2) / (w2 - w3);
        (q > 0.0).then(|| q.ln() / ratio.ln())
    };
    Ok(ConvergenceStudy {
        j,
        m,
        branch,
        exact,
        n_list: n_list.to_vec(),
        numerical,
        errors,
        observed_orders,
        richardson_order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DampingProfile;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn decoupled_equal_speeds() {
        let p = PhysicalParams::new(1.0, 1.0, 0.0, 1.0, 1.0).unwrap();
        let r = undamped_frequencies(&p, 0, 0);
        assert_relative_eq!(r.kappa_sq, PI * PI / 2.0, max_relative = 1e-15);
        assert_relative_eq!(r.omega_plus, PI / 2f64.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(r.omega_minus, PI / 2f64.sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn default_roots() {
        let p = PhysicalParams::default();
        for (j, m) in [(0, 0), (3, 1), (10, 7)] {
            let r = undamped_frequencies(&p, j, m);
            let k2 = r.kappa_sq;
            assert_relative_eq!(r.omega_plus.powi(2), k2 * (3.0 + 2f64.sqrt()) / 2.0, max_relative = 1e-14);
            assert_relative_eq!(r.omega_minus.powi(2), k2 * (3.0 - 2f64.sqrt()) / 2.0, max_relative = 1e-14);
            assert_relative_eq!(
                r.omega_plus.powi(2) * r.omega_minus.powi(2),
                p.beta * p.alpha1 * k2 * k2 / (p.rho * p.mu),
                max_relative = 1e-14
            );
            for w in [r.omega_plus, r.omega_minus] {
                let res = DispersionRoots::quartic(&p, k2, w * w);
                assert!(res.abs() <= 1e-10 * p.rho * p.mu * k2 * k2);
            }
            assert!(r.omega_plus >= r.omega_minus && r.omega_minus > 0.0);
        }
    }

    proptest::proptest! {
        #[test]
        fn roots_solve_quartic(
            rho in 0.1f64..10.0, alpha in 0.1f64..10.0, g in 0f64..0.99,
            mu in 0.1f64..10.0, beta in 0.1f64..10.0, j in 0usize..40, m in 0usize..40,
        ) {
            // gamma chosen so that alpha > gamma^2 beta
            let gamma = g * (alpha / beta).sqrt();
            let p = PhysicalParams::new(rho, alpha, gamma, mu, beta).unwrap();
            let r = undamped_frequencies(&p, j, m);
            for w in [r.omega_plus, r.omega_minus] {
                let res = DispersionRoots::quartic(&p, r.kappa_sq, w * w);
                let scale = (rho * mu * w.powi(4)).max(beta * p.alpha1 * r.kappa_sq.powi(2));
                proptest::prop_assert!(res.abs() <= 1e-10 * scale);
            }
            proptest::prop_assert!(r.omega_plus >= r.omega_minus && r.omega_minus > 0.0);
        }
    }

    #[test]
    fn expm_identity_and_scalar() {
        let z = DMatrix::<f64>::zeros(3, 3);
        assert_eq!(expm(&z).unwrap(), DMatrix::identity(3, 3));
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 3.0, -3.0, 0.0]);
        let e = expm(&a).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[3f64.cos(), 3f64.sin(), -(3f64.sin()), 3f64.cos()]);
        assert!((e - expect).abs().max() < 1e-13);
    }

    #[test]
    fn expm_matches_nalgebra() {
        let op = ModalOperator::assemble(PhysicalParams::default(), &DampingProfile::default(), Grid1D::new(6).unwrap(), 1)
            .unwrap();
        let a = op.to_dense() * 0.7;
        let ours = expm(&a).unwrap();
        let theirs = a.exp();
        assert!((&ours - &theirs).abs().max() < 1e-10 * theirs.abs().max());
    }

    #[test]
    fn expm_limits() {
        let big = DMatrix::from_element(2, 2, 1e300);
        assert!(matches!(expm(&big), Err(Error::OverScaleLimit { .. })));
        let op = ModalOperator::assemble(PhysicalParams::default(), &DampingProfile::default(), Grid1D::new(129).unwrap(), 0)
            .unwrap();
        assert!(matches!(
            dense_expm_propagate(&op, &vec![0.0; op.dim()], 1.0),
            Err(Error::DenseSizeCap { .. })
        ));
    }

    #[test]
    fn propagate_zero_time_and_unitary() {
        let zero = DampingProfile::default().scaled(0.0).unwrap();
        let op = ModalOperator::assemble(PhysicalParams::default(), &zero, Grid1D::new(8).unwrap(), 0).unwrap();
        let u0: Vec<f64> = (0..op.dim()).map(|i| ((i * 7 % 5) as f64 - 2.0) * 0.3).collect();
        assert_eq!(dense_expm_propagate(&op, &u0, 0.0).unwrap(), u0);
        let u = dense_expm_propagate(&op, &u0, 1.3).unwrap();
        let n0 = crate::assembly::energy_norm(&u0, &op).unwrap();
        let n1 = crate::assembly::energy_norm(&u, &op).unwrap();
        assert!((n1 - n0).abs() <= 1e-10 * n0);
    }

    #[test]
    fn convergence_rejects_bad_lists() {
        let p = PhysicalParams::default();
        assert!(convergence_study(&p, 0, 0, Branch::Minus, &[8, 16]).is_err());
        assert!(convergence_study(&p, 0, 0, Branch::Minus, &[8, 8, 16]).is_err());
    }

    #[test]
    fn fast_branch_of_high_mode_is_matched() {
        let p = PhysicalParams::default();
        let s = convergence_study(&p, 16, 0, Branch::Plus, &[16, 32, 64]).unwrap();
        assert!(s.min_order() > 1.9, "{s:?}");
    }

    #[test]
    fn lowest_mode_converges_quadratically() {
        let p = PhysicalParams::default();
        let s = convergence_study(&p, 0, 0, Branch::Minus, &[8, 16, 32]).unwrap();
        assert!(s.errors[2] < s.errors[0]);
        assert!(s.min_order() > 1.9, "{s:?}");
        assert!((s.richardson_order.unwrap() - 2.0).abs() < 0.1);
    }
}
