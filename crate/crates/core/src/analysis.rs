//! Spectral and resolvent diagnostics of the modal generators, plus the
//! least-squares fits used to read growth and decay exponents off them.
//!
//! Every norm here is the energy norm of the mode. With `M = L L^T`
//! (Cholesky), `B = L^T A L^{-T}` is the generator written in coordinates
//! where that norm is Euclidean, so the eigenvalues of `A` are those of `B`
//! and `||(i lambda - A)^{-1}||_M = 1 / sigma_min(i lambda - B)`.

use std::sync::Arc;

use nalgebra::{Complex, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::assembly::{build_matrices, Grid1D, ModalOperator};
use crate::dynamics::EnergySample;
use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::model::{xi, DampingCoefficient, PhysicalParams};

pub type C64 = Complex<f64>;

/// Largest state dimension `4n` accepted by the dense routes.
pub const DENSE_CAP: usize = 4096;
/// Eigenvalues with real part above this are reported as unstable.
pub const TOL_POS: f64 = 1e-10;

fn check_dense(op: &ModalOperator) -> Result<()> {
    if op.dim() > DENSE_CAP {
        return Err(Error::DenseSizeCap {
            size: op.dim(),
            cap: DENSE_CAP,
        });
    }
    Ok(())
}

/// `L^T A L^{-T}` with `M = L L^T`.
pub fn symmetrized_generator(op: &ModalOperator) -> Result<DMatrix<f64>> {
    check_dense(op)?;
    let chol = op.gram_dense().cholesky().ok_or(Error::FactorizationFailure)?;
    let l = chol.l();
    let y = l.transpose() * op.to_dense();
    let xt = l
        .solve_lower_triangular(&y.transpose())
        .ok_or(Error::FactorizationFailure)?;
    Ok(xt.transpose())
}

/// All `4n` eigenvalues of `A_j`, sorted by imaginary then real part.
pub fn spectrum(op: &ModalOperator) -> Result<Vec<C64>> {
    let b = symmetrized_generator(op)?;
    let dim = b.nrows();
    let schur = nalgebra::linalg::Schur::try_new(b, f64::EPSILON, 200 * dim)
        .ok_or_else(|| Error::EigSolveFailure(format!("Schur iteration did not converge for mode {}", op.j)))?;
    let mut eig: Vec<C64> = schur.complex_eigenvalues().iter().copied().collect();
    if eig.len() != dim || eig.iter().any(|e| !e.re.is_finite() || !e.im.is_finite()) {
        return Err(Error::EigSolveFailure(format!("non-finite eigenvalue for mode {}", op.j)));
    }
    eig.sort_by(|a, b| a.im.total_cmp(&b.im).then(a.re.total_cmp(&b.re)));
    Ok(eig)
}

/// Spectrum summary of one mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSpectrum {
    pub j: usize,
    pub xi: f64,
    /// `[re, im]` pairs.
    pub eigenvalues: Vec<[f64; 2]>,
    /// Largest real part.
    pub abscissa: f64,
    /// Smallest `|Re|`.
    pub min_abs_real: f64,
    /// Smallest modulus, a witness that 0 is not an eigenvalue.
    pub min_modulus: f64,
}

impl ModeSpectrum {
    fn from_eigenvalues(j: usize, eig: &[C64]) -> Self {
        let abscissa = eig.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
        let min_abs_real = eig.iter().map(|e| e.re.abs()).fold(f64::INFINITY, f64::min);
        let min_modulus = eig.iter().map(|e| e.norm()).fold(f64::INFINITY, f64::min);
        Self {
            j,
            xi: xi(j),
            eigenvalues: eig.iter().map(|e| [e.re, e.im]).collect(),
            abscissa,
            min_abs_real,
            min_modulus,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub n: usize,
    pub tol_pos: f64,
    pub modes: Vec<ModeSpectrum>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fingerprint: Option<String>,
}

impl SpectralReport {
    pub fn max_abscissa(&self) -> f64 {
        self.modes.iter().map(|m| m.abscissa).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mode(&self, j: usize) -> Option<&ModeSpectrum> {
        self.modes.iter().find(|m| m.j == j)
    }
}

/// Spectra of the listed modes. Fails with `PositiveRealPart` on the first
/// mode (in list order) holding an eigenvalue with `Re > TOL_POS`.
pub fn spectral_report<D: DampingCoefficient + ?Sized>(
    params: &PhysicalParams,
    coeff: &D,
    grid: Grid1D,
    modes: &[usize],
) -> Result<SpectralReport> {
    let mats = Arc::new(build_matrices(grid, coeff));
    let results: Vec<Result<ModeSpectrum>> = modes
        .par_iter()
        .map(|&j| {
            let op = ModalOperator::from_matrices(*params, Arc::clone(&mats), j)?;
            Ok(ModeSpectrum::from_eigenvalues(j, &spectrum(&op)?))
        })
        .collect();
    let mut out = Vec::with_capacity(modes.len());
    for r in results {
        let m = r?;
        if let Some(bad) = m.eigenvalues.iter().find(|e| e[0] > TOL_POS) {
            return Err(Error::PositiveRealPart {
                mode: m.j,
                re: bad[0],
                im: bad[1],
            });
        }
        out.push(m);
    }
    Ok(SpectralReport {
        n: grid.n(),
        tol_pos: TOL_POS,
        modes: out,
        fingerprint: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbscissaRow {
    pub j: usize,
    pub xi: f64,
    pub abscissa: f64,
    pub min_abs_real: f64,
}

/// Spectral abscissa per mode, with a fit of `|s(j)| ~ c xi_j^(-sigma)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbscissaSweep {
    pub rows: Vec<AbscissaRow>,
    pub all_negative: bool,
    /// Fit of `|s|` against `xi`; its exponent is `-sigma`. Absent when
    /// some abscissa is not negative or fewer than four modes are present.
    pub decay_fit: Option<PowerFit>,
}

pub fn abscissa_sweep(report: &SpectralReport) -> AbscissaSweep {
    let rows: Vec<AbscissaRow> = report
        .modes
        .iter()
        .map(|m| AbscissaRow {
            j: m.j,
            xi: m.xi,
            abscissa: m.abscissa,
            min_abs_real: m.min_abs_real,
        })
        .collect();
    let all_negative = rows.iter().all(|r| r.abscissa < 0.0);
    let decay_fit = if all_negative {
        let xs: Vec<f64> = rows.iter().map(|r| r.xi).collect();
        let ys: Vec<f64> = rows.iter().map(|r| -r.abscissa).collect();
        fit_power_law(&xs, &ys).ok()
    } else {
        None
    };
    AbscissaSweep {
        rows,
        all_negative,
        decay_fit,
    }
}

/// Dense reference for the resolvent norm: `1 / sigma_min(i lambda - B)`.
pub fn resolvent_norm_dense(op: &ModalOperator, lambda: f64) -> Result<f64> {
    let b = symmetrized_generator(op)?;
    let dim = b.nrows();
    let shifted = DMatrix::from_fn(dim, dim, |r, c| {
        let diag = if r == c { C64::new(0.0, lambda) } else { C64::new(0.0, 0.0) };
        diag - C64::new(b[(r, c)], 0.0)
    });
    let svd = shifted
        .try_svd(false, false, f64::EPSILON, 0)
        .ok_or_else(|| Error::EigSolveFailure("SVD did not converge".into()))?;
    let smin = svd.singular_values.min();
    if !(smin > 0.0) {
        return Err(Error::LinearSolveFailure { row: 0 });
    }
    Ok(1.0 / smin)
}

const LANCZOS_MAX_ITER: usize = 150;
const LANCZOS_TOL: f64 = 1e-10;
const LANCZOS_SEED: u64 = 0x5eed_1a9c;

/// Largest eigenpair of `W = R^dagger R` found by Lanczos in the `M`
/// inner product, where `R = (i lambda - A)^{-1}`.
struct LargestSingular {
    norm: f64,
    /// Maximizer of `||R x||_M / ||x||_M`.
    x: Vec<C64>,
    /// `R x`.
    rx: Vec<C64>,
    iterations: usize,
}

fn largest_singular(op: &ModalOperator, lambda: f64) -> Result<LargestSingular> {
    let sigma = C64::new(0.0, lambda);
    let forward = op.shifted_solver(sigma, 1.0)?;
    // (sigma - A)^dagger = -((-conj sigma) - A_{-d})
    let backward = op.shifted_solver(-sigma.conj(), -1.0)?;
    let apply_w = |x: &[C64]| -> Vec<C64> {
        let y = forward.solve(x);
        backward.solve(&y).into_iter().map(|v| -v).collect()
    };
    let dim = op.dim();
    let m_norm = |x: &[C64]| op.energy_inner(x, x).re.max(0.0).sqrt();

    let mut rng = ChaCha8Rng::seed_from_u64(LANCZOS_SEED);
    let mut q: Vec<C64> = (0..dim)
        .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let n0 = m_norm(&q);
    q.iter_mut().for_each(|v| *v /= n0);

    let kmax = LANCZOS_MAX_ITER.min(dim);
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(kmax);
    let mut m_basis: Vec<Vec<C64>> = Vec::with_capacity(kmax);
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut best = (0.0, vec![1.0]);
    let mut iterations = 0;
    for k in 0..kmax {
        iterations = k + 1;
        let mq = op.apply_gram(&q);
        let mut w = apply_w(&q);
        let alpha = dot(&mq, &w).re;
        basis.push(q.clone());
        m_basis.push(mq);
        alphas.push(alpha);
        // full reorthogonalization (two passes) in the M inner product
        for _ in 0..2 {
            for (b, mb) in basis.iter().zip(&m_basis) {
                let c = dot(mb, &w);
                w.iter_mut().zip(b).for_each(|(wi, bi)| *wi -= c * bi);
            }
        }
        let beta = m_norm(&w);
        let t = DMatrix::from_fn(k + 1, k + 1, |r, c| {
            if r == c {
                alphas[r]
            } else if r + 1 == c {
                betas.get(r).copied().unwrap_or(0.0)
            } else if c + 1 == r {
                betas.get(c).copied().unwrap_or(0.0)
            } else {
                0.0
            }
        });
        let eig = t.symmetric_eigen();
        let imax = eig.eigenvalues.imax();
        let theta = eig.eigenvalues[imax];
        let y: Vec<f64> = eig.eigenvectors.column(imax).iter().copied().collect();
        let residual = beta * y[k].abs();
        best = (theta, y);
        if residual <= LANCZOS_TOL * theta.abs() || beta <= f64::EPSILON * theta.abs() {
            break;
        }
        betas.push(beta);
        w.iter_mut().for_each(|v| *v /= beta);
        q = w;
    }
    let (theta, y) = best;
    let mut x = vec![C64::new(0.0, 0.0); dim];
    for (b, &coef) in basis.iter().zip(&y) {
        x.iter_mut().zip(b).for_each(|(xi, bi)| *xi += bi * coef);
    }
    let rx = forward.solve(&x);
    let ratio = m_norm(&rx) / m_norm(&x);
    let norm = ratio.max(theta.max(0.0).sqrt());
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::EigSolveFailure(format!(
            "Lanczos produced an invalid norm at lambda = {lambda}"
        )));
    }
    Ok(LargestSingular {
        norm,
        x,
        rx,
        iterations,
    })
}

/// `||(i lambda - A_j)^{-1}||` in the energy norm, by Lanczos on
/// `R^dagger R` with two banded solves per iteration.
pub fn resolvent_norm(op: &ModalOperator, lambda: f64) -> Result<f64> {
    Ok(largest_singular(op, lambda)?.norm)
}

/// Worst quasimode of `i lambda - A_j` and its damped observables.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Quasimode {
    pub j: usize,
    pub lambda: f64,
    pub resolvent_norm: f64,
    /// `||(i lambda - A) U||_M` for the unit-energy state below.
    pub residual: f64,
    /// `z^* D z`.
    pub damped_kinetic: f64,
    /// `lambda^2 v^* D v`.
    pub damped_displacement: f64,
    /// `[re, im]` pairs of the stacked state `(v, z, p, q)`.
    #[serde(skip)]
    pub state: Vec<C64>,
    pub lanczos_iterations: usize,
}

pub fn quasimode_diagnostics(op: &ModalOperator, lambda: f64) -> Result<Quasimode> {
    let ls = largest_singular(op, lambda)?;
    let rn = op.energy_inner(&ls.rx, &ls.rx).re.sqrt();
    let state: Vec<C64> = ls.rx.iter().map(|v| v / rn).collect();
    let xn = op.energy_inner(&ls.x, &ls.x).re.sqrt();
    Ok(Quasimode {
        j: op.j,
        lambda,
        resolvent_norm: ls.norm,
        residual: xn / rn,
        damped_kinetic: op.dissipated_power(&state),
        damped_displacement: op.damped_displacement(&state, lambda),
        state,
        lanczos_iterations: ls.iterations,
    })
}

/// `(i lambda - A) U`.
pub fn apply_shifted(op: &ModalOperator, lambda: f64, u: &[C64]) -> Vec<C64> {
    let au = op.apply(u);
    u.iter()
        .zip(au)
        .map(|(ui, ai)| C64::new(0.0, lambda) * ui - ai)
        .collect()
}

/// Which modes a resolvent sweep includes at frequency `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModePolicy {
    pub slowness_factor: f64,
    pub extra_modes: usize,
    /// Hard upper bound on the number of modes.
    pub cap: Option<usize>,
}

impl Default for ModePolicy {
    fn default() -> Self {
        Self {
            slowness_factor: 2.0,
            extra_modes: 4,
            cap: None,
        }
    }
}

impl ModePolicy {
    /// Number of modes `j = 0..count` included at `lambda`: every mode up to
    /// the first with `xi_j > factor * lambda * slowness`, then `extra_modes`
    /// more. The slowness is the larger of the decoupled wave slownesses and
    /// the exact slow-branch slowness of the coupled system.
    pub fn modes_for(&self, params: &PhysicalParams, lambda: f64) -> usize {
        let slowness = params.slowness_bound().max(params.slow_branch_slowness());
        let limit = self.slowness_factor * lambda.abs() * slowness;
        let mut j = 0;
        while xi(j) <= limit {
            j += 1;
        }
        let count = j + 1 + self.extra_modes;
        self.cap.map_or(count, |c| count.min(c))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolventPoint {
    pub lambda: f64,
    pub sup_norm: f64,
    pub argmax_mode: usize,
    pub modes_included: usize,
    /// Norms of the last three included modes.
    pub tail: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolventReport {
    pub n: usize,
    pub policy: ModePolicy,
    pub points: Vec<ResolventPoint>,
    /// Fit of `sup_j N` against `lambda`.
    pub fit: PowerFit,
    /// Fit of the running maximum of `sup_j N` (a monotone envelope),
    /// reported as a diagnostic alongside the pointwise fit.
    pub envelope_fit: PowerFit,
}

impl ResolventReport {
    pub fn curve(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.points.iter().map(|p| p.lambda).collect(),
            self.points.iter().map(|p| p.sup_norm).collect(),
        )
    }
}

/// `count` log-spaced points from `lo` to `hi` inclusive.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| {
            if i == 0 {
                lo
            } else if i + 1 == count {
                hi
            } else {
                (a + (b - a) * i as f64 / (count - 1) as f64).exp()
            }
        })
        .collect()
}

fn validate_lambda_grid(lambdas: &[f64]) -> Result<()> {
    if lambdas.len() < 12 {
        return Err(Error::InvalidInput(format!(
            "resolvent sweep needs at least 12 frequencies, got {}",
            lambdas.len()
        )));
    }
    if lambdas.iter().any(|l| !(*l > 0.0 && l.is_finite())) || lambdas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput(
            "frequencies must be positive, finite and strictly increasing".into(),
        ));
    }
    if lambdas[lambdas.len() - 1] < 100.0 * lambdas[0] * (1.0 - 1e-12) {
        return Err(Error::InvalidInput("frequency grid must span at least two decades".into()));
    }
    Ok(())
}

/// Core of the sweep, generic in the per-mode norm so it can be exercised
/// on closed-form models.
pub fn sweep_with<F>(lambdas: &[f64], modes_for: impl Fn(f64) -> usize, norm: F) -> Result<Vec<ResolventPoint>>
where
    F: Fn(f64, usize) -> Result<f64> + Sync,
{
    validate_lambda_grid(lambdas)?;
    let counts: Vec<usize> = lambdas.iter().map(|&l| modes_for(l)).collect();
    let tasks: Vec<(usize, usize)> = counts
        .iter()
        .enumerate()
        .flat_map(|(i, &c)| (0..c).map(move |j| (i, j)))
        .collect();
    let values: Vec<Result<f64>> = tasks.par_iter().map(|&(i, j)| norm(lambdas[i], j)).collect();

    let mut points = Vec::with_capacity(lambdas.len());
    let mut it = values.into_iter();
    for (&lambda, &count) in lambdas.iter().zip(&counts) {
        let norms: Vec<f64> = it.by_ref().take(count).collect::<Result<_>>()?;
        if let Some(bad) = norms.iter().position(|v| !(*v > 0.0)) {
            return Err(Error::InvalidInput(format!(
                "non-positive resolvent norm at lambda = {lambda}, mode {bad}"
            )));
        }
        let (argmax, sup) = norms
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (j, &v)| if v > acc.1 { (j, v) } else { acc });
        let tail = if count >= 3 {
            [norms[count - 3], norms[count - 2], norms[count - 1]]
        } else {
            [f64::NAN; 3]
        };
        if !(tail[0] > tail[1] && tail[1] > tail[2]) {
            return Err(Error::ModeCutoffSuspect { lambda, tail });
        }
        points.push(ResolventPoint {
            lambda,
            sup_norm: sup,
            argmax_mode: argmax,
            modes_included: count,
            tail,
        });
    }
    Ok(points)
}

fn running_max(ys: &[f64]) -> Vec<f64> {
    ys.iter()
        .scan(f64::NEG_INFINITY, |m, &y| {
            *m = m.max(y);
            Some(*m)
        })
        .collect()
}

/// Supremum over modes of the resolvent norm on a frequency grid.
pub fn resolvent_sweep<D: DampingCoefficient + ?Sized>(
    params: &PhysicalParams,
    coeff: &D,
    grid: Grid1D,
    lambdas: &[f64],
    policy: ModePolicy,
) -> Result<ResolventReport> {
    let mats = Arc::new(build_matrices(grid, coeff));
    mats.mass.factor_spd().ok_or(Error::FactorizationFailure)?;
    let points = sweep_with(
        lambdas,
        |l| policy.modes_for(params, l),
        |lambda, j| {
            let op = ModalOperator::from_matrices(*params, Arc::clone(&mats), j)?;
            resolvent_norm(&op, lambda)
        },
    )?;
    let xs: Vec<f64> = points.iter().map(|p| p.lambda).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.sup_norm).collect();
    Ok(ResolventReport {
        n: grid.n(),
        policy,
        fit: fit_power_law(&xs, &ys)?,
        envelope_fit: fit_power_law(&xs, &running_max(&ys))?,
        points,
    })
}

/// Least-squares line through `(ln x, ln y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub exponent: f64,
    pub prefactor: f64,
    /// Standard error of the exponent.
    pub stderr: f64,
    /// Half-width of the 95% confidence interval of the exponent.
    pub ci95: f64,
    pub r_squared: f64,
    pub points: usize,
}

pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<PowerFit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            found: ys.len(),
        });
    }
    let n = xs.len();
    if n < 4 {
        return Err(Error::DegenerateFit(format!("need at least 4 points, got {n}")));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::DegenerateFit("power-law fit needs positive finite data".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let nf = n as f64;
    let mx = lx.iter().sum::<f64>() / nf;
    let my = ly.iter().sum::<f64>() / nf;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    if !(sxx > 1e-14 * nf * (1.0 + mx * mx)) {
        return Err(Error::DegenerateFit("zero variance in log x".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let stderr = (sse / (nf - 2.0) / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, nf - 2.0)
        .map_err(|e| Error::DegenerateFit(e.to_string()))?
        .inverse_cdf(0.975);
    Ok(PowerFit {
        exponent: slope,
        prefactor: intercept.exp(),
        stderr,
        ci95: t * stderr,
        r_squared,
        points: n,
    })
}

/// Second-order coefficient `c2` of a quadratic least-squares fit
/// `y = c0 + c1 x + c2 x^2`.
fn quadratic_curvature(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n < 4 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let v = DMatrix::from_fn(n, 3, |r, c| (xs[r] - mx).powi(c as i32));
    let rhs = nalgebra::DVector::from_column_slice(ys);
    let sol = v.clone().svd(true, true).solve(&rhs, 1e-12).ok()?;
    Some(sol[2])
}

/// Curvature `|d^2 ln E / d (ln t)^2|` above which a window is flagged.
pub const CURVATURE_LIMIT: f64 = 0.25;
/// Points used after log-uniform resampling of a decay window.
pub const DECAY_RESAMPLE: usize = 64;
/// Steepening of the local log-log slope that marks the onset of a fast tail.
pub const TAIL_STEEPENING: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFitReport {
    pub window: [f64; 2],
    /// `kappa` in `E ~ C t^(-kappa)`.
    pub kappa: f64,
    pub stderr: f64,
    pub ci95: f64,
    pub r_squared: f64,
    /// Same regression against `1 + t`, which removes the bias of a finite
    /// initial energy on short windows.
    pub kappa_shifted: f64,
    /// `d^2 ln E / d (ln t)^2` from a quadratic fit.
    pub curvature: f64,
    pub curvature_flag: bool,
    /// First time at which the local log-log slope has steepened by more
    /// than `TAIL_STEEPENING` relative to the start of the window.
    pub tail_onset: Option<f64>,
    pub points: usize,
}

/// Power-law fit of an energy history over `window = [t1, t2]`.
///
/// The samples inside the window are thinned to at most `DECAY_RESAMPLE`
/// log-uniformly spaced times so that each decade carries equal weight.
pub fn decay_fit(samples: &[EnergySample], window: [f64; 2]) -> Result<DecayFitReport> {
    let [t1, t2] = window;
    if !(t1 >= 1.0) || !(t2 >= 10.0 * t1) {
        return Err(Error::InvalidInput(format!(
            "fit window [{t1}, {t2}] must start at t >= 1 and span at least a decade"
        )));
    }
    if samples.windows(2).any(|w| w[1].t <= w[0].t) {
        return Err(Error::InvalidInput("sample times must be strictly increasing".into()));
    }
    let inside: Vec<&EnergySample> = samples.iter().filter(|s| s.t >= t1 && s.t <= t2).collect();
    if inside.len() < 4 {
        return Err(Error::InvalidInput(format!(
            "window [{t1}, {t2}] holds {} samples, need at least 4",
            inside.len()
        )));
    }
    if let Some(s) = inside.iter().find(|s| !(s.energy > 0.0)) {
        return Err(Error::InvalidInput(format!("energy not positive at t = {}", s.t)));
    }
    let (lo, hi) = (inside[0].t, inside[inside.len() - 1].t);
    let mut picked: Vec<usize> = log_spaced(lo, hi, DECAY_RESAMPLE.min(inside.len()))
        .into_iter()
        .map(|t| {
            let k = inside.partition_point(|s| s.t < t);
            if k == 0 {
                0
            } else if k == inside.len() || (t - inside[k - 1].t) <= (inside[k].t - t) {
                k - 1
            } else {
                k
            }
        })
        .collect();
    picked.dedup();
    let ts: Vec<f64> = picked.iter().map(|&k| inside[k].t).collect();
    let es: Vec<f64> = picked.iter().map(|&k| inside[k].energy).collect();

    let fit = fit_power_law(&ts, &es)?;
    let shifted: Vec<f64> = ts.iter().map(|t| 1.0 + t).collect();
    let fit_shifted = fit_power_law(&shifted, &es)?;
    let lt: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let le: Vec<f64> = es.iter().map(|e| e.ln()).collect();
    let curvature = 2.0 * quadratic_curvature(&lt, &le).unwrap_or(0.0);

    // local slopes over a sliding span of a quarter of the points
    let span = (lt.len() / 4).max(2);
    let slopes: Vec<(f64, f64)> = (0..lt.len().saturating_sub(span))
        .map(|i| (ts[i], (le[i + span] - le[i]) / (lt[i + span] - lt[i])))
        .collect();
    let tail_onset = slopes
        .first()
        .and_then(|&(_, s0)| slopes.iter().find(|(_, s)| *s < s0 - TAIL_STEEPENING).map(|(t, _)| *t));

    Ok(DecayFitReport {
        window,
        kappa: -fit.exponent,
        stderr: fit.stderr,
        ci95: fit.ci95,
        r_squared: fit.r_squared,
        kappa_shifted: -fit_shifted.exponent,
        curvature,
        curvature_flag: curvature.abs() > CURVATURE_LIMIT,
        tail_onset,
        points: ts.len(),
    })
}
