//! Time integration of the modal system with the trapezoidal (Cayley) rule.
//!
//! One step solves `(I - dt/2 A_j) U^{k+1} = (I + dt/2 A_j) U^k` for every
//! mode. Because `A_j` is dissipative in the `M_j` inner product, the update
//! satisfies `E^{k+1} - E^k = -dt z_mid^* D z_mid` exactly, where `z_mid` is
//! the velocity block of `(U^k + U^{k+1}) / 2`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::assembly::{Grid1D, ModalOperator, ShiftedSolver};
use crate::error::{Error, Result};
use crate::model::{ModeIndex, PhysicalParams};

/// State of every retained mode at time `t`; mode `j` is stacked as `[v, z, p, q]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalState {
    pub t: f64,
    pub grid: Grid1D,
    pub modes: Vec<Vec<f64>>,
}

impl ModalState {
    pub fn zeros(grid: Grid1D, count: usize) -> Self {
        Self {
            t: 0.0,
            grid,
            modes: vec![vec![0.0; 4 * grid.n()]; count],
        }
    }

    pub fn num_modes(&self) -> usize {
        self.modes.len()
    }

    fn check_ops(&self, ops: &[ModalOperator]) -> Result<()> {
        if ops.len() < self.modes.len() {
            return Err(Error::DimensionMismatch {
                expected: self.modes.len(),
                found: ops.len(),
            });
        }
        for (u, op) in self.modes.iter().zip(ops) {
            if u.len() != op.dim() {
                return Err(Error::DimensionMismatch {
                    expected: op.dim(),
                    found: u.len(),
                });
            }
        }
        Ok(())
    }

    /// Total energy `sum_j U_j^* M_j U_j / 2`.
    pub fn energy(&self, ops: &[ModalOperator]) -> Result<f64> {
        self.check_ops(ops)?;
        Ok(self
            .modes
            .iter()
            .zip(ops)
            .map(|(u, op)| 0.5 * op.energy_inner(u, u))
            .sum())
    }

    /// Instantaneous dissipated power `sum_j z_j^* D z_j`.
    pub fn dissipated_power(&self, ops: &[ModalOperator]) -> Result<f64> {
        self.check_ops(ops)?;
        Ok(self
            .modes
            .iter()
            .zip(ops)
            .map(|(u, op)| op.dissipated_power(u))
            .sum())
    }
}

type Field = Box<dyn Fn(f64, f64) -> f64 + Sync>;

/// Initial displacement, velocity, charge and charge rate on the unit square.
pub struct InitialFields {
    pub v0: Field,
    pub v1: Field,
    pub p0: Field,
    pub p1: Field,
}

impl InitialFields {
    pub fn zero() -> Self {
        Self {
            v0: Box::new(|_, _| 0.0),
            v1: Box::new(|_, _| 0.0),
            p0: Box::new(|_, _| 0.0),
            p1: Box::new(|_, _| 0.0),
        }
    }

    pub fn with_v0(mut self, f: impl Fn(f64, f64) -> f64 + Sync + 'static) -> Self {
        self.v0 = Box::new(f);
        self
    }

    pub fn with_v1(mut self, f: impl Fn(f64, f64) -> f64 + Sync + 'static) -> Self {
        self.v1 = Box::new(f);
        self
    }

    pub fn with_p0(mut self, f: impl Fn(f64, f64) -> f64 + Sync + 'static) -> Self {
        self.p0 = Box::new(f);
        self
    }

    pub fn with_p1(mut self, f: impl Fn(f64, f64) -> f64 + Sync + 'static) -> Self {
        self.p1 = Box::new(f);
        self
    }
}

/// Projects the fields onto modes `0..count` by composite trapezoid quadrature
/// in `y` with `ky` equally spaced points (endpoints included).
pub fn project_initial(fields: &InitialFields, grid: Grid1D, count: usize, ky: usize) -> Result<ModalState> {
    if count == 0 {
        return Err(Error::InvalidInput("at least one mode is required".into()));
    }
    let needed = 4 * count;
    if ky < needed {
        return Err(Error::QuadratureUnderResolved {
            points: ky,
            modes: count,
            needed,
        });
    }
    let n = grid.n();
    let hy = 1.0 / (ky - 1) as f64;
    let ys: Vec<f64> = (0..ky).map(|k| k as f64 * hy).collect();
    let weights: Vec<f64> = (0..ky)
        .map(|k| if k == 0 || k == ky - 1 { 0.5 * hy } else { hy })
        .collect();
    let xs = grid.unknown_nodes();
    let sources = [&fields.v0, &fields.v1, &fields.p0, &fields.p1];

    // samples[field][i][k] = f(x_i, y_k)
    let samples: Vec<Vec<Vec<f64>>> = sources
        .iter()
        .map(|f| xs.iter().map(|&x| ys.iter().map(|&y| f(x, y)).collect()).collect())
        .collect();

    let modes = (0..count)
        .into_par_iter()
        .map(|j| {
            let basis: Vec<f64> = ys
                .iter()
                .zip(&weights)
                .map(|(&y, &w)| w * ModeIndex(j).basis(y))
                .collect();
            let mut u = vec![0.0; 4 * n];
            for (block, field) in samples.iter().enumerate() {
                for (i, row) in field.iter().enumerate() {
                    u[block * n + i] = row.iter().zip(&basis).map(|(f, b)| f * b).sum();
                }
            }
            u
        })
        .collect();
    Ok(ModalState { t: 0.0, grid, modes })
}

/// Smooth data in the generator's domain: every mode carries the profile
/// `g(x) = sin(pi x / 2)` in `v` and `g / 2` in `p`, scaled so that its energy
/// norm equals `(1 + xi_j)^(-smoothness)`.
///
/// `g` vanishes at `x = 0` and has zero slope at `x = 1`.
pub fn smooth_modal_data(ops: &[ModalOperator], smoothness: f64) -> Result<ModalState> {
    let first = ops
        .first()
        .ok_or_else(|| Error::InvalidInput("at least one mode is required".into()))?;
    let grid = first.matrices().grid;
    let n = grid.n();
    let g: Vec<f64> = grid
        .unknown_nodes()
        .iter()
        .map(|x| (std::f64::consts::FRAC_PI_2 * x).sin())
        .collect();
    let mut modes = Vec::with_capacity(ops.len());
    for op in ops {
        let mut u = vec![0.0; 4 * n];
        u[..n].copy_from_slice(&g);
        for i in 0..n {
            u[2 * n + i] = 0.5 * g[i];
        }
        let norm = crate::assembly::energy_norm(&u, op)?;
        let target = (1.0 + op.xi).powf(-smoothness);
        u.iter_mut().for_each(|x| *x *= target / norm);
        modes.push(u);
    }
    Ok(ModalState { t: 0.0, grid, modes })
}

/// Trapezoidal stepper for one mode with a cached factorization.
#[derive(Debug, Clone)]
pub struct CayleyStepper {
    op: ModalOperator,
    solver: ShiftedSolver<f64>,
    dt: f64,
}

impl CayleyStepper {
    pub fn new(op: &ModalOperator, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidInput(format!("time step must be positive, got {dt}")));
        }
        Ok(Self {
            op: op.clone(),
            solver: op.shifted_solver(2.0 / dt, 1.0)?,
            dt,
        })
    }

    /// Advances `u` in place and returns the dissipated power of the
    /// midpoint state.
    pub fn advance(&self, u: &mut [f64]) -> f64 {
        // (2/dt - A) delta = 2 A u,  u <- u + delta
        let mut rhs = self.op.apply(u);
        rhs.iter_mut().for_each(|x| *x *= 2.0);
        let delta = self.solver.solve(&rhs);
        let mut mid = u.to_vec();
        for ((x, m), d) in u.iter_mut().zip(mid.iter_mut()).zip(&delta) {
            *m += 0.5 * d;
            *x += d;
        }
        self.op.dissipated_power(&mid)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }
}

/// One trapezoidal step of every mode.
pub fn step(state: &ModalState, ops: &[ModalOperator], dt: f64) -> Result<ModalState> {
    state.check_ops(ops)?;
    let modes = state
        .modes
        .par_iter()
        .zip(ops.par_iter())
        .map(|(u, op)| {
            let stepper = CayleyStepper::new(op, dt)?;
            let mut next = u.clone();
            stepper.advance(&mut next);
            Ok(next)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ModalState {
        t: state.t + dt,
        grid: state.grid,
        modes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimulationSettings {
    pub t_final: f64,
    pub dt: f64,
    pub sample_every: usize,
    /// Store a full state every this many steps.
    pub snapshot_every: Option<usize>,
}

impl SimulationSettings {
    pub fn new(t_final: f64, dt: f64, sample_every: usize) -> Self {
        Self {
            t_final,
            dt,
            sample_every,
            snapshot_every: None,
        }
    }

    /// Number of steps, `round(T / dt)`.
    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

/// Energy and instantaneous dissipated power at one sample time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergySample {
    pub t: f64,
    #[serde(rename = "E")]
    pub energy: f64,
    #[serde(rename = "P")]
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesMeta {
    pub params: PhysicalParams,
    pub n: usize,
    pub modes: usize,
    pub dt: f64,
    pub t_final: f64,
    pub steps: usize,
    pub sample_every: usize,
}

/// Output of [`simulate`].
#[derive(Debug, Clone)]
pub struct SimulationSeries {
    pub meta: SeriesMeta,
    /// Samples at step 0 and at the end of every block of `sample_every` steps.
    pub samples: Vec<EnergySample>,
    /// Energy after every step, `steps + 1` entries.
    pub step_energy: Vec<f64>,
    /// Dissipated power of each step's midpoint state, `steps` entries.
    pub midpoint_power: Vec<f64>,
    pub snapshots: Vec<ModalState>,
    pub final_state: ModalState,
}

impl SimulationSeries {
    /// True when the per-step energy never increases.
    pub fn is_monotone(&self) -> bool {
        self.step_energy.windows(2).all(|w| w[1] <= w[0])
    }

    pub fn initial_energy(&self) -> f64 {
        self.step_energy[0]
    }

    pub fn final_energy(&self) -> f64 {
        *self.step_energy.last().expect("series holds the initial energy")
    }
}

const BLOCK_STEPS: usize = 512;

/// Integrates every mode from `initial` to `settings.t_final`.
///
/// Modes advance independently in parallel; energies are reduced in mode
/// order so the result does not depend on the worker count.
pub fn simulate(ops: &[ModalOperator], initial: &ModalState, settings: SimulationSettings) -> Result<SimulationSeries> {
    initial.check_ops(ops)?;
    if !(settings.t_final > 0.0) {
        return Err(Error::InvalidInput(format!(
            "final time must be positive, got {}",
            settings.t_final
        )));
    }
    if settings.sample_every == 0 {
        return Err(Error::InvalidInput("sample_every must be at least 1".into()));
    }
    let ops = &ops[..initial.num_modes()];
    let dt = settings.dt;
    let steps = settings.steps().max(1);
    let steppers = ops
        .par_iter()
        .map(|op| CayleyStepper::new(op, dt))
        .collect::<Result<Vec<_>>>()?;

    let mut state = initial.clone();
    let e0 = state.energy(ops)?;
    let mut step_energy = Vec::with_capacity(steps + 1);
    step_energy.push(e0);
    let mut midpoint_power = Vec::with_capacity(steps);
    let mut samples = vec![EnergySample {
        t: state.t,
        energy: e0,
        power: state.dissipated_power(ops)?,
    }];
    let mut snapshots = Vec::new();
    if settings.snapshot_every.is_some() {
        snapshots.push(state.clone());
    }

    let mut done = 0;
    while done < steps {
        let block = BLOCK_STEPS.min(steps - done);
        // per mode, per step: (energy after, midpoint power, power after)
        let traces: Vec<Vec<(f64, f64, f64)>> = state
            .modes
            .par_iter_mut()
            .zip(steppers.par_iter())
            .zip(ops.par_iter())
            .map(|((u, stepper), op)| {
                (0..block)
                    .map(|_| {
                        let pm = stepper.advance(u);
                        (0.5 * op.energy_inner(u, u), pm, op.dissipated_power(u))
                    })
                    .collect()
            })
            .collect();
        for k in 0..block {
            let (mut e, mut pm, mut p) = (0.0, 0.0, 0.0);
            for trace in &traces {
                e += trace[k].0;
                pm += trace[k].1;
                p += trace[k].2;
            }
            step_energy.push(e);
            midpoint_power.push(pm);
            let index = done + k + 1;
            let t = index as f64 * dt;
            if index % settings.sample_every == 0 || index == steps {
                samples.push(EnergySample { t, energy: e, power: p });
            }
        }
        done += block;
        state.t = done as f64 * dt;
        if let Some(every) = settings.snapshot_every {
            // snapshots land on block boundaries that are multiples of `every`
            if every > 0 && (done % every == 0 || done == steps) {
                snapshots.push(state.clone());
            }
        }
    }

    Ok(SimulationSeries {
        meta: SeriesMeta {
            params: ops[0].params,
            n: initial.grid.n(),
            modes: initial.num_modes(),
            dt,
            t_final: steps as f64 * dt,
            steps,
            sample_every: settings.sample_every,
        },
        samples,
        step_energy,
        midpoint_power,
        snapshots,
        final_state: state,
    })
}

/// Largest per-step violation of the discrete energy identity
/// `E^{k+1} - E^k + dt P^{k+1/2} = 0`.
pub fn energy_budget_residual(series: &SimulationSeries) -> f64 {
    series
        .step_energy
        .windows(2)
        .zip(&series.midpoint_power)
        .map(|(e, p)| (e[1] - e[0] + series.meta.dt * p).abs())
        .fold(0.0, f64::max)
}

/// Fields `v` and `p` sampled on the tensor grid of all nodes `x_0..x_n`
/// (rows) and the given `y` points (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct Field2D {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub v: DMatrix<f64>,
    pub p: DMatrix<f64>,
}

/// Sums the truncated modal series `sum_j v_j(x_i) e_j(y_k)`.
pub fn reconstruct_field(state: &ModalState, y_points: &[f64]) -> Result<Field2D> {
    if let Some(&y) = y_points.iter().find(|y| !(0.0..=1.0).contains(*y)) {
        return Err(Error::InvalidInput(format!("y = {y} lies outside [0, 1]")));
    }
    let n = state.grid.n();
    let x: Vec<f64> = (0..=n).map(|i| state.grid.node(i)).collect();
    let mut v = DMatrix::zeros(n + 1, y_points.len());
    let mut p = DMatrix::zeros(n + 1, y_points.len());
    for (j, u) in state.modes.iter().enumerate() {
        for (k, &y) in y_points.iter().enumerate() {
            let e = ModeIndex(j).basis(y);
            for i in 0..n {
                v[(i + 1, k)] += u[i] * e;
                p[(i + 1, k)] += u[2 * n + i] * e;
            }
        }
    }
    Ok(Field2D {
        x,
        y: y_points.to_vec(),
        v,
        p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::build_matrices;
    use crate::model::{DampingProfile, PhysicalParams};
    use std::sync::Arc;

    fn ops(n: usize, count: usize, profile: DampingProfile) -> Vec<ModalOperator> {
        let mats = Arc::new(build_matrices(Grid1D::new(n).unwrap(), &profile));
        (0..count)
            .map(|j| ModalOperator::from_matrices(PhysicalParams::default(), Arc::clone(&mats), j).unwrap())
            .collect()
    }

    #[test]
    fn projection_single_mode() {
        let grid = Grid1D::new(16).unwrap();
        let fields = InitialFields::zero().with_v0(|x, y| x * (2.0 - x) * ModeIndex(0).basis(y));
        let s = project_initial(&fields, grid, 6, 2048).unwrap();
        for (i, x) in grid.unknown_nodes().iter().enumerate() {
            assert!((s.modes[0][i] - x * (2.0 - x)).abs() < 1e-6);
        }
        for j in 1..6 {
            assert!(s.modes[j].iter().all(|c| c.abs() <= 1e-6), "mode {j}");
        }
    }

    #[test]
    fn projection_two_equal_modes() {
        let grid = Grid1D::new(8).unwrap();
        let g = |x: f64| (std::f64::consts::FRAC_PI_2 * x).sin();
        let fields = InitialFields::zero().with_v0(move |x, y| g(x) * (ModeIndex(0).basis(y) + ModeIndex(1).basis(y)));
        let s = project_initial(&fields, grid, 4, 2048).unwrap();
        // oracle: the same trapezoid rule evaluated directly per node
        for (i, x) in grid.unknown_nodes().iter().enumerate() {
            assert!((s.modes[0][i] - g(*x)).abs() < 1e-6);
            assert!((s.modes[1][i] - g(*x)).abs() < 1e-6);
            assert!((s.modes[0][i] - s.modes[1][i]).abs() < 1e-6);
        }
    }

    #[test]
    fn projection_errors_and_zero() {
        let grid = Grid1D::new(8).unwrap();
        assert!(matches!(
            project_initial(&InitialFields::zero(), grid, 10, 39),
            Err(Error::QuadratureUnderResolved { needed: 40, .. })
        ));
        let s = project_initial(&InitialFields::zero(), grid, 3, 64).unwrap();
        assert_eq!(s.energy(&ops(8, 3, DampingProfile::default())).unwrap(), 0.0);
    }

    #[test]
    fn undamped_step_conserves_energy() {
        let o = ops(16, 2, DampingProfile::default().scaled(0.0).unwrap());
        let s0 = smooth_modal_data(&o, 2.0).unwrap();
        let e0 = s0.energy(&o).unwrap();
        let s1 = step(&s0, &o, 1e-2).unwrap();
        assert!((s1.energy(&o).unwrap() - e0).abs() <= 1e-11 * e0);
        assert!((s1.t - 1e-2).abs() < 1e-15);
    }

    #[test]
    fn zero_data_stays_zero() {
        let o = ops(8, 2, DampingProfile::default());
        let s = ModalState::zeros(Grid1D::new(8).unwrap(), 2);
        let series = simulate(&o, &s, SimulationSettings::new(1.0, 1e-2, 10)).unwrap();
        assert!(series.step_energy.iter().all(|&e| e == 0.0));
        assert_eq!(series.samples.len(), 11);
    }

    #[test]
    fn sample_layout() {
        let o = ops(8, 1, DampingProfile::default());
        let s = smooth_modal_data(&o, 2.0).unwrap();
        let mut settings = SimulationSettings::new(1.05, 0.01, 10);
        settings.snapshot_every = Some(512);
        let series = simulate(&o, &s, settings).unwrap();
        assert_eq!(series.meta.steps, 105);
        assert_eq!(series.step_energy.len(), 106);
        assert_eq!(series.midpoint_power.len(), 105);
        // t = 0, 0.1, ..., 1.0, then the final partial block at 1.05
        assert_eq!(series.samples.len(), 12);
        assert!((series.samples.last().unwrap().t - 1.05).abs() < 1e-12);
        assert!(series.samples.windows(2).all(|w| w[1].t > w[0].t));
        assert_eq!(series.snapshots.len(), 2);
    }

    #[test]
    fn budget_detects_corruption() {
        let o = ops(16, 3, DampingProfile::default());
        let s = smooth_modal_data(&o, 2.0).unwrap();
        let mut series = simulate(&o, &s, SimulationSettings::new(0.5, 1e-3, 50)).unwrap();
        let e0 = series.initial_energy();
        assert!(energy_budget_residual(&series) <= 1e-11 * e0);
        assert!(series.is_monotone());
        series.step_energy[200] += 1e-3;
        assert!(energy_budget_residual(&series) >= 1e-3);
    }

    #[test]
    fn reconstruct_single_mode_and_boundaries() {
        let grid = Grid1D::new(8).unwrap();
        let mut s = ModalState::zeros(grid, 1);
        for i in 0..8 {
            s.modes[0][i] = (i + 1) as f64;
        }
        let ys = [0.0, 0.25, 0.5, 1.0];
        let f = reconstruct_field(&s, &ys).unwrap();
        for i in 0..=8 {
            for (k, &y) in ys.iter().enumerate() {
                let expect = i as f64 * std::f64::consts::SQRT_2 * (std::f64::consts::FRAC_PI_2 * y).sin();
                assert!((f.v[(i, k)] - expect).abs() < 1e-13);
            }
            assert_eq!(f.v[(i, 0)], 0.0);
        }
        assert!(reconstruct_field(&s, &[1.5]).is_err());
    }

    #[test]
    fn neumann_slope_at_top_edge_vanishes() {
        let grid = Grid1D::new(8).unwrap();
        let mut s = ModalState::zeros(grid, 4);
        for j in 0..4 {
            for i in 0..8 {
                s.modes[j][i] = 1.0 / (1 + j) as f64;
            }
        }
        let mut prev = f64::INFINITY;
        for hy in [1e-2, 1e-3, 1e-4] {
            let f = reconstruct_field(&s, &[1.0 - hy, 1.0]).unwrap();
            let slope = (0..=8).map(|i| ((f.v[(i, 1)] - f.v[(i, 0)]) / hy).abs()).fold(0.0, f64::max);
            assert!(slope < prev);
            prev = slope;
        }
        assert!(prev < 1e-2);
    }

    #[test]
    fn band_limited_round_trip() {
        let grid = Grid1D::new(8).unwrap();
        let f = |x: f64, y: f64| x * (ModeIndex(0).basis(y) - 0.5 * ModeIndex(2).basis(y) + 0.25 * ModeIndex(3).basis(y));
        let fields = InitialFields::zero().with_v0(f);
        let s = project_initial(&fields, grid, 6, 2048).unwrap();
        let ys: Vec<f64> = (0..=20).map(|k| k as f64 / 20.0).collect();
        let r = reconstruct_field(&s, &ys).unwrap();
        for i in 0..=8 {
            for (k, &y) in ys.iter().enumerate() {
                assert!((r.v[(i, k)] - f(grid.node(i), y)).abs() <= 1e-5);
            }
        }
    }
}
