//! Piecewise-linear Galerkin discretization in `x` and the per-mode
//! first-order generator.
//!
//! Unknowns are the nodal values at `x_1, ..., x_n`; the Dirichlet node
//! `x_0 = 0` is eliminated and the Neumann end `x_n = 1` is natural. A mode
//! state is stacked as `[v, z, p, q]`, each block of length `n`.
//!
//! With `S = K + xi_j^2 Q` the generator reads
//!
//! ```text
//! v' = z
//! z' = (1/rho) Q^{-1} (-alpha S v + gamma beta S p - D z)
//! p' = q
//! q' = (1/mu)  Q^{-1} (-beta S p + gamma beta S v)
//! ```
//!
//! and the energy Gram matrix `M` encodes
//! `alpha1 v*Sv + rho z*Qz + beta (gamma v - p)* S (gamma v - p) + mu q*Qq`.
//! The product `M A` is the skew block matrix below minus `D` in the
//! `(z, z)` slot, so `Re U*MAU = -z*Dz` holds identically:
//!
//! ```text
//! [   0        alpha S     0     -beta gamma S ]
//! [ -alpha S     -D     gamma beta S     0      ]
//! [   0    -beta gamma S   0       beta S       ]
//! [ gamma beta S   0     -beta S      0         ]
//! ```

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{dot, BandMatrix, BandedLu, Scalar, SymTridiag, TridiagLdl};
use crate::model::{xi, DampingCoefficient, PhysicalParams};

/// Uniform partition of `[0, 1]` into `n` elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Grid1D {
    n: usize,
}

impl Grid1D {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGrid(n));
        }
        Ok(Self { n })
    }

    /// Number of elements, which equals the number of unknowns.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Node `x_i = i h` for `i = 0..=n`.
    pub fn node(&self, i: usize) -> f64 {
        i as f64 / self.n as f64
    }

    /// Positions of the unknowns `x_1, ..., x_n`.
    pub fn unknown_nodes(&self) -> Vec<f64> {
        (1..=self.n).map(|i| self.node(i)).collect()
    }
}

const GAUSS3_NODES: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
const GAUSS3_WEIGHTS: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];

/// Stiffness, mass and damping matrices over the unknown nodes.
#[derive(Debug, Clone)]
pub struct OperatorMatrices {
    pub grid: Grid1D,
    /// `int phi_i' phi_k' dx`
    pub stiffness: SymTridiag,
    /// `int phi_i phi_k dx`
    pub mass: SymTridiag,
    /// `int d(x) phi_i phi_k dx`
    pub damping: SymTridiag,
}

/// Assembles `K`, `Q` and `D` for the hat basis.
///
/// `K` and `Q` are integrated exactly; `D` uses 3-point Gauss quadrature on
/// each element after splitting it at the coefficient's breakpoints, which is
/// exact for piecewise cubic coefficients.
pub fn build_matrices<D: DampingCoefficient + ?Sized>(grid: Grid1D, coeff: &D) -> OperatorMatrices {
    let n = grid.n();
    let h = grid.h();
    let mut stiffness = SymTridiag::zeros(n);
    let mut mass = SymTridiag::zeros(n);
    let mut damping = SymTridiag::zeros(n);
    let breakpoints = coeff.breakpoints();

    for e in 0..n {
        let (x0, x1) = (grid.node(e), grid.node(e + 1));
        let ke = [[1.0 / h, -1.0 / h], [-1.0 / h, 1.0 / h]];
        let me = [[h / 3.0, h / 6.0], [h / 6.0, h / 3.0]];

        let mut cuts = vec![x0];
        cuts.extend(breakpoints.iter().copied().filter(|&c| c > x0 && c < x1));
        cuts.push(x1);
        cuts.sort_by(f64::total_cmp);
        let mut de = [[0.0; 2]; 2];
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            for (g, wt) in GAUSS3_NODES.iter().zip(GAUSS3_WEIGHTS) {
                let x = mid + half * g;
                let d = coeff.value(x);
                if d == 0.0 {
                    continue;
                }
                let phi = [(x1 - x) / h, (x - x0) / h];
                for a in 0..2 {
                    for b in 0..2 {
                        de[a][b] += wt * half * d * phi[a] * phi[b];
                    }
                }
            }
        }

        // local node 0 is global node e (unknown e - 1), local 1 is unknown e
        let map = [e.checked_sub(1), Some(e)];
        for a in 0..2 {
            let Some(ia) = map[a] else { continue };
            stiffness.diag[ia] += ke[a][a];
            mass.diag[ia] += me[a][a];
            damping.diag[ia] += de[a][a];
        }
        if let Some(i0) = map[0] {
            stiffness.off[i0] += ke[0][1];
            mass.off[i0] += me[0][1];
            damping.off[i0] += de[0][1];
        }
    }

    OperatorMatrices {
        grid,
        stiffness,
        mass,
        damping,
    }
}

/// Discrete generator `A_j` and energy Gram `M_j` of one transverse mode.
#[derive(Debug, Clone)]
pub struct ModalOperator {
    pub j: usize,
    pub xi: f64,
    pub params: PhysicalParams,
    mats: Arc<OperatorMatrices>,
    /// `K + xi^2 Q`
    shifted_stiffness: SymTridiag,
    mass_factor: TridiagLdl,
}

impl ModalOperator {
    pub fn from_matrices(params: PhysicalParams, mats: Arc<OperatorMatrices>, j: usize) -> Result<Self> {
        let xi = xi(j);
        let mass_factor = mats.mass.factor_spd().ok_or(Error::SingularMass)?;
        let shifted_stiffness = mats.stiffness.add_scaled(xi * xi, &mats.mass);
        Ok(Self {
            j,
            xi,
            params,
            mats,
            shifted_stiffness,
            mass_factor,
        })
    }

    /// Builds the matrices for `grid` and `coeff`, then the operator of mode `j`.
    pub fn assemble<D: DampingCoefficient + ?Sized>(
        params: PhysicalParams,
        coeff: &D,
        grid: Grid1D,
        j: usize,
    ) -> Result<Self> {
        Self::from_matrices(params, Arc::new(build_matrices(grid, coeff)), j)
    }

    pub fn matrices(&self) -> &Arc<OperatorMatrices> {
        &self.mats
    }

    /// Unknowns per field.
    pub fn n(&self) -> usize {
        self.mats.grid.n()
    }

    /// Length of a stacked state.
    pub fn dim(&self) -> usize {
        4 * self.n()
    }

    pub fn stiffness_s(&self) -> &SymTridiag {
        &self.shifted_stiffness
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: len,
            });
        }
        Ok(())
    }

    /// `A U`.
    pub fn apply<T: Scalar>(&self, u: &[T]) -> Vec<T> {
        let n = self.n();
        let PhysicalParams {
            rho,
            alpha,
            gamma,
            mu,
            beta,
            ..
        } = self.params;
        let (v, rest) = u.split_at(n);
        let (z, rest) = rest.split_at(n);
        let (p, q) = rest.split_at(n);
        let s = &self.shifted_stiffness;

        let mut out = vec![T::zero(); 4 * n];
        out[..n].copy_from_slice(z);
        out[2 * n..3 * n].copy_from_slice(q);

        let zb = &mut out[n..2 * n];
        s.apply_add(-alpha, v, zb);
        s.apply_add(gamma * beta, p, zb);
        self.mats.damping.apply_add(-1.0, z, zb);
        self.mass_factor.solve_in_place(zb);
        zb.iter_mut().for_each(|x| *x = x.unscale(rho));

        let qb = &mut out[3 * n..];
        s.apply_add(-beta, p, qb);
        s.apply_add(gamma * beta, v, qb);
        self.mass_factor.solve_in_place(qb);
        qb.iter_mut().for_each(|x| *x = x.unscale(mu));
        out
    }

    /// `M U`.
    pub fn apply_gram<T: Scalar>(&self, u: &[T]) -> Vec<T> {
        let n = self.n();
        let PhysicalParams {
            rho,
            alpha,
            gamma,
            mu,
            beta,
            ..
        } = self.params;
        let s = &self.shifted_stiffness;
        let q_mat = &self.mats.mass;
        let (v, rest) = u.split_at(n);
        let (z, rest) = rest.split_at(n);
        let (p, q) = rest.split_at(n);
        let mut out = vec![T::zero(); 4 * n];
        {
            let (ov, rest) = out.split_at_mut(n);
            let (oz, rest) = rest.split_at_mut(n);
            let (op, oq) = rest.split_at_mut(n);
            // alpha1 + beta gamma^2 = alpha
            s.apply_add(alpha, v, ov);
            s.apply_add(-beta * gamma, p, ov);
            q_mat.apply_add(rho, z, oz);
            s.apply_add(beta, p, op);
            s.apply_add(-beta * gamma, v, op);
            q_mat.apply_add(mu, q, oq);
        }
        out
    }

    /// `(M A) U` using the explicit sparse block form of `M A`.
    pub fn apply_gram_generator<T: Scalar>(&self, u: &[T]) -> Vec<T> {
        let n = self.n();
        let PhysicalParams {
            alpha, gamma, beta, ..
        } = self.params;
        let s = &self.shifted_stiffness;
        let (v, rest) = u.split_at(n);
        let (z, rest) = rest.split_at(n);
        let (p, q) = rest.split_at(n);
        let mut out = vec![T::zero(); 4 * n];
        {
            let (ov, rest) = out.split_at_mut(n);
            let (oz, rest) = rest.split_at_mut(n);
            let (op, oq) = rest.split_at_mut(n);
            s.apply_add(alpha, z, ov);
            s.apply_add(-beta * gamma, q, ov);
            s.apply_add(-alpha, v, oz);
            s.apply_add(gamma * beta, p, oz);
            self.mats.damping.apply_add(-1.0, z, oz);
            s.apply_add(-beta * gamma, z, op);
            s.apply_add(beta, q, op);
            s.apply_add(gamma * beta, v, oq);
            s.apply_add(-beta, p, oq);
        }
        out
    }

    /// Energy inner product `w^* M u`.
    pub fn energy_inner<T: Scalar>(&self, u: &[T], w: &[T]) -> T {
        dot(w, &self.apply_gram(u))
    }

    /// `z^* D z`, the power dissipated by the damping.
    pub fn dissipated_power<T: Scalar>(&self, u: &[T]) -> f64 {
        let n = self.n();
        self.mats.damping.quadratic_form(&u[n..2 * n])
    }

    /// `lambda^2 v^* D v`.
    pub fn damped_displacement<T: Scalar>(&self, u: &[T], lambda: f64) -> f64 {
        let n = self.n();
        lambda * lambda * self.mats.damping.quadratic_form(&u[..n])
    }

    /// `Re U^* M A U`, evaluated through the sparse form of `M A`.
    pub fn dissipation_form<T: Scalar>(&self, u: &[T]) -> f64 {
        dot(u, &self.apply_gram_generator(u)).real()
    }

    /// Dense `A` (for eigen-solves and oracles).
    pub fn to_dense(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut a = DMatrix::zeros(d, d);
        let mut e = vec![0.0; d];
        for c in 0..d {
            e[c] = 1.0;
            let col = self.apply(&e);
            a.set_column(c, &nalgebra::DVector::from_vec(col));
            e[c] = 0.0;
        }
        a
    }

    /// Dense energy Gram `M`.
    pub fn gram_dense(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        let mut e = vec![0.0; d];
        for c in 0..d {
            e[c] = 1.0;
            let col = self.apply_gram(&e);
            m.set_column(c, &nalgebra::DVector::from_vec(col));
            e[c] = 0.0;
        }
        m
    }

    /// Factorizes `sigma I - A` (or its adjoint-companion with the damping
    /// sign reversed) for repeated solves.
    pub fn shifted_solver<T: Scalar>(&self, sigma: T, damping_sign: f64) -> Result<ShiftedSolver<T>> {
        ShiftedSolver::new(self, sigma, damping_sign)
    }
}

/// Solver for `(sigma I - A_d) U = F`, where `A_d` is the generator with the
/// damping matrix multiplied by `damping_sign`.
///
/// Eliminating `z = sigma v - f1` and `q = sigma p - f3` leaves a `2n`
/// system in `(v, p)`; interleaving the two fields node by node makes it a
/// band matrix with three sub- and super-diagonals.
#[derive(Debug, Clone)]
pub struct ShiftedSolver<T> {
    sigma: T,
    damping_sign: f64,
    params: PhysicalParams,
    mats: Arc<OperatorMatrices>,
    lu: BandedLu<T>,
}

impl<T: Scalar> ShiftedSolver<T> {
    fn new(op: &ModalOperator, sigma: T, damping_sign: f64) -> Result<Self> {
        let n = op.n();
        let PhysicalParams {
            rho,
            alpha,
            gamma,
            mu,
            beta,
            ..
        } = op.params;
        let s = &op.shifted_stiffness;
        let q = &op.mats.mass;
        let d = &op.mats.damping;
        let sigma2 = sigma * sigma;
        let entry = |m: &SymTridiag, i: usize, k: usize| -> f64 {
            if i == k {
                m.diag[i]
            } else {
                m.off[i.min(k)]
            }
        };
        let mut band = BandMatrix::<T>::zeros(2 * n, 3, 3);
        for i in 0..n {
            for k in i.saturating_sub(1)..=(i + 1).min(n - 1) {
                let (s_ik, q_ik, d_ik) = (entry(s, i, k), entry(q, i, k), entry(d, i, k));
                let vv = sigma2.scale(rho * q_ik) + sigma.scale(damping_sign * d_ik) + T::from_real(alpha * s_ik);
                let pp = sigma2.scale(mu * q_ik) + T::from_real(beta * s_ik);
                let cross = T::from_real(-gamma * beta * s_ik);
                band.add(2 * i, 2 * k, vv);
                band.add(2 * i, 2 * k + 1, cross);
                band.add(2 * i + 1, 2 * k, cross);
                band.add(2 * i + 1, 2 * k + 1, pp);
            }
        }
        Ok(Self {
            sigma,
            damping_sign,
            params: op.params,
            mats: Arc::clone(&op.mats),
            lu: band.factor()?,
        })
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    pub fn solve(&self, f: &[T]) -> Vec<T> {
        let n = self.mats.grid.n();
        let PhysicalParams { rho, mu, .. } = self.params;
        let (f1, rest) = f.split_at(n);
        let (f2, rest) = rest.split_at(n);
        let (f3, f4) = rest.split_at(n);
        let q = &self.mats.mass;
        let sigma = self.sigma;

        // rhs_v = rho Q f2 + (sigma rho Q + s D) f1 ; rhs_p = mu Q f4 + sigma mu Q f3
        let mut rv = vec![T::zero(); n];
        q.apply_add(rho, f2, &mut rv);
        let qf1 = q.apply(f1);
        let df1 = self.mats.damping.apply(f1);
        for i in 0..n {
            rv[i] += sigma * qf1[i].scale(rho) + df1[i].scale(self.damping_sign);
        }
        let mut rp = vec![T::zero(); n];
        q.apply_add(mu, f4, &mut rp);
        let qf3 = q.apply(f3);
        for i in 0..n {
            rp[i] += sigma * qf3[i].scale(mu);
        }
        let mut x = vec![T::zero(); 2 * n];
        for i in 0..n {
            x[2 * i] = rv[i];
            x[2 * i + 1] = rp[i];
        }
        self.lu.solve_in_place(&mut x);

        let mut u = vec![T::zero(); 4 * n];
        for i in 0..n {
            let (v, p) = (x[2 * i], x[2 * i + 1]);
            u[i] = v;
            u[n + i] = sigma * v - f1[i];
            u[2 * n + i] = p;
            u[3 * n + i] = sigma * p - f3[i];
        }
        u
    }
}

/// `sqrt(U^* M U)`.
pub fn energy_norm<T: Scalar>(u: &[T], op: &ModalOperator) -> Result<f64> {
    op.check_len(u.len())?;
    Ok(op.energy_inner(u, u).real().max(0.0).sqrt())
}

/// Norm of a multi-mode state: root of the sum of per-mode squared energy norms.
pub fn full_norm<T: Scalar, V: AsRef<[T]>>(states: &[V], ops: &[ModalOperator]) -> Result<f64> {
    if states.len() != ops.len() {
        return Err(Error::DimensionMismatch {
            expected: ops.len(),
            found: states.len(),
        });
    }
    let mut total = 0.0;
    for (u, op) in states.iter().zip(ops) {
        let e = energy_norm(u.as_ref(), op)?;
        total += e * e;
    }
    Ok(total.sqrt())
}
