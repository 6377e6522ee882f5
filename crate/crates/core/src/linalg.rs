//! Small structured linear-algebra kernels: symmetric tridiagonal matrices
//! and a banded LU with partial pivoting, generic over real and complex
//! scalars.

use nalgebra::{ComplexField, DMatrix};

use crate::error::{Error, Result};

/// Scalar type accepted by the solvers: `f64` or `Complex<f64>`.
pub trait Scalar: ComplexField<RealField = f64> + Copy {}

impl<T: ComplexField<RealField = f64> + Copy> Scalar for T {}

/// Hermitian inner product `sum conj(a_i) b_i`.
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc + x.conjugate() * y)
}

/// Symmetric tridiagonal real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    /// `off[i]` couples rows `i` and `i + 1`.
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn zeros(n: usize) -> Self {
        Self {
            diag: vec![0.0; n],
            off: vec![0.0; n.saturating_sub(1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// `self + factor * other`.
    pub fn add_scaled(&self, factor: f64, other: &SymTridiag) -> SymTridiag {
        SymTridiag {
            diag: self
                .diag
                .iter()
                .zip(&other.diag)
                .map(|(a, b)| a + factor * b)
                .collect(),
            off: self
                .off
                .iter()
                .zip(&other.off)
                .map(|(a, b)| a + factor * b)
                .collect(),
        }
    }

    pub fn scaled(&self, factor: f64) -> SymTridiag {
        SymTridiag {
            diag: self.diag.iter().map(|a| a * factor).collect(),
            off: self.off.iter().map(|a| a * factor).collect(),
        }
    }

    /// `out += factor * self * x`.
    pub fn apply_add<T: Scalar>(&self, factor: f64, x: &[T], out: &mut [T]) {
        let n = self.dim();
        let f = T::from_real(factor);
        for i in 0..n {
            let mut acc = x[i].scale(self.diag[i]);
            if i > 0 {
                acc += x[i - 1].scale(self.off[i - 1]);
            }
            if i + 1 < n {
                acc += x[i + 1].scale(self.off[i]);
            }
            out[i] += f * acc;
        }
    }

    pub fn apply<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim()];
        self.apply_add(1.0, x, &mut out);
        out
    }

    /// `x^* self x` (real because `self` is real symmetric).
    pub fn quadratic_form<T: Scalar>(&self, x: &[T]) -> f64 {
        dot(x, &self.apply(x)).real()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, k| {
            if i == k {
                self.diag[i]
            } else if i + 1 == k {
                self.off[i]
            } else if k + 1 == i {
                self.off[k]
            } else {
                0.0
            }
        })
    }

    /// LDL^T factorization; fails unless every pivot is positive.
    pub fn factor_spd(&self) -> Option<TridiagLdl> {
        let n = self.dim();
        let mut d = vec![0.0; n];
        let mut l = vec![0.0; n.saturating_sub(1)];
        for i in 0..n {
            let mut piv = self.diag[i];
            if i > 0 {
                piv -= l[i - 1] * l[i - 1] * d[i - 1];
            }
            if !(piv > 0.0 && piv.is_finite()) {
                return None;
            }
            d[i] = piv;
            if i + 1 < n {
                l[i] = self.off[i] / piv;
            }
        }
        Some(TridiagLdl { d, l })
    }
}

/// `LDL^T` factors of a symmetric positive definite tridiagonal matrix.
#[derive(Debug, Clone)]
pub struct TridiagLdl {
    d: Vec<f64>,
    l: Vec<f64>,
}

impl TridiagLdl {
    pub fn solve_in_place<T: Scalar>(&self, x: &mut [T]) {
        let n = self.d.len();
        for i in 1..n {
            let prev = x[i - 1];
            x[i] -= prev.scale(self.l[i - 1]);
        }
        for i in 0..n {
            x[i] = x[i].unscale(self.d[i]);
        }
        for i in (0..n.saturating_sub(1)).rev() {
            let next = x[i + 1];
            x[i] -= next.scale(self.l[i]);
        }
    }
}

/// Square band matrix with `kl` sub- and `ku` super-diagonals.
#[derive(Debug, Clone)]
pub struct BandMatrix<T> {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    // Row i stores absolute columns i - kl ..= i + kl + ku; the extra kl
    // slots absorb fill-in from row interchanges.
    data: Vec<T>,
}

impl<T: Scalar> BandMatrix<T> {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![T::zero(); n * width],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn slot(&self, row: usize, col: usize) -> usize {
        debug_assert!(col + self.kl >= row && col <= row + self.kl + self.ku);
        row * self.width + (col + self.kl - row)
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        if col + self.kl < row || col > row + self.ku + self.kl {
            T::zero()
        } else {
            self.data[self.slot(row, col)]
        }
    }

    pub fn add(&mut self, row: usize, col: usize, value: T) {
        assert!(
            col + self.kl >= row && col <= row + self.ku,
            "entry ({row}, {col}) outside the band"
        );
        let s = self.slot(row, col);
        self.data[s] += value;
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).fold(T::zero(), |acc, k| acc + self.get(i, k) * x[k])
            })
            .collect()
    }

    /// LU factorization with partial pivoting (row interchanges within the band).
    pub fn factor(mut self) -> Result<BandedLu<T>> {
        let n = self.n;
        let kl = self.kl;
        let reach = kl + self.ku;
        let mut pivots = vec![0usize; n];
        let mut multipliers = vec![T::zero(); n * kl];
        let mut row_k = vec![T::zero(); reach + 1];
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).modulus();
            for i in k + 1..=last {
                let m = self.get(i, k).modulus();
                if m > best {
                    best = m;
                    p = i;
                }
            }
            if !(best > 0.0) || !best.is_finite() {
                return Err(Error::LinearSolveFailure { row: k });
            }
            pivots[k] = p;
            let col_hi = (k + reach).min(n - 1);
            if p != k {
                for c in k..=col_hi {
                    let sk = self.slot(k, c);
                    let sp = self.slot(p, c);
                    self.data.swap(sk, sp);
                }
            }
            let pivot = self.get(k, k);
            for (off, c) in (k..=col_hi).enumerate() {
                row_k[off] = self.get(k, c);
            }
            for i in k + 1..=last {
                let l = self.get(i, k) / pivot;
                multipliers[k * kl + (i - k - 1)] = l;
                let s = self.slot(i, k);
                self.data[s] = T::zero();
                if l == T::zero() {
                    continue;
                }
                for (off, c) in (k + 1..=col_hi).enumerate() {
                    let s = self.slot(i, c);
                    self.data[s] -= l * row_k[off + 1];
                }
            }
        }
        Ok(BandedLu {
            upper: self,
            pivots,
            multipliers,
        })
    }
}

/// Factors produced by [`BandMatrix::factor`].
#[derive(Debug, Clone)]
pub struct BandedLu<T> {
    upper: BandMatrix<T>,
    pivots: Vec<usize>,
    multipliers: Vec<T>,
}

impl<T: Scalar> BandedLu<T> {
    pub fn dim(&self) -> usize {
        self.upper.n
    }

    pub fn solve_in_place(&self, b: &mut [T]) {
        let n = self.upper.n;
        let kl = self.upper.kl;
        let reach = kl + self.upper.ku;
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            for i in k + 1..=(k + kl).min(n - 1) {
                b[i] -= self.multipliers[k * kl + (i - k - 1)] * bk;
            }
        }
        for k in (0..n).rev() {
            let mut acc = b[k];
            for c in k + 1..=(k + reach).min(n - 1) {
                acc -= self.upper.get(k, c) * b[c];
            }
            b[k] = acc / self.upper.get(k, k);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Complex;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tridiag_solve_matches_dense() {
        let t = SymTridiag {
            diag: vec![4.0, 5.0, 6.0, 3.0],
            off: vec![1.0, -2.0, 0.5],
        };
        let f = t.factor_spd().unwrap();
        let mut x = vec![1.0, 2.0, 3.0, 4.0];
        f.solve_in_place(&mut x);
        let back = t.apply(&x);
        for (a, b) in back.iter().zip([1.0, 2.0, 3.0, 4.0]) {
            assert!((a - b).abs() < 1e-13);
        }
        assert!(SymTridiag {
            diag: vec![1.0, -1.0],
            off: vec![0.0]
        }
        .factor_spd()
        .is_none());
    }

    #[test]
    fn banded_lu_needs_pivoting() {
        // zero leading diagonal forces a row interchange
        let mut m = BandMatrix::<f64>::zeros(3, 1, 1);
        m.add(0, 1, 1.0);
        m.add(1, 0, 2.0);
        m.add(1, 1, 1.0);
        m.add(1, 2, 1.0);
        m.add(2, 1, 3.0);
        m.add(2, 2, 1.0);
        let x_true = [1.0, -2.0, 0.5];
        let mut b = m.apply(&x_true);
        let lu = m.factor().unwrap();
        lu.solve_in_place(&mut b);
        for (a, e) in b.iter().zip(x_true) {
            assert!((a - e).abs() < 1e-14);
        }
    }

    #[test]
    fn banded_lu_singular() {
        let m = BandMatrix::<f64>::zeros(4, 1, 1);
        assert!(matches!(
            m.factor(),
            Err(Error::LinearSolveFailure { row: 0 })
        ));
    }

    #[test]
    fn banded_lu_random_complex() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (n, kl, ku) = (40, 3, 2);
        let mut m = BandMatrix::<Complex<f64>>::zeros(n, kl, ku);
        let mut dense = DMatrix::<Complex<f64>>::zeros(n, n);
        for i in 0..n {
            for k in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                let v = Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                m.add(i, k, v);
                dense[(i, k)] = v;
            }
        }
        let x_true: Vec<_> = (0..n)
            .map(|_| Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let mut b = m.apply(&x_true);
        let lu = m.factor().unwrap();
        lu.solve_in_place(&mut b);
        let cond = dense.clone().svd(false, false).singular_values;
        let kappa = cond.max() / cond.min();
        for (a, e) in b.iter().zip(&x_true) {
            assert!((a - e).norm() < 1e-13 * kappa, "{a} vs {e}");
        }
    }
}
