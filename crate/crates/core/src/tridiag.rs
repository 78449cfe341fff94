//! Tridiagonal kernels: Sturm-sequence bisection, inverse iteration and
//! LU factorization with partial pivoting (real and complex).

use num_complex::Complex64;
use num_traits::Num;
use std::ops::Neg;

/// Field element usable by the banded solvers.
pub trait Scalar: Num + Copy + Neg<Output = Self> {
    fn magnitude(self) -> f64;
    fn from_real(x: f64) -> Self;
}

impl Scalar for f64 {
    fn magnitude(self) -> f64 {
        self.abs()
    }
    fn from_real(x: f64) -> Self {
        x
    }
}

impl Scalar for Complex64 {
    fn magnitude(self) -> f64 {
        self.norm()
    }
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
}

/// Real symmetric tridiagonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    /// `off[i]` couples rows `i` and `i + 1`.
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert!(!diag.is_empty(), "empty tridiagonal matrix");
        assert_eq!(off.len() + 1, diag.len(), "off-diagonal length mismatch");
        Self { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        assert_eq!(x.len(), n);
        let mut y: Vec<f64> = self.diag.iter().zip(x).map(|(d, v)| d * v).collect();
        for i in 0..n - 1 {
            y[i] += self.off[i] * x[i + 1];
            y[i + 1] += self.off[i] * x[i];
        }
        y
    }

    /// Interval containing the whole spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            if i > 0 {
                r += self.off[i - 1].abs();
            }
            if i + 1 < n {
                r += self.off[i].abs();
            }
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn sturm_count(&self, x: f64) -> usize {
        let tiny = f64::MIN_POSITIVE.sqrt();
        let mut count = 0;
        let mut q = self.diag[0] - x;
        if q == 0.0 {
            q = -tiny;
        }
        if q < 0.0 {
            count += 1;
        }
        for i in 1..self.len() {
            let e = self.off[i - 1];
            q = self.diag[i] - x - e * e / q;
            if q == 0.0 {
                q = -tiny;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Eigenvalue number `index` (ascending, zero-based) by bisection,
    /// converged to the floating-point resolution of the bracket.
    pub fn eigenvalue(&self, index: usize) -> f64 {
        assert!(index < self.len(), "eigenvalue index out of range");
        let (mut lo, mut hi) = self.gershgorin();
        let scale = lo.abs().max(hi.abs());
        lo -= 1e-12 * scale + f64::MIN_POSITIVE;
        hi += 1e-12 * scale + f64::MIN_POSITIVE;
        for _ in 0..256 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.sturm_count(mid) > index {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Eigenvector for an (approximate) eigenvalue by inverse iteration,
    /// normalized in the Euclidean norm. The start vector is fixed so the
    /// result is reproducible.
    pub fn inverse_iteration(&self, shift: f64, sweeps: usize) -> Vec<f64> {
        let n = self.len();
        let sub = self.off.clone();
        let diag: Vec<f64> = self.diag.iter().map(|d| d - shift).collect();
        let lu = TridiagLu::factor_regularized(&sub, &diag, &self.off);
        let mut x: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.5 * ((i as f64) * 0.7548776662466927).fract())
            .collect();
        for _ in 0..sweeps.max(1) {
            lu.solve_in_place(&mut x);
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            x.iter_mut().for_each(|v| *v /= norm);
        }
        x
    }
}

/// LU factors of a general tridiagonal matrix, row interchanges as in
/// LAPACK's `gttrf`.
#[derive(Debug, Clone)]
pub struct TridiagLu<T: Scalar> {
    lower: Vec<T>,
    diag: Vec<T>,
    upper: Vec<T>,
    upper2: Vec<T>,
    swapped: Vec<bool>,
    min_pivot: f64,
}

impl<T: Scalar> TridiagLu<T> {
    /// Factor the matrix with sub-diagonal `sub`, diagonal `diag` and
    /// super-diagonal `sup`. Returns `None` when an exact zero pivot occurs.
    pub fn factor(sub: &[T], diag: &[T], sup: &[T]) -> Option<Self> {
        let lu = Self::factor_raw(sub, diag, sup);
        if lu.diag.iter().any(|d| d.magnitude() == 0.0) {
            None
        } else {
            Some(lu)
        }
    }

    /// Like [`TridiagLu::factor`] but replaces zero pivots by a tiny value,
    /// which is what inverse iteration wants.
    pub fn factor_regularized(sub: &[T], diag: &[T], sup: &[T]) -> Self {
        let mut lu = Self::factor_raw(sub, diag, sup);
        let scale = diag.iter().map(|d| d.magnitude()).fold(0.0, f64::max).max(1.0);
        for d in lu.diag.iter_mut() {
            if d.magnitude() < f64::EPSILON * scale {
                *d = T::from_real(f64::EPSILON * scale);
            }
        }
        lu.min_pivot = lu.diag.iter().map(|d| d.magnitude()).fold(f64::INFINITY, f64::min);
        lu
    }

    fn factor_raw(sub: &[T], diag: &[T], sup: &[T]) -> Self {
        let n = diag.len();
        assert!(n > 0);
        assert!(sub.len() + 1 == n && sup.len() + 1 == n, "band length mismatch");
        let mut dl = sub.to_vec();
        let mut d = diag.to_vec();
        let mut du = sup.to_vec();
        let mut du2 = vec![T::zero(); n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].magnitude() >= dl[i].magnitude() {
                if d[i].magnitude() != 0.0 {
                    let fact = dl[i] / d[i];
                    dl[i] = fact;
                    d[i + 1] = d[i + 1] - fact * du[i];
                }
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
                swapped[i] = true;
            }
        }
        let min_pivot = d.iter().map(|v| v.magnitude()).fold(f64::INFINITY, f64::min);
        Self {
            lower: dl,
            diag: d,
            upper: du,
            upper2: du2,
            swapped,
            min_pivot,
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Smallest pivot magnitude of the upper factor.
    pub fn min_pivot(&self) -> f64 {
        self.min_pivot
    }

    pub fn solve_in_place(&self, b: &mut [T]) {
        let n = self.len();
        assert_eq!(b.len(), n);
        for i in 0..n - 1 {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.lower[i] * b[i];
            } else {
                b[i + 1] = b[i + 1] - self.lower[i] * b[i];
            }
        }
        b[n - 1] = b[n - 1] / self.diag[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.upper[n - 2] * b[n - 1]) / self.diag[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.upper[i] * b[i + 1] - self.upper2[i] * b[i + 2]) / self.diag[i];
        }
    }

    pub fn solve(&self, rhs: &[T]) -> Vec<T> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// One-shot tridiagonal solve with partial pivoting.
pub fn solve_tridiagonal<T: Scalar>(sub: &[T], diag: &[T], sup: &[T], rhs: &[T]) -> Option<Vec<T>> {
    TridiagLu::factor(sub, diag, sup).map(|lu| lu.solve(rhs))
}
