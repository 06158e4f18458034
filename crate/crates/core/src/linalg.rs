//! Dense complex LU factorization with a 1-norm condition estimate.
//!
//! Factorization is delegated to `nalgebra`'s partial-pivoting LU. The
//! condition estimate follows Hager's method as refined by Higham (the
//! `zlacn2` iteration), which needs solves with both `A` and `A^H`.

use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::C64;

pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Largest condition-number estimate accepted by the solver.
pub const MAX_CONDITION: f64 = 1e14;

pub struct DenseLu {
    lu: LU<C64, Dyn, Dyn>,
    l: CMatrix,
    u: CMatrix,
    norm1: f64,
}

impl DenseLu {
    /// Factors `a`. Returns `None` when a pivot is exactly zero.
    pub fn factor(a: CMatrix) -> Option<Self> {
        assert!(a.is_square(), "LU of a non-square matrix");
        let norm1 = matrix_norm1(&a);
        let lu = a.lu();
        if !lu.is_invertible() {
            return None;
        }
        let l = lu.l();
        let u = lu.u();
        Some(Self { lu, l, u, norm1 })
    }

    /// 1-norm of the factored matrix.
    pub fn norm1(&self) -> f64 {
        self.norm1
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &CVector) -> CVector {
        let mut x = b.clone();
        self.solve_mut(&mut x);
        x
    }

    pub fn solve_mut(&self, x: &mut CVector) {
        // Cannot fail: invertibility was checked in `factor`.
        let ok = self.lu.solve_mut(x);
        debug_assert!(ok);
    }

    /// Solves `A X = B` for all columns of `B` at once.
    pub fn solve_many(&self, b: &CMatrix) -> CMatrix {
        self.lu.solve(b).expect("factorization is invertible")
    }

    /// Solves `A^H y = b`, using `P A = L U`, so `A^H = U^H L^H P`.
    pub fn solve_adjoint(&self, b: &CVector) -> CVector {
        let s = self.u.ad_solve_upper_triangular(b).expect("nonzero pivots");
        let mut t = self
            .l
            .ad_solve_lower_triangular(&s)
            .expect("unit lower factor");
        self.lu.p().inv_permute_rows(&mut t);
        t
    }

    /// 1-norm condition number estimate `‖A‖₁ · est(‖A⁻¹‖₁)`.
    pub fn condition_estimate(&self) -> f64 {
        self.norm1 * self.inverse_norm1_estimate()
    }

    fn inverse_norm1_estimate(&self) -> f64 {
        let n = self.dim();
        if n == 0 {
            return 0.0;
        }
        let mut x = CVector::from_element(n, C64::new(1.0 / n as f64, 0.0));
        let mut est = 0.0;
        let mut last_j = usize::MAX;
        for iter in 0..5 {
            let y = self.solve(&x);
            let new_est = vector_norm1(&y);
            if iter > 0 && new_est <= est {
                break;
            }
            est = new_est;
            let xi = y.map(|v| {
                let a = v.norm();
                if a == 0.0 {
                    C64::new(1.0, 0.0)
                } else {
                    v / a
                }
            });
            let z = self.solve_adjoint(&xi);
            let (j, zmax) =
                z.iter()
                    .enumerate()
                    .map(|(i, v)| (i, v.norm()))
                    .fold(
                        (0, f64::MIN),
                        |acc, cur| if cur.1 > acc.1 { cur } else { acc },
                    );
            if iter > 0 && (j == last_j || zmax <= z.dotc(&x).re) {
                break;
            }
            last_j = j;
            x = CVector::zeros(n);
            x[j] = C64::new(1.0, 0.0);
        }
        // Alternating test vector guards against the iteration stalling.
        let alt = CVector::from_fn(n, |i, _| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            let ramp = if n > 1 {
                i as f64 / (n - 1) as f64
            } else {
                0.0
            };
            C64::new(sign * (1.0 + ramp), 0.0)
        });
        let alt_est = 2.0 * vector_norm1(&self.solve(&alt)) / (3.0 * n as f64);
        est.max(alt_est)
    }
}

pub fn vector_norm1(v: &CVector) -> f64 {
    v.iter().map(|c| c.norm()).sum()
}

/// Maximum absolute column sum.
pub fn matrix_norm1(a: &CMatrix) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}
