//! Dense linear algebra helpers: an LU factorization with partial pivoting
//! and an explicit pivot-magnitude singularity test, plus small Kronecker
//! utilities.

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;

pub type RMat = DMatrix<f64>;
pub type CMat = DMatrix<Complex64>;
pub type RVec = DVector<f64>;
pub type CVec = DVector<Complex64>;

/// Relative pivot threshold: a pivot below `PIVOT_RTOL * ||A||_inf` marks
/// the matrix as numerically singular.
pub const PIVOT_RTOL: f64 = 1e-14;

/// Scalars accepted by [`DenseLu`].
pub trait LuScalar: ComplexField<RealField = f64> + Copy {}
impl<T: ComplexField<RealField = f64> + Copy> LuScalar for T {}

/// A matrix whose factorization hit a pivot below the threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Singular {
    pub pivot: f64,
    pub threshold: f64,
}

/// Row-pivoted LU factorization `P A = L U` stored in place.
///
/// Elimination skips zero multipliers and zero pivot-row entries, so banded
/// or bordered matrices factor in far fewer operations than the dense
/// worst case while the storage stays dense.
#[derive(Debug, Clone)]
pub struct DenseLu<T: LuScalar> {
    lu: DMatrix<T>,
    perm: Vec<usize>,
}

pub fn inf_norm<T: LuScalar>(a: &DMatrix<T>) -> f64 {
    (0..a.nrows())
        .map(|i| a.row(i).iter().map(|v| v.modulus()).sum::<f64>())
        .fold(0.0, f64::max)
}

impl<T: LuScalar> DenseLu<T> {
    pub fn factor(mut a: DMatrix<T>) -> Result<Self, Singular> {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "LU of a non-square matrix");
        let threshold = PIVOT_RTOL * inf_norm(&a);
        let mut perm: Vec<usize> = (0..n).collect();
        let mut rows = Vec::with_capacity(n);
        for k in 0..n {
            let mut p = k;
            let mut best = a[(k, k)].modulus();
            for i in k + 1..n {
                let v = a[(i, k)].modulus();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= threshold {
                return Err(Singular { pivot: best, threshold });
            }
            if p != k {
                a.swap_rows(k, p);
                perm.swap(k, p);
            }
            let pivot = a[(k, k)];
            rows.clear();
            for i in k + 1..n {
                let v = a[(i, k)];
                if v != T::zero() {
                    let l = v / pivot;
                    a[(i, k)] = l;
                    rows.push((i, l));
                }
            }
            if rows.is_empty() {
                continue;
            }
            for j in k + 1..n {
                let u = a[(k, j)];
                if u == T::zero() {
                    continue;
                }
                let col = &mut a.as_mut_slice()[j * n..(j + 1) * n];
                for &(i, l) in &rows {
                    col[i] -= l * u;
                }
            }
        }
        Ok(DenseLu { lu: a, perm })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [T]) {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for j in 0..n {
            let xj = x[j];
            if xj == T::zero() {
                continue;
            }
            let col = self.lu.column(j);
            for i in j + 1..n {
                x[i] -= col[i] * xj;
            }
        }
        for j in (0..n).rev() {
            let col = self.lu.column(j);
            let xj = x[j] / col[j];
            x[j] = xj;
            if xj == T::zero() {
                continue;
            }
            for i in 0..j {
                x[i] -= col[i] * xj;
            }
        }
        b.copy_from_slice(&x);
    }

    pub fn solve_vec(&self, b: &DVector<T>) -> DVector<T> {
        let mut x = b.clone();
        self.solve_in_place(x.as_mut_slice());
        x
    }

    pub fn solve_mat(&self, b: &DMatrix<T>) -> DMatrix<T> {
        let mut x = b.clone();
        for mut col in x.column_iter_mut() {
            let mut tmp: Vec<T> = col.iter().copied().collect();
            self.solve_in_place(&mut tmp);
            col.iter_mut().zip(tmp).for_each(|(c, v)| *c = v);
        }
        x
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron<T: LuScalar>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = DMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            if aij == T::zero() {
                continue;
            }
            out.view_mut((i * br, j * bc), (br, bc))
                .zip_apply(b, |o, v| *o = aij * v);
        }
    }
    out
}

pub fn to_complex(a: &RMat) -> CMat {
    a.map(|v| Complex64::new(v, 0.0))
}

/// Explicit inverse by Gauss-Jordan elimination with partial pivoting; used
/// as an independent check of factorization-based evaluation.
pub fn gauss_jordan_inverse(a: &CMat) -> Option<CMat> {
    let n = a.nrows();
    let mut m = a.clone();
    let mut inv = CMat::identity(n, n);
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| m[(i, k)].norm().total_cmp(&m[(j, k)].norm()))?;
        if m[(p, k)].norm() == 0.0 {
            return None;
        }
        m.swap_rows(k, p);
        inv.swap_rows(k, p);
        let piv = m[(k, k)];
        for j in 0..n {
            m[(k, j)] /= piv;
            inv[(k, j)] /= piv;
        }
        for i in 0..n {
            if i == k {
                continue;
            }
            let f = m[(i, k)];
            if f == Complex64::new(0.0, 0.0) {
                continue;
            }
            for j in 0..n {
                let mk = m[(k, j)];
                let ik = inv[(k, j)];
                m[(i, j)] -= f * mk;
                inv[(i, j)] -= f * ik;
            }
        }
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_solves_small_system() {
        let a = RMat::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0]);
        let lu = DenseLu::factor(a.clone()).unwrap();
        let b = RVec::from_vec(vec![1.0, 2.0, 3.0]);
        let x = lu.solve_vec(&b);
        assert!((&a * &x - &b).amax() < 1e-14);
    }

    #[test]
    fn lu_needs_pivoting() {
        let a = RMat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let lu = DenseLu::factor(a).unwrap();
        let x = lu.solve_vec(&RVec::from_vec(vec![3.0, 5.0]));
        assert_eq!(x.as_slice(), &[5.0, 3.0]);
    }

    #[test]
    fn zero_matrix_is_singular() {
        assert!(DenseLu::factor(RMat::zeros(1, 1)).is_err());
        let a = RMat::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(DenseLu::factor(a).is_err());
    }

    #[test]
    fn complex_lu_matches_gauss_jordan() {
        let a = CMat::from_fn(4, 4, |i, j| {
            Complex64::new((i * 3 + j) as f64 % 5.0 + if i == j { 4.0 } else { 0.0 }, (i + 2 * j) as f64 * 0.1)
        });
        let lu = DenseLu::factor(a.clone()).unwrap();
        let inv = gauss_jordan_inverse(&a).unwrap();
        let x = lu.solve_mat(&CMat::identity(4, 4));
        assert!((x - inv).camax() < 1e-13);
    }

    #[test]
    fn kron_shapes_and_values() {
        let a = RMat::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = RMat::identity(2, 2);
        let k = kron(&a, &b);
        assert_eq!(k.shape(), (4, 4));
        assert_eq!(k[(2, 0)], 3.0);
        assert_eq!(k[(3, 1)], 3.0);
        assert_eq!(k[(2, 1)], 0.0);
    }
}
