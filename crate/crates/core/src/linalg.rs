//! Dense linear algebra helpers: LU factorization with partial pivoting for the
//! Newton-Raphson correction step and for inverting the bus admittance matrix.
//!
//! Systems here are small (Jacobian order is at most a few hundred), so a dense
//! factorization is the contract; no sparsity is exploited.

use num_complex::Complex;

use crate::error::NumericsError;
use crate::scalar::Real;

/// Solves `a x = b` in place for a real square system.
///
/// `a` is row-major `n x n` and is overwritten by its LU factors; `b` is
/// overwritten with the solution.
pub fn lu_solve<T: Real>(a: &mut [T], b: &mut [T], n: usize) -> Result<(), NumericsError> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    let mut perm: Vec<usize> = (0..n).collect();

    for k in 0..n {
        // pivot search on column k
        let mut p = k;
        let mut pmax = a[k * n + k].abs();
        for r in (k + 1)..n {
            let v = a[r * n + k].abs();
            if v > pmax {
                pmax = v;
                p = r;
            }
        }
        if pmax == T::zero() || !pmax.is_finite() {
            return Err(NumericsError::SingularMatrix { pivot: k });
        }
        if p != k {
            for c in 0..n {
                a.swap(k * n + c, p * n + c);
            }
            perm.swap(k, p);
        }
        let pivot = a[k * n + k];
        for r in (k + 1)..n {
            let factor = a[r * n + k] / pivot;
            a[r * n + k] = factor;
            for c in (k + 1)..n {
                let akc = a[k * n + c];
                a[r * n + c] = a[r * n + c] - factor * akc;
            }
        }
    }

    // apply permutation to the right-hand side
    let orig = b.to_vec();
    for (i, &pi) in perm.iter().enumerate() {
        b[i] = orig[pi];
    }
    // forward substitution (unit lower)
    for i in 1..n {
        let mut acc = b[i];
        for j in 0..i {
            acc = acc - a[i * n + j] * b[j];
        }
        b[i] = acc;
    }
    // back substitution
    for i in (0..n).rev() {
        let mut acc = b[i];
        for j in (i + 1)..n {
            acc = acc - a[i * n + j] * b[j];
        }
        b[i] = acc / a[i * n + i];
    }
    Ok(())
}

/// Inverts a dense complex square matrix (row-major) by LU with partial pivoting.
pub fn complex_inverse<T: Real>(
    a: &[Complex<T>],
    n: usize,
) -> Result<Vec<Complex<T>>, NumericsError> {
    debug_assert_eq!(a.len(), n * n);
    let mut lu = a.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();

    for k in 0..n {
        let mut p = k;
        let mut pmax = lu[k * n + k].norm_sqr();
        for r in (k + 1)..n {
            let v = lu[r * n + k].norm_sqr();
            if v > pmax {
                pmax = v;
                p = r;
            }
        }
        if pmax == T::zero() || !pmax.is_finite() {
            return Err(NumericsError::SingularMatrix { pivot: k });
        }
        if p != k {
            for c in 0..n {
                lu.swap(k * n + c, p * n + c);
            }
            perm.swap(k, p);
        }
        let pivot = lu[k * n + k];
        for r in (k + 1)..n {
            let factor = lu[r * n + k] / pivot;
            lu[r * n + k] = factor;
            for c in (k + 1)..n {
                let akc = lu[k * n + c];
                lu[r * n + c] = lu[r * n + c] - factor * akc;
            }
        }
    }

    let zero = Complex::new(T::zero(), T::zero());
    let one = Complex::new(T::one(), T::zero());
    let mut inv = vec![zero; n * n];
    let mut col = vec![zero; n];
    for rhs in 0..n {
        for (i, c) in col.iter_mut().enumerate() {
            *c = if perm[i] == rhs { one } else { zero };
        }
        for i in 1..n {
            let mut acc = col[i];
            for j in 0..i {
                acc -= lu[i * n + j] * col[j];
            }
            col[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = col[i];
            for j in (i + 1)..n {
                acc -= lu[i * n + j] * col[j];
            }
            col[i] = acc / lu[i * n + i];
        }
        for i in 0..n {
            inv[i * n + rhs] = col[i];
        }
    }
    Ok(inv)
}
