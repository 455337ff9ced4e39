//! Minimum-norm linear least squares by complete orthogonal decomposition.
//!
//! `A P = Q [R11 R12; 0 0]` via Householder QR with column pivoting, then the
//! leading `rank` rows of `R` are factored from the right so the minimum-norm
//! solution falls out of one triangular solve.

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::num::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares<T> {
    pub solution: Vec<T>,
    pub rank: usize,
}

/// Householder reflector `I - 2 v vᵀ / vᵀv`, applied to columns `col..` from row `start`.
struct Reflector<T> {
    start: usize,
    v: Vec<T>,
    vtv: T,
}

impl<T: Scalar> Reflector<T> {
    /// Builds the reflector that maps `x` onto `alpha * e1`; returns `None` for a zero vector.
    fn annihilating(start: usize, x: &[T]) -> Option<(Self, T)> {
        let norm = x.iter().map(|&v| v * v).sum::<T>().sqrt();
        if norm == T::zero() {
            return None;
        }
        let alpha = if x[0] > T::zero() { -norm } else { norm };
        let mut v = x.to_vec();
        v[0] = v[0] - alpha;
        let vtv = v.iter().map(|&e| e * e).sum::<T>();
        if vtv == T::zero() {
            return None;
        }
        Some((Reflector { start, v, vtv }, alpha))
    }

    fn apply(&self, y: &mut [T]) {
        let s = &mut y[self.start..self.start + self.v.len()];
        let dot: T = s.iter().zip(&self.v).map(|(&a, &b)| a * b).sum();
        let f = T::lit(2.0) * dot / self.vtv;
        for (a, &b) in s.iter_mut().zip(&self.v) {
            *a = *a - f * b;
        }
    }

    fn apply_to_columns(&self, m: &mut DenseMatrix<T>, from_col: usize) {
        let two = T::lit(2.0);
        for j in from_col..m.cols() {
            let mut dot = T::zero();
            for (k, &vk) in self.v.iter().enumerate() {
                dot = dot + vk * m[(self.start + k, j)];
            }
            let f = two * dot / self.vtv;
            for (k, &vk) in self.v.iter().enumerate() {
                let cell = &mut m[(self.start + k, j)];
                *cell = *cell - f * vk;
            }
        }
    }
}

fn column_norm_sq<T: Scalar>(m: &DenseMatrix<T>, from_row: usize, col: usize) -> T {
    (from_row..m.rows())
        .map(|i| m[(i, col)] * m[(i, col)])
        .sum()
}

fn swap_columns<T: Scalar>(m: &mut DenseMatrix<T>, a: usize, b: usize) {
    if a == b {
        return;
    }
    for i in 0..m.rows() {
        let t = m[(i, a)];
        m[(i, a)] = m[(i, b)];
        m[(i, b)] = t;
    }
}

/// Solves `min ‖A x - b‖₂`, choosing the smallest `‖x‖₂` when `A` is rank deficient.
pub fn min_norm_lstsq<T: Scalar>(a: &DenseMatrix<T>, b: &[T]) -> Result<LeastSquares<T>> {
    min_norm_lstsq_scaled(a, b, T::zero())
}

/// As [`min_norm_lstsq`], with the rank cutoff measured against at least `scale`.
///
/// Useful when `A` was derived by cancellation (e.g. centering) and its own
/// leading pivot no longer reflects the magnitude of the original data.
pub fn min_norm_lstsq_scaled<T: Scalar>(
    a: &DenseMatrix<T>,
    b: &[T],
    scale: T,
) -> Result<LeastSquares<T>> {
    let (m, n) = (a.rows(), a.cols());
    if b.len() != m {
        return Err(Error::Shape(format!("{m} rows but {} targets", b.len())));
    }
    let mut r = a.clone();
    let mut qtb = b.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    let steps = m.min(n);
    for k in 0..steps {
        let (pivot, _) =
            (k..n)
                .map(|j| (j, column_norm_sq(&r, k, j)))
                .fold(
                    (k, T::lit(-1.0)),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                );
        swap_columns(&mut r, k, pivot);
        perm.swap(k, pivot);
        let x: Vec<T> = (k..m).map(|i| r[(i, k)]).collect();
        let Some((h, alpha)) = Reflector::annihilating(k, &x) else {
            break;
        };
        h.apply_to_columns(&mut r, k + 1);
        h.apply(&mut qtb);
        r[(k, k)] = alpha;
        for i in (k + 1)..m {
            r[(i, k)] = T::zero();
        }
    }

    let lead = if steps > 0 {
        r[(0, 0)].abs()
    } else {
        T::zero()
    };
    let tol = T::from_count(m.max(n)) * T::epsilon() * lead.max(scale);
    let rank = (0..steps).take_while(|&k| r[(k, k)].abs() > tol).count();
    if rank == 0 {
        return Ok(LeastSquares {
            solution: vec![T::zero(); n],
            rank: 0,
        });
    }

    // Wᵀ = Z [U; 0] where W is the leading rank×n block of R
    let mut wt = DenseMatrix::from_fn(n, rank, |i, j| r[(j, i)]);
    let mut reflectors = Vec::with_capacity(rank);
    for k in 0..rank {
        let x: Vec<T> = (k..n).map(|i| wt[(i, k)]).collect();
        match Reflector::annihilating(k, &x) {
            Some((h, alpha)) => {
                h.apply_to_columns(&mut wt, k + 1);
                wt[(k, k)] = alpha;
                for i in (k + 1)..n {
                    wt[(i, k)] = T::zero();
                }
                reflectors.push(h);
            }
            None => {
                return Err(Error::DegenerateGraph(
                    "rank-revealing factorization broke down",
                ))
            }
        }
    }
    // W x' = qtb[..rank] with x' = Z u, u = [y; 0], and Uᵀ y = qtb[..rank]
    let mut u = vec![T::zero(); n];
    for i in 0..rank {
        let mut s = qtb[i];
        for j in 0..i {
            s = s - wt[(j, i)] * u[j];
        }
        u[i] = s / wt[(i, i)];
    }
    for h in reflectors.iter().rev() {
        h.apply(&mut u);
    }
    let mut solution = vec![T::zero(); n];
    for (k, &p) in perm.iter().enumerate() {
        solution[p] = u[k];
    }
    Ok(LeastSquares { solution, rank })
}
