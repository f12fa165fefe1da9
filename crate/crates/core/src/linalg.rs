//! Small dense linear algebra: LU solves for the 6-state model and a
//! Householder least-squares solver for the controller fits.

use crate::error::{Error, Result};
use crate::scalar::Real;

pub type SquareMatrix<T, const N: usize> = [[T; N]; N];

pub fn mat_vec<T: Real, const R: usize, const C: usize>(m: &[[T; C]; R], v: &[T; C]) -> [T; R] {
    let mut out = [T::zero(); R];
    for (o, row) in out.iter_mut().zip(m) {
        *o = row
            .iter()
            .zip(v)
            .fold(T::zero(), |acc, (&a, &b)| acc + a * b);
    }
    out
}

fn norm1<T: Real, const N: usize>(m: &SquareMatrix<T, N>) -> T {
    (0..N)
        .map(|j| m.iter().fold(T::zero(), |acc, row| acc + row[j].abs()))
        .fold(T::zero(), T::max)
}

/// LU factorization with partial pivoting, packed in place.
struct Lu<T, const N: usize> {
    lu: SquareMatrix<T, N>,
    perm: [usize; N],
}

impl<T: Real, const N: usize> Lu<T, N> {
    fn factor(a: &SquareMatrix<T, N>) -> Option<Self> {
        let mut lu = *a;
        let mut perm = [0usize; N];
        for (i, p) in perm.iter_mut().enumerate() {
            *p = i;
        }
        let scale = norm1(a);
        let tiny = T::epsilon() * T::from_usize_lossy(N) * scale;
        for k in 0..N {
            let pivot_row = (k..N)
                .max_by(|&i, &j| lu[i][k].abs().partial_cmp(&lu[j][k].abs()).unwrap())
                .unwrap();
            if !(lu[pivot_row][k].abs() > tiny) {
                return None;
            }
            lu.swap(k, pivot_row);
            perm.swap(k, pivot_row);
            for i in (k + 1)..N {
                let f = lu[i][k] / lu[k][k];
                lu[i][k] = f;
                for j in (k + 1)..N {
                    let v = lu[k][j];
                    lu[i][j] = lu[i][j] - f * v;
                }
            }
        }
        Some(Self { lu, perm })
    }

    fn solve(&self, b: &[T; N]) -> [T; N] {
        let mut x = [T::zero(); N];
        for i in 0..N {
            x[i] = b[self.perm[i]];
        }
        for i in 0..N {
            for j in 0..i {
                x[i] = x[i] - self.lu[i][j] * x[j];
            }
        }
        for i in (0..N).rev() {
            for j in (i + 1)..N {
                x[i] = x[i] - self.lu[i][j] * x[j];
            }
            x[i] = x[i] / self.lu[i][i];
        }
        x
    }

    fn inverse(&self) -> SquareMatrix<T, N> {
        let mut inv = [[T::zero(); N]; N];
        for j in 0..N {
            let mut e = [T::zero(); N];
            e[j] = T::one();
            let col = self.solve(&e);
            for i in 0..N {
                inv[i][j] = col[i];
            }
        }
        inv
    }
}

/// 1-norm condition number `‖A‖₁‖A⁻¹‖₁`, infinite when `A` is singular.
pub fn condition_number<T: Real, const N: usize>(a: &SquareMatrix<T, N>) -> f64 {
    match Lu::factor(a) {
        Some(lu) => (norm1(a) * norm1(&lu.inverse()))
            .to_f64()
            .unwrap_or(f64::INFINITY),
        None => f64::INFINITY,
    }
}

/// Solves `A·x = b`.
pub fn solve<T: Real, const N: usize>(a: &SquareMatrix<T, N>, b: &[T; N]) -> Result<[T; N]> {
    let lu = Lu::factor(a).ok_or(Error::Singular {
        condition: f64::INFINITY,
    })?;
    let cond = (norm1(a) * norm1(&lu.inverse()))
        .to_f64()
        .unwrap_or(f64::INFINITY);
    let eps = T::epsilon().to_f64().unwrap_or(f64::EPSILON);
    if !(cond.is_finite() && cond * eps < 1e-2) {
        return Err(Error::Singular { condition: cond });
    }
    Ok(lu.solve(b))
}

/// Output of [`least_squares`].
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares<T> {
    pub theta: Vec<T>,
    /// sqrt(mean squared residual) over all rows.
    pub residual_rms: T,
    /// Singular values of the regressor matrix, descending.
    pub singular_values: Vec<T>,
}

impl<T: Real> LeastSquares<T> {
    pub fn condition_number(&self) -> T {
        let max = self
            .singular_values
            .first()
            .copied()
            .unwrap_or_else(T::zero);
        let min = self.singular_values.last().copied().unwrap_or_else(T::zero);
        max / min
    }
}

/// Minimizes `‖y − Φθ‖²` by Householder QR. `columns` holds the regressors
/// column-wise; all columns must share the length of `y`.
///
/// Rank deficiency (relative singular-value gap below `sqrt(eps)`, or an
/// all-zero regressor matrix) is reported as [`Error::Conditioning`].
pub fn least_squares<T: Real>(columns: &[Vec<T>], y: &[T]) -> Result<LeastSquares<T>> {
    let p = columns.len();
    let n = y.len();
    for c in columns {
        if c.len() != n {
            return Err(Error::Alignment {
                left: c.len(),
                right: n,
            });
        }
    }
    if columns.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Signal("non-finite regression data".into()));
    }
    if p == 0 || n < p {
        return Err(Error::Degenerate(format!("{n} rows for {p} unknowns")));
    }

    let mut a: Vec<Vec<T>> = columns.to_vec();
    let mut rhs = y.to_vec();
    for k in 0..p {
        let norm = a[k][k..]
            .iter()
            .fold(T::zero(), |acc, &v| acc + v * v)
            .sqrt();
        if norm == T::zero() {
            continue;
        }
        let alpha = if a[k][k] > T::zero() { -norm } else { norm };
        let mut v: Vec<T> = a[k][k..].to_vec();
        v[0] = v[0] - alpha;
        let vnorm2 = v.iter().fold(T::zero(), |acc, &x| acc + x * x);
        if vnorm2 == T::zero() {
            continue;
        }
        let two = T::lit(2.0);
        for col in a.iter_mut().skip(k) {
            let dot = v
                .iter()
                .zip(&col[k..])
                .fold(T::zero(), |acc, (&vi, &ci)| acc + vi * ci);
            let f = two * dot / vnorm2;
            for (ci, &vi) in col[k..].iter_mut().zip(&v) {
                *ci = *ci - f * vi;
            }
        }
        let dot = v
            .iter()
            .zip(&rhs[k..])
            .fold(T::zero(), |acc, (&vi, &ri)| acc + vi * ri);
        let f = two * dot / vnorm2;
        for (ri, &vi) in rhs[k..].iter_mut().zip(&v) {
            *ri = *ri - f * vi;
        }
    }

    // R is the upper p×p block, column-major in `a`.
    let r: Vec<Vec<T>> = (0..p)
        .map(|i| {
            (0..p)
                .map(|j| if i <= j { a[j][i] } else { T::zero() })
                .collect()
        })
        .collect();
    let singular_values = singular_values(&r);
    let smax = singular_values[0];
    let smin = singular_values[p - 1];
    if !(smax > T::zero()) || !(smin > smax * T::epsilon().sqrt()) {
        return Err(Error::Conditioning {
            singular_values: singular_values
                .iter()
                .map(|s| s.to_f64().unwrap_or(f64::NAN))
                .collect(),
        });
    }

    let mut theta = vec![T::zero(); p];
    for i in (0..p).rev() {
        let mut acc = rhs[i];
        for j in (i + 1)..p {
            acc = acc - r[i][j] * theta[j];
        }
        theta[i] = acc / r[i][i];
    }
    let ss = rhs[p..].iter().fold(T::zero(), |acc, &v| acc + v * v);
    Ok(LeastSquares {
        theta,
        residual_rms: (ss / T::from_usize_lossy(n)).sqrt(),
        singular_values,
    })
}

/// Singular values of a small square matrix by one-sided Jacobi rotations.
pub fn singular_values<T: Real>(m: &[Vec<T>]) -> Vec<T> {
    let n = m.len();
    // work column-wise
    let mut cols: Vec<Vec<T>> = (0..n)
        .map(|j| m.iter().map(|row| row[j]).collect())
        .collect();
    let tol = T::epsilon();
    for _sweep in 0..60 {
        let mut rotated = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let alpha = cols[i].iter().fold(T::zero(), |a, &x| a + x * x);
                let beta = cols[j].iter().fold(T::zero(), |a, &x| a + x * x);
                let gamma = cols[i]
                    .iter()
                    .zip(&cols[j])
                    .fold(T::zero(), |a, (&x, &y)| a + x * y);
                if gamma == T::zero() || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let sign = if zeta >= T::zero() {
                    T::one()
                } else {
                    -T::one()
                };
                let t = sign / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for k in 0..n {
                    let xi = cols[i][k];
                    let xj = cols[j][k];
                    cols[i][k] = c * xi - s * xj;
                    cols[j][k] = s * xi + c * xj;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<T> = cols
        .iter()
        .map(|c| c.iter().fold(T::zero(), |a, &x| a + x * x).sqrt())
        .collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    sv
}
