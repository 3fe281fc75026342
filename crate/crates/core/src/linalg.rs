//! Dense linear-algebra helpers shared by the embedding and GP code.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::{lit, Error, Real, Result};

/// Relative jitter added to the diagonal before the first factorization attempt.
pub const JITTER_START: f64 = 1e-8;
/// Largest relative jitter tried before giving up.
pub const JITTER_MAX: f64 = 1e-4;

/// Cholesky factor of a symmetric positive-definite matrix, together with
/// the absolute diagonal jitter that was needed to obtain it.
#[derive(Clone, Debug)]
pub struct Factor<T: Real> {
    chol: Cholesky<T, Dyn>,
    jitter: T,
}

impl<T: Real> Factor<T> {
    /// Factorizes `m + jitter·I`.
    ///
    /// The jitter starts at `1e-8 · mean(diag m)` and grows tenfold on each
    /// failed attempt up to `1e-4 · mean(diag m)`.
    pub fn new(m: &DMatrix<T>) -> Result<Self> {
        let n = m.nrows();
        if n != m.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "cannot factorize a {}x{} matrix",
                n,
                m.ncols()
            )));
        }
        if n == 0 {
            return Ok(Self {
                chol: Cholesky::new(DMatrix::zeros(0, 0)).expect("empty factorization"),
                jitter: T::zero(),
            });
        }
        let mean_diag = m.diagonal().sum() / lit::<T>(n as f64);
        let scale = if mean_diag > T::zero() && mean_diag.is_finite() {
            mean_diag
        } else {
            T::one()
        };
        let mut rel = JITTER_START;
        while rel <= JITTER_MAX * (1.0 + 1e-9) {
            let jitter = scale * lit::<T>(rel);
            let mut work = m.clone();
            for i in 0..n {
                work[(i, i)] += jitter;
            }
            if let Some(chol) = Cholesky::new(work) {
                if chol.l_dirty().iter().all(|v| v.is_finite()) {
                    return Ok(Self { chol, jitter });
                }
            }
            rel *= 10.0;
        }
        Err(Error::Factorization {
            jitter: crate::to_f64(scale) * JITTER_MAX,
        })
    }

    pub fn jitter(&self) -> T {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    /// Lower-triangular factor `L` with `L Lᵀ = m + jitter·I`.
    pub fn l(&self) -> DMatrix<T> {
        self.chol.l()
    }

    /// `log |m + jitter·I|`.
    pub fn log_det(&self) -> T {
        let l = self.chol.l_dirty();
        let two: T = lit(2.0);
        (0..l.nrows()).fold(T::zero(), |acc, i| acc + two * l[(i, i)].ln())
    }

    pub fn solve(&self, b: &DVector<T>) -> DVector<T> {
        self.chol.solve(b)
    }

    pub fn solve_mat(&self, b: &DMatrix<T>) -> DMatrix<T> {
        self.chol.solve(b)
    }

    /// Solves `L x = b` (forward substitution only).
    pub fn solve_lower(&self, b: &DMatrix<T>) -> DMatrix<T> {
        let l = self.chol.l();
        l.solve_lower_triangular(b)
            .expect("Cholesky factor has a positive diagonal")
    }

    /// Explicit inverse. Only used where a full inverse is genuinely needed
    /// (the gradient trace term).
    pub fn inverse(&self) -> DMatrix<T> {
        self.chol.inverse()
    }
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted in
/// descending order; column `k` of the returned matrix pairs with value `k`.
pub fn sym_eigen_desc<T: Real>(m: &DMatrix<T>) -> (DVector<T>, DMatrix<T>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Log density of `y ~ N(0, m)` up to the `−n/2·log 2π` constant, i.e.
/// `−½ log|m| − ½ yᵀ m⁻¹ y`.
pub fn gaussian_log_kernel<T: Real>(m: &DMatrix<T>, y: &DVector<T>) -> Result<T> {
    let f = Factor::new(m)?;
    let alpha = f.solve(y);
    let half: T = lit(0.5);
    Ok(-half * f.log_det() - half * y.dot(&alpha))
}
