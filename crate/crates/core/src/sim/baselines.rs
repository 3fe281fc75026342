//! Comparison methods that work on raw edge vectors: ridge regression, and a
//! GP on principal-component scores.

use nalgebra::{DMatrix, DVector};

use crate::gp::{
    default_init, fit_mle, predict_mle, Distances, GpHyperparams, MleConfig, Prediction,
};
use crate::linalg::sym_eigen_desc;
use crate::network::EdgeSet;
use crate::{Error, Result};

/// Ridge penalties tried by cross-validation.
pub const RIDGE_GRID: [f64; 7] = [1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3];
pub const RIDGE_FOLDS: usize = 5;

/// Stacks edge vectors as rows.
pub fn edge_matrix(nets: &[EdgeSet]) -> Result<DMatrix<f64>> {
    let m = nets.first().map_or(0, |e| e.len());
    if let Some(bad) = nets.iter().find(|e| e.len() != m) {
        return Err(Error::DimensionMismatch(format!(
            "edge vectors of length {} and {}",
            m,
            bad.len()
        )));
    }
    Ok(DMatrix::from_fn(nets.len(), m, |i, j| {
        nets[i].as_slice()[j] as f64
    }))
}

fn solve_spd(a: DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        return Ok(ch.solve(b));
    }
    a.lu()
        .solve(b)
        .ok_or_else(|| Error::Numerical("singular ridge system".into()))
}

fn column_means(x: &DMatrix<f64>) -> DVector<f64> {
    let n = x.nrows().max(1) as f64;
    DVector::from_fn(x.ncols(), |j, _| x.column(j).sum() / n)
}

fn center_rows(x: &DMatrix<f64>, mean: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] - mean[j])
}

/// Ridge coefficients with an unpenalized intercept.
#[derive(Clone, Debug, PartialEq)]
pub struct RidgeFit {
    pub intercept: f64,
    pub coef: DVector<f64>,
}

impl RidgeFit {
    pub fn predict(&self, x: &DMatrix<f64>) -> DVector<f64> {
        (x * &self.coef).add_scalar(self.intercept)
    }
}

/// Minimizes `‖y − c − Xβ‖² + λ‖β‖²`. Solves in the primal when features
/// do not outnumber observations and in the dual otherwise.
pub fn ridge_fit(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<RidgeFit> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} rows for {} responses",
            x.nrows(),
            y.len()
        )));
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(
            "ridge penalty must be non-negative".into(),
        ));
    }
    let mx = column_means(x);
    let my = y.mean();
    let xc = center_rows(x, &mx);
    let yc = y.add_scalar(-my);
    let (n, m) = xc.shape();
    let coef = if m <= n {
        let mut a = xc.transpose() * &xc;
        for i in 0..m {
            a[(i, i)] += lambda;
        }
        let rhs = DMatrix::from_column_slice(m, 1, (xc.transpose() * &yc).as_slice());
        solve_spd(a, &rhs)?.column(0).into_owned()
    } else {
        let mut g = &xc * xc.transpose();
        for i in 0..n {
            g[(i, i)] += lambda;
        }
        let rhs = DMatrix::from_column_slice(n, 1, yc.as_slice());
        xc.transpose() * solve_spd(g, &rhs)?.column(0)
    };
    let intercept = my - mx.dot(&coef);
    Ok(RidgeFit { intercept, coef })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RidgeResult {
    pub predictions: Vec<f64>,
    /// Penalty chosen by cross-validation.
    pub lambda: f64,
}

fn select_rows(x: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), x.ncols(), |i, j| x[(rows[i], j)])
}

/// Ridge on full edge vectors with the penalty picked by 5-fold
/// cross-validation (subject `i` in fold `i mod 5`) over [`RIDGE_GRID`].
pub fn ridge_baseline(train: &[EdgeSet], y_train: &[f64], test: &[EdgeSet]) -> Result<RidgeResult> {
    let x = edge_matrix(train)?;
    let xt = edge_matrix(test)?;
    if !test.is_empty() && xt.ncols() != x.ncols() {
        return Err(Error::DimensionMismatch(
            "train and test edge vectors differ in length".into(),
        ));
    }
    let y = DVector::from_column_slice(y_train);
    let n = y.len();
    let folds = RIDGE_FOLDS.min(n);
    let lambda = if folds < 2 {
        1.0
    } else {
        let mut best = (f64::INFINITY, RIDGE_GRID[0]);
        for &lam in &RIDGE_GRID {
            let mut sse = 0.0;
            for f in 0..folds {
                let (tr, va): (Vec<usize>, Vec<usize>) = (0..n).partition(|i| i % folds != f);
                let fit = ridge_fit(
                    &select_rows(&x, &tr),
                    &DVector::from_fn(tr.len(), |i, _| y[tr[i]]),
                    lam,
                )?;
                let pred = fit.predict(&select_rows(&x, &va));
                sse += va
                    .iter()
                    .zip(pred.iter())
                    .map(|(&i, p)| (y[i] - p).powi(2))
                    .sum::<f64>();
            }
            // ties go to the heavier penalty
            if sse <= best.0 {
                best = (sse, lam);
            }
        }
        best.1
    };
    let fit = ridge_fit(&x, &y, lambda)?;
    Ok(RidgeResult {
        predictions: fit.predict(&xt).iter().copied().collect(),
        lambda,
    })
}

/// Principal-component scores of training and test rows.
#[derive(Clone, Debug, PartialEq)]
pub struct PcaScores {
    pub train: DMatrix<f64>,
    pub test: DMatrix<f64>,
    /// Unit principal directions as columns.
    pub directions: DMatrix<f64>,
    pub mean: DVector<f64>,
    /// Variance of each retained component (eigenvalues of the sample
    /// covariance with divisor `n − 1`).
    pub variances: Vec<f64>,
}

/// Projects centered rows on the leading principal directions, computed
/// from the `n×n` Gram matrix. `components = None` picks the smallest count
/// explaining 90% of the variance, capped at `n − 5`. Directions with
/// negligible variance are dropped with a warning.
pub fn pca_scores(
    train: &DMatrix<f64>,
    test: &DMatrix<f64>,
    components: Option<usize>,
) -> Result<PcaScores> {
    let (n, m) = train.shape();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "principal components need at least two rows".into(),
        ));
    }
    if test.nrows() > 0 && test.ncols() != m {
        return Err(Error::DimensionMismatch(format!(
            "test rows have {} columns, training {}",
            test.ncols(),
            m
        )));
    }
    if components == Some(0) {
        return Err(Error::InvalidArgument(
            "need at least one principal component".into(),
        ));
    }
    if let Some(k) = components {
        if k > n.min(m) {
            return Err(Error::InvalidArgument(format!(
                "{k} components requested from a {n}x{m} matrix"
            )));
        }
    }
    let mean = column_means(train);
    let xc = center_rows(train, &mean);
    let gram = &xc * xc.transpose();
    let (vals, vecs) = sym_eigen_desc(&gram);
    let top = vals[0].max(0.0);
    let rank = vals
        .iter()
        .take_while(|&&v| v > 1e-10 * top && v > 0.0)
        .count();
    if rank == 0 {
        return Err(Error::Numerical("training rows are all identical".into()));
    }
    let total: f64 = vals.iter().map(|v| v.max(0.0)).sum();
    let mut k = match components {
        Some(k) => k,
        None => {
            let mut acc = 0.0;
            let mut k = n;
            for (i, v) in vals.iter().enumerate() {
                acc += v.max(0.0);
                if acc >= 0.9 * total {
                    k = i + 1;
                    break;
                }
            }
            k.min(n.saturating_sub(5).max(1))
        }
    };
    if k > rank {
        log::warn!("only {rank} principal directions carry variance; using {rank} instead of {k}");
        k = rank;
    }
    let directions = DMatrix::from_fn(m, k, |r, j| {
        (xc.column(r).dot(&vecs.column(j))) / vals[j].sqrt()
    });
    let train_scores = &xc * &directions;
    let test_scores = if test.nrows() == 0 {
        DMatrix::zeros(0, k)
    } else {
        center_rows(test, &mean) * &directions
    };
    Ok(PcaScores {
        train: train_scores,
        test: test_scores,
        directions,
        mean,
        variances: vals.iter().take(k).map(|v| v / (n - 1) as f64).collect(),
    })
}

fn score_distances(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Distances<f64> {
    let eu = DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| {
        (a.row(i) - b.row(j)).norm_squared()
    });
    let zeros = DMatrix::zeros(a.nrows(), b.nrows());
    Distances {
        eu,
        ea: zeros.clone(),
        ez: zeros,
    }
}

#[derive(Clone, Debug)]
pub struct PcaGprFit {
    pub prediction: Prediction<f64>,
    pub components: usize,
    pub theta: GpHyperparams<f64>,
}

/// GP regression with one squared-exponential lengthscale on principal
/// component scores of the edge vectors, fitted by maximum likelihood.
pub fn pca_gpr_baseline(
    train: &[EdgeSet],
    y_train: &[f64],
    test: &[EdgeSet],
    components: Option<usize>,
    mle: &MleConfig,
) -> Result<PcaGprFit> {
    let scores = pca_scores(&edge_matrix(train)?, &edge_matrix(test)?, components)?;
    let y = DVector::from_column_slice(y_train);
    let d = score_distances(&scores.train, &scores.train);
    let fit = fit_mle(&y, &d, default_init(&y, &d), mle)?;
    let cross = score_distances(&scores.test, &scores.train);
    let prediction = predict_mle(&fit.theta, &y, &d, &cross)?;
    Ok(PcaGprFit {
        prediction,
        components: scores.directions.ncols(),
        theta: fit.theta,
    })
}
