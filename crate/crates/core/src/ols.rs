//! Ordinary least squares for per-gene linear models.
//!
//! A design is factorised once ([`LeastSquares::new`], Householder QR) and
//! then applied to every gene, so per-gene work is a couple of small
//! matrix-vector products. Rank deficiency is declared when a diagonal entry
//! of R falls below `1e-10` times the norm of the corresponding column.

use nalgebra::{DMatrix, DVector};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    /// Intercept first, then one entry per design column.
    pub coefficients: Vec<f64>,
    pub residual_sum_squares: f64,
    pub r_squared: f64,
    /// `n - rho - 1`.
    pub dof: usize,
    pub coefficient_standard_errors: Vec<f64>,
    /// Number of non-intercept columns.
    pub rho: usize,
}

impl OlsFit {
    pub fn t_stat(&self, j: usize) -> f64 {
        self.coefficients[j] / self.coefficient_standard_errors[j]
    }

    pub fn p_value(&self, j: usize) -> f64 {
        two_sided_p(self.t_stat(j), self.dof as f64)
    }

    pub fn sigma2(&self) -> f64 {
        self.residual_sum_squares / self.dof as f64
    }
}

/// A factorised design matrix, reusable across genes.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    q: DMatrix<f64>,
    r_inv: DMatrix<f64>,
    /// Squared row norms of `R^-1`, the unscaled coefficient variances.
    unscaled_var: Vec<f64>,
}

impl LeastSquares {
    /// Factorises `design` (first column is the intercept).
    pub fn new(design: &DMatrix<f64>) -> Result<Self> {
        let (n, p) = design.shape();
        if p == 0 {
            return Err(Error::Dimension("design has no columns".into()));
        }
        if n <= p {
            return Err(Error::TooFewObservations { n, required: p });
        }
        let qr = design.clone().qr();
        let r = qr.r();
        for j in 0..p {
            let norm = design.column(j).norm();
            if norm == 0.0 || r[(j, j)].abs() <= RANK_TOLERANCE * norm {
                return Err(Error::RankDeficient { column: j });
            }
        }
        let r_inv = r
            .solve_upper_triangular(&DMatrix::identity(p, p))
            .ok_or(Error::RankDeficient { column: p - 1 })?;
        let unscaled_var = (0..p).map(|j| r_inv.row(j).norm_squared()).collect();
        Ok(Self {
            q: qr.q(),
            r_inv,
            unscaled_var,
        })
    }

    pub fn n(&self) -> usize {
        self.q.nrows()
    }

    pub fn n_columns(&self) -> usize {
        self.q.ncols()
    }

    pub fn rho(&self) -> usize {
        self.n_columns() - 1
    }

    pub fn dof(&self) -> usize {
        self.n() - self.n_columns()
    }

    /// Unscaled variance `[(X'X)^-1]_jj` of coefficient `j`.
    pub fn unscaled_variance(&self, j: usize) -> f64 {
        self.unscaled_var[j]
    }

    fn project(&self, y: &[f64]) -> (DVector<f64>, f64) {
        let yv = DVector::from_column_slice(y);
        let qty = self.q.tr_mul(&yv);
        let resid = &yv - &self.q * &qty;
        (qty, resid.norm_squared())
    }

    pub fn fit(&self, y: &[f64]) -> Result<OlsFit> {
        if y.len() != self.n() {
            return Err(Error::Dimension(format!(
                "response of length {} for design with {} rows",
                y.len(),
                self.n()
            )));
        }
        let (qty, rss) = self.project(y);
        let coef = &self.r_inv * &qty;
        let dof = self.dof();
        let sigma2 = rss / dof as f64;
        Ok(OlsFit {
            coefficients: coef.iter().copied().collect(),
            residual_sum_squares: rss,
            r_squared: r_squared_from(y, rss),
            dof,
            coefficient_standard_errors: self
                .unscaled_var
                .iter()
                .map(|v| (sigma2 * v).sqrt())
                .collect(),
            rho: self.rho(),
        })
    }

    /// Residual sum of squares and R^2 only.
    pub fn r_squared(&self, y: &[f64]) -> (f64, f64) {
        let (_, rss) = self.project(y);
        (rss, r_squared_from(y, rss))
    }

    pub fn residuals(&self, y: &[f64]) -> Vec<f64> {
        let yv = DVector::from_column_slice(y);
        let qty = self.q.tr_mul(&yv);
        (&yv - &self.q * &qty).iter().copied().collect()
    }
}

fn r_squared_from(y: &[f64], rss: f64) -> f64 {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let tss: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let scale: f64 = y.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
    if tss <= 1e-24 * scale {
        return 0.0;
    }
    (1.0 - rss / tss).clamp(0.0, 1.0)
}

/// Fits `y` on `design` (intercept column included).
pub fn fit_ols(y: &[f64], design: &DMatrix<f64>) -> Result<OlsFit> {
    LeastSquares::new(design)?.fit(y)
}

/// Design `[1, columns...]`.
pub fn with_intercept(columns: &[&[f64]], n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, columns.len() + 1, |i, j| if j == 0 { 1.0 } else { columns[j - 1][i] })
}

/// Two-sided p-value of a t statistic, through the regularized incomplete
/// beta function: `P(|T| > |t|) = I_{dof/(dof+t^2)}(dof/2, 1/2)`.
pub fn two_sided_p(t: f64, dof: f64) -> f64 {
    if t.is_nan() {
        return 1.0;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let x = dof / (dof + t * t);
    beta_reg(dof / 2.0, 0.5, x).clamp(0.0, 1.0)
}

/// Regression of an extra covariate on `[1, X]`, plus the partial residual
/// sums that relate the t statistics of the reduced and the extended model.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxiliaryRegression {
    /// Coefficients of `x_extra` on `[1, X1..Xk]`, intercept first.
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Residual sum of the auxiliary regression itself.
    pub s2_extra_given_x: f64,
    /// Residual sum of `X1` on `[1, X2..Xk]`.
    pub s2_x1_given_rest: f64,
    /// Residual sum of `X1` on `[1, X2..Xk, x_extra]`.
    pub s2_x1_given_rest_and_extra: f64,
}

impl AuxiliaryRegression {
    /// Coefficient of `X1` in the auxiliary regression.
    pub fn b_x1(&self) -> f64 {
        self.coefficients[1]
    }
}

fn columns_of(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..x.ncols()).map(|j| x.column(j).iter().copied().collect()).collect()
}

/// `x` holds `X1..Xk` without an intercept column.
pub fn auxiliary_fit(x: &DMatrix<f64>, x_extra: &[f64]) -> Result<AuxiliaryRegression> {
    let (n, k) = x.shape();
    if k == 0 {
        return Err(Error::Dimension("auxiliary regression needs at least X1".into()));
    }
    if x_extra.len() != n {
        return Err(Error::Dimension("x_extra length differs from X".into()));
    }
    if n <= k + 1 {
        return Err(Error::TooFewObservations { n, required: k + 1 });
    }
    let cols = columns_of(x);
    let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
    let main = LeastSquares::new(&with_intercept(&refs, n))?;
    let fit = main.fit(x_extra)?;
    let residuals = main.residuals(x_extra);

    let x1 = refs[0];
    let rest = &refs[1..];
    let s2_x1_given_rest = LeastSquares::new(&with_intercept(rest, n))?.r_squared(x1).0;
    let mut rest_extra: Vec<&[f64]> = rest.to_vec();
    rest_extra.push(x_extra);
    let s2_x1_given_rest_and_extra = LeastSquares::new(&with_intercept(&rest_extra, n))?
        .r_squared(x1)
        .0;

    Ok(AuxiliaryRegression {
        coefficients: fit.coefficients,
        s2_extra_given_x: residuals.iter().map(|e| e * e).sum(),
        residuals,
        s2_x1_given_rest,
        s2_x1_given_rest_and_extra,
    })
}

/// t statistics for `X1` in the reduced model `[1, X]` and the extended
/// model `[1, X, x_extra]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TStatRecord {
    pub t_m1: f64,
    pub t_m2: f64,
    pub p_m1: f64,
    pub p_m2: f64,
}

pub fn tstat_pair(y: &[f64], x: &DMatrix<f64>, x_extra: &[f64]) -> Result<TStatRecord> {
    let n = x.nrows();
    let cols = columns_of(x);
    let mut refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
    let m1 = fit_ols(y, &with_intercept(&refs, n))?;
    refs.push(x_extra);
    let m2 = fit_ols(y, &with_intercept(&refs, n))?;
    Ok(TStatRecord {
        t_m1: m1.t_stat(1),
        t_m2: m2.t_stat(1),
        p_m1: m1.p_value(1),
        p_m2: m2.p_value(1),
    })
}

/// Absolute residual of the identity linking the `X1` t statistic of the
/// reduced model to that of the extended model:
///
/// `t1 = (S_1.rest / S_1.rest,extra) * t2 + S_extra.X^-2 * b_extra,1 * e' y / sd(b1)`
///
/// Both sides use the extended model's residual variance for `sd(b1)`
/// (`sd(b1) = sigma2_hat / S_1.rest`). With each model's own residual
/// variance the identity only holds up to the ratio of the two variance
/// estimates.
pub fn tstat_identity_check(y: &[f64], x: &DMatrix<f64>, x_extra: &[f64]) -> Result<f64> {
    let n = x.nrows();
    let aux = auxiliary_fit(x, x_extra)?;
    if aux.s2_extra_given_x <= RANK_TOLERANCE * x_extra.iter().map(|v| v * v).sum::<f64>() {
        return Err(Error::Degenerate(
            "x_extra is collinear with X; residual sum vanishes".into(),
        ));
    }
    if aux.s2_x1_given_rest_and_extra <= 0.0 || aux.s2_x1_given_rest <= 0.0 {
        return Err(Error::Degenerate("X1 is collinear with the other columns".into()));
    }
    let cols = columns_of(x);
    let mut refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
    let m1 = fit_ols(y, &with_intercept(&refs, n))?;
    refs.push(x_extra);
    let m2 = fit_ols(y, &with_intercept(&refs, n))?;

    let sigma2 = m2.sigma2();
    let t2 = m2.t_stat(1);
    let sd_b1 = (sigma2 / aux.s2_x1_given_rest).sqrt();
    let t1 = m1.coefficients[1] / sd_b1;

    let ety: f64 = aux.residuals.iter().zip(y).map(|(e, v)| e * v).sum();
    let ratio = (aux.s2_x1_given_rest / aux.s2_x1_given_rest_and_extra).sqrt();
    let correction = aux.b_x1() * ety / aux.s2_extra_given_x / sd_b1;
    Ok((t1 - (ratio * t2 + correction)).abs())
}

/// Bias of the reduced-model `X1` coefficient when the gene depends on the
/// omitted covariate with coefficient `alpha_extra`.
pub fn omitted_variable_bias(alpha_extra: f64, aux: &AuxiliaryRegression) -> f64 {
    alpha_extra * aux.b_x1()
}
