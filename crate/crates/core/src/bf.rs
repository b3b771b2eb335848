//! Zellner-Siow null-based Bayes factors for linear models.
//!
//! With `a = (n-1-rho)/2`, `b = (n-1)/2`, `c = 1-R^2` and `u = log g`, the
//! log integrand (Jacobian included) is
//!
//! `psi(u) = a log(1+e^u) - b log(1+c e^u) + log(n/2)/2 - log(pi)/2 - u/2 - (n/2) e^-u`
//!
//! and `log BF = log int psi`. Quadrature runs on `t = g/(1+g)` with
//! breakpoints placed around the mode of `psi`; the Laplace approximation
//! expands `psi` around the same mode.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{CovariateTable, ExpressionMatrix};
use crate::error::{Error, Result};
use crate::model_space::ModelSpace;
use crate::ols::LeastSquares;
use crate::quadrature::{integrate, UnitPoint};

/// Largest usable R^2; larger values are capped and flagged as saturated.
pub const R2_CAP: f64 = 1.0 - 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BfMethod {
    Quadrature,
    Laplace,
    /// Quadrature up to `laplace_above` samples, Laplace beyond.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BfConfig {
    pub method: BfMethod,
    pub rel_tolerance: f64,
    pub max_subdivisions: usize,
    pub laplace_above: usize,
}

impl Default for BfConfig {
    fn default() -> Self {
        Self {
            method: BfMethod::Auto,
            rel_tolerance: 1e-10,
            max_subdivisions: 200,
            laplace_above: 500,
        }
    }
}

impl BfConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tolerance > 0.0 && self.rel_tolerance <= 1e-4) {
            return Err(Error::InvalidArgument(format!(
                "rel_tolerance {} outside (0, 1e-4]",
                self.rel_tolerance
            )));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::InvalidArgument("max_subdivisions must be positive".into()));
        }
        Ok(())
    }

    fn uses_laplace(&self, n: usize) -> bool {
        match self.method {
            BfMethod::Quadrature => false,
            BfMethod::Laplace => true,
            BfMethod::Auto => n > self.laplace_above,
        }
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// The log integrand over `u = log g` and its derivatives.
#[derive(Debug, Clone, Copy)]
struct LogIntegrand {
    a: f64,
    b: f64,
    ln_c: f64,
    half_n: f64,
    constant: f64,
}

impl LogIntegrand {
    fn new(r2: f64, rho: usize, n: usize) -> Self {
        let nf = n as f64;
        Self {
            a: 0.5 * (nf - 1.0 - rho as f64),
            b: 0.5 * (nf - 1.0),
            ln_c: (-r2).ln_1p(),
            half_n: 0.5 * nf,
            constant: 0.5 * (0.5 * nf).ln() - 0.5 * PI.ln(),
        }
    }

    fn value(&self, u: f64) -> f64 {
        self.a * softplus(u) - self.b * softplus(u + self.ln_c) + self.constant
            - 0.5 * u
            - self.half_n * (-u).exp()
    }

    fn d1(&self, u: f64) -> f64 {
        self.a * logistic(u) - self.b * logistic(u + self.ln_c) - 0.5 + self.half_n * (-u).exp()
    }

    /// Second, third and fourth derivatives.
    fn higher(&self, u: f64) -> (f64, f64, f64) {
        let s1 = logistic(u);
        let sc = logistic(u + self.ln_c);
        let e = self.half_n * (-u).exp();
        let v1 = s1 * (1.0 - s1);
        let vc = sc * (1.0 - sc);
        let d2 = self.a * v1 - self.b * vc - e;
        let d3 = self.a * v1 * (1.0 - 2.0 * s1) - self.b * vc * (1.0 - 2.0 * sc) + e;
        let d4 = self.a * v1 * (1.0 - 6.0 * s1 + 6.0 * s1 * s1)
            - self.b * vc * (1.0 - 6.0 * sc + 6.0 * sc * sc)
            - e;
        (d2, d3, d4)
    }

    /// Root of the first derivative by bisection. The derivative is positive
    /// as `u -> -inf` and tends to `-(rho+1)/2` as `u -> +inf`.
    fn mode(&self) -> f64 {
        let mut lo = -1.0;
        while self.d1(lo) <= 0.0 && lo > -700.0 {
            lo -= 2.0;
        }
        let mut hi = 1.0;
        while self.d1(hi) >= 0.0 && hi < 700.0 {
            hi += 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.d1(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-12 * mid.abs().max(1.0) {
                break;
            }
        }
        0.5 * (lo + hi)
    }
}

fn check_args(r2: f64, rho: usize, n: usize) -> Result<()> {
    if !(0.0..=1.0).contains(&r2) {
        return Err(Error::InvalidArgument(format!("R^2 = {r2} outside [0, 1]")));
    }
    if r2 >= R2_CAP {
        return Err(Error::Degenerate(format!(
            "R^2 = {r2} is numerically saturated; cap it below {R2_CAP}"
        )));
    }
    if n < rho + 3 {
        return Err(Error::TooFewObservations { n, required: rho + 2 });
    }
    Ok(())
}

/// log BF of a model with `rho` covariates against the intercept-only model
/// by adaptive quadrature.
pub fn zellner_siow_log_bf(r2: f64, rho: usize, n: usize, cfg: &BfConfig) -> Result<f64> {
    check_args(r2, rho, n)?;
    if rho == 0 {
        return Ok(0.0);
    }
    Ok(quadrature_log_bf(&LogIntegrand::new(r2, rho, n), cfg))
}

fn quadrature_log_bf(psi: &LogIntegrand, cfg: &BfConfig) -> f64 {
    let mode = psi.mode();
    let (d2, _, _) = psi.higher(mode);
    let sd = if d2 < 0.0 { (-d2).sqrt().recip() } else { 1.0 };

    let mut us: Vec<f64> = [-16.0, -8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0, 16.0]
        .iter()
        .map(|k| mode + k * sd)
        .chain([-8.0, 0.0, 8.0, 16.0, 32.0])
        .collect();
    us.sort_by(f64::total_cmp);
    us.dedup_by(|x, y| (*x - *y).abs() < 1e-9);

    let mut points = vec![UnitPoint { t: 0.0, complement: 1.0 }];
    points.extend(us.iter().map(|&u| UnitPoint::from_logit(u)));
    points.push(UnitPoint { t: 1.0, complement: 0.0 });

    let peak = UnitPoint::from_logit(mode);
    let shift = psi.value(mode) - peak.t.ln() - peak.complement.ln();
    let integrand = |t: f64, s: f64| {
        if t <= 0.0 || s <= 0.0 {
            return 0.0;
        }
        let (lt, ls) = (t.ln(), s.ln());
        (psi.value(lt - ls) - lt - ls - shift).exp()
    };
    let r = integrate(integrand, &points, cfg.rel_tolerance, 0.0, cfg.max_subdivisions);
    shift + r.value.ln()
}

/// log BF by a Laplace expansion in `u = log g`, with the next-order
/// correction `1 + psi''''/(8h^2) + 5 psi'''^2/(24h^3)`, `h = -psi''`.
pub fn laplace_log_bf(r2: f64, rho: usize, n: usize) -> Result<f64> {
    check_args(r2, rho, n)?;
    if rho == 0 {
        return Ok(0.0);
    }
    let psi = LogIntegrand::new(r2, rho, n);
    let mode = psi.mode();
    let (d2, d3, d4) = psi.higher(mode);
    let h = -d2;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Degenerate(format!(
            "no interior mode for the Laplace approximation (R^2 = {r2}, rho = {rho}, n = {n})"
        )));
    }
    let mut out = psi.value(mode) + 0.5 * (2.0 * PI).ln() - 0.5 * h.ln();
    let corr = 1.0 + d4 / (8.0 * h * h) + 5.0 * d3 * d3 / (24.0 * h * h * h);
    if corr > 0.0 && corr.is_finite() {
        out += corr.ln();
    }
    Ok(out)
}

/// Which approximation produced a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodUsed {
    Quadrature,
    Laplace,
    /// Laplace requested but no usable mode; quadrature used instead.
    LaplaceFallback,
}

/// log BF under the configured method, capping saturated `R^2`.
/// Returns the value, whether `R^2` was capped, and the method used.
pub fn log_bf(r2: f64, rho: usize, n: usize, cfg: &BfConfig) -> Result<(f64, bool, MethodUsed)> {
    let saturated = r2 >= R2_CAP;
    let r2 = if saturated { R2_CAP - f64::EPSILON } else { r2 };
    if cfg.uses_laplace(n) {
        match laplace_log_bf(r2, rho, n) {
            Ok(v) => return Ok((v, saturated, MethodUsed::Laplace)),
            Err(Error::Degenerate(_)) => {
                let v = zellner_siow_log_bf(r2, rho, n, cfg)?;
                return Ok((v, saturated, MethodUsed::LaplaceFallback));
            }
            Err(e) => return Err(e),
        }
    }
    Ok((zellner_siow_log_bf(r2, rho, n, cfg)?, saturated, MethodUsed::Quadrature))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneScore {
    pub gene_id: String,
    /// log BF against the null, one per model; `-inf` for unfittable models.
    pub log_bf: Vec<f64>,
    pub r_squared: Vec<f64>,
    pub rho: Vec<usize>,
    pub saturated: Vec<bool>,
    pub laplace_fallbacks: usize,
}

/// A model space with its designs factorised once for all genes.
#[derive(Debug, Clone)]
pub struct FittedSpace {
    space: ModelSpace,
    designs: Vec<Option<LeastSquares>>,
    n: usize,
}

impl FittedSpace {
    /// Builds every model design from the named covariate columns. Models
    /// that are rank deficient or leave fewer than two residual degrees of
    /// freedom are marked unfittable.
    pub fn new(space: ModelSpace, covariates: &CovariateTable) -> Result<Self> {
        let columns: Vec<&[f64]> = space
            .covariate_names()
            .iter()
            .map(|name| covariates.column_by_name(name))
            .collect::<Result<_>>()?;
        let n = covariates.n_samples();
        let designs: Vec<Option<LeastSquares>> = (0..space.len())
            .map(|m| {
                if n < space.rho(m) + 3 {
                    return Ok(None);
                }
                let design = space.design(m, &columns)?;
                Ok(Self::factorise(&design))
            })
            .collect::<Result<_>>()?;
        if designs[space.null_index()].is_none() {
            return Err(Error::NoFittableModel(format!("null model with n = {n}")));
        }
        Ok(Self { space, designs, n })
    }

    fn factorise(design: &DMatrix<f64>) -> Option<LeastSquares> {
        LeastSquares::new(design).ok()
    }

    pub fn space(&self) -> &ModelSpace {
        &self.space
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_fittable(&self, m: usize) -> bool {
        self.designs[m].is_some()
    }

    pub fn design(&self, m: usize) -> Option<&LeastSquares> {
        self.designs[m].as_ref()
    }

    pub fn unfittable(&self) -> Vec<usize> {
        (0..self.designs.len()).filter(|&m| self.designs[m].is_none()).collect()
    }
}

/// Fits every model of the space to one gene and computes its log BFs.
pub fn score_gene(gene_id: &str, y: &[f64], fitted: &FittedSpace, cfg: &BfConfig) -> Result<GeneScore> {
    if y.len() != fitted.n {
        return Err(Error::Dimension(format!(
            "gene '{gene_id}' has {} values for {} samples",
            y.len(),
            fitted.n
        )));
    }
    let len = fitted.space.len();
    let mut score = GeneScore {
        gene_id: gene_id.to_string(),
        log_bf: vec![f64::NEG_INFINITY; len],
        r_squared: vec![f64::NAN; len],
        rho: (0..len).map(|m| fitted.space.rho(m)).collect(),
        saturated: vec![false; len],
        laplace_fallbacks: 0,
    };
    for (m, design) in fitted.designs.iter().enumerate() {
        let Some(design) = design else { continue };
        let (_, r2) = design.r_squared(y);
        score.r_squared[m] = r2;
        if score.rho[m] == 0 {
            score.log_bf[m] = 0.0;
            continue;
        }
        let (v, sat, used) = log_bf(r2, score.rho[m], fitted.n, cfg)?;
        score.log_bf[m] = v;
        score.saturated[m] = sat;
        if used == MethodUsed::LaplaceFallback {
            score.laplace_fallbacks += 1;
        }
    }
    Ok(score)
}

/// Scores all genes in parallel; output order follows the matrix rows.
pub fn score_genes(expr: &ExpressionMatrix, fitted: &FittedSpace, cfg: &BfConfig) -> Result<Vec<GeneScore>> {
    cfg.validate()?;
    (0..expr.n_genes())
        .into_par_iter()
        .map(|j| score_gene(&expr.gene_ids()[j], expr.row(j), fitted, cfg))
        .collect()
}

/// CSV dump: `gene_id,model,log_bf,r_squared`.
pub fn write_scores_csv<W: Write>(mut w: W, scores: &[GeneScore]) -> std::io::Result<()> {
    writeln!(w, "gene_id,model,log_bf,r_squared")?;
    for s in scores {
        for m in 0..s.log_bf.len() {
            writeln!(w, "{},{},{},{}", s.gene_id, m, s.log_bf[m], s.r_squared[m])?;
        }
    }
    Ok(())
}
