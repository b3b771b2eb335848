//! Frequentist comparators: one fixed model per gene (unadjusted or fully
//! adjusted), the true-model oracle, and Storey q-values.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;

use rayon::prelude::*;

use crate::data::{CovariateTable, ExpressionMatrix};
use crate::error::{Error, Result};
use crate::ols::{with_intercept, LeastSquares};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaselineMethod {
    /// Target covariate only.
    Sm1,
    /// Target plus every adjustment covariate.
    Sm2,
    /// Each gene's true covariates plus the target.
    Mm,
}

impl fmt::Display for BaselineMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaselineMethod::Sm1 => "SM1",
            BaselineMethod::Sm2 => "SM2",
            BaselineMethod::Mm => "MM",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineResult {
    pub gene_id: String,
    pub method: BaselineMethod,
    pub t: f64,
    pub p_value: f64,
    pub q_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pi0Estimate {
    pub lambda: f64,
    pub pi0: f64,
}

fn design_for(covariates: &CovariateTable, names: &[&str]) -> Result<LeastSquares> {
    let cols: Vec<&[f64]> = names
        .iter()
        .map(|n| covariates.column_by_name(n))
        .collect::<Result<_>>()?;
    LeastSquares::new(&with_intercept(&cols, covariates.n_samples()))
}

fn t_and_p(design: &LeastSquares, y: &[f64]) -> Result<(f64, f64)> {
    let fit = design.fit(y)?;
    let t = fit.t_stat(1);
    if t.is_nan() {
        // zero coefficient with zero residual variance
        return Ok((0.0, 1.0));
    }
    Ok((t, fit.p_value(1)))
}

fn with_q_values(mut results: Vec<BaselineResult>, lambda: f64) -> Result<Vec<BaselineResult>> {
    let p: Vec<f64> = results.iter().map(|r| r.p_value).collect();
    let (_, q) = storey_fdr(&p, lambda)?;
    for (r, q) in results.iter_mut().zip(q) {
        r.q_value = q;
    }
    Ok(results)
}

/// Fits `y ~ target + adjust` for every gene and tests the target.
/// An empty adjustment set gives SM1, a non-empty one SM2.
pub fn single_model_scan(
    expr: &ExpressionMatrix,
    covariates: &CovariateTable,
    target: &str,
    adjust: &[&str],
) -> Result<Vec<BaselineResult>> {
    let method = if adjust.is_empty() {
        BaselineMethod::Sm1
    } else {
        BaselineMethod::Sm2
    };
    let mut names = vec![target];
    names.extend(adjust.iter().filter(|&&a| a != target));
    let design = design_for(covariates, &names)?;
    let results = (0..expr.n_genes())
        .into_par_iter()
        .map(|j| {
            let (t, p) = t_and_p(&design, expr.row(j))?;
            Ok(BaselineResult {
                gene_id: expr.gene_ids()[j].clone(),
                method,
                t,
                p_value: p,
                q_value: f64::NAN,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    with_q_values(results, 0.5)
}

/// Fits each gene with its true covariate set plus the target.
/// `truth[j]` names the covariates gene `j` truly depends on.
pub fn multi_model_scan(
    expr: &ExpressionMatrix,
    covariates: &CovariateTable,
    target: &str,
    truth: &[Vec<String>],
) -> Result<Vec<BaselineResult>> {
    if truth.len() != expr.n_genes() {
        return Err(Error::MissingTruth(format!(
            "{} truth entries for {} genes",
            truth.len(),
            expr.n_genes()
        )));
    }
    let mut designs: HashMap<Vec<String>, LeastSquares> = HashMap::new();
    for set in truth {
        if !designs.contains_key(set) {
            let mut names = vec![target];
            names.extend(set.iter().map(String::as_str).filter(|&n| n != target));
            designs.insert(set.clone(), design_for(covariates, &names)?);
        }
    }
    let results = (0..expr.n_genes())
        .into_par_iter()
        .map(|j| {
            let (t, p) = t_and_p(&designs[&truth[j]], expr.row(j))?;
            Ok(BaselineResult {
                gene_id: expr.gene_ids()[j].clone(),
                method: BaselineMethod::Mm,
                t,
                p_value: p,
                q_value: f64::NAN,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    with_q_values(results, 0.5)
}

/// Single-lambda Storey estimate of the null proportion and q-values (in
/// input order).
pub fn storey_fdr(p_values: &[f64], lambda: f64) -> Result<(Pi0Estimate, Vec<f64>)> {
    if p_values.is_empty() {
        return Err(Error::InvalidArgument("no p-values".into()));
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidArgument(format!("lambda {lambda} outside (0, 1)")));
    }
    if let Some(p) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidArgument(format!("p-value {p} outside [0, 1]")));
    }
    let j = p_values.len() as f64;
    let above = p_values.iter().filter(|&&p| p >= lambda).count() as f64;
    let pi0 = (above / ((1.0 - lambda) * j)).clamp(0.0, 1.0);

    let order = order_ascending(p_values);
    let mut q = vec![0.0; p_values.len()];
    let mut running = f64::INFINITY;
    for (rank, &i) in order.iter().enumerate().rev() {
        let v = pi0 * j * p_values[i] / (rank + 1) as f64;
        running = running.min(v);
        q[i] = running.min(1.0);
    }
    Ok((Pi0Estimate { lambda, pi0 }, q))
}

/// Indices sorted by ascending value, ties by index.
pub fn order_ascending(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    order
}

/// Indices sorted by descending value, ties by index.
pub fn order_descending(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order
}

/// Length of the longest prefix of `order` (best first) whose true FDR is at
/// most `target_fdr`.
pub fn count_discoveries_at_true_fdr(order: &[usize], truth: &[bool], target_fdr: f64) -> usize {
    let mut false_pos = 0usize;
    let mut best = 0;
    for (k, &i) in order.iter().enumerate() {
        if !truth[i] {
            false_pos += 1;
        }
        if false_pos as f64 <= target_fdr * (k + 1) as f64 {
            best = k + 1;
        }
    }
    best
}

/// Baseline CSV: `gene_id,method,t,p,q`.
pub fn write_baseline_csv<W: Write>(mut w: W, results: &[BaselineResult]) -> std::io::Result<()> {
    writeln!(w, "gene_id,method,t,p,q")?;
    for r in results {
        writeln!(w, "{},{},{},{},{}", r.gene_id, r.method, r.t, r.p_value, r.q_value)?;
    }
    Ok(())
}
