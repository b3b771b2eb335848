//! Empirical prior over models.
//!
//! `omega[m]` is the share of genes whose largest Bayes factor is attained at
//! model `m` and exceeds the cutoff `c`. The prior is then iterated so that
//! the average posterior probability of each model matches `omega`:
//!
//! `p_new[m] ∝ N[m] / sum_j BF[j][m] / sum_m' BF[j][m'] p_old[m']`
//!
//! where `N[m]` counts the genes won by `m` and the null model takes the
//! genes that clear no cutoff.

use std::io::{BufRead, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::bf::GeneScore;
use crate::error::{Error, Result};

pub const PRIOR_FLOOR: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 30;
pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct PriorCalibration {
    pub omega: Vec<f64>,
    pub prior: Vec<f64>,
    pub c: f64,
    pub iterations_run: usize,
    pub max_change_final: f64,
    /// No gene cleared the cutoff; the prior puts all mass on the null.
    pub degenerate: bool,
    /// Prior after each iteration, starting with the initial vector.
    pub history: Vec<Vec<f64>>,
}

fn check_scores(scores: &[GeneScore]) -> Result<usize> {
    let first = scores
        .first()
        .ok_or_else(|| Error::InvalidArgument("no gene scores".into()))?;
    let m = first.log_bf.len();
    if let Some(bad) = scores.iter().find(|s| s.log_bf.len() != m) {
        return Err(Error::Dimension(format!(
            "gene '{}' scored over {} models, expected {m}",
            bad.gene_id,
            bad.log_bf.len()
        )));
    }
    Ok(m)
}

fn check_cutoff(c: f64) -> Result<()> {
    if c.is_nan() || c < 1.0 {
        return Err(Error::InvalidArgument(format!("cutoff c = {c} must be at least 1")));
    }
    Ok(())
}

/// Model winning gene `s` (largest BF, earliest model on ties) if its BF
/// strictly exceeds `c`.
pub fn best_model(s: &GeneScore, c: f64) -> Option<usize> {
    let mut best = 0;
    for (m, &v) in s.log_bf.iter().enumerate() {
        if v > s.log_bf[best] {
            best = m;
        }
    }
    (s.log_bf[best] > c.ln()).then_some(best)
}

/// Per-model winning counts under cutoff `c`.
pub fn winning_counts(scores: &[GeneScore], c: f64) -> Result<Vec<usize>> {
    let m = check_scores(scores)?;
    check_cutoff(c)?;
    let mut counts = vec![0; m];
    for s in scores {
        if let Some(b) = best_model(s, c) {
            counts[b] += 1;
        }
    }
    Ok(counts)
}

/// Share of genes won by each model.
pub fn estimate_omega(scores: &[GeneScore], c: f64) -> Result<Vec<f64>> {
    let j = scores.len() as f64;
    Ok(winning_counts(scores, c)?
        .into_iter()
        .map(|n| n as f64 / j)
        .collect())
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `sum_j BF[j][m] / sum_m' BF[j][m'] p[m']`, i.e. the per-model sum of
/// posterior probabilities divided by the prior. Per-gene terms are computed
/// in parallel and summed in gene order.
fn denominators(scores: &[GeneScore], prior: &[f64]) -> Vec<f64> {
    let log_prior: Vec<f64> = prior.iter().map(|p| p.ln()).collect();
    let per_gene: Vec<Vec<f64>> = scores
        .par_iter()
        .map(|s| {
            let lse = log_sum_exp(s.log_bf.iter().zip(&log_prior).map(|(b, p)| b + p));
            s.log_bf.iter().map(|b| (b - lse).exp()).collect()
        })
        .collect();
    let mut out = vec![0.0; prior.len()];
    for row in &per_gene {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    out
}

fn floor_and_normalize(p: &mut [f64]) {
    for v in p.iter_mut() {
        if !(v.is_finite() && *v >= PRIOR_FLOOR) {
            *v = PRIOR_FLOOR;
        }
    }
    let total: f64 = p.iter().sum();
    for v in p.iter_mut() {
        *v /= total;
    }
}

/// Numerators of the update: `omega` for non-null models, the remainder for
/// the null.
fn numerators(omega: &[f64], null: usize) -> Vec<f64> {
    let mut num = omega.to_vec();
    num[null] = 0.0;
    num[null] = (1.0 - num.iter().sum::<f64>()).max(0.0);
    num
}

/// Runs the prior recursion from `p0 = omega` (null gets `1 - sum omega`).
pub fn iterate_prior(
    scores: &[GeneScore],
    omega: &[f64],
    c: f64,
    max_iter: usize,
    tol: f64,
) -> Result<PriorCalibration> {
    let init = numerators(omega, 0);
    iterate_prior_from(scores, omega, c, &init, max_iter, tol)
}

/// Runs the prior recursion from an explicit starting vector.
pub fn iterate_prior_from(
    scores: &[GeneScore],
    omega: &[f64],
    c: f64,
    init: &[f64],
    max_iter: usize,
    tol: f64,
) -> Result<PriorCalibration> {
    let m = check_scores(scores)?;
    check_cutoff(c)?;
    if omega.len() != m || init.len() != m {
        return Err(Error::Dimension(format!(
            "omega/initial prior over {}/{} models, scores over {m}",
            omega.len(),
            init.len()
        )));
    }
    let num = numerators(omega, 0);
    if num[1..].iter().all(|&v| v == 0.0) {
        let mut prior = vec![0.0; m];
        prior[0] = 1.0;
        return Ok(PriorCalibration {
            omega: omega.to_vec(),
            history: vec![prior.clone()],
            prior,
            c,
            iterations_run: 0,
            max_change_final: 0.0,
            degenerate: true,
        });
    }

    let mut prior = init.to_vec();
    floor_and_normalize(&mut prior);
    let mut history = vec![prior.clone()];
    let mut iterations_run = 0;
    let mut max_change = f64::INFINITY;
    while iterations_run < max_iter {
        let den = denominators(scores, &prior);
        let mut next: Vec<f64> = num
            .iter()
            .zip(&den)
            .map(|(&a, &d)| if a > 0.0 && d > 0.0 { a / d } else { 0.0 })
            .collect();
        floor_and_normalize(&mut next);
        max_change = next
            .iter()
            .zip(&prior)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        prior = next;
        history.push(prior.clone());
        iterations_run += 1;
        if max_change < tol {
            break;
        }
    }
    Ok(PriorCalibration {
        omega: omega.to_vec(),
        prior,
        c,
        iterations_run,
        max_change_final: max_change,
        degenerate: false,
        history,
    })
}

/// `estimate_omega` followed by `iterate_prior` with default settings.
pub fn empirical_prior(scores: &[GeneScore], c: f64) -> Result<PriorCalibration> {
    let omega = estimate_omega(scores, c)?;
    iterate_prior(scores, &omega, c, DEFAULT_MAX_ITER, DEFAULT_TOL)
}

pub fn uniform_prior(n_models: usize) -> Vec<f64> {
    vec![1.0 / n_models as f64; n_models]
}

/// Normalised prior from non-negative weights (e.g. true model counts),
/// floored like the empirical prior.
pub fn prior_from_weights(weights: &[f64]) -> Result<Vec<f64>> {
    if weights.is_empty() || weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidArgument("prior weights must be finite and non-negative".into()));
    }
    if weights.iter().sum::<f64>() <= 0.0 {
        return Err(Error::InvalidArgument("prior weights sum to zero".into()));
    }
    let total: f64 = weights.iter().sum();
    let mut p: Vec<f64> = weights.iter().map(|w| w / total).collect();
    floor_and_normalize(&mut p);
    Ok(p)
}

/// Reads a fixed prior: lines `model,prior` (model index), `#` comments and
/// an optional header allowed.
pub fn read_prior_file(path: impl AsRef<Path>, n_models: usize) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path.display().to_string();
    let mut weights = vec![f64::NAN; n_models];
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("model") {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            file: name.clone(),
            line: i + 1,
            message,
        };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 2 {
            return Err(parse_err("expected 'model,prior'".into()));
        }
        let m: usize = fields[0]
            .parse()
            .map_err(|_| parse_err(format!("bad model index '{}'", fields[0])))?;
        let v: f64 = fields[fields.len() - 1]
            .parse()
            .map_err(|_| parse_err(format!("bad prior value '{}'", fields[fields.len() - 1])))?;
        if m >= n_models {
            return Err(parse_err(format!("model index {m} outside space of {n_models}")));
        }
        weights[m] = v;
    }
    if let Some(m) = weights.iter().position(|w| w.is_nan()) {
        return Err(Error::InvalidArgument(format!("prior file {name} lacks model {m}")));
    }
    prior_from_weights(&weights)
}

/// Prior report: comment lines with `c`, iterations and final change, then
/// `model,label,omega,prior`.
pub fn write_prior_report<W: Write>(
    mut w: W,
    cal: &PriorCalibration,
    labels: &[String],
) -> std::io::Result<()> {
    writeln!(w, "# c={}", cal.c)?;
    writeln!(w, "# iterations={}", cal.iterations_run)?;
    writeln!(w, "# max_change={}", cal.max_change_final)?;
    writeln!(w, "# degenerate={}", cal.degenerate)?;
    writeln!(w, "model,label,omega,prior")?;
    for m in 0..cal.prior.len() {
        writeln!(w, "{m},{},{},{}", labels[m], cal.omega[m], cal.prior[m])?;
    }
    Ok(())
}
