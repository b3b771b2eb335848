//! In-memory analysis and method comparison, shared by the subcommands and
//! the acceptance suite.

use std::fmt;
use std::str::FromStr;

use anyhow::{anyhow, bail, ensure, Context, Result};
use genebma::baselines::{multi_model_scan, order_ascending, single_model_scan, BaselineResult};
use genebma::bf::{score_genes, BfConfig, FittedSpace, GeneScore};
use genebma::data::Dataset;
use genebma::evaluation::{calibration_curve, evaluate_method, CalibrationPoint, MethodEvaluation};
use genebma::model_space::{Interaction, ModelIndex, ModelSpace};
use genebma::posterior::{rank_genes, summarize, JointQuery, PosteriorSummary, Ranking};
use genebma::prior::{empirical_prior, estimate_omega, prior_from_weights, uniform_prior, PriorCalibration};
use genebma::simulator::TruthTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Sm1,
    Sm2,
    Mm,
    BmaEmpirical,
    BmaUniform,
    BmaOracle,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Sm1,
        Method::Sm2,
        Method::Mm,
        Method::BmaEmpirical,
        Method::BmaUniform,
        Method::BmaOracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Sm1 => "sm1",
            Method::Sm2 => "sm2",
            Method::Mm => "mm",
            Method::BmaEmpirical => "bma-empirical",
            Method::BmaUniform => "bma-uniform",
            Method::BmaOracle => "bma-oracle",
        }
    }

    /// Short label used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            Method::Sm1 => "SM1",
            Method::Sm2 => "SM2",
            Method::Mm => "MM",
            Method::BmaEmpirical => "BMA1",
            Method::BmaUniform => "BMA2",
            Method::BmaOracle => "BMA3",
        }
    }

    pub fn is_bayesian(self) -> bool {
        matches!(self, Method::BmaEmpirical | Method::BmaUniform | Method::BmaOracle)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
                format!("unknown method '{s}' (expected one of {})", names.join(", "))
            })
    }
}

/// Which prior the analysis uses.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorChoice {
    Empirical { c: f64 },
    Uniform,
    Fixed(Vec<f64>),
}

/// Model space over the given covariate columns, with optional `a:b`
/// interaction columns that may only enter with both parents. Product
/// columns are appended to the dataset's covariates when missing.
pub fn subset_space(data: &mut Dataset, covariates: &[String], interactions: &[(String, String)]) -> Result<ModelSpace> {
    let mut names = covariates.to_vec();
    let mut hierarchy = Vec::new();
    for (a, b) in interactions {
        let pa = names
            .iter()
            .position(|n| n == a)
            .ok_or_else(|| anyhow!("interaction parent '{a}' is not among the covariates"))?;
        let pb = names
            .iter()
            .position(|n| n == b)
            .ok_or_else(|| anyhow!("interaction parent '{b}' is not among the covariates"))?;
        data.covariates = data.covariates.with_product(a, b)?;
        names.push(format!("{a}:{b}"));
        hierarchy.push(Interaction {
            column: names.len() - 1,
            parents: (pa, pb),
        });
    }
    for n in &names {
        data.covariates.index_of(n)?;
    }
    Ok(ModelSpace::subsets(names, &hierarchy)?)
}

/// The 16-model cell-pattern space for two binary factors; the factor
/// columns are recoded to 0/1.
pub fn pattern_space(data: &mut Dataset, a: &str, b: &str) -> Result<ModelSpace> {
    for f in [a, b] {
        let k = data.covariates.index_of(f)?;
        ensure!(
            data.covariates.is_binary(k),
            "pattern factor '{f}' must have exactly two levels"
        );
    }
    data.covariates = genebma::data::standardize_factors(&data.covariates, &[a, b])?;
    Ok(ModelSpace::two_factor(a, b))
}

/// Everything the Bayesian path produces for one dataset.
#[derive(Debug, Clone)]
pub struct BmaRun {
    pub ids: Vec<String>,
    pub space: ModelSpace,
    pub scores: Vec<GeneScore>,
    pub calibration: PriorCalibration,
    pub summaries: Vec<PosteriorSummary>,
    pub terms: Vec<String>,
    pub joints: Vec<JointQuery>,
}

impl BmaRun {
    pub fn term_scores(&self, term: usize) -> Vec<f64> {
        self.summaries.iter().map(|s| s.inclusion[term]).collect()
    }

    pub fn joint_scores(&self, q: usize) -> Vec<f64> {
        self.summaries.iter().map(|s| s.joint_inclusion[q]).collect()
    }

    pub fn rank_term(&self, term: usize, target: Option<f64>) -> Result<Ranking> {
        Ok(rank_genes(&self.ids, &self.term_scores(term), target)?)
    }

    pub fn rank_joint(&self, q: usize, target: Option<f64>) -> Result<Ranking> {
        Ok(rank_genes(&self.ids, &self.joint_scores(q), target)?)
    }
}

/// Scores genes and returns the log BFs; priors are applied separately.
pub fn score(data: &Dataset, space: &ModelSpace, bf: &BfConfig) -> Result<Vec<GeneScore>> {
    let fitted = FittedSpace::new(space.clone(), &data.covariates)?;
    Ok(score_genes(&data.expression, &fitted, bf)?)
}

/// Applies a prior to existing scores.
pub fn apply_prior(
    space: &ModelSpace,
    scores: Vec<GeneScore>,
    prior: &PriorChoice,
    joint_specs: &[String],
) -> Result<BmaRun> {
    let inv = space.involvement();
    let calibration = match prior {
        PriorChoice::Empirical { c } => empirical_prior(&scores, *c)?,
        PriorChoice::Uniform => fixed_calibration(&scores, uniform_prior(space.len()))?,
        PriorChoice::Fixed(p) => {
            ensure!(p.len() == space.len(), "prior has {} entries, model space {}", p.len(), space.len());
            fixed_calibration(&scores, p.clone())?
        }
    };
    let joints = joint_specs
        .iter()
        .map(|s| JointQuery::parse(s, &inv))
        .collect::<genebma::Result<Vec<_>>>()?;
    let summaries = summarize(&scores, &calibration.prior, &inv, &joints)?;
    Ok(BmaRun {
        ids: scores.iter().map(|s| s.gene_id.clone()).collect(),
        space: space.clone(),
        scores,
        calibration,
        summaries,
        terms: inv.terms,
        joints,
    })
}

fn fixed_calibration(scores: &[GeneScore], prior: Vec<f64>) -> Result<PriorCalibration> {
    let omega = estimate_omega(scores, 1.0)?;
    Ok(PriorCalibration {
        omega,
        history: vec![prior.clone()],
        prior,
        c: 1.0,
        iterations_run: 0,
        max_change_final: 0.0,
        degenerate: false,
    })
}

/// Prior equal to the share of genes whose true model is each subset model
/// over `covariates`.
pub fn oracle_prior(space: &ModelSpace, truth: &TruthTable, covariates: &[String]) -> Result<Vec<f64>> {
    let sim = genebma::simulator::COVARIATES;
    let mut weights = vec![0.0; space.len()];
    for bits in truth.true_model_bits() {
        let mut local = 0u32;
        for (k, name) in sim.iter().enumerate() {
            if bits & (1 << k) != 0 {
                let pos = covariates
                    .iter()
                    .position(|c| c == name)
                    .ok_or_else(|| anyhow!("true covariate '{name}' missing from the model space"))?;
                local |= 1 << pos;
            }
        }
        let m = space
            .models()
            .iter()
            .position(|m| *m == ModelIndex::Subset(local))
            .ok_or_else(|| anyhow!("true model outside the model space"))?;
        weights[m] += 1.0;
    }
    Ok(prior_from_weights(&weights)?)
}

#[derive(Debug, Clone)]
pub struct CompareSettings {
    pub target: String,
    pub covariates: Vec<String>,
    pub methods: Vec<Method>,
    pub pcut: f64,
    pub fdr: f64,
    pub c: f64,
    pub bf: BfConfig,
}

impl Default for CompareSettings {
    fn default() -> Self {
        Self {
            target: "s".into(),
            covariates: vec!["s".into(), "g".into(), "d".into()],
            methods: Method::ALL.to_vec(),
            pcut: 0.001,
            fdr: 0.05,
            c: 1.0,
            bf: BfConfig::default(),
        }
    }
}

/// One method on one replicate.
#[derive(Debug, Clone)]
pub struct MethodOutcome {
    pub method: Method,
    /// Genes best first.
    pub order: Vec<usize>,
    /// Estimated FDR of each prefix of `order` (q-value or peFDR).
    pub estimated_fdr: Vec<f64>,
    pub evaluation: MethodEvaluation,
    pub calibration: Vec<CalibrationPoint>,
}

fn p_method_outcome(
    method: Method,
    results: &[BaselineResult],
    truth: &[bool],
    g0d0: &[bool],
    s: &CompareSettings,
) -> Result<MethodOutcome> {
    let p: Vec<f64> = results.iter().map(|r| r.p_value).collect();
    let order = order_ascending(&p);
    let selected: Vec<bool> = p.iter().map(|&v| v <= s.pcut).collect();
    let estimated: Vec<f64> = order.iter().map(|&i| results[i].q_value).collect();
    Ok(MethodOutcome {
        method,
        evaluation: evaluate_method(method.label(), &order, &selected, truth, g0d0, s.fdr)?,
        calibration: calibration_curve(&order, &estimated, truth)?,
        order,
        estimated_fdr: estimated,
    })
}

fn bma_outcome(
    method: Method,
    run: &BmaRun,
    term: usize,
    truth: &[bool],
    g0d0: &[bool],
    s: &CompareSettings,
) -> Result<MethodOutcome> {
    let ranking = run.rank_term(term, Some(s.fdr))?;
    let order: Vec<usize> = ranking.entries.iter().map(|e| e.index).collect();
    let estimated: Vec<f64> = ranking.entries.iter().map(|e| e.pe_fdr_at_gene).collect();
    // fixed-cut selection for Bayesian methods: the list cut at peFDR <= fdr
    let mut selected = vec![false; order.len()];
    for &i in order.iter().take(ranking.cut.unwrap_or(0)) {
        selected[i] = true;
    }
    Ok(MethodOutcome {
        method,
        evaluation: evaluate_method(method.label(), &order, &selected, truth, g0d0, s.fdr)?,
        calibration: calibration_curve(&order, &estimated, truth)?,
        order,
        estimated_fdr: estimated,
    })
}

/// Runs every requested method on one simulated replicate.
pub fn compare_replicate(data: &Dataset, truth: &TruthTable, s: &CompareSettings) -> Result<Vec<MethodOutcome>> {
    let target_k = genebma::simulator::COVARIATES
        .iter()
        .position(|c| *c == s.target)
        .ok_or_else(|| anyhow!("target '{}' is not a simulated covariate", s.target))?;
    ensure!(
        s.covariates.contains(&s.target),
        "target '{}' missing from the covariate list",
        s.target
    );
    ensure!(truth.len() == data.n_genes(), "truth covers {} genes, data {}", truth.len(), data.n_genes());
    let de = truth.de_flags(target_k);
    let g0d0: Vec<bool> = (0..truth.len()).map(|j| truth.g0d0(j)).collect();
    let adjust: Vec<&str> = s
        .covariates
        .iter()
        .map(String::as_str)
        .filter(|c| *c != s.target)
        .collect();

    let mut data = data.clone();
    let bma_scores = if s.methods.iter().any(|m| m.is_bayesian()) {
        let space = subset_space(&mut data, &s.covariates, &[])?;
        let scores = score(&data, &space, &s.bf)?;
        Some((space, scores))
    } else {
        None
    };

    let mut out = Vec::new();
    for &m in &s.methods {
        let outcome = match m {
            Method::Sm1 => {
                let r = single_model_scan(&data.expression, &data.covariates, &s.target, &[])?;
                p_method_outcome(m, &r, &de, &g0d0, s)?
            }
            Method::Sm2 => {
                let r = single_model_scan(&data.expression, &data.covariates, &s.target, &adjust)?;
                p_method_outcome(m, &r, &de, &g0d0, s)?
            }
            Method::Mm => {
                let sets: Vec<Vec<String>> = truth
                    .true_sets()
                    .into_iter()
                    .map(|set| set.into_iter().filter(|c| s.covariates.contains(c)).collect())
                    .collect();
                let r = multi_model_scan(&data.expression, &data.covariates, &s.target, &sets)?;
                p_method_outcome(m, &r, &de, &g0d0, s)?
            }
            Method::BmaEmpirical | Method::BmaUniform | Method::BmaOracle => {
                let (space, scores) = bma_scores.as_ref().expect("scored above");
                let prior = match m {
                    Method::BmaEmpirical => PriorChoice::Empirical { c: s.c },
                    Method::BmaUniform => PriorChoice::Uniform,
                    _ => PriorChoice::Fixed(oracle_prior(space, truth, &s.covariates)?),
                };
                let run = apply_prior(space, scores.clone(), &prior, &[])?;
                let term = run
                    .terms
                    .iter()
                    .position(|t| *t == s.target)
                    .context("target term missing")?;
                bma_outcome(m, &run, term, &de, &g0d0, s)?
            }
        };
        out.push(outcome);
    }
    Ok(out)
}

/// Parses a comma-separated method list.
pub fn parse_methods(list: &str) -> Result<Vec<Method>> {
    let methods = list
        .split(',')
        .map(|m| m.trim().parse::<Method>().map_err(|e| anyhow!(e)))
        .collect::<Result<Vec<_>>>()?;
    if methods.is_empty() {
        bail!("no methods given");
    }
    Ok(methods)
}
