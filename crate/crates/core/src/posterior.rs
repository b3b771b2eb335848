//! Posterior model probabilities, inclusion probabilities, peFDR and gene
//! rankings.

use std::io::Write;

use rayon::prelude::*;

use crate::bf::GeneScore;
use crate::error::{Error, Result};
use crate::model_space::CovariateInvolvement;

/// Normalises `log prior + log BF` with log-sum-exp.
pub fn posterior_model_probs(log_bf: &[f64], prior: &[f64]) -> Result<Vec<f64>> {
    if log_bf.len() != prior.len() {
        return Err(Error::Dimension(format!(
            "{} Bayes factors for a prior over {} models",
            log_bf.len(),
            prior.len()
        )));
    }
    let logits: Vec<f64> = log_bf.iter().zip(prior).map(|(b, p)| b + p.ln()).collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return Err(Error::NoFittableModel("all models have zero posterior weight".into()));
    }
    let mut post: Vec<f64> = logits.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = post.iter().sum();
    for p in &mut post {
        *p /= total;
    }
    Ok(post)
}

/// Sum of posteriors over the models involving `term`.
pub fn inclusion_probability(post: &[f64], inv: &CovariateInvolvement, term: usize) -> f64 {
    post.iter()
        .enumerate()
        .filter(|&(m, _)| inv.involves(m, term))
        .map(|(_, p)| p)
        .sum::<f64>()
        .clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JointMode {
    /// Models involving every term of the set.
    All,
    /// Models involving at least one term of the set.
    Any,
}

pub fn joint_inclusion_probability(
    post: &[f64],
    inv: &CovariateInvolvement,
    terms: &[usize],
    mode: JointMode,
) -> Result<f64> {
    if terms.is_empty() {
        return Err(Error::InvalidArgument("empty covariate set".into()));
    }
    if let Some(&t) = terms.iter().find(|&&t| t >= inv.terms.len()) {
        return Err(Error::UnknownCovariate(format!("term #{t}")));
    }
    let hit = |m: usize| match mode {
        JointMode::All => terms.iter().all(|&t| inv.involves(m, t)),
        JointMode::Any => terms.iter().any(|&t| inv.involves(m, t)),
    };
    Ok(post
        .iter()
        .enumerate()
        .filter(|&(m, _)| hit(m))
        .map(|(_, p)| p)
        .sum::<f64>()
        .clamp(0.0, 1.0))
}

/// A requested joint set, e.g. `s&g` (all) or `s|s:g` (any).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointQuery {
    pub name: String,
    pub terms: Vec<usize>,
    pub mode: JointMode,
}

impl JointQuery {
    /// Parses `a&b&c` (all) or `a|b` (any) against the involvement terms.
    pub fn parse(spec: &str, inv: &CovariateInvolvement) -> Result<Self> {
        let (mode, sep) = if spec.contains('|') {
            if spec.contains('&') {
                return Err(Error::InvalidArgument(format!(
                    "joint set '{spec}' mixes '&' and '|'"
                )));
            }
            (JointMode::Any, '|')
        } else {
            (JointMode::All, '&')
        };
        let terms = spec
            .split(sep)
            .map(|t| inv.term_index(t.trim()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            name: spec.to_string(),
            terms,
            mode,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    pub gene_id: String,
    pub model_posteriors: Vec<f64>,
    /// One entry per involvement term.
    pub inclusion: Vec<f64>,
    /// One entry per joint query, in request order.
    pub joint_inclusion: Vec<f64>,
}

pub fn summarize_gene(
    score: &GeneScore,
    prior: &[f64],
    inv: &CovariateInvolvement,
    joints: &[JointQuery],
) -> Result<PosteriorSummary> {
    let post = posterior_model_probs(&score.log_bf, prior)
        .map_err(|_| Error::NoFittableModel(score.gene_id.clone()))?;
    let inclusion = (0..inv.terms.len())
        .map(|t| inclusion_probability(&post, inv, t))
        .collect();
    let joint_inclusion = joints
        .iter()
        .map(|q| joint_inclusion_probability(&post, inv, &q.terms, q.mode))
        .collect::<Result<_>>()?;
    Ok(PosteriorSummary {
        gene_id: score.gene_id.clone(),
        model_posteriors: post,
        inclusion,
        joint_inclusion,
    })
}

/// Posterior summaries for all genes, in input order.
pub fn summarize(
    scores: &[GeneScore],
    prior: &[f64],
    inv: &CovariateInvolvement,
    joints: &[JointQuery],
) -> Result<Vec<PosteriorSummary>> {
    scores
        .par_iter()
        .map(|s| summarize_gene(s, prior, inv, joints))
        .collect()
}

/// Which genes enter a peFDR list at threshold `p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelectionRule {
    /// `P >= p`: high-probability genes are declared.
    #[default]
    AtLeast,
    /// `P <= p`, the indicator as literally printed in the original formula.
    AtMost,
}

/// Mean of `1 - P` over the genes selected at threshold `p`.
pub fn pe_fdr(scores: &[f64], p: f64) -> Result<f64> {
    pe_fdr_with(scores, p, SelectionRule::AtLeast)
}

pub fn pe_fdr_with(scores: &[f64], p: f64, rule: SelectionRule) -> Result<f64> {
    let selected = scores.iter().filter(|&&s| match rule {
        SelectionRule::AtLeast => s >= p,
        SelectionRule::AtMost => s <= p,
    });
    let (sum, count) = selected.fold((0.0, 0usize), |(a, n), s| (a + (1.0 - s), n + 1));
    if count == 0 {
        return Err(Error::EmptySelection);
    }
    Ok(sum / count as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingEntry {
    pub gene_id: String,
    pub score: f64,
    /// 1-based.
    pub rank: usize,
    /// peFDR of the list cut at this gene.
    pub pe_fdr_at_gene: f64,
    /// Position of the gene in the input.
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    pub entries: Vec<RankingEntry>,
    /// Length of the longest list with peFDR at most the target, if one was
    /// requested.
    pub cut: Option<usize>,
}

/// Sorts genes by score (descending, ties by gene id) and attaches the
/// running peFDR.
pub fn rank_genes(gene_ids: &[String], scores: &[f64], target_pe_fdr: Option<f64>) -> Result<Ranking> {
    if gene_ids.len() != scores.len() {
        return Err(Error::Dimension("gene ids and scores differ in length".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then_with(|| gene_ids[a].cmp(&gene_ids[b]))
    });
    let mut entries = Vec::with_capacity(order.len());
    let mut sum = 0.0;
    let mut prev = 0.0f64;
    for (k, &i) in order.iter().enumerate() {
        sum += 1.0 - scores[i];
        // the running mean cannot decrease; max() absorbs rounding
        let pe = (sum / (k + 1) as f64).max(prev);
        prev = pe;
        entries.push(RankingEntry {
            gene_id: gene_ids[i].clone(),
            score: scores[i],
            rank: k + 1,
            pe_fdr_at_gene: pe,
            index: i,
        });
    }
    let cut = target_pe_fdr.map(|t| entries.iter().take_while(|e| e.pe_fdr_at_gene <= t).count());
    Ok(Ranking { entries, cut })
}

/// Ranking CSV: `gene_id,rank,<one column per term and joint set>,pe_fdr_at_gene`.
pub fn write_ranking_csv<W: Write>(
    mut w: W,
    ranking: &Ranking,
    summaries: &[PosteriorSummary],
    term_names: &[String],
    joint_names: &[String],
) -> std::io::Result<()> {
    write!(w, "gene_id,rank")?;
    for name in term_names.iter().chain(joint_names) {
        write!(w, ",P_{name}")?;
    }
    writeln!(w, ",pe_fdr_at_gene")?;
    for e in &ranking.entries {
        let s = &summaries[e.index];
        write!(w, "{},{}", e.gene_id, e.rank)?;
        for v in s.inclusion.iter().chain(&s.joint_inclusion) {
            write!(w, ",{v}")?;
        }
        writeln!(w, ",{}", e.pe_fdr_at_gene)?;
    }
    Ok(())
}
