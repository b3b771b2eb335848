//! Synthetic expression data with three correlated binary covariates
//! (smoking `s`, gender `g`, drinking `d`) and spike-and-slab gene effects.
//!
//! Randomness comes from ChaCha8 keyed by `(seed, replicate)`. Each gene
//! draws from its own stream (stream id = gene index) and the covariates
//! from stream `u64::MAX`, so output does not depend on thread count.

use std::io::BufRead;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{CovariateTable, Dataset, ExpressionMatrix};
use crate::error::{Error, Result};
use crate::model_space::{cell_partitions, CellPartition, ModelIndex};

pub const COVARIATES: [&str; 3] = ["s", "g", "d"];

/// P(d = 1 | s, g), indexed `[s][g]` with `g = 1` for male.
pub const DRINK_GIVEN_SG: [[f64; 2]; 2] = [[1.0 / 6.0, 0.3], [0.5, 0.9]];
/// P(male | s) for s = 0, 1.
pub const MALE_GIVEN_S: [f64; 2] = [0.25, 0.75];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n: usize,
    pub genes: usize,
    pub f_s: f64,
    pub f_g: f64,
    pub f_d: f64,
    pub seed: u64,
    pub replicates: usize,
    pub effect_sd_scale: f64,
    pub variance_df: f64,
    pub variance_scale: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n: 80,
            genes: 10_000,
            f_s: 0.10,
            f_g: 0.05,
            f_d: 0.0,
            seed: 1,
            replicates: 10,
            effect_sd_scale: 2.0,
            variance_df: 4.0,
            variance_scale: 0.05,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, f) in [("f_s", self.f_s), ("f_g", self.f_g), ("f_d", self.f_d)] {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::InvalidArgument(format!("{name} = {f} outside [0, 1]")));
            }
        }
        if self.n < 8 {
            return Err(Error::InvalidArgument(format!("n = {} below 8", self.n)));
        }
        if self.genes == 0 {
            return Err(Error::InvalidArgument("genes must be positive".into()));
        }
        for (name, v) in [
            ("effect_sd_scale", self.effect_sd_scale),
            ("variance_df", self.variance_df),
            ("variance_scale", self.variance_scale),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} = {v} must be positive")));
            }
        }
        Ok(())
    }

    pub fn proportions(&self) -> [f64; 3] {
        [self.f_s, self.f_g, self.f_d]
    }
}

/// Key of the generator family for one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey([u8; 32]);

impl StreamKey {
    pub fn new(seed: u64, replicate: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&replicate.to_le_bytes());
        key[16..24].copy_from_slice(b"genebma\0");
        Self(key)
    }

    pub fn stream(&self, id: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.0);
        rng.set_stream(id);
        rng
    }

    pub fn gene(&self, j: usize) -> ChaCha8Rng {
        self.stream(j as u64)
    }

    pub fn covariates(&self) -> ChaCha8Rng {
        self.stream(u64::MAX)
    }
}

pub fn sample_ids(n: usize) -> Vec<String> {
    let width = n.to_string().len().max(2);
    (1..=n).map(|i| format!("sample{i:0width$}")).collect()
}

pub fn gene_ids(j: usize) -> Vec<String> {
    let width = j.to_string().len().max(4);
    (1..=j).map(|i| format!("gene{i:0width$}")).collect()
}

/// Draws `s`, `g`, `d` for `n` subjects.
pub fn sample_covariates<R: Rng>(n: usize, rng: &mut R) -> CovariateTable {
    let mut cols = vec![Vec::with_capacity(n); 3];
    for _ in 0..n {
        let s = rng.random_bool(0.5) as usize;
        let g = rng.random_bool(MALE_GIVEN_S[s]) as usize;
        let d = rng.random_bool(DRINK_GIVEN_SG[s][g]) as usize;
        cols[0].push(s as f64);
        cols[1].push(g as f64);
        cols[2].push(d as f64);
    }
    CovariateTable::new(sample_ids(n), COVARIATES.iter().map(|s| s.to_string()).collect(), cols)
        .expect("generated covariates are well formed")
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TruthTable {
    pub gene_ids: Vec<String>,
    /// Coefficients of `s`, `g`, `d`.
    pub beta: Vec<[f64; 3]>,
    pub sigma: Vec<f64>,
}

impl TruthTable {
    pub fn len(&self) -> usize {
        self.gene_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gene_ids.is_empty()
    }

    /// Gene `j` depends on covariate `k` (0 = s, 1 = g, 2 = d).
    pub fn is_de(&self, j: usize, k: usize) -> bool {
        self.beta[j][k] != 0.0
    }

    pub fn de_flags(&self, k: usize) -> Vec<bool> {
        (0..self.len()).map(|j| self.is_de(j, k)).collect()
    }

    pub fn g0d0(&self, j: usize) -> bool {
        !self.is_de(j, 1) && !self.is_de(j, 2)
    }

    /// Names of the covariates each gene depends on.
    pub fn true_sets(&self) -> Vec<Vec<String>> {
        (0..self.len())
            .map(|j| {
                (0..3)
                    .filter(|&k| self.is_de(j, k))
                    .map(|k| COVARIATES[k].to_string())
                    .collect()
            })
            .collect()
    }

    /// True model of each gene as subset bits over `(s, g, d)`.
    pub fn true_model_bits(&self) -> Vec<u32> {
        (0..self.len())
            .map(|j| (0..3).filter(|&k| self.is_de(j, k)).map(|k| 1u32 << k).sum())
            .collect()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("gene_id,beta_s,beta_g,beta_d,sigma,s_de,g_de,d_de,g0d0\n");
        for j in 0..self.len() {
            let b = self.beta[j];
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                self.gene_ids[j],
                b[0],
                b[1],
                b[2],
                self.sigma[j],
                self.is_de(j, 0) as u8,
                self.is_de(j, 1) as u8,
                self.is_de(j, 2) as u8,
                self.g0d0(j) as u8
            ));
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let name = path.display().to_string();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut t = TruthTable::default();
        for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if i == 0 || line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            let bad = |message: &str| Error::Parse {
                file: name.clone(),
                line: i + 1,
                message: message.to_string(),
            };
            if f.len() < 5 {
                return Err(bad("expected gene_id,beta_s,beta_g,beta_d,sigma,..."));
            }
            let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("bad number"));
            t.gene_ids.push(f[0].to_string());
            t.beta.push([num(f[1])?, num(f[2])?, num(f[3])?]);
            t.sigma.push(num(f[4])?);
        }
        Ok(t)
    }
}

struct GeneDraw {
    beta: [f64; 3],
    sigma: f64,
}

/// Draws variance and effects from the gene's stream. The draw order is
/// fixed (chi-square, then a uniform and a normal per covariate) so that
/// the errors that follow line up regardless of which effects are zero.
fn draw_gene_effects<R: Rng>(rng: &mut R, f: [f64; 3], cfg: &SimConfig) -> GeneDraw {
    let chi = ChiSquared::new(cfg.variance_df).expect("validated df");
    let sigma2 = cfg.variance_scale * cfg.variance_df / chi.sample(rng);
    let sigma = sigma2.sqrt();
    let mut beta = [0.0; 3];
    for (k, b) in beta.iter_mut().enumerate() {
        let u: f64 = rng.random();
        let z: f64 = rng.sample(StandardNormal);
        if u < f[k] {
            *b = z * cfg.effect_sd_scale * sigma;
        }
    }
    GeneDraw { beta, sigma }
}

/// Effects and residual sds for every gene of one replicate.
pub fn sample_gene_effects(cfg: &SimConfig, key: &StreamKey) -> Result<TruthTable> {
    cfg.validate()?;
    let draws: Vec<GeneDraw> = (0..cfg.genes)
        .into_par_iter()
        .map(|j| draw_gene_effects(&mut key.gene(j), cfg.proportions(), cfg))
        .collect();
    Ok(TruthTable {
        gene_ids: gene_ids(cfg.genes),
        beta: draws.iter().map(|d| d.beta).collect(),
        sigma: draws.iter().map(|d| d.sigma).collect(),
    })
}

/// One replicate: `y_ij = beta_s s_i + beta_g g_i + beta_d d_i + e_ij`.
pub fn generate_dataset(cfg: &SimConfig, replicate: usize) -> Result<(Dataset, TruthTable)> {
    cfg.validate()?;
    let key = StreamKey::new(cfg.seed, replicate as u64);
    let covariates = sample_covariates(cfg.n, &mut key.covariates());
    let x: Vec<&[f64]> = (0..3).map(|k| covariates.column(k)).collect();
    let n = cfg.n;
    let rows: Vec<(GeneDraw, Vec<f64>)> = (0..cfg.genes)
        .into_par_iter()
        .map(|j| {
            let mut rng = key.gene(j);
            let d = draw_gene_effects(&mut rng, cfg.proportions(), cfg);
            let y = (0..n)
                .map(|i| {
                    let e: f64 = rng.sample(StandardNormal);
                    d.beta[0] * x[0][i] + d.beta[1] * x[1][i] + d.beta[2] * x[2][i] + d.sigma * e
                })
                .collect();
            (d, y)
        })
        .collect();
    let mut values = Vec::with_capacity(cfg.genes * n);
    for (_, y) in &rows {
        values.extend_from_slice(y);
    }
    let ids = gene_ids(cfg.genes);
    let truth = TruthTable {
        gene_ids: ids.clone(),
        beta: rows.iter().map(|(d, _)| d.beta).collect(),
        sigma: rows.iter().map(|(d, _)| d.sigma).collect(),
    };
    let expression = ExpressionMatrix::new(ids, sample_ids(n), values)?;
    Ok((Dataset::new(expression, covariates)?, truth))
}

/// Two binary factors with planted cell-mean patterns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwoFactorConfig {
    pub n: usize,
    pub genes: usize,
    /// Share of genes with an interaction pattern.
    pub f_interaction: f64,
    /// Share of genes with an additive (main-effect) pattern.
    pub f_main: f64,
    /// Spacing of block means in units of the residual sd.
    pub effect_size: f64,
    pub seed: u64,
}

impl Default for TwoFactorConfig {
    fn default() -> Self {
        Self {
            n: 80,
            genes: 2000,
            f_interaction: 0.05,
            f_main: 0.10,
            effect_size: 2.0,
            seed: 1,
        }
    }
}

impl TwoFactorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.f_interaction)
            || !(0.0..=1.0).contains(&self.f_main)
            || self.f_interaction + self.f_main > 1.0
        {
            return Err(Error::InvalidArgument("pattern proportions must lie in [0, 1] and sum to at most 1".into()));
        }
        if self.n < 8 || self.genes == 0 {
            return Err(Error::InvalidArgument("need n >= 8 and at least one gene".into()));
        }
        if !(self.effect_size.is_finite() && self.effect_size > 0.0) {
            return Err(Error::InvalidArgument("effect_size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PatternTruth {
    pub gene_ids: Vec<String>,
    /// Planted model (a partition or the additive model), `None` for null genes.
    pub pattern: Vec<Option<ModelIndex>>,
}

fn is_interaction(m: &Option<ModelIndex>) -> bool {
    matches!(m, Some(ModelIndex::Pattern(p)) if !p.is_main_effect_only())
}

impl PatternTruth {
    pub fn interaction(&self) -> Vec<bool> {
        self.pattern.iter().map(is_interaction).collect()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("gene_id,pattern,interaction\n");
        for (id, p) in self.gene_ids.iter().zip(&self.pattern) {
            let label = match p {
                Some(ModelIndex::Pattern(p)) => p.label(),
                Some(ModelIndex::Additive) => "additive".into(),
                Some(ModelIndex::Subset(_)) | None => "null".into(),
            };
            let inter = is_interaction(p);
            out.push_str(&format!("{id},{label},{}\n", inter as u8));
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Block mean levels, in units of `effect_size`. All pairwise sums differ, so
/// every interaction partition has a nonzero interaction contrast
/// (plain block indices make `{00}{01 10}{11}` exactly additive).
pub const BLOCK_LEVELS: [f64; 4] = [0.0, 1.0, 3.0, 7.0];

/// Balanced two-factor design (`s`, `g`) with genes that follow a random
/// interaction partition, an additive shift, or no pattern. Block means are
/// at `effect_size` times [`BLOCK_LEVELS`]; unit residual variance.
pub fn generate_two_factor(cfg: &TwoFactorConfig) -> Result<(Dataset, PatternTruth)> {
    cfg.validate()?;
    let key = StreamKey::new(cfg.seed, 0);
    let n = cfg.n;
    let s: Vec<f64> = (0..n).map(|i| (i % 4 / 2) as f64).collect();
    let g: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
    let cell: Vec<usize> = (0..n).map(|i| i % 4).collect();
    let covariates = CovariateTable::new(sample_ids(n), vec!["s".into(), "g".into()], vec![s.clone(), g.clone()])?;

    let interactions: Vec<CellPartition> = cell_partitions()
        .into_iter()
        .filter(|p| p.n_blocks() > 1 && !p.is_main_effect_only())
        .collect();
    let rows: Vec<(Option<ModelIndex>, Vec<f64>)> = (0..cfg.genes)
        .into_par_iter()
        .map(|j| {
            let mut rng = key.gene(j);
            let u: f64 = rng.random();
            let pick = rng.random_range(0..interactions.len());
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let shift_g = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
            let mut means = [0.0; 4];
            let pattern = if u < cfg.f_interaction {
                let p = interactions[pick];
                for (c, m) in means.iter_mut().enumerate() {
                    *m = sign * cfg.effect_size * BLOCK_LEVELS[p.0[c] as usize];
                }
                Some(ModelIndex::Pattern(p))
            } else if u < cfg.f_interaction + cfg.f_main {
                // additive: shift by s and by g
                for (c, m) in means.iter_mut().enumerate() {
                    let (a, b) = ((c / 2) as f64, (c % 2) as f64);
                    *m = sign * cfg.effect_size * (a + shift_g * b);
                }
                Some(if shift_g > 0.0 {
                    ModelIndex::Additive
                } else {
                    ModelIndex::Pattern(CellPartition([0, 0, 1, 1]))
                })
            } else {
                None
            };
            let y = (0..n)
                .map(|i| means[cell[i]] + rng.sample::<f64, _>(StandardNormal))
                .collect();
            (pattern, y)
        })
        .collect();
    let mut values = Vec::with_capacity(cfg.genes * n);
    for (_, y) in &rows {
        values.extend_from_slice(y);
    }
    let ids = gene_ids(cfg.genes);
    let expression = ExpressionMatrix::new(ids.clone(), sample_ids(n), values)?;
    Ok((
        Dataset::new(expression, covariates)?,
        PatternTruth {
            gene_ids: ids,
            pattern: rows.into_iter().map(|(p, _)| p).collect(),
        },
    ))
}

/// Writes `dir/{expression.tsv, covariates.tsv, truth.csv}`.
pub fn write_replicate(dir: impl AsRef<Path>, data: &Dataset, truth: &TruthTable) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    crate::data::write_expression(dir.join("expression.tsv"), &data.expression)?;
    crate::data::write_covariates(dir.join("covariates.tsv"), &data.covariates)?;
    truth.write_csv(dir.join("truth.csv"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(SimConfig::default().validate().is_ok());
        assert!(SimConfig { f_s: 1.2, ..Default::default() }.validate().is_err());
        assert!(SimConfig { n: 7, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn no_effects_when_proportions_zero() {
        let cfg = SimConfig { genes: 500, f_s: 0.0, f_g: 0.0, f_d: 0.0, ..Default::default() };
        let t = sample_gene_effects(&cfg, &StreamKey::new(3, 0)).unwrap();
        assert!(t.beta.iter().all(|b| b == &[0.0; 3]));
        let cfg = SimConfig { genes: 500, f_s: 1.0, ..Default::default() };
        let t = sample_gene_effects(&cfg, &StreamKey::new(3, 0)).unwrap();
        assert!((0..500).all(|j| t.is_de(j, 0)));
    }

    #[test]
    fn effects_match_dataset_truth() {
        let cfg = SimConfig { n: 10, genes: 50, ..Default::default() };
        let (_, truth) = generate_dataset(&cfg, 2).unwrap();
        let alone = sample_gene_effects(&cfg, &StreamKey::new(cfg.seed, 2)).unwrap();
        assert_eq!(truth, alone);
    }

    #[test]
    fn two_factor_shapes() {
        let cfg = TwoFactorConfig { genes: 100, ..Default::default() };
        let (data, truth) = generate_two_factor(&cfg).unwrap();
        assert_eq!(data.expression.n_genes(), 100);
        assert_eq!(data.covariates.names(), ["s", "g"]);
        let planted = truth.interaction().iter().filter(|&&b| b).count();
        assert!(planted > 0 && planted < 20);
    }

    #[test]
    fn truth_round_trip() {
        let cfg = SimConfig { n: 10, genes: 20, ..Default::default() };
        let (_, truth) = generate_dataset(&cfg, 0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("truth.csv");
        truth.write_csv(&p).unwrap();
        let back = TruthTable::read_csv(&p).unwrap();
        assert_eq!(back.gene_ids, truth.gene_ids);
        assert_eq!(back.beta, truth.beta);
    }
}
