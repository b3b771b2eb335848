//! Argument definitions and subcommand implementations.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use genebma::bf::{write_scores_csv, BfConfig, BfMethod};
use genebma::data::load_dataset;
use genebma::evaluation::{
    average_curves, calibration_curve, prefix_curve, write_calibration_csv, write_curve_csv, write_table1_csv,
    write_table2_csv, CalibrationPoint, StratifiedReport,
};
use genebma::posterior::{pe_fdr_with, write_ranking_csv, Ranking, SelectionRule};
use genebma::prior::{read_prior_file, write_prior_report};
use genebma::simulator::{generate_dataset, generate_two_factor, write_replicate, SimConfig, TruthTable, TwoFactorConfig};
use serde::{de::DeserializeOwned, Serialize};

use crate::manifest::RunManifest;
use crate::pipeline::{
    apply_prior, compare_replicate, parse_methods, pattern_space, score, subset_space, BmaRun, CompareSettings,
    Method, MethodOutcome, PriorChoice,
};

#[derive(Debug, Parser)]
#[command(name = "genebma", version, about = "Bayesian model averaging for differential expression")]
pub struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate replicate datasets with truth labels.
    Simulate(SimulateArgs),
    /// Score genes, calibrate the prior and rank genes per covariate.
    Analyze(AnalyzeArgs),
    /// Evaluate one ranking against simulated truth.
    Evaluate(EvaluateArgs),
    /// Run several methods over simulated replicates and tabulate.
    Compare(CompareArgs),
}

fn proportion(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(format!("{v} must be positive"))
    }
}

fn cutoff(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if v >= 1.0 {
        Ok(v)
    } else {
        Err(format!("c = {v} must be at least 1"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Design {
    /// Three correlated binary covariates s, g, d.
    Confounded,
    /// Two balanced factors s, g with planted cell-mean patterns.
    TwoFactor,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// TOML file with simulation settings; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "confounded")]
    pub design: Design,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub genes: Option<usize>,
    #[arg(long, value_parser = proportion)]
    pub fs: Option<f64>,
    #[arg(long, value_parser = proportion)]
    pub fg: Option<f64>,
    #[arg(long, value_parser = proportion)]
    pub fd: Option<f64>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = positive)]
    pub effect_sd_scale: Option<f64>,
    #[arg(long, value_parser = positive)]
    pub variance_df: Option<f64>,
    #[arg(long, value_parser = positive)]
    pub variance_scale: Option<f64>,
    /// Two-factor design: share of interaction-pattern genes.
    #[arg(long, value_parser = proportion)]
    pub f_interaction: Option<f64>,
    /// Two-factor design: share of additive-pattern genes.
    #[arg(long, value_parser = proportion)]
    pub f_main: Option<f64>,
    /// Two-factor design: spacing of block means in residual sds.
    #[arg(long, value_parser = positive)]
    pub effect_size: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PriorKind {
    Empirical,
    Uniform,
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BfMethodArg {
    Auto,
    Quadrature,
    Laplace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PeFdrRule {
    /// Select genes with inclusion probability at least the threshold.
    AtLeast,
    /// Select genes with inclusion probability at most the threshold.
    AtMost,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub expr: PathBuf,
    #[arg(long)]
    pub covars: PathBuf,
    /// Comma-separated covariate columns spanning the model space.
    #[arg(long, value_delimiter = ',')]
    pub covariates: Vec<String>,
    /// Comma-separated `a:b` interactions (hierarchical).
    #[arg(long, value_delimiter = ',')]
    pub interactions: Vec<String>,
    /// Two binary factors `a,b` for the 16-model cell-pattern space.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["covariates", "interactions"])]
    pub pattern: Vec<String>,
    #[arg(long, value_enum, default_value = "empirical")]
    pub prior: PriorKind,
    /// Prior file (`model,prior` lines) for `--prior file`.
    #[arg(long, required_if_eq("prior", "file"))]
    pub prior_file: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0, value_parser = cutoff)]
    pub c: f64,
    #[arg(long, default_value_t = 0.05, value_parser = proportion)]
    pub target_pefdr: f64,
    /// Joint sets such as `s&g` (all) or `s|s:g` (any); repeatable.
    #[arg(long)]
    pub joint: Vec<String>,
    #[arg(long, value_enum, default_value = "auto")]
    pub bf_method: BfMethodArg,
    #[arg(long, value_enum, default_value = "at-least")]
    pub pefdr_rule: PeFdrRule,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Ranking CSV written by `analyze`.
    #[arg(long)]
    pub ranking: PathBuf,
    /// Truth CSV written by `simulate`.
    #[arg(long)]
    pub truth: PathBuf,
    /// Covariate whose truth labels are scored (s, g or d).
    #[arg(long, default_value = "s")]
    pub target: String,
    #[arg(long, default_value_t = 0.05, value_parser = proportion)]
    pub fdr: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub sim_dir: PathBuf,
    #[arg(long, default_value = "sm1,sm2,mm,bma-empirical,bma-uniform,bma-oracle")]
    pub methods: String,
    #[arg(long, default_value_t = 0.001, value_parser = proportion)]
    pub pcut: f64,
    #[arg(long, default_value_t = 0.05, value_parser = proportion)]
    pub fdr: f64,
    #[arg(long, default_value_t = 1.0, value_parser = cutoff)]
    pub c: f64,
    #[arg(long, default_value = "s")]
    pub target: String,
    #[arg(long, value_delimiter = ',', default_value = "s,g,d")]
    pub covariates: Vec<String>,
    #[arg(long, value_enum, default_value = "auto")]
    pub bf_method: BfMethodArg,
    /// Output directory (default: `<sim-dir>/compare`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        ensure!(t > 0, "--threads must be positive");
        builder = builder.num_threads(t);
    }
    let pool = builder.build().context("building thread pool")?;
    pool.install(|| match cli.command {
        Command::Simulate(a) => simulate(&a, cli.threads),
        Command::Analyze(a) => analyze(&a, cli.threads),
        Command::Evaluate(a) => evaluate(&a),
        Command::Compare(a) => compare(&a, cli.threads),
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn load_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, toml::to_string(value)?).with_context(|| format!("writing {}", path.display()))
}

pub fn replicate_dir(root: &Path, rep: usize) -> PathBuf {
    root.join(format!("rep_{:02}", rep + 1))
}

fn bf_config(m: BfMethodArg) -> BfConfig {
    BfConfig {
        method: match m {
            BfMethodArg::Auto => BfMethod::Auto,
            BfMethodArg::Quadrature => BfMethod::Quadrature,
            BfMethodArg::Laplace => BfMethod::Laplace,
        },
        ..BfConfig::default()
    }
}

fn threads_setting(t: Option<usize>) -> String {
    t.map_or_else(|| format!("default({})", rayon::current_num_threads()), |t| t.to_string())
}

pub fn simulate_config(a: &SimulateArgs) -> Result<SimConfig> {
    let mut cfg: SimConfig = match &a.config {
        Some(p) => load_toml(p)?,
        None => SimConfig::default(),
    };
    macro_rules! over {
        ($($field:ident <- $flag:ident),*) => {$(if let Some(v) = a.$flag { cfg.$field = v; })*};
    }
    over!(n <- n, genes <- genes, f_s <- fs, f_g <- fg, f_d <- fd, replicates <- reps, seed <- seed,
          effect_sd_scale <- effect_sd_scale, variance_df <- variance_df, variance_scale <- variance_scale);
    cfg.validate()?;
    Ok(cfg)
}

fn simulate(a: &SimulateArgs, threads: Option<usize>) -> Result<()> {
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let mut manifest = RunManifest::start("simulate");
    manifest.setting("threads", threads_setting(threads));
    if let Some(p) = &a.config {
        manifest.input(p);
    }
    match a.design {
        Design::Confounded => {
            let cfg = simulate_config(a)?;
            for rep in 0..cfg.replicates {
                let (data, truth) = generate_dataset(&cfg, rep)?;
                write_replicate(replicate_dir(&a.out, rep), &data, &truth)?;
            }
            write_toml(&a.out.join("config.toml"), &cfg)?;
            manifest.setting("design", "confounded").setting("seed", cfg.seed);
        }
        Design::TwoFactor => {
            let mut cfg: TwoFactorConfig = match &a.config {
                Some(p) => load_toml(p)?,
                None => TwoFactorConfig::default(),
            };
            if let Some(v) = a.n {
                cfg.n = v;
            }
            if let Some(v) = a.genes {
                cfg.genes = v;
            }
            if let Some(v) = a.seed {
                cfg.seed = v;
            }
            if let Some(v) = a.f_interaction {
                cfg.f_interaction = v;
            }
            if let Some(v) = a.f_main {
                cfg.f_main = v;
            }
            if let Some(v) = a.effect_size {
                cfg.effect_size = v;
            }
            cfg.validate()?;
            let (data, truth) = generate_two_factor(&cfg)?;
            let dir = replicate_dir(&a.out, 0);
            fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            genebma::data::write_expression(dir.join("expression.tsv"), &data.expression)?;
            genebma::data::write_covariates(dir.join("covariates.tsv"), &data.covariates)?;
            truth.write_csv(dir.join("truth.csv"))?;
            write_toml(&a.out.join("config.toml"), &cfg)?;
            manifest.setting("design", "two-factor").setting("seed", cfg.seed);
        }
    }
    manifest.finish(&a.out)
}

/// File-name-safe form of a term or joint-set name.
pub fn file_stem(name: &str) -> String {
    name.replace(':', "x").replace('&', "_and_").replace('|', "_or_")
}

fn write_ranking(dir: &Path, name: &str, ranking: &Ranking, run: &BmaRun, joint_names: &[String]) -> Result<()> {
    let path = dir.join(format!("ranking_{}.csv", file_stem(name)));
    let mut w = create(&path)?;
    write_ranking_csv(&mut w, ranking, &run.summaries, &run.terms, joint_names)?;
    w.flush()?;
    Ok(())
}

fn analyze(a: &AnalyzeArgs, threads: Option<usize>) -> Result<()> {
    let mut data = load_dataset(&a.expr, &a.covars)?;
    let mut joints = a.joint.clone();
    let space = if !a.pattern.is_empty() {
        ensure!(a.pattern.len() == 2, "--pattern takes exactly two factors");
        let (fa, fb) = (&a.pattern[0], &a.pattern[1]);
        // the "either" sets behind P_{a|a:b} and P_{b|a:b}
        for f in [fa, fb] {
            let q = format!("{f}|{fa}:{fb}");
            if !joints.contains(&q) {
                joints.push(q);
            }
        }
        pattern_space(&mut data, fa, fb)?
    } else {
        ensure!(!a.covariates.is_empty(), "--covariates or --pattern is required");
        let interactions = a
            .interactions
            .iter()
            .map(|s| match s.split_once(':') {
                Some((x, y)) => Ok((x.trim().to_string(), y.trim().to_string())),
                None => bail!("interaction '{s}' is not of the form a:b"),
            })
            .collect::<Result<Vec<_>>>()?;
        subset_space(&mut data, &a.covariates, &interactions)?
    };

    let bf = bf_config(a.bf_method);
    let prior = match a.prior {
        PriorKind::Empirical => PriorChoice::Empirical { c: a.c },
        PriorKind::Uniform => PriorChoice::Uniform,
        PriorKind::File => {
            let path = a.prior_file.as_ref().context("--prior file needs --prior-file")?;
            PriorChoice::Fixed(read_prior_file(path, space.len())?)
        }
    };
    let scores = score(&data, &space, &bf)?;
    let run = apply_prior(&space, scores, &prior, &joints)?;

    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let mut w = create(&a.out.join("model_space.csv"))?;
    space.write_csv(&mut w)?;
    w.flush()?;
    let mut w = create(&a.out.join("bf.csv"))?;
    write_scores_csv(&mut w, &run.scores)?;
    w.flush()?;
    let labels: Vec<String> = (0..space.len()).map(|m| space.label(m)).collect();
    let mut w = create(&a.out.join("prior.csv"))?;
    write_prior_report(&mut w, &run.calibration, &labels)?;
    w.flush()?;

    let rule = match a.pefdr_rule {
        PeFdrRule::AtLeast => SelectionRule::AtLeast,
        PeFdrRule::AtMost => SelectionRule::AtMost,
    };
    let joint_names: Vec<String> = run.joints.iter().map(|q| q.name.clone()).collect();
    let mut summary = create(&a.out.join("summary.csv"))?;
    writeln!(summary, "set,genes_at_target,pe_fdr_at_cut,score_at_cut")?;
    let mut emit = |name: &str, ranking: Ranking, scores: Vec<f64>| -> Result<()> {
        let cut = ranking.cut.unwrap_or(0);
        let (pe, at) = if cut > 0 {
            let threshold = ranking.entries[cut - 1].score;
            let pe = match rule {
                SelectionRule::AtLeast => ranking.entries[cut - 1].pe_fdr_at_gene,
                SelectionRule::AtMost => pe_fdr_with(&scores, threshold, rule)?,
            };
            (pe.to_string(), threshold.to_string())
        } else {
            ("NA".into(), "NA".into())
        };
        writeln!(summary, "{name},{cut},{pe},{at}")?;
        write_ranking(&a.out, name, &ranking, &run, &joint_names)
    };
    for (t, name) in run.terms.iter().enumerate() {
        emit(name, run.rank_term(t, Some(a.target_pefdr))?, run.term_scores(t))?;
    }
    for (q, name) in joint_names.iter().enumerate() {
        emit(name, run.rank_joint(q, Some(a.target_pefdr))?, run.joint_scores(q))?;
    }
    summary.flush()?;
    drop(summary);

    let fallbacks: usize = run.scores.iter().map(|s| s.laplace_fallbacks).sum();
    let saturated: usize = run.scores.iter().map(|s| s.saturated.iter().filter(|&&x| x).count()).sum();
    let mut manifest = RunManifest::start("analyze");
    manifest
        .input(&a.expr)
        .input(&a.covars)
        .setting("threads", threads_setting(threads))
        .setting("models", space.len())
        .setting("prior", format!("{:?}", a.prior).to_lowercase())
        .setting("c", a.c)
        .setting("target_pefdr", a.target_pefdr)
        .setting("bf_method", format!("{:?}", a.bf_method).to_lowercase())
        .setting("prior_iterations", run.calibration.iterations_run)
        .setting("saturated_fits", saturated)
        .setting("laplace_fallbacks", fallbacks);
    if let Some(p) = &a.prior_file {
        manifest.input(p);
    }
    manifest.finish(&a.out)
}

fn read_ranking(path: &Path, target: &str) -> Result<(Vec<String>, Vec<f64>, Vec<f64>)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().context("empty ranking file")?.split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name);
    let score_col = col(&format!("P_{target}")).with_context(|| format!("ranking lacks column P_{target}"))?;
    let pe_col = col("pe_fdr_at_gene").context("ranking lacks pe_fdr_at_gene")?;
    let (mut ids, mut scores, mut pe) = (Vec::new(), Vec::new(), Vec::new());
    for (i, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        ensure!(f.len() == header.len(), "ranking line {} has {} fields", i + 2, f.len());
        ids.push(f[0].to_string());
        scores.push(f[score_col].parse()?);
        pe.push(f[pe_col].parse()?);
    }
    Ok((ids, scores, pe))
}

fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let k = genebma::simulator::COVARIATES
        .iter()
        .position(|c| *c == a.target)
        .with_context(|| format!("target '{}' is not a simulated covariate", a.target))?;
    let truth = TruthTable::read_csv(&a.truth)?;
    let (ids, _, pe) = read_ranking(&a.ranking, &a.target)?;
    let index: std::collections::HashMap<&str, usize> =
        truth.gene_ids.iter().enumerate().map(|(i, g)| (g.as_str(), i)).collect();
    let order = ids
        .iter()
        .map(|g| index.get(g.as_str()).copied().with_context(|| format!("gene '{g}' missing from truth")))
        .collect::<Result<Vec<_>>>()?;
    ensure!(order.len() == truth.len(), "ranking covers {} of {} genes", order.len(), truth.len());
    let de = truth.de_flags(k);
    let curve = prefix_curve(&order, &de);
    let calibration = calibration_curve(&order, &pe, &de)?;
    let at_true = genebma::baselines::count_discoveries_at_true_fdr(&order, &de, a.fdr);
    let at_est = pe.iter().take_while(|&&v| v <= a.fdr).count();

    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let mut w = create(&a.out.join("evaluation.csv"))?;
    writeln!(w, "target,fdr,genes_at_true_fdr,genes_at_estimated_fdr,true_fdr_at_estimated_cut")?;
    let true_at_est = if at_est > 0 { curve[at_est - 1].fdr } else { 0.0 };
    writeln!(w, "{},{},{at_true},{at_est},{true_at_est}", a.target, a.fdr)?;
    w.flush()?;
    let mut w = create(&a.out.join("curve.csv"))?;
    write_curve_csv(&mut w, &curve)?;
    w.flush()?;
    let mut w = create(&a.out.join("calibration.csv"))?;
    write_calibration_csv(&mut w, &calibration)?;
    w.flush()?;
    let mut manifest = RunManifest::start("evaluate");
    manifest.input(&a.ranking).input(&a.truth);
    manifest.finish(&a.out)
}

/// Replicate directories under a simulation root, in order.
pub fn replicate_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)
        .with_context(|| format!("listing {}", root.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir() && p.file_name().is_some_and(|n| n.to_string_lossy().starts_with("rep_")))
        .collect();
    dirs.sort();
    ensure!(!dirs.is_empty(), "no rep_* directories under {}", root.display());
    Ok(dirs)
}

/// Mean of calibration curves by list length.
pub fn average_calibration(curves: &[Vec<CalibrationPoint>]) -> Vec<CalibrationPoint> {
    let len = curves.iter().map(Vec::len).min().unwrap_or(0);
    let r = curves.len() as f64;
    (0..len)
        .map(|k| CalibrationPoint {
            length: k + 1,
            true_fdr: curves.iter().map(|c| c[k].true_fdr).sum::<f64>() / r,
            estimated_fdr: curves.iter().map(|c| c[k].estimated_fdr).sum::<f64>() / r,
        })
        .collect()
}

/// Aggregated comparison over replicates.
pub struct CompareReport {
    pub methods: Vec<Method>,
    pub per_replicate: Vec<Vec<MethodOutcome>>,
}

impl CompareReport {
    pub fn discoveries(&self, m: usize) -> Vec<usize> {
        self.per_replicate.iter().map(|r| r[m].evaluation.discoveries).collect()
    }

    pub fn mean_discoveries(&self, m: usize) -> f64 {
        let d = self.discoveries(m);
        d.iter().sum::<usize>() as f64 / d.len() as f64
    }

    pub fn table1(&self, m: usize) -> StratifiedReport {
        let reps: Vec<StratifiedReport> = self.per_replicate.iter().map(|r| r[m].evaluation.table1).collect();
        StratifiedReport::mean(&reps)
    }

    pub fn calibration(&self, m: usize) -> Vec<CalibrationPoint> {
        let c: Vec<Vec<CalibrationPoint>> = self.per_replicate.iter().map(|r| r[m].calibration.clone()).collect();
        average_calibration(&c)
    }

    pub fn index(&self, method: Method) -> Option<usize> {
        self.methods.iter().position(|&m| m == method)
    }

    pub fn write(&self, out: &Path) -> Result<()> {
        fs::create_dir_all(out.join("curves")).with_context(|| format!("creating {}", out.display()))?;
        fs::create_dir_all(out.join("calibration"))?;
        let t1: Vec<(String, StratifiedReport)> = (0..self.methods.len())
            .map(|m| (self.methods[m].label().to_string(), self.table1(m)))
            .collect();
        let mut w = create(&out.join("table1.csv"))?;
        write_table1_csv(&mut w, &t1)?;
        w.flush()?;
        let t2: Vec<(String, Vec<usize>)> = (0..self.methods.len())
            .map(|m| (self.methods[m].label().to_string(), self.discoveries(m)))
            .collect();
        let mut w = create(&out.join("table2.csv"))?;
        write_table2_csv(&mut w, &t2)?;
        w.flush()?;
        for (m, method) in self.methods.iter().enumerate() {
            let curves: Vec<_> = self.per_replicate.iter().map(|r| r[m].evaluation.curve.clone()).collect();
            let mut w = create(&out.join("curves").join(format!("{}.csv", method.name())))?;
            write_curve_csv(&mut w, &average_curves(&curves))?;
            w.flush()?;
            let mut w = create(&out.join("calibration").join(format!("{}.csv", method.name())))?;
            write_calibration_csv(&mut w, &self.calibration(m))?;
            w.flush()?;
        }
        let mut w = create(&out.join("replicates.csv"))?;
        writeln!(w, "replicate,method,discoveries,fdr_g0d0,fdr_total,s_g0d0,s_total")?;
        for (r, outcomes) in self.per_replicate.iter().enumerate() {
            for o in outcomes {
                let t = &o.evaluation.table1;
                writeln!(
                    w,
                    "{},{},{},{},{},{},{}",
                    r + 1,
                    o.method.label(),
                    o.evaluation.discoveries,
                    t.fdr_g0d0,
                    t.fdr_total,
                    t.sensitivity_g0d0,
                    t.sensitivity_total
                )?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Loads each replicate under `sim_dir` and runs the comparison.
pub fn compare_dir(sim_dir: &Path, settings: &CompareSettings) -> Result<CompareReport> {
    let mut per_replicate = Vec::new();
    for dir in replicate_dirs(sim_dir)? {
        let data = load_dataset(dir.join("expression.tsv"), dir.join("covariates.tsv"))?;
        let truth_path = dir.join("truth.csv");
        ensure!(truth_path.exists(), "missing truth file {}", truth_path.display());
        let truth = TruthTable::read_csv(&truth_path)?;
        per_replicate.push(compare_replicate(&data, &truth, settings)?);
    }
    Ok(CompareReport {
        methods: settings.methods.clone(),
        per_replicate,
    })
}

fn compare(a: &CompareArgs, threads: Option<usize>) -> Result<()> {
    let settings = CompareSettings {
        target: a.target.clone(),
        covariates: a.covariates.clone(),
        methods: parse_methods(&a.methods)?,
        pcut: a.pcut,
        fdr: a.fdr,
        c: a.c,
        bf: bf_config(a.bf_method),
    };
    let report = compare_dir(&a.sim_dir, &settings)?;
    let out = a.out.clone().unwrap_or_else(|| a.sim_dir.join("compare"));
    report.write(&out)?;
    let mut manifest = RunManifest::start("compare");
    manifest
        .setting("threads", threads_setting(threads))
        .setting("methods", &a.methods)
        .setting("pcut", a.pcut)
        .setting("fdr", a.fdr)
        .setting("c", a.c)
        .setting("replicates", report.per_replicate.len());
    for dir in replicate_dirs(&a.sim_dir)? {
        for f in ["expression.tsv", "covariates.tsv", "truth.csv"] {
            manifest.input(&dir.join(f));
        }
    }
    manifest.finish(&out)
}
