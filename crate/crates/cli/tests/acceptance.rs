//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Exits 0 after reporting unless `ACCEPTANCE_STRICT=1`, in which case any
//! FAIL line makes the process exit 1. Panics (broken pipeline) always fail.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use genebma::bf::{laplace_log_bf, zellner_siow_log_bf, BfConfig};
use genebma::model_space::{enumerate_two_factor_patterns, CellPartition, ModelIndex};
use genebma::ols::{auxiliary_fit, fit_ols, tstat_identity_check, with_intercept};
use genebma::simulator::{generate_dataset, sample_covariates, SimConfig, StreamKey};
use genebma_cli::app::{average_calibration, CompareReport};
use genebma_cli::pipeline::{apply_prior, compare_replicate, score, subset_space, CompareSettings, Method, PriorChoice};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

// criterion 1
const TABLE2_TARGET: [(Method, f64); 4] = [
    (Method::Sm1, 286.0),
    (Method::Sm2, 294.0),
    (Method::BmaEmpirical, 346.0),
    (Method::Mm, 356.0),
];
const TABLE2_REL_TOL: f64 = 0.20;
const BMA_VS_MM_REL_TOL: f64 = 0.15;
const RUNTIME_LIMIT_S: f64 = 1800.0;
// criterion 2
const FDR_GAP_MIN: f64 = 0.01;
const FDR_G0D0_TOL: f64 = 0.015;
// criterion 3
const CALIBRATION_TOL: f64 = 0.05;
const CALIBRATION_RANGE: (f64, f64) = (0.01, 0.2);
// criterion 4
const IDENTITY_TOL: f64 = 1e-8;
// criterion 5
const BIAS_SE_MULTIPLE: f64 = 3.0;
// criterion 6
const ORACLE_REL_TOL: f64 = 1e-3;
const LAPLACE_REL_TOL: f64 = 2e-2;
// criterion 7
const NORMALIZATION_TOL: f64 = 1e-12;
// criterion 9
const RECOVERY_MIN: f64 = 0.90;

const SETTINGS: [(f64, f64, f64); 4] = [(0.10, 0.05, 0.0), (0.10, 0.05, 0.05), (0.05, 0.10, 0.0), (0.05, 0.10, 0.10)];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn tuned_config() -> SimConfig {
    let path = workspace_root().join("configs/tuned.toml");
    let text = fs::read_to_string(&path).expect("configs/tuned.toml");
    toml::from_str(&text).expect("tuned config parses")
}

fn run_setting(n: usize, (f_s, f_g, f_d): (f64, f64, f64), methods: &[Method]) -> CompareReport {
    let cfg = SimConfig { n, f_s, f_g, f_d, ..tuned_config() };
    let settings = CompareSettings { methods: methods.to_vec(), ..CompareSettings::default() };
    let per_replicate = (0..cfg.replicates)
        .map(|rep| {
            let (data, truth) = generate_dataset(&cfg, rep).expect("simulate");
            compare_replicate(&data, &truth, &settings).expect("compare")
        })
        .collect();
    CompareReport { methods: methods.to_vec(), per_replicate }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn criterion_1(report: &CompareReport, seconds: f64) -> Outcome {
    let mean = |m| report.mean_discoveries(report.index(m).unwrap());
    let (sm1, sm2, bma, mm) = (mean(Method::Sm1), mean(Method::Sm2), mean(Method::BmaEmpirical), mean(Method::Mm));
    let order = bma > sm2 && sm2 > sm1;
    let close = rel(bma, mm) <= BMA_VS_MM_REL_TOL;
    let mut within = true;
    let mut parts = Vec::new();
    for (m, target) in TABLE2_TARGET {
        let got = mean(m);
        let ok = rel(got, target) <= TABLE2_REL_TOL;
        within &= ok;
        parts.push(format!("{} {:.1} (target {target}, {:+.1}%)", m.label(), got, 100.0 * (got - target) / target));
    }
    let fast = seconds < RUNTIME_LIMIT_S;
    outcome(
        order && close && within && fast,
        format!(
            "{}; order BMA1>SM2>SM1 {}; |BMA1-MM|/MM {:.3} {}; runtime {seconds:.0}s",
            parts.join(", "),
            if order { "holds" } else { "violated" },
            rel(bma, mm),
            if close { "ok" } else { "too large" },
        ),
    )
}

fn criterion_2(report: &CompareReport) -> Outcome {
    let sm1 = report.table1(report.index(Method::Sm1).unwrap());
    let mm = report.table1(report.index(Method::Mm).unwrap());
    let gap = sm1.fdr_total - mm.fdr_total;
    let g0d0 = (sm1.fdr_g0d0 - mm.fdr_g0d0).abs();
    outcome(
        gap >= FDR_GAP_MIN && g0d0 <= FDR_G0D0_TOL,
        format!(
            "FDR_total SM1 {:.2}% vs MM {:.2}% (gap {:.2} pts); FDR_g0d0 SM1 {:.2}% vs MM {:.2}% (diff {:.2} pts)",
            100.0 * sm1.fdr_total,
            100.0 * mm.fdr_total,
            100.0 * gap,
            100.0 * sm1.fdr_g0d0,
            100.0 * mm.fdr_g0d0,
            100.0 * g0d0
        ),
    )
}

/// (max |peFDR - true| over the range, uniform-prior (true, est) at the true 5% cut)
fn calibration_numbers(report: &CompareReport) -> (f64, (f64, f64)) {
    let emp = average_calibration_of(report, Method::BmaEmpirical);
    let dev = emp
        .iter()
        .filter(|p| p.true_fdr >= CALIBRATION_RANGE.0 && p.true_fdr <= CALIBRATION_RANGE.1)
        .map(|p| (p.estimated_fdr - p.true_fdr).abs())
        .fold(0.0, f64::max);
    let uni = average_calibration_of(report, Method::BmaUniform);
    let at = uni.iter().rfind(|p| p.true_fdr <= 0.05).map_or((0.0, 0.0), |p| (p.true_fdr, p.estimated_fdr));
    (dev, at)
}

fn average_calibration_of(report: &CompareReport, m: Method) -> Vec<genebma::evaluation::CalibrationPoint> {
    let i = report.index(m).unwrap();
    let curves: Vec<_> = report.per_replicate.iter().map(|r| r[i].calibration.clone()).collect();
    average_calibration(&curves)
}

fn criterion_3(reports: &[(usize, (f64, f64, f64), &CompareReport)]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for &(n, (fs, fg, fd), report) in reports {
        let (dev, (t, e)) = calibration_numbers(report);
        let emp_ok = dev <= CALIBRATION_TOL;
        let uni_ok = fg == 0.0 || e < t;
        pass &= emp_ok && uni_ok;
        parts.push(format!(
            "n={n} ({fs},{fg},{fd}): emp max dev {dev:.3}{}, uniform est {e:.3} vs true {t:.3}{}",
            if emp_ok { "" } else { " [outside]" },
            if uni_ok { "" } else { " [not under]" }
        ));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < 100 {
        let n = rng.random_range(8..60);
        let k = rng.random_range(1..4);
        let x = DMatrix::from_fn(n, k, |_, _| rng.sample::<f64, _>(StandardNormal));
        let extra: Vec<f64> = (0..n).map(|i| 0.6 * x[(i, 0)] + rng.sample::<f64, _>(StandardNormal)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal) * 2.0 + 1.0).collect();
        match tstat_identity_check(&y, &x, &extra) {
            Ok(r) => {
                worst = worst.max(r);
                done += 1;
            }
            Err(_) => continue,
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst < IDENTITY_TOL && secs < 1.0,
        format!("max residual {worst:.2e} over 100 instances in {secs:.3}s"),
    )
}

fn criterion_5() -> Outcome {
    let n = 80;
    let cov = sample_covariates(n, &mut StreamKey::new(5, 0).covariates());
    let s = cov.column_by_name("s").unwrap().to_vec();
    let g = cov.column_by_name("g").unwrap().to_vec();
    let (beta1, alpha) = (0.5, 1.2);
    let x = DMatrix::from_column_slice(n, 1, &s);
    let aux = auxiliary_fit(&x, &g).unwrap();
    let expected = alpha * aux.b_x1();
    let design = with_intercept(&[&s], n);
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let genes = 2000;
    let diffs: Vec<f64> = (0..genes)
        .map(|_| {
            let y: Vec<f64> = (0..n)
                .map(|i| 3.0 + beta1 * s[i] + alpha * g[i] + rng.sample::<f64, _>(StandardNormal))
                .collect();
            fit_ols(&y, &design).unwrap().coefficients[1] - beta1
        })
        .collect();
    let mean = diffs.iter().sum::<f64>() / genes as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (genes - 1) as f64;
    let se = (var / genes as f64).sqrt();
    let z = (mean - expected) / se;
    outcome(
        z.abs() <= BIAS_SE_MULTIPLE,
        format!("MC mean bias {mean:.4} vs alpha*b {expected:.4} (se {se:.4}, z {z:+.2})"),
    )
}

fn criterion_6() -> Outcome {
    let path = workspace_root().join("crates/core/tests/data/zs_oracle.csv");
    let text = fs::read_to_string(path).expect("oracle table");
    let cfg = BfConfig::default();
    let mut worst_oracle: f64 = 0.0;
    for line in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let (r2, rho, n, want): (f64, usize, usize, f64) =
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap(), f[3].parse().unwrap());
        let got = zellner_siow_log_bf(r2, rho, n, &cfg).unwrap();
        worst_oracle = worst_oracle.max(rel(got, want));
    }
    // relative to max(|quadrature|, 1) so sign changes near zero stay meaningful
    let mut worst_laplace: f64 = 0.0;
    for n in [80, 160, 320, 640] {
        for rho in [1, 2, 3, 5] {
            for r2 in [0.0, 0.2, 0.5, 0.8, 0.9, 0.95] {
                let q = zellner_siow_log_bf(r2, rho, n, &cfg).unwrap();
                let l = laplace_log_bf(r2, rho, n).unwrap();
                worst_laplace = worst_laplace.max((l - q).abs() / q.abs().max(1.0));
            }
        }
    }
    outcome(
        worst_oracle <= ORACLE_REL_TOL && worst_laplace <= LAPLACE_REL_TOL,
        format!("quadrature vs oracle max rel {worst_oracle:.2e} (45 points); Laplace vs quadrature max rel {worst_laplace:.2e} (n>=80)"),
    )
}

fn criterion_7() -> Outcome {
    let cfg = SimConfig { n: 40, ..tuned_config() };
    let (mut data, _) = generate_dataset(&cfg, 0).unwrap();
    let covs: Vec<String> = ["s", "g", "d"].iter().map(|s| s.to_string()).collect();
    let space = subset_space(&mut data, &covs, &[]).unwrap();
    let scores = score(&data, &space, &BfConfig::default()).unwrap();
    let run = apply_prior(&space, scores, &PriorChoice::Empirical { c: 1.0 }, &["s&g".to_string()]).unwrap();
    let worst_post = run
        .summaries
        .iter()
        .map(|s| (s.model_posteriors.iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    let inclusion_ok = run
        .summaries
        .iter()
        .all(|s| s.inclusion.iter().chain(&s.joint_inclusion).all(|p| (0.0..=1.0).contains(p)));
    let worst_prior = run
        .calibration
        .history
        .iter()
        .map(|p| (p.iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    outcome(
        worst_post <= NORMALIZATION_TOL && inclusion_ok && worst_prior <= NORMALIZATION_TOL,
        format!(
            "{} genes: max |sum posterior - 1| {worst_post:.1e}; inclusion in [0,1] {inclusion_ok}; max |sum prior - 1| {worst_prior:.1e} over {} iterates",
            run.summaries.len(),
            run.calibration.history.len()
        ),
    )
}

/// Exhaustive oracle: canonical set partitions of the four cells, with the
/// main-effect ones being those induced by a function of A alone, B alone,
/// or neither.
fn partition_oracle() -> (Vec<[u8; 4]>, HashSet<[u8; 4]>) {
    let mut all = Vec::new();
    for code in 0..256u32 {
        let labels: Vec<u8> = (0..4).map(|c| ((code >> (2 * c)) & 3) as u8).collect();
        let mut map = [u8::MAX; 4];
        let mut next = 0;
        let mut canon = [0u8; 4];
        for c in 0..4 {
            let l = labels[c] as usize;
            if map[l] == u8::MAX {
                map[l] = next;
                next += 1;
            }
            canon[c] = map[l];
        }
        if !all.contains(&canon) {
            all.push(canon);
        }
    }
    // cells ordered (a, b) = 00, 01, 10, 11
    let induced = |f: fn(usize) -> usize| {
        let mut canon = [0u8; 4];
        let mut seen: Vec<usize> = Vec::new();
        for c in 0..4 {
            let v = f(c);
            let idx = seen.iter().position(|&x| x == v).unwrap_or_else(|| {
                seen.push(v);
                seen.len() - 1
            });
            canon[c] = idx as u8;
        }
        canon
    };
    let main: HashSet<[u8; 4]> = [induced(|_| 0), induced(|c| c / 2), induced(|c| c % 2)].into_iter().collect();
    (all, main)
}

fn criterion_8() -> Outcome {
    let space = enumerate_two_factor_patterns("s", "g");
    let inv = space.involvement();
    let (all, main) = partition_oracle();
    let oracle_inter: HashSet<[u8; 4]> = all.iter().copied().filter(|p| !main.contains(p)).collect();
    let flagged: HashSet<[u8; 4]> = space
        .models()
        .iter()
        .zip(&inv.interaction)
        .filter(|(_, &f)| f)
        .filter_map(|(m, _)| match m {
            ModelIndex::Pattern(CellPartition(p)) => Some(*p),
            _ => None,
        })
        .collect();
    let n_flagged = inv.interaction.iter().filter(|&&f| f).count();
    let additive = space.models().contains(&ModelIndex::Additive);
    outcome(
        space.len() == 16 && n_flagged == 12 && flagged == oracle_inter && additive && all.len() == 15,
        format!(
            "{} models, {n_flagged} interaction; oracle: {} partitions, {} interaction; sets equal {}",
            space.len(),
            all.len(),
            oracle_inter.len(),
            flagged == oracle_inter
        ),
    )
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_genebma")
}

fn run_cli(args: &[&str]) {
    let out = Command::new(bin()).args(args).output().expect("spawn genebma");
    assert!(
        out.status.success(),
        "genebma {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn criterion_9(tmp: &Path) -> Outcome {
    let sim = tmp.join("two_factor");
    let out = tmp.join("two_factor_analysis");
    run_cli(&["simulate", "--design", "two-factor", "--seed", "9", "--out", sim.to_str().unwrap()]);
    let rep = sim.join("rep_01");
    run_cli(&[
        "analyze",
        "--expr",
        rep.join("expression.tsv").to_str().unwrap(),
        "--covars",
        rep.join("covariates.tsv").to_str().unwrap(),
        "--pattern",
        "s,g",
        "--out",
        out.to_str().unwrap(),
    ]);
    let truth = fs::read_to_string(rep.join("truth.csv")).unwrap();
    let planted: Vec<String> = truth
        .lines()
        .skip(1)
        .filter(|l| l.ends_with(",1"))
        .map(|l| l.split(',').next().unwrap().to_string())
        .collect();
    let ranking = fs::read_to_string(out.join("ranking_sxg.csv")).unwrap();
    let ids: Vec<&str> = ranking.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    let top: HashSet<&str> = ids[..ids.len() / 10].iter().copied().collect();
    let hit = planted.iter().filter(|g| top.contains(g.as_str())).count();
    let frac = hit as f64 / planted.len() as f64;
    let has_cols = ranking.lines().next().unwrap().contains("P_s:g") && ranking.lines().next().unwrap().contains("P_s|s:g");
    outcome(
        frac >= RECOVERY_MIN && has_cols,
        format!(
            "{hit}/{} planted interaction genes in the top decile of P_s:g ({:.1}%) among {} genes",
            planted.len(),
            100.0 * frac,
            ids.len()
        ),
    )
}

fn rankings(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| {
            let p = e.unwrap().path();
            let name = p.file_name()?.to_string_lossy().to_string();
            name.starts_with("ranking_").then(|| (name, fs::read(&p).unwrap()))
        })
        .collect();
    out.sort();
    out
}

fn criterion_10(tmp: &Path) -> Outcome {
    let mut runs = Vec::new();
    for (i, threads) in ["1", "8", "1", "8"].iter().enumerate() {
        let sim = tmp.join(format!("det_sim_{i}"));
        let out = tmp.join(format!("det_out_{i}"));
        run_cli(&[
            "--threads", threads, "simulate", "--n", "40", "--genes", "2000", "--reps", "1", "--seed", "10", "--out",
            sim.to_str().unwrap(),
        ]);
        let rep = sim.join("rep_01");
        run_cli(&[
            "--threads",
            threads,
            "analyze",
            "--expr",
            rep.join("expression.tsv").to_str().unwrap(),
            "--covars",
            rep.join("covariates.tsv").to_str().unwrap(),
            "--covariates",
            "s,g,d",
            "--out",
            out.to_str().unwrap(),
        ]);
        runs.push(rankings(&out));
    }
    let identical = runs.windows(2).all(|w| w[0] == w[1]) && !runs[0].is_empty();
    outcome(
        identical,
        format!("{} ranking files compared across 4 runs (threads 1, 8, 1, 8): {}", runs[0].len(), if identical { "byte-identical" } else { "differ" }),
    )
}

fn report(id: usize, name: &str, o: &Outcome, failures: &mut usize) {
    if !o.pass {
        *failures += 1;
    }
    println!("criterion {id:>2} {}: {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
}

fn main() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let mut failures = 0;

    let methods = [Method::Sm1, Method::Sm2, Method::Mm, Method::BmaEmpirical, Method::BmaUniform];
    let start = Instant::now();
    let n80 = run_setting(80, SETTINGS[0], &methods);
    let seconds = start.elapsed().as_secs_f64();
    report(1, "discovery counts at 5% true FDR (n=80)", &criterion_1(&n80, seconds), &mut failures);

    let n40 = run_setting(40, SETTINGS[0], &methods);
    report(2, "confounding bias in FDR (n=40, p<=0.001)", &criterion_2(&n40), &mut failures);

    let calib_methods = [Method::BmaEmpirical, Method::BmaUniform];
    let mut extra = Vec::new();
    for n in [40, 80] {
        for &setting in &SETTINGS[1..] {
            extra.push((n, setting, run_setting(n, setting, &calib_methods)));
        }
    }
    let mut all: Vec<(usize, (f64, f64, f64), &CompareReport)> = vec![(40, SETTINGS[0], &n40), (80, SETTINGS[0], &n80)];
    all.extend(extra.iter().map(|(n, s, r)| (*n, *s, r)));
    all.sort_by(|a, b| a.0.cmp(&b.0));
    report(3, "peFDR calibration (four settings, n=40 and n=80)", &criterion_3(&all), &mut failures);

    report(4, "t-statistic identity", &criterion_4(), &mut failures);
    report(5, "omitted-variable bias", &criterion_5(), &mut failures);
    report(6, "Bayes factor oracle and Laplace", &criterion_6(), &mut failures);
    report(7, "normalization", &criterion_7(), &mut failures);
    report(8, "two-factor pattern space", &criterion_8(), &mut failures);
    report(9, "interaction recovery", &criterion_9(tmp.path()), &mut failures);
    report(10, "determinism across thread counts", &criterion_10(tmp.path()), &mut failures);

    println!("acceptance: {} of 10 criteria pass", 10 - failures);
    if failures > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
