use genebma::simulator::{
    generate_dataset, sample_covariates, sample_gene_effects, SimConfig, StreamKey, DRINK_GIVEN_SG, MALE_GIVEN_S,
};
use num::rational::Ratio;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

type Q = Ratio<i64>;

fn q(a: i64, b: i64) -> Q {
    Q::new(a, b)
}

#[test]
fn drinking_table_satisfies_every_conditional_exactly() {
    // a = q(1,M), b = q(1,F), c = q(0,M), e = q(0,F)
    let (a, b, c, e) = (q(9, 10), q(1, 2), q(3, 10), q(1, 6));
    let male = [q(1, 4), q(3, 4)];
    assert_eq!(male[1] * a + (q(1, 1) - male[1]) * b, q(4, 5), "P(d | smoker)");
    assert_eq!(male[0] * c + (q(1, 1) - male[0]) * e, q(1, 5), "P(d | nonsmoker)");
    // P(s | male) = 3/4 by symmetry of the s, g table
    assert_eq!(q(3, 4) * a + q(1, 4) * c, q(3, 4), "P(d | male)");
    assert_eq!(q(1, 4) * b + q(3, 4) * e, q(1, 4), "P(d | female)");
    assert_eq!(q(1, 2) * q(4, 5) + q(1, 2) * q(1, 5), q(1, 2), "P(d)");
    for (x, want) in [(a, DRINK_GIVEN_SG[1][1]), (b, DRINK_GIVEN_SG[1][0]), (c, DRINK_GIVEN_SG[0][1]), (e, DRINK_GIVEN_SG[0][0])] {
        assert_eq!(*x.numer() as f64 / *x.denom() as f64, want);
    }
    assert_eq!(MALE_GIVEN_S, [0.25, 0.75]);
}

#[test]
fn covariate_frequencies_converge() {
    let n = 1_000_000;
    let t = sample_covariates(n, &mut ChaCha8Rng::seed_from_u64(2024));
    let (s, g, d) = (t.column(0), t.column(1), t.column(2));
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let cond = |x: &[f64], given: &[f64]| {
        let (hit, tot) = x
            .iter()
            .zip(given)
            .filter(|(_, &c)| c == 1.0)
            .fold((0.0, 0.0), |(h, t), (&v, _)| (h + v, t + 1.0));
        hit / tot
    };
    let tol = 0.005;
    for (name, got, want) in [
        ("P(s)", mean(s), 0.5),
        ("P(g)", mean(g), 0.5),
        ("P(d)", mean(d), 0.5),
        ("P(male | smoker)", cond(g, s), 0.75),
        ("P(d | smoker)", cond(d, s), 0.80),
        ("P(d | male)", cond(d, g), 0.75),
    ] {
        assert!((got - want).abs() < tol, "{name} = {got}");
    }
}

fn cfg(genes: usize, f: [f64; 3]) -> SimConfig {
    SimConfig {
        n: 80,
        genes,
        f_s: f[0],
        f_g: f[1],
        f_d: f[2],
        seed: 99,
        ..SimConfig::default()
    }
}

#[test]
fn effect_proportions() {
    let key = StreamKey::new(5, 0);
    let none = sample_gene_effects(&cfg(1000, [0.0; 3]), &key).unwrap();
    assert!(none.beta.iter().all(|b| *b == [0.0; 3]));
    let all = sample_gene_effects(&cfg(1000, [1.0, 0.0, 0.0]), &key).unwrap();
    assert!(all.de_flags(0).iter().all(|&f| f));

    let t = sample_gene_effects(&cfg(100_000, [0.1, 0.0, 0.0]), &key).unwrap();
    let frac = t.de_flags(0).iter().filter(|&&f| f).count() as f64 / 1e5;
    assert!((frac - 0.1).abs() < 0.005, "{frac}");
}

#[test]
fn effect_signs_are_symmetric() {
    let t = sample_gene_effects(&cfg(100_000, [0.3, 0.3, 0.3]), &StreamKey::new(8, 1)).unwrap();
    // standardise by the gene sd so every draw is N(0, scale^2)
    let z: Vec<f64> = t
        .beta
        .iter()
        .zip(&t.sigma)
        .flat_map(|(b, s)| b.iter().filter(|v| **v != 0.0).map(move |v| v / s).collect::<Vec<_>>())
        .collect();
    let m = z.len() as f64;
    let mean = z.iter().sum::<f64>() / m;
    let sd = (z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt();
    assert!(mean.abs() < 3.0 * sd / m.sqrt(), "mean {mean}, se {}", sd / m.sqrt());
}

#[test]
fn null_sample_variances_follow_chi_square() {
    let c = cfg(10_000, [0.0; 3]);
    let (data, truth) = generate_dataset(&c, 0).unwrap();
    let n = c.n as f64;
    let ratios: Vec<f64> = data
        .expression
        .rows()
        .zip(&truth.sigma)
        .map(|(y, s)| {
            let m = y.iter().sum::<f64>() / n;
            y.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0) / (s * s)
        })
        .collect();
    let within = ratios.iter().filter(|r| (*r - 1.0).abs() < 0.1).count() as f64 / ratios.len() as f64;
    // (n-1) s^2 / sigma^2 ~ chi-square(n-1)
    let chi = ChiSquared::new(n - 1.0).unwrap();
    let want = chi.cdf(1.1 * (n - 1.0)) - chi.cdf(0.9 * (n - 1.0));
    let se = (want * (1.0 - want) / ratios.len() as f64).sqrt();
    assert!((within - want).abs() < 4.0 * se, "{within} vs {want}");
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    assert!((mean - 1.0).abs() < 4.0 * (2.0 / (n - 1.0) / ratios.len() as f64).sqrt(), "{mean}");
}

#[test]
fn same_seed_same_data() {
    let c = cfg(500, [0.1, 0.05, 0.05]);
    let (a, ta) = generate_dataset(&c, 3).unwrap();
    let (b, tb) = generate_dataset(&c, 3).unwrap();
    assert_eq!(a.expression.values(), b.expression.values());
    assert_eq!(a.covariates.column(2), b.covariates.column(2));
    assert_eq!(ta, tb);
    let (other, _) = generate_dataset(&c, 4).unwrap();
    assert_ne!(a.expression.values(), other.expression.values());
}

#[test]
fn table_one_setting_shape() {
    let c = SimConfig { n: 40, ..cfg(10_000, [0.1, 0.05, 0.0]) };
    let (data, truth) = generate_dataset(&c, 0).unwrap();
    assert_eq!((data.n_genes(), data.n_samples()), (10_000, 40));
    let s_de = truth.de_flags(0).iter().filter(|&&f| f).count();
    assert!((900..=1100).contains(&s_de), "{s_de}");
}
