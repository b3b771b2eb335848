use genebma::model_space::{enumerate_subsets, ModelIndex, ModelSpace, CELLS};
use genebma::posterior::{
    inclusion_probability, joint_inclusion_probability, pe_fdr, posterior_model_probs, rank_genes, JointMode,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Posterior by direct products, no log-sum-exp.
fn direct(lbf: &[f64], prior: &[f64]) -> Vec<f64> {
    let w: Vec<f64> = lbf.iter().zip(prior).map(|(b, p)| b.exp() * p).collect();
    let z: f64 = w.iter().sum();
    w.iter().map(|v| v / z).collect()
}

fn random_simplex(rng: &mut impl Rng, m: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..m).map(|_| rng.random_range(0.01..1.0)).collect();
    let z: f64 = w.iter().sum();
    w.iter().map(|v| v / z).collect()
}

#[test]
fn matches_direct_arithmetic_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..500 {
        let lbf: Vec<f64> = (0..8).map(|_| rng.random_range(-5.0..5.0)).collect();
        let prior = random_simplex(&mut rng, 8);
        let got = posterior_model_probs(&lbf, &prior).unwrap();
        for (g, w) in got.iter().zip(direct(&lbf, &prior)) {
            assert!((g - w).abs() < 1e-12);
        }
    }
}

#[test]
fn subset_inclusion_by_enumeration() {
    let space = enumerate_subsets(3, &[]).unwrap();
    let inv = space.involvement();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let post = random_simplex(&mut rng, 8);
        for k in 0..3 {
            let want: f64 = space
                .models()
                .iter()
                .zip(&post)
                .filter(|(m, _)| matches!(m, ModelIndex::Subset(g) if g >> k & 1 == 1))
                .map(|(_, p)| p)
                .sum();
            assert!((inclusion_probability(&post, &inv, k) - want).abs() < 1e-15);
        }
        // joint "all": both bits set; "any": complement of neither
        let both: f64 = space
            .models()
            .iter()
            .zip(&post)
            .filter(|(m, _)| matches!(m, ModelIndex::Subset(g) if g & 0b011 == 0b011))
            .map(|(_, p)| p)
            .sum();
        let neither: f64 = space
            .models()
            .iter()
            .zip(&post)
            .filter(|(m, _)| matches!(m, ModelIndex::Subset(g) if g & 0b011 == 0))
            .map(|(_, p)| p)
            .sum();
        let all = joint_inclusion_probability(&post, &inv, &[0, 1], JointMode::All).unwrap();
        let any = joint_inclusion_probability(&post, &inv, &[0, 1], JointMode::Any).unwrap();
        assert!((all - both).abs() < 1e-15);
        assert!((any - (1.0 - neither)).abs() < 1e-12);
    }
}

/// Does any pair of cells differing only in factor `f` fall in different blocks?
fn differs_in(blocks: &[u8; 4], f: usize) -> Vec<bool> {
    let mut out = Vec::new();
    for c in 0..4 {
        for d in c + 1..4 {
            let (x, y) = (CELLS[c], CELLS[d]);
            let same_other = if f == 0 { x.1 == y.1 } else { x.0 == y.0 };
            let diff_f = if f == 0 { x.0 != y.0 } else { x.1 != y.1 };
            if same_other && diff_f {
                out.push(blocks[c] != blocks[d]);
            }
        }
    }
    out
}

#[test]
fn pattern_space_inclusion_by_enumeration() {
    let space = ModelSpace::two_factor("s", "g");
    let inv = space.involvement();
    let main_only = [[0u8, 0, 0, 0], [0, 0, 1, 1], [0, 1, 0, 1]];
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..50 {
        let post = random_simplex(&mut rng, space.len());
        let mut want = [0.0; 5];
        for (m, p) in space.models().iter().zip(&post) {
            let flags = match m {
                ModelIndex::Additive => [true, true, false, true, true],
                ModelIndex::Pattern(part) => {
                    let a = differs_in(&part.0, 0);
                    let b = differs_in(&part.0, 1);
                    [
                        a.iter().any(|&v| v),
                        b.iter().any(|&v| v),
                        !main_only.contains(&part.0),
                        a.iter().all(|&v| v),
                        b.iter().all(|&v| v),
                    ]
                }
                ModelIndex::Subset(_) => unreachable!(),
            };
            for t in 0..5 {
                if flags[t] {
                    want[t] += p;
                }
            }
        }
        for (t, w) in want.iter().enumerate() {
            assert!((inclusion_probability(&post, &inv, t) - w).abs() < 1e-14, "term {}", inv.terms[t]);
        }
    }
}

fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..12).prop_flat_map(|m| {
        (
            prop::collection::vec(-30.0f64..30.0, m),
            prop::collection::vec(1e-6f64..1.0, m),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn posteriors_sum_to_one((lbf, w) in instance()) {
        let z: f64 = w.iter().sum();
        let prior: Vec<f64> = w.iter().map(|v| v / z).collect();
        let post = posterior_model_probs(&lbf, &prior).unwrap();
        prop_assert!((post.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(post.iter().all(|&p| (0.0..=1.0).contains(&p)));
    }

    #[test]
    fn running_pe_fdr_never_decreases(scores in prop::collection::vec(0.0f64..=1.0, 1..200)) {
        let ids: Vec<String> = (0..scores.len()).map(|i| format!("g{i:03}")).collect();
        let r = rank_genes(&ids, &scores, None).unwrap();
        for w in r.entries.windows(2) {
            prop_assert!(w[1].pe_fdr_at_gene >= w[0].pe_fdr_at_gene);
            prop_assert!(w[1].score <= w[0].score);
        }
    }

    #[test]
    fn pe_fdr_at_cut_matches_threshold_list(scores in prop::collection::vec(0.0f64..=1.0, 1..100), p in 0.0f64..1.0) {
        let selected: Vec<f64> = scores.iter().copied().filter(|&s| s >= p).collect();
        prop_assume!(!selected.is_empty());
        let want = selected.iter().map(|s| 1.0 - s).sum::<f64>() / selected.len() as f64;
        prop_assert!((pe_fdr(&scores, p).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn ranking_is_invariant_to_prior_scaling((lbf, w) in instance(), scale in 0.1f64..10.0) {
        // an unnormalised prior gives the same posterior
        let z: f64 = w.iter().sum();
        let prior: Vec<f64> = w.iter().map(|v| v / z).collect();
        let scaled: Vec<f64> = prior.iter().map(|v| v * scale).collect();
        let a = posterior_model_probs(&lbf, &prior).unwrap();
        let b = posterior_model_probs(&lbf, &scaled).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }
}
