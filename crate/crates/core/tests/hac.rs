use pathmine::hac::{
    adjusted_rand_index, agglomerate_condensed, cut_tree, Dendrogram, Linkage, NodeRef,
};
use pathmine_testkit::{naive_agglomerate, pair_count_ari, perturbed_integer_matrix, rng, OracleLinkage};
use proptest::prelude::*;
use rand::Rng;

fn oracle_kind(l: Linkage) -> OracleLinkage {
    match l {
        Linkage::WardSquared => OracleLinkage::WardSquared,
        Linkage::WardRaw => OracleLinkage::WardRaw,
        Linkage::Average => OracleLinkage::Average,
        Linkage::Complete => OracleLinkage::Complete,
        Linkage::Single => OracleLinkage::Single,
    }
}

fn assert_matches_oracle(n: usize, data: &[f64], linkage: Linkage, tol: f64) {
    let got = agglomerate_condensed(n, data, linkage).unwrap();
    let want = naive_agglomerate(n, data, oracle_kind(linkage));
    for (m, (g, w)) in got.merges().iter().zip(&want).enumerate() {
        assert_eq!(
            (g.left.id(n), g.right.id(n), g.size),
            (w.left, w.right, w.size),
            "{linkage} merge {m}"
        );
        assert!(
            (g.height - w.height).abs() <= tol,
            "{linkage} merge {m}: {} vs {}",
            g.height,
            w.height
        );
    }
}

#[test]
fn matches_naive_oracle_on_perturbed_matrices() {
    let mut rng = rng(4);
    for _ in 0..20 {
        let n = rng.random_range(2..=25);
        let data = perturbed_integer_matrix(&mut rng, n, 10);
        for linkage in Linkage::ALL {
            assert_matches_oracle(n, &data, linkage, 1e-9);
        }
    }
}

#[test]
fn exact_tie_policy_for_min_max_linkages() {
    // Single and complete linkage values are original entries, so ties
    // compare exactly in both implementations.
    let mut rng = rng(8);
    for _ in 0..30 {
        let n = rng.random_range(2..=20);
        let data: Vec<f64> = (0..n * (n - 1) / 2).map(|_| f64::from(rng.random_range(1..=3))).collect();
        assert_matches_oracle(n, &data, Linkage::Single, 0.0);
        assert_matches_oracle(n, &data, Linkage::Complete, 0.0);
    }
}

fn matrix() -> impl Strategy<Value = (usize, Vec<f64>)> {
    (2usize..30).prop_flat_map(|n| (Just(n), prop::collection::vec(0.0f64..50.0, n * (n - 1) / 2)))
}

fn merge_order(d: &Dendrogram) -> Vec<(NodeRef, NodeRef)> {
    d.merges().iter().map(|m| (m.left, m.right)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn monotone_linkages_never_invert((n, data) in matrix()) {
        for linkage in Linkage::ALL.into_iter().filter(|l| l.is_monotone()) {
            let d = agglomerate_condensed(n, &data, linkage).unwrap();
            let h: Vec<f64> = d.heights().collect();
            prop_assert!(h.windows(2).all(|w| w[0] <= w[1]), "{} {:?}", linkage, h);
        }
    }

    #[test]
    fn merge_order_is_scale_invariant((n, data) in matrix(), factor in 0.1f64..20.0) {
        let scaled: Vec<f64> = data.iter().map(|d| d * factor).collect();
        for linkage in Linkage::ALL {
            let a = agglomerate_condensed(n, &data, linkage).unwrap();
            let b = agglomerate_condensed(n, &scaled, linkage).unwrap();
            prop_assert_eq!(merge_order(&a), merge_order(&b));
        }
    }

    #[test]
    fn cuts_have_k_clusters_and_refine((n, data) in matrix()) {
        let d = agglomerate_condensed(n, &data, Linkage::WardSquared).unwrap();
        let cuts: Vec<_> = (1..=n).map(|k| cut_tree(&d, k).unwrap()).collect();
        for (k, cut) in (1..=n).zip(&cuts) {
            prop_assert_eq!(cut.k(), k);
            let mut used = vec![false; k];
            for &l in cut.labels() {
                used[l] = true;
            }
            prop_assert!(used.iter().all(|&u| u));
            // First appearance order.
            let mut next = 0;
            for &l in cut.labels() {
                prop_assert!(l <= next);
                if l == next { next += 1; }
            }
        }
        for w in cuts.windows(2) {
            let (coarse, fine) = (&w[0], &w[1]);
            for i in 0..n {
                for j in 0..n {
                    if fine.labels()[i] == fine.labels()[j] {
                        prop_assert_eq!(coarse.labels()[i], coarse.labels()[j]);
                    }
                }
            }
        }
    }

    #[test]
    fn ari_matches_pair_counting(
        a in prop::collection::vec(0usize..4, 2..60),
        seed in any::<u64>(),
    ) {
        let mut r = rng(seed);
        let b: Vec<usize> = a.iter().map(|&x| if r.random_bool(0.3) { r.random_range(0..5) } else { x }).collect();
        let fast = adjusted_rand_index(&a, &b).unwrap();
        let slow = pair_count_ari(&a, &b);
        prop_assert!((fast - slow).abs() < 1e-9, "{} vs {}", fast, slow);
    }
}

#[test]
fn uniform_distances_first_merge_at_that_height() {
    for n in [2, 3, 7] {
        let data = vec![4.0; n * (n - 1) / 2];
        for linkage in Linkage::ALL {
            let d = agglomerate_condensed(n, &data, linkage).unwrap();
            assert_eq!(d.merges()[0].height, 4.0, "{linkage} n={n}");
        }
    }
}

#[test]
fn recovers_planted_groups_with_tight_lengths() {
    use pathmine::hac::agglomerate;
    use pathmine::seqdist::pairwise_distances;
    use pathmine::synth::{generate_corpus, SynthGroup, SynthSpec};

    for seed in [1, 2, 3] {
        let spec = SynthSpec {
            groups: [60, 40, 30]
                .iter()
                .enumerate()
                .map(|(g, &count)| SynthGroup {
                    student_count: count,
                    mean_length: 15.0,
                    length_sd: 1.5,
                    backbone: (g as u32 * 20..(g as u32 + 1) * 20).collect(),
                    deviation_rate: 0.15,
                })
                .collect(),
            alphabet_size: 60,
            seed,
        };
        let (table, truth) = generate_corpus(&spec).unwrap();
        let dendro = agglomerate(&pairwise_distances(&table).unwrap(), Linkage::WardSquared).unwrap();
        let found = cut_tree(&dendro, 3).unwrap();
        let ari = adjusted_rand_index(found.labels(), truth.labels()).unwrap();
        assert!(ari >= 0.9, "seed {seed}: ARI {ari}");
    }
}
