use pathmine::eventlog::SequenceTable;
use pathmine::seqdist::{edit_distance, pairwise_distances, pairwise_distances_of, CondensedDistanceMatrix};
use pathmine_testkit::{brute_edit_distance, random_sequence, rng};
use proptest::prelude::*;

#[test]
fn dp_matches_recursive_oracle() {
    let mut rng = rng(0x5eed);
    for _ in 0..500 {
        let a = random_sequence(&mut rng, 7, 4);
        let b = random_sequence(&mut rng, 7, 4);
        assert_eq!(edit_distance(&a, &b), brute_edit_distance(&a, &b), "{a:?} vs {b:?}");
    }
}

fn seq(max_len: usize, alphabet: u32) -> impl Strategy<Value = Vec<u32>> {
    prop::collection::vec(0..alphabet, 0..=max_len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn metric_axioms(x in seq(30, 20), y in seq(30, 20), z in seq(30, 20)) {
        let (dxy, dyz, dxz) = (edit_distance(&x, &y), edit_distance(&y, &z), edit_distance(&x, &z));
        prop_assert_eq!(edit_distance(&x, &x), 0);
        prop_assert_eq!(dxy, edit_distance(&y, &x));
        prop_assert!(dxz <= dxy + dyz);
        prop_assert!(x.len().abs_diff(y.len()) <= dxy);
        prop_assert!(dxy <= x.len().max(y.len()));
        prop_assert_eq!(dxy == 0, x == y);
    }

    #[test]
    fn small_alphabet_zero_iff_equal(x in seq(6, 2), y in seq(6, 2)) {
        prop_assert_eq!(edit_distance(&x, &y) == 0, x == y);
    }
}

fn random_table(n: usize, seed: u64) -> SequenceTable {
    let mut rng = rng(seed);
    SequenceTable::from_labeled((0..n).map(|i| {
        let s: Vec<String> = random_sequence(&mut rng, 25, 12)
            .into_iter()
            .map(|a| format!("act{a}"))
            .collect();
        (format!("s{i:04}"), s)
    }))
    .unwrap()
}

#[test]
fn pairwise_matches_serial_recompute() {
    let table = random_table(200, 17);
    let m = pairwise_distances(&table).unwrap();
    let seqs: Vec<&[u32]> = table.sequences().map(|s| s.items()).collect();
    let mut k = 0;
    for i in 0..seqs.len() {
        for j in i + 1..seqs.len() {
            assert_eq!(m.data()[k], edit_distance(seqs[i], seqs[j]) as f32, "pair ({i},{j})");
            k += 1;
        }
    }
    assert_eq!(k, m.data().len());
}

#[test]
fn bit_identical_across_thread_counts() {
    let table = random_table(300, 99);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| pairwise_distances(&table).unwrap())
    };
    let one = run(1);
    let mut bytes_one = Vec::new();
    one.write_binary(&mut bytes_one).unwrap();
    for threads in [2, 3, 8] {
        let mut bytes = Vec::new();
        run(threads).write_binary(&mut bytes).unwrap();
        assert_eq!(bytes, bytes_one, "{threads} threads");
    }
}

#[test]
fn chunk_boundaries_are_covered() {
    // More pairs than one work unit, with a prime item count so chunk
    // starts land mid-row.
    let seqs: Vec<Vec<u32>> = (0..211u32).map(|i| vec![i % 5; (i % 9) as usize]).collect();
    let m = pairwise_distances_of(&seqs).unwrap();
    for i in 0..seqs.len() {
        for j in i + 1..seqs.len() {
            assert_eq!(m.get(i, j), edit_distance(&seqs[i], &seqs[j]) as f32);
        }
    }
}

#[test]
fn text_export_lists_every_pair() {
    let m = pairwise_distances_of(&[vec![1u32], vec![1, 2], vec![]]).unwrap();
    let mut buf = Vec::new();
    m.write_text(&mut buf).unwrap();
    assert_eq!(
        String::from_utf8(buf).unwrap(),
        "i,j,distance\n0,1,1\n0,2,1\n1,2,2\n"
    );
    let round = CondensedDistanceMatrix::from_condensed(3, m.data().to_vec()).unwrap();
    assert_eq!(round, m);
}
