//! Reference implementations for tests.
//!
//! Everything here is written from the definitions, independently of the
//! optimized code in `pathmine-core`: exponential recursion for edit
//! distance, full linkage recomputation from the original dissimilarities
//! for agglomerative clustering, and pair counting for the adjusted Rand
//! index.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Edit distance by plain recursion over (insert, delete, substitute),
/// without memoization. Exponential; keep inputs short.
pub fn brute_edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    match (a.split_first(), b.split_first()) {
        (None, _) => b.len(),
        (_, None) => a.len(),
        (Some((x, ra)), Some((y, rb))) => {
            let substitute = brute_edit_distance(ra, rb) + usize::from(x != y);
            let delete = brute_edit_distance(ra, b) + 1;
            let insert = brute_edit_distance(a, rb) + 1;
            substitute.min(delete).min(insert)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleLinkage {
    WardSquared,
    WardRaw,
    Average,
    Complete,
    Single,
}

impl OracleLinkage {
    pub const ALL: [OracleLinkage; 5] = [
        OracleLinkage::WardSquared,
        OracleLinkage::WardRaw,
        OracleLinkage::Average,
        OracleLinkage::Complete,
        OracleLinkage::Single,
    ];
}

/// One merge: flat node ids (leaves `0..n`, merge `m` is `n + m`), with
/// `left < right`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleMerge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

/// Naive agglomeration: every step recomputes the linkage between all
/// pairs of current clusters directly from the original dissimilarities
/// and merges the minimum, ties to the smallest `(left, right)` ids.
///
/// Ward's criterion uses the closed form
/// `2 nA nB / (nA + nB) * (S_AB / (nA nB) - S_AA / (2 nA^2) - S_BB / (2 nB^2))`
/// where `S_XY` sums the (squared, for the squared variant) input
/// dissimilarities over ordered member pairs.
#[allow(clippy::needless_range_loop)]
pub fn naive_agglomerate(n: usize, condensed: &[f64], linkage: OracleLinkage) -> Vec<OracleMerge> {
    assert_eq!(condensed.len(), n * (n - 1) / 2);
    let mut full = vec![vec![0.0; n]; n];
    let mut k = 0;
    for i in 0..n {
        for j in i + 1..n {
            let d = condensed[k];
            let d = if linkage == OracleLinkage::WardSquared { d * d } else { d };
            full[i][j] = d;
            full[j][i] = d;
            k += 1;
        }
    }
    let cross = |a: &[usize], b: &[usize]| -> Vec<f64> {
        a.iter().flat_map(|&x| b.iter().map(move |&y| (x, y))).map(|(x, y)| full[x][y]).collect()
    };
    let within = |a: &[usize]| -> f64 { cross(a, a).iter().sum() };

    // (node id, members)
    let mut clusters: Vec<(usize, Vec<usize>)> = (0..n).map(|i| (i, vec![i])).collect();
    let mut merges = Vec::with_capacity(n - 1);
    for step in 0..n - 1 {
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for p in 0..clusters.len() {
            for q in p + 1..clusters.len() {
                let (a, b) = (&clusters[p].1, &clusters[q].1);
                let pairs = cross(a, b);
                let value = match linkage {
                    OracleLinkage::Single => pairs.iter().copied().fold(f64::INFINITY, f64::min),
                    OracleLinkage::Complete => pairs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    OracleLinkage::Average => pairs.iter().sum::<f64>() / pairs.len() as f64,
                    OracleLinkage::WardSquared | OracleLinkage::WardRaw => {
                        let (na, nb) = (a.len() as f64, b.len() as f64);
                        let s_ab: f64 = pairs.iter().sum();
                        2.0 * na * nb / (na + nb)
                            * (s_ab / (na * nb) - within(a) / (2.0 * na * na) - within(b) / (2.0 * nb * nb))
                    }
                };
                let (lo, hi) = {
                    let (x, y) = (clusters[p].0, clusters[q].0);
                    (x.min(y), x.max(y))
                };
                let better = match best {
                    None => true,
                    Some((v, l, h, _, _)) => value < v || (value == v && (lo, hi) < (l, h)),
                };
                if better {
                    best = Some((value, lo, hi, p, q));
                }
            }
        }
        let (value, lo, hi, p, q) = best.unwrap();
        let height = if linkage == OracleLinkage::WardSquared { value.max(0.0).sqrt() } else { value };
        let (_, mut members) = clusters.remove(q);
        let (_, first) = clusters.remove(p);
        members.extend(first);
        merges.push(OracleMerge {
            left: lo,
            right: hi,
            height,
            size: members.len(),
        });
        clusters.push((n + step, members));
    }
    merges
}

/// Adjusted Rand index from explicit pair counting over all item pairs.
pub fn pair_count_ari(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let (mut ss, mut sd, mut ds, mut dd) = (0f64, 0f64, 0f64, 0f64);
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            match (a[i] == a[j], b[i] == b[j]) {
                (true, true) => ss += 1.0,
                (true, false) => sd += 1.0,
                (false, true) => ds += 1.0,
                (false, false) => dd += 1.0,
            }
        }
    }
    let denom = (ss + sd) * (sd + dd) + (ss + ds) * (ds + dd);
    if denom == 0.0 {
        return 1.0;
    }
    2.0 * (ss * dd - sd * ds) / denom
}

/// Random sequence over `0..alphabet` with length in `0..=max_len`.
pub fn random_sequence<R: Rng>(rng: &mut R, max_len: usize, alphabet: u32) -> Vec<u32> {
    let len = rng.random_range(0..=max_len);
    (0..len).map(|_| rng.random_range(0..alphabet)).collect()
}

/// Condensed matrix of small integer distances in `1..=max`, each
/// perturbed by a distinct random amount below `1e-6`.
pub fn perturbed_integer_matrix<R: Rng>(rng: &mut R, n: usize, max: u32) -> Vec<f64> {
    (0..n * (n - 1) / 2)
        .map(|_| f64::from(rng.random_range(1..=max)) + rng.random_range(0.0..1e-6))
        .collect()
}

/// Random labeled corpus: `(student_id, activity ids)` pairs.
pub fn random_corpus<R: Rng>(
    rng: &mut R,
    students: usize,
    max_len: usize,
    alphabet: u32,
) -> Vec<(String, Vec<String>)> {
    (0..students)
        .map(|s| {
            let seq = random_sequence(rng, max_len, alphabet)
                .into_iter()
                .map(|a| format!("x{a}"))
                .collect();
            (format!("u{s:05}"), seq)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brute_force_basics() {
        assert_eq!(brute_edit_distance(b"kitten", b"sitting"), 3);
        assert_eq!(brute_edit_distance(b"abbcdee", b"abcde"), 2);
        assert_eq!(brute_edit_distance::<u8>(b"", b"xyz"), 3);
    }

    #[test]
    fn naive_ward_three_points() {
        let m = naive_agglomerate(3, &[1.0, 5.0, 6.0], OracleLinkage::WardSquared);
        assert_eq!((m[0].left, m[0].right), (0, 1));
        assert!((m[1].height - (121.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!((m[1].left, m[1].right, m[1].size), (2, 3, 3));
    }

    #[test]
    fn pair_count_ari_known() {
        assert!((pair_count_ari(&[0, 0, 1, 1], &[0, 0, 1, 2]) - 4.0 / 7.0).abs() < 1e-12);
        assert!((pair_count_ari(&[0, 0, 1, 1], &[0, 1, 0, 1]) + 0.5).abs() < 1e-12);
    }
}
