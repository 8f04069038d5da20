//! Edit distance between activity sequences and the condensed pairwise
//! distance matrix over a [`SequenceTable`].

use std::io::{Read, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eventlog::SequenceTable;

/// Levenshtein distance with unit insert/delete/substitute costs, over any
/// alphabet with equality.
///
/// Uses the classic dynamic program with two rows of memory.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = Vec::new();
    let mut cur = Vec::new();
    edit_distance_with(a, b, &mut prev, &mut cur)
}

fn edit_distance_with<T: PartialEq>(
    a: &[T],
    b: &[T],
    prev: &mut Vec<u32>,
    cur: &mut Vec<u32>,
) -> usize {
    // Iterate over the longer sequence so the rows are as short as possible.
    let (a, b) = if a.len() < b.len() { (b, a) } else { (a, b) };
    if b.is_empty() {
        return a.len();
    }

    prev.clear();
    prev.extend(0..=b.len() as u32);
    cur.clear();
    cur.resize(b.len() + 1, 0);

    for (i, ai) in a.iter().enumerate() {
        cur[0] = i as u32 + 1;
        for (j, bj) in b.iter().enumerate() {
            let substitute = prev[j] + u32::from(ai != bj);
            let delete = prev[j + 1] + 1;
            let insert = cur[j] + 1;
            cur[j + 1] = substitute.min(delete).min(insert);
        }
        std::mem::swap(prev, cur);
    }
    prev[b.len()] as usize
}

/// Symmetric zero-diagonal distance matrix stored as its upper triangle,
/// row-major over pairs `(i, j)` with `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct CondensedDistanceMatrix {
    n: usize,
    data: Vec<f32>,
}

/// Number of pairs for `n` items.
pub fn condensed_len(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Offset of pair `(i, j)`, `i < j < n`, in condensed storage.
#[inline]
pub fn condensed_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    // Rows before i hold (n-1) + (n-2) + ... + (n-i) pairs.
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

/// Inverse of [`condensed_index`].
pub fn condensed_pair(n: usize, k: usize) -> (usize, usize) {
    debug_assert!(k < condensed_len(n));
    // Closed form for the row, then correct for floating-point drift.
    let nf = n as f64;
    let kf = k as f64;
    let mut i = ((2.0 * nf - 1.0 - ((2.0 * nf - 1.0).powi(2) - 8.0 * kf).max(0.0).sqrt()) / 2.0)
        .floor() as usize;
    i = i.min(n - 2);
    while i > 0 && condensed_index(n, i, i + 1) > k {
        i -= 1;
    }
    while i + 2 < n && condensed_index(n, i + 1, i + 2) <= k {
        i += 1;
    }
    (i, k - condensed_index(n, i, i + 1) + i + 1)
}

const MAGIC: &[u8; 4] = b"PMDM";
const FORMAT_VERSION: u16 = 1;
/// Byte length of the binary header: magic, version, n.
pub const HEADER_LEN: usize = 4 + 2 + 8;

impl CondensedDistanceMatrix {
    /// Wraps condensed data for `n` items. Entries must be finite and non-negative.
    pub fn from_condensed(n: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != condensed_len(n) {
            return Err(Error::Data(format!(
                "condensed matrix for n={n} needs {} entries, got {}",
                condensed_len(n),
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Data(format!("invalid distance entry {bad}")));
        }
        Ok(Self { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f32 {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => 0.0,
            std::cmp::Ordering::Less => self.data[condensed_index(self.n, i, j)],
            std::cmp::Ordering::Greater => self.data[condensed_index(self.n, j, i)],
        }
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.n as u64).to_le_bytes())?;
        let mut buf = Vec::with_capacity(64 * 1024);
        for chunk in self.data.chunks(16 * 1024) {
            buf.clear();
            for v in chunk {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; HEADER_LEN];
        r.read_exact(&mut header)
            .map_err(|e| Error::Data(format!("truncated distance matrix header: {e}")))?;
        if &header[..4] != MAGIC {
            return Err(Error::Data("not a PMDM distance matrix file".into()));
        }
        let version = u16::from_le_bytes([header[4], header[5]]);
        if version != FORMAT_VERSION {
            return Err(Error::Data(format!("unsupported PMDM version {version}")));
        }
        let n = u64::from_le_bytes(header[6..14].try_into().unwrap());
        let n = usize::try_from(n).map_err(|_| Error::Data(format!("matrix size {n} too large")))?;
        let len = condensed_len(n);
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != len * 4 {
            return Err(Error::Data(format!(
                "PMDM payload holds {} bytes, expected {}",
                bytes.len(),
                len * 4
            )));
        }
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::from_condensed(n, data)
    }

    /// Debug export: one `i,j,distance` row per pair.
    pub fn write_text<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["i", "j", "distance"])?;
        for i in 0..self.n {
            for j in i + 1..self.n {
                wtr.write_record([i.to_string(), j.to_string(), self.get(i, j).to_string()])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Pairs per parallel work unit.
const CHUNK: usize = 1 << 14;

/// Edit distances between all pairs of sequences in the table.
///
/// Work is split into contiguous ranges of the condensed index so each
/// worker writes a disjoint slice; the result does not depend on the
/// thread count.
pub fn pairwise_distances(table: &SequenceTable) -> Result<CondensedDistanceMatrix> {
    let seqs: Vec<&[u32]> = table.sequences().map(|s| s.items()).collect();
    pairwise_distances_of(&seqs)
}

pub fn pairwise_distances_of<S: AsRef<[u32]> + Sync>(seqs: &[S]) -> Result<CondensedDistanceMatrix> {
    let n = seqs.len();
    if n < 2 {
        return Err(Error::Size(format!(
            "pairwise distances need at least 2 sequences, got {n}"
        )));
    }
    let mut data = vec![0f32; condensed_len(n)];
    data.par_chunks_mut(CHUNK)
        .enumerate()
        .for_each_init(
            || (Vec::new(), Vec::new()),
            |(prev, cur), (chunk_idx, out)| {
                let (mut i, mut j) = condensed_pair(n, chunk_idx * CHUNK);
                for slot in out.iter_mut() {
                    let d = edit_distance_with(seqs[i].as_ref(), seqs[j].as_ref(), prev, cur);
                    *slot = d as f32;
                    j += 1;
                    if j == n {
                        i += 1;
                        j = i + 1;
                    }
                }
            },
        );
    Ok(CondensedDistanceMatrix { n, data })
}
