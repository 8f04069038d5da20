//! Synthetic event logs with planted cluster structure.
//!
//! Each group walks its own backbone of activities; at every step the
//! walker substitutes a uniformly random activity with probability
//! `deviation_rate`. Sequence lengths come from a normal distribution
//! rounded to integers and truncated below at 1. The parent normal is
//! calibrated so that the *truncated* lengths have the requested mean and
//! standard deviation.

use std::io::Write;

use chrono::DateTime;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eventlog::SequenceTable;
use crate::hac::ClusterAssignment;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthGroup {
    pub student_count: usize,
    pub mean_length: f64,
    pub length_sd: f64,
    /// Activity indices (each `< alphabet_size`) walked in order, cyclically.
    pub backbone: Vec<u32>,
    pub deviation_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub groups: Vec<SynthGroup>,
    pub alphabet_size: u32,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Parameter(msg));
        if self.groups.is_empty() {
            return bad("synthetic spec has no groups".into());
        }
        if self.alphabet_size == 0 {
            return bad("alphabet_size must be positive".into());
        }
        for (g, group) in self.groups.iter().enumerate() {
            if group.student_count == 0 {
                return bad(format!("group {g}: student_count must be positive"));
            }
            if !(group.mean_length.is_finite() && group.mean_length >= 1.0) {
                return bad(format!("group {g}: mean_length must be at least 1"));
            }
            if !(group.length_sd.is_finite() && group.length_sd >= 0.0) {
                return bad(format!("group {g}: length_sd must be non-negative"));
            }
            if !(0.0..=1.0).contains(&group.deviation_rate) {
                return bad(format!("group {g}: deviation_rate must lie in [0, 1]"));
            }
            if group.backbone.is_empty() {
                return bad(format!("group {g}: backbone is empty"));
            }
            if let Some(a) = group.backbone.iter().find(|&&a| a >= self.alphabet_size) {
                return bad(format!("group {g}: backbone activity {a} outside the alphabet"));
            }
        }
        Ok(())
    }

    pub fn student_count(&self) -> usize {
        self.groups.iter().map(|g| g.student_count).sum()
    }
}

/// Label of activity `idx`, zero-padded so lexicographic order matches
/// numeric order.
pub fn activity_label(idx: u32, alphabet_size: u32) -> String {
    let width = digits(alphabet_size.saturating_sub(1) as usize);
    format!("a{idx:0width$}")
}

pub fn student_label(idx: usize, total: usize) -> String {
    let width = digits(total.saturating_sub(1));
    format!("s{idx:0width$}")
}

fn digits(mut v: usize) -> usize {
    let mut d = 1;
    while v >= 10 {
        v /= 10;
        d += 1;
    }
    d
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Distribution of `max(1, round(X))`-style lengths: `P(L = k)` for
/// `k >= 1` is the normal mass on `[k - 0.5, k + 0.5)`, renormalized.
#[derive(Debug, Clone)]
struct LengthModel {
    /// `pmf[i]` is the probability of length `i + 1`.
    pmf: Vec<f64>,
}

impl LengthModel {
    fn from_parent(mu: f64, sigma: f64) -> Option<Self> {
        let upper = (mu + 12.0 * sigma).ceil().max(1.0) as usize;
        let tail = 1.0 - normal_cdf((0.5 - mu) / sigma);
        if tail.is_nan() || tail <= 1e-12 {
            return None;
        }
        let pmf = (1..=upper)
            .map(|k| {
                let k = k as f64;
                (normal_cdf((k + 0.5 - mu) / sigma) - normal_cdf((k - 0.5 - mu) / sigma)) / tail
            })
            .collect();
        Some(Self { pmf })
    }

    fn moments(&self) -> (f64, f64) {
        let mass: f64 = self.pmf.iter().sum();
        let mean = self
            .pmf
            .iter()
            .enumerate()
            .map(|(i, p)| (i + 1) as f64 * p)
            .sum::<f64>()
            / mass;
        let var = self
            .pmf
            .iter()
            .enumerate()
            .map(|(i, p)| ((i + 1) as f64 - mean).powi(2) * p)
            .sum::<f64>()
            / mass;
        (mean, var.sqrt())
    }

    /// Finds parent normal parameters whose truncated, rounded lengths
    /// have the target mean and standard deviation.
    fn calibrated(mean: f64, sd: f64) -> Result<Self> {
        let (mut mu, mut sigma) = (mean, sd.max(1e-3));
        for _ in 0..500 {
            let model = Self::from_parent(mu, sigma).ok_or_else(|| infeasible(mean, sd))?;
            let (m, s) = model.moments();
            if (m - mean).abs() < 1e-7 && (s - sd).abs() < 1e-7 {
                return Ok(model);
            }
            mu += mean - m;
            sigma = (sigma * sd / s.max(1e-9)).clamp(1e-3, 1e6);
        }
        Err(infeasible(mean, sd))
    }
}

fn infeasible(mean: f64, sd: f64) -> Error {
    Error::Parameter(format!(
        "no length distribution on 1, 2, ... has mean {mean} and sd {sd}"
    ))
}

enum LengthSampler {
    Fixed(usize),
    Table(WeightedIndex<f64>),
}

impl LengthSampler {
    fn new(group: &SynthGroup) -> Result<Self> {
        if group.length_sd == 0.0 {
            return Ok(LengthSampler::Fixed(group.mean_length.round().max(1.0) as usize));
        }
        let model = LengthModel::calibrated(group.mean_length, group.length_sd)?;
        let index = WeightedIndex::new(&model.pmf)
            .map_err(|e| Error::Parameter(format!("length distribution: {e}")))?;
        Ok(LengthSampler::Table(index))
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        match self {
            LengthSampler::Fixed(len) => *len,
            LengthSampler::Table(index) => index.sample(rng) + 1,
        }
    }
}

/// Generates the corpus and the ground-truth group of every student.
///
/// Student `i` (over all groups, in order) draws from its own random
/// stream derived from `(seed, i)`, so output does not depend on
/// generation order.
pub fn generate_corpus(spec: &SynthSpec) -> Result<(SequenceTable, ClusterAssignment)> {
    spec.validate()?;
    let total = spec.student_count();
    let labels: Vec<String> = (0..spec.alphabet_size)
        .map(|a| activity_label(a, spec.alphabet_size))
        .collect();

    let mut entries = Vec::with_capacity(total);
    let mut truth = Vec::with_capacity(total);
    let mut student = 0usize;
    for (g, group) in spec.groups.iter().enumerate() {
        let lengths = LengthSampler::new(group)?;
        for _ in 0..group.student_count {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(student as u64);
            let len = lengths.sample(&mut rng);
            let walk: Vec<&str> = (0..len)
                .map(|step| {
                    let act = if group.deviation_rate > 0.0 && rng.random_bool(group.deviation_rate) {
                        rng.random_range(0..spec.alphabet_size)
                    } else {
                        group.backbone[step % group.backbone.len()]
                    };
                    labels[act as usize].as_str()
                })
                .collect();
            entries.push((student_label(student, total), walk));
            truth.push(g);
            student += 1;
        }
    }
    let table = SequenceTable::from_labeled(entries)?;
    Ok((table, ClusterAssignment::from_raw_labels(&truth)))
}

/// First synthetic timestamp, 2016-03-01T00:00:00Z.
const BASE_EPOCH_SECONDS: i64 = 1_456_790_400;

/// Writes the table as an event log (`student_id,activity_id,timestamp,event_type`)
/// with one `submit` event per activity, one second apart per student.
pub fn write_event_log<W: Write>(table: &SequenceTable, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["student_id", "activity_id", "timestamp", "event_type"])?;
    for (i, student) in table.student_ids().enumerate() {
        for (t, act) in table.labels_of(i).into_iter().enumerate() {
            let ts = DateTime::from_timestamp(BASE_EPOCH_SECONDS + t as i64, 0)
                .expect("synthetic timestamps are in range")
                .format("%Y-%m-%dT%H:%M:%SZ")
                .to_string();
            wtr.write_record([student, act, ts.as_str(), "submit"])?;
        }
    }
    wtr.flush()?;
    Ok(())
}
