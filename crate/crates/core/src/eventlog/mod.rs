//! Event-log ingestion: parse delimited logs into [`EventRecord`]s, filter
//! them, and group them into per-student [`ActivitySequence`]s.

mod table;

pub use table::{ActivityCatalog, ActivitySequence, SequenceTable, ACTIVITY_SEPARATOR};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, BufReader, Read};

use chrono::{DateTime, NaiveDateTime};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Milliseconds since the Unix epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub fn millis(self) -> i64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TimestampFormat {
    #[default]
    #[serde(rename = "iso8601", alias = "iso-8601")]
    Iso8601,
    #[serde(rename = "epoch-millis", alias = "epoch-milliseconds")]
    EpochMillis,
    #[serde(rename = "epoch-seconds")]
    EpochSeconds,
}

impl TimestampFormat {
    pub fn parse(self, raw: &str) -> Option<Timestamp> {
        let raw = raw.trim();
        match self {
            TimestampFormat::Iso8601 => parse_iso8601(raw),
            TimestampFormat::EpochMillis => raw.parse::<i64>().ok().map(Timestamp),
            TimestampFormat::EpochSeconds => {
                if let Ok(secs) = raw.parse::<i64>() {
                    return secs.checked_mul(1000).map(Timestamp);
                }
                let secs: f64 = raw.parse().ok()?;
                let millis = (secs * 1000.0).round();
                (millis.is_finite() && millis.abs() < i64::MAX as f64).then_some(Timestamp(millis as i64))
            }
        }
    }
}

fn parse_iso8601(raw: &str) -> Option<Timestamp> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Some(Timestamp(dt.timestamp_millis()));
    }
    // Offset-less forms are taken as UTC.
    ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"]
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(raw, fmt).ok())
        .map(|dt| Timestamp(dt.and_utc().timestamp_millis()))
}

/// Source column names for each semantic field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnMap {
    pub student_id: String,
    pub activity_id: String,
    pub timestamp: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activity_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            student_id: "student_id".into(),
            activity_id: "activity_id".into(),
            timestamp: "timestamp".into(),
            event_type: None,
            activity_type: None,
            score: None,
            session_id: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub column_map: ColumnMap,
    pub event_type_filter: Option<BTreeSet<String>>,
    pub activity_type_filter: Option<BTreeSet<String>>,
    pub timestamp_format: TimestampFormat,
    pub sample_size: Option<usize>,
    pub sample_seed: u64,
    pub min_sequence_length: usize,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            column_map: ColumnMap::default(),
            event_type_filter: None,
            activity_type_filter: None,
            timestamp_format: TimestampFormat::default(),
            sample_size: None,
            sample_seed: 0,
            min_sequence_length: 1,
        }
    }
}

impl IngestConfig {
    pub fn validate(&self) -> Result<()> {
        let cm = &self.column_map;
        for (field, col) in [
            ("student_id", &cm.student_id),
            ("activity_id", &cm.activity_id),
            ("timestamp", &cm.timestamp),
        ] {
            if col.trim().is_empty() {
                return Err(Error::Config(format!("column_map.{field} must name a column")));
            }
        }
        if self.event_type_filter.is_some() && cm.event_type.is_none() {
            return Err(Error::Config(
                "event_type_filter is set but column_map.event_type is not".into(),
            ));
        }
        if self.activity_type_filter.is_some() && cm.activity_type.is_none() {
            return Err(Error::Config(
                "activity_type_filter is set but column_map.activity_type is not".into(),
            ));
        }
        if self.sample_size == Some(0) {
            return Err(Error::Config("sample_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// One row of the raw event log.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub student_id: String,
    pub activity_id: String,
    pub timestamp: Timestamp,
    pub event_type: Option<String>,
    pub activity_type: Option<String>,
    pub score: Option<f64>,
    pub session_id: Option<String>,
}

/// A row that could not be turned into an [`EventRecord`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    /// 1-based line number in the source (the header is line 1).
    pub line: u64,
    pub message: String,
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParsedLog {
    pub records: Vec<EventRecord>,
    pub errors: Vec<RowError>,
    /// Rows dropped by the event/activity type filters.
    pub filtered: usize,
}

impl ParsedLog {
    pub fn error_count(&self) -> usize {
        self.errors.len()
    }
}

struct ColumnIndex {
    student: usize,
    activity: usize,
    timestamp: usize,
    event_type: Option<usize>,
    activity_type: Option<usize>,
    score: Option<usize>,
    session: Option<usize>,
}

impl ColumnIndex {
    fn resolve(headers: &csv::StringRecord, map: &ColumnMap) -> Result<Self> {
        let find = |name: &str| {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::Config(format!("column {name:?} not found in header")))
        };
        let find_opt = |name: &Option<String>| name.as_deref().map(find).transpose();
        Ok(Self {
            student: find(&map.student_id)?,
            activity: find(&map.activity_id)?,
            timestamp: find(&map.timestamp)?,
            event_type: find_opt(&map.event_type)?,
            activity_type: find_opt(&map.activity_type)?,
            score: find_opt(&map.score)?,
            session: find_opt(&map.session_id)?,
        })
    }
}

fn detect_delimiter(header: &str) -> u8 {
    let tabs = header.matches('\t').count();
    let commas = header.matches(',').count();
    if tabs > commas {
        b'\t'
    } else {
        b','
    }
}

/// Parses a header-bearing comma- or tab-delimited event log.
///
/// Rows rejected by the type filters are dropped silently and counted in
/// [`ParsedLog::filtered`]. Rows with missing or malformed required fields
/// are collected in [`ParsedLog::errors`] and parsing continues. A header
/// lacking a mapped column is a configuration error.
pub fn parse_event_log<R: Read>(source: R, config: &IngestConfig) -> Result<ParsedLog> {
    config.validate()?;

    let mut reader = BufReader::new(source);
    let mut header = String::new();
    reader.read_line(&mut header)?;
    if header.trim().is_empty() {
        return Err(Error::Config("event log has no header line".into()));
    }
    let delimiter = detect_delimiter(&header);

    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .flexible(true)
        .from_reader(std::io::Cursor::new(header.into_bytes()).chain(reader));
    let headers = rdr.headers()?.clone();
    let cols = ColumnIndex::resolve(&headers, &config.column_map)?;

    let mut out = ParsedLog::default();
    let mut row = csv::StringRecord::new();
    loop {
        let line = rdr.position().line();
        match rdr.read_record(&mut row) {
            Ok(true) => {}
            Ok(false) => break,
            Err(err) if err.is_io_error() => return Err(err.into()),
            Err(err) => {
                out.errors.push(RowError {
                    line: err.position().map_or(line, |p| p.line()),
                    message: err.to_string(),
                });
                continue;
            }
        }
        let line = row.position().map_or(line, |p| p.line());
        let field = |idx: usize| row.get(idx).map(str::trim).unwrap_or("");
        let optional = |idx: Option<usize>| {
            idx.map(field)
                .filter(|v| !v.is_empty())
                .map(str::to_owned)
        };

        let event_type = optional(cols.event_type);
        let activity_type = optional(cols.activity_type);
        if !passes(&config.event_type_filter, &event_type)
            || !passes(&config.activity_type_filter, &activity_type)
        {
            out.filtered += 1;
            continue;
        }

        match build_record(&cols, &field, config.timestamp_format) {
            Ok(mut rec) => {
                rec.event_type = event_type;
                rec.activity_type = activity_type;
                rec.session_id = optional(cols.session);
                out.records.push(rec);
            }
            Err(message) => out.errors.push(RowError { line, message }),
        }
    }
    Ok(out)
}

fn passes(filter: &Option<BTreeSet<String>>, value: &Option<String>) -> bool {
    match filter {
        None => true,
        Some(accepted) => value.as_ref().is_some_and(|v| accepted.contains(v)),
    }
}

fn build_record<'a>(
    cols: &ColumnIndex,
    field: &impl Fn(usize) -> &'a str,
    format: TimestampFormat,
) -> std::result::Result<EventRecord, String> {
    let student_id = field(cols.student);
    if student_id.is_empty() {
        return Err("empty student_id".into());
    }
    let activity_id = field(cols.activity);
    if activity_id.is_empty() {
        return Err("empty activity_id".into());
    }
    let raw_ts = field(cols.timestamp);
    let timestamp = format
        .parse(raw_ts)
        .ok_or_else(|| format!("unparseable timestamp {raw_ts:?}"))?;
    let score = match cols.score.map(field).filter(|s| !s.is_empty()) {
        None => None,
        Some(raw) => match raw.parse::<f64>() {
            Ok(v) if (0.0..=1.0).contains(&v) => Some(v),
            _ => return Err(format!("score {raw:?} is not a number in [0, 1]")),
        },
    };
    Ok(EventRecord {
        student_id: student_id.to_owned(),
        activity_id: activity_id.to_owned(),
        timestamp,
        event_type: None,
        activity_type: None,
        score,
        session_id: None,
    })
}

/// Groups records into per-student sequences ordered by timestamp, with
/// ties kept in input order. Students shorter than
/// `config.min_sequence_length` are dropped.
pub fn extract_sequences(records: &[EventRecord], config: &IngestConfig) -> SequenceTable {
    let mut by_student: BTreeMap<&str, Vec<(Timestamp, usize)>> = BTreeMap::new();
    for (rank, rec) in records.iter().enumerate() {
        by_student
            .entry(rec.student_id.as_str())
            .or_default()
            .push((rec.timestamp, rank));
    }
    let labeled = by_student
        .into_iter()
        .filter(|(_, events)| events.len() >= config.min_sequence_length)
        .map(|(student, mut events)| {
            events.sort_unstable();
            let acts: Vec<&str> = events
                .iter()
                .map(|&(_, rank)| records[rank].activity_id.as_str())
                .collect();
            (student.to_owned(), acts)
        });
    SequenceTable::from_labeled(labeled).expect("records carry non-empty, unique-per-group ids")
}

/// Uniformly samples `n` students without replacement.
///
/// When `n` is at least the number of entries the table is returned as is.
pub fn sample_students(table: &SequenceTable, n: usize, seed: u64) -> Result<SequenceTable> {
    if n == 0 {
        return Err(Error::Parameter("sample size must be at least 1".into()));
    }
    if n >= table.len() {
        return Ok(table.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, table.len(), n).into_vec();
    picked.sort_unstable();
    Ok(table.select(picked))
}

/// Parse, extract and (optionally) sample in one step.
pub fn ingest<R: Read>(source: R, config: &IngestConfig) -> Result<(SequenceTable, ParsedLog)> {
    let parsed = parse_event_log(source, config)?;
    let mut table = extract_sequences(&parsed.records, config);
    if let Some(n) = config.sample_size {
        table = sample_students(&table, n, config.sample_seed)?;
    }
    Ok((table, parsed))
}
