use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Separator between activity ids in the serialized sequence file.
pub const ACTIVITY_SEPARATOR: char = '|';

/// Time-ordered activity indices for one student. Repeats are kept.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct ActivitySequence(Vec<u32>);

impl ActivitySequence {
    pub fn new(items: Vec<u32>) -> Self {
        Self(items)
    }

    pub fn items(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<u32>> for ActivitySequence {
    fn from(items: Vec<u32>) -> Self {
        Self(items)
    }
}

impl AsRef<[u32]> for ActivitySequence {
    fn as_ref(&self) -> &[u32] {
        &self.0
    }
}

/// Dense index over the distinct activity ids of a table.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ActivityCatalog {
    labels: Vec<String>,
    index: HashMap<String, u32>,
}

impl ActivityCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the index for `label`, assigning the next free one on first sight.
    pub fn intern(&mut self, label: &str) -> u32 {
        if let Some(&idx) = self.index.get(label) {
            return idx;
        }
        let idx = u32::try_from(self.labels.len()).expect("activity catalog exceeds u32 range");
        self.labels.push(label.to_owned());
        self.index.insert(label.to_owned(), idx);
        idx
    }

    pub fn index_of(&self, label: &str) -> Option<u32> {
        self.index.get(label).copied()
    }

    pub fn label(&self, idx: u32) -> Option<&str> {
        self.labels.get(idx as usize).map(String::as_str)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Per-student activity sequences, sorted by student id, plus the catalog
/// that maps dense activity indices back to their original ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SequenceTable {
    entries: Vec<(String, ActivitySequence)>,
    catalog: ActivityCatalog,
}

impl SequenceTable {
    /// Builds a table from labeled sequences.
    ///
    /// Entries are sorted by student id and the catalog is assigned in
    /// first-appearance order over that sorted order. Duplicate or empty
    /// student ids and empty activity ids are rejected.
    pub fn from_labeled<I, S>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, Vec<S>)>,
        S: AsRef<str>,
    {
        let mut entries: Vec<(String, Vec<S>)> = entries.into_iter().collect();
        entries.sort_by(|a, b| a.0.cmp(&b.0));

        let mut seen = HashSet::with_capacity(entries.len());
        let mut catalog = ActivityCatalog::new();
        let mut out = Vec::with_capacity(entries.len());
        for (student, acts) in entries {
            if student.is_empty() {
                return Err(Error::Data("empty student id".into()));
            }
            if !seen.insert(student.clone()) {
                return Err(Error::Data(format!("duplicate student id {student:?}")));
            }
            let mut items = Vec::with_capacity(acts.len());
            for act in &acts {
                let act = act.as_ref();
                if act.is_empty() {
                    return Err(Error::Data(format!("empty activity id for student {student:?}")));
                }
                items.push(catalog.intern(act));
            }
            out.push((student, ActivitySequence(items)));
        }
        Ok(Self {
            entries: out,
            catalog,
        })
    }

    pub fn entries(&self) -> &[(String, ActivitySequence)] {
        &self.entries
    }

    pub fn catalog(&self) -> &ActivityCatalog {
        &self.catalog
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn student_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(s, _)| s.as_str())
    }

    pub fn sequences(&self) -> impl Iterator<Item = &ActivitySequence> {
        self.entries.iter().map(|(_, seq)| seq)
    }

    /// Sequence lengths in entry order.
    pub fn lengths(&self) -> Vec<usize> {
        self.sequences().map(ActivitySequence::len).collect()
    }

    /// Original activity ids of one entry's sequence.
    pub fn labels_of(&self, entry: usize) -> Vec<&str> {
        self.entries[entry]
            .1
            .items()
            .iter()
            .map(|&i| self.catalog.labels[i as usize].as_str())
            .collect()
    }

    /// Rebuilds a table over a subset of entries, re-densifying the catalog.
    pub(crate) fn select(&self, keep: impl IntoIterator<Item = usize>) -> Self {
        let labeled: Vec<(String, Vec<&str>)> = keep
            .into_iter()
            .map(|i| (self.entries[i].0.clone(), self.labels_of(i)))
            .collect();
        Self::from_labeled(labeled).expect("subset of a valid table is valid")
    }

    /// Writes the two-column `student_id,activity_ids` form, activity ids
    /// joined with `|`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        if let Some(bad) = self
            .catalog
            .labels
            .iter()
            .find(|l| l.contains(ACTIVITY_SEPARATOR))
        {
            return Err(Error::Data(format!(
                "activity id {bad:?} contains the sequence separator '{ACTIVITY_SEPARATOR}'"
            )));
        }
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["student_id", "activity_ids"])?;
        let mut joined = String::new();
        for (i, (student, _)) in self.entries.iter().enumerate() {
            joined.clear();
            for (k, label) in self.labels_of(i).into_iter().enumerate() {
                if k > 0 {
                    joined.push(ACTIVITY_SEPARATOR);
                }
                joined.push_str(label);
            }
            wtr.write_record([student.as_str(), joined.as_str()])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "student_id" || &headers[1] != "activity_ids" {
            return Err(Error::Data(format!(
                "sequence file header must be student_id,activity_ids, got {:?}",
                headers.iter().collect::<Vec<_>>()
            )));
        }
        let mut labeled = Vec::new();
        for row in rdr.records() {
            let row = row?;
            let acts: Vec<String> = if row[1].is_empty() {
                Vec::new()
            } else {
                row[1].split(ACTIVITY_SEPARATOR).map(str::to_owned).collect()
            };
            labeled.push((row[0].to_owned(), acts));
        }
        Self::from_labeled(labeled)
    }
}
