//! Termination-code table mapping raw reason codes to failure categories.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Outcome category of one climber on one expedition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FailureCause {
    Success,
    Altitude,
    Logistics,
    Fatigue,
    Accident,
    Other,
}

impl FailureCause {
    pub const ALL: [FailureCause; 6] = [
        FailureCause::Success,
        FailureCause::Altitude,
        FailureCause::Logistics,
        FailureCause::Fatigue,
        FailureCause::Accident,
        FailureCause::Other,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FailureCause::Success => "success",
            FailureCause::Altitude => "altitude",
            FailureCause::Logistics => "logistics",
            FailureCause::Fatigue => "fatigue",
            FailureCause::Accident => "accident",
            FailureCause::Other => "other",
        }
    }
}

impl fmt::Display for FailureCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FailureCause {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FailureCause::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown failure cause `{s}`")))
    }
}

const DEFAULT_CODES: &[(&str, FailureCause)] = &[
    ("success", FailureCause::Success),
    ("summit", FailureCause::Success),
    ("success main peak", FailureCause::Success),
    ("success foresummit", FailureCause::Success),
    ("success claimed", FailureCause::Success),
    ("ams", FailureCause::Altitude),
    ("ams symptoms", FailureCause::Altitude),
    ("acute mountain sickness", FailureCause::Altitude),
    ("breathing problems", FailureCause::Altitude),
    ("frostbite", FailureCause::Altitude),
    ("snowblindness", FailureCause::Altitude),
    ("snow blindness", FailureCause::Altitude),
    ("coldness", FailureCause::Altitude),
    ("lack of supplies", FailureCause::Logistics),
    ("lack of support", FailureCause::Logistics),
    ("support problems", FailureCause::Logistics),
    ("equipment problems", FailureCause::Logistics),
    ("o2 system failure", FailureCause::Logistics),
    ("too late in day", FailureCause::Logistics),
    ("too slow", FailureCause::Logistics),
    ("too late in day or too slow", FailureCause::Logistics),
    ("insufficient time", FailureCause::Logistics),
    (
        "insufficient time left for expedition",
        FailureCause::Logistics,
    ),
    ("exhaustion", FailureCause::Fatigue),
    ("fatigue", FailureCause::Fatigue),
    ("weakness", FailureCause::Fatigue),
    ("lack of motivation", FailureCause::Fatigue),
    ("death", FailureCause::Accident),
    ("injury", FailureCause::Accident),
    ("death or injury", FailureCause::Accident),
    ("accident", FailureCause::Accident),
    ("illness", FailureCause::Accident),
];

/// Lowercases and collapses every run of non-alphanumeric characters to one space.
fn normalize_code(code: &str) -> String {
    code.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Editable lookup table from termination code to [`FailureCause`].
///
/// Lookups are case-insensitive and ignore punctuation, so `"AMS-symptoms"`
/// and `"ams symptoms"` resolve to the same entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeMap {
    entries: BTreeMap<String, FailureCause>,
}

impl Default for CodeMap {
    fn default() -> Self {
        let mut map = CodeMap::empty();
        for (code, cause) in DEFAULT_CODES {
            map.insert(code, *cause);
        }
        map
    }
}

impl CodeMap {
    pub fn empty() -> Self {
        CodeMap {
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, code: &str, cause: FailureCause) {
        self.entries.insert(normalize_code(code), cause);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, FailureCause)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn classify(&self, termination_code: &str) -> FailureCause {
        self.entries
            .get(&normalize_code(termination_code))
            .copied()
            .unwrap_or(FailureCause::Other)
    }

    /// Reads a `termination_code,cause` table. Entries override nothing; the
    /// result contains only what the file lists.
    pub fn from_csv<R: Read>(reader: R, source_name: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingColumn {
                    source_name: source_name.to_string(),
                    column: name.to_string(),
                })
        };
        let code_col = col("termination_code")?;
        let cause_col = col("cause")?;
        let mut map = CodeMap::empty();
        for (i, row) in rdr.records().enumerate() {
            let row = row?;
            let cause: FailureCause = row
                .get(cause_col)
                .unwrap_or_default()
                .parse()
                .map_err(|e| Error::Config(format!("{source_name} row {}: {e}", i + 2)))?;
            map.insert(row.get(code_col).unwrap_or_default(), cause);
        }
        Ok(map)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["termination_code", "cause"])?;
        for (code, cause) in self.iter() {
            w.write_record([code, cause.as_str()])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv writer emits utf-8"))
    }
}

/// Maps a raw termination code to its category; unmapped codes fall back to `Other`.
pub fn classify_failure(termination_code: &str, code_map: &CodeMap) -> FailureCause {
    code_map.classify(termination_code)
}
