//! CSV ingestion for the expedition and member exports.

use std::io::Read;
use std::str::FromStr;

use csv::StringRecord;
use serde::{Deserialize, Serialize};

use super::{ClimberRecord, ExpeditionRecord, Sex};
use crate::error::{Error, Result};

pub const EXPEDITION_COLUMNS: [&str; 9] = [
    "exp_id",
    "peak_id",
    "peak_height_m",
    "year",
    "days_to_summit",
    "camps_above_bc",
    "n_members",
    "n_hired",
    "any_death",
];

pub const MEMBER_COLUMNS: [&str; 10] = [
    "climber_id",
    "exp_id",
    "age",
    "sex",
    "nationality",
    "o2_ascent",
    "o2_descent",
    "hired",
    "summited",
    "termination_code",
];

pub const MIN_AGE: u32 = 10;
pub const MAX_AGE: u32 = 100;

/// A row-level problem found while ingesting or linking records.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub source: String,
    /// 1-based line number in the source file (header is line 1), 0 when not row-bound.
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}: {}", self.source, self.line, self.message)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    pub diagnostics: Vec<Diagnostic>,
}

struct Columns {
    index: Vec<usize>,
}

impl Columns {
    fn resolve(headers: &StringRecord, wanted: &[&str], source_name: &str) -> Result<Self> {
        let index = wanted
            .iter()
            .map(|name| {
                headers
                    .iter()
                    .position(|h| h.trim().eq_ignore_ascii_case(name))
                    .ok_or_else(|| Error::MissingColumn {
                        source_name: source_name.to_string(),
                        column: name.to_string(),
                    })
            })
            .collect::<Result<_>>()?;
        Ok(Columns { index })
    }
}

/// Typed accessor over one CSV row; each getter reports the offending column.
struct Row<'a> {
    record: &'a StringRecord,
    columns: &'a Columns,
    names: &'a [&'a str],
}

impl Row<'_> {
    fn raw(&self, k: usize) -> &str {
        self.record.get(self.columns.index[k]).unwrap_or("").trim()
    }

    fn text(&self, k: usize) -> String {
        self.raw(k).to_string()
    }

    fn required_text(&self, k: usize) -> Result<String, String> {
        let v = self.raw(k);
        if v.is_empty() {
            Err(format!("empty {}", self.names[k]))
        } else {
            Ok(v.to_string())
        }
    }

    fn number<N: FromStr>(&self, k: usize) -> Result<N, String> {
        let v = self.raw(k);
        v.parse()
            .map_err(|_| format!("unparseable {} `{}`", self.names[k], v))
    }

    fn optional_number<N: FromStr>(&self, k: usize) -> Result<Option<N>, String> {
        if self.raw(k).is_empty() {
            Ok(None)
        } else {
            self.number(k).map(Some)
        }
    }

    /// Non-negative integer; a leading minus sign is reported as an invariant violation.
    fn count(&self, k: usize) -> Result<u32, String> {
        let v = self.raw(k);
        if let Ok(n) = v.parse::<i64>() {
            if n < 0 {
                return Err(format!("{} must be >= 0, got {}", self.names[k], n));
            }
        }
        self.number(k)
    }

    fn optional_flag(&self, k: usize) -> Result<Option<bool>, String> {
        let v = self.raw(k);
        match v.to_ascii_lowercase().as_str() {
            "" => Ok(None),
            "1" | "true" | "t" | "y" | "yes" => Ok(Some(true)),
            "0" | "false" | "f" | "n" | "no" => Ok(Some(false)),
            _ => Err(format!("unparseable {} `{}`", self.names[k], v)),
        }
    }

    fn flag(&self, k: usize) -> Result<bool, String> {
        self.optional_flag(k)?
            .ok_or_else(|| format!("empty {}", self.names[k]))
    }
}

fn read_rows<T, R: Read>(
    reader: R,
    source_name: &str,
    names: &[&str],
    mut build: impl FnMut(&Row<'_>) -> Result<T, String>,
) -> Result<Parsed<T>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let columns = Columns::resolve(&headers, names, source_name)?;
    let mut records = Vec::new();
    let mut diagnostics = Vec::new();
    for result in rdr.records() {
        let record = match result {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line() as usize);
                if matches!(e.kind(), csv::ErrorKind::Io(_)) {
                    return Err(e.into());
                }
                diagnostics.push(Diagnostic {
                    source: source_name.to_string(),
                    line,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let line = record.position().map_or(0, |p| p.line() as usize);
        let row = Row {
            record: &record,
            columns: &columns,
            names,
        };
        match build(&row) {
            Ok(r) => records.push(r),
            Err(message) => diagnostics.push(Diagnostic {
                source: source_name.to_string(),
                line,
                message,
            }),
        }
    }
    Ok(Parsed {
        records,
        diagnostics,
    })
}

/// Parses `expeditions.csv`. Malformed rows become diagnostics; a missing column is an error.
pub fn parse_expeditions<R: Read>(
    reader: R,
    source_name: &str,
) -> Result<Parsed<ExpeditionRecord>> {
    read_rows(reader, source_name, &EXPEDITION_COLUMNS, |row| {
        Ok(ExpeditionRecord {
            expedition_id: row.required_text(0)?,
            peak_id: row.required_text(1)?,
            peak_height_m: row.count(2)?,
            year: row.number(3)?,
            days_to_summit: row.count(4)?,
            camps_above_bc: row.count(5)?,
            n_members: row.count(6)?,
            n_hired: row.count(7)?,
            any_death: row.flag(8)?,
            members: Vec::new(),
        })
    })
}

/// Parses `members.csv`. Optional fields (age, oxygen flags, hired) may be blank.
pub fn parse_members<R: Read>(reader: R, source_name: &str) -> Result<Parsed<ClimberRecord>> {
    read_rows(reader, source_name, &MEMBER_COLUMNS, |row| {
        let age: Option<u32> = row.optional_number(2)?;
        if let Some(a) = age {
            if !(MIN_AGE..=MAX_AGE).contains(&a) {
                return Err(format!("age {a} outside [{MIN_AGE}, {MAX_AGE}]"));
            }
        }
        Ok(ClimberRecord {
            climber_id: row.required_text(0)?,
            expedition_id: row.required_text(1)?,
            age,
            sex: Sex::parse(row.raw(3)),
            nationality: row.text(4),
            o2_ascent: row.optional_flag(5)?,
            o2_descent: row.optional_flag(6)?,
            hired: row.optional_flag(7)?,
            summited: row.flag(8)?,
            termination_code: row.text(9),
        })
    })
}

fn flag_str(v: Option<bool>) -> &'static str {
    match v {
        Some(true) => "1",
        Some(false) => "0",
        None => "",
    }
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv writer emits utf-8"))
}

/// Serializes expeditions in the ingestion schema.
pub fn write_expeditions<'a>(
    records: impl IntoIterator<Item = &'a ExpeditionRecord>,
) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(EXPEDITION_COLUMNS)?;
    for e in records {
        w.write_record([
            e.expedition_id.clone(),
            e.peak_id.clone(),
            e.peak_height_m.to_string(),
            e.year.to_string(),
            e.days_to_summit.to_string(),
            e.camps_above_bc.to_string(),
            e.n_members.to_string(),
            e.n_hired.to_string(),
            flag_str(Some(e.any_death)).to_string(),
        ])?;
    }
    finish(w)
}

/// Serializes member rows in the ingestion schema.
pub fn write_members<'a>(records: impl IntoIterator<Item = &'a ClimberRecord>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(MEMBER_COLUMNS)?;
    for c in records {
        w.write_record([
            c.climber_id.as_str(),
            c.expedition_id.as_str(),
            &c.age.map(|a| a.to_string()).unwrap_or_default(),
            c.sex.code(),
            c.nationality.as_str(),
            flag_str(c.o2_ascent),
            flag_str(c.o2_descent),
            flag_str(c.hired),
            flag_str(Some(c.summited)),
            c.termination_code.as_str(),
        ])?;
    }
    finish(w)
}
