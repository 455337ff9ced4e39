//! Expedition and climber records: ingestion, linking, filtering and per-record derived values.

mod codes;
mod parse;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use codes::{classify_failure, CodeMap, FailureCause};
pub use parse::{
    parse_expeditions, parse_members, write_expeditions, write_members, Diagnostic, Parsed,
    EXPEDITION_COLUMNS, MAX_AGE, MEMBER_COLUMNS, MIN_AGE,
};

/// Peak height (meters) from which prior climbs count as high-altitude experience.
pub const DEATH_ZONE_M: u32 = 8000;

/// Default minimum roster length retained for graph analysis.
pub const DEFAULT_MIN_EXPEDITION_SIZE: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Male,
    Female,
    Unknown,
}

impl Sex {
    pub fn parse(raw: &str) -> Sex {
        match raw.trim().to_ascii_lowercase().as_str() {
            "m" | "male" => Sex::Male,
            "f" | "female" => Sex::Female,
            _ => Sex::Unknown,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Sex::Male => "M",
            Sex::Female => "F",
            Sex::Unknown => "",
        }
    }
}

/// One climber's participation in one expedition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClimberRecord {
    pub climber_id: String,
    pub expedition_id: String,
    pub age: Option<u32>,
    pub sex: Sex,
    pub nationality: String,
    pub o2_ascent: Option<bool>,
    pub o2_descent: Option<bool>,
    /// Hired personnel (sherpa) rather than a paying member.
    pub hired: Option<bool>,
    pub summited: bool,
    pub termination_code: String,
}

impl ClimberRecord {
    /// Names of the binarization inputs this record lacks.
    pub fn missing_fields(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.age.is_none() {
            out.push("age");
        }
        if self.o2_ascent.is_none() {
            out.push("o2_ascent");
        }
        if self.o2_descent.is_none() {
            out.push("o2_descent");
        }
        if self.hired.is_none() {
            out.push("hired");
        }
        out
    }

    fn key(&self) -> ClimberKey {
        (self.expedition_id.clone(), self.climber_id.clone())
    }
}

/// An expedition row. `n_members`/`n_hired` feed the expedition-wide factors;
/// `members` (filled during linking) drives every per-climber computation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpeditionRecord {
    pub expedition_id: String,
    pub peak_id: String,
    pub peak_height_m: u32,
    pub year: i32,
    pub days_to_summit: u32,
    pub camps_above_bc: u32,
    pub n_members: u32,
    pub n_hired: u32,
    pub any_death: bool,
    #[serde(default)]
    pub members: Vec<String>,
}

/// `(expedition_id, climber_id)`; expedition first so a range scan yields a roster.
pub type ClimberKey = (String, String);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterEntry {
    pub kind: ExclusionKind,
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExclusionKind {
    Expedition,
    Climber,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub diagnostics: Vec<Diagnostic>,
    pub filter_log: Vec<FilterEntry>,
}

/// Linked expeditions and climber rows with their code table and history of exclusions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub expeditions: BTreeMap<String, ExpeditionRecord>,
    #[serde(with = "climber_map")]
    pub climbers: BTreeMap<ClimberKey, ClimberRecord>,
    pub code_map: CodeMap,
    pub provenance: Provenance,
}

mod climber_map {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(
        map: &BTreeMap<ClimberKey, ClimberRecord>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        s.collect_seq(map.values())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<BTreeMap<ClimberKey, ClimberRecord>, D::Error> {
        let rows = Vec::<ClimberRecord>::deserialize(d)?;
        Ok(rows.into_iter().map(|c| (c.key(), c)).collect())
    }
}

/// Which listed climbers form the success-rate denominator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemberScope {
    /// Every climber on the roster, hired personnel included.
    #[default]
    AllListed,
    /// Paying members only; climbers with an unknown hired flag count as paying.
    PayingOnly,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterCriteria {
    pub peak_id: Option<String>,
    pub min_size: usize,
    pub exclude_death: bool,
}

impl Default for FilterCriteria {
    fn default() -> Self {
        FilterCriteria {
            peak_id: Some("EVER".to_string()),
            min_size: DEFAULT_MIN_EXPEDITION_SIZE,
            exclude_death: true,
        }
    }
}

impl FilterCriteria {
    fn rejection(&self, exp: &ExpeditionRecord) -> Option<String> {
        let mut reasons = Vec::new();
        if let Some(peak) = &self.peak_id {
            if &exp.peak_id != peak {
                reasons.push(format!("peak {} is not {}", exp.peak_id, peak));
            }
        }
        if exp.members.len() < self.min_size {
            reasons.push(format!(
                "{} members below minimum {}",
                exp.members.len(),
                self.min_size
            ));
        }
        if self.exclude_death && exp.any_death {
            reasons.push("expedition recorded a death".to_string());
        }
        (!reasons.is_empty()).then(|| reasons.join("; "))
    }
}

/// Joins parsed rows into a [`Dataset`].
///
/// Duplicate expedition ids are fatal. Climber rows that point at an unknown
/// expedition, or repeat an already-seen `(climber, expedition)` pair, are
/// dropped with a diagnostic.
pub fn link_and_validate(
    expeditions: Vec<ExpeditionRecord>,
    climbers: Vec<ClimberRecord>,
    code_map: CodeMap,
) -> Result<Dataset> {
    let mut exp_map = BTreeMap::new();
    for mut e in expeditions {
        e.members.clear();
        let id = e.expedition_id.clone();
        if exp_map.insert(id.clone(), e).is_some() {
            return Err(Error::DuplicateExpedition(id));
        }
    }

    let mut diagnostics = Vec::new();
    let mut climber_map = BTreeMap::new();
    for c in climbers {
        if !exp_map.contains_key(&c.expedition_id) {
            diagnostics.push(Diagnostic {
                source: "link".into(),
                line: 0,
                message: format!(
                    "climber {} references unknown expedition {}",
                    c.climber_id, c.expedition_id
                ),
            });
            continue;
        }
        let key = c.key();
        if climber_map.contains_key(&key) {
            diagnostics.push(Diagnostic {
                source: "link".into(),
                line: 0,
                message: format!(
                    "duplicate row for climber {} on expedition {}",
                    c.climber_id, c.expedition_id
                ),
            });
            continue;
        }
        climber_map.insert(key, c);
    }
    for (exp_id, climber_id) in climber_map.keys() {
        exp_map
            .get_mut(exp_id)
            .expect("linked above")
            .members
            .push(climber_id.clone());
    }

    Ok(Dataset {
        expeditions: exp_map,
        climbers: climber_map,
        code_map,
        provenance: Provenance {
            source: String::new(),
            diagnostics,
            filter_log: Vec::new(),
        },
    })
}

/// Retains the expeditions matching `criteria`, dropping their climber rows with them.
///
/// Each exclusion (expedition or climber row) is appended to the filter log once;
/// re-applying the same criteria is a no-op.
pub fn filter_expeditions(dataset: &Dataset, criteria: &FilterCriteria) -> Dataset {
    let mut out = dataset.clone();
    let rejected: Vec<(String, String)> = dataset
        .expeditions
        .values()
        .filter_map(|e| criteria.rejection(e).map(|r| (e.expedition_id.clone(), r)))
        .collect();
    for (exp_id, reason) in rejected {
        let exp = out.expeditions.remove(&exp_id).expect("present");
        out.provenance.filter_log.push(FilterEntry {
            kind: ExclusionKind::Expedition,
            id: exp_id.clone(),
            reason,
        });
        for climber_id in exp.members {
            out.climbers.remove(&(exp_id.clone(), climber_id.clone()));
            out.provenance.filter_log.push(FilterEntry {
                kind: ExclusionKind::Climber,
                id: format!("{climber_id}@{exp_id}"),
                reason: "expedition excluded".into(),
            });
        }
    }
    out
}

impl Dataset {
    pub fn expedition(&self, id: &str) -> Option<&ExpeditionRecord> {
        self.expeditions.get(id)
    }

    pub fn climber(&self, expedition_id: &str, climber_id: &str) -> Option<&ClimberRecord> {
        self.climbers
            .get(&(expedition_id.to_string(), climber_id.to_string()))
    }

    /// Climber rows of one expedition, in climber-id order.
    pub fn members_of<'a>(
        &'a self,
        exp: &'a ExpeditionRecord,
    ) -> impl Iterator<Item = &'a ClimberRecord> + 'a {
        exp.members
            .iter()
            .filter_map(move |c| self.climber(&exp.expedition_id, c))
    }

    /// Distinct climber ids present in the dataset.
    pub fn climber_ids(&self) -> BTreeSet<&str> {
        self.climbers.keys().map(|(_, c)| c.as_str()).collect()
    }

    /// Outcome category of one participation. Summiting wins over any recorded
    /// code; a non-summit whose code maps to `Success` is counted as `Other`.
    pub fn outcome(&self, climber: &ClimberRecord) -> FailureCause {
        if climber.summited {
            return FailureCause::Success;
        }
        match self.code_map.classify(&climber.termination_code) {
            FailureCause::Success => FailureCause::Other,
            c => c,
        }
    }

    /// Expedition ids per climber, each list sorted by (year, expedition id).
    pub fn climber_histories(&self) -> BTreeMap<&str, Vec<&ExpeditionRecord>> {
        let mut out: BTreeMap<&str, Vec<&ExpeditionRecord>> = BTreeMap::new();
        for (exp_id, climber_id) in self.climbers.keys() {
            out.entry(climber_id.as_str())
                .or_default()
                .push(&self.expeditions[exp_id]);
        }
        for list in out.values_mut() {
            list.sort_by(|a, b| (a.year, &a.expedition_id).cmp(&(b.year, &b.expedition_id)));
        }
        out
    }

    /// Ages of every climber row that has one.
    pub fn ages(&self) -> Vec<u32> {
        self.climbers.values().filter_map(|c| c.age).collect()
    }
}

/// Fraction of the listed members who summited, over all listed climbers.
pub fn success_rate(expedition: &ExpeditionRecord, dataset: &Dataset) -> Result<f64> {
    success_rate_with(expedition, dataset, MemberScope::AllListed)
}

pub fn success_rate_with(
    expedition: &ExpeditionRecord,
    dataset: &Dataset,
    scope: MemberScope,
) -> Result<f64> {
    let (mut total, mut summited) = (0usize, 0usize);
    for c in dataset.members_of(expedition) {
        if scope == MemberScope::PayingOnly && c.hired == Some(true) {
            continue;
        }
        total += 1;
        summited += usize::from(c.summited);
    }
    if total == 0 {
        return Err(Error::UndefinedRate(expedition.expedition_id.clone()));
    }
    Ok(summited as f64 / total as f64)
}

/// Number of expeditions to peaks of at least 8000 m the climber joined in
/// years strictly before `before_year`.
pub fn experience_above_8000(
    climber_id: &str,
    dataset: &Dataset,
    before_year: i32,
) -> Result<usize> {
    let mut known = false;
    let mut count = 0;
    for (exp_id, cid) in dataset.climbers.keys() {
        if cid != climber_id {
            continue;
        }
        known = true;
        let exp = &dataset.expeditions[exp_id];
        if exp.year < before_year && exp.peak_height_m >= DEATH_ZONE_M {
            count += 1;
        }
    }
    if known {
        Ok(count)
    } else {
        Err(Error::UnknownClimber(climber_id.to_string()))
    }
}

/// Per-climber list of `(year, peak height)` for fast repeated experience queries.
#[derive(Debug, Clone, Default)]
pub struct ExperienceIndex {
    climbs: BTreeMap<String, Vec<(i32, u32)>>,
}

impl ExperienceIndex {
    pub fn new(dataset: &Dataset) -> Self {
        let mut climbs: BTreeMap<String, Vec<(i32, u32)>> = BTreeMap::new();
        for (exp_id, cid) in dataset.climbers.keys() {
            let exp = &dataset.expeditions[exp_id];
            climbs
                .entry(cid.clone())
                .or_default()
                .push((exp.year, exp.peak_height_m));
        }
        ExperienceIndex { climbs }
    }

    pub fn above_8000(&self, climber_id: &str, before_year: i32) -> Result<usize> {
        let list = self
            .climbs
            .get(climber_id)
            .ok_or_else(|| Error::UnknownClimber(climber_id.to_string()))?;
        Ok(list
            .iter()
            .filter(|(y, h)| *y < before_year && *h >= DEATH_ZONE_M)
            .count())
    }
}
