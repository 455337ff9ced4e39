//! Repeat-partner detection and failure-cause rate ratios against individual baselines.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::records::{ClimberKey, Dataset, FailureCause};

/// Categories reported in the partner-effect table. `Other` only enters the baselines.
pub const REPORTED_CATEGORIES: [FailureCause; 5] = [
    FailureCause::Success,
    FailureCause::Altitude,
    FailureCause::Logistics,
    FailureCause::Fatigue,
    FailureCause::Accident,
];

/// Earliest year each unordered climber pair shared an expedition.
fn first_shared_year(dataset: &Dataset) -> HashMap<(&str, &str), i32> {
    let mut first: HashMap<(&str, &str), i32> = HashMap::new();
    for exp in dataset.expeditions.values() {
        let ids: Vec<&str> = dataset
            .members_of(exp)
            .map(|c| c.climber_id.as_str())
            .collect();
        for (a, &x) in ids.iter().enumerate() {
            for &y in &ids[a + 1..] {
                let key = if x < y { (x, y) } else { (y, x) };
                first
                    .entry(key)
                    .and_modify(|yr| *yr = (*yr).min(exp.year))
                    .or_insert(exp.year);
            }
        }
    }
    first
}

/// For every climber row: does a co-member share an expedition from a strictly earlier year?
pub fn repeat_partner_flags(dataset: &Dataset) -> BTreeMap<ClimberKey, bool> {
    let first = first_shared_year(dataset);
    let mut flags = BTreeMap::new();
    for exp in dataset.expeditions.values() {
        let ids: Vec<&str> = dataset
            .members_of(exp)
            .map(|c| c.climber_id.as_str())
            .collect();
        for &x in &ids {
            let flagged = ids.iter().any(|&y| {
                let key = if x < y { (x, y) } else { (y, x) };
                x != y && first.get(&key).is_some_and(|&yr| yr < exp.year)
            });
            flags.insert((exp.expedition_id.clone(), x.to_string()), flagged);
        }
    }
    flags
}

/// Outcome counts over some of a climber's expeditions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub counts: [usize; 6],
    pub total: usize,
}

impl OutcomeCounts {
    pub fn add(&mut self, cause: FailureCause) {
        self.counts[cause.index()] += 1;
        self.total += 1;
    }

    pub fn count(&self, cause: FailureCause) -> usize {
        self.counts[cause.index()]
    }

    /// Per-category fractions, indexed as [`FailureCause::ALL`]; `None` when empty.
    pub fn rates(&self) -> Option<[f64; 6]> {
        (self.total > 0).then(|| self.counts.map(|c| c as f64 / self.total as f64))
    }
}

/// Per-category outcome fractions of one climber, optionally over a subset of expedition ids.
pub fn climber_outcome_rates(
    climber_id: &str,
    dataset: &Dataset,
    subset: Option<&BTreeSet<String>>,
) -> Result<[f64; 6]> {
    let mut counts = OutcomeCounts::default();
    for ((exp_id, cid), row) in &dataset.climbers {
        if cid == climber_id && subset.is_none_or(|s| s.contains(exp_id)) {
            counts.add(dataset.outcome(row));
        }
    }
    counts.rates().ok_or_else(|| {
        Error::UndefinedRate(format!(
            "climber {climber_id} has no expeditions in the subset"
        ))
    })
}

/// How per-climber results are combined within a bin.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartnerAggregation {
    /// Mean over climbers of each climber's partner-rate / overall-rate ratio.
    #[default]
    PerClimberMean,
    /// Ratio of counts pooled over the bin's climbers.
    Pooled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartnerConfig {
    /// Climbers need strictly more than this many logged climbs.
    pub min_climbs: usize,
    pub bin_width: usize,
    pub max_climbs: usize,
    pub aggregation: PartnerAggregation,
}

impl Default for PartnerConfig {
    fn default() -> Self {
        PartnerConfig {
            min_climbs: 15,
            bin_width: 5,
            max_climbs: 40,
            aggregation: PartnerAggregation::PerClimberMean,
        }
    }
}

impl PartnerConfig {
    /// Inclusive `(lo, hi)` climb-count bins: `(min+1 ..= min+width)`, … up to `max`.
    pub fn bins(&self) -> Result<Vec<(usize, usize)>> {
        if self.bin_width == 0 || self.max_climbs <= self.min_climbs {
            return Err(Error::Config(format!(
                "partner bins need width > 0 and max > min (got min {}, width {}, max {})",
                self.min_climbs, self.bin_width, self.max_climbs
            )));
        }
        let mut bins = Vec::new();
        let mut lo = self.min_climbs + 1;
        while lo <= self.max_climbs {
            let hi = (lo + self.bin_width - 1).min(self.max_climbs);
            bins.push((lo, hi));
            lo = hi + 1;
        }
        Ok(bins)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartnerCell {
    pub bin: (usize, usize),
    pub category: FailureCause,
    /// `None` when no climber in the bin has a usable baseline for this category.
    pub ratio: Option<f64>,
    /// Climbers contributing to the ratio.
    pub n_climbers: usize,
    /// Climbers with repeat-partner expeditions but a zero baseline in this category.
    pub n_zero_baseline: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartnerBin {
    pub bin: (usize, usize),
    /// Climbers whose total climb count falls in the bin.
    pub n_climbers: usize,
    /// Of those, climbers with at least one repeat-partner expedition.
    pub n_with_partner: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartnerEffectTable {
    pub config: PartnerConfig,
    pub bins: Vec<PartnerBin>,
    pub cells: Vec<PartnerCell>,
}

/// One climber's overall and repeat-partner outcome counts.
#[derive(Debug, Clone, Copy, Default)]
struct ClimberTally {
    overall: OutcomeCounts,
    partner: OutcomeCounts,
}

fn tallies(dataset: &Dataset) -> BTreeMap<&str, ClimberTally> {
    let flags = repeat_partner_flags(dataset);
    let mut out: BTreeMap<&str, ClimberTally> = BTreeMap::new();
    for (key, row) in &dataset.climbers {
        let cause = dataset.outcome(row);
        let t = out.entry(key.1.as_str()).or_default();
        t.overall.add(cause);
        if flags.get(key).copied().unwrap_or(false) {
            t.partner.add(cause);
        }
    }
    out
}

/// Repeat-partner outcome ratios per experience bin and category.
///
/// Experience is the total number of logged climbs of a climber in `dataset`.
/// Climbers without any repeat-partner expedition are left out of every cell,
/// and climbers with a zero overall rate in a category are left out of that cell.
pub fn partner_effect(dataset: &Dataset, config: &PartnerConfig) -> Result<PartnerEffectTable> {
    let bins = config.bins()?;
    let tallies = tallies(dataset);
    let mut members: Vec<Vec<ClimberTally>> = vec![Vec::new(); bins.len()];
    for t in tallies.values() {
        if let Some(b) = bins
            .iter()
            .position(|&(lo, hi)| (lo..=hi).contains(&t.overall.total))
        {
            members[b].push(*t);
        }
    }

    let per_bin: Vec<(PartnerBin, Vec<PartnerCell>)> = bins
        .par_iter()
        .zip(&members)
        .map(|(&bin, climbers)| {
            let with_partner: Vec<&ClimberTally> =
                climbers.iter().filter(|t| t.partner.total > 0).collect();
            let cells = REPORTED_CATEGORIES
                .iter()
                .map(|&category| cell(bin, category, &with_partner, config.aggregation))
                .collect();
            let summary = PartnerBin {
                bin,
                n_climbers: climbers.len(),
                n_with_partner: with_partner.len(),
            };
            (summary, cells)
        })
        .collect();

    let (bins, cells): (Vec<_>, Vec<Vec<_>>) = per_bin.into_iter().unzip();
    Ok(PartnerEffectTable {
        config: *config,
        bins,
        cells: cells.concat(),
    })
}

fn cell(
    bin: (usize, usize),
    category: FailureCause,
    climbers: &[&ClimberTally],
    aggregation: PartnerAggregation,
) -> PartnerCell {
    let (usable, zero): (Vec<&&ClimberTally>, Vec<_>) =
        climbers.iter().partition(|t| t.overall.count(category) > 0);
    let rate = |c: &OutcomeCounts| c.count(category) as f64 / c.total as f64;
    let ratio = match aggregation {
        PartnerAggregation::PerClimberMean => (!usable.is_empty()).then(|| {
            usable
                .iter()
                .map(|t| rate(&t.partner) / rate(&t.overall))
                .sum::<f64>()
                / usable.len() as f64
        }),
        PartnerAggregation::Pooled => {
            let sum = |f: fn(&ClimberTally) -> OutcomeCounts| {
                climbers
                    .iter()
                    .fold(OutcomeCounts::default(), |mut acc, t| {
                        let c = f(t);
                        for k in 0..6 {
                            acc.counts[k] += c.counts[k];
                        }
                        acc.total += c.total;
                        acc
                    })
            };
            let partner = sum(|t| t.partner);
            let overall = sum(|t| t.overall);
            (overall.count(category) > 0).then(|| rate(&partner) / rate(&overall))
        }
    };
    let n_climbers = match aggregation {
        PartnerAggregation::PerClimberMean => usable.len(),
        PartnerAggregation::Pooled if ratio.is_some() => climbers.len(),
        PartnerAggregation::Pooled => 0,
    };
    PartnerCell {
        bin,
        category,
        ratio,
        n_climbers,
        n_zero_baseline: zero.len(),
    }
}

fn bin_label((lo, hi): (usize, usize)) -> String {
    format!("{lo}-{hi}")
}

impl PartnerEffectTable {
    pub fn cell(&self, bin: (usize, usize), category: FailureCause) -> Option<&PartnerCell> {
        self.cells
            .iter()
            .find(|c| c.bin == bin && c.category == category)
    }

    /// `bin,category,ratio,n_climbers`; undefined ratios are left empty.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["bin", "category", "ratio", "n_climbers"])?;
        for c in &self.cells {
            w.write_record([
                bin_label(c.bin),
                c.category.to_string(),
                c.ratio.map(|r| r.to_string()).unwrap_or_default(),
                c.n_climbers.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("utf-8"))
    }

    /// Plot data: bin labels on the x-axis and one series of ratios per category.
    pub fn plot_data(&self) -> serde_json::Value {
        let labels: Vec<String> = self.bins.iter().map(|b| bin_label(b.bin)).collect();
        let series: BTreeMap<String, Vec<Option<f64>>> = REPORTED_CATEGORIES
            .iter()
            .map(|&cat| {
                let ys = self
                    .bins
                    .iter()
                    .map(|b| self.cell(b.bin, cat).and_then(|c| c.ratio))
                    .collect();
                (cat.to_string(), ys)
            })
            .collect();
        let counts: BTreeMap<String, Vec<usize>> = REPORTED_CATEGORIES
            .iter()
            .map(|&cat| {
                let ns = self
                    .bins
                    .iter()
                    .map(|b| self.cell(b.bin, cat).map_or(0, |c| c.n_climbers))
                    .collect();
                (cat.to_string(), ns)
            })
            .collect();
        serde_json::json!({
            "x_label": "logged climbs",
            "y_label": "rate with repeat partner / individual rate",
            "bins": labels,
            "series": series,
            "n_climbers": counts,
            "climbers_per_bin": self.bins.iter().map(|b| b.n_climbers).collect::<Vec<_>>(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::fixtures::{climber, expedition};
    use crate::records::{link_and_validate, ClimberRecord, CodeMap, ExpeditionRecord};

    fn dataset(exps: &[(&str, i32, &[&str])], fail: &[(&str, &str, &str)]) -> Dataset {
        let mut expeditions = Vec::new();
        let mut rows = Vec::new();
        for &(id, year, members) in exps {
            expeditions.push(expedition(id, "EVER", 8849, year));
            for &m in members {
                let mut c = climber(m, id, true);
                if let Some(&(_, _, code)) = fail.iter().find(|(e, cl, _)| *e == id && *cl == m) {
                    c.summited = false;
                    c.termination_code = code.into();
                }
                rows.push(c);
            }
        }
        link_and_validate(expeditions, rows, CodeMap::default()).unwrap()
    }

    fn key(e: &str, c: &str) -> ClimberKey {
        (e.to_string(), c.to_string())
    }

    #[test]
    fn shared_earlier_expedition_flags_later_one() {
        let ds = dataset(&[("e1", 2019, &["A", "B"]), ("e2", 2021, &["A", "B"])], &[]);
        let f = repeat_partner_flags(&ds);
        assert!(!f[&key("e1", "A")]);
        assert!(f[&key("e2", "A")]);
        assert!(f[&key("e2", "B")]);
    }

    #[test]
    fn same_year_does_not_count() {
        let ds = dataset(&[("e1", 2020, &["A", "B"]), ("e2", 2020, &["A", "B"])], &[]);
        assert!(repeat_partner_flags(&ds).values().all(|&f| !f));
    }

    #[test]
    fn overlapping_rosters_match_brute_force() {
        let exps: &[(&str, i32, &[&str])] = &[
            ("e1", 2015, &["A", "B", "C"]),
            ("e2", 2016, &["C", "D"]),
            ("e3", 2017, &["A", "D", "E"]),
            ("e4", 2017, &["B", "E"]),
            ("e5", 2018, &["A", "C", "E"]),
        ];
        let ds = dataset(exps, &[]);
        let got = repeat_partner_flags(&ds);
        for &(id, year, members) in exps {
            for &x in members {
                let expected = members.iter().any(|&y| {
                    y != x
                        && exps
                            .iter()
                            .any(|&(_, yr, m)| yr < year && m.contains(&x) && m.contains(&y))
                });
                assert_eq!(got[&key(id, x)], expected, "{x} on {id}");
            }
        }
        // spot checks from hand enumeration
        assert!(!got[&key("e3", "D")]);
        assert!(!got[&key("e4", "E")]);
        assert!(got[&key("e5", "A")]);
        assert!(got[&key("e5", "E")]);
    }

    #[test]
    fn adding_earlier_history_keeps_flags() {
        let base: &[(&str, i32, &[&str])] =
            &[("e1", 2018, &["A", "B"]), ("e2", 2020, &["A", "B", "C"])];
        let extended: &[(&str, i32, &[&str])] = &[
            ("e0", 2010, &["A", "C"]),
            ("e1", 2018, &["A", "B"]),
            ("e2", 2020, &["A", "B", "C"]),
        ];
        let before = repeat_partner_flags(&dataset(base, &[]));
        let after = repeat_partner_flags(&dataset(extended, &[]));
        for (k, &f) in &before {
            assert!(!f || after[k]);
        }
        assert!(after[&key("e2", "C")]);
    }

    fn solo_history(
        id: &str,
        n: usize,
        fatigue: &[usize],
    ) -> (Vec<ExpeditionRecord>, Vec<ClimberRecord>) {
        let mut exps = Vec::new();
        let mut rows = Vec::new();
        for k in 0..n {
            let eid = format!("{id}-{k:02}");
            exps.push(expedition(&eid, "CHOY", 8188, 2000 + k as i32));
            let mut c = climber(id, &eid, !fatigue.contains(&k));
            c.termination_code = if fatigue.contains(&k) {
                "exhaustion"
            } else {
                "success"
            }
            .into();
            rows.push(c);
        }
        (exps, rows)
    }

    #[test]
    fn outcome_rates() {
        let (exps, rows) = solo_history("A", 10, &[3, 7]);
        let ds = link_and_validate(exps, rows, CodeMap::default()).unwrap();
        let r = climber_outcome_rates("A", &ds, None).unwrap();
        assert!((r[FailureCause::Fatigue.index()] - 0.2).abs() < 1e-15);
        assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-15);

        let (exps, rows) = solo_history("B", 4, &[]);
        let ds = link_and_validate(exps, rows, CodeMap::default()).unwrap();
        let r = climber_outcome_rates("B", &ds, None).unwrap();
        assert_eq!(r[FailureCause::Success.index()], 1.0);
        assert!(r[1..].iter().all(|&v| v == 0.0));
        let empty = BTreeSet::new();
        assert!(climber_outcome_rates("B", &ds, Some(&empty)).is_err());
        let subset: BTreeSet<String> = ["B-00".to_string()].into();
        assert_eq!(
            climber_outcome_rates("B", &ds, Some(&subset)).unwrap()[0],
            1.0
        );
    }

    #[test]
    fn default_bins() {
        assert_eq!(
            PartnerConfig::default().bins().unwrap(),
            vec![(16, 20), (21, 25), (26, 30), (31, 35), (36, 40)]
        );
        let bad = PartnerConfig {
            bin_width: 0,
            ..Default::default()
        };
        assert!(bad.bins().is_err());
    }

    /// A veteran `id` with `n` climbs in distinct years; `partner_years` of them are
    /// shared with `mate` (the first shared one is not yet a repeat). Failures are
    /// fatigue on the listed climb indices.
    fn veteran(
        id: &str,
        mate: &str,
        n: usize,
        shared: &[usize],
        fatigue: &[usize],
    ) -> (Vec<ExpeditionRecord>, Vec<ClimberRecord>) {
        let mut exps = Vec::new();
        let mut rows = Vec::new();
        for k in 0..n {
            let eid = format!("{id}-{k:02}");
            exps.push(expedition(&eid, "CHOY", 8188, 1990 + k as i32));
            let failed = fatigue.contains(&k);
            let mut c = climber(id, &eid, !failed);
            c.termination_code = if failed { "exhaustion" } else { "success" }.into();
            rows.push(c);
            if shared.contains(&k) {
                rows.push(climber(mate, &eid, true));
            }
        }
        (exps, rows)
    }

    #[test]
    fn ratio_of_half_for_halved_partner_fatigue() {
        // 20 climbs, 10 with a repeat partner (shared 0..=10, first not counted);
        // fatigue 1/10 with partner versus 2/10 overall
        let shared: Vec<usize> = (0..=10).collect();
        let fatigue = [3, 11, 12, 13];
        let (exps, rows) = veteran("A", "M", 20, &shared, &fatigue);
        let ds = link_and_validate(exps, rows, CodeMap::default()).unwrap();
        let t = partner_effect(&ds, &PartnerConfig::default()).unwrap();
        let c = t.cell((16, 20), FailureCause::Fatigue).unwrap();
        assert_eq!(c.n_climbers, 1);
        assert!((c.ratio.unwrap() - 0.5).abs() < 1e-15);
        // zero-baseline categories are undefined, not zero or infinite
        let a = t.cell((16, 20), FailureCause::Accident).unwrap();
        assert_eq!(a.ratio, None);
        assert_eq!(a.n_zero_baseline, 1);
        // mate has 11 climbs: below the first bin
        assert_eq!(t.bins[0].n_climbers, 1);
        assert!(t.to_csv().unwrap().contains("16-20,fatigue,0.5,1"));
    }

    #[test]
    fn identical_rates_give_unit_ratio() {
        // fatigue on every other climb both with and without the partner
        let shared: Vec<usize> = (0..=10).collect();
        let fatigue: Vec<usize> = (1..20).step_by(2).collect();
        let (exps, rows) = veteran("A", "M", 20, &shared, &fatigue);
        let ds = link_and_validate(exps, rows, CodeMap::default()).unwrap();
        let t = partner_effect(&ds, &PartnerConfig::default()).unwrap();
        for cat in [FailureCause::Success, FailureCause::Fatigue] {
            assert!((t.cell((16, 20), cat).unwrap().ratio.unwrap() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn averaged_ratios_differ_from_pooled_counts() {
        // A: 20 climbs, 10 partner climbs, fatigue 1 partner / 4 overall → ratio 0.5
        // B: 16 climbs, 2 partner climbs, fatigue 1 partner / 2 overall → ratio 4
        let (mut exps, mut rows) = veteran(
            "A",
            "M",
            20,
            &(0..=10).collect::<Vec<_>>(),
            &[5, 11, 12, 13],
        );
        let (e2, r2) = veteran("B", "N", 16, &[0, 1, 2], &[2, 9]);
        exps.extend(e2);
        rows.extend(r2);
        let ds = link_and_validate(exps, rows, CodeMap::default()).unwrap();

        let mean = partner_effect(&ds, &PartnerConfig::default()).unwrap();
        let c = mean.cell((16, 20), FailureCause::Fatigue).unwrap();
        assert_eq!(c.n_climbers, 2);
        let expected_mean = ((1.0 / 10.0) / (4.0 / 20.0) + (1.0 / 2.0) / (2.0 / 16.0)) / 2.0;
        assert!((c.ratio.unwrap() - expected_mean).abs() < 1e-12);

        let pooled_cfg = PartnerConfig {
            aggregation: PartnerAggregation::Pooled,
            ..Default::default()
        };
        let pooled = partner_effect(&ds, &pooled_cfg).unwrap();
        let p = pooled
            .cell((16, 20), FailureCause::Fatigue)
            .unwrap()
            .ratio
            .unwrap();
        let expected_pooled = (2.0 / 12.0) / (6.0 / 36.0);
        assert!((p - expected_pooled).abs() < 1e-12);
        assert!((p - c.ratio.unwrap()).abs() > 0.5);
    }

    #[test]
    fn plot_data_has_one_series_per_category() {
        let (exps, rows) = veteran(
            "A",
            "M",
            20,
            &(0..=10).collect::<Vec<_>>(),
            &[3, 11, 12, 13],
        );
        let ds = link_and_validate(exps, rows, CodeMap::default()).unwrap();
        let v = partner_effect(&ds, &PartnerConfig::default())
            .unwrap()
            .plot_data();
        assert_eq!(v["bins"].as_array().unwrap().len(), 5);
        assert_eq!(v["series"]["fatigue"][0], 0.5);
        assert!(v["series"]["fatigue"][1].is_null());
    }
}
