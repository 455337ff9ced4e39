//! Seeded synthetic expedition data with planted communities, factor–success
//! correlations and repeat-partner effects.
//!
//! Two populations are generated. Everest expeditions carry the planted
//! communities: each community fixes the roster size, the hired share, days to
//! summit, camps, a base success rate and feature prevalences. Veterans climb
//! other 8000 m peaks, mostly alone and sometimes with one fixed partner; their
//! outcomes on repeat-partner climbs are scaled by per-category multipliers.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multiplex::LayerKind;
use crate::records::{
    write_expeditions, write_members, ClimberRecord, ExpeditionRecord, FailureCause, Sex,
};

const EVEREST: (&str, u32) = ("EVER", 8849);
const OTHER_PEAKS: [(&str, u32); 6] = [
    ("CHOY", 8188),
    ("MANA", 8163),
    ("LHOT", 8516),
    ("MAKA", 8485),
    ("DHA1", 8167),
    ("KANG", 8586),
];
const NATIONALITIES: [&str; 8] = ["US", "GB", "JP", "FR", "DE", "IN", "CN", "KR"];

/// Weights or multipliers over the failure categories.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FailureWeights {
    pub altitude: f64,
    pub logistics: f64,
    pub fatigue: f64,
    pub accident: f64,
    pub other: f64,
}

impl FailureWeights {
    pub const fn uniform(v: f64) -> Self {
        FailureWeights {
            altitude: v,
            logistics: v,
            fatigue: v,
            accident: v,
            other: v,
        }
    }

    fn pairs(&self) -> [(FailureCause, f64); 5] {
        [
            (FailureCause::Altitude, self.altitude),
            (FailureCause::Logistics, self.logistics),
            (FailureCause::Fatigue, self.fatigue),
            (FailureCause::Accident, self.accident),
            (FailureCause::Other, self.other),
        ]
    }

    fn sum(&self) -> f64 {
        self.pairs().iter().map(|p| p.1).sum()
    }
}

/// Prevalence of each climber attribute within a community.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prevalence {
    pub young: f64,
    pub male: f64,
    pub o2_ascent: f64,
    pub o2_descent: f64,
    pub experienced: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityConfig {
    pub name: String,
    /// Relative share of the planted expeditions.
    pub weight: f64,
    /// Inclusive range of listed climbers (members plus hired).
    pub size_range: (u32, u32),
    pub hired_fraction: f64,
    pub days_mean: f64,
    pub days_sd: f64,
    pub camps_mean: f64,
    pub camps_sd: f64,
    pub success_rate: f64,
    pub prevalence: Prevalence,
}

/// Per-climber success shifts, centred on the community prevalence so that the
/// community's mean success rate stays at its configured value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureEffects {
    pub youth: f64,
    pub o2_ascent: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VeteranConfig {
    pub pairs: usize,
    /// Inclusive range of logged climbs per veteran.
    pub climbs: (usize, usize),
    /// Fraction of the shorter career of a pair spent climbing together.
    pub joint_fraction: f64,
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    /// Planted Everest expeditions, split over communities by weight.
    pub n_expeditions: usize,
    pub communities: Vec<CommunityConfig>,
    pub effects: FeatureEffects,
    /// Relative frequency of failure causes among failures.
    pub failure_mix: FailureWeights,
    /// Multipliers applied to failure probabilities on repeat-partner climbs;
    /// success absorbs the difference.
    pub partner_effect: FailureWeights,
    pub veterans: VeteranConfig,
    /// Everest expeditions with a recorded death, excluded by the default filter.
    pub death_distractors: usize,
    /// Everest expeditions below the size filter.
    pub small_distractors: usize,
    pub years: (i32, i32),
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self::benchmark(7)
    }
}

impl SynthConfig {
    /// Three Everest communities separated by days/camps, member–hired ratio and size.
    pub fn benchmark(seed: u64) -> Self {
        let community = |name: &str,
                         size_range,
                         hired_fraction,
                         days_mean,
                         camps_mean,
                         success_rate,
                         prevalence| {
            CommunityConfig {
                name: name.into(),
                weight: 1.0,
                size_range,
                hired_fraction,
                days_mean,
                days_sd: 3.0,
                camps_mean,
                camps_sd: 0.0,
                success_rate,
                prevalence,
            }
        };
        SynthConfig {
            seed,
            n_expeditions: 90,
            communities: vec![
                community(
                    "long_siege",
                    (12, 16),
                    0.5,
                    40.0,
                    5.0,
                    0.25,
                    Prevalence {
                        young: 0.3,
                        male: 0.9,
                        o2_ascent: 0.5,
                        o2_descent: 0.3,
                        experienced: 0.2,
                    },
                ),
                community(
                    "lean_members",
                    (12, 16),
                    0.15,
                    20.0,
                    3.0,
                    0.4,
                    Prevalence {
                        young: 0.5,
                        male: 0.6,
                        o2_ascent: 0.9,
                        o2_descent: 0.8,
                        experienced: 0.5,
                    },
                ),
                community(
                    "large_commercial",
                    (26, 34),
                    0.5,
                    20.0,
                    3.0,
                    0.7,
                    Prevalence {
                        young: 0.7,
                        male: 0.8,
                        o2_ascent: 0.95,
                        o2_descent: 0.9,
                        experienced: 0.7,
                    },
                ),
            ],
            effects: FeatureEffects {
                youth: 0.1,
                o2_ascent: 0.1,
            },
            failure_mix: FailureWeights {
                altitude: 0.17,
                logistics: 0.13,
                fatigue: 0.6,
                accident: 0.05,
                other: 0.05,
            },
            partner_effect: FailureWeights {
                fatigue: 0.5,
                ..FailureWeights::uniform(1.0)
            },
            veterans: VeteranConfig {
                pairs: 400,
                climbs: (16, 40),
                joint_fraction: 0.25,
                success_rate: 0.4,
            },
            death_distractors: 3,
            small_distractors: 3,
            years: (1980, 2019),
        }
    }

    /// Rejects configurations that cannot be sampled.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InfeasibleConfig(msg));
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if self.communities.is_empty() {
            return bad("at least one community is required".into());
        }
        if self.n_expeditions < self.communities.len() {
            return bad(format!(
                "{} expeditions cannot cover {} communities",
                self.n_expeditions,
                self.communities.len()
            ));
        }
        if self.years.0 + 10 > self.years.1 {
            return bad(format!(
                "year range {:?} must span more than ten years",
                self.years
            ));
        }
        for c in &self.communities {
            let (lo, hi) = c.size_range;
            if lo < 1 || lo > hi {
                return bad(format!(
                    "community {}: size range {lo}..={hi} is empty or below 1",
                    c.name
                ));
            }
            if !(c.weight > 0.0) {
                return bad(format!("community {}: weight must be positive", c.name));
            }
            if !prob(c.hired_fraction) || !prob(c.success_rate) {
                return bad(format!("community {}: rates must lie in [0, 1]", c.name));
            }
            let p = c.prevalence;
            if ![p.young, p.male, p.o2_ascent, p.o2_descent, p.experienced]
                .into_iter()
                .all(prob)
            {
                return bad(format!(
                    "community {}: prevalences must lie in [0, 1]",
                    c.name
                ));
            }
            if c.days_mean < 1.0 || c.days_sd < 0.0 || c.camps_mean < 0.0 || c.camps_sd < 0.0 {
                return bad(format!(
                    "community {}: negative days, camps or spread",
                    c.name
                ));
            }
        }
        if self.failure_mix.pairs().iter().any(|p| p.1 < 0.0) || self.failure_mix.sum() <= 0.0 {
            return bad("failure mix needs nonnegative weights with a positive sum".into());
        }
        if self.partner_effect.pairs().iter().any(|p| p.1 < 0.0) {
            return bad("partner multipliers must be nonnegative".into());
        }
        let v = &self.veterans;
        if v.climbs.0 < 2 || v.climbs.0 > v.climbs.1 {
            return bad(format!("veteran climb range {:?} is invalid", v.climbs));
        }
        if !prob(v.success_rate) || !prob(v.joint_fraction) {
            return bad("veteran rates must lie in [0, 1]".into());
        }
        let span = (self.years.1 - self.years.0 + 1) as usize;
        if v.pairs > 0 && span < v.climbs.1 {
            return bad(format!(
                "{span} years cannot host {} distinct joint-climb years",
                v.climbs.1
            ));
        }
        let partner_failure: f64 = self
            .veteran_failures()
            .iter()
            .map(|&(c, f)| f * self.partner_multiplier(c))
            .sum();
        if partner_failure > 1.0 {
            return bad("partner multipliers push failure probability above 1".into());
        }
        Ok(())
    }

    fn partner_multiplier(&self, cause: FailureCause) -> f64 {
        self.partner_effect
            .pairs()
            .iter()
            .find(|p| p.0 == cause)
            .map_or(1.0, |p| p.1)
    }

    /// Absolute failure probabilities of a veteran climb without a repeat partner.
    fn veteran_failures(&self) -> Vec<(FailureCause, f64)> {
        let total = self.failure_mix.sum();
        self.failure_mix
            .pairs()
            .iter()
            .map(|&(c, w)| (c, (1.0 - self.veterans.success_rate) * w / total))
            .collect()
    }

    /// Expected value of each factor layer in one community.
    fn expected_factor(&self, c: &CommunityConfig, kind: LayerKind) -> f64 {
        let size = f64::from(c.size_range.0 + c.size_range.1) / 2.0;
        let hired = (size * c.hired_fraction).round().max(1.0);
        match kind {
            LayerKind::DaysToSummit => c.days_mean,
            LayerKind::CampsAboveBc => c.camps_mean,
            LayerKind::MemberHiredRatio => (size - hired) / hired,
            LayerKind::ExpeditionSize => size,
            LayerKind::IntraExpeditionGraph => f64::NAN,
        }
    }
}

/// Planted structure, for scoring a pipeline run against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub community_names: Vec<String>,
    /// Community index of every planted Everest expedition.
    pub expedition_labels: BTreeMap<String, usize>,
    /// Everest expeditions meant to be removed by the default filter.
    pub distractors: Vec<String>,
    /// Sign of the weighted covariance between community factor means and success rates.
    pub correlation_signs: BTreeMap<LayerKind, i8>,
    pub partner_multipliers: FailureWeights,
    /// Number of repeat-partner climbs planted among the veterans.
    pub repeat_partner_climbs: usize,
    pub config: SynthConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub expeditions: Vec<ExpeditionRecord>,
    pub members: Vec<ClimberRecord>,
    pub ground_truth: GroundTruth,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthPaths {
    pub expeditions: PathBuf,
    pub members: PathBuf,
    pub ground_truth: PathBuf,
}

pub const EXPEDITIONS_FILE: &str = "expeditions.csv";
pub const MEMBERS_FILE: &str = "members.csv";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";

fn termination_code(cause: FailureCause, rng: &mut ChaCha8Rng) -> &'static str {
    let options: &[&str] = match cause {
        FailureCause::Success => &["Success (main peak)"],
        FailureCause::Altitude => &["AMS symptoms", "Frostbite", "Breathing problems"],
        FailureCause::Logistics => &["Lack of supplies", "O2 system failure", "Too late in day"],
        FailureCause::Fatigue => &["Exhaustion", "Weakness"],
        FailureCause::Accident => &["Injury", "Illness"],
        FailureCause::Other => &["Bad weather", "Route conditions"],
    };
    options.choose(rng).expect("non-empty")
}

fn draw_cause(
    success: f64,
    failures: &[(FailureCause, f64)],
    rng: &mut ChaCha8Rng,
) -> FailureCause {
    let mut u: f64 = rng.gen();
    if u < success {
        return FailureCause::Success;
    }
    u -= success;
    for &(cause, p) in failures {
        if u < p {
            return cause;
        }
        u -= p;
    }
    FailureCause::Other
}

struct Builder<'a> {
    config: &'a SynthConfig,
    rng: ChaCha8Rng,
    expeditions: Vec<ExpeditionRecord>,
    members: Vec<ClimberRecord>,
    next_climber: usize,
    next_prior: usize,
}

impl<'a> Builder<'a> {
    fn climber_id(&mut self) -> String {
        self.next_climber += 1;
        format!("C{:06}", self.next_climber)
    }

    fn normal(&mut self, mean: f64, sd: f64) -> f64 {
        if sd == 0.0 {
            return mean;
        }
        Normal::new(mean, sd)
            .expect("validated spread")
            .sample(&mut self.rng)
    }

    fn age(&mut self, young: bool) -> u32 {
        if young {
            self.rng.gen_range(20..=34)
        } else {
            self.rng.gen_range(46..=64)
        }
    }

    /// Solo climb on another 8000 m peak a few years before `year`, giving the experience bit.
    fn prior_climb(&mut self, climber_id: &str, year: i32) {
        self.next_prior += 1;
        let id = format!("PX{:05}", self.next_prior);
        let (peak, height) = *OTHER_PEAKS.choose(&mut self.rng).expect("non-empty");
        let prior_year = self
            .rng
            .gen_range((year - 8).max(self.config.years.0)..year);
        self.expeditions.push(ExpeditionRecord {
            expedition_id: id.clone(),
            peak_id: peak.into(),
            peak_height_m: height,
            year: prior_year,
            days_to_summit: self.rng.gen_range(15..=30),
            camps_above_bc: 3,
            n_members: 1,
            n_hired: 0,
            any_death: false,
            members: Vec::new(),
        });
        let age = self.rng.gen_range(30..=60);
        self.members.push(ClimberRecord {
            climber_id: climber_id.into(),
            expedition_id: id,
            age: Some(age),
            sex: Sex::Male,
            nationality: "US".into(),
            o2_ascent: Some(true),
            o2_descent: Some(true),
            hired: Some(false),
            summited: true,
            termination_code: termination_code(FailureCause::Success, &mut self.rng).into(),
        });
    }

    fn everest(&mut self, id: String, c: &CommunityConfig, size: u32, death: bool) {
        let cfg = self.config;
        let year = self.rng.gen_range(cfg.years.0 + 10..=cfg.years.1);
        let hired = ((f64::from(size) * c.hired_fraction).round() as u32).clamp(1, size);
        let days = self.normal(c.days_mean, c.days_sd).round().max(1.0) as u32;
        let camps = self.normal(c.camps_mean, c.camps_sd).round().max(0.0) as u32;
        let failure_total = cfg.failure_mix.sum();
        let p = c.prevalence;
        for k in 0..size {
            let climber_id = self.climber_id();
            let is_hired = k < hired;
            let young = self.rng.gen_bool(p.young);
            let male = self.rng.gen_bool(p.male);
            let o2_up = self.rng.gen_bool(p.o2_ascent);
            let o2_down = self.rng.gen_bool(p.o2_descent);
            if self.rng.gen_bool(p.experienced) {
                self.prior_climb(&climber_id, year);
            }
            let shift = cfg.effects.youth * (f64::from(u8::from(young)) - p.young)
                + cfg.effects.o2_ascent * (f64::from(u8::from(o2_up)) - p.o2_ascent);
            let success = (c.success_rate + shift).clamp(0.0, 1.0);
            let failures: Vec<(FailureCause, f64)> = cfg
                .failure_mix
                .pairs()
                .iter()
                .map(|&(cause, w)| (cause, (1.0 - success) * w / failure_total))
                .collect();
            let mut cause = draw_cause(success, &failures, &mut self.rng);
            if death && k == size - 1 {
                cause = FailureCause::Accident;
            }
            let code = if death && k == size - 1 {
                "Death"
            } else {
                termination_code(cause, &mut self.rng)
            };
            let age = self.age(young);
            let nationality = if is_hired {
                "NP"
            } else {
                NATIONALITIES.choose(&mut self.rng).expect("non-empty")
            };
            self.members.push(ClimberRecord {
                climber_id,
                expedition_id: id.clone(),
                age: Some(age),
                sex: if male { Sex::Male } else { Sex::Female },
                nationality: nationality.into(),
                o2_ascent: Some(o2_up),
                o2_descent: Some(o2_down),
                hired: Some(is_hired),
                summited: cause == FailureCause::Success,
                termination_code: code.into(),
            });
        }
        self.expeditions.push(ExpeditionRecord {
            expedition_id: id,
            peak_id: EVEREST.0.into(),
            peak_height_m: EVEREST.1,
            year,
            days_to_summit: days,
            camps_above_bc: camps,
            n_members: size - hired,
            n_hired: hired,
            any_death: death,
            members: Vec::new(),
        });
    }

    fn veteran_climb(&mut self, id: String, year: i32, climbers: &[(String, bool)]) {
        let cfg = self.config;
        let (peak, height) = *OTHER_PEAKS.choose(&mut self.rng).expect("non-empty");
        let base = cfg.veteran_failures();
        for (climber_id, repeat) in climbers {
            let failures: Vec<(FailureCause, f64)> = base
                .iter()
                .map(|&(c, f)| {
                    (
                        c,
                        if *repeat {
                            f * cfg.partner_multiplier(c)
                        } else {
                            f
                        },
                    )
                })
                .collect();
            let success = 1.0 - failures.iter().map(|f| f.1).sum::<f64>();
            let cause = draw_cause(success, &failures, &mut self.rng);
            let age = self.rng.gen_range(30..=60);
            let male = self.rng.gen_bool(0.8);
            self.members.push(ClimberRecord {
                climber_id: climber_id.clone(),
                expedition_id: id.clone(),
                age: Some(age),
                sex: if male { Sex::Male } else { Sex::Female },
                nationality: NATIONALITIES
                    .choose(&mut self.rng)
                    .expect("non-empty")
                    .to_string(),
                o2_ascent: Some(true),
                o2_descent: Some(false),
                hired: Some(false),
                summited: cause == FailureCause::Success,
                termination_code: termination_code(cause, &mut self.rng).into(),
            });
        }
        self.expeditions.push(ExpeditionRecord {
            expedition_id: id,
            peak_id: peak.into(),
            peak_height_m: height,
            year,
            days_to_summit: self.rng.gen_range(15..=35),
            camps_above_bc: self.rng.gen_range(2..=4),
            n_members: climbers.len() as u32,
            n_hired: 0,
            any_death: false,
            members: Vec::new(),
        });
    }

    /// Returns the number of repeat-partner climbs planted.
    fn veterans(&mut self) -> usize {
        let v = self.config.veterans;
        let (y0, y1) = self.config.years;
        let span = (y1 - y0 + 1) as usize;
        let mut next = 0usize;
        let mut repeats = 0;
        for pair in 0..v.pairs {
            let a = format!("V{:05}a", pair);
            let b = format!("V{:05}b", pair);
            let ka = self.rng.gen_range(v.climbs.0..=v.climbs.1);
            let kb = self.rng.gen_range(v.climbs.0..=v.climbs.1);
            let shorter = ka.min(kb);
            let joint = ((v.joint_fraction * shorter as f64).round() as usize)
                .clamp(2.min(shorter), shorter);
            let mut years: Vec<i32> = index::sample(&mut self.rng, span, joint)
                .into_iter()
                .map(|k| y0 + k as i32)
                .collect();
            years.sort_unstable();
            for (j, &year) in years.iter().enumerate() {
                next += 1;
                let repeat = j > 0;
                repeats += 2 * usize::from(repeat);
                self.veteran_climb(
                    format!("VX{next:06}"),
                    year,
                    &[(a.clone(), repeat), (b.clone(), repeat)],
                );
            }
            for (who, k) in [(&a, ka), (&b, kb)] {
                for _ in joint..k {
                    next += 1;
                    let year = self.rng.gen_range(y0..=y1);
                    self.veteran_climb(format!("VX{next:06}"), year, &[(who.clone(), false)]);
                }
            }
        }
        repeats
    }
}

/// Generates the planted dataset. Identical configurations give identical output.
pub fn generate(config: &SynthConfig) -> Result<SynthOutput> {
    config.validate()?;
    let mut b = Builder {
        config,
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        expeditions: Vec::new(),
        members: Vec::new(),
        next_climber: 0,
        next_prior: 0,
    };

    // exact community counts by largest remainder, then shuffled over expedition ids
    let total_weight: f64 = config.communities.iter().map(|c| c.weight).sum();
    let quotas: Vec<f64> = config
        .communities
        .iter()
        .map(|c| config.n_expeditions as f64 * c.weight / total_weight)
        .collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&i, &j| {
        (quotas[j] - quotas[j].floor()).total_cmp(&(quotas[i] - quotas[i].floor()))
    });
    let short = config.n_expeditions - counts.iter().sum::<usize>();
    for &i in order.iter().take(short) {
        counts[i] += 1;
    }
    let mut labels: Vec<usize> = counts
        .iter()
        .enumerate()
        .flat_map(|(c, &n)| std::iter::repeat_n(c, n))
        .collect();
    labels.shuffle(&mut b.rng);

    let mut expedition_labels = BTreeMap::new();
    for (k, &label) in labels.iter().enumerate() {
        let id = format!("EV{:04}", k + 1);
        let c = &config.communities[label];
        let size = b.rng.gen_range(c.size_range.0..=c.size_range.1);
        b.everest(id.clone(), c, size, false);
        expedition_labels.insert(id, label);
    }
    let mut distractors = Vec::new();
    for k in 0..config.death_distractors + config.small_distractors {
        let id = format!("EVX{:03}", k + 1);
        let c = &config.communities[k % config.communities.len()];
        let death = k < config.death_distractors;
        let size = if death { c.size_range.1 } else { 6 };
        b.everest(id.clone(), c, size, death);
        distractors.push(id);
    }
    let repeat_partner_climbs = b.veterans();

    let mut correlation_signs = BTreeMap::new();
    let weights: Vec<f64> = config
        .communities
        .iter()
        .map(|c| c.weight / total_weight)
        .collect();
    let mean_success: f64 = config
        .communities
        .iter()
        .zip(&weights)
        .map(|(c, w)| w * c.success_rate)
        .sum();
    for kind in LayerKind::FACTORS {
        let values: Vec<f64> = config
            .communities
            .iter()
            .map(|c| config.expected_factor(c, kind))
            .collect();
        let mean: f64 = values.iter().zip(&weights).map(|(v, w)| v * w).sum();
        let cov: f64 = config
            .communities
            .iter()
            .zip(&values)
            .zip(&weights)
            .map(|((c, v), w)| w * (v - mean) * (c.success_rate - mean_success))
            .sum();
        let sign = if cov.abs() < 1e-12 {
            0
        } else {
            cov.signum() as i8
        };
        correlation_signs.insert(kind, sign);
    }

    let mut expeditions = b.expeditions;
    expeditions.sort_by(|x, y| x.expedition_id.cmp(&y.expedition_id));
    let mut members = b.members;
    members
        .sort_by(|x, y| (&x.expedition_id, &x.climber_id).cmp(&(&y.expedition_id, &y.climber_id)));
    Ok(SynthOutput {
        expeditions,
        members,
        ground_truth: GroundTruth {
            seed: config.seed,
            community_names: config.communities.iter().map(|c| c.name.clone()).collect(),
            expedition_labels,
            distractors,
            correlation_signs,
            partner_multipliers: config.partner_effect,
            repeat_partner_climbs,
            config: config.clone(),
        },
    })
}

impl SynthOutput {
    pub fn expeditions_csv(&self) -> Result<String> {
        write_expeditions(&self.expeditions)
    }

    pub fn members_csv(&self) -> Result<String> {
        write_members(&self.members)
    }

    pub fn ground_truth_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.ground_truth)? + "\n")
    }

    /// Writes the two CSVs and `ground_truth.json` into `dir`, creating it if needed.
    pub fn write_to(&self, dir: &Path) -> Result<SynthPaths> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let paths = SynthPaths {
            expeditions: dir.join(EXPEDITIONS_FILE),
            members: dir.join(MEMBERS_FILE),
            ground_truth: dir.join(GROUND_TRUTH_FILE),
        };
        for (path, body) in [
            (&paths.expeditions, self.expeditions_csv()?),
            (&paths.members, self.members_csv()?),
            (&paths.ground_truth, self.ground_truth_json()?),
        ] {
            fs::write(path, body).map_err(|e| Error::io(path, e))?;
        }
        Ok(paths)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partners::repeat_partner_flags;
    use crate::records::{link_and_validate, parse_expeditions, parse_members, CodeMap};

    fn small(seed: u64) -> SynthConfig {
        let mut c = SynthConfig::benchmark(seed);
        c.veterans.pairs = 20;
        c
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = generate(&small(3)).unwrap();
        let b = generate(&small(3)).unwrap();
        assert_eq!(a.expeditions_csv().unwrap(), b.expeditions_csv().unwrap());
        assert_eq!(a.members_csv().unwrap(), b.members_csv().unwrap());
        assert_eq!(
            a.ground_truth_json().unwrap(),
            b.ground_truth_json().unwrap()
        );
        let c = generate(&small(4)).unwrap();
        assert_ne!(a.members_csv().unwrap(), c.members_csv().unwrap());
    }

    #[test]
    fn output_parses_and_links_cleanly() {
        let out = generate(&small(1)).unwrap();
        let e = parse_expeditions(out.expeditions_csv().unwrap().as_bytes(), "e").unwrap();
        let m = parse_members(out.members_csv().unwrap().as_bytes(), "m").unwrap();
        assert!(e.diagnostics.is_empty() && m.diagnostics.is_empty());
        assert_eq!(e.records.len(), out.expeditions.len());
        let ds = link_and_validate(e.records, m.records, CodeMap::default()).unwrap();
        assert!(ds.provenance.diagnostics.is_empty());
        for exp in ds.expeditions.values() {
            assert_eq!(
                exp.members.len() as u32,
                exp.n_members + exp.n_hired,
                "{}",
                exp.expedition_id
            );
        }
    }

    #[test]
    fn single_community_has_one_label() {
        let mut c = small(2);
        c.communities.truncate(1);
        let gt = generate(&c).unwrap().ground_truth;
        assert_eq!(gt.expedition_labels.len(), c.n_expeditions);
        assert!(gt.expedition_labels.values().all(|&l| l == 0));
    }

    #[test]
    fn benchmark_signs() {
        let gt = generate(&small(5)).unwrap().ground_truth;
        assert_eq!(gt.correlation_signs[&LayerKind::ExpeditionSize], 1);
        assert_eq!(gt.correlation_signs[&LayerKind::DaysToSummit], -1);
    }

    #[test]
    fn days_means_within_three_standard_errors() {
        let cfg = small(9);
        let out = generate(&cfg).unwrap();
        for (k, c) in cfg.communities.iter().enumerate() {
            let days: Vec<f64> = out
                .ground_truth
                .expedition_labels
                .iter()
                .filter(|(_, &l)| l == k)
                .map(|(id, _)| {
                    let e = out
                        .expeditions
                        .iter()
                        .find(|e| &e.expedition_id == id)
                        .unwrap();
                    f64::from(e.days_to_summit)
                })
                .collect();
            let n = days.len() as f64;
            let mean = days.iter().sum::<f64>() / n;
            // rounding to whole days adds at most 0.5 of bias-free jitter
            assert!(
                (mean - c.days_mean).abs() < 3.0 * (c.days_sd / n.sqrt()) + 0.1,
                "{}: {mean}",
                c.name
            );
        }
    }

    #[test]
    fn planted_repeat_climbs_match_flags() {
        let out = generate(&small(6)).unwrap();
        let ds = link_and_validate(
            out.expeditions.clone(),
            out.members.clone(),
            CodeMap::default(),
        )
        .unwrap();
        let flagged = repeat_partner_flags(&ds).values().filter(|&&f| f).count();
        assert_eq!(flagged, out.ground_truth.repeat_partner_climbs);
    }

    #[test]
    fn infeasible_configs_rejected() {
        let mut c = small(0);
        c.communities[0].size_range = (0, 4);
        assert!(matches!(generate(&c), Err(Error::InfeasibleConfig(_))));
        let mut c = small(0);
        c.communities.clear();
        assert!(generate(&c).is_err());
        let mut c = small(0);
        c.communities[1].prevalence.male = 1.5;
        assert!(generate(&c).is_err());
        let mut c = small(0);
        c.partner_effect.fatigue = 3.0;
        assert!(generate(&c).is_err());
    }

    #[test]
    fn writes_three_files() {
        let dir = tempfile::tempdir().unwrap();
        let out = generate(&small(8)).unwrap();
        let paths = out.write_to(dir.path()).unwrap();
        let gt: GroundTruth =
            serde_json::from_str(&fs::read_to_string(paths.ground_truth).unwrap()).unwrap();
        assert_eq!(gt, out.ground_truth);
        assert!(fs::read_to_string(paths.members)
            .unwrap()
            .starts_with("climber_id,exp_id"));
    }
}
