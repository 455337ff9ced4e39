//! Flat `key = value` run configuration.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bipartite::{AgeDirection, BinarizeOptions};
use crate::centrality::PowerIteration;
use crate::community::ProfileCentrality;
use crate::error::{Error, Result};
use crate::multiplex::{validate_weights, IntraLayerMode, LAYER_COUNT};
use crate::partners::{PartnerAggregation, PartnerConfig};
use crate::records::{FilterCriteria, MemberScope};

/// Every recognised key with its default, in canonical order.
pub const KEYS: &[(&str, &str)] = &[
    ("expeditions", "expeditions.csv"),
    ("members", "members.csv"),
    ("code_map", ""),
    ("output_dir", "out"),
    ("peak", "EVER"),
    ("min_size", "12"),
    ("exclude_death", "true"),
    ("median_age", ""),
    ("layer_weights", ""),
    ("louvain_seed", "42"),
    ("resolution", "1"),
    ("partner_min_climbs", "15"),
    ("partner_bin_width", "5"),
    ("partner_max_climbs", "40"),
    ("partner_aggregation", "per_climber_mean"),
    ("age_direction", "below_median"),
    ("intra_layer", "similarity"),
    ("regression_diagonal", "true"),
    ("include_hired", "true"),
    ("member_scope", "all_listed"),
    ("profile_centrality", "per_expedition"),
    ("centrality_tol", "1e-10"),
    ("centrality_max_iter", "100000"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub expeditions: PathBuf,
    pub members: PathBuf,
    /// Optional `termination_code,cause` table replacing the built-in one.
    pub code_map: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub filter: FilterCriteria,
    /// Overrides the median age computed from the filtered climbers.
    pub median_age: Option<f64>,
    /// Layer weights in reporting order; uniform when absent.
    pub layer_weights: Option<[f64; LAYER_COUNT]>,
    pub louvain_seed: u64,
    pub resolution: f64,
    pub partners: PartnerConfig,
    pub binarize: BinarizeOptions,
    pub intra_layer: IntraLayerMode,
    pub regression_diagonal: bool,
    pub member_scope: MemberScope,
    pub profile_centrality: ProfileCentrality,
    pub power: PowerIteration,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            expeditions: "expeditions.csv".into(),
            members: "members.csv".into(),
            code_map: None,
            output_dir: "out".into(),
            filter: FilterCriteria::default(),
            median_age: None,
            layer_weights: None,
            louvain_seed: 42,
            resolution: 1.0,
            partners: PartnerConfig::default(),
            binarize: BinarizeOptions::default(),
            intra_layer: IntraLayerMode::Similarity,
            regression_diagonal: true,
            member_scope: MemberScope::AllListed,
            profile_centrality: ProfileCentrality::PerExpedition,
            power: PowerIteration::default(),
        }
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(invalid(key, v, "a boolean")),
    }
}

fn parse_num<N: std::str::FromStr>(key: &str, v: &str, what: &str) -> Result<N> {
    v.parse().map_err(|_| invalid(key, v, what))
}

fn invalid(key: &str, value: &str, expected: &str) -> Error {
    Error::Config(format!("`{key}`: expected {expected}, got `{value}`"))
}

fn choice<E: Copy>(key: &str, v: &str, options: &[(&str, E)]) -> Result<E> {
    options
        .iter()
        .find(|(name, _)| name.eq_ignore_ascii_case(v))
        .map(|(_, e)| *e)
        .ok_or_else(|| {
            let names: Vec<&str> = options.iter().map(|o| o.0).collect();
            invalid(key, v, &format!("one of {}", names.join("|")))
        })
}

impl RunConfig {
    /// Reads a config file; relative paths inside it resolve against its directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, base)
    }

    /// Parses `key = value` lines. Blank lines and `#` comments are ignored.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.resolve_paths(base_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.expeditions);
        fix(&mut self.members);
        fix(&mut self.output_dir);
        if let Some(p) = self.code_map.as_mut() {
            fix(p);
        }
    }

    /// Sets one key. Used for file lines and command-line overrides alike.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value;
        let opt = |v: &str| (!v.is_empty()).then(|| v.to_string());
        match key {
            "expeditions" => self.expeditions = v.into(),
            "members" => self.members = v.into(),
            "code_map" => self.code_map = opt(v).map(PathBuf::from),
            "output_dir" => self.output_dir = v.into(),
            "peak" => {
                self.filter.peak_id = match v.to_ascii_lowercase().as_str() {
                    "" | "any" | "all" => None,
                    _ => Some(v.to_string()),
                }
            }
            "min_size" => self.filter.min_size = parse_num(key, v, "a count")?,
            "exclude_death" => self.filter.exclude_death = parse_bool(key, v)?,
            "median_age" => {
                self.median_age = match v {
                    "" | "auto" => None,
                    _ => Some(parse_num(key, v, "an age in years")?),
                }
            }
            "layer_weights" => {
                self.layer_weights = match v {
                    "" | "uniform" => None,
                    _ => {
                        let parts = v
                            .split(',')
                            .map(|s| parse_num::<f64>(key, s.trim(), "comma-separated numbers"))
                            .collect::<Result<Vec<_>>>()?;
                        let w: [f64; LAYER_COUNT] = parts
                            .try_into()
                            .map_err(|_| invalid(key, v, "exactly five weights"))?;
                        Some(w)
                    }
                }
            }
            "louvain_seed" => self.louvain_seed = parse_num(key, v, "an unsigned integer")?,
            "resolution" => self.resolution = parse_num(key, v, "a number")?,
            "partner_min_climbs" => self.partners.min_climbs = parse_num(key, v, "a count")?,
            "partner_bin_width" => self.partners.bin_width = parse_num(key, v, "a count")?,
            "partner_max_climbs" => self.partners.max_climbs = parse_num(key, v, "a count")?,
            "partner_aggregation" => {
                self.partners.aggregation = choice(
                    key,
                    v,
                    &[
                        ("per_climber_mean", PartnerAggregation::PerClimberMean),
                        ("pooled", PartnerAggregation::Pooled),
                    ],
                )?
            }
            "age_direction" => {
                self.binarize.age_direction = choice(
                    key,
                    v,
                    &[
                        ("below_median", AgeDirection::BelowMedian),
                        ("above_median", AgeDirection::AboveMedian),
                    ],
                )?
            }
            "intra_layer" => {
                self.intra_layer = choice(
                    key,
                    v,
                    &[
                        ("similarity", IntraLayerMode::Similarity),
                        ("distance", IntraLayerMode::Distance),
                    ],
                )?
            }
            "regression_diagonal" => self.regression_diagonal = parse_bool(key, v)?,
            "include_hired" => self.binarize.include_hired = parse_bool(key, v)?,
            "member_scope" => {
                self.member_scope = choice(
                    key,
                    v,
                    &[
                        ("all_listed", MemberScope::AllListed),
                        ("paying_only", MemberScope::PayingOnly),
                    ],
                )?
            }
            "profile_centrality" => {
                self.profile_centrality = choice(
                    key,
                    v,
                    &[
                        ("per_expedition", ProfileCentrality::PerExpedition),
                        ("mean_graph", ProfileCentrality::MeanGraph),
                    ],
                )?
            }
            "centrality_tol" => self.power.tol = parse_num(key, v, "a positive number")?,
            "centrality_max_iter" => self.power.max_iter = parse_num(key, v, "a count")?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.partners.bins()?;
        if let Some(w) = &self.layer_weights {
            validate_weights(w).map_err(|e| Error::Config(e.to_string()))?;
        }
        if !(self.resolution > 0.0) {
            return Err(Error::Config(format!(
                "resolution must be positive, got {}",
                self.resolution
            )));
        }
        if !(self.power.tol > 0.0) || self.power.max_iter == 0 {
            return Err(Error::Config(
                "centrality tolerance and iteration cap must be positive".into(),
            ));
        }
        if self.median_age.is_some_and(|m| !m.is_finite()) {
            return Err(Error::Config("median_age must be finite".into()));
        }
        Ok(())
    }

    /// Canonical text of the analysis settings, excluding file locations.
    ///
    /// Two runs over the same data with the same settings hash identically no
    /// matter where the files live.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        let weights = self
            .layer_weights
            .map(|w| {
                w.iter()
                    .map(|x| x.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .unwrap_or_else(|| "uniform".into());
        let enum_name = |v: serde_json::Value| v.as_str().unwrap_or_default().to_string();
        let rows: Vec<(&str, String)> = vec![
            (
                "peak",
                self.filter.peak_id.clone().unwrap_or_else(|| "any".into()),
            ),
            ("min_size", self.filter.min_size.to_string()),
            ("exclude_death", self.filter.exclude_death.to_string()),
            (
                "median_age",
                self.median_age.map_or("auto".into(), |m| m.to_string()),
            ),
            ("layer_weights", weights),
            ("louvain_seed", self.louvain_seed.to_string()),
            ("resolution", self.resolution.to_string()),
            ("partner_min_climbs", self.partners.min_climbs.to_string()),
            ("partner_bin_width", self.partners.bin_width.to_string()),
            ("partner_max_climbs", self.partners.max_climbs.to_string()),
            (
                "partner_aggregation",
                enum_name(serde_json::json!(self.partners.aggregation)),
            ),
            (
                "age_direction",
                enum_name(serde_json::json!(self.binarize.age_direction)),
            ),
            (
                "intra_layer",
                enum_name(serde_json::json!(self.intra_layer)),
            ),
            ("regression_diagonal", self.regression_diagonal.to_string()),
            ("include_hired", self.binarize.include_hired.to_string()),
            (
                "member_scope",
                enum_name(serde_json::json!(self.member_scope)),
            ),
            (
                "profile_centrality",
                enum_name(serde_json::json!(self.profile_centrality)),
            ),
            ("centrality_tol", self.power.tol.to_string()),
            ("centrality_max_iter", self.power.max_iter.to_string()),
        ];
        for (k, v) in rows {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_key_table() {
        let cfg = RunConfig::parse("", Path::new("")).unwrap();
        assert_eq!(cfg, RunConfig::default());
        let mut from_table = RunConfig::default();
        for (k, v) in KEYS {
            from_table.set(k, v).unwrap();
        }
        assert_eq!(from_table, RunConfig::default());
    }

    #[test]
    fn parses_every_toggle() {
        let text = "\
            # comment\n\
            expeditions = data/e.csv\n\
            peak = any\n\
            min_size = 8   # trailing comment\n\
            median_age = 38.5\n\
            layer_weights = 0.4, 0.1, 0.1, 0.2, 0.2\n\
            partner_aggregation = pooled\n\
            age_direction = above_median\n\
            intra_layer = distance\n\
            regression_diagonal = false\n\
            include_hired = no\n\
            member_scope = paying_only\n\
            profile_centrality = mean_graph\n";
        let cfg = RunConfig::parse(text, Path::new("/base")).unwrap();
        assert_eq!(cfg.expeditions, PathBuf::from("/base/data/e.csv"));
        assert_eq!(cfg.filter.peak_id, None);
        assert_eq!(cfg.filter.min_size, 8);
        assert_eq!(cfg.median_age, Some(38.5));
        assert_eq!(cfg.layer_weights, Some([0.4, 0.1, 0.1, 0.2, 0.2]));
        assert_eq!(cfg.partners.aggregation, PartnerAggregation::Pooled);
        assert_eq!(cfg.binarize.age_direction, AgeDirection::AboveMedian);
        assert_eq!(cfg.intra_layer, IntraLayerMode::Distance);
        assert!(!cfg.regression_diagonal && !cfg.binarize.include_hired);
        assert_eq!(cfg.member_scope, MemberScope::PayingOnly);
        assert_eq!(cfg.profile_centrality, ProfileCentrality::MeanGraph);
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "nonsense",
            "colour = blue",
            "min_size = many",
            "layer_weights = 1,0,0",
            "layer_weights = 0.5,0.5,0.5,0,0",
            "intra_layer = sideways",
            "partner_bin_width = 0",
            "resolution = -1",
        ] {
            let err = RunConfig::parse(text, Path::new("")).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{text}: {err}");
        }
    }

    #[test]
    fn canonical_form_ignores_paths() {
        let a = RunConfig::parse("expeditions = a.csv\noutput_dir = x", Path::new("/1")).unwrap();
        let b = RunConfig::parse("expeditions = b.csv\noutput_dir = y", Path::new("/2")).unwrap();
        assert_eq!(a.canonical(), b.canonical());
        let c = RunConfig::parse("louvain_seed = 1", Path::new("")).unwrap();
        assert_ne!(a.canonical(), c.canonical());
    }
}
