//! The report bundle and its plain-text summary.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::centrality::GroupCentralityTable;
use crate::community::{CommunityProfile, Partition};
use crate::multiplex::LayerKind;
use crate::partners::PartnerEffectTable;
use crate::stats::{CorrelationReport, RegressionProjection};

/// Version of every JSON artifact's layout.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportProvenance {
    /// SHA-256 of the canonical analysis settings.
    pub config_hash: String,
    /// SHA-256 of the input files.
    pub dataset_hash: String,
    pub tool_version: String,
    pub louvain_seed: u64,
    pub synthetic_seed: Option<u64>,
    /// Inputs came with a `ground_truth.json`, i.e. from the generator.
    pub synthetic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthScores {
    pub adjusted_rand_index: f64,
    pub n_labeled: usize,
    /// Planted sign agrees with the sign of the measured correlation, per factor.
    pub correlation_sign_matches: BTreeMap<String, bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema_version: u32,
    pub provenance: ReportProvenance,
    /// Canonical `key = value` settings the run used.
    pub settings: String,
    pub n_expeditions_linked: usize,
    pub n_climber_rows_linked: usize,
    pub n_expeditions_analyzed: usize,
    /// Entries in the filter log (expeditions and their climber rows).
    pub n_excluded: usize,
    pub median_age: f64,
    pub diagnostics: Vec<String>,
    pub notes: Vec<String>,
    pub correlations: CorrelationReport<f64>,
    pub regression: RegressionProjection<f64>,
    pub centrality: GroupCentralityTable<f64>,
    pub partition: Partition<f64>,
    pub profiles: Vec<CommunityProfile<f64>>,
    pub partner_effect: PartnerEffectTable,
    pub ground_truth: Option<GroundTruthScores>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{x:.3}"))
}

impl AnalysisReport {
    /// True when the report carries nothing to compare.
    pub fn is_empty(&self) -> bool {
        self.correlations.layers.is_empty() && self.profiles.is_empty()
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "peaknet {} report", self.provenance.tool_version);
        let _ = writeln!(s, "dataset sha256 {}", self.provenance.dataset_hash);
        let _ = writeln!(s, "config sha256  {}", self.provenance.config_hash);
        if self.provenance.synthetic {
            let _ = writeln!(
                s,
                "synthetic data (generator seed {:?})",
                self.provenance.synthetic_seed.unwrap_or(0)
            );
        }
        let _ = writeln!(
            s,
            "\n{} expeditions and {} climber rows linked; {} expeditions analyzed; {} filter-log entries; median age {}",
            self.n_expeditions_linked,
            self.n_climber_rows_linked,
            self.n_expeditions_analyzed,
            self.n_excluded,
            self.median_age
        );
        if !self.diagnostics.is_empty() {
            let _ = writeln!(
                s,
                "{} ingestion diagnostics (see report.json)",
                self.diagnostics.len()
            );
        }

        let _ = writeln!(s, "\nLayer correlations with success rate");
        for l in &self.correlations.layers {
            let _ = writeln!(
                s,
                "  {:<24} r = {:>7.3}  p = {:.3e}  n = {}",
                l.layer.as_str(),
                l.r,
                l.p,
                l.n
            );
        }
        let _ = writeln!(
            s,
            "  regression: rank {} of {}, in-sample RMSE {:.4}",
            self.regression.rank,
            self.regression.coefficients.len(),
            self.regression.fit_residual
        );
        for w in &self.regression.warnings {
            let _ = writeln!(s, "  warning: {w}");
        }

        let _ = writeln!(
            s,
            "\nFeature centrality, summit ({} groups) vs no summit ({} groups)",
            self.centrality.n_success, self.centrality.n_nosummit
        );
        for r in &self.centrality.rows {
            let _ = writeln!(
                s,
                "  {:<24} {:.3} ± {:.3}   {:.3} ± {:.3}",
                r.feature, r.mean_success, r.stderr_success, r.mean_nosummit, r.stderr_nosummit
            );
        }

        let _ = writeln!(
            s,
            "\n{} communities (modularity {:.3}, seed {})",
            self.partition.community_count(),
            self.partition.modularity,
            self.partition.seed
        );
        for p in &self.profiles {
            let f = |k: LayerKind| fmt_opt(p.factor_means.get(&k).copied().flatten());
            let _ = writeln!(
                s,
                "  community {:>2}: {:>3} expeditions, success {:.3}, days {}, camps {}, ratio {}, size {}",
                p.community,
                p.size,
                p.mean_success,
                f(LayerKind::DaysToSummit),
                f(LayerKind::CampsAboveBc),
                f(LayerKind::MemberHiredRatio),
                f(LayerKind::ExpeditionSize)
            );
        }

        let _ = writeln!(
            s,
            "\nRepeat-partner ratios (rate with repeat partner / individual rate)"
        );
        for b in &self.partner_effect.bins {
            let cells: Vec<String> = self
                .partner_effect
                .cells
                .iter()
                .filter(|c| c.bin == b.bin)
                .map(|c| format!("{} {}", c.category, fmt_opt(c.ratio)))
                .collect();
            let _ = writeln!(
                s,
                "  {:>2}-{:<2} climbs ({} climbers, {} with partners): {}",
                b.bin.0,
                b.bin.1,
                b.n_climbers,
                b.n_with_partner,
                cells.join(", ")
            );
        }

        if let Some(gt) = &self.ground_truth {
            let _ = writeln!(
                s,
                "\nAgainst planted structure: adjusted Rand {:.3} over {} expeditions",
                gt.adjusted_rand_index, gt.n_labeled
            );
            for (k, ok) in &gt.correlation_sign_matches {
                let _ = writeln!(
                    s,
                    "  sign of {k}: {}",
                    if *ok { "matches" } else { "differs" }
                );
            }
        }
        for n in &self.notes {
            let _ = writeln!(s, "note: {n}");
        }
        s
    }
}
