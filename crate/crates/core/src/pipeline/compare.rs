//! Side-by-side table of computed values against the published reference values.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::AnalysisReport;
use crate::error::{Error, Result};
use crate::multiplex::LayerKind;

/// Published layer correlations and p-values, in reporting order.
pub const PUBLISHED_CORRELATIONS: [(LayerKind, f64, f64); 5] = [
    (LayerKind::DaysToSummit, -0.45, 5.5e-10),
    (LayerKind::CampsAboveBc, -0.36, 1.15e-6),
    (LayerKind::MemberHiredRatio, -0.12, 0.1),
    (LayerKind::ExpeditionSize, 0.57, 5.7e-16),
    (LayerKind::IntraExpeditionGraph, 0.84, 8.9e-47),
];

/// Published mean success rates of the three communities, lowest first.
pub const PUBLISHED_COMMUNITY_SUCCESS: [f64; 3] = [0.28, 0.32, 0.68];

pub const SYNTHETIC_BANNER: &str = "not the published dataset: values come from synthetic data";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub quantity: String,
    pub published: f64,
    pub computed: Option<f64>,
    pub abs_diff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub banner: Option<String>,
    pub rows: Vec<ComparisonRow>,
}

fn row(quantity: String, published: f64, computed: Option<f64>) -> ComparisonRow {
    ComparisonRow {
        quantity,
        published,
        computed,
        abs_diff: computed.map(|c| (c - published).abs()),
    }
}

/// Lines up a report with the published values. No pass/fail judgement is made.
pub fn compare_to_published(report: &AnalysisReport) -> Result<ComparisonTable> {
    if report.is_empty() {
        return Err(Error::EmptyReport);
    }
    let mut rows = Vec::new();
    for (kind, r, _) in PUBLISHED_CORRELATIONS {
        rows.push(row(
            format!("r[{kind}]"),
            r,
            report.correlations.get(kind).map(|l| l.r),
        ));
    }
    for (kind, _, p) in PUBLISHED_CORRELATIONS {
        rows.push(row(
            format!("p[{kind}]"),
            p,
            report.correlations.get(kind).map(|l| l.p),
        ));
    }
    // profiles are already sorted by ascending success
    for (k, &published) in PUBLISHED_COMMUNITY_SUCCESS.iter().enumerate() {
        let computed = if report.profiles.len() == PUBLISHED_COMMUNITY_SUCCESS.len() {
            Some(report.profiles[k].mean_success)
        } else {
            None
        };
        rows.push(row(
            format!("community_success[{}]", k + 1),
            published,
            computed,
        ));
    }
    Ok(ComparisonTable {
        banner: report
            .provenance
            .synthetic
            .then(|| SYNTHETIC_BANNER.to_string()),
        rows,
    })
}

impl ComparisonTable {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["quantity", "published", "computed", "abs_diff"])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.quantity.clone(),
                r.published.to_string(),
                opt(r.computed),
                opt(r.abs_diff),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("utf-8"))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        if let Some(b) = &self.banner {
            let _ = writeln!(s, "*** {b} ***");
        }
        let _ = writeln!(
            s,
            "{:<36} {:>12} {:>12} {:>12}",
            "quantity", "published", "computed", "|diff|"
        );
        let cell = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4e}"));
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<36} {:>12} {:>12} {:>12}",
                r.quantity,
                format!("{:.4e}", r.published),
                cell(r.computed),
                cell(r.abs_diff)
            );
        }
        s
    }
}
