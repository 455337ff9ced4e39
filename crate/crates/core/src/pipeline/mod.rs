//! End-to-end runs: ingest, filter, partner effect, feature graphs, centrality
//! groups, multiplex, correlations, communities and profiles.
//!
//! Every stage writes its artifact into the output directory. The three heavy
//! intermediates (linked dataset, feature graphs, multiplex) are cached as
//! versioned JSON keyed by a fingerprint of their inputs, so each stage can run
//! on its own and reuse whatever an earlier stage left behind.

mod compare;
mod config;
mod report;

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use compare::{
    compare_to_published, ComparisonRow, ComparisonTable, PUBLISHED_COMMUNITY_SUCCESS,
    PUBLISHED_CORRELATIONS, SYNTHETIC_BANNER,
};
pub use config::{RunConfig, KEYS};
pub use report::{AnalysisReport, GroundTruthScores, ReportProvenance, SCHEMA_VERSION};

use crate::bipartite::{
    build_bipartite, median_age, normalize_by_size, project, GraphRecord, FEATURE_NAMES,
};
use crate::centrality::{
    aggregate_group, group_centrality, split_by_outcome, GroupCentralityTable,
};
use crate::community::{
    adjusted_rand_index, community_profiles, louvain, profiles_to_csv, CommunityProfile, Partition,
};
use crate::error::{Error, Result};
use crate::multiplex::{aggregate, build_multiplex, MultiplexGraph, MultiplexRecord};
use crate::partners::{partner_effect, PartnerEffectTable};
use crate::records::{
    filter_expeditions, link_and_validate, parse_expeditions, parse_members, CodeMap, Dataset,
    Diagnostic, ExperienceIndex,
};
use crate::stats::{
    fit_projection, layer_success_correlations, success_rates, CorrelationReport,
    RegressionProjection,
};
use crate::synth::{GroundTruth, GROUND_TRUTH_FILE};
use crate::{FeatureGraph, Multiplex};

pub const DATASET_CACHE: &str = "dataset.json";
pub const GRAPHS_CACHE: &str = "graphs.json";
pub const MULTIPLEX_CACHE: &str = "multiplex.json";

/// Names of every artifact a full run writes.
pub const ARTIFACTS: [&str; 15] = [
    DATASET_CACHE,
    GRAPHS_CACHE,
    MULTIPLEX_CACHE,
    "partner_effect.csv",
    "partner_effect.json",
    "group_centrality.csv",
    "group_graphs.json",
    "correlations.csv",
    "correlations.json",
    "regression.json",
    "partition.csv",
    "community_profiles.csv",
    "community_profiles.json",
    "report.json",
    "summary.txt",
];

fn sha256_hex(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Serialize + DeserializeOwned")]
struct Cache<T> {
    schema_version: u32,
    fingerprint: String,
    #[serde(flatten)]
    body: T,
}

/// Linked (unfiltered) records plus the content hash of the inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestedData {
    pub dataset_hash: String,
    pub dataset: Dataset,
}

/// Feature graphs of the filtered expeditions, as raw co-occurrence counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSet {
    pub median_age: f64,
    pub diagnostics: Vec<Diagnostic>,
    pub graphs: Vec<GraphRecord<f64>>,
    pub success_groups: Vec<GraphRecord<f64>>,
    pub nosummit_groups: Vec<GraphRecord<f64>>,
}

impl GraphSet {
    /// Size-normalized graphs in expedition-id order.
    pub fn normalized(&self) -> Result<Vec<(String, FeatureGraph)>> {
        self.graphs
            .iter()
            .map(|r| Ok((r.expedition_id.clone(), normalize_by_size(&r.to_graph()?))))
            .collect()
    }
}

/// Summit and no-summit group centralities with the aggregated group graphs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralityResult {
    pub table: GroupCentralityTable<f64>,
    pub success_graph: Option<GraphRecord<f64>>,
    pub nosummit_graph: Option<GraphRecord<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub report: CorrelationReport<f64>,
    pub regression: RegressionProjection<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityResult {
    pub partition: Partition<f64>,
    pub profiles: Vec<CommunityProfile<f64>>,
}

/// A configured run rooted at its output directory.
pub struct Pipeline {
    pub config: RunConfig,
    dataset: Option<IngestedData>,
    graphs: Option<GraphSet>,
    multiplex: Option<Multiplex>,
}

impl Pipeline {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        fs::create_dir_all(&config.output_dir).map_err(|e| Error::io(&config.output_dir, e))?;
        Ok(Pipeline {
            config,
            dataset: None,
            graphs: None,
            multiplex: None,
        })
    }

    pub fn output(&self, name: &str) -> PathBuf {
        self.config.output_dir.join(name)
    }

    fn write(&self, name: &str, body: &str) -> Result<PathBuf> {
        let path = self.output(name);
        write_file(&path, body)?;
        Ok(path)
    }

    fn load_cache<T: DeserializeOwned + Serialize>(
        &self,
        name: &str,
        fingerprint: &str,
    ) -> Option<T> {
        let bytes = fs::read(self.output(name)).ok()?;
        let cache: Cache<T> = serde_json::from_slice(&bytes).ok()?;
        (cache.schema_version == SCHEMA_VERSION && cache.fingerprint == fingerprint)
            .then_some(cache.body)
    }

    fn store_cache<T: DeserializeOwned + Serialize>(
        &self,
        name: &str,
        fingerprint: &str,
        body: T,
    ) -> Result<T> {
        let cache = Cache {
            schema_version: SCHEMA_VERSION,
            fingerprint: fingerprint.to_string(),
            body,
        };
        self.write(name, &to_json(&cache)?)?;
        Ok(cache.body)
    }

    fn input_hash(&self) -> Result<String> {
        let e = read_file(&self.config.expeditions)?;
        let m = read_file(&self.config.members)?;
        let c = match &self.config.code_map {
            Some(p) => read_file(p)?,
            None => Vec::new(),
        };
        Ok(sha256_hex(&[&e, &m, &c]))
    }

    /// Parses and links the input files; reuses `dataset.json` when the inputs are unchanged.
    pub fn ingest(&mut self) -> Result<&IngestedData> {
        if self.dataset.is_none() {
            let hash = self.input_hash()?;
            let data = match self.load_cache::<IngestedData>(DATASET_CACHE, &hash) {
                Some(d) => d,
                None => {
                    let d = ingest_files(&self.config, hash.clone())?;
                    self.store_cache(DATASET_CACHE, &hash, d)?
                }
            };
            self.dataset = Some(data);
        }
        Ok(self.dataset.as_ref().expect("set above"))
    }

    pub fn filtered(&mut self) -> Result<Dataset> {
        let criteria = self.config.filter.clone();
        let ds = &self.ingest()?.dataset;
        let out = filter_expeditions(ds, &criteria);
        if out.expeditions.is_empty() {
            return Err(Error::TooFew { needed: 1, got: 0 });
        }
        Ok(out)
    }

    /// Partner effect over the full linked dataset; writes the partner_effect artifacts.
    pub fn partners(&mut self) -> Result<PartnerEffectTable> {
        let cfg = self.config.partners;
        let table = partner_effect(&self.ingest()?.dataset, &cfg)?;
        self.write("partner_effect.csv", &table.to_csv()?)?;
        self.write("partner_effect.json", &to_json(&table.plot_data())?)?;
        Ok(table)
    }

    fn graphs_fingerprint(&mut self) -> Result<String> {
        let base = self.ingest()?.dataset_hash.clone();
        let c = &self.config;
        let settings = serde_json::to_string(&(&c.filter, c.median_age, &c.binarize))?;
        Ok(sha256_hex(&[base.as_bytes(), settings.as_bytes()]))
    }

    /// Feature graphs of every filtered expedition; reuses `graphs.json` when possible.
    pub fn graphs(&mut self) -> Result<&GraphSet> {
        if self.graphs.is_none() {
            let fp = self.graphs_fingerprint()?;
            let set = match self.load_cache::<GraphSet>(GRAPHS_CACHE, &fp) {
                Some(g) => g,
                None => {
                    let filtered = self.filtered()?;
                    let linked = &self
                        .dataset
                        .as_ref()
                        .expect("ingested by filtered()")
                        .dataset;
                    let set = build_graphs(linked, &filtered, &self.config)?;
                    self.store_cache(GRAPHS_CACHE, &fp, set)?
                }
            };
            self.graphs = Some(set);
        }
        Ok(self.graphs.as_ref().expect("set above"))
    }

    /// Group centralities; writes group_centrality.csv and group_graphs.json.
    pub fn centrality(&mut self) -> Result<CentralityResult> {
        let power = self.config.power;
        let set = self.graphs()?;
        let to_graphs = |records: &[GraphRecord<f64>]| -> Result<Vec<FeatureGraph>> {
            records.iter().map(|r| r.to_graph()).collect()
        };
        let success = to_graphs(&set.success_groups)?;
        let nosummit = to_graphs(&set.nosummit_groups)?;
        let table = group_centrality(&success, &nosummit, &power)?;
        let mean_graph = |gs: &[FeatureGraph], label: &str| -> Result<Option<GraphRecord<f64>>> {
            if gs.is_empty() {
                return Ok(None);
            }
            let normalized: Vec<FeatureGraph> = gs.iter().map(normalize_by_size).collect();
            Ok(Some(GraphRecord::new(
                label,
                &aggregate_group(&normalized)?,
            )))
        };
        let result = CentralityResult {
            success_graph: mean_graph(&success, "summit")?,
            nosummit_graph: mean_graph(&nosummit, "no_summit")?,
            table,
        };
        self.write("group_centrality.csv", &centrality_csv(&result.table)?)?;
        let plot = serde_json::json!({
            "feature_order": FEATURE_NAMES,
            "summit": result.success_graph,
            "no_summit": result.nosummit_graph,
            "n_summit_groups": result.table.n_success,
            "n_no_summit_groups": result.table.n_nosummit,
        });
        self.write("group_graphs.json", &to_json(&plot)?)?;
        Ok(result)
    }

    /// The five-layer multiplex over the filtered expeditions; reuses `multiplex.json`.
    pub fn multiplex(&mut self) -> Result<&Multiplex> {
        if self.multiplex.is_none() {
            let fp = sha256_hex(&[
                self.graphs_fingerprint()?.as_bytes(),
                serde_json::to_string(&self.config.intra_layer)?.as_bytes(),
            ]);
            let record = match self.load_cache::<MultiplexRecord<f64>>(MULTIPLEX_CACHE, &fp) {
                Some(r) => r,
                None => {
                    let filtered = self.filtered()?;
                    let graphs = self.graphs()?.normalized()?;
                    let e = build_multiplex(&filtered, &graphs, self.config.intra_layer)?;
                    self.store_cache(MULTIPLEX_CACHE, &fp, MultiplexRecord::new(&e))?
                }
            };
            self.multiplex = Some(record.to_graph()?);
        }
        Ok(self.multiplex.as_ref().expect("set above"))
    }

    /// Regression projection and layer–success correlations; writes the correlations artifacts.
    pub fn correlate(&mut self) -> Result<CorrelationResult> {
        let filtered = self.filtered()?;
        let graphs = self.graphs()?.normalized()?;
        let e = self.multiplex()?.clone();
        let scope = self.config.member_scope;
        let y = success_rates::<f64>(&filtered, &e.expedition_ids, scope)?;
        let only: Vec<FeatureGraph> = graphs.iter().map(|(_, g)| g.clone()).collect();
        let regression = fit_projection(&only, &y, self.config.regression_diagonal)?;
        let report = layer_success_correlations(&filtered, &e, &graphs, &regression, scope)?;
        self.write("correlations.csv", &report.to_csv()?)?;
        self.write("correlations.json", &to_json(&report)?)?;
        self.write("regression.json", &to_json(&regression)?)?;
        Ok(CorrelationResult { report, regression })
    }

    /// Aggregation, Louvain and community profiles; writes the partition and community_profiles artifacts.
    pub fn communities(&mut self) -> Result<CommunityResult> {
        let filtered = self.filtered()?;
        let graphs = self.graphs()?.normalized()?;
        let e = self.multiplex()?.clone();
        let cfg = self.config.clone();
        let partition = partition(&e, &cfg)?;
        let profiles = community_profiles(
            &partition,
            &filtered,
            &graphs,
            cfg.member_scope,
            cfg.profile_centrality,
            &cfg.power,
        )?;
        self.write("partition.csv", &partition.to_csv()?)?;
        self.write("community_profiles.csv", &profiles_to_csv(&profiles)?)?;
        self.write("community_profiles.json", &to_json(&profiles)?)?;
        Ok(CommunityResult {
            partition,
            profiles,
        })
    }

    /// Runs every stage and writes `report.json` and `summary.txt`.
    pub fn run(&mut self) -> Result<AnalysisReport> {
        let partners = self.partners()?;
        let centrality = self.centrality()?;
        let correlations = self.correlate()?;
        let communities = self.communities()?;
        let filtered = self.filtered()?;
        let ingested = self.ingest()?.clone();
        let graphs = self.graphs()?.clone();
        let notes = self.multiplex()?.notes.clone();

        let ground_truth = self.ground_truth()?;
        let scores = ground_truth
            .as_ref()
            .map(|gt| score_against(gt, &communities.partition, &correlations.report))
            .transpose()?;
        let report = AnalysisReport {
            schema_version: SCHEMA_VERSION,
            provenance: ReportProvenance {
                config_hash: sha256_hex(&[self.config.canonical().as_bytes()]),
                dataset_hash: ingested.dataset_hash.clone(),
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                louvain_seed: self.config.louvain_seed,
                synthetic_seed: ground_truth.as_ref().map(|g| g.seed),
                synthetic: ground_truth.is_some(),
            },
            settings: self.config.canonical(),
            n_expeditions_linked: ingested.dataset.expeditions.len(),
            n_climber_rows_linked: ingested.dataset.climbers.len(),
            n_expeditions_analyzed: graphs.graphs.len(),
            n_excluded: filtered.provenance.filter_log.len(),
            median_age: graphs.median_age,
            diagnostics: ingested
                .dataset
                .provenance
                .diagnostics
                .iter()
                .chain(&graphs.diagnostics)
                .map(|d| d.to_string())
                .collect(),
            notes,
            correlations: correlations.report,
            regression: correlations.regression,
            centrality: centrality.table,
            partition: communities.partition,
            profiles: communities.profiles,
            partner_effect: partners,
            ground_truth: scores,
        };
        self.write("report.json", &to_json(&report)?)?;
        self.write("summary.txt", &report.summary())?;
        Ok(report)
    }

    /// Ground truth of a synthetic dataset sitting next to the expedition file, if any.
    pub fn ground_truth(&self) -> Result<Option<GroundTruth>> {
        let dir = self.config.expeditions.parent().unwrap_or(Path::new(""));
        let path = dir.join(GROUND_TRUTH_FILE);
        if !path.exists() {
            return Ok(None);
        }
        let bytes = read_file(&path)?;
        Ok(Some(serde_json::from_slice(&bytes)?))
    }
}

fn ingest_files(cfg: &RunConfig, dataset_hash: String) -> Result<IngestedData> {
    let open = |p: &Path| fs::File::open(p).map_err(|e| Error::io(p, e));
    let name = |p: &Path| p.display().to_string();
    let exps = parse_expeditions(open(&cfg.expeditions)?, &name(&cfg.expeditions))?;
    let members = parse_members(open(&cfg.members)?, &name(&cfg.members))?;
    let code_map = match &cfg.code_map {
        Some(p) => CodeMap::from_csv(open(p)?, &name(p))?,
        None => CodeMap::default(),
    };
    let mut dataset = link_and_validate(exps.records, members.records, code_map)?;
    let mut diagnostics = exps.diagnostics;
    diagnostics.extend(members.diagnostics);
    diagnostics.append(&mut dataset.provenance.diagnostics);
    dataset.provenance.diagnostics = diagnostics;
    dataset.provenance.source = format!(
        "{}; {}",
        cfg.expeditions
            .file_name()
            .map_or_else(String::new, |f| f.to_string_lossy().into_owned()),
        cfg.members
            .file_name()
            .map_or_else(String::new, |f| f.to_string_lossy().into_owned()),
    );
    Ok(IngestedData {
        dataset_hash,
        dataset,
    })
}

/// Builds count graphs per filtered expedition, plus summit/no-summit subgroup graphs.
///
/// Experience looks at the whole linked history; the median age comes from the
/// filtered climbers unless overridden.
pub fn build_graphs(linked: &Dataset, filtered: &Dataset, cfg: &RunConfig) -> Result<GraphSet> {
    let median = cfg
        .median_age
        .unwrap_or_else(|| median_age(&filtered.ages()));
    let experience = ExperienceIndex::new(linked);
    let mut diagnostics = Vec::new();
    let mut bipartites = Vec::new();
    let mut graphs = Vec::new();
    for exp in filtered.expeditions.values() {
        match build_bipartite(exp, filtered, median, &experience, &cfg.binarize) {
            Ok((bg, diags)) => {
                diagnostics.extend(diags);
                graphs.push(GraphRecord::new(&exp.expedition_id, &project::<f64>(&bg)?));
                bipartites.push(bg);
            }
            Err(Error::EmptyBipartite(id)) => diagnostics.push(Diagnostic {
                source: "graphs".into(),
                line: 0,
                message: format!("expedition {id} has no usable climber rows; skipped"),
            }),
            Err(e) => return Err(e),
        }
    }
    let groups = split_by_outcome::<f64>(filtered, &bipartites)?;
    let records =
        |gs: &[(String, FeatureGraph)]| gs.iter().map(|(id, g)| GraphRecord::new(id, g)).collect();
    Ok(GraphSet {
        median_age: median,
        diagnostics,
        graphs,
        success_groups: records(&groups.success),
        nosummit_groups: records(&groups.nosummit),
    })
}

/// Louvain partition of the aggregated similarity graph, labelled with expedition ids.
pub fn partition(e: &MultiplexGraph<f64>, cfg: &RunConfig) -> Result<Partition<f64>> {
    let s = aggregate(e, cfg.layer_weights)?;
    let mut p = louvain(&s.weights, cfg.louvain_seed, cfg.resolution)?;
    p.expedition_ids = e.expedition_ids.clone();
    Ok(p)
}

fn centrality_csv(t: &GroupCentralityTable<f64>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "feature",
        "mean_success",
        "stderr_success",
        "mean_nosummit",
        "stderr_nosummit",
    ])?;
    for r in &t.rows {
        w.write_record([
            r.feature.clone(),
            r.mean_success.to_string(),
            r.stderr_success.to_string(),
            r.mean_nosummit.to_string(),
            r.stderr_nosummit.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("utf-8"))
}

/// Agreement of a run with the planted structure of a synthetic dataset.
pub fn score_against(
    truth: &GroundTruth,
    partition: &Partition<f64>,
    correlations: &CorrelationReport<f64>,
) -> Result<GroundTruthScores> {
    let mut planted = Vec::new();
    let mut found = Vec::new();
    for (id, &c) in partition.expedition_ids.iter().zip(&partition.assignment) {
        if let Some(&label) = truth.expedition_labels.get(id) {
            planted.push(label);
            found.push(c);
        }
    }
    let sign_matches = truth
        .correlation_signs
        .iter()
        .filter(|(_, &s)| s != 0)
        .map(|(kind, &s)| {
            let agrees = correlations
                .get(*kind)
                .is_some_and(|l| (l.r > 0.0) == (s > 0));
            (kind.to_string(), agrees)
        })
        .collect();
    Ok(GroundTruthScores {
        adjusted_rand_index: adjusted_rand_index(&planted, &found)?,
        n_labeled: planted.len(),
        correlation_sign_matches: sign_matches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SynthConfig};

    fn small_run(dir: &Path) -> RunConfig {
        let mut synth = SynthConfig::benchmark(11);
        synth.veterans.pairs = 30;
        generate(&synth)
            .unwrap()
            .write_to(&dir.join("data"))
            .unwrap();
        RunConfig {
            expeditions: dir.join("data/expeditions.csv"),
            members: dir.join("data/members.csv"),
            output_dir: dir.join("out"),
            ..RunConfig::default()
        }
    }

    #[test]
    fn full_run_writes_every_artifact() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_run(dir.path());
        let report = Pipeline::new(cfg.clone()).unwrap().run().unwrap();
        for name in ARTIFACTS {
            assert!(cfg.output_dir.join(name).exists(), "{name}");
        }
        assert_eq!(report.correlations.layers.len(), 5);
        assert!(!report.profiles.is_empty());
        assert!(report.provenance.synthetic);
        assert!(report.ground_truth.is_some());
    }

    #[test]
    fn stages_reuse_caches() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_run(dir.path());
        Pipeline::new(cfg.clone()).unwrap().multiplex().unwrap();
        let before = fs::read(cfg.output_dir.join(MULTIPLEX_CACHE)).unwrap();
        // a fresh pipeline picks the caches up and reproduces the same artifacts
        let mut p = Pipeline::new(cfg.clone()).unwrap();
        p.communities().unwrap();
        assert_eq!(
            before,
            fs::read(cfg.output_dir.join(MULTIPLEX_CACHE)).unwrap()
        );
        // a changed toggle invalidates the multiplex cache
        let mut flipped = cfg.clone();
        flipped.set("intra_layer", "distance").unwrap();
        Pipeline::new(flipped).unwrap().multiplex().unwrap();
        assert_ne!(
            before,
            fs::read(cfg.output_dir.join(MULTIPLEX_CACHE)).unwrap()
        );
    }

    #[test]
    fn missing_input_is_an_input_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            expeditions: dir.path().join("nope.csv"),
            members: dir.path().join("nope2.csv"),
            output_dir: dir.path().join("out"),
            ..RunConfig::default()
        };
        let err = Pipeline::new(cfg).unwrap().run().unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("nope.csv"));
    }
}
