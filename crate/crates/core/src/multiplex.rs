//! The five-layer expedition multiplex and its aggregation into one similarity graph.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bipartite::IntraExpeditionGraph;
use crate::error::{Error, Result};
use crate::graphdist::{normalize_unit, pairwise_distances, to_distance_layer, to_similarity};
use crate::matrix::DenseMatrix;
use crate::num::Scalar;
use crate::records::{Dataset, ExpeditionRecord};

pub const LAYER_COUNT: usize = 5;

/// Layer kinds in their frozen reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    DaysToSummit,
    CampsAboveBc,
    MemberHiredRatio,
    ExpeditionSize,
    IntraExpeditionGraph,
}

impl LayerKind {
    pub const ALL: [LayerKind; LAYER_COUNT] = [
        LayerKind::DaysToSummit,
        LayerKind::CampsAboveBc,
        LayerKind::MemberHiredRatio,
        LayerKind::ExpeditionSize,
        LayerKind::IntraExpeditionGraph,
    ];

    /// The four layers built by thresholding an expedition-wide factor.
    pub const FACTORS: [LayerKind; 4] = [
        LayerKind::DaysToSummit,
        LayerKind::CampsAboveBc,
        LayerKind::MemberHiredRatio,
        LayerKind::ExpeditionSize,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LayerKind::DaysToSummit => "days_to_summit",
            LayerKind::CampsAboveBc => "camps_above_bc",
            LayerKind::MemberHiredRatio => "member_hired_ratio",
            LayerKind::ExpeditionSize => "expedition_size",
            LayerKind::IntraExpeditionGraph => "intra_expedition_graph",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Raw factor value of one expedition; `None` where undefined (ratio with no hired staff)
    /// or for the feature-graph layer, which has no scalar value.
    pub fn factor_value(self, exp: &ExpeditionRecord) -> Option<f64> {
        match self {
            LayerKind::DaysToSummit => Some(f64::from(exp.days_to_summit)),
            LayerKind::CampsAboveBc => Some(f64::from(exp.camps_above_bc)),
            LayerKind::ExpeditionSize => Some(f64::from(exp.n_members + exp.n_hired)),
            LayerKind::MemberHiredRatio => {
                (exp.n_hired > 0).then(|| f64::from(exp.n_members) / f64::from(exp.n_hired))
            }
            LayerKind::IntraExpeditionGraph => None,
        }
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LayerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LayerKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown layer `{s}`")))
    }
}

/// How the feature-graph layer turns normalized edit distances into weights.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntraLayerMode {
    /// `1 - d`: similar feature graphs are strongly connected.
    #[default]
    Similarity,
    /// `d` itself.
    Distance,
}

/// Factor values for the given expeditions, in order.
pub fn layer_values<T: Scalar>(
    dataset: &Dataset,
    expedition_ids: &[String],
    kind: LayerKind,
) -> Result<Vec<Option<T>>> {
    if kind == LayerKind::IntraExpeditionGraph {
        return Err(Error::InvalidArgument(
            "the feature-graph layer has no scalar values".into(),
        ));
    }
    expedition_ids
        .iter()
        .map(|id| {
            let exp = dataset
                .expedition(id)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown expedition `{id}`")))?;
            Ok(kind.factor_value(exp).map(T::lit))
        })
        .collect()
}

/// Arithmetic mean of the defined values.
pub fn defined_mean<T: Scalar>(values: &[Option<T>]) -> Option<T> {
    let defined: Vec<T> = values.iter().flatten().copied().collect();
    (!defined.is_empty()).then(|| defined.iter().copied().sum::<T>() / T::from_count(defined.len()))
}

/// Connects `i != j` iff both values are defined and strictly exceed `mean`.
pub fn threshold_layer<T: Scalar>(values: &[Option<T>], mean: T) -> DenseMatrix<T> {
    let n = values.len();
    let above: Vec<bool> = values.iter().map(|v| v.is_some_and(|x| x > mean)).collect();
    DenseMatrix::from_fn(n, n, |i, j| {
        if i != j && above[i] && above[j] {
            T::one()
        } else {
            T::zero()
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Layer<T> {
    pub kind: LayerKind,
    pub adjacency: DenseMatrix<T>,
    /// Threshold mean for factor layers.
    pub mean: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MultiplexGraph<T> {
    pub expedition_ids: Vec<String>,
    /// One layer per [`LayerKind`], in `LayerKind::ALL` order.
    pub layers: Vec<Layer<T>>,
    pub intra_mode: IntraLayerMode,
    pub notes: Vec<String>,
}

impl<T: Scalar> MultiplexGraph<T> {
    pub fn layer(&self, kind: LayerKind) -> &Layer<T> {
        &self.layers[kind.index()]
    }

    pub fn len(&self) -> usize {
        self.expedition_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.expedition_ids.is_empty()
    }
}

/// Builds all five layers over the expeditions of `intra_graphs`, in that order.
///
/// `intra_graphs` should be size-normalized. Expeditions with an undefined
/// factor value stay in the multiplex but are isolated in that layer.
pub fn build_multiplex<T: Scalar>(
    dataset: &Dataset,
    intra_graphs: &[(String, IntraExpeditionGraph<T>)],
    intra_mode: IntraLayerMode,
) -> Result<MultiplexGraph<T>> {
    let n = intra_graphs.len();
    if n < 2 {
        return Err(Error::TooFew { needed: 2, got: n });
    }
    let ids: Vec<String> = intra_graphs.iter().map(|(id, _)| id.clone()).collect();
    let mut layers = Vec::with_capacity(LAYER_COUNT);
    let mut notes = Vec::new();
    for kind in LayerKind::FACTORS {
        let values = layer_values::<T>(dataset, &ids, kind)?;
        for (id, v) in ids.iter().zip(&values) {
            if v.is_none() {
                notes.push(format!(
                    "{kind}: value undefined for {id}; isolated in this layer"
                ));
            }
        }
        let mean = defined_mean(&values);
        let adjacency = match mean {
            Some(mu) => threshold_layer(&values, mu),
            None => DenseMatrix::zeros(n, n),
        };
        layers.push(Layer {
            kind,
            adjacency,
            mean,
        });
    }
    let distances = normalize_unit(&pairwise_distances(intra_graphs)?);
    if distances.degenerate {
        notes.push("intra_expedition_graph: all feature graphs identical".into());
    }
    let adjacency = match intra_mode {
        IntraLayerMode::Similarity => to_similarity(&distances),
        IntraLayerMode::Distance => to_distance_layer(&distances),
    };
    layers.push(Layer {
        kind: LayerKind::IntraExpeditionGraph,
        adjacency,
        mean: None,
    });
    Ok(MultiplexGraph {
        expedition_ids: ids,
        layers,
        intra_mode,
        notes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SimilarityGraph<T> {
    pub expedition_ids: Vec<String>,
    pub weights: DenseMatrix<T>,
    pub weights_used: [T; LAYER_COUNT],
}

/// Uniform layer weights `1/5`.
pub fn uniform_weights<T: Scalar>() -> [T; LAYER_COUNT] {
    [T::one() / T::from_count(LAYER_COUNT); LAYER_COUNT]
}

pub fn validate_weights<T: Scalar>(weights: &[T; LAYER_COUNT]) -> Result<()> {
    if weights.iter().any(|w| !(*w >= T::zero()) || !w.is_finite()) {
        return Err(Error::InvalidWeights(
            "weights must be finite and nonnegative".into(),
        ));
    }
    let total: T = weights.iter().copied().sum();
    if (total - T::one()).abs() > T::lit(1e-9) {
        return Err(Error::InvalidWeights(format!(
            "weights sum to {total}, not 1"
        )));
    }
    Ok(())
}

/// Weighted entrywise sum of the layers; uniform weights when `None`.
pub fn aggregate<T: Scalar>(
    e: &MultiplexGraph<T>,
    weights: Option<[T; LAYER_COUNT]>,
) -> Result<SimilarityGraph<T>> {
    let w = weights.unwrap_or_else(uniform_weights);
    validate_weights(&w)?;
    let n = e.len();
    let mut s = DenseMatrix::zeros(n, n);
    for layer in &e.layers {
        s.add_scaled(&layer.adjacency, w[layer.kind.index()])?;
    }
    Ok(SimilarityGraph {
        expedition_ids: e.expedition_ids.clone(),
        weights: s,
        weights_used: w,
    })
}

/// Sparse JSON form: `{expedition_ids, layer_means, layers: kind -> [(i, j, w)]}` with `i < j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MultiplexRecord<T> {
    pub expedition_ids: Vec<String>,
    pub layer_means: BTreeMap<String, Option<T>>,
    pub intra_mode: IntraLayerMode,
    pub layers: BTreeMap<String, Vec<(usize, usize, T)>>,
    pub notes: Vec<String>,
}

impl<T: Scalar> MultiplexRecord<T> {
    pub fn new(e: &MultiplexGraph<T>) -> Self {
        let mut layer_means = BTreeMap::new();
        let mut layers = BTreeMap::new();
        for layer in &e.layers {
            if layer.kind != LayerKind::IntraExpeditionGraph {
                layer_means.insert(layer.kind.to_string(), layer.mean);
            }
            let n = layer.adjacency.rows();
            let mut edges = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    let w = layer.adjacency[(i, j)];
                    if w != T::zero() {
                        edges.push((i, j, w));
                    }
                }
            }
            layers.insert(layer.kind.to_string(), edges);
        }
        MultiplexRecord {
            expedition_ids: e.expedition_ids.clone(),
            layer_means,
            intra_mode: e.intra_mode,
            layers,
            notes: e.notes.clone(),
        }
    }

    pub fn to_graph(&self) -> Result<MultiplexGraph<T>> {
        let n = self.expedition_ids.len();
        let mut layers = Vec::with_capacity(LAYER_COUNT);
        for kind in LayerKind::ALL {
            let edges = self
                .layers
                .get(kind.as_str())
                .ok_or_else(|| Error::Config(format!("multiplex cache lacks layer {kind}")))?;
            let mut adjacency = DenseMatrix::zeros(n, n);
            for &(i, j, w) in edges {
                if i >= n || j >= n || i == j {
                    return Err(Error::Config(format!(
                        "bad edge ({i}, {j}) in layer {kind}"
                    )));
                }
                adjacency[(i, j)] = w;
                adjacency[(j, i)] = w;
            }
            let mean = self.layer_means.get(kind.as_str()).copied().flatten();
            layers.push(Layer {
                kind,
                adjacency,
                mean,
            });
        }
        Ok(MultiplexGraph {
            expedition_ids: self.expedition_ids.clone(),
            layers,
            intra_mode: self.intra_mode,
            notes: self.notes.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::fixtures::roster;
    use crate::records::{link_and_validate, CodeMap};

    fn some(v: &[f64]) -> Vec<Option<f64>> {
        v.iter().copied().map(Some).collect()
    }

    #[test]
    fn ratio_size_and_undefined() {
        let (mut e, _) = roster("E", 0, 0);
        e.n_members = 10;
        e.n_hired = 5;
        assert_eq!(LayerKind::MemberHiredRatio.factor_value(&e), Some(2.0));
        assert_eq!(LayerKind::ExpeditionSize.factor_value(&e), Some(15.0));
        e.n_hired = 0;
        assert_eq!(LayerKind::MemberHiredRatio.factor_value(&e), None);
    }

    #[test]
    fn threshold_examples() {
        let v = some(&[4.0, 5.0, 2.0]);
        let a = threshold_layer(&v, defined_mean(&v).unwrap());
        assert_eq!(a[(0, 1)], 1.0);
        assert_eq!(a.as_slice().iter().sum::<f64>(), 2.0);

        let v = some(&[1.0, 3.0, 5.0]);
        let mu = defined_mean(&v).unwrap();
        assert_eq!(mu, 3.0);
        assert!(threshold_layer(&v, mu).as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn undefined_values_are_isolated() {
        let v = vec![Some(10.0f64), None, Some(9.0), Some(1.0)];
        let mu = defined_mean(&v).unwrap();
        assert!((mu - 20.0 / 3.0).abs() < 1e-15);
        let a = threshold_layer(&v, mu);
        assert_eq!(a[(0, 2)], 1.0);
        assert!((0..4).all(|j| a[(1, j)] == 0.0));
    }

    fn dataset_with(
        values: &[(u32, u32, u32, u32)],
    ) -> (Dataset, Vec<(String, IntraExpeditionGraph<f64>)>) {
        let mut exps = Vec::new();
        let mut graphs = Vec::new();
        for (k, &(days, camps, members, hired)) in values.iter().enumerate() {
            let (mut e, _) = roster(&format!("E{k}"), 0, 0);
            e.days_to_summit = days;
            e.camps_above_bc = camps;
            e.n_members = members;
            e.n_hired = hired;
            exps.push(e);
            let m = DenseMatrix::from_fn(6, 6, |i, j| ((i + j + k) % 4) as f64 / 4.0);
            graphs.push((
                format!("E{k}"),
                IntraExpeditionGraph {
                    matrix: m,
                    climber_count: 12,
                    normalized: true,
                },
            ));
        }
        (
            link_and_validate(exps, vec![], CodeMap::default()).unwrap(),
            graphs,
        )
    }

    #[test]
    fn multiplex_structure() {
        let (ds, graphs) = dataset_with(&[
            (20, 3, 10, 5),
            (30, 5, 12, 0),
            (25, 4, 20, 4),
            (40, 2, 8, 8),
        ]);
        let e = build_multiplex(&ds, &graphs, IntraLayerMode::Similarity).unwrap();
        assert_eq!(e.layers.len(), 5);
        for (layer, kind) in e.layers.iter().zip(LayerKind::ALL) {
            assert_eq!(layer.kind, kind);
            assert!(layer.adjacency.is_symmetric(0.0));
            assert!(layer.adjacency.zero_diagonal());
        }
        // days mean 28.75: expeditions 1 and 3 above
        let days = &e.layer(LayerKind::DaysToSummit).adjacency;
        assert_eq!(days[(1, 3)], 1.0);
        assert_eq!(days.as_slice().iter().sum::<f64>(), 2.0);
        // ratio undefined for E1
        let ratio = e.layer(LayerKind::MemberHiredRatio);
        assert!((ratio.mean.unwrap() - (2.0 + 5.0 + 1.0) / 3.0).abs() < 1e-12);
        assert_eq!(e.notes.len(), 1);
        let sim = &e.layer(LayerKind::IntraExpeditionGraph).adjacency;
        assert!(sim.as_slice().iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn identical_graphs_give_unit_similarity() {
        let (ds, mut graphs) = dataset_with(&[(20, 3, 10, 5), (30, 5, 12, 3)]);
        graphs[1].1 = graphs[0].1.clone();
        let e = build_multiplex(&ds, &graphs, IntraLayerMode::Similarity).unwrap();
        assert_eq!(
            e.layer(LayerKind::IntraExpeditionGraph).adjacency[(0, 1)],
            1.0
        );
    }

    #[test]
    fn equal_factor_values_give_empty_layer() {
        let (ds, graphs) = dataset_with(&[(20, 3, 10, 5), (20, 5, 12, 3), (20, 1, 12, 3)]);
        let e = build_multiplex(&ds, &graphs, IntraLayerMode::Similarity).unwrap();
        assert!(e
            .layer(LayerKind::DaysToSummit)
            .adjacency
            .as_slice()
            .iter()
            .all(|&x| x == 0.0));
    }

    #[test]
    fn too_few_expeditions() {
        let (ds, graphs) = dataset_with(&[(20, 3, 10, 5)]);
        assert!(matches!(
            build_multiplex(&ds, &graphs, IntraLayerMode::Similarity),
            Err(Error::TooFew { .. })
        ));
    }

    fn constant_multiplex(m: &DenseMatrix<f64>) -> MultiplexGraph<f64> {
        MultiplexGraph {
            expedition_ids: (0..m.rows()).map(|k| k.to_string()).collect(),
            layers: LayerKind::ALL
                .into_iter()
                .map(|kind| Layer {
                    kind,
                    adjacency: m.scale(1.0 + kind.index() as f64 * 0.0),
                    mean: None,
                })
                .collect(),
            intra_mode: IntraLayerMode::Similarity,
            notes: vec![],
        }
    }

    #[test]
    fn aggregation_rules() {
        let m = DenseMatrix::from_rows(&[
            vec![0.0, 0.4, 1.0],
            vec![0.4, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
        ])
        .unwrap();
        let e = constant_multiplex(&m);
        let s = aggregate(&e, None).unwrap();
        for (a, b) in s.weights.as_slice().iter().zip(m.as_slice()) {
            assert!((a - b).abs() < 1e-15);
        }

        let (ds, graphs) = dataset_with(&[
            (20, 3, 10, 5),
            (30, 5, 12, 0),
            (25, 4, 20, 4),
            (40, 2, 8, 8),
        ]);
        let e = build_multiplex(&ds, &graphs, IntraLayerMode::Similarity).unwrap();
        let first = aggregate(&e, Some([1.0, 0.0, 0.0, 0.0, 0.0])).unwrap();
        assert_eq!(first.weights, e.layers[0].adjacency);
        let uniform = aggregate(&e, None).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let oracle: f64 = e.layers.iter().map(|l| l.adjacency[(i, j)]).sum::<f64>() / 5.0;
                assert!((uniform.weights[(i, j)] - oracle).abs() < 1e-15);
            }
        }
        assert!(aggregate(&e, Some([0.5, 0.5, 0.5, 0.0, 0.0])).is_err());
        assert!(aggregate(&e, Some([1.5, -0.5, 0.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn sparse_record_round_trip() {
        let (ds, graphs) = dataset_with(&[
            (20, 3, 10, 5),
            (30, 5, 12, 0),
            (25, 4, 20, 4),
            (40, 2, 8, 8),
        ]);
        let e = build_multiplex(&ds, &graphs, IntraLayerMode::Distance).unwrap();
        let rec = MultiplexRecord::new(&e);
        let text = serde_json::to_string(&rec).unwrap();
        let back: MultiplexRecord<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_graph().unwrap(), e);
    }
}
