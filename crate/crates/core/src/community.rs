//! Modularity, Louvain community detection and per-community profiles.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bipartite::{IntraExpeditionGraph, FEATURE_COUNT, FEATURE_NAMES};
use crate::centrality::{aggregate_group, eigenvector_centrality, PowerIteration};
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::multiplex::LayerKind;
use crate::num::Scalar;
use crate::records::{success_rate_with, Dataset, MemberScope};

/// Minimum modularity gain for a local move to be accepted.
pub const MIN_GAIN: f64 = 1e-9;

fn check_graph<T: Scalar>(s: &DenseMatrix<T>) -> Result<T> {
    if !s.is_square() {
        return Err(Error::Shape(format!(
            "{}x{} similarity graph",
            s.rows(),
            s.cols()
        )));
    }
    let asym = s.asymmetry().unwrap_or(T::zero());
    if asym > T::lit(1e-12) {
        return Err(Error::Asymmetric(asym.as_f64()));
    }
    if s.as_slice().iter().any(|&w| w < T::zero() || w.is_nan()) {
        return Err(Error::InvalidArgument("negative or NaN edge weight".into()));
    }
    if !s.zero_diagonal() {
        return Err(Error::InvalidArgument(
            "similarity graph has self-loops".into(),
        ));
    }
    let total: T = s.as_slice().iter().copied().sum();
    if total <= T::zero() {
        return Err(Error::DegenerateGraph("graph has no edge weight"));
    }
    Ok(total)
}

/// Weighted Newman–Girvan modularity of an assignment, with a resolution parameter.
pub fn modularity<T: Scalar>(s: &DenseMatrix<T>, assignment: &[usize], resolution: T) -> Result<T> {
    let two_m = check_graph(s)?;
    let n = s.rows();
    if assignment.len() != n {
        return Err(Error::Shape(format!(
            "{} labels for {n} nodes",
            assignment.len()
        )));
    }
    let communities = assignment.iter().max().map_or(0, |&c| c + 1);
    let mut internal = vec![T::zero(); communities];
    let mut total = vec![T::zero(); communities];
    for i in 0..n {
        let ci = assignment[i];
        for j in 0..n {
            let w = s[(i, j)];
            total[ci] = total[ci] + w;
            if assignment[j] == ci {
                internal[ci] = internal[ci] + w;
            }
        }
    }
    Ok(internal
        .iter()
        .zip(&total)
        .map(|(&inc, &tot)| inc / two_m - resolution * (tot / two_m) * (tot / two_m))
        .sum())
}

/// Renumbers labels to `0..k` in order of first appearance.
pub fn relabel(assignment: &[usize]) -> Vec<usize> {
    let mut map = BTreeMap::new();
    assignment
        .iter()
        .map(|&c| {
            let next = map.len();
            *map.entry(c).or_insert(next)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Partition<T> {
    pub expedition_ids: Vec<String>,
    /// Contiguous labels from 0, numbered by first appearance.
    pub assignment: Vec<usize>,
    pub modularity: T,
    pub seed: u64,
    pub resolution: T,
    pub levels: usize,
}

impl<T: Scalar> Partition<T> {
    pub fn community_count(&self) -> usize {
        self.assignment.iter().max().map_or(0, |&c| c + 1)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["expedition_id", "community"])?;
        for (id, c) in self.expedition_ids.iter().zip(&self.assignment) {
            w.write_record([id.as_str(), &c.to_string()])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("utf-8"))
    }
}

/// Weighted graph of one Louvain level. Self-loop weight counts both directions.
struct Level<T> {
    neighbors: Vec<Vec<(usize, T)>>,
    self_loops: Vec<T>,
    degree: Vec<T>,
}

impl<T: Scalar> Level<T> {
    fn from_dense(s: &DenseMatrix<T>) -> Self {
        let n = s.rows();
        let neighbors: Vec<Vec<(usize, T)>> = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i && s[(i, j)] > T::zero())
                    .map(|j| (j, s[(i, j)]))
                    .collect()
            })
            .collect();
        let degree = (0..n).map(|i| s.row(i).iter().copied().sum()).collect();
        Level {
            neighbors,
            self_loops: vec![T::zero(); n],
            degree,
        }
    }

    fn len(&self) -> usize {
        self.degree.len()
    }

    /// Local-move phase. Returns contiguous community labels and whether anything moved.
    fn local_moves(&self, two_m: T, resolution: T, rng: &mut ChaCha8Rng) -> (Vec<usize>, bool) {
        let n = self.len();
        let mut community: Vec<usize> = (0..n).collect();
        let mut total = self.degree.clone();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let m = two_m / T::lit(2.0);
        let threshold = T::lit(MIN_GAIN);
        let mut weight_to = vec![T::zero(); n];
        let mut touched: Vec<usize> = Vec::new();
        let mut moved_any = false;
        loop {
            let mut moved = false;
            for &i in &order {
                let own = community[i];
                let k = self.degree[i];
                total[own] = total[own] - k;
                touched.clear();
                for &(j, w) in &self.neighbors[i] {
                    let c = community[j];
                    if weight_to[c] == T::zero() {
                        touched.push(c);
                    }
                    weight_to[c] = weight_to[c] + w;
                }
                let gain = |c: usize, w: T| w - resolution * total[c] * k / two_m;
                let own_gain = gain(own, weight_to[own]);
                let mut best = own;
                let mut best_gain = own_gain;
                for &c in &touched {
                    let g = gain(c, weight_to[c]);
                    if g > best_gain || (g == best_gain && c < best) {
                        best = c;
                        best_gain = g;
                    }
                }
                if best != own && (best_gain - own_gain) / m <= threshold {
                    best = own;
                }
                total[best] = total[best] + k;
                if best != own {
                    community[i] = best;
                    moved = true;
                    moved_any = true;
                }
                for &c in &touched {
                    weight_to[c] = T::zero();
                }
            }
            if !moved {
                break;
            }
        }
        (relabel(&community), moved_any)
    }

    fn coarsen(&self, community: &[usize]) -> Level<T> {
        let k = community.iter().max().map_or(0, |&c| c + 1);
        let mut links: Vec<BTreeMap<usize, T>> = vec![BTreeMap::new(); k];
        let mut self_loops = vec![T::zero(); k];
        let mut degree = vec![T::zero(); k];
        for i in 0..self.len() {
            let ci = community[i];
            degree[ci] = degree[ci] + self.degree[i];
            self_loops[ci] = self_loops[ci] + self.self_loops[i];
            for &(j, w) in &self.neighbors[i] {
                let cj = community[j];
                if cj == ci {
                    self_loops[ci] = self_loops[ci] + w;
                } else {
                    let e = links[ci].entry(cj).or_insert(T::zero());
                    *e = *e + w;
                }
            }
        }
        Level {
            neighbors: links.into_iter().map(|m| m.into_iter().collect()).collect(),
            self_loops,
            degree,
        }
    }
}

/// Two-phase Louvain modularity maximization, deterministic for a given seed.
///
/// Nodes are visited in a seeded random order; a node moves only when the gain
/// exceeds [`MIN_GAIN`], ties going to the lowest community label. Levels are
/// coarsened until a pass makes no move.
pub fn louvain<T: Scalar>(s: &DenseMatrix<T>, seed: u64, resolution: T) -> Result<Partition<T>> {
    let two_m = check_graph(s)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = s.rows();
    let mut assignment: Vec<usize> = (0..n).collect();
    let mut level = Level::from_dense(s);
    let mut levels = 0;
    loop {
        let (community, moved) = level.local_moves(two_m, resolution, &mut rng);
        if !moved {
            break;
        }
        levels += 1;
        for a in assignment.iter_mut() {
            *a = community[*a];
        }
        level = level.coarsen(&community);
    }
    let assignment = relabel(&assignment);
    let q = modularity(s, &assignment, resolution)?;
    Ok(Partition {
        expedition_ids: (0..n).map(|i| i.to_string()).collect(),
        assignment,
        modularity: q,
        seed,
        resolution,
        levels,
    })
}

/// Adjusted Rand index between two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("{} vs {} labels", a.len(), b.len())));
    }
    let n = a.len();
    let choose2 = |x: usize| (x * x.saturating_sub(1)) as f64 / 2.0;
    let mut table: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut rows: BTreeMap<usize, usize> = BTreeMap::new();
    let mut cols: BTreeMap<usize, usize> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| choose2(c)).sum();
    let sum_a: f64 = rows.values().map(|&c| choose2(c)).sum();
    let sum_b: f64 = cols.values().map(|&c| choose2(c)).sum();
    let expected = sum_a * sum_b / choose2(n).max(1.0);
    let max = (sum_a + sum_b) / 2.0;
    if (max - expected).abs() < f64::EPSILON {
        return Ok(if index == sum_a && index == sum_b {
            1.0
        } else {
            0.0
        });
    }
    Ok((index - expected) / (max - expected))
}

/// How a community's feature centralities are formed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileCentrality {
    /// Mean of each member expedition's centrality vector.
    #[default]
    PerExpedition,
    /// Centrality of the community's mean feature graph.
    MeanGraph,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CommunityProfile<T> {
    pub community: usize,
    pub size: usize,
    pub mean_success: T,
    /// Mean raw factor value per factor layer (undefined values skipped).
    pub factor_means: BTreeMap<LayerKind, Option<T>>,
    /// Mean feature centrality in `FEATURE_NAMES` order.
    pub centrality: Vec<T>,
    pub expedition_ids: Vec<String>,
}

/// Per-community means of success rate, factor values and feature centralities,
/// sorted by ascending mean success.
pub fn community_profiles<T: Scalar>(
    partition: &Partition<T>,
    dataset: &Dataset,
    graphs: &[(String, IntraExpeditionGraph<T>)],
    scope: MemberScope,
    mode: ProfileCentrality,
    params: &PowerIteration,
) -> Result<Vec<CommunityProfile<T>>> {
    let graph_of: BTreeMap<&str, &IntraExpeditionGraph<T>> =
        graphs.iter().map(|(id, g)| (id.as_str(), g)).collect();
    let mut members: BTreeMap<usize, Vec<&str>> = BTreeMap::new();
    for (id, &c) in partition.expedition_ids.iter().zip(&partition.assignment) {
        members.entry(c).or_default().push(id);
    }
    let mean =
        |v: &[T]| (!v.is_empty()).then(|| v.iter().copied().sum::<T>() / T::from_count(v.len()));

    let mut profiles = Vec::with_capacity(members.len());
    for (community, ids) in members {
        let mut rates = Vec::with_capacity(ids.len());
        let mut factors: BTreeMap<LayerKind, Vec<T>> = BTreeMap::new();
        let mut group = Vec::with_capacity(ids.len());
        for id in &ids {
            let exp = dataset
                .expedition(id)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown expedition `{id}`")))?;
            rates.push(T::lit(success_rate_with(exp, dataset, scope)?));
            for kind in LayerKind::FACTORS {
                if let Some(v) = kind.factor_value(exp) {
                    factors.entry(kind).or_default().push(T::lit(v));
                }
            }
            let g = graph_of
                .get(id)
                .ok_or_else(|| Error::InvalidArgument(format!("no feature graph for `{id}`")))?;
            group.push((*g).clone());
        }
        let centrality = match mode {
            ProfileCentrality::PerExpedition => {
                let vectors: Vec<Vec<T>> = group
                    .iter()
                    .filter_map(|g| eigenvector_centrality(&g.matrix, params).ok())
                    .map(|c| c.values)
                    .collect();
                (0..FEATURE_COUNT)
                    .map(|k| {
                        mean(&vectors.iter().map(|v| v[k]).collect::<Vec<_>>()).unwrap_or(T::zero())
                    })
                    .collect()
            }
            ProfileCentrality::MeanGraph => {
                match eigenvector_centrality(&aggregate_group(&group)?.matrix, params) {
                    Ok(c) => c.values,
                    Err(Error::DegenerateGraph(_)) => vec![T::zero(); FEATURE_COUNT],
                    Err(e) => return Err(e),
                }
            }
        };
        profiles.push(CommunityProfile {
            community,
            size: ids.len(),
            mean_success: mean(&rates).unwrap_or(T::zero()),
            factor_means: LayerKind::FACTORS
                .into_iter()
                .map(|k| (k, factors.get(&k).and_then(|v| mean(v))))
                .collect(),
            centrality,
            expedition_ids: ids.iter().map(|s| s.to_string()).collect(),
        });
    }
    profiles.sort_by(|a, b| {
        a.mean_success
            .partial_cmp(&b.mean_success)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.community.cmp(&b.community))
    });
    Ok(profiles)
}

/// One CSV row per community covering both panels: factor means and feature centralities.
pub fn profiles_to_csv<T: Scalar>(profiles: &[CommunityProfile<T>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![
        "community".to_string(),
        "size".into(),
        "success_rate".into(),
    ];
    header.extend(LayerKind::FACTORS.iter().map(|k| k.to_string()));
    header.extend(FEATURE_NAMES.iter().map(|f| format!("centrality_{f}")));
    w.write_record(&header)?;
    for p in profiles {
        let mut row = vec![
            p.community.to_string(),
            p.size.to_string(),
            p.mean_success.to_string(),
        ];
        row.extend(
            LayerKind::FACTORS
                .iter()
                .map(|k| p.factor_means[k].map(|v| v.to_string()).unwrap_or_default()),
        );
        row.extend(p.centrality.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::fixtures::roster;
    use crate::records::{link_and_validate, CodeMap};

    /// Disjoint cliques of the given sizes, joined by `bridge`-weight edges.
    pub(crate) fn cliques(sizes: &[usize], bridge: f64) -> (DenseMatrix<f64>, Vec<usize>) {
        let labels: Vec<usize> = sizes
            .iter()
            .enumerate()
            .flat_map(|(c, &s)| std::iter::repeat_n(c, s))
            .collect();
        let n = labels.len();
        let m = DenseMatrix::from_fn(n, n, |i, j| {
            if i == j {
                0.0
            } else if labels[i] == labels[j] {
                1.0
            } else {
                bridge
            }
        });
        (m, labels)
    }

    #[test]
    fn two_cliques_modularity_is_half() {
        let (s, labels) = cliques(&[5, 5], 0.0);
        assert!((modularity(&s, &labels, 1.0).unwrap() - 0.5).abs() < 1e-12);
        assert!(modularity(&s, &[0; 10], 1.0).unwrap().abs() < 1e-15);
    }

    #[test]
    fn modularity_matches_pairwise_formula() {
        let (s, _) = cliques(&[4, 3, 3], 0.2);
        let labels = [0, 1, 0, 2, 1, 1, 0, 2, 2, 0];
        let n = 10;
        let k: Vec<f64> = (0..n).map(|i| s.row(i).iter().sum()).collect();
        let two_m: f64 = k.iter().sum();
        let mut q = 0.0;
        for i in 0..n {
            for j in 0..n {
                if labels[i] == labels[j] {
                    q += s[(i, j)] - k[i] * k[j] / two_m;
                }
            }
        }
        q /= two_m;
        assert!((modularity(&s, &labels, 1.0).unwrap() - q).abs() < 1e-12);
    }

    #[test]
    fn invalid_graphs_rejected() {
        assert!(matches!(
            modularity(&DenseMatrix::<f64>::zeros(3, 3), &[0, 0, 0], 1.0),
            Err(Error::DegenerateGraph(_))
        ));
        assert!(louvain(&DenseMatrix::<f64>::zeros(3, 3), 1, 1.0).is_err());
        let mut loops = DenseMatrix::<f64>::identity(2);
        loops[(0, 1)] = 1.0;
        loops[(1, 0)] = 1.0;
        assert!(modularity(&loops, &[0, 1], 1.0).is_err());
    }

    #[test]
    fn louvain_splits_disconnected_cliques() {
        let (s, labels) = cliques(&[5, 5], 0.0);
        let p = louvain(&s, 7, 1.0).unwrap();
        assert_eq!(p.community_count(), 2);
        assert_eq!(relabel(&labels), p.assignment);
    }

    #[test]
    fn louvain_recovers_weakly_bridged_cliques() {
        let (s, labels) = cliques(&[10, 10, 10], 0.01);
        for seed in 0..5 {
            let p = louvain(&s, seed, 1.0).unwrap();
            assert_eq!(p.assignment, relabel(&labels));
            assert!((adjusted_rand_index(&p.assignment, &labels).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn louvain_is_seed_deterministic() {
        let (s, _) = cliques(&[6, 4, 5], 0.3);
        assert_eq!(louvain(&s, 11, 1.0).unwrap(), louvain(&s, 11, 1.0).unwrap());
    }

    #[test]
    fn relabel_orders_by_first_appearance() {
        assert_eq!(relabel(&[4, 4, 1, 7, 1]), vec![0, 0, 1, 2, 1]);
    }

    #[test]
    fn ari_cases() {
        assert!((adjusted_rand_index(&[0, 0, 1, 1], &[1, 1, 0, 0]).unwrap() - 1.0).abs() < 1e-12);
        // independent-looking labelings score near zero or below
        let ari = adjusted_rand_index(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap();
        assert!(ari < 0.0);
        // known value: sklearn adjusted_rand_score([0,0,0,1,1,1],[0,0,1,1,2,2]) = 0.24242424...
        let ari = adjusted_rand_index(&[0, 0, 0, 1, 1, 1], &[0, 0, 1, 1, 2, 2]).unwrap();
        assert!((ari - 8.0 / 33.0).abs() < 1e-12);
        assert_eq!(adjusted_rand_index(&[0, 0, 0], &[5, 5, 5]).unwrap(), 1.0);
    }

    #[test]
    fn single_community_profile_is_global_mean() {
        let rosters = vec![roster("A", 4, 1), roster("B", 4, 3), roster("C", 5, 5)];
        let (exps, members): (Vec<_>, Vec<_>) = rosters.into_iter().unzip();
        let ds = link_and_validate(exps, members.concat(), CodeMap::default()).unwrap();
        let graphs: Vec<(String, IntraExpeditionGraph<f64>)> = ["A", "B", "C"]
            .iter()
            .enumerate()
            .map(|(k, id)| {
                let m = DenseMatrix::from_fn(6, 6, |i, j| 0.1 + ((i + j + k) % 3) as f64 * 0.2);
                (
                    id.to_string(),
                    IntraExpeditionGraph {
                        matrix: m,
                        climber_count: 4,
                        normalized: true,
                    },
                )
            })
            .collect();
        let p = Partition {
            expedition_ids: vec!["A".into(), "B".into(), "C".into()],
            assignment: vec![0, 0, 0],
            modularity: 0.0,
            seed: 0,
            resolution: 1.0,
            levels: 0,
        };
        let profiles = community_profiles(
            &p,
            &ds,
            &graphs,
            MemberScope::AllListed,
            ProfileCentrality::PerExpedition,
            &PowerIteration::default(),
        )
        .unwrap();
        assert_eq!(profiles.len(), 1);
        let global = (0.25 + 0.75 + 1.0) / 3.0;
        assert!((profiles[0].mean_success - global).abs() < 1e-15);
        assert_eq!(
            profiles[0].factor_means[&LayerKind::DaysToSummit],
            Some(20.0)
        );
        let per: Vec<Vec<f64>> = graphs
            .iter()
            .map(|(_, g)| {
                eigenvector_centrality(&g.matrix, &PowerIteration::default())
                    .unwrap()
                    .values
            })
            .collect();
        for k in 0..6 {
            let oracle = per.iter().map(|v| v[k]).sum::<f64>() / 3.0;
            assert!((profiles[0].centrality[k] - oracle).abs() < 1e-15);
        }
        let csv = profiles_to_csv(&profiles).unwrap();
        assert!(csv.starts_with("community,size,success_rate,days_to_summit"));

        let pooled = community_profiles(
            &p,
            &ds,
            &graphs,
            MemberScope::AllListed,
            ProfileCentrality::MeanGraph,
            &PowerIteration::default(),
        )
        .unwrap();
        let norm: f64 = pooled[0].centrality.iter().map(|v| v * v).sum::<f64>();
        assert!((norm - 1.0).abs() < 1e-9);
    }
}
