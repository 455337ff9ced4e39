//! Eigenvector centrality of feature graphs and summit/no-summit group comparisons.

use serde::{Deserialize, Serialize};

use crate::bipartite::{
    project, BipartiteGraph, IntraExpeditionGraph, FEATURE_COUNT, FEATURE_NAMES,
};
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::num::Scalar;
use crate::records::Dataset;

/// Outcome subgroups smaller than this contribute no graph.
pub const MIN_GROUP_CLIMBERS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerIteration {
    /// Stop once successive unit iterates differ by less than this in L2.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PowerIteration {
    fn default() -> Self {
        PowerIteration {
            tol: 1e-10,
            max_iter: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CentralityVector<T> {
    /// Unit L2 norm, nonnegative.
    pub values: Vec<T>,
    pub converged: bool,
    pub iterations: usize,
}

/// Dominant eigenvector of a symmetric nonnegative matrix by power iteration.
///
/// The matrix is scaled by its largest entry and shifted by the identity before
/// iterating, which keeps the result independent of overall scale and avoids the
/// period-two oscillation of bipartite graphs. The uniform start vector makes the
/// result deterministic.
pub fn eigenvector_centrality<T: Scalar>(
    graph: &DenseMatrix<T>,
    params: &PowerIteration,
) -> Result<CentralityVector<T>> {
    let n = graph.rows();
    if !graph.is_square() || n == 0 {
        return Err(Error::Shape(format!(
            "{}x{} is not a square graph",
            graph.rows(),
            graph.cols()
        )));
    }
    let largest = graph
        .as_slice()
        .iter()
        .fold(T::zero(), |m, &x| m.max(x.abs()));
    let asym = graph.asymmetry().unwrap_or(T::zero());
    if asym > T::lit(1e-12) * largest.max(T::one()) {
        return Err(Error::Asymmetric(asym.as_f64()));
    }
    if graph
        .as_slice()
        .iter()
        .any(|&x| x < T::zero() || x.is_nan())
    {
        return Err(Error::InvalidArgument(
            "graph has negative or NaN weights".into(),
        ));
    }
    if largest == T::zero() {
        return Err(Error::DegenerateGraph(
            "all-zero adjacency has no centrality",
        ));
    }

    let half = T::lit(0.5);
    let scaled = DenseMatrix::from_fn(n, n, |i, j| {
        (graph[(i, j)] + graph[(j, i)]) * half / largest
    });
    let tol = T::lit(params.tol);
    let mut x = vec![T::one() / T::from_count(n).sqrt(); n];
    for iteration in 1..=params.max_iter {
        let mut y = scaled.mul_vec(&x);
        for (yi, &xi) in y.iter_mut().zip(&x) {
            *yi = *yi + xi;
        }
        let norm = y.iter().map(|&v| v * v).sum::<T>().sqrt();
        for v in &mut y {
            *v = *v / norm;
        }
        let diff = y
            .iter()
            .zip(&x)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<T>()
            .sqrt();
        x = y;
        if diff < tol {
            return Ok(CentralityVector {
                values: x,
                converged: true,
                iterations: iteration,
            });
        }
    }
    Ok(CentralityVector {
        values: x,
        converged: false,
        iterations: params.max_iter,
    })
}

/// Per-expedition feature graphs split by climber outcome, labelled with the expedition id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct OutcomeGroups<T> {
    pub success: Vec<(String, IntraExpeditionGraph<T>)>,
    pub nosummit: Vec<(String, IntraExpeditionGraph<T>)>,
}

/// Partitions each expedition's bipartite rows by the summit flag and projects each side.
///
/// Sides with fewer than [`MIN_GROUP_CLIMBERS`] climbers are dropped.
pub fn split_by_outcome<T: Scalar>(
    dataset: &Dataset,
    graphs: &[BipartiteGraph],
) -> Result<OutcomeGroups<T>> {
    let mut groups = OutcomeGroups {
        success: Vec::new(),
        nosummit: Vec::new(),
    };
    for g in graphs {
        let summited = |id: &str| {
            dataset
                .climber(&g.expedition_id, id)
                .is_some_and(|c| c.summited)
        };
        let up = g.subset(summited);
        let down = g.subset(|id| !summited(id));
        if up.len() >= MIN_GROUP_CLIMBERS {
            groups
                .success
                .push((g.expedition_id.clone(), project(&up)?));
        }
        if down.len() >= MIN_GROUP_CLIMBERS {
            groups
                .nosummit
                .push((g.expedition_id.clone(), project(&down)?));
        }
    }
    Ok(groups)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GroupCentralityRow<T> {
    pub feature: String,
    pub mean_success: T,
    pub stderr_success: T,
    pub mean_nosummit: T,
    pub stderr_nosummit: T,
}

impl<T: Scalar> GroupCentralityRow<T> {
    pub fn difference(&self) -> T {
        self.mean_success - self.mean_nosummit
    }
}

/// Rows are sorted by `mean_success - mean_nosummit`, ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GroupCentralityTable<T> {
    pub rows: Vec<GroupCentralityRow<T>>,
    pub n_success: usize,
    pub n_nosummit: usize,
    /// All-zero graphs (no features held by anyone) carry no centrality and are left out.
    pub skipped_degenerate: usize,
    pub unconverged: usize,
}

/// Mean and standard error (sample standard deviation over √n; zero for a single value).
pub fn mean_and_stderr<T: Scalar>(values: &[T]) -> (T, T) {
    let n = values.len();
    let nf = T::from_count(n);
    let mean = values.iter().copied().sum::<T>() / nf;
    if n < 2 {
        return (mean, T::zero());
    }
    let var = values.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / T::from_count(n - 1);
    (mean, (var / nf).sqrt())
}

/// Mean ± standard error of each feature's centrality in the two outcome groups.
pub fn group_centrality<T: Scalar>(
    success_graphs: &[IntraExpeditionGraph<T>],
    nosummit_graphs: &[IntraExpeditionGraph<T>],
    params: &PowerIteration,
) -> Result<GroupCentralityTable<T>> {
    let mut skipped = 0;
    let mut unconverged = 0;
    let mut side =
        |graphs: &[IntraExpeditionGraph<T>], name: &'static str| -> Result<Vec<Vec<T>>> {
            if graphs.is_empty() {
                return Err(Error::EmptyGroup(name));
            }
            let mut out = Vec::with_capacity(graphs.len());
            for g in graphs {
                match eigenvector_centrality(&g.matrix, params) {
                    Ok(c) => {
                        unconverged += usize::from(!c.converged);
                        out.push(c.values);
                    }
                    Err(Error::DegenerateGraph(_)) => skipped += 1,
                    Err(e) => return Err(e),
                }
            }
            if out.is_empty() {
                return Err(Error::EmptyGroup(name));
            }
            Ok(out)
        };
    let up = side(success_graphs, "success")?;
    let down = side(nosummit_graphs, "no-summit")?;

    let column = |vs: &[Vec<T>], k: usize| vs.iter().map(|v| v[k]).collect::<Vec<_>>();
    let mut rows: Vec<GroupCentralityRow<T>> = (0..FEATURE_COUNT)
        .map(|k| {
            let (mean_success, stderr_success) = mean_and_stderr(&column(&up, k));
            let (mean_nosummit, stderr_nosummit) = mean_and_stderr(&column(&down, k));
            GroupCentralityRow {
                feature: FEATURE_NAMES[k].to_string(),
                mean_success,
                stderr_success,
                mean_nosummit,
                stderr_nosummit,
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        a.difference()
            .partial_cmp(&b.difference())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(GroupCentralityTable {
        rows,
        n_success: up.len(),
        n_nosummit: down.len(),
        skipped_degenerate: skipped,
        unconverged,
    })
}

/// Entrywise mean of a group of (size-normalized) feature graphs.
pub fn aggregate_group<T: Scalar>(
    graphs: &[IntraExpeditionGraph<T>],
) -> Result<IntraExpeditionGraph<T>> {
    let first = graphs.first().ok_or(Error::EmptyGroup("aggregate"))?;
    let mut acc = DenseMatrix::zeros(first.matrix.rows(), first.matrix.cols());
    let w = T::one() / T::from_count(graphs.len());
    for g in graphs {
        acc.add_scaled(&g.matrix, w)?;
    }
    Ok(IntraExpeditionGraph {
        matrix: acc,
        climber_count: graphs.iter().map(|g| g.climber_count).sum(),
        normalized: graphs.iter().all(|g| g.normalized),
    })
}
