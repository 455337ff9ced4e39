//! Graph-to-scalar regression, Pearson correlation and two-sided p-values.

pub mod lstsq;
pub mod special;

use serde::{Deserialize, Serialize};

use crate::bipartite::{IntraExpeditionGraph, FEATURE_COUNT};
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::multiplex::{LayerKind, MultiplexGraph};
use crate::num::Scalar;
use crate::records::{success_rate_with, Dataset, MemberScope};

pub use lstsq::{min_norm_lstsq, min_norm_lstsq_scaled, LeastSquares};
pub use special::{ln_gamma, regularized_incomplete_beta, student_t_two_sided};

/// Unique entries of a 6×6 symmetric matrix (upper triangle with diagonal).
pub const UNIQUE_ENTRIES: usize = FEATURE_COUNT * (FEATURE_COUNT + 1) / 2;

/// Upper-triangle entries of a symmetric matrix in row-major order, optionally skipping the diagonal.
pub fn vectorize_matrix<T: Scalar>(m: &DenseMatrix<T>, include_diagonal: bool) -> Result<Vec<T>> {
    let asym = m
        .asymmetry()
        .ok_or_else(|| Error::Shape(format!("{}x{} is not square", m.rows(), m.cols())))?;
    if asym > T::lit(1e-12) {
        return Err(Error::Asymmetric(asym.as_f64()));
    }
    let n = m.rows();
    let skip = usize::from(!include_diagonal);
    Ok((0..n)
        .flat_map(|i| ((i + skip)..n).map(move |j| (i, j)))
        .map(|(i, j)| m[(i, j)])
        .collect())
}

pub fn vectorize_graph<T: Scalar>(
    graph: &IntraExpeditionGraph<T>,
    include_diagonal: bool,
) -> Result<Vec<T>> {
    vectorize_matrix(&graph.matrix, include_diagonal)
}

/// Linear map from a vectorized feature graph to a predicted success rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RegressionProjection<T> {
    pub coefficients: Vec<T>,
    pub intercept: T,
    /// Root-mean-square in-sample residual.
    pub fit_residual: T,
    pub rank: usize,
    pub include_diagonal: bool,
    pub warnings: Vec<String>,
}

/// Least-squares fit `y ≈ x·c + b` over the vectorized graphs.
///
/// Columns are centered before solving so the intercept is not penalized;
/// collinear or underdetermined designs get the minimum-norm `c` and a warning.
pub fn fit_projection<T: Scalar>(
    graphs: &[IntraExpeditionGraph<T>],
    success_rates: &[T],
    include_diagonal: bool,
) -> Result<RegressionProjection<T>> {
    let rows = graphs
        .iter()
        .map(|g| vectorize_graph(g, include_diagonal))
        .collect::<Result<Vec<_>>>()?;
    fit_vectors(&rows, success_rates, include_diagonal)
}

pub fn fit_vectors<T: Scalar>(
    rows: &[Vec<T>],
    y: &[T],
    include_diagonal: bool,
) -> Result<RegressionProjection<T>> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::TooFew { needed: 1, got: 0 });
    }
    if y.len() != n {
        return Err(Error::Shape(format!("{n} graphs but {} targets", y.len())));
    }
    let x = DenseMatrix::from_rows(rows)?;
    let p = x.cols();
    let nf = T::from_count(n);
    let col_means: Vec<T> = (0..p)
        .map(|j| (0..n).map(|i| x[(i, j)]).sum::<T>() / nf)
        .collect();
    let y_mean = y.iter().copied().sum::<T>() / nf;
    let centered = DenseMatrix::from_fn(n, p, |i, j| x[(i, j)] - col_means[j]);
    let yc: Vec<T> = y.iter().map(|&v| v - y_mean).collect();
    // rounding left over from centering a constant column must not count as rank
    let scale = x.as_slice().iter().fold(T::zero(), |m, &v| m.max(v.abs())) * nf.sqrt();
    let LeastSquares { solution, rank } = min_norm_lstsq_scaled(&centered, &yc, scale)?;
    let intercept = y_mean
        - col_means
            .iter()
            .zip(&solution)
            .map(|(&m, &c)| m * c)
            .sum::<T>();

    let mut warnings = Vec::new();
    if n < p + 2 {
        warnings.push(format!(
            "{n} samples for {} unknowns: poorly conditioned, minimum-norm solution",
            p + 1
        ));
    }
    if rank < p {
        warnings.push(format!("rank-deficient design (rank {rank} of {p})"));
    }
    let sse: T = rows
        .iter()
        .zip(y)
        .map(|(r, &t)| {
            let e = dot(r, &solution) + intercept - t;
            e * e
        })
        .sum();
    Ok(RegressionProjection {
        coefficients: solution,
        intercept,
        fit_residual: (sse / nf).sqrt(),
        rank,
        include_diagonal,
        warnings,
    })
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Scalar image `η = x·c + b` of one graph under a fitted projection.
pub fn project<T: Scalar>(
    graph: &IntraExpeditionGraph<T>,
    proj: &RegressionProjection<T>,
) -> Result<T> {
    let x = vectorize_graph(graph, proj.include_diagonal)?;
    if x.len() != proj.coefficients.len() {
        return Err(Error::Shape(format!(
            "{} entries against {} coefficients",
            x.len(),
            proj.coefficients.len()
        )));
    }
    Ok(dot(&x, &proj.coefficients) + proj.intercept)
}

/// Sample Pearson correlation.
pub fn pearson<T: Scalar>(x: &[T], y: &[T]) -> Result<T> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("{} vs {} samples", x.len(), y.len())));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::TooFew { needed: 3, got: n });
    }
    let nf = T::from_count(n);
    let mx = x.iter().copied().sum::<T>() / nf;
    let my = y.iter().copied().sum::<T>() / nf;
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy = sxy + da * db;
        sxx = sxx + da * da;
        syy = syy + db * db;
    }
    if sxx == T::zero() || syy == T::zero() {
        return Err(Error::UndefinedCorrelation("constant input"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt()))
        .max(-T::one())
        .min(T::one()))
}

/// Two-sided p-value of a sample correlation `r` over `n` pairs (t test, `n - 2` df).
pub fn p_value<T: Scalar>(r: T, n: usize) -> Result<T> {
    if n < 3 {
        return Err(Error::TooFew { needed: 3, got: n });
    }
    let one = T::one();
    if r.is_nan() || r.abs() > one + T::lit(1e-12) {
        return Err(Error::InvalidArgument(format!(
            "correlation {r} outside [-1, 1]"
        )));
    }
    if r.abs() >= one {
        return Ok(T::zero());
    }
    // df / (df + t²) simplifies to 1 - r²
    let df = T::from_count(n - 2);
    Ok(regularized_incomplete_beta(
        one - r * r,
        df / T::lit(2.0),
        T::lit(0.5),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LayerCorrelation<T> {
    pub layer: LayerKind,
    pub r: T,
    pub p: T,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CorrelationReport<T> {
    /// One entry per layer in reporting order.
    pub layers: Vec<LayerCorrelation<T>>,
}

impl<T: Scalar> CorrelationReport<T> {
    pub fn get(&self, kind: LayerKind) -> Option<&LayerCorrelation<T>> {
        self.layers.iter().find(|l| l.layer == kind)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["layer", "r", "p", "n"])?;
        for l in &self.layers {
            w.write_record([
                l.layer.to_string(),
                l.r.to_string(),
                l.p.to_string(),
                l.n.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("utf-8"))
    }
}

/// Success rate of each expedition of the multiplex, in multiplex order.
pub fn success_rates<T: Scalar>(
    dataset: &Dataset,
    ids: &[String],
    scope: MemberScope,
) -> Result<Vec<T>> {
    ids.iter()
        .map(|id| {
            let exp = dataset
                .expedition(id)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown expedition `{id}`")))?;
            success_rate_with(exp, dataset, scope).map(T::lit)
        })
        .collect()
}

/// Pearson r and p between each layer and expedition success rate.
///
/// Factor layers correlate their raw values (undefined values skipped); the
/// feature-graph layer correlates the projections `η` of `graphs`, which must
/// follow the multiplex expedition order.
pub fn layer_success_correlations<T: Scalar>(
    dataset: &Dataset,
    e: &MultiplexGraph<T>,
    graphs: &[(String, IntraExpeditionGraph<T>)],
    proj: &RegressionProjection<T>,
    scope: MemberScope,
) -> Result<CorrelationReport<T>> {
    if graphs.len() != e.len()
        || graphs
            .iter()
            .zip(&e.expedition_ids)
            .any(|((a, _), b)| a != b)
    {
        return Err(Error::Shape(
            "feature graphs are not aligned with the multiplex".into(),
        ));
    }
    let y = success_rates::<T>(dataset, &e.expedition_ids, scope)?;
    let mut layers = Vec::with_capacity(LayerKind::ALL.len());
    for kind in LayerKind::ALL {
        let (xs, ys): (Vec<T>, Vec<T>) = if kind == LayerKind::IntraExpeditionGraph {
            let eta = graphs
                .iter()
                .map(|(_, g)| project(g, proj))
                .collect::<Result<Vec<_>>>()?;
            (eta, y.clone())
        } else {
            e.expedition_ids
                .iter()
                .zip(&y)
                .filter_map(|(id, &rate)| {
                    kind.factor_value(&dataset.expeditions[id])
                        .map(|v| (T::lit(v), rate))
                })
                .unzip()
        };
        let r = pearson(&xs, &ys)?;
        layers.push(LayerCorrelation {
            layer: kind,
            r,
            p: p_value(r, xs.len())?,
            n: xs.len(),
        });
    }
    Ok(CorrelationReport { layers })
}
