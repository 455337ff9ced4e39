//! Edit distance between labelled feature graphs and the derived similarity layer.
//!
//! Every feature graph lives on the same six labelled nodes, so no node
//! insertion, deletion or matching is ever needed: the cheapest edit path
//! substitutes each edge weight, and its L1 cost over the unique entries
//! (upper triangle, diagonal included) is the exact distance.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bipartite::IntraExpeditionGraph;
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::num::Scalar;

pub fn edit_distance<T: Scalar>(
    a: &IntraExpeditionGraph<T>,
    b: &IntraExpeditionGraph<T>,
) -> Result<T> {
    matrix_edit_distance(&a.matrix, &b.matrix)
}

pub fn matrix_edit_distance<T: Scalar>(a: &DenseMatrix<T>, b: &DenseMatrix<T>) -> Result<T> {
    if !a.is_square() || a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(Error::Shape(format!(
            "cannot compare {}x{} with {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let n = a.rows();
    let mut total = T::zero();
    for i in 0..n {
        for j in i..n {
            total = total + (a[(i, j)] - b[(i, j)]).abs();
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DistanceMatrix<T> {
    pub expedition_ids: Vec<String>,
    pub values: DenseMatrix<T>,
    /// Set when unit normalization was requested on an all-zero matrix.
    pub degenerate: bool,
}

/// All pairwise edit distances; rows are computed in parallel.
pub fn pairwise_distances<T: Scalar>(
    graphs: &[(String, IntraExpeditionGraph<T>)],
) -> Result<DistanceMatrix<T>> {
    let n = graphs.len();
    if n < 2 {
        return Err(Error::TooFew { needed: 2, got: n });
    }
    let rows: Vec<Vec<T>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    if j <= i {
                        Ok(T::zero())
                    } else {
                        edit_distance(&graphs[i].1, &graphs[j].1)
                    }
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut values = DenseMatrix::from_rows(&rows)?;
    for i in 0..n {
        for j in 0..i {
            values[(i, j)] = values[(j, i)];
        }
    }
    Ok(DistanceMatrix {
        expedition_ids: graphs.iter().map(|(id, _)| id.clone()).collect(),
        values,
        degenerate: false,
    })
}

/// Scales so the largest distance is 1; an all-zero matrix is returned unchanged and flagged.
pub fn normalize_unit<T: Scalar>(d: &DistanceMatrix<T>) -> DistanceMatrix<T> {
    let max = d.values.max_entry().unwrap_or(T::zero());
    if max <= T::zero() {
        return DistanceMatrix {
            degenerate: true,
            ..d.clone()
        };
    }
    DistanceMatrix {
        expedition_ids: d.expedition_ids.clone(),
        values: d.values.map(|x| x / max),
        degenerate: false,
    }
}

/// Affine map `1 - d` off the diagonal; the diagonal is zero.
pub fn to_similarity<T: Scalar>(d: &DistanceMatrix<T>) -> DenseMatrix<T> {
    let n = d.values.rows();
    DenseMatrix::from_fn(n, n, |i, j| {
        if i == j {
            T::zero()
        } else {
            T::one() - d.values[(i, j)]
        }
    })
}

/// The normalized distances themselves as a layer, diagonal zeroed.
pub fn to_distance_layer<T: Scalar>(d: &DistanceMatrix<T>) -> DenseMatrix<T> {
    let n = d.values.rows();
    DenseMatrix::from_fn(
        n,
        n,
        |i, j| if i == j { T::zero() } else { d.values[(i, j)] },
    )
}

pub fn distances_to_csv<T: Scalar>(d: &DistanceMatrix<T>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["expedition_id".to_string()];
    header.extend(d.expedition_ids.iter().cloned());
    w.write_record(&header)?;
    for (i, id) in d.expedition_ids.iter().enumerate() {
        let mut row = vec![id.clone()];
        row.extend(d.values.row(i).iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(rows: Vec<Vec<f64>>) -> IntraExpeditionGraph<f64> {
        IntraExpeditionGraph {
            matrix: DenseMatrix::from_rows(&rows).unwrap(),
            climber_count: 1,
            normalized: true,
        }
    }

    fn zero6() -> IntraExpeditionGraph<f64> {
        g(vec![vec![0.0; 6]; 6])
    }

    #[test]
    fn identical_graphs_have_zero_distance() {
        let a = g((0..6)
            .map(|i| (0..6).map(|j| ((i + j) % 3) as f64 / 4.0).collect())
            .collect());
        assert_eq!(edit_distance(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn mirrored_edge_counted_once() {
        let mut b = zero6();
        b.matrix[(1, 3)] = 0.5;
        b.matrix[(3, 1)] = 0.5;
        assert_eq!(edit_distance(&zero6(), &b).unwrap(), 0.5);
    }

    #[test]
    fn diagonal_contributes() {
        let mut b = zero6();
        b.matrix[(2, 2)] = 0.25;
        assert_eq!(edit_distance(&zero6(), &b).unwrap(), 0.25);
    }

    #[test]
    fn shape_mismatch_errors() {
        let small = g(vec![vec![0.0; 3]; 3]);
        assert!(matches!(
            edit_distance(&small, &zero6()),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn pairwise_needs_two() {
        assert!(matches!(
            pairwise_distances(&[("a".to_string(), zero6())]),
            Err(Error::TooFew { .. })
        ));
        let d =
            pairwise_distances(&[("a".to_string(), zero6()), ("b".to_string(), zero6())]).unwrap();
        assert_eq!(d.values.as_slice(), &[0.0; 4]);
    }

    #[test]
    fn pairwise_matches_per_pair_calls() {
        let graphs: Vec<_> = (0..3)
            .map(|k| {
                let m = (0..6)
                    .map(|i| (0..6).map(|j| ((i * j + k) % 5) as f64 / 5.0).collect())
                    .collect();
                (format!("e{k}"), g(m))
            })
            .collect();
        let d = pairwise_distances(&graphs).unwrap();
        for i in 0..3 {
            assert_eq!(d.values[(i, i)], 0.0);
            for j in 0..3 {
                assert_eq!(
                    d.values[(i, j)],
                    edit_distance(&graphs[i].1, &graphs[j].1).unwrap()
                );
                assert_eq!(d.values[(i, j)], d.values[(j, i)]);
            }
        }
    }

    #[test]
    fn normalization_and_similarity() {
        let d = DistanceMatrix {
            expedition_ids: vec!["a".into(), "b".into(), "c".into()],
            values: DenseMatrix::from_rows(&[
                vec![0.0, 4.0, 1.0],
                vec![4.0, 0.0, 2.0],
                vec![1.0, 2.0, 0.0],
            ])
            .unwrap(),
            degenerate: false,
        };
        let n = normalize_unit(&d);
        assert_eq!(n.values[(0, 1)], 1.0);
        assert_eq!(n.values[(0, 2)], 0.25);
        assert_eq!(n.values[(1, 2)], 0.5);
        let s = to_similarity(&n);
        assert_eq!(s[(0, 1)], 0.0);
        assert_eq!(s[(0, 2)], 0.75);
        assert_eq!(s[(1, 1)], 0.0);
        let raw = to_distance_layer(&n);
        assert_eq!(raw[(1, 2)], 0.5);

        let zero = DistanceMatrix {
            values: DenseMatrix::zeros(3, 3),
            ..d.clone()
        };
        let z = normalize_unit(&zero);
        assert!(z.degenerate);
        assert_eq!(z.values, zero.values);
        // identical graphs: similarity 1 off the diagonal
        assert_eq!(to_similarity(&z)[(0, 1)], 1.0);
    }

    #[test]
    fn csv_has_id_headers() {
        let d =
            pairwise_distances(&[("a".to_string(), zero6()), ("b".to_string(), zero6())]).unwrap();
        let text = distances_to_csv(&d).unwrap();
        assert!(text.starts_with("expedition_id,a,b\n"));
    }
}
