//! Climber–feature bipartite networks and their projection onto feature space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::num::Scalar;
use crate::records::{ClimberRecord, Dataset, Diagnostic, ExpeditionRecord, ExperienceIndex, Sex};

pub const FEATURE_COUNT: usize = 6;

/// Fallback median age when no ages are available.
pub const REFERENCE_MEDIAN_AGE: f64 = 40.0;

/// Frozen feature order of every feature vector and feature graph.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "age_below_median",
    "male",
    "o2_ascent",
    "o2_descent",
    "hired_sherpa",
    "experience_above_8000m",
];

/// Which side of the median sets the age bit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgeDirection {
    /// Bit set iff `age < median`.
    #[default]
    BelowMedian,
    /// Bit set iff `age > median`.
    AboveMedian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinarizeOptions {
    pub age_direction: AgeDirection,
    /// Keep hired personnel as rows of the bipartite network.
    pub include_hired: bool,
}

impl Default for BinarizeOptions {
    fn default() -> Self {
        BinarizeOptions {
            age_direction: AgeDirection::BelowMedian,
            include_hired: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureVector(pub [u8; FEATURE_COUNT]);

impl FeatureVector {
    pub fn bits(&self) -> &[u8; FEATURE_COUNT] {
        &self.0
    }
}

/// Binarizes one climber into the six-feature profile.
///
/// Ties at the median never set the age bit.
pub fn binarize(
    climber: &ClimberRecord,
    median_age: f64,
    experience_count: usize,
    options: &BinarizeOptions,
) -> Result<FeatureVector> {
    let missing = |field| Error::Binarization {
        climber_id: climber.climber_id.clone(),
        field,
    };
    let age = f64::from(climber.age.ok_or_else(|| missing("age"))?);
    let o2_up = climber.o2_ascent.ok_or_else(|| missing("o2_ascent"))?;
    let o2_down = climber.o2_descent.ok_or_else(|| missing("o2_descent"))?;
    let hired = climber.hired.ok_or_else(|| missing("hired"))?;
    let age_bit = match options.age_direction {
        AgeDirection::BelowMedian => age < median_age,
        AgeDirection::AboveMedian => age > median_age,
    };
    Ok(FeatureVector([
        u8::from(age_bit),
        u8::from(climber.sex == Sex::Male),
        u8::from(o2_up),
        u8::from(o2_down),
        u8::from(hired),
        u8::from(experience_count >= 1),
    ]))
}

/// Median of the given ages, or the reference value 40 when empty.
pub fn median_age(ages: &[u32]) -> f64 {
    if ages.is_empty() {
        return REFERENCE_MEDIAN_AGE;
    }
    let mut sorted = ages.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    if n % 2 == 1 {
        f64::from(sorted[n / 2])
    } else {
        (f64::from(sorted[n / 2 - 1]) + f64::from(sorted[n / 2])) / 2.0
    }
}

/// The climber × feature incidence matrix of one expedition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BipartiteGraph {
    pub expedition_id: String,
    pub climber_ids: Vec<String>,
    pub rows: Vec<FeatureVector>,
}

impl BipartiteGraph {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Keeps the rows whose climber satisfies `keep`, preserving order.
    pub fn subset(&self, mut keep: impl FnMut(&str) -> bool) -> BipartiteGraph {
        let (climber_ids, rows) = self
            .climber_ids
            .iter()
            .zip(&self.rows)
            .filter(|(id, _)| keep(id))
            .map(|(id, r)| (id.clone(), *r))
            .unzip();
        BipartiteGraph {
            expedition_id: self.expedition_id.clone(),
            climber_ids,
            rows,
        }
    }

    pub fn incidence(&self) -> Vec<Vec<u8>> {
        self.rows.iter().map(|r| r.0.to_vec()).collect()
    }
}

/// Builds the bipartite network of one expedition in climber-id order.
///
/// Members lacking a binarization field are skipped and reported; experience is
/// looked up in `experience`, which should index the full unfiltered history.
pub fn build_bipartite(
    expedition: &ExpeditionRecord,
    dataset: &Dataset,
    median_age: f64,
    experience: &ExperienceIndex,
    options: &BinarizeOptions,
) -> Result<(BipartiteGraph, Vec<Diagnostic>)> {
    let mut graph = BipartiteGraph {
        expedition_id: expedition.expedition_id.clone(),
        climber_ids: Vec::new(),
        rows: Vec::new(),
    };
    let mut diagnostics = Vec::new();
    for climber in dataset.members_of(expedition) {
        if !options.include_hired && climber.hired == Some(true) {
            continue;
        }
        let prior = experience.above_8000(&climber.climber_id, expedition.year)?;
        match binarize(climber, median_age, prior, options) {
            Ok(v) => {
                graph.climber_ids.push(climber.climber_id.clone());
                graph.rows.push(v);
            }
            Err(e) => diagnostics.push(Diagnostic {
                source: "bipartite".into(),
                line: 0,
                message: format!(
                    "{} excluded from graph of {}: {e}",
                    climber.climber_id, expedition.expedition_id
                ),
            }),
        }
    }
    if graph.is_empty() {
        return Err(Error::EmptyBipartite(expedition.expedition_id.clone()));
    }
    Ok((graph, diagnostics))
}

/// Co-occurrence counts `PᵀP` of an arbitrary 0/1 incidence matrix.
pub fn co_occurrence<T: Scalar>(incidence: &[Vec<u8>], features: usize) -> Result<DenseMatrix<T>> {
    if incidence.iter().any(|r| r.len() != features) {
        return Err(Error::Shape(format!(
            "incidence rows must have {features} entries"
        )));
    }
    let mut counts = vec![0usize; features * features];
    for row in incidence {
        for a in 0..features {
            if row[a] == 0 {
                continue;
            }
            for b in 0..features {
                counts[a * features + b] += usize::from(row[b] != 0);
            }
        }
    }
    Ok(DenseMatrix::from_fn(features, features, |a, b| {
        T::from_count(counts[a * features + b])
    }))
}

/// Feature co-occurrence graph of one expedition (or outcome subgroup).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct IntraExpeditionGraph<T> {
    pub matrix: DenseMatrix<T>,
    pub climber_count: usize,
    pub normalized: bool,
}

impl<T: Scalar> IntraExpeditionGraph<T> {
    pub fn entry(&self, a: usize, b: usize) -> T {
        self.matrix[(a, b)]
    }
}

/// Projects onto feature space: entry `(a, b)` counts climbers holding both features.
pub fn project<T: Scalar>(graph: &BipartiteGraph) -> Result<IntraExpeditionGraph<T>> {
    if graph.is_empty() {
        return Err(Error::EmptyBipartite(graph.expedition_id.clone()));
    }
    Ok(IntraExpeditionGraph {
        matrix: co_occurrence(&graph.incidence(), FEATURE_COUNT)?,
        climber_count: graph.len(),
        normalized: false,
    })
}

/// Divides every entry by the climber count so weights lie in `[0, 1]`.
pub fn normalize_by_size<T: Scalar>(graph: &IntraExpeditionGraph<T>) -> IntraExpeditionGraph<T> {
    if graph.normalized || graph.climber_count == 0 {
        return graph.clone();
    }
    let m = T::from_count(graph.climber_count);
    IntraExpeditionGraph {
        matrix: graph.matrix.map(|x| x / m),
        climber_count: graph.climber_count,
        normalized: true,
    }
}

/// JSON shape of a serialized feature graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GraphRecord<T> {
    pub expedition_id: String,
    pub m: usize,
    pub normalized: bool,
    pub feature_order: Vec<String>,
    pub matrix: Vec<Vec<T>>,
}

impl<T: Scalar> GraphRecord<T> {
    pub fn new(expedition_id: &str, graph: &IntraExpeditionGraph<T>) -> Self {
        GraphRecord {
            expedition_id: expedition_id.to_string(),
            m: graph.climber_count,
            normalized: graph.normalized,
            feature_order: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            matrix: graph.matrix.to_rows(),
        }
    }

    pub fn to_graph(&self) -> Result<IntraExpeditionGraph<T>> {
        let matrix = DenseMatrix::from_rows(&self.matrix)?;
        if matrix.rows() != FEATURE_COUNT || matrix.cols() != FEATURE_COUNT {
            return Err(Error::Shape(format!(
                "feature graph of {} is {}x{}",
                self.expedition_id,
                matrix.rows(),
                matrix.cols()
            )));
        }
        Ok(IntraExpeditionGraph {
            matrix,
            climber_count: self.m,
            normalized: self.normalized,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::fixtures::{climber, roster};
    use crate::records::{link_and_validate, CodeMap};
    use proptest::prelude::*;

    fn bits(v: [u8; 6]) -> FeatureVector {
        FeatureVector(v)
    }

    #[test]
    fn age_bit_is_strictly_below_median() {
        let opts = BinarizeOptions::default();
        let mut c = climber("A", "E", true);
        c.age = Some(39);
        assert_eq!(binarize(&c, 40.0, 0, &opts).unwrap().0[0], 1);
        c.age = Some(40);
        assert_eq!(binarize(&c, 40.0, 0, &opts).unwrap().0[0], 0);
        let above = BinarizeOptions {
            age_direction: AgeDirection::AboveMedian,
            ..opts
        };
        c.age = Some(41);
        assert_eq!(binarize(&c, 40.0, 0, &above).unwrap().0[0], 1);
    }

    #[test]
    fn all_ones_profile() {
        let mut c = climber("A", "E", true);
        c.age = Some(35);
        c.sex = Sex::Male;
        c.o2_ascent = Some(true);
        c.o2_descent = Some(true);
        c.hired = Some(true);
        let v = binarize(&c, 40.0, 2, &BinarizeOptions::default()).unwrap();
        assert_eq!(v, bits([1, 1, 1, 1, 1, 1]));
    }

    #[test]
    fn missing_field_is_named() {
        let mut c = climber("A", "E", true);
        c.o2_descent = None;
        let err = binarize(&c, 40.0, 0, &BinarizeOptions::default()).unwrap_err();
        assert!(matches!(
            err,
            Error::Binarization {
                field: "o2_descent",
                ..
            }
        ));
    }

    #[test]
    fn median_handles_even_and_empty() {
        assert_eq!(median_age(&[]), 40.0);
        assert_eq!(median_age(&[30, 50, 20]), 30.0);
        assert_eq!(median_age(&[30, 50, 20, 41]), 35.5);
    }

    #[test]
    fn reduced_projection_example() {
        let p = vec![vec![1, 0, 1], vec![1, 1, 0]];
        let i: DenseMatrix<f64> = co_occurrence(&p, 3).unwrap();
        assert_eq!(
            i.to_rows(),
            vec![
                vec![2.0, 1.0, 1.0],
                vec![1.0, 1.0, 0.0],
                vec![1.0, 0.0, 1.0]
            ]
        );
    }

    #[test]
    fn single_climber_projection_is_outer_product() {
        let v = [1u8, 0, 1, 1, 0, 1];
        let g = BipartiteGraph {
            expedition_id: "E".into(),
            climber_ids: vec!["A".into()],
            rows: vec![bits(v)],
        };
        let i: IntraExpeditionGraph<f64> = project(&g).unwrap();
        for a in 0..6 {
            for b in 0..6 {
                assert_eq!(i.entry(a, b), f64::from(v[a] * v[b]));
            }
        }
    }

    #[test]
    fn all_zero_incidence_projects_to_zero() {
        let g = BipartiteGraph {
            expedition_id: "E".into(),
            climber_ids: vec!["A".into(), "B".into()],
            rows: vec![bits([0; 6]); 2],
        };
        let i: IntraExpeditionGraph<f64> = project(&g).unwrap();
        assert!(i.matrix.as_slice().iter().all(|&x| x == 0.0));
        let n = normalize_by_size(&i);
        assert!(n.matrix.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn normalization_divides_by_count() {
        let rows = (0..12)
            .map(|k| bits([1, (k % 2) as u8, (k % 3 == 0) as u8, 0, 1, (k < 5) as u8]))
            .collect::<Vec<_>>();
        let g = BipartiteGraph {
            expedition_id: "E".into(),
            climber_ids: (0..12).map(|k| k.to_string()).collect(),
            rows,
        };
        let i: IntraExpeditionGraph<f64> = project(&g).unwrap();
        let n = normalize_by_size(&i);
        assert_eq!(n.entry(0, 0), 1.0);
        for a in 0..6 {
            for b in 0..6 {
                assert_eq!(n.entry(a, b), i.entry(a, b) / 12.0);
            }
        }
        // idempotent
        assert_eq!(normalize_by_size(&n), n);
    }

    #[test]
    fn build_skips_incomplete_members() {
        let (exp, mut members) = roster("E", 12, 4);
        members[3].age = None;
        let ds = link_and_validate(vec![exp], members, CodeMap::default()).unwrap();
        let idx = ExperienceIndex::new(&ds);
        let (g, diags) = build_bipartite(
            &ds.expeditions["E"],
            &ds,
            40.0,
            &idx,
            &BinarizeOptions::default(),
        )
        .unwrap();
        assert_eq!(g.len(), 11);
        assert_eq!(diags.len(), 1);
        assert!(!g.climber_ids.contains(&"E-c03".to_string()));
        let mut sorted = g.climber_ids.clone();
        sorted.sort();
        assert_eq!(sorted, g.climber_ids);
    }

    #[test]
    fn build_can_drop_hired_rows() {
        let (exp, mut members) = roster("E", 12, 4);
        for m in members.iter_mut().take(5) {
            m.hired = Some(true);
        }
        let ds = link_and_validate(vec![exp], members, CodeMap::default()).unwrap();
        let idx = ExperienceIndex::new(&ds);
        let opts = BinarizeOptions {
            include_hired: false,
            ..Default::default()
        };
        let (g, _) = build_bipartite(&ds.expeditions["E"], &ds, 40.0, &idx, &opts).unwrap();
        assert_eq!(g.len(), 7);
        let (full, _) = build_bipartite(
            &ds.expeditions["E"],
            &ds,
            40.0,
            &idx,
            &BinarizeOptions::default(),
        )
        .unwrap();
        assert_eq!(full.len(), 12);
    }

    #[test]
    fn build_without_usable_members_errors() {
        let (exp, mut members) = roster("E", 2, 1);
        for m in &mut members {
            m.hired = None;
        }
        let ds = link_and_validate(vec![exp], members, CodeMap::default()).unwrap();
        let idx = ExperienceIndex::new(&ds);
        let err = build_bipartite(
            &ds.expeditions["E"],
            &ds,
            40.0,
            &idx,
            &BinarizeOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::EmptyBipartite(_)));
    }

    #[test]
    fn graph_record_round_trip() {
        let g = BipartiteGraph {
            expedition_id: "E".into(),
            climber_ids: vec!["A".into()],
            rows: vec![bits([1, 1, 0, 0, 1, 0])],
        };
        let i: IntraExpeditionGraph<f64> = project(&g).unwrap();
        let rec = GraphRecord::new("E", &i);
        let text = serde_json::to_string(&rec).unwrap();
        let back: GraphRecord<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_graph().unwrap(), i);
    }

    fn incidence_strategy() -> impl Strategy<Value = Vec<Vec<u8>>> {
        prop::collection::vec(prop::collection::vec(0u8..=1, FEATURE_COUNT), 1..=50)
    }

    proptest! {
        #[test]
        fn projection_is_symmetric_and_diagonally_dominant(p in incidence_strategy()) {
            let i: DenseMatrix<f64> = co_occurrence(&p, FEATURE_COUNT).unwrap();
            prop_assert!(i.is_symmetric(0.0));
            for a in 0..FEATURE_COUNT {
                for b in 0..FEATURE_COUNT {
                    prop_assert!(i[(a, a)] >= i[(a, b)]);
                    prop_assert!(i[(a, b)] <= p.len() as f64);
                }
            }
        }

        #[test]
        fn normalization_preserves_entry_order(p in incidence_strategy()) {
            let rows: Vec<FeatureVector> = p.iter().map(|r| {
                let mut a = [0u8; 6];
                a.copy_from_slice(r);
                FeatureVector(a)
            }).collect();
            let g = BipartiteGraph {
                expedition_id: "E".into(),
                climber_ids: (0..rows.len()).map(|k| k.to_string()).collect(),
                rows,
            };
            let i: IntraExpeditionGraph<f64> = project(&g).unwrap();
            let n = normalize_by_size(&i);
            let (a, b) = (i.matrix.as_slice(), n.matrix.as_slice());
            for x in 0..a.len() {
                prop_assert!(b[x] >= 0.0 && b[x] <= 1.0);
                for y in 0..a.len() {
                    prop_assert_eq!(a[x] < a[y], b[x] < b[y]);
                }
            }
        }
    }
}
