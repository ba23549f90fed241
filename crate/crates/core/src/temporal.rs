//! Day-offset computation from the run date and per-segment aggregation.
//!
//! Each dated entry contributes one signed day offset (history is negative,
//! zero on the run date itself). Per segment the offsets collapse to a
//! (min, max, avg) triple; the record vector concatenates the triples in TR,
//! IN, CL order. Empty segments get a finite sentinel triple so the vector is
//! always standardizable.

use crate::bureau::{CustomerFile, RecordLine, SegmentType};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Sentinel day offset (about ten years back) for segments with no records.
pub const EMPTY_SEGMENT_SENTINEL: f64 = -3650.0;
pub const RECORD_VECTOR_LEN: usize = 9;
pub const STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemporalVector(pub [f64; RECORD_VECTOR_LEN]);

impl TemporalVector {
    /// The (min, max, avg) triple of one segment.
    pub fn triple(&self, segment: SegmentType) -> (f64, f64, f64) {
        let base = match segment {
            SegmentType::Tr => 0,
            SegmentType::In => 3,
            SegmentType::Cl => 6,
        };
        (self.0[base], self.0[base + 1], self.0[base + 2])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemporalError {
    #[error("standardizer needs at least two training vectors, got {got}")]
    EmptyTrainingSet { got: usize },
}

/// One signed day offset per date field per entry (TR: open date, IN: inquiry
/// date, CL: assignment date), in file order.
pub fn compute_deltas(cf: &CustomerFile) -> BTreeMap<SegmentType, Vec<i64>> {
    let mut map: BTreeMap<SegmentType, Vec<i64>> =
        SegmentType::ALL.iter().map(|&s| (s, Vec::new())).collect();
    for record in &cf.records {
        let (segment, date) = match record {
            RecordLine::Trade(t) => (SegmentType::Tr, t.open_date),
            RecordLine::Inquiry(i) => (SegmentType::In, i.inquiry_date),
            RecordLine::Collection(c) => (SegmentType::Cl, c.assign_date),
            RecordLine::Performance(_) => continue,
        };
        map.get_mut(&segment)
            .unwrap()
            .push((date - cf.run_date).num_days());
    }
    map
}

/// Collapse per-segment day offsets into the record vector.
pub fn aggregate(deltas: &BTreeMap<SegmentType, Vec<i64>>) -> TemporalVector {
    let mut out = [0.0; RECORD_VECTOR_LEN];
    for (idx, segment) in SegmentType::ALL.iter().enumerate() {
        let values = deltas.get(segment).map(Vec::as_slice).unwrap_or(&[]);
        let triple = if values.is_empty() {
            (
                EMPTY_SEGMENT_SENTINEL,
                EMPTY_SEGMENT_SENTINEL,
                EMPTY_SEGMENT_SENTINEL,
            )
        } else {
            let min = *values.iter().min().unwrap() as f64;
            let max = *values.iter().max().unwrap() as f64;
            let sum: i64 = values.iter().sum();
            (min, max, sum as f64 / values.len() as f64)
        };
        out[idx * 3] = triple.0;
        out[idx * 3 + 1] = triple.1;
        out[idx * 3 + 2] = triple.2;
    }
    TemporalVector(out)
}

/// Per-coordinate mean and standard deviation fitted on the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub fn fit_standardizer(vectors: &[TemporalVector]) -> Result<Standardizer, TemporalError> {
    if vectors.len() < 2 {
        return Err(TemporalError::EmptyTrainingSet {
            got: vectors.len(),
        });
    }
    let n = vectors.len() as f64;
    let mut mean = vec![0.0; RECORD_VECTOR_LEN];
    for v in vectors {
        for (m, x) in mean.iter_mut().zip(v.0.iter()) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut var = vec![0.0; RECORD_VECTOR_LEN];
    for v in vectors {
        for (acc, (x, m)) in var.iter_mut().zip(v.0.iter().zip(mean.iter())) {
            let d = x - m;
            *acc += d * d;
        }
    }
    let std = var
        .into_iter()
        .map(|s| (s / n).sqrt().max(STD_FLOOR))
        .collect();
    Ok(Standardizer { mean, std })
}

pub fn apply(std: &Standardizer, v: &TemporalVector) -> [f64; RECORD_VECTOR_LEN] {
    let mut out = [0.0; RECORD_VECTOR_LEN];
    for i in 0..RECORD_VECTOR_LEN {
        out[i] = (v.0[i] - std.mean[i]) / std.std[i];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bureau::parse_customer;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn deltas_match_calendar_arithmetic() {
        // run 2018-02-01; dates 2017-02-01, 2018-01-01, 2017-08-01
        let block = "CUST00000000A00120180201\n\
                     TR01AA0000000000000001CC201702010100000010000000100000000000000000000000000000\n\
                     TR01AA0000000000000002CC201801010100000010000000100000000000000000000000000000\n\
                     TR01AA0000000000000003CC201708010100000010000000100000000000000000000000000000\n\
                     END0\n";
        let cf = parse_customer(block).unwrap();
        let deltas = compute_deltas(&cf);
        assert_eq!(deltas[&SegmentType::Tr], vec![-365, -31, -184]);
        assert!(deltas[&SegmentType::In].is_empty());
    }

    #[test]
    fn delta_zero_on_run_date() {
        let block = "CUST00000000A00120180201\n\
                     IN0100000120180201CC\n\
                     END0\n";
        let cf = parse_customer(block).unwrap();
        assert_eq!(compute_deltas(&cf)[&SegmentType::In], vec![0]);
    }

    #[test]
    fn aggregate_triple() {
        let mut deltas = BTreeMap::new();
        deltas.insert(SegmentType::Tr, vec![-365, -31, -184]);
        let v = aggregate(&deltas);
        let (min, max, avg) = v.triple(SegmentType::Tr);
        assert_eq!(min, -365.0);
        assert_eq!(max, -31.0);
        assert!((avg - (-580.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn aggregate_singleton() {
        let mut deltas = BTreeMap::new();
        deltas.insert(SegmentType::Cl, vec![-10]);
        let v = aggregate(&deltas);
        assert_eq!(v.triple(SegmentType::Cl), (-10.0, -10.0, -10.0));
    }

    #[test]
    fn all_empty_yields_nine_sentinels() {
        let v = aggregate(&BTreeMap::new());
        assert!(v.0.iter().all(|&x| x == EMPTY_SEGMENT_SENTINEL));
    }

    #[test]
    fn aggregate_matches_brute_force_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let n = rng.gen_range(1..20);
            let values: Vec<i64> = (0..n).map(|_| -rng.gen_range(0..4000)).collect();
            let mut deltas = BTreeMap::new();
            deltas.insert(SegmentType::Tr, values.clone());
            let v = aggregate(&deltas);
            let (min, max, avg) = v.triple(SegmentType::Tr);
            // brute force
            let mut bmin = i64::MAX;
            let mut bmax = i64::MIN;
            let mut bsum = 0i64;
            for &x in &values {
                bmin = bmin.min(x);
                bmax = bmax.max(x);
                bsum += x;
            }
            assert_eq!(min, bmin as f64);
            assert_eq!(max, bmax as f64);
            assert!((avg - bsum as f64 / values.len() as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn order_stability_under_permutation() {
        let mut deltas = BTreeMap::new();
        deltas.insert(SegmentType::In, vec![-5, -100, -31]);
        let a = aggregate(&deltas);
        deltas.insert(SegmentType::In, vec![-31, -5, -100]);
        let b = aggregate(&deltas);
        assert_eq!(a, b);
    }

    #[test]
    fn standardizer_basics() {
        let vs: Vec<TemporalVector> = (0..4)
            .map(|i| TemporalVector([i as f64; RECORD_VECTOR_LEN]))
            .collect();
        let std = fit_standardizer(&vs).unwrap();
        assert!((std.mean[0] - 1.5).abs() < 1e-12);
        // v == mean maps to the zero vector
        let z = apply(&std, &TemporalVector([1.5; RECORD_VECTOR_LEN]));
        assert!(z.iter().all(|&x| x.abs() < 1e-12));
    }

    #[test]
    fn constant_coordinate_floors_std() {
        let vs = vec![
            TemporalVector([2.0; RECORD_VECTOR_LEN]),
            TemporalVector([2.0; RECORD_VECTOR_LEN]),
        ];
        let std = fit_standardizer(&vs).unwrap();
        assert!(std.std.iter().all(|&s| s == STD_FLOOR));
        let z = apply(&std, &TemporalVector([2.0; RECORD_VECTOR_LEN]));
        assert!(z.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn standardized_outputs_center_on_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let vs: Vec<TemporalVector> = (0..1000)
            .map(|_| {
                let mut arr = [0.0; RECORD_VECTOR_LEN];
                for a in &mut arr {
                    *a = -rng.gen_range(0.0..3650.0);
                }
                TemporalVector(arr)
            })
            .collect();
        let std = fit_standardizer(&vs).unwrap();
        let mut mean = [0.0; RECORD_VECTOR_LEN];
        for v in &vs {
            let z = apply(&std, v);
            for (m, x) in mean.iter_mut().zip(z.iter()) {
                *m += x;
            }
        }
        for m in &mean {
            assert!((m / 1000.0).abs() < 1e-9);
        }
    }

    #[test]
    fn too_few_vectors_is_an_error() {
        assert!(matches!(
            fit_standardizer(&[]),
            Err(TemporalError::EmptyTrainingSet { got: 0 })
        ));
        assert!(fit_standardizer(&[TemporalVector([0.0; 9])]).is_err());
    }
}
