//! Pure vector kernel shared by all analyses: cosine distances, distance
//! matrices and cluster centroids.
//!
//! Sums over many terms (dot products, coordinate means, pair means) use
//! fixed-shape pairwise (tree) summation so results do not depend on how the
//! work is scheduled, and reordering inputs moves results by at most ~1e-12.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{AuditError, Result};

/// Distances outside [0, 2] by at most this much are clamped; larger
/// violations are reported as internal errors.
pub const CLAMP_TOLERANCE: f64 = 1e-9;

/// Pairwise (tree) summation of `f(0), ..., f(n-1)` with a fixed reduction
/// shape determined only by `n`.
pub(crate) fn pairwise_sum_with(n: usize, f: &mut impl FnMut(usize) -> f64) -> f64 {
    fn go(offset: usize, n: usize, f: &mut impl FnMut(usize) -> f64) -> f64 {
        if n <= 32 {
            let mut acc = 0.0;
            for i in 0..n {
                acc += f(offset + i);
            }
            acc
        } else {
            let half = n / 2;
            go(offset, half, f) + go(offset + half, n - half, f)
        }
    }
    go(0, n, f)
}

pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    pairwise_sum_with(xs.len(), &mut |i| xs[i])
}

/// A fixed-dimension embedding with finite coordinates and nonzero norm,
/// enforced at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(AuditError::Argument(
                "embedding vector must be non-empty".into(),
            ));
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            return Err(AuditError::Argument(format!(
                "embedding coordinate {idx} is not finite"
            )));
        }
        let v = EmbeddingVector { values };
        if v.norm() == 0.0 {
            return Err(AuditError::ZeroNorm { context: None });
        }
        Ok(v)
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        pairwise_sum_with(self.values.len(), &mut |i| self.values[i] * self.values[i]).sqrt()
    }

    pub fn dot(&self, other: &EmbeddingVector) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(AuditError::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
                context: Some("dot product".into()),
            });
        }
        Ok(pairwise_sum_with(self.values.len(), &mut |i| {
            self.values[i] * other.values[i]
        }))
    }
}

impl Serialize for EmbeddingVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.values.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for EmbeddingVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let values = Vec::<f64>::deserialize(deserializer)?;
        EmbeddingVector::new(values).map_err(serde::de::Error::custom)
    }
}

/// Cosine distance 1 - a.b / (|a||b|), clamped into [0, 2]. Bitwise-equal
/// inputs are exactly 0, which keeps identical-metaphor cells at zero
/// diversity instead of accumulating rounding dust.
pub fn cosine_distance(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(AuditError::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
            context: Some("cosine distance".into()),
        });
    }
    if a.values() == b.values() {
        return Ok(0.0);
    }
    let dot = a.dot(b)?;
    let d = 1.0 - dot / (a.norm() * b.norm());
    clamp_distance(d)
}

fn clamp_distance(d: f64) -> Result<f64> {
    if !d.is_finite() {
        return Err(AuditError::InternalConsistency(format!(
            "cosine distance is not finite: {d}"
        )));
    }
    if d < 0.0 {
        if d >= -CLAMP_TOLERANCE {
            return Ok(0.0);
        }
    } else if d > 2.0 {
        if d <= 2.0 + CLAMP_TOLERANCE {
            return Ok(2.0);
        }
    } else {
        return Ok(d);
    }
    Err(AuditError::InternalConsistency(format!(
        "cosine distance {d} outside [0, 2] beyond clamp tolerance"
    )))
}

/// Symmetric n x n matrix of cosine distances with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl DistanceMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }
}

/// Entry (i, j) = cosine_distance(vs[i], vs[j]); exactly symmetric because
/// each unordered pair is computed once and mirrored.
pub fn pairwise_distances(vs: &[EmbeddingVector]) -> Result<DistanceMatrix> {
    if vs.is_empty() {
        return Err(AuditError::Argument(
            "pairwise_distances needs at least one vector".into(),
        ));
    }
    let n = vs.len();
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = cosine_distance(&vs[i], &vs[j])?;
            entries[i * n + j] = d;
            entries[j * n + i] = d;
        }
    }
    Ok(DistanceMatrix { n, entries })
}

/// Mean cosine distance over the n(n-1)/2 unordered distinct pairs.
pub fn mean_pairwise_distance(vs: &[EmbeddingVector]) -> Result<f64> {
    if vs.len() < 2 {
        return Err(AuditError::Argument(format!(
            "mean pairwise distance needs at least 2 vectors, got {}",
            vs.len()
        )));
    }
    let n = vs.len();
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            dists.push(cosine_distance(&vs[i], &vs[j])?);
        }
    }
    Ok(pairwise_sum(&dists) / dists.len() as f64)
}

/// Coordinatewise arithmetic mean of raw (unnormalized) vectors.
pub fn centroid(vs: &[EmbeddingVector]) -> Result<EmbeddingVector> {
    if vs.is_empty() {
        return Err(AuditError::Argument("centroid of empty cluster".into()));
    }
    let dim = vs[0].dim();
    for (k, v) in vs.iter().enumerate() {
        if v.dim() != dim {
            return Err(AuditError::DimensionMismatch {
                expected: dim,
                got: v.dim(),
                context: Some(format!("centroid input {k}")),
            });
        }
    }
    let n = vs.len();
    let mean: Vec<f64> = (0..dim)
        .map(|c| pairwise_sum_with(n, &mut |i| vs[i].values()[c]) / n as f64)
        .collect();
    EmbeddingVector::new(mean).map_err(|e| match e {
        AuditError::ZeroNorm { .. } => AuditError::DegenerateCluster { context: None },
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn ev(values: &[f64]) -> EmbeddingVector {
        EmbeddingVector::new(values.to_vec()).unwrap()
    }

    #[test]
    fn self_distance_is_zero() {
        let v = ev(&[0.3, -1.2, 4.5]);
        assert_eq!(cosine_distance(&v, &v).unwrap(), 0.0);
    }

    #[test]
    fn antipodal_distance_is_two() {
        let a = ev(&[1.0, 0.0]);
        let b = ev(&[-1.0, 0.0]);
        assert_eq!(cosine_distance(&a, &b).unwrap(), 2.0);
    }

    #[test]
    fn orthogonal_distance_is_one() {
        let a = ev(&[1.0, 0.0]);
        let b = ev(&[0.0, 1.0]);
        assert_eq!(cosine_distance(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let a = ev(&[1.0, 0.0]);
        let b = ev(&[1.0, 0.0, 0.0]);
        assert!(matches!(
            cosine_distance(&a, &b),
            Err(AuditError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn zero_vector_rejected_at_construction() {
        assert!(matches!(
            EmbeddingVector::new(vec![0.0, 0.0]),
            Err(AuditError::ZeroNorm { .. })
        ));
        assert!(EmbeddingVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(EmbeddingVector::new(vec![]).is_err());
    }

    #[test]
    fn single_vector_matrix_is_zero() {
        let m = pairwise_distances(&[ev(&[2.0, 1.0])]).unwrap();
        assert_eq!(m.n(), 1);
        assert_eq!(m.entry(0, 0), 0.0);
    }

    #[test]
    fn standard_basis_off_diagonals_are_one() {
        let vs = vec![
            ev(&[1.0, 0.0, 0.0]),
            ev(&[0.0, 1.0, 0.0]),
            ev(&[0.0, 0.0, 1.0]),
        ];
        let m = pairwise_distances(&vs).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 0.0 } else { 1.0 };
                assert_eq!(m.entry(i, j), want);
            }
        }
        assert!((mean_pairwise_distance(&vs).unwrap() - 1.0).abs() < 1e-15);
    }

    // Brute-force oracle: an independent double loop with naive accumulation.
    fn oracle_cosine(a: &[f64], b: &[f64]) -> f64 {
        let mut dot = 0.0;
        let mut na = 0.0;
        let mut nb = 0.0;
        for k in 0..a.len() {
            dot += a[k] * b[k];
            na += a[k] * a[k];
            nb += b[k] * b[k];
        }
        1.0 - dot / (na.sqrt() * nb.sqrt())
    }

    #[test]
    fn random_matrix_matches_brute_force_oracle() {
        let mut rng = Rng::new(2024);
        let vs: Vec<EmbeddingVector> = (0..20)
            .map(|_| {
                EmbeddingVector::new((0..3072).map(|_| rng.next_range(-1.0, 1.0)).collect())
                    .unwrap()
            })
            .collect();
        let m = pairwise_distances(&vs).unwrap();
        for i in 0..20 {
            for j in 0..20 {
                let want = if i == j {
                    0.0
                } else {
                    oracle_cosine(vs[i].values(), vs[j].values())
                };
                let got = m.entry(i, j);
                let scale = want.abs().max(1.0);
                assert!(
                    (got - want).abs() <= 1e-12 * scale,
                    "entry ({i},{j}): got {got}, oracle {want}"
                );
            }
        }
    }

    #[test]
    fn identical_vectors_mean_distance_zero() {
        for n in [2usize, 3, 20, 41] {
            let vs: Vec<EmbeddingVector> = (0..n).map(|_| ev(&[0.2, 0.4, -0.1])).collect();
            assert_eq!(mean_pairwise_distance(&vs).unwrap(), 0.0, "n = {n}");
        }
    }

    #[test]
    fn mean_pairwise_needs_two() {
        assert!(mean_pairwise_distance(&[ev(&[1.0])]).is_err());
    }

    #[test]
    fn seeded_five_vector_mean_matches_hand_oracle() {
        let mut rng = Rng::new(7);
        let vs: Vec<EmbeddingVector> = (0..5)
            .map(|_| {
                EmbeddingVector::new((0..16).map(|_| rng.next_range(-1.0, 1.0)).collect()).unwrap()
            })
            .collect();
        // Hand oracle: sum over the 10 unordered pairs, divided by 10.
        let mut sum = 0.0;
        for i in 0..5 {
            for j in (i + 1)..5 {
                sum += oracle_cosine(vs[i].values(), vs[j].values());
            }
        }
        let want = sum / 10.0;
        let got = mean_pairwise_distance(&vs).unwrap();
        assert!((got - want).abs() < 1e-13, "got {got}, want {want}");
    }

    #[test]
    fn centroid_of_single_vector_is_itself() {
        let v = ev(&[1.5, -0.5]);
        assert_eq!(centroid(std::slice::from_ref(&v)).unwrap(), v);
    }

    #[test]
    fn centroid_of_two_basis_vectors() {
        let c = centroid(&[ev(&[1.0, 0.0]), ev(&[0.0, 1.0])]).unwrap();
        assert_eq!(c.values(), &[0.5, 0.5]);
    }

    #[test]
    fn opposite_vectors_degenerate_centroid() {
        let r = centroid(&[ev(&[1.0, 0.0]), ev(&[-1.0, 0.0])]);
        assert!(matches!(r, Err(AuditError::DegenerateCluster { .. })));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn vec_strategy(dim: usize) -> impl Strategy<Value = Vec<f64>> {
            proptest::collection::vec(-100.0f64..100.0, dim).prop_filter(
                "nonzero norm",
                |v| v.iter().map(|x| x * x).sum::<f64>().sqrt() > 1e-6,
            )
        }

        proptest! {
            #[test]
            fn scale_invariance(v in vec_strategy(8), w in vec_strategy(8),
                                alpha in 1e-3f64..1e3, beta in 1e-3f64..1e3) {
                let a = EmbeddingVector::new(v.clone()).unwrap();
                let b = EmbeddingVector::new(w.clone()).unwrap();
                let sa = EmbeddingVector::new(v.iter().map(|x| x * alpha).collect()).unwrap();
                let sb = EmbeddingVector::new(w.iter().map(|x| x * beta).collect()).unwrap();
                let d = cosine_distance(&a, &b).unwrap();
                let ds = cosine_distance(&sa, &sb).unwrap();
                prop_assert!((d - ds).abs() <= 1e-9);
            }

            #[test]
            fn symmetry_exact(v in vec_strategy(8), w in vec_strategy(8)) {
                let a = EmbeddingVector::new(v).unwrap();
                let b = EmbeddingVector::new(w).unwrap();
                prop_assert_eq!(
                    cosine_distance(&a, &b).unwrap(),
                    cosine_distance(&b, &a).unwrap()
                );
            }

            #[test]
            fn range_after_clamp(v in vec_strategy(8), w in vec_strategy(8)) {
                let a = EmbeddingVector::new(v).unwrap();
                let b = EmbeddingVector::new(w).unwrap();
                let d = cosine_distance(&a, &b).unwrap();
                prop_assert!((0.0..=2.0).contains(&d));
            }

            #[test]
            fn permutation_invariance(vs in proptest::collection::vec(vec_strategy(6), 2..10),
                                      seed in any::<u64>()) {
                let vectors: Vec<EmbeddingVector> =
                    vs.iter().map(|v| EmbeddingVector::new(v.clone()).unwrap()).collect();
                let mut shuffled = vectors.clone();
                crate::rng::Rng::new(seed).shuffle(&mut shuffled);

                let m1 = mean_pairwise_distance(&vectors).unwrap();
                let m2 = mean_pairwise_distance(&shuffled).unwrap();
                prop_assert!((m1 - m2).abs() <= 1e-12);

                let c1 = centroid(&vectors);
                let c2 = centroid(&shuffled);
                if let (Ok(c1), Ok(c2)) = (c1, c2) {
                    for (a, b) in c1.values().iter().zip(c2.values()) {
                        prop_assert!((a - b).abs() <= 1e-12);
                    }
                }
            }
        }
    }
}
