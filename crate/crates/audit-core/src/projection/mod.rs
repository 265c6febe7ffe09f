//! Analysis II: from-scratch exact t-SNE projecting each culture's metaphor
//! embeddings to 2D.
//!
//! Gradient descent on KL(P || Q) with the Student-t (df = 1) low-dimensional
//! kernel, momentum, per-dimension gain adaptation and early exaggeration.
//! Everything is seeded and reduced in a fixed order, so identical inputs
//! give bit-identical layouts.

mod affinity;

pub use affinity::{
    affinity_matrix, conditional_affinities, kl_divergence, row_perplexity,
    worst_row_perplexity, SquareMatrix, MAX_BISECTION_STEPS, PERPLEXITY_TOLERANCE,
};

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{AuditError, Result};
use crate::geometry::{pairwise_distances, EmbeddingVector};
use crate::rng::{derive_seed, hash_str, Rng};

/// Distance fed to the high-dimensional kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TsneMetric {
    /// Cosine distance from the geometry kernel (pipeline default).
    Cosine,
    /// Squared Euclidean distance on the raw vectors.
    Euclidean,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub early_exaggeration_factor: f64,
    pub early_exaggeration_iters: usize,
    pub learning_rate: f64,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub seed: u64,
    pub metric: TsneMetric,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            perplexity: 15.0,
            iterations: 1000,
            early_exaggeration_factor: 12.0,
            early_exaggeration_iters: 250,
            learning_rate: 200.0,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            seed: 0,
            metric: TsneMetric::Cosine,
        }
    }
}

impl TsneConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if n < 4 {
            return Err(AuditError::Argument(format!(
                "t-SNE needs at least 4 points, got {n}"
            )));
        }
        if !self.perplexity.is_finite() || self.perplexity <= 1.0 {
            return Err(AuditError::Config(format!(
                "perplexity must exceed 1, got {}",
                self.perplexity
            )));
        }
        if self.perplexity >= (n - 1) as f64 / 3.0 {
            return Err(AuditError::Config(format!(
                "perplexity {} too large for {n} points (needs perplexity < (n - 1) / 3)",
                self.perplexity
            )));
        }
        if self.iterations < self.early_exaggeration_iters {
            return Err(AuditError::Config(format!(
                "iterations ({}) must be >= early exaggeration iterations ({})",
                self.iterations, self.early_exaggeration_iters
            )));
        }
        if self.early_exaggeration_factor < 1.0 {
            return Err(AuditError::Config(
                "early exaggeration factor must be >= 1".into(),
            ));
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(AuditError::Config("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Grid coordinates of one projected point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointLabel {
    pub concept: String,
    pub culture: String,
    pub run_index: usize,
}

/// 2D layout of one t-SNE run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout2D {
    pub points: Vec<[f64; 2]>,
    pub labels: Vec<PointLabel>,
    /// KL(P || Q) at the last iteration.
    pub final_kl: f64,
    /// KL(P || Q) right after the exaggeration phase ends (true P).
    pub exaggeration_kl: f64,
}

impl Layout2D {
    /// CSV rows `x,y,concept,culture,run_index`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,concept,culture,run_index\n");
        for (p, label) in self.points.iter().zip(&self.labels) {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                p[0],
                p[1],
                crate::diversity::csv_field(&label.concept),
                crate::diversity::csv_field(&label.culture),
                label.run_index
            ));
        }
        out
    }
}

fn input_distances(vectors: &[EmbeddingVector], metric: TsneMetric) -> Result<Vec<Vec<f64>>> {
    let n = vectors.len();
    match metric {
        TsneMetric::Cosine => {
            let d = pairwise_distances(vectors)?;
            Ok((0..n).map(|i| d.row(i).to_vec()).collect())
        }
        TsneMetric::Euclidean => {
            let dim = vectors[0].dim();
            let mut rows = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in (i + 1)..n {
                    if vectors[j].dim() != dim {
                        return Err(AuditError::DimensionMismatch {
                            expected: dim,
                            got: vectors[j].dim(),
                            context: Some("t-SNE input".into()),
                        });
                    }
                    let mut acc = 0.0;
                    for c in 0..dim {
                        let diff = vectors[i].values()[c] - vectors[j].values()[c];
                        acc += diff * diff;
                    }
                    rows[i][j] = acc;
                    rows[j][i] = acc;
                }
            }
            Ok(rows)
        }
    }
}

/// Student-t (df = 1) kernel matrix Q and the unnormalized weights W.
fn low_dim_kernel(y: &[[f64; 2]]) -> (SquareMatrix, SquareMatrix) {
    let n = y.len();
    let mut w = SquareMatrix::zeros(n);
    let mut terms = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = y[i][0] - y[j][0];
            let dy = y[i][1] - y[j][1];
            let v = 1.0 / (1.0 + dx * dx + dy * dy);
            w.set(i, j, v);
            w.set(j, i, v);
            terms.push(v);
        }
    }
    let total = 2.0 * crate::geometry::pairwise_sum(&terms);
    let mut q = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                q.set(i, j, w.get(i, j) / total);
            }
        }
    }
    (q, w)
}

/// Seeded isotropic Gaussian initial layout (sigma = 1e-4).
pub fn initial_layout(n: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = Rng::new(seed);
    (0..n)
        .map(|_| [1e-4 * rng.next_normal(), 1e-4 * rng.next_normal()])
        .collect()
}

/// Run t-SNE with the standard seeded initialization.
pub fn run_tsne(
    vectors: &[EmbeddingVector],
    labels: Vec<PointLabel>,
    cfg: &TsneConfig,
) -> Result<Layout2D> {
    let init = initial_layout(vectors.len(), derive_seed(cfg.seed, &[hash_str("tsne-init")]));
    run_tsne_with_init(vectors, labels, cfg, init)
}

/// Run t-SNE from an explicit initial layout (also the hook the
/// input-order-equivariance test uses).
pub fn run_tsne_with_init(
    vectors: &[EmbeddingVector],
    labels: Vec<PointLabel>,
    cfg: &TsneConfig,
    init: Vec<[f64; 2]>,
) -> Result<Layout2D> {
    let n = vectors.len();
    cfg.validate(n)?;
    if labels.len() != n {
        return Err(AuditError::DimensionMismatch {
            expected: n,
            got: labels.len(),
            context: Some("t-SNE labels".into()),
        });
    }
    if init.len() != n {
        return Err(AuditError::DimensionMismatch {
            expected: n,
            got: init.len(),
            context: Some("t-SNE initial layout".into()),
        });
    }

    let mut rows = input_distances(vectors, cfg.metric)?;
    let p_true = affinity::symmetrize(&affinity::conditional_from_raw(
        n,
        &mut |i| std::mem::take(&mut rows[i]),
        cfg.perplexity,
    )?);

    let mut p_work = p_true.clone();
    for v in p_work.values_mut() {
        *v *= cfg.early_exaggeration_factor;
    }

    let mut y = init;
    let mut velocity = vec![[0.0_f64; 2]; n];
    let mut gains = vec![[1.0_f64; 2]; n];
    let mut exaggeration_kl = f64::NAN;

    for iter in 0..cfg.iterations {
        if iter == cfg.early_exaggeration_iters {
            p_work = p_true.clone();
            let (q, _) = low_dim_kernel(&y);
            exaggeration_kl = kl_divergence(&p_true, &q)?;
        }
        let momentum = if iter < cfg.early_exaggeration_iters {
            cfg.initial_momentum
        } else {
            cfg.final_momentum
        };

        let (q, w) = low_dim_kernel(&y);

        // dC/dy_i = 4 * sum_j (p_ij - q_ij) * w_ij * (y_i - y_j)
        let mut grad = vec![[0.0_f64; 2]; n];
        for i in 0..n {
            let mut gx = 0.0;
            let mut gy = 0.0;
            for j in 0..n {
                if i == j {
                    continue;
                }
                let coeff = 4.0 * (p_work.get(i, j) - q.get(i, j)) * w.get(i, j);
                gx += coeff * (y[i][0] - y[j][0]);
                gy += coeff * (y[i][1] - y[j][1]);
            }
            grad[i] = [gx, gy];
        }

        for i in 0..n {
            for c in 0..2 {
                let g = grad[i][c];
                let gain = &mut gains[i][c];
                *gain = if g.signum() != velocity[i][c].signum() {
                    *gain + 0.2
                } else {
                    *gain * 0.8
                };
                if *gain < 0.01 {
                    *gain = 0.01;
                }
                velocity[i][c] = momentum * velocity[i][c] - cfg.learning_rate * *gain * g;
                y[i][c] += velocity[i][c];
            }
        }

        // Re-center; KL is translation-invariant and this keeps coordinates
        // bounded.
        let mut mean = [0.0_f64; 2];
        for p in &y {
            mean[0] += p[0];
            mean[1] += p[1];
        }
        mean[0] /= n as f64;
        mean[1] /= n as f64;
        for p in &mut y {
            p[0] -= mean[0];
            p[1] -= mean[1];
            if !p[0].is_finite() || !p[1].is_finite() {
                return Err(AuditError::Overflow(format!(
                    "t-SNE layout at iteration {iter}"
                )));
            }
        }
    }

    let (q, _) = low_dim_kernel(&y);
    let final_kl = kl_divergence(&p_true, &q)?;
    if cfg.iterations == cfg.early_exaggeration_iters {
        exaggeration_kl = final_kl;
    }
    Ok(Layout2D {
        points: y,
        labels,
        final_kl,
        exaggeration_kl,
    })
}

/// One independent t-SNE run per culture over that culture's full record
/// set (all concepts pooled), each seeded from the configured seed and the
/// culture name. Returned in corpus culture order.
pub fn project_per_culture(corpus: &Corpus, cfg: &TsneConfig) -> Result<Vec<(String, Layout2D)>> {
    let mut out = Vec::new();
    for culture in corpus.cultures() {
        let records = corpus.culture_records(&culture);
        let mut vectors = Vec::with_capacity(records.len());
        let mut labels = Vec::with_capacity(records.len());
        for r in &records {
            match &r.embedding {
                Some(e) => vectors.push(e.clone()),
                None => {
                    return Err(AuditError::Integrity(format!(
                        "record ({}, {}, run {}) has no embedding",
                        r.concept, r.culture, r.run_index
                    )))
                }
            }
            labels.push(PointLabel {
                concept: r.concept.clone(),
                culture: r.culture.clone(),
                run_index: r.run_index,
            });
        }
        let culture_cfg = TsneConfig {
            seed: derive_seed(cfg.seed, &[hash_str(&culture)]),
            ..cfg.clone()
        };
        let layout = run_tsne(&vectors, labels, &culture_cfg)?;
        out.push((culture, layout));
    }
    Ok(out)
}
