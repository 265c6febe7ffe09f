//! High-dimensional affinities: per-row Gaussian kernels calibrated by
//! binary search so every row's conditional distribution hits the target
//! perplexity, then symmetrized into a joint probability matrix.

use crate::error::{AuditError, Result};
use crate::geometry::DistanceMatrix;

/// Dense square matrix; used for the affinity matrix P and the
/// low-dimensional kernel Q.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        SquareMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn sum(&self) -> f64 {
        crate::geometry::pairwise_sum(&self.data)
    }
}

pub const PERPLEXITY_TOLERANCE: f64 = 1e-5;
pub const MAX_BISECTION_STEPS: usize = 200;

/// Conditional distribution and perplexity of row `i` at precision `beta`
/// (p_j proportional to exp(-beta * d_ij), j != i).
fn row_conditional(distances: &[f64], i: usize, beta: f64, out: &mut [f64]) -> f64 {
    let n = distances.len();
    // Shift by the row minimum so large beta cannot underflow every term.
    let mut min_d = f64::INFINITY;
    for (j, d) in distances.iter().enumerate() {
        if j != i && *d < min_d {
            min_d = *d;
        }
    }
    let mut sum = 0.0;
    for j in 0..n {
        if j == i {
            out[j] = 0.0;
            continue;
        }
        let w = (-beta * (distances[j] - min_d)).exp();
        out[j] = w;
        sum += w;
    }
    let mut entropy = 0.0;
    for (j, p) in out.iter_mut().enumerate() {
        if j == i {
            continue;
        }
        *p /= sum;
        if *p > 0.0 {
            entropy -= *p * p.ln();
        }
    }
    entropy.exp()
}

/// Per-row conditional affinities P(j|i): each row's bandwidth is found by
/// binary search so the row's perplexity is within 1e-5 of target. Rows
/// whose off-diagonal distances are all (numerically) equal carry no
/// perplexity information and fall back to the uniform conditional they
/// would have at any bandwidth.
pub fn conditional_affinities(d: &DistanceMatrix, perplexity: f64) -> Result<SquareMatrix> {
    conditional_from_raw(d.n(), &mut |i| d.row(i).to_vec(), perplexity)
}

/// Joint affinity matrix for t-SNE: P = (P_cond + P_cond^T) / (2n).
pub fn affinity_matrix(d: &DistanceMatrix, perplexity: f64) -> Result<SquareMatrix> {
    Ok(symmetrize(&conditional_affinities(d, perplexity)?))
}

pub(crate) fn symmetrize(conditional: &SquareMatrix) -> SquareMatrix {
    let n = conditional.n();
    let mut joint = SquareMatrix::zeros(n);
    let scale = 1.0 / (2.0 * n as f64);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            joint.set(i, j, (conditional.get(i, j) + conditional.get(j, i)) * scale);
        }
    }
    joint
}

pub(crate) fn conditional_from_raw(
    n: usize,
    rows: &mut dyn FnMut(usize) -> Vec<f64>,
    perplexity: f64,
) -> Result<SquareMatrix> {
    if n < 4 {
        return Err(AuditError::Argument(format!(
            "affinity matrix needs at least 4 points, got {n}"
        )));
    }
    if !(perplexity > 1.0 && perplexity <= (n - 1) as f64) {
        return Err(AuditError::Argument(format!(
            "perplexity {perplexity} infeasible for {n} points (must be in (1, {}])",
            n - 1
        )));
    }

    let mut conditional = SquareMatrix::zeros(n);
    let mut row_buf = vec![0.0; n];
    for i in 0..n {
        let distances = rows(i);
        if distances.len() != n {
            return Err(AuditError::DimensionMismatch {
                expected: n,
                got: distances.len(),
                context: Some(format!("distance row {i}")),
            });
        }

        // Degenerate row: every off-diagonal distance equal, so the
        // conditional is uniform at any bandwidth.
        let (mut lo_d, mut hi_d) = (f64::INFINITY, f64::NEG_INFINITY);
        for (j, v) in distances.iter().enumerate() {
            if j != i {
                lo_d = lo_d.min(*v);
                hi_d = hi_d.max(*v);
            }
        }
        if hi_d - lo_d <= 1e-12 * hi_d.abs().max(1.0) {
            let uniform = 1.0 / (n - 1) as f64;
            for j in 0..n {
                conditional.set(i, j, if j == i { 0.0 } else { uniform });
            }
            continue;
        }

        let mut beta = 1.0;
        let mut beta_lo = 0.0_f64;
        let mut beta_hi = f64::INFINITY;
        let mut converged = false;
        for _ in 0..MAX_BISECTION_STEPS {
            let perp = row_conditional(&distances, i, beta, &mut row_buf);
            if (perp - perplexity).abs() <= PERPLEXITY_TOLERANCE {
                converged = true;
                break;
            }
            if perp > perplexity {
                // Too flat: raise beta (narrow the kernel).
                beta_lo = beta;
                beta = if beta_hi.is_finite() {
                    (beta + beta_hi) / 2.0
                } else {
                    beta * 2.0
                };
            } else {
                beta_hi = beta;
                beta = (beta + beta_lo) / 2.0;
            }
        }
        if !converged {
            return Err(AuditError::BisectionNonConvergence {
                row: i,
                target: perplexity,
            });
        }
        for (j, v) in row_buf.iter().enumerate() {
            conditional.set(i, j, *v);
        }
    }
    Ok(conditional)
}

/// Perplexity (exp of Shannon entropy in nats) of one conditional row.
pub fn row_perplexity(conditional: &SquareMatrix, i: usize) -> f64 {
    let n = conditional.n();
    let mut h = 0.0;
    for j in 0..n {
        let p = conditional.get(i, j);
        if j != i && p > 0.0 {
            h -= p * p.ln();
        }
    }
    h.exp()
}

/// The row perplexity farthest from `target`; a calibration self-check.
pub fn worst_row_perplexity(conditional: &SquareMatrix, target: f64) -> f64 {
    (0..conditional.n())
        .map(|i| row_perplexity(conditional, i))
        .max_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()))
        .unwrap_or(target)
}

/// KL divergence sum(p * ln(p / q)) over off-diagonal entries with p > 0;
/// q is floored at 1e-12.
pub fn kl_divergence(p: &SquareMatrix, q: &SquareMatrix) -> Result<f64> {
    if p.n() != q.n() {
        return Err(AuditError::DimensionMismatch {
            expected: p.n(),
            got: q.n(),
            context: Some("KL divergence operands".into()),
        });
    }
    let n = p.n();
    let mut terms = Vec::with_capacity(n * (n - 1));
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let pij = p.get(i, j);
            if pij > 0.0 {
                let qij = q.get(i, j).max(1e-12);
                terms.push(pij * (pij / qij).ln());
            }
        }
    }
    Ok(crate::geometry::pairwise_sum(&terms))
}
