//! Analysis III: the cultural-defaultism randomization test.
//!
//! For each concept, the test asks whether the culture-unspecified
//! (default) cluster sits closer to the reference culture's cluster than to
//! a comparison culture's cluster. The null — the default condition is
//! equidistant from both cultural conditions — is simulated by relabeling
//! members between the two culture clusters while holding the default
//! cluster fixed. Two one-sided add-one p-values are reported.
//!
//! Draws are keyed by (seed, draw index), so parallel and serial execution
//! give identical p-values, and the two clusters are put into a canonical
//! internal order before drawing, so swapping the arguments swaps the two
//! p-values exactly.

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{AuditError, Result};
use crate::geometry::{centroid, cosine_distance, pairwise_sum_with, EmbeddingVector};
use crate::rng::{derive_seed, hash_str, Rng};

pub const DEFAULT_PERMUTATIONS: usize = 100_000;
pub const DEFAULT_ALPHA_LEVELS: [f64; 3] = [0.05, 0.01, 0.001];

/// Randomization-test parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestConfig {
    pub permutations: usize,
    pub seed: u64,
    /// Strictly decreasing significance thresholds (star levels).
    pub alpha_levels: [f64; 3],
    /// Bonferroni-adjust p-values across the table's cells. Off by default;
    /// the reference results report raw per-cell significance.
    pub bonferroni: bool,
    /// Name of the reference culture the default condition is compared
    /// against (the "closer to" side of the arrows).
    pub reference_culture: String,
    /// Name of the culture-unspecified condition.
    pub default_condition: String,
}

impl Default for TestConfig {
    fn default() -> Self {
        TestConfig {
            permutations: DEFAULT_PERMUTATIONS,
            seed: 0,
            alpha_levels: DEFAULT_ALPHA_LEVELS,
            bonferroni: false,
            reference_culture: "U.S.".into(),
            default_condition: "Default".into(),
        }
    }
}

impl TestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.permutations == 0 {
            return Err(AuditError::Config("permutations must be positive".into()));
        }
        let a = &self.alpha_levels;
        if !(a[0] > a[1] && a[1] > a[2] && a[2] > 0.0 && a[0] < 1.0) {
            return Err(AuditError::Config(format!(
                "alpha levels must be strictly decreasing in (0, 1), got {a:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
    None,
}

impl Direction {
    pub fn glyph(&self) -> &'static str {
        match self {
            Direction::Up => "\u{2191}",
            Direction::Down => "\u{2193}",
            Direction::None => "\u{2013}",
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::Up => "up",
            Direction::Down => "down",
            Direction::None => "none",
        }
    }
}

/// Result of one randomization test, before it is pinned to a grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    /// d(centroid(default), centroid(reference)) - d(centroid(default), centroid(culture)).
    pub delta_observed: f64,
    /// One-sided p for "default is closer to the reference culture".
    pub p_closer_us: f64,
    /// One-sided p for "default is closer to the comparison culture".
    pub p_closer_culture: f64,
    pub direction: Direction,
    pub stars: String,
    pub permutations: usize,
    pub seed: u64,
    /// Permutations redrawn because a relabeled cluster had a degenerate
    /// centroid; worth a warning when above 1% of draws.
    pub degenerate_redraws: usize,
}

/// One cell of the defaultism table: a test outcome at its
/// (concept, comparison-culture) coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefaultismOutcome {
    pub concept: String,
    pub culture: String,
    #[serde(flatten)]
    pub outcome: TestOutcome,
}

/// Star string for a p-value at the configured thresholds (strict
/// inequalities: p = 0.05 earns no star).
pub fn stars_for(p: f64, cfg: &TestConfig) -> &'static str {
    let a = &cfg.alpha_levels;
    if p < a[2] {
        "***"
    } else if p < a[1] {
        "**"
    } else if p < a[0] {
        "*"
    } else {
        ""
    }
}

/// d(centroid(default), centroid(a)) - d(centroid(default), centroid(b)).
/// Negative means the default cluster is closer to `a`.
pub fn centroid_gap(
    default_cluster: &[EmbeddingVector],
    cluster_a: &[EmbeddingVector],
    cluster_b: &[EmbeddingVector],
) -> Result<f64> {
    let c_default = centroid(default_cluster)?;
    let c_a = centroid(cluster_a)?;
    let c_b = centroid(cluster_b)?;
    Ok(cosine_distance(&c_default, &c_a)? - cosine_distance(&c_default, &c_b)?)
}

fn check_cluster(name: &str, cluster: &[EmbeddingVector], dim: usize) -> Result<()> {
    if cluster.len() < 2 {
        return Err(AuditError::Argument(format!(
            "{name} cluster needs >= 2 vectors, got {}",
            cluster.len()
        )));
    }
    for v in cluster {
        if v.dim() != dim {
            return Err(AuditError::DimensionMismatch {
                expected: dim,
                got: v.dim(),
                context: Some(format!("{name} cluster")),
            });
        }
    }
    Ok(())
}

fn sorted_cluster(cluster: &[EmbeddingVector]) -> Vec<&EmbeddingVector> {
    let mut refs: Vec<&EmbeddingVector> = cluster.iter().collect();
    refs.sort_by(|a, b| {
        a.values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    refs
}

/// Lexicographic comparison of two clusters as sorted vector lists; decides
/// the canonical internal order of the two culture clusters.
fn cluster_is_first(a: &[EmbeddingVector], b: &[EmbeddingVector]) -> bool {
    let sa = sorted_cluster(a);
    let sb = sorted_cluster(b);
    for (va, vb) in sa.iter().zip(&sb) {
        for (x, y) in va.values().iter().zip(vb.values()) {
            match x.total_cmp(y) {
                std::cmp::Ordering::Less => return true,
                std::cmp::Ordering::Greater => return false,
                std::cmp::Ordering::Equal => {}
            }
        }
    }
    sa.len() <= sb.len()
}

const MAX_REDRAWS_PER_DRAW: usize = 1_000;

struct PermutationEngine {
    /// Pooled vectors in canonical order: first cluster's sorted members,
    /// then the second's.
    pool: Vec<Vec<f64>>,
    total: Vec<f64>,
    first_size: usize,
    dim: usize,
    default_centroid: EmbeddingVector,
}

impl PermutationEngine {
    fn new(
        default_centroid: EmbeddingVector,
        lo: &[EmbeddingVector],
        hi: &[EmbeddingVector],
    ) -> Self {
        let dim = default_centroid.dim();
        let pool: Vec<Vec<f64>> = sorted_cluster(lo)
            .into_iter()
            .chain(sorted_cluster(hi))
            .map(|v| v.values().to_vec())
            .collect();
        let total: Vec<f64> = (0..dim)
            .map(|c| pairwise_sum_with(pool.len(), &mut |i| pool[i][c]))
            .collect();
        PermutationEngine {
            pool,
            total,
            first_size: lo.len(),
            dim,
            default_centroid,
        }
    }

    /// Gap statistic for one relabeling, or None if a relabeled side has a
    /// degenerate centroid.
    fn gap_for(&self, subset: &[usize]) -> Option<f64> {
        let n = self.pool.len();
        let k = subset.len();
        let mut dot_lo = 0.0;
        let mut norm_lo = 0.0;
        let mut dot_hi = 0.0;
        let mut norm_hi = 0.0;
        let def = self.default_centroid.values();
        let def_norm = self.default_centroid.norm();
        for (c, def_c) in def.iter().enumerate().take(self.dim) {
            let sum_lo = pairwise_sum_with(k, &mut |i| self.pool[subset[i]][c]);
            let mean_lo = sum_lo / k as f64;
            let mean_hi = (self.total[c] - sum_lo) / (n - k) as f64;
            dot_lo += mean_lo * def_c;
            norm_lo += mean_lo * mean_lo;
            dot_hi += mean_hi * def_c;
            norm_hi += mean_hi * mean_hi;
        }
        if norm_lo == 0.0 || norm_hi == 0.0 {
            return None;
        }
        let d_lo = 1.0 - dot_lo / (norm_lo.sqrt() * def_norm);
        let d_hi = 1.0 - dot_hi / (norm_hi.sqrt() * def_norm);
        Some(d_lo - d_hi)
    }

    /// Deterministic draw d: a uniformly random size-k subset of the pool,
    /// redrawn (within the draw's own stream) on degeneracy.
    fn draw_gap(&self, seed: u64, draw_index: u64, redraws: &mut usize) -> Result<f64> {
        let n = self.pool.len();
        let k = self.first_size;
        let mut rng = Rng::for_counter(seed, draw_index);
        let mut indices: Vec<usize> = (0..n).collect();
        for attempt in 0..MAX_REDRAWS_PER_DRAW {
            // Partial Fisher-Yates: first k entries form the subset.
            for i in 0..k {
                let j = i + rng.next_below((n - i) as u64) as usize;
                indices.swap(i, j);
            }
            let mut subset: Vec<usize> = indices[..k].to_vec();
            subset.sort_unstable();
            if let Some(gap) = self.gap_for(&subset) {
                if attempt > 0 {
                    *redraws += attempt;
                }
                return Ok(gap);
            }
        }
        Err(AuditError::DegenerateCluster {
            context: Some(format!(
                "permutation draw {draw_index} degenerate {MAX_REDRAWS_PER_DRAW} times"
            )),
        })
    }
}

/// One-sided Fisher randomization test of cultural defaultism for a single
/// (default, reference, comparison) cluster triple.
pub fn randomization_test(
    default_cluster: &[EmbeddingVector],
    us_cluster: &[EmbeddingVector],
    culture_cluster: &[EmbeddingVector],
    cfg: &TestConfig,
) -> Result<TestOutcome> {
    cfg.validate()?;
    if default_cluster.is_empty() {
        return Err(AuditError::Argument("default cluster is empty".into()));
    }
    let dim = default_cluster[0].dim();
    check_cluster("default", default_cluster, dim)?;
    check_cluster("reference-culture", us_cluster, dim)?;
    check_cluster("comparison-culture", culture_cluster, dim)?;

    let observed = centroid_gap(default_cluster, us_cluster, culture_cluster)?;
    let default_centroid = centroid(default_cluster)?;

    // Canonical internal order makes the draw set independent of which
    // argument came first, so swapping arguments swaps p-values exactly.
    let flip = !cluster_is_first(us_cluster, culture_cluster);
    let engine = if flip {
        PermutationEngine::new(default_centroid, culture_cluster, us_cluster)
    } else {
        PermutationEngine::new(default_centroid, us_cluster, culture_cluster)
    };

    // The counting threshold is the observed labeling's gap computed through
    // the same arithmetic path as the draws, so the identity relabeling ties
    // with itself exactly.
    let identity: Vec<usize> = (0..engine.first_size).collect();
    let raw_observed = engine.gap_for(&identity).ok_or_else(|| {
        AuditError::InternalConsistency("observed labeling has a degenerate centroid".into())
    })?;
    let threshold = if flip { -raw_observed } else { raw_observed };

    let mut count_le = 0usize;
    let mut count_ge = 0usize;
    let mut redraws = 0usize;
    for d in 0..cfg.permutations {
        let raw = engine.draw_gap(cfg.seed, d as u64, &mut redraws)?;
        let gap = if flip { -raw } else { raw };
        if gap <= threshold {
            count_le += 1;
        }
        if gap >= threshold {
            count_ge += 1;
        }
    }

    let r = cfg.permutations as f64;
    let p_closer_us = (1.0 + count_le as f64) / (1.0 + r);
    let p_closer_culture = (1.0 + count_ge as f64) / (1.0 + r);
    Ok(finish_outcome(
        observed,
        p_closer_us,
        p_closer_culture,
        cfg,
        1,
        redraws,
    ))
}

fn finish_outcome(
    delta_observed: f64,
    mut p_up: f64,
    mut p_down: f64,
    cfg: &TestConfig,
    comparisons: usize,
    degenerate_redraws: usize,
) -> TestOutcome {
    if cfg.bonferroni && comparisons > 1 {
        p_up = (p_up * comparisons as f64).min(1.0);
        p_down = (p_down * comparisons as f64).min(1.0);
    }
    let alpha = cfg.alpha_levels[0];
    let up = p_up < alpha;
    let down = p_down < alpha;
    debug_assert!(
        !(up && down),
        "add-one one-sided p-values cannot both cross alpha"
    );
    let (direction, stars) = if up {
        (Direction::Up, stars_for(p_up, cfg).to_string())
    } else if down {
        (Direction::Down, stars_for(p_down, cfg).to_string())
    } else {
        (Direction::None, String::new())
    };
    TestOutcome {
        delta_observed,
        p_closer_us: p_up,
        p_closer_culture: p_down,
        direction,
        stars,
        permutations: cfg.permutations,
        seed: cfg.seed,
        degenerate_redraws,
    }
}

/// Run the full defaultism table: one outcome per (concept, comparison
/// culture), with per-outcome seeds derived from the configured seed and
/// the cell coordinates.
pub fn defaultism_table(corpus: &Corpus, cfg: &TestConfig) -> Result<Vec<DefaultismOutcome>> {
    cfg.validate()?;
    let concepts = corpus.concepts();
    let cultures = corpus.cultures();
    if !cultures.iter().any(|c| c == &cfg.default_condition) {
        return Err(AuditError::Config(format!(
            "corpus has no default condition named '{}'",
            cfg.default_condition
        )));
    }
    if !cultures.iter().any(|c| c == &cfg.reference_culture) {
        return Err(AuditError::Config(format!(
            "corpus has no reference culture named '{}'",
            cfg.reference_culture
        )));
    }
    if cfg.reference_culture == cfg.default_condition {
        return Err(AuditError::Config(
            "reference culture cannot be the default condition".into(),
        ));
    }
    let comparisons: Vec<&String> = cultures
        .iter()
        .filter(|c| **c != cfg.default_condition && **c != cfg.reference_culture)
        .collect();
    if comparisons.is_empty() {
        return Err(AuditError::Config(
            "defaultism test needs at least one non-reference comparison culture".into(),
        ));
    }

    let total_cells = concepts.len() * comparisons.len();
    let mut outcomes = Vec::with_capacity(total_cells);
    for concept in &concepts {
        let default_cluster = corpus.cell_embeddings(concept, &cfg.default_condition)?;
        let us_cluster = corpus.cell_embeddings(concept, &cfg.reference_culture)?;
        for culture in &comparisons {
            let culture_cluster = corpus.cell_embeddings(concept, culture)?;
            let cell_cfg = TestConfig {
                seed: derive_seed(cfg.seed, &[hash_str(concept), hash_str(culture)]),
                ..cfg.clone()
            };
            // The single-cell test never adjusts (comparisons = 1); the
            // table-level correction is applied afterwards over all cells.
            let mut outcome =
                randomization_test(&default_cluster, &us_cluster, &culture_cluster, &cell_cfg)?;
            if cfg.bonferroni {
                outcome = finish_outcome(
                    outcome.delta_observed,
                    outcome.p_closer_us,
                    outcome.p_closer_culture,
                    &cell_cfg,
                    total_cells,
                    outcome.degenerate_redraws,
                );
            }
            outcomes.push(DefaultismOutcome {
                concept: concept.clone(),
                culture: (*culture).clone(),
                outcome,
            });
        }
    }
    Ok(outcomes)
}

/// CSV emitter for the defaultism table (full precision).
pub fn defaultism_csv(outcomes: &[DefaultismOutcome]) -> String {
    let mut out =
        String::from("concept,culture,delta,p_up,p_down,direction,stars,permutations,seed\n");
    for o in outcomes {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            crate::diversity::csv_field(&o.concept),
            crate::diversity::csv_field(&o.culture),
            o.outcome.delta_observed,
            o.outcome.p_closer_us,
            o.outcome.p_closer_culture,
            o.outcome.direction.as_str(),
            o.outcome.stars,
            o.outcome.permutations,
            o.outcome.seed,
        ));
    }
    out
}
