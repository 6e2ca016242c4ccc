//! Finite metric spaces: an explicit point set with a dense distance matrix.
//!
//! Every computation in this crate happens on a finite ground space, so the
//! space is stored as labels plus a full `n x n` matrix of pairwise
//! distances. Construction always checks the metric axioms (zero diagonal,
//! symmetry, strict positivity off the diagonal, triangle inequality);
//! [`ValidationMode::Lenient`] repairs violations at floating-point noise
//! level before re-checking.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Relative tolerance used by lenient validation to absorb float noise.
pub const LENIENT_TOL: f64 = 1e-9;

/// Slack admitted on triangle checks in strict mode. Point-cloud distances
/// are computed in floating point, so an exact `<=` would reject collinear
/// configurations that are metrically fine.
const STRICT_TRIANGLE_SLACK: f64 = 32.0 * f64::EPSILON;

/// A finite metric space shared between measures via `Arc`.
pub type SharedSpace = Arc<FiniteMetricSpace>;

/// How strictly [`FiniteMetricSpace::validate`] treats metric-axiom violations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValidationMode {
    /// Any violation is an error.
    Strict,
    /// Violations below `LENIENT_TOL` (relative) are repaired: asymmetric
    /// pairs are averaged, near-zero diagonals are zeroed. The repaired
    /// matrix is then re-checked.
    Lenient,
}

/// Errors raised while constructing or validating a space.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("distance matrix is empty")]
    Empty,
    #[error("row {row} has length {len}, expected {expected}")]
    NotSquare { row: usize, len: usize, expected: usize },
    #[error("{count} labels provided for {expected} points")]
    LabelCountMismatch { count: usize, expected: usize },
    #[error("dist[{i}][{j}] = {value} is negative")]
    NegativeDistance { i: usize, j: usize, value: f64 },
    #[error("dist[{i}][{j}] = {value} is not finite")]
    NonFiniteDistance { i: usize, j: usize, value: f64 },
    #[error("nonzero diagonal: dist[{i}][{i}] = {value}")]
    NonzeroDiagonal { i: usize, value: f64 },
    #[error("asymmetric distance: dist[{i}][{j}] = {forward} but dist[{j}][{i}] = {backward}")]
    AsymmetricDistance { i: usize, j: usize, forward: f64, backward: f64 },
    #[error(
        "triangle inequality violated: dist[{i}][{j}] = {direct} > {via} = dist[{i}][{k}] + dist[{k}][{j}]"
    )]
    TriangleViolation { i: usize, j: usize, k: usize, direct: f64, via: f64 },
    #[error("points {i} and {j} are at distance zero")]
    DuplicatePoints { i: usize, j: usize },
    #[error("coordinate vector {point} has dimension {found}, expected {expected}")]
    DimensionMismatch { point: usize, found: usize, expected: usize },
    #[error("norm exponent {q} is invalid (need a finite q >= 1)")]
    InvalidNormExponent { q: f64 },
    #[error("scale factor {lambda} is not a positive finite real")]
    NonpositiveScale { lambda: f64 },
    #[error("point index {index} out of range for a space of {len} points")]
    IndexOutOfRange { index: usize, len: usize },
}

/// A validated finite metric space: point labels plus the dense distance
/// matrix, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMetricSpace {
    labels: Vec<String>,
    dist: Vec<f64>,
    n: usize,
}

impl FiniteMetricSpace {
    /// Validate a raw distance matrix and build a space from it.
    ///
    /// `labels` may be empty, in which case `p0, p1, ...` are generated.
    /// In [`ValidationMode::Lenient`], symmetry and diagonal violations
    /// below [`LENIENT_TOL`] (relative to the largest entry) are repaired
    /// and the repaired matrix re-checked; in strict mode any violation is
    /// an error. The first offending entry or triple is reported.
    pub fn validate(
        labels: Vec<String>,
        dist: Vec<Vec<f64>>,
        mode: ValidationMode,
    ) -> Result<Self, SpaceError> {
        let n = dist.len();
        if n == 0 {
            return Err(SpaceError::Empty);
        }
        for (row, r) in dist.iter().enumerate() {
            if r.len() != n {
                return Err(SpaceError::NotSquare { row, len: r.len(), expected: n });
            }
        }
        let labels = if labels.is_empty() {
            default_labels(n)
        } else if labels.len() != n {
            return Err(SpaceError::LabelCountMismatch { count: labels.len(), expected: n });
        } else {
            labels
        };

        let mut flat = Vec::with_capacity(n * n);
        for r in &dist {
            flat.extend_from_slice(r);
        }
        let scale = flat.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        let noise = LENIENT_TOL * scale.max(1e-300);

        for (idx, &v) in flat.iter().enumerate() {
            if !v.is_finite() {
                return Err(SpaceError::NonFiniteDistance { i: idx / n, j: idx % n, value: v });
            }
        }

        if mode == ValidationMode::Lenient {
            // Repair pass: zero near-zero diagonals, average near-symmetric pairs.
            for i in 0..n {
                if flat[i * n + i].abs() <= noise {
                    flat[i * n + i] = 0.0;
                }
                for j in (i + 1)..n {
                    let f = flat[i * n + j];
                    let b = flat[j * n + i];
                    if f != b && (f - b).abs() <= LENIENT_TOL * f.abs().max(b.abs()) + noise {
                        let avg = 0.5 * (f + b);
                        flat[i * n + j] = avg;
                        flat[j * n + i] = avg;
                    }
                }
                for j in 0..n {
                    let v = flat[i * n + j];
                    if v < 0.0 && v >= -noise {
                        flat[i * n + j] = 0.0;
                    }
                }
            }
        }

        let slack = match mode {
            ValidationMode::Strict => STRICT_TRIANGLE_SLACK * scale.max(1.0),
            ValidationMode::Lenient => noise,
        };
        check_metric(&flat, n, slack)?;
        Ok(Self { labels, dist: flat, n })
    }

    /// Build a space from an embedded point cloud using the l_q distance.
    ///
    /// All coordinate vectors must share one dimension and `q` must be a
    /// finite real `>= 1`. The result satisfies the metric axioms by
    /// construction; coinciding points are rejected.
    pub fn from_points(coords: &[Vec<f64>], q: f64) -> Result<Self, SpaceError> {
        let n = coords.len();
        if n == 0 {
            return Err(SpaceError::Empty);
        }
        if !(q >= 1.0) || !q.is_finite() {
            return Err(SpaceError::InvalidNormExponent { q });
        }
        let dim = coords[0].len();
        for (point, c) in coords.iter().enumerate() {
            if c.len() != dim {
                return Err(SpaceError::DimensionMismatch { point, found: c.len(), expected: dim });
            }
        }
        let mut flat = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = lq_distance(&coords[i], &coords[j], q);
                if d == 0.0 {
                    return Err(SpaceError::DuplicatePoints { i, j });
                }
                flat[i * n + j] = d;
                flat[j * n + i] = d;
            }
        }
        Ok(Self { labels: default_labels(n), dist: flat, n })
    }

    /// Multiply every distance by `lambda > 0`. Metric axioms are preserved.
    pub fn scale(&self, lambda: f64) -> Result<Self, SpaceError> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(SpaceError::NonpositiveScale { lambda });
        }
        Ok(Self {
            labels: self.labels.clone(),
            dist: self.dist.iter().map(|d| d * lambda).collect(),
            n: self.n,
        })
    }

    /// Number of points.
    pub fn len(&self) -> usize {
        self.n
    }

    /// A space always has at least one point.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Distance between points `i` and `j`.
    ///
    /// Panics if an index is out of range.
    #[inline]
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.n && j < self.n, "point index out of range");
        self.dist[i * self.n + j]
    }

    /// Label of point `i`.
    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    /// All labels in index order.
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// The distance matrix as nested rows.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.dist[i * self.n..(i + 1) * self.n].to_vec()).collect()
    }

    /// Largest pairwise distance.
    pub fn diameter(&self) -> f64 {
        self.dist.iter().fold(0.0f64, |m, &v| m.max(v))
    }

    /// Largest distance from point `i`.
    pub fn max_distance_from(&self, i: usize) -> f64 {
        assert!(i < self.n, "point index out of range");
        self.dist[i * self.n..(i + 1) * self.n].iter().fold(0.0f64, |m, &v| m.max(v))
    }

    /// Wrap in an `Arc` for sharing between measures.
    pub fn shared(self) -> SharedSpace {
        Arc::new(self)
    }
}

impl fmt::Display for FiniteMetricSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FiniteMetricSpace({} points, diameter {})", self.n, self.diameter())
    }
}

/// A distinguished base point of a space, used as the origin for tail
/// functionals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasePoint {
    index: usize,
}

impl BasePoint {
    /// A base point addressing `space.label(index)`.
    pub fn new(space: &FiniteMetricSpace, index: usize) -> Result<Self, SpaceError> {
        if index >= space.len() {
            return Err(SpaceError::IndexOutOfRange { index, len: space.len() });
        }
        Ok(Self { index })
    }

    pub fn index(&self) -> usize {
        self.index
    }
}

/// Whether two shared spaces denote the same ground space. Pointer equality
/// is the fast path; structurally equal spaces are also accepted so that
/// deserialized copies interoperate.
pub(crate) fn same_space(a: &SharedSpace, b: &SharedSpace) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

fn default_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("p{i}")).collect()
}

fn lq_distance(a: &[f64], b: &[f64], q: f64) -> f64 {
    if q == 1.0 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
    } else if q == 2.0 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    } else {
        let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs().powf(q)).sum();
        s.powf(1.0 / q)
    }
}

fn check_metric(flat: &[f64], n: usize, slack: f64) -> Result<(), SpaceError> {
    for i in 0..n {
        let d = flat[i * n + i];
        if d != 0.0 {
            return Err(SpaceError::NonzeroDiagonal { i, value: d });
        }
    }
    for i in 0..n {
        for j in 0..n {
            let v = flat[i * n + j];
            if v < 0.0 {
                return Err(SpaceError::NegativeDistance { i, j, value: v });
            }
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let f = flat[i * n + j];
            let b = flat[j * n + i];
            if f != b {
                return Err(SpaceError::AsymmetricDistance { i, j, forward: f, backward: b });
            }
            if f == 0.0 {
                return Err(SpaceError::DuplicatePoints { i, j });
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let direct = flat[i * n + j];
            for k in 0..n {
                if k == i || k == j {
                    continue;
                }
                let via = flat[i * n + k] + flat[k * n + j];
                if direct > via + slack {
                    return Err(SpaceError::TriangleViolation { i, j, k, direct, via });
                }
            }
        }
    }
    Ok(())
}
