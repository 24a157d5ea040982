//! Point clouds, empirical measures `Σ w_i δ_{x_i}`, and the measure
//! projection `Π[μ] = δ_{μ̄}` onto Dirac masses.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::linalg;
use crate::math;

/// Tolerance on `Σ w_i = 1` below which weights are silently renormalized.
pub const WEIGHT_TOLERANCE: f64 = 1e-12;

/// An ordered list of `N ≥ 1` finite points in `R^d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    data: Vec<f64>,
}

impl PointCloud {
    /// Builds a cloud from a flat row-major buffer of `N * dim` coordinates.
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be at least 1"));
        }
        if data.is_empty() {
            return Err(Error::EmptySupport);
        }
        if data.len() % dim != 0 {
            return Err(Error::DimMismatch {
                expected: dim,
                found: data.len() % dim,
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("point cloud"));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptySupport)?;
        let dim = first.len();
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(dim, data)
    }

    pub fn single(point: &[f64]) -> Result<Self> {
        Self::new(point.len(), point.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    /// Always false: a cloud has at least one point.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> core::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.points().map(|p| p.to_vec()).collect()
    }

    /// Applies `f` to each point, producing a cloud of dimension `out_dim`.
    pub fn map_points<F>(&self, out_dim: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(&[f64]) -> Result<Vec<f64>>,
    {
        let mut data = Vec::with_capacity(self.len() * out_dim);
        for p in self.points() {
            let q = f(p)?;
            if q.len() != out_dim {
                return Err(Error::DimMismatch {
                    expected: out_dim,
                    found: q.len(),
                });
            }
            data.extend_from_slice(&q);
        }
        Self::new(out_dim, data)
    }

    /// Reorders points so that output point `i` is input point `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for &i in perm {
            data.extend_from_slice(self.point(i));
        }
        Self {
            dim: self.dim,
            data,
        }
    }

    /// Adds `c` to every point.
    pub fn translated(&self, c: &[f64]) -> Result<Self> {
        check_dim(self.dim, c.len())?;
        let data = self
            .data
            .chunks_exact(self.dim)
            .flat_map(|p| p.iter().zip(c).map(|(a, b)| a + b))
            .collect();
        Self::new(self.dim, data)
    }

    /// Pointwise sum of two clouds of identical shape.
    pub fn add(&self, other: &PointCloud) -> Result<Self> {
        self.check_same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Self::new(self.dim, data)
    }

    /// Pointwise difference `self - other`.
    pub fn sub(&self, other: &PointCloud) -> Result<Self> {
        self.check_same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Self::new(self.dim, data)
    }

    /// Largest per-point ℓ1 distance to `other` (same shape required).
    pub fn sup_l1_distance(&self, other: &PointCloud) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(linalg::sup_l1(&self.data, &other.data, self.dim))
    }

    /// Largest absolute coordinate difference to `other`.
    pub fn max_abs_diff(&self, other: &PointCloud) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| math::abs(a - b))
            .fold(0.0, f64::max))
    }

    pub(crate) fn check_same_shape(&self, other: &PointCloud) -> Result<()> {
        check_dim(self.dim, other.dim)?;
        if self.len() != other.len() {
            return Err(Error::SizeMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        Ok(())
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        Err(Error::DimMismatch { expected, found })
    } else {
        Ok(())
    }
}

/// A finitely supported probability measure `Σ w_i δ_{x_i}`.
///
/// Repeated support points are kept as separate atoms; nothing is merged.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    support: PointCloud,
    weights: Vec<f64>,
}

impl EmpiricalMeasure {
    /// Weights must be nonnegative and sum to 1 within [`WEIGHT_TOLERANCE`];
    /// they are renormalized exactly when inside that tolerance.
    pub fn new(support: PointCloud, mut weights: Vec<f64>) -> Result<Self> {
        if weights.len() != support.len() {
            return Err(Error::WeightCount {
                weights: weights.len(),
                support: support.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("weights"));
        }
        if let Some(&w) = weights.iter().find(|&&w| w < 0.0) {
            return Err(Error::NegativeWeight(w));
        }
        let total: f64 = weights.iter().sum();
        if math::abs(total - 1.0) > WEIGHT_TOLERANCE {
            return Err(Error::WeightsNotNormalized(total));
        }
        if total != 1.0 {
            weights.iter_mut().for_each(|w| *w /= total);
        }
        Ok(Self { support, weights })
    }

    /// Like [`EmpiricalMeasure::new`] but for weights the caller has already
    /// normalized by construction (softmax outputs, products of weights).
    pub(crate) fn from_normalized(support: PointCloud, weights: Vec<f64>) -> Self {
        debug_assert_eq!(support.len(), weights.len());
        Self { support, weights }
    }

    /// The uniform measure `m(X) = (1/N) Σ δ_{x_i}`.
    pub fn uniform(support: PointCloud) -> Self {
        let n = support.len();
        Self {
            support,
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn dirac(point: &[f64]) -> Result<Self> {
        Ok(Self {
            support: PointCloud::single(point)?,
            weights: vec![1.0],
        })
    }

    pub fn support(&self) -> &PointCloud {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.support.dim()
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.support.points().zip(self.weights.iter().copied())
    }

    /// True when every weight equals `1/N` exactly.
    pub fn is_uniform(&self) -> bool {
        let w = 1.0 / self.len() as f64;
        self.weights.iter().all(|&v| v == w)
    }

    pub fn into_parts(self) -> (PointCloud, Vec<f64>) {
        (self.support, self.weights)
    }

    /// Same weights, new support (pushforward through a point map).
    pub(crate) fn with_support(&self, support: PointCloud) -> Self {
        debug_assert_eq!(support.len(), self.weights.len());
        Self {
            support,
            weights: self.weights.clone(),
        }
    }

    /// Atom indices in canonical order: lexicographic on coordinates, then
    /// on weight. Sums taken in this order do not depend on atom order.
    pub(crate) fn canonical_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| {
            lex_cmp(self.support.point(a), self.support.point(b))
                .then_with(|| self.weights[a].total_cmp(&self.weights[b]))
        });
        idx
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

/// `m(X)`: the uniform empirical measure on the points of `X`.
pub fn empirical(points: PointCloud) -> EmpiricalMeasure {
    EmpiricalMeasure::uniform(points)
}

/// `μ̄ = Σ w_i x_i`, summed in canonical atom order as `x_0 + Σ w_i (x_i - x_0)`
/// with `x_0` the canonically first atom, so a measure whose atoms coincide
/// has its barycenter exactly at that point.
pub fn barycenter(mu: &EmpiricalMeasure) -> Vec<f64> {
    let order = mu.canonical_order();
    let base = mu.support.point(order[0]);
    let mut acc = vec![0.0; mu.dim()];
    for &i in &order {
        let w = mu.weights[i];
        for ((a, x), b) in acc.iter_mut().zip(mu.support.point(i)).zip(base) {
            *a += w * (x - b);
        }
    }
    acc.iter().zip(base).map(|(a, b)| b + a).collect()
}

/// `Π[μ] = δ_{μ̄}`.
pub fn project_dirac(mu: &EmpiricalMeasure) -> EmpiricalMeasure {
    let bar = barycenter(mu);
    EmpiricalMeasure {
        support: PointCloud {
            dim: mu.dim(),
            data: bar,
        },
        weights: vec![1.0],
    }
}

/// The domain `E`: an axis-aligned box (compact and convex) or all of `R^d`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum DomainBox {
    Bounded { lower: Vec<f64>, upper: Vec<f64> },
    Unbounded,
}

impl DomainBox {
    pub fn bounded(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_dim(lower.len(), upper.len())?;
        if lower.is_empty() {
            return Err(Error::InvalidInput("box dimension must be at least 1"));
        }
        if lower.iter().chain(&upper).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("box bounds"));
        }
        if let Some(axis) = lower.iter().zip(&upper).position(|(l, u)| l > u) {
            return Err(Error::InvalidBox(axis));
        }
        Ok(DomainBox::Bounded { lower, upper })
    }

    /// The cube `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::bounded(vec![lo; dim], vec![hi; dim])
    }

    /// Smallest box containing every point of every cloud.
    pub fn bounding(clouds: &[&PointCloud]) -> Result<Self> {
        let first = clouds.first().ok_or(Error::EmptySupport)?;
        let d = first.dim();
        let mut lower = vec![f64::INFINITY; d];
        let mut upper = vec![f64::NEG_INFINITY; d];
        for cloud in clouds {
            check_dim(d, cloud.dim())?;
            for p in cloud.points() {
                for k in 0..d {
                    lower[k] = lower[k].min(p[k]);
                    upper[k] = upper[k].max(p[k]);
                }
            }
        }
        Self::bounded(lower, upper)
    }

    pub fn is_bounded(&self) -> bool {
        matches!(self, DomainBox::Bounded { .. })
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            DomainBox::Bounded { lower, .. } => Some(lower.len()),
            DomainBox::Unbounded => None,
        }
    }

    pub fn bounds(&self) -> Option<(&[f64], &[f64])> {
        match self {
            DomainBox::Bounded { lower, upper } => Some((lower, upper)),
            DomainBox::Unbounded => None,
        }
    }

    /// Membership with an absolute slack `tol` per coordinate.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        match self {
            DomainBox::Bounded { lower, upper } => {
                x.len() == lower.len()
                    && x
                        .iter()
                        .zip(lower.iter().zip(upper))
                        .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol)
            }
            DomainBox::Unbounded => true,
        }
    }

    pub fn contains_cloud(&self, cloud: &PointCloud, tol: f64) -> bool {
        cloud.points().all(|p| self.contains(p, tol))
    }

    /// ℓ1 diameter `Σ_k (upper_k - lower_k)`; `None` when unbounded.
    pub fn l1_diameter(&self) -> Option<f64> {
        self.bounds()
            .map(|(l, u)| l.iter().zip(u).map(|(a, b)| b - a).sum())
    }

    /// ℓ2 diameter (the main diagonal).
    pub fn l2_diameter(&self) -> Option<f64> {
        self.bounds().map(|(l, u)| linalg::l2_distance(l, u))
    }

    /// ℓ∞ diameter (longest side).
    pub fn linf_diameter(&self) -> Option<f64> {
        self.bounds()
            .map(|(l, u)| l.iter().zip(u).map(|(a, b)| b - a).fold(0.0, f64::max))
    }

    /// Nearest point of the box (identity when unbounded).
    pub fn clamp(&self, x: &mut [f64]) {
        if let DomainBox::Bounded { lower, upper } = self {
            for (v, (l, u)) in x.iter_mut().zip(lower.iter().zip(upper)) {
                *v = v.clamp(*l, *u);
            }
        }
    }

    /// Same box, scaled about its centre by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        match self {
            DomainBox::Bounded { lower, upper } => {
                let (mut lo, mut hi) = (Vec::new(), Vec::new());
                for (l, u) in lower.iter().zip(upper) {
                    let c = 0.5 * (l + u);
                    let h = 0.5 * (u - l) * factor;
                    lo.push(c - h);
                    hi.push(c + h);
                }
                Self::bounded(lo, hi)
            }
            DomainBox::Unbounded => Ok(DomainBox::Unbounded),
        }
    }
}

/// ℓ1 ↔ ℓ2 conversion: `‖x‖₂ ≤ ‖x‖₁ ≤ √d ‖x‖₂`.
pub fn l1_to_l2_factor(dim: usize) -> f64 {
    math::sqrt(dim as f64)
}
