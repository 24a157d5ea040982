//! Interaction potentials `G(x, y) = exp(a(x, y))` and their regularity
//! constants on a domain `E`.
//!
//! All Lipschitz seminorms are taken with respect to the ℓ1 ground metric. For
//! a differentiable `G` on a convex domain the ℓ1 seminorm of `G(·, y)` is
//! `sup ‖∇_x G‖_∞`, which is what the analytic routes below bound.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::math;
use crate::measures::{check_dim, DomainBox, PointCloud};
use crate::rng::{self, StreamRng};

/// Largest similarity whose exponential is finite in f64.
pub const MAX_SIMILARITY: f64 = 709.0;

/// `max_{t ≥ 0} 2t exp(-t²) = √(2/e)`: the ℓ2 gradient bound of the Gaussian
/// potential in one argument, also valid for the ℓ1 metric since `‖·‖₂ ≤ ‖·‖₁`.
pub const GAUSSIAN_LIP: f64 = 0.8577638849607068;

/// Corner enumeration is exact up to this dimension; above it the bilinear
/// extrema fall back to interval bounds.
const MAX_CORNER_DIM: usize = 16;

pub type SimilarityFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// A user-supplied similarity `a(x, y)`.
#[derive(Clone)]
pub struct Similarity {
    name: String,
    f: SimilarityFn,
}

impl Similarity {
    pub fn new(name: impl Into<String>, f: SimilarityFn) -> Self {
        Self {
            name: name.into(),
            f,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl fmt::Debug for Similarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Similarity").field(&self.name).finish()
    }
}

#[derive(Debug, Clone)]
pub enum PotentialKind {
    /// `a(x, y) = scale · xᵀy`.
    DotProduct { scale: f64 },
    /// `a(x, y) = scale · (W_Q x)ᵀ(W_K y)` with `W_Q, W_K` of shape `d' × d`.
    ScaledDotProduct { w_q: Matrix, w_k: Matrix, scale: f64 },
    /// `G(x, y) = exp(-‖x - y‖₂²)`.
    Gaussian,
    Custom(Similarity),
}

#[derive(Debug, Clone)]
pub struct Potential {
    kind: PotentialKind,
    dim: usize,
}

impl Potential {
    pub fn gaussian(dim: usize) -> Self {
        Self {
            kind: PotentialKind::Gaussian,
            dim,
        }
    }

    pub fn dot_product(dim: usize, scale: f64) -> Self {
        Self {
            kind: PotentialKind::DotProduct { scale },
            dim,
        }
    }

    /// The Transformer potential. `scale` is usually `1/√d'`.
    pub fn scaled_dot_product(w_q: Matrix, w_k: Matrix, scale: f64) -> Result<Self> {
        if w_q.rows() != w_k.rows() || w_q.cols() != w_k.cols() {
            return Err(Error::ShapeMismatch {
                rows: w_k.rows(),
                cols: w_k.cols(),
                input: w_q.cols(),
            });
        }
        if !scale.is_finite() {
            return Err(Error::NonFinite("potential scale"));
        }
        let dim = w_q.cols();
        Ok(Self {
            kind: PotentialKind::ScaledDotProduct { w_q, w_k, scale },
            dim,
        })
    }

    pub fn custom(dim: usize, similarity: Similarity) -> Self {
        Self {
            kind: PotentialKind::Custom(similarity),
            dim,
        }
    }

    /// `a ≡ 0`, so `G ≡ 1` and softmatch returns the input weights.
    pub fn constant(dim: usize) -> Self {
        Self::custom(dim, Similarity::new("constant", Arc::new(|_, _| 0.0)))
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self.kind, PotentialKind::Gaussian)
    }

    /// The similarity `a(x, y) = ln G(x, y)`.
    pub fn similarity(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        check_dim(self.dim, y.len())?;
        let a = self.similarity_unchecked(x, y);
        if a.is_nan() {
            return Err(Error::InvalidInput("similarity evaluated to NaN"));
        }
        Ok(a)
    }

    pub(crate) fn similarity_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match &self.kind {
            PotentialKind::DotProduct { scale } => scale * linalg::dot(x, y),
            PotentialKind::ScaledDotProduct { w_q, w_k, scale } => {
                let qx = w_q.apply(x).expect("checked dimension");
                let ky = w_k.apply(y).expect("checked dimension");
                scale * linalg::dot(&qx, &ky)
            }
            PotentialKind::Gaussian => -linalg::squared_l2_distance(x, y),
            PotentialKind::Custom(s) => (s.f)(x, y),
        }
    }

    /// `G(x, y)`; errors rather than returning `inf` when `a > 709`.
    pub fn evaluate(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let a = self.similarity(x, y)?;
        if a > MAX_SIMILARITY {
            return Err(Error::PotentialOverflow {
                similarity: a,
                x: x.to_vec(),
                y: y.to_vec(),
            });
        }
        Ok(math::exp(a))
    }

    /// `B` with `a(x, y) = xᵀ B y`, for the bilinear kinds.
    pub fn bilinear_form(&self) -> Option<Matrix> {
        match &self.kind {
            PotentialKind::DotProduct { scale } => Some(Matrix::scaled_identity(self.dim, *scale)),
            PotentialKind::ScaledDotProduct { w_q, w_k, scale } => {
                Some(w_q.transpose().matmul(w_k).expect("shapes checked").scale(*scale))
            }
            _ => None,
        }
    }
}

/// Where a reported constant came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(tag = "source", rename_all = "snake_case"))]
pub enum Provenance {
    /// Closed form, exact.
    Analytic,
    /// Closed-form bound on the safe side (upper bound for sups, lower for infs).
    AnalyticBound,
    /// Sampled: a lower estimate of a sup or an upper estimate of an inf.
    Sampled { samples: u64, seed: u64 },
    /// Minimum over the observed data pairs only.
    DataEmpirical,
}

impl Provenance {
    /// True when the value can be used in a certified bound.
    pub fn is_certified(&self) -> bool {
        matches!(self, Provenance::Analytic | Provenance::AnalyticBound)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Stat {
    pub value: f64,
    pub provenance: Provenance,
}

impl Stat {
    pub fn analytic(value: f64) -> Self {
        Self {
            value,
            provenance: Provenance::Analytic,
        }
    }

    pub fn bound(value: f64) -> Self {
        Self {
            value,
            provenance: Provenance::AnalyticBound,
        }
    }
}

/// `ε(G)`, `‖G‖_∞`, `‖G‖_{Lip,∞}`, `‖G‖_{∞,Lip}` and the joint `‖G‖_Lip` on `E × E`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct RegularityStats {
    pub eps_g: Stat,
    pub sup_g: Stat,
    pub lip_left: Stat,
    pub lip_right: Stat,
    pub lip_joint: Stat,
}

impl RegularityStats {
    pub fn is_certified(&self) -> bool {
        [self.eps_g, self.sup_g, self.lip_left, self.lip_right, self.lip_joint]
            .iter()
            .all(|s| s.provenance.is_certified())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SamplingConfig {
    pub samples: usize,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            samples: 100_000,
            seed: 0,
        }
    }
}

/// Regularity constants of `g` on `domain`.
///
/// Gaussian and bilinear potentials get closed forms; custom similarities are
/// sampled and flagged as such.
pub fn regularity_stats(
    g: &Potential,
    domain: &DomainBox,
    sampling: &SamplingConfig,
) -> Result<RegularityStats> {
    if let Some(d) = domain.dim() {
        check_dim(g.dim, d)?;
    }
    if g.is_gaussian() {
        return Ok(gaussian_stats(domain));
    }
    let (lower, upper) = domain.bounds().ok_or(Error::UnboundedDomainUnsupported)?;
    match g.bilinear_form() {
        Some(b) => Ok(bilinear_stats(&b, lower, upper)),
        None => sample_regularity(g, domain, sampling),
    }
}

fn gaussian_stats(domain: &DomainBox) -> RegularityStats {
    let eps = match domain.bounds() {
        // the farthest pair of a box is a pair of opposite corners
        Some((l, u)) => math::exp(-linalg::squared_l2_distance(l, u)),
        None => 0.0,
    };
    let lip = Stat::bound(GAUSSIAN_LIP);
    RegularityStats {
        eps_g: Stat::analytic(eps),
        sup_g: Stat::analytic(1.0),
        lip_left: lip,
        lip_right: lip,
        lip_joint: lip,
    }
}

fn bilinear_stats(b: &Matrix, lower: &[f64], upper: &[f64]) -> RegularityStats {
    let (a_min, a_max, exact) = bilinear_extrema(b, lower, upper);
    let sup_g = math::exp(a_max);
    let eps_g = math::exp(a_min);
    // ∇_x G = G·B y and ∇_y G = G·Bᵀ x
    let grad_x = max_linf_image(b, lower, upper);
    let grad_y = max_linf_image(&b.transpose(), lower, upper);
    let extrema = if exact { Stat::analytic } else { Stat::bound };
    RegularityStats {
        eps_g: extrema(eps_g),
        sup_g: extrema(sup_g),
        lip_left: Stat::bound(grad_x * sup_g),
        lip_right: Stat::bound(grad_y * sup_g),
        lip_joint: Stat::bound(grad_x.max(grad_y) * sup_g),
    }
}

/// Min and max of `xᵀBy` over `x, y` in the box. For fixed `x` the problem in
/// `y` separates by coordinate, and the optimum over `x` sits at a corner.
fn bilinear_extrema(b: &Matrix, lower: &[f64], upper: &[f64]) -> (f64, f64, bool) {
    let d = lower.len();
    if d <= MAX_CORNER_DIM {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut x = vec![0.0; d];
        for mask in 0u32..(1u32 << d) {
            for k in 0..d {
                x[k] = if mask & (1 << k) != 0 { upper[k] } else { lower[k] };
            }
            let (mn, mx) = separable_range(&b.transpose().apply(&x).expect("square"), lower, upper);
            lo = lo.min(mn);
            hi = hi.max(mx);
        }
        (lo, hi, true)
    } else {
        let mut lo = 0.0;
        let mut hi = 0.0;
        for i in 0..d {
            for j in 0..d {
                let bij = b.get(i, j);
                let cands = [
                    bij * lower[i] * lower[j],
                    bij * lower[i] * upper[j],
                    bij * upper[i] * lower[j],
                    bij * upper[i] * upper[j],
                ];
                lo += cands.iter().copied().fold(f64::INFINITY, f64::min);
                hi += cands.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            }
        }
        (lo, hi, false)
    }
}

/// Range of `cᵀy` over the box.
fn separable_range(c: &[f64], lower: &[f64], upper: &[f64]) -> (f64, f64) {
    let mut lo = 0.0;
    let mut hi = 0.0;
    for ((ck, l), u) in c.iter().zip(lower).zip(upper) {
        let (p, q) = (ck * l, ck * u);
        lo += p.min(q);
        hi += p.max(q);
    }
    (lo, hi)
}

/// `max_{y ∈ box} ‖M y‖_∞`, exact: each row is a separable linear form.
fn max_linf_image(m: &Matrix, lower: &[f64], upper: &[f64]) -> f64 {
    (0..m.rows())
        .map(|r| {
            let (lo, hi) = separable_range(m.row(r), lower, upper);
            hi.max(-lo)
        })
        .fold(0.0, f64::max)
}

/// `‖G(q, ·)‖_Lip` over `y ∈ E`, the seminorm the cross-attention bound uses.
pub fn lip_second_at(
    g: &Potential,
    q: &[f64],
    domain: &DomainBox,
    sampling: &SamplingConfig,
) -> Result<Stat> {
    check_dim(g.dim, q.len())?;
    if g.is_gaussian() {
        return Ok(Stat::bound(GAUSSIAN_LIP));
    }
    let (lower, upper) = domain.bounds().ok_or(Error::UnboundedDomainUnsupported)?;
    check_dim(g.dim, lower.len())?;
    if let Some(b) = g.bilinear_form() {
        let c = b.transpose().apply(q)?;
        let (_, a_max) = separable_range(&c, lower, upper);
        return Ok(Stat::bound(linalg::linf_norm(&c) * math::exp(a_max)));
    }
    let mut sampler = Sampler::new(g, lower, upper, sampling);
    Ok(Stat {
        value: sampler.lip_with_fixed_first(q),
        provenance: Provenance::Sampled {
            samples: sampling.samples as u64,
            seed: sampling.seed,
        },
    })
}

/// `min G(x, y)` over all pairs drawn from the given clouds.
pub fn eps_on_data(g: &Potential, clouds: &[&PointCloud]) -> Result<Stat> {
    let mut eps = f64::INFINITY;
    for a in clouds {
        for b in clouds {
            for x in a.points() {
                for y in b.points() {
                    eps = eps.min(g.evaluate(x, y)?);
                }
            }
        }
    }
    Ok(Stat {
        value: eps,
        provenance: Provenance::DataEmpirical,
    })
}

/// Sampled regularity constants, usable for any potential on a bounded box.
pub fn sample_regularity(
    g: &Potential,
    domain: &DomainBox,
    sampling: &SamplingConfig,
) -> Result<RegularityStats> {
    let (lower, upper) = domain.bounds().ok_or(Error::UnboundedDomainUnsupported)?;
    check_dim(g.dim, lower.len())?;
    if sampling.samples == 0 {
        return Err(Error::InvalidInput("sampling needs at least one sample"));
    }
    let mut sampler = Sampler::new(g, lower, upper, sampling);
    let (eps, sup, left, right) = sampler.run();
    let prov = Provenance::Sampled {
        samples: sampling.samples as u64,
        seed: sampling.seed,
    };
    let stat = |value| Stat {
        value,
        provenance: prov,
    };
    Ok(RegularityStats {
        eps_g: stat(eps),
        sup_g: stat(sup),
        lip_left: stat(left),
        lip_right: stat(right),
        // sup ‖∇G‖_∞ over both arguments is the larger partial seminorm
        lip_joint: stat(left.max(right)),
    })
}

/// Latin-hypercube pairs, axis-aligned finite differences, then local
/// hill-climbing on the best candidates. Axis directions suffice because they
/// are the extreme points of the ℓ1 unit ball.
struct Sampler<'a> {
    g: &'a Potential,
    lower: &'a [f64],
    upper: &'a [f64],
    samples: usize,
    rng: StreamRng,
}

const REFINE_CANDIDATES: usize = 16;
const REFINE_STEPS: usize = 200;

#[derive(Clone)]
struct Candidate {
    x: Vec<f64>,
    y: Vec<f64>,
    axis: usize,
    step: f64,
    ratio: f64,
}

impl<'a> Sampler<'a> {
    fn new(g: &'a Potential, lower: &'a [f64], upper: &'a [f64], cfg: &SamplingConfig) -> Self {
        Self {
            g,
            lower,
            upper,
            samples: cfg.samples.max(1),
            rng: rng::stream_rng(cfg.seed, 0x5eed_0001),
        }
    }

    fn gval(&self, x: &[f64], y: &[f64]) -> f64 {
        math::exp(self.g.similarity_unchecked(x, y).min(MAX_SIMILARITY))
    }

    fn latin_hypercube(&mut self, dims: usize) -> Vec<Vec<f64>> {
        let n = self.samples;
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(dims);
        for k in 0..dims {
            let (l, u) = (self.lower[k % self.lower.len()], self.upper[k % self.upper.len()]);
            let mut strata: Vec<usize> = (0..n).collect();
            strata.shuffle(&mut self.rng);
            cols.push(
                strata
                    .into_iter()
                    .map(|s| l + (u - l) * (s as f64 + rng::uniform_in(&mut self.rng, 0.0, 1.0)) / n as f64)
                    .collect(),
            );
        }
        cols
    }

    /// Secant slope of `G` moving argument `which` (0 = x, 1 = y) along `axis`.
    fn secant(&self, x: &[f64], y: &[f64], which: usize, axis: usize, step: f64) -> f64 {
        let (l, u) = (self.lower[axis], self.upper[axis]);
        let base = if which == 0 { x[axis] } else { y[axis] };
        let moved = (base + step).clamp(l, u);
        let h = math::abs(moved - base);
        if h == 0.0 {
            return 0.0;
        }
        let mut xs = x.to_vec();
        let mut ys = y.to_vec();
        if which == 0 {
            xs[axis] = moved;
        } else {
            ys[axis] = moved;
        }
        math::abs(self.gval(&xs, &ys) - self.gval(x, y)) / h
    }

    fn random_step(&mut self, axis: usize) -> f64 {
        let width = self.upper[axis] - self.lower[axis];
        let scale = [1e-3, 1e-2, 1e-1][rng::index(&mut self.rng, 3)];
        let sign = if rng::index(&mut self.rng, 2) == 0 { -1.0 } else { 1.0 };
        sign * scale * width.max(f64::MIN_POSITIVE)
    }

    fn run(&mut self) -> (f64, f64, f64, f64) {
        let d = self.lower.len();
        let cols = self.latin_hypercube(2 * d);
        let mut eps = f64::INFINITY;
        let mut sup = 0.0f64;
        let mut best: [Vec<Candidate>; 2] = [Vec::new(), Vec::new()];
        let mut x = vec![0.0; d];
        let mut y = vec![0.0; d];
        for i in 0..self.samples {
            for k in 0..d {
                x[k] = cols[k][i];
                y[k] = cols[d + k][i];
            }
            let gv = self.gval(&x, &y);
            eps = eps.min(gv);
            sup = sup.max(gv);
            for which in 0..2 {
                let axis = rng::index(&mut self.rng, d);
                let step = self.random_step(axis);
                let ratio = self.secant(&x, &y, which, axis, step);
                push_candidate(
                    &mut best[which],
                    Candidate {
                        x: x.clone(),
                        y: y.clone(),
                        axis,
                        step,
                        ratio,
                    },
                );
            }
        }
        let mut lips = [0.0f64; 2];
        for which in 0..2 {
            let cands = core::mem::take(&mut best[which]);
            for c in cands {
                let refined = self.refine(c, which, None);
                eps = eps.min(self.gval(&refined.x, &refined.y));
                sup = sup.max(self.gval(&refined.x, &refined.y));
                lips[which] = lips[which].max(refined.ratio);
            }
        }
        (eps, sup, lips[0], lips[1])
    }

    fn lip_with_fixed_first(&mut self, q: &[f64]) -> f64 {
        let d = self.lower.len();
        let cols = self.latin_hypercube(d);
        let mut best = Vec::new();
        let mut y = vec![0.0; d];
        for i in 0..self.samples {
            for k in 0..d {
                y[k] = cols[k][i];
            }
            let axis = rng::index(&mut self.rng, d);
            let step = self.random_step(axis);
            let ratio = self.secant(q, &y, 1, axis, step);
            push_candidate(
                &mut best,
                Candidate {
                    x: q.to_vec(),
                    y: y.clone(),
                    axis,
                    step,
                    ratio,
                },
            );
        }
        best.into_iter()
            .map(|c| self.refine(c, 1, Some(q)).ratio)
            .fold(0.0, f64::max)
    }

    /// Random local search around a candidate, shrinking the radius on failure.
    fn refine(&mut self, mut c: Candidate, which: usize, fixed_x: Option<&[f64]>) -> Candidate {
        let d = self.lower.len();
        let mut radius = 0.05;
        for _ in 0..REFINE_STEPS {
            let mut trial = c.clone();
            for k in 0..d {
                let w = self.upper[k] - self.lower[k];
                if fixed_x.is_none() {
                    trial.x[k] = (trial.x[k] + radius * w * rng::standard_normal(&mut self.rng))
                        .clamp(self.lower[k], self.upper[k]);
                }
                trial.y[k] = (trial.y[k] + radius * w * rng::standard_normal(&mut self.rng))
                    .clamp(self.lower[k], self.upper[k]);
            }
            if rng::index(&mut self.rng, 4) == 0 {
                trial.axis = rng::index(&mut self.rng, d);
            }
            trial.step = c.step * math::exp(0.5 * rng::standard_normal(&mut self.rng));
            trial.ratio = self.secant(&trial.x, &trial.y, which, trial.axis, trial.step);
            if trial.ratio > c.ratio {
                c = trial;
            } else {
                radius *= 0.98;
            }
        }
        c
    }
}

fn push_candidate(best: &mut Vec<Candidate>, c: Candidate) {
    if best.len() < REFINE_CANDIDATES {
        best.push(c);
        return;
    }
    let (worst, worst_ratio) = best
        .iter()
        .enumerate()
        .map(|(i, b)| (i, b.ratio))
        .fold((0, f64::INFINITY), |acc, (i, r)| if r < acc.1 { (i, r) } else { acc });
    if c.ratio > worst_ratio {
        best[worst] = c;
    }
}

/// Sampled ℓ1 Lipschitz seminorm of a scalar function on a box, over pairs
/// with `‖x - y‖₁ ≤ max_len` (`None` for unrestricted pairs).
pub fn sampled_seminorm<F>(
    f: F,
    domain: &DomainBox,
    samples: usize,
    max_len: Option<f64>,
    seed: u64,
) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let (lower, upper) = domain.bounds().ok_or(Error::UnboundedDomainUnsupported)?;
    let d = lower.len();
    let mut rng = rng::stream_rng(seed, 0x5eed_0002);
    let mut best = 0.0f64;
    let mut x = vec![0.0; d];
    let mut y = vec![0.0; d];
    for _ in 0..samples {
        for k in 0..d {
            x[k] = rng::uniform_in(&mut rng, lower[k], upper[k]);
        }
        let axis_aligned = rng::index(&mut rng, 2) == 0;
        match (axis_aligned, max_len) {
            (true, _) => {
                y.copy_from_slice(&x);
                let axis = rng::index(&mut rng, d);
                let reach = max_len.unwrap_or(upper[axis] - lower[axis]);
                y[axis] = rng::uniform_in(&mut rng, x[axis] - reach, x[axis] + reach)
                    .clamp(lower[axis], upper[axis]);
            }
            (false, None) => {
                for k in 0..d {
                    y[k] = rng::uniform_in(&mut rng, lower[k], upper[k]);
                }
            }
            (false, Some(len)) => {
                // random direction rescaled to ℓ1 length ≤ len
                let dir: Vec<f64> = (0..d).map(|_| rng::standard_normal(&mut rng)).collect();
                let norm: f64 = dir.iter().map(|v| math::abs(*v)).sum();
                let r = rng::uniform_in(&mut rng, 0.0, len);
                for k in 0..d {
                    y[k] = (x[k] + r * dir[k] / norm.max(f64::MIN_POSITIVE)).clamp(lower[k], upper[k]);
                }
            }
        }
        let dist = linalg::l1_distance(&x, &y);
        if dist > 0.0 && max_len.is_none_or(|m| dist <= m) {
            best = best.max(math::abs(f(&x) - f(&y)) / dist);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_at_diagonal_is_one() {
        let g = Potential::gaussian(3);
        assert_eq!(g.evaluate(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
    }

    #[test]
    fn gaussian_unit_distance() {
        let g = Potential::gaussian(1);
        let v = g.evaluate(&[0.0], &[1.0]).unwrap();
        assert!((v - 0.36787944117144233).abs() < 1e-15);
    }

    #[test]
    fn dot_product_hand_value() {
        let g = Potential::dot_product(2, 1.0 / 2f64.sqrt());
        let v = g.evaluate(&[1.0, 0.0], &[1.0, 0.0]).unwrap();
        // exp(1/√2) by hand: 2.0281149816...
        assert!((v - 2.028114981647472).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_reported() {
        let g = Potential::gaussian(2);
        assert_eq!(
            g.evaluate(&[0.0], &[0.0, 1.0]),
            Err(Error::DimMismatch { expected: 2, found: 1 })
        );
    }

    #[test]
    fn overflow_reported_with_pair() {
        let g = Potential::dot_product(1, 1.0);
        match g.evaluate(&[30.0], &[30.0]) {
            Err(Error::PotentialOverflow { similarity, x, y }) => {
                assert_eq!(similarity, 900.0);
                assert_eq!(x, vec![30.0]);
                assert_eq!(y, vec![30.0]);
            }
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn gaussian_lip_constant_matches_one_dimensional_max() {
        // oracle: dense grid + golden refinement of 2t·exp(-t²)
        let h = |t: f64| 2.0 * t * (-t * t).exp();
        let mut best = (0.0, 0.0);
        for i in 0..=40_000 {
            let t = i as f64 * 1e-4;
            if h(t) > best.1 {
                best = (t, h(t));
            }
        }
        assert!((best.1 - GAUSSIAN_LIP).abs() < 1e-8);
        assert!((GAUSSIAN_LIP - (2.0 / core::f64::consts::E).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn gaussian_stats_are_analytic() {
        let s = regularity_stats(&Potential::gaussian(2), &DomainBox::Unbounded, &SamplingConfig::default())
            .unwrap();
        assert_eq!(s.sup_g.value, 1.0);
        assert_eq!(s.eps_g.value, 0.0);
        assert_eq!(s.lip_joint.value, GAUSSIAN_LIP);
        assert!(s.is_certified());

        let b = DomainBox::cube(2, 0.0, 1.0).unwrap();
        let s = regularity_stats(&Potential::gaussian(2), &b, &SamplingConfig::default()).unwrap();
        assert!((s.eps_g.value - (-2.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn dot_product_extrema_from_corners() {
        let b = DomainBox::cube(2, -1.0, 1.0).unwrap();
        let s = regularity_stats(&Potential::dot_product(2, 1.0), &b, &SamplingConfig::default()).unwrap();
        // oracle: enumerate the 16 corner pairs of [-1,1]²×[-1,1]²
        let corners = [[-1.0, -1.0], [-1.0, 1.0], [1.0, -1.0], [1.0, 1.0]];
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for x in &corners {
            for y in &corners {
                let a = x[0] * y[0] + x[1] * y[1];
                lo = lo.min(a);
                hi = hi.max(a);
            }
        }
        assert_eq!(s.eps_g.value, lo.exp());
        assert_eq!(s.sup_g.value, hi.exp());
        assert_eq!(s.eps_g.value, (-2.0f64).exp());
        assert_eq!(s.sup_g.value, 2.0f64.exp());
        // ∇_x G = y·G, ‖y‖_∞ ≤ 1
        assert_eq!(s.lip_left.value, 2.0f64.exp());
    }

    #[test]
    fn unbounded_dot_product_rejected() {
        let r = regularity_stats(&Potential::dot_product(2, 1.0), &DomainBox::Unbounded, &SamplingConfig::default());
        assert_eq!(r, Err(Error::UnboundedDomainUnsupported));
    }

    #[test]
    fn constant_potential_samples_to_zero_seminorm() {
        let b = DomainBox::cube(2, -1.0, 1.0).unwrap();
        let cfg = SamplingConfig { samples: 2_000, seed: 3 };
        let s = regularity_stats(&Potential::constant(2), &b, &cfg).unwrap();
        assert_eq!(s.eps_g.value, 1.0);
        assert_eq!(s.sup_g.value, 1.0);
        assert_eq!(s.lip_left.value, 0.0);
        assert!(!s.is_certified());
    }

    #[test]
    fn sampled_gaussian_seminorm_stays_below_analytic() {
        let b = DomainBox::cube(2, -2.0, 2.0).unwrap();
        let cfg = SamplingConfig { samples: 20_000, seed: 11 };
        let s = sample_regularity(&Potential::gaussian(2), &b, &cfg).unwrap();
        assert!(s.lip_left.value <= GAUSSIAN_LIP);
        assert!(s.lip_right.value <= GAUSSIAN_LIP);
        // refinement should get close to the attained maximum
        assert!(s.lip_left.value > 0.95 * GAUSSIAN_LIP, "{}", s.lip_left.value);
    }

    #[test]
    fn sampled_dot_product_stays_below_analytic() {
        let b = DomainBox::cube(2, -1.0, 1.0).unwrap();
        let g = Potential::dot_product(2, 0.7);
        let cfg = SamplingConfig { samples: 20_000, seed: 5 };
        let sampled = sample_regularity(&g, &b, &cfg).unwrap();
        let exact = regularity_stats(&g, &b, &cfg).unwrap();
        assert!(sampled.lip_left.value <= exact.lip_left.value + 1e-12);
        assert!(sampled.eps_g.value >= exact.eps_g.value);
        assert!(sampled.sup_g.value <= exact.sup_g.value);
    }

    #[test]
    fn cross_seminorm_for_dot_product() {
        let b = DomainBox::cube(1, -1.0, 1.0).unwrap();
        let g = Potential::dot_product(1, 2.0);
        let s = lip_second_at(&g, &[0.5], &b, &SamplingConfig::default()).unwrap();
        // G(q, y) = exp(y), derivative ≤ e on [-1, 1]
        assert!((s.value - 1f64.exp()).abs() < 1e-15);
    }

    #[test]
    fn symmetric_kinds_are_symmetric() {
        let x = [0.3, -1.2, 0.5];
        let y = [1.1, 0.4, -0.7];
        let g = Potential::gaussian(3);
        assert_eq!(g.evaluate(&x, &y).unwrap(), g.evaluate(&y, &x).unwrap());
        let w = Matrix::from_rows(&[vec![1.0, 2.0, 0.0], vec![0.5, -1.0, 1.0]]).unwrap();
        let sdp = Potential::scaled_dot_product(w.clone(), w, 0.5).unwrap();
        assert_eq!(sdp.evaluate(&x, &y).unwrap(), sdp.evaluate(&y, &x).unwrap());
    }
}
