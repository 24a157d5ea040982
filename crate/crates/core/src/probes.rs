//! Randomized checks of the contraction bounds.
//!
//! A probe draws pairs of inputs, pushes both through a map and records the
//! ratio of output to input distance. The largest ratio seen is a lower
//! estimate of the map's contraction coefficient and is compared against the
//! matching closed-form bound.

mod equivalence;
mod lemmas;

pub use equivalence::{run_equivalence, EquivalenceConfig, EquivalenceReport, WorstInstance};
pub use lemmas::{
    check_local_lip_lemma, check_product_lemma, check_ratio_lemma, ratio_objective, reduced_ratio_objective,
    LocalLipReport, LocalLipRow, ProductLemmaReport, RatioLemmaConfig, RatioLemmaReport, RatioLemmaRow,
};

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::bounds::{self, BoundStatus};
use crate::error::{Error, Result};
use crate::kernels::{self, AttentionConfig};
use crate::linalg;
use crate::measures::{barycenter, empirical, DomainBox, EmpiricalMeasure, PointCloud};
use crate::potentials::{self, SamplingConfig};
use crate::rng::{self, StreamRng};
use crate::transport;

/// Ratios below this input distance are skipped rather than evaluated.
pub const MIN_DENOMINATOR: f64 = 1e-12;
/// A ratio violates a bound `b` when it exceeds `b + VIOLATION_RTOL · max(1, b)`.
pub const VIOLATION_RTOL: f64 = 1e-7;

/// Where sample points are drawn from.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SamplingDomain {
    /// A compact domain; the bounded-domain theorems apply.
    Box(DomainBox),
    /// Points drawn from `[-r, r]^d` while the theorem is stated on all of `R^d`.
    Radius(f64),
}

impl SamplingDomain {
    fn bounds(&self, d: usize) -> (Vec<f64>, Vec<f64>) {
        match self {
            SamplingDomain::Box(b) => match b.bounds() {
                Some((l, u)) => (l.to_vec(), u.to_vec()),
                None => (vec![-1.0; d], vec![1.0; d]),
            },
            SamplingDomain::Radius(r) => (vec![-r; d], vec![*r; d]),
        }
    }

    /// The domain the theorems see: the box, or `R^d` for a radius.
    pub fn theorem_domain(&self) -> DomainBox {
        match self {
            SamplingDomain::Box(b) => b.clone(),
            SamplingDomain::Radius(_) => DomainBox::Unbounded,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(tag = "mode", rename_all = "snake_case"))]
pub enum Perturbation {
    /// Two independent clouds, sizes drawn independently.
    Resample,
    /// A base cloud and a copy moved by Gaussian noise of scale `sigma`.
    Jitter { sigma: f64 },
    /// Remove one point from the base cloud.
    DropPoint,
    /// Repeat one point of the base cloud.
    DuplicatePoint,
    /// Cycle through the four modes above by trial index.
    Mixed { sigma: f64 },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ProbeConfig {
    pub seed: u64,
    pub trials: usize,
    pub dim: usize,
    /// Inclusive range of support sizes.
    pub n_range: (usize, usize),
    pub domain: SamplingDomain,
    pub perturbation: Perturbation,
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidInput("trials must be at least 1"));
        }
        if self.dim == 0 {
            return Err(Error::InvalidInput("dimension must be at least 1"));
        }
        let (lo, hi) = self.n_range;
        if lo == 0 || lo > hi {
            return Err(Error::InvalidInput("support size range must satisfy 1 <= min <= max"));
        }
        if hi > transport::MAX_SUPPORT {
            return Err(Error::SupportTooLarge {
                size: hi,
                limit: transport::MAX_SUPPORT,
            });
        }
        match &self.domain {
            SamplingDomain::Box(b) => {
                if let Some(d) = b.dim() {
                    crate::measures::check_dim(self.dim, d)?;
                }
            }
            SamplingDomain::Radius(r) => {
                if !(r.is_finite() && *r > 0.0) {
                    return Err(Error::InvalidInput("sampling radius must be positive"));
                }
            }
        }
        if let Perturbation::Jitter { sigma } | Perturbation::Mixed { sigma } = self.perturbation {
            if !(sigma.is_finite() && sigma > 0.0) {
                return Err(Error::InvalidInput("jitter scale must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Quantile {
    pub q: f64,
    pub value: f64,
}

/// The inputs of one trial, enough to replay it.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Instance {
    pub trial: usize,
    pub ratio: f64,
    pub bound: Option<f64>,
    pub clouds: BTreeMap<String, Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ProbeResult {
    pub max_ratio: f64,
    pub argmax_instance: Option<Instance>,
    /// Largest bound used; per-trial bounds may depend on the support sizes.
    pub bound: Option<f64>,
    /// False when the bound rests on sampled ingredients.
    pub bound_certified: bool,
    /// Absent when no bound applies.
    pub violations: Option<usize>,
    /// Largest `ratio / bound` over trials.
    pub max_ratio_over_bound: Option<f64>,
    pub first_violation: Option<Instance>,
    pub evaluated: usize,
    /// Trials with input distance below [`MIN_DENOMINATOR`].
    pub skipped: usize,
    pub quantiles: Vec<Quantile>,
    #[cfg_attr(feature = "serde", serde(skip))]
    pub ratios: Vec<f64>,
}

pub(crate) struct Sample {
    pub num: f64,
    pub den: f64,
    pub n: usize,
    pub m: usize,
    pub clouds: Vec<(&'static str, PointCloud)>,
}

const QUANTILES: [f64; 6] = [0.0, 0.5, 0.9, 0.99, 0.999, 1.0];

fn quantiles(sorted: &[f64]) -> Vec<Quantile> {
    if sorted.is_empty() {
        return Vec::new();
    }
    QUANTILES
        .iter()
        .map(|&q| {
            let idx = (q * (sorted.len() - 1) as f64) as usize;
            Quantile { q, value: sorted[idx] }
        })
        .collect()
}

fn exceeds(ratio: f64, bound: f64) -> bool {
    ratio > bound + VIOLATION_RTOL * bound.max(1.0)
}

/// Runs `trials` independent trials; trial `t` draws from stream `t` of the seed.
pub(crate) fn run_trials<T, B>(probe: &ProbeConfig, mut trial: T, bound: B, certified: bool) -> Result<ProbeResult>
where
    T: FnMut(usize, &mut StreamRng) -> Result<Sample>,
    B: Fn(usize, usize) -> Option<f64>,
{
    probe.validate()?;
    let mut ratios = Vec::with_capacity(probe.trials);
    let mut best: Option<Instance> = None;
    let mut first_violation = None;
    let mut max_bound: Option<f64> = None;
    let mut max_rel: Option<f64> = None;
    let mut violations = 0usize;
    let mut any_bound = false;
    let mut skipped = 0usize;
    for t in 0..probe.trials {
        let mut rng = rng::stream_rng(probe.seed, t as u64);
        let s = trial(t, &mut rng)?;
        if s.den < MIN_DENOMINATOR {
            skipped += 1;
            continue;
        }
        let ratio = s.num / s.den;
        ratios.push(ratio);
        let b = bound(s.n, s.m);
        let instance = || Instance {
            trial: t,
            ratio,
            bound: b,
            clouds: s.clouds.iter().map(|(k, c)| (k.to_string(), c.to_rows())).collect(),
        };
        if let Some(b) = b {
            any_bound = true;
            max_bound = Some(max_bound.map_or(b, |m: f64| m.max(b)));
            if b > 0.0 {
                let rel = ratio / b;
                max_rel = Some(max_rel.map_or(rel, |m: f64| m.max(rel)));
            }
            if exceeds(ratio, b) {
                violations += 1;
                if first_violation.is_none() {
                    first_violation = Some(instance());
                }
            }
        }
        if best.as_ref().is_none_or(|i| ratio > i.ratio) {
            best = Some(instance());
        }
    }
    let mut sorted = ratios.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(ProbeResult {
        max_ratio: sorted.last().copied().unwrap_or(0.0),
        argmax_instance: best,
        bound: max_bound,
        bound_certified: any_bound && certified,
        violations: any_bound.then_some(violations),
        max_ratio_over_bound: max_rel,
        first_violation,
        evaluated: ratios.len(),
        skipped,
        quantiles: quantiles(&sorted),
        ratios,
    })
}

pub(crate) fn random_cloud(rng: &mut StreamRng, n: usize, lower: &[f64], upper: &[f64]) -> PointCloud {
    let d = lower.len();
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        for k in 0..d {
            data.push(rng::uniform_in(rng, lower[k], upper[k]));
        }
    }
    PointCloud::new(d, data).expect("finite coordinates")
}

fn random_size(rng: &mut StreamRng, (lo, hi): (usize, usize)) -> usize {
    lo + rng::index(rng, hi - lo + 1)
}

fn random_point(rng: &mut StreamRng, lower: &[f64], upper: &[f64]) -> Vec<f64> {
    lower
        .iter()
        .zip(upper)
        .map(|(l, u)| rng::uniform_in(rng, *l, *u))
        .collect()
}

fn jitter(rng: &mut StreamRng, x: &PointCloud, sigma: f64, lower: &[f64], upper: &[f64]) -> PointCloud {
    let d = x.dim();
    let data = x
        .as_flat()
        .iter()
        .enumerate()
        .map(|(i, v)| (v + sigma * rng::standard_normal(rng)).clamp(lower[i % d], upper[i % d]))
        .collect();
    PointCloud::new(d, data).expect("finite coordinates")
}

/// Draws a pair of point clouds according to the perturbation mode.
pub fn sample_pair(probe: &ProbeConfig, trial: usize, rng: &mut StreamRng) -> (PointCloud, PointCloud) {
    let (lower, upper) = probe.domain.bounds(probe.dim);
    let n = random_size(rng, probe.n_range);
    let x = random_cloud(rng, n, &lower, &upper);
    let mode = match probe.perturbation {
        Perturbation::Mixed { sigma } => match trial % 4 {
            0 => Perturbation::Resample,
            1 => Perturbation::Jitter { sigma },
            2 => Perturbation::DropPoint,
            _ => Perturbation::DuplicatePoint,
        },
        p => p,
    };
    let y = match mode {
        Perturbation::Resample | Perturbation::Mixed { .. } => {
            let m = random_size(rng, probe.n_range);
            random_cloud(rng, m, &lower, &upper)
        }
        Perturbation::Jitter { sigma } => jitter(rng, &x, sigma, &lower, &upper),
        Perturbation::DropPoint if n >= 2 => {
            let skip = rng::index(rng, n);
            let rows: Vec<Vec<f64>> = x
                .points()
                .enumerate()
                .filter(|(i, _)| *i != skip)
                .map(|(_, p)| p.to_vec())
                .collect();
            PointCloud::from_rows(&rows).expect("nonempty")
        }
        Perturbation::DropPoint | Perturbation::DuplicatePoint => {
            // a single point cannot be dropped, so it is duplicated instead
            let dup = rng::index(rng, n);
            let mut data = x.as_flat().to_vec();
            data.extend_from_slice(x.point(dup));
            PointCloud::new(x.dim(), data).expect("finite coordinates")
        }
    };
    (x, y)
}

/// Which closed-form bound a contraction probe compares against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ContractionBound {
    /// `τ(Π) τ(Ψ_G) τ(L)` on the probe's box.
    Bounded,
    /// The bounded bound with the `‖G‖_∞ / ε(G)` term added.
    BoundedCorrected,
    /// The Gaussian bound on `R^d`, evaluated at each pair's support sizes.
    UnboundedGaussian,
    Fixed(f64),
    None,
}

/// Samples `W1(μ A_μ, ν A_ν) / W1(μ, ν)` over measure pairs.
pub fn probe_contraction(
    cfg: &AttentionConfig,
    probe: &ProbeConfig,
    which: ContractionBound,
    sampling: &SamplingConfig,
) -> Result<ProbeResult> {
    probe.validate()?;
    crate::measures::check_dim(cfg.key_dim(), probe.dim)?;
    let trial = |t: usize, rng: &mut StreamRng| -> Result<Sample> {
        let (x, y) = sample_pair(probe, t, rng);
        let mu = empirical(x.clone());
        let nu = empirical(y.clone());
        let den = transport::w1(&mu, &nu)?.value;
        if den < MIN_DENOMINATOR {
            return Ok(Sample { num: 0.0, den, n: x.len(), m: y.len(), clouds: Vec::new() });
        }
        let out_mu = kernels::self_attention_measure(cfg, &mu)?;
        let out_nu = kernels::self_attention_measure(cfg, &nu)?;
        let num = transport::w1(&out_mu, &out_nu)?.value;
        Ok(Sample {
            num,
            den,
            n: x.len(),
            m: y.len(),
            clouds: vec![("mu", x), ("nu", y)],
        })
    };
    match which {
        ContractionBound::Bounded | ContractionBound::BoundedCorrected => {
            let domain = probe.domain.theorem_domain();
            let report = if which == ContractionBound::Bounded {
                bounds::bound_bounded_contraction(cfg, &domain, sampling)
            } else {
                bounds::bound_bounded_contraction_corrected(cfg, &domain, sampling)
            };
            let value = (report.status != BoundStatus::Inapplicable).then_some(report.value);
            let certified = report.status == BoundStatus::Applicable;
            run_trials(probe, trial, |_, _| value, certified)
        }
        ContractionBound::UnboundedGaussian => {
            if !cfg.potential.is_gaussian() {
                return Err(Error::InvalidInput("the unbounded bound needs a gaussian potential"));
            }
            let d = probe.dim;
            let lookup = cfg.lookup.clone();
            let bound = move |n: usize, m: usize| {
                let r = bounds::bound_unbounded_gaussian(&lookup, d, n, m);
                (r.status != BoundStatus::Inapplicable).then_some(r.value)
            };
            run_trials(probe, trial, bound, true)
        }
        ContractionBound::Fixed(b) => run_trials(probe, trial, |_, _| Some(b), true),
        ContractionBound::None => run_trials(probe, trial, |_, _| None, false),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Component {
    /// `W1(Ψ_{G(x,·)}(μ), Ψ_{G(y,·)}(μ)) / ‖x - y‖₁`.
    SoftmatchInX,
    /// `W1(Ψ_{G(x,·)}(μ), Ψ_{G(x,·)}(ν)) / W1(μ, ν)`.
    SoftmatchInMeasure,
    /// `‖μ̄ - ν̄‖₁ / W1(μ, ν)`.
    Projection,
    /// `W1(μ L, ν L) / W1(μ, ν)`.
    Lookup,
}

/// Samples one building block of the attention kernel against its own bound.
pub fn probe_component(
    component: Component,
    cfg: &AttentionConfig,
    probe: &ProbeConfig,
    sampling: &SamplingConfig,
) -> Result<ProbeResult> {
    probe.validate()?;
    crate::measures::check_dim(cfg.key_dim(), probe.dim)?;
    let (lower, upper) = probe.domain.bounds(probe.dim);
    match component {
        Component::SoftmatchInX | Component::SoftmatchInMeasure => {
            let domain = probe.domain.theorem_domain();
            let diam = domain.l1_diameter().ok_or(Error::RequiresCompactDomain)?;
            let stats = potentials::regularity_stats(&cfg.potential, &domain, sampling)?;
            let eps = stats.eps_g.value;
            let (lip, certified) = if component == Component::SoftmatchInX {
                (stats.lip_left, stats.lip_left.provenance.is_certified())
            } else {
                (stats.lip_right, stats.lip_right.provenance.is_certified())
            };
            let bound = 2.0 * lip.value * diam / eps;
            let certified = certified && stats.eps_g.provenance.is_certified();
            let g = &cfg.potential;
            if component == Component::SoftmatchInX {
                let trial = |_: usize, rng: &mut StreamRng| -> Result<Sample> {
                    let n = random_size(rng, probe.n_range);
                    let keys = random_cloud(rng, n, &lower, &upper);
                    let x = random_point(rng, &lower, &upper);
                    let y = match probe.perturbation {
                        Perturbation::Jitter { sigma } | Perturbation::Mixed { sigma } => x
                            .iter()
                            .enumerate()
                            .map(|(k, v)| (v + sigma * rng::standard_normal(rng)).clamp(lower[k], upper[k]))
                            .collect(),
                        _ => random_point(rng, &lower, &upper),
                    };
                    let mu = empirical(keys.clone());
                    let den = linalg::l1_distance(&x, &y);
                    let num = transport::w1(&kernels::softmatch_measure(g, &x, &mu)?, &kernels::softmatch_measure(g, &y, &mu)?)?.value;
                    Ok(Sample {
                        num,
                        den,
                        n,
                        m: n,
                        clouds: vec![("keys", keys), ("x", PointCloud::single(&x)?), ("y", PointCloud::single(&y)?)],
                    })
                };
                run_trials(probe, trial, |_, _| Some(bound), certified)
            } else {
                let trial = |t: usize, rng: &mut StreamRng| -> Result<Sample> {
                    let (a, b) = sample_pair(probe, t, rng);
                    let x = random_point(rng, &lower, &upper);
                    let (mu, nu) = (empirical(a.clone()), empirical(b.clone()));
                    let den = transport::w1(&mu, &nu)?.value;
                    let num = transport::w1(&kernels::softmatch_measure(g, &x, &mu)?, &kernels::softmatch_measure(g, &x, &nu)?)?.value;
                    Ok(Sample {
                        num,
                        den,
                        n: a.len(),
                        m: b.len(),
                        clouds: vec![("mu", a), ("nu", b), ("x", PointCloud::single(&x)?)],
                    })
                };
                run_trials(probe, trial, |_, _| Some(bound), certified)
            }
        }
        Component::Projection => {
            let trial = |t: usize, rng: &mut StreamRng| -> Result<Sample> {
                let (a, b) = sample_pair(probe, t, rng);
                let (mu, nu) = (empirical(a.clone()), empirical(b.clone()));
                let den = transport::w1(&mu, &nu)?.value;
                let num = linalg::l1_distance(&barycenter(&mu), &barycenter(&nu));
                Ok(Sample {
                    num,
                    den,
                    n: a.len(),
                    m: b.len(),
                    clouds: vec![("mu", a), ("nu", b)],
                })
            };
            let d = bounds::tau_pi(probe.dim);
            run_trials(probe, trial, |_, _| Some(d), true)
        }
        Component::Lookup => {
            let trial = |t: usize, rng: &mut StreamRng| -> Result<Sample> {
                let (a, b) = sample_pair(probe, t, rng);
                let (mu, nu) = (empirical(a.clone()), empirical(b.clone()));
                let den = transport::w1(&mu, &nu)?.value;
                let num = transport::w1(&kernels::apply_lookup(&cfg.lookup, &mu)?, &kernels::apply_lookup(&cfg.lookup, &nu)?)?.value;
                Ok(Sample {
                    num,
                    den,
                    n: a.len(),
                    m: b.len(),
                    clouds: vec![("mu", a), ("nu", b)],
                })
            };
            let tau = bounds::tau_lookup(&cfg.lookup);
            run_trials(probe, trial, |_, _| Some(tau), true)
        }
    }
}

/// Samples an arbitrary measure map against a fixed bound.
pub fn probe_measure_map<F>(probe: &ProbeConfig, map: F, bound: Option<f64>) -> Result<ProbeResult>
where
    F: Fn(&EmpiricalMeasure) -> Result<EmpiricalMeasure>,
{
    let trial = |t: usize, rng: &mut StreamRng| -> Result<Sample> {
        let (a, b) = sample_pair(probe, t, rng);
        let (mu, nu) = (empirical(a.clone()), empirical(b.clone()));
        let den = transport::w1(&mu, &nu)?.value;
        let num = if den < MIN_DENOMINATOR {
            0.0
        } else {
            transport::w1(&map(&mu)?, &map(&nu)?)?.value
        };
        Ok(Sample {
            num,
            den,
            n: a.len(),
            m: b.len(),
            clouds: vec![("mu", a), ("nu", b)],
        })
    };
    run_trials(probe, trial, |_, _| bound, bound.is_some())
}
