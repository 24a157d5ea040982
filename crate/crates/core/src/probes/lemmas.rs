//! Numerical checks of three auxiliary inequalities used by the unbounded
//! contraction bound: the ratio inequality, subadditivity of W1 under products,
//! and the reduction of Lipschitz seminorms to short pairs.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::bounds::ratio_lemma_bound;
use crate::error::{Error, Result};
use crate::math;
use crate::measures::{empirical, DomainBox, EmpiricalMeasure};
use crate::potentials::sampled_seminorm;
use crate::rng::{self, StreamRng};
use crate::transport;

use super::random_cloud;

/// `f(z) = Σ z_i e^{-z_i²} / (1 + Σ e^{-z_i²})`.
pub fn ratio_objective(z: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 1.0;
    for &v in z {
        let e = math::exp(-v * v);
        num += v * e;
        den += e;
    }
    num / den
}

/// `f` restricted to equal coordinates: `n x e^{-x²} / (1 + n e^{-x²})`.
pub fn reduced_ratio_objective(n: usize, x: f64) -> f64 {
    let e = n as f64 * math::exp(-x * x);
    x * e / (1.0 + e)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct RatioLemmaConfig {
    pub n_max: usize,
    /// Grid points of the 1-d search before golden-section refinement.
    pub grid: usize,
    /// Starting points of the coordinate ascent.
    pub restarts: usize,
    /// Every `n ≤ ascent_n_max` gets the full n-dimensional ascent.
    pub ascent_n_max: usize,
    /// Additionally every multiple of this stride (0 disables).
    pub ascent_stride: usize,
    pub seed: u64,
}

impl Default for RatioLemmaConfig {
    fn default() -> Self {
        Self {
            n_max: 1000,
            grid: 2000,
            restarts: 3,
            ascent_n_max: 32,
            ascent_stride: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct RatioLemmaRow {
    pub n: usize,
    pub bound: f64,
    /// Maximum of the equal-coordinates reduction.
    pub reduced_max: f64,
    pub argmax: f64,
    /// Maximum found by coordinate ascent on the full function, when run.
    pub ascent_max: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct RatioLemmaReport {
    pub rows: Vec<RatioLemmaRow>,
    /// `max(reduced or ascent max - bound)`; negative when every n passes.
    pub max_excess_over_bound: f64,
    /// `max(ascent max - reduced max)` over the n where ascent ran.
    pub max_ascent_excess: f64,
    pub ascent_sizes: usize,
    pub all_pass: bool,
}

const BOUND_TOL: f64 = 1e-9;
const REDUCTION_TOL: f64 = 1e-6;
const GOLDEN_ITERS: usize = 80;

fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let phi = 0.5 * (math::sqrt(5.0) - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc < fd {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        } else {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Grid search on `[lo, hi]` followed by golden section around the best cell.
fn grid_golden_max<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, grid: usize) -> (f64, f64) {
    let grid = grid.max(3);
    let step = (hi - lo) / (grid - 1) as f64;
    let mut best_i = 0;
    let mut best = f64::NEG_INFINITY;
    for i in 0..grid {
        let v = f(lo + step * i as f64);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let a = lo + step * best_i.saturating_sub(1) as f64;
    let b = (lo + step * (best_i + 1) as f64).min(hi);
    let (x, v) = golden_max(&f, a, b, GOLDEN_ITERS);
    if v >= best {
        (x, v)
    } else {
        (lo + step * best_i as f64, best)
    }
}

fn search_limit(n: usize) -> f64 {
    math::sqrt(math::ln(n as f64).max(0.0)) + 4.0
}

/// Maximum of the equal-coordinates reduction for `n`.
fn reduced_max(n: usize, grid: usize) -> (f64, f64) {
    grid_golden_max(|x| reduced_ratio_objective(n, x), 0.0, search_limit(n), grid)
}

/// Multi-start coordinate ascent on the n-dimensional `f`.
fn ascent_max(n: usize, restarts: usize, start: f64, rng: &mut StreamRng) -> f64 {
    let hi = search_limit(n);
    let mut best = f64::NEG_INFINITY;
    for r in 0..restarts.max(1) {
        let mut z: Vec<f64> = (0..n)
            .map(|_| {
                if r == 0 {
                    // near the symmetric point, coordinates split apart
                    start + rng::uniform_in(rng, -0.5, 0.5)
                } else {
                    rng::uniform_in(rng, -0.5, hi)
                }
            })
            .collect();
        let mut value = ratio_objective(&z);
        for _sweep in 0..200 {
            let (mut num, mut den) = (0.0, 1.0);
            for &v in &z {
                let e = math::exp(-v * v);
                num += v * e;
                den += e;
            }
            for i in 0..n {
                let e_i = math::exp(-z[i] * z[i]);
                let num_rest = num - z[i] * e_i;
                let den_rest = den - e_i;
                let f_i = |t: f64| {
                    let e = math::exp(-t * t);
                    (num_rest + t * e) / (den_rest + e)
                };
                let (t, v) = grid_golden_max(f_i, -1.0, hi, 24);
                if v > f_i(z[i]) {
                    let e = math::exp(-t * t);
                    num = num_rest + t * e;
                    den = den_rest + e;
                    z[i] = t;
                }
            }
            let next = ratio_objective(&z);
            let improved = next - value;
            value = value.max(next);
            if improved <= 1e-15 * value.abs().max(1.0) {
                break;
            }
        }
        best = best.max(value);
    }
    best
}

/// For each `n ≤ n_max`: maximizes the equal-coordinates reduction, runs the
/// full ascent on a subset of sizes, and compares both to `√(ln n + 1/(2e))`.
pub fn check_ratio_lemma(cfg: &RatioLemmaConfig) -> Result<RatioLemmaReport> {
    if cfg.n_max == 0 {
        return Err(Error::InvalidInput("n_max must be at least 1"));
    }
    let mut rows = Vec::with_capacity(cfg.n_max);
    let mut max_excess = f64::NEG_INFINITY;
    let mut max_ascent_excess = f64::NEG_INFINITY;
    let mut ascent_sizes = 0;
    for n in 1..=cfg.n_max {
        let bound = ratio_lemma_bound(n);
        let (argmax, reduced) = reduced_max(n, cfg.grid);
        let run_ascent = n <= cfg.ascent_n_max || (cfg.ascent_stride > 0 && n % cfg.ascent_stride == 0);
        let ascent = run_ascent.then(|| {
            let mut rng = rng::stream_rng(cfg.seed, n as u64);
            ascent_max(n, cfg.restarts, argmax, &mut rng)
        });
        let top = ascent.map_or(reduced, |a| a.max(reduced));
        max_excess = max_excess.max(top - bound);
        let mut pass = top <= bound + BOUND_TOL;
        if let Some(a) = ascent {
            ascent_sizes += 1;
            max_ascent_excess = max_ascent_excess.max(a - reduced);
            pass &= a <= reduced + REDUCTION_TOL;
        }
        rows.push(RatioLemmaRow {
            n,
            bound,
            reduced_max: reduced,
            argmax,
            ascent_max: ascent,
            pass,
        });
    }
    let all_pass = rows.iter().all(|r| r.pass);
    Ok(RatioLemmaReport {
        rows,
        max_excess_over_bound: max_excess,
        max_ascent_excess,
        ascent_sizes,
        all_pass,
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ProductLemmaReport {
    pub trials: usize,
    pub violations: usize,
    /// `max(W1(product) - W1(first) - W1(second))`.
    pub max_excess: f64,
    /// Mean of `W1(product) / (W1(first) + W1(second))` over nonzero right sides.
    pub mean_tightness: f64,
    pub min_tightness: f64,
    pub exact_equalities: usize,
}

fn random_uniform_measure(rng: &mut StreamRng, max_support: usize, d: usize) -> EmpiricalMeasure {
    let n = 1 + rng::index(rng, max_support);
    empirical(random_cloud(rng, n, &vec![-1.0; d], &vec![1.0; d]))
}

/// `W1(μ1⊗μ2, ν1⊗ν2) ≤ W1(μ1, ν1) + W1(μ2, ν2)` on random small instances.
pub fn check_product_lemma(trials: usize, max_support: usize, max_dim: usize, seed: u64) -> Result<ProductLemmaReport> {
    if max_support == 0 || max_support * max_support > 64 || max_dim == 0 {
        return Err(Error::InvalidInput("product lemma needs 1 <= max_support <= 8 and max_dim >= 1"));
    }
    let mut violations = 0;
    let mut max_excess = f64::NEG_INFINITY;
    let mut tight_sum = 0.0;
    let mut tight_count = 0usize;
    let mut min_tight = f64::INFINITY;
    let mut exact = 0;
    for t in 0..trials {
        let mut rng = rng::stream_rng(seed, t as u64);
        let d1 = 1 + rng::index(&mut rng, max_dim);
        let d2 = 1 + rng::index(&mut rng, max_dim);
        let mu1 = random_uniform_measure(&mut rng, max_support, d1);
        let nu1 = random_uniform_measure(&mut rng, max_support, d1);
        let mu2 = random_uniform_measure(&mut rng, max_support, d2);
        // sometimes share a factor, where equality must hold
        let nu2 = if t % 5 == 0 {
            mu2.clone()
        } else {
            random_uniform_measure(&mut rng, max_support, d2)
        };
        let (joint, a, b) = transport::w1_product(&mu1, &nu1, &mu2, &nu2)?;
        let rhs = a + b;
        let excess = joint - rhs;
        max_excess = max_excess.max(excess);
        if excess > 1e-9 {
            violations += 1;
        }
        if math::abs(excess) <= 1e-12 {
            exact += 1;
        }
        if rhs > 0.0 {
            let r = joint / rhs;
            tight_sum += r;
            tight_count += 1;
            min_tight = min_tight.min(r);
        }
    }
    Ok(ProductLemmaReport {
        trials,
        violations,
        max_excess,
        mean_tightness: if tight_count > 0 { tight_sum / tight_count as f64 } else { 0.0 },
        min_tightness: min_tight,
        exact_equalities: exact,
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct LocalLipRow {
    pub trial: usize,
    pub kind: String,
    pub known: f64,
    /// Estimate over pairs with `‖x - y‖₁ ≤ 1`.
    pub restricted: f64,
    pub unrestricted: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct LocalLipReport {
    pub rows: Vec<LocalLipRow>,
    pub max_relative_error: f64,
    pub all_pass: bool,
}

const LOCAL_LIP_RTOL: f64 = 1e-2;

/// Random piecewise-linear functions with known ℓ1 seminorm; the seminorm
/// estimated from short pairs only must match the one from all pairs.
pub fn check_local_lip_lemma(trials: usize, dim: usize, samples: usize, seed: u64) -> Result<LocalLipReport> {
    if dim == 0 || samples == 0 {
        return Err(Error::InvalidInput("local Lipschitz check needs dim >= 1 and samples >= 1"));
    }
    let domain = DomainBox::cube(dim, -2.0, 2.0)?;
    let mut rows = Vec::with_capacity(trials);
    let mut max_rel = 0.0f64;
    for t in 0..trials {
        let mut rng = rng::stream_rng(seed, t as u64);
        let g: Vec<f64> = (0..dim).map(|_| rng::uniform_in(&mut rng, -2.0, 2.0)).collect();
        let c: Vec<f64> = (0..dim).map(|_| rng::uniform_in(&mut rng, 0.0, 1.0)).collect();
        let s: Vec<f64> = (0..dim).map(|_| rng::uniform_in(&mut rng, -1.0, 1.0)).collect();
        let dot = |x: &[f64]| x.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>();
        let (kind, known, f): (&str, f64, alloc::boxed::Box<dyn Fn(&[f64]) -> f64>) = match t % 4 {
            0 => ("cone", 1.0, alloc::boxed::Box::new(|x: &[f64]| x.iter().map(|v| math::abs(*v)).sum())),
            1 => (
                "affine",
                g.iter().map(|v| math::abs(*v)).fold(0.0, f64::max),
                alloc::boxed::Box::new(move |x: &[f64]| dot(x) + 0.5),
            ),
            2 => ("constant", 0.0, alloc::boxed::Box::new(|_: &[f64]| 3.0)),
            _ => {
                let known = g
                    .iter()
                    .zip(&c)
                    .map(|(a, b)| math::abs(*a) + b)
                    .fold(0.0, f64::max);
                let (g, c, s) = (g.clone(), c.clone(), s.clone());
                (
                    "separable",
                    known,
                    alloc::boxed::Box::new(move |x: &[f64]| {
                        x.iter()
                            .enumerate()
                            .map(|(j, v)| g[j] * v + c[j] * math::abs(v - s[j]))
                            .sum()
                    }),
                )
            }
        };
        let sub_seed = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(t as u64);
        let restricted = sampled_seminorm(&f, &domain, samples, Some(1.0), sub_seed)?;
        let unrestricted = sampled_seminorm(&f, &domain, samples, None, sub_seed)?;
        let close = |est: f64| {
            if known == 0.0 {
                est <= 1e-12
            } else {
                math::abs(est - known) <= LOCAL_LIP_RTOL * known && est <= known * (1.0 + 1e-9)
            }
        };
        if known > 0.0 {
            max_rel = max_rel
                .max(math::abs(restricted - known) / known)
                .max(math::abs(unrestricted - known) / known);
        }
        rows.push(LocalLipRow {
            trial: t,
            kind: kind.into(),
            known,
            restricted,
            unrestricted,
            pass: close(restricted) && close(unrestricted),
        });
    }
    let all_pass = rows.iter().all(|r| r.pass);
    Ok(LocalLipReport {
        rows,
        max_relative_error: max_rel,
        all_pass,
    })
}
