//! Kernel pipeline versus matrix-form attention on random instances.
//!
//! Each instance is generated as raw numbers first. The kernel side builds
//! library objects from them; the oracle side evaluates similarities, values
//! and output projections with plain loops and [`reference_attention`].

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kernels::{self, reference_attention, AttentionConfig, Head, Lookup, MultiHeadConfig};
use crate::linalg::Matrix;
use crate::math;
use crate::measures::{EmpiricalMeasure, PointCloud};
use crate::potentials::{Potential, Similarity};
use crate::rng::{self, StreamRng};

use super::random_cloud;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct EquivalenceConfig {
    pub instances: usize,
    pub multi_head_instances: usize,
    pub dims: Vec<usize>,
    pub n_max: usize,
    pub heads: Vec<usize>,
    pub seed: u64,
    pub tolerance: f64,
    /// Perturbs one measure weight on the kernel side; the run must then fail.
    pub sabotage: bool,
}

impl Default for EquivalenceConfig {
    fn default() -> Self {
        Self {
            instances: 100,
            multi_head_instances: 20,
            dims: vec![1, 2, 4, 8],
            n_max: 16,
            heads: vec![1, 2, 4],
            seed: 0,
            tolerance: 1e-10,
            sabotage: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct WorstInstance {
    pub index: usize,
    pub description: String,
    pub dim: usize,
    pub n: usize,
    pub deviation: f64,
    pub points: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct EquivalenceReport {
    pub instances: usize,
    pub max_deviation: f64,
    pub worst: Option<WorstInstance>,
    pub multi_head_instances: usize,
    pub multi_head_max_deviation: f64,
    pub multi_head_worst: Option<WorstInstance>,
    pub tolerance: f64,
    pub passed: bool,
}

type Rows = Vec<Vec<f64>>;

#[derive(Clone)]
enum RawSimilarity {
    Gaussian,
    Dot(f64),
    Scaled(Rows, Rows, f64),
    NegL1(f64),
}

#[derive(Clone)]
enum RawValues {
    Identity,
    Linear(Rows),
    Tanh,
}

fn mat_vec(m: &Rows, x: &[f64]) -> Vec<f64> {
    m.iter()
        .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

impl RawSimilarity {
    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            RawSimilarity::Gaussian => -x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(),
            RawSimilarity::Dot(s) => s * x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>(),
            RawSimilarity::Scaled(wq, wk, s) => {
                let (qx, ky) = (mat_vec(wq, x), mat_vec(wk, y));
                s * qx.iter().zip(&ky).map(|(a, b)| a * b).sum::<f64>()
            }
            RawSimilarity::NegL1(c) => -c * x.iter().zip(y).map(|(a, b)| math::abs(a - b)).sum::<f64>(),
        }
    }

    fn potential(&self, d: usize) -> Result<Potential> {
        Ok(match self {
            RawSimilarity::Gaussian => Potential::gaussian(d),
            RawSimilarity::Dot(s) => Potential::dot_product(d, *s),
            RawSimilarity::Scaled(wq, wk, s) => Potential::scaled_dot_product(Matrix::from_rows(wq)?, Matrix::from_rows(wk)?, *s)?,
            RawSimilarity::NegL1(c) => {
                let c = *c;
                let f = move |x: &[f64], y: &[f64]| -c * crate::linalg::l1_distance(x, y);
                Potential::custom(d, Similarity::new("neg_l1", Arc::new(f)))
            }
        })
    }

    fn name(&self) -> &'static str {
        match self {
            RawSimilarity::Gaussian => "gaussian",
            RawSimilarity::Dot(_) => "dot_product",
            RawSimilarity::Scaled(..) => "scaled_dot_product",
            RawSimilarity::NegL1(_) => "custom",
        }
    }
}

impl RawValues {
    fn eval(&self, k: &[f64]) -> Vec<f64> {
        match self {
            RawValues::Identity => k.to_vec(),
            RawValues::Linear(w) => mat_vec(w, k),
            RawValues::Tanh => k.iter().map(|v| math::tanh(*v)).collect(),
        }
    }

    fn lookup(&self, d: usize) -> Result<Lookup> {
        Ok(match self {
            RawValues::Identity => Lookup::Identity,
            RawValues::Linear(w) => Lookup::Linear(Matrix::from_rows(w)?),
            RawValues::Tanh => {
                let f = |k: &[f64]| k.iter().map(|v| math::tanh(*v)).collect();
                Lookup::function("tanh", d, d, 1.0, Arc::new(f))?
            }
        })
    }

    fn name(&self) -> &'static str {
        match self {
            RawValues::Identity => "identity",
            RawValues::Linear(_) => "linear",
            RawValues::Tanh => "function",
        }
    }
}

fn random_matrix(rng: &mut StreamRng, rows: usize, cols: usize) -> Rows {
    (0..rows)
        .map(|_| (0..cols).map(|_| rng::uniform_in(rng, -1.0, 1.0)).collect())
        .collect()
}

fn random_similarity(rng: &mut StreamRng, kind: usize, d: usize) -> RawSimilarity {
    match kind % 4 {
        0 => RawSimilarity::Gaussian,
        1 => RawSimilarity::Dot(1.0 / math::sqrt(d as f64)),
        2 => {
            let dp = 1 + rng::index(rng, d);
            RawSimilarity::Scaled(random_matrix(rng, dp, d), random_matrix(rng, dp, d), 1.0 / math::sqrt(dp as f64))
        }
        _ => RawSimilarity::NegL1(rng::uniform_in(rng, 0.1, 2.0)),
    }
}

fn random_values(rng: &mut StreamRng, kind: usize, d: usize) -> RawValues {
    match kind % 3 {
        0 => RawValues::Identity,
        1 => {
            let dv = 1 + rng::index(rng, d);
            RawValues::Linear(random_matrix(rng, dv, d))
        }
        _ => RawValues::Tanh,
    }
}

fn rows_deviation(a: &PointCloud, b: &[Vec<f64>]) -> f64 {
    a.points()
        .zip(b)
        .flat_map(|(p, q)| p.iter().zip(q).map(|(x, y)| math::abs(x - y)))
        .fold(0.0, f64::max)
}

fn oracle_head(sim: &RawSimilarity, values: &RawValues, x: &PointCloud) -> Result<Rows> {
    let v_rows: Rows = x.points().map(|k| values.eval(k)).collect();
    let v = PointCloud::from_rows(&v_rows)?;
    x.points()
        .map(|q| reference_attention(|a: &[f64], b: &[f64]| sim.eval(a, b), q, x, &v))
        .collect()
}

const MULTI_HEAD_STREAM: u64 = 1 << 40;

/// Runs both suites and reports the largest deviations.
pub fn run_equivalence(cfg: &EquivalenceConfig) -> Result<EquivalenceReport> {
    if cfg.dims.is_empty() || cfg.dims.contains(&0) || cfg.n_max == 0 {
        return Err(Error::InvalidInput("equivalence needs positive dims and n_max"));
    }
    if cfg.multi_head_instances > 0 && (cfg.heads.is_empty() || cfg.heads.contains(&0)) {
        return Err(Error::InvalidInput("equivalence needs positive head counts"));
    }
    let mut max_dev = 0.0f64;
    let mut worst: Option<WorstInstance> = None;
    for t in 0..cfg.instances {
        let mut rng = rng::stream_rng(cfg.seed, t as u64);
        let d = cfg.dims[rng::index(&mut rng, cfg.dims.len())];
        let n = 1 + rng::index(&mut rng, cfg.n_max);
        let x = random_cloud(&mut rng, n, &vec![-1.5; d], &vec![1.5; d]);
        let sim = random_similarity(&mut rng, t, d);
        let values = random_values(&mut rng, t / 4, d);

        let attn = AttentionConfig::new(sim.potential(d)?, values.lookup(d)?)?;
        let kernel_out = if cfg.sabotage && n >= 2 {
            let mut w = vec![1.0 / n as f64; n];
            w[0] += 1e-3;
            w[1] -= 1e-3;
            let mu = EmpiricalMeasure::new(x.clone(), w)?;
            kernels::self_attention_measure(&attn, &mu)?.into_parts().0
        } else {
            kernels::self_attention(&attn, &x)?
        };
        let oracle = oracle_head(&sim, &values, &x)?;
        let dev = rows_deviation(&kernel_out, &oracle);
        if worst.is_none() || dev > max_dev {
            max_dev = max_dev.max(dev);
            worst = Some(WorstInstance {
                index: t,
                description: format!("{} potential, {} lookup", sim.name(), values.name()),
                dim: d,
                n,
                deviation: dev,
                points: x.to_rows(),
            });
        }
    }

    let mut mh_dev = 0.0f64;
    let mut mh_worst: Option<WorstInstance> = None;
    for t in 0..cfg.multi_head_instances {
        let mut rng = rng::stream_rng(cfg.seed, MULTI_HEAD_STREAM + t as u64);
        let d = cfg.dims[rng::index(&mut rng, cfg.dims.len())];
        let h = cfg.heads[rng::index(&mut rng, cfg.heads.len())];
        let n = 1 + rng::index(&mut rng, cfg.n_max);
        let x = random_cloud(&mut rng, n, &vec![-1.5; d], &vec![1.5; d]);
        let dh = (d / h).max(1);
        let mut heads = Vec::with_capacity(h);
        let mut raw = Vec::with_capacity(h);
        for _ in 0..h {
            let sim = if rng::index(&mut rng, 2) == 0 {
                RawSimilarity::Gaussian
            } else {
                RawSimilarity::Scaled(random_matrix(&mut rng, dh, d), random_matrix(&mut rng, dh, d), 1.0 / math::sqrt(dh as f64))
            };
            let values = RawValues::Linear(random_matrix(&mut rng, dh, d));
            let w_o = random_matrix(&mut rng, d, dh);
            heads.push(Head {
                attention: AttentionConfig::new(sim.potential(d)?, values.lookup(d)?)?,
                w_o: Matrix::from_rows(&w_o)?,
            });
            raw.push((sim, values, w_o));
        }
        let kernel_out = kernels::multi_head(&MultiHeadConfig::new(heads)?, &x)?;

        // concat per-head outputs, then multiply by [W_O^1 … W_O^H]
        let per_head: Vec<Rows> = raw
            .iter()
            .map(|(s, v, _)| oracle_head(s, v, &x))
            .collect::<Result<_>>()?;
        let oracle: Rows = (0..n)
            .map(|i| {
                let concat: Vec<f64> = per_head.iter().flat_map(|rows| rows[i].iter().copied()).collect();
                (0..d)
                    .map(|r| {
                        let stacked_row: Vec<f64> = raw.iter().flat_map(|(_, _, w_o)| w_o[r].iter().copied()).collect();
                        stacked_row.iter().zip(&concat).map(|(a, b)| a * b).sum()
                    })
                    .collect()
            })
            .collect();
        let dev = rows_deviation(&kernel_out, &oracle);
        if mh_worst.is_none() || dev > mh_dev {
            mh_dev = mh_dev.max(dev);
            mh_worst = Some(WorstInstance {
                index: t,
                description: format!("{h} heads"),
                dim: d,
                n,
                deviation: dev,
                points: x.to_rows(),
            });
        }
    }

    Ok(EquivalenceReport {
        instances: cfg.instances,
        max_deviation: max_dev,
        worst,
        multi_head_instances: cfg.multi_head_instances,
        multi_head_max_deviation: mh_dev,
        multi_head_worst: mh_worst,
        tolerance: cfg.tolerance,
        passed: max_dev <= cfg.tolerance && mh_dev <= cfg.tolerance,
    })
}
