//! Iterated attention: particle trajectories, fixed points with input
//! injection, and inversion of residual blocks.
//!
//! Distances between clouds of paired particles use the sup over particles of
//! the per-particle ℓ1 distance.

use alloc::vec::Vec;

use crate::bounds::{self, BoundStatus};
use crate::error::{Error, Result};
use crate::kernels::{self, AttentionConfig, FfnConfig, MultiHeadConfig};
use crate::linalg::Matrix;
use crate::measures::{check_dim, empirical, DomainBox, PointCloud};
use crate::potentials::SamplingConfig;
use crate::probes::random_cloud;
use crate::rng;
use crate::transport;

/// One layer acting on a cloud of particles.
#[derive(Debug, Clone)]
pub enum Layer {
    Attention(AttentionConfig),
    Transformer { mh: MultiHeadConfig, ffn: FfnConfig },
}

impl Layer {
    pub fn apply(&self, x: &PointCloud) -> Result<PointCloud> {
        match self {
            Layer::Attention(cfg) => kernels::self_attention(cfg, x),
            Layer::Transformer { mh, ffn } => kernels::transformer_layer(mh, ffn, x),
        }
    }

    pub fn dim_in(&self) -> usize {
        match self {
            Layer::Attention(cfg) => cfg.key_dim(),
            Layer::Transformer { mh, .. } => mh.dim_in(),
        }
    }

    pub fn dim_out(&self) -> usize {
        match self {
            Layer::Attention(cfg) => cfg.value_dim(),
            Layer::Transformer { ffn, .. } => ffn.dim(),
        }
    }

    fn check_square(&self) -> Result<()> {
        check_dim(self.dim_in(), self.dim_out())
    }

    /// Closed-form Lipschitz constant of the particle map on `domain`, when
    /// one is available. For self-attention on paired particles the
    /// per-particle decomposition of the contraction bound gives
    /// `‖A(X)_i - A(Y)_i‖₁ ≤ τ(A) sup_j ‖x_j - y_j‖₁`.
    pub fn certified_lipschitz(&self, domain: &DomainBox, sampling: &SamplingConfig) -> Option<bounds::BoundReport> {
        match self {
            Layer::Attention(cfg) => {
                let r = bounds::bound_bounded_contraction(cfg, domain, sampling);
                (r.status != BoundStatus::Inapplicable).then_some(r)
            }
            Layer::Transformer { .. } => None,
        }
    }
}

/// The same layer at every step, or one layer per step.
#[derive(Debug, Clone)]
pub enum Schedule {
    Tied(Layer),
    Untied(Vec<Layer>),
}

impl Schedule {
    fn layer(&self, h: usize) -> Option<&Layer> {
        match self {
            Schedule::Tied(l) => Some(l),
            Schedule::Untied(ls) => ls.get(h),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `steps + 1` states, starting with the input.
    pub states: Vec<PointCloud>,
    /// `W1(m(states[h]), m(states[h + 1]))`.
    pub per_step_w1: Vec<f64>,
}

/// Applies the schedule `steps` times, recording each configuration.
pub fn run_particles(schedule: &Schedule, x0: &PointCloud, steps: usize) -> Result<Trajectory> {
    if let Schedule::Untied(ls) = schedule {
        if ls.len() < steps {
            return Err(Error::SizeMismatch {
                left: steps,
                right: ls.len(),
            });
        }
    }
    let mut states = Vec::with_capacity(steps + 1);
    let mut per_step_w1 = Vec::with_capacity(steps);
    states.push(x0.clone());
    for h in 0..steps {
        let layer = schedule.layer(h).expect("length checked");
        layer.check_square()?;
        let next = layer.apply(&states[h])?;
        let w = transport::w1(&empirical(states[h].clone()), &empirical(next.clone()))?.value;
        per_step_w1.push(w);
        states.push(next);
    }
    Ok(Trajectory { states, per_step_w1 })
}

/// How the input enters the fixed-point map `H ↦ g(H + s(X))`.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Injection {
    /// `s(X) = X`.
    #[default]
    AddInput,
    /// `s(x) = W x + b` per particle.
    Affine { weight: Matrix, bias: Vec<f64> },
}

impl Injection {
    pub fn apply(&self, x: &PointCloud) -> Result<PointCloud> {
        match self {
            Injection::AddInput => Ok(x.clone()),
            Injection::Affine { weight, bias } => {
                check_dim(weight.rows(), bias.len())?;
                x.map_points(weight.rows(), |p| {
                    let mut out = weight.apply(p)?;
                    out.iter_mut().zip(bias).for_each(|(o, b)| *o += b);
                    Ok(out)
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeqResult {
    pub h_star: PointCloud,
    pub iterations: usize,
    /// Size of the last step `‖H_k - H_{k-1}‖`.
    pub residual: f64,
    /// Largest ratio of successive step sizes.
    pub contraction_estimate: f64,
    pub converged: bool,
    pub step_norms: Vec<f64>,
}

/// Picard iteration `H_{k+1} = g(H_k + s(X))` until a step is below `tol`.
///
/// Running out of iterations is reported through `converged`, not an error.
pub fn deq_solve(
    layer: &Layer,
    x: &PointCloud,
    h0: &PointCloud,
    injection: &Injection,
    tol: f64,
    max_iter: usize,
) -> Result<DeqResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput("tolerance must be positive"));
    }
    layer.check_square()?;
    let s = injection.apply(x)?;
    h0.check_same_shape(&s)?;
    check_dim(layer.dim_in(), s.dim())?;
    let mut h = h0.clone();
    let mut steps = Vec::new();
    let mut contraction = 0.0f64;
    let mut converged = false;
    for _ in 0..max_iter {
        let next = layer.apply(&h.add(&s)?)?;
        let step = next.sup_l1_distance(&h)?;
        if let Some(&prev) = steps.last() {
            if prev > 0.0 {
                contraction = contraction.max(step / prev);
            }
        }
        steps.push(step);
        h = next;
        if step < tol {
            converged = true;
            break;
        }
    }
    Ok(DeqResult {
        h_star: h,
        iterations: steps.len(),
        residual: steps.last().copied().unwrap_or(f64::INFINITY),
        contraction_estimate: contraction,
        converged,
        step_norms: steps,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Inversion {
    pub x: PointCloud,
    pub iterations: usize,
    /// `‖x + g(x) - y‖` at the returned `x`.
    pub residual: f64,
    pub converged: bool,
}

/// Solves `x + g(x) = y` by the iteration `x ← y - g(x)`, starting at `y`.
pub fn invert_residual(layer: &Layer, y: &PointCloud, tol: f64, max_iter: usize) -> Result<Inversion> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput("tolerance must be positive"));
    }
    layer.check_square()?;
    check_dim(layer.dim_in(), y.dim())?;
    let mut x = y.clone();
    for k in 0..=max_iter {
        let gx = layer.apply(&x)?;
        let residual = x.add(&gx)?.sup_l1_distance(y)?;
        if residual <= tol || k == max_iter {
            return Ok(Inversion {
                x,
                iterations: k,
                residual,
                converged: residual <= tol,
            });
        }
        x = y.sub(&gx)?;
    }
    unreachable!("loop returns on its last iteration")
}

/// `x + g(x)`.
pub fn residual_forward(layer: &Layer, x: &PointCloud) -> Result<PointCloud> {
    x.add(&layer.apply(x)?)
}

/// Sampled Lipschitz constant of the particle map in the sup-ℓ1 norm: random
/// clouds of `n` particles in the box, each paired with a perturbed copy at a
/// random scale.
pub fn sampled_lipschitz(layer: &Layer, domain: &DomainBox, n: usize, pairs: usize, seed: u64) -> Result<f64> {
    let (lower, upper) = domain.bounds().ok_or(Error::RequiresCompactDomain)?;
    check_dim(layer.dim_in(), lower.len())?;
    if n == 0 {
        return Err(Error::EmptySupport);
    }
    let mut best = 0.0f64;
    for t in 0..pairs {
        let mut r = rng::stream_rng(seed, t as u64);
        let x = random_cloud(&mut r, n, lower, upper);
        let scale = [1e-3, 1e-2, 1e-1, 1.0][t % 4];
        let d = x.dim();
        let data = x
            .as_flat()
            .iter()
            .enumerate()
            .map(|(i, v)| (v + scale * rng::standard_normal(&mut r)).clamp(lower[i % d], upper[i % d]))
            .collect();
        let y = PointCloud::new(d, data)?;
        let den = x.sup_l1_distance(&y)?;
        if den > 0.0 {
            best = best.max(layer.apply(&x)?.sup_l1_distance(&layer.apply(&y)?)? / den);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::Lookup;
    use crate::potentials::{Potential, Similarity};
    use alloc::sync::Arc;
    use alloc::vec;

    fn cloud(rows: &[&[f64]]) -> PointCloud {
        PointCloud::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn shrunk(alpha: f64) -> Layer {
        Layer::Attention(AttentionConfig::new(Potential::dot_product(2, 0.1), Lookup::Linear(Matrix::scaled_identity(2, alpha))).unwrap())
    }

    fn zero_layer(d: usize) -> Layer {
        Layer::Attention(AttentionConfig::new(Potential::gaussian(d), Lookup::Linear(Matrix::zeros(d, d))).unwrap())
    }

    #[test]
    fn zero_steps_returns_input() {
        let x = cloud(&[&[0.0, 1.0], &[2.0, 3.0]]);
        let t = run_particles(&Schedule::Tied(shrunk(0.5)), &x, 0).unwrap();
        assert_eq!(t.states, vec![x]);
        assert!(t.per_step_w1.is_empty());
    }

    #[test]
    fn constant_potential_collapses_to_barycenter() {
        let layer = Layer::Attention(AttentionConfig::new(Potential::constant(1), Lookup::Identity).unwrap());
        let x = cloud(&[&[0.0], &[1.0], &[5.0]]);
        let t = run_particles(&Schedule::Tied(layer), &x, 3).unwrap();
        for p in t.states[1].points() {
            assert!((p[0] - 2.0).abs() < 1e-15);
        }
        assert_eq!(t.per_step_w1[1], 0.0);
        assert_eq!(t.per_step_w1[2], 0.0);
    }

    #[test]
    fn untied_schedule_needs_enough_layers() {
        let x = cloud(&[&[0.0, 0.0]]);
        assert!(run_particles(&Schedule::Untied(vec![shrunk(0.1)]), &x, 2).is_err());
        assert!(run_particles(&Schedule::Untied(vec![shrunk(0.1), shrunk(0.2)]), &x, 2).is_ok());
    }

    #[test]
    fn zero_map_fixed_point_in_one_step() {
        let x = cloud(&[&[0.3, -0.2], &[0.1, 0.4]]);
        let r = deq_solve(&zero_layer(2), &x, &x, &Injection::AddInput, 1e-12, 10).unwrap();
        assert!(r.converged);
        assert_eq!(r.h_star, cloud(&[&[0.0, 0.0], &[0.0, 0.0]]));
        assert_eq!(r.iterations, 2);
    }

    #[test]
    fn contraction_gives_unique_data_dependent_fixed_point() {
        let x = cloud(&[&[0.3, -0.2], &[0.1, 0.4], &[-0.5, 0.0]]);
        let h0 = cloud(&[&[0.5, 0.5], &[-0.5, 0.2], &[0.0, 0.1]]);
        let h1 = cloud(&[&[-0.4, 0.0], &[0.3, -0.3], &[0.2, 0.2]]);
        let a = deq_solve(&shrunk(0.15), &x, &h0, &Injection::AddInput, 1e-13, 500).unwrap();
        let b = deq_solve(&shrunk(0.15), &x, &h1, &Injection::AddInput, 1e-13, 500).unwrap();
        assert!(a.converged && b.converged);
        assert!(a.h_star.sup_l1_distance(&b.h_star).unwrap() <= 1e-8);
        let other = x.translated(&[0.2, 0.1]).unwrap();
        let c = deq_solve(&shrunk(0.15), &other, &h0, &Injection::AddInput, 1e-13, 500).unwrap();
        assert!(c.h_star.sup_l1_distance(&a.h_star).unwrap() > 1e-3);
    }

    #[test]
    fn non_convergence_is_reported() {
        let x = cloud(&[&[0.3, -0.2], &[0.1, 0.4]]);
        let r = deq_solve(&shrunk(0.15), &x, &x, &Injection::AddInput, 1e-300, 3).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 3);
    }

    #[test]
    fn affine_injection() {
        let inj = Injection::Affine {
            weight: Matrix::scaled_identity(2, 2.0),
            bias: vec![1.0, 0.0],
        };
        assert_eq!(inj.apply(&cloud(&[&[1.0, 2.0]])).unwrap(), cloud(&[&[3.0, 4.0]]));
    }

    #[test]
    fn zero_residual_branch_inverts_trivially() {
        let y = cloud(&[&[0.3, -0.2], &[0.1, 0.4]]);
        let inv = invert_residual(&zero_layer(2), &y, 1e-12, 10).unwrap();
        assert_eq!(inv.x, y);
        assert_eq!(inv.iterations, 0);
    }

    #[test]
    fn residual_round_trip() {
        let layer = shrunk(0.1);
        let x = cloud(&[&[0.3, -0.2], &[0.1, 0.4], &[-0.7, 0.9]]);
        let y = residual_forward(&layer, &x).unwrap();
        let inv = invert_residual(&layer, &y, 1e-12, 200).unwrap();
        assert!(inv.converged);
        assert!(inv.x.sup_l1_distance(&x).unwrap() <= 1e-8);
    }

    #[test]
    fn sampled_lipschitz_of_scaled_identity_layer() {
        // a ≡ 0 makes every particle the mean, scaled by α: Lip = α in sup-ℓ1
        let f = |_: &[f64], _: &[f64]| 0.0;
        let layer = Layer::Attention(
            AttentionConfig::new(
                Potential::custom(2, Similarity::new("zero", Arc::new(f))),
                Lookup::Linear(Matrix::scaled_identity(2, 0.5)),
            )
            .unwrap(),
        );
        let e = DomainBox::cube(2, -1.0, 1.0).unwrap();
        let l = sampled_lipschitz(&layer, &e, 1, 40, 0).unwrap();
        assert!((l - 0.5).abs() < 1e-12);
    }

    #[test]
    fn certified_bound_of_shrunk_layer_is_below_one() {
        let e = DomainBox::cube(2, -1.0, 1.0).unwrap();
        let r = shrunk(0.15).certified_lipschitz(&e, &SamplingConfig::default()).unwrap();
        assert_eq!(r.status, BoundStatus::Applicable);
        assert!(r.value < 0.9, "{}", r.value);
    }
}
