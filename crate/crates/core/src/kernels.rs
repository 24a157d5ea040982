//! Attention as a composition of Markov kernels.
//!
//! For a query `q` and a measure `μ` over keys, the attention kernel is
//! `A_μ(q, ·) = Π[Ψ_{G(q,·)}(μ) L]`: reweight `μ` by the potential (softmatch),
//! push the reweighted keys through the lookup `ℓ`, and collapse the result to
//! the Dirac at its barycenter. Self-attention is the map `μ ↦ μ A_μ`.
//!
//! [`reference_attention`] and [`reference_multi_head`] compute the same
//! quantities in the usual matrix form and serve as independent oracles.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::math;
use crate::measures::{barycenter, check_dim, empirical, EmpiricalMeasure, PointCloud};
use crate::potentials::Potential;

pub type VectorMap = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Deterministic lookup kernel `L(k, dv) = δ_{ℓ(k)}(dv)`.
#[derive(Clone)]
pub enum Lookup {
    Identity,
    /// `ℓ(k) = W_V k`, `W_V` of shape `d_v × d_k`.
    Linear(Matrix),
    Function {
        name: String,
        map: VectorMap,
        in_dim: usize,
        out_dim: usize,
        /// ℓ1 Lipschitz constant of `map`, supplied by the caller.
        lip: f64,
    },
}

impl fmt::Debug for Lookup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Lookup::Identity => f.write_str("Identity"),
            Lookup::Linear(m) => f.debug_tuple("Linear").field(m).finish(),
            Lookup::Function { name, lip, .. } => f
                .debug_struct("Function")
                .field("name", name)
                .field("lip", lip)
                .finish(),
        }
    }
}

impl Lookup {
    pub fn function(
        name: impl Into<String>,
        in_dim: usize,
        out_dim: usize,
        lip: f64,
        map: VectorMap,
    ) -> Result<Self> {
        if !(lip >= 0.0) {
            return Err(Error::InvalidInput("lookup Lipschitz constant must be nonnegative"));
        }
        Ok(Lookup::Function {
            name: name.into(),
            map,
            in_dim,
            out_dim,
            lip,
        })
    }

    /// `‖ℓ‖_Lip` in the ℓ1 metric.
    pub fn lip_ell(&self) -> f64 {
        match self {
            Lookup::Identity => 1.0,
            Lookup::Linear(w) => w.l1_operator_norm(),
            Lookup::Function { lip, .. } => *lip,
        }
    }

    /// Value dimension for keys of dimension `key_dim`.
    pub fn out_dim(&self, key_dim: usize) -> usize {
        match self {
            Lookup::Identity => key_dim,
            Lookup::Linear(w) => w.rows(),
            Lookup::Function { out_dim, .. } => *out_dim,
        }
    }

    fn check_input(&self, key_dim: usize) -> Result<()> {
        match self {
            Lookup::Identity => Ok(()),
            Lookup::Linear(w) => check_dim(w.cols(), key_dim),
            Lookup::Function { in_dim, .. } => check_dim(*in_dim, key_dim),
        }
    }

    pub fn apply_point(&self, k: &[f64]) -> Result<Vec<f64>> {
        self.check_input(k.len())?;
        match self {
            Lookup::Identity => Ok(k.to_vec()),
            Lookup::Linear(w) => w.apply(k),
            Lookup::Function { map, out_dim, .. } => {
                let v = map(k);
                check_dim(*out_dim, v.len())?;
                if v.iter().any(|c| !c.is_finite()) {
                    return Err(Error::NonFinite("lookup output"));
                }
                Ok(v)
            }
        }
    }

    pub fn apply_cloud(&self, keys: &PointCloud) -> Result<PointCloud> {
        self.check_input(keys.dim())?;
        match self {
            Lookup::Identity => Ok(keys.clone()),
            _ => keys.map_points(self.out_dim(keys.dim()), |k| self.apply_point(k)),
        }
    }
}

/// Potential plus lookup: everything one attention head needs.
#[derive(Debug, Clone)]
pub struct AttentionConfig {
    pub potential: Potential,
    pub lookup: Lookup,
}

impl AttentionConfig {
    pub fn new(potential: Potential, lookup: Lookup) -> Result<Self> {
        lookup.check_input(potential.dim())?;
        Ok(Self { potential, lookup })
    }

    pub fn key_dim(&self) -> usize {
        self.potential.dim()
    }

    pub fn value_dim(&self) -> usize {
        self.lookup.out_dim(self.potential.dim())
    }
}

/// Softmatch weights `w_i ∝ ν_i G(q, k_i)`, computed with a max shift in log space.
pub fn softmatch_weights(g: &Potential, q: &[f64], nu: &EmpiricalMeasure) -> Result<Vec<f64>> {
    check_dim(g.dim(), q.len())?;
    check_dim(g.dim(), nu.dim())?;
    if q.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("query has non-finite coordinates"));
    }
    let mut logw = Vec::with_capacity(nu.len());
    for (k, w) in nu.atoms() {
        let a = g.similarity_unchecked(q, k);
        if !a.is_finite() {
            return Err(Error::InvalidInput("similarity is not finite"));
        }
        logw.push(if w > 0.0 { math::ln(w) + a } else { f64::NEG_INFINITY });
    }
    let shift = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut weights: Vec<f64> = logw.iter().map(|l| math::exp(l - shift)).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(weights)
}

/// `δ_q Ψ_G(ν)`: the measure on ν's support reweighted by `G(q, ·)`.
pub fn softmatch_measure(g: &Potential, q: &[f64], nu: &EmpiricalMeasure) -> Result<EmpiricalMeasure> {
    let w = softmatch_weights(g, q, nu)?;
    Ok(EmpiricalMeasure::from_normalized(nu.support().clone(), w))
}

/// Pushforward `μ L`: support mapped through `ℓ`, weights unchanged.
pub fn apply_lookup(lookup: &Lookup, mu: &EmpiricalMeasure) -> Result<EmpiricalMeasure> {
    Ok(mu.with_support(lookup.apply_cloud(mu.support())?))
}

/// Location of the output Dirac of `A_μ(q, ·)`.
pub fn attention_kernel(cfg: &AttentionConfig, q: &[f64], mu: &EmpiricalMeasure) -> Result<Vec<f64>> {
    let weighted = softmatch_measure(&cfg.potential, q, mu)?;
    Ok(barycenter(&apply_lookup(&cfg.lookup, &weighted)?))
}

/// `A_μ(q, ·)` with the lookup values of `μ`'s support precomputed.
fn attend(cfg: &AttentionConfig, q: &[f64], mu: &EmpiricalMeasure, values: &PointCloud) -> Result<Vec<f64>> {
    let w = softmatch_weights(&cfg.potential, q, mu)?;
    Ok(barycenter(&EmpiricalMeasure::from_normalized(values.clone(), w)))
}

/// Textbook attention `Σ_i softmax_i(a(q, k_·)) v_i`, written independently of
/// the kernel pipeline (direct max-shifted exponentials, natural order).
pub fn reference_attention<A>(a: A, q: &[f64], keys: &PointCloud, values: &PointCloud) -> Result<Vec<f64>>
where
    A: Fn(&[f64], &[f64]) -> f64,
{
    if keys.len() != values.len() {
        return Err(Error::KeyValueMismatch {
            keys: keys.len(),
            values: values.len(),
        });
    }
    check_dim(keys.dim(), q.len())?;
    let scores: Vec<f64> = keys.points().map(|k| a(q, k)).collect();
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = scores.iter().map(|s| math::exp(s - m)).collect();
    let z: f64 = e.iter().sum();
    let mut out = vec![0.0; values.dim()];
    for (ei, v) in e.iter().zip(values.points()) {
        for (o, vk) in out.iter_mut().zip(v) {
            *o += ei * vk;
        }
    }
    out.iter_mut().for_each(|o| *o /= z);
    Ok(out)
}

/// `μ ↦ μ A_μ` for a weighted measure: output atom `i` sits at
/// `A_μ(x_i, ·)` and keeps weight `w_i`.
pub fn self_attention_measure(cfg: &AttentionConfig, mu: &EmpiricalMeasure) -> Result<EmpiricalMeasure> {
    check_dim(cfg.key_dim(), mu.dim())?;
    let values = cfg.lookup.apply_cloud(mu.support())?;
    let out = mu
        .support()
        .map_points(values.dim(), |x| attend(cfg, x, mu, &values))?;
    Ok(mu.with_support(out))
}

/// Self-attention on a cloud: every `x_i` attends over `m(X)`.
pub fn self_attention(cfg: &AttentionConfig, x: &PointCloud) -> Result<PointCloud> {
    let (cloud, _) = self_attention_measure(cfg, &empirical(x.clone()))?.into_parts();
    Ok(cloud)
}

/// One head: attention followed by its output projection `W_O` (`d_out × d_v`).
#[derive(Debug, Clone)]
pub struct Head {
    pub attention: AttentionConfig,
    pub w_o: Matrix,
}

#[derive(Debug, Clone)]
pub struct MultiHeadConfig {
    heads: Vec<Head>,
    dim_in: usize,
    dim_out: usize,
}

impl MultiHeadConfig {
    pub fn new(heads: Vec<Head>) -> Result<Self> {
        let first = heads.first().ok_or(Error::InvalidInput("multi-head needs at least one head"))?;
        let dim_in = first.attention.key_dim();
        let dim_out = first.w_o.rows();
        for h in &heads {
            check_dim(dim_in, h.attention.key_dim())?;
            check_dim(dim_out, h.w_o.rows())?;
            check_dim(h.attention.value_dim(), h.w_o.cols())?;
        }
        Ok(Self {
            heads,
            dim_in,
            dim_out,
        })
    }

    /// A single head with `W_O = I`.
    pub fn single(attention: AttentionConfig) -> Result<Self> {
        let w_o = Matrix::identity(attention.value_dim());
        Self::new(vec![Head { attention, w_o }])
    }

    pub fn heads(&self) -> &[Head] {
        &self.heads
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }
}

/// Mixture kernel `(1/H) Σ_h A^h O^h` with `O^h(y, ·) = δ_{H · W_O^h y}`.
///
/// The factor `H` inside `O^h` cancels the `1/H` mixture weight, so each output
/// equals the concat-and-project form `Σ_h W_O^h y^h`.
pub fn multi_head(cfg: &MultiHeadConfig, x: &PointCloud) -> Result<PointCloud> {
    check_dim(cfg.dim_in, x.dim())?;
    let h = cfg.heads.len();
    let hf = h as f64;
    let head_outputs = cfg
        .heads
        .iter()
        .map(|head| self_attention(&head.attention, x))
        .collect::<Result<Vec<_>>>()?;
    let mut data = Vec::with_capacity(x.len() * cfg.dim_out);
    for i in 0..x.len() {
        let mut atoms = Vec::with_capacity(h * cfg.dim_out);
        for (head, out) in cfg.heads.iter().zip(&head_outputs) {
            atoms.extend(head.w_o.apply(out.point(i))?.into_iter().map(|v| v * hf));
        }
        let mixture = EmpiricalMeasure::from_normalized(PointCloud::new(cfg.dim_out, atoms)?, vec![1.0 / hf; h]);
        data.extend(barycenter(&mixture));
    }
    PointCloud::new(cfg.dim_out, data)
}

/// Matrix-form multi-head attention: per-head softmax(scores)·V, heads
/// concatenated, then one product with the stacked output matrix.
pub fn reference_multi_head(cfg: &MultiHeadConfig, x: &PointCloud) -> Result<PointCloud> {
    let n = x.len();
    let mut concat: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut stacked_cols: Vec<Vec<f64>> = Vec::new();
    for head in &cfg.heads {
        let values = head.attention.lookup.apply_cloud(x)?;
        for (i, q) in x.points().enumerate() {
            let a = |q: &[f64], k: &[f64]| head.attention.potential.similarity_unchecked(q, k);
            concat[i].extend(reference_attention(a, q, x, &values)?);
        }
        for c in 0..head.w_o.cols() {
            stacked_cols.push((0..head.w_o.rows()).map(|r| head.w_o.get(r, c)).collect());
        }
    }
    // W_O = [W_O^1 … W_O^H] as a dim_out × Σ d_v matrix
    let mut w_o = Matrix::zeros(cfg.dim_out, stacked_cols.len());
    for (c, col) in stacked_cols.iter().enumerate() {
        for (r, v) in col.iter().enumerate() {
            w_o.set(r, c, *v);
        }
    }
    let rows = concat
        .iter()
        .map(|row| w_o.apply(row))
        .collect::<Result<Vec<_>>>()?;
    PointCloud::from_rows(&rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Tanh => math::tanh(v),
            Activation::Identity => v,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AffineLayer {
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

/// Pointwise feed-forward network `f: R^d → R^d`, as the kernel `δ_{f(x)}`.
#[derive(Debug, Clone)]
pub struct FfnConfig {
    layers: Vec<AffineLayer>,
    dim: usize,
}

impl FfnConfig {
    pub fn new(layers: Vec<AffineLayer>) -> Result<Self> {
        let first = layers.first().ok_or(Error::InvalidInput("FFN needs at least one layer"))?;
        let dim = first.weight.cols();
        let mut cur = dim;
        for l in &layers {
            check_dim(cur, l.weight.cols())?;
            check_dim(l.weight.rows(), l.bias.len())?;
            cur = l.weight.rows();
        }
        check_dim(dim, cur)?;
        Ok(Self { layers, dim })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            layers: vec![AffineLayer {
                weight: Matrix::identity(dim),
                bias: vec![0.0; dim],
                activation: Activation::Identity,
            }],
            dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn layers(&self) -> &[AffineLayer] {
        &self.layers
    }

    /// Product of per-layer ℓ1 operator norms; ReLU and tanh are 1-Lipschitz.
    /// An upper bound on `‖f‖_Lip`, not the exact value.
    pub fn lip_f(&self) -> f64 {
        self.layers.iter().map(|l| l.weight.l1_operator_norm()).product()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut cur = x.to_vec();
        for l in &self.layers {
            let mut next = l.weight.apply(&cur)?;
            for (v, b) in next.iter_mut().zip(&l.bias) {
                *v = l.activation.apply(*v + b);
            }
            cur = next;
        }
        Ok(cur)
    }
}

/// `T = A F`: multi-head attention followed by the pointwise FFN.
pub fn transformer_layer(mh: &MultiHeadConfig, ffn: &FfnConfig, x: &PointCloud) -> Result<PointCloud> {
    check_dim(mh.dim_out(), ffn.dim())?;
    let attended = multi_head(mh, x)?;
    attended.map_points(ffn.dim(), |p| ffn.apply(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::EmpiricalMeasure;

    fn cloud(rows: &[&[f64]]) -> PointCloud {
        PointCloud::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn equidistant_query_splits_evenly() {
        let nu = empirical(cloud(&[&[-1.0, 0.0], &[1.0, 0.0]]));
        let w = softmatch_weights(&Potential::gaussian(2), &[0.0, 3.0], &nu).unwrap();
        assert_eq!(w, vec![0.5, 0.5]);
    }

    #[test]
    fn single_key_gets_all_mass() {
        let nu = empirical(cloud(&[&[4.0]]));
        for g in [Potential::gaussian(1), Potential::dot_product(1, 3.0), Potential::constant(1)] {
            assert_eq!(softmatch_weights(&g, &[-2.0], &nu).unwrap(), vec![1.0]);
        }
    }

    #[test]
    fn dot_product_one_third_two_thirds() {
        let nu = empirical(cloud(&[&[0.0], &[2f64.ln()]]));
        let w = softmatch_weights(&Potential::dot_product(1, 1.0), &[1.0], &nu).unwrap();
        assert!((w[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((w[1] - 2.0 / 3.0).abs() < 1e-15);
        let m = softmatch_measure(&Potential::dot_product(1, 1.0), &[1.0], &nu).unwrap();
        assert_eq!(m.support(), nu.support());
        assert_eq!(m.weights(), &w[..]);
    }

    #[test]
    fn nan_query_rejected() {
        let nu = empirical(cloud(&[&[0.0]]));
        assert!(matches!(
            softmatch_weights(&Potential::gaussian(1), &[f64::NAN], &nu),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn softmatch_shift_invariance() {
        let nu = empirical(cloud(&[&[0.1, 0.2], &[-0.4, 0.9], &[1.0, -1.0]]));
        let q = [0.3, -0.2];
        let base = Potential::dot_product(2, 1.0);
        let shifted = Potential::custom(
            2,
            crate::potentials::Similarity::new("shifted", Arc::new(|x: &[f64], y: &[f64]| {
                x[0] * y[0] + x[1] * y[1] + 37.0
            })),
        );
        let a = softmatch_weights(&base, &q, &nu).unwrap();
        let b = softmatch_weights(&shifted, &q, &nu).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn lookup_examples() {
        let mu = empirical(cloud(&[&[1.0], &[3.0]]));
        assert_eq!(apply_lookup(&Lookup::Identity, &mu).unwrap(), mu);

        let doubled = apply_lookup(&Lookup::Linear(Matrix::scaled_identity(1, 2.0)), &mu).unwrap();
        assert_eq!(doubled, empirical(cloud(&[&[2.0], &[6.0]])));

        let shift = Lookup::function("shift", 1, 1, 1.0, Arc::new(|x: &[f64]| vec![x[0] + 5.0])).unwrap();
        let moved = apply_lookup(&shift, &mu).unwrap();
        assert_eq!(barycenter(&moved), vec![barycenter(&mu)[0] + 5.0]);
    }

    #[test]
    fn lookup_dimension_checked() {
        let mu = empirical(cloud(&[&[1.0, 2.0]]));
        let w = Matrix::identity(3);
        assert!(apply_lookup(&Lookup::Linear(w), &mu).is_err());
    }

    #[test]
    fn single_key_attention_is_lookup_of_key() {
        let mu = empirical(cloud(&[&[2.0, -1.0]]));
        let w = Matrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 3.0]]).unwrap();
        let cfg = AttentionConfig::new(Potential::gaussian(2), Lookup::Linear(w)).unwrap();
        assert_eq!(attention_kernel(&cfg, &[9.0, 9.0], &mu).unwrap(), vec![1.0, -3.0]);
    }

    #[test]
    fn constant_potential_returns_weighted_mean_of_values() {
        let mu = EmpiricalMeasure::new(cloud(&[&[0.0], &[4.0]]), vec![0.25, 0.75]).unwrap();
        let cfg = AttentionConfig::new(Potential::constant(1), Lookup::Identity).unwrap();
        let out = attention_kernel(&cfg, &[-7.0], &mu).unwrap();
        assert!((out[0] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn reference_attention_examples() {
        let k = cloud(&[&[1.0, 2.0]]);
        let v = cloud(&[&[5.0, 6.0]]);
        let a = |x: &[f64], y: &[f64]| x[0] * y[0];
        assert_eq!(reference_attention(a, &[0.3, 0.0], &k, &v).unwrap(), vec![5.0, 6.0]);

        let k = cloud(&[&[0.0], &[0.0]]);
        let v = cloud(&[&[1.0], &[3.0]]);
        assert_eq!(reference_attention(a, &[1.0], &k, &v).unwrap(), vec![2.0]);

        let k = cloud(&[&[0.0], &[2f64.ln()]]);
        let out = reference_attention(a, &[1.0], &k, &k).unwrap();
        assert!((out[0] - 2.0 / 3.0 * 2f64.ln()).abs() < 1e-15);

        let short = cloud(&[&[0.0]]);
        assert_eq!(
            reference_attention(a, &[1.0], &k, &short),
            Err(Error::KeyValueMismatch { keys: 2, values: 1 })
        );
    }

    #[test]
    fn single_point_self_attention() {
        let x = cloud(&[&[0.5, 0.25]]);
        let w = Matrix::scaled_identity(2, 4.0);
        let cfg = AttentionConfig::new(Potential::dot_product(2, 1.0), Lookup::Linear(w)).unwrap();
        assert_eq!(self_attention(&cfg, &x).unwrap(), cloud(&[&[2.0, 1.0]]));
    }

    #[test]
    fn single_head_identity_output_equals_self_attention() {
        let x = cloud(&[&[0.1, 0.2], &[0.7, -0.3], &[-0.5, 0.4]]);
        let att = AttentionConfig::new(Potential::gaussian(2), Lookup::Identity).unwrap();
        let mh = MultiHeadConfig::single(att.clone()).unwrap();
        let a = multi_head(&mh, &x).unwrap();
        let b = self_attention(&att, &x).unwrap();
        assert!(a.max_abs_diff(&b).unwrap() < 1e-15);
    }

    #[test]
    fn identical_half_heads_average_to_one_head() {
        let x = cloud(&[&[0.1, 0.2], &[0.7, -0.3], &[-0.5, 0.4]]);
        let att = AttentionConfig::new(Potential::dot_product(2, 0.5), Lookup::Identity).unwrap();
        let half = Matrix::scaled_identity(2, 0.5);
        let mh = MultiHeadConfig::new(vec![
            Head { attention: att.clone(), w_o: half.clone() },
            Head { attention: att.clone(), w_o: half },
        ])
        .unwrap();
        let a = multi_head(&mh, &x).unwrap();
        let b = self_attention(&att, &x).unwrap();
        assert!(a.max_abs_diff(&b).unwrap() < 1e-15);
    }

    #[test]
    fn ffn_examples() {
        let x = cloud(&[&[0.1, 0.2], &[0.7, -0.3]]);
        let att = AttentionConfig::new(Potential::gaussian(2), Lookup::Identity).unwrap();
        let mh = MultiHeadConfig::single(att.clone()).unwrap();
        let ident = transformer_layer(&mh, &FfnConfig::identity(2), &x).unwrap();
        assert_eq!(ident, multi_head(&mh, &x).unwrap());

        let double = FfnConfig::new(vec![AffineLayer {
            weight: Matrix::scaled_identity(2, 2.0),
            bias: vec![0.0, 0.0],
            activation: Activation::Identity,
        }])
        .unwrap();
        assert_eq!(double.lip_f(), 2.0);
        let doubled = transformer_layer(&mh, &double, &x).unwrap();
        let sa = self_attention(&att, &x).unwrap();
        for (p, q) in doubled.points().zip(sa.points()) {
            assert!((p[0] - 2.0 * q[0]).abs() < 1e-15 && (p[1] - 2.0 * q[1]).abs() < 1e-15);
        }
    }

    #[test]
    fn ffn_rejects_dimension_change() {
        let l = AffineLayer {
            weight: Matrix::zeros(3, 2),
            bias: vec![0.0; 3],
            activation: Activation::Relu,
        };
        assert!(FfnConfig::new(vec![l]).is_err());
    }

    #[test]
    fn lookup_lip_constants() {
        assert_eq!(Lookup::Identity.lip_ell(), 1.0);
        assert_eq!(Lookup::Linear(Matrix::scaled_identity(3, 2.0)).lip_ell(), 2.0);
    }
}
