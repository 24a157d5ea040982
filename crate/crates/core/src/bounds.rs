//! Closed-form contraction and Lipschitz bounds for attention kernels.
//!
//! Each bound comes back as a [`BoundReport`] listing every ingredient with its
//! provenance, so a report can be re-evaluated from its own contents.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kernels::{AttentionConfig, Lookup};
use crate::math;
use crate::measures::DomainBox;
use crate::potentials::{self, Provenance, RegularityStats, SamplingConfig, Stat, GAUSSIAN_LIP};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Theorem {
    /// `τ(A) ≤ τ(Π) τ(Ψ_G) τ(L)` on a compact convex domain.
    BoundedContraction,
    /// ℓ2 → ℓ2 Lipschitz constant of `q ↦ Attention(q, K, V)`.
    BoundedPointwiseCorollary,
    /// Gaussian potential on all of `R^d`.
    UnboundedGaussian,
    /// The Gaussian bound specialised to `N = M`.
    UnboundedEqualN,
    /// `q ↦ Attention(q, X, X)` as a function of `m(X)`.
    CrossAttention,
    /// Individual component coefficients; the value is `τ(Ψ_G)`.
    ComponentTaus,
    /// [`Theorem::BoundedContraction`] with the `‖G‖_∞ / ε(G)` term that the
    /// in-measure softmatch estimate needs (`Lip(G f) ≤ ‖G‖_Lip ‖f‖_∞ + ‖G‖_∞`).
    /// Without it the bound tends to 0 for a nearly constant potential while
    /// the map tends to `μ ↦ δ_μ̄`, which is not a contraction to 0.
    BoundedContractionCorrected,
    /// [`Theorem::CrossAttention`] with the same `‖G‖_∞ / ε(G)` term.
    CrossAttentionCorrected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum BoundStatus {
    /// All assumptions hold and every ingredient is analytic.
    Applicable,
    /// Assumptions hold but some ingredient was sampled, so the value is an
    /// estimate rather than a guarantee.
    Uncertified,
    /// An assumption failed; the value is meaningless.
    Inapplicable,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Ingredient {
    pub value: f64,
    pub provenance: Provenance,
    /// Informational ingredients are reported but do not enter the value.
    pub informational: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Assumption {
    pub name: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct BoundReport {
    pub theorem: Theorem,
    /// `+∞` when inapplicable.
    pub value: f64,
    pub ingredients: BTreeMap<String, Ingredient>,
    pub assumptions_checked: Vec<Assumption>,
    pub status: BoundStatus,
}

impl BoundReport {
    fn new(theorem: Theorem) -> Self {
        Self {
            theorem,
            value: f64::INFINITY,
            ingredients: BTreeMap::new(),
            assumptions_checked: Vec::new(),
            status: BoundStatus::Applicable,
        }
    }

    fn put(&mut self, name: &str, stat: Stat) {
        self.ingredients.insert(
            name.to_string(),
            Ingredient {
                value: stat.value,
                provenance: stat.provenance,
                informational: false,
            },
        );
    }

    fn put_info(&mut self, name: &str, stat: Stat) {
        self.ingredients.insert(
            name.to_string(),
            Ingredient {
                value: stat.value,
                provenance: stat.provenance,
                informational: true,
            },
        );
    }

    fn assume(&mut self, name: &str, passed: bool) {
        self.assumptions_checked.push(Assumption {
            name: name.to_string(),
            passed,
        });
    }

    pub fn ingredient(&self, name: &str) -> Option<f64> {
        self.ingredients.get(name).map(|i| i.value)
    }

    /// Records a data-dependent assumption (e.g. support inside the domain)
    /// after construction.
    pub fn add_assumption(&mut self, name: &str, passed: bool) {
        self.assume(name, passed);
        self.finish_status();
    }

    fn finish(mut self) -> Self {
        self.finish_status();
        if self.status != BoundStatus::Inapplicable {
            self.value = self.recompute().unwrap_or(f64::INFINITY);
        }
        self
    }

    fn finish_status(&mut self) {
        self.status = if self.assumptions_checked.iter().any(|a| !a.passed) {
            BoundStatus::Inapplicable
        } else if self
            .ingredients
            .values()
            .any(|i| !i.informational && !i.provenance.is_certified())
        {
            BoundStatus::Uncertified
        } else {
            BoundStatus::Applicable
        };
        if self.status == BoundStatus::Inapplicable {
            self.value = f64::INFINITY;
        }
    }

    /// Re-evaluates the theorem formula from the ingredient map alone.
    pub fn recompute(&self) -> Option<f64> {
        let g = |k: &str| self.ingredient(k);
        match self.theorem {
            Theorem::BoundedContraction => {
                let tau_s = softmatch_formula(g("lip_left")?, g("lip_right")?, g("diam_l1")?, g("eps_g")?);
                Some(g("tau_pi")? * tau_s * g("tau_lookup")?)
            }
            Theorem::BoundedPointwiseCorollary => {
                let d = g("dim")?;
                Some(d * math::sqrt(d) * g("tau_lookup")? * 2.0 * g("lip_left")? * g("diam_l1")? / g("eps_g")?)
            }
            Theorem::UnboundedGaussian | Theorem::UnboundedEqualN => Some(unbounded_formula(
                g("dim")?,
                g("tau_lookup")?,
                g("sup_g")?,
                g("lip_joint")?,
                g("ratio_term")?,
            )),
            Theorem::CrossAttention => {
                Some(g("tau_pi")? * g("tau_lookup")? * 2.0 * g("lip_query")? * g("diam_l1")? / g("eps_g")?)
            }
            Theorem::BoundedContractionCorrected => {
                let tau_s = softmatch_formula(g("lip_left")?, g("lip_right")?, g("diam_l1")?, g("eps_g")?)
                    + g("sup_g")? / g("eps_g")?;
                Some(g("tau_pi")? * tau_s * g("tau_lookup")?)
            }
            Theorem::CrossAttentionCorrected => Some(
                g("tau_pi")? * g("tau_lookup")? * (2.0 * g("lip_query")? * g("diam_l1")? + g("sup_g")?) / g("eps_g")?,
            ),
            Theorem::ComponentTaus => Some(softmatch_formula(
                g("lip_left")?,
                g("lip_right")?,
                g("diam_l1")?,
                g("eps_g")?,
            )),
        }
    }
}

fn softmatch_formula(lip_left: f64, lip_right: f64, diam: f64, eps: f64) -> f64 {
    2.0 * (lip_left + lip_right) * diam / eps
}

/// Sum in ascending order so that reordering the terms cannot change the result.
fn canonical_sum(terms: &mut [f64]) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

fn unbounded_formula(d: f64, tau_l: f64, sup_g: f64, lip: f64, ratio: f64) -> f64 {
    let sd = math::sqrt(d);
    let mut bracket = [sup_g, sd, 2.0, sd * ratio * lip];
    2.0 * d * tau_l * canonical_sum(&mut bracket)
}

/// `τ(Π) = d`.
pub fn tau_pi(d: usize) -> f64 {
    d as f64
}

/// `τ(L) = ‖ℓ‖_Lip` for a deterministic lookup.
pub fn tau_lookup(lookup: &Lookup) -> f64 {
    lookup.lip_ell()
}

fn lookup_provenance(lookup: &Lookup) -> Provenance {
    match lookup {
        Lookup::Identity => Provenance::Analytic,
        // the induced ℓ1 norm is exact; a user-supplied constant is trusted as a bound
        Lookup::Linear(_) => Provenance::Analytic,
        Lookup::Function { .. } => Provenance::AnalyticBound,
    }
}

/// `τ(Ψ_G) = 2(‖G‖_{Lip,∞} + ‖G‖_{∞,Lip}) diam(E) / ε(G)` with the ℓ1 diameter.
pub fn tau_softmatch_bounded(stats: &RegularityStats, domain: &DomainBox) -> Result<f64> {
    let diam = domain.l1_diameter().ok_or(Error::RequiresCompactDomain)?;
    if stats.eps_g.value <= 0.0 || !stats.eps_g.value.is_finite() {
        return Err(Error::DegeneratePotential(stats.eps_g.value));
    }
    Ok(softmatch_formula(stats.lip_left.value, stats.lip_right.value, diam, stats.eps_g.value))
}

/// `√(ln n + 1/(2e))`.
pub fn ratio_lemma_bound(n: usize) -> f64 {
    math::sqrt(math::ln(n as f64) + math::INV_TWO_E)
}

/// `max_{r ≥ 0} 2(2 + √d r) r e^{-r²}`, the constant the unbounded proof
/// bounds loosely by `√d + 2`.
pub fn tight_unbounded_constant(d: usize) -> f64 {
    let sd = math::sqrt(d as f64);
    let h = |r: f64| 2.0 * (2.0 + sd * r) * r * math::exp(-r * r);
    // unimodal on [0, ∞) and negligible past r = 6
    let (mut a, mut b) = (0.0f64, 6.0f64);
    let phi = 0.5 * (math::sqrt(5.0) - 1.0);
    for _ in 0..200 {
        let c = b - phi * (b - a);
        let e = a + phi * (b - a);
        if h(c) < h(e) {
            a = c;
        } else {
            b = e;
        }
    }
    h(0.5 * (a + b))
}

fn regularity(cfg: &AttentionConfig, domain: &DomainBox, sampling: &SamplingConfig, report: &mut BoundReport) -> Option<(RegularityStats, f64)> {
    let bounded = domain.is_bounded();
    report.assume("domain is compact", bounded);
    // boxes are convex by construction
    report.assume("domain is convex", true);
    if !bounded {
        return None;
    }
    let stats = match potentials::regularity_stats(&cfg.potential, domain, sampling) {
        Ok(s) => s,
        Err(_) => {
            report.assume("regularity constants computable", false);
            return None;
        }
    };
    let diam = domain.l1_diameter().expect("bounded");
    report.assume("eps_g > 0", stats.eps_g.value > 0.0);
    let finite = [stats.lip_left, stats.lip_right, stats.sup_g]
        .iter()
        .all(|s| s.value.is_finite());
    report.assume("seminorms finite", finite);
    report.put("eps_g", stats.eps_g);
    report.put("diam_l1", Stat::analytic(diam));
    Some((stats, diam))
}

/// `τ(A) ≤ τ(Π) τ(Ψ_G) τ(L)`.
pub fn bound_bounded_contraction(
    cfg: &AttentionConfig,
    domain: &DomainBox,
    sampling: &SamplingConfig,
) -> BoundReport {
    contraction(Theorem::BoundedContraction, cfg, domain, sampling)
}

/// `τ(A) ≤ τ(Π) [τ(Ψ_G) + ‖G‖_∞ / ε(G)] τ(L)`; see
/// [`Theorem::BoundedContractionCorrected`].
pub fn bound_bounded_contraction_corrected(
    cfg: &AttentionConfig,
    domain: &DomainBox,
    sampling: &SamplingConfig,
) -> BoundReport {
    contraction(Theorem::BoundedContractionCorrected, cfg, domain, sampling)
}

fn contraction(theorem: Theorem, cfg: &AttentionConfig, domain: &DomainBox, sampling: &SamplingConfig) -> BoundReport {
    let mut r = BoundReport::new(theorem);
    if let Some((stats, _)) = regularity(cfg, domain, sampling, &mut r) {
        r.put("lip_left", stats.lip_left);
        r.put("lip_right", stats.lip_right);
        if theorem == Theorem::BoundedContractionCorrected {
            r.put("sup_g", stats.sup_g);
        } else {
            r.put_info("sup_g", stats.sup_g);
        }
        r.put("tau_pi", Stat::analytic(tau_pi(cfg.value_dim())));
        r.put("tau_lookup", lookup_stat(&cfg.lookup));
        let tau_s = softmatch_formula(
            stats.lip_left.value,
            stats.lip_right.value,
            r.ingredient("diam_l1").unwrap_or(f64::NAN),
            stats.eps_g.value,
        );
        r.put_info("tau_softmatch", Stat { value: tau_s, provenance: weakest(&[stats.lip_left, stats.lip_right, stats.eps_g]) });
    }
    r.finish()
}

fn lookup_stat(lookup: &Lookup) -> Stat {
    Stat {
        value: tau_lookup(lookup),
        provenance: lookup_provenance(lookup),
    }
}

fn weakest(stats: &[Stat]) -> Provenance {
    stats
        .iter()
        .map(|s| s.provenance)
        .find(|p| !p.is_certified())
        .unwrap_or(if stats.iter().all(|s| s.provenance == Provenance::Analytic) {
            Provenance::Analytic
        } else {
            Provenance::AnalyticBound
        })
}

/// ℓ2 → ℓ2 constant `d^{3/2} ‖ℓ‖_Lip · 2‖G‖_{Lip,∞} diam(E) / ε(G)` for the
/// map `q ↦ Attention(q, K, V)`.
pub fn bound_pointwise_query(cfg: &AttentionConfig, domain: &DomainBox, sampling: &SamplingConfig) -> BoundReport {
    let mut r = BoundReport::new(Theorem::BoundedPointwiseCorollary);
    if let Some((stats, _)) = regularity(cfg, domain, sampling, &mut r) {
        r.put("dim", Stat::analytic(cfg.value_dim() as f64));
        r.put("lip_left", stats.lip_left);
        r.put("tau_lookup", lookup_stat(&cfg.lookup));
    }
    r.finish()
}

/// `2 τ(Π) τ(L) [‖G‖_∞ + √d + 2 + √d √(ln min(N, M) + 1/(2e)) ‖G‖_Lip]`.
pub fn bound_unbounded_gaussian(lookup: &Lookup, d: usize, n: usize, m: usize) -> BoundReport {
    unbounded(Theorem::UnboundedGaussian, lookup, d, n.min(m), Some((n, m)))
}

/// The `N = M` form `2 d τ(L) [√d √(ln N + 1/(2e)) ‖G‖_Lip + ‖G‖_∞ + √d + 2]`.
pub fn bound_unbounded_equal_n(lookup: &Lookup, d: usize, n: usize) -> BoundReport {
    unbounded(Theorem::UnboundedEqualN, lookup, d, n, None)
}

fn unbounded(theorem: Theorem, lookup: &Lookup, d: usize, n_min: usize, sizes: Option<(usize, usize)>) -> BoundReport {
    let mut r = BoundReport::new(theorem);
    r.assume("potential is gaussian", true);
    r.assume("support sizes are positive", n_min >= 1 && d >= 1);
    r.assume("lookup maps R^d to R^d", lookup.out_dim(d) == d);
    if let Lookup::Function { in_dim, .. } = lookup {
        r.assume("lookup maps R^d to R^d", *in_dim == d);
    }
    r.put("dim", Stat::analytic(d as f64));
    r.put("tau_lookup", lookup_stat(lookup));
    r.put("sup_g", Stat::analytic(1.0));
    r.put("lip_joint", Stat::bound(GAUSSIAN_LIP));
    r.put("ratio_term", Stat::analytic(ratio_lemma_bound(n_min.max(1))));
    match sizes {
        Some((n, m)) => {
            r.put_info("n", Stat::analytic(n as f64));
            r.put_info("m", Stat::analytic(m as f64));
        }
        None => r.put_info("n", Stat::analytic(n_min as f64)),
    }
    r.put_info("tight_c", Stat::analytic(tight_unbounded_constant(d)));
    r.finish()
}

/// `d τ(L) · 2‖G(q, ·)‖_Lip diam(E) / ε(G)`.
pub fn bound_cross_attention(
    cfg: &AttentionConfig,
    domain: &DomainBox,
    q: &[f64],
    sampling: &SamplingConfig,
) -> Result<BoundReport> {
    cross(Theorem::CrossAttention, cfg, domain, q, sampling)
}

/// `d τ(L) · (2‖G(q, ·)‖_Lip diam(E) + ‖G‖_∞) / ε(G)`; see
/// [`Theorem::CrossAttentionCorrected`].
pub fn bound_cross_attention_corrected(
    cfg: &AttentionConfig,
    domain: &DomainBox,
    q: &[f64],
    sampling: &SamplingConfig,
) -> Result<BoundReport> {
    cross(Theorem::CrossAttentionCorrected, cfg, domain, q, sampling)
}

fn cross(
    theorem: Theorem,
    cfg: &AttentionConfig,
    domain: &DomainBox,
    q: &[f64],
    sampling: &SamplingConfig,
) -> Result<BoundReport> {
    let mut r = BoundReport::new(theorem);
    if let Some((stats, _)) = regularity(cfg, domain, sampling, &mut r) {
        r.assume("query inside the domain", domain.contains(q, 0.0));
        r.put("lip_query", potentials::lip_second_at(&cfg.potential, q, domain, sampling)?);
        r.put("tau_pi", Stat::analytic(tau_pi(cfg.value_dim())));
        r.put("tau_lookup", lookup_stat(&cfg.lookup));
        if theorem == Theorem::CrossAttentionCorrected {
            r.put("sup_g", stats.sup_g);
        }
    }
    Ok(r.finish())
}

/// Per-component coefficients: `τ(Π)`, `τ(L)`, the two halves of `τ(Ψ_G)`.
pub fn component_taus(cfg: &AttentionConfig, domain: &DomainBox, sampling: &SamplingConfig) -> BoundReport {
    let mut r = BoundReport::new(Theorem::ComponentTaus);
    if let Some((stats, diam)) = regularity(cfg, domain, sampling, &mut r) {
        r.put("lip_left", stats.lip_left);
        r.put("lip_right", stats.lip_right);
        let eps = stats.eps_g.value;
        r.put_info(
            "tau_softmatch_in_x",
            Stat {
                value: 2.0 * stats.lip_left.value * diam / eps,
                provenance: weakest(&[stats.lip_left, stats.eps_g]),
            },
        );
        r.put_info(
            "tau_softmatch_in_measure",
            Stat {
                value: 2.0 * stats.lip_right.value * diam / eps,
                provenance: weakest(&[stats.lip_right, stats.eps_g]),
            },
        );
        r.put_info("tau_pi", Stat::analytic(tau_pi(cfg.value_dim())));
        r.put_info("tau_lookup", lookup_stat(&cfg.lookup));
    }
    r.finish()
}
