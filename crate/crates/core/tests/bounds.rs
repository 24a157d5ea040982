use proptest::prelude::*;
use wattn_core::bounds::{
    self,
    bound_bounded_contraction, bound_unbounded_equal_n, bound_unbounded_gaussian, ratio_lemma_bound, tau_lookup,
    BoundStatus,
};
use wattn_core::kernels::{AttentionConfig, Lookup};
use wattn_core::potentials::{Potential, SamplingConfig};
use wattn_core::{DomainBox, Matrix};

fn sampling() -> SamplingConfig {
    SamplingConfig { samples: 2000, seed: 3 }
}

#[test]
fn dot_product_closed_form() {
    // G = exp(s xᵀy) on [-1,1]^d: ε = e^{-sd}, both seminorms s e^{sd}, ℓ1 diameter 2d
    for d in 1..=4 {
        for &s in &[0.05, 0.2, 1.0] {
            let cfg = AttentionConfig::new(Potential::dot_product(d, s), Lookup::Identity).unwrap();
            let r = bound_bounded_contraction(&cfg, &DomainBox::cube(d, -1.0, 1.0).unwrap(), &sampling());
            let df = d as f64;
            let expected = df * 2.0 * (2.0 * s * (s * df).exp()) * 2.0 * df / (-s * df).exp();
            assert_eq!(r.status, BoundStatus::Applicable);
            assert!((r.value - expected).abs() <= 1e-12 * expected, "{d} {s}: {} vs {expected}", r.value);
        }
    }
}

#[test]
fn gaussian_closed_form() {
    for d in 1..=4 {
        let cfg = AttentionConfig::new(Potential::gaussian(d), Lookup::Identity).unwrap();
        let r = bound_bounded_contraction(&cfg, &DomainBox::cube(d, -1.0, 1.0).unwrap(), &sampling());
        let df = d as f64;
        let lip = (2.0f64 / std::f64::consts::E).sqrt();
        let expected = df * 2.0 * 2.0 * lip * 2.0 * df / (-4.0 * df).exp();
        assert!((r.value - expected).abs() <= 1e-6 * expected, "{} vs {expected}", r.value);
        assert_eq!(r.recompute(), Some(r.value));
    }
}

#[test]
fn unbounded_domain_is_inapplicable_for_the_compact_theorem() {
    let cfg = AttentionConfig::new(Potential::gaussian(2), Lookup::Identity).unwrap();
    let r = bound_bounded_contraction(&cfg, &DomainBox::Unbounded, &sampling());
    assert_eq!(r.status, BoundStatus::Inapplicable);
    assert!(r.value.is_infinite());
}

#[test]
fn custom_potentials_are_uncertified() {
    let cfg = AttentionConfig::new(Potential::constant(2), Lookup::Identity).unwrap();
    let r = bound_bounded_contraction(&cfg, &DomainBox::cube(2, -1.0, 1.0).unwrap(), &sampling());
    assert_eq!(r.status, BoundStatus::Uncertified);
}

#[test]
fn equal_n_corollary_is_the_theorem_at_n_equals_m() {
    for d in 1..=6 {
        for n in 1..=64 {
            let l = Lookup::Linear(Matrix::scaled_identity(d, 0.5));
            let a = bound_unbounded_gaussian(&l, d, n, n);
            let b = bound_unbounded_equal_n(&l, d, n);
            assert_eq!(a.value.to_bits(), b.value.to_bits());
        }
    }
}

#[test]
fn unbounded_bound_closed_form() {
    let d = 3usize;
    let df = d as f64;
    let r = bound_unbounded_gaussian(&Lookup::Identity, d, 5, 9);
    let lip = (2.0f64 / std::f64::consts::E).sqrt();
    let ratio = (5.0f64.ln() + 1.0 / (2.0 * std::f64::consts::E)).sqrt();
    let expected = 2.0 * df * (1.0 + df.sqrt() + 2.0 + df.sqrt() * ratio * lip);
    assert!((r.value - expected).abs() <= 1e-6 * expected);
    assert!((ratio_lemma_bound(5) - ratio).abs() <= 1e-15);
}

fn matrix(d: usize) -> impl Strategy<Value = Matrix> {
    proptest::collection::vec(-2.0f64..2.0, d * d).prop_map(move |v| {
        Matrix::from_rows(&v.chunks(d).map(|c| c.to_vec()).collect::<Vec<_>>()).unwrap()
    })
}

proptest! {
    #[test]
    fn bound_scales_linearly_with_the_lookup(w in matrix(2), c in 0.1f64..5.0) {
        let dom = DomainBox::cube(2, -1.0, 1.0).unwrap();
        let base = bound_bounded_contraction(&AttentionConfig::new(Potential::gaussian(2), Lookup::Linear(w.clone())).unwrap(), &dom, &sampling());
        let scaled = bound_bounded_contraction(&AttentionConfig::new(Potential::gaussian(2), Lookup::Linear(w.scale(c))).unwrap(), &dom, &sampling());
        prop_assert!((scaled.value - c * base.value).abs() <= 1e-9 * scaled.value.max(1.0));
    }

    #[test]
    fn lookup_coefficient_is_submultiplicative(a in matrix(3), b in matrix(3)) {
        let ab = Lookup::Linear(a.matmul(&b).unwrap());
        prop_assert!(tau_lookup(&ab) <= tau_lookup(&Lookup::Linear(a)) * tau_lookup(&Lookup::Linear(b)) * (1.0 + 1e-12));
    }

    #[test]
    fn recompute_reproduces_the_value(s in 0.01f64..1.0, d in 1usize..5) {
        let cfg = AttentionConfig::new(Potential::dot_product(d, s), Lookup::Identity).unwrap();
        let r = bound_bounded_contraction(&cfg, &DomainBox::cube(d, -1.0, 1.0).unwrap(), &sampling());
        prop_assert_eq!(r.recompute(), Some(r.value));
    }

    #[test]
    fn unbounded_bound_grows_with_support_size(n in 1usize..500, k in 1usize..500) {
        let a = bound_unbounded_gaussian(&Lookup::Identity, 2, n, n + k).value;
        let b = bound_unbounded_gaussian(&Lookup::Identity, 2, n + k, n + k).value;
        prop_assert!(a <= b);
    }
}

/// With a nearly constant potential self-attention sends every atom close to
/// the barycenter, so the outputs of two measures differ by about the
/// distance of their barycenters. The bounds without the `‖G‖_∞ / ε` term go
/// to zero with the potential's scale and miss this.
#[test]
fn weak_potentials_need_the_sup_term() {
    use wattn_core::kernels::{attention_kernel, self_attention_measure};
    use wattn_core::measures::empirical;
    use wattn_core::transport::w1;
    use wattn_core::PointCloud;

    let dom = DomainBox::cube(1, -1.0, 1.0).unwrap();
    let cfg = AttentionConfig::new(Potential::dot_product(1, 1e-3), Lookup::Identity).unwrap();
    let mu = empirical(PointCloud::from_rows(&[vec![-1.0], vec![-0.5]]).unwrap());
    let nu = empirical(PointCloud::from_rows(&[vec![0.5], vec![1.0]]).unwrap());
    let input = w1(&mu, &nu).unwrap().value;

    let q = [0.0];
    let a = attention_kernel(&cfg, &q, &mu).unwrap()[0];
    let b = attention_kernel(&cfg, &q, &nu).unwrap()[0];
    let stated = bounds::bound_cross_attention(&cfg, &dom, &q, &sampling()).unwrap().value;
    let corrected = bounds::bound_cross_attention_corrected(&cfg, &dom, &q, &sampling()).unwrap().value;
    assert!((a - b).abs() > stated * input);
    assert!((a - b).abs() <= corrected * input);

    let out = w1(&self_attention_measure(&cfg, &mu).unwrap(), &self_attention_measure(&cfg, &nu).unwrap()).unwrap().value;
    let stated = bound_bounded_contraction(&cfg, &dom, &sampling()).value;
    let corrected = bounds::bound_bounded_contraction_corrected(&cfg, &dom, &sampling()).value;
    assert!(out > stated * input);
    assert!(out <= corrected * input);
}
