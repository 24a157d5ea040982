use wattn_core::kernels::{AttentionConfig, Lookup};
use wattn_core::potentials::{Potential, SamplingConfig};
use wattn_core::probes::{
    probe_contraction, run_equivalence, ContractionBound, EquivalenceConfig, Perturbation, ProbeConfig, SamplingDomain,
};
use wattn_core::DomainBox;

fn probe(seed: u64, trials: usize) -> ProbeConfig {
    ProbeConfig {
        seed,
        trials,
        dim: 2,
        n_range: (2, 8),
        domain: SamplingDomain::Box(DomainBox::cube(2, -1.0, 1.0).unwrap()),
        perturbation: Perturbation::Mixed { sigma: 0.1 },
    }
}

fn cfg() -> AttentionConfig {
    AttentionConfig::new(Potential::gaussian(2), Lookup::Identity).unwrap()
}

#[test]
fn probes_are_reproducible() {
    let s = SamplingConfig::default();
    let a = probe_contraction(&cfg(), &probe(4, 40), ContractionBound::Bounded, &s).unwrap();
    let b = probe_contraction(&cfg(), &probe(4, 40), ContractionBound::Bounded, &s).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.violations, Some(0));
}

#[test]
fn trials_extend_as_prefixes() {
    let s = SamplingConfig::default();
    let short = probe_contraction(&cfg(), &probe(9, 20), ContractionBound::None, &s).unwrap();
    let long = probe_contraction(&cfg(), &probe(9, 50), ContractionBound::None, &s).unwrap();
    assert!(long.max_ratio >= short.max_ratio);
    assert_eq!(&long.ratios[..short.ratios.len()], &short.ratios[..]);
}

#[test]
fn a_too_small_bound_is_caught() {
    let r = probe_contraction(&cfg(), &probe(1, 40), ContractionBound::Fixed(1e-6), &SamplingConfig::default()).unwrap();
    assert!(r.violations.unwrap() > 0);
    assert!(r.first_violation.is_some());
}

#[test]
fn sabotaged_equivalence_fails() {
    let base = EquivalenceConfig { instances: 20, multi_head_instances: 5, seed: 2, ..Default::default() };
    assert!(run_equivalence(&base).unwrap().passed);
    let bad = EquivalenceConfig { sabotage: true, ..base };
    assert!(!run_equivalence(&bad).unwrap().passed);
}
