//! The ten acceptance criteria at their stated tolerances, one line each.
//! Runs without the libtest harness so the lines always print.

use std::time::{Duration, Instant};

use itertools::Itertools;
use wattn_core::bounds::{self, BoundStatus};
use wattn_core::dynamics::{self, Injection, Layer};
use wattn_core::kernels::{self, AttentionConfig, Lookup};
use wattn_core::measures::empirical;
use wattn_core::potentials::{Potential, SamplingConfig};
use wattn_core::probes::{
    self, Component, ContractionBound, EquivalenceConfig, Perturbation, ProbeConfig, RatioLemmaConfig, SamplingDomain,
};
use wattn_core::rng::{self, StreamRng};
use wattn_core::transport::{self, scaled_cost};
use wattn_core::{DomainBox, Matrix, PointCloud};

const SEED: u64 = 20240607;

struct Line {
    passed: bool,
    detail: String,
    /// Set when the criterion cannot hold as stated; the reason is printed
    /// next to the failure and a corrected check must pass instead.
    unattainable: Option<&'static str>,
    /// Extra lines that must all pass.
    checks: Vec<(String, bool)>,
}

fn line(passed: bool, detail: String) -> Line {
    Line {
        passed,
        detail,
        unattainable: None,
        checks: Vec::new(),
    }
}

fn cloud(rng: &mut StreamRng, n: usize, d: usize, lo: f64, hi: f64) -> PointCloud {
    PointCloud::new(d, (0..n * d).map(|_| rng::uniform_in(rng, lo, hi)).collect()).unwrap()
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn kernel_equivalence() -> (Line, Line) {
    let start = Instant::now();
    let single = probes::run_equivalence(&EquivalenceConfig {
        instances: 1000,
        multi_head_instances: 0,
        seed: SEED,
        ..Default::default()
    })
    .unwrap();
    let t1 = start.elapsed();
    let multi = probes::run_equivalence(&EquivalenceConfig {
        instances: 0,
        multi_head_instances: 200,
        seed: SEED + 1,
        ..Default::default()
    })
    .unwrap();
    let ok1 = single.max_deviation <= 1e-10 && t1 < Duration::from_secs(10);
    let ok2 = multi.multi_head_max_deviation <= 1e-10;
    (
        line(ok1, format!("1000 instances, max deviation {:.2e} <= 1e-10, {:.2?} < 10s", single.max_deviation, t1)),
        line(ok2, format!("200 instances, H in {{1,2,4}}, max deviation {:.2e} <= 1e-10", multi.multi_head_max_deviation)),
    )
}

fn w1_exactness() -> Line {
    let start = Instant::now();
    let mut exact = 0;
    let mut worst_bf = 0.0f64;
    for t in 0..500u64 {
        let mut r = rng::stream_rng(SEED, t);
        let n = 1 + rng::index(&mut r, 6);
        let d = 1 + rng::index(&mut r, 3);
        let x = cloud(&mut r, n, d, -2.0, 2.0);
        let y = cloud(&mut r, n, d, -2.0, 2.0);
        let mut best_int = i128::MAX;
        let mut best = f64::INFINITY;
        for perm in (0..n).permutations(n) {
            let int: i128 = (0..n).map(|i| scaled_cost(l1(x.point(i), y.point(perm[i]))) as i128).sum();
            let total: f64 = (0..n).map(|i| l1(x.point(i), y.point(perm[i]))).sum();
            best_int = best_int.min(int);
            best = best.min(total / n as f64);
        }
        let res = transport::w1(&empirical(x), &empirical(y)).unwrap();
        if res.scaled_objective == best_int {
            exact += 1;
        }
        worst_bf = worst_bf.max((res.value - best).abs());
    }
    let mut worst_lcm = 0.0f64;
    let mut count = 0;
    let mut t = 0u64;
    while count < 500 {
        let mut r = rng::stream_rng(SEED + 1, t);
        t += 1;
        let n = 1 + rng::index(&mut r, 12);
        let m = 1 + rng::index(&mut r, 12);
        if n == m || n * m / gcd(n, m) > 12 {
            continue;
        }
        count += 1;
        let d = 1 + rng::index(&mut r, 3);
        let mu = empirical(cloud(&mut r, n, d, -2.0, 2.0));
        let nu = empirical(cloud(&mut r, m, d, -2.0, 2.0));
        let v = transport::w1(&mu, &nu).unwrap().value;
        worst_lcm = worst_lcm.max((v - transport::w1_oracle_lcm(&mu, &nu).unwrap()).abs());
    }
    let el = start.elapsed();
    let ok = exact == 500 && worst_bf <= 1e-12 && worst_lcm <= 1e-9 && el < Duration::from_secs(30);
    line(
        ok,
        format!(
            "brute force: {exact}/500 integer-exact, max |diff| {worst_bf:.1e} <= 1e-12; LCM oracle: 500 instances, max |diff| {worst_lcm:.1e} <= 1e-9; {el:.2?} < 30s"
        ),
    )
}

fn bounded_contraction() -> Line {
    let sampling = SamplingConfig::default();
    let mut worst = 0.0f64;
    let mut violations = 0;
    let mut pairs = 0;
    let mut component_violations = 0;
    for (k, &d) in [1usize, 2, 4].iter().enumerate() {
        let potentials = [Potential::dot_product(d, 1.0 / (d as f64).sqrt()), Potential::gaussian(d)];
        for (j, g) in potentials.into_iter().enumerate() {
            let cfg = AttentionConfig::new(g, Lookup::Identity).unwrap();
            let probe = ProbeConfig {
                seed: SEED + (10 * k + j) as u64,
                trials: 2000,
                dim: d,
                n_range: (2, 16),
                domain: SamplingDomain::Box(DomainBox::cube(d, -1.0, 1.0).unwrap()),
                perturbation: Perturbation::Mixed { sigma: 0.05 },
            };
            let r = probes::probe_contraction(&cfg, &probe, ContractionBound::Bounded, &sampling).unwrap();
            assert!(r.bound_certified);
            violations += r.violations.unwrap();
            pairs += r.evaluated;
            worst = worst.max(r.max_ratio_over_bound.unwrap());
            let short = ProbeConfig { trials: 250, ..probe };
            for c in [Component::SoftmatchInX, Component::SoftmatchInMeasure, Component::Projection, Component::Lookup] {
                component_violations += probes::probe_component(c, &cfg, &short, &sampling).unwrap().violations.unwrap();
            }
        }
    }
    let mut l = line(
        violations == 0 && component_violations == 0,
        format!(
            "{pairs} pairs over d in {{1,2,4}} x {{scaled dot-product, gaussian}}: {violations} violations (max ratio/bound {worst:.2e}); component probes: {component_violations} violations"
        ),
    );
    // a weak potential exposes the missing sup term; the corrected bound must hold there too
    let weak = AttentionConfig::new(Potential::dot_product(2, 0.01), Lookup::Identity).unwrap();
    let probe = ProbeConfig {
        seed: SEED + 99,
        trials: 2000,
        dim: 2,
        n_range: (2, 16),
        domain: SamplingDomain::Box(DomainBox::cube(2, -1.0, 1.0).unwrap()),
        perturbation: Perturbation::Mixed { sigma: 0.05 },
    };
    let stated = probes::probe_contraction(&weak, &probe, ContractionBound::Bounded, &sampling).unwrap();
    let fixed = probes::probe_contraction(&weak, &probe, ContractionBound::BoundedCorrected, &sampling).unwrap();
    l.checks.push((
        format!(
            "dot-product scale 0.01 (outside the criterion): stated bound {:.3} has {} violations; corrected bound {:.3} has {}",
            stated.bound.unwrap(),
            stated.violations.unwrap(),
            fixed.bound.unwrap(),
            fixed.violations.unwrap()
        ),
        fixed.violations == Some(0),
    ));
    l
}

fn unbounded_gaussian() -> Line {
    let mut violations = 0;
    let mut worst = 0.0f64;
    let mut pairs = 0;
    for d in [1usize, 2, 3] {
        let cfg = AttentionConfig::new(Potential::gaussian(d), Lookup::Identity).unwrap();
        let probe = ProbeConfig {
            seed: SEED + d as u64,
            trials: 2000,
            dim: d,
            n_range: (3, 15),
            domain: SamplingDomain::Radius(5.0),
            perturbation: Perturbation::Mixed { sigma: 0.5 },
        };
        let r = probes::probe_contraction(&cfg, &probe, ContractionBound::UnboundedGaussian, &SamplingConfig::default())
            .unwrap();
        violations += r.violations.unwrap();
        pairs += r.evaluated;
        worst = worst.max(r.max_ratio_over_bound.unwrap());
    }
    let mut identity = true;
    for d in 1..=8 {
        for n in 2..=16 {
            let a = bounds::bound_unbounded_gaussian(&Lookup::Identity, d, n, n).value;
            let b = bounds::bound_unbounded_equal_n(&Lookup::Identity, d, n).value;
            identity &= a.to_bits() == b.to_bits();
        }
    }
    line(
        violations == 0 && identity,
        format!(
            "{pairs} pairs, radius 5, N,M in 2..16 with N != M: {violations} violations (max ratio/bound {worst:.2e}); N=M corollary bitwise equal: {identity}"
        ),
    )
}

fn cross_attention() -> Line {
    let sampling = SamplingConfig { samples: 2000, seed: SEED };
    let mut violations = 0;
    let mut corrected_violations = 0;
    let mut worst = f64::NEG_INFINITY;
    let mut worst_corrected = f64::NEG_INFINITY;
    let mut unequal = 0;
    for t in 0..1000u64 {
        let mut r = rng::stream_rng(SEED + 7, t);
        let d = 1 + rng::index(&mut r, 3);
        let g = if t % 2 == 0 { Potential::gaussian(d) } else { Potential::dot_product(d, 0.5) };
        let cfg = AttentionConfig::new(g, Lookup::Identity).unwrap();
        let domain = DomainBox::cube(d, -1.0, 1.0).unwrap();
        let q: Vec<f64> = (0..d).map(|_| rng::uniform_in(&mut r, -1.0, 1.0)).collect();
        let n = 1 + rng::index(&mut r, 12);
        let m = 1 + rng::index(&mut r, 12);
        unequal += usize::from(n != m);
        let x = empirical(cloud(&mut r, n, d, -1.0, 1.0));
        let y = empirical(cloud(&mut r, m, d, -1.0, 1.0));
        let stated = bounds::bound_cross_attention(&cfg, &domain, &q, &sampling).unwrap();
        let corrected = bounds::bound_cross_attention_corrected(&cfg, &domain, &q, &sampling).unwrap();
        assert_ne!(stated.status, BoundStatus::Inapplicable);
        let a = kernels::attention_kernel(&cfg, &q, &x).unwrap();
        let b = kernels::attention_kernel(&cfg, &q, &y).unwrap();
        let dev = a.iter().zip(&b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
        let w = transport::w1(&x, &y).unwrap().value;
        let rhs = stated.value * w + 1e-7;
        worst = worst.max(dev - rhs);
        violations += usize::from(dev > rhs);
        let rhs = corrected.value * w + 1e-7;
        worst_corrected = worst_corrected.max(dev - rhs);
        corrected_violations += usize::from(dev > rhs);
    }
    let mut l = line(
        violations == 0,
        format!("1000 triples ({unequal} with |X| != |Y|): {violations} violations, max (deviation - bound) {worst:.2e}"),
    );
    l.unattainable = Some("the stated constant omits the sup(G)/eps(G) term of the in-measure softmatch estimate");
    l.checks.push((
        format!(
            "same 1000 triples against the corrected constant: {corrected_violations} violations, max (deviation - bound) {worst_corrected:.2e}"
        ),
        corrected_violations == 0,
    ));
    l
}

fn ratio_lemma() -> Line {
    let r = probes::check_ratio_lemma(&RatioLemmaConfig { seed: SEED, ..Default::default() }).unwrap();
    let ok = r.all_pass && r.max_excess_over_bound <= 1e-9 && r.max_ascent_excess <= 1e-6;
    line(
        ok,
        format!(
            "n <= 1000: max (f - bound) {:.2e} <= 1e-9; ascent on {} sizes, max excess over reduction {:.2e} <= 1e-6",
            r.max_excess_over_bound, r.ascent_sizes, r.max_ascent_excess
        ),
    )
}

fn product_lemma() -> Line {
    let r = probes::check_product_lemma(500, 8, 3, SEED).unwrap();
    line(
        r.violations == 0,
        format!("500 instances: {} violations, max excess {:.2e} (tolerance 1e-9)", r.violations, r.max_excess),
    )
}

fn deq_layer() -> Layer {
    Layer::Attention(
        AttentionConfig::new(Potential::dot_product(2, 0.1), Lookup::Linear(Matrix::scaled_identity(2, 0.15))).unwrap(),
    )
}

fn deq() -> Line {
    let layer = deq_layer();
    let domain = DomainBox::cube(2, -1.0, 1.0).unwrap();
    let cert = layer.certified_lipschitz(&domain, &SamplingConfig::default()).unwrap();
    let certified = cert.status == BoundStatus::Applicable && cert.value < 0.9;
    let mut r = rng::stream_rng(SEED, 9);
    let x = cloud(&mut r, 8, 2, -0.5, 0.5);
    let h1 = cloud(&mut r, 8, 2, -0.5, 0.5);
    let h2 = cloud(&mut r, 8, 2, -0.5, 0.5);
    let a = dynamics::deq_solve(&layer, &x, &h1, &Injection::AddInput, 1e-13, 1000).unwrap();
    let b = dynamics::deq_solve(&layer, &x, &h2, &Injection::AddInput, 1e-13, 1000).unwrap();
    let agree = a.h_star.sup_l1_distance(&b.h_star).unwrap();
    let rate = a.contraction_estimate.max(b.contraction_estimate);
    // the certificate covers the iteration only while H + X stays in the box
    let inside = domain.contains_cloud(&a.h_star.add(&x).unwrap(), 0.0);
    let x2 = cloud(&mut r, 8, 2, -0.5, 0.5);
    let c = dynamics::deq_solve(&layer, &x2, &h1, &Injection::AddInput, 1e-13, 1000).unwrap();
    let distinct = c.h_star.sup_l1_distance(&a.h_star).unwrap();
    let ok = certified && a.converged && b.converged && inside && agree <= 1e-8 && rate <= cert.value + 0.05 && distinct > 1e-6;
    line(
        ok,
        format!(
            "certified bound {:.4} < 0.9; two starts agree to {agree:.1e} <= 1e-8; observed contraction {rate:.4} <= bound + 0.05; distinct inputs differ by {distinct:.2e}",
            cert.value
        ),
    )
}

fn invertibility() -> Line {
    let layer = Layer::Attention(
        AttentionConfig::new(Potential::gaussian(2), Lookup::Linear(Matrix::scaled_identity(2, 0.5))).unwrap(),
    );
    let domain = DomainBox::cube(2, -1.0, 1.0).unwrap();
    let lip = dynamics::sampled_lipschitz(&layer, &domain, 8, 400, SEED).unwrap();
    let mut worst = 0.0f64;
    for t in 0..100u64 {
        let mut r = rng::stream_rng(SEED + 11, t);
        let x = cloud(&mut r, 8, 2, -1.0, 1.0);
        let y = dynamics::residual_forward(&layer, &x).unwrap();
        let inv = dynamics::invert_residual(&layer, &y, 1e-12, 2000).unwrap();
        worst = worst.max(inv.x.sup_l1_distance(&x).unwrap());
    }
    line(
        lip <= 0.9 && worst <= 1e-7,
        format!("sampled Lip(g) {lip:.4} <= 0.9; 100 clouds, max round-trip error {worst:.2e} <= 1e-7"),
    )
}

fn main() {
    let start = Instant::now();
    let mut lines: Vec<(&str, Line)> = Vec::new();
    let (eq, mh) = kernel_equivalence();
    lines.push(("kernel/matrix equivalence", eq));
    lines.push(("multi-head equivalence", mh));
    lines.push(("W1 exactness", w1_exactness()));
    lines.push(("bounded contraction", bounded_contraction()));
    lines.push(("unbounded gaussian", unbounded_gaussian()));
    lines.push(("cross-attention", cross_attention()));
    lines.push(("ratio lemma", ratio_lemma()));
    lines.push(("product-measure lemma", product_lemma()));
    lines.push(("DEQ fixed point", deq()));
    lines.push(("residual invertibility", invertibility()));
    let mut failed = 0;
    let mut unattainable = 0;
    for (i, (name, l)) in lines.iter().enumerate() {
        let tag = if l.passed { "PASS" } else { "FAIL" };
        println!("criterion {:>2} [{tag}] {name}: {}", i + 1, l.detail);
        if !l.passed {
            match l.unattainable {
                Some(reason) => {
                    println!("             unattainable as stated: {reason}");
                    unattainable += 1;
                }
                None => failed += 1,
            }
        }
        for (text, ok) in &l.checks {
            println!("             [{}] {text}", if *ok { "PASS" } else { "FAIL" });
            failed += usize::from(!ok);
        }
    }
    let total = start.elapsed();
    let passed = lines.iter().filter(|(_, l)| l.passed).count();
    println!(
        "acceptance: {passed}/{} criteria passed as stated, {unattainable} unattainable as stated, {failed} unexpected failures, {total:.2?}",
        lines.len()
    );
    if failed > 0 || total > Duration::from_secs(300) {
        std::process::exit(1);
    }
}
