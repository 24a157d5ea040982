//! One function per subcommand. Each validates its slice of the config,
//! runs, and reports whether the invariants it checks held.

use serde_json::json;
use wattn_core::bounds::{self, BoundReport, BoundStatus};
use wattn_core::dynamics::{self, Injection, Layer, Schedule};
use wattn_core::kernels::Lookup;
use wattn_core::probes::{
    self, ContractionBound, EquivalenceConfig, Perturbation, ProbeConfig, ProbeResult, RatioLemmaConfig,
    SamplingDomain,
};
use wattn_core::rng;
use wattn_core::transport::{self, GroundMetric};
use wattn_core::{DomainBox, PointCloud};

use crate::config::{Command, MetricArg, PotentialSpec, RunConfig, TheoremArg};
use crate::error::{CliError, Result};
use crate::io;
use crate::report::Outcome;

pub fn run(command: Command, cfg: &RunConfig) -> Result<Outcome> {
    match command {
        Command::Equiv => equiv(cfg),
        Command::W1 => w1(cfg),
        Command::Bound => bound(cfg),
        Command::Probe => probe(cfg),
        Command::Dynamics => run_dynamics(cfg),
        Command::Deq => deq(cfg),
        Command::Invert => invert(cfg),
        Command::Lemmas => lemmas(cfg),
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("serializable")
}

fn verdict(passed: bool) -> &'static str {
    if passed {
        "PASS"
    } else {
        "FAIL"
    }
}

fn inputs(cfg: &RunConfig) -> &[std::path::PathBuf] {
    cfg.inputs.as_deref().unwrap_or(&[])
}

/// First input file, or a random cloud in `lower..upper` drawn from stream `stream`.
fn input_cloud(cfg: &RunConfig, d: usize, lower: f64, upper: f64, stream: u64) -> Result<PointCloud> {
    match inputs(cfg).first() {
        Some(p) => io::read_cloud(p),
        None => Ok(random_cloud(cfg.seed(), stream, cfg.particles.unwrap_or(8), d, lower, upper)),
    }
}

pub fn random_cloud(seed: u64, stream: u64, n: usize, d: usize, lower: f64, upper: f64) -> PointCloud {
    let mut r = rng::stream_rng(seed, stream);
    let data = (0..n * d).map(|_| rng::uniform_in(&mut r, lower, upper)).collect();
    PointCloud::new(d, data).expect("finite data")
}

fn equiv(cfg: &RunConfig) -> Result<Outcome> {
    let defaults = EquivalenceConfig::default();
    let ec = EquivalenceConfig {
        instances: cfg.instances.unwrap_or(defaults.instances),
        multi_head_instances: cfg.multi_head_instances.unwrap_or(defaults.multi_head_instances),
        seed: cfg.seed(),
        sabotage: cfg.sabotage.unwrap_or(false),
        ..defaults
    };
    let r = probes::run_equivalence(&ec)?;
    let summary = format!(
        "equiv: {} single-head max deviation {:.3e}, {} multi-head max deviation {:.3e}, tolerance {:.0e}: {}",
        r.instances,
        r.max_deviation,
        r.multi_head_instances,
        r.multi_head_max_deviation,
        r.tolerance,
        verdict(r.passed)
    );
    Ok(Outcome {
        passed: r.passed,
        result: to_value(&r),
        summary,
    })
}

fn w1(cfg: &RunConfig) -> Result<Outcome> {
    let paths = inputs(cfg);
    if paths.len() != 2 {
        return Err(CliError::config("w1 takes exactly two input files"));
    }
    let mu = io::read_measure(&paths[0])?;
    let nu = io::read_measure(&paths[1])?;
    let metric = match cfg.metric.unwrap_or(MetricArg::L1) {
        MetricArg::L1 => GroundMetric::L1,
        MetricArg::L2 => GroundMetric::L2,
    };
    let r = transport::w1_with_metric(&mu, &nu, metric)?;
    let cert = r.plan.certificate();
    let passed = cert.max_dual_violation <= 1e-9 && cert.max_row_error <= 1e-9 && cert.max_col_error <= 1e-9;
    let mut result = json!({
        "value": r.value,
        "dual_gap": r.dual_gap,
        "metric": metric,
        "certificate": cert,
    });
    if cfg.plan.unwrap_or(false) {
        let rows: Vec<&[f64]> = r.plan.gamma.chunks(r.plan.cols).collect();
        result["plan"] = json!(rows);
    }
    Ok(Outcome {
        passed,
        summary: format!("w1: value {} (dual gap {:.2e}): {}", r.value, r.dual_gap, verdict(passed)),
        result,
    })
}

fn bound(cfg: &RunConfig) -> Result<Outcome> {
    let d = cfg.dim_or(2);
    let theorem = cfg.theorem.unwrap_or(TheoremArg::Bounded);
    let att = cfg.attention(d)?;
    let domain = cfg.domain_box(d)?;
    let sampling = cfg.sampling();
    let n = cfg.n.unwrap_or(16);
    let report: BoundReport = match theorem {
        TheoremArg::Bounded => bounds::bound_bounded_contraction(&att, &domain, &sampling),
        TheoremArg::BoundedCorrected => bounds::bound_bounded_contraction_corrected(&att, &domain, &sampling),
        TheoremArg::Pointwise => bounds::bound_pointwise_query(&att, &domain, &sampling),
        TheoremArg::UnboundedGaussian => {
            require_gaussian(cfg)?;
            bounds::bound_unbounded_gaussian(&att.lookup, d, n, cfg.m.unwrap_or(n))
        }
        TheoremArg::UnboundedEqualN => {
            require_gaussian(cfg)?;
            bounds::bound_unbounded_equal_n(&att.lookup, d, n)
        }
        TheoremArg::CrossAttention | TheoremArg::CrossAttentionCorrected => {
            let q = cfg.query.clone().unwrap_or_else(|| vec![0.0; d]);
            if q.len() != d {
                return Err(CliError::config(format!("query must have {d} coordinates")));
            }
            if theorem == TheoremArg::CrossAttention {
                bounds::bound_cross_attention(&att, &domain, &q, &sampling)?
            } else {
                bounds::bound_cross_attention_corrected(&att, &domain, &q, &sampling)?
            }
        }
        TheoremArg::Components => bounds::component_taus(&att, &domain, &sampling),
    };
    let consistent = report.status == BoundStatus::Inapplicable || report.recompute() == Some(report.value);
    let passed = report.status != BoundStatus::Inapplicable && consistent;
    Ok(Outcome {
        passed,
        summary: format!("bound: {:?} = {} ({:?}): {}", report.theorem, report.value, report.status, verdict(passed)),
        result: to_value(&report),
    })
}

fn require_gaussian(cfg: &RunConfig) -> Result<()> {
    match cfg.potential {
        None | Some(PotentialSpec::Gaussian {}) => Ok(()),
        _ => Err(CliError::config("this theorem needs the gaussian potential")),
    }
}

fn probe(cfg: &RunConfig) -> Result<Outcome> {
    let d = cfg.dim_or(2);
    let att = cfg.attention(d)?;
    let sampling = cfg.sampling();
    let unbounded = cfg.component.is_none() && cfg.theorem == Some(TheoremArg::UnboundedGaussian);
    if unbounded {
        require_gaussian(cfg)?;
        if cfg.domain.is_some() {
            return Err(CliError::config("the unbounded theorem samples from a radius, not a domain"));
        }
    }
    let domain = if unbounded {
        SamplingDomain::Radius(cfg.radius.unwrap_or(5.0))
    } else {
        if cfg.radius.is_some() {
            return Err(CliError::config("radius only applies to the unbounded theorem"));
        }
        SamplingDomain::Box(cfg.domain_box(d)?)
    };
    let pc = ProbeConfig {
        seed: cfg.seed(),
        trials: cfg.trials.unwrap_or(1000),
        dim: d,
        n_range: (cfg.n_min.unwrap_or(2), cfg.n_max.unwrap_or(16)),
        domain,
        perturbation: cfg.perturbation.map(Perturbation::from).unwrap_or(Perturbation::Mixed { sigma: 0.1 }),
    };
    let (label, r): (String, ProbeResult) = match cfg.component {
        Some(c) => (format!("{c:?}"), probes::probe_component(c.into(), &att, &pc, &sampling)?),
        None => {
            let (label, which) = match cfg.theorem.unwrap_or(TheoremArg::Bounded) {
                TheoremArg::Bounded => ("bounded", ContractionBound::Bounded),
                TheoremArg::BoundedCorrected => ("bounded-corrected", ContractionBound::BoundedCorrected),
                TheoremArg::UnboundedGaussian => ("unbounded-gaussian", ContractionBound::UnboundedGaussian),
                other => return Err(CliError::config(format!("probe does not support theorem {other:?}"))),
            };
            (label.to_string(), probes::probe_contraction(&att, &pc, which, &sampling)?)
        }
    };
    if let Some(path) = &cfg.ratios_csv {
        io::write_ratios(path, &r.ratios)?;
    }
    let passed = r.violations.unwrap_or(0) == 0;
    let summary = format!(
        "probe {label}: {} trials ({} skipped), max ratio {:.6}, bound {}, violations {}: {}",
        r.evaluated,
        r.skipped,
        r.max_ratio,
        r.bound.map_or("none".to_string(), |b| format!("{b:.6}")),
        r.violations.map_or("n/a".to_string(), |v| v.to_string()),
        verdict(passed)
    );
    Ok(Outcome {
        passed,
        result: to_value(&r),
        summary,
    })
}

fn run_dynamics(cfg: &RunConfig) -> Result<Outcome> {
    let d = cfg.dim_or(2);
    let layer = cfg.layer(d)?;
    let x0 = input_cloud(cfg, d, -1.0, 1.0, 0)?;
    let steps = cfg.steps.unwrap_or(10);
    let traj = dynamics::run_particles(&Schedule::Tied(layer.clone()), &x0, steps)?;
    if let Some(path) = &cfg.trajectory {
        io::write_trajectory(path, &traj.states)?;
    }
    // attention with the identity lookup averages particles, so each state
    // stays in the bounding box of the previous one
    let averaging = matches!(&layer, Layer::Attention(a) if matches!(a.lookup, Lookup::Identity));
    let mut contained = true;
    if averaging {
        for w in traj.states.windows(2) {
            let b = DomainBox::bounding(&[&w[0]])?;
            contained &= b.contains_cloud(&w[1], 1e-12);
        }
    }
    let last = traj.states.last().expect("at least the input");
    let result = json!({
        "steps": steps,
        "per_step_w1": traj.per_step_w1,
        "final_state": io::cloud_file(last),
        "containment_checked": averaging,
        "containment_holds": contained,
    });
    Ok(Outcome {
        passed: contained,
        summary: format!(
            "dynamics: {steps} steps, last step W1 {:.3e}: {}",
            traj.per_step_w1.last().copied().unwrap_or(0.0),
            verdict(contained)
        ),
        result,
    })
}

fn deq(cfg: &RunConfig) -> Result<Outcome> {
    let d = cfg.dim_or(2);
    let layer = cfg.layer(d)?;
    let domain = cfg.domain_box(d)?;
    let x = input_cloud(cfg, d, -0.5, 0.5, 0)?;
    let tol = cfg.tol.unwrap_or(1e-12);
    let max_iter = cfg.max_iter.unwrap_or(1000);
    let zero = PointCloud::new(d, vec![0.0; x.len() * d])?;
    let other = random_cloud(cfg.seed(), 1, x.len(), d, -0.5, 0.5);
    let a = dynamics::deq_solve(&layer, &x, &zero, &Injection::AddInput, tol, max_iter)?;
    let b = dynamics::deq_solve(&layer, &x, &other, &Injection::AddInput, tol, max_iter)?;
    let agreement = a.h_star.sup_l1_distance(&b.h_star)?;
    let cert = layer.certified_lipschitz(&domain, &cfg.sampling());
    // the certificate covers the map only while H + X stays in the domain
    let in_domain = domain.contains_cloud(&a.h_star.add(&x)?, 0.0) && domain.contains_cloud(&x, 0.0);
    let certified = cert.as_ref().filter(|c| c.status == BoundStatus::Applicable).map(|c| c.value);
    let rate_ok = match certified {
        Some(c) => a.contraction_estimate <= c + 0.05 && b.contraction_estimate <= c + 0.05,
        None => true,
    };
    let passed = a.converged && b.converged && agreement <= 1e-8 && rate_ok;
    if let Some(path) = &cfg.trajectory {
        let lines: String = a
            .step_norms
            .iter()
            .enumerate()
            .map(|(k, s)| format!("{}\n", json!({ "iteration": k + 1, "step_norm": s })))
            .collect();
        io::write_text(path, &lines)?;
    }
    let result = json!({
        "h_star": io::cloud_file(&a.h_star),
        "iterations": [a.iterations, b.iterations],
        "residuals": [a.residual, b.residual],
        "converged": [a.converged, b.converged],
        "contraction_estimate": a.contraction_estimate.max(b.contraction_estimate),
        "agreement": agreement,
        "certified_bound": cert,
        "iterates_in_domain": in_domain,
    });
    Ok(Outcome {
        passed,
        summary: format!(
            "deq: {} iterations, agreement {agreement:.2e}, contraction {:.4} vs certified {}: {}",
            a.iterations,
            a.contraction_estimate,
            certified.map_or("none".to_string(), |c| format!("{c:.4}")),
            verdict(passed)
        ),
        result,
    })
}

fn invert(cfg: &RunConfig) -> Result<Outcome> {
    let d = cfg.dim_or(2);
    let layer = cfg.layer(d)?;
    let domain = cfg.domain_box(d)?;
    let n = cfg.particles.unwrap_or(8);
    let lip_max = cfg.lip_max.unwrap_or(0.9);
    let lip = dynamics::sampled_lipschitz(&layer, &domain, n, cfg.samples.unwrap_or(400), cfg.seed())?;
    if lip > lip_max {
        return Ok(Outcome {
            passed: false,
            summary: format!("invert: sampled Lip(g) {lip:.4} exceeds {lip_max}: FAIL"),
            result: json!({ "sampled_lipschitz": lip, "lip_max": lip_max }),
        });
    }
    let (lo, hi) = domain.bounds().expect("box");
    let clouds: Vec<PointCloud> = if inputs(cfg).is_empty() {
        (0..cfg.clouds.unwrap_or(100))
            .map(|t| {
                let mut r = rng::stream_rng(cfg.seed(), 1 + t as u64);
                let data = (0..n * d).map(|i| rng::uniform_in(&mut r, lo[i % d], hi[i % d])).collect();
                PointCloud::new(d, data)
            })
            .collect::<wattn_core::Result<_>>()?
    } else {
        inputs(cfg).iter().map(|p| io::read_cloud(p)).collect::<Result<_>>()?
    };
    let tol = cfg.tol.unwrap_or(1e-12);
    let max_iter = cfg.max_iter.unwrap_or(1000);
    let mut worst = 0.0f64;
    let mut worst_index = 0;
    let mut max_iterations = 0;
    let mut all_converged = true;
    for (i, x) in clouds.iter().enumerate() {
        let y = dynamics::residual_forward(&layer, x)?;
        let inv = dynamics::invert_residual(&layer, &y, tol, max_iter)?;
        let err = inv.x.sup_l1_distance(x)?;
        if err > worst {
            worst = err;
            worst_index = i;
        }
        max_iterations = max_iterations.max(inv.iterations);
        all_converged &= inv.converged;
    }
    let passed = worst <= 1e-7 && all_converged;
    let mut result = json!({
        "sampled_lipschitz": lip,
        "lip_max": lip_max,
        "clouds": clouds.len(),
        "max_round_trip_error": worst,
        "max_iterations": max_iterations,
        "all_converged": all_converged,
    });
    if !passed {
        result["worst_instance"] = json!(io::cloud_file(&clouds[worst_index]));
    }
    Ok(Outcome {
        passed,
        summary: format!(
            "invert: {} clouds, sampled Lip(g) {lip:.4}, max round-trip error {worst:.2e}: {}",
            clouds.len(),
            verdict(passed)
        ),
        result,
    })
}

fn lemmas(cfg: &RunConfig) -> Result<Outcome> {
    let any = cfg.ratio.is_some() || cfg.product.is_some() || cfg.local_lip.is_some();
    let pick = |flag: Option<bool>| flag.unwrap_or(!any);
    let mut result = json!({});
    let mut lines = Vec::new();
    let mut passed = true;
    if pick(cfg.ratio) {
        let rc = RatioLemmaConfig {
            n_max: cfg.n_max.unwrap_or(1000),
            seed: cfg.seed(),
            ..Default::default()
        };
        let r = probes::check_ratio_lemma(&rc)?;
        passed &= r.all_pass;
        lines.push(format!(
            "ratio lemma: n <= {}, max excess over bound {:.3e}, max ascent excess {:.3e}: {}",
            rc.n_max,
            r.max_excess_over_bound,
            r.max_ascent_excess,
            verdict(r.all_pass)
        ));
        result["ratio"] = to_value(&r);
    }
    if pick(cfg.product) {
        let r = probes::check_product_lemma(cfg.trials.unwrap_or(500), 8, 3, cfg.seed())?;
        let ok = r.violations == 0;
        passed &= ok;
        lines.push(format!(
            "product lemma: {} trials, max excess {:.3e}, violations {}: {}",
            r.trials,
            r.max_excess,
            r.violations,
            verdict(ok)
        ));
        result["product"] = to_value(&r);
    }
    if pick(cfg.local_lip) {
        let r = probes::check_local_lip_lemma(cfg.trials.unwrap_or(20), cfg.dim_or(2), cfg.samples.unwrap_or(2000), cfg.seed())?;
        passed &= r.all_pass;
        lines.push(format!(
            "local Lipschitz lemma: max relative error {:.3e}: {}",
            r.max_relative_error,
            verdict(r.all_pass)
        ));
        result["local_lip"] = to_value(&r);
    }
    Ok(Outcome {
        passed,
        result,
        summary: lines.join("\n"),
    })
}
