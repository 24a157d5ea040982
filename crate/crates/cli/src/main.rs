use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wattn::commands;
use wattn::config::{Command, ComponentArg, MetricArg, RunConfig, TheoremArg};
use wattn::io;
use wattn::report::Report;

/// Measure-theoretic attention: kernels, exact W1, Lipschitz bounds and probes.
#[derive(Debug, Parser)]
#[command(name = "wattn", version)]
struct Cli {
    /// JSON run config; its fields override the flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Args, Default)]
struct ModelArgs {
    /// Point dimension.
    #[arg(long)]
    dim: Option<usize>,
    /// Sample count for sampled regularity constants.
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Kernel pipeline against matrix attention on random instances.
    Equiv {
        #[arg(long)]
        instances: Option<usize>,
        #[arg(long)]
        multi_head_instances: Option<usize>,
        /// Perturb one weight on the kernel side; the run must fail.
        #[arg(long)]
        sabotage: bool,
    },
    /// Exact W1 between two point-cloud files.
    W1 {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, value_enum)]
        metric: Option<MetricArg>,
        /// Include the transport plan.
        #[arg(long)]
        plan: bool,
    },
    /// Evaluate a Lipschitz bound with full provenance.
    Bound {
        #[arg(long, value_enum)]
        theorem: Option<TheoremArg>,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        query: Option<Vec<f64>>,
    },
    /// Sample contraction ratios against a bound.
    Probe {
        #[arg(long, value_enum)]
        theorem: Option<TheoremArg>,
        #[arg(long, value_enum)]
        component: Option<ComponentArg>,
        #[arg(long)]
        trials: Option<usize>,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        n_min: Option<usize>,
        #[arg(long)]
        n_max: Option<usize>,
        #[arg(long)]
        radius: Option<f64>,
        /// Dump every ratio as CSV.
        #[arg(long)]
        ratios_csv: Option<PathBuf>,
    },
    /// Iterate a layer on a particle cloud.
    Dynamics {
        input: Option<PathBuf>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        particles: Option<usize>,
        #[command(flatten)]
        model: ModelArgs,
        /// JSON lines, one state per line.
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
    /// Fixed point of a weight-tied layer with input injection.
    Deq {
        input: Option<PathBuf>,
        #[arg(long)]
        particles: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
    /// Round-trip inversion of the residual block x + g(x).
    Invert {
        inputs: Vec<PathBuf>,
        #[arg(long)]
        clouds: Option<usize>,
        #[arg(long)]
        particles: Option<usize>,
        #[arg(long)]
        lip_max: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Numerical checks of the auxiliary lemmas.
    Lemmas {
        #[arg(long)]
        ratio: bool,
        #[arg(long)]
        product: bool,
        #[arg(long)]
        local_lip: bool,
        #[arg(long)]
        nmax: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
        #[command(flatten)]
        model: ModelArgs,
    },
}

fn flag(b: bool) -> Option<bool> {
    b.then_some(true)
}

fn model(cfg: &mut RunConfig, m: ModelArgs) {
    cfg.dim = m.dim;
    cfg.samples = m.samples;
}

fn from_flags(cli: Cli) -> (Command, RunConfig) {
    let mut c = RunConfig {
        seed: cli.seed,
        ..Default::default()
    };
    let command = match cli.command {
        Sub::Equiv {
            instances,
            multi_head_instances,
            sabotage,
        } => {
            c.instances = instances;
            c.multi_head_instances = multi_head_instances;
            c.sabotage = flag(sabotage);
            Command::Equiv
        }
        Sub::W1 { a, b, metric, plan } => {
            c.inputs = Some(vec![a, b]);
            c.metric = metric;
            c.plan = flag(plan);
            Command::W1
        }
        Sub::Bound {
            theorem,
            model: m,
            n,
            m: mm,
            query,
        } => {
            c.theorem = theorem;
            model(&mut c, m);
            c.n = n;
            c.m = mm;
            c.query = query;
            Command::Bound
        }
        Sub::Probe {
            theorem,
            component,
            trials,
            model: m,
            n_min,
            n_max,
            radius,
            ratios_csv,
        } => {
            c.theorem = theorem;
            c.component = component;
            c.trials = trials;
            model(&mut c, m);
            c.n_min = n_min;
            c.n_max = n_max;
            c.radius = radius;
            c.ratios_csv = ratios_csv;
            Command::Probe
        }
        Sub::Dynamics {
            input,
            steps,
            particles,
            model: m,
            trajectory,
        } => {
            c.inputs = input.map(|p| vec![p]);
            c.steps = steps;
            c.particles = particles;
            model(&mut c, m);
            c.trajectory = trajectory;
            Command::Dynamics
        }
        Sub::Deq {
            input,
            particles,
            tol,
            max_iter,
            model: m,
            trajectory,
        } => {
            c.inputs = input.map(|p| vec![p]);
            c.particles = particles;
            c.tol = tol;
            c.max_iter = max_iter;
            model(&mut c, m);
            c.trajectory = trajectory;
            Command::Deq
        }
        Sub::Invert {
            inputs,
            clouds,
            particles,
            lip_max,
            tol,
            max_iter,
            model: m,
        } => {
            c.inputs = (!inputs.is_empty()).then_some(inputs);
            c.clouds = clouds;
            c.particles = particles;
            c.lip_max = lip_max;
            c.tol = tol;
            c.max_iter = max_iter;
            model(&mut c, m);
            Command::Invert
        }
        Sub::Lemmas {
            ratio,
            product,
            local_lip,
            nmax,
            trials,
            model: m,
        } => {
            c.ratio = flag(ratio);
            c.product = flag(product);
            c.local_lip = flag(local_lip);
            c.n_max = nmax;
            c.trials = trials;
            model(&mut c, m);
            Command::Lemmas
        }
    };
    c.command = Some(command);
    (command, c)
}

fn execute(cli: Cli) -> wattn::Result<bool> {
    let config_path = cli.config.clone();
    let out = cli.out.clone();
    let (command, flags) = from_flags(cli);
    let cfg = match &config_path {
        Some(p) => flags.overlay(RunConfig::parse_json(&io::read_text(p)?)?)?,
        None => flags,
    };
    let outcome = commands::run(command, &cfg)?;
    let report = Report::new(command, cfg, &outcome);
    let json = report.to_json();
    match &out {
        Some(p) => io::write_text(p, &json)?,
        None => println!("{json}"),
    }
    eprintln!("{}", outcome.summary);
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
