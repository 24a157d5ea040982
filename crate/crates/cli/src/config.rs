//! Run configuration. Command-line flags and an optional JSON file both fill
//! a [`RunConfig`]; fields present in the file win.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use wattn_core::dynamics::Layer;
use wattn_core::kernels::{Activation, AffineLayer, AttentionConfig, FfnConfig, Head, Lookup, MultiHeadConfig};
use wattn_core::potentials::{Potential, SamplingConfig};
use wattn_core::probes::{Component, Perturbation};
use wattn_core::{DomainBox, Matrix};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Equiv,
    W1,
    Bound,
    Probe,
    Dynamics,
    Deq,
    Invert,
    Lemmas,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum TheoremArg {
    Bounded,
    BoundedCorrected,
    Pointwise,
    UnboundedGaussian,
    UnboundedEqualN,
    CrossAttention,
    CrossAttentionCorrected,
    Components,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ComponentArg {
    SoftmatchInX,
    SoftmatchInMeasure,
    Projection,
    Lookup,
}

impl From<ComponentArg> for Component {
    fn from(c: ComponentArg) -> Self {
        match c {
            ComponentArg::SoftmatchInX => Component::SoftmatchInX,
            ComponentArg::SoftmatchInMeasure => Component::SoftmatchInMeasure,
            ComponentArg::Projection => Component::Projection,
            ComponentArg::Lookup => Component::Lookup,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum MetricArg {
    L1,
    L2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    Gaussian {},
    DotProduct {
        scale: f64,
    },
    ScaledDotProduct {
        #[serde(rename = "W_Q")]
        w_q: Vec<Vec<f64>>,
        #[serde(rename = "W_K")]
        w_k: Vec<Vec<f64>>,
        scale: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LookupSpec {
    Identity {},
    Linear {
        #[serde(rename = "W_V")]
        w_v: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeadSpec {
    pub potential: PotentialSpec,
    #[serde(default = "identity_lookup")]
    pub lookup: LookupSpec,
    #[serde(rename = "W_O")]
    pub w_o: Vec<Vec<f64>>,
}

fn identity_lookup() -> LookupSpec {
    LookupSpec::Identity {}
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationSpec {
    Relu,
    Tanh,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineSpec {
    pub weight: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub activation: ActivationSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum PerturbationSpec {
    Resample {},
    Jitter { sigma: f64 },
    DropPoint {},
    DuplicatePoint {},
    Mixed { sigma: f64 },
}

impl From<PerturbationSpec> for Perturbation {
    fn from(p: PerturbationSpec) -> Self {
        match p {
            PerturbationSpec::Resample {} => Perturbation::Resample,
            PerturbationSpec::Jitter { sigma } => Perturbation::Jitter { sigma },
            PerturbationSpec::DropPoint {} => Perturbation::DropPoint,
            PerturbationSpec::DuplicatePoint {} => Perturbation::DuplicatePoint,
            PerturbationSpec::Mixed { sigma } => Perturbation::Mixed { sigma },
        }
    }
}

/// Everything a run needs. Absent fields take per-command defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    pub seed: Option<u64>,
    pub inputs: Option<Vec<PathBuf>>,
    pub dim: Option<usize>,
    pub potential: Option<PotentialSpec>,
    pub lookup: Option<LookupSpec>,
    pub heads: Option<Vec<HeadSpec>>,
    pub ffn: Option<Vec<AffineSpec>>,
    pub domain: Option<DomainSpec>,
    /// Sample count for sampled regularity constants.
    pub samples: Option<usize>,
    pub theorem: Option<TheoremArg>,
    pub component: Option<ComponentArg>,
    pub trials: Option<usize>,
    pub n_min: Option<usize>,
    pub n_max: Option<usize>,
    pub radius: Option<f64>,
    pub perturbation: Option<PerturbationSpec>,
    /// Support sizes for the unbounded bounds.
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub query: Option<Vec<f64>>,
    pub instances: Option<usize>,
    pub multi_head_instances: Option<usize>,
    pub sabotage: Option<bool>,
    pub metric: Option<MetricArg>,
    pub plan: Option<bool>,
    pub steps: Option<usize>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub clouds: Option<usize>,
    pub particles: Option<usize>,
    pub lip_max: Option<f64>,
    pub ratio: Option<bool>,
    pub product: Option<bool>,
    pub local_lip: Option<bool>,
    pub ratios_csv: Option<PathBuf>,
    pub trajectory: Option<PathBuf>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($f:ident),* $(,)?) => {
        RunConfig { $($f: $top.$f.or($base.$f)),* }
    };
}

impl RunConfig {
    pub fn parse_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::config(e.to_string()))
    }

    /// `top` wins wherever it sets a field.
    pub fn overlay(self, top: RunConfig) -> Result<RunConfig> {
        if let (Some(a), Some(b)) = (self.command, top.command) {
            if a != b {
                return Err(CliError::config(format!("config is for {b:?} but the command is {a:?}")));
            }
        }
        let base = self;
        Ok(overlay!(base, top; command, seed, inputs, dim, potential, lookup, heads, ffn, domain, samples,
            theorem, component, trials, n_min, n_max, radius, perturbation, n, m, query, instances,
            multi_head_instances, sabotage, metric, plan, steps, tol, max_iter, clouds, particles, lip_max,
            ratio, product, local_lip, ratios_csv, trajectory))
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn dim_or(&self, default: usize) -> usize {
        self.dim.unwrap_or(default)
    }

    pub fn sampling(&self) -> SamplingConfig {
        SamplingConfig {
            samples: self.samples.unwrap_or(SamplingConfig::default().samples),
            seed: self.seed(),
        }
    }

    /// The configured box, or `[-1, 1]^d`.
    pub fn domain_box(&self, d: usize) -> Result<DomainBox> {
        match &self.domain {
            Some(s) => {
                if s.lower.len() != d || s.upper.len() != d {
                    return Err(CliError::config(format!("domain must have {d} coordinates")));
                }
                Ok(DomainBox::bounded(s.lower.clone(), s.upper.clone())?)
            }
            None => Ok(DomainBox::cube(d, -1.0, 1.0)?),
        }
    }

    pub fn attention(&self, d: usize) -> Result<AttentionConfig> {
        let potential = build_potential(self.potential.as_ref().unwrap_or(&PotentialSpec::Gaussian {}), d)?;
        let lookup = build_lookup(self.lookup.as_ref().unwrap_or(&LookupSpec::Identity {}))?;
        Ok(AttentionConfig::new(potential, lookup)?)
    }

    /// A Transformer layer when heads are configured, plain attention otherwise.
    pub fn layer(&self, d: usize) -> Result<Layer> {
        match &self.heads {
            None => {
                if self.ffn.is_some() {
                    return Err(CliError::config("ffn needs heads"));
                }
                Ok(Layer::Attention(self.attention(d)?))
            }
            Some(specs) => {
                let heads = specs
                    .iter()
                    .map(|h| {
                        let attention = AttentionConfig::new(build_potential(&h.potential, d)?, build_lookup(&h.lookup)?)?;
                        Ok(Head {
                            attention,
                            w_o: matrix(&h.w_o)?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let mh = MultiHeadConfig::new(heads)?;
                let ffn = match &self.ffn {
                    Some(layers) => FfnConfig::new(
                        layers
                            .iter()
                            .map(|l| {
                                Ok(AffineLayer {
                                    weight: matrix(&l.weight)?,
                                    bias: l.bias.clone(),
                                    activation: match l.activation {
                                        ActivationSpec::Relu => Activation::Relu,
                                        ActivationSpec::Tanh => Activation::Tanh,
                                        ActivationSpec::Identity => Activation::Identity,
                                    },
                                })
                            })
                            .collect::<Result<Vec<_>>>()?,
                    )?,
                    None => FfnConfig::identity(mh.dim_out()),
                };
                Ok(Layer::Transformer { mh, ffn })
            }
        }
    }
}

fn matrix(rows: &[Vec<f64>]) -> Result<Matrix> {
    Ok(Matrix::from_rows(rows)?)
}

pub fn build_potential(spec: &PotentialSpec, d: usize) -> Result<Potential> {
    match spec {
        PotentialSpec::Gaussian {} => Ok(Potential::gaussian(d)),
        PotentialSpec::DotProduct { scale } => Ok(Potential::dot_product(d, *scale)),
        PotentialSpec::ScaledDotProduct { w_q, w_k, scale } => {
            let p = Potential::scaled_dot_product(matrix(w_q)?, matrix(w_k)?, *scale)?;
            if p.dim() != d {
                return Err(CliError::config(format!("W_Q has {} columns, expected {d}", p.dim())));
            }
            Ok(p)
        }
    }
}

pub fn build_lookup(spec: &LookupSpec) -> Result<Lookup> {
    match spec {
        LookupSpec::Identity {} => Ok(Lookup::Identity),
        LookupSpec::Linear { w_v } => Ok(Lookup::Linear(matrix(w_v)?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(RunConfig::parse_json(r#"{"seed": 1, "sede": 2}"#).is_err());
        assert!(RunConfig::parse_json(r#"{"potential": {"kind": "gaussian", "scale": 1}}"#).is_err());
        assert!(RunConfig::parse_json(r#"{"potential": {"kind": "gaussian"}}"#).is_ok());
        assert!(RunConfig::parse_json(r#"{"perturbation": {"mode": "resample", "sigma": 1}}"#).is_err());
    }

    #[test]
    fn potential_schema() {
        let c = RunConfig::parse_json(
            r#"{"potential": {"kind":"scaled_dot_product","W_Q":[[1,0],[0,1]],"W_K":[[1,0],[0,1]],"scale":0.70710678}}"#,
        )
        .unwrap();
        assert!(c.attention(2).is_ok());
        assert!(c.attention(3).is_err());
    }

    #[test]
    fn file_overrides_flags() {
        let flags = RunConfig {
            seed: Some(1),
            trials: Some(10),
            ..Default::default()
        };
        let file = RunConfig {
            seed: Some(7),
            ..Default::default()
        };
        let merged = flags.overlay(file).unwrap();
        assert_eq!(merged.seed, Some(7));
        assert_eq!(merged.trials, Some(10));
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let b = RunConfig {
            seed: Some(1),
            ..Default::default()
        };
        assert_eq!(a.hash(), RunConfig::default().hash());
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn command_mismatch_is_an_error() {
        let flags = RunConfig {
            command: Some(Command::W1),
            ..Default::default()
        };
        let file = RunConfig {
            command: Some(Command::Probe),
            ..Default::default()
        };
        assert!(flags.overlay(file).is_err());
    }
}
