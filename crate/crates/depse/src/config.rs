//! JSON run configuration.
//!
//! Unknown keys are rejected everywhere so typos fail fast, before any
//! processing starts. Every section has defaults; a minimal config can be an
//! empty object plus whatever the chosen command needs (`io.input` for
//! enhancement, a `simulate` section for synthetic runs, ...).

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{DepseError, Result};
use crate::field::{Field, RealField};
use crate::sampler::{Method, NoiseSpec, SamplerConfig};
use crate::schedule::DiffusionSchedule;
use crate::score::{ExternalScoreModel, GaussianPrior, GmmPrior, ScoreEndpoint, ScoreModel};
use crate::signal::StftParams;

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub sde: SdeSection,
    #[serde(default)]
    pub sampler: SamplerSection,
    #[serde(default)]
    pub nmf: NmfSection,
    #[serde(default)]
    pub stft: StftSection,
    #[serde(default)]
    pub score: ScoreSection,
    #[serde(default)]
    pub io: IoSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluate: Option<EvaluateSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdeSection {
    pub gamma: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub t_eps: f64,
    #[serde(rename = "T")]
    pub t_max: f64,
    #[serde(rename = "N")]
    pub n_steps: usize,
}

impl Default for SdeSection {
    fn default() -> Self {
        SdeSection {
            gamma: 1.5,
            sigma_min: 0.05,
            sigma_max: 0.5,
            t_eps: 0.03,
            t_max: 1.0,
            n_steps: 30,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    pub method: String,
    /// Langevin step ratio.
    pub r: f64,
    /// Guidance weight on even step indices (guided method only).
    pub lambda_even: f64,
    pub corrector_steps: usize,
    pub seed: u64,
}

impl Default for SamplerSection {
    fn default() -> Self {
        SamplerSection {
            method: "depse_tl".into(),
            r: 0.5,
            lambda_even: 1.5,
            corrector_steps: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NmfSection {
    pub rank: usize,
    pub iters_per_step: usize,
}

impl Default for NmfSection {
    fn default() -> Self {
        NmfSection {
            rank: 4,
            iters_per_step: 2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StftSection {
    pub window: usize,
    pub hop: usize,
    /// Amplitude-compression exponent; absent means off.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compression: Option<f64>,
}

impl Default for StftSection {
    fn default() -> Self {
        StftSection {
            window: 510,
            hop: 127,
            compression: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "kind")]
pub enum ScoreSection {
    /// Per-bin Gaussian prior broadcast from scalars.
    Gaussian {
        mean_re: f64,
        mean_im: f64,
        variance: f64,
    },
    /// Mixture of broadcast Gaussian components.
    Gmm { components: Vec<GmmComponent> },
    /// Externally served score model.
    External { endpoint: EndpointSection },
}

impl Default for ScoreSection {
    fn default() -> Self {
        ScoreSection::Gaussian {
            mean_re: 0.0,
            mean_im: 0.0,
            variance: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GmmComponent {
    pub weight: f64,
    pub mean_re: f64,
    pub mean_im: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum EndpointSection {
    /// `host:port`
    Tcp(String),
    /// argv of a score-server subprocess
    Command(Vec<String>),
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct IoSection {
    /// Input WAV paths for enhancement.
    #[serde(default)]
    pub input: Vec<String>,
    /// Output directory for enhanced WAVs.
    #[serde(default)]
    pub output: Option<String>,
    /// Report path (JSON). Written by every command that produces one.
    #[serde(default)]
    pub report: Option<String>,
    /// Output encoding: "float32" (default) or "pcm16".
    #[serde(default)]
    pub encoding: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    /// SNRs (dB) of the synthetic mixtures.
    pub snrs: Vec<f64>,
    pub trials: usize,
    /// Utterance length in samples.
    #[serde(default = "default_sim_samples")]
    pub samples: usize,
    /// "gaussian" runs the conjugate posterior-mean oracle;
    /// "gmm" runs the SNR-sweep improvement scenario.
    #[serde(default = "default_sim_prior")]
    pub prior: String,
    /// Methods to run, subset of {prior, guided, depse_il, depse_tl}.
    #[serde(default = "default_sim_methods")]
    pub methods: Vec<String>,
}

fn default_sim_samples() -> usize {
    16_000
}
fn default_sim_prior() -> String {
    "gmm".into()
}
fn default_sim_methods() -> Vec<String> {
    vec!["depse_il".into(), "depse_tl".into()]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateSection {
    pub triples: Vec<EvaluateTriple>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateTriple {
    pub reference: String,
    pub noise: String,
    pub estimate: String,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: RunConfig =
            serde_json::from_str(text).map_err(|e| DepseError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| DepseError::Config(format!("{path}: {e}")))?;
        Self::from_json(&text)
    }

    pub fn method(&self) -> Result<Method> {
        match self.sampler.method.as_str() {
            "prior" => Ok(Method::Prior),
            "guided" => Ok(Method::Guided),
            "depse_il" => Ok(Method::DepseIl),
            "depse_tl" => Ok(Method::DepseTl),
            other => Err(DepseError::Config(format!(
                "unknown sampler method '{other}' (expected prior|guided|depse_il|depse_tl)"
            ))),
        }
    }

    /// Schema-level validation; runs before any processing.
    pub fn validate(&self) -> Result<()> {
        self.method()?;
        self.schedule()?;
        if !(self.sampler.r.is_finite() && self.sampler.r > 0.0) {
            return Err(DepseError::Config(format!(
                "sampler.r must be positive, got {}",
                self.sampler.r
            )));
        }
        if self.sampler.lambda_even < 0.0 {
            return Err(DepseError::Config("sampler.lambda_even must be >= 0".into()));
        }
        if self.nmf.rank == 0 {
            return Err(DepseError::Config("nmf.rank must be >= 1".into()));
        }
        let stft = StftParams {
            window_len: self.stft.window,
            hop: self.stft.hop,
        };
        stft.validate().map_err(|e| DepseError::Config(e.to_string()))?;
        if let Some(beta) = self.stft.compression {
            if !(beta.is_finite() && beta > 0.0) {
                return Err(DepseError::Config(format!(
                    "stft.compression must be positive, got {beta}"
                )));
            }
        }
        if let ScoreSection::Gmm { components } = &self.score {
            if components.is_empty() {
                return Err(DepseError::Config("gmm score needs components".into()));
            }
            let sum: f64 = components.iter().map(|c| c.weight).sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(DepseError::Config(format!(
                    "gmm weights sum to {sum}, expected 1"
                )));
            }
        }
        if let Some(enc) = &self.io.encoding {
            if enc != "float32" && enc != "pcm16" {
                return Err(DepseError::Config(format!(
                    "io.encoding must be float32 or pcm16, got '{enc}'"
                )));
            }
        }
        if let Some(sim) = &self.simulate {
            if sim.prior != "gaussian" && sim.prior != "gmm" {
                return Err(DepseError::Config(format!(
                    "simulate.prior must be gaussian or gmm, got '{}'",
                    sim.prior
                )));
            }
            for m in &sim.methods {
                match m.as_str() {
                    "prior" | "guided" | "depse_il" | "depse_tl" => {}
                    other => {
                        return Err(DepseError::Config(format!(
                            "simulate.methods contains unknown method '{other}'"
                        )))
                    }
                }
            }
            if sim.samples < self.stft.window {
                return Err(DepseError::Config(
                    "simulate.samples must cover at least one analysis window".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn schedule(&self) -> Result<DiffusionSchedule> {
        DiffusionSchedule::new(
            self.sde.gamma,
            self.sde.sigma_min,
            self.sde.sigma_max,
            self.sde.t_eps,
            self.sde.t_max,
            self.sde.n_steps,
        )
        .map_err(|e| DepseError::Config(e.to_string()))
    }

    pub fn stft_params(&self) -> StftParams {
        StftParams {
            window_len: self.stft.window,
            hop: self.stft.hop,
        }
    }

    pub fn sampler_config(&self) -> Result<SamplerConfig> {
        let method = self.method()?;
        let mut cfg = SamplerConfig::new(method);
        cfg.langevin_ratio = self.sampler.r;
        cfg.corrector_steps = self.sampler.corrector_steps;
        if method == Method::Guided {
            cfg.lambda = SamplerConfig::alternating_lambda(self.sde.n_steps, self.sampler.lambda_even);
        }
        Ok(cfg)
    }

    pub fn noise_spec(&self) -> NoiseSpec {
        NoiseSpec::Nmf {
            rank: self.nmf.rank,
            iters_per_step: self.nmf.iters_per_step,
        }
    }

    /// Instantiate the configured score model for fields of `shape`.
    pub fn score_model(&self, shape: (usize, usize)) -> Result<Box<dyn ScoreModel>> {
        match &self.score {
            ScoreSection::Gaussian {
                mean_re,
                mean_im,
                variance,
            } => {
                let mean = Field::from_elem(shape, num_complex::Complex64::new(*mean_re, *mean_im));
                let var = RealField::from_elem(shape, *variance);
                Ok(Box::new(GaussianPrior::new(mean, var)?))
            }
            ScoreSection::Gmm { components } => {
                let mut weights = Vec::new();
                let mut comps = Vec::new();
                for c in components {
                    weights.push(c.weight);
                    comps.push(GaussianPrior::new(
                        Field::from_elem(shape, num_complex::Complex64::new(c.mean_re, c.mean_im)),
                        RealField::from_elem(shape, c.variance),
                    )?);
                }
                Ok(Box::new(GmmPrior::new(weights, comps)?))
            }
            ScoreSection::External { endpoint } => {
                let ep = match endpoint {
                    EndpointSection::Tcp(addr) => ScoreEndpoint::Tcp(addr.clone()),
                    EndpointSection::Command(argv) => ScoreEndpoint::Subprocess(argv.clone()),
                };
                Ok(Box::new(ExternalScoreModel::connect(
                    &ep,
                    shape,
                    Some(Duration::from_secs(30)),
                )?))
            }
        }
    }
}
