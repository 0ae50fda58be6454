//! Declarative run configuration: a single TOML file describing the
//! manifold, the density, kernel truncation, schedules, the experiment,
//! and output routing.
//!
//! Experiments are reproducible artifacts, so everything that determines
//! numbers lives in the file; command-line flags only select the config
//! path, the output directory, and overrides for seed and replication
//! count.  [`Config::hash`] identifies the numeric payload: it covers
//! exactly the fields that influence computed values, excluding output
//! routing and the worker count (scheduling must never change results).

use crate::asymptotics::JTermSchedule;
use crate::density::{Density, Factor};
use crate::error::{Error, Result};
use crate::heat::KernelConfig;
use crate::montecarlo::ExperimentConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

// ---------------------------------------------------------------------------
// Schema
// ---------------------------------------------------------------------------

/// Parsed and structurally valid run configuration.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Manifold section: the flat torus dimension.
    pub manifold: ManifoldSection,
    /// Density section: population law on the torus.
    pub density: DensitySpec,
    /// Kernel section: heat-kernel truncation controls.
    #[serde(default)]
    pub kernel: KernelSection,
    /// Schedules section: diffusion times and band radii.
    pub schedules: SchedulesSection,
    /// Experiment section: kind, sample sizes, replication and seeding.
    pub experiment: ExperimentSection,
    /// Output section: directory and formats.
    #[serde(default)]
    pub output: OutputSection,
}

/// `[manifold]` section.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ManifoldSection {
    /// Torus dimension (1 = circle).
    pub dim: usize,
}

/// `[density]` section: the population law, possibly a mixture.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensitySpec {
    /// Uniform law on the whole torus.
    Uniform,
    /// Product of von Mises factors with per-axis locations `mu` and
    /// concentrations `kappa`.
    VonMises {
        /// Per-axis locations.
        mu: Vec<f64>,
        /// Per-axis concentrations, each in `[0, 500]`.
        kappa: Vec<f64>,
    },
    /// Product of explicitly listed per-axis factors.
    Product {
        /// One factor per axis.
        factors: Vec<FactorSpec>,
    },
    /// Convex mixture of product densities.
    Mixture {
        /// Weighted components; weights must be positive and sum to 1.
        components: Vec<ComponentSpec>,
    },
}

/// One per-axis factor of a product density.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FactorSpec {
    /// Uniform factor.
    Uniform,
    /// Von Mises factor.
    VonMises {
        /// Location.
        mu: f64,
        /// Concentration in `[0, 500]`.
        kappa: f64,
    },
    /// Piecewise-linear tabulated factor: nonnegative values on a uniform
    /// grid over one period (at least 4 nodes; normalized internally).
    Tabulated {
        /// Density values on the uniform grid.
        values: Vec<f64>,
    },
}

/// One weighted component of a mixture.
///
/// No `deny_unknown_fields` here: serde cannot combine it with `flatten`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ComponentSpec {
    /// Mixture weight, positive.
    pub weight: f64,
    /// Component law.
    #[serde(flatten)]
    pub density: ComponentDensitySpec,
}

/// The law of one mixture component (a product density, not a nested
/// mixture).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ComponentDensitySpec {
    /// Uniform component.
    Uniform,
    /// Product-of-von-Mises component.
    VonMises {
        /// Per-axis locations.
        mu: Vec<f64>,
        /// Per-axis concentrations.
        kappa: Vec<f64>,
    },
    /// Product of explicit factors.
    Product {
        /// One factor per axis.
        factors: Vec<FactorSpec>,
    },
}

/// `[kernel]` section.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSection {
    /// Absolute tail threshold for image truncation.
    pub trunc_eps: f64,
    /// Hard cap on images per side.
    pub max_images: usize,
}

impl Default for KernelSection {
    fn default() -> Self {
        let k = KernelConfig::default();
        KernelSection {
            trunc_eps: k.trunc_eps,
            max_images: k.max_images,
        }
    }
}

/// `[schedules]` section.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SchedulesSection {
    /// Diffusion times, strictly decreasing.
    pub t_list: Vec<f64>,
    /// Band radii for cut-locus corrections, strictly decreasing; empty
    /// selects the standard schedule.
    #[serde(default)]
    pub delta_list: Vec<f64>,
}

/// `[experiment]` section.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    /// Which experiment `ulln` / `clt` runs.
    pub kind: ExperimentKind,
    /// Sample sizes, strictly increasing.
    pub n_list: Vec<usize>,
    /// Replication count.
    #[serde(rename = "R")]
    pub replications: usize,
    /// Global RNG seed.
    pub seed: u64,
    /// Quadrature resolution per axis.
    pub res: usize,
    /// Audit-grid resolution (ULLN x-grid and multistart audits).
    #[serde(default = "default_audit_res")]
    pub audit_res: usize,
    /// Evaluation-grid resolution for the `varadhan` command.
    #[serde(default = "default_grid_res")]
    pub grid_res: usize,
    /// Worker pool size; 0 means one worker per available core.
    #[serde(default)]
    pub workers: usize,
    /// Probe points for the function CLT and the gradient-gap series.
    #[serde(default)]
    pub probes: Vec<Vec<f64>>,
}

fn default_audit_res() -> usize {
    64
}

fn default_grid_res() -> usize {
    64
}

/// Experiment selector.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Uniform-law-of-large-numbers sup-error decay.
    Ulln,
    /// CLT of the objective values at probe points.
    CltFunction,
    /// CLT of the minimal value.
    CltVariance,
    /// CLT of the minimizer.
    CltMean,
}

/// `[output]` section.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// Output directory (created on demand, after successful parse).
    pub dir: String,
    /// Which artifact families to write.
    pub format: OutputFormat,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: "out".into(),
            format: OutputFormat::Both,
        }
    }
}

/// Output format selector.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    /// CSV plot series only.
    Csv,
    /// JSON reports only.
    Json,
    /// Both families.
    Both,
}

// ---------------------------------------------------------------------------
// Parsing, validation, and building
// ---------------------------------------------------------------------------

impl Config {
    /// Parse a TOML string; syntax and unknown-field errors come back as
    /// [`Error::Config`] with the parser's line-anchored message.
    pub fn from_toml(text: &str) -> Result<Config> {
        let cfg: Config =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Read and parse a config file.
    pub fn from_path(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)?;
        Config::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Canonical serialized form; parsing it back yields an equal config,
    /// and serializing again yields the identical string.
    pub fn canonical_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("serialize: {e}")))
    }

    /// Hex SHA-256 over the numeric-determining payload: the canonical
    /// serialization with output routing reset and the worker count
    /// zeroed, so scheduling and file placement never change the hash.
    pub fn hash(&self) -> Result<String> {
        let mut view = self.clone();
        view.output = OutputSection::default();
        view.experiment.workers = 0;
        let bytes = view.canonical_toml()?;
        let mut hasher = Sha256::new();
        hasher.update(bytes.as_bytes());
        Ok(format!("{:x}", hasher.finalize()))
    }

    /// Structural checks beyond what the parser enforces.
    fn validate(&self) -> Result<()> {
        if self.manifold.dim == 0 {
            return Err(Error::Config("manifold dim must be >= 1".into()));
        }
        let m = self.manifold.dim;
        let density_dim = self.density.dim(m);
        if density_dim != m {
            return Err(Error::Config(format!(
                "density has dimension {density_dim} but manifold dim = {m}"
            )));
        }
        for probe in &self.experiment.probes {
            if probe.len() != m {
                return Err(Error::Config(format!(
                    "probe {probe:?} has dimension {} but manifold dim = {m}",
                    probe.len()
                )));
            }
        }
        if self.schedules.t_list.is_empty() {
            return Err(Error::Config("schedules.t_list must be non-empty".into()));
        }
        Ok(())
    }

    /// Build the population density.
    pub fn density(&self) -> Result<Density> {
        self.density.build(self.manifold.dim)
    }

    /// Build the kernel truncation settings.
    pub fn kernel(&self) -> Result<KernelConfig> {
        let cfg = KernelConfig {
            trunc_eps: self.kernel.trunc_eps,
            max_images: self.kernel.max_images,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Build the band-radius schedule for cut-locus corrections: the
    /// configured `delta_list` with the `t_list` entries that satisfy
    /// `t <= delta^2` per band, or the standard schedule when no radii are
    /// configured.
    pub fn jterm_schedule(&self) -> Result<JTermSchedule> {
        if self.schedules.delta_list.is_empty() {
            return Ok(JTermSchedule::standard(self.experiment.res));
        }
        let mut times = Vec::with_capacity(self.schedules.delta_list.len());
        for &delta in &self.schedules.delta_list {
            let ts: Vec<f64> = self
                .schedules
                .t_list
                .iter()
                .copied()
                .filter(|&t| t > 0.0 && t <= delta * delta)
                .collect();
            if ts.is_empty() {
                return Err(Error::Config(format!(
                    "no configured time satisfies 0 < t <= delta^2 for delta = {delta}"
                )));
            }
            times.push(ts);
        }
        JTermSchedule::new(self.schedules.delta_list.clone(), times, self.experiment.res)
    }

    /// Build the experiment configuration consumed by the replication
    /// drivers.
    pub fn experiment_config(&self) -> Result<ExperimentConfig> {
        Ok(ExperimentConfig {
            density: self.density()?,
            t_list: self.schedules.t_list.clone(),
            n_list: self.experiment.n_list.clone(),
            replications: self.experiment.replications,
            seed: self.experiment.seed,
            res: self.experiment.res,
            audit_res: self.experiment.audit_res,
            workers: self.experiment.workers,
            kernel: self.kernel()?,
            jterm: if self.schedules.delta_list.is_empty() {
                None
            } else {
                Some(self.jterm_schedule()?)
            },
        })
    }
}

impl DensitySpec {
    /// Dimension this spec describes (`fallback` for specs that inherit
    /// the manifold dimension).
    fn dim(&self, fallback: usize) -> usize {
        match self {
            DensitySpec::Uniform => fallback,
            DensitySpec::VonMises { mu, .. } => mu.len(),
            DensitySpec::Product { factors } => factors.len(),
            DensitySpec::Mixture { components } => components
                .first()
                .map(|c| c.density.dim(fallback))
                .unwrap_or(fallback),
        }
    }

    fn build(&self, dim: usize) -> Result<Density> {
        match self {
            DensitySpec::Uniform => Density::uniform(dim),
            DensitySpec::VonMises { mu, kappa } => Density::von_mises(mu, kappa),
            DensitySpec::Product { factors } => {
                let fs = factors.iter().map(FactorSpec::build).collect::<Result<_>>()?;
                Density::product(fs)
            }
            DensitySpec::Mixture { components } => {
                let parts = components
                    .iter()
                    .map(|c| Ok((c.weight, c.density.build(dim)?)))
                    .collect::<Result<Vec<_>>>()?;
                Density::mixture(parts)
            }
        }
    }
}

impl ComponentDensitySpec {
    fn dim(&self, fallback: usize) -> usize {
        match self {
            ComponentDensitySpec::Uniform => fallback,
            ComponentDensitySpec::VonMises { mu, .. } => mu.len(),
            ComponentDensitySpec::Product { factors } => factors.len(),
        }
    }

    fn build(&self, dim: usize) -> Result<Density> {
        match self {
            ComponentDensitySpec::Uniform => Density::uniform(dim),
            ComponentDensitySpec::VonMises { mu, kappa } => Density::von_mises(mu, kappa),
            ComponentDensitySpec::Product { factors } => {
                let fs = factors.iter().map(FactorSpec::build).collect::<Result<_>>()?;
                Density::product(fs)
            }
        }
    }
}

impl FactorSpec {
    fn build(&self) -> Result<Factor> {
        match self {
            FactorSpec::Uniform => Ok(Factor::uniform()),
            FactorSpec::VonMises { mu, kappa } => Factor::von_mises(*mu, *kappa),
            FactorSpec::Tabulated { values } => Factor::tabulated(values),
        }
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
[manifold]
dim = 1

[density]
kind = "von_mises"
mu = [0.0]
kappa = [2.0]

[schedules]
t_list = [0.1]

[experiment]
kind = "clt_mean"
n_list = [400]
R = 2000
seed = 42
res = 512
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = Config::from_toml(BASIC).unwrap();
        assert_eq!(cfg.manifold.dim, 1);
        assert_eq!(cfg.experiment.replications, 2000);
        assert_eq!(cfg.experiment.audit_res, 64);
        assert_eq!(cfg.experiment.workers, 0);
        assert_eq!(cfg.output.dir, "out");
        let one = cfg.canonical_toml().unwrap();
        let reparsed = Config::from_toml(&one).unwrap();
        assert_eq!(reparsed, cfg);
        let two = reparsed.canonical_toml().unwrap();
        assert_eq!(one, two);
    }

    #[test]
    fn hash_ignores_output_and_workers_only() {
        let cfg = Config::from_toml(BASIC).unwrap();
        let h0 = cfg.hash().unwrap();
        assert_eq!(h0.len(), 64);

        let mut moved = cfg.clone();
        moved.output.dir = "elsewhere".into();
        moved.experiment.workers = 8;
        assert_eq!(moved.hash().unwrap(), h0);

        let mut reseeded = cfg.clone();
        reseeded.experiment.seed = 43;
        assert_ne!(reseeded.hash().unwrap(), h0);

        let mut rescheduled = cfg;
        rescheduled.schedules.t_list = vec![0.2];
        assert_ne!(rescheduled.hash().unwrap(), h0);
    }

    #[test]
    fn builds_library_objects() {
        let cfg = Config::from_toml(BASIC).unwrap();
        let d = cfg.density().unwrap();
        assert_eq!(d.dim(), 1);
        let k = cfg.kernel().unwrap();
        assert_eq!(k.max_images, 64);
        let e = cfg.experiment_config().unwrap();
        assert_eq!(e.replications, 2000);
        assert!(e.jterm.is_none());
        let sched = cfg.jterm_schedule().unwrap();
        assert_eq!(sched.deltas, vec![0.4, 0.2, 0.1]);
    }

    #[test]
    fn mixture_and_tabulated_specs_build() {
        let text = r#"
[manifold]
dim = 1

[density]
kind = "mixture"

[[density.components]]
weight = 0.6
kind = "von_mises"
mu = [0.5]
kappa = [3.0]

[[density.components]]
weight = 0.4
kind = "von_mises"
mu = [-0.7]
kappa = [1.5]

[schedules]
t_list = [0.1]

[experiment]
kind = "ulln"
n_list = [50]
R = 10
seed = 1
res = 256
"#;
        let cfg = Config::from_toml(text).unwrap();
        let d = cfg.density().unwrap();
        assert_eq!(d.components().len(), 2);

        let tab = r#"
[manifold]
dim = 2

[density]
kind = "product"

[[density.factors]]
kind = "von_mises"
mu = 0.0
kappa = 2.0

[[density.factors]]
kind = "uniform"

[schedules]
t_list = [0.1]

[experiment]
kind = "ulln"
n_list = [50]
R = 10
seed = 1
res = 256
"#;
        let cfg = Config::from_toml(tab).unwrap();
        assert_eq!(cfg.density().unwrap().dim(), 2);
    }

    #[test]
    fn rejects_malformed_input() {
        // Syntax error.
        let err = Config::from_toml("[manifold\ndim = 1").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        // Unknown field.
        let err = Config::from_toml(&BASIC.replace("seed = 42", "seed = 42\nbogus = 1")).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        // Dimension mismatch between density and manifold.
        let err = Config::from_toml(&BASIC.replace("dim = 1", "dim = 2")).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        // Probe of the wrong dimension.
        let err = Config::from_toml(&BASIC.replace(
            "res = 512",
            "res = 512\nprobes = [[0.0, 0.0]]",
        ))
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn delta_schedule_filters_times() {
        let text = BASIC.replace(
            "t_list = [0.1]",
            "t_list = [0.1, 0.01, 0.001]\ndelta_list = [0.4, 0.1]",
        );
        let cfg = Config::from_toml(&text).unwrap();
        let sched = cfg.jterm_schedule().unwrap();
        assert_eq!(sched.deltas, vec![0.4, 0.1]);
        assert_eq!(sched.times[0], vec![0.1, 0.01, 0.001]);
        assert_eq!(sched.times[1], vec![0.01, 0.001]);

        let bad = BASIC.replace("t_list = [0.1]", "t_list = [0.1]\ndelta_list = [0.05]");
        let cfg = Config::from_toml(&bad).unwrap();
        assert!(cfg.jterm_schedule().is_err());
    }
}
