//! Run configuration for the certification pipeline.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{Builtin, ComponentSpec, Domain, VectorField};
use crate::error::{Error, Result};
use crate::gridval::GridSettings;
use crate::levels::LevelSearchSettings;
use crate::polyapprox::RemezSettings;
use crate::sdp::SdpSettings;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemSpec {
    Builtin(Builtin),
    Custom { components: Vec<ComponentSpec>, domain: Domain },
}

impl SystemSpec {
    pub fn build(&self) -> Result<VectorField> {
        match self {
            SystemSpec::Builtin(b) => b.build(),
            SystemSpec::Custom { components, domain } => {
                let d = Domain::new(domain.lo.clone(), domain.hi.clone())?;
                VectorField::from_specs(components.clone(), d)
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            SystemSpec::Builtin(Builtin::Example1) => "example1".into(),
            SystemSpec::Builtin(Builtin::Example2 { k }) => format!("example2(k={k})"),
            SystemSpec::Builtin(Builtin::Example3) => "example3".into(),
            SystemSpec::Builtin(Builtin::Replicator { a }) => format!("replicator(n={})", a.len()),
            SystemSpec::Custom { components, .. } => format!("custom(n={})", components.len()),
        }
    }
}

/// Basis of the Koopman subspace, in rescaled coordinates.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BasisSpec {
    Monomial {
        degree: u32,
    },
    GaussianRbf {
        eta: f64,
        /// Explicit centers; otherwise `count` centers drawn uniformly from `center_box`.
        #[serde(default)]
        centers: Option<Vec<Vec<f64>>>,
        #[serde(default)]
        count: Option<usize>,
        #[serde(default)]
        center_box: Option<Domain>,
    },
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProjectionSpec {
    #[default]
    Truncation,
    L2 {
        /// Monte-Carlo sample count; defaults to `max(10N, 5000)`.
        #[serde(default)]
        samples: Option<usize>,
        /// Projection region; defaults to the rescaled domain.
        #[serde(default)]
        x_pi: Option<Domain>,
        #[serde(default)]
        seed: Option<u64>,
    },
}

/// Polynomial approximation of one non-polynomial component.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ApproxSpec {
    #[default]
    None,
    Taylor {
        order: u32,
        /// Remainder constant; estimated on a grid when absent.
        #[serde(default)]
        c: Option<f64>,
        #[serde(default = "default_taylor_margin")]
        margin: f64,
    },
    Minimax(RemezSettings),
}

fn default_taylor_margin() -> f64 {
    1.5
}

/// One spec for every non-polynomial component, or one per component.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ApproximationPlan {
    Uniform(ApproxSpec),
    PerComponent(Vec<ApproxSpec>),
}

impl Default for ApproximationPlan {
    fn default() -> Self {
        ApproximationPlan::Uniform(ApproxSpec::None)
    }
}

impl ApproximationPlan {
    pub fn for_component(&self, i: usize) -> Option<&ApproxSpec> {
        match self {
            ApproximationPlan::Uniform(s) => Some(s),
            ApproximationPlan::PerComponent(v) => v.get(i),
        }
    }
}

/// Where the field approximation enters: before the candidate is built (1) or only in
/// the validity system (2).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum ApproxOption {
    #[default]
    BeforeCandidate,
    ValidationOnly,
}

impl TryFrom<u8> for ApproxOption {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(ApproxOption::BeforeCandidate),
            2 => Ok(ApproxOption::ValidationOnly),
            other => Err(format!("option must be 1 or 2, got {other}")),
        }
    }
}

impl From<ApproxOption> for u8 {
    fn from(o: ApproxOption) -> u8 {
        match o {
            ApproxOption::BeforeCandidate => 1,
            ApproxOption::ValidationOnly => 2,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValidatorSpec {
    Sos {
        #[serde(default)]
        sigma1_degree: Option<u32>,
        #[serde(default)]
        sigma2_degree: Option<u32>,
        #[serde(default)]
        per_pattern: bool,
        #[serde(default)]
        solver: SdpSettings,
    },
    Grid(GridSettings),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
    pub prefix: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemSpec,
    pub basis: BasisSpec,
    #[serde(default)]
    pub projection: ProjectionSpec,
    #[serde(default)]
    pub approximation: ApproximationPlan,
    #[serde(default)]
    pub option: ApproxOption,
    /// Candidate weights `αᵢ`; all ones when absent.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    /// Minimax settings for the polynomial proxy of a non-polynomial candidate.
    #[serde(default = "default_proxy")]
    pub proxy: RemezSettings,
    pub validator: ValidatorSpec,
    #[serde(default)]
    pub levels: LevelSearchSettings,
    /// Relative distance between matched generator and Jacobian eigenvalues above which a
    /// warning is logged.
    #[serde(default = "default_eigen_tol")]
    pub eigen_tol: f64,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub seed: u64,
}

fn default_proxy() -> RemezSettings {
    RemezSettings { degree: 12, ..Default::default() }
}

fn default_eigen_tol() -> f64 {
    1e-3
}

fn config_err(path: &str, message: impl Into<String>) -> Error {
    Error::Config { path: path.into(), message: message.into() }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            config_err(if path.is_empty() { "." } else { &path }, e.into_inner().to_string())
        })?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(serde_json::to_vec(self)?);
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    /// Cross-field consistency; `f` is the system in original coordinates.
    pub fn check(&self, f: &VectorField) -> Result<()> {
        let n = f.dim();
        let polynomial = f.is_polynomial();
        let monomial = matches!(self.basis, BasisSpec::Monomial { .. });
        if let ApproximationPlan::PerComponent(v) = &self.approximation {
            if v.len() != n {
                return Err(config_err("approximation", format!("expected {n} entries, got {}", v.len())));
            }
        }
        for i in 0..n {
            if f.component(i).as_poly().is_some() {
                continue;
            }
            match self.approximation.for_component(i) {
                None | Some(ApproxSpec::None) => {
                    return Err(config_err(
                        "approximation",
                        format!("component {i} is not polynomial and needs a Taylor or minimax approximation"),
                    ))
                }
                Some(ApproxSpec::Taylor { order, margin, c }) => {
                    if order % 2 == 0 {
                        return Err(config_err("approximation.order", format!("Taylor order must be odd, got {order}")));
                    }
                    if c.is_some_and(|c| !(c >= 0.0)) || !(*margin >= 1.0) {
                        return Err(config_err("approximation", "need c ≥ 0 and margin ≥ 1"));
                    }
                }
                Some(ApproxSpec::Minimax(_)) => {}
            }
        }
        if matches!(self.projection, ProjectionSpec::Truncation) {
            if !monomial {
                return Err(config_err("projection", "truncation requires a monomial basis"));
            }
            if !polynomial && self.option == ApproxOption::ValidationOnly {
                return Err(config_err(
                    "projection",
                    "truncation requires a polynomial field; use option 1 or the l2 projection",
                ));
            }
        }
        match &self.basis {
            BasisSpec::Monomial { degree } if *degree == 0 => {
                return Err(config_err("basis.degree", "degree must be at least 1"));
            }
            BasisSpec::GaussianRbf { eta, centers, count, .. } => {
                if !(*eta > 0.0) {
                    return Err(config_err("basis.eta", "must be positive"));
                }
                if centers.is_none() && count.is_none() {
                    return Err(config_err("basis", "give either centers or count"));
                }
            }
            _ => {}
        }
        if let Some(w) = &self.weights {
            if w.len() != n {
                return Err(config_err("weights", format!("expected {n} weights, got {}", w.len())));
            }
        }
        if matches!(self.validator, ValidatorSpec::Grid(_)) && n > 3 {
            return Err(config_err("validator", format!("grid validation supports n ≤ 3, got {n}")));
        }
        Ok(())
    }
}
