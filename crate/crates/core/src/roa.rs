//! Certificates, their combination, and the end-to-end pipeline.

use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ApproxOption, ApproxSpec, BasisSpec, ProjectionSpec, RunConfig, ValidatorSpec};
use crate::dynamics::{AffineMap, Domain, RunOutcome, VectorField};
use crate::error::{Error, Result};
use crate::gridval::{build_grid, certify_levels_grid, AdaptiveGrid};
use crate::koopman::{
    assemble_candidate, build_generator_l2, build_generator_truncation, default_sample_count, eigenvalues,
    principal_eigenpairs, Basis, LyapunovCandidate,
};
use crate::levels::{LevelSearch, Probe};
use crate::poly::SparsePoly;
use crate::polyapprox::{estimate_taylor_constant, remez_minimax, taylor_approx, ErrorModel, PolyApprox};
use crate::sosval::{certify_levels_sos, SosSettings};
use crate::validity::{build_validity_system, candidate_polynomial, ValiditySystem};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidatorKind {
    Sos,
    Grid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiplierDegrees {
    pub sigma1: u32,
    pub sigma2: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub leaves: usize,
    pub validated: usize,
    pub failed: usize,
    pub delta0: f64,
    pub delta_min: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub solves: usize,
    /// Probes rejected by sampling before any SDP was built.
    #[serde(default)]
    pub refuted_by_sampling: usize,
    pub feasible: usize,
    pub infeasible: usize,
    pub unknown: usize,
    pub iterations: usize,
    /// Worst verified identity residual among accepted witnesses.
    pub max_residual: f64,
    /// Smallest Gram eigenvalue among accepted witnesses.
    pub min_eigenvalue: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub cap: f64,
    pub probes: Vec<Probe>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub system: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
}

/// Certified transit region `Ω_{γ₂} ∖ Ω_{γ₁}` of a polynomial `V` given in rescaled
/// coordinates; `map` converts back to the original state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub gamma1: f64,
    pub gamma2: f64,
    pub certified: bool,
    pub validator: ValidatorKind,
    pub v: SparsePoly,
    pub map: AffineMap,
    pub error_models: Vec<ErrorModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degrees: Option<MultiplierDegrees>,
    pub diagnostics: Diagnostics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl Certificate {
    pub(crate) fn from_search(
        search: LevelSearch,
        validator: ValidatorKind,
        v: SparsePoly,
        error_models: Vec<ErrorModel>,
    ) -> Self {
        let (gamma1, gamma2, certified) = match search.best {
            Some((a, b)) => (a, b, true),
            None => (0.0, 0.0, false),
        };
        let dim = v.dim();
        Certificate {
            gamma1,
            gamma2,
            certified,
            validator,
            v,
            map: AffineMap::identity(dim),
            error_models,
            degrees: None,
            diagnostics: Diagnostics { cap: search.cap, probes: search.probes, ..Default::default() },
            provenance: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.v.dim()
    }

    /// `V` at a point in original coordinates.
    pub fn v_original_at(&self, x: &[f64]) -> f64 {
        self.v.eval(&self.map.to_rescaled(x))
    }

    /// `V` expanded in original coordinates.
    pub fn v_original(&self) -> Result<SparsePoly> {
        self.map.poly_to_original(&self.v)
    }

    /// Whether an original-coordinate point lies in `Ω_{γ₂}`.
    pub fn in_outer(&self, x: &[f64]) -> bool {
        self.certified && self.v_original_at(x) <= self.gamma2
    }

    /// Whether an original-coordinate point lies in `Ω_{γ₁}`.
    pub fn in_inner(&self, x: &[f64]) -> bool {
        self.certified && self.v_original_at(x) <= self.gamma1
    }
}

/// Everything produced by one pipeline run.
#[derive(Clone, Debug)]
pub struct PipelineRun {
    pub certificate: Certificate,
    pub candidate: LyapunovCandidate,
    pub validity: ValiditySystem,
    pub approximations: Vec<PolyApprox>,
    /// The system in original coordinates.
    pub field: VectorField,
    /// The system on the unit box.
    pub rescaled: VectorField,
    pub grid: Option<AdaptiveGrid>,
}

/// Runs the configured pipeline and returns the certificate in original coordinates.
pub fn run_pipeline(config: &RunConfig) -> Result<Certificate> {
    Ok(run_pipeline_detailed(config)?.certificate)
}

pub fn run_pipeline_detailed(config: &RunConfig) -> Result<PipelineRun> {
    let f = config.system.build()?;
    config.check(&f)?;
    let (g, map) = f.rescale_to_unit_box()?;
    let n = g.dim();
    let domain = g.domain().clone();

    let jac = g.jacobian_at_origin()?;
    let max_re = eigenvalues(&jac)?.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    if max_re >= 0.0 {
        return Err(Error::NotHurwitz(max_re));
    }

    let mut notes = Vec::new();
    let approximations = approximate_components(&g, config, &mut notes)?;

    let basis = build_basis(&config.basis, n, config.seed)?;
    let candidate_field = match config.option {
        ApproxOption::BeforeCandidate => {
            let comps = approximations
                .iter()
                .map(|a| &a.p - &SparsePoly::constant(n, a.p.constant_term()))
                .collect();
            VectorField::polynomial(comps, domain.clone())?
        }
        ApproxOption::ValidationOnly => g.clone(),
    };
    let mut seeds = vec![config.seed];
    let generator = match &config.projection {
        ProjectionSpec::Truncation => build_generator_truncation(&candidate_field, &basis)?,
        ProjectionSpec::L2 { samples, x_pi, seed } => {
            let x_pi = match x_pi {
                Some(d) => Domain::new(d.lo.clone(), d.hi.clone())?,
                None => domain.clone(),
            };
            let m = samples.unwrap_or_else(|| default_sample_count(basis.size()));
            let seed = seed.unwrap_or(config.seed);
            seeds.push(seed);
            build_generator_l2(&candidate_field, &basis, &x_pi, m, seed)?
        }
    };
    let pairs = principal_eigenpairs(&generator, &candidate_field.jacobian_at_origin()?, config.eigen_tol)?;
    let weights = config.weights.clone().unwrap_or_else(|| vec![1.0; pairs.len()]);
    let candidate = assemble_candidate(&pairs, &weights, &basis)?;
    let v = match candidate.as_poly() {
        Some(v) => v.clone(),
        None => {
            seeds.push(config.proxy.seed);
            notes.push(format!("candidate replaced by a degree-{} minimax proxy", config.proxy.degree));
            candidate_polynomial(&candidate, &domain, &config.proxy)?
        }
    };
    info!("candidate has degree {} with {} terms", v.degree(), v.len());

    let validity = build_validity_system(&v, &approximations)?;
    let mut levels = config.levels.clone();
    if levels.seed == 0 {
        levels.seed = config.seed;
    }
    seeds.push(levels.seed);
    let (mut certificate, grid) = match &config.validator {
        ValidatorSpec::Sos { sigma1_degree, sigma2_degree, per_pattern, solver } => {
            let settings = SosSettings {
                sigma1_degree: *sigma1_degree,
                sigma2_degree: *sigma2_degree,
                per_pattern: *per_pattern,
                sdp: *solver,
                levels,
            };
            (certify_levels_sos(&validity, &settings)?, None)
        }
        ValidatorSpec::Grid(settings) => {
            let grid = build_grid(&validity, settings)?;
            let cert = certify_levels_grid(&grid, &validity, settings.boundary_lines, &levels);
            (cert, Some(grid))
        }
    };
    certificate.map = map;
    certificate.diagnostics.notes.extend(notes);
    certificate.provenance = Some(Provenance { system: config.system.label(), config_hash: config.hash()?, seeds });
    Ok(PipelineRun {
        certificate,
        candidate,
        validity,
        approximations,
        field: f,
        rescaled: g,
        grid,
    })
}

fn approximate_components(g: &VectorField, config: &RunConfig, notes: &mut Vec<String>) -> Result<Vec<PolyApprox>> {
    let domain = g.domain();
    (0..g.dim())
        .map(|i| {
            let comp = g.component(i);
            if let Some(p) = comp.as_poly() {
                return Ok(PolyApprox::exact(p.clone(), domain.clone()));
            }
            match config.approximation.for_component(i) {
                Some(ApproxSpec::Taylor { order, c, margin }) => {
                    let c = match c {
                        Some(c) => *c,
                        None => {
                            let p = crate::polyapprox::taylor_series(g, i, *order)?;
                            let c = estimate_taylor_constant(|x| comp.eval(x), &p, *order, domain, 201, *margin)?;
                            notes.push(format!("component {i}: Taylor constant estimated on a grid, c = {c:.4e}"));
                            c
                        }
                    };
                    taylor_approx(g, i, *order, c)
                }
                Some(ApproxSpec::Minimax(settings)) => {
                    let (a, trace) = remez_minimax(|x| comp.eval(x), domain, settings)?;
                    notes.push(format!(
                        "component {i}: minimax degree {} after {} rounds, eps = {:.4e}",
                        settings.degree,
                        trace.eps_bar_history.len(),
                        match a.error_model {
                            ErrorModel::Minimax { eps, .. } => eps,
                            _ => f64::NAN,
                        }
                    ));
                    Ok(a)
                }
                _ => Err(Error::NonPolynomial(i)),
            }
        })
        .collect()
}

fn build_basis(spec: &BasisSpec, n: usize, seed: u64) -> Result<Basis> {
    match spec {
        BasisSpec::Monomial { degree } => Ok(Basis::monomial(n, *degree)),
        BasisSpec::GaussianRbf { eta, centers, count, center_box } => {
            let centers = match centers {
                Some(c) => c.clone(),
                None => {
                    let b = match center_box {
                        Some(d) => Domain::new(d.lo.clone(), d.hi.clone())?,
                        None => Domain::unit(n),
                    };
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    (0..count.unwrap_or(0)).map(|_| b.sample(&mut rng)).collect()
                }
            };
            Basis::gaussian_rbf(centers, *eta)
        }
    }
}

/// Monte-Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AreaEstimate {
    pub fraction: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// `vol(Ω_{γ₂}) / vol(𝕏)` by uniform sampling of the unit box.
pub fn certified_area(cert: &Certificate, samples: usize, seed: u64) -> AreaEstimate {
    if !cert.certified || samples == 0 {
        return AreaEstimate { fraction: 0.0, std_error: 0.0, samples };
    }
    let n = cert.dim();
    let v = cert.v.compile();
    let hits: usize = (0..samples)
        .into_par_iter()
        .map_init(
            || ChaCha8Rng::seed_from_u64(seed),
            |rng, k| {
                rng.set_stream(k as u64);
                let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
                usize::from(v.eval(&x) <= cert.gamma2)
            },
        )
        .sum();
    let p = hits as f64 / samples as f64;
    AreaEstimate { fraction: p, std_error: (p * (1.0 - p) / samples as f64).sqrt(), samples }
}

/// Certificates accepted jointly: every trajectory from `∪ Ω_{γ₂⁽ⁱ⁾}` reaches `∩ Ω_{γ₁⁽ⁱ⁾}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CombinedCertificate {
    pub certificates: Vec<Certificate>,
    pub nesting_verified: bool,
    pub samples: usize,
    pub caveat: String,
}

impl CombinedCertificate {
    pub fn in_outer(&self, x: &[f64]) -> bool {
        self.certificates.iter().any(|c| c.in_outer(x))
    }

    pub fn in_target(&self, x: &[f64]) -> bool {
        self.certificates.iter().all(|c| c.in_inner(x))
    }

    /// Whether the target is the equilibrium alone.
    pub fn reaches_origin(&self) -> bool {
        self.certificates.iter().any(|c| c.gamma1 == 0.0)
    }
}

fn certificate_key(c: &Certificate) -> String {
    serde_json::to_string(&(c.gamma1, c.gamma2, &c.v, &c.map.scale)).unwrap_or_default()
}

/// Checks `∪ Ω_{γ₁⁽ⁱ⁾} ⊂ ∩ Ω_{γ₂⁽ⁱ⁾}` on `samples` points: half uniform on the box, half
/// on rays from the origin up to the first crossing of each `∂Ω_{γ₁⁽ⁱ⁾}`.
pub fn combine(certs: &[Certificate], samples: usize, seed: u64) -> Result<CombinedCertificate> {
    let first = certs.first().ok_or_else(|| Error::Incompatible("no certificates given".into()))?;
    for c in certs {
        if !c.certified {
            return Err(Error::Incompatible("an uncertified certificate cannot be combined".into()));
        }
        if c.dim() != first.dim() || c.map.scale.len() != first.map.scale.len() {
            return Err(Error::Incompatible("certificates live in different dimensions".into()));
        }
        if c.map.scale.iter().zip(&first.map.scale).any(|(a, b)| (a - b).abs() > 1e-12 * a.abs().max(1.0)) {
            return Err(Error::Incompatible("certificates use different coordinates".into()));
        }
        let sys = |c: &Certificate| c.provenance.as_ref().map(|p| p.system.clone());
        if let (Some(a), Some(b)) = (sys(c), sys(first)) {
            if a != b {
                return Err(Error::Incompatible(format!("systems differ: {b} vs {a}")));
            }
        }
    }
    let mut list: Vec<Certificate> = certs.to_vec();
    list.sort_by_cached_key(certificate_key);
    list.dedup_by(|a, b| certificate_key(a) == certificate_key(b));

    let n = first.dim();
    let scale = first.map.scale.clone();
    let compiled: Vec<_> = list.iter().map(|c| c.v.compile()).collect();
    let check = |y: &[f64]| -> bool {
        let inner = list.iter().zip(&compiled).any(|(c, v)| v.eval(y) <= c.gamma1);
        !inner || list.iter().zip(&compiled).all(|(c, v)| v.eval(y) <= c.gamma2)
    };
    let uniform = samples.div_ceil(2);
    let with_inner: Vec<usize> = (0..list.len()).filter(|&i| list[i].gamma1 > 0.0).collect();
    let rays = if with_inner.is_empty() { 0 } else { samples - uniform };
    let witness = (0..uniform + rays)
        .into_par_iter()
        .map_init(
            || ChaCha8Rng::seed_from_u64(seed),
            |rng, k| {
                rng.set_stream(k as u64);
                let y: Vec<f64> = if k < uniform {
                    (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect()
                } else {
                    let i = with_inner[(k - uniform) % with_inner.len()];
                    let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
                    let t = first_crossing(&compiled[i], list[i].gamma1, &u);
                    let s = if k % 4 == 0 { 1.0 } else { rng.random_range(0.0..=1.0) };
                    u.iter().map(|v| v * t * s).collect()
                };
                (!check(&y)).then_some(y)
            },
        )
        .find_first(Option::is_some)
        .flatten();
    if let Some(y) = witness {
        let x = AffineMap { scale }.to_original(&y);
        return Err(Error::NestingViolated { witness: x });
    }
    Ok(CombinedCertificate {
        certificates: list,
        nesting_verified: true,
        samples: uniform + rays,
        caveat: format!("nesting checked numerically on {} sampled points, not proven", uniform + rays),
    })
}

/// Largest `t ∈ [0, 1]` with `V(s·u) ≤ γ` for all sampled `s ≤ t`, refined by bisection.
fn first_crossing(v: &crate::poly::CompiledPoly, gamma: f64, u: &[f64]) -> f64 {
    let at = |t: f64| v.eval(&u.iter().map(|x| x * t).collect::<Vec<_>>());
    let steps = 256;
    let mut lo = 0.0;
    let mut hi = None;
    for k in 1..=steps {
        let t = k as f64 / steps as f64;
        if at(t) > gamma {
            hi = Some(t);
            break;
        }
        lo = t;
    }
    let Some(mut hi) = hi else { return 1.0 };
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if at(mid) > gamma {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleSettings {
    pub initial_conditions: usize,
    pub horizon: f64,
    pub step: f64,
    /// Relative level below which a `γ₁ = 0` target counts as reached.
    pub origin_level: f64,
    pub seed: u64,
}

impl Default for OracleSettings {
    fn default() -> Self {
        OracleSettings { initial_conditions: 500, horizon: 200.0, step: 1e-2, origin_level: 1e-6, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub tested: usize,
    pub violations: usize,
    /// Up to ten offending initial conditions in original coordinates.
    pub examples: Vec<Vec<f64>>,
}

/// Integrates `f` (original coordinates) from random points of `∪ Ω_{γ₂⁽ⁱ⁾}`; a run fails if it
/// leaves that union before reaching `∩ Ω_{γ₁⁽ⁱ⁾}` or does not reach it within the horizon.
pub fn trajectory_oracle(combined: &CombinedCertificate, f: &VectorField, settings: &OracleSettings) -> Result<OracleReport> {
    let certs = &combined.certificates;
    let Some(first) = certs.first() else {
        return Ok(OracleReport { tested: 0, violations: 0, examples: vec![] });
    };
    if !combined.nesting_verified || certs.iter().any(|c| !c.certified) {
        return Err(Error::Incompatible("oracle needs certified, verified certificates".into()));
    }
    let n = first.dim();
    let map = first.map.clone();
    let compiled: Vec<_> = certs.iter().map(|c| c.v.compile()).collect();
    let target: Vec<f64> = certs
        .iter()
        .map(|c| if c.gamma1 > 0.0 { c.gamma1 } else { settings.origin_level * c.gamma2 })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut starts = Vec::with_capacity(settings.initial_conditions);
    let mut tries = 0usize;
    while starts.len() < settings.initial_conditions {
        tries += 1;
        if tries > 1000 * settings.initial_conditions.max(1) {
            return Err(Error::InvalidArgument("could not sample initial conditions in the certified set".into()));
        }
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        if certs.iter().zip(&compiled).any(|(c, v)| v.eval(&y) <= c.gamma2) {
            starts.push(y);
        }
    }
    let outcomes: Vec<Result<bool>> = starts
        .par_iter()
        .map(|y0| {
            let x0 = map.to_original(y0);
            let mut left = false;
            let run = f.integrate_until(&x0, settings.horizon, settings.step, |_, x| {
                let y = map.to_rescaled(x);
                let vals: Vec<f64> = compiled.iter().map(|v| v.eval(&y)).collect();
                if !certs.iter().zip(&vals).any(|(c, v)| *v <= c.gamma2 * (1.0 + 1e-9) + 1e-12) {
                    left = true;
                    return true;
                }
                vals.iter().zip(&target).all(|(v, t)| v <= t)
            })?;
            Ok(matches!(run, RunOutcome::Stopped { .. }) && !left)
        })
        .collect();
    let mut violations = 0;
    let mut examples = Vec::new();
    for (ok, y0) in outcomes.into_iter().zip(&starts) {
        if !ok? {
            violations += 1;
            if examples.len() < 10 {
                examples.push(map.to_original(y0));
            }
        }
    }
    Ok(OracleReport { tested: starts.len(), violations, examples })
}

/// Oracle for a single certificate.
pub fn trajectory_oracle_single(cert: &Certificate, f: &VectorField, settings: &OracleSettings) -> Result<OracleReport> {
    let combined = CombinedCertificate {
        certificates: vec![cert.clone()],
        nesting_verified: true,
        samples: 0,
        caveat: String::new(),
    };
    trajectory_oracle(&combined, f, settings)
}
