//! SOS certification of sublevel annuli: for fixed `(γ₁, γ₂)` every
//! `P_r = −R_r − σ₁(V−γ₁) − σ₂(γ₂−V)` and both multipliers must be sums of squares.

use std::collections::BTreeMap;

use log::debug;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levels::{level_cap, search_levels, LevelSearchSettings};
use crate::poly::{MultiIndex, SparsePoly};
use crate::roa::{Certificate, MultiplierDegrees, SolverSummary, ValidatorKind};
use crate::sdp::{InteriorPoint, SdpEntry, SdpInstance, SdpOutcome, SdpSettings, SdpSolver};
use crate::validity::ValiditySystem;

/// Tolerances of the post-hoc witness check.
pub const WITNESS_RESIDUAL_TOL: f64 = 1e-6;
pub const WITNESS_EIGENVALUE_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SosProgram {
    pub v: SparsePoly,
    pub r: Vec<SparsePoly>,
    pub gamma1: f64,
    pub gamma2: f64,
    pub sigma1_degree: u32,
    pub sigma2_degree: u32,
    /// One multiplier pair per pattern instead of a shared pair.
    #[serde(default)]
    pub per_pattern: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockRole {
    Sigma1(usize),
    Sigma2(usize),
    Residual(usize),
}

/// Monomial vector `z` of each Gram block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SosLayout {
    pub roles: Vec<BlockRole>,
    pub bases: Vec<Vec<MultiIndex>>,
}

fn half_basis(dim: usize, low: u32, high: u32) -> Vec<MultiIndex> {
    MultiIndex::all_up_to(dim, high)
        .into_iter()
        .filter(|a| a.degree() >= low)
        .collect()
}

fn vanishes_to_second_order(p: &SparsePoly, scale: f64) -> bool {
    p.terms().all(|(a, c)| a.degree() >= 2 || c.abs() <= 1e-12 * scale.max(1.0))
}

/// `Σ_{a≤b} z_a z_b` products of a basis, with the multiplicity of each Gram entry.
fn gram_products(basis: &[MultiIndex]) -> Vec<(usize, usize, MultiIndex, f64)> {
    let mut out = Vec::new();
    for a in 0..basis.len() {
        for b in a..basis.len() {
            out.push((a, b, basis[a].plus(&basis[b]), if a == b { 1.0 } else { 2.0 }));
        }
    }
    out
}

/// Coefficient matching for every pattern:
/// `P_r + σ₁(V−γ₁) + σ₂(γ₂−V) = −R_r`, one PSD block per unknown SOS polynomial.
pub fn sos_to_sdp(prog: &SosProgram) -> Result<(SdpInstance, SosLayout)> {
    let n = prog.v.dim();
    if prog.r.is_empty() {
        return Err(Error::InvalidArgument("no sign-pattern polynomials".into()));
    }
    if prog.r.iter().any(|r| r.dim() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: prog.r[0].dim() });
    }
    if prog.sigma1_degree % 2 == 1 || prog.sigma2_degree % 2 == 1 {
        return Err(Error::DegreeMismatch("multiplier degrees must be even".into()));
    }
    let dv = prog.v.degree();
    let scale = prog.r.iter().map(|r| r.max_abs_coeff()).fold(prog.v.max_abs_coeff(), f64::max);
    let pinned = prog.gamma1 == 0.0
        && vanishes_to_second_order(&prog.v, scale)
        && prog.r.iter().all(|r| vanishes_to_second_order(r, scale));
    let low = u32::from(pinned);

    let nm = if prog.per_pattern { prog.r.len() } else { 1 };
    let mut roles = Vec::new();
    let mut bases = Vec::new();
    for k in 0..nm {
        roles.push(BlockRole::Sigma1(k));
        bases.push(half_basis(n, 0, prog.sigma1_degree / 2));
        roles.push(BlockRole::Sigma2(k));
        bases.push(half_basis(n, low, prog.sigma2_degree / 2));
    }
    let mult_deg = (prog.sigma1_degree.max(prog.sigma2_degree)) + dv;
    for (r, rp) in prog.r.iter().enumerate() {
        let dp = rp.degree().max(mult_deg);
        if dp % 2 == 1 {
            return Err(Error::DegreeMismatch(format!(
                "pattern {r}: residual degree {dp} is odd and has no Gram representation"
            )));
        }
        roles.push(BlockRole::Residual(r));
        bases.push(half_basis(n, low, dp / 2));
    }

    let one = SparsePoly::constant(n, 1.0);
    let v_minus_g1 = &prog.v - &one.scale(prog.gamma1);
    let g2_minus_v = &one.scale(prog.gamma2) - &prog.v;
    let products: Vec<Vec<(usize, usize, MultiIndex, f64)>> = bases.iter().map(|b| gram_products(b)).collect();

    let mut inst = SdpInstance::new(bases.iter().map(Vec::len).collect());
    for (r, rp) in prog.r.iter().enumerate() {
        let mut rows: BTreeMap<MultiIndex, Vec<SdpEntry>> = BTreeMap::new();
        let m = if prog.per_pattern { r } else { 0 };
        let blocks = [
            (2 * m, Some(&v_minus_g1)),
            (2 * m + 1, Some(&g2_minus_v)),
            (2 * nm + r, None),
        ];
        for (block, factor) in blocks {
            for (a, b, alpha, mult) in &products[block] {
                match factor {
                    Some(f) => {
                        for (beta, c) in f.terms() {
                            rows.entry(alpha.plus(beta)).or_default().push(SdpEntry {
                                block,
                                row: *a,
                                col: *b,
                                coef: mult * c,
                            });
                        }
                    }
                    None => rows.entry(alpha.clone()).or_default().push(SdpEntry {
                        block,
                        row: *a,
                        col: *b,
                        coef: *mult,
                    }),
                }
            }
        }
        for (alpha, _) in rp.terms() {
            rows.entry(alpha.clone()).or_default();
        }
        for (alpha, entries) in rows {
            let rhs = -rp.coeff(&alpha);
            let merged = merge(entries);
            if merged.is_empty() {
                if rhs.abs() > 1e-12 * scale.max(1.0) {
                    // 0 = rhs ≠ 0: keep an unsatisfiable row so the solver reports infeasibility.
                    inst.add_constraint(Vec::new(), rhs)?;
                }
                continue;
            }
            inst.add_constraint(merged, rhs)?;
        }
    }
    Ok((inst, SosLayout { roles, bases }))
}

fn merge(mut entries: Vec<SdpEntry>) -> Vec<SdpEntry> {
    entries.sort_by_key(|e| (e.block, e.row, e.col));
    let mut out: Vec<SdpEntry> = Vec::with_capacity(entries.len());
    for e in entries {
        match out.last_mut() {
            Some(l) if (l.block, l.row, l.col) == (e.block, e.row, e.col) => l.coef += e.coef,
            _ => out.push(e),
        }
    }
    out.retain(|e| e.coef != 0.0);
    out
}

/// `zᵀ Q z`.
pub fn gram_polynomial(basis: &[MultiIndex], q: &DMatrix<f64>, dim: usize) -> SparsePoly {
    SparsePoly::from_terms(
        dim,
        gram_products(basis)
            .into_iter()
            .map(|(a, b, alpha, mult)| (alpha, mult * q[(a, b)])),
    )
}

/// Multipliers and residual SOS polynomials reconstructed from an accepted solve.
#[derive(Clone, Debug)]
pub struct SosWitness {
    pub sigma1: Vec<SparsePoly>,
    pub sigma2: Vec<SparsePoly>,
    pub residual_polys: Vec<SparsePoly>,
    pub grams: Vec<DMatrix<f64>>,
    /// `max_r max_α |P_r + R_r + σ₁(V−γ₁) + σ₂(γ₂−V)|_α / (1 + max_α |R_r|)`.
    pub identity_residual: f64,
    pub min_eigenvalue: f64,
    /// The witness certifies `V/v_scale` and `R_r/r_scale`; both factors are positive.
    pub v_scale: f64,
    pub r_scale: f64,
}

#[derive(Clone, Debug)]
pub enum SosOutcome {
    Feasible(Box<SosWitness>),
    Infeasible,
    Unknown(String),
}

#[derive(Clone, Debug)]
pub struct SosReport {
    pub outcome: SosOutcome,
    pub iterations: usize,
}

/// Rebuilds the polynomial identity from Gram blocks and measures how well it holds.
pub fn reconstruct(prog: &SosProgram, layout: &SosLayout, grams: Vec<DMatrix<f64>>) -> SosWitness {
    let n = prog.v.dim();
    let polys: Vec<SparsePoly> = layout
        .bases
        .iter()
        .zip(&grams)
        .map(|(b, q)| gram_polynomial(b, q, n))
        .collect();
    let mut sigma1 = Vec::new();
    let mut sigma2 = Vec::new();
    let mut residual_polys = vec![SparsePoly::zero(n); prog.r.len()];
    for (role, p) in layout.roles.iter().zip(polys) {
        match role {
            BlockRole::Sigma1(_) => sigma1.push(p),
            BlockRole::Sigma2(_) => sigma2.push(p),
            BlockRole::Residual(r) => residual_polys[*r] = p,
        }
    }
    let one = SparsePoly::constant(n, 1.0);
    let v_minus_g1 = &prog.v - &one.scale(prog.gamma1);
    let g2_minus_v = &one.scale(prog.gamma2) - &prog.v;
    let mut identity_residual = 0.0f64;
    for (r, rp) in prog.r.iter().enumerate() {
        let m = if prog.per_pattern { r } else { 0 };
        let lhs = &(&(&residual_polys[r] + rp) + &(&sigma1[m] * &v_minus_g1)) + &(&sigma2[m] * &g2_minus_v);
        identity_residual = identity_residual.max(lhs.max_abs_coeff() / (1.0 + rp.max_abs_coeff()));
    }
    let min_eigenvalue = grams
        .iter()
        .filter(|q| q.nrows() > 0)
        .map(|q| q.clone().symmetric_eigenvalues().min())
        .fold(f64::INFINITY, f64::min);
    SosWitness { sigma1, sigma2, residual_polys, grams, identity_residual, min_eigenvalue, v_scale: 1.0, r_scale: 1.0 }
}

/// Feasibility of one `(γ₁, γ₂)` pair. The program is solved as given and, if that ends
/// undecided, once more after [`normalized`]. Any solver answer whose reconstructed witness
/// fails the identity or eigenvalue tolerance is reported as unknown.
pub fn check_sos(prog: &SosProgram, solver: &dyn SdpSolver) -> Result<SosReport> {
    let mut iterations = 0;
    let mut reasons = Vec::new();
    for (scaled, v_scale, r_scale) in [(prog.clone(), 1.0, 1.0), normalized(prog)] {
        let (inst, layout) = sos_to_sdp(&scaled)?;
        let rep = solver.solve(&inst);
        iterations += rep.iterations;
        let outcome = match rep.outcome {
            SdpOutcome::Feasible { x } => {
                let w = SosWitness { v_scale, r_scale, ..reconstruct(&scaled, &layout, x) };
                if w.identity_residual <= WITNESS_RESIDUAL_TOL && w.min_eigenvalue >= -WITNESS_EIGENVALUE_TOL {
                    SosOutcome::Feasible(Box::new(w))
                } else {
                    SosOutcome::Unknown(format!(
                        "witness rejected: identity residual {:e}, eigenvalue {:e}",
                        w.identity_residual, w.min_eigenvalue
                    ))
                }
            }
            SdpOutcome::Infeasible => SosOutcome::Infeasible,
            SdpOutcome::Unknown(m) => SosOutcome::Unknown(m),
        };
        match outcome {
            SosOutcome::Unknown(m) => reasons.push(m),
            decided => return Ok(SosReport { outcome: decided, iterations }),
        }
    }
    Ok(SosReport { outcome: SosOutcome::Unknown(reasons.join("; normalized: ")), iterations })
}

/// Equivalent program with `γ₂ = 1` and unit largest coefficient across the `R_r`.
pub fn normalized(prog: &SosProgram) -> (SosProgram, f64, f64) {
    let v_scale = if prog.gamma2 > 0.0 { prog.gamma2 } else { 1.0 };
    let r_max = prog.r.iter().map(SparsePoly::max_abs_coeff).fold(0.0, f64::max);
    let r_scale = if r_max > 0.0 { r_max } else { 1.0 };
    let scaled = SosProgram {
        v: prog.v.scale(1.0 / v_scale),
        r: prog.r.iter().map(|r| r.scale(1.0 / r_scale)).collect(),
        gamma1: prog.gamma1 / v_scale,
        gamma2: prog.gamma2 / v_scale,
        ..prog.clone()
    };
    (scaled, v_scale, r_scale)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SosSettings {
    /// Defaults to `deg R − deg V` rounded up to even.
    pub sigma1_degree: Option<u32>,
    pub sigma2_degree: Option<u32>,
    #[serde(default)]
    pub per_pattern: bool,
    #[serde(default)]
    pub sdp: SdpSettings,
    #[serde(default)]
    pub levels: LevelSearchSettings,
}

impl Default for SosSettings {
    fn default() -> Self {
        SosSettings {
            sigma1_degree: None,
            sigma2_degree: None,
            per_pattern: false,
            sdp: SdpSettings::default(),
            levels: LevelSearchSettings::default(),
        }
    }
}

pub fn default_multiplier_degree(vs: &ValiditySystem) -> u32 {
    let dr = vs.r.iter().map(SparsePoly::degree).max().unwrap_or(0);
    let d = dr.saturating_sub(vs.v.degree());
    d + d % 2
}

/// Sampled values of `V` and `max_r R_r` on the domain and on shrinking boxes around the
/// origin. Any SOS certificate forces `R_r ≤ 0` on the annulus, so a sample with
/// `γ₁ ≤ V ≤ γ₂` and `R_r > 0` rules a probe out.
struct SampleScreen {
    points: Vec<(f64, f64, Vec<f64>)>,
}

impl SampleScreen {
    const UNIFORM: usize = 4000;
    const PER_SCALE: usize = 200;
    const SCALES: i32 = 24;

    fn new(vs: &ValiditySystem, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let v = vs.v.compile();
        let eval = vs.evaluator();
        let mut xs: Vec<Vec<f64>> = (0..Self::UNIFORM).map(|_| vs.domain.sample(&mut rng)).collect();
        for k in 1..=Self::SCALES {
            let s = 0.5f64.powi(k);
            for _ in 0..Self::PER_SCALE {
                xs.push(vs.domain.sample(&mut rng).iter().map(|u| u * s).collect());
            }
        }
        let points = xs
            .into_par_iter()
            .filter(|x| vs.domain.contains(x))
            .filter_map(|x| {
                let r = eval.max_r(&x);
                (r > 0.0).then(|| (v.eval(&x), r, x))
            })
            .collect();
        SampleScreen { points }
    }

    fn refute(&self, g1: f64, g2: f64) -> Option<&[f64]> {
        self.points
            .iter()
            .find(|(v, _, _)| *v >= g1 && *v <= g2)
            .map(|(_, _, x)| x.as_slice())
    }
}

/// Level search with SOS feasibility as the oracle.
pub fn certify_levels_sos(vs: &ValiditySystem, settings: &SosSettings) -> Result<Certificate> {
    certify_levels_sos_with(vs, settings, &InteriorPoint { settings: settings.sdp })
}

pub fn certify_levels_sos_with(vs: &ValiditySystem, settings: &SosSettings, solver: &dyn SdpSolver) -> Result<Certificate> {
    let d = default_multiplier_degree(vs);
    let degrees = MultiplierDegrees {
        sigma1: settings.sigma1_degree.unwrap_or(d),
        sigma2: settings.sigma2_degree.unwrap_or(d),
    };
    let r: Vec<SparsePoly> = vs.distinct_patterns().into_iter().map(|i| vs.r[i].clone()).collect();
    let mut prog = SosProgram {
        v: vs.v.clone(),
        r,
        gamma1: 0.0,
        gamma2: 0.0,
        sigma1_degree: degrees.sigma1,
        sigma2_degree: degrees.sigma2,
        per_pattern: settings.per_pattern,
    };
    sos_to_sdp(&SosProgram { gamma2: 1.0, ..prog.clone() })?;
    let lv = &settings.levels;
    let cap = level_cap(&vs.v, &vs.domain, lv.boundary_per_face, lv.cap_slack, lv.seed);
    let mut summary = SolverSummary { min_eigenvalue: f64::INFINITY, ..Default::default() };
    let mut notes = Vec::new();
    let screen = SampleScreen::new(vs, lv.seed);
    let search = search_levels(cap, lv, |g1, g2| {
        if let Some(x) = screen.refute(g1, g2) {
            summary.refuted_by_sampling += 1;
            debug!("SOS probe ({g1:e}, {g2:e}): refuted by sample {x:?}");
            return false;
        }
        prog.gamma1 = g1;
        prog.gamma2 = g2;
        summary.solves += 1;
        let started = std::time::Instant::now();
        let report = check_sos(&prog, solver);
        debug!(
            "SOS probe ({g1:e}, {g2:e}): {} in {:?}",
            match &report {
                Ok(r) => match &r.outcome {
                    SosOutcome::Feasible(_) => "feasible".to_string(),
                    SosOutcome::Infeasible => "infeasible".to_string(),
                    SosOutcome::Unknown(m) => format!("unknown ({m})"),
                },
                Err(e) => e.to_string(),
            },
            started.elapsed()
        );
        match report {
            Ok(rep) => {
                summary.iterations += rep.iterations;
                match rep.outcome {
                    SosOutcome::Feasible(w) => {
                        summary.feasible += 1;
                        summary.max_residual = summary.max_residual.max(w.identity_residual);
                        summary.min_eigenvalue = summary.min_eigenvalue.min(w.min_eigenvalue);
                        true
                    }
                    SosOutcome::Infeasible => {
                        summary.infeasible += 1;
                        false
                    }
                    SosOutcome::Unknown(m) => {
                        summary.unknown += 1;
                        if notes.len() < 8 {
                            notes.push(format!("({g1:e}, {g2:e}): {m}"));
                        }
                        false
                    }
                }
            }
            Err(e) => {
                summary.unknown += 1;
                notes.push(e.to_string());
                false
            }
        }
    });
    if summary.feasible == 0 {
        summary.min_eigenvalue = 0.0;
    }
    let mut cert = Certificate::from_search(search, ValidatorKind::Sos, vs.v.clone(), vs.models.clone());
    cert.degrees = Some(degrees);
    cert.diagnostics.solver = Some(summary);
    cert.diagnostics.notes = notes;
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Domain;
    use crate::polyapprox::PolyApprox;
    use crate::validity::build_validity_system;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn poly(dim: usize, terms: &[(&[u32], f64)]) -> SparsePoly {
        SparsePoly::from_terms(dim, terms.iter().map(|(e, c)| (MultiIndex::new(e.to_vec()), *c)))
    }

    fn one_d(r: SparsePoly) -> SosProgram {
        SosProgram {
            v: poly(1, &[(&[2], 1.0)]),
            r: vec![r],
            gamma1: 0.0,
            gamma2: 1.0,
            sigma1_degree: 0,
            sigma2_degree: 0,
            per_pattern: false,
        }
    }

    fn solver() -> InteriorPoint {
        InteriorPoint::default()
    }

    #[test]
    fn hand_instance_is_feasible_and_verified() {
        let prog = one_d(poly(1, &[(&[2], -1.0)]));
        let rep = check_sos(&prog, &solver()).unwrap();
        match rep.outcome {
            SosOutcome::Feasible(w) => {
                assert!(w.identity_residual <= 1e-9);
                assert!(w.min_eigenvalue >= -1e-9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn increasing_instance_is_not_certified() {
        let prog = one_d(poly(1, &[(&[2], 1.0)]));
        let rep = check_sos(&prog, &solver()).unwrap();
        assert!(!matches!(rep.outcome, SosOutcome::Feasible(_)));
        let prog = SosProgram { gamma1: 0.5, ..prog };
        assert!(matches!(check_sos(&prog, &solver()).unwrap().outcome, SosOutcome::Infeasible));
    }

    #[test]
    fn zero_polynomial_has_zero_gram() {
        let b = half_basis(2, 0, 2);
        let q = DMatrix::zeros(b.len(), b.len());
        assert!(gram_polynomial(&b, &q, 2).is_zero());
    }

    #[test]
    fn gram_polynomial_matches_square() {
        let b = half_basis(2, 0, 1);
        let v = nalgebra::DVector::from_vec(vec![1.0, 2.0, -3.0]);
        let q = &v * v.transpose();
        let p = gram_polynomial(&b, &q, 2);
        let lin = poly(2, &[(&[0, 0], 1.0), (&[1, 0], 2.0), (&[0, 1], -3.0)]);
        assert!((&p - &(&lin * &lin)).max_abs_coeff() < 1e-12);
    }

    #[test]
    fn odd_residual_degree_is_rejected() {
        let prog = SosProgram { r: vec![poly(1, &[(&[3], -1.0)])], ..one_d(SparsePoly::zero(1)) };
        assert!(matches!(sos_to_sdp(&prog), Err(Error::DegreeMismatch(_))));
    }

    #[test]
    fn pinned_origin_drops_constant_monomial() {
        let (inst, layout) = sos_to_sdp(&one_d(poly(1, &[(&[2], -1.0)]))).unwrap();
        assert_eq!(layout.bases[1], vec![] as Vec<MultiIndex>);
        assert_eq!(layout.bases[2], vec![MultiIndex::new(vec![1])]);
        assert_eq!(inst.blocks, vec![1, 0, 1]);
        let (_, layout) = sos_to_sdp(&SosProgram { gamma1: 0.1, ..one_d(poly(1, &[(&[2], -1.0)])) }).unwrap();
        assert_eq!(layout.bases[2].len(), 2);
    }

    fn linear_system() -> ValiditySystem {
        let v = poly(2, &[(&[2, 0], 1.5), (&[1, 1], 0.5), (&[0, 2], 1.0)]);
        let f1 = poly(2, &[(&[0, 1], 1.0)]);
        let f2 = poly(2, &[(&[1, 0], -2.0), (&[0, 1], -1.0), (&[3, 0], 1.0 / 3.0)]);
        let approx = vec![PolyApprox::exact(f1, Domain::unit(2)), PolyApprox::exact(f2, Domain::unit(2))];
        build_validity_system(&v, &approx).unwrap()
    }

    #[test]
    fn certificate_is_sound_on_samples() {
        let vs = linear_system();
        let cert = certify_levels_sos(&vs, &SosSettings::default()).unwrap();
        assert!(cert.certified);
        assert_eq!(cert.gamma1, 0.0);
        let s = cert.diagnostics.solver.as_ref().unwrap();
        assert!(s.max_residual <= WITNESS_RESIDUAL_TOL && s.min_eigenvalue >= -WITNESS_EIGENVALUE_TOL);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut hits = 0;
        while hits < 10_000 {
            let x = [rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)];
            let v = vs.v.eval(&x);
            if v > cert.gamma1 && v <= cert.gamma2 {
                hits += 1;
                assert!(vs.max_r(&x) < 0.0, "violation at {x:?}");
            }
        }
    }

    #[test]
    fn unstable_field_is_empty() {
        let v = poly(2, &[(&[2, 0], 1.0), (&[0, 2], 1.0)]);
        let approx = vec![
            PolyApprox::exact(SparsePoly::var(2, 0), Domain::unit(2)),
            PolyApprox::exact(SparsePoly::var(2, 1), Domain::unit(2)),
        ];
        let vs = build_validity_system(&v, &approx).unwrap();
        let cert = certify_levels_sos(&vs, &SosSettings::default()).unwrap();
        assert!(!cert.certified);
    }

    #[test]
    fn feasible_pairs_are_monotone() {
        let vs = linear_system();
        let cert = certify_levels_sos(&vs, &SosSettings::default()).unwrap();
        let probes = &cert.diagnostics.probes;
        for a in probes.iter().filter(|p| p.certified) {
            for b in probes.iter().filter(|p| !p.certified) {
                let inside = b.gamma1 >= a.gamma1 && b.gamma2 <= a.gamma2 && b.gamma1 < b.gamma2;
                assert!(!inside, "{b:?} refused inside certified {a:?}");
            }
        }
    }
}
