//! Polynomial inner description of the region where the candidate provably decreases:
//! `S̄ = {x : R_r(x) < 0 for every sign pattern r}`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::Domain;
use crate::error::{Error, Result};
use crate::koopman::LyapunovCandidate;
use crate::poly::{CompiledPoly, PowerTable, SparsePoly};
use crate::polyapprox::{remez_minimax, ErrorModel, PolyApprox, RemezSettings};

/// Largest state dimension for which all `2ⁿ` sign patterns are materialized.
pub const MAX_PATTERN_DIM: usize = 16;

/// `R_r = ∇VᵀP + Σⱼ (−1)^{rⱼ} ∂ⱼV εⱼ` for every `r ∈ {0,1}ⁿ`; bit `j` of the
/// pattern index is `rⱼ`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ValiditySystem {
    pub v: SparsePoly,
    pub grad_v: Vec<SparsePoly>,
    /// `∇VᵀP`.
    pub lie: SparsePoly,
    /// `∂ⱼV · εⱼ` per component.
    pub weighted: Vec<SparsePoly>,
    pub r: Vec<SparsePoly>,
    pub models: Vec<ErrorModel>,
    pub domain: Domain,
    #[serde(skip)]
    compiled: Option<CompiledSystem>,
}

#[derive(Clone, Debug)]
struct CompiledSystem {
    lie: CompiledPoly,
    weighted: Vec<Option<CompiledPoly>>,
    degree: u32,
}

impl ValiditySystem {
    pub fn dim(&self) -> usize {
        self.v.dim()
    }

    /// Indices of patterns that differ only in components with nonzero error; the others
    /// duplicate one of these.
    pub fn distinct_patterns(&self) -> Vec<usize> {
        let n = self.dim();
        let free: Vec<usize> = (0..n).filter(|&j| !self.weighted[j].is_zero()).collect();
        (0..1usize << free.len())
            .map(|bits| {
                free.iter()
                    .enumerate()
                    .filter(|(k, _)| bits >> k & 1 == 1)
                    .fold(0usize, |acc, (_, &j)| acc | 1 << j)
            })
            .collect()
    }

    fn compiled(&self) -> CompiledSystem {
        self.compiled.clone().unwrap_or_else(|| compile(&self.lie, &self.weighted))
    }

    /// `max_r R_r(x)`, evaluated pattern by pattern.
    pub fn max_r(&self, x: &[f64]) -> f64 {
        self.distinct_patterns()
            .into_iter()
            .map(|r| self.r[r].eval(x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `∇VᵀP + Σⱼ |∂ⱼV εⱼ|`, the closed form of [`Self::max_r`].
    pub fn abs_form(&self, x: &[f64]) -> f64 {
        let c = self.compiled();
        let t = PowerTable::new(x, c.degree);
        abs_form_with(&c, &t)
    }

    /// Evaluator that shares one power table across all pieces.
    pub fn evaluator(&self) -> ValidityEvaluator {
        ValidityEvaluator { c: self.compiled() }
    }
}

fn compile(lie: &SparsePoly, weighted: &[SparsePoly]) -> CompiledSystem {
    let degree = weighted.iter().map(SparsePoly::degree).chain([lie.degree()]).max().unwrap_or(0);
    CompiledSystem {
        lie: lie.compile(),
        weighted: weighted.iter().map(|w| (!w.is_zero()).then(|| w.compile())).collect(),
        degree,
    }
}

fn abs_form_with(c: &CompiledSystem, t: &PowerTable) -> f64 {
    let mut v = c.lie.eval_with(t);
    for w in c.weighted.iter().flatten() {
        v += w.eval_with(t).abs();
    }
    v
}

/// Fast repeated evaluation of `max_r R_r`.
#[derive(Clone, Debug)]
pub struct ValidityEvaluator {
    c: CompiledSystem,
}

impl ValidityEvaluator {
    pub fn degree(&self) -> u32 {
        self.c.degree
    }

    pub fn max_r(&self, x: &[f64]) -> f64 {
        abs_form_with(&self.c, &PowerTable::new(x, self.c.degree))
    }
}

/// Assembles `R_r` from a polynomial candidate and one approximation per component.
pub fn build_validity_system(v: &SparsePoly, approx: &[PolyApprox]) -> Result<ValiditySystem> {
    let n = v.dim();
    if approx.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: approx.len() });
    }
    if n > MAX_PATTERN_DIM {
        return Err(Error::InvalidArgument(format!(
            "sign patterns are materialized only up to dimension {MAX_PATTERN_DIM}"
        )));
    }
    if let Some(a) = approx.iter().find(|a| a.p.dim() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: a.p.dim() });
    }
    let grad_v = v.gradient();
    let mut lie = SparsePoly::zero(n);
    let mut weighted = Vec::with_capacity(n);
    for (j, a) in approx.iter().enumerate() {
        lie = &lie + &(&grad_v[j] * &a.p);
        let eps = a.error_model.bound_poly(n)?;
        weighted.push(&grad_v[j] * &eps);
    }
    let r: Vec<SparsePoly> = (0..1usize << n)
        .into_par_iter()
        .map(|pattern| {
            let mut acc = lie.clone();
            for (j, w) in weighted.iter().enumerate() {
                if w.is_zero() {
                    continue;
                }
                acc = if pattern >> j & 1 == 1 { &acc - w } else { &acc + w };
            }
            acc
        })
        .collect();
    let compiled = Some(compile(&lie, &weighted));
    Ok(ValiditySystem {
        v: v.clone(),
        grad_v,
        lie,
        weighted,
        r,
        models: approx.iter().map(|a| a.error_model.clone()).collect(),
        domain: approx[0].domain.clone(),
        compiled,
    })
}

/// Polynomial stand-in for the candidate: itself when polynomial, otherwise a minimax fit
/// shifted so that it vanishes at the origin.
pub fn candidate_polynomial(c: &LyapunovCandidate, domain: &Domain, settings: &RemezSettings) -> Result<SparsePoly> {
    match c {
        LyapunovCandidate::Polynomial { v } => Ok(v.clone()),
        LyapunovCandidate::SquaredModulus { .. } => {
            let (fit, _) = remez_minimax(|x| c.eval(x), domain, settings)?;
            let p0 = fit.p.constant_term();
            Ok(&fit.p - &SparsePoly::constant(fit.p.dim(), p0))
        }
    }
}
