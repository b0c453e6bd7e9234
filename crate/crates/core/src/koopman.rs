//! Finite-section approximations of the Koopman generator and the Lyapunov
//! candidates built from its principal eigenfunctions.

use std::collections::HashMap;

use log::warn;
use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Domain, VectorField};
use crate::error::{Error, Result};
use crate::poly::{MultiIndex, PowerTable, SparsePoly};

/// Dictionary of scalar functions `Ψ = (ψ₁, …, ψ_N)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Basis {
    Monomial { dim: usize, exponents: Vec<MultiIndex> },
    GaussianRbf { centers: Vec<Vec<f64>>, eta: f64 },
}

impl Basis {
    /// All monomials of total degree at most `degree`, graded-lex.
    pub fn monomial(dim: usize, degree: u32) -> Self {
        Basis::Monomial {
            dim,
            exponents: MultiIndex::all_up_to(dim, degree),
        }
    }

    pub fn monomial_from(dim: usize, exponents: Vec<MultiIndex>) -> Result<Self> {
        if let Some(e) = exponents.iter().find(|e| e.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: e.dim() });
        }
        Ok(Basis::Monomial { dim, exponents })
    }

    /// `e^{−η²‖x−cᵢ‖²}` for each center.
    pub fn gaussian_rbf(centers: Vec<Vec<f64>>, eta: f64) -> Result<Self> {
        if !(eta > 0.0) {
            return Err(Error::InvalidArgument(format!("RBF width must be positive, got {eta}")));
        }
        let dim = centers
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::InvalidArgument("RBF basis needs at least one center".into()))?;
        for c in &centers {
            if c.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: c.len() });
            }
        }
        for i in 0..centers.len() {
            for j in 0..i {
                if centers[i] == centers[j] {
                    return Err(Error::InvalidArgument(format!("RBF centers {j} and {i} coincide")));
                }
            }
        }
        Ok(Basis::GaussianRbf { centers, eta })
    }

    pub fn dim(&self) -> usize {
        match self {
            Basis::Monomial { dim, .. } => *dim,
            Basis::GaussianRbf { centers, .. } => centers[0].len(),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Basis::Monomial { exponents, .. } => exponents.len(),
            Basis::GaussianRbf { centers, .. } => centers.len(),
        }
    }

    fn max_degree(&self) -> u32 {
        match self {
            Basis::Monomial { exponents, .. } => exponents.iter().map(MultiIndex::degree).max().unwrap_or(0),
            Basis::GaussianRbf { .. } => 0,
        }
    }

    /// `Ψ(x)`.
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Basis::Monomial { exponents, .. } => {
                let t = PowerTable::new(x, self.max_degree());
                exponents.iter().map(|e| t.monomial(e.exponents())).collect()
            }
            Basis::GaussianRbf { centers, eta } => centers.iter().map(|c| rbf(x, c, *eta)).collect(),
        }
    }

    /// `(Ψ(x), (∇ψᵢ(x)·v)ᵢ)` for a direction `v`, the pointwise generator action when `v = F(x)`.
    pub fn eval_with_directional(&self, x: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        match self {
            Basis::Monomial { exponents, .. } => {
                let t = PowerTable::new(x, self.max_degree());
                let mut vals = Vec::with_capacity(exponents.len());
                let mut dirs = Vec::with_capacity(exponents.len());
                for e in exponents {
                    let ex = e.exponents();
                    vals.push(t.monomial(ex));
                    let mut d = 0.0;
                    for k in 0..ex.len() {
                        if ex[k] == 0 || v[k] == 0.0 {
                            continue;
                        }
                        let mut m = ex[k] as f64 * v[k];
                        for (j, &p) in ex.iter().enumerate() {
                            m *= t.get(j, if j == k { p - 1 } else { p });
                        }
                        d += m;
                    }
                    dirs.push(d);
                }
                (vals, dirs)
            }
            Basis::GaussianRbf { centers, eta } => {
                let e2 = eta * eta;
                let mut vals = Vec::with_capacity(centers.len());
                let mut dirs = Vec::with_capacity(centers.len());
                for c in centers {
                    let p = rbf(x, c, *eta);
                    let d: f64 = (0..x.len()).map(|k| (x[k] - c[k]) * v[k]).sum();
                    vals.push(p);
                    dirs.push(-2.0 * e2 * d * p);
                }
                (vals, dirs)
            }
        }
    }

    /// `∇ψᵢ(x)` for every element, row `i` of the result.
    pub fn gradients(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let n = x.len();
        let mut out = vec![vec![0.0; n]; self.size()];
        for k in 0..n {
            let mut e = vec![0.0; n];
            e[k] = 1.0;
            for (row, d) in out.iter_mut().zip(self.eval_with_directional(x, &e).1) {
                row[k] = d;
            }
        }
        out
    }
}

fn rbf(x: &[f64], c: &[f64], eta: f64) -> f64 {
    let r2: f64 = x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
    (-eta * eta * r2).exp()
}

/// Result of applying the generator `ψ ↦ ∇ψ·F` to one basis element.
#[derive(Debug)]
pub enum Generated<'a> {
    Poly(SparsePoly),
    Pointwise {
        field: &'a VectorField,
        basis: &'a Basis,
        index: usize,
    },
}

impl Generated<'_> {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Generated::Poly(p) => p.eval(x),
            Generated::Pointwise { field, basis, index } => {
                let fx = field.eval(x);
                basis.eval_with_directional(x, &fx).1[*index]
            }
        }
    }

    pub fn as_poly(&self) -> Option<&SparsePoly> {
        match self {
            Generated::Poly(p) => Some(p),
            Generated::Pointwise { .. } => None,
        }
    }
}

/// `∇ψᵢᵀ F`, exact when the field is polynomial and the basis monomial.
pub fn apply_generator<'a>(f: &'a VectorField, basis: &'a Basis, index: usize) -> Result<Generated<'a>> {
    if basis.dim() != f.dim() {
        return Err(Error::DimensionMismatch { expected: f.dim(), got: basis.dim() });
    }
    if index >= basis.size() {
        return Err(Error::InvalidArgument(format!("basis index {index} out of range")));
    }
    match basis {
        Basis::Monomial { dim, exponents } if f.is_polynomial() => {
            let comps = f.polynomial_components()?;
            let psi = SparsePoly::monomial(exponents[index].clone(), 1.0);
            let mut acc = SparsePoly::zero(*dim);
            for (k, fk) in comps.iter().enumerate() {
                let d = psi.partial(k)?;
                if !d.is_zero() {
                    acc = &acc + &(&d * fk);
                }
            }
            Ok(Generated::Poly(acc))
        }
        _ => Ok(Generated::Pointwise { field: f, basis, index }),
    }
}

/// How the generator was projected onto the basis span.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Projection {
    Truncation,
    L2 { domain: Domain, samples: usize, seed: u64 },
}

/// `L_N`: column `i` holds the basis coefficients of the projected `Lψᵢ`.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorMatrix {
    pub matrix: DMatrix<f64>,
    pub basis: Basis,
    pub projection: Projection,
}

#[derive(Serialize, Deserialize)]
struct GeneratorJson {
    size: usize,
    rows: Vec<Vec<f64>>,
    basis: Basis,
    projection: Projection,
}

impl Serialize for GeneratorMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let n = self.matrix.nrows();
        GeneratorJson {
            size: n,
            rows: (0..n).map(|i| self.matrix.row(i).iter().copied().collect()).collect(),
            basis: self.basis.clone(),
            projection: self.projection.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for GeneratorMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let g = GeneratorJson::deserialize(d)?;
        if g.rows.len() != g.size || g.rows.iter().any(|r| r.len() != g.size) || g.basis.size() != g.size {
            return Err(D::Error::custom("generator matrix shape does not match its basis"));
        }
        Ok(GeneratorMatrix {
            matrix: DMatrix::from_fn(g.size, g.size, |i, j| g.rows[i][j]),
            basis: g.basis,
            projection: g.projection,
        })
    }
}

/// Truncation projection: drops every term of `Lψᵢ` outside the monomial basis.
pub fn build_generator_truncation(f: &VectorField, basis: &Basis) -> Result<GeneratorMatrix> {
    let exponents = match basis {
        Basis::Monomial { exponents, .. } => exponents,
        Basis::GaussianRbf { .. } => {
            return Err(Error::InvalidArgument("truncation projection needs a monomial basis".into()))
        }
    };
    f.polynomial_components()?;
    if basis.dim() != f.dim() {
        return Err(Error::DimensionMismatch { expected: f.dim(), got: basis.dim() });
    }
    let index: HashMap<&MultiIndex, usize> = exponents.iter().enumerate().map(|(i, e)| (e, i)).collect();
    let n = exponents.len();
    let columns = (0..n)
        .into_par_iter()
        .map(|i| {
            let g = apply_generator(f, basis, i)?;
            let p = g.as_poly().expect("polynomial field with monomial basis");
            let mut col = vec![0.0; n];
            for (a, c) in p.terms() {
                if let Some(&r) = index.get(a) {
                    col[r] = c;
                }
            }
            Ok(col)
        })
        .collect::<Result<Vec<_>>>()?;
    let matrix = DMatrix::from_fn(n, n, |r, c| columns[c][r]);
    Ok(GeneratorMatrix {
        matrix,
        basis: basis.clone(),
        projection: Projection::Truncation,
    })
}

/// Default Monte-Carlo sample count `max(10N, 5000)`.
pub fn default_sample_count(n: usize) -> usize {
    (10 * n).max(5000)
}

/// Galerkin projection with Monte-Carlo inner products over `x_pi`.
pub fn build_generator_l2(f: &VectorField, basis: &Basis, x_pi: &Domain, m: usize, seed: u64) -> Result<GeneratorMatrix> {
    let n = basis.size();
    if basis.dim() != f.dim() || x_pi.dim() != f.dim() {
        return Err(Error::DimensionMismatch { expected: f.dim(), got: basis.dim().min(x_pi.dim()) });
    }
    if m < 10 * n {
        return Err(Error::InvalidArgument(format!("need at least {} samples for {n} basis functions, got {m}", 10 * n)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<Vec<f64>> = (0..m).map(|_| x_pi.sample(&mut rng)).collect();
    let values: Vec<Vec<f64>> = samples.par_iter().map(|x| f.eval(x)).collect();
    let projection = Projection::L2 {
        domain: x_pi.clone(),
        samples: m,
        seed,
    };
    build_generator_l2_on(basis, &samples, &values, projection)
}

/// Galerkin projection on given sample points `xₖ` with field values `F(xₖ)`.
pub fn build_generator_l2_on(
    basis: &Basis,
    samples: &[Vec<f64>],
    values: &[Vec<f64>],
    projection: Projection,
) -> Result<GeneratorMatrix> {
    let n = basis.size();
    let m = samples.len();
    if values.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: values.len() });
    }
    if m < 10 * n {
        return Err(Error::InvalidArgument(format!("need at least {} samples for {n} basis functions, got {m}", 10 * n)));
    }
    let rows: Vec<(Vec<f64>, Vec<f64>)> = samples
        .par_iter()
        .zip(values)
        .map(|(x, v)| basis.eval_with_directional(x, v))
        .collect();
    let w = 1.0 / (m as f64).sqrt();
    let psi = DMatrix::from_fn(m, n, |r, c| rows[r].0[c] * w);
    let lpsi = DMatrix::from_fn(m, n, |r, c| rows[r].1[c] * w);
    if psi.iter().chain(lpsi.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("basis or generator samples".into()));
    }
    let matrix = ridge_solve(&psi, &lpsi)?;
    Ok(GeneratorMatrix {
        matrix,
        basis: basis.clone(),
        projection,
    })
}

/// Solves `(G + ρI) L = A` with `G = ΨᵀΨ`, `A = ΨᵀB`, `ρ = 1e-10·tr(G)/N`, via the SVD of `Ψ`.
fn ridge_solve(psi: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = psi.ncols();
    let svd = psi.clone().svd(true, true);
    let trace: f64 = svd.singular_values.iter().map(|s| s * s).sum();
    if !(trace > 0.0) || !trace.is_finite() {
        return Err(Error::SingularGram("basis vanishes on every sample".into()));
    }
    let rho = 1e-10 * trace / n as f64;
    let u = svd.u.as_ref().ok_or_else(|| Error::SingularGram("SVD failed".into()))?;
    let vt = svd.v_t.as_ref().ok_or_else(|| Error::SingularGram("SVD failed".into()))?;
    let k = svd.singular_values.len();
    let mut utb = u.transpose() * b;
    for i in 0..k {
        let s = svd.singular_values[i];
        let f = s / (s * s + rho);
        utb.row_mut(i).scale_mut(f);
    }
    let l = vt.transpose() * utb;
    if l.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularGram("ridge solve produced non-finite entries".into()));
    }
    Ok(l)
}

/// Eigenvalue `λ` and right eigenvector `v` of `L_N`, so `φ̂ = vᵀΨ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    pub lambda: Complex64,
    pub v: Vec<Complex64>,
}

fn spectrum(m: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Eigen("Schur iteration did not converge".into()))?;
    let ev: Vec<Complex64> = schur.complex_eigenvalues().iter().copied().collect();
    if ev.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Eigen("non-finite eigenvalue".into()));
    }
    Ok(ev)
}

fn sort_spectrum(ev: &mut [Complex64]) {
    ev.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
}

/// Spectrum of a real matrix, ordered by decreasing real part.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    let mut ev = spectrum(m)?;
    sort_spectrum(&mut ev);
    Ok(ev)
}

fn eigenvector(l: &DMatrix<f64>, lambda: Complex64) -> Result<Vec<Complex64>> {
    let n = l.nrows();
    let norm = l.norm();
    let lc: DMatrix<Complex64> = l.map(|v| Complex64::new(v, 0.0));
    let bump = 1e-13 * norm.max(1e-300);
    let shift = if lambda.im == 0.0 {
        lambda + Complex64::new(bump, 0.0)
    } else {
        lambda + Complex64::new(bump, bump)
    };
    let a = &lc - DMatrix::from_diagonal_element(n, n, shift);
    let lu = a.lu();
    let mut x = DVector::from_fn(n, |i, _| Complex64::new(1.0 + 0.37 * i as f64 / n as f64, 0.0));
    for _ in 0..4 {
        x = lu
            .solve(&x)
            .ok_or_else(|| Error::Eigen(format!("singular shift at λ = {lambda}")))?;
        let s = x.norm();
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::Eigen(format!("inverse iteration broke down at λ = {lambda}")));
        }
        x.unscale_mut(s);
    }
    let k = (0..n)
        .max_by(|&i, &j| x[i].norm().total_cmp(&x[j].norm()))
        .unwrap_or(0);
    let pivot = x[k];
    let mut v: Vec<Complex64> = x.iter().map(|z| z / pivot).collect();
    v[k] = Complex64::new(1.0, 0.0);
    if lambda.im == 0.0 {
        for z in &mut v {
            z.im = 0.0;
        }
    }
    let vv = DVector::from_vec(v.clone());
    let resid = (&lc * &vv - vv.scale(1.0) * lambda).norm();
    if resid > 1e-8 * norm * vv.norm() {
        return Err(Error::Eigen(format!(
            "eigenvector residual {resid:.3e} exceeds tolerance at λ = {lambda}"
        )));
    }
    Ok(v)
}

/// Matches each Jacobian eigenvalue to its nearest unused generator eigenvalue.
/// `rel_tol` scales the warning threshold `rel_tol·|μ|`.
pub fn principal_eigenpairs(gen: &GeneratorMatrix, jac: &DMatrix<f64>, rel_tol: f64) -> Result<Vec<EigenPair>> {
    let mu = eigenvalues(jac)?;
    let max_re = mu.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    if max_re >= 0.0 {
        return Err(Error::NotHurwitz(max_re));
    }
    let spec = spectrum(&gen.matrix)?;
    if spec.len() < mu.len() {
        return Err(Error::Eigen(format!(
            "generator has {} eigenvalues, need {}",
            spec.len(),
            mu.len()
        )));
    }
    let mut used = vec![false; spec.len()];
    let mut matched = Vec::with_capacity(mu.len());
    for m in &mu {
        let (k, dist) = spec
            .iter()
            .enumerate()
            .filter(|(k, _)| !used[*k])
            .map(|(k, z)| (k, (z - m).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("enough eigenvalues");
        used[k] = true;
        if dist > rel_tol * m.norm() {
            warn!("generator eigenvalue {} is {dist:.3e} away from Jacobian eigenvalue {m}", spec[k]);
        }
        matched.push(spec[k]);
    }
    let mut out: Vec<EigenPair> = Vec::with_capacity(matched.len());
    for lambda in matched {
        let v = if lambda.im < 0.0 {
            if let Some(p) = out.iter().find(|p| p.lambda == lambda.conj()) {
                p.v.iter().map(|z| z.conj()).collect()
            } else {
                eigenvector(&gen.matrix, lambda.conj())?.into_iter().map(|z| z.conj()).collect()
            }
        } else {
            eigenvector(&gen.matrix, lambda)?
        };
        out.push(EigenPair { lambda, v });
    }
    Ok(out)
}

/// One weighted term `α |vᵀΨ(x) − vᵀΨ(0)|²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulusTerm {
    pub alpha: f64,
    pub coeffs: Vec<Complex64>,
    pub offset: Complex64,
}

/// Lyapunov candidate `V(x) = Σ αᵢ |φ̂ᵢ(x)|²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum LyapunovCandidate {
    Polynomial { v: SparsePoly },
    SquaredModulus { basis: Basis, terms: Vec<ModulusTerm> },
}

impl LyapunovCandidate {
    pub fn from_poly(v: SparsePoly) -> Self {
        LyapunovCandidate::Polynomial { v }
    }

    pub fn dim(&self) -> usize {
        match self {
            LyapunovCandidate::Polynomial { v } => v.dim(),
            LyapunovCandidate::SquaredModulus { basis, .. } => basis.dim(),
        }
    }

    pub fn as_poly(&self) -> Option<&SparsePoly> {
        match self {
            LyapunovCandidate::Polynomial { v } => Some(v),
            LyapunovCandidate::SquaredModulus { .. } => None,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            LyapunovCandidate::Polynomial { v } => v.eval(x),
            LyapunovCandidate::SquaredModulus { basis, terms } => {
                let psi = basis.eval(x);
                terms
                    .iter()
                    .map(|t| t.alpha * (combine(&t.coeffs, &psi) - t.offset).norm_sqr())
                    .sum()
            }
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            LyapunovCandidate::Polynomial { v } => v.gradient().iter().map(|g| g.eval(x)).collect(),
            LyapunovCandidate::SquaredModulus { basis, terms } => {
                let psi = basis.eval(x);
                let grads = basis.gradients(x);
                let n = x.len();
                let mut g = vec![0.0; n];
                for t in terms {
                    let phi = combine(&t.coeffs, &psi) - t.offset;
                    for k in 0..n {
                        let dphi: Complex64 = t.coeffs.iter().zip(&grads).map(|(c, gr)| c * gr[k]).sum();
                        g[k] += 2.0 * t.alpha * (phi.conj() * dphi).re;
                    }
                }
                g
            }
        }
    }
}

fn combine(coeffs: &[Complex64], psi: &[f64]) -> Complex64 {
    coeffs.iter().zip(psi).map(|(c, p)| c * p).sum()
}

/// `V = Σ αᵢ |φ̂ᵢ − φ̂ᵢ(0)|²`, keeping one member of each conjugate pair with the pair's weights summed.
pub fn assemble_candidate(pairs: &[EigenPair], alphas: &[f64], basis: &Basis) -> Result<LyapunovCandidate> {
    if pairs.len() != alphas.len() {
        return Err(Error::DimensionMismatch { expected: pairs.len(), got: alphas.len() });
    }
    if let Some(a) = alphas.iter().find(|a| !(**a > 0.0)) {
        return Err(Error::InvalidArgument(format!("weights must be positive, got {a}")));
    }
    let nb = basis.size();
    if let Some(p) = pairs.iter().find(|p| p.v.len() != nb) {
        return Err(Error::DimensionMismatch { expected: nb, got: p.v.len() });
    }
    let mut kept: Vec<(f64, Vec<Complex64>)> = Vec::new();
    let mut absorbed = vec![false; pairs.len()];
    for i in 0..pairs.len() {
        if absorbed[i] {
            continue;
        }
        let mut alpha = alphas[i];
        if pairs[i].lambda.im != 0.0 {
            let partner = (0..pairs.len()).find(|&j| {
                j != i && !absorbed[j] && pairs[j].lambda == pairs[i].lambda.conj()
            });
            if let Some(j) = partner {
                absorbed[j] = true;
                alpha += alphas[j];
            }
        }
        absorbed[i] = true;
        kept.push((alpha, pairs[i].v.clone()));
    }
    let zero = vec![0.0; basis.dim()];
    match basis {
        Basis::Monomial { dim, exponents } => {
            let mut v = SparsePoly::zero(*dim);
            for (alpha, coeffs) in &kept {
                let re = SparsePoly::from_terms(
                    *dim,
                    exponents
                        .iter()
                        .zip(coeffs)
                        .filter(|(e, _)| e.degree() > 0)
                        .map(|(e, c)| (e.clone(), c.re)),
                );
                let im = SparsePoly::from_terms(
                    *dim,
                    exponents
                        .iter()
                        .zip(coeffs)
                        .filter(|(e, _)| e.degree() > 0)
                        .map(|(e, c)| (e.clone(), c.im)),
                );
                let sq = &(&re * &re) + &(&im * &im);
                v = &v + &sq.scale(*alpha);
            }
            Ok(LyapunovCandidate::Polynomial { v })
        }
        Basis::GaussianRbf { .. } => {
            let psi0 = basis.eval(&zero);
            Ok(LyapunovCandidate::SquaredModulus {
                basis: basis.clone(),
                terms: kept
                    .into_iter()
                    .map(|(alpha, coeffs)| {
                        let offset = combine(&coeffs, &psi0);
                        ModulusTerm { alpha, coeffs, offset }
                    })
                    .collect(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::builtin_system;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn linear_field(a: &[[f64; 2]; 2]) -> VectorField {
        let comps = (0..2)
            .map(|i| SparsePoly::from_terms(2, (0..2).map(|k| (MultiIndex::unit(2, k), a[i][k]))))
            .collect();
        VectorField::polynomial(comps, Domain::unit(2)).unwrap()
    }

    fn x_of(i: usize) -> SparsePoly {
        SparsePoly::var(2, i)
    }

    #[test]
    fn generator_action_examples() {
        let f = builtin_system("example1").unwrap();
        let b = Basis::monomial(2, 1);
        assert!(apply_generator(&f, &b, 0).unwrap().as_poly().unwrap().is_zero());
        assert_eq!(apply_generator(&f, &b, 1).unwrap().as_poly().unwrap(), &x_of(1));
        let want = &(&x_of(0).pow(3).scale(1.0 / 3.0) - &x_of(0).scale(2.0)) - &x_of(1);
        let got = apply_generator(&f, &b, 2).unwrap();
        assert!((got.as_poly().unwrap() - &want).is_zero());
    }

    #[test]
    fn pointwise_generator_matches_polynomial() {
        let f = builtin_system("example1").unwrap();
        let b = Basis::monomial(2, 3);
        for i in 0..b.size() {
            let g = apply_generator(&f, &b, i).unwrap();
            let pw = Generated::Pointwise { field: &f, basis: &b, index: i };
            for x in [[0.3, -0.4], [1.5, 2.0]] {
                assert_abs_diff_eq!(g.eval(&x), pw.eval(&x), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn rbf_gradient_is_analytic() {
        let b = Basis::gaussian_rbf(vec![vec![0.2, -0.1], vec![-0.5, 0.4]], 1.3).unwrap();
        let x = [0.1, 0.3];
        let g = b.gradients(&x);
        for k in 0..2 {
            let h = 1e-6;
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let (p, m) = (b.eval(&xp), b.eval(&xm));
            for i in 0..2 {
                assert_abs_diff_eq!(g[i][k], (p[i] - m[i]) / (2.0 * h), epsilon = 1e-9);
            }
        }
        assert!(Basis::gaussian_rbf(vec![vec![0.0], vec![0.0]], 1.0).is_err());
        assert!(Basis::gaussian_rbf(vec![vec![0.0]], 0.0).is_err());
    }

    #[test]
    fn truncation_linear_block_is_transpose() {
        let a = [[-1.0, 2.0], [0.5, -3.0]];
        let f = linear_field(&a);
        let b = Basis::monomial_from(2, vec![MultiIndex::unit(2, 0), MultiIndex::unit(2, 1)]).unwrap();
        let g = build_generator_truncation(&f, &b).unwrap();
        assert_eq!(g.matrix, DMatrix::from_row_slice(2, 2, &[-1.0, 0.5, 2.0, -3.0]));
        let g = build_generator_truncation(&f, &Basis::monomial(2, 2)).unwrap();
        assert!(g.matrix.column(0).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn truncation_keeps_low_degree_images() {
        let f = builtin_system("example1").unwrap();
        let b = Basis::monomial(2, 3);
        let g = build_generator_truncation(&f, &b).unwrap();
        let Basis::Monomial { exponents, .. } = &b else { unreachable!() };
        let col = g.matrix.column(2);
        let recon = SparsePoly::from_terms(2, exponents.iter().cloned().zip(col.iter().copied()));
        let want = &(&x_of(0).pow(3).scale(1.0 / 3.0) - &x_of(0).scale(2.0)) - &x_of(1);
        assert!((&recon - &want).is_zero());
        for i in 0..b.size() {
            let full = apply_generator(&f, &b, i).unwrap().as_poly().unwrap().truncate(3);
            let col = SparsePoly::from_terms(2, exponents.iter().cloned().zip(g.matrix.column(i).iter().copied()));
            assert!((&full - &col).is_zero());
        }
    }

    #[test]
    fn truncation_rejects_bad_inputs() {
        let f = builtin_system("example2").unwrap();
        assert!(matches!(build_generator_truncation(&f, &Basis::monomial(2, 2)), Err(Error::NonPolynomial(0))));
        let f = builtin_system("example1").unwrap();
        let rb = Basis::gaussian_rbf(vec![vec![0.0, 0.0]], 1.0).unwrap();
        assert!(build_generator_truncation(&f, &rb).is_err());
    }

    #[test]
    fn l2_projection_recovers_linear_field() {
        let a = [[-1.0, 2.0], [0.5, -3.0]];
        let f = linear_field(&a);
        let b = Basis::monomial(2, 1);
        let t = build_generator_truncation(&f, &b).unwrap();
        let l = build_generator_l2(&f, &b, &Domain::symmetric(2, 0.1), 100_000, 7).unwrap();
        assert!((&t.matrix - &l.matrix).abs().max() < 1e-6);
        let c = Basis::monomial(2, 0);
        let l = build_generator_l2(&f, &c, &Domain::symmetric(2, 0.1), 5000, 1).unwrap();
        assert_eq!(l.matrix.shape(), (1, 1));
        assert_abs_diff_eq!(l.matrix[(0, 0)], 0.0);
        assert!(build_generator_l2(&f, &b, &Domain::symmetric(2, 0.1), 10, 1).is_err());
    }

    #[test]
    fn l2_rbf_spectrum_on_example2() {
        let f = builtin_system("example2").unwrap();
        let (g, _) = f.rescale_to_unit_box().unwrap();
        let centers: Vec<Vec<f64>> = [-1.0, 0.0, 1.0]
            .iter()
            .flat_map(|a| [-1.0, 0.0, 1.0].iter().map(move |b| vec![*a, *b]))
            .collect();
        let basis = Basis::gaussian_rbf(centers, 0.1).unwrap();
        let gen = build_generator_l2(&g, &basis, &Domain::symmetric(2, 0.1), 5000, 3).unwrap();
        let j = g.jacobian_at_origin().unwrap();
        let pairs = principal_eigenpairs(&gen, &j, 0.1).unwrap();
        let mut got: Vec<f64> = pairs.iter().map(|p| p.lambda.re).collect();
        got.sort_by(f64::total_cmp);
        assert!((got[0] + 1.0).abs() < 0.05, "{got:?}");
        assert!((got[1] + 0.6).abs() < 0.05, "{got:?}");
    }

    #[test]
    fn principal_pairs_contain_jacobian_spectrum() {
        let f = builtin_system("example1").unwrap();
        let (g, _) = f.rescale_to_unit_box().unwrap();
        let basis = Basis::monomial(2, 3);
        let gen = build_generator_truncation(&g, &basis).unwrap();
        let j = g.jacobian_at_origin().unwrap();
        let mu = eigenvalues(&j).unwrap();
        let pairs = principal_eigenpairs(&gen, &j, 0.1).unwrap();
        assert_eq!(pairs.len(), 2);
        for (p, m) in pairs.iter().zip(&mu) {
            assert!((p.lambda - m).norm() < 1e-8);
        }
        assert_eq!(pairs[0].lambda, pairs[1].lambda.conj());
        let lc = gen.matrix.map(|v| Complex64::new(v, 0.0));
        for p in &pairs {
            let v = DVector::from_vec(p.v.clone());
            let r = (&lc * &v - &v * p.lambda).norm();
            assert!(r <= 1e-8 * gen.matrix.norm() * v.norm());
            let big = p.v.iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert_abs_diff_eq!(big, 1.0, epsilon = 1e-14);
            assert!(p.v.iter().any(|z| *z == Complex64::new(1.0, 0.0)));
        }
    }

    #[test]
    fn linear_eigenvectors_live_on_linear_monomials() {
        let f = linear_field(&[[-1.0, 0.3], [0.0, -2.5]]);
        let basis = Basis::monomial(2, 3);
        let gen = build_generator_truncation(&f, &basis).unwrap();
        let pairs = principal_eigenpairs(&gen, &f.jacobian_at_origin().unwrap(), 0.1).unwrap();
        let Basis::Monomial { exponents, .. } = &basis else { unreachable!() };
        for p in &pairs {
            for (e, c) in exponents.iter().zip(&p.v) {
                if e.degree() != 1 {
                    assert!(c.norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn non_hurwitz_rejected() {
        let f = linear_field(&[[0.5, 0.0], [0.0, -1.0]]);
        let gen = build_generator_truncation(&f, &Basis::monomial(2, 1)).unwrap();
        assert!(matches!(
            principal_eigenpairs(&gen, &f.jacobian_at_origin().unwrap(), 0.1),
            Err(Error::NotHurwitz(_))
        ));
    }

    #[test]
    fn assemble_simple_candidates() {
        let basis = Basis::monomial(2, 1);
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let real = EigenPair {
            lambda: Complex64::new(-1.0, 0.0),
            v: vec![zero, one, zero],
        };
        let v = assemble_candidate(&[real], &[1.0], &basis).unwrap();
        assert_eq!(v.as_poly().unwrap(), &x_of(0).pow(2));
        let cplx = EigenPair {
            lambda: Complex64::new(-1.0, 2.0),
            v: vec![zero, one, Complex64::new(0.0, 1.0)],
        };
        let v = assemble_candidate(&[cplx.clone()], &[1.0], &basis).unwrap();
        assert_eq!(v.as_poly().unwrap(), &(&x_of(0).pow(2) + &x_of(1).pow(2)));
        let conj = EigenPair {
            lambda: cplx.lambda.conj(),
            v: cplx.v.iter().map(|z| z.conj()).collect(),
        };
        let both = assemble_candidate(&[cplx, conj], &[1.0, 1.0], &basis).unwrap();
        assert_eq!(both.as_poly().unwrap(), &(&x_of(0).pow(2) + &x_of(1).pow(2)).scale(2.0));
        assert!(assemble_candidate(&[], &[1.0], &basis).is_err());
    }

    #[test]
    fn example1_candidate_properties() {
        let f = builtin_system("example1").unwrap();
        let (g, _) = f.rescale_to_unit_box().unwrap();
        let basis = Basis::monomial(2, 3);
        let gen = build_generator_truncation(&g, &basis).unwrap();
        let pairs = principal_eigenpairs(&gen, &g.jacobian_at_origin().unwrap(), 0.1).unwrap();
        let cand = assemble_candidate(&pairs, &[1.0, 1.0], &basis).unwrap();
        let v = cand.as_poly().unwrap();
        assert_eq!(v.degree(), 6);
        assert!(v.eval(&[0.0, 0.0]).abs() <= 1e-10);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let grad = v.gradient();
        let fp = g.polynomial_components().unwrap();
        for _ in 0..10_000 {
            let x = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            assert!(v.eval(&x) >= 0.0);
        }
        for _ in 0..100 {
            let x = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let gr = cand.gradient(&x);
            for k in 0..2 {
                let h = 1e-5;
                let mut xp = x;
                let mut xm = x;
                xp[k] += h;
                xm[k] -= h;
                let fd = (v.eval(&xp) - v.eval(&xm)) / (2.0 * h);
                assert!((gr[k] - fd).abs() <= 1e-6 * (1.0 + gr[k].abs()));
            }
        }
        for _ in 0..1000 {
            let r = 0.01 * rng.random_range(0.05..1.0f64);
            let t = rng.random_range(0.0..std::f64::consts::TAU);
            let x = [r * t.cos(), r * t.sin()];
            let vdot: f64 = (0..2).map(|k| grad[k].eval(&x) * fp[k].eval(&x)).sum();
            assert!(vdot < 0.0);
        }
    }

    #[test]
    fn rbf_candidate_is_centered() {
        let f = builtin_system("example2").unwrap();
        let (g, _) = f.rescale_to_unit_box().unwrap();
        let centers: Vec<Vec<f64>> = (0..9).map(|i| vec![-1.0 + 0.25 * i as f64, 0.8 - 0.2 * i as f64]).collect();
        let basis = Basis::gaussian_rbf(centers, 2.0).unwrap();
        let gen = build_generator_l2(&g, &basis, &Domain::symmetric(2, 0.1), 5000, 5).unwrap();
        let pairs = principal_eigenpairs(&gen, &g.jacobian_at_origin().unwrap(), 0.1).unwrap();
        let cand = assemble_candidate(&pairs, &[1.0, 1.0], &basis).unwrap();
        assert!(cand.eval(&[0.0, 0.0]) <= 1e-10);
        let x = [0.3, -0.2];
        let gr = cand.gradient(&x);
        for k in 0..2 {
            let h = 1e-6;
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let fd = (cand.eval(&xp) - cand.eval(&xm)) / (2.0 * h);
            assert!((gr[k] - fd).abs() <= 1e-6 * (1.0 + gr[k].abs()));
        }
    }

    #[test]
    fn generator_json_roundtrip() {
        let f = builtin_system("example1").unwrap();
        let gen = build_generator_truncation(&f, &Basis::monomial(2, 2)).unwrap();
        let s = serde_json::to_string(&gen).unwrap();
        let back: GeneratorMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, gen);
        let pairs = principal_eigenpairs(&gen, &f.jacobian_at_origin().unwrap(), 0.1).unwrap();
        let s = serde_json::to_string(&pairs).unwrap();
        let back: Vec<EigenPair> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, pairs);
    }
}
