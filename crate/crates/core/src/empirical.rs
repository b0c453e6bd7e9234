//! Sampled-basin metrics `r₁`, `r₂` for replicator dynamics and the linearised quadratic baseline.

use std::path::Path;

use log::{info, warn};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{replicator_polys, Domain, VectorField};
use crate::error::{Error, Result};
use crate::koopman::{
    assemble_candidate, build_generator_l2_on, eigenvalues, principal_eigenpairs, Basis, LyapunovCandidate, Projection,
};
use crate::poly::{MultiIndex, SparsePoly};

/// `ẋᵢ = xᵢ((Ax)ᵢ − xᵀAx)` on the simplex, with a strict Nash equilibrium at the last vertex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Replicator {
    a: Vec<Vec<f64>>,
}

impl Replicator {
    pub fn new(a: Vec<Vec<f64>>) -> Result<Self> {
        let n = a.len();
        if n < 2 || a.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument("replicator payoff matrix must be n×n with n ≥ 2".into()));
        }
        if a.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("payoff matrix".into()));
        }
        let last = a[n - 1][n - 1];
        if let Some(i) = (0..n - 1).find(|&i| a[i][n - 1] >= last) {
            return Err(Error::InvalidArgument(format!(
                "last vertex is not a strict Nash equilibrium (a[{i}][{k}] ≥ a[{k}][{k}])",
                k = n - 1
            )));
        }
        Ok(Replicator { a })
    }

    /// Entries uniform on `[−1, 1]`, then `a_nn = max_{i<n} a_in + margin`.
    pub fn random(n: usize, seed: u64, margin: f64) -> Result<Self> {
        if !(margin > 0.0) {
            return Err(Error::InvalidArgument(format!("margin must be positive, got {margin}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        if n >= 2 {
            let top = (0..n - 1).map(|i| a[i][n - 1]).fold(f64::NEG_INFINITY, f64::max);
            a[n - 1][n - 1] = top + margin;
        }
        Replicator::new(a)
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn payoff(&self) -> &[Vec<f64>] {
        &self.a
    }

    pub fn rhs(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n();
        let mut xax = 0.0;
        for i in 0..n {
            let ax: f64 = self.a[i].iter().zip(x).map(|(a, v)| a * v).sum();
            out[i] = ax;
            xax += x[i] * ax;
        }
        for i in 0..n {
            out[i] = x[i] * (out[i] - xax);
        }
    }

    /// Full simplex point from reduced coordinates `y = (x₁, …, x_{n−1})`.
    pub fn lift(&self, y: &[f64]) -> Vec<f64> {
        let mut x = y.to_vec();
        x.push(1.0 - y.iter().sum::<f64>());
        x
    }

    pub fn reduce(&self, x: &[f64]) -> Vec<f64> {
        x[..x.len() - 1].to_vec()
    }

    pub fn reduced_rhs(&self, y: &[f64]) -> Vec<f64> {
        let x = self.lift(y);
        let mut out = vec![0.0; x.len()];
        self.rhs(&x, &mut out);
        out.truncate(y.len());
        out
    }

    /// The dynamics in reduced coordinates, equilibrium at the origin, on `[0,1]^{n−1}`.
    pub fn reduced_field(&self) -> Result<VectorField> {
        let d = self.n() - 1;
        let mut xs: Vec<SparsePoly> = (0..d).map(|j| SparsePoly::var(d, j)).collect();
        let rest = xs.iter().fold(SparsePoly::constant(d, 1.0), |acc, y| &acc - y);
        xs.push(rest);
        let mut comps = replicator_polys(&self.a, &xs);
        comps.truncate(d);
        VectorField::polynomial(comps, Domain::new(vec![0.0; d], vec![1.0; d])?)
    }

    /// `diag(a_in − a_nn)`.
    pub fn reduced_jacobian(&self) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n - 1, n - 1, |i, j| if i == j { self.a[i][n - 1] - self.a[n - 1][n - 1] } else { 0.0 })
    }

    fn vertex_distance(&self, x: &[f64]) -> f64 {
        let n = x.len();
        x.iter()
            .enumerate()
            .map(|(i, v)| if i + 1 == n { (v - 1.0).powi(2) } else { v * v })
            .sum::<f64>()
            .sqrt()
    }

    /// RK4 run from `x0`; true once within `tol` of the vertex before the horizon.
    pub fn converges(&self, x0: &[f64], settings: &BasinSettings) -> bool {
        let n = self.n();
        let h = settings.step;
        let steps = (settings.horizon / h).round() as usize;
        let mut x = x0.to_vec();
        let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let mut tmp = vec![0.0; n];
        for _ in 0..steps {
            if self.vertex_distance(&x) < settings.tol {
                return true;
            }
            self.rhs(&x, &mut k1);
            if k1.iter().all(|v| v.abs() < settings.stationary) {
                return false;
            }
            for i in 0..n {
                tmp[i] = x[i] + 0.5 * h * k1[i];
            }
            self.rhs(&tmp, &mut k2);
            for i in 0..n {
                tmp[i] = x[i] + 0.5 * h * k2[i];
            }
            self.rhs(&tmp, &mut k3);
            for i in 0..n {
                tmp[i] = x[i] + h * k3[i];
            }
            self.rhs(&tmp, &mut k4);
            for i in 0..n {
                x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            if x.iter().any(|v| !v.is_finite()) {
                return false;
            }
        }
        self.vertex_distance(&x) < settings.tol
    }
}

/// Classification and rejection parameters for [`sample_basin`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BasinSettings {
    pub horizon: f64,
    pub step: f64,
    /// Converged once this close to the vertex.
    pub tol: f64,
    /// Abort when the acceptance rate falls below this.
    pub min_rate: f64,
    /// A trajectory whose velocity is below this everywhere sits at another equilibrium.
    pub stationary: f64,
    pub batch: usize,
}

impl Default for BasinSettings {
    fn default() -> Self {
        BasinSettings { horizon: 200.0, step: 1e-2, tol: 1e-3, min_rate: 1e-3, stationary: 1e-12, batch: 512 }
    }
}

/// `W`: simplex points whose trajectories reach the vertex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub points: Vec<Vec<f64>>,
    pub seed: u64,
    pub tried: usize,
}

impl SampleSet {
    pub fn k(&self) -> usize {
        self.points.len()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.tried == 0 {
            return 1.0;
        }
        self.points.len() as f64 / self.tried as f64
    }

    /// Points in reduced coordinates.
    pub fn reduced(&self) -> Vec<Vec<f64>> {
        self.points.iter().map(|x| x[..x.len() - 1].to_vec()).collect()
    }
}

/// Uniform draw on the simplex `{x ≥ 0, Σx = 1}` in `n` coordinates.
pub fn uniform_simplex<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Rejection sampling of `k` convergent initial conditions; draw `i` uses stream `i` of `seed`.
pub fn sample_basin(rep: &Replicator, k: usize, seed: u64, settings: &BasinSettings) -> Result<SampleSet> {
    let n = rep.n();
    let mut points = Vec::with_capacity(k);
    let mut tried = 0usize;
    let floor = (1.0 / settings.min_rate).ceil() as usize;
    while points.len() < k {
        let batch: Vec<Option<Vec<f64>>> = (tried..tried + settings.batch.max(1))
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                let x = uniform_simplex(n, &mut rng);
                rep.converges(&x, settings).then_some(x)
            })
            .collect();
        for x in batch {
            tried += 1;
            if let Some(x) = x {
                points.push(x);
                if points.len() == k {
                    break;
                }
            }
        }
        let rate = points.len() as f64 / tried as f64;
        if tried >= floor && rate < settings.min_rate {
            warn!("basin sampling for n = {n}: {} accepted of {tried}", points.len());
            return Err(Error::BasinTooSmall { rate, tried });
        }
    }
    info!("basin sampling for n = {n}: {k} accepted of {tried}");
    Ok(SampleSet { points, seed, tried })
}

/// `V(qᵢ)` and `V̇(qᵢ) = ∇V(qᵢ)·F(qᵢ)`.
pub fn evaluate<F>(v: &LyapunovCandidate, f: F, w: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>)
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    w.par_iter()
        .map(|q| {
            let g = v.gradient(q);
            (v.eval(q), g.iter().zip(f(q)).map(|(a, b)| a * b).sum::<f64>())
        })
        .unzip()
}

/// `#{V̇ < 0} / K`; zero on an empty set.
pub fn r1_from_derivatives(vdot: &[f64]) -> f64 {
    if vdot.is_empty() {
        return 0.0;
    }
    vdot.iter().filter(|d| **d < 0.0).count() as f64 / vdot.len() as f64
}

pub fn metric_r1<F>(v: &LyapunovCandidate, f: F, w: &[Vec<f64>]) -> f64
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    r1_from_derivatives(&evaluate(v, f, w).1)
}

/// Best window `[γ₁, γ₂]` in which every sample has `V̇ < 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct R2 {
    pub ratio: f64,
    pub window: Option<(f64, f64)>,
}

/// Sorted scan over groups of equal `V`; a group is usable only if all its members decrease.
pub fn r2_from_values(v: &[f64], vdot: &[f64]) -> R2 {
    let k = v.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    let (mut best, mut window) = (0usize, None);
    let (mut run, mut start) = (0usize, 0usize);
    let mut g = 0;
    while g < k {
        let mut e = g;
        let mut good = true;
        while e < k && v[order[e]] == v[order[g]] {
            good &= vdot[order[e]] < 0.0;
            e += 1;
        }
        if good {
            if run == 0 {
                start = g;
            }
            run += e - g;
            if run > best {
                best = run;
                window = Some((v[order[start]], v[order[e - 1]]));
            }
        } else {
            run = 0;
        }
        g = e;
    }
    R2 { ratio: if k == 0 { 0.0 } else { best as f64 / k as f64 }, window }
}

/// Exhaustive enumeration over all sample-defined windows.
pub fn r2_brute_force(v: &[f64], vdot: &[f64]) -> R2 {
    let k = v.len();
    let (mut best, mut window) = (0usize, None);
    for &g1 in v {
        for &g2 in v {
            if g2 < g1 {
                continue;
            }
            let inside: Vec<usize> = (0..k).filter(|&i| g1 <= v[i] && v[i] <= g2).collect();
            if inside.iter().all(|&i| vdot[i] < 0.0) && inside.len() > best {
                best = inside.len();
                window = Some((g1, g2));
            }
        }
    }
    R2 { ratio: if k == 0 { 0.0 } else { best as f64 / k as f64 }, window }
}

pub fn metric_r2<F>(v: &LyapunovCandidate, f: F, w: &[Vec<f64>]) -> R2
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    let (vals, dots) = evaluate(v, f, w);
    r2_from_values(&vals, &dots)
}

/// `P` with `JᵀP + PJ + I = 0`, by a Kronecker-product solve.
pub fn lyapunov_matrix(j: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = j.nrows();
    if j.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: j.ncols() });
    }
    let max_re = eigenvalues(j)?.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    if max_re >= 0.0 {
        return Err(Error::NotHurwitz(max_re));
    }
    let id = DMatrix::<f64>::identity(n, n);
    let jt = j.transpose();
    let k = id.kronecker(&jt) + jt.kronecker(&id);
    let rhs = -DMatrix::<f64>::identity(n, n).reshape_generic(nalgebra::Dyn(n * n), nalgebra::Dyn(1));
    let sol = k.lu().solve(&rhs).ok_or(Error::NotHurwitz(max_re))?;
    let p = DMatrix::from_column_slice(n, n, sol.as_slice());
    Ok((&p + p.transpose()) * 0.5)
}

/// `V(x) = xᵀPx` for the linearisation `J`.
pub fn quadratic_baseline(j: &DMatrix<f64>) -> Result<LyapunovCandidate> {
    let p = lyapunov_matrix(j)?;
    let n = p.nrows();
    let mut terms = Vec::new();
    for r in 0..n {
        for c in r..n {
            let coef = if r == c { p[(r, c)] } else { 2.0 * p[(r, c)] };
            terms.push((MultiIndex::unit(n, r).plus(&MultiIndex::unit(n, c)), coef));
        }
    }
    Ok(LyapunovCandidate::from_poly(SparsePoly::from_terms(n, terms)))
}

/// Parameter ranges for the random RBF candidates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSettings {
    pub basis_size: usize,
    pub eta: (f64, f64),
    pub a: (f64, f64),
    pub projection_samples: usize,
    pub eigen_tol: f64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings { basis_size: 20, eta: (0.01, 3.0), a: (0.1, 1.0), projection_samples: 5000, eigen_tol: 1e-3 }
    }
}

/// One line of the metrics table; baseline rows leave `trial`, `eta` and `a` empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub n: usize,
    pub trial: Option<usize>,
    pub eta: Option<f64>,
    pub a: Option<f64>,
    pub r1: f64,
    pub r2: f64,
    pub gamma1: Option<f64>,
    pub gamma2: Option<f64>,
    pub seed: u64,
}

impl MetricRow {
    pub fn is_baseline(&self) -> bool {
        self.trial.is_none()
    }
}

/// Uniform draw on `{y ≥ 0, Σy ≤ a}` in `d` coordinates.
fn corner_simplex<R: Rng + ?Sized>(d: usize, a: f64, rng: &mut R) -> Vec<f64> {
    let mut x = uniform_simplex(d + 1, rng);
    x.truncate(d);
    x.iter_mut().for_each(|v| *v *= a);
    x
}

fn rbf_trial(rep: &Replicator, w: &[Vec<f64>], settings: &SweepSettings, rng: &mut ChaCha8Rng) -> Result<(f64, f64, R2, f64)> {
    let d = rep.n() - 1;
    let eta = rng.random_range(settings.eta.0..=settings.eta.1);
    let a = rng.random_range(settings.a.0..=settings.a.1);
    let centers: Vec<Vec<f64>> = (0..settings.basis_size).map(|_| corner_simplex(d, a, rng)).collect();
    let basis = Basis::gaussian_rbf(centers, eta)?;
    let samples: Vec<Vec<f64>> = (0..settings.projection_samples).map(|_| corner_simplex(d, a, rng)).collect();
    let values: Vec<Vec<f64>> = samples.iter().map(|y| rep.reduced_rhs(y)).collect();
    let projection = Projection::L2 {
        domain: Domain::new(vec![0.0; d], vec![a; d])?,
        samples: samples.len(),
        seed: 0,
    };
    let gen = build_generator_l2_on(&basis, &samples, &values, projection)?;
    let pairs = principal_eigenpairs(&gen, &rep.reduced_jacobian(), settings.eigen_tol)?;
    let v = assemble_candidate(&pairs, &vec![1.0; pairs.len()], &basis)?;
    let (vals, dots) = evaluate(&v, |y| rep.reduced_rhs(y), w);
    Ok((eta, a, r2_from_values(&vals, &dots), r1_from_derivatives(&dots)))
}

/// Random 20-RBF candidates; trial `t` draws from stream `t` of `seed`. Failed trials are skipped.
pub fn sweep_rbf_candidates(
    rep: &Replicator,
    samples: &SampleSet,
    trials: usize,
    seed: u64,
    settings: &SweepSettings,
) -> Vec<MetricRow> {
    let w = samples.reduced();
    (0..trials)
        .into_par_iter()
        .filter_map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            match rbf_trial(rep, &w, settings, &mut rng) {
                Ok((eta, a, r2, r1)) => Some(MetricRow {
                    n: rep.n(),
                    trial: Some(t),
                    eta: Some(eta),
                    a: Some(a),
                    r1,
                    r2: r2.ratio,
                    gamma1: r2.window.map(|w| w.0),
                    gamma2: r2.window.map(|w| w.1),
                    seed,
                }),
                Err(e) => {
                    warn!("n = {}, trial {t} skipped: {e}", rep.n());
                    None
                }
            }
        })
        .collect()
}

/// Metrics of the quadratic baseline on the reduced linearisation.
pub fn baseline_row(rep: &Replicator, samples: &SampleSet) -> Result<MetricRow> {
    let v = quadratic_baseline(&rep.reduced_jacobian())?;
    let (vals, dots) = evaluate(&v, |y| rep.reduced_rhs(y), &samples.reduced());
    let r2 = r2_from_values(&vals, &dots);
    Ok(MetricRow {
        n: rep.n(),
        trial: None,
        eta: None,
        a: None,
        r1: r1_from_derivatives(&dots),
        r2: r2.ratio,
        gamma1: r2.window.map(|w| w.0),
        gamma2: r2.window.map(|w| w.1),
        seed: samples.seed,
    })
}

/// Min/max of the RBF metrics over trials, per dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub n: usize,
    pub trials: usize,
    pub r1_min: f64,
    pub r1_max: f64,
    pub r2_min: f64,
    pub r2_max: f64,
}

pub fn envelopes(rows: &[MetricRow]) -> Vec<Envelope> {
    let mut dims: Vec<usize> = rows.iter().filter(|r| !r.is_baseline()).map(|r| r.n).collect();
    dims.sort_unstable();
    dims.dedup();
    dims.into_iter()
        .map(|n| {
            let sel: Vec<&MetricRow> = rows.iter().filter(|r| r.n == n && !r.is_baseline()).collect();
            let fold = |f: fn(&MetricRow) -> f64, init: f64, op: fn(f64, f64) -> f64| sel.iter().map(|r| f(r)).fold(init, op);
            Envelope {
                n,
                trials: sel.len(),
                r1_min: fold(|r| r.r1, f64::INFINITY, f64::min),
                r1_max: fold(|r| r.r1, f64::NEG_INFINITY, f64::max),
                r2_min: fold(|r| r.r2, f64::INFINITY, f64::min),
                r2_max: fold(|r| r.r2, f64::NEG_INFINITY, f64::max),
            }
        })
        .collect()
}

pub fn write_metrics_csv(path: &Path, rows: &[MetricRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        w.write_record(["n", "trial", "eta", "a", "r1", "r2", "gamma1", "gamma2", "seed"])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<MetricRow>, _>>()?;
    Ok(rows)
}

fn ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
    let mut r = vec![0.0; x.len()];
    let mut g = 0;
    while g < order.len() {
        let mut e = g;
        while e < order.len() && x[order[e]] == x[order[g]] {
            e += 1;
        }
        let avg = (g + e - 1) as f64 / 2.0 + 1.0;
        for &i in &order[g..e] {
            r[i] = avg;
        }
        g = e;
    }
    r
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&ranks(x), &ranks(y))
}

/// `ρ` and the one-sided permutation p-value `P(ρ* ≤ ρ)`: exact up to 8 points, else 10⁵ seeded shuffles.
pub fn spearman_decreasing_test(x: &[f64], y: &[f64], seed: u64) -> Result<(f64, f64)> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    if x.len() < 3 {
        return Err(Error::InvalidArgument("Spearman test needs at least 3 points".into()));
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let rho = pearson(&rx, &ry);
    let eps = 1e-12;
    let (mut hits, mut total) = (0usize, 0usize);
    if x.len() <= 8 {
        let mut perm = ry.clone();
        permutations(&mut perm, 0, &mut |p| {
            total += 1;
            if pearson(&rx, p) <= rho + eps {
                hits += 1;
            }
        });
    } else {
        use rand::seq::SliceRandom;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut perm = ry.clone();
        for _ in 0..100_000 {
            perm.shuffle(&mut rng);
            total += 1;
            if pearson(&rx, &perm) <= rho + eps {
                hits += 1;
            }
        }
    }
    Ok((rho, hits as f64 / total as f64))
}

fn permutations(v: &mut [f64], k: usize, visit: &mut dyn FnMut(&[f64])) {
    if k == v.len() {
        visit(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permutations(v, k + 1, visit);
        v.swap(k, i);
    }
}

/// Inputs of one empirical study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmpiricalConfig {
    pub dimensions: Vec<usize>,
    pub samples: usize,
    pub trials: usize,
    /// Stabilising margin of the payoff matrix.
    pub margin: f64,
    pub seed: u64,
    pub basin: BasinSettings,
    pub sweep: SweepSettings,
    pub output: crate::config::OutputSpec,
}

impl Default for EmpiricalConfig {
    fn default() -> Self {
        EmpiricalConfig {
            dimensions: vec![4, 6, 8, 10],
            samples: 5000,
            trials: 30,
            margin: 0.5,
            seed: 0,
            basin: BasinSettings::default(),
            sweep: SweepSettings::default(),
            output: crate::config::OutputSpec::default(),
        }
    }
}

impl EmpiricalConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Seeds of the payoff matrix and basin sample for dimension `n`.
pub fn dimension_seeds(seed: u64, n: usize) -> (u64, u64) {
    (seed.wrapping_mul(1000).wrapping_add(n as u64), seed.wrapping_mul(1000).wrapping_add(500 + n as u64))
}

/// Baseline row followed by the RBF trials for each dimension.
pub fn run_study(cfg: &EmpiricalConfig) -> Result<Vec<MetricRow>> {
    let mut rows = Vec::new();
    for &n in &cfg.dimensions {
        let (a_seed, w_seed) = dimension_seeds(cfg.seed, n);
        let rep = Replicator::random(n, a_seed, cfg.margin)?;
        let w = sample_basin(&rep, cfg.samples, w_seed, &cfg.basin)?;
        rows.push(baseline_row(&rep, &w)?);
        rows.extend(sweep_rbf_candidates(&rep, &w, cfg.trials, w_seed, &cfg.sweep));
    }
    Ok(rows)
}
