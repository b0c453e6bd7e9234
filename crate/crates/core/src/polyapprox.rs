//! Polynomial proxies with error models: truncated Taylor series with a
//! remainder constant, and discrete minimax (Remez-type) fits.

use log::{debug, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Component, Domain, VectorField};
use crate::error::{Error, Result};
use crate::lp::{solve_lp_from, LinearProgram, RowKind};
use crate::poly::{norm_power_poly, MultiIndex, PowerTable, SparsePoly};

/// Bound on `|f − P|` over the domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ErrorModel {
    /// `P = f`.
    Exact,
    /// `|f(x) − P(x)| ≤ c‖x‖₂^{s+1}`.
    Taylor { c: f64, s: u32 },
    /// `|f(x) − P(x)| ≤ eps`, with `eps = safety·eps_bar` or the inflated fallback when `converged` is false.
    Minimax { eps: f64, eps_bar: f64, converged: bool },
}

impl ErrorModel {
    pub fn bound_at(&self, x: &[f64]) -> f64 {
        match self {
            ErrorModel::Exact => 0.0,
            ErrorModel::Taylor { c, s } => c * x.iter().map(|v| v * v).sum::<f64>().sqrt().powi(*s as i32 + 1),
            ErrorModel::Minimax { eps, .. } => *eps,
        }
    }

    /// The error bound as a polynomial `εⱼ(x)`.
    pub fn bound_poly(&self, dim: usize) -> Result<SparsePoly> {
        match self {
            ErrorModel::Exact => Ok(SparsePoly::zero(dim)),
            ErrorModel::Taylor { c, s } => Ok(norm_power_poly(dim, *s)?.scale(*c)),
            ErrorModel::Minimax { eps, .. } => Ok(SparsePoly::constant(dim, *eps)),
        }
    }

    pub fn is_exact(&self) -> bool {
        match self {
            ErrorModel::Exact => true,
            ErrorModel::Taylor { c, .. } => *c == 0.0,
            ErrorModel::Minimax { eps, .. } => *eps == 0.0,
        }
    }
}

/// Polynomial `P` with a certified (or empirically validated) error bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyApprox {
    #[serde(flatten)]
    pub p: SparsePoly,
    pub error_model: ErrorModel,
    pub domain: Domain,
}

impl PolyApprox {
    pub fn exact(p: SparsePoly, domain: Domain) -> Self {
        PolyApprox {
            p,
            error_model: ErrorModel::Exact,
            domain,
        }
    }
}

/// Maclaurin polynomial of total order `s` for component `index`.
pub fn taylor_series(f: &VectorField, index: usize, s: u32) -> Result<SparsePoly> {
    if s % 2 == 0 {
        return Err(Error::EvenOrder(s));
    }
    match f.components().get(index) {
        None => Err(Error::InvalidArgument(format!("component {index} out of range"))),
        Some(Component::Poly(p)) => Ok(p.truncate(s)),
        Some(Component::Elementary(e)) => Ok(e.taylor(s)),
        Some(Component::Opaque(_)) => Err(Error::NoSeries(index)),
    }
}

/// Taylor model with a caller-supplied remainder constant.
pub fn taylor_approx(f: &VectorField, index: usize, s: u32, c: f64) -> Result<PolyApprox> {
    if !(c >= 0.0) || !c.is_finite() {
        return Err(Error::InvalidArgument(format!("remainder constant must be finite and nonnegative, got {c}")));
    }
    let p = taylor_series(f, index, s)?;
    Ok(PolyApprox {
        p,
        error_model: ErrorModel::Taylor { c, s },
        domain: f.domain().clone(),
    })
}

/// Allowance for floating-point cancellation when comparing `f(x)` with `P(x)`.
pub(crate) fn roundoff_allowance(fx: f64, p_abs: f64) -> f64 {
    64.0 * f64::EPSILON * (fx.abs() + p_abs)
}

fn grid_axes(domain: &Domain, per_axis: usize) -> Vec<Vec<f64>> {
    (0..domain.dim())
        .map(|k| {
            let (l, h) = (domain.lo[k], domain.hi[k]);
            if per_axis == 1 {
                vec![0.5 * (l + h)]
            } else {
                (0..per_axis)
                    .map(|i| l + (h - l) * i as f64 / (per_axis - 1) as f64)
                    .collect()
            }
        })
        .collect()
}

fn grid_point(axes: &[Vec<f64>], mut flat: usize, out: &mut [f64]) {
    for (k, ax) in axes.iter().enumerate() {
        out[k] = ax[flat % ax.len()];
        flat /= ax.len();
    }
}

/// `margin · max |f(x) − P(x)| / ‖x‖^{s+1}` over a tensor grid, skipping the origin
/// and points where the difference is at the level of rounding error.
pub fn estimate_taylor_constant<F>(f: F, p: &SparsePoly, s: u32, domain: &Domain, per_axis: usize, margin: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if per_axis == 0 {
        return Err(Error::InvalidArgument("grid needs at least one point per axis".into()));
    }
    let n = domain.dim();
    let axes = grid_axes(domain, per_axis);
    let total = per_axis.checked_pow(n as u32).ok_or_else(|| Error::InvalidArgument("grid too large".into()))?;
    let cp = p.compile();
    let deg = cp.degree();
    let best = (0..total)
        .into_par_iter()
        .map(|i| {
            let mut x = vec![0.0; n];
            grid_point(&axes, i, &mut x);
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if r == 0.0 {
                return Ok(0.0);
            }
            let fx = f(&x);
            let t = PowerTable::new(&x, deg);
            let diff = (fx - cp.eval_with(&t)).abs();
            if !diff.is_finite() {
                return Err(Error::NonFinite(format!("Taylor residual at {x:?}")));
            }
            if diff <= roundoff_allowance(fx, cp.abs_eval_with(&t)) {
                return Ok(0.0);
            }
            let ratio = diff / r.powi(s as i32 + 1);
            if !ratio.is_finite() {
                return Err(Error::NonFinite(format!("Taylor ratio at {x:?}")));
            }
            Ok(ratio)
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))?;
    Ok(margin * best)
}

/// Knobs of the exchange loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemezSettings {
    pub degree: u32,
    /// Relative slack for accepting a sampled point as non-violating.
    pub tol: f64,
    pub max_rounds: usize,
    /// Random points per round; `None` means `50·|initial nodes|`.
    pub samples: Option<usize>,
    pub seed: u64,
    pub safety: f64,
}

impl Default for RemezSettings {
    fn default() -> Self {
        RemezSettings {
            degree: 12,
            tol: 1e-3,
            max_rounds: 30,
            samples: None,
            seed: 0,
            safety: 1.5,
        }
    }
}

/// Per-round discrete errors of an exchange run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemezTrace {
    pub eps_bar_history: Vec<f64>,
    pub node_counts: Vec<usize>,
    pub max_sampled_residual: f64,
}

fn n_choose(n: usize, k: usize) -> usize {
    let mut r = 1usize;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

/// Chebyshev nodes per axis: about `(d+1)ⁿ/n!` points in total, at most 2000,
/// and never fewer than the number of unknowns plus one.
pub fn chebyshev_nodes_per_axis(dim: usize, degree: u32) -> usize {
    let d = degree as f64;
    let fact: f64 = (1..=dim).map(|k| k as f64).product();
    let target = ((d + 1.0).powi(dim as i32) / fact).ceil().min(2000.0);
    let mut k = target.powf(1.0 / dim as f64).ceil().max(1.0) as usize;
    let unknowns = n_choose(dim + degree as usize, dim) + 1;
    while k.pow(dim as u32) < unknowns {
        k += 1;
    }
    while k > 1 && (k - 1).pow(dim as u32) >= unknowns && k.pow(dim as u32) > 2000 {
        k -= 1;
    }
    k
}

fn to_unit(domain: &Domain, x: &[f64], out: &mut [f64]) {
    for k in 0..x.len() {
        let (l, h) = (domain.lo[k], domain.hi[k]);
        out[k] = (2.0 * x[k] - (l + h)) / (h - l);
    }
}

fn chebyshev_row(t: &[f64], degree: u32, index: &[MultiIndex], table: &mut Vec<Vec<f64>>, out: &mut Vec<f64>) {
    let d = degree as usize;
    table.resize(t.len(), Vec::new());
    for (k, tk) in t.iter().enumerate() {
        let row = &mut table[k];
        row.clear();
        row.push(1.0);
        if d >= 1 {
            row.push(*tk);
        }
        for j in 2..=d {
            let v = 2.0 * tk * row[j - 1] - row[j - 2];
            row.push(v);
        }
    }
    out.clear();
    for a in index {
        out.push(a.exponents().iter().enumerate().map(|(k, &e)| table[k][e as usize]).product());
    }
}

fn chebyshev_to_monomial(domain: &Domain, degree: u32, index: &[MultiIndex], coeffs: &[f64]) -> Result<SparsePoly> {
    let n = domain.dim();
    let per_axis: Vec<Vec<SparsePoly>> = (0..n)
        .map(|k| {
            let t = SparsePoly::var(n, k);
            let mut ts = vec![SparsePoly::constant(n, 1.0)];
            if degree >= 1 {
                ts.push(t.clone());
            }
            for j in 2..=degree as usize {
                let next = &(&t * &ts[j - 1]).scale(2.0) - &ts[j - 2];
                ts.push(next);
            }
            ts
        })
        .collect();
    let mut acc = SparsePoly::zero(n);
    for (a, c) in index.iter().zip(coeffs) {
        if *c == 0.0 {
            continue;
        }
        let mut term = SparsePoly::constant(n, *c);
        for (k, &e) in a.exponents().iter().enumerate() {
            if e > 0 {
                term = &term * &per_axis[k][e as usize];
            }
        }
        acc = &acc + &term;
    }
    let scale: Vec<f64> = (0..n).map(|k| 2.0 / (domain.hi[k] - domain.lo[k])).collect();
    let shift: Vec<f64> = (0..n)
        .map(|k| -(domain.lo[k] + domain.hi[k]) / (domain.hi[k] - domain.lo[k]))
        .collect();
    acc.affine_substitute(&scale, &shift)
}

/// Active node of the minimax LP: node index and whether it carries the negative sign.
type ActiveNode = (usize, bool);

/// Discrete minimax fit over `nodes`: returns Chebyshev coefficients, the LP optimum and
/// the optimal basis for warm-starting the next round.
fn discrete_minimax(rows: &[Vec<f64>], values: &[f64], warm: Option<&[ActiveNode]>) -> Result<(Vec<f64>, f64, Option<Vec<ActiveNode>>)> {
    let k = rows.len();
    let nb = rows[0].len();
    // Dual of min ε s.t. |fₖ − Φₖp| ≤ ε: max fᵀ(u − w), Φᵀ(u − w) = 0, Σ(u + w) = 1.
    let mut c = Vec::with_capacity(2 * k);
    c.extend(values.iter().map(|f| -f));
    c.extend(values.iter().copied());
    let mut lp = LinearProgram::new(c);
    let mut a = nalgebra::DMatrix::zeros(nb + 1, 2 * k);
    for (j, row) in rows.iter().enumerate() {
        for (i, v) in row.iter().enumerate() {
            a[(i, j)] = *v;
            a[(i, k + j)] = -*v;
        }
        a[(nb, j)] = 1.0;
        a[(nb, k + j)] = 1.0;
    }
    lp.a = a;
    lp.kinds = vec![RowKind::Eq; nb + 1];
    lp.rhs = vec![0.0; nb + 1];
    lp.rhs[nb] = 1.0;
    let hint: Option<Vec<usize>> = warm.map(|w| w.iter().map(|&(i, neg)| if neg { k + i } else { i }).collect());
    let sol = solve_lp_from(&lp, hint.as_deref())?;
    let p: Vec<f64> = sol.duals[..nb].iter().map(|y| -y).collect();
    let basis = sol
        .basis
        .map(|b| b.into_iter().map(|j| if j >= k { (j - k, true) } else { (j, false) }).collect());
    Ok((p, -sol.duals[nb], basis))
}

/// Chebyshev–Lobatto tensor grid with `4d + 1` points per axis (fewer when that would exceed
/// 20000 points); it contains every corner of the domain.
fn lobatto_grid(domain: &Domain, degree: u32) -> Vec<Vec<f64>> {
    let n = domain.dim();
    let mut m = 4 * degree as usize + 1;
    while m > 2 && m.saturating_pow(n as u32) > 20_000 {
        m -= 1;
    }
    let axes: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            (0..m)
                .map(|i| {
                    let t = (std::f64::consts::PI * i as f64 / (m - 1).max(1) as f64).cos();
                    0.5 * (domain.lo[j] + domain.hi[j]) + 0.5 * (domain.hi[j] - domain.lo[j]) * t
                })
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(m.pow(n as u32));
    let mut x = vec![0.0; n];
    for flat in 0..m.pow(n as u32) {
        grid_point(&axes, flat, &mut x);
        out.push(x.clone());
    }
    out
}

/// Moves each coordinate onto a face of the domain with probability 1/4.
fn snap_to_faces<R: Rng + ?Sized>(domain: &Domain, x: &mut [f64], rng: &mut R) {
    for (j, xj) in x.iter_mut().enumerate() {
        match rng.random_range(0..8) {
            0 => *xj = domain.lo[j],
            1 => *xj = domain.hi[j],
            _ => {}
        }
    }
}

/// Exchange loop: discrete minimax on a growing node set until a sweep of random points,
/// face-snapped points and a Lobatto grid finds no violator.
pub fn remez_minimax<F>(f: F, domain: &Domain, settings: &RemezSettings) -> Result<(PolyApprox, RemezTrace)>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let n = domain.dim();
    let d = settings.degree;
    let index = MultiIndex::all_up_to(n, d);
    let k = chebyshev_nodes_per_axis(n, d);
    let cheb: Vec<f64> = (0..k)
        .map(|i| (std::f64::consts::PI * (2 * i + 1) as f64 / (2 * k) as f64).cos())
        .collect();
    let mut nodes: Vec<Vec<f64>> = Vec::with_capacity(k.pow(n as u32));
    for flat in 0..k.pow(n as u32) {
        let mut t = vec![0.0; n];
        let mut r = flat;
        for tk in t.iter_mut() {
            *tk = cheb[r % k];
            r /= k;
        }
        let x: Vec<f64> = t
            .iter()
            .enumerate()
            .map(|(j, tj)| 0.5 * (domain.lo[j] + domain.hi[j]) + 0.5 * (domain.hi[j] - domain.lo[j]) * tj)
            .collect();
        nodes.push(x);
    }
    let samples = settings.samples.unwrap_or(50 * nodes.len());
    let lobatto = lobatto_grid(domain, d);
    let mut values: Vec<f64> = nodes.iter().map(|x| f(x)).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("function value at a Chebyshev node".into()));
    }
    let mut table = Vec::new();
    let mut rows: Vec<Vec<f64>> = nodes
        .iter()
        .map(|x| {
            let mut t = vec![0.0; n];
            to_unit(domain, x, &mut t);
            let mut row = Vec::new();
            chebyshev_row(&t, d, &index, &mut table, &mut row);
            row
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut trace = RemezTrace {
        eps_bar_history: Vec::new(),
        node_counts: Vec::new(),
        max_sampled_residual: 0.0,
    };
    let add_per_round = index.len() + 1;
    let mut converged = false;
    let mut p_mono = SparsePoly::zero(n);
    let mut eps_bar = 0.0;
    let mut worst_seen = 0.0f64;
    let mut warm: Option<Vec<ActiveNode>> = None;
    for round in 0..settings.max_rounds.max(1) {
        let (coeffs, lp_eps, basis) = discrete_minimax(&rows, &values, warm.as_deref())?;
        warm = basis;
        p_mono = chebyshev_to_monomial(domain, d, &index, &coeffs)?;
        let cp = p_mono.compile();
        let node_eps = nodes
            .par_iter()
            .zip(values.par_iter())
            .map(|(x, v)| (v - cp.eval(x)).abs())
            .reduce(|| 0.0, f64::max);
        // Monotone by construction: the node set only grows.
        eps_bar = node_eps.max(lp_eps).max(trace.eps_bar_history.last().copied().unwrap_or(0.0));
        trace.eps_bar_history.push(eps_bar);
        trace.node_counts.push(nodes.len());
        let mut pts: Vec<Vec<f64>> = (0..samples)
            .map(|i| {
                let mut x = domain.sample(&mut rng);
                if i % 2 == 1 {
                    snap_to_faces(domain, &mut x, &mut rng);
                }
                x
            })
            .collect();
        pts.extend(lobatto.iter().cloned());
        let mut resid: Vec<(f64, usize, f64)> = pts
            .par_iter()
            .enumerate()
            .map(|(i, x)| {
                let fx = f(x);
                ((fx - cp.eval(x)).abs(), i, fx)
            })
            .collect();
        if resid.iter().any(|r| !r.0.is_finite()) {
            return Err(Error::NonFinite("residual during violator sweep".into()));
        }
        let worst = resid.iter().map(|r| r.0).fold(0.0, f64::max);
        worst_seen = worst_seen.max(worst).max(node_eps);
        trace.max_sampled_residual = worst_seen;
        let threshold = eps_bar * (1.0 + settings.tol);
        resid.retain(|r| r.0 > threshold);
        debug!(
            "minimax round {round}: eps_bar {eps_bar:.6e}, {} nodes, {} violators",
            nodes.len(),
            resid.len()
        );
        if resid.is_empty() {
            converged = true;
            break;
        }
        resid.sort_by(|a, b| b.0.total_cmp(&a.0));
        for (_, i, fx) in resid.into_iter().take(add_per_round) {
            let x = pts[i].clone();
            let mut t = vec![0.0; n];
            to_unit(domain, &x, &mut t);
            let mut row = Vec::new();
            chebyshev_row(&t, d, &index, &mut table, &mut row);
            rows.push(row);
            values.push(fx);
            nodes.push(x);
        }
    }
    let eps = if converged {
        settings.safety * eps_bar
    } else {
        warn!("minimax exchange hit {} rounds with violators left; inflating the bound", settings.max_rounds);
        2.0 * worst_seen
    };
    Ok((
        PolyApprox {
            p: p_mono,
            error_model: ErrorModel::Minimax { eps, eps_bar, converged },
            domain: domain.clone(),
        },
        trace,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{builtin_system, Elementary, SinTerm};
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn sin_field() -> VectorField {
        VectorField::new(
            vec![Component::Elementary(Elementary::SinSum {
                terms: vec![SinTerm { amp: -1.0, w: vec![1.0] }],
            })],
            Domain::unit(1),
        )
        .unwrap()
    }

    #[test]
    fn sine_series() {
        let f = sin_field();
        let p = taylor_series(&f, 0, 5).unwrap();
        let want = SparsePoly::from_terms(
            1,
            [
                (MultiIndex::new(vec![1]), -1.0),
                (MultiIndex::new(vec![3]), 1.0 / 6.0),
                (MultiIndex::new(vec![5]), -1.0 / 120.0),
            ],
        );
        assert!((&p - &want).max_abs_coeff() < 1e-17);
        assert!(matches!(taylor_series(&f, 0, 4), Err(Error::EvenOrder(4))));
        for i in 0..=200 {
            let x = -1.0 + 0.01 * i as f64;
            // |sin x − P₅(x)| ≤ |x|⁷/7!
            assert!((-(x as f64).sin() - p.eval(&[x])).abs() <= x.abs().powi(7) / 5040.0 + 1e-16);
        }
    }

    #[test]
    fn constant_estimates() {
        let sin = |x: &[f64]| x[0].sin();
        let x = SparsePoly::var(1, 0);
        let c = estimate_taylor_constant(sin, &x, 1, &Domain::unit(1), 200, 1.0).unwrap();
        // Oracle: |sin x − x|/x² is increasing in |x|, so the grid max sits at the endpoints.
        assert_abs_diff_eq!(c, 1.0 - 1f64.sin(), epsilon = 1e-12);
        let c15 = estimate_taylor_constant(sin, &x, 1, &Domain::unit(1), 200, 1.5).unwrap();
        assert_abs_diff_eq!(c15, 1.5 * (1.0 - 1f64.sin()), epsilon = 1e-12);
        assert_abs_diff_eq!(c, 0.1585, epsilon = 1e-4);
        assert_abs_diff_eq!(c15, 0.238, epsilon = 1e-3);

        let p = &x.pow(3) - &x;
        let poly = |y: &[f64]| y[0].powi(3) - y[0];
        assert_eq!(estimate_taylor_constant(poly, &p, 3, &Domain::unit(1), 200, 1.5).unwrap(), 0.0);
    }

    fn example_constant(name: &str, comp: usize, s: u32, margin: f64) -> (VectorField, SparsePoly, f64) {
        let f = builtin_system(name).unwrap();
        let (g, _) = f.rescale_to_unit_box().unwrap();
        let p = taylor_series(&g, comp, s).unwrap();
        let gc = g.clone();
        let c = estimate_taylor_constant(move |x| gc.component(comp).eval(x), &p, s, g.domain(), 200, margin).unwrap();
        (g, p, c)
    }

    #[test]
    fn example2_constants_match_reported_scale() {
        let (_, _, c5) = example_constant("example2", 0, 5, 1.0);
        assert!((0.35..=1.4).contains(&c5), "c5 = {c5}");
        let (_, _, c15) = example_constant("example2", 0, 15, 1.0);
        assert!((1e-4..=4e-4).contains(&c15), "c15 = {c15}");
        let (_, _, c3) = example_constant("example3", 1, 5, 1.0);
        assert!((8e2..=3.2e3).contains(&c3), "c = {c3}");
    }

    #[test]
    fn taylor_models_are_sound_on_fresh_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for (name, comp, s) in [("example2", 0, 5), ("example2", 1, 15), ("example3", 1, 5), ("example3", 1, 9)] {
            let (g, p, c) = example_constant(name, comp, s, 1.5);
            let model = ErrorModel::Taylor { c, s };
            let cp = p.compile();
            for _ in 0..100_000 {
                let x = g.domain().sample(&mut rng);
                let fx = g.component(comp).eval(&x);
                let t = PowerTable::new(&x, cp.degree());
                let diff = (fx - cp.eval_with(&t)).abs();
                assert!(
                    diff <= model.bound_at(&x) + roundoff_allowance(fx, cp.abs_eval_with(&t)),
                    "{name} s={s} at {x:?}"
                );
            }
        }
    }

    #[test]
    fn node_counts() {
        assert_eq!(chebyshev_nodes_per_axis(1, 1), 3);
        assert_eq!(chebyshev_nodes_per_axis(2, 12), 10);
        assert!(chebyshev_nodes_per_axis(3, 5).pow(3) >= 57);
    }

    #[test]
    fn minimax_reproduces_polynomials() {
        let f = |x: &[f64]| 0.5 - x[0] + 2.0 * x[0] * x[1] - 0.25 * x[1].powi(3);
        let s = RemezSettings { degree: 3, ..Default::default() };
        let (a, trace) = remez_minimax(f, &Domain::unit(2), &s).unwrap();
        let ErrorModel::Minimax { eps_bar, converged, .. } = a.error_model else { panic!() };
        assert!(eps_bar <= 1e-9);
        assert!(converged);
        assert_abs_diff_eq!(a.p.coeff(&MultiIndex::new(vec![1, 1])), 2.0, epsilon = 1e-8);
        assert!(trace.eps_bar_history.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn minimax_of_abs_is_half() {
        let f = |x: &[f64]| x[0].abs();
        let s = RemezSettings { degree: 1, seed: 4, ..Default::default() };
        let (a, trace) = remez_minimax(f, &Domain::unit(1), &s).unwrap();
        let ErrorModel::Minimax { eps, eps_bar, .. } = a.error_model else { panic!() };
        assert!((eps_bar - 0.5).abs() < 0.02, "{eps_bar}");
        let dense = RemezSettings { degree: 1, seed: 4, samples: Some(20_000), ..Default::default() };
        let (b, _) = remez_minimax(f, &Domain::unit(1), &dense).unwrap();
        let ErrorModel::Minimax { eps_bar: fine, .. } = b.error_model else { panic!() };
        assert!((fine - 0.5).abs() < 1e-3, "{fine}");
        assert_abs_diff_eq!(eps, 1.5 * eps_bar);
        assert!(trace.eps_bar_history.windows(2).all(|w| w[0] <= w[1]));
        // Dense-grid oracle: the best constant-plus-slope fit to |x| is 1/2.
        let mut best = f64::INFINITY;
        for i in 0..=100 {
            let c0 = i as f64 / 100.0;
            let err = (0..=2000).map(|k| -1.0 + k as f64 / 1000.0).map(|x: f64| (x.abs() - c0).abs()).fold(0.0, f64::max);
            best = best.min(err);
        }
        assert_abs_diff_eq!(best, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn minimax_example3_matches_reported_error() {
        let f = builtin_system("example3").unwrap();
        let (g, _) = f.rescale_to_unit_box().unwrap();
        let s = RemezSettings::default();
        let (a, _) = remez_minimax(|x| g.component(1).eval(x), g.domain(), &s).unwrap();
        let ErrorModel::Minimax { eps, converged, .. } = a.error_model else { panic!() };
        assert!(converged);
        assert!((0.014..=0.056).contains(&eps), "eps = {eps}");
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cp = a.p.compile();
        for _ in 0..100_000 {
            let x = [rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)];
            assert!((g.component(1).eval(&x) - cp.eval(&x)).abs() <= eps);
        }
    }

    #[test]
    fn approx_json_shape() {
        let a = PolyApprox {
            p: SparsePoly::var(1, 0),
            error_model: ErrorModel::Taylor { c: 0.5, s: 3 },
            domain: Domain::unit(1),
        };
        let v: serde_json::Value = serde_json::to_value(&a).unwrap();
        assert_eq!(v["error_model"]["type"], "taylor");
        assert_eq!(v["dim"], 1);
        let back: PolyApprox = serde_json::from_value(v).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn bound_polys() {
        let m = ErrorModel::Taylor { c: 2.0, s: 1 };
        let p = m.bound_poly(2).unwrap();
        assert_abs_diff_eq!(p.eval(&[1.0, 1.0]), 4.0);
        assert_abs_diff_eq!(m.bound_at(&[1.0, 1.0]), 4.0, epsilon = 1e-12);
        assert!(ErrorModel::Exact.bound_poly(3).unwrap().is_zero());
        assert!(taylor_approx(&sin_field(), 0, 3, -1.0).is_err());
        assert!(matches!(taylor_approx(&sin_field(), 0, 3, 0.1).unwrap().error_model, ErrorModel::Taylor { .. }));
    }
}
