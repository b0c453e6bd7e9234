//! Block-diagonal semidefinite feasibility programs and a primal-dual interior-point solver.
//!
//! Standard form: find `X = diag(X₁,…,X_K) ⪰ 0` with `Σ_k ⟨A_ik, X_k⟩ = b_i`. The solver
//! runs an infeasible-start interior-point method (HKM direction, Mehrotra predictor-corrector)
//! with objective `w·tr X`, `w = 0` by default. Each iterate is projected onto the equality constraints and
//! the first projection that stays positive definite is returned, after the same checks any
//! feasible answer goes through.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `coef · X_block[row][col]` with `row ≤ col`; off-diagonal entries stand for the symmetric pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdpEntry {
    pub block: usize,
    pub row: usize,
    pub col: usize,
    pub coef: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SdpConstraint {
    pub entries: Vec<SdpEntry>,
    pub rhs: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SdpInstance {
    pub blocks: Vec<usize>,
    pub constraints: Vec<SdpConstraint>,
}

impl SdpInstance {
    pub fn new(blocks: Vec<usize>) -> Self {
        SdpInstance { blocks, constraints: Vec::new() }
    }

    pub fn add_constraint(&mut self, entries: Vec<SdpEntry>, rhs: f64) -> Result<()> {
        for e in &entries {
            let n = *self
                .blocks
                .get(e.block)
                .ok_or_else(|| Error::InvalidArgument(format!("block {} does not exist", e.block)))?;
            if e.row > e.col || e.col >= n {
                return Err(Error::InvalidArgument(format!(
                    "entry ({}, {}) is not in the upper triangle of a {n}×{n} block",
                    e.row, e.col
                )));
            }
            if !e.coef.is_finite() {
                return Err(Error::NonFinite("sdp coefficient".into()));
            }
        }
        if !rhs.is_finite() {
            return Err(Error::NonFinite("sdp right-hand side".into()));
        }
        self.constraints.push(SdpConstraint { entries, rhs });
        Ok(())
    }

    /// `Σ ⟨A_i, X⟩ − b_i` for every constraint.
    pub fn residuals(&self, x: &[DMatrix<f64>]) -> Vec<f64> {
        self.constraints
            .iter()
            .map(|c| c.entries.iter().map(|e| e.coef * x[e.block][(e.row, e.col)]).sum::<f64>() - c.rhs)
            .collect()
    }

    /// Sparse text form:
    ///
    /// ```text
    /// sdp <number of blocks> <number of constraints>
    /// blocks <n₁> <n₂> …
    /// c <constraint> <block> <row> <col> <coef>
    /// b <constraint> <rhs>
    /// ```
    ///
    /// Indices are zero-based, `row ≤ col`, and an off-diagonal coefficient multiplies one
    /// copy of the symmetric entry.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "sdp {} {}", self.blocks.len(), self.constraints.len());
        let sizes: Vec<String> = self.blocks.iter().map(|b| b.to_string()).collect();
        let _ = writeln!(s, "blocks {}", sizes.join(" "));
        for (i, c) in self.constraints.iter().enumerate() {
            for e in &c.entries {
                let _ = writeln!(s, "c {i} {} {} {} {:e}", e.block, e.row, e.col, e.coef);
            }
        }
        for (i, c) in self.constraints.iter().enumerate() {
            let _ = writeln!(s, "b {i} {:e}", c.rhs);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |line: usize, m: &str| Error::InvalidArgument(format!("sdp text line {}: {m}", line + 1));
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (ln, head) = lines.next().ok_or_else(|| bad(0, "empty input"))?;
        let h: Vec<&str> = head.split_whitespace().collect();
        if h.len() != 3 || h[0] != "sdp" {
            return Err(bad(ln, "expected `sdp <blocks> <constraints>`"));
        }
        let nb: usize = h[1].parse().map_err(|_| bad(ln, "bad block count"))?;
        let m: usize = h[2].parse().map_err(|_| bad(ln, "bad constraint count"))?;
        let (ln, bl) = lines.next().ok_or_else(|| bad(ln, "missing blocks line"))?;
        let b: Vec<&str> = bl.split_whitespace().collect();
        if b.first() != Some(&"blocks") || b.len() != nb + 1 {
            return Err(bad(ln, "expected `blocks` followed by one size per block"));
        }
        let blocks = b[1..]
            .iter()
            .map(|t| t.parse().map_err(|_| bad(ln, "bad block size")))
            .collect::<Result<Vec<usize>>>()?;
        let mut inst = SdpInstance::new(blocks);
        inst.constraints = vec![SdpConstraint::default(); m];
        for (ln, l) in lines {
            let t: Vec<&str> = l.split_whitespace().collect();
            let idx = |k: usize| -> Result<usize> {
                t.get(k).and_then(|s| s.parse().ok()).ok_or_else(|| bad(ln, "bad index"))
            };
            let num = |k: usize| -> Result<f64> {
                t.get(k).and_then(|s| s.parse().ok()).ok_or_else(|| bad(ln, "bad number"))
            };
            match t.first().copied() {
                Some("c") if t.len() == 6 => {
                    let i = idx(1)?;
                    let e = SdpEntry { block: idx(2)?, row: idx(3)?, col: idx(4)?, coef: num(5)? };
                    if i >= m || e.block >= nb || e.row > e.col || e.col >= inst.blocks[e.block] {
                        return Err(bad(ln, "entry out of range"));
                    }
                    inst.constraints[i].entries.push(e);
                }
                Some("b") if t.len() == 3 => {
                    let i = idx(1)?;
                    if i >= m {
                        return Err(bad(ln, "constraint out of range"));
                    }
                    inst.constraints[i].rhs = num(2)?;
                }
                _ => return Err(bad(ln, "unrecognized record")),
            }
        }
        Ok(inst)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SdpOutcome {
    Feasible { x: Vec<DMatrix<f64>> },
    Infeasible,
    Unknown(String),
}

#[derive(Clone, Debug)]
pub struct SdpReport {
    pub outcome: SdpOutcome,
    pub iterations: usize,
    /// Largest absolute equality residual of the returned point.
    pub residual: f64,
    /// Smallest eigenvalue over the returned blocks.
    pub min_eigenvalue: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SdpSettings {
    pub max_iterations: usize,
    /// Relative primal residual at which an interior iterate is accepted.
    pub tol: f64,
    /// Acceptance threshold for witnesses.
    pub verify_tol: f64,
    /// Objective `w·tr X`; zero follows the analytic-center path, which keeps witnesses
    /// away from the boundary of the cone.
    pub trace_weight: f64,
}

impl Default for SdpSettings {
    fn default() -> Self {
        SdpSettings { max_iterations: 120, tol: 1e-9, verify_tol: 1e-7, trace_weight: 0.0 }
    }
}

/// Conic back end contract; implementations must be callable concurrently.
pub trait SdpSolver: Send + Sync {
    fn solve(&self, inst: &SdpInstance) -> SdpReport;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct InteriorPoint {
    pub settings: SdpSettings,
}

impl SdpSolver for InteriorPoint {
    fn solve(&self, inst: &SdpInstance) -> SdpReport {
        solve_sdp(inst, &self.settings)
    }
}

/// Symmetric expansion of one constraint restricted to one block: `(row, col, value)` over
/// both triangles.
type Sparse = Vec<(usize, usize, f64)>;

struct Problem {
    blocks: Vec<usize>,
    /// Per constraint, per touched block.
    rows: Vec<Vec<(usize, Sparse)>>,
    /// Per block, every `(constraint, row, col, value)`.
    by_block: Vec<Vec<(usize, usize, usize, f64)>>,
    /// Per block, constraints in increasing order with column-major positions `p + q·n`.
    csr: Vec<Vec<(usize, Vec<(usize, f64)>)>>,
    b: DVector<f64>,
}

impl Problem {
    fn new(inst: &SdpInstance) -> Self {
        let nb = inst.blocks.len();
        let mut rows = Vec::with_capacity(inst.constraints.len());
        let mut by_block = vec![Vec::new(); nb];
        for (i, c) in inst.constraints.iter().enumerate() {
            let mut per: Vec<(usize, Sparse)> = Vec::new();
            for e in &c.entries {
                let slot = match per.iter().position(|(k, _)| *k == e.block) {
                    Some(p) => p,
                    None => {
                        per.push((e.block, Vec::new()));
                        per.len() - 1
                    }
                };
                if e.row == e.col {
                    per[slot].1.push((e.row, e.col, e.coef));
                } else {
                    per[slot].1.push((e.row, e.col, 0.5 * e.coef));
                    per[slot].1.push((e.col, e.row, 0.5 * e.coef));
                }
            }
            for (k, list) in &per {
                for &(r, c, a) in list {
                    by_block[*k].push((i, r, c, a));
                }
            }
            rows.push(per);
        }
        let csr = by_block
            .iter()
            .zip(&inst.blocks)
            .map(|(list, &n)| {
                let mut out: Vec<(usize, Vec<(usize, f64)>)> = Vec::new();
                for &(i, r, c, a) in list {
                    match out.last_mut() {
                        Some((j, e)) if *j == i => e.push((r + c * n, a)),
                        _ => out.push((i, vec![(r + c * n, a)])),
                    }
                }
                out
            })
            .collect();
        Problem {
            blocks: inst.blocks.clone(),
            rows,
            by_block,
            csr,
            b: DVector::from_iterator(inst.constraints.len(), inst.constraints.iter().map(|c| c.rhs)),
        }
    }

    fn m(&self) -> usize {
        self.rows.len()
    }

    /// `A(G)` for arbitrary (not necessarily symmetric) blocks.
    fn apply(&self, g: &[DMatrix<f64>]) -> DVector<f64> {
        DVector::from_iterator(
            self.m(),
            self.rows.iter().map(|per| {
                per.iter()
                    .map(|(k, list)| list.iter().map(|&(r, c, a)| a * g[*k][(r, c)]).sum::<f64>())
                    .sum::<f64>()
            }),
        )
    }

    /// `A*(y) = Σ yᵢ Aᵢ`.
    fn adjoint(&self, y: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let mut out: Vec<DMatrix<f64>> = self.blocks.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        for (k, list) in self.by_block.iter().enumerate() {
            for &(i, r, c, a) in list {
                out[k][(r, c)] += a * y[i];
            }
        }
        out
    }

    /// `M_ij = ⟨Aᵢ, X Aⱼ S⁻¹⟩`, filled from the upper triangle.
    fn schur(&self, x: &[DMatrix<f64>], sinv: &[DMatrix<f64>]) -> DMatrix<f64> {
        let m = self.m();
        let rows: Vec<Vec<f64>> = (0..m)
            .into_par_iter()
            .map(|i| {
                let mut row = vec![0.0; m];
                for (k, list) in &self.rows[i] {
                    let n = self.blocks[*k];
                    let xs = x[*k].as_slice();
                    let ss = sinv[*k].as_slice();
                    // W = X Aᵢ S⁻¹, column-major.
                    let mut w = vec![0.0; n * n];
                    for q in 0..n {
                        let wq = &mut w[q * n..(q + 1) * n];
                        for &(r, c, a) in list {
                            let f = a * ss[c + q * n];
                            if f == 0.0 {
                                continue;
                            }
                            for (wp, xp) in wq.iter_mut().zip(&xs[r * n..(r + 1) * n]) {
                                *wp += f * xp;
                            }
                        }
                    }
                    let csr = &self.csr[*k];
                    let from = csr.partition_point(|(j, _)| *j < i);
                    for (j, entries) in &csr[from..] {
                        row[*j] += entries.iter().map(|&(pos, a)| a * w[pos]).sum::<f64>();
                    }
                }
                row
            })
            .collect();
        let mut mat = DMatrix::zeros(m, m);
        for (i, row) in rows.iter().enumerate() {
            for j in i..m {
                mat[(i, j)] = row[j];
                mat[(j, i)] = row[j];
            }
        }
        mat
    }
}

const STALL_ITERATIONS: usize = 12;

/// Euclidean projection onto `A(X) = b` via the factored Gram matrix `A A*`.
struct Projector {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl Projector {
    fn new(p: &Problem) -> Option<Self> {
        let m = p.m();
        let mut g = DMatrix::zeros(m, m);
        for list in &p.by_block {
            let mut at: BTreeMap<(usize, usize), Vec<(usize, f64)>> = BTreeMap::new();
            for &(i, r, c, a) in list {
                at.entry((r, c)).or_default().push((i, a));
            }
            for v in at.values() {
                for &(i, a) in v {
                    for &(j, b) in v {
                        g[(i, j)] += a * b;
                    }
                }
            }
        }
        let scale = (0..m).map(|i| g[(i, i)]).fold(0.0, f64::max).max(1e-300);
        for i in 0..m {
            g[(i, i)] += 1e-13 * scale;
        }
        Some(Projector { chol: g.cholesky()? })
    }

    fn correct(&self, p: &Problem, x: &[DMatrix<f64>], rp: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let mut w = self.chol.solve(rp);
        let mut out: Vec<DMatrix<f64>> = x.to_vec();
        // Two sweeps absorb the regularization error.
        for _ in 0..2 {
            let d = p.adjoint(&w);
            for k in 0..out.len() {
                out[k] += &d[k];
            }
            let r = &p.b - p.apply(&out);
            w = self.chol.solve(&r);
        }
        out
    }
}

fn inner(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn fro(a: &[DMatrix<f64>]) -> f64 {
    a.iter().map(|x| x.norm_squared()).sum::<f64>().sqrt()
}

fn sym(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    sym(m.clone()).symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

/// Largest `α` with `X + αΔ ⪰ 0`, for `X ≻ 0`.
fn max_step(x: &DMatrix<f64>, d: &DMatrix<f64>) -> Option<f64> {
    if x.nrows() == 0 {
        return Some(f64::INFINITY);
    }
    let l = x.clone().cholesky()?.l();
    let li = l.try_inverse()?;
    let z = &li * d * li.transpose();
    let lam = min_eigenvalue(&z);
    Some(if lam >= 0.0 { f64::INFINITY } else { -1.0 / lam })
}

fn step_lengths(x: &[DMatrix<f64>], dx: &[DMatrix<f64>], s: &[DMatrix<f64>], ds: &[DMatrix<f64>]) -> Option<(f64, f64)> {
    let mut ap = f64::INFINITY;
    let mut ad = f64::INFINITY;
    for k in 0..x.len() {
        ap = ap.min(max_step(&x[k], &dx[k])?);
        ad = ad.min(max_step(&s[k], &ds[k])?);
    }
    Some((ap, ad))
}

struct Direction {
    dx: Vec<DMatrix<f64>>,
    dy: DVector<f64>,
    ds: Vec<DMatrix<f64>>,
}

fn direction(
    p: &Problem,
    chol: &nalgebra::Cholesky<f64, nalgebra::Dyn>,
    x: &[DMatrix<f64>],
    sinv: &[DMatrix<f64>],
    rp: &DVector<f64>,
    rd: &[DMatrix<f64>],
    rc: &[DMatrix<f64>],
) -> Direction {
    let g: Vec<DMatrix<f64>> = (0..x.len()).map(|k| (&rc[k] - &x[k] * &rd[k]) * &sinv[k]).collect();
    let rhs = rp - p.apply(&g);
    let dy = chol.solve(&rhs);
    let aty = p.adjoint(&dy);
    let ds: Vec<DMatrix<f64>> = (0..x.len()).map(|k| &rd[k] - &aty[k]).collect();
    let dx: Vec<DMatrix<f64>> = (0..x.len())
        .map(|k| sym((&rc[k] - &x[k] * &ds[k]) * &sinv[k]))
        .collect();
    Direction { dx, dy, ds }
}

/// Solves the feasibility problem and verifies the answer: a feasible point must have
/// equality residual `≤ verify_tol·(1 + ‖b‖_∞)` and block eigenvalues `≥ −verify_tol·(1 + ‖X_k‖)`,
/// otherwise the outcome is downgraded to unknown. Infeasibility is reported only with a
/// checked Farkas ray `y` (`bᵀy > 0`, `−A*(y) ⪰ 0`).
pub fn solve_sdp(inst: &SdpInstance, settings: &SdpSettings) -> SdpReport {
    let p = Problem::new(inst);
    let nb = p.blocks.len();
    let m = p.m();
    let ntot: usize = p.blocks.iter().sum();
    let bnorm_inf = p.b.amax();
    let unknown = |msg: &str, it: usize| SdpReport {
        outcome: SdpOutcome::Unknown(msg.to_string()),
        iterations: it,
        residual: f64::NAN,
        min_eigenvalue: f64::NAN,
    };
    if m == 0 {
        let x: Vec<DMatrix<f64>> = p.blocks.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        return SdpReport { outcome: SdpOutcome::Feasible { x }, iterations: 0, residual: 0.0, min_eigenvalue: 0.0 };
    }
    if ntot == 0 {
        return if bnorm_inf == 0.0 {
            SdpReport { outcome: SdpOutcome::Feasible { x: vec![] }, iterations: 0, residual: 0.0, min_eigenvalue: 0.0 }
        } else {
            SdpReport { outcome: SdpOutcome::Infeasible, iterations: 0, residual: bnorm_inf, min_eigenvalue: 0.0 }
        };
    }
    let c: Vec<DMatrix<f64>> = p
        .blocks
        .iter()
        .map(|&n| DMatrix::identity(n, n) * settings.trace_weight)
        .collect();
    let cnorm = fro(&c);
    let bnorm = p.b.norm();

    let anorm = p
        .rows
        .iter()
        .map(|per| per.iter().flat_map(|(_, l)| l.iter().map(|e| e.2 * e.2)).sum::<f64>().sqrt())
        .collect::<Vec<_>>();
    let xi = (0..m)
        .map(|i| (1.0 + p.b[i].abs()) / (1.0 + anorm[i]))
        .fold((ntot as f64).sqrt(), f64::max)
        .max(10.0);
    let eta = cnorm.max((ntot as f64).sqrt()).max(10.0);
    let mut x: Vec<DMatrix<f64>> = p.blocks.iter().map(|&n| DMatrix::identity(n, n) * xi).collect();
    let mut s: Vec<DMatrix<f64>> = p.blocks.iter().map(|&n| DMatrix::identity(n, n) * eta).collect();
    let mut y = DVector::zeros(m);
    let projector = Projector::new(&p);
    let (mut best_relp, mut best_at) = (f64::INFINITY, 0);

    for it in 0..settings.max_iterations {
        let rp = &p.b - p.apply(&x);
        let aty = p.adjoint(&y);
        let rd: Vec<DMatrix<f64>> = (0..nb).map(|k| &c[k] - &s[k] - &aty[k]).collect();
        let mu = inner(&x, &s) / ntot as f64;
        let pobj = inner(&c, &x);
        let dobj = p.b.dot(&y);
        let relp = rp.norm() / (1.0 + bnorm);
        if relp < settings.tol {
            return verify(inst, x, it, settings, bnorm_inf);
        }
        if relp < 0.5 * best_relp {
            (best_relp, best_at) = (relp, it);
        } else if it - best_at >= STALL_ITERATIONS {
            return unknown("primal residual stalled", it);
        }
        if relp < 1e-2 {
            if let Some(proj) = &projector {
                let xp = proj.correct(&p, &x, &rp);
                let feasible = (&p.b - p.apply(&xp)).norm() / (1.0 + bnorm) < settings.tol;
                if feasible && xp.iter().all(|b| b.nrows() == 0 || b.clone().cholesky().is_some()) {
                    return verify(inst, xp, it, settings, bnorm_inf);
                }
            }
        }
        if dobj > 0.0 {
            let ray: Vec<DMatrix<f64>> = aty.iter().map(|a| a * (-1.0 / dobj)).collect();
            let lam = ray.iter().map(min_eigenvalue).fold(f64::INFINITY, f64::min);
            if lam >= -settings.tol && dobj > 1e3 * (1.0 + cnorm) {
                return SdpReport { outcome: SdpOutcome::Infeasible, iterations: it, residual: rp.amax(), min_eigenvalue: lam };
            }
        }
        if !mu.is_finite() || !pobj.is_finite() || !dobj.is_finite() {
            return unknown("iterates became non-finite", it);
        }

        let mut sinv = Vec::with_capacity(nb);
        for sk in &s {
            match sk.clone().cholesky() {
                Some(ch) => sinv.push(ch.inverse()),
                None => return unknown("dual slack lost definiteness", it),
            }
        }
        let mmat = p.schur(&x, &sinv);
        let scale = (0..m).map(|i| mmat[(i, i)]).fold(0.0, f64::max).max(1e-300);
        let mut mreg = mmat;
        for i in 0..m {
            mreg[(i, i)] += 1e-14 * scale;
        }
        let Some(chol) = mreg.cholesky() else {
            return unknown("Schur complement is not positive definite", it);
        };

        let xs: Vec<DMatrix<f64>> = (0..nb).map(|k| &x[k] * &s[k]).collect();
        let rc_aff: Vec<DMatrix<f64>> = xs.iter().map(|a| -a).collect();
        let aff = direction(&p, &chol, &x, &sinv, &rp, &rd, &rc_aff);
        let Some((ap, ad)) = step_lengths(&x, &aff.dx, &s, &aff.ds) else {
            return unknown("iterate lost definiteness", it);
        };
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let xa: Vec<DMatrix<f64>> = (0..nb).map(|k| &x[k] + &aff.dx[k] * ap).collect();
        let sa: Vec<DMatrix<f64>> = (0..nb).map(|k| &s[k] + &aff.ds[k] * ad).collect();
        let mu_aff = inner(&xa, &sa) / ntot as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        let rc: Vec<DMatrix<f64>> = (0..nb)
            .map(|k| {
                let n = p.blocks[k];
                DMatrix::identity(n, n) * (sigma * mu) - &xs[k] - &aff.dx[k] * &aff.ds[k]
            })
            .collect();
        let d = direction(&p, &chol, &x, &sinv, &rp, &rd, &rc);
        let Some((ap, ad)) = step_lengths(&x, &d.dx, &s, &d.ds) else {
            return unknown("iterate lost definiteness", it);
        };
        let ap = (0.95 * ap).min(1.0);
        let ad = (0.95 * ad).min(1.0);
        for k in 0..nb {
            x[k] += &d.dx[k] * ap;
            s[k] += &d.ds[k] * ad;
            x[k] = sym(x[k].clone());
            s[k] = sym(s[k].clone());
        }
        y += &d.dy * ad;
    }
    let rp = &p.b - p.apply(&x);
    if rp.norm() / (1.0 + bnorm) < 1e3 * settings.tol {
        return verify(inst, x, settings.max_iterations, settings, bnorm_inf);
    }
    unknown("iteration limit", settings.max_iterations)
}

fn verify(inst: &SdpInstance, x: Vec<DMatrix<f64>>, it: usize, settings: &SdpSettings, bnorm_inf: f64) -> SdpReport {
    let residual = inst.residuals(&x).iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let mut worst = f64::INFINITY;
    let mut ok = residual <= settings.verify_tol * (1.0 + bnorm_inf);
    for xk in &x {
        let lam = min_eigenvalue(xk);
        worst = worst.min(lam);
        if lam < -settings.verify_tol * (1.0 + xk.norm()) {
            ok = false;
        }
    }
    let outcome = if ok {
        SdpOutcome::Feasible { x }
    } else {
        SdpOutcome::Unknown(format!("witness failed verification (residual {residual:e}, eigenvalue {worst:e})"))
    };
    SdpReport { outcome, iterations: it, residual, min_eigenvalue: worst }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn e(block: usize, row: usize, col: usize, coef: f64) -> SdpEntry {
        SdpEntry { block, row, col, coef }
    }

    #[test]
    fn scalar_equal_one() {
        let mut inst = SdpInstance::new(vec![1]);
        inst.add_constraint(vec![e(0, 0, 0, 1.0)], 1.0).unwrap();
        let r = solve_sdp(&inst, &SdpSettings::default());
        match r.outcome {
            SdpOutcome::Feasible { x } => assert_abs_diff_eq!(x[0][(0, 0)], 1.0, epsilon = 1e-8),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn scalar_equal_minus_one_is_infeasible() {
        let mut inst = SdpInstance::new(vec![1]);
        inst.add_constraint(vec![e(0, 0, 0, 1.0)], -1.0).unwrap();
        assert_eq!(solve_sdp(&inst, &SdpSettings::default()).outcome, SdpOutcome::Infeasible);
    }

    #[test]
    fn off_diagonal_forcing_rank_one() {
        // X₀₀ = 1, X₁₁ = 1, 2X₀₁ = 2 forces X = [[1,1],[1,1]].
        let mut inst = SdpInstance::new(vec![2]);
        inst.add_constraint(vec![e(0, 0, 0, 1.0)], 1.0).unwrap();
        inst.add_constraint(vec![e(0, 1, 1, 1.0)], 1.0).unwrap();
        inst.add_constraint(vec![e(0, 0, 1, 2.0)], 2.0).unwrap();
        let r = solve_sdp(&inst, &SdpSettings::default());
        match r.outcome {
            SdpOutcome::Feasible { x } => assert_abs_diff_eq!(x[0][(0, 1)], 1.0, epsilon = 1e-6),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn off_diagonal_too_large_is_infeasible() {
        let mut inst = SdpInstance::new(vec![2]);
        inst.add_constraint(vec![e(0, 0, 0, 1.0)], 1.0).unwrap();
        inst.add_constraint(vec![e(0, 1, 1, 1.0)], 1.0).unwrap();
        inst.add_constraint(vec![e(0, 0, 1, 1.0)], 1.5).unwrap();
        assert_eq!(solve_sdp(&inst, &SdpSettings::default()).outcome, SdpOutcome::Infeasible);
    }

    #[test]
    fn two_blocks_min_trace() {
        // X₁ + X₂ = 3 over two scalar blocks.
        let mut inst = SdpInstance::new(vec![1, 1]);
        inst.add_constraint(vec![e(0, 0, 0, 1.0), e(1, 0, 0, 1.0)], 3.0).unwrap();
        let r = solve_sdp(&inst, &SdpSettings::default());
        match r.outcome {
            SdpOutcome::Feasible { x } => {
                assert_abs_diff_eq!(x[0][(0, 0)] + x[1][(0, 0)], 3.0, epsilon = 1e-8);
                assert!(x[0][(0, 0)] >= -1e-9 && x[1][(0, 0)] >= -1e-9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn text_roundtrip() {
        let mut inst = SdpInstance::new(vec![2, 3]);
        inst.add_constraint(vec![e(0, 0, 1, 0.5), e(1, 2, 2, -1.25)], 4.0).unwrap();
        inst.add_constraint(vec![e(1, 0, 2, 3.0)], 0.0).unwrap();
        let back = SdpInstance::from_text(&inst.to_text()).unwrap();
        assert_eq!(back, inst);
        assert!(SdpInstance::from_text("sdp 1 1\nblocks 2\nc 0 0 1 0 1\nb 0 1\n").is_err());
        assert!(inst.clone().add_constraint(vec![e(0, 1, 0, 1.0)], 0.0).is_err());
    }

    #[test]
    fn random_feasible_instances_verify() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let n = 4;
            let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let x0 = &g * g.transpose();
            let mut inst = SdpInstance::new(vec![n]);
            for _ in 0..6 {
                let mut entries = Vec::new();
                for r in 0..n {
                    for c in r..n {
                        if rng.random::<f64>() < 0.5 {
                            entries.push(e(0, r, c, rng.random_range(-1.0..1.0)));
                        }
                    }
                }
                let rhs: f64 = entries.iter().map(|en| en.coef * x0[(en.row, en.col)]).sum();
                inst.add_constraint(entries, rhs).unwrap();
            }
            let r = solve_sdp(&inst, &SdpSettings::default());
            match r.outcome {
                SdpOutcome::Feasible { x } => {
                    assert!(r.residual <= 1e-7);
                    assert!(min_eigenvalue(&x[0]) >= -1e-7 * (1.0 + x[0].norm()));
                }
                other => panic!("{other:?}"),
            }
        }
    }
}
