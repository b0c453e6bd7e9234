//! Dense bounded-variable revised simplex.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowKind {
    Le,
    Ge,
    Eq,
}

/// `min cᵀx` subject to `rowsᵢ·x (≤|≥|=) rhsᵢ` and `lower ≤ x ≤ upper`.
#[derive(Clone, Debug)]
pub struct LinearProgram {
    pub c: Vec<f64>,
    pub a: DMatrix<f64>,
    pub kinds: Vec<RowKind>,
    pub rhs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub value: f64,
    pub x: Vec<f64>,
    /// Multipliers `y` with `bᵀy = value` at optimality, one per row.
    pub duals: Vec<f64>,
    pub iterations: usize,
    /// Optimal basis as variable indices, when it consists of original variables only.
    pub basis: Option<Vec<usize>>,
}

impl LinearProgram {
    /// Nonnegative variables and no rows.
    pub fn new(c: Vec<f64>) -> Self {
        let n = c.len();
        LinearProgram {
            c,
            a: DMatrix::zeros(0, n),
            kinds: Vec::new(),
            rhs: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn n_vars(&self) -> usize {
        self.c.len()
    }

    pub fn add_row(&mut self, coeffs: &[f64], kind: RowKind, rhs: f64) {
        assert_eq!(coeffs.len(), self.n_vars(), "row length must match variable count");
        let m = self.a.nrows();
        self.a = std::mem::replace(&mut self.a, DMatrix::zeros(0, 0)).insert_row(m, 0.0);
        for (j, v) in coeffs.iter().enumerate() {
            self.a[(m, j)] = *v;
        }
        self.kinds.push(kind);
        self.rhs.push(rhs);
    }

    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        self.lower[j] = lower;
        self.upper[j] = upper;
    }

    fn validate(&self) -> Result<()> {
        let n = self.n_vars();
        let m = self.a.nrows();
        if self.a.ncols() != n || self.lower.len() != n || self.upper.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: self.a.ncols() });
        }
        if self.kinds.len() != m || self.rhs.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: self.rhs.len() });
        }
        if self.c.iter().chain(self.a.iter()).chain(self.rhs.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("linear program data".into()));
        }
        if self.lower.iter().zip(&self.upper).any(|(l, u)| l > u || l.is_nan() || u.is_nan()) {
            return Err(Error::LpInfeasible);
        }
        Ok(())
    }
}

#[derive(Clone, Copy, PartialEq, Debug)]
enum State {
    Basic,
    AtLower,
    AtUpper,
    FreeZero,
}

const FEAS_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 60;

struct Simplex {
    m: usize,
    a: DMatrix<f64>,
    b: Vec<f64>,
    lo: Vec<f64>,
    up: Vec<f64>,
    x: Vec<f64>,
    state: Vec<State>,
    basis: Vec<usize>,
    binv: DMatrix<f64>,
    col_norms: Vec<f64>,
    since_refactor: usize,
    iterations: usize,
    max_iterations: usize,
}

impl Simplex {
    /// Installs `hint` as the basis with artificials fixed at zero; false if unusable.
    fn try_warm(&mut self, hint: &[usize], first_artificial: usize, scale: f64) -> bool {
        let saved = (self.state.clone(), self.basis.clone(), self.x.clone(), self.up.clone());
        for j in first_artificial..self.x.len() {
            self.state[j] = State::AtLower;
            self.x[j] = 0.0;
            self.up[j] = 0.0;
        }
        for &j in hint {
            self.state[j] = State::Basic;
        }
        self.basis = hint.to_vec();
        let ok = self.refactor().is_ok()
            && self
                .basis
                .iter()
                .all(|&j| self.x[j] >= self.lo[j] - 1e-9 * scale && self.x[j] <= self.up[j] + 1e-9 * scale);
        if !ok {
            (self.state, self.basis, self.x, self.up) = saved;
            let m = self.m;
            self.binv = DMatrix::from_fn(m, m, |r, c| if r == c { self.a[(r, first_artificial + r)] } else { 0.0 });
            self.since_refactor = 0;
        }
        ok
    }

    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        let bm = DMatrix::from_fn(m, m, |i, k| self.a[(i, self.basis[k])]);
        self.binv = bm
            .try_inverse()
            .ok_or_else(|| Error::InvalidArgument("simplex basis became singular".into()))?;
        self.since_refactor = 0;
        self.recompute_basic();
        Ok(())
    }

    fn recompute_basic(&mut self) {
        let m = self.m;
        let mut r = self.b.clone();
        for (j, s) in self.state.iter().enumerate() {
            if *s != State::Basic && self.x[j] != 0.0 {
                for i in 0..m {
                    r[i] -= self.a[(i, j)] * self.x[j];
                }
            }
        }
        for k in 0..m {
            let mut v = 0.0;
            for i in 0..m {
                v += self.binv[(k, i)] * r[i];
            }
            self.x[self.basis[k]] = v;
        }
    }

    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for k in 0..m {
            let cb = cost[self.basis[k]];
            if cb != 0.0 {
                for i in 0..m {
                    y[i] += cb * self.binv[(k, i)];
                }
            }
        }
        y
    }

    /// Runs to optimality for `cost`; returns false when unbounded.
    fn optimize(&mut self, cost: &[f64]) -> Result<bool> {
        let n = self.a.ncols();
        let m = self.m;
        let mut degenerate_run = 0usize;
        loop {
            if self.iterations >= self.max_iterations {
                return Err(Error::LpIterationLimit(self.iterations));
            }
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
            }
            let y = nalgebra::DVector::from_vec(self.duals(cost));
            let ay = self.a.tr_mul(&y);
            let cscale = 1.0 + cost.iter().fold(0.0f64, |a, c| a.max(c.abs()));
            let bland = degenerate_run > 50;
            let mut enter: Option<(usize, f64, f64)> = None;
            for j in 0..n {
                let st = self.state[j];
                if st == State::Basic || self.lo[j] == self.up[j] {
                    continue;
                }
                let d = cost[j] - ay[j];
                let dir = match st {
                    State::AtLower if d < -OPT_TOL * cscale => 1.0,
                    State::AtUpper if d > OPT_TOL * cscale => -1.0,
                    State::FreeZero if d.abs() > OPT_TOL * cscale => -d.signum(),
                    _ => continue,
                };
                let score = d.abs() / self.col_norms[j];
                if bland {
                    enter = Some((j, dir, score));
                    break;
                }
                if enter.map_or(true, |(_, _, s)| score > s) {
                    enter = Some((j, dir, score));
                }
            }
            let Some((j, dir, _)) = enter else {
                return Ok(true);
            };
            let col = self.a.column(j);
            let mut w = vec![0.0; m];
            for k in 0..m {
                let mut v = 0.0;
                for i in 0..m {
                    v += self.binv[(k, i)] * col[i];
                }
                w[k] = v;
            }
            // x_B moves by −dir·t·w.
            let wmax = w.iter().fold(1.0f64, |a, v| a.max(v.abs()));
            let mut tmax = self.up[j] - self.lo[j];
            let mut leave: Option<(usize, bool)> = None;
            let mut ratios: Vec<(usize, f64, bool, f64)> = Vec::new();
            for k in 0..m {
                let delta = -dir * w[k];
                if delta.abs() <= PIVOT_TOL * wmax {
                    continue;
                }
                let bi = self.basis[k];
                let (limit, to_upper) = if delta < 0.0 {
                    if self.lo[bi] == f64::NEG_INFINITY {
                        continue;
                    }
                    ((self.x[bi] - self.lo[bi] + FEAS_TOL) / -delta, false)
                } else {
                    if self.up[bi] == f64::INFINITY {
                        continue;
                    }
                    ((self.up[bi] - self.x[bi] + FEAS_TOL) / delta, true)
                };
                ratios.push((k, limit.max(0.0), to_upper, delta.abs()));
            }
            // Harris: relaxed bound first, then the largest pivot (or lowest index) within it.
            let relaxed = ratios.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
            if relaxed < tmax {
                let mut best: Option<(usize, bool, f64)> = None;
                for &(k, _, to_upper, piv) in &ratios {
                    let bi = self.basis[k];
                    let delta = -dir * w[k];
                    let exact = if to_upper {
                        (self.up[bi] - self.x[bi]) / delta
                    } else {
                        (self.x[bi] - self.lo[bi]) / -delta
                    };
                    if exact > relaxed {
                        continue;
                    }
                    let better = match best {
                        None => true,
                        Some((kb, _, pb)) => {
                            if bland {
                                bi < self.basis[kb]
                            } else {
                                piv > pb
                            }
                        }
                    };
                    if better {
                        best = Some((k, to_upper, piv));
                    }
                }
                if let Some((k, to_upper, _)) = best {
                    let bi = self.basis[k];
                    let delta = -dir * w[k];
                    let exact = if to_upper {
                        (self.up[bi] - self.x[bi]) / delta
                    } else {
                        (self.x[bi] - self.lo[bi]) / -delta
                    };
                    tmax = exact.max(0.0);
                    leave = Some((k, to_upper));
                }
            }
            if tmax == f64::INFINITY {
                return Ok(false);
            }
            self.iterations += 1;
            degenerate_run = if tmax <= 1e-14 { degenerate_run + 1 } else { 0 };
            self.x[j] += dir * tmax;
            for k in 0..m {
                self.x[self.basis[k]] -= dir * tmax * w[k];
            }
            match leave {
                None => {
                    self.state[j] = if dir > 0.0 { State::AtUpper } else { State::AtLower };
                    self.x[j] = if dir > 0.0 { self.up[j] } else { self.lo[j] };
                }
                Some((k, to_upper)) => {
                    let bi = self.basis[k];
                    self.state[bi] = if to_upper { State::AtUpper } else { State::AtLower };
                    self.x[bi] = if to_upper { self.up[bi] } else { self.lo[bi] };
                    self.state[j] = State::Basic;
                    self.basis[k] = j;
                    let piv = w[k];
                    let row_k: Vec<f64> = (0..m).map(|i| self.binv[(k, i)] / piv).collect();
                    for r in 0..m {
                        if r == k || w[r] == 0.0 {
                            continue;
                        }
                        let f = w[r];
                        for i in 0..m {
                            self.binv[(r, i)] -= f * row_k[i];
                        }
                    }
                    for i in 0..m {
                        self.binv[(k, i)] = row_k[i];
                    }
                    self.since_refactor += 1;
                }
            }
        }
    }
}

/// Solves the program to optimality.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    solve_lp_from(lp, None)
}

/// As [`solve_lp`], starting from a primal-feasible basis of original variables when one is
/// given; falls back to a cold start if the hint is singular or infeasible.
pub fn solve_lp_from(lp: &LinearProgram, hint: Option<&[usize]>) -> Result<LpSolution> {
    lp.validate()?;
    let m = lp.a.nrows();
    let n = lp.n_vars();
    // Slacks turn every row into an equality.
    let n_slack = lp.kinds.iter().filter(|k| **k != RowKind::Eq).count();
    let total = n + n_slack + m;
    let mut a = DMatrix::zeros(m, total);
    a.view_mut((0, 0), (m, n)).copy_from(&lp.a);
    let mut lo = lp.lower.clone();
    let mut up = lp.upper.clone();
    let mut s = n;
    for (i, kind) in lp.kinds.iter().enumerate() {
        match kind {
            RowKind::Le => a[(i, s)] = 1.0,
            RowKind::Ge => a[(i, s)] = -1.0,
            RowKind::Eq => continue,
        }
        lo.push(0.0);
        up.push(f64::INFINITY);
        s += 1;
    }
    let mut x = vec![0.0; total];
    let mut state = vec![State::AtLower; total];
    for j in 0..n + n_slack {
        if lo[j].is_finite() {
            x[j] = lo[j];
            state[j] = State::AtLower;
        } else if up[j].is_finite() {
            x[j] = up[j];
            state[j] = State::AtUpper;
        } else {
            x[j] = 0.0;
            state[j] = State::FreeZero;
        }
    }
    let mut resid = lp.rhs.clone();
    for j in 0..n + n_slack {
        if x[j] != 0.0 {
            for i in 0..m {
                resid[i] -= a[(i, j)] * x[j];
            }
        }
    }
    let mut basis = Vec::with_capacity(m);
    for i in 0..m {
        let j = n + n_slack + i;
        a[(i, j)] = if resid[i] >= 0.0 { 1.0 } else { -1.0 };
        x[j] = resid[i].abs();
        lo.push(0.0);
        up.push(f64::INFINITY);
        state[j] = State::Basic;
        basis.push(j);
    }
    let binv = DMatrix::from_fn(m, m, |r, c| if r == c { a[(r, n + n_slack + r)] } else { 0.0 });
    let scale = 1.0 + lp.rhs.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let col_norms = (0..total).map(|j| 1.0 + a.column(j).norm()).collect();
    let mut sx = Simplex {
        m,
        a,
        b: lp.rhs.clone(),
        lo,
        up,
        x,
        state,
        basis,
        binv,
        col_norms,
        since_refactor: 0,
        iterations: 0,
        max_iterations: 50 * (m + total) + 1000,
    };
    let warm = match hint {
        Some(h) if h.len() == m && h.iter().all(|&j| j < n) => sx.try_warm(h, n + n_slack, scale),
        _ => false,
    };
    if !warm {
        phase_one(&mut sx, n + n_slack, total, scale)?;
    }
    let mut phase2 = vec![0.0; total];
    phase2[..n].copy_from_slice(&lp.c);
    if !sx.optimize(&phase2)? {
        return Err(Error::LpUnbounded);
    }
    sx.refactor()?;
    // A final pass after refactoring guards against drift in the product-form inverse.
    if !sx.optimize(&phase2)? {
        return Err(Error::LpUnbounded);
    }
    let xs: Vec<f64> = sx.x[..n].to_vec();
    let value = lp.c.iter().zip(&xs).map(|(c, v)| c * v).sum();
    let duals = sx.duals(&phase2);
    let basis = sx.basis.iter().all(|&j| j < n).then(|| sx.basis.clone());
    Ok(LpSolution {
        value,
        x: xs,
        duals,
        iterations: sx.iterations,
        basis,
    })
}

fn phase_one(sx: &mut Simplex, first_artificial: usize, total: usize, scale: f64) -> Result<()> {
    let mut phase1 = vec![0.0; total];
    for c in phase1.iter_mut().skip(first_artificial) {
        *c = 1.0;
    }
    sx.optimize(&phase1)?;
    sx.refactor()?;
    let infeas: f64 = (first_artificial..total).map(|j| sx.x[j].abs()).sum();
    if infeas > 1e-7 * scale {
        return Err(Error::LpInfeasible);
    }
    for j in first_artificial..total {
        sx.up[j] = 0.0;
        if sx.state[j] != State::Basic {
            sx.x[j] = 0.0;
            sx.state[j] = State::AtLower;
        }
    }
    Ok(())
}
