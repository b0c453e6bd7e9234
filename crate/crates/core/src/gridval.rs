//! Adaptive-grid validation of `S̄` and sublevel-annulus certification on the grid.

use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::Domain;
use crate::error::{Error, Result};
use crate::levels::{level_cap, search_levels, LevelSearchSettings};
use crate::poly::{CompiledPoly, PowerTable, SparsePoly};
use crate::roa::{Certificate, GridSummary, ValidatorKind};
use crate::validity::ValiditySystem;

const ROUNDOFF: f64 = 64.0 * f64::EPSILON;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Validated,
    Refined,
    Failed,
    Unknown,
}

impl CellStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CellStatus::Validated => "validated",
            CellStatus::Refined => "refined",
            CellStatus::Failed => "failed",
            CellStatus::Unknown => "unknown",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Certified,
    Undecided,
}

/// Axis-aligned cube `[x, x + δ]ⁿ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub corner: Vec<f64>,
    pub side: f64,
    pub status: CellStatus,
    /// Refinement depth below the root side.
    pub level: u32,
    /// Corner in units of the minimal side, counted from the domain's lower corner.
    pub coords: Vec<i64>,
}

impl Cell {
    pub fn new(corner: Vec<f64>, side: f64) -> Self {
        let n = corner.len();
        Cell { corner, side, status: CellStatus::Unknown, level: 0, coords: vec![0; n] }
    }

    pub fn dim(&self) -> usize {
        self.corner.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.corner
    }

    pub fn hi(&self) -> Vec<f64> {
        self.corner.iter().map(|c| c + self.side).collect()
    }

    pub fn vertices(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..1usize << n)
            .map(|m| {
                (0..n)
                    .map(|j| self.corner[j] + if m >> j & 1 == 1 { self.side } else { 0.0 })
                    .collect()
            })
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(&self.corner)
            .all(|(xi, c)| *xi >= *c && *xi <= c + self.side)
    }
}

/// Upper bound of `c·x^α` over the box `[lo, hi]`, using exact interval powers per axis.
pub fn monomial_box_max(c: f64, exps: &[u32], lo: &[f64], hi: &[f64]) -> f64 {
    let (mut a, mut b) = (1.0f64, 1.0f64);
    for (j, &k) in exps.iter().enumerate() {
        if k == 0 {
            continue;
        }
        let (l, h) = (lo[j], hi[j]);
        let (pl, ph) = (l.powi(k as i32), h.powi(k as i32));
        let (il, ih) = if k % 2 == 1 || l >= 0.0 {
            (pl.min(ph), pl.max(ph))
        } else if h <= 0.0 {
            (ph, pl)
        } else {
            (0.0, pl.max(ph))
        };
        let cands = [a * il, a * ih, b * il, b * ih];
        a = cands.iter().copied().fold(f64::INFINITY, f64::min);
        b = cands.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    }
    if c >= 0.0 {
        c * b
    } else {
        c * a
    }
}

/// `Σ_α max_box c_α x^α`, an upper bound of `p` over the box.
pub fn box_upper_bound(p: &CompiledPoly, lo: &[f64], hi: &[f64]) -> f64 {
    let mut s = 0.0;
    let mut scale = 0.0;
    for i in 0..p.n_terms() {
        let (e, c) = p.term(i);
        let m = monomial_box_max(c, e, lo, hi);
        s += m;
        scale += m.abs();
    }
    s + ROUNDOFF * scale
}

fn squared_gradient_norm(p: &SparsePoly) -> SparsePoly {
    p.gradient()
        .iter()
        .fold(SparsePoly::zero(p.dim()), |acc, g| &acc + &(g * g))
}

/// Upper bound of `‖∇p‖` over the box.
pub fn gradient_norm_bound(sq_grad: &CompiledPoly, lo: &[f64], hi: &[f64]) -> f64 {
    box_upper_bound(sq_grad, lo, hi).max(0.0).sqrt()
}

/// Precomputed data for repeated cell checks against one validity system.
#[derive(Clone, Debug)]
pub struct CellValidator {
    dim: usize,
    degree: u32,
    lie: CompiledPoly,
    weighted: Vec<CompiledPoly>,
    /// `(pattern signs over `weighted`, compiled ‖∇R_r‖²)` per distinct pattern.
    patterns: Vec<(Vec<f64>, CompiledPoly)>,
}

impl CellValidator {
    pub fn new(vs: &ValiditySystem) -> Self {
        let n = vs.dim();
        let free: Vec<usize> = (0..n).filter(|&j| !vs.weighted[j].is_zero()).collect();
        let patterns = vs
            .distinct_patterns()
            .into_iter()
            .map(|r| {
                let signs = free
                    .iter()
                    .map(|&j| if r >> j & 1 == 1 { -1.0 } else { 1.0 })
                    .collect();
                (signs, squared_gradient_norm(&vs.r[r]).compile())
            })
            .collect();
        let weighted: Vec<CompiledPoly> = free.iter().map(|&j| vs.weighted[j].compile()).collect();
        let degree = weighted.iter().map(|w| w.degree()).chain([vs.lie.degree()]).max().unwrap_or(0);
        CellValidator { dim: n, degree, lie: vs.lie.compile(), weighted, patterns }
    }

    /// Worst-case criterion `max_v R_r(v) + (√n δ/2)·max‖∇R_r‖ < 0` for every pattern.
    pub fn validate(&self, lo: &[f64], side: f64) -> Verdict {
        match self.classify(lo, side) {
            Outcome::Certified => Verdict::Certified,
            _ => Verdict::Undecided,
        }
    }

    /// Like [`Self::validate`], but also recognizes cells on which some `R_r` is positive
    /// throughout, which no refinement can certify.
    fn classify(&self, lo: &[f64], side: f64) -> Outcome {
        let n = self.dim;
        let hi: Vec<f64> = lo.iter().map(|c| c + side).collect();
        let np = self.patterns.len();
        let mut vmax = vec![f64::NEG_INFINITY; np];
        let mut vmin = vec![f64::INFINITY; np];
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; self.weighted.len()];
        for m in 0..1usize << n {
            for j in 0..n {
                x[j] = if m >> j & 1 == 1 { hi[j] } else { lo[j] };
            }
            let t = PowerTable::new(&x, self.degree);
            let lie = self.lie.eval_with(&t);
            let mut slack = self.lie.abs_eval_with(&t);
            for (k, wk) in self.weighted.iter().enumerate() {
                w[k] = wk.eval_with(&t);
                slack += wk.abs_eval_with(&t);
            }
            let slack = ROUNDOFF * slack;
            for (p, (signs, _)) in self.patterns.iter().enumerate() {
                let r = lie + signs.iter().zip(&w).map(|(s, v)| s * v).sum::<f64>();
                vmax[p] = vmax[p].max(r + slack);
                vmin[p] = vmin[p].min(r - slack);
            }
        }
        let h = (n as f64).sqrt() * side / 2.0;
        if vmax.iter().all(|v| *v < 0.0) {
            let ok = self
                .patterns
                .iter()
                .zip(&vmax)
                .all(|((_, g2), v)| v + h * gradient_norm_bound(g2, lo, &hi) < 0.0);
            return if ok { Outcome::Certified } else { Outcome::Undecided };
        }
        let refuted = self
            .patterns
            .iter()
            .zip(&vmin)
            .any(|((_, g2), v)| *v > 0.0 && v - h * gradient_norm_bound(g2, lo, &hi) > 0.0);
        if refuted {
            Outcome::Refuted
        } else {
            Outcome::Undecided
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Outcome {
    Certified,
    Undecided,
    Refuted,
}

/// Single-cell check; [`build_grid`] reuses one [`CellValidator`] instead.
pub fn validate_cell(vs: &ValiditySystem, cell: &Cell) -> Verdict {
    CellValidator::new(vs).validate(&cell.corner, cell.side)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSettings {
    /// Root side; defaults to the shortest domain side over 16.
    pub delta0: Option<f64>,
    /// Minimal side; defaults to `δ₀/64`.
    pub delta_min: Option<f64>,
    /// Sample gridlines per axis on each face for the neighbor test.
    pub boundary_lines: usize,
}

impl Default for GridSettings {
    fn default() -> Self {
        GridSettings { delta0: None, delta_min: None, boundary_lines: 5 }
    }
}

/// Leaf cells of the subdivision, each validated or failed.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdaptiveGrid {
    pub cells: Vec<Cell>,
    pub validated: Vec<usize>,
    pub delta0: f64,
    pub delta_min: f64,
    pub max_level: u32,
    pub domain: Domain,
    #[serde(skip)]
    index: HashMap<(u32, Vec<i64>), usize>,
}

fn as_integer(x: f64, what: &str) -> Result<i64> {
    let r = x.round();
    if (x - r).abs() > 1e-9 * x.abs().max(1.0) || r < 1.0 {
        return Err(Error::InvalidArgument(format!("{what} must be a positive integer, got {x}")));
    }
    Ok(r as i64)
}

/// Subdivides undecided cells into `2ⁿ` children until they validate or reach `δ_min`.
/// Cells on which some `R_r` is provably positive everywhere fail without refinement.
pub fn build_grid(vs: &ValiditySystem, settings: &GridSettings) -> Result<AdaptiveGrid> {
    let domain = vs.domain.clone();
    let n = domain.dim();
    if n == 0 || n > 3 {
        return Err(Error::InvalidArgument(format!("grid validation supports 1 ≤ n ≤ 3, got {n}")));
    }
    let sides: Vec<f64> = (0..n).map(|j| domain.hi[j] - domain.lo[j]).collect();
    let delta0 = settings
        .delta0
        .unwrap_or_else(|| sides.iter().copied().fold(f64::INFINITY, f64::min) / 16.0);
    let delta_min = settings.delta_min.unwrap_or(delta0 / 64.0);
    if !(delta0 > 0.0) || !(delta_min > 0.0) || delta_min > delta0 {
        return Err(Error::InvalidArgument("need 0 < δ_min ≤ δ₀".into()));
    }
    let ratio = as_integer(delta0 / delta_min, "δ₀/δ_min")?;
    if ratio & (ratio - 1) != 0 {
        return Err(Error::InvalidArgument("δ₀/δ_min must be a power of two".into()));
    }
    let max_level = ratio.trailing_zeros();
    let roots: Vec<i64> = sides
        .iter()
        .map(|s| as_integer(s / delta0, "domain side / δ₀"))
        .collect::<Result<_>>()?;

    let validator = CellValidator::new(vs);
    let unit = |level: u32| 1i64 << (max_level - level);
    let corner_of = |coords: &[i64]| -> Vec<f64> {
        coords
            .iter()
            .zip(&domain.lo)
            .map(|(&c, lo)| lo + c as f64 * delta_min)
            .collect()
    };

    let mut work: Vec<Vec<i64>> = vec![vec![]];
    for &m in &roots {
        work = work
            .into_iter()
            .flat_map(|p| {
                (0..m).map(move |k| {
                    let mut q = p.clone();
                    q.push(k * ratio);
                    q
                })
            })
            .collect();
    }

    let mut cells = Vec::new();
    for level in 0..=max_level {
        let side = delta0 / (1u64 << level) as f64;
        let verdicts: Vec<Outcome> = work
            .par_iter()
            .map(|c| validator.classify(&corner_of(c), side))
            .collect();
        let mut next = Vec::new();
        for (coords, verdict) in work.into_iter().zip(verdicts) {
            let status = match verdict {
                Outcome::Certified => CellStatus::Validated,
                Outcome::Refuted => CellStatus::Failed,
                Outcome::Undecided if level == max_level => CellStatus::Failed,
                Outcome::Undecided => {
                    let half = unit(level + 1);
                    for m in 0..1usize << n {
                        next.push(
                            (0..n)
                                .map(|j| coords[j] + if m >> j & 1 == 1 { half } else { 0 })
                                .collect(),
                        );
                    }
                    continue;
                }
            };
            cells.push(Cell { corner: corner_of(&coords), side, status, level, coords });
        }
        work = next;
    }
    let mut grid = AdaptiveGrid {
        cells,
        validated: Vec::new(),
        delta0,
        delta_min,
        max_level,
        domain,
        index: HashMap::new(),
    };
    grid.reindex();
    Ok(grid)
}

impl AdaptiveGrid {
    fn reindex(&mut self) {
        self.index = self
            .cells
            .iter()
            .enumerate()
            .map(|(i, c)| ((c.level, c.coords.clone()), i))
            .collect();
        self.validated = self
            .cells
            .iter()
            .enumerate()
            .filter(|(_, c)| c.status == CellStatus::Validated)
            .map(|(i, _)| i)
            .collect();
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn failed(&self) -> usize {
        self.cells.iter().filter(|c| c.status == CellStatus::Failed).count()
    }

    pub fn summary(&self) -> GridSummary {
        GridSummary {
            leaves: self.cells.len(),
            validated: self.validated.len(),
            failed: self.failed(),
            delta0: self.delta0,
            delta_min: self.delta_min,
        }
    }

    /// Leaf containing a point, if the point is in the domain.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        if !self.domain.contains(x) {
            return None;
        }
        let total = |j: usize| ((self.domain.hi[j] - self.domain.lo[j]) / self.delta_min).round() as i64;
        let fine: Vec<i64> = x
            .iter()
            .enumerate()
            .map(|(j, xi)| (((xi - self.domain.lo[j]) / self.delta_min).floor() as i64).clamp(0, total(j) - 1))
            .collect();
        (0..=self.max_level).rev().find_map(|level| {
            let u = 1i64 << (self.max_level - level);
            let key: Vec<i64> = fine.iter().map(|c| c.div_euclid(u) * u).collect();
            self.index.get(&(level, key)).copied()
        })
    }

    fn leaf_containing(&self, level: u32, coords: &[i64]) -> Option<usize> {
        (0..=level).rev().find_map(|l| {
            let u = 1i64 << (self.max_level - l);
            let key: Vec<i64> = coords.iter().map(|c| c.div_euclid(u) * u).collect();
            self.index.get(&(l, key)).copied()
        })
    }

    /// Leaves inside the box `(level, coords)` that touch its face `x_axis = coords[axis] + offset`.
    fn face_walk(&self, level: u32, coords: &[i64], axis: usize, far: bool, out: &mut Vec<usize>) {
        if let Some(&i) = self.index.get(&(level, coords.to_vec())) {
            out.push(i);
            return;
        }
        if level >= self.max_level {
            return;
        }
        let half = 1i64 << (self.max_level - level - 1);
        let n = coords.len();
        for m in 0..1usize << n {
            let upper = m >> axis & 1 == 1;
            if upper != far {
                continue;
            }
            let child: Vec<i64> = (0..n)
                .map(|j| coords[j] + if m >> j & 1 == 1 { half } else { 0 })
                .collect();
            self.face_walk(level + 1, &child, axis, far, out);
        }
    }

    /// Leaves sharing an `(n−1)`-face with each leaf.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let n = self.dim();
        let totals: Vec<i64> = (0..n)
            .map(|j| ((self.domain.hi[j] - self.domain.lo[j]) / self.delta_min).round() as i64)
            .collect();
        self.cells
            .par_iter()
            .map(|c| {
                let size = 1i64 << (self.max_level - c.level);
                let mut out = Vec::new();
                for axis in 0..n {
                    for dir in [-1i64, 1] {
                        let mut q = c.coords.clone();
                        q[axis] += dir * size;
                        if q[axis] < 0 || q[axis] >= totals[axis] {
                            continue;
                        }
                        match self.leaf_containing(c.level, &q) {
                            Some(i) => out.push(i),
                            None => self.face_walk(c.level, &q, axis, dir < 0, &mut out),
                        }
                    }
                }
                out.sort_unstable();
                out.dedup();
                out
            })
            .collect()
    }

    /// CSV with columns `x1,…,xn,delta,status`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (1..=self.dim()).map(|j| format!("x{j}")).collect();
        header.push("delta".into());
        header.push("status".into());
        wr.write_record(&header)?;
        for c in &self.cells {
            let mut row: Vec<String> = c.corner.iter().map(|x| format!("{x:e}")).collect();
            row.push(format!("{:e}", c.side));
            row.push(c.status.as_str().into());
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Parses the output of [`Self::write_csv`]; the domain and `δ_min` are supplied by the caller.
    pub fn read_csv<R: std::io::Read>(r: R, domain: Domain, delta0: f64, delta_min: f64) -> Result<Self> {
        let n = domain.dim();
        let mut rd = csv::Reader::from_reader(r);
        let max_level = as_integer(delta0 / delta_min, "δ₀/δ_min")?.trailing_zeros();
        let mut cells = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let bad = |m: &str| Error::InvalidArgument(format!("grid csv: {m}"));
            if rec.len() != n + 2 {
                return Err(bad("wrong column count"));
            }
            let num = |k: usize| rec[k].parse::<f64>().map_err(|_| bad("bad number"));
            let corner: Vec<f64> = (0..n).map(num).collect::<Result<_>>()?;
            let side = num(n)?;
            let status = match &rec[n + 1] {
                "validated" => CellStatus::Validated,
                "refined" => CellStatus::Refined,
                "failed" => CellStatus::Failed,
                "unknown" => CellStatus::Unknown,
                _ => return Err(bad("bad status")),
            };
            let level = as_integer(delta0 / side, "δ₀/δ")?.trailing_zeros();
            let coords = corner
                .iter()
                .zip(&domain.lo)
                .map(|(c, lo)| ((c - lo) / delta_min).round() as i64)
                .collect();
            cells.push(Cell { corner, side, status, level, coords });
        }
        let mut g = AdaptiveGrid {
            cells,
            validated: Vec::new(),
            delta0,
            delta_min,
            max_level,
            domain,
            index: HashMap::new(),
        };
        g.reindex();
        Ok(g)
    }
}

/// Per-leaf values of `V` used by the level tests.
pub struct LevelIndex<'g> {
    grid: &'g AdaptiveGrid,
    vmin: Vec<f64>,
    vmax: Vec<f64>,
    /// `fill distance · max‖∇V‖` per leaf.
    reach: Vec<f64>,
    /// Sorted values of `V` on the face sample points per leaf.
    samples: Vec<Vec<f64>>,
    neighbors: Vec<Vec<usize>>,
}

fn face_points(cell: &Cell, lines: usize) -> Vec<Vec<f64>> {
    let n = cell.dim();
    let lines = lines.max(2);
    let step = cell.side / (lines - 1) as f64;
    let mut out = Vec::new();
    for axis in 0..n {
        for far in [false, true] {
            let others: Vec<usize> = (0..n).filter(|&j| j != axis).collect();
            let count = lines.pow(others.len() as u32);
            for mut k in 0..count {
                let mut x = cell.corner.clone();
                if far {
                    x[axis] += cell.side;
                }
                for &j in &others {
                    x[j] += (k % lines) as f64 * step;
                    k /= lines;
                }
                out.push(x);
            }
        }
    }
    out
}

impl<'g> LevelIndex<'g> {
    pub fn new(grid: &'g AdaptiveGrid, v: &SparsePoly, lines: usize) -> Self {
        let n = grid.dim();
        let cv = v.compile();
        let g2 = squared_gradient_norm(v).compile();
        let lines = lines.max(2);
        let fill_ratio = ((n - 1) as f64).sqrt() / (2.0 * (lines - 1) as f64);
        let per: Vec<(f64, f64, f64, Vec<f64>)> = grid
            .cells
            .par_iter()
            .map(|c| {
                let vals: Vec<f64> = c.vertices().iter().map(|x| cv.eval(x)).collect();
                let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let reach = fill_ratio * c.side * gradient_norm_bound(&g2, &c.corner, &c.hi());
                let mut s: Vec<f64> = face_points(c, lines).iter().map(|x| cv.eval(x)).collect();
                s.sort_by(f64::total_cmp);
                (lo, hi, reach, s)
            })
            .collect();
        let mut idx = LevelIndex {
            grid,
            vmin: Vec::with_capacity(per.len()),
            vmax: Vec::with_capacity(per.len()),
            reach: Vec::with_capacity(per.len()),
            samples: Vec::with_capacity(per.len()),
            neighbors: grid.neighbors(),
        };
        for (a, b, r, s) in per {
            idx.vmin.push(a);
            idx.vmax.push(b);
            idx.reach.push(r);
            idx.samples.push(s);
        }
        idx
    }

    fn crosses(&self, i: usize, gamma: f64) -> bool {
        self.vmin[i] <= gamma && gamma <= self.vmax[i]
    }

    fn near(&self, i: usize, gamma: f64) -> bool {
        let s = &self.samples[i];
        let k = s.partition_point(|v| *v < gamma);
        let r = self.reach[i];
        (k < s.len() && s[k] - gamma <= r) || (k > 0 && gamma - s[k - 1] <= r)
    }

    /// Vertex-crossing cells plus face neighbors whose boundary samples come within
    /// reach of the level.
    pub fn level_cells(&self, gamma: f64) -> Vec<usize> {
        let mut mark = vec![false; self.vmin.len()];
        let crossing: Vec<usize> = (0..self.vmin.len()).filter(|&i| self.crosses(i, gamma)).collect();
        for &i in &crossing {
            mark[i] = true;
        }
        for &i in &crossing {
            for &j in &self.neighbors[i] {
                if !mark[j] && self.near(j, gamma) {
                    mark[j] = true;
                }
            }
        }
        (0..mark.len()).filter(|&i| mark[i]).collect()
    }

    /// `K_level` for the annulus between the two levels.
    pub fn annulus_cells(&self, gamma1: f64, gamma2: f64) -> Result<Vec<usize>> {
        if !(gamma1 < gamma2) {
            return Err(Error::InvalidArgument(format!("need γ₁ < γ₂, got {gamma1} and {gamma2}")));
        }
        let mut mark = vec![false; self.vmin.len()];
        for i in self.level_cells(gamma1).into_iter().chain(self.level_cells(gamma2)) {
            mark[i] = true;
        }
        for i in 0..mark.len() {
            if self.vmin[i] > gamma1 && self.vmax[i] < gamma2 {
                mark[i] = true;
            }
        }
        Ok((0..mark.len()).filter(|&i| mark[i]).collect())
    }

    /// `K_level ⊆ K_val`.
    pub fn feasible(&self, gamma1: f64, gamma2: f64) -> bool {
        match self.annulus_cells(gamma1, gamma2) {
            Ok(k) => k.iter().all(|&i| self.grid.cells[i].status == CellStatus::Validated),
            Err(_) => false,
        }
    }
}

pub fn level_cells(grid: &AdaptiveGrid, v: &SparsePoly, gamma: f64, lines: usize) -> Vec<usize> {
    LevelIndex::new(grid, v, lines).level_cells(gamma)
}

pub fn annulus_cells(grid: &AdaptiveGrid, v: &SparsePoly, gamma1: f64, gamma2: f64) -> Result<Vec<usize>> {
    LevelIndex::new(grid, v, GridSettings::default().boundary_lines).annulus_cells(gamma1, gamma2)
}

/// Level search on a built grid with `K_level ⊆ K_val` as the oracle.
pub fn certify_levels_grid(
    grid: &AdaptiveGrid,
    vs: &ValiditySystem,
    lines: usize,
    settings: &LevelSearchSettings,
) -> Certificate {
    let idx = LevelIndex::new(grid, &vs.v, lines);
    let cap = level_cap(&vs.v, &grid.domain, settings.boundary_per_face, settings.cap_slack, settings.seed);
    let search = search_levels(cap, settings, |g1, g2| idx.feasible(g1, g2));
    let mut cert = Certificate::from_search(search, ValidatorKind::Grid, vs.v.clone(), vs.models.clone());
    cert.diagnostics.grid = Some(grid.summary());
    cert
}
