//! Sparse multivariate polynomials with real coefficients.
//!
//! Terms are kept in graded-lexicographic order: total degree ascending, and
//! within one degree the exponent of `x1` descending, then `x2`, and so on
//! (`1, x, y, x², xy, y², …`). Every constructor and arithmetic routine prunes
//! coefficients whose magnitude falls below `1e-14 · max|coeff|`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Relative pruning threshold applied after every operation.
pub const PRUNE_REL: f64 = 1e-14;

/// Exponent tuple `α ∈ ℕⁿ` of a monomial `x^α`.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex(exponents)
    }

    pub fn zeros(dim: usize) -> Self {
        MultiIndex(vec![0; dim])
    }

    /// The exponent of the single variable `x_axis`.
    pub fn unit(dim: usize, axis: usize) -> Self {
        let mut e = vec![0; dim];
        e[axis] = 1;
        MultiIndex(e)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn plus(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// `self − other` when every component stays nonnegative.
    pub fn minus(&self, other: &MultiIndex) -> Option<MultiIndex> {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.checked_sub(*b))
            .collect::<Option<Vec<_>>>()
            .map(MultiIndex)
    }

    /// Evaluates `x^α`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .map(|(&a, &xi)| xi.powi(a as i32))
            .product()
    }

    /// All exponent tuples of total degree at most `degree`, in graded-lex order.
    pub fn all_up_to(dim: usize, degree: u32) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        for d in 0..=degree {
            let mut cur = vec![0u32; dim];
            push_degree(dim, d, 0, &mut cur, &mut out);
        }
        out
    }
}

fn push_degree(dim: usize, remaining: u32, axis: usize, cur: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
    if dim == 0 {
        if remaining == 0 {
            out.push(MultiIndex(Vec::new()));
        }
        return;
    }
    if axis == dim - 1 {
        cur[axis] = remaining;
        out.push(MultiIndex(cur.clone()));
        cur[axis] = 0;
        return;
    }
    for e in (0..=remaining).rev() {
        cur[axis] = e;
        push_degree(dim, remaining - e, axis + 1, cur, out);
    }
    cur[axis] = 0;
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A polynomial `Σ c_α x^α` in `dim` variables.
#[derive(Clone, PartialEq, Debug)]
pub struct SparsePoly {
    dim: usize,
    terms: BTreeMap<MultiIndex, f64>,
}

impl SparsePoly {
    pub fn zero(dim: usize) -> Self {
        SparsePoly {
            dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::monomial(MultiIndex::zeros(dim), c)
    }

    /// The coordinate function `x_axis`.
    pub fn var(dim: usize, axis: usize) -> Self {
        Self::monomial(MultiIndex::unit(dim, axis), 1.0)
    }

    pub fn monomial(alpha: MultiIndex, c: f64) -> Self {
        let dim = alpha.dim();
        let mut terms = BTreeMap::new();
        if c != 0.0 {
            terms.insert(alpha, c);
        }
        SparsePoly { dim, terms }
    }

    /// Collects like terms and prunes. Panics if an exponent tuple has the wrong length.
    pub fn from_terms<I>(dim: usize, terms: I) -> Self
    where
        I: IntoIterator<Item = (MultiIndex, f64)>,
    {
        let mut map: BTreeMap<MultiIndex, f64> = BTreeMap::new();
        for (alpha, c) in terms {
            assert_eq!(alpha.dim(), dim, "exponent length does not match dimension");
            *map.entry(alpha).or_insert(0.0) += c;
        }
        let mut p = SparsePoly { dim, terms: map };
        p.prune();
        p
    }

    /// Fallible variant of [`SparsePoly::from_terms`].
    pub fn try_from_terms(dim: usize, terms: Vec<(MultiIndex, f64)>) -> Result<Self> {
        for (alpha, c) in &terms {
            if alpha.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: alpha.dim(),
                });
            }
            if !c.is_finite() {
                return Err(Error::NonFinite(format!("coefficient of {alpha:?}")));
            }
        }
        Ok(Self::from_terms(dim, terms))
    }

    fn prune(&mut self) {
        let max = self.max_abs_coeff();
        let thresh = PRUNE_REL * max;
        self.terms.retain(|_, c| *c != 0.0 && c.abs() >= thresh);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; the zero polynomial has degree 0.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(MultiIndex::degree).max().unwrap_or(0)
    }

    /// Smallest total degree among the stored terms (0 for the zero polynomial).
    pub fn min_degree(&self) -> u32 {
        self.terms.keys().map(MultiIndex::degree).min().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, f64)> + '_ {
        self.terms.iter().map(|(a, c)| (a, *c))
    }

    pub fn coeff(&self, alpha: &MultiIndex) -> f64 {
        self.terms.get(alpha).copied().unwrap_or(0.0)
    }

    pub fn constant_term(&self) -> f64 {
        self.coeff(&MultiIndex::zeros(self.dim))
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    fn check_dim(&self, other: &SparsePoly) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        Ok(())
    }

    pub fn checked_add(&self, other: &SparsePoly) -> Result<SparsePoly> {
        self.check_dim(other)?;
        let mut terms = self.terms.clone();
        for (a, c) in &other.terms {
            *terms.entry(a.clone()).or_insert(0.0) += c;
        }
        let mut p = SparsePoly {
            dim: self.dim,
            terms,
        };
        p.prune();
        Ok(p)
    }

    pub fn checked_sub(&self, other: &SparsePoly) -> Result<SparsePoly> {
        self.checked_add(&other.scale(-1.0))
    }

    pub fn checked_mul(&self, other: &SparsePoly) -> Result<SparsePoly> {
        self.check_dim(other)?;
        let mut terms: BTreeMap<MultiIndex, f64> = BTreeMap::new();
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                *terms.entry(a.plus(b)).or_insert(0.0) += ca * cb;
            }
        }
        let mut p = SparsePoly {
            dim: self.dim,
            terms,
        };
        p.prune();
        Ok(p)
    }

    pub fn scale(&self, s: f64) -> SparsePoly {
        let mut p = SparsePoly {
            dim: self.dim,
            terms: self.terms.iter().map(|(a, c)| (a.clone(), c * s)).collect(),
        };
        p.prune();
        p
    }

    pub fn pow(&self, k: u32) -> SparsePoly {
        let mut acc = SparsePoly::constant(self.dim, 1.0);
        let mut base = self.clone();
        let mut e = k;
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    /// Exact partial derivative `∂p/∂x_axis`.
    pub fn partial(&self, axis: usize) -> Result<SparsePoly> {
        if axis >= self.dim {
            return Err(Error::AxisOutOfRange {
                axis,
                dim: self.dim,
            });
        }
        let terms = self.terms.iter().filter_map(|(a, c)| {
            let e = a.0[axis];
            (e > 0).then(|| {
                let mut b = a.0.clone();
                b[axis] -= 1;
                (MultiIndex(b), c * e as f64)
            })
        });
        Ok(SparsePoly::from_terms(self.dim, terms))
    }

    pub fn gradient(&self) -> Vec<SparsePoly> {
        (0..self.dim)
            .map(|j| self.partial(j).expect("axis in range"))
            .collect()
    }

    /// Drops every term of total degree above `max_degree`.
    pub fn truncate(&self, max_degree: u32) -> SparsePoly {
        SparsePoly {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .filter(|(a, _)| a.degree() <= max_degree)
                .map(|(a, c)| (a.clone(), *c))
                .collect(),
        }
    }

    pub fn checked_eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(self.eval(x))
    }

    /// Evaluates by per-monomial power products. Panics on a dimension mismatch.
    pub fn eval(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim, "point dimension mismatch");
        if self.terms.is_empty() {
            return 0.0;
        }
        let table = PowerTable::new(x, self.degree());
        self.terms
            .iter()
            .map(|(a, c)| c * table.monomial(&a.0))
            .sum()
    }

    /// Returns `q` with `q(x) = p(scale ∘ x + shift)`.
    pub fn affine_substitute(&self, scale: &[f64], shift: &[f64]) -> Result<SparsePoly> {
        if scale.len() != self.dim || shift.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: scale.len().min(shift.len()),
            });
        }
        if let Some(j) = scale.iter().position(|s| *s == 0.0) {
            return Err(Error::InvalidArgument(format!("zero scale on axis {j}")));
        }
        let subs: Vec<SparsePoly> = (0..self.dim)
            .map(|j| {
                SparsePoly::from_terms(
                    self.dim,
                    [
                        (MultiIndex::unit(self.dim, j), scale[j]),
                        (MultiIndex::zeros(self.dim), shift[j]),
                    ],
                )
            })
            .collect();
        self.compose(&subs)
    }

    /// Substitutes `x_j ← subs[j]`; the result lives in the dimension of `subs`.
    pub fn compose(&self, subs: &[SparsePoly]) -> Result<SparsePoly> {
        if subs.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: subs.len(),
            });
        }
        let out_dim = subs.first().map(|s| s.dim).unwrap_or(0);
        if let Some(bad) = subs.iter().find(|s| s.dim != out_dim) {
            return Err(Error::DimensionMismatch {
                expected: out_dim,
                got: bad.dim,
            });
        }
        let mut powers: Vec<Vec<SparsePoly>> = subs
            .iter()
            .map(|s| vec![SparsePoly::constant(out_dim, 1.0), s.clone()])
            .collect();
        let mut acc: BTreeMap<MultiIndex, f64> = BTreeMap::new();
        for (alpha, c) in &self.terms {
            let mut term = SparsePoly::constant(out_dim, *c);
            for (j, &e) in alpha.0.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                while powers[j].len() <= e as usize {
                    let next = &powers[j][powers[j].len() - 1] * &subs[j];
                    powers[j].push(next);
                }
                term = &term * &powers[j][e as usize];
            }
            for (a, v) in term.terms {
                *acc.entry(a).or_insert(0.0) += v;
            }
        }
        let mut p = SparsePoly {
            dim: out_dim,
            terms: acc,
        };
        p.prune();
        Ok(p)
    }

    /// Embeds into a compiled form suited to repeated evaluation.
    pub fn compile(&self) -> CompiledPoly {
        CompiledPoly::new(self)
    }
}

/// `(x₁²+…+xₙ²)^((s+1)/2)`, which equals `‖x‖₂^(s+1)` for odd `s`.
pub fn norm_power_poly(dim: usize, s: u32) -> Result<SparsePoly> {
    if s % 2 == 0 {
        return Err(Error::EvenOrder(s));
    }
    let sq = SparsePoly::from_terms(
        dim,
        (0..dim).map(|j| {
            let mut e = vec![0; dim];
            e[j] = 2;
            (MultiIndex(e), 1.0)
        }),
    );
    Ok(sq.pow(s.div_ceil(2)))
}

/// Powers `x_j^k` for `k ≤ max_degree`, laid out per axis.
pub struct PowerTable {
    stride: usize,
    data: Vec<f64>,
}

impl PowerTable {
    pub fn new(x: &[f64], max_degree: u32) -> Self {
        let stride = max_degree as usize + 1;
        let mut data = vec![1.0; x.len() * stride];
        for (j, &xj) in x.iter().enumerate() {
            let row = &mut data[j * stride..(j + 1) * stride];
            for k in 1..stride {
                row[k] = row[k - 1] * xj;
            }
        }
        PowerTable { stride, data }
    }

    #[inline]
    pub fn get(&self, axis: usize, k: u32) -> f64 {
        self.data[axis * self.stride + k as usize]
    }

    #[inline]
    pub fn monomial(&self, exps: &[u32]) -> f64 {
        exps.iter()
            .enumerate()
            .map(|(j, &e)| self.get(j, e))
            .product()
    }
}

/// Flat term arrays for hot evaluation loops.
#[derive(Clone, Debug)]
pub struct CompiledPoly {
    dim: usize,
    degree: u32,
    exps: Vec<u32>,
    coeffs: Vec<f64>,
}

impl CompiledPoly {
    pub fn new(p: &SparsePoly) -> Self {
        let mut exps = Vec::with_capacity(p.len() * p.dim);
        let mut coeffs = Vec::with_capacity(p.len());
        for (a, c) in p.terms() {
            exps.extend_from_slice(a.exponents());
            coeffs.push(c);
        }
        CompiledPoly {
            dim: p.dim,
            degree: p.degree(),
            exps,
            coeffs,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn n_terms(&self) -> usize {
        self.coeffs.len()
    }

    pub fn term(&self, i: usize) -> (&[u32], f64) {
        (&self.exps[i * self.dim..(i + 1) * self.dim], self.coeffs[i])
    }

    pub fn eval_with(&self, table: &PowerTable) -> f64 {
        let mut s = 0.0;
        for (i, c) in self.coeffs.iter().enumerate() {
            s += c * table.monomial(&self.exps[i * self.dim..(i + 1) * self.dim]);
        }
        s
    }

    /// Sum of `|c_α x^α|`, the scale used for floating-point error allowances.
    pub fn abs_eval_with(&self, table: &PowerTable) -> f64 {
        let mut s = 0.0;
        for (i, c) in self.coeffs.iter().enumerate() {
            s += (c * table.monomial(&self.exps[i * self.dim..(i + 1) * self.dim])).abs();
        }
        s
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        if self.coeffs.is_empty() {
            return 0.0;
        }
        self.eval_with(&PowerTable::new(x, self.degree))
    }
}

impl<'a> Add<&'a SparsePoly> for &'a SparsePoly {
    type Output = SparsePoly;
    fn add(self, rhs: &SparsePoly) -> SparsePoly {
        self.checked_add(rhs).expect("polynomial dimension mismatch")
    }
}

impl<'a> Sub<&'a SparsePoly> for &'a SparsePoly {
    type Output = SparsePoly;
    fn sub(self, rhs: &SparsePoly) -> SparsePoly {
        self.checked_sub(rhs).expect("polynomial dimension mismatch")
    }
}

impl<'a> Mul<&'a SparsePoly> for &'a SparsePoly {
    type Output = SparsePoly;
    fn mul(self, rhs: &SparsePoly) -> SparsePoly {
        self.checked_mul(rhs).expect("polynomial dimension mismatch")
    }
}

impl Neg for &SparsePoly {
    type Output = SparsePoly;
    fn neg(self) -> SparsePoly {
        self.scale(-1.0)
    }
}

impl fmt::Display for SparsePoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (a, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " {} ", if *c < 0.0 { '-' } else { '+' })?;
            } else if *c < 0.0 {
                write!(f, "-")?;
            }
            write!(f, "{}", c.abs())?;
            for (j, e) in a.0.iter().enumerate() {
                match e {
                    0 => {}
                    1 => write!(f, "*x{}", j + 1)?,
                    _ => write!(f, "*x{}^{}", j + 1, e)?,
                }
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct TermJson {
    alpha: Vec<u32>,
    c: f64,
}

#[derive(Serialize, Deserialize)]
struct PolyJson {
    dim: usize,
    terms: Vec<TermJson>,
}

impl Serialize for SparsePoly {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PolyJson {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .map(|(a, c)| TermJson {
                    alpha: a.0.clone(),
                    c: *c,
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SparsePoly {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = PolyJson::deserialize(d)?;
        SparsePoly::try_from_terms(
            raw.dim,
            raw.terms
                .into_iter()
                .map(|t| (MultiIndex(t.alpha), t.c))
                .collect(),
        )
        .map_err(serde::de::Error::custom)
    }
}
