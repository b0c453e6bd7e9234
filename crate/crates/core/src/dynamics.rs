//! Vector fields, domain rescaling, fixed-step integration and the builtin
//! benchmark systems.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{MultiIndex, SparsePoly};

/// Axis-aligned box `[lo₁,hi₁]×…×[loₙ,hiₙ]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Domain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l < h)) {
            return Err(Error::InvalidArgument("domain requires lo < hi on every axis".into()));
        }
        Ok(Domain { lo, hi })
    }

    /// `[-r, r]ⁿ`.
    pub fn symmetric(dim: usize, r: f64) -> Self {
        Domain {
            lo: vec![-r; dim],
            hi: vec![r; dim],
        }
    }

    pub fn unit(dim: usize) -> Self {
        Self::symmetric(dim, 1.0)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (l, h))| *v >= *l && *v <= *h)
    }

    pub fn origin_is_interior(&self) -> bool {
        self.lo.iter().zip(&self.hi).all(|(l, h)| *l < 0.0 && *h > 0.0)
    }

    pub fn diameter(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| (h - l).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).product()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| rng.random_range(*l..=*h))
            .collect()
    }

    /// Points on the boundary faces: `per_face` uniform random points on each of the `2n` faces.
    pub fn boundary_samples<R: Rng + ?Sized>(&self, per_face: usize, rng: &mut R) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut out = Vec::with_capacity(2 * n * per_face);
        for axis in 0..n {
            for side in [self.lo[axis], self.hi[axis]] {
                for _ in 0..per_face {
                    let mut x = self.sample(rng);
                    x[axis] = side;
                    out.push(x);
                }
            }
        }
        out
    }
}

/// A scalar black-box function with an analytic gradient.
pub trait ScalarFn: Send + Sync + fmt::Debug {
    fn eval(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinTerm {
    pub amp: f64,
    pub w: Vec<f64>,
}

/// Closed-form non-polynomial components with exact Maclaurin series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Elementary {
    /// `Σₖ ampₖ · sin(wₖ·x)`.
    SinSum { terms: Vec<SinTerm> },
    /// `amp · u / √(1+u²)` with `u = w·x`.
    Saturation { amp: f64, w: Vec<f64> },
}

fn dot(w: &[f64], x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(a, b)| a * b).sum()
}

fn linear_form(w: &[f64]) -> SparsePoly {
    let n = w.len();
    SparsePoly::from_terms(n, w.iter().enumerate().map(|(j, c)| (MultiIndex::unit(n, j), *c)))
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

impl Elementary {
    pub fn dim(&self) -> usize {
        match self {
            Elementary::SinSum { terms } => terms.first().map(|t| t.w.len()).unwrap_or(0),
            Elementary::Saturation { w, .. } => w.len(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Elementary::SinSum { terms } => terms.iter().map(|t| t.amp * dot(&t.w, x).sin()).sum(),
            Elementary::Saturation { amp, w } => {
                let u = dot(w, x);
                amp * u / (1.0 + u * u).sqrt()
            }
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        match self {
            Elementary::SinSum { terms } => {
                for t in terms {
                    let c = t.amp * dot(&t.w, x).cos();
                    for (gj, wj) in g.iter_mut().zip(&t.w) {
                        *gj += c * wj;
                    }
                }
            }
            Elementary::Saturation { amp, w } => {
                let u = dot(w, x);
                let d = amp * (1.0 + u * u).powf(-1.5);
                for (gj, wj) in g.iter_mut().zip(w) {
                    *gj = d * wj;
                }
            }
        }
        g
    }

    /// Maclaurin polynomial of total order `order`, composed exactly on the linear argument.
    pub fn taylor(&self, order: u32) -> SparsePoly {
        let n = self.dim();
        let mut acc = SparsePoly::zero(n);
        match self {
            Elementary::SinSum { terms } => {
                for t in terms {
                    let u = linear_form(&t.w);
                    let u2 = &u * &u;
                    let mut pw = u.clone();
                    let mut k = 0u32;
                    while 2 * k + 1 <= order {
                        let c = if k % 2 == 0 { 1.0 } else { -1.0 } / factorial(2 * k + 1);
                        acc = &acc + &pw.scale(t.amp * c);
                        pw = &pw * &u2;
                        k += 1;
                    }
                }
            }
            Elementary::Saturation { amp, w } => {
                // u (1+u²)^(-1/2) = Σₖ C(-1/2, k) u^(2k+1)
                let u = linear_form(w);
                let u2 = &u * &u;
                let mut pw = u.clone();
                let mut binom = 1.0;
                let mut k = 0u32;
                while 2 * k + 1 <= order {
                    acc = &acc + &pw.scale(amp * binom);
                    binom *= (-0.5 - k as f64) / (k as f64 + 1.0);
                    pw = &pw * &u2;
                    k += 1;
                }
            }
        }
        acc
    }

    /// The component `y ↦ factor · f(scale ∘ y)`.
    pub fn rescaled(&self, scale: &[f64], factor: f64) -> Elementary {
        let sw = |w: &[f64]| w.iter().zip(scale).map(|(a, s)| a * s).collect::<Vec<_>>();
        match self {
            Elementary::SinSum { terms } => Elementary::SinSum {
                terms: terms
                    .iter()
                    .map(|t| SinTerm {
                        amp: t.amp * factor,
                        w: sw(&t.w),
                    })
                    .collect(),
            },
            Elementary::Saturation { amp, w } => Elementary::Saturation {
                amp: amp * factor,
                w: sw(w),
            },
        }
    }
}

#[derive(Debug)]
struct RescaledFn {
    inner: Arc<dyn ScalarFn>,
    scale: Vec<f64>,
    factor: f64,
}

impl ScalarFn for RescaledFn {
    fn eval(&self, y: &[f64]) -> f64 {
        let x: Vec<f64> = y.iter().zip(&self.scale).map(|(a, s)| a * s).collect();
        self.factor * self.inner.eval(&x)
    }

    fn gradient(&self, y: &[f64]) -> Vec<f64> {
        let x: Vec<f64> = y.iter().zip(&self.scale).map(|(a, s)| a * s).collect();
        self.inner
            .gradient(&x)
            .iter()
            .zip(&self.scale)
            .map(|(g, s)| self.factor * g * s)
            .collect()
    }
}

/// One component `Fᵢ` of a vector field.
#[derive(Clone, Debug)]
pub enum Component {
    Poly(SparsePoly),
    Elementary(Elementary),
    Opaque(Arc<dyn ScalarFn>),
}

impl Component {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Component::Poly(p) => p.eval(x),
            Component::Elementary(e) => e.eval(x),
            Component::Opaque(f) => f.eval(x),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Component::Poly(p) => p.gradient().iter().map(|g| g.eval(x)).collect(),
            Component::Elementary(e) => e.gradient(x),
            Component::Opaque(f) => f.gradient(x),
        }
    }

    pub fn as_poly(&self) -> Option<&SparsePoly> {
        match self {
            Component::Poly(p) => Some(p),
            _ => None,
        }
    }

    fn rescaled(&self, scale: &[f64], factor: f64) -> Result<Component> {
        Ok(match self {
            Component::Poly(p) => {
                Component::Poly(p.affine_substitute(scale, &vec![0.0; scale.len()])?.scale(factor))
            }
            Component::Elementary(e) => Component::Elementary(e.rescaled(scale, factor)),
            Component::Opaque(f) => Component::Opaque(Arc::new(RescaledFn {
                inner: f.clone(),
                scale: scale.to_vec(),
                factor,
            })),
        })
    }
}

/// Serializable description of one component.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentSpec {
    Poly(SparsePoly),
    Elementary(Elementary),
}

/// `ẋ = F(x)` on a box, with an equilibrium at the origin.
#[derive(Clone, Debug)]
pub struct VectorField {
    components: Vec<Component>,
    domain: Domain,
}

/// Pure per-axis scaling `x = D y` taking the unit box onto the original domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub scale: Vec<f64>,
}

impl AffineMap {
    pub fn identity(dim: usize) -> Self {
        AffineMap {
            scale: vec![1.0; dim],
        }
    }

    pub fn to_original(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.scale).map(|(a, s)| a * s).collect()
    }

    pub fn to_rescaled(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.scale).map(|(a, s)| a / s).collect()
    }

    /// `V_orig(x) = V(D⁻¹ x)`.
    pub fn poly_to_original(&self, v: &SparsePoly) -> Result<SparsePoly> {
        let inv: Vec<f64> = self.scale.iter().map(|s| 1.0 / s).collect();
        v.affine_substitute(&inv, &vec![0.0; inv.len()])
    }
}

/// Sampled RK4 trajectory.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub step: f64,
    pub states: Vec<Vec<f64>>,
    pub diverged: bool,
}

impl Trajectory {
    pub fn last(&self) -> &[f64] {
        self.states.last().expect("trajectory holds the initial state")
    }
}

/// How an RK4 run driven by [`VectorField::integrate_until`] ended.
#[derive(Clone, Debug, PartialEq)]
pub enum RunOutcome {
    Stopped { time: f64, state: Vec<f64> },
    Horizon { state: Vec<f64> },
    Diverged { time: f64 },
}

const EQUILIBRIUM_TOL: f64 = 1e-10;

impl VectorField {
    pub fn new(components: Vec<Component>, domain: Domain) -> Result<Self> {
        let n = components.len();
        if domain.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: domain.dim(),
            });
        }
        for c in &components {
            let d = match c {
                Component::Poly(p) => p.dim(),
                Component::Elementary(e) => e.dim(),
                Component::Opaque(_) => n,
            };
            if d != n {
                return Err(Error::DimensionMismatch { expected: n, got: d });
            }
        }
        let f = VectorField { components, domain };
        let f0 = f.eval(&vec![0.0; n]);
        if let Some(v) = f0.iter().find(|v| v.abs() > EQUILIBRIUM_TOL) {
            return Err(Error::InvalidArgument(format!(
                "origin is not an equilibrium (|F(0)| component {v:.3e})"
            )));
        }
        Ok(f)
    }

    pub fn polynomial(components: Vec<SparsePoly>, domain: Domain) -> Result<Self> {
        Self::new(components.into_iter().map(Component::Poly).collect(), domain)
    }

    pub fn from_specs(specs: Vec<ComponentSpec>, domain: Domain) -> Result<Self> {
        Self::new(
            specs
                .into_iter()
                .map(|s| match s {
                    ComponentSpec::Poly(p) => Component::Poly(p),
                    ComponentSpec::Elementary(e) => Component::Elementary(e),
                })
                .collect(),
            domain,
        )
    }

    /// Specs for serialization; opaque components cannot be described.
    pub fn to_specs(&self) -> Result<Vec<ComponentSpec>> {
        self.components
            .iter()
            .enumerate()
            .map(|(i, c)| match c {
                Component::Poly(p) => Ok(ComponentSpec::Poly(p.clone())),
                Component::Elementary(e) => Ok(ComponentSpec::Elementary(e.clone())),
                Component::Opaque(_) => Err(Error::InvalidArgument(format!(
                    "component {i} is an opaque function and has no serial form"
                ))),
            })
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &Component {
        &self.components[i]
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.components.iter().map(|c| c.eval(x)).collect()
    }

    pub fn is_polynomial(&self) -> bool {
        self.components.iter().all(|c| matches!(c, Component::Poly(_)))
    }

    pub fn polynomial_components(&self) -> Result<Vec<SparsePoly>> {
        self.components
            .iter()
            .enumerate()
            .map(|(i, c)| c.as_poly().cloned().ok_or(Error::NonPolynomial(i)))
            .collect()
    }

    /// `J_F(0)`: exact for polynomial components, analytic for elementary ones,
    /// central differences (step 1e-6) for opaque ones.
    pub fn jacobian_at_origin(&self) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let zero = vec![0.0; n];
        let mut j = DMatrix::zeros(n, n);
        for (i, c) in self.components.iter().enumerate() {
            let row: Vec<f64> = match c {
                Component::Poly(p) => (0..n).map(|k| p.coeff(&MultiIndex::unit(n, k))).collect(),
                Component::Elementary(e) => e.gradient(&zero),
                Component::Opaque(f) => {
                    let h = 1e-6;
                    (0..n)
                        .map(|k| {
                            let mut xp = zero.clone();
                            let mut xm = zero.clone();
                            xp[k] = h;
                            xm[k] = -h;
                            (f.eval(&xp) - f.eval(&xm)) / (2.0 * h)
                        })
                        .collect()
                }
            };
            for (k, v) in row.into_iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!("Jacobian entry ({i},{k})")));
                }
                j[(i, k)] = v;
            }
        }
        Ok(j)
    }

    /// `G(y) = D⁻¹ F(D y)` on the unit box, with `Dᵢᵢ = max(|loᵢ|, |hiᵢ|)`.
    pub fn rescale_to_unit_box(&self) -> Result<(VectorField, AffineMap)> {
        if !self.domain.origin_is_interior() {
            return Err(Error::OriginNotInterior);
        }
        let scale: Vec<f64> = self
            .domain
            .lo
            .iter()
            .zip(&self.domain.hi)
            .map(|(l, h)| l.abs().max(h.abs()))
            .collect();
        let components = self
            .components
            .iter()
            .enumerate()
            .map(|(i, c)| c.rescaled(&scale, 1.0 / scale[i]))
            .collect::<Result<Vec<_>>>()?;
        let field = VectorField {
            components,
            domain: Domain::unit(self.dim()),
        };
        Ok((field, AffineMap { scale }))
    }

    fn rk4_step(&self, x: &[f64], h: f64, buf: &mut [Vec<f64>; 2]) -> Vec<f64> {
        let n = x.len();
        let k1 = self.eval(x);
        for i in 0..n {
            buf[0][i] = x[i] + 0.5 * h * k1[i];
        }
        let k2 = self.eval(&buf[0]);
        for i in 0..n {
            buf[0][i] = x[i] + 0.5 * h * k2[i];
        }
        let k3 = self.eval(&buf[0]);
        for i in 0..n {
            buf[1][i] = x[i] + h * k3[i];
        }
        let k4 = self.eval(&buf[1]);
        (0..n)
            .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect()
    }

    fn escape_radius(&self) -> f64 {
        10.0 * self.domain.diameter()
    }

    /// Classical RK4 with fixed step `h` up to time `horizon`.
    pub fn integrate(&self, x0: &[f64], horizon: f64, h: f64) -> Result<Trajectory> {
        self.check_run(x0, horizon, h)?;
        let steps = (horizon / h).round() as usize;
        let mut states = Vec::with_capacity(steps + 1);
        states.push(x0.to_vec());
        let mut buf = [vec![0.0; x0.len()], vec![0.0; x0.len()]];
        let r = self.escape_radius();
        let mut diverged = false;
        for _ in 0..steps {
            let next = self.rk4_step(states.last().unwrap(), h, &mut buf);
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("RK4 state".into()));
            }
            let norm = next.iter().map(|v| v * v).sum::<f64>().sqrt();
            states.push(next);
            if norm > r {
                diverged = true;
                break;
            }
        }
        Ok(Trajectory {
            step: h,
            states,
            diverged,
        })
    }

    /// RK4 that stops as soon as `stop(t, x)` holds, without storing the path.
    pub fn integrate_until<S>(&self, x0: &[f64], horizon: f64, h: f64, mut stop: S) -> Result<RunOutcome>
    where
        S: FnMut(f64, &[f64]) -> bool,
    {
        self.check_run(x0, horizon, h)?;
        let steps = (horizon / h).round() as usize;
        let mut x = x0.to_vec();
        let mut buf = [vec![0.0; x0.len()], vec![0.0; x0.len()]];
        let r = self.escape_radius();
        if stop(0.0, &x) {
            return Ok(RunOutcome::Stopped { time: 0.0, state: x });
        }
        for k in 1..=steps {
            x = self.rk4_step(&x, h, &mut buf);
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("RK4 state".into()));
            }
            let t = k as f64 * h;
            if x.iter().map(|v| v * v).sum::<f64>().sqrt() > r {
                return Ok(RunOutcome::Diverged { time: t });
            }
            if stop(t, &x) {
                return Ok(RunOutcome::Stopped { time: t, state: x });
            }
        }
        Ok(RunOutcome::Horizon { state: x })
    }

    fn check_run(&self, x0: &[f64], horizon: f64, h: f64) -> Result<()> {
        if x0.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x0.len(),
            });
        }
        if !(h > 0.0) || horizon < h {
            return Err(Error::InvalidArgument("integration needs h > 0 and T >= h".into()));
        }
        Ok(())
    }
}

/// Named benchmark systems.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Builtin {
    /// `ẋ = y, ẏ = −2x − y + x³/3` on `[−5,5]²`.
    Example1,
    /// `ẋ = K sin(x−y) − sin x, ẏ = K sin(y−x) − sin y` on `[−3.5,3.5]²`.
    Example2 {
        #[serde(default = "default_coupling")]
        k: f64,
    },
    /// `ẋ = y, ẏ = −(x+y)/√(1+(x+y)²)` on `[−4,4]²`.
    Example3,
    /// `ẋᵢ = xᵢ((Ax)ᵢ − xᵀAx)` on `[0,1]ⁿ`; rows of `a` form the payoff matrix.
    Replicator { a: Vec<Vec<f64>> },
}

fn default_coupling() -> f64 {
    0.2
}

/// Looks up a builtin by name with its default parameters.
pub fn builtin_system(name: &str) -> Result<VectorField> {
    let b = match name {
        "example1" => Builtin::Example1,
        "example2" => Builtin::Example2 { k: 0.2 },
        "example3" => Builtin::Example3,
        other => return Err(Error::UnknownSystem(other.to_string())),
    };
    b.build()
}

impl Builtin {
    pub fn build(&self) -> Result<VectorField> {
        match self {
            Builtin::Example1 => {
                let x = SparsePoly::var(2, 0);
                let y = SparsePoly::var(2, 1);
                let f2 = &(&x.pow(3).scale(1.0 / 3.0) - &x.scale(2.0)) - &y;
                VectorField::polynomial(vec![y, f2], Domain::symmetric(2, 5.0))
            }
            Builtin::Example2 { k } => {
                let c1 = Elementary::SinSum {
                    terms: vec![
                        SinTerm { amp: *k, w: vec![1.0, -1.0] },
                        SinTerm { amp: -1.0, w: vec![1.0, 0.0] },
                    ],
                };
                let c2 = Elementary::SinSum {
                    terms: vec![
                        SinTerm { amp: *k, w: vec![-1.0, 1.0] },
                        SinTerm { amp: -1.0, w: vec![0.0, 1.0] },
                    ],
                };
                VectorField::new(
                    vec![Component::Elementary(c1), Component::Elementary(c2)],
                    Domain::symmetric(2, 3.5),
                )
            }
            Builtin::Example3 => VectorField::new(
                vec![
                    Component::Poly(SparsePoly::var(2, 1)),
                    Component::Elementary(Elementary::Saturation {
                        amp: -1.0,
                        w: vec![1.0, 1.0],
                    }),
                ],
                Domain::symmetric(2, 4.0),
            ),
            Builtin::Replicator { a } => {
                let n = a.len();
                if n == 0 || a.iter().any(|r| r.len() != n) {
                    return Err(Error::InvalidArgument("replicator payoff matrix must be n×n".into()));
                }
                let comps = replicator_polys(a, &(0..n).map(|j| SparsePoly::var(n, j)).collect::<Vec<_>>());
                VectorField::polynomial(comps, Domain::new(vec![0.0; n], vec![1.0; n])?)
            }
        }
    }
}

/// `xᵢ((Ax)ᵢ − xᵀAx)` with each `xᵢ` given as a polynomial.
pub(crate) fn replicator_polys(a: &[Vec<f64>], xs: &[SparsePoly]) -> Vec<SparsePoly> {
    let n = a.len();
    let dim = xs[0].dim();
    let ax: Vec<SparsePoly> = (0..n)
        .map(|i| {
            xs.iter()
                .zip(&a[i])
                .fold(SparsePoly::zero(dim), |acc, (x, aij)| &acc + &x.scale(*aij))
        })
        .collect();
    let xax = xs
        .iter()
        .zip(&ax)
        .fold(SparsePoly::zero(dim), |acc, (x, r)| &acc + &(x * r));
    (0..n).map(|i| &xs[i] * &(&ax[i] - &xax)).collect()
}
