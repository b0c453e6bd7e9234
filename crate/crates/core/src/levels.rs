//! Search over sublevel pairs `(γ₁, γ₂)` driven by a yes/no feasibility oracle.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::Domain;
use crate::poly::SparsePoly;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LevelSearchSettings {
    /// Relative bracket width at which bisection stops.
    pub tol: f64,
    /// Alternating grow-γ₂ / shrink-γ₁ rounds.
    pub max_rounds: usize,
    /// Number of dyadic annuli tried when seeding.
    pub ladder: usize,
    pub boundary_per_face: usize,
    pub cap_slack: f64,
    pub seed: u64,
    /// Probe only this pair instead of searching; pairs above the cap are refused.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed: Option<(f64, f64)>,
}

impl Default for LevelSearchSettings {
    fn default() -> Self {
        LevelSearchSettings {
            tol: 1e-3,
            max_rounds: 3,
            ladder: 20,
            boundary_per_face: 1000,
            cap_slack: 1e-6,
            seed: 0,
            fixed: None,
        }
    }
}

/// One oracle call and its answer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub gamma1: f64,
    pub gamma2: f64,
    pub certified: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LevelSearch {
    pub best: Option<(f64, f64)>,
    pub cap: f64,
    pub probes: Vec<Probe>,
}

/// Largest admissible `γ₂`: minimum of `V` over random boundary samples, minus a slack.
pub fn level_cap(v: &SparsePoly, domain: &Domain, per_face: usize, slack: f64, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = v.compile();
    let mut m = domain
        .boundary_samples(per_face, &mut rng)
        .iter()
        .map(|x| c.eval(x))
        .fold(f64::INFINITY, f64::min);
    for corner in 0..1usize << domain.dim() {
        let x: Vec<f64> = (0..domain.dim())
            .map(|j| if corner >> j & 1 == 1 { domain.hi[j] } else { domain.lo[j] })
            .collect();
        m = m.min(c.eval(&x));
    }
    m - slack
}

struct Recorder<F> {
    oracle: F,
    probes: Vec<Probe>,
}

impl<F: FnMut(f64, f64) -> bool> Recorder<F> {
    fn ask(&mut self, g1: f64, g2: f64) -> bool {
        let certified = g1 < g2 && (self.oracle)(g1, g2);
        self.probes.push(Probe { gamma1: g1, gamma2: g2, certified });
        certified
    }
}

/// Maximizes `γ₂ − γ₁` below `cap`.
///
/// Tries `γ₁ = 0` first and bisects `γ₂` upward from the first feasible dyadic fraction of
/// `cap`. If no such pair exists, seeds with a dyadic annulus `(cap/2ᵏ, cap/2ᵏ⁻¹)` and then
/// alternates growing `γ₂` and shrinking `γ₁`. Oracle refusals count as "not certified".
pub fn search_levels<F>(cap: f64, settings: &LevelSearchSettings, oracle: F) -> LevelSearch
where
    F: FnMut(f64, f64) -> bool,
{
    let mut rec = Recorder { oracle, probes: Vec::new() };
    if !(cap > 0.0) || !cap.is_finite() {
        return LevelSearch { best: None, cap, probes: rec.probes };
    }
    if let Some((g1, g2)) = settings.fixed {
        let best = (g1 >= 0.0 && g2 <= cap && rec.ask(g1, g2)).then_some((g1, g2));
        return LevelSearch { best, cap, probes: rec.probes };
    }
    let tol = settings.tol;

    if let Some(g2) = grow(&mut rec, 0.0, cap, settings.ladder, tol) {
        return LevelSearch { best: Some((0.0, g2)), cap, probes: rec.probes };
    }

    let mut seed = None;
    for k in 1..=settings.ladder as i32 {
        let g2 = cap * 0.5f64.powi(k - 1);
        let g1 = g2 * 0.5;
        if rec.ask(g1, g2) {
            seed = Some((g1, g2));
            break;
        }
    }
    let Some((mut g1, mut g2)) = seed else {
        return LevelSearch { best: None, cap, probes: rec.probes };
    };
    for _ in 0..settings.max_rounds {
        let (old1, old2) = (g1, g2);
        g2 = bisect_up(&mut rec, g1, g2, cap, tol);
        g1 = bisect_down(&mut rec, g1, g2, tol);
        if (old2 - g2).abs() <= tol * g2 && (old1 - g1).abs() <= tol * g2 {
            break;
        }
    }
    LevelSearch { best: Some((g1, g2)), cap, probes: rec.probes }
}

/// With `γ₁` fixed, finds a feasible `γ₂` on the dyadic ladder below `cap` and bisects up.
fn grow<F: FnMut(f64, f64) -> bool>(
    rec: &mut Recorder<F>,
    g1: f64,
    cap: f64,
    ladder: usize,
    tol: f64,
) -> Option<f64> {
    for k in 0..=ladder as i32 {
        let g2 = cap * 0.5f64.powi(k);
        if g2 <= g1 {
            break;
        }
        if rec.ask(g1, g2) {
            return Some(if k == 0 { cap } else { bisect_up(rec, g1, g2, 2.0 * g2, tol) });
        }
    }
    None
}

/// Largest feasible `γ₂ ∈ [ok, hi]` given `(g1, ok)` feasible.
fn bisect_up<F: FnMut(f64, f64) -> bool>(rec: &mut Recorder<F>, g1: f64, ok: f64, hi: f64, tol: f64) -> f64 {
    if ok >= hi {
        return ok;
    }
    if rec.ask(g1, hi) {
        return hi;
    }
    let (mut lo, mut bad) = (ok, hi);
    while bad - lo > tol * bad {
        let mid = 0.5 * (lo + bad);
        if rec.ask(g1, mid) {
            lo = mid;
        } else {
            bad = mid;
        }
    }
    lo
}

/// Smallest feasible `γ₁ ∈ [0, ok]` given `(ok, g2)` feasible.
fn bisect_down<F: FnMut(f64, f64) -> bool>(rec: &mut Recorder<F>, ok: f64, g2: f64, tol: f64) -> f64 {
    if ok <= 0.0 {
        return 0.0;
    }
    if rec.ask(0.0, g2) {
        return 0.0;
    }
    let (mut bad, mut hi) = (0.0, ok);
    for _ in 0..64 {
        if hi - bad <= tol * hi {
            break;
        }
        let mid = 0.5 * (bad + hi);
        if rec.ask(mid, g2) {
            hi = mid;
        } else {
            bad = mid;
        }
    }
    hi
}
