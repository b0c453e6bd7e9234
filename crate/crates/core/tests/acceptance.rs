//! End-to-end acceptance checks. Prints one `PASS`/`FAIL` line per criterion and exits
//! non-zero when any criterion fails.

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use koopman_roa::config::RunConfig;
use koopman_roa::dynamics::{builtin_system, Domain, VectorField};
use koopman_roa::empirical::{r2_brute_force, r2_from_values, run_study, spearman_decreasing_test, EmpiricalConfig};
use koopman_roa::gridval::CellStatus;
use koopman_roa::koopman::{build_generator_truncation, principal_eigenpairs, Basis};
use koopman_roa::lp::{solve_lp, LinearProgram, RowKind};
use koopman_roa::poly::SparsePoly;
use koopman_roa::polyapprox::ErrorModel;
use koopman_roa::roa::{
    certified_area, combine, run_pipeline_detailed, trajectory_oracle, trajectory_oracle_single, OracleSettings,
    PipelineRun,
};
use koopman_roa::sdp::{InteriorPoint, SdpSettings};
use koopman_roa::sosval::{check_sos, SosOutcome, SosProgram};

const EIGEN_TOL: f64 = 1e-8;
const EIGEN_RUNTIME: Duration = Duration::from_secs(1);
const EX1_MIN_AREA: f64 = 0.05;
const EX1_RUNTIME: Duration = Duration::from_secs(600);
const GRID_AREA_FRACTION: f64 = 0.5;
const ORACLE_RUNS: usize = 500;
const AREA_SAMPLES: usize = 200_000;
const COVERAGE_SAMPLES: usize = 100_000;
const MINIMAX_BAND: (f64, f64) = (0.014, 0.056);
const SCAN_POINTS: usize = 100_000;
const NESTING_SAMPLES: usize = 100_000;
const CELLS_MIN: usize = 1_000;
const CELLS_PER_GRID: usize = 2_000;
const POINTS_PER_CELL: usize = 1_000;
const WITNESS_TOL: f64 = 1e-6;
const SPEARMAN_ALPHA: f64 = 0.05;
const R1_TARGET: f64 = 0.95;
const STUDY_RUNTIME: Duration = Duration::from_secs(1800);
const ORACLE_CASES: usize = 2_000;

type Outcome = (bool, String);

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

struct Runs {
    done: HashMap<&'static str, (PipelineRun, Duration)>,
}

impl Runs {
    fn get(&mut self, name: &'static str) -> &(PipelineRun, Duration) {
        self.done.entry(name).or_insert_with(|| {
            let cfg = RunConfig::from_path(&config_path(&format!("{name}.json"))).expect("config");
            let t = Instant::now();
            let run = run_pipeline_detailed(&cfg).expect("pipeline");
            (run, t.elapsed())
        })
    }
}

fn area(run: &PipelineRun) -> f64 {
    certified_area(&run.certificate, AREA_SAMPLES, 1).fraction
}

fn criterion_1() -> Outcome {
    let t = Instant::now();
    let f = builtin_system("example1").expect("system");
    let jac = f.jacobian_at_origin().expect("jacobian");
    let expected = [Complex64::new(-0.5, 7f64.sqrt() / 2.0), Complex64::new(-0.5, -(7f64.sqrt()) / 2.0)];
    let mut worst = 0.0f64;
    let mut counts = Vec::new();
    for d in [3, 5] {
        let gen = build_generator_truncation(&f, &Basis::monomial(2, d)).expect("generator");
        let pairs = principal_eigenpairs(&gen, &jac, 1e-3).expect("eigenpairs");
        counts.push(pairs.len());
        for z in expected {
            let err = pairs.iter().map(|p| (p.lambda - z).norm()).fold(f64::INFINITY, f64::min);
            worst = worst.max(err);
        }
    }
    let elapsed = t.elapsed();
    (
        worst <= EIGEN_TOL && counts.iter().all(|&c| c == 2) && elapsed < EIGEN_RUNTIME,
        format!("max |λ − λ_J| = {worst:.2e} (≤ {EIGEN_TOL:e}), pairs {counts:?}, {elapsed:.2?}"),
    )
}

fn criterion_2(runs: &mut Runs) -> Outcome {
    let (run, elapsed) = runs.get("example1-sos");
    let c = &run.certificate;
    let a = area(run);
    let rep = trajectory_oracle_single(c, &run.field, &OracleSettings::default()).expect("oracle");
    (
        c.certified && c.gamma1 == 0.0 && a > EX1_MIN_AREA && rep.tested == ORACLE_RUNS && rep.violations == 0
            && *elapsed <= EX1_RUNTIME,
        format!(
            "gamma1 = {}, gamma2 = {:.4e}, area = {a:.4} (> {EX1_MIN_AREA}), oracle {}/{} violations, {elapsed:.2?}",
            c.gamma1, c.gamma2, rep.violations, rep.tested
        ),
    )
}

fn criterion_3(runs: &mut Runs) -> Outcome {
    let sos_area = area(&runs.get("example1-sos").0);
    let (run, _) = runs.get("example1-grid");
    let c = &run.certificate;
    let grid = run.grid.as_ref().expect("grid");
    let a = area(run);
    let v = c.v.compile();
    let eval = run.validity.evaluator();
    let (in_annulus, uncovered, unsound) = (0..COVERAGE_SAMPLES)
        .into_par_iter()
        .map_init(
            || ChaCha8Rng::seed_from_u64(31),
            |rng, k| {
                rng.set_stream(k as u64);
                let y: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..=1.0)).collect();
                let val = v.eval(&y);
                if val < c.gamma1 || val > c.gamma2 {
                    return (0, 0, 0);
                }
                let covered = grid.locate(&y).is_some_and(|i| grid.cells[i].status == CellStatus::Validated);
                (1, usize::from(!covered), usize::from(eval.max_r(&y) >= 0.0))
            },
        )
        .reduce(|| (0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    (
        c.certified && c.gamma1 > 0.0 && a >= GRID_AREA_FRACTION * sos_area && uncovered == 0 && unsound == 0
            && in_annulus > 0,
        format!(
            "gamma1 = {:.3e}, area = {a:.4} vs SOS {sos_area:.4} (ratio {:.3} ≥ {GRID_AREA_FRACTION}), \
             annulus samples {in_annulus}: uncovered {uncovered}, max_R ≥ 0 at {unsound}",
            c.gamma1,
            a / sos_area
        ),
    )
}

fn criterion_4(runs: &mut Runs) -> Outcome {
    let low = area(&runs.get("example2-taylor5").0);
    let high = area(&runs.get("example2-taylor15").0);
    (high > low, format!("area at order 15 = {high:.4}, at order 5 = {low:.4}"))
}

/// Points where `|f_i − P_i|` exceeds the error model, over `points` fresh samples. Differences
/// at the level of rounding error in evaluating `f` and `P` are not counted.
fn error_model_violations(run: &PipelineRun, points: usize, seed: u64) -> (usize, usize) {
    let g: &VectorField = &run.rescaled;
    let n = g.dim();
    let checked: Vec<usize> = (0..n).filter(|&i| run.approximations[i].error_model != ErrorModel::Exact).collect();
    let bad = (0..points)
        .into_par_iter()
        .map_init(
            || ChaCha8Rng::seed_from_u64(seed),
            |rng, k| {
                rng.set_stream(k as u64);
                let x = g.domain().sample(rng);
                let fx = g.eval(&x);
                checked
                    .iter()
                    .filter(|&&i| {
                        let a = &run.approximations[i];
                        let p_abs: f64 = a.p.terms().map(|(m, c)| (c * m.eval(&x)).abs()).sum();
                        let roundoff = 64.0 * f64::EPSILON * (fx[i].abs() + p_abs);
                        (fx[i] - a.p.eval(&x)).abs() > a.error_model.bound_at(&x) + roundoff
                    })
                    .count()
            },
        )
        .sum();
    (bad, checked.len())
}

fn criterion_5(runs: &mut Runs) -> Outcome {
    let (run, _) = runs.get("example3-minimax-grid");
    let ErrorModel::Minimax { eps, eps_bar, converged } = run.approximations[1].error_model else {
        return (false, "second component has no minimax model".into());
    };
    let (bad, _) = error_model_violations(run, SCAN_POINTS, 5);
    (
        (MINIMAX_BAND.0..=MINIMAX_BAND.1).contains(&eps) && bad == 0,
        format!(
            "1.5·eps_bar = {eps:.4e} (eps_bar {eps_bar:.4e}, converged {converged}) in [{}, {}], scan violations {bad}/{SCAN_POINTS}",
            MINIMAX_BAND.0, MINIMAX_BAND.1
        ),
    )
}

fn criterion_6(runs: &mut Runs) -> Outcome {
    let taylor = runs.get("example3-taylor").0.certificate.clone();
    let (run, _) = runs.get("example3-minimax-grid");
    let minimax = run.certificate.clone();
    let head = format!(
        "taylor gamma1 = {}, gamma2 = {:.3e}; minimax gamma1 = {:.3e}, gamma2 = {:.3e}",
        taylor.gamma1, taylor.gamma2, minimax.gamma1, minimax.gamma2
    );
    if !taylor.certified || taylor.gamma1 != 0.0 {
        return (false, format!("{head}; taylor certificate unusable"));
    }
    match combine(&[minimax, taylor], NESTING_SAMPLES, 7) {
        Ok(comb) => {
            let rep = trajectory_oracle(&comb, &run.field, &OracleSettings::default()).expect("oracle");
            (
                rep.violations == 0 && rep.tested == ORACLE_RUNS,
                format!("{head}; nesting holds on {} samples, oracle {}/{} violations", comb.samples, rep.violations, rep.tested),
            )
        }
        Err(e) => (false, format!("{head}; {e}")),
    }
}

/// Identity residual and smallest Gram eigenvalue recomputed from a witness, for the program
/// rescaled by the witness's own factors.
fn recheck_witness(prog: &SosProgram, w: &koopman_roa::sosval::SosWitness) -> (f64, f64) {
    let p = SosProgram {
        v: prog.v.scale(1.0 / w.v_scale),
        r: prog.r.iter().map(|r| r.scale(1.0 / w.r_scale)).collect(),
        gamma1: prog.gamma1 / w.v_scale,
        gamma2: prog.gamma2 / w.v_scale,
        ..prog.clone()
    };
    let n = p.v.dim();
    let one = SparsePoly::constant(n, 1.0);
    let lo = &p.v - &one.scale(p.gamma1);
    let hi = &one.scale(p.gamma2) - &p.v;
    let mut residual = 0.0f64;
    for (r, rp) in p.r.iter().enumerate() {
        let m = if p.per_pattern { r } else { 0 };
        let sum = &(&(&w.residual_polys[r] + rp) + &(&w.sigma1[m] * &lo)) + &(&w.sigma2[m] * &hi);
        residual = residual.max(sum.max_abs_coeff() / (1.0 + rp.max_abs_coeff()));
    }
    let eig = w
        .grams
        .iter()
        .filter(|q| q.nrows() > 0)
        .map(|q| nalgebra::SymmetricEigen::new(q.clone()).eigenvalues.min())
        .fold(f64::INFINITY, f64::min);
    (residual, eig)
}

fn criterion_7(runs: &mut Runs) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();

    let mut cells = 0usize;
    let mut bad_cells = 0usize;
    for name in ["example1-grid", "example2-taylor5", "example2-taylor15", "example3-minimax-grid"] {
        let (run, _) = runs.get(name);
        let grid = run.grid.as_ref().expect("grid");
        let eval = run.validity.evaluator();
        let valid: Vec<usize> = grid.validated.clone();
        let stride = valid.len().div_ceil(CELLS_PER_GRID).max(1);
        let chosen: Vec<usize> = valid.iter().copied().step_by(stride).collect();
        cells += chosen.len();
        bad_cells += chosen
            .par_iter()
            .map(|&i| {
                let cell = &grid.cells[i];
                let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
                let hit = (0..POINTS_PER_CELL).any(|_| {
                    let x: Vec<f64> = cell.corner.iter().map(|c| c + cell.side * rng.random_range(0.0..=1.0)).collect();
                    eval.max_r(&x) >= 0.0
                });
                usize::from(hit)
            })
            .sum::<usize>();
    }
    ok &= cells >= CELLS_MIN && bad_cells == 0;
    parts.push(format!("(a) {bad_cells} unsound of {cells} cells × {POINTS_PER_CELL} points"));

    let mut worst_res = 0.0f64;
    let mut worst_eig = f64::INFINITY;
    let mut feasible = 0;
    for name in ["example1-sos", "example3-taylor"] {
        let s = runs.get(name).0.certificate.diagnostics.solver.clone().expect("solver summary");
        feasible += s.feasible;
        if s.feasible > 0 {
            worst_res = worst_res.max(s.max_residual);
            worst_eig = worst_eig.min(s.min_eigenvalue);
        }
    }
    let (run, _) = runs.get("example1-sos");
    let c = &run.certificate;
    let degrees = c.degrees.expect("multiplier degrees");
    let prog = SosProgram {
        v: run.validity.v.clone(),
        r: run.validity.distinct_patterns().into_iter().map(|i| run.validity.r[i].clone()).collect(),
        gamma1: c.gamma1,
        gamma2: c.gamma2,
        sigma1_degree: degrees.sigma1,
        sigma2_degree: degrees.sigma2,
        per_pattern: false,
    };
    let rechecked = match check_sos(&prog, &InteriorPoint { settings: SdpSettings::default() }).expect("sos").outcome {
        SosOutcome::Feasible(w) => Some(recheck_witness(&prog, &w)),
        _ => None,
    };
    let (re_res, re_eig) = rechecked.unwrap_or((f64::INFINITY, f64::NEG_INFINITY));
    ok &= feasible > 0
        && worst_res <= WITNESS_TOL
        && worst_eig >= -WITNESS_TOL
        && re_res <= WITNESS_TOL
        && re_eig >= -WITNESS_TOL;
    parts.push(format!(
        "(b) {feasible} feasible probes: residual ≤ {worst_res:.2e}, eigenvalue ≥ {worst_eig:.2e}; \
         recomputed final probe residual {re_res:.2e}, eigenvalue {re_eig:.2e}"
    ));

    let mut models = Vec::new();
    let mut bad_models = 0;
    for name in ["example1-sos", "example2-taylor5", "example2-taylor15", "example3-taylor", "example3-minimax-grid"] {
        let (run, _) = runs.get(name);
        let (bad, checked) = error_model_violations(run, SCAN_POINTS, 77);
        bad_models += bad;
        models.push(format!("{name}: {bad} over {checked} components"));
    }
    ok &= bad_models == 0;
    parts.push(format!("(c) {SCAN_POINTS} points each, {}", models.join(", ")));
    (ok, parts.join("; "))
}

fn criterion_8() -> Outcome {
    let cfg = EmpiricalConfig::from_path(&config_path("replicator-study.json")).expect("study config");
    let t = Instant::now();
    let rows = match run_study(&cfg) {
        Ok(r) => r,
        Err(e) => return (false, e.to_string()),
    };
    let elapsed = t.elapsed();
    let mut base: Vec<(usize, f64)> = rows.iter().filter(|r| r.is_baseline()).map(|r| (r.n, r.r2)).collect();
    base.sort_by_key(|b| b.0);
    let ns: Vec<f64> = base.iter().map(|b| b.0 as f64).collect();
    let r2s: Vec<f64> = base.iter().map(|b| b.1).collect();
    let (rho, p) = spearman_decreasing_test(&ns, &r2s, cfg.seed).expect("spearman");
    let rbf_max = |n: usize, f: fn(&koopman_roa::empirical::MetricRow) -> f64| {
        rows.iter().filter(|r| r.n == n && !r.is_baseline()).map(f).fold(f64::NEG_INFINITY, f64::max)
    };
    let r1_4 = rbf_max(4, |r| r.r1);
    let high: Vec<(usize, f64, f64)> =
        base.iter().filter(|b| b.0 >= 8).map(|&(n, b)| (n, rbf_max(n, |r| r.r2), b)).collect();
    let beats = !high.is_empty() && high.iter().all(|&(_, rbf, b)| rbf >= b);
    let high_txt: Vec<String> = high.iter().map(|(n, rbf, b)| format!("n={n}: {rbf:.4} vs {b:.4}")).collect();
    (
        rho < 0.0 && p < SPEARMAN_ALPHA && r1_4 >= R1_TARGET && beats && elapsed <= STUDY_RUNTIME,
        format!(
            "baseline r2 {r2s:.4?}, Spearman rho = {rho:.3}, p = {p:.4} (< {SPEARMAN_ALPHA}); max r1(n=4) = {r1_4:.4} \
             (≥ {R1_TARGET}); max r2 RBF vs baseline {}; {elapsed:.0?}",
            high_txt.join(", ")
        ),
    )
}

/// Brute-force optimum over the vertices of `{Ax ≤ b}`.
fn vertex_optimum(c: &[f64], rows: &[Vec<f64>], b: &[f64]) -> Option<f64> {
    let n = c.len();
    let m = rows.len();
    let mut best: Option<f64> = None;
    let mut sel: Vec<usize> = (0..n).collect();
    loop {
        let a = DMatrix::from_fn(n, n, |r, k| rows[sel[r]][k]);
        if a.determinant().abs() > 1e-9 {
            if let Some(x) = a.lu().solve(&DVector::from_fn(n, |r, _| b[sel[r]])) {
                let feasible = rows
                    .iter()
                    .zip(b)
                    .all(|(r, bi)| r.iter().zip(x.iter()).map(|(p, q)| p * q).sum::<f64>() <= bi + 1e-9);
                if feasible {
                    let v: f64 = c.iter().zip(x.iter()).map(|(p, q)| p * q).sum();
                    best = Some(best.map_or(v, |w: f64| w.min(v)));
                }
            }
        }
        let Some(k) = (0..n).rev().find(|&k| sel[k] < m - n + k) else { break };
        sel[k] += 1;
        for j in k + 1..n {
            sel[j] = sel[j - 1] + 1;
        }
    }
    best
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut r2_mismatch = 0;
    for _ in 0..ORACLE_CASES {
        let k = rng.random_range(0..=20);
        let v: Vec<f64> = (0..k).map(|_| (rng.random_range(0..12) as f64) / 4.0).collect();
        let d: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        if r2_from_values(&v, &d).ratio != r2_brute_force(&v, &d).ratio {
            r2_mismatch += 1;
        }
    }

    let mut lp_mismatch = 0;
    for _ in 0..ORACLE_CASES {
        let n = rng.random_range(1..=3);
        let extra = rng.random_range(1..=5);
        let mut rows: Vec<Vec<f64>> = (0..extra).map(|_| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let mut b: Vec<f64> = (0..extra).map(|_| rng.random_range(0.1..3.0)).collect();
        for k in 0..n {
            for s in [1.0, -1.0] {
                let mut e = vec![0.0; n];
                e[k] = s;
                rows.push(e);
                b.push(5.0);
            }
        }
        let c: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut lp = LinearProgram::new(c.clone());
        for j in 0..n {
            lp.set_bounds(j, f64::NEG_INFINITY, f64::INFINITY);
        }
        for (r, bi) in rows.iter().zip(&b) {
            lp.add_row(r, RowKind::Le, *bi);
        }
        let want = vertex_optimum(&c, &rows, &b).expect("bounded feasible instance");
        match solve_lp(&lp) {
            Ok(s) if (s.value - want).abs() <= 1e-8 * (1.0 + want.abs()) => {}
            _ => lp_mismatch += 1,
        }
    }

    let f = VectorField::polynomial(vec![SparsePoly::var(1, 0).scale(-1.0)], Domain::unit(1)).expect("field");
    let err = |h: f64| (f.integrate(&[1.0], 1.0, h).expect("rk4").last()[0] - (-1f64).exp()).abs();
    let ratios: Vec<f64> = [0.2, 0.1, 0.05].iter().map(|&h| err(h) / err(h / 2.0)).collect();
    let rk4_ok = ratios.iter().all(|r| (14.0..=18.0).contains(r));
    (
        r2_mismatch == 0 && lp_mismatch == 0 && rk4_ok,
        format!(
            "r2 scan vs brute force: {r2_mismatch}/{ORACLE_CASES} mismatches; LP vs vertices: {lp_mismatch}/{ORACLE_CASES}; \
             RK4 halving ratios {ratios:.2?} in [14, 18]"
        ),
    )
}

fn main() {
    let mut runs = Runs { done: HashMap::new() };
    let mut failed = Vec::new();
    let mut criteria: Vec<(usize, Box<dyn FnMut(&mut Runs) -> Outcome>)> = vec![
        (1, Box::new(|_| criterion_1())),
        (2, Box::new(criterion_2)),
        (3, Box::new(criterion_3)),
        (4, Box::new(criterion_4)),
        (5, Box::new(criterion_5)),
        (6, Box::new(criterion_6)),
        (7, Box::new(criterion_7)),
        (8, Box::new(|_| criterion_8())),
        (9, Box::new(|_| criterion_9())),
    ];
    for (id, check) in criteria.iter_mut() {
        let t = Instant::now();
        let (pass, detail) = catch_unwind(AssertUnwindSafe(|| check(&mut runs)))
            .unwrap_or_else(|p| {
                let msg = p
                    .downcast_ref::<&str>()
                    .map(|s| s.to_string())
                    .or_else(|| p.downcast_ref::<String>().cloned())
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            });
        println!("criterion {id}: {} {detail} [{:.1?}]", if pass { "PASS" } else { "FAIL" }, t.elapsed());
        if !pass {
            failed.push(*id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all 9 criteria pass");
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
