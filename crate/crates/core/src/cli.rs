//! Command-line front end: `certify`, `combine` and `empirical`.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use log::info;
use serde::Serialize;

use crate::config::RunConfig;
use crate::contour::{marching_squares, ScalarGrid};
use crate::empirical::{envelopes, run_study, write_metrics_csv, EmpiricalConfig};
use crate::error::{Error, Result};
use crate::gridval::AdaptiveGrid;
use crate::roa::{combine, run_pipeline_detailed, Certificate, PipelineRun};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NOT_CERTIFIED: i32 = 2;

/// Side of the square evaluation grid written for planar systems.
pub const V_GRID_SIZE: usize = 400;

#[derive(Debug, Parser)]
#[command(name = "koopman-roa", version, about = "Certified region-of-attraction estimates from Koopman eigenfunctions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a configured pipeline and write its certificate.
    Certify {
        config: PathBuf,
        /// Overrides `output.dir` from the config.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Combine certificates of one system and check their nesting.
    Combine {
        #[arg(required = true)]
        certificates: Vec<PathBuf>,
        #[arg(long, short)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Sampled-basin metrics for random replicator systems.
    Empirical {
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

pub fn run(cli: Cli) -> i32 {
    let out = match cli.command {
        Command::Certify { config, out_dir } => cmd_certify(&config, out_dir.as_deref()),
        Command::Combine { certificates, out, samples, seed } => cmd_combine(&certificates, out.as_deref(), samples, seed),
        Command::Empirical { config, out_dir } => cmd_empirical(&config, out_dir.as_deref()),
    };
    match out {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into())
}

fn output_location(
    spec: &crate::config::OutputSpec,
    config: &Path,
    override_dir: Option<&Path>,
) -> Result<(PathBuf, String)> {
    let dir = match (override_dir, &spec.dir) {
        (Some(d), _) => d.to_path_buf(),
        (None, Some(d)) if d.is_absolute() => d.clone(),
        (None, Some(d)) => config.parent().unwrap_or(Path::new(".")).join(d),
        (None, None) => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir)?;
    Ok((dir, spec.prefix.clone().unwrap_or_else(|| stem(config))))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

/// Files written by `certify`.
#[derive(Clone, Debug, Default)]
pub struct CertifyOutputs {
    pub certificate: PathBuf,
    pub grid: Option<PathBuf>,
    pub values: Option<PathBuf>,
    pub contours: Option<PathBuf>,
}

pub fn write_certify_outputs(run: &PipelineRun, dir: &Path, prefix: &str) -> Result<CertifyOutputs> {
    let cert = &run.certificate;
    let mut out = CertifyOutputs { certificate: dir.join(format!("{prefix}.certificate.json")), ..Default::default() };
    write_json(&out.certificate, cert)?;
    if let Some(grid) = &run.grid {
        let p = dir.join(format!("{prefix}.grid.csv"));
        write_grid_csv(&p, grid, cert)?;
        out.grid = Some(p);
    }
    if cert.dim() == 2 {
        let d = run.field.domain();
        let g = ScalarGrid::sample([d.lo[0], d.lo[1]], [d.hi[0], d.hi[1]], V_GRID_SIZE, |x, y| {
            cert.v_original_at(&[x, y])
        });
        let p = dir.join(format!("{prefix}.v.csv"));
        write_values_csv(&p, &g)?;
        out.values = Some(p);
        if cert.certified {
            let p = dir.join(format!("{prefix}.contours.csv"));
            write_contours_csv(&p, &g, cert)?;
            out.contours = Some(p);
        }
    }
    Ok(out)
}

/// Leaf cells in original coordinates: `level, status, side_0.., x_0..`.
pub fn write_grid_csv(path: &Path, grid: &AdaptiveGrid, cert: &Certificate) -> Result<()> {
    let n = cert.dim();
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["level".to_string(), "status".to_string()];
    header.extend((0..n).map(|k| format!("side_{k}")));
    header.extend((0..n).map(|k| format!("x_{k}")));
    w.write_record(&header)?;
    for cell in &grid.cells {
        let corner = cert.map.to_original(&cell.corner);
        let mut rec = vec![cell.level.to_string(), cell.status.as_str().to_string()];
        rec.extend(cert.map.scale.iter().map(|s| (cell.side * s).to_string()));
        rec.extend(corner.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_values_csv(path: &Path, g: &ScalarGrid) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x", "y", "v"])?;
    for (j, y) in g.ys.iter().enumerate() {
        for (i, x) in g.xs.iter().enumerate() {
            w.write_record([x.to_string(), y.to_string(), g.z[j][i].to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Polylines of `∂Ω_{γ₁}` (when `γ₁ > 0`) and `∂Ω_{γ₂}`, ids `gamma1:k` / `gamma2:k`.
pub fn write_contours_csv(path: &Path, g: &ScalarGrid, cert: &Certificate) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["curve_id", "x", "y"])?;
    let mut levels = vec![("gamma2", cert.gamma2)];
    if cert.gamma1 > 0.0 {
        levels.insert(0, ("gamma1", cert.gamma1));
    }
    for (name, level) in levels {
        for (k, curve) in marching_squares(g, level).iter().enumerate() {
            for (x, y) in curve {
                w.write_record([format!("{name}:{k}"), x.to_string(), y.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_certify(config: &Path, out_dir: Option<&Path>) -> Result<i32> {
    let cfg = RunConfig::from_path(config)?;
    let (dir, prefix) = output_location(&cfg.output, config, out_dir)?;
    let run = run_pipeline_detailed(&cfg)?;
    let files = write_certify_outputs(&run, &dir, &prefix)?;
    let c = &run.certificate;
    if c.certified {
        println!("certified: gamma1 = {:e}, gamma2 = {:e}", c.gamma1, c.gamma2);
    } else {
        println!("not certified");
    }
    println!("certificate: {}", files.certificate.display());
    Ok(if c.certified { EXIT_OK } else { EXIT_NOT_CERTIFIED })
}

pub fn read_certificate(path: &Path) -> Result<Certificate> {
    let text = std::fs::read_to_string(path)?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
        path: format!("{}: {}", path.display(), e.path()),
        message: e.inner().to_string(),
    })
}

#[derive(Serialize)]
struct NestingReport<'a> {
    nesting_verified: bool,
    witness: &'a [f64],
}

pub fn cmd_combine(paths: &[PathBuf], out: Option<&Path>, samples: usize, seed: u64) -> Result<i32> {
    let certs = paths.iter().map(|p| read_certificate(p)).collect::<Result<Vec<_>>>()?;
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("combined.json"));
    match combine(&certs, samples, seed) {
        Ok(c) => {
            write_json(&out, &c)?;
            println!("nesting verified on {} samples; combined: {}", c.samples, out.display());
            Ok(EXIT_OK)
        }
        Err(Error::NestingViolated { witness }) => {
            write_json(&out, &NestingReport { nesting_verified: false, witness: &witness })?;
            println!("nesting violated at {witness:?}");
            Ok(EXIT_NOT_CERTIFIED)
        }
        Err(e) => Err(e),
    }
}

pub fn cmd_empirical(config: &Path, out_dir: Option<&Path>) -> Result<i32> {
    let cfg = EmpiricalConfig::from_path(config)?;
    let (dir, prefix) = output_location(&cfg.output, config, out_dir)?;
    let path = dir.join(format!("{prefix}.metrics.csv"));
    let rows = match run_study(&cfg) {
        Ok(rows) => rows,
        Err(e @ Error::BasinTooSmall { .. }) => {
            println!("{e}");
            return Ok(EXIT_NOT_CERTIFIED);
        }
        Err(e) => return Err(e),
    };
    write_metrics_csv(&path, &rows)?;
    for r in rows.iter().filter(|r| r.is_baseline()) {
        info!("n = {}: baseline r1 = {:.4}, r2 = {:.4}", r.n, r.r1, r.r2);
    }
    for e in envelopes(&rows) {
        println!(
            "n = {:2}: r1 in [{:.4}, {:.4}], r2 in [{:.4}, {:.4}] over {} trials",
            e.n, e.r1_min, e.r1_max, e.r2_min, e.r2_max, e.trials
        );
    }
    println!("metrics: {}", path.display());
    Ok(EXIT_OK)
}
