use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, ValueEnum};
use mmfem::dirichlet::Coupling;
use mmfem::bench::{run, write_report, BenchConfig, Benchmark, Report};
use mmfem::materials::MaterialParams;
use mmfem::nedelec::SpaceFamily;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Antiplane,
    Bending,
    LcSweep,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CouplingArg {
    Projection,
    Gradient,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Family {
    Nedelec1,
    Nedelec2,
}

/// Relaxed micromorphic finite element benchmarks.
#[derive(Debug, Parser)]
#[command(name = "bench", version)]
struct Cli {
    #[arg(value_enum)]
    benchmark: Command,
    /// Polynomial degree of the displacement.
    #[arg(long, default_value_t = 1)]
    p: usize,
    /// Refinement level (ladder length for antiplane).
    #[arg(long, default_value_t = 1)]
    refine: usize,
    #[arg(long, value_enum, default_value = "nedelec1")]
    family: Family,
    /// Comma-separated characteristic lengths.
    #[arg(long, value_delimiter = ',')]
    lc: Vec<f64>,
    /// Output directory.
    #[arg(long, default_value = "bench_out")]
    out: PathBuf,
    /// Mesh file in JSON format replacing the generated mesh.
    #[arg(long)]
    mesh: Option<PathBuf>,
    /// Boundary data for the microdistortion (default depends on the benchmark).
    #[arg(long, value_enum)]
    coupling: Option<CouplingArg>,
    /// JSON file with material parameters.
    #[arg(long)]
    params: Option<PathBuf>,
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("MM_FEM_THREADS") {
        let n: usize = v.trim().parse().with_context(|| format!("MM_FEM_THREADS={v}"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global()?;
    }
    Ok(())
}

fn summary(report: &Report) -> String {
    match report {
        Report::Antiplane(r) => {
            let mut s = String::new();
            for row in &r.rows {
                s += &format!(
                    "level {} dofs {:>7} h {:.4} |u-uh| {:.4e} |p-ph| {:.4e}\n",
                    row.level, row.dofs, row.h, row.u_error, row.p_error
                );
            }
            s + &format!("slopes u {:?} p {:?}", r.u_slope, r.p_slope)
        }
        Report::Bending(r) => format!(
            "dofs {} profile deviation {:.4} |u-uh| {:.4e} |P-Ph| {:.4e}",
            r.dofs, r.profile_deviation, r.u_error, r.p_error
        ),
        Report::LcSweep(r) => {
            let mut s = format!("I_macro {:.6} I_micro {:.6}\n", r.i_macro, r.i_micro);
            for row in &r.rows {
                s += &format!("L_c {:.4e} I {:.6}\n", row.lc, row.energy);
            }
            s.trim_end().to_string()
        }
    }
}

fn main_inner() -> Result<()> {
    let cli = Cli::parse();
    configure_threads()?;
    let benchmark = match cli.benchmark {
        Command::Antiplane => Benchmark::Antiplane,
        Command::Bending => Benchmark::Bending,
        Command::LcSweep => Benchmark::LcSweep,
    };
    let family = match cli.family {
        Family::Nedelec1 => SpaceFamily::NedelecI,
        Family::Nedelec2 => SpaceFamily::NedelecII,
    };
    let mut cfg = BenchConfig::new(benchmark, cli.p, cli.refine, family);
    cfg.lc = cli.lc;
    cfg.mesh = cli.mesh;
    cfg.out = Some(cli.out.clone());
    cfg.coupling = cli.coupling.map(|c| match c {
        CouplingArg::Projection => Coupling::Projection,
        CouplingArg::Gradient => Coupling::DiscreteGradient,
    });
    if let Some(path) = &cli.params {
        let text = std::fs::read_to_string(path).with_context(|| path.display().to_string())?;
        let params: MaterialParams = serde_json::from_str(&text).context("material parameters")?;
        params.validate()?;
        cfg.params = Some(params);
    }
    let report = run(&cfg)?;
    let files = write_report(&report, &cli.out)?;
    // a closed stdout (e.g. piped into `head`) is not an error
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{}", summary(&report));
    for f in files {
        let _ = writeln!(out, "wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match main_inner() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
