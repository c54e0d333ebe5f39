//! `hml`: curvature, harmonicity, density-expansion and deformation reports from JSON manifests.
//!
//! Exit codes: 0 success (or harmonic), 1 not harmonic, 2 inconclusive,
//! 3 invalid input, 4 computation failure.

mod commands;
mod manifest;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{Failure, EXIT_INPUT};
use manifest::{parse_list, CommandName, Manifest, Overrides};

#[derive(Parser)]
#[command(name = "hml", version, about = "Harmonic-manifold analysis from declarative manifests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Curvature bundle summaries, Einstein defect and sectional-curvature range.
    Curvature(Common),
    /// Radiality of the polar density about a point; the exit code carries the verdict.
    CheckHarmonic(Common),
    /// Density expansion coefficients from curvature and from shot densities.
    Expand(Common),
    /// Radial conformal deformation: density law, curvature, optional blow-up fit.
    Deform(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    manifest: PathBuf,
    /// Directory for the JSON report and CSV tables.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    directions: Option<usize>,
    /// Comma-separated radii.
    #[arg(long, value_parser = parse_radii)]
    radii: Option<Radii>,
}

#[derive(Clone, Debug)]
struct Radii(Vec<f64>);

fn parse_radii(s: &str) -> Result<Radii, String> {
    parse_list(s).map(Radii)
}

fn configure_threads() -> Result<(), Failure> {
    if let Ok(v) = std::env::var("HML_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Failure::input(anyhow::anyhow!("HML_THREADS must be a positive integer, got '{v}'")))?;
        if n == 0 {
            return Err(Failure::input(anyhow::anyhow!("HML_THREADS must be positive")));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(Failure::computation)?;
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<u8, Failure> {
    configure_threads()?;
    let (name, common) = match cli.command {
        Command::Curvature(c) => (CommandName::Curvature, c),
        Command::CheckHarmonic(c) => (CommandName::CheckHarmonic, c),
        Command::Expand(c) => (CommandName::Expand, c),
        Command::Deform(c) => (CommandName::Deform, c),
    };
    let mut manifest = Manifest::load(&common.manifest).map_err(Failure::input)?;
    manifest.apply(&Overrides {
        out: common.out,
        tol: common.tol,
        directions: common.directions,
        radii: common.radii.map(|r| r.0),
    });
    manifest.validate().map_err(Failure::input)?;
    let outcome = commands::run(name, &manifest)?;
    print!("{}", outcome.json);
    if let Some(dir) = &manifest.analysis.out {
        output::write_all(dir, name.as_str(), &outcome.json, &outcome.tables).map_err(Failure::computation)?;
    }
    Ok(outcome.exit)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { 0 });
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("hml: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
