mod commands;
mod report;
mod source;
mod sweep;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use source::SourceArgs;

#[derive(Parser, Debug)]
#[command(name = "hopfion", version, about = "Homotopy invariants and energies of sampled sphere-valued fields")]
pub struct Cli {
    /// Cap on worker threads.
    #[arg(long, global = true, env = "HOPFION_THREADS")]
    pub threads: Option<usize>,
    /// Leave the timestamp out of JSON reports.
    #[arg(long, global = true)]
    pub no_timestamp: bool,
    /// Gap above which a snapped invariant is flagged LOW_CONFIDENCE.
    #[arg(long, global = true)]
    pub snap_tol: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sample a named generator and write it as a QF3 file.
    Gen {
        #[command(flatten)]
        src: SourceArgs,
        /// Vertices per axis: N or N1,N2,N3.
        #[arg(long, value_parser = source::parse_dims)]
        dims: Option<[usize; 3]>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Degree, Hopf, Upsilon, primary class and divisibility.
    Invariants(InvariantsArgs),
    /// Faddeev energy of an S2 field, Skyrme energy of an S3 field.
    Energy(Common),
    /// Whole-domain lift diagnostics.
    Lift {
        #[command(flatten)]
        common: Common,
        /// Write the lift u as a QF3 field.
        #[arg(long)]
        lift_out: Option<PathBuf>,
    },
    /// Chart cover, transition angles and cocycle.
    Cech(Common),
    /// Intertwining map between two fields with the same class.
    Intertwine {
        #[command(flatten)]
        common: Common,
        /// The second field psi.
        #[arg(long)]
        psi: PathBuf,
        /// Write Phi as a QF3 field.
        #[arg(long)]
        phi_out: Option<PathBuf>,
    },
    /// Re-run a named check across grid sizes and write a CSV table.
    Sweep(sweep::SweepArgs),
    /// Projected gradient descent on the Faddeev energy.
    Relax(RelaxArgs),
}

#[derive(Args, Debug)]
pub struct Common {
    #[command(flatten)]
    pub src: SourceArgs,
    /// Vertices per axis: N or N1,N2,N3.
    #[arg(long, value_parser = source::parse_dims)]
    pub dims: Option<[usize; 3]>,
    /// Report path; stdout when absent.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct InvariantsArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub degree: bool,
    #[arg(long)]
    pub hopf: bool,
    #[arg(long)]
    pub class: bool,
    #[arg(long)]
    pub divisibility: bool,
    /// Upsilon against this second field.
    #[arg(long, value_name = "PSI")]
    pub upsilon: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RelaxArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 500)]
    pub steps: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub step_size: f64,
    /// Per-step energy and sampled invariants.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Write the relaxed field.
    #[arg(long)]
    pub field_out: Option<PathBuf>,
}

impl Cli {
    pub fn settings(&self) -> report::Settings {
        report::Settings {
            timestamp: !self.no_timestamp,
            snap_tol: self.snap_tol.unwrap_or(hopfion::invariants::SNAP_TOL),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        // Only fails if a pool already exists.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match commands::run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(report::exit_code(&e))
        }
    }
}
