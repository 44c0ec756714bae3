//! Refinement sweeps: one check, several grid sizes, a CSV row each.

use clap::{Args, ValueEnum};
use std::fmt::Write as _;
use std::path::PathBuf;

use hopfion::cech::primary_class;
use hopfion::forms::{faddeev_energy, skyrme_energy};
use hopfion::grid::{Field, Kind};
use hopfion::invariants::{commute_check, degree, hopf};
use hopfion::lift::{lift_whole, LiftResult};
use hopfion::{Error, Result};

use crate::report::{exit_code, EXIT_OK};
use crate::source::SourceArgs;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Check {
    /// Path-consistency residual of the developed lift.
    DevelopConsistency,
    /// max |dA + A∧A| of the lift connection.
    Flatness,
    /// max |u⁻¹iu − φ|.
    Conjugation,
    Degree,
    Hopf,
    Class,
    /// Integrated commuting-pullback residual.
    Commute,
    /// Faddeev (S2) or Skyrme (S3) total energy.
    Energy,
    /// ∫|dφ|³.
    W13,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub check: Check,
    /// Comma-separated cube sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    pub dims: Vec<usize>,
    #[command(flatten)]
    pub src: SourceArgs,
    /// CSV path; stdout when absent.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

struct Row {
    value: f64,
    gap: f64,
    residual: f64,
}

fn lift_of(phi: &Field) -> Result<LiftResult> {
    lift_whole(phi)
}

fn measure(check: Check, phi: &Field) -> Result<Row> {
    let r = |value: f64| Row { value, gap: 0.0, residual: value.abs() };
    Ok(match check {
        Check::DevelopConsistency => r(lift_of(phi)?.path_residual),
        Check::Flatness => r(lift_of(phi)?.flatness),
        Check::Conjugation => r(lift_of(phi)?.conjugation_residual),
        Check::Degree => {
            let d = degree(phi)?;
            Row { value: d.raw, gap: d.gap, residual: d.gap }
        }
        Check::Hopf => {
            let d = hopf(phi)?;
            Row { value: d.raw, gap: d.gap, residual: d.gap }
        }
        Check::Class => {
            let c = primary_class(phi)?;
            Row { value: c.raw.iter().map(|v| v.abs()).sum(), gap: c.gap, residual: c.gap }
        }
        Check::Commute => {
            let u = match phi.kind {
                Kind::S3 => phi.clone(),
                _ => lift_of(phi)?.field()?,
            };
            r(commute_check(&u)?.integrated)
        }
        Check::Energy => match phi.kind {
            Kind::S2 => r(faddeev_energy(phi).total),
            Kind::S3 => r(skyrme_energy(phi).total),
            k => return Err(Error::Invalid(format!("no energy for {k:?} fields"))),
        },
        Check::W13 => r(faddeev_energy(phi).w13),
    })
}

pub fn run(a: &SweepArgs) -> Result<u8> {
    if a.src.input.is_some() {
        return Err(Error::Invalid("sweep regenerates the field per size; use --name".into()));
    }
    if a.dims.is_empty() {
        return Err(Error::Invalid("--dims needs at least one size".into()));
    }
    let mut src = a.src.clone();
    if src.name.is_none() {
        src.name = Some("hopf_box".into());
    }
    src.spec()?;
    let check = a.check.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
    let mut out = String::from("check,dims,h,value,gap,residual,ratio,error\n");
    let mut prev: Option<f64> = None;
    let mut code = EXIT_OK;
    for &n in &a.dims {
        let (phi, _) = src.load_at(Some([n; 3]))?;
        let h = phi.lattice.spacing()[0];
        match measure(a.check, &phi) {
            Ok(row) => {
                let ratio = prev.filter(|_| row.residual > 0.0).map(|p| p / row.residual);
                let ratio = ratio.map(|x| format!("{x:.6}")).unwrap_or_default();
                let _ = writeln!(out, "{check},{n},{h:.9},{:.12e},{:.6e},{:.6e},{ratio},", row.value, row.gap, row.residual);
                prev = Some(row.residual);
            }
            Err(e) => {
                let _ = writeln!(out, "{check},{n},{h:.9},,,,,{}", crate::report::error_kind(&e));
                eprintln!("error at {n}: {e}");
                code = code.max(exit_code(&e));
                prev = None;
            }
        }
    }
    match &a.output {
        Some(p) => std::fs::write(p, out)?,
        None => print!("{out}"),
    }
    Ok(code)
}
