use serde::Serialize;
use std::fmt::Write as _;
use std::path::Path;

use hopfion::cech::{self, cech_report, divisibility, primary_class};
use hopfion::forms::{faddeev_energy, skyrme_energy};
use hopfion::grid::{read_field, write_field, Kind};
use hopfion::invariants::{degree, hopf, intertwine_pair, relax, upsilon_of};
use hopfion::lift::lift_whole;
use hopfion::{Error, Result};

use crate::report::{Envelope, EXIT_OK};
use crate::{sweep, Cli, Command, Common, InvariantsArgs, RelaxArgs};

pub fn run(cli: &Cli) -> Result<u8> {
    let settings = cli.settings();
    match &cli.command {
        Command::Gen { src, dims, output } => {
            let (field, _) = src.load_at(*dims)?;
            write_field(&field, output)?;
            Ok(EXIT_OK)
        }
        Command::Invariants(a) => invariants(cli, a),
        Command::Energy(c) => {
            let (field, prov) = c.src.load_at(c.dims)?;
            let mut env = Envelope::new("energy", &settings, Some(prov));
            let (functional, report) = match field.kind {
                Kind::S2 => ("faddeev", faddeev_energy(&field)),
                Kind::S3 => ("skyrme", skyrme_energy(&field)),
                k => return Err(Error::Invalid(format!("no energy for {k:?} fields"))),
            };
            env.set("functional", &functional);
            env.set("energy", &report);
            finish(env, c, Vec::new())
        }
        Command::Lift { common: c, lift_out } => {
            let (field, prov) = c.src.load_at(c.dims)?;
            let mut env = Envelope::new("lift", &settings, Some(prov));
            let mut errs = Vec::new();
            match lift_whole(&field) {
                Ok(l) => {
                    env.set("lift", &l.diagnostics());
                    if let Some(p) = lift_out {
                        write_field(&l.field()?, p)?;
                    }
                }
                Err(e) => {
                    env.fail(&e);
                    errs.push(e);
                }
            }
            finish(env, c, errs)
        }
        Command::Cech(c) => {
            let (field, prov) = c.src.load_at(c.dims)?;
            let mut env = Envelope::new("cech", &settings, Some(prov));
            let mut errs = Vec::new();
            match cech_report(&field) {
                Ok((r, _)) => {
                    if !r.routes_agree {
                        env.fail(&Error::ClassMismatch(format!("periods {:?}, cocycle {:?}", r.class.class, r.cocycle_class)));
                        errs.push(Error::ClassMismatch("period and cocycle routes".into()));
                    }
                    env.set("cech", &r);
                }
                Err(e) => {
                    env.fail(&e);
                    errs.push(e);
                }
            }
            finish(env, c, errs)
        }
        Command::Intertwine { common: c, psi, phi_out } => {
            let (phi, prov) = c.src.load_at(c.dims)?;
            let psi_field = read_field(psi)?;
            let mut env = Envelope::new("intertwine", &settings, Some(prov));
            env.set("psi", &psi.display().to_string());
            let mut errs = Vec::new();
            match intertwine_pair(&phi, &psi_field) {
                Ok((res, class)) => {
                    let m = divisibility(class);
                    env.set("class", &class);
                    env.set("divisibility", &m);
                    env.set("intertwine", &res.diagnostics());
                    env.invariant("upsilon", upsilon_of(&res, 2 * m), settings.snap_tol);
                    if let Some(p) = phi_out {
                        write_field(&res.phi_map, p)?;
                    }
                }
                Err(e) => {
                    env.fail(&e);
                    errs.push(e);
                }
            }
            finish(env, c, errs)
        }
        Command::Sweep(a) => sweep::run(a),
        Command::Relax(a) => relax_cmd(cli, a),
    }
}

fn finish(env: Envelope, c: &Common, errs: Vec<Error>) -> Result<u8> {
    env.emit(c.output.as_deref())?;
    for e in &errs {
        eprintln!("error: {e}");
    }
    Ok(env.exit_code(&errs))
}

fn record<T: Serialize>(env: &mut Envelope, errs: &mut Vec<Error>, key: &str, r: Result<T>) -> Option<T> {
    match r {
        Ok(v) => {
            env.set(key, &v);
            Some(v)
        }
        Err(e) => {
            env.fail(&e);
            errs.push(e);
            None
        }
    }
}

fn invariants(cli: &Cli, a: &InvariantsArgs) -> Result<u8> {
    let settings = cli.settings();
    let c = &a.common;
    let (phi, prov) = c.src.load_at(c.dims)?;
    let mut env = Envelope::new("invariants", &settings, Some(prov));
    let mut errs = Vec::new();
    let any = a.degree || a.hopf || a.class || a.divisibility || a.upsilon.is_some();
    let torus = phi.lattice.is_torus();
    let want_degree = a.degree || (!any && phi.kind == Kind::S3);
    let want_class = a.class || a.divisibility || (!any && torus && phi.kind == Kind::S2);
    let mut class = None;
    if want_class {
        class = record(&mut env, &mut errs, "class", primary_class(&phi)).map(|c| c.class);
        if let Some(m) = class {
            if a.divisibility || !any {
                env.set("divisibility", &divisibility(m));
            }
        }
    }
    let want_hopf = a.hopf || (!any && phi.kind == Kind::S2 && (!torus || class == Some([0; 3])));
    if want_degree {
        match degree(&phi) {
            Ok(r) => env.invariant("degree", r, settings.snap_tol),
            Err(e) => {
                env.fail(&e);
                errs.push(e);
            }
        }
    }
    if want_hopf {
        match hopf(&phi) {
            Ok(r) => env.invariant("hopf", r, settings.snap_tol),
            Err(e) => {
                env.fail(&e);
                errs.push(e);
            }
        }
    }
    if let Some(p) = &a.upsilon {
        let psi = read_field(p)?;
        env.set("upsilon_psi", &p.display().to_string());
        match intertwine_pair(&phi, &psi) {
            Ok((res, cl)) => {
                env.set("intertwine", &res.diagnostics());
                env.invariant("upsilon", upsilon_of(&res, 2 * cech::divisibility(cl)), settings.snap_tol);
            }
            Err(e) => {
                env.fail(&e);
                errs.push(e);
            }
        }
    }
    finish(env, c, errs)
}

fn relax_cmd(cli: &Cli, a: &RelaxArgs) -> Result<u8> {
    let settings = cli.settings();
    let c = &a.common;
    let (phi, prov) = c.src.load_at(c.dims)?;
    let mut env = Envelope::new("relax", &settings, Some(prov));
    env.set("steps", &a.steps);
    env.set("step_size", &a.step_size);
    let mut errs = Vec::new();
    match relax(&phi, a.steps, a.step_size) {
        Ok(r) => {
            env.set("steps_taken", &r.steps_taken);
            env.set("final_step_size", &r.final_step_size);
            env.set("initial_energy", &r.energy_trace[0]);
            env.set("final_energy", r.energy_trace.last().unwrap());
            env.set("samples", &r.invariant_trace);
            let first = &r.invariant_trace[0];
            let last = r.invariant_trace.last().unwrap();
            let kept = first.class == last.class && first.hopf == last.hopf;
            env.set("invariants_constant", &kept);
            if !kept {
                let e = Error::ClassMismatch(format!(
                    "invariants changed during relaxation: class {:?} -> {:?}, hopf {:?} -> {:?}",
                    first.class, last.class, first.hopf, last.hopf
                ));
                env.fail(&e);
                errs.push(e);
            }
            if let Some(p) = &a.trace {
                write_trace(p, &r.energy_trace, &r.invariant_trace)?;
            }
            if let Some(p) = &a.field_out {
                write_field(&r.phi, p)?;
            }
        }
        Err(e) => {
            env.fail(&e);
            errs.push(e);
        }
    }
    finish(env, c, errs)
}

fn write_trace(path: &Path, energy: &[f64], samples: &[hopfion::invariants::RelaxSample]) -> Result<()> {
    let mut out = String::from("step,energy,faddeev_energy,class,hopf_raw,hopf\n");
    let mut it = samples.iter().peekable();
    for (step, e) in energy.iter().enumerate() {
        let _ = write!(out, "{step},{e:.12e}");
        match it.peek() {
            Some(s) if s.step == step => {
                let class = s.class.map(|c| format!("{} {} {}", c[0], c[1], c[2])).unwrap_or_default();
                let raw = s.hopf_raw.map(|h| format!("{h:.6}")).unwrap_or_default();
                let h = s.hopf.map(|h| h.to_string()).unwrap_or_default();
                let _ = writeln!(out, ",{:.12e},{class},{raw},{h}", s.faddeev_energy);
                it.next();
            }
            _ => out.push_str(",,,,\n"),
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}
