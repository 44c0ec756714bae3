//! Where a command's field comes from: a QF3 file or a generator plus lattice.

use clap::Args;
use serde::Serialize;
use std::path::PathBuf;

use hopfion::genmaps::{perturb, GeneratorSpec, Singular};
use hopfion::grid::{read_field, Domain, Field, Kind, Lattice3};
use hopfion::quat::Quaternion;
use hopfion::{Error, Result};

#[derive(Args, Debug, Clone, Default)]
pub struct LatticeArgs {
    /// torus or box; the generator decides when absent.
    #[arg(long)]
    pub domain: Option<String>,
    /// Box half-extent.
    #[arg(long = "R", default_value_t = 6.0)]
    pub radius: f64,
    /// Torus period.
    #[arg(long, default_value_t = 1.0)]
    pub period: f64,
}

#[derive(Args, Debug, Clone, Default)]
pub struct SourceArgs {
    /// Input QF3 field; otherwise --name picks a generator.
    pub input: Option<PathBuf>,
    /// hopf_box, power, t3, p, hopf_pn, singular, random_smooth, bubble.
    #[arg(long)]
    pub name: Option<String>,
    /// Degree for power/bubble, N for hopf_pn.
    #[arg(long, allow_hyphen_values = true)]
    pub n: Option<i64>,
    /// 2x3 integer matrix for t3, rows separated by ';'.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_matrix)]
    pub matrix: Option<[[i64; 3]; 2]>,
    /// Target primary class for p, as m1,m2,m3.
    #[arg(long = "m", allow_hyphen_values = true, value_parser = parse_triple)]
    pub class_target: Option<[i64; 3]>,
    /// eta1, eta2, eta3 or half_degree.
    #[arg(long)]
    pub id: Option<String>,
    /// s3 or s2 for random_smooth.
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long)]
    pub band: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Bubble radius as a fraction of the domain size.
    #[arg(long)]
    pub radius_frac: Option<f64>,
    /// Amplitude of a random smooth perturbation applied after loading.
    #[arg(long)]
    pub perturb: Option<f64>,
    #[arg(long, default_value_t = 2)]
    pub perturb_band: usize,
    #[arg(long, default_value_t = 7)]
    pub perturb_seed: u64,
    #[command(flatten)]
    pub lattice: LatticeArgs,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum SourceInfo {
    File { path: String },
    Generator { spec: GeneratorSpec, dims: [usize; 3], domain: Domain },
}

#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub source: SourceInfo,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<Perturbation>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Perturbation {
    pub amplitude: f64,
    pub band: usize,
    pub seed: u64,
}

fn parse_ints(s: &str) -> std::result::Result<Vec<i64>, String> {
    s.split(',').map(|t| t.trim().parse::<i64>().map_err(|e| format!("{t:?}: {e}"))).collect()
}

fn parse_triple(s: &str) -> std::result::Result<[i64; 3], String> {
    let v = parse_ints(s)?;
    v.try_into().map_err(|v: Vec<i64>| format!("expected 3 integers, got {}", v.len()))
}

fn parse_matrix(s: &str) -> std::result::Result<[[i64; 3]; 2], String> {
    let rows: Vec<&str> = s.split(';').collect();
    if rows.len() != 2 {
        return Err("expected two rows separated by ';'".into());
    }
    Ok([parse_triple(rows[0])?, parse_triple(rows[1])?])
}

pub fn parse_dims(s: &str) -> std::result::Result<[usize; 3], String> {
    let v: Vec<usize> = s
        .split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    match v.len() {
        1 => Ok([v[0]; 3]),
        3 => Ok([v[0], v[1], v[2]]),
        n => Err(format!("expected 1 or 3 sizes, got {n}")),
    }
}

fn need<T>(v: Option<T>, flag: &str, name: &str) -> Result<T> {
    v.ok_or_else(|| Error::Invalid(format!("generator {name} needs --{flag}")))
}

fn to_i32(n: i64) -> Result<i32> {
    i32::try_from(n).map_err(|_| Error::Invalid(format!("--n {n} out of range")))
}

impl SourceArgs {
    pub fn spec(&self) -> Result<GeneratorSpec> {
        let name = self.name.as_deref().ok_or_else(|| Error::Invalid("give an input file or --name".into()))?;
        Ok(match name {
            "hopf_box" => GeneratorSpec::HopfBox,
            "power" => GeneratorSpec::Power { n: to_i32(need(self.n, "n", name)?)? },
            "t3" => GeneratorSpec::T3 { a: need(self.matrix, "matrix", name)? },
            "p" => GeneratorSpec::P { m: need(self.class_target, "m", name)? },
            "hopf_pn" => {
                let n = need(self.n, "n", name)?;
                if n < 1 {
                    return Err(Error::Invalid("hopf_pn needs --n >= 1".into()));
                }
                GeneratorSpec::HopfPn { n: u32::try_from(n).map_err(|_| Error::Invalid("--n too large".into()))? }
            }
            "singular" => GeneratorSpec::Singular { id: Singular::parse(&need(self.id.clone(), "id", name)?)? },
            "random_smooth" => {
                let kind = match self.kind.as_deref().unwrap_or("s3") {
                    "s3" => Kind::S3,
                    "s2" => Kind::S2,
                    k => return Err(Error::Invalid(format!("unknown --kind {k}"))),
                };
                GeneratorSpec::RandomSmooth { kind, band: self.band.unwrap_or(3), seed: self.seed.unwrap_or(0) }
            }
            "bubble" => GeneratorSpec::Bubble { n: to_i32(self.n.unwrap_or(1))?, radius: self.radius_frac.unwrap_or(0.4) },
            other => return Err(Error::Invalid(format!("unknown generator {other}"))),
        })
    }

    pub fn lattice_for(&self, spec: &GeneratorSpec, dims: [usize; 3]) -> Result<Lattice3> {
        let default_box = matches!(
            spec,
            GeneratorSpec::HopfBox | GeneratorSpec::Power { .. } | GeneratorSpec::HopfPn { .. } | GeneratorSpec::Singular { .. }
        );
        let la = &self.lattice;
        let domain = match la.domain.as_deref() {
            Some("box") => Domain::Box { half_extent: la.radius, far_value: Quaternion::ONE },
            Some("torus") => Domain::Torus { periods: [la.period; 3] },
            Some(d) => return Err(Error::Invalid(format!("unknown --domain {d}"))),
            None if default_box => Domain::Box { half_extent: la.radius, far_value: Quaternion::ONE },
            None => Domain::Torus { periods: [la.period; 3] },
        };
        Lattice3::new(dims, domain)
    }

    /// Loads or generates the field, with a perturbation if requested.
    pub fn load_at(&self, dims: Option<[usize; 3]>) -> Result<(Field, Provenance)> {
        let (field, source) = match &self.input {
            Some(path) => {
                if self.name.is_some() || dims.is_some() || self.lattice.domain.is_some() {
                    return Err(Error::Invalid("an input file fixes the field; drop --name/--dims/--domain".into()));
                }
                (read_field(path)?, SourceInfo::File { path: path.display().to_string() })
            }
            None => {
                let spec = self.spec()?;
                let dims = dims.unwrap_or([32; 3]);
                let lat = self.lattice_for(&spec, dims)?;
                let f = spec.generate(lat)?;
                (f, SourceInfo::Generator { spec, dims, domain: lat.domain })
            }
        };
        match self.perturb {
            Some(a) if a != 0.0 => {
                let p = Perturbation { amplitude: a, band: self.perturb_band, seed: self.perturb_seed };
                let field = perturb(&field, p.band, p.seed, p.amplitude)?;
                Ok((field, Provenance { source, perturbation: Some(p) }))
            }
            _ => Ok((field, Provenance { source, perturbation: None })),
        }
    }

}
