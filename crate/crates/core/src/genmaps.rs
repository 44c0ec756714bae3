//! Example maps: Hopf map, power maps, torus maps of prescribed class, p_N, singular examples, random fields.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::elliptic::fft3;
use crate::error::{Error, Result};
use crate::grid::{sample, Domain, Field, Kind, Lattice3};
use crate::quat::{exp_im, sigma, Quaternion, UnitComplex};

const TABLE_N: usize = 4096;
const BUMP_A: f64 = 0.3;
/// Radial profiles reach their limit at this fraction of the box half-extent.
pub const TAPER_END: f64 = 0.9;
/// Per-component rms of the random Lie field at band 1.
pub const RANDOM_AMPLITUDE: f64 = 1.2;

fn bump(s: f64) -> f64 {
    if s <= 0.0 {
        1.0
    } else if s >= 1.0 {
        0.0
    } else {
        (-BUMP_A / (1.0 - s.powi(6))).exp() / (-BUMP_A).exp()
    }
}

struct ProfileTable {
    e: Vec<f64>,
    z: f64,
}

fn table() -> &'static ProfileTable {
    static T: OnceLock<ProfileTable> = OnceLock::new();
    T.get_or_init(|| {
        // cumulative 4-point Gauss-Legendre per cell
        let g = [
            (0.5 - 0.5 * 0.861_136_311_594_052_6, 0.5 * 0.347_854_845_137_453_9),
            (0.5 - 0.5 * 0.339_981_043_584_856_3, 0.5 * 0.652_145_154_862_546_1),
            (0.5 + 0.5 * 0.339_981_043_584_856_3, 0.5 * 0.652_145_154_862_546_1),
            (0.5 + 0.5 * 0.861_136_311_594_052_6, 0.5 * 0.347_854_845_137_453_9),
        ];
        let h = 1.0 / TABLE_N as f64;
        let mut e = vec![0.0; TABLE_N + 1];
        for i in 0..TABLE_N {
            let cell: f64 = g.iter().map(|&(x, w)| w * bump((i as f64 + x) * h)).sum::<f64>() * h;
            e[i + 1] = e[i] + cell;
        }
        let z = e[TABLE_N];
        e.iter_mut().for_each(|v| *v /= z);
        ProfileTable { e, z }
    })
}

/// Smooth monotone step: 0 for t ≤ 0, 1 for t ≥ 1, all derivatives vanishing at t = 1.
pub fn profile(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let tb = table();
    let h = 1.0 / TABLE_N as f64;
    let s = t * TABLE_N as f64;
    let i = (s.floor() as usize).min(TABLE_N - 1);
    let u = s - i as f64;
    // cubic Hermite with exact derivatives
    let (y0, y1) = (tb.e[i], tb.e[i + 1]);
    let (m0, m1) = (bump(i as f64 * h) / tb.z * h, bump((i + 1) as f64 * h) / tb.z * h);
    let u2 = u * u;
    let u3 = u2 * u;
    (2.0 * u3 - 3.0 * u2 + 1.0) * y0 + (u3 - 2.0 * u2 + u) * m0 + (-2.0 * u3 + 3.0 * u2) * y1 + (u3 - u2) * m1
}

/// Compactified radial angle: 0 at the origin, π for r ≥ radius.
pub fn radial_angle(r: f64, radius: f64) -> f64 {
    PI * profile(r / radius)
}

fn unit_dir(p: [f64; 3]) -> ([f64; 3], f64) {
    let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    if r == 0.0 {
        ([0.0; 3], 0.0)
    } else {
        ([p[0] / r, p[1] / r, p[2] / r], r)
    }
}

/// exp(n F(|p − c|) p̂): a degree-n map, constant (−1)ⁿ outside the ball.
pub fn bubble_value(p: [f64; 3], center: [f64; 3], radius: f64, n: i32) -> Quaternion {
    let (d, r) = unit_dir([p[0] - center[0], p[1] - center[1], p[2] - center[2]]);
    if r >= radius {
        return if n % 2 == 0 { Quaternion::ONE } else { -Quaternion::ONE };
    }
    let f = n as f64 * radial_angle(r, radius);
    exp_im([d[0] * f, d[1] * f, d[2] * f])
}

/// Radius where box profiles reach their limit: 0.9R, pulled in so the two outer shells are constant.
pub fn taper_radius(lat: &Lattice3) -> f64 {
    match lat.domain {
        Domain::Box { half_extent, .. } => (TAPER_END * half_extent).min(half_extent - lat.spacing()[0]),
        Domain::Torus { .. } => f64::INFINITY,
    }
}

fn box_radius(lat: &Lattice3, min_r: f64) -> Result<f64> {
    match lat.domain {
        Domain::Box { half_extent, .. } if half_extent >= min_r => Ok(half_extent),
        Domain::Box { half_extent, .. } => Err(Error::Domain(format!("box half-extent {half_extent} < {min_r}"))),
        Domain::Torus { .. } => Err(Error::Domain("generator needs a box".into())),
    }
}

/// σ∘S with S the inverse stereographic map, compactified radially so the outer shells equal i.
pub fn gen_hopf_box(lat: Lattice3) -> Result<Field> {
    box_radius(&lat, 4.0)?;
    let rho = taper_radius(&lat);
    let lat = lat.with_far_value(Quaternion::I);
    sample(lat, |p| sigma(bubble_value(p, [0.0; 3], rho, 1)), Kind::S2)
}

/// q ↦ qⁿ composed with the compactified S; constant (−1)ⁿ near the boundary.
pub fn gen_power(n: i32, lat: Lattice3) -> Result<Field> {
    box_radius(&lat, 4.0)?;
    let rho = taper_radius(&lat);
    let far = if n % 2 == 0 { Quaternion::ONE } else { -Quaternion::ONE };
    let lat = lat.with_far_value(far);
    sample(lat, |p| bubble_value(p, [0.0; 3], rho, n), Kind::S3)
}

/// Degree-n bubble of the given radius centred in the domain.
pub fn gen_bubble(n: i32, radius_frac: f64, lat: Lattice3) -> Result<Field> {
    let (center, scale) = domain_frame(&lat);
    let far = if n % 2 == 0 { Quaternion::ONE } else { -Quaternion::ONE };
    let lat = if lat.is_torus() { lat } else { lat.with_far_value(far) };
    sample(lat, |p| bubble_value(p, center, radius_frac * scale, n), Kind::S3)
}

fn domain_frame(lat: &Lattice3) -> ([f64; 3], f64) {
    match lat.domain {
        Domain::Torus { periods } => (periods.map(|l| 0.5 * l), periods.iter().cloned().fold(f64::MAX, f64::min)),
        Domain::Box { half_extent, .. } => ([0.0; 3], 2.0 * half_extent),
    }
}

fn torus_periods(lat: &Lattice3) -> Result<[f64; 3]> {
    lat.periods().ok_or_else(|| Error::Domain("generator needs a torus".into()))
}

/// Degree-one collapse of the unit square onto S², edges to i.
#[inline]
fn collapse(y: [f64; 2]) -> Quaternion {
    let s = [y[0] - y[0].floor() - 0.5, y[1] - y[1].floor() - 0.5];
    let r = s[0].hypot(s[1]);
    let f = PI * (1.0 - profile(r / 0.5));
    let (c, sn) = (f.cos(), f.sin());
    if r == 0.0 {
        return Quaternion::new(0.0, c, 0.0, 0.0);
    }
    Quaternion::new(0.0, c, sn * s[0] / r, -sn * s[1] / r)
}

/// T³ → T² → S² for an integer 2×3 matrix; the class is the cross product of the rows.
pub fn gen_t3(a: [[i64; 3]; 2], lat: Lattice3) -> Result<Field> {
    let l = torus_periods(&lat)?;
    sample(
        lat,
        |p| {
            let x = [p[0] / l[0], p[1] / l[1], p[2] / l[2]];
            let y = [0, 1].map(|r| a[r][0] as f64 * x[0] + a[r][1] as f64 * x[1] + a[r][2] as f64 * x[2]);
            collapse(y)
        },
        Kind::S2,
    )
}

pub fn class_of_matrix(a: [[i64; 3]; 2]) -> [i64; 3] {
    let (r, s) = (a[0], a[1]);
    [r[1] * s[2] - r[2] * s[1], r[2] * s[0] - r[0] * s[2], r[0] * s[1] - r[1] * s[0]]
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// A small integer matrix whose class is `m`.
pub fn matrix_for_class(m: [i64; 3]) -> Result<[[i64; 3]; 2]> {
    let g = gcd(gcd(m[0], m[1]), m[2]);
    if g == 0 {
        return Ok([[0; 3]; 2]);
    }
    let mp = m.map(|v| v / g);
    let b = mp.iter().map(|v| v.abs()).max().unwrap_or(1).clamp(1, 6);
    let mut rows: Vec<[i64; 3]> = (-b..=b)
        .flat_map(|x| (-b..=b).flat_map(move |y| (-b..=b).map(move |z| [x, y, z])))
        .filter(|r| *r != [0; 3])
        .collect();
    // shortest rows first, so the map stretches the square as little as possible
    rows.sort_by_key(|r| (r.iter().map(|v| v * v).sum::<i64>(), *r));
    let mut best: Option<(i64, [[i64; 3]; 2])> = None;
    for r1 in rows.iter().filter(|r| r[0] * mp[0] + r[1] * mp[1] + r[2] * mp[2] == 0) {
        for r2 in &rows {
            if class_of_matrix([*r1, *r2]) == mp {
                let cost = r1.iter().chain(r2.iter()).map(|v| v * v).sum::<i64>();
                if best.is_none_or(|(c, _)| cost < c) {
                    best = Some((cost, [*r1, *r2]));
                }
                break;
            }
        }
    }
    if let Some((_, [r1, r2])) = best {
        return Ok([r1, r2.map(|v| v * g)]);
    }
    Err(Error::Invalid(format!("no small matrix found for class {m:?}")))
}

/// p_(m₁,m₂,m₃): a torus map with primary class m.
pub fn gen_p(m: [i64; 3], lat: Lattice3) -> Result<Field> {
    gen_t3(matrix_for_class(m)?, lat)
}

/// [z:w] ↦ [zᴺ:wᴺ] in the stereographic chart from −i (i ↦ 0).
#[inline]
pub fn pn_value(q: Quaternion, n: u32) -> Quaternion {
    let rho = q.y.hypot(q.z);
    if rho == 0.0 {
        return Quaternion::new(0.0, q.x.signum(), 0.0, 0.0);
    }
    // |z| = ρ/(1+a) = (1−a)/ρ; pick the stable form
    let t = if q.x >= 0.0 { rho / (1.0 + q.x) } else { (1.0 - q.x) / rho };
    let phase = UnitComplex { re: q.y / rho, im: q.z / rho };
    let mut p = UnitComplex::ONE;
    for _ in 0..n {
        p = p * phase;
    }
    let tn = t.powi(n as i32);
    let (a, s) = if tn <= 1.0 {
        let t2 = tn * tn;
        ((1.0 - t2) / (1.0 + t2), 2.0 * tn / (1.0 + t2))
    } else {
        let u2 = 1.0 / (tn * tn);
        ((u2 - 1.0) / (u2 + 1.0), 2.0 / tn / (1.0 + u2))
    };
    Quaternion::new(0.0, a, s * p.re, s * p.im)
}

pub fn gen_pn(phi: &Field, n: u32) -> Result<Field> {
    if n == 0 {
        return Err(Error::Invalid("N must be positive".into()));
    }
    crate::forms::expect_kind(phi, Kind::S2)?;
    phi.map(Kind::S2, |q| pn_value(q, n))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Singular {
    Eta1,
    Eta2,
    Eta3,
    HalfDegree,
}

impl Singular {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "eta1" => Ok(Singular::Eta1),
            "eta2" => Ok(Singular::Eta2),
            "eta3" => Ok(Singular::Eta3),
            "half_degree" => Ok(Singular::HalfDegree),
            _ => Err(Error::Invalid(format!("unknown singular map {s}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Singular::Eta1 => "eta1",
            Singular::Eta2 => "eta2",
            Singular::Eta3 => "eta3",
            Singular::HalfDegree => "half_degree",
        }
    }
}

fn circle_value(g: f64) -> Quaternion {
    Quaternion::new(0.0, g.cos(), g.sin(), 0.0)
}

/// The printed singular examples on a box, singular point shifted by h/3 off the vertex.
pub fn gen_singular(id: Singular, lat: Lattice3) -> Result<Field> {
    let r = box_radius(&lat, 0.0)?;
    let h = lat.spacing()[0];
    let c = [h / 3.0; 3];
    let rel = move |p: [f64; 3]| [p[0] - c[0], p[1] - c[1], p[2] - c[2]];
    // blend from the printed formula to a constant over [ρ − 0.1R, ρ]
    let rho = taper_radius(&lat);
    let tau = move |rr: f64| profile((rr - rho + 0.1 * r) / (0.1 * r));
    match id {
        Singular::Eta1 => {
            let lat = lat.with_far_value(Quaternion::I);
            sample(
                lat,
                |p| {
                    let (d, _) = unit_dir(rel(p));
                    Quaternion::new(0.0, d[0], d[1], d[2])
                },
                Kind::S2,
            )
        }
        Singular::Eta2 | Singular::Eta3 => {
            let g = move |rr: f64| match id {
                Singular::Eta2 => rr.ln(),
                // keep |ln| away from its zero at 1
                _ => (rr / (std::f64::consts::E * r)).ln().abs().ln(),
            };
            let g_far = g(rho - 0.05 * r);
            let lat = lat.with_far_value(circle_value(g_far));
            sample(
                lat,
                move |p| {
                    let (_, rr) = unit_dir(rel(p));
                    let t = tau(unit_dir(p).1);
                    circle_value((1.0 - t) * g(rr) + t * g_far)
                },
                Kind::S2,
            )
        }
        Singular::HalfDegree => {
            let lat = lat.with_far_value(Quaternion::ONE);
            sample(
                lat,
                move |p| {
                    let x = rel(p);
                    let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
                    let k = (1.0 - tau(unit_dir(p).1)) / r2;
                    let mut y = [-x[0] * k, x[1] * k, x[2] * k];
                    let ny = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
                    if ny > 1.0 {
                        y = y.map(|v| v / ny);
                    }
                    let y2 = y[0] * y[0] + y[1] * y[1] + y[2] * y[2];
                    let den = 1.0 + y2;
                    Quaternion::new((1.0 - y2) / den, 2.0 * y[0] / den, 2.0 * y[1] / den, 2.0 * y[2] / den)
                },
                Kind::S3,
            )
        }
    }
}

/// Band-limited random sp(1) 0-form, mean free, deterministic per seed.
pub fn random_lie_field(band: usize, seed: u64, amplitude: f64, lat: &Lattice3) -> Result<Vec<[f64; 3]>> {
    let dims = lat.dims;
    if dims.iter().any(|&n| band > n / 4) {
        return Err(Error::Invalid(format!("band {band} exceeds dims/4")));
    }
    let mut out = vec![[0.0; 3]; lat.len()];
    if band == 0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = band as isize;
    let modes: Vec<[isize; 3]> = (-b..=b)
        .flat_map(|x| (-b..=b).flat_map(move |y| (-b..=b).map(move |z| [x, y, z])))
        .filter(|m| *m != [0, 0, 0])
        .collect();
    let sd = amplitude * (2.0 / modes.len() as f64).sqrt();
    for comp in 0..3 {
        let mut spec = vec![Complex64::new(0.0, 0.0); lat.len()];
        for m in &modes {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            let k = [0, 1, 2].map(|d| m[d].rem_euclid(dims[d] as isize) as usize);
            spec[k[0] + dims[0] * (k[1] + dims[1] * k[2])] = Complex64::new(re, im) * sd;
        }
        fft3(dims, &mut spec, true);
        let scale = lat.len() as f64;
        for (o, z) in out.iter_mut().zip(&spec) {
            o[comp] = z.re * scale;
        }
    }
    Ok(out)
}

/// Random Lie field, tapered to zero near the boundary of a box.
fn tapered_lie_field(band: usize, seed: u64, amplitude: f64, lat: &Lattice3) -> Result<Vec<[f64; 3]>> {
    let mut v = random_lie_field(band, seed, amplitude, lat)?;
    if let Domain::Box { half_extent: r, .. } = lat.domain {
        let rho = taper_radius(lat);
        let m = lat.mesh();
        v.par_iter_mut().enumerate().for_each(|(n, x)| {
            let p = m.position(m.coords(n));
            let rr = p.iter().map(|c| c * c).sum::<f64>().sqrt();
            let t = 1.0 - profile((rr - 0.5 * r) / (rho - 0.5 * r));
            *x = x.map(|c| c * t);
        });
    }
    Ok(v)
}

/// Rotates an S2 field by exp of a small random Lie field (S3 fields are multiplied on the left).
pub fn perturb(phi: &Field, band: usize, seed: u64, amplitude: f64) -> Result<Field> {
    if !matches!(phi.kind, Kind::S2 | Kind::S3) {
        return Err(Error::Invalid("only S2 and S3 fields can be perturbed".into()));
    }
    let v = tapered_lie_field(band, seed, amplitude, &phi.lattice)?;
    let values: Vec<Quaternion> = phi
        .values
        .par_iter()
        .zip(v.par_iter())
        .map(|(&p, x)| {
            let g = exp_im(*x);
            match phi.kind {
                Kind::S2 => (g * p * g.conj()).im_part(),
                _ => g * p,
            }
        })
        .collect();
    Field::new(phi.lattice, phi.kind, values)
}

/// exp of a random band-limited sp(1) field (S3), or i conjugated by one (S2).
///
/// The amplitude is RANDOM_AMPLITUDE/band radians, so gradients do not grow with the band.
/// On a box the Lie field is tapered to zero near the boundary.
pub fn gen_random_smooth(kind: Kind, band: usize, seed: u64, lat: Lattice3) -> Result<Field> {
    let v = tapered_lie_field(band, seed, RANDOM_AMPLITUDE / band.max(1) as f64, &lat)?;
    let lat = match kind {
        Kind::S3 if !lat.is_torus() => lat.with_far_value(Quaternion::ONE),
        Kind::S2 if !lat.is_torus() => lat.with_far_value(Quaternion::I),
        Kind::S3 | Kind::S2 => lat,
        _ => return Err(Error::Invalid("random fields are S3 or S2".into())),
    };
    let values: Vec<Quaternion> = v
        .par_iter()
        .map(|x| {
            let g = exp_im(*x);
            if kind == Kind::S3 {
                g
            } else {
                sigma(g)
            }
        })
        .collect();
    Field::new(lat, kind, values)
}

/// λ = exp(2πi·k·x_axis/L): winds k times along one torus axis.
pub fn gen_winding(axis: usize, k: i64, lat: Lattice3) -> Result<Field> {
    let l = torus_periods(&lat)?;
    sample(lat, |p| UnitComplex::from_angle(2.0 * PI * k as f64 * p[axis] / l[axis]).quat(), Kind::S1)
}

/// Named generator with its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum GeneratorSpec {
    HopfBox,
    Power { n: i32 },
    T3 { a: [[i64; 3]; 2] },
    P { m: [i64; 3] },
    HopfPn { n: u32 },
    Singular { id: Singular },
    RandomSmooth { kind: Kind, band: usize, seed: u64 },
    Bubble { n: i32, radius: f64 },
}

impl GeneratorSpec {
    pub fn generate(&self, lat: Lattice3) -> Result<Field> {
        match self {
            GeneratorSpec::HopfBox => gen_hopf_box(lat),
            GeneratorSpec::Power { n } => gen_power(*n, lat),
            GeneratorSpec::T3 { a } => gen_t3(*a, lat),
            GeneratorSpec::P { m } => gen_p(*m, lat),
            GeneratorSpec::HopfPn { n } => gen_pn(&gen_hopf_box(lat)?, *n),
            GeneratorSpec::Singular { id } => gen_singular(*id, lat),
            GeneratorSpec::RandomSmooth { kind, band, seed } => gen_random_smooth(*kind, *band, *seed, lat),
            GeneratorSpec::Bubble { n, radius } => gen_bubble(*n, *radius, lat),
        }
    }

    pub fn kind(&self) -> Kind {
        match self {
            GeneratorSpec::Power { .. } | GeneratorSpec::Bubble { .. } => Kind::S3,
            GeneratorSpec::Singular { id: Singular::HalfDegree } => Kind::S3,
            GeneratorSpec::RandomSmooth { kind, .. } => *kind,
            _ => Kind::S2,
        }
    }
}
