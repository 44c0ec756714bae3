//! Lattices on the flat torus and on boxes, quaternion fields, and the QF3 file format.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quat::Quaternion;

pub const FIELD_TOL: f64 = 1e-9;
pub const BOUNDARY_TOL: f64 = 1e-6;
const PROJECT_TOL: f64 = FIELD_TOL * 1e3;
const MIN_DIM: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Domain {
    Torus { periods: [f64; 3] },
    Box { half_extent: f64, far_value: Quaternion },
}

/// Geometry of a rectangular vertex array, x-fastest.
///
/// Periodic meshes wrap in every axis; the others use one-sided stencils at the ends.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mesh {
    pub dims: [usize; 3],
    pub h: [f64; 3],
    pub origin: [f64; 3],
    pub periodic: bool,
}

impl Mesh {
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn coords(&self, n: usize) -> [usize; 3] {
        let i = n % self.dims[0];
        let r = n / self.dims[0];
        [i, r % self.dims[1], r / self.dims[1]]
    }

    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        match axis {
            0 => 1,
            1 => self.dims[0],
            _ => self.dims[0] * self.dims[1],
        }
    }

    pub fn position(&self, c: [usize; 3]) -> [f64; 3] {
        [
            self.origin[0] + c[0] as f64 * self.h[0],
            self.origin[1] + c[1] as f64 * self.h[1],
            self.origin[2] + c[2] as f64 * self.h[2],
        ]
    }

    pub fn cell_volume(&self) -> f64 {
        self.h[0] * self.h[1] * self.h[2]
    }

    /// Trapezoid weight of a vertex (1 everywhere on periodic meshes).
    #[inline]
    pub fn weight(&self, c: [usize; 3]) -> f64 {
        if self.periodic {
            return 1.0;
        }
        let mut w = 1.0;
        for d in 0..3 {
            if c[d] == 0 || c[d] + 1 == self.dims[d] {
                w *= 0.5;
            }
        }
        w
    }

    /// Neighbor index `step` vertices away along `axis`, wrapping on periodic meshes.
    #[inline]
    pub fn offset(&self, c: [usize; 3], axis: usize, step: isize) -> Option<usize> {
        let n = self.dims[axis] as isize;
        let mut t = c[axis] as isize + step;
        if self.periodic {
            t = t.rem_euclid(n);
        } else if t < 0 || t >= n {
            return None;
        }
        let mut cc = c;
        cc[axis] = t as usize;
        Some(self.idx(cc[0], cc[1], cc[2]))
    }

    pub fn max_inv_h(&self) -> f64 {
        self.h.iter().fold(0.0f64, |m, &h| m.max(1.0 / h))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lattice3 {
    pub dims: [usize; 3],
    pub domain: Domain,
}

pub fn make_lattice(dims: [usize; 3], domain: Domain) -> Result<Lattice3> {
    Lattice3::new(dims, domain)
}

impl Lattice3 {
    pub fn new(dims: [usize; 3], domain: Domain) -> Result<Self> {
        if dims.iter().any(|&n| n < MIN_DIM) {
            return Err(Error::BadDims(format!("{dims:?}, each axis needs at least {MIN_DIM}")));
        }
        match domain {
            Domain::Torus { periods } => {
                if periods.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
                    return Err(Error::BadDims(format!("periods {periods:?} must be positive")));
                }
            }
            Domain::Box { half_extent, far_value } => {
                if !(half_extent.is_finite() && half_extent > 0.0) {
                    return Err(Error::BadDims(format!("half extent {half_extent} must be positive")));
                }
                if !far_value.is_finite() {
                    return Err(Error::BadDims("far value must be finite".into()));
                }
            }
        }
        Ok(Lattice3 { dims, domain })
    }

    pub fn torus(n: usize, period: f64) -> Result<Self> {
        Lattice3::new([n; 3], Domain::Torus { periods: [period; 3] })
    }

    pub fn cube(n: usize, half_extent: f64) -> Result<Self> {
        Lattice3::new([n; 3], Domain::Box { half_extent, far_value: Quaternion::ONE })
    }

    pub fn is_torus(&self) -> bool {
        matches!(self.domain, Domain::Torus { .. })
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> [f64; 3] {
        match self.domain {
            Domain::Torus { periods } => {
                [0, 1, 2].map(|d| periods[d] / self.dims[d] as f64)
            }
            Domain::Box { half_extent, .. } => {
                [0, 1, 2].map(|d| 2.0 * half_extent / (self.dims[d] - 1) as f64)
            }
        }
    }

    pub fn mesh(&self) -> Mesh {
        let (origin, periodic) = match self.domain {
            Domain::Torus { .. } => ([0.0; 3], true),
            Domain::Box { half_extent, .. } => ([-half_extent; 3], false),
        };
        Mesh { dims: self.dims, h: self.spacing(), origin, periodic }
    }

    pub fn periods(&self) -> Option<[f64; 3]> {
        match self.domain {
            Domain::Torus { periods } => Some(periods),
            Domain::Box { .. } => None,
        }
    }

    pub fn far_value(&self) -> Option<Quaternion> {
        match self.domain {
            Domain::Box { far_value, .. } => Some(far_value),
            Domain::Torus { .. } => None,
        }
    }

    pub fn with_far_value(mut self, q: Quaternion) -> Self {
        if let Domain::Box { far_value, .. } = &mut self.domain {
            *far_value = q;
        }
        self
    }

    pub fn position(&self, c: [usize; 3]) -> [f64; 3] {
        self.mesh().position(c)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Kind {
    S3,
    S2,
    S1,
    H,
}

impl Kind {
    fn tag(self) -> u8 {
        match self {
            Kind::S3 => 0,
            Kind::S2 => 1,
            Kind::S1 => 2,
            Kind::H => 3,
        }
    }

    fn from_tag(t: u8) -> Result<Self> {
        Ok(match t {
            0 => Kind::S3,
            1 => Kind::S2,
            2 => Kind::S1,
            3 => Kind::H,
            _ => return Err(Error::Format(format!("unknown kind tag {t}"))),
        })
    }

    /// Projects `q` onto the target, or reports why it cannot be.
    pub fn project(self, q: Quaternion) -> std::result::Result<Quaternion, String> {
        if !q.is_finite() {
            return Err(format!("non-finite value {q:?}"));
        }
        let p = match self {
            Kind::H => return Ok(q),
            Kind::S3 => q,
            Kind::S2 => {
                if q.w.abs() > PROJECT_TOL * q.norm().max(1.0) {
                    return Err(format!("real part {} on an S2 field", q.w));
                }
                q.im_part()
            }
            Kind::S1 => {
                if q.y.hypot(q.z) > PROJECT_TOL * q.norm().max(1.0) {
                    return Err(format!("j/k part on an S1 field: {q:?}"));
                }
                Quaternion::new(q.w, q.x, 0.0, 0.0)
            }
        };
        let n = p.norm();
        if n < 1e-12 {
            return Err(format!("value {q:?} too small to normalize"));
        }
        Ok(p.scale(1.0 / n))
    }

    /// Strict membership check without projection.
    pub fn check(self, q: Quaternion) -> std::result::Result<(), String> {
        if !q.is_finite() {
            return Err(format!("non-finite value {q:?}"));
        }
        let bad = match self {
            Kind::H => false,
            Kind::S3 => (q.norm() - 1.0).abs() > FIELD_TOL,
            Kind::S2 => q.w.abs() > FIELD_TOL || (q.norm() - 1.0).abs() > FIELD_TOL,
            Kind::S1 => {
                q.y.abs() > FIELD_TOL || q.z.abs() > FIELD_TOL || (q.norm() - 1.0).abs() > FIELD_TOL
            }
        };
        if bad {
            Err(format!("{q:?} is not a valid {self:?} value"))
        } else {
            Ok(())
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    pub lattice: Lattice3,
    pub kind: Kind,
    pub values: Vec<Quaternion>,
}

impl Field {
    /// Wraps values after checking the kind invariant (projecting small defects away).
    pub fn new(lattice: Lattice3, kind: Kind, mut values: Vec<Quaternion>) -> Result<Self> {
        if values.len() != lattice.len() {
            return Err(Error::BadDims(format!(
                "{} values for a lattice of {} vertices",
                values.len(),
                lattice.len()
            )));
        }
        values
            .par_iter_mut()
            .try_for_each(|v| kind.project(*v).map(|p| *v = p))
            .map_err(Error::KindViolation)?;
        Ok(Field { lattice, kind, values })
    }

    pub fn constant(lattice: Lattice3, kind: Kind, q: Quaternion) -> Result<Self> {
        Field::new(lattice, kind, vec![q; lattice.len()])
    }

    pub fn mesh(&self) -> Mesh {
        self.lattice.mesh()
    }

    /// Largest deviation from far_value on the two outermost shells (0 on the torus).
    pub fn outer_shell_deviation(&self) -> f64 {
        let Some(far) = self.lattice.far_value() else { return 0.0 };
        let m = self.mesh();
        self.values
            .par_iter()
            .enumerate()
            .filter(|(n, _)| {
                let c = m.coords(*n);
                (0..3).any(|d| c[d] < 2 || c[d] + 2 >= m.dims[d])
            })
            .map(|(_, v)| (*v - far).norm())
            .reduce(|| 0.0, f64::max)
    }

    /// Pointwise map into a new field of the given kind.
    pub fn map<F>(&self, kind: Kind, f: F) -> Result<Field>
    where
        F: Fn(Quaternion) -> Quaternion + Sync,
    {
        let values = self.values.par_iter().map(|&q| f(q)).collect();
        Field::new(self.lattice, kind, values)
    }

    /// Pointwise binary map; lattices must agree.
    pub fn zip<F>(&self, other: &Field, kind: Kind, f: F) -> Result<Field>
    where
        F: Fn(Quaternion, Quaternion) -> Quaternion + Sync,
    {
        if self.lattice.dims != other.lattice.dims {
            return Err(Error::BadDims("fields live on different lattices".into()));
        }
        let values = self
            .values
            .par_iter()
            .zip(other.values.par_iter())
            .map(|(&a, &b)| f(a, b))
            .collect();
        Field::new(self.lattice, kind, values)
    }
}

/// Evaluates `f` at every vertex position.
pub fn sample<F>(lattice: Lattice3, f: F, kind: Kind) -> Result<Field>
where
    F: Fn([f64; 3]) -> Quaternion + Sync,
{
    let m = lattice.mesh();
    let values = (0..m.len()).into_par_iter().map(|n| f(m.position(m.coords(n)))).collect();
    Field::new(lattice, kind, values)
}

const MAGIC: [u8; 4] = [0x51, 0x46, 0x33, 0x00];
const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 12 + 24 + 32;

pub fn encode_field(field: &Field) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + field.values.len() * 32);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let (tag, params, far) = match field.lattice.domain {
        Domain::Torus { periods } => (0u8, periods, Quaternion::ZERO),
        Domain::Box { half_extent, far_value } => (1u8, [half_extent, 0.0, 0.0], far_value),
    };
    out.push(tag);
    out.push(field.kind.tag());
    out.extend_from_slice(&0u16.to_le_bytes());
    for n in field.lattice.dims {
        out.extend_from_slice(&(n as u32).to_le_bytes());
    }
    for p in params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    for c in far.to_array() {
        out.extend_from_slice(&c.to_le_bytes());
    }
    for v in &field.values {
        for c in v.to_array() {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Format(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode_field(buf: &[u8]) -> Result<Field> {
    let mut c = Cursor { buf, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let dtag = c.u8()?;
    let kind = Kind::from_tag(c.u8()?)?;
    if c.u16()? != 0 {
        return Err(Error::Format("reserved bytes must be zero".into()));
    }
    let dims = [c.u32()? as usize, c.u32()? as usize, c.u32()? as usize];
    let params = [c.f64()?, c.f64()?, c.f64()?];
    let far = Quaternion::new(c.f64()?, c.f64()?, c.f64()?, c.f64()?);
    let domain = match dtag {
        0 => Domain::Torus { periods: params },
        1 => Domain::Box { half_extent: params[0], far_value: far },
        t => return Err(Error::Format(format!("unknown domain tag {t}"))),
    };
    let lattice = Lattice3::new(dims, domain).map_err(|e| Error::Format(e.to_string()))?;
    let n = lattice.len();
    let expected = HEADER_LEN + n * 32;
    if buf.len() != expected {
        return Err(Error::Format(format!("length {} but header implies {expected}", buf.len())));
    }
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        let q = Quaternion::new(c.f64()?, c.f64()?, c.f64()?, c.f64()?);
        kind.check(q).map_err(Error::KindViolation)?;
        values.push(q);
    }
    Ok(Field { lattice, kind, values })
}

pub fn write_field(field: &Field, path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(&encode_field(field))?;
    f.flush()?;
    Ok(())
}

pub fn read_field(path: impl AsRef<Path>) -> Result<Field> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    decode_field(&buf)
}
