//! Vertex-collocated discrete exterior calculus with quaternion coefficients.
//!
//! Component order: 1-forms (dx¹, dx², dx³), 2-forms (dx²∧dx³, dx³∧dx¹, dx¹∧dx²).

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Kind, Mesh};
use crate::quat::Quaternion;

pub const LIFT_CHECK_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ValueKind {
    Scalar,
    Sp1,
    Quaternion,
}

#[derive(Clone, Debug)]
pub struct DiscreteForm {
    pub degree: usize,
    pub kind: ValueKind,
    pub mesh: Mesh,
    pub comps: Vec<Vec<Quaternion>>,
}

pub fn component_count(degree: usize) -> usize {
    match degree {
        0 | 3 => 1,
        _ => 3,
    }
}

impl DiscreteForm {
    pub fn new(degree: usize, kind: ValueKind, mesh: Mesh, comps: Vec<Vec<Quaternion>>) -> Result<Self> {
        if degree > 3 || comps.len() != component_count(degree) {
            return Err(Error::Degree(format!("{} components for a {degree}-form", comps.len())));
        }
        if comps.iter().any(|c| c.len() != mesh.len()) {
            return Err(Error::BadDims("component length does not match mesh".into()));
        }
        Ok(DiscreteForm { degree, kind, mesh, comps })
    }

    pub fn zeros(degree: usize, kind: ValueKind, mesh: Mesh) -> Self {
        DiscreteForm { degree, kind, mesh, comps: vec![vec![Quaternion::ZERO; mesh.len()]; component_count(degree)] }
    }

    /// Scalar form from real component arrays.
    pub fn from_scalars(degree: usize, mesh: Mesh, comps: Vec<Vec<f64>>) -> Result<Self> {
        let comps = comps.into_iter().map(|c| c.into_iter().map(Quaternion::real).collect()).collect();
        DiscreteForm::new(degree, ValueKind::Scalar, mesh, comps)
    }

    pub fn scalar_comp(&self, c: usize) -> Vec<f64> {
        self.comps[c].iter().map(|q| q.w).collect()
    }

    pub fn add(&self, o: &DiscreteForm) -> Result<DiscreteForm> {
        self.combine(o, |a, b| a + b)
    }

    pub fn sub(&self, o: &DiscreteForm) -> Result<DiscreteForm> {
        self.combine(o, |a, b| a - b)
    }

    fn combine(&self, o: &DiscreteForm, f: impl Fn(Quaternion, Quaternion) -> Quaternion + Sync) -> Result<DiscreteForm> {
        if self.degree != o.degree || self.mesh.dims != o.mesh.dims {
            return Err(Error::Degree("mismatched forms".into()));
        }
        let comps = self
            .comps
            .iter()
            .zip(&o.comps)
            .map(|(a, b)| a.par_iter().zip(b.par_iter()).map(|(&x, &y)| f(x, y)).collect())
            .collect();
        let kind = if self.kind == o.kind { self.kind } else { ValueKind::Quaternion };
        Ok(DiscreteForm { degree: self.degree, kind, mesh: self.mesh, comps })
    }

    pub fn scale(&self, s: f64) -> DiscreteForm {
        self.map_values(self.kind, |q| q * s)
    }

    pub fn map_values(&self, kind: ValueKind, f: impl Fn(Quaternion) -> Quaternion + Sync) -> DiscreteForm {
        let comps = self.comps.iter().map(|c| c.par_iter().map(|&q| f(q)).collect()).collect();
        DiscreteForm { degree: self.degree, kind, mesh: self.mesh, comps }
    }

    /// Largest pointwise norm over all components.
    pub fn max_norm(&self) -> f64 {
        self.comps
            .iter()
            .map(|c| c.par_iter().map(|q| q.norm()).reduce(|| 0.0, f64::max))
            .fold(0.0, f64::max)
    }

    /// Largest pointwise component-vector norm restricted to vertices where `keep` holds.
    pub fn max_norm_where(&self, keep: impl Fn([usize; 3]) -> bool + Sync) -> f64 {
        let m = self.mesh;
        (0..m.len())
            .into_par_iter()
            .filter(|&n| keep(m.coords(n)))
            .map(|n| self.comps.iter().map(|c| c[n].norm_sq()).sum::<f64>().sqrt())
            .reduce(|| 0.0, f64::max)
    }

    /// Weighted L¹ norm of the pointwise component-vector norm.
    pub fn l1_norm(&self) -> f64 {
        let m = self.mesh;
        let vals: Vec<f64> = (0..m.len())
            .into_par_iter()
            .map(|n| m.weight(m.coords(n)) * self.comps.iter().map(|c| c[n].norm_sq()).sum::<f64>().sqrt())
            .collect();
        pairwise_sum(&vals) * m.cell_volume()
    }
}

/// Central difference along `axis`; second-order one-sided at the ends of non-periodic meshes.
pub fn partial(mesh: &Mesh, v: &[Quaternion], axis: usize) -> Vec<Quaternion> {
    (0..mesh.len()).into_par_iter().map(|n| partial_at(mesh, v, n, axis)).collect()
}

#[inline]
pub fn partial_at(mesh: &Mesh, v: &[Quaternion], n: usize, axis: usize) -> Quaternion {
    let nd = mesh.dims[axis];
    let s = mesh.stride(axis);
    let inv = 1.0 / (2.0 * mesh.h[axis]);
    let c = (n / s) % nd;
    if mesh.periodic {
        let up = if c + 1 == nd { n + s - nd * s } else { n + s };
        let dn = if c == 0 { n + (nd - 1) * s } else { n - s };
        (v[up] - v[dn]) * inv
    } else if c == 0 {
        (v[n] * -3.0 + v[n + s] * 4.0 - v[n + 2 * s]) * inv
    } else if c + 1 == nd {
        (v[n] * 3.0 - v[n - s] * 4.0 + v[n - 2 * s]) * inv
    } else {
        (v[n + s] - v[n - s]) * inv
    }
}

/// Vertices and weights of the stencil used by [`partial_at`].
pub fn stencil_at(mesh: &Mesh, n: usize, axis: usize) -> [(usize, f64); 3] {
    let nd = mesh.dims[axis];
    let s = mesh.stride(axis);
    let inv = 1.0 / (2.0 * mesh.h[axis]);
    let c = (n / s) % nd;
    if mesh.periodic {
        let up = if c + 1 == nd { n + s - nd * s } else { n + s };
        let dn = if c == 0 { n + (nd - 1) * s } else { n - s };
        [(up, inv), (dn, -inv), (n, 0.0)]
    } else if c == 0 {
        [(n, -3.0 * inv), (n + s, 4.0 * inv), (n + 2 * s, -inv)]
    } else if c + 1 == nd {
        [(n, 3.0 * inv), (n - s, -4.0 * inv), (n - 2 * s, inv)]
    } else {
        [(n + s, inv), (n - s, -inv), (n, 0.0)]
    }
}

/// Central-difference differential of a field, a quaternion-valued 1-form.
pub fn dfield(field: &Field) -> DiscreteForm {
    dvalues(&field.mesh(), &field.values)
}

pub fn dvalues(mesh: &Mesh, v: &[Quaternion]) -> DiscreteForm {
    let comps = (0..3).map(|d| partial(mesh, v, d)).collect();
    DiscreteForm { degree: 1, kind: ValueKind::Quaternion, mesh: *mesh, comps }
}

/// Exterior derivative (gradient, curl, divergence).
pub fn d(form: &DiscreteForm) -> Result<DiscreteForm> {
    let m = &form.mesh;
    let c = &form.comps;
    let p = |k: usize, ax: usize| partial(m, &c[k], ax);
    let comps = match form.degree {
        0 => (0..3).map(|ax| p(0, ax)).collect(),
        1 => vec![sub(&p(2, 1), &p(1, 2)), sub(&p(0, 2), &p(2, 0)), sub(&p(1, 0), &p(0, 1))],
        2 => vec![add3(&p(0, 0), &p(1, 1), &p(2, 2))],
        k => return Err(Error::Degree(format!("d of a {k}-form"))),
    };
    Ok(DiscreteForm { degree: form.degree + 1, kind: form.kind, mesh: *m, comps })
}

/// Codifferential δ = (−1)^k ⋆d⋆ for the flat diagonal metric.
pub fn codiff(form: &DiscreteForm) -> Result<DiscreteForm> {
    let m = &form.mesh;
    let c = &form.comps;
    let p = |k: usize, ax: usize| partial(m, &c[k], ax);
    let comps = match form.degree {
        1 => vec![neg(&add3(&p(0, 0), &p(1, 1), &p(2, 2)))],
        2 => vec![sub(&p(2, 1), &p(1, 2)), sub(&p(0, 2), &p(2, 0)), sub(&p(1, 0), &p(0, 1))],
        3 => (0..3).map(|ax| neg(&p(0, ax))).collect(),
        k => return Err(Error::Degree(format!("codifferential of a {k}-form"))),
    };
    Ok(DiscreteForm { degree: form.degree - 1, kind: form.kind, mesh: *m, comps })
}

fn sub(a: &[Quaternion], b: &[Quaternion]) -> Vec<Quaternion> {
    a.par_iter().zip(b.par_iter()).map(|(&x, &y)| x - y).collect()
}

fn neg(a: &[Quaternion]) -> Vec<Quaternion> {
    a.par_iter().map(|&x| -x).collect()
}

fn add3(a: &[Quaternion], b: &[Quaternion], c: &[Quaternion]) -> Vec<Quaternion> {
    (0..a.len()).into_par_iter().map(|n| a[n] + b[n] + c[n]).collect()
}

/// Pointwise wedge of component arrays at one vertex, quaternion order preserved.
#[inline]
pub fn wedge_at(da: usize, a: &[Quaternion], db: usize, b: &[Quaternion]) -> Vec<Quaternion> {
    match (da, db) {
        (0, _) => b.iter().map(|&q| a[0] * q).collect(),
        (_, 0) => a.iter().map(|&q| q * b[0]).collect(),
        (1, 1) => wedge11(a, b).to_vec(),
        (1, 2) => vec![a[0] * b[0] + a[1] * b[1] + a[2] * b[2]],
        (2, 1) => vec![a[0] * b[0] + a[1] * b[1] + a[2] * b[2]],
        _ => Vec::new(),
    }
}

#[inline]
pub fn wedge11(a: &[Quaternion], b: &[Quaternion]) -> [Quaternion; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn wedge(a: &DiscreteForm, b: &DiscreteForm) -> Result<DiscreteForm> {
    let deg = a.degree + b.degree;
    if deg > 3 {
        return Err(Error::Degree(format!("{}-form ∧ {}-form", a.degree, b.degree)));
    }
    if a.mesh.dims != b.mesh.dims {
        return Err(Error::BadDims("wedge of forms on different meshes".into()));
    }
    let nc = component_count(deg);
    let per: Vec<Vec<Quaternion>> = (0..a.mesh.len())
        .into_par_iter()
        .map(|n| {
            let av: Vec<Quaternion> = a.comps.iter().map(|c| c[n]).collect();
            let bv: Vec<Quaternion> = b.comps.iter().map(|c| c[n]).collect();
            wedge_at(a.degree, &av, b.degree, &bv)
        })
        .collect();
    let comps = (0..nc).map(|k| per.iter().map(|v| v[k]).collect()).collect();
    let kind = match (a.kind, b.kind) {
        (ValueKind::Scalar, k) | (k, ValueKind::Scalar) => k,
        _ => ValueKind::Quaternion,
    };
    Ok(DiscreteForm { degree: deg, kind, mesh: a.mesh, comps })
}

/// Deterministic pairwise summation with a fixed split shape.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    const LEAF: usize = 2048;
    if v.len() <= LEAF {
        return pairwise_leaf(v);
    }
    let (l, r) = v.split_at(v.len() / 2);
    let (a, b) = rayon::join(|| pairwise_sum(l), || pairwise_sum(r));
    a + b
}

fn pairwise_leaf(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        return v.iter().sum();
    }
    let (l, r) = v.split_at(v.len() / 2);
    pairwise_leaf(l) + pairwise_leaf(r)
}

/// Weighted sum of a 3-form (trapezoid weights on non-periodic meshes).
pub fn integrate(form: &DiscreteForm) -> Result<Quaternion> {
    if form.degree != 3 {
        return Err(Error::Degree(format!("integrate of a {}-form", form.degree)));
    }
    let m = form.mesh;
    let c = &form.comps[0];
    let mut out = [0.0; 4];
    for (k, o) in out.iter_mut().enumerate() {
        let vals: Vec<f64> = (0..m.len())
            .into_par_iter()
            .map(|n| m.weight(m.coords(n)) * c[n].to_array()[k])
            .collect();
        *o = pairwise_sum(&vals) * m.cell_volume();
    }
    Ok(Quaternion::from_array(out))
}

pub fn integrate_scalar(form: &DiscreteForm) -> Result<f64> {
    Ok(integrate(form)?.w)
}

/// Integral of a scalar density given per vertex.
pub fn integrate_density(mesh: &Mesh, dens: &[f64]) -> f64 {
    let vals: Vec<f64> = (0..mesh.len()).into_par_iter().map(|n| mesh.weight(mesh.coords(n)) * dens[n]).collect();
    pairwise_sum(&vals) * mesh.cell_volume()
}

/// Discrete L² pairing Σ ⟨α_c, β_c⟩ · cell volume.
pub fn l2_inner(a: &DiscreteForm, b: &DiscreteForm) -> Result<f64> {
    if a.degree != b.degree || a.mesh.dims != b.mesh.dims {
        return Err(Error::Degree("pairing of mismatched forms".into()));
    }
    let m = a.mesh;
    let vals: Vec<f64> = (0..m.len())
        .into_par_iter()
        .map(|n| m.weight(m.coords(n)) * a.comps.iter().zip(&b.comps).map(|(x, y)| x[n].dot(y[n])).sum::<f64>())
        .collect();
    Ok(pairwise_sum(&vals) * m.cell_volume())
}

/// a = Im(u⁻¹du) and the largest discarded real part.
pub fn maurer_cartan(u: &Field) -> (DiscreteForm, f64) {
    maurer_cartan_values(&u.mesh(), &u.values)
}

pub fn maurer_cartan_values(mesh: &Mesh, u: &[Quaternion]) -> (DiscreteForm, f64) {
    let du = dvalues(mesh, u);
    let mut resid = 0.0f64;
    let comps: Vec<Vec<Quaternion>> = du
        .comps
        .iter()
        .map(|c| {
            let raw: Vec<Quaternion> = c.par_iter().zip(u.par_iter()).map(|(&dq, &q)| q.conj() * dq).collect();
            resid = resid.max(raw.par_iter().map(|q| q.w.abs()).reduce(|| 0.0, f64::max));
            raw.into_par_iter().map(|q| q.im_part()).collect()
        })
        .collect();
    (DiscreteForm { degree: 1, kind: ValueKind::Sp1, mesh: *mesh, comps }, resid)
}

/// φ*ω_{S²} = −(1/8π) φ dφ∧dφ and the largest discarded imaginary part.
pub fn pullback_area(phi: &Field) -> (DiscreteForm, f64) {
    pullback_area_values(&phi.mesh(), &phi.values)
}

pub fn pullback_area_values(mesh: &Mesh, phi: &[Quaternion]) -> (DiscreteForm, f64) {
    let dphi = dvalues(mesh, phi);
    let per: Vec<([f64; 3], f64)> = (0..mesh.len())
        .into_par_iter()
        .map(|n| {
            let a = [dphi.comps[0][n], dphi.comps[1][n], dphi.comps[2][n]];
            let w = wedge11(&a, &a);
            let mut out = [0.0; 3];
            let mut res = 0.0f64;
            for k in 0..3 {
                let q = phi[n] * w[k] * (-1.0 / (8.0 * PI));
                out[k] = q.w;
                res = res.max(q.im().norm());
            }
            (out, res)
        })
        .collect();
    let resid = per.iter().fold(0.0f64, |m, p| m.max(p.1));
    let comps = (0..3).map(|k| per.iter().map(|p| Quaternion::real(p.0[k])).collect()).collect();
    (DiscreteForm { degree: 2, kind: ValueKind::Scalar, mesh: *mesh, comps }, resid)
}

/// Pointwise −(1/12π²) Re(a∧a∧a) for sp(1) 1-form components at one vertex.
#[inline]
pub fn vol3_density(a: &[Quaternion; 3]) -> f64 {
    let aa = wedge11(a, a);
    let aaa = aa[0] * a[0] + aa[1] * a[1] + aa[2] * a[2];
    -aaa.w / (12.0 * PI * PI)
}

/// u*ω_{S³} = −(1/12π²) Re(a∧a∧a), a = maurer_cartan(u).
pub fn pullback_vol3(u: &Field) -> DiscreteForm {
    pullback_vol3_values(&u.mesh(), &u.values)
}

pub fn pullback_vol3_values(mesh: &Mesh, u: &[Quaternion]) -> DiscreteForm {
    let (a, _) = maurer_cartan_values(mesh, u);
    let comps = vec![(0..mesh.len())
        .into_par_iter()
        .map(|n| Quaternion::real(vol3_density(&[a.comps[0][n], a.comps[1][n], a.comps[2][n]])))
        .collect()];
    DiscreteForm { degree: 3, kind: ValueKind::Scalar, mesh: *mesh, comps }
}

/// Largest |u⁻¹ i u − φ|.
pub fn conjugation_residual(u: &[Quaternion], phi: &[Quaternion]) -> f64 {
    u.par_iter()
        .zip(phi.par_iter())
        .map(|(&q, &p)| (q.conj() * Quaternion::I * q - p).norm())
        .reduce(|| 0.0, f64::max)
}

/// θ = (1/2π)⟨u⁻¹du, φ⟩.
pub fn theta_form(u: &Field, phi: &Field) -> Result<DiscreteForm> {
    let r = conjugation_residual(&u.values, &phi.values);
    if r > LIFT_CHECK_TOL {
        return Err(Error::LiftMismatch { residual: r });
    }
    Ok(theta_values(&u.mesh(), &u.values, &phi.values))
}

pub fn theta_values(mesh: &Mesh, u: &[Quaternion], phi: &[Quaternion]) -> DiscreteForm {
    let (a, _) = maurer_cartan_values(mesh, u);
    a.comps.iter().enumerate().fold(DiscreteForm::zeros(1, ValueKind::Scalar, *mesh), |mut acc, (k, c)| {
        acc.comps[k] = c
            .par_iter()
            .zip(phi.par_iter())
            .map(|(&x, &p)| Quaternion::real(x.dot(p) / (2.0 * PI)))
            .collect();
        acc
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub quadratic: f64,
    pub quartic: f64,
    pub total: f64,
    /// ∫|dφ|³, the W^{1,3} probe.
    pub w13: f64,
    pub max_quartic_density: f64,
    /// Largest discarded normal (or real) part of the differential.
    pub projection_residual: f64,
}

/// Quadratic and quartic Faddeev densities from a value and its raw partials, plus the discarded normal part.
#[inline]
pub fn faddeev_density_from(p: Quaternion, partials: [Quaternion; 3]) -> (f64, f64, f64) {
    let mut g = [[0.0; 3]; 3];
    let mut res = 0.0f64;
    for (o, q) in g.iter_mut().zip(partials) {
        let normal = q.dot(p);
        res = res.max(normal.abs());
        let t = q - p * normal;
        *o = [t.x, t.y, t.z];
    }
    // g[d][p] = ∂_d φ^p
    let quad: f64 = g.iter().flatten().map(|x| x * x).sum();
    let grad = |p: usize| [g[0][p], g[1][p], g[2][p]];
    let mut quart = 0.0;
    for (p, q) in [(0, 1), (1, 2), (2, 0)] {
        let (a, b) = (grad(p), grad(q));
        let c = [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
        quart += c[0] * c[0] + c[1] * c[1] + c[2] * c[2];
    }
    (quad, quart, res)
}

/// Quadratic and quartic Faddeev densities at one vertex, plus the projection residual.
#[inline]
pub fn faddeev_density_at(mesh: &Mesh, phi: &[Quaternion], n: usize) -> (f64, f64, f64) {
    faddeev_density_from(phi[n], [0, 1, 2].map(|d| partial_at(mesh, phi, n, d)))
}

pub fn faddeev_energy(phi: &Field) -> EnergyReport {
    faddeev_energy_values(&phi.mesh(), &phi.values)
}

pub fn faddeev_energy_values(mesh: &Mesh, phi: &[Quaternion]) -> EnergyReport {
    let dens: Vec<(f64, f64, f64)> = (0..mesh.len()).into_par_iter().map(|n| faddeev_density_at(mesh, phi, n)).collect();
    let quad: Vec<f64> = dens.iter().map(|d| d.0).collect();
    let quart: Vec<f64> = dens.iter().map(|d| d.1).collect();
    let w13: Vec<f64> = dens.iter().map(|d| d.0.powf(1.5)).collect();
    let quadratic = integrate_density(mesh, &quad);
    let quartic = integrate_density(mesh, &quart);
    EnergyReport {
        quadratic,
        quartic,
        total: quadratic + quartic,
        w13: integrate_density(mesh, &w13),
        max_quartic_density: quart.iter().fold(0.0, |m: f64, &x| m.max(x)),
        projection_residual: dens.iter().fold(0.0, |m: f64, d| m.max(d.2)),
    }
}

/// ∫|u⁻¹du|² + |u⁻¹du∧u⁻¹du|².
pub fn skyrme_energy(u: &Field) -> EnergyReport {
    let mesh = u.mesh();
    let (a, res) = maurer_cartan(u);
    let dens: Vec<(f64, f64)> = (0..mesh.len())
        .into_par_iter()
        .map(|n| {
            let v = [a.comps[0][n], a.comps[1][n], a.comps[2][n]];
            let quad = v.iter().map(|q| q.norm_sq()).sum::<f64>();
            let quart = wedge11(&v, &v).iter().map(|q| q.norm_sq()).sum::<f64>();
            (quad, quart)
        })
        .collect();
    let quad: Vec<f64> = dens.iter().map(|d| d.0).collect();
    let quart: Vec<f64> = dens.iter().map(|d| d.1).collect();
    let w13: Vec<f64> = quad.iter().map(|q| q.powf(1.5)).collect();
    let quadratic = integrate_density(&mesh, &quad);
    let quartic = integrate_density(&mesh, &quart);
    EnergyReport {
        quadratic,
        quartic,
        total: quadratic + quartic,
        w13: integrate_density(&mesh, &w13),
        max_quartic_density: quart.iter().fold(0.0, |m: f64, &x| m.max(x)),
        projection_residual: res,
    }
}

/// Signed solid angle of the spherical triangle (a, b, c).
#[inline]
pub fn solid_angle(a: Quaternion, b: Quaternion, c: Quaternion) -> f64 {
    let (a, b, c) = ([a.x, a.y, a.z], [b.x, b.y, b.z], [c.x, c.y, c.z]);
    let dot = |u: [f64; 3], v: [f64; 3]| u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    let cross = [b[1] * c[2] - b[2] * c[1], b[2] * c[0] - b[0] * c[2], b[0] * c[1] - b[1] * c[0]];
    2.0 * dot(a, cross).atan2(1.0 + dot(a, b) + dot(b, c) + dot(c, a))
}

/// Normalized periods of φ*ω_{S²} over each torus slice x_d = const, by exact spherical-triangle areas.
pub fn slice_periods(phi: &Field, d: usize) -> Vec<f64> {
    let m = phi.mesh();
    let (a1, a2) = ((d + 1) % 3, (d + 2) % 3);
    let v = &phi.values;
    (0..m.dims[d])
        .into_par_iter()
        .map(|s| {
            let mut total = 0.0;
            for i in 0..m.dims[a1] {
                for j in 0..m.dims[a2] {
                    let at = |ii: usize, jj: usize| {
                        let mut c = [0usize; 3];
                        c[d] = s;
                        c[a1] = ii % m.dims[a1];
                        c[a2] = jj % m.dims[a2];
                        v[m.idx(c[0], c[1], c[2])]
                    };
                    let (p00, p10, p11, p01) = (at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1));
                    total += solid_angle(p00, p10, p11) + solid_angle(p00, p11, p01);
                }
            }
            total / (4.0 * PI)
        })
        .collect()
}

/// Slice-averaged solid-angle periods along each axis; integers for any resolved torus field.
pub fn solid_angle_periods(phi: &Field) -> [f64; 3] {
    [0, 1, 2].map(|d| {
        let s = slice_periods(phi, d);
        s.iter().sum::<f64>() / s.len() as f64
    })
}

/// Checks that a field has the expected kind before a kind-specific computation.
pub fn expect_kind(field: &Field, kind: Kind) -> Result<()> {
    if field.kind != kind {
        return Err(Error::KindViolation(format!("expected a {kind:?} field, got {:?}", field.kind)));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{sample, Lattice3};
    use crate::quat::exp_im;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::TAU;

    fn torus(n: usize) -> Mesh {
        Lattice3::torus(n, 1.0).unwrap().mesh()
    }

    fn random_form(mesh: Mesh, degree: usize, seed: u64) -> DiscreteForm {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let comps = (0..component_count(degree))
            .map(|_| (0..mesh.len()).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        DiscreteForm::from_scalars(degree, mesh, comps).unwrap()
    }

    fn scalar_form(mesh: Mesh, degree: usize, f: impl Fn([f64; 3]) -> [f64; 3]) -> DiscreteForm {
        let nc = component_count(degree);
        let comps = (0..nc)
            .map(|k| (0..mesh.len()).map(|n| f(mesh.position(mesh.coords(n)))[k]).collect())
            .collect();
        DiscreteForm::from_scalars(degree, mesh, comps).unwrap()
    }

    #[test]
    fn dfield_examples() {
        let lat = Lattice3::torus(16, 1.0).unwrap();
        let c = Field::constant(lat, Kind::S3, Quaternion::J).unwrap();
        assert_eq!(dfield(&c).max_norm(), 0.0);

        let lat = Lattice3::torus(64, TAU).unwrap();
        let f = sample(lat, |p| exp_im([p[0], 0.0, 0.0]), Kind::S3).unwrap();
        let df = dfield(&f);
        let err = (0..lat.len())
            .map(|n| (df.comps[0][n] - Quaternion::I * f.values[n]).norm())
            .fold(0.0, f64::max);
        // exactly the central-difference truncation 1 − sin(h)/h ≈ h²/6
        let h = lat.spacing()[0];
        assert!((err - (1.0 - h.sin() / h)).abs() < 1e-12, "{err}");
        assert!(err < 2e-3);

        let lat = Lattice3::cube(9, 2.0).unwrap();
        let g = sample(lat, |p| Quaternion::real(2.0 * p[0] - p[1] + 0.5 * p[2] + 3.0), Kind::H).unwrap();
        let dg = dfield(&g);
        for (k, want) in [2.0, -1.0, 0.5].into_iter().enumerate() {
            assert!(dg.comps[k].iter().all(|q| (q.w - want).abs() < 1e-12));
        }
    }

    #[test]
    fn d_examples() {
        let m = torus(32);
        let f = random_form(m, 0, 1);
        assert!(d(&d(&f).unwrap()).unwrap().max_norm() < 1e-9);

        let a = scalar_form(m, 1, |p| [0.0, (TAU * p[0]).sin(), 0.0]);
        let da = d(&a).unwrap();
        // central differences give sin(kh)/h in place of k
        let k = TAU;
        let s = (k * m.h[0]).sin() / m.h[0];
        for n in 0..m.len() {
            let x = m.position(m.coords(n))[0];
            assert!((da.comps[2][n].w - s * (k * x).cos()).abs() < 1e-12);
            assert_eq!(da.comps[0][n].w, 0.0);
        }
        assert!((s - k).abs() / k < 0.01);
        let top = DiscreteForm::zeros(3, ValueKind::Scalar, m);
        assert!(matches!(d(&top), Err(Error::Degree(_))));
    }

    #[test]
    fn codiff_examples() {
        let m = torus(16);
        let c = scalar_form(m, 1, |_| [1.0, 0.0, 0.0]);
        assert_eq!(codiff(&c).unwrap().max_norm(), 0.0);
        let s = scalar_form(m, 1, |p| [0.0, (TAU * p[0]).sin(), 0.0]);
        assert!(codiff(&s).unwrap().max_norm() < 1e-12);
        let z = DiscreteForm::zeros(0, ValueKind::Scalar, m);
        assert!(matches!(codiff(&z), Err(Error::Degree(_))));
    }

    #[test]
    fn adjointness_on_torus() {
        let m = Lattice3::new([12, 16, 10], crate::grid::Domain::Torus { periods: [1.0, 2.0, 0.7] })
            .unwrap()
            .mesh();
        for (k, seed) in [(0usize, 3u64), (1, 4), (2, 5)] {
            let a = random_form(m, k, seed);
            let b = random_form(m, k + 1, seed + 10);
            let lhs = l2_inner(&d(&a).unwrap(), &b).unwrap();
            let rhs = l2_inner(&a, &codiff(&b).unwrap()).unwrap();
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0), "{k}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn dd_vanishes_on_torus() {
        let m = torus(16);
        let a = random_form(m, 1, 9);
        assert!(d(&d(&a).unwrap()).unwrap().max_norm() < 1e-9);
        let f = random_form(m, 0, 8);
        let dd = d(&d(&f).unwrap()).unwrap();
        assert!(dd.max_norm() < 1e-10);
    }

    #[test]
    fn wedge_examples() {
        let m = torus(8);
        let (p, q) = (Quaternion::new(0.1, 1.0, -2.0, 0.5), Quaternion::new(0.3, 0.0, 1.0, -1.0));
        let mut a = DiscreteForm::zeros(1, ValueKind::Quaternion, m);
        let mut b = DiscreteForm::zeros(1, ValueKind::Quaternion, m);
        a.comps[0] = vec![p; m.len()];
        b.comps[1] = vec![q; m.len()];
        let w = wedge(&a, &b).unwrap();
        assert_eq!(w.comps[2][0], p * q);
        assert_eq!(w.comps[0][0], Quaternion::ZERO);

        let r = random_form(m, 1, 2);
        assert_eq!(wedge(&r, &r).unwrap().max_norm(), 0.0);

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut v = || Quaternion::imag([rng.random(), rng.random(), rng.random()]);
        let a = [v(), v(), v()];
        let w = wedge11(&a, &a);
        // a∧a = ½[a,a]: component 23 is 2·(a²×a³) in the i,j,k basis
        for (k, (s, t)) in [(1usize, 2usize), (2, 0), (0, 1)].into_iter().enumerate() {
            let want = a[s].im().cross(a[t].im()).scale(2.0).quat();
            assert!((w[k] - want).norm() < 1e-14);
        }
        assert!(matches!(wedge(&random_form(m, 2, 1), &random_form(m, 2, 2)), Err(Error::Degree(_))));
    }

    #[test]
    fn integrate_examples() {
        let m = torus(16);
        let one = scalar_form(m, 3, |_| [1.0; 3]);
        assert!((integrate_scalar(&one).unwrap() - 1.0).abs() < 1e-14);
        let m = torus(32);
        let s = scalar_form(m, 3, |p| [(TAU * p[0]).sin().powi(2); 3]);
        assert!((integrate_scalar(&s).unwrap() - 0.5).abs() < 1e-12);
        let f = |p: [f64; 3]| [(p[0] + 2.0 * p[1] - p[2]).exp(); 3];
        let coarse = integrate_scalar(&scalar_form(Lattice3::cube(9, 1.0).unwrap().mesh(), 3, f)).unwrap();
        let fine = integrate_scalar(&scalar_form(Lattice3::cube(17, 1.0).unwrap().mesh(), 3, f)).unwrap();
        let e = |a: f64| (a.exp() - (-a).exp()) / a;
        let exact = e(1.0) * e(2.0) * e(1.0);
        let ratio = (coarse - exact).abs() / (fine - exact).abs();
        assert!((3.5..4.5).contains(&ratio), "{ratio}");
        assert!(matches!(integrate(&random_form(m, 2, 1)), Err(Error::Degree(_))));
    }

    #[test]
    fn maurer_cartan_examples() {
        let lat = Lattice3::torus(16, 1.0).unwrap();
        let c = Field::constant(lat, Kind::S3, Quaternion::K).unwrap();
        let (a, r) = maurer_cartan(&c);
        assert_eq!((a.max_norm(), r), (0.0, 0.0));
        let lat = Lattice3::torus(64, TAU).unwrap();
        let f = sample(lat, |p| exp_im([p[0], 0.0, 0.0]), Kind::S3).unwrap();
        let (a, _) = maurer_cartan(&f);
        let h = lat.spacing()[0];
        let err = a.comps[0].iter().map(|q| (*q - Quaternion::I).norm()).fold(0.0, f64::max);
        assert!((err - (1.0 - h.sin() / h)).abs() < 1e-12 && err < 2e-3, "{err}");
    }

    #[test]
    fn pullbacks_of_constants_vanish() {
        let lat = Lattice3::cube(12, 3.0).unwrap();
        let phi = Field::constant(lat, Kind::S2, Quaternion::J).unwrap();
        assert_eq!(pullback_area(&phi).0.max_norm(), 0.0);
        let u = Field::constant(lat, Kind::S3, Quaternion::ONE).unwrap();
        assert_eq!(pullback_vol3(&u).max_norm(), 0.0);
        let t = theta_form(&u, &Field::constant(lat, Kind::S2, Quaternion::I).unwrap()).unwrap();
        assert_eq!(t.max_norm(), 0.0);
        assert!(matches!(theta_form(&u, &phi), Err(Error::LiftMismatch { .. })));
        let e = faddeev_energy(&phi);
        assert_eq!((e.quadratic, e.quartic, e.total), (0.0, 0.0, 0.0));
        assert_eq!(skyrme_energy(&u).total, 0.0);
    }

    #[test]
    fn circle_valued_field_has_no_area() {
        let lat = Lattice3::torus(16, 1.0).unwrap();
        let phi = sample(
            lat,
            |p| {
                let t = (TAU * p[0]).sin() + 2.0 * (TAU * p[1]).cos() + (TAU * p[2]).sin();
                Quaternion::imag([t.cos(), t.sin(), 0.0])
            },
            Kind::S2,
        )
        .unwrap();
        assert!(pullback_area(&phi).0.max_norm() < 1e-12);
        assert!(faddeev_energy(&phi).max_quartic_density < 1e-20);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn triple_product_identity(v in prop::array::uniform9(-1.0f64..1.0)) {
            let a = [
                Quaternion::imag([v[0], v[1], v[2]]),
                Quaternion::imag([v[3], v[4], v[5]]),
                Quaternion::imag([v[6], v[7], v[8]]),
            ];
            let aa = wedge11(&a, &a);
            let aaa = wedge_at(1, &a, 2, &aa)[0];
            let inner = a[0].dot(aa[0]) + a[1].dot(aa[1]) + a[2].dot(aa[2]);
            // ⟨a, a∧a⟩ = −Re(a∧a∧a)
            prop_assert!((inner + aaa.w).abs() < 1e-12);
        }
    }
}
