//! Flat connections a = ½φ⁻¹dφ + φξ and their developing maps u with φ = u⁻¹ i u.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::elliptic::{self, CubeChart};
use crate::error::{Error, Result};
use crate::forms::{self, pullback_area_values, DiscreteForm, ValueKind};
use crate::grid::{Field, Kind, Mesh};
use crate::quat::{exp_im, sigma_section, Quaternion, UnitComplex};

pub const FLAT_TOL: f64 = 0.5;
pub const LIFT_TOL: f64 = 5e-2;
pub const OBSTRUCTION_TOL: f64 = 1e-3;

#[derive(Clone, Debug)]
pub struct Connection {
    pub a: DiscreteForm,
    /// max |da + a∧a|
    pub flatness: f64,
}

/// A lift over a chart; `u` is indexed by the chart mesh.
#[derive(Clone, Debug)]
pub struct LiftResult {
    pub chart: CubeChart,
    pub u: Vec<Quaternion>,
    pub conjugation_residual: f64,
    pub path_residual: f64,
    pub flatness: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LiftDiagnostics {
    pub conjugation_residual: f64,
    pub path_residual: f64,
    pub flatness: f64,
}

impl LiftResult {
    pub fn diagnostics(&self) -> LiftDiagnostics {
        LiftDiagnostics {
            conjugation_residual: self.conjugation_residual,
            path_residual: self.path_residual,
            flatness: self.flatness,
        }
    }

    /// The lift as a field on the owning lattice; only for whole-lattice charts.
    pub fn field(&self) -> Result<Field> {
        if !self.chart.is_whole() {
            return Err(Error::Domain("chart lift does not cover the lattice".into()));
        }
        Field::new(self.chart.lattice, Kind::S3, self.u.clone())
    }
}

fn flatness_of(a: &DiscreteForm) -> Result<f64> {
    let da = forms::d(a)?;
    let aa = forms::wedge(a, a)?;
    Ok(da.add(&aa)?.max_norm())
}

fn connection_values(mesh: &Mesh, phi: &[Quaternion], dphi: &DiscreteForm, xi: &DiscreteForm) -> DiscreteForm {
    let comps = (0..3)
        .map(|k| {
            (0..mesh.len())
                .into_par_iter()
                .map(|n| {
                    let p = phi[n];
                    (p * dphi.comps[k][n] * -0.5 + p * xi.comps[k][n].w).im_part()
                })
                .collect()
        })
        .collect();
    DiscreteForm { degree: 1, kind: ValueKind::Sp1, mesh: *mesh, comps }
}

/// a_d = ½φ⁻¹∂_dφ + φξ_d, with φ⁻¹ = −φ.
pub fn build_connection(phi: &Field, xi: &DiscreteForm) -> Result<Connection> {
    forms::expect_kind(phi, Kind::S2)?;
    let mesh = phi.mesh();
    if xi.degree != 1 || xi.kind != ValueKind::Scalar || xi.mesh != mesh {
        return Err(Error::Degree("ξ must be a scalar 1-form on the field's mesh".into()));
    }
    let a = connection_values(&mesh, &phi.values, &forms::dfield(phi), xi);
    let flatness = flatness_of(&a)?;
    Ok(Connection { a, flatness })
}

#[inline]
fn step(u: Quaternion, a0: &[Quaternion], a1: &[Quaternion], n0: usize, n1: usize, h: f64) -> Quaternion {
    let m = (a0[n0] + a1[n1]) * (0.5 * h);
    (u * exp_im([m.x, m.y, m.z])).normalized()
}

/// Path-ordered development along axes `order`, starting at local vertex `anchor` with value `u0`.
fn develop_order(a: &DiscreteForm, anchor: [usize; 3], u0: Quaternion, order: [usize; 3]) -> Vec<Quaternion> {
    let m = a.mesh;
    let mut u = vec![Quaternion::ZERO; m.len()];
    u[m.idx(anchor[0], anchor[1], anchor[2])] = u0;
    for stage in 0..3 {
        let axis = order[stage];
        let fixed: Vec<usize> = order[stage..].iter().copied().filter(|&d| d != axis).collect();
        let starts: Vec<usize> = (0..m.len())
            .filter(|&n| {
                let c = m.coords(n);
                c[axis] == anchor[axis] && fixed.iter().all(|&d| c[d] == anchor[d])
            })
            .collect();
        let s = m.stride(axis);
        let h = m.h[axis];
        let comp = &a.comps[axis];
        let lines: Vec<Vec<(usize, Quaternion)>> = starts
            .par_iter()
            .map(|&n0| {
                let c0 = m.coords(n0)[axis];
                let mut out = Vec::with_capacity(m.dims[axis]);
                let mut q = u[n0];
                for c in c0..m.dims[axis] - 1 {
                    let n = n0 + (c - c0) * s;
                    q = step(q, comp, comp, n, n + s, h);
                    out.push((n + s, q));
                }
                let mut q = u[n0];
                for c in (1..=c0).rev() {
                    let n = n0 - (c0 - c) * s;
                    q = step(q, comp, comp, n, n - s, -h);
                    out.push((n - s, q));
                }
                out
            })
            .collect();
        for line in lines {
            for (n, q) in line {
                u[n] = q;
            }
        }
    }
    u
}

/// Develops a on its (non-periodic) index box from local `anchor`; returns u and the path residual.
pub fn develop_at(conn: &Connection, anchor: [usize; 3], u0: Quaternion) -> (Vec<Quaternion>, f64) {
    let u = develop_order(&conn.a, anchor, u0, [0, 1, 2]);
    let v = develop_order(&conn.a, anchor, u0, [2, 1, 0]);
    let res = u.par_iter().zip(v.par_iter()).map(|(p, q)| (*p - *q).norm()).reduce(|| 0.0, f64::max);
    (u, res)
}

/// Develops from the lexicographically smallest vertex.
pub fn develop(conn: &Connection, u0: Quaternion) -> (Vec<Quaternion>, f64) {
    develop_at(conn, [0; 3], u0)
}

/// Holonomy u0⁻¹·(transport of u0 once around the periodic axis through `anchor`).
fn holonomy(a: &DiscreteForm, anchor: [usize; 3], axis: usize) -> Quaternion {
    let m = a.mesh;
    let comp = &a.comps[axis];
    let mut c = anchor;
    let mut g = Quaternion::ONE;
    for _ in 0..m.dims[axis] {
        let n = m.idx(c[0], c[1], c[2]);
        let nn = m.offset(c, axis, 1).expect("periodic mesh");
        g = step(g, comp, comp, n, nn, m.h[axis]);
        c[axis] = (c[axis] + 1) % m.dims[axis];
    }
    g
}

fn finish(chart: CubeChart, phi: &[Quaternion], conn: &Connection, anchor: [usize; 3]) -> LiftResult {
    let m = conn.a.mesh;
    let u0 = sigma_section(phi[m.idx(anchor[0], anchor[1], anchor[2])]);
    let (u, path_residual) = develop_at(conn, anchor, u0);
    LiftResult {
        chart,
        conjugation_residual: forms::conjugation_residual(&u, phi),
        u,
        path_residual,
        flatness: conn.flatness,
    }
}

/// Lift over the whole torus; fails when the primary class is nonzero.
fn lift_torus(phi: &Field) -> Result<LiftResult> {
    let periods = forms::solid_angle_periods(phi);
    if periods.iter().any(|p| p.abs() > OBSTRUCTION_TOL) {
        return Err(Error::HarmonicObstruction { periods });
    }
    let sol = elliptic::solve_xi_torus(phi)?;
    let mesh = phi.mesh();
    let dphi = forms::dfield(phi);
    let mut xi = sol.xi;
    // remove the fibre holonomy around each period so the developed map closes up
    let a = connection_values(&mesh, &phi.values, &dphi, &xi);
    let p0 = phi.values[0];
    for d in 0..3 {
        let g = holonomy(&a, [0; 3], d);
        let alpha = (g.x * p0.x + g.y * p0.y + g.z * p0.z).atan2(g.w);
        let c = -alpha / (mesh.h[d] * mesh.dims[d] as f64);
        xi.comps[d].iter_mut().for_each(|q| q.w += c);
    }
    let a = connection_values(&mesh, &phi.values, &dphi, &xi);
    let conn = Connection { flatness: flatness_of(&a)?, a };
    Ok(finish(CubeChart::whole(phi.lattice), &phi.values, &conn, [0; 3]))
}

/// Global ingredients shared by every chart connection of one field.
pub struct ChartInputs {
    pub area: DiscreteForm,
    pub dphi: DiscreteForm,
}

impl ChartInputs {
    pub fn new(phi: &Field) -> Self {
        let (area, _) = pullback_area_values(&phi.mesh(), &phi.values);
        ChartInputs { area, dphi: forms::dfield(phi) }
    }
}

/// Chart connection from the homotopy primitive of η = −¼φdφ∧dφ restricted to the chart.
pub fn chart_connection(phi: &Field, chart: &CubeChart) -> Result<Connection> {
    chart_connection_with(phi, chart, &ChartInputs::new(phi))
}

pub fn chart_connection_with(phi: &Field, chart: &CubeChart, inp: &ChartInputs) -> Result<Connection> {
    let cmesh = chart.mesh();
    let gather = |f: &DiscreteForm, kind, scale: f64| DiscreteForm {
        degree: f.degree,
        kind,
        mesh: cmesh,
        comps: f.comps.iter().map(|c| chart.gather(c).into_iter().map(|q| q * scale).collect()).collect(),
    };
    let eta = gather(&inp.area, ValueKind::Scalar, 2.0 * PI);
    let xi = elliptic::homotopy_operator(&eta, chart.center());
    let dphi = gather(&inp.dphi, ValueKind::Quaternion, 1.0);
    let phic = chart.gather(&phi.values);
    let a = connection_values(&cmesh, &phic, &dphi, &xi);
    Ok(Connection { flatness: flatness_of(&a)?, a })
}

/// Chart lift from precomputed inputs, anchored at the chart's first vertex.
pub fn lift_chart_with(phi: &Field, chart: &CubeChart, inp: &ChartInputs) -> Result<LiftResult> {
    let conn = chart_connection_with(phi, chart, inp)?;
    Ok(finish(*chart, &chart.gather(&phi.values), &conn, [0; 3]))
}

/// Lift over a chart, anchored at local vertex `anchor`.
pub fn lift_chart_at(phi: &Field, chart: &CubeChart, anchor: [usize; 3]) -> Result<LiftResult> {
    forms::expect_kind(phi, Kind::S2)?;
    if chart.lattice != phi.lattice {
        return Err(Error::BadDims("chart and field lattices differ".into()));
    }
    if phi.lattice.is_torus() && chart.is_whole() {
        if anchor != [0; 3] {
            return Err(Error::Invalid("whole-torus lifts are anchored at the origin".into()));
        }
        return lift_torus(phi);
    }
    if (0..3).any(|d| anchor[d] >= chart.len[d]) {
        return Err(Error::Invalid("anchor outside the chart".into()));
    }
    let conn = chart_connection(phi, chart)?;
    Ok(finish(*chart, &chart.gather(&phi.values), &conn, anchor))
}

/// Lift over a chart; the whole torus goes through the spectral solve.
pub fn lift_chart(phi: &Field, chart: &CubeChart) -> Result<LiftResult> {
    lift_chart_at(phi, chart, [0; 3])
}

pub fn lift_whole(phi: &Field) -> Result<LiftResult> {
    lift_chart(phi, &CubeChart::whole(phi.lattice))
}

/// Nearest point of the circle span{1, i} to q.
#[inline]
pub fn fiber_project(q: Quaternion) -> UnitComplex {
    let r = q.w.hypot(q.x);
    if r < 1e-300 {
        UnitComplex::ONE
    } else {
        UnitComplex { re: q.w / r, im: q.x / r }
    }
}

/// λ = v·u⁻¹ for two lifts of the same field and its largest departure from the circle.
pub fn lift_uniqueness_check(u: &LiftResult, v: &LiftResult) -> Result<(Vec<UnitComplex>, f64)> {
    if u.chart != v.chart {
        return Err(Error::BadDims("lifts live on different charts".into()));
    }
    let per: Vec<(UnitComplex, f64)> = u
        .u
        .par_iter()
        .zip(v.u.par_iter())
        .map(|(&p, &q)| {
            let l = q * p.conj();
            (fiber_project(l), l.y.hypot(l.z))
        })
        .collect();
    let dev = per.iter().fold(0.0f64, |m, p| m.max(p.1));
    Ok((per.into_iter().map(|p| p.0).collect(), dev))
}
