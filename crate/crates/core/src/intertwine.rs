//! Intertwining maps Φ with φ = Φ ψ Φ⁻¹.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::cech::{self, CechData, ChartCover};
use crate::elliptic::CubeChart;
use crate::error::{Error, Result};
use crate::forms;
use crate::grid::{Field, Kind};
use crate::lift::LiftResult;
use crate::quat::{frak_q_raw, Quaternion};

pub const GLUE_FAIL: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    GlobalLift,
    CechGlue,
}

#[derive(Clone, Debug)]
pub struct IntertwineResult {
    pub phi_map: Field,
    pub conjugation_residual: f64,
    pub gluing_residual: f64,
    pub construction: Construction,
}

#[derive(Clone, Debug, Serialize)]
pub struct IntertwineDiagnostics {
    pub conjugation_residual: f64,
    pub gluing_residual: f64,
    pub construction: Construction,
}

impl IntertwineResult {
    pub fn diagnostics(&self) -> IntertwineDiagnostics {
        IntertwineDiagnostics {
            conjugation_residual: self.conjugation_residual,
            gluing_residual: self.gluing_residual,
            construction: self.construction,
        }
    }
}

/// max |Φ ψ Φ⁻¹ − φ|.
pub fn intertwining_residual(big_phi: &[Quaternion], phi: &[Quaternion], psi: &[Quaternion]) -> f64 {
    big_phi
        .par_iter()
        .zip(phi.par_iter().zip(psi.par_iter()))
        .map(|(&g, (&a, &b))| (g * b * g.conj() - a).norm())
        .reduce(|| 0.0, f64::max)
}

/// Φ = u⁻¹ v from whole-domain lifts u of φ and v of ψ.
pub fn intertwine_trivial(phi: &Field, psi: &Field, u: &LiftResult, v: &LiftResult) -> Result<IntertwineResult> {
    if !(u.chart.is_whole() && v.chart.is_whole()) || u.chart != v.chart || phi.lattice != psi.lattice {
        return Err(Error::BadDims("trivial intertwiner needs whole-domain lifts on one lattice".into()));
    }
    let vals: Vec<Quaternion> = u.u.par_iter().zip(v.u.par_iter()).map(|(&a, &b)| (a.conj() * b).normalized()).collect();
    let res = intertwining_residual(&vals, &phi.values, &psi.values);
    Ok(IntertwineResult {
        phi_map: Field::new(phi.lattice, Kind::S3, vals)?,
        conjugation_residual: res,
        gluing_residual: 0.0,
        construction: Construction::GlobalLift,
    })
}

#[inline]
fn bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - t * t)).exp()
    }
}

/// Unnormalized bump of chart `ch` at a global vertex.
fn chart_bump(ch: &CubeChart, g: [usize; 3]) -> f64 {
    let mut b = 1.0;
    for d in 0..3 {
        let Some(l) = ch.local_axis(d, g[d]) else { return 0.0 };
        let half = 0.5 * (ch.len[d] - 1) as f64;
        b *= bump((l as f64 - half) / half);
    }
    b
}

/// Glues Φ_p = u_p⁻¹ μ_p v_p over the standard cover.
pub fn intertwine_cech(phi: &Field, psi: &Field, cover: &ChartCover) -> Result<IntertwineResult> {
    if phi.lattice != psi.lattice {
        return Err(Error::BadDims("fields live on different lattices".into()));
    }
    let a = cech::transition_angles(phi, cover)?;
    let b = cech::transition_angles(psi, cover)?;
    intertwine_cech_with(phi, psi, &a, &b)
}

/// Gluing step from precomputed Čech data of φ and ψ.
pub fn intertwine_cech_with(phi: &Field, psi: &Field, a: &CechData, b: &CechData) -> Result<IntertwineResult> {
    let cover = &a.cover;
    let n = cech::cocycle(a)?;
    let m = cech::cocycle(b)?;
    let gamma = cech::equalize_cocycles(cover, &n, &m)?;
    let gm = cover.lattice.mesh();
    let k = cover.charts.len();
    let beta = |p: usize, q: usize, g: [usize; 3]| -> f64 {
        let gpq = match p.cmp(&q) {
            std::cmp::Ordering::Equal => 0,
            std::cmp::Ordering::Less => gamma[&(p, q)],
            std::cmp::Ordering::Greater => -gamma[&(q, p)],
        };
        a.theta(p, q, g) - b.theta(p, q, g) - gpq as f64
    };
    // per chart, Φ_p on its own mesh
    let locals: Vec<Vec<Quaternion>> = (0..k)
        .into_par_iter()
        .map(|p| {
            let ch = &cover.charts[p];
            let cm = ch.mesh();
            (0..cm.len())
                .map(|i| {
                    let g = gm.coords(ch.global(cm.coords(i)));
                    let rho: Vec<f64> = cover.charts.iter().map(|c| chart_bump(c, g)).collect();
                    let total: f64 = rho.iter().sum();
                    let mut s = 0.0;
                    if total > 0.0 {
                        for (q, &r) in rho.iter().enumerate() {
                            if r > 0.0 && q != p {
                                s += r / total * beta(p, q, g);
                            }
                        }
                    }
                    let mu = Quaternion::new((2.0 * PI * s).cos(), (2.0 * PI * s).sin(), 0.0, 0.0);
                    (a.lifts[p].u[i].conj() * mu * b.lifts[p].u[i]).normalized()
                })
                .collect()
        })
        .collect();
    let local_index = |p: usize, g: [usize; 3]| -> Option<usize> {
        let ch = &cover.charts[p];
        let c = [ch.local_axis(0, g[0])?, ch.local_axis(1, g[1])?, ch.local_axis(2, g[2])?];
        Some(ch.mesh().idx(c[0], c[1], c[2]))
    };
    let per_vertex: Vec<(Quaternion, f64)> = (0..gm.len())
        .into_par_iter()
        .map(|v| {
            let g = gm.coords(v);
            let mut best = (f64::MIN, 0usize);
            let mut members = Vec::new();
            for p in 0..k {
                if let Some(i) = local_index(p, g) {
                    members.push(locals[p][i]);
                    let r = chart_bump(&cover.charts[p], g);
                    if r > best.0 {
                        best = (r, p);
                    }
                }
            }
            let chosen = locals[best.1][local_index(best.1, g).unwrap()];
            let glue = members.iter().map(|&q| (q - chosen).norm()).fold(0.0, f64::max);
            (chosen, glue)
        })
        .collect();
    let glue = per_vertex.iter().map(|x| x.1).fold(0.0, f64::max);
    if glue > GLUE_FAIL {
        return Err(Error::GlueFailure { residual: glue });
    }
    let vals: Vec<Quaternion> = per_vertex.into_iter().map(|x| x.0).collect();
    let res = intertwining_residual(&vals, &phi.values, &psi.values);
    Ok(IntertwineResult {
        phi_map: Field::new(phi.lattice, Kind::S3, vals)?,
        conjugation_residual: res,
        gluing_residual: glue,
        construction: Construction::CechGlue,
    })
}

/// Φ' = Φ · 𝔮(ψ, λ).
pub fn gauge_twist(res: &IntertwineResult, phi: &Field, psi: &Field, lam: &Field) -> Result<IntertwineResult> {
    forms::expect_kind(lam, Kind::S1)?;
    forms::expect_kind(psi, Kind::S2)?;
    if lam.lattice != psi.lattice || res.phi_map.lattice != psi.lattice {
        return Err(Error::BadDims("fields live on different lattices".into()));
    }
    let vals: Vec<Quaternion> = res
        .phi_map
        .values
        .par_iter()
        .zip(psi.values.par_iter().zip(lam.values.par_iter()))
        .map(|(&f, (&x, &l))| f * frak_q_raw(x, l.w, l.x))
        .collect();
    let conj = intertwining_residual(&vals, &phi.values, &psi.values);
    Ok(IntertwineResult {
        phi_map: Field::new(psi.lattice, Kind::S3, vals)?,
        conjugation_residual: conj,
        gluing_residual: res.gluing_residual,
        construction: res.construction,
    })
}

/// The pointwise field x ↦ 𝔮(ψ(x), λ(x)).
pub fn frak_q_field(psi: &Field, lam: &Field) -> Result<Field> {
    forms::expect_kind(lam, Kind::S1)?;
    forms::expect_kind(psi, Kind::S2)?;
    psi.zip(lam, Kind::S3, |x, l| frak_q_raw(x, l.w, l.x))
}

/// Φ⁻¹ φ Φ, i.e. the field intertwined with φ by Φ (used to build test pairs).
pub fn conjugate_field(phi: &Field, q: &Field) -> Result<Field> {
    forms::expect_kind(q, Kind::S3)?;
    phi.zip(q, Kind::S2, |p, g| (g.conj() * p * g).im_part())
}

/// Per-vertex pairing of two intertwiners of the same pair: Φ₁⁻¹Φ₂ should lie on the circle through ψ.
pub fn circle_factor_deviation(a: &Field, b: &Field, psi: &Field) -> f64 {
    a.values
        .par_iter()
        .zip(b.values.par_iter().zip(psi.values.par_iter()))
        .map(|(&x, (&y, &p))| {
            let l = x.conj() * y;
            // the imaginary part must be parallel to ψ
            let im = [l.x, l.y, l.z];
            let along = im[0] * p.x + im[1] * p.y + im[2] * p.z;
            ((im[0] - along * p.x).powi(2) + (im[1] - along * p.y).powi(2) + (im[2] - along * p.z).powi(2)).sqrt()
        })
        .reduce(|| 0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genmaps::{gen_p, gen_winding, perturb};
    use crate::grid::Lattice3;
    use crate::lift::lift_whole;
    use crate::quat::UnitComplex;

    fn zero_class_field(n: usize, seed: u64) -> Field {
        let lat = Lattice3::torus(n, 1.0).unwrap();
        perturb(&Field::constant(lat, Kind::S2, Quaternion::I).unwrap(), 1, seed, 0.5).unwrap()
    }

    #[test]
    fn trivial_self_is_identity() {
        let phi = zero_class_field(16, 1);
        let u = lift_whole(&phi).unwrap();
        let r = intertwine_trivial(&phi, &phi, &u, &u).unwrap();
        assert!(r.phi_map.values.iter().all(|q| (*q - Quaternion::ONE).norm() < 1e-12));
        assert_eq!(r.construction, Construction::GlobalLift);
    }

    #[test]
    fn trivial_intertwines_within_lift_residuals() {
        let (phi, psi) = (zero_class_field(16, 1), zero_class_field(16, 2));
        let (u, v) = (lift_whole(&phi).unwrap(), lift_whole(&psi).unwrap());
        let r = intertwine_trivial(&phi, &psi, &u, &v).unwrap();
        assert!(r.conjugation_residual <= 2.0 * (u.conjugation_residual + v.conjugation_residual) + 1e-12);
    }

    #[test]
    fn gauge_twist_keeps_residual() {
        let (phi, psi) = (zero_class_field(16, 1), zero_class_field(16, 2));
        let r = intertwine_trivial(&phi, &psi, &lift_whole(&phi).unwrap(), &lift_whole(&psi).unwrap()).unwrap();
        let one = Field::constant(phi.lattice, Kind::S1, Quaternion::ONE).unwrap();
        let same = gauge_twist(&r, &phi, &psi, &one).unwrap();
        assert!(same.phi_map.values.iter().zip(&r.phi_map.values).all(|(a, b)| (*a - *b).norm() < 1e-15));
        let c = Field::constant(phi.lattice, Kind::S1, UnitComplex::from_angle(0.7).quat()).unwrap();
        let t = gauge_twist(&r, &phi, &psi, &c).unwrap();
        assert!((t.conjugation_residual - r.conjugation_residual).abs() < 1e-12);
        let w = gauge_twist(&r, &phi, &psi, &gen_winding(2, 1, phi.lattice).unwrap()).unwrap();
        assert!((w.conjugation_residual - r.conjugation_residual).abs() < 1e-10);
    }

    #[test]
    fn cech_self_is_identity() {
        let lat = Lattice3::torus(16, 1.0).unwrap();
        let phi = gen_p([1, 0, 0], lat).unwrap();
        let r = intertwine_cech(&phi, &phi, &cech::standard_cover(lat).unwrap()).unwrap();
        assert_eq!(r.construction, Construction::CechGlue);
        assert!(r.gluing_residual < 1e-12);
        assert!(r.phi_map.values.iter().all(|q| (*q - Quaternion::ONE).norm() < 1e-12));
    }

    #[test]
    fn cech_rejects_different_classes() {
        let lat = Lattice3::torus(16, 1.0).unwrap();
        let phi = gen_p([1, 0, 0], lat).unwrap();
        let psi = Field::constant(lat, Kind::S2, Quaternion::I).unwrap();
        let e = intertwine_cech(&phi, &psi, &cech::standard_cover(lat).unwrap());
        assert!(matches!(e, Err(Error::ClassMismatch(_))));
    }

    #[test]
    fn routes_agree_up_to_circle_factor() {
        let (phi, psi) = (zero_class_field(16, 3), zero_class_field(16, 4));
        let t = intertwine_trivial(&phi, &psi, &lift_whole(&phi).unwrap(), &lift_whole(&psi).unwrap()).unwrap();
        let c = intertwine_cech(&phi, &psi, &cech::standard_cover(phi.lattice).unwrap()).unwrap();
        assert!(c.gluing_residual < 1e-10);
        let dev = circle_factor_deviation(&t.phi_map, &c.phi_map, &psi);
        assert!(dev < 2.0 * (t.conjugation_residual + c.conjugation_residual) + 1e-9, "{dev}");
    }
}
