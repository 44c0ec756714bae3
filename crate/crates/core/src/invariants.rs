//! Degree, Hopf number and Υ with integrality snaps; the commuting-pullback diagnostic; relaxation.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::cech::{self, divisibility};
use crate::error::{Error, Result};
use crate::forms::{self, integrate_density, DiscreteForm};
use crate::grid::{Domain, Field, Kind, Lattice3, Mesh};
use crate::intertwine::{self, IntertwineResult};
use crate::lift::{self, LiftResult};
use crate::quat::{exp_im, Quaternion};

pub const SNAP_TOL: f64 = 0.25;
/// Sign taking ∫θ∧dθ to the convention Hopf(σ) = +1.
pub const HOPF_ORIENTATION: f64 = 1.0;
/// Sign taking deg Φ to Υ, chosen so that Υ(φ, i) = Hopf(φ) for Φ = u⁻¹.
pub const UPSILON_ORIENTATION: f64 = -1.0;
/// Steps between invariant samples during relaxation.
pub const RELAX_SAMPLE_EVERY: usize = 50;
pub const MAX_HALVINGS: usize = 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Confidence {
    Ok,
    LowConfidence,
}

#[derive(Clone, Debug, Serialize)]
pub struct GridInfo {
    pub dims: [usize; 3],
    pub domain: String,
    pub extent: f64,
}

impl GridInfo {
    pub fn of(lat: &Lattice3) -> Self {
        match lat.domain {
            Domain::Torus { periods } => GridInfo { dims: lat.dims, domain: "torus".into(), extent: periods[0] },
            Domain::Box { half_extent, .. } => GridInfo { dims: lat.dims, domain: "box".into(), extent: half_extent },
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct InvariantReport {
    pub name: String,
    pub raw: f64,
    pub snapped: i64,
    pub gap: f64,
    pub modulus: i64,
    pub residue: Option<i64>,
    pub confidence: Confidence,
    pub diagnostics: BTreeMap<String, f64>,
    pub grid: GridInfo,
}

impl InvariantReport {
    pub fn new(name: &str, raw: f64, lat: &Lattice3) -> Self {
        let snapped = raw.round() as i64;
        let gap = (raw - snapped as f64).abs();
        InvariantReport {
            name: name.into(),
            raw,
            snapped,
            gap,
            modulus: 0,
            residue: None,
            confidence: if gap < SNAP_TOL { Confidence::Ok } else { Confidence::LowConfidence },
            diagnostics: BTreeMap::new(),
            grid: GridInfo::of(lat),
        }
    }

    /// Reduces the snapped value modulo `modulus` (0 means no reduction).
    pub fn with_modulus(mut self, modulus: i64) -> Self {
        self.modulus = modulus;
        self.residue = (modulus > 0).then(|| self.snapped.rem_euclid(modulus));
        self
    }

    pub fn diag(mut self, key: &str, v: f64) -> Self {
        self.diagnostics.insert(key.into(), v);
        self
    }

    pub fn is_confident(&self) -> bool {
        self.confidence == Confidence::Ok
    }
}

/// ∫ u*ω_{S³} over the values on a mesh.
pub fn degree_values(mesh: &Mesh, u: &[Quaternion]) -> f64 {
    let v = forms::pullback_vol3_values(mesh, u);
    integrate_density(mesh, &v.comps[0].iter().map(|q| q.w).collect::<Vec<_>>())
}

pub fn degree(u: &Field) -> Result<InvariantReport> {
    forms::expect_kind(u, Kind::S3)?;
    let raw = degree_values(&u.mesh(), &u.values);
    Ok(InvariantReport::new("degree", raw, &u.lattice).diag("boundary_deviation", u.outer_shell_deviation()))
}

/// ∫ θ∧dθ for a scalar 1-form θ.
pub fn chern_simons(theta: &DiscreteForm) -> Result<f64> {
    let dt = forms::d(theta)?;
    let m = theta.mesh;
    let dens: Vec<f64> = (0..m.len())
        .into_par_iter()
        .map(|n| (0..3).map(|k| theta.comps[k][n].w * dt.comps[k][n].w).sum())
        .collect();
    Ok(integrate_density(&m, &dens))
}

/// Hopf number from a lift u: ∫θ∧dθ with θ = (1/2π)⟨u⁻¹du, φ⟩.
pub fn hopf_from_lift(phi: &Field, lift: &LiftResult) -> Result<InvariantReport> {
    let mesh = phi.mesh();
    let theta = forms::theta_values(&mesh, &lift.u, &phi.values);
    let raw = HOPF_ORIENTATION * chern_simons(&theta)?;
    Ok(InvariantReport::new("hopf", raw, &phi.lattice)
        .diag("flatness", lift.flatness)
        .diag("path_residual", lift.path_residual)
        .diag("conjugation_residual", lift.conjugation_residual)
        .diag("lift_degree", degree_values(&mesh, &lift.u)))
}

pub fn hopf(phi: &Field) -> Result<InvariantReport> {
    forms::expect_kind(phi, Kind::S2)?;
    let l = lift::lift_whole(phi)?;
    hopf_from_lift(phi, &l)
}

/// Υ from an intertwiner Φ of (φ, ψ), reduced modulo `modulus`.
pub fn upsilon_of(res: &IntertwineResult, modulus: i64) -> InvariantReport {
    let raw = UPSILON_ORIENTATION * degree_values(&res.phi_map.mesh(), &res.phi_map.values);
    InvariantReport::new("upsilon", raw, &res.phi_map.lattice)
        .with_modulus(modulus)
        .diag("conjugation_residual", res.conjugation_residual)
        .diag("gluing_residual", res.gluing_residual)
}

/// Intertwiner for a pair with equal primary class, and that class (zero on a box).
pub fn intertwine_pair(phi: &Field, psi: &Field) -> Result<(IntertwineResult, [i64; 3])> {
    forms::expect_kind(phi, Kind::S2)?;
    forms::expect_kind(psi, Kind::S2)?;
    if phi.lattice != psi.lattice {
        return Err(Error::BadDims("fields live on different lattices".into()));
    }
    if !phi.lattice.is_torus() {
        let r = intertwine::intertwine_trivial(phi, psi, &lift::lift_whole(phi)?, &lift::lift_whole(psi)?)?;
        return Ok((r, [0; 3]));
    }
    let a = cech::primary_class(phi)?.class;
    let b = cech::primary_class(psi)?.class;
    if a != b {
        return Err(Error::ClassMismatch(format!("{a:?} vs {b:?}")));
    }
    let r = if a == [0; 3] {
        intertwine::intertwine_trivial(phi, psi, &lift::lift_whole(phi)?, &lift::lift_whole(psi)?)?
    } else {
        intertwine::intertwine_cech(phi, psi, &cech::standard_cover(phi.lattice)?)?
    };
    Ok((r, a))
}

/// Υ(φ, ψ) = deg Φ for φ = Φ ψ Φ⁻¹, well defined modulo twice the divisibility of the class.
pub fn upsilon(phi: &Field, psi: &Field) -> Result<InvariantReport> {
    let (r, class) = intertwine_pair(phi, psi)?;
    Ok(upsilon_of(&r, 2 * divisibility(class)))
}

#[derive(Clone, Debug, Serialize)]
pub struct CommuteReport {
    pub max: f64,
    pub integrated: f64,
    /// ∫ of the pointwise side, for scale.
    pub scale: f64,
}

/// The default test functions: the imaginary coordinates of S³.
pub fn coordinate_test_function(y: Quaternion) -> [f64; 3] {
    [y.x, y.y, y.z]
}

/// Σ_m X_m f^m at y for the left-invariant frame X_m(y) = y e_m.
fn frame_divergence(f: &(dyn Fn(Quaternion) -> [f64; 3] + Sync), y: Quaternion) -> f64 {
    let t = 1e-4;
    (0..3)
        .map(|m| {
            let mut e = [0.0; 3];
            e[m] = t;
            let up = f(y * exp_im(e))[m];
            e[m] = -t;
            let dn = f(y * exp_im(e))[m];
            (up - dn) / (2.0 * t)
        })
        .sum()
}

/// Compares u*(d⟨f, a∧a⟩), evaluated pointwise, with d(u*⟨f, a∧a⟩) from the stencil.
pub fn commute_check_with(u: &Field, f: &(dyn Fn(Quaternion) -> [f64; 3] + Sync)) -> Result<CommuteReport> {
    forms::expect_kind(u, Kind::S3)?;
    let mesh = u.mesh();
    let (a, _) = forms::maurer_cartan(u);
    let n = mesh.len();
    let inner = |x: Quaternion, v: [f64; 3]| x.x * v[0] + x.y * v[1] + x.z * v[2];
    let per: Vec<([f64; 3], f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let ai = [a.comps[0][i], a.comps[1][i], a.comps[2][i]];
            let aa = forms::wedge11(&ai, &ai);
            let fv = f(u.values[i]);
            let b = [0, 1, 2].map(|k| inner(aa[k], fv));
            let aaa: f64 = (0..3).map(|k| ai[k].x * aa[k].x + ai[k].y * aa[k].y + ai[k].z * aa[k].z).sum();
            (b, frame_divergence(f, u.values[i]) / 3.0 * aaa)
        })
        .collect();
    let two = DiscreteForm::from_scalars(2, mesh, (0..3).map(|k| per.iter().map(|x| x.0[k]).collect()).collect())?;
    let right = forms::d(&two)?.scalar_comp(0);
    let diff: Vec<f64> = (0..n).map(|i| (per[i].1 - right[i]).abs()).collect();
    let left_abs: Vec<f64> = per.iter().map(|x| x.1.abs()).collect();
    Ok(CommuteReport {
        max: diff.iter().cloned().fold(0.0, f64::max),
        integrated: integrate_density(&mesh, &diff),
        scale: integrate_density(&mesh, &left_abs),
    })
}

pub fn commute_check(u: &Field) -> Result<CommuteReport> {
    commute_check_with(u, &coordinate_test_function)
}

/// Derivative of a local function along each of the four value components by the four-point stencil.
#[inline]
fn fd4(g: impl Fn(Quaternion) -> f64, at: Quaternion, eps: f64) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (c, o) in out.iter_mut().enumerate() {
        let mut e = [0.0; 4];
        e[c] = eps;
        let e = Quaternion::from_array(e);
        *o = (8.0 * (g(at + e) - g(at - e)) - (g(at + e * 2.0) - g(at - e * 2.0))) / (12.0 * eps);
    }
    out
}

/// Forward neighbours of a vertex, None past the edge of a box.
#[inline]
fn forward(mesh: &Mesh, n: usize) -> [Option<usize>; 3] {
    let c = mesh.coords(n);
    [0, 1, 2].map(|d| mesh.offset(c, d, 1))
}

/// Edge and plaquette Faddeev density at a vertex from its value and forward neighbours.
#[inline]
fn lattice_density(h: [f64; 3], p: Quaternion, nb: [Option<Quaternion>; 3]) -> f64 {
    let diff = nb.map(|q| q.map(|q| q - p));
    let mut e = 0.0;
    for d in 0..3 {
        if let Some(a) = diff[d] {
            e += a.norm_sq() / (h[d] * h[d]);
        }
    }
    for (a, b) in [(0, 1), (1, 2), (2, 0)] {
        if let (Some(x), Some(y)) = (diff[a], diff[b]) {
            let (xx, yy, xy) = (x.norm_sq(), y.norm_sq(), x.dot(y));
            e += (xx * yy - xy * xy) / (h[a] * h[a] * h[b] * h[b]);
        }
    }
    e
}

/// Faddeev energy from forward differences on edges and plaquettes.
///
/// Central differences do not see odd-even oscillations, so descent uses this form instead.
pub fn lattice_faddeev_energy(mesh: &Mesh, phi: &[Quaternion]) -> f64 {
    let dens: Vec<f64> = (0..mesh.len())
        .into_par_iter()
        .map(|n| lattice_density(mesh.h, phi[n], forward(mesh, n).map(|m| m.map(|m| phi[m]))))
        .collect();
    forms::pairwise_sum(&dens) * mesh.cell_volume()
}

/// Gradient of [`lattice_faddeev_energy`] with respect to every vertex value.
pub fn lattice_faddeev_gradient(mesh: &Mesh, phi: &[Quaternion]) -> Vec<Quaternion> {
    let vol = mesh.cell_volume();
    // per vertex: derivative of its density in its own value and in each forward neighbour
    let local: Vec<[Quaternion; 4]> = (0..mesh.len())
        .into_par_iter()
        .map(|n| {
            let fw = forward(mesh, n);
            let p = phi[n];
            let nb = fw.map(|m| m.map(|m| phi[m]));
            let mut out = [Quaternion::ZERO; 4];
            out[0] = Quaternion::from_array(fd4(|x| lattice_density(mesh.h, x, nb), p, 1e-3)) * vol;
            for d in 0..3 {
                if let Some(q) = nb[d] {
                    let g = fd4(
                        |x| {
                            let mut nn = nb;
                            nn[d] = Some(x);
                            lattice_density(mesh.h, p, nn)
                        },
                        q,
                        1e-3,
                    );
                    out[d + 1] = Quaternion::from_array(g) * vol;
                }
            }
            out
        })
        .collect();
    let mut grad = vec![Quaternion::ZERO; mesh.len()];
    for (n, l) in local.iter().enumerate() {
        grad[n] = grad[n] + l[0];
        for (d, m) in forward(mesh, n).iter().enumerate() {
            if let Some(m) = m {
                grad[*m] = grad[*m] + l[d + 1];
            }
        }
    }
    grad
}

#[derive(Clone, Debug, Serialize)]
pub struct RelaxSample {
    pub step: usize,
    /// The descended lattice energy.
    pub energy: f64,
    /// The central-difference Faddeev energy of the same field.
    pub faddeev_energy: f64,
    pub class: Option<[i64; 3]>,
    pub hopf_raw: Option<f64>,
    pub hopf: Option<i64>,
}

#[derive(Clone, Debug)]
pub struct RelaxResult {
    pub phi: Field,
    /// Lattice energy before the first step and after every accepted step.
    pub energy_trace: Vec<f64>,
    pub invariant_trace: Vec<RelaxSample>,
    pub final_step_size: f64,
    pub steps_taken: usize,
}

fn relax_sample(phi: &Field, step: usize, energy: f64) -> RelaxSample {
    let class = if phi.lattice.is_torus() { cech::primary_class(phi).ok().map(|c| c.class) } else { None };
    let hopf = if class.is_none_or(|c| c == [0; 3]) { hopf(phi).ok() } else { None };
    let faddeev_energy = forms::faddeev_energy(phi).total;
    RelaxSample { step, energy, faddeev_energy, class, hopf_raw: hopf.as_ref().map(|h| h.raw), hopf: hopf.map(|h| h.snapped) }
}

/// True for vertices that descent keeps fixed: the two outer shells of a box.
fn pinned(mesh: &Mesh, c: [usize; 3]) -> bool {
    !mesh.periodic && (0..3).any(|d| c[d] < 2 || c[d] + 2 >= mesh.dims[d])
}

/// Projected gradient descent on the Faddeev energy with backtracking, sampling invariants along the way.
pub fn relax(phi: &Field, steps: usize, step_size: f64) -> Result<RelaxResult> {
    forms::expect_kind(phi, Kind::S2)?;
    if !(step_size.is_finite() && step_size > 0.0) {
        return Err(Error::Invalid(format!("step size {step_size}")));
    }
    let mesh = phi.mesh();
    let vol = mesh.cell_volume();
    let mut cur = phi.values.clone();
    let mut energy = lattice_faddeev_energy(&mesh, &cur);
    let mut energy_trace = vec![energy];
    let mut invariant_trace = vec![relax_sample(phi, 0, energy)];
    let mut tau = step_size;
    let mut taken = 0;
    for step in 1..=steps {
        let grad = lattice_faddeev_gradient(&mesh, &cur);
        let gmax = grad.iter().map(|g| g.norm()).fold(0.0, f64::max);
        if gmax / vol < 1e-12 {
            break;
        }
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<Quaternion> = (0..mesh.len())
                .into_par_iter()
                .map(|n| {
                    let p = cur[n];
                    if pinned(&mesh, mesh.coords(n)) {
                        return p;
                    }
                    let mut v = (grad[n] * (-tau / vol)).im_part();
                    v = v - p * v.dot(p);
                    (p + v).normalized().im_part().normalized()
                })
                .collect();
            let e = lattice_faddeev_energy(&mesh, &trial);
            if e <= energy {
                cur = trial;
                energy = e;
                accepted = true;
                break;
            }
            tau *= 0.5;
        }
        if !accepted {
            return Err(Error::StepFailure { step });
        }
        taken = step;
        energy_trace.push(energy);
        if step % RELAX_SAMPLE_EVERY == 0 || step == steps {
            let f = Field::new(phi.lattice, Kind::S2, cur.clone())?;
            invariant_trace.push(relax_sample(&f, step, energy));
        }
    }
    if invariant_trace.last().is_none_or(|s| s.step != taken) {
        let f = Field::new(phi.lattice, Kind::S2, cur.clone())?;
        invariant_trace.push(relax_sample(&f, taken, energy));
    }
    Ok(RelaxResult {
        phi: Field::new(phi.lattice, Kind::S2, cur)?,
        energy_trace,
        invariant_trace,
        final_step_size: tau,
        steps_taken: taken,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genmaps::{gen_p, perturb};
    use crate::quat::UnitComplex;

    #[test]
    fn report_residue_and_confidence() {
        let lat = Lattice3::torus(8, 1.0).unwrap();
        let r = InvariantReport::new("x", -2.9, &lat).with_modulus(2);
        assert_eq!((r.snapped, r.residue), (-3, Some(1)));
        assert!((r.gap - 0.1).abs() < 1e-12 && r.is_confident());
        assert_eq!(InvariantReport::new("x", 0.5, &lat).confidence, Confidence::LowConfidence);
        assert_eq!(InvariantReport::new("x", 1.0, &lat).residue, None);
    }

    #[test]
    fn constant_fields_are_trivial() {
        let lat = Lattice3::cube(12, 4.0).unwrap().with_far_value(Quaternion::ONE);
        let u = Field::constant(lat, Kind::S3, Quaternion::ONE).unwrap();
        assert_eq!(degree(&u).unwrap().raw, 0.0);
        let c = commute_check(&u).unwrap();
        assert_eq!((c.max, c.integrated), (0.0, 0.0));
        let lat = lat.with_far_value(Quaternion::I);
        let phi = Field::constant(lat, Kind::S2, Quaternion::I).unwrap();
        assert_eq!(hopf(&phi).unwrap().raw, 0.0);
        let r = relax(&phi, 5, 1e-3).unwrap();
        assert!(r.energy_trace.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn hopf_ignores_global_phase_of_lift() {
        let lat = Lattice3::cube(16, 4.0).unwrap();
        let phi = crate::genmaps::gen_hopf_box(lat).unwrap();
        let l = lift::lift_whole(&phi).unwrap();
        let mut l2 = l.clone();
        let e = UnitComplex::from_angle(1.3).quat();
        l2.u.iter_mut().for_each(|q| *q = e * *q);
        let (a, b) = (hopf_from_lift(&phi, &l).unwrap(), hopf_from_lift(&phi, &l2).unwrap());
        assert!((a.raw - b.raw).abs() < 1e-10);
    }

    #[test]
    fn upsilon_of_field_with_itself_is_zero() {
        let lat = Lattice3::torus(16, 1.0).unwrap();
        let phi = gen_p([1, 0, 0], lat).unwrap();
        let u = upsilon(&phi, &phi).unwrap();
        assert_eq!((u.snapped, u.modulus, u.residue), (0, 2, Some(0)));
        let c = Field::constant(lat, Kind::S2, Quaternion::I).unwrap();
        assert!(matches!(upsilon(&phi, &c), Err(Error::ClassMismatch(_))));
    }

    #[test]
    fn lattice_gradient_matches_energy_differences() {
        let lat = Lattice3::cube(8, 4.0).unwrap();
        let phi = perturb(&crate::genmaps::gen_hopf_box(lat).unwrap(), 1, 5, 0.3).unwrap();
        let m = phi.mesh();
        let g = lattice_faddeev_gradient(&m, &phi.values);
        for (n, c) in [(73usize, 1usize), (200, 2), (300, 3), (0, 0)] {
            let mut d = [0.0; 4];
            d[c] = 1e-5;
            let (mut a, mut b) = (phi.values.clone(), phi.values.clone());
            a[n] = a[n] + Quaternion::from_array(d);
            b[n] = b[n] - Quaternion::from_array(d);
            let fd = (lattice_faddeev_energy(&m, &a) - lattice_faddeev_energy(&m, &b)) / 2e-5;
            let got = g[n].to_array()[c];
            assert!((fd - got).abs() < 1e-5 * (1.0 + fd.abs()), "{n} {c}: {got} vs {fd}");
        }
    }

    #[test]
    fn relax_decreases_energy_and_keeps_class() {
        let lat = Lattice3::torus(16, 1.0).unwrap();
        let phi = perturb(&gen_p([1, 0, 0], lat).unwrap(), 1, 2, 0.05).unwrap();
        let r = relax(&phi, 60, 1e-5).unwrap();
        assert!(r.energy_trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(r.energy_trace.last().unwrap() < &(0.99 * r.energy_trace[0]));
        assert!(r.invariant_trace.iter().all(|s| s.class == Some([1, 0, 0])));
        assert_eq!(r.invariant_trace.last().unwrap().step, 60);
        assert!(relax(&phi, 1, -1.0).is_err());
    }
}
