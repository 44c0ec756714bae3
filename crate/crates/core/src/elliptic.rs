//! Primitives of closed forms: spectral solves on the torus and the radial homotopy operator on charts.

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::forms::{self, component_count, pullback_area_values, DiscreteForm, ValueKind};
use crate::grid::{Field, Lattice3, Mesh};
use crate::quat::Quaternion;

pub const PRIMITIVE_TOL: f64 = 1e-3;
pub const SIMPSON_INTERVALS: usize = 64;
const KERNEL_EPS: f64 = 1e-9;

/// Axis-aligned box of lattice vertices, star-shaped about its center.
///
/// `lo` may be negative or run past the end on a torus; indices wrap.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CubeChart {
    pub lattice: Lattice3,
    pub lo: [isize; 3],
    pub len: [usize; 3],
}

impl CubeChart {
    pub fn new(lattice: Lattice3, lo: [isize; 3], len: [usize; 3]) -> Result<Self> {
        for d in 0..3 {
            if len[d] < 3 {
                return Err(Error::BadDims(format!("chart extent {len:?} too small")));
            }
            let n = lattice.dims[d] as isize;
            if lattice.is_torus() {
                if len[d] as isize > n {
                    return Err(Error::BadDims("chart longer than the period".into()));
                }
            } else if lo[d] < 0 || lo[d] + len[d] as isize > n {
                return Err(Error::BadDims("chart leaves the box".into()));
            }
        }
        Ok(CubeChart { lattice, lo, len })
    }

    /// The chart covering every vertex (not periodic, even on a torus).
    pub fn whole(lattice: Lattice3) -> Self {
        CubeChart { lattice, lo: [0; 3], len: lattice.dims }
    }

    pub fn is_whole(&self) -> bool {
        self.lo == [0; 3] && self.len == self.lattice.dims
    }

    pub fn mesh(&self) -> Mesh {
        let g = self.lattice.mesh();
        let origin = [0, 1, 2].map(|d| g.origin[d] + self.lo[d] as f64 * g.h[d]);
        Mesh { dims: self.len, h: g.h, origin, periodic: false }
    }

    pub fn center(&self) -> [f64; 3] {
        let m = self.mesh();
        [0, 1, 2].map(|d| m.origin[d] + 0.5 * (self.len[d] - 1) as f64 * m.h[d])
    }

    pub fn half_widths(&self) -> [f64; 3] {
        let m = self.mesh();
        [0, 1, 2].map(|d| 0.5 * (self.len[d] - 1) as f64 * m.h[d])
    }

    /// Global index along one axis of local coordinate `c`.
    #[inline]
    pub fn global_axis(&self, d: usize, c: usize) -> usize {
        (self.lo[d] + c as isize).rem_euclid(self.lattice.dims[d] as isize) as usize
    }

    #[inline]
    pub fn global(&self, c: [usize; 3]) -> usize {
        let g = self.lattice.mesh();
        g.idx(self.global_axis(0, c[0]), self.global_axis(1, c[1]), self.global_axis(2, c[2]))
    }

    /// Local coordinate of global axis index `g`, if inside the chart.
    #[inline]
    pub fn local_axis(&self, d: usize, g: usize) -> Option<usize> {
        let n = self.lattice.dims[d] as isize;
        let c = (g as isize - self.lo[d]).rem_euclid(n) as usize;
        (c < self.len[d]).then_some(c)
    }

    pub fn contains(&self, g: [usize; 3]) -> bool {
        (0..3).all(|d| self.local_axis(d, g[d]).is_some())
    }

    pub fn gather<T: Copy + Send + Sync>(&self, values: &[T]) -> Vec<T> {
        let m = self.mesh();
        (0..m.len()).into_par_iter().map(|n| values[self.global(m.coords(n))]).collect()
    }
}

/// Trilinear interpolation of component arrays at a point inside a non-periodic mesh.
#[inline]
fn trilinear(mesh: &Mesh, comps: &[Vec<Quaternion>], p: [f64; 3], out: &mut [f64; 3]) {
    let mut base = [0usize; 3];
    let mut frac = [0.0; 3];
    for d in 0..3 {
        let s = ((p[d] - mesh.origin[d]) / mesh.h[d]).clamp(0.0, (mesh.dims[d] - 1) as f64);
        let i = (s.floor() as usize).min(mesh.dims[d] - 2);
        base[d] = i;
        frac[d] = s - i as f64;
    }
    *out = [0.0; 3];
    for corner in 0..8 {
        let o = [corner & 1, (corner >> 1) & 1, (corner >> 2) & 1];
        let mut w = 1.0;
        for d in 0..3 {
            w *= if o[d] == 1 { frac[d] } else { 1.0 - frac[d] };
        }
        if w == 0.0 {
            continue;
        }
        let n = mesh.idx(base[0] + o[0], base[1] + o[1], base[2] + o[2]);
        for (k, c) in comps.iter().enumerate() {
            out[k] += w * c[n].w;
        }
    }
}

/// Scaled closedness defect max|dη| / max|∂η| of a scalar form.
pub fn closedness_residual(eta: &DiscreteForm) -> Result<f64> {
    if eta.degree == 3 {
        return Ok(0.0);
    }
    let de = forms::d(eta)?;
    let num = de.max_norm();
    let m = eta.mesh;
    let mut den = 0.0f64;
    for c in &eta.comps {
        for ax in 0..3 {
            den = den.max(forms::partial(&m, c, ax).iter().fold(0.0, |a: f64, q| a.max(q.norm())));
        }
    }
    Ok(if den == 0.0 { 0.0 } else { num / den })
}

/// Radial homotopy operator K about `center` on a non-periodic mesh: dK + Kd = 1.
///
/// K(η)(x) = ∫₀¹ t^{k−1} (η(c + t(x−c)) ⌟ (x−c)) dt by composite Simpson.
pub fn poincare_primitive(eta: &DiscreteForm, center: [f64; 3]) -> Result<DiscreteForm> {
    let k = eta.degree;
    if k == 0 || eta.kind != ValueKind::Scalar {
        return Err(Error::Degree("primitive needs a scalar form of degree ≥ 1".into()));
    }
    if eta.mesh.periodic {
        return Err(Error::Domain("homotopy operator needs a star-shaped chart, not a torus".into()));
    }
    let r = closedness_residual(eta)?;
    if r > PRIMITIVE_TOL {
        return Err(Error::NotClosed { residual: r });
    }
    Ok(homotopy_operator(eta, center))
}

/// K without the closedness precondition.
pub fn homotopy_operator(eta: &DiscreteForm, center: [f64; 3]) -> DiscreteForm {
    let k = eta.degree;
    let m = eta.mesh;
    let nq = SIMPSON_INTERVALS;
    let weights: Vec<(f64, f64)> = (0..=nq)
        .map(|s| {
            let t = s as f64 / nq as f64;
            let w = if s == 0 || s == nq {
                1.0
            } else if s % 2 == 1 {
                4.0
            } else {
                2.0
            };
            (t, w / (3.0 * nq as f64) * t.powi(k as i32 - 1))
        })
        .collect();
    let out_nc = component_count(k - 1);
    let vals: Vec<[f64; 3]> = (0..m.len())
        .into_par_iter()
        .map(|n| {
            let x = m.position(m.coords(n));
            let v = [x[0] - center[0], x[1] - center[1], x[2] - center[2]];
            let mut acc = [0.0; 3];
            let mut e = [0.0; 3];
            for &(t, w) in &weights {
                if w == 0.0 {
                    continue;
                }
                let p = [center[0] + t * v[0], center[1] + t * v[1], center[2] + t * v[2]];
                trilinear(&m, &eta.comps, p, &mut e);
                match k {
                    1 => acc[0] += w * (e[0] * v[0] + e[1] * v[1] + e[2] * v[2]),
                    2 => {
                        // i_v of (B23, B31, B12) is B × v
                        acc[0] += w * (e[1] * v[2] - e[2] * v[1]);
                        acc[1] += w * (e[2] * v[0] - e[0] * v[2]);
                        acc[2] += w * (e[0] * v[1] - e[1] * v[0]);
                    }
                    _ => {
                        for d in 0..3 {
                            acc[d] += w * e[0] * v[d];
                        }
                    }
                }
            }
            acc
        })
        .collect();
    let comps = (0..out_nc).map(|c| vals.iter().map(|a| Quaternion::real(a[c])).collect()).collect();
    DiscreteForm { degree: k - 1, kind: ValueKind::Scalar, mesh: m, comps }
}

/// Decomposition of a torus 1- or 2-form into exact, coexact and harmonic parts.
#[derive(Clone, Debug)]
pub struct HodgeSplit {
    pub exact: DiscreteForm,
    pub coexact: DiscreteForm,
    pub harmonic: DiscreteForm,
    /// Line integrals (1-forms) or integrals over coordinate 2-tori (2-forms), per normal axis.
    pub periods: [f64; 3],
}

/// In-place 3D FFT of x-fastest data.
pub(crate) fn fft3(dims: [usize; 3], data: &mut [Complex64], inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    for axis in 0..3 {
        let n = dims[axis];
        let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
        let stride = match axis {
            0 => 1,
            1 => dims[0],
            _ => dims[0] * dims[1],
        };
        let total: usize = dims.iter().product();
        let starts: Vec<usize> = (0..total).filter(|&s| (s / stride) % n == 0).collect();
        let lines: Vec<Vec<Complex64>> = starts
            .par_iter()
            .map(|&s| {
                let mut line: Vec<Complex64> = (0..n).map(|t| data[s + t * stride]).collect();
                fft.process(&mut line);
                line
            })
            .collect();
        for (s, line) in starts.iter().zip(lines) {
            for (t, v) in line.into_iter().enumerate() {
                data[s + t * stride] = v;
            }
        }
    }
    if inverse {
        let scale = 1.0 / data.len() as f64;
        data.par_iter_mut().for_each(|v| *v *= scale);
    }
}

/// Central-difference symbol S_d = sin(κ_d h_d)/h_d at every mode.
fn symbols(mesh: &Mesh) -> Vec<[f64; 3]> {
    (0..mesh.len())
        .into_par_iter()
        .map(|n| {
            let c = mesh.coords(n);
            [0, 1, 2].map(|d| (2.0 * PI * c[d] as f64 / mesh.dims[d] as f64).sin() / mesh.h[d])
        })
        .collect()
}

fn spectra(form: &DiscreteForm) -> Vec<Vec<Complex64>> {
    form.comps
        .iter()
        .map(|c| {
            let mut v: Vec<Complex64> = c.iter().map(|q| Complex64::new(q.w, 0.0)).collect();
            fft3(form.mesh.dims, &mut v, false);
            v
        })
        .collect()
}

fn from_spectra(mesh: &Mesh, degree: usize, mut s: Vec<Vec<Complex64>>) -> DiscreteForm {
    let comps = s
        .iter_mut()
        .map(|v| {
            fft3(mesh.dims, v, true);
            v.iter().map(|z| Quaternion::real(z.re)).collect()
        })
        .collect();
    DiscreteForm { degree, kind: ValueKind::Scalar, mesh: *mesh, comps }
}

fn require_torus(mesh: &Mesh) -> Result<()> {
    if !mesh.periodic {
        return Err(Error::Domain("spectral solve needs a torus".into()));
    }
    Ok(())
}

fn zero_mode_periods(form: &DiscreteForm) -> [f64; 3] {
    let m = form.mesh;
    let len = [0, 1, 2].map(|d| m.h[d] * m.dims[d] as f64);
    let mean = |c: &Vec<Quaternion>| forms::pairwise_sum(&c.iter().map(|q| q.w).collect::<Vec<_>>()) / m.len() as f64;
    match form.degree {
        1 => [0, 1, 2].map(|d| mean(&form.comps[d]) * len[d]),
        _ => [0, 1, 2].map(|d| mean(&form.comps[d]) * len[(d + 1) % 3] * len[(d + 2) % 3]),
    }
}

/// Spectral Hodge decomposition of a scalar 1- or 2-form on the torus.
///
/// Kernel modes of the central-difference symbol (the zero mode and Nyquist-aliased modes) form
/// the harmonic part; periods come from the zero mode alone.
pub fn hodge_split(form: &DiscreteForm) -> Result<HodgeSplit> {
    require_torus(&form.mesh)?;
    if !(form.degree == 1 || form.degree == 2) || form.kind != ValueKind::Scalar {
        return Err(Error::Degree("hodge_split takes scalar 1- or 2-forms".into()));
    }
    let m = form.mesh;
    let sym = symbols(&m);
    let f = spectra(form);
    let zero = Complex64::new(0.0, 0.0);
    let mut long = vec![vec![zero; m.len()]; 3];
    let mut trans = vec![vec![zero; m.len()]; 3];
    let mut harm = vec![vec![zero; m.len()]; 3];
    for n in 0..m.len() {
        let s = sym[n];
        let s2 = s[0] * s[0] + s[1] * s[1] + s[2] * s[2];
        let v = [f[0][n], f[1][n], f[2][n]];
        if s2 < KERNEL_EPS * m.max_inv_h().powi(2) {
            for k in 0..3 {
                harm[k][n] = v[k];
            }
            continue;
        }
        let sv = (v[0] * s[0] + v[1] * s[1] + v[2] * s[2]) / s2;
        for k in 0..3 {
            long[k][n] = sv * s[k];
            trans[k][n] = v[k] - long[k][n];
        }
    }
    let (exact, coexact) = if form.degree == 1 { (long, trans) } else { (trans, long) };
    Ok(HodgeSplit {
        exact: from_spectra(&m, form.degree, exact),
        coexact: from_spectra(&m, form.degree, coexact),
        harmonic: from_spectra(&m, form.degree, harm),
        periods: zero_mode_periods(form),
    })
}

/// Coexact primitive ξ = δΔ⁻¹η of the transverse part of a scalar 2-form on the torus.
pub fn coexact_primitive(eta: &DiscreteForm) -> Result<DiscreteForm> {
    require_torus(&eta.mesh)?;
    if eta.degree != 2 {
        return Err(Error::Degree("coexact_primitive takes a 2-form".into()));
    }
    let m = eta.mesh;
    let sym = symbols(&m);
    let f = spectra(eta);
    let zero = Complex64::new(0.0, 0.0);
    let mut xi = vec![vec![zero; m.len()]; 3];
    let iu = Complex64::new(0.0, 1.0);
    for n in 0..m.len() {
        let s = sym[n];
        let s2 = s[0] * s[0] + s[1] * s[1] + s[2] * s[2];
        if s2 < KERNEL_EPS * m.max_inv_h().powi(2) {
            continue;
        }
        let g = [f[0][n] / s2, f[1][n] / s2, f[2][n] / s2];
        // ξ̂ = iS × Ĝ
        xi[0][n] = iu * (g[2] * s[1] - g[1] * s[2]);
        xi[1][n] = iu * (g[0] * s[2] - g[2] * s[0]);
        xi[2][n] = iu * (g[1] * s[0] - g[0] * s[1]);
    }
    Ok(from_spectra(&m, 1, xi))
}

/// Output of [`solve_xi_torus`].
#[derive(Clone, Debug)]
pub struct XiSolution {
    pub xi: DiscreteForm,
    /// η = −¼ φ dφ∧dφ.
    pub eta: DiscreteForm,
    /// Periods of φ*ω_{S²} over the coordinate 2-tori (normal axis order).
    pub class_periods: [f64; 3],
    /// Largest |harmonic part of η|.
    pub harmonic_max: f64,
    /// Largest |longitudinal part of η|, the discrete failure of dη = 0.
    pub exactness_defect: f64,
}

/// ξ with dξ = η − harmonic(η) and δξ = 0, where η = −¼ φ dφ∧dφ.
pub fn solve_xi_torus(phi: &Field) -> Result<XiSolution> {
    let mesh = phi.mesh();
    require_torus(&mesh)?;
    let (area, _) = pullback_area_values(&mesh, &phi.values);
    let eta = area.scale(2.0 * PI);
    let split = hodge_split(&eta)?;
    let xi = coexact_primitive(&eta)?;
    Ok(XiSolution {
        class_periods: split.periods.map(|p| p / (2.0 * PI)),
        harmonic_max: split.harmonic.max_norm(),
        exactness_defect: split.coexact.max_norm(),
        xi,
        eta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::{codiff, d};
    use crate::grid::Domain;
    use std::f64::consts::TAU;

    fn torus_mesh(n: usize) -> Mesh {
        Lattice3::torus(n, 1.0).unwrap().mesh()
    }

    fn form(mesh: Mesh, degree: usize, f: impl Fn([f64; 3]) -> [f64; 3]) -> DiscreteForm {
        let nc = component_count(degree);
        let comps =
            (0..nc).map(|k| (0..mesh.len()).map(|n| f(mesh.position(mesh.coords(n)))[k]).collect()).collect();
        DiscreteForm::from_scalars(degree, mesh, comps).unwrap()
    }

    fn max_diff(a: &DiscreteForm, b: &DiscreteForm) -> f64 {
        a.sub(b).unwrap().max_norm()
    }

    #[test]
    fn chart_indexing_wraps() {
        let lat = Lattice3::torus(12, 1.0).unwrap();
        let ch = CubeChart::new(lat, [-2, 5, 9], [6, 4, 6]).unwrap();
        assert_eq!(ch.global_axis(0, 0), 10);
        assert_eq!(ch.global_axis(2, 4), 1);
        assert_eq!(ch.local_axis(0, 11), Some(1));
        assert_eq!(ch.local_axis(0, 5), None);
        assert!(ch.contains([0, 6, 0]));
        let b = Lattice3::cube(10, 1.0).unwrap();
        assert!(CubeChart::new(b, [-1, 0, 0], [4, 4, 4]).is_err());
    }

    #[test]
    fn primitive_of_zero_and_constant() {
        let lat = Lattice3::cube(17, 1.0).unwrap();
        let ch = CubeChart::whole(lat);
        let m = ch.mesh();
        let z = DiscreteForm::zeros(2, ValueKind::Scalar, m);
        assert_eq!(poincare_primitive(&z, ch.center()).unwrap().max_norm(), 0.0);
        let eta = form(m, 2, |_| [0.0, 0.0, 1.0]);
        let k = poincare_primitive(&eta, ch.center()).unwrap();
        for n in 0..m.len() {
            let x = m.position(m.coords(n));
            assert!((k.comps[0][n].w + 0.5 * x[1]).abs() < 1e-12);
            assert!((k.comps[1][n].w - 0.5 * x[0]).abs() < 1e-12);
            assert!(k.comps[2][n].w.abs() < 1e-12);
        }
    }

    #[test]
    fn primitive_rejects_open_forms() {
        let lat = Lattice3::cube(17, 1.0).unwrap();
        let m = lat.mesh();
        let eta = form(m, 2, |p| [0.0, 0.0, p[2]]);
        assert!(matches!(poincare_primitive(&eta, [0.0; 3]), Err(Error::NotClosed { .. })));
    }

    fn band_limited_exact_2form(m: Mesh) -> DiscreteForm {
        let beta = form(m, 1, |p| {
            let (x, y, z) = (TAU * p[0], TAU * p[1], TAU * p[2]);
            [
                (y).sin() * (z).cos() + 0.3 * (2.0 * x).cos(),
                (x + z).cos() - 0.5 * (y).sin(),
                (x).sin() * (2.0 * y).cos() + (z).sin(),
            ]
        });
        d(&beta).unwrap()
    }

    fn chart_defect(n: usize) -> (f64, f64) {
        let lat = Lattice3::new([n; 3], Domain::Box { half_extent: 0.5, far_value: Quaternion::ONE }).unwrap();
        let m = lat.mesh();
        let eta = band_limited_exact_2form(m);
        let k = poincare_primitive(&eta, [0.0; 3]).unwrap();
        let dk = d(&k).unwrap();
        let interior = |c: [usize; 3]| c.iter().all(|&i| (2..n - 2).contains(&i));
        (dk.sub(&eta).unwrap().max_norm_where(interior), eta.max_norm())
    }

    #[test]
    fn primitive_inverts_d_on_charts() {
        let (e1, scale) = chart_defect(21);
        let (e2, _) = chart_defect(41);
        assert!(e2 < 3e-2 * scale, "{e2} vs {scale}");
        assert!(e1 / e2 > 3.0, "{e1} {e2}");
        let lat = Lattice3::cube(17, 0.5).unwrap();
        let eta = band_limited_exact_2form(lat.mesh());
        let k = poincare_primitive(&eta, [0.0; 3]).unwrap();
        let k3 = poincare_primitive(&eta.scale(2.0).add(&eta).unwrap(), [0.0; 3]).unwrap();
        assert!(max_diff(&k3, &k.scale(3.0)) < 1e-12);
    }

    #[test]
    fn hodge_examples() {
        let m = torus_mesh(16);
        let c = form(m, 1, |_| [1.0, 0.0, 0.0]);
        let s = hodge_split(&c).unwrap();
        assert!(max_diff(&s.harmonic, &c) < 1e-12);
        assert!(s.exact.max_norm() < 1e-12 && s.coexact.max_norm() < 1e-12);
        assert!((s.periods[0] - 1.0).abs() < 1e-12 && s.periods[1].abs() < 1e-12);

        let b = d(&form(m, 1, |p| [0.0, (TAU * p[0]).sin(), 0.0])).unwrap();
        let s = hodge_split(&b).unwrap();
        assert!(max_diff(&s.exact, &b) < 1e-10);
        assert!(s.harmonic.max_norm() < 1e-12);

        let h = form(m, 2, |_| [0.0, 0.0, 2.0]);
        let sum = b.add(&h).unwrap();
        let s = hodge_split(&sum).unwrap();
        assert!(max_diff(&s.exact, &b) < 1e-10 && max_diff(&s.harmonic, &h) < 1e-10);
        assert!((s.periods[2] - 2.0).abs() < 1e-12);

        let lat = Lattice3::cube(16, 1.0).unwrap();
        assert!(matches!(hodge_split(&form(lat.mesh(), 2, |_| [0.0; 3])), Err(Error::Domain(_))));
    }

    #[test]
    fn coexact_primitive_is_exact_in_the_spectral_sense() {
        let m = Lattice3::new([16, 24, 20], Domain::Torus { periods: [1.0, 1.0, 1.0] }).unwrap().mesh();
        let eta = band_limited_exact_2form(m);
        let xi = coexact_primitive(&eta).unwrap();
        let harm = hodge_split(&eta).unwrap().harmonic;
        let target = eta.sub(&harm).unwrap();
        let err = max_diff(&d(&xi).unwrap(), &target);
        assert!(err < 1e-9 * eta.max_norm(), "{err}");
        assert!(codiff(&xi).unwrap().max_norm() < 1e-10);
    }

    #[test]
    fn solve_xi_of_constant() {
        let lat = Lattice3::torus(16, 1.0).unwrap();
        let phi = Field::constant(lat, crate::grid::Kind::S2, Quaternion::I).unwrap();
        let s = solve_xi_torus(&phi).unwrap();
        assert_eq!(s.xi.max_norm(), 0.0);
        assert_eq!(s.class_periods, [0.0; 3]);
    }
}
