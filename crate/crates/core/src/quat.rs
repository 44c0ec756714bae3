//! Quaternion algebra and the unit spheres S¹ ⊂ S³, S² ⊂ Im ℍ.
//!
//! `i`, `j`, `k` are stored in `x`, `y`, `z`.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const UNIT_TOL: f64 = 1e-12;
pub const LOG_GUARD: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const ZERO: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 0.0);
    pub const ONE: Quaternion = Quaternion::new(1.0, 0.0, 0.0, 0.0);
    pub const I: Quaternion = Quaternion::new(0.0, 1.0, 0.0, 0.0);
    pub const J: Quaternion = Quaternion::new(0.0, 0.0, 1.0, 0.0);
    pub const K: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 1.0);

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quaternion { w, x, y, z }
    }

    pub const fn real(w: f64) -> Self {
        Quaternion::new(w, 0.0, 0.0, 0.0)
    }

    pub const fn imag(v: [f64; 3]) -> Self {
        Quaternion::new(0.0, v[0], v[1], v[2])
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Quaternion::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn conj(self) -> Self {
        Quaternion::new(self.w, -self.x, -self.y, -self.z)
    }

    /// Euclidean inner product ⟨p, q⟩ = Re(p q̄).
    pub fn dot(self, q: Self) -> f64 {
        self.w * q.w + self.x * q.x + self.y * q.y + self.z * q.z
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scale(self, s: f64) -> Self {
        Quaternion::new(self.w * s, self.x * s, self.y * s, self.z * s)
    }

    /// Multiplicative inverse; for unit quaternions this is the conjugate.
    pub fn inverse(self) -> Self {
        self.conj().scale(1.0 / self.norm_sq())
    }

    pub fn re(self) -> f64 {
        self.w
    }

    pub fn im(self) -> LieValue {
        LieValue::new(self.x, self.y, self.z)
    }

    pub fn im_part(self) -> Self {
        Quaternion::new(0.0, self.x, self.y, self.z)
    }

    pub fn normalized(self) -> Self {
        self.scale(1.0 / self.norm())
    }

    pub fn is_finite(self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Commutator [p, q] = pq − qp.
    pub fn bracket(self, q: Self) -> Self {
        self * q - q * self
    }
}

impl Add for Quaternion {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Quaternion::new(self.w + o.w, self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Quaternion {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl Sub for Quaternion {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Quaternion::new(self.w - o.w, self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Quaternion {
    type Output = Self;
    fn neg(self) -> Self {
        Quaternion::new(-self.w, -self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Quaternion {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        self.scale(s)
    }
}

impl Mul for Quaternion {
    type Output = Self;
    #[inline]
    fn mul(self, q: Self) -> Self {
        let (a, b, c, d) = (self.w, self.x, self.y, self.z);
        let (e, f, g, h) = (q.w, q.x, q.y, q.z);
        Quaternion::new(
            a * e - b * f - c * g - d * h,
            a * f + b * e + c * h - d * g,
            a * g - b * h + c * e + d * f,
            a * h + b * g - c * f + d * e,
        )
    }
}

pub fn qmul(p: Quaternion, q: Quaternion) -> Quaternion {
    p * q
}

/// Element of sp(1) ≅ ℝ³, the coefficients of i, j, k.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LieValue {
    pub v: [f64; 3],
}

impl LieValue {
    pub const fn new(a: f64, b: f64, c: f64) -> Self {
        LieValue { v: [a, b, c] }
    }

    pub fn quat(self) -> Quaternion {
        Quaternion::imag(self.v)
    }

    pub fn dot(self, o: Self) -> f64 {
        self.v[0] * o.v[0] + self.v[1] * o.v[1] + self.v[2] * o.v[2]
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn cross(self, o: Self) -> Self {
        let (a, b) = (self.v, o.v);
        LieValue::new(
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        )
    }

    pub fn scale(self, s: f64) -> Self {
        LieValue::new(self.v[0] * s, self.v[1] * s, self.v[2] * s)
    }

    pub fn add(self, o: Self) -> Self {
        LieValue::new(self.v[0] + o.v[0], self.v[1] + o.v[1], self.v[2] + o.v[2])
    }

    pub fn sub(self, o: Self) -> Self {
        self.add(o.scale(-1.0))
    }

    pub fn bracket(self, o: Self) -> Self {
        self.quat().bracket(o.quat()).im()
    }
}

/// Point of S³ ⊂ ℍ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitQuaternion(Quaternion);

impl UnitQuaternion {
    pub const IDENTITY: UnitQuaternion = UnitQuaternion(Quaternion::ONE);

    /// Renormalizes; fails only for zero or non-finite input.
    pub fn new(q: Quaternion) -> Result<Self> {
        let n = q.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::KindViolation(format!("cannot normalize {q:?}")));
        }
        Ok(UnitQuaternion(q.scale(1.0 / n)))
    }

    pub fn new_unchecked(q: Quaternion) -> Self {
        UnitQuaternion(q)
    }

    pub fn quat(self) -> Quaternion {
        self.0
    }

    pub fn inverse(self) -> Self {
        UnitQuaternion(self.0.conj())
    }
}

impl Mul for UnitQuaternion {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        UnitQuaternion(self.0 * o.0).renormalized()
    }
}

impl UnitQuaternion {
    fn renormalized(self) -> Self {
        let n2 = self.0.norm_sq();
        if (n2 - 1.0).abs() > UNIT_TOL {
            UnitQuaternion(self.0.scale(1.0 / n2.sqrt()))
        } else {
            self
        }
    }
}

/// Point of S² ⊂ Im ℍ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImUnit {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
}

impl ImUnit {
    pub fn new(v: [f64; 3]) -> Result<Self> {
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::KindViolation(format!("cannot normalize {v:?}")));
        }
        Ok(ImUnit { x1: v[0] / n, x2: v[1] / n, x3: v[2] / n })
    }

    pub fn from_quat(q: Quaternion) -> Result<Self> {
        ImUnit::new([q.x, q.y, q.z])
    }

    pub const I: ImUnit = ImUnit { x1: 1.0, x2: 0.0, x3: 0.0 };

    pub fn quat(self) -> Quaternion {
        Quaternion::new(0.0, self.x1, self.x2, self.x3)
    }

    pub fn lie(self) -> LieValue {
        LieValue::new(self.x1, self.x2, self.x3)
    }
}

/// Point of S¹, embedded in ℍ as re + im·i.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitComplex {
    pub re: f64,
    pub im: f64,
}

impl UnitComplex {
    pub const ONE: UnitComplex = UnitComplex { re: 1.0, im: 0.0 };

    pub fn from_angle(alpha: f64) -> Self {
        UnitComplex { re: alpha.cos(), im: alpha.sin() }
    }

    pub fn new(re: f64, im: f64) -> Result<Self> {
        let n = re.hypot(im);
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::KindViolation(format!("cannot normalize ({re}, {im})")));
        }
        Ok(UnitComplex { re: re / n, im: im / n })
    }

    /// Angle in [0, 2π).
    pub fn angle(self) -> f64 {
        let a = self.im.atan2(self.re);
        if a < 0.0 {
            a + std::f64::consts::TAU
        } else {
            a
        }
    }

    pub fn quat(self) -> Quaternion {
        Quaternion::new(self.re, self.im, 0.0, 0.0)
    }

    pub fn conj(self) -> Self {
        UnitComplex { re: self.re, im: -self.im }
    }
}

impl Mul for UnitComplex {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        UnitComplex {
            re: self.re * o.re - self.im * o.im,
            im: self.re * o.im + self.im * o.re,
        }
    }
}

/// Exponential sp(1) → S³, cos|v| + (v/|v|) sin|v|.
pub fn qexp(v: LieValue) -> UnitQuaternion {
    UnitQuaternion(exp_im(v.v))
}

/// Raw exponential of an imaginary quaternion given by its coefficients.
#[inline]
pub fn exp_im(v: [f64; 3]) -> Quaternion {
    let t2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    let t = t2.sqrt();
    let (c, s) = if t < 1e-4 {
        (1.0 - t2 / 2.0 + t2 * t2 / 24.0, 1.0 - t2 / 6.0 + t2 * t2 / 120.0)
    } else {
        (t.cos(), t.sin() / t)
    };
    Quaternion::new(c, v[0] * s, v[1] * s, v[2] * s)
}

/// Principal logarithm, inverse of [`qexp`] on |v| < π.
pub fn qlog(q: UnitQuaternion) -> Result<LieValue> {
    let q = q.quat();
    if (q + Quaternion::ONE).norm() < LOG_GUARD {
        return Err(Error::AntipodalLog { guard: LOG_GUARD });
    }
    Ok(log_unit(q))
}

#[inline]
pub(crate) fn log_unit(q: Quaternion) -> LieValue {
    let s = (q.x * q.x + q.y * q.y + q.z * q.z).sqrt();
    let t = s.atan2(q.w);
    let f = if s < 1e-12 { 1.0 / q.w.max(f64::MIN_POSITIVE) } else { t / s };
    LieValue::new(q.x * f, q.y * f, q.z * f)
}

/// Hopf map σ(q) = q⁻¹ i q.
pub fn hopf_sigma(q: UnitQuaternion) -> ImUnit {
    let s = sigma(q.quat());
    ImUnit { x1: s.x, x2: s.y, x3: s.z }
}

#[inline]
pub fn sigma(q: Quaternion) -> Quaternion {
    let s = q.conj() * Quaternion::I * q;
    s.im_part()
}

/// A_q(x) = q x q⁻¹.
pub fn rotate(q: UnitQuaternion, x: LieValue) -> LieValue {
    let q = q.quat();
    (q * x.quat() * q.conj()).im()
}

/// Splits y into ⟨y,x⟩x and ½x[y,x].
pub fn decompose(y: LieValue, x: ImUnit) -> (LieValue, LieValue) {
    let xq = x.quat();
    let parallel = x.lie().scale(y.dot(x.lie()));
    let perp = (xq * y.quat().bracket(xq)).scale(0.5).im();
    (parallel, perp)
}

/// The representative q with q⁻¹ i q = x obtained from the shortest rotation taking i to x.
pub fn sigma_section(x: Quaternion) -> Quaternion {
    // r = (1 - x i)/|.| rotates i onto x via r i r⁻¹; near -i go through j, which maps i to -i
    if x.x < -1.0 + 1e-6 {
        return Quaternion::J * sigma_section(-x);
    }
    let r = Quaternion::ONE - x * Quaternion::I;
    r.conj().scale(1.0 / r.norm())
}

/// 𝔮(x, λ) = q⁻¹ λ q for any q with x = q⁻¹ i q.
pub fn frak_q(x: ImUnit, lam: UnitComplex) -> UnitQuaternion {
    let q = sigma_section(x.quat());
    UnitQuaternion(q.conj() * lam.quat() * q).renormalized()
}

/// Closed form of 𝔮: re(λ) + x·im(λ).
#[inline]
pub fn frak_q_raw(x: Quaternion, re: f64, im: f64) -> Quaternion {
    Quaternion::new(re, x.x * im, x.y * im, x.z * im)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn close(a: Quaternion, b: Quaternion, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    fn arb_quat() -> impl Strategy<Value = Quaternion> {
        prop::array::uniform4(-2.0f64..2.0).prop_map(Quaternion::from_array)
    }

    fn arb_unit() -> impl Strategy<Value = Quaternion> {
        arb_quat().prop_filter("nonzero", |q| q.norm() > 1e-3).prop_map(|q| q.normalized())
    }

    fn arb_im_unit() -> impl Strategy<Value = ImUnit> {
        prop::array::uniform3(-1.0f64..1.0)
            .prop_filter("nonzero", |v| v.iter().map(|c| c * c).sum::<f64>() > 1e-4)
            .prop_map(|v| ImUnit::new(v).unwrap())
    }

    #[test]
    fn products() {
        let (i, j, k) = (Quaternion::I, Quaternion::J, Quaternion::K);
        assert_eq!(i * j, k);
        assert_eq!(i * i, Quaternion::real(-1.0));
        assert_eq!(i * j * k, Quaternion::real(-1.0));
        let q = Quaternion::new(0.3, -1.0, 2.0, 0.5);
        assert_eq!(Quaternion::ONE * q, q);
        let p = (Quaternion::ONE + i) * (Quaternion::ONE + j);
        assert_eq!(p, Quaternion::new(1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn exp_log() {
        assert_eq!(qexp(LieValue::default()).quat(), Quaternion::ONE);
        let q = qexp(LieValue::new(FRAC_PI_2, 0.0, 0.0)).quat();
        assert!(close(q, Quaternion::I, 1e-15));
        let dir = ImUnit::new([0.3, -0.7, 0.2]).unwrap().lie();
        let v = dir.scale(1.3);
        let back = qlog(qexp(v)).unwrap();
        assert!(back.sub(v).norm() < 1e-13);
        assert!(matches!(
            qlog(UnitQuaternion::new(Quaternion::real(-1.0)).unwrap()),
            Err(Error::AntipodalLog { .. })
        ));
    }

    #[test]
    fn sigma_examples() {
        assert_eq!(hopf_sigma(UnitQuaternion::IDENTITY).quat(), Quaternion::I);
        let s = hopf_sigma(UnitQuaternion::new(Quaternion::J).unwrap()).quat();
        assert!(close(s, -Quaternion::I, 1e-15));
        let q = UnitQuaternion::new(Quaternion::new(0.2, 0.4, -0.5, 0.7)).unwrap();
        let lam = UnitQuaternion::new(UnitComplex::from_angle(0.7).quat()).unwrap();
        assert!(close(hopf_sigma(lam * q).quat(), hopf_sigma(q).quat(), 1e-14));
    }

    #[test]
    fn rotate_examples() {
        let x = LieValue::new(0.4, 0.1, -2.0);
        assert_eq!(rotate(UnitQuaternion::IDENTITY, x), x);
        let q = qexp(LieValue::new(0.0, 0.0, FRAC_PI_4));
        let r = rotate(q, LieValue::new(1.0, 0.0, 0.0));
        assert!(r.sub(LieValue::new(0.0, 1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn decompose_examples() {
        let i = ImUnit::I;
        let (p, q) = decompose(LieValue::new(1.0, 0.0, 0.0), i);
        assert_eq!((p, q), (LieValue::new(1.0, 0.0, 0.0), LieValue::default()));
        let (p, q) = decompose(LieValue::new(0.0, 1.0, 0.0), i);
        assert_eq!((p, q), (LieValue::default(), LieValue::new(0.0, 1.0, 0.0)));
        let (p, q) = decompose(LieValue::new(1.0, 2.0, 0.0), i);
        assert_eq!((p, q), (LieValue::new(1.0, 0.0, 0.0), LieValue::new(0.0, 2.0, 0.0)));
    }

    #[test]
    fn frak_examples() {
        let x = ImUnit::new([0.3, 0.5, -0.8]).unwrap();
        assert!(close(frak_q(x, UnitComplex::ONE).quat(), Quaternion::ONE, 1e-15));
        let lam = UnitComplex::from_angle(1.1);
        assert!(close(frak_q(ImUnit::I, lam).quat(), lam.quat(), 1e-15));
        let minus_i = ImUnit::new([-1.0, 0.0, 0.0]).unwrap();
        let got = frak_q(minus_i, UnitComplex::from_angle(0.4)).quat();
        assert!(close(got, UnitComplex::from_angle(-0.4).quat(), 1e-15));
    }

    #[test]
    fn section_lifts() {
        for v in [[0.0, 1.0, 0.0], [-1.0, 1e-12, 0.0], [0.6, 0.0, 0.8], [-0.99, 0.1, 0.0]] {
            let x = ImUnit::new(v).unwrap().quat();
            let q = sigma_section(x);
            assert!(close(sigma(q), x, 1e-12), "{v:?}");
        }
    }

    proptest! {
        #[test]
        fn conj_reverses(p in arb_quat(), q in arb_quat()) {
            prop_assert!(close((p * q).conj(), q.conj() * p.conj(), 1e-12));
            prop_assert!(((p * q).norm() - p.norm() * q.norm()).abs() < 1e-12);
        }

        #[test]
        fn adjoint_invariance(q in arb_unit(), a in prop::array::uniform3(-1.0f64..1.0), b in prop::array::uniform3(-1.0f64..1.0)) {
            let u = UnitQuaternion::new(q).unwrap();
            let (x, y) = (LieValue { v: a }, LieValue { v: b });
            prop_assert!((rotate(u, x).dot(rotate(u, y)) - x.dot(y)).abs() < 1e-12);
            prop_assert!((rotate(u, x).norm() - x.norm()).abs() < 1e-12);
        }

        #[test]
        fn sigma_squares_to_minus_one(q in arb_unit()) {
            let s = hopf_sigma(UnitQuaternion::new(q).unwrap()).quat();
            prop_assert!(close(s * s, Quaternion::real(-1.0), 1e-12));
        }

        #[test]
        fn decompose_reconstructs(y in prop::array::uniform3(-3.0f64..3.0), x in arb_im_unit()) {
            let y = LieValue { v: y };
            let (p, q) = decompose(y, x);
            prop_assert!(p.add(q).sub(y).norm() < 1e-12);
            prop_assert!(q.dot(x.lie()).abs() < 1e-12);
        }

        #[test]
        fn frak_is_homomorphism(x in arb_im_unit(), a in -7.0f64..7.0, b in -7.0f64..7.0) {
            let (la, lb) = (UnitComplex::from_angle(a), UnitComplex::from_angle(b));
            let lhs = frak_q(x, la * lb).quat();
            let rhs = frak_q(x, la).quat() * frak_q(x, lb).quat();
            prop_assert!(close(lhs, rhs, 1e-12));
            prop_assert!(close(lhs, frak_q_raw(x.quat(), (a + b).cos(), (a + b).sin()), 1e-12));
            let c = frak_q(x, la).quat();
            prop_assert!(close(c * x.quat(), x.quat() * c, 1e-12));
        }

        #[test]
        fn exp_log_round_trip(v in prop::array::uniform3(-1.7f64..1.7)) {
            let v = LieValue { v };
            prop_assume!(v.norm() < 3.0);
            prop_assert!(qlog(qexp(v)).unwrap().sub(v).norm() < 1e-10);
        }
    }
}
