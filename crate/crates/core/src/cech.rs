//! Čech description of the primary class on the torus: cover, transition angles, integer cocycle.

use std::collections::{HashMap, VecDeque};
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::elliptic::CubeChart;
use crate::error::{Error, Result};
use crate::forms::{self, pullback_area_values};
use crate::grid::{Field, Kind, Lattice3};
use crate::lift::{self, fiber_project, ChartInputs, LiftResult};
use crate::quat::{sigma_section, Quaternion};

pub const ARCS: usize = 3;
pub const CHARTS: usize = ARCS * ARCS * ARCS;
pub const INTEGRALITY_TOL: f64 = 0.25;
pub const UNWRAP_TOL: f64 = 1e-3;
/// Orientation of the nerve 2-tori relative to the coordinate 2-tori.
const COCYCLE_SIGN: i64 = 1;

/// Chart index from per-axis arc indices.
#[inline]
pub fn chart_index(k: [usize; 3]) -> usize {
    k[0] + ARCS * (k[1] + ARCS * k[2])
}

#[inline]
pub fn arc_indices(p: usize) -> [usize; 3] {
    [p % ARCS, (p / ARCS) % ARCS, p / (ARCS * ARCS)]
}

/// Overlapping cube cover of the torus: three arcs per axis, 27 boxes.
#[derive(Clone, Debug)]
pub struct ChartCover {
    pub lattice: Lattice3,
    pub charts: Vec<CubeChart>,
    pub pairs: Vec<(usize, usize)>,
    pub triples: Vec<(usize, usize, usize)>,
    pub quads: Vec<[usize; 4]>,
}

/// Per-axis arc (start, length) of arc `k` on a circle of `n` vertices.
pub fn arc(n: usize, k: usize) -> (isize, usize) {
    let w = ((n as f64 / 12.0).round() as usize).max(1);
    let a = (k * n / ARCS) as isize;
    let b = ((k + 1) * n / ARCS) as isize;
    (a - w as isize, (b - a) as usize + 2 * w + 1)
}

/// Intersection of cyclic arcs as a single (start, length), if nonempty.
fn arc_intersection(n: usize, arcs: &[(isize, usize)]) -> Result<Option<(isize, usize)>> {
    let inside = |g: usize| arcs.iter().all(|&(lo, len)| ((g as isize - lo).rem_euclid(n as isize) as usize) < len);
    let members: Vec<usize> = (0..n).filter(|&g| inside(g)).collect();
    if members.is_empty() {
        return Ok(None);
    }
    if members.len() == n {
        return Ok(Some((0, n)));
    }
    let start = *members.iter().find(|&&g| !inside((g + n - 1) % n)).unwrap();
    let mut len = 0;
    while len < n && inside((start + len) % n) {
        len += 1;
    }
    if len != members.len() {
        return Err(Error::Domain("cover overlap is not connected".into()));
    }
    Ok(Some((start as isize, len)))
}

impl ChartCover {
    /// The box U_{p₀…p_k}, if nonempty.
    pub fn overlap(&self, ps: &[usize]) -> Result<Option<CubeChart>> {
        let mut lo = [0isize; 3];
        let mut len = [0usize; 3];
        for d in 0..3 {
            let n = self.lattice.dims[d];
            let arcs: Vec<(isize, usize)> = ps.iter().map(|&p| arc(n, arc_indices(p)[d])).collect();
            match arc_intersection(n, &arcs)? {
                None => return Ok(None),
                Some((l, m)) => {
                    lo[d] = l;
                    len[d] = m;
                }
            }
        }
        if len.iter().any(|&m| m < 3) {
            return Err(Error::BadDims("overlap thinner than three vertices".into()));
        }
        Ok(Some(CubeChart::new(self.lattice, lo, len)?))
    }

    pub fn chart_of_arcs(&self, k: [usize; 3]) -> &CubeChart {
        &self.charts[chart_index(k)]
    }
}

pub fn standard_cover(lattice: Lattice3) -> Result<ChartCover> {
    if !lattice.is_torus() {
        return Err(Error::Domain("the standard cover needs a torus".into()));
    }
    if lattice.dims.iter().any(|&n| n < 12) {
        return Err(Error::BadDims("the standard cover needs at least 12 vertices per axis".into()));
    }
    let charts = (0..CHARTS)
        .map(|p| {
            let k = arc_indices(p);
            let a = [0, 1, 2].map(|d| arc(lattice.dims[d], k[d]));
            CubeChart::new(lattice, a.map(|x| x.0), a.map(|x| x.1))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut cover = ChartCover { lattice, charts, pairs: vec![], triples: vec![], quads: vec![] };
    // a set of charts meets iff every axis uses at most two arcs
    let meets = |ps: &[usize]| {
        (0..3).all(|d| {
            let mut seen = [false; ARCS];
            ps.iter().for_each(|&p| seen[arc_indices(p)[d]] = true);
            seen.iter().filter(|&&s| s).count() <= 2
        })
    };
    for p in 0..CHARTS {
        for q in p + 1..CHARTS {
            cover.pairs.push((p, q));
            for r in q + 1..CHARTS {
                if meets(&[p, q, r]) {
                    cover.triples.push((p, q, r));
                    for s in r + 1..CHARTS {
                        if meets(&[p, q, r, s]) {
                            cover.quads.push([p, q, r, s]);
                        }
                    }
                }
            }
        }
    }
    Ok(cover)
}

/// Angle field θ_pq on U_pq (p < q), λ_pq = e^{2πiθ_pq}.
#[derive(Clone, Debug)]
pub struct OverlapAngles {
    pub region: CubeChart,
    pub theta: Vec<f64>,
}

impl OverlapAngles {
    #[inline]
    fn at(&self, g: [usize; 3]) -> f64 {
        let c = [0, 1, 2].map(|d| self.region.local_axis(d, g[d]).expect("vertex in overlap"));
        self.theta[self.region.mesh().idx(c[0], c[1], c[2])]
    }
}

#[derive(Clone, Debug)]
pub struct CechData {
    pub cover: ChartCover,
    /// Chart lifts projected onto the fibres of φ (exact lifts).
    pub lifts: Vec<LiftResult>,
    pub angles: HashMap<(usize, usize), OverlapAngles>,
    /// Largest j,k part of u_p u_q⁻¹ before projection.
    pub circle_deviation: f64,
    /// Largest |integer part| of a non-tree unwrap cycle.
    pub unwrap_defect: f64,
    pub max_conjugation_residual: f64,
    pub max_flatness: f64,
}

impl CechData {
    /// θ_pq at a global vertex, with θ_qp = −θ_pq and θ_pp = 0.
    pub fn theta(&self, p: usize, q: usize, g: [usize; 3]) -> f64 {
        match p.cmp(&q) {
            std::cmp::Ordering::Equal => 0.0,
            std::cmp::Ordering::Less => self.angles[&(p, q)].at(g),
            std::cmp::Ordering::Greater => -self.angles[&(q, p)].at(g),
        }
    }

    /// Lift of chart p at a global vertex inside it.
    pub fn lift_at(&self, p: usize, g: [usize; 3]) -> Quaternion {
        let ch = &self.cover.charts[p];
        let c = [0, 1, 2].map(|d| ch.local_axis(d, g[d]).expect("vertex in chart"));
        self.lifts[p].u[ch.mesh().idx(c[0], c[1], c[2])]
    }
}

/// Replaces a near-lift by the nearest point on the fibre over φ at each vertex.
fn project_to_fibres(u: &mut [Quaternion], phi: &[Quaternion]) {
    u.par_iter_mut().zip(phi.par_iter()).for_each(|(q, &p)| {
        let s = sigma_section(p);
        *q = fiber_project(*q * s.conj()).quat() * s;
    });
}

#[inline]
fn wrap_half(x: f64) -> f64 {
    // into (−½, ½]
    let r = x - x.round();
    if r <= -0.5 {
        r + 1.0
    } else {
        r
    }
}

/// Unwraps raw angles (in turns) over a box by breadth-first search from its first vertex.
fn unwrap_box(region: &CubeChart, raw: &[f64]) -> (Vec<f64>, f64) {
    let m = region.mesh();
    let mut out = vec![f64::NAN; m.len()];
    let mut tree_parent = vec![usize::MAX; m.len()];
    out[0] = wrap_half(raw[0]);
    let mut queue = VecDeque::from([0usize]);
    while let Some(n) = queue.pop_front() {
        let c = m.coords(n);
        for d in 0..3 {
            for s in [1isize, -1] {
                if let Some(nn) = m.offset(c, d, s) {
                    if out[nn].is_nan() {
                        out[nn] = out[n] + wrap_half(raw[nn] - raw[n]);
                        tree_parent[nn] = n;
                        queue.push_back(nn);
                    }
                }
            }
        }
    }
    let mut defect = 0.0f64;
    for n in 0..m.len() {
        let c = m.coords(n);
        for d in 0..3 {
            if let Some(nn) = m.offset(c, d, 1) {
                if tree_parent[nn] == n || tree_parent[n] == nn {
                    continue;
                }
                let cyc = out[nn] - out[n] - wrap_half(raw[nn] - raw[n]);
                defect = defect.max(cyc.abs());
            }
        }
    }
    (out, defect)
}

/// Chart lifts and unwrapped transition angles for a torus field.
pub fn transition_angles(phi: &Field, cover: &ChartCover) -> Result<CechData> {
    forms::expect_kind(phi, Kind::S2)?;
    if phi.lattice != cover.lattice {
        return Err(Error::BadDims("cover and field lattices differ".into()));
    }
    let inp = ChartInputs::new(phi);
    let mut lifts = cover
        .charts
        .par_iter()
        .map(|ch| lift::lift_chart_with(phi, ch, &inp))
        .collect::<Result<Vec<_>>>()?;
    let max_conjugation_residual = lifts.iter().map(|l| l.conjugation_residual).fold(0.0, f64::max);
    let max_flatness = lifts.iter().map(|l| l.flatness).fold(0.0, f64::max);
    let raw_lifts: Vec<Vec<Quaternion>> = lifts.iter().map(|l| l.u.clone()).collect();
    for (l, ch) in lifts.iter_mut().zip(&cover.charts) {
        project_to_fibres(&mut l.u, &ch.gather(&phi.values));
        l.conjugation_residual = forms::conjugation_residual(&l.u, &ch.gather(&phi.values));
    }
    let gm = cover.lattice.mesh();
    let local = |ch: &CubeChart, g: [usize; 3]| {
        let c = [0, 1, 2].map(|d| ch.local_axis(d, g[d]).unwrap());
        ch.mesh().idx(c[0], c[1], c[2])
    };
    let per_pair = cover
        .pairs
        .par_iter()
        .map(|&(p, q)| -> Result<((usize, usize), OverlapAngles, f64, f64)> {
            let region = cover.overlap(&[p, q])?.expect("all pairs meet");
            let rm = region.mesh();
            let (cp, cq) = (&cover.charts[p], &cover.charts[q]);
            let mut dev = 0.0f64;
            let raw: Vec<f64> = (0..rm.len())
                .map(|n| {
                    let lc = rm.coords(n);
                    let g = gm.coords(region.global(lc));
                    let (ip, iq) = (local(cp, g), local(cq, g));
                    let l0 = raw_lifts[p][ip] * raw_lifts[q][iq].conj();
                    dev = dev.max(l0.y.hypot(l0.z));
                    let l = lifts[p].u[ip] * lifts[q].u[iq].conj();
                    l.x.atan2(l.w) / (2.0 * PI)
                })
                .collect();
            let (theta, defect) = unwrap_box(&region, &raw);
            Ok(((p, q), OverlapAngles { region, theta }, dev, defect))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut angles = HashMap::new();
    let (mut circle_deviation, mut unwrap_defect) = (0.0f64, 0.0f64);
    for (k, a, dev, defect) in per_pair {
        circle_deviation = circle_deviation.max(dev);
        unwrap_defect = unwrap_defect.max(defect);
        angles.insert(k, a);
    }
    if (unwrap_defect - unwrap_defect.round()).abs() > UNWRAP_TOL {
        return Err(Error::UnwrapInconsistent { defect: unwrap_defect });
    }
    Ok(CechData {
        cover: cover.clone(),
        lifts,
        angles,
        circle_deviation,
        unwrap_defect,
        max_conjugation_residual,
        max_flatness,
    })
}

/// Snapped integer cocycle n_pqr on the nonempty triples (p < q < r).
#[derive(Clone, Debug, Serialize)]
pub struct Cocycle {
    pub values: Vec<((usize, usize, usize), i64)>,
    pub integrality_gap: f64,
    pub constancy_gap: f64,
    /// max |n_qrs − n_prs + n_pqs − n_pqr| over quadruple overlaps.
    pub closure_defect: i64,
}

impl Cocycle {
    pub fn map(&self) -> HashMap<(usize, usize, usize), i64> {
        self.values.iter().cloned().collect()
    }
}

/// Value of a cochain on an arbitrarily ordered triple.
pub fn oriented(map: &HashMap<(usize, usize, usize), i64>, t: [usize; 3]) -> i64 {
    let mut s = t;
    let mut sign = 1;
    for i in 0..3 {
        for j in 0..2 - i {
            if s[j] > s[j + 1] {
                s.swap(j, j + 1);
                sign = -sign;
            }
        }
    }
    if s[0] == s[1] || s[1] == s[2] {
        return 0;
    }
    sign * map.get(&(s[0], s[1], s[2])).copied().unwrap_or(0)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn closure_defect(cover: &ChartCover, map: &HashMap<(usize, usize, usize), i64>) -> i64 {
    cover
        .quads
        .iter()
        .map(|&[p, q, r, s]| {
            (oriented(map, [q, r, s]) - oriented(map, [p, r, s]) + oriented(map, [p, q, s]) - oriented(map, [p, q, r]))
                .abs()
        })
        .max()
        .unwrap_or(0)
}

pub fn cocycle(cech: &CechData) -> Result<Cocycle> {
    let gm = cech.cover.lattice.mesh();
    let per = cech
        .cover
        .triples
        .par_iter()
        .map(|&(p, q, r)| -> Result<((usize, usize, usize), i64, f64, f64)> {
            let region = cech.cover.overlap(&[p, q, r])?.expect("listed triple meets");
            let rm = region.mesh();
            let mut vals: Vec<f64> = (0..rm.len())
                .map(|n| {
                    let g = gm.coords(region.global(rm.coords(n)));
                    cech.theta(q, r, g) + cech.theta(r, p, g) + cech.theta(p, q, g)
                })
                .collect();
            let gap = vals.iter().map(|v| (v - v.round()).abs()).fold(0.0, f64::max);
            let lo = vals.iter().map(|v| v.round()).fold(f64::MAX, f64::min);
            let hi = vals.iter().map(|v| v.round()).fold(f64::MIN, f64::max);
            let snapped = median(&mut vals).round() as i64;
            Ok(((p, q, r), snapped, gap, hi - lo))
        })
        .collect::<Result<Vec<_>>>()?;
    let integrality_gap = per.iter().map(|x| x.2).fold(0.0, f64::max);
    let constancy_gap = per.iter().map(|x| x.3).fold(0.0, f64::max);
    if integrality_gap >= INTEGRALITY_TOL {
        return Err(Error::IntegralityFailure { gap: integrality_gap });
    }
    let values: Vec<_> = per.into_iter().map(|x| (x.0, x.1)).collect();
    let map: HashMap<_, _> = values.iter().cloned().collect();
    Ok(Cocycle { closure_defect: closure_defect(&cech.cover, &map), values, integrality_gap, constancy_gap })
}

/// Pairs the cocycle with the nerve 2-torus transverse to each axis.
pub fn class_from_cocycle(n: &Cocycle) -> [i64; 3] {
    let map = n.map();
    let mut out = [0i64; 3];
    for d in 0..3 {
        let (a1, a2) = ((d + 1) % 3, (d + 2) % 3);
        let chart = |a: usize, b: usize| {
            let mut k = [0usize; 3];
            k[a1] = a % ARCS;
            k[a2] = b % ARCS;
            chart_index(k)
        };
        let mut sum = 0;
        for a in 0..ARCS {
            for b in 0..ARCS {
                let (v00, v10, v11, v01) = (chart(a, b), chart(a + 1, b), chart(a + 1, b + 1), chart(a, b + 1));
                sum += oriented(&map, [v00, v10, v11]) + oriented(&map, [v00, v11, v01]);
            }
        }
        out[d] = COCYCLE_SIGN * sum;
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct PrimaryClass {
    pub class: [i64; 3],
    /// Slice-averaged periods before snapping.
    pub raw: [f64; 3],
    /// Largest distance of any single-slice period from its snapped value.
    pub gap: f64,
    /// Slice-averaged periods from the central-difference pullback, for comparison.
    pub stencil_raw: [f64; 3],
}

/// Primary class of a torus field as integer periods over the coordinate 2-tori.
pub fn primary_class(phi: &Field) -> Result<PrimaryClass> {
    forms::expect_kind(phi, Kind::S2)?;
    let Some(periods) = phi.lattice.periods() else {
        return Err(Error::Domain("primary class periods need a torus".into()));
    };
    let m = phi.mesh();
    let mut raw = [0.0; 3];
    let mut gap = 0.0f64;
    let mut class = [0i64; 3];
    for d in 0..3 {
        let s = forms::slice_periods(phi, d);
        raw[d] = s.iter().sum::<f64>() / s.len() as f64;
        class[d] = raw[d].round() as i64;
        gap = gap.max(s.iter().map(|v| (v - class[d] as f64).abs()).fold(0.0, f64::max));
    }
    let (area, _) = pullback_area_values(&m, &phi.values);
    let stencil_raw = [0, 1, 2].map(|d| {
        let mean = forms::pairwise_sum(&area.comps[d].iter().map(|q| q.w).collect::<Vec<_>>()) / m.len() as f64;
        mean * periods[(d + 1) % 3] * periods[(d + 2) % 3]
    });
    if gap >= INTEGRALITY_TOL {
        return Err(Error::IntegralityFailure { gap });
    }
    Ok(PrimaryClass { class, raw, gap, stencil_raw })
}

/// m = gcd(|m₁|, |m₂|, |m₃|), with gcd(0,0,0) = 0.
pub fn divisibility(class: [i64; 3]) -> i64 {
    fn gcd(a: i64, b: i64) -> i64 {
        if b == 0 {
            a.abs()
        } else {
            gcd(b, a % b)
        }
    }
    gcd(gcd(class[0], class[1]), class[2])
}

/// Coboundary (δγ)_pqr = γ_qr − γ_pr + γ_pq of a 1-cochain on the cover's pairs.
pub fn coboundary(cover: &ChartCover, gamma: &HashMap<(usize, usize), i64>) -> HashMap<(usize, usize, usize), i64> {
    let g = |a: usize, b: usize| gamma.get(&(a, b)).copied().unwrap_or(0);
    cover.triples.iter().map(|&(p, q, r)| ((p, q, r), g(q, r) - g(p, r) + g(p, q))).collect()
}

fn overflow() -> Error {
    Error::Invalid("integer overflow in cocycle elimination".into())
}

/// Integer 1-cochain γ with n − m = δγ, or ClassMismatch when none exists.
pub fn equalize_cocycles(cover: &ChartCover, n: &Cocycle, m: &Cocycle) -> Result<HashMap<(usize, usize), i64>> {
    let (nm, mm) = (n.map(), m.map());
    let cols: HashMap<(usize, usize), usize> = cover.pairs.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    let nc = cols.len();
    let nr = cover.triples.len();
    let mut a = vec![vec![0i64; nc]; nr];
    let mut b = vec![0i64; nr];
    for (row, &(p, q, r)) in cover.triples.iter().enumerate() {
        a[row][cols[&(q, r)]] += 1;
        a[row][cols[&(p, r)]] -= 1;
        a[row][cols[&(p, q)]] += 1;
        b[row] = nm.get(&(p, q, r)).copied().unwrap_or(0) - mm.get(&(p, q, r)).copied().unwrap_or(0);
    }
    // diagonalise by unimodular row and column operations: U A V = D
    let mut v: Vec<Vec<i64>> = (0..nc).map(|i| (0..nc).map(|j| i64::from(i == j)).collect()).collect();
    let mut diag = Vec::new();
    let mut t = 0;
    while t < nr.min(nc) {
        // smallest nonzero entry in the remaining block
        let mut best: Option<(usize, usize, i64)> = None;
        for (i, row) in a.iter().enumerate().skip(t) {
            for (j, &x) in row.iter().enumerate().skip(t) {
                if x != 0 && best.is_none_or(|(_, _, bx)| x.abs() < bx) {
                    best = Some((i, j, x.abs()));
                    if x.abs() == 1 {
                        break;
                    }
                }
            }
            if matches!(best, Some((_, _, 1))) {
                break;
            }
        }
        let Some((pi, pj, _)) = best else { break };
        a.swap(t, pi);
        b.swap(t, pi);
        if pj != t {
            for row in a.iter_mut() {
                row.swap(t, pj);
            }
            for row in v.iter_mut() {
                row.swap(t, pj);
            }
        }
        let piv = a[t][t];
        let mut clean = true;
        for i in t + 1..nr {
            if a[i][t] == 0 {
                continue;
            }
            let f = a[i][t] / piv;
            for j in t..nc {
                a[i][j] = a[i][j].checked_sub(f.checked_mul(a[t][j]).ok_or_else(overflow)?).ok_or_else(overflow)?;
            }
            b[i] = b[i].checked_sub(f.checked_mul(b[t]).ok_or_else(overflow)?).ok_or_else(overflow)?;
            clean &= a[i][t] == 0;
        }
        for j in t + 1..nc {
            if a[t][j] == 0 {
                continue;
            }
            let f = a[t][j] / piv;
            for i in t..nr {
                a[i][j] = a[i][j].checked_sub(f.checked_mul(a[i][t]).ok_or_else(overflow)?).ok_or_else(overflow)?;
            }
            for row in v.iter_mut() {
                row[j] = row[j].checked_sub(f.checked_mul(row[t]).ok_or_else(overflow)?).ok_or_else(overflow)?;
            }
            clean &= a[t][j] == 0;
        }
        if clean {
            diag.push(piv);
            t += 1;
        }
        // otherwise a smaller remainder now exists; pick it as the next pivot
    }
    let rank = diag.len();
    if b[rank..].iter().any(|&x| x != 0) {
        return Err(Error::ClassMismatch("cocycles differ by a non-coboundary".into()));
    }
    let mut y = vec![0i64; nc];
    for i in 0..rank {
        if b[i] % diag[i] != 0 {
            return Err(Error::ClassMismatch("cocycles differ by a non-coboundary".into()));
        }
        y[i] = b[i] / diag[i];
    }
    let gamma = cover
        .pairs
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let s = (0..nc).try_fold(0i64, |acc, j| acc.checked_add(v[i][j].checked_mul(y[j])?));
            s.map(|s| (p, s)).ok_or_else(overflow)
        })
        .collect::<Result<HashMap<_, _>>>()?;
    Ok(gamma)
}

/// Period route and cocycle route together.
#[derive(Clone, Debug, Serialize)]
pub struct CechReport {
    pub class: PrimaryClass,
    pub cocycle_class: [i64; 3],
    pub routes_agree: bool,
    pub divisibility: i64,
    pub cocycle: Cocycle,
    pub circle_deviation: f64,
    pub unwrap_defect: f64,
    pub max_conjugation_residual: f64,
    pub max_flatness: f64,
}

pub fn cech_report(phi: &Field) -> Result<(CechReport, CechData)> {
    let class = primary_class(phi)?;
    let cover = standard_cover(phi.lattice)?;
    let data = transition_angles(phi, &cover)?;
    let n = cocycle(&data)?;
    let cocycle_class = class_from_cocycle(&n);
    Ok((
        CechReport {
            routes_agree: cocycle_class == class.class,
            divisibility: divisibility(class.class),
            cocycle_class,
            class,
            cocycle: n,
            circle_deviation: data.circle_deviation,
            unwrap_defect: data.unwrap_defect,
            max_conjugation_residual: data.max_conjugation_residual,
            max_flatness: data.max_flatness,
        },
        data,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genmaps::{gen_p, gen_t3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cover_structure() {
        let lat = Lattice3::torus(32, 1.0).unwrap();
        let cover = standard_cover(lat).unwrap();
        assert_eq!(cover.charts.len(), 27);
        assert_eq!(cover.pairs.len(), 351);
        let m = lat.mesh();
        for n in 0..m.len() {
            let g = m.coords(n);
            assert!(cover.charts.iter().any(|c| c.contains(g)));
        }
        for &(p, q) in &cover.pairs {
            let o = cover.overlap(&[p, q]).unwrap().unwrap();
            assert!(o.len.iter().all(|&l| l >= 3));
        }
        for &(p, q, r) in &cover.triples {
            let o = cover.overlap(&[p, q, r]).unwrap().unwrap();
            // the box contains its center vertex, so it is star-shaped about it
            let mid = [0, 1, 2].map(|d| o.global_axis(d, o.len[d] / 2));
            assert!([p, q, r].iter().all(|&c| cover.charts[c].contains(mid)));
        }
        assert!(standard_cover(Lattice3::cube(32, 1.0).unwrap()).is_err());
    }

    #[test]
    fn divisibility_examples() {
        assert_eq!(divisibility([0, 0, 0]), 0);
        assert_eq!(divisibility([-2, -4, 5]), 1);
        assert_eq!(divisibility([2, 4, 6]), 2);
    }

    #[test]
    fn constant_field_has_zero_cocycle() {
        let lat = Lattice3::torus(16, 1.0).unwrap();
        let phi = Field::constant(lat, Kind::S2, Quaternion::I).unwrap();
        let (rep, data) = cech_report(&phi).unwrap();
        assert_eq!(rep.class.class, [0, 0, 0]);
        assert!(rep.cocycle.values.iter().all(|x| x.1 == 0));
        assert!(data.angles.values().all(|a| a.theta.iter().all(|&t| t == 0.0)));
    }

    #[test]
    fn generator_classes_both_routes() {
        let lat = Lattice3::torus(24, 1.0).unwrap();
        for m in [[1, 0, 0], [2, 3, 0], [0, -1, 1]] {
            let phi = gen_p(m, lat).unwrap();
            let (rep, _) = cech_report(&phi).unwrap();
            assert_eq!(rep.class.class, m);
            assert!(rep.class.gap < 0.05);
            assert_eq!(rep.cocycle_class, m, "{m:?}");
            assert_eq!(rep.cocycle.closure_defect, 0);
            assert!(rep.cocycle.integrality_gap < 1e-9);
        }
    }

    #[test]
    fn matrix_example_class() {
        let phi = gen_t3([[3, 1, 2], [-5, 0, -2]], Lattice3::torus(32, 1.0).unwrap()).unwrap();
        let c = primary_class(&phi).unwrap();
        assert_eq!(c.class, [-2, -4, 5]);
        assert_eq!(divisibility(c.class), 1);
    }

    #[test]
    fn corrupted_angles_fail_integrality() {
        let lat = Lattice3::torus(16, 1.0).unwrap();
        let phi = gen_p([1, 0, 0], lat).unwrap();
        let cover = standard_cover(lat).unwrap();
        let mut data = transition_angles(&phi, &cover).unwrap();
        data.angles.get_mut(&(0, 1)).unwrap().theta.iter_mut().for_each(|t| *t += 0.5);
        assert!(matches!(cocycle(&data), Err(Error::IntegralityFailure { .. })));
    }

    #[test]
    fn equalize_recovers_coboundaries() {
        let lat = Lattice3::torus(16, 1.0).unwrap();
        let cover = standard_cover(lat).unwrap();
        let phi = gen_p([1, 0, 0], lat).unwrap();
        let n = cocycle(&transition_angles(&phi, &cover).unwrap()).unwrap();
        assert!(equalize_cocycles(&cover, &n, &n).unwrap().values().all(|&g| g == 0));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g0: HashMap<_, _> = cover.pairs.iter().map(|&p| (p, rng.random_range(-3..=3))).collect();
        let dg = coboundary(&cover, &g0);
        let shifted = Cocycle {
            values: n.values.iter().map(|&(t, v)| (t, v + dg[&t])).collect(),
            ..n.clone()
        };
        let g = equalize_cocycles(&cover, &shifted, &n).unwrap();
        assert_eq!(coboundary(&cover, &g), dg);
        let zero = Cocycle { values: n.values.iter().map(|&(t, _)| (t, 0)).collect(), ..n.clone() };
        assert!(matches!(equalize_cocycles(&cover, &n, &zero), Err(Error::ClassMismatch(_))));
    }
}
