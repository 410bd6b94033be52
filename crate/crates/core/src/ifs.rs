//! Similitudes, IFS validation, cylinder algebra, Moran dimension and the
//! certified separation gap.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Rotation, RotationProduct, Vector};

/// Relative inflation applied to every cylinder cover radius.
pub(crate) const COVER_INFLATION: f64 = 1e-12;

/// `x ↦ ratio · rot(x) + shift`
#[derive(Clone, Debug, PartialEq)]
pub struct Similitude {
    ratio: f64,
    rot: Rotation,
    shift: Vector,
}

impl Similitude {
    pub fn new(ratio: f64, rot: Rotation, shift: Vector) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::NotAContraction { ratio });
        }
        if rot.dim() != shift.dim() {
            return Err(Error::DimensionMismatch {
                expected: shift.dim(),
                found: rot.dim(),
            });
        }
        Ok(Similitude { ratio, rot, shift })
    }

    /// Similitude without rotation.
    pub fn scaling(ratio: f64, shift: Vec<f64>) -> Result<Self> {
        let dim = shift.len();
        Similitude::new(ratio, Rotation::identity(dim), Vector::new(shift))
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn rot(&self) -> &Rotation {
        &self.rot
    }

    pub fn shift(&self) -> &Vector {
        &self.shift
    }

    pub fn dim(&self) -> usize {
        self.shift.dim()
    }

    pub fn apply(&self, x: &Vector) -> Vector {
        self.rot.apply(x).scaled(self.ratio).axpy(1.0, &self.shift)
    }

    pub fn apply_inverse(&self, y: &Vector) -> Vector {
        self.rot.apply_transpose(&(y - &self.shift)).scaled(1.0 / self.ratio)
    }

    pub fn as_cylinder_map(&self) -> CylinderMap {
        CylinderMap {
            scale: self.ratio,
            rot: self.rot.clone(),
            shift: self.shift.clone(),
        }
    }

    pub fn fixed_point(&self) -> Vector {
        self.as_cylinder_map().fixed_point()
    }
}

/// Finite word over the alphabet `{0, …, m−1}`.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Word(Vec<u8>);

impl Word {
    pub fn new(digits: Vec<u8>) -> Self {
        Word(digits)
    }

    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn digits(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, digit: u8) {
        self.0.push(digit);
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut digits = self.0.clone();
        digits.extend_from_slice(&other.0);
        Word(digits)
    }

    /// Parses base-36 digit characters (`0-9a-z`).
    pub fn parse(text: &str) -> Result<Self> {
        text.chars()
            .map(|c| {
                c.to_digit(36)
                    .map(|d| d as u8)
                    .ok_or_else(|| Error::CodingSyntax(format!("bad digit {c:?} in {text:?}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Word)
    }

    pub fn check_alphabet(&self, maps: usize) -> Result<()> {
        match self.0.iter().find(|&&d| d as usize >= maps) {
            Some(&d) => Err(Error::DigitOutOfRange {
                digit: d as usize,
                maps,
            }),
            None => Ok(()),
        }
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.0 {
            let c = std::char::from_digit(*d as u32, 36).unwrap_or('?');
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Word({self})")
    }
}

/// The composite similitude `φ_{x_0} ∘ … ∘ φ_{x_{p−1}}` of a word.
#[derive(Clone, Debug, PartialEq)]
pub struct CylinderMap {
    pub scale: f64,
    pub rot: Rotation,
    pub shift: Vector,
}

impl CylinderMap {
    pub fn identity(dim: usize) -> Self {
        CylinderMap {
            scale: 1.0,
            rot: Rotation::identity(dim),
            shift: Vector::zeros(dim),
        }
    }

    pub fn apply(&self, x: &Vector) -> Vector {
        self.rot.apply(x).scaled(self.scale).axpy(1.0, &self.shift)
    }

    /// `self ∘ other`
    pub fn compose(&self, other: &CylinderMap) -> CylinderMap {
        CylinderMap {
            scale: self.scale * other.scale,
            rot: self.rot.compose(&other.rot),
            shift: self.apply(&other.shift),
        }
    }

    /// `self ∘ φ` without re-orthonormalization; callers track depth.
    pub(crate) fn then(&self, map: &Similitude) -> CylinderMap {
        CylinderMap {
            scale: self.scale * map.ratio,
            rot: self.rot.compose(&map.rot),
            shift: self.rot.apply(&map.shift).scaled(self.scale).axpy(1.0, &self.shift),
        }
    }

    /// Unique fixed point, solved directly from `(I − scale·rot) y = shift`.
    pub fn fixed_point(&self) -> Vector {
        let d = self.shift.dim();
        let a = DMatrix::identity(d, d) - self.rot.to_matrix() * self.scale;
        let b = DVector::from_column_slice(self.shift.as_slice());
        let y = a.lu().solve(&b).expect("I − λH is invertible for a contraction");
        Vector::new(y.iter().copied().collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapCertificate {
    pub t_lo: f64,
    pub t_hi: f64,
    pub depth: usize,
}

#[derive(Clone, Debug)]
pub struct IfsSystem {
    maps: Vec<Similitude>,
    dim: usize,
    dim_s: f64,
    beta_min: f64,
    beta_max: f64,
    weights: Vec<f64>,
    anchor: Vector,
    bound_center: Vector,
    bound_radius: f64,
    cover_center: Vector,
    cover_radius: f64,
    gap: Option<GapCertificate>,
}

/// Tolerance used for the cached Moran solution.
pub const MORAN_TOL: f64 = 1e-13;

/// Checks the maps and caches `s`, the ratio extremes, the anchor and the bounding balls.
pub fn validate_ifs(maps: Vec<Similitude>) -> Result<IfsSystem> {
    if maps.len() < 2 {
        return Err(Error::DegenerateSystem { maps: maps.len() });
    }
    if maps.len() > u8::MAX as usize {
        return Err(Error::InvalidArgument(format!(
            "at most {} maps are supported",
            u8::MAX
        )));
    }
    let dim = maps[0].dim();
    for m in &maps {
        if m.dim() != dim || m.rot.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: m.dim(),
            });
        }
        if !(m.ratio > 0.0 && m.ratio < 1.0) {
            return Err(Error::NotAContraction { ratio: m.ratio });
        }
        let defect = m.rot.orthogonality_defect();
        if !(defect <= crate::geometry::ORTHOGONALITY_TOL) {
            return Err(Error::NotOrthogonal { defect });
        }
    }
    let ratios: Vec<f64> = maps.iter().map(|m| m.ratio).collect();
    let dim_s = moran_dimension(&ratios, MORAN_TOL);
    let beta_min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let beta_max = ratios.iter().copied().fold(0.0, f64::max);
    let weights = ratios.iter().map(|b| b.powf(dim_s)).collect();
    let anchor = maps[0].fixed_point();
    let bound_radius = maps.iter().map(|m| m.apply(&anchor).dist(&anchor)).fold(0.0, f64::max) / (1.0 - beta_max);
    let (cover_center, cover_radius) = tight_invariant_ball(&maps);
    Ok(IfsSystem {
        maps,
        dim,
        dim_s,
        beta_min,
        beta_max,
        weights,
        bound_center: anchor.clone(),
        anchor,
        bound_radius,
        cover_center,
        cover_radius,
        gap: None,
    })
}

/// Smallest `R` with `φ_i(B(c, R)) ⊆ B(c, R)` for every map.
fn invariant_radius(maps: &[Similitude], c: &Vector) -> f64 {
    maps.iter()
        .map(|m| m.apply(c).dist(c) / (1.0 - m.ratio))
        .fold(0.0, f64::max)
}

/// Invariant ball with a center chosen to make the radius small.
fn tight_invariant_ball(maps: &[Similitude]) -> (Vector, f64) {
    let d = maps[0].dim();
    let fixed: Vec<Vector> = maps.iter().map(|m| m.fixed_point()).collect();
    let mut centroid = Vector::zeros(d);
    for p in &fixed {
        centroid = &centroid + p;
    }
    let centroid = centroid.scaled(1.0 / fixed.len() as f64);
    let box_center = Vector::new(
        (0..d)
            .map(|i| {
                let lo = fixed.iter().map(|p| p[i]).fold(f64::INFINITY, f64::min);
                let hi = fixed.iter().map(|p| p[i]).fold(f64::NEG_INFINITY, f64::max);
                0.5 * (lo + hi)
            })
            .collect(),
    );
    let mut best = fixed[0].clone();
    let mut best_r = invariant_radius(maps, &best);
    for c in [centroid, box_center] {
        let r = invariant_radius(maps, &c);
        if r < best_r {
            best = c;
            best_r = r;
        }
    }
    // Compass search; the radius is convex in the center.
    let mut step = best_r * 0.25;
    while step > best_r * 1e-9 && step > 0.0 {
        let mut improved = false;
        for axis in 0..d {
            for sign in [1.0, -1.0] {
                let mut coords = best.clone().into_vec();
                coords[axis] += sign * step;
                let c = Vector::new(coords);
                let r = invariant_radius(maps, &c);
                if r < best_r {
                    best = c;
                    best_r = r;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (best, best_r)
}

/// Solves `Σ β_i^s = 1` by bisection on `[0, ln m / ln(1/β_max)]`.
pub fn moran_dimension(ratios: &[f64], tol: f64) -> f64 {
    let residual = |s: f64| ratios.iter().map(|b| b.powf(s)).sum::<f64>() - 1.0;
    let beta_max = ratios.iter().copied().fold(0.0, f64::max);
    let mut lo = 0.0;
    let mut hi = (ratios.len() as f64).ln() / (1.0 / beta_max).ln();
    for _ in 0..200 {
        if hi - lo < tol * 1e-2 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if residual(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mid = 0.5 * (lo + hi);
    // Bisection stops on the bracket; return whichever endpoint has the smaller residual.
    [lo, mid, hi]
        .into_iter()
        .min_by(|a, b| residual(*a).abs().total_cmp(&residual(*b).abs()))
        .unwrap_or(mid)
}

impl IfsSystem {
    pub fn maps(&self) -> &[Similitude] {
        &self.maps
    }

    pub fn map(&self, i: usize) -> &Similitude {
        &self.maps[i]
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dim_s(&self) -> f64 {
        self.dim_s
    }

    pub fn beta_min(&self) -> f64 {
        self.beta_min
    }

    pub fn beta_max(&self) -> f64 {
        self.beta_max
    }

    /// Natural-measure weight `β_i^s` of each first-level cylinder.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Fixed point of `φ_0`; a point of the attractor.
    pub fn anchor(&self) -> &Vector {
        &self.anchor
    }

    /// Tighter invariant ball used for cylinder covers.
    pub fn cover_ball(&self) -> (&Vector, f64) {
        (&self.cover_center, self.cover_radius)
    }

    pub fn gap(&self) -> Option<&GapCertificate> {
        self.gap.as_ref()
    }

    pub fn require_ssc(&self) -> Result<&GapCertificate> {
        self.gap.as_ref().ok_or(Error::MissingCertificate)
    }

    /// Runs [`certify_ssc`] and stores the certificate on success.
    pub fn certified(mut self, max_depth: usize) -> Result<Self> {
        let cert = certify_ssc(&self, max_depth)?;
        self.gap = Some(cert);
        Ok(self)
    }

    pub fn with_certificate(mut self, cert: GapCertificate) -> Self {
        self.gap = Some(cert);
        self
    }

    /// Cover ball `B(φ_w(c), λ^w R)` of a cylinder, slightly inflated against roundoff.
    pub(crate) fn cover(&self, map: &CylinderMap) -> (Vector, f64) {
        let center = map.apply(&self.cover_center);
        let radius = map.scale * self.cover_radius * (1.0 + COVER_INFLATION)
            + 4.0 * f64::EPSILON * (map.shift.max_abs() + map.scale * self.cover_radius);
        (center, radius)
    }

    /// Child cylinder map `parent ∘ φ_i`, re-orthonormalizing at the configured cadence.
    pub(crate) fn child(&self, parent: &CylinderMap, digit: usize, depth: usize) -> CylinderMap {
        let mut child = parent.then(&self.maps[digit]);
        if depth.is_multiple_of(crate::geometry::REORTHONORMALIZE_EVERY) && !child.rot.is_identity() {
            child.rot = child.rot.reorthonormalized();
        }
        child
    }

    /// Upper bound on the attractor diameter from the cover ball.
    pub fn diameter_bound(&self) -> f64 {
        2.0 * self.cover_radius
    }

    /// Lower bound on the attractor diameter from anchor images at `depth`.
    pub fn diameter_lower_bound(&self, depth: usize) -> f64 {
        self.anchor_spread(depth).0
    }

    /// Upper estimate of `diam(C)` from anchor spread plus the size of the sampled cylinders.
    pub fn diameter_upper_bound(&self, depth: usize) -> f64 {
        let (spread, reached) = self.anchor_spread(depth);
        let tail = 2.0 * self.cover_radius * self.beta_max.powi(reached as i32);
        (spread + tail).min(self.diameter_bound().max(2.0 * self.cover_radius))
    }

    fn anchor_spread(&self, depth: usize) -> (f64, usize) {
        let mut pts = vec![CylinderMap::identity(self.dim)];
        let mut reached = 0;
        for level in 0..depth {
            if pts.len() * self.len() > 4096 {
                break;
            }
            pts = pts
                .iter()
                .flat_map(|p| (0..self.len()).map(move |i| (p, i)))
                .map(|(p, i)| self.child(p, i, level + 1))
                .collect();
            reached = level + 1;
        }
        let anchors: Vec<Vector> = pts.iter().map(|m| m.apply(&self.anchor)).collect();
        let mut best: f64 = 0.0;
        for (i, a) in anchors.iter().enumerate() {
            for b in &anchors[i + 1..] {
                best = best.max(a.dist(b));
            }
        }
        (best, reached)
    }
}

/// Ball containing the attractor: center at the `φ_0` fixed point and
/// `R = max_i |φ_i(center) − center| / (1 − β_max)`.
pub fn bounding_ball(system: &IfsSystem) -> (Vector, f64) {
    (system.bound_center.clone(), system.bound_radius)
}

/// Scale, rotation and translation of `φ_{w_0} ∘ … ∘ φ_{w_{p−1}}`.
pub fn cylinder_map(system: &IfsSystem, w: &Word) -> Result<CylinderMap> {
    w.check_alphabet(system.len())?;
    let mut scale = 1.0;
    let mut shift = Vector::zeros(system.dim);
    let mut rot = RotationProduct::new(system.dim);
    for &d in w.digits() {
        let m = &system.maps[d as usize];
        shift = rot.current().apply(&m.shift).scaled(scale).axpy(1.0, &shift);
        scale *= m.ratio;
        rot.push(&m.rot);
    }
    Ok(CylinderMap {
        scale,
        rot: rot.finish(),
        shift,
    })
}

/// Brackets the minimal distance between distinct first-level pieces using
/// cylinder covers of relative depth `depth`.
pub fn gap_certificate(system: &IfsSystem, depth: usize) -> GapCertificate {
    let m = system.len();
    let firsts: Vec<CylinderMap> = (0..m)
        .map(|i| system.child(&CylinderMap::identity(system.dim), i, 1))
        .collect();
    let mut search = GapSearch {
        system,
        depth,
        best_lo: f64::INFINITY,
        best_hi: f64::INFINITY,
    };
    for i in 0..m {
        for j in i + 1..m {
            search.visit(&firsts[i], 0, &firsts[j], 0);
        }
    }
    GapCertificate {
        t_lo: search.best_lo.max(0.0),
        t_hi: search.best_hi,
        depth,
    }
}

struct GapSearch<'a> {
    system: &'a IfsSystem,
    depth: usize,
    best_lo: f64,
    best_hi: f64,
}

impl GapSearch<'_> {
    fn visit(&mut self, a: &CylinderMap, da: usize, b: &CylinderMap, db: usize) {
        let (ca, ra) = self.system.cover(a);
        let (cb, rb) = self.system.cover(b);
        let center_dist = ca.dist(&cb);
        let lb = center_dist - ra - rb;
        // Anchors are fixed by φ_0, so every node's anchors are also deeper anchors.
        let anchor_dist = a.apply(&self.system.anchor).dist(&b.apply(&self.system.anchor));
        self.best_hi = self.best_hi.min(anchor_dist);
        if da == self.depth && db == self.depth {
            self.best_lo = self.best_lo.min(lb);
            return;
        }
        if lb >= self.best_lo.max(self.best_hi) {
            return;
        }
        let split_a = db == self.depth || (da < self.depth && ra >= rb);
        let m = self.system.len();
        let mut children: Vec<(f64, CylinderMap)> = (0..m)
            .map(|i| {
                let (parent, level) = if split_a { (a, da) } else { (b, db) };
                let child = self.system.child(parent, i, level + 2);
                let (cc, rc) = self.system.cover(&child);
                let other = if split_a { (&cb, rb) } else { (&ca, ra) };
                (cc.dist(other.0) - rc - other.1, child)
            })
            .collect();
        children.sort_by(|x, y| x.0.total_cmp(&y.0));
        for (_, child) in children {
            if split_a {
                self.visit(&child, da + 1, b, db);
            } else {
                self.visit(a, da, &child, db + 1);
            }
        }
    }
}

/// Deepens the gap certificate until its lower bound is positive.
pub fn certify_ssc(system: &IfsSystem, max_depth: usize) -> Result<GapCertificate> {
    let max_depth = max_depth.max(1);
    let mut last = gap_certificate(system, 1);
    if last.t_lo > 0.0 {
        return Ok(last);
    }
    for depth in 2..=max_depth {
        last = gap_certificate(system, depth);
        if last.t_lo > 0.0 {
            return Ok(last);
        }
    }
    Err(Error::SscNotCertified {
        depth: max_depth,
        certificate: last,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn cantor() -> IfsSystem {
        validate_ifs(vec![
            Similitude::scaling(1.0 / 3.0, vec![0.0]).unwrap(),
            Similitude::scaling(1.0 / 3.0, vec![2.0 / 3.0]).unwrap(),
        ])
        .unwrap()
    }

    fn rot90_system() -> IfsSystem {
        validate_ifs(vec![
            Similitude::new(0.4, Rotation::planar(std::f64::consts::FRAC_PI_2), Vector::zeros(2)).unwrap(),
            Similitude::scaling(0.4, vec![0.6, 0.0]).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn validate_examples() {
        let c = cantor();
        assert_eq!(c.len(), 2);
        assert_eq!(c.beta_min(), 1.0 / 3.0);
        assert_eq!(c.beta_max(), 1.0 / 3.0);
        assert!(matches!(
            Similitude::scaling(1.2, vec![0.0]),
            Err(Error::NotAContraction { .. })
        ));
        let r = rot90_system();
        assert_eq!((r.beta_min(), r.beta_max(), r.len()), (0.4, 0.4, 2));
        assert!(matches!(
            validate_ifs(vec![Similitude::scaling(0.5, vec![0.0]).unwrap()]),
            Err(Error::DegenerateSystem { maps: 1 })
        ));
    }

    #[test]
    fn moran_examples() {
        let cases = [
            (vec![1.0 / 3.0, 1.0 / 3.0], 2f64.ln() / 3f64.ln()),
            (vec![0.5, 0.25], (2.0 / (5f64.sqrt() - 1.0)).log2()),
            (vec![0.4, 0.4, 0.4], 3f64.ln() / 2.5f64.ln()),
        ];
        for (ratios, expected) in cases {
            let s = moran_dimension(&ratios, 1e-12);
            assert!((s - expected).abs() <= 1e-12, "{ratios:?}: {s} vs {expected}");
            let residual: f64 = ratios.iter().map(|b| b.powf(s)).sum::<f64>() - 1.0;
            assert!(residual.abs() <= 1e-12);
        }
        assert!((moran_dimension(&[1.0 / 3.0, 1.0 / 3.0], 1e-12) - 0.6309297536).abs() < 1e-10);
        assert!((moran_dimension(&[0.5, 0.25], 1e-12) - 0.6942419136).abs() < 1e-10);
        assert!((moran_dimension(&[0.4, 0.4, 0.4], 1e-12) - 1.1989778467).abs() < 1e-10);
    }

    #[test]
    fn bounding_ball_examples() {
        let (c, r) = bounding_ball(&cantor());
        assert_eq!(c.as_slice(), &[0.0]);
        assert!((r - 1.0).abs() < 1e-15);

        let (c, r) = bounding_ball(&rot90_system());
        assert_eq!(c.as_slice(), &[0.0, 0.0]);
        assert!((r - 1.0).abs() < 1e-15);

        let flat = validate_ifs(vec![
            Similitude::scaling(0.5, vec![0.0]).unwrap(),
            Similitude::scaling(0.3, vec![0.0]).unwrap(),
        ])
        .unwrap();
        let (c, r) = bounding_ball(&flat);
        assert_eq!((c.as_slice(), r), (&[0.0][..], 0.0));
    }

    #[test]
    fn cover_ball_is_the_convex_hull_for_cantor() {
        let c = cantor();
        let (center, r) = c.cover_ball();
        assert!((center[0] - 0.5).abs() < 1e-12);
        assert!((r - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cylinder_map_examples() {
        let c = cantor();
        let m = cylinder_map(&c, &Word::parse("01").unwrap()).unwrap();
        assert!((m.scale - 1.0 / 9.0).abs() < 1e-16);
        assert!((m.shift[0] - 2.0 / 9.0).abs() < 1e-16);
        assert!(m.rot.is_identity());

        let id = cylinder_map(&c, &Word::empty()).unwrap();
        assert_eq!(id, CylinderMap::identity(1));

        let r = rot90_system();
        let m = cylinder_map(&r, &Word::parse("00").unwrap()).unwrap();
        assert!((m.scale - 0.16).abs() < 1e-15);
        assert!(m.rot.deviation_from(&Rotation::planar(std::f64::consts::PI)) < 1e-15);

        assert!(matches!(
            cylinder_map(&c, &Word::parse("02").unwrap()),
            Err(Error::DigitOutOfRange { digit: 2, maps: 2 })
        ));
    }

    #[test]
    fn gap_examples() {
        let cert = gap_certificate(&cantor(), 6);
        assert!(cert.t_lo >= 1.0 / 3.0 - 2.0 * 3f64.powi(-7));
        assert!(cert.t_lo <= 1.0 / 3.0 && 1.0 / 3.0 <= cert.t_hi + 1e-15);

        let touching = validate_ifs(vec![
            Similitude::scaling(0.5, vec![0.0]).unwrap(),
            Similitude::scaling(0.5, vec![0.5]).unwrap(),
        ])
        .unwrap();
        for depth in [1, 4, 8] {
            let cert = gap_certificate(&touching, depth);
            assert_eq!(cert.t_lo, 0.0);
            assert!(cert.t_hi <= 0.5f64.powi(depth as i32 + 1) + 1e-15);
        }

        let h = 3f64.sqrt() / 2.0;
        let triangle = validate_ifs(
            [[0.0, 0.0], [1.0, 0.0], [0.5, h]]
                .iter()
                .map(|v| Similitude::scaling(0.4, vec![0.6 * v[0], 0.6 * v[1]]).unwrap())
                .collect(),
        )
        .unwrap();
        assert!((1..=6).any(|d| gap_certificate(&triangle, d).t_lo > 0.0));
    }

    #[test]
    fn gap_brackets_nest_with_depth() {
        let c = cantor();
        let mut prev = gap_certificate(&c, 1);
        for depth in 2..=8 {
            let cert = gap_certificate(&c, depth);
            assert!(cert.t_lo >= prev.t_lo);
            assert!(cert.t_hi <= prev.t_hi);
            prev = cert;
        }
    }

    #[test]
    fn certify_examples() {
        let cert = certify_ssc(&cantor(), 10).unwrap();
        assert!(cert.t_lo > 0.33);

        let touching = validate_ifs(vec![
            Similitude::scaling(0.5, vec![0.0]).unwrap(),
            Similitude::scaling(0.5, vec![0.5]).unwrap(),
        ])
        .unwrap();
        match certify_ssc(&touching, 10) {
            Err(Error::SscNotCertified { depth, certificate }) => {
                assert_eq!(depth, 10);
                assert!(certificate.t_hi < 1e-3);
            }
            other => panic!("expected failure, got {other:?}"),
        }

        let rich = validate_ifs(vec![
            Similitude::scaling(0.25, vec![0.0]).unwrap(),
            Similitude::scaling(0.25, vec![0.75]).unwrap(),
        ])
        .unwrap();
        let cert = certify_ssc(&rich, 10).unwrap();
        assert_eq!(cert.depth, 1);
        assert!((cert.t_lo - 0.5).abs() < 1e-9);
    }
}
