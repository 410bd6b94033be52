//! Dimension-generic vectors, orthogonal maps, convex regions and point clouds.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Max-entry deviation of `RᵀR` from the identity accepted at construction.
pub const ORTHOGONALITY_TOL: f64 = 1e-12;

/// Rotation products are re-projected onto O(d) after this many factors.
pub const REORTHONORMALIZE_EVERY: usize = 64;

/// Both clouds must exceed this size before the grid index is used.
pub const GRID_INDEX_THRESHOLD: usize = 4096;

#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector {
    coords: Vec<f64>,
}

impl Vector {
    pub fn new(coords: Vec<f64>) -> Self {
        Self { coords }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { coords: vec![0.0; dim] }
    }

    pub fn splat(dim: usize, value: f64) -> Self {
        Self {
            coords: vec![value; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.coords
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        self.coords.iter().zip(&other.coords).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn dist(&self, other: &Vector) -> f64 {
        self.dist_sq(other).sqrt()
    }

    pub fn dist_sq(&self, other: &Vector) -> f64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.coords.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, k: f64) -> Vector {
        Vector::new(self.coords.iter().map(|v| v * k).collect())
    }

    /// `self + k * other`
    pub fn axpy(&self, k: f64, other: &Vector) -> Vector {
        Vector::new(self.coords.iter().zip(&other.coords).map(|(a, b)| a + k * b).collect())
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.coords)
    }
}

impl std::ops::Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.coords[i]
    }
}

impl From<Vec<f64>> for Vector {
    fn from(coords: Vec<f64>) -> Self {
        Vector::new(coords)
    }
}

impl Add for &Vector {
    type Output = Vector;
    fn add(self, rhs: &Vector) -> Vector {
        Vector::new(self.coords.iter().zip(&rhs.coords).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &Vector {
    type Output = Vector;
    fn sub(self, rhs: &Vector) -> Vector {
        Vector::new(self.coords.iter().zip(&rhs.coords).map(|(a, b)| a - b).collect())
    }
}

impl Neg for &Vector {
    type Output = Vector;
    fn neg(self) -> Vector {
        self.scaled(-1.0)
    }
}

impl Mul<f64> for &Vector {
    type Output = Vector;
    fn mul(self, k: f64) -> Vector {
        self.scaled(k)
    }
}

/// An element of O(d), stored row-major.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<Vec<f64>>", try_from = "Vec<Vec<f64>>")]
pub struct Rotation {
    dim: usize,
    entries: Vec<f64>,
}

impl Rotation {
    /// Validates orthogonality to [`ORTHOGONALITY_TOL`].
    pub fn new(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        let rot = Rotation { dim, entries };
        let defect = rot.orthogonality_defect();
        if !(defect <= ORTHOGONALITY_TOL) {
            return Err(Error::NotOrthogonal { defect });
        }
        Ok(rot)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            entries.extend_from_slice(row);
        }
        Rotation::new(dim, entries)
    }

    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = 1.0;
        }
        Rotation { dim, entries }
    }

    /// Counter-clockwise planar rotation. Quarter turns are snapped to exact entries.
    pub fn planar(angle: f64) -> Self {
        let quarter = angle / std::f64::consts::FRAC_PI_2;
        let (c, s) = if (quarter - quarter.round()).abs() < 1e-15 {
            match (quarter.round() as i64).rem_euclid(4) {
                0 => (1.0, 0.0),
                1 => (0.0, 1.0),
                2 => (-1.0, 0.0),
                _ => (0.0, -1.0),
            }
        } else {
            (angle.cos(), angle.sin())
        };
        Rotation {
            dim: 2,
            entries: vec![c, -s, s, c],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.dim + col]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.dim).map(|r| r.to_vec()).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.deviation_from(&Rotation::identity(self.dim)) == 0.0
    }

    pub fn apply(&self, v: &Vector) -> Vector {
        let d = self.dim;
        let x = v.as_slice();
        Vector::new(
            (0..d)
                .map(|i| {
                    let row = &self.entries[i * d..(i + 1) * d];
                    row.iter().zip(x).map(|(a, b)| a * b).sum()
                })
                .collect(),
        )
    }

    pub fn apply_transpose(&self, v: &Vector) -> Vector {
        let d = self.dim;
        let x = v.as_slice();
        Vector::new(
            (0..d)
                .map(|j| (0..d).map(|i| self.entries[i * d + j] * x[i]).sum())
                .collect(),
        )
    }

    /// Matrix product `self · other`, i.e. the map `v ↦ self(other(v))`.
    pub fn compose(&self, other: &Rotation) -> Rotation {
        let d = self.dim;
        let mut entries = vec![0.0; d * d];
        for i in 0..d {
            for k in 0..d {
                let a = self.entries[i * d + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..d {
                    entries[i * d + j] += a * other.entries[k * d + j];
                }
            }
        }
        Rotation { dim: d, entries }
    }

    pub fn transpose(&self) -> Rotation {
        let d = self.dim;
        let mut entries = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                entries[j * d + i] = self.entries[i * d + j];
            }
        }
        Rotation { dim: d, entries }
    }

    pub fn inverse(&self) -> Rotation {
        self.transpose()
    }

    pub fn pow(&self, q: usize) -> Rotation {
        let mut acc = RotationProduct::new(self.dim);
        for _ in 0..q {
            acc.push(self);
        }
        acc.finish()
    }

    /// Max-entry norm of `RᵀR − I`.
    pub fn orthogonality_defect(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let mut dot = 0.0;
                for k in 0..d {
                    dot += self.entries[k * d + i] * self.entries[k * d + j];
                }
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    /// Max-entry distance between two matrices.
    pub fn deviation_from(&self, other: &Rotation) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn determinant(&self) -> f64 {
        self.to_matrix().determinant()
    }

    /// Nearest orthogonal matrix (polar factor `U Vᵀ`).
    pub fn reorthonormalized(&self) -> Rotation {
        let svd = self.to_matrix().svd(true, true);
        match (svd.u, svd.v_t) {
            (Some(u), Some(v_t)) => Rotation::from_matrix(&(u * v_t)),
            _ => self.clone(),
        }
    }

    pub(crate) fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.entries)
    }

    pub(crate) fn from_matrix(m: &DMatrix<f64>) -> Rotation {
        let d = m.nrows();
        let mut entries = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                entries.push(m[(i, j)]);
            }
        }
        Rotation { dim: d, entries }
    }
}

impl fmt::Debug for Rotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Rotation{:?}", self.rows())
    }
}

impl From<Rotation> for Vec<Vec<f64>> {
    fn from(rot: Rotation) -> Self {
        rot.rows()
    }
}

impl TryFrom<Vec<Vec<f64>>> for Rotation {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Rotation::from_rows(&rows)
    }
}

/// Left-to-right product of rotations that re-orthonormalizes every
/// [`REORTHONORMALIZE_EVERY`] factors.
#[derive(Clone, Debug)]
pub struct RotationProduct {
    acc: Rotation,
    since_fix: usize,
}

impl RotationProduct {
    pub fn new(dim: usize) -> Self {
        Self {
            acc: Rotation::identity(dim),
            since_fix: 0,
        }
    }

    pub fn starting_at(rot: Rotation) -> Self {
        Self { acc: rot, since_fix: 0 }
    }

    /// `acc ← acc ∘ next`
    pub fn push(&mut self, next: &Rotation) {
        if next.is_identity() {
            return;
        }
        self.acc = self.acc.compose(next);
        self.since_fix += 1;
        if self.since_fix >= REORTHONORMALIZE_EVERY {
            self.acc = self.acc.reorthonormalized();
            self.since_fix = 0;
        }
    }

    pub fn current(&self) -> &Rotation {
        &self.acc
    }

    pub fn finish(self) -> Rotation {
        if self.since_fix > 0 && self.acc.orthogonality_defect() > ORTHOGONALITY_TOL {
            self.acc.reorthonormalized()
        } else {
            self.acc
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Closure {
    HalfOpen,
    Closed,
}

/// Axis-aligned box `∏[lo_i, hi_i)` or `∏[lo_i, hi_i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    lo: Vector,
    hi: Vector,
    closure: Closure,
}

impl Window {
    pub fn new(lo: Vector, hi: Vector, closure: Closure) -> Result<Self> {
        if lo.dim() != hi.dim() {
            return Err(Error::DimensionMismatch {
                expected: lo.dim(),
                found: hi.dim(),
            });
        }
        if lo.as_slice().iter().zip(hi.as_slice()).any(|(a, b)| !(a < b)) {
            return Err(Error::InvalidArgument(format!(
                "window bounds must satisfy lo < hi, got {lo:?} and {hi:?}"
            )));
        }
        Ok(Window { lo, hi, closure })
    }

    /// Closed cube `[-n, n]^d`.
    pub fn centered_cube(dim: usize, n: f64) -> Result<Self> {
        Window::new(Vector::splat(dim, -n), Vector::splat(dim, n), Closure::Closed)
    }

    pub fn interval(lo: f64, hi: f64, closure: Closure) -> Result<Self> {
        Window::new(Vector::new(vec![lo]), Vector::new(vec![hi]), closure)
    }

    pub fn lo(&self) -> &Vector {
        &self.lo
    }

    pub fn hi(&self) -> &Vector {
        &self.hi
    }

    pub fn closure(&self) -> Closure {
        self.closure
    }

    pub fn dim(&self) -> usize {
        self.lo.dim()
    }

    pub fn with_closure(&self, closure: Closure) -> Window {
        Window {
            closure,
            ..self.clone()
        }
    }

    pub fn center(&self) -> Vector {
        (&self.lo + &self.hi).scaled(0.5)
    }

    pub fn half_diagonal(&self) -> f64 {
        self.lo.dist(&self.hi) * 0.5
    }

    /// Largest coordinate magnitude, i.e. the smallest `N` with the window inside `[-N, N]^d`.
    pub fn max_abs(&self) -> f64 {
        self.lo.max_abs().max(self.hi.max_abs())
    }

    pub fn contains(&self, p: &Vector) -> bool {
        self.contains_with_slack(p, 0.0)
    }

    /// Membership in the window grown by `slack` on every face.
    pub fn contains_with_slack(&self, p: &Vector, slack: f64) -> bool {
        let lo = self.lo.as_slice();
        let hi = self.hi.as_slice();
        p.as_slice().iter().enumerate().all(|(i, &x)| {
            let upper = match self.closure {
                Closure::Closed => x <= hi[i] + slack,
                Closure::HalfOpen => x < hi[i] + slack,
            };
            x >= lo[i] - slack && upper
        })
    }

    pub fn corners(&self) -> Vec<Vector> {
        let d = self.dim();
        (0..1usize << d)
            .map(|mask| {
                Vector::new(
                    (0..d)
                        .map(|i| if mask >> i & 1 == 1 { self.hi[i] } else { self.lo[i] })
                        .collect(),
                )
            })
            .collect()
    }

    /// Partition into `cells_per_axis^d` half-open cells, lexicographic in the axis index.
    pub fn grid(&self, cells_per_axis: usize) -> Vec<Window> {
        let d = self.dim();
        let n = cells_per_axis.max(1);
        let total = n.pow(d as u32);
        (0..total)
            .map(|mut idx| {
                let mut lo = vec![0.0; d];
                let mut hi = vec![0.0; d];
                let mut digits = vec![0usize; d];
                for axis in (0..d).rev() {
                    digits[axis] = idx % n;
                    idx /= n;
                }
                for axis in 0..d {
                    let a = self.lo[axis];
                    let b = self.hi[axis];
                    let k = digits[axis];
                    lo[axis] = a + (b - a) * k as f64 / n as f64;
                    hi[axis] = if k + 1 == n {
                        b
                    } else {
                        a + (b - a) * (k + 1) as f64 / n as f64
                    };
                }
                Window {
                    lo: Vector::new(lo),
                    hi: Vector::new(hi),
                    closure: Closure::HalfOpen,
                }
            })
            .collect()
    }

    /// Split along `axis` at `at` into `[lo, at)` and `[at, hi)`-style halves.
    pub fn split(&self, axis: usize, at: f64) -> Result<(Window, Window)> {
        let mut left_hi = self.hi.clone().into_vec();
        left_hi[axis] = at;
        let mut right_lo = self.lo.clone().into_vec();
        right_lo[axis] = at;
        Ok((
            Window::new(self.lo.clone(), Vector::new(left_hi), Closure::HalfOpen)?,
            Window::new(Vector::new(right_lo), self.hi.clone(), self.closure)?,
        ))
    }
}

/// Closed half-space `normal · x ≤ offset` with a unit normal.
#[derive(Clone, Debug, PartialEq)]
pub struct HalfSpace {
    pub normal: Vector,
    pub offset: f64,
}

impl HalfSpace {
    pub fn new(normal: Vector, offset: f64) -> Result<Self> {
        let len = normal.norm();
        if !(len > 0.0) || !len.is_finite() {
            return Err(Error::InvalidArgument("half-space normal must be nonzero".into()));
        }
        Ok(HalfSpace {
            normal: normal.scaled(1.0 / len),
            offset: offset / len,
        })
    }

    pub fn signed_distance(&self, p: &Vector) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

/// Intersection of half-spaces, optionally with known vertices and a cached bounding ball.
#[derive(Clone, Debug, PartialEq)]
pub struct Polytope {
    halfspaces: Vec<HalfSpace>,
    vertices: Option<Vec<Vector>>,
    bound: Option<(Vector, f64)>,
}

impl Polytope {
    /// A polytope with no bounding ball is accepted here but rejected by [`classify`].
    pub fn new(halfspaces: Vec<HalfSpace>, bound: Option<(Vector, f64)>) -> Result<Self> {
        if halfspaces.is_empty() {
            return Err(Error::InvalidArgument("polytope needs at least one half-space".into()));
        }
        Ok(Polytope {
            halfspaces,
            vertices: None,
            bound,
        })
    }

    fn from_vertices(halfspaces: Vec<HalfSpace>, vertices: Vec<Vector>) -> Self {
        let bound = bounding_ball_of(&vertices);
        Polytope {
            halfspaces,
            vertices: Some(vertices),
            bound: Some(bound),
        }
    }

    pub fn halfspaces(&self) -> &[HalfSpace] {
        &self.halfspaces
    }

    pub fn vertices(&self) -> Option<&[Vector]> {
        self.vertices.as_deref()
    }

    pub fn bound(&self) -> Option<&(Vector, f64)> {
        self.bound.as_ref()
    }

    pub fn contains(&self, p: &Vector) -> bool {
        self.halfspaces.iter().all(|h| h.signed_distance(p) <= 0.0)
    }
}

fn bounding_ball_of(points: &[Vector]) -> (Vector, f64) {
    let d = points[0].dim();
    let mut c = Vector::zeros(d);
    for p in points {
        c = &c + p;
    }
    let c = c.scaled(1.0 / points.len() as f64);
    let r = points.iter().fold(0.0_f64, |m, p| m.max(p.dist(&c)));
    (c, r)
}

#[derive(Clone, Debug, PartialEq)]
pub enum ConvexRegion {
    Window(Window),
    Ball { center: Vector, radius: f64 },
    Polytope(Polytope),
}

impl ConvexRegion {
    pub fn ball(center: Vector, radius: f64) -> Result<Self> {
        if !(radius >= 0.0) {
            return Err(Error::InvalidArgument("ball radius must be nonnegative".into()));
        }
        Ok(ConvexRegion::Ball { center, radius })
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexRegion::Window(w) => w.dim(),
            ConvexRegion::Ball { center, .. } => center.dim(),
            ConvexRegion::Polytope(p) => p.halfspaces[0].normal.dim(),
        }
    }

    pub fn contains(&self, p: &Vector) -> bool {
        match self {
            ConvexRegion::Window(w) => w.contains(p),
            ConvexRegion::Ball { center, radius } => p.dist(center) <= *radius,
            ConvexRegion::Polytope(poly) => poly.contains(p),
        }
    }

    /// Vertices where they are known (windows and box images).
    pub fn vertices(&self) -> Option<Vec<Vector>> {
        match self {
            ConvexRegion::Window(w) => Some(w.corners()),
            ConvexRegion::Ball { .. } => None,
            ConvexRegion::Polytope(p) => p.vertices.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Classification {
    Inside,
    Outside,
    Straddle,
}

/// Conservative position of the closed ball `B(center, radius)` relative to `region`.
pub fn classify(region: &ConvexRegion, center: &Vector, radius: f64) -> Result<Classification> {
    use Classification::*;
    if !(radius >= 0.0) {
        return Err(Error::InvalidArgument("ball radius must be nonnegative".into()));
    }
    Ok(match region {
        ConvexRegion::Window(w) => {
            let lo = w.lo.as_slice();
            let hi = w.hi.as_slice();
            let c = center.as_slice();
            let mut inside = true;
            let mut gap_sq = 0.0;
            for i in 0..c.len() {
                let below_hi = match w.closure {
                    Closure::Closed => c[i] + radius <= hi[i],
                    Closure::HalfOpen => c[i] + radius < hi[i],
                };
                if !(c[i] - radius >= lo[i] && below_hi) {
                    inside = false;
                }
                if w.closure == Closure::HalfOpen && c[i] - radius >= hi[i] {
                    return Ok(Outside);
                }
                let excess = if c[i] < lo[i] {
                    lo[i] - c[i]
                } else if c[i] > hi[i] {
                    c[i] - hi[i]
                } else {
                    0.0
                };
                gap_sq += excess * excess;
            }
            if inside {
                Inside
            } else if gap_sq > radius * radius {
                Outside
            } else {
                Straddle
            }
        }
        ConvexRegion::Ball { center: bc, radius: br } => {
            let dist = center.dist(bc);
            if dist + radius <= *br {
                Inside
            } else if dist > radius + br {
                Outside
            } else {
                Straddle
            }
        }
        ConvexRegion::Polytope(poly) => {
            let Some((bc, br)) = &poly.bound else {
                return Err(Error::UnboundedPolytope);
            };
            if center.dist(bc) > radius + br {
                return Ok(Outside);
            }
            let mut inside = true;
            for h in &poly.halfspaces {
                let sd = h.signed_distance(center);
                if sd > radius {
                    return Ok(Outside);
                }
                if sd + radius > 0.0 {
                    inside = false;
                }
            }
            if inside {
                Inside
            } else {
                Straddle
            }
        }
    })
}

/// Image of `region` under `x ↦ scale · rot(x) + shift`.
pub fn transform_region(region: &ConvexRegion, scale: f64, rot: &Rotation, shift: &Vector) -> Result<ConvexRegion> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "transform scale must be positive, got {scale}"
        )));
    }
    let map = |p: &Vector| rot.apply(p).scaled(scale).axpy(1.0, shift);
    Ok(match region {
        ConvexRegion::Window(w) if rot.is_identity() => ConvexRegion::Window(Window {
            lo: map(&w.lo),
            hi: map(&w.hi),
            closure: w.closure,
        }),
        ConvexRegion::Window(w) => {
            let d = w.dim();
            let mut halfspaces = Vec::with_capacity(2 * d);
            for axis in 0..d {
                // Column `axis` of `rot` is the image of the axis direction.
                let normal = Vector::new((0..d).map(|i| rot.entry(i, axis)).collect());
                let along_shift = normal.dot(shift);
                halfspaces.push(HalfSpace {
                    normal: normal.clone(),
                    offset: scale * w.hi[axis] + along_shift,
                });
                halfspaces.push(HalfSpace {
                    normal: -&normal,
                    offset: -(scale * w.lo[axis] + along_shift),
                });
            }
            let vertices = w.corners().iter().map(map).collect();
            ConvexRegion::Polytope(Polytope::from_vertices(halfspaces, vertices))
        }
        ConvexRegion::Ball { center, radius } => ConvexRegion::Ball {
            center: map(center),
            radius: radius * scale,
        },
        ConvexRegion::Polytope(poly) => {
            let halfspaces = poly
                .halfspaces
                .iter()
                .map(|h| {
                    let normal = rot.apply(&h.normal);
                    let offset = scale * h.offset + normal.dot(shift);
                    HalfSpace { normal, offset }
                })
                .collect();
            let vertices = poly.vertices.as_ref().map(|vs| vs.iter().map(map).collect::<Vec<_>>());
            let bound = poly.bound.as_ref().map(|(c, r)| (map(c), r * scale));
            ConvexRegion::Polytope(Polytope {
                halfspaces,
                vertices,
                bound,
            })
        }
    })
}

/// Finite point set with a covering-radius tag.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    dim: usize,
    points: Vec<Vector>,
    covering_radius: f64,
}

impl PointCloud {
    pub fn new(dim: usize, points: Vec<Vector>, covering_radius: f64) -> Result<Self> {
        if let Some(bad) = points.iter().find(|p| p.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.dim(),
            });
        }
        if !(covering_radius >= 0.0) {
            return Err(Error::InvalidArgument("covering radius must be nonnegative".into()));
        }
        Ok(PointCloud {
            dim,
            points,
            covering_radius,
        })
    }

    pub fn from_scalars(values: &[f64]) -> Self {
        PointCloud {
            dim: 1,
            points: values.iter().map(|v| Vector::new(vec![*v])).collect(),
            covering_radius: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[Vector] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn covering_radius(&self) -> f64 {
        self.covering_radius
    }

    pub fn map_points(&self, f: impl Fn(&Vector) -> Vector, covering_radius: f64) -> PointCloud {
        PointCloud {
            dim: self.dim,
            points: self.points.iter().map(f).collect(),
            covering_radius,
        }
    }

    pub fn clipped(&self, window: &Window, slack: f64) -> PointCloud {
        PointCloud {
            dim: self.dim,
            points: self
                .points
                .iter()
                .filter(|p| window.contains_with_slack(p, slack))
                .cloned()
                .collect(),
            covering_radius: self.covering_radius,
        }
    }

    /// Distance from `p` to the nearest cloud point; infinite for an empty cloud.
    pub fn distance_to(&self, p: &Vector) -> f64 {
        self.points
            .iter()
            .map(|q| q.dist_sq(p))
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    }
}

/// Symmetric Hausdorff distance between two finite clouds.
pub fn hausdorff_distance(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch {
            expected: a.dim,
            found: b.dim,
        });
    }
    if a.len() > GRID_INDEX_THRESHOLD && b.len() > GRID_INDEX_THRESHOLD {
        let ga = GridIndex::build(&a.points);
        let gb = GridIndex::build(&b.points);
        Ok(directed_indexed(&a.points, &gb).max(directed_indexed(&b.points, &ga)))
    } else {
        Ok(directed_brute(&a.points, &b.points).max(directed_brute(&b.points, &a.points)))
    }
}

fn directed_brute(from: &[Vector], to: &[Vector]) -> f64 {
    from.par_iter()
        .map(|p| to.iter().map(|q| q.dist_sq(p)).fold(f64::INFINITY, f64::min))
        .reduce(|| 0.0, f64::max)
        .sqrt()
}

fn directed_indexed(from: &[Vector], to: &GridIndex) -> f64 {
    from.par_iter()
        .map(|p| to.nearest_sq(p))
        .reduce(|| 0.0, f64::max)
        .sqrt()
}

/// Uniform hash grid for exact nearest-neighbour queries.
struct GridIndex<'a> {
    points: &'a [Vector],
    cell: f64,
    origin: Vec<f64>,
    extent: Vec<i64>,
    buckets: HashMap<Vec<i64>, Vec<usize>>,
}

impl<'a> GridIndex<'a> {
    fn build(points: &'a [Vector]) -> Self {
        let d = points[0].dim();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for p in points {
            for i in 0..d {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
        let span = (0..d).fold(0.0_f64, |m, i| m.max(hi[i] - lo[i]));
        let per_axis = (points.len() as f64).powf(1.0 / d as f64).max(1.0);
        let cell = if span > 0.0 { span / per_axis } else { 1.0 };
        let mut buckets: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
        let key = |p: &Vector| -> Vec<i64> { (0..d).map(|i| ((p[i] - lo[i]) / cell).floor() as i64).collect() };
        for (idx, p) in points.iter().enumerate() {
            buckets.entry(key(p)).or_default().push(idx);
        }
        let extent = (0..d).map(|i| ((hi[i] - lo[i]) / cell).floor() as i64 + 1).collect();
        GridIndex {
            points,
            cell,
            origin: lo,
            extent,
            buckets,
        }
    }

    fn nearest_sq(&self, p: &Vector) -> f64 {
        let d = self.origin.len();
        let home: Vec<i64> = (0..d)
            .map(|i| ((p[i] - self.origin[i]) / self.cell).floor() as i64)
            .collect();
        // Ring k only holds points at distance ≥ (k - 1) · cell from p.
        let max_ring = (0..d)
            .map(|i| home[i].abs().max((home[i] - self.extent[i]).abs()))
            .max()
            .unwrap_or(0)
            + 1;
        let mut best = f64::INFINITY;
        let mut cursor = vec![0i64; d];
        for ring in 0..=max_ring {
            let floor = (ring as f64 - 1.0).max(0.0) * self.cell;
            if floor * floor > best {
                break;
            }
            self.visit_ring(&home, ring, 0, &mut cursor, false, &mut |idx| {
                let dsq = self.points[idx].dist_sq(p);
                if dsq < best {
                    best = dsq;
                }
            });
        }
        best
    }

    fn visit_ring(
        &self,
        home: &[i64],
        ring: i64,
        axis: usize,
        cursor: &mut Vec<i64>,
        on_shell: bool,
        f: &mut impl FnMut(usize),
    ) {
        let d = home.len();
        if axis == d {
            if on_shell || ring == 0 {
                let key: Vec<i64> = (0..d).map(|i| home[i] + cursor[i]).collect();
                if let Some(list) = self.buckets.get(&key) {
                    for &idx in list {
                        f(idx);
                    }
                }
            }
            return;
        }
        for off in -ring..=ring {
            cursor[axis] = off;
            self.visit_ring(home, ring, axis + 1, cursor, on_shell || off.abs() == ring, f);
        }
    }
}
