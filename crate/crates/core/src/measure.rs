//! The normalized natural measure on the attractor: certified region masses by
//! adaptive cylinder refinement, discrete approximations, and density scans.
//!
//! All masses refer to the probability measure `H^s⌊C / H^s(C)`; a cylinder
//! with word `w` carries weight `(λ^w)^s`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coding::{pi_eval, Coding};
use crate::error::{Error, Result};
use crate::geometry::{
    classify, Classification, ConvexRegion, HalfSpace, PointCloud, Polytope, Rotation, Vector, Window,
};
use crate::ifs::{CylinderMap, IfsSystem, Word};

/// Deepest cylinder level explored by refinement.
pub const DEPTH_CAP: usize = 64;

/// Hard limit on classified cylinders per region query.
pub const CYLINDER_CAP: usize = 20_000_000;

/// Default leaf limit for discrete measures and clouds.
pub const LEAF_CAP: usize = 4_000_000;

/// Relative slack used when clipping sampled points to a window.
pub const CLIP_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionMass {
    pub lo: f64,
    pub hi: f64,
    pub cylinders_used: usize,
}

impl RegionMass {
    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn scaled(&self, k: f64) -> RegionMass {
        RegionMass {
            lo: self.lo * k,
            hi: self.hi * k,
            cylinders_used: self.cylinders_used,
        }
    }

    /// Gap between two intervals; zero when they overlap.
    pub fn separation(&self, other: &RegionMass) -> f64 {
        (other.lo - self.hi).max(self.lo - other.hi).max(0.0)
    }
}

struct Pending {
    weight: f64,
    seq: usize,
    depth: usize,
    map: CylinderMap,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Pending {}
impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        self.weight
            .total_cmp(&other.weight)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Certified interval for `μ̂(region)`, refining straddling cylinders largest-weight first.
pub fn region_mass(system: &IfsSystem, region: &ConvexRegion, tol: f64) -> Result<RegionMass> {
    region_mass_with_cap(system, region, tol, CYLINDER_CAP)
}

pub fn region_mass_with_cap(system: &IfsSystem, region: &ConvexRegion, tol: f64, cap: usize) -> Result<RegionMass> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tol must be positive".into()));
    }
    if region.dim() != system.dim() {
        return Err(Error::DimensionMismatch {
            expected: system.dim(),
            found: region.dim(),
        });
    }
    let weights = system.weights();
    let mut lo = 0.0;
    let mut used = 1usize;
    let mut seq = 0usize;
    let mut heap = BinaryHeap::new();
    let mut stuck = 0.0;
    let root = CylinderMap::identity(system.dim());
    let (c, r) = system.cover(&root);
    match classify(region, &c, r)? {
        Classification::Inside => lo = 1.0,
        Classification::Outside => {}
        Classification::Straddle => heap.push(Pending {
            weight: 1.0,
            seq,
            depth: 0,
            map: root,
        }),
    }
    let mut straddle: f64 = heap.iter().map(|p| p.weight).sum();
    while straddle + stuck > tol {
        let Some(node) = heap.pop() else { break };
        straddle -= node.weight;
        if node.depth >= DEPTH_CAP {
            stuck += node.weight;
            continue;
        }
        if used >= cap {
            stuck += node.weight;
            break;
        }
        for (i, w) in weights.iter().enumerate() {
            let child = system.child(&node.map, i, node.depth + 1);
            let weight = node.weight * w;
            let (c, r) = system.cover(&child);
            used += 1;
            match classify(region, &c, r)? {
                Classification::Inside => lo += weight,
                Classification::Outside => {}
                Classification::Straddle => {
                    seq += 1;
                    straddle += weight;
                    heap.push(Pending {
                        weight,
                        seq,
                        depth: node.depth + 1,
                        map: child,
                    });
                }
            }
        }
    }
    let open: f64 = heap.iter().map(|p| p.weight).sum::<f64>() + stuck;
    let lo = lo.clamp(0.0, 1.0);
    let mass = RegionMass {
        lo,
        hi: (lo + open).min(1.0),
        cylinders_used: used,
    };
    if mass.width() > tol {
        return Err(Error::RefinementCap { partial: mass, tol });
    }
    Ok(mass)
}

/// Weighted point cloud approximating a measure; `weights` sum to one and
/// `mass_scale` carries the total.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    pub points: PointCloud,
    pub weights: Vec<f64>,
    pub mass_scale: f64,
}

impl DiscreteMeasure {
    pub fn new(points: PointCloud, weights: Vec<f64>, mass_scale: f64) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                found: weights.len(),
            });
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidArgument("weights must be nonnegative".into()));
        }
        Ok(DiscreteMeasure {
            points,
            weights,
            mass_scale,
        })
    }

    /// Normalizes raw weights; the sum becomes `mass_scale`.
    pub fn from_raw(points: PointCloud, raw: Vec<f64>) -> Result<Self> {
        let total: f64 = raw.iter().sum();
        let weights = if total > 0.0 {
            raw.iter().map(|w| w / total).collect()
        } else {
            raw
        };
        DiscreteMeasure::new(points, weights, total)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.mass_scale * self.weights.iter().sum::<f64>()
    }

    /// Mass of the points inside `window`, in `mass_scale` units.
    pub fn window_mass(&self, window: &Window) -> f64 {
        self.mass_scale
            * self
                .points
                .points()
                .iter()
                .zip(&self.weights)
                .filter(|(p, _)| window.contains(p))
                .map(|(_, w)| w)
                .sum::<f64>()
    }

    /// Points carrying positive weight.
    pub fn support(&self) -> PointCloud {
        let pts = self
            .points
            .points()
            .iter()
            .zip(&self.weights)
            .filter(|(_, w)| **w > 0.0)
            .map(|(p, _)| p.clone())
            .collect();
        PointCloud::new(self.points.dim(), pts, self.points.covering_radius()).expect("support keeps the dimension")
    }
}

/// The map `y ↦ scale · rot(y − origin)` used to view the attractor.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewMap {
    pub scale: f64,
    pub rot: Rotation,
    pub origin: Vector,
}

impl ViewMap {
    pub fn identity(dim: usize) -> Self {
        ViewMap {
            scale: 1.0,
            rot: Rotation::identity(dim),
            origin: Vector::zeros(dim),
        }
    }

    pub fn apply(&self, y: &Vector) -> Vector {
        self.rot.apply(&(y - &self.origin)).scaled(self.scale)
    }
}

/// One leaf of a sampled cylinder tree.
#[derive(Clone, Debug)]
pub struct Leaf {
    pub word: Word,
    pub point: Vector,
    pub weight: f64,
}

/// Depth-first, lexicographic leaves of the attractor under `view`, each with image
/// diameter at most `eps`; cylinders whose image misses `clip` are pruned and emitted
/// points are clipped (with [`CLIP_SLACK`]).
pub fn sample_leaves(
    system: &IfsSystem,
    view: &ViewMap,
    clip: Option<&Window>,
    eps: f64,
    cap: usize,
) -> Result<Vec<Leaf>> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument("resolution must be positive".into()));
    }
    let (_, cover_r) = system.cover_ball();
    let slack = clip.map(|w| CLIP_SLACK * (1.0 + w.max_abs())).unwrap_or(0.0);
    let grown = clip
        .map(|w| -> Result<ConvexRegion> {
            Ok(ConvexRegion::Window(Window::new(
                w.lo().axpy(-slack, &Vector::splat(w.dim(), 1.0)),
                w.hi().axpy(slack, &Vector::splat(w.dim(), 1.0)),
                crate::geometry::Closure::Closed,
            )?))
        })
        .transpose()?;
    let mut out = Vec::new();
    let mut stack = vec![(CylinderMap::identity(system.dim()), Word::empty(), 1.0f64)];
    while let Some((map, word, weight)) = stack.pop() {
        if let Some(region) = &grown {
            let (c, r) = system.cover(&map);
            let image = view.apply(&c);
            if classify(region, &image, r * view.scale)? == Classification::Outside {
                continue;
            }
        }
        if 2.0 * cover_r * map.scale * view.scale <= eps || word.len() >= DEPTH_CAP {
            let point = view.apply(&map.apply(system.anchor()));
            if clip.is_none_or(|w| w.contains_with_slack(&point, slack)) {
                if out.len() >= cap {
                    return Err(Error::LeafCap { cap });
                }
                out.push(Leaf { word, point, weight });
            }
            continue;
        }
        let depth = word.len() + 1;
        for i in (0..system.len()).rev() {
            let mut child_word = word.clone();
            child_word.push(i as u8);
            stack.push((system.child(&map, i, depth), child_word, weight * system.weights()[i]));
        }
    }
    Ok(out)
}

/// Leaf cylinders of diameter ≤ ε, one anchor point each, weighted `(λ^w)^s`.
pub fn discrete_measure(system: &IfsSystem, resolution: f64) -> Result<DiscreteMeasure> {
    discrete_measure_with_cap(system, resolution, LEAF_CAP)
}

pub fn discrete_measure_with_cap(system: &IfsSystem, resolution: f64, cap: usize) -> Result<DiscreteMeasure> {
    let leaves = sample_leaves(system, &ViewMap::identity(system.dim()), None, resolution, cap)?;
    let (points, raw): (Vec<_>, Vec<_>) = leaves.into_iter().map(|l| (l.point, l.weight)).unzip();
    let total: f64 = raw.iter().sum();
    let weights = raw.iter().map(|w| w / total).collect();
    DiscreteMeasure::new(PointCloud::new(system.dim(), points, resolution)?, weights, 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub radii: Vec<f64>,
    pub masses: Vec<RegionMass>,
    /// `(2r)^{−s} · μ̂(B(x, r))`; proportional to the `s`-density ratios with factor `H^s(C)`.
    pub ratios: Vec<f64>,
    pub theta_lower_est: f64,
    pub theta_upper_est: f64,
    pub normalization: String,
}

/// Relative tolerance for ball masses in density scans.
pub const DENSITY_REL_TOL: f64 = 1e-9;

pub fn density_profile(system: &IfsSystem, x: &Coding, radii: &[f64]) -> Result<DensityReport> {
    if radii.is_empty() {
        return Err(Error::InvalidArgument("no radii".into()));
    }
    if radii.iter().any(|r| !(*r > 0.0)) || radii.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidArgument(
            "radii must be positive and sorted decreasing".into(),
        ));
    }
    let s = system.dim_s();
    let center = pi_eval(system, x, 1e-15)?.point;
    let mut masses = Vec::with_capacity(radii.len());
    let mut ratios = Vec::with_capacity(radii.len());
    for &r in radii {
        let norm = (2.0 * r).powf(s);
        let tol = DENSITY_REL_TOL * norm.min(1.0);
        let mass = region_mass(system, &ConvexRegion::ball(center.clone(), r)?, tol)?;
        ratios.push(mass.mid() / norm);
        masses.push(mass);
    }
    let theta_lower_est = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let theta_upper_est = ratios.iter().copied().fold(0.0, f64::max);
    Ok(DensityReport {
        radii: radii.to_vec(),
        masses,
        ratios,
        theta_lower_est,
        theta_upper_est,
        normalization: "masses are normalized by H^s(C); true densities are these ratios times H^s(C)".into(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub tau_est: f64,
    pub samples: usize,
    pub scales: Vec<f64>,
    pub excluded_scales: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Random eventually periodic coding with a short preperiod and period.
pub fn random_coding(rng: &mut impl Rng, maps: usize, max_pre: usize, max_period: usize) -> Coding {
    let pre_len = rng.gen_range(0..=max_pre);
    let per_len = rng.gen_range(1..=max_period.max(1));
    let pre = (0..pre_len).map(|_| rng.gen_range(0..maps) as u8).collect();
    let per = (0..per_len).map(|_| rng.gen_range(0..maps) as u8).collect();
    Coding::new(Word::new(pre), Word::new(per)).expect("period is nonempty")
}

/// Samples `μ̂(B(π(x), r)) / r^s` over random codings and scales.
pub fn regularity_scan(system: &IfsSystem, n_samples: usize, scales: &[f64], seed: u64) -> Result<RegularityReport> {
    system.require_ssc()?;
    if n_samples == 0 {
        return Err(Error::NoSamples);
    }
    let diam = system.diameter_upper_bound(8) * (1.0 + 1e-9);
    let (used, excluded): (Vec<f64>, Vec<f64>) = scales.iter().partition(|&&r| r > 0.0 && r <= diam);
    let mut warnings = Vec::new();
    if !excluded.is_empty() {
        warnings.push(format!(
            "excluded {} scale(s) above the attractor diameter estimate {diam:.6}",
            excluded.len()
        ));
    }
    if used.is_empty() {
        return Err(Error::InvalidArgument("no usable scales".into()));
    }
    let s = system.dim_s();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tau: f64 = 1.0;
    for _ in 0..n_samples {
        let x = random_coding(&mut rng, system.len(), 12, 4);
        let center = pi_eval(system, &x, 1e-15)?.point;
        for &r in &used {
            let norm = r.powf(s);
            let mass = region_mass(system, &ConvexRegion::ball(center.clone(), r)?, 1e-6 * norm)?;
            let ratio = mass.mid() / norm;
            tau = tau.max(ratio).max(1.0 / ratio);
        }
    }
    Ok(RegularityReport {
        tau_est: tau,
        samples: n_samples,
        scales: used,
        excluded_scales: excluded,
        warnings,
    })
}

/// Masses of the slabs `{ y : |normal·y − offset| ≤ ε }` intersected with a box around the attractor.
///
/// Intervals are tightened across the list using slab nesting, so both ends are
/// monotone in ε.
pub fn hyperplane_mass_decay(
    system: &IfsSystem,
    normal: &Vector,
    offset: f64,
    eps_list: &[f64],
    tol: f64,
) -> Result<Vec<RegionMass>> {
    system.require_ssc()?;
    if normal.dim() != system.dim() {
        return Err(Error::DimensionMismatch {
            expected: system.dim(),
            found: normal.dim(),
        });
    }
    let plane = HalfSpace::new(normal.clone(), offset)?;
    let leaves = sample_leaves(
        system,
        &ViewMap::identity(system.dim()),
        None,
        system.diameter_bound() / 64.0,
        LEAF_CAP,
    )?;
    if leaves.iter().all(|l| plane.signed_distance(&l.point).abs() <= 1e-12) {
        return Err(Error::DegenerateInHyperplane);
    }
    if eps_list.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::InvalidArgument("slab half-widths must be positive".into()));
    }
    let (center, radius) = system.cover_ball();
    let d = system.dim();
    let pad = radius * 1.01 + 1e-12;
    let mut masses = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let mut halfspaces = vec![
            HalfSpace {
                normal: plane.normal.clone(),
                offset: plane.offset + eps,
            },
            HalfSpace {
                normal: -&plane.normal,
                offset: -plane.offset + eps,
            },
        ];
        for axis in 0..d {
            let mut e = vec![0.0; d];
            e[axis] = 1.0;
            halfspaces.push(HalfSpace::new(Vector::new(e.clone()), center[axis] + pad)?);
            e[axis] = -1.0;
            halfspaces.push(HalfSpace::new(Vector::new(e), -(center[axis] - pad))?);
        }
        let bound = (center.clone(), pad * (d as f64).sqrt() * 1.0001);
        let region = ConvexRegion::Polytope(Polytope::new(halfspaces, Some(bound))?);
        masses.push(region_mass(system, &region, tol)?);
    }
    let mut order: Vec<usize> = (0..eps_list.len()).collect();
    order.sort_by(|&a, &b| eps_list[a].total_cmp(&eps_list[b]));
    // Narrower slabs are subsets: push lower bounds up and upper bounds down.
    for k in 1..order.len() {
        let (small, large) = (order[k - 1], order[k]);
        masses[large].lo = masses[large].lo.max(masses[small].lo);
    }
    for k in (1..order.len()).rev() {
        let (small, large) = (order[k - 1], order[k]);
        masses[small].hi = masses[small].hi.min(masses[large].hi);
    }
    Ok(masses)
}
