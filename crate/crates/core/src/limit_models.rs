//! Limit models of blow-ups at a coded point: exact views along residue classes of
//! zoom depth when the period's rotation has finite order, numeric clustering otherwise.

use std::ops::Range;

use rayon::prelude::*;
use serde::Serialize;

use crate::coding::{lambda_h_products, Coding};
use crate::error::{Error, Result};
use crate::geometry::{hausdorff_distance, PointCloud, Rotation, RotationProduct, Window};
use crate::ifs::IfsSystem;
use crate::zoom::{compute_r, rescaled_cloud, view_cloud, zoom_window, AffineView};

pub const DEFAULT_Q_MAX: usize = 256;
pub const ROTATION_TOL: f64 = 1e-9;

/// Smallest `q ≤ q_max` with `h^q` within `tol` of the identity (max entry).
pub fn rotation_order(h: &Rotation, tol: f64, q_max: usize) -> Option<usize> {
    let mut power = RotationProduct::new(h.dim());
    for q in 1..=q_max {
        power.push(h);
        if power.current().deviation_from(&Rotation::identity(h.dim())) <= tol {
            return Some(q);
        }
    }
    None
}

/// One limit model, realized exactly on `view.window` by an affine view of `C`.
#[derive(Clone, Debug, Serialize)]
pub struct LimitModelRep {
    pub alpha: f64,
    /// Residue classes of zoom depth (mod `period_steps`) that produce this model.
    pub residues: Vec<usize>,
    pub period_steps: usize,
    pub rotation_order: usize,
    /// Zoom depth at which the view was built.
    pub depth: usize,
    pub view: AffineView,
    pub certified: bool,
    #[serde(skip)]
    pub cloud: PointCloud,
}

#[derive(Clone, Debug, Serialize)]
pub struct RecurrenceCluster {
    #[serde(skip)]
    pub representative_cloud: PointCloud,
    pub members: Vec<usize>,
    pub spread: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LimitModelSet {
    pub models: Vec<LimitModelRep>,
    /// Numeric clusters returned when the period rotation has no detected finite order.
    pub clusters: Vec<RecurrenceCluster>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct LimitModelOptions {
    pub eps: f64,
    pub cluster_tol: f64,
    pub q_max: usize,
    pub depths: Range<usize>,
}

impl LimitModelOptions {
    pub fn new(eps: f64, depths: Range<usize>) -> Self {
        LimitModelOptions {
            eps,
            cluster_tol: 10.0 * eps,
            q_max: DEFAULT_Q_MAX,
            depths,
        }
    }
}

/// Rotation of the period word and the number of zoom steps after which views repeat.
pub fn period_cycle(system: &IfsSystem, x: &Coding, q_max: usize) -> Result<(Rotation, Option<usize>)> {
    let period = x.period().len();
    let start = x.preperiod().len();
    let (_, h) = lambda_h_products(system, x, start, start + period)?;
    let q = rotation_order(&h, ROTATION_TOL, q_max);
    Ok((h, q))
}

/// Distinct limit models of `α λ_n(x̲)(C − π(x)) ∩ window` along residue classes of `n`.
pub fn enumerate_limit_models(
    system: &IfsSystem,
    x: &Coding,
    window: &Window,
    alphas: &[f64],
    opts: &LimitModelOptions,
) -> Result<LimitModelSet> {
    system.require_ssc()?;
    x.check_alphabet(system.len())?;
    if alphas.is_empty() {
        return Err(Error::InvalidArgument("no alpha values".into()));
    }
    let alpha_cap = 1.0 / system.beta_min();
    if let Some(a) = alphas.iter().find(|a| !(**a >= 1.0 && **a < alpha_cap)) {
        return Err(Error::InvalidArgument(format!("alpha {a} outside [1, {alpha_cap})")));
    }
    let (_, order) = period_cycle(system, x, opts.q_max)?;
    let Some(q) = order else {
        let clusters = recurrence_scan(system, x, window, opts.depths.clone(), opts.eps, opts.cluster_tol)?;
        return Ok(LimitModelSet {
            models: Vec::new(),
            clusters,
            warnings: vec![format!(
                "period rotation has no order ≤ {}; returning uncertified numeric clusters",
                opts.q_max
            )],
        });
    };
    let steps = x.period().len() * q;
    let pre = x.preperiod().len() as i64;
    let mut candidates = Vec::new();
    for &alpha in alphas {
        let inner = Window::new(
            window.lo().scaled(1.0 / alpha),
            window.hi().scaled(1.0 / alpha),
            window.closure(),
        )?;
        let n_reach = inner.max_abs();
        let r = compute_r(system, n_reach)?.r;
        for residue in 0..steps {
            let depth = opts
                .depths
                .clone()
                .find(|&n| n % steps == residue && n as i64 + r >= pre.max(0));
            let Some(depth) = depth else { continue };
            let base = zoom_window(system, x, depth, n_reach)?;
            let view = AffineView {
                window: inner.with_closure(crate::geometry::Closure::Closed),
                ..base
            }
            .dilated(alpha)?;
            candidates.push((alpha, residue, depth, view));
        }
    }
    let clouds: Vec<PointCloud> = candidates
        .par_iter()
        .map(|(_, _, _, view)| view_cloud(system, view, opts.eps))
        .collect::<Result<_>>()?;
    let mut models: Vec<LimitModelRep> = Vec::new();
    for ((alpha, residue, depth, view), cloud) in candidates.into_iter().zip(clouds) {
        let mut merged = false;
        for m in models.iter_mut().filter(|m| m.alpha == alpha) {
            if same_cloud(&m.cloud, &cloud, opts.cluster_tol)? {
                m.residues.push(residue);
                merged = true;
                break;
            }
        }
        if !merged {
            models.push(LimitModelRep {
                alpha,
                residues: vec![residue],
                period_steps: steps,
                rotation_order: q,
                depth,
                view,
                certified: true,
                cloud,
            });
        }
    }
    let mut warnings = Vec::new();
    if models.is_empty() {
        warnings.push("no zoom depth in range reaches the periodic tail for this window".into());
    }
    Ok(LimitModelSet {
        models,
        clusters: Vec::new(),
        warnings,
    })
}

fn same_cloud(a: &PointCloud, b: &PointCloud, tol: f64) -> Result<bool> {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => Ok(true),
        (false, false) => Ok(hausdorff_distance(a, b)? <= tol),
        _ => Ok(false),
    }
}

/// Model matching residue `residue` of zoom depth.
pub fn model_for_residue(set: &LimitModelSet, alpha: f64, residue: usize) -> Option<&LimitModelRep> {
    set.models
        .iter()
        .find(|m| m.alpha == alpha && m.residues.contains(&(residue % m.period_steps)))
}

/// Clusters rescaled clouds at integer zoom depths by Hausdorff distance.
pub fn recurrence_scan(
    system: &IfsSystem,
    x: &Coding,
    window: &Window,
    depths: Range<usize>,
    eps: f64,
    cluster_tol: f64,
) -> Result<Vec<RecurrenceCluster>> {
    system.require_ssc()?;
    let depth_list: Vec<usize> = depths.collect();
    let clouds: Vec<PointCloud> = depth_list
        .par_iter()
        .map(|&n| rescaled_cloud(system, x, n, window, eps))
        .collect::<Result<_>>()?;
    let mut clusters: Vec<(RecurrenceCluster, Vec<usize>)> = Vec::new();
    for (i, cloud) in clouds.iter().enumerate() {
        let mut home = None;
        for (k, (cluster, _)) in clusters.iter().enumerate() {
            if same_cloud(&cluster.representative_cloud, cloud, cluster_tol)? {
                home = Some(k);
                break;
            }
        }
        match home {
            Some(k) => {
                let (cluster, idx) = &mut clusters[k];
                for &j in idx.iter() {
                    let d = if clouds[j].is_empty() || cloud.is_empty() {
                        0.0
                    } else {
                        hausdorff_distance(&clouds[j], cloud)?
                    };
                    cluster.spread = cluster.spread.max(d);
                }
                cluster.members.push(depth_list[i]);
                idx.push(i);
            }
            None => clusters.push((
                RecurrenceCluster {
                    representative_cloud: cloud.clone(),
                    members: vec![depth_list[i]],
                    spread: 0.0,
                },
                vec![i],
            )),
        }
    }
    Ok(clusters.into_iter().map(|(c, _)| c).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Closure, Vector};
    use crate::ifs::{validate_ifs, Similitude};

    fn cantor() -> IfsSystem {
        validate_ifs(vec![
            Similitude::scaling(1.0 / 3.0, vec![0.0]).unwrap(),
            Similitude::scaling(1.0 / 3.0, vec![2.0 / 3.0]).unwrap(),
        ])
        .unwrap()
        .certified(8)
        .unwrap()
    }

    fn rotating(angle: f64) -> IfsSystem {
        validate_ifs(vec![
            Similitude::new(0.4, Rotation::planar(angle), Vector::zeros(2)).unwrap(),
            Similitude::scaling(0.4, vec![0.6, 0.0]).unwrap(),
        ])
        .unwrap()
        .certified(8)
        .unwrap()
    }

    fn c(text: &str) -> Coding {
        text.parse().unwrap()
    }

    fn wide() -> Window {
        Window::interval(-1.0, 1.0, Closure::Closed).unwrap()
    }

    #[test]
    fn rotation_order_examples() {
        assert_eq!(rotation_order(&Rotation::identity(3), 1e-9, 10), Some(1));
        assert_eq!(
            rotation_order(&Rotation::planar(std::f64::consts::FRAC_PI_2), 1e-9, 10),
            Some(4)
        );
        assert_eq!(rotation_order(&Rotation::planar(1.0), 1e-9, 100), None);
    }

    #[test]
    fn cantor_models() {
        let sys = cantor();
        let opts = LimitModelOptions::new(1e-3, 0..16);
        let set = enumerate_limit_models(&sys, &c("(0)"), &wide(), &[1.0], &opts).unwrap();
        assert_eq!(set.models.len(), 1);
        let cloud = &set.models[0].cloud;
        assert!(cloud.points().iter().all(|p| p[0] >= -1e-9));
        assert!(cloud.distance_to(&Vector::zeros(1)) <= 1e-3);

        let set = enumerate_limit_models(&sys, &c("(01)"), &wide(), &[1.0], &opts).unwrap();
        assert_eq!(set.models.len(), 2);
        assert!(hausdorff_distance(&set.models[0].cloud, &set.models[1].cloud).unwrap() > 0.1);
        for m in &set.models {
            assert!(m.certified);
            assert!(m.cloud.distance_to(&Vector::zeros(1)) <= 1e-3);
        }
    }

    #[test]
    fn rot90_models_cycle() {
        let sys = rotating(std::f64::consts::FRAC_PI_2);
        let window = Window::centered_cube(2, 1.0).unwrap();
        let opts = LimitModelOptions::new(1e-3, 0..16);
        let set = enumerate_limit_models(&sys, &c("(0)"), &window, &[1.0], &opts).unwrap();
        assert_eq!(set.models.len(), 4);
        let turn = Rotation::planar(std::f64::consts::FRAC_PI_2);
        let turned = set.models[0].cloud.map_points(|p| turn.apply(p), 1e-3);
        let matches = set.models[1..]
            .iter()
            .filter(|m| hausdorff_distance(&turned, &m.cloud).unwrap() <= 2e-3)
            .count();
        assert_eq!(matches, 1);
    }

    #[test]
    fn recurrence_examples() {
        let sys = cantor();
        let one = recurrence_scan(&sys, &c("(0)"), &wide(), 1..11, 1e-3, 1e-2).unwrap();
        assert_eq!(one.len(), 1);
        assert!(one[0].spread <= 2e-3);
        let two = recurrence_scan(&sys, &c("(01)"), &wide(), 1..11, 1e-3, 1e-2).unwrap();
        assert_eq!(two.len(), 2);
    }

    #[test]
    fn irrational_rotation_falls_back() {
        let sys = rotating(1.0);
        let window = Window::centered_cube(2, 1.0).unwrap();
        let opts = LimitModelOptions::new(1e-2, 1..25);
        let set = enumerate_limit_models(&sys, &c("(0)"), &window, &[1.0], &opts).unwrap();
        assert!(set.models.is_empty());
        assert!(!set.warnings.is_empty());
        assert!(set.clusters.len() > 10, "{}", set.clusters.len());
    }
}
