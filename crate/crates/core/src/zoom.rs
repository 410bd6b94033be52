//! Zooming into the attractor at a coded point, and the window-locality
//! identity: inside `[−N, N]^d` the blow-up `λ_w(x̲)(C − π(x))` equals an affine
//! image of `C` based at a shifted coding.

use serde::{Deserialize, Serialize};

use crate::coding::{lambda_h_products, pi_eval, shift, Coding};
use crate::error::{Error, Result};
use crate::geometry::{Closure, PointCloud, Rotation, Window};
use crate::ifs::IfsSystem;
use crate::measure::{sample_leaves, DiscreteMeasure, Leaf, ViewMap, LEAF_CAP};

/// Which side of `N√d` the gap bound fell on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RBranch {
    TLeNsqrtd,
    TGtNsqrtd,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RNResult {
    pub r: i64,
    pub t_used: f64,
    pub branch: RBranch,
}

/// Values this close below an integer are snapped up before flooring.
pub const R_SNAP: f64 = 1e-9;

/// Offset `r(N)` such that points of `C` within `N√d / λ_w` of `π(x)` share
/// their first `w + r(N)` digits with `x`.
pub fn compute_r(system: &IfsSystem, n: f64) -> Result<RNResult> {
    let cert = *system.require_ssc()?;
    if !(n > 0.0) {
        return Err(Error::InvalidArgument("N must be positive".into()));
    }
    let t = cert.t_lo;
    if !(t > 0.0) {
        return Err(Error::SscNotCertified {
            depth: cert.depth,
            certificate: cert,
        });
    }
    let reach = n * (system.dim() as f64).sqrt();
    let (beta, branch) = if t <= reach {
        (system.beta_max(), RBranch::TLeNsqrtd)
    } else {
        (system.beta_min(), RBranch::TGtNsqrtd)
    };
    let v = (reach / t).ln() / beta.ln();
    Ok(RNResult {
        r: (v + R_SNAP).floor() as i64,
        t_used: t,
        branch,
    })
}

/// Exact description of a zoomed window: the set `scale · rot(C − π(base)) ∩ window`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineView {
    pub scale: f64,
    pub rot: Rotation,
    pub base: Coding,
    pub window: Window,
    pub depth_used: usize,
}

impl AffineView {
    pub fn view_map(&self, system: &IfsSystem) -> Result<ViewMap> {
        Ok(ViewMap {
            scale: self.scale,
            rot: self.rot.clone(),
            origin: pi_eval(system, &self.base, 1e-15)?.point,
        })
    }

    /// The view of `α · (this set)` on the window `α · window`.
    pub fn dilated(&self, alpha: f64) -> Result<AffineView> {
        Ok(AffineView {
            scale: self.scale * alpha,
            window: Window::new(
                self.window.lo().scaled(alpha),
                self.window.hi().scaled(alpha),
                self.window.closure(),
            )?,
            ..self.clone()
        })
    }
}

/// `λ_w^{w+r}(x̲)`: the scale carried by digits between `w + r` and `w`.
fn relative_scale(system: &IfsSystem, x: &Coding, w: usize, k: usize) -> Result<f64> {
    if k <= w {
        Ok(1.0 / lambda_h_products(system, x, k, w)?.0)
    } else {
        Ok(lambda_h_products(system, x, w, k)?.0)
    }
}

pub fn zoom_window(system: &IfsSystem, x: &Coding, w: usize, n: f64) -> Result<AffineView> {
    x.check_alphabet(system.len())?;
    let rn = compute_r(system, n)?;
    let k = w as i64 + rn.r;
    if k < 0 {
        return Err(Error::WindowTooLarge { depth: k });
    }
    let k = k as usize;
    Ok(AffineView {
        scale: relative_scale(system, x, w, k)?,
        rot: lambda_h_products(system, x, 0, k)?.1,
        base: shift(x, k),
        window: Window::centered_cube(system.dim(), n)?,
        depth_used: k,
    })
}

/// Smallest zoom depth at which `window` can be served by [`zoom_window`].
pub fn min_view_depth(system: &IfsSystem, window: &Window) -> Result<usize> {
    let r = compute_r(system, window.max_abs())?.r;
    Ok((-r).max(0) as usize)
}

/// Leaves of the view's set at resolution `eps`, weights relative to `C`'s leaves.
pub fn view_leaves(system: &IfsSystem, view: &AffineView, eps: f64) -> Result<Vec<Leaf>> {
    let map = view.view_map(system)?;
    sample_leaves(system, &map, Some(&view.window), eps, LEAF_CAP)
}

pub fn view_cloud(system: &IfsSystem, view: &AffineView, eps: f64) -> Result<PointCloud> {
    cloud_from(system, view_leaves(system, view, eps)?, eps)
}

/// The rescaled natural measure seen through `view`: leaf weights times `scale^s`.
pub fn view_measure(system: &IfsSystem, view: &AffineView, eps: f64) -> Result<DiscreteMeasure> {
    let leaves = view_leaves(system, view, eps)?;
    let factor = view.scale.powf(system.dim_s());
    let raw = leaves.iter().map(|l| l.weight * factor).collect();
    let points = leaves.into_iter().map(|l| l.point).collect();
    DiscreteMeasure::from_raw(PointCloud::new(system.dim(), points, eps)?, raw)
}

/// `λ_w(x̲)(C − π(x)) ∩ window` sampled by deep cylinders of `C` itself.
pub fn direct_rescaled_cloud(
    system: &IfsSystem,
    x: &Coding,
    w: usize,
    window: &Window,
    eps: f64,
) -> Result<PointCloud> {
    cloud_from(system, direct_leaves(system, x, w, window, eps)?, eps)
}

pub(crate) fn direct_leaves(system: &IfsSystem, x: &Coding, w: usize, window: &Window, eps: f64) -> Result<Vec<Leaf>> {
    x.check_alphabet(system.len())?;
    let (lambda, _) = lambda_h_products(system, x, 0, w)?;
    let map = ViewMap {
        scale: 1.0 / lambda,
        rot: Rotation::identity(system.dim()),
        origin: pi_eval(system, x, 1e-15)?.point,
    };
    sample_leaves(system, &map, Some(window), eps, LEAF_CAP)
}

/// `λ_w(x̲)(C − π(x)) ∩ window` with covering radius ≤ `eps`; goes through
/// [`zoom_window`] when the window fits, else samples directly.
pub fn rescaled_cloud(system: &IfsSystem, x: &Coding, w: usize, window: &Window, eps: f64) -> Result<PointCloud> {
    system.require_ssc()?;
    let n = window.max_abs();
    let view = match zoom_window(system, x, w, n) {
        Ok(v) => Some(v),
        Err(Error::WindowTooLarge { .. }) => None,
        Err(e) => return Err(e),
    };
    match view {
        Some(view) => {
            let view = AffineView {
                window: window.with_closure(Closure::Closed),
                ..view
            };
            view_cloud(system, &view, eps)
        }
        None => direct_rescaled_cloud(system, x, w, window, eps),
    }
}

fn cloud_from(system: &IfsSystem, leaves: Vec<Leaf>, eps: f64) -> Result<PointCloud> {
    PointCloud::new(system.dim(), leaves.into_iter().map(|l| l.point).collect(), eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::hausdorff_distance;
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

    fn rot90() -> IfsSystem {
        validate_ifs(vec![
            Similitude::new(
                0.4,
                Rotation::planar(std::f64::consts::FRAC_PI_2),
                crate::geometry::Vector::new(vec![0.0, 0.0]),
            )
            .unwrap(),
            Similitude::scaling(0.4, vec![0.6, 0.0]).unwrap(),
        ])
        .unwrap()
        .certified(8)
        .unwrap()
    }

    fn c(text: &str) -> Coding {
        text.parse().unwrap()
    }

    #[test]
    fn r_examples() {
        let sys = cantor();
        assert_eq!(compute_r(&sys, 1.0).unwrap().r, -1);
        assert_eq!(compute_r(&sys, 3.0).unwrap().r, -2);
        let gap = validate_ifs(vec![
            Similitude::scaling(0.25, vec![0.0]).unwrap(),
            Similitude::scaling(0.25, vec![0.75]).unwrap(),
        ])
        .unwrap()
        .certified(4)
        .unwrap();
        let rn = compute_r(&gap, 1.0).unwrap();
        assert_eq!(rn.r, -1);
        assert_eq!(rn.branch, RBranch::TLeNsqrtd);
        let uncertified = validate_ifs(cantor().maps().to_vec()).unwrap();
        assert!(matches!(compute_r(&uncertified, 1.0), Err(Error::MissingCertificate)));
    }

    #[test]
    fn zoom_examples() {
        let sys = cantor();
        let v = zoom_window(&sys, &c("(0)"), 5, 1.0).unwrap();
        assert!((v.scale - 3.0).abs() < 1e-12);
        assert!(v.rot.is_identity());
        assert_eq!(v.base, c("(0)"));
        assert_eq!(v.depth_used, 4);
        let v = zoom_window(&sys, &c("(1)"), 3, 1.0).unwrap();
        assert!((v.scale - 3.0).abs() < 1e-12);
        assert_eq!(v.base, c("(1)"));
        assert!(matches!(
            zoom_window(&sys, &c("(0)"), 0, 1.0),
            Err(Error::WindowTooLarge { depth: -1 })
        ));
    }

    #[test]
    fn view_and_direct_agree() {
        let eps = 1e-3;
        let sys = cantor();
        for (x, w) in [("(0)", 5), ("(1)", 3), ("(01)", 4), ("1(011)", 6)] {
            let x = c(x);
            let view = zoom_window(&sys, &x, w, 1.0).unwrap();
            let a = view_cloud(&sys, &view, eps).unwrap();
            let b = direct_rescaled_cloud(&sys, &x, w, &view.window, eps).unwrap();
            assert!(hausdorff_distance(&a, &b).unwrap() <= 2.0 * eps);
        }
        let sys = rot90();
        let view = zoom_window(&sys, &c("(0)"), 4, 0.5).unwrap();
        let a = view_cloud(&sys, &view, eps).unwrap();
        let b = direct_rescaled_cloud(&sys, &c("(0)"), 4, &view.window, eps).unwrap();
        assert!(hausdorff_distance(&a, &b).unwrap() <= 2.0 * eps);
    }

    #[test]
    fn rescaled_cloud_examples() {
        let sys = cantor();
        let unit = Window::interval(0.0, 1.0, Closure::Closed).unwrap();
        let cloud = rescaled_cloud(&sys, &c("(0)"), 2, &unit, 1.0 / 27.0).unwrap();
        let base = rescaled_cloud(&sys, &c("(0)"), 0, &unit, 1.0 / 27.0).unwrap();
        assert!(hausdorff_distance(&cloud, &base).unwrap() <= 2.0 / 27.0);

        let wide = Window::interval(-1.0, 1.0, Closure::Closed).unwrap();
        let x = c("(01)");
        let cloud = rescaled_cloud(&sys, &x, 1, &wide, 1e-3).unwrap();
        // Brute force: every depth-12 cylinder anchor of C, rescaled about 1/4.
        let mut pts = Vec::new();
        for word in 0..(1u32 << 12) {
            let mut v = 0.0;
            for i in 0..12i32 {
                if word >> (11 - i) & 1 == 1 {
                    v += 2.0 * 3f64.powi(-i - 1);
                }
            }
            let y = 3.0 * (v - 0.25);
            if (-1.0..=1.0).contains(&y) {
                pts.push(y);
            }
        }
        let brute = PointCloud::from_scalars(&pts);
        assert!(hausdorff_distance(&cloud, &brute).unwrap() <= 2e-3);
    }

    #[test]
    fn view_measure_conserves_mass_at_fixed_points() {
        let sys = cantor();
        for w in [1, 3, 6] {
            let mut view = zoom_window(&sys, &c("(0)"), w, 1.0).unwrap();
            view.window = Window::interval(0.0, 1.0, Closure::Closed).unwrap();
            let m = view_measure(&sys, &view, 1e-3).unwrap();
            assert!((m.total_mass() - 1.0).abs() < 1e-12);
        }
    }
}
