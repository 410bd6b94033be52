//! Numerical harnesses comparing rescaled natural measures at a coded point with
//! the measures carried by limit models.
//!
//! Masses are in normalized units (`μ̂ = H^s⌊C / H^s(C)`), so fitted constants
//! are the tangent constants divided by `H^s(C)`.

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::coding::{lambda_h_products, pi_eval, Coding};
use crate::error::{Error, Result};
use crate::geometry::{hausdorff_distance, transform_region, Closure, ConvexRegion, PointCloud, Vector, Window};
use crate::ifs::IfsSystem;
use crate::limit_models::{enumerate_limit_models, model_for_residue, LimitModelOptions, LimitModelRep};
use crate::measure::{random_coding, region_mass, DiscreteMeasure, RegionMass};
use crate::zoom::{compute_r, direct_leaves, view_measure, zoom_window, AffineView};

/// `μ̂(π(x) + r·A) / r^s` restricted to a window, sampled by cylinder anchors.
#[derive(Clone, Debug)]
pub struct RescaledMeasure {
    pub base: DiscreteMeasure,
    pub center: Coding,
    pub depth: usize,
    pub scale: f64,
    pub exponent: f64,
    pub window: Window,
}

pub fn tangent_sequence(
    system: &IfsSystem,
    x: &Coding,
    depths: Range<usize>,
    window: &Window,
    eps: f64,
) -> Result<Vec<RescaledMeasure>> {
    system.require_ssc()?;
    let s = system.dim_s();
    depths
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&n| {
            let (scale, _) = lambda_h_products(system, x, 0, n)?;
            let base = match zoom_window(system, x, n, window.max_abs()) {
                Ok(view) => view_measure(
                    system,
                    &AffineView {
                        window: window.with_closure(Closure::Closed),
                        ..view
                    },
                    eps,
                )?,
                Err(Error::WindowTooLarge { .. }) => {
                    let leaves = direct_leaves(system, x, n, window, eps)?;
                    let raw = leaves.iter().map(|l| l.weight / scale.powf(s)).collect();
                    let points = leaves.into_iter().map(|l| l.point).collect();
                    DiscreteMeasure::from_raw(PointCloud::new(system.dim(), points, eps)?, raw)?
                }
                Err(e) => return Err(e),
            };
            Ok(RescaledMeasure {
                base,
                center: x.clone(),
                depth: n,
                scale,
                exponent: s,
                window: window.clone(),
            })
        })
        .collect()
}

/// Relative accuracy used for cell masses in the harnesses.
pub const CELL_REL_TOL: f64 = 1e-8;

/// Absolute accuracy (rescaled units) below which cell refinement stops.
pub const CELL_ABS_TOL: f64 = 1e-10;

/// Mass of `region` times `factor`, refined until the interval is relatively tight
/// or narrower than [`CELL_ABS_TOL`]. Hitting the refinement cap keeps the
/// certified partial interval.
fn relative_mass(system: &IfsSystem, region: &ConvexRegion, factor: f64, rel: f64) -> Result<RegionMass> {
    let floor = CELL_ABS_TOL / factor;
    let mut tol = (1e-4 / factor).min(0.5);
    loop {
        let m = match region_mass(system, region, tol.max(floor)) {
            Ok(m) => m,
            Err(Error::RefinementCap { partial, .. }) => return Ok(partial.scaled(factor)),
            Err(e) => return Err(e),
        };
        if m.hi == 0.0 || m.width() <= rel * m.lo || tol <= floor {
            return Ok(m.scaled(factor));
        }
        tol = (rel * m.lo).max(tol * 1e-3).min(tol * 0.5);
    }
}

/// Cell masses of `(α/r)^s μ̂(π(x) + (r/α)·Q)` over `cells`.
pub fn tangent_cell_masses(
    system: &IfsSystem,
    x: &Coding,
    depth: usize,
    alpha: f64,
    cells: &[Window],
    rel: f64,
) -> Result<Vec<RegionMass>> {
    let center = pi_eval(system, x, 1e-15)?.point;
    let (r, _) = lambda_h_products(system, x, 0, depth)?;
    let step = r / alpha;
    let factor = step.powf(-system.dim_s());
    cells
        .par_iter()
        .map(|cell| {
            let region = ConvexRegion::Window(Window::new(
                center.axpy(step, cell.lo()),
                center.axpy(step, cell.hi()),
                cell.closure(),
            )?);
            relative_mass(system, &region, factor, rel)
        })
        .collect()
}

/// Cell masses of the measure `H^s⌊F` (normalized) for the model's view.
pub fn model_cell_masses(system: &IfsSystem, view: &AffineView, cells: &[Window], rel: f64) -> Result<Vec<RegionMass>> {
    let origin = pi_eval(system, &view.base, 1e-15)?.point;
    let back = view.rot.transpose();
    let factor = view.scale.powf(system.dim_s());
    cells
        .par_iter()
        .map(|cell| {
            let region = transform_region(&ConvexRegion::Window(cell.clone()), 1.0 / view.scale, &back, &origin)?;
            relative_mass(system, &region, factor, rel)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Verdict {
    Converged { tol: f64 },
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub grid: Vec<Window>,
    pub depths: Vec<usize>,
    /// `mass_table[step][cell]`
    pub mass_table: Vec<Vec<RegionMass>>,
    pub tail_variation: f64,
    pub verdict: Verdict,
}

/// Per-cell certified mass trajectories of a rescaled sequence over a half-open grid.
pub fn weak_convergence_report(
    system: &IfsSystem,
    seq: &[RescaledMeasure],
    grid_cells: usize,
    tol: f64,
) -> Result<ConvergenceReport> {
    let first = seq
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty measure sequence".into()))?;
    let grid = first.window.with_closure(Closure::HalfOpen).grid(grid_cells);
    let mut mass_table = Vec::with_capacity(seq.len());
    for m in seq {
        mass_table.push(tangent_cell_masses(
            system,
            &m.center,
            m.depth,
            1.0,
            &grid,
            CELL_REL_TOL,
        )?);
    }
    Ok(convergence_from_table(
        grid,
        seq.iter().map(|m| m.depth).collect(),
        mass_table,
        tol,
    ))
}

fn convergence_from_table(
    grid: Vec<Window>,
    depths: Vec<usize>,
    mass_table: Vec<Vec<RegionMass>>,
    tol: f64,
) -> ConvergenceReport {
    let tail_variation = match mass_table.len() {
        0 | 1 => 0.0,
        k => mass_table[k - 1]
            .iter()
            .zip(&mass_table[k - 2])
            .map(|(a, b)| a.separation(b))
            .fold(0.0, f64::max),
    };
    let verdict = if tail_variation <= tol {
        Verdict::Converged { tol }
    } else {
        Verdict::Inconclusive
    };
    ConvergenceReport {
        grid,
        depths,
        mass_table,
        tail_variation,
        verdict,
    }
}

/// Which residue class of zoom depths to take the tangent from, and which model to compare against.
#[derive(Clone, Debug)]
pub struct TangentRequest {
    pub residue: usize,
    /// Defaults to `residue`; a different value gives a crossed control.
    pub model_residue: Option<usize>,
    pub alpha: f64,
    /// Deepest zoom used on the tangent side.
    pub max_depth: usize,
    pub eps: f64,
}

impl Default for TangentRequest {
    fn default() -> Self {
        TangentRequest {
            residue: 0,
            model_residue: None,
            alpha: 1.0,
            max_depth: 12,
            eps: 1e-3,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TangentFormulaReport {
    pub c_est: f64,
    pub residual: f64,
    pub cells_compared: usize,
    pub tangent_depths: Vec<usize>,
    pub tail_variation: f64,
    /// Widest cell interval, relative to the largest cell mass.
    pub max_relative_width: f64,
    pub model_residues: Vec<usize>,
    pub period_steps: usize,
    pub verdict: bool,
    pub note: String,
}

fn certified_model(system: &IfsSystem, x: &Coding, window: &Window, req: &TangentRequest) -> Result<LimitModelRep> {
    let opts = LimitModelOptions::new(req.eps, 0..req.max_depth.max(1) * 4 + 1);
    let set = enumerate_limit_models(system, x, window, &[req.alpha], &opts)?;
    let residue = req.model_residue.unwrap_or(req.residue);
    model_for_residue(&set, req.alpha, residue)
        .cloned()
        .ok_or(Error::NoCertifiedModel)
}

/// The two deepest zoom depths `≤ max_depth` in the residue class that the view identity can serve.
fn tangent_depths(
    system: &IfsSystem,
    x: &Coding,
    window: &Window,
    req: &TangentRequest,
    steps: usize,
) -> Result<Vec<usize>> {
    let reach = window.max_abs() / req.alpha;
    let r = compute_r(system, reach)?.r;
    let pre = x.preperiod().len() as i64;
    let mut depths: Vec<usize> = (0..=req.max_depth)
        .filter(|&n| n % steps == req.residue % steps && n as i64 + r >= pre.max(0))
        .collect();
    if depths.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "max_depth {} leaves fewer than two usable depths in residue {} mod {steps}",
            req.max_depth, req.residue
        )));
    }
    Ok(depths.split_off(depths.len() - 2))
}

/// Fits `tangent ≈ c · model` cellwise by least squares on interval midpoints.
///
/// Returns `(c, residual, cells)`: the residual is the worst cellwise gap between
/// the tangent interval and `c` times the model interval, relative to the larger mass.
pub fn fit_constant(tangent: &[RegionMass], model: &[RegionMass]) -> (f64, f64, usize) {
    let pairs: Vec<(&RegionMass, &RegionMass)> = tangent
        .iter()
        .zip(model)
        .filter(|(t, m)| t.hi > 0.0 || m.hi > 0.0)
        .collect();
    let num: f64 = pairs.iter().map(|(t, m)| t.mid() * m.mid()).sum();
    let den: f64 = pairs.iter().map(|(_, m)| m.mid() * m.mid()).sum();
    let c = if den > 0.0 { num / den } else { 0.0 };
    let residual = pairs
        .iter()
        .map(|(t, m)| {
            let fit = m.scaled(c);
            let scale = t.hi.max(fit.hi);
            if scale > 0.0 {
                t.separation(&fit) / scale
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max);
    (c, residual, pairs.len())
}

pub fn verify_tan_formula(
    system: &IfsSystem,
    x: &Coding,
    window: &Window,
    grid_cells: usize,
    tol: f64,
    req: &TangentRequest,
) -> Result<TangentFormulaReport> {
    system.require_ssc()?;
    let model = certified_model(system, x, window, req)?;
    let depths = tangent_depths(system, x, window, req, model.period_steps)?;
    let grid = window.with_closure(Closure::HalfOpen).grid(grid_cells);
    let mut table = Vec::new();
    for &n in &depths {
        table.push(tangent_cell_masses(system, x, n, req.alpha, &grid, CELL_REL_TOL)?);
    }
    let model_masses = model_cell_masses(system, &model.view, &grid, CELL_REL_TOL)?;
    let report = convergence_from_table(grid, depths.clone(), table, tol);
    let limit = report.mass_table.last().expect("two depths");
    let (c_est, residual, cells) = fit_constant(limit, &model_masses);
    let top = limit.iter().chain(&model_masses).map(|m| m.hi).fold(0.0, f64::max);
    let widest = limit.iter().chain(&model_masses).map(|m| m.width()).fold(0.0, f64::max);
    Ok(TangentFormulaReport {
        c_est,
        residual,
        cells_compared: cells,
        tangent_depths: depths,
        tail_variation: report.tail_variation,
        max_relative_width: if top > 0.0 { widest / top } else { 0.0 },
        model_residues: model.residues.clone(),
        period_steps: model.period_steps,
        verdict: residual <= tol && c_est > 0.0,
        note: "masses are normalized by H^s(C); c_est is the tangent constant divided by H^s(C)".into(),
    })
}

/// Hausdorff distance between the support of the deepest rescaled measure in the
/// residue class and the matching limit model's cloud.
pub fn verify_support_identity(
    system: &IfsSystem,
    x: &Coding,
    window: &Window,
    depths: Range<usize>,
    eps: f64,
    req: &TangentRequest,
) -> Result<f64> {
    system.require_ssc()?;
    let req = TangentRequest {
        eps,
        max_depth: depths.end.saturating_sub(1),
        ..req.clone()
    };
    let model = certified_model(system, x, window, &req)?;
    let steps = model.period_steps;
    let n = depths
        .clone()
        .rev()
        .find(|n| n % steps == req.residue % steps)
        .ok_or_else(|| Error::InvalidArgument("no depth in range for this residue".into()))?;
    let leaves = direct_leaves(system, x, n, window, eps)?;
    let support = PointCloud::new(
        system.dim(),
        leaves.into_iter().filter(|l| l.weight > 0.0).map(|l| l.point).collect(),
        eps,
    )?;
    match (support.is_empty(), model.cloud.is_empty()) {
        (true, true) => Ok(0.0),
        (false, false) => hausdorff_distance(&support, &model.cloud),
        _ => Ok(f64::INFINITY),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DensityBracketReport {
    pub l: f64,
    pub samples: usize,
    pub checks: usize,
    pub violations: usize,
    pub theta_lower: f64,
    pub theta_upper: f64,
    pub worst_margin: f64,
}

/// Checks that rescaled cube masses `μ̂(π(x) + r[−l, l]^d)/r^s` stay within
/// `[(2l)^s θ_lo, (2√d l)^s θ_hi]`, where `θ` ranges over scanned ball densities.
pub fn density_ratio_bounds_check(
    system: &IfsSystem,
    samples: usize,
    l: f64,
    seed: u64,
) -> Result<DensityBracketReport> {
    system.require_ssc()?;
    if !(l > 0.0) {
        return Err(Error::InvalidArgument("l must be positive".into()));
    }
    if samples == 0 {
        return Err(Error::NoSamples);
    }
    let s = system.dim_s();
    let d = system.dim();
    let root_d = (d as f64).sqrt();
    let depths = [2usize, 4, 6];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<(Vector, Vec<f64>)> = (0..samples)
        .map(|_| {
            let x = random_coding(&mut rng, system.len(), 8, 3);
            let center = pi_eval(system, &x, 1e-15)?.point;
            let scales = depths
                .iter()
                .map(|&n| Ok(lambda_h_products(system, &x, 0, n)?.0))
                .collect::<Result<Vec<f64>>>()?;
            Ok((center, scales))
        })
        .collect::<Result<_>>()?;
    let rel = 1e-6;
    let ball = |c: &Vector, rad: f64| -> Result<f64> {
        let norm = (2.0 * rad).powf(s);
        Ok(region_mass(system, &ConvexRegion::ball(c.clone(), rad)?, rel * norm)?.mid() / norm)
    };
    let mut theta_lower = f64::INFINITY;
    let mut theta_upper: f64 = 0.0;
    let mut cubes = Vec::new();
    for (center, scales) in &points {
        for &r in scales {
            for rad in [l * r, root_d * l * r] {
                let theta = ball(center, rad)?;
                theta_lower = theta_lower.min(theta);
                theta_upper = theta_upper.max(theta);
            }
            let cube = Window::new(
                center.axpy(-l * r, &Vector::splat(d, 1.0)),
                center.axpy(l * r, &Vector::splat(d, 1.0)),
                Closure::Closed,
            )?;
            let norm = r.powf(s);
            let m = region_mass(system, &ConvexRegion::Window(cube), rel * norm)?;
            cubes.push((m.lo / norm, m.hi / norm));
        }
    }
    let lower = (2.0 * l).powf(s) * theta_lower;
    let upper = (2.0 * root_d * l).powf(s) * theta_upper;
    let slack = 10.0 * rel * (2.0 * root_d * l).powf(s);
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    for &(lo, hi) in &cubes {
        let margin = (hi - lower).min(upper - lo);
        worst = worst.min(margin);
        if hi < lower - slack || lo > upper + slack {
            violations += 1;
        }
    }
    Ok(DensityBracketReport {
        l,
        samples,
        checks: cubes.len(),
        violations,
        theta_lower,
        theta_upper,
        worst_margin: worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rotation;
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

    fn c(text: &str) -> Coding {
        text.parse().unwrap()
    }

    fn interval(lo: f64, hi: f64) -> Window {
        Window::interval(lo, hi, Closure::Closed).unwrap()
    }

    #[test]
    fn tangent_sequence_mass_is_conserved_at_zero() {
        let sys = cantor();
        let seq = tangent_sequence(&sys, &c("(0)"), 0..8, &interval(0.0, 1.0), 1e-3).unwrap();
        for m in &seq {
            assert!((m.base.total_mass() - 1.0).abs() < 1e-9, "depth {}", m.depth);
        }
    }

    #[test]
    fn convergence_examples() {
        let sys = cantor();
        let seq = tangent_sequence(&sys, &c("(0)"), 3..6, &interval(0.0, 1.0), 1e-2).unwrap();
        let rep = weak_convergence_report(&sys, &seq, 3, 1e-6).unwrap();
        for row in &rep.mass_table {
            assert!(row[0].contains(0.5) || (row[0].mid() - 0.5).abs() < 1e-7);
            assert!(row[1].hi < 1e-8);
            assert!((row[2].mid() - 0.5).abs() < 1e-7);
        }
        assert!(matches!(rep.verdict, Verdict::Converged { .. }));

        let seq = tangent_sequence(&sys, &c("(01)"), 4..10, &interval(-1.0, 1.0), 1e-2).unwrap();
        let all = weak_convergence_report(&sys, &seq, 3, 1e-6).unwrap();
        assert_eq!(all.verdict, Verdict::Inconclusive);
        let even: Vec<_> = seq.iter().filter(|m| m.depth % 2 == 0).cloned().collect();
        let rep = weak_convergence_report(&sys, &even, 3, 1e-6).unwrap();
        assert!(
            matches!(rep.verdict, Verdict::Converged { .. }),
            "{}",
            rep.tail_variation
        );
        assert!(weak_convergence_report(&sys, &[], 3, 1e-6).is_err());
    }

    #[test]
    fn tan_formula_examples() {
        let sys = cantor();
        let rep = verify_tan_formula(
            &sys,
            &c("(0)"),
            &interval(0.0, 1.0),
            3,
            1e-6,
            &TangentRequest::default(),
        )
        .unwrap();
        assert!(rep.verdict && rep.residual <= 1e-6, "{rep:?}");
        let wide = interval(-1.0, 1.0);
        for residue in [0, 1] {
            let req = TangentRequest {
                residue,
                ..TangentRequest::default()
            };
            let rep = verify_tan_formula(&sys, &c("(01)"), &wide, 3, 1e-6, &req).unwrap();
            assert!(rep.residual <= 1e-6, "{rep:?}");
        }
        let crossed = TangentRequest {
            residue: 1,
            model_residue: Some(0),
            ..TangentRequest::default()
        };
        let rep = verify_tan_formula(&sys, &c("(01)"), &wide, 3, 1e-6, &crossed).unwrap();
        assert!(rep.residual > 0.1 && !rep.verdict, "{rep:?}");
    }

    #[test]
    fn support_examples() {
        let sys = cantor();
        let eps = 1e-3;
        let d = verify_support_identity(
            &sys,
            &c("(0)"),
            &interval(-1.0, 1.0),
            1..12,
            eps,
            &TangentRequest::default(),
        )
        .unwrap();
        assert!(d <= 2.0 * eps);
        let wide = interval(-1.0, 1.0);
        let matched = verify_support_identity(
            &sys,
            &c("(01)"),
            &wide,
            1..12,
            eps,
            &TangentRequest {
                residue: 1,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(matched <= 2.0 * eps);
        let crossed = verify_support_identity(
            &sys,
            &c("(01)"),
            &wide,
            1..12,
            eps,
            &TangentRequest {
                residue: 1,
                model_residue: Some(0),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(crossed > 0.1);
    }

    #[test]
    fn density_bracket_examples() {
        let sys = cantor();
        let rep = density_ratio_bounds_check(&sys, 5, 1.0, 3).unwrap();
        assert_eq!(rep.violations, 0);
        assert!(matches!(
            density_ratio_bounds_check(&sys, 5, 0.0, 3),
            Err(Error::InvalidArgument(m)) if m == "l must be positive"
        ));
        let triangle = validate_ifs(
            [(0.0, 0.0), (1.0, 0.0), (0.5, 0.75f64.sqrt())]
                .iter()
                .map(|&(a, b)| {
                    Similitude::new(0.4, Rotation::identity(2), Vector::new(vec![0.6 * a, 0.6 * b])).unwrap()
                })
                .collect(),
        )
        .unwrap()
        .certified(8)
        .unwrap();
        assert_eq!(density_ratio_bounds_check(&triangle, 20, 1.0, 5).unwrap().violations, 0);
    }
}
