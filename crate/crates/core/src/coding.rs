//! Eventually periodic codings, the coding map π, the shift and symbolic distance.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::geometry::{Rotation, RotationProduct, Vector};
use crate::ifs::{bounding_ball, cylinder_map, CylinderMap, IfsSystem, Word};

/// The sequence `u v v v …`, kept in normal form: primitive period, shortest preperiod.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Coding {
    preperiod: Word,
    period: Word,
}

impl Coding {
    pub fn new(preperiod: Word, period: Word) -> Result<Self> {
        if period.is_empty() {
            return Err(Error::CodingSyntax("period must be nonempty".into()));
        }
        Ok(Coding::canonical(preperiod.digits().to_vec(), period.digits().to_vec()))
    }

    /// `v^∞`
    pub fn periodic(period: Word) -> Result<Self> {
        Coding::new(Word::empty(), period)
    }

    /// `i^∞`
    pub fn constant(digit: u8) -> Self {
        Coding {
            preperiod: Word::empty(),
            period: Word::new(vec![digit]),
        }
    }

    fn canonical(mut u: Vec<u8>, mut v: Vec<u8>) -> Self {
        let n = v.len();
        if let Some(p) = (1..=n).find(|&p| n.is_multiple_of(p) && (p..n).all(|i| v[i] == v[i - p])) {
            v.truncate(p);
        }
        while let (Some(&a), Some(&b)) = (u.last(), v.last()) {
            if a != b {
                break;
            }
            u.pop();
            v.rotate_right(1);
        }
        Coding {
            preperiod: Word::new(u),
            period: Word::new(v),
        }
    }

    pub fn preperiod(&self) -> &Word {
        &self.preperiod
    }

    pub fn period(&self) -> &Word {
        &self.period
    }

    pub fn is_purely_periodic(&self) -> bool {
        self.preperiod.is_empty()
    }

    pub fn digit(&self, i: usize) -> u8 {
        let u = self.preperiod.digits();
        if i < u.len() {
            u[i]
        } else {
            let v = self.period.digits();
            v[(i - u.len()) % v.len()]
        }
    }

    pub fn prefix(&self, len: usize) -> Word {
        Word::new((0..len).map(|i| self.digit(i)).collect())
    }

    pub fn check_alphabet(&self, maps: usize) -> Result<()> {
        self.preperiod.check_alphabet(maps)?;
        self.period.check_alphabet(maps)
    }

    pub fn max_digit(&self) -> u8 {
        self.preperiod
            .digits()
            .iter()
            .chain(self.period.digits())
            .copied()
            .max()
            .unwrap_or(0)
    }
}

impl fmt::Display for Coding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.preperiod, self.period)
    }
}

impl fmt::Debug for Coding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Coding({self})")
    }
}

impl FromStr for Coding {
    type Err = Error;

    /// `u(v)`: `01(102)` is preperiod `01` followed by `102` repeated.
    fn from_str(text: &str) -> Result<Self> {
        let text = text.trim();
        let open = text
            .find('(')
            .ok_or_else(|| Error::CodingSyntax(format!("expected u(v), got {text:?}")))?;
        if !text.ends_with(')') || text[open + 1..].contains('(') {
            return Err(Error::CodingSyntax(format!("expected u(v), got {text:?}")));
        }
        let u = Word::parse(&text[..open])?;
        let v = Word::parse(&text[open + 1..text.len() - 1])?;
        Coding::new(u, v)
    }
}

impl Serialize for Coding {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Coding {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalResult {
    pub point: Vector,
    pub err: f64,
}

/// `π(u v^∞) = φ_u(y)` where `y` solves the fixed-point equation of `φ_v`.
///
/// The linear solve leaves only roundoff, so `err` is reported as zero;
/// `err_tol` is accepted for interface symmetry with [`pi_series`].
pub fn pi_eval(system: &IfsSystem, x: &Coding, err_tol: f64) -> Result<EvalResult> {
    if !(err_tol > 0.0) {
        return Err(Error::InvalidArgument("err_tol must be positive".into()));
    }
    x.check_alphabet(system.len())?;
    let tail = cylinder_map(system, &x.period)?.fixed_point();
    let head = cylinder_map(system, &x.preperiod)?;
    Ok(EvalResult {
        point: head.apply(&tail),
        err: 0.0,
    })
}

/// Truncated expansion `φ_{x_0…x_{p−1}}(anchor)` with `p` chosen so that `λ^p · 2R ≤ err_tol`.
pub fn pi_series(system: &IfsSystem, x: &Coding, err_tol: f64) -> Result<EvalResult> {
    if !(err_tol > 0.0) {
        return Err(Error::InvalidArgument("err_tol must be positive".into()));
    }
    x.check_alphabet(system.len())?;
    let (_, radius) = bounding_ball(system);
    let mut map = CylinderMap::identity(system.dim());
    let mut depth = 0;
    while map.scale * 2.0 * radius > err_tol {
        depth += 1;
        map = system.child(&map, x.digit(depth - 1) as usize, depth);
    }
    Ok(EvalResult {
        point: map.apply(system.anchor()),
        err: map.scale * 2.0 * radius,
    })
}

/// Truncated expansion at a fixed depth `p`.
pub fn pi_series_at_depth(system: &IfsSystem, x: &Coding, p: usize) -> Result<EvalResult> {
    x.check_alphabet(system.len())?;
    let (_, radius) = bounding_ball(system);
    let map = cylinder_map(system, &x.prefix(p))?;
    Ok(EvalResult {
        point: map.apply(system.anchor()),
        err: map.scale * 2.0 * radius,
    })
}

/// `σ^n`
pub fn shift(x: &Coding, n: usize) -> Coding {
    let u = x.preperiod.digits();
    if n <= u.len() {
        return Coding::canonical(u[n..].to_vec(), x.period.digits().to_vec());
    }
    let mut v = x.period.digits().to_vec();
    let k = (n - u.len()) % v.len();
    v.rotate_left(k);
    Coding::canonical(Vec::new(), v)
}

/// Index of the first disagreement, or `None` for equal codings.
pub fn first_disagreement(x: &Coding, y: &Coding) -> Option<usize> {
    let (px, py) = (x.period.len(), y.period.len());
    let lcm = px / gcd(px, py) * py;
    let horizon = x.preperiod.len().max(y.preperiod.len()) + lcm;
    (0..horizon).find(|&i| x.digit(i) != y.digit(i))
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// `d*(x, y) = 2^{−n}` with `n` the first index of disagreement.
pub fn coding_distance(x: &Coding, y: &Coding) -> f64 {
    match first_disagreement(x, y) {
        None => 0.0,
        Some(n) => 0.5f64.powi(n as i32),
    }
}

/// Relative products `λ_r^p = λ^p/λ^r` and `h_r^p = (h^r)^{-1} ∘ h^p` over digits `r..p`.
pub fn lambda_h_products(system: &IfsSystem, x: &Coding, r: usize, p: usize) -> Result<(f64, Rotation)> {
    if r > p {
        return Err(Error::InvalidArgument(format!(
            "relative products need r ≤ p, got r = {r}, p = {p}"
        )));
    }
    x.check_alphabet(system.len())?;
    let mut scale = 1.0;
    let mut rot = RotationProduct::new(system.dim());
    for i in r..p {
        let m = system.map(x.digit(i) as usize);
        scale *= m.ratio();
        rot.push(m.rot());
    }
    Ok((scale, rot.finish()))
}

#[derive(Clone)]
struct SearchNode {
    lower: f64,
    map: CylinderMap,
    depth: usize,
}

impl PartialEq for SearchNode {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for SearchNode {}
impl PartialOrd for SearchNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for SearchNode {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .lower
            .total_cmp(&self.lower)
            .then_with(|| other.depth.cmp(&self.depth))
    }
}

/// Distance from `p` to the nearest anchor image inside the cylinder `root`,
/// refined until covers are below `resolution`.
pub(crate) fn nearest_sample_distance(
    system: &IfsSystem,
    root: &CylinderMap,
    root_depth: usize,
    p: &Vector,
    resolution: f64,
) -> f64 {
    let mut best = root.apply(system.anchor()).dist(p);
    let mut heap = BinaryHeap::new();
    let (c, r) = system.cover(root);
    heap.push(SearchNode {
        lower: (c.dist(p) - r).max(0.0),
        map: root.clone(),
        depth: root_depth,
    });
    while let Some(node) = heap.pop() {
        if node.lower >= best {
            break;
        }
        let (_, r) = system.cover(&node.map);
        if r <= resolution || node.depth >= 200 {
            continue;
        }
        for i in 0..system.len() {
            let child = system.child(&node.map, i, node.depth + 1);
            best = best.min(child.apply(system.anchor()).dist(p));
            let (cc, cr) = system.cover(&child);
            let lower = (cc.dist(p) - cr).max(0.0);
            if lower < best {
                heap.push(SearchNode {
                    lower,
                    map: child,
                    depth: node.depth + 1,
                });
            }
        }
    }
    best
}

/// Lower bound on the distance from `p` to the covers of `map`'s descendants `levels` deeper.
fn lookahead_distance(
    system: &IfsSystem,
    map: &CylinderMap,
    depth: usize,
    levels: usize,
    p: &Vector,
    best: f64,
) -> f64 {
    let (c, r) = system.cover(map);
    let here = (c.dist(p) - r).max(0.0);
    if levels == 0 || here >= best {
        return here;
    }
    let mut best = best;
    for i in 0..system.len() {
        let child = system.child(map, i, depth + 1);
        best = best.min(lookahead_distance(system, &child, depth + 1, levels - 1, p, best));
    }
    best
}

/// Leading `depth` digits of the coding of the attractor point nearest `p`.
pub fn cylinder_locate(system: &IfsSystem, p: &Vector, depth: usize) -> Result<Word> {
    let cert = system.require_ssc()?;
    if p.dim() != system.dim() {
        return Err(Error::DimensionMismatch {
            expected: system.dim(),
            found: p.dim(),
        });
    }
    let tolerance = cert.t_lo / 2.0;
    let root = CylinderMap::identity(system.dim());
    let distance = nearest_sample_distance(system, &root, 0, p, cert.t_lo * 1e-3);
    if distance > tolerance {
        return Err(Error::NotOnAttractor { distance, tolerance });
    }
    let lookahead = cert.depth.max(1);
    let mut word = Word::empty();
    let mut map = root;
    for level in 0..depth {
        let mut choice = (f64::INFINITY, 0usize, map.clone());
        for i in 0..system.len() {
            let child = system.child(&map, i, level + 1);
            let d = lookahead_distance(system, &child, level + 1, lookahead, p, choice.0);
            if d < choice.0 {
                choice = (d, i, child);
            }
        }
        word.push(choice.1 as u8);
        map = choice.2;
    }
    Ok(word)
}

/// One step of the expanding map `S`: the leading digit of `p` and `φ_i^{-1}(p)`.
pub fn expand_once(system: &IfsSystem, p: &Vector) -> Result<(u8, Vector)> {
    let word = cylinder_locate(system, p, 1)?;
    let i = word.digits()[0];
    Ok((i, system.map(i as usize).apply_inverse(p)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ifs::{validate_ifs, Similitude};

    fn cantor() -> IfsSystem {
        validate_ifs(vec![
            Similitude::scaling(1.0 / 3.0, vec![0.0]).unwrap(),
            Similitude::scaling(1.0 / 3.0, vec![2.0 / 3.0]).unwrap(),
        ])
        .unwrap()
    }

    fn c(text: &str) -> Coding {
        text.parse().unwrap()
    }

    #[test]
    fn parse_and_canonicalize() {
        assert_eq!(c("(0)"), Coding::constant(0));
        assert_eq!(c("01(102)").to_string(), "01(102)");
        assert_eq!(c("(0101)").to_string(), "(01)");
        assert_eq!(c("0(10)").to_string(), "(01)");
        assert_eq!(c("1(01)").to_string(), "(10)");
        assert_eq!(c("22(2)").to_string(), "(2)");
        assert!("01".parse::<Coding>().is_err());
        assert!("0()".parse::<Coding>().is_err());
        assert!("(0".parse::<Coding>().is_err());
    }

    #[test]
    fn pi_eval_examples() {
        let sys = cantor();
        let at = |s: &str| pi_eval(&sys, &c(s), 1e-12).unwrap();
        assert_eq!(at("(0)").point.as_slice(), &[0.0]);
        assert_eq!(at("(0)").err, 0.0);
        assert!((at("(1)").point[0] - 1.0).abs() < 1e-15);
        assert!((at("(01)").point[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn series_agrees_with_exact() {
        let sys = cantor();
        for s in ["(01)", "1(0)", "0(110)", "(1)"] {
            let x = c(s);
            let exact = pi_eval(&sys, &x, 1e-9).unwrap().point;
            for p in [0, 3, 10, 25] {
                let approx = pi_series_at_depth(&sys, &x, p).unwrap();
                assert!(exact.dist(&approx.point) <= approx.err + 1e-15, "{s} at {p}");
            }
            let approx = pi_series(&sys, &x, 1e-9).unwrap();
            assert!(approx.err <= 1e-9);
            assert!(exact.dist(&approx.point) <= approx.err + 1e-15);
        }
    }

    #[test]
    fn shift_examples() {
        assert_eq!(shift(&c("01(2)"), 2), c("(2)"));
        let x = c("(0112)");
        assert_eq!(shift(&x, 4), x);
        assert_eq!(shift(&c("0(10)"), 2), c("(01)"));
        assert_eq!(shift(&c("(01)"), 1), c("(10)"));
    }

    #[test]
    fn distance_examples() {
        assert_eq!(coding_distance(&c("(01)"), &c("(01)")), 0.0);
        assert_eq!(coding_distance(&c("(0)"), &c("(1)")), 1.0);
        assert_eq!(coding_distance(&c("(01)"), &c("(0)")), 0.5);
        assert_eq!(coding_distance(&c("(01)"), &c("(011)")), 0.25);
    }

    #[test]
    fn relative_products() {
        let sys = cantor();
        let x = c("(01)");
        let (s, r) = lambda_h_products(&sys, &x, 2, 2).unwrap();
        assert_eq!(s, 1.0);
        assert!(r.is_identity());
        let (s, r) = lambda_h_products(&sys, &x, 0, 3).unwrap();
        assert!((s - 1.0 / 27.0).abs() < 1e-17);
        assert!(r.is_identity());
        assert!(lambda_h_products(&sys, &x, 3, 2).is_err());
    }

    #[test]
    fn locate_examples() {
        let sys = cantor().certified(10).unwrap();
        let locate = |p: f64, depth| cylinder_locate(&sys, &Vector::new(vec![p]), depth);
        assert_eq!(locate(0.01, 3).unwrap(), Word::parse("000").unwrap());
        assert_eq!(locate(1.0, 2).unwrap(), Word::parse("11").unwrap());
        assert!(matches!(locate(0.5, 1), Err(Error::NotOnAttractor { .. })));
        assert!(matches!(
            cylinder_locate(&cantor(), &Vector::new(vec![0.0]), 1),
            Err(Error::MissingCertificate)
        ));
    }
}
