use thiserror::Error;

use crate::ifs::GapCertificate;
use crate::measure::RegionMass;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("not orthogonal: max-entry defect of RᵀR − I is {defect:e}")]
    NotOrthogonal { defect: f64 },

    #[error("not a contraction: ratio {ratio} outside (0, 1)")]
    NotAContraction { ratio: f64 },

    #[error("degenerate system: need at least 2 maps, got {maps}")]
    DegenerateSystem { maps: usize },

    #[error("digit {digit} out of range for a system with {maps} maps")]
    DigitOutOfRange { digit: usize, maps: usize },

    #[error("empty cloud has no Hausdorff distance")]
    EmptyCloud,

    #[error("unbounded polytope: no bounding ball available")]
    UnboundedPolytope,

    #[error("SSC not certified at depth {depth} (t_lo = {:e}, t_hi = {:e})", .certificate.t_lo, .certificate.t_hi)]
    SscNotCertified { depth: usize, certificate: GapCertificate },

    #[error("operation requires an SSC-certified system; run certify_ssc first")]
    MissingCertificate,

    #[error("point not on attractor at this tolerance (distance ≥ {distance:e}, tolerance {tolerance:e})")]
    NotOnAttractor { distance: f64, tolerance: f64 },

    #[error("refinement cap reached with interval [{:e}, {:e}] wider than tolerance {tol:e}", .partial.lo, .partial.hi)]
    RefinementCap { partial: RegionMass, tol: f64 },

    #[error("resolution cap: more than {cap} leaves required; use a coarser resolution")]
    LeafCap { cap: usize },

    #[error("window too large for this zoom depth; increase w (w + r(N) = {depth})")]
    WindowTooLarge { depth: i64 },

    #[error("attractor degenerate in hyperplane")]
    DegenerateInHyperplane,

    #[error("no samples")]
    NoSamples,

    #[error("no certified limit model available; use recurrence_scan for a numeric comparison")]
    NoCertifiedModel,

    #[error("invalid coding syntax: {0}")]
    CodingSyntax(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid IFS spec at {context}: {message}")]
    Spec { context: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
