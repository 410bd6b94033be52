//! Tangent measures and limit models of self-similar sets under the strong
//! separation condition.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coding;
pub mod error;
pub mod geometry;
pub mod ifs;
pub mod io;
pub mod limit_models;
pub mod measure;
pub mod verify;
pub mod zoom;

pub use coding::{cylinder_locate, pi_eval, pi_series, shift, Coding};
pub use error::{Error, Result};
pub use geometry::{hausdorff_distance, ConvexRegion, PointCloud, Rotation, Vector, Window};
pub use ifs::{certify_ssc, cylinder_map, gap_certificate, moran_dimension, validate_ifs, IfsSystem, Similitude, Word};
pub use limit_models::{enumerate_limit_models, recurrence_scan, rotation_order};
pub use measure::{discrete_measure, region_mass, RegionMass};
pub use zoom::{compute_r, rescaled_cloud, zoom_window, AffineView};
