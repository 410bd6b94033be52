#![allow(dead_code)]

use tzlab_core::geometry::{Rotation, Vector};
use tzlab_core::ifs::{validate_ifs, IfsSystem, Similitude};

pub fn cantor() -> IfsSystem {
    validate_ifs(vec![
        Similitude::scaling(1.0 / 3.0, vec![0.0]).unwrap(),
        Similitude::scaling(1.0 / 3.0, vec![2.0 / 3.0]).unwrap(),
    ])
    .unwrap()
}

/// Ratios 1/2 and 1/4 on the line.
pub fn mixed() -> IfsSystem {
    validate_ifs(vec![
        Similitude::scaling(0.5, vec![0.0]).unwrap(),
        Similitude::scaling(0.25, vec![0.75]).unwrap(),
    ])
    .unwrap()
}

/// `{0.4·Rot90(x), 0.4x + (0.6, 0)}` in the plane.
pub fn rot90() -> IfsSystem {
    validate_ifs(vec![
        Similitude::new(0.4, Rotation::planar(std::f64::consts::FRAC_PI_2), Vector::zeros(2)).unwrap(),
        Similitude::scaling(0.4, vec![0.6, 0.0]).unwrap(),
    ])
    .unwrap()
}

pub fn touching() -> IfsSystem {
    validate_ifs(vec![
        Similitude::scaling(0.5, vec![0.0]).unwrap(),
        Similitude::scaling(0.5, vec![0.5]).unwrap(),
    ])
    .unwrap()
}

pub fn certified(system: IfsSystem) -> IfsSystem {
    system.certified(8).unwrap()
}

/// The three reference systems, certified, with names.
pub fn references() -> Vec<(&'static str, IfsSystem)> {
    vec![
        ("cantor", certified(cantor())),
        ("mixed", certified(mixed())),
        ("rot90", certified(rot90())),
    ]
}
