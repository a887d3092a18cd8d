//! Fixtures shared by the benchmarks.

use shellxy_core::mesh::icosphere;
use shellxy_core::{DiscreteField, FrameField, Surface, Triangulation};

/// Unit icosphere at `level` with its frames.
pub fn sphere(level: u32) -> (Triangulation, FrameField) {
    let tri = icosphere(&Surface::sphere(1.0).expect("unit sphere"), level).expect("icosphere");
    let frames = FrameField::build(&tri);
    (tri, frames)
}

/// Deterministic, non-smooth field for timing energy evaluations.
pub fn scrambled_field(n: usize) -> DiscreteField {
    DiscreteField::new(
        (0..n)
            .map(|i| (i as f64 * 2.399_963).rem_euclid(std::f64::consts::TAU))
            .collect(),
    )
}
