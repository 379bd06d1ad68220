//! Shared fixtures for the benchmark suite.

use std::f64::consts::PI;
use std::sync::Arc;

use geomorse::{integrate_geodesic, Geodesic, Manifold, Submanifold};

/// Equator arc on the unit 2-sphere starting at a point.
pub fn sphere_arc(len: f64, steps: usize) -> Geodesic {
    let sphere = Arc::new(Manifold::sphere(2, 1.0));
    integrate_geodesic(sphere, &[PI / 2.0, 0.0], &[0.0, 1.0], (0.0, len), steps)
        .expect("fixture integrates")
}

/// Radial segment in the plane hitting the center of a unit circle.
pub fn radial_arc(len: f64, steps: usize) -> Geodesic {
    let eucl = Arc::new(Manifold::euclidean(2));
    integrate_geodesic(eucl, &[1.0, 0.0], &[-1.0, 0.0], (0.0, len), steps)
        .expect("fixture integrates")
}

pub fn point_start(geo: &Geodesic) -> Submanifold {
    Submanifold::point(geo.position(0).iter().copied().collect())
}

pub fn circle_start() -> Submanifold {
    Submanifold::circle([0.0, 0.0], 1.0)
}
