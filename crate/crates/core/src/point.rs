//! Points and tangent vectors.
//!
//! Coordinates are embedding coordinates for the sphere and ellipsoid and chart
//! coordinates for the torus and parametric surfaces.

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use std::ops::{Deref, DerefMut};

pub type Coords = SmallVec<[f64; 4]>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(pub Coords);

impl Point {
    pub fn new(c: &[f64]) -> Self {
        Point(SmallVec::from_slice(c))
    }

    pub fn zeros(n: usize) -> Self {
        Point(SmallVec::from_elem(0.0, n))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

impl Deref for Point {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Point {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Point(SmallVec::from_vec(v))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tangent {
    pub base: Point,
    pub dir: Coords,
}

impl Tangent {
    pub fn new(base: Point, dir: &[f64]) -> Self {
        Tangent {
            base,
            dir: SmallVec::from_slice(dir),
        }
    }
}

// Small dense-vector helpers; the vectors here have 2..4 entries so a linear
// algebra crate would only add noise.

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn sub(a: &[f64], b: &[f64]) -> Coords {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

#[inline]
pub fn add(a: &[f64], b: &[f64]) -> Coords {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

#[inline]
pub fn scale(a: &[f64], s: f64) -> Coords {
    a.iter().map(|x| x * s).collect()
}

#[inline]
pub fn axpy(s: f64, x: &[f64], y: &[f64]) -> Coords {
    x.iter().zip(y).map(|(xi, yi)| s * xi + yi).collect()
}

#[inline]
pub fn dist_euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
