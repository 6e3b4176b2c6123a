//! Pinhole back-projection into position maps and min-pooled depth pyramids.
//!
//! Pixel `(u, v)` is the 0-based column/row index with no half-pixel offset.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DepthGrid, ScalarPlane};

/// Pinhole intrinsics in pixels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub u0: f64,
    pub v0: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, u0: f64, v0: f64) -> Result<Self> {
        if !(fx.is_finite() && fx > 0.0) || !(fy.is_finite() && fy > 0.0) {
            return Err(Error::Intrinsics(format!(
                "focal lengths must be positive and finite (fx = {fx}, fy = {fy})"
            )));
        }
        if !u0.is_finite() || !v0.is_finite() {
            return Err(Error::Intrinsics(format!(
                "principal point must be finite (u0 = {u0}, v0 = {v0})"
            )));
        }
        Ok(Self { fx, fy, u0, v0 })
    }

    /// Intrinsics for a grid downsampled by `factor` in both directions.
    pub fn scaled(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::ZeroFactor);
        }
        let f = factor as f64;
        Ok(Self {
            fx: self.fx / f,
            fy: self.fy / f,
            u0: self.u0 / f,
            v0: self.v0 / f,
        })
    }

    /// Projects a camera-frame point back to pixel coordinates `(u, v)`.
    pub fn project(&self, x: f64, y: f64, z: f64) -> Option<(f64, f64)> {
        (z > 0.0).then(|| (self.u0 + x * self.fx / z, self.v0 + y * self.fy / z))
    }
}

pub fn scale_intrinsics(k: &CameraIntrinsics, factor: usize) -> Result<CameraIntrinsics> {
    k.scaled(factor)
}

/// Per-pixel camera-frame coordinates in meters.
#[derive(Clone, Debug, PartialEq)]
pub struct PositionMap {
    pub x: ScalarPlane,
    pub y: ScalarPlane,
    pub z: ScalarPlane,
}

impl PositionMap {
    pub fn shape(&self) -> (usize, usize) {
        self.z.shape()
    }

    pub fn into_planes(self) -> Vec<ScalarPlane> {
        vec![self.x, self.y, self.z]
    }
}

/// `Z = D`, `X = (u - u0) Z / fx`, `Y = (v - v0) Z / fy`. Invalid pixels map to the origin.
pub fn back_project(depth: &DepthGrid, k: &CameraIntrinsics) -> PositionMap {
    let (h, w) = depth.shape();
    let mut x = vec![0.0f32; h * w];
    let mut y = vec![0.0f32; h * w];
    x.par_chunks_mut(w)
        .zip(y.par_chunks_mut(w))
        .enumerate()
        .for_each(|(v, (xrow, yrow))| {
            let dv = (v as f64 - k.v0) / k.fy;
            for (u, &z) in depth.row(v).iter().enumerate() {
                if z > 0.0 {
                    let z = z as f64;
                    xrow[u] = ((u as f64 - k.u0) * z / k.fx) as f32;
                    yrow[u] = (dv * z) as f32;
                }
            }
        });
    PositionMap {
        x: ScalarPlane::from_vec_unchecked(h, w, x),
        y: ScalarPlane::from_vec_unchecked(h, w, y),
        z: depth.as_plane(),
    }
}

/// Downsamples by taking the smallest valid depth in each `factor x factor`
/// window. Windows without any valid depth stay invalid.
pub fn min_pool(depth: &DepthGrid, factor: usize) -> Result<DepthGrid> {
    if factor == 0 {
        return Err(Error::ZeroFactor);
    }
    let (h, w) = depth.shape();
    for (dimension, size) in [("height", h), ("width", w)] {
        if size % factor != 0 {
            return Err(Error::NotDivisible {
                dimension,
                size,
                factor,
            });
        }
    }
    if factor == 1 {
        return Ok(depth.clone());
    }
    let (oh, ow) = (h / factor, w / factor);
    let mut out = vec![0.0f32; oh * ow];
    out.par_chunks_mut(ow).enumerate().for_each(|(orow, dst)| {
        for (ocol, cell) in dst.iter_mut().enumerate() {
            let mut best = f32::INFINITY;
            for r in orow * factor..(orow + 1) * factor {
                for &v in &depth.row(r)[ocol * factor..(ocol + 1) * factor] {
                    if v > 0.0 && v < best {
                        best = v;
                    }
                }
            }
            *cell = if best.is_finite() { best } else { 0.0 };
        }
    });
    Ok(DepthGrid::from_vec_unchecked(oh, ow, out))
}
