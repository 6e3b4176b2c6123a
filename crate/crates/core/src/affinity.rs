//! Per-neighbor affinity planes for a `k x k` propagation neighborhood.
//!
//! Plane `x` holds, at pixel `i`, the weight pixel `i` takes from its
//! neighbor `i + rate * x`. Planes are ordered by `(dy, dx)` ascending with the
//! center omitted. In normalized form every weight is non-negative and each
//! pixel's neighbor weights sum to at most one; the remainder is the self
//! weight.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{ensure_same_shape, ScalarPlane};

/// Slack allowed on a normalized pixel's neighbor sum for `f32` rounding.
pub const NORMALIZED_SUM_TOLERANCE: f64 = 1e-6;

/// Displacement of a neighbor before dilation scaling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NeighborOffset {
    pub dy: i32,
    pub dx: i32,
}

impl NeighborOffset {
    pub const CENTER: NeighborOffset = NeighborOffset { dy: 0, dx: 0 };

    pub const fn new(dy: i32, dx: i32) -> Self {
        Self { dy, dx }
    }

    pub fn is_center(&self) -> bool {
        *self == Self::CENTER
    }
}

fn check_kernel_size(kernel_size: usize) -> Result<()> {
    if kernel_size < 3 || kernel_size.is_multiple_of(2) {
        return Err(Error::KernelSize(kernel_size));
    }
    Ok(())
}

/// Non-center offsets of a `kernel_size x kernel_size` window in storage order.
pub fn neighbor_offsets(kernel_size: usize) -> Result<Vec<NeighborOffset>> {
    check_kernel_size(kernel_size)?;
    let r = (kernel_size / 2) as i32;
    Ok((-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| NeighborOffset::new(dy, dx)))
        .filter(|o| !o.is_center())
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct AffinityField {
    kernel_size: usize,
    offsets: Vec<NeighborOffset>,
    planes: Vec<ScalarPlane>,
}

impl AffinityField {
    pub fn new(kernel_size: usize, planes: Vec<ScalarPlane>) -> Result<Self> {
        let offsets = neighbor_offsets(kernel_size)?;
        if planes.len() != offsets.len() {
            return Err(Error::Affinity(format!(
                "kernel {kernel_size} needs {} neighbor planes, got {}",
                offsets.len(),
                planes.len()
            )));
        }
        for p in &planes[1..] {
            ensure_same_shape("affinity planes", planes[0].shape(), p.shape())?;
        }
        Ok(Self {
            kernel_size,
            offsets,
            planes,
        })
    }

    /// All-zero neighbor weights: every pixel keeps its full self weight.
    pub fn identity(kernel_size: usize, height: usize, width: usize) -> Result<Self> {
        let count = neighbor_offsets(kernel_size)?.len();
        let zero = ScalarPlane::zeros(height, width)?;
        Self::new(kernel_size, vec![zero; count])
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel_size
    }

    pub fn shape(&self) -> (usize, usize) {
        self.planes[0].shape()
    }

    pub fn offsets(&self) -> &[NeighborOffset] {
        &self.offsets
    }

    pub fn planes(&self) -> &[ScalarPlane] {
        &self.planes
    }

    pub fn into_planes(self) -> Vec<ScalarPlane> {
        self.planes
    }

    pub fn plane(&self, offset: NeighborOffset) -> Option<&ScalarPlane> {
        self.offsets
            .iter()
            .position(|&o| o == offset)
            .map(|i| &self.planes[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (NeighborOffset, &ScalarPlane)> {
        self.offsets.iter().copied().zip(&self.planes)
    }

    /// Sum of the neighbor weights at one pixel, accumulated in `f64`.
    pub fn neighbor_sum(&self, row: usize, col: usize) -> f64 {
        self.planes.iter().map(|p| p.get(row, col) as f64).sum()
    }

    /// Checks the normalized-form invariant, reporting the first offending pixel.
    pub fn check_normalized(&self) -> Result<()> {
        let (h, w) = self.shape();
        for row in 0..h {
            for col in 0..w {
                let mut sum = 0.0f64;
                for p in &self.planes {
                    let v = p.get(row, col);
                    if v < 0.0 {
                        return Err(Error::Affinity(format!(
                            "negative weight {v} at (row {row}, col {col})"
                        )));
                    }
                    sum += v as f64;
                }
                if sum > 1.0 + NORMALIZED_SUM_TOLERANCE {
                    return Err(Error::Unnormalized { row, col, sum });
                }
            }
        }
        Ok(())
    }

    /// `1 - sum of neighbor weights`, clamped at zero, for a normalized field.
    pub fn self_weights(&self) -> ScalarPlane {
        let (h, w) = self.shape();
        let values = (0..h * w)
            .map(|i| {
                let sum: f64 = self.planes.iter().map(|p| p.values()[i] as f64).sum();
                (1.0 - sum).max(0.0) as f32
            })
            .collect();
        ScalarPlane::from_vec_unchecked(h, w, values)
    }
}

/// Maps raw weights to normalized form: `|w| / max(1, sum |w|)` per pixel.
///
/// Pixels whose absolute sum is already within [`NORMALIZED_SUM_TOLERANCE`]
/// of one are left unscaled, which makes the operation idempotent.
pub fn normalize(raw: &AffinityField) -> AffinityField {
    let (h, w) = raw.shape();
    let n = raw.planes.len();
    let mut out: Vec<Vec<f32>> = vec![vec![0.0; h * w]; n];
    let mut scales = vec![1.0f64; h * w];
    scales.par_iter_mut().enumerate().for_each(|(i, s)| {
        let sum: f64 = raw.planes.iter().map(|p| p.values()[i].abs() as f64).sum();
        if sum > 1.0 + NORMALIZED_SUM_TOLERANCE {
            *s = sum;
        }
    });
    out.par_iter_mut().zip(&raw.planes).for_each(|(dst, src)| {
        for ((d, &v), &s) in dst.iter_mut().zip(src.values()).zip(&scales) {
            *d = if s == 1.0 {
                v.abs()
            } else {
                (v.abs() as f64 / s) as f32
            };
        }
    });
    AffinityField {
        kernel_size: raw.kernel_size,
        offsets: raw.offsets.clone(),
        planes: out
            .into_iter()
            .map(|v| ScalarPlane::from_vec_unchecked(h, w, v))
            .collect(),
    }
}

/// Color-similarity affinities from an RGB guide image.
///
/// The raw weight toward neighbor `j` is `exp(-|c_i - c_j|^2 / (2 sigma^2))`,
/// zero for neighbors outside the image, then [`normalize`]d.
pub fn guided_affinity(
    image: &[ScalarPlane; 3],
    kernel_size: usize,
    sigma: f32,
) -> Result<AffinityField> {
    check_kernel_size(kernel_size)?;
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::Sigma(sigma));
    }
    ensure_same_shape("guide image", image[0].shape(), image[1].shape())?;
    ensure_same_shape("guide image", image[0].shape(), image[2].shape())?;
    let (h, w) = image[0].shape();
    let offsets = neighbor_offsets(kernel_size)?;
    let inv_two_sigma_sq = 1.0 / (2.0 * sigma as f64 * sigma as f64);

    let planes = offsets
        .par_iter()
        .map(|o| {
            let mut values = vec![0.0f32; h * w];
            for row in 0..h {
                let r = row as i64 + o.dy as i64;
                if r < 0 || r >= h as i64 {
                    continue;
                }
                for col in 0..w {
                    let c = col as i64 + o.dx as i64;
                    if c < 0 || c >= w as i64 {
                        continue;
                    }
                    let dist_sq: f64 = image
                        .iter()
                        .map(|ch| {
                            let d = ch.get(row, col) as f64 - ch.get(r as usize, c as usize) as f64;
                            d * d
                        })
                        .sum();
                    values[row * w + col] = (-dist_sq * inv_two_sigma_sq).exp() as f32;
                }
            }
            ScalarPlane::from_vec_unchecked(h, w, values)
        })
        .collect();
    Ok(normalize(&AffinityField::new(kernel_size, planes)?))
}
