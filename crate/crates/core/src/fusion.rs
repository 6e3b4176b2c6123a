//! Confidence-weighted blending of two dense depth predictions.
//!
//! Each pixel is a two-way softmax over the confidence logits applied to the
//! two depths. The per-pixel max logit is subtracted before exponentiating so
//! logits of any magnitude stay finite.

use rayon::prelude::*;

use crate::error::Result;
use crate::grid::{ensure_same_shape, DepthGrid, ScalarPlane};

#[inline]
fn softmax_pair(c_a: f32, c_b: f32) -> (f64, f64) {
    let (a, b) = (c_a as f64, c_b as f64);
    let m = a.max(b);
    let (ea, eb) = ((a - m).exp(), (b - m).exp());
    let total = ea + eb;
    (ea / total, eb / total)
}

/// Fuses the color-dominant and depth-dominant predictions.
///
/// Applied unconditionally at every pixel, including ones where either input
/// depth is zero.
pub fn fuse(
    d_cd: &DepthGrid,
    d_dd: &DepthGrid,
    c_cd: &ScalarPlane,
    c_dd: &ScalarPlane,
) -> Result<DepthGrid> {
    ensure_same_shape("fuse depths", d_cd.shape(), d_dd.shape())?;
    ensure_same_shape("fuse confidence (cd)", d_cd.shape(), c_cd.shape())?;
    ensure_same_shape("fuse confidence (dd)", d_cd.shape(), c_dd.shape())?;
    let (h, w) = d_cd.shape();
    let mut out = vec![0.0f32; h * w];
    out.par_iter_mut().enumerate().for_each(|(i, o)| {
        let (wa, wb) = softmax_pair(c_cd.values()[i], c_dd.values()[i]);
        let fused = wa * d_cd.values()[i] as f64 + wb * d_dd.values()[i] as f64;
        *o = fused as f32;
    });
    Ok(DepthGrid::from_vec_unchecked(h, w, out))
}

/// The two per-pixel blend coefficients; they sum to one at every pixel.
pub fn fusion_weights(c_cd: &ScalarPlane, c_dd: &ScalarPlane) -> Result<(ScalarPlane, ScalarPlane)> {
    ensure_same_shape("fusion weights", c_cd.shape(), c_dd.shape())?;
    let (h, w) = c_cd.shape();
    let (wa, wb): (Vec<f32>, Vec<f32>) = c_cd
        .values()
        .iter()
        .zip(c_dd.values())
        .map(|(&a, &b)| {
            let (wa, wb) = softmax_pair(a, b);
            (wa as f32, wb as f32)
        })
        .unzip();
    Ok((
        ScalarPlane::from_vec_unchecked(h, w, wa),
        ScalarPlane::from_vec_unchecked(h, w, wb),
    ))
}
