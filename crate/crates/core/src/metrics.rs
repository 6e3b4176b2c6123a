//! Depth-completion error metrics over ground-truth-valid pixels.
//!
//! Depths are meters in memory. RMSE/MAE are reported in millimeters and the
//! inverse-depth metrics in 1/km, computed as `1000 / depth_m`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ensure_same_shape, DepthGrid};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Millimeters.
    pub rmse: f64,
    /// Millimeters.
    pub mae: f64,
    /// 1/km.
    pub irmse: f64,
    /// 1/km.
    pub imae: f64,
    pub valid_count: usize,
}

impl MetricReport {
    /// `key=value` pairs on a single line.
    pub fn to_kv_line(&self) -> String {
        format!(
            "rmse={:.6} mae={:.6} irmse={:.6} imae={:.6} valid_count={}",
            self.rmse, self.mae, self.irmse, self.imae, self.valid_count
        )
    }
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<8} {:>14}", "metric", "value")?;
        writeln!(f, "{:<8} {:>14.4}  mm", "RMSE", self.rmse)?;
        writeln!(f, "{:<8} {:>14.4}  mm", "MAE", self.mae)?;
        writeln!(f, "{:<8} {:>14.4}  1/km", "iRMSE", self.irmse)?;
        writeln!(f, "{:<8} {:>14.4}  1/km", "iMAE", self.imae)?;
        write!(f, "{:<8} {:>14}  px", "valid", self.valid_count)
    }
}

/// Sum of squared errors over pixels where the ground truth is valid.
pub fn masked_l2(pred: &DepthGrid, gt: &DepthGrid) -> Result<f64> {
    ensure_same_shape("masked l2", pred.shape(), gt.shape())?;
    Ok(pred
        .values()
        .iter()
        .zip(gt.values())
        .filter(|(_, &g)| g > 0.0)
        .map(|(&p, &g)| {
            let e = p as f64 - g as f64;
            e * e
        })
        .sum())
}

pub fn evaluate(pred: &DepthGrid, gt: &DepthGrid) -> Result<MetricReport> {
    ensure_same_shape("evaluate", pred.shape(), gt.shape())?;
    let w = gt.width();
    let mut sq = 0.0f64;
    let mut abs = 0.0f64;
    let mut inv_sq = 0.0f64;
    let mut inv_abs = 0.0f64;
    let mut count = 0usize;
    for (i, (&p, &g)) in pred.values().iter().zip(gt.values()).enumerate() {
        if g <= 0.0 {
            continue;
        }
        if p <= 0.0 {
            return Err(Error::NonPositivePrediction {
                row: i / w,
                col: i % w,
                value: p,
            });
        }
        let (p, g) = (p as f64, g as f64);
        let e = (p - g) * 1000.0;
        let ie = 1000.0 / p - 1000.0 / g;
        sq += e * e;
        abs += e.abs();
        inv_sq += ie * ie;
        inv_abs += ie.abs();
        count += 1;
    }
    if count == 0 {
        return Ok(MetricReport {
            rmse: 0.0,
            mae: 0.0,
            irmse: 0.0,
            imae: 0.0,
            valid_count: 0,
        });
    }
    let n = count as f64;
    Ok(MetricReport {
        rmse: (sq / n).sqrt(),
        mae: abs / n,
        irmse: (inv_sq / n).sqrt(),
        imae: inv_abs / n,
        valid_count: count,
    })
}
