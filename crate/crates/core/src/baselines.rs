//! Conventional bottom-up segmenters used for comparison: a global
//! temperature threshold (absolute or percentile) and exact 1-D k-means on
//! temperatures.

use crate::cluster::kmeans_1d;
use crate::error::{Error, Result};
use crate::raster::{BinaryMask, ThermalRaster};
use crate::stats::percentile;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdSpec {
    /// Threshold in °C.
    Absolute(f64),
    /// Percentile (0-100) of the valid pixels, linearly interpolated.
    Percentile(f64),
}

impl ThresholdSpec {
    /// Resolves the threshold value for `raster`.
    pub fn resolve(&self, raster: &ThermalRaster) -> Result<f64> {
        match *self {
            ThresholdSpec::Absolute(v) if v.is_finite() => Ok(v),
            ThresholdSpec::Absolute(v) => Err(Error::Parameter(format!("threshold {v} is not finite"))),
            ThresholdSpec::Percentile(p) if (0.0..=100.0).contains(&p) => percentile(raster.valid_values(), p)
                .ok_or_else(|| Error::DegenerateInput("raster has no valid pixels".into())),
            ThresholdSpec::Percentile(p) => Err(Error::Parameter(format!(
                "percentile must lie in [0, 100], got {p}"
            ))),
        }
    }
}

/// Pixels strictly warmer than the threshold.
pub fn threshold_segment(raster: &ThermalRaster, spec: ThresholdSpec) -> Result<BinaryMask> {
    let theta = spec.resolve(raster)?;
    Ok(threshold_at(raster, theta))
}

pub(crate) fn threshold_at(raster: &ThermalRaster, theta: f64) -> BinaryMask {
    let v = raster.values();
    BinaryMask::from_fn_index(raster.shape(), |p| raster.is_valid(p) && v[p] > theta)
}

/// Exact k-means over temperatures. In daytime the coolest cluster is the
/// sound background and every other cluster is foreground; at night the
/// warmest cluster is background instead.
pub fn kmeans_temperature_segment(raster: &ThermalRaster, k: usize, daytime: bool) -> Result<BinaryMask> {
    if k < 2 {
        return Err(Error::Parameter(format!("k must be >= 2, got {k}")));
    }
    let values: Vec<f64> = raster.valid_values().collect();
    let clusters = kmeans_1d(&values, k)?;
    let v = raster.values();
    let (lo_cut, hi_cut) = if daytime {
        // foreground starts at the second cluster
        (clusters[1].min, f64::INFINITY)
    } else {
        (f64::NEG_INFINITY, clusters[k - 1].min)
    };
    Ok(BinaryMask::from_fn_index(raster.shape(), |p| {
        raster.is_valid(p) && v[p] >= lo_cut && v[p] < hi_cut
    }))
}
