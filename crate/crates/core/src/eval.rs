//! Overlap metrics and the step-size sweep.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::baselines::threshold_at;
use crate::error::{Error, Result};
use crate::extraction::{extract_maxima_sequence, max_steps, ExtractionConfig};
use crate::raster::{BinaryMask, Connectivity, ThermalRaster};
use crate::regions::connected_components;

/// Reference step size of the sweep.
pub const FINEST_DELTA: f64 = 0.05;

/// Intersection over union; 1.0 when both masks are empty.
pub fn iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    a.shape().check_same(b.shape())?;
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.bits().iter().zip(b.bits()) {
        inter += usize::from(x && y);
        union += usize::from(x || y);
    }
    Ok(if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    })
}

/// IoU of `footprint` against the predicted components that touch it.
/// A prediction that leaks into the background around the footprint is
/// penalized by the leaked area.
pub fn footprint_iou(pred: &BinaryMask, footprint: &BinaryMask, conn: Connectivity) -> Result<f64> {
    pred.shape().check_same(footprint.shape())?;
    let comps = connected_components(pred, conn);
    let mut matched = BinaryMask::empty(pred.shape());
    for r in comps.regions() {
        if r.pixels.iter().any(|&p| footprint.at(p)) {
            for &p in &r.pixels {
                matched.set(p, true);
            }
        }
    }
    iou(&matched, footprint)
}

/// [`footprint_iou`] for each footprint, in order.
pub fn per_blob_iou(pred: &BinaryMask, footprints: &[BinaryMask], conn: Connectivity) -> Result<Vec<f64>> {
    footprints
        .iter()
        .map(|f| footprint_iou(pred, f, conn))
        .collect()
}

/// One threshold of an exhaustive global-threshold sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdTrial {
    pub threshold: f64,
    pub ious: Vec<f64>,
}

/// Thresholds from the raster minimum to its maximum in steps of
/// `resolution`, each scored per footprint.
pub fn threshold_sweep(
    raster: &ThermalRaster,
    footprints: &[BinaryMask],
    resolution: f64,
    conn: Connectivity,
) -> Result<Vec<ThresholdTrial>> {
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(Error::Parameter(format!("resolution must be > 0, got {resolution}")));
    }
    let (lo, hi) = raster
        .min_max()
        .ok_or_else(|| Error::DegenerateInput("raster has no valid pixels".into()))?;
    let n = ((hi - lo) / resolution).floor() as usize;
    (0..=n)
        .into_par_iter()
        .map(|i| {
            let threshold = lo + i as f64 * resolution;
            let mask = threshold_at(raster, threshold);
            Ok(ThresholdTrial {
                threshold,
                ious: per_blob_iou(&mask, footprints, conn)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub delta: f64,
    /// Union of all dome supports over the run.
    pub total_support_area: usize,
    /// Absolute difference from the finest-step area, in percent.
    pub area_diff_pct: f64,
    /// Step limit, `floor(contrast / delta)`.
    pub max_step: usize,
    /// Steps actually run after the initial reconstruction.
    pub steps_run: usize,
}

/// Runs the extraction once per step size and compares the union-support
/// area with the run at [`FINEST_DELTA`]. Rows come back sorted by delta.
pub fn step_size_sweep(t_s: &ThermalRaster, cfg: &ExtractionConfig, deltas: &[f64]) -> Result<Vec<SweepRow>> {
    if !deltas.iter().any(|&d| (d - FINEST_DELTA).abs() < 1e-12) {
        return Err(Error::Parameter(format!(
            "deltas must include the finest step {FINEST_DELTA}"
        )));
    }
    let mut deltas = deltas.to_vec();
    deltas.sort_by(f64::total_cmp);
    deltas.dedup();
    let contrast = t_s.min_max().map_or(0.0, |(lo, hi)| hi - lo);

    let runs: Vec<(f64, usize, usize, usize)> = deltas
        .par_iter()
        .map(|&delta| {
            let mut c = cfg.clone();
            c.delta = delta;
            let seq = extract_maxima_sequence(t_s, &c)?;
            let limit = if contrast > cfg.morph.plateau_eps {
                max_steps(contrast, delta)?
            } else {
                0
            };
            Ok((delta, seq.union_area(), limit, seq.entries.len() - 1))
        })
        .collect::<Result<_>>()?;

    let reference = runs
        .iter()
        .find(|r| (r.0 - FINEST_DELTA).abs() < 1e-12)
        .map(|r| r.1)
        .expect("finest delta is present");
    Ok(runs
        .into_iter()
        .map(|(delta, area, max_step, steps_run)| SweepRow {
            delta,
            total_support_area: area,
            area_diff_pct: if reference == 0 {
                if area == 0 { 0.0 } else { 100.0 }
            } else {
                100.0 * (area as f64 - reference as f64).abs() / reference as f64
            },
            max_step,
            steps_run,
        })
        .collect())
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("delta,total_support_area,area_diff_pct,max_step,steps_run\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{:.4},{},{}",
            r.delta, r.total_support_area, r.area_diff_pct, r.max_step, r.steps_run
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn left_half() -> BinaryMask {
        BinaryMask::from_fn(4, 4, |x, _| x < 2).unwrap()
    }

    #[test]
    fn iou_examples() {
        let a = left_half();
        let full = BinaryMask::full(a.shape());
        assert_eq!(iou(&a, &a).unwrap(), 1.0);
        assert_eq!(iou(&a, &full).unwrap(), 0.5);
        let right = BinaryMask::from_fn(4, 4, |x, _| x >= 2).unwrap();
        assert_eq!(iou(&a, &right).unwrap(), 0.0);
        let empty = BinaryMask::empty(a.shape());
        assert_eq!(iou(&empty, &empty).unwrap(), 1.0);
        let other = BinaryMask::empty(crate::raster::Shape::new(3, 3));
        assert!(iou(&a, &other).is_err());
    }

    #[test]
    fn footprint_iou_counts_leakage() {
        // prediction covers the footprint plus a connected tail
        let fp = BinaryMask::from_fn(6, 1, |x, _| x < 2).unwrap();
        let pred = BinaryMask::from_fn(6, 1, |x, _| x < 4).unwrap();
        assert_eq!(footprint_iou(&pred, &fp, Connectivity::Eight).unwrap(), 0.5);
        // a disconnected blob elsewhere is not charged
        let pred = BinaryMask::from_fn(6, 1, |x, _| x < 2 || x == 5).unwrap();
        assert_eq!(footprint_iou(&pred, &fp, Connectivity::Eight).unwrap(), 1.0);
    }

    #[test]
    fn sweep_needs_finest_delta() {
        let r = ThermalRaster::filled(4, 4, 1.0).unwrap();
        let cfg = ExtractionConfig::default();
        assert!(step_size_sweep(&r, &cfg, &[0.1, 0.2]).is_err());
        let rows = step_size_sweep(&r, &cfg, &[0.1, 0.05]).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].delta, 0.05);
        assert_eq!(rows[0].area_diff_pct, 0.0);
    }

    #[test]
    fn sweep_csv_layout() {
        let rows = [SweepRow {
            delta: 0.05,
            total_support_area: 10,
            area_diff_pct: 0.0,
            max_step: 66,
            steps_run: 12,
        }];
        assert_eq!(
            sweep_csv(&rows),
            "delta,total_support_area,area_diff_pct,max_step,steps_run\n0.05,10,0.0000,66,12\n"
        );
    }
}
