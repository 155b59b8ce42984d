//! Boundary gradient statistics and region screening.
//!
//! A reference set of defect-boundary pixels is estimated from the gradient
//! map by an exact 2-means split of the positive magnitudes; its mean and
//! coefficient of variation become templates. A candidate region passes
//! when the gradient along its inner boundary matches both templates.

use std::fmt;

use crate::cluster::two_means_1d;
use crate::error::{Error, Result};
use crate::raster::{BinaryMask, Connectivity, GradientRaster};
use crate::regions::{filter_small, RegionSet};
use crate::stats::mean_std;

/// Gradient statistics of the reference boundary pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceStats {
    pub m_grad: f64,
    pub delta_std: f64,
    /// Coefficient of variation, `delta_std / m_grad`.
    pub v_var: f64,
}

impl ReferenceStats {
    pub fn from_mean_std(m_grad: f64, delta_std: f64) -> Result<Self> {
        if !(m_grad.is_finite() && m_grad > 0.0) {
            return Err(Error::Parameter(format!("mean gradient must be > 0, got {m_grad}")));
        }
        if !(delta_std.is_finite() && delta_std >= 0.0) {
            return Err(Error::Parameter(format!(
                "standard deviation must be >= 0, got {delta_std}"
            )));
        }
        Ok(ReferenceStats {
            m_grad,
            delta_std,
            v_var: delta_std / m_grad,
        })
    }

    /// Mean and population standard deviation of `values`.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        let (m, s) = mean_std(values)
            .ok_or_else(|| Error::NoReference("no reference pixels".into()))?;
        Self::from_mean_std(m, s)
    }
}

/// Acceptance bands derived from [`ReferenceStats`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScreeningBands {
    /// Mean band is `m_grad -/+ delta_std * mean_halfwidth_factor`.
    pub mean_halfwidth_factor: f64,
    /// CV band is `[cv_low_factor * v_var, cv_high_factor * v_var]`.
    pub cv_low_factor: f64,
    pub cv_high_factor: f64,
}

impl Default for ScreeningBands {
    fn default() -> Self {
        ScreeningBands {
            mean_halfwidth_factor: 0.5,
            cv_low_factor: 0.5,
            cv_high_factor: 1.9,
        }
    }
}

impl ScreeningBands {
    pub fn validate(&self) -> Result<()> {
        let ok = self.mean_halfwidth_factor.is_finite()
            && self.mean_halfwidth_factor >= 0.0
            && self.cv_low_factor > 0.0
            && self.cv_low_factor < self.cv_high_factor
            && self.cv_high_factor.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Parameter(format!(
                "bands need halfwidth >= 0 and 0 < cv_low < cv_high, got {}, {}, {}",
                self.mean_halfwidth_factor, self.cv_low_factor, self.cv_high_factor
            )))
        }
    }

    pub fn mean_band(&self, stats: &ReferenceStats) -> (f64, f64) {
        let half = stats.delta_std * self.mean_halfwidth_factor;
        (stats.m_grad - half, stats.m_grad + half)
    }

    pub fn cv_band(&self, stats: &ReferenceStats) -> (f64, f64) {
        (self.cv_low_factor * stats.v_var, self.cv_high_factor * stats.v_var)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefParams {
    /// Reference components smaller than this many pixels are discarded.
    pub min_area: usize,
    /// Pixels (road paint, joints) ignored when estimating the reference.
    pub exclusion_mask: Option<BinaryMask>,
    pub connectivity: Connectivity,
}

impl Default for RefParams {
    fn default() -> Self {
        RefParams {
            min_area: 25,
            exclusion_mask: None,
            connectivity: Connectivity::Eight,
        }
    }
}

/// Estimates the defect-boundary mask `D_g` and its gradient statistics.
///
/// Excluded pixels are zeroed, the positive magnitudes are split by exact
/// 2-means, the high cluster is cleaned of components below `min_area`, and
/// the statistics are taken over what remains.
pub fn reference_stats(
    g_s: &GradientRaster,
    params: &RefParams,
) -> Result<(ReferenceStats, BinaryMask)> {
    if params.min_area == 0 {
        return Err(Error::Parameter("min_area must be >= 1".into()));
    }
    let shape = g_s.shape();
    let usable = |p: usize| {
        g_s.is_valid(p)
            && params
                .exclusion_mask
                .as_ref()
                .is_none_or(|m| !m.at(p))
    };
    if let Some(m) = &params.exclusion_mask {
        shape.check_same(m.shape())?;
    }
    let v = g_s.values();
    let positive: Vec<f64> = (0..shape.len())
        .filter(|&p| usable(p) && v[p] > 0.0)
        .map(|p| v[p])
        .collect();
    let split = two_means_1d(&positive).map_err(|e| match e {
        Error::DegenerateInput(msg) => Error::NoReference(format!("gradient map is degenerate: {msg}")),
        other => other,
    })?;
    let high = BinaryMask::from_fn(shape.width, shape.height, |x, y| {
        let p = y * shape.width + x;
        usable(p) && v[p] > split.threshold
    })?;
    let d_g = filter_small(&high, params.connectivity, params.min_area);
    let samples: Vec<f64> = d_g.iter_set().map(|p| v[p]).collect();
    if samples.is_empty() {
        return Err(Error::NoReference(format!(
            "no boundary component of at least {} pixels above gradient {:.4}",
            params.min_area, split.threshold
        )));
    }
    Ok((ReferenceStats::from_values(&samples)?, d_g))
}

/// Outcome of screening one region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Accepted,
    /// Fewer than three usable boundary pixels.
    TooSmall,
    MeanOutOfBand,
    CvOutOfBand,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Accepted => "accepted",
            Verdict::TooSmall => "too-small",
            Verdict::MeanOutOfBand => "mean-out-of-band",
            Verdict::CvOutOfBand => "cv-out-of-band",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionScreening {
    pub region_id: u32,
    pub area: usize,
    pub boundary_len: usize,
    /// NaN when the boundary is too small.
    pub boundary_mean: f64,
    pub boundary_cv: f64,
    pub verdict: Verdict,
}

pub const MIN_BOUNDARY_PIXELS: usize = 3;

/// Classifies boundary gradient `values` against the bands.
pub fn judge_boundary(values: &[f64], stats: &ReferenceStats, bands: &ScreeningBands) -> (f64, f64, Verdict) {
    if values.len() < MIN_BOUNDARY_PIXELS {
        return (f64::NAN, f64::NAN, Verdict::TooSmall);
    }
    let (mean, std) = mean_std(values).expect("non-empty");
    let cv = if mean > 0.0 { std / mean } else { f64::NAN };
    let (mlo, mhi) = bands.mean_band(stats);
    let (clo, chi) = bands.cv_band(stats);
    let verdict = if !(mlo..=mhi).contains(&mean) {
        Verdict::MeanOutOfBand
    } else if !(clo..=chi).contains(&cv) {
        Verdict::CvOutOfBand
    } else {
        Verdict::Accepted
    };
    (mean, cv, verdict)
}

/// Keeps the regions of `r_n` whose inner-boundary gradient mean and
/// coefficient of variation both fall inside the bands.
pub fn screen_regions(
    r_n: &RegionSet,
    g_s: &GradientRaster,
    stats: &ReferenceStats,
    bands: &ScreeningBands,
) -> Result<(RegionSet, Vec<RegionScreening>)> {
    r_n.shape().check_same(g_s.shape())?;
    bands.validate()?;
    let v = g_s.values();
    let mut report = Vec::with_capacity(r_n.len());
    for region in r_n.regions() {
        let values: Vec<f64> = region
            .inner_boundary
            .iter()
            .filter(|&&p| g_s.is_valid(p))
            .map(|&p| v[p])
            .collect();
        let (mean, cv, verdict) = judge_boundary(&values, stats, bands);
        report.push(RegionScreening {
            region_id: region.id,
            area: region.area(),
            boundary_len: values.len(),
            boundary_mean: mean,
            boundary_cv: cv,
            verdict,
        });
    }
    let kept = r_n.retain(|r| report[r.id as usize - 1].verdict == Verdict::Accepted);
    Ok((kept, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::Shape;
    use crate::regions::connected_components;

    fn bridge() -> ReferenceStats {
        ReferenceStats::from_mean_std(0.3814, 0.1439).unwrap()
    }

    #[test]
    fn coefficient_of_variation() {
        assert!((bridge().v_var - 0.3773).abs() < 1e-3);
        let slab = ReferenceStats::from_mean_std(0.0608, 0.022).unwrap();
        assert!((slab.v_var - 0.3618).abs() < 1e-3);
        assert!(ReferenceStats::from_mean_std(0.0, 0.1).is_err());
        assert!(ReferenceStats::from_mean_std(0.1, -0.1).is_err());
    }

    #[test]
    fn default_bands_on_bridge_stats() {
        let b = ScreeningBands::default();
        let (lo, hi) = b.mean_band(&bridge());
        assert!((lo - 0.30945).abs() < 1e-4 && (hi - 0.45335).abs() < 1e-4);
        let (clo, chi) = b.cv_band(&bridge());
        assert!((clo - 0.1886).abs() < 1e-4 && (chi - 0.7169).abs() < 1e-3);
    }

    #[test]
    fn judge_examples() {
        let b = ScreeningBands::default();
        // mean 0.38, population CV 0.37
        let d = 0.38 * 0.37;
        let kept = [0.38 - d, 0.38 + d, 0.38 - d, 0.38 + d];
        let (m, cv, v) = judge_boundary(&kept, &bridge(), &b);
        assert!((m - 0.38).abs() < 1e-12 && (cv - 0.37).abs() < 1e-12);
        assert_eq!(v, Verdict::Accepted);
        let low = [0.05, 0.15, 0.05, 0.15];
        assert_eq!(judge_boundary(&low, &bridge(), &b).2, Verdict::MeanOutOfBand);
        let flat = [0.38; 6];
        assert_eq!(judge_boundary(&flat, &bridge(), &b).2, Verdict::CvOutOfBand);
        assert_eq!(judge_boundary(&[0.38, 0.4], &bridge(), &b).2, Verdict::TooSmall);
    }

    #[test]
    fn empty_region_set_screens_to_empty() {
        let shape = Shape::new(4, 4);
        let g = GradientRaster::new(4, 4, vec![0.3; 16]).unwrap();
        let rs = RegionSet::empty(shape, Connectivity::Eight);
        let (kept, report) = screen_regions(&rs, &g, &bridge(), &ScreeningBands::default()).unwrap();
        assert!(kept.is_empty() && report.is_empty());
    }

    #[test]
    fn tiny_regions_are_rejected_as_too_small() {
        let g = GradientRaster::new(3, 3, vec![0.38; 9]).unwrap();
        let m = BinaryMask::from_fn(3, 3, |x, y| x == 1 && y == 1).unwrap();
        let rs = connected_components(&m, Connectivity::Eight);
        let (kept, report) = screen_regions(&rs, &g, &bridge(), &ScreeningBands::default()).unwrap();
        assert!(kept.is_empty());
        assert_eq!(report[0].verdict, Verdict::TooSmall);
    }

    #[test]
    fn reference_on_two_level_field() {
        // 6x6 block of strong gradients on a weak background
        let g = GradientRaster::new(
            12,
            12,
            (0..144)
                .map(|i| {
                    let (x, y) = (i % 12, i / 12);
                    if (3..9).contains(&x) && (3..9).contains(&y) {
                        if (x + y) % 2 == 0 { 0.5 } else { 0.3 }
                    } else {
                        0.01
                    }
                })
                .collect(),
        )
        .unwrap();
        let (stats, d_g) = reference_stats(&g, &RefParams::default()).unwrap();
        assert_eq!(d_g.count(), 36);
        assert!((stats.m_grad - 0.4).abs() < 1e-12);
        assert!((stats.delta_std - 0.1).abs() < 1e-12);

        let strict = RefParams {
            min_area: 37,
            ..Default::default()
        };
        assert!(matches!(reference_stats(&g, &strict), Err(Error::NoReference(_))));

        let excl = BinaryMask::from_fn(12, 12, |x, _| x >= 6).unwrap();
        let params = RefParams {
            min_area: 4,
            exclusion_mask: Some(excl.clone()),
            ..Default::default()
        };
        let (_, d_g) = reference_stats(&g, &params).unwrap();
        assert_eq!(d_g.intersection_count(&excl).unwrap(), 0);
        assert_eq!(d_g.count(), 18);
    }

    #[test]
    fn flat_gradient_has_no_reference() {
        let g = GradientRaster::new(4, 4, vec![0.2; 16]).unwrap();
        assert!(matches!(
            reference_stats(&g, &RefParams::default()),
            Err(Error::NoReference(_))
        ));
    }
}
