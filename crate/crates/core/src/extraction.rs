//! Iterative top-down regional-maxima extraction.
//!
//! Step 0 is a plain h-dome at the initial offset `h_in`. Step `n >= 1`
//! reconstructs under the cubic-weight regularized marker with offset
//! `h_in + n * delta`. The loop ends after `floor(contrast / delta)` steps,
//! or earlier when the total support area stops growing (relative growth
//! rate below `q_threshold` for `patience` consecutive steps), or when two
//! consecutive steps produce no support at all.

use std::fmt;

use crate::error::{Error, Result};
use crate::morphology::{
    dome_from_reconstruction, h_dome, reconstruct, regularized_marker_with_weights, MorphSettings,
};
use crate::raster::{BinaryMask, ThermalRaster};
use crate::regions::RegionSet;

/// Smallest step size worth resolving; matches a 0.05 °C camera sensitivity.
pub const MIN_STEP: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityParams {
    /// Upper bound on the relative area growth rate of a stable step.
    pub q_threshold: f64,
    /// Number of consecutive stable steps that ends the loop.
    pub patience: usize,
}

impl Default for StabilityParams {
    fn default() -> Self {
        StabilityParams {
            q_threshold: 0.05,
            patience: 3,
        }
    }
}

/// Which raster the regularizing weight `w` is normalized from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightSource {
    /// The raster being reconstructed (the diffused image).
    #[default]
    Smoothed,
    /// The raw input raster.
    Raw,
}

impl WeightSource {
    pub fn as_str(self) -> &'static str {
        match self {
            WeightSource::Smoothed => "smoothed",
            WeightSource::Raw => "raw",
        }
    }
}

impl std::str::FromStr for WeightSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "smoothed" => Ok(WeightSource::Smoothed),
            "raw" => Ok(WeightSource::Raw),
            other => Err(Error::Parameter(format!("unknown weight source '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionConfig {
    /// Initial offset in °C.
    pub h_in: f64,
    /// Offset step in °C.
    pub delta: f64,
    pub morph: MorphSettings,
    pub stability: StabilityParams,
    /// Replaces the contrast-derived step limit when set.
    pub max_steps_override: Option<usize>,
    pub weight_source: WeightSource,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            h_in: 0.5,
            delta: 0.1,
            morph: MorphSettings::default(),
            stability: StabilityParams::default(),
            max_steps_override: None,
            weight_source: WeightSource::Smoothed,
        }
    }
}

impl ExtractionConfig {
    pub fn validate(&self) -> Result<()> {
        self.morph.validate()?;
        if !(self.h_in.is_finite() && self.h_in > self.morph.plateau_eps) {
            return Err(Error::Parameter(format!("h_in must be > 0, got {}", self.h_in)));
        }
        // tolerate representation error in decimal inputs like 0.05
        if !(self.delta.is_finite() && self.delta >= MIN_STEP * (1.0 - 1e-9)) {
            return Err(Error::Parameter(format!(
                "delta must be >= {MIN_STEP}, got {}",
                self.delta
            )));
        }
        if !(self.stability.q_threshold.is_finite() && self.stability.q_threshold > 0.0) {
            return Err(Error::Parameter(format!(
                "q_threshold must be > 0, got {}",
                self.stability.q_threshold
            )));
        }
        if self.stability.patience == 0 {
            return Err(Error::Parameter("patience must be >= 1".into()));
        }
        Ok(())
    }
}

/// `floor(max_contrast / delta)`, treating quotients within 1e-9 (relative)
/// of an integer as that integer so that e.g. `3.3 / 0.1` gives 33.
pub fn max_steps(max_contrast: f64, delta: f64) -> Result<usize> {
    if !(max_contrast.is_finite() && max_contrast > 0.0) {
        return Err(Error::Parameter(format!(
            "max contrast must be > 0, got {max_contrast}"
        )));
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::Parameter(format!("delta must be > 0, got {delta}")));
    }
    let q = max_contrast / delta;
    let nearest = q.round();
    let steps = if (q - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest
    } else {
        q.floor()
    };
    Ok(steps as usize)
}

/// Relative area growth `(next - prev) / cur` around the current step.
pub fn stability_score(area_prev: usize, area_cur: usize, area_next: usize) -> Result<f64> {
    if area_cur == 0 {
        return Err(Error::UndefinedScore);
    }
    Ok((area_next as f64 - area_prev as f64) / area_cur as f64)
}

/// Why the extraction loop ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopCause {
    /// The raster is flat; nothing to extract.
    NoContrast,
    /// The step limit was reached.
    MaxSteps,
    /// Total support area was stable for `patience` steps, ending at `step`.
    Stable { step: usize },
    /// Two consecutive steps produced no support, ending at `step`.
    Empty { step: usize },
}

impl fmt::Display for StopCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StopCause::NoContrast => f.write_str("no contrast"),
            StopCause::MaxSteps => f.write_str("max steps"),
            StopCause::Stable { step } => write!(f, "stable at step {step}"),
            StopCause::Empty { step } => write!(f, "empty at step {step}"),
        }
    }
}

/// Supports found at one offset.
#[derive(Debug, Clone, PartialEq)]
pub struct MaximaStep {
    pub step: usize,
    /// Offset in °C (`h_in + step * delta`).
    pub offset: f64,
    pub regions: RegionSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaximaSequence {
    pub entries: Vec<MaximaStep>,
    /// Contrast (max - min over valid pixels) of the reconstructed raster.
    pub contrast: f64,
    /// Step limit in force.
    pub max_steps: usize,
    pub stop: StopCause,
    /// Steps whose total support area fell below the previous step's.
    pub area_decreases: Vec<usize>,
}

impl MaximaSequence {
    pub fn total_areas(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.regions.total_area()).collect()
    }

    /// Pixels covered by any support of any step.
    pub fn union_support(&self) -> Option<BinaryMask> {
        let first = self.entries.first()?;
        let mut mask = BinaryMask::empty(first.regions.shape());
        for e in &self.entries {
            mask.union_with(&e.regions.to_mask())
                .expect("all steps share one shape");
        }
        Some(mask)
    }

    pub fn union_area(&self) -> usize {
        self.union_support().map_or(0, |m| m.count())
    }
}

/// Runs the extraction loop on an already smoothed raster.
pub fn extract_maxima_sequence(t_s: &ThermalRaster, cfg: &ExtractionConfig) -> Result<MaximaSequence> {
    extract_with_weights(t_s, t_s, cfg)
}

/// Like [`extract_maxima_sequence`] but normalizes the regularizing weight
/// from `weights` instead of `t_s`.
pub fn extract_with_weights(
    t_s: &ThermalRaster,
    weights: &ThermalRaster,
    cfg: &ExtractionConfig,
) -> Result<MaximaSequence> {
    cfg.validate()?;
    t_s.shape().check_same(weights.shape())?;
    let settings = &cfg.morph;
    let contrast = t_s.min_max().map_or(0.0, |(lo, hi)| hi - lo);
    if contrast <= settings.plateau_eps {
        return Ok(MaximaSequence {
            entries: vec![MaximaStep {
                step: 0,
                offset: cfg.h_in,
                regions: RegionSet::empty(t_s.shape(), settings.connectivity),
            }],
            contrast,
            max_steps: 0,
            stop: StopCause::NoContrast,
            area_decreases: Vec::new(),
        });
    }
    let limit = match cfg.max_steps_override {
        Some(n) => n,
        None => max_steps(contrast, cfg.delta)?,
    };

    let first = h_dome(t_s, cfg.h_in, settings)?;
    let mut entries = vec![MaximaStep {
        step: 0,
        offset: cfg.h_in,
        regions: first.support,
    }];
    let mut areas = vec![entries[0].regions.total_area()];
    let mut area_decreases = Vec::new();
    let mut empty_run = usize::from(areas[0] == 0);
    let mut stable_run = 0;
    let mut stop = StopCause::MaxSteps;

    for n in 1..=limit {
        let offset = cfg.h_in + n as f64 * cfg.delta;
        let marker = regularized_marker_with_weights(t_s, weights, offset)?;
        let rec = reconstruct(&marker, t_s, settings)?;
        let dome = dome_from_reconstruction(t_s, &rec, settings);
        let area = dome.support.total_area();
        entries.push(MaximaStep {
            step: n,
            offset,
            regions: dome.support,
        });
        if area < areas[n - 1] {
            area_decreases.push(n);
        }
        areas.push(area);

        if area == 0 {
            empty_run += 1;
            if empty_run >= 2 {
                stop = StopCause::Empty { step: n };
                break;
            }
        } else {
            empty_run = 0;
        }

        if n >= 2 {
            match stability_score(areas[n - 2], areas[n - 1], areas[n]) {
                Ok(q) if q.abs() < cfg.stability.q_threshold => stable_run += 1,
                _ => stable_run = 0,
            }
            if stable_run >= cfg.stability.patience {
                stop = StopCause::Stable { step: n };
                break;
            }
        }
    }

    Ok(MaximaSequence {
        entries,
        contrast,
        max_steps: limit,
        stop,
        area_decreases,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_count_anchors() {
        assert_eq!(max_steps(3.3, 0.1).unwrap(), 33);
        assert_eq!(max_steps(14.85, 0.15).unwrap(), 99);
        assert_eq!(max_steps(1.0, 0.5).unwrap(), 2);
        assert_eq!(max_steps(1.04, 0.5).unwrap(), 2);
        assert!(max_steps(0.0, 0.1).is_err());
        assert!(max_steps(1.0, -0.1).is_err());
    }

    #[test]
    fn stability_score_examples() {
        assert_eq!(stability_score(10, 10, 10).unwrap(), 0.0);
        assert_eq!(stability_score(10, 20, 30).unwrap(), 1.0);
        assert!((stability_score(100, 101, 102).unwrap() - 2.0 / 101.0).abs() < 1e-15);
        assert!(matches!(stability_score(1, 0, 2), Err(Error::UndefinedScore)));
    }

    #[test]
    fn flat_raster_has_no_maxima() {
        let r = ThermalRaster::filled(6, 6, 20.0).unwrap();
        let seq = extract_maxima_sequence(&r, &ExtractionConfig::default()).unwrap();
        assert_eq!(seq.entries.len(), 1);
        assert!(seq.entries[0].regions.is_empty());
        assert_eq!(seq.stop, StopCause::NoContrast);
    }

    #[test]
    fn config_validation() {
        let bad_delta = ExtractionConfig {
            delta: 0.01,
            ..Default::default()
        };
        assert!(bad_delta.validate().is_err());
        let fine = ExtractionConfig {
            delta: 0.05,
            ..Default::default()
        };
        assert!(fine.validate().is_ok());
        let bad_h = ExtractionConfig {
            h_in: 0.0,
            ..Default::default()
        };
        assert!(bad_h.validate().is_err());
    }

    #[test]
    fn offsets_advance_by_delta() {
        let r = ThermalRaster::from_fn(12, 1, |x, _| (x as f64 * 0.7).sin() * 2.0).unwrap();
        let cfg = ExtractionConfig {
            stability: StabilityParams {
                q_threshold: 0.05,
                patience: 1000,
            },
            ..Default::default()
        };
        let seq = extract_maxima_sequence(&r, &cfg).unwrap();
        assert_eq!(seq.stop, StopCause::MaxSteps);
        assert_eq!(seq.entries.len(), seq.max_steps + 1);
        for pair in seq.entries.windows(2) {
            assert!((pair[1].offset - pair[0].offset - 0.1).abs() < 1e-12);
        }
    }
}
