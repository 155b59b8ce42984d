//! Segmentation of warm subsurface defects in single-band thermal rasters.
//!
//! The pipeline smooths the raster with nonlinear diffusion, extracts
//! regional maxima through a sequence of regularized grayscale
//! reconstructions with growing offsets, and keeps the maxima whose boundary
//! gradient statistics match a reference estimated from the gradient map.
//! Conventional threshold and k-means segmenters, a synthetic scene
//! generator and evaluation helpers are included for comparison.

pub mod baselines;
pub mod cluster;
pub mod discrimination;
pub mod error;
pub mod eval;
pub mod extraction;
pub mod io;
pub mod morphology;
pub mod pipeline;
pub mod raster;
pub mod regions;
pub mod smoothing;
pub mod stats;
pub mod synth;

pub use baselines::{kmeans_temperature_segment, threshold_segment, ThresholdSpec};
pub use discrimination::{RefParams, ReferenceStats, ScreeningBands, Verdict};
pub use error::{Error, Result};
pub use eval::{iou, step_size_sweep, SweepRow};
pub use extraction::{extract_maxima_sequence, ExtractionConfig, MaximaSequence, StopCause, WeightSource};
pub use morphology::{MorphSettings, StructuringElement};
pub use pipeline::{segment, PipelineConfig, SegmentReport, Segmentation};
pub use raster::{BinaryMask, Connectivity, GradientRaster, Shape, ThermalRaster};
pub use regions::{connected_components, Region, RegionSet};
pub use smoothing::{DiffusionParams, Kappa};
pub use synth::{gen_scene, GroundTruth, SceneSpec};
