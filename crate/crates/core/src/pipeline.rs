//! End-to-end segmentation: smoothing, gradient map, maxima extraction,
//! reference estimation, per-step screening and the final union.
//!
//! Also defines the plain-text pipeline configuration. One `key = value`
//! pair per line, keys prefixed by section; `#` starts a comment. Keys under
//! `report.` are ignored so a run report can be fed back as a config.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::discrimination::{
    reference_stats, screen_regions, RefParams, ReferenceStats, ScreeningBands, Verdict,
};
use crate::error::{Error, Result};
use crate::extraction::{extract_with_weights, ExtractionConfig, StopCause, WeightSource};
use crate::morphology::StructuringElement;
use crate::raster::{BinaryMask, Connectivity, ThermalRaster};
use crate::smoothing::{diffuse, gradient_magnitude, resolve_kappa, DiffusionParams, Kappa};

/// Input and output locations recorded alongside the analysis parameters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IoConfig {
    pub input: Option<PathBuf>,
    /// Raster format string, e.g. `csv` or `pgm16:0.01:-20`.
    pub format: Option<String>,
    pub output: Option<PathBuf>,
    pub exclusion_mask: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PipelineConfig {
    pub diffusion: DiffusionParams,
    pub extraction: ExtractionConfig,
    pub reference: RefParams,
    pub bands: ScreeningBands,
    pub io: IoConfig,
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Parameter(format!("{key}: cannot parse '{value}'")))
}

fn optional_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.diffusion.validate()?;
        self.extraction.validate()?;
        self.bands.validate()?;
        if self.reference.min_area == 0 {
            return Err(Error::Parameter("min_area must be >= 1".into()));
        }
        Ok(())
    }

    /// Sets the connectivity used for maxima, structuring element and
    /// reference components.
    pub fn set_connectivity(&mut self, conn: Connectivity) {
        self.extraction.morph.connectivity = conn;
        self.extraction.morph.se = StructuringElement::for_connectivity(conn);
        self.reference.connectivity = conn;
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "diffusion.sigma" => self.diffusion.sigma = parse_num(key, value)?,
            "diffusion.kappa" => {
                self.diffusion.kappa = if value.eq_ignore_ascii_case("auto") {
                    Kappa::Auto
                } else {
                    Kappa::Fixed(parse_num(key, value)?)
                }
            }
            "diffusion.tau" => self.diffusion.tau = parse_num(key, value)?,
            "diffusion.iterations" => self.diffusion.iterations = parse_num(key, value)?,
            "extraction.h_in" => self.extraction.h_in = parse_num(key, value)?,
            "extraction.delta" => self.extraction.delta = parse_num(key, value)?,
            "extraction.plateau_eps" => self.extraction.morph.plateau_eps = parse_num(key, value)?,
            "extraction.connectivity" => {
                self.set_connectivity(Connectivity::from_number(parse_num(key, value)?)?)
            }
            "extraction.q_threshold" => self.extraction.stability.q_threshold = parse_num(key, value)?,
            "extraction.patience" => self.extraction.stability.patience = parse_num(key, value)?,
            "extraction.max_steps" => {
                self.extraction.max_steps_override = if value.eq_ignore_ascii_case("auto") {
                    None
                } else {
                    Some(parse_num(key, value)?)
                }
            }
            "extraction.weight_source" => self.extraction.weight_source = value.parse()?,
            "reference.min_area" => self.reference.min_area = parse_num(key, value)?,
            "bands.mean_halfwidth" => self.bands.mean_halfwidth_factor = parse_num(key, value)?,
            "bands.cv_low" => self.bands.cv_low_factor = parse_num(key, value)?,
            "bands.cv_high" => self.bands.cv_high_factor = parse_num(key, value)?,
            "io.input" => self.io.input = optional_path(value),
            "io.format" => self.io.format = (!value.is_empty()).then(|| value.to_string()),
            "io.output" => self.io.output = optional_path(value),
            "io.exclusion_mask" => self.io.exclusion_mask = optional_path(value),
            k if k.starts_with("report.") => {}
            other => return Err(Error::Parameter(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Parses a configuration, starting from the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Parameter(format!("config line {}: expected key = value", i + 1))
            })?;
            cfg.set(key, value)
                .map_err(|e| Error::Parameter(format!("config line {}: {e}", i + 1)))?;
        }
        Ok(cfg)
    }

    /// Every setting, one `key = value` per line, in a fixed order.
    pub fn to_text(&self) -> String {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let d = &self.diffusion;
        let e = &self.extraction;
        let kappa = match d.kappa {
            Kappa::Auto => "auto".to_string(),
            Kappa::Fixed(k) => k.to_string(),
        };
        let max_steps = e
            .max_steps_override
            .map_or_else(|| "auto".to_string(), |n| n.to_string());
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("diffusion.sigma", d.sigma.to_string());
        kv("diffusion.kappa", kappa);
        kv("diffusion.tau", d.tau.to_string());
        kv("diffusion.iterations", d.iterations.to_string());
        kv("extraction.h_in", e.h_in.to_string());
        kv("extraction.delta", e.delta.to_string());
        kv("extraction.plateau_eps", e.morph.plateau_eps.to_string());
        kv("extraction.connectivity", e.morph.connectivity.number().to_string());
        kv("extraction.q_threshold", e.stability.q_threshold.to_string());
        kv("extraction.patience", e.stability.patience.to_string());
        kv("extraction.max_steps", max_steps);
        kv("extraction.weight_source", e.weight_source.as_str().to_string());
        kv("reference.min_area", self.reference.min_area.to_string());
        kv("bands.mean_halfwidth", self.bands.mean_halfwidth_factor.to_string());
        kv("bands.cv_low", self.bands.cv_low_factor.to_string());
        kv("bands.cv_high", self.bands.cv_high_factor.to_string());
        kv("io.input", path(&self.io.input));
        kv("io.format", self.io.format.clone().unwrap_or_default());
        kv("io.output", path(&self.io.output));
        kv("io.exclusion_mask", path(&self.io.exclusion_mask));
        out
    }
}

/// Per-step counts recorded in the run report.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSummary {
    pub step: usize,
    pub offset: f64,
    pub regions: usize,
    pub total_area: usize,
    pub accepted: usize,
    pub rejected_mean: usize,
    pub rejected_cv: usize,
    pub too_small: usize,
    /// Accepted by the bands but smaller than `min_area`.
    pub undersized: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentReport {
    pub config: PipelineConfig,
    pub kappa: f64,
    pub contrast: f64,
    pub max_steps: usize,
    pub stop: StopCause,
    pub stats: Option<ReferenceStats>,
    pub reference_area: usize,
    pub support_area: usize,
    pub mask_area: usize,
    /// Whether the final mask lies inside the union of all supports.
    pub subset_ok: bool,
    /// Steps whose total support area dropped below the previous step.
    pub area_decreases: Vec<usize>,
    pub steps: Vec<StepSummary>,
}

impl SegmentReport {
    /// Human-readable summary.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let e = &self.config.extraction;
        let _ = writeln!(s, "segmentation report");
        let _ = writeln!(s, "  h_in = {} °C, delta = {} °C", e.h_in, e.delta);
        let _ = writeln!(
            s,
            "  sigma = {}, kappa = {}, tau = {}, iterations = {}",
            self.config.diffusion.sigma, self.kappa, self.config.diffusion.tau, self.config.diffusion.iterations
        );
        let _ = writeln!(s, "  contrast = {:.4} °C, max steps = {}", self.contrast, self.max_steps);
        let _ = writeln!(s, "  steps run = {}, stop cause: {}", self.steps.len(), self.stop);
        match &self.stats {
            Some(st) => {
                let (mlo, mhi) = self.config.bands.mean_band(st);
                let (clo, chi) = self.config.bands.cv_band(st);
                let _ = writeln!(
                    s,
                    "  reference: M_grad = {:.6}, std = {:.6}, V_var = {:.6} over {} px",
                    st.m_grad, st.delta_std, st.v_var, self.reference_area
                );
                let _ = writeln!(
                    s,
                    "  bands: mean [{mlo:.6}, {mhi:.6}], cv [{clo:.6}, {chi:.6}]"
                );
            }
            None => {
                let _ = writeln!(s, "  reference: not estimated");
            }
        }
        let _ = writeln!(
            s,
            "  support area = {} px, mask area = {} px, mask within supports: {}",
            self.support_area,
            self.mask_area,
            if self.subset_ok { "yes" } else { "NO" }
        );
        if !self.area_decreases.is_empty() {
            let _ = writeln!(s, "  flagged: total support area decreased at steps {:?}", self.area_decreases);
        }
        let _ = writeln!(
            s,
            "  step  offset  regions  area  accepted  mean-rej  cv-rej  too-small  undersized"
        );
        for st in &self.steps {
            let _ = writeln!(
                s,
                "  {:>4}  {:>6.3}  {:>7}  {:>4}  {:>8}  {:>8}  {:>6}  {:>9}  {:>10}",
                st.step,
                st.offset,
                st.regions,
                st.total_area,
                st.accepted,
                st.rejected_mean,
                st.rejected_cv,
                st.too_small,
                st.undersized
            );
        }
        s
    }

    /// Machine-readable `key = value` form; begins with the full config so
    /// the file can be passed back as `--config`.
    pub fn to_kv(&self) -> String {
        let mut s = self.config.to_text();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "report.{k} = {v}");
        };
        kv("kappa", self.kappa.to_string());
        kv("contrast", self.contrast.to_string());
        kv("max_steps", self.max_steps.to_string());
        kv("steps_run", self.steps.len().to_string());
        kv("stop", self.stop.to_string());
        if let Some(st) = &self.stats {
            kv("m_grad", st.m_grad.to_string());
            kv("delta_std", st.delta_std.to_string());
            kv("v_var", st.v_var.to_string());
        }
        kv("reference_area", self.reference_area.to_string());
        kv("support_area", self.support_area.to_string());
        kv("mask_area", self.mask_area.to_string());
        kv("subset_ok", self.subset_ok.to_string());
        let decreases: Vec<String> = self.area_decreases.iter().map(|n| n.to_string()).collect();
        kv("area_decreases", decreases.join(","));
        for st in &self.steps {
            kv(
                &format!("step.{}", st.step),
                format!(
                    "offset={} regions={} area={} accepted={} mean_rejected={} cv_rejected={} too_small={} undersized={}",
                    st.offset,
                    st.regions,
                    st.total_area,
                    st.accepted,
                    st.rejected_mean,
                    st.rejected_cv,
                    st.too_small,
                    st.undersized
                ),
            );
        }
        s
    }
}

/// Everything [`segment`] produces.
#[derive(Debug, Clone)]
pub struct Segmentation {
    pub mask: BinaryMask,
    /// Union of all dome supports over every step.
    pub support: BinaryMask,
    pub smoothed: ThermalRaster,
    pub report: SegmentReport,
}

/// Runs the full pipeline on a raw raster. Errors carry the failing stage.
pub fn segment(raw: &ThermalRaster, cfg: &PipelineConfig) -> Result<Segmentation> {
    cfg.validate().map_err(|e| e.in_stage("config"))?;
    if let Some(m) = &cfg.reference.exclusion_mask {
        raw.shape().check_same(m.shape()).map_err(|e| e.in_stage("config"))?;
    }
    let kappa = resolve_kappa(raw, &cfg.diffusion);
    let t_s = diffuse(raw, &cfg.diffusion).map_err(|e| e.in_stage("smoothing"))?;
    let g_s = gradient_magnitude(raw, cfg.diffusion.sigma).map_err(|e| e.in_stage("gradient"))?;
    let weights = match cfg.extraction.weight_source {
        WeightSource::Smoothed => &t_s,
        WeightSource::Raw => raw,
    };
    let seq = extract_with_weights(&t_s, weights, &cfg.extraction)
        .map_err(|e| e.in_stage("extraction"))?;
    let support = seq
        .union_support()
        .unwrap_or_else(|| BinaryMask::empty(raw.shape()));

    let mut report = SegmentReport {
        config: cfg.clone(),
        kappa,
        contrast: seq.contrast,
        max_steps: seq.max_steps,
        stop: seq.stop,
        stats: None,
        reference_area: 0,
        support_area: support.count(),
        mask_area: 0,
        subset_ok: true,
        area_decreases: seq.area_decreases.clone(),
        steps: Vec::with_capacity(seq.entries.len()),
    };
    let mut mask = BinaryMask::empty(raw.shape());

    if seq.stop == StopCause::NoContrast {
        report.steps = seq
            .entries
            .iter()
            .map(|e| StepSummary {
                step: e.step,
                offset: e.offset,
                regions: 0,
                total_area: 0,
                accepted: 0,
                rejected_mean: 0,
                rejected_cv: 0,
                too_small: 0,
                undersized: 0,
            })
            .collect();
        return Ok(Segmentation {
            mask,
            support,
            smoothed: t_s,
            report,
        });
    }

    let (stats, d_g) = reference_stats(&g_s, &cfg.reference).map_err(|e| e.in_stage("reference"))?;
    report.stats = Some(stats);
    report.reference_area = d_g.count();

    for entry in &seq.entries {
        let (kept, verdicts) = screen_regions(&entry.regions, &g_s, &stats, &cfg.bands)
            .map_err(|e| e.in_stage("screening"))?;
        let count = |v: Verdict| verdicts.iter().filter(|r| r.verdict == v).count();
        let mut undersized = 0;
        for region in kept.regions() {
            if region.area() < cfg.reference.min_area {
                undersized += 1;
                continue;
            }
            for &p in &region.pixels {
                mask.set(p, true);
            }
        }
        report.steps.push(StepSummary {
            step: entry.step,
            offset: entry.offset,
            regions: entry.regions.len(),
            total_area: entry.regions.total_area(),
            accepted: kept.len() - undersized,
            rejected_mean: count(Verdict::MeanOutOfBand),
            rejected_cv: count(Verdict::CvOutOfBand),
            too_small: count(Verdict::TooSmall),
            undersized,
        });
    }

    if let Some(excl) = &cfg.reference.exclusion_mask {
        mask.subtract(excl).map_err(|e| e.in_stage("screening"))?;
    }
    report.mask_area = mask.count();
    report.subset_ok = mask.is_subset_of(&support).expect("same shape");
    Ok(Segmentation {
        mask,
        support,
        smoothed: t_s,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_text_round_trip() {
        let mut cfg = PipelineConfig::default();
        cfg.diffusion.kappa = Kappa::Fixed(0.125);
        cfg.extraction.delta = 0.15;
        cfg.extraction.max_steps_override = Some(99);
        cfg.set_connectivity(Connectivity::Four);
        cfg.io.input = Some(PathBuf::from("scene.csv"));
        let text = cfg.to_text();
        assert_eq!(PipelineConfig::parse(&text).unwrap(), cfg);
    }

    #[test]
    fn defaults_follow_the_slab_settings() {
        let cfg = PipelineConfig::default();
        assert_eq!(cfg.extraction.h_in, 0.5);
        assert_eq!(cfg.extraction.delta, 0.1);
        assert_eq!(cfg.diffusion.sigma, 3.4);
        assert_eq!(
            (cfg.bands.mean_halfwidth_factor, cfg.bands.cv_low_factor, cfg.bands.cv_high_factor),
            (0.5, 0.5, 1.9)
        );
    }

    #[test]
    fn config_errors_name_the_line() {
        let err = PipelineConfig::parse("extraction.h_in = 0.5\nbogus.key = 1\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(PipelineConfig::parse("extraction.delta = abc").is_err());
        // report keys are tolerated
        assert!(PipelineConfig::parse("report.mask_area = 12").is_ok());
    }

    #[test]
    fn constant_raster_gives_empty_mask() {
        let r = ThermalRaster::filled(16, 16, 25.0).unwrap();
        let out = segment(&r, &PipelineConfig::default()).unwrap();
        assert!(out.mask.is_empty());
        assert_eq!(out.report.stop, StopCause::NoContrast);
        assert!(out.report.to_text().contains("no contrast"));
    }

    #[test]
    fn invalid_config_reports_stage() {
        let r = ThermalRaster::filled(4, 4, 25.0).unwrap();
        let mut cfg = PipelineConfig::default();
        cfg.extraction.delta = 0.0;
        let err = segment(&r, &cfg).unwrap_err();
        assert_eq!(err.stage(), Some("config"));
    }
}
