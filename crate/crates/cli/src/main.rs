use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail};
use clap::{Args, Parser, Subcommand, ValueEnum};

use domeseg::eval::{per_blob_iou, step_size_sweep, sweep_csv};
use domeseg::extraction::extract_with_weights;
use domeseg::io::{load_mask, load_raster, save_mask, save_raster, sibling_path, write_atomic, MaskFormat, RasterFormat};
use domeseg::smoothing::diffuse;
use domeseg::{
    gen_scene, iou, kmeans_temperature_segment, segment, threshold_segment, BinaryMask, Connectivity,
    PipelineConfig, SceneSpec, ThermalRaster, ThresholdSpec, WeightSource,
};

#[derive(Parser)]
#[command(name = "domeseg", version, about = "Warm-defect segmentation of thermal rasters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline: writes the defect mask plus a text and a key-value report.
    Segment(SegmentArgs),
    /// Regional-maxima sequence only: writes the union of all supports and a per-step table.
    Maxima(SegmentArgs),
    /// Global threshold or temperature k-means segmentation.
    Baseline(BaselineArgs),
    /// Generates a synthetic scene and its ground truth.
    Synth(SynthArgs),
    /// Step-size sweep of the extraction loop.
    Sweep(SweepArgs),
    /// Intersection over union of a predicted mask against ground truth.
    Eval(EvalArgs),
}

#[derive(Args)]
struct PipelineArgs {
    /// Input raster.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Configuration file (key = value lines); flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input raster format: csv, f32 or pgm16:<scale>[:<offset>]. Guessed from the extension otherwise.
    #[arg(long)]
    format: Option<String>,
    #[arg(long = "h-in")]
    h_in: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long = "min-area")]
    min_area: Option<usize>,
    /// Mask of pixels to ignore (PGM or CSV).
    #[arg(long = "exclusion-mask")]
    exclusion_mask: Option<PathBuf>,
    /// Screening bands as mean_halfwidth,cv_low,cv_high.
    #[arg(long)]
    bands: Option<String>,
    /// 4 or 8.
    #[arg(long)]
    connectivity: Option<u32>,
    /// Regularizer weight source: smoothed or raw.
    #[arg(long = "weight-source")]
    weight_source: Option<String>,
}

#[derive(Args)]
struct SegmentArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Output mask (.pgm or .csv).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Threshold,
    Percentile,
    Kmeans,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    format: Option<String>,
    #[arg(long, value_enum)]
    method: Method,
    /// Threshold in °C, or percentile in [0, 100].
    #[arg(long)]
    value: Option<f64>,
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Nighttime k-means: the warmest cluster is background.
    #[arg(long)]
    night: bool,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// 3.3 °C ramp, blobs of 1.5 and 3.0 °C.
    Standard,
    /// 3 °C ramp hotter than the cooler blob, two 1.0 °C blobs.
    WarmBand,
}

#[derive(Args)]
struct SynthArgs {
    /// Scene spec file.
    #[arg(long, conflicts_with = "preset")]
    spec: Option<PathBuf>,
    /// Built-in scene used when no spec file is given.
    #[arg(long, value_enum, default_value = "standard")]
    preset: Preset,
    /// Overrides the spec's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output raster; ground truth goes to <stem>.truth.pgm, the resolved spec to <stem>.spec.
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Comma-separated step sizes; must include 0.05.
    #[arg(long, default_value = "0.05,0.1,0.15,0.2,0.3")]
    deltas: String,
    /// CSV output; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Predicted mask.
    #[arg(long)]
    input: PathBuf,
    /// Ground-truth mask.
    #[arg(long)]
    truth: PathBuf,
    /// Also score each 8-connected truth component separately.
    #[arg(long)]
    per_component: bool,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn staged<T>(stage: &'static str, r: domeseg::Result<T>) -> anyhow::Result<T> {
    r.map_err(|e| match e.stage() {
        Some(_) => anyhow!(e),
        None => anyhow!(e.in_stage(stage)),
    })
}

fn raster_format(path: &Path, format: Option<&str>) -> anyhow::Result<RasterFormat> {
    match format {
        Some(f) => staged("config", f.parse()),
        None => RasterFormat::from_extension(path).ok_or_else(|| {
            anyhow!(
                "config stage failed: cannot guess the raster format of {}; pass --format",
                path.display()
            )
        }),
    }
}

fn mask_format(path: &Path) -> MaskFormat {
    MaskFormat::from_extension(path).unwrap_or(MaskFormat::Pgm)
}

fn parse_list(text: &str, what: &str) -> anyhow::Result<Vec<f64>> {
    text.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| anyhow!("config stage failed: bad {what} value '{v}'"))
        })
        .collect()
}

/// Defaults, then the config file, then flags.
fn resolve_config(args: &PipelineArgs) -> anyhow::Result<PipelineConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| anyhow!("config stage failed: cannot read {}: {e}", path.display()))?;
            staged("config", PipelineConfig::parse(&text))?
        }
        None => PipelineConfig::default(),
    };
    if let Some(p) = &args.input {
        cfg.io.input = Some(p.clone());
    }
    if let Some(f) = &args.format {
        cfg.io.format = Some(f.clone());
    }
    if let Some(v) = args.h_in {
        cfg.extraction.h_in = v;
    }
    if let Some(v) = args.delta {
        cfg.extraction.delta = v;
    }
    if let Some(v) = args.sigma {
        cfg.diffusion.sigma = v;
    }
    if let Some(v) = args.min_area {
        cfg.reference.min_area = v;
    }
    if let Some(p) = &args.exclusion_mask {
        cfg.io.exclusion_mask = Some(p.clone());
    }
    if let Some(b) = &args.bands {
        let v = parse_list(b, "--bands")?;
        if v.len() != 3 {
            bail!("config stage failed: --bands takes mean_halfwidth,cv_low,cv_high");
        }
        cfg.bands.mean_halfwidth_factor = v[0];
        cfg.bands.cv_low_factor = v[1];
        cfg.bands.cv_high_factor = v[2];
    }
    if let Some(n) = args.connectivity {
        cfg.set_connectivity(staged("config", Connectivity::from_number(n))?);
    }
    if let Some(w) = &args.weight_source {
        cfg.extraction.weight_source = staged("config", w.parse())?;
    }
    staged("config", cfg.validate())?;
    Ok(cfg)
}

fn load_input(cfg: &mut PipelineConfig) -> anyhow::Result<ThermalRaster> {
    let path = cfg
        .io
        .input
        .clone()
        .ok_or_else(|| anyhow!("config stage failed: no input raster (--input or io.input)"))?;
    let format = raster_format(&path, cfg.io.format.as_deref())?;
    let raster = staged("input", load_raster(&path, format))?;
    if let Some(mp) = &cfg.io.exclusion_mask {
        let mask = staged("input", load_mask(mp, mask_format(mp)))?;
        cfg.reference.exclusion_mask = Some(mask);
    }
    Ok(raster)
}

fn output_path(args: &SegmentArgs, cfg: &mut PipelineConfig) -> anyhow::Result<PathBuf> {
    if let Some(p) = &args.output {
        cfg.io.output = Some(p.clone());
    }
    cfg.io
        .output
        .clone()
        .ok_or_else(|| anyhow!("config stage failed: no output path (--output or io.output)"))
}

fn run_segment(args: &SegmentArgs) -> anyhow::Result<()> {
    let mut cfg = resolve_config(&args.pipeline)?;
    let out = output_path(args, &mut cfg)?;
    let raw = load_input(&mut cfg)?;
    let result = staged("segment", segment(&raw, &cfg))?;
    staged("output", save_mask(&result.mask, &out, mask_format(&out)))?;
    let report = &result.report;
    staged("output", write_atomic(&sibling_path(&out, ".report.txt"), report.to_text().as_bytes()))?;
    staged("output", write_atomic(&sibling_path(&out, ".report.kv"), report.to_kv().as_bytes()))?;
    eprintln!(
        "{}: {} px accepted, stop: {}",
        out.display(),
        report.mask_area,
        report.stop
    );
    Ok(())
}

fn run_maxima(args: &SegmentArgs) -> anyhow::Result<()> {
    let mut cfg = resolve_config(&args.pipeline)?;
    let out = output_path(args, &mut cfg)?;
    let raw = load_input(&mut cfg)?;
    let t_s = staged("smoothing", diffuse(&raw, &cfg.diffusion))?;
    let weights = match cfg.extraction.weight_source {
        WeightSource::Smoothed => &t_s,
        WeightSource::Raw => &raw,
    };
    let seq = staged("extraction", extract_with_weights(&t_s, weights, &cfg.extraction))?;
    let union = seq
        .union_support()
        .unwrap_or_else(|| BinaryMask::empty(raw.shape()));
    staged("output", save_mask(&union, &out, mask_format(&out)))?;
    let mut table = String::from("step,offset,regions,total_area\n");
    for e in &seq.entries {
        table.push_str(&format!(
            "{},{},{},{}\n",
            e.step,
            e.offset,
            e.regions.len(),
            e.regions.total_area()
        ));
    }
    staged("output", write_atomic(&sibling_path(&out, ".steps.csv"), table.as_bytes()))?;
    eprintln!(
        "{}: {} steps, union area {} px, stop: {}",
        out.display(),
        seq.entries.len(),
        union.count(),
        seq.stop
    );
    Ok(())
}

fn run_baseline(args: &BaselineArgs) -> anyhow::Result<()> {
    let format = raster_format(&args.input, args.format.as_deref())?;
    let raw = staged("input", load_raster(&args.input, format))?;
    let need_value = || {
        args.value
            .ok_or_else(|| anyhow!("config stage failed: --value is required for this method"))
    };
    let mask = match args.method {
        Method::Threshold => staged("baseline", threshold_segment(&raw, ThresholdSpec::Absolute(need_value()?)))?,
        Method::Percentile => staged("baseline", threshold_segment(&raw, ThresholdSpec::Percentile(need_value()?)))?,
        Method::Kmeans => staged("baseline", kmeans_temperature_segment(&raw, args.k, !args.night))?,
    };
    staged("output", save_mask(&mask, &args.output, mask_format(&args.output)))?;
    eprintln!("{}: {} px", args.output.display(), mask.count());
    Ok(())
}

fn run_synth(args: &SynthArgs) -> anyhow::Result<()> {
    let mut spec = match &args.spec {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| anyhow!("synth stage failed: cannot read {}: {e}", path.display()))?;
            staged("synth", SceneSpec::parse(&text))?
        }
        None => match args.preset {
            Preset::Standard => SceneSpec::standard(0),
            Preset::WarmBand => SceneSpec::warm_band(0),
        },
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let (raster, truth) = staged("synth", gen_scene(&spec))?;
    let format = raster_format(&args.output, args.format.as_deref())?;
    staged("output", save_raster(&raster, &args.output, format))?;
    staged("output", save_mask(&truth.mask, &sibling_path(&args.output, ".truth.pgm"), MaskFormat::Pgm))?;
    staged("output", write_atomic(&sibling_path(&args.output, ".spec"), spec.to_text().as_bytes()))?;
    eprintln!(
        "{}: {}x{}, {} blob(s), seed {}",
        args.output.display(),
        spec.width,
        spec.height,
        spec.blobs.len(),
        spec.seed
    );
    Ok(())
}

fn run_sweep(args: &SweepArgs) -> anyhow::Result<()> {
    let mut cfg = resolve_config(&args.pipeline)?;
    let deltas = parse_list(&args.deltas, "--deltas")?;
    let raw = load_input(&mut cfg)?;
    let t_s = staged("smoothing", diffuse(&raw, &cfg.diffusion))?;
    let rows = staged("sweep", step_size_sweep(&t_s, &cfg.extraction, &deltas))?;
    let csv = sweep_csv(&rows);
    match &args.output {
        Some(p) => staged("output", write_atomic(p, csv.as_bytes()))?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn run_eval(args: &EvalArgs) -> anyhow::Result<()> {
    let pred = staged("input", load_mask(&args.input, mask_format(&args.input)))?;
    let truth = staged("input", load_mask(&args.truth, mask_format(&args.truth)))?;
    let mut text = format!("iou = {}\n", staged("eval", iou(&pred, &truth))?);
    if args.per_component {
        let comps = domeseg::connected_components(&truth, Connectivity::Eight);
        let footprints: Vec<BinaryMask> = comps
            .regions()
            .iter()
            .map(|r| {
                let mut m = BinaryMask::empty(truth.shape());
                for &p in &r.pixels {
                    m.set(p, true);
                }
                m
            })
            .collect();
        let scores = staged("eval", per_blob_iou(&pred, &footprints, Connectivity::Eight))?;
        for (i, s) in scores.iter().enumerate() {
            text.push_str(&format!("component.{} = {}\n", i + 1, s));
        }
    }
    match &args.output {
        Some(p) => staged("output", write_atomic(p, text.as_bytes()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Segment(a) => run_segment(a),
        Command::Maxima(a) => run_maxima(a),
        Command::Baseline(a) => run_baseline(a),
        Command::Synth(a) => run_synth(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Eval(a) => run_eval(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("domeseg: {e}");
            ExitCode::FAILURE
        }
    }
}
