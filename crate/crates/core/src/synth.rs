//! Deterministic synthetic fixtures: the 1-D reconstruction demo signal and
//! 2-D thermal scenes with planted warm (or cold) blobs and ground truth.
//!
//! # Noise
//!
//! Noise is reproducible across implementations from `(seed, spec)` alone:
//! a SplitMix64 stream seeded with `seed` yields 64-bit words; each noise
//! sample consumes two words `a`, `b` and is the Box-Muller cosine branch
//! `sqrt(-2 ln u1) * cos(2 pi u2)` with `u1 = ((a >> 11) + 1) / 2^53` and
//! `u2 = (b >> 11) / 2^53`, scaled by `noise_std`. Samples are drawn in
//! raster-scan order. With `noise_std = 0` no words are drawn.
//!
//! # Geometry
//!
//! Pixel `(x, y)` sits at coordinates `(x, y)`; `r` is the Euclidean distance
//! to a blob centre.
//!
//! * Gaussian blob: `A * exp(-r^2 / (2 radius^2))`, cut off beyond
//!   `4 * radius`.
//! * Plateau blob: `A` inside `radius - t`, zero beyond `radius + t`, and a
//!   raised-cosine edge in between, with `t = PLATEAU_EDGE * radius`.
//!
//! Ground-truth footprints are the pixels where the noiseless blob
//! contribution reaches half of `|A|`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, Connectivity, ThermalRaster};
use crate::regions::connected_components;

/// Half-width of a plateau blob's edge as a fraction of its radius.
pub const PLATEAU_EDGE: f64 = 0.2;
const GAUSSIAN_CUTOFF: f64 = 4.0;

/// SplitMix64 generator.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Standard normal sample (Box-Muller, cosine branch).
    pub fn next_normal(&mut self) -> f64 {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * SCALE;
        let u2 = (self.next_u64() >> 11) as f64 * SCALE;
        (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    }
}

/// Samples of the demo signal `f` and the shifted marker `g = f - 3`.
#[derive(Debug, Clone, PartialEq)]
pub struct Fig1Signal {
    pub x: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

/// `f(x) = sin(x) + 2 cos(2x + 5) + 3 sin(3x)`.
pub fn fig1_f(x: f64) -> f64 {
    x.sin() + 2.0 * (2.0 * x + 5.0).cos() + 3.0 * (3.0 * x).sin()
}

/// Uniform samples of the demo signal over `[x_min, x_max]`, endpoints included.
pub fn signal_fig1(x_min: f64, x_max: f64, n_samples: usize) -> Result<Fig1Signal> {
    if n_samples < 2 {
        return Err(Error::Parameter(format!("need at least 2 samples, got {n_samples}")));
    }
    if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) {
        return Err(Error::Parameter(format!("need x_min < x_max, got [{x_min}, {x_max}]")));
    }
    let step = (x_max - x_min) / (n_samples - 1) as f64;
    let x: Vec<f64> = (0..n_samples)
        .map(|i| if i == n_samples - 1 { x_max } else { x_min + i as f64 * step })
        .collect();
    let f: Vec<f64> = x.iter().map(|&v| fig1_f(v)).collect();
    let g = f.iter().map(|v| v - 3.0).collect();
    Ok(Fig1Signal { x, f, g })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Background {
    Constant(f64),
    /// `base + gx * x + gy * y` (°C, °C per pixel).
    Ramp { base: f64, gx: f64, gy: f64 },
    /// `base + amplitude * (sin(2 pi x / wavelength) + cos(2 pi y / wavelength)) / 2`.
    Smooth {
        base: f64,
        amplitude: f64,
        wavelength: f64,
    },
}

impl Background {
    pub fn value(&self, x: f64, y: f64) -> f64 {
        match *self {
            Background::Constant(c) => c,
            Background::Ramp { base, gx, gy } => base + gx * x + gy * y,
            Background::Smooth {
                base,
                amplitude,
                wavelength,
            } => {
                let k = 2.0 * PI / wavelength;
                base + amplitude * 0.5 * ((k * x).sin() + (k * y).cos())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlobProfile {
    Gaussian,
    Plateau,
}

impl BlobProfile {
    fn as_str(self) -> &'static str {
        match self {
            BlobProfile::Gaussian => "gaussian",
            BlobProfile::Plateau => "plateau",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Blob {
    pub cx: f64,
    pub cy: f64,
    /// Gaussian sigma or plateau half-peak radius, in pixels.
    pub radius: f64,
    /// Peak temperature difference over the background in °C; may be negative.
    pub peak_contrast: f64,
    pub profile: BlobProfile,
}

impl Blob {
    /// Distance beyond which the contribution is exactly zero.
    pub fn extent(&self) -> f64 {
        match self.profile {
            BlobProfile::Gaussian => GAUSSIAN_CUTOFF * self.radius,
            BlobProfile::Plateau => self.radius * (1.0 + PLATEAU_EDGE),
        }
    }

    /// Noiseless contribution at `(x, y)`.
    pub fn contribution(&self, x: f64, y: f64) -> f64 {
        let r = (x - self.cx).hypot(y - self.cy);
        if r > self.extent() {
            return 0.0;
        }
        let a = self.peak_contrast;
        match self.profile {
            BlobProfile::Gaussian => a * (-(r * r) / (2.0 * self.radius * self.radius)).exp(),
            BlobProfile::Plateau => {
                let t = PLATEAU_EDGE * self.radius;
                let inner = self.radius - t;
                if r <= inner {
                    a
                } else {
                    a * 0.5 * (1.0 + (PI * (r - inner) / (2.0 * t)).cos())
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub background: Background,
    pub blobs: Vec<Blob>,
    pub noise_std: f64,
    pub seed: u64,
}

/// Planted-defect ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Union of all blob footprints.
    pub mask: BinaryMask,
    /// Footprint of each blob, in spec order.
    pub footprints: Vec<BinaryMask>,
    /// Inner-boundary pixels of each footprint (8-connectivity).
    pub boundaries: Vec<Vec<usize>>,
}

impl GroundTruth {
    /// Footprint pixels that are not on the footprint boundary.
    pub fn interior(&self) -> BinaryMask {
        let mut m = self.mask.clone();
        for b in &self.boundaries {
            for &p in b {
                m.set(p, false);
            }
        }
        m
    }

    pub fn boundary_mask(&self) -> BinaryMask {
        let mut m = BinaryMask::empty(self.mask.shape());
        for b in &self.boundaries {
            for &p in b {
                m.set(p, true);
            }
        }
        m
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Spec(format!(
                "dimensions must be positive, got {}x{}",
                self.width, self.height
            )));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::Spec(format!("noise_std must be >= 0, got {}", self.noise_std)));
        }
        if let Background::Smooth { wavelength, .. } = self.background {
            if !(wavelength.is_finite() && wavelength > 0.0) {
                return Err(Error::Spec(format!("wavelength must be > 0, got {wavelength}")));
            }
        }
        for (i, b) in self.blobs.iter().enumerate() {
            if !(b.radius.is_finite() && b.radius >= 1.0) {
                return Err(Error::Spec(format!("blob {i}: radius must be >= 1, got {}", b.radius)));
            }
            if !(b.cx.is_finite() && b.cy.is_finite() && b.peak_contrast.is_finite()) {
                return Err(Error::Spec(format!("blob {i}: non-finite parameter")));
            }
            // distance from the centre to the nearest point of the pixel grid
            let dx = (0.0 - b.cx).max(b.cx - (self.width - 1) as f64).max(0.0);
            let dy = (0.0 - b.cy).max(b.cy - (self.height - 1) as f64).max(0.0);
            if dx.hypot(dy) >= b.extent() {
                return Err(Error::Spec(format!("blob {i} lies entirely outside the raster")));
            }
        }
        Ok(())
    }

    /// Two-blob ramp scene used across the test suite: a 3.3 °C ramp along
    /// x from 20 °C, a cooler 1.5 °C plateau blob on the cold side and a
    /// 3.0 °C plateau blob on the warm side, 0.05 °C noise.
    pub fn standard(seed: u64) -> Self {
        SceneSpec {
            width: 256,
            height: 256,
            background: Background::Ramp {
                base: 20.0,
                gx: 3.3 / 255.0,
                gy: 0.0,
            },
            blobs: vec![
                Blob {
                    cx: 64.0,
                    cy: 128.0,
                    radius: 24.0,
                    peak_contrast: 1.5,
                    profile: BlobProfile::Plateau,
                },
                Blob {
                    cx: 192.0,
                    cy: 128.0,
                    radius: 24.0,
                    peak_contrast: 3.0,
                    profile: BlobProfile::Plateau,
                },
            ],
            noise_std: 0.05,
            seed,
        }
    }

    /// Steeper-ramp scene whose warm background band (23 °C at the right
    /// edge) is hotter than the peak of the left blob (21.75 °C): two equal
    /// 1.0 °C plateau blobs of radius 24 on a 3 °C ramp, 0.05 °C noise.
    pub fn warm_band(seed: u64) -> Self {
        let blob = |cx| Blob {
            cx,
            cy: 128.0,
            radius: 24.0,
            peak_contrast: 1.0,
            profile: BlobProfile::Plateau,
        };
        SceneSpec {
            width: 256,
            height: 256,
            background: Background::Ramp {
                base: 20.0,
                gx: 3.0 / 255.0,
                gy: 0.0,
            },
            blobs: vec![blob(64.0), blob(192.0)],
            noise_std: 0.05,
            seed,
        }
    }

    /// Serializes to the key-value scene format read by [`SceneSpec::parse`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "width = {}", self.width);
        let _ = writeln!(out, "height = {}", self.height);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "noise_std = {}", self.noise_std);
        let _ = match self.background {
            Background::Constant(c) => writeln!(out, "background = constant {c}"),
            Background::Ramp { base, gx, gy } => writeln!(out, "background = ramp {base} {gx} {gy}"),
            Background::Smooth {
                base,
                amplitude,
                wavelength,
            } => writeln!(out, "background = smooth {base} {amplitude} {wavelength}"),
        };
        for b in &self.blobs {
            let _ = writeln!(
                out,
                "blob = {} {} {} {} {}",
                b.cx,
                b.cy,
                b.radius,
                b.peak_contrast,
                b.profile.as_str()
            );
        }
        out
    }

    /// Parses the key-value scene format:
    ///
    /// ```text
    /// width = 256
    /// height = 256
    /// seed = 42                      # optional, default 0
    /// noise_std = 0.05               # optional, default 0
    /// background = ramp 20 0.0129 0  # or: constant <c> | smooth <base> <amp> <wavelength>
    /// blob = 64 128 24 1.5 plateau   # cx cy radius contrast gaussian|plateau, repeatable
    /// ```
    pub fn parse(text: &str) -> Result<Self> {
        let mut width = None;
        let mut height = None;
        let mut seed = 0u64;
        let mut noise_std = 0.0;
        let mut background = None;
        let mut blobs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let lineno = i + 1;
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Spec(format!("line {lineno}: expected key = value")))?;
            let key = key.trim();
            let fields: Vec<&str> = value.split_whitespace().collect();
            let num = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|_| Error::Spec(format!("line {lineno}: bad number '{s}'")))
            };
            let int = |s: &str| -> Result<u64> {
                s.parse::<u64>()
                    .map_err(|_| Error::Spec(format!("line {lineno}: bad integer '{s}'")))
            };
            let single = || -> Result<&str> {
                match fields.as_slice() {
                    [one] => Ok(one),
                    _ => Err(Error::Spec(format!("line {lineno}: '{key}' takes one value"))),
                }
            };
            match key {
                "width" => width = Some(int(single()?)? as usize),
                "height" => height = Some(int(single()?)? as usize),
                "seed" => seed = int(single()?)?,
                "noise_std" => noise_std = num(single()?)?,
                "background" => {
                    background = Some(match fields.as_slice() {
                        ["constant", c] => Background::Constant(num(c)?),
                        ["ramp", base, gx, gy] => Background::Ramp {
                            base: num(base)?,
                            gx: num(gx)?,
                            gy: num(gy)?,
                        },
                        ["smooth", base, amp, wl] => Background::Smooth {
                            base: num(base)?,
                            amplitude: num(amp)?,
                            wavelength: num(wl)?,
                        },
                        _ => {
                            return Err(Error::Spec(format!(
                                "line {lineno}: background must be 'constant c', 'ramp base gx gy' or 'smooth base amplitude wavelength'"
                            )))
                        }
                    })
                }
                "blob" => {
                    let [cx, cy, radius, contrast, profile] = fields.as_slice() else {
                        return Err(Error::Spec(format!(
                            "line {lineno}: blob needs 'cx cy radius contrast profile'"
                        )));
                    };
                    let profile = match *profile {
                        "gaussian" => BlobProfile::Gaussian,
                        "plateau" => BlobProfile::Plateau,
                        other => {
                            return Err(Error::Spec(format!(
                                "line {lineno}: unknown blob profile '{other}'"
                            )))
                        }
                    };
                    blobs.push(Blob {
                        cx: num(cx)?,
                        cy: num(cy)?,
                        radius: num(radius)?,
                        peak_contrast: num(contrast)?,
                        profile,
                    });
                }
                other => return Err(Error::Spec(format!("line {lineno}: unknown key '{other}'"))),
            }
        }
        let spec = SceneSpec {
            width: width.ok_or_else(|| Error::Spec("missing width".into()))?,
            height: height.ok_or_else(|| Error::Spec("missing height".into()))?,
            background: background.unwrap_or(Background::Constant(0.0)),
            blobs,
            noise_std,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Renders the scene and its ground truth.
pub fn gen_scene(spec: &SceneSpec) -> Result<(ThermalRaster, GroundTruth)> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let mut values = Vec::with_capacity(w * h);
    let mut footprints: Vec<Vec<bool>> = vec![Vec::with_capacity(w * h); spec.blobs.len()];
    let mut rng = SplitMix64::new(spec.seed);
    for y in 0..h {
        for x in 0..w {
            let (fx, fy) = (x as f64, y as f64);
            let mut v = spec.background.value(fx, fy);
            for (blob, fp) in spec.blobs.iter().zip(&mut footprints) {
                let c = blob.contribution(fx, fy);
                v += c;
                fp.push(blob.peak_contrast != 0.0 && c.abs() >= 0.5 * blob.peak_contrast.abs());
            }
            if spec.noise_std > 0.0 {
                v += spec.noise_std * rng.next_normal();
            }
            values.push(v);
        }
    }
    let raster = ThermalRaster::new(w, h, values)?;
    let footprints: Vec<BinaryMask> = footprints
        .into_iter()
        .map(|bits| BinaryMask::new(w, h, bits))
        .collect::<Result<_>>()?;
    let mut mask = BinaryMask::empty(raster.shape());
    let mut boundaries = Vec::with_capacity(footprints.len());
    for fp in &footprints {
        mask.union_with(fp)?;
        let mut boundary: Vec<usize> = connected_components(fp, Connectivity::Eight)
            .regions()
            .iter()
            .flat_map(|r| r.inner_boundary.iter().copied())
            .collect();
        boundary.sort_unstable();
        boundaries.push(boundary);
    }
    Ok((
        raster,
        GroundTruth {
            mask,
            footprints,
            boundaries,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fig1_samples() {
        let s = signal_fig1(0.0, 10.0, 2).unwrap();
        assert_eq!(s.x, vec![0.0, 10.0]);
        assert!((s.f[0] - 0.567_324_370_926).abs() < 1e-9);
        let s = signal_fig1(0.0, 10.0, 500).unwrap();
        assert!(s.f.iter().zip(&s.g).all(|(f, g)| f - g == 3.0 || (f - g - 3.0).abs() < 1e-12));
        assert!(signal_fig1(0.0, 10.0, 1).is_err());
        assert!(signal_fig1(1.0, 1.0, 5).is_err());
    }

    #[test]
    fn splitmix_reference_words() {
        // first outputs for seed 0 of the published SplitMix64 reference
        let mut r = SplitMix64::new(0);
        assert_eq!(r.next_u64(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(r.next_u64(), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn constant_scene() {
        let spec = SceneSpec {
            width: 5,
            height: 4,
            background: Background::Constant(25.0),
            blobs: vec![],
            noise_std: 0.0,
            seed: 1,
        };
        let (r, gt) = gen_scene(&spec).unwrap();
        assert!(r.values().iter().all(|&v| v == 25.0));
        assert!(gt.mask.is_empty());
    }

    #[test]
    fn gaussian_peak_is_exact() {
        let spec = SceneSpec {
            width: 41,
            height: 41,
            background: Background::Constant(10.0),
            blobs: vec![Blob {
                cx: 20.0,
                cy: 20.0,
                radius: 4.0,
                peak_contrast: 3.0,
                profile: BlobProfile::Gaussian,
            }],
            noise_std: 0.0,
            seed: 0,
        };
        let (r, gt) = gen_scene(&spec).unwrap();
        assert!((r.get(20, 20) - 10.0 - 3.0).abs() < 1e-9);
        // half-peak radius 4 * sqrt(2 ln 2) ~ 4.71
        assert!(gt.mask.get(24, 20));
        assert!(!gt.mask.get(25, 20));
    }

    #[test]
    fn plateau_half_peak_at_radius() {
        let b = Blob {
            cx: 0.0,
            cy: 0.0,
            radius: 10.0,
            peak_contrast: 2.0,
            profile: BlobProfile::Plateau,
        };
        assert_eq!(b.contribution(0.0, 0.0), 2.0);
        assert!((b.contribution(10.0, 0.0) - 1.0).abs() < 1e-12);
        assert_eq!(b.contribution(12.5, 0.0), 0.0);
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let a = gen_scene(&SceneSpec::standard(42)).unwrap();
        let b = gen_scene(&SceneSpec::standard(42)).unwrap();
        assert_eq!(a, b);
        let c = gen_scene(&SceneSpec::standard(43)).unwrap();
        assert_ne!(a.0, c.0);
        assert_eq!(a.1, c.1);
    }

    #[test]
    fn blob_outside_raster_is_rejected() {
        let mut spec = SceneSpec::standard(0);
        spec.blobs[0].cx = -100.0;
        assert!(matches!(gen_scene(&spec), Err(Error::Spec(_))));
    }

    #[test]
    fn spec_text_round_trip() {
        let spec = SceneSpec::standard(7);
        assert_eq!(SceneSpec::parse(&spec.to_text()).unwrap(), spec);
        assert!(SceneSpec::parse("width = 3\n").is_err());
        assert!(SceneSpec::parse("width = 3\nheight = 3\nblob = 1 1 2 1 square\n").is_err());
    }
}
