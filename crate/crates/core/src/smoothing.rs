//! Edge-preserving nonlinear diffusion and gradient maps.
//!
//! The diffusion is the Gaussian-regularized Perona-Malik scheme: at every
//! step the diffusivity `g(s) = 1 / (1 + (s / kappa)^2)` is evaluated on the
//! gradient magnitude `s` of the sigma-presmoothed image, and the image is
//! advanced with an explicit 4-neighbour flux update with zero flux across
//! the border and across nodata pixels. For `0 < tau <= 0.25` each update is
//! a convex combination of neighbouring values, so no new extrema appear and
//! the sum over valid pixels is conserved.

use crate::error::{Error, Result};
use crate::raster::{GradientRaster, ThermalRaster};
use crate::stats::percentile;

/// Contrast parameter of the diffusivity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kappa {
    /// 90th percentile of the initial gradient magnitudes.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionParams {
    /// Gaussian pre-smoothing scale in pixels.
    pub sigma: f64,
    /// Diffusivity contrast in °C per pixel.
    pub kappa: Kappa,
    /// Explicit time step.
    pub tau: f64,
    pub iterations: usize,
}

impl Default for DiffusionParams {
    fn default() -> Self {
        DiffusionParams {
            sigma: 3.4,
            kappa: Kappa::Auto,
            tau: 0.2,
            iterations: 10,
        }
    }
}

pub const AUTO_KAPPA_PERCENTILE: f64 = 90.0;

impl DiffusionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::Parameter(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if let Kappa::Fixed(k) = self.kappa {
            if !(k.is_finite() && k > 0.0) {
                return Err(Error::Parameter(format!("kappa must be > 0, got {k}")));
            }
        }
        if !(self.tau > 0.0 && self.tau <= 0.25) {
            return Err(Error::Parameter(format!(
                "tau must lie in (0, 0.25] for a stable explicit scheme, got {}",
                self.tau
            )));
        }
        Ok(())
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|w| *w /= sum);
    k
}

/// One separable pass along x (`horizontal`) or y with replicate padding.
/// Samples are scaled by `weight` when given (zero for nodata).
fn convolve_axis(
    values: &[f64],
    weight: Option<&[f64]>,
    width: usize,
    height: usize,
    kernel: &[f64],
    horizontal: bool,
) -> Vec<f64> {
    let radius = (kernel.len() / 2) as isize;
    let mut out = vec![0.0; values.len()];
    for y in 0..height {
        for x in 0..width {
            let mut acc = 0.0;
            for (k, &w) in kernel.iter().enumerate() {
                let d = k as isize - radius;
                let (sx, sy) = if horizontal {
                    ((x as isize + d).clamp(0, width as isize - 1) as usize, y)
                } else {
                    (x, (y as isize + d).clamp(0, height as isize - 1) as usize)
                };
                let i = sy * width + sx;
                let m = weight.map_or(1.0, |m| m[i]);
                acc += w * m * values[i];
            }
            out[y * width + x] = acc;
        }
    }
    out
}

/// Gaussian smoothing with replicate padding. Nodata pixels are excluded by
/// normalized convolution and come back as `0.0`.
pub fn gaussian_blur(raster: &ThermalRaster, sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return raster.values().to_vec();
    }
    let kernel = gaussian_kernel(sigma);
    let (w, h) = (raster.width(), raster.height());
    match raster.nodata() {
        None => {
            let tmp = convolve_axis(raster.values(), None, w, h, &kernel, true);
            convolve_axis(&tmp, None, w, h, &kernel, false)
        }
        Some(nodata) => {
            let valid: Vec<f64> = nodata.iter().map(|&b| if b { 0.0 } else { 1.0 }).collect();
            let num = convolve_axis(raster.values(), Some(&valid), w, h, &kernel, true);
            let num = convolve_axis(&num, None, w, h, &kernel, false);
            let den = convolve_axis(&valid, None, w, h, &kernel, true);
            let den = convolve_axis(&den, None, w, h, &kernel, false);
            num.iter()
                .zip(&den)
                .enumerate()
                .map(|(i, (&n, &d))| {
                    if nodata[i] {
                        0.0
                    } else if d > 0.0 {
                        n / d
                    } else {
                        raster.values()[i]
                    }
                })
                .collect()
        }
    }
}

/// Central-difference gradient magnitude of `values` with replicate padding;
/// a nodata neighbour is replaced by the centre pixel.
fn central_gradient(raster: &ThermalRaster, values: &[f64]) -> Vec<f64> {
    let (w, h) = (raster.width(), raster.height());
    let mut out = vec![0.0; values.len()];
    let sample = |x: usize, y: usize, centre: usize| {
        let i = y * w + x;
        if raster.is_valid(i) {
            values[i]
        } else {
            values[centre]
        }
    };
    for y in 0..h {
        for x in 0..w {
            let c = y * w + x;
            if !raster.is_valid(c) {
                continue;
            }
            let gx = (sample((x + 1).min(w - 1), y, c) - sample(x.saturating_sub(1), y, c)) / 2.0;
            let gy = (sample(x, (y + 1).min(h - 1), c) - sample(x, y.saturating_sub(1), c)) / 2.0;
            out[c] = gx.hypot(gy);
        }
    }
    out
}

/// Gradient magnitude (°C per pixel) of the Gaussian-presmoothed raster.
pub fn gradient_magnitude(raster: &ThermalRaster, sigma: f64) -> Result<GradientRaster> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::Parameter(format!("sigma must be >= 0, got {sigma}")));
    }
    let smoothed = gaussian_blur(raster, sigma);
    let grad = central_gradient(raster, &smoothed);
    Ok(GradientRaster::from_parts(
        raster.shape(),
        grad,
        raster.nodata().map(<[bool]>::to_vec),
    ))
}

/// Resolves [`Kappa::Auto`] against the initial gradient field.
pub fn resolve_kappa(raster: &ThermalRaster, params: &DiffusionParams) -> f64 {
    match params.kappa {
        Kappa::Fixed(k) => k,
        Kappa::Auto => {
            let smoothed = gaussian_blur(raster, params.sigma);
            let grad = central_gradient(raster, &smoothed);
            let valid = grad
                .iter()
                .enumerate()
                .filter(|(i, _)| raster.is_valid(*i))
                .map(|(_, &g)| g);
            let p90 = percentile(valid.clone(), AUTO_KAPPA_PERCENTILE).unwrap_or(0.0);
            if p90 > 0.0 {
                p90
            } else {
                // mostly flat field: fall back to the strongest gradient
                let max = valid.fold(0.0, f64::max);
                if max > 0.0 {
                    max
                } else {
                    1.0
                }
            }
        }
    }
}

/// Nonlinear diffusion of `raster`; returns the smoothed raster.
pub fn diffuse(raster: &ThermalRaster, params: &DiffusionParams) -> Result<ThermalRaster> {
    params.validate()?;
    if params.iterations == 0 {
        return Ok(raster.clone());
    }
    let kappa = resolve_kappa(raster, params);
    let (w, h) = (raster.width(), raster.height());
    let mut u = raster.values().to_vec();
    let mut next = u.clone();
    let mut g = vec![0.0; u.len()];
    for _ in 0..params.iterations {
        let current = raster.with_values(u.clone());
        let smoothed = gaussian_blur(&current, params.sigma);
        let grad = central_gradient(raster, &smoothed);
        for (gi, &s) in g.iter_mut().zip(&grad) {
            let r = s / kappa;
            *gi = 1.0 / (1.0 + r * r);
        }
        for y in 0..h {
            for x in 0..w {
                let p = y * w + x;
                if !raster.is_valid(p) {
                    continue;
                }
                let mut flux = 0.0;
                let mut add = |q: usize| {
                    if raster.is_valid(q) {
                        flux += 0.5 * (g[p] + g[q]) * (u[q] - u[p]);
                    }
                };
                if x > 0 {
                    add(p - 1);
                }
                if x + 1 < w {
                    add(p + 1);
                }
                if y > 0 {
                    add(p - w);
                }
                if y + 1 < h {
                    add(p + w);
                }
                next[p] = u[p] + params.tau * flux;
            }
        }
        std::mem::swap(&mut u, &mut next);
    }
    Ok(raster.with_values(u))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_iterations_is_identity() {
        let r = ThermalRaster::from_fn(5, 4, |x, y| (x * y) as f64).unwrap();
        let p = DiffusionParams {
            iterations: 0,
            ..Default::default()
        };
        assert_eq!(diffuse(&r, &p).unwrap(), r);
    }

    #[test]
    fn constant_field_is_fixed() {
        let r = ThermalRaster::filled(9, 7, 21.5).unwrap();
        let out = diffuse(&r, &DiffusionParams::default()).unwrap();
        assert!(out.values().iter().all(|&v| v == 21.5));
        let g = gradient_magnitude(&r, 2.0).unwrap();
        assert!(g.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_unstable_tau() {
        let r = ThermalRaster::filled(3, 3, 0.0).unwrap();
        let p = DiffusionParams {
            tau: 0.3,
            ..Default::default()
        };
        assert!(matches!(diffuse(&r, &p), Err(Error::Parameter(_))));
        let p = DiffusionParams {
            kappa: Kappa::Fixed(0.0),
            ..Default::default()
        };
        assert!(diffuse(&r, &p).is_err());
        assert!(gradient_magnitude(&r, -1.0).is_err());
    }

    #[test]
    fn ramp_gradient_is_one_inside() {
        let r = ThermalRaster::from_fn(8, 6, |x, _| x as f64).unwrap();
        let g = gradient_magnitude(&r, 0.0).unwrap();
        for y in 0..6 {
            for x in 1..7 {
                assert!((g.get(x, y) - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn kernel_is_normalized_and_symmetric() {
        let k = gaussian_kernel(1.7);
        assert_eq!(k.len(), 2 * 6 + 1);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for i in 0..k.len() {
            assert_eq!(k[i], k[k.len() - 1 - i]);
        }
    }

    #[test]
    fn nodata_pixels_do_not_leak() {
        let mut nodata = vec![false; 25];
        nodata[12] = true;
        let r = ThermalRaster::with_nodata(5, 5, vec![10.0; 25], Some(nodata)).unwrap();
        let out = diffuse(&r, &DiffusionParams::default()).unwrap();
        assert!(out.valid_values().all(|v| (v - 10.0).abs() < 1e-12));
        assert!(!out.is_valid(12));
    }
}
