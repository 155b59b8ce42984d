//! Raster containers shared by every stage of the pipeline.
//!
//! All grids are row-major. Pixel `(x, y)` lives at index `y * width + x`.

use crate::error::{Error, Result};

/// Pixel adjacency used for labeling, boundaries and plateau detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Connectivity {
    /// N, S, E and W neighbours.
    Four,
    /// All eight surrounding pixels.
    #[default]
    Eight,
}

impl Connectivity {
    pub fn from_number(n: u32) -> Result<Self> {
        match n {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            other => Err(Error::Parameter(format!(
                "connectivity must be 4 or 8, got {other}"
            ))),
        }
    }

    pub fn number(self) -> u32 {
        match self {
            Connectivity::Four => 4,
            Connectivity::Eight => 8,
        }
    }

    pub(crate) fn offsets(self) -> &'static [(isize, isize)] {
        const FOUR: [(isize, isize); 4] = [(0, -1), (-1, 0), (1, 0), (0, 1)];
        const EIGHT: [(isize, isize); 8] = [
            (-1, -1),
            (0, -1),
            (1, -1),
            (-1, 0),
            (1, 0),
            (-1, 1),
            (0, 1),
            (1, 1),
        ];
        match self {
            Connectivity::Four => &FOUR,
            Connectivity::Eight => &EIGHT,
        }
    }
}

/// Width and height of a grid, with neighbourhood helpers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub width: usize,
    pub height: usize,
}

impl Shape {
    pub fn new(width: usize, height: usize) -> Self {
        Shape { width, height }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn offset(&self, idx: usize, dx: isize, dy: isize) -> Option<usize> {
        let x = (idx % self.width) as isize + dx;
        let y = (idx / self.width) as isize + dy;
        if x < 0 || y < 0 || x >= self.width as isize || y >= self.height as isize {
            None
        } else {
            Some(y as usize * self.width + x as usize)
        }
    }

    /// In-bounds neighbours of `idx` under `conn`.
    pub fn neighbors(&self, idx: usize, conn: Connectivity) -> impl Iterator<Item = usize> + '_ {
        conn.offsets()
            .iter()
            .filter_map(move |&(dx, dy)| self.offset(idx, dx, dy))
    }

    /// Whether some neighbour of `idx` under `conn` lies outside the grid.
    pub(crate) fn touches_border(&self, idx: usize, conn: Connectivity) -> bool {
        self.neighbors(idx, conn).count() < conn.offsets().len()
    }

    pub(crate) fn check_same(&self, other: Shape) -> Result<()> {
        if *self == other {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                expected: (self.width, self.height),
                found: (other.width, other.height),
            })
        }
    }
}

fn check_dims(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidRaster(format!(
            "dimensions must be positive, got {width}x{height}"
        )));
    }
    if width.checked_mul(height) != Some(len) {
        return Err(Error::InvalidRaster(format!(
            "{width}x{height} raster needs {} values, got {len}",
            width.saturating_mul(height)
        )));
    }
    Ok(())
}

/// Single-band temperature grid in °C with an optional nodata mask.
///
/// Nodata pixels are stored as `0.0` and must be skipped by every consumer;
/// use [`ThermalRaster::is_valid`] or [`ThermalRaster::valid_values`].
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalRaster {
    shape: Shape,
    values: Vec<f64>,
    nodata: Option<Vec<bool>>,
}

impl ThermalRaster {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        Self::with_nodata(width, height, values, None)
    }

    pub fn with_nodata(
        width: usize,
        height: usize,
        mut values: Vec<f64>,
        nodata: Option<Vec<bool>>,
    ) -> Result<Self> {
        check_dims(width, height, values.len())?;
        if let Some(mask) = &nodata {
            if mask.len() != values.len() {
                return Err(Error::InvalidRaster(format!(
                    "nodata mask has {} entries, expected {}",
                    mask.len(),
                    values.len()
                )));
            }
        }
        for (i, v) in values.iter_mut().enumerate() {
            let invalid = nodata.as_ref().is_some_and(|m| m[i]);
            if invalid {
                *v = 0.0;
            } else if !v.is_finite() {
                return Err(Error::InvalidRaster(format!(
                    "non-finite value {v} at pixel ({}, {})",
                    i % width,
                    i / width
                )));
            }
        }
        // Drop an all-valid mask so equality does not depend on its presence.
        let nodata = nodata.filter(|m| m.iter().any(|&b| b));
        Ok(ThermalRaster {
            shape: Shape::new(width, height),
            values,
            nodata,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self::new(width, height, values)
    }

    /// Builds a single-row raster, handy for 1-D signals.
    pub fn from_row(values: &[f64]) -> Result<Self> {
        Self::new(values.len(), 1, values.to_vec())
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn width(&self) -> usize {
        self.shape.width
    }

    pub fn height(&self) -> usize {
        self.shape.height
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.shape.width + x]
    }

    pub fn nodata(&self) -> Option<&[bool]> {
        self.nodata.as_deref()
    }

    pub fn has_nodata(&self) -> bool {
        self.nodata.is_some()
    }

    #[inline]
    pub fn is_valid(&self, idx: usize) -> bool {
        self.nodata.as_ref().is_none_or(|m| !m[idx])
    }

    pub fn valid_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(|(i, _)| self.is_valid(*i))
            .map(|(_, &v)| v)
    }

    pub fn valid_count(&self) -> usize {
        match &self.nodata {
            None => self.len(),
            Some(m) => m.iter().filter(|&&b| !b).count(),
        }
    }

    /// Minimum and maximum over valid pixels, `None` if every pixel is nodata.
    pub fn min_max(&self) -> Option<(f64, f64)> {
        self.valid_values().fold(None, |acc, v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
    }

    pub fn mean(&self) -> Option<f64> {
        let n = self.valid_count();
        (n > 0).then(|| self.valid_values().sum::<f64>() / n as f64)
    }

    /// Valid-pixel mask as a [`BinaryMask`] (true = usable pixel).
    pub fn valid_mask(&self) -> BinaryMask {
        BinaryMask::from_fn_index(self.shape, |i| self.is_valid(i))
    }

    /// Applies `f` to every valid pixel, keeping the nodata layout.
    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Result<Self> {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| if self.is_valid(i) { f(v) } else { 0.0 })
            .collect();
        Self::with_nodata(self.width(), self.height(), values, self.nodata.clone())
    }

    /// Replaces the values, keeping shape and nodata layout.
    pub(crate) fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.len());
        let mut out = ThermalRaster {
            shape: self.shape,
            values,
            nodata: self.nodata.clone(),
        };
        if let Some(m) = &out.nodata {
            for (v, &bad) in out.values.iter_mut().zip(m) {
                if bad {
                    *v = 0.0;
                }
            }
        }
        out
    }

    /// Rotates the grid 90° counter-clockwise.
    pub fn rot90(&self) -> Self {
        let (w, h) = (self.width(), self.height());
        let src = |x: usize, y: usize| y * w + x;
        let mut values = Vec::with_capacity(self.len());
        let mut nodata = self.nodata.as_ref().map(|_| Vec::with_capacity(self.len()));
        // new pixel (x', y') with new width h comes from (w - 1 - y', x')
        for ny in 0..w {
            for nx in 0..h {
                let i = src(w - 1 - ny, nx);
                values.push(self.values[i]);
                if let (Some(out), Some(m)) = (nodata.as_mut(), self.nodata.as_ref()) {
                    out.push(m[i]);
                }
            }
        }
        ThermalRaster {
            shape: Shape::new(h, w),
            values,
            nodata,
        }
    }
}

/// Per-pixel non-negative gradient magnitude in °C per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientRaster {
    shape: Shape,
    values: Vec<f64>,
    nodata: Option<Vec<bool>>,
}

impl GradientRaster {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        check_dims(width, height, values.len())?;
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::InvalidRaster(format!(
                "gradient magnitude must be finite and non-negative, got {v} at index {i}"
            )));
        }
        Ok(GradientRaster {
            shape: Shape::new(width, height),
            values,
            nodata: None,
        })
    }

    pub(crate) fn from_parts(shape: Shape, values: Vec<f64>, nodata: Option<Vec<bool>>) -> Self {
        GradientRaster {
            shape,
            values,
            nodata,
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn width(&self) -> usize {
        self.shape.width
    }

    pub fn height(&self) -> usize {
        self.shape.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.shape.width + x]
    }

    #[inline]
    pub fn is_valid(&self, idx: usize) -> bool {
        self.nodata.as_ref().is_none_or(|m| !m[idx])
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .filter(|(i, _)| self.is_valid(*i))
            .map(|(_, &v)| v)
            .fold(0.0, f64::max)
    }

    /// Multiplies every magnitude by `factor` (must be non-negative).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor >= 0.0) {
            return Err(Error::Parameter(format!(
                "scale factor must be finite and non-negative, got {factor}"
            )));
        }
        Ok(GradientRaster {
            shape: self.shape,
            values: self.values.iter().map(|v| v * factor).collect(),
            nodata: self.nodata.clone(),
        })
    }

    pub fn rot90(&self) -> Self {
        let (w, h) = (self.width(), self.height());
        let mut values = Vec::with_capacity(self.values.len());
        for ny in 0..w {
            for nx in 0..h {
                values.push(self.values[nx * w + (w - 1 - ny)]);
            }
        }
        GradientRaster {
            shape: Shape::new(h, w),
            values,
            nodata: None,
        }
    }
}

/// Boolean per-pixel mask.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    shape: Shape,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        check_dims(width, height, bits.len())?;
        Ok(BinaryMask {
            shape: Shape::new(width, height),
            bits,
        })
    }

    pub fn empty(shape: Shape) -> Self {
        BinaryMask {
            shape,
            bits: vec![false; shape.len()],
        }
    }

    pub fn full(shape: Shape) -> Self {
        BinaryMask {
            shape,
            bits: vec![true; shape.len()],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Result<Self> {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self::new(width, height, bits)
    }

    pub(crate) fn from_fn_index(shape: Shape, f: impl FnMut(usize) -> bool) -> Self {
        BinaryMask {
            shape,
            bits: (0..shape.len()).map(f).collect(),
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn width(&self) -> usize {
        self.shape.width
    }

    pub fn height(&self) -> usize {
        self.shape.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn at(&self, idx: usize) -> bool {
        self.bits[idx]
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.shape.width + x]
    }

    pub fn set(&mut self, idx: usize, value: bool) {
        self.bits[idx] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn iter_set(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| i)
    }

    pub fn union_with(&mut self, other: &BinaryMask) -> Result<()> {
        self.shape.check_same(other.shape)?;
        for (a, &b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= b;
        }
        Ok(())
    }

    pub fn intersection_count(&self, other: &BinaryMask) -> Result<usize> {
        self.shape.check_same(other.shape)?;
        Ok(self
            .bits
            .iter()
            .zip(&other.bits)
            .filter(|(&a, &b)| a && b)
            .count())
    }

    /// True when every set pixel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> Result<bool> {
        self.shape.check_same(other.shape)?;
        Ok(self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b))
    }

    /// Clears every pixel that is set in `other`.
    pub fn subtract(&mut self, other: &BinaryMask) -> Result<()> {
        self.shape.check_same(other.shape)?;
        for (a, &b) in self.bits.iter_mut().zip(&other.bits) {
            *a &= !b;
        }
        Ok(())
    }
}
