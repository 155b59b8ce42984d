//! Flat grayscale morphology: dilation, reconstruction by dilation, h-domes,
//! the cubic-weight regularized marker, and regional maxima.
//!
//! Out-of-bounds and nodata pixels are outside the image domain: they never
//! contribute to a neighbourhood maximum and are never labeled.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, Connectivity, Shape, ThermalRaster};
use crate::regions::{connected_components, label_with, RegionSet};

/// Flat structuring element given as pixel offsets `(dx, dy)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructuringElement {
    offsets: Vec<(isize, isize)>,
}

impl StructuringElement {
    /// Validates that the element contains the origin and is symmetric under
    /// point reflection. Duplicates are removed and offsets sorted in raster
    /// order.
    pub fn from_offsets(mut offsets: Vec<(isize, isize)>) -> Result<Self> {
        offsets.sort_by_key(|&(dx, dy)| (dy, dx));
        offsets.dedup();
        if !offsets.contains(&(0, 0)) {
            return Err(Error::Parameter("structuring element must contain the origin".into()));
        }
        if let Some(&(dx, dy)) = offsets.iter().find(|&&(dx, dy)| !offsets.contains(&(-dx, -dy))) {
            return Err(Error::Parameter(format!(
                "structuring element is not symmetric: ({dx}, {dy}) has no reflection"
            )));
        }
        Ok(StructuringElement { offsets })
    }

    /// 3x3 square (8-neighbourhood plus origin).
    pub fn square() -> Self {
        Self::for_connectivity(Connectivity::Eight)
    }

    /// Plus-shaped 4-neighbourhood plus origin.
    pub fn cross() -> Self {
        Self::for_connectivity(Connectivity::Four)
    }

    pub fn origin_only() -> Self {
        StructuringElement {
            offsets: vec![(0, 0)],
        }
    }

    pub fn for_connectivity(conn: Connectivity) -> Self {
        let mut offsets = conn.offsets().to_vec();
        offsets.push((0, 0));
        Self::from_offsets(offsets).expect("neighbourhood offsets are symmetric")
    }

    pub fn offsets(&self) -> &[(isize, isize)] {
        &self.offsets
    }

    fn neighbours(&self) -> impl Iterator<Item = (isize, isize)> + '_ {
        self.offsets.iter().copied().filter(|&o| o != (0, 0))
    }

    /// Offsets visited before the origin in a forward raster scan.
    fn preceding(&self) -> Vec<(isize, isize)> {
        self.neighbours()
            .filter(|&(dx, dy)| dy < 0 || (dy == 0 && dx < 0))
            .collect()
    }

    fn following(&self) -> Vec<(isize, isize)> {
        self.neighbours()
            .filter(|&(dx, dy)| dy > 0 || (dy == 0 && dx > 0))
            .collect()
    }
}

impl Default for StructuringElement {
    fn default() -> Self {
        Self::square()
    }
}

pub const DEFAULT_PLATEAU_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct MorphSettings {
    pub se: StructuringElement,
    /// Tolerance (°C) for value equality and dome positivity.
    pub plateau_eps: f64,
    /// Connectivity used to label dome supports and plateaus.
    pub connectivity: Connectivity,
}

impl MorphSettings {
    /// Settings whose structuring element matches `conn`.
    pub fn new(conn: Connectivity) -> Self {
        MorphSettings {
            se: StructuringElement::for_connectivity(conn),
            plateau_eps: DEFAULT_PLATEAU_EPS,
            connectivity: conn,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.plateau_eps.is_finite() && self.plateau_eps > 0.0) {
            return Err(Error::Parameter(format!(
                "plateau_eps must be > 0, got {}",
                self.plateau_eps
            )));
        }
        Ok(())
    }
}

impl Default for MorphSettings {
    fn default() -> Self {
        Self::new(Connectivity::Eight)
    }
}

/// Neighbourhood maximum over `se`; nodata pixels stay nodata.
pub fn dilate(raster: &ThermalRaster, se: &StructuringElement) -> ThermalRaster {
    let shape = raster.shape();
    let v = raster.values();
    let out = (0..shape.len())
        .map(|p| {
            if !raster.is_valid(p) {
                return 0.0;
            }
            se.offsets()
                .iter()
                .filter_map(|&(dx, dy)| shape.offset(p, dx, dy))
                .filter(|&q| raster.is_valid(q))
                .map(|q| v[q])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    raster.with_values(out)
}

fn check_pair(marker: &ThermalRaster, mask: &ThermalRaster, eps: f64) -> Result<Vec<f64>> {
    mask.shape().check_same(marker.shape())?;
    let mut start = Vec::with_capacity(mask.len());
    for (p, (&g, &f)) in marker.values().iter().zip(mask.values()).enumerate() {
        if !mask.is_valid(p) {
            start.push(0.0);
            continue;
        }
        if g > f + eps {
            let w = mask.width();
            return Err(Error::Precondition(format!(
                "marker exceeds mask at pixel ({}, {}): {g} > {f}",
                p % w,
                p / w
            )));
        }
        start.push(g.min(f));
    }
    Ok(start)
}

/// Reconstruction by dilation computed by plain iteration of
/// `x <- min(dilate(x), mask)` until nothing changes.
///
/// Quadratic in the worst case; kept as the reference the fast variant is
/// checked against.
pub fn reconstruct_naive(
    marker: &ThermalRaster,
    mask: &ThermalRaster,
    settings: &MorphSettings,
) -> Result<ThermalRaster> {
    settings.validate()?;
    let mut current = mask.with_values(check_pair(marker, mask, settings.plateau_eps)?);
    loop {
        let dilated = dilate(&current, &settings.se);
        let next: Vec<f64> = dilated
            .values()
            .iter()
            .zip(mask.values())
            .map(|(&d, &f)| d.min(f))
            .collect();
        if next == current.values() {
            return Ok(current);
        }
        current = mask.with_values(next);
    }
}

/// Reconstruction by dilation of `marker` under `mask`.
///
/// Hybrid algorithm: one forward and one backward raster scan, then FIFO
/// propagation from pixels that can still raise a neighbour. Values are only
/// ever copied or compared, so the result equals [`reconstruct_naive`]
/// bit for bit.
pub fn reconstruct(
    marker: &ThermalRaster,
    mask: &ThermalRaster,
    settings: &MorphSettings,
) -> Result<ThermalRaster> {
    settings.validate()?;
    let mut j = check_pair(marker, mask, settings.plateau_eps)?;
    let f = mask.values();
    let shape = mask.shape();
    let valid = |p: usize| mask.is_valid(p);
    let before = settings.se.preceding();
    let after = settings.se.following();
    let n = shape.len();

    for p in 0..n {
        if !valid(p) {
            continue;
        }
        let mut m = j[p];
        for &(dx, dy) in &before {
            if let Some(q) = shape.offset(p, dx, dy).filter(|&q| valid(q)) {
                m = m.max(j[q]);
            }
        }
        j[p] = m.min(f[p]);
    }

    let mut fifo = VecDeque::new();
    for p in (0..n).rev() {
        if !valid(p) {
            continue;
        }
        let mut m = j[p];
        for &(dx, dy) in &after {
            if let Some(q) = shape.offset(p, dx, dy).filter(|&q| valid(q)) {
                m = m.max(j[q]);
            }
        }
        j[p] = m.min(f[p]);
        let jp = j[p];
        let raises = after.iter().any(|&(dx, dy)| {
            shape
                .offset(p, dx, dy)
                .filter(|&q| valid(q))
                .is_some_and(|q| j[q] < jp && j[q] < f[q])
        });
        if raises {
            fifo.push_back(p);
        }
    }

    let all: Vec<(isize, isize)> = settings.se.neighbours().collect();
    while let Some(p) = fifo.pop_front() {
        let jp = j[p];
        for &(dx, dy) in &all {
            let Some(q) = shape.offset(p, dx, dy).filter(|&q| valid(q)) else {
                continue;
            };
            if j[q] < jp && j[q] != f[q] {
                j[q] = jp.min(f[q]);
                fifo.push_back(q);
            }
        }
    }
    Ok(mask.with_values(j))
}

/// Residue of a reconstruction and its positive support.
#[derive(Debug, Clone, PartialEq)]
pub struct Dome {
    /// `mask - reconstruction`, non-negative.
    pub dome: ThermalRaster,
    /// Connected components of `dome > plateau_eps`.
    pub support: RegionSet,
}

/// Dome residue of `raster` over an already reconstructed surface.
pub fn dome_from_reconstruction(
    raster: &ThermalRaster,
    reconstruction: &ThermalRaster,
    settings: &MorphSettings,
) -> Dome {
    let values: Vec<f64> = raster
        .values()
        .iter()
        .zip(reconstruction.values())
        .map(|(&f, &r)| f - r)
        .collect();
    let dome = raster.with_values(values);
    let positive = BinaryMask::from_fn_index(raster.shape(), |p| {
        raster.is_valid(p) && dome.values()[p] > settings.plateau_eps
    });
    Dome {
        support: connected_components(&positive, settings.connectivity),
        dome,
    }
}

/// h-dome transform: `raster - reconstruct(raster - h, raster)`.
pub fn h_dome(raster: &ThermalRaster, h: f64, settings: &MorphSettings) -> Result<Dome> {
    settings.validate()?;
    if !(h.is_finite() && h > settings.plateau_eps) {
        return Err(Error::Parameter(format!(
            "h must exceed plateau_eps ({}), got {h}",
            settings.plateau_eps
        )));
    }
    let marker = raster.map(|v| v - h)?;
    let rec = reconstruct(&marker, raster, settings)?;
    Ok(dome_from_reconstruction(raster, &rec, settings))
}

/// Marker `F - w^3 * h` where `w` is `weights` min-max normalized to
/// `[0, 1]` over valid pixels. The cube gives taller hills deeper offsets
/// while keeping offset 0 at the minimum and `h` at the maximum.
///
/// A flat weight source yields `w = 0`, i.e. the marker equals `raster`.
pub fn regularized_marker_with_weights(
    raster: &ThermalRaster,
    weights: &ThermalRaster,
    h: f64,
) -> Result<ThermalRaster> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::Parameter(format!("h must be > 0, got {h}")));
    }
    raster.shape().check_same(weights.shape())?;
    let Some((lo, hi)) = weights.min_max() else {
        return Ok(raster.clone());
    };
    let range = hi - lo;
    if range <= 0.0 {
        return Ok(raster.clone());
    }
    let out = raster
        .values()
        .iter()
        .zip(weights.values())
        .enumerate()
        .map(|(p, (&f, &wv))| {
            if !raster.is_valid(p) || !weights.is_valid(p) {
                return f;
            }
            let w = ((wv - lo) / range).clamp(0.0, 1.0);
            f - w * w * w * h
        })
        .collect();
    Ok(raster.with_values(out))
}

/// [`regularized_marker_with_weights`] with the raster as its own weight source.
pub fn regularized_marker(raster: &ThermalRaster, h: f64) -> Result<ThermalRaster> {
    regularized_marker_with_weights(raster, raster, h)
}

/// Plateaus (values within `plateau_eps` of a neighbour) that are strictly
/// higher than every pixel adjacent to them.
pub fn regional_maxima(
    raster: &ThermalRaster,
    settings: &MorphSettings,
    connectivity: Connectivity,
) -> RegionSet {
    let shape: Shape = raster.shape();
    let v = raster.values();
    let eps = settings.plateau_eps;
    let plateaus = label_with(
        shape,
        connectivity,
        |p| raster.is_valid(p),
        |p, q| (v[p] - v[q]).abs() <= eps,
    );
    let labels = plateaus.label_map();
    plateaus.retain(|region| {
        region.inner_boundary.iter().all(|&p| {
            shape
                .neighbors(p, connectivity)
                .filter(|&q| raster.is_valid(q) && labels[q] != region.id)
                .all(|q| v[q] < v[p])
        })
    })
}
