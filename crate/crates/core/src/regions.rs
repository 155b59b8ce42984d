//! Connected-component labeling and per-region boundary extraction.

use crate::raster::{BinaryMask, Connectivity, Shape};

/// One labeled connected region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    /// Label in `1..=K`, matching the label map.
    pub id: u32,
    /// Pixel indices in raster-scan order.
    pub pixels: Vec<usize>,
    /// Pixels with at least one neighbour outside the region (image border
    /// counts as outside), in raster-scan order.
    pub inner_boundary: Vec<usize>,
}

impl Region {
    pub fn area(&self) -> usize {
        self.pixels.len()
    }
}

/// Labeled regions plus the per-pixel label map (`0` = background).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionSet {
    shape: Shape,
    connectivity: Connectivity,
    labels: Vec<u32>,
    regions: Vec<Region>,
}

impl RegionSet {
    pub fn empty(shape: Shape, connectivity: Connectivity) -> Self {
        RegionSet {
            shape,
            connectivity,
            labels: vec![0; shape.len()],
            regions: Vec::new(),
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn connectivity(&self) -> Connectivity {
        self.connectivity
    }

    pub fn label_map(&self) -> &[u32] {
        &self.labels
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn total_area(&self) -> usize {
        self.regions.iter().map(Region::area).sum()
    }

    pub fn to_mask(&self) -> BinaryMask {
        BinaryMask::from_fn_index(self.shape, |i| self.labels[i] != 0)
    }

    /// Keeps the regions accepted by `keep`, relabeling them `1..=K` in their
    /// original order.
    pub fn retain(&self, mut keep: impl FnMut(&Region) -> bool) -> RegionSet {
        let mut out = RegionSet::empty(self.shape, self.connectivity);
        for region in &self.regions {
            if !keep(region) {
                continue;
            }
            let id = out.regions.len() as u32 + 1;
            for &p in &region.pixels {
                out.labels[p] = id;
            }
            out.regions.push(Region {
                id,
                pixels: region.pixels.clone(),
                inner_boundary: region.inner_boundary.clone(),
            });
        }
        out
    }
}

struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    fn new() -> Self {
        DisjointSets { parent: Vec::new() }
    }

    fn make(&mut self) -> usize {
        let id = self.parent.len();
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller root wins so roots follow scan order
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Two-pass union-find labeling of the pixels selected by `include`, where
/// neighbouring included pixels `p`, `q` join when `linked(p, q)` holds.
///
/// Labels are assigned in raster-scan order of each region's first pixel.
pub(crate) fn label_with(
    shape: Shape,
    connectivity: Connectivity,
    include: impl Fn(usize) -> bool,
    linked: impl Fn(usize, usize) -> bool,
) -> RegionSet {
    const NONE: usize = usize::MAX;
    // offsets already visited in a forward raster scan
    let backward: Vec<(isize, isize)> = connectivity
        .offsets()
        .iter()
        .copied()
        .filter(|&(dx, dy)| dy < 0 || (dy == 0 && dx < 0))
        .collect();

    let n = shape.len();
    let mut provisional = vec![NONE; n];
    let mut sets = DisjointSets::new();
    for p in 0..n {
        if !include(p) {
            continue;
        }
        let mut label = NONE;
        for &(dx, dy) in &backward {
            let Some(q) = shape.offset(p, dx, dy) else {
                continue;
            };
            let lq = provisional[q];
            if lq == NONE || !linked(p, q) {
                continue;
            }
            if label == NONE {
                label = lq;
            } else {
                sets.union(label, lq);
            }
        }
        provisional[p] = if label == NONE { sets.make() } else { label };
    }

    let mut final_id = vec![0u32; sets.parent.len()];
    let mut regions: Vec<Region> = Vec::new();
    let mut labels = vec![0u32; n];
    for p in 0..n {
        let lp = provisional[p];
        if lp == NONE {
            continue;
        }
        let root = sets.find(lp);
        if final_id[root] == 0 {
            regions.push(Region {
                id: regions.len() as u32 + 1,
                pixels: Vec::new(),
                inner_boundary: Vec::new(),
            });
            final_id[root] = regions.len() as u32;
        }
        let id = final_id[root];
        labels[p] = id;
        regions[id as usize - 1].pixels.push(p);
    }

    for region in &mut regions {
        region.inner_boundary = region
            .pixels
            .iter()
            .copied()
            .filter(|&p| {
                shape.touches_border(p, connectivity)
                    || shape.neighbors(p, connectivity).any(|q| labels[q] != region.id)
            })
            .collect();
    }

    RegionSet {
        shape,
        connectivity,
        labels,
        regions,
    }
}

/// Maximal connected regions of set pixels, labeled `1..=K` in scan order.
pub fn connected_components(mask: &BinaryMask, connectivity: Connectivity) -> RegionSet {
    label_with(mask.shape(), connectivity, |p| mask.at(p), |_, _| true)
}

/// Drops components smaller than `min_area` pixels.
pub fn filter_small(mask: &BinaryMask, connectivity: Connectivity, min_area: usize) -> BinaryMask {
    connected_components(mask, connectivity)
        .retain(|r| r.area() >= min_area)
        .to_mask()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(rows: &[&[u8]]) -> BinaryMask {
        let h = rows.len();
        let w = rows[0].len();
        BinaryMask::from_fn(w, h, |x, y| rows[y][x] != 0).unwrap()
    }

    #[test]
    fn diagonal_pixels_split_under_four_connectivity() {
        let m = mask(&[&[1, 0], &[0, 1]]);
        let four = connected_components(&m, Connectivity::Four);
        assert_eq!(four.len(), 2);
        assert!(four.regions().iter().all(|r| r.area() == 1));
        let eight = connected_components(&m, Connectivity::Eight);
        assert_eq!(eight.len(), 1);
        assert_eq!(eight.regions()[0].area(), 2);
    }

    #[test]
    fn empty_mask_gives_empty_set() {
        let m = BinaryMask::empty(Shape::new(4, 3));
        let rs = connected_components(&m, Connectivity::Eight);
        assert!(rs.is_empty());
        assert!(rs.label_map().iter().all(|&l| l == 0));
    }

    #[test]
    fn u_shape_merges_late() {
        // both arms get provisional labels before the bottom row joins them
        let m = mask(&[&[1, 0, 1], &[1, 0, 1], &[1, 1, 1]]);
        let rs = connected_components(&m, Connectivity::Four);
        assert_eq!(rs.len(), 1);
        assert_eq!(rs.total_area(), 7);
    }

    #[test]
    fn inner_boundary_of_filled_square() {
        let m = BinaryMask::from_fn(7, 7, |x, y| (1..6).contains(&x) && (1..6).contains(&y)).unwrap();
        let rs = connected_components(&m, Connectivity::Eight);
        let r = &rs.regions()[0];
        assert_eq!(r.area(), 25);
        // 5x5 square: ring of 16 pixels, 3x3 interior
        assert_eq!(r.inner_boundary.len(), 16);
    }

    #[test]
    fn image_border_counts_as_outside() {
        let m = BinaryMask::full(Shape::new(3, 3));
        let rs = connected_components(&m, Connectivity::Four);
        assert_eq!(rs.regions()[0].inner_boundary.len(), 8);
    }

    #[test]
    fn retain_relabels_contiguously() {
        let m = mask(&[&[1, 0, 1, 0, 1]]);
        let rs = connected_components(&m, Connectivity::Four);
        let kept = rs.retain(|r| r.id != 2);
        assert_eq!(kept.len(), 2);
        assert_eq!(kept.label_map(), &[1, 0, 0, 0, 2]);
    }

    #[test]
    fn small_components_are_filtered() {
        let m = mask(&[&[1, 1, 1, 0, 1]]);
        let f = filter_small(&m, Connectivity::Four, 2);
        assert_eq!(f.bits(), &[true, true, true, false, false]);
    }
}
