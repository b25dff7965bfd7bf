//! Neighborhood vectors, the sparse anchor grid, and patch tiling.
//!
//! A neighborhood is the `w x w` window whose bottom-left corner is its
//! anchor; it is "centered" at `anchor + w/2`. Vectors list the window's
//! pixels row by row (bottom row first) with the four channels R, G, B, S
//! interleaved per pixel.

use crate::error::{Error, Result};
use crate::raster::{Channel, PixelCoord, RgbsImage};
use crate::scalar::Scalar;

/// Channels per pixel in a neighborhood vector.
pub const RGBS_CHANNELS: usize = 4;

/// Geometry of the sparse neighborhood grid over one image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    pub nbhd_width: usize,
    pub spacing: usize,
    pub image_width: usize,
    pub image_height: usize,
}

impl GridSpec {
    /// Grid with the conventional spacing of a quarter window width.
    pub fn with_default_spacing(nbhd_width: usize, image_width: usize, image_height: usize) -> Self {
        GridSpec { nbhd_width, spacing: (nbhd_width / 4).max(1), image_width, image_height }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nbhd_width < 2 || self.nbhd_width % 2 != 0 {
            return Err(Error::domain(format!(
                "neighborhood width {} must be even and at least 2",
                self.nbhd_width
            )));
        }
        if self.spacing == 0 || self.spacing > self.nbhd_width {
            return Err(Error::domain(format!(
                "grid spacing {} must lie in [1, {}]",
                self.spacing, self.nbhd_width
            )));
        }
        if self.image_width < self.nbhd_width || self.image_height < self.nbhd_width {
            return Err(Error::degenerate(format!(
                "image {}x{} is smaller than the {}x{} neighborhood",
                self.image_width, self.image_height, self.nbhd_width, self.nbhd_width
            )));
        }
        Ok(())
    }

    pub fn vector_len(&self) -> usize {
        self.nbhd_width * self.nbhd_width * RGBS_CHANNELS
    }
}

/// Window offsets along one axis: multiples of `spacing`, plus a final
/// position clamped to `dim - w` so the far edge is covered.
fn axis_positions(dim: usize, w: usize, spacing: usize) -> Vec<usize> {
    let last = dim - w;
    let mut out: Vec<usize> = (0..=last).step_by(spacing).collect();
    if out.last() != Some(&last) {
        out.push(last);
    }
    out
}

/// Anchor lattice of a validated [`GridSpec`]. Anchor `i` sits at
/// `(xs[i % nx], ys[i / nx])`, i.e. ascending row-major order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseGrid {
    spec: GridSpec,
    xs: Vec<usize>,
    ys: Vec<usize>,
}

impl SparseGrid {
    pub fn new(spec: GridSpec) -> Result<Self> {
        spec.validate()?;
        Ok(SparseGrid {
            xs: axis_positions(spec.image_width, spec.nbhd_width, spec.spacing),
            ys: axis_positions(spec.image_height, spec.nbhd_width, spec.spacing),
            spec,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.xs.len() * self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn anchor(&self, index: usize) -> PixelCoord {
        let nx = self.xs.len();
        PixelCoord::new(self.xs[index % nx], self.ys[index / nx])
    }

    pub fn anchors(&self) -> Vec<PixelCoord> {
        (0..self.len()).map(|i| self.anchor(i)).collect()
    }

    /// Indices of anchors whose window fully contains `tile`, ascending.
    pub fn containing(&self, tile: Tile) -> Vec<usize> {
        let w = self.spec.nbhd_width;
        let span = |positions: &[usize], start: usize| -> std::ops::Range<usize> {
            // p <= start  and  p + w >= start + size
            let lo_bound = (start + tile.size).saturating_sub(w);
            let lo = positions.partition_point(|p| *p < lo_bound);
            let hi = positions.partition_point(|p| *p <= start);
            lo..hi.max(lo)
        };
        let nx = self.xs.len();
        let (rx, ry) = (span(&self.xs, tile.x), span(&self.ys, tile.y));
        let mut out = Vec::with_capacity(rx.len() * ry.len());
        for iy in ry {
            for ix in rx.clone() {
                out.push(iy * nx + ix);
            }
        }
        out
    }

    /// Number of windows covering each image pixel.
    pub fn covering_counts(&self) -> Vec<u32> {
        let (iw, ih) = (self.spec.image_width, self.spec.image_height);
        let w = self.spec.nbhd_width;
        let mut counts = vec![0u32; iw * ih];
        for i in 0..self.len() {
            let a = self.anchor(i);
            for y in a.y..a.y + w {
                for c in &mut counts[y * iw + a.x..y * iw + a.x + w] {
                    *c += 1;
                }
            }
        }
        counts
    }
}

pub fn sparse_grid_anchors(grid: &GridSpec) -> Result<Vec<PixelCoord>> {
    Ok(SparseGrid::new(*grid)?.anchors())
}

/// A square block of output pixels with bottom-left corner `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Tile {
    pub x: usize,
    pub y: usize,
    pub size: usize,
}

impl Tile {
    pub fn pixel(p: PixelCoord) -> Self {
        Tile { x: p.x, y: p.y, size: 1 }
    }

    pub fn pixels(&self) -> impl Iterator<Item = PixelCoord> + '_ {
        (self.y..self.y + self.size)
            .flat_map(move |y| (self.x..self.x + self.size).map(move |x| PixelCoord::new(x, y)))
    }
}

/// Patch width used when scheduling the search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchSpec {
    pub patch_width: usize,
}

impl PatchSpec {
    pub fn new(patch_width: usize) -> Self {
        PatchSpec { patch_width }
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        if self.patch_width == 0 || self.patch_width > grid.spacing {
            return Err(Error::domain(format!(
                "patch width {} must lie in [1, grid spacing {}]",
                self.patch_width, grid.spacing
            )));
        }
        Ok(())
    }

    /// Tiling phase that centers interior tiles on window centers, the
    /// placement where the fewest windows contain a whole tile.
    pub fn centered_phase(&self, grid: &GridSpec) -> usize {
        (grid.nbhd_width.saturating_sub(self.patch_width) / 2) % grid.spacing
    }
}

impl Default for PatchSpec {
    fn default() -> Self {
        PatchSpec { patch_width: 2 }
    }
}

/// Tile starts along one axis: `phase, phase + w', ...`, with an extra
/// clamped tile at 0 when `phase > 0` and at `dim - w'` when the last
/// regular tile falls short.
fn tile_positions(dim: usize, size: usize, phase: usize) -> Vec<usize> {
    let last = dim - size;
    let mut out = Vec::new();
    if phase > 0 || last == 0 {
        out.push(0);
    }
    let mut p = phase;
    while p <= last {
        if out.last() != Some(&p) {
            out.push(p);
        }
        p += size;
    }
    if out.last() != Some(&last) {
        out.push(last);
    }
    out
}

/// Non-overlapping `w' x w'` tiles covering `width x height`, row-major,
/// aligned to the image origin. Edge tiles are clamped inward when the
/// dimensions are not multiples of `w'`.
pub fn patch_tiles(width: usize, height: usize, patch: PatchSpec) -> Result<Vec<Tile>> {
    patch_tiles_with_phase(width, height, patch, 0)
}

/// As [`patch_tiles`] with regular tiles starting at `phase` on both axes.
pub fn patch_tiles_with_phase(width: usize, height: usize, patch: PatchSpec, phase: usize) -> Result<Vec<Tile>> {
    let s = patch.patch_width;
    if s == 0 || width < s || height < s {
        return Err(Error::degenerate(format!("cannot tile {width}x{height} with {s}x{s} patches")));
    }
    let phase = phase % s;
    let xs = tile_positions(width, s, phase);
    let ys = tile_positions(height, s, phase);
    Ok(ys.iter().flat_map(|&y| xs.iter().map(move |&x| Tile { x, y, size: s })).collect())
}

/// Neighborhood vectors stored contiguously, one row per anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodMatrix<T> {
    dim: usize,
    data: Vec<T>,
    anchors: Vec<PixelCoord>,
    nbhd_width: usize,
}

impl<T: Scalar> NeighborhoodMatrix<T> {
    /// Wraps raw row-major vectors (used for synthetic point sets).
    pub fn from_rows(dim: usize, data: Vec<T>) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(Error::shape(format!("{} values do not form rows of length {dim}", data.len())));
        }
        let n = data.len() / dim;
        Ok(NeighborhoodMatrix { dim, data, anchors: vec![PixelCoord::default(); n], nbhd_width: 0 })
    }

    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nbhd_width(&self) -> usize {
        self.nbhd_width
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[T] {
        &self.data
    }

    pub fn anchors(&self) -> &[PixelCoord] {
        &self.anchors
    }
}

/// Writes the neighborhood at `anchor` into `out` (length `w * w * 4`).
pub fn extract_into<T: Scalar>(img: &RgbsImage<T>, anchor: PixelCoord, w: usize, out: &mut [T]) {
    debug_assert_eq!(out.len(), w * w * RGBS_CHANNELS);
    let iw = img.width();
    let planes = Channel::RGBS.map(|c| img.plane(c));
    let mut k = 0;
    for y in anchor.y..anchor.y + w {
        let row = y * iw;
        for x in anchor.x..anchor.x + w {
            for plane in &planes {
                out[k] = plane[row + x];
                k += 1;
            }
        }
    }
}

/// One vector per grid anchor, in anchor order.
pub fn extract_all<T: Scalar>(img: &RgbsImage<T>, grid: &GridSpec) -> Result<NeighborhoodMatrix<T>> {
    if grid.image_width != img.width() || grid.image_height != img.height() {
        return Err(Error::shape(format!(
            "grid expects {}x{} but image is {}x{}",
            grid.image_width,
            grid.image_height,
            img.width(),
            img.height()
        )));
    }
    let lattice = SparseGrid::new(*grid)?;
    let anchors = lattice.anchors();
    let dim = grid.vector_len();
    let mut data = vec![T::zero(); anchors.len() * dim];
    for (a, chunk) in anchors.iter().zip(data.chunks_exact_mut(dim)) {
        extract_into(img, *a, grid.nbhd_width, chunk);
    }
    Ok(NeighborhoodMatrix { dim, data, anchors, nbhd_width: grid.nbhd_width })
}

/// Indices of grid anchors whose window fully contains `tile`.
pub fn containing_anchors(tile: Tile, grid: &GridSpec) -> Result<Vec<usize>> {
    Ok(SparseGrid::new(*grid)?.containing(tile))
}
