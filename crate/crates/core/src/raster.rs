//! Raster images with unit-interval samples, the optional scale channel, and
//! the resampling used between pyramid levels.
//!
//! Rows are stored bottom-first: row 0 is the bottom of the picture, so a
//! [`PixelCoord`] has its origin at the bottom-left corner. File codecs flip
//! rows at the boundary.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::scale_map::ScaleMap;

/// Color and scale planes, in the order they appear inside a neighborhood
/// vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    R,
    G,
    B,
    S,
}

impl Channel {
    pub const RGB: [Channel; 3] = [Channel::R, Channel::G, Channel::B];
    pub const RGBS: [Channel; 4] = [Channel::R, Channel::G, Channel::B, Channel::S];

    pub fn index(self) -> usize {
        match self {
            Channel::R => 0,
            Channel::G => 1,
            Channel::B => 2,
            Channel::S => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::R => "R",
            Channel::G => "G",
            Channel::B => "B",
            Channel::S => "S",
        }
    }
}

/// Column/row index with a bottom-left origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct PixelCoord {
    pub x: usize,
    pub y: usize,
}

impl PixelCoord {
    pub const fn new(x: usize, y: usize) -> Self {
        PixelCoord { x, y }
    }
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::degenerate(format!("image dimensions {width}x{height} must be at least 1x1")));
    }
    Ok(())
}

fn check_plane<T: Scalar>(name: &str, plane: &[T], width: usize, height: usize) -> Result<()> {
    if plane.len() != width * height {
        return Err(Error::shape(format!(
            "{name} plane holds {} samples, expected {width}x{height} = {}",
            plane.len(),
            width * height
        )));
    }
    if let Some(i) = plane.iter().position(|v| !(*v >= T::zero() && *v <= T::one())) {
        return Err(Error::domain(format!(
            "{name} plane sample {i} = {} outside [0, 1]",
            plane[i]
        )));
    }
    Ok(())
}

/// An RGB raster with samples in `[0, 1]`, stored as three row-major planes.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage<T> {
    width: usize,
    height: usize,
    planes: [Vec<T>; 3],
}

impl<T: Scalar> RasterImage<T> {
    /// Builds an image from R, G and B planes (row-major, bottom row first).
    pub fn new(width: usize, height: usize, planes: [Vec<T>; 3]) -> Result<Self> {
        check_dims(width, height)?;
        for (ch, plane) in Channel::RGB.iter().zip(planes.iter()) {
            check_plane(ch.name(), plane, width, height)?;
        }
        Ok(RasterImage { width, height, planes })
    }

    /// Samples `f(x, y)` for every pixel; values are clamped into `[0, 1]`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [T; 3]) -> Result<Self> {
        check_dims(width, height)?;
        let mut planes: [Vec<T>; 3] = Default::default();
        for p in planes.iter_mut() {
            p.reserve(width * height);
        }
        for y in 0..height {
            for x in 0..width {
                let rgb = f(x, y);
                for c in 0..3 {
                    planes[c].push(clamp_unit(rgb[c]));
                }
            }
        }
        Ok(RasterImage { width, height, planes })
    }

    pub fn constant(width: usize, height: usize, rgb: [T; 3]) -> Result<Self> {
        Self::from_fn(width, height, |_, _| rgb)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// One of the R, G, B planes. Panics for [`Channel::S`], which a plain
    /// raster does not carry.
    pub fn plane(&self, channel: Channel) -> &[T] {
        assert!(channel != Channel::S, "RasterImage has no scale plane");
        &self.planes[channel.index()]
    }

    pub fn planes(&self) -> &[Vec<T>; 3] {
        &self.planes
    }

    pub fn get(&self, channel: Channel, x: usize, y: usize) -> T {
        self.plane(channel)[y * self.width + x]
    }

    pub fn rgb(&self, x: usize, y: usize) -> [T; 3] {
        let i = y * self.width + x;
        [self.planes[0][i], self.planes[1][i], self.planes[2][i]]
    }

    /// Block-mean reduction by an integer factor. Output dimensions are
    /// truncated (`floor(dim / factor)`).
    pub fn downsample(&self, factor: usize) -> Result<Self> {
        let (w, h) = reduced_dims(self.width, self.height, factor)?;
        let planes = self.planes.clone().map(|p| downsample_plane(&p, self.width, self.height, factor, w, h));
        Ok(RasterImage { width: w, height: h, planes })
    }

    /// Bilinear enlargement by an integer factor with clamp-to-edge sampling.
    pub fn upsample_bilinear(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::domain("upsampling factor must be at least 1"));
        }
        let w = self.width.checked_mul(factor).ok_or_else(|| Error::degenerate("upsampled width overflows"))?;
        let h = self.height.checked_mul(factor).ok_or_else(|| Error::degenerate("upsampled height overflows"))?;
        self.resize_bilinear(w, h)
    }

    /// Bilinear resampling to arbitrary dimensions (pixel-center aligned,
    /// clamp-to-edge).
    pub fn resize_bilinear(&self, width: usize, height: usize) -> Result<Self> {
        check_dims(width, height)?;
        let planes = self
            .planes
            .clone()
            .map(|p| resize_plane(&p, self.width, self.height, width, height));
        Ok(RasterImage { width, height, planes })
    }

    /// Converts the samples into another scalar type.
    pub fn cast<U: Scalar>(&self) -> RasterImage<U> {
        RasterImage {
            width: self.width,
            height: self.height,
            planes: self.planes.clone().map(|p| p.iter().map(|v| clamp_unit(U::of(v.as_f64()))).collect()),
        }
    }
}

/// A raster with an additional normalized scale plane.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbsImage<T> {
    base: RasterImage<T>,
    scale: Vec<T>,
}

impl<T: Scalar> RgbsImage<T> {
    pub fn new(base: RasterImage<T>, scale: Vec<T>) -> Result<Self> {
        check_plane("S", &scale, base.width, base.height)?;
        Ok(RgbsImage { base, scale })
    }

    pub fn base(&self) -> &RasterImage<T> {
        &self.base
    }

    pub fn into_base(self) -> RasterImage<T> {
        self.base
    }

    pub fn width(&self) -> usize {
        self.base.width
    }

    pub fn height(&self) -> usize {
        self.base.height
    }

    pub fn scale_plane(&self) -> &[T] {
        &self.scale
    }

    pub fn plane(&self, channel: Channel) -> &[T] {
        match channel {
            Channel::S => &self.scale,
            c => self.base.plane(c),
        }
    }

    /// Mutable access to any of the four planes. Callers must keep samples
    /// inside `[0, 1]`.
    pub(crate) fn plane_mut(&mut self, channel: Channel) -> &mut [T] {
        match channel {
            Channel::S => &mut self.scale,
            c => &mut self.base.planes[c.index()],
        }
    }

    pub fn get(&self, channel: Channel, x: usize, y: usize) -> T {
        self.plane(channel)[y * self.base.width + x]
    }

    /// Replaces the scale plane, keeping the color planes.
    pub fn with_scale_plane(mut self, scale: Vec<T>) -> Result<Self> {
        check_plane("S", &scale, self.base.width, self.base.height)?;
        self.scale = scale;
        Ok(self)
    }

    /// Bilinear resampling of all four planes.
    pub fn resize_bilinear(&self, width: usize, height: usize) -> Result<Self> {
        let base = self.base.resize_bilinear(width, height)?;
        let scale = resize_plane(&self.scale, self.base.width, self.base.height, width, height);
        Ok(RgbsImage { base, scale })
    }
}

/// Attaches a scale map as the S plane, normalized to `[0, 1]` against the
/// map's theoretical bounds. A flat map (`s_max == s_min`) yields a constant
/// 0.5 plane.
pub fn attach_scale_channel<T: Scalar>(img: &RasterImage<T>, smap: &ScaleMap<T>) -> Result<RgbsImage<T>> {
    if smap.width() != img.width || smap.height() != img.height {
        return Err(Error::shape(format!(
            "scale map is {}x{} but image is {}x{}",
            smap.width(),
            smap.height(),
            img.width,
            img.height
        )));
    }
    Ok(RgbsImage { base: img.clone(), scale: smap.normalized_values() })
}

pub(crate) fn clamp_unit<T: Scalar>(v: T) -> T {
    if v.is_nan() {
        T::zero()
    } else {
        v.max(T::zero()).min(T::one())
    }
}

fn reduced_dims(width: usize, height: usize, factor: usize) -> Result<(usize, usize)> {
    if factor == 0 {
        return Err(Error::domain("downsampling factor must be at least 1"));
    }
    let (w, h) = (width / factor, height / factor);
    if w == 0 || h == 0 {
        return Err(Error::degenerate(format!(
            "downsampling {width}x{height} by {factor} gives {w}x{h}"
        )));
    }
    Ok((w, h))
}

fn downsample_plane<T: Scalar>(src: &[T], sw: usize, sh: usize, factor: usize, w: usize, h: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(w * h);
    for oy in 0..h {
        for ox in 0..w {
            let x1 = ((ox + 1) * factor).min(sw);
            let y1 = ((oy + 1) * factor).min(sh);
            let mut sum = T::zero();
            let mut n = 0usize;
            for y in oy * factor..y1 {
                for v in &src[y * sw + ox * factor..y * sw + x1] {
                    sum += *v;
                    n += 1;
                }
            }
            out.push(clamp_unit(sum / T::of_usize(n)));
        }
    }
    out
}

/// Source coordinate and blend weight for output index `i` when mapping
/// `src` samples onto `dst` samples with pixel centers aligned.
fn bilinear_taps<T: Scalar>(i: usize, src: usize, dst: usize) -> (usize, usize, T) {
    let ratio = src as f64 / dst as f64;
    let pos = ((i as f64 + 0.5) * ratio - 0.5).clamp(0.0, (src - 1) as f64);
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(src - 1);
    (lo, hi, T::of(pos - lo as f64))
}

fn resize_plane<T: Scalar>(src: &[T], sw: usize, sh: usize, w: usize, h: usize) -> Vec<T> {
    if sw == w && sh == h {
        return src.to_vec();
    }
    let xs: Vec<(usize, usize, T)> = (0..w).map(|x| bilinear_taps(x, sw, w)).collect();
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let (y0, y1, fy) = bilinear_taps::<T>(y, sh, h);
        let (r0, r1) = (&src[y0 * sw..(y0 + 1) * sw], &src[y1 * sw..(y1 + 1) * sw]);
        for &(x0, x1, fx) in &xs {
            let top = r0[x0] + (r0[x1] - r0[x0]) * fx;
            let bot = r1[x0] + (r1[x1] - r1[x0]) * fx;
            out.push(clamp_unit(top + (bot - top) * fy));
        }
    }
    out
}
