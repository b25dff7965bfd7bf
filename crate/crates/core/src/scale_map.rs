//! Per-pixel perspective scale maps derived from slant and tilt angles.
//!
//! The slant fixes the extreme scales (`1/cos σ` and `cos σ`); the tilt fixes
//! the in-plane direction along which the scale falls off linearly. Pixel
//! coordinates have a bottom-left origin, so with a tilt in the first
//! quadrant the largest texels sit at the origin and the smallest at the
//! top-right corner.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_atomically;
use crate::raster::PixelCoord;
use crate::scalar::Scalar;

/// Slant and tilt, both in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewAngles<T> {
    sigma: T,
    tau: T,
}

impl<T: Scalar> ViewAngles<T> {
    /// Requires `0 <= sigma < 90` and `0 <= tau < 360`.
    pub fn new(sigma: T, tau: T) -> Result<Self> {
        if !(sigma >= T::zero() && sigma < T::of(90.0)) {
            return Err(Error::domain(format!("slant {sigma} must lie in [0, 90) degrees")));
        }
        if !(tau >= T::zero() && tau < T::of(360.0)) {
            return Err(Error::domain(format!("tilt {tau} must lie in [0, 360) degrees")));
        }
        Ok(ViewAngles { sigma, tau })
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    pub fn tau(&self) -> T {
        self.tau
    }

    /// The same slant with the tilt rotated by half a turn.
    pub fn opposite_tilt(&self) -> Self {
        let t = self.tau + T::of(180.0);
        let tau = if t >= T::of(360.0) { t - T::of(360.0) } else { t };
        ViewAngles { sigma: self.sigma, tau }
    }

    /// Unit tilt direction `(sin τ, cos τ)` in image coordinates.
    pub fn tilt_direction(&self) -> (T, T) {
        let t = self.tau.to_radians();
        (t.sin(), t.cos())
    }
}

/// Extreme scales induced by the slant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleBounds<T> {
    pub s_max: T,
    pub s_min: T,
    pub s_delta: T,
}

pub fn scale_bounds<T: Scalar>(view: &ViewAngles<T>) -> ScaleBounds<T> {
    let c = view.sigma.to_radians().cos();
    let s_max = T::one() / c;
    ScaleBounds { s_max, s_min: c, s_delta: s_max - c }
}

/// Extent of the projected coordinate over the image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionRange<T> {
    pub y_max: T,
    pub y_min: T,
    pub y_delta: T,
}

/// `y_max = (w - 1 - w/2)|sin τ| + (h - 1 - h/2)|cos τ|`.
///
/// For tilts in `[0°, 90°]` the absolute values are no-ops; outside that
/// quadrant they keep `y_delta` positive so the map decreases along the
/// tilt direction for every tilt.
pub fn projection_range<T: Scalar>(w: usize, h: usize, tau: T) -> ProjectionRange<T> {
    let t = tau.to_radians();
    let half = |d: usize| T::of_usize(d) - T::one() - T::of_usize(d) / T::of(2.0);
    let y_max = half(w) * t.sin().abs() + half(h) * t.cos().abs();
    ProjectionRange { y_max, y_min: -y_max, y_delta: y_max + y_max }
}

/// Scale as a function of (possibly fractional) pixel coordinates, with the
/// trigonometry evaluated once.
#[derive(Debug, Clone, Copy)]
pub struct ScaleField<T> {
    width: usize,
    height: usize,
    sin_t: T,
    cos_t: T,
    bounds: ScaleBounds<T>,
    range: ProjectionRange<T>,
}

impl<T: Scalar> ScaleField<T> {
    pub fn new(width: usize, height: usize, view: &ViewAngles<T>) -> Self {
        let t = view.tau.to_radians();
        ScaleField {
            width,
            height,
            sin_t: t.sin(),
            cos_t: t.cos(),
            bounds: scale_bounds(view),
            range: projection_range(width, height, view.tau),
        }
    }

    pub fn bounds(&self) -> ScaleBounds<T> {
        self.bounds
    }

    pub fn range(&self) -> ProjectionRange<T> {
        self.range
    }

    /// Projected coordinate of `(x, y)` measured from the image center.
    pub fn projected(&self, x: T, y: T) -> T {
        let two = T::of(2.0);
        (x - T::of_usize(self.width) / two) * self.sin_t + (y - T::of_usize(self.height) / two) * self.cos_t
    }

    /// Linear scale before clamping; may leave `[s_min, s_max]` near corners.
    pub fn raw_at(&self, x: T, y: T) -> T {
        let b = self.bounds;
        let r = self.range;
        if b.s_delta == T::zero() || r.y_delta <= T::zero() {
            return b.s_max;
        }
        b.s_max - (self.projected(x, y) - r.y_min) * b.s_delta / r.y_delta
    }

    pub fn at(&self, x: T, y: T) -> T {
        self.raw_at(x, y).max(self.bounds.s_min).min(self.bounds.s_max)
    }
}

fn check_coord(p: PixelCoord, w: usize, h: usize) -> Result<()> {
    if p.x >= w || p.y >= h {
        return Err(Error::domain(format!("pixel ({}, {}) outside {w}x{h}", p.x, p.y)));
    }
    Ok(())
}

/// Scale at `p` clamped into `[s_min, s_max]`.
pub fn local_scale<T: Scalar>(p: PixelCoord, view: &ViewAngles<T>, w: usize, h: usize) -> Result<T> {
    check_coord(p, w, h)?;
    Ok(ScaleField::new(w, h, view).at(T::of_usize(p.x), T::of_usize(p.y)))
}

/// Scale at `p` straight from the linear formula, without clamping.
pub fn unclamped_local_scale<T: Scalar>(p: PixelCoord, view: &ViewAngles<T>, w: usize, h: usize) -> Result<T> {
    check_coord(p, w, h)?;
    Ok(ScaleField::new(w, h, view).raw_at(T::of_usize(p.x), T::of_usize(p.y)))
}

/// A dense grid of scale values, bottom row first.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleMap<T> {
    width: usize,
    height: usize,
    values: Vec<T>,
    view: ViewAngles<T>,
    bounds: ScaleBounds<T>,
}

pub fn compute_scale_map<T: Scalar>(w: usize, h: usize, view: ViewAngles<T>) -> Result<ScaleMap<T>> {
    if w == 0 || h == 0 {
        return Err(Error::degenerate(format!("scale map dimensions {w}x{h} must be at least 1x1")));
    }
    let field = ScaleField::new(w, h, &view);
    let mut values = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            values.push(field.at(T::of_usize(x), T::of_usize(y)));
        }
    }
    Ok(ScaleMap { width: w, height: h, values, view, bounds: field.bounds() })
}

impl<T: Scalar> ScaleMap<T> {
    /// Assembles a map from stored parts, checking the value count.
    pub fn from_parts(
        width: usize,
        height: usize,
        values: Vec<T>,
        view: ViewAngles<T>,
        bounds: ScaleBounds<T>,
    ) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::shape(format!(
                "scale map holds {} values, expected {width}x{height}",
                values.len()
            )));
        }
        Ok(ScaleMap { width, height, values, view, bounds })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn view(&self) -> ViewAngles<T> {
        self.view
    }

    pub fn bounds(&self) -> ScaleBounds<T> {
        self.bounds
    }

    pub fn get(&self, x: usize, y: usize) -> T {
        self.values[y * self.width + x]
    }

    pub fn min_value(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max_value(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    /// Values rescaled to `[0, 1]` against the theoretical bounds; a flat
    /// map becomes a constant 0.5.
    pub fn normalized_values(&self) -> Vec<T> {
        let ScaleBounds { s_max, s_min, .. } = self.bounds;
        if s_max > s_min {
            let span = s_max - s_min;
            self.values
                .iter()
                .map(|v| ((*v - s_min) / span).max(T::zero()).min(T::one()))
                .collect()
        } else {
            vec![T::of(0.5); self.values.len()]
        }
    }

    /// 8-bit preview, `[s_min, s_max]` mapped linearly onto `[0, 255]`.
    pub fn preview_gray8(&self) -> Vec<u8> {
        self.normalized_values().into_iter().map(crate::io::quantize).collect()
    }
}

const PSM_MAGIC: &[u8] = b"PSM1\n";

#[derive(Debug, Serialize, Deserialize)]
struct PsmHeader {
    width: usize,
    height: usize,
    sigma: f64,
    tau: f64,
    smin: f64,
    smax: f64,
}

/// Serializes to the PSM1 layout: magic line, one JSON header line, then
/// little-endian `f32` values, bottom row first.
pub fn encode_scale_map<T: Scalar>(smap: &ScaleMap<T>) -> Vec<u8> {
    let header = PsmHeader {
        width: smap.width,
        height: smap.height,
        sigma: smap.view.sigma.as_f64(),
        tau: smap.view.tau.as_f64(),
        smin: smap.bounds.s_min.as_f64(),
        smax: smap.bounds.s_max.as_f64(),
    };
    let mut out = PSM_MAGIC.to_vec();
    out.extend(serde_json::to_vec(&header).expect("header serializes"));
    out.push(b'\n');
    out.reserve(smap.values.len() * 4);
    for v in &smap.values {
        out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
    }
    out
}

pub fn decode_scale_map<T: Scalar>(bytes: &[u8]) -> Result<ScaleMap<T>> {
    let rest = bytes
        .strip_prefix(PSM_MAGIC)
        .ok_or_else(|| Error::format("scale map magic line is not \"PSM1\""))?;
    let eol = rest
        .iter()
        .position(|b| *b == b'\n')
        .ok_or_else(|| Error::format("scale map header line is truncated"))?;
    let header: PsmHeader = serde_json::from_slice(&rest[..eol])
        .map_err(|e| Error::format(format!("scale map header is malformed: {e}")))?;
    let payload = &rest[eol + 1..];
    let expected = header
        .width
        .checked_mul(header.height)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::format("scale map header dimensions overflow"))?;
    if payload.len() < expected {
        return Err(Error::format(format!(
            "scale map payload truncated: header {}x{} needs {expected} bytes, found {}",
            header.width,
            header.height,
            payload.len()
        )));
    }
    if payload.len() != expected {
        return Err(Error::format(format!(
            "scale map header {}x{} disagrees with payload of {} bytes",
            header.width,
            header.height,
            payload.len()
        )));
    }
    if header.width == 0 || header.height == 0 {
        return Err(Error::format("scale map header has an empty dimension"));
    }
    let view = ViewAngles::new(T::of(header.sigma), T::of(header.tau))
        .map_err(|e| Error::format(format!("scale map header angles invalid: {e}")))?;
    let bounds = scale_bounds(&view);
    let agrees = |stored: f64, derived: T| (stored - derived.as_f64()).abs() <= 1e-6 * derived.as_f64().abs().max(1.0);
    if !agrees(header.smin, bounds.s_min) || !agrees(header.smax, bounds.s_max) {
        return Err(Error::format("scale map header bounds disagree with its angles"));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| T::of(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
        .collect();
    ScaleMap::from_parts(header.width, header.height, values, view, bounds)
}

pub fn save_scale_map<T: Scalar>(smap: &ScaleMap<T>, path: impl AsRef<Path>) -> Result<()> {
    write_atomically(path.as_ref(), &encode_scale_map(smap))
}

pub fn load_scale_map<T: Scalar>(path: impl AsRef<Path>) -> Result<ScaleMap<T>> {
    decode_scale_map(&fs::read(path.as_ref())?)
}
