//! PNG and binary PPM (P6) codecs for [`RasterImage`].
//!
//! Samples map to 8-bit by `round(v * 255)` and back by `v / 255`. Files
//! store the top row first; rows are flipped on the way in and out.

use std::fs;
use std::io::{Cursor, Write};
use std::path::{Path, PathBuf};

use image::{ColorType, ImageFormat};

use crate::error::{Error, Result};
use crate::raster::{Channel, RasterImage};
use crate::scalar::Scalar;

const PNG_SIGNATURE: &[u8] = b"\x89PNG\r\n\x1a\n";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFileFormat {
    Png,
    Ppm,
}

impl ImageFileFormat {
    /// Picks a codec from the file extension (`.png` or `.ppm`).
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("png") => Ok(ImageFileFormat::Png),
            Some("ppm") => Ok(ImageFileFormat::Ppm),
            other => Err(Error::format(format!(
                "unsupported image extension {:?} (expected .png or .ppm)",
                other.unwrap_or("")
            ))),
        }
    }
}

/// Reads a PNG (8-bit RGB or grayscale) or a binary PPM (P6, maxval 255).
pub fn load_image<T: Scalar>(path: impl AsRef<Path>) -> Result<RasterImage<T>> {
    let bytes = fs::read(path.as_ref())?;
    decode_image(&bytes)
}

/// Decodes from memory, sniffing the format from the leading bytes.
pub fn decode_image<T: Scalar>(bytes: &[u8]) -> Result<RasterImage<T>> {
    if bytes.starts_with(PNG_SIGNATURE) {
        decode_png(bytes)
    } else if bytes.first() == Some(&b'P') {
        decode_ppm(bytes)
    } else {
        Err(Error::format("unrecognized image signature (expected PNG or PPM P6)"))
    }
}

/// Writes the image as PNG or PPM according to the extension. The file is
/// written to a sibling temporary and renamed into place, so a failed write
/// leaves no partial output.
pub fn save_image<T: Scalar>(img: &RasterImage<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_image(img, ImageFileFormat::from_path(path)?)?;
    write_atomically(path, &bytes)
}

pub fn encode_image<T: Scalar>(img: &RasterImage<T>, format: ImageFileFormat) -> Result<Vec<u8>> {
    let rgb = to_rgb8_top_down(img);
    match format {
        ImageFileFormat::Ppm => {
            let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
            out.extend_from_slice(&rgb);
            Ok(out)
        }
        ImageFileFormat::Png => {
            encode_png(&rgb, img.width(), img.height(), ColorType::Rgb8)
        }
    }
}

/// Writes an 8-bit grayscale PNG from bottom-row-first samples.
pub fn save_gray_png(width: usize, height: usize, bottom_up: &[u8], path: impl AsRef<Path>) -> Result<()> {
    if bottom_up.len() != width * height {
        return Err(Error::shape(format!(
            "gray buffer holds {} bytes, expected {}",
            bottom_up.len(),
            width * height
        )));
    }
    let mut top_down = Vec::with_capacity(bottom_up.len());
    for row in (0..height).rev() {
        top_down.extend_from_slice(&bottom_up[row * width..(row + 1) * width]);
    }
    let bytes = encode_png(&top_down, width, height, ColorType::L8)?;
    write_atomically(path.as_ref(), &bytes)
}

pub(crate) fn write_atomically(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = partial_path(path);
    let result = fs::File::create(&tmp).and_then(|mut f| {
        f.write_all(bytes)?;
        f.sync_all()
    });
    if let Err(e) = result.and_then(|_| fs::rename(&tmp, path)) {
        let _ = fs::remove_file(&tmp);
        return Err(e.into());
    }
    Ok(())
}

fn partial_path(path: &Path) -> PathBuf {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!(".{name}.partial"))
}

pub(crate) fn quantize<T: Scalar>(v: T) -> u8 {
    (v.as_f64().clamp(0.0, 1.0) * 255.0).round() as u8
}

fn to_rgb8_top_down<T: Scalar>(img: &RasterImage<T>) -> Vec<u8> {
    let (w, h) = (img.width(), img.height());
    let mut out = Vec::with_capacity(w * h * 3);
    for y in (0..h).rev() {
        for x in 0..w {
            for ch in Channel::RGB {
                out.push(quantize(img.get(ch, x, y)));
            }
        }
    }
    out
}

fn from_rgb8_top_down<T: Scalar>(width: usize, height: usize, data: &[u8], stride: usize) -> Result<RasterImage<T>> {
    let lut: Vec<T> = (0..=255u32).map(|v| T::of(v as f64 / 255.0)).collect();
    let mut planes: [Vec<T>; 3] = Default::default();
    for p in planes.iter_mut() {
        p.resize(width * height, T::zero());
    }
    for row in 0..height {
        let y = height - 1 - row;
        for x in 0..width {
            let px = &data[(row * width + x) * stride..];
            for c in 0..3 {
                let byte = if stride == 1 { px[0] } else { px[c] };
                planes[c][y * width + x] = lut[byte as usize];
            }
        }
    }
    RasterImage::new(width, height, planes)
}

fn encode_png(data: &[u8], width: usize, height: usize, color: ColorType) -> Result<Vec<u8>> {
    let mut buf = Cursor::new(Vec::new());
    image::write_buffer_with_format(&mut buf, data, width as u32, height as u32, color, ImageFormat::Png)
        .map_err(|e| Error::format(format!("PNG encoding failed: {e}")))?;
    Ok(buf.into_inner())
}

fn decode_png<T: Scalar>(bytes: &[u8]) -> Result<RasterImage<T>> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| Error::format(format!("PNG decoding failed: {e}")))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img.color() {
        ColorType::Rgb8 => from_rgb8_top_down(w, h, img.as_bytes(), 3),
        ColorType::L8 => from_rgb8_top_down(w, h, img.as_bytes(), 1),
        other => Err(Error::format(format!(
            "PNG color type {other:?} unsupported (8-bit RGB or grayscale only)"
        ))),
    }
}

/// Splits the whitespace-separated PPM header tokens, honoring `#` comments.
/// Returns the tokens and the offset of the byte after the single separator
/// that follows the last one.
fn ppm_header(bytes: &[u8]) -> Result<([String; 4], usize)> {
    let mut tokens: Vec<String> = Vec::with_capacity(4);
    let mut i = 0;
    while tokens.len() < 4 {
        match bytes.get(i) {
            None => {
                return Err(Error::format(format!(
                    "PPM header truncated after {} of 4 fields",
                    tokens.len()
                )))
            }
            Some(b'#') => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            Some(c) if c.is_ascii_whitespace() => i += 1,
            Some(_) => {
                let start = i;
                while i < bytes.len() && !bytes[i].is_ascii_whitespace() && bytes[i] != b'#' {
                    i += 1;
                }
                tokens.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
            }
        }
    }
    match bytes.get(i) {
        Some(c) if c.is_ascii_whitespace() => i += 1,
        _ => return Err(Error::format("PPM header not terminated by whitespace after maxval")),
    }
    let [magic, w, h, max]: [String; 4] = tokens.try_into().expect("four tokens");
    Ok(([magic, w, h, max], i))
}

fn decode_ppm<T: Scalar>(bytes: &[u8]) -> Result<RasterImage<T>> {
    let ([magic, w, h, max], offset) = ppm_header(bytes)?;
    if magic != "P6" {
        return Err(Error::format(format!("PPM magic {magic:?} unsupported (binary P6 only)")));
    }
    let parse = |field: &str, v: &str| -> Result<usize> {
        v.parse::<usize>()
            .map_err(|_| Error::format(format!("PPM {field} {v:?} is not a non-negative integer")))
    };
    let (width, height, maxval) = (parse("width", &w)?, parse("height", &h)?, parse("maxval", &max)?);
    if maxval != 255 {
        return Err(Error::format(format!("PPM maxval {maxval} unsupported (8-bit, maxval 255 only)")));
    }
    if width == 0 || height == 0 {
        return Err(Error::format(format!("PPM dimensions {width}x{height} are empty")));
    }
    let expected = width * height * 3;
    let payload = &bytes[offset..];
    if payload.len() < expected {
        return Err(Error::format(format!(
            "PPM payload truncated: expected {expected} bytes, found {}",
            payload.len()
        )));
    }
    from_rgb8_top_down(width, height, &payload[..expected], 3)
}
