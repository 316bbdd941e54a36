//! Pixel containers shared by every stage of the pipeline.
//!
//! [`RasterImage`] is 8-bit RGBA, [`BinaryGrid`] carries masks and
//! [`FloatGrid`] carries attention values and fused condition planes. All
//! three are row-major with `(x, y)` addressing and `y` growing downwards.

use std::io::Cursor;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("image dimensions must be positive, got {width}x{height}")]
    EmptyDimensions { width: u32, height: u32 },
    #[error("buffer length {actual} does not match {width}x{height}x{channels}")]
    BufferLength {
        width: u32,
        height: u32,
        channels: usize,
        actual: usize,
    },
    #[error("png codec error: {0}")]
    Codec(String),
}

pub type Rgb = [u8; 3];

/// 8-bit RGBA image.
#[derive(Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl std::fmt::Debug for RasterImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RasterImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl RasterImage {
    /// Panics on zero dimensions; use [`RasterImage::from_rgba`] for
    /// untrusted sizes.
    pub fn filled(width: u32, height: u32, color: [u8; 4]) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let mut data = Vec::with_capacity(width as usize * height as usize * 4);
        for _ in 0..(width as usize * height as usize) {
            data.extend_from_slice(&color);
        }
        RasterImage {
            width,
            height,
            data,
        }
    }

    pub fn from_rgba(width: u32, height: u32, data: Vec<u8>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::EmptyDimensions { width, height });
        }
        let expected = width as usize * height as usize * 4;
        if data.len() != expected {
            return Err(RasterError::BufferLength {
                width,
                height,
                channels: 4,
                actual: data.len(),
            });
        }
        Ok(RasterImage {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * 4
    }

    #[inline]
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 4] {
        let o = self.offset(x, y);
        [
            self.data[o],
            self.data[o + 1],
            self.data[o + 2],
            self.data[o + 3],
        ]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: u32, y: u32, px: [u8; 4]) {
        let o = self.offset(x, y);
        self.data[o..o + 4].copy_from_slice(&px);
    }

    #[inline]
    pub fn alpha(&self, x: u32, y: u32) -> u8 {
        self.data[self.offset(x, y) + 3]
    }

    pub fn set_alpha(&mut self, x: u32, y: u32, a: u8) {
        let o = self.offset(x, y) + 3;
        self.data[o] = a;
    }

    pub fn has_transparency(&self) -> bool {
        self.data.chunks_exact(4).any(|p| p[3] < 255)
    }

    pub fn pixels(&self) -> impl Iterator<Item = &[u8]> {
        self.data.chunks_exact(4)
    }

    /// Rec. 601 luma after compositing over white.
    pub fn luminance(&self) -> FloatGrid {
        let values = self
            .data
            .chunks_exact(4)
            .map(|p| {
                let a = p[3] as f64 / 255.0;
                let over = |c: u8| c as f64 * a + 255.0 * (1.0 - a);
                0.299 * over(p[0]) + 0.587 * over(p[1]) + 0.114 * over(p[2])
            })
            .collect();
        FloatGrid {
            width: self.width,
            height: self.height,
            values,
        }
    }

    /// Rows `[y0, y0 + rows)` as a new image.
    pub fn crop_rows(&self, y0: u32, rows: u32) -> RasterImage {
        assert!(rows > 0 && y0 + rows <= self.height);
        let start = self.offset(0, y0);
        let end = start + rows as usize * self.width as usize * 4;
        RasterImage {
            width: self.width,
            height: rows,
            data: self.data[start..end].to_vec(),
        }
    }

    /// Stacks images of equal width top to bottom.
    pub fn vstack(parts: &[RasterImage]) -> Option<RasterImage> {
        let first = parts.first()?;
        if parts.iter().any(|p| p.width != first.width) {
            return None;
        }
        let height = parts.iter().map(|p| p.height).sum();
        let mut data = Vec::with_capacity(first.width as usize * height as usize * 4);
        for p in parts {
            data.extend_from_slice(&p.data);
        }
        Some(RasterImage {
            width: first.width,
            height,
            data,
        })
    }

    pub fn to_png(&self) -> Result<Vec<u8>, RasterError> {
        let buf = image::RgbaImage::from_raw(self.width, self.height, self.data.clone())
            .expect("buffer length checked at construction");
        let mut out = Cursor::new(Vec::new());
        buf.write_to(&mut out, image::ImageFormat::Png)
            .map_err(|e| RasterError::Codec(e.to_string()))?;
        Ok(out.into_inner())
    }

    pub fn from_png(bytes: &[u8]) -> Result<Self, RasterError> {
        let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
            .map_err(|e| RasterError::Codec(e.to_string()))?
            .to_rgba8();
        let (w, h) = img.dimensions();
        RasterImage::from_rgba(w, h, img.into_raw())
    }

    pub fn to_png_base64(&self) -> Result<String, RasterError> {
        Ok(BASE64.encode(self.to_png()?))
    }

    pub fn from_png_base64(text: &str) -> Result<Self, RasterError> {
        let bytes = BASE64.decode(text.trim()).map_err(|e| RasterError::Codec(e.to_string()))?;
        RasterImage::from_png(&bytes)
    }
}

/// Serialized as a base64 PNG string, the form images take on the wire.
impl Serialize for RasterImage {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let text = self.to_png_base64().map_err(serde::ser::Error::custom)?;
        serializer.serialize_str(&text)
    }
}

impl<'de> Deserialize<'de> for RasterImage {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        RasterImage::from_png_base64(&text).map_err(serde::de::Error::custom)
    }
}

/// Binary raster; `true` marks foreground.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryGrid {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl BinaryGrid {
    pub fn new(width: u32, height: u32) -> Self {
        BinaryGrid {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        BinaryGrid {
            width,
            height,
            bits,
        }
    }

    pub fn from_bits(width: u32, height: u32, bits: Vec<bool>) -> Option<Self> {
        (bits.len() == width as usize * height as usize).then_some(BinaryGrid {
            width,
            height,
            bits,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        let w = self.width as usize;
        self.bits[y as usize * w + x as usize] = v;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn is_subset_of(&self, other: &BinaryGrid) -> bool {
        self.dims() == other.dims()
            && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    pub fn to_float(&self) -> FloatGrid {
        FloatGrid {
            width: self.width,
            height: self.height,
            values: self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        }
    }

    /// Bilinear resample followed by re-binarization at 0.5.
    pub fn resize(&self, width: u32, height: u32) -> BinaryGrid {
        self.to_float().resize_bilinear(width, height).binarize(0.5)
    }

    /// Disc dilation with the given radius in pixels.
    pub fn dilate(&self, radius: u32) -> BinaryGrid {
        if radius == 0 {
            return self.clone();
        }
        let r = radius as i64;
        let offsets: Vec<(i64, i64)> = (-r..=r)
            .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
            .filter(|(dx, dy)| dx * dx + dy * dy <= r * r)
            .collect();
        let (w, h) = (self.width as i64, self.height as i64);
        let mut out = BinaryGrid::new(self.width, self.height);
        for y in 0..h {
            for x in 0..w {
                if !self.get(x as u32, y as u32) {
                    continue;
                }
                for &(dx, dy) in &offsets {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx >= 0 && ny >= 0 && nx < w && ny < h {
                        out.set(nx as u32, ny as u32, true);
                    }
                }
            }
        }
        out
    }

    /// Renders ones as white on black, fully opaque.
    pub fn to_raster(&self) -> RasterImage {
        let mut img = RasterImage::filled(self.width, self.height, [0, 0, 0, 255]);
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    img.set_pixel(x, y, [255, 255, 255, 255]);
                }
            }
        }
        img
    }
}

/// Real-valued raster.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloatGrid {
    width: u32,
    height: u32,
    values: Vec<f64>,
}

impl FloatGrid {
    pub fn zeros(width: u32, height: u32) -> Self {
        FloatGrid {
            width,
            height,
            values: vec![0.0; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> f64) -> Self {
        let mut values = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        FloatGrid {
            width,
            height,
            values,
        }
    }

    pub fn from_values(width: u32, height: u32, values: Vec<f64>) -> Option<Self> {
        (values.len() == width as usize * height as usize).then_some(FloatGrid {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.values[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: f64) {
        let w = self.width as usize;
        self.values[y as usize * w + x as usize] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.values.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn scale(&self, c: f64) -> FloatGrid {
        FloatGrid {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    /// `v >= threshold` becomes foreground.
    pub fn binarize(&self, threshold: f64) -> BinaryGrid {
        BinaryGrid {
            width: self.width,
            height: self.height,
            bits: self.values.iter().map(|&v| v >= threshold).collect(),
        }
    }

    /// Bilinear sample at continuous source coordinates with edge clamping.
    #[inline]
    pub fn sample_clamped(&self, sx: f64, sy: f64) -> f64 {
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;
        let sx = sx.clamp(0.0, max_x);
        let sy = sy.clamp(0.0, max_y);
        let x0 = sx.floor();
        let y0 = sy.floor();
        let fx = sx - x0;
        let fy = sy - y0;
        let x0 = x0 as u32;
        let y0 = y0 as u32;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bottom = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    /// Bilinear sample where everything outside the pixel-centre hull reads as
    /// zero, so content shifted off-canvas contributes nothing.
    #[inline]
    pub fn sample_zero_fill(&self, sx: f64, sy: f64) -> f64 {
        let x0 = sx.floor();
        let y0 = sy.floor();
        let fx = sx - x0;
        let fy = sy - y0;
        let (x0, y0) = (x0 as i64, y0 as i64);
        let read = |x: i64, y: i64| -> f64 {
            if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
                0.0
            } else {
                self.get(x as u32, y as u32)
            }
        };
        let top = read(x0, y0) * (1.0 - fx) + read(x0 + 1, y0) * fx;
        let bottom = read(x0, y0 + 1) * (1.0 - fx) + read(x0 + 1, y0 + 1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    /// Half-pixel-centre bilinear resize (the `align_corners = false`
    /// convention).
    pub fn resize_bilinear(&self, width: u32, height: u32) -> FloatGrid {
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        FloatGrid::from_fn(width, height, |x, y| {
            let u = (x as f64 + 0.5) * sx - 0.5;
            let v = (y as f64 + 0.5) * sy - 0.5;
            self.sample_clamped(u, v)
        })
    }
}
