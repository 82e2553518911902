//! Grayscale rasters, binary PGM I/O, cropping and histogram equalization.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Side length of the square face crop the default pipeline works on.
pub const FACE_SIZE: usize = 85;

/// 8-bit single-channel image, row-major.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> u8,
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    /// Pixel at column `x`, row `y`.
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.pixels[y * self.width + x] = v;
    }

    /// Pixel lookup with coordinates clamped to the image (edge replication).
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> u8 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.get(x, y)
    }

    pub fn bounds(&self) -> Rect {
        Rect::new(0, 0, self.width, self.height)
    }
}

/// Axis-aligned window: `x` is the column offset, `y` the row offset.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub const fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Rect { x, y, w, h }
    }

    pub fn fits_in(&self, width: usize, height: usize) -> bool {
        self.w >= 1 && self.h >= 1 && self.x + self.w <= width && self.y + self.h <= height
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.x + self.w && y >= self.y && y < self.y + self.h
    }

    /// Geometric center in continuous pixel-index coordinates.
    pub fn center(&self) -> (f64, f64) {
        (
            self.x as f64 + (self.w as f64 - 1.0) / 2.0,
            self.y as f64 + (self.h as f64 - 1.0) / 2.0,
        )
    }

    /// `inner` expressed in this rect's coordinates, mapped back to the host.
    pub fn compose(&self, inner: &Rect) -> Rect {
        Rect::new(self.x + inner.x, self.y + inner.y, inner.w, inner.h)
    }

    /// A `w`x`h` rect centered in a `width`x`height` host.
    pub fn centered(width: usize, height: usize, w: usize, h: usize) -> Option<Rect> {
        (w <= width && h <= height).then(|| Rect::new((width - w) / 2, (height - h) / 2, w, h))
    }

    pub(crate) fn check_in(&self, width: usize, height: usize) -> Result<()> {
        if self.fits_in(width, height) {
            Ok(())
        } else {
            Err(Error::RectOutOfBounds {
                rect: self.to_string(),
                width,
                height,
            })
        }
    }
}

impl fmt::Display for Rect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(x={}, y={}, w={}, h={})",
            self.x, self.y, self.w, self.h
        )
    }
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::MalformedHeader(format!("missing {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::MalformedHeader(format!("{what} out of range")))
    }
}

/// Decodes a binary (`P5`) PGM. Pixel values are taken verbatim.
pub fn load_pgm(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.len() < 2 {
        return Err(Error::MalformedHeader("file too short".into()));
    }
    if &bytes[..2] != b"P5" {
        return Err(Error::UnsupportedMagic(
            String::from_utf8_lossy(&bytes[..2]).into_owned(),
        ));
    }
    let mut cur = HeaderCursor { bytes, pos: 2 };
    if cur.pos < bytes.len() && !bytes[cur.pos].is_ascii_whitespace() && bytes[cur.pos] != b'#' {
        return Err(Error::MalformedHeader("no separator after magic".into()));
    }
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::MalformedHeader(format!(
            "zero dimension {width}x{height}"
        )));
    }
    if maxval == 0 {
        return Err(Error::MalformedHeader("maxval is zero".into()));
    }
    if maxval > 255 {
        return Err(Error::MaxvalTooLarge(maxval));
    }
    match bytes.get(cur.pos) {
        Some(c) if c.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(Error::MalformedHeader("no separator after maxval".into())),
    }
    let expected = width * height;
    let data = &bytes[cur.pos..];
    if data.len() < expected {
        return Err(Error::TruncatedData {
            expected,
            found: data.len(),
        });
    }
    GrayImage::new(width, height, data[..expected].to_vec())
}

/// Encodes with the canonical header `P5\n<w> <h>\n255\n`.
pub fn save_pgm(img: &GrayImage) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", img.width, img.height);
    let mut out = Vec::with_capacity(header.len() + img.pixels.len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&img.pixels);
    out
}

pub fn read_pgm_file(path: &std::path::Path) -> Result<GrayImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::from(e).at_path(path))?;
    load_pgm(&bytes).map_err(|e| e.at_path(path))
}

pub fn crop(img: &GrayImage, rect: Rect) -> Result<GrayImage> {
    rect.check_in(img.width, img.height)?;
    let mut pixels = Vec::with_capacity(rect.w * rect.h);
    for y in rect.y..rect.y + rect.h {
        let row = y * img.width;
        pixels.extend_from_slice(&img.pixels[row + rect.x..row + rect.x + rect.w]);
    }
    GrayImage::new(rect.w, rect.h, pixels)
}

/// Default face window: a centered `FACE_SIZE` square, or the whole image
/// when it is already that size.
pub fn default_face_rect(width: usize, height: usize) -> Result<Rect> {
    Rect::centered(width, height, FACE_SIZE, FACE_SIZE).ok_or(Error::ImageTooSmall {
        width,
        height,
        min: FACE_SIZE,
    })
}

/// CDF-based equalization normalized by the smallest nonzero CDF value, so
/// uniform histograms are fixed points. Constant images are returned as-is.
pub fn histogram_equalize(img: &GrayImage) -> GrayImage {
    let mut hist = [0u64; 256];
    for &p in &img.pixels {
        hist[p as usize] += 1;
    }
    let n = img.pixels.len() as u64;
    let mut cdf = [0u64; 256];
    let mut acc = 0;
    for (c, h) in cdf.iter_mut().zip(hist.iter()) {
        acc += h;
        *c = acc;
    }
    let cdf_min = cdf.iter().copied().find(|&c| c > 0).unwrap_or(0);
    if cdf_min == n {
        return img.clone();
    }
    let denom = n - cdf_min;
    let mut lut = [0u8; 256];
    for (v, out) in lut.iter_mut().enumerate() {
        let num = cdf[v].saturating_sub(cdf_min) * 255;
        // round half up in integer arithmetic
        *out = ((2 * num + denom) / (2 * denom)).min(255) as u8;
    }
    GrayImage {
        width: img.width,
        height: img.height,
        pixels: img.pixels.iter().map(|&p| lut[p as usize]).collect(),
    }
}
