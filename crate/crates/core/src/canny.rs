//! Canny edge detection: 5x5 integer Gaussian smoothing, Sobel gradients,
//! non-maximum suppression along quantized gradient directions and
//! double-threshold hysteresis with 8-connectivity.
//!
//! Both convolutions replicate border pixels. Gradient directions follow the
//! usual math orientation (x to the right, y up): `gy` is the top row minus
//! the bottom row, so a direction of 45 degrees points up and to the right.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgio::GrayImage;

/// Integer approximation of a sigma = 1.4 Gaussian; entries sum to
/// [`GAUSSIAN_DIVISOR`].
pub const GAUSSIAN_KERNEL: [[u32; 5]; 5] = [
    [2, 4, 5, 4, 2],
    [4, 9, 12, 9, 4],
    [5, 12, 15, 12, 5],
    [4, 9, 12, 9, 4],
    [2, 4, 5, 4, 2],
];
pub const GAUSSIAN_DIVISOR: u32 = 159;

pub const SOBEL_X: [[i32; 3]; 3] = [[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]];
pub const SOBEL_Y: [[i32; 3]; 3] = [[1, 2, 1], [0, 0, 0], [-1, -2, -1]];

#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Thresholds {
    /// `high = high_ratio * max(magnitude after NMS)`, `low = low_ratio * high`.
    Relative {
        high_ratio: f64,
        low_ratio: f64,
    },
    Absolute {
        low: f64,
        high: f64,
    },
}

#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct CannyConfig {
    pub thresholds: Thresholds,
}

impl Default for CannyConfig {
    fn default() -> Self {
        CannyConfig {
            thresholds: Thresholds::Relative {
                high_ratio: 0.2,
                low_ratio: 0.5,
            },
        }
    }
}

impl CannyConfig {
    pub fn absolute(low: f64, high: f64) -> Result<Self> {
        check_thresholds(low, high)?;
        Ok(CannyConfig {
            thresholds: Thresholds::Absolute { low, high },
        })
    }

    pub fn validate(&self) -> Result<()> {
        match self.thresholds {
            Thresholds::Absolute { low, high } => check_thresholds(low, high),
            Thresholds::Relative {
                high_ratio,
                low_ratio,
            } => {
                if high_ratio > 0.0 && high_ratio <= 1.0 && low_ratio > 0.0 && low_ratio < 1.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument(format!(
                        "relative thresholds need 0 < high_ratio <= 1 and 0 < low_ratio < 1, \
                         got {high_ratio} and {low_ratio}"
                    )))
                }
            }
        }
    }

    /// Absolute `(low, high)` for a suppressed field, or `None` when the
    /// relative rule has nothing to anchor to (all magnitudes zero).
    pub fn resolve(&self, field: &GradientField) -> Result<Option<(f64, f64)>> {
        self.validate()?;
        match self.thresholds {
            Thresholds::Absolute { low, high } => Ok(Some((low, high))),
            Thresholds::Relative {
                high_ratio,
                low_ratio,
            } => {
                let max = field.magnitude.iter().copied().fold(0.0, f64::max);
                if max <= 0.0 {
                    return Ok(None);
                }
                let high = high_ratio * max;
                Ok(Some((low_ratio * high, high)))
            }
        }
    }
}

fn check_thresholds(low: f64, high: f64) -> Result<()> {
    if low.is_finite() && high.is_finite() && low > 0.0 && low < high {
        Ok(())
    } else {
        Err(Error::InvalidThresholds { low, high })
    }
}

#[derive(Clone, PartialEq, Debug)]
pub struct GradientField {
    pub width: usize,
    pub height: usize,
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
    pub magnitude: Vec<f64>,
    /// Degrees in `[0, 180)`.
    pub direction: Vec<f64>,
}

impl GradientField {
    /// Builds a field from components, deriving magnitude and direction.
    pub fn from_components(
        width: usize,
        height: usize,
        gx: Vec<f64>,
        gy: Vec<f64>,
    ) -> Result<Self> {
        if gx.len() != width * height || gy.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                got: gx.len().min(gy.len()),
            });
        }
        let magnitude = gx.iter().zip(&gy).map(|(x, y)| x.hypot(*y)).collect();
        let direction = gx
            .iter()
            .zip(&gy)
            .map(|(x, y)| direction_degrees(*x, *y))
            .collect();
        Ok(GradientField {
            width,
            height,
            gx,
            gy,
            magnitude,
            direction,
        })
    }

    #[inline]
    fn mag_clamped(&self, x: isize, y: isize) -> f64 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.magnitude[y * self.width + x]
    }
}

/// `atan2(gy, gx)` in degrees folded into `[0, 180)`.
pub fn direction_degrees(gx: f64, gy: f64) -> f64 {
    let mut deg = gy.atan2(gx).to_degrees();
    if deg < 0.0 {
        deg += 180.0;
    }
    if deg >= 180.0 {
        deg -= 180.0;
    }
    deg
}

/// Quantizes a direction into the 0/45/90/135 bins.
pub fn direction_bin(deg: f64) -> u16 {
    if !(22.5..157.5).contains(&deg) {
        0
    } else if deg < 67.5 {
        45
    } else if deg < 112.5 {
        90
    } else {
        135
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct EdgeMap {
    pub width: usize,
    pub height: usize,
    pub edges: Vec<bool>,
}

impl EdgeMap {
    pub fn empty(width: usize, height: usize) -> Self {
        EdgeMap {
            width,
            height,
            edges: vec![false; width * height],
        }
    }

    #[inline]
    pub fn is_edge(&self, x: usize, y: usize) -> bool {
        self.edges[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.edges.iter().filter(|&&e| e).count()
    }

    /// Edge pixels as 255, everything else 0.
    pub fn to_image(&self) -> GrayImage {
        let px = self
            .edges
            .iter()
            .map(|&e| if e { 255 } else { 0 })
            .collect();
        GrayImage::new(self.width, self.height, px).expect("edge map has valid dimensions")
    }
}

pub fn gaussian_smooth(img: &GrayImage) -> Result<GrayImage> {
    check_min_size(img, 5)?;
    let (w, h) = (img.width(), img.height());
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut acc = 0u32;
            for (ky, row) in GAUSSIAN_KERNEL.iter().enumerate() {
                for (kx, &k) in row.iter().enumerate() {
                    acc += k * img.get_clamped(x + kx as isize - 2, y + ky as isize - 2) as u32;
                }
            }
            let v = (acc + GAUSSIAN_DIVISOR / 2) / GAUSSIAN_DIVISOR;
            out.push(v.min(255) as u8);
        }
    }
    GrayImage::new(w, h, out)
}

pub fn sobel_gradients(img: &GrayImage) -> Result<GradientField> {
    check_min_size(img, 3)?;
    let (w, h) = (img.width(), img.height());
    let mut gx = Vec::with_capacity(w * h);
    let mut gy = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let (mut sx, mut sy) = (0i32, 0i32);
            for ky in 0..3 {
                for kx in 0..3 {
                    let p = img.get_clamped(x + kx as isize - 1, y + ky as isize - 1) as i32;
                    sx += SOBEL_X[ky][kx] * p;
                    sy += SOBEL_Y[ky][kx] * p;
                }
            }
            gx.push(sx as f64);
            gy.push(sy as f64);
        }
    }
    GradientField::from_components(w, h, gx, gy)
}

/// Keeps a magnitude only where it is >= both neighbors along its
/// quantized gradient direction. Out-of-image neighbors are replicated.
pub fn non_max_suppress(field: &GradientField) -> GradientField {
    let mut out = field.clone();
    for y in 0..field.height {
        for x in 0..field.width {
            let i = y * field.width + x;
            let m = field.magnitude[i];
            if m == 0.0 {
                continue;
            }
            let (dx, dy): (isize, isize) = match direction_bin(field.direction[i]) {
                0 => (1, 0),
                // up-right in math orientation is (col + 1, row - 1)
                45 => (1, -1),
                90 => (0, 1),
                _ => (1, 1),
            };
            let (xi, yi) = (x as isize, y as isize);
            let a = field.mag_clamped(xi + dx, yi + dy);
            let b = field.mag_clamped(xi - dx, yi - dy);
            if m < a || m < b {
                out.magnitude[i] = 0.0;
            }
        }
    }
    out
}

/// Double-threshold edge tracking with absolute thresholds.
pub fn hysteresis(field: &GradientField, low: f64, high: f64) -> Result<EdgeMap> {
    check_thresholds(low, high)?;
    let (w, h) = (field.width, field.height);
    let mut map = EdgeMap::empty(w, h);
    let mut stack = Vec::new();
    for (i, &m) in field.magnitude.iter().enumerate() {
        if m >= high && !map.edges[i] {
            map.edges[i] = true;
            stack.push(i);
            while let Some(j) = stack.pop() {
                let (cx, cy) = ((j % w) as isize, (j / w) as isize);
                for dy in -1..=1isize {
                    for dx in -1..=1isize {
                        let (nx, ny) = (cx + dx, cy + dy);
                        if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                            continue;
                        }
                        let k = ny as usize * w + nx as usize;
                        if !map.edges[k] && field.magnitude[k] >= low {
                            map.edges[k] = true;
                            stack.push(k);
                        }
                    }
                }
            }
        }
    }
    Ok(map)
}

pub fn canny(img: &GrayImage, cfg: &CannyConfig) -> Result<EdgeMap> {
    check_min_size(img, 5)?;
    cfg.validate()?;
    let smoothed = gaussian_smooth(img)?;
    let field = non_max_suppress(&sobel_gradients(&smoothed)?);
    match cfg.resolve(&field)? {
        Some((low, high)) => hysteresis(&field, low, high),
        None => Ok(EdgeMap::empty(img.width(), img.height())),
    }
}

fn check_min_size(img: &GrayImage, min: usize) -> Result<()> {
    if img.width() < min || img.height() < min {
        Err(Error::ImageTooSmall {
            width: img.width(),
            height: img.height(),
            min,
        })
    } else {
        Ok(())
    }
}
