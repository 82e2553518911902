//! Facial region localization on the edge map and patch extraction from
//! the equalized grayscale face.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::canny::EdgeMap;
use crate::error::{Error, Result};
use crate::imgio::{GrayImage, Rect, FACE_SIZE};

/// The five regions, in the order their features are concatenated.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionName {
    LeftEyebrow,
    RightEyebrow,
    LeftEye,
    RightEye,
    Mouth,
}

impl RegionName {
    pub const ALL: [RegionName; 5] = [
        RegionName::LeftEyebrow,
        RegionName::RightEyebrow,
        RegionName::LeftEye,
        RegionName::RightEye,
        RegionName::Mouth,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RegionName::LeftEyebrow => "left_eyebrow",
            RegionName::RightEyebrow => "right_eyebrow",
            RegionName::LeftEye => "left_eye",
            RegionName::RightEye => "right_eye",
            RegionName::Mouth => "mouth",
        }
    }
}

impl fmt::Display for RegionName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RegionName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RegionName::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown region {s:?}")))
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct PatchSize {
    pub w: usize,
    pub h: usize,
}

impl PatchSize {
    pub const fn new(w: usize, h: usize) -> Self {
        PatchSize { w, h }
    }

    pub fn len(&self) -> usize {
        self.w * self.h
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Where to look for a region and how large its patch is.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct RegionSpec {
    /// Search window in face coordinates.
    pub window: Rect,
    /// Size of the rect cut out around the located center.
    pub extent: PatchSize,
    /// Size the cut-out is resampled to.
    pub target: PatchSize,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct RegionLayout {
    pub face_width: usize,
    pub face_height: usize,
    /// Indexed by [`RegionName::index`].
    pub regions: [RegionSpec; 5],
}

const BROW: PatchSize = PatchSize::new(24, 12);
const EYE: PatchSize = PatchSize::new(24, 12);
const MOUTH: PatchSize = PatchSize::new(32, 16);

/// Inclusive row/column ranges to a rect.
const fn window(rows: (usize, usize), cols: (usize, usize)) -> Rect {
    Rect::new(cols.0, rows.0, cols.1 - cols.0 + 1, rows.1 - rows.0 + 1)
}

impl Default for RegionLayout {
    /// Anatomical thirds of a centered frontal 85x85 face.
    fn default() -> Self {
        let spec = |window, size| RegionSpec {
            window,
            extent: size,
            target: size,
        };
        RegionLayout {
            face_width: FACE_SIZE,
            face_height: FACE_SIZE,
            regions: [
                spec(window((12, 34), (6, 42)), BROW),
                spec(window((12, 34), (43, 79)), BROW),
                spec(window((28, 52), (6, 42)), EYE),
                spec(window((28, 52), (43, 79)), EYE),
                spec(window((54, 82), (20, 65)), MOUTH),
            ],
        }
    }
}

impl RegionLayout {
    pub fn spec(&self, name: RegionName) -> &RegionSpec {
        &self.regions[name.index()]
    }

    pub fn patch_lengths(&self) -> [usize; 5] {
        self.regions.map(|r| r.target.len())
    }

    pub fn validate(&self) -> Result<()> {
        for (name, r) in RegionName::ALL.iter().zip(&self.regions) {
            r.window.check_in(self.face_width, self.face_height)?;
            if r.extent.is_empty() || r.target.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "region {name} has an empty extent or target"
                )));
            }
            if r.extent.w > self.face_width || r.extent.h > self.face_height {
                return Err(Error::InvalidArgument(format!(
                    "region {name} extent is larger than the face"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, PartialEq, Debug)]
pub struct RegionPatch {
    pub name: RegionName,
    pub values: Vec<f64>,
}

#[derive(Clone, PartialEq, Debug)]
pub struct RegionSet {
    pub rects: [Rect; 5],
    pub patches: Vec<RegionPatch>,
}

impl RegionSet {
    pub fn patch(&self, name: RegionName) -> &RegionPatch {
        &self.patches[name.index()]
    }
}

/// Top-left coordinate for a span of `len` centered on `center`, clamped so
/// the span stays inside `[0, limit)`.
fn place(center: f64, len: usize, limit: usize) -> usize {
    let start = (center - (len as f64 - 1.0) / 2.0 + 0.5).floor();
    start.clamp(0.0, (limit - len) as f64) as usize
}

/// Centers each region's extent on the centroid of the edge pixels inside
/// its window, falling back to the window center when the window has none.
pub fn locate_regions(edges: &EdgeMap, layout: &RegionLayout) -> Result<[Rect; 5]> {
    layout.validate()?;
    if edges.width != layout.face_width || edges.height != layout.face_height {
        return Err(Error::InvalidArgument(format!(
            "edge map is {}x{}, layout expects {}x{}",
            edges.width, edges.height, layout.face_width, layout.face_height
        )));
    }
    let mut out = [Rect::new(0, 0, 1, 1); 5];
    for (slot, spec) in out.iter_mut().zip(&layout.regions) {
        let win = spec.window;
        let (mut sx, mut sy, mut n) = (0usize, 0usize, 0usize);
        for y in win.y..win.y + win.h {
            for x in win.x..win.x + win.w {
                if edges.is_edge(x, y) {
                    sx += x;
                    sy += y;
                    n += 1;
                }
            }
        }
        let (cx, cy) = if n == 0 {
            win.center()
        } else {
            (sx as f64 / n as f64, sy as f64 / n as f64)
        };
        *slot = Rect::new(
            place(cx, spec.extent.w, edges.width),
            place(cy, spec.extent.h, edges.height),
            spec.extent.w,
            spec.extent.h,
        );
    }
    Ok(out)
}

/// Bilinear resample of `rect` to `target`, flattened row-major. Output
/// sample `i` maps to source offset `i * (src - 1) / (dst - 1)`, so corners
/// align and equal sizes reproduce the source exactly.
pub fn extract_patch(
    img: &GrayImage,
    rect: Rect,
    target: PatchSize,
    name: RegionName,
) -> Result<RegionPatch> {
    rect.check_in(img.width(), img.height())?;
    if target.is_empty() {
        return Err(Error::InvalidArgument("patch target size is zero".into()));
    }
    let coord = |i: usize, dst: usize, src: usize| -> f64 {
        if dst == 1 {
            (src as f64 - 1.0) / 2.0
        } else {
            i as f64 * (src as f64 - 1.0) / (dst as f64 - 1.0)
        }
    };
    let mut values = Vec::with_capacity(target.len());
    for ty in 0..target.h {
        let sy = coord(ty, target.h, rect.h);
        let y0 = sy.floor() as usize;
        let y1 = (y0 + 1).min(rect.h - 1);
        let fy = sy - y0 as f64;
        for tx in 0..target.w {
            let sx = coord(tx, target.w, rect.w);
            let x0 = sx.floor() as usize;
            let x1 = (x0 + 1).min(rect.w - 1);
            let fx = sx - x0 as f64;
            let p = |x: usize, y: usize| img.get(rect.x + x, rect.y + y) as f64;
            let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
            let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
            values.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    Ok(RegionPatch { name, values })
}

pub fn extract_all(img: &GrayImage, edges: &EdgeMap, layout: &RegionLayout) -> Result<RegionSet> {
    if img.width() != edges.width || img.height() != edges.height {
        return Err(Error::InvalidArgument(format!(
            "image is {}x{} but edge map is {}x{}",
            img.width(),
            img.height(),
            edges.width,
            edges.height
        )));
    }
    let rects = locate_regions(edges, layout)?;
    let patches = RegionName::ALL
        .iter()
        .zip(&rects)
        .map(|(&name, &rect)| extract_patch(img, rect, layout.spec(name).target, name))
        .collect::<Result<Vec<_>>>()?;
    Ok(RegionSet { rects, patches })
}
