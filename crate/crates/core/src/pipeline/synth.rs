//! Synthetic 85x85 face crops with class-dependent eyebrows, eyes and mouth.
//!
//! Every face has the same faint oval outline. Each class has a nominal geometry (brow height and tilt, eye opening,
//! mouth width, curvature, opening and asymmetry). Every sample jitters the
//! whole face and each parameter, then adds a linear illumination ramp and Gaussian pixel noise.

use std::path::{Path, PathBuf};

use super::{Manifest, ManifestRecord};
use crate::error::{Error, Result};
use crate::imgio::{save_pgm, GrayImage, FACE_SIZE};
use crate::label::Expression;
use crate::rng::{mix_seed, SeededRng};

struct Geometry {
    brow_y: f64,
    /// Inner brow end relative to the outer end; positive is lower.
    brow_tilt: f64,
    eye_ry: f64,
    mouth_half_width: f64,
    /// Corner offset relative to the center; negative lifts the corners.
    mouth_curve: f64,
    mouth_open: f64,
    mouth_asym: f64,
}

fn nominal(label: Expression) -> Geometry {
    let g = |brow_y, brow_tilt, eye_ry, mouth_half_width, mouth_curve, mouth_open, mouth_asym| {
        Geometry {
            brow_y,
            brow_tilt,
            eye_ry,
            mouth_half_width,
            mouth_curve,
            mouth_open,
            mouth_asym,
        }
    };
    match label {
        Expression::Anger => g(24.0, 6.0, 2.0, 9.0, 1.5, 0.0, 0.0),
        Expression::Fear => g(18.0, -4.0, 5.0, 13.0, 1.0, 2.5, 0.0),
        Expression::Surprise => g(16.0, 0.0, 5.5, 7.0, 0.0, 7.0, 0.0),
        Expression::Sadness => g(21.0, -6.0, 3.0, 11.0, 5.0, 0.0, 0.0),
        Expression::Happiness => g(22.0, 0.0, 2.0, 15.0, -6.0, 2.0, 0.0),
        Expression::Disgust => g(25.0, 3.0, 2.5, 11.0, 0.0, 0.0, -7.0),
        Expression::Neutral => g(21.0, 0.0, 3.5, 11.0, 0.0, 0.0, 0.0),
    }
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    ((p.0 - a.0 - t * dx).powi(2) + (p.1 - a.1 - t * dy).powi(2)).sqrt()
}

/// A synthetic face plus the planted centers of its five regions (left
/// eyebrow, right eyebrow, left eye, right eye, mouth), as `(x, y)`.
pub struct SynthFace {
    pub image: GrayImage,
    pub centers: [(f64, f64); 5],
}

pub fn synth_face(label: Expression, seed: u64) -> SynthFace {
    let mut rng = SeededRng::new(seed);
    let nom = nominal(label);
    let mut jitter = |v: f64, amount: f64| v + rng.uniform(-amount, amount);
    let g = Geometry {
        brow_y: jitter(nom.brow_y, 0.6),
        brow_tilt: jitter(nom.brow_tilt, 0.6),
        eye_ry: jitter(nom.eye_ry, 0.3).max(1.0),
        mouth_half_width: jitter(nom.mouth_half_width, 0.6),
        mouth_curve: jitter(nom.mouth_curve, 0.5),
        mouth_open: (jitter(nom.mouth_open, 0.3)).max(0.0),
        mouth_asym: jitter(nom.mouth_asym, 0.5),
    };
    let ox = jitter(0.0, 2.0);
    let oy = jitter(0.0, 2.0);
    let face_gray = jitter(165.0, 15.0);
    let feature_gray = jitter(45.0, 10.0);
    let light = (jitter(0.5, 0.2), jitter(0.3, 0.2));

    let cx = 42.0 + ox;
    let brows = [
        (
            (12.0 + ox, g.brow_y + oy),
            (36.0 + ox, g.brow_y + g.brow_tilt + oy),
        ),
        (
            (73.0 + ox, g.brow_y + oy),
            (49.0 + ox, g.brow_y + g.brow_tilt + oy),
        ),
    ];
    let eyes = [(24.0 + ox, 40.0 + oy), (61.0 + ox, 40.0 + oy)];
    let mouth_c = (cx, 68.0 + oy);
    let lip = |x: f64| -> f64 {
        let u = (x - mouth_c.0) / g.mouth_half_width;
        mouth_c.1 + g.mouth_curve * u * u + g.mouth_asym * u * 0.5
    };

    let mut mouth_sum = (0.0, 0.0, 0usize);
    let mut px = Vec::with_capacity(FACE_SIZE * FACE_SIZE);
    for y in 0..FACE_SIZE {
        for x in 0..FACE_SIZE {
            let p = (x as f64, y as f64);
            let mut v = face_gray + light.0 * (p.0 - 42.0) + light.1 * (p.1 - 42.0);
            // Faint oval outline; its step stays under the edge thresholds so
            // it never competes with the features for region placement.
            if ((p.0 - cx) / 40.0).powi(2) + ((p.1 - 45.0 - oy) / 46.0).powi(2) > 1.0 {
                v -= 4.0;
            }

            if brows.iter().any(|&(a, b)| segment_distance(p, a, b) <= 1.8) {
                v = feature_gray;
            }
            for &(ex, ey) in &eyes {
                let r = ((p.0 - ex) / 6.5).powi(2) + ((p.1 - ey) / g.eye_ry).powi(2);
                if r <= 1.0 {
                    v = if r <= 0.2 { 20.0 } else { 235.0 };
                } else if r <= 1.6 {
                    v = feature_gray;
                }
            }
            let du = (p.0 - mouth_c.0).abs();
            if du <= g.mouth_half_width {
                let centre = lip(p.0);
                let taper = 1.0 - (du / g.mouth_half_width).powi(2);
                let half_open = g.mouth_open * taper.max(0.0);
                let d = (p.1 - centre).abs();
                let in_mouth = if half_open > 0.0 {
                    d <= half_open + 1.2
                } else {
                    d <= 1.2
                };
                if in_mouth {
                    v = if d < half_open { 15.0 } else { feature_gray };
                    mouth_sum.0 += p.0;
                    mouth_sum.1 += p.1;
                    mouth_sum.2 += 1;
                }
            }
            let noisy = v + 1.5 * rng.normal();
            px.push(noisy.round().clamp(0.0, 255.0) as u8);
        }
    }
    let mid = |(a, b): ((f64, f64), (f64, f64))| ((a.0 + b.0) / 2.0, (a.1 + b.1) / 2.0);
    let n = mouth_sum.2.max(1) as f64;
    SynthFace {
        image: GrayImage::new(FACE_SIZE, FACE_SIZE, px).expect("fixed face size"),
        centers: [
            mid(brows[0]),
            mid(brows[1]),
            eyes[0],
            eyes[1],
            (mouth_sum.0 / n, mouth_sum.1 / n),
        ],
    }
}

/// Writes `per_class` faces of every class as `<label>_<nnn>.pgm` plus
/// `manifest.csv` into `out_dir`. Files written before a failure are
/// removed.
pub fn synth_dataset(seed: u64, per_class: usize, out_dir: &Path) -> Result<Manifest> {
    if per_class < 2 {
        return Err(Error::InvalidArgument(format!(
            "per-class count must be at least 2, got {per_class}"
        )));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::from(e).at_path(out_dir))?;
    let mut written: Vec<PathBuf> = Vec::new();
    let result = (|| -> Result<Manifest> {
        let mut records = Vec::new();
        for label in Expression::ALL {
            for i in 0..per_class {
                let sample_seed =
                    mix_seed(seed ^ mix_seed(((label.index() as u64) << 32) | i as u64));
                let face = synth_face(label, sample_seed);
                let name = format!("{}_{:03}.pgm", label.as_str(), i);
                let path = out_dir.join(&name);
                crate::write_atomic(&path, &save_pgm(&face.image))?;
                written.push(path);
                records.push(ManifestRecord {
                    path: PathBuf::from(name),
                    label,
                    split: None,
                });
            }
        }
        let manifest = Manifest::new(out_dir, records)?;
        let path = out_dir.join("manifest.csv");
        crate::write_atomic(&path, &manifest.to_csv()?)?;
        written.push(path);
        Ok(manifest)
    })();
    if result.is_err() {
        for p in &written {
            let _ = std::fs::remove_file(p);
        }
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{preprocess, PipelineConfig};
    use crate::regions::{locate_regions, RegionName};

    #[test]
    fn deterministic_faces() {
        let a = synth_face(Expression::Fear, 99);
        let b = synth_face(Expression::Fear, 99);
        assert_eq!(a.image, b.image);
        assert_ne!(a.image, synth_face(Expression::Fear, 100).image);
    }

    #[test]
    fn mouth_located_near_planted_center() {
        let cfg = PipelineConfig::default();
        for label in Expression::ALL {
            for seed in 0..5 {
                let face = synth_face(label, seed);
                let (_, edges) = preprocess(&face.image, &cfg).unwrap();
                let rects = locate_regions(&edges, &cfg.layout).unwrap();
                let (mx, my) = rects[RegionName::Mouth.index()].center();
                let (px, py) = face.centers[RegionName::Mouth.index()];
                assert!(
                    (mx - px).abs() <= 3.0 && (my - py).abs() <= 3.0,
                    "{label} seed {seed}: located ({mx},{my}) planted ({px},{py})"
                );
            }
        }
    }

    #[test]
    fn rejects_tiny_corpus() {
        let dir = tempfile::tempdir().unwrap();
        assert!(synth_dataset(1, 1, dir.path()).is_err());
    }
}
