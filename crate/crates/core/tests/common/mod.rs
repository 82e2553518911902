//! Oracles shared by the integration tests and the acceptance runner.
#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use facexpr::canny::{canny, CannyConfig};
use facexpr::imgio::GrayImage;
use facexpr::mlp::{init_weights, MlpModel};
use facexpr::pca::{FitMethod, PcaModel};
use facexpr::rng::SeededRng;

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_facexpr"))
}

pub fn run(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Output {
    let mut cmd = bin();
    for a in args {
        cmd.arg(a);
    }
    cmd.output().expect("spawn facexpr")
}

pub fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

// ---------------------------------------------------------------- gradients

/// `E = 1/2 sum (y - t)^2`, evaluated from scratch through `predict`.
fn error(model: &MlpModel, x: &[f64], t: &[f64]) -> f64 {
    let y = model.predict(x).unwrap();
    0.5 * y.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
}

/// Weight `idx` of layer `l`, counting the biases after the weights.
fn param(m: &mut MlpModel, l: usize, idx: usize) -> &mut f64 {
    let layer = &mut m.layers[l];
    let nw = layer.weights.len();
    if idx < nw {
        &mut layer.weights[idx]
    } else {
        &mut layer.bias[idx - nw]
    }
}

/// Largest relative disagreement between analytic and central-difference
/// gradients over every weight and bias of a seeded `topology` network.
/// The denominator is floored at `1e-6` so vanishing gradients compare
/// absolutely.
pub fn max_gradient_error(topology: &[usize], seed: u64, eps: f64) -> f64 {
    let mut rng = SeededRng::new(seed ^ 0xF1D1);
    let mut model = init_weights(topology, seed).unwrap();
    let x: Vec<f64> = (0..topology[0]).map(|_| rng.normal()).collect();
    let t: Vec<f64> = (0..*topology.last().unwrap())
        .map(|_| rng.next_f64())
        .collect();
    let (analytic, _) = model.gradients(&x, &t).unwrap();
    let mut worst: f64 = 0.0;
    for l in 0..model.layers.len() {
        let nw = model.layers[l].weights.len();
        let nb = model.layers[l].bias.len();
        for idx in 0..nw + nb {
            let orig = *param(&mut model, l, idx);
            *param(&mut model, l, idx) = orig + eps;
            let plus = error(&model, &x, &t);
            *param(&mut model, l, idx) = orig - eps;
            let minus = error(&model, &x, &t);
            *param(&mut model, l, idx) = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let a = if idx < nw {
                analytic.layers[l].weights[idx]
            } else {
                analytic.layers[l].bias[idx - nw]
            };
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    worst
}

// -------------------------------------------------------------- canny shapes

/// Seeded 64x64 two-level test scenes: a label per pixel (`true` = bright
/// side) plus the rendered image.
pub struct Scene {
    pub name: String,
    pub inside: Vec<bool>,
    pub image: GrayImage,
}

pub const SCENE_SIZE: usize = 64;

pub fn scene(kind: usize, seed: u64) -> Scene {
    let mut rng = SeededRng::new(seed);
    let n = SCENE_SIZE;
    let lo = 20 + rng.below(60) as u8;
    let hi = lo + 80 + rng.below(80) as u8;
    let at = 20 + rng.below(24);
    let (name, f): (String, Box<dyn Fn(usize, usize) -> bool>) = match kind % 4 {
        0 => (
            format!("vertical step at x={at}"),
            Box::new(move |x, _| x >= at),
        ),
        1 => (
            format!("horizontal step at y={at}"),
            Box::new(move |_, y| y >= at),
        ),
        2 => {
            let k = 48 + rng.below(32);
            (
                format!("diagonal step x+y>={k}"),
                Box::new(move |x, y| x + y >= k),
            )
        }
        _ => {
            let side = 16 + rng.below(24);
            let x0 = 4 + rng.below(n - side - 8);
            let y0 = 4 + rng.below(n - side - 8);
            (
                format!("square {side}px at ({x0},{y0})"),
                Box::new(move |x, y| (x0..x0 + side).contains(&x) && (y0..y0 + side).contains(&y)),
            )
        }
    };
    let inside: Vec<bool> = (0..n * n).map(|i| f(i % n, i / n)).collect();
    let image = GrayImage::from_fn(n, n, |x, y| if inside[y * n + x] { hi } else { lo }).unwrap();
    Scene {
        name,
        inside,
        image,
    }
}

/// Pixels with a 4-neighbor on the other side of the step.
pub fn true_boundary(inside: &[bool], n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for y in 0..n {
        for x in 0..n {
            let v = inside[y * n + x];
            let differs = [(0i64, 1i64), (0, -1), (1, 0), (-1, 0)]
                .iter()
                .any(|&(dx, dy)| {
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    nx >= 0
                        && ny >= 0
                        && (nx as usize) < n
                        && (ny as usize) < n
                        && inside[ny as usize * n + nx as usize] != v
                });
            if differs {
                out.push((x, y));
            }
        }
    }
    out
}

fn chebyshev(a: (usize, usize), b: (usize, usize)) -> usize {
    a.0.abs_diff(b.0).max(a.1.abs_diff(b.1))
}

pub struct Geometry {
    /// Share of true boundary pixels with a detected edge within 1 px.
    pub recall: f64,
    /// Largest distance from a detected edge to the true boundary.
    pub worst_distance: usize,
    pub edges: usize,
}

pub fn canny_geometry(s: &Scene) -> Geometry {
    let n = SCENE_SIZE;
    let edges = canny(&s.image, &CannyConfig::default()).unwrap();
    let boundary = true_boundary(&s.inside, n);
    let detected: Vec<(usize, usize)> = (0..n * n)
        .filter(|&i| edges.edges[i])
        .map(|i| (i % n, i / n))
        .collect();
    let near = boundary
        .iter()
        .filter(|&&b| detected.iter().any(|&d| chebyshev(b, d) <= 1))
        .count();
    let worst = detected
        .iter()
        .map(|&d| {
            boundary
                .iter()
                .map(|&b| chebyshev(b, d))
                .min()
                .unwrap_or(usize::MAX)
        })
        .max()
        .unwrap_or(0);
    Geometry {
        recall: near as f64 / boundary.len() as f64,
        worst_distance: worst,
        edges: detected.len(),
    }
}

// ---------------------------------------------------------------------- pca

pub fn random_dataset(rng: &mut SeededRng, m: usize, n: usize) -> Vec<Vec<f64>> {
    // Per-axis scales keep the spectrum spread out.
    let scales: Vec<f64> = (0..n)
        .map(|i| 1.0 + 2.0 * i as f64 + rng.next_f64())
        .collect();
    (0..m)
        .map(|_| scales.iter().map(|s| s * rng.normal() + 3.0).collect())
        .collect()
}

/// Largest disagreement between Gram and covariance projections of the
/// training samples, after aligning each component's sign.
pub fn gram_vs_covariance(samples: &[Vec<f64>], k: usize) -> f64 {
    let g = PcaModel::fit_with(samples, k, FitMethod::Gram).unwrap();
    let c = PcaModel::fit_with(samples, k, FitMethod::Covariance).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..k {
        let d: f64 = g.components[i]
            .iter()
            .zip(&c.components[i])
            .map(|(a, b)| a * b)
            .sum();
        let sign = if d < 0.0 { -1.0 } else { 1.0 };
        for s in samples {
            let pg = g.project(s).unwrap()[i];
            let pc = c.project(s).unwrap()[i];
            worst = worst.max((pg - sign * pc).abs());
        }
    }
    worst
}

/// `1/M` covariance of `samples`, row-major.
pub fn covariance(samples: &[Vec<f64>]) -> Vec<f64> {
    let m = samples.len() as f64;
    let n = samples[0].len();
    let mean: Vec<f64> = (0..n)
        .map(|j| samples.iter().map(|s| s[j]).sum::<f64>() / m)
        .collect();
    let mut c = vec![0.0; n * n];
    for s in samples {
        for i in 0..n {
            for j in 0..n {
                c[i * n + j] += (s[i] - mean[i]) * (s[j] - mean[j]) / m;
            }
        }
    }
    c
}

/// Largest `|C u - lambda u|` over all eigenpairs, relative to `|C|_F`.
pub fn eigen_residual(c: &[f64], n: usize) -> f64 {
    let e = facexpr::pca::sym_eigen(c, n).unwrap();
    let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut worst: f64 = 0.0;
    for (l, u) in e.values.iter().zip(&e.vectors) {
        let r: f64 = (0..n)
            .map(|i| {
                let cu: f64 = (0..n).map(|j| c[i * n + j] * u[j]).sum();
                (cu - l * u[i]).powi(2)
            })
            .sum::<f64>()
            .sqrt();
        worst = worst.max(r / norm.max(f64::MIN_POSITIVE));
    }
    worst
}

/// Mean squared reconstruction error of `samples` under a `k`-component fit.
pub fn reconstruction_error(samples: &[Vec<f64>], k: usize) -> f64 {
    let model = PcaModel::fit(samples, k).unwrap();
    samples
        .iter()
        .map(|s| {
            let r = model.reconstruct(&model.project(s).unwrap()).unwrap();
            s.iter().zip(&r).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
        })
        .sum::<f64>()
        / samples.len() as f64
}
