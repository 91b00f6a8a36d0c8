//! Procedural stand-in for a real benchmark and its synthetic twin, small
//! enough to train on a laptop CPU.
//!
//! Real images are windowed sinusoidal gratings. A class is a set of modes,
//! each with its own orientation, spatial frequency and color scheme, drawn
//! with geometrically decaying weights. Every image also draws its own
//! orientation jitter, phase, window position, window radius, contrast and
//! pixel noise. The twin mimics the low diversity
//! of generated data: every twin class consists of light perturbations of
//! only `medoids` representative training images. Medoids are found in a
//! descriptor space (color statistics and a gradient-orientation histogram)
//! that ignores phase and window position, so they are prototypical
//! images rather than the flattest ones. Each real image's twin is a
//! perturbed copy of its nearest medoid.

use std::f32::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::augment::reflect_crop;
use super::dataset::{LabeledDataset, Provenance, Sample};
use super::image::Image;
use crate::error::Result;
use crate::seed::{rng_for, rng_for_index, Purpose};

/// Source tag carried by surrogate twin samples.
pub const SURROGATE_TAG: &str = "medoid";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurrogateConfig {
    pub classes: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub size: usize,
    pub modes_per_class: usize,
    /// Mode `k` of a class is drawn with weight `mode_decay^k`; 1 is uniform.
    pub mode_decay: f32,
    /// Lower bound of the grating contrast; the upper bound is 1.
    pub min_contrast: f32,
    /// Representative images per twin class.
    pub medoids: usize,
    pub pixel_noise: f32,
    pub seed: u64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            classes: 10,
            train_per_class: 160,
            test_per_class: 40,
            size: 32,
            modes_per_class: 6,
            mode_decay: 0.6,
            min_contrast: 0.7,
            medoids: 10,
            pixel_noise: 0.05,
            seed: 2024,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SurrogateData {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    /// Synthetic twin of `train`, with the same per-class counts.
    pub twin: LabeledDataset,
}

struct Mode {
    orientation: f32,
    frequency: f32,
    fg: [f32; 3],
    bg: [f32; 3],
}

struct ClassStyle {
    modes: Vec<Mode>,
}

const FREQUENCIES: [f32; 3] = [2.5, 4.0, 5.5];

fn class_styles(cfg: &SurrogateConfig) -> Vec<ClassStyle> {
    let mut rng = rng_for_index(cfg.seed, Purpose::Surrogate, 0);
    (0..cfg.classes)
        .map(|_| ClassStyle {
            modes: (0..cfg.modes_per_class.max(1))
                .map(|_| Mode {
                    orientation: rng.random_range(0.0..PI),
                    frequency: FREQUENCIES[rng.random_range(0..FREQUENCIES.len())],
                    fg: [rng.random(), rng.random(), rng.random()],
                    bg: [rng.random(), rng.random(), rng.random()],
                })
                .collect(),
        })
        .collect()
}

fn pick_mode<R: Rng>(modes: usize, decay: f32, rng: &mut R) -> usize {
    let weights: Vec<f32> = (0..modes).map(|k| decay.powi(k as i32)).collect();
    let mut u = rng.random::<f32>() * weights.iter().sum::<f32>();
    for (k, w) in weights.iter().enumerate() {
        if u < *w {
            return k;
        }
        u -= w;
    }
    modes - 1
}

fn render<R: Rng>(style: &ClassStyle, cfg: &SurrogateConfig, rng: &mut R) -> Image {
    let n = cfg.size;
    let noise = Normal::new(0.0f32, cfg.pixel_noise.max(1e-6)).expect("valid sigma");
    let mode = &style.modes[pick_mode(style.modes.len(), cfg.mode_decay, rng)];
    let (fg, bg) = (mode.fg, mode.bg);
    let theta = mode.orientation + rng.random_range(-0.14f32..0.14);
    let phase = rng.random_range(0.0..2.0 * PI);
    let cy = rng.random_range(0.3f32..0.7) * n as f32;
    let cx = rng.random_range(0.3f32..0.7) * n as f32;
    let radius = rng.random_range(0.25f32..0.45) * n as f32;
    let contrast = rng.random_range(cfg.min_contrast.clamp(0.0, 1.0)..=1.0);
    let shade = rng.random_range(0.7f32..1.1);
    let (s, c) = theta.sin_cos();
    let k = 2.0 * PI * mode.frequency / n as f32;
    let mut img = Image::zeros(n, n, 3);
    for y in 0..n {
        for x in 0..n {
            let (fy, fx) = (y as f32, x as f32);
            let wave = 0.5 + 0.5 * (k * (fx * c + fy * s) + phase).sin();
            let d2 = (fy - cy).powi(2) + (fx - cx).powi(2);
            let window = (-d2 / (2.0 * radius * radius)).exp() * contrast;
            for ch in 0..3 {
                let v = shade * (bg[ch] * (1.0 - window) + window * (wave * fg[ch] + (1.0 - wave) * bg[ch]));
                img.set(y, x, ch, v + noise.sample(rng));
            }
        }
    }
    img.clamp_unit();
    img
}

const ORIENTATION_BINS: usize = 8;

/// Per-channel mean and standard deviation, then a magnitude-weighted
/// histogram of gradient orientations (modulo pi) and the mean gradient
/// magnitude.
pub fn descriptor(image: &Image) -> Vec<f32> {
    let (h, w, channels) = image.dims();
    let mut out = Vec::with_capacity(2 * channels + ORIENTATION_BINS + 1);
    let n = (h * w) as f32;
    for c in 0..channels {
        let mean = (0..h).flat_map(|y| (0..w).map(move |x| (y, x))).map(|(y, x)| image.get(y, x, c)).sum::<f32>() / n;
        let var = (0..h)
            .flat_map(|y| (0..w).map(move |x| (y, x)))
            .map(|(y, x)| (image.get(y, x, c) - mean).powi(2))
            .sum::<f32>()
            / n;
        out.push(mean);
        out.push(var.sqrt());
    }
    let mut hist = [0f32; ORIENTATION_BINS];
    let mut energy = 0f32;
    for y in 1..h.saturating_sub(1) {
        for x in 1..w.saturating_sub(1) {
            let lum = |y: usize, x: usize| (0..channels).map(|c| image.get(y, x, c)).sum::<f32>() / channels as f32;
            let gx = lum(y, x + 1) - lum(y, x - 1);
            let gy = lum(y + 1, x) - lum(y - 1, x);
            let mag = (gx * gx + gy * gy).sqrt();
            let angle = gy.atan2(gx).rem_euclid(PI);
            let bin = ((angle / PI * ORIENTATION_BINS as f32) as usize).min(ORIENTATION_BINS - 1);
            hist[bin] += mag;
            energy += mag;
        }
    }
    let total = energy.max(1e-6);
    out.extend(hist.iter().map(|v| v / total));
    out.push(energy / n);
    out
}

/// Rescales every coordinate to unit variance across `points`.
fn standardize(points: &mut [Vec<f32>]) {
    let Some(dim) = points.first().map(Vec::len) else { return };
    let n = points.len() as f32;
    for d in 0..dim {
        let mean = points.iter().map(|p| p[d]).sum::<f32>() / n;
        let sd = (points.iter().map(|p| (p[d] - mean).powi(2)).sum::<f32>() / n).sqrt();
        for p in points.iter_mut() {
            p[d] = if sd > 1e-8 { (p[d] - mean) / sd } else { 0.0 };
        }
    }
}

/// Indices of `k` medoids of `points` under squared Euclidean distance
/// (alternating assignment / medoid update, deterministic initialization).
pub fn k_medoids(points: &[Vec<f32>], k: usize) -> Vec<usize> {
    let n = points.len();
    let k = k.min(n);
    if k == 0 {
        return Vec::new();
    }
    let mut dist = vec![0f32; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d: f32 = points[i].iter().zip(&points[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    let total = |i: usize| (0..n).map(|j| dist[i * n + j]).sum::<f32>();
    // Start from the most central point, then farthest-point seeding.
    let first = (0..n).min_by(|&a, &b| total(a).total_cmp(&total(b))).unwrap();
    let mut medoids = vec![first];
    while medoids.len() < k {
        let next = (0..n)
            .filter(|i| !medoids.contains(i))
            .max_by(|&a, &b| {
                let da = medoids.iter().map(|&m| dist[a * n + m]).fold(f32::INFINITY, f32::min);
                let db = medoids.iter().map(|&m| dist[b * n + m]).fold(f32::INFINITY, f32::min);
                da.total_cmp(&db)
            })
            .unwrap();
        medoids.push(next);
    }
    for _ in 0..50 {
        let assign: Vec<usize> = (0..n)
            .map(|i| {
                (0..k)
                    .min_by(|&a, &b| dist[i * n + medoids[a]].total_cmp(&dist[i * n + medoids[b]]))
                    .unwrap()
            })
            .collect();
        let updated: Vec<usize> = (0..k)
            .map(|cluster| {
                let members: Vec<usize> = (0..n).filter(|&i| assign[i] == cluster).collect();
                *members
                    .iter()
                    .min_by(|&&a, &&b| {
                        let ca: f32 = members.iter().map(|&j| dist[a * n + j]).sum();
                        let cb: f32 = members.iter().map(|&j| dist[b * n + j]).sum();
                        ca.total_cmp(&cb)
                    })
                    .unwrap_or(&medoids[cluster])
            })
            .collect();
        if updated == medoids {
            break;
        }
        medoids = updated;
    }
    medoids
}

/// Small translation, brightness change and pixel noise.
fn perturb<R: Rng>(image: &Image, rng: &mut R) -> Image {
    let oy = rng.random_range(0..=2);
    let ox = rng.random_range(0..=2);
    let mut out = reflect_crop(image, 1, oy, ox);
    let gain = rng.random_range(0.95f32..1.05);
    let noise = Normal::new(0.0f32, 0.02).expect("valid sigma");
    for v in out.data_mut() {
        *v = *v * gain + noise.sample(rng);
    }
    out.clamp_unit();
    out
}

pub fn generate(cfg: &SurrogateConfig) -> Result<SurrogateData> {
    let styles = class_styles(cfg);
    let mut rng = rng_for_index(cfg.seed, Purpose::Surrogate, 1);
    let mut next_id = 0u64;
    let mut make = |per_class: usize, rng: &mut _| -> Vec<Sample> {
        let mut out = Vec::new();
        for (label, style) in styles.iter().enumerate() {
            for _ in 0..per_class {
                out.push(Sample::new(next_id, render(style, cfg, rng), label, Provenance::Real));
                next_id += 1;
            }
        }
        out
    };
    let train = make(cfg.train_per_class, &mut rng);
    let test = make(cfg.test_per_class, &mut rng);
    let train = LabeledDataset::new("surrogate-train", train, cfg.classes, None)?;
    let test = LabeledDataset::new("surrogate-test", test, cfg.classes, None)?;

    let mut rng = rng_for(cfg.seed ^ 0x7717, Purpose::Surrogate);
    let mut twin = Vec::new();
    let mut twin_id = 1_000_000_000u64;
    for (label, members) in train.indices_by_class().iter().enumerate() {
        let images: Vec<&Image> = members.iter().map(|&i| train.samples()[i].image.as_ref()).collect();
        let mut points: Vec<Vec<f32>> = images.iter().map(|im| descriptor(im)).collect();
        standardize(&mut points);
        let medoids = k_medoids(&points, cfg.medoids);
        let sq = |a: &[f32], b: &[f32]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f32>();
        for point in &points {
            let nearest = medoids
                .iter()
                .copied()
                .min_by(|&a, &b| sq(point, &points[a]).total_cmp(&sq(point, &points[b])))
                .expect("at least one medoid");
            let source = images[nearest];
            let img = Arc::new(perturb(source, &mut rng));
            twin.push(Sample::new(twin_id, img, label, Provenance::synthetic(SURROGATE_TAG)));
            twin_id += 1;
        }
    }
    let twin = LabeledDataset::new("surrogate-twin", twin, cfg.classes, None)?;
    Ok(SurrogateData { train, test, twin })
}
