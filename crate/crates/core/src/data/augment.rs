use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::image::Image;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AugmentationKind {
    /// Random crop and horizontal flip.
    Partial,
    /// Partial plus color jitter and random grayscale.
    Full,
}

/// Color jitter strengths: brightness, contrast and saturation factors are
/// drawn from `[1 - s, 1 + s]`, the hue shift from `[-h, h]` (in turns).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JitterParams {
    pub brightness: f32,
    pub contrast: f32,
    pub saturation: f32,
    pub hue: f32,
}

impl Default for JitterParams {
    fn default() -> Self {
        Self {
            brightness: 0.4,
            contrast: 0.4,
            saturation: 0.4,
            hue: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentationPolicy {
    pub kind: AugmentationKind,
    pub crop_prob: f64,
    /// Reflection padding added on each side before cropping back to the input size.
    pub crop_padding: usize,
    pub flip_prob: f64,
    pub jitter: JitterParams,
    pub jitter_prob: f64,
    pub grayscale_prob: f64,
}

impl Default for AugmentationPolicy {
    fn default() -> Self {
        Self::full()
    }
}

impl AugmentationPolicy {
    pub fn partial() -> Self {
        Self {
            kind: AugmentationKind::Partial,
            crop_prob: 0.5,
            crop_padding: 4,
            flip_prob: 0.5,
            jitter: JitterParams::default(),
            jitter_prob: 0.8,
            grayscale_prob: 0.2,
        }
    }

    pub fn full() -> Self {
        Self {
            kind: AugmentationKind::Full,
            ..Self::partial()
        }
    }

    pub fn of_kind(kind: AugmentationKind) -> Self {
        match kind {
            AugmentationKind::Partial => Self::partial(),
            AugmentationKind::Full => Self::full(),
        }
    }
}

/// Augments every image independently; output shapes equal input shapes.
pub fn augment<R: Rng + ?Sized>(images: &[&Image], policy: &AugmentationPolicy, rng: &mut R) -> Vec<Image> {
    images.iter().map(|img| augment_one(img, policy, rng)).collect()
}

pub fn augment_one<R: Rng + ?Sized>(image: &Image, policy: &AugmentationPolicy, rng: &mut R) -> Image {
    let mut out = if rng.random::<f64>() < policy.crop_prob {
        let span = 2 * policy.crop_padding;
        let oy = rng.random_range(0..=span);
        let ox = rng.random_range(0..=span);
        reflect_crop(image, policy.crop_padding, oy, ox)
    } else {
        image.clone()
    };
    if rng.random::<f64>() < policy.flip_prob {
        out = hflip(&out);
    }
    if policy.kind == AugmentationKind::Full {
        if rng.random::<f64>() < policy.jitter_prob {
            color_jitter(&mut out, &policy.jitter, rng);
        }
        if rng.random::<f64>() < policy.grayscale_prob {
            out = grayscale(&out);
        }
    }
    out
}

/// Mirror index into `0..n` without repeating the edge pixel.
fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut i = i.rem_euclid(period);
    if i >= n as isize {
        i = period - i;
    }
    i as usize
}

/// Crops a window of the input size at offset `(oy, ox)` out of the image
/// reflection-padded by `pad` pixels on every side.
pub fn reflect_crop(image: &Image, pad: usize, oy: usize, ox: usize) -> Image {
    let (h, w, c) = image.dims();
    let mut out = Image::zeros(h, w, c);
    for y in 0..h {
        let sy = reflect(y as isize + oy as isize - pad as isize, h);
        for x in 0..w {
            let sx = reflect(x as isize + ox as isize - pad as isize, w);
            for ch in 0..c {
                out.set(y, x, ch, image.get(sy, sx, ch));
            }
        }
    }
    out
}

pub fn hflip(image: &Image) -> Image {
    let (h, w, c) = image.dims();
    let mut out = Image::zeros(h, w, c);
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                out.set(y, x, ch, image.get(y, w - 1 - x, ch));
            }
        }
    }
    out
}

fn luma(r: f32, g: f32, b: f32) -> f32 {
    0.299 * r + 0.587 * g + 0.114 * b
}

/// ITU-R 601 luma replicated into every channel.
pub fn grayscale(image: &Image) -> Image {
    let (h, w, c) = image.dims();
    if c < 3 {
        return image.clone();
    }
    let mut out = image.clone();
    for y in 0..h {
        for x in 0..w {
            let l = luma(image.get(y, x, 0), image.get(y, x, 1), image.get(y, x, 2));
            for ch in 0..c {
                out.set(y, x, ch, l);
            }
        }
    }
    out
}

/// Applies brightness, contrast, saturation and hue adjustments in a random
/// order, each with a freshly drawn factor.
pub fn color_jitter<R: Rng + ?Sized>(image: &mut Image, params: &JitterParams, rng: &mut R) {
    let factor = |rng: &mut R, s: f32| {
        if s <= 0.0 {
            1.0
        } else {
            rng.random_range((1.0 - s).max(0.0)..=1.0 + s)
        }
    };
    let mut order = [0u8, 1, 2, 3];
    order.shuffle(rng);
    for op in order {
        match op {
            0 => {
                let f = factor(rng, params.brightness);
                image.data_mut().iter_mut().for_each(|v| *v *= f);
                image.clamp_unit();
            }
            1 => adjust_contrast(image, factor(rng, params.contrast)),
            2 => adjust_saturation(image, factor(rng, params.saturation)),
            _ => {
                let shift = if params.hue <= 0.0 {
                    0.0
                } else {
                    rng.random_range(-params.hue..=params.hue)
                };
                shift_hue(image, shift);
            }
        }
    }
}

fn adjust_contrast(image: &mut Image, f: f32) {
    let (h, w, c) = image.dims();
    let mean = if c >= 3 {
        let mut total = 0.0;
        for y in 0..h {
            for x in 0..w {
                total += luma(image.get(y, x, 0), image.get(y, x, 1), image.get(y, x, 2));
            }
        }
        total / (h * w) as f32
    } else {
        image.data().iter().sum::<f32>() / image.data().len() as f32
    };
    image
        .data_mut()
        .iter_mut()
        .for_each(|v| *v = (*v - mean) * f + mean);
    image.clamp_unit();
}

fn adjust_saturation(image: &mut Image, f: f32) {
    let gray = grayscale(image);
    if image.channels() < 3 {
        return;
    }
    for (v, g) in image.data_mut().iter_mut().zip(gray.data()) {
        *v = (*v - g) * f + g;
    }
    image.clamp_unit();
}

fn shift_hue(image: &mut Image, shift: f32) {
    let (h, w, c) = image.dims();
    if c < 3 || shift == 0.0 {
        return;
    }
    for y in 0..h {
        for x in 0..w {
            let (hue, s, v) = rgb_to_hsv(image.get(y, x, 0), image.get(y, x, 1), image.get(y, x, 2));
            let (r, g, b) = hsv_to_rgb((hue + shift).rem_euclid(1.0), s, v);
            image.set(y, x, 0, r);
            image.set(y, x, 1, g);
            image.set(y, x, 2, b);
        }
    }
}

fn rgb_to_hsv(r: f32, g: f32, b: f32) -> (f32, f32, f32) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        ((g - b) / delta).rem_euclid(6.0) / 6.0
    } else if max == g {
        ((b - r) / delta + 2.0) / 6.0
    } else {
        ((r - g) / delta + 4.0) / 6.0
    };
    (h, s, max)
}

fn hsv_to_rgb(h: f32, s: f32, v: f32) -> (f32, f32, f32) {
    let h6 = h * 6.0;
    let sector = h6.floor() as i32 % 6;
    let f = h6 - h6.floor();
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match sector {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    }
}
