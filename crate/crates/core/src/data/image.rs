use std::path::Path;

use crate::error::{Error, Result};

/// A dense image with values in `[0, 1]`, stored row-major as height x width x channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::Shape(format!(
                "image dimensions must be positive, got {height}x{width}x{channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::Shape(format!(
                "expected {} values for a {height}x{width}x{channels} image, got {}",
                height * width * channels,
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// `(height, width, channels)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, value: f32) {
        self.data[(y * self.width + x) * self.channels + c] = value;
    }

    /// Channel-major copy (C x H x W), the layout the convolutional backbone expects.
    pub fn to_chw(&self) -> Vec<f32> {
        let mut out = Vec::with_capacity(self.data.len());
        for c in 0..self.channels {
            for y in 0..self.height {
                for x in 0..self.width {
                    out.push(self.get(y, x, c));
                }
            }
        }
        out
    }

    pub fn clamp_unit(&mut self) {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
    }

    /// Squared Euclidean distance between two images of equal shape.
    pub fn squared_distance(&self, other: &Image) -> f32 {
        debug_assert_eq!(self.dims(), other.dims());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        let decoded = image::open(path)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        let (channels, width, height, raw) = match decoded.color().channel_count() {
            1 | 2 => {
                let luma = decoded.to_luma8();
                (1, luma.width(), luma.height(), luma.into_raw())
            }
            _ => {
                let rgb = decoded.to_rgb8();
                (3, rgb.width(), rgb.height(), rgb.into_raw())
            }
        };
        let data = raw.into_iter().map(|v| f32::from(v) / 255.0).collect();
        Image::new(height as usize, width as usize, channels, data)
    }

    /// Writes an 8-bit PNG. Values are quantized to 1/255 steps.
    pub fn save_png(&self, path: &Path) -> Result<()> {
        let raw: Vec<u8> = self
            .data
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        let (w, h) = (self.width as u32, self.height as u32);
        let saved = match self.channels {
            1 => image::GrayImage::from_raw(w, h, raw).map(|b| b.save(path)),
            3 => image::RgbImage::from_raw(w, h, raw).map(|b| b.save(path)),
            c => {
                return Err(Error::Format(format!(
                    "cannot encode a {c}-channel image as png"
                )))
            }
        };
        match saved {
            Some(Ok(())) => Ok(()),
            Some(Err(e)) => Err(Error::Format(format!("{}: {e}", path.display()))),
            None => Err(Error::Format("image buffer size mismatch".into())),
        }
    }
}
