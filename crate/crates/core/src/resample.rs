//! Separable cubic-convolution resampling (Keys kernel, a = -0.5).
//!
//! Sample centres sit at half-integer positions, so output pixel `i` maps to
//! source coordinate `(i + 0.5) / scale - 0.5`. Out-of-range taps replicate
//! the edge pixel. With antialiasing on and `scale < 1` the kernel is
//! stretched by `1 / scale`, which turns it into a low-pass prefilter.

use crate::error::{Error, Result};
use crate::image::{FloatPlane, RasterImage};

const KEYS_A: f64 = -0.5;

/// Cubic convolution kernel with parameter a = -0.5.
pub fn cubic_kernel(x: f64) -> f64 {
    let x = x.abs();
    if x <= 1.0 {
        ((KEYS_A + 2.0) * x - (KEYS_A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((KEYS_A * x - 5.0 * KEYS_A) * x + 8.0 * KEYS_A) * x - 4.0 * KEYS_A
    } else {
        0.0
    }
}

/// Taps contributing to one output sample along one axis.
#[derive(Debug, Clone)]
struct Contribution {
    indices: Vec<usize>,
    weights: Vec<f64>,
}

fn contributions(in_len: usize, out_len: usize, antialias: bool) -> Vec<Contribution> {
    let scale = out_len as f64 / in_len as f64;
    let stretch = if antialias && scale < 1.0 { 1.0 / scale } else { 1.0 };
    let support = 2.0 * stretch;
    let last = in_len as isize - 1;

    (0..out_len)
        .map(|i| {
            let center = (i as f64 + 0.5) / scale - 0.5;
            let lo = (center - support).ceil() as isize;
            let hi = (center + support).floor() as isize;
            let mut indices = Vec::with_capacity((hi - lo + 1) as usize);
            let mut weights = Vec::with_capacity((hi - lo + 1) as usize);
            for j in lo..=hi {
                let w = cubic_kernel((j as f64 - center) / stretch);
                if w != 0.0 {
                    indices.push(j.clamp(0, last) as usize);
                    weights.push(w);
                }
            }
            let total: f64 = weights.iter().sum();
            for w in &mut weights {
                *w /= total;
            }
            Contribution { indices, weights }
        })
        .collect()
}

fn resize_values(
    values: &[f64],
    width: usize,
    height: usize,
    target_width: usize,
    target_height: usize,
    antialias: bool,
) -> Vec<f64> {
    let horizontal = contributions(width, target_width, antialias);
    let vertical = contributions(height, target_height, antialias);

    let mut rows = vec![0.0; target_width * height];
    for y in 0..height {
        let src = &values[y * width..(y + 1) * width];
        let dst = &mut rows[y * target_width..(y + 1) * target_width];
        for (out, c) in dst.iter_mut().zip(&horizontal) {
            *out = c.indices.iter().zip(&c.weights).map(|(&i, &w)| src[i] * w).sum();
        }
    }

    let mut out = vec![0.0; target_width * target_height];
    for (y, c) in vertical.iter().enumerate() {
        let dst = &mut out[y * target_width..(y + 1) * target_width];
        for (&i, &w) in c.indices.iter().zip(&c.weights) {
            let src = &rows[i * target_width..(i + 1) * target_width];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s * w;
            }
        }
    }
    out
}

fn check_target(target_width: usize, target_height: usize) -> Result<()> {
    if target_width == 0 || target_height == 0 {
        return Err(Error::InvalidDimensions(format!(
            "resize target {target_width}x{target_height}"
        )));
    }
    Ok(())
}

/// Bicubic resampling of planes and 8-bit images.
pub trait BicubicResize: Sized {
    fn resize_bicubic(&self, target_width: usize, target_height: usize, antialias: bool) -> Result<Self>;
}

impl BicubicResize for FloatPlane {
    fn resize_bicubic(&self, target_width: usize, target_height: usize, antialias: bool) -> Result<Self> {
        check_target(target_width, target_height)?;
        if (target_width, target_height) == (self.width(), self.height()) {
            return Ok(self.clone());
        }
        let values = resize_values(
            self.values(),
            self.width(),
            self.height(),
            target_width,
            target_height,
            antialias,
        );
        FloatPlane::new(target_width, target_height, values)
    }
}

impl BicubicResize for RasterImage {
    /// Resamples each channel in float and rounds/clamps back to 8 bits.
    fn resize_bicubic(&self, target_width: usize, target_height: usize, antialias: bool) -> Result<Self> {
        check_target(target_width, target_height)?;
        if (target_width, target_height) == (self.width(), self.height()) {
            return Ok(self.clone());
        }
        let planes = (0..self.channels())
            .map(|c| {
                self.channel_plane(c)
                    .resize_bicubic(target_width, target_height, antialias)
            })
            .collect::<Result<Vec<_>>>()?;
        RasterImage::from_planes(&planes)
    }
}

/// Downscale with antialiasing, upscale without: the usual SR resampler setup.
pub fn resize_auto<T: BicubicResize + Dimensions>(input: &T, target_width: usize, target_height: usize) -> Result<T> {
    let antialias = target_width < input.dims().0 || target_height < input.dims().1;
    input.resize_bicubic(target_width, target_height, antialias)
}

pub trait Dimensions {
    fn dims(&self) -> (usize, usize);
}

impl Dimensions for FloatPlane {
    fn dims(&self) -> (usize, usize) {
        (self.width(), self.height())
    }
}

impl Dimensions for RasterImage {
    fn dims(&self) -> (usize, usize) {
        (self.width(), self.height())
    }
}
