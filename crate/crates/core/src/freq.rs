//! Frequency-domain texture statistics.
//!
//! The transform is normalised by `1 / (H * W)` and centre-shifted so the DC
//! bin lands at `(H / 2, W / 2)` (integer division). The high-frequency ratio
//! is the share of spectral power lying strictly outside an ideal high-pass
//! cutoff `D0 = 0.5 * sqrt((H/2)^2 + (W/2)^2)` around the DC bin.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::color::to_luma;
use crate::error::{Error, Result};
use crate::image::{FloatPlane, RasterImage};
use crate::resample::BicubicResize;

/// Centred 2D spectrum, row-major, `height` rows of `width` bins.
#[derive(Debug, Clone)]
pub struct Spectrum {
    width: usize,
    height: usize,
    coefficients: Vec<Complex64>,
}

impl Spectrum {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    /// Coefficient at row `u`, column `v` of the centred layout.
    pub fn get(&self, u: usize, v: usize) -> Complex64 {
        self.coefficients[u * self.width + v]
    }

    /// Position of the zero-frequency bin.
    pub fn dc_position(&self) -> (usize, usize) {
        (self.height / 2, self.width / 2)
    }

    pub fn total_power(&self) -> f64 {
        self.coefficients.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Unnormalised, unshifted forward transform; rows then columns.
fn fft2d_raw(values: &[f64], width: usize, height: usize) -> Vec<Complex64> {
    let mut planner = FftPlanner::<f64>::new();
    let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();

    let row_fft = planner.plan_fft_forward(width);
    row_fft.process(&mut data);

    let col_fft = planner.plan_fft_forward(height);
    let mut column = vec![Complex64::new(0.0, 0.0); height];
    for v in 0..width {
        for (u, c) in column.iter_mut().enumerate() {
            *c = data[u * width + v];
        }
        col_fft.process(&mut column);
        for (u, c) in column.iter().enumerate() {
            data[u * width + v] = *c;
        }
    }
    data
}

/// Normalised, centre-shifted 2D DFT of a plane.
pub fn dft2d(plane: &FloatPlane) -> Spectrum {
    let (w, h) = (plane.width(), plane.height());
    let raw = fft2d_raw(plane.values(), w, h);
    let norm = 1.0 / (w * h) as f64;
    let mut coefficients = vec![Complex64::new(0.0, 0.0); w * h];
    for u in 0..h {
        let su = (u + h / 2) % h;
        for v in 0..w {
            let sv = (v + w / 2) % w;
            coefficients[su * w + sv] = raw[u * w + v] * norm;
        }
    }
    Spectrum {
        width: w,
        height: h,
        coefficients,
    }
}

/// Ideal high-pass cutoff radius for an image of the given size.
pub fn cutoff_d0(width: usize, height: usize) -> f64 {
    let (h, w) = (height as f64 / 2.0, width as f64 / 2.0);
    0.5 * (h * h + w * w).sqrt()
}

/// Whether the bin at offset `(du, dv)` from DC lies beyond the cutoff.
///
/// `D > D0` with `D0^2 = (H^2 + W^2) / 16`, compared exactly in integers.
fn is_high(du: i64, dv: i64, width: usize, height: usize) -> bool {
    let (h, w) = (height as i64, width as i64);
    16 * (du * du + dv * dv) > h * h + w * w
}

/// Fraction of spectral power beyond the ideal high-pass cutoff.
pub fn high_freq_ratio(plane: &FloatPlane) -> Result<f64> {
    let values = plane.values();
    let (w, h) = (plane.width(), plane.height());
    let n = (w * h) as f64;
    let first = values[0];
    // Resampling a flat plane leaves rounding-level ripple; treat it as flat.
    let spread = values.iter().map(|&v| (v - first).abs()).fold(0.0, f64::max);
    if spread <= 1e-12 * first.abs().max(1.0) {
        // All power sits in the DC bin.
        return if first == 0.0 && spread == 0.0 {
            Err(Error::UndefinedRatio)
        } else {
            Ok(0.0)
        };
    }

    // Removing the mean only alters the DC bin (never high), and keeps the
    // small non-DC terms from being swamped by a large DC term. Offsets from
    // the first sample keep the running sum small.
    let offset_mean = values.iter().map(|&v| v - first).sum::<f64>() / n;
    let mean = first + offset_mean;
    let centered: Vec<f64> = values.iter().map(|&v| v - first - offset_mean).collect();
    let raw = fft2d_raw(&centered, w, h);

    let mut high = 0.0;
    let mut ac = 0.0;
    for u in 0..h {
        // Unshifted index u maps to frequency offset u or u - h from DC.
        let du = signed_offset(u, h);
        for v in 0..w {
            if u == 0 && v == 0 {
                continue;
            }
            let dv = signed_offset(v, w);
            let p = raw[u * w + v].norm_sqr() / (n * n);
            ac += p;
            if is_high(du, dv, w, h) {
                high += p;
            }
        }
    }
    let total = mean * mean + ac;
    if total == 0.0 {
        return Err(Error::UndefinedRatio);
    }
    Ok((high / total).clamp(0.0, 1.0))
}

/// Offset of unshifted bin `k` from DC after centring with DC at `len / 2`.
fn signed_offset(k: usize, len: usize) -> i64 {
    let shifted = (k + len / 2) % len;
    shifted as i64 - (len / 2) as i64
}

/// Texture statistic of an image: ratio on the full-range luma plane,
/// optionally after bicubic downscaling so the longer side is at most
/// `max_side`.
pub fn image_high_freq_ratio(img: &RasterImage, max_side: Option<usize>) -> Result<f64> {
    let luma = to_luma(img);
    match max_side {
        Some(limit) if limit > 0 && luma.width().max(luma.height()) > limit => {
            let scale = limit as f64 / luma.width().max(luma.height()) as f64;
            let tw = ((luma.width() as f64 * scale).round() as usize).max(1);
            let th = ((luma.height() as f64 * scale).round() as usize).max(1);
            high_freq_ratio(&luma.resize_bicubic(tw, th, true)?)
        }
        _ => high_freq_ratio(&luma),
    }
}
