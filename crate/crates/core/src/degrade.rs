//! Synthetic degradations for building (degraded, clean) training pairs.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{quantize_sample, RasterImage};
use crate::jpeg::{jpeg_round_trip, ChromaSubsampling};
use crate::resample::BicubicResize;

pub const SR_SCALES: [u32; 3] = [2, 3, 4];
pub const NOISE_SIGMAS: [u32; 3] = [15, 25, 50];
pub const JPEG_QUALITIES: [u8; 4] = [10, 20, 30, 40];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Sr,
    Derain,
    Denoise,
    Dejpeg,
}

impl Task {
    pub const ALL: [Task; 4] = [Task::Sr, Task::Derain, Task::Denoise, Task::Dejpeg];

    pub fn name(self) -> &'static str {
        match self {
            Task::Sr => "sr",
            Task::Derain => "derain",
            Task::Denoise => "denoise",
            Task::Dejpeg => "dejpeg",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Rain streak layer parameters. `angle` is in degrees from the image x axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RainParams {
    pub density: f64,
    pub angle: f64,
    pub streak_length: u32,
    pub intensity: f64,
}

impl Default for RainParams {
    fn default() -> Self {
        Self {
            density: 0.02,
            angle: 75.0,
            streak_length: 15,
            intensity: 0.6,
        }
    }
}

impl RainParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "rain density {} not in (0, 1]",
                self.density
            )));
        }
        if !(self.intensity > 0.0 && self.intensity <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "rain intensity {} not in (0, 1]",
                self.intensity
            )));
        }
        if self.streak_length == 0 {
            return Err(Error::InvalidParameter("rain streak length must be positive".into()));
        }
        if !self.angle.is_finite() {
            return Err(Error::InvalidParameter("rain angle must be finite".into()));
        }
        Ok(())
    }

    /// Directory-safe label, e.g. `d0.02_a75_l15_i0.6`.
    pub fn label(&self) -> String {
        format!(
            "d{}_a{}_l{}_i{}",
            self.density, self.angle, self.streak_length, self.intensity
        )
    }
}

/// Task plus severity level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "lowercase")]
pub enum Degradation {
    Sr { scale: u32 },
    Denoise { sigma: f64 },
    Dejpeg { quality: u8 },
    Derain(RainParams),
}

impl Degradation {
    pub fn task(&self) -> Task {
        match self {
            Degradation::Sr { .. } => Task::Sr,
            Degradation::Denoise { .. } => Task::Denoise,
            Degradation::Dejpeg { .. } => Task::Dejpeg,
            Degradation::Derain(_) => Task::Derain,
        }
    }

    /// Short level label used in output paths (`x2`, `sigma25`, `q40`, rain parameters).
    pub fn level_label(&self) -> String {
        match self {
            Degradation::Sr { scale } => format!("x{scale}"),
            Degradation::Denoise { sigma } => format!("sigma{sigma}"),
            Degradation::Dejpeg { quality } => format!("q{quality}"),
            Degradation::Derain(p) => p.label(),
        }
    }

    /// The eleven standard settings: SR x2/x3/x4, deraining, noise 15/25/50, JPEG 10..40.
    pub fn standard_menu() -> Vec<Degradation> {
        let mut menu: Vec<Degradation> = SR_SCALES.iter().map(|&scale| Degradation::Sr { scale }).collect();
        menu.push(Degradation::Derain(RainParams::default()));
        menu.extend(
            NOISE_SIGMAS
                .iter()
                .map(|&s| Degradation::Denoise { sigma: f64::from(s) }),
        );
        menu.extend(JPEG_QUALITIES.iter().map(|&quality| Degradation::Dejpeg { quality }));
        menu
    }
}

impl fmt::Display for Degradation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.task(), self.level_label())
    }
}

/// One synthetic-pair recipe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegradationSpec {
    pub degradation: Degradation,
    pub seed: u64,
    /// Allows levels outside the standard sets.
    #[serde(default)]
    pub extended: bool,
}

impl DegradationSpec {
    pub fn new(degradation: Degradation, seed: u64) -> Self {
        Self {
            degradation,
            seed,
            extended: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let legal = match self.degradation {
            Degradation::Sr { scale } => scale >= 1 && (self.extended || SR_SCALES.contains(&scale)),
            Degradation::Denoise { sigma } => {
                sigma > 0.0 && (self.extended || NOISE_SIGMAS.iter().any(|&s| f64::from(s) == sigma))
            }
            Degradation::Dejpeg { quality } => {
                (1..=100).contains(&quality) && (self.extended || JPEG_QUALITIES.contains(&quality))
            }
            Degradation::Derain(p) => return p.validate(),
        };
        if legal {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "level {} is not a standard {} level (set `extended` to allow it)",
                self.degradation.level_label(),
                self.degradation.task()
            )))
        }
    }
}

/// Bicubic antialiased downscale by an integer factor to `(W / s, H / s)`.
pub fn degrade_sr(img: &RasterImage, scale: u32) -> Result<RasterImage> {
    let s = scale as usize;
    if s == 0 || img.width() < s || img.height() < s {
        return Err(Error::InvalidDimensions(format!(
            "{}x{} image cannot be downscaled by {scale}",
            img.width(),
            img.height()
        )));
    }
    img.resize_bicubic(img.width() / s, img.height() / s, true)
}

/// Additive white Gaussian noise in 8-bit space with rounding and clamping.
pub fn degrade_noise(img: &RasterImage, sigma: f64, seed: u64) -> Result<RasterImage> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise sigma {sigma} must be positive")));
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = img
        .samples()
        .iter()
        .map(|&s| quantize_sample(f64::from(s) + normal.sample(&mut rng)))
        .collect();
    RasterImage::new(img.width(), img.height(), img.channels(), samples)
}

/// JPEG compression at `quality`, decoded back to pixels.
pub fn degrade_jpeg(img: &RasterImage, quality: u8) -> Result<RasterImage> {
    jpeg_round_trip(img, quality)
}

/// Offsets of a straight streak of `length` pixels through the origin.
fn streak_offsets(angle_deg: f64, length: u32) -> Vec<(isize, isize)> {
    let (sin, cos) = angle_deg.to_radians().sin_cos();
    let half = (f64::from(length) - 1.0) / 2.0;
    let mut offsets: Vec<(isize, isize)> = (0..length)
        .map(|i| {
            let t = f64::from(i) - half;
            // Image y grows downward, so a positive angle rises to the right.
            ((t * cos).round() as isize, (-t * sin).round() as isize)
        })
        .collect();
    offsets.sort_unstable();
    offsets.dedup();
    offsets
}

/// Single-channel streak layer in [0, 1].
pub fn rain_layer(width: usize, height: usize, params: &RainParams, seed: u64) -> Result<Vec<f64>> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let threshold = 1.0 - params.density;
    let seeds: Vec<bool> = (0..width * height).map(|_| rng.random::<f64>() > threshold).collect();

    let offsets = streak_offsets(params.angle, params.streak_length);
    let mut layer = vec![0.0; width * height];
    for y in 0..height {
        for x in 0..width {
            if !seeds[y * width + x] {
                continue;
            }
            for &(dx, dy) in &offsets {
                let (tx, ty) = (x as isize + dx, y as isize + dy);
                if tx >= 0 && ty >= 0 && (tx as usize) < width && (ty as usize) < height {
                    layer[ty as usize * width + tx as usize] = 1.0;
                }
            }
        }
    }
    Ok(layer)
}

/// Adds a seeded rain-streak layer to an RGB image.
pub fn degrade_rain(img: &RasterImage, params: &RainParams, seed: u64) -> Result<RasterImage> {
    if img.channels() != 3 {
        return Err(Error::Channels {
            channels: img.channels(),
            context: "rain synthesis needs an RGB image",
        });
    }
    let layer = rain_layer(img.width(), img.height(), params, seed)?;
    let gain = params.intensity * 255.0;
    let samples = img
        .samples()
        .chunks_exact(3)
        .zip(&layer)
        .flat_map(|(px, &s)| px.iter().map(move |&v| quantize_sample(f64::from(v) + gain * s)))
        .collect();
    RasterImage::new(img.width(), img.height(), 3, samples)
}

/// A degraded input and its clean target.
#[derive(Debug, Clone)]
pub struct Pair {
    pub degraded: RasterImage,
    pub target: RasterImage,
    pub subsampling: Option<ChromaSubsampling>,
}

/// Synthesises one training pair. The target is the input image, cropped
/// to a multiple of the scale for super-resolution.
pub fn make_pair(img: &RasterImage, spec: &DegradationSpec) -> Result<Pair> {
    spec.validate()?;
    let mut subsampling = None;
    let mut target = img.clone();
    let degraded = match spec.degradation {
        Degradation::Sr { scale } => {
            // Crop so the target is exactly `scale` times the degraded size.
            let s = scale as usize;
            target = img.crop(0, 0, img.width() / s * s, img.height() / s * s)?;
            degrade_sr(&target, scale)?
        }
        Degradation::Denoise { sigma } => degrade_noise(img, sigma, spec.seed)?,
        Degradation::Dejpeg { quality } => {
            if img.channels() == 3 {
                subsampling = Some(ChromaSubsampling::for_quality(quality));
            }
            degrade_jpeg(img, quality)?
        }
        Degradation::Derain(params) => degrade_rain(img, &params, spec.seed)?,
    };
    Ok(Pair {
        degraded,
        target,
        subsampling,
    })
}
