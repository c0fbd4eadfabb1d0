//! Raster containers and on-disk image I/O.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ImageEncoder, ImageFormat};

use crate::error::{Error, Result};

/// Decoded 8-bit pixel grid, row-major, channels interleaved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    channels: usize,
    samples: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, channels: usize, samples: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimensions(format!("{width}x{height}")));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::Channels {
                channels,
                context: "raster images hold 1 or 3 channels",
            });
        }
        if samples.len() != width * height * channels {
            return Err(Error::ShapeMismatch(format!(
                "{} samples for {width}x{height}x{channels}",
                samples.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            samples,
        })
    }

    /// Image where every pixel holds `pixel` (whose length sets the channel count).
    pub fn filled(width: usize, height: usize, pixel: &[u8]) -> Result<Self> {
        let samples = pixel
            .iter()
            .copied()
            .cycle()
            .take(width * height * pixel.len())
            .collect();
        Self::new(width, height, pixel.len(), samples)
    }

    /// Builds an image by evaluating `f(x, y, channel)` for every sample.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> u8,
    ) -> Result<Self> {
        let mut samples = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    samples.push(f(x, y, c));
                }
            }
        }
        Self::new(width, height, channels, samples)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<u8> {
        self.samples
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let start = (y * self.width + x) * self.channels;
        &self.samples[start..start + self.channels]
    }

    /// The `width x height` region whose top-left corner is `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 || x0 + width > self.width || y0 + height > self.height {
            return Err(Error::InvalidDimensions(format!(
                "crop {width}x{height}+{x0}+{y0} of a {}x{} image",
                self.width, self.height
            )));
        }
        let c = self.channels;
        let samples = (y0..y0 + height)
            .flat_map(|y| {
                let start = (y * self.width + x0) * c;
                self.samples[start..start + width * c].iter().copied()
            })
            .collect();
        Self::new(width, height, c, samples)
    }

    pub fn same_shape(&self, other: &RasterImage) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    /// One channel as a float plane.
    pub fn channel_plane(&self, channel: usize) -> FloatPlane {
        assert!(channel < self.channels, "channel {channel} out of range");
        let values = self
            .samples
            .iter()
            .skip(channel)
            .step_by(self.channels)
            .map(|&s| f64::from(s))
            .collect();
        FloatPlane {
            width: self.width,
            height: self.height,
            values,
        }
    }

    /// Interleaves equally sized planes, rounding and clamping to [0, 255].
    pub fn from_planes(planes: &[FloatPlane]) -> Result<Self> {
        let first = planes.first().ok_or(Error::EmptyInput("no planes to interleave"))?;
        if planes
            .iter()
            .any(|p| p.width != first.width || p.height != first.height)
        {
            return Err(Error::ShapeMismatch("planes differ in size".into()));
        }
        let n = first.width * first.height;
        let mut samples = Vec::with_capacity(n * planes.len());
        for i in 0..n {
            for plane in planes {
                samples.push(quantize_sample(plane.values[i]));
            }
        }
        Self::new(first.width, first.height, planes.len(), samples)
    }

    /// Lossless PNG encoding of the samples.
    pub fn encode_png(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        let color = if self.channels == 1 {
            image::ExtendedColorType::L8
        } else {
            image::ExtendedColorType::Rgb8
        };
        image::codecs::png::PngEncoder::new(&mut out)
            .write_image(&self.samples, self.width as u32, self.height as u32, color)
            .map_err(|e| Error::Encode(e.to_string()))?;
        Ok(out)
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = self.encode_png()?;
        fs::write(path, bytes).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Round half away from zero and clamp into the 8-bit range.
pub(crate) fn quantize_sample(v: f64) -> u8 {
    if v.is_nan() {
        0
    } else {
        v.round().clamp(0.0, 255.0) as u8
    }
}

/// Row-major real-valued plane; the working type for spectra and metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatPlane {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl FloatPlane {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimensions(format!("{width}x{height}")));
        }
        if values.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {width}x{height}",
                values.len()
            )));
        }
        Ok(Self { width, height, values })
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self::new(width, height, values)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.values[y * self.width..(y + 1) * self.width]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> FloatPlane {
        FloatPlane {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Rounds and clamps into a single-channel raster.
    pub fn to_gray_image(&self) -> RasterImage {
        RasterImage {
            width: self.width,
            height: self.height,
            channels: 1,
            samples: self.values.iter().map(|&v| quantize_sample(v)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncodedFormat {
    Png,
    Jpeg,
}

/// A decoded file together with the size of its encoded representation.
#[derive(Debug, Clone)]
pub struct LoadedImage {
    pub image: RasterImage,
    pub encoded_bytes: u64,
    pub format: EncodedFormat,
}

/// Reads and decodes a PNG or baseline JPEG file.
pub fn load_image(path: impl AsRef<Path>) -> Result<LoadedImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_image(&bytes).map_err(|reason| Error::Decode {
        path: path.to_path_buf(),
        reason,
    })
}

/// Decodes PNG or JPEG bytes held in memory.
pub fn decode_image(bytes: &[u8]) -> std::result::Result<LoadedImage, String> {
    let format = match image::guess_format(bytes) {
        Ok(ImageFormat::Png) => EncodedFormat::Png,
        Ok(ImageFormat::Jpeg) => EncodedFormat::Jpeg,
        Ok(other) => return Err(format!("unsupported format {other:?}")),
        Err(e) => return Err(e.to_string()),
    };
    let image_format = match format {
        EncodedFormat::Png => ImageFormat::Png,
        EncodedFormat::Jpeg => ImageFormat::Jpeg,
    };
    let mut reader = image::ImageReader::new(Cursor::new(bytes));
    reader.set_format(image_format);
    let decoded = reader.decode().map_err(|e| e.to_string())?;
    let image = from_dynamic(decoded).map_err(|e| e.to_string())?;
    Ok(LoadedImage {
        image,
        encoded_bytes: bytes.len() as u64,
        format,
    })
}

fn from_dynamic(img: DynamicImage) -> Result<RasterImage> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    if img.color().has_color() {
        RasterImage::new(w, h, 3, img.into_rgb8().into_raw())
    } else {
        RasterImage::new(w, h, 1, img.into_luma8().into_raw())
    }
}
