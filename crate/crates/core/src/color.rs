use crate::error::{Error, Result};
use crate::image::{FloatPlane, RasterImage};

// Integer weighted sums keep pixels with equal luma bit-identical after conversion.
fn weighted(p: &[u8], k: [u32; 3]) -> u32 {
    k[0] * u32::from(p[0]) + k[1] * u32::from(p[1]) + k[2] * u32::from(p[2])
}

/// Full-range BT.601 luma. Single-channel images pass through.
pub fn to_luma(img: &RasterImage) -> FloatPlane {
    let values = match img.channels() {
        1 => img.samples().iter().map(|&s| f64::from(s)).collect(),
        _ => img
            .samples()
            .chunks_exact(3)
            .map(|p| weighted(p, [299, 587, 114]) as f64 / 1000.0)
            .collect(),
    };
    FloatPlane::new(img.width(), img.height(), values).expect("shape preserved")
}

/// Studio-swing BT.601 Y (16..235), the usual channel for SR PSNR-Y.
pub fn to_ycbcr_y_studio(img: &RasterImage) -> Result<FloatPlane> {
    if img.channels() != 3 {
        return Err(Error::Channels {
            channels: img.channels(),
            context: "studio-swing Y needs an RGB image",
        });
    }
    let values = img
        .samples()
        .chunks_exact(3)
        .map(|p| 16.0 + weighted(p, [65481, 128553, 24966]) as f64 / 255_000.0)
        .collect();
    FloatPlane::new(img.width(), img.height(), values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(pixel: &[u8]) -> RasterImage {
        RasterImage::filled(1, 1, pixel).unwrap()
    }

    #[test]
    fn luma_values() {
        assert!((to_luma(&one(&[255, 255, 255])).values()[0] - 255.0).abs() < 1e-12);
        assert!((to_luma(&one(&[255, 0, 0])).values()[0] - 76.245).abs() < 1e-12);
        assert_eq!(to_luma(&one(&[42])).values()[0], 42.0);
    }

    #[test]
    fn studio_y_values() {
        let y = |p: &[u8]| to_ycbcr_y_studio(&one(p)).unwrap().values()[0];
        assert!((y(&[0, 0, 0]) - 16.0).abs() < 1e-12);
        assert!((y(&[255, 255, 255]) - 235.0).abs() < 1e-12);
        assert!((y(&[255, 0, 0]) - 81.481).abs() < 1e-12);
        assert!(to_ycbcr_y_studio(&one(&[9])).is_err());
    }
}
