//! Full-reference quality metrics and the bits-per-pixel statistic.

use serde::{Deserialize, Serialize};

use crate::color::{to_luma, to_ycbcr_y_studio};
use crate::error::{Error, Result};
use crate::image::{FloatPlane, RasterImage};

const PEAK: f64 = 255.0;
const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = (0.01 * PEAK) * (0.01 * PEAK);
const SSIM_C2: f64 = (0.03 * PEAK) * (0.03 * PEAK);

fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (PEAK * PEAK / mse).log10()
    }
}

/// Mean squared error over the region left after shaving `crop` pixels from every border.
fn cropped_mse(a: &[f64], b: &[f64], width: usize, height: usize, channels: usize, crop: usize) -> Result<f64> {
    if 2 * crop >= width || 2 * crop >= height {
        return Err(Error::InvalidDimensions(format!(
            "crop {crop} leaves nothing of {width}x{height}"
        )));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for y in crop..height - crop {
        let row = y * width * channels;
        let span = row + crop * channels..row + (width - crop) * channels;
        for (x, y) in a[span.clone()].iter().zip(&b[span]) {
            let d = x - y;
            sum += d * d;
            count += 1;
        }
    }
    Ok(sum / count as f64)
}

fn check_same_shape(a: &RasterImage, b: &RasterImage) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::ShapeMismatch(format!(
            "{}x{}x{} vs {}x{}x{}",
            a.width(),
            a.height(),
            a.channels(),
            b.width(),
            b.height(),
            b.channels()
        )));
    }
    Ok(())
}

/// PSNR in dB over all samples jointly; identical inputs give `f64::INFINITY`.
pub fn psnr(a: &RasterImage, b: &RasterImage) -> Result<f64> {
    psnr_cropped(a, b, 0)
}

/// PSNR ignoring a `crop`-pixel border on each side.
pub fn psnr_cropped(a: &RasterImage, b: &RasterImage, crop: usize) -> Result<f64> {
    check_same_shape(a, b)?;
    let fa: Vec<f64> = a.samples().iter().map(|&s| f64::from(s)).collect();
    let fb: Vec<f64> = b.samples().iter().map(|&s| f64::from(s)).collect();
    let mse = cropped_mse(&fa, &fb, a.width(), a.height(), a.channels(), crop)?;
    Ok(psnr_from_mse(mse))
}

/// PSNR on the studio-swing luma channel.
pub fn psnr_y(a: &RasterImage, b: &RasterImage) -> Result<f64> {
    psnr_y_cropped(a, b, 0)
}

pub fn psnr_y_cropped(a: &RasterImage, b: &RasterImage, crop: usize) -> Result<f64> {
    check_same_shape(a, b)?;
    let ya = to_ycbcr_y_studio(a)?;
    let yb = to_ycbcr_y_studio(b)?;
    let mse = cropped_mse(ya.values(), yb.values(), a.width(), a.height(), 1, crop)?;
    Ok(psnr_from_mse(mse))
}

/// Normalised 11-tap Gaussian, sigma 1.5.
pub fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let half = (SSIM_WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - half;
        *v = (-(d * d) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// Separable "valid" filtering with the SSIM window.
fn filter_valid(values: &[f64], width: usize, height: usize, kernel: &[f64]) -> Vec<f64> {
    let k = kernel.len();
    let ow = width - k + 1;
    let oh = height - k + 1;
    let mut rows = vec![0.0; ow * height];
    for y in 0..height {
        let src = &values[y * width..(y + 1) * width];
        for x in 0..ow {
            rows[y * ow + x] = src[x..x + k].iter().zip(kernel).map(|(s, w)| s * w).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for (t, w) in kernel.iter().enumerate() {
            let src = &rows[(y + t) * ow..(y + t + 1) * ow];
            for (d, s) in out[y * ow..(y + 1) * ow].iter_mut().zip(src) {
                *d += s * w;
            }
        }
    }
    out
}

/// Mean SSIM (Gaussian 11x11 window, sigma 1.5, K1 = 0.01, K2 = 0.03, L = 255)
/// over every position where the window fits entirely inside the planes.
pub fn ssim(a: &FloatPlane, b: &FloatPlane) -> Result<f64> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    let (w, h) = (a.width(), a.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::InvalidDimensions(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {w}x{h}"
        )));
    }
    let kernel = gaussian_window();
    let (x, y) = (a.values(), b.values());
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(p, q)| p * q).collect();

    let mu_x = filter_valid(x, w, h, &kernel);
    let mu_y = filter_valid(y, w, h, &kernel);
    let e_xx = filter_valid(&xx, w, h, &kernel);
    let e_yy = filter_valid(&yy, w, h, &kernel);
    let e_xy = filter_valid(&xy, w, h, &kernel);

    let n = mu_x.len();
    let mut total = 0.0;
    for i in 0..n {
        let (mx, my) = (mu_x[i], mu_y[i]);
        let var_x = e_xx[i] - mx * mx;
        let var_y = e_yy[i] - my * my;
        let cov = e_xy[i] - mx * my;
        total += ((2.0 * mx * my + SSIM_C1) * (2.0 * cov + SSIM_C2))
            / ((mx * mx + my * my + SSIM_C1) * (var_x + var_y + SSIM_C2));
    }
    Ok(total / n as f64)
}

/// SSIM of two images; colour images are compared on full-range luma.
pub fn ssim_image(a: &RasterImage, b: &RasterImage) -> Result<f64> {
    check_same_shape(a, b)?;
    ssim(&to_luma(a), &to_luma(b))
}

/// Bits per pixel of an encoded file.
pub fn bpp(encoded_size_bytes: u64, width: usize, height: usize) -> Result<f64> {
    let pixels = width * height;
    if pixels == 0 {
        return Err(Error::InvalidDimensions(format!("{width}x{height}")));
    }
    Ok(8.0 * encoded_size_bytes as f64 / pixels as f64)
}

/// One evaluated image pair; PSNR values serialise infinity as `"inf"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub id: String,
    #[serde(with = "inf_f64")]
    pub psnr: f64,
    #[serde(with = "inf_f64_opt")]
    pub psnr_y: Option<f64>,
    pub ssim: f64,
    pub category: Option<String>,
    pub freq_band: Option<String>,
}

/// Computes PSNR, PSNR-Y (colour only) and SSIM for a restored/reference pair.
pub fn evaluate_pair(id: &str, restored: &RasterImage, reference: &RasterImage, crop: usize) -> Result<MetricReport> {
    let psnr = psnr_cropped(restored, reference, crop)?;
    let psnr_y = if restored.channels() == 3 {
        Some(psnr_y_cropped(restored, reference, crop)?)
    } else {
        None
    };
    let ssim = ssim_image(restored, reference)?;
    Ok(MetricReport {
        id: id.to_string(),
        psnr,
        psnr_y,
        ssim,
        category: None,
        freq_band: None,
    })
}

/// Serde adapter writing non-finite positive values as the string `"inf"`.
pub mod inf_f64 {
    use serde::de::{self, Deserializer, Visitor};
    use serde::Serializer;
    use std::fmt;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = f64;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
                Ok(v)
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
                Ok(v as f64)
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
                Ok(v as f64)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
                match v {
                    "inf" => Ok(f64::INFINITY),
                    _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
                }
            }
        }
        d.deserialize_any(V)
    }
}

pub mod inf_f64_opt {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) => super::inf_f64::serialize(x, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        #[derive(Deserialize)]
        struct Wrap(#[serde(with = "super::inf_f64")] f64);
        Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
    }
}

/// Running sums for averaging metrics; merging is associative.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricAccumulator {
    pub count: usize,
    pub psnr_sum: f64,
    pub psnr_y_count: usize,
    pub psnr_y_sum: f64,
    pub ssim_sum: f64,
}

impl MetricAccumulator {
    pub fn push(&mut self, r: &MetricReport) {
        self.count += 1;
        self.psnr_sum += r.psnr;
        self.ssim_sum += r.ssim;
        if let Some(y) = r.psnr_y {
            self.psnr_y_count += 1;
            self.psnr_y_sum += y;
        }
    }

    pub fn merge(mut self, other: MetricAccumulator) -> Self {
        self.count += other.count;
        self.psnr_sum += other.psnr_sum;
        self.psnr_y_count += other.psnr_y_count;
        self.psnr_y_sum += other.psnr_y_sum;
        self.ssim_sum += other.ssim_sum;
        self
    }

    pub fn mean_psnr(&self) -> Option<f64> {
        (self.count > 0).then(|| self.psnr_sum / self.count as f64)
    }

    pub fn mean_psnr_y(&self) -> Option<f64> {
        (self.psnr_y_count > 0).then(|| self.psnr_y_sum / self.psnr_y_count as f64)
    }

    pub fn mean_ssim(&self) -> Option<f64> {
        (self.count > 0).then(|| self.ssim_sum / self.count as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const PSNR_ONE_LEVEL: f64 = 48.130_803_608_679_1;

    /// Per-window SSIM straight from the definition, no separable filtering.
    fn brute_force_ssim(a: &FloatPlane, b: &FloatPlane) -> f64 {
        let mut g2 = [[0.0; 11]; 11];
        let mut total_w = 0.0;
        for (i, row) in g2.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                let (di, dj) = (i as f64 - 5.0, j as f64 - 5.0);
                *v = (-(di * di + dj * dj) / (2.0 * 1.5 * 1.5)).exp();
                total_w += *v;
            }
        }
        let c1 = (0.01f64 * 255.0).powi(2);
        let c2 = (0.03f64 * 255.0).powi(2);
        let mut acc = 0.0;
        let mut n = 0;
        for y0 in 0..=a.height() - 11 {
            for x0 in 0..=a.width() - 11 {
                let (mut mx, mut my) = (0.0, 0.0);
                for i in 0..11 {
                    for j in 0..11 {
                        let w = g2[i][j] / total_w;
                        mx += w * a.get(x0 + j, y0 + i);
                        my += w * b.get(x0 + j, y0 + i);
                    }
                }
                let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
                for i in 0..11 {
                    for j in 0..11 {
                        let w = g2[i][j] / total_w;
                        let dx = a.get(x0 + j, y0 + i) - mx;
                        let dy = b.get(x0 + j, y0 + i) - my;
                        vx += w * dx * dx;
                        vy += w * dy * dy;
                        cxy += w * dx * dy;
                    }
                }
                acc += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
                n += 1;
            }
        }
        acc / n as f64
    }

    fn gray(w: usize, h: usize, f: impl FnMut(usize, usize, usize) -> u8) -> RasterImage {
        RasterImage::from_fn(w, h, 1, f).unwrap()
    }

    #[test]
    fn psnr_examples() {
        let a = gray(4, 4, |x, y, _| (x * 10 + y) as u8);
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        let b = gray(4, 4, |x, y, _| (x * 10 + y + 1) as u8);
        assert!((psnr(&a, &b).unwrap() - PSNR_ONE_LEVEL).abs() < 1e-9);

        let c = gray(4, 1, |_, _, _| 100);
        let d = gray(4, 1, |x, _, _| if x == 2 { 102 } else { 100 });
        assert!((psnr(&c, &d).unwrap() - PSNR_ONE_LEVEL).abs() < 1e-9);

        assert!(psnr(&a, &c).is_err());
    }

    #[test]
    fn psnr_crop_shaves_border() {
        let a = gray(10, 10, |_, _, _| 50);
        let b = gray(10, 10, |x, y, _| if x == 0 || y == 9 { 200 } else { 50 });
        assert!(psnr(&a, &b).unwrap().is_finite());
        assert_eq!(psnr_cropped(&a, &b, 1).unwrap(), f64::INFINITY);
        assert!(psnr_cropped(&a, &b, 5).is_err());
    }

    #[test]
    fn psnr_y_examples() {
        let black = RasterImage::filled(3, 3, &[0, 0, 0]).unwrap();
        let white = RasterImage::filled(3, 3, &[255, 255, 255]).unwrap();
        assert_eq!(psnr_y(&black, &black).unwrap(), f64::INFINITY);
        let expected = 20.0 * (255.0f64 / 219.0).log10();
        assert!((psnr_y(&black, &white).unwrap() - expected).abs() < 1e-9);
        assert!((expected - 1.322).abs() < 1e-3);

        // Y weights reduce to 299:587:114, so colour shifts with
        // 299 dr + 587 dg + 114 db = 0 leave Y unchanged.
        let mut pair = None;
        'search: for dr in -40i32..=40 {
            for dg in -40i32..=40 {
                let rest = -(299 * dr + 587 * dg);
                if (dr, dg) != (0, 0) && rest % 114 == 0 {
                    let db = rest / 114;
                    let base = [100i32, 100, 100];
                    let moved = [100 + dr, 100 + dg, 100 + db];
                    if moved.iter().all(|v| (0..=255).contains(v)) {
                        let px = |v: [i32; 3]| [v[0] as u8, v[1] as u8, v[2] as u8];
                        pair = Some((px(base), px(moved)));
                        break 'search;
                    }
                }
            }
        }
        let (p, q) = pair.expect("equal-luma pair exists");
        let a = RasterImage::filled(2, 2, &p).unwrap();
        let b = RasterImage::filled(2, 2, &q).unwrap();
        assert_ne!(a, b);
        assert_eq!(psnr_y(&a, &b).unwrap(), f64::INFINITY);
        assert!(psnr_y(&gray(2, 2, |_, _, _| 1), &gray(2, 2, |_, _, _| 1)).is_err());
    }

    #[test]
    fn ssim_identical_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = FloatPlane::from_fn(20, 14, |_, _| rng.random_range(0.0..255.0)).unwrap();
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ssim_of_inverted_bimodal_is_negative() {
        let a = FloatPlane::from_fn(24, 24, |x, y| if (x / 3 + y / 2) % 2 == 0 { 0.0 } else { 255.0 }).unwrap();
        let b = a.map(|v| 255.0 - v);
        assert!(ssim(&a, &b).unwrap() < 0.0);
    }

    #[test]
    fn ssim_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a = FloatPlane::from_fn(16, 16, |_, _| rng.random_range(0.0..255.0)).unwrap();
        let b = FloatPlane::from_fn(16, 16, |_, _| rng.random_range(0.0..255.0)).unwrap();
        assert!((ssim(&a, &b).unwrap() - brute_force_ssim(&a, &b)).abs() < 1e-9);
    }

    #[test]
    fn ssim_rejects_small_and_mismatched() {
        let a = FloatPlane::constant(10, 20, 1.0).unwrap();
        assert!(ssim(&a, &a).is_err());
        let b = FloatPlane::constant(11, 11, 1.0).unwrap();
        let c = FloatPlane::constant(12, 11, 1.0).unwrap();
        assert!(ssim(&b, &c).is_err());
    }

    #[test]
    fn bpp_examples() {
        assert_eq!(bpp(500 * 1024, 1024, 1024).unwrap(), 3.90625);
        assert_eq!(bpp(0, 10, 10).unwrap(), 0.0);
        assert!(bpp(10, 0, 10).is_err());
    }

    #[test]
    fn report_serialises_inf() {
        let r = MetricReport {
            id: "a".into(),
            psnr: f64::INFINITY,
            psnr_y: Some(f64::INFINITY),
            ssim: 1.0,
            category: Some("food".into()),
            freq_band: None,
        };
        let line = serde_json::to_string(&r).unwrap();
        assert!(line.contains(r#""psnr":"inf""#), "{line}");
        let back: MetricReport = serde_json::from_str(&line).unwrap();
        assert_eq!(back, r);
    }

    proptest! {
        #[test]
        fn metrics_symmetric(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = RasterImage::from_fn(13, 12, 3, |_, _, _| rng.random()).unwrap();
            let b = RasterImage::from_fn(13, 12, 3, |_, _, _| rng.random()).unwrap();
            prop_assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
            prop_assert!((ssim_image(&a, &b).unwrap() - ssim_image(&b, &a).unwrap()).abs() < 1e-9);
        }

        #[test]
        fn psnr_decreases_with_uniform_error(base in 0u8..100, e in 1u8..100) {
            let a = gray(5, 5, |_, _, _| base);
            let b = gray(5, 5, |_, _, _| base + e);
            let c = gray(5, 5, |_, _, _| base + e + 1);
            prop_assert!(psnr(&a, &b).unwrap() > psnr(&a, &c).unwrap());
        }
    }
}
