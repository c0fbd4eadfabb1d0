//! Baseline sequential-DCT JPEG encoder (ITU-T T.81) with IJG-style quality
//! scaling of the Annex K tables and the Annex K Huffman tables.
//!
//! Decoding goes through the general image loader.

use crate::error::{Error, Result};
use crate::image::{decode_image, RasterImage};

/// Annex K.1 luminance quantization table, natural (row-major) order.
#[rustfmt::skip]
pub const ANNEX_K_LUMA: [u8; 64] = [
    16, 11, 10, 16,  24,  40,  51,  61,
    12, 12, 14, 19,  26,  58,  60,  55,
    14, 13, 16, 24,  40,  57,  69,  56,
    14, 17, 22, 29,  51,  87,  80,  62,
    18, 22, 37, 56,  68, 109, 103,  77,
    24, 35, 55, 64,  81, 104, 113,  92,
    49, 64, 78, 87, 103, 121, 120, 101,
    72, 92, 95, 98, 112, 100, 103,  99,
];

/// Annex K.2 chrominance quantization table, natural order.
#[rustfmt::skip]
pub const ANNEX_K_CHROMA: [u8; 64] = [
    17, 18, 24, 47, 99, 99, 99, 99,
    18, 21, 26, 66, 99, 99, 99, 99,
    24, 26, 56, 99, 99, 99, 99, 99,
    47, 66, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
];

/// Natural-order index of each zigzag position.
#[rustfmt::skip]
const ZIGZAG: [usize; 64] = [
     0,  1,  8, 16,  9,  2,  3, 10,
    17, 24, 32, 25, 18, 11,  4,  5,
    12, 19, 26, 33, 40, 48, 41, 34,
    27, 20, 13,  6,  7, 14, 21, 28,
    35, 42, 49, 56, 57, 50, 43, 36,
    29, 22, 15, 23, 30, 37, 44, 51,
    58, 59, 52, 45, 38, 31, 39, 46,
    53, 60, 61, 54, 47, 55, 62, 63,
];

const DC_LUMA_BITS: [u8; 16] = [0, 1, 5, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0];
const DC_CHROMA_BITS: [u8; 16] = [0, 3, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0];
const DC_VALUES: [u8; 12] = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11];

const AC_LUMA_BITS: [u8; 16] = [0, 2, 1, 3, 3, 2, 4, 3, 5, 5, 4, 4, 0, 0, 1, 0x7d];
#[rustfmt::skip]
const AC_LUMA_VALUES: [u8; 162] = [
    0x01, 0x02, 0x03, 0x00, 0x04, 0x11, 0x05, 0x12, 0x21, 0x31, 0x41, 0x06, 0x13, 0x51, 0x61, 0x07,
    0x22, 0x71, 0x14, 0x32, 0x81, 0x91, 0xa1, 0x08, 0x23, 0x42, 0xb1, 0xc1, 0x15, 0x52, 0xd1, 0xf0,
    0x24, 0x33, 0x62, 0x72, 0x82, 0x09, 0x0a, 0x16, 0x17, 0x18, 0x19, 0x1a, 0x25, 0x26, 0x27, 0x28,
    0x29, 0x2a, 0x34, 0x35, 0x36, 0x37, 0x38, 0x39, 0x3a, 0x43, 0x44, 0x45, 0x46, 0x47, 0x48, 0x49,
    0x4a, 0x53, 0x54, 0x55, 0x56, 0x57, 0x58, 0x59, 0x5a, 0x63, 0x64, 0x65, 0x66, 0x67, 0x68, 0x69,
    0x6a, 0x73, 0x74, 0x75, 0x76, 0x77, 0x78, 0x79, 0x7a, 0x83, 0x84, 0x85, 0x86, 0x87, 0x88, 0x89,
    0x8a, 0x92, 0x93, 0x94, 0x95, 0x96, 0x97, 0x98, 0x99, 0x9a, 0xa2, 0xa3, 0xa4, 0xa5, 0xa6, 0xa7,
    0xa8, 0xa9, 0xaa, 0xb2, 0xb3, 0xb4, 0xb5, 0xb6, 0xb7, 0xb8, 0xb9, 0xba, 0xc2, 0xc3, 0xc4, 0xc5,
    0xc6, 0xc7, 0xc8, 0xc9, 0xca, 0xd2, 0xd3, 0xd4, 0xd5, 0xd6, 0xd7, 0xd8, 0xd9, 0xda, 0xe1, 0xe2,
    0xe3, 0xe4, 0xe5, 0xe6, 0xe7, 0xe8, 0xe9, 0xea, 0xf1, 0xf2, 0xf3, 0xf4, 0xf5, 0xf6, 0xf7, 0xf8,
    0xf9, 0xfa,
];

const AC_CHROMA_BITS: [u8; 16] = [0, 2, 1, 2, 4, 4, 3, 4, 7, 5, 4, 4, 0, 1, 2, 0x77];
#[rustfmt::skip]
const AC_CHROMA_VALUES: [u8; 162] = [
    0x00, 0x01, 0x02, 0x03, 0x11, 0x04, 0x05, 0x21, 0x31, 0x06, 0x12, 0x41, 0x51, 0x07, 0x61, 0x71,
    0x13, 0x22, 0x32, 0x81, 0x08, 0x14, 0x42, 0x91, 0xa1, 0xb1, 0xc1, 0x09, 0x23, 0x33, 0x52, 0xf0,
    0x15, 0x62, 0x72, 0xd1, 0x0a, 0x16, 0x24, 0x34, 0xe1, 0x25, 0xf1, 0x17, 0x18, 0x19, 0x1a, 0x26,
    0x27, 0x28, 0x29, 0x2a, 0x35, 0x36, 0x37, 0x38, 0x39, 0x3a, 0x43, 0x44, 0x45, 0x46, 0x47, 0x48,
    0x49, 0x4a, 0x53, 0x54, 0x55, 0x56, 0x57, 0x58, 0x59, 0x5a, 0x63, 0x64, 0x65, 0x66, 0x67, 0x68,
    0x69, 0x6a, 0x73, 0x74, 0x75, 0x76, 0x77, 0x78, 0x79, 0x7a, 0x82, 0x83, 0x84, 0x85, 0x86, 0x87,
    0x88, 0x89, 0x8a, 0x92, 0x93, 0x94, 0x95, 0x96, 0x97, 0x98, 0x99, 0x9a, 0xa2, 0xa3, 0xa4, 0xa5,
    0xa6, 0xa7, 0xa8, 0xa9, 0xaa, 0xb2, 0xb3, 0xb4, 0xb5, 0xb6, 0xb7, 0xb8, 0xb9, 0xba, 0xc2, 0xc3,
    0xc4, 0xc5, 0xc6, 0xc7, 0xc8, 0xc9, 0xca, 0xd2, 0xd3, 0xd4, 0xd5, 0xd6, 0xd7, 0xd8, 0xd9, 0xda,
    0xe2, 0xe3, 0xe4, 0xe5, 0xe6, 0xe7, 0xe8, 0xe9, 0xea, 0xf2, 0xf3, 0xf4, 0xf5, 0xf6, 0xf7, 0xf8,
    0xf9, 0xfa,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ChromaSubsampling {
    #[serde(rename = "4:2:0")]
    Yuv420,
    #[serde(rename = "4:4:4")]
    Yuv444,
}

impl ChromaSubsampling {
    /// 4:2:0 below quality 90, 4:4:4 from 90 up.
    pub fn for_quality(quality: u8) -> Self {
        if quality < 90 {
            ChromaSubsampling::Yuv420
        } else {
            ChromaSubsampling::Yuv444
        }
    }
}

/// Quantization tables in natural order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantTables {
    pub luma: [u16; 64],
    pub chroma: [u16; 64],
}

fn check_quality(quality: u8) -> Result<()> {
    if !(1..=100).contains(&quality) {
        return Err(Error::InvalidParameter(format!(
            "JPEG quality {quality} outside 1..=100"
        )));
    }
    Ok(())
}

/// Percentage applied to the base tables: 5000 / q below 50, 200 - 2q otherwise.
pub fn quality_scale(quality: u8) -> Result<u32> {
    check_quality(quality)?;
    let q = u32::from(quality);
    Ok(if q < 50 { 5000 / q } else { 200 - 2 * q })
}

/// Scaled Annex K tables, each entry `round(base * scale / 100)` clamped to 1..=255.
pub fn quantization_tables(quality: u8) -> Result<QuantTables> {
    let scale = quality_scale(quality)?;
    let scaled = |base: &[u8; 64]| {
        let mut t = [0u16; 64];
        for (dst, &b) in t.iter_mut().zip(base) {
            *dst = ((u32::from(b) * scale + 50) / 100).clamp(1, 255) as u16;
        }
        t
    };
    Ok(QuantTables {
        luma: scaled(&ANNEX_K_LUMA),
        chroma: scaled(&ANNEX_K_CHROMA),
    })
}

/// Canonical Huffman codes indexed by symbol: (code, length).
struct HuffmanTable {
    codes: [(u16, u8); 256],
}

impl HuffmanTable {
    fn new(bits: &[u8; 16], values: &[u8]) -> Self {
        let mut codes = [(0u16, 0u8); 256];
        let mut code = 0u16;
        let mut k = 0;
        for (len_minus_one, &count) in bits.iter().enumerate() {
            for _ in 0..count {
                codes[values[k] as usize] = (code, len_minus_one as u8 + 1);
                code += 1;
                k += 1;
            }
            code <<= 1;
        }
        Self { codes }
    }
}

struct BitWriter {
    out: Vec<u8>,
    acc: u32,
    nbits: u8,
}

impl BitWriter {
    fn new(out: Vec<u8>) -> Self {
        Self { out, acc: 0, nbits: 0 }
    }

    fn write(&mut self, bits: u16, len: u8) {
        if len == 0 {
            return;
        }
        self.acc = (self.acc << len) | (u32::from(bits) & ((1 << len) - 1));
        self.nbits += len;
        while self.nbits >= 8 {
            let byte = (self.acc >> (self.nbits - 8)) as u8;
            self.out.push(byte);
            if byte == 0xff {
                self.out.push(0x00);
            }
            self.nbits -= 8;
        }
        self.acc &= (1 << self.nbits) - 1;
    }

    fn finish(mut self) -> Vec<u8> {
        if self.nbits > 0 {
            let pad = 8 - self.nbits;
            self.write((1 << pad) - 1, pad);
        }
        self.out
    }
}

fn magnitude_category(v: i32) -> u8 {
    (32 - v.unsigned_abs().leading_zeros()) as u8
}

fn coefficient_bits(v: i32, size: u8) -> u16 {
    if v < 0 {
        (v + (1 << size) - 1) as u16
    } else {
        v as u16
    }
}

/// Orthonormal 8x8 DCT-II basis, `basis[u][x]`.
fn dct_basis() -> [[f64; 8]; 8] {
    let mut m = [[0.0; 8]; 8];
    for (u, row) in m.iter_mut().enumerate() {
        let cu = if u == 0 { std::f64::consts::FRAC_1_SQRT_2 } else { 1.0 };
        for (x, v) in row.iter_mut().enumerate() {
            *v = 0.5 * cu * (((2 * x + 1) * u) as f64 * std::f64::consts::PI / 16.0).cos();
        }
    }
    m
}

fn forward_dct(block: &[f64; 64], basis: &[[f64; 8]; 8]) -> [f64; 64] {
    let mut tmp = [0.0; 64];
    for y in 0..8 {
        for u in 0..8 {
            tmp[y * 8 + u] = (0..8).map(|x| basis[u][x] * block[y * 8 + x]).sum();
        }
    }
    let mut out = [0.0; 64];
    for v in 0..8 {
        for u in 0..8 {
            out[v * 8 + u] = (0..8).map(|y| basis[v][y] * tmp[y * 8 + u]).sum();
        }
    }
    out
}

/// A level-shifted component plane padded to whole MCUs.
struct ComponentPlane {
    width: usize,
    values: Vec<f64>,
}

impl ComponentPlane {
    fn block(&self, bx: usize, by: usize) -> [f64; 64] {
        let mut b = [0.0; 64];
        for y in 0..8 {
            let row = (by * 8 + y) * self.width + bx * 8;
            b[y * 8..y * 8 + 8].copy_from_slice(&self.values[row..row + 8]);
        }
        b
    }
}

struct ComponentCoder<'a> {
    quant: &'a [u16; 64],
    dc: &'a HuffmanTable,
    ac: &'a HuffmanTable,
    prediction: i32,
}

impl ComponentCoder<'_> {
    fn encode_block(&mut self, block: &[f64; 64], basis: &[[f64; 8]; 8], w: &mut BitWriter) {
        let coeffs = forward_dct(block, basis);
        let mut q = [0i32; 64];
        for (k, &natural) in ZIGZAG.iter().enumerate() {
            q[k] = (coeffs[natural] / f64::from(self.quant[natural])).round() as i32;
        }

        let diff = q[0] - self.prediction;
        self.prediction = q[0];
        let size = magnitude_category(diff);
        let (code, len) = self.dc.codes[size as usize];
        w.write(code, len);
        w.write(coefficient_bits(diff, size), size);

        let mut run = 0u8;
        for &v in &q[1..] {
            if v == 0 {
                run += 1;
                continue;
            }
            while run > 15 {
                let (code, len) = self.ac.codes[0xf0];
                w.write(code, len);
                run -= 16;
            }
            let size = magnitude_category(v);
            let (code, len) = self.ac.codes[((run << 4) | size) as usize];
            w.write(code, len);
            w.write(coefficient_bits(v, size), size);
            run = 0;
        }
        if run > 0 {
            let (code, len) = self.ac.codes[0x00];
            w.write(code, len);
        }
    }
}

fn segment(out: &mut Vec<u8>, marker: u8, payload: &[u8]) {
    out.extend_from_slice(&[0xff, marker]);
    out.extend_from_slice(&((payload.len() + 2) as u16).to_be_bytes());
    out.extend_from_slice(payload);
}

fn dht_payload(class_and_id: u8, bits: &[u8; 16], values: &[u8]) -> Vec<u8> {
    let mut p = vec![class_and_id];
    p.extend_from_slice(bits);
    p.extend_from_slice(values);
    p
}

/// Builds a padded, level-shifted plane from a per-pixel function by edge replication.
fn padded_plane(
    width: usize,
    height: usize,
    padded_w: usize,
    padded_h: usize,
    f: impl Fn(usize, usize) -> f64,
) -> ComponentPlane {
    let mut values = Vec::with_capacity(padded_w * padded_h);
    for y in 0..padded_h {
        let sy = y.min(height - 1);
        for x in 0..padded_w {
            values.push(f(x.min(width - 1), sy) - 128.0);
        }
    }
    ComponentPlane {
        width: padded_w,
        values,
    }
}

fn halve(plane: &ComponentPlane) -> ComponentPlane {
    let w = plane.width / 2;
    let h = plane.values.len() / plane.width / 2;
    let mut values = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let at = |dx: usize, dy: usize| plane.values[(2 * y + dy) * plane.width + 2 * x + dx];
            values.push((at(0, 0) + at(1, 0) + at(0, 1) + at(1, 1)) / 4.0);
        }
    }
    ComponentPlane { width: w, values }
}

/// Encodes with the quality-dependent default subsampling.
pub fn encode_jpeg(img: &RasterImage, quality: u8) -> Result<Vec<u8>> {
    encode_jpeg_with(img, quality, ChromaSubsampling::for_quality(quality))
}

pub fn encode_jpeg_with(img: &RasterImage, quality: u8, subsampling: ChromaSubsampling) -> Result<Vec<u8>> {
    let tables = quantization_tables(quality)?;
    let (width, height) = (img.width(), img.height());
    if width > u16::MAX as usize || height > u16::MAX as usize {
        return Err(Error::InvalidDimensions(format!(
            "{width}x{height} exceeds JPEG limits"
        )));
    }
    let color = img.channels() == 3;
    let mcu = if color && subsampling == ChromaSubsampling::Yuv420 {
        16
    } else {
        8
    };
    let padded_w = width.div_ceil(mcu) * mcu;
    let padded_h = height.div_ceil(mcu) * mcu;

    let mut out = Vec::with_capacity(width * height / 4 + 1024);
    out.extend_from_slice(&[0xff, 0xd8]);
    segment(&mut out, 0xe0, b"JFIF\0\x01\x01\x00\x00\x01\x00\x01\x00\x00");

    let mut dqt = vec![0x00];
    dqt.extend(ZIGZAG.iter().map(|&i| tables.luma[i] as u8));
    if color {
        dqt.push(0x01);
        dqt.extend(ZIGZAG.iter().map(|&i| tables.chroma[i] as u8));
    }
    segment(&mut out, 0xdb, &dqt);

    let luma_sampling = if mcu == 16 { 0x22 } else { 0x11 };
    let mut sof = vec![8];
    sof.extend_from_slice(&(height as u16).to_be_bytes());
    sof.extend_from_slice(&(width as u16).to_be_bytes());
    if color {
        sof.extend_from_slice(&[3, 1, luma_sampling, 0, 2, 0x11, 1, 3, 0x11, 1]);
    } else {
        sof.extend_from_slice(&[1, 1, 0x11, 0]);
    }
    segment(&mut out, 0xc0, &sof);

    segment(&mut out, 0xc4, &dht_payload(0x00, &DC_LUMA_BITS, &DC_VALUES));
    segment(&mut out, 0xc4, &dht_payload(0x10, &AC_LUMA_BITS, &AC_LUMA_VALUES));
    if color {
        segment(&mut out, 0xc4, &dht_payload(0x01, &DC_CHROMA_BITS, &DC_VALUES));
        segment(&mut out, 0xc4, &dht_payload(0x11, &AC_CHROMA_BITS, &AC_CHROMA_VALUES));
        segment(&mut out, 0xda, &[3, 1, 0x00, 2, 0x11, 3, 0x11, 0, 63, 0]);
    } else {
        segment(&mut out, 0xda, &[1, 1, 0x00, 0, 63, 0]);
    }

    let dc_luma = HuffmanTable::new(&DC_LUMA_BITS, &DC_VALUES);
    let ac_luma = HuffmanTable::new(&AC_LUMA_BITS, &AC_LUMA_VALUES);
    let dc_chroma = HuffmanTable::new(&DC_CHROMA_BITS, &DC_VALUES);
    let ac_chroma = HuffmanTable::new(&AC_CHROMA_BITS, &AC_CHROMA_VALUES);
    let basis = dct_basis();
    let mut writer = BitWriter::new(out);

    let px = |x: usize, y: usize| img.pixel(x, y);
    let mut y_coder = ComponentCoder {
        quant: &tables.luma,
        dc: &dc_luma,
        ac: &ac_luma,
        prediction: 0,
    };

    if !color {
        let plane = padded_plane(width, height, padded_w, padded_h, |x, y| f64::from(px(x, y)[0]));
        for by in 0..padded_h / 8 {
            for bx in 0..padded_w / 8 {
                y_coder.encode_block(&plane.block(bx, by), &basis, &mut writer);
            }
        }
    } else {
        let rgb = |x: usize, y: usize| {
            let p = px(x, y);
            (f64::from(p[0]), f64::from(p[1]), f64::from(p[2]))
        };
        let luma = padded_plane(width, height, padded_w, padded_h, |x, y| {
            let (r, g, b) = rgb(x, y);
            0.299 * r + 0.587 * g + 0.114 * b
        });
        let mut cb = padded_plane(width, height, padded_w, padded_h, |x, y| {
            let (r, g, b) = rgb(x, y);
            -0.168_736 * r - 0.331_264 * g + 0.5 * b + 128.0
        });
        let mut cr = padded_plane(width, height, padded_w, padded_h, |x, y| {
            let (r, g, b) = rgb(x, y);
            0.5 * r - 0.418_688 * g - 0.081_312 * b + 128.0
        });
        if mcu == 16 {
            cb = halve(&cb);
            cr = halve(&cr);
        }
        let mut cb_coder = ComponentCoder {
            quant: &tables.chroma,
            dc: &dc_chroma,
            ac: &ac_chroma,
            prediction: 0,
        };
        let mut cr_coder = ComponentCoder {
            quant: &tables.chroma,
            dc: &dc_chroma,
            ac: &ac_chroma,
            prediction: 0,
        };
        let luma_blocks = mcu / 8;
        for my in 0..padded_h / mcu {
            for mx in 0..padded_w / mcu {
                for dy in 0..luma_blocks {
                    for dx in 0..luma_blocks {
                        let block = luma.block(mx * luma_blocks + dx, my * luma_blocks + dy);
                        y_coder.encode_block(&block, &basis, &mut writer);
                    }
                }
                cb_coder.encode_block(&cb.block(mx, my), &basis, &mut writer);
                cr_coder.encode_block(&cr.block(mx, my), &basis, &mut writer);
            }
        }
    }

    let mut out = writer.finish();
    out.extend_from_slice(&[0xff, 0xd9]);
    Ok(out)
}

/// Encode at `quality`, then decode back to pixels.
pub fn jpeg_round_trip(img: &RasterImage, quality: u8) -> Result<RasterImage> {
    let bytes = encode_jpeg(img, quality)?;
    decode_image(&bytes)
        .map(|l| l.image)
        .map_err(|reason| Error::Encode(format!("re-decoding JPEG failed: {reason}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::psnr;

    #[test]
    fn quality_50_gives_base_tables() {
        assert_eq!(quality_scale(50).unwrap(), 100);
        let t = quantization_tables(50).unwrap();
        assert!(t.luma.iter().zip(ANNEX_K_LUMA).all(|(&a, b)| a == u16::from(b)));
        assert!(t.chroma.iter().zip(ANNEX_K_CHROMA).all(|(&a, b)| a == u16::from(b)));
    }

    #[test]
    fn scaled_tables_clamp() {
        let t = quantization_tables(100).unwrap();
        assert!(t.luma.iter().all(|&v| v == 1));
        let t = quantization_tables(1).unwrap();
        assert!(t.luma.iter().chain(&t.chroma).all(|&v| v == 255));
        // q = 10: scale 500, luma DC 16 -> 80.
        assert_eq!(quantization_tables(10).unwrap().luma[0], 80);
        assert!(quantization_tables(0).is_err());
        assert!(quantization_tables(101).is_err());
    }

    #[test]
    fn subsampling_rule() {
        assert_eq!(ChromaSubsampling::for_quality(89), ChromaSubsampling::Yuv420);
        assert_eq!(ChromaSubsampling::for_quality(90), ChromaSubsampling::Yuv444);
    }

    #[test]
    fn category_and_bits() {
        assert_eq!(magnitude_category(0), 0);
        assert_eq!(magnitude_category(1), 1);
        assert_eq!(magnitude_category(-3), 2);
        assert_eq!(magnitude_category(1023), 10);
        assert_eq!(coefficient_bits(-1, 1), 0);
        assert_eq!(coefficient_bits(-3, 2), 0);
        assert_eq!(coefficient_bits(3, 2), 3);
    }

    fn sine_texture(w: usize, h: usize) -> RasterImage {
        RasterImage::from_fn(w, h, 3, |x, y, c| {
            (128.0 + 90.0 * ((x as f64 * 0.2 + c as f64).sin() * (y as f64 * 0.15).cos())) as u8
        })
        .unwrap()
    }

    #[test]
    fn decodes_with_independent_decoder() {
        let img = sine_texture(37, 29);
        for q in [10, 40, 75, 95] {
            let out = jpeg_round_trip(&img, q).unwrap();
            assert!(out.same_shape(&img));
            let p = psnr(&img, &out).unwrap();
            assert!(p > 22.0, "q={q} psnr={p}");
        }
        let gray = RasterImage::from_fn(20, 13, 1, |x, y, _| (x * 9 + y * 4) as u8).unwrap();
        let out = jpeg_round_trip(&gray, 30).unwrap();
        assert_eq!(out.channels(), 1);
        assert!(psnr(&gray, &out).unwrap() > 25.0);
    }

    #[test]
    fn matches_reference_encoder_at_full_chroma() {
        use image::codecs::jpeg::JpegEncoder;
        let img = sine_texture(64, 48);
        for q in [10, 20, 40, 75, 95] {
            let ours = decode_image(&encode_jpeg_with(&img, q, ChromaSubsampling::Yuv444).unwrap())
                .unwrap()
                .image;
            let mut buf = Vec::new();
            JpegEncoder::new_with_quality(&mut buf, q)
                .encode(img.samples(), 64, 48, image::ExtendedColorType::Rgb8)
                .unwrap();
            let theirs = decode_image(&buf).unwrap().image;
            let (a, b) = (psnr(&img, &ours).unwrap(), psnr(&img, &theirs).unwrap());
            assert!((a - b).abs() < 0.3, "q={q}: {a} vs {b}");
        }
    }

    #[test]
    fn constant_error_bounded_by_dc_step() {
        // A flat block keeps only its DC term, so the error is at most half
        // a DC step, which is Q_dc / 8 in sample units, plus pixel rounding.
        for q in [10, 20, 30, 40, 75] {
            let half_step = f64::from(quantization_tables(q).unwrap().luma[0]) / 16.0;
            for g in (0..=255).step_by(17) {
                let img = RasterImage::filled(24, 16, &[g, g, g]).unwrap();
                let out = jpeg_round_trip(&img, q).unwrap();
                let worst = out
                    .samples()
                    .iter()
                    .map(|&s| (f64::from(s) - f64::from(g)).abs())
                    .fold(0.0, f64::max);
                assert!(worst <= half_step.ceil() + 1.0, "q={q} g={g} err={worst}");
            }
        }
    }

    #[test]
    fn higher_quality_is_not_worse() {
        let img = RasterImage::from_fn(64, 48, 3, |x, y, c| {
            (128.0 + 90.0 * ((x as f64 * 0.4 + c as f64).sin() * (y as f64 * 0.3).cos())) as u8
        })
        .unwrap();
        let scores: Vec<f64> = [10, 20, 30, 40, 60, 90]
            .iter()
            .map(|&q| psnr(&img, &jpeg_round_trip(&img, q).unwrap()).unwrap())
            .collect();
        assert!(scores.windows(2).all(|w| w[0] <= w[1]), "{scores:?}");
    }
}
