//! Images to feature fields: binary netpbm input and a seeded random
//! convolution.
//!
//! Weights are drawn in `(out channel, in channel, row, col)` order from the
//! SplitMix64 stream of [`crate::rng`], so a seed gives the same field on
//! every platform.

use std::io::Cursor;

use image::codecs::pnm::{PnmDecoder, PnmSubtype, SampleEncoding};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{FeatureField, FieldError};
use crate::rng;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("not a binary PGM (P5) or PPM (P6) file")]
    BadMagic,
    #[error("malformed netpbm header: {0}")]
    BadHeader(String),
    #[error("maxval {0} unsupported (only 255)")]
    UnsupportedMaxval(u32),
    #[error("truncated pixel data: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("image dimensions must be at least 1x1, got {height}x{width}")]
    Empty { height: usize, width: usize },
    #[error("image has {channels} channels (1 or 3 supported)")]
    Channels { channels: usize },
    #[error("expected {expected} pixel values, got {found}")]
    LengthMismatch { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    values: Vec<u8>,
}

impl Image {
    pub fn new(
        height: usize,
        width: usize,
        channels: usize,
        values: Vec<u8>,
    ) -> Result<Self, ImageError> {
        if height == 0 || width == 0 {
            return Err(ImageError::Empty { height, width });
        }
        if channels != 1 && channels != 3 {
            return Err(ImageError::Channels { channels });
        }
        let expected = height * width * channels;
        if values.len() != expected {
            return Err(ImageError::LengthMismatch {
                expected,
                found: values.len(),
            });
        }
        Ok(Self {
            height,
            width,
            channels,
            values,
        })
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

    /// Interleaved samples, row-major.
    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn pixel(&self, row: usize, col: usize) -> &[u8] {
        let o = (row * self.width + col) * self.channels;
        &self.values[o..o + self.channels]
    }

    /// Encodes as P5 (gray) or P6 (RGB) with maxval 255.
    pub fn to_pnm_bytes(&self) -> Vec<u8> {
        let magic = if self.channels == 1 { "P5" } else { "P6" };
        let mut out = format!("{magic}\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.values);
        out
    }

    /// Columns rotated right by `shift`, wrapping around.
    pub fn circular_shift_cols(&self, shift: usize) -> Image {
        let mut values = Vec::with_capacity(self.values.len());
        for row in 0..self.height {
            for col in 0..self.width {
                let src = (col + self.width - shift % self.width) % self.width;
                values.extend_from_slice(self.pixel(row, src));
            }
        }
        Image {
            values,
            ..self.clone()
        }
    }
}

/// Decodes a binary PGM (P5) or PPM (P6) with maxval 255.
pub fn read_image(bytes: &[u8]) -> Result<Image, ImageError> {
    if !(bytes.starts_with(b"P5") || bytes.starts_with(b"P6")) {
        return Err(ImageError::BadMagic);
    }
    let decoder =
        PnmDecoder::new(Cursor::new(bytes)).map_err(|e| ImageError::BadHeader(e.to_string()))?;
    let channels = match decoder.subtype() {
        PnmSubtype::Graymap(SampleEncoding::Binary) => 1,
        PnmSubtype::Pixmap(SampleEncoding::Binary) => 3,
        _ => return Err(ImageError::BadMagic),
    };
    let (cursor, header) = decoder.into_inner();
    if header.maximal_sample() != 255 {
        return Err(ImageError::UnsupportedMaxval(header.maximal_sample()));
    }
    let (width, height) = (header.width() as usize, header.height() as usize);
    let expected = width * height * channels;
    let payload = &bytes[cursor.position() as usize..];
    if payload.len() < expected {
        return Err(ImageError::Truncated {
            expected,
            found: payload.len(),
        });
    }
    Image::new(height, width, channels, payload[..expected].to_vec())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Nonlinearity {
    #[default]
    Relu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractorConfig {
    pub seed: u64,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub nonlinearity: Nonlinearity,
}

impl ExtractorConfig {
    pub fn new(seed: u64, out_channels: usize) -> Self {
        Self {
            seed,
            out_channels,
            kernel: 3,
            stride: 4,
            nonlinearity: Nonlinearity::Relu,
        }
    }
}

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("kernel must be odd and at least 1, got {0}")]
    InvalidKernel(usize),
    #[error("stride must be at least 1")]
    InvalidStride,
    #[error("at least one output channel required")]
    NoChannels,
    #[error("{height}x{width} image gives a {out_height}x{out_width} field (need at least 2x2)")]
    ImageTooSmall {
        height: usize,
        width: usize,
        out_height: usize,
        out_width: usize,
    },
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Output extent along one axis: `floor((valid − 1)/stride) + 1` with
/// `valid = extent − kernel + 1`, or 0 when no window fits.
pub fn output_extent(extent: usize, kernel: usize, stride: usize) -> usize {
    if extent < kernel {
        return 0;
    }
    (extent - kernel) / stride + 1
}

/// Valid convolution with seeded uniform weights in `[−s, s]`,
/// `s = 1/√(kernel²·in_channels)`, strided, then ReLU. Pixels are scaled to
/// `[0, 1]`; the output spacing is 1.
pub fn extract_features(img: &Image, cfg: &ExtractorConfig) -> Result<FeatureField, ExtractError> {
    let k = cfg.kernel;
    if k == 0 || k.is_multiple_of(2) {
        return Err(ExtractError::InvalidKernel(k));
    }
    if cfg.stride == 0 {
        return Err(ExtractError::InvalidStride);
    }
    if cfg.out_channels == 0 {
        return Err(ExtractError::NoChannels);
    }
    let out_h = output_extent(img.height, k, cfg.stride);
    let out_w = output_extent(img.width, k, cfg.stride);
    if out_h < 2 || out_w < 2 {
        return Err(ExtractError::ImageTooSmall {
            height: img.height,
            width: img.width,
            out_height: out_h,
            out_width: out_w,
        });
    }
    let cin = img.channels;
    let s = 1.0 / ((k * k * cin) as f64).sqrt();
    let mut r = rng::seeded(cfg.seed);
    let taps = cin * k * k;
    let weights: Vec<f64> = (0..cfg.out_channels * taps)
        .map(|_| rng::uniform(&mut r, -s, s))
        .collect();
    let pixels: Vec<f64> = img.values.iter().map(|&v| v as f64 / 255.0).collect();

    let mut window = vec![0.0; taps];
    let mut values = Vec::with_capacity(out_h * out_w * cfg.out_channels);
    for orow in 0..out_h {
        for ocol in 0..out_w {
            let (r0, c0) = (orow * cfg.stride, ocol * cfg.stride);
            for ci in 0..cin {
                for ky in 0..k {
                    for kx in 0..k {
                        let p = ((r0 + ky) * img.width + c0 + kx) * cin + ci;
                        window[(ci * k + ky) * k + kx] = pixels[p];
                    }
                }
            }
            for w in weights.chunks(taps) {
                let z: f64 = w.iter().zip(&window).map(|(a, b)| a * b).sum();
                values.push(match cfg.nonlinearity {
                    Nonlinearity::Relu => z.max(0.0),
                });
            }
        }
    }
    Ok(FeatureField::new(
        out_h,
        out_w,
        cfg.out_channels,
        1.0,
        values,
    )?)
}
