//! 8-bit grayscale frames and the frame-sequence container.
//!
//! Container layout (all integers little-endian):
//!
//! ```text
//! magic   8 bytes  "AVSEFRM1"
//! count   u32      number of frames
//! height  u32
//! width   u32
//! fps_milli u32    frame rate x 1000 (25 fps -> 25000)
//! pixels  count * height * width bytes, frame-major then row-major
//! ```

use std::path::Path;

use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"AVSEFRM1";
const HEADER: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(height: usize, width: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != height * width {
            return Err(Error::shape(height * width, pixels.len()));
        }
        Ok(Self { height, width, pixels })
    }

    pub fn filled(height: usize, width: usize, value: u8) -> Self {
        Self { height, width, pixels: vec![value; height * width] }
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: u8) {
        self.pixels[row * self.width + col] = v;
    }

    /// Box-filter downsampling by an integer factor.
    pub fn downsample(&self, factor: usize) -> Result<GrayImage> {
        if factor == 0 || self.height % factor != 0 || self.width % factor != 0 {
            return Err(Error::InvalidArgument(format!(
                "{}x{} is not divisible by {factor}",
                self.height, self.width
            )));
        }
        let (h, w) = (self.height / factor, self.width / factor);
        let area = (factor * factor) as u32;
        let mut out = Vec::with_capacity(h * w);
        for r in 0..h {
            for c in 0..w {
                let mut acc = 0u32;
                for dr in 0..factor {
                    for dc in 0..factor {
                        acc += self.get(r * factor + dr, c * factor + dc) as u32;
                    }
                }
                out.push(((acc + area / 2) / area) as u8);
            }
        }
        GrayImage::new(h, w, out)
    }
}

pub const FACE_SIZE: usize = 256;
pub const MOUTH_SIZE: usize = 128;

/// Lower-centre 128x128 region of an aligned 256x256 face:
/// rows `[128, 256)`, columns `[64, 192)`.
pub fn crop_mouth(face: &GrayImage) -> Result<GrayImage> {
    if face.height != FACE_SIZE || face.width != FACE_SIZE {
        return Err(Error::shape("256x256", format!("{}x{}", face.height, face.width)));
    }
    let (r0, c0) = (FACE_SIZE - MOUTH_SIZE, (FACE_SIZE - MOUTH_SIZE) / 2);
    let mut pixels = Vec::with_capacity(MOUTH_SIZE * MOUTH_SIZE);
    for r in r0..r0 + MOUTH_SIZE {
        pixels.extend_from_slice(&face.pixels[r * FACE_SIZE + c0..r * FACE_SIZE + c0 + MOUTH_SIZE]);
    }
    GrayImage::new(MOUTH_SIZE, MOUTH_SIZE, pixels)
}

/// Horizontal and vertical radii, in pixels, of the synthetic mouth opening
/// drawn by [`render_mouth_frames`].
pub fn mouth_radii(opening: f64, size: usize) -> (f64, f64) {
    let o = if opening.is_finite() { opening.clamp(0.0, 2.0) } else { 0.0 };
    let s = size as f64;
    (0.30 * s * (1.0 + 0.1 * o), 0.02 * s + 0.22 * s * o)
}

/// Synthetic mouth crops: a dark elliptical opening on a lighter face, its
/// height following `opening` (one value per frame, nominally in [0, 1.25]).
pub fn render_mouth_frames(opening: &[f64], size: usize) -> Result<FrameSequence> {
    if size < 8 {
        return Err(Error::InvalidArgument(format!("mouth crop of {size} pixels is too small")));
    }
    let c = (size as f64 - 1.0) / 2.0;
    let frames = opening
        .iter()
        .map(|&o| {
            let (rx, ry) = mouth_radii(o, size);
            let mut img = GrayImage::filled(size, size, 170);
            for r in 0..size {
                for col in 0..size {
                    let d = ((r as f64 - c) / ry).powi(2) + ((col as f64 - c) / rx).powi(2);
                    if d <= 1.0 {
                        img.set(r, col, 40);
                    } else if d <= 1.3 {
                        img.set(r, col, 110);
                    }
                }
            }
            img
        })
        .collect();
    FrameSequence::new(size, size, frames)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameSequence {
    pub height: usize,
    pub width: usize,
    pub fps_milli: u32,
    pub frames: Vec<GrayImage>,
}

impl FrameSequence {
    pub fn new(height: usize, width: usize, frames: Vec<GrayImage>) -> Result<Self> {
        if let Some(f) = frames.iter().find(|f| f.height != height || f.width != width) {
            return Err(Error::shape(format!("{height}x{width}"), format!("{}x{}", f.height, f.width)));
        }
        Ok(Self { height, width, fps_milli: 25_000, frames })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER + self.frames.len() * self.height * self.width);
        out.extend_from_slice(MAGIC);
        for v in [self.frames.len() as u32, self.height as u32, self.width as u32, self.fps_milli] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for f in &self.frames {
            out.extend_from_slice(&f.pixels);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER || &bytes[..8] != MAGIC {
            return Err(Error::Format("not a frame-sequence container".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[8 + 4 * i..12 + 4 * i].try_into().unwrap()) as usize;
        let (count, height, width, fps_milli) = (word(0), word(1), word(2), word(3) as u32);
        let frame_len = height * width;
        if bytes.len() != HEADER + count * frame_len {
            return Err(Error::Format(format!(
                "container declares {count} frames of {height}x{width} but holds {} pixel bytes",
                bytes.len() - HEADER
            )));
        }
        let frames = bytes[HEADER..]
            .chunks_exact(frame_len.max(1))
            .take(count)
            .map(|c| GrayImage { height, width, pixels: c.to_vec() })
            .collect();
        Ok(Self { height, width, fps_milli, frames })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
