//! Dataset ingestion (IDX, grayscale PNG/PGM), synthetic phantoms, and image
//! output. Byte-level parsers are exposed separately from the path helpers so
//! they can be driven by the fuzz targets.

use std::io::Cursor;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// IDX magic for unsigned-byte rank-3 data (image sets).
pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;

/// One grayscale image with values in [0, 1], shaped [1, H, W].
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSample {
    pub pixels: Tensor,
    pub source_id: String,
}

impl ImageSample {
    pub fn new(pixels: Tensor, source_id: impl Into<String>) -> Result<Self> {
        if pixels.shape().len() != 3 || pixels.shape()[0] != 1 {
            return Err(Error::shape(
                "image_sample",
                format!("expected [1,H,W], got {:?}", pixels.shape()),
            ));
        }
        Ok(ImageSample { pixels: pixels_clamped(pixels), source_id: source_id.into() })
    }

    pub fn height(&self) -> usize {
        self.pixels.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.pixels.shape()[2]
    }

    /// The [H, W] plane view.
    pub fn plane(&self) -> Tensor {
        self.pixels
            .reshaped(vec![self.height(), self.width()])
            .expect("single-channel image")
    }
}

fn pixels_clamped(t: Tensor) -> Tensor {
    t.map(|v| v.clamp(0.0, 1.0))
}

fn read_u32_be(bytes: &[u8], offset: usize) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(Error::Format { offset: bytes.len(), detail: "truncated header".into() });
    }
    Ok(u32::from_be_bytes([bytes[offset], bytes[offset + 1], bytes[offset + 2], bytes[offset + 3]]))
}

/// Parses an IDX unsigned-byte image file (the MNIST container format).
pub fn parse_idx_images(bytes: &[u8]) -> Result<Vec<ImageSample>> {
    let magic = read_u32_be(bytes, 0)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Format {
            offset: 0,
            detail: format!("bad IDX magic {:#010x}, expected {:#010x}", magic, IDX_IMAGES_MAGIC),
        });
    }
    let count = read_u32_be(bytes, 4)? as usize;
    let rows = read_u32_be(bytes, 8)? as usize;
    let cols = read_u32_be(bytes, 12)? as usize;
    let pixel_count = count
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or(Error::Format { offset: 4, detail: "dimension overflow".into() })?;
    let expected = 16 + pixel_count;
    if bytes.len() < expected {
        return Err(Error::Format {
            offset: bytes.len(),
            detail: format!("file ends early: expected {} bytes, got {}", expected, bytes.len()),
        });
    }
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let start = 16 + i * rows * cols;
        let data: Vec<f64> =
            bytes[start..start + rows * cols].iter().map(|&b| b as f64 / 255.0).collect();
        out.push(ImageSample {
            pixels: Tensor::new(vec![1, rows, cols], data)?,
            source_id: format!("idx[{}]", i),
        });
    }
    Ok(out)
}

pub fn load_idx(path: impl AsRef<Path>) -> Result<Vec<ImageSample>> {
    let bytes = std::fs::read(path.as_ref())?;
    parse_idx_images(&bytes)
}

/// Parses a binary PGM (P5) image with maxval <= 255.
pub fn parse_pgm(bytes: &[u8]) -> Result<ImageSample> {
    if bytes.len() < 2 || &bytes[0..2] != b"P5" {
        return Err(Error::Format { offset: 0, detail: "not a P5 PGM".into() });
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // skip whitespace and '#' comment lines
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if pos == start {
            return Err(Error::Format { offset: pos, detail: "expected a header integer".into() });
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("digits are ascii");
        *field = text
            .parse()
            .map_err(|_| Error::Format { offset: start, detail: "header integer too large".into() })?;
    }
    let (w, h, maxval) = (fields[0], fields[1], fields[2]);
    if maxval == 0 || maxval > 255 {
        return Err(Error::Format { offset: pos, detail: format!("unsupported maxval {}", maxval) });
    }
    if w == 0 || h == 0 {
        return Err(Error::Format { offset: pos, detail: "zero image dimension".into() });
    }
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::Format { offset: pos, detail: "missing whitespace after maxval".into() });
    }
    pos += 1;
    let need = w.checked_mul(h).ok_or(Error::Format { offset: 2, detail: "dimension overflow".into() })?;
    if bytes.len() < pos + need {
        return Err(Error::Format {
            offset: bytes.len(),
            detail: format!("pixel data ends early: expected {} bytes", need),
        });
    }
    let data: Vec<f64> =
        bytes[pos..pos + need].iter().map(|&b| b as f64 / maxval as f64).collect();
    ImageSample::new(Tensor::new(vec![1, h, w], data)?, "pgm")
}

/// Decodes an 8-bit grayscale PNG.
pub fn parse_grayscale_png(bytes: &[u8]) -> Result<ImageSample> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)?;
    let gray = match img {
        image::DynamicImage::ImageLuma8(g) => g,
        other => {
            return Err(Error::Format {
                offset: 0,
                detail: format!("unsupported PNG color type {:?}, need 8-bit grayscale", other.color()),
            })
        }
    };
    let (w, h) = (gray.width() as usize, gray.height() as usize);
    let data: Vec<f64> = gray.into_raw().iter().map(|&b| b as f64 / 255.0).collect();
    ImageSample::new(Tensor::new(vec![1, h, w], data)?, "png")
}

/// Loads an 8-bit grayscale PNG or PGM, dispatching on the file's magic bytes.
pub fn load_grayscale_image(path: impl AsRef<Path>) -> Result<ImageSample> {
    let bytes = std::fs::read(path.as_ref())?;
    let id = path.as_ref().display().to_string();
    let mut sample = if bytes.starts_with(b"\x89PNG") {
        parse_grayscale_png(&bytes)?
    } else if bytes.starts_with(b"P5") {
        parse_pgm(&bytes)?
    } else {
        return Err(Error::Format { offset: 0, detail: "unrecognized image format".into() });
    };
    sample.source_id = id;
    Ok(sample)
}

/// Bilinear resample to `h x w`.
pub fn resize_bilinear(img: &ImageSample, h: usize, w: usize) -> Result<ImageSample> {
    let (sh, sw) = (img.height(), img.width());
    if h == 0 || w == 0 {
        return Err(Error::Config("resize target must be positive".into()));
    }
    let src = img.pixels.data();
    let mut out = vec![0.0; h * w];
    let sy = sh as f64 / h as f64;
    let sx = sw as f64 / w as f64;
    for y in 0..h {
        // pixel-center mapping
        let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (sh - 1) as f64);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(sh - 1);
        let ty = fy - y0 as f64;
        for x in 0..w {
            let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (sw - 1) as f64);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(sw - 1);
            let tx = fx - x0 as f64;
            let top = src[y0 * sw + x0] * (1.0 - tx) + src[y0 * sw + x1] * tx;
            let bot = src[y1 * sw + x0] * (1.0 - tx) + src[y1 * sw + x1] * tx;
            out[y * w + x] = top * (1.0 - ty) + bot * ty;
        }
    }
    ImageSample::new(Tensor::new(vec![1, h, w], out)?, img.source_id.clone())
}

/// Center-crops to square then resizes to `size x size`.
pub fn prepare_square(img: &ImageSample, size: usize) -> Result<ImageSample> {
    let (h, w) = (img.height(), img.width());
    let side = h.min(w);
    let (y0, x0) = ((h - side) / 2, (w - side) / 2);
    let mut data = vec![0.0; side * side];
    for y in 0..side {
        for x in 0..side {
            data[y * side + x] = img.pixels.data()[(y0 + y) * w + (x0 + x)];
        }
    }
    let cropped = ImageSample::new(Tensor::new(vec![1, side, side], data)?, img.source_id.clone())?;
    if side == size {
        Ok(cropped)
    } else {
        resize_bilinear(&cropped, size, size)
    }
}

/// Zero-pads to `size x size` with the image centered (MNIST 28 -> 32 path).
pub fn pad_to(img: &ImageSample, size: usize) -> Result<ImageSample> {
    let (h, w) = (img.height(), img.width());
    if h > size || w > size {
        return Err(Error::Config(format!("cannot pad {}x{} up to {}", h, w, size)));
    }
    let (y0, x0) = ((size - h) / 2, (size - w) / 2);
    let mut data = vec![0.0; size * size];
    for y in 0..h {
        for x in 0..w {
            data[(y0 + y) * size + (x0 + x)] = img.pixels.data()[y * w + x];
        }
    }
    ImageSample::new(Tensor::new(vec![1, size, size], data)?, img.source_id.clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhantomKind {
    /// Sum of seeded Gaussian bumps, normalized to peak 1.
    Blobs,
    /// Concentric smooth annuli; radially symmetric by construction.
    Rings,
    /// Random axis-aligned rectangles at random gray levels.
    TextLike,
}

impl PhantomKind {
    pub fn parse(s: &str) -> Option<PhantomKind> {
        match s {
            "blobs" => Some(PhantomKind::Blobs),
            "rings" => Some(PhantomKind::Rings),
            "text" | "text-like" => Some(PhantomKind::TextLike),
            _ => None,
        }
    }
}

/// Scale applied to pixels to form the holography ground-truth phase;
/// keeps the phase inside (-pi, pi] so evaluation needs no unwrapping.
pub const PHANTOM_PHASE_SCALE: f64 = 0.8 * std::f64::consts::PI;

/// A synthetic test object plus its holography phase map (radians).
#[derive(Debug, Clone)]
pub struct Phantom {
    pub image: ImageSample,
    pub phase: Tensor,
}

/// Phase map 0.8*pi*pixels for any [0,1] image.
pub fn phase_map(img: &ImageSample) -> Tensor {
    img.plane().map(|v| PHANTOM_PHASE_SCALE * v)
}

pub fn make_phantom(kind: PhantomKind, size: usize, seed: u64) -> Result<Phantom> {
    if !size.is_power_of_two() {
        return Err(Error::Config(format!("phantom size {} must be a power of two", size)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = vec![0.0f64; size * size];
    match kind {
        PhantomKind::Blobs => {
            let bumps = 6 + (rng.random::<u64>() % 4) as usize;
            for _ in 0..bumps {
                let cy = rng.random::<f64>() * size as f64;
                let cx = rng.random::<f64>() * size as f64;
                let sigma = size as f64 * (0.05 + 0.10 * rng.random::<f64>());
                let amp = 0.4 + 0.6 * rng.random::<f64>();
                for y in 0..size {
                    for x in 0..size {
                        let dy = y as f64 - cy;
                        let dx = x as f64 - cx;
                        data[y * size + x] += amp * (-(dy * dy + dx * dx) / (2.0 * sigma * sigma)).exp();
                    }
                }
            }
            let peak = data.iter().cloned().fold(0.0f64, f64::max).max(1e-12);
            for v in data.iter_mut() {
                *v /= peak;
            }
        }
        PhantomKind::Rings => {
            let period = size as f64 / (3.0 + (rng.random::<u64>() % 4) as f64);
            let c = (size as f64 - 1.0) / 2.0;
            for y in 0..size {
                for x in 0..size {
                    let dy = y as f64 - c;
                    let dx = x as f64 - c;
                    let r = (dy * dy + dx * dx).sqrt();
                    data[y * size + x] = 0.5 * (1.0 + (2.0 * std::f64::consts::PI * r / period).cos());
                }
            }
        }
        PhantomKind::TextLike => {
            let rects = 8 + (rng.random::<u64>() % 6) as usize;
            for _ in 0..rects {
                let rh = 1 + (rng.random::<u64>() as usize) % (size / 4);
                let rw = 1 + (rng.random::<u64>() as usize) % (size / 3);
                let y0 = (rng.random::<u64>() as usize) % (size - rh);
                let x0 = (rng.random::<u64>() as usize) % (size - rw);
                let level = 0.3 + 0.7 * rng.random::<f64>();
                for y in y0..y0 + rh {
                    for x in x0..x0 + rw {
                        data[y * size + x] = level;
                    }
                }
            }
        }
    }
    let image = ImageSample::new(Tensor::new(vec![1, size, size], data)?, format!("phantom:{:?}", kind))?;
    let phase = phase_map(&image);
    Ok(Phantom { image, phase })
}

/// Writes a [0,1] image (shape [H,W] or [1,H,W]) as 8-bit grayscale PNG.
pub fn save_png(image: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_png(image)?;
    std::fs::write(path.as_ref(), bytes)?;
    Ok(())
}

pub fn encode_png(image: &Tensor) -> Result<Vec<u8>> {
    let (h, w) = match image.shape() {
        [h, w] => (*h, *w),
        [1, h, w] => (*h, *w),
        other => return Err(Error::shape("save_png", format!("expected a plane, got {:?}", other))),
    };
    let raw: Vec<u8> = image
        .data()
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let img = image::GrayImage::from_raw(w as u32, h as u32, raw)
        .expect("buffer length matches dimensions");
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png)?;
    Ok(out.into_inner())
}

/// Flattens an image to the length-n signal vector the CS model consumes.
pub fn flatten_signal(img: &ImageSample) -> Arc<Tensor> {
    Arc::new(img.pixels.reshaped(vec![img.pixels.numel()]).expect("same element count"))
}
