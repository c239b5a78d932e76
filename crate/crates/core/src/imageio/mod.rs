//! Binary page images, lossless file I/O and quality metrics.
//!
//! Pixel convention: `0` is black (ink), `1` is white (paper). Every
//! algorithm in this crate works on [`BinaryImage`]; [`GrayImage`] only
//! exists as an intermediate form for attacks and ingestion.

mod metrics;
mod pbm;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use metrics::{accuracy, psnr, ssim, Psnr};
pub use pbm::{decode_pbm, encode_pbm};

pub const BLACK: u8 = 0;
pub const WHITE: u8 = 1;

/// Default threshold used when a grayscale file is ingested.
pub const DEFAULT_THRESHOLD: u8 = 128;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt image file: {0}")]
    CorruptFile(String),
    #[error("image dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("image too small for a {window}x{window} window: {width}x{height}")]
    ImageTooSmall {
        width: usize,
        height: usize,
        window: usize,
    },
    #[error("bit sequences differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty bit sequence")]
    EmptySequence,
    #[error("invalid pixel data: {0}")]
    InvalidPixels(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Axis-aligned rectangle in page pixels, half-open on the right and bottom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
}

impl Rect {
    pub fn new(x0: usize, y0: usize, width: usize, height: usize) -> Self {
        Self {
            x0,
            y0,
            width,
            height,
        }
    }

    /// Exclusive right edge.
    pub fn x1(&self) -> usize {
        self.x0 + self.width
    }

    /// Exclusive bottom edge.
    pub fn y1(&self) -> usize {
        self.y0 + self.height
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.x0 >= self.x0 && other.x1() <= self.x1() && other.y0 >= self.y0 && other.y1() <= self.y1()
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x < self.x1() && y >= self.y0 && y < self.y1()
    }

    pub fn translate(&self, dx: usize, dy: usize) -> Self {
        Self::new(self.x0 + dx, self.y0 + dy, self.width, self.height)
    }
}

/// Rectangular grid of black/white pixels stored row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl std::fmt::Debug for BinaryImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "BinaryImage {}x{}", self.width, self.height)?;
        if self.width <= 64 && self.height <= 64 {
            for y in 0..self.height {
                let row: String = self
                    .row(y)
                    .iter()
                    .map(|&p| if p == BLACK { '#' } else { '.' })
                    .collect();
                writeln!(f, "{row}")?;
            }
        }
        Ok(())
    }
}

impl BinaryImage {
    /// All-white image. Panics on a zero dimension.
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, WHITE)
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        assert!(value <= 1);
        Self {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::InvalidPixels(format!(
                "zero dimension {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(ImageError::InvalidPixels(format!(
                "expected {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        if let Some(bad) = pixels.iter().find(|&&p| p > 1) {
            return Err(ImageError::InvalidPixels(format!("pixel value {bad}")));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Parses rows of `#` (black) and `.` (white). Handy for fixtures.
    pub fn from_ascii(rows: &[&str]) -> Result<Self, ImageError> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.chars().count());
        let mut pixels = Vec::with_capacity(width * height);
        for row in rows {
            if row.chars().count() != width {
                return Err(ImageError::InvalidPixels("ragged ascii rows".into()));
            }
            for c in row.chars() {
                pixels.push(match c {
                    '#' | 'X' | '1' => BLACK,
                    '.' | ' ' | '0' => WHITE,
                    other => {
                        return Err(ImageError::InvalidPixels(format!(
                            "unexpected character {other:?}"
                        )))
                    }
                });
            }
        }
        Self::from_pixels(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn bounds(&self) -> Rect {
        Rect::new(0, 0, self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn is_black(&self, x: usize, y: usize) -> bool {
        self.get(x, y) == BLACK
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        debug_assert!(value <= 1);
        self.pixels[y * self.width + x] = value;
    }

    pub fn row(&self, y: usize) -> &[u8] {
        &self.pixels[y * self.width..(y + 1) * self.width]
    }

    pub fn column(&self, x: usize) -> Vec<u8> {
        (0..self.height).map(|y| self.get(x, y)).collect()
    }

    pub fn count_black(&self) -> usize {
        self.pixels.iter().filter(|&&p| p == BLACK).count()
    }

    pub fn has_black(&self) -> bool {
        self.pixels.contains(&BLACK)
    }

    pub fn transpose(&self) -> Self {
        let mut out = Vec::with_capacity(self.pixels.len());
        for x in 0..self.width {
            for y in 0..self.height {
                out.push(self.get(x, y));
            }
        }
        Self {
            width: self.height,
            height: self.width,
            pixels: out,
        }
    }

    /// Copy of the pixels inside `rect`. Panics if `rect` leaves the image.
    pub fn crop(&self, rect: Rect) -> Self {
        assert!(
            self.bounds().contains_rect(&rect) && rect.width > 0 && rect.height > 0,
            "crop {rect:?} outside {}x{}",
            self.width,
            self.height
        );
        let mut pixels = Vec::with_capacity(rect.width * rect.height);
        for y in rect.y0..rect.y1() {
            pixels.extend_from_slice(&self.row(y)[rect.x0..rect.x1()]);
        }
        Self {
            width: rect.width,
            height: rect.height,
            pixels,
        }
    }

    /// Writes `src` with its top-left corner at `(x0, y0)`.
    pub fn paste(&mut self, src: &BinaryImage, x0: usize, y0: usize) {
        assert!(x0 + src.width <= self.width && y0 + src.height <= self.height);
        for y in 0..src.height {
            let dst = (y0 + y) * self.width + x0;
            self.pixels[dst..dst + src.width].copy_from_slice(src.row(y));
        }
    }

    /// Smallest rectangle holding every black pixel, if any.
    pub fn black_bbox(&self) -> Option<Rect> {
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        for y in 0..self.height {
            for (x, &p) in self.row(y).iter().enumerate() {
                if p == BLACK {
                    x0 = x0.min(x);
                    x1 = x1.max(x);
                    y0 = y0.min(y);
                    y1 = y1.max(y);
                }
            }
        }
        (x0 != usize::MAX).then(|| Rect::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1))
    }

    /// Number of positions where the two images differ.
    pub fn hamming(&self, other: &BinaryImage) -> Result<usize, ImageError> {
        self.check_same_size(other)?;
        Ok(self
            .pixels
            .iter()
            .zip(&other.pixels)
            .filter(|(a, b)| a != b)
            .count())
    }

    /// Copy with a white border of the given widths.
    pub fn pad(&self, left: usize, top: usize, right: usize, bottom: usize) -> Self {
        let mut out = Self::new(self.width + left + right, self.height + top + bottom);
        out.paste(self, left, top);
        out
    }

    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            pixels: self
                .pixels
                .iter()
                .map(|&p| if p == BLACK { 0 } else { 255 })
                .collect(),
        }
    }

    pub(crate) fn check_same_size(&self, other: &BinaryImage) -> Result<(), ImageError> {
        if self.width != other.width || self.height != other.height {
            return Err(ImageError::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        Ok(())
    }
}

/// 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn from_pixels(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(ImageError::InvalidPixels(format!(
                "{} pixels for {width}x{height}",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }
}

/// Output pixel is black iff the input intensity is below `threshold`.
pub fn binarize(img: &GrayImage, threshold: u8) -> BinaryImage {
    BinaryImage {
        width: img.width,
        height: img.height,
        pixels: img
            .pixels
            .iter()
            .map(|&v| if v < threshold { BLACK } else { WHITE })
            .collect(),
    }
}

/// Reads a P4 PBM, or an 8-bit grayscale PNG binarized at
/// [`DEFAULT_THRESHOLD`].
pub fn load_image(path: impl AsRef<Path>) -> Result<BinaryImage, ImageError> {
    load_image_with_threshold(path, DEFAULT_THRESHOLD)
}

pub fn load_image_with_threshold(
    path: impl AsRef<Path>,
    threshold: u8,
) -> Result<BinaryImage, ImageError> {
    let bytes = fs::read(path.as_ref())?;
    if bytes.starts_with(b"P4") {
        return decode_pbm(&bytes);
    }
    if bytes.starts_with(b"\x89PNG") {
        let gray = decode_png_gray(&bytes)?;
        return Ok(binarize(&gray, threshold));
    }
    Err(ImageError::UnsupportedFormat(format!(
        "{}: expected P4 PBM or grayscale PNG",
        path.as_ref().display()
    )))
}

fn decode_png_gray(bytes: &[u8]) -> Result<GrayImage, ImageError> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| ImageError::CorruptFile(e.to_string()))?;
    match img {
        image::DynamicImage::ImageLuma8(luma) => {
            let (w, h) = luma.dimensions();
            GrayImage::from_pixels(w as usize, h as usize, luma.into_raw())
        }
        other => Err(ImageError::UnsupportedFormat(format!(
            "PNG color type {:?}; only 8-bit grayscale is accepted",
            other.color()
        ))),
    }
}

/// Writes `img` as P4 PBM.
pub fn save_image(img: &BinaryImage, path: impl AsRef<Path>) -> Result<(), ImageError> {
    fs::write(path, encode_pbm(img))?;
    Ok(())
}

/// Writes an 8-bit grayscale PNG (0 or 255). For viewing only.
pub fn save_png(img: &BinaryImage, path: impl AsRef<Path>) -> Result<(), ImageError> {
    let gray = img.to_gray();
    image::save_buffer(
        path,
        gray.pixels(),
        gray.width() as u32,
        gray.height() as u32,
        image::ExtendedColorType::L8,
    )
    .map_err(|e| match e {
        image::ImageError::IoError(io) => ImageError::Io(io),
        other => ImageError::UnsupportedFormat(other.to_string()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binarize_definition() {
        let g = GrayImage::from_pixels(3, 1, vec![0, 127, 200]).unwrap();
        let b = binarize(&g, 128);
        assert_eq!(b.pixels(), &[BLACK, BLACK, WHITE]);
    }

    #[test]
    fn binarize_fixed_point_all_thresholds() {
        let b = BinaryImage::from_ascii(&["#.#.", "..##", "#..."]).unwrap();
        for t in 1..=254u8 {
            assert_eq!(binarize(&b.to_gray(), t), b, "threshold {t}");
        }
    }

    #[test]
    fn transpose_is_involution() {
        let b = BinaryImage::from_ascii(&["#..", "##.", "..#", "#.#"]).unwrap();
        let t = b.transpose();
        assert_eq!((t.width(), t.height()), (4, 3));
        assert_eq!(t.get(1, 0), b.get(0, 1));
        assert_eq!(t.transpose(), b);
    }

    #[test]
    fn crop_and_bbox() {
        let b = BinaryImage::from_ascii(&["....", ".##.", "..#.", "...."]).unwrap();
        let bbox = b.black_bbox().unwrap();
        assert_eq!(bbox, Rect::new(1, 1, 2, 2));
        let c = b.crop(bbox);
        assert_eq!(c, BinaryImage::from_ascii(&["##", ".#"]).unwrap());
        assert!(BinaryImage::new(3, 3).black_bbox().is_none());
    }

    #[test]
    fn from_pixels_rejects_bad_values() {
        assert!(BinaryImage::from_pixels(2, 1, vec![0, 2]).is_err());
        assert!(BinaryImage::from_pixels(2, 2, vec![0, 1]).is_err());
        assert!(BinaryImage::from_pixels(0, 2, vec![]).is_err());
    }

    #[test]
    fn png_all_white_loads_as_white() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("white.png");
        image::save_buffer(&path, &[255u8; 64], 8, 8, image::ExtendedColorType::L8).unwrap();
        let img = load_image(&path).unwrap();
        assert_eq!((img.width(), img.height()), (8, 8));
        assert!(img.pixels().iter().all(|&p| p == WHITE));
    }

    #[test]
    fn png_color_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rgb.png");
        image::save_buffer(&path, &[0u8; 12], 2, 2, image::ExtendedColorType::Rgb8).unwrap();
        assert!(matches!(
            load_image(&path),
            Err(ImageError::UnsupportedFormat(_))
        ));
    }

    #[test]
    fn unknown_format_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.bin");
        fs::write(&path, b"GIF89a").unwrap();
        assert!(matches!(
            load_image(&path),
            Err(ImageError::UnsupportedFormat(_))
        ));
    }
}
