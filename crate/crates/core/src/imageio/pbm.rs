//! Binary PBM (P4): bit-packed rows, MSB first, each row padded to a byte.
//! A set PBM bit means black, i.e. our pixel value 0.

use super::{BinaryImage, ImageError, BLACK, WHITE};

pub fn encode_pbm(img: &BinaryImage) -> Vec<u8> {
    let stride = img.width().div_ceil(8);
    let header = format!("P4\n{} {}\n", img.width(), img.height());
    let mut out = Vec::with_capacity(header.len() + stride * img.height());
    out.extend_from_slice(header.as_bytes());
    for y in 0..img.height() {
        let mut packed = vec![0u8; stride];
        for (x, &p) in img.row(y).iter().enumerate() {
            if p == BLACK {
                packed[x / 8] |= 0x80 >> (x % 8);
            }
        }
        out.extend_from_slice(&packed);
    }
    out
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self) -> Result<usize, ImageError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(ImageError::CorruptFile("expected a number in PBM header".into()));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| ImageError::CorruptFile("PBM dimension out of range".into()))
    }
}

pub fn decode_pbm(bytes: &[u8]) -> Result<BinaryImage, ImageError> {
    if !bytes.starts_with(b"P4") {
        return Err(ImageError::UnsupportedFormat("not a P4 PBM".into()));
    }
    let mut h = Header { bytes, pos: 2 };
    let width = h.number()?;
    let height = h.number()?;
    if width == 0 || height == 0 {
        return Err(ImageError::CorruptFile(format!("zero dimension {width}x{height}")));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(h.pos) {
        Some(b) if b.is_ascii_whitespace() => h.pos += 1,
        _ => return Err(ImageError::CorruptFile("missing raster separator".into())),
    }
    let stride = width.div_ceil(8);
    let need = stride
        .checked_mul(height)
        .ok_or_else(|| ImageError::CorruptFile("PBM too large".into()))?;
    let raster = &bytes[h.pos..];
    if raster.len() < need {
        return Err(ImageError::CorruptFile(format!(
            "truncated raster: {} of {need} bytes",
            raster.len()
        )));
    }
    let mut pixels = Vec::with_capacity(width * height);
    for y in 0..height {
        let row = &raster[y * stride..(y + 1) * stride];
        for x in 0..width {
            let bit = row[x / 8] & (0x80 >> (x % 8));
            pixels.push(if bit != 0 { BLACK } else { WHITE });
        }
    }
    BinaryImage::from_pixels(width, height, pixels)
}
