//! Bilinear resampling with half-pixel centre alignment.

use crate::imageio::GrayImage;

/// `round(dim * factor)`, at least 1.
pub fn scaled_size(width: usize, height: usize, factor: f64) -> (usize, usize) {
    let scale = |d: usize| ((d as f64 * factor).round() as usize).max(1);
    (scale(width), scale(height))
}

/// Source sample positions and weights for each destination index.
fn taps(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let ratio = src as f64 / dst as f64;
    (0..dst)
        .map(|d| {
            let pos = ((d as f64 + 0.5) * ratio - 0.5).clamp(0.0, (src - 1) as f64);
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(src - 1);
            (lo, hi, pos - lo as f64)
        })
        .collect()
}

/// Resizes to exactly `width` x `height`. Same-size calls return a copy.
pub fn resize_bilinear(img: &GrayImage, width: usize, height: usize) -> GrayImage {
    let xs = taps(img.width(), width);
    let ys = taps(img.height(), height);
    // horizontal pass into f64 rows, then vertical
    let rows: Vec<Vec<f64>> = (0..img.height())
        .map(|y| {
            xs.iter()
                .map(|&(lo, hi, t)| {
                    let a = f64::from(img.get(lo, y));
                    let b = f64::from(img.get(hi, y));
                    a + (b - a) * t
                })
                .collect()
        })
        .collect();
    let mut pixels = Vec::with_capacity(width * height);
    for &(lo, hi, t) in &ys {
        for (&a, &b) in rows[lo].iter().zip(&rows[hi]) {
            pixels.push((a + (b - a) * t).round().clamp(0.0, 255.0) as u8);
        }
    }
    GrayImage::from_pixels(width, height, pixels).expect("dimensions are positive")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_scale_is_identity() {
        let img = GrayImage::from_pixels(3, 2, vec![0, 10, 255, 40, 50, 60]).unwrap();
        assert_eq!(resize_bilinear(&img, 3, 2), img);
    }

    #[test]
    fn doubling_interpolates_between_centres() {
        let img = GrayImage::from_pixels(2, 1, vec![0, 200]).unwrap();
        let up = resize_bilinear(&img, 4, 1);
        // centres at -0.25, 0.25, 0.75, 1.25 in source space
        assert_eq!(up.pixels(), &[0, 50, 150, 200]);
    }

    #[test]
    fn size_rounding() {
        assert_eq!(scaled_size(827, 1169, 0.75), (620, 877));
        assert_eq!(scaled_size(1, 1, 0.3), (1, 1));
    }
}
