//! ACC, PSNR and SSIM. PSNR and SSIM run on the 8-bit expansion of a
//! binary image (black 0, white 255).

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{BinaryImage, ImageError, BLACK};

const MAX_VALUE: f64 = 255.0;
const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

/// Percentage of positions where `extracted` matches `embedded`.
pub fn accuracy(extracted: &[u8], embedded: &[u8]) -> Result<f64, ImageError> {
    if extracted.len() != embedded.len() {
        return Err(ImageError::LengthMismatch(extracted.len(), embedded.len()));
    }
    if embedded.is_empty() {
        return Err(ImageError::EmptySequence);
    }
    let correct = extracted.iter().zip(embedded).filter(|(a, b)| a == b).count();
    Ok(correct as f64 / embedded.len() as f64 * 100.0)
}

/// Peak signal-to-noise ratio. Identical images have no finite value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Psnr {
    Infinite,
    Db(f64),
}

impl Psnr {
    /// `f64::INFINITY` for [`Psnr::Infinite`].
    pub fn value(self) -> f64 {
        match self {
            Psnr::Infinite => f64::INFINITY,
            Psnr::Db(v) => v,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Psnr::Infinite)
    }

    /// Mean over the finite entries; `Infinite` when there are none.
    pub fn mean(values: impl IntoIterator<Item = Psnr>) -> Psnr {
        let (sum, n) = values
            .into_iter()
            .filter_map(|p| match p {
                Psnr::Db(v) => Some(v),
                Psnr::Infinite => None,
            })
            .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
        if n == 0 {
            Psnr::Infinite
        } else {
            Psnr::Db(sum / n as f64)
        }
    }
}

impl std::fmt::Display for Psnr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Psnr::Infinite => write!(f, "inf"),
            Psnr::Db(v) => write!(f, "{v:.2} dB"),
        }
    }
}

impl Serialize for Psnr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Psnr::Infinite => s.serialize_str("inf"),
            Psnr::Db(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Psnr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(Psnr::Db(v)),
            Repr::Text(t) if t == "inf" => Ok(Psnr::Infinite),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("bad PSNR value {t:?}"))),
        }
    }
}

pub fn psnr(a: &BinaryImage, b: &BinaryImage) -> Result<Psnr, ImageError> {
    let diff = a.hamming(b)?;
    if diff == 0 {
        return Ok(Psnr::Infinite);
    }
    let n = (a.width() * a.height()) as f64;
    let mse = MAX_VALUE * MAX_VALUE * diff as f64 / n;
    Ok(Psnr::Db(10.0 * (MAX_VALUE * MAX_VALUE / mse).log10()))
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-(d * d) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Separable "valid" filtering: output is (w - 10) x (h - 10).
fn filter_valid(src: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;
    let mut horiz = vec![0.0; ow * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        let out = &mut horiz[y * ow..(y + 1) * ow];
        for (x, o) in out.iter_mut().enumerate() {
            *o = row[x..x + SSIM_WINDOW].iter().zip(k).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for (i, kv) in k.iter().enumerate() {
            let src_row = &horiz[(y + i) * ow..(y + i + 1) * ow];
            let dst = &mut out[y * ow..(y + 1) * ow];
            for (d, s) in dst.iter_mut().zip(src_row) {
                *d += kv * s;
            }
        }
    }
    out
}

/// Single-scale SSIM with an 11x11 Gaussian window (sigma 1.5), averaged
/// over every window position fully inside the image.
pub fn ssim(a: &BinaryImage, b: &BinaryImage) -> Result<f64, ImageError> {
    a.check_same_size(b)?;
    let (w, h) = (a.width(), a.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(ImageError::ImageTooSmall {
            width: w,
            height: h,
            window: SSIM_WINDOW,
        });
    }
    let expand = |img: &BinaryImage| -> Vec<f64> {
        img.pixels()
            .iter()
            .map(|&p| if p == BLACK { 0.0 } else { MAX_VALUE })
            .collect()
    };
    let x = expand(a);
    let y = expand(b);
    let k = gaussian_kernel();
    let mu_x = filter_valid(&x, w, h, &k);
    let mu_y = filter_valid(&y, w, h, &k);
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();
    let e_xx = filter_valid(&xx, w, h, &k);
    let e_yy = filter_valid(&yy, w, h, &k);
    let e_xy = filter_valid(&xy, w, h, &k);

    let c1 = (SSIM_K1 * MAX_VALUE).powi(2);
    let c2 = (SSIM_K2 * MAX_VALUE).powi(2);
    let total: f64 = (0..mu_x.len())
        .map(|i| {
            let (mx, my) = (mu_x[i], mu_y[i]);
            let var_x = e_xx[i] - mx * mx;
            let var_y = e_yy[i] - my * my;
            let cov = e_xy[i] - mx * my;
            ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                / ((mx * mx + my * my + c1) * (var_x + var_y + c2))
        })
        .sum();
    Ok(total / mu_x.len() as f64)
}
