//! Seedable simulation of digital transmission attacks.
//!
//! Every attack works on an 8-bit gray rendering of the page and ends with
//! re-binarization at 128, so the reader always sees a binary image.

mod resample;
mod suite;

use std::io::Cursor;

use image::codecs::jpeg::JpegEncoder;
use image::{ExtendedColorType, ImageFormat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imageio::{binarize, BinaryImage, GrayImage, DEFAULT_THRESHOLD};

pub use resample::{resize_bilinear, scaled_size};
pub use suite::{
    attack_suite, default_suite, prepare_job, run_jobs, AttackSummary, EvalJob, EvalReport, EvalRow,
    REPORT_SCHEMA,
};

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("invalid attack parameters: {0}")]
    InvalidParams(String),
    #[error("jpeg codec failed: {0}")]
    Codec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Attack {
    Jpeg { quality: u8 },
    Scale { factor: f64 },
    Screenshot { factor: f64 },
    GaussianNoise { sigma: f64 },
    SaltPepper { density: f64 },
    Rebinarize { threshold: u8 },
}

impl Attack {
    pub fn kind(&self) -> &'static str {
        match self {
            Attack::Jpeg { .. } => "jpeg",
            Attack::Scale { .. } => "scale",
            Attack::Screenshot { .. } => "screenshot",
            Attack::GaussianNoise { .. } => "gaussian_noise",
            Attack::SaltPepper { .. } => "salt_pepper",
            Attack::Rebinarize { .. } => "rebinarize",
        }
    }

    /// `name=value` form of the single parameter.
    pub fn param_label(&self) -> String {
        match *self {
            Attack::Jpeg { quality } => format!("quality={quality}"),
            Attack::Scale { factor } | Attack::Screenshot { factor } => format!("factor={factor}"),
            Attack::GaussianNoise { sigma } => format!("sigma={sigma}"),
            Attack::SaltPepper { density } => format!("density={density}"),
            Attack::Rebinarize { threshold } => format!("threshold={threshold}"),
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        let ok = match *self {
            Attack::Jpeg { quality } => (5..=95).contains(&quality),
            Attack::Scale { factor } => factor > 0.2 && factor <= 3.0,
            Attack::Screenshot { factor } => factor > 0.3 && factor <= 0.95,
            Attack::GaussianNoise { sigma } => (0.0..=64.0).contains(&sigma),
            Attack::SaltPepper { density } => (0.0..=0.05).contains(&density),
            Attack::Rebinarize { threshold } => threshold > 0 && threshold < 255,
        };
        if ok {
            Ok(())
        } else {
            Err(ChannelError::InvalidParams(format!(
                "{} {} out of range",
                self.kind(),
                self.param_label()
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    #[serde(flatten)]
    pub attack: Attack,
    #[serde(default)]
    pub seed: u64,
}

impl AttackSpec {
    pub fn new(attack: Attack) -> Self {
        Self { attack, seed: 0 }
    }

    pub fn seeded(attack: Attack, seed: u64) -> Self {
        Self { attack, seed }
    }
}

/// Parses a JSON list of attack specs and checks every range.
pub fn parse_attack_list(json: &str) -> Result<Vec<AttackSpec>, ChannelError> {
    let specs: Vec<AttackSpec> =
        serde_json::from_str(json).map_err(|e| ChannelError::InvalidParams(e.to_string()))?;
    for spec in &specs {
        spec.attack.validate()?;
    }
    Ok(specs)
}

fn rebinarize(gray: &GrayImage) -> BinaryImage {
    binarize(gray, DEFAULT_THRESHOLD)
}

fn jpeg_round_trip(gray: &GrayImage, quality: u8) -> Result<GrayImage, ChannelError> {
    let mut encoded = Vec::new();
    JpegEncoder::new_with_quality(&mut encoded, quality)
        .encode(
            gray.pixels(),
            gray.width() as u32,
            gray.height() as u32,
            ExtendedColorType::L8,
        )
        .map_err(|e| ChannelError::Codec(e.to_string()))?;
    let decoded = image::load(Cursor::new(encoded), ImageFormat::Jpeg)
        .map_err(|e| ChannelError::Codec(e.to_string()))?
        .into_luma8();
    let (w, h) = decoded.dimensions();
    GrayImage::from_pixels(w as usize, h as usize, decoded.into_raw())
        .map_err(|e| ChannelError::Codec(e.to_string()))
}

pub fn apply_attack(page: &BinaryImage, spec: &AttackSpec) -> Result<BinaryImage, ChannelError> {
    spec.attack.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    match spec.attack {
        Attack::Jpeg { quality } => Ok(rebinarize(&jpeg_round_trip(&page.to_gray(), quality)?)),
        Attack::Scale { factor } => {
            let (w, h) = scaled_size(page.width(), page.height(), factor);
            Ok(rebinarize(&resize_bilinear(&page.to_gray(), w, h)))
        }
        Attack::Screenshot { factor } => {
            let (w, h) = scaled_size(page.width(), page.height(), factor);
            let small = resize_bilinear(&page.to_gray(), w, h);
            Ok(rebinarize(&resize_bilinear(&small, page.width(), page.height())))
        }
        Attack::GaussianNoise { sigma } => {
            let mut gray = page.to_gray();
            if sigma > 0.0 {
                let normal = Normal::new(0.0, sigma).expect("sigma is finite and positive");
                for p in gray.pixels_mut() {
                    let v = f64::from(*p) + normal.sample(&mut rng);
                    *p = v.round().clamp(0.0, 255.0) as u8;
                }
            }
            Ok(rebinarize(&gray))
        }
        Attack::SaltPepper { density } => {
            let mut out = page.clone();
            for y in 0..out.height() {
                for x in 0..out.width() {
                    if rng.random_bool(density) {
                        out.set(x, y, 1 - out.get(x, y));
                    }
                }
            }
            Ok(out)
        }
        Attack::Rebinarize { threshold } => Ok(binarize(&page.to_gray(), threshold)),
    }
}
