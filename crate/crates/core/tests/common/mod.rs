#![allow(dead_code)]

use std::io::Write;
use std::path::PathBuf;

use core_watermark::channel::{apply_attack, Attack, AttackSpec};
use core_watermark::cli::page_payload;
use core_watermark::corpus::{corpus_pages, generate, CorpusSpec};
use core_watermark::embedder::{embed_page, EmbedConfig};
use core_watermark::extractor::{extract_with_report, ExtractConfig, PayloadLength};
use core_watermark::imageio::{load_image, BinaryImage};
use core_watermark::payload::Codec;
use rayon::prelude::*;

pub const TRIALS: u64 = 20;
pub const PAYLOAD_BITS: usize = 32;

pub fn shipped_corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

pub fn shipped_corpus() -> Vec<BinaryImage> {
    corpus_pages(shipped_corpus_dir())
        .expect("shipped corpus manifest")
        .iter()
        .map(|p| load_image(p).expect("shipped corpus page"))
        .collect()
}

pub fn corpus_at_scale(scale: usize) -> Vec<BinaryImage> {
    let spec = CorpusSpec {
        scale,
        ..CorpusSpec::default()
    };
    generate(&spec)
        .expect("corpus generates")
        .into_iter()
        .map(|p| p.image)
        .collect()
}

/// One watermarked page of one trial.
#[derive(Debug, Clone)]
pub struct Marked {
    pub page: usize,
    pub trial: u64,
    pub image: BinaryImage,
    pub bits: Vec<u8>,
    pub psnr: f64,
    pub flipped: usize,
}

/// Embeds a fresh payload per (page, trial).
pub fn mark_all(pages: &[BinaryImage], cfg: &EmbedConfig, trials: u64) -> Vec<Marked> {
    let work: Vec<(usize, u64)> = (0..trials)
        .flat_map(|t| (0..pages.len()).map(move |p| (p, t)))
        .collect();
    work.par_iter()
        .map(|&(p, t)| {
            let bits = page_payload(t, p, PAYLOAD_BITS);
            let e = embed_page(&pages[p], &bits, cfg).expect("corpus page embeds");
            Marked {
                page: p,
                trial: t,
                psnr: e.report.psnr.value(),
                flipped: e.report.flipped_pixels,
                image: e.page,
                bits,
            }
        })
        .collect()
}

pub fn attack_seed(m: &Marked) -> u64 {
    m.trial * 1000 + m.page as u64
}

/// Mean ACC over all marked pages after `attack`; failed reads count as 0.
pub fn mean_acc(marked: &[Marked], cfg: &EmbedConfig, attack: Option<Attack>) -> f64 {
    let ecfg = ExtractConfig::matching(cfg, PayloadLength::Bits(PAYLOAD_BITS), Codec::default());
    let accs: Vec<f64> = marked
        .par_iter()
        .map(|m| {
            let attacked = match attack {
                Some(a) => apply_attack(&m.image, &AttackSpec::seeded(a, attack_seed(m)))
                    .expect("valid attack"),
                None => m.image.clone(),
            };
            extract_with_report(&attacked, &ecfg, &m.bits).map_or(0.0, |(_, acc)| acc)
        })
        .collect();
    accs.iter().sum::<f64>() / accs.len() as f64
}

pub fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

/// Prints a verdict line past the test harness's output capture.
pub fn verdict(id: u32, name: &str, pass: bool, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "\ncriterion {id:>2} {status} {name}: {detail}");
}
