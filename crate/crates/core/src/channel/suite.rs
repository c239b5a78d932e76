//! Attack suites over watermarked pages and the evaluation report.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{apply_attack, Attack, AttackSpec};
use crate::embedder::{embed_page, measure_ssim, EmbedConfig, EmbedError};
use crate::extractor::{extract_with_report, ExtractConfig, PayloadLength};
use crate::imageio::{BinaryImage, Psnr};

pub const REPORT_SCHEMA: u32 = 1;

/// One watermarked page ready for attack.
#[derive(Debug, Clone)]
pub struct EvalJob {
    pub page: String,
    pub marked: BinaryImage,
    /// Channel bits that were embedded.
    pub truth: Vec<u8>,
    /// Quality of the watermarked page against the original.
    pub psnr: Psnr,
    pub ssim: Option<f64>,
}

pub fn prepare_job(
    page: impl Into<String>,
    original: &BinaryImage,
    channel_bits: &[u8],
    cfg: &EmbedConfig,
    with_ssim: bool,
) -> Result<EvalJob, EmbedError> {
    let mut embedding = embed_page(original, channel_bits, cfg)?;
    let ssim = if with_ssim {
        Some(measure_ssim(original, &mut embedding).expect("embedding keeps the page size"))
    } else {
        None
    };
    Ok(EvalJob {
        page: page.into(),
        truth: channel_bits.to_vec(),
        psnr: embedding.report.psnr,
        ssim,
        marked: embedding.page,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub page: String,
    pub attack: String,
    pub params: serde_json::Value,
    pub seed: u64,
    /// Percent; `None` when extraction failed outright.
    pub acc: Option<f64>,
    pub psnr: Psnr,
    pub ssim: Option<f64>,
    pub runtime_ms: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn params_of(attack: &Attack) -> serde_json::Value {
    let mut value = serde_json::to_value(attack).expect("attacks serialize");
    if let Some(map) = value.as_object_mut() {
        map.remove("kind");
    }
    value
}

fn run_one(job: &EvalJob, spec: &AttackSpec, cfg: &ExtractConfig) -> EvalRow {
    let start = Instant::now();
    let cfg = ExtractConfig {
        length: PayloadLength::Bits(job.truth.len()),
        ..cfg.clone()
    };
    let outcome = apply_attack(&job.marked, spec)
        .map_err(|e| e.to_string())
        .and_then(|attacked| {
            extract_with_report(&attacked, &cfg, &job.truth).map_err(|e| e.to_string())
        });
    let (acc, error) = match outcome {
        Ok((_, acc)) => (Some(acc), None),
        Err(e) => (None, Some(e)),
    };
    EvalRow {
        page: job.page.clone(),
        attack: spec.attack.kind().to_string(),
        params: params_of(&spec.attack),
        seed: spec.seed,
        acc,
        psnr: job.psnr,
        ssim: job.ssim,
        runtime_ms: start.elapsed().as_millis() as u64,
        error,
    }
}

/// Every spec against one page.
pub fn attack_suite(job: &EvalJob, specs: &[AttackSpec], cfg: &ExtractConfig) -> Vec<EvalRow> {
    specs.iter().map(|s| run_one(job, s, cfg)).collect()
}

/// Every (page, spec) pair in parallel. Rows come back ordered by spec,
/// then page.
pub fn run_jobs(jobs: &[EvalJob], specs: &[AttackSpec], cfg: &ExtractConfig) -> Vec<EvalRow> {
    let pairs: Vec<(&AttackSpec, &EvalJob)> = specs
        .iter()
        .flat_map(|s| jobs.iter().map(move |j| (s, j)))
        .collect();
    pairs.par_iter().map(|(s, j)| run_one(j, s, cfg)).collect()
}

/// Suite used when no attack file is given.
pub fn default_suite() -> Vec<AttackSpec> {
    let mut attacks = Vec::new();
    attacks.extend([30, 50, 70, 90].map(|quality| Attack::Jpeg { quality }));
    attacks.extend([0.75, 1.0, 1.25, 1.5].map(|factor| Attack::Scale { factor }));
    attacks.extend([0.5, 0.75].map(|factor| Attack::Screenshot { factor }));
    attacks.extend([20.0, 40.0].map(|sigma| Attack::GaussianNoise { sigma }));
    attacks.push(Attack::SaltPepper { density: 0.005 });
    attacks.extend([64, 128, 192].map(|threshold| Attack::Rebinarize { threshold }));
    attacks.into_iter().map(AttackSpec::new).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSummary {
    pub attack: String,
    pub params: serde_json::Value,
    pub rows: usize,
    pub failed: usize,
    /// Failed extractions count as 0.
    pub mean_acc: f64,
    pub mean_psnr: Psnr,
    pub mean_ssim: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema: u32,
    pub config: serde_json::Value,
    pub rows: Vec<EvalRow>,
    pub summary: Vec<AttackSummary>,
}

impl EvalReport {
    /// Summaries group rows by attack and parameters across pages and seeds,
    /// in order of first appearance.
    pub fn new(config: serde_json::Value, rows: Vec<EvalRow>) -> Self {
        let mut groups: Vec<(String, serde_json::Value, Vec<&EvalRow>)> = Vec::new();
        for row in &rows {
            match groups
                .iter_mut()
                .find(|(a, p, _)| *a == row.attack && *p == row.params)
            {
                Some((_, _, members)) => members.push(row),
                None => groups.push((row.attack.clone(), row.params.clone(), vec![row])),
            }
        }
        let summary = groups
            .into_iter()
            .map(|(attack, params, members)| {
                let n = members.len();
                let ssims: Vec<f64> = members.iter().filter_map(|r| r.ssim).collect();
                AttackSummary {
                    attack,
                    params,
                    rows: n,
                    failed: members.iter().filter(|r| r.acc.is_none()).count(),
                    mean_acc: members.iter().map(|r| r.acc.unwrap_or(0.0)).sum::<f64>() / n as f64,
                    mean_psnr: Psnr::mean(members.iter().map(|r| r.psnr)),
                    mean_ssim: (!ssims.is_empty())
                        .then(|| ssims.iter().sum::<f64>() / ssims.len() as f64),
                }
            })
            .collect();
        Self {
            schema: REPORT_SCHEMA,
            config,
            rows,
            summary,
        }
    }

    pub fn summary_for(&self, attack: &Attack) -> Option<&AttackSummary> {
        let params = params_of(attack);
        self.summary
            .iter()
            .find(|s| s.attack == attack.kind() && s.params == params)
    }

    /// One line per row: page, attack, parameter, seed, acc, psnr, ssim, runtime.
    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["page", "attack", "param", "value", "seed", "acc", "psnr", "ssim", "runtime_ms", "error"])?;
        for row in &self.rows {
            let (param, value) = row
                .params
                .as_object()
                .and_then(|m| m.iter().next())
                .map(|(k, v)| (k.clone(), v.to_string()))
                .unwrap_or_default();
            w.write_record([
                row.page.clone(),
                row.attack.clone(),
                param,
                value,
                row.seed.to_string(),
                row.acc.map(|a| a.to_string()).unwrap_or_default(),
                match row.psnr {
                    Psnr::Infinite => "inf".to_string(),
                    Psnr::Db(v) => v.to_string(),
                },
                row.ssim.map(|s| s.to_string()).unwrap_or_default(),
                row.runtime_ms.to_string(),
                row.error.clone().unwrap_or_default(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}
