//! `corewm` command line.
//!
//! Exit codes: 0 success, 2 bad input or arguments, 3 not enough capacity,
//! 4 I/O failure, 5 payload unreadable (too few bits, checksum), 6 malformed
//! attack specification. Errors are printed to stderr as one JSON object.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::channel::{
    apply_attack, default_suite, parse_attack_list, prepare_job, run_jobs, AttackSpec, ChannelError,
    EvalReport, REPORT_SCHEMA,
};
use crate::core_model::DEFAULT_TC;
use crate::corpus::{corpus_pages, make_corpus, CorpusError, CorpusSpec};
use crate::embedder::{
    analyze_page, embed_page, measure_ssim, EmbedConfig, EmbedError, DEFAULT_BETA, DEFAULT_LAMBDA,
    DEFAULT_NS,
};
use crate::extractor::{read_page, ExtractConfig, ExtractError, PayloadLength};
use crate::imageio::{accuracy, load_image, save_image, BinaryImage, ImageError};
use crate::payload::{bits_to_string, parse_message, Codec, Key, PayloadError};
use crate::segmentation::box_records;

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_CAPACITY: i32 = 3;
pub const EXIT_IO: i32 = 4;
pub const EXIT_PAYLOAD: i32 = 5;
pub const EXIT_ATTACK_SPEC: i32 = 6;

#[derive(Debug, Parser)]
#[command(name = "corewm", version, about = "Core-thickness watermarking for binary text images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Embed a message into a page.
    Embed(EmbedArgs),
    /// Read a message back from a page.
    Extract(ExtractArgs),
    /// Apply one attack to a page.
    Attack(AttackArgs),
    /// Embed, attack and extract over a corpus.
    Eval(EvalArgs),
    /// Generate a synthetic corpus.
    Corpus(CorpusArgs),
    /// Dump segmentation, cores and thresholds of a page as JSON.
    Inspect(InspectArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
struct ModelArgs {
    /// Embedding strength.
    #[arg(long, default_value_t = DEFAULT_BETA)]
    beta: usize,
    /// Fraction of short characters left unmodified.
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    lambda: f64,
    /// Clustering tolerance in pixels.
    #[arg(long = "tc", default_value_t = DEFAULT_TC)]
    t_c: usize,
    /// Sub-lines per text line in ES mode.
    #[arg(long = "ns", default_value_t = DEFAULT_NS)]
    n_s: usize,
    /// Repeat bits across sub-lines with majority decoding.
    #[arg(long = "es")]
    es_enabled: bool,
    /// Use the literal four-case target rule.
    #[arg(long)]
    strict_paper_mode: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ModelArgs {
    fn embed_config(&self) -> EmbedConfig {
        EmbedConfig {
            beta: self.beta,
            lambda: self.lambda,
            t_c: self.t_c,
            n_s: self.n_s,
            es_enabled: self.es_enabled,
            strict_paper_mode: self.strict_paper_mode,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
struct CodecArgs {
    /// Environment variable holding the scrambling key.
    #[arg(long, conflicts_with = "key_file")]
    #[serde(skip)]
    key_env: Option<String>,
    /// File whose bytes are the scrambling key.
    #[arg(long)]
    #[serde(skip)]
    key_file: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    nonce: u64,
    /// Wrap the message in a length + CRC-8 frame.
    #[arg(long)]
    framed: bool,
}

impl CodecArgs {
    fn codec(&self) -> Result<Codec, CliError> {
        let bytes = match (&self.key_env, &self.key_file) {
            (Some(var), _) => Some(
                std::env::var(var)
                    .map_err(|_| CliError::input("missing_key", format!("environment variable {var} is not set")))?
                    .into_bytes(),
            ),
            (None, Some(path)) => Some(fs::read(path).map_err(|e| CliError::io(path, e))?),
            (None, None) => None,
        };
        let key = bytes.map(Key::new).transpose().map_err(CliError::from)?;
        Ok(Codec {
            key,
            nonce: self.nonce,
            framed: self.framed,
        })
    }

    fn echo(&self) -> serde_json::Value {
        json!({
            "keyed": self.key_env.is_some() || self.key_file.is_some(),
            "nonce": self.nonce,
            "framed": self.framed,
        })
    }
}

#[derive(Debug, Args)]
struct EmbedArgs {
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, short)]
    output: PathBuf,
    /// `0x`-prefixed hex or a string of 0/1.
    #[arg(long, short)]
    message: String,
    /// Also write the embedding plan as JSON.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Compute SSIM against the input.
    #[arg(long)]
    ssim: bool,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    codec: CodecArgs,
}

#[derive(Debug, Args)]
struct ExtractArgs {
    #[arg(long, short)]
    input: PathBuf,
    /// Number of channel bits (unframed payloads).
    #[arg(long, required_unless_present = "framed")]
    length: Option<usize>,
    /// Bits that were embedded; prints the accuracy.
    #[arg(long)]
    truth: Option<String>,
    /// Write per-character readings as JSON.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    codec: CodecArgs,
}

#[derive(Debug, Args)]
struct AttackArgs {
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, short)]
    output: PathBuf,
    /// Attack as JSON, e.g. `{"kind": "jpeg", "quality": 50}`.
    #[arg(long)]
    spec: String,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Corpus directory with corpus.json.
    #[arg(long)]
    corpus: PathBuf,
    /// JSON list of attacks; a built-in suite when omitted.
    #[arg(long)]
    attacks: Option<PathBuf>,
    /// Random payload bits per page, drawn from --seed.
    #[arg(long, default_value_t = 32, conflicts_with = "message")]
    bits: usize,
    /// Same message on every page instead of random bits.
    #[arg(long)]
    message: Option<String>,
    #[arg(long)]
    ssim: bool,
    /// Report JSON path; stdout when omitted.
    #[arg(long)]
    out_json: Option<PathBuf>,
    #[arg(long)]
    out_csv: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    codec: CodecArgs,
}

#[derive(Debug, Args)]
struct CorpusArgs {
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pages: usize,
    #[arg(long, default_value_t = 6)]
    lines: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    scale: usize,
}

#[derive(Debug, Args)]
struct InspectArgs {
    #[arg(long, short)]
    input: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    fn new(code: i32, kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            code,
            kind,
            message: message.into(),
        }
    }

    fn input(kind: &'static str, message: impl Into<String>) -> Self {
        Self::new(EXIT_INPUT, kind, message)
    }

    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        Self::new(EXIT_IO, "io", format!("{}: {e}", path.display()))
    }

    fn to_json(&self) -> serde_json::Value {
        json!({"error": self.kind, "message": self.message, "exit_code": self.code})
    }
}

impl From<PayloadError> for CliError {
    fn from(e: PayloadError) -> Self {
        match e {
            PayloadError::ChecksumFailed => Self::new(EXIT_PAYLOAD, "checksum_failed", e.to_string()),
            PayloadError::Truncated { .. } => Self::new(EXIT_PAYLOAD, "truncated_frame", e.to_string()),
            _ => Self::input("payload", e.to_string()),
        }
    }
}

impl From<EmbedError> for CliError {
    fn from(e: EmbedError) -> Self {
        match e {
            EmbedError::InsufficientCapacity { .. } => {
                Self::new(EXIT_CAPACITY, "insufficient_capacity", e.to_string())
            }
            EmbedError::TooFewLines(_) => Self::input("too_few_lines", e.to_string()),
            _ => Self::input("embed", e.to_string()),
        }
    }
}

impl From<ExtractError> for CliError {
    fn from(e: ExtractError) -> Self {
        match e {
            ExtractError::InsufficientBits { .. } => {
                Self::new(EXIT_PAYLOAD, "insufficient_bits", e.to_string())
            }
            ExtractError::Payload(p) => p.into(),
            ExtractError::TooFewLines(_) => Self::input("too_few_lines", e.to_string()),
            _ => Self::input("extract", e.to_string()),
        }
    }
}

impl From<ChannelError> for CliError {
    fn from(e: ChannelError) -> Self {
        match e {
            ChannelError::InvalidParams(_) => Self::new(EXIT_ATTACK_SPEC, "invalid_attack", e.to_string()),
            ChannelError::Codec(_) => Self::input("attack", e.to_string()),
        }
    }
}

fn load(path: &Path) -> Result<BinaryImage, CliError> {
    load_image(path).map_err(|e| match e {
        ImageError::Io(_) => CliError::io(path, e),
        other => CliError::input("image", format!("{}: {other}", path.display())),
    })
}

fn save(img: &BinaryImage, path: &Path) -> Result<(), CliError> {
    save_image(img, path).map_err(|e| CliError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn to_pretty(value: &impl Serialize) -> String {
    serde_json::to_string_pretty(value).expect("reports serialize")
}

fn message_bits(text: &str) -> Result<Vec<u8>, CliError> {
    Ok(parse_message(text)?)
}

fn model_echo(model: &ModelArgs, codec: &CodecArgs) -> serde_json::Value {
    let mut config = serde_json::to_value(model).expect("flags serialize");
    let extra = codec.echo();
    let map = config.as_object_mut().expect("flags are an object");
    for (k, v) in extra.as_object().expect("codec echo is an object") {
        map.insert(k.clone(), v.clone());
    }
    config
}

fn cmd_embed(args: &EmbedArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let page = load(&args.input)?;
    let codec = args.codec.codec()?;
    let channel = codec.encode(&message_bits(&args.message)?)?;
    let cfg = args.model.embed_config();
    let mut embedding = embed_page(&page, &channel, &cfg)?;
    if args.ssim {
        measure_ssim(&page, &mut embedding).map_err(|e| CliError::input("image", e.to_string()))?;
    }
    save(&embedding.page, &args.output)?;
    if let Some(path) = &args.plan {
        write_text(path, &to_pretty(&embedding.plan))?;
    }
    let report = json!({
        "schema": REPORT_SCHEMA,
        "command": "embed",
        "config": model_echo(&args.model, &args.codec),
        "channel_bits": channel.len(),
        "report": embedding.report,
    });
    writeln!(out, "{}", to_pretty(&report)).map_err(|e| CliError::io(Path::new("<stdout>"), e))
}

fn cmd_extract(args: &ExtractArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let page = load(&args.input)?;
    let codec = args.codec.codec()?;
    let length = match (args.codec.framed, args.length) {
        (true, _) => PayloadLength::Framed,
        (false, Some(n)) => PayloadLength::Bits(n),
        (false, None) => return Err(CliError::input("arguments", "--length or --framed is required")),
    };
    let cfg = ExtractConfig {
        length,
        lambda: args.model.lambda,
        t_c: args.model.t_c,
        n_s: args.model.n_s,
        es_enabled: args.model.es_enabled,
        codec,
    };
    let reading = read_page(&page, cfg.lambda, cfg.t_c, cfg.n_s, cfg.es_enabled)?;
    if let Some(path) = &args.trace {
        write_text(path, &to_pretty(&reading))?;
    }
    let message = crate::extractor::extract_page(&page, &cfg)?;
    let stdout_err = |e| CliError::io(Path::new("<stdout>"), e);
    writeln!(out, "{}", bits_to_string(&message)).map_err(stdout_err)?;
    if let Some(truth) = &args.truth {
        let truth = message_bits(truth)?;
        let acc = accuracy(&message, &truth).map_err(|e| CliError::input("truth", e.to_string()))?;
        writeln!(out, "acc {acc:.4}").map_err(stdout_err)?;
    }
    Ok(())
}

fn cmd_attack(args: &AttackArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let spec: AttackSpec = serde_json::from_str(&args.spec)
        .map_err(|e| CliError::new(EXIT_ATTACK_SPEC, "invalid_attack", e.to_string()))?;
    let page = load(&args.input)?;
    let attacked = apply_attack(&page, &spec)?;
    save(&attacked, &args.output)?;
    let report = json!({
        "schema": REPORT_SCHEMA,
        "command": "attack",
        "config": spec,
        "width": attacked.width(),
        "height": attacked.height(),
    });
    writeln!(out, "{}", to_pretty(&report)).map_err(|e| CliError::io(Path::new("<stdout>"), e))
}

/// Random payload for page `index`, reproducible from `seed`.
pub fn page_payload(seed: u64, index: usize, bits: usize) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    (0..bits).map(|_| rng.random_range(0..2u8)).collect()
}

fn cmd_eval(args: &EvalArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let specs = match &args.attacks {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            parse_attack_list(&text)?
        }
        None => default_suite(),
    };
    let paths = corpus_pages(&args.corpus).map_err(|e| match e {
        CorpusError::Io(io) => CliError::io(&args.corpus, io),
        other => CliError::input("corpus", other.to_string()),
    })?;
    let codec = args.codec.codec()?;
    let fixed = args.message.as_deref().map(message_bits).transpose()?;
    let cfg = args.model.embed_config();
    let jobs = paths
        .par_iter()
        .enumerate()
        .map(|(i, path)| {
            let page = load(path)?;
            let message = fixed
                .clone()
                .unwrap_or_else(|| page_payload(args.model.seed, i, args.bits));
            let channel = codec.encode(&message)?;
            let name = path
                .file_stem()
                .map_or_else(|| i.to_string(), |s| s.to_string_lossy().into_owned());
            Ok(prepare_job(name, &page, &channel, &cfg, args.ssim)?)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let ecfg = ExtractConfig::matching(&cfg, PayloadLength::Bits(0), codec);
    let rows = run_jobs(&jobs, &specs, &ecfg);
    let mut config = model_echo(&args.model, &args.codec);
    let map = config.as_object_mut().expect("config is an object");
    map.insert("corpus".into(), json!(args.corpus.display().to_string()));
    map.insert("payload_bits".into(), json!(fixed.as_ref().map_or(args.bits, Vec::len)));
    map.insert("attacks".into(), serde_json::to_value(&specs).expect("specs serialize"));
    let report = EvalReport::new(config, rows);
    if let Some(path) = &args.out_csv {
        let csv = report.to_csv().map_err(|e| CliError::io(path, e))?;
        write_text(path, &csv)?;
    }
    let text = to_pretty(&report);
    match &args.out_json {
        Some(path) => write_text(path, &text),
        None => writeln!(out, "{text}").map_err(|e| CliError::io(Path::new("<stdout>"), e)),
    }
}

fn cmd_corpus(args: &CorpusArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let spec = CorpusSpec {
        n_pages: args.pages,
        lines_per_page: args.lines,
        seed: args.seed,
        scale: args.scale,
    };
    let manifest = make_corpus(&spec, &args.out).map_err(|e| match e {
        CorpusError::Io(io) => CliError::io(&args.out, io),
        CorpusError::Image(ImageError::Io(io)) => CliError::io(&args.out, io),
        other => CliError::input("corpus", other.to_string()),
    })?;
    writeln!(out, "{}", to_pretty(&manifest)).map_err(|e| CliError::io(Path::new("<stdout>"), e))
}

fn cmd_inspect(args: &InspectArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let page = load(&args.input)?;
    let analysis = analyze_page(&page, args.model.lambda, args.model.t_c)?;
    let slots = analysis.slots(args.model.es_enabled, args.model.n_s)?;
    let report = json!({
        "schema": REPORT_SCHEMA,
        "command": "inspect",
        "config": args.model,
        "width": page.width(),
        "height": page.height(),
        "t_delta": analysis.t_delta,
        "t_lambda": analysis.t_lambda,
        "boxes": box_records(&analysis.lines),
        "cores": analysis.cores,
        "slots": slots,
    });
    writeln!(out, "{}", to_pretty(&report)).map_err(|e| CliError::io(Path::new("<stdout>"), e))
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = if code == 0 {
                write!(out, "{}", e.render())
            } else {
                write!(err, "{}", e.render())
            };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Embed(a) => cmd_embed(a, out),
        Command::Extract(a) => cmd_extract(a, out),
        Command::Attack(a) => cmd_attack(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Corpus(a) => cmd_corpus(a, out),
        Command::Inspect(a) => cmd_inspect(a, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "{}", e.to_json());
            e.code
        }
    }
}
