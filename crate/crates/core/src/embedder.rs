//! Character selection, thresholds and core-thickness modulation.
//!
//! A bit is written into a character by moving its core thickness to one
//! side of the embedding threshold: below it for `1`, above it for `0`.
//! Thinning strips edge scanlines of the core, thickening paints new
//! scanlines next to one edge. Every change is made on a private canvas
//! around the character, re-measured, and only then copied back, so a
//! failed modification leaves the page untouched.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::core_model::{extract_core, CoreDescriptor, Direction, DEFAULT_TC};
use crate::extractor;
use crate::imageio::{psnr, ssim, BinaryImage, ImageError, Psnr, Rect, BLACK, WHITE};
use crate::segmentation::{segment_chars, segment_lines, split_sublines, LineBox, SegmentError};

pub const DEFAULT_BETA: usize = 1;
pub const DEFAULT_LAMBDA: f64 = 0.2;
pub const DEFAULT_NS: usize = 9;
/// White pixels kept between a modified character and its neighbours.
pub const MIN_GAP: usize = 2;
/// Scanlines a reduction may strip beyond the nominal count.
const EXTRA_REDUCE_SCANLINES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbedConfig {
    pub beta: usize,
    pub lambda: f64,
    pub t_c: usize,
    pub n_s: usize,
    pub es_enabled: bool,
    pub strict_paper_mode: bool,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        Self {
            beta: DEFAULT_BETA,
            lambda: DEFAULT_LAMBDA,
            t_c: DEFAULT_TC,
            n_s: DEFAULT_NS,
            es_enabled: false,
            strict_paper_mode: false,
        }
    }
}

impl EmbedConfig {
    pub fn validate(&self) -> Result<(), EmbedError> {
        if self.beta == 0 {
            return Err(EmbedError::InvalidConfig("beta must be at least 1".into()));
        }
        check_lambda(self.lambda)?;
        if self.n_s == 0 {
            return Err(EmbedError::InvalidConfig("n_s must be at least 1".into()));
        }
        Ok(())
    }
}

pub(crate) fn check_lambda(lambda: f64) -> Result<(), EmbedError> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(EmbedError::InvalidConfig(format!(
            "lambda must be in (0, 1], got {lambda}"
        )));
    }
    Ok(())
}

#[derive(Debug, Error, PartialEq)]
pub enum EmbedError {
    #[error("payload is empty")]
    EmptyPayload,
    #[error("payload bits must be 0 or 1")]
    InvalidBit,
    #[error("no characters outside the baseline line")]
    EmptyDocument,
    #[error("page has {0} text line(s); at least 2 are needed")]
    TooFewLines(usize),
    #[error("baseline line has no characters")]
    EmptyBaseline,
    #[error("threshold {t_delta} minus strength {beta} leaves no thickness")]
    InfeasibleTarget { t_delta: usize, beta: usize },
    #[error("payload needs {needed} slots but the page offers {available}")]
    InsufficientCapacity { needed: usize, available: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Segment(#[from] SegmentError),
}

/// Why a single thinning or thickening attempt was abandoned.
#[derive(Debug, Clone, Error, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModifyError {
    #[error("target thickness {target} is not reachable from {thickness}")]
    InvalidTarget { thickness: usize, target: usize },
    #[error("stroke junctions keep the core from reaching the target")]
    CannotReduce,
    #[error("no room next to the core")]
    OutOfBounds,
    #[error("the character no longer segments as one piece")]
    Split,
    #[error("re-measured core misses the target")]
    Unverified,
    #[error("the line's horizontal extent would change")]
    MovesLineEdge,
}

/// `k`-th smallest mean core length with `k = ceil(n * lambda)`.
pub fn selection_threshold(lengths: &[f64], lambda: f64) -> Result<f64, EmbedError> {
    if lengths.is_empty() {
        return Err(EmbedError::EmptyDocument);
    }
    check_lambda(lambda)?;
    let mut sorted = lengths.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    // guard against n * lambda landing a hair above an integer
    let k = ((n as f64 * lambda - 1e-9).ceil() as usize).clamp(1, n);
    Ok(sorted[k - 1])
}

/// Mean thickness rounded half up.
pub fn embedding_threshold(thicknesses: &[usize]) -> Result<usize, EmbedError> {
    if thicknesses.is_empty() {
        return Err(EmbedError::EmptyBaseline);
    }
    let n = thicknesses.len();
    let sum: usize = thicknesses.iter().sum();
    Ok((2 * sum + n) / (2 * n))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Set(usize),
    Unchanged,
}

/// Thickness a core must take to carry `bit`.
///
/// The default mode always leaves at least `beta` between the result and
/// the threshold. `strict` applies the four literal cases instead, which
/// can leave a `0` sitting on the threshold, where it decodes as `1`.
pub fn target_thickness(
    thickness: usize,
    bit: u8,
    t_delta: usize,
    beta: usize,
    strict: bool,
) -> Result<Target, EmbedError> {
    if t_delta <= beta {
        return Err(EmbedError::InfeasibleTarget { t_delta, beta });
    }
    let low = t_delta - beta;
    let high = t_delta + beta + 1;
    let gap = t_delta as i64 - thickness as i64;
    let beta = beta as i64;
    let target = match (bit, strict) {
        (1, false) if thickness > low => Target::Set(low),
        (0, false) if thickness < high => Target::Set(high),
        (1, true) if gap <= beta => Target::Set(low),
        (0, true) if gap >= beta => Target::Set(high),
        (0 | 1, _) => Target::Unchanged,
        _ => return Err(EmbedError::InvalidBit),
    };
    Ok(match target {
        Target::Set(t) if t == thickness => Target::Unchanged,
        t => t,
    })
}

/// Extent of `img` along the scanline-index axis of `core`.
fn index_extent(img: &BinaryImage, core: &CoreDescriptor) -> usize {
    match core.direction {
        Direction::Horizontal => img.height(),
        Direction::Vertical => img.width(),
    }
}

/// The single character inside `img` and its core, in `img` coordinates.
pub fn locate(img: &BinaryImage, t_c: usize) -> Option<(Rect, CoreDescriptor)> {
    let view = LineBox {
        line_index: 0,
        rect: img.bounds(),
        chars: Vec::new(),
    };
    let chars = segment_chars(img, &view);
    let [only] = chars.as_slice() else {
        return None;
    };
    let r = only.rect;
    let core = extract_core(&img.crop(r), t_c).ok()?;
    Some((r, core.translate(r.x0, r.y0)))
}

/// Whitens one core scanline over its run extent, sparing pixels whose
/// outward neighbour is black.
fn strip_scanline(img: &mut BinaryImage, core: &CoreDescriptor, k: usize, outward: Option<usize>) {
    let index = core.indices[k];
    let extent = index_extent(img, core);
    let outward = outward.filter(|&o| o < extent);
    for pos in core.starts[k]..core.starts[k] + core.lengths[k] {
        let (x, y) = core.pixel(index, pos);
        if !img.is_black(x, y) {
            continue;
        }
        let shielded = outward.is_some_and(|o| {
            let (ox, oy) = core.pixel(o, pos);
            img.is_black(ox, oy)
        });
        if !shielded {
            img.set(x, y, WHITE);
        }
    }
}

/// Core edges that must not move.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Pins {
    before: bool,
    after: bool,
}

impl Pins {
    const NONE: Pins = Pins {
        before: false,
        after: false,
    };
}

/// Strips `count` edge scanlines, choosing the shorter edge each time
/// (the first on ties) unless that edge is pinned.
fn strip_edges(img: &mut BinaryImage, core: &CoreDescriptor, count: usize, pins: Pins) {
    let (mut lo, mut hi) = (0usize, core.thickness - 1);
    for _ in 0..count {
        if lo > hi {
            break;
        }
        let take_first = match (pins.before, pins.after) {
            (true, false) => false,
            (false, true) => true,
            _ => core.lengths[lo] <= core.lengths[hi],
        };
        if take_first {
            strip_scanline(img, core, lo, core.indices[lo].checked_sub(1));
            lo += 1;
        } else {
            strip_scanline(img, core, hi, Some(core.indices[hi] + 1));
            if hi == 0 {
                break;
            }
            hi -= 1;
        }
    }
}

fn reduce_with(
    img: &mut BinaryImage,
    core: &CoreDescriptor,
    target: usize,
    t_c: usize,
    pins: Pins,
    accept: &dyn Fn(&CoreDescriptor) -> bool,
) -> Result<(Rect, CoreDescriptor), ModifyError> {
    if target == 0 || target >= core.thickness {
        return Err(ModifyError::InvalidTarget {
            thickness: core.thickness,
            target,
        });
    }
    let mut current = core.clone();
    let mut spare = EXTRA_REDUCE_SCANLINES;
    loop {
        strip_edges(img, &current, current.thickness - target, pins);
        let (rect, now) = locate(img, t_c).ok_or(ModifyError::Split)?;
        match now.thickness.cmp(&target) {
            Ordering::Equal if accept(&now) => return Ok((rect, now)),
            Ordering::Equal => return Err(ModifyError::Unverified),
            Ordering::Less => return Err(ModifyError::CannotReduce),
            Ordering::Greater => {
                let more = now.thickness - target;
                if more > spare {
                    return Err(ModifyError::CannotReduce);
                }
                spare -= more;
                current = now;
            }
        }
    }
}

/// Thins the core of the character in `img` to `target` scanlines.
///
/// Edge scanlines are whitened one at a time, shorter edge first. Pixels
/// whose outward neighbour is black belong to a crossing stroke and stay.
/// If the re-measured core is still too thick, up to two more edge
/// scanlines are stripped.
pub fn reduce_core(
    img: &mut BinaryImage,
    core: &CoreDescriptor,
    target: usize,
    t_c: usize,
) -> Result<CoreDescriptor, ModifyError> {
    reduce_with(img, core, target, t_c, Pins::NONE, &|_| true).map(|(_, c)| c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Before,
    After,
}

fn paint_side(img: &mut BinaryImage, core: &CoreDescriptor, add: usize, side: Side) -> Result<(), ModifyError> {
    let k = match side {
        Side::Before => 0,
        Side::After => core.thickness - 1,
    };
    let edge = core.indices[k];
    let extent = index_extent(img, core);
    let fits = match side {
        Side::Before => edge >= add,
        Side::After => edge + add < extent,
    };
    if !fits {
        return Err(ModifyError::OutOfBounds);
    }
    for step in 1..=add {
        let index = match side {
            Side::Before => edge - step,
            Side::After => edge + step,
        };
        for pos in core.starts[k]..core.starts[k] + core.lengths[k] {
            let (x, y) = core.pixel(index, pos);
            img.set(x, y, BLACK);
        }
    }
    Ok(())
}

/// Scanline counts to paint (before, after), most preferred first: all on
/// the rule side, all on the other side, then mixed and smaller amounts
/// for when neighbouring strokes join the grown core.
fn allocations(add: usize, after_first: bool, pins: Pins) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let whole = if after_first {
        [(0, add), (add, 0)]
    } else {
        [(add, 0), (0, add)]
    };
    out.extend(whole);
    for total in (1..=add).rev() {
        for a in 0..=total {
            let pair = if after_first { (a, total - a) } else { (total - a, a) };
            if !out.contains(&pair) {
                out.push(pair);
            }
        }
    }
    out.retain(|&(b, a)| !(pins.before && b > 0) && !(pins.after && a > 0));
    out
}

fn expand_with(
    img: &mut BinaryImage,
    core: &CoreDescriptor,
    target: usize,
    t_c: usize,
    pins: Pins,
    accept: &dyn Fn(&CoreDescriptor) -> bool,
) -> Result<(Rect, CoreDescriptor), ModifyError> {
    if target <= core.thickness {
        return Err(ModifyError::InvalidTarget {
            thickness: core.thickness,
            target,
        });
    }
    let add = target - core.thickness;
    let after_first = core.lengths[0] <= core.lengths[core.thickness - 1];
    let original = img.clone();
    let mut error = ModifyError::OutOfBounds;
    for (before, after) in allocations(add, after_first, pins) {
        let painted = paint_side(img, core, before, Side::Before)
            .and_then(|()| paint_side(img, core, after, Side::After));
        match painted.map(|()| locate(img, t_c)) {
            Ok(Some((rect, now))) if now.thickness == target && accept(&now) => return Ok((rect, now)),
            Ok(Some(_)) => error = ModifyError::Unverified,
            Ok(None) => error = ModifyError::Split,
            Err(_) => {}
        }
        img.clone_from(&original);
    }
    Err(error)
}

/// Thickens the core of the character in `img` to `target` scanlines.
///
/// New scanlines are painted next to the longer edge (the last on ties),
/// each spanning that edge's run. When that side has no room or the result
/// does not measure right, the other side and then split or partial
/// paintings are tried; a partial painting only succeeds when nearby
/// strokes join the core and make up the difference.
pub fn expand_core(
    img: &mut BinaryImage,
    core: &CoreDescriptor,
    target: usize,
    t_c: usize,
) -> Result<CoreDescriptor, ModifyError> {
    expand_with(img, core, target, t_c, Pins::NONE, &|_| true).map(|(_, c)| c)
}

/// Segmentation, cores and both thresholds of a page.
#[derive(Debug, Clone)]
pub struct PageAnalysis {
    pub lines: Vec<LineBox>,
    /// Per line, per character, in character-box coordinates.
    pub cores: Vec<Vec<CoreDescriptor>>,
    pub t_delta: usize,
    pub t_lambda: f64,
}

/// One carrier of a payload bit: a single character, or every eligible
/// complete character of a sub-line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub line: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sub: Option<usize>,
    #[serde(skip)]
    pub span: Option<(usize, usize)>,
    pub chars: Vec<usize>,
}

/// Line 0 is the baseline.
pub const BASELINE_LINE: usize = 0;

pub fn analyze_page(page: &BinaryImage, lambda: f64, t_c: usize) -> Result<PageAnalysis, EmbedError> {
    let lines = segment_lines(page)?;
    if lines.len() < 2 {
        return Err(EmbedError::TooFewLines(lines.len()));
    }
    let cores: Vec<Vec<CoreDescriptor>> = lines
        .iter()
        .map(|l| {
            l.chars
                .iter()
                .map(|c| extract_core(&page.crop(c.rect), t_c).expect("character boxes hold ink"))
                .collect()
        })
        .collect();
    let baseline: Vec<usize> = cores[BASELINE_LINE].iter().map(|c| c.thickness).collect();
    let t_delta = embedding_threshold(&baseline)?;
    let lengths: Vec<f64> = cores[BASELINE_LINE + 1..]
        .iter()
        .flatten()
        .map(|c| c.mean_length)
        .collect();
    let t_lambda = selection_threshold(&lengths, lambda)?;
    Ok(PageAnalysis {
        lines,
        cores,
        t_delta,
        t_lambda,
    })
}

impl PageAnalysis {
    pub fn eligible(&self, line: usize, ch: usize) -> bool {
        self.cores[line][ch].mean_length > self.t_lambda
    }

    /// Carriers in reading order. Plain mode: one per eligible character.
    /// ES mode: one per sub-line holding at least one eligible complete
    /// character.
    pub fn slots(&self, es: bool, n_s: usize) -> Result<Vec<Slot>, EmbedError> {
        let mut slots = Vec::new();
        for line in &self.lines[BASELINE_LINE + 1..] {
            let li = line.line_index;
            if !es {
                slots.extend(
                    (0..line.chars.len())
                        .filter(|&c| self.eligible(li, c))
                        .map(|c| Slot {
                            line: li,
                            sub: None,
                            span: None,
                            chars: vec![c],
                        }),
                );
                continue;
            }
            for sub in split_sublines(line, n_s)? {
                let chars: Vec<usize> = sub
                    .complete_chars
                    .iter()
                    .map(|c| c.char_index)
                    .filter(|&c| self.eligible(li, c))
                    .collect();
                if !chars.is_empty() {
                    slots.push(Slot {
                        line: li,
                        sub: Some(sub.sub_index),
                        span: Some(sub.x_span),
                        chars,
                    });
                }
            }
        }
        Ok(slots)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Outcome {
    Modified { flipped: usize },
    Unchanged,
    Failed { reason: ModifyError },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharDecision {
    pub char: usize,
    pub n_core: usize,
    pub target: Option<usize>,
    #[serde(flatten)]
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub line: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sub: Option<usize>,
    pub bit: u8,
    pub chars: Vec<CharDecision>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    BelowSelectionThreshold,
    Incomplete,
    Unused,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skip {
    pub line: usize,
    pub char: usize,
    pub reason: SkipReason,
}

/// Audit record of one embedding: thresholds and every decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedPlan {
    pub t_lambda: f64,
    pub t_delta: usize,
    pub baseline_line: usize,
    pub es_enabled: bool,
    pub payload_bits: usize,
    pub assignments: Vec<Assignment>,
    pub skipped: Vec<Skip>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedReport {
    pub payload_bits: usize,
    pub slots_used: usize,
    pub flipped_pixels: usize,
    pub chars_modified: usize,
    pub chars_unchanged: usize,
    pub chars_failed: usize,
    pub chars_skipped: usize,
    /// Slots whose bit does not read back from the marked page.
    pub mismatched_slots: usize,
    pub psnr: Psnr,
    /// Filled in by [`measure_ssim`]; the full-page window sweep is slow.
    pub ssim: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Embedding {
    pub page: BinaryImage,
    pub plan: EmbedPlan,
    pub report: EmbedReport,
}

/// Mutable layout state: current character and line rectangles.
struct Layout {
    chars: Vec<Vec<Rect>>,
    lines: Vec<Rect>,
    width: usize,
    height: usize,
}

impl Layout {
    fn new(page: &BinaryImage, lines: &[LineBox]) -> Self {
        Self {
            chars: lines
                .iter()
                .map(|l| l.chars.iter().map(|c| c.rect).collect())
                .collect(),
            lines: lines.iter().map(|l| l.rect).collect(),
            width: page.width(),
            height: page.height(),
        }
    }

    /// Region a character may occupy without touching anything else.
    fn canvas(&self, line: usize, ch: usize, span: Option<(usize, usize)>) -> Rect {
        let row = &self.chars[line];
        let r = row[ch];
        let mut x0 = if ch > 0 { row[ch - 1].x1() + MIN_GAP } else { 0 };
        let mut x1 = row
            .get(ch + 1)
            .map_or(self.width, |n| n.x0.saturating_sub(MIN_GAP));
        if let Some((a, b)) = span {
            x0 = x0.max(a);
            x1 = x1.min(b);
        }
        let y0 = if line > 0 {
            self.lines[line - 1].y1() + MIN_GAP
        } else {
            0
        };
        let y1 = self
            .lines
            .get(line + 1)
            .map_or(self.height, |n| n.y0.saturating_sub(MIN_GAP));
        let (x0, x1) = (x0.min(r.x0), x1.max(r.x1()));
        let (y0, y1) = (y0.min(r.y0), y1.max(r.y1()));
        Rect::new(x0, y0, x1 - x0, y1 - y0)
    }

    fn update(&mut self, line: usize, ch: usize, rect: Rect) {
        self.chars[line][ch] = rect;
        let l = self.lines[line];
        let x0 = l.x0.min(rect.x0);
        let y0 = l.y0.min(rect.y0);
        let x1 = l.x1().max(rect.x1());
        let y1 = l.y1().max(rect.y1());
        self.lines[line] = Rect::new(x0, y0, x1 - x0, y1 - y0);
    }
}

struct CharJob<'a> {
    rect: Rect,
    core: &'a CoreDescriptor,
    target: usize,
    t_c: usize,
    t_lambda: f64,
    /// In ES mode the first and last characters pin the line's extent.
    pin_left: bool,
    pin_right: bool,
}

/// Modifies one character on its canvas. On success the canvas is copied
/// back into `page`; returns the new box and the flipped pixel count.
fn modify_char(page: &mut BinaryImage, canvas_rect: Rect, job: &CharJob) -> Result<(Rect, usize), ModifyError> {
    let mut canvas = page.crop(canvas_rect);
    let before = canvas.clone();
    let core = job
        .core
        .translate(job.rect.x0 - canvas_rect.x0, job.rect.y0 - canvas_rect.y0);
    let t_lambda = job.t_lambda;
    let target = job.target;
    let accept = move |c: &CoreDescriptor| c.thickness == target && c.mean_length > t_lambda;
    let pins = match core.direction {
        Direction::Vertical => Pins {
            before: job.pin_left,
            after: job.pin_right,
        },
        Direction::Horizontal => Pins::NONE,
    };
    let (local, _) = if job.target < core.thickness {
        reduce_with(&mut canvas, &core, job.target, job.t_c, pins, &accept)?
    } else {
        expand_with(&mut canvas, &core, job.target, job.t_c, pins, &accept)?
    };
    let rect = local.translate(canvas_rect.x0, canvas_rect.y0);
    if (job.pin_left && rect.x0 != job.rect.x0) || (job.pin_right && rect.x1() != job.rect.x1()) {
        return Err(ModifyError::MovesLineEdge);
    }
    let flipped = before.hamming(&canvas).expect("same canvas size");
    page.paste(&canvas, canvas_rect.x0, canvas_rect.y0);
    Ok((rect, flipped))
}

/// Embeds `bits` (already scrambled and framed, if wanted) into `page`.
pub fn embed_page(page: &BinaryImage, bits: &[u8], cfg: &EmbedConfig) -> Result<Embedding, EmbedError> {
    cfg.validate()?;
    if bits.is_empty() {
        return Err(EmbedError::EmptyPayload);
    }
    if bits.iter().any(|&b| b > 1) {
        return Err(EmbedError::InvalidBit);
    }
    let analysis = analyze_page(page, cfg.lambda, cfg.t_c)?;
    let t_delta = analysis.t_delta;
    if t_delta <= cfg.beta {
        return Err(EmbedError::InfeasibleTarget {
            t_delta,
            beta: cfg.beta,
        });
    }
    let slots = analysis.slots(cfg.es_enabled, cfg.n_s)?;
    if slots.len() < bits.len() {
        return Err(EmbedError::InsufficientCapacity {
            needed: bits.len(),
            available: slots.len(),
        });
    }
    let used = if cfg.es_enabled { slots.len() } else { bits.len() };

    let mut out = page.clone();
    let mut layout = Layout::new(page, &analysis.lines);
    let mut assignments = Vec::with_capacity(used);
    let mut carrying = vec![Vec::new(); analysis.lines.len()];
    for (j, slot) in slots[..used].iter().enumerate() {
        let bit = bits[j % bits.len()];
        let line_len = analysis.lines[slot.line].chars.len();
        let mut decisions = Vec::with_capacity(slot.chars.len());
        for &ch in &slot.chars {
            carrying[slot.line].push(ch);
            let core = &analysis.cores[slot.line][ch];
            let target = match target_thickness(core.thickness, bit, t_delta, cfg.beta, cfg.strict_paper_mode)? {
                Target::Set(t) => t,
                Target::Unchanged => {
                    decisions.push(CharDecision {
                        char: ch,
                        n_core: core.thickness,
                        target: None,
                        outcome: Outcome::Unchanged,
                    });
                    continue;
                }
            };
            let job = CharJob {
                rect: layout.chars[slot.line][ch],
                core,
                target,
                t_c: cfg.t_c,
                t_lambda: analysis.t_lambda,
                pin_left: cfg.es_enabled && ch == 0,
                pin_right: cfg.es_enabled && ch + 1 == line_len,
            };
            let canvas = layout.canvas(slot.line, ch, slot.span);
            let outcome = match modify_char(&mut out, canvas, &job) {
                Ok((rect, flipped)) => {
                    layout.update(slot.line, ch, rect);
                    Outcome::Modified { flipped }
                }
                Err(reason) => Outcome::Failed { reason },
            };
            decisions.push(CharDecision {
                char: ch,
                n_core: core.thickness,
                target: Some(target),
                outcome,
            });
        }
        assignments.push(Assignment {
            line: slot.line,
            sub: slot.sub,
            bit,
            chars: decisions,
        });
    }

    let mut skipped = Vec::new();
    for line in &analysis.lines[BASELINE_LINE + 1..] {
        let li = line.line_index;
        for ch in 0..line.chars.len() {
            if carrying[li].contains(&ch) {
                continue;
            }
            let reason = if !analysis.eligible(li, ch) {
                SkipReason::BelowSelectionThreshold
            } else if cfg.es_enabled {
                SkipReason::Incomplete
            } else {
                SkipReason::Unused
            };
            skipped.push(Skip {
                line: li,
                char: ch,
                reason,
            });
        }
    }

    let count = |f: fn(&Outcome) -> bool| {
        assignments
            .iter()
            .flat_map(|a| &a.chars)
            .filter(|d| f(&d.outcome))
            .count()
    };
    let chars_modified = count(|o| matches!(o, Outcome::Modified { .. }));
    let chars_unchanged = count(|o| matches!(o, Outcome::Unchanged));
    let chars_failed = count(|o| matches!(o, Outcome::Failed { .. }));

    let expected: Vec<u8> = assignments.iter().map(|a| a.bit).collect();
    let mismatched_slots = match extractor::read_page(&out, cfg.lambda, cfg.t_c, cfg.n_s, cfg.es_enabled) {
        Ok(reading) => {
            let got: Vec<u8> = reading.slots.iter().map(|s| s.bit).collect();
            let paired = expected.iter().zip(&got).filter(|(a, b)| a != b).count();
            paired + expected.len().saturating_sub(got.len())
        }
        Err(_) => expected.len(),
    };

    let report = EmbedReport {
        payload_bits: bits.len(),
        slots_used: used,
        flipped_pixels: page.hamming(&out).expect("same page size"),
        chars_modified,
        chars_unchanged,
        chars_failed,
        chars_skipped: skipped.len(),
        mismatched_slots,
        psnr: psnr(page, &out).expect("same page size"),
        ssim: None,
    };
    let plan = EmbedPlan {
        t_lambda: analysis.t_lambda,
        t_delta,
        baseline_line: BASELINE_LINE,
        es_enabled: cfg.es_enabled,
        payload_bits: bits.len(),
        assignments,
        skipped,
    };
    Ok(Embedding {
        page: out,
        plan,
        report,
    })
}

/// Fills in the report's SSIM against the unmarked page.
pub fn measure_ssim(original: &BinaryImage, embedding: &mut Embedding) -> Result<f64, ImageError> {
    let value = ssim(original, &embedding.page)?;
    embedding.report.ssim = Some(value);
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_page, upscale, CorpusSpec, GlyphSet, LETTERS, STROKE};
    use proptest::prelude::*;

    #[test]
    fn selection_threshold_picks_kth_smallest() {
        let lengths = [9.0, 3.0, 17.0, 4.0, 12.0, 17.0, 6.0, 5.0, 14.0, 11.0];
        // k = ceil(10 * 0.2) = 2
        assert_eq!(selection_threshold(&lengths, 0.2).unwrap(), 4.0);
        assert_eq!(selection_threshold(&lengths, 0.21).unwrap(), 5.0);
        assert_eq!(selection_threshold(&lengths, 1.0).unwrap(), 17.0);
        assert_eq!(selection_threshold(&lengths, 1e-6).unwrap(), 3.0);
        assert_eq!(selection_threshold(&[], 0.2), Err(EmbedError::EmptyDocument));
        assert!(selection_threshold(&lengths, 0.0).is_err());
    }

    #[test]
    fn embedding_threshold_rounds_half_up() {
        assert_eq!(embedding_threshold(&[5, 6]).unwrap(), 6);
        assert_eq!(embedding_threshold(&[5, 5, 6]).unwrap(), 5);
        assert_eq!(embedding_threshold(&[6, 6, 6, 7]).unwrap(), 6);
        assert_eq!(embedding_threshold(&[]), Err(EmbedError::EmptyBaseline));
    }

    #[test]
    fn target_table() {
        use Target::*;
        let t = |n, bit, strict| target_thickness(n, bit, 6, 1, strict).unwrap();
        assert_eq!(t(6, 1, false), Set(5));
        assert_eq!(t(5, 1, false), Unchanged);
        assert_eq!(t(2, 1, false), Unchanged);
        assert_eq!(t(6, 0, false), Set(8));
        assert_eq!(t(7, 0, false), Set(8));
        assert_eq!(t(8, 0, false), Unchanged);
        // literal rules
        assert_eq!(t(6, 1, true), Set(5));
        assert_eq!(t(3, 1, true), Unchanged);
        assert_eq!(t(5, 0, true), Set(8));
        assert_eq!(t(6, 0, true), Unchanged);
        assert_eq!(
            target_thickness(3, 1, 2, 2, false),
            Err(EmbedError::InfeasibleTarget { t_delta: 2, beta: 2 })
        );
    }

    proptest! {
        #[test]
        fn default_targets_decode_with_margin(n in 1usize..30, t in 2usize..20, beta in 1usize..4, bit in 0u8..2) {
            prop_assume!(t > beta);
            let after = match target_thickness(n, bit, t, beta, false).unwrap() {
                Target::Set(v) => v,
                Target::Unchanged => n,
            };
            prop_assert_eq!(u8::from(after <= t), bit);
            if bit == 1 {
                prop_assert!(after + beta <= t);
            } else {
                prop_assert!(after >= t + beta + 1);
            }
        }
    }

    fn bar(width: usize, height: usize, pad: usize) -> BinaryImage {
        let mut img = BinaryImage::new(width + 2 * pad, height + 2 * pad);
        for y in pad..pad + height {
            for x in pad..pad + width {
                img.set(x, y, BLACK);
            }
        }
        img
    }

    #[test]
    fn reduce_strips_edges() {
        let mut img = bar(7, 30, 4);
        let (_, core) = locate(&img, DEFAULT_TC).unwrap();
        assert_eq!(core.thickness, 7);
        let thin = reduce_core(&mut img, &core, 4, DEFAULT_TC).unwrap();
        assert_eq!(thin.thickness, 4);
        assert_eq!(img.count_black(), 4 * 30);
        // equal edges every time, so the left side loses all three
        assert_eq!(thin.indices, vec![7, 8, 9, 10]);
    }

    #[test]
    fn reduce_keeps_crossing_strokes() {
        // stem with an arm leaving its right edge
        let mut img = bar(4, 20, 3);
        for x in 7..15 {
            for y in 10..13 {
                img.set(x, y, BLACK);
            }
        }
        let (_, core) = locate(&img, DEFAULT_TC).unwrap();
        assert_eq!(core.thickness, 4);
        reduce_core(&mut img, &core, 2, DEFAULT_TC).unwrap();
        for y in 10..13 {
            assert!(img.is_black(6, y), "arm stays attached at row {y}");
        }
    }

    #[test]
    fn expand_falls_back_to_the_open_side() {
        // longer edge is the last one, but it touches the border
        let mut img = BinaryImage::new(10, 20);
        for y in 2..18 {
            for x in 5..10 {
                img.set(x, y, BLACK);
            }
        }
        img.set(5, 1, BLACK);
        img.set(5, 18, BLACK);
        let (_, core) = locate(&img, DEFAULT_TC).unwrap();
        let thick = expand_core(&mut img, &core, 7, DEFAULT_TC).unwrap();
        assert_eq!(thick.thickness, 7);
        assert!(img.is_black(3, 10));
        assert_eq!(
            expand_core(&mut bar(3, 10, 0), &core_of(&bar(3, 10, 0)), 5, DEFAULT_TC),
            Err(ModifyError::OutOfBounds)
        );
    }

    #[test]
    fn allocation_order() {
        assert_eq!(
            allocations(2, true, Pins::NONE),
            vec![(0, 2), (2, 0), (1, 1), (0, 1), (1, 0)]
        );
        assert_eq!(
            allocations(2, false, Pins { before: true, after: false }),
            vec![(0, 2), (0, 1)]
        );
    }

    fn core_of(img: &BinaryImage) -> CoreDescriptor {
        locate(img, DEFAULT_TC).unwrap().1
    }

    #[test]
    fn every_letter_thins_and_thickens() {
        // punctuation sits below the selection threshold and is never modified
        let set = GlyphSet::blocky();
        for s in 1..=3 {
            let stroke = STROKE * s;
            for (c, g) in set.glyphs.iter().filter(|(c, _)| LETTERS.contains(**c)) {
                let img = upscale(&g.bitmap, s).pad(6 * s, 6 * s, 6 * s, 6 * s);
                let core = core_of(&img);
                for target in (stroke.saturating_sub(3).max(1)..stroke).chain(stroke + 1..=stroke + 4) {
                    let mut canvas = img.clone();
                    let got = if target < stroke {
                        reduce_core(&mut canvas, &core, target, DEFAULT_TC)
                    } else {
                        expand_core(&mut canvas, &core, target, DEFAULT_TC)
                    };
                    assert_eq!(
                        got.map(|c| c.thickness),
                        Ok(target),
                        "{c:?} scale {s}: {stroke} -> {target}"
                    );
                }
            }
        }
    }

    fn sample_page() -> BinaryImage {
        let spec = CorpusSpec {
            lines_per_page: 3,
            ..CorpusSpec::default()
        };
        generate_page(&spec, 0).unwrap().image
    }

    fn bits(n: usize) -> Vec<u8> {
        (0..n).map(|i| u8::from((i * 5 + 1) % 3 == 0)).collect()
    }

    #[test]
    fn embedding_is_idempotent_and_local() {
        let page = sample_page();
        let cfg = EmbedConfig::default();
        let first = embed_page(&page, &bits(40), &cfg).unwrap();
        assert_eq!(first.report.mismatched_slots, 0);
        let second = embed_page(&first.page, &bits(40), &cfg).unwrap();
        assert_eq!(second.page, first.page);
        assert_eq!(second.report.chars_modified, 0);

        let lines = segment_lines(&page).unwrap();
        let base = lines[BASELINE_LINE].rect;
        assert_eq!(page.crop(base), first.page.crop(base));
    }

    #[test]
    fn es_mode_round_trips() {
        let page = sample_page();
        let cfg = EmbedConfig {
            es_enabled: true,
            ..EmbedConfig::default()
        };
        let e = embed_page(&page, &bits(7), &cfg).unwrap();
        assert_eq!(e.report.mismatched_slots, 0);
        assert!(e.plan.assignments.iter().all(|a| a.sub.is_some()));
        assert!(e.report.slots_used >= 14);
    }

    #[test]
    fn page_level_errors() {
        let page = sample_page();
        let cfg = EmbedConfig::default();
        assert_eq!(embed_page(&page, &[], &cfg).unwrap_err(), EmbedError::EmptyPayload);
        assert_eq!(embed_page(&page, &[2], &cfg).unwrap_err(), EmbedError::InvalidBit);
        assert!(matches!(
            embed_page(&page, &bits(500), &cfg).unwrap_err(),
            EmbedError::InsufficientCapacity { needed: 500, .. }
        ));
        let strong = EmbedConfig { beta: 6, ..cfg };
        assert_eq!(
            embed_page(&page, &bits(4), &strong).unwrap_err(),
            EmbedError::InfeasibleTarget { t_delta: 6, beta: 6 }
        );
        let one_line = page.crop(Rect::new(0, 0, page.width(), 210));
        assert_eq!(embed_page(&one_line, &bits(4), &cfg).unwrap_err(), EmbedError::TooFewLines(1));
        assert_eq!(
            embed_page(&BinaryImage::new(50, 50), &bits(4), &cfg).unwrap_err(),
            EmbedError::Segment(SegmentError::NoTextFound)
        );
    }
}
