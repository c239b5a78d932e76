//! Deterministic synthetic text pages with ground-truth character boxes.
//!
//! Pages are laid out at scale 1 and then upscaled by pixel replication,
//! so every coordinate at scale `s` is exactly `s` times its scale-1 value.

mod glyphs;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imageio::{self, BinaryImage, ImageError, BLACK};
use crate::segmentation::BoxRecord;

pub use glyphs::{Glyph, CAP_HEIGHT, LETTERS, PUNCTUATION, STROKE};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("glyph {0:?} is not in the glyph set")]
    UnknownGlyph(char),
    #[error("line {line} needs {needed} px but only {available} px fit")]
    LineTooWide {
        line: usize,
        needed: usize,
        available: usize,
    },
    #[error("too many lines for the page: {0}")]
    PageOverflow(usize),
    #[error("invalid corpus spec: {0}")]
    InvalidSpec(String),
    #[error("corpus metadata: {0}")]
    Metadata(#[from] serde_json::Error),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Glyph bitmaps plus the layout metrics used to set them, all at scale 1.
#[derive(Debug, Clone)]
pub struct GlyphSet {
    pub glyphs: BTreeMap<char, Glyph>,
    /// White columns between adjacent glyphs of a word.
    pub gap: usize,
    /// Extra white columns for a space.
    pub space: usize,
    /// Distance between the cap lines of consecutive text lines.
    pub line_pitch: usize,
    pub page_width: usize,
    pub page_height: usize,
    pub margin: usize,
}

impl GlyphSet {
    pub fn blocky() -> Self {
        Self {
            glyphs: glyphs::blocky(),
            gap: 4,
            space: 8,
            line_pitch: 40,
            page_width: 827,
            page_height: 1169,
            margin: 80,
        }
    }

    pub fn get(&self, c: char) -> Result<&Glyph, CorpusError> {
        self.glyphs.get(&c).ok_or(CorpusError::UnknownGlyph(c))
    }

    /// Width of `text` set on one line.
    pub fn line_width(&self, text: &str) -> Result<usize, CorpusError> {
        let mut x = 0;
        let mut pending_gap = 0;
        for c in text.chars() {
            if c == ' ' {
                pending_gap += self.space;
                continue;
            }
            if x > 0 {
                x += pending_gap + self.gap;
            }
            pending_gap = 0;
            x += self.get(c)?.bitmap.width();
        }
        Ok(x)
    }
}

/// A rendered page and where each glyph landed.
#[derive(Debug, Clone)]
pub struct RenderedPage {
    pub image: BinaryImage,
    pub boxes: Vec<BoxRecord>,
}

/// Nearest-neighbour enlargement by an integer factor.
pub fn upscale(img: &BinaryImage, s: usize) -> BinaryImage {
    if s == 1 {
        return img.clone();
    }
    let mut out = BinaryImage::new(img.width() * s, img.height() * s);
    for y in 0..out.height() {
        for x in 0..out.width() {
            if img.is_black(x / s, y / s) {
                out.set(x, y, BLACK);
            }
        }
    }
    out
}

/// Sets each `\n`-separated line of `text`, one line per pitch, starting at
/// the top-left margin.
pub fn render_page(text: &str, set: &GlyphSet, scale: usize) -> Result<RenderedPage, CorpusError> {
    if scale == 0 {
        return Err(CorpusError::InvalidSpec("scale must be at least 1".into()));
    }
    let lines: Vec<&str> = text.lines().collect();
    let needed = set.margin + lines.len() * set.line_pitch;
    if needed + set.margin > set.page_height {
        return Err(CorpusError::PageOverflow(lines.len()));
    }
    let available = set.page_width - 2 * set.margin;
    let mut page = BinaryImage::new(set.page_width, set.page_height);
    let mut boxes = Vec::new();
    for (line, content) in lines.iter().enumerate() {
        let width = set.line_width(content)?;
        if width > available {
            return Err(CorpusError::LineTooWide {
                line,
                needed: width,
                available,
            });
        }
        let top = set.margin + line * set.line_pitch;
        let mut x = set.margin;
        let mut pending_gap = 0;
        let mut first = true;
        let mut index = 0;
        for c in content.chars() {
            if c == ' ' {
                pending_gap += set.space;
                continue;
            }
            if !first {
                x += pending_gap + set.gap;
            }
            first = false;
            pending_gap = 0;
            let g = set.get(c)?;
            let y = top + g.y_offset;
            page.paste(&g.bitmap, x, y);
            boxes.push(BoxRecord {
                line,
                char: index,
                x0: x * scale,
                y0: y * scale,
                w: g.bitmap.width() * scale,
                h: g.bitmap.height() * scale,
            });
            x += g.bitmap.width();
            index += 1;
        }
    }
    Ok(RenderedPage {
        image: upscale(&page, scale),
        boxes,
    })
}

/// Parameters of a generated corpus; echoed into `corpus.json`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub n_pages: usize,
    pub lines_per_page: usize,
    pub seed: u64,
    pub scale: usize,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            n_pages: 10,
            lines_per_page: 6,
            seed: 0,
            scale: 2,
        }
    }
}

/// Glyphs per line, and how many of them are punctuation.
pub const GLYPHS_PER_LINE: usize = 40;
pub const PUNCT_PER_LINE: usize = 8;

/// Random text for one page. Every line has exactly [`GLYPHS_PER_LINE`]
/// glyphs of which [`PUNCT_PER_LINE`] are punctuation.
pub fn page_text(rng: &mut impl Rng, set: &GlyphSet, lines: usize) -> String {
    let letters: Vec<char> = LETTERS.chars().collect();
    let punct: Vec<char> = PUNCTUATION.chars().collect();
    let available = set.page_width - 2 * set.margin;
    let mut out = Vec::with_capacity(lines);
    while out.len() < lines {
        let mut slots = [false; GLYPHS_PER_LINE];
        let mut placed = 0;
        while placed < PUNCT_PER_LINE {
            let i = rng.random_range(1..GLYPHS_PER_LINE);
            if !slots[i] && !slots[i - 1] {
                slots[i] = true;
                placed += 1;
            }
        }
        let mut line = String::new();
        for (i, &is_punct) in slots.iter().enumerate() {
            if is_punct {
                line.push(punct[rng.random_range(0..punct.len())]);
                if rng.random_bool(0.6) {
                    line.push(' ');
                }
            } else {
                if i > 0 && !line.ends_with(' ') && rng.random_bool(0.15) {
                    line.push(' ');
                }
                line.push(letters[rng.random_range(0..letters.len())]);
            }
        }
        let line = line.trim_end().to_string();
        // redraw the rare line that does not fit
        if set.line_width(&line).is_ok_and(|w| w <= available) {
            out.push(line);
        }
    }
    out.join("\n")
}

/// Ground truth stored next to each page.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PageTruth {
    pub index: usize,
    pub scale: usize,
    pub width: usize,
    pub height: usize,
    pub lines: Vec<String>,
    pub boxes: Vec<BoxRecord>,
}

#[derive(Debug, Clone)]
pub struct GeneratedPage {
    pub image: BinaryImage,
    pub truth: PageTruth,
}

fn check_spec(spec: &CorpusSpec) -> Result<(), CorpusError> {
    if spec.n_pages == 0 {
        return Err(CorpusError::InvalidSpec("n_pages must be at least 1".into()));
    }
    if spec.lines_per_page < 2 {
        return Err(CorpusError::InvalidSpec(
            "lines_per_page must be at least 2".into(),
        ));
    }
    if spec.scale == 0 {
        return Err(CorpusError::InvalidSpec("scale must be at least 1".into()));
    }
    Ok(())
}

/// Page `index` of the corpus described by `spec`.
pub fn generate_page(spec: &CorpusSpec, index: usize) -> Result<GeneratedPage, CorpusError> {
    check_spec(spec)?;
    let set = GlyphSet::blocky();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64);
    let text = page_text(&mut rng, &set, spec.lines_per_page);
    let rendered = render_page(&text, &set, spec.scale)?;
    Ok(GeneratedPage {
        truth: PageTruth {
            index,
            scale: spec.scale,
            width: rendered.image.width(),
            height: rendered.image.height(),
            lines: text.lines().map(str::to_string).collect(),
            boxes: rendered.boxes,
        },
        image: rendered.image,
    })
}

pub fn generate(spec: &CorpusSpec) -> Result<Vec<GeneratedPage>, CorpusError> {
    (0..spec.n_pages).map(|i| generate_page(spec, i)).collect()
}

/// Contents of `corpus.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub schema: u32,
    pub glyph_set: String,
    #[serde(flatten)]
    pub spec: CorpusSpec,
    pub pages: Vec<String>,
}

pub fn page_stem(index: usize) -> String {
    format!("{index:03}")
}

/// Writes `NNN.pbm`, `NNN.json` and `corpus.json` into `dir`.
pub fn make_corpus(spec: &CorpusSpec, dir: impl AsRef<Path>) -> Result<CorpusManifest, CorpusError> {
    check_spec(spec)?;
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut pages = Vec::with_capacity(spec.n_pages);
    for i in 0..spec.n_pages {
        let page = generate_page(spec, i)?;
        let stem = page_stem(i);
        imageio::save_image(&page.image, dir.join(format!("{stem}.pbm")))?;
        fs::write(
            dir.join(format!("{stem}.json")),
            serde_json::to_string_pretty(&page.truth)? + "\n",
        )?;
        pages.push(format!("{stem}.pbm"));
    }
    let manifest = CorpusManifest {
        schema: 1,
        glyph_set: "blocky".into(),
        spec: *spec,
        pages,
    };
    fs::write(
        dir.join("corpus.json"),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    Ok(manifest)
}

/// Page paths listed in a corpus directory's manifest.
pub fn corpus_pages(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>, CorpusError> {
    let dir = dir.as_ref();
    let manifest: CorpusManifest =
        serde_json::from_str(&fs::read_to_string(dir.join("corpus.json"))?)?;
    Ok(manifest.pages.iter().map(|p| dir.join(p)).collect())
}
