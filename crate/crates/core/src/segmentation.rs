//! Projection-profile segmentation of a page into lines, characters and
//! equal-width sub-lines.
//!
//! A line is a maximal band of rows holding ink; a character is a maximal
//! run of ink columns inside a line, tightened vertically to its own ink.
//! "Ink" is every black pixel except those in 8-connected components
//! smaller than [`SegmentConfig::min_blob`], so isolated specks never open
//! a line or merge two characters. Character boxes still address the raw
//! page, specks included.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imageio::{BinaryImage, Rect, BLACK, WHITE};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SegmentError {
    #[error("page contains no text")]
    NoTextFound,
    #[error("line {line} is {width} px wide, narrower than {n_s} sub-lines")]
    LineTooNarrow {
        line: usize,
        width: usize,
        n_s: usize,
    },
}

/// Components with fewer pixels than this are ignored as specks.
pub const DEFAULT_MIN_BLOB: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentConfig {
    pub min_blob: usize,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self {
            min_blob: DEFAULT_MIN_BLOB,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharBox {
    pub line_index: usize,
    pub char_index: usize,
    pub rect: Rect,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineBox {
    pub line_index: usize,
    pub rect: Rect,
    pub chars: Vec<CharBox>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubLine {
    pub line_index: usize,
    pub sub_index: usize,
    /// Half-open column interval in page pixels.
    pub x_span: (usize, usize),
    pub complete_chars: Vec<CharBox>,
}

/// Black pixels that belong to components of at least `min_blob` pixels.
pub fn ink_mask(page: &BinaryImage, min_blob: usize) -> BinaryImage {
    if min_blob <= 1 {
        return page.clone();
    }
    let (w, h) = (page.width(), page.height());
    let mut mask = page.clone();
    let mut seen = vec![false; w * h];
    let mut component = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if seen[start] || page.pixels()[start] != BLACK {
            continue;
        }
        component.clear();
        seen[start] = true;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            component.push(i);
            let (x, y) = (i % w, i / w);
            for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    let j = ny * w + nx;
                    if !seen[j] && page.pixels()[j] == BLACK {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        if component.len() < min_blob {
            for &i in &component {
                mask.set(i % w, i / w, WHITE);
            }
        }
    }
    mask
}

/// Maximal runs of `true` as half-open intervals.
fn true_runs(profile: impl IntoIterator<Item = bool>) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut open: Option<usize> = None;
    let mut n = 0;
    for (i, v) in profile.into_iter().enumerate() {
        match (v, open) {
            (true, None) => open = Some(i),
            (false, Some(s)) => {
                runs.push((s, i));
                open = None;
            }
            _ => {}
        }
        n = i + 1;
    }
    if let Some(s) = open {
        runs.push((s, n));
    }
    runs
}

fn chars_in_band(mask: &BinaryImage, line_index: usize, band: Rect) -> Vec<CharBox> {
    let cols = (band.x0..band.x1()).map(|x| (band.y0..band.y1()).any(|y| mask.is_black(x, y)));
    true_runs(cols)
        .into_iter()
        .enumerate()
        .map(|(char_index, (a, b))| {
            let (x0, x1) = (band.x0 + a, band.x0 + b);
            let rows: Vec<usize> = (band.y0..band.y1())
                .filter(|&y| mask.row(y)[x0..x1].contains(&BLACK))
                .collect();
            let (y0, y1) = (rows[0], rows[rows.len() - 1] + 1);
            CharBox {
                line_index,
                char_index,
                rect: Rect::new(x0, y0, x1 - x0, y1 - y0),
            }
        })
        .collect()
}

fn lines_from_mask(mask: &BinaryImage) -> Result<Vec<LineBox>, SegmentError> {
    let bands = true_runs((0..mask.height()).map(|y| mask.row(y).contains(&BLACK)));
    if bands.is_empty() {
        return Err(SegmentError::NoTextFound);
    }
    Ok(bands
        .into_iter()
        .enumerate()
        .map(|(line_index, (y0, y1))| {
            let (mut x0, mut x1) = (usize::MAX, 0);
            for y in y0..y1 {
                let row = mask.row(y);
                if let Some(first) = row.iter().position(|&p| p == BLACK) {
                    let last = row.iter().rposition(|&p| p == BLACK).unwrap();
                    x0 = x0.min(first);
                    x1 = x1.max(last + 1);
                }
            }
            let rect = Rect::new(x0, y0, x1 - x0, y1 - y0);
            LineBox {
                line_index,
                rect,
                chars: chars_in_band(mask, line_index, rect),
            }
        })
        .collect())
}

/// Lines top to bottom, each with its characters left to right.
pub fn segment_lines(page: &BinaryImage) -> Result<Vec<LineBox>, SegmentError> {
    segment_lines_with(page, &SegmentConfig::default())
}

pub fn segment_lines_with(
    page: &BinaryImage,
    cfg: &SegmentConfig,
) -> Result<Vec<LineBox>, SegmentError> {
    lines_from_mask(&ink_mask(page, cfg.min_blob))
}

/// Characters of one line. Only the line's rectangle is inspected.
pub fn segment_chars(page: &BinaryImage, line: &LineBox) -> Vec<CharBox> {
    segment_chars_with(page, line, &SegmentConfig::default())
}

pub fn segment_chars_with(page: &BinaryImage, line: &LineBox, cfg: &SegmentConfig) -> Vec<CharBox> {
    let crop = page.crop(line.rect);
    let mask = ink_mask(&crop, cfg.min_blob);
    chars_in_band(&mask, line.line_index, crop.bounds())
        .into_iter()
        .map(|mut c| {
            c.rect = c.rect.translate(line.rect.x0, line.rect.y0);
            c
        })
        .collect()
}

/// `n_s` equal spans across the line; the last absorbs the remainder.
pub fn split_sublines(line: &LineBox, n_s: usize) -> Result<Vec<SubLine>, SegmentError> {
    let width = line.rect.width;
    if n_s == 0 || width < n_s {
        return Err(SegmentError::LineTooNarrow {
            line: line.line_index,
            width,
            n_s,
        });
    }
    let base = width / n_s;
    Ok((0..n_s)
        .map(|i| {
            let a = line.rect.x0 + i * base;
            let b = if i + 1 == n_s {
                line.rect.x1()
            } else {
                a + base
            };
            SubLine {
                line_index: line.line_index,
                sub_index: i,
                x_span: (a, b),
                complete_chars: line
                    .chars
                    .iter()
                    .filter(|c| c.rect.x0 >= a && c.rect.x1() <= b)
                    .copied()
                    .collect(),
            }
        })
        .collect())
}

/// Flat `{line, char, x0, y0, w, h}` records for fixture comparison.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxRecord {
    pub line: usize,
    pub char: usize,
    pub x0: usize,
    pub y0: usize,
    pub w: usize,
    pub h: usize,
}

impl From<&CharBox> for BoxRecord {
    fn from(c: &CharBox) -> Self {
        Self {
            line: c.line_index,
            char: c.char_index,
            x0: c.rect.x0,
            y0: c.rect.y0,
            w: c.rect.width,
            h: c.rect.height,
        }
    }
}

pub fn box_records(lines: &[LineBox]) -> Vec<BoxRecord> {
    lines
        .iter()
        .flat_map(|l| l.chars.iter().map(BoxRecord::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn square(page: &mut BinaryImage, x0: usize, y0: usize, w: usize, h: usize) {
        for y in y0..y0 + h {
            for x in x0..x0 + w {
                page.set(x, y, BLACK);
            }
        }
    }

    #[test]
    fn two_bands_two_lines() {
        let mut page = BinaryImage::new(20, 12);
        square(&mut page, 2, 1, 10, 4);
        square(&mut page, 3, 6, 12, 3);
        let lines = segment_lines(&page).unwrap();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0].rect, Rect::new(2, 1, 10, 4));
        assert_eq!(lines[1].rect, Rect::new(3, 6, 12, 3));
    }

    #[test]
    fn white_page_has_no_text() {
        assert_eq!(
            segment_lines(&BinaryImage::new(8, 8)),
            Err(SegmentError::NoTextFound)
        );
    }

    #[test]
    fn single_glyph_tight_box() {
        let mut page = BinaryImage::new(16, 16);
        square(&mut page, 4, 5, 3, 7);
        page.set(7, 11, BLACK);
        let lines = segment_lines(&page).unwrap();
        assert_eq!(lines.len(), 1);
        assert_eq!(lines[0].rect, Rect::new(4, 5, 4, 7));
        assert_eq!(lines[0].chars.len(), 1);
        assert_eq!(lines[0].chars[0].rect, lines[0].rect);
    }

    #[test]
    fn two_squares_two_chars() {
        let mut page = BinaryImage::new(20, 8);
        square(&mut page, 2, 2, 4, 4);
        square(&mut page, 9, 2, 4, 4);
        let lines = segment_lines(&page).unwrap();
        let chars = segment_chars(&page, &lines[0]);
        assert_eq!(chars, lines[0].chars);
        assert_eq!(chars.len(), 2);
        assert_eq!(chars[0].rect, Rect::new(2, 2, 4, 4));
        assert_eq!(chars[1].rect, Rect::new(9, 2, 4, 4));
        assert_eq!((chars[0].char_index, chars[1].char_index), (0, 1));
    }

    #[test]
    fn chars_are_tightened_vertically() {
        let mut page = BinaryImage::new(20, 12);
        square(&mut page, 1, 1, 3, 9);
        square(&mut page, 6, 5, 3, 3);
        let lines = segment_lines(&page).unwrap();
        assert_eq!(lines[0].chars[1].rect, Rect::new(6, 5, 3, 3));
    }

    #[test]
    fn specks_are_not_text() {
        let mut page = BinaryImage::new(30, 20);
        square(&mut page, 2, 8, 4, 4);
        square(&mut page, 9, 8, 4, 4);
        page.set(7, 9, BLACK); // in the gap
        page.set(20, 2, BLACK); // above the line
        page.set(21, 3, BLACK);
        let lines = segment_lines(&page).unwrap();
        assert_eq!(lines.len(), 1);
        assert_eq!(lines[0].chars.len(), 2);
        // raw segmentation sees the specks
        let raw = segment_lines_with(&page, &SegmentConfig { min_blob: 1 }).unwrap();
        assert_eq!(raw.len(), 2);
        assert_eq!(raw[1].chars.len(), 3);
    }

    #[test]
    fn sublines_of_ninety_px_line() {
        let line = LineBox {
            line_index: 1,
            rect: Rect::new(10, 0, 90, 5),
            chars: vec![
                CharBox { line_index: 1, char_index: 0, rect: Rect::new(10, 0, 8, 5) },
                CharBox { line_index: 1, char_index: 1, rect: Rect::new(18, 0, 4, 5) },
                CharBox { line_index: 1, char_index: 2, rect: Rect::new(95, 0, 5, 5) },
            ],
        };
        let subs = split_sublines(&line, 9).unwrap();
        assert_eq!(subs.len(), 9);
        for (i, s) in subs.iter().enumerate() {
            assert_eq!(s.x_span, (10 + 10 * i, 20 + 10 * i));
        }
        assert_eq!(subs[0].complete_chars.len(), 1);
        // char 1 crosses the boundary at x = 20
        assert!(subs.iter().all(|s| s.complete_chars.iter().all(|c| c.char_index != 1)));
        assert_eq!(subs[8].complete_chars[0].char_index, 2);

        let one = split_sublines(&line, 1).unwrap();
        assert_eq!(one[0].complete_chars.len(), 3);
        assert!(matches!(
            split_sublines(&line, 91),
            Err(SegmentError::LineTooNarrow { .. })
        ));
    }

    #[test]
    fn last_subline_takes_remainder() {
        let line = LineBox { line_index: 0, rect: Rect::new(0, 0, 23, 2), chars: vec![] };
        let subs = split_sublines(&line, 4).unwrap();
        let widths: Vec<usize> = subs.iter().map(|s| s.x_span.1 - s.x_span.0).collect();
        assert_eq!(widths, vec![5, 5, 5, 8]);
    }

    fn blocky_page(seed: u64) -> BinaryImage {
        // random 3x3 blocks on a grid so no component is a speck
        let mut page = BinaryImage::new(40, 30);
        let mut s = seed | 1;
        for by in 0..7 {
            for bx in 0..10 {
                s ^= s << 13;
                s ^= s >> 7;
                s ^= s << 17;
                if s % 3 == 0 {
                    square(&mut page, 1 + bx * 4, 1 + by * 4, 3, 3);
                }
            }
        }
        page
    }

    proptest! {
        #[test]
        fn segmentation_partitions_ink(seed in any::<u64>()) {
            let page = blocky_page(seed);
            prop_assume!(page.has_black());
            let lines = segment_lines(&page).unwrap();
            for y in 0..page.height() {
                for x in 0..page.width() {
                    if page.is_black(x, y) {
                        let owners: Vec<_> = lines.iter().filter(|l| l.rect.contains(x, y)).collect();
                        prop_assert_eq!(owners.len(), 1);
                        let in_chars = owners[0].chars.iter().filter(|c| c.rect.contains(x, y)).count();
                        prop_assert_eq!(in_chars, 1);
                    }
                }
            }
            for l in &lines {
                prop_assert!(l.chars.iter().all(|c| l.rect.contains_rect(&c.rect)));
                prop_assert!(l.chars.windows(2).all(|w| w[0].rect.x1() <= w[1].rect.x0));
            }
            prop_assert!(lines.windows(2).all(|w| w[0].rect.y1() < w[1].rect.y0 + 1));
        }

        #[test]
        fn padding_translates_boxes(seed in any::<u64>(), dx in 0usize..5, dy in 0usize..5) {
            let page = blocky_page(seed);
            prop_assume!(page.has_black());
            let a = segment_lines(&page).unwrap();
            let b = segment_lines(&page.pad(dx, dy, 2, 3)).unwrap();
            prop_assert_eq!(a.len(), b.len());
            for (la, lb) in a.iter().zip(&b) {
                prop_assert_eq!(la.rect.translate(dx, dy), lb.rect);
                for (ca, cb) in la.chars.iter().zip(&lb.chars) {
                    prop_assert_eq!(ca.rect.translate(dx, dy), cb.rect);
                }
            }
        }
    }
}
