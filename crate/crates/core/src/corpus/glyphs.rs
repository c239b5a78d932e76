//! Built-in blocky bitmap font.
//!
//! Capital letters are 17 px tall with 3 px strokes. Each letter has a
//! single full-height vertical stem; every other stroke is shorter, so the
//! stem is the unambiguous core. Letters whose usual shapes have no such
//! stem (S, V, X, Z) are left out.

use std::collections::BTreeMap;

use crate::imageio::{BinaryImage, BLACK};

/// Height of a capital letter at scale 1.
pub const CAP_HEIGHT: usize = 17;
pub const STROKE: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Glyph {
    pub bitmap: BinaryImage,
    /// Rows between the cap line and the bitmap's first row.
    pub y_offset: usize,
}

type Block = (usize, usize, usize, usize);

fn build(width: usize, height: usize, blocks: &[Block]) -> BinaryImage {
    let mut img = BinaryImage::new(width, height);
    for &(x0, y0, w, h) in blocks {
        for y in y0..y0 + h {
            for x in x0..x0 + w {
                img.set(x, y, BLACK);
            }
        }
    }
    img
}

const STEM: Block = (0, 0, 3, 17);

fn letter(c: char) -> Option<(usize, Vec<Block>)> {
    let (w, blocks): (usize, Vec<Block>) = match c {
        'A' => (10, vec![STEM, (3, 0, 4, 3), (7, 3, 3, 14), (3, 7, 4, 3)]),
        'B' => (
            10,
            vec![
                STEM,
                (3, 0, 4, 3),
                (7, 3, 3, 4),
                (3, 7, 4, 3),
                (7, 10, 3, 4),
                (3, 14, 4, 3),
            ],
        ),
        'C' => (10, vec![STEM, (3, 0, 7, 3), (3, 14, 7, 3)]),
        'D' => (9, vec![STEM, (3, 0, 3, 3), (6, 3, 3, 11), (3, 14, 3, 3)]),
        'E' => (10, vec![STEM, (3, 0, 7, 3), (3, 7, 5, 3), (3, 14, 7, 3)]),
        'F' => (10, vec![STEM, (3, 0, 7, 3), (3, 7, 5, 3)]),
        'G' => (
            10,
            vec![STEM, (3, 0, 7, 3), (3, 14, 7, 3), (7, 8, 3, 6), (5, 8, 2, 3)],
        ),
        'H' => (10, vec![STEM, (7, 3, 3, 14), (3, 7, 4, 3)]),
        'I' => (9, vec![(0, 0, 9, 3), (3, 3, 3, 11), (0, 14, 9, 3)]),
        'J' => (
            10,
            vec![(7, 0, 3, 17), (4, 0, 3, 3), (0, 14, 7, 3), (0, 11, 3, 3)],
        ),
        'K' => (
            10,
            vec![
                STEM,
                (3, 7, 3, 3),
                (5, 4, 3, 3),
                (7, 1, 3, 3),
                (5, 10, 3, 3),
                (7, 13, 3, 4),
            ],
        ),
        'L' => (10, vec![STEM, (3, 14, 7, 3)]),
        'M' => (13, vec![STEM, (3, 0, 7, 3), (5, 3, 3, 6), (10, 3, 3, 14)]),
        'N' => (
            10,
            vec![STEM, (3, 3, 2, 4), (5, 7, 2, 4), (7, 0, 3, 14)],
        ),
        'O' => (10, vec![STEM, (3, 0, 4, 3), (3, 14, 4, 3), (7, 2, 3, 13)]),
        'P' => (10, vec![STEM, (3, 0, 4, 3), (7, 3, 3, 4), (3, 7, 4, 3)]),
        'Q' => (
            10,
            vec![STEM, (3, 0, 4, 3), (7, 2, 3, 10), (3, 14, 5, 3), (8, 15, 2, 2)],
        ),
        'R' => (
            10,
            vec![
                STEM,
                (3, 0, 4, 3),
                (7, 3, 3, 4),
                (3, 7, 4, 3),
                (5, 10, 3, 3),
                (7, 13, 3, 4),
            ],
        ),
        'T' => (9, vec![(0, 0, 9, 3), (3, 3, 3, 14)]),
        'U' => (10, vec![STEM, (3, 14, 4, 3), (7, 0, 3, 14)]),
        'W' => (
            13,
            vec![STEM, (3, 14, 7, 3), (5, 5, 3, 9), (10, 0, 3, 14)],
        ),
        'Y' => (9, vec![(0, 0, 3, 5), (6, 0, 3, 5), (3, 3, 3, 14)]),
        _ => return None,
    };
    Some((w, blocks))
}

pub const LETTERS: &str = "ABCDEFGHIJKLMNOPQRTUWY";
pub const PUNCTUATION: &str = ".,:-'";

/// The shipped glyph set at scale 1.
pub fn blocky() -> BTreeMap<char, Glyph> {
    let mut map = BTreeMap::new();
    for c in LETTERS.chars() {
        let (w, blocks) = letter(c).expect("letter table covers LETTERS");
        map.insert(
            c,
            Glyph {
                bitmap: build(w, CAP_HEIGHT, &blocks),
                y_offset: 0,
            },
        );
    }
    let punct: [(char, usize, usize, usize, Vec<Block>); 5] = [
        ('.', 3, 3, 14, vec![(0, 0, 3, 3)]),
        (',', 3, 5, 14, vec![(0, 0, 3, 3), (1, 3, 2, 1), (0, 4, 2, 1)]),
        (':', 3, 12, 5, vec![(0, 0, 3, 3), (0, 9, 3, 3)]),
        ('-', 6, 3, 7, vec![(0, 0, 6, 3)]),
        ('\'', 3, 5, 0, vec![(0, 0, 3, 5)]),
    ];
    for (c, w, h, y_offset, blocks) in punct {
        map.insert(
            c,
            Glyph {
                bitmap: build(w, h, &blocks),
                y_offset,
            },
        );
    }
    map
}
