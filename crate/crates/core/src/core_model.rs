//! Character cores: the dominant cluster of aligned black runs in a glyph.
//!
//! A core is found in three steps. The scan direction is chosen from the
//! mean length of black "longest runs" per row versus per column. Every
//! scanline whose longest run is black contributes one candidate vector.
//! Candidates are then grouped in a single pass into clusters of adjacent,
//! aligned scanlines, and the cluster with the greatest mean run length is
//! the core.
//!
//! All coordinates are 0-based. A scanline index is a row for horizontal
//! cores and a column for vertical ones; a start offset is measured along
//! the scanline.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imageio::{BinaryImage, BLACK};

/// Default cluster tolerance in pixels.
pub const DEFAULT_TC: usize = 10;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CoreError {
    #[error("character image has no black pixels")]
    NoBlackPixels,
}

/// One run-length pair: `len` consecutive pixels of `value`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Run {
    pub len: usize,
    pub value: u8,
}

/// Maximal run-length coding of a scanline.
pub fn rlc(scanline: &[u8]) -> Vec<Run> {
    let mut runs: Vec<Run> = Vec::new();
    for &p in scanline {
        match runs.last_mut() {
            Some(r) if r.value == p => r.len += 1,
            _ => runs.push(Run { len: 1, value: p }),
        }
    }
    runs
}

pub fn decode_runs(runs: &[Run]) -> Vec<u8> {
    runs.iter()
        .flat_map(|r| std::iter::repeat_n(r.value, r.len))
        .collect()
}

/// Longest run and its index; the first one wins a tie.
pub fn longest_run(runs: &[Run]) -> Option<(usize, Run)> {
    let mut best: Option<(usize, Run)> = None;
    for (j, &r) in runs.iter().enumerate() {
        if best.is_none_or(|(_, b)| r.len > b.len) {
            best = Some((j, r));
        }
    }
    best
}

/// 0-based offset of run `j` inside its scanline.
pub fn run_offset(runs: &[Run], j: usize) -> usize {
    runs[..j].iter().map(|r| r.len).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Horizontal,
    Vertical,
}

/// Sum of black longest-run lengths and the number of scanlines whose
/// longest run is black.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DirectionScore {
    pub total: usize,
    pub count: usize,
}

impl DirectionScore {
    /// `total / count` as a rational comparison; an empty score loses.
    fn beats(&self, other: &DirectionScore) -> bool {
        match (self.count, other.count) {
            (0, _) => false,
            (_, 0) => true,
            (a, b) => self.total * b > other.total * a,
        }
    }
}

fn score_scanlines<'a>(lines: impl Iterator<Item = &'a [u8]>) -> DirectionScore {
    let mut score = DirectionScore { total: 0, count: 0 };
    for line in lines {
        if let Some((_, r)) = longest_run(&rlc(line)) {
            if r.value == BLACK {
                score.total += r.len;
                score.count += 1;
            }
        }
    }
    score
}

/// Horizontal and vertical scores of a glyph.
pub fn direction_scores(glyph: &BinaryImage) -> (DirectionScore, DirectionScore) {
    let rows = score_scanlines((0..glyph.height()).map(|y| glyph.row(y)));
    let t = glyph.transpose();
    let cols = score_scanlines((0..t.height()).map(|y| t.row(y)));
    (rows, cols)
}

/// Horizontal only when the row ratio is strictly greater; ties go vertical.
pub fn determine_direction(glyph: &BinaryImage) -> Result<Direction, CoreError> {
    if !glyph.has_black() {
        return Err(CoreError::NoBlackPixels);
    }
    let (h, v) = direction_scores(glyph);
    Ok(if h.beats(&v) {
        Direction::Horizontal
    } else {
        Direction::Vertical
    })
}

/// Longest black run of one scanline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateVector {
    pub index: usize,
    pub start: usize,
    pub len: usize,
}

fn oriented(glyph: &BinaryImage, direction: Direction) -> std::borrow::Cow<'_, BinaryImage> {
    match direction {
        Direction::Horizontal => std::borrow::Cow::Borrowed(glyph),
        Direction::Vertical => std::borrow::Cow::Owned(glyph.transpose()),
    }
}

pub fn candidate_vectors(glyph: &BinaryImage, direction: Direction) -> Vec<CandidateVector> {
    let img = oriented(glyph, direction);
    (0..img.height())
        .filter_map(|y| {
            let runs = rlc(img.row(y));
            let (j, r) = longest_run(&runs)?;
            (r.value == BLACK).then(|| CandidateVector {
                index: y,
                start: run_offset(&runs, j),
                len: r.len,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterStats {
    /// Position of the cluster's first member in the candidate list.
    pub first: usize,
    pub count: usize,
    pub total_len: usize,
}

impl ClusterStats {
    pub fn mean_len(&self) -> f64 {
        self.total_len as f64 / self.count as f64
    }

    fn longer_than(&self, other: &ClusterStats) -> bool {
        self.total_len * other.count > other.total_len * self.count
    }
}

/// Whether `next` may follow `prev` inside one cluster.
pub fn joins(prev: &CandidateVector, next: &CandidateVector, t_c: usize) -> bool {
    next.index == prev.index + 1
        && next.start.abs_diff(prev.start) <= t_c
        && (next.start + next.len).abs_diff(prev.start + prev.len) <= t_c
}

/// Result of the clustering pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub clusters: Vec<ClusterStats>,
    pub chosen: usize,
}

impl Clustering {
    /// Candidate-list positions of the chosen cluster.
    pub fn chosen_range(&self) -> Range<usize> {
        let c = &self.clusters[self.chosen];
        c.first..c.first + c.count
    }
}

/// Single left-to-right pass over candidates ordered by scanline. The
/// cluster with the largest mean length is chosen; the earliest wins ties.
pub fn cluster_candidates(cands: &[CandidateVector], t_c: usize) -> Option<Clustering> {
    let first = cands.first()?;
    let mut clusters = Vec::new();
    let mut current = ClusterStats {
        first: 0,
        count: 1,
        total_len: first.len,
    };
    for (i, pair) in cands.windows(2).enumerate() {
        if joins(&pair[0], &pair[1], t_c) {
            current.count += 1;
            current.total_len += pair[1].len;
        } else {
            clusters.push(current);
            current = ClusterStats {
                first: i + 1,
                count: 1,
                total_len: pair[1].len,
            };
        }
    }
    clusters.push(current);
    let mut chosen = 0;
    for (k, c) in clusters.iter().enumerate().skip(1) {
        if c.longer_than(&clusters[chosen]) {
            chosen = k;
        }
    }
    Some(Clustering { clusters, chosen })
}

/// A character's core.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoreDescriptor {
    pub direction: Direction,
    #[serde(rename = "rows")]
    pub indices: Vec<usize>,
    pub starts: Vec<usize>,
    #[serde(rename = "lens")]
    pub lengths: Vec<usize>,
    pub thickness: usize,
    pub mean_length: f64,
}

impl CoreDescriptor {
    pub fn from_candidates(direction: Direction, members: &[CandidateVector]) -> Self {
        assert!(!members.is_empty());
        let lengths: Vec<usize> = members.iter().map(|c| c.len).collect();
        let thickness = members.len();
        Self {
            direction,
            indices: members.iter().map(|c| c.index).collect(),
            starts: members.iter().map(|c| c.start).collect(),
            mean_length: lengths.iter().sum::<usize>() as f64 / thickness as f64,
            lengths,
            thickness,
        }
    }

    pub fn first_index(&self) -> usize {
        self.indices[0]
    }

    pub fn last_index(&self) -> usize {
        self.indices[self.thickness - 1]
    }

    /// Same core in a frame whose origin is `(dx, dy)` pixels further up
    /// and left.
    pub fn translate(&self, dx: usize, dy: usize) -> Self {
        let (di, ds) = match self.direction {
            Direction::Horizontal => (dy, dx),
            Direction::Vertical => (dx, dy),
        };
        Self {
            indices: self.indices.iter().map(|i| i + di).collect(),
            starts: self.starts.iter().map(|s| s + ds).collect(),
            ..self.clone()
        }
    }

    /// Page coordinates `(x, y)` of position `pos` along scanline `index`.
    pub fn pixel(&self, index: usize, pos: usize) -> (usize, usize) {
        match self.direction {
            Direction::Horizontal => (pos, index),
            Direction::Vertical => (index, pos),
        }
    }
}

/// Core of the longest black run anywhere in the glyph. Used when no
/// scanline in the chosen direction has a black longest run.
fn fallback_core(img: &BinaryImage, direction: Direction) -> CoreDescriptor {
    let mut best: Option<CandidateVector> = None;
    for y in 0..img.height() {
        let runs = rlc(img.row(y));
        let mut offset = 0;
        for r in &runs {
            if r.value == BLACK && best.is_none_or(|b| r.len > b.len) {
                best = Some(CandidateVector {
                    index: y,
                    start: offset,
                    len: r.len,
                });
            }
            offset += r.len;
        }
    }
    CoreDescriptor::from_candidates(direction, &[best.expect("glyph has black pixels")])
}

/// Direction, candidates and clustering composed.
pub fn extract_core(glyph: &BinaryImage, t_c: usize) -> Result<CoreDescriptor, CoreError> {
    let direction = determine_direction(glyph)?;
    let cands = candidate_vectors(glyph, direction);
    Ok(match cluster_candidates(&cands, t_c) {
        Some(clustering) => {
            CoreDescriptor::from_candidates(direction, &cands[clustering.chosen_range()])
        }
        None => fallback_core(&oriented(glyph, direction), direction),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn img(rows: &[&str]) -> BinaryImage {
        BinaryImage::from_ascii(rows).unwrap()
    }

    #[test]
    fn rlc_examples() {
        let r = |len, value| Run { len, value };
        assert_eq!(
            rlc(&[1, 1, 0, 0, 0, 1, 1]),
            vec![r(2, 1), r(3, 0), r(2, 1)]
        );
        assert_eq!(rlc(&[0, 0, 0, 0]), vec![r(4, 0)]);
    }

    #[test]
    fn longest_run_first_wins() {
        let r = |len, value| Run { len, value };
        let runs = [r(2, 1), r(3, 0), r(2, 1)];
        assert_eq!(longest_run(&runs), Some((1, r(3, 0))));
        // 1-based start of that run is 2 + 1 = 3
        assert_eq!(run_offset(&runs, 1) + 1, 3);
        assert_eq!(longest_run(&[r(2, 0), r(1, 1), r(2, 0)]), Some((0, r(2, 0))));
        assert_eq!(longest_run(&[]), None);
    }

    #[test]
    fn direction_of_bars() {
        let bar = BinaryImage::filled(10, 1, BLACK);
        assert_eq!(determine_direction(&bar), Ok(Direction::Horizontal));
        assert_eq!(determine_direction(&bar.transpose()), Ok(Direction::Vertical));
        let square = BinaryImage::filled(5, 5, BLACK);
        assert_eq!(determine_direction(&square), Ok(Direction::Vertical));
        assert_eq!(
            determine_direction(&BinaryImage::new(3, 3)),
            Err(CoreError::NoBlackPixels)
        );
    }

    #[test]
    fn candidate_from_single_row() {
        let g = img(&["..###.."]);
        let c = candidate_vectors(&g, Direction::Horizontal);
        // 1-based start 3 is offset 2
        assert_eq!(c, vec![CandidateVector { index: 0, start: 2, len: 3 }]);
        let white_row = img(&["..###..", "......."]);
        assert_eq!(candidate_vectors(&white_row, Direction::Horizontal).len(), 1);
    }

    #[test]
    fn candidates_of_hand_read_glyph() {
        // 8x8 'F'-like glyph; longest runs read by hand.
        let g = img(&[
            "########", // row 0: black 8 at 0
            "########", // row 1: black 8 at 0
            "##......", // row 2: white 6 -> none
            "######..", // row 3: black 6 at 0
            "######..", // row 4: black 6 at 0
            "##......", // row 5: none
            "##......", // row 6: none
            "##......", // row 7: none
        ]);
        let c = candidate_vectors(&g, Direction::Horizontal);
        let expect = [(0, 0, 8), (1, 0, 8), (3, 0, 6), (4, 0, 6)];
        assert_eq!(c.len(), expect.len());
        for (cv, (i, s, l)) in c.iter().zip(expect) {
            assert_eq!((cv.index, cv.start, cv.len), (i, s, l));
        }
        // columns 0-1 run 8; columns 2-5: black 2 then white 1 then black 2 then
        // white 3 -> white; columns 6-7: black 2, white 6 -> white
        let v = candidate_vectors(&g, Direction::Vertical);
        assert_eq!(v.len(), 2);
        assert!(v.iter().all(|c| c.len == 8 && c.start == 0));
        // U_h/K_h = 28/4 = 7 < U_v/K_v = 16/2 = 8
        assert_eq!(determine_direction(&g), Ok(Direction::Vertical));
    }

    #[test]
    fn cluster_hand_trace() {
        let cv = |index, start, len| CandidateVector { index, start, len };
        let cands = [cv(3, 10, 20), cv(4, 11, 21), cv(5, 10, 20)];
        let cl = cluster_candidates(&cands, 10).unwrap();
        assert_eq!(cl.clusters.len(), 1);
        let core = CoreDescriptor::from_candidates(Direction::Horizontal, &cands[cl.chosen_range()]);
        assert_eq!(core.thickness, 3);
        assert_eq!(core.mean_length, 61.0 / 3.0);

        let gap = [cv(3, 0, 4), cv(5, 0, 6)];
        let cl = cluster_candidates(&gap, 10).unwrap();
        assert_eq!(cl.clusters.len(), 2);
        assert_eq!(cl.chosen_range(), 1..2);
    }

    #[test]
    fn cluster_tie_keeps_first() {
        let cv = |index, start, len| CandidateVector { index, start, len };
        let cands = [cv(0, 0, 5), cv(1, 0, 5), cv(3, 0, 5)];
        let cl = cluster_candidates(&cands, 10).unwrap();
        assert_eq!(cl.chosen, 0);
        assert_eq!(cl.chosen_range(), 0..2);
    }

    #[test]
    fn cluster_alignment_rules() {
        let cv = |index, start, len| CandidateVector { index, start, len };
        // start moves by 3 > t_c = 2
        let cands = [cv(0, 0, 5), cv(1, 3, 5)];
        assert_eq!(cluster_candidates(&cands, 2).unwrap().clusters.len(), 2);
        // same start, end moves by 3
        let cands = [cv(0, 0, 5), cv(1, 0, 8)];
        assert_eq!(cluster_candidates(&cands, 2).unwrap().clusters.len(), 2);
        assert_eq!(cluster_candidates(&cands, 3).unwrap().clusters.len(), 1);
    }

    #[test]
    fn bar_core() {
        let mut g = BinaryImage::filled(10, 3, BLACK);
        let core = extract_core(&g, DEFAULT_TC).unwrap();
        assert_eq!(core.direction, Direction::Horizontal);
        assert_eq!(core.thickness, 3);
        assert_eq!(core.mean_length, 10.0);
        assert_eq!(core.indices, vec![0, 1, 2]);

        // isolated pixel two rows below leaves the core untouched
        g = g.pad(0, 0, 0, 3);
        g.set(4, 4, BLACK);
        let noisy = extract_core(&g, DEFAULT_TC).unwrap();
        assert_eq!(noisy, core);
    }

    #[test]
    fn vertical_core_coordinates_map_back() {
        let g = img(&[
            "..##....",
            "..##....",
            "..##....",
            "..######",
            "..##....",
            "..##....",
            "..##....",
        ]);
        let core = extract_core(&g, DEFAULT_TC).unwrap();
        assert_eq!(core.direction, Direction::Vertical);
        assert_eq!(core.indices, vec![2, 3]);
        assert_eq!(core.starts, vec![0, 0]);
        assert_eq!(core.lengths, vec![7, 7]);
        let t = extract_core(&g.transpose(), DEFAULT_TC).unwrap();
        assert_eq!(t.direction, Direction::Horizontal);
        assert_eq!((t.indices.clone(), t.starts.clone()), (core.indices, core.starts));
    }

    #[test]
    fn diagonal_glyph_falls_back() {
        // no scanline has a black longest run in either direction
        let g = img(&["#...", ".#..", "..#.", "...#"]);
        let (h, v) = direction_scores(&g);
        assert_eq!((h.count, v.count), (0, 0));
        let core = extract_core(&g, DEFAULT_TC).unwrap();
        assert_eq!(core.direction, Direction::Vertical);
        assert_eq!(core.thickness, 1);
        assert_eq!(core.lengths, vec![1]);
    }

    #[test]
    fn descriptor_json_shape() {
        let core = extract_core(&BinaryImage::filled(4, 2, BLACK), 10).unwrap();
        let v = serde_json::to_value(&core).unwrap();
        assert_eq!(v["direction"], "horizontal");
        assert_eq!(v["rows"], serde_json::json!([0, 1]));
        assert_eq!(v["lens"], serde_json::json!([4, 4]));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn rlc_round_trip(bits in any::<u32>(), len in 1usize..=32) {
            let line: Vec<u8> = (0..len).map(|i| ((bits >> i) & 1) as u8).collect();
            let runs = rlc(&line);
            prop_assert_eq!(decode_runs(&runs), line.clone());
            prop_assert!(runs.windows(2).all(|w| w[0].value != w[1].value));
            prop_assert_eq!(runs.iter().map(|r| r.len).sum::<usize>(), len);
        }

        #[test]
        fn mean_length_is_exact(w in 1usize..12, h in 1usize..12, seed in any::<u64>()) {
            let mut s = seed | 1;
            let px: Vec<u8> = (0..w * h).map(|_| { s ^= s << 13; s ^= s >> 7; s ^= s << 17; (s & 1) as u8 }).collect();
            let g = BinaryImage::from_pixels(w, h, px).unwrap();
            prop_assume!(g.has_black());
            let core = extract_core(&g, DEFAULT_TC).unwrap();
            prop_assert_eq!(core.indices.len(), core.thickness);
            prop_assert_eq!(core.starts.len(), core.thickness);
            prop_assert!(core.indices.windows(2).all(|p| p[1] == p[0] + 1));
            let recomputed = core.lengths.iter().sum::<usize>() as f64 / core.thickness as f64;
            prop_assert_eq!(recomputed, core.mean_length);
        }

        #[test]
        fn transpose_duality(w in 1usize..10, h in 1usize..10, seed in any::<u64>()) {
            let mut s = seed | 1;
            let px: Vec<u8> = (0..w * h).map(|_| { s ^= s << 13; s ^= s >> 7; s ^= s << 17; u8::from(s % 3 == 0) }).collect();
            let g = BinaryImage::from_pixels(w, h, px).unwrap();
            prop_assume!(g.has_black());
            let (hs, vs) = direction_scores(&g);
            if hs.beats(&vs) {
                prop_assert_eq!(determine_direction(&g.transpose()).unwrap(), Direction::Vertical);
            }
        }
    }
}
