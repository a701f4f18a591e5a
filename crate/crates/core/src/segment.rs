//! Line-based decomposition of proofs.
//!
//! Vertical verification cuts a proof into fixed-size chunks. Progressive
//! verification builds a bisection tree: the full proof at depth 0, then
//! halves, quarters and so on, stopping at segments of at most `l` lines.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SegmentError {
    #[error("proof is empty")]
    EmptyProof,
    #[error("segment [{start}, {end}) has a single line and cannot be bisected")]
    NotBisectable { start: usize, end: usize },
    #[error("chunk length must be at least 1")]
    ZeroLength,
    #[error("progressive schedule needs at least one level")]
    ZeroLevels,
}

/// A contiguous line range `[start_line, end_line)` of a proof.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Segment {
    pub start_line: usize,
    pub end_line: usize,
    pub text: String,
    /// 0 for the full proof.
    pub depth: u32,
    pub index_at_depth: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end_line - self.start_line
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains_line(&self, line: usize) -> bool {
        (self.start_line..self.end_line).contains(&line)
    }
}

/// Splits on `\n`, dropping a trailing `\r` from each line. Blank lines are kept.
pub fn split_lines(proof: &str) -> Result<Vec<&str>, SegmentError> {
    if proof.is_empty() {
        return Err(SegmentError::EmptyProof);
    }
    Ok(proof
        .split('\n')
        .map(|line| line.strip_suffix('\r').unwrap_or(line))
        .collect())
}

/// A proof split into lines, from which segments are cut.
#[derive(Debug, Clone)]
pub struct ProofLines<'a> {
    lines: Vec<&'a str>,
}

impl<'a> ProofLines<'a> {
    pub fn new(proof: &'a str) -> Result<Self, SegmentError> {
        Ok(Self {
            lines: split_lines(proof)?,
        })
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn segment(&self, start: usize, end: usize, depth: u32, index_at_depth: usize) -> Segment {
        Segment {
            start_line: start,
            end_line: end,
            text: self.lines[start..end].join("\n"),
            depth,
            index_at_depth,
        }
    }

    pub fn full(&self) -> Segment {
        self.segment(0, self.len(), 0, 0)
    }

    /// Left child gets `floor(len / 2)` lines, right child the rest.
    pub fn bisect(&self, parent: &Segment) -> Result<(Segment, Segment), SegmentError> {
        if parent.len() < 2 {
            return Err(SegmentError::NotBisectable {
                start: parent.start_line,
                end: parent.end_line,
            });
        }
        let mid = parent.start_line + parent.len() / 2;
        let depth = parent.depth + 1;
        let left = self.segment(parent.start_line, mid, depth, 2 * parent.index_at_depth);
        let right = self.segment(mid, parent.end_line, depth, 2 * parent.index_at_depth + 1);
        Ok((left, right))
    }
}

/// Consecutive chunks of `l` lines; the last chunk holds the remainder.
pub fn chunk_by_lines(proof: &str, l: usize) -> Result<Vec<Segment>, SegmentError> {
    if l == 0 {
        return Err(SegmentError::ZeroLength);
    }
    let lines = ProofLines::new(proof)?;
    let total = lines.len();
    Ok((0..total)
        .step_by(l)
        .enumerate()
        .map(|(i, start)| lines.segment(start, (start + l).min(total), 1, i))
        .collect())
}

/// Bisects `segment` against the proof it was cut from.
pub fn bisect(proof: &str, segment: &Segment) -> Result<(Segment, Segment), SegmentError> {
    ProofLines::new(proof)?.bisect(segment)
}

/// Levels of the progressive bisection tree.
///
/// Level 0 is the full proof. Each following level bisects every segment of
/// the previous level that is longer than `l` lines; shorter segments are
/// final and not carried forward. At most `n` levels are produced, so the
/// schedule never holds more than `2^n - 1` segments.
pub fn progressive_schedule(
    proof: &str,
    n: usize,
    l: usize,
) -> Result<Vec<Vec<Segment>>, SegmentError> {
    if n == 0 {
        return Err(SegmentError::ZeroLevels);
    }
    if l == 0 {
        return Err(SegmentError::ZeroLength);
    }
    let lines = ProofLines::new(proof)?;
    let mut levels = vec![vec![lines.full()]];
    while levels.len() < n {
        let mut next = Vec::new();
        for segment in levels.last().expect("at least one level") {
            if segment.len() > l && segment.len() >= 2 {
                let (left, right) = lines.bisect(segment)?;
                next.push(left);
                next.push(right);
            }
        }
        if next.is_empty() {
            break;
        }
        levels.push(next);
    }
    Ok(levels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn proof_of(lines: usize) -> String {
        (0..lines)
            .map(|i| format!("line {i}"))
            .collect::<Vec<_>>()
            .join("\n")
    }

    fn spans(segments: &[Segment]) -> Vec<(usize, usize)> {
        segments.iter().map(|s| (s.start_line, s.end_line)).collect()
    }

    #[test]
    fn split_rules() {
        assert_eq!(split_lines("a\nb\nc").unwrap(), ["a", "b", "c"]);
        assert_eq!(split_lines("a\r\nb").unwrap(), ["a", "b"]);
        assert_eq!(split_lines("a\n\nb").unwrap(), ["a", "", "b"]);
        assert_eq!(split_lines(""), Err(SegmentError::EmptyProof));
    }

    #[test]
    fn chunking_places_remainder_last() {
        let chunks = chunk_by_lines(&proof_of(13), 6).unwrap();
        assert_eq!(spans(&chunks), [(0, 6), (6, 12), (12, 13)]);
        assert_eq!(chunks[2].text, "line 12");
        assert_eq!(chunk_by_lines(&proof_of(6), 6).unwrap().len(), 1);
        assert_eq!(chunk_by_lines(&proof_of(1), 100).unwrap().len(), 1);
        assert_eq!(chunk_by_lines("x", 0), Err(SegmentError::ZeroLength));
    }

    #[test]
    fn bisection_uses_floor() {
        let proof = proof_of(10);
        let lines = ProofLines::new(&proof).unwrap();
        let (a, b) = lines.bisect(&lines.full()).unwrap();
        assert_eq!((a.start_line, a.end_line, b.start_line, b.end_line), (0, 5, 5, 10));
        assert_eq!((a.depth, a.index_at_depth, b.index_at_depth), (1, 0, 1));

        let nine = proof_of(9);
        let lines = ProofLines::new(&nine).unwrap();
        let (a, b) = lines.bisect(&lines.full()).unwrap();
        assert_eq!((a.end_line, b.start_line, b.end_line), (4, 4, 9));

        let parent = lines.segment(3, 5, 2, 1);
        let (a, b) = lines.bisect(&parent).unwrap();
        assert_eq!(spans(&[a.clone(), b.clone()]), [(3, 4), (4, 5)]);
        assert_eq!((a.depth, a.index_at_depth, b.index_at_depth), (3, 2, 3));

        let single = lines.segment(4, 5, 3, 0);
        assert!(matches!(
            lines.bisect(&single),
            Err(SegmentError::NotBisectable { .. })
        ));
    }

    #[test]
    fn schedule_examples() {
        let sizes = |lines, n, l| -> Vec<usize> {
            progressive_schedule(&proof_of(lines), n, l)
                .unwrap()
                .iter()
                .map(Vec::len)
                .collect()
        };
        assert_eq!(sizes(48, 3, 6), [1, 2, 4]);
        assert_eq!(sizes(4, 3, 6), [1]);
        // 20 -> 10,10 -> 5,5,5,5; a 5-line segment is within the floor of 6.
        assert_eq!(sizes(20, 4, 6), [1, 2, 4]);
        assert_eq!(sizes(1, 5, 1), [1]);
    }

    #[test]
    fn schedule_levels_are_ordered_by_index() {
        let schedule = progressive_schedule(&proof_of(48), 3, 6).unwrap();
        assert_eq!(
            spans(&schedule[2]),
            [(0, 12), (12, 24), (24, 36), (36, 48)]
        );
        for level in &schedule {
            assert!(level.windows(2).all(|w| w[0].index_at_depth < w[1].index_at_depth));
        }
    }
}
