//! Unit-cost alignment with operation counts.
//!
//! Counts are oriented as the edits turning the first argument (the
//! reference) into the second (the read): a deletion is a reference base
//! missing from the read, an insertion an extra read base. Traceback
//! prefers, at every cell, diagonal (match or substitution) over deletion
//! over insertion, which makes the counts deterministic.
//!
//! The free-end-gap alignment scores +1 per match and -1 per edit: with
//! unit edit costs alone, skipping both sequences entirely would always be
//! optimal.

use serde::{Deserialize, Serialize};

use crate::{Nucleotide, Sequence};

const INF: u32 = u32::MAX / 4;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OpCounts {
    pub substitutions: u32,
    pub insertions: u32,
    pub deletions: u32,
    pub distance: u32,
}

impl OpCounts {
    pub fn new(substitutions: u32, insertions: u32, deletions: u32) -> Self {
        Self { substitutions, insertions, deletions, distance: substitutions + insertions + deletions }
    }
}

/// Operation counts plus the substitution spectrum, indexed
/// `[reference base][read base]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Alignment {
    pub ops: OpCounts,
    /// Aligned columns where both bases agree.
    pub matches: u32,
    pub substitution_pairs: [[u32; 4]; 4],
}

impl Alignment {
    fn record_sub(&mut self, from: Nucleotide, to: Nucleotide) {
        self.ops.substitutions += 1;
        self.substitution_pairs[from.index()][to.index()] += 1;
    }

    fn finish(mut self) -> Self {
        self.ops.distance = self.ops.substitutions + self.ops.insertions + self.ops.deletions;
        self
    }
}

/// Row-major DP matrix accessor shared by the tracebacks.
trait Cells {
    fn at(&self, i: usize, j: usize) -> u32;
}

struct Full<'a> {
    d: &'a [u32],
    cols: usize,
}

impl Cells for Full<'_> {
    #[inline]
    fn at(&self, i: usize, j: usize) -> u32 {
        self.d[i * self.cols + j]
    }
}

struct Banded<'a> {
    d: &'a [u32],
    band: usize,
    width: usize,
}

impl Cells for Banded<'_> {
    #[inline]
    fn at(&self, i: usize, j: usize) -> u32 {
        if j + self.band < i || j > i + self.band {
            return INF;
        }
        self.d[i * self.width + (j + self.band - i)]
    }
}

/// Walks back from `(i, j)` to the origin, counting operations.
fn traceback<C: Cells>(cells: &C, a: &[Nucleotide], b: &[Nucleotide], mut i: usize, mut j: usize) -> Alignment {
    let mut aln = Alignment::default();
    while i > 0 || j > 0 {
        let here = cells.at(i, j);
        if i > 0 && j > 0 {
            let mismatch = a[i - 1] != b[j - 1];
            if cells.at(i - 1, j - 1) + mismatch as u32 == here {
                if mismatch {
                    aln.record_sub(a[i - 1], b[j - 1]);
                } else {
                    aln.matches += 1;
                }
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && cells.at(i - 1, j) + 1 == here {
            aln.ops.deletions += 1;
            i -= 1;
            continue;
        }
        debug_assert!(j > 0 && cells.at(i, j - 1) + 1 == here);
        aln.ops.insertions += 1;
        j -= 1;
    }
    aln.finish()
}

/// Optimal global alignment over the full DP matrix.
pub fn align_global(a: &[Nucleotide], b: &[Nucleotide]) -> Alignment {
    let (n, m) = (a.len(), b.len());
    let cols = m + 1;
    let mut d = vec![0u32; (n + 1) * cols];
    d.iter_mut().take(cols).enumerate().for_each(|(j, v)| *v = j as u32);
    for i in 1..=n {
        d[i * cols] = i as u32;
        for j in 1..=m {
            let diag = d[(i - 1) * cols + j - 1] + (a[i - 1] != b[j - 1]) as u32;
            let up = d[(i - 1) * cols + j] + 1;
            let left = d[i * cols + j - 1] + 1;
            d[i * cols + j] = diag.min(up).min(left);
        }
    }
    traceback(&Full { d: &d, cols }, a, b, n, m)
}

/// Global alignment restricted to the diagonal band `|i - j| <= band`.
/// Returns `None` when the distance exceeds `band`; otherwise the result is
/// identical to [`align_global`].
pub fn align_global_banded(a: &[Nucleotide], b: &[Nucleotide], band: usize) -> Option<Alignment> {
    let (n, m) = (a.len(), b.len());
    if n.abs_diff(m) > band {
        return None;
    }
    let width = 2 * band + 1;
    let mut d = vec![INF; (n + 1) * width];
    for i in 0..=n {
        let lo = i.saturating_sub(band);
        let hi = (i + band).min(m);
        let mut row_min = INF;
        for j in lo..=hi {
            let v = if i == 0 {
                j as u32
            } else if j == 0 {
                i as u32
            } else {
                let off = j + band - i;
                let diag = d[(i - 1) * width + off] + (a[i - 1] != b[j - 1]) as u32;
                let up = if off + 1 < width { d[(i - 1) * width + off + 1] + 1 } else { INF };
                let left = if off > 0 { d[i * width + off - 1] + 1 } else { INF };
                diag.min(up).min(left)
            };
            d[i * width + (j + band - i)] = v;
            row_min = row_min.min(v);
        }
        if row_min > band as u32 {
            return None;
        }
    }
    let cells = Banded { d: &d, band, width };
    if cells.at(n, m) > band as u32 {
        return None;
    }
    Some(traceback(&cells, a, b, n, m))
}

/// Edit distance if it is at most `max`, with early abandon. Uses two
/// band-wide rows.
pub fn edit_distance_within(a: &[Nucleotide], b: &[Nucleotide], max: u32) -> Option<u32> {
    let (n, m) = (a.len(), b.len());
    let band = max as usize;
    if n.abs_diff(m) > band {
        return None;
    }
    let width = 2 * band + 1;
    let mut prev = vec![INF; width];
    let mut cur = vec![INF; width];
    for j in 0..=band.min(m) {
        prev[j + band] = j as u32;
    }
    for i in 1..=n {
        cur.iter_mut().for_each(|c| *c = INF);
        let lo = i.saturating_sub(band);
        let hi = (i + band).min(m);
        let mut row_min = INF;
        for j in lo..=hi {
            let off = j + band - i;
            let v = if j == 0 {
                i as u32
            } else {
                let diag = prev[off] + (a[i - 1] != b[j - 1]) as u32;
                let up = if off + 1 < width { prev[off + 1] + 1 } else { INF };
                let left = if off > 0 { cur[off - 1] + 1 } else { INF };
                diag.min(up).min(left)
            };
            cur[off] = v;
            row_min = row_min.min(v);
        }
        if row_min > max {
            return None;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let v = prev[m + band - n];
    (v <= max).then_some(v)
}

/// Alignment with free leading and trailing gaps on both sequences,
/// scored +1 per match and -1 per edit. The best-scoring alignment is
/// reported through its interior operation counts. Among equally good end
/// cells the corner wins, then the last row from right to left, then the
/// last column from bottom to top.
pub fn align_semiglobal(a: &[Nucleotide], b: &[Nucleotide]) -> Alignment {
    let (n, m) = (a.len(), b.len());
    let cols = m + 1;
    let mut h = vec![0i32; (n + 1) * cols];
    for i in 1..=n {
        for j in 1..=m {
            let diag = h[(i - 1) * cols + j - 1] + if a[i - 1] == b[j - 1] { 1 } else { -1 };
            let up = h[(i - 1) * cols + j] - 1;
            let left = h[i * cols + j - 1] - 1;
            h[i * cols + j] = diag.max(up).max(left);
        }
    }
    let mut end = (n, m);
    let mut best = h[n * cols + m];
    for j in (0..m).rev() {
        if h[n * cols + j] > best {
            best = h[n * cols + j];
            end = (n, j);
        }
    }
    for i in (0..n).rev() {
        if h[i * cols + m] > best {
            best = h[i * cols + m];
            end = (i, m);
        }
    }
    let (mut i, mut j) = end;
    let mut aln = Alignment::default();
    while i > 0 && j > 0 {
        let here = h[i * cols + j];
        let same = a[i - 1] == b[j - 1];
        if h[(i - 1) * cols + j - 1] + if same { 1 } else { -1 } == here {
            if same {
                aln.matches += 1;
            } else {
                aln.record_sub(a[i - 1], b[j - 1]);
            }
            i -= 1;
            j -= 1;
        } else if h[(i - 1) * cols + j] - 1 == here {
            aln.ops.deletions += 1;
            i -= 1;
        } else {
            aln.ops.insertions += 1;
            j -= 1;
        }
    }
    aln.finish()
}

/// Optimal global alignment counts (reference `a`, read `b`).
pub fn edit_ops(a: &Sequence, b: &Sequence) -> OpCounts {
    align_global(a.bases(), b.bases()).ops
}

/// Interior operation counts of the best free-end-gap alignment.
pub fn semiglobal_ops(a: &Sequence, b: &Sequence) -> OpCounts {
    align_semiglobal(a.bases(), b.bases()).ops
}
