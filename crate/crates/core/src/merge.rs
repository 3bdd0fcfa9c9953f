//! Paired-end read merging by ungapped overlap.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::SeedTree;
use crate::sequencing::ReadPair;
use crate::{par, Error, Result, Sequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConflictPolicy {
    /// Take either read's base with probability 1/2.
    Random,
    /// Reject any overlap containing a mismatch.
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MergeParams {
    pub target_length: usize,
    pub min_overlap: usize,
    pub max_overlap: usize,
    pub max_mismatch_ratio: f64,
    pub conflict_policy: ConflictPolicy,
}

impl MergeParams {
    /// Minimum overlap 87% of the target (rounded up), maximum the full
    /// target, mismatch ratio 0.20, random conflict resolution.
    pub fn new(target_length: usize) -> Self {
        Self {
            target_length,
            min_overlap: (0.87 * target_length as f64).ceil() as usize,
            max_overlap: target_length,
            max_mismatch_ratio: 0.20,
            conflict_policy: ConflictPolicy::Random,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_overlap == 0 || self.min_overlap > self.max_overlap {
            return Err(Error::InvalidParameter(format!(
                "need 1 <= min_overlap ({}) <= max_overlap ({})",
                self.min_overlap, self.max_overlap
            )));
        }
        if !(0.0..=1.0).contains(&self.max_mismatch_ratio) {
            return Err(Error::InvalidParameter(format!(
                "max_mismatch_ratio {} outside [0, 1]",
                self.max_mismatch_ratio
            )));
        }
        Ok(())
    }

    /// Overlap range scanned for reads of these lengths. The lower end drops
    /// below `min_overlap` when the reads are too short to reach it while
    /// still spanning the target.
    pub fn overlap_range(&self, fwd_len: usize, rev_len: usize) -> (usize, usize) {
        let hi = self.max_overlap.min(fwd_len).min(rev_len);
        let spanning = (fwd_len + rev_len).saturating_sub(self.target_length);
        let lo = self.min_overlap.min(spanning).max(1);
        (lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MergeOutcome {
    Merged(Sequence),
    NoOverlap,
    TooManyMismatches,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeResult {
    pub outcome: MergeOutcome,
    pub overlap_len: usize,
    pub mismatches: usize,
}

impl MergeResult {
    pub fn merged(&self) -> Option<&Sequence> {
        match &self.outcome {
            MergeOutcome::Merged(s) => Some(s),
            _ => None,
        }
    }
}

/// Mismatches between the last `o` bases of `fwd` and the first `o` of
/// `rc`, or `None` once the count reaches `abandon_at`.
fn overlap_mismatches(fwd: &Sequence, rc: &Sequence, o: usize, abandon_at: Option<usize>) -> Option<usize> {
    let a = &fwd.bases()[fwd.len() - o..];
    let b = &rc.bases()[..o];
    let mut mm = 0;
    for (x, y) in a.iter().zip(b) {
        if x != y {
            mm += 1;
            if abandon_at.is_some_and(|lim| mm >= lim) {
                return None;
            }
        }
    }
    Some(mm)
}

/// Merges a read pair in instrument orientation. The overlap with the
/// lowest mismatch ratio wins; among equal ratios the longer one.
pub fn merge_pair<R: Rng + ?Sized>(fwd: &Sequence, rev: &Sequence, params: &MergeParams, rng: &mut R) -> MergeResult {
    let rc = rev.reverse_complement();
    let (lo, hi) = params.overlap_range(fwd.len(), rc.len());
    if lo > hi {
        return MergeResult { outcome: MergeOutcome::NoOverlap, overlap_len: 0, mismatches: 0 };
    }
    // best (mismatches, overlap)
    let mut best: Option<(usize, usize)> = None;
    for o in (lo..=hi).rev() {
        // a candidate must satisfy mm / o < best_mm / best_o
        let abandon_at = best.map(|(bm, bo)| (bm * o).div_ceil(bo));
        if abandon_at == Some(0) {
            break;
        }
        if let Some(mm) = overlap_mismatches(fwd, &rc, o, abandon_at) {
            if best.is_none_or(|(bm, bo)| mm * bo < bm * o) {
                best = Some((mm, o));
                if mm == 0 {
                    break;
                }
            }
        }
    }
    let (mismatches, o) = best.expect("range is non-empty");
    let reject = mismatches as f64 > params.max_mismatch_ratio * o as f64
        || (params.conflict_policy == ConflictPolicy::Fail && mismatches > 0);
    if reject {
        return MergeResult { outcome: MergeOutcome::TooManyMismatches, overlap_len: o, mismatches };
    }
    let split = fwd.len() - o;
    let mut out = Vec::with_capacity(fwd.len() + rc.len() - o);
    out.extend_from_slice(&fwd.bases()[..split]);
    for (&x, &y) in fwd.bases()[split..].iter().zip(&rc.bases()[..o]) {
        out.push(if x == y || rng.random::<bool>() { x } else { y });
    }
    out.extend_from_slice(&rc.bases()[o..]);
    MergeResult { outcome: MergeOutcome::Merged(Sequence::new(out)), overlap_len: o, mismatches }
}

/// Outcome tallies over a batch of merges.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeStats {
    pub merged: u64,
    pub no_overlap: u64,
    pub too_many_mismatches: u64,
}

impl MergeStats {
    pub fn record(&mut self, r: &MergeResult) {
        match r.outcome {
            MergeOutcome::Merged(_) => self.merged += 1,
            MergeOutcome::NoOverlap => self.no_overlap += 1,
            MergeOutcome::TooManyMismatches => self.too_many_mismatches += 1,
        }
    }

    pub fn add(&mut self, other: &MergeStats) {
        self.merged += other.merged;
        self.no_overlap += other.no_overlap;
        self.too_many_mismatches += other.too_many_mismatches;
    }

    pub fn total(&self) -> u64 {
        self.merged + self.no_overlap + self.too_many_mismatches
    }
}

/// Merges pairs in parallel; pair `i` (counted from `first_id`) uses
/// stream `i` of `seeds`.
pub fn merge_pairs(pairs: &[ReadPair], first_id: u64, params: &MergeParams, seeds: SeedTree) -> Vec<MergeResult> {
    par::map_slice(pairs, |i, p| {
        let mut rng = seeds.stream(first_id + i as u64);
        merge_pair(&p.forward, &p.reverse, params, &mut rng)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;
    use crate::Nucleotide;

    fn random_seq(len: usize, seed: u64) -> Sequence {
        let mut rng = derive_stream(seed, 0);
        Sequence::new((0..len).map(|_| Nucleotide::from_index(rng.random_range(0..4))).collect())
    }

    fn flip(b: Nucleotide) -> Nucleotide {
        Nucleotide::from_index((b.index() + 1) % 4)
    }

    #[test]
    fn defaults() {
        let p = MergeParams::new(117);
        assert_eq!(p.min_overlap, 102);
        assert_eq!(p.max_overlap, 117);
        assert_eq!(p.max_mismatch_ratio, 0.20);
        p.validate().unwrap();
        let mut bad = p.clone();
        bad.min_overlap = 0;
        assert!(bad.validate().is_err());
        bad.min_overlap = 200;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn reconstructs_from_104_nt_reads() {
        let x = random_seq(117, 1);
        let fwd = x.prefix(104);
        let rev = x.reverse_complement().prefix(104);
        let r = merge_pair(&fwd, &rev, &MergeParams::new(117), &mut derive_stream(1, 1));
        assert_eq!(r.outcome, MergeOutcome::Merged(x));
        assert_eq!((r.overlap_len, r.mismatches), (91, 0));
    }

    #[test]
    fn full_length_reads_overlap_completely() {
        let x = random_seq(117, 2);
        let r = merge_pair(&x, &x.reverse_complement(), &MergeParams::new(117), &mut derive_stream(2, 1));
        assert_eq!(r.outcome, MergeOutcome::Merged(x));
        assert_eq!(r.overlap_len, 117);
    }

    #[test]
    fn planted_mismatches_rejected() {
        let x = random_seq(117, 3);
        let mut fwd = x.bases().to_vec();
        // 25% of the full 117-base overlap, spread out
        for i in (0..117).step_by(4).take(30) {
            fwd[i] = flip(fwd[i]);
        }
        let r =
            merge_pair(&Sequence::new(fwd), &x.reverse_complement(), &MergeParams::new(117), &mut derive_stream(3, 1));
        assert_eq!(r.outcome, MergeOutcome::TooManyMismatches);
    }

    #[test]
    fn short_reads_do_not_overlap() {
        let x = random_seq(10, 4);
        let mut p = MergeParams::new(117);
        p.max_overlap = 0;
        p.min_overlap = 0;
        let r = merge_pair(&x, &x, &p, &mut derive_stream(4, 1));
        assert_eq!(r.outcome, MergeOutcome::NoOverlap);
        let r = merge_pair(&Sequence::new(vec![]), &x, &MergeParams::new(117), &mut derive_stream(4, 1));
        assert_eq!(r.outcome, MergeOutcome::NoOverlap);
    }

    #[test]
    fn fail_policy_rejects_conflicts() {
        let x = random_seq(117, 5);
        let mut fwd = x.bases().to_vec();
        fwd[60] = flip(fwd[60]);
        let mut p = MergeParams::new(117);
        let fwd = Sequence::new(fwd);
        let ok = merge_pair(&fwd, &x.reverse_complement(), &p, &mut derive_stream(5, 1));
        assert!(ok.merged().is_some());
        assert_eq!(ok.mismatches, 1);
        p.conflict_policy = ConflictPolicy::Fail;
        let r = merge_pair(&fwd, &x.reverse_complement(), &p, &mut derive_stream(5, 1));
        assert_eq!(r.outcome, MergeOutcome::TooManyMismatches);
    }

    #[test]
    fn random_conflicts_are_fair() {
        let x = random_seq(117, 6);
        let mut fwd = x.bases().to_vec();
        let conflicts: Vec<usize> = (0..117).step_by(6).collect();
        for &i in &conflicts {
            fwd[i] = flip(fwd[i]);
        }
        let fwd = Sequence::new(fwd);
        let rev = x.reverse_complement();
        let p = MergeParams::new(117);
        let mut from_fwd = 0u64;
        let mut total = 0u64;
        let mut rng = derive_stream(6, 1);
        while total < 100_000 {
            let r = merge_pair(&fwd, &rev, &p, &mut rng);
            let m = r.merged().unwrap();
            for &i in &conflicts {
                from_fwd += (m.bases()[i] == fwd.bases()[i]) as u64;
                total += 1;
            }
        }
        let frac = from_fwd as f64 / total as f64;
        assert!((frac - 0.5).abs() < 0.01, "{frac}");
    }

    #[test]
    fn ratio_minimizing_prefers_longer_on_ties() {
        // periodic sequence: every shift by the period also matches perfectly
        let x: Sequence = "ACGACGACGACGACGACGACG".parse().unwrap();
        let mut p = MergeParams::new(21);
        p.min_overlap = 3;
        let r = merge_pair(&x, &x.reverse_complement(), &p, &mut derive_stream(7, 1));
        assert_eq!(r.overlap_len, 21);
    }

    #[test]
    fn merged_length_and_monotonicity() {
        let mut rng = derive_stream(8, 0);
        for t in 0..300u64 {
            let x = random_seq(60, 100 + t);
            let mut fwd = x.prefix(50).bases().to_vec();
            let mut rev = x.reverse_complement().prefix(50).bases().to_vec();
            for _ in 0..rng.random_range(0..15) {
                let i = rng.random_range(0..50);
                fwd[i] = flip(fwd[i]);
                let j = rng.random_range(0..50);
                rev[j] = flip(rev[j]);
            }
            let (fwd, rev) = (Sequence::new(fwd), Sequence::new(rev));
            let mut p = MergeParams::new(60);
            p.max_mismatch_ratio = 0.1;
            let strict = merge_pair(&fwd, &rev, &p, &mut derive_stream(9, t));
            p.max_mismatch_ratio = 0.3;
            let loose = merge_pair(&fwd, &rev, &p, &mut derive_stream(9, t));
            for r in [&strict, &loose] {
                if let Some(m) = r.merged() {
                    assert_eq!(m.len(), fwd.len() + rev.len() - r.overlap_len);
                }
            }
            if strict.merged().is_some() {
                assert_eq!(strict, loose);
            }
        }
    }

    #[test]
    fn stats_tally() {
        let mut s = MergeStats::default();
        s.record(&MergeResult { outcome: MergeOutcome::NoOverlap, overlap_len: 0, mismatches: 0 });
        s.record(&MergeResult { outcome: MergeOutcome::TooManyMismatches, overlap_len: 5, mismatches: 3 });
        let mut t = s;
        t.add(&s);
        assert_eq!((t.no_overlap, t.too_many_mismatches, t.total()), (2, 2, 4));
    }
}
