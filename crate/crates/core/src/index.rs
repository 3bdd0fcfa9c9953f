//! Best-reference matching with a k-mer prefilter.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::align::{align_global_banded, edit_distance_within, OpCounts};
use crate::rng::sequence_hash;
use crate::{par, Error, Nucleotide, ReferenceSet, Result, Sequence};

pub const DEFAULT_K: usize = 12;

/// Default acceptance cutoff: 15% of the target length.
pub fn default_max_dist(target_length: usize) -> u32 {
    (0.15 * target_length as f64).floor() as u32
}

/// Best reference found for one read.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchResult {
    pub read_id: usize,
    pub reference_id: u32,
    /// Edits turning the reference into the read.
    pub ops: OpCounts,
    /// Substitutions by `[reference base][read base]`.
    pub substitution_pairs: [[u32; 4]; 4],
    pub read_len: usize,
    pub ref_len: usize,
    pub correct_length: bool,
    /// Another reference reached the same distance; `reference_id` is the
    /// lowest of them.
    pub ambiguous: bool,
}

pub struct RefIndex {
    k: usize,
    postings: HashMap<u64, Vec<u32>>,
    exact: HashMap<u64, Vec<u32>>,
    /// 3-gram count profile of every reference.
    profiles: Vec<Profile>,
    refs: ReferenceSet,
}

const PROFILE_Q: usize = 3;

/// Counts of every q-gram. One edit changes at most q q-grams into q
/// others, so the L1 distance between two profiles is at most `2q` times
/// the edit distance.
#[derive(Clone)]
struct Profile([u16; 1 << (2 * PROFILE_Q)]);

impl Profile {
    fn of(bases: &[Nucleotide]) -> Self {
        let mut counts = [0u16; 1 << (2 * PROFILE_Q)];
        for code in kmer_codes(bases, PROFILE_Q) {
            counts[code as usize] = counts[code as usize].saturating_add(1);
        }
        Profile(counts)
    }

    /// Lower bound on the edit distance between the profiled sequences.
    /// Saturated counts only shrink the L1 distance, so the bound holds.
    fn distance_bound(&self, other: &Profile) -> u32 {
        let l1: u32 = self.0.iter().zip(&other.0).map(|(&a, &b)| a.abs_diff(b) as u32).sum();
        l1.div_ceil(2 * PROFILE_Q as u32)
    }
}

fn kmer_codes(bases: &[Nucleotide], k: usize) -> impl Iterator<Item = u64> + '_ {
    let mask = if k == 32 { u64::MAX } else { (1u64 << (2 * k)) - 1 };
    let mut code = 0u64;
    bases.iter().enumerate().filter_map(move |(i, b)| {
        code = ((code << 2) | b.index() as u64) & mask;
        (i + 1 >= k).then_some(code)
    })
}

fn decode_kmer(code: u64, k: usize) -> Sequence {
    Sequence::new((0..k).rev().map(|i| Nucleotide::from_index(((code >> (2 * i)) & 3) as usize)).collect())
}

/// Builds the postings of every k-mer of every reference.
pub fn build_ref_index(refs: &ReferenceSet, k: usize) -> Result<RefIndex> {
    if k == 0 || k > 32 {
        return Err(Error::PrecondViolation(format!("k = {k} must lie in 1..=32")));
    }
    if k > refs.target_length() {
        return Err(Error::PrecondViolation(format!("k = {k} exceeds target length {}", refs.target_length())));
    }
    let mut postings: HashMap<u64, Vec<u32>> = HashMap::new();
    let mut exact: HashMap<u64, Vec<u32>> = HashMap::with_capacity(refs.len());
    for (id, s) in refs.iter() {
        let id = id as u32;
        for code in kmer_codes(s.bases(), k) {
            let list = postings.entry(code).or_default();
            if list.last() != Some(&id) {
                list.push(id);
            }
        }
        exact.entry(sequence_hash(s)).or_default().push(id);
    }
    let profiles = refs.sequences().iter().map(|s| Profile::of(s.bases())).collect();
    Ok(RefIndex { k, postings, exact, profiles, refs: refs.clone() })
}

impl RefIndex {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn references(&self) -> &ReferenceSet {
        &self.refs
    }

    pub fn kmer_count(&self) -> usize {
        self.postings.len()
    }

    /// Every indexed k-mer.
    pub fn kmers(&self) -> impl Iterator<Item = Sequence> + '_ {
        self.postings.keys().map(|&c| decode_kmer(c, self.k))
    }

    /// References containing `kmer` (ascending ids).
    pub fn postings(&self, kmer: &Sequence) -> &[u32] {
        if kmer.len() != self.k {
            return &[];
        }
        kmer_codes(kmer.bases(), self.k).next().and_then(|c| self.postings.get(&c)).map_or(&[], Vec::as_slice)
    }

    /// References sharing at least one k-mer with `read`, with the number
    /// of distinct shared k-mers, most shared first and then by id.
    pub fn candidates(&self, read: &[Nucleotide]) -> Vec<(u32, u32)> {
        let mut codes: Vec<u64> = kmer_codes(read, self.k).collect();
        codes.sort_unstable();
        codes.dedup();
        let mut hits: Vec<u32> = codes.iter().filter_map(|c| self.postings.get(c)).flatten().copied().collect();
        hits.sort_unstable();
        let mut out: Vec<(u32, u32)> = Vec::new();
        for id in hits {
            match out.last_mut() {
                Some((last, n)) if *last == id => *n += 1,
                _ => out.push((id, 1)),
            }
        }
        out.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        out
    }

    fn exact_match(&self, read: &Sequence) -> Option<u32> {
        self.exact.get(&sequence_hash(read))?.iter().copied().find(|&id| self.refs[id as usize] == *read)
    }

    /// Largest distance at which the best reference is guaranteed, by the
    /// pigeonhole principle, to share a k-mer with the read.
    fn safe_distance(&self) -> Option<u32> {
        let n = self.refs.target_length();
        (0..n).take_while(|&e| (n - e) / (e + 1) >= self.k).last().map(|e| e as u32)
    }
}

#[derive(Default)]
struct Best {
    dist: Option<u32>,
    id: u32,
    ambiguous: bool,
}

impl Best {
    fn bound(&self, max_dist: u32) -> u32 {
        self.dist.unwrap_or(max_dist)
    }

    fn offer(&mut self, id: u32, d: u32) {
        match self.dist {
            Some(b) if d > b => {}
            Some(b) if d == b => {
                self.ambiguous = true;
                self.id = self.id.min(id);
            }
            _ => *self = Best { dist: Some(d), id, ambiguous: false },
        }
    }
}

fn scan<I: IntoIterator<Item = u32>>(index: &RefIndex, read: &[Nucleotide], ids: I, max_dist: u32, best: &mut Best) {
    let profile = Profile::of(read);
    for id in ids {
        let bound = best.bound(max_dist);
        if profile.distance_bound(&index.profiles[id as usize]) > bound {
            continue;
        }
        if let Some(d) = edit_distance_within(index.refs[id as usize].bases(), read, bound) {
            best.offer(id, d);
        }
    }
}

fn finish(index: &RefIndex, read: &Sequence, best: Best) -> Option<MatchResult> {
    let dist = best.dist?;
    let reference = &index.refs[best.id as usize];
    let aln = align_global_banded(reference.bases(), read.bases(), dist as usize)
        .expect("distance was established within this band");
    debug_assert_eq!(aln.ops.distance, dist);
    Some(MatchResult {
        read_id: 0,
        reference_id: best.id,
        ops: aln.ops,
        substitution_pairs: aln.substitution_pairs,
        read_len: read.len(),
        ref_len: reference.len(),
        correct_length: read.len() == index.refs.target_length(),
        ambiguous: best.ambiguous,
    })
}

/// Reference with minimal edit distance to `read`, or `None` when every
/// reference is farther than `max_dist`. Candidates come from the k-mer
/// prefilter; a full scan runs whenever the prefilter cannot guarantee the
/// optimum.
pub fn match_reference(read: &Sequence, index: &RefIndex, max_dist: u32) -> Option<MatchResult> {
    if let Some(id) = index.exact_match(read) {
        let mut best = Best::default();
        best.offer(id, 0);
        return finish(index, read, best);
    }
    let mut best = Best::default();
    let candidates = index.candidates(read.bases());
    scan(index, read.bases(), candidates.iter().map(|c| c.0), max_dist, &mut best);
    let guaranteed = matches!((best.dist, index.safe_distance()), (Some(d), Some(safe)) if d <= safe);
    if !guaranteed {
        // the optimum is no farther than the best candidate, ties included
        let bound = best.bound(max_dist);
        best = Best::default();
        scan(index, read.bases(), 0..index.refs.len() as u32, bound, &mut best);
    }
    finish(index, read, best)
}

/// Exhaustive scan over every reference; the reference implementation for
/// [`match_reference`].
pub fn match_naive(read: &Sequence, index: &RefIndex, max_dist: u32) -> Option<MatchResult> {
    let mut best = Best::default();
    for (id, reference) in index.refs.iter() {
        if let Some(d) = edit_distance_within(reference.bases(), read.bases(), best.bound(max_dist)) {
            best.offer(id as u32, d);
        }
    }
    finish(index, read, best)
}

/// Matches every read in parallel; `read_id` is the position in `reads`.
pub fn match_reads(reads: &[Sequence], index: &RefIndex, max_dist: u32) -> Vec<Option<MatchResult>> {
    par::map_slice(reads, |i, read| {
        match_reference(read, index, max_dist).map(|mut m| {
            m.read_id = i;
            m
        })
    })
}
