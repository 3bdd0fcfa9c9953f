//! Estimators over match lists and read counts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::align::{align_semiglobal, OpCounts};
use crate::index::MatchResult;
use crate::submatrix::ConditionalSubMatrix;
use crate::{par, Error, Result, Sequence};

const CHUNK: usize = 1 << 14;

/// Folds `items` in parallel chunks and merges the partial results in
/// chunk order.
fn chunked_fold<A, T, F, M>(items: &[A], fold: F, merge: M) -> T
where
    A: Sync,
    T: Send + Default,
    F: Fn(&mut T, &A) + Sync + Send,
    M: Fn(&mut T, T),
{
    let chunks: Vec<&[A]> = items.chunks(CHUNK).collect();
    let partials = par::map_slice(&chunks, |_, chunk| {
        let mut acc = T::default();
        for a in *chunk {
            fold(&mut acc, a);
        }
        acc
    });
    let mut total = T::default();
    for p in partials {
        merge(&mut total, p);
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stratum {
    All,
    CorrectLength,
    IncorrectLength,
}

impl Stratum {
    pub const ALL: [Stratum; 3] = [Stratum::All, Stratum::CorrectLength, Stratum::IncorrectLength];

    pub fn contains(self, m: &MatchResult) -> bool {
        match self {
            Stratum::All => true,
            Stratum::CorrectLength => m.correct_length,
            Stratum::IncorrectLength => !m.correct_length,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Stratum::All => "all",
            Stratum::CorrectLength => "correct_length",
            Stratum::IncorrectLength => "incorrect_length",
        }
    }
}

/// Per-nucleotide error rates, normalized by reference bases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRates {
    pub p_sub: f64,
    pub p_ins: f64,
    pub p_del: f64,
    pub n_reads: u64,
    pub stratum: Stratum,
}

/// Running sums behind [`ErrorRates`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorTally {
    pub substitutions: u64,
    pub insertions: u64,
    pub deletions: u64,
    pub reference_bases: u64,
    pub reads: u64,
}

impl ErrorTally {
    pub fn add_ops(&mut self, ops: &OpCounts, ref_len: usize) {
        self.substitutions += ops.substitutions as u64;
        self.insertions += ops.insertions as u64;
        self.deletions += ops.deletions as u64;
        self.reference_bases += ref_len as u64;
        self.reads += 1;
    }

    pub fn add(&mut self, m: &MatchResult) {
        self.add_ops(&m.ops, m.ref_len);
    }

    pub fn merge(&mut self, other: &ErrorTally) {
        self.substitutions += other.substitutions;
        self.insertions += other.insertions;
        self.deletions += other.deletions;
        self.reference_bases += other.reference_bases;
        self.reads += other.reads;
    }

    pub fn rates(&self, stratum: Stratum) -> Result<ErrorRates> {
        if self.reads == 0 || self.reference_bases == 0 {
            return Err(Error::EmptyStratum);
        }
        let n = self.reference_bases as f64;
        Ok(ErrorRates {
            p_sub: self.substitutions as f64 / n,
            p_ins: self.insertions as f64 / n,
            p_del: self.deletions as f64 / n,
            n_reads: self.reads,
            stratum,
        })
    }
}

/// One [`ErrorTally`] per stratum.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StratifiedTally {
    pub all: ErrorTally,
    pub correct_length: ErrorTally,
    pub incorrect_length: ErrorTally,
}

impl StratifiedTally {
    pub fn add(&mut self, m: &MatchResult) {
        self.all.add(m);
        if m.correct_length {
            self.correct_length.add(m);
        } else {
            self.incorrect_length.add(m);
        }
    }

    pub fn merge(&mut self, other: &StratifiedTally) {
        self.all.merge(&other.all);
        self.correct_length.merge(&other.correct_length);
        self.incorrect_length.merge(&other.incorrect_length);
    }

    pub fn get(&self, stratum: Stratum) -> &ErrorTally {
        match stratum {
            Stratum::All => &self.all,
            Stratum::CorrectLength => &self.correct_length,
            Stratum::IncorrectLength => &self.incorrect_length,
        }
    }
}

/// Total operations over the matches in `stratum` divided by their total
/// reference length.
pub fn error_rates(matches: &[MatchResult], stratum: Stratum) -> Result<ErrorRates> {
    let tally = chunked_fold(
        matches,
        |t: &mut ErrorTally, m| {
            if stratum.contains(m) {
                t.add(m)
            }
        },
        |t, p| t.merge(&p),
    );
    tally.rates(stratum)
}

/// Substitution counts `[reference base][read base]` from unambiguous matches.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubstitutionTally {
    pub counts: [[u64; 4]; 4],
}

impl SubstitutionTally {
    pub fn add(&mut self, m: &MatchResult) {
        if m.ambiguous {
            return;
        }
        for (row, src) in self.counts.iter_mut().zip(&m.substitution_pairs) {
            for (c, s) in row.iter_mut().zip(src) {
                *c += *s as u64;
            }
        }
    }

    pub fn merge(&mut self, other: &SubstitutionTally) {
        for (row, src) in self.counts.iter_mut().zip(&other.counts) {
            for (c, s) in row.iter_mut().zip(src) {
                *c += s;
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn matrix(&self) -> Result<ConditionalSubMatrix> {
        ConditionalSubMatrix::from_counts(&self.counts)
    }
}

/// Normalized spectrum of aligned substitutions; ambiguous matches are left
/// out.
pub fn conditional_sub_matrix(matches: &[MatchResult]) -> Result<ConditionalSubMatrix> {
    chunked_fold(matches, |t: &mut SubstitutionTally, m| t.add(m), |t, p| t.merge(&p)).matrix()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ReadingErrorEstimate {
    pub sub_rate: f64,
    pub indel_rate: f64,
    pub pairs: u64,
}

/// Running sums behind the reading-error estimate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReadingTally {
    pub substitutions: u64,
    pub indels: u64,
    pub bases: u64,
    pub pairs: u64,
}

impl ReadingTally {
    /// Adds one oriented pair (reverse read already reverse-complemented).
    pub fn add_pair(&mut self, fwd: &Sequence, rev: &Sequence) {
        let ops = if fwd == rev { OpCounts::default() } else { align_semiglobal(fwd.bases(), rev.bases()).ops };
        self.add_ops(&ops, fwd.len(), rev.len());
    }

    pub fn add_ops(&mut self, ops: &OpCounts, fwd_len: usize, rev_len: usize) {
        self.substitutions += ops.substitutions as u64;
        self.indels += (ops.insertions + ops.deletions) as u64;
        self.bases += (fwd_len + rev_len) as u64;
        self.pairs += 1;
    }

    pub fn merge(&mut self, other: &ReadingTally) {
        self.substitutions += other.substitutions;
        self.indels += other.indels;
        self.bases += other.bases;
        self.pairs += other.pairs;
    }

    pub fn estimate(&self) -> ReadingErrorEstimate {
        if self.bases == 0 {
            return ReadingErrorEstimate { sub_rate: 0.0, indel_rate: 0.0, pairs: self.pairs };
        }
        let n = self.bases as f64;
        ReadingErrorEstimate {
            sub_rate: self.substitutions as f64 / n,
            indel_rate: self.indels as f64 / n,
            pairs: self.pairs,
        }
    }
}

/// Differences between the two reads of each oriented pair, found by
/// free-end-gap alignment, divided by the summed read lengths. Returns
/// `(substitution rate, indel rate)`.
pub fn reading_error_estimate(pairs: &[(Sequence, Sequence)]) -> (f64, f64) {
    let est = chunked_fold(pairs, |t: &mut ReadingTally, (f, r)| t.add_pair(f, r), |t, p| t.merge(&p)).estimate();
    (est.sub_rate, est.indel_rate)
}

/// How many designs received each number of reads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageHistogram {
    pub counts: BTreeMap<u64, u64>,
    pub m: u64,
    pub unseen_fraction: f64,
}

impl CoverageHistogram {
    /// From reads-per-design counts, one entry per design.
    pub fn from_read_counts(per_design: &[u64]) -> Result<Self> {
        if per_design.is_empty() {
            return Err(Error::PrecondViolation("need at least one design".into()));
        }
        let mut counts = BTreeMap::new();
        for &c in per_design {
            *counts.entry(c).or_insert(0) += 1;
        }
        let m = per_design.len() as u64;
        let unseen = counts.get(&0).copied().unwrap_or(0);
        Ok(Self { counts, m, unseen_fraction: unseen as f64 / m as f64 })
    }

    pub fn total_reads(&self) -> u64 {
        self.counts.iter().map(|(k, v)| k * v).sum()
    }

    pub fn mean(&self) -> f64 {
        self.total_reads() as f64 / self.m as f64
    }

    /// Population variance of reads per design.
    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.counts.iter().map(|(&k, &v)| v as f64 * (k as f64 - mean).powi(2)).sum::<f64>() / self.m as f64
    }
}

/// Reads per reference over `m` designs, zero bin included.
pub fn coverage_histogram(matches: &[MatchResult], m: usize) -> Result<CoverageHistogram> {
    if m == 0 {
        return Err(Error::PrecondViolation("need at least one design".into()));
    }
    let mut per_design = vec![0u64; m];
    for r in matches {
        let id = r.reference_id as usize;
        if id >= m {
            return Err(Error::PrecondViolation(format!("reference id {id} outside 0..{m}")));
        }
        per_design[id] += 1;
    }
    CoverageHistogram::from_read_counts(&per_design)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    MethodOfMoments,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegBinFit {
    pub r: f64,
    pub p: f64,
    pub mean: f64,
    pub variance: f64,
    pub method: FitMethod,
}

impl NegBinFit {
    pub fn implied_mean(&self) -> f64 {
        self.r * (1.0 - self.p) / self.p
    }

    pub fn implied_variance(&self) -> f64 {
        self.r * (1.0 - self.p) / (self.p * self.p)
    }
}

/// Method-of-moments negative-binomial fit: `p = mean / var`,
/// `r = mean^2 / (var - mean)`.
pub fn fit_neg_binomial(hist: &CoverageHistogram) -> Result<NegBinFit> {
    let mean = hist.mean();
    let variance = hist.variance();
    if variance.is_nan() || variance <= mean || mean <= 0.0 {
        return Err(Error::Underdispersed { mean, variance });
    }
    Ok(NegBinFit {
        r: mean * mean / (variance - mean),
        p: mean / variance,
        mean,
        variance,
        method: FitMethod::MethodOfMoments,
    })
}

/// Expected fraction of designs missing from a uniform subsample that
/// keeps `r` copies per design on average: `e^-r`.
pub fn expected_unseen_fraction(r: f64) -> f64 {
    debug_assert!(r >= 0.0);
    (-r).exp()
}

/// Relative abundance after `cycles` doublings at efficiencies `e1` vs `e2`.
pub fn proportion_ratio(e1: f64, e2: f64, cycles: u32) -> f64 {
    debug_assert!(e1 > 0.0 && e2 > 0.0);
    (e1 / e2).powi(cycles as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;
    use crate::Nucleotide;
    use rand::Rng;
    use rand_distr::{Distribution, Gamma, Poisson};

    fn m(ops: OpCounts, read_len: usize, ref_len: usize) -> MatchResult {
        MatchResult {
            read_id: 0,
            reference_id: 0,
            ops,
            substitution_pairs: [[0; 4]; 4],
            read_len,
            ref_len,
            correct_length: read_len == ref_len,
            ambiguous: false,
        }
    }

    #[test]
    fn zero_ops_zero_rates() {
        let ms = vec![m(OpCounts::default(), 10, 10); 5];
        let r = error_rates(&ms, Stratum::All).unwrap();
        assert_eq!((r.p_sub, r.p_ins, r.p_del, r.n_reads), (0.0, 0.0, 0.0, 5));
        assert_eq!(error_rates(&ms, Stratum::IncorrectLength).unwrap_err(), Error::EmptyStratum);
        assert_eq!(error_rates(&[], Stratum::All).unwrap_err(), Error::EmptyStratum);
    }

    #[test]
    fn strata_split_by_length() {
        let ms = vec![m(OpCounts::new(1, 0, 0), 10, 10), m(OpCounts::new(0, 0, 2), 8, 10)];
        let all = error_rates(&ms, Stratum::All).unwrap();
        assert_eq!((all.p_sub, all.p_del), (0.05, 0.1));
        let ok = error_rates(&ms, Stratum::CorrectLength).unwrap();
        assert_eq!((ok.p_sub, ok.p_del, ok.n_reads), (0.1, 0.0, 1));
        let bad = error_rates(&ms, Stratum::IncorrectLength).unwrap();
        assert_eq!((bad.p_sub, bad.p_del), (0.0, 0.2));
    }

    #[test]
    fn permutation_invariant() {
        let mut rng = derive_stream(1, 0);
        let mut ms: Vec<MatchResult> = (0..50_000)
            .map(|_| m(OpCounts::new(rng.random_range(0..3), rng.random_range(0..2), rng.random_range(0..2)), 117, 117))
            .collect();
        let a = error_rates(&ms, Stratum::All).unwrap();
        ms.reverse();
        ms.swap(3, 40_000);
        assert_eq!(a, error_rates(&ms, Stratum::All).unwrap());
    }

    #[test]
    fn only_c_to_t() {
        let mut x = m(OpCounts::new(3, 0, 0), 10, 10);
        x.substitution_pairs[Nucleotide::C.index()][Nucleotide::T.index()] = 3;
        let mut amb = x.clone();
        amb.ambiguous = true;
        amb.substitution_pairs[Nucleotide::A.index()][Nucleotide::G.index()] = 5;
        let mat = conditional_sub_matrix(&[x, amb]).unwrap();
        assert_eq!(mat.get(Nucleotide::C, Nucleotide::T), 1.0);
        assert!((mat.total() - 1.0).abs() < 1e-12);
        assert_eq!(conditional_sub_matrix(&[m(OpCounts::default(), 1, 1)]).unwrap_err(), Error::NoSubstitutions);
    }

    #[test]
    fn identical_pairs_have_no_reading_error() {
        let s: Sequence = "ACGTACGTTT".parse().unwrap();
        assert_eq!(reading_error_estimate(&[(s.clone(), s)]), (0.0, 0.0));
        assert_eq!(reading_error_estimate(&[]), (0.0, 0.0));
    }

    #[test]
    fn reading_error_halves_pair_mismatches() {
        let mut rng = derive_stream(2, 0);
        let p = 0.002;
        let pairs: Vec<(Sequence, Sequence)> = (0..100_000)
            .map(|_| {
                let t: Vec<Nucleotide> = (0..117).map(|_| Nucleotide::from_index(rng.random_range(0..4))).collect();
                let mut corrupt = |v: &[Nucleotide]| -> Sequence {
                    Sequence::new(
                        v.iter()
                            .map(|&b| {
                                if rng.random::<f64>() < p {
                                    Nucleotide::from_index((b.index() + rng.random_range(1..4)) % 4)
                                } else {
                                    b
                                }
                            })
                            .collect(),
                    )
                };
                (corrupt(&t), corrupt(&t))
            })
            .collect();
        let (sub, indel) = reading_error_estimate(&pairs);
        // pairwise mismatch probability 2p(1-p) + p^2/3, over 2L bases
        let expected = (2.0 * p * (1.0 - p) + p * p / 3.0) / 2.0;
        assert!((sub - expected).abs() < 0.1 * expected, "{sub} vs {expected}");
        // an adjacent substitution can occasionally be cheaper as an indel pair at the ends
        assert!(indel < 0.1 * expected, "{indel}");
    }

    #[test]
    fn histogram_mass_and_unseen() {
        let ms: Vec<MatchResult> = (0..10u32)
            .map(|i| {
                let mut x = m(OpCounts::default(), 5, 5);
                x.reference_id = i;
                x
            })
            .collect();
        let h = coverage_histogram(&ms, 10).unwrap();
        assert_eq!(h.counts, BTreeMap::from([(1, 10)]));
        assert_eq!(h.unseen_fraction, 0.0);
        let h = coverage_histogram(&ms[..5], 20).unwrap();
        assert_eq!(h.counts.values().sum::<u64>(), 20);
        assert_eq!(h.unseen_fraction, 0.75);
        assert!(coverage_histogram(&ms, 0).is_err());
        assert!(coverage_histogram(&ms, 5).is_err());
    }

    #[test]
    fn neg_binomial_recovers_shape() {
        let mut rng = derive_stream(3, 0);
        let g = Gamma::new(8.0, 16.0).unwrap();
        let counts: Vec<u64> =
            (0..20_000).map(|_| Poisson::new(g.sample(&mut rng)).unwrap().sample(&mut rng) as u64).collect();
        let fit = fit_neg_binomial(&CoverageHistogram::from_read_counts(&counts).unwrap()).unwrap();
        assert!((fit.r - 8.0).abs() < 0.8, "r {}", fit.r);
        assert!((fit.p - 1.0 / 17.0).abs() < 0.01, "p {}", fit.p);
        assert!((fit.implied_mean() - fit.mean).abs() < 1e-9 * fit.mean);
        assert!((fit.implied_variance() - fit.variance).abs() < 1e-9 * fit.variance);
    }

    #[test]
    fn underdispersed_rejected() {
        let flat = CoverageHistogram::from_read_counts(&[5; 100]).unwrap();
        assert!(matches!(fit_neg_binomial(&flat), Err(Error::Underdispersed { .. })));
        let mut rng = derive_stream(4, 0);
        let pois = Poisson::new(50.0).unwrap();
        // binomial-thinned Poisson stays Poisson; use many draws so the
        // sample variance sits near the mean, then trim to force var <= mean
        let counts: Vec<u64> = (0..20_000).map(|_| (pois.sample(&mut rng) as u64).clamp(45, 55)).collect();
        assert!(fit_neg_binomial(&CoverageHistogram::from_read_counts(&counts).unwrap()).is_err());
    }

    #[test]
    fn closed_forms() {
        assert!((proportion_ratio(1.8, 1.9, 60) - 0.0393).abs() < 1e-3);
        assert_eq!(proportion_ratio(1.7, 1.7, 33), 1.0);
        assert_eq!(proportion_ratio(2.0, 1.0, 10), 1024.0);
        assert_eq!(expected_unseen_fraction(0.0), 1.0);
        assert!((expected_unseen_fraction(1.0) - 0.36788).abs() < 5e-6);
        assert!((expected_unseen_fraction(5.0) - 0.00674).abs() < 5e-6);
    }

    #[test]
    fn unseen_matches_uniform_subsampling() {
        let m = 20_000usize;
        let mut rng = derive_stream(5, 0);
        for r in [0.5, 1.0, 2.0, 5.0] {
            let n = (r * m as f64).round() as usize;
            let mut per = vec![0u64; m];
            for _ in 0..n {
                per[rng.random_range(0..m)] += 1;
            }
            let h = CoverageHistogram::from_read_counts(&per).unwrap();
            assert!((h.unseen_fraction - expected_unseen_fraction(r)).abs() < 0.01, "r {r}: {}", h.unseen_fraction);
        }
    }
}
