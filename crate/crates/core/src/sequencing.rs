//! Reading the pool: template sampling and paired-end read errors.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ids::IdsRates;
use crate::rng::RngStream;
use crate::submatrix::ConditionalSubMatrix;
use crate::{Error, Pool, Result, Sequence};

/// Per-base sequencing error probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorProfile {
    #[serde(default)]
    pub p_sub: f64,
    #[serde(default)]
    pub p_ins: f64,
    #[serde(default)]
    pub p_del: f64,
    #[serde(default)]
    pub sub_matrix: ConditionalSubMatrix,
}

impl ErrorProfile {
    pub fn noiseless() -> Self {
        Self { p_sub: 0.0, p_ins: 0.0, p_del: 0.0, sub_matrix: ConditionalSubMatrix::uniform() }
    }

    pub fn new(p_sub: f64, p_ins: f64, p_del: f64, sub_matrix: ConditionalSubMatrix) -> Result<Self> {
        let p = Self { p_sub, p_ins, p_del, sub_matrix };
        p.validate()?;
        Ok(p)
    }

    pub(crate) fn rates(&self) -> IdsRates<'_> {
        IdsRates { p_sub: self.p_sub, p_ins: self.p_ins, p_del: self.p_del, p_term: 0.0, matrix: &self.sub_matrix }
    }

    pub fn validate(&self) -> Result<()> {
        self.rates().validate()
    }

    pub fn is_noiseless(&self) -> bool {
        self.rates().is_noiseless()
    }

    /// Applies the channel to a whole sequence.
    pub fn inject<R: Rng + ?Sized>(&self, s: &Sequence, rng: &mut R) -> Sequence {
        let mut out = Vec::with_capacity(s.len() + 2);
        self.rates().apply(s.bases(), rng, &mut out);
        Sequence::new(out)
    }
}

impl Default for ErrorProfile {
    fn default() -> Self {
        Self::noiseless()
    }
}

/// Forward read and reverse read in instrument orientation (the reverse
/// read is sequenced off the complementary strand).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReadPair {
    pub forward: Sequence,
    pub reverse: Sequence,
    /// Design the template descends from; simulation ground truth.
    pub template_origin: Option<u32>,
}

impl ReadPair {
    /// Both reads on the forward strand.
    pub fn oriented(&self) -> (Sequence, Sequence) {
        (self.forward.clone(), self.reverse.reverse_complement())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReadSet {
    pub pairs: Vec<ReadPair>,
}

impl ReadSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Cumulative-weight table over the readable (complete) pool entries.
#[derive(Debug, Clone)]
pub struct TemplateSampler<'a> {
    entries: Vec<(&'a Sequence, Option<u32>)>,
    cumulative: Vec<f64>,
    total: f64,
}

impl<'a> TemplateSampler<'a> {
    pub fn new(pool: &'a Pool) -> Result<Self> {
        let mut entries = Vec::with_capacity(pool.len());
        let mut cumulative = Vec::with_capacity(pool.len());
        let mut total = 0.0;
        for (molecule, abundance) in pool.iter() {
            if molecule.truncated || abundance.weight <= 0.0 {
                continue;
            }
            total += abundance.weight;
            entries.push((&molecule.seq, abundance.origin));
            cumulative.push(total);
        }
        if entries.is_empty() || total.is_nan() || total <= 0.0 {
            return Err(Error::EmptyPool);
        }
        Ok(Self { entries, cumulative, total })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    #[inline]
    pub fn draw_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u = rng.random::<f64>() * self.total;
        self.cumulative.partition_point(|&c| c <= u).min(self.entries.len() - 1)
    }

    pub fn entry(&self, index: usize) -> (&'a Sequence, Option<u32>) {
        self.entries[index]
    }

    /// `n` independent draws from one stream, in draw order.
    pub fn draw_indices<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<u32> {
        (0..n).map(|_| self.draw_index(rng) as u32).collect()
    }
}

/// Draws `n_reads` templates with replacement, proportional to weight.
pub fn draw_templates<'a>(pool: &'a Pool, n_reads: usize, rng: &mut RngStream) -> Result<Vec<&'a Sequence>> {
    let sampler = TemplateSampler::new(pool)?;
    Ok((0..n_reads).map(|_| sampler.entry(sampler.draw_index(rng)).0).collect())
}

/// Sequences both ends of `template`. Each read is the first `read_len`
/// bases of an independently corrupted copy of its strand.
pub fn sequence_pair<R: Rng + ?Sized>(
    template: &Sequence,
    profile: &ErrorProfile,
    read_len: usize,
    forward_rng: &mut R,
    reverse_rng: &mut R,
) -> ReadPair {
    let rates = profile.rates();
    let mut buf = Vec::with_capacity(template.len() + 4);
    rates.apply(template.bases(), forward_rng, &mut buf);
    buf.truncate(read_len);
    let forward = Sequence::new(buf.clone());
    let rc = template.reverse_complement();
    rates.apply(rc.bases(), reverse_rng, &mut buf);
    buf.truncate(read_len);
    ReadPair { forward, reverse: Sequence::new(buf), template_origin: None }
}
