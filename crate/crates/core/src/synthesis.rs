//! Array synthesis: per-design copy numbers and synthesis errors.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::ids::IdsRates;
use crate::pool::{Molecule, PoolBuilder};
use crate::rng::SeedTree;
use crate::submatrix::ConditionalSubMatrix;
use crate::{par, Error, Pool, ReferenceSet, Result, Sequence};

/// Distribution of the number of physical copies synthesized per design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CopyNumber {
    /// Gamma(shape, scale), rounded to the nearest integer.
    Gamma { shape: f64, scale: f64 },
    /// Every design gets exactly this many copies.
    Fixed { copies: u64 },
}

impl CopyNumber {
    pub fn mean(&self) -> f64 {
        match *self {
            CopyNumber::Gamma { shape, scale } => shape * scale,
            CopyNumber::Fixed { copies } => copies as f64,
        }
    }

    fn sampler(&self) -> Result<CopySampler> {
        match *self {
            CopyNumber::Gamma { shape, scale } => {
                if !(shape > 0.0 && scale > 0.0 && shape.is_finite() && scale.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "gamma copy distribution needs shape, scale > 0 (got {shape}, {scale})"
                    )));
                }
                Gamma::new(shape, scale).map(CopySampler::Gamma).map_err(|e| Error::InvalidParameter(e.to_string()))
            }
            CopyNumber::Fixed { copies } => Ok(CopySampler::Fixed(copies)),
        }
    }
}

enum CopySampler {
    Gamma(Gamma<f64>),
    Fixed(u64),
}

impl CopySampler {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match self {
            CopySampler::Gamma(g) => g.sample(rng).round().max(0.0) as u64,
            CopySampler::Fixed(c) => *c,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisParams {
    pub copies: CopyNumber,
    #[serde(default)]
    pub p_sub: f64,
    #[serde(default)]
    pub p_ins: f64,
    #[serde(default)]
    pub p_del: f64,
    /// Per-position probability that the growing strand stops.
    #[serde(default)]
    pub p_term: f64,
    #[serde(default)]
    pub sub_matrix: ConditionalSubMatrix,
    /// When set, designs with more copies than this are represented by this
    /// many simulated molecules, each carrying `copies / cap` weight.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tracked_copies: Option<u64>,
}

impl SynthesisParams {
    pub fn noiseless(copies: CopyNumber) -> Self {
        Self {
            copies,
            p_sub: 0.0,
            p_ins: 0.0,
            p_del: 0.0,
            p_term: 0.0,
            sub_matrix: ConditionalSubMatrix::uniform(),
            max_tracked_copies: None,
        }
    }

    pub(crate) fn rates(&self) -> IdsRates<'_> {
        IdsRates {
            p_sub: self.p_sub,
            p_ins: self.p_ins,
            p_del: self.p_del,
            p_term: self.p_term,
            matrix: &self.sub_matrix,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.copies.sampler()?;
        self.rates().validate()?;
        if self.max_tracked_copies == Some(0) {
            return Err(Error::InvalidParameter("max_tracked_copies must be >= 1".into()));
        }
        Ok(())
    }
}

/// Draws `m` copy numbers from one stream.
pub fn sample_copy_counts<R: Rng + ?Sized>(m: usize, params: &SynthesisParams, rng: &mut R) -> Result<Vec<u64>> {
    if m == 0 {
        return Err(Error::PrecondViolation("need at least one design".into()));
    }
    let sampler = params.copies.sampler()?;
    Ok((0..m).map(|_| sampler.draw(rng)).collect())
}

/// One synthesized copy; the flag is set when the strand terminated early.
pub fn inject_synthesis_errors<R: Rng + ?Sized>(
    s: &Sequence,
    params: &SynthesisParams,
    rng: &mut R,
) -> (Sequence, bool) {
    let mut out = Vec::with_capacity(s.len());
    let terminated = params.rates().apply(s.bases(), rng, &mut out);
    (Sequence::new(out), terminated)
}

/// Synthesizes every design on its own stream (`stream_id` = design id) and
/// merges the copies into a pool. Error-free copies aggregate into a single
/// entry; each distinct variant is its own entry tagged with the design id.
pub fn synthesize_pool(refs: &ReferenceSet, params: &SynthesisParams, seeds: SeedTree) -> Result<Pool> {
    params.validate()?;
    let sampler = params.copies.sampler()?;
    let rates = params.rates();

    let per_ref = par::map_slice(refs.sequences(), |id, reference| {
        let mut rng = seeds.stream(id as u64);
        let count = sampler.draw(&mut rng);
        let tracked = params.max_tracked_copies.map_or(count, |cap| count.min(cap));
        let mut variants: Vec<(Molecule, f64)> = Vec::new();
        if tracked == 0 {
            return variants;
        }
        let per_copy = count as f64 / tracked as f64;
        let mut exact = 0u64;
        if rates.is_noiseless() {
            exact = tracked;
        } else {
            let mut buf = Vec::with_capacity(reference.len() + 4);
            for _ in 0..tracked {
                let terminated = rates.apply(reference.bases(), &mut rng, &mut buf);
                if !terminated && buf.as_slice() == reference.bases() {
                    exact += 1;
                } else {
                    let seq = Sequence::new(buf.clone());
                    let molecule = if terminated { Molecule::truncated(seq) } else { Molecule::complete(seq) };
                    variants.push((molecule, per_copy));
                }
            }
        }
        if exact > 0 {
            let weight = if tracked == count { exact as f64 } else { exact as f64 * per_copy };
            variants.push((Molecule::complete(reference.clone()), weight));
        }
        variants
    });

    let mut builder = PoolBuilder::default();
    for (id, variants) in per_ref.into_iter().enumerate() {
        for (molecule, weight) in variants {
            builder.add(molecule, weight, Some(id as u32));
        }
    }
    Ok(builder.build())
}
