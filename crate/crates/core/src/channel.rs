//! The composed channel: synthesis, stages, sampling and reading.

use serde::{Deserialize, Serialize};

use crate::process::{Stage, Thinning, DEFAULT_THINNING_THRESHOLD};
use crate::rng::SeedTree;
use crate::sequencing::{sequence_pair, ErrorProfile, ReadPair, ReadSet, TemplateSampler};
use crate::synthesis::{synthesize_pool, SynthesisParams};
use crate::{par, Error, Pool, ReferenceSet, Result};

const PHASE_SYNTHESIS: u64 = 1;
const PHASE_DRAW: u64 = 2;
const PHASE_READ: u64 = 3;
const PHASE_STAGE: u64 = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub synthesis: SynthesisParams,
    /// Applied in order between synthesis and sequencing.
    pub stages: Vec<Stage>,
    /// Reads per designed sequence.
    pub coverage: f64,
    pub read_len: usize,
    #[serde(default)]
    pub profile: ErrorProfile,
    #[serde(default = "default_threshold")]
    pub thinning_threshold: f64,
}

fn default_threshold() -> f64 {
    DEFAULT_THINNING_THRESHOLD
}

impl ChannelSpec {
    pub fn validate(&self) -> Result<()> {
        self.synthesis.validate()?;
        for stage in &self.stages {
            stage.validate()?;
        }
        self.profile.validate()?;
        if !(self.coverage >= 0.0 && self.coverage.is_finite()) {
            return Err(Error::InvalidParameter(format!("coverage {} must be >= 0", self.coverage)));
        }
        if self.read_len == 0 {
            return Err(Error::InvalidParameter("read_len must be >= 1".into()));
        }
        if self.thinning_threshold.is_nan() || self.thinning_threshold <= 0.0 {
            return Err(Error::InvalidParameter("thinning_threshold must be > 0".into()));
        }
        Ok(())
    }

    pub fn thinning(&self) -> Thinning {
        Thinning { threshold: self.thinning_threshold }
    }

    pub fn n_reads(&self, designed: usize) -> usize {
        (self.coverage * designed as f64).round() as usize
    }
}

/// Synthesis followed by every stage, each on its own seed branch.
pub fn simulate_pool(refs: &ReferenceSet, spec: &ChannelSpec, seeds: SeedTree) -> Result<Pool> {
    spec.validate()?;
    let mut pool = synthesize_pool(refs, &spec.synthesis, seeds.child(PHASE_SYNTHESIS))?;
    for (i, stage) in spec.stages.iter().enumerate() {
        pool = stage.apply(&pool, refs.len(), spec.thinning(), seeds.child(PHASE_STAGE + i as u64))?;
    }
    Ok(pool)
}

/// Which pool entry each read comes from. Read `i` is generated on demand
/// from streams `2i` and `2i + 1` of the read phase.
pub struct ReadPlan<'a> {
    sampler: TemplateSampler<'a>,
    templates: Vec<u32>,
    profile: &'a ErrorProfile,
    read_len: usize,
    seeds: SeedTree,
}

impl<'a> ReadPlan<'a> {
    pub fn draw(pool: &'a Pool, spec: &'a ChannelSpec, n_reads: usize, seeds: SeedTree) -> Result<Self> {
        let sampler = TemplateSampler::new(pool)?;
        let mut rng = seeds.child(PHASE_DRAW).stream(0);
        let templates = sampler.draw_indices(n_reads, &mut rng);
        Ok(Self { sampler, templates, profile: &spec.profile, read_len: spec.read_len, seeds: seeds.child(PHASE_READ) })
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    /// Ground-truth design of read `i`.
    pub fn origin(&self, i: usize) -> Option<u32> {
        self.sampler.entry(self.templates[i] as usize).1
    }

    /// Reads per design according to the ground truth.
    pub fn origin_counts(&self, designed: usize) -> Vec<u64> {
        let mut counts = vec![0u64; designed];
        for &t in &self.templates {
            if let Some(o) = self.sampler.entry(t as usize).1 {
                counts[o as usize] += 1;
            }
        }
        counts
    }

    pub fn pair(&self, i: usize) -> ReadPair {
        let (template, origin) = self.sampler.entry(self.templates[i] as usize);
        let mut fwd = self.seeds.stream(2 * i as u64);
        let mut rev = self.seeds.stream(2 * i as u64 + 1);
        let mut pair = sequence_pair(template, self.profile, self.read_len, &mut fwd, &mut rev);
        pair.template_origin = origin;
        pair
    }

    pub fn pairs(&self, range: std::ops::Range<usize>) -> Vec<ReadPair> {
        let start = range.start;
        par::map_range(range.len(), |k| self.pair(start + k))
    }
}

/// Runs the whole channel and materializes every read pair.
pub fn run_channel(refs: &ReferenceSet, spec: &ChannelSpec, seeds: SeedTree) -> Result<ReadSet> {
    let pool = simulate_pool(refs, spec, seeds)?;
    let plan = ReadPlan::draw(&pool, spec, spec.n_reads(refs.len()), seeds)?;
    Ok(ReadSet { pairs: plan.pairs(0..plan.len()) })
}
