//! Pool transformations between synthesis and sequencing: PCR with
//! efficiency bias, storage decay, dilution and repeated copy steps.
//!
//! Each operation returns a new pool. Per-entry randomness comes from a
//! stream keyed by the entry's content hash, so results do not depend on
//! how the entries are partitioned across threads.

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::{Binomial, Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::pool::{Abundance, Molecule, PoolBuilder};
use crate::rng::{sequence_hash, splitmix64, RngStream, SeedTree};
use crate::{par, Error, Nucleotide, Pool, Result, Sequence};

/// Default weight above which thinning uses expectation scaling.
pub const DEFAULT_THINNING_THRESHOLD: f64 = 1e6;

/// Largest weight handed to the exact binomial sampler.
const MAX_BINOMIAL_TRIALS: f64 = 9_007_199_254_740_992.0; // 2^53

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EfficiencyMode {
    /// One efficiency per molecule, reused every cycle.
    StrandSpecific,
    /// A fresh efficiency per molecule and cycle.
    PerCycle,
}

/// Gaussian PCR efficiency (per-cycle amplification factor).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EfficiencyModel {
    pub mode: EfficiencyMode,
    pub mean: f64,
    pub stddev: f64,
    /// Clamp draws to [1, 2]. When off, draws are only floored at zero.
    #[serde(default = "default_true")]
    pub clamp: bool,
}

fn default_true() -> bool {
    true
}

impl EfficiencyModel {
    pub fn strand_specific(mean: f64, stddev: f64) -> Self {
        Self { mode: EfficiencyMode::StrandSpecific, mean, stddev, clamp: true }
    }

    pub fn per_cycle(mean: f64, stddev: f64) -> Self {
        Self { mode: EfficiencyMode::PerCycle, mean, stddev, clamp: true }
    }

    pub fn unclamped(mut self) -> Self {
        self.clamp = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean > 1.0 && self.mean <= 2.0) {
            return Err(Error::InvalidParameter(format!("PCR efficiency mean {} not in (1, 2]", self.mean)));
        }
        if !(self.stddev >= 0.0 && self.stddev.is_finite()) {
            return Err(Error::InvalidParameter(format!("PCR efficiency stddev {} < 0", self.stddev)));
        }
        Ok(())
    }

    fn sampler(&self) -> Result<EfficiencySampler> {
        self.validate()?;
        let normal = Normal::new(self.mean, self.stddev).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        Ok(EfficiencySampler { normal, clamp: self.clamp, fixed: (self.stddev == 0.0).then_some(self.mean) })
    }
}

struct EfficiencySampler {
    normal: Normal<f64>,
    clamp: bool,
    fixed: Option<f64>,
}

impl EfficiencySampler {
    #[inline]
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if let Some(e) = self.fixed {
            return e;
        }
        let e = self.normal.sample(rng);
        if self.clamp {
            e.clamp(1.0, 2.0)
        } else {
            e.max(0.0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polymerase {
    /// Stalls on uracil: a copy is lost when both strands carry a lesion.
    Proofreading,
    /// Reads uracil as thymine: half of the amplified copies carry C→T
    /// (G→A when the lesion sits on the complementary strand).
    NonProofreading,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayParams {
    pub half_lives: f64,
    pub enzyme: Polymerase,
    /// Expected deamination events per strand and half-life for a strand of
    /// uniform base composition. Not measured; a free parameter.
    #[serde(default = "default_deamination_rate")]
    pub deam_events_per_strand_per_halflife: f64,
    /// Cap on explicitly simulated lesion-carrying copies per entry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tracked_hits: Option<u64>,
}

fn default_deamination_rate() -> f64 {
    0.05
}

impl DecayParams {
    pub fn breakage_only(half_lives: f64) -> Self {
        Self {
            half_lives,
            enzyme: Polymerase::Proofreading,
            deam_events_per_strand_per_halflife: 0.0,
            max_tracked_hits: None,
        }
    }

    /// Half-lives that leave `percent` of the strands intact.
    pub fn half_lives_for_retained(percent: f64) -> f64 {
        (100.0 / percent).log2()
    }

    pub fn retained_fraction(&self) -> f64 {
        (-self.half_lives).exp2()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.half_lives >= 0.0 && self.half_lives.is_finite()) {
            return Err(Error::InvalidParameter(format!("half_lives {} < 0", self.half_lives)));
        }
        if self.deam_events_per_strand_per_halflife.is_nan() || self.deam_events_per_strand_per_halflife < 0.0 {
            return Err(Error::InvalidParameter("deamination rate must be >= 0".into()));
        }
        if self.max_tracked_hits == Some(0) {
            return Err(Error::InvalidParameter("max_tracked_hits must be >= 1".into()));
        }
        Ok(())
    }
}

/// How weights are thinned when molecules are removed at random.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thinning {
    /// Expected kept weight at or above which thinning is deterministic.
    pub threshold: f64,
}

impl Default for Thinning {
    fn default() -> Self {
        Self { threshold: DEFAULT_THINNING_THRESHOLD }
    }
}

impl Thinning {
    /// Keeps each of `round(weight)` copies with probability `keep`.
    pub fn thin<R: Rng + ?Sized>(&self, weight: f64, keep: f64, rng: &mut R) -> f64 {
        let n = weight.round();
        if keep >= 1.0 {
            return n;
        }
        if n <= 0.0 || keep <= 0.0 {
            return 0.0;
        }
        let expected = n * keep;
        if expected >= self.threshold {
            return weight * keep;
        }
        if n <= MAX_BINOMIAL_TRIALS {
            Binomial::new(n as u64, keep).expect("valid binomial").sample(rng) as f64
        } else {
            // keep < threshold / 2^53 here, the Poisson limit is exact to double precision
            Poisson::new(expected).expect("valid poisson").sample(rng)
        }
    }
}

#[inline]
fn entry_stream(seeds: SeedTree, molecule: &Molecule) -> RngStream {
    let h = sequence_hash(&molecule.seq);
    seeds.stream(if molecule.truncated { h ^ splitmix64(1) } else { h })
}

/// Applies `f` to every entry in parallel and rebuilds the pool.
fn transform<F>(pool: &Pool, seeds: SeedTree, f: F) -> Pool
where
    F: Fn(&Molecule, &Abundance, &mut RngStream, &mut Vec<(Molecule, f64)>) + Sync + Send,
{
    let entries: Vec<(&Molecule, &Abundance)> = pool.iter().collect();
    let outputs = par::map_slice(&entries, |_, (molecule, abundance)| {
        let mut rng = entry_stream(seeds, molecule);
        let mut out = Vec::with_capacity(1);
        f(molecule, abundance, &mut rng, &mut out);
        (abundance.origin, out)
    });
    let mut builder = PoolBuilder::default();
    for (origin, out) in outputs {
        for (molecule, weight) in out {
            builder.add(molecule, weight, origin);
        }
    }
    builder.build()
}

/// Amplifies the pool for `cycles` rounds. Truncated strands have no
/// primer site and are removed first.
pub fn pcr(pool: &Pool, cycles: u32, eff: &EfficiencyModel, seeds: SeedTree) -> Result<Pool> {
    let sampler = eff.sampler()?;
    if cycles == 0 {
        return Ok(pool.clone());
    }
    let exponent = cycles as i32;
    Ok(transform(pool, seeds, |molecule, abundance, rng, out| {
        if molecule.truncated {
            return;
        }
        let factor = match eff.mode {
            EfficiencyMode::StrandSpecific => sampler.draw(rng).powi(exponent),
            EfficiencyMode::PerCycle => match sampler.fixed {
                Some(e) => e.powi(exponent),
                None => (0..cycles).map(|_| sampler.draw(rng)).product(),
            },
        };
        out.push((molecule.clone(), abundance.weight * factor));
    }))
}

/// Binomially thins every entry with probability `keep_fraction`.
pub fn dilute(pool: &Pool, keep_fraction: f64, thinning: Thinning, seeds: SeedTree) -> Result<Pool> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::PrecondViolation(format!("keep fraction {keep_fraction} not in (0, 1]")));
    }
    Ok(transform(pool, seeds, |molecule, abundance, rng, out| {
        let kept = thinning.thin(abundance.weight, keep_fraction, rng);
        if kept > 0.0 {
            out.push((molecule.clone(), kept));
        }
    }))
}

/// Takes a sample holding `physical_redundancy` copies per design on
/// average (no-op when the pool is already that dilute).
pub fn aliquot(
    pool: &Pool,
    physical_redundancy: f64,
    designed: usize,
    thinning: Thinning,
    seeds: SeedTree,
) -> Result<Pool> {
    if physical_redundancy.is_nan() || physical_redundancy <= 0.0 {
        return Err(Error::PrecondViolation(format!("physical redundancy {physical_redundancy} must be > 0")));
    }
    let total = pool.total_weight();
    if total <= 0.0 {
        return Ok(pool.clone());
    }
    let keep = (physical_redundancy * designed as f64 / total).min(1.0);
    dilute(pool, keep, thinning, seeds)
}

/// Repeated "take a fraction, amplify back" copy cycles with bias-free PCR.
pub fn interact(
    pool: &Pool,
    steps: u32,
    keep_fraction: f64,
    amp_factor: f64,
    thinning: Thinning,
    seeds: SeedTree,
) -> Result<Pool> {
    if (keep_fraction * amp_factor - 1.0).abs() > 1e-9 {
        return Err(Error::PrecondViolation(format!(
            "keep_fraction * amp_factor = {} must equal 1",
            keep_fraction * amp_factor
        )));
    }
    let mut current = pool.clone();
    for step in 0..steps {
        current = dilute(&current, keep_fraction, thinning, seeds.child(step as u64))?.scaled(amp_factor);
    }
    Ok(current)
}

/// Splits the weight of a duplex carrying deamination lesions into the
/// products of a non-proofreading amplification. `top_sites` are C
/// positions hit on the stored strand (read as T), `bottom_sites` are G
/// positions whose complementary C was hit (read as A).
pub fn apply_deamination(
    seq: &Sequence,
    weight: f64,
    top_sites: &[usize],
    bottom_sites: &[usize],
) -> Vec<(Sequence, f64)> {
    let mutate = |sites: &[usize], from: Nucleotide, to: Nucleotide| {
        let mut bases = seq.bases().to_vec();
        for &i in sites {
            if bases[i] == from {
                bases[i] = to;
            }
        }
        Sequence::new(bases)
    };
    let top = (!top_sites.is_empty()).then(|| mutate(top_sites, Nucleotide::C, Nucleotide::T));
    let bottom = (!bottom_sites.is_empty()).then(|| mutate(bottom_sites, Nucleotide::G, Nucleotide::A));
    let half = weight / 2.0;
    vec![(top.unwrap_or_else(|| seq.clone()), half), (bottom.unwrap_or_else(|| seq.clone()), half)]
}

/// Expected lesions per strand for the stored strand (C sites) and its
/// complement (G sites).
fn lesion_rates(seq: &Sequence, params: &DecayParams) -> (f64, f64) {
    if seq.is_empty() {
        return (0.0, 0.0);
    }
    let per_site = params.deam_events_per_strand_per_halflife * params.half_lives * 4.0 / seq.len() as f64;
    (per_site * seq.count(Nucleotide::C) as f64, per_site * seq.count(Nucleotide::G) as f64)
}

/// Zero-truncated Poisson draw, capped at `max`.
fn positive_poisson<R: Rng + ?Sized>(lambda: f64, max: usize, rng: &mut R) -> usize {
    let p0 = (-lambda).exp();
    let u = p0 + rng.random::<f64>() * (1.0 - p0);
    let mut k = 0usize;
    let mut pk = p0;
    let mut cdf = p0;
    while cdf < u && k < max {
        k += 1;
        pk *= lambda / k as f64;
        cdf += pk;
    }
    k.clamp(1, max.max(1))
}

fn pick_sites<R: Rng + ?Sized>(seq: &Sequence, base: Nucleotide, lambda: f64, rng: &mut R) -> Vec<usize> {
    let sites: Vec<usize> = seq.bases().iter().enumerate().filter(|(_, &b)| b == base).map(|(i, _)| i).collect();
    if sites.is_empty() {
        return Vec::new();
    }
    let k = positive_poisson(lambda, sites.len(), rng);
    sample_indices(rng, sites.len(), k).into_iter().map(|i| sites[i]).collect()
}

/// Storage decay: strand breakage followed by cytosine deamination.
pub fn decay(pool: &Pool, params: &DecayParams, thinning: Thinning, seeds: SeedTree) -> Result<Pool> {
    params.validate()?;
    if params.half_lives == 0.0 {
        return Ok(pool.clone());
    }
    let survival = params.retained_fraction();
    Ok(transform(pool, seeds, |molecule, abundance, rng, out| {
        let survived = thinning.thin(abundance.weight, survival, rng);
        if survived <= 0.0 {
            return;
        }
        let (lambda_top, lambda_bottom) = lesion_rates(&molecule.seq, params);
        if lambda_top == 0.0 && lambda_bottom == 0.0 {
            out.push((molecule.clone(), survived));
            return;
        }
        let p_top = 1.0 - (-lambda_top).exp();
        let p_bottom = 1.0 - (-lambda_bottom).exp();
        match params.enzyme {
            Polymerase::Proofreading => {
                let kept = thinning.thin(survived, 1.0 - p_top * p_bottom, rng);
                if kept > 0.0 {
                    out.push((molecule.clone(), kept));
                }
            }
            Polymerase::NonProofreading => {
                // split copies into top-only, bottom-only, both and untouched
                let p_top_only = p_top * (1.0 - p_bottom);
                let p_bottom_only = (1.0 - p_top) * p_bottom;
                let p_both = p_top * p_bottom;
                let n_top = thinning.thin(survived, p_top_only, rng);
                let rest = survived - n_top;
                let n_bottom = thinning.thin(rest, conditional(p_bottom_only, p_top_only), rng);
                let rest = rest - n_bottom;
                let n_both = thinning.thin(rest, conditional(p_both, p_top_only + p_bottom_only), rng);
                let untouched = rest - n_both;
                if untouched > 0.0 {
                    out.push((molecule.clone(), untouched));
                }
                let total_hits = n_top + n_bottom + n_both;
                for (hits, top, bottom) in [(n_top, true, false), (n_bottom, false, true), (n_both, true, true)] {
                    if hits <= 0.0 {
                        continue;
                    }
                    // the cap is shared by the three lesion classes in proportion to their weight
                    let tracked = match params.max_tracked_hits {
                        Some(cap) => (cap as f64 * hits / total_hits).round().min(hits.ceil()),
                        None => hits.ceil(),
                    }
                    .max(1.0) as u64;
                    let per_copy = hits / tracked as f64;
                    for _ in 0..tracked {
                        let top_sites =
                            if top { pick_sites(&molecule.seq, Nucleotide::C, lambda_top, rng) } else { Vec::new() };
                        let bottom_sites = if bottom {
                            pick_sites(&molecule.seq, Nucleotide::G, lambda_bottom, rng)
                        } else {
                            Vec::new()
                        };
                        for (seq, w) in apply_deamination(&molecule.seq, per_copy, &top_sites, &bottom_sites) {
                            out.push((Molecule { seq, truncated: molecule.truncated }, w));
                        }
                    }
                }
            }
        }
    }))
}

/// P(event | not any of the earlier events), guarded against 0/0.
fn conditional(p: f64, earlier: f64) -> f64 {
    let rest = 1.0 - earlier;
    if rest <= 0.0 {
        0.0
    } else {
        (p / rest).clamp(0.0, 1.0)
    }
}

/// A transformation step applied between synthesis and sequencing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Stage {
    /// Explicit no-op, marks a deliberately empty stage list.
    Neutral,
    Pcr {
        cycles: u32,
        efficiency: EfficiencyModel,
    },
    Decay(DecayParams),
    Dilute {
        keep_fraction: f64,
    },
    Aliquot {
        physical_redundancy: f64,
    },
    Interact {
        steps: u32,
        keep_fraction: f64,
        amp_factor: f64,
    },
}

impl Stage {
    pub fn validate(&self) -> Result<()> {
        match self {
            Stage::Neutral => Ok(()),
            Stage::Pcr { efficiency, .. } => efficiency.validate(),
            Stage::Decay(p) => p.validate(),
            Stage::Dilute { keep_fraction } => {
                if *keep_fraction > 0.0 && *keep_fraction <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!("keep fraction {keep_fraction} not in (0, 1]")))
                }
            }
            Stage::Aliquot { physical_redundancy } => {
                if *physical_redundancy > 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter("aliquot physical redundancy must be > 0".into()))
                }
            }
            Stage::Interact { keep_fraction, amp_factor, .. } => {
                if (keep_fraction * amp_factor - 1.0).abs() > 1e-9 {
                    Err(Error::InvalidParameter("interact needs keep_fraction * amp_factor = 1".into()))
                } else if !(*keep_fraction > 0.0 && *keep_fraction <= 1.0) {
                    Err(Error::InvalidParameter(format!("keep fraction {keep_fraction} not in (0, 1]")))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn apply(&self, pool: &Pool, designed: usize, thinning: Thinning, seeds: SeedTree) -> Result<Pool> {
        match self {
            Stage::Neutral => Ok(pool.clone()),
            Stage::Pcr { cycles, efficiency } => pcr(pool, *cycles, efficiency, seeds),
            Stage::Decay(p) => decay(pool, p, thinning, seeds),
            Stage::Dilute { keep_fraction } => dilute(pool, *keep_fraction, thinning, seeds),
            Stage::Aliquot { physical_redundancy } => aliquot(pool, *physical_redundancy, designed, thinning, seeds),
            Stage::Interact { steps, keep_fraction, amp_factor } => {
                interact(pool, *steps, *keep_fraction, *amp_factor, thinning, seeds)
            }
        }
    }
}
