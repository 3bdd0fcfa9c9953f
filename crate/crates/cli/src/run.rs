//! Experiment orchestration: references, channel, merge, match, statistics.

use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use dna_channel::channel::{simulate_pool, ReadPlan};
use dna_channel::index::{build_ref_index, default_max_dist, match_reads, RefIndex};
use dna_channel::merge::{merge_pairs, MergeStats};
use dna_channel::rng::SeedTree;
use dna_channel::sequencing::ReadPair;
use dna_channel::stats::{
    fit_neg_binomial, CoverageHistogram, ReadingTally, StratifiedTally, Stratum, SubstitutionTally,
};
use dna_channel::{par, ReferenceSet, Sequence};
use log::{debug, info};

use crate::config::{ChannelConfig, ReferenceSource};
use crate::error::Result;
use crate::io::{self, FastqPairWriter};
use crate::report::{CoverageReport, ReadCounts, Report, Runtime, Section, StratumRates, SubstitutionReport};

const SEED_CHANNEL: u64 = 10;
const SEED_REFERENCES: u64 = 50;
const SEED_MERGE: u64 = 60;

pub const DEFAULT_CHUNK_PAIRS: usize = 1 << 20;

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Directory receiving `reads_R1.fastq` and `reads_R2.fastq`.
    pub fastq_dir: Option<PathBuf>,
    /// Read pairs generated and analyzed at a time.
    pub chunk_pairs: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { fastq_dir: None, chunk_pairs: DEFAULT_CHUNK_PAIRS }
    }
}

pub fn reference_seeds(master_seed: u64) -> SeedTree {
    SeedTree::new(master_seed).child(SEED_REFERENCES)
}

pub fn channel_seeds(master_seed: u64) -> SeedTree {
    SeedTree::new(master_seed).child(SEED_CHANNEL)
}

pub fn load_references(config: &ChannelConfig) -> Result<ReferenceSet> {
    match &config.references {
        ReferenceSource::File { path } => io::parse_fasta(path),
        ReferenceSource::Generate { count, target_length, homopolymer_limit } => {
            let mut rng = reference_seeds(config.master_seed).stream(0);
            io::generate_references(*count, *target_length, *homopolymer_limit, &mut rng)
        }
    }
}

/// Streaming analysis of read pairs against a design.
pub struct Analysis<'a> {
    config: &'a ChannelConfig,
    index: RefIndex,
    max_dist: u32,
    expected_len: usize,
    merge_seeds: SeedTree,
    /// Every `stride`-th pair enters the reading-error estimate.
    stride: usize,
    reads: ReadCounts,
    merge: MergeStats,
    tally: StratifiedTally,
    subs: SubstitutionTally,
    reading: ReadingTally,
    per_design: Vec<u64>,
}

impl<'a> Analysis<'a> {
    pub fn new(config: &'a ChannelConfig, refs: &ReferenceSet, total_pairs: usize) -> Result<Self> {
        let index = build_ref_index(refs, config.analysis.k)?;
        let max_dist = config.analysis.max_dist.unwrap_or_else(|| default_max_dist(refs.target_length()));
        let sample = config.analysis.reading_error_pairs;
        let stride = if sample == 0 { usize::MAX } else { total_pairs.div_ceil(sample).max(1) };
        Ok(Self {
            config,
            index,
            max_dist,
            expected_len: config.channel.read_len.min(refs.target_length()),
            merge_seeds: SeedTree::new(config.master_seed).child(SEED_MERGE),
            stride,
            reads: ReadCounts::default(),
            merge: MergeStats::default(),
            tally: StratifiedTally::default(),
            subs: SubstitutionTally::default(),
            reading: ReadingTally::default(),
            per_design: vec![0; refs.len()],
        })
    }

    /// Pairs `first_id..first_id + pairs.len()` of the run, in order.
    pub fn push(&mut self, first_id: usize, pairs: &[ReadPair]) {
        self.reads.pairs += pairs.len() as u64;
        let kept: Vec<(usize, &ReadPair)> = pairs
            .iter()
            .enumerate()
            .map(|(k, p)| (first_id + k, p))
            .filter(|(_, p)| {
                !self.config.analysis.exact_length_filter
                    || (p.forward.len() == self.expected_len && p.reverse.len() == self.expected_len)
            })
            .collect();
        self.reads.filtered += (pairs.len() - kept.len()) as u64;

        let sampled: Vec<&ReadPair> = kept.iter().filter(|(i, _)| i % self.stride == 0).map(|(_, p)| *p).collect();
        let tallies = par::map_slice(&sampled, |_, p| {
            let (fwd, rev) = p.oriented();
            let mut t = ReadingTally::default();
            t.add_pair(&fwd, &rev);
            t
        });
        tallies.iter().for_each(|t| self.reading.merge(t));

        let reads: Vec<Sequence> = match &self.config.merge {
            Some(params) => {
                // merge streams are keyed by pair id, so filtering does not shift them
                let results = par::map_slice(&kept, |_, (i, p)| {
                    let one = std::slice::from_ref(*p);
                    merge_pairs(one, *i as u64, params, self.merge_seeds).pop().expect("one result per pair")
                });
                results.iter().for_each(|r| self.merge.record(r));
                results.into_iter().filter_map(|r| r.merged().cloned()).collect()
            }
            None => kept.iter().map(|(_, p)| p.forward.clone()).collect(),
        };
        self.reads.analyzed += reads.len() as u64;

        for m in match_reads(&reads, &self.index, self.max_dist) {
            match m {
                Some(m) => {
                    self.reads.matched += 1;
                    self.reads.ambiguous += m.ambiguous as u64;
                    self.reads.correct_length += m.correct_length as u64;
                    self.per_design[m.reference_id as usize] += 1;
                    self.tally.add(&m);
                    self.subs.add(&m);
                }
                None => self.reads.unmatched += 1,
            }
        }
    }

    pub fn finish(self, ground_truth_unseen: Option<f64>, started: Instant) -> Report {
        let error_rates = Stratum::ALL
            .iter()
            .map(|&stratum| StratumRates {
                stratum,
                rates: Section::from_result(self.tally.get(stratum).rates(stratum)),
            })
            .collect();
        let substitution_matrix = match self.subs.matrix() {
            Ok(matrix) => Section::Ok(SubstitutionReport { substitutions: self.subs.total(), matrix }),
            Err(e) => Section::skipped(e.to_string()),
        };
        let reading_error = if self.reading.pairs == 0 {
            Section::skipped("no read pairs sampled")
        } else {
            Section::Ok(self.reading.estimate())
        };
        let histogram = CoverageHistogram::from_read_counts(&self.per_design);
        let neg_binomial = match &histogram {
            Ok(h) => Section::from_result(fit_neg_binomial(h)),
            Err(e) => Section::skipped(e.to_string()),
        };
        let coverage = match histogram {
            Ok(histogram) => {
                Section::Ok(CoverageReport { histogram, ground_truth_unseen_fraction: ground_truth_unseen })
            }
            Err(e) => Section::skipped(e.to_string()),
        };
        let merge = match self.config.merge {
            Some(_) => Section::Ok(self.merge),
            None => Section::skipped("no merge parameters; forward reads matched"),
        };
        Report {
            config: self.config.clone(),
            reads: self.reads,
            merge,
            error_rates,
            substitution_matrix,
            reading_error,
            coverage,
            neg_binomial,
            runtime: runtime(started),
        }
    }
}

fn runtime(started: Instant) -> Runtime {
    Runtime {
        threads: threads(),
        elapsed_seconds: started.elapsed().as_secs_f64(),
        timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
    }
}

fn threads() -> usize {
    if par::is_parallel() {
        rayon::current_num_threads()
    } else {
        1
    }
}

/// Simulates the configured channel and analyzes its reads.
pub fn run(config: &ChannelConfig, opts: &RunOptions) -> Result<Report> {
    let started = Instant::now();
    config.validate()?;
    let refs = load_references(config)?;
    info!("{}: {} designs of length {}", config.name, refs.len(), refs.target_length());
    let seeds = channel_seeds(config.master_seed);
    let pool = simulate_pool(&refs, &config.channel, seeds)?;
    let n = config.channel.n_reads(refs.len());
    let plan = ReadPlan::draw(&pool, &config.channel, n, seeds)?;
    info!("pool of {} distinct molecules, {n} read pairs", pool.len());
    let truth = CoverageHistogram::from_read_counts(&plan.origin_counts(refs.len()))?;

    let mut writer = match &opts.fastq_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| crate::error::CliError::io(dir, e))?;
            Some(FastqPairWriter::create(&dir.join("reads_R1.fastq"), &dir.join("reads_R2.fastq"))?)
        }
        None => None,
    };
    let mut analysis = Analysis::new(config, &refs, n)?;
    let chunk = opts.chunk_pairs.max(1);
    let mut start = 0;
    while start < n {
        let end = (start + chunk).min(n);
        let pairs = plan.pairs(start..end);
        if let Some(w) = writer.as_mut() {
            pairs.iter().try_for_each(|p| w.write(p))?;
        }
        analysis.push(start, &pairs);
        debug!("analyzed pairs {start}..{end}");
        start = end;
    }
    if let Some(w) = writer {
        w.finish()?;
    }
    Ok(analysis.finish(Some(truth.unseen_fraction), started))
}

/// Analyzes sequenced read pairs against the configured design.
pub fn analyze(config: &ChannelConfig, refs: &ReferenceSet, pairs: &[ReadPair], opts: &RunOptions) -> Result<Report> {
    let started = Instant::now();
    let mut analysis = Analysis::new(config, refs, pairs.len())?;
    for (k, chunk) in pairs.chunks(opts.chunk_pairs.max(1)).enumerate() {
        analysis.push(k * opts.chunk_pairs.max(1), chunk);
    }
    Ok(analysis.finish(None, started))
}
