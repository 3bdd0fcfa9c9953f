use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use log::info;

use dna_channel::channel::{simulate_pool, ReadPlan};
use dna_channel::index::{build_ref_index, default_max_dist, match_reads, DEFAULT_K};
use dna_channel::merge::{merge_pairs, MergeParams, MergeStats};
use dna_channel::rng::SeedTree;
use dna_channel::stats::CoverageHistogram;
use dna_channel::Sequence;
use dna_channel_cli::config::ChannelConfig;
use dna_channel_cli::error::CliError;
use dna_channel_cli::io::{self, FastqPairWriter};
use dna_channel_cli::report::histogram_text;
use dna_channel_cli::run::{self, RunOptions};
use dna_channel_cli::{presets, selftest};

#[derive(Parser)]
#[command(name = "dnachannel", version, about = "DNA data-storage channel simulator and read analysis")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Experiment configuration (TOML).
    #[arg(long, global = true, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named preset instead of a configuration file.
    #[arg(long, global = true, value_name = "NAME")]
    preset: Option<String>,
    /// Replaces the configured master seed.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Also write the simulated reads as FASTQ.
    #[arg(long, global = true)]
    emit_fastq: bool,
    /// Analyze only pairs whose reads both have the expected length.
    #[arg(long, global = true)]
    exact_length_filter: bool,
    /// Replaces the configured reads per design.
    #[arg(long, global = true, value_name = "READS")]
    coverage: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the channel and write the design and reads.
    Simulate,
    /// Analyze sequenced read pairs against the design.
    Analyze {
        #[arg(long, value_name = "FASTQ")]
        r1: PathBuf,
        #[arg(long, value_name = "FASTQ")]
        r2: PathBuf,
        /// Design FASTA; the configured reference source otherwise.
        #[arg(long, value_name = "FASTA")]
        references: Option<PathBuf>,
    },
    /// Merge read pairs into single reads.
    Merge {
        #[arg(long, value_name = "FASTQ")]
        r1: PathBuf,
        #[arg(long, value_name = "FASTQ")]
        r2: PathBuf,
        /// Target length; taken from the configuration when omitted.
        #[arg(long)]
        length: Option<usize>,
    },
    /// Find the closest design for each read.
    Match {
        #[arg(long, value_name = "FASTA")]
        reads: PathBuf,
        #[arg(long, value_name = "FASTA")]
        references: PathBuf,
        /// Largest accepted edit distance; 15% of the design length by default.
        #[arg(long)]
        max_dist: Option<u32>,
    },
    /// Simulate, merge, match and write the full report.
    #[command(alias = "run")]
    Report,
    /// List the presets, or print one as a configuration file.
    Presets { name: Option<String> },
    /// Run a few quick end-to-end checks.
    Selftest,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.global.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&cli)),
            Err(e) => Err(CliError::Config(format!("--threads {n}: {e}")).into()),
        },
        None => dispatch(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<CliError>().map(CliError::exit_code).unwrap_or(4);
            ExitCode::from(code as u8)
        }
    }
}

fn dispatch(cli: &Cli) -> anyhow::Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Simulate => simulate(&config(g)?, g),
        Command::Report => {
            let config = config(g)?;
            let opts = RunOptions { fastq_dir: g.emit_fastq.then(|| g.out.clone()), ..RunOptions::default() };
            let report = run::run(&config, &opts)?;
            report.write(&g.out)?;
            info!("report written to {}", g.out.display());
            Ok(())
        }
        Command::Analyze { r1, r2, references } => {
            let config = config(g)?;
            let refs = match references {
                Some(path) => io::parse_fasta(path)?,
                None => run::load_references(&config)?,
            };
            let parsed = io::parse_fastq_pairs(r1, r2)?;
            if parsed.skipped > 0 {
                log::warn!("skipped {} pairs with invalid characters", parsed.skipped);
            }
            let report = run::analyze(&config, &refs, &parsed.pairs, &RunOptions::default())?;
            report.write(&g.out)?;
            info!("report written to {}", g.out.display());
            Ok(())
        }
        Command::Merge { r1, r2, length } => {
            let params = match (length, optional_config(g)?) {
                (Some(l), _) => MergeParams::new(*l),
                (None, Some(c)) => c.merge.clone().context("configuration has no merge parameters")?,
                (None, None) => bail!(CliError::Config("give --length, --config or --preset".into())),
            };
            let seed = g.seed.unwrap_or(0);
            let parsed = io::parse_fastq_pairs(r1, r2)?;
            let results = merge_pairs(&parsed.pairs, 0, &params, SeedTree::new(seed));
            let mut stats = MergeStats::default();
            results.iter().for_each(|r| stats.record(r));
            create_dir(&g.out)?;
            let merged: Vec<(String, &Sequence)> =
                results.iter().enumerate().filter_map(|(i, r)| r.merged().map(|s| (format!("pair{i}"), s))).collect();
            io::write_fasta(&g.out.join("merged.fasta"), merged.iter().map(|(n, s)| (n.clone(), *s)))?;
            write_json(&g.out.join("merge_stats.json"), &stats)?;
            info!("{} of {} pairs merged", stats.merged, stats.total());
            Ok(())
        }
        Command::Match { reads, references, max_dist } => {
            let refs = io::parse_fasta(references)?;
            let config = optional_config(g)?;
            let k = config.as_ref().map_or(DEFAULT_K, |c| c.analysis.k);
            let max_dist = max_dist
                .or(config.as_ref().and_then(|c| c.analysis.max_dist))
                .unwrap_or_else(|| default_max_dist(refs.target_length()));
            let records = io::read_fasta_records(reads)?;
            let seqs: Vec<Sequence> = records.iter().map(|(_, s)| s.clone()).collect();
            let index = build_ref_index(&refs, k).map_err(CliError::from)?;
            let matches = match_reads(&seqs, &index, max_dist);
            create_dir(&g.out)?;
            let mut text = String::new();
            for ((name, _), m) in records.iter().zip(&matches) {
                let line = serde_json::json!({ "read": name, "match": m });
                text.push_str(&line.to_string());
                text.push('\n');
            }
            let path = g.out.join("matches.jsonl");
            std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
            let found = matches.iter().flatten().count();
            info!("{found} of {} reads matched", matches.len());
            Ok(())
        }
        Command::Presets { name } => {
            match name {
                Some(name) => {
                    let config =
                        presets::preset(name).ok_or_else(|| CliError::Config(format!("unknown preset {name:?}")))?;
                    print!("{}", config.to_toml()?);
                }
                None => presets::names().iter().for_each(|n| println!("{n}")),
            }
            Ok(())
        }
        Command::Selftest => {
            let checks = selftest::selftest()?;
            let mut failed = 0;
            for c in &checks {
                println!("{} {} ({})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                failed += usize::from(!c.passed);
            }
            if failed > 0 {
                bail!("{failed} self-test check(s) failed");
            }
            Ok(())
        }
    }
}

fn optional_config(g: &Global) -> anyhow::Result<Option<ChannelConfig>> {
    let mut config = match (&g.config, &g.preset) {
        (Some(path), _) => ChannelConfig::load(path)?,
        (None, Some(name)) => {
            presets::preset(name).ok_or_else(|| CliError::Config(format!("unknown preset {name:?}")))?
        }
        (None, None) => return Ok(None),
    };
    if let Some(seed) = g.seed {
        config.master_seed = seed;
    }
    if let Some(coverage) = g.coverage {
        config.channel.coverage = coverage;
    }
    if g.exact_length_filter {
        config.analysis.exact_length_filter = true;
    }
    config.validate()?;
    Ok(Some(config))
}

fn config(g: &Global) -> anyhow::Result<ChannelConfig> {
    match optional_config(g)? {
        Some(c) => Ok(c),
        None => bail!(CliError::Config("give --config PATH or --preset NAME".into())),
    }
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    Ok(())
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))?;
    Ok(())
}

/// Writes the design, the reads and the ground-truth coverage.
fn simulate(config: &ChannelConfig, g: &Global) -> anyhow::Result<()> {
    let refs = run::load_references(config)?;
    let seeds = run::channel_seeds(config.master_seed);
    let pool = simulate_pool(&refs, &config.channel, seeds).map_err(CliError::from)?;
    let n = config.channel.n_reads(refs.len());
    let plan = ReadPlan::draw(&pool, &config.channel, n, seeds).map_err(CliError::from)?;
    create_dir(&g.out)?;
    let names: Vec<String> = (0..refs.len()).map(|i| format!("design{i}")).collect();
    io::write_fasta(&g.out.join("references.fasta"), names.iter().cloned().zip(refs.sequences()))?;
    let mut writer = FastqPairWriter::create(&g.out.join("reads_R1.fastq"), &g.out.join("reads_R2.fastq"))?;
    let mut start = 0;
    while start < n {
        let end = (start + run::DEFAULT_CHUNK_PAIRS).min(n);
        for p in plan.pairs(start..end) {
            writer.write(&p)?;
        }
        start = end;
    }
    writer.finish()?;
    let truth = CoverageHistogram::from_read_counts(&plan.origin_counts(refs.len())).map_err(CliError::from)?;
    let path = g.out.join("ground_truth_coverage.txt");
    std::fs::write(&path, histogram_text(&truth, '\t')).map_err(|e| CliError::io(&path, e))?;
    info!("{n} read pairs from {} designs, {:.4}% unseen", refs.len(), 100.0 * truth.unseen_fraction);
    Ok(())
}
