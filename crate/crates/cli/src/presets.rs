//! Named experiment presets.
//!
//! Dataset rows take strands, target length, retained fraction, physical
//! redundancy, PCR cycles and read coverage verbatim from the dataset
//! table. Synthesis and sequencing error rates are estimates: the reading
//! error (split evenly between insertions and deletions) is the sequencing
//! profile, and the overall rate minus the reading rate, floored at zero,
//! is the synthesis profile.

use dna_channel::channel::ChannelSpec;
use dna_channel::merge::MergeParams;
use dna_channel::process::{DecayParams, EfficiencyModel, Polymerase, Stage, DEFAULT_THINNING_THRESHOLD};
use dna_channel::sequencing::ErrorProfile;
use dna_channel::submatrix::{published, ConditionalSubMatrix};
use dna_channel::synthesis::{CopyNumber, SynthesisParams};

use crate::config::{AnalysisSettings, ChannelConfig, ReferenceSource, SCHEMA_VERSION};

/// Copies per design after synthesis when a row asks for less: the pool
/// is synthesized at this density and then aliquoted down.
const SYNTHESIS_DENSITY: f64 = 128.0;
const GAMMA_SHAPE: f64 = 8.0;
const TRACKED_COPIES: u64 = 32;
const TRACKED_LESION_COPIES: u64 = 4;
const DEFAULT_SEED: u64 = 1;

/// Per-nucleotide rates in percent: (substitution, insertion, deletion).
type Rates = (f64, f64, f64);

struct Dataset {
    strands: usize,
    length: usize,
    homopolymer_limit: usize,
    retained_percent: f64,
    physical_redundancy: f64,
    pcr_cycles: u32,
    coverage: f64,
    read_len: usize,
    synthesis: Rates,
    reading: Rates,
    matrix: [f64; 12],
}

// overall (substitution, insertion, deletion) minus reading, in percent
const GOLDMAN_SYNTH: Rates = (0.0, 0.0281596 - 0.0363045 / 2.0, 0.5460396 - 0.0363045 / 2.0);
const GOLDMAN_READ: Rates = (0.105509, 0.0363045 / 2.0, 0.0363045 / 2.0);
const ERLICH_SYNTH: Rates = (0.0, 0.179013 - 0.222388 / 2.0, 0.162013 - 0.222388 / 2.0);
const ERLICH_READ: Rates = (0.410491, 0.222388 / 2.0, 0.222388 / 2.0);
const HIGH_PR_SYNTH: Rates = (0.556076 - 0.138994, 0.086758 - 0.0676675 / 2.0, 0.986874 - 0.0676675 / 2.0);
const HIGH_PR_READ: Rates = (0.138994, 0.0676675 / 2.0, 0.0676675 / 2.0);
const LOW_PR_SYNTH: Rates = (0.0, 0.0, 0.978631 - 0.300715 / 2.0);
const LOW_PR_READ: Rates = (0.469153, 0.300715 / 2.0, 0.300715 / 2.0);
const HIGH_PR_4T_SYNTH: Rates = (1.2 - 0.114, 0.11 - 0.043 / 2.0, 1.07 - 0.043 / 2.0);
const HIGH_PR_4T_READ: Rates = (0.114, 0.043 / 2.0, 0.043 / 2.0);

fn goldman() -> Dataset {
    Dataset {
        strands: 153_335,
        length: 117,
        homopolymer_limit: 1,
        retained_percent: 100.0,
        physical_redundancy: 22_172.0,
        pcr_cycles: 22,
        coverage: 519.0,
        read_len: 104,
        synthesis: GOLDMAN_SYNTH,
        reading: GOLDMAN_READ,
        matrix: published::GOLDMAN,
    }
}

fn erlich() -> Dataset {
    Dataset {
        strands: 72_000,
        length: 152,
        homopolymer_limit: 2,
        retained_percent: 100.0,
        physical_redundancy: 1.28e7,
        pcr_cycles: 10,
        coverage: 281.0,
        read_len: 151,
        synthesis: ERLICH_SYNTH,
        reading: ERLICH_READ,
        matrix: published::ERLICH,
    }
}

fn grass(
    retained_percent: f64,
    physical_redundancy: f64,
    pcr_cycles: u32,
    coverage: f64,
    synthesis: Rates,
    reading: Rates,
    matrix: [f64; 12],
) -> Dataset {
    Dataset {
        strands: 4991,
        length: 117,
        homopolymer_limit: 3,
        retained_percent,
        physical_redundancy,
        pcr_cycles,
        coverage,
        read_len: 150,
        synthesis,
        reading,
        matrix,
    }
}

fn matrix(values: [f64; 12]) -> ConditionalSubMatrix {
    ConditionalSubMatrix::from_labeled(values).expect("published spectra are valid")
}

fn strand_specific_pcr(cycles: u32) -> Stage {
    Stage::Pcr { cycles, efficiency: EfficiencyModel::strand_specific(1.85, 0.07) }
}

fn base_config(
    name: &str,
    count: usize,
    length: usize,
    homopolymer_limit: usize,
    channel: ChannelSpec,
) -> ChannelConfig {
    ChannelConfig {
        schema_version: SCHEMA_VERSION,
        name: name.to_string(),
        master_seed: DEFAULT_SEED,
        references: ReferenceSource::Generate { count, target_length: length, homopolymer_limit },
        channel,
        merge: Some(MergeParams::new(length)),
        analysis: AnalysisSettings::default(),
    }
}

/// Synthesis at the density needed to reach the row's physical redundancy
/// after decay, decay, an aliquot when synthesis had to be denser than
/// that, then PCR.
fn dataset_config(name: &str, d: &Dataset) -> ChannelConfig {
    let retained = d.retained_percent / 100.0;
    let needed = d.physical_redundancy / retained;
    let density = needed.max(SYNTHESIS_DENSITY);
    let m = matrix(d.matrix);
    let synthesis = SynthesisParams {
        copies: CopyNumber::Gamma { shape: GAMMA_SHAPE, scale: density / GAMMA_SHAPE },
        p_sub: d.synthesis.0 / 100.0,
        p_ins: d.synthesis.1 / 100.0,
        p_del: d.synthesis.2 / 100.0,
        p_term: 0.0,
        sub_matrix: m.clone(),
        max_tracked_copies: Some(TRACKED_COPIES),
    };
    let mut stages = Vec::new();
    if d.retained_percent < 100.0 {
        stages.push(Stage::Decay(DecayParams {
            half_lives: DecayParams::half_lives_for_retained(d.retained_percent),
            enzyme: Polymerase::NonProofreading,
            deam_events_per_strand_per_halflife: 0.05,
            max_tracked_hits: Some(TRACKED_LESION_COPIES),
        }));
    }
    if density > needed {
        stages.push(Stage::Aliquot { physical_redundancy: d.physical_redundancy });
    }
    stages.push(strand_specific_pcr(d.pcr_cycles));
    let profile = ErrorProfile {
        p_sub: d.reading.0 / 100.0,
        p_ins: d.reading.1 / 100.0,
        p_del: d.reading.2 / 100.0,
        sub_matrix: m,
    };
    let channel = ChannelSpec {
        synthesis,
        stages,
        coverage: d.coverage,
        read_len: d.read_len,
        profile,
        thinning_threshold: DEFAULT_THINNING_THRESHOLD,
    };
    base_config(name, d.strands, d.length, d.homopolymer_limit, channel)
}

/// Erlich dilution series: the full-density pool diluted by 10^(i-1), then
/// 40 PCR cycles. Coverage is fixed at 300 within the published 281-503.
fn erlich_dilution(name: &str, step: u32) -> ChannelConfig {
    let d = erlich();
    let mut config = dataset_config(name, &d);
    config.channel.coverage = 300.0;
    config.channel.stages = vec![
        Stage::Aliquot { physical_redundancy: d.physical_redundancy / 10f64.powi(step as i32 - 1) },
        strand_specific_pcr(40),
    ];
    config
}

fn fig7(name: &str, copies: CopyNumber, stages: Vec<Stage>) -> ChannelConfig {
    let mut synthesis = SynthesisParams::noiseless(copies);
    synthesis.max_tracked_copies = Some(TRACKED_COPIES);
    let channel = ChannelSpec {
        synthesis,
        stages,
        coverage: 300.0,
        read_len: 150,
        profile: ErrorProfile::noiseless(),
        thinning_threshold: DEFAULT_THINNING_THRESHOLD,
    };
    base_config(name, 20_000, 117, 3, channel)
}

fn fig7_gamma() -> CopyNumber {
    CopyNumber::Gamma { shape: 8.0, scale: 16.0 }
}

/// Amplification followed by an aliquot back to the synthesized density.
fn fig7_pcr(efficiency: EfficiencyModel, cycles: u32) -> Vec<Stage> {
    vec![Stage::Pcr { cycles, efficiency }, Stage::Aliquot { physical_redundancy: SYNTHESIS_DENSITY }]
}

fn fig7_interact(steps: u32) -> Vec<Stage> {
    vec![Stage::Interact { steps, keep_fraction: 0.1, amp_factor: 10.0 }]
}

const NAMES: [&str; 20] = [
    "table1-goldman",
    "table1-erlich",
    "table1-highpr",
    "table1-highpr-4t",
    "table1-lowpr",
    "table1-lowpr-4t",
    "erlich-d1",
    "erlich-d2",
    "erlich-d3",
    "erlich-d4",
    "erlich-d5",
    "erlich-d6",
    "erlich-d7",
    "fig7a",
    "fig7b",
    "fig7c",
    "fig7d",
    "fig7e",
    "fig7f",
    "fig7g",
];

pub fn names() -> &'static [&'static str] {
    &NAMES
}

pub fn preset(name: &str) -> Option<ChannelConfig> {
    let per_cycle = EfficiencyModel::per_cycle(1.85, 0.25).unclamped();
    let strand = EfficiencyModel::strand_specific(1.85, 0.07);
    let config = match name {
        "table1-goldman" => dataset_config(name, &goldman()),
        "table1-erlich" => dataset_config(name, &erlich()),
        "table1-highpr" => {
            dataset_config(name, &grass(100.0, 3.9e3, 65, 372.0, HIGH_PR_SYNTH, HIGH_PR_READ, published::HIGH_PR))
        }
        "table1-highpr-4t" => dataset_config(
            name,
            &grass(6.25, 3.9e4, 65, 456.0, HIGH_PR_4T_SYNTH, HIGH_PR_4T_READ, published::HIGH_PR_4T),
        ),
        "table1-lowpr" => {
            dataset_config(name, &grass(100.0, 1.0, 68, 461.0, LOW_PR_SYNTH, LOW_PR_READ, published::LOW_PR))
        }
        "table1-lowpr-4t" => {
            dataset_config(name, &grass(5.75, 17.9, 68, 396.0, LOW_PR_SYNTH, LOW_PR_READ, published::LOW_PR))
        }
        "fig7a" => fig7(name, fig7_gamma(), vec![Stage::Neutral]),
        "fig7b" => fig7(name, fig7_gamma(), fig7_pcr(strand, 22)),
        "fig7c" => fig7(name, fig7_gamma(), fig7_pcr(strand, 60)),
        "fig7d" => fig7(name, fig7_gamma(), fig7_pcr(per_cycle, 22)),
        "fig7e" => fig7(name, fig7_gamma(), fig7_pcr(per_cycle, 60)),
        "fig7f" => fig7(name, CopyNumber::Fixed { copies: 100 }, fig7_interact(5)),
        "fig7g" => fig7(name, CopyNumber::Fixed { copies: 100 }, fig7_interact(10)),
        _ => {
            let step: u32 = name.strip_prefix("erlich-d")?.parse().ok()?;
            if !(1..=7).contains(&step) {
                return None;
            }
            erlich_dilution(name, step)
        }
    };
    Some(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_name_resolves_and_validates() {
        for name in names() {
            let c = preset(name).unwrap_or_else(|| panic!("{name}"));
            c.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(c.name, *name);
        }
        assert!(preset("erlich-d8").is_none());
        assert!(preset("nope").is_none());
    }

    #[test]
    fn dataset_rows_are_verbatim() {
        let c = preset("table1-goldman").unwrap();
        assert_eq!(
            c.references,
            ReferenceSource::Generate { count: 153_335, target_length: 117, homopolymer_limit: 1 }
        );
        assert_eq!(c.channel.coverage, 519.0);
        assert_eq!(c.channel.synthesis.copies.mean(), 22_172.0);
        assert_eq!(c.channel.stages, vec![strand_specific_pcr(22)]);

        let c = preset("table1-highpr-4t").unwrap();
        assert!(matches!(&c.channel.stages[0], Stage::Decay(d) if d.half_lives == 4.0));
        assert!((c.channel.synthesis.copies.mean() * 0.0625 - 3.9e4).abs() < 1e-6);

        let c = preset("table1-lowpr").unwrap();
        assert_eq!(c.channel.stages[0], Stage::Aliquot { physical_redundancy: 1.0 });

        let c = preset("erlich-d5").unwrap();
        assert_eq!(c.channel.stages[0], Stage::Aliquot { physical_redundancy: 1.28e3 });
        assert_eq!(c.channel.coverage, 300.0);
    }

    #[test]
    fn estimated_rates_are_non_negative() {
        for name in names() {
            let s = &preset(name).unwrap().channel;
            for r in [
                s.synthesis.p_sub,
                s.synthesis.p_ins,
                s.synthesis.p_del,
                s.profile.p_sub,
                s.profile.p_ins,
                s.profile.p_del,
            ] {
                assert!((0.0..0.02).contains(&r), "{name}: {r}");
            }
        }
    }
}
