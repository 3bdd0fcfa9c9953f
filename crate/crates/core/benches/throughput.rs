use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::Rng;

use dna_channel::channel::{run_channel, ChannelSpec};
use dna_channel::index::{build_ref_index, match_reads, DEFAULT_K};
use dna_channel::merge::{merge_pairs, MergeParams};
use dna_channel::process::{EfficiencyModel, Stage, DEFAULT_THINNING_THRESHOLD};
use dna_channel::rng::{derive_stream, SeedTree};
use dna_channel::sequencing::ErrorProfile;
use dna_channel::submatrix::ConditionalSubMatrix;
use dna_channel::synthesis::{CopyNumber, SynthesisParams};
use dna_channel::{par, Nucleotide, ReferenceSet, Sequence};

const M: usize = 2_000;
const L: usize = 117;

fn refs() -> ReferenceSet {
    let mut rng = derive_stream(1, 0);
    ReferenceSet::new(
        (0..M)
            .map(|_| Sequence::new((0..L).map(|_| Nucleotide::from_index(rng.random_range(0..4))).collect()))
            .collect(),
    )
    .unwrap()
}

fn spec() -> ChannelSpec {
    let mut synthesis = SynthesisParams::noiseless(CopyNumber::Gamma { shape: 8.0, scale: 16.0 });
    synthesis.p_sub = 0.001;
    synthesis.p_del = 0.002;
    synthesis.max_tracked_copies = Some(32);
    ChannelSpec {
        synthesis,
        stages: vec![Stage::Pcr { cycles: 22, efficiency: EfficiencyModel::strand_specific(1.85, 0.07) }],
        coverage: 20.0,
        read_len: L,
        profile: ErrorProfile::new(0.003, 0.001, 0.003, ConditionalSubMatrix::uniform()).unwrap(),
        thinning_threshold: DEFAULT_THINNING_THRESHOLD,
    }
}

fn modes() -> [(&'static str, bool); 2] {
    [("parallel", true), ("sequential", false)]
}

fn run<R>(parallel: bool, f: impl FnOnce() -> R) -> R {
    if parallel {
        f()
    } else {
        par::sequential(f)
    }
}

fn bench_channel(c: &mut Criterion) {
    let refs = refs();
    let spec = spec();
    let mut group = c.benchmark_group("channel");
    group.sample_size(10);
    for (name, parallel) in modes() {
        group.bench_function(BenchmarkId::new("simulate_and_read", name), |b| {
            b.iter(|| run(parallel, || run_channel(&refs, &spec, SeedTree::new(7)).unwrap()))
        });
    }
    group.finish();
}

fn bench_analysis(c: &mut Criterion) {
    let refs = refs();
    let reads = run_channel(&refs, &spec(), SeedTree::new(7)).unwrap();
    let pairs = &reads.pairs[..10_000];
    let forward: Vec<Sequence> = pairs.iter().map(|p| p.forward.clone()).collect();
    let index = build_ref_index(&refs, DEFAULT_K).unwrap();
    let params = MergeParams::new(L);
    let mut group = c.benchmark_group("analysis");
    group.sample_size(10);
    for (name, parallel) in modes() {
        group.bench_function(BenchmarkId::new("match_reads", name), |b| {
            b.iter(|| run(parallel, || match_reads(&forward, &index, 17)))
        });
        group.bench_function(BenchmarkId::new("merge_pairs", name), |b| {
            b.iter(|| run(parallel, || merge_pairs(pairs, 0, &params, SeedTree::new(3))))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_channel, bench_analysis);
criterion_main!(benches);
