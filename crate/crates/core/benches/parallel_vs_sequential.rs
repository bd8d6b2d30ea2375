use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use tagvalue::corpus::SplitFractions;
use tagvalue::eval::{evaluate, ExperimentSettings};
use tagvalue::relevance::{success_at_10, tune, Distribution, TopicModelConfig};
use tagvalue::synth::{PlantedConfig, PlantedTrace};
use tagvalue::{Exec, RelevanceModel, SplitTrace};

fn planted_split() -> SplitTrace {
    let corpus = PlantedTrace::generate(&PlantedConfig::four_topic()).corpus();
    let sample = corpus.select_sample(50).unwrap();
    SplitTrace::split_chronological(&corpus, &sample, SplitFractions::default()).unwrap()
}

fn config(split: &SplitTrace, k: usize, iterations: usize) -> TopicModelConfig {
    TopicModelConfig {
        iterations,
        burn_in: iterations / 2,
        seed: 1,
        ..TopicModelConfig::with_default_priors(k, split.vocab().items.len(), split.vocab().tags.len())
    }
}

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn bench(c: &mut Criterion) {
    let split = planted_split();
    let model = RelevanceModel::train(&split, &config(&split, 4, 60)).unwrap();

    let mut g = c.benchmark_group("evaluate");
    g.sample_size(10);
    for (name, exec) in MODES {
        let settings = ExperimentSettings {
            exec,
            ..ExperimentSettings::default()
        };
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| evaluate(&split, &model, &model, &settings).unwrap())
        });
    }
    g.finish();

    let mut g = c.benchmark_group("success_at_10");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| success_at_10(&model, &split, Distribution::Conditional, exec))
        });
    }
    g.finish();

    let grid: Vec<_> = [2, 4, 8].iter().map(|&k| config(&split, k, 20)).collect();
    let mut g = c.benchmark_group("tune");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| tune(&split, &grid, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
