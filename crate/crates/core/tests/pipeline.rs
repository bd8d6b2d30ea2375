use std::path::Path;

use tagvalue::corpus::SplitFractions;
use tagvalue::eval::{build_tag_sets, evaluate, run_experiments, value_tags, ExperimentSettings, RandomSampling};
use tagvalue::pipeline::{self, PipelineConfig, TuningGrid};
use tagvalue::relevance::{tune, TopicModelConfig};
use tagvalue::synth::{PlantedConfig, PlantedTrace};
use tagvalue::{Error, Exec, Method, RelevanceModel, SplitTrace};

fn two_group() -> (PlantedTrace, SplitTrace) {
    let planted = PlantedTrace::generate(&PlantedConfig {
        primary_weight: 0.8,
        ..PlantedConfig::two_group_small()
    });
    let corpus = planted.corpus();
    let sample = corpus.select_sample(10).unwrap();
    let split = SplitTrace::split_chronological(&corpus, &sample, SplitFractions::default()).unwrap();
    (planted, split)
}

fn model(split: &SplitTrace, k: usize, seed: u64) -> RelevanceModel {
    let cfg = TopicModelConfig {
        iterations: 80,
        burn_in: 30,
        seed,
        ..TopicModelConfig::with_default_priors(k, split.vocab().items.len(), split.vocab().tags.len())
    };
    RelevanceModel::train(split, &cfg).unwrap()
}

fn settings(seed: u64) -> ExperimentSettings {
    ExperimentSettings {
        random_size: 10,
        top_n: 100,
        seed,
        ..ExperimentSettings::default()
    }
}

#[test]
fn values_do_not_depend_on_the_test_segment() {
    let (_, split) = two_group();
    let m = model(&split, 2, 1);
    let blind = split.without_test();
    assert!(blind.test().is_empty());
    for s in split.sample() {
        let sets = build_tag_sets(&split, s, 10, 3, RandomSampling::Uniform);
        let tags: Vec<_> = sets.hidden.iter().chain(&sets.random).copied().collect();
        let with = value_tags(&m, &m, &split, s, &tags, &settings(3)).unwrap();
        let without = value_tags(&m, &m, &blind, s, &tags, &settings(3)).unwrap();
        let with: Vec<_> = with.into_iter().map(|r| r.ok()).collect();
        let without: Vec<_> = without.into_iter().map(|r| r.ok()).collect();
        assert_eq!(with, without);
    }
}

#[test]
fn random_tags_exclude_everything_the_user_applied() {
    let (_, split) = two_group();
    for s in split.sample() {
        let sets = build_tag_sets(&split, s, 10, 9, RandomSampling::Popularity);
        for t in &sets.random {
            for seg in [split.train(), split.param(), split.test()] {
                assert!(!seg.user_tags(s).contains(t));
            }
        }
        assert_eq!(sets.random.len() + sets.shortfall, 10);
    }
}

#[test]
fn info_separates_hidden_tags_better_than_naive() {
    let corpus = PlantedTrace::generate(&PlantedConfig::four_topic()).corpus();
    let split = SplitTrace::split_chronological(&corpus, &corpus.select_sample(50).unwrap(), SplitFractions::default())
        .unwrap();
    let m = model(&split, 4, 4);
    let (_, reports) = run_experiments(&split, &m, &m, &[Method::Info, Method::Naive], &settings(4)).unwrap();
    let (info, naive) = (&reports[0], &reports[1]);
    assert!(info.ks.d > naive.ks.d, "info {:?} naive {:?}", info.ks, naive.ks);
    // hidden tags are worth more, not less
    assert_eq!(info.ks.d_x_below, info.ks.d);
    assert!(info.mrr > naive.mrr);
    assert_eq!(info.hidden_values.len(), naive.hidden_values.len());
}

#[test]
fn sequential_and_parallel_evaluation_agree() {
    let (_, split) = two_group();
    let m = model(&split, 2, 5);
    let seq = ExperimentSettings {
        exec: Exec::Sequential,
        ..settings(5)
    };
    let par = ExperimentSettings {
        exec: Exec::Parallel,
        ..settings(5)
    };
    assert_eq!(
        evaluate(&split, &m, &m, &seq).unwrap().outcomes,
        evaluate(&split, &m, &m, &par).unwrap().outcomes
    );
    let grid = [model(&split, 1, 5).config().clone(), m.config().clone()];
    let a = tune(&split, &grid, Exec::Sequential).unwrap();
    let b = tune(&split, &grid, Exec::Parallel).unwrap();
    assert_eq!((a.prior, a.conditional), (b.prior, b.conditional));
}

#[test]
fn models_must_match_the_split() {
    let (_, split) = two_group();
    let other = PlantedTrace::generate(&PlantedConfig {
        seed: 99,
        ..PlantedConfig::two_group_small()
    })
    .corpus();
    let other_split =
        SplitTrace::split_chronological(&other, &other.select_sample(10).unwrap(), SplitFractions::default()).unwrap();
    let m = model(&other_split, 2, 1);
    assert!(matches!(evaluate(&split, &m, &m, &settings(1)), Err(Error::Config(_))));
}

#[test]
fn saved_artifacts_reproduce_the_evaluation() {
    let (_, split) = two_group();
    let m = model(&split, 2, 6);
    let dir = tempfile::tempdir().unwrap();
    split.write_dir(dir.path().join("split")).unwrap();
    m.save(dir.path().join("m.bin")).unwrap();
    let split_back = SplitTrace::read_dir(dir.path().join("split")).unwrap();
    let m_back = RelevanceModel::load(dir.path().join("m.bin")).unwrap();
    assert_eq!(split_back, split);
    assert_eq!(m_back.to_bytes(), m.to_bytes());
    assert_eq!(
        evaluate(&split, &m, &m, &settings(6)).unwrap(),
        evaluate(&split_back, &m_back, &m_back, &settings(6)).unwrap()
    );
}

fn planted_config(dir: &Path) -> PipelineConfig {
    let trace = dir.join("trace.tsv");
    PlantedTrace::generate(&PlantedConfig::two_group_small())
        .save(&trace)
        .unwrap();
    PipelineConfig {
        trace: Some(trace),
        min_items: 10,
        grid: TuningGrid {
            topics: vec![1, 2],
            iterations: 60,
            ..TuningGrid::default()
        },
        top_n: 100,
        random_size: 10,
        seed: 8,
        ..PipelineConfig::default()
    }
}

#[test]
fn run_writes_a_consistent_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = planted_config(dir.path());
    let out = dir.path().join("out");
    let report = pipeline::run(&cfg, &out, Exec::default()).unwrap();
    assert_eq!(pipeline::read_report(&out).unwrap(), {
        // CDF points and pooled values are side files, not part of the JSON
        let mut r = report.clone();
        for e in &mut r.experiments {
            e.hidden_values.clear();
            e.random_values.clear();
            e.cdf.clear();
        }
        r
    });
    for m in [Method::Info, Method::Naive] {
        let e = report.experiment(m).unwrap();
        assert_eq!(pipeline::ks_from_cdf_file(&out, m).unwrap(), e.ks.d);
        assert_eq!(e.seed, 8);
    }
    assert_eq!(report.config.grid.burn_in, Some(24));
    assert_eq!(report.tuning.as_ref().unwrap().prior.num_topics, 2);
    for f in [
        "tuning.csv",
        "model_prior.bin",
        "values_hidden.csv",
        "split/manifest.json",
    ] {
        assert!(out.join(f).is_file(), "{f}");
    }

    // evaluating the saved artifacts reproduces the experiments
    let split = SplitTrace::read_dir(out.join("split")).unwrap();
    let prior = RelevanceModel::load(out.join(pipeline::PRIOR_MODEL_FILE)).unwrap();
    let cond = RelevanceModel::load(out.join(pipeline::CONDITIONAL_MODEL_FILE)).unwrap();
    let again = pipeline::evaluate_saved(
        &report.config,
        &split,
        &prior,
        &cond,
        &dir.path().join("eval"),
        Exec::Sequential,
    )
    .unwrap();
    assert_eq!(again.experiments, report.experiments);
}

#[test]
fn stage_errors_name_the_stage_and_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig {
        trace: Some(dir.path().join("missing.tsv")),
        ..PipelineConfig::default()
    };
    let err = pipeline::run(&cfg, &dir.path().join("out"), Exec::Sequential).unwrap_err();
    let msg = err.to_string();
    assert!(msg.starts_with("ingest:") && msg.contains("missing.tsv"), "{msg}");

    let mut cfg = planted_config(dir.path());
    cfg.min_items = 10_000;
    let err = pipeline::run(&cfg, &dir.path().join("out2"), Exec::Sequential).unwrap_err();
    assert!(err.to_string().starts_with("split:"), "{err}");
}
