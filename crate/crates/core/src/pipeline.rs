//! Experiment configuration and the end-to-end driver.
//!
//! Every stage can also be called on its own; [`run`] chains them and writes
//! all intermediate artifacts into one output directory:
//!
//! ```text
//! corpus_manifest.json
//! split/{train,param,test}.tsv, split/manifest.json
//! tuning.csv
//! model_prior.bin, model_conditional.bin
//! values_hidden.csv, values_random.csv
//! cdf_<method>.csv
//! report.json
//! ```

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, CorpusManifest, DropCounts, SplitFractions, SplitTrace, TraceFormat};
use crate::error::{Error, Result};
use crate::eval::{
    read_cdf_csv, run_experiments, write_cdf_csv, Evaluation, ExperimentReport, ExperimentSettings, Method,
    RandomSampling,
};
use crate::exec::Exec;
use crate::relevance::{tune, write_tuning_csv, RelevanceModel, TagPosterior, TopicModelConfig, TuningOutcome};
use crate::value::{write_records_csv, ValueOptions};

pub const REPORT_FILE: &str = "report.json";
pub const PRIOR_MODEL_FILE: &str = "model_prior.bin";
pub const CONDITIONAL_MODEL_FILE: &str = "model_conditional.bin";
pub const TUNING_FILE: &str = "tuning.csv";
pub const SPLIT_DIR: &str = "split";

/// Topic-model configurations tried during tuning: one per topic count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuningGrid {
    pub topics: Vec<usize>,
    pub iterations: usize,
    /// Defaults to 2/5 of `iterations`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
    /// Defaults to 0.1/|I|.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Defaults to 0.1/|T|.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    pub gamma: f64,
    pub tag_posterior: TagPosterior,
}

impl Default for TuningGrid {
    fn default() -> Self {
        TuningGrid {
            topics: vec![50, 100, 200],
            iterations: 500,
            burn_in: None,
            alpha: None,
            beta: None,
            gamma: 0.001,
            tag_posterior: TagPosterior::UserWeighted,
        }
    }
}

impl TuningGrid {
    pub fn burn_in(&self) -> usize {
        self.burn_in.unwrap_or(self.iterations * 2 / 5)
    }

    /// Expands the grid for a split with `n_items` items and `n_tags` tags.
    pub fn configs(&self, n_items: usize, n_tags: usize, seed: u64) -> Result<Vec<TopicModelConfig>> {
        if self.topics.is_empty() {
            return Err(Error::config("tuning grid has no topic counts"));
        }
        self.topics
            .iter()
            .map(|&k| {
                let base = TopicModelConfig::with_default_priors(k, n_items, n_tags);
                let cfg = TopicModelConfig {
                    alpha: self.alpha.unwrap_or(base.alpha),
                    beta: self.beta.unwrap_or(base.beta),
                    gamma: self.gamma,
                    iterations: self.iterations,
                    burn_in: self.burn_in(),
                    seed,
                    tag_posterior: self.tag_posterior,
                    ..base
                };
                cfg.validate()?;
                Ok(cfg)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
    pub format: TraceFormat,
    /// Users need at least this many annotated items to be sampled.
    pub min_items: usize,
    pub fractions: SplitFractions,
    pub grid: TuningGrid,
    /// Size of Γ_s.
    pub top_n: usize,
    pub random_size: usize,
    pub methods: Vec<Method>,
    pub sampling: RandomSampling,
    pub value: ValueOptions,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            trace: None,
            format: TraceFormat::default(),
            min_items: 50,
            fractions: SplitFractions::default(),
            grid: TuningGrid::default(),
            top_n: 1000,
            random_size: 50,
            methods: vec![Method::Info, Method::Naive],
            sampling: RandomSampling::Uniform,
            value: ValueOptions::default(),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    /// Fills in derived defaults so the echoed config is complete.
    pub fn resolved(&self) -> PipelineConfig {
        let mut cfg = self.clone();
        cfg.grid.burn_in = Some(self.grid.burn_in());
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        self.fractions.validate()?;
        if self.min_items == 0 {
            return Err(Error::config("min_items must be positive"));
        }
        if self.top_n == 0 {
            return Err(Error::config("top_n must be positive"));
        }
        if self.random_size == 0 {
            return Err(Error::config("random_size must be positive"));
        }
        if self.methods.is_empty() {
            return Err(Error::config("no methods selected"));
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return Err(Error::config(format!("method `{}` listed twice", m.name())));
            }
        }
        // priors depend on the split vocabulary; any positive size checks the rest
        self.grid.configs(1, 1, self.seed)?;
        Ok(())
    }

    /// Makes a relative trace path relative to `base` (usually the directory
    /// of the config file it was read from).
    pub fn anchor_paths(&mut self, base: &Path) {
        if let Some(t) = self.trace.as_mut().filter(|t| t.is_relative()) {
            *t = base.join(&*t);
        }
    }

    pub fn trace_path(&self) -> Result<&Path> {
        self.trace.as_deref().ok_or_else(|| Error::config("no trace given"))
    }

    pub fn settings(&self, exec: Exec) -> ExperimentSettings {
        ExperimentSettings {
            random_size: self.random_size,
            top_n: self.top_n,
            seed: self.seed,
            sampling: self.sampling,
            value: self.value,
            exec,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub users: usize,
    pub items: usize,
    pub tags: usize,
    pub train_annotations: usize,
    pub param_annotations: usize,
    pub test_annotations: usize,
    pub dropped: DropCounts,
}

impl SplitSummary {
    pub fn of(split: &SplitTrace) -> SplitSummary {
        let m = split.manifest();
        SplitSummary {
            users: m.users,
            items: m.items,
            tags: m.tags,
            train_annotations: m.train_annotations,
            param_annotations: m.param_annotations,
            test_annotations: m.test_annotations,
            dropped: m.dropped,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningSummary {
    pub configs_tried: usize,
    pub prior: TopicModelConfig,
    pub prior_success_at_10: f64,
    pub conditional: TopicModelConfig,
    pub conditional_success_at_10: f64,
}

impl TuningSummary {
    pub fn of(outcome: &TuningOutcome) -> TuningSummary {
        TuningSummary {
            configs_tried: outcome.table.len(),
            prior: outcome.prior.config().clone(),
            prior_success_at_10: outcome.table[outcome.prior_index].success_prior,
            conditional: outcome.conditional.config().clone(),
            conditional_success_at_10: outcome.table[outcome.conditional_index].success_conditional,
        }
    }
}

/// Contents of `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub config: PipelineConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus: Option<CorpusManifest>,
    pub split: SplitSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tuning: Option<TuningSummary>,
    pub experiments: Vec<ExperimentReport>,
}

impl PipelineReport {
    pub fn experiment(&self, method: Method) -> Option<&ExperimentReport> {
        self.experiments.iter().find(|e| e.method == method)
    }
}

pub fn load_corpus(cfg: &PipelineConfig) -> Result<Corpus> {
    Corpus::from_path(cfg.trace_path()?, &cfg.format)
}

pub fn split_corpus(cfg: &PipelineConfig, corpus: &Corpus) -> Result<SplitTrace> {
    let sample = corpus.select_sample(cfg.min_items)?;
    if sample.is_empty() {
        return Err(Error::EmptySet(format!(
            "no user has at least {} annotated items",
            cfg.min_items
        )));
    }
    SplitTrace::split_chronological(corpus, &sample, cfg.fractions)
}

pub fn tune_models(cfg: &PipelineConfig, split: &SplitTrace, exec: Exec) -> Result<TuningOutcome> {
    let grid = cfg
        .grid
        .configs(split.vocab().items.len(), split.vocab().tags.len(), cfg.seed)?;
    tune(split, &grid, exec)
}

/// Writes the normalized corpus as `corpus.tsv` plus `manifest.json`.
pub fn write_corpus_snapshot(corpus: &Corpus, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    let path = dir.join("corpus.tsv");
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = BufWriter::new(file);
    corpus.write_tsv(&mut w)?;
    w.flush().map_err(|e| Error::io(&path, e))?;
    write_json(&dir.join("manifest.json"), &corpus.manifest())
}

pub fn write_tuning(outcome: &TuningOutcome, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    let mut buf = Vec::new();
    write_tuning_csv(&mut buf, &outcome.table)?;
    write_bytes(&dir.join(TUNING_FILE), &buf)?;
    outcome.prior.save(dir.join(PRIOR_MODEL_FILE))?;
    outcome.conditional.save(dir.join(CONDITIONAL_MODEL_FILE))
}

/// Writes per-tag values, CDF tables and `report.json`.
pub fn write_experiment(eval: &Evaluation, report: &PipelineReport, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    let hidden: Vec<_> = eval.outcomes.iter().flat_map(|o| o.hidden.iter().cloned()).collect();
    let random: Vec<_> = eval.outcomes.iter().flat_map(|o| o.random.iter().cloned()).collect();
    for (name, records) in [("values_hidden.csv", &hidden), ("values_random.csv", &random)] {
        let mut buf = Vec::new();
        write_records_csv(&mut buf, records)?;
        write_bytes(&dir.join(name), &buf)?;
    }
    for exp in &report.experiments {
        let mut buf = Vec::new();
        write_cdf_csv(&mut buf, &exp.cdf)?;
        write_bytes(&dir.join(cdf_file(exp.method)), &buf)?;
    }
    write_json(&dir.join(REPORT_FILE), report)
}

pub fn cdf_file(method: Method) -> String {
    format!("cdf_{}.csv", method.name())
}

pub fn read_report(dir: &Path) -> Result<PipelineReport> {
    let path = dir.join(REPORT_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Snapshot(format!("{}: {e}", path.display())))
}

/// Re-reads a method's CDF table and recomputes D from it.
pub fn ks_from_cdf_file(dir: &Path, method: Method) -> Result<f64> {
    let path = dir.join(cdf_file(method));
    let file = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
    let points = read_cdf_csv(std::io::BufReader::new(file))?;
    Ok(crate::eval::ks_from_cdf(&points, "hidden", "random"))
}

/// Runs every stage and writes all artifacts under `out`.
pub fn run(cfg: &PipelineConfig, out: &Path, exec: Exec) -> Result<PipelineReport> {
    let cfg = cfg.resolved();
    cfg.validate()?;
    create_dir(out)?;
    let corpus = load_corpus(&cfg).map_err(|e| e.in_stage("ingest"))?;
    let corpus_manifest = corpus.manifest();
    write_json(&out.join("corpus_manifest.json"), &corpus_manifest).map_err(|e| e.in_stage("ingest"))?;
    let split = split_corpus(&cfg, &corpus)
        .and_then(|s| s.write_dir(out.join(SPLIT_DIR)).map(|_| s))
        .map_err(|e| e.in_stage("split"))?;
    drop(corpus);
    let outcome = tune_models(&cfg, &split, exec)
        .and_then(|o| write_tuning(&o, out).map(|_| o))
        .map_err(|e| e.in_stage("tune"))?;
    let (eval, experiments) = run_experiments(
        &split,
        &outcome.prior,
        &outcome.conditional,
        &cfg.methods,
        &cfg.settings(exec),
    )
    .map_err(|e| e.in_stage("eval"))?;
    let report = PipelineReport {
        corpus: Some(corpus_manifest),
        split: SplitSummary::of(&split),
        tuning: Some(TuningSummary::of(&outcome)),
        experiments,
        config: cfg,
    };
    write_experiment(&eval, &report, out).map_err(|e| e.in_stage("report"))?;
    Ok(report)
}

/// Runs evaluation on persisted split and models.
pub fn evaluate_saved(
    cfg: &PipelineConfig,
    split: &SplitTrace,
    prior: &RelevanceModel,
    conditional: &RelevanceModel,
    out: &Path,
    exec: Exec,
) -> Result<PipelineReport> {
    let (eval, experiments) = run_experiments(split, prior, conditional, &cfg.methods, &cfg.settings(exec))
        .map_err(|e| e.in_stage("eval"))?;
    let report = PipelineReport {
        config: cfg.resolved(),
        corpus: None,
        split: SplitSummary::of(split),
        tuning: None,
        experiments,
    };
    write_experiment(&eval, &report, out).map_err(|e| e.in_stage("report"))?;
    Ok(report)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let json = serde_json::to_string_pretty(value).expect("report types serialize");
    write_bytes(path, (json + "\n").as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_resolution() {
        let cfg = PipelineConfig::default();
        assert_eq!((cfg.min_items, cfg.top_n, cfg.random_size), (50, 1000, 50));
        assert_eq!(cfg.fractions, SplitFractions::default());
        let r = cfg.resolved();
        assert_eq!(r.grid.burn_in, Some(200));
        r.validate().unwrap();
    }

    #[test]
    fn grid_expansion() {
        let grid = TuningGrid {
            topics: vec![2, 4],
            iterations: 50,
            ..TuningGrid::default()
        };
        let cfgs = grid.configs(100, 20, 9).unwrap();
        assert_eq!(cfgs.len(), 2);
        assert_eq!((cfgs[1].num_topics, cfgs[1].burn_in, cfgs[1].seed), (4, 20, 9));
        assert!((cfgs[0].alpha - 0.001).abs() < 1e-15 && (cfgs[0].beta - 0.005).abs() < 1e-15);
        let bad = TuningGrid {
            burn_in: Some(50),
            ..grid
        };
        assert!(bad.configs(100, 20, 9).is_err());
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            PipelineConfig {
                min_items: 0,
                ..Default::default()
            },
            PipelineConfig {
                methods: vec![],
                ..Default::default()
            },
            PipelineConfig {
                methods: vec![Method::Info, Method::Info],
                ..Default::default()
            },
            PipelineConfig {
                fractions: SplitFractions {
                    train: 0.5,
                    param: 0.1,
                    test: 0.1,
                },
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert_eq!(cfg.validate().unwrap_err().class(), crate::error::ErrorClass::Config);
        }
        assert!(PipelineConfig::default().trace_path().is_err());
    }

    #[test]
    fn stage_errors_keep_their_class() {
        let e = Error::EmptySet("x".into()).in_stage("split");
        assert_eq!(e.to_string(), "split: empty set: x");
        assert_eq!(e.class(), crate::error::ErrorClass::Data);
    }
}
