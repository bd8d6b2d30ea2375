//! `tagvalue` command-line driver.
//!
//! Exit status: 0 success, 1 usage or configuration error, 2 data error,
//! 3 internal error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use tagvalue::error::ErrorClass;
use tagvalue::eval::RandomSampling;
use tagvalue::pipeline::{self, PipelineConfig, PipelineReport};
use tagvalue::relevance::{success_at_10, Distribution};
use tagvalue::synth::{PlantedConfig, PlantedTrace};
use tagvalue::{Exec, Method, RelevanceModel, SplitFractions, SplitTrace};

#[derive(Parser)]
#[command(name = "tagvalue", version, about = "Value of social tags for exploratory search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a trace and write a normalized corpus snapshot with its manifest.
    Ingest {
        #[command(flatten)]
        opts: Opts,
    },
    /// Sample active users and split their histories chronologically.
    Split {
        #[command(flatten)]
        opts: Opts,
    },
    /// Train one topic model on a split.
    Train {
        /// Directory written by `split`.
        #[arg(long)]
        split: PathBuf,
        #[command(flatten)]
        opts: Opts,
    },
    /// Train every grid configuration and keep the best prior and conditional models.
    Tune {
        /// Directory written by `split`.
        #[arg(long)]
        split: PathBuf,
        #[command(flatten)]
        opts: Opts,
    },
    /// Compare hidden and random tag values with saved models.
    Eval {
        /// Directory written by `split`.
        #[arg(long)]
        split: PathBuf,
        /// Directory holding model_prior.bin and model_conditional.bin.
        #[arg(long)]
        models: PathBuf,
        #[command(flatten)]
        opts: Opts,
    },
    /// Summarize a report directory and check it against its CDF tables.
    Report {
        /// Directory holding report.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every stage: ingest, split, tune, eval, report.
    Run {
        #[command(flatten)]
        opts: Opts,
    },
    /// Write a synthetic trace with planted topics.
    Synth {
        #[arg(long, value_enum, default_value = "four-topic")]
        preset: Preset,
        /// Output file; gzip-compressed when it ends in `.gz`.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    FourTopic,
    TwoGroup,
}

/// Options shared by the pipeline commands. Flags override the config file.
#[derive(Args)]
struct Opts {
    /// TOML pipeline configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Trace file (TSV: user, item, tag, timestamp; may be gzipped).
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    min_items: Option<usize>,
    /// train,param,test
    #[arg(long, value_parser = parse_fractions)]
    fractions: Option<SplitFractions>,
    /// Topic counts to try, comma separated.
    #[arg(long, value_delimiter = ',')]
    topics: Option<Vec<usize>>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    /// Size of each user's relevant set.
    #[arg(long)]
    top_n: Option<usize>,
    #[arg(long)]
    random_size: Option<usize>,
    /// Methods to report, comma separated (info, naive).
    #[arg(long, value_delimiter = ',')]
    method: Option<Vec<Method>>,
    #[arg(long, value_enum)]
    sampling: Option<SamplingArg>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Disable data parallelism.
    #[arg(long)]
    sequential: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SamplingArg {
    Uniform,
    Popularity,
}

fn parse_fractions(s: &str) -> Result<SplitFractions, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [train, param, test] => SplitFractions::new(train, param, test).map_err(|e| e.to_string()),
        _ => Err("expected three comma-separated fractions".into()),
    }
}

impl Opts {
    fn resolve(&self) -> anyhow::Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| tagvalue::Error::Io {
                    path: path.clone(),
                    source: e,
                })?;
                let mut cfg: PipelineConfig =
                    toml::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
                cfg.anchor_paths(path.parent().unwrap_or(Path::new(".")));
                cfg
            }
            None => PipelineConfig::default(),
        };
        if let Some(t) = &self.trace {
            cfg.trace = Some(t.clone());
        }
        if let Some(v) = self.min_items {
            cfg.min_items = v;
        }
        if let Some(v) = self.fractions {
            cfg.fractions = v;
        }
        if let Some(v) = &self.topics {
            cfg.grid.topics = v.clone();
        }
        if let Some(v) = self.iterations {
            cfg.grid.iterations = v;
        }
        if let Some(v) = self.burn_in {
            cfg.grid.burn_in = Some(v);
        }
        if let Some(v) = self.top_n {
            cfg.top_n = v;
        }
        if let Some(v) = self.random_size {
            cfg.random_size = v;
        }
        if let Some(v) = &self.method {
            cfg.methods = v.clone();
        }
        if let Some(v) = self.sampling {
            cfg.sampling = match v {
                SamplingArg::Uniform => RandomSampling::Uniform,
                SamplingArg::Popularity => RandomSampling::Popularity,
            };
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        let cfg = cfg.resolved();
        cfg.validate()?;
        Ok(cfg)
    }

    fn exec(&self) -> Exec {
        if self.sequential {
            Exec::Sequential
        } else {
            Exec::default()
        }
    }

    /// Resolves the config and echoes it as `config.toml` in the output directory.
    fn prepare(&self) -> anyhow::Result<PipelineConfig> {
        let cfg = self.resolve()?;
        std::fs::create_dir_all(&self.out).map_err(|e| tagvalue::Error::Io {
            path: self.out.clone(),
            source: e,
        })?;
        let text = toml::to_string(&cfg).map_err(|e| config_error(format!("cannot echo config: {e}")))?;
        let path = self.out.join("config.toml");
        std::fs::write(&path, text).map_err(|e| tagvalue::Error::Io { path, source: e })?;
        Ok(cfg)
    }
}

fn config_error(msg: String) -> tagvalue::Error {
    tagvalue::Error::Config(msg)
}

fn read_split(dir: &Path) -> anyhow::Result<SplitTrace> {
    Ok(SplitTrace::read_dir(dir).map_err(|e| e.in_stage("split"))?)
}

fn print_report(report: &PipelineReport) {
    let s = &report.split;
    println!(
        "split: {} users, {} items, {} tags; annotations train {} param {} test {}",
        s.users, s.items, s.tags, s.train_annotations, s.param_annotations, s.test_annotations
    );
    if let Some(t) = &report.tuning {
        println!(
            "tuning: {} configs; prior K={} (Success@10 {:.3}), conditional K={} (Success@10 {:.3})",
            t.configs_tried,
            t.prior.num_topics,
            t.prior_success_at_10,
            t.conditional.num_topics,
            t.conditional_success_at_10
        );
    }
    println!("method  users      D          p   D(x<y)       MRR");
    for e in &report.experiments {
        println!(
            "{:<6} {:>6} {:>7.4} {:>10.3e} {:>8.4} {:>9.4}",
            e.method.name(),
            e.users_evaluated,
            e.ks.d,
            e.ks.p,
            e.ks.d_x_below,
            e.mrr
        );
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Ingest { opts } => {
            let cfg = opts.prepare()?;
            let corpus = pipeline::load_corpus(&cfg).map_err(|e| e.in_stage("ingest"))?;
            pipeline::write_corpus_snapshot(&corpus, &opts.out)?;
            let m = corpus.manifest();
            println!(
                "{} annotations, {} users, {} items, {} tags ({} records skipped)",
                m.annotations, m.users, m.items, m.tags, m.skipped_records
            );
        }
        Command::Split { opts } => {
            let cfg = opts.prepare()?;
            let corpus = pipeline::load_corpus(&cfg).map_err(|e| e.in_stage("ingest"))?;
            let split = pipeline::split_corpus(&cfg, &corpus).map_err(|e| e.in_stage("split"))?;
            split.write_dir(&opts.out)?;
            let m = split.manifest();
            println!(
                "{} users; annotations train {} param {} test {}; dropped param {} test {}",
                m.users, m.train_annotations, m.param_annotations, m.test_annotations, m.dropped.param, m.dropped.test
            );
        }
        Command::Train { split, opts } => {
            let cfg = opts.prepare()?;
            let split = read_split(&split)?;
            let grid = cfg
                .grid
                .configs(split.vocab().items.len(), split.vocab().tags.len(), cfg.seed)?;
            let [model_cfg] = &grid[..] else {
                bail!(config_error(format!("train takes one topic count, got {}", grid.len())));
            };
            let model = RelevanceModel::train(&split, model_cfg).map_err(|e| e.in_stage("train"))?;
            model.save(opts.out.join("model.bin"))?;
            println!(
                "K={}: Success@10 prior {:.4}, conditional {:.4}; snapshot {}",
                model.num_topics(),
                success_at_10(&model, &split, Distribution::Prior, opts.exec()),
                success_at_10(&model, &split, Distribution::Conditional, opts.exec()),
                model.snapshot_id()
            );
        }
        Command::Tune { split, opts } => {
            let cfg = opts.prepare()?;
            let split = read_split(&split)?;
            let outcome = pipeline::tune_models(&cfg, &split, opts.exec()).map_err(|e| e.in_stage("tune"))?;
            pipeline::write_tuning(&outcome, &opts.out)?;
            for (i, row) in outcome.table.iter().enumerate() {
                let mark = |j| if i == j { "*" } else { " " };
                println!(
                    "K={:<4} prior {:.4}{} conditional {:.4}{}",
                    row.config.num_topics,
                    row.success_prior,
                    mark(outcome.prior_index),
                    row.success_conditional,
                    mark(outcome.conditional_index)
                );
            }
        }
        Command::Eval { split, models, opts } => {
            let cfg = opts.prepare()?;
            let split = read_split(&split)?;
            let prior = RelevanceModel::load(models.join(pipeline::PRIOR_MODEL_FILE))?;
            let conditional = RelevanceModel::load(models.join(pipeline::CONDITIONAL_MODEL_FILE))?;
            let report = pipeline::evaluate_saved(&cfg, &split, &prior, &conditional, &opts.out, opts.exec())?;
            print_report(&report);
        }
        Command::Report { out } => {
            let report = pipeline::read_report(&out)?;
            print_report(&report);
            for e in &report.experiments {
                let d = pipeline::ks_from_cdf_file(&out, e.method)?;
                if d != e.ks.d {
                    bail!(tagvalue::Error::Snapshot(format!(
                        "{}: D from CDF table is {d}, report says {}",
                        pipeline::cdf_file(e.method),
                        e.ks.d
                    )));
                }
            }
        }
        Command::Run { opts } => {
            let cfg = opts.prepare()?;
            let start = Instant::now();
            let report = pipeline::run(&cfg, &opts.out, opts.exec())?;
            print_report(&report);
            eprintln!("finished in {:.1}s", start.elapsed().as_secs_f64());
        }
        Command::Synth { preset, out } => {
            let config = match preset {
                Preset::FourTopic => PlantedConfig::four_topic(),
                Preset::TwoGroup => PlantedConfig::two_group_small(),
            };
            let trace = PlantedTrace::generate(&config);
            trace.save(&out).context("writing synthetic trace")?;
            println!("{} records written to {}", trace.records().len(), out.display());
        }
    }
    Ok(())
}

fn exit_status(err: &anyhow::Error) -> u8 {
    let class = err
        .chain()
        .find_map(|e| e.downcast_ref::<tagvalue::Error>())
        .map(|e| e.class());
    match class {
        Some(ErrorClass::Config) => 1,
        Some(ErrorClass::Data) => 2,
        Some(ErrorClass::Internal) | None => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_status(&e))
        }
    }
}
