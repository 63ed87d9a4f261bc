//! Argument definitions and subcommand implementations.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use backtrans_core::backend::{hash_hex, prompt_hash, Backend};
use backtrans_core::buffer::Direction;
use backtrans_core::lex::{CodeSnippet, LanguageId};
use backtrans_core::prompt::{render_code_prompt, render_doc_prompt};
use backtrans_core::rollout::{run_rollout, CorpusSampler};
use backtrans_core::similarity::similarity_weighted;
use backtrans_core::toyworld::{ToyTask, ToyTrainer};
use backtrans_core::{gate, DocVerdict};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use toml::Table;

use crate::config::{parse_override, BackendKind, HarnessConfig};
use crate::corpus::load_corpus;
use crate::error::HarnessError;
use crate::export::export_batch;
use crate::http::HttpBackend;
use crate::jsonl;
use crate::mockfile::load_mock;
use crate::records::{dump_buffer, load_buffer, replay_log, GroupRecord};

/// Built-in toy task set used when `train-toy` gets no `--tasks`.
pub const DEFAULT_TOY_TASKS: &str = include_str!("../../../fixtures/toy/tasks.json");

#[derive(Debug, Parser)]
#[command(
    name = "backtrans",
    version,
    about = "Code/documentation back-translation harness"
)]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set backend.retries=5`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Progress messages on standard error.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BackendArg {
    Mock,
    Http,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Similarity between two snippets, to six decimals.
    Sim {
        #[arg(long)]
        lang: LanguageId,
        a: PathBuf,
        b: PathBuf,
    },
    /// Gate a raw generation: prints the verdict and reward, then the rewritten doc.
    Gate {
        #[arg(long)]
        lang: LanguageId,
        file: PathBuf,
    },
    /// Render the stage-1 prompt for a snippet, or with `--stage2` the
    /// stage-2 prefix for a raw generation.
    Prompt {
        #[arg(long)]
        lang: LanguageId,
        file: PathBuf,
        #[arg(long)]
        stage2: bool,
        /// Print the prompt's fixture hash instead of the prompt.
        #[arg(long)]
        hash: bool,
    },
    /// Sample rollout groups from a corpus and write them as JSONL.
    Rollout(RolloutArgs),
    /// Train the toy policy and write per-step metrics as JSONL.
    TrainToy {
        #[arg(long, value_name = "FILE")]
        tasks: Option<PathBuf>,
        #[arg(long, default_value_t = 500)]
        steps: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Replay a rollout log through dynamic sampling into the buffer and dump it.
    BufferDump {
        #[arg(long, value_name = "FILE")]
        log: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Export an advantage-weighted batch for an external trainer.
    ExportBatch {
        /// Rollout log to replay.
        #[arg(
            long,
            value_name = "FILE",
            conflicts_with = "buffer",
            required_unless_present = "buffer"
        )]
        log: Option<PathBuf>,
        /// Buffer dump to reload.
        #[arg(long, value_name = "FILE")]
        buffer: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Records to export; defaults to `batch_size`, capped by the buffer.
        #[arg(long)]
        size: Option<usize>,
    },
}

#[derive(Debug, Args)]
pub struct RolloutArgs {
    #[arg(long, value_name = "PATH")]
    pub corpus: PathBuf,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_enum)]
    pub backend: Option<BackendArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Mock fixture file.
    #[arg(long, value_name = "FILE")]
    pub fixtures: Option<PathBuf>,
    /// Number of groups to sample.
    #[arg(long, default_value_t = 1)]
    pub groups: usize,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

impl Cli {
    /// Flag-level overrides, applied after `--set`.
    fn flag_layers(&self) -> Result<Vec<Table>, HarnessError> {
        let mut layers = self
            .overrides
            .iter()
            .map(|s| parse_override(s))
            .collect::<Result<Vec<_>, _>>()?;
        let mut push = |s: String| parse_override(&s).map(|t| layers.push(t));
        match &self.command {
            Command::Rollout(a) => {
                if let Some(k) = a.k {
                    push(format!("k_samples={k}"))?;
                }
                if let Some(seed) = a.seed {
                    push(format!("seed={seed}"))?;
                }
                if let Some(b) = a.backend {
                    let kind = match b {
                        BackendArg::Mock => "mock",
                        BackendArg::Http => "http",
                    };
                    push(format!("backend.kind=\"{kind}\""))?;
                }
                if let Some(f) = &a.fixtures {
                    let lit = toml::Value::String(f.display().to_string());
                    push(format!("backend.fixtures={lit}"))?;
                }
            }
            Command::TrainToy { seed, lr, .. } => {
                if let Some(seed) = seed {
                    push(format!("seed={seed}"))?;
                }
                if let Some(lr) = lr {
                    push(format!("learning_rate={lr:?}"))?;
                }
            }
            Command::ExportBatch {
                seed: Some(seed), ..
            } => push(format!("seed={seed}"))?,
            _ => {}
        }
        Ok(layers)
    }

    pub fn resolve_config(&self) -> Result<HarnessConfig, HarnessError> {
        HarnessConfig::layered(self.config.as_deref(), &self.flag_layers()?)
    }
}

fn read(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
}

/// Builds the configured backend.
pub fn make_backend(config: &HarnessConfig) -> Result<Box<dyn Backend + Send>, HarnessError> {
    match config.backend.kind {
        BackendKind::Http => Ok(Box::new(HttpBackend::new(&config.backend))),
        BackendKind::Mock => {
            let path =
                config.backend.fixtures.as_deref().ok_or_else(|| {
                    HarnessError::Usage("the mock backend needs --fixtures".into())
                })?;
            Ok(Box::new(load_mock(path)?))
        }
    }
}

/// Samples `groups` snippets under the configured seed and rolls each out,
/// on at most `jobs` threads. Output order follows draw order.
pub fn rollout_records(
    corpus: Vec<CodeSnippet>,
    groups: usize,
    jobs: usize,
    backend: &(dyn Backend + Send),
    config: &HarnessConfig,
) -> Result<Vec<GroupRecord>, HarnessError> {
    let rollout_config = config.rollout_config()?;
    let mut sampler = CorpusSampler::new(corpus, config.seed)?;
    let draws: Vec<usize> = (0..groups).map(|_| sampler.draw_index()).collect();
    let snippets = sampler.snippets();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    pool.install(|| {
        draws
            .par_iter()
            .enumerate()
            .map(|(id, &snippet)| {
                let group = run_rollout(
                    &snippets[snippet],
                    config.k_samples,
                    backend,
                    &rollout_config,
                )?;
                Ok(GroupRecord {
                    group_id: id as u64,
                    snippet,
                    group,
                })
            })
            .collect()
    })
}

pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<(), HarnessError> {
    let config = cli.resolve_config()?;
    let say = |msg: &str| {
        if cli.verbose {
            eprintln!("{msg}");
        }
    };
    let io_err = |e| HarnessError::io("<stdout>", e);
    match &cli.command {
        Command::Sim { lang, a, b } => {
            let a = CodeSnippet::new(read(a)?, *lang);
            let b = CodeSnippet::new(read(b)?, *lang);
            let score = similarity_weighted(&a, &b, config.weights()?)?;
            writeln!(stdout, "{:.6}", score.value()).map_err(io_err)?;
        }
        Command::Gate { lang, file } => {
            let doc = gate(&read(file)?, *lang);
            writeln!(stdout, "{} {:.1}", doc.verdict(), doc.format_reward()).map_err(io_err)?;
            if let Some(text) = doc.rewritten() {
                write!(stdout, "{text}").map_err(io_err)?;
                if !text.ends_with('\n') {
                    writeln!(stdout).map_err(io_err)?;
                }
            }
        }
        Command::Prompt {
            lang,
            file,
            stage2,
            hash,
        } => {
            let text = read(file)?;
            let prompt = if *stage2 {
                let doc = gate(&text, *lang);
                if doc.verdict() == DocVerdict::Invalid {
                    return Err(HarnessError::Format {
                        path: file.clone(),
                        line: 1,
                        message: "generation gates as Invalid; it has no stage-2 prefix".into(),
                    });
                }
                render_code_prompt(&doc).map_err(|e| HarnessError::Config(e.to_string()))?
            } else {
                render_doc_prompt(&CodeSnippet::new(text, *lang))
            };
            if *hash {
                writeln!(stdout, "{}", hash_hex(prompt_hash(&prompt))).map_err(io_err)?;
            } else {
                write!(stdout, "{prompt}").map_err(io_err)?;
            }
        }
        Command::Rollout(args) => {
            if args.groups == 0 {
                return Err(HarnessError::Usage("--groups must be at least 1".into()));
            }
            let corpus = load_corpus(&args.corpus)?;
            say(&format!("loaded {} snippet(s)", corpus.len()));
            let backend = make_backend(&config)?;
            let records =
                rollout_records(corpus, args.groups, args.jobs, backend.as_ref(), &config)?;
            say(&format!("sampled {} group(s)", records.len()));
            match &args.out {
                Some(path) => jsonl::write_file(path, &records)?,
                None => jsonl::write_records(stdout, &records).map_err(io_err)?,
            }
        }
        Command::TrainToy {
            tasks, steps, out, ..
        } => {
            let tasks: Vec<ToyTask> = match tasks {
                Some(p) => serde_json::from_str(&read(p)?).map_err(|e| HarnessError::Format {
                    path: p.clone(),
                    line: e.line(),
                    message: e.to_string(),
                })?,
                None => serde_json::from_str(DEFAULT_TOY_TASKS)
                    .map_err(|e| HarnessError::Config(e.to_string()))?,
            };
            let mut trainer = ToyTrainer::new(tasks, config.seed, config.toy_config()?)?;
            let mut metrics = Vec::with_capacity(*steps);
            for _ in 0..*steps {
                metrics.push(trainer.train_step()?);
            }
            if let Some(last) = metrics.last() {
                say(&format!(
                    "step {}: code2doc {:.3}, doc2code {:.3}",
                    last.step, last.mean_reward_code2doc, last.mean_reward_doc2code
                ));
            }
            match out {
                Some(path) => jsonl::write_file(path, &metrics)?,
                None => jsonl::write_records(stdout, &metrics).map_err(io_err)?,
            }
        }
        Command::BufferDump { log, out } => {
            let replay = replay_log(jsonl::read_file(log)?, &config)?;
            say(&format!(
                "kept {} group(s), filtered {}; {} code2doc and {} doc2code entries resident",
                replay.kept_groups,
                replay.filtered_groups,
                replay.buffer.count(Direction::Code2Doc),
                replay.buffer.count(Direction::Doc2Code)
            ));
            match out {
                Some(path) => dump_buffer(&replay.buffer, path)?,
                None => {
                    let entries: Vec<_> = replay.buffer.entries().collect();
                    jsonl::write_records(stdout, &entries).map_err(io_err)?
                }
            }
        }
        Command::ExportBatch {
            log,
            buffer,
            out,
            size,
            ..
        } => {
            let buffer = match (log, buffer) {
                (Some(log), _) => replay_log(jsonl::read_file(log)?, &config)?.buffer,
                (None, Some(dump)) => load_buffer(dump, &config)?,
                (None, None) => return Err(HarnessError::Usage("pass --log or --buffer".into())),
            };
            let size = size.unwrap_or(config.batch_size).min(buffer.len());
            let selection = buffer.sample_indices(size, config.seed)?;
            let n = export_batch(&buffer, &selection, out, &config)?;
            say(&format!("exported {n} record(s) to {}", out.display()));
        }
    }
    stdout.flush().map_err(io_err)
}
