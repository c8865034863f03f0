//! `qassist`: split, index and question an SRS, build domain corpora,
//! generate QA datasets and run evaluations.
//!
//! Exit status is 0 on success, 2 for invalid arguments, configuration or
//! inputs, and 1 for any other failure.

mod inputs;
mod output;

use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use qassist_core::corpus::{build_corpus, AssembleOptions, ArticleFetcher, FixtureFetcher, WikiFetcher};
use qassist_core::evalharness::{render_csv, render_table, run_experiment, EvalInputs};
use qassist_core::pipeline::{build_domain_corpus_if_absent, Engine};
use qassist_core::qgen::{
    apply_validation, dataset_stats, filter_top_fraction, generate_pairs, read_annotations, read_dataset,
    write_dataset, ReferenceEvaluator, ReferenceGenerator,
};
use qassist_core::retrieval::{save_index, RetrieverKind, RetrieverOptions};
use qassist_core::textseg::{split_passages, Passage, Source};

use inputs::{load_config, load_matrix, load_srs, load_srs_group, usage, UsageError};
use output::Format;

#[derive(Parser)]
#[command(name = "qassist", version, about = "Question answering over natural-language requirements")]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct PipelineArgs {
    /// Pipeline configuration (TOML or JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the passage token budget.
    #[arg(long)]
    budget: Option<usize>,
}

#[derive(Args)]
struct FetchArgs {
    /// Search a directory of `{title, text}` JSON articles instead of the web.
    #[arg(long, conflicts_with = "wiki")]
    articles: Option<PathBuf>,
    /// Search the online encyclopedia (endpoint from QASSIST_WIKI_API).
    #[arg(long)]
    wiki: bool,
    /// Articles kept per keyword.
    #[arg(long, default_value_t = 3)]
    max_articles: usize,
    /// Maximum requests per second to the online source.
    #[arg(long, default_value_t = 1.0)]
    rate_limit: f64,
    /// Keywords extracted from the SRS group.
    #[arg(long, default_value_t = 20)]
    keywords: usize,
    /// Cache fetched articles here.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Domain name of the built corpus.
    #[arg(long, default_value = "domain")]
    domain: String,
}

impl FetchArgs {
    fn fetcher(&self) -> Result<Option<Box<dyn ArticleFetcher>>> {
        if let Some(dir) = &self.articles {
            let f = FixtureFetcher::from_dir(dir, self.max_articles)
                .with_context(|| format!("reading articles from {}", dir.display()))?;
            return Ok(Some(Box::new(f)));
        }
        if self.wiki {
            return Ok(Some(Box::new(WikiFetcher::from_env(self.max_articles, self.rate_limit))));
        }
        Ok(None)
    }

    fn options(&self) -> AssembleOptions {
        AssembleOptions {
            domain: self.domain.clone(),
            cache_dir: self.cache_dir.clone(),
            ..AssembleOptions::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Split an SRS into overlapping passages.
    Split {
        #[arg(long)]
        srs: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Split an SRS and save its passage index.
    Index {
        #[arg(long)]
        srs: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// Overrides the configured passage retriever.
        #[arg(long)]
        retriever: Option<RetrieverKind>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Answer a question from an SRS and a domain corpus.
    Ask {
        #[arg(long)]
        srs: PathBuf,
        /// Corpus manifest (JSON) or directory of `.txt` articles.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        question: String,
        /// Passages per source.
        #[arg(short, long)]
        k: Option<usize>,
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// Without `--corpus`, build one with these fetch settings.
        #[command(flatten)]
        fetch: FetchArgs,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Build a domain corpus from the concepts of an SRS group.
    BuildCorpus {
        /// Directory of SRS `.txt` files, or a single file.
        #[arg(long)]
        srs_group: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        fetch: FetchArgs,
    },
    /// Generate, filter and write automatic QA pairs.
    GenerateQa {
        #[arg(long)]
        srs_group: PathBuf,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Share of each group's pairs that is kept.
        #[arg(long, default_value_t = 0.05)]
        fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Domain label of SRS pairs (defaults to the corpus domain).
        #[arg(long)]
        domain: Option<String>,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Apply manual annotations to a generated dataset.
    Validate {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
        /// Additional hand-written pairs (JSON Lines).
        #[arg(long)]
        manual: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a dataset under one or more pipeline configurations.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        srs_group: PathBuf,
        /// Corpus manifests or directories; repeat per domain.
        #[arg(long)]
        corpus: Vec<PathBuf>,
        /// Experiment matrix (TOML or JSON `[[experiment]]` list).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        /// Persist projects here; in memory when omitted.
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => tracing_subscriber::filter::LevelFilter::WARN,
        1 => tracing_subscriber::filter::LevelFilter::INFO,
        _ => tracing_subscriber::filter::LevelFilter::DEBUG,
    };
    tracing_subscriber::fmt().with_max_level(level).with_writer(std::io::stderr).init();
    if let Err(e) = run(cli.command) {
        eprintln!("error: {e:#}");
        let code = if e.downcast_ref::<UsageError>().is_some() { 2 } else { 1 };
        std::process::exit(code);
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Split { srs, pipeline, format } => {
            let config = load_config(&pipeline)?;
            let doc = load_srs(&srs)?;
            let passages = split_passages(&doc, Source::Srs, &config.split_config());
            print!("{}", output::passages(&passages, format)?);
        }
        Command::Index {
            srs,
            pipeline,
            retriever,
            out,
        } => {
            let mut config = load_config(&pipeline)?;
            if let Some(kind) = retriever {
                config.passage_retriever = RetrieverOptions {
                    kind,
                    ..config.passage_retriever
                };
            }
            let engine = Engine::from_config(config).map_err(usage)?;
            let prepared = engine.prepare_srs(&load_srs(&srs)?).map_err(usage)?;
            save_index(&out, &prepared.index).with_context(|| format!("writing {}", out.display()))?;
            println!(
                "indexed {} passages of `{}` with {} -> {}",
                prepared.passages.len(),
                prepared.doc_id,
                prepared.index.kind().as_str(),
                out.display()
            );
        }
        Command::Ask {
            srs,
            corpus,
            question,
            k,
            pipeline,
            fetch,
            format,
        } => {
            if question.trim().is_empty() {
                return Err(usage("the question is empty"));
            }
            if k == Some(0) {
                return Err(usage("k must be at least 1"));
            }
            let config = load_config(&pipeline)?;
            let engine = Engine::from_config(config).map_err(usage)?;
            let doc = load_srs(&srs)?;
            let supplied = corpus.as_deref().map(inputs::load_corpus).transpose()?;
            let (corpus, mut warnings) = match (supplied, fetch.fetcher()?) {
                (Some(c), _) => (c, Vec::new()),
                (None, Some(fetcher)) => build_domain_corpus_if_absent(
                    None,
                    std::slice::from_ref(&doc),
                    fetcher.as_ref(),
                    fetch.keywords,
                    &fetch.options(),
                ),
                (None, None) => (inputs::empty_corpus(&fetch.domain), Vec::new()),
            };
            let srs_prepared = engine.prepare_srs(&doc).map_err(usage)?;
            let corpus_prepared = engine.prepare_corpus(corpus).map_err(usage)?;
            let mut result = engine.ask_prepared(&question, &srs_prepared, &corpus_prepared, k)?;
            warnings.append(&mut result.warnings);
            result.warnings = warnings;
            print!("{}", output::answer(&result, format)?);
        }
        Command::BuildCorpus { srs_group, out, fetch } => {
            let docs = load_srs_group(&srs_group)?;
            let fetcher = fetch.fetcher()?.ok_or_else(|| usage("choose an article source: --articles DIR or --wiki"))?;
            let report = build_corpus(&docs, fetcher.as_ref(), fetch.keywords, &fetch.options())?;
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            inputs::write_json(&out.join("corpus.json"), &report.corpus)?;
            inputs::write_json(&out.join("provenance.json"), &report.provenance)?;
            for (keyword, error) in &report.failures {
                eprintln!("warning: `{keyword}`: {error}");
            }
            println!(
                "{} documents for {} keywords ({} cached, {} failed) -> {}",
                report.corpus.size(),
                report.provenance.len(),
                report.cache_hits,
                report.failures.len(),
                out.join("corpus.json").display()
            );
        }
        Command::GenerateQa {
            srs_group,
            corpus,
            out,
            fraction,
            seed,
            domain,
            pipeline,
        } => {
            if !(fraction > 0.0 && fraction <= 1.0) {
                return Err(usage(format!("fraction must be in (0, 1], got {fraction}")));
            }
            let config = load_config(&pipeline)?;
            let split = config.split_config();
            let docs = load_srs_group(&srs_group)?;
            let corpus = corpus.as_deref().map(inputs::load_corpus).transpose()?;
            let domain = domain
                .or_else(|| corpus.as_ref().map(|c| c.domain.clone()))
                .unwrap_or_else(|| "default".into());
            let mut passages: Vec<Passage> =
                docs.iter().flat_map(|d| split_passages(d, Source::Srs, &split)).collect();
            if let Some(c) = &corpus {
                for d in &c.documents {
                    let doc = qassist_core::textseg::Document::from_plain_text(&d.id, &d.text);
                    passages.extend(split_passages(&doc, Source::Corpus, &split));
                }
            }
            let generated = generate_pairs(&passages, &domain, &ReferenceGenerator::default(), seed)?;
            let kept = filter_top_fraction(generated.clone(), &ReferenceEvaluator, fraction)?;
            write_dataset(&out, &kept).with_context(|| format!("writing {}", out.display()))?;
            println!(
                "{} passages, {} generated pairs, {} kept -> {}",
                passages.len(),
                generated.len(),
                kept.len(),
                out.display()
            );
        }
        Command::Validate {
            dataset,
            annotations,
            manual,
            out,
        } => {
            let generated = read_dataset(&dataset).with_context(|| format!("reading {}", dataset.display()))?;
            let notes = read_annotations(&annotations).with_context(|| format!("reading {}", annotations.display()))?;
            let manual = match manual {
                Some(p) => read_dataset(&p).with_context(|| format!("reading {}", p.display()))?,
                None => Vec::new(),
            };
            let validated = apply_validation(generated.clone(), &notes, manual).map_err(usage)?;
            write_dataset(&out, &validated).with_context(|| format!("writing {}", out.display()))?;
            println!("{}", serde_json::to_string_pretty(&dataset_stats(&generated, &validated))?);
        }
        Command::Eval {
            dataset,
            srs_group,
            corpus,
            config,
            format,
        } => {
            let rows = read_dataset(&dataset).with_context(|| format!("reading {}", dataset.display()))?;
            let matrix = load_matrix(config.as_deref())?;
            let mut eval_inputs = EvalInputs::default();
            for d in load_srs_group(&srs_group)? {
                eval_inputs.srs.insert(d.id.clone(), d);
            }
            for path in &corpus {
                let c = inputs::load_corpus(path)?;
                eval_inputs.corpora.insert(c.domain.clone(), c);
            }
            let report = run_experiment(&rows, &eval_inputs, &matrix)?;
            for ex in &report.excluded {
                eprintln!("warning: excluded {}: {}", ex.id, ex.reason);
            }
            match format {
                Format::Table => print!("{}", render_table(&report)),
                Format::Csv => print!("{}", render_csv(&report)),
                Format::Json => println!("{}", serde_json::to_string_pretty(&report)?),
            }
        }
        Command::Serve { addr, data_dir } => {
            let registry = match &data_dir {
                Some(dir) => qassist_service::Registry::open(dir)?,
                None => qassist_service::Registry::in_memory(),
            };
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async {
                let listener = tokio::net::TcpListener::bind(&addr)
                    .await
                    .with_context(|| format!("binding {addr}"))?;
                eprintln!("listening on http://{}", listener.local_addr()?);
                qassist_service::serve(listener, Arc::new(registry)).await?;
                Ok::<_, anyhow::Error>(())
            })?;
        }
    }
    Ok(())
}
