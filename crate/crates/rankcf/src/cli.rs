//! Command-line front end. Subcommands mirror the service endpoints; `--json`
//! prints exactly the payload the service would return.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::ApiError;
use crate::server::{serve, ServeError};
use crate::service::{
    BuilderRequest, CorpusConfig, DirectionBody, DocumentCapsBody, DocumentExplanationRequest,
    ImportanceBody, InstanceExplanationRequest, InstanceVariantBody, QueryCapsBody,
    QueryExplanationRequest, RankRequest, RankerBinding, Service, ServiceConfig, TopicsRequest,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_ENGINE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "rankcf", version, about = "Counterfactual explanations for document rankings")]
pub struct Cli {
    /// Corpus file (JSON lines), optionally as NAME=PATH. Repeatable for `serve`.
    #[arg(long, global = true)]
    pub corpus: Vec<String>,
    /// Base URL of an external ranker speaking the /score protocol.
    #[arg(long, global = true)]
    pub ranker_endpoint: Option<String>,
    /// Base URL of an embedding provider speaking the /embed protocol.
    #[arg(long, global = true)]
    pub embedding_endpoint: Option<String>,
    /// Print service JSON payloads instead of tables.
    #[arg(long, global = true)]
    pub json: bool,
    /// Seed for sampled instances and topic models.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Timeout for external ranker and embedding calls.
    #[arg(long, global = true, default_value_t = 30)]
    pub timeout_secs: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RankingArgs {
    #[arg(long)]
    pub query: String,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
}

#[derive(Debug, Args)]
pub struct TargetArgs {
    #[command(flatten)]
    pub ranking: RankingArgs,
    #[arg(long)]
    pub doc_id: String,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Variant {
    CosineSampled,
    EmbeddingNearest,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the index and print collection statistics.
    Index,
    /// Rank the corpus for a query.
    Rank(RankingArgs),
    /// Sentence removals that push a document out of the top k.
    ExplainDoc {
        #[command(flatten)]
        target: TargetArgs,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long)]
        max_sentences: Option<usize>,
        #[arg(long)]
        max_removals: Option<usize>,
        #[arg(long)]
        max_evaluations: Option<usize>,
        /// Return only removal sets that contain no earlier explanation.
        #[arg(long)]
        prune_supersets: bool,
        /// Count distinct query terms per sentence instead of occurrences.
        #[arg(long)]
        distinct_terms: bool,
    },
    /// Terms appended to the query that lift a document to a threshold rank.
    ExplainQuery {
        #[command(flatten)]
        target: TargetArgs,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long)]
        threshold: usize,
        #[arg(long)]
        max_terms: Option<usize>,
        #[arg(long)]
        max_append: Option<usize>,
        #[arg(long)]
        max_evaluations: Option<usize>,
    },
    /// Non-relevant documents most similar to a relevant one.
    ExplainInstance {
        #[command(flatten)]
        target: TargetArgs,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, value_enum, default_value_t = Variant::CosineSampled)]
        variant: Variant,
        /// Sample size for the cosine_sampled variant.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Re-rank the top k+1 with an edited document body.
    BuilderRerank {
        #[command(flatten)]
        target: TargetArgs,
        #[arg(long, conflicts_with = "edited_file", required_unless_present = "edited_file")]
        edited_body: Option<String>,
        #[arg(long)]
        edited_file: Option<PathBuf>,
    },
    /// LDA topics over the top k documents.
    Topics {
        #[command(flatten)]
        ranking: RankingArgs,
        #[arg(long = "topics", short = 'T')]
        topics: Option<usize>,
        #[arg(long)]
        terms: Option<usize>,
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8091)]
        port: u16,
        /// TOML service configuration; `--corpus` entries are added to it.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn corpus_entry(arg: &str) -> CorpusConfig {
    let (name, path) = match arg.split_once('=') {
        Some((name, path)) => (name.to_owned(), PathBuf::from(path)),
        None => {
            let path = PathBuf::from(arg);
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| arg.to_owned());
            (name, path)
        }
    };
    CorpusConfig { name, path, ranker: RankerBinding::Builtin, embedding_endpoint: None }
}

impl Cli {
    fn corpus_configs(&self) -> Vec<CorpusConfig> {
        self.corpus
            .iter()
            .map(|arg| {
                let mut entry = corpus_entry(arg);
                if let Some(endpoint) = &self.ranker_endpoint {
                    entry.ranker = RankerBinding::External { endpoint: endpoint.clone() };
                }
                entry.embedding_endpoint = self.embedding_endpoint.clone();
                entry
            })
            .collect()
    }
}

enum Failure {
    Usage(String),
    Engine(ApiError),
    Serve(ServeError),
}

impl From<ApiError> for Failure {
    fn from(e: ApiError) -> Self {
        Failure::Engine(e)
    }
}

/// Parse `args` (including the program name) and run the command.
pub fn execute<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(rendered.as_bytes()) } else { out.write_all(rendered.as_bytes()) };
            return code;
        }
    };
    match run(&cli, out) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}\n\nFor more information, try '--help'.");
            EXIT_USAGE
        }
        Err(Failure::Engine(e)) => {
            if cli.json {
                let _ = writeln!(out, "{}", serde_json::to_string(&e.body()).unwrap_or_default());
            }
            let _ = writeln!(err, "error: {e}");
            EXIT_ENGINE
        }
        Err(Failure::Serve(e)) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_ENGINE
        }
    }
}

fn single_corpus(cli: &Cli) -> Result<(Service, String), Failure> {
    let configs = cli.corpus_configs();
    let [entry] = configs.as_slice() else {
        return Err(Failure::Usage("exactly one --corpus is required".into()));
    };
    let config = ServiceConfig {
        corpora: vec![entry.clone()],
        request_timeout_secs: cli.timeout_secs,
        ..ServiceConfig::default()
    };
    let service = Service::from_config(&config)
        .map_err(|e| Failure::Engine(ApiError::new("corpus_load_failure", 500, e.to_string())))?;
    Ok((service, entry.name.clone()))
}

fn emit<T: Serialize>(out: &mut dyn Write, json: bool, value: &T, table: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<(), Failure> {
    let written = if json {
        serde_json::to_string(value)
            .map_err(|e| Failure::Engine(ApiError::internal(e.to_string())))
            .map(|s| writeln!(out, "{s}"))?
    } else {
        table(out)
    };
    written.map_err(|e| Failure::Engine(ApiError::internal(e.to_string())))
}

fn read_file(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), Failure> {
    if let Command::Serve { host, port, config } = &cli.command {
        let mut cfg = match config {
            Some(path) => toml::from_str::<ServiceConfig>(&read_file(path)?)
                .map_err(|e| Failure::Usage(format!("invalid config {}: {e}", path.display())))?,
            None => ServiceConfig::default(),
        };
        if config.is_none() {
            cfg.host = host.clone();
            cfg.port = *port;
            cfg.request_timeout_secs = cli.timeout_secs;
        }
        cfg.corpora.extend(cli.corpus_configs());
        if cfg.corpora.is_empty() {
            return Err(Failure::Usage("serve needs at least one --corpus or a config".into()));
        }
        return serve(&cfg).map_err(Failure::Serve);
    }

    let (service, name) = single_corpus(cli)?;
    let json = cli.json;
    match &cli.command {
        Command::Index => {
            let h = service.handle(&name)?;
            let stats = h.bm25.index().stats();
            let summary = IndexSummary {
                corpus: name.clone(),
                documents: stats.doc_count,
                vocabulary: stats.vocabulary_size(),
                avg_doc_length: stats.avg_doc_length,
                sentences: h.corpus.iter().map(|d| d.sentences.len()).sum(),
            };
            emit(out, json, &summary, |w| {
                writeln!(w, "corpus          {}", summary.corpus)?;
                writeln!(w, "documents       {}", summary.documents)?;
                writeln!(w, "sentences       {}", summary.sentences)?;
                writeln!(w, "vocabulary      {}", summary.vocabulary)?;
                writeln!(w, "avg doc length  {:.3}", summary.avg_doc_length)
            })
        }
        Command::Rank(args) => {
            let resp = service.rank(&RankRequest { corpus: name, query: args.query.clone(), k: args.k })?;
            emit(out, json, &resp, |w| {
                writeln!(w, "{:>4}  {:>10}  {:<16}  title", "rank", "score", "doc_id")?;
                for e in &resp.entries {
                    writeln!(w, "{:>4}  {:>10.4}  {:<16}  {}", e.rank, e.score, e.doc_id, e.title.as_deref().unwrap_or(""))?;
                }
                Ok(())
            })
        }
        Command::ExplainDoc { target, n, max_sentences, max_removals, max_evaluations, prune_supersets, distinct_terms } => {
            let caps = (max_sentences.is_some() || max_removals.is_some() || max_evaluations.is_some()).then(|| {
                let d = DocumentCapsBody::default();
                DocumentCapsBody {
                    max_candidate_sentences: max_sentences.unwrap_or(d.max_candidate_sentences),
                    max_removals: max_removals.unwrap_or(d.max_removals),
                    max_evaluations: max_evaluations.unwrap_or(d.max_evaluations),
                }
            });
            let req = DocumentExplanationRequest {
                corpus: name,
                query: target.ranking.query.clone(),
                k: target.ranking.k,
                doc_id: target.doc_id.clone(),
                n: *n,
                caps,
                prune_supersets: prune_supersets.then_some(true),
                importance: distinct_terms.then_some(ImportanceBody::DistinctTerms),
            };
            let resp = service.explain_document(&req)?;
            emit(out, json, &resp, |w| {
                if resp.no_valid_counterfactual {
                    writeln!(w, "no valid counterfactual within the caps ({} evaluations)", resp.evaluations)?;
                }
                for (i, e) in resp.explanations.iter().enumerate() {
                    writeln!(w, "#{}  new rank {}  importance {}  remove {:?}", i + 1, e.new_rank, e.importance, e.removed_indices)?;
                    for t in &e.removed_texts {
                        writeln!(w, "    - {t}")?;
                    }
                }
                Ok(())
            })
        }
        Command::ExplainQuery { target, n, threshold, max_terms, max_append, max_evaluations } => {
            let caps = (max_terms.is_some() || max_append.is_some() || max_evaluations.is_some()).then(|| {
                let d = QueryCapsBody::default();
                QueryCapsBody {
                    max_candidate_terms: max_terms.unwrap_or(d.max_candidate_terms),
                    max_append: max_append.unwrap_or(d.max_append),
                    max_evaluations: max_evaluations.unwrap_or(d.max_evaluations),
                }
            });
            let req = QueryExplanationRequest {
                corpus: name,
                query: target.ranking.query.clone(),
                k: target.ranking.k,
                doc_id: target.doc_id.clone(),
                n: *n,
                threshold: *threshold,
                caps,
            };
            let resp = service.explain_query(&req)?;
            emit(out, json, &resp, |w| {
                if resp.explanations.is_empty() {
                    writeln!(w, "no valid augmentation within the caps ({} evaluations)", resp.evaluations)?;
                }
                for e in &resp.explanations {
                    writeln!(w, "{:>4}  {:>8.4}  {}", e.new_rank, e.score, e.augmented_query)?;
                }
                Ok(())
            })
        }
        Command::ExplainInstance { target, n, variant, samples } => {
            let req = InstanceExplanationRequest {
                corpus: name,
                query: target.ranking.query.clone(),
                k: target.ranking.k,
                doc_id: target.doc_id.clone(),
                n: *n,
                variant: match variant {
                    Variant::CosineSampled => InstanceVariantBody::CosineSampled,
                    Variant::EmbeddingNearest => InstanceVariantBody::EmbeddingNearest,
                },
                s: *samples,
                seed: cli.seed,
            };
            let resp = service.explain_instance(&req)?;
            emit(out, json, &resp, |w| {
                writeln!(w, "{:>10}  {:>4}  {:<16}  title", "similarity", "rank", "doc_id")?;
                for e in &resp.explanations {
                    writeln!(w, "{:>10.4}  {:>4}  {:<16}  {}", e.similarity, e.corpus_rank, e.doc_id, e.title.as_deref().unwrap_or(""))?;
                }
                Ok(())
            })
        }
        Command::BuilderRerank { target, edited_body, edited_file } => {
            let edited_body = match (edited_body, edited_file) {
                (Some(body), _) => body.clone(),
                (None, Some(path)) => read_file(path)?,
                (None, None) => return Err(Failure::Usage("--edited-body or --edited-file is required".into())),
            };
            let req = BuilderRequest {
                corpus: name,
                query: target.ranking.query.clone(),
                k: target.ranking.k,
                doc_id: target.doc_id.clone(),
                edited_body,
            };
            let resp = service.builder_rerank(&req)?;
            emit(out, json, &resp, |w| {
                for d in &resp.deltas {
                    let arrow = match d.direction {
                        DirectionBody::Raised => "↑",
                        DirectionBody::Lowered => "↓",
                        DirectionBody::Unchanged => "=",
                    };
                    let entrant = if d.is_hidden_entrant { " +" } else { "" };
                    writeln!(w, "{:>3} -> {:<3} {arrow}  {}{entrant}", d.old_rank, d.new_rank, d.doc_id)?;
                }
                writeln!(w, "valid: {}", resp.valid)
            })
        }
        Command::Topics { ranking, topics, terms, iterations } => {
            let req = TopicsRequest {
                corpus: name,
                query: ranking.query.clone(),
                k: ranking.k,
                topics: *topics,
                seed: cli.seed,
                terms: *terms,
                iterations: *iterations,
            };
            let resp = service.topics(&req)?;
            emit(out, json, &resp, |w| {
                for t in &resp.topics {
                    let terms: Vec<String> = t.top_terms.iter().map(|tw| format!("{} ({:.3})", tw.term, tw.probability)).collect();
                    writeln!(w, "topic {}: {}", t.index, terms.join(", "))?;
                }
                Ok(())
            })
        }
        Command::Serve { .. } => unreachable!("handled above"),
    }
}

#[derive(Debug, Serialize)]
struct IndexSummary {
    corpus: String,
    documents: usize,
    sentences: usize,
    vocabulary: usize,
    avg_doc_length: f64,
}
