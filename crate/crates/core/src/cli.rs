//! Command-line front end.
//!
//! Settings are resolved from, highest priority first: command-line flags
//! (including repeated `--set key=value`), `HCTREE_*` environment variables
//! (key upper-cased, `.` replaced by `_`), and a `key = value` config file
//! given by `--config` or `HCTREE_CONFIG`. Results go to stdout; logs and
//! the resolved configuration go to stderr.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::cluster::{BuildOptions, ClusterError, RepresentativeRule};
use crate::embed::{
    cache_get_or_embed, embed_with, provider_for, CacheStats, DiskCache, EmbedError, EmbedKind,
    EmbedderConfig, ProviderKind,
};
use crate::evalkit::{compare_methods, parse_judgments, EvalError, DEFAULT_BETA};
use crate::index::{Hit, Index};
use crate::ingest::{expand_inputs, load_corpus, ChunkConfig, IngestError};
use crate::querytransform::{
    transform_with_config, PromptTemplate, TransformConfig, TransformError, TransformMode,
};
use crate::search::{SearchError, SearchOptions};
use crate::store::StoreError;
use crate::vectorspace::{EmbeddingVector, VectorError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// Process exit code; see the README for the table.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Ingest(_) => 3,
            CliError::Embed(_) => 4,
            CliError::Cluster(_) => 5,
            CliError::Search(_) => 6,
            CliError::Store(_) => 7,
            CliError::Eval(_) => 8,
            CliError::Transform(_) => 9,
            CliError::Config(_) => 10,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "hctree",
    version,
    about = "Hierarchical clustering tree retrieval"
)]
pub struct Cli {
    /// Key-value config file.
    #[arg(long, global = true, env = "HCTREE_CONFIG")]
    pub config: Option<PathBuf>,
    /// Override any config key, e.g. `--set embed.dim=128`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Chunk, embed and cluster a corpus into an index directory.
    Build(BuildArgs),
    /// Retrieve chunks for a query.
    Query(QueryArgs),
    /// Score judged runs and compare methods against a baseline.
    Eval(EvalArgs),
    /// Show index statistics or one node.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Corpus files or directories (`.txt`, `.md`, `.jsonl`).
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Output index directory.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Target chunk length in characters.
    #[arg(long)]
    pub chunk_size: Option<usize>,
    /// Characters shared by consecutive chunks.
    #[arg(long)]
    pub chunk_overlap: Option<usize>,
    /// Embedding cache directory.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Embed everything without reading or writing the cache.
    #[arg(long)]
    pub no_cache: bool,
    /// Merge representatives from the two children instead of all members.
    #[arg(long)]
    pub children_mean: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum QueryMode {
    /// Nearest tree node; its leaves are the result.
    Tree,
    /// Rewrite the query through the chat provider first.
    TreeQe,
    /// Flat top-k over the leaves.
    Topk,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    /// Index directory written by `build`.
    pub index: PathBuf,
    pub query: String,
    #[arg(long, value_enum, default_value = "tree")]
    pub mode: QueryMode,
    /// Result count for `topk`.
    #[arg(long)]
    pub k: Option<usize>,
    /// Keep the top-m retrieved chunks by inner product.
    #[arg(long)]
    pub mips_m: Option<usize>,
    /// Never return the root, which would yield the whole corpus.
    #[arg(long)]
    pub exclude_root: bool,
    /// In tree-qe mode, use the original query if the rewriting call fails.
    #[arg(long)]
    pub qe_fallback_identity: bool,
    /// Print one JSON object instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// JSONL judgments, one object per (method, query).
    pub judgments: PathBuf,
    /// Index whose chunk ids the judgments refer to; ids are checked if given.
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// Comma-separated methods in report order (default: order in the file).
    #[arg(long, value_delimiter = ',')]
    pub methods: Vec<String>,
    /// Recall weight of the F-score.
    #[arg(long, default_value_t = DEFAULT_BETA)]
    pub beta: f64,
    /// Method every other method is compared against.
    #[arg(long, default_value = "origin")]
    pub baseline: String,
    /// Write the full report as JSON.
    #[arg(long)]
    pub out_json: Option<PathBuf>,
    /// Write per-query score differences as CSV.
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    /// Index directory written by `build`.
    pub index: PathBuf,
    /// Print one node and its members.
    #[arg(long, conflicts_with = "stats")]
    pub node: Option<u32>,
    /// Print tree statistics (the default).
    #[arg(long)]
    pub stats: bool,
}

/// Flat string settings after applying precedence.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

pub const SETTING_KEYS: &[&str] = &[
    "chunk_size",
    "chunk_overlap",
    "cache_dir",
    "embed.provider",
    "embed.model",
    "embed.endpoint",
    "embed.dim",
    "embed.batch_size",
    "embed.document_prefix",
    "embed.query_prefix",
    "embed.seed",
    "embed.api_key_env",
    "embed.max_in_flight",
    "embed.retries",
    "embed.retry_backoff_ms",
    "embed.timeout_ms",
    "qe.endpoint",
    "qe.model",
    "qe.api_key_env",
    "qe.template",
    "qe.timeout_ms",
];

fn env_name(key: &str) -> String {
    format!("HCTREE_{}", key.to_uppercase().replace('.', "_"))
}

pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", i + 1)))?;
        out.insert(k.trim().to_owned(), unquote(v.trim()));
    }
    Ok(out)
}

/// Values may be double-quoted to keep surrounding spaces (prefixes).
fn unquote(v: &str) -> String {
    if v.len() >= 2 && v.starts_with('"') && v.ends_with('"') {
        v[1..v.len() - 1].to_owned()
    } else {
        v.to_owned()
    }
}

impl Settings {
    pub fn resolve(
        config_file: Option<&Path>,
        env: impl Fn(&str) -> Option<String>,
        overrides: &[String],
    ) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        if let Some(path) = config_file {
            let text = fs::read_to_string(path).map_err(io_err(path))?;
            values.extend(parse_config_text(&text)?);
        }
        for key in SETTING_KEYS {
            if let Some(v) = env(&env_name(key)) {
                values.insert(key.to_string(), v);
            }
        }
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("--set {o:?}: expected KEY=VALUE")))?;
            values.insert(k.trim().to_owned(), unquote(v));
        }
        if let Some(k) = values.keys().find(|k| !SETTING_KEYS.contains(&k.as_str())) {
            return Err(CliError::Config(format!("unknown setting {k:?}")));
        }
        Ok(Self { values })
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.values.insert(key.to_owned(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| {
                v.parse()
                    .map_err(|e| CliError::Config(format!("{key} = {v:?}: {e}")))
            })
            .transpose()
    }

    pub fn chunk_config(&self) -> Result<ChunkConfig, CliError> {
        let mut c = ChunkConfig::default();
        if let Some(v) = self.parsed("chunk_size")? {
            c.chunk_size = v;
        }
        if let Some(v) = self.parsed("chunk_overlap")? {
            c.chunk_overlap = v;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn embedder_config(&self) -> Result<EmbedderConfig, CliError> {
        let mut c = EmbedderConfig::default();
        if let Some(p) = self.get("embed.provider") {
            c.provider = match p {
                "remote_api" => ProviderKind::RemoteApi,
                "deterministic_test" => ProviderKind::DeterministicTest,
                other => {
                    return Err(CliError::Config(format!(
                        "unknown embed.provider {other:?}"
                    )))
                }
            };
        }
        if let Some(v) = self.get("embed.model") {
            c.model_id = v.to_owned();
        }
        if let Some(v) = self.get("embed.endpoint") {
            c.endpoint_url = v.to_owned();
        }
        if let Some(v) = self.get("embed.document_prefix") {
            c.document_prefix = v.to_owned();
        }
        if let Some(v) = self.get("embed.query_prefix") {
            c.query_prefix = v.to_owned();
        }
        if let Some(v) = self.get("embed.api_key_env") {
            c.api_key_env = Some(v.to_owned());
        }
        if let Some(v) = self.parsed("embed.dim")? {
            c.dim = v;
        }
        if let Some(v) = self.parsed("embed.batch_size")? {
            c.batch_size = v;
        }
        if let Some(v) = self.parsed("embed.seed")? {
            c.seed = v;
        }
        if let Some(v) = self.parsed("embed.max_in_flight")? {
            c.max_in_flight = v;
        }
        if let Some(v) = self.parsed("embed.retries")? {
            c.retries = v;
        }
        if let Some(v) = self.parsed("embed.retry_backoff_ms")? {
            c.retry_backoff_ms = v;
        }
        if let Some(v) = self.parsed("embed.timeout_ms")? {
            c.timeout_ms = v;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn transform_config(&self, mode: TransformMode) -> Result<TransformConfig, CliError> {
        let mut c = TransformConfig {
            mode,
            ..Default::default()
        };
        if let Some(v) = self.get("qe.endpoint") {
            c.endpoint_url = v.to_owned();
        }
        if let Some(v) = self.get("qe.model") {
            c.model = v.to_owned();
        }
        if let Some(v) = self.get("qe.api_key_env") {
            c.api_key_env = Some(v.to_owned());
        }
        if let Some(v) = self.parsed("qe.timeout_ms")? {
            c.timeout_ms = v;
        }
        if let Some(name) = self.get("qe.template") {
            c.template = match PromptTemplate::builtin(name) {
                Some(t) => t,
                None => {
                    let body = fs::read_to_string(name).map_err(io_err(Path::new(name)))?;
                    PromptTemplate::new(name, body)?
                }
            };
        }
        Ok(c)
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.get("cache_dir")
            .map_or_else(|| PathBuf::from(".hctree-cache"), PathBuf::from)
    }
}

#[derive(Serialize)]
struct ResolvedConfig<'a> {
    command: &'a str,
    settings: &'a BTreeMap<String, String>,
    chunking: Option<&'a ChunkConfig>,
    embedder: Option<&'a EmbedderConfig>,
    search: Option<&'a SearchOptions>,
    transform_mode: Option<TransformMode>,
}

fn log_config(cfg: &ResolvedConfig<'_>) {
    log::info!(
        "resolved config: {}",
        serde_json::to_string(cfg).expect("serializable config")
    );
}

/// Runs one command, writing results to `out`.
pub fn run(cli: Cli, out: &mut dyn std::io::Write) -> Result<(), CliError> {
    let mut settings = Settings::resolve(
        cli.config.as_deref(),
        |k| std::env::var(k).ok(),
        &cli.overrides,
    )?;
    let text = match cli.command {
        Command::Build(args) => {
            if let Some(v) = args.chunk_size {
                settings.set("chunk_size", v);
            }
            if let Some(v) = args.chunk_overlap {
                settings.set("chunk_overlap", v);
            }
            if let Some(v) = &args.cache_dir {
                settings.set("cache_dir", v.display());
            }
            cmd_build(&args, &settings)?
        }
        Command::Query(args) => cmd_query(&args, &settings)?,
        Command::Eval(args) => cmd_eval(&args, &settings)?,
        Command::Inspect(args) => cmd_inspect(&args)?,
    };
    out.write_all(text.as_bytes())
        .map_err(io_err(Path::new("<stdout>")))?;
    Ok(())
}

pub fn cmd_build(args: &BuildArgs, settings: &Settings) -> Result<String, CliError> {
    let chunk_cfg = settings.chunk_config()?;
    let embed_cfg = settings.embedder_config()?;
    let opts = BuildOptions {
        representative: if args.children_mean {
            RepresentativeRule::ChildrenMean
        } else {
            RepresentativeRule::MemberMean
        },
        ..Default::default()
    };
    log_config(&ResolvedConfig {
        command: "build",
        settings: &settings.values,
        chunking: Some(&chunk_cfg),
        embedder: Some(&embed_cfg),
        search: None,
        transform_mode: None,
    });

    let started = Instant::now();
    let paths = expand_inputs(&args.inputs)?;
    if paths.is_empty() {
        return Err(IngestError::EmptyCorpus.into());
    }
    let (docs, chunks) = load_corpus(&paths, &chunk_cfg)?;
    log::info!("{} documents, {} chunks", docs.len(), chunks.len());

    let texts: Vec<String> = chunks.iter().map(|c| c.text.clone()).collect();
    let provider = provider_for(&embed_cfg)?;
    let (vectors, stats) = if args.no_cache {
        let vs = embed_with(provider.as_ref(), &texts, EmbedKind::Document, &embed_cfg)?;
        let vs = vs
            .iter()
            .map(|v| v.to_f32_precision())
            .collect::<Result<Vec<_>, VectorError>>()
            .map_err(ClusterError::from)?;
        let n = vs.len();
        (
            vs,
            CacheStats {
                misses: n,
                ..Default::default()
            },
        )
    } else {
        let cache = DiskCache::open(settings.cache_dir())?;
        cache_get_or_embed(
            provider.as_ref(),
            &texts,
            EmbedKind::Document,
            &embed_cfg,
            &cache,
        )?
    };
    let embedded = started.elapsed();

    let mut index = Index::build(chunks, &vectors, &embed_cfg, &chunk_cfg, opts)?;
    index.save(&args.out)?;
    log::info!(
        "embedding {:.3}s, clustering+save {:.3}s",
        embedded.as_secs_f64(),
        (started.elapsed() - embedded).as_secs_f64()
    );
    eprintln!("build time: {:.3}s", started.elapsed().as_secs_f64());

    let mut s = String::new();
    let _ = writeln!(s, "documents: {}", docs.len());
    let _ = writeln!(s, "chunks (N): {}", index.tree.n_leaves());
    let _ = writeln!(s, "nodes: {}", index.tree.len());
    let _ = writeln!(s, "depth: {}", index.tree.depth());
    let _ = writeln!(
        s,
        "embeddings: {} cached, {} embedded",
        stats.hits, stats.misses
    );
    Ok(s)
}

fn embed_query(
    index: &Index,
    text: &str,
    settings: &Settings,
) -> Result<EmbeddingVector, CliError> {
    let base = settings.embedder_config()?;
    let cfg = index.manifest.embedder.apply_to(&base);
    let provider = provider_for(&cfg)?;
    let mut v = embed_with(
        provider.as_ref(),
        &[text.to_owned()],
        EmbedKind::Query,
        &cfg,
    )?;
    Ok(v.remove(0))
}

#[derive(Serialize)]
struct QueryOutput<'a> {
    mode: &'static str,
    query: &'a str,
    effective_query: &'a str,
    best_node_id: Option<u32>,
    best_distance: Option<f64>,
    refined: bool,
    chunks: Vec<Hit<'a>>,
}

pub fn cmd_query(args: &QueryArgs, settings: &Settings) -> Result<String, CliError> {
    let index = Index::load(&args.index)?;
    let opts = SearchOptions {
        mips_refine: args.mips_m,
        exclude_root: args.exclude_root,
    };
    let mode = match args.mode {
        QueryMode::Tree => "tree",
        QueryMode::TreeQe => "tree-qe",
        QueryMode::Topk => "topk",
    };
    let tmode = if args.mode == QueryMode::TreeQe {
        TransformMode::LlmExtract
    } else {
        TransformMode::Identity
    };
    let tcfg = settings.transform_config(tmode)?;
    log_config(&ResolvedConfig {
        command: "query",
        settings: &settings.values,
        chunking: None,
        embedder: None,
        search: Some(&opts),
        transform_mode: Some(tmode),
    });

    let effective = match transform_with_config(&args.query, &tcfg) {
        Ok(q) => q,
        Err(e) if args.qe_fallback_identity && e.original_query().is_some() => {
            log::warn!("{e}; falling back to the original query");
            args.query.clone()
        }
        Err(e) => return Err(e.into()),
    };
    let q = embed_query(&index, &effective, settings)?;

    let output = match args.mode {
        QueryMode::Topk => {
            let k = args.k.ok_or(SearchError::BadK {
                k: 0,
                n: index.tree.n_leaves(),
            })?;
            let ranked = index.topk(&q, k)?;
            QueryOutput {
                mode,
                query: &args.query,
                effective_query: &effective,
                best_node_id: None,
                best_distance: None,
                refined: false,
                chunks: index.hits(ranked.into_iter().map(|(id, s)| (id, Some(s)))),
            }
        }
        QueryMode::Tree | QueryMode::TreeQe => {
            let r = index.retrieve(&q, &opts)?;
            QueryOutput {
                mode,
                query: &args.query,
                effective_query: &effective,
                best_node_id: Some(r.best_node_id),
                best_distance: Some(r.best_distance),
                refined: r.refined,
                chunks: index.hits(r.chunks.iter().map(|c| (c.chunk_id, c.score))),
            }
        }
    };

    if args.json {
        let mut s = serde_json::to_string_pretty(&output).expect("serializable output");
        s.push('\n');
        return Ok(s);
    }
    let mut s = String::new();
    let _ = writeln!(s, "mode: {}", output.mode);
    if let (Some(id), Some(d)) = (output.best_node_id, output.best_distance) {
        let _ = writeln!(s, "best node: {id} (distance {d:.6})");
    }
    let _ = writeln!(
        s,
        "chunks: {}{}",
        output.chunks.len(),
        if output.refined { " (refined)" } else { "" }
    );
    for h in &output.chunks {
        let score = h
            .score
            .map_or_else(|| "-".to_owned(), |x| format!("{x:.6}"));
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}",
            h.chunk_id,
            h.doc_id,
            score,
            h.text.replace('\n', "\\n")
        );
    }
    Ok(s)
}

pub fn cmd_eval(args: &EvalArgs, settings: &Settings) -> Result<String, CliError> {
    log_config(&ResolvedConfig {
        command: "eval",
        settings: &settings.values,
        chunking: None,
        embedder: None,
        search: None,
        transform_mode: None,
    });
    let text = fs::read_to_string(&args.judgments).map_err(io_err(&args.judgments))?;
    let records = parse_judgments(&text)?;
    if let Some(dir) = &args.index {
        let index = Index::load(dir)?;
        let known: BTreeSet<u32> = index.chunks.iter().map(|c| c.id).collect();
        for r in &records {
            if let Some(bad) = r
                .gold
                .iter()
                .chain(&r.retrieved)
                .find(|id| !known.contains(id))
            {
                return Err(CliError::Config(format!(
                    "judgment {}/{} refers to chunk {bad}, which is not in the index",
                    r.method, r.query_id
                )));
            }
        }
    }
    let report = compare_methods(&records, &args.methods, &args.baseline, args.beta)?;
    if let Some(path) = &args.out_json {
        let mut json = serde_json::to_string_pretty(&report).expect("serializable report");
        json.push('\n');
        fs::write(path, json).map_err(io_err(path))?;
    }
    if let Some(path) = &args.out_csv {
        fs::write(path, report.diffs_csv()).map_err(io_err(path))?;
    }
    Ok(report.to_table())
}

pub fn cmd_inspect(args: &InspectArgs) -> Result<String, CliError> {
    let index = Index::load(&args.index)?;
    let tree = &index.tree;
    let mut s = String::new();
    if let Some(id) = args.node {
        let node = tree.node(id)?;
        let _ = writeln!(s, "node: {id}");
        match node.children {
            Some((l, r)) => {
                let _ = writeln!(s, "children: {l} {r}");
            }
            None => {
                let _ = writeln!(s, "children: none (leaf)");
            }
        }
        let _ = writeln!(s, "size: {}", node.size);
        let _ = writeln!(s, "merge distance: {:.6}", node.merge_distance);
        let leaves = tree.leaves_under(id)?;
        let list: Vec<String> = leaves.iter().map(u32::to_string).collect();
        let _ = writeln!(s, "leaf chunks: {}", list.join(" "));
        if let Some(cid) = node.chunk_id {
            let c = index.chunk(cid).expect("leaf chunk exists");
            let _ = writeln!(s, "doc: {} [{}, {})", c.doc_id, c.start, c.end);
            let _ = writeln!(s, "text: {}", c.text);
        }
        return Ok(s);
    }
    let _ = args.stats;
    let _ = writeln!(s, "leaves (N): {}", tree.n_leaves());
    let _ = writeln!(s, "nodes: {}", tree.len());
    let _ = writeln!(s, "root: {}", tree.root_id());
    let _ = writeln!(s, "depth: {}", tree.depth());
    let _ = writeln!(s, "dim: {}", tree.dim());
    let distances: Vec<f64> = tree.merges().map(|n| n.merge_distance).collect();
    s.push_str(&histogram(&distances, 10));
    Ok(s)
}

/// Equal-width bins over `[min, max]` of the merge distances.
fn histogram(xs: &[f64], bins: usize) -> String {
    let mut s = String::from("merge distance histogram:\n");
    if xs.is_empty() {
        s.push_str("  (no merges)\n");
        return s;
    }
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &x in xs {
        let b = if width == 0.0 {
            0
        } else {
            (((x - lo) / width) as usize).min(bins - 1)
        };
        counts[b] += 1;
    }
    let bins_used = if width == 0.0 { 1 } else { bins };
    for (b, count) in counts.iter().take(bins_used).enumerate() {
        let start = lo + width * b as f64;
        let end = if width == 0.0 { hi } else { start + width };
        let _ = writeln!(s, "  [{start:.4}, {end:.4}] {count}");
    }
    s
}
