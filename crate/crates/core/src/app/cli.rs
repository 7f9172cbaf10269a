use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use super::config::AppConfig;
use super::db::{build_db, open_retriever, read_query_vectors, rebuild_index, sample_query_vectors, ScriptRegistry};
use super::serve::{serve_on, termination_signal, ServeState};
use crate::domain::{SpeechClip, StyleQuery, UserPreference};
use crate::error::{Error, Result};
use crate::index::{default_probes, doubling_probes, probe_sweep, IndexMode, StyleIndex};
use crate::ingest::synthetic::{generate_manifest, SyntheticSpec};
use crate::retrieval::{EmbeddingMode, RetrievalConfig, Retriever};
use crate::script::Script;
use crate::tts::{synthesizer_from_locator, SynthesisRequest};

/// Style prompt database builder and retriever.
///
/// Every option also reads from `STYLERAG_<KEY>` and from the config file
/// given by `--config` or `STYLERAG_CONFIG`; flags win over the environment,
/// which wins over the file.
#[derive(Debug, Parser)]
#[command(name = "stylerag", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Key-value config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Database directory [key: db_dir].
    #[arg(long, global = true)]
    pub db_dir: Option<String>,
    /// Embedder seed and clustering seed [key: seed].
    #[arg(long, global = true)]
    pub seed: Option<String>,
    /// `reference` or http(s) URL [key: embedder.profile].
    #[arg(long, global = true)]
    pub embedder_profile: Option<String>,
    /// [key: embedder.emotion]
    #[arg(long, global = true)]
    pub embedder_emotion: Option<String>,
    /// [key: embedder.user]
    #[arg(long, global = true)]
    pub embedder_user: Option<String>,
    /// [key: embedder.timeout_ms]
    #[arg(long, global = true)]
    pub timeout_ms: Option<String>,
    /// Log filter, e.g. `info` or `stylerag=debug` [key: log].
    #[arg(long, global = true)]
    pub log: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ingest a corpus manifest and write records, index and report.
    BuildDb(BuildDbArgs),
    /// Retrieve style prompts for one script line; prints the bundle as JSON.
    Query(QueryArgs),
    /// Retrieve, then send the bundle to the synthesizer; prints the result.
    Synthesize(SynthArgs),
    /// Run the HTTP retrieval service.
    Serve(ServeArgs),
    /// Recall@k of clustered search against exhaustive search, as CSV.
    EvalRecall(EvalArgs),
    /// Rebuild the index from records.jsonl.
    RebuildIndex(RebuildArgs),
    /// Write a seeded synthetic manifest.
    GenManifest(GenArgs),
}

#[derive(Debug, Args)]
pub struct BuildDbArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory; defaults to the configured db_dir.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// [key: dim]
    #[arg(long)]
    pub dim: Option<String>,
    /// [key: quality_threshold]
    #[arg(long)]
    pub threshold: Option<String>,
    /// Number of clusters or `auto` [key: n_clusters].
    #[arg(long)]
    pub k_clusters: Option<String>,
    /// `clustered` or `exact` [key: index_mode].
    #[arg(long)]
    pub index_mode: Option<String>,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    /// Index file; records.jsonl is read from the same directory.
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// Script JSON file.
    #[arg(long)]
    pub script: PathBuf,
    #[arg(long)]
    pub position: usize,
    /// Overrides the script line at `position`.
    #[arg(long)]
    pub text: Option<String>,
    /// [key: k]
    #[arg(long)]
    pub k: Option<String>,
    /// profile+emotion, only-profile or only-emotion.
    #[arg(long, default_value = "profile+emotion")]
    pub mode: String,
    /// Number, `default` or `exhaustive` [key: probes].
    #[arg(long)]
    pub probes: Option<String>,
    /// UserPreference JSON file.
    #[arg(long)]
    pub pref_file: Option<PathBuf>,
    /// Force the user component on or off.
    #[arg(long)]
    pub include_user: Option<bool>,
    /// Skip retrieval and use this database clip.
    #[arg(long)]
    pub explicit_clip: Option<String>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub query: QueryArgs,
    /// Audio locator of the timbre prompt.
    #[arg(long)]
    pub timbre_uri: String,
    /// `mock` or http(s) URL [key: synthesizer].
    #[arg(long)]
    pub synthesizer: Option<String>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// [key: listen]
    #[arg(long)]
    pub listen: Option<String>,
    /// Directory of script JSON files [key: scripts_dir].
    #[arg(long)]
    pub scripts: Option<String>,
    /// [key: k]
    #[arg(long)]
    pub k: Option<String>,
    /// [key: probes]
    #[arg(long)]
    pub probes: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// One JSON array per line. Without it, queries are sampled from the index.
    #[arg(long)]
    pub queries: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    /// Comma-separated probe counts; default 1,2,4,...,C.
    #[arg(long, value_delimiter = ',')]
    pub probes: Vec<usize>,
    /// Sampled queries when --queries is absent.
    #[arg(long, default_value_t = 100)]
    pub n_queries: usize,
    /// Per-coordinate noise of sampled queries.
    #[arg(long, default_value_t = 0.5)]
    pub noise: f64,
    #[arg(long, default_value_t = 17)]
    pub query_seed: u64,
}

#[derive(Debug, Args)]
pub struct RebuildArgs {
    /// [key: n_clusters]
    #[arg(long)]
    pub k_clusters: Option<String>,
    /// [key: index_mode]
    #[arg(long)]
    pub index_mode: Option<String>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 30)]
    pub speakers: usize,
    #[arg(long, default_value_t = 55)]
    pub sources: usize,
    #[arg(long, default_value_t = 40)]
    pub segments: usize,
    #[arg(long, default_value_t = 2024)]
    pub corpus_seed: u64,
}

fn flag(map: &mut BTreeMap<String, String>, key: &str, v: &Option<String>) {
    if let Some(v) = v {
        map.insert(key.to_string(), v.clone());
    }
}

impl Cli {
    fn flag_layer(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let g = &self.global;
        flag(&mut m, "db_dir", &g.db_dir);
        flag(&mut m, "seed", &g.seed);
        flag(&mut m, "embedder.profile", &g.embedder_profile);
        flag(&mut m, "embedder.emotion", &g.embedder_emotion);
        flag(&mut m, "embedder.user", &g.embedder_user);
        flag(&mut m, "embedder.timeout_ms", &g.timeout_ms);
        flag(&mut m, "log", &g.log);
        match &self.command {
            Command::BuildDb(a) => {
                flag(&mut m, "dim", &a.dim);
                flag(&mut m, "quality_threshold", &a.threshold);
                flag(&mut m, "n_clusters", &a.k_clusters);
                flag(&mut m, "index_mode", &a.index_mode);
            }
            Command::Query(a) => query_flags(&mut m, a),
            Command::Synthesize(a) => {
                query_flags(&mut m, &a.query);
                flag(&mut m, "synthesizer", &a.synthesizer);
            }
            Command::Serve(a) => {
                flag(&mut m, "listen", &a.listen);
                flag(&mut m, "scripts_dir", &a.scripts);
                flag(&mut m, "k", &a.k);
                flag(&mut m, "probes", &a.probes);
            }
            Command::RebuildIndex(a) => {
                flag(&mut m, "n_clusters", &a.k_clusters);
                flag(&mut m, "index_mode", &a.index_mode);
            }
            Command::EvalRecall(_) | Command::GenManifest(_) => {}
        }
        m
    }
}

fn query_flags(m: &mut BTreeMap<String, String>, a: &QueryArgs) {
    flag(m, "k", &a.k);
    flag(m, "probes", &a.probes);
}

fn init_logging(filter: &str) {
    let filter = tracing_subscriber::EnvFilter::try_new(filter).unwrap_or_else(|_| "info".into());
    let _ = tracing_subscriber::fmt()
        .json()
        .with_current_span(true)
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .try_init();
}

/// Entry point of the binary.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            let body = json!({ "error": e.code(), "message": e.to_string() });
            eprintln!("{body}");
            ExitCode::FAILURE
        }
    }
}

pub fn run(cli: Cli) -> Result<ExitCode> {
    let config = AppConfig::from_process_env(cli.global.config.as_deref(), &cli.flag_layer())?;
    init_logging(&config.log);
    match cli.command {
        Command::BuildDb(a) => {
            let out = a.out.unwrap_or_else(|| config.db_dir.clone());
            let report = build_db(&config, &a.manifest, &out)?;
            let t = &report.ingestion.totals;
            println!(
                "{}",
                json!({
                    "out": out,
                    "accepted": t.accepted,
                    "rejected": t.rejected,
                    "entries_failed": t.entries_failed,
                    "index": report.index,
                })
            );
            if t.accepted == 0 {
                eprintln!(
                    "{}",
                    json!({ "error": "EmptyDatabase", "message": "no record was accepted" })
                );
                return Ok(ExitCode::FAILURE);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Query(a) => {
            let index = a.index.clone().unwrap_or_else(|| config.index_path());
            let retriever = open_retriever(&config, &index)?;
            let bundle = query(&retriever, &config, &a)?;
            print_json(&bundle)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Synthesize(a) => {
            let index = a.query.index.clone().unwrap_or_else(|| config.index_path());
            let retriever = open_retriever(&config, &index)?;
            let bundle = query(&retriever, &config, &a.query)?;
            let synth = synthesizer_from_locator(&config.synthesizer, config.embedder_timeout_ms)?;
            // only the locator of the timbre clip reaches the synthesizer
            let timbre = SpeechClip {
                clip_id: "timbre".into(),
                audio_uri: a.timbre_uri.clone(),
                duration_s: 0.0,
                speaker_id: String::new(),
                language: String::new(),
                transcript: String::new(),
                quality_score: 1.0,
            };
            let request = SynthesisRequest {
                text: query_text(&a.query)?,
                timbre_prompt: timbre,
                style_bundle: bundle,
            };
            let result = synth.synthesize(&request)?;
            print_json(&json!({ "bundle": request.style_bundle, "result": result }))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Serve(_) => {
            serve(config)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::EvalRecall(a) => {
            let path = a.index.clone().unwrap_or_else(|| config.index_path());
            eval_recall(&path, &a, &mut std::io::stdout().lock())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::RebuildIndex(_) => {
            let s = rebuild_index(&config)?;
            println!("{}", serde_json::to_string(&s)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::GenManifest(a) => {
            let m = generate_manifest(&SyntheticSpec {
                speakers: a.speakers,
                sources: a.sources,
                segments_per_source: a.segments,
                seed: a.corpus_seed,
            });
            m.save(&a.out)?;
            println!("{}", json!({ "out": a.out, "entries": m.entries.len() }));
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out).map_err(|e| Error::io("<stdout>", e))
}

fn query_text(a: &QueryArgs) -> Result<String> {
    match &a.text {
        Some(t) => Ok(t.clone()),
        None => {
            let script = Script::load(&a.script)?;
            script
                .utterances
                .get(a.position)
                .map(|u| u.text.clone())
                .ok_or(Error::PositionOutOfRange {
                    position: a.position,
                    len: script.len(),
                })
        }
    }
}

fn query(retriever: &Retriever, config: &AppConfig, a: &QueryArgs) -> Result<crate::retrieval::StylePromptBundle> {
    let script = Script::load(&a.script)?;
    let mut q = StyleQuery::new(script.script_id.clone(), a.position, query_text(a)?);
    q.k = config.k;
    if let Some(p) = &a.pref_file {
        let bytes = std::fs::read(p).map_err(|e| Error::io(p, e))?;
        q.user_pref = Some(serde_json::from_slice::<UserPreference>(&bytes)?);
    }
    if let Some(id) = &a.explicit_clip {
        q.explicit_style_clip = Some(retriever.database().store.clip(id)?.clone());
    }
    let rc = RetrievalConfig {
        k: config.k,
        embedding_mode: a.mode.parse::<EmbeddingMode>()?,
        probes: config.probes,
        include_user: a.include_user,
    };
    let query_id = uuid::Uuid::new_v4();
    let _span = tracing::info_span!("query", %query_id, script_id = %q.script_id, position = q.position).entered();
    retriever.retrieve(&q, &rc, &script)
}

fn serve(config: AppConfig) -> Result<()> {
    let index_path = config.index_path();
    let retriever = open_retriever(&config, &index_path)?;
    let scripts = match &config.scripts_dir {
        Some(d) => ScriptRegistry::load_dir(d)?,
        None => ScriptRegistry::default(),
    };
    let state = Arc::new(ServeState {
        retriever,
        scripts,
        defaults: RetrievalConfig {
            k: config.k,
            probes: config.probes,
            ..RetrievalConfig::default()
        },
        index_path,
    });
    let rt = tokio::runtime::Runtime::new().map_err(|e| Error::io("<runtime>", e))?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(&config.listen)
            .await
            .map_err(|e| Error::io(&config.listen, e))?;
        let addr = listener.local_addr().map_err(|e| Error::io(&config.listen, e))?;
        tracing::info!(%addr, records = state.retriever.record_count(), "listening");
        serve_on(listener, state, termination_signal())
            .await
            .map_err(|e| Error::io(&config.listen, e))
    })?;
    tracing::info!("shut down");
    Ok(())
}

/// Writes `probes,k,recall,mean_latency_us` rows.
pub fn eval_recall(index_path: &Path, a: &EvalArgs, out: &mut impl Write) -> Result<()> {
    let index = StyleIndex::load(index_path)?;
    if index.mode() != IndexMode::Clustered {
        return Err(Error::InvalidArgument(format!(
            "{} is an exact index; recall evaluation needs a clustered one",
            index_path.display()
        )));
    }
    let queries = match &a.queries {
        Some(p) => read_query_vectors(p)?,
        None => sample_query_vectors(&index, a.n_queries, a.noise, a.query_seed)?,
    };
    let probes = if a.probes.is_empty() {
        doubling_probes(index.n_clusters())
    } else {
        a.probes.clone()
    };
    let stats = probe_sweep(&index, &queries, a.k, &probes)?;
    let io = |e| Error::io("<output>", e);
    writeln!(out, "probes,k,recall,mean_latency_us").map_err(io)?;
    for s in stats {
        writeln!(out, "{},{},{:.6},{:.3}", s.probes, s.k, s.recall, s.mean_latency_us).map_err(io)?;
    }
    tracing::info!(
        default_probes = default_probes(index.n_clusters()),
        n_clusters = index.n_clusters(),
        "recall sweep done"
    );
    Ok(())
}
