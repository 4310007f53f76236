//! `voc` command line: one subcommand per pipeline stage. Every run appends
//! a line to `manifest.jsonl` in the working directory.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use voc_core::agreement::{compare_variants, BootstrapConfig, Scale};
use voc_core::analytics::FittedModel;
use voc_core::corpus::{
    append_manifest, file_sha256, ingest_reviews, load_document, load_records, persist_document, persist_records,
    IngestFilter, ManifestEntry, Review, SourceLayout, Store, SCHEMA_VERSION,
};
use voc_core::extraction::{ExtractionConfig, Extractor, ReviewExtraction};
use voc_core::llm::mock::{Lexicon, LexiconBackend};
use voc_core::llm::{Backend, HttpBackend, HttpConfig, LlmClient, ReplayBackend, ResponseCache};
use voc_core::taxonomy::{
    consolidate, discover_all, sample_batches, CandidateKind, CandidateSet, Consolidation, Level, MergeMap, Taxonomy,
    Worksheet,
};
use voc_core::whatif::{simulate_uplift, UpliftConfig};

use crate::snapshot::{fit_models, Snapshot, SnapshotConfig};

/// Artifact file names inside the working directory.
pub mod files {
    pub const REVIEWS: &str = "reviews.jsonl";
    pub const STORES: &str = "stores.jsonl";
    pub const CANDIDATES: &str = "candidates.json";
    pub const WORKSHEET: &str = "worksheet.csv";
    pub const TAXONOMY: &str = "taxonomy.json";
    pub const TRACE: &str = "consolidation_trace.json";
    pub const EXTRACTIONS: &str = "extractions.jsonl";
    pub const FAILURES: &str = "failures.jsonl";
    pub const AGREEMENT: &str = "agreement.json";
    pub const MODEL_ATTRIBUTE: &str = "model_attribute.json";
    pub const MODEL_FEATURE: &str = "model_feature.json";
    pub const SNAPSHOT: &str = "snapshot.json";
    pub const TRENDS: &str = "trends.tsv";
    pub const IMPACT: &str = "impact.json";
    pub const IMPACT_TSV: &str = "impact.tsv";
    pub const MANIFEST: &str = "manifest.jsonl";
    pub const CACHE: &str = "llm_cache.jsonl";
}

#[derive(Debug, Parser)]
#[command(name = "voc", version, about = "Mine customer reviews for attribute and feature sentiment")]
pub struct Cli {
    /// Directory holding artifacts, the manifest and the LLM response cache.
    #[arg(long, global = true, env = "VOC_WORKDIR", default_value = ".")]
    pub workdir: PathBuf,
    /// Where LLM prompts go. `replay` answers from the cache only.
    #[arg(long, global = true, value_enum, default_value_t = BackendKind::Http)]
    pub backend: BackendKind,
    /// OpenAI-compatible API base URL; the key is read from VOC_API_KEY.
    #[arg(long, global = true, env = "VOC_BASE_URL", default_value = "https://api.openai.com/v1")]
    pub base_url: String,
    #[arg(long, global = true, default_value = "gpt-4o")]
    pub llm_model: String,
    #[arg(long, global = true, default_value_t = 8)]
    pub max_in_flight: usize,
    /// -v for info, -vv for debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    Http,
    Lexicon,
    Replay,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Read Yelp-layout files, filter, sample, write reviews and stores.
    Ingest(IngestArgs),
    /// Ask the LLM for candidate attributes and features over review batches.
    Discover(DiscoverArgs),
    /// Turn candidates into a taxonomy via a merge map, or emit a worksheet.
    Consolidate(ConsolidateArgs),
    /// Run sentence-level attribute and feature extraction.
    Extract(ExtractArgs),
    /// Score extraction runs against gold annotations.
    Validate(ValidateArgs),
    /// Fit rating models and build the analytics snapshot.
    Analyze(AnalyzeArgs),
    /// Per-store uplift from improving one feature by one level.
    Simulate(SimulateArgs),
    /// Serve a snapshot over HTTP.
    Serve(ServeArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::Ingest(_) => "ingest",
            Self::Discover(_) => "discover",
            Self::Consolidate(_) => "consolidate",
            Self::Extract(_) => "extract",
            Self::Validate(_) => "validate",
            Self::Analyze(_) => "analyze",
            Self::Simulate(_) => "simulate",
            Self::Serve(_) => "serve",
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct IngestArgs {
    /// Directory with the business, review and user files.
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long)]
    pub category: Option<String>,
    #[arg(long)]
    pub name_contains: Option<String>,
    /// First day kept, YYYY-MM-DD.
    #[arg(long)]
    pub from: Option<NaiveDate>,
    /// Last day kept, YYYY-MM-DD.
    #[arg(long)]
    pub to: Option<NaiveDate>,
    #[arg(long)]
    pub sample: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KindArg {
    Attribute,
    Feature,
    Both,
}

#[derive(Debug, Args, Serialize)]
pub struct DiscoverArgs {
    #[arg(long, default_value_t = 20)]
    pub batches: usize,
    #[arg(long, default_value_t = 1000)]
    pub batch_size: usize,
    #[arg(long, value_enum, default_value_t = KindArg::Both)]
    pub kind: KindArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct ConsolidateArgs {
    /// JSON merge map: `{"groups": [...], "discarded": [...]}`.
    #[arg(long, conflicts_with_all = ["worksheet", "builtin"])]
    pub merge_map: Option<PathBuf>,
    /// Edited worksheet CSV from an earlier run.
    #[arg(long, conflicts_with = "builtin")]
    pub worksheet: Option<PathBuf>,
    /// Write the bundled coffee-shop taxonomy instead.
    #[arg(long)]
    pub builtin: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct ExtractArgs {
    /// Taxonomy document, or `builtin`. Defaults to taxonomy.json in the workdir.
    #[arg(long)]
    pub taxonomy: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Only the first N reviews.
    #[arg(long)]
    pub limit: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LevelArg {
    Attribute,
    Feature,
}

impl From<LevelArg> for Level {
    fn from(l: LevelArg) -> Self {
        match l {
            LevelArg::Attribute => Level::Attribute,
            LevelArg::Feature => Level::Feature,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum ScaleArg {
    #[value(name = "3")]
    Three,
    #[value(name = "5")]
    Five,
}

#[derive(Debug, Args, Serialize)]
pub struct ValidateArgs {
    /// Gold annotations as a review_extraction record file.
    #[arg(long)]
    pub gold: PathBuf,
    /// One or more runs to score; each is named by its file stem.
    #[arg(long = "run", required = true)]
    pub runs: Vec<PathBuf>,
    #[arg(long)]
    pub taxonomy: Option<String>,
    #[arg(long, value_enum, default_value_t = LevelArg::Attribute)]
    pub level: LevelArg,
    #[arg(long, value_enum, default_value_t = ScaleArg::Three)]
    pub scale: ScaleArg,
    #[arg(long, default_value_t = voc_core::agreement::DEFAULT_RESAMPLES)]
    pub resamples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report path; defaults to agreement.json in the workdir.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub taxonomy: Option<String>,
    /// Leave out store, year and join-year fixed effects and elite years.
    #[arg(long)]
    pub no_controls: bool,
    #[arg(long, default_value_t = voc_core::analytics::DEFAULT_MENTION_FLOOR)]
    pub mention_floor: f64,
    #[arg(long, default_value_t = voc_core::analytics::DEFAULT_MIN_SUPPORT)]
    pub min_support: usize,
    /// Succeed even when a rating model cannot be fit.
    #[arg(long)]
    pub allow_partial: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub feature: String,
    /// Limit to these stores; repeatable.
    #[arg(long = "store")]
    pub stores: Vec<String>,
    /// Average over mentioning reviews only.
    #[arg(long)]
    pub mentions_only: bool,
    #[arg(long)]
    pub taxonomy: Option<String>,
    /// Fitted feature-level model; defaults to model_feature.json in the workdir.
    #[arg(long)]
    pub fitted_model: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ServeArgs {
    /// Defaults to snapshot.json in the workdir.
    #[arg(long)]
    pub snapshot: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: SocketAddr,
}

/// A failed pipeline step, with whatever the command recorded before failing.
#[derive(Debug)]
pub struct StepError {
    pub step: String,
    pub message: String,
    pub entry: Option<Box<ManifestEntry>>,
}

fn fail(step: &str) -> impl FnOnce(String) -> StepError + '_ {
    move |message| StepError { step: step.to_string(), message, entry: None }
}

fn at<E: std::fmt::Display>(step: &str) -> impl FnOnce(E) -> StepError + '_ {
    move |e| fail(step)(e.to_string())
}

type StepResult = Result<ManifestEntry, StepError>;

struct Ctx<'a> {
    cli: &'a Cli,
    dir: &'a Path,
}

impl Ctx<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn entry(&self, name: &str, params: &impl Serialize, seed: Option<u64>) -> ManifestEntry {
        let params = match serde_json::to_value(params) {
            Ok(serde_json::Value::Object(m)) => m.into_iter().filter(|(_, v)| !v.is_null()).collect(),
            _ => BTreeMap::new(),
        };
        ManifestEntry { command: name.into(), seed, params, ..Default::default() }
    }

    fn record(&self, entry: &mut ManifestEntry, step: &str, name: &str) -> Result<(), StepError> {
        let hash = file_sha256(&self.path(name)).map_err(at(step))?;
        entry.artifacts.insert(name.to_string(), hash);
        Ok(())
    }

    fn client(&self, step: &str) -> Result<LlmClient, StepError> {
        let backend: Arc<dyn Backend> = match self.cli.backend {
            BackendKind::Http => {
                let cfg = HttpConfig { base_url: self.cli.base_url.clone(), ..HttpConfig::default() };
                Arc::new(HttpBackend::from_env(&cfg).map_err(at(step))?)
            }
            BackendKind::Lexicon => Arc::new(LexiconBackend::new(Lexicon::coffee_shop())),
            BackendKind::Replay => Arc::new(ReplayBackend),
        };
        let cache = ResponseCache::open(self.path(files::CACHE)).map_err(at(step))?;
        Ok(LlmClient::new(backend, cache).with_max_in_flight(self.cli.max_in_flight.max(1)))
    }

    fn reviews(&self, step: &str) -> Result<Vec<Review>, StepError> {
        load_records(&self.path(files::REVIEWS)).map_err(|e| fail(step)(format!("{e} (run `voc ingest` first)")))
    }

    fn extractions(&self, step: &str) -> Result<Vec<ReviewExtraction>, StepError> {
        load_records(&self.path(files::EXTRACTIONS)).map_err(|e| fail(step)(format!("{e} (run `voc extract` first)")))
    }

    fn taxonomy(&self, arg: Option<&str>, step: &str) -> Result<Taxonomy, StepError> {
        match arg {
            Some("builtin") => Ok(Taxonomy::coffee_shop()),
            Some(p) => read_taxonomy(Path::new(p)).map_err(fail(step)),
            None => {
                let p = self.path(files::TAXONOMY);
                if !p.exists() {
                    return Err(fail(step)(format!(
                        "{} not found; run `voc consolidate` or pass --taxonomy builtin",
                        p.display()
                    )));
                }
                read_taxonomy(&p).map_err(fail(step))
            }
        }
    }
}

/// Accepts a taxonomy artifact or a bare `{"attributes": [...]}` document.
fn read_taxonomy(path: &Path) -> Result<Taxonomy, String> {
    load_document::<Taxonomy>(path).or_else(|doc_err| {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {doc_err}; as bare taxonomy: {e}", path.display()))
    })
}

/// Writes `{kind, schema_version, data}` for payloads that are not library
/// artifacts.
fn write_versioned(path: &Path, kind: &str, data: &impl Serialize) -> std::io::Result<()> {
    let doc = serde_json::json!({ "kind": kind, "schema_version": SCHEMA_VERSION, "data": data });
    fs::write(path, serde_json::to_string_pretty(&doc).expect("serializable") + "\n")
}

fn ingest(ctx: &Ctx, a: &IngestArgs) -> StepResult {
    let mut entry = ctx.entry("ingest", a, Some(a.seed));
    let filter = IngestFilter {
        category: a.category.clone(),
        name_contains: a.name_contains.clone(),
        date_from: a.from,
        date_to: a.to,
        sample_size: a.sample,
        seed: a.seed,
    };
    let set = ingest_reviews(&a.source, &SourceLayout::default(), &filter).map_err(at("ingest/read-source"))?;
    let s = &set.stats;
    entry.counts = BTreeMap::from([
        ("malformed_lines".into(), s.malformed_lines),
        ("unjoinable_store".into(), s.unjoinable_store),
        ("unjoinable_reviewer".into(), s.unjoinable_reviewer),
        ("invalid_records".into(), s.invalid_records),
        ("outside_window".into(), s.outside_window),
        ("matched".into(), s.matched),
        ("sampled".into(), s.sampled),
        ("stores".into(), set.stores.len() as u64),
    ]);
    if set.reviews.is_empty() {
        return Err(StepError {
            step: "ingest/filter".into(),
            message: "no reviews matched the filter".into(),
            entry: Some(Box::new(entry)),
        });
    }
    persist_records(&set.reviews, &ctx.path(files::REVIEWS)).map_err(at("ingest/write"))?;
    persist_records(&set.stores, &ctx.path(files::STORES)).map_err(at("ingest/write"))?;
    ctx.record(&mut entry, "ingest/write", files::REVIEWS)?;
    ctx.record(&mut entry, "ingest/write", files::STORES)?;
    println!("{} reviews from {} stores ({} records skipped)", s.sampled, set.stores.len(), s.skipped());
    Ok(entry)
}

fn discover(ctx: &Ctx, a: &DiscoverArgs) -> StepResult {
    let mut entry = ctx.entry("discover", a, Some(a.seed));
    let reviews = ctx.reviews("discover/load-reviews")?;
    let batches = sample_batches(&reviews, a.batches, a.batch_size, a.seed).map_err(at("discover/sample"))?;
    let client = ctx.client("discover/llm-backend")?;
    let kinds = match a.kind {
        KindArg::Attribute => vec![CandidateKind::Attribute],
        KindArg::Feature => vec![CandidateKind::Feature],
        KindArg::Both => vec![CandidateKind::Attribute, CandidateKind::Feature],
    };
    let mut candidates = CandidateSet::default();
    let mut failed = Vec::new();
    for kind in kinds {
        let run = discover_all(&client, &ctx.cli.llm_model, &batches, kind);
        candidates.add(kind, run.all_candidates());
        failed.extend(run.failures.iter().map(|(i, e)| format!("{kind:?} batch {i}: {e}")));
    }
    persist_document(&candidates, &ctx.path(files::CANDIDATES)).map_err(at("discover/write"))?;
    client.cache().compact().map_err(at("discover/write"))?;
    ctx.record(&mut entry, "discover/write", files::CANDIDATES)?;
    let usage = client.usage();
    entry.counts = BTreeMap::from([
        ("batches".into(), batches.len() as u64),
        ("failed_batches".into(), failed.len() as u64),
        ("attribute_candidates".into(), candidates.attributes.len() as u64),
        ("feature_candidates".into(), candidates.features.len() as u64),
        ("llm_calls".into(), usage.calls),
        ("cache_hits".into(), usage.cache_hits),
        ("prompt_tokens".into(), usage.prompt_tokens),
        ("completion_tokens".into(), usage.completion_tokens),
    ]);
    println!(
        "{} attribute and {} feature candidates from {} batches",
        candidates.attributes.len(),
        candidates.features.len(),
        batches.len()
    );
    if !failed.is_empty() {
        entry.params.insert("batch_failures".into(), serde_json::json!(failed));
        return Err(StepError {
            step: "discover/batches".into(),
            message: format!("{} batch calls failed; the rest were kept", failed.len()),
            entry: Some(Box::new(entry)),
        });
    }
    Ok(entry)
}

fn read_merge_map(path: &Path) -> Result<MergeMap, String> {
    load_document::<MergeMap>(path).or_else(|doc_err| {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {doc_err}; as bare merge map: {e}", path.display()))
    })
}

fn consolidate_cmd(ctx: &Ctx, a: &ConsolidateArgs) -> StepResult {
    let mut entry = ctx.entry("consolidate", a, None);
    let step = "consolidate/write";
    if a.builtin {
        persist_document(&Taxonomy::coffee_shop(), &ctx.path(files::TAXONOMY)).map_err(at(step))?;
        ctx.record(&mut entry, step, files::TAXONOMY)?;
        println!("wrote the bundled coffee-shop taxonomy");
        return Ok(entry);
    }
    let candidates: CandidateSet = load_document(&ctx.path(files::CANDIDATES))
        .map_err(|e| fail("consolidate/load-candidates")(format!("{e} (run `voc discover` first)")))?;
    let map = match (&a.merge_map, &a.worksheet) {
        (Some(p), _) => Some(read_merge_map(p).map_err(fail("consolidate/load-merge-map"))?),
        (None, Some(p)) => {
            let f = fs::File::open(p).map_err(at("consolidate/load-worksheet"))?;
            Some(Worksheet::read_csv(f).map_err(at("consolidate/load-worksheet"))?.to_merge_map())
        }
        (None, None) => None,
    };
    match consolidate(&candidates, map.as_ref()).map_err(at("consolidate/apply"))? {
        Consolidation::Worksheet(ws) => {
            let f = fs::File::create(ctx.path(files::WORKSHEET)).map_err(at(step))?;
            ws.write_csv(f).map_err(at(step))?;
            ctx.record(&mut entry, step, files::WORKSHEET)?;
            entry.counts.insert("worksheet_rows".into(), ws.rows.len() as u64);
            println!(
                "no merge map given: wrote {} rows to {}; fill in canonical/attach_to and rerun with --worksheet",
                ws.rows.len(),
                files::WORKSHEET
            );
        }
        Consolidation::Taxonomy(c) => {
            persist_document(&c.taxonomy, &ctx.path(files::TAXONOMY)).map_err(at(step))?;
            write_versioned(&ctx.path(files::TRACE), "consolidation_trace", &c.trace).map_err(at(step))?;
            ctx.record(&mut entry, step, files::TAXONOMY)?;
            ctx.record(&mut entry, step, files::TRACE)?;
            let unmapped = c.unmapped().count() as u64;
            entry.counts = BTreeMap::from([
                ("attributes".into(), c.taxonomy.len() as u64),
                ("candidates".into(), c.trace.len() as u64),
                ("unmapped".into(), unmapped),
            ]);
            for t in c.unmapped() {
                log::warn!("unmapped {:?} candidate `{}`", t.kind, t.candidate);
            }
            println!("taxonomy with {} attributes; {unmapped} candidates unmapped", c.taxonomy.len());
        }
    }
    Ok(entry)
}

fn extract(ctx: &Ctx, a: &ExtractArgs) -> StepResult {
    let mut entry = ctx.entry("extract", a, Some(a.seed));
    let taxonomy = ctx.taxonomy(a.taxonomy.as_deref(), "extract/load-taxonomy")?;
    let mut reviews = ctx.reviews("extract/load-reviews")?;
    if let Some(n) = a.limit {
        reviews.truncate(n);
    }
    let client = ctx.client("extract/llm-backend")?;
    let cfg = ExtractionConfig { model: ctx.cli.llm_model.clone(), seed: a.seed };
    let run = Extractor::new(&client, &taxonomy, cfg).extract_all(&reviews);
    let step = "extract/write";
    persist_records(&run.extractions, &ctx.path(files::EXTRACTIONS)).map_err(at(step))?;
    persist_records(&run.failures, &ctx.path(files::FAILURES)).map_err(at(step))?;
    client.cache().compact().map_err(at(step))?;
    ctx.record(&mut entry, step, files::EXTRACTIONS)?;
    ctx.record(&mut entry, step, files::FAILURES)?;
    let usage = client.usage();
    entry.counts = BTreeMap::from([
        ("reviews".into(), reviews.len() as u64),
        ("extractions".into(), run.extractions.len() as u64),
        ("failures".into(), run.failures.len() as u64),
        ("llm_calls".into(), usage.calls),
        ("cache_hits".into(), usage.cache_hits),
        ("prompt_tokens".into(), usage.prompt_tokens),
        ("completion_tokens".into(), usage.completion_tokens),
    ]);
    println!("{} extractions, {} failures", run.extractions.len(), run.failures.len());
    if !run.failures.is_empty() {
        let first = &run.failures[0];
        return Err(StepError {
            step: "extract/reviews".into(),
            message: format!(
                "{} reviews failed (first: {} at {}: {}); see {}",
                run.failures.len(),
                first.review_id,
                first.step,
                first.message,
                files::FAILURES
            ),
            entry: Some(Box::new(entry)),
        });
    }
    Ok(entry)
}

fn validate(ctx: &Ctx, a: &ValidateArgs) -> StepResult {
    let mut entry = ctx.entry("validate", a, Some(a.seed));
    let taxonomy = ctx.taxonomy(a.taxonomy.as_deref(), "validate/load-taxonomy")?;
    let gold: Vec<ReviewExtraction> = load_records(&a.gold).map_err(at("validate/load-gold"))?;
    let mut runs = BTreeMap::new();
    for p in &a.runs {
        let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| p.display().to_string());
        let records: Vec<ReviewExtraction> = load_records(p).map_err(at("validate/load-run"))?;
        runs.insert(name, records);
    }
    let scale = match a.scale {
        ScaleArg::Three => Scale::Three,
        ScaleArg::Five => Scale::Five,
    };
    let cfg = BootstrapConfig { resamples: a.resamples, seed: a.seed, ..BootstrapConfig::default() };
    let table = compare_variants::<f64>(&runs, &gold, &taxonomy, a.level.into(), scale, &cfg)
        .map_err(at("validate/compare"))?;
    let out = a.out.clone().unwrap_or_else(|| ctx.path(files::AGREEMENT));
    write_versioned(&out, "agreement_report", &table).map_err(at("validate/write"))?;
    entry.artifacts.insert(out.display().to_string(), file_sha256(&out).map_err(at("validate/write"))?);
    entry.counts = BTreeMap::from([("reviews".into(), table.n_reviews as u64), ("variants".into(), table.rows.len() as u64)]);
    print!("{}", table.to_text());
    Ok(entry)
}

fn built_at() -> String {
    let fixed = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.trim().parse::<i64>().ok());
    let t = fixed.and_then(|s| chrono::DateTime::from_timestamp(s, 0)).unwrap_or_else(chrono::Utc::now);
    t.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn analyze(ctx: &Ctx, a: &AnalyzeArgs) -> StepResult {
    let mut entry = ctx.entry("analyze", a, None);
    let taxonomy = ctx.taxonomy(a.taxonomy.as_deref(), "analyze/load-taxonomy")?;
    let reviews = ctx.reviews("analyze/load-reviews")?;
    let stores: Vec<Store> = load_records(&ctx.path(files::STORES)).map_err(at("analyze/load-stores"))?;
    let extractions = ctx.extractions("analyze/load-extractions")?;
    let cfg = SnapshotConfig {
        controls: !a.no_controls,
        mention_floor: a.mention_floor,
        min_support: a.min_support,
        built_at: built_at(),
    };
    let models = fit_models(&extractions, &reviews, &taxonomy, &cfg);
    let model_errors: Vec<String> = models
        .iter()
        .zip(["attribute", "feature"])
        .filter_map(|(m, level)| m.as_ref().err().map(|e| format!("{level}-level model: {e}")))
        .collect();
    let step = "analyze/write";
    for (m, name) in models.iter().zip([files::MODEL_ATTRIBUTE, files::MODEL_FEATURE]) {
        let path = ctx.path(name);
        match m {
            Ok(section) => {
                persist_document(&section.model, &path).map_err(at(step))?;
                ctx.record(&mut entry, step, name)?;
            }
            Err(_) if path.exists() => fs::remove_file(&path).map_err(at(step))?,
            Err(_) => {}
        }
    }
    let snapshot = Snapshot::build(taxonomy, &stores, reviews, extractions, models, &cfg).map_err(at("analyze/snapshot"))?;
    fs::write(ctx.path(files::SNAPSHOT), snapshot.to_json()).map_err(at(step))?;
    fs::write(ctx.path(files::TRENDS), snapshot.body.trends.to_tsv()).map_err(at(step))?;
    ctx.record(&mut entry, step, files::SNAPSHOT)?;
    ctx.record(&mut entry, step, files::TRENDS)?;
    entry.params.insert("snapshot_hash".into(), snapshot.content_hash.clone().into());
    entry.counts = BTreeMap::from([
        ("reviews".into(), snapshot.body.n_reviews as u64),
        ("stores".into(), snapshot.body.stores.len() as u64),
        ("notes".into(), snapshot.body.notes.len() as u64),
    ]);
    for n in &snapshot.body.notes {
        log::warn!("{n}");
    }
    println!("snapshot {} over {} reviews", snapshot.content_hash, snapshot.body.n_reviews);
    if !model_errors.is_empty() && !a.allow_partial {
        return Err(StepError {
            step: "analyze/fit".into(),
            message: format!("{} (rerun with --allow-partial to accept)", model_errors.join("; ")),
            entry: Some(Box::new(entry)),
        });
    }
    Ok(entry)
}

fn simulate(ctx: &Ctx, a: &SimulateArgs) -> StepResult {
    let mut entry = ctx.entry("simulate", a, None);
    let taxonomy = ctx.taxonomy(a.taxonomy.as_deref(), "simulate/load-taxonomy")?;
    let reviews = ctx.reviews("simulate/load-reviews")?;
    let extractions = ctx.extractions("simulate/load-extractions")?;
    let model_path = a.fitted_model.clone().unwrap_or_else(|| ctx.path(files::MODEL_FEATURE));
    let model: FittedModel<f64> = load_document(&model_path)
        .map_err(|e| fail("simulate/load-model")(format!("{e} (run `voc analyze` first)")))?;
    let cfg = UpliftConfig { include_non_mentioning: !a.mentions_only, ..UpliftConfig::default() };
    let scope = (!a.stores.is_empty()).then_some(a.stores.as_slice());
    let report = simulate_uplift(&extractions, &reviews, &taxonomy, &model, &a.feature, scope, &cfg)
        .map_err(at("simulate/run"))?;
    let step = "simulate/write";
    write_versioned(&ctx.path(files::IMPACT), "impact_report", &report).map_err(at(step))?;
    let tsv = report.to_tsv();
    fs::write(ctx.path(files::IMPACT_TSV), &tsv).map_err(at(step))?;
    ctx.record(&mut entry, step, files::IMPACT)?;
    ctx.record(&mut entry, step, files::IMPACT_TSV)?;
    entry.counts.insert("stores".into(), report.stores.len() as u64);
    print!("{tsv}");
    Ok(entry)
}

fn serve_cmd(ctx: &Ctx, a: &ServeArgs) -> StepResult {
    let mut entry = ctx.entry("serve", a, None);
    let path = a.snapshot.clone().unwrap_or_else(|| ctx.path(files::SNAPSHOT));
    let snapshot = Snapshot::load(&path).map_err(at("serve/load-snapshot"))?;
    entry.params.insert("snapshot_hash".into(), snapshot.content_hash.clone().into());
    let rt = tokio::runtime::Runtime::new().map_err(at("serve/runtime"))?;
    let listener = rt.block_on(tokio::net::TcpListener::bind(a.bind)).map_err(|e| StepError {
        step: "serve/bind".into(),
        message: format!("cannot bind {}: {e}", a.bind),
        entry: Some(Box::new(entry.clone())),
    })?;
    append_manifest(&ctx.path(files::MANIFEST), &entry).map_err(at("serve/manifest"))?;
    let addr = listener.local_addr().map_err(at("serve/bind"))?;
    println!("serving snapshot {} on http://{addr}/api/v1", snapshot.content_hash);
    let app = crate::server::router(Arc::new(snapshot));
    rt.block_on(async move { axum::serve(listener, app).await }).map_err(at("serve/run"))?;
    Ok(entry)
}

fn execute(cli: &Cli, dir: &Path) -> StepResult {
    let ctx = Ctx { cli, dir };
    match &cli.command {
        Command::Ingest(a) => ingest(&ctx, a),
        Command::Discover(a) => discover(&ctx, a),
        Command::Consolidate(a) => consolidate_cmd(&ctx, a),
        Command::Extract(a) => extract(&ctx, a),
        Command::Validate(a) => validate(&ctx, a),
        Command::Analyze(a) => analyze(&ctx, a),
        Command::Simulate(a) => simulate(&ctx, a),
        Command::Serve(a) => serve_cmd(&ctx, a),
    }
}

/// Parses `args` and runs the command. Usage errors exit with 2, pipeline
/// failures with 1 after naming the failed step.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().try_init();

    let dir = cli.workdir.clone();
    if let Err(e) = fs::create_dir_all(&dir) {
        eprintln!("error: cannot create working directory {}: {e}", dir.display());
        return ExitCode::from(1);
    }
    let manifest = dir.join(files::MANIFEST);
    match execute(&cli, &dir) {
        Ok(entry) => {
            if matches!(cli.command, Command::Serve(_)) {
                return ExitCode::SUCCESS;
            }
            if let Err(e) = append_manifest(&manifest, &entry) {
                eprintln!("error: step `manifest` failed: {e}");
                return ExitCode::from(1);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: step `{}` failed: {}", e.step, e.message);
            let mut entry = e.entry.map(|b| *b).unwrap_or_else(|| ManifestEntry { command: cli.command.name().into(), ..Default::default() });
            entry.failed_step = Some(e.step);
            if let Err(m) = append_manifest(&manifest, &entry) {
                eprintln!("error: could not append to manifest: {m}");
            }
            ExitCode::from(1)
        }
    }
}
