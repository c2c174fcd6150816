use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use autocut_core::assembly::{
    render_commands, subtitles, EditDecisionList, EditMode, Editor, RenderNames, Strategy,
};
use autocut_core::catalog::{dataset_stats, filter_sft, load_catalog, save_catalog, LoadOptions, Modality};
use autocut_core::evaluation::report::relevance_request;
use autocut_core::evaluation::{evaluate, Cassette, EvalSet, HttpTransport, Judge, Templates};
use autocut_core::quantizer::{train_quantizer, QuantizerMode};
use autocut_core::retrieval::{IndexMode, IndexSet, MediaKind, VectorIndex};
use autocut_core::tokenspace::{
    build_sft_corpus, serialize_alignment_sample, AlignOutcome, SftTask, Tokenizer, Vocabulary,
};
use autocut_core::{assembly, Catalog, QuantizerModel};
use clap::{Args, Subcommand, ValueEnum};
use serde_json::json;
use tracing::{info, warn};

use crate::config::PipelineConfig;
use crate::failure::Failure;
use crate::output::{Outputs, Plan};
use crate::Command;

pub struct Context {
    pub cfg: PipelineConfig,
    pub dry_run: bool,
    pub subcommand: &'static str,
}

type Run = Result<(), Failure>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModalityArg {
    Video,
    Audio,
}

impl From<ModalityArg> for Modality {
    fn from(m: ModalityArg) -> Self {
        match m {
            ModalityArg::Video => Modality::Video,
            ModalityArg::Audio => Modality::Audio,
        }
    }
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Fill missing clip relevance scores with the judge.
    #[arg(long)]
    pub score_relevance: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub modality: ModalityArg,
    /// raw_rvq or rqvae.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long)]
    pub codebook_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    #[arg(long, value_enum)]
    pub modality: ModalityArg,
}

#[derive(Debug, Subcommand)]
pub enum IndexCommand {
    /// Build frame, clip and audio indexes over the catalog.
    Build(IndexBuildArgs),
    /// Nearest neighbours of one vector.
    Query(IndexQueryArgs),
}

#[derive(Debug, Args)]
pub struct IndexBuildArgs {
    /// flat or partitioned.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub n_lists: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Frame,
    Clip,
    Audio,
}

#[derive(Debug, Args)]
pub struct IndexQueryArgs {
    /// JSON array or whitespace/comma separated numbers.
    #[arg(long)]
    pub vector_file: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, value_enum, default_value = "clip")]
    pub kind: KindArg,
    #[arg(long)]
    pub n_probe: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    /// Restrict to these source videos.
    #[arg(long = "photo-id")]
    pub photo_ids: Vec<String>,
}

#[derive(Debug, Args)]
pub struct SftArgs {
    /// all, select, sort, script or bgm.
    #[arg(long, default_value = "all")]
    pub task: String,
}

#[derive(Debug, Args)]
pub struct EditArgs {
    /// script-driven or footage-driven.
    #[arg(long)]
    pub mode: Option<String>,
    /// by-frame or by-clip.
    #[arg(long)]
    pub strategy: Option<String>,
    /// Ads to edit; every ad when omitted.
    #[arg(long = "photo-id")]
    pub photo_ids: Vec<String>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub edl: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Evaluation set; defaults to the configured eval_input.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Answer judged metrics only from this cassette.
    #[arg(long)]
    pub replay: Option<PathBuf>,
    /// Call the live judge, recording to the configured cassette.
    #[arg(long, conflicts_with = "replay")]
    pub live: bool,
    /// Native metrics only.
    #[arg(long, conflicts_with_all = ["replay", "live"])]
    pub no_judge: bool,
}

pub fn run(ctx: &Context, command: Command) -> Run {
    match command {
        Command::Ingest(a) => ingest(ctx, &a),
        Command::Filter => filter(ctx),
        Command::Stats => stats(ctx),
        Command::TrainQuantizer(a) => train(ctx, &a),
        Command::Encode(a) => encode(ctx, &a),
        Command::Index(IndexCommand::Build(a)) => index_build(ctx, &a),
        Command::Index(IndexCommand::Query(a)) => index_query(ctx, &a),
        Command::Segment(a) => segment(ctx, &a),
        Command::BuildAlign => build_align(ctx),
        Command::BuildSft(a) => build_sft(ctx, &a),
        Command::Edit(a) => edit(ctx, &a),
        Command::RenderScript(a) => render_script(ctx, &a),
        Command::Evaluate(a) => evaluate_cmd(ctx, &a),
    }
}

fn show(p: &Path) -> String {
    p.display().to_string()
}

/// Prints the plan and stops on dry runs; otherwise commits the outputs.
fn finish(ctx: &Context, reads: Vec<String>, outputs: Outputs, details: serde_json::Value) -> Run {
    if ctx.dry_run {
        return print_plan(ctx, reads, outputs.paths(), details);
    }
    outputs.commit()?;
    Ok(())
}

fn print_plan(ctx: &Context, reads: Vec<String>, writes: Vec<String>, details: serde_json::Value) -> Run {
    let plan = Plan {
        subcommand: ctx.subcommand,
        reads,
        writes,
        details,
    };
    println!("{}", serde_json::to_string_pretty(&plan).map_err(|e| Failure::data(e.to_string()))?);
    Ok(())
}

fn load(ctx: &Context) -> Result<Catalog, Failure> {
    let cfg = &ctx.cfg;
    let options = LoadOptions {
        video_dim: Some(cfg.video_quantizer.input_dim),
        audio_dim: Some(cfg.audio_quantizer.input_dim),
    };
    let catalog = load_catalog(&cfg.paths.catalog, options)?;
    info!(
        catalog = %cfg.paths.catalog.display(),
        ads = catalog.records.len(),
        frames = catalog.video.rows(),
        "catalog loaded"
    );
    Ok(catalog)
}

fn load_model(ctx: &Context, modality: Modality) -> Result<QuantizerModel, Failure> {
    let path = ctx.cfg.model_path(modality);
    let model = QuantizerModel::load(&path)?;
    if model.modality() != modality {
        return Err(Failure::data(format!("{} holds a {} quantizer", path.display(), model.modality().as_str())));
    }
    Ok(model)
}

/// The audio quantizer when one has been trained.
fn load_audio_model(ctx: &Context) -> Result<Option<QuantizerModel>, Failure> {
    let path = ctx.cfg.model_path(Modality::Audio);
    if path.exists() {
        load_model(ctx, Modality::Audio).map(Some)
    } else {
        warn!(path = %path.display(), "no audio quantizer; music steps are skipped");
        Ok(None)
    }
}

fn judge(ctx: &Context, replay_override: Option<&Path>, live: bool) -> Result<Judge, Failure> {
    let settings = &ctx.cfg.judge;
    let templates = match &ctx.cfg.paths.templates {
        Some(dir) => Templates::load(dir)?,
        None => Templates::bundled(),
    };
    if let Some(path) = replay_override {
        if !path.exists() {
            return Err(Failure::config(format!("replay cassette {} does not exist", path.display())));
        }
        return Ok(Judge::replay(templates, Cassette::open(path)?));
    }
    if settings.replay && !live {
        let path = settings
            .cassette
            .as_ref()
            .ok_or_else(|| Failure::config("[judge] replay needs a cassette path"))?;
        if !path.exists() {
            return Err(Failure::config(format!("replay cassette {} does not exist", path.display())));
        }
        return Ok(Judge::replay(templates, Cassette::open(path)?));
    }
    let mut transport = HttpTransport::from_env()?;
    transport.timeout = Duration::from_secs(settings.timeout_secs);
    transport.attempts = settings.attempts;
    transport.backoff = Duration::from_millis(settings.backoff_ms);
    let cassette = match &settings.cassette {
        Some(path) if !ctx.dry_run => Cassette::open(path)?,
        _ => Cassette::in_memory(),
    };
    Ok(Judge::live(templates, cassette, Box::new(transport)))
}

fn ingest(ctx: &Context, args: &IngestArgs) -> Run {
    let mut catalog = load(ctx)?;
    let dest = ctx.cfg.paths.out.join("catalog");
    let reads = vec![show(&ctx.cfg.paths.catalog)];
    let mut writes = vec![show(&dest)];
    let report_path = ctx.cfg.paths.out.join("ingest.json");
    writes.push(show(&report_path));
    let unscored = catalog
        .records
        .iter()
        .flat_map(|r| &r.clips)
        .filter(|c| c.relevance_score.is_none())
        .count();
    if ctx.dry_run {
        return print_plan(ctx, reads, writes, json!({"ads": catalog.records.len(), "unscored_clips": unscored}));
    }
    let mut scored = 0usize;
    if args.score_relevance && unscored > 0 {
        let judge = judge(ctx, None, false)?;
        let mut records = catalog.records.clone();
        for clip in records.iter_mut().flat_map(|r| r.clips.iter_mut()) {
            if clip.relevance_score.is_some() {
                continue;
            }
            let Some(first) = clip.frame_keys.iter().min() else {
                warn!(clip = %clip.clip_id, "clip has no frames to score");
                continue;
            };
            let response = judge.judge(&relevance_request(first, &clip.script_line))?;
            if let Some(s) = response.score {
                clip.relevance_score = Some(s as u8);
                scored += 1;
            } else {
                warn!(clip = %clip.clip_id, ?response.status, "relevance reply rejected");
            }
        }
        catalog = catalog.with_records(records);
    }
    let report = json!({
        "ads": catalog.records.len(),
        "clips": catalog.records.iter().map(|r| r.clips.len()).sum::<usize>(),
        "video_rows": catalog.video.rows(),
        "audio_rows": catalog.audio.as_ref().map_or(0, |a| a.rows()),
        "bgm_tracks": catalog.bgm_tracks().len(),
        "unscored_clips": unscored - scored,
        "scored_by_judge": scored,
    });
    // the catalog writer stages into a sibling directory then swaps it in
    let staging = ctx.cfg.paths.out.join(".catalog.partial");
    let _ = std::fs::remove_dir_all(&staging);
    save_catalog(&catalog, &staging).inspect_err(|_| {
        let _ = std::fs::remove_dir_all(&staging);
    })?;
    let _ = std::fs::remove_dir_all(&dest);
    std::fs::rename(&staging, &dest).map_err(|e| Failure::data(format!("moving catalog into {}: {e}", dest.display())))?;
    let mut outputs = Outputs::default();
    outputs.add_json(report_path, &report)?;
    outputs.commit()?;
    Ok(())
}

fn filter(ctx: &Context) -> Run {
    let catalog = load(ctx)?;
    let dest = ctx.cfg.paths.out.join("filtered");
    let report_path = ctx.cfg.paths.out.join("filter_report.json");
    let (kept, report) = filter_sft(&catalog, &ctx.cfg.filter)?;
    info!(kept = report.kept_count, input = report.input_count, "filter applied");
    if ctx.dry_run {
        return print_plan(
            ctx,
            vec![show(&ctx.cfg.paths.catalog)],
            vec![show(&dest), show(&report_path)],
            json!({"rules": ctx.cfg.filter, "report": report}),
        );
    }
    let staging = ctx.cfg.paths.out.join(".filtered.partial");
    let _ = std::fs::remove_dir_all(&staging);
    save_catalog(&kept, &staging)?;
    let _ = std::fs::remove_dir_all(&dest);
    std::fs::rename(&staging, &dest).map_err(|e| Failure::data(format!("moving catalog into {}: {e}", dest.display())))?;
    let mut outputs = Outputs::default();
    outputs.add_json(report_path, &report)?;
    outputs.commit()?;
    Ok(())
}

fn stats(ctx: &Context) -> Run {
    let catalog = load(ctx)?;
    let mut outputs = Outputs::default();
    outputs.add_json(ctx.cfg.paths.out.join("stats.json"), &dataset_stats(&catalog.records))?;
    finish(ctx, vec![show(&ctx.cfg.paths.catalog)], outputs, serde_json::Value::Null)
}

fn train(ctx: &Context, args: &TrainArgs) -> Run {
    let modality = Modality::from(args.modality);
    let mut cfg = ctx.cfg.quantizer(modality).clone();
    if let Some(mode) = &args.mode {
        cfg = cfg.with_mode(mode.parse::<QuantizerMode>()?);
    }
    if let Some(l) = args.levels {
        cfg.levels = l;
    }
    if let Some(k) = args.codebook_size {
        cfg.codebook_size = k;
    }
    if let Some(e) = args.epochs {
        cfg.max_epochs = e;
    }
    cfg.validate()?;
    let catalog = load(ctx)?;
    let matrix = match modality {
        Modality::Video => (*catalog.video).clone(),
        Modality::Audio => (**catalog
            .audio
            .as_ref()
            .ok_or_else(|| Failure::data("catalog has no audio embeddings"))?)
        .clone(),
    };
    let model_path = ctx.cfg.model_path(modality);
    let log_path = ctx.cfg.paths.models.join(format!("training.{}.json", modality.as_str()));
    let reads = vec![show(&ctx.cfg.paths.catalog)];
    if ctx.dry_run {
        return print_plan(ctx, reads, vec![show(&model_path), show(&log_path)], json!({"config": cfg, "rows": matrix.rows()}));
    }
    let model = train_quantizer(&matrix, &cfg)?;
    let report = model.reconstruction_report(&matrix)?;
    info!(modality = modality.as_str(), mean_cos_sim = report.mean_cos_sim, "quantizer trained");
    let mut outputs = Outputs::default();
    outputs.add(&model_path, model.to_bytes()?);
    outputs.add_json(
        log_path,
        &json!({
            "config": cfg,
            "training_log": model.training_log,
            "final_loss": model.final_loss,
            "reconstruction": report,
        }),
    )?;
    outputs.commit()?;
    Ok(())
}

fn vocabulary(video: &QuantizerModel, audio: Option<&QuantizerModel>, ctx: &Context) -> Vocabulary {
    Vocabulary::new(&video.config, audio.map_or(&ctx.cfg.audio_quantizer, |a| &a.config))
}

fn encode(ctx: &Context, args: &EncodeArgs) -> Run {
    let modality = Modality::from(args.modality);
    let catalog = load(ctx)?;
    let model = load_model(ctx, modality)?;
    let (video, audio) = match modality {
        Modality::Video => (model.clone(), load_audio_model(ctx)?),
        Modality::Audio => (load_model(ctx, Modality::Video)?, Some(model.clone())),
    };
    let vocab = vocabulary(&video, audio.as_ref(), ctx);
    let matrix = match modality {
        Modality::Video => (*catalog.video).clone(),
        Modality::Audio => catalog
            .pooled_bgm_matrix()?
            .ok_or_else(|| Failure::data("catalog has no audio embeddings"))?,
    };
    let path = ctx.cfg.paths.out.join(format!("codes.{}.jsonl", modality.as_str()));
    let reads = vec![show(&ctx.cfg.paths.catalog), show(&ctx.cfg.model_path(modality))];
    if ctx.dry_run {
        return print_plan(ctx, reads, vec![show(&path)], json!({"rows": matrix.rows()}));
    }
    let groups = model.encode_matrix(&matrix)?;
    let mut lines = Vec::with_capacity(groups.len());
    for (key, g) in matrix.row_keys().iter().zip(&groups) {
        lines.push(json!({"key": key, "codes": g.codes, "tokens": vocab.render_group(g)?}));
    }
    let mut outputs = Outputs::default();
    outputs.add_jsonl(path, &lines)?;
    outputs.commit()?;
    Ok(())
}

fn index_mode(ctx: &Context, args: &IndexBuildArgs) -> Result<IndexMode, Failure> {
    match args.mode.as_deref() {
        None => Ok(match ctx.cfg.index_mode {
            IndexMode::Partitioned { n_lists } => IndexMode::Partitioned {
                n_lists: args.n_lists.or(n_lists),
            },
            IndexMode::Flat => IndexMode::Flat,
        }),
        Some("flat") => Ok(IndexMode::Flat),
        Some("partitioned") => Ok(IndexMode::Partitioned { n_lists: args.n_lists }),
        Some(other) => Err(Failure::config(format!("unknown index mode `{other}`"))),
    }
}

fn index_build(ctx: &Context, args: &IndexBuildArgs) -> Run {
    let mode = index_mode(ctx, args)?;
    let catalog = load(ctx)?;
    let dir = &ctx.cfg.paths.indexes;
    let mut names = vec![MediaKind::Frame, MediaKind::Clip];
    if catalog.audio.is_some() {
        names.push(MediaKind::Audio);
    }
    let files: Vec<PathBuf> = names.iter().map(|&k| dir.join(autocut_core::retrieval::index_file_name(k))).collect();
    if ctx.dry_run {
        return print_plan(ctx, vec![show(&ctx.cfg.paths.catalog)], files.iter().map(|p| show(p)).collect(), json!({"mode": mode}));
    }
    let mut set = IndexSet::build(&catalog, mode, ctx.cfg.seed)?;
    if let Some(n) = ctx.cfg.n_probe {
        set.frame.set_n_probe(n);
        set.clip.set_n_probe(n);
        if let Some(a) = set.audio.as_mut() {
            a.set_n_probe(n);
        }
    }
    let mut outputs = Outputs::default();
    outputs.add(&files[0], set.frame.to_bytes()?);
    outputs.add(&files[1], set.clip.to_bytes()?);
    if let Some(a) = &set.audio {
        outputs.add(&files[2], a.to_bytes()?);
    }
    outputs.commit()?;
    Ok(())
}

fn read_vector(path: &Path) -> Result<Vec<f32>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    if let Ok(v) = serde_json::from_str::<Vec<f32>>(&text) {
        return Ok(v);
    }
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f32>().map_err(|_| Failure::data(format!("{}: `{t}` is not a number", path.display()))))
        .collect()
}

fn index_query(ctx: &Context, args: &IndexQueryArgs) -> Run {
    let kind = match args.kind {
        KindArg::Frame => MediaKind::Frame,
        KindArg::Clip => MediaKind::Clip,
        KindArg::Audio => MediaKind::Audio,
    };
    let path = ctx.cfg.paths.indexes.join(autocut_core::retrieval::index_file_name(kind));
    let vector = read_vector(&args.vector_file)?;
    let mut index: VectorIndex<f32> = VectorIndex::load(&path)?;
    if let Some(n) = args.n_probe.or(ctx.cfg.n_probe) {
        index.set_n_probe(n);
    }
    if ctx.dry_run {
        return print_plan(ctx, vec![show(&path), show(&args.vector_file)], vec![], json!({"k": args.k, "dim": index.dim()}));
    }
    let result = index.query(&vector, args.k)?;
    let text = serde_json::to_string_pretty(&json!({
        "kind": kind,
        "k": args.k,
        "truncated": result.truncated,
        "hits": result.hits,
    }))
    .map_err(|e| Failure::data(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn segment(ctx: &Context, args: &SegmentArgs) -> Run {
    let catalog = load(ctx)?;
    let ids: Vec<String> = if args.photo_ids.is_empty() {
        catalog.records.iter().map(|r| r.photo_id.clone()).collect()
    } else {
        args.photo_ids.clone()
    };
    let path = ctx.cfg.paths.out.join("segments.jsonl");
    let mut lines = Vec::with_capacity(ids.len());
    for id in &ids {
        let segs = assembly::segment_video(&catalog, id, &ctx.cfg.segment)?;
        let spans: Vec<[usize; 2]> = segs.iter().map(|s| [s.start_frame, s.end_frame]).collect();
        lines.push(json!({"photo_id": id, "fps": ctx.cfg.segment.fps, "segments": spans}));
    }
    let mut outputs = Outputs::default();
    outputs.add_jsonl(path, &lines)?;
    finish(ctx, vec![show(&ctx.cfg.paths.catalog)], outputs, json!({"videos": ids.len(), "config": ctx.cfg.segment}))
}

fn build_align(ctx: &Context) -> Run {
    let catalog = load(ctx)?;
    let video = load_model(ctx, Modality::Video)?;
    let audio = load_audio_model(ctx)?;
    let text_path = ctx.cfg.paths.out.join("align.txt");
    let skip_path = ctx.cfg.paths.out.join("align_skipped.json");
    let reads = vec![show(&ctx.cfg.paths.catalog), show(&ctx.cfg.model_path(Modality::Video))];
    if ctx.dry_run {
        return print_plan(ctx, reads, vec![show(&text_path), show(&skip_path)], json!({"ads": catalog.records.len()}));
    }
    let tok = Tokenizer::new(&catalog, &video, audio.as_ref())?;
    let mut text = String::new();
    let mut skipped = Vec::new();
    for ad in &catalog.records {
        match serialize_alignment_sample(&tok, ad)? {
            AlignOutcome::Sample(s) => {
                text.push_str(&s.text);
                text.push('\n');
            }
            AlignOutcome::Skipped { photo_id, reason } => skipped.push(json!({"photo_id": photo_id, "reason": reason})),
        }
    }
    info!(samples = catalog.records.len() - skipped.len(), skipped = skipped.len(), "alignment corpus built");
    let mut outputs = Outputs::default();
    outputs.add(text_path, text);
    outputs.add_json(skip_path, &skipped)?;
    outputs.commit()?;
    Ok(())
}

fn parse_tasks(spec: &str) -> Result<Vec<SftTask>, Failure> {
    if spec == "all" {
        return Ok(SftTask::ALL.to_vec());
    }
    spec.split(',').map(|t| t.trim().parse::<SftTask>().map_err(Failure::from)).collect()
}

fn build_sft(ctx: &Context, args: &SftArgs) -> Run {
    let tasks = parse_tasks(&args.task)?;
    let catalog = load(ctx)?;
    let video = load_model(ctx, Modality::Video)?;
    let audio = load_audio_model(ctx)?;
    let corpus_path = ctx.cfg.paths.out.join("sft.jsonl");
    let skip_path = ctx.cfg.paths.out.join("sft_skipped.json");
    let reads = vec![show(&ctx.cfg.paths.catalog), show(&ctx.cfg.model_path(Modality::Video))];
    if ctx.dry_run {
        let names: Vec<&str> = tasks.iter().map(|t| t.as_str()).collect();
        return print_plan(ctx, reads, vec![show(&corpus_path), show(&skip_path)], json!({"tasks": names, "seed": ctx.cfg.seed}));
    }
    let tok = Tokenizer::new(&catalog, &video, audio.as_ref())?;
    let (samples, skipped) = build_sft_corpus(&tok, &catalog.records, &tasks, ctx.cfg.seed);
    info!(samples = samples.len(), skipped = skipped.len(), "fine-tuning corpus built");
    let skipped: Vec<_> = skipped
        .iter()
        .map(|s| json!({"photo_id": s.photo_id, "task": s.task.as_str(), "reason": s.reason}))
        .collect();
    let mut outputs = Outputs::default();
    outputs.add_jsonl(corpus_path, &samples)?;
    outputs.add_json(skip_path, &skipped)?;
    outputs.commit()?;
    Ok(())
}

fn fill(pattern: &str, id: &str) -> String {
    pattern.replace("{id}", id)
}

/// Media file for every source video and music track the list uses.
fn media_paths(ctx: &Context, edl: &EditDecisionList) -> BTreeMap<String, String> {
    let mut map = BTreeMap::new();
    for e in &edl.entries {
        map.insert(e.photo_id.clone(), fill(&ctx.cfg.media.video_pattern, &e.photo_id));
    }
    if let Some(b) = &edl.bgm {
        map.insert(b.as_str().to_string(), fill(&ctx.cfg.media.audio_pattern, b.as_str()));
    }
    map
}

fn add_render(ctx: &Context, outputs: &mut Outputs, dir: &Path, stem: &str, edl: &EditDecisionList) -> Run {
    let names = RenderNames {
        subtitles: format!("{stem}.srt"),
        output: format!("{stem}.mp4"),
    };
    let commands = render_commands(edl, &media_paths(ctx, edl), &names)?;
    outputs.add(dir.join(&names.subtitles), subtitles(edl));
    outputs.add(dir.join(format!("{stem}.render.txt")), commands);
    Ok(())
}

fn edit(ctx: &Context, args: &EditArgs) -> Run {
    let mode: EditMode = match &args.mode {
        Some(m) => m.parse()?,
        None => ctx.cfg.edit.mode,
    };
    let strategy: Strategy = match &args.strategy {
        Some(s) => s.parse()?,
        None => ctx.cfg.edit.strategy,
    };
    let catalog = load(ctx)?;
    let video = load_model(ctx, Modality::Video)?;
    let audio = load_audio_model(ctx)?;
    let mut indexes: IndexSet<f32> = IndexSet::load(&ctx.cfg.paths.indexes)?;
    if let Some(n) = ctx.cfg.n_probe {
        indexes.clip.set_n_probe(n);
        if let Some(a) = indexes.audio.as_mut() {
            a.set_n_probe(n);
        }
    }
    let ids: Vec<String> = if args.photo_ids.is_empty() {
        catalog.records.iter().map(|r| r.photo_id.clone()).collect()
    } else {
        args.photo_ids.clone()
    };
    let dir = ctx.cfg.paths.out.join("edits");
    let reads = vec![
        show(&ctx.cfg.paths.catalog),
        show(&ctx.cfg.model_path(Modality::Video)),
        show(&ctx.cfg.paths.indexes),
    ];
    let editor = Editor {
        catalog: &catalog,
        indexes: &indexes,
        video_quantizer: &video,
        audio_quantizer: audio.as_ref(),
        segment_config: ctx.cfg.segment.clone(),
    };
    let mut outputs = Outputs::default();
    for id in &ids {
        if ctx.dry_run {
            for ext in ["edl.json", "srt", "render.txt"] {
                outputs.add(dir.join(format!("{id}.{ext}")), Vec::new());
            }
            continue;
        }
        let result = editor.edit(id, mode, strategy)?;
        outputs.add_json(dir.join(format!("{id}.edl.json")), &result)?;
        add_render(ctx, &mut outputs, &dir, id, &result.edl)?;
    }
    finish(ctx, reads, outputs, json!({"mode": mode, "strategy": strategy, "ads": ids.len()}))
}

fn render_script(ctx: &Context, args: &RenderArgs) -> Run {
    let text = std::fs::read_to_string(&args.edl).map_err(|e| Failure::data(format!("{}: {e}", args.edl.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Failure::data(format!("{}: {e}", args.edl.display())))?;
    // accept a bare list or the `edit` output wrapping one
    let edl_value = value.get("edl").cloned().unwrap_or(value);
    let edl: EditDecisionList =
        serde_json::from_value(edl_value).map_err(|e| Failure::data(format!("{}: {e}", args.edl.display())))?;
    edl.validate()?;
    let stem = args
        .edl
        .file_name()
        .and_then(|n| n.to_str())
        .map(|n| n.trim_end_matches(".json").trim_end_matches(".edl").to_string())
        .unwrap_or_else(|| "edit".into());
    let mut outputs = Outputs::default();
    add_render(ctx, &mut outputs, &ctx.cfg.paths.out.join("render"), &stem, &edl)?;
    finish(ctx, vec![show(&args.edl)], outputs, json!({"entries": edl.entries.len()}))
}

fn evaluate_cmd(ctx: &Context, args: &EvaluateArgs) -> Run {
    let input = args
        .input
        .clone()
        .or_else(|| ctx.cfg.paths.eval_input.clone())
        .ok_or_else(|| Failure::config("evaluate needs --input or [paths] eval_input"))?;
    let text = std::fs::read_to_string(&input).map_err(|e| Failure::data(format!("{}: {e}", input.display())))?;
    let set: EvalSet = serde_json::from_str(&text).map_err(|e| Failure::data(format!("{}: {e}", input.display())))?;
    let judge = if args.no_judge {
        None
    } else {
        Some(judge(ctx, args.replay.as_deref(), args.live)?)
    };
    let path = ctx.cfg.paths.out.join("report.json");
    if ctx.dry_run {
        return print_plan(
            ctx,
            vec![show(&input)],
            vec![show(&path)],
            json!({"replay": judge.as_ref().map(|j| j.is_replay()), "scripts": set.scripts.len()}),
        );
    }
    let report = evaluate(&set, judge.as_ref())?;
    let mut outputs = Outputs::default();
    outputs.add(path, report.to_json()?);
    outputs.commit()?;
    Ok(())
}
