//! `patchforge` command line.
//!
//! Each stage reads the files written by the one before it, so a corpus can
//! be pushed through one step at a time or all at once with `run`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use tracing::{info, warn};
use tracing_subscriber::EnvFilter;

use patchforge::curation::{HttpEmbedder, PatchRmsDistance, API_KEY_ENV};
use patchforge::dataset::{
    emit_vqa_artifact, emit_vqa_clean, read_jsonl, ArtifactRecord, JsonlWriter, VqaSample,
};
use patchforge::evaluation::{
    benchmark_from_records, evaluate, Aggregation, BenchmarkEntry, Embedder, EvalOptions,
    Prediction,
};
use patchforge::injection::PixelImage;
use patchforge::perception::GroundingThresholds;
use patchforge::pipeline::{
    build_record, curate, inject, perceive, plan_candidates, plan_jobs, render_overlays,
    run_pipeline, synthesize, write_demo_corpus, CurationReport, Job, PerceivedScene,
    PipelineConfig, PipelineError, RecordPaths, DEMO_PATCH_PX,
};
use patchforge::toolbox::MappingExport;
use patchforge::Tool;

/// Exit code for an invalid configuration or invocation.
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(
    name = "patchforge",
    version,
    about = "Synthesize, curate and score structural-artifact image pairs"
)]
struct Cli {
    /// Log filter, e.g. `info` or `patchforge=debug`. Overrides RUST_LOG.
    #[arg(long, global = true)]
    log_level: Option<String>,
    /// Log line format on stderr.
    #[arg(long, global = true, value_enum, default_value_t = LogFormat::Text)]
    log_format: LogFormat,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum LogFormat {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum AggregationArg {
    PerImageMean,
    Micro,
}

#[derive(Subcommand)]
enum Command {
    /// Ground a scene manifest onto the patch grid.
    Perceive {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 16)]
        patch_px: u32,
        #[arg(long, default_value_t = 0.5)]
        patch_fg: f64,
        #[arg(long, default_value_t = 0.5)]
        containment: f64,
        /// Output grounded scene (JSON).
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one tool on a grounded scene and write its mapping export.
    Synthesize {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, value_parser = parse_tool)]
        tool: Tool,
        /// Index into the tool's candidates; seeded choice when omitted.
        #[arg(long)]
        candidate: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Take tool parameters and schedule from this pipeline config.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output mapping export (JSON).
        #[arg(long)]
        out: PathBuf,
        /// Output job description; defaults to `<out>.job.json`.
        #[arg(long)]
        job_out: Option<PathBuf>,
    },
    /// Render a mapping export onto the clean image.
    Inject {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        mapping: PathBuf,
        #[arg(long, default_value_t = 0)]
        blend: u32,
        /// Output artifact image (PNG).
        #[arg(long)]
        out: PathBuf,
    },
    /// Gate and explain one injected image.
    Curate {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        job: PathBuf,
        #[arg(long)]
        mapping: PathBuf,
        #[arg(long)]
        artifact: PathBuf,
        /// Thresholds and judge client from this pipeline config.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output curation report (JSON).
        #[arg(long)]
        out: PathBuf,
    },
    /// Append an accepted injection to a dataset directory.
    Emit {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        job: PathBuf,
        #[arg(long)]
        mapping: PathBuf,
        #[arg(long)]
        artifact: PathBuf,
        #[arg(long)]
        curation: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Score predictions against a benchmark.
    Evaluate {
        /// Ground truth, one benchmark entry per line.
        #[arg(long, conflicts_with = "records", required_unless_present = "records")]
        benchmark: Option<PathBuf>,
        /// Derive the ground truth from emitted records instead.
        #[arg(long)]
        records: Option<PathBuf>,
        /// Predictions, one per line.
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long, value_enum, default_value_t = AggregationArg::PerImageMean)]
        aggregation: AggregationArg,
        #[arg(long, default_value_t = 0.5)]
        heat_threshold: f64,
        /// Embedding service for explanation similarity.
        #[arg(long, requires = "embed_model")]
        embed_endpoint: Option<String>,
        #[arg(long)]
        embed_model: Option<String>,
        #[arg(long, default_value_t = 60_000)]
        embed_timeout_ms: u64,
        /// Report path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every stage over a corpus.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        parallelism: Option<usize>,
        /// One job per applicable tool instead of one per image.
        #[arg(long)]
        expand_all_tools: bool,
    },
    /// Draw a record's target and reference patches on its clean image.
    Overlay {
        /// Output directory of a run (or an `emit` target).
        #[arg(long)]
        run_dir: PathBuf,
        #[arg(long)]
        record_id: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a small synthetic corpus and a config that runs it.
    Demo {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 3)]
        images: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_tool(s: &str) -> Result<Tool, String> {
    s.parse()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.log_level.as_deref(), cli.log_format);
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    let config = e.chain().any(|c| {
        matches!(
            c.downcast_ref::<patchforge::Error>(),
            Some(patchforge::Error::Pipeline(PipelineError::Config(_)))
        ) || matches!(
            c.downcast_ref::<PipelineError>(),
            Some(PipelineError::Config(_))
        )
    });
    if config {
        EXIT_CONFIG
    } else {
        1
    }
}

fn init_logging(level: Option<&str>, format: LogFormat) {
    let filter = level.map(EnvFilter::new).unwrap_or_else(|| {
        EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info"))
    });
    let builder = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr);
    match format {
        LogFormat::Text => builder.init(),
        LogFormat::Json => builder.json().flatten_event(true).init(),
    }
}

fn dispatch(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Perceive {
            manifest,
            patch_px,
            patch_fg,
            containment,
            out,
        } => {
            let scene = perceive(
                &manifest,
                patch_px,
                &GroundingThresholds {
                    patch_fg,
                    containment,
                },
            )?;
            write(&out, scene.to_json())?;
            info!(stage = "perceive", image_id = %scene.image_id, subentities = scene.scene.subentities.len(), dropped = scene.scene.dropped.len(), "scene grounded");
        }
        Command::Synthesize {
            scene,
            tool,
            candidate,
            seed,
            config,
            out,
            job_out,
        } => {
            let cfg = load_stage_config(config.as_deref())?;
            let scene = PerceivedScene::load(&scene)?;
            let job = match candidate {
                Some(k) => {
                    let cands = plan_candidates(&scene.scene, &[tool]);
                    let c = *cands.get(k).ok_or_else(|| {
                        anyhow!(
                            "{tool} has {} candidates, index {k} is out of range",
                            cands.len()
                        )
                    })?;
                    Job::for_candidate(&scene.image_id, &scene.scene, c, seed)
                }
                None => plan_jobs(&scene.image_id, &scene.scene, &[tool], true, seed)
                    .pop()
                    .ok_or_else(|| anyhow!("no {tool} candidates in {}", scene.image_id))?,
            };
            let (mapping, params) = synthesize(&scene.scene, &job, &cfg.params)?;
            let export = MappingExport::new(
                &mapping,
                job.seed,
                cfg.schedule.snapshot(tool.artifact_type()),
                params,
            )?;
            write(&out, export.to_json())?;
            let job_path = job_out.unwrap_or_else(|| sidecar(&out, "job.json"));
            write(&job_path, serde_json::to_string_pretty(&job)? + "\n")?;
            info!(stage = "synthesize", image_id = %scene.image_id, tool = %tool, pairs = mapping.len(), "mapping written");
        }
        Command::Inject {
            scene,
            mapping,
            blend,
            out,
        } => {
            let scene = PerceivedScene::load(&scene)?;
            let m = load_export(&mapping)?.to_mapping()?;
            let art = inject(&scene.load_image()?, &m, blend)?;
            write(&out, art.to_png_bytes())?;
            info!(stage = "inject", image_id = %scene.image_id, pairs = m.len(), "artifact rendered");
        }
        Command::Curate {
            scene,
            job,
            mapping,
            artifact,
            config,
            out,
        } => {
            let cfg = load_stage_config(config.as_deref())?;
            let scene = PerceivedScene::load(&scene)?;
            let job = load_job(&job)?;
            let m = load_export(&mapping)?.to_mapping()?;
            let clean = scene.load_image()?;
            let art = PixelImage::load_png(&artifact)?;
            let client = cfg.client.build()?;
            let metric = PatchRmsDistance {
                patch_px: m.grid().patch_px(),
            };
            let report = curate(
                &clean,
                &art,
                &m,
                &job.prompt_entity(),
                &cfg.thresholds,
                &metric,
                &*client,
                &cfg.client.options(),
            )?;
            write(&out, serde_json::to_string_pretty(&report)? + "\n")?;
            match report.rejection() {
                None => {
                    info!(stage = "curate", image_id = %scene.image_id, job = %job.job_id, decision = "keep", distance = report.distance, "curated")
                }
                Some((stage, reason)) => {
                    info!(stage, image_id = %scene.image_id, job = %job.job_id, decision = "reject", %reason, distance = report.distance, "curated")
                }
            }
        }
        Command::Emit {
            scene,
            job,
            mapping,
            artifact,
            curation,
            out_dir,
        } => {
            emit(&scene, &job, &mapping, &artifact, &curation, &out_dir)?;
        }
        Command::Evaluate {
            benchmark,
            records,
            predictions,
            aggregation,
            heat_threshold,
            embed_endpoint,
            embed_model,
            embed_timeout_ms,
            out,
        } => {
            let gt: Vec<BenchmarkEntry> = match (benchmark, records) {
                (Some(b), _) => read_jsonl(&b)?,
                (None, Some(r)) => benchmark_from_records(&read_jsonl::<ArtifactRecord>(&r)?),
                (None, None) => bail!("one of --benchmark or --records is required"),
            };
            let preds: Vec<Prediction> = read_jsonl(&predictions)?;
            let opts = EvalOptions {
                heat_threshold,
                aggregation: match aggregation {
                    AggregationArg::PerImageMean => Aggregation::PerImageMean,
                    AggregationArg::Micro => Aggregation::Micro,
                },
            };
            let embedder = embed_endpoint.map(|ep| {
                let key = std::env::var(API_KEY_ENV).ok();
                HttpEmbedder::new(
                    ep,
                    embed_model.unwrap_or_default(),
                    key,
                    Duration::from_millis(embed_timeout_ms),
                )
            });
            let report = evaluate(
                &gt,
                &preds,
                &opts,
                embedder.as_ref().map(|e| e as &dyn Embedder),
            )?;
            match out {
                Some(p) => write(&p, report.to_json())?,
                None => print!("{}", report.to_json()),
            }
            info!(
                stage = "evaluate",
                samples = report.n_samples,
                accuracy = report.binary.accuracy,
                macro_f1 = report.binary.macro_f1,
                "scored"
            );
        }
        Command::Run {
            config,
            output_dir,
            seed,
            parallelism,
            expand_all_tools,
        } => {
            let mut cfg = PipelineConfig::load(&config).map_err(|e| match e {
                PipelineError::Io { .. } => PipelineError::Config(e.to_string()),
                other => other,
            })?;
            if let Some(o) = output_dir {
                cfg.output_dir = o;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(p) = parallelism {
                cfg.parallelism = p;
            }
            cfg.expand_all_tools |= expand_all_tools;
            let summary = run_pipeline(&cfg)?;
            println!("{}", summary.to_json().trim_end());
            if summary.images_succeeded == 0 {
                warn!(
                    images = summary.images_total,
                    "no image was processed successfully"
                );
                return Ok(ExitCode::from(1));
            }
        }
        Command::Overlay {
            run_dir,
            record_id,
            out,
        } => {
            let records: Vec<ArtifactRecord> = read_jsonl(&run_dir.join("records.jsonl"))?;
            let record = records
                .iter()
                .find(|r| r.record_id == record_id)
                .ok_or_else(|| {
                    anyhow!(
                        "record `{record_id}` not in {}",
                        run_dir.join("records.jsonl").display()
                    )
                })?;
            let img = render_overlays(record, &run_dir)?;
            write(&out, img.to_png_bytes())?;
        }
        Command::Demo {
            out_dir,
            images,
            seed,
        } => {
            let corpus = write_demo_corpus(&out_dir, images, seed)?;
            let mut cfg = PipelineConfig::new("corpus.json", "out");
            cfg.seed = seed;
            cfg.patch_px = DEMO_PATCH_PX;
            cfg.expand_all_tools = true;
            let cfg_path = out_dir.join("pipeline.toml");
            write(&cfg_path, cfg.to_toml())?;
            println!(
                "corpus: {}\nconfig: {}",
                corpus.display(),
                cfg_path.display()
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

/// Stage commands read only the parameter sections of a pipeline config.
fn load_stage_config(path: Option<&Path>) -> Result<PipelineConfig> {
    let cfg = match path {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::new("", ""),
    };
    cfg.params
        .validate()
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    cfg.schedule
        .validate()
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    cfg.thresholds
        .validate()
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    Ok(cfg)
}

fn load_export(path: &Path) -> Result<MappingExport> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    MappingExport::parse(&text).with_context(|| path.display().to_string())
}

fn load_job(path: &Path) -> Result<Job> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| path.display().to_string())
}

fn emit(
    scene: &Path,
    job: &Path,
    mapping: &Path,
    artifact: &Path,
    curation: &Path,
    out_dir: &Path,
) -> Result<()> {
    let scene = PerceivedScene::load(scene)?;
    let job = load_job(job)?;
    let export = load_export(mapping)?;
    let report: CurationReport = serde_json::from_str(
        &std::fs::read_to_string(curation)
            .with_context(|| format!("reading {}", curation.display()))?,
    )
    .with_context(|| curation.display().to_string())?;
    if let Some((stage, reason)) = report.rejection() {
        info!(stage, image_id = %scene.image_id, job = %job.job_id, decision = "reject", %reason, "not emitted");
        return Ok(());
    }
    let id = &scene.image_id;
    let paths = RecordPaths {
        source_image: format!("images/{id}/clean.png"),
        artifact_image: format!("images/{id}/{}.png", job.job_id),
        mapping_export: format!("mappings/{id}/{}.json", job.job_id),
    };
    let record = build_record(&scene, &job, &export, &report, paths.clone())?;
    write(
        &out_dir.join(&paths.source_image),
        scene.load_image()?.to_png_bytes(),
    )?;
    write(
        &out_dir.join(&paths.artifact_image),
        PixelImage::load_png(artifact)?.to_png_bytes(),
    )?;
    write(&out_dir.join(&paths.mapping_export), export.to_json())?;

    let clean_path = out_dir.join("vqa_clean.jsonl");
    let clean_sample = emit_vqa_clean(&record);
    let have_clean = clean_path.exists()
        && read_jsonl::<VqaSample>(&clean_path)?
            .iter()
            .any(|s| s.sample_id == clean_sample.sample_id);
    let mut records = JsonlWriter::open_append(&out_dir.join("records.jsonl"))?;
    records.append(&record)?;
    records.finish()?;
    let mut vqa = JsonlWriter::open_append(&out_dir.join("vqa_artifact.jsonl"))?;
    vqa.append(&emit_vqa_artifact(&record))?;
    vqa.finish()?;
    if !have_clean {
        let mut w = JsonlWriter::open_append(&clean_path)?;
        w.append(&clean_sample)?;
        w.finish()?;
    }
    info!(stage = "emit", image_id = %id, job = %job.job_id, decision = "ok", record_id = %record.record_id, "record appended");
    Ok(())
}
