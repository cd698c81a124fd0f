use std::path::{Path, PathBuf};

use hdrcloudseg_core::color::ChannelId;
use hdrcloudseg_core::dataset_io::{
    save_mask, saturation_mask_hdr, write_atomic, Dataset, ExposureStack, Manifest, ManifestEntry, Sample,
    MANIFEST_FILE,
};
use hdrcloudseg_core::eval::{
    benchmark_table, channel_study, confusion, default_cells, metrics, roc_sweep, saturation_stats,
    BenchmarkReport, EvalContext, ImageType, Method, MethodOutput, MetricsReport, PreparedSample, SegInput,
    TonemapOrigin,
};
use hdrcloudseg_core::radiance::{recover_response, recover_response_pooled, RadianceMap, ResponseSource};
use hdrcloudseg_core::segment::segment_source;
use hdrcloudseg_core::segment::SegmentationSummary;
use hdrcloudseg_core::synth::{sky_scene, GammaCamera, SceneParams};
use hdrcloudseg_core::tonemap::tonemap;
use hdrcloudseg_core::{ResponseCurve, ResponseParams};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{Command, EvalCommand};
use crate::config::{CurveScope, CurveSource, RunConfig};
use crate::{CliError, Outcome};

/// Exposure times of the synthetic camera, shortest first.
pub const SYNTH_TIMES: [f64; 3] = [1.0 / 16.0, 0.25, 1.0];
pub const SYNTH_CAMERA: GammaCamera = GammaCamera { gamma: 2.2, gain: 0.54 };

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntryRecord {
    pub id: String,
    pub ok: bool,
    /// Paths relative to the output directory.
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl EntryRecord {
    fn from_result(id: &str, r: Result<Vec<String>, hdrcloudseg_core::Error>) -> Self {
        match r {
            Ok(outputs) => Self { id: id.to_string(), ok: true, outputs, error: None },
            Err(e) => {
                log::warn!("{id}: {e}");
                Self { id: id.to_string(), ok: false, outputs: Vec::new(), error: Some(e.to_string()) }
            }
        }
    }
}

/// Written next to the outputs of every command.
#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    config: &'a RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    response: Option<String>,
    succeeded: usize,
    failed: usize,
    entries: Vec<EntryRecord>,
}

pub fn manifest_name(command: &str) -> String {
    format!("run_{command}.json")
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> hdrcloudseg_core::Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("report serializes");
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

fn finish(
    command: &str,
    cfg: &RunConfig,
    response: Option<String>,
    mut entries: Vec<EntryRecord>,
) -> Result<Outcome, CliError> {
    entries.sort_by(|a, b| a.id.cmp(&b.id));
    let failed = entries.iter().filter(|e| !e.ok).count();
    let manifest = RunManifest {
        command,
        config: cfg,
        response,
        succeeded: entries.len() - failed,
        failed,
        entries,
    };
    write_json(&cfg.out.join(manifest_name(command)), &manifest)?;
    Ok(if failed > 0 { Outcome::Partial } else { Outcome::Success })
}

/// Loads every listed sample; unreadable ones become failed entries.
fn load(cfg: &RunConfig) -> Result<(Vec<Sample>, Vec<EntryRecord>), CliError> {
    let path = cfg.dataset.as_ref().expect("dataset validated");
    let dataset = Dataset::open(path).map_err(|e| CliError::Usage(e.to_string()))?;
    if dataset.entries().is_empty() {
        return Err(CliError::Usage(format!("{} lists no samples", path.display())));
    }
    let mut samples = Vec::new();
    let mut failed = Vec::new();
    for (id, r) in dataset.load_all() {
        match r {
            Ok(s) => samples.push(s),
            Err(e) => failed.push(EntryRecord::from_result(&id, Err(e))),
        }
    }
    Ok((samples, failed))
}

fn response_params(cfg: &RunConfig) -> ResponseParams {
    ResponseParams {
        sample_count: cfg.response.sample_count,
        lambda: cfg.response.lambda,
    }
}

/// The curve source for a run, with a description for the manifest. A
/// dataset-wide curve is also written to `response.csv`.
fn response_source(cfg: &RunConfig, samples: &[Sample]) -> Result<(ResponseSource, String), CliError> {
    match (cfg.response.source, cfg.response.scope) {
        (CurveSource::Load, _) => {
            let path = cfg.response.path.as_ref().expect("path validated");
            let curve = ResponseCurve::load_csv(path).map_err(|e| CliError::Usage(e.to_string()))?;
            Ok((ResponseSource::Fixed(curve), format!("loaded from {}", path.display())))
        }
        (CurveSource::Recover, CurveScope::Stack) => {
            let p = response_params(cfg);
            let text = format!("recovered per stack (samples {}, lambda {})", p.sample_count, p.lambda);
            Ok((ResponseSource::PerStack(p), text))
        }
        (CurveSource::Recover, CurveScope::Dataset) => {
            let stacks: Vec<&ExposureStack> = samples.iter().map(|s| &s.stack).collect();
            let curve = recover_response_pooled(&stacks, cfg.response.sample_count, cfg.response.lambda)?;
            curve.save_csv(cfg.out.join("response.csv"))?;
            let text = format!(
                "recovered over {} stacks (samples {}, lambda {}), saved as response.csv",
                stacks.len(),
                cfg.response.sample_count,
                cfg.response.lambda
            );
            Ok((ResponseSource::Fixed(curve), text))
        }
    }
}

fn context(cfg: &RunConfig, response: ResponseSource) -> EvalContext {
    EvalContext {
        seg: cfg.seg,
        baseline: cfg.baseline,
        tonemap: cfg.tonemap,
        response,
    }
}

pub fn dispatch(command: &Command, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let name = command.name();
    match command {
        Command::Fuse => cmd_fuse(name, cfg),
        Command::Tonemap { input: Some(input), output } => cmd_tonemap_file(cfg, input, output.as_deref()),
        Command::Tonemap { input: None, .. } => cmd_tonemap(name, cfg),
        Command::Segment { .. } => cmd_segment(name, cfg),
        Command::Evaluate { what } => match what {
            EvalCommand::Table => cmd_table(name, cfg),
            EvalCommand::Roc { .. } => cmd_roc(name, cfg),
            EvalCommand::Channels { .. } => cmd_channels(name, cfg),
            EvalCommand::Saturation => cmd_saturation(name, cfg),
        },
        Command::Respond => cmd_respond(name, cfg),
        Command::Synth { count, width, height } => cmd_synth(cfg, *count, *width, *height),
    }
}

fn cmd_fuse(name: &str, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let (samples, mut entries) = load(cfg)?;
    if samples.is_empty() {
        return finish(name, cfg, None, entries);
    }
    let (source, described) = response_source(cfg, &samples)?;
    entries.par_extend(samples.par_iter().map(|s| {
        let id = s.id();
        let r = (|| {
            let map = source.fuse(&s.stack)?;
            let pfm = format!("radiance/{id}.pfm");
            map.save_pfm(cfg.out.join(&pfm))?;
            let png = format!("tonemapped/{id}.png");
            tonemap(&map, &cfg.tonemap)?.save_png(cfg.out.join(&png))?;
            Ok(vec![pfm, png])
        })();
        EntryRecord::from_result(id, r)
    }));
    finish(name, cfg, Some(described), entries)
}

fn cmd_tonemap(name: &str, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let (samples, mut entries) = load(cfg)?;
    if samples.is_empty() {
        return finish(name, cfg, None, entries);
    }
    let (source, described) = response_source(cfg, &samples)?;
    entries.par_extend(samples.par_iter().map(|s| {
        let id = s.id();
        let r = (|| {
            let png = format!("tonemapped/{id}.png");
            tonemap(&source.fuse(&s.stack)?, &cfg.tonemap)?.save_png(cfg.out.join(&png))?;
            Ok(vec![png])
        })();
        EntryRecord::from_result(id, r)
    }));
    finish(name, cfg, Some(described), entries)
}

fn cmd_tonemap_file(cfg: &RunConfig, input: &Path, output: Option<&Path>) -> Result<Outcome, CliError> {
    let map = RadianceMap::load_pfm(input)?;
    let output: PathBuf = match output {
        Some(p) => p.to_path_buf(),
        None => {
            let stem = input.file_stem().unwrap_or_default();
            cfg.out.join(stem).with_extension("png")
        }
    };
    tonemap(&map, &cfg.tonemap)?.save_png(&output)?;
    Ok(Outcome::Success)
}

/// Per-image report written next to each mask.
#[derive(Serialize)]
struct SegmentReport<'a> {
    id: &'a str,
    method: Method,
    image_type: ImageType,
    #[serde(skip_serializing_if = "Option::is_none")]
    channel: Option<ChannelId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tonemapped: Option<TonemapOrigin>,
    cloud_pixels: usize,
    total_pixels: usize,
    /// Graph-cut details, including the energy breakdown.
    #[serde(skip_serializing_if = "Option::is_none")]
    summary: Option<SegmentationSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    metrics: Option<MetricsReport>,
}

fn cmd_segment(name: &str, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let opts = &cfg.segment;
    let channel = match opts.method {
        Method::Proposed => Some(opts.channel),
        Method::Baseline(_) => None,
    };
    let label = match channel {
        Some(c) if c != ChannelId::NORMALIZED_BR => format!("{}-{c}_{}", opts.method, opts.image_type),
        _ => format!("{}_{}", opts.method, opts.image_type),
    };
    let (samples, mut entries) = load(cfg)?;
    if samples.is_empty() {
        return finish(name, cfg, None, entries);
    }
    let needs_radiance = opts.image_type == ImageType::Hdr
        || (opts.image_type == ImageType::Tonemapped && samples.iter().any(|s| s.tonemapped.is_none()));
    let (source, described) = if needs_radiance {
        let (s, d) = response_source(cfg, &samples)?;
        (s, Some(d))
    } else {
        (ResponseSource::PerStack(response_params(cfg)), None)
    };
    let ctx = context(cfg, source);
    entries.par_extend(samples.par_iter().map(|s| {
        let id = s.id();
        let r = (|| {
            let prepared = PreparedSample::new(s, &[opts.image_type], &ctx)?;
            let out = match channel {
                Some(c) if c != ChannelId::NORMALIZED_BR => {
                    let seg = match prepared.input(opts.image_type)? {
                        SegInput::Ldr(img) => segment_source(img, c, &ctx.seg)?,
                        SegInput::Hdr(map) => segment_source(map, c, &ctx.seg)?,
                    };
                    let mut summary = seg.summary;
                    if opts.image_type == ImageType::Hdr {
                        summary.saturated_pixels = Some(saturation_mask_hdr(&s.stack).count());
                    }
                    MethodOutput { mask: seg.mask, summary: Some(summary) }
                }
                _ => prepared.run(opts.method, opts.image_type, &ctx)?,
            };
            let metrics = match &s.truth {
                Some(truth) => {
                    let counts = confusion(&out.mask, truth)?;
                    Some(MetricsReport {
                        method: opts.method,
                        image_type: opts.image_type,
                        scores: metrics(&counts)?,
                        counts,
                    })
                }
                None => None,
            };
            let mask_path = format!("masks/{label}/{id}.png");
            save_mask(&out.mask, cfg.out.join(&mask_path))?;
            let report = SegmentReport {
                id,
                method: opts.method,
                image_type: opts.image_type,
                channel,
                tonemapped: prepared.tonemapped.as_ref().map(|t| t.1),
                cloud_pixels: out.mask.cloud_count(),
                total_pixels: out.mask.len(),
                summary: out.summary,
                metrics,
            };
            let report_path = format!("reports/{label}/{id}.json");
            write_json(&cfg.out.join(&report_path), &report)?;
            Ok(vec![mask_path, report_path])
        })();
        EntryRecord::from_result(id, r)
    }));
    finish(name, cfg, described, entries)
}

/// Samples with ground truth; the rest become failed entries.
fn with_truth(samples: Vec<Sample>, entries: &mut Vec<EntryRecord>) -> Vec<Sample> {
    let (kept, missing): (Vec<Sample>, Vec<Sample>) = samples.into_iter().partition(|s| s.truth.is_some());
    for s in missing {
        entries.push(EntryRecord::from_result(
            s.id(),
            Err(hdrcloudseg_core::Error::MissingGroundTruth(s.id().to_string())),
        ));
    }
    kept
}

fn ok_entries(samples: &[Sample], outputs: &[&str]) -> Vec<EntryRecord> {
    samples
        .iter()
        .map(|s| EntryRecord {
            id: s.id().to_string(),
            ok: true,
            outputs: outputs.iter().map(|o| o.to_string()).collect(),
            error: None,
        })
        .collect()
}

fn cmd_table(name: &str, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let (samples, mut entries) = load(cfg)?;
    let samples = with_truth(samples, &mut entries);
    if samples.is_empty() {
        return finish(name, cfg, None, entries);
    }
    let (source, described) = response_source(cfg, &samples)?;
    let report = benchmark_table(&samples, &default_cells(), &context(cfg, source))?;
    write_atomic(cfg.out.join("table.csv"), &BenchmarkReport::rows_csv(&report.rows))?;
    write_atomic(
        cfg.out.join("table_unsaturated.csv"),
        &BenchmarkReport::rows_csv(&report.rows_unsaturated),
    )?;
    write_atomic(cfg.out.join("table_per_image.csv"), &report.per_image_csv())?;
    write_json(&cfg.out.join("table.json"), &report)?;
    let outputs = ["table.csv", "table_unsaturated.csv", "table_per_image.csv", "table.json"];
    let mut scored = ok_entries(&samples, &outputs);
    for f in &report.failures {
        if let Some(e) = scored.iter_mut().find(|e| e.id == f.id) {
            e.ok = false;
            let line = format!("{} on {}: {}", f.method, f.image_type, f.reason);
            e.error = Some(match e.error.take() {
                Some(prev) => format!("{prev}; {line}"),
                None => line,
            });
        }
    }
    entries.extend(scored);
    finish(name, cfg, Some(described), entries)
}

fn cmd_roc(name: &str, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let (samples, mut entries) = load(cfg)?;
    let samples = with_truth(samples, &mut entries);
    if samples.is_empty() {
        return finish(name, cfg, None, entries);
    }
    let (source, described) = response_source(cfg, &samples)?;
    let report = roc_sweep(&samples, &cfg.roc.alphas, &context(cfg, source))?;
    write_atomic(cfg.out.join("roc.csv"), &report.to_csv())?;
    write_atomic(cfg.out.join("roc_tidy.csv"), &report.to_tidy_csv())?;
    write_json(&cfg.out.join("roc.json"), &report)?;
    entries.extend(ok_entries(&samples, &["roc.csv", "roc_tidy.csv", "roc.json"]));
    finish(name, cfg, Some(described), entries)
}

fn cmd_channels(name: &str, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let (samples, mut entries) = load(cfg)?;
    let samples = with_truth(samples, &mut entries);
    if samples.is_empty() {
        return finish(name, cfg, None, entries);
    }
    let opts = &cfg.channels;
    let needs_radiance = opts.image_type != ImageType::Ldr;
    let (source, described) = if needs_radiance {
        let (s, d) = response_source(cfg, &samples)?;
        (s, Some(d))
    } else {
        (ResponseSource::PerStack(response_params(cfg)), None)
    };
    let study = channel_study(&samples, &opts.channels, opts.image_type, &context(cfg, source))?;
    write_atomic(cfg.out.join("channels.csv"), &study.to_csv())?;
    write_atomic(cfg.out.join("channels_tidy.csv"), &study.to_tidy_csv())?;
    write_json(&cfg.out.join("channels.json"), &study)?;
    entries.extend(ok_entries(&samples, &["channels.csv", "channels_tidy.csv", "channels.json"]));
    finish(name, cfg, described, entries)
}

fn cmd_saturation(name: &str, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let (samples, mut entries) = load(cfg)?;
    if !samples.is_empty() {
        let stacks: Vec<&ExposureStack> = samples.iter().map(|s| &s.stack).collect();
        let report = saturation_stats(&stacks);
        write_atomic(cfg.out.join("saturation.csv"), &report.to_csv())?;
        write_json(&cfg.out.join("saturation.json"), &report)?;
        entries.extend(ok_entries(&samples, &["saturation.csv", "saturation.json"]));
    }
    finish(name, cfg, None, entries)
}

fn cmd_respond(name: &str, cfg: &RunConfig) -> Result<Outcome, CliError> {
    if cfg.response.source == CurveSource::Load {
        return Err(CliError::Usage("respond recovers a curve; drop --response / source \"load\"".into()));
    }
    let (samples, mut entries) = load(cfg)?;
    if samples.is_empty() {
        return finish(name, cfg, None, entries);
    }
    match cfg.response.scope {
        CurveScope::Dataset => {
            let (_, described) = response_source(cfg, &samples)?;
            entries.extend(ok_entries(&samples, &["response.csv"]));
            finish(name, cfg, Some(described), entries)
        }
        CurveScope::Stack => {
            entries.par_extend(samples.par_iter().map(|s| {
                let id = s.id();
                let r = (|| {
                    let path = format!("responses/{id}.csv");
                    recover_response(&s.stack, cfg.response.sample_count, cfg.response.lambda)?
                        .save_csv(cfg.out.join(&path))?;
                    Ok(vec![path])
                })();
                EntryRecord::from_result(id, r)
            }));
            finish(name, cfg, None, entries)
        }
    }
}

/// Renders `count` scenes into a dataset directory under `--out`.
fn cmd_synth(cfg: &RunConfig, count: u32, width: u32, height: u32) -> Result<Outcome, CliError> {
    if count == 0 {
        return Err(CliError::Usage("--count must be at least 1".into()));
    }
    let params = SceneParams { width, height, ..Default::default() };
    let base = cfg.seed.unwrap_or(0);
    let entries = (0..u64::from(count))
        .into_par_iter()
        .map(|i| -> Result<ManifestEntry, CliError> {
            let id = format!("syn{i:03}");
            let scene = sky_scene(&params, base + i)
                .map_err(|e| CliError::Usage(e.to_string()))?;
            let stack = SYNTH_CAMERA.expose(&scene.radiance, SYNTH_TIMES, &id)?;
            let rel = |f: &str| PathBuf::from(format!("{id}/{f}"));
            for (img, f) in stack.members().iter().zip(["low.png", "mid.png", "high.png"]) {
                img.save_png(cfg.out.join(rel(f)))?;
            }
            save_mask(&scene.truth, cfg.out.join(rel("truth.png")))?;
            Ok(ManifestEntry {
                id: id.clone(),
                low: rel("low.png"),
                mid: rel("mid.png"),
                high: rel("high.png"),
                ground_truth: Some(rel("truth.png")),
                exposure_times: Some(SYNTH_TIMES),
                ev_offsets: None,
                base_time: None,
                tonemapped: None,
                crop: None,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let manifest = Manifest { base_time: None, samples: entries };
    write_atomic(cfg.out.join(MANIFEST_FILE), format!("{}\n", manifest.to_json()).as_bytes())?;
    Ok(Outcome::Success)
}
