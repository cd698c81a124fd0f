//! Confusion metrics, seeding-threshold sweeps, channel comparison,
//! saturation statistics and the method/image-type benchmark.
//!
//! Cloud is the positive class. Per-sample work runs in parallel; results are
//! aggregated in sample-id order.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{self, Baseline, BaselineParams};
use crate::color::{extract_channel, ChannelId};
use crate::dataset_io::{
    saturation_mask_hdr, saturation_mask_ldr, BinaryMask, ExposureStack, LdrImage, Sample,
    SaturationMask,
};
use crate::error::{Error, Result};
use crate::radiance::{RadianceMap, ResponseSource};
use crate::segment::{
    check_alpha, fcm_cluster, generate_seeds, graph_cut, hdrcloudseg_detailed, segment_source,
    SegParams, SegmentationSummary,
};
use crate::tonemap::{tonemap, TonemapParams};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn add(&mut self, other: &ConfusionCounts) {
        self.tp += other.tp;
        self.tn += other.tn;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }

    /// Counts with prediction and truth exchanged.
    pub fn swapped(&self) -> ConfusionCounts {
        ConfusionCounts {
            tp: self.tp,
            tn: self.tn,
            fp: self.fn_,
            fn_: self.fp,
        }
    }

    /// (FP / (FP + TN), TP / (TP + FN)), each 0 when undefined.
    pub fn rates(&self) -> (f64, f64) {
        let ratio = |a: u64, b: u64| if a + b == 0 { 0.0 } else { a as f64 / (a + b) as f64 };
        (ratio(self.fp, self.tn), ratio(self.tp, self.fn_))
    }
}

fn check_same_dims(mask: &BinaryMask, truth: &BinaryMask) -> Result<()> {
    if mask.dimensions() != truth.dimensions() {
        return Err(Error::DimensionMismatch {
            expected: truth.dimensions(),
            found: mask.dimensions(),
        });
    }
    Ok(())
}

fn count(mask: &BinaryMask, truth: &BinaryMask, keep: impl Fn(usize) -> bool) -> ConfusionCounts {
    let mut c = ConfusionCounts::default();
    for (i, (&m, &t)) in mask.labels().iter().zip(truth.labels()).enumerate() {
        if !keep(i) {
            continue;
        }
        match (m, t) {
            (true, true) => c.tp += 1,
            (false, false) => c.tn += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    c
}

pub fn confusion(mask: &BinaryMask, truth: &BinaryMask) -> Result<ConfusionCounts> {
    check_same_dims(mask, truth)?;
    Ok(count(mask, truth, |_| true))
}

/// Confusion over pixels not flagged in `exclude`.
pub fn confusion_excluding(
    mask: &BinaryMask,
    truth: &BinaryMask,
    exclude: &SaturationMask,
) -> Result<ConfusionCounts> {
    check_same_dims(mask, truth)?;
    if exclude.dimensions() != truth.dimensions() {
        return Err(Error::DimensionMismatch {
            expected: truth.dimensions(),
            found: exclude.dimensions(),
        });
    }
    let flags = exclude.flags();
    Ok(count(mask, truth, |i| !flags[i]))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
    pub error_pct: f64,
}

/// Precision, recall, F-score and error; degenerate ratios are 0.
pub fn metrics(c: &ConfusionCounts) -> Result<Scores> {
    let total = c.total();
    if total == 0 {
        return Err(Error::EmptyInput("no evaluated pixels".into()));
    }
    let precision = if c.tp + c.fp == 0 {
        0.0
    } else {
        c.tp as f64 / (c.tp + c.fp) as f64
    };
    let recall = if c.tp + c.fn_ == 0 {
        0.0
    } else {
        c.tp as f64 / (c.tp + c.fn_) as f64
    };
    let fscore = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(Scores {
        precision,
        recall,
        fscore,
        error_pct: 100.0 * (c.fp + c.fn_) as f64 / total as f64,
    })
}

fn mean_scores(all: &[Scores]) -> Option<Scores> {
    if all.is_empty() {
        return None;
    }
    let n = all.len() as f64;
    let sum = |f: fn(&Scores) -> f64| all.iter().map(f).sum::<f64>() / n;
    Some(Scores {
        precision: sum(|s| s.precision),
        recall: sum(|s| s.recall),
        fscore: sum(|s| s.fscore),
        error_pct: sum(|s| s.error_pct),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageType {
    /// The mid exposure of the stack.
    #[serde(alias = "ldr-mid")]
    Ldr,
    Tonemapped,
    Hdr,
}

impl ImageType {
    pub const ALL: [ImageType; 3] = [ImageType::Ldr, ImageType::Tonemapped, ImageType::Hdr];

    pub fn name(self) -> &'static str {
        match self {
            ImageType::Ldr => "ldr",
            ImageType::Tonemapped => "tonemapped",
            ImageType::Hdr => "hdr",
        }
    }
}

impl fmt::Display for ImageType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ImageType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ldr" | "ldr-mid" | "mid" => Ok(ImageType::Ldr),
            "tonemapped" | "tm" => Ok(ImageType::Tonemapped),
            "hdr" => Ok(ImageType::Hdr),
            other => Err(Error::param(format!("unknown image type {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Baseline(Baseline),
    Proposed,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Baseline(Baseline::Long),
        Method::Baseline(Baseline::Souza),
        Method::Baseline(Baseline::Mantelli),
        Method::Baseline(Baseline::Li),
        Method::Proposed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::Baseline(b) => b.name(),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "proposed" | "hdrcloudseg" => Ok(Method::Proposed),
            other => other
                .parse::<Baseline>()
                .map(Method::Baseline)
                .map_err(|_| Error::param(format!("unknown method {other:?}"))),
        }
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub method: Method,
    pub image_type: ImageType,
    #[serde(flatten)]
    pub scores: Scores,
    pub counts: ConfusionCounts,
}

/// Everything a method needs beyond the images.
#[derive(Clone, Debug, Default)]
pub struct EvalContext {
    pub seg: SegParams,
    pub baseline: BaselineParams,
    pub tonemap: TonemapParams,
    pub response: ResponseSource,
}

#[derive(Clone, Copy, Debug)]
pub enum SegInput<'a> {
    Ldr(&'a LdrImage),
    Hdr(&'a RadianceMap),
}

#[derive(Clone, Debug)]
pub struct MethodOutput {
    pub mask: BinaryMask,
    /// Graph-cut metadata; `None` for baselines.
    pub summary: Option<SegmentationSummary>,
}

/// Segments one input with one method. Baselines accept 8-bit input only.
pub fn run_method(
    method: Method,
    input: SegInput<'_>,
    seg: &SegParams,
    baseline: &BaselineParams,
) -> Result<MethodOutput> {
    match (method, input) {
        (Method::Proposed, SegInput::Ldr(img)) => {
            let s = segment_source(img, ChannelId::NORMALIZED_BR, seg)?;
            Ok(MethodOutput {
                mask: s.mask,
                summary: Some(s.summary),
            })
        }
        (Method::Proposed, SegInput::Hdr(map)) => {
            let s = segment_source(map, ChannelId::NORMALIZED_BR, seg)?;
            Ok(MethodOutput {
                mask: s.mask,
                summary: Some(s.summary),
            })
        }
        (Method::Baseline(b), SegInput::Ldr(img)) => Ok(MethodOutput {
            mask: baselines::segment(b, img, baseline)?,
            summary: None,
        }),
        (Method::Baseline(b), SegInput::Hdr(_)) => Err(Error::param(format!(
            "baseline {b} operates on 8-bit images only"
        ))),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TonemapOrigin {
    /// Supplied with the dataset.
    Shipped,
    /// Rendered from the fused radiance.
    Generated,
}

/// Lazily built per-sample inputs.
pub struct PreparedSample<'a> {
    pub sample: &'a Sample,
    pub radiance: Option<RadianceMap>,
    pub tonemapped: Option<(LdrImage, TonemapOrigin)>,
}

impl<'a> PreparedSample<'a> {
    pub fn new(sample: &'a Sample, types: &[ImageType], ctx: &EvalContext) -> Result<Self> {
        let need_tm = types.contains(&ImageType::Tonemapped);
        let need_hdr = types.contains(&ImageType::Hdr) || (need_tm && sample.tonemapped.is_none());
        let radiance = if need_hdr {
            Some(ctx.response.fuse(&sample.stack)?)
        } else {
            None
        };
        let tonemapped = if !need_tm {
            None
        } else if let Some(t) = &sample.tonemapped {
            Some((t.clone(), TonemapOrigin::Shipped))
        } else {
            let map = radiance.as_ref().expect("radiance prepared above");
            Some((tonemap(map, &ctx.tonemap)?, TonemapOrigin::Generated))
        };
        Ok(Self {
            sample,
            radiance,
            tonemapped,
        })
    }

    pub fn input(&self, image_type: ImageType) -> Result<SegInput<'_>> {
        let missing = || Error::param(format!("{image_type} input was not prepared"));
        Ok(match image_type {
            ImageType::Ldr => SegInput::Ldr(self.sample.stack.mid()),
            ImageType::Tonemapped => SegInput::Ldr(&self.tonemapped.as_ref().ok_or_else(missing)?.0),
            ImageType::Hdr => SegInput::Hdr(self.radiance.as_ref().ok_or_else(missing)?),
        })
    }

    pub fn run(&self, method: Method, image_type: ImageType, ctx: &EvalContext) -> Result<MethodOutput> {
        let mut out = run_method(method, self.input(image_type)?, &ctx.seg, &ctx.baseline)?;
        if image_type == ImageType::Hdr {
            if let Some(s) = out.summary.as_mut() {
                s.saturated_pixels = Some(saturation_mask_hdr(&self.sample.stack).count());
            }
        }
        Ok(out)
    }
}

fn truth_of(sample: &Sample) -> Result<&BinaryMask> {
    sample
        .truth
        .as_ref()
        .ok_or_else(|| Error::MissingGroundTruth(sample.id().to_string()))
}

fn sorted_by_id(samples: &[Sample]) -> Vec<&Sample> {
    let mut v: Vec<&Sample> = samples.iter().collect();
    v.sort_by(|a, b| a.id().cmp(b.id()));
    v
}

// ---------------------------------------------------------------- ROC

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub alpha: f64,
    pub fpr: f64,
    pub tpr: f64,
    /// Summed over images.
    pub counts: ConfusionCounts,
    /// Scores of the summed counts.
    pub pooled: Scores,
    /// Mean of per-image scores.
    pub mean: Scores,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageCounts {
    pub id: String,
    /// One entry per retained alpha.
    pub counts: Vec<ConfusionCounts>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocReport {
    pub points: Vec<RocPoint>,
    pub per_image: Vec<ImageCounts>,
    /// Requested thresholds outside (0.5, 1), which the seed rule cannot use.
    pub dropped_alphas: Vec<f64>,
}

/// Segments every HDR sample at each seeding threshold.
///
/// Clustering does not depend on the threshold, so it runs once per image.
pub fn roc_sweep(samples: &[Sample], alphas: &[f64], ctx: &EvalContext) -> Result<RocReport> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("no samples".into()));
    }
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for &a in alphas {
        if check_alpha(a).is_ok() {
            kept.push(a);
        } else {
            log::warn!("seeding threshold {a} lies outside (0.5, 1); skipped");
            dropped.push(a);
        }
    }
    if kept.is_empty() {
        return Err(Error::EmptyInput("no seeding thresholds inside (0.5, 1)".into()));
    }
    let samples = sorted_by_id(samples);
    let per_image: Vec<ImageCounts> = samples
        .par_iter()
        .map(|s| -> Result<ImageCounts> {
            let truth = truth_of(s)?;
            let radiance = ctx.response.fuse(&s.stack)?;
            let map = extract_channel(&radiance, ChannelId::NORMALIZED_BR)?;
            let membership = fcm_cluster(&map, &ctx.seg)?;
            let counts = kept
                .iter()
                .map(|&alpha| {
                    let params = SegParams { alpha, ..ctx.seg };
                    let seeds = generate_seeds(&membership, alpha)?;
                    let (mask, _) = graph_cut(&map, &membership, &seeds, &params)?;
                    confusion(&mask, truth)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(ImageCounts {
                id: s.id().to_string(),
                counts,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut points = Vec::with_capacity(kept.len());
    for (k, &alpha) in kept.iter().enumerate() {
        let mut pooled = ConfusionCounts::default();
        let mut each = Vec::with_capacity(per_image.len());
        for img in &per_image {
            pooled.add(&img.counts[k]);
            each.push(metrics(&img.counts[k])?);
        }
        let (fpr, tpr) = pooled.rates();
        points.push(RocPoint {
            alpha,
            fpr,
            tpr,
            counts: pooled,
            pooled: metrics(&pooled)?,
            mean: mean_scores(&each).expect("non-empty"),
        });
    }
    Ok(RocReport {
        points,
        per_image,
        dropped_alphas: dropped,
    })
}

// ------------------------------------------------------- channel study

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
    pub mean: f64,
}

/// Quartiles by linear interpolation between order statistics.
pub fn box_stats(values: &[f64]) -> Option<BoxStats> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (v.len() - 1) as f64;
        let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
        v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
    };
    Some(BoxStats {
        min: v[0],
        q25: q(0.25),
        median: q(0.5),
        q75: q(0.75),
        max: v[v.len() - 1],
        mean: v.iter().sum::<f64>() / v.len() as f64,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageError {
    pub id: String,
    pub error_pct: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub id: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub channel: ChannelId,
    pub errors: Vec<ImageError>,
    pub skipped: Vec<Skipped>,
    pub stats: Option<BoxStats>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelStudy {
    pub image_type: ImageType,
    pub channels: Vec<ChannelStats>,
}

/// Runs the full pipeline on each channel of each image.
///
/// Images where a channel cannot be clustered are listed as skipped.
pub fn channel_study(
    samples: &[Sample],
    channels: &[ChannelId],
    image_type: ImageType,
    ctx: &EvalContext,
) -> Result<ChannelStudy> {
    if samples.is_empty() || channels.is_empty() {
        return Err(Error::EmptyInput("channel study needs samples and channels".into()));
    }
    let samples = sorted_by_id(samples);
    let results: Vec<Vec<std::result::Result<f64, String>>> = samples
        .par_iter()
        .map(|s| -> Result<Vec<std::result::Result<f64, String>>> {
            let truth = truth_of(s)?;
            let prepared = PreparedSample::new(s, &[image_type], ctx)?;
            let input = prepared.input(image_type)?;
            Ok(channels
                .iter()
                .map(|&ch| {
                    let seg = match input {
                        SegInput::Ldr(img) => segment_source(img, ch, &ctx.seg),
                        SegInput::Hdr(map) => segment_source(map, ch, &ctx.seg),
                    };
                    seg.and_then(|seg| metrics(&confusion(&seg.mask, truth)?))
                        .map(|m| m.error_pct)
                        .map_err(|e| e.to_string())
                })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;

    let channels = channels
        .iter()
        .enumerate()
        .map(|(k, &channel)| {
            let mut errors = Vec::new();
            let mut skipped = Vec::new();
            for (s, row) in samples.iter().zip(&results) {
                match &row[k] {
                    Ok(e) => errors.push(ImageError {
                        id: s.id().to_string(),
                        error_pct: *e,
                    }),
                    Err(reason) => {
                        log::warn!("{}: channel {channel} skipped: {reason}", s.id());
                        skipped.push(Skipped {
                            id: s.id().to_string(),
                            reason: reason.clone(),
                        })
                    }
                }
            }
            let values: Vec<f64> = errors.iter().map(|e| e.error_pct).collect();
            ChannelStats {
                channel,
                stats: box_stats(&values),
                errors,
                skipped,
            }
        })
        .collect();
    Ok(ChannelStudy {
        image_type,
        channels,
    })
}

// ---------------------------------------------------------- saturation

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SaturationCounts {
    pub low: u64,
    pub mid: u64,
    pub high: u64,
    pub hdr: u64,
}

impl SaturationCounts {
    fn add(&mut self, o: &SaturationCounts) {
        self.low += o.low;
        self.mid += o.mid;
        self.high += o.high;
        self.hdr += o.hdr;
    }
}

pub fn saturation_counts(stack: &ExposureStack) -> SaturationCounts {
    let c = |img: &LdrImage| saturation_mask_ldr(img).count() as u64;
    SaturationCounts {
        low: c(stack.low()),
        mid: c(stack.mid()),
        high: c(stack.high()),
        hdr: saturation_mask_hdr(stack).count() as u64,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Ratio {
    Finite { value: f64 },
    /// Positive numerator over zero.
    Infinite,
    /// Zero over zero.
    Undefined,
}

impl Ratio {
    pub fn of(num: u64, den: u64) -> Ratio {
        match (num, den) {
            (0, 0) => Ratio::Undefined,
            (_, 0) => Ratio::Infinite,
            (n, d) => Ratio::Finite {
                value: n as f64 / d as f64,
            },
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Ratio::Finite { value } => Some(*value),
            _ => None,
        }
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ratio::Finite { value } => write!(f, "{value}"),
            Ratio::Infinite => f.write_str("inf"),
            Ratio::Undefined => f.write_str("nan"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaturationRow {
    pub id: String,
    pub pixels: u64,
    pub counts: SaturationCounts,
    pub high_over_hdr: Ratio,
    pub mid_over_hdr: Ratio,
}

impl SaturationRow {
    fn new(id: String, pixels: u64, counts: SaturationCounts) -> Self {
        Self {
            id,
            pixels,
            counts,
            high_over_hdr: Ratio::of(counts.high, counts.hdr),
            mid_over_hdr: Ratio::of(counts.mid, counts.hdr),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaturationReport {
    pub per_image: Vec<SaturationRow>,
    pub pooled: SaturationRow,
}

pub fn saturation_stats(stacks: &[&ExposureStack]) -> SaturationReport {
    let mut stacks = stacks.to_vec();
    stacks.sort_by(|a, b| a.id().cmp(b.id()));
    let per_image: Vec<SaturationRow> = stacks
        .par_iter()
        .map(|s| {
            let (w, h) = s.dimensions();
            SaturationRow::new(s.id().to_string(), u64::from(w) * u64::from(h), saturation_counts(s))
        })
        .collect();
    let mut total = SaturationCounts::default();
    let mut pixels = 0;
    for r in &per_image {
        total.add(&r.counts);
        pixels += r.pixels;
    }
    SaturationReport {
        pooled: SaturationRow::new("*".into(), pixels, total),
        per_image,
    }
}

// ----------------------------------------------------------- benchmark

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub method: Method,
    pub image_type: ImageType,
}

/// Every method on mid-exposure and tone-mapped images, plus the proposed
/// method on radiance maps.
pub fn default_cells() -> Vec<Cell> {
    let mut cells = Vec::new();
    for image_type in [ImageType::Ldr, ImageType::Tonemapped] {
        for method in Method::ALL {
            cells.push(Cell { method, image_type });
        }
    }
    cells.push(Cell {
        method: Method::Proposed,
        image_type: ImageType::Hdr,
    });
    cells
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub method: Method,
    pub image_type: ImageType,
    pub images: usize,
    /// Mean of per-image scores; `None` when every image failed.
    pub mean: Option<Scores>,
    pub pooled: Option<Scores>,
    pub counts: ConfusionCounts,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageScore {
    pub id: String,
    pub method: Method,
    pub image_type: ImageType,
    pub scores: Scores,
    pub counts: ConfusionCounts,
    /// Counts over pixels not saturated in the radiance map.
    pub counts_unsaturated: ConfusionCounts,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub id: String,
    pub method: Method,
    pub image_type: ImageType,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamsSnapshot {
    pub seg: SegParams,
    pub baseline: BaselineParams,
    pub tonemap: TonemapParams,
    pub response: String,
}

impl ParamsSnapshot {
    pub fn of(ctx: &EvalContext) -> Self {
        Self {
            seg: ctx.seg,
            baseline: ctx.baseline,
            tonemap: ctx.tonemap,
            response: match &ctx.response {
                ResponseSource::PerStack(p) => format!(
                    "recovered per stack (samples {}, lambda {})",
                    p.sample_count, p.lambda
                ),
                ResponseSource::Fixed(_) => "fixed curve".into(),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub rows: Vec<BenchmarkRow>,
    /// The same cells scored without HDR-saturated pixels.
    pub rows_unsaturated: Vec<BenchmarkRow>,
    pub per_image: Vec<ImageScore>,
    pub failures: Vec<Failure>,
    pub tonemapped_shipped: usize,
    pub tonemapped_generated: usize,
    pub params: ParamsSnapshot,
}

fn aggregate(cell: Cell, scores: &[(Scores, ConfusionCounts)]) -> BenchmarkRow {
    let mut counts = ConfusionCounts::default();
    for (_, c) in scores {
        counts.add(c);
    }
    let each: Vec<Scores> = scores.iter().map(|(s, _)| *s).collect();
    BenchmarkRow {
        method: cell.method,
        image_type: cell.image_type,
        images: scores.len(),
        mean: mean_scores(&each),
        pooled: metrics(&counts).ok(),
        counts,
    }
}

/// Scores each cell on every sample; rows average the per-image scores.
pub fn benchmark_table(samples: &[Sample], cells: &[Cell], ctx: &EvalContext) -> Result<BenchmarkReport> {
    if samples.is_empty() || cells.is_empty() {
        return Err(Error::EmptyInput("benchmark needs samples and cells".into()));
    }
    for s in samples {
        truth_of(s)?;
    }
    if let Some(c) = cells
        .iter()
        .find(|c| matches!(c.method, Method::Baseline(_)) && c.image_type == ImageType::Hdr)
    {
        return Err(Error::param(format!(
            "baseline {} cannot run on radiance maps",
            c.method
        )));
    }
    let types: Vec<ImageType> = cells.iter().map(|c| c.image_type).collect();
    let samples = sorted_by_id(samples);

    type CellResult = std::result::Result<(ConfusionCounts, ConfusionCounts), String>;
    let per_sample: Vec<(Option<TonemapOrigin>, Vec<CellResult>)> = samples
        .par_iter()
        .map(|s| {
            let truth = s.truth.as_ref().expect("checked above");
            let prepared = match PreparedSample::new(s, &types, ctx) {
                Ok(p) => p,
                Err(e) => return (None, vec![Err(e.to_string()); cells.len()]),
            };
            let saturated = saturation_mask_hdr(&s.stack);
            let results = cells
                .iter()
                .map(|c| {
                    let out = prepared.run(c.method, c.image_type, ctx).map_err(|e| e.to_string())?;
                    let all = confusion(&out.mask, truth).map_err(|e| e.to_string())?;
                    let unsat = confusion_excluding(&out.mask, truth, &saturated).map_err(|e| e.to_string())?;
                    Ok((all, unsat))
                })
                .collect();
            (prepared.tonemapped.as_ref().map(|t| t.1), results)
        })
        .collect();

    let mut per_image = Vec::new();
    let mut failures = Vec::new();
    let mut rows = Vec::new();
    let mut rows_unsaturated = Vec::new();
    for (k, &cell) in cells.iter().enumerate() {
        let mut all = Vec::new();
        let mut unsat = Vec::new();
        for (s, (_, results)) in samples.iter().zip(&per_sample) {
            match &results[k] {
                Ok((c, cu)) => {
                    let scores = metrics(c)?;
                    all.push((scores, *c));
                    if let Ok(su) = metrics(cu) {
                        unsat.push((su, *cu));
                    }
                    per_image.push(ImageScore {
                        id: s.id().to_string(),
                        method: cell.method,
                        image_type: cell.image_type,
                        scores,
                        counts: *c,
                        counts_unsaturated: *cu,
                    });
                }
                Err(reason) => {
                    log::warn!("{}: {} on {} failed: {reason}", s.id(), cell.method, cell.image_type);
                    failures.push(Failure {
                        id: s.id().to_string(),
                        method: cell.method,
                        image_type: cell.image_type,
                        reason: reason.clone(),
                    });
                }
            }
        }
        rows.push(aggregate(cell, &all));
        rows_unsaturated.push(aggregate(cell, &unsat));
    }
    let origin_count = |o| per_sample.iter().filter(|(t, _)| *t == Some(o)).count();
    Ok(BenchmarkReport {
        rows,
        rows_unsaturated,
        per_image,
        failures,
        tonemapped_shipped: origin_count(TonemapOrigin::Shipped),
        tonemapped_generated: origin_count(TonemapOrigin::Generated),
        params: ParamsSnapshot::of(ctx),
    })
}

// ------------------------------------------------------------- writers

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

fn counts_fields(c: &ConfusionCounts) -> [String; 4] {
    [c.tp, c.tn, c.fp, c.fn_].map(|v| v.to_string())
}

impl BenchmarkReport {
    pub fn rows_csv(rows: &[BenchmarkRow]) -> Vec<u8> {
        csv_bytes(
            &[
                "method",
                "image_type",
                "images",
                "precision",
                "recall",
                "fscore",
                "error_pct",
                "pooled_precision",
                "pooled_recall",
                "pooled_fscore",
                "pooled_error_pct",
                "tp",
                "tn",
                "fp",
                "fn",
            ],
            rows.iter().map(|r| {
                let mut rec = vec![
                    r.method.to_string(),
                    r.image_type.to_string(),
                    r.images.to_string(),
                ];
                for s in [r.mean, r.pooled] {
                    rec.extend([
                        opt(s.map(|s| s.precision)),
                        opt(s.map(|s| s.recall)),
                        opt(s.map(|s| s.fscore)),
                        opt(s.map(|s| s.error_pct)),
                    ]);
                }
                rec.extend(counts_fields(&r.counts));
                rec
            }),
        )
    }

    pub fn per_image_csv(&self) -> Vec<u8> {
        csv_bytes(
            &[
                "id", "method", "image_type", "precision", "recall", "fscore", "error_pct", "tp", "tn",
                "fp", "fn",
            ],
            self.per_image.iter().map(|r| {
                let mut rec = vec![
                    r.id.clone(),
                    r.method.to_string(),
                    r.image_type.to_string(),
                    r.scores.precision.to_string(),
                    r.scores.recall.to_string(),
                    r.scores.fscore.to_string(),
                    r.scores.error_pct.to_string(),
                ];
                rec.extend(counts_fields(&r.counts));
                rec
            }),
        )
    }

    pub fn row(&self, method: Method, image_type: ImageType) -> Option<&BenchmarkRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.image_type == image_type)
    }
}

impl RocReport {
    pub fn to_csv(&self) -> Vec<u8> {
        csv_bytes(
            &[
                "alpha",
                "fpr",
                "tpr",
                "tp",
                "tn",
                "fp",
                "fn",
                "precision",
                "recall",
                "fscore",
                "error_pct",
                "mean_precision",
                "mean_recall",
                "mean_fscore",
                "mean_error_pct",
            ],
            self.points.iter().map(|p| {
                let mut rec = vec![p.alpha.to_string(), p.fpr.to_string(), p.tpr.to_string()];
                rec.extend(counts_fields(&p.counts));
                for s in [p.pooled, p.mean] {
                    rec.extend([s.precision, s.recall, s.fscore, s.error_pct].map(|v| v.to_string()));
                }
                rec
            }),
        )
    }

    /// Long format: alpha, statistic, value.
    pub fn to_tidy_csv(&self) -> Vec<u8> {
        let rows = self.points.iter().flat_map(|p| {
            [
                ("fpr", p.fpr),
                ("tpr", p.tpr),
                ("precision", p.pooled.precision),
                ("recall", p.pooled.recall),
                ("fscore", p.pooled.fscore),
                ("error_pct", p.pooled.error_pct),
                ("mean_precision", p.mean.precision),
                ("mean_recall", p.mean.recall),
                ("mean_fscore", p.mean.fscore),
                ("mean_error_pct", p.mean.error_pct),
            ]
            .map(|(k, v)| vec![p.alpha.to_string(), k.to_string(), v.to_string()])
        });
        csv_bytes(&["alpha", "statistic", "value"], rows)
    }
}

impl ChannelStudy {
    pub fn to_csv(&self) -> Vec<u8> {
        csv_bytes(
            &["channel", "images", "skipped", "min", "q25", "median", "q75", "max", "mean"],
            self.channels.iter().map(|c| {
                let s = c.stats;
                vec![
                    c.channel.to_string(),
                    c.errors.len().to_string(),
                    c.skipped.len().to_string(),
                    opt(s.map(|s| s.min)),
                    opt(s.map(|s| s.q25)),
                    opt(s.map(|s| s.median)),
                    opt(s.map(|s| s.q75)),
                    opt(s.map(|s| s.max)),
                    opt(s.map(|s| s.mean)),
                ]
            }),
        )
    }

    /// Long format: channel, statistic, value; one `error` row per image.
    pub fn to_tidy_csv(&self) -> Vec<u8> {
        let mut rows = Vec::new();
        for c in &self.channels {
            let ch = c.channel.to_string();
            if let Some(s) = c.stats {
                for (k, v) in [
                    ("min", s.min),
                    ("q25", s.q25),
                    ("median", s.median),
                    ("q75", s.q75),
                    ("max", s.max),
                    ("mean", s.mean),
                ] {
                    rows.push(vec![ch.clone(), k.to_string(), v.to_string()]);
                }
            }
            for e in &c.errors {
                rows.push(vec![ch.clone(), "error".to_string(), e.error_pct.to_string()]);
            }
        }
        csv_bytes(&["channel", "statistic", "value"], rows)
    }

    pub fn channel(&self, channel: ChannelId) -> Option<&ChannelStats> {
        self.channels.iter().find(|c| c.channel == channel)
    }
}

impl SaturationReport {
    pub fn to_csv(&self) -> Vec<u8> {
        csv_bytes(
            &["id", "pixels", "low", "mid", "high", "hdr", "high_over_hdr", "mid_over_hdr"],
            self.per_image.iter().chain([&self.pooled]).map(|r| {
                vec![
                    r.id.clone(),
                    r.pixels.to_string(),
                    r.counts.low.to_string(),
                    r.counts.mid.to_string(),
                    r.counts.high.to_string(),
                    r.counts.hdr.to_string(),
                    r.high_over_hdr.to_string(),
                    r.mid_over_hdr.to_string(),
                ]
            }),
        )
    }
}

/// Runs the proposed method on one sample's stack; convenience for callers
/// that need the radiance map as well.
pub fn proposed_hdr(
    stack: &ExposureStack,
    ctx: &EvalContext,
) -> Result<(RadianceMap, crate::segment::Segmentation)> {
    let curve = ctx.response.curve_for(stack)?;
    hdrcloudseg_detailed(stack, &ctx.seg, &curve)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(bits: &[u8]) -> BinaryMask {
        BinaryMask::new(bits.len() as u32, 1, bits.iter().map(|&b| b == 1).collect()).unwrap()
    }

    #[test]
    fn confusion_cases() {
        let truth = mask(&[1, 1, 0, 0]);
        let c = confusion(&mask(&[1, 1, 1, 1]), &truth).unwrap();
        assert_eq!(c, ConfusionCounts { tp: 2, tn: 0, fp: 2, fn_: 0 });
        let c = confusion(&truth.complement(), &truth).unwrap();
        assert_eq!((c.tp, c.tn), (0, 0));
        assert!(confusion(&mask(&[1]), &truth).is_err());
    }

    #[test]
    fn metric_formulas() {
        let s = metrics(&ConfusionCounts { tp: 1, fp: 1, fn_: 0, tn: 0 }).unwrap();
        assert_eq!(s.precision, 0.5);
        assert_eq!(s.recall, 1.0);
        assert!((s.fscore - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.error_pct, 50.0);
        let s = metrics(&ConfusionCounts { tp: 0, fp: 0, fn_: 0, tn: 5 }).unwrap();
        assert_eq!((s.precision, s.recall, s.fscore, s.error_pct), (0.0, 0.0, 0.0, 0.0));
        assert!(metrics(&ConfusionCounts::default()).is_err());
    }

    #[test]
    fn ratios() {
        assert_eq!(Ratio::of(5, 0), Ratio::Infinite);
        assert_eq!(Ratio::of(0, 0), Ratio::Undefined);
        assert_eq!(Ratio::of(6, 3).value(), Some(2.0));
    }

    #[test]
    fn quartiles() {
        let s = box_stats(&[4.0, 1.0, 3.0, 2.0, 5.0]).unwrap();
        assert_eq!((s.min, s.q25, s.median, s.q75, s.max), (1.0, 2.0, 3.0, 4.0, 5.0));
        assert!(box_stats(&[]).is_none());
    }

    #[test]
    fn names() {
        assert_eq!("ldr-mid".parse::<ImageType>().unwrap(), ImageType::Ldr);
        assert_eq!("proposed".parse::<Method>().unwrap(), Method::Proposed);
        assert_eq!("li".parse::<Method>().unwrap(), Method::Baseline(Baseline::Li));
        assert!("otsu".parse::<Method>().is_err());
        assert_eq!(default_cells().len(), 11);
        assert_eq!(serde_json::to_string(&Method::Proposed).unwrap(), "\"proposed\"");
    }
}
