//! Image decoding/encoding, exposure stacks, dataset manifests and
//! saturation masks.
//!
//! A dataset root holds a `manifest.json` listing every sample:
//!
//! ```json
//! {
//!   "base_time": 0.0025,
//!   "samples": [
//!     { "id": "2016-01-01-1200", "low": "low/a.jpg", "mid": "mid/a.jpg",
//!       "high": "high/a.jpg", "ground_truth": "gt/a.png",
//!       "exposure_times": [0.00025, 0.000625, 0.0025] }
//!   ]
//! }
//! ```
//!
//! Paths are resolved relative to the manifest's directory. When a sample
//! omits `exposure_times`, times are derived from `ev_offsets` (default
//! `[-4, -2, 0]`) as `base_time * 2^ev`.

use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::{DynamicImage, GrayImage, ImageFormat, ImageReader, RgbImage};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-channel threshold above which an 8-bit value counts as saturated.
pub const SATURATION_LEVEL: u8 = 250;

/// Default EV offsets of the low, mid and high members of a stack.
pub const DEFAULT_EV_OFFSETS: [f64; 3] = [-4.0, -2.0, 0.0];

/// Name of the manifest file looked up inside a dataset root.
pub const MANIFEST_FILE: &str = "manifest.json";

/// An 8-bit RGB image with the exposure it was captured at.
#[derive(Clone, Debug, PartialEq)]
pub struct LdrImage {
    width: u32,
    height: u32,
    pixels: Vec<[u8; 3]>,
    exposure_time: f64,
    ev_offset: f64,
}

impl LdrImage {
    pub fn new(
        width: u32,
        height: u32,
        pixels: Vec<[u8; 3]>,
        exposure_time: f64,
        ev_offset: f64,
    ) -> Result<Self> {
        if pixels.len() != width as usize * height as usize {
            return Err(Error::InvalidImage(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        if !(exposure_time.is_finite() && exposure_time > 0.0) {
            return Err(Error::param(format!(
                "exposure time must be positive, got {exposure_time}"
            )));
        }
        if !ev_offset.is_finite() {
            return Err(Error::param("ev offset must be finite"));
        }
        Ok(Self {
            width,
            height,
            pixels,
            exposure_time,
            ev_offset,
        })
    }

    /// Builds an image by evaluating `f(x, y)` for every pixel in row-major order.
    pub fn from_fn(
        width: u32,
        height: u32,
        exposure_time: f64,
        ev_offset: f64,
        mut f: impl FnMut(u32, u32) -> [u8; 3],
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels, exposure_time, ev_offset)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        self.pixels[(y * self.width + x) as usize]
    }

    pub fn exposure_time(&self) -> f64 {
        self.exposure_time
    }

    pub fn ev_offset(&self) -> f64 {
        self.ev_offset
    }

    /// Same pixels, different exposure metadata.
    pub fn with_exposure(mut self, exposure_time: f64, ev_offset: f64) -> Result<Self> {
        if !(exposure_time.is_finite() && exposure_time > 0.0) {
            return Err(Error::param(format!(
                "exposure time must be positive, got {exposure_time}"
            )));
        }
        self.exposure_time = exposure_time;
        self.ev_offset = ev_offset;
        Ok(self)
    }

    pub fn to_rgb_image(&self) -> RgbImage {
        let raw = self.pixels.iter().flatten().copied().collect();
        RgbImage::from_raw(self.width, self.height, raw).expect("buffer length matches dimensions")
    }

    /// Writes the image as PNG (atomically).
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = encode_png(DynamicImage::ImageRgb8(self.to_rgb_image()), path)?;
        write_atomic(path, &bytes)
    }
}

/// Three co-registered exposures of one scene, ordered by exposure time.
#[derive(Clone, Debug, PartialEq)]
pub struct ExposureStack {
    id: String,
    low: LdrImage,
    mid: LdrImage,
    high: LdrImage,
}

impl ExposureStack {
    pub fn new(id: impl Into<String>, low: LdrImage, mid: LdrImage, high: LdrImage) -> Result<Self> {
        let dims = low.dimensions();
        for member in [&mid, &high] {
            if member.dimensions() != dims {
                return Err(Error::DimensionMismatch {
                    expected: dims,
                    found: member.dimensions(),
                });
            }
        }
        if !(low.exposure_time < mid.exposure_time && mid.exposure_time < high.exposure_time) {
            return Err(Error::param(format!(
                "exposure times must increase low < mid < high, got {} / {} / {}",
                low.exposure_time, mid.exposure_time, high.exposure_time
            )));
        }
        Ok(Self {
            id: id.into(),
            low,
            mid,
            high,
        })
    }

    /// Orders three exposures by exposure time before validating.
    pub fn from_unordered(id: impl Into<String>, images: [LdrImage; 3]) -> Result<Self> {
        let mut images = images;
        images.sort_by(|a, b| a.exposure_time.total_cmp(&b.exposure_time));
        let [low, mid, high] = images;
        Self::new(id, low, mid, high)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn low(&self) -> &LdrImage {
        &self.low
    }

    pub fn mid(&self) -> &LdrImage {
        &self.mid
    }

    pub fn high(&self) -> &LdrImage {
        &self.high
    }

    /// Members in low, mid, high order.
    pub fn members(&self) -> [&LdrImage; 3] {
        [&self.low, &self.mid, &self.high]
    }

    pub fn dimensions(&self) -> (u32, u32) {
        self.low.dimensions()
    }

    pub fn exposure_times(&self) -> [f64; 3] {
        [
            self.low.exposure_time,
            self.mid.exposure_time,
            self.high.exposure_time,
        ]
    }

    /// Multiplies every exposure time by `k`, keeping the pixels.
    pub fn with_scaled_times(&self, k: f64) -> Result<Self> {
        let scale = |img: &LdrImage| img.clone().with_exposure(img.exposure_time * k, img.ev_offset);
        Self::new(self.id.clone(), scale(&self.low)?, scale(&self.mid)?, scale(&self.high)?)
    }
}

/// Per-pixel cloud (true) / sky (false) labels.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    cloud: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32, cloud: Vec<bool>) -> Result<Self> {
        if cloud.len() != width as usize * height as usize {
            return Err(Error::InvalidImage(format!(
                "{} labels for a {width}x{height} mask",
                cloud.len()
            )));
        }
        Ok(Self {
            width,
            height,
            cloud,
        })
    }

    pub fn filled(width: u32, height: u32, cloud: bool) -> Self {
        Self {
            width,
            height,
            cloud: vec![cloud; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut cloud = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                cloud.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            cloud,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.cloud.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cloud.is_empty()
    }

    /// `true` = cloud.
    pub fn labels(&self) -> &[bool] {
        &self.cloud
    }

    /// Label as 1 (cloud) or 0 (sky).
    pub fn label(&self, x: u32, y: u32) -> u8 {
        self.cloud[(y * self.width + x) as usize] as u8
    }

    pub fn cloud_count(&self) -> usize {
        self.cloud.iter().filter(|&&c| c).count()
    }

    pub fn complement(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            cloud: self.cloud.iter().map(|c| !c).collect(),
        }
    }

    pub fn to_gray_image(&self) -> GrayImage {
        let raw = self.cloud.iter().map(|&c| if c { 255 } else { 0 }).collect();
        GrayImage::from_raw(self.width, self.height, raw).expect("buffer length matches dimensions")
    }

    /// Crops the same window [`crop_centered`] would take from an image.
    pub fn crop_centered(&self, center: (u32, u32), side: u32) -> Result<Self> {
        let (x0, y0) = crop_origin((self.width, self.height), center, side)?;
        Ok(Self::from_fn(side, side, |x, y| {
            self.cloud[((y0 + y) * self.width + x0 + x) as usize]
        }))
    }
}

/// Per-pixel saturation flags.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SaturationMask {
    width: u32,
    height: u32,
    flags: Vec<bool>,
}

impl SaturationMask {
    pub fn new(width: u32, height: u32, flags: Vec<bool>) -> Result<Self> {
        if flags.len() != width as usize * height as usize {
            return Err(Error::InvalidImage(format!(
                "{} flags for a {width}x{height} mask",
                flags.len()
            )));
        }
        Ok(Self {
            width,
            height,
            flags,
        })
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    pub fn intersect(&self, other: &SaturationMask) -> Result<Self> {
        if self.dimensions() != other.dimensions() {
            return Err(Error::DimensionMismatch {
                expected: self.dimensions(),
                found: other.dimensions(),
            });
        }
        let flags = self.flags.iter().zip(&other.flags).map(|(a, b)| *a && *b).collect();
        Self::new(self.width, self.height, flags)
    }
}

pub fn is_saturated(px: [u8; 3]) -> bool {
    px.iter().all(|&c| c > SATURATION_LEVEL)
}

/// Flags pixels whose R, G and B all exceed 250.
pub fn saturation_mask_ldr(img: &LdrImage) -> SaturationMask {
    SaturationMask {
        width: img.width,
        height: img.height,
        flags: img.pixels.iter().map(|&p| is_saturated(p)).collect(),
    }
}

/// Flags pixels saturated in all three members of the stack.
pub fn saturation_mask_hdr(stack: &ExposureStack) -> SaturationMask {
    let flags = stack
        .low
        .pixels
        .iter()
        .zip(&stack.mid.pixels)
        .zip(&stack.high.pixels)
        .map(|((&l, &m), &h)| is_saturated(l) && is_saturated(m) && is_saturated(h))
        .collect();
    SaturationMask {
        width: stack.low.width,
        height: stack.low.height,
        flags,
    }
}

/// Decodes an 8-bit RGB PNG or JPEG.
pub fn load_ldr(path: impl AsRef<Path>, exposure_time: f64, ev_offset: f64) -> Result<LdrImage> {
    let path = path.as_ref();
    let img = decode(path)?;
    let rgb = match img {
        DynamicImage::ImageRgb8(rgb) => rgb,
        other => {
            return Err(Error::NotRgb {
                path: path.to_path_buf(),
                found: format!("{:?}", other.color()),
            })
        }
    };
    let (width, height) = rgb.dimensions();
    let pixels = rgb.pixels().map(|p| p.0).collect();
    LdrImage::new(width, height, pixels, exposure_time, ev_offset)
}

fn decode(path: &Path) -> Result<DynamicImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let reader = ImageReader::new(Cursor::new(bytes))
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    reader.decode().map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Writes `mask` as a single-channel PNG with values 0 (sky) and 255 (cloud).
pub fn save_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_png(DynamicImage::ImageLuma8(mask.to_gray_image()), path)?;
    write_atomic(path, &bytes)
}

/// Reads a 0/255 mask. Gray-valued RGB rasters are accepted; any value other
/// than 0 or 255 is rejected.
pub fn load_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let path = path.as_ref();
    let img = decode(path)?;
    let invalid = |message: String| Error::InvalidMask {
        path: path.to_path_buf(),
        message,
    };
    let (width, height) = (img.width(), img.height());
    let values: Vec<u8> = match img {
        DynamicImage::ImageLuma8(g) => g.into_raw(),
        DynamicImage::ImageRgb8(rgb) => rgb
            .pixels()
            .map(|p| {
                let [r, g, b] = p.0;
                if r == g && g == b {
                    Ok(r)
                } else {
                    Err(invalid(format!("non-gray pixel {:?}", p.0)))
                }
            })
            .collect::<Result<_>>()?,
        other => return Err(invalid(format!("unsupported color type {:?}", other.color()))),
    };
    let cloud = values
        .into_iter()
        .map(|v| match v {
            0 => Ok(false),
            255 => Ok(true),
            v => Err(invalid(format!("value {v} is neither 0 nor 255"))),
        })
        .collect::<Result<Vec<_>>>()?;
    BinaryMask::new(width, height, cloud)
}

fn crop_origin(dims: (u32, u32), center: (u32, u32), side: u32) -> Result<(u32, u32)> {
    let half = i64::from(side / 2);
    let x0 = i64::from(center.0) - half;
    let y0 = i64::from(center.1) - half;
    if side == 0
        || x0 < 0
        || y0 < 0
        || x0 + i64::from(side) > i64::from(dims.0)
        || y0 + i64::from(side) > i64::from(dims.1)
    {
        return Err(Error::OutOfBounds(format!(
            "{side}x{side} window centred at {center:?} in a {}x{} image",
            dims.0, dims.1
        )));
    }
    Ok((x0 as u32, y0 as u32))
}

/// Square crop of `side` pixels whose top-left corner is `center - side/2`.
pub fn crop_centered(img: &LdrImage, center: (u32, u32), side: u32) -> Result<LdrImage> {
    let (x0, y0) = crop_origin(img.dimensions(), center, side)?;
    LdrImage::from_fn(side, side, img.exposure_time, img.ev_offset, |x, y| {
        img.pixel(x0 + x, y0 + y)
    })
}

fn encode_png(img: DynamicImage, path: &Path) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    img.write_to(&mut Cursor::new(&mut bytes), ImageFormat::Png)
        .map_err(|e| Error::Encode {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
    Ok(bytes)
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| Error::param(format!("{} has no file name", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Optional crop applied to every member (and the ground truth) at load time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropSpec {
    pub center: [u32; 2],
    pub side: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub low: PathBuf,
    pub mid: PathBuf,
    pub high: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exposure_times: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ev_offsets: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_time: Option<f64>,
    /// Tone-mapped rendition shipped with the dataset, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tonemapped: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crop: Option<CropSpec>,
}

impl ManifestEntry {
    /// Exposure times and EV offsets of the low, mid and high members.
    pub fn exposures(&self, default_base_time: Option<f64>) -> Result<([f64; 3], [f64; 3])> {
        let bad = |message: String| Error::Manifest {
            path: PathBuf::from(&self.id),
            message,
        };
        match self.exposure_times {
            Some(times) => {
                if times.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
                    return Err(bad(format!("non-positive exposure time in {times:?}")));
                }
                let evs = self
                    .ev_offsets
                    .unwrap_or_else(|| times.map(|t| (t / times[2]).log2()));
                Ok((times, evs))
            }
            None => {
                let evs = self.ev_offsets.unwrap_or(DEFAULT_EV_OFFSETS);
                let base = self
                    .base_time
                    .or(default_base_time)
                    .ok_or_else(|| bad("neither exposure_times nor base_time given".into()))?;
                if !(base.is_finite() && base > 0.0) {
                    return Err(bad(format!("base_time must be positive, got {base}")));
                }
                Ok((evs.map(|ev| base * ev.exp2()), evs))
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_time: Option<f64>,
    pub samples: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Manifest {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

/// A loaded sample: the stack plus whatever else the manifest provides.
#[derive(Clone, Debug)]
pub struct Sample {
    pub stack: ExposureStack,
    pub truth: Option<BinaryMask>,
    pub tonemapped: Option<LdrImage>,
}

impl Sample {
    pub fn id(&self) -> &str {
        self.stack.id()
    }
}

/// A dataset root and its manifest.
#[derive(Clone, Debug)]
pub struct Dataset {
    root: PathBuf,
    manifest: Manifest,
}

impl Dataset {
    /// Opens either a directory containing `manifest.json` or a manifest file.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let manifest_path = if path.is_dir() {
            path.join(MANIFEST_FILE)
        } else {
            path.to_path_buf()
        };
        let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        let manifest = Manifest::from_json(&text, &manifest_path)?;
        let root = manifest_path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default();
        Ok(Self { root, manifest })
    }

    pub fn from_manifest(root: impl Into<PathBuf>, manifest: Manifest) -> Self {
        Self {
            root: root.into(),
            manifest,
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.manifest.samples
    }

    pub fn entry(&self, id: &str) -> Option<&ManifestEntry> {
        self.manifest.samples.iter().find(|e| e.id == id)
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    /// Loads the stack only.
    pub fn load_stack(&self, entry: &ManifestEntry) -> Result<ExposureStack> {
        load_stack(&self.root, entry, self.manifest.base_time)
    }

    /// Loads stack, ground truth and tonemapped rendition (when listed).
    pub fn load_sample(&self, entry: &ManifestEntry) -> Result<Sample> {
        let stack = self.load_stack(entry)?;
        let uncropped = entry.crop.map(|_| {
            let p = self.resolve(&entry.mid);
            image::image_dimensions(&p).ok()
        });
        let fit = |mask: BinaryMask| -> Result<BinaryMask> {
            match (entry.crop, uncropped.flatten()) {
                (Some(c), Some(full)) if mask.dimensions() == full && full != stack.dimensions() => {
                    mask.crop_centered((c.center[0], c.center[1]), c.side)
                }
                _ => Ok(mask),
            }
        };
        let truth = match &entry.ground_truth {
            Some(p) => {
                let mask = fit(load_mask(self.resolve(p))?)?;
                if mask.dimensions() != stack.dimensions() {
                    return Err(Error::DimensionMismatch {
                        expected: stack.dimensions(),
                        found: mask.dimensions(),
                    });
                }
                Some(mask)
            }
            None => None,
        };
        let tonemapped = match &entry.tonemapped {
            Some(p) => {
                let img = load_ldr(self.resolve(p), 1.0, 0.0)?;
                if img.dimensions() != stack.dimensions() {
                    return Err(Error::DimensionMismatch {
                        expected: stack.dimensions(),
                        found: img.dimensions(),
                    });
                }
                Some(img)
            }
            None => None,
        };
        Ok(Sample {
            stack,
            truth,
            tonemapped,
        })
    }

    /// Loads every sample in parallel; results keep manifest order.
    pub fn load_all(&self) -> Vec<(String, Result<Sample>)> {
        self.manifest
            .samples
            .par_iter()
            .map(|e| (e.id.clone(), self.load_sample(e)))
            .collect()
    }
}

/// Loads the three members listed by `entry`, resolving paths against `root`.
pub fn load_stack(root: &Path, entry: &ManifestEntry, base_time: Option<f64>) -> Result<ExposureStack> {
    let (times, evs) = entry.exposures(base_time)?;
    let members = [("low", &entry.low), ("mid", &entry.mid), ("high", &entry.high)];
    let mut images = Vec::with_capacity(3);
    for (i, (member, rel)) in members.into_iter().enumerate() {
        let path = if rel.is_absolute() {
            rel.clone()
        } else {
            root.join(rel)
        };
        if !path.exists() {
            return Err(Error::MissingMember {
                sample: entry.id.clone(),
                member,
            });
        }
        let mut img = load_ldr(&path, times[i], evs[i])?;
        if let Some(c) = entry.crop {
            img = crop_centered(&img, (c.center[0], c.center[1]), c.side)?;
        }
        images.push(img);
    }
    let high = images.pop().expect("three members");
    let mid = images.pop().expect("three members");
    let low = images.pop().expect("three members");
    ExposureStack::new(entry.id.clone(), low, mid, high)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solid(w: u32, h: u32, px: [u8; 3], t: f64) -> LdrImage {
        LdrImage::from_fn(w, h, t, 0.0, |_, _| px).unwrap()
    }

    #[test]
    fn saturation_is_strict() {
        assert!(is_saturated([251, 252, 255]));
        assert!(!is_saturated([250, 255, 255]));
        assert_eq!(saturation_mask_ldr(&solid(3, 3, [0, 0, 0], 1.0)).count(), 0);
    }

    #[test]
    fn hdr_saturation_needs_all_members() {
        let sat = [255, 255, 255];
        let ok = [100, 100, 100];
        let stack = ExposureStack::new(
            "s",
            solid(1, 1, ok, 0.25),
            solid(1, 1, ok, 0.5),
            solid(1, 1, sat, 1.0),
        )
        .unwrap();
        assert_eq!(saturation_mask_hdr(&stack).count(), 0);
        let stack = ExposureStack::new(
            "s",
            solid(1, 1, sat, 0.25),
            solid(1, 1, sat, 0.5),
            solid(1, 1, sat, 1.0),
        )
        .unwrap();
        assert_eq!(saturation_mask_hdr(&stack).count(), 1);
    }

    #[test]
    fn stack_rejects_mismatched_dimensions() {
        let err = ExposureStack::new(
            "s",
            solid(499, 500, [0, 0, 0], 1.0 / 4000.0),
            solid(500, 500, [0, 0, 0], 1.0 / 1600.0),
            solid(500, 500, [0, 0, 0], 1.0 / 400.0),
        )
        .unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn stack_orders_members_by_time() {
        let px = [7, 8, 9];
        let stack = ExposureStack::from_unordered(
            "s",
            [
                solid(2, 2, px, 1.0 / 400.0),
                solid(2, 2, px, 1.0 / 4000.0),
                solid(2, 2, px, 1.0 / 1600.0),
            ],
        )
        .unwrap();
        assert_eq!(stack.exposure_times(), [1.0 / 4000.0, 1.0 / 1600.0, 1.0 / 400.0]);
        assert!(ExposureStack::new(
            "s",
            solid(2, 2, px, 1.0),
            solid(2, 2, px, 1.0),
            solid(2, 2, px, 2.0)
        )
        .is_err());
    }

    #[test]
    fn crop_geometry() {
        let img = LdrImage::from_fn(1000, 1000, 1.0, 0.0, |x, y| [(x % 256) as u8, (y % 256) as u8, 0]).unwrap();
        let c = crop_centered(&img, (500, 500), 500).unwrap();
        assert_eq!(c.dimensions(), (500, 500));
        assert_eq!(c.pixel(0, 0), img.pixel(250, 250));

        let small = LdrImage::from_fn(500, 500, 1.0, 0.0, |x, y| [(x % 256) as u8, (y % 256) as u8, 7]).unwrap();
        assert_eq!(crop_centered(&small, (250, 250), 500).unwrap(), small);
        assert!(matches!(
            crop_centered(&small, (10, 10), 500),
            Err(Error::OutOfBounds(_))
        ));
    }

    #[test]
    fn ev_offsets_map_to_times() {
        let entry = ManifestEntry {
            id: "a".into(),
            low: "l.png".into(),
            mid: "m.png".into(),
            high: "h.png".into(),
            ground_truth: None,
            exposure_times: None,
            ev_offsets: None,
            base_time: None,
            tonemapped: None,
            crop: None,
        };
        let (times, evs) = entry.exposures(Some(1.0 / 400.0)).unwrap();
        assert_eq!(evs, [-4.0, -2.0, 0.0]);
        assert_eq!(times, [1.0 / 6400.0, 1.0 / 1600.0, 1.0 / 400.0]);
        assert!(entry.exposures(None).is_err());
    }
}
