//! The sixteen color components used for sky/cloud analysis.
//!
//! | id  | component | id  | component     |
//! |-----|-----------|-----|---------------|
//! | c1  | R         | c9  | Q             |
//! | c2  | G         | c10 | L*            |
//! | c3  | B         | c11 | a*            |
//! | c4  | H         | c12 | b*            |
//! | c5  | S         | c13 | R/B           |
//! | c6  | V         | c14 | R-B           |
//! | c7  | Y         | c15 | (B-R)/(B+R)   |
//! | c8  | I         | c16 | C = max - min |

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset_io::{write_atomic, LdrImage};
use crate::error::{Error, Result};
use crate::pfm::{self, PfmImage};
use crate::radiance::RadianceMap;

/// One of c1..c16.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ChannelId(u8);

impl ChannelId {
    pub const R: ChannelId = ChannelId(1);
    pub const S: ChannelId = ChannelId(5);
    pub const RB_RATIO: ChannelId = ChannelId(13);
    pub const RB_DIFF: ChannelId = ChannelId(14);
    /// `(B - R) / (B + R)`, the default segmentation channel.
    pub const NORMALIZED_BR: ChannelId = ChannelId(15);

    pub fn new(index: u8) -> Result<Self> {
        if (1..=16).contains(&index) {
            Ok(Self(index))
        } else {
            Err(Error::param(format!("channel index {index} outside 1..=16")))
        }
    }

    pub fn index(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = ChannelId> {
        (1..=16).map(ChannelId)
    }

    pub fn name(self) -> &'static str {
        [
            "R", "G", "B", "H", "S", "V", "Y", "I", "Q", "L*", "a*", "b*", "R/B", "R-B",
            "(B-R)/(B+R)", "C",
        ][self.0 as usize - 1]
    }
}

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

impl FromStr for ChannelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let digits = s.trim().trim_start_matches(['c', 'C']);
        let index = digits
            .parse::<u8>()
            .map_err(|_| Error::param(format!("unrecognised channel {s:?}")))?;
        Self::new(index)
    }
}

impl TryFrom<String> for ChannelId {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ChannelId> for String {
    fn from(c: ChannelId) -> String {
        c.to_string()
    }
}

/// Single-plane image of one color component.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelMap {
    width: u32,
    height: u32,
    values: Vec<f64>,
    channel: ChannelId,
    normalized: bool,
    /// Pixels where a division guard fired (c13 with B = 0, c15 with B + R = 0).
    guarded: usize,
}

impl ChannelMap {
    pub fn new(width: u32, height: u32, values: Vec<f64>, channel: ChannelId) -> Result<Self> {
        if values.len() != width as usize * height as usize {
            return Err(Error::InvalidImage(format!(
                "{} values for a {width}x{height} channel map",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidImage("channel values must be finite".into()));
        }
        Ok(Self {
            width,
            height,
            values,
            channel,
            normalized: false,
            guarded: 0,
        })
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

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, x: u32, y: u32) -> f64 {
        self.values[(y * self.width + x) as usize]
    }

    pub fn channel(&self) -> ChannelId {
        self.channel
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn guarded_pixels(&self) -> usize {
        self.guarded
    }

    /// Applies `f` to every value, keeping the channel tag.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let mut out = Self::new(
            self.width,
            self.height,
            self.values.iter().map(|&v| f(v)).collect(),
            self.channel,
        )?;
        out.guarded = self.guarded;
        Ok(out)
    }

    pub fn save_pfm(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let img = PfmImage {
            width: self.width,
            height: self.height,
            channels: 1,
            data: self.values.iter().map(|&v| v as f32).collect(),
        };
        write_atomic(path, &pfm::encode(&img)?)?;
        let sidecar = serde_json::json!({
            "channel": self.channel,
            "normalized": self.normalized,
        });
        write_atomic(
            sidecar_path(path),
            serde_json::to_string_pretty(&sidecar).expect("json").as_bytes(),
        )
    }

    pub fn load_pfm(path: impl AsRef<Path>) -> Result<Self> {
        #[derive(Deserialize)]
        struct Sidecar {
            channel: ChannelId,
            normalized: bool,
        }
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let img = pfm::decode(&bytes)?;
        if img.channels != 1 {
            return Err(Error::Pfm("channel maps need a single-plane Pf file".into()));
        }
        let side = sidecar_path(path);
        let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        let meta: Sidecar = serde_json::from_str(&text).map_err(|e| Error::Manifest {
            path: side.clone(),
            message: e.to_string(),
        })?;
        let mut map = Self::new(
            img.width,
            img.height,
            img.data.iter().map(|&v| f64::from(v)).collect(),
            meta.channel,
        )?;
        map.normalized = meta.normalized;
        Ok(map)
    }
}

/// `foo.pfm` -> `foo.pfm.json`.
pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

/// Anything channels can be extracted from.
pub trait RgbSource {
    fn dimensions(&self) -> (u32, u32);
    /// RGB triples: 8-bit values scaled to [0,1], or linear radiance.
    fn rgb(&self) -> Vec<[f64; 3]>;
    /// Whether values are linear relative radiance (affects L*a*b*).
    fn is_radiance(&self) -> bool;
}

impl RgbSource for LdrImage {
    fn dimensions(&self) -> (u32, u32) {
        LdrImage::dimensions(self)
    }

    fn rgb(&self) -> Vec<[f64; 3]> {
        self.pixels()
            .iter()
            .map(|p| p.map(|v| f64::from(v) / 255.0))
            .collect()
    }

    fn is_radiance(&self) -> bool {
        false
    }
}

impl RgbSource for RadianceMap {
    fn dimensions(&self) -> (u32, u32) {
        RadianceMap::dimensions(self)
    }

    fn rgb(&self) -> Vec<[f64; 3]> {
        self.values().to_vec()
    }

    fn is_radiance(&self) -> bool {
        true
    }
}

const YIQ: [[f64; 3]; 3] = [
    [0.299, 0.587, 0.114],
    [0.596, -0.274, -0.322],
    [0.211, -0.523, 0.312],
];

// linear sRGB -> XYZ, D65
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.412_456_4, 0.357_576_1, 0.180_437_5],
    [0.212_672_9, 0.715_152_2, 0.072_175_0],
    [0.019_333_9, 0.119_192_0, 0.950_304_1],
];
const D65_WHITE: [f64; 3] = [0.950_47, 1.0, 1.088_83];

fn srgb_to_linear(v: f64) -> f64 {
    if v <= 0.040_45 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

fn mat_mul(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    std::array::from_fn(|i| m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2])
}

/// Hue in [0, 1) (fraction of a turn); 0 for achromatic pixels.
fn hue([r, g, b]: [f64; 3]) -> f64 {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let d = max - min;
    if d <= 0.0 {
        return 0.0;
    }
    let h = if max == r {
        ((g - b) / d).rem_euclid(6.0)
    } else if max == g {
        (b - r) / d + 2.0
    } else {
        (r - g) / d + 4.0
    };
    h / 6.0
}

/// Computes one component for every pixel of `source`.
pub fn extract_channel<S: RgbSource + ?Sized>(source: &S, channel: ChannelId) -> Result<ChannelMap> {
    let (w, h) = source.dimensions();
    let rgb = source.rgb();
    let mut guarded = 0usize;
    let values: Vec<f64> = match channel.index() {
        1..=3 => {
            let c = channel.index() as usize - 1;
            rgb.iter().map(|p| p[c]).collect()
        }
        4 => rgb.iter().map(|&p| hue(p)).collect(),
        5 => rgb
            .iter()
            .map(|&[r, g, b]| {
                let max = r.max(g).max(b);
                if max > 0.0 {
                    1.0 - r.min(g).min(b) / max
                } else {
                    0.0
                }
            })
            .collect(),
        6 => rgb.iter().map(|&[r, g, b]| r.max(g).max(b)).collect(),
        7..=9 => {
            let row = YIQ[channel.index() as usize - 7];
            rgb.iter()
                .map(|p| row[0] * p[0] + row[1] * p[1] + row[2] * p[2])
                .collect()
        }
        10..=12 => {
            let linear: Vec<[f64; 3]> = if source.is_radiance() {
                rgb.clone()
            } else {
                rgb.iter().map(|p| p.map(srgb_to_linear)).collect()
            };
            let mut xyz: Vec<[f64; 3]> = linear.iter().map(|&p| mat_mul(&RGB_TO_XYZ, p)).collect();
            if source.is_radiance() {
                let y_max = xyz.iter().map(|p| p[1]).fold(0.0, f64::max);
                if y_max > 0.0 {
                    for p in &mut xyz {
                        *p = p.map(|v| v / y_max);
                    }
                }
            }
            let which = channel.index() - 10;
            xyz.iter()
                .map(|&[x, y, z]| {
                    let fx = lab_f(x / D65_WHITE[0]);
                    let fy = lab_f(y / D65_WHITE[1]);
                    let fz = lab_f(z / D65_WHITE[2]);
                    match which {
                        0 => 116.0 * fy - 16.0,
                        1 => 500.0 * (fx - fy),
                        _ => 200.0 * (fy - fz),
                    }
                })
                .collect()
        }
        13 => rgb
            .iter()
            .map(|&[r, _, b]| {
                if b > 0.0 {
                    r / b
                } else {
                    guarded += 1;
                    0.0
                }
            })
            .collect(),
        14 => rgb.iter().map(|&[r, _, b]| r - b).collect(),
        15 => rgb
            .iter()
            .map(|&[r, _, b]| {
                let s = b + r;
                if s != 0.0 {
                    (b - r) / s
                } else {
                    guarded += 1;
                    0.0
                }
            })
            .collect(),
        16 => rgb
            .iter()
            .map(|&[r, g, b]| r.max(g).max(b) - r.min(g).min(b))
            .collect(),
        _ => unreachable!("ChannelId is validated"),
    };
    let mut map = ChannelMap::new(w, h, values, channel)?;
    map.guarded = guarded;
    Ok(map)
}

/// Min-max rescale to [0, 1]; constant maps become all 0.5.
pub fn normalize_channel(map: &ChannelMap) -> ChannelMap {
    let (min, max) = map
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = max - min;
    let values = if map.values.is_empty() {
        Vec::new()
    } else if range > 0.0 {
        map.values
            .iter()
            .map(|&v| ((v - min) / range).clamp(0.0, 1.0))
            .collect()
    } else {
        vec![0.5; map.values.len()]
    };
    ChannelMap {
        values,
        normalized: true,
        ..map.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn px(rgb: [u8; 3]) -> LdrImage {
        LdrImage::new(1, 1, vec![rgb], 1.0, 0.0).unwrap()
    }

    fn value(img: &LdrImage, c: u8) -> f64 {
        extract_channel(img, ChannelId::new(c).unwrap()).unwrap().values()[0]
    }

    #[test]
    fn ratio_channel_formula() {
        assert!((value(&px([100, 150, 200]), 15) - 1.0 / 3.0).abs() < 1e-12);
        let gray = px([90, 120, 90]);
        assert_eq!(value(&gray, 15), 0.0);
        assert_eq!(value(&gray, 14), 0.0);
        assert!((value(&gray, 16) - 30.0 / 255.0).abs() < 1e-12);
    }

    #[test]
    fn pure_blue_endpoints() {
        let blue = px([0, 0, 255]);
        assert_eq!(value(&blue, 15), 1.0);
        assert_eq!(value(&blue, 13), 0.0);
        assert_eq!(value(&blue, 5), 1.0);
        assert!((value(&blue, 4) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn division_guards() {
        let black = px([0, 0, 0]);
        let m = extract_channel(&black, ChannelId::NORMALIZED_BR).unwrap();
        assert_eq!(m.values()[0], 0.0);
        assert_eq!(m.guarded_pixels(), 1);
        let red = px([200, 0, 0]);
        let m = extract_channel(&red, ChannelId::RB_RATIO).unwrap();
        assert_eq!(m.values()[0], 0.0);
        assert_eq!(m.guarded_pixels(), 1);
        assert_eq!(value(&black, 4), 0.0);
        assert_eq!(value(&black, 5), 0.0);
    }

    #[test]
    fn lab_white_and_yiq_gray() {
        let white = px([255, 255, 255]);
        assert!((value(&white, 10) - 100.0).abs() < 1e-3);
        assert!(value(&white, 11).abs() < 1e-3);
        assert!(value(&white, 12).abs() < 1e-2);
        let gray = px([128, 128, 128]);
        assert!((value(&gray, 7) - 128.0 / 255.0).abs() < 1e-12);
        assert!(value(&gray, 8).abs() < 1e-12);
    }

    #[test]
    fn normalize_cases() {
        let m = ChannelMap::new(3, 1, vec![-1.0, 0.0, 1.0], ChannelId::NORMALIZED_BR).unwrap();
        let n = normalize_channel(&m);
        assert_eq!(n.values(), &[0.0, 0.5, 1.0]);
        assert!(n.is_normalized());
        let c = ChannelMap::new(2, 1, vec![3.0, 3.0], ChannelId::R).unwrap();
        assert_eq!(normalize_channel(&c).values(), &[0.5, 0.5]);
        let full = ChannelMap::new(3, 1, vec![0.0, 0.25, 1.0], ChannelId::R).unwrap();
        assert_eq!(normalize_channel(&full).values(), full.values());
    }

    #[test]
    fn channel_id_parsing() {
        assert_eq!("c15".parse::<ChannelId>().unwrap(), ChannelId::NORMALIZED_BR);
        assert_eq!("7".parse::<ChannelId>().unwrap().index(), 7);
        assert!("c17".parse::<ChannelId>().is_err());
        assert!(ChannelId::new(0).is_err());
        assert_eq!(ChannelId::all().count(), 16);
    }
}
