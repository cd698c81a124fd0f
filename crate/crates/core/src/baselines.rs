//! Reference segmenters used for comparison.
//!
//! All work on 8-bit images scaled to [0, 1] and return cloud = true masks.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::color::{extract_channel, normalize_channel, ChannelId};
use crate::dataset_io::{BinaryMask, LdrImage};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    Long,
    Souza,
    Mantelli,
    Li,
}

impl Baseline {
    pub const ALL: [Baseline; 4] = [Baseline::Long, Baseline::Souza, Baseline::Mantelli, Baseline::Li];

    pub fn name(self) -> &'static str {
        match self {
            Baseline::Long => "long",
            Baseline::Souza => "souza",
            Baseline::Mantelli => "mantelli",
            Baseline::Li => "li",
        }
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "long" => Ok(Baseline::Long),
            "souza" => Ok(Baseline::Souza),
            "mantelli" | "mantelli-neto" => Ok(Baseline::Mantelli),
            "li" | "li-hyta" | "hyta" => Ok(Baseline::Li),
            other => Err(Error::param(format!("unknown baseline {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineParams {
    pub long_rb_threshold: f64,
    pub souza_sat_threshold: f64,
    pub mantelli_sky_centroid: [f64; 3],
    pub mantelli_cloud_centroid: [f64; 3],
    pub li_std_threshold: f64,
    /// Applied to the rescaled normalized ratio.
    pub li_fixed_threshold: f64,
}

impl Default for BaselineParams {
    fn default() -> Self {
        Self {
            long_rb_threshold: 0.6,
            souza_sat_threshold: 0.25,
            mantelli_sky_centroid: [0.35, 0.55, 0.85],
            mantelli_cloud_centroid: [0.75, 0.75, 0.75],
            li_std_threshold: 0.03,
            li_fixed_threshold: 0.25,
        }
    }
}

impl BaselineParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.long_rb_threshold > 0.0 && self.long_rb_threshold.is_finite()) {
            return Err(Error::param("long_rb_threshold must be positive"));
        }
        if !(0.0..=1.0).contains(&self.souza_sat_threshold) {
            return Err(Error::param("souza_sat_threshold must lie in [0, 1]"));
        }
        for c in [self.mantelli_sky_centroid, self.mantelli_cloud_centroid] {
            if c.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::param(format!("mantelli centroid {c:?} outside [0, 1]^3")));
            }
        }
        if self.mantelli_sky_centroid == self.mantelli_cloud_centroid {
            return Err(Error::param("mantelli centroids must differ"));
        }
        if !(self.li_std_threshold >= 0.0 && self.li_std_threshold.is_finite()) {
            return Err(Error::param("li_std_threshold must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.li_fixed_threshold) {
            return Err(Error::param("li_fixed_threshold must lie in [0, 1]"));
        }
        Ok(())
    }
}

fn unit(p: [u8; 3]) -> [f64; 3] {
    p.map(|v| f64::from(v) / 255.0)
}

fn pixelwise(img: &LdrImage, f: impl Fn([f64; 3]) -> bool) -> Result<BinaryMask> {
    let cloud = img.pixels().iter().map(|&p| f(unit(p))).collect();
    BinaryMask::new(img.width(), img.height(), cloud)
}

pub fn segment(method: Baseline, img: &LdrImage, params: &BaselineParams) -> Result<BinaryMask> {
    match method {
        Baseline::Long => segment_long(img, params),
        Baseline::Souza => segment_souza(img, params),
        Baseline::Mantelli => segment_mantelli(img, params),
        Baseline::Li => segment_li_hyta(img, params),
    }
}

/// Cloud where R/B exceeds the threshold; B = 0 counts as cloud.
pub fn segment_long(img: &LdrImage, params: &BaselineParams) -> Result<BinaryMask> {
    params.validate()?;
    let t = params.long_rb_threshold;
    let cloud = img
        .pixels()
        .iter()
        .map(|&[r, _, b]| b == 0 || f64::from(r) / f64::from(b) > t)
        .collect();
    BinaryMask::new(img.width(), img.height(), cloud)
}

/// IHS saturation `1 - 3 min / (R + G + B)`, zero at black.
pub fn ihs_saturation([r, g, b]: [f64; 3]) -> f64 {
    let sum = r + g + b;
    if sum > 0.0 {
        1.0 - 3.0 * r.min(g).min(b) / sum
    } else {
        0.0
    }
}

/// Cloud where the IHS saturation is below the threshold.
pub fn segment_souza(img: &LdrImage, params: &BaselineParams) -> Result<BinaryMask> {
    params.validate()?;
    let t = params.souza_sat_threshold;
    pixelwise(img, |p| ihs_saturation(p) < t)
}

fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|i| (a[i] - b[i]).powi(2)).sum()
}

/// Nearest RGB centroid; ties go to cloud.
pub fn segment_mantelli(img: &LdrImage, params: &BaselineParams) -> Result<BinaryMask> {
    params.validate()?;
    let (sky, cloud) = (params.mantelli_sky_centroid, params.mantelli_cloud_centroid);
    pixelwise(img, |p| dist2(p, cloud) <= dist2(p, sky))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LiBranch {
    Fixed,
    Adaptive,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LiOutcome {
    pub mask: BinaryMask,
    pub branch: LiBranch,
    pub std: f64,
    /// On the rescaled ratio; pixels strictly below it are cloud.
    pub threshold: f64,
}

/// Minimum-cross-entropy threshold over a 256-bin histogram.
///
/// Returns the bin `t` such that bins `0..=t` form the lower class, or
/// `None` if no split leaves both classes non-empty. Bin `i` has level
/// `i + 1` so that logarithms stay finite.
pub fn mce_threshold(hist: &[u64; 256]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    let total_m: f64 = hist.iter().map(|&h| h as f64).sum();
    let total_s: f64 = hist
        .iter()
        .enumerate()
        .map(|(i, &h)| (i + 1) as f64 * h as f64)
        .sum();
    let (mut m0, mut s0) = (0.0, 0.0);
    for t in 0..255 {
        m0 += hist[t] as f64;
        s0 += (t + 1) as f64 * hist[t] as f64;
        let (m1, s1) = (total_m - m0, total_s - s0);
        if m0 == 0.0 || m1 == 0.0 {
            continue;
        }
        let eta = -s0 * (s0 / m0).ln() - s1 * (s1 / m1).ln();
        if best.map_or(true, |(_, e)| eta < e) {
            best = Some((t, eta));
        }
    }
    best.map(|(t, _)| t)
}

/// Histogram bin of a value in [0, 1].
pub fn histogram_bin(v: f64) -> usize {
    (v.clamp(0.0, 1.0) * 255.0).round() as usize
}

/// Fixed threshold for near-unimodal images, minimum cross entropy otherwise,
/// on the min-max rescaled normalized blue-red ratio.
pub fn segment_li_hyta_detailed(img: &LdrImage, params: &BaselineParams) -> Result<LiOutcome> {
    params.validate()?;
    let ratio = normalize_channel(&extract_channel(img, ChannelId::NORMALIZED_BR)?);
    let v = ratio.values();
    let n = v.len().max(1) as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    let (w, h) = img.dimensions();
    let fixed = |std| -> Result<LiOutcome> {
        let t = params.li_fixed_threshold;
        Ok(LiOutcome {
            mask: BinaryMask::new(w, h, v.iter().map(|&x| x < t).collect())?,
            branch: LiBranch::Fixed,
            std,
            threshold: t,
        })
    };
    if std < params.li_std_threshold {
        return fixed(std);
    }
    let mut hist = [0u64; 256];
    for &x in v {
        hist[histogram_bin(x)] += 1;
    }
    let Some(t) = mce_threshold(&hist) else {
        return fixed(std);
    };
    Ok(LiOutcome {
        mask: BinaryMask::new(w, h, v.iter().map(|&x| histogram_bin(x) <= t).collect())?,
        branch: LiBranch::Adaptive,
        std,
        threshold: (t as f64 + 0.5) / 255.0,
    })
}

pub fn segment_li_hyta(img: &LdrImage, params: &BaselineParams) -> Result<BinaryMask> {
    Ok(segment_li_hyta_detailed(img, params)?.mask)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(rgb: [u8; 3]) -> LdrImage {
        LdrImage::new(1, 1, vec![rgb], 1.0, 0.0).unwrap()
    }

    fn is_cloud(mask: Result<BinaryMask>) -> bool {
        mask.unwrap().labels()[0]
    }

    #[test]
    fn long_ratio() {
        let p = BaselineParams::default();
        assert!(is_cloud(segment_long(&one([204, 0, 255]), &p)));
        assert!(!is_cloud(segment_long(&one([0, 0, 255]), &p)));
        assert!(is_cloud(segment_long(&one([128, 128, 128]), &p)));
        assert!(is_cloud(segment_long(&one([0, 0, 0]), &p)));
    }

    #[test]
    fn souza_saturation() {
        assert!((ihs_saturation([0.4, 0.5, 0.9]) - 1.0 / 3.0).abs() < 1e-12);
        let p = BaselineParams::default();
        assert!(is_cloud(segment_souza(&one([90, 90, 90]), &p)));
        assert!(!is_cloud(segment_souza(&one([0, 0, 255]), &p)));
        assert!(is_cloud(segment_souza(&one([0, 0, 0]), &p)));
    }

    #[test]
    fn mantelli_nearest() {
        let p = BaselineParams {
            mantelli_sky_centroid: [0.0, 0.0, 1.0],
            mantelli_cloud_centroid: [1.0, 1.0, 1.0],
            ..Default::default()
        };
        assert!(is_cloud(segment_mantelli(&one([255, 255, 255]), &p)));
        assert!(!is_cloud(segment_mantelli(&one([0, 0, 255]), &p)));
        // equidistant from both
        let p = BaselineParams {
            mantelli_sky_centroid: [0.2, 0.0, 0.0],
            mantelli_cloud_centroid: [0.0, 0.2, 0.0],
            ..Default::default()
        };
        assert!(is_cloud(segment_mantelli(&one([0, 0, 0]), &p)));
        let p = BaselineParams {
            mantelli_sky_centroid: [0.5; 3],
            mantelli_cloud_centroid: [0.5; 3],
            ..Default::default()
        };
        assert!(segment_mantelli(&one([0, 0, 0]), &p).is_err());
    }

    #[test]
    fn mce_two_levels() {
        let mut hist = [0u64; 256];
        hist[51] = 100;
        hist[204] = 100;
        let t = mce_threshold(&hist).unwrap();
        assert!((51..204).contains(&t));
        assert_eq!(mce_threshold(&[0; 256]), None);
        let mut single = [0u64; 256];
        single[10] = 5;
        assert_eq!(mce_threshold(&single), None);
    }

    #[test]
    fn li_constant_uses_fixed_branch() {
        let img = LdrImage::from_fn(4, 4, 1.0, 0.0, |_, _| [100, 120, 200]).unwrap();
        let out = segment_li_hyta_detailed(&img, &BaselineParams::default()).unwrap();
        assert_eq!(out.branch, LiBranch::Fixed);
        let n = out.mask.cloud_count();
        assert!(n == 0 || n == 16);
    }

    #[test]
    fn names_round_trip() {
        for b in Baseline::ALL {
            assert_eq!(b.name().parse::<Baseline>().unwrap(), b);
        }
        assert!("otsu".parse::<Baseline>().is_err());
    }
}
