//! Display rendering of radiance maps.
//!
//! Both operators work on luminance and reattach color by ratio,
//! `C_out = C_in * L_out / L_in`, before quantizing to 8 bits.

use serde::{Deserialize, Serialize};

use crate::dataset_io::LdrImage;
use crate::error::{Error, Result};
use crate::radiance::RadianceMap;

const HIST_BINS: usize = 256;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TonemapMethod {
    #[default]
    Clahe,
    Photographic,
}

impl std::str::FromStr for TonemapMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "clahe" => Ok(Self::Clahe),
            "photographic" | "reinhard" => Ok(Self::Photographic),
            other => Err(Error::param(format!("unknown tone-mapping method {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TonemapParams {
    pub method: TonemapMethod,
    /// Histogram clip as a fraction of the tile's pixel count.
    pub clahe_clip_limit: f64,
    /// Tiles per side.
    pub clahe_tiles: u32,
    pub key_a: f64,
    pub epsilon: f64,
}

impl Default for TonemapParams {
    fn default() -> Self {
        Self {
            method: TonemapMethod::Clahe,
            clahe_clip_limit: 0.01,
            clahe_tiles: 8,
            key_a: 0.18,
            epsilon: 1e-6,
        }
    }
}

impl TonemapParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.clahe_clip_limit > 0.0 && self.clahe_clip_limit.is_finite()) {
            return Err(Error::param("clahe_clip_limit must be positive"));
        }
        if self.clahe_tiles < 1 {
            return Err(Error::param("clahe_tiles must be at least 1"));
        }
        if !(self.key_a > 0.0 && self.key_a.is_finite()) {
            return Err(Error::param("key_a must be positive"));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::param("epsilon must be positive"));
        }
        Ok(())
    }
}

fn luminance([r, g, b]: [f64; 3]) -> f64 {
    0.2126 * r + 0.7152 * g + 0.0722 * b
}

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn reattach(map: &RadianceMap, lum: &[f64], out_lum: &[f64]) -> Result<LdrImage> {
    let pixels = map
        .values()
        .iter()
        .zip(lum)
        .zip(out_lum)
        .map(|((&c, &l), &lo)| {
            let gray = c[0] == c[1] && c[1] == c[2];
            if l > 0.0 && !gray {
                c.map(|v| quantize(v * lo / l))
            } else {
                [quantize(lo); 3]
            }
        })
        .collect();
    LdrImage::new(map.width(), map.height(), pixels, 1.0, 0.0)
}

pub fn tonemap(map: &RadianceMap, params: &TonemapParams) -> Result<LdrImage> {
    match params.method {
        TonemapMethod::Clahe => tonemap_clahe(map, params),
        TonemapMethod::Photographic => tonemap_photographic(map, params),
    }
}

/// Per-tile equalization curves over a `tiles_x x tiles_y` grid.
struct ClaheGrid {
    width: u32,
    height: u32,
    tiles_x: usize,
    tiles_y: usize,
    /// `maps[ty * tiles_x + tx][bin]` in [0, 1].
    maps: Vec<[f64; HIST_BINS]>,
}

fn tile_bounds(extent: u32, tiles: usize, i: usize) -> (u32, u32) {
    let lo = (i as u64 * u64::from(extent) / tiles as u64) as u32;
    let hi = ((i as u64 + 1) * u64::from(extent) / tiles as u64) as u32;
    (lo, hi)
}

impl ClaheGrid {
    fn build(bins: &[u8], width: u32, height: u32, tiles: u32, clip: f64) -> Self {
        let tiles_x = (tiles as usize).min(width as usize).max(1);
        let tiles_y = (tiles as usize).min(height as usize).max(1);
        let mut maps = Vec::with_capacity(tiles_x * tiles_y);
        for ty in 0..tiles_y {
            let (y0, y1) = tile_bounds(height, tiles_y, ty);
            for tx in 0..tiles_x {
                let (x0, x1) = tile_bounds(width, tiles_x, tx);
                let mut hist = [0.0f64; HIST_BINS];
                for y in y0..y1 {
                    for x in x0..x1 {
                        hist[bins[(y * width + x) as usize] as usize] += 1.0;
                    }
                }
                let n = f64::from((x1 - x0) * (y1 - y0));
                let limit = (clip * n).max((n / HIST_BINS as f64).ceil());
                let mut excess = 0.0;
                for h in &mut hist {
                    if *h > limit {
                        excess += *h - limit;
                        *h = limit;
                    }
                }
                let spread = excess / HIST_BINS as f64;
                let mut cdf = 0.0;
                let mut map = [0.0; HIST_BINS];
                for (m, h) in map.iter_mut().zip(&hist) {
                    cdf += h + spread;
                    *m = (cdf / n).min(1.0);
                }
                maps.push(map);
            }
        }
        Self {
            width,
            height,
            tiles_x,
            tiles_y,
            maps,
        }
    }

    /// Neighbouring tile indices and the weight of the second one along an axis.
    fn axis(pos: u32, extent: u32, tiles: usize) -> (usize, usize, f64) {
        let centre = |i: usize| {
            let (lo, hi) = tile_bounds(extent, tiles, i);
            (f64::from(lo) + f64::from(hi)) / 2.0
        };
        let p = f64::from(pos) + 0.5;
        if tiles == 1 || p <= centre(0) {
            return (0, 0, 0.0);
        }
        if p >= centre(tiles - 1) {
            return (tiles - 1, tiles - 1, 0.0);
        }
        let mut i = 0;
        while centre(i + 1) < p {
            i += 1;
        }
        let (c0, c1) = (centre(i), centre(i + 1));
        (i, i + 1, (p - c0) / (c1 - c0))
    }

    fn transfer(&self, x: u32, y: u32, bin: u8) -> f64 {
        let (x0, x1, fx) = Self::axis(x, self.width, self.tiles_x);
        let (y0, y1, fy) = Self::axis(y, self.height, self.tiles_y);
        let m = |tx: usize, ty: usize| self.maps[ty * self.tiles_x + tx][bin as usize];
        let top = m(x0, y0) * (1.0 - fx) + m(x1, y0) * fx;
        let bottom = m(x0, y1) * (1.0 - fx) + m(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }
}

/// Log transform, CLAHE on luminance, ratio color reattachment.
///
/// A map whose log luminance is constant renders as mid-gray.
pub fn tonemap_clahe(map: &RadianceMap, params: &TonemapParams) -> Result<LdrImage> {
    params.validate()?;
    let (w, h) = map.dimensions();
    let lum: Vec<f64> = map.values().iter().map(|&p| luminance(p)).collect();
    let log: Vec<f64> = lum.iter().map(|&l| (l + params.epsilon).ln()).collect();
    let (lo, hi) = log
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if lum.is_empty() || !(hi > lo) {
        return LdrImage::new(w, h, vec![[128; 3]; lum.len()], 1.0, 0.0);
    }
    let bins: Vec<u8> = log
        .iter()
        .map(|&v| ((v - lo) / (hi - lo) * 255.0).round() as u8)
        .collect();
    let grid = ClaheGrid::build(&bins, w, h, params.clahe_tiles, params.clahe_clip_limit);
    let mut out_lum = Vec::with_capacity(bins.len());
    for y in 0..h {
        for x in 0..w {
            out_lum.push(grid.transfer(x, y, bins[(y * w + x) as usize]));
        }
    }
    reattach(map, &lum, &out_lum)
}

/// Global photographic operator: `L = a * lum / exp(mean ln(lum + eps))`,
/// displayed as `L / (1 + L)`.
pub fn tonemap_photographic(map: &RadianceMap, params: &TonemapParams) -> Result<LdrImage> {
    params.validate()?;
    let lum: Vec<f64> = map.values().iter().map(|&p| luminance(p)).collect();
    if lum.iter().all(|&l| l <= 0.0) {
        return Err(Error::ZeroRadiance);
    }
    let mean_log = lum.iter().map(|&l| (l + params.epsilon).ln()).sum::<f64>() / lum.len() as f64;
    let log_avg = mean_log.exp();
    let out_lum: Vec<f64> = lum
        .iter()
        .map(|&l| {
            let scaled = params.key_a * l / log_avg;
            scaled / (1.0 + scaled)
        })
        .collect();
    reattach(map, &lum, &out_lum)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray_map(w: u32, h: u32, f: impl Fn(u32, u32) -> f64) -> RadianceMap {
        RadianceMap::from_fn(w, h, |x, y| [f(x, y); 3]).unwrap()
    }

    #[test]
    fn constant_map_is_mid_gray() {
        let out = tonemap_clahe(&gray_map(20, 10, |_, _| 3.5), &TonemapParams::default()).unwrap();
        assert!(out.pixels().iter().all(|&p| p == [128, 128, 128]));
    }

    #[test]
    fn two_levels_stay_two_ordered_levels() {
        // checkerboard: every tile sees the same histogram
        let map = gray_map(64, 64, |x, y| if (x + y) % 2 == 0 { 1.0 } else { 1000.0 });
        let out = tonemap_clahe(&map, &TonemapParams::default()).unwrap();
        let dark = out.pixel(0, 0)[0];
        let bright = out.pixel(1, 0)[0];
        assert!(dark < bright);
        let mut levels: Vec<u8> = out.pixels().iter().map(|p| p[0]).collect();
        levels.sort_unstable();
        levels.dedup();
        assert_eq!(levels, vec![dark, bright]);
    }

    #[test]
    fn clahe_transfer_is_monotone_at_every_location() {
        let map = gray_map(40, 30, |x, y| ((x * 7 + y * 13) % 23) as f64 + 0.1 * f64::from(x));
        let lum: Vec<f64> = map.values().iter().map(|&p| luminance(p)).collect();
        let bins: Vec<u8> = lum.iter().map(|&l| (l * 10.0) as u8).collect();
        let grid = ClaheGrid::build(&bins, 40, 30, 8, 0.01);
        for (x, y) in [(0, 0), (5, 7), (20, 15), (39, 29), (13, 28)] {
            let curve: Vec<f64> = (0..=255u8).map(|b| grid.transfer(x, y, b)).collect();
            assert!(curve.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn photographic_uniform_map() {
        let params = TonemapParams::default();
        for v in [0.01, 1.0, 250.0] {
            let out = tonemap_photographic(&gray_map(4, 4, |_, _| v), &params).unwrap();
            assert!(out.pixels().iter().all(|&p| p == [39, 39, 39]), "v = {v}");
        }
    }

    #[test]
    fn photographic_saturates_towards_white() {
        let map = gray_map(2, 1, |x, _| if x == 0 { 1e-3 } else { 1e12 });
        let out = tonemap_photographic(&map, &TonemapParams::default()).unwrap();
        assert_eq!(out.pixel(1, 0), [255, 255, 255]);
    }

    #[test]
    fn photographic_rejects_black() {
        let err = tonemap_photographic(&gray_map(3, 3, |_, _| 0.0), &TonemapParams::default());
        assert!(matches!(err, Err(Error::ZeroRadiance)));
    }

    #[test]
    fn params_validation() {
        let mut p = TonemapParams::default();
        p.clahe_tiles = 0;
        assert!(p.validate().is_err());
        let p = TonemapParams {
            key_a: -1.0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
    }
}
