//! Synthetic sky scenes and a gamma camera for tests and demos.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset_io::{BinaryMask, ExposureStack, LdrImage};
use crate::error::{Error, Result};
use crate::radiance::{RadianceMap, ResponseCurve};

/// `z = 255 * clamp(gain * E * dt, 0, 1)^(1/gamma)`, rounded.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaCamera {
    pub gamma: f64,
    pub gain: f64,
}

impl Default for GammaCamera {
    fn default() -> Self {
        Self {
            gamma: 2.2,
            gain: 1.0,
        }
    }
}

impl GammaCamera {
    pub fn pixel_value(&self, exposure: f64) -> u8 {
        let x = (self.gain * exposure).clamp(0.0, 1.0);
        (255.0 * x.powf(1.0 / self.gamma)).round() as u8
    }

    pub fn render(&self, map: &RadianceMap, exposure_time: f64) -> Result<LdrImage> {
        let pixels = map
            .values()
            .iter()
            .map(|p| p.map(|e| self.pixel_value(e * exposure_time)))
            .collect();
        LdrImage::new(map.width(), map.height(), pixels, exposure_time, 0.0)
    }

    /// Renders three exposures; EV offsets are relative to the longest.
    pub fn expose(&self, map: &RadianceMap, times: [f64; 3], id: &str) -> Result<ExposureStack> {
        let longest = times.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let images = times
            .map(|t| self.render(map, t).and_then(|img| img.with_exposure(t, (t / longest).log2())));
        let [a, b, c] = images;
        ExposureStack::from_unordered(id, [a?, b?, c?])
    }

    /// The exact log-exposure curve `g(z) = gamma ln(z/255) - ln gain`, with
    /// `z = 0` evaluated at half a code value.
    pub fn response(&self) -> Result<ResponseCurve> {
        ResponseCurve::from_fn(|_, z| {
            let z = f64::from(z).max(0.5);
            self.gamma * (z / 255.0).ln() - self.gain.ln()
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SunParams {
    /// Centre as a fraction of width and height.
    pub center: [f64; 2],
    /// Disk radius in pixels; the disk is far brighter than any exposure holds.
    pub disk_radius: f64,
    pub disk_radiance: f64,
    /// Bright sky around the disk, in pixels; zero disables it.
    pub aureole_radius: f64,
    /// Aureole radiance at the centre, falling linearly to 70% at the rim.
    pub aureole_rgb: [f64; 3],
    /// Peak of the multiplicative glow `1 + peak * exp(-d^2 / 2w^2)`.
    pub glow_peak: f64,
    /// Glow width as a fraction of the image width.
    pub glow_width: f64,
}

impl Default for SunParams {
    fn default() -> Self {
        Self {
            center: [0.7, 0.3],
            disk_radius: 3.0,
            disk_radiance: 1e4,
            aureole_radius: 14.0,
            aureole_rgb: [8.0, 12.0, 20.0],
            glow_peak: 3.0,
            glow_width: 0.12,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneParams {
    pub width: u32,
    pub height: u32,
    pub sky_rgb: [f64; 3],
    /// Sky brightness factor range, top row to bottom row.
    pub gradient: [f64; 2],
    pub cloud_rgb: [f64; 3],
    /// Per-cloud brightness factor range.
    pub cloud_level: [f64; 2],
    /// Inclusive range of cloud count.
    pub clouds: [u32; 2],
    /// Cloud radius range as a fraction of the smaller image side.
    pub cloud_radius: [f64; 2],
    pub sun: Option<SunParams>,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            width: 128,
            height: 128,
            sky_rgb: [0.25, 0.45, 1.0],
            gradient: [0.6, 1.0],
            cloud_rgb: [0.9, 0.92, 1.0],
            cloud_level: [0.8, 1.6],
            clouds: [3, 6],
            cloud_radius: [0.08, 0.16],
            sun: Some(SunParams::default()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SkyScene {
    pub radiance: RadianceMap,
    /// Cloud pixels; the sun disk counts as sky.
    pub truth: BinaryMask,
    pub sun_disk: BinaryMask,
}

fn range(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Blue sky with a vertical gradient, clumps of gray cloud built from
/// overlapping discs, and an optional sun with a bright halo.
pub fn sky_scene(params: &SceneParams, seed: u64) -> Result<SkyScene> {
    let (w, h) = (params.width, params.height);
    if w == 0 || h == 0 {
        return Err(Error::param("scene must be at least 1x1"));
    }
    if params.clouds[0] > params.clouds[1] {
        return Err(Error::param("cloud count range is reversed"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = f64::from(w.min(h));
    let n_clouds = rng.random_range(params.clouds[0]..=params.clouds[1]);
    // each cloud: brightness and a set of (cx, cy, r) discs
    let mut clouds: Vec<(f64, Vec<(f64, f64, f64)>)> = Vec::new();
    for _ in 0..n_clouds {
        let level = range(&mut rng, params.cloud_level);
        let cx = rng.random_range(0.0..f64::from(w));
        let cy = rng.random_range(0.0..f64::from(h));
        let r = range(&mut rng, params.cloud_radius) * side;
        let lobes = rng.random_range(1..=4);
        let mut discs = vec![(cx, cy, r)];
        for _ in 0..lobes {
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            let d = rng.random_range(0.4..0.9) * r;
            discs.push((cx + d * a.cos(), cy + d * a.sin(), r * rng.random_range(0.5..0.9)));
        }
        clouds.push((level, discs));
    }

    let sun = params.sun;
    // (glow factor, distance to the sun centre)
    let glow = |x: f64, y: f64| match sun {
        Some(s) => {
            let (sx, sy) = (s.center[0] * f64::from(w), s.center[1] * f64::from(h));
            let width = s.glow_width * f64::from(w);
            let d2 = (x - sx).powi(2) + (y - sy).powi(2);
            (1.0 + s.glow_peak * (-d2 / (2.0 * width * width)).exp(), d2.sqrt())
        }
        None => (1.0, f64::INFINITY),
    };

    let mut values = Vec::with_capacity(w as usize * h as usize);
    let mut truth = Vec::with_capacity(values.capacity());
    let mut disk = Vec::with_capacity(values.capacity());
    for y in 0..h {
        let t = if h > 1 { f64::from(y) / f64::from(h - 1) } else { 0.0 };
        let grad = params.gradient[0] + (params.gradient[1] - params.gradient[0]) * t;
        for x in 0..w {
            let (px, py) = (f64::from(x) + 0.5, f64::from(y) + 0.5);
            let (g, d) = glow(px, py);
            let in_disk = sun.is_some_and(|s| d <= s.disk_radius);
            let cloud = clouds.iter().find(|(_, discs)| {
                discs
                    .iter()
                    .any(|&(cx, cy, r)| (px - cx).powi(2) + (py - cy).powi(2) <= r * r)
            });
            let (rgb, is_cloud) = if in_disk {
                let v = sun.map_or(1.0, |s| s.disk_radiance);
                ([v; 3], false)
            } else if let Some((level, _)) = cloud {
                (params.cloud_rgb.map(|c| c * level * g), true)
            } else if let Some(s) = sun.filter(|s| d <= s.aureole_radius) {
                let fall = 1.0 - 0.3 * d / s.aureole_radius;
                (s.aureole_rgb.map(|c| c * fall), false)
            } else {
                (params.sky_rgb.map(|c| c * grad * g), false)
            };
            values.push(rgb);
            truth.push(is_cloud);
            disk.push(in_disk);
        }
    }
    Ok(SkyScene {
        radiance: RadianceMap::new(w, h, values)?,
        truth: BinaryMask::new(w, h, truth)?,
        sun_disk: BinaryMask::new(w, h, disk)?,
    })
}
