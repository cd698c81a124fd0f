//! Reference implementations and generators shared by the integration tests.
//!
//! Everything here is written from the textbook definitions and deliberately
//! avoids calling into the library code it is used to check.
#![allow(dead_code)]

use hdrcloudseg_core::dataset_io::{BinaryMask, LdrImage, Sample};
use hdrcloudseg_core::eval::ConfusionCounts;
use hdrcloudseg_core::segment::Seed;
use hdrcloudseg_core::synth::{sky_scene, GammaCamera, SceneParams};
use rand::Rng;

/// Unordered neighbour pairs, each listed once.
pub fn neighbour_pairs(w: usize, h: usize, eight: bool) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for p in 0..w * h {
        for q in p + 1..w * h {
            let dx = (p % w).abs_diff(q % w);
            let dy = (p / w).abs_diff(q / w);
            let adjacent = if eight {
                dx <= 1 && dy <= 1
            } else {
                dx + dy == 1
            };
            if adjacent {
                out.push((p, q));
            }
        }
    }
    out
}

pub struct CutProblem {
    pub values: Vec<f64>,
    pub membership: Vec<f64>,
    pub seeds: Vec<Seed>,
    pub pairs: Vec<(usize, usize)>,
    pub mu: f64,
    pub sigma: f64,
    pub eps: f64,
}

impl CutProblem {
    /// Data cost of each label plus `mu` times the contrast-weighted cut.
    pub fn energy(&self, cloud: &[bool]) -> f64 {
        let mut e = 0.0;
        for (i, &c) in cloud.iter().enumerate() {
            let p = if c {
                self.membership[i]
            } else {
                1.0 - self.membership[i]
            };
            e -= p.max(self.eps).min(1.0 - self.eps).ln();
        }
        for &(p, q) in &self.pairs {
            if cloud[p] != cloud[q] {
                let d = self.values[p] - self.values[q];
                e += self.mu * (-d * d / (2.0 * self.sigma * self.sigma)).exp();
            }
        }
        e
    }

    pub fn admissible(&self, cloud: &[bool]) -> bool {
        self.seeds.iter().zip(cloud).all(|(s, &c)| match s {
            Seed::Cloud => c,
            Seed::Sky => !c,
            Seed::Unlabeled => true,
        })
    }

    /// Minimum energy over every labeling that keeps the seeds.
    pub fn exhaustive_min(&self) -> f64 {
        let n = self.values.len();
        assert!(n <= 20, "exhaustive search over {n} pixels");
        let mut best = f64::INFINITY;
        let mut labels = vec![false; n];
        for bits in 0u32..(1 << n) {
            for (i, l) in labels.iter_mut().enumerate() {
                *l = bits >> i & 1 == 1;
            }
            if self.admissible(&labels) {
                best = best.min(self.energy(&labels));
            }
        }
        best
    }
}

/// Plain alternating-optimization FCM for two clusters, started from the
/// extremes and iterated until the centroids stop moving. Returns the
/// centroids in ascending order.
pub fn fcm_reference(x: &[f64], m: f64) -> [f64; 2] {
    let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut v = [lo, hi];
    for _ in 0..200_000 {
        let mut num = [0.0; 2];
        let mut den = [0.0; 2];
        for &xi in x {
            let d = [(xi - v[0]).abs(), (xi - v[1]).abs()];
            let u = if d[0] == 0.0 {
                [1.0, 0.0]
            } else if d[1] == 0.0 {
                [0.0, 1.0]
            } else {
                let mut u = [0.0; 2];
                for k in 0..2 {
                    let s: f64 = (0..2).map(|j| (d[k] / d[j]).powf(2.0 / (m - 1.0))).sum();
                    u[k] = 1.0 / s;
                }
                u
            };
            for k in 0..2 {
                let w = u[k].powf(m);
                num[k] += w * xi;
                den[k] += w;
            }
        }
        let next = [num[0] / den[0], num[1] / den[1]];
        let moved = (next[0] - v[0]).abs().max((next[1] - v[1]).abs());
        v = next;
        if moved < 1e-14 * (hi - lo).max(1e-300) {
            break;
        }
    }
    if v[0] > v[1] {
        v.swap(0, 1);
    }
    v
}

/// Li and Lee's cross entropy of splitting a 256-bin histogram after bin
/// `t`, with grey level `i + 1` for bin `i`.
pub fn cross_entropy(hist: &[u64; 256], t: usize) -> Option<f64> {
    let level = |i: usize| (i + 1) as f64;
    let class_mean = |range: std::ops::Range<usize>| {
        let n: f64 = range.clone().map(|i| hist[i] as f64).sum();
        let s: f64 = range.map(|i| level(i) * hist[i] as f64).sum();
        (n > 0.0).then(|| s / n)
    };
    let mu1 = class_mean(0..t + 1)?;
    let mu2 = class_mean(t + 1..256)?;
    let mut eta = 0.0;
    for (i, &h) in hist.iter().enumerate() {
        let mu = if i <= t { mu1 } else { mu2 };
        eta += level(i) * h as f64 * (level(i) / mu).ln();
    }
    Some(eta)
}

/// Pixel-by-pixel confusion counts, cloud positive.
pub fn count_confusion(mask: &[bool], truth: &[bool]) -> ConfusionCounts {
    let mut c = ConfusionCounts::default();
    for (&m, &t) in mask.iter().zip(truth) {
        match (m, t) {
            (true, true) => c.tp += 1,
            (false, false) => c.tn += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    c
}

pub fn random_mask(rng: &mut impl Rng, w: u32, h: u32, p: f64) -> BinaryMask {
    BinaryMask::from_fn(w, h, |_, _| rng.random_bool(p))
}

/// An 8-bit image whose channels land in the clipped range about half the time.
pub fn clipping_image(rng: &mut impl Rng, w: u32, h: u32, clip: f64) -> LdrImage {
    LdrImage::from_fn(w, h, 1.0, 0.0, |_, _| {
        std::array::from_fn(|_| {
            if rng.random_bool(clip) {
                rng.random_range(248..=255)
            } else {
                rng.random_range(0..=255)
            }
        })
    })
    .expect("valid image")
}

pub const CAMERA: GammaCamera = GammaCamera {
    gamma: 2.2,
    gain: 0.54,
};
pub const TIMES: [f64; 3] = [1.0 / 16.0, 0.25, 1.0];

/// Synthetic samples with ground truth.
pub fn synthetic_samples(params: &SceneParams, seeds: std::ops::Range<u64>) -> Vec<Sample> {
    seeds
        .map(|seed| {
            let scene = sky_scene(params, seed).expect("scene");
            let stack = CAMERA
                .expose(&scene.radiance, TIMES, &format!("syn{seed:03}"))
                .expect("stack");
            Sample {
                stack,
                truth: Some(scene.truth),
                tonemapped: None,
            }
        })
        .collect()
}
