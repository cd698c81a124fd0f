//! Camera response recovery and exposure fusion.
//!
//! The response `g(z)` maps a pixel value to log exposure. It is recovered per
//! channel by regularized least squares over a deterministic grid of pixel
//! locations, anchored at `g(128) = 0`, and then made non-decreasing with a
//! pool-adjacent-violators pass. Fusion averages `g(z) - ln dt` over the
//! exposures with a triangular weight.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset_io::{write_atomic, ExposureStack};
use crate::error::{Error, Result};
use crate::pfm::{self, PfmImage};

pub const Z_MIN: u8 = 0;
pub const Z_MAX: u8 = 255;
/// Pixel value whose log exposure is pinned to zero.
pub const ANCHOR_Z: usize = 128;
pub const DEFAULT_LAMBDA: f64 = 50.0;
pub const DEFAULT_SAMPLE_COUNT: usize = 100;
pub const MIN_SAMPLE_COUNT: usize = 64;

/// Ratio of smallest to largest singular value below which the system is
/// treated as rank deficient.
const SINGULAR_RCOND: f64 = 1e-10;

/// Triangular weight: `z` up to 127, `255 - z` above.
pub fn hat_weight(z: u8) -> f64 {
    if z <= 127 {
        f64::from(z - Z_MIN)
    } else {
        f64::from(Z_MAX - z)
    }
}

/// [`hat_weight`] for values that may fall outside `0..=255`.
pub fn try_hat_weight(z: i64) -> Result<f64> {
    u8::try_from(z)
        .map(hat_weight)
        .map_err(|_| Error::param(format!("pixel value {z} outside 0..=255")))
}

/// Recovery settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResponseParams {
    pub sample_count: usize,
    pub lambda: f64,
}

impl Default for ResponseParams {
    fn default() -> Self {
        Self {
            sample_count: DEFAULT_SAMPLE_COUNT,
            lambda: DEFAULT_LAMBDA,
        }
    }
}

/// Log-exposure response per color channel.
#[derive(Clone, Debug, PartialEq)]
pub struct ResponseCurve {
    g: [[f64; 256]; 3],
    /// Smoothness weight used during recovery (`None` when loaded or synthetic).
    pub lambda: Option<f64>,
}

impl ResponseCurve {
    pub fn new(g: [[f64; 256]; 3], lambda: Option<f64>) -> Result<Self> {
        if g.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::ResponseFormat("non-finite g value".into()));
        }
        Ok(Self { g, lambda })
    }

    /// Tabulates `f(channel, z)`.
    pub fn from_fn(mut f: impl FnMut(usize, u8) -> f64) -> Result<Self> {
        let mut g = [[0.0; 256]; 3];
        for (c, curve) in g.iter_mut().enumerate() {
            for (z, v) in curve.iter_mut().enumerate() {
                *v = f(c, z as u8);
            }
        }
        Self::new(g, None)
    }

    pub fn g(&self, channel: usize, z: u8) -> f64 {
        self.g[channel][z as usize]
    }

    pub fn channel(&self, channel: usize) -> &[f64; 256] {
        &self.g[channel]
    }

    pub fn is_monotone(&self) -> bool {
        self.g.iter().all(|c| c.windows(2).all(|w| w[0] <= w[1]))
    }

    /// Pixel value whose log exposure is closest to `ln_exposure`.
    pub fn quantize(&self, channel: usize, ln_exposure: f64) -> u8 {
        let curve = &self.g[channel];
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (z, &v) in curve.iter().enumerate() {
            let d = (v - ln_exposure).abs();
            if d < best_d {
                best = z;
                best_d = d;
            }
        }
        best as u8
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("z,g_R,g_G,g_B\n");
        for z in 0..256 {
            let _ = writeln!(
                out,
                "{z},{:?},{:?},{:?}",
                self.g[0][z], self.g[1][z], self.g[2][z]
            );
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            z: usize,
            #[serde(rename = "g_R")]
            r: f64,
            #[serde(rename = "g_G")]
            g: f64,
            #[serde(rename = "g_B")]
            b: f64,
        }
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let mut g = [[f64::NAN; 256]; 3];
        let mut seen = [false; 256];
        for row in reader.deserialize::<Row>() {
            let row = row.map_err(|e| Error::ResponseFormat(e.to_string()))?;
            if row.z > 255 || seen[row.z] {
                return Err(Error::ResponseFormat(format!("bad or repeated z {}", row.z)));
            }
            seen[row.z] = true;
            g[0][row.z] = row.r;
            g[1][row.z] = row.g;
            g[2][row.z] = row.b;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::ResponseFormat("expected 256 rows, z = 0..255".into()));
        }
        Self::new(g, None)
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path, self.to_csv().as_bytes())
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }
}

/// Linear relative radiance per pixel and channel.
#[derive(Clone, Debug, PartialEq)]
pub struct RadianceMap {
    width: u32,
    height: u32,
    values: Vec<[f64; 3]>,
}

impl RadianceMap {
    pub fn new(width: u32, height: u32, values: Vec<[f64; 3]>) -> Result<Self> {
        if values.len() != width as usize * height as usize {
            return Err(Error::InvalidImage(format!(
                "{} values for a {width}x{height} radiance map",
                values.len()
            )));
        }
        if values.iter().flatten().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidImage(
                "radiance values must be finite and non-negative".into(),
            ));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [f64; 3]) -> Result<Self> {
        let mut values = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self::new(width, height, values)
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

    pub fn values(&self) -> &[[f64; 3]] {
        &self.values
    }

    pub fn pixel(&self, x: u32, y: u32) -> [f64; 3] {
        self.values[(y * self.width + x) as usize]
    }

    pub fn scaled(&self, k: f64) -> Result<Self> {
        Self::new(
            self.width,
            self.height,
            self.values.iter().map(|p| p.map(|v| v * k)).collect(),
        )
    }

    pub fn to_pfm(&self) -> PfmImage {
        PfmImage {
            width: self.width,
            height: self.height,
            channels: 3,
            data: self.values.iter().flatten().map(|&v| v as f32).collect(),
        }
    }

    pub fn from_pfm(img: &PfmImage) -> Result<Self> {
        if img.channels != 3 {
            return Err(Error::Pfm("radiance maps need a 3-channel PF file".into()));
        }
        let values = img
            .data
            .chunks_exact(3)
            .map(|c| [f64::from(c[0]), f64::from(c[1]), f64::from(c[2])])
            .collect();
        Self::new(img.width, img.height, values)
    }

    pub fn save_pfm(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path, &pfm::encode(&self.to_pfm())?)
    }

    pub fn load_pfm(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_pfm(&pfm::decode(&bytes)?)
    }
}

/// `n` pixel locations on a uniform grid covering a `width x height` image.
pub fn grid_locations(width: u32, height: u32, n: usize) -> Vec<(u32, u32)> {
    let side = (n as f64).sqrt().ceil().max(1.0) as usize;
    let mut out = Vec::with_capacity(n);
    'outer: for r in 0..side {
        for c in 0..side {
            if out.len() == n {
                break 'outer;
            }
            let y = ((r as f64 + 0.5) * f64::from(height) / side as f64) as u32;
            let x = ((c as f64 + 0.5) * f64::from(width) / side as f64) as u32;
            out.push((x.min(width - 1), y.min(height - 1)));
        }
    }
    out
}

/// Recovers the response from a single stack.
pub fn recover_response(stack: &ExposureStack, sample_count: usize, lambda: f64) -> Result<ResponseCurve> {
    recover_response_pooled(&[stack], sample_count, lambda)
}

/// Recovers one response from several stacks of the same camera, spreading
/// `sample_count` grid locations evenly over them.
pub fn recover_response_pooled(
    stacks: &[&ExposureStack],
    sample_count: usize,
    lambda: f64,
) -> Result<ResponseCurve> {
    if stacks.is_empty() {
        return Err(Error::EmptyInput("no stacks for response recovery".into()));
    }
    if sample_count < MIN_SAMPLE_COUNT {
        return Err(Error::param(format!(
            "sample_count must be at least {MIN_SAMPLE_COUNT}, got {sample_count}"
        )));
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::param(format!("lambda must be positive, got {lambda}")));
    }
    let per_stack = sample_count.div_ceil(stacks.len()).max(1);
    // (pixel values per exposure, ln dt per exposure) for each sample and channel
    let mut samples: Vec<[([u8; 3], [f64; 3]); 3]> = Vec::new();
    for stack in stacks {
        if stack.low().is_empty() {
            return Err(Error::InsufficientData(format!("stack {} is empty", stack.id())));
        }
        let (w, h) = stack.dimensions();
        let ln_t = stack.exposure_times().map(f64::ln);
        for (x, y) in grid_locations(w, h, per_stack) {
            let px = stack.members().map(|m| m.pixel(x, y));
            samples.push(std::array::from_fn(|c| ([px[0][c], px[1][c], px[2][c]], ln_t)));
        }
    }
    let mut g = [[0.0; 256]; 3];
    for (c, curve) in g.iter_mut().enumerate() {
        let rows: Vec<([u8; 3], [f64; 3])> = samples.iter().map(|s| s[c]).collect();
        *curve = solve_channel(&rows, lambda)?;
        monotone_repair(curve);
    }
    ResponseCurve::new(g, Some(lambda))
}

fn solve_channel(samples: &[([u8; 3], [f64; 3])], lambda: f64) -> Result<[f64; 256]> {
    // a sample clipped in every exposure has an unconstrained ln E
    let samples: Vec<([u8; 3], [f64; 3])> = samples
        .iter()
        .filter(|(z, _)| z.iter().any(|&z| hat_weight(z) > 0.0))
        .copied()
        .collect();
    if samples.is_empty() {
        return Err(Error::InsufficientData(
            "every sampled value is fully under- or over-exposed".into(),
        ));
    }
    let n = 256;
    let p = samples.first().map_or(0, |s| s.0.len());
    let unknowns = n + samples.len();
    let rows = samples.len() * p + 1 + (n - 2);
    let mut a = DMatrix::<f64>::zeros(rows, unknowns);
    let mut b = DVector::<f64>::zeros(rows);
    let mut k = 0;
    for (i, (zs, ln_t)) in samples.iter().enumerate() {
        for j in 0..p {
            let w = hat_weight(zs[j]);
            a[(k, zs[j] as usize)] = w;
            a[(k, n + i)] = -w;
            b[k] = w * ln_t[j];
            k += 1;
        }
    }
    a[(k, ANCHOR_Z)] = 1.0;
    k += 1;
    for z in 1..n - 1 {
        let w = lambda * hat_weight(z as u8);
        a[(k, z - 1)] = w;
        a[(k, z)] = -2.0 * w;
        a[(k, z + 1)] = w;
        k += 1;
    }
    debug_assert_eq!(k, rows);

    let svd = a.svd(true, true);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    if !(s_max > 0.0) || s_min / s_max < SINGULAR_RCOND {
        return Err(Error::SingularSystem);
    }
    let x = svd
        .solve(&b, s_max * f64::EPSILON)
        .map_err(|_| Error::SingularSystem)?;
    let mut g = [0.0; 256];
    for (z, v) in g.iter_mut().enumerate() {
        *v = x[z];
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem);
    }
    Ok(g)
}

/// Isotonic (non-decreasing) least-squares fit by pool-adjacent-violators,
/// re-anchored so that `g(128) = 0`.
pub fn monotone_repair(g: &mut [f64; 256]) {
    // blocks of (sum, count)
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(256);
    for &v in g.iter() {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (s1, n1) = blocks[blocks.len() - 1];
            let (s0, n0) = blocks[blocks.len() - 2];
            if s0 / n0 as f64 > s1 / n1 as f64 {
                blocks.pop();
                let last = blocks.len() - 1;
                blocks[last] = (s0 + s1, n0 + n1);
            } else {
                break;
            }
        }
    }
    let mut z = 0;
    for (s, n) in blocks {
        let mean = s / n as f64;
        for v in &mut g[z..z + n] {
            *v = mean;
        }
        z += n;
    }
    let anchor = g[ANCHOR_Z];
    for v in g.iter_mut() {
        *v -= anchor;
    }
}

/// Fuses the stack into relative radiance. Pixels with zero total weight
/// (clipped in all exposures) fall back to the mid exposure.
pub fn fuse(stack: &ExposureStack, response: &ResponseCurve) -> Result<RadianceMap> {
    let (w, h) = stack.dimensions();
    let members = stack.members();
    let ln_t = stack.exposure_times().map(f64::ln);
    let n = w as usize * h as usize;
    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        let px = members.map(|m| m.pixels()[i]);
        let mut out = [0.0; 3];
        for (c, o) in out.iter_mut().enumerate() {
            let mut num = 0.0;
            let mut den = 0.0;
            for j in 0..3 {
                let z = px[j][c];
                let wz = hat_weight(z);
                num += wz * (response.g(c, z) - ln_t[j]);
                den += wz;
            }
            let ln_e = if den > 0.0 {
                num / den
            } else {
                response.g(c, px[1][c]) - ln_t[1]
            };
            *o = ln_e.exp();
        }
        values.push(out);
    }
    RadianceMap::new(w, h, values)
}

/// Where a stack's response curve comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum ResponseSource {
    /// Recover from each stack on its own.
    PerStack(ResponseParams),
    /// One curve for every stack.
    Fixed(ResponseCurve),
}

impl Default for ResponseSource {
    fn default() -> Self {
        ResponseSource::PerStack(ResponseParams::default())
    }
}

impl ResponseSource {
    pub fn curve_for(&self, stack: &ExposureStack) -> Result<std::borrow::Cow<'_, ResponseCurve>> {
        match self {
            ResponseSource::PerStack(p) => {
                recover_response(stack, p.sample_count, p.lambda).map(std::borrow::Cow::Owned)
            }
            ResponseSource::Fixed(curve) => Ok(std::borrow::Cow::Borrowed(curve)),
        }
    }

    /// Fuses `stack` with its curve.
    pub fn fuse(&self, stack: &ExposureStack) -> Result<RadianceMap> {
        let curve = self.curve_for(stack)?;
        fuse(stack, &curve)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset_io::LdrImage;

    #[test]
    fn hat_weight_endpoints() {
        assert_eq!(hat_weight(0), 0.0);
        assert_eq!(hat_weight(255), 0.0);
        assert_eq!(hat_weight(127), 127.0);
        assert_eq!(hat_weight(128), 127.0);
        assert!(try_hat_weight(256).is_err());
        assert!(try_hat_weight(-1).is_err());
    }

    #[test]
    fn pav_enforces_monotonicity() {
        let mut g = [0.0; 256];
        for (z, v) in g.iter_mut().enumerate() {
            *v = z as f64 * 0.01;
        }
        g[3] = 0.5;
        g[250] = 0.0;
        monotone_repair(&mut g);
        assert!(g.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(g[ANCHOR_Z], 0.0);
    }

    #[test]
    fn grid_is_deterministic_and_in_bounds() {
        let a = grid_locations(37, 21, 100);
        assert_eq!(a.len(), 100);
        assert_eq!(a, grid_locations(37, 21, 100));
        assert!(a.iter().all(|&(x, y)| x < 37 && y < 21));
    }

    #[test]
    fn uniform_identical_stack_is_singular() {
        let img = |t| LdrImage::from_fn(16, 16, t, 0.0, |_, _| [100, 100, 100]).unwrap();
        let stack = ExposureStack::new("u", img(0.25), img(0.5), img(1.0)).unwrap();
        assert!(matches!(
            recover_response(&stack, 100, 50.0),
            Err(Error::SingularSystem)
        ));
    }

    #[test]
    fn rejects_bad_parameters() {
        let img = |t| LdrImage::from_fn(4, 4, t, 0.0, |x, _| [x as u8 * 40; 3]).unwrap();
        let stack = ExposureStack::new("u", img(0.25), img(0.5), img(1.0)).unwrap();
        assert!(recover_response(&stack, 10, 50.0).is_err());
        assert!(recover_response(&stack, 100, 0.0).is_err());
    }

    #[test]
    fn single_informative_exposure() {
        let response = ResponseCurve::from_fn(|_, z| (f64::from(z.max(1)) / 128.0).ln()).unwrap();
        let low = LdrImage::from_fn(1, 1, 0.25, -2.0, |_, _| [0, 0, 0]).unwrap();
        let mid = LdrImage::from_fn(1, 1, 0.5, -1.0, |_, _| [255, 255, 255]).unwrap();
        let high = LdrImage::from_fn(1, 1, 1.0, 0.0, |_, _| [100, 100, 100]).unwrap();
        let stack = ExposureStack::new("s", low, mid, high).unwrap();
        let e = fuse(&stack, &response).unwrap().pixel(0, 0);
        for v in e {
            assert!((v - response.g(0, 100).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_round_trip() {
        let r = ResponseCurve::from_fn(|c, z| c as f64 + f64::from(z) / 7.0).unwrap();
        let back = ResponseCurve::from_csv(&r.to_csv()).unwrap();
        assert_eq!(back, r);
        assert!(r.to_csv().starts_with("z,g_R,g_G,g_B\n"));
        assert!(ResponseCurve::from_csv("z,g_R,g_G,g_B\n0,1,2,3\n").is_err());
    }
}
