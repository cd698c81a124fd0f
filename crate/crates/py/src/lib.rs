//! Python bindings: exposure stacks, response recovery, fusion, tone
//! mapping, channel extraction, segmentation and scoring.
//!
//! Images cross the boundary as row-major bytes (interleaved RGB for color
//! images, one byte per pixel for masks) or flat lists of floats.

use hdrcloudseg_core as core;
use hdrcloudseg_core::baselines::{self, Baseline, BaselineParams};
use hdrcloudseg_core::color::{ChannelId, RgbSource};
use hdrcloudseg_core::dataset_io;
use hdrcloudseg_core::eval;
use hdrcloudseg_core::segment::{self, Neighborhood};
use hdrcloudseg_core::synth::{sky_scene, GammaCamera, SceneParams};
use hdrcloudseg_core::tonemap::{TonemapMethod, TonemapParams};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

create_exception!(hdrcloudseg, HdrCloudSegError, PyException);

fn to_py(e: core::Error) -> PyErr {
    match e {
        core::Error::Io { .. } => PyIOError::new_err(e.to_string()),
        core::Error::InvalidParameter(_)
        | core::Error::InvalidImage(_)
        | core::Error::DimensionMismatch { .. }
        | core::Error::OutOfBounds(_) => PyValueError::new_err(e.to_string()),
        other => HdrCloudSegError::new_err(other.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = core::Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(to_py)
}

/// Serializes through JSON into plain Python objects.
fn to_object<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| HdrCloudSegError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn rgb_triples(width: u32, height: u32, data: &[u8]) -> PyResult<Vec<[u8; 3]>> {
    let n = width as usize * height as usize;
    if data.len() != 3 * n {
        return Err(PyValueError::new_err(format!(
            "expected {} bytes for a {width}x{height} RGB image, got {}",
            3 * n,
            data.len()
        )));
    }
    Ok(data.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect())
}

/// An 8-bit RGB image with its exposure time.
#[pyclass(name = "LdrImage", module = "hdrcloudseg", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyLdrImage {
    inner: dataset_io::LdrImage,
}

#[pymethods]
impl PyLdrImage {
    #[new]
    #[pyo3(signature = (width, height, data, exposure_time = 1.0, ev_offset = 0.0))]
    fn new(width: u32, height: u32, data: &[u8], exposure_time: f64, ev_offset: f64) -> PyResult<Self> {
        let pixels = rgb_triples(width, height, data)?;
        let inner = dataset_io::LdrImage::new(width, height, pixels, exposure_time, ev_offset).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (path, exposure_time = 1.0, ev_offset = 0.0))]
    fn load(path: std::path::PathBuf, exposure_time: f64, ev_offset: f64) -> PyResult<Self> {
        let inner = dataset_io::load_ldr(path, exposure_time, ev_offset).map_err(to_py)?;
        Ok(Self { inner })
    }

    fn save_png(&self, path: std::path::PathBuf) -> PyResult<()> {
        self.inner.save_png(path).map_err(to_py)
    }

    #[getter]
    fn width(&self) -> u32 {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> u32 {
        self.inner.height()
    }

    #[getter]
    fn exposure_time(&self) -> f64 {
        self.inner.exposure_time()
    }

    fn pixel(&self, x: u32, y: u32) -> PyResult<[u8; 3]> {
        let (w, h) = self.inner.dimensions();
        if x >= w || y >= h {
            return Err(PyValueError::new_err(format!("({x}, {y}) outside {w}x{h}")));
        }
        Ok(self.inner.pixel(x, y))
    }

    /// Interleaved RGB bytes, row-major.
    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        let raw: Vec<u8> = self.inner.pixels().iter().flatten().copied().collect();
        PyBytes::new(py, &raw)
    }

    fn __repr__(&self) -> String {
        format!(
            "LdrImage({}x{}, exposure_time={})",
            self.inner.width(),
            self.inner.height(),
            self.inner.exposure_time()
        )
    }
}

/// Three exposures of one scene, ordered by exposure time.
#[pyclass(name = "ExposureStack", module = "hdrcloudseg", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyExposureStack {
    inner: dataset_io::ExposureStack,
}

#[pymethods]
impl PyExposureStack {
    /// Members may be given in any order; they are sorted by exposure time.
    #[new]
    fn new(id: String, a: PyLdrImage, b: PyLdrImage, c: PyLdrImage) -> PyResult<Self> {
        let inner =
            dataset_io::ExposureStack::from_unordered(id, [a.inner, b.inner, c.inner]).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn id(&self) -> &str {
        self.inner.id()
    }

    #[getter]
    fn width(&self) -> u32 {
        self.inner.dimensions().0
    }

    #[getter]
    fn height(&self) -> u32 {
        self.inner.dimensions().1
    }

    #[getter]
    fn exposure_times(&self) -> [f64; 3] {
        self.inner.exposure_times()
    }

    /// (low, mid, high)
    fn members(&self) -> (PyLdrImage, PyLdrImage, PyLdrImage) {
        let [l, m, h] = self.inner.members().map(|i| PyLdrImage { inner: i.clone() });
        (l, m, h)
    }

    /// Pixels clipped in every exposure.
    fn saturated_pixels(&self) -> usize {
        dataset_io::saturation_mask_hdr(&self.inner).count()
    }

    fn __repr__(&self) -> String {
        let (w, h) = self.inner.dimensions();
        format!("ExposureStack({:?}, {w}x{h}, times={:?})", self.inner.id(), self.inner.exposure_times())
    }
}

/// Log-exposure response `g(z)` per color channel.
#[pyclass(name = "ResponseCurve", module = "hdrcloudseg", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyResponseCurve {
    inner: core::ResponseCurve,
}

#[pymethods]
impl PyResponseCurve {
    #[staticmethod]
    #[pyo3(signature = (stack, sample_count = 100, smoothness = 50.0))]
    fn recover(stack: &PyExposureStack, sample_count: usize, smoothness: f64) -> PyResult<Self> {
        let inner = core::recover_response(&stack.inner, sample_count, smoothness).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// One curve from several stacks of the same camera.
    #[staticmethod]
    #[pyo3(signature = (stacks, sample_count = 100, smoothness = 50.0))]
    fn recover_pooled(stacks: Vec<PyExposureStack>, sample_count: usize, smoothness: f64) -> PyResult<Self> {
        let refs: Vec<&dataset_io::ExposureStack> = stacks.iter().map(|s| &s.inner).collect();
        let inner = core::radiance::recover_response_pooled(&refs, sample_count, smoothness).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// The exact curve of a gamma camera.
    #[staticmethod]
    #[pyo3(signature = (gamma = 2.2, gain = 1.0))]
    fn gamma(gamma: f64, gain: f64) -> PyResult<Self> {
        let inner = GammaCamera { gamma, gain }.response().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load_csv(path: std::path::PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: core::ResponseCurve::load_csv(path).map_err(to_py)?,
        })
    }

    fn save_csv(&self, path: std::path::PathBuf) -> PyResult<()> {
        self.inner.save_csv(path).map_err(to_py)
    }

    fn g(&self, channel: usize, z: u8) -> PyResult<f64> {
        if channel > 2 {
            return Err(PyValueError::new_err("channel must be 0, 1 or 2"));
        }
        Ok(self.inner.g(channel, z))
    }

    /// 256 values of one channel.
    fn channel(&self, channel: usize) -> PyResult<Vec<f64>> {
        if channel > 2 {
            return Err(PyValueError::new_err("channel must be 0, 1 or 2"));
        }
        Ok(self.inner.channel(channel).to_vec())
    }

    fn is_monotone(&self) -> bool {
        self.inner.is_monotone()
    }
}

/// Relative scene radiance, three channels per pixel.
#[pyclass(name = "RadianceMap", module = "hdrcloudseg", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyRadianceMap {
    inner: core::RadianceMap,
}

#[pymethods]
impl PyRadianceMap {
    /// `values` holds interleaved RGB floats, row-major.
    #[new]
    fn new(width: u32, height: u32, values: Vec<f64>) -> PyResult<Self> {
        if values.len() != 3 * width as usize * height as usize {
            return Err(PyValueError::new_err("expected 3 values per pixel"));
        }
        let px = values.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        Ok(Self {
            inner: core::RadianceMap::new(width, height, px).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn load_pfm(path: std::path::PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: core::RadianceMap::load_pfm(path).map_err(to_py)?,
        })
    }

    fn save_pfm(&self, path: std::path::PathBuf) -> PyResult<()> {
        self.inner.save_pfm(path).map_err(to_py)
    }

    #[getter]
    fn width(&self) -> u32 {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> u32 {
        self.inner.height()
    }

    fn pixel(&self, x: u32, y: u32) -> PyResult<[f64; 3]> {
        let (w, h) = self.inner.dimensions();
        if x >= w || y >= h {
            return Err(PyValueError::new_err(format!("({x}, {y}) outside {w}x{h}")));
        }
        Ok(self.inner.pixel(x, y))
    }

    fn scaled(&self, k: f64) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.scaled(k).map_err(to_py)?,
        })
    }

    fn to_list(&self) -> Vec<f64> {
        self.inner.values().iter().flatten().copied().collect()
    }

    fn __repr__(&self) -> String {
        format!("RadianceMap({}x{})", self.inner.width(), self.inner.height())
    }
}

/// Cloud (true) / sky (false) labels.
#[pyclass(name = "BinaryMask", module = "hdrcloudseg", frozen, eq, skip_from_py_object)]
#[derive(Clone, PartialEq)]
pub struct PyBinaryMask {
    inner: dataset_io::BinaryMask,
}

#[pymethods]
impl PyBinaryMask {
    /// One byte per pixel; nonzero is cloud.
    #[new]
    fn new(width: u32, height: u32, data: &[u8]) -> PyResult<Self> {
        let labels = data.iter().map(|&b| b != 0).collect();
        Ok(Self {
            inner: dataset_io::BinaryMask::new(width, height, labels).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: dataset_io::load_mask(path).map_err(to_py)?,
        })
    }

    fn save_png(&self, path: std::path::PathBuf) -> PyResult<()> {
        dataset_io::save_mask(&self.inner, path).map_err(to_py)
    }

    #[getter]
    fn width(&self) -> u32 {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> u32 {
        self.inner.height()
    }

    fn cloud_count(&self) -> usize {
        self.inner.cloud_count()
    }

    fn cloud_fraction(&self) -> f64 {
        self.inner.cloud_count() as f64 / self.inner.len() as f64
    }

    /// 0/1 bytes, row-major.
    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        let raw: Vec<u8> = self.inner.labels().iter().map(|&c| u8::from(c)).collect();
        PyBytes::new(py, &raw)
    }

    fn __repr__(&self) -> String {
        format!(
            "BinaryMask({}x{}, cloud={})",
            self.inner.width(),
            self.inner.height(),
            self.inner.cloud_count()
        )
    }
}

/// Graph-cut segmentation settings.
#[pyclass(name = "SegParams", module = "hdrcloudseg", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
pub struct PySegParams {
    inner: segment::SegParams,
}

#[pymethods]
impl PySegParams {
    #[new]
    #[pyo3(signature = (alpha = 0.88, mu = 1.0, sigma = None, neighborhood = 8, fuzzifier = 2.0,
                        fcm_tol = 1e-5, fcm_max_iter = 300))]
    fn new(
        alpha: f64,
        mu: f64,
        sigma: Option<f64>,
        neighborhood: u8,
        fuzzifier: f64,
        fcm_tol: f64,
        fcm_max_iter: usize,
    ) -> PyResult<Self> {
        let neighborhood = match neighborhood {
            4 => Neighborhood::Four,
            8 => Neighborhood::Eight,
            n => return Err(PyValueError::new_err(format!("neighborhood must be 4 or 8, got {n}"))),
        };
        let inner = segment::SegParams {
            alpha,
            mu,
            sigma,
            neighborhood,
            fcm_fuzzifier: fuzzifier,
            fcm_tol,
            fcm_max_iter,
            ..Default::default()
        };
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }

    #[getter]
    fn mu(&self) -> f64 {
        self.inner.mu
    }

    #[getter]
    fn sigma(&self) -> Option<f64> {
        self.inner.sigma
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_object(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        format!("SegParams({:?})", self.inner)
    }
}

fn seg_params(params: Option<&PySegParams>) -> segment::SegParams {
    params.map(|p| p.inner).unwrap_or_default()
}

/// Fuses a stack into a radiance map.
#[pyfunction]
fn fuse(stack: &PyExposureStack, curve: &PyResponseCurve) -> PyResult<PyRadianceMap> {
    Ok(PyRadianceMap {
        inner: core::fuse(&stack.inner, &curve.inner).map_err(to_py)?,
    })
}

/// Tone-maps a radiance map to 8 bits with "clahe" or "photographic".
#[pyfunction]
#[pyo3(signature = (map, method = "clahe", clip_limit = 0.01, tiles = 8, key = 0.18))]
fn tonemap(map: &PyRadianceMap, method: &str, clip_limit: f64, tiles: u32, key: f64) -> PyResult<PyLdrImage> {
    let params = TonemapParams {
        method: parse::<TonemapMethod>(method)?,
        clahe_clip_limit: clip_limit,
        clahe_tiles: tiles,
        key_a: key,
        ..Default::default()
    };
    Ok(PyLdrImage {
        inner: core::tonemap(&map.inner, &params).map_err(to_py)?,
    })
}

/// Channel `c1`..`c16` of an 8-bit image or radiance map, as a flat list.
#[pyfunction]
fn extract_channel(source: &Bound<'_, PyAny>, channel: &str) -> PyResult<Vec<f64>> {
    let ch: ChannelId = parse(channel)?;
    let map = with_source(source, |s| core::extract_channel(s, ch))?;
    Ok(map.values().to_vec())
}

fn with_source<T>(
    source: &Bound<'_, PyAny>,
    f: impl FnOnce(&dyn RgbSource) -> core::Result<T>,
) -> PyResult<T> {
    if let Ok(img) = source.cast::<PyLdrImage>() {
        f(&img.get().inner).map_err(to_py)
    } else if let Ok(map) = source.cast::<PyRadianceMap>() {
        f(&map.get().inner).map_err(to_py)
    } else {
        Err(PyValueError::new_err("expected an LdrImage or a RadianceMap"))
    }
}

/// Fuses and segments a stack; returns the mask and a summary dict with the
/// energy breakdown.
#[pyfunction(name = "hdrcloudseg")]
#[pyo3(signature = (stack, curve, params = None))]
fn hdrcloudseg_py<'py>(
    py: Python<'py>,
    stack: &PyExposureStack,
    curve: &PyResponseCurve,
    params: Option<&PySegParams>,
) -> PyResult<(PyBinaryMask, Bound<'py, PyAny>)> {
    let (_, seg) = segment::hdrcloudseg_detailed(&stack.inner, &seg_params(params), &curve.inner).map_err(to_py)?;
    Ok((PyBinaryMask { inner: seg.mask }, to_object(py, &seg.summary)?))
}

/// Segments one channel of an 8-bit image or radiance map.
#[pyfunction]
#[pyo3(signature = (source, channel = "c15", params = None))]
fn segment_channel<'py>(
    py: Python<'py>,
    source: &Bound<'py, PyAny>,
    channel: &str,
    params: Option<&PySegParams>,
) -> PyResult<(PyBinaryMask, Bound<'py, PyAny>)> {
    let ch: ChannelId = parse(channel)?;
    let p = seg_params(params);
    let seg = with_source(source, |s| segment::segment_source(s, ch, &p))?;
    Ok((PyBinaryMask { inner: seg.mask }, to_object(py, &seg.summary)?))
}

/// Runs "long", "souza", "mantelli" or "li" on an 8-bit image.
#[pyfunction]
fn segment_baseline(method: &str, image: &PyLdrImage) -> PyResult<PyBinaryMask> {
    let b: Baseline = parse(method)?;
    Ok(PyBinaryMask {
        inner: baselines::segment(b, &image.inner, &BaselineParams::default()).map_err(to_py)?,
    })
}

/// Precision, recall, F-score, error percentage and the confusion counts.
#[pyfunction]
fn score<'py>(py: Python<'py>, mask: &PyBinaryMask, truth: &PyBinaryMask) -> PyResult<Bound<'py, PyDict>> {
    let c = eval::confusion(&mask.inner, &truth.inner).map_err(to_py)?;
    let s = eval::metrics(&c).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("precision", s.precision)?;
    d.set_item("recall", s.recall)?;
    d.set_item("fscore", s.fscore)?;
    d.set_item("error_pct", s.error_pct)?;
    d.set_item("tp", c.tp)?;
    d.set_item("tn", c.tn)?;
    d.set_item("fp", c.fp)?;
    d.set_item("fn", c.fn_)?;
    Ok(d)
}

/// A rendered sky scene: its stack (gamma 2.2 camera, times 1/16, 1/4, 1)
/// and the cloud mask.
#[pyfunction]
#[pyo3(signature = (width = 128, height = 128, seed = 0))]
fn synthetic_scene(width: u32, height: u32, seed: u64) -> PyResult<(PyExposureStack, PyBinaryMask)> {
    let params = SceneParams { width, height, ..Default::default() };
    let scene = sky_scene(&params, seed).map_err(to_py)?;
    let camera = GammaCamera { gamma: 2.2, gain: 0.54 };
    let stack = camera
        .expose(&scene.radiance, [1.0 / 16.0, 0.25, 1.0], &format!("syn{seed:03}"))
        .map_err(to_py)?;
    Ok((PyExposureStack { inner: stack }, PyBinaryMask { inner: scene.truth }))
}

#[pymodule]
fn hdrcloudseg(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("HdrCloudSegError", m.py().get_type::<HdrCloudSegError>())?;
    m.add_class::<PyLdrImage>()?;
    m.add_class::<PyExposureStack>()?;
    m.add_class::<PyResponseCurve>()?;
    m.add_class::<PyRadianceMap>()?;
    m.add_class::<PyBinaryMask>()?;
    m.add_class::<PySegParams>()?;
    m.add_function(wrap_pyfunction!(fuse, m)?)?;
    m.add_function(wrap_pyfunction!(tonemap, m)?)?;
    m.add_function(wrap_pyfunction!(extract_channel, m)?)?;
    m.add_function(wrap_pyfunction!(hdrcloudseg_py, m)?)?;
    m.add_function(wrap_pyfunction!(segment_channel, m)?)?;
    m.add_function(wrap_pyfunction!(segment_baseline, m)?)?;
    m.add_function(wrap_pyfunction!(score, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic_scene, m)?)?;
    Ok(())
}
