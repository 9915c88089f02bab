//! Python bindings for the main types and operations: tensors, the Haar
//! decomposition, the skip filter, segmentation and distribution
//! metrics, the ramp schedule, and the synthetic generator.
//!
//! Build with `cargo build -p wisernet-py --release` and import the
//! produced cdylib as `wisernet_py` (see python/smoke_test.py).

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use wisernet::metrics::{self, BinaryMask, EmbedSpace, EmbeddingSet};
use wisernet::segnet::{Model, ModelConfig};
use wisernet::synth;
use wisernet::tensor::{Graph, ParamStore, Shape, Tensor4};
use wisernet::wavelet;
use wisernet::wiser::{wiser_forward, WiserHyper, WiserParams};

fn err_py(e: wisernet::Error) -> PyErr {
    match e {
        wisernet::Error::Usage(_) | wisernet::Error::Config(_) | wisernet::Error::Shape(_) => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// Batched `B x C x H x W` float tensor.
#[pyclass(name = "Tensor4")]
#[derive(Clone)]
struct PyTensor4 {
    inner: Tensor4<f32>,
}

#[pymethods]
impl PyTensor4 {
    #[new]
    fn new(shape: (usize, usize, usize, usize), data: Vec<f32>) -> PyResult<Self> {
        let shape = Shape::new(shape.0, shape.1, shape.2, shape.3);
        Ok(PyTensor4 { inner: Tensor4::from_vec(shape, data).map_err(err_py)? })
    }

    #[staticmethod]
    fn zeros(b: usize, c: usize, h: usize, w: usize) -> Self {
        PyTensor4 { inner: Tensor4::zeros(Shape::new(b, c, h, w)) }
    }

    #[getter]
    fn shape(&self) -> (usize, usize, usize, usize) {
        let s = self.inner.shape();
        (s.b, s.c, s.h, s.w)
    }

    /// Flat row-major copy of the data.
    fn data(&self) -> Vec<f32> {
        self.inner.as_slice().to_vec()
    }

    fn get(&self, b: usize, c: usize, h: usize, w: usize) -> f32 {
        self.inner.at(b, c, h, w)
    }

    fn __repr__(&self) -> String {
        format!("Tensor4(shape={})", self.inner.shape())
    }
}

/// Single-level depthwise Haar decomposition: returns (LL, LH, HL, HH).
#[pyfunction]
fn dwt_haar(x: &PyTensor4) -> PyResult<(PyTensor4, PyTensor4, PyTensor4, PyTensor4)> {
    let bands = wavelet::dwt_haar(&x.inner).map_err(err_py)?;
    Ok((
        PyTensor4 { inner: bands.ll },
        PyTensor4 { inner: bands.lh },
        PyTensor4 { inner: bands.hl },
        PyTensor4 { inner: bands.hh },
    ))
}

/// Exact inverse of `dwt_haar`.
#[pyfunction]
fn idwt_haar(
    ll: &PyTensor4,
    lh: &PyTensor4,
    hl: &PyTensor4,
    hh: &PyTensor4,
) -> PyResult<PyTensor4> {
    let bands = wavelet::SubBands {
        ll: ll.inner.clone(),
        lh: lh.inner.clone(),
        hl: hl.inner.clone(),
        hh: hh.inner.clone(),
    };
    Ok(PyTensor4 { inner: wavelet::idwt_haar(&bands).map_err(err_py)? })
}

/// Apply one seeded skip-filter instance to a feature map. Returns the
/// filtered tensor and the scalar decorrelation term.
#[pyfunction]
#[pyo3(signature = (x, seed, alpha=0.5, beta=0.5, eps_gate=0.25, kappa=1.0, a0=0.25))]
fn wiser_apply(
    x: &PyTensor4,
    seed: u64,
    alpha: f64,
    beta: f64,
    eps_gate: f64,
    kappa: f64,
    a0: f64,
) -> PyResult<(PyTensor4, f64)> {
    let hyper = WiserHyper { alpha, beta, eps_gate, kappa, a0 };
    let mut store = ParamStore::<f32>::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = WiserParams::init(&mut store, "wiser", x.inner.shape().c, hyper, &mut rng)
        .map_err(err_py)?;
    let mut g = Graph::new();
    let xi = g.leaf(x.inner.clone(), false);
    let out = wiser_forward(&mut g, &store, xi, &params).map_err(err_py)?;
    let ortho = g.value(out.ortho_term).item() as f64;
    Ok((PyTensor4 { inner: g.value(out.s_tilde).clone() }, ortho))
}

fn mask_from_rows(rows: Vec<Vec<bool>>, name: &str) -> PyResult<BinaryMask> {
    let h = rows.len();
    let w = rows.first().map(|r| r.len()).unwrap_or(0);
    if h == 0 || w == 0 {
        return Err(PyValueError::new_err(format!("{name}: empty mask")));
    }
    let mut bits = Vec::with_capacity(h * w);
    for row in &rows {
        if row.len() != w {
            return Err(PyValueError::new_err(format!("{name}: ragged rows")));
        }
        bits.extend_from_slice(row);
    }
    BinaryMask::new(h, w, bits).map_err(err_py)
}

/// Dice similarity coefficient in percent over boolean row-major masks.
#[pyfunction]
fn dsc(pred: Vec<Vec<bool>>, gt: Vec<Vec<bool>>) -> PyResult<f64> {
    let p = mask_from_rows(pred, "pred")?;
    let g = mask_from_rows(gt, "gt")?;
    metrics::dsc(&p, &g).map_err(err_py)
}

/// 95th-percentile Hausdorff distance in pixels; the second element
/// flags the empty-boundary sentinel.
#[pyfunction]
fn hd95(pred: Vec<Vec<bool>>, gt: Vec<Vec<bool>>) -> PyResult<(f64, bool)> {
    let p = mask_from_rows(pred, "pred")?;
    let g = mask_from_rows(gt, "gt")?;
    let r = metrics::hd95(&p, &g).map_err(err_py)?;
    Ok((r.value, r.degenerate))
}

fn embedding_set(vectors: Vec<Vec<f64>>, name: &str) -> PyResult<EmbeddingSet> {
    EmbeddingSet::new(vectors, EmbedSpace::Bottleneck, name).map_err(err_py)
}

/// Unbiased squared maximum mean discrepancy (RBF kernel, median
/// heuristic bandwidth).
#[pyfunction]
fn mmd(x: Vec<Vec<f64>>, y: Vec<Vec<f64>>) -> PyResult<f64> {
    Ok(metrics::mmd(&embedding_set(x, "x")?, &embedding_set(y, "y")?).map_err(err_py)?.value)
}

/// Mean per-dimension Jensen-Shannon divergence (natural log).
#[pyfunction]
#[pyo3(signature = (x, y, bins=32))]
fn jsd(x: Vec<Vec<f64>>, y: Vec<Vec<f64>>, bins: usize) -> PyResult<f64> {
    metrics::jsd(&embedding_set(x, "x")?, &embedding_set(y, "y")?, bins).map_err(err_py)
}

/// Frechet distance between Gaussian fits of the two sets.
#[pyfunction]
fn frechet(x: Vec<Vec<f64>>, y: Vec<Vec<f64>>) -> PyResult<f64> {
    metrics::frechet(&embedding_set(x, "x")?, &embedding_set(y, "y")?).map_err(err_py)
}

/// Decorrelation-penalty ramp: 0 through the warmup epoch, linear over
/// the ramp, then flat at `lambda_max` (1-based epochs).
#[pyfunction]
fn lambda_schedule(epoch: usize, warmup: usize, ramp: usize, lambda_max: f64) -> f64 {
    wisernet::losses::lambda_schedule(epoch, warmup, ramp, lambda_max)
}

/// Render one synthetic fundus-like sample for a named style preset.
/// Returns (image 1x3xSxS, mask 1x2xSxS).
#[pyfunction]
#[pyo3(signature = (preset, seed, size=64))]
fn generate_sample(preset: &str, seed: u64, size: usize) -> PyResult<(PyTensor4, PyTensor4)> {
    let style = synth::style_presets(synth::StylePreset::parse(preset).map_err(err_py)?);
    let anat = synth::AnatomySpec::default();
    let (image, mask) = synth::generate_sample(&anat, &style, seed, size).map_err(err_py)?;
    Ok((PyTensor4 { inner: image }, PyTensor4 { inner: mask }))
}

/// Parameter and analytic multiply-accumulate counts of the backbone
/// for a square input, with the skip filter on or off.
#[pyfunction]
#[pyo3(signature = (wiser, base_width=8, depth=4, input=64, seed=0))]
fn model_summary(
    wiser: bool,
    base_width: usize,
    depth: usize,
    input: usize,
    seed: u64,
) -> PyResult<(usize, usize)> {
    let cfg = ModelConfig { depth, base_width, wiser_enabled: wiser, ..ModelConfig::default() };
    let model: Model<f32> = Model::new(cfg, WiserHyper::default(), seed).map_err(err_py)?;
    let s = model.summary((input, input)).map_err(err_py)?;
    Ok((s.params, s.macs))
}

#[pymodule]
fn wisernet_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyTensor4>()?;
    m.add_function(wrap_pyfunction!(dwt_haar, m)?)?;
    m.add_function(wrap_pyfunction!(idwt_haar, m)?)?;
    m.add_function(wrap_pyfunction!(wiser_apply, m)?)?;
    m.add_function(wrap_pyfunction!(dsc, m)?)?;
    m.add_function(wrap_pyfunction!(hd95, m)?)?;
    m.add_function(wrap_pyfunction!(mmd, m)?)?;
    m.add_function(wrap_pyfunction!(jsd, m)?)?;
    m.add_function(wrap_pyfunction!(frechet, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_schedule, m)?)?;
    m.add_function(wrap_pyfunction!(generate_sample, m)?)?;
    m.add_function(wrap_pyfunction!(model_summary, m)?)?;
    Ok(())
}
