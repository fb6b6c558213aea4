//! Python bindings: the `dpc_tcm` extension module.
//!
//! Complex vectors cross the boundary as lists of Python `complex`, bit
//! vectors as lists of 0/1 integers. Library errors raise `ValueError`
//! (I/O failures raise `OSError`).

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use dpc_tcm::broadcast;
use dpc_tcm::harness::{self, BerPoint, BroadcastConfig, SimConfig};
use dpc_tcm::{Complex64, ConstellationKind, Error, TrellisCode, TrellisPreset};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyOSError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

fn preset(name: &str) -> PyResult<TrellisPreset> {
    name.parse().map_err(py_err)
}

/// Bits leave as a list of ints (a `Vec<u8>` would become `bytes`).
fn bits_out(v: Vec<u8>) -> Vec<u32> {
    v.into_iter().map(u32::from).collect()
}

fn trellis(name: &str, power: f64) -> PyResult<TrellisCode> {
    dpc_tcm::build_preset(preset(name)?, power).map_err(py_err)
}

/// Output of `DpcCode.encode`.
#[pyclass(frozen, get_all)]
struct EncodedBlock {
    message: Vec<u32>,
    /// Selected codeword u.
    u: Vec<Complex64>,
    /// Transmitted x = u - alpha s.
    x: Vec<Complex64>,
    achieved_metric: f64,
    state_path: Vec<usize>,
}

/// Output of `DpcCode.decode`.
#[pyclass(frozen, get_all)]
struct Decoded {
    message: Vec<u32>,
    codeword: Vec<Complex64>,
    distance: f64,
}

/// A binned trellis code for the dirty paper channel.
#[pyclass(frozen)]
struct DpcCode {
    spec: dpc_tcm::DpcSpec,
}

#[pymethods]
impl DpcCode {
    #[new]
    #[pyo3(signature = (preset_name, design_power, r = 1, alpha = 0.9, bin_strategy = "paired-max-spread"))]
    fn new(preset_name: &str, design_power: f64, r: usize, alpha: f64, bin_strategy: &str) -> PyResult<Self> {
        let strategy = bin_strategy.parse().map_err(py_err)?;
        let spec = dpc_tcm::DpcSpec::from_preset(preset(preset_name)?, design_power, r, strategy, alpha)
            .map_err(py_err)?;
        Ok(Self { spec })
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.spec.alpha()
    }

    #[getter]
    fn r(&self) -> usize {
        self.spec.r()
    }

    #[getter]
    fn design_power(&self) -> f64 {
        self.spec.design_power()
    }

    #[getter]
    fn num_states(&self) -> usize {
        self.spec.trellis().num_states()
    }

    /// Constellation points indexed by label.
    #[getter]
    fn points(&self) -> Vec<Complex64> {
        self.spec.constellation().points().to_vec()
    }

    /// Dirt-aware encoding of `message` (`r` bits per symbol) against `dirt`.
    fn encode(&self, message: Vec<u8>, dirt: Vec<Complex64>) -> PyResult<EncodedBlock> {
        let b = dpc_tcm::pip_encode(&self.spec, &message, &dirt).map_err(py_err)?;
        Ok(EncodedBlock {
            u: b.u().to_vec(),
            state_path: b.state_path().to_vec(),
            x: b.x,
            achieved_metric: b.achieved_metric,
            message: bits_out(b.message),
        })
    }

    /// Minimum Euclidean distance decoding over the whole trellis.
    fn decode(&self, y: Vec<Complex64>) -> PyResult<Decoded> {
        let d = dpc_tcm::medd_decode(&self.spec, &y).map_err(py_err)?;
        Ok(Decoded {
            message: bits_out(d.message),
            codeword: d.codeword.points,
            distance: d.distance,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "DpcCode({}, design_power={}, r={}, alpha={}, bin_strategy={})",
            self.spec.trellis().preset(),
            self.spec.design_power(),
            self.spec.r(),
            self.spec.alpha(),
            self.spec.bins().strategy()
        )
    }
}

/// `(y - u_hat) / (1 - alpha)`.
#[pyfunction]
fn recover_dirt(y: Vec<Complex64>, u_hat: Vec<Complex64>, alpha: f64) -> PyResult<Vec<Complex64>> {
    dpc_tcm::recover_dirt(&y, &u_hat, alpha).map_err(py_err)
}

/// Plain TCM encoding of `bits` with the preset at average power `power`.
#[pyfunction]
fn tcm_encode(preset_name: &str, power: f64, bits: Vec<u8>) -> PyResult<Vec<Complex64>> {
    Ok(dpc_tcm::tcm_encode(&trellis(preset_name, power)?, &bits).map_err(py_err)?.points)
}

/// Plain TCM decoding; returns the message bits.
#[pyfunction]
fn tcm_decode(preset_name: &str, power: f64, y: Vec<Complex64>) -> PyResult<Vec<u32>> {
    Ok(bits_out(dpc_tcm::tcm_decode(&trellis(preset_name, power)?, &y).map_err(py_err)?.message))
}

/// Points of a constellation (`qam4`, `qam8`, `qam16`, `pam8`), by label.
#[pyfunction]
fn constellation_points(kind: &str, power: f64) -> PyResult<Vec<Complex64>> {
    let kind: ConstellationKind = kind.parse().map_err(py_err)?;
    Ok(dpc_tcm::build_constellation(kind, power).map_err(py_err)?.points().to_vec())
}

#[pyfunction]
fn superposition_power(p1: f64, p2: f64) -> f64 {
    broadcast::superposition_power(p1, p2)
}

/// Whether every sum of a point of each constellation is distinct.
#[pyfunction]
fn uniquely_decodable(kind1: &str, power1: f64, kind2: &str, power2: f64) -> PyResult<bool> {
    let c = |k: &str, p| -> PyResult<_> {
        let k: ConstellationKind = k.parse().map_err(py_err)?;
        dpc_tcm::build_constellation(k, p).map_err(py_err)
    };
    Ok(broadcast::uniquely_decodable(&c(kind1, power1)?, &c(kind2, power2)?))
}

/// Text dump of a preset's tables.
#[pyfunction]
#[pyo3(signature = (preset_name, r = None, bin_strategy = "paired-max-spread"))]
fn describe(preset_name: &str, r: Option<usize>, bin_strategy: &str) -> PyResult<String> {
    harness::describe(preset(preset_name)?, r, bin_strategy.parse().map_err(py_err)?).map_err(py_err)
}

fn point_dict<'py>(py: Python<'py>, p: &BerPoint) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("design_power_db", p.design_power_db)?;
    d.set_item("alpha", p.alpha)?;
    d.set_item("sigma_s2", p.sigma_s2)?;
    d.set_item("measured_snr_db", p.measured_snr_db)?;
    d.set_item("bits", p.bits)?;
    d.set_item("errors", p.errors)?;
    d.set_item("ber", p.ber)?;
    d.set_item("blocks", p.blocks)?;
    d.set_item("dirt_ser", p.dirt_ser)?;
    d.set_item("truncated", p.truncated)?;
    Ok(d)
}

fn run_config<'py>(
    py: Python<'py>,
    config: &str,
    run: fn(&SimConfig) -> dpc_tcm::Result<Vec<BerPoint>>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = SimConfig::from_toml_str(config).map_err(py_err)?;
    let points = py.detach(|| run(&cfg)).map_err(py_err)?;
    points.iter().map(|p| point_dict(py, p)).collect()
}

/// Runs the sweep described by a config string; one dict per point.
#[pyfunction]
fn simulate<'py>(py: Python<'py>, config: &str) -> PyResult<Vec<Bound<'py, PyDict>>> {
    run_config(py, config, harness::run_sweep)
}

/// 4-state 4-QAM TCM over AWGN at each design power in `values`.
#[pyfunction]
fn awgn_baseline<'py>(py: Python<'py>, config: &str) -> PyResult<Vec<Bound<'py, PyDict>>> {
    run_config(py, config, harness::run_awgn_baseline)
}

/// Two-user broadcast run; one dict per decoded message stream.
#[pyfunction]
fn simulate_broadcast<'py>(py: Python<'py>, config: &str) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = BroadcastConfig::from_toml_str(config).map_err(py_err)?;
    let rows = py.detach(|| harness::run_broadcast(&cfg)).map_err(py_err)?;
    rows.iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("user", r.user)?;
            d.set_item("noise_variance", r.noise_variance)?;
            d.set_item("snr_db", r.snr_db)?;
            d.set_item("bits", r.bits)?;
            d.set_item("errors", r.errors)?;
            d.set_item("ber", r.ber)?;
            d.set_item("blocks", r.blocks)?;
            d.set_item("truncated", r.truncated)?;
            Ok(d)
        })
        .collect()
}

#[pymodule(name = "dpc_tcm")]
fn dpc_tcm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<DpcCode>()?;
    m.add_class::<EncodedBlock>()?;
    m.add_class::<Decoded>()?;
    m.add_function(wrap_pyfunction!(recover_dirt, m)?)?;
    m.add_function(wrap_pyfunction!(tcm_encode, m)?)?;
    m.add_function(wrap_pyfunction!(tcm_decode, m)?)?;
    m.add_function(wrap_pyfunction!(constellation_points, m)?)?;
    m.add_function(wrap_pyfunction!(superposition_power, m)?)?;
    m.add_function(wrap_pyfunction!(uniquely_decodable, m)?)?;
    m.add_function(wrap_pyfunction!(describe, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(awgn_baseline, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_broadcast, m)?)?;
    Ok(())
}
