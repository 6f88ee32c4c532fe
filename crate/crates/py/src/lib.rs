//! Python bindings. Build the cdylib with `--features extension-module` and
//! import it as `chargelab`.

use std::sync::Arc;

use chargelab::chaos::{self, FormFactorKind, Scope, UnitarySamples};
use chargelab::decoupling::{self, Cmi2, HpConfig, KlSetup, PurityOrder, Scrambler};
use chargelab::ensembles::{self, EnsembleKind, EnsembleSpec, HamiltonianEnsemble};
use chargelab::hilbert::{self, CMatrix, PauliString};
use chargelab::rng::{substream, Purpose};
use chargelab::weingarten::{self, WiringFactor, WiringSpec};
use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: chargelab::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse<T: std::str::FromStr<Err = chargelab::Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(err)
}

fn rows(m: &CMatrix) -> Vec<Vec<Complex64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn pauli(s: &str) -> PyResult<PauliString> {
    parse(s)
}

fn purity_order(s: &str) -> PyResult<PurityOrder> {
    match s {
        "leading" => Ok(PurityOrder::Leading),
        "exact" => Ok(PurityOrder::Exact),
        _ => Err(PyValueError::new_err(format!("order must be 'leading' or 'exact', got '{s}'"))),
    }
}

/// Computational basis of `qubits` qubits grouped by Hamming weight.
#[pyclass(name = "ChargeBasis", frozen)]
struct PyChargeBasis {
    inner: Arc<hilbert::ChargeBasis>,
}

#[pymethods]
impl PyChargeBasis {
    #[new]
    fn new(qubits: usize) -> PyResult<Self> {
        Ok(Self { inner: hilbert::ChargeBasis::shared(qubits).map_err(err)? })
    }

    #[getter]
    fn qubits(&self) -> usize {
        self.inner.qubits()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn sector_dims(&self) -> Vec<usize> {
        self.inner.sector_dims().to_vec()
    }

    fn sector_states(&self, q: usize) -> PyResult<Vec<usize>> {
        if q > self.inner.qubits() {
            return Err(PyValueError::new_err(format!("sector {q} out of range")));
        }
        Ok(self.inner.sector_states(q).to_vec())
    }

    /// Global index to `(charge, index within sector)`.
    fn to_sector(&self, global: usize) -> PyResult<(usize, usize)> {
        if global >= self.inner.dim() {
            return Err(PyValueError::new_err(format!("index {global} out of range")));
        }
        Ok(self.inner.to_sector(global))
    }

    fn __repr__(&self) -> String {
        format!("ChargeBasis(qubits={})", self.inner.qubits())
    }
}

/// Eigenvalues of every realization of an ensemble, sector by sector.
#[pyclass(name = "SpectralEnsemble", frozen)]
struct PySpectralEnsemble {
    inner: ensembles::SpectralEnsemble,
}

#[pymethods]
impl PySpectralEnsemble {
    /// `kind` is one of `haar`, `u1_haar`, `gue_per_sector`, `csyk`.
    #[new]
    #[pyo3(signature = (kind, size, realizations, seed = 1))]
    fn new(py: Python<'_>, kind: &str, size: usize, realizations: usize, seed: u64) -> PyResult<Self> {
        let spec = EnsembleSpec::new(parse::<EnsembleKind>(kind)?, size, seed, realizations);
        let inner = py.detach(|| ensembles::spectral_ensemble(&spec)).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn realizations(&self) -> usize {
        self.inner.realizations()
    }

    #[getter]
    fn total_dim(&self) -> usize {
        self.inner.total_dim()
    }

    /// `(mean, std_error)` of a form factor such as `r2`, `r4`, `p21` at time `t`.
    #[pyo3(signature = (kind, t, scope = "whole"))]
    fn form_factor(&self, kind: &str, t: f64, scope: &str) -> PyResult<(f64, f64)> {
        let v = chaos::form_factor(&self.inner, parse::<FormFactorKind>(kind)?, t, parse::<Scope>(scope)?).map_err(err)?;
        Ok((v.value, v.std_error))
    }

    /// Low-energy density-of-states exponent and its standard error.
    #[pyo3(signature = (scope = "whole", fraction = 0.1))]
    fn dos_exponent(&self, scope: &str, fraction: f64) -> PyResult<(f64, f64)> {
        let fit = chaos::fit_low_energy_exponent(&self.inner, parse::<Scope>(scope)?, fraction).map_err(err)?;
        Ok((fit.alpha, fit.std_error))
    }

    /// Masked relative error of the sector decomposition of `R_2` per time.
    fn r2_check(&self, times: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(chaos::r2_decomposition_check(&self.inner, &times).map_err(err)?.values)
    }

    /// Relative gap between the two `R_4` representations per time.
    fn r4_representation_gap(&self, times: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(chaos::r4_decomposition_check(&self.inner, &times).map_err(err)?.representation_gap.values)
    }
}

/// Realizations of an ensemble with their time evolution operators.
#[pyclass(name = "HamiltonianEnsemble", frozen)]
struct PyHamiltonianEnsemble {
    inner: HamiltonianEnsemble,
    basis: Arc<hilbert::ChargeBasis>,
}

impl PyHamiltonianEnsemble {
    fn samples(&self, t: f64) -> PyResult<UnitarySamples> {
        UnitarySamples::from_blocks(self.basis.clone(), self.inner.unitaries_at(t)).map_err(err)
    }
}

#[pymethods]
impl PyHamiltonianEnsemble {
    /// `kind` is `gue_per_sector` or `csyk`.
    #[new]
    #[pyo3(signature = (kind, size, realizations, seed = 1))]
    fn new(py: Python<'_>, kind: &str, size: usize, realizations: usize, seed: u64) -> PyResult<Self> {
        let spec = EnsembleSpec::new(parse::<EnsembleKind>(kind)?, size, seed, realizations);
        let inner = py.detach(|| HamiltonianEnsemble::sample(&spec)).map_err(err)?;
        Ok(Self { inner, basis: hilbert::ChargeBasis::shared(size).map_err(err)? })
    }

    /// `(F^(k), std_error)` of `e^{-iHt}`.
    fn frame_potential(&self, py: Python<'_>, t: f64, k: u32) -> PyResult<(f64, f64)> {
        let s = self.samples(t)?;
        let f = py.detach(|| chaos::frame_potential(&s, k)).map_err(err)?;
        Ok((f.value, f.std_error))
    }

    /// OTOC `<Tr(A U^dag B U ...)>/L` of Pauli strings such as `"ZIII"`.
    fn otoc(&self, t: f64, ops: Vec<String>) -> PyResult<(f64, f64)> {
        let dense = ops.iter().map(|o| pauli(o).map(|p| p.to_dense())).collect::<PyResult<Vec<_>>>()?;
        let o = chaos::otoc(&self.samples(t)?, &dense, Scope::Whole).map_err(err)?;
        Ok((o.value, o.std_error))
    }
}

/// Hayden-Preskill partition with charges `m_a`, `m_b`.
#[pyclass(name = "HpConfig", frozen)]
struct PyHpConfig {
    inner: HpConfig,
}

#[pymethods]
impl PyHpConfig {
    #[new]
    fn new(n_a: usize, n_b: usize, n_c: usize, n_d: usize, m_a: usize, m_b: usize) -> PyResult<Self> {
        Ok(Self { inner: HpConfig::new(n_a, n_b, n_c, n_d, m_a, m_b).map_err(err)? })
    }

    /// `(Tr rho_AC^2, Tr rho_C^2, Tr rho_A^2)`.
    #[pyo3(signature = (order = "leading"))]
    fn purities(&self, order: &str) -> PyResult<(f64, f64, f64)> {
        let p = decoupling::hp_purities(&self.inner, purity_order(order)?).map_err(err)?;
        Ok((p.purity_ac, p.purity_c, p.purity_a))
    }

    /// Decoupling margin; small values mean the reference decouples from C.
    fn margin(&self) -> PyResult<f64> {
        decoupling::decoupling_margin(&self.inner).map_err(err)
    }

    /// Renyi-2 CMI in bits, or `None` outside the decoupling regime.
    fn cmi2(&self) -> PyResult<Option<f64>> {
        Ok(match decoupling::hp_cmi2(&self.inner).map_err(err)? {
            Cmi2::Bits(b) => Some(b),
            Cmi2::Saturated { .. } => None,
        })
    }

    /// Sampled `(purity_ac, purity_c, cmi2)` with standard errors.
    #[pyo3(signature = (realizations, seed = 1))]
    fn monte_carlo(&self, py: Python<'_>, realizations: usize, seed: u64) -> PyResult<((f64, f64), (f64, f64), (f64, f64))> {
        let e = py.detach(|| decoupling::hp_monte_carlo(&self.inner, realizations, seed)).map_err(err)?;
        Ok(((e.purity_ac, e.purity_ac_se), (e.purity_c, e.purity_c_se), (e.cmi2, e.cmi2_se)))
    }
}

/// Haar average of a product of unitary entries. Each factor is `(row, col)`;
/// `ud` factors are entries of `U^dag`. Returns the rational function of `L`
/// as a string and its value at `d`.
#[pyfunction]
#[pyo3(signature = (u, ud, d = None))]
fn haar_moment(u: Vec<(u64, u64)>, ud: Vec<(u64, u64)>, d: Option<f64>) -> PyResult<(String, Option<f64>)> {
    let w = WiringSpec::new(
        u.into_iter().map(|(r, c)| WiringFactor::fixed(r, c)).collect(),
        ud.into_iter().map(|(r, c)| WiringFactor::fixed(r, c)).collect(),
    );
    let m = weingarten::haar_moment(&w).map_err(err)?;
    let value = d.map(|d| m.eval_f64(d)).transpose().map_err(err)?;
    Ok((m.to_string(), value))
}

/// Operator-valued moment of a word like `"{1,2,1,2}"`.
#[pyfunction]
fn operator_moment(word: &str) -> PyResult<String> {
    let (w, traced) = weingarten::parse_word(word).map_err(err)?;
    Ok(weingarten::format_terms(&weingarten::operator_moment(&w, traced).map_err(err)?))
}

/// Unitary Weingarten function of a cycle type, as a rational function of `L`.
#[pyfunction]
fn weingarten_unitary(cycle_type: Vec<usize>) -> PyResult<String> {
    Ok(weingarten::wg_unitary(&cycle_type).map_err(err)?.to_string())
}

/// Permutations of `k` with longest increasing subsequence at most `l`.
#[pyfunction]
fn lis_count(k: usize, l: usize) -> PyResult<u64> {
    weingarten::lis_count(k, l).map_err(err)
}

#[pyfunction]
fn page_purity(n_a: usize, n_b: usize, charge: usize) -> PyResult<f64> {
    decoupling::page_purity_analytic(n_a, n_b, charge).map_err(err)
}

/// Monte Carlo page purity of the product state `bits`; returns `(mean, se)`.
#[pyfunction]
#[pyo3(signature = (n_a, n_b, bits, realizations, scrambler = "u1_haar", seed = 1))]
fn page_purity_mc(n_a: usize, n_b: usize, bits: usize, realizations: usize, scrambler: &str, seed: u64) -> PyResult<(f64, f64)> {
    let scrambler = match scrambler {
        "haar" => Scrambler::Haar,
        "u1_haar" => Scrambler::U1Haar,
        _ => return Err(PyValueError::new_err(format!("unknown scrambler '{scrambler}'"))),
    };
    let st = decoupling::product_state(n_a + n_b, bits).map_err(err)?;
    let e = decoupling::page_purity_mc(n_a, n_b, &st, scrambler, realizations, seed).map_err(err)?;
    Ok((e.purity, e.std_error))
}

/// Knill-Laflamme statistics of a Pauli string between codewords `a`, `b`.
/// Pass `charge` for the U(1)-Haar encoding. Returns a dict of the sampled
/// and predicted moments.
#[pyfunction]
#[pyo3(signature = (op, a, b, realizations, charge = None, seed = 1))]
fn kl_statistics(
    py: Python<'_>,
    op: &str,
    a: usize,
    b: usize,
    realizations: usize,
    charge: Option<usize>,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let p = pauli(op)?;
    let qubits = p.len();
    let setup = match charge {
        Some(charge) => KlSetup::U1Haar { qubits, charge },
        None => KlSetup::Haar { qubits },
    };
    let s = decoupling::kl_statistics(setup, &p.to_dense(), a, b, realizations, seed).map_err(err)?;
    let d = pyo3::types::PyDict::new(py);
    d.set_item("mean", s.mean)?;
    d.set_item("mean_se", s.mean_se)?;
    d.set_item("variance", s.variance)?;
    d.set_item("variance_se", s.variance_se)?;
    d.set_item("predicted_mean", s.predicted_mean)?;
    d.set_item("predicted_variance", s.predicted_variance)?;
    d.set_item("exact_variance", s.exact_variance)?;
    Ok(d.into_any().unbind())
}

/// Dense complex SYK Hamiltonian on `n` modes as nested lists.
#[pyfunction]
#[pyo3(signature = (n, seed = 1, realization = 0, coupling = 1.0))]
fn syk_hamiltonian(n: usize, seed: u64, realization: u64, coupling: f64) -> PyResult<Vec<Vec<Complex64>>> {
    let c = ensembles::sample_syk_couplings(n, coupling, &mut substream(seed, Purpose::Syk, realization, 0)).map_err(err)?;
    Ok(rows(&ensembles::build_syk_dense(&c)))
}

/// Haar-random `d x d` unitary as nested lists.
#[pyfunction]
#[pyo3(signature = (d, seed = 1, realization = 0))]
fn haar_unitary(d: usize, seed: u64, realization: u64) -> Vec<Vec<Complex64>> {
    rows(&ensembles::sample_haar_unitary(d, &mut substream(seed, Purpose::Haar, realization, 0)))
}

/// Dense matrix of a Pauli string (qubit 0 is the most significant bit).
#[pyfunction]
fn pauli_matrix(op: &str) -> PyResult<Vec<Vec<Complex64>>> {
    Ok(rows(&pauli(op)?.to_dense()))
}

#[pymodule]
#[pyo3(name = "chargelab")]
fn chargelab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyChargeBasis>()?;
    m.add_class::<PySpectralEnsemble>()?;
    m.add_class::<PyHamiltonianEnsemble>()?;
    m.add_class::<PyHpConfig>()?;
    m.add_function(wrap_pyfunction!(haar_moment, m)?)?;
    m.add_function(wrap_pyfunction!(operator_moment, m)?)?;
    m.add_function(wrap_pyfunction!(weingarten_unitary, m)?)?;
    m.add_function(wrap_pyfunction!(lis_count, m)?)?;
    m.add_function(wrap_pyfunction!(page_purity, m)?)?;
    m.add_function(wrap_pyfunction!(page_purity_mc, m)?)?;
    m.add_function(wrap_pyfunction!(kl_statistics, m)?)?;
    m.add_function(wrap_pyfunction!(syk_hamiltonian, m)?)?;
    m.add_function(wrap_pyfunction!(haar_unitary, m)?)?;
    m.add_function(wrap_pyfunction!(pauli_matrix, m)?)?;
    Ok(())
}
