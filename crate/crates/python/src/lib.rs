//! Python bindings: mesh generation, full-order solves, ROM training and replay.

use std::path::PathBuf;

use manrom::fem::{FemProblem, MaterialParams, QuadratureRule, SolverSettings};
use manrom::harness::{self, CampaignConfig, MethodConfig};
use manrom::manifold::correlation_dimension;
use manrom::mesh::{carve_pores, generate_cube_mesh, Mesh, PoreSpec};
use manrom::pod::{pod_eigenvalues, RngStream, SnapshotMeta, SnapshotSet};
use manrom::rom::{rom_solve, RomModel};
use nalgebra::{DMatrix, DVector, Matrix3};
use numpy::ndarray::{Array1, Array2, Array4};
use numpy::{IntoPyArray, PyArray1, PyArray2, PyArray4, PyReadonlyArray2, PyReadonlyArray3};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(manrom_py, ManromError, PyException, "Raised for library failures; the message starts with the error code.");

fn err(e: manrom::Error) -> PyErr {
    ManromError::new_err(format!("{}: {e}", e.code()))
}

fn to_dmatrix(a: &PyReadonlyArray2<'_, f64>) -> DMatrix<f64> {
    let v = a.as_array();
    DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)])
}

fn to_numpy<'py>(py: Python<'py>, m: &DMatrix<f64>) -> Bound<'py, PyArray2<f64>> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)]).into_pyarray(py)
}

fn columns<'py>(py: Python<'py>, cols: &[DVector<f64>], rows: usize) -> Bound<'py, PyArray2<f64>> {
    Array2::from_shape_fn((rows, cols.len()), |(i, j)| cols[j][i]).into_pyarray(py)
}

/// `(n, 3, 3)` array to a list of load steps.
fn load_steps(a: &PyReadonlyArray3<'_, f64>) -> PyResult<Vec<Matrix3<f64>>> {
    let v = a.as_array();
    if v.shape()[1] != 3 || v.shape()[2] != 3 {
        return Err(PyValueError::new_err(format!("load steps must have shape (n, 3, 3), got {:?}", v.shape())));
    }
    Ok((0..v.shape()[0]).map(|n| Matrix3::from_fn(|i, j| v[(n, i, j)])).collect())
}

/// Tetrahedral cube mesh, optionally with spherical pores removed.
#[pyclass(name = "Mesh", module = "manrom_py", frozen)]
struct PyMesh {
    inner: Mesh,
}

#[pymethods]
impl PyMesh {
    #[new]
    #[pyo3(signature = (edge_length = 6.0, divisions = 6, pore_centers = None, pore_radius = 1.5))]
    fn new(edge_length: f64, divisions: usize, pore_centers: Option<Vec<[f64; 3]>>, pore_radius: f64) -> PyResult<Self> {
        let cube = generate_cube_mesh(edge_length, divisions).map_err(err)?;
        let inner = match pore_centers {
            Some(centers) if !centers.is_empty() => carve_pores(&cube, &PoreSpec { centers, radius: pore_radius }).map_err(err)?,
            _ => cube,
        };
        Ok(PyMesh { inner })
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    #[getter]
    fn element_count(&self) -> usize {
        self.inner.element_count()
    }

    /// `(N, 3)` node coordinates.
    #[getter]
    fn nodes<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray2<f64>> {
        let n = &self.inner.nodes;
        Array2::from_shape_fn((n.len(), 3), |(i, c)| n[i][c]).into_pyarray(py)
    }

    /// `(E, 10)` connectivity.
    #[getter]
    fn elements<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray2<u64>> {
        let e = &self.inner.elements;
        Array2::from_shape_fn((e.len(), 10), |(i, c)| e[i][c] as u64).into_pyarray(py)
    }

    fn volume(&self) -> f64 {
        (0..self.inner.element_count()).map(|e| self.inner.element_volume(e)).sum()
    }

    fn __repr__(&self) -> String {
        format!("Mesh(nodes={}, elements={})", self.inner.node_count(), self.inner.element_count())
    }
}

/// Periodic RVE problem on a mesh.
#[pyclass(name = "Problem", module = "manrom_py", frozen)]
struct PyProblem {
    inner: FemProblem,
}

#[pymethods]
impl PyProblem {
    #[new]
    #[pyo3(signature = (mesh, youngs = 1000.0, nu = 0.2, five_point = false))]
    fn new(mesh: &PyMesh, youngs: f64, nu: f64, five_point: bool) -> PyResult<Self> {
        let mat = MaterialParams::from_youngs(youngs, nu).map_err(err)?;
        let rule = if five_point { QuadratureRule::FivePoint } else { QuadratureRule::FourPoint };
        Ok(PyProblem { inner: FemProblem::new(&mesh.inner, mat, rule).map_err(err)? })
    }

    /// Independent dofs `D`.
    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// Full-order solve along `(n, 3, 3)` load steps. Returns the `(D, n)`
    /// states and the Newton iterations per step.
    #[pyo3(signature = (h_steps, res_max = 1e-6, max_iterations = 30))]
    fn solve_path<'py>(
        &self,
        py: Python<'py>,
        h_steps: PyReadonlyArray3<'py, f64>,
        res_max: f64,
        max_iterations: usize,
    ) -> PyResult<(Bound<'py, PyArray2<f64>>, Vec<usize>)> {
        let path = load_steps(&h_steps)?;
        let settings = SolverSettings { res_max, max_iterations, ..SolverSettings::default() };
        let (states, traces) = py.detach(|| self.inner.solve_path(&path, &settings)).map_err(err)?;
        Ok((columns(py, &states, self.inner.dim()), traces.iter().map(|t| t.iterations).collect()))
    }

    /// Condensed residual at an independent state.
    fn residual<'py>(&self, py: Python<'py>, u: Vec<f64>, h_bar: [[f64; 3]; 3]) -> PyResult<Bound<'py, PyArray1<f64>>> {
        let h = Matrix3::from_fn(|i, j| h_bar[i][j]);
        let g = self.inner.residual(&DVector::from_vec(u), &h).map_err(err)?;
        Ok(Array1::from_vec(g.as_slice().to_vec()).into_pyarray(py))
    }
}

/// Random load paths as a `(count, steps, 3, 3)` array.
#[pyfunction]
#[pyo3(signature = (count, steps = 10, seed = 42, dh_lp = 0.03, dh_ls = 0.015))]
fn load_paths<'py>(py: Python<'py>, count: usize, steps: usize, seed: u64, dh_lp: f64, dh_ls: f64) -> PyResult<Bound<'py, PyArray4<f64>>> {
    let paths = harness::generate_load_paths(count, &mut RngStream::new(seed), dh_lp, dh_ls, steps).map_err(err)?;
    Ok(Array4::from_shape_fn((count, steps, 3, 3), |(p, n, i, j)| paths[p].h_steps[n][(i, j)]).into_pyarray(py))
}

fn method_config(method: &str, d: usize, options: Option<&Bound<'_, PyDict>>) -> PyResult<MethodConfig> {
    let mut v = serde_json::json!({ "name": method, "d": d });
    if let Some(opts) = options {
        for (k, val) in opts.iter() {
            let key: String = k.extract()?;
            let json = if let Ok(b) = val.extract::<bool>() {
                serde_json::Value::Bool(b)
            } else if let Ok(i) = val.extract::<i64>() {
                serde_json::Value::from(i)
            } else if let Ok(f) = val.extract::<f64>() {
                serde_json::Value::from(f)
            } else {
                let s: String = val.str()?.extract()?;
                serde_json::from_str(&s).unwrap_or(serde_json::Value::String(s))
            };
            v[key] = json;
        }
    }
    let m: MethodConfig = serde_json::from_value(v).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(m)
}

/// A trained reduced-order model.
#[pyclass(name = "Model", module = "manrom_py", frozen)]
struct PyModel {
    inner: RomModel,
}

#[pymethods]
impl PyModel {
    /// Train `method` (`pod`, `lpod`, `lem`, `lle`) at dimension `d` on a
    /// `(D, s)` snapshot matrix whose first column is zero. Keyword options
    /// follow the campaign config fields (`k`, `n_lin`, `two_stage`, ...).
    #[staticmethod]
    #[pyo3(signature = (snapshots, method, d, seed = 42, **options))]
    fn train(py: Python<'_>, snapshots: PyReadonlyArray2<'_, f64>, method: &str, d: usize, seed: u64, options: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let cfg = method_config(method, d, options)?;
        let u = to_dmatrix(&snapshots);
        let meta = (0..u.ncols())
            .map(|j| SnapshotMeta { path: (j > 0).then_some(0), step: j, h_bar: [[0.0; 3]; 3] })
            .collect();
        let set = SnapshotSet::new(u, meta).map_err(err)?;
        let model = py.detach(|| harness::train_method(&cfg, d, &set, &mut RngStream::new(seed))).map_err(err)?;
        Ok(PyModel { inner: model })
    }

    #[staticmethod]
    fn load(dir: PathBuf) -> PyResult<Self> {
        Ok(PyModel { inner: harness::load_model(&dir).map_err(err)?.0 })
    }

    #[pyo3(signature = (dir, label = None, seed = 0))]
    fn save(&self, dir: PathBuf, label: Option<String>, seed: u64) -> PyResult<()> {
        let label = label.unwrap_or_else(|| self.inner.kind().to_string());
        harness::save_model(&dir, &self.inner, &label, seed).map_err(err)?;
        Ok(())
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// Reduced solve along `(n, 3, 3)` load steps. Returns the `(D, n)`
    /// reconstructed states and the iterations per step.
    #[pyo3(signature = (problem, h_steps, res_max = 1e-6, max_iterations = 30))]
    fn solve<'py>(
        &self,
        py: Python<'py>,
        problem: &PyProblem,
        h_steps: PyReadonlyArray3<'py, f64>,
        res_max: f64,
        max_iterations: usize,
    ) -> PyResult<(Bound<'py, PyArray2<f64>>, Vec<usize>)> {
        let path = load_steps(&h_steps)?;
        let settings = SolverSettings { res_max, max_iterations, ..SolverSettings::default() };
        let (states, trace) = py.detach(|| rom_solve(&self.inner, &problem.inner, &path, &settings)).map_err(err)?;
        let u: Vec<DVector<f64>> = states.into_iter().map(|s| s.u).collect();
        Ok((columns(py, &u, problem.inner.dim()), trace.steps.iter().map(|s| s.iterations).collect()))
    }

    fn __repr__(&self) -> String {
        format!("Model(kind={}, d={})", self.inner.kind(), self.inner.dim())
    }
}

/// Descending covariance eigenvalues of a snapshot matrix.
#[pyfunction]
fn eigenvalues<'py>(py: Python<'py>, snapshots: PyReadonlyArray2<'py, f64>) -> PyResult<Bound<'py, PyArray1<f64>>> {
    let v = pod_eigenvalues(&to_dmatrix(&snapshots)).map_err(err)?;
    Ok(Array1::from_vec(v.as_slice().to_vec()).into_pyarray(py))
}

/// Correlation dimension of the columns of `points`: `(eps, p_cd, plateau)`.
#[pyfunction]
#[pyo3(signature = (points, grid = 60, fraction = 0.2))]
fn corrdim<'py>(
    py: Python<'py>,
    points: PyReadonlyArray2<'py, f64>,
    grid: usize,
    fraction: f64,
) -> PyResult<(Bound<'py, PyArray1<f64>>, Bound<'py, PyArray1<f64>>, Option<f64>)> {
    let u = to_dmatrix(&points);
    let est = py.detach(|| correlation_dimension(&u, grid)).map_err(err)?;
    let plateau = est.plateau(fraction);
    Ok((Array1::from_vec(est.eps_grid).into_pyarray(py), Array1::from_vec(est.p_cd).into_pyarray(py), plateau))
}

#[pyfunction]
fn read_matrix<'py>(py: Python<'py>, path: PathBuf) -> PyResult<Bound<'py, PyArray2<f64>>> {
    Ok(to_numpy(py, &harness::read_matrix(&path).map_err(err)?))
}

#[pyfunction]
fn write_matrix(path: PathBuf, m: PyReadonlyArray2<'_, f64>) -> PyResult<()> {
    harness::write_matrix(&path, &to_dmatrix(&m)).map_err(err)
}

/// Run a campaign from a JSON config string and return the report CSV.
#[pyfunction]
fn run_campaign(py: Python<'_>, config_json: &str) -> PyResult<String> {
    let cfg = CampaignConfig::from_json(config_json).map_err(err)?;
    Ok(py.detach(|| harness::run_campaign(&cfg)).map_err(err)?.to_csv())
}

/// Method names accepted by `Model.train`.
#[pyfunction]
fn methods() -> Vec<&'static str> {
    vec!["pod", "lpod", "lem", "lle"]
}

#[pymodule]
fn manrom_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ManromError", m.py().get_type::<ManromError>())?;
    m.add_class::<PyMesh>()?;
    m.add_class::<PyProblem>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(load_paths, m)?)?;
    m.add_function(wrap_pyfunction!(eigenvalues, m)?)?;
    m.add_function(wrap_pyfunction!(corrdim, m)?)?;
    m.add_function(wrap_pyfunction!(read_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(write_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(run_campaign, m)?)?;
    m.add_function(wrap_pyfunction!(methods, m)?)?;
    Ok(())
}
