//! Python bindings: state pairs on the star graph, the closed-form
//! resolvent and evolution, quasimode certification, and the smeared
//! convergence experiment. Complex scalars cross the boundary as native
//! Python complex numbers.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use starwave::approx::{convergence_study, DampingProfile, MeshProblem};
use starwave::evolve::{
    critical_family, escalating_theta, reflection_matrices, EvolutionProblem,
};
use starwave::graphfun::{energy_norm, vertex_trace};
use starwave::resolvent::resolvent_apply;
use starwave::spectra::{
    c0_constant as c0_constant_rs, chain_residuals as chain_residuals_rs,
    eig_chain as eig_chain_rs, project_domain as project_domain_rs,
    pseudospectrum_scan as pseudospectrum_scan_rs, quasimode_axis as quasimode_axis_rs,
    resolvent_norm_lower as resolvent_norm_lower_rs, seed_dictionary as seed_dictionary_rs,
    C0Grid, ZGrid,
};
use starwave::{Complex64, EdgeFunction, StarGraph, StatePair};

fn err(e: starwave::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn graph(n_edges: usize) -> PyResult<StarGraph> {
    StarGraph::new(n_edges).map_err(err)
}

/// A state `(u, v)` of the wave system: position profile and velocity.
#[pyclass(from_py_object)]
#[derive(Clone)]
struct State {
    inner: StatePair,
}

#[pymethods]
impl State {
    /// The zero state on a star with the given number of edges.
    #[staticmethod]
    fn zero(n_edges: usize) -> PyResult<State> {
        Ok(State { inner: StatePair::zero(graph(n_edges)?) })
    }

    #[getter]
    fn n_edges(&self) -> usize {
        self.inner.graph().n_edges()
    }

    fn eval_u(&self, edge: usize, x: f64) -> Complex64 {
        self.inner.u.eval(edge, x)
    }

    fn eval_v(&self, edge: usize, x: f64) -> Complex64 {
        self.inner.v.eval(edge, x)
    }

    fn eval_u_deriv(&self, edge: usize, x: f64) -> Complex64 {
        self.inner.u.edge(edge).eval_deriv(x)
    }

    /// Vertex traces `(u(0), v(0))`.
    fn vertex(&self) -> (Complex64, Complex64) {
        let (u0, _) = vertex_trace(&self.inner.u);
        let (v0, _) = vertex_trace(&self.inner.v);
        (u0, v0)
    }

    fn energy_norm(&self) -> PyResult<f64> {
        energy_norm(&self.inner).map_err(err)
    }

    fn add(&self, other: &State) -> State {
        State { inner: self.inner.add(&other.inner) }
    }

    fn sub(&self, other: &State) -> State {
        State { inner: self.inner.sub(&other.inner) }
    }

    fn scale(&self, factor: Complex64) -> State {
        State { inner: self.inner.scale(factor) }
    }

    fn __repr__(&self) -> String {
        format!("State(n_edges={})", self.inner.graph().n_edges())
    }
}

/// Closed-form solution of the damped wave Cauchy problem.
#[pyclass]
struct Evolution {
    inner: EvolutionProblem,
    alpha: Complex64,
}

#[pymethods]
impl Evolution {
    #[new]
    #[pyo3(signature = (alpha, data, tol_domain = 1e-7))]
    fn new(alpha: Complex64, data: &State, tol_domain: f64) -> PyResult<Evolution> {
        let p = EvolutionProblem::new(alpha, data.inner.u.clone(), data.inner.v.clone(), tol_domain)
            .map_err(err)?;
        Ok(Evolution { inner: p, alpha })
    }

    fn state_at(&self, t: f64) -> PyResult<State> {
        Ok(State { inner: starwave::evolve::solution_at(&self.inner, t).map_err(err)? })
    }

    fn energy(&self, t: f64) -> PyResult<f64> {
        starwave::evolve::energy(&self.inner, t).map_err(err)
    }

    /// `(u(0), |flux + alpha v(0)|, continuity defect)` at time `t`.
    fn vertex_report(&self, t: f64) -> PyResult<(Complex64, f64, f64)> {
        let state = starwave::evolve::solution_at(&self.inner, t).map_err(err)?;
        Ok(starwave::evolve::vertex_report(&state, self.alpha))
    }
}

/// One branch of the non-unique critical-coupling solution family.
#[pyclass]
struct CriticalBranch {
    inner: starwave::evolve::CriticalSolution,
}

#[pymethods]
impl CriticalBranch {
    fn state_at(&self, t: f64) -> PyResult<State> {
        Ok(State { inner: self.inner.state_at(t).map_err(err)? })
    }

    fn energy_at(&self, t: f64) -> PyResult<f64> {
        self.inner.energy_at(t).map_err(err)
    }

    /// Energy contributed by the free boundary function up to `t`.
    fn theta_energy(&self, t: f64) -> PyResult<f64> {
        self.inner.theta_energy(t).map_err(err)
    }
}

/// Apply the closed-form resolvent `(W_alpha - z)^{-1}` to `data`.
#[pyfunction]
#[pyo3(signature = (alpha, z, data, tol_domain = 1e-8))]
fn resolve(alpha: Complex64, z: Complex64, data: &State, tol_domain: f64) -> PyResult<State> {
    let out = resolvent_apply(alpha, z, &data.inner, tol_domain).map_err(err)?;
    Ok(State { inner: out.state })
}

/// Apply the generator `W_alpha` to a state in its domain.
#[pyfunction]
#[pyo3(signature = (data, alpha, tol_domain = 1e-6))]
fn apply_generator(data: &State, alpha: Complex64, tol_domain: f64) -> PyResult<State> {
    let img = starwave::resolvent::apply_generator(&data.inner, alpha, tol_domain).map_err(err)?;
    Ok(State { inner: img })
}

/// Deterministic dictionary of continuous test states.
#[pyfunction]
fn seed_dictionary(n_edges: usize, count: usize, seed: u64) -> PyResult<Vec<State>> {
    Ok(seed_dictionary_rs(graph(n_edges)?, count, seed)
        .into_iter()
        .map(|inner| State { inner })
        .collect())
}

/// Repair the damped flux condition of a state without moving its traces.
#[pyfunction]
#[pyo3(signature = (data, alpha, tol_domain = 1e-7))]
fn project_domain(data: &State, alpha: Complex64, tol_domain: f64) -> PyResult<State> {
    Ok(State { inner: project_domain_rs(&data.inner, alpha, tol_domain).map_err(err)? })
}

/// Compactly supported quasimode at `i theta` with residual ratio ~ 1/n.
#[pyfunction]
fn quasimode_axis(theta: f64, n: u32, n_edges: usize) -> PyResult<(State, f64)> {
    let q = quasimode_axis_rs(theta, n, n_edges).map_err(err)?;
    Ok((State { inner: q.state }, q.residual_ratio))
}

/// Infimum of the vertex-family constant over the default parameter grid.
#[pyfunction]
fn c0_constant(n_edges: usize) -> f64 {
    c0_constant_rs(n_edges, &C0Grid::default())
}

/// Certified resolvent-norm lower bound at `z` from domain states.
#[pyfunction]
#[pyo3(signature = (alpha, z, dictionary, tol_domain = 1e-7))]
fn resolvent_norm_lower(
    alpha: Complex64,
    z: Complex64,
    dictionary: Vec<State>,
    tol_domain: f64,
) -> PyResult<f64> {
    let states: Vec<StatePair> = dictionary.into_iter().map(|s| s.inner).collect();
    resolvent_norm_lower_rs(alpha, z, &states, tol_domain).map_err(err)
}

/// Scan a rectangular z-grid; rows are `(z, norm_lower, eta_bound,
/// axis_bound)` in row-major `(Im z, Re z)` order.
#[pyfunction]
fn pseudospectrum_scan(
    alpha: Complex64,
    re_min: f64,
    re_max: f64,
    re_count: usize,
    im_min: f64,
    im_max: f64,
    im_count: usize,
    n_edges: usize,
    seed: u64,
) -> PyResult<Vec<(Complex64, f64, f64, f64)>> {
    let grid = ZGrid { re_min, re_max, re_count, im_min, im_max, im_count };
    let records = pseudospectrum_scan_rs(alpha, &grid, n_edges, seed).map_err(err)?;
    Ok(records
        .into_iter()
        .map(|r| (r.z, r.norm_lower_estimate, r.eta_bound, r.axis_bound))
        .collect())
}

/// Generalized eigenchain at the critical coupling.
#[pyfunction]
fn eig_chain(n_edges: usize, z: Complex64, length: usize) -> PyResult<Vec<State>> {
    Ok(eig_chain_rs(n_edges, z, length)
        .map_err(err)?
        .into_iter()
        .map(|inner| State { inner })
        .collect())
}

/// Relative recurrence residuals of an eigenchain.
#[pyfunction]
#[pyo3(signature = (chain, n_edges, z, tol_domain = 1e-7))]
fn chain_residuals(
    chain: Vec<State>,
    n_edges: usize,
    z: Complex64,
    tol_domain: f64,
) -> PyResult<Vec<f64>> {
    let states: Vec<StatePair> = chain.into_iter().map(|s| s.inner).collect();
    chain_residuals_rs(&states, n_edges, z, tol_domain).map_err(err)
}

/// Determinant of the incoming reflection system, `alpha - N`.
#[pyfunction]
fn reflection_det(alpha: Complex64, n_edges: usize) -> Complex64 {
    reflection_matrices(alpha, n_edges).det_minus
}

/// The branch with the free boundary function held at zero.
#[pyfunction]
#[pyo3(signature = (alpha, data, tau, tol = 1e-9))]
fn critical_flat(alpha: Complex64, data: &State, tau: f64, tol: f64) -> PyResult<CriticalBranch> {
    let sol = critical_family(
        alpha,
        data.inner.u.clone(),
        data.inner.v.clone(),
        &EdgeFunction::zero(),
        tau,
        tol,
    )
    .map_err(err)?;
    Ok(CriticalBranch { inner: sol })
}

/// The branch whose free boundary function escalates toward `tau`,
/// blowing up the energy inside the quiet window.
#[pyfunction]
#[pyo3(signature = (alpha, data, tau, levels, tol = 1e-9))]
fn critical_escalating(
    alpha: Complex64,
    data: &State,
    tau: f64,
    levels: usize,
    tol: f64,
) -> PyResult<CriticalBranch> {
    let phi1_slope =
        (data.inner.u.edge(0).eval_deriv(0.0) - data.inner.v.eval(0, 0.0)) / 2.0;
    let (theta, _) = escalating_theta(tau, phi1_slope, levels).map_err(err)?;
    let sol = critical_family(
        alpha,
        data.inner.u.clone(),
        data.inner.v.clone(),
        &theta,
        tau,
        tol,
    )
    .map_err(err)?;
    Ok(CriticalBranch { inner: sol })
}

/// Norm-resolvent convergence experiment; rows are
/// `(n, sup_gap, mesh_floor, slope_running)`.
#[pyfunction]
#[pyo3(signature = (alpha, z, n_edges, n_list, elements, seed = 7))]
fn converge(
    alpha: Complex64,
    z: Complex64,
    n_edges: usize,
    n_list: Vec<u32>,
    elements: usize,
    seed: u64,
) -> PyResult<Vec<(u32, f64, f64, f64)>> {
    let g = graph(n_edges)?;
    let dict = seed_dictionary_rs(g, 3, seed);
    let mesh = MeshProblem::for_params(z, elements).map_err(err)?;
    let profile = DampingProfile::standard(g, 1).map_err(err)?;
    let rows = convergence_study(alpha, z, &dict, &n_list, &mesh, &profile).map_err(err)?;
    Ok(rows.into_iter().map(|r| (r.n, r.sup_gap, r.mesh_floor, r.slope_running)).collect())
}

#[pymodule]
fn starwave_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<State>()?;
    m.add_class::<Evolution>()?;
    m.add_class::<CriticalBranch>()?;
    m.add_function(wrap_pyfunction!(resolve, m)?)?;
    m.add_function(wrap_pyfunction!(apply_generator, m)?)?;
    m.add_function(wrap_pyfunction!(seed_dictionary, m)?)?;
    m.add_function(wrap_pyfunction!(project_domain, m)?)?;
    m.add_function(wrap_pyfunction!(quasimode_axis, m)?)?;
    m.add_function(wrap_pyfunction!(c0_constant, m)?)?;
    m.add_function(wrap_pyfunction!(resolvent_norm_lower, m)?)?;
    m.add_function(wrap_pyfunction!(pseudospectrum_scan, m)?)?;
    m.add_function(wrap_pyfunction!(eig_chain, m)?)?;
    m.add_function(wrap_pyfunction!(chain_residuals, m)?)?;
    m.add_function(wrap_pyfunction!(reflection_det, m)?)?;
    m.add_function(wrap_pyfunction!(critical_flat, m)?)?;
    m.add_function(wrap_pyfunction!(critical_escalating, m)?)?;
    m.add_function(wrap_pyfunction!(converge, m)?)?;
    Ok(())
}
