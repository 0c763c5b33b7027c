//! Time evolution by the method of characteristics.
//!
//! Splitting the initial data into Riemann invariants `phi_j = (f_j' -
//! g_j)/2`-antiderivatives and `psi_j = (f_j' + g_j)/2`-antiderivatives
//! turns the wave equation into rigid transport: `u_j(t,x) = u(0,0) +
//! phi_j(x-t) + psi_j(x+t)`. Incoming characteristics hit the vertex and
//! reflect through a pair of matrices built from continuity and the damped
//! flux condition; away from the critical coupling the reflection is
//! unique, at `alpha = N` a free scalar function `theta` parameterizes a
//! genuine family of distinct solutions whose energy can blow up in finite
//! time.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{DomainCondition, Error, Result};
use crate::graphfun::{
    l2_inner, robin_residual, vertex_trace, EdgeFunction, GraphFunction, StarGraph, StatePair,
};
use crate::numfmt::sig17;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Riemann-invariant split: `phi_j(x) = (1/2) int_0^x (f_j' - g_j)` and
/// `psi_j(x) = (1/2) int_0^x (f_j' + g_j)`; both vanish at the vertex.
pub fn dalembert_split(f: &GraphFunction, g: &GraphFunction) -> Result<(GraphFunction, GraphFunction)> {
    let graph = f.graph();
    let mut phi = Vec::with_capacity(graph.n_edges());
    let mut psi = Vec::with_capacity(graph.n_edges());
    for j in 0..graph.n_edges() {
        let fp = f.edge(j).derivative();
        phi.push(fp.sub(g.edge(j)).scale(Complex64::new(0.5, 0.0)).antiderivative()?);
        psi.push(fp.add(g.edge(j)).scale(Complex64::new(0.5, 0.0)).antiderivative()?);
    }
    Ok((GraphFunction::from_edges(graph, phi)?, GraphFunction::from_edges(graph, psi)?))
}

/// Vertex reflection matrices: rows `1..N-1` are the difference stencils of
/// trace continuity, the last row is constant `alpha/N -+ 1` from the damped
/// flux condition averaged over edges. `det(m_minus) = alpha - N`, so the
/// reflection degenerates exactly at the critical coupling.
#[derive(Debug, Clone)]
pub struct ReflectionMatrices {
    pub m_minus: DMatrix<Complex64>,
    pub m_plus: DMatrix<Complex64>,
    pub det_minus: Complex64,
    /// 2-norm condition number of `m_minus`; large near criticality.
    pub condition_minus: f64,
}

pub fn reflection_matrices(alpha: Complex64, n_edges: usize) -> ReflectionMatrices {
    let n = n_edges;
    let nf = n as f64;
    let build = |sign: f64| {
        DMatrix::from_fn(n, n, |i, j| {
            if i + 1 < n {
                if j == i {
                    ONE
                } else if j == i + 1 {
                    -ONE
                } else {
                    ZERO
                }
            } else {
                alpha / nf + sign
            }
        })
    };
    let m_minus = build(-1.0);
    let m_plus = build(1.0);
    let det_minus = m_minus.clone().lu().determinant();
    let sv = m_minus.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0f64, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition_minus = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    ReflectionMatrices { m_minus, m_plus, det_minus, condition_minus }
}

/// Assembled characteristics of one evolution: the outgoing invariant on
/// `[0, inf)`, the reflected boundary values `r_j(s) = phi_j(-s)` on
/// `[0, horizon)`, and the incoming invariant.
#[derive(Debug, Clone)]
pub struct WaveSolution {
    graph: StarGraph,
    u00: Complex64,
    phi_plus: GraphFunction,
    reflected: GraphFunction,
    psi: GraphFunction,
    pub horizon: f64,
}

impl WaveSolution {
    /// `(u(t), du/dt(t))` assembled by transport and reflection.
    pub fn state_at(&self, t: f64) -> Result<StatePair> {
        if t < 0.0 {
            return Err(Error::InvalidInput(format!("negative evolution time {t}")));
        }
        if t >= self.horizon {
            return Err(Error::Horizon { t, horizon: self.horizon });
        }
        let mut u_edges = Vec::with_capacity(self.graph.n_edges());
        let mut v_edges = Vec::with_capacity(self.graph.n_edges());
        for j in 0..self.graph.n_edges() {
            let phi = self.phi_plus.edge(j);
            let r = self.reflected.edge(j);
            let psi = self.psi.edge(j);
            let trace = EdgeFunction::constant(self.u00, 0.0, f64::INFINITY)?;
            let u = trace
                .add(&phi.translate(t))
                .add(&r.reflect(t))
                .add(&psi.translate(-t));
            // du/dt: the outgoing invariant moves right, the reflected wave
            // grows with t, the incoming one moves left.
            let v = phi
                .derivative()
                .translate(t)
                .scale(-ONE)
                .add(&r.derivative().reflect(t))
                .add(&psi.derivative().translate(-t));
            u_edges.push(u);
            v_edges.push(v);
        }
        StatePair::new(
            GraphFunction::from_edges(self.graph, u_edges)?,
            GraphFunction::from_edges(self.graph, v_edges)?,
        )
    }

    /// Energy from the invariant windows:
    /// `E(t) = 2 sum_j [ int_0^t |r_j'|^2 + int_0^inf |phi_j'|^2 +
    /// int_t^inf |psi_j'|^2 ]`, which equals `||u'(t)||^2 + ||v(t)||^2`.
    pub fn energy_at(&self, t: f64) -> Result<f64> {
        if t < 0.0 {
            return Err(Error::InvalidInput(format!("negative evolution time {t}")));
        }
        if t >= self.horizon {
            return Err(Error::Horizon { t, horizon: self.horizon });
        }
        let mut total = 0.0;
        let g1 = StarGraph::new(1)?;
        let norm2 = |e: EdgeFunction| -> Result<f64> {
            let f = GraphFunction::radial(g1, e);
            Ok(l2_inner(&f, &f)?.re.max(0.0))
        };
        for j in 0..self.graph.n_edges() {
            total += norm2(self.reflected.edge(j).derivative().restrict(0.0, t))?;
            total += norm2(self.phi_plus.edge(j).derivative())?;
            total += norm2(self.psi.edge(j).derivative().restrict(t, f64::INFINITY))?;
        }
        Ok(2.0 * total)
    }
}

/// Vertex health of a state under coupling `alpha`: trace, absolute damped
/// flux residual, and the worst trace continuity defect of `u` and `v`.
pub fn vertex_report(state: &StatePair, alpha: Complex64) -> (Complex64, f64, f64) {
    let (u0, du) = vertex_trace(&state.u);
    let (v0, dv) = vertex_trace(&state.v);
    let flux: Complex64 = state.u.edges().iter().map(|e| e.eval_deriv(0.0)).sum();
    (u0, (flux + alpha * v0).norm(), du.max(dv))
}

/// Unique-branch evolution for `alpha != N`.
#[derive(Debug, Clone)]
pub struct EvolutionProblem {
    pub alpha: Complex64,
    pub f: GraphFunction,
    pub g: GraphFunction,
    pub phi: GraphFunction,
    pub psi: GraphFunction,
    pub matrices: ReflectionMatrices,
    pub solution: WaveSolution,
}

impl EvolutionProblem {
    /// Checks `(f, g)` against the operator domain, splits it into
    /// invariants, and solves the vertex reflection
    /// `r_j(s) = -(m_minus^{-1} m_plus psi(s))_j`.
    pub fn new(
        alpha: Complex64,
        f: GraphFunction,
        g: GraphFunction,
        tol_domain: f64,
    ) -> Result<Self> {
        let graph = f.graph();
        let n = graph.n_edges();
        if alpha == Complex64::new(n as f64, 0.0) {
            return Err(Error::CriticalCoupling { alpha, n_edges: n });
        }
        check_domain(&f, &g, alpha, tol_domain)?;
        let (phi, psi) = dalembert_split(&f, &g)?;
        let matrices = reflection_matrices(alpha, n);
        let lu = matrices.m_minus.clone().lu();
        let refl = lu
            .solve(&matrices.m_plus)
            .ok_or(Error::SingularVertexSystem { denominator: matrices.det_minus })?;
        let mut r_edges = Vec::with_capacity(n);
        for j in 0..n {
            let mut r_j = EdgeFunction::zero();
            for l in 0..n {
                r_j = r_j.add(&psi.edge(l).scale(-refl[(j, l)]));
            }
            r_edges.push(r_j);
        }
        let (u00, _) = vertex_trace(&f);
        let solution = WaveSolution {
            graph,
            u00,
            phi_plus: phi.clone(),
            reflected: GraphFunction::from_edges(graph, r_edges)?,
            psi: psi.clone(),
            horizon: f64::INFINITY,
        };
        Ok(EvolutionProblem { alpha, f, g, phi, psi, matrices, solution })
    }
}

fn check_domain(
    f: &GraphFunction,
    g: &GraphFunction,
    alpha: Complex64,
    tol_domain: f64,
) -> Result<()> {
    let (_, df) = vertex_trace(f);
    if df > tol_domain {
        return Err(Error::Domain {
            condition: DomainCondition::ContinuityU,
            defect: df,
            tol: tol_domain,
        });
    }
    let state = StatePair::new(f.clone(), g.clone())?;
    let robin = robin_residual(&state, alpha, tol_domain)?;
    let (v0, _) = vertex_trace(g);
    let flux: Complex64 = f.edges().iter().map(|e| e.eval_deriv(0.0)).sum();
    let scale = 1.0 + flux.norm() + (alpha * v0).norm();
    if robin.norm() > tol_domain * scale {
        return Err(Error::Domain {
            condition: DomainCondition::Robin,
            defect: robin.norm(),
            tol: tol_domain * scale,
        });
    }
    Ok(())
}

pub fn solution_at(p: &EvolutionProblem, t: f64) -> Result<StatePair> {
    p.solution.state_at(t)
}

pub fn energy(p: &EvolutionProblem, t: f64) -> Result<f64> {
    p.solution.energy_at(t)
}

/// Largest `t` such that `sum_j (f_j' + g_j)` vanishes identically on
/// `[0, t]`; `+inf` when it never turns on. A piecewise exponential
/// polynomial vanishes on an interval iff every grouped coefficient does,
/// so the scan is exact up to coefficient rounding.
pub fn t0_of(f: &GraphFunction, g: &GraphFunction) -> Result<f64> {
    let n = f.graph().n_edges();
    let mut sum = EdgeFunction::zero();
    for j in 0..n {
        sum = sum.add(&f.edge(j).derivative()).add(g.edge(j));
    }
    let scale = sum
        .terms()
        .iter()
        .map(|t| t.coeff.norm())
        .fold(0.0f64, f64::max)
        .max(1e-300);
    let mut pts: Vec<f64> = vec![0.0];
    for t in sum.terms() {
        pts.push(t.start);
        if t.stop.is_finite() {
            pts.push(t.stop);
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts.push(f64::INFINITY);
    for w in pts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if !(hi > lo) {
            continue;
        }
        // Group the terms alive on [lo, hi) by (power, rate) and test the
        // summed coefficients; distinct (power, rate) pieces are linearly
        // independent so the group sums decide vanishing exactly.
        let mut groups: Vec<(u32, Complex64, Complex64)> = Vec::new();
        for t in sum.terms() {
            if t.start <= lo && t.stop >= hi && t.coeff != ZERO {
                match groups.iter_mut().find(|(p, r, _)| {
                    *p == t.power && (*r - t.rate).norm() <= 1e-12 * (1.0 + t.rate.norm())
                }) {
                    Some(slot) => slot.2 += t.coeff,
                    None => groups.push((t.power, t.rate, t.coeff)),
                }
            }
        }
        if groups.iter().any(|(_, _, c)| c.norm() > 1e-12 * scale) {
            return Ok(lo);
        }
    }
    Ok(f64::INFINITY)
}

/// One member of the critical-coupling solution family.
#[derive(Debug, Clone)]
pub struct CriticalSolution {
    pub f: GraphFunction,
    pub g: GraphFunction,
    pub theta: EdgeFunction,
    pub theta_prime: EdgeFunction,
    pub tau: f64,
    pub solution: WaveSolution,
}

impl CriticalSolution {
    pub fn state_at(&self, t: f64) -> Result<StatePair> {
        self.solution.state_at(t)
    }

    pub fn energy_at(&self, t: f64) -> Result<f64> {
        self.solution.energy_at(t)
    }

    /// `int_0^t |theta'|^2`, the free-parameter part of the energy.
    pub fn theta_energy(&self, t: f64) -> Result<f64> {
        let g1 = StarGraph::new(1)?;
        let w = GraphFunction::radial(g1, self.theta_prime.restrict(0.0, t));
        Ok(l2_inner(&w, &w)?.re.max(0.0))
    }
}

/// Build a solution of the critical Cauchy problem parameterized by the
/// free boundary function `theta` on `[0, tau)`.
///
/// The reflected invariants are `phi_j(-s) = -theta(s) - psi_j(s) +
/// psi_1(s)`; continuity and the damped flux condition then hold for every
/// `theta` as long as `sum_j psi_j'` vanishes, i.e. up to `t0`. Matching
/// the initial data pins only `theta(0) = 0` and `theta'(0) = phi_1'(0+)`,
/// leaving genuinely distinct solutions beyond first order.
pub fn critical_family(
    alpha: Complex64,
    f: GraphFunction,
    g: GraphFunction,
    theta: &EdgeFunction,
    tau: f64,
    tol_domain: f64,
) -> Result<CriticalSolution> {
    let graph = f.graph();
    let n = graph.n_edges();
    if alpha != Complex64::new(n as f64, 0.0) {
        return Err(Error::NotCritical { alpha, n_edges: n });
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidInput(format!("empty critical window tau = {tau}")));
    }
    check_domain(&f, &g, alpha, tol_domain)?;
    let t0 = t0_of(&f, &g)?;
    if tau > t0 {
        return Err(Error::QuietWindow { tau, t0 });
    }
    let theta0 = theta.eval(0.0);
    if theta0.norm() > tol_domain {
        return Err(Error::BranchMismatch {
            detail: format!("theta(0) = {theta0} must vanish"),
        });
    }
    let (phi, psi) = dalembert_split(&f, &g)?;
    let phi1p0 = phi.edge(0).eval_deriv(0.0);
    let slope_defect = (theta.eval_deriv(0.0) - phi1p0).norm();
    if slope_defect > tol_domain * (1.0 + phi1p0.norm()) {
        return Err(Error::BranchMismatch {
            detail: format!(
                "theta'(0) must match the outgoing slope {phi1p0}; defect {slope_defect:.3e}"
            ),
        });
    }
    let mut r_edges = Vec::with_capacity(n);
    for j in 0..n {
        r_edges.push(psi.edge(0).sub(psi.edge(j)).sub(theta));
    }
    let (u00, _) = vertex_trace(&f);
    let solution = WaveSolution {
        graph,
        u00,
        phi_plus: phi,
        reflected: GraphFunction::from_edges(graph, r_edges)?,
        psi,
        horizon: tau,
    };
    Ok(CriticalSolution {
        f,
        g,
        theta: theta.clone(),
        theta_prime: theta.derivative(),
        tau,
        solution,
    })
}

/// Escalating free function for the blowup family: `theta'` is continuous
/// piecewise linear, starting at `slope0` and doubling in squared size on
/// dyadic windows approaching `tau`, so `int_0^t |theta'|^2` grows without
/// bound as `t` approaches `tau`.
pub fn escalating_theta(
    tau: f64,
    slope0: Complex64,
    levels: usize,
) -> Result<(EdgeFunction, EdgeFunction)> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidInput(format!("escalating theta needs finite tau > 0, got {tau}")));
    }
    let t_k = |k: usize| tau * (1.0 - 0.5f64.powi(k as i32));
    let w_k = |k: usize| {
        if k == 0 {
            slope0
        } else {
            Complex64::new(2.0f64.powf(k as f64 / 2.0) / tau.sqrt(), 0.0)
        }
    };
    let mut theta_prime = EdgeFunction::zero();
    for k in 0..levels {
        let (a, b) = (t_k(k), t_k(k + 1));
        let (wa, wb) = (w_k(k), w_k(k + 1));
        let ramp = EdgeFunction::poly(&[wa, (wb - wa) / (b - a)], 0.0, b - a)?.translate(a);
        theta_prime = theta_prime.add(&ramp);
    }
    let tail = EdgeFunction::constant(w_k(levels), t_k(levels), tau)?;
    theta_prime = theta_prime.add(&tail);
    let theta = theta_prime.antiderivative()?;
    Ok((theta, theta_prime))
}

pub const EVOLVE_CSV_HEADER: &str = "t,energy,re_u0,im_u0,robin_abs,continuity_defect";

pub fn evolve_csv_row(
    t: f64,
    energy: f64,
    u0: Complex64,
    robin_abs: f64,
    continuity_defect: f64,
) -> String {
    format!(
        "{},{},{},{},{},{}",
        sig17(t),
        sig17(energy),
        sig17(u0.re),
        sig17(u0.im),
        sig17(robin_abs),
        sig17(continuity_defect)
    )
}
