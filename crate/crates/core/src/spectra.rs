//! Spectral certificates for the damped wave generator.
//!
//! Away from the critical coupling `alpha = N` the spectrum fills the closed
//! left half-plane; at `alpha = N` it sweeps the whole plane, every `z` with
//! `Re z > 0` carrying an eigenvector with an infinite Jordan chain above
//! it. This module builds the explicit witnesses: the chains, quasimodes
//! concentrated far out on one edge (imaginary-axis family) or riding the
//! vertex (the `eta` family), the lower-bound constant `c0`, and a grid
//! scanner that certifies pointwise lower bounds for the resolvent norm.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graphfun::{
    energy_norm, robin_residual, EdgeFunction, ExpPolyTerm,
    GraphFunction, StarGraph, StatePair,
};
use crate::numfmt::sig17;
use crate::resolvent::apply_generator;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Jordan chain over the eigenvalue `z` at the critical coupling:
/// `u_n = (-1)^{n-1} x^{n-1} e^{-zx} / (n-1)!` on every edge and
/// `v_n = z u_n + u_{n-1}`, so the generator acts as a shift:
/// `W_N U_n = z U_n + U_{n-1}`.
pub fn eig_chain(n_edges: usize, z: Complex64, m: usize) -> Result<Vec<StatePair>> {
    if z.re <= 0.0 {
        return Err(Error::RightHalfPlane { z });
    }
    if m == 0 {
        return Err(Error::InvalidInput("chain length must be at least 1".into()));
    }
    let graph = StarGraph::new(n_edges)?;
    let mut chain = Vec::with_capacity(m);
    let mut prev_u = GraphFunction::zero(graph);
    let mut sign = 1.0;
    let mut fact = 1.0;
    for n in 1..=m {
        let coeff = Complex64::new(sign / fact, 0.0);
        let u = GraphFunction::radial(graph, EdgeFunction::exp_tail(coeff, n as u32 - 1, -z)?);
        let v = u.scale(z).add(&prev_u);
        chain.push(StatePair::new(u.clone(), v)?);
        prev_u = u;
        sign = -sign;
        fact *= n as f64;
    }
    Ok(chain)
}

/// Residual norms `||W_N U_n - z U_n - U_{n-1}|| / ||U_n||` of a chain.
pub fn chain_residuals(
    chain: &[StatePair],
    n_edges: usize,
    z: Complex64,
    tol_domain: f64,
) -> Result<Vec<f64>> {
    let alpha = Complex64::new(n_edges as f64, 0.0);
    let graph = StarGraph::new(n_edges)?;
    let mut out = Vec::with_capacity(chain.len());
    let zero = StatePair::zero(graph);
    for (n, state) in chain.iter().enumerate() {
        let img = apply_generator(state, alpha, tol_domain)?;
        let prev = if n == 0 { &zero } else { &chain[n - 1] };
        let residual = img.sub(&state.scale(z)).sub(prev);
        out.push(energy_norm(&residual)? / energy_norm(state)?);
    }
    Ok(out)
}

/// Fixed bump of the imaginary-axis quasimodes: `phi(y) = sqrt(630)
/// (y-1)^2 (2-y)^2` on `[1, 2]`, which has unit L2 norm.
fn bump_coeffs() -> [f64; 5] {
    let s = 630.0f64.sqrt();
    // ((y-1)(2-y))^2 = 4 - 12 y + 13 y^2 - 6 y^3 + y^4.
    [4.0 * s, -12.0 * s, 13.0 * s, -6.0 * s, s]
}

#[derive(Debug, Clone)]
pub struct AxisQuasimode {
    pub state: StatePair,
    pub residual_ratio: f64,
    pub norm_state: f64,
    /// At `theta = 0` the state norm itself is `O(1/n)`, so the ratio no
    /// longer certifies an axis point; values are still returned.
    pub degenerate: bool,
}

/// Quasimode at `z = i theta`: `u = e^{i theta x} phi(x/n) / sqrt(n)` on the
/// first edge, zero elsewhere, `v = i theta u`. Supported on `[n, 2n]`, so
/// every vertex trace vanishes and the state lies in the operator domain
/// for every coupling. The residual ratio decays like `1/n` for
/// `theta != 0`.
pub fn quasimode_axis(theta: f64, n: u32, n_edges: usize) -> Result<AxisQuasimode> {
    if n == 0 {
        return Err(Error::InvalidInput("quasimode scale must be positive".into()));
    }
    let graph = StarGraph::new(n_edges)?;
    let nf = n as f64;
    let rate = Complex64::new(0.0, theta);
    let mut terms = Vec::new();
    for (m, a) in bump_coeffs().iter().enumerate() {
        let coeff = Complex64::new(a / (nf.sqrt() * nf.powi(m as i32)), 0.0);
        terms.push(ExpPolyTerm::new(coeff, m as u32, rate, nf, 2.0 * nf)?);
    }
    let profile = EdgeFunction::from_terms(terms);
    let u = GraphFunction::single_edge(graph, 0, profile)?;
    let v = u.scale(rate);
    let state = StatePair::new(u, v)?;

    // (W - i theta) U = (0, u'' + theta^2 u): v = i theta u cancels exactly.
    let second = state.u.derivative().derivative();
    let residual = second.add(&state.u.scale(Complex64::new(theta * theta, 0.0)));
    let res_norm = crate::graphfun::l2_norm(&residual)?;
    let norm_state = energy_norm(&state)?;
    Ok(AxisQuasimode {
        state,
        residual_ratio: res_norm / norm_state,
        norm_state,
        degenerate: theta == 0.0,
    })
}

#[derive(Debug, Clone)]
pub struct EtaQuasimode {
    pub state: StatePair,
    pub residual_ratio: f64,
    pub norm_state: f64,
}

/// Vertex-riding quasimode `u_j = eta = e^{-alpha z x / N}` on every edge,
/// `v = z u`. The damped flux condition holds exactly for every `(alpha,
/// z)`; integrability requires `Re(alpha z) > 0`. The residual ratio is
/// `|z| |alpha - N| |alpha + N| / (N sqrt(|alpha|^2 + N^2))`, which is what
/// drives the resolvent blowup as `alpha -> N`.
pub fn quasimode_eta(alpha: Complex64, z: Complex64, n_edges: usize) -> Result<EtaQuasimode> {
    if z == ZERO {
        return Err(Error::InvalidInput("eta quasimode needs z != 0".into()));
    }
    let nf = n_edges as f64;
    let decay = -alpha * z / nf;
    if decay.re >= 0.0 {
        return Err(Error::NonDecayingTail { power: 0, rate: decay, start: 0.0 });
    }
    let graph = StarGraph::new(n_edges)?;
    let eta = EdgeFunction::exp_tail(ONE, 0, decay)?;
    let u = GraphFunction::radial(graph, eta);
    let v = u.scale(z);
    let state = StatePair::new(u, v)?;
    let ratio = z.norm() * (alpha - nf).norm() * (alpha + nf).norm()
        / (nf * (alpha.norm_sqr() + nf * nf).sqrt());
    let norm_state = energy_norm(&state)?;
    Ok(EtaQuasimode { state, residual_ratio: ratio, norm_state })
}

/// Grid for the `c0` search: `|alpha|` log-spaced, `arg alpha` strictly
/// inside `(-pi/2, pi/2)`.
#[derive(Debug, Clone, Copy)]
pub struct C0Grid {
    pub r_min: f64,
    pub r_max: f64,
    pub r_count: usize,
    pub arg_count: usize,
}

impl Default for C0Grid {
    fn default() -> Self {
        C0Grid { r_min: 1e-3, r_max: 1e3, r_count: 241, arg_count: 81 }
    }
}

/// `c0 = inf over alpha in the open right half-plane of
/// N sqrt(|alpha|^2 + N^2) / |alpha + N|`, evaluated on the grid. The
/// infimum is attained on the real axis at `alpha = N` with value
/// `N / sqrt(2)`.
pub fn c0_constant(n_edges: usize, grid: &C0Grid) -> f64 {
    let nf = n_edges as f64;
    let mut best = f64::INFINITY;
    let lr_min = grid.r_min.ln();
    let lr_max = grid.r_max.ln();
    for i in 0..grid.r_count {
        let t = if grid.r_count == 1 { 0.0 } else { i as f64 / (grid.r_count - 1) as f64 };
        let r = (lr_min + t * (lr_max - lr_min)).exp();
        for k in 0..grid.arg_count {
            // Open interval: sample strictly inside (-pi/2, pi/2).
            let s = (k as f64 + 0.5) / grid.arg_count as f64;
            let arg = std::f64::consts::PI * (s - 0.5) * 0.999;
            let alpha = Complex64::from_polar(r, arg);
            let value = nf * (alpha.norm_sqr() + nf * nf).sqrt() / (alpha + nf).norm();
            best = best.min(value);
        }
    }
    best
}

/// Add `c x e^{-x}` to the first edge of `u` so the damped flux condition
/// holds exactly; the correction vanishes at the vertex so traces are
/// untouched. Needs `v` continuous at the vertex.
pub fn project_domain(state: &StatePair, alpha: Complex64, tol_domain: f64) -> Result<StatePair> {
    let robin = robin_residual(state, alpha, tol_domain)?;
    let mut u = state.u.clone();
    if robin != ZERO {
        let bump = EdgeFunction::exp_tail(-robin, 1, Complex64::new(-1.0, 0.0))?;
        *u.edge_mut(0) = u.edge(0).add(&bump);
    }
    StatePair::new(u, state.v.clone())
}

/// Reproducible probe dictionary: exponentials of several decay rates,
/// transplanted chain shapes, and random C1 cubic splines supported on
/// `[0, 3]` with matching vertex traces. All entries have continuous `u`
/// and `v`; project onto a coupling's domain with [`project_domain`].
pub fn seed_dictionary(graph: StarGraph, count: usize, seed: u64) -> Vec<StatePair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);

    let rates = [0.5, 1.0, 2.0, 3.0];
    for (i, &r) in rates.iter().enumerate() {
        if out.len() >= count {
            break;
        }
        let u = GraphFunction::radial(
            graph,
            EdgeFunction::exp_tail(ONE, 0, Complex64::new(-r, 0.0)).unwrap(),
        );
        let v = GraphFunction::radial(
            graph,
            EdgeFunction::exp_tail(
                Complex64::new(0.3 + 0.2 * i as f64, -0.1),
                0,
                Complex64::new(-1.0 - 0.5 * i as f64, 0.0),
            )
            .unwrap(),
        );
        out.push(StatePair::new(u, v).unwrap());
    }
    for k in 1..=4u32 {
        if out.len() >= count {
            break;
        }
        let coeff = Complex64::new(if k % 2 == 0 { -1.0 } else { 1.0 }, 0.0);
        let u = GraphFunction::radial(
            graph,
            EdgeFunction::exp_tail(coeff, k, Complex64::new(-1.0, 0.0)).unwrap(),
        );
        let v = GraphFunction::radial(
            graph,
            EdgeFunction::exp_tail(ONE, k.saturating_sub(1), Complex64::new(-1.0, 0.0)).unwrap(),
        );
        out.push(StatePair::new(u, v).unwrap());
    }
    while out.len() < count {
        let u = random_spline_graph(graph, &mut rng);
        let v = random_spline_graph(graph, &mut rng);
        out.push(StatePair::new(u, v).unwrap());
    }
    out.truncate(count);
    out
}

/// Random C1 cubic spline on knots {0,1,2,3}, zero beyond 3, with the same
/// vertex value on every edge.
fn random_spline_graph(graph: StarGraph, rng: &mut ChaCha8Rng) -> GraphFunction {
    let shared = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let edges: Vec<EdgeFunction> = (0..graph.n_edges())
        .map(|_| {
            // Hermite data: values and slopes at the four knots; the last
            // value and slope vanish so the spline ends C1 at x = 3.
            let mut vals = [ZERO; 4];
            let mut slopes = [ZERO; 4];
            vals[0] = shared;
            for i in 1..3 {
                vals[i] =
                    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            }
            for i in 0..3 {
                slopes[i] =
                    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            }
            let mut f = EdgeFunction::zero();
            for k in 0..3 {
                f = f.add(&hermite_piece(vals[k], slopes[k], vals[k + 1], slopes[k + 1], k as f64));
            }
            f
        })
        .collect();
    GraphFunction::from_edges(graph, edges).unwrap()
}

/// Cubic Hermite piece on `[k, k+1)` with endpoint values and slopes.
fn hermite_piece(
    p0: Complex64,
    m0: Complex64,
    p1: Complex64,
    m1: Complex64,
    k: f64,
) -> EdgeFunction {
    let c0 = p0;
    let c1 = m0;
    let c2 = -3.0 * p0 - 2.0 * m0 + 3.0 * p1 - m1;
    let c3 = 2.0 * p0 + m0 - 2.0 * p1 + m1;
    EdgeFunction::poly(&[c0, c1, c2, c3], 0.0, 1.0).unwrap().translate(k)
}

/// Certified lower bound for the resolvent norm at `z`: the best ratio
/// `||U|| / ||(W_alpha - z) U||` over the supplied domain states, improved
/// by the `eta` quasimode whenever it is integrable.
pub fn resolvent_norm_lower(
    alpha: Complex64,
    z: Complex64,
    dictionary: &[StatePair],
    tol_domain: f64,
) -> Result<f64> {
    if z.re <= 0.0 {
        return Err(Error::RightHalfPlane { z });
    }
    let n = dictionary
        .first()
        .map(|s| s.graph().n_edges())
        .ok_or(Error::EmptyDictionary)?;
    if alpha == Complex64::new(n as f64, 0.0) {
        return Err(Error::CriticalCoupling { alpha, n_edges: n });
    }
    let mut best: f64 = 0.0;
    for state in dictionary {
        let img = apply_generator(state, alpha, tol_domain)?;
        let shifted = img.sub(&state.scale(z));
        let denom = energy_norm(&shifted)?;
        let numer = energy_norm(state)?;
        if denom > 0.0 {
            best = best.max(numer / denom);
        }
    }
    if let Ok(eta) = quasimode_eta(alpha, z, n) {
        if eta.residual_ratio > 0.0 {
            best = best.max(1.0 / eta.residual_ratio);
        }
    }
    Ok(best)
}

/// Rectangular scan grid in the open right half-plane, row-major by
/// `(Im z, Re z)`.
#[derive(Debug, Clone, Copy)]
pub struct ZGrid {
    pub re_min: f64,
    pub re_max: f64,
    pub re_count: usize,
    pub im_min: f64,
    pub im_max: f64,
    pub im_count: usize,
}

impl ZGrid {
    pub fn nodes(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.re_count * self.im_count);
        for i in 0..self.im_count {
            let ti = if self.im_count == 1 { 0.0 } else { i as f64 / (self.im_count - 1) as f64 };
            let im = self.im_min + ti * (self.im_max - self.im_min);
            for r in 0..self.re_count {
                let tr =
                    if self.re_count == 1 { 0.0 } else { r as f64 / (self.re_count - 1) as f64 };
                let re = self.re_min + tr * (self.re_max - self.re_min);
                out.push(Complex64::new(re, im));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PseudospectrumRecord {
    pub z: Complex64,
    pub alpha: Complex64,
    pub norm_lower_estimate: f64,
    /// `c0 / (|z| |alpha - N|)`, the vertex-family certified bound.
    pub eta_bound: f64,
    /// `1 / |Re z|`, the imaginary-axis certified bound.
    pub axis_bound: f64,
}

pub const PSEUDOSPEC_CSV_HEADER: &str =
    "re_z,im_z,re_alpha,im_alpha,norm_lower,eta_bound,axis_bound";

impl PseudospectrumRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            sig17(self.z.re),
            sig17(self.z.im),
            sig17(self.alpha.re),
            sig17(self.alpha.im),
            sig17(self.norm_lower_estimate),
            sig17(self.eta_bound),
            sig17(self.axis_bound)
        )
    }
}

/// Scan the grid, certifying a resolvent-norm lower bound at every node
/// from the dictionary, the `eta` family, and near-axis quasimodes tuned to
/// each node's `Im z`. Nodes are independent and run in parallel; the
/// record order is the row-major grid order regardless of scheduling.
pub fn pseudospectrum_scan(
    alpha: Complex64,
    grid: &ZGrid,
    n_edges: usize,
    seed: u64,
) -> Result<Vec<PseudospectrumRecord>> {
    let nf = n_edges as f64;
    if alpha == Complex64::new(nf, 0.0) {
        return Err(Error::CriticalCoupling { alpha, n_edges });
    }
    let nodes = grid.nodes();
    if let Some(bad) = nodes.iter().find(|z| z.re <= 0.0) {
        return Err(Error::RightHalfPlane { z: *bad });
    }
    let graph = StarGraph::new(n_edges)?;
    let tol = crate::graphfun::Tolerances::default();
    let raw = seed_dictionary(graph, 20, seed);
    let projected: Result<Vec<StatePair>> =
        raw.iter().map(|s| project_domain(s, alpha, tol.domain)).collect();
    let projected = projected?;
    let c0 = nf / 2.0f64.sqrt();

    let records: Result<Vec<PseudospectrumRecord>> = nodes
        .par_iter()
        .map(|&z| {
            let mut dict = projected.clone();
            for &n in &[64u32, 512, 2048] {
                // Valid probe states at every theta; at theta = 0 they still
                // certify 1/|z| up to the O(1/n) second-derivative term.
                dict.push(quasimode_axis(z.im, n, n_edges)?.state);
            }
            let lower = resolvent_norm_lower(alpha, z, &dict, tol.domain)?;
            Ok(PseudospectrumRecord {
                z,
                alpha,
                norm_lower_estimate: lower,
                eta_bound: c0 / (z.norm() * (alpha - nf).norm()),
                axis_bound: 1.0 / z.re.abs(),
            })
        })
        .collect();
    records
}

/// Dimension of the decaying exponential eigenspace at `z`: within the span
/// of `c_j e^{-zx}` per edge (with `v = z u`), continuity forces all
/// coefficients equal and the damped flux condition then reads
/// `(alpha - N) z c = 0`. Rank is measured by singular values of the
/// stacked trace conditions.
pub fn decaying_eigenspace_dim(alpha: Complex64, z: Complex64, n_edges: usize) -> usize {
    use nalgebra::DMatrix;
    let n = n_edges;
    let mut rows: Vec<Vec<Complex64>> = Vec::new();
    for j in 0..n.saturating_sub(1) {
        let mut row = vec![ZERO; n];
        row[j] = ONE;
        row[j + 1] = -ONE;
        rows.push(row);
    }
    let mut robin = vec![-z; n];
    robin[0] += alpha * z;
    rows.push(robin);
    let mat = DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
    let svd = mat.svd(false, false);
    let smax = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let rank = svd
        .singular_values
        .iter()
        .filter(|s| **s > 1e-12 * smax.max(1.0))
        .count();
    n - rank
}
