//! Star graph geometry and the closed algebra of exponential-polynomial
//! edge functions, with exact integrals, traces and energy norms.
//!
//! Every function on an edge is a finite sum of terms
//! `coeff * x^power * exp(rate * x)` on half-open supports `[start, stop)`.
//! The algebra is closed under differentiation, antidifferentiation on
//! bounded supports, pointwise products, translation and reflection, so all
//! inner products used by the operator theory are evaluated in closed form.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{DomainCondition, Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Star of `n_edges` half-lines `[0, inf)` glued at a common vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StarGraph {
    n_edges: usize,
}

impl StarGraph {
    pub fn new(n_edges: usize) -> Result<Self> {
        if n_edges == 0 {
            return Err(Error::InvalidInput("a star graph needs at least one edge".into()));
        }
        Ok(StarGraph { n_edges })
    }

    pub fn n_edges(self) -> usize {
        self.n_edges
    }
}

/// One closed-form piece `coeff * x^power * exp(rate*x)` on `[start, stop)`.
///
/// Unbounded supports are restricted to decaying rates (`Re rate < 0`) and to
/// pure constants (`power == 0`, `rate == 0`); the latter carry the additive
/// constants that position profiles and antiderivatives of integrable data
/// pick up at infinity. Anything else on `[start, inf)` is rejected at
/// construction so that divergent data cannot be represented silently.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpPolyTerm {
    pub coeff: Complex64,
    pub power: u32,
    pub rate: Complex64,
    pub start: f64,
    pub stop: f64,
}

impl ExpPolyTerm {
    pub fn new(
        coeff: Complex64,
        power: u32,
        rate: Complex64,
        start: f64,
        stop: f64,
    ) -> Result<Self> {
        if !start.is_finite() || start < 0.0 || !(stop > start) {
            return Err(Error::BadSupport { start, stop });
        }
        if stop.is_infinite() && coeff != ZERO {
            let decays = rate.re < 0.0;
            let constant = rate == ZERO && power == 0;
            if !decays && !constant {
                return Err(Error::NonDecayingTail { power, rate, start });
            }
        }
        Ok(ExpPolyTerm { coeff, power, rate, start, stop })
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        if x < self.start || x >= self.stop {
            return ZERO;
        }
        self.coeff * x.powi(self.power as i32) * (self.rate * x).exp()
    }

    fn conj(&self) -> ExpPolyTerm {
        ExpPolyTerm { coeff: self.coeff.conj(), rate: self.rate.conj(), ..*self }
    }

    /// Classical derivative inside the support; breakpoint jumps are the
    /// caller's responsibility (profiles built here are matched across
    /// breakpoints whenever a derivative is taken).
    fn derivative(&self) -> Vec<ExpPolyTerm> {
        let mut out = Vec::with_capacity(2);
        if self.power > 0 {
            out.push(ExpPolyTerm {
                coeff: self.coeff * self.power as f64,
                power: self.power - 1,
                ..*self
            });
        }
        if self.rate != ZERO {
            out.push(ExpPolyTerm { coeff: self.coeff * self.rate, ..*self });
        }
        out
    }

    /// `x -> x - dt` (support moves right for `dt > 0`), clipped to `[0, inf)`.
    fn translate(&self, dt: f64) -> Vec<ExpPolyTerm> {
        if dt == 0.0 {
            return vec![*self];
        }
        let start = (self.start + dt).max(0.0);
        let stop = if self.stop.is_infinite() { f64::INFINITY } else { self.stop + dt };
        if !(stop > start) {
            return Vec::new();
        }
        // c (x-dt)^k e^{l(x-dt)} expanded in monomials of x.
        let scale = self.coeff * (-self.rate * dt).exp();
        let k = self.power;
        (0..=k)
            .filter_map(|i| {
                let c = scale * binom(k, i) * (-dt).powi((k - i) as i32);
                if c == ZERO && i < k {
                    None
                } else {
                    Some(ExpPolyTerm { coeff: c, power: i, rate: self.rate, start, stop })
                }
            })
            .collect()
    }

    /// `x -> c - x`, clipped to `[0, inf)`. Endpoint openness flips are
    /// absorbed into the half-open convention; they only move sets of
    /// measure zero.
    fn reflect(&self, c: f64) -> Vec<ExpPolyTerm> {
        let start = if self.stop.is_infinite() { 0.0 } else { (c - self.stop).max(0.0) };
        let stop = c - self.start;
        if !(stop > start) {
            return Vec::new();
        }
        let scale = self.coeff * (self.rate * c).exp();
        let k = self.power;
        (0..=k)
            .map(|i| {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                let coeff = scale * binom(k, i) * sign * c.powi((k - i) as i32);
                ExpPolyTerm { coeff, power: i, rate: -self.rate, start, stop }
            })
            .collect()
    }

    fn mul(&self, other: &ExpPolyTerm) -> Option<ExpPolyTerm> {
        let start = self.start.max(other.start);
        let stop = self.stop.min(other.stop);
        if !(stop > start) {
            return None;
        }
        Some(ExpPolyTerm {
            coeff: self.coeff * other.coeff,
            power: self.power + other.power,
            rate: self.rate + other.rate,
            start,
            stop,
        })
    }

    fn integral(&self) -> Result<Complex64> {
        Ok(self.coeff * integrate_term(self.power, self.rate, self.start, self.stop)?)
    }
}

fn binom(k: u32, i: u32) -> f64 {
    let mut b = 1.0;
    for j in 0..i.min(k - i) {
        b = b * (k - j) as f64 / (j + 1) as f64;
    }
    b
}

fn factorial(k: u32) -> f64 {
    (1..=k).fold(1.0, |acc, j| acc * j as f64)
}

/// Exact `int_start^stop x^power exp(rate x) dx`.
///
/// Unbounded integrals require `Re rate < 0`. Bounded integrals shift to the
/// local variable `t = x - start` and use a power series for `|rate|*(stop -
/// start) <= 1/2` (no cancellation) or the integration-by-parts recursion
/// otherwise, so the result is accurate across scales.
pub fn integrate_term(power: u32, rate: Complex64, start: f64, stop: f64) -> Result<Complex64> {
    if !(stop > start) {
        return Ok(ZERO);
    }
    let k = power;
    if stop.is_infinite() {
        if rate.re >= 0.0 {
            return Err(Error::DivergentIntegral { power, rate, start });
        }
        // e^{l a} sum_i C(k,i) a^{k-i} * i! / (-l)^{i+1}
        let mut sum = ZERO;
        for i in 0..=k {
            let a_pow = if k == i { 1.0 } else { start.powi((k - i) as i32) };
            if a_pow == 0.0 {
                continue;
            }
            sum += binom(k, i) * a_pow * factorial(i) / (-rate).powu(i + 1);
        }
        return Ok((rate * start).exp() * sum);
    }
    let d = stop - start;
    if rate == ZERO {
        // sum_i C(k,i) a^{k-i} d^{i+1}/(i+1): all terms share the sign of a.
        let mut sum = 0.0;
        for i in 0..=k {
            let a_pow = if k == i { 1.0 } else { start.powi((k - i) as i32) };
            sum += binom(k, i) * a_pow * d.powi(i as i32 + 1) / (i + 1) as f64;
        }
        return Ok(Complex64::new(sum, 0.0));
    }
    let j = moment_integrals(k, rate, d);
    let mut sum = ZERO;
    for i in 0..=k {
        let a_pow = if k == i { 1.0 } else { start.powi((k - i) as i32) };
        if a_pow == 0.0 {
            continue;
        }
        sum += binom(k, i) * a_pow * j[i as usize];
    }
    Ok((rate * start).exp() * sum)
}

/// `J_i = int_0^d t^i e^{l t} dt` for `i = 0..=k`.
///
/// The upward recursion `J_i = (d^i e - i J_{i-1}) / l` amplifies errors by
/// `i / |l d|` per step, so it is used only once `|l d|` dominates the top
/// power. Below that the power series is used instead; it converges for
/// every argument and its cancellation loss `e^{|l d|} eps` is harmless in
/// exactly the regime where the recursion is not.
fn moment_integrals(k: u32, rate: Complex64, d: f64) -> Vec<Complex64> {
    let mut j = vec![ZERO; (k + 1) as usize];
    let rho = (rate * d).norm();
    if rho >= 2.0 * (k as f64).max(1.0) {
        let e = (rate * d).exp();
        j[0] = (e - 1.0) / rate;
        for i in 1..=k {
            j[i as usize] = (d.powi(i as i32) * e - i as f64 * j[(i - 1) as usize]) / rate;
        }
    } else {
        for i in 0..=k {
            let mut term = Complex64::new(d.powi(i as i32 + 1), 0.0);
            let mut sum = ZERO;
            for m in 0..400u32 {
                let contrib = term / (i + m + 1) as f64;
                sum += contrib;
                // Terms grow until m ~ |l d|; only stop once past the hump.
                if m as f64 > rho && contrib.norm() <= 1e-18 * sum.norm() {
                    break;
                }
                term = term * rate * d / (m + 1) as f64;
            }
            j[i as usize] = sum;
        }
    }
    j
}

/// Finite sum of [`ExpPolyTerm`] pieces; overlapping supports add.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EdgeFunction {
    terms: Vec<ExpPolyTerm>,
}

impl EdgeFunction {
    pub fn zero() -> Self {
        EdgeFunction { terms: Vec::new() }
    }

    pub fn from_terms(terms: Vec<ExpPolyTerm>) -> Self {
        let mut f = EdgeFunction { terms };
        f.normalize();
        f
    }

    pub fn term(t: ExpPolyTerm) -> Self {
        EdgeFunction { terms: vec![t] }
    }

    /// Polynomial `sum coeffs[i] x^i` on `[start, stop)`.
    pub fn poly(coeffs: &[Complex64], start: f64, stop: f64) -> Result<Self> {
        let mut terms = Vec::new();
        for (i, &c) in coeffs.iter().enumerate() {
            if c != ZERO {
                terms.push(ExpPolyTerm::new(c, i as u32, ZERO, start, stop)?);
            }
        }
        Ok(EdgeFunction::from_terms(terms))
    }

    pub fn constant(c: Complex64, start: f64, stop: f64) -> Result<Self> {
        Ok(EdgeFunction::term(ExpPolyTerm::new(c, 0, ZERO, start, stop)?))
    }

    /// `c x^k e^{rate x}` on the whole half-line.
    pub fn exp_tail(c: Complex64, power: u32, rate: Complex64) -> Result<Self> {
        Ok(EdgeFunction::term(ExpPolyTerm::new(c, power, rate, 0.0, f64::INFINITY)?))
    }

    pub fn terms(&self) -> &[ExpPolyTerm] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.coeff == ZERO)
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        self.terms.iter().map(|t| t.eval(x)).sum()
    }

    pub fn eval_deriv(&self, x: f64) -> Complex64 {
        self.terms
            .iter()
            .filter(|t| x >= t.start && x < t.stop)
            .flat_map(|t| t.derivative())
            .map(|t| t.coeff * x.powi(t.power as i32) * (t.rate * x).exp())
            .sum()
    }

    pub fn add(&self, other: &EdgeFunction) -> EdgeFunction {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        EdgeFunction::from_terms(terms)
    }

    pub fn sub(&self, other: &EdgeFunction) -> EdgeFunction {
        self.add(&other.scale(-ONE))
    }

    pub fn scale(&self, c: Complex64) -> EdgeFunction {
        EdgeFunction {
            terms: self.terms.iter().map(|t| ExpPolyTerm { coeff: t.coeff * c, ..*t }).collect(),
        }
    }

    pub fn conj(&self) -> EdgeFunction {
        EdgeFunction { terms: self.terms.iter().map(|t| t.conj()).collect() }
    }

    pub fn derivative(&self) -> EdgeFunction {
        EdgeFunction::from_terms(self.terms.iter().flat_map(|t| t.derivative()).collect())
    }

    pub fn translate(&self, dt: f64) -> EdgeFunction {
        EdgeFunction::from_terms(self.terms.iter().flat_map(|t| t.translate(dt)).collect())
    }

    pub fn reflect(&self, c: f64) -> EdgeFunction {
        EdgeFunction::from_terms(self.terms.iter().flat_map(|t| t.reflect(c)).collect())
    }

    pub fn mul(&self, other: &EdgeFunction) -> EdgeFunction {
        let mut terms = Vec::new();
        for a in &self.terms {
            for b in &other.terms {
                if let Some(t) = a.mul(b) {
                    terms.push(t);
                }
            }
        }
        EdgeFunction::from_terms(terms)
    }

    pub fn restrict(&self, lo: f64, hi: f64) -> EdgeFunction {
        let terms = self
            .terms
            .iter()
            .filter_map(|t| {
                let start = t.start.max(lo);
                let stop = t.stop.min(hi);
                if stop > start {
                    Some(ExpPolyTerm { start, stop, ..*t })
                } else {
                    None
                }
            })
            .collect();
        EdgeFunction { terms }
    }

    /// `F(x) = int_0^x f(s) ds`. Bounded pieces leave a constant tail behind
    /// them; decaying tails integrate to decaying pieces plus their limit
    /// constant. Constant tails in the input would integrate to linear
    /// growth and are rejected.
    pub fn antiderivative(&self) -> Result<EdgeFunction> {
        let mut out: Vec<ExpPolyTerm> = Vec::new();
        for t in &self.terms {
            if t.coeff == ZERO {
                continue;
            }
            let (a, b, k, l, c) = (t.start, t.stop, t.power, t.rate, t.coeff);
            if b.is_infinite() && l == ZERO {
                return Err(Error::DivergentIntegral { power: k, rate: l, start: a });
            }
            if l == ZERO {
                // c x^{k+1}/(k+1) - c a^{k+1}/(k+1) on [a, b)
                let lead = c / (k + 1) as f64;
                out.push(ExpPolyTerm { coeff: lead, power: k + 1, rate: ZERO, start: a, stop: b });
                let at_a = lead * a.powi(k as i32 + 1);
                if at_a != ZERO {
                    out.push(ExpPolyTerm { coeff: -at_a, power: 0, rate: ZERO, start: a, stop: b });
                }
            } else {
                // Antiderivative e^{lx} sum_j d_j x^j with d_k = 1/l,
                // d_{j-1} = -j d_j / l; evaluated consistently at x = a so
                // the running integral is exactly continuous there.
                let mut d = vec![ZERO; (k + 1) as usize];
                d[k as usize] = 1.0 / l;
                for jj in (1..=k).rev() {
                    d[(jj - 1) as usize] = -(jj as f64) * d[jj as usize] / l;
                }
                let mut at_a = ZERO;
                for (j, dj) in d.iter().enumerate() {
                    out.push(ExpPolyTerm { coeff: c * dj, power: j as u32, rate: l, start: a, stop: b });
                    at_a += dj * a.powi(j as i32);
                }
                at_a *= c * (l * a).exp();
                if at_a != ZERO {
                    out.push(ExpPolyTerm { coeff: -at_a, power: 0, rate: ZERO, start: a, stop: b });
                }
            }
            if b.is_finite() {
                let full = c * integrate_term(k, l, a, b)?;
                if full != ZERO {
                    out.push(ExpPolyTerm {
                        coeff: full,
                        power: 0,
                        rate: ZERO,
                        start: b,
                        stop: f64::INFINITY,
                    });
                }
            }
        }
        Ok(EdgeFunction::from_terms(out))
    }

    pub fn integral(&self) -> Result<Complex64> {
        let mut sum = ZERO;
        for t in &self.terms {
            sum += t.integral()?;
        }
        Ok(sum)
    }

    /// Merge terms that share (power, support, rate); drops exact zeros.
    fn normalize(&mut self) {
        self.terms.retain(|t| t.coeff != ZERO);
        self.terms.sort_by(|p, q| {
            p.power
                .cmp(&q.power)
                .then(p.start.total_cmp(&q.start))
                .then(p.stop.total_cmp(&q.stop))
                .then(p.rate.re.total_cmp(&q.rate.re))
                .then(p.rate.im.total_cmp(&q.rate.im))
        });
        let mut merged: Vec<ExpPolyTerm> = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            if let Some(last) = merged.last_mut() {
                let same_rate = (last.rate - t.rate).norm() <= 1e-12 * (1.0 + t.rate.norm());
                if last.power == t.power
                    && last.start == t.start
                    && last.stop == t.stop
                    && same_rate
                {
                    last.coeff += t.coeff;
                    continue;
                }
            }
            merged.push(*t);
        }
        merged.retain(|t| t.coeff != ZERO);
        self.terms = merged;
    }

    /// Support breakpoints, sorted and deduplicated.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = Vec::new();
        for t in &self.terms {
            pts.push(t.start);
            if t.stop.is_finite() {
                pts.push(t.stop);
            }
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * (1.0 + a.abs()));
        pts
    }

    fn l2_inner(&self, other: &EdgeFunction) -> Result<Complex64> {
        let mut sum = ZERO;
        if self.terms.len().saturating_mul(other.terms.len()) <= 4096 {
            for p in &self.terms {
                for q in &other.terms {
                    sum += pair_integral(p, q)?;
                }
            }
            return Ok(sum);
        }
        // Sweep by support start against the larger side to avoid the full
        // pairwise loop on mesh-sized term lists.
        let (small, big) = if self.terms.len() <= other.terms.len() {
            (&self.terms, &other.terms)
        } else {
            (&other.terms, &self.terms)
        };
        let swapped = self.terms.len() > other.terms.len();
        let mut sorted: Vec<&ExpPolyTerm> = big.iter().collect();
        sorted.sort_by(|p, q| p.start.total_cmp(&q.start));
        let max_len = sorted
            .iter()
            .filter(|t| t.stop.is_finite())
            .map(|t| t.stop - t.start)
            .fold(0.0f64, f64::max);
        let unbounded: Vec<&ExpPolyTerm> =
            sorted.iter().copied().filter(|t| t.stop.is_infinite()).collect();
        for p in small {
            for q in &unbounded {
                sum += if swapped { pair_integral(q, p)? } else { pair_integral(p, q)? };
            }
            let lo = p.start - max_len;
            let mut idx = sorted.partition_point(|t| t.start < lo);
            while idx < sorted.len() && sorted[idx].start < p.stop {
                let q = sorted[idx];
                if q.stop.is_finite() && q.stop > p.start {
                    sum += if swapped { pair_integral(q, p)? } else { pair_integral(p, q)? };
                }
                idx += 1;
            }
        }
        Ok(sum)
    }
}

/// `int f conj(g)` over the overlap of one term pair.
fn pair_integral(f: &ExpPolyTerm, g: &ExpPolyTerm) -> Result<Complex64> {
    let start = f.start.max(g.start);
    let stop = f.stop.min(g.stop);
    if !(stop > start) {
        return Ok(ZERO);
    }
    let coeff = f.coeff * g.coeff.conj();
    if coeff == ZERO {
        return Ok(ZERO);
    }
    Ok(coeff * integrate_term(f.power + g.power, f.rate + g.rate.conj(), start, stop)?)
}

/// Complex-valued function on the star graph, one [`EdgeFunction`] per edge.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphFunction {
    graph: StarGraph,
    edges: Vec<EdgeFunction>,
}

impl GraphFunction {
    pub fn zero(graph: StarGraph) -> Self {
        GraphFunction { graph, edges: vec![EdgeFunction::zero(); graph.n_edges()] }
    }

    /// Same profile on every edge.
    pub fn radial(graph: StarGraph, f: EdgeFunction) -> Self {
        GraphFunction { graph, edges: vec![f; graph.n_edges()] }
    }

    pub fn from_edges(graph: StarGraph, edges: Vec<EdgeFunction>) -> Result<Self> {
        if edges.len() != graph.n_edges() {
            return Err(Error::EdgeCount { expected: graph.n_edges(), got: edges.len() });
        }
        Ok(GraphFunction { graph, edges })
    }

    pub fn single_edge(graph: StarGraph, edge: usize, f: EdgeFunction) -> Result<Self> {
        if edge >= graph.n_edges() {
            return Err(Error::EdgeCount { expected: graph.n_edges(), got: edge + 1 });
        }
        let mut g = GraphFunction::zero(graph);
        g.edges[edge] = f;
        Ok(g)
    }

    pub fn graph(&self) -> StarGraph {
        self.graph
    }

    pub fn edges(&self) -> &[EdgeFunction] {
        &self.edges
    }

    pub fn edge(&self, j: usize) -> &EdgeFunction {
        &self.edges[j]
    }

    pub fn edge_mut(&mut self, j: usize) -> &mut EdgeFunction {
        &mut self.edges[j]
    }

    pub fn map_edges(&self, f: impl Fn(&EdgeFunction) -> EdgeFunction) -> GraphFunction {
        GraphFunction { graph: self.graph, edges: self.edges.iter().map(f).collect() }
    }

    pub fn add(&self, other: &GraphFunction) -> GraphFunction {
        assert_eq!(self.graph, other.graph, "graph mismatch in edge arithmetic");
        GraphFunction {
            graph: self.graph,
            edges: self.edges.iter().zip(&other.edges).map(|(a, b)| a.add(b)).collect(),
        }
    }

    pub fn sub(&self, other: &GraphFunction) -> GraphFunction {
        self.add(&other.scale(-ONE))
    }

    pub fn scale(&self, c: Complex64) -> GraphFunction {
        self.map_edges(|e| e.scale(c))
    }

    pub fn derivative(&self) -> GraphFunction {
        self.map_edges(|e| e.derivative())
    }

    pub fn conj(&self) -> GraphFunction {
        self.map_edges(|e| e.conj())
    }

    pub fn eval(&self, edge: usize, x: f64) -> Complex64 {
        self.edges[edge].eval(x)
    }

    pub fn vertex_values(&self) -> Vec<Complex64> {
        self.edges.iter().map(|e| e.eval(0.0)).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.edges.iter().all(|e| e.is_zero())
    }
}

/// Inner product `sum_j int f_j conj(g_j)`.
pub fn l2_inner(f: &GraphFunction, g: &GraphFunction) -> Result<Complex64> {
    if f.graph != g.graph {
        return Err(Error::EdgeCount { expected: f.graph.n_edges(), got: g.graph.n_edges() });
    }
    let mut sum = ZERO;
    for (a, b) in f.edges.iter().zip(&g.edges) {
        sum += a.l2_inner(b)?;
    }
    Ok(sum)
}

pub fn l2_norm(f: &GraphFunction) -> Result<f64> {
    Ok(l2_inner(f, f)?.re.max(0.0).sqrt())
}

/// Vertex trace: value on the first edge and the largest pairwise defect.
pub fn vertex_trace(f: &GraphFunction) -> (Complex64, f64) {
    let vals = f.vertex_values();
    let mut defect = 0.0f64;
    for i in 0..vals.len() {
        for j in (i + 1)..vals.len() {
            defect = defect.max((vals[i] - vals[j]).norm());
        }
    }
    (vals[0], defect)
}

/// State `(u, v)` in the energy space: `u` is a position profile taken
/// modulo additive constants, `v` a velocity profile in L2.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePair {
    pub u: GraphFunction,
    pub v: GraphFunction,
}

impl StatePair {
    pub fn new(u: GraphFunction, v: GraphFunction) -> Result<Self> {
        if u.graph != v.graph {
            return Err(Error::EdgeCount { expected: u.graph.n_edges(), got: v.graph.n_edges() });
        }
        Ok(StatePair { u, v })
    }

    pub fn graph(&self) -> StarGraph {
        self.u.graph
    }

    pub fn zero(graph: StarGraph) -> Self {
        StatePair { u: GraphFunction::zero(graph), v: GraphFunction::zero(graph) }
    }

    pub fn add(&self, other: &StatePair) -> StatePair {
        StatePair { u: self.u.add(&other.u), v: self.v.add(&other.v) }
    }

    pub fn sub(&self, other: &StatePair) -> StatePair {
        StatePair { u: self.u.sub(&other.u), v: self.v.sub(&other.v) }
    }

    pub fn scale(&self, c: Complex64) -> StatePair {
        StatePair { u: self.u.scale(c), v: self.v.scale(c) }
    }
}

/// Energy norm `sqrt(||u'||^2 + ||v||^2)`; additive constants in `u` drop out.
pub fn energy_norm(state: &StatePair) -> Result<f64> {
    let du = state.u.derivative();
    let a = l2_inner(&du, &du)?.re;
    let b = l2_inner(&state.v, &state.v)?.re;
    Ok((a + b).max(0.0).sqrt())
}

/// Energy-space inner product `<u', w'> + <v, y>`.
pub fn hilbert_inner(a: &StatePair, b: &StatePair) -> Result<Complex64> {
    Ok(l2_inner(&a.u.derivative(), &b.u.derivative())? + l2_inner(&a.v, &b.v)?)
}

/// Flux defect `sum_j u_j'(0) + alpha v(0)`; `v` must be continuous at the
/// vertex within `tol` for the trace `v(0)` to be meaningful.
pub fn robin_residual(state: &StatePair, alpha: Complex64, tol: f64) -> Result<Complex64> {
    let (v0, defect) = vertex_trace(&state.v);
    if defect > tol {
        return Err(Error::Domain { condition: DomainCondition::ContinuityV, defect, tol });
    }
    let flux: Complex64 = state.u.edges.iter().map(|e| e.eval_deriv(0.0)).sum();
    Ok(flux + alpha * v0)
}

/// Generator pairing `<W_alpha U, U> = 2i Im<v', u'> + alpha |v(0)|^2` for
/// states in the operator domain; the real part carries the damping sign.
pub fn form_pairing(state: &StatePair, alpha: Complex64, tol: f64) -> Result<Complex64> {
    let (_, du) = vertex_trace(&state.u);
    if du > tol {
        return Err(Error::Domain { condition: DomainCondition::ContinuityU, defect: du, tol });
    }
    let (v0, dv) = vertex_trace(&state.v);
    if dv > tol {
        return Err(Error::Domain { condition: DomainCondition::ContinuityV, defect: dv, tol });
    }
    let flux: Complex64 = state.u.edges.iter().map(|e| e.eval_deriv(0.0)).sum();
    let robin = flux + alpha * v0;
    let scale = 1.0 + flux.norm() + (alpha * v0).norm();
    if robin.norm() > tol * scale {
        return Err(Error::Domain {
            condition: DomainCondition::Robin,
            defect: robin.norm(),
            tol: tol * scale,
        });
    }
    let cross = l2_inner(&state.v.derivative(), &state.u.derivative())?;
    Ok(Complex64::new(0.0, 2.0 * cross.im) + alpha * v0.norm_sqr())
}

/// Named tolerances used across the suites; every check states which one it
/// reads so runs can be tightened or relaxed from the command line.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    /// Relative tolerance for closed-form operator identities.
    pub identity: f64,
    /// Absolute tolerance for vertex continuity and flux defects.
    pub domain: f64,
    /// Relative tolerance for generator chain residuals.
    pub chain: f64,
    /// Coefficient-level zero detection in exact constructions.
    pub coeff: f64,
    /// FEM-vs-closed-form agreement in the verification suites.
    pub fem_match: f64,
    /// Truncation monitor for the finite computational window.
    pub trunc: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            identity: 1e-9,
            domain: 1e-8,
            chain: 1e-10,
            coeff: 1e-12,
            fem_match: 5e-3,
            trunc: 1e-4,
        }
    }
}

impl Tolerances {
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        if !(value > 0.0) {
            return Err(Error::InvalidInput(format!("tolerance {name} must be positive")));
        }
        match name {
            "identity" => self.identity = value,
            "domain" => self.domain = value,
            "chain" => self.chain = value,
            "coeff" => self.coeff = value,
            "fem_match" => self.fem_match = value,
            "trunc" => self.trunc = value,
            _ => return Err(Error::InvalidInput(format!("unknown tolerance name: {name}"))),
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct TermRecord {
    coeff_re: f64,
    coeff_im: f64,
    power: u32,
    rate_re: f64,
    rate_im: f64,
    a: f64,
    b: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct GraphFunctionRecord {
    n_edges: usize,
    edges: Vec<Vec<TermRecord>>,
}

impl GraphFunction {
    pub fn to_json(&self) -> String {
        let rec = GraphFunctionRecord {
            n_edges: self.graph.n_edges(),
            edges: self
                .edges
                .iter()
                .map(|e| {
                    e.terms
                        .iter()
                        .map(|t| TermRecord {
                            coeff_re: t.coeff.re,
                            coeff_im: t.coeff.im,
                            power: t.power,
                            rate_re: t.rate.re,
                            rate_im: t.rate.im,
                            a: t.start,
                            b: if t.stop.is_finite() { Some(t.stop) } else { None },
                        })
                        .collect()
                })
                .collect(),
        };
        serde_json::to_string_pretty(&rec).expect("graph function serialization")
    }

    pub fn from_json(s: &str) -> Result<GraphFunction> {
        let rec: GraphFunctionRecord = serde_json::from_str(s)
            .map_err(|e| Error::InvalidInput(format!("graph function json: {e}")))?;
        let graph = StarGraph::new(rec.n_edges)?;
        if rec.edges.len() != rec.n_edges {
            return Err(Error::EdgeCount { expected: rec.n_edges, got: rec.edges.len() });
        }
        let edges = rec
            .edges
            .into_iter()
            .map(|terms| {
                let parsed: Result<Vec<ExpPolyTerm>> = terms
                    .into_iter()
                    .map(|t| {
                        ExpPolyTerm::new(
                            Complex64::new(t.coeff_re, t.coeff_im),
                            t.power,
                            Complex64::new(t.rate_re, t.rate_im),
                            t.a,
                            t.b.unwrap_or(f64::INFINITY),
                        )
                    })
                    .collect();
                Ok(EdgeFunction::from_terms(parsed?))
            })
            .collect::<Result<Vec<_>>>()?;
        GraphFunction::from_edges(graph, edges)
    }
}
