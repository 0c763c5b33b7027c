//! Wave dynamics with a damping Dirac vertex on a non-compact star graph.
//!
//! The graph is a star of `N` half-lines glued at a single vertex. On the
//! energy space (first-order profiles modulo constants) x (velocity in L2),
//! the generator acts as `(u, v) -> (v, u'')` on pairs that are continuous
//! through the vertex and satisfy the damping flux condition
//! `sum_j u_j'(0) + alpha v(0) = 0`.
//!
//! Everything here is built on a closed algebra of exponential-polynomial
//! pieces, so resolvent applications, quasimode residuals, d'Alembert
//! evolution and vertex traces are evaluated in closed form, not by
//! discretization. The one intentionally discrete module is [`approx`],
//! which replaces the Dirac damping by concentrating profiles and measures
//! the norm-resolvent gap with a finite element solver.
//!
//! Module map:
//! - [`graphfun`]: star graph, exponential-polynomial edge functions, exact
//!   integrals, traces, energy norms, the vertex flux form.
//! - [`resolvent`]: half-line convolution kernel and the closed-form
//!   resolvent `(W_alpha - z)^{-1}` for `Re z > 0`, `alpha != N`.
//! - [`spectra`]: Jordan-type chains at the critical coupling, imaginary-axis
//!   and decay-profile quasimodes, pseudospectrum scans.
//! - [`evolve`]: d'Alembert splitting, vertex reflection matrices, energy
//!   tracking, and the non-uniqueness family at the critical coupling.
//! - [`approx`]: concentrating damping profiles, the delta-pairing gap, and
//!   the FEM convergence study for the regularized resolvents.

pub mod approx;
pub mod error;
pub mod evolve;
pub mod graphfun;
pub mod numfmt;
pub mod resolvent;
pub mod spectra;

pub use error::{DomainCondition, Error, Result};
pub use graphfun::{
    l2_inner, EdgeFunction, ExpPolyTerm, GraphFunction, StarGraph, StatePair, Tolerances,
};
pub use num_complex::Complex64;

#[cfg(test)]
pub(crate) mod testutil;
