//! Independent-discretization oracles: a leapfrog finite difference scheme
//! for the time evolution, the finite element solver against the closed-form
//! resolvent on the coercive side, and quadrature re-measurements of
//! closed-form residual ratios. Agreement here certifies the exact algebra
//! against computations that share none of its code paths.

mod common;

use common::{c, quad_state_norm};
use starwave::approx::{fem_solve, DampingKind, MeshProblem};
use starwave::evolve::{energy, solution_at, vertex_report, EvolutionProblem};
use starwave::graphfun::energy_norm;
use starwave::resolvent::{apply_generator, has_growing_tail, resolvent_apply};
use starwave::spectra::{quasimode_eta, seed_dictionary};
use starwave::{EdgeFunction, GraphFunction, StarGraph, StatePair};

/// `x^2 (1-x)^3` on `[0, 1)`: vanishing value and slope at the vertex and a
/// C2 join with zero at `x = 1`.
fn bump_c2() -> EdgeFunction {
    EdgeFunction::poly(
        &[c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(-3.0, 0.0), c(3.0, 0.0), c(-1.0, 0.0)],
        0.0,
        1.0,
    )
    .unwrap()
}

/// `x (1-x)^2` on `[0, 1)`: vanishing vertex value, C1 join at `x = 1`.
fn ramp_c1() -> EdgeFunction {
    EdgeFunction::poly(&[c(0.0, 0.0), c(1.0, 0.0), c(-2.0, 0.0), c(1.0, 0.0)], 0.0, 1.0).unwrap()
}

/// Leapfrog scheme for the wave equation on the star. The vertex value
/// evolves by a control-volume balance over `[0, h/2]` on every edge, with
/// the damped flux condition `sum_j u_j'(0) = -alpha v(0)` substituted for
/// the physical flux and `v(0)` taken centered, so the update stays a scalar
/// solve and inherits the summation-by-parts energy estimate. Shares nothing
/// with the d'Alembert solution it is checked against.
#[test]
fn leapfrog_scheme_reproduces_the_closed_form_evolution() {
    let alpha = c(0.8, 0.0);
    let n_edges = 2usize;
    let graph = StarGraph::new(n_edges).unwrap();

    // Real data with zero vertex traces, so the flux condition holds for
    // every coupling, and distinct edge profiles so reflection mixes them.
    let f = GraphFunction::from_edges(graph, vec![bump_c2(), bump_c2().scale(c(0.6, 0.0))])
        .unwrap();
    let g = GraphFunction::from_edges(
        graph,
        vec![ramp_c1().scale(c(0.8, 0.0)), ramp_c1().scale(c(-0.7, 0.0))],
    )
    .unwrap();
    let problem = EvolutionProblem::new(alpha, f.clone(), g.clone(), 1e-10).unwrap();

    // Grid: solution support at t = 0.5 stays within x < 1.5, far end inert.
    let run = |m: usize| -> (f64, f64, f64) {
    let big_l = 4.0f64;
    let h = big_l / m as f64;
    let lam = 0.5f64;
    let dt = lam * h;
    let t_final = 0.5f64;
    let steps = (t_final / dt).round() as usize;
    assert!((steps as f64 * dt - t_final).abs() < 1e-12);

    let ar = alpha.re;
    let nf = n_edges as f64;
    // N (h/2) s'' = sum_j (U1_j - s)/h + alpha s', discretized with centered
    // differences in t; solving for s^{n+1} is a scalar division.
    let step_vertex = |u_next: &mut [Vec<f64>], u_cur: &[Vec<f64>], s_prev: f64| {
        let s_cur = u_cur[0][0];
        let flux_in: f64 = (0..n_edges).map(|j| (u_cur[j][1] - s_cur) / h).sum();
        let lead = nf * h / (2.0 * dt * dt);
        let denom = lead - ar / (2.0 * dt);
        let rhs = lead * (2.0 * s_cur - s_prev) + flux_in - ar * s_prev / (2.0 * dt);
        let s_next = rhs / denom;
        for row in u_next.iter_mut() {
            row[0] = s_next;
            row[m] = 0.0;
        }
    };

    let fxx = f.derivative().derivative();
    let u_prev: Vec<Vec<f64>> = (0..n_edges)
        .map(|j| (0..=m).map(|i| f.eval(j, i as f64 * h).re).collect())
        .collect();
    // First step by Taylor expansion. The vertex acceleration comes from the
    // same control-volume balance, since edgewise second derivatives need
    // not agree at the vertex.
    let mut u_cur: Vec<Vec<f64>> = (0..n_edges)
        .map(|j| {
            (0..=m)
                .map(|i| {
                    let x = i as f64 * h;
                    f.eval(j, x).re + dt * g.eval(j, x).re
                        + if i == 0 || i == m { 0.0 } else { 0.5 * dt * dt * fxx.eval(j, x).re }
                })
                .collect()
        })
        .collect();
    {
        let s0 = u_prev[0][0];
        let flux_in: f64 = (0..n_edges).map(|j| (u_prev[j][1] - s0) / h).sum();
        let acc = (flux_in + ar * g.eval(0, 0.0).re) * 2.0 / (nf * h);
        let s1 = s0 + dt * g.eval(0, 0.0).re + 0.5 * dt * dt * acc;
        for row in u_cur.iter_mut() {
            row[0] = s1;
        }
    }
    let mut u_prev = u_prev;

    let mut snap: Vec<Vec<Vec<f64>>> = Vec::new();
    // After iteration n the current layer is u^{n+1}; capture the three
    // layers around t_final, the last one so v(t_final) is centered.
    for n in 1..=steps {
        let mut u_next: Vec<Vec<f64>> = vec![vec![0.0; m + 1]; n_edges];
        for j in 0..n_edges {
            for i in 1..m {
                u_next[j][i] = 2.0 * u_cur[j][i] - u_prev[j][i]
                    + lam * lam * (u_cur[j][i + 1] - 2.0 * u_cur[j][i] + u_cur[j][i - 1]);
            }
        }
        step_vertex(&mut u_next, &u_cur, u_prev[0][0]);
        u_prev = std::mem::replace(&mut u_cur, u_next);
        if n + 2 >= steps {
            snap.push(u_cur.clone());
        }
    }
    let (u_before, u_at, u_after) = (&snap[0], &snap[1], &snap[2]);

    let exact = solution_at(&problem, t_final).unwrap();
    // Centered time difference for the velocity, then a [1 2 1]/4 average in
    // x: differencing the trajectory excites the grid-frequency component of
    // the phase error, which the average removes without touching the
    // second-order accuracy of the smooth part.
    let v_fd: Vec<Vec<f64>> = (0..n_edges)
        .map(|j| {
            (0..=m)
                .map(|i| (u_after[j][i] - u_before[j][i]) / (2.0 * dt))
                .collect::<Vec<f64>>()
        })
        .collect();
    let mut sup_u = 0.0f64;
    let mut sup_exact = 0.0f64;
    let mut v_gap2 = 0.0f64;
    let mut v_ref2 = 0.0f64;
    for j in 0..n_edges {
        for i in 0..=m {
            let x = i as f64 * h;
            let eu = exact.u.eval(j, x).re;
            let ev = exact.v.eval(j, x).re;
            sup_exact = sup_exact.max(eu.abs()).max(ev.abs());
            sup_u = sup_u.max((u_at[j][i] - eu).abs());
            let v = if i == 0 || i == m {
                v_fd[j][i]
            } else {
                0.25 * (v_fd[j][i - 1] + 2.0 * v_fd[j][i] + v_fd[j][i + 1])
            };
            v_gap2 += h * (v - ev) * (v - ev);
            v_ref2 += h * ev * ev;
        }
    }
    assert!(sup_exact > 1e-2, "exact solution unexpectedly trivial");
    let l2_v = (v_gap2 / v_ref2.max(1e-300)).sqrt();

    // Energy from the grid by trapezoid in |u'|^2 + |v|^2.
    let mut e_fd = 0.0f64;
    for j in 0..n_edges {
        for i in 0..m {
            let du = (u_at[j][i + 1] - u_at[j][i]) / h;
            let va = (u_after[j][i] - u_before[j][i]) / (2.0 * dt);
            let vb = (u_after[j][i + 1] - u_before[j][i + 1]) / (2.0 * dt);
            e_fd += h * (du * du + 0.5 * (va * va + vb * vb));
        }
    }
    (sup_u, l2_v, e_fd)
    };

    let (sup_u_coarse, l2_v_coarse, _) = run(800);
    let (sup_u, l2_v, e_fd) = run(1600);
    assert!(sup_u <= 1e-4, "position gap {sup_u:.3e} beyond the scheme's accuracy");
    // The velocity is one order weaker: differencing the trajectory across
    // the reflection kinks leaves first-order bands along characteristics.
    assert!(l2_v <= 6e-3, "velocity gap {l2_v:.3e} beyond the scheme's accuracy");
    // Refinement must pull the scheme toward the closed form.
    assert!(
        sup_u_coarse / sup_u >= 1.8 && l2_v_coarse / l2_v >= 1.5,
        "no convergence under refinement: u {sup_u_coarse:.3e}->{sup_u:.3e}, \
         v {l2_v_coarse:.3e}->{l2_v:.3e}"
    );

    let e_exact = energy(&problem, 0.5).unwrap();
    assert!(
        (e_fd - e_exact).abs() <= 5e-3 * e_exact,
        "energy {e_fd:.8} vs closed form {e_exact:.8}"
    );

    // The closed form also has to sit in the operator domain at this time.
    let exact = solution_at(&problem, 0.5).unwrap();
    let (_, robin_abs, cont) = vertex_report(&exact, alpha);
    assert!(robin_abs <= 1e-9 && cont <= 1e-9);
}

/// The finite element solver on the coercive pairing side against the
/// closed-form resolvent: independent discretization, shared answer.
#[test]
fn fem_cross_checks_the_closed_form_resolvent() {
    let alpha = c(-0.9, 0.3);
    let z = c(1.1, -0.4);
    let graph = StarGraph::new(2).unwrap();
    // Spline dictionary entries are compactly supported, so the Dirichlet
    // truncation error sits at the e^{-Re z L} scale, not the data's.
    let dict = seed_dictionary(graph, 12, 3);
    let data = dict[10].clone();
    let scale = energy_norm(&data).unwrap();

    let exact = resolvent_apply(alpha, z, &data, 1e-8).unwrap().state;
    assert!(!has_growing_tail(&exact.u, z));

    let mesh = MeshProblem::for_params(z, 256).unwrap();
    let fem = fem_solve(alpha, DampingKind::Dirac, z, &data, &mesh).unwrap();

    let gap = fem.nodal.h1_gap_exact(&exact.u, z.norm_sqr()) / scale;
    assert!(gap <= 1e-3, "relative H1 gap {gap:.3e} between FEM and closed form");

    let u0_exact = exact.u.eval(0, 0.0);
    assert!(
        (fem.u0 - u0_exact).norm() <= 1e-3 * (1.0 + u0_exact.norm()),
        "vertex values differ: fem {} vs exact {}",
        fem.u0,
        u0_exact
    );

    // v = f + z u ties the second component to the first on both sides.
    let v_check = data.u.edge(0).add(&exact.u.edge(0).scale(z));
    let dv = v_check.sub(exact.v.edge(0));
    assert!(dv.eval(0.7).norm() <= 1e-10 * (1.0 + scale));
}

/// The closed-form residual ratio of the vertex-riding quasimode family,
/// re-measured by quadrature norms of `(W - z) U`.
#[test]
fn eta_quasimode_ratio_matches_quadrature() {
    for &(alpha, z) in &[
        (c(2.5, 0.0), c(1.0, 0.8)),
        (c(0.7, -0.4), c(2.0, -1.0)),
        (c(3.0, 1.0), c(0.5, 0.0)),
    ] {
        let eta = quasimode_eta(alpha, z, 2).unwrap();
        let img = apply_generator(&eta.state, alpha, 1e-8).unwrap();
        let shifted = img.sub(&eta.state.scale(z));
        let num = quad_state_norm(&shifted);
        let den = quad_state_norm(&eta.state);
        let got = num / den;
        assert!(
            (got - eta.residual_ratio).abs() <= 1e-9 * (1.0 + eta.residual_ratio),
            "quadrature ratio {got:.12e} vs closed form {:.12e} at alpha {alpha}, z {z}",
            eta.residual_ratio
        );
    }
}

/// Applying `(W - z)` to the resolvent output has to reproduce the data;
/// measured here by quadrature so term-soup cancellation is pointwise.
#[test]
fn resolvent_roundtrip_measured_by_quadrature() {
    let graph = StarGraph::new(3).unwrap();
    let dict = seed_dictionary(graph, 10, 17);
    let alpha = c(1.4, -0.6);
    let z = c(0.8, 1.3);
    for data in dict.iter().take(4) {
        let out = resolvent_apply(alpha, z, data, 1e-8).unwrap();
        let img = apply_generator(&out.state, alpha, 1e-7).unwrap();
        let residual = img.sub(&out.state.scale(z)).sub(data);
        let rel = quad_state_norm(&residual) / energy_norm(data).unwrap();
        assert!(rel <= 1e-10, "resolvent identity defect {rel:.3e}");
    }
}

/// Zero data must evolve to zero and stay in the domain: a cheap sanity
/// anchor for the oracle harness itself.
#[test]
fn zero_data_stays_zero() {
    let graph = StarGraph::new(2).unwrap();
    let zero = StatePair::zero(graph);
    let p = EvolutionProblem::new(c(0.5, 0.0), zero.u.clone(), zero.v.clone(), 1e-12).unwrap();
    let s = solution_at(&p, 1.7).unwrap();
    assert!(energy_norm(&s).unwrap() <= 1e-15);
    assert!(energy(&p, 3.0).unwrap() <= 1e-15);
}
