//! Oracles and assertion helpers shared by the unit tests. Integrals are
//! re-derived here by adaptive quadrature so the closed forms are checked
//! against an independent computation, not against themselves.

use num_complex::Complex64;

use crate::graphfun::EdgeFunction;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[track_caller]
pub fn assert_close(got: f64, want: f64, tol: f64) {
    assert!(
        (got - want).abs() <= tol,
        "expected {want:.17e}, got {got:.17e} (|diff| = {:.3e} > {tol:.3e})",
        (got - want).abs()
    );
}

/// Adaptive Simpson quadrature on `[a, b]` with absolute target `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> Complex64, a: f64, b: f64, tol: f64) -> Complex64 {
    fn simpson(f: &dyn Fn(f64) -> Complex64, a: f64, b: f64) -> Complex64 {
        let m = 0.5 * (a + b);
        (f(a) + 4.0 * f(m) + f(b)) * ((b - a) / 6.0)
    }
    fn rec(
        f: &dyn Fn(f64) -> Complex64,
        a: f64,
        b: f64,
        whole: Complex64,
        tol: f64,
        depth: u32,
    ) -> Complex64 {
        let m = 0.5 * (a + b);
        let left = simpson(f, a, m);
        let right = simpson(f, m, b);
        let delta = left + right - whole;
        // Noise floor: once the Richardson correction sits at rounding level
        // of the local values, refinement cannot help and the halved
        // tolerance would chase it forever.
        let scale = left.norm() + right.norm() + whole.norm();
        let width_floor = b - a <= 1e-12 * (1.0 + a.abs() + b.abs());
        if depth == 0 || width_floor || delta.norm() <= (15.0 * tol).max(1e-14 * scale) {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, left, tol / 2.0, depth - 1) + rec(f, m, b, right, tol / 2.0, depth - 1)
    }
    let whole = simpson(f, a, b);
    rec(f, a, b, whole, tol, 48)
}

/// Truncation point beyond which every decaying term of `f` and `g` is below
/// 1e-18 in magnitude.
fn safe_cutoff(f: &EdgeFunction, g: &EdgeFunction) -> f64 {
    let mut cut = 1.0f64;
    for t in f.terms().iter().chain(g.terms()) {
        if t.stop.is_finite() {
            cut = cut.max(t.stop);
        } else if t.rate.re < 0.0 {
            // |c| x^k e^{re*x} <= 1e-18 once x >= (slack + k log x)/|re|.
            let mut x = 1.0f64.max(t.start);
            for _ in 0..64 {
                let target = (t.coeff.norm().max(1e-30).ln() + 18.0 * std::f64::consts::LN_10
                    + t.power as f64 * x.max(1.0).ln())
                    / (-t.rate.re);
                x = target.max(1.0);
            }
            cut = cut.max(x);
        } else {
            // Constant tails must meet a decaying partner; the partner's
            // cutoff dominates, so nothing to add here.
        }
    }
    cut
}

/// Quadrature version of the edge inner product `int f conj(g)`.
pub fn quad_l2_inner(f: &EdgeFunction, g: &EdgeFunction) -> Complex64 {
    let cut = safe_cutoff(f, g);
    let mut pts: Vec<f64> = f
        .breakpoints()
        .into_iter()
        .chain(g.breakpoints())
        .filter(|x| x.is_finite() && *x < cut)
        .collect();
    pts.push(0.0);
    pts.push(cut);
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
    let integrand = |x: f64| f.eval(x) * g.eval(x).conj();
    let mut total = Complex64::new(0.0, 0.0);
    for w in pts.windows(2) {
        // Sample just inside the half-open pieces to dodge breakpoint jumps.
        let (a, b) = (w[0], w[1]);
        let eps = 1e-12 * (1.0 + b.abs());
        if b - a > 4.0 * eps {
            total += adaptive_simpson(&integrand, a + eps, b - eps, 1e-12);
        }
    }
    total
}
