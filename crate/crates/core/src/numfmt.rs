//! Deterministic numeric reporting: fixed 17-significant-digit float
//! formatting for CSV output and small least-squares helpers for decay-rate
//! fits.

/// Render with 17 significant digits, enough to round-trip an f64 exactly,
/// so repeated runs produce byte-identical tables.
pub fn sig17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Least-squares slope of `y` against `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    if x.len() < 2 {
        return f64::NAN;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (a, b) in x.iter().zip(y) {
        num += (a - mx) * (b - my);
        den += (a - mx) * (a - mx);
    }
    num / den
}

/// Slope of `log y` against `log x`; pairs with non-positive `y` are an
/// error in the caller, so they panic here rather than being skipped.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y
        .iter()
        .map(|v| {
            assert!(*v > 0.0, "log-log fit needs positive values, got {v}");
            v.ln()
        })
        .collect();
    slope(&lx, &ly)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig17_roundtrips() {
        for &x in &[std::f64::consts::PI, 0.1, -1234.5678e-12, 2.0f64.sqrt()] {
            let s = sig17(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back, x, "{s}");
        }
    }

    #[test]
    fn slope_recovers_line() {
        let x: Vec<f64> = (1..=20).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.5 - 2.0 * v).collect();
        assert!((slope(&x, &y) + 2.0).abs() < 1e-12);
    }

    #[test]
    fn loglog_slope_recovers_power_law() {
        let x: Vec<f64> = (1..=8).map(|i| 2.0f64.powi(i)).collect();
        let y: Vec<f64> = x.iter().map(|v| 7.0 * v.powf(-0.5)).collect();
        assert!((loglog_slope(&x, &y) + 0.5).abs() < 1e-12);
    }
}
