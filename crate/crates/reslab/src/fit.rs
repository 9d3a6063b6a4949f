//! Small least-squares helpers for decay-law checks.

/// Ordinary least squares y = slope·x + intercept.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert!(xs.len() == ys.len() && xs.len() >= 2);
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Decay rate r from m(t) ≈ A e^{-r t} (positive for decaying data).
pub fn exp_decay_rate(ts: &[f64], masses: &[f64]) -> f64 {
    let logs: Vec<f64> = masses.iter().map(|&m| m.max(1e-300).ln()).collect();
    -linear_fit(ts, &logs).0
}

/// Log-log slope p from y(t) ≈ C t^p.
pub fn loglog_slope(ts: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = ts.iter().map(|&t| t.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|&y| y.max(1e-300).ln()).collect();
    linear_fit(&lx, &ly).0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_synthetic_laws() {
        let ts: Vec<f64> = (1..40).map(|i| 0.3 * i as f64).collect();
        let ms: Vec<f64> = ts.iter().map(|&t| 2.5 * (-0.7 * t).exp()).collect();
        assert!((exp_decay_rate(&ts, &ms) - 0.7).abs() < 1e-12);
        let ys: Vec<f64> = ts.iter().map(|&t| 4.0 * t.powf(-0.5)).collect();
        assert!((loglog_slope(&ts, &ys) + 0.5).abs() < 1e-12);
        let (s, b) = linear_fit(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]);
        assert!((s - 2.0).abs() < 1e-14 && (b - 1.0).abs() < 1e-14);
    }
}
