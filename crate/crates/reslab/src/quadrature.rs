//! Panel-based Gauss-Legendre quadrature plus a Filon-type rule for
//! oscillatory integrals ∫ H(ε) e^{-iεt} dε: per panel, H is expanded in
//! Legendre polynomials from its GL15 samples and the phase is integrated
//! exactly through spherical Bessel moments, so the cost is independent of t.

use std::sync::OnceLock;

use num_complex::Complex64;

pub const GL15_NODES: [f64; 15] = [
    -9.879925180204854e-1,
    -9.372733924007059e-1,
    -8.482065834104272e-1,
    -7.244177313601700e-1,
    -5.709721726085388e-1,
    -3.941513470775634e-1,
    -2.011940939974345e-1,
    0.0,
    2.011940939974345e-1,
    3.941513470775634e-1,
    5.709721726085388e-1,
    7.244177313601700e-1,
    8.482065834104272e-1,
    9.372733924007059e-1,
    9.879925180204854e-1,
];

pub const GL15_WEIGHTS: [f64; 15] = [
    3.075324199611727e-2,
    7.036604748810812e-2,
    1.071592204671719e-1,
    1.395706779261543e-1,
    1.662692058169939e-1,
    1.861610000155622e-1,
    1.984314853271116e-1,
    2.025782419255613e-1,
    1.984314853271116e-1,
    1.861610000155622e-1,
    1.662692058169939e-1,
    1.395706779261543e-1,
    1.071592204671719e-1,
    7.036604748810812e-2,
    3.075324199611727e-2,
];

/// GL15 nodes and weights mapped to [lo, hi].
pub fn gl15_points(lo: f64, hi: f64) -> [(f64, f64); 15] {
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut out = [(0.0, 0.0); 15];
    for i in 0..15 {
        out[i] = (mid + half * GL15_NODES[i], half * GL15_WEIGHTS[i]);
    }
    out
}

pub fn gl15_integrate_f64(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    gl15_points(lo, hi).iter().map(|&(x, w)| w * f(x)).sum()
}

pub fn gl15_integrate_c64(lo: f64, hi: f64, f: impl Fn(f64) -> Complex64) -> Complex64 {
    gl15_points(lo, hi)
        .iter()
        .fold(Complex64::new(0.0, 0.0), |acc, &(x, w)| acc + f(x) * w)
}

/// [lo, hi] cut into equal panels of width at most `max_width`.
pub fn split_panels(lo: f64, hi: f64, max_width: f64) -> Vec<(f64, f64)> {
    assert!(hi > lo && max_width > 0.0);
    let n = ((hi - lo) / max_width).ceil().max(1.0) as usize;
    (0..n)
        .map(|i| {
            (
                lo + (hi - lo) * i as f64 / n as f64,
                lo + (hi - lo) * (i + 1) as f64 / n as f64,
            )
        })
        .collect()
}

/// Panels over [lo, hi] that never straddle a kink and respect `max_width`.
pub fn panels_with_kinks(lo: f64, hi: f64, kinks: &[f64], max_width: f64) -> Vec<(f64, f64)> {
    let mut cuts: Vec<f64> = vec![lo];
    let mut inner: Vec<f64> = kinks
        .iter()
        .copied()
        .filter(|&k| k > lo + 1e-14 && k < hi - 1e-14)
        .collect();
    inner.sort_by(|a, b| a.partial_cmp(b).unwrap());
    inner.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
    cuts.extend(inner);
    cuts.push(hi);
    let mut panels = Vec::new();
    for w in cuts.windows(2) {
        panels.extend(split_panels(w[0], w[1], max_width));
    }
    panels
}

/// P_0(u) .. P_14(u).
pub fn legendre_values(u: f64) -> [f64; 15] {
    let mut p = [0.0; 15];
    p[0] = 1.0;
    p[1] = u;
    for n in 1..14 {
        p[n + 1] = ((2 * n + 1) as f64 * u * p[n] - n as f64 * p[n - 1]) / (n + 1) as f64;
    }
    p
}

fn coeff_matrix() -> &'static [[f64; 15]; 15] {
    static M: OnceLock<[[f64; 15]; 15]> = OnceLock::new();
    M.get_or_init(|| {
        let mut m = [[0.0; 15]; 15];
        for (i, (&u, &w)) in GL15_NODES.iter().zip(GL15_WEIGHTS.iter()).enumerate() {
            let p = legendre_values(u);
            for n in 0..15 {
                m[n][i] = (2 * n + 1) as f64 / 2.0 * w * p[n];
            }
        }
        m
    })
}

/// Legendre coefficients of the degree-14 interpolant through GL15 samples.
pub fn legendre_coefficients(values: &[Complex64; 15]) -> [Complex64; 15] {
    let m = coeff_matrix();
    let mut c = [Complex64::new(0.0, 0.0); 15];
    for n in 0..15 {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..15 {
            acc += values[i] * m[n][i];
        }
        c[n] = acc;
    }
    c
}

/// Relative size of the last two Legendre coefficients; a smoothness /
/// resolution indicator for the panel.
pub fn legendre_tail_indicator(coeffs: &[Complex64; 15]) -> f64 {
    let tail = coeffs[13].norm() + coeffs[14].norm();
    let total: f64 = coeffs.iter().map(|c| c.norm()).sum();
    if total == 0.0 {
        0.0
    } else {
        tail / total
    }
}

/// j_0 .. j_nmax at theta >= 0.
pub fn spherical_bessel_j(n_max: usize, theta: f64) -> Vec<f64> {
    assert!(theta >= 0.0);
    let n = n_max;
    if theta < 0.5 {
        // power series: j_n = θ^n/(2n+1)!! Σ_m (-θ²/2)^m / (m! (2n+3)(2n+5)...(2n+1+2m))
        let mut out = vec![0.0; n + 1];
        let t2 = theta * theta;
        let mut prefactor = 1.0; // θ^n / (2n+1)!!
        for nn in 0..=n {
            if nn > 0 {
                prefactor *= theta / (2 * nn + 1) as f64;
            }
            let mut term = 1.0;
            let mut sum = 1.0;
            for m in 1..30 {
                term *= -t2 / 2.0 / (m as f64 * (2 * nn + 1 + 2 * m) as f64);
                sum += term;
                if term.abs() < 1e-19 * sum.abs() {
                    break;
                }
            }
            out[nn] = prefactor * sum;
        }
        return out;
    }

    let j0 = theta.sin() / theta;
    if n == 0 {
        return vec![j0];
    }
    let j1 = theta.sin() / (theta * theta) - theta.cos() / theta;
    if theta > n as f64 + 4.0 {
        // upward recurrence, stable while n < θ
        let mut out = vec![0.0; n + 1];
        out[0] = j0;
        out[1] = j1;
        for m in 1..n {
            out[m + 1] = (2 * m + 1) as f64 / theta * out[m] - out[m - 1];
        }
        out
    } else {
        // Miller's downward recurrence, normalized against j0
        let start = n + 16 + theta as usize;
        let mut jp = 0.0_f64;
        let mut jc = 1e-280_f64;
        let mut out = vec![0.0; n + 1];
        for m in (0..start).rev() {
            let jm = (2 * m + 3) as f64 / theta * jc - jp;
            jp = jc;
            jc = jm;
            if m <= n {
                out[m] = jc;
            }
            if jc.abs() > 1e250 {
                let s = 1e-250;
                jc *= s;
                jp *= s;
                for v in out.iter_mut() {
                    *v *= s;
                }
            }
        }
        let scale = j0 / out[0];
        for v in out.iter_mut() {
            *v *= scale;
        }
        out
    }
}

/// ∫_lo^hi H(ε) e^{-iεt} dε from the GL15 samples of H on the panel.
/// Exact in the phase; degree-14 in H.
pub fn filon_panel(lo: f64, hi: f64, values: &[Complex64; 15], t: f64) -> Complex64 {
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (lo + hi);
    let theta = t.abs() * half;
    let coeffs = legendre_coefficients(values);
    let j = spherical_bessel_j(14, theta);
    // moments: ∫ P_n(u) e^{-iθu} du = 2 (-i)^n j_n(θ)
    let mut acc = Complex64::new(0.0, 0.0);
    let mut minus_i_pow = Complex64::new(1.0, 0.0);
    for (n, c) in coeffs.iter().enumerate() {
        let mut m = minus_i_pow * 2.0 * j[n];
        if t < 0.0 {
            m = m.conj();
        }
        acc += c * m;
        minus_i_pow *= Complex64::new(0.0, -1.0);
    }
    let phase = (Complex64::new(0.0, -1.0) * mid * t).exp();
    half * phase * acc
}
