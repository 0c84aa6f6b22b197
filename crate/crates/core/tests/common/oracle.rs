//! Stand-alone reference formulas for the two-mode (Alice, Bob) picture and
//! the exact modulator field. Plain `f64` arithmetic only, no library calls.

#![allow(dead_code)]

/// Entries `(a, b, c)` of the Alice-Bob covariance matrix
/// `[[a I, c Z], [c Z, b I]]` behind an ideal detector.
pub fn ab_entries(v_m: f64, k: f64, eta: f64, eps: f64) -> (f64, f64, f64) {
    let a = 1.0 + (1.0 + k * k) * v_m;
    let b = 1.0 + eta * v_m + eps;
    let c = (eta * v_m * (2.0 + (1.0 + k * k) * v_m)).sqrt();
    (a, b, c)
}

/// Row-major 4x4 matrix in (x_A, p_A, x_B, p_B) ordering.
pub fn ab_matrix(v_m: f64, k: f64, eta: f64, eps: f64) -> [[f64; 4]; 4] {
    let (a, b, c) = ab_entries(v_m, k, eta, eps);
    [
        [a, 0.0, c, 0.0],
        [0.0, a, 0.0, -c],
        [c, 0.0, b, 0.0],
        [0.0, -c, 0.0, b],
    ]
}

pub fn g(nu: f64) -> f64 {
    if nu <= 1.0 + 1e-12 {
        return 0.0;
    }
    let p = (nu + 1.0) / 2.0;
    let m = (nu - 1.0) / 2.0;
    p * p.log2() - m * m.log2()
}

/// Symplectic eigenvalues of `[[a I, c Z], [c Z, b I]]`.
pub fn two_mode_nus(a: f64, b: f64, c: f64) -> (f64, f64) {
    let delta = a * a + b * b - 2.0 * c * c;
    let det = a * b - c * c;
    let root = (delta * delta - 4.0 * det * det).max(0.0).sqrt();
    (((delta + root) / 2.0).sqrt(), ((delta - root) / 2.0).max(0.0).sqrt())
}

#[derive(Debug, Clone, Copy)]
pub struct TwoModeRates {
    pub i_ab: f64,
    pub chi_dr: f64,
    pub chi_rr: f64,
    pub r_dr: f64,
    pub r_rr: f64,
}

/// Key fractions of the no-switching protocol without leakage, where Eve
/// purifies the Alice-Bob state.
pub fn no_leakage_rates(v_m: f64, eta: f64, eps: f64, beta: f64) -> TwoModeRates {
    let (a, b, c) = ab_entries(v_m, 0.0, eta, eps);
    let (n1, n2) = two_mode_nus(a, b, c);
    let s_ab = g(n1) + g(n2);
    let v_b_given_a = b - c * c / (a + 1.0);
    let v_a_given_b = a - c * c / (b + 1.0);
    let i_ab = ((b + 1.0) / (v_b_given_a + 1.0)).log2();
    let chi_dr = s_ab - g(v_b_given_a);
    let chi_rr = s_ab - g(v_a_given_b);
    TwoModeRates {
        i_ab,
        chi_dr,
        chi_rr,
        r_dr: beta * i_ab - chi_dr,
        r_rr: beta * i_ab - chi_rr,
    }
}

/// Powers of the `+1`, `-1` and `0` harmonics of the modulator output field
/// `sin(mu2 cos t + d2) + i sin(mu1 sin t + d1)`, from a direct DFT of
/// `samples` points over one period.
pub fn field_line_powers(mu1: f64, mu2: f64, d1: f64, d2: f64, samples: usize) -> (f64, f64, f64) {
    let tau = 2.0 * std::f64::consts::PI;
    let mut acc = [(0.0f64, 0.0f64); 3];
    for j in 0..samples {
        let t = tau * j as f64 / samples as f64;
        let re = (mu2 * t.cos() + d2).sin();
        let im = (mu1 * t.sin() + d1).sin();
        for (slot, h) in acc.iter_mut().zip([1.0, -1.0, 0.0]) {
            // Multiply by exp(-i h t).
            let (c, s) = ((h * t).cos(), (h * t).sin());
            slot.0 += re * c + im * s;
            slot.1 += im * c - re * s;
        }
    }
    let n = samples as f64;
    let p = |(r, i): (f64, f64)| (r / n).powi(2) + (i / n).powi(2);
    (p(acc[0]), p(acc[1]), p(acc[2]))
}
