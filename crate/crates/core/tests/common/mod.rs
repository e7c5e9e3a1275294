#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64;

/// `J_n(x)` from the Bessel integral, trapezoid rule on a periodic integrand.
pub fn bessel_j(n: u32, x: f64) -> f64 {
    let m = 4000;
    let h = PI / m as f64;
    let mut s = 0.0;
    for k in 0..=m {
        let t = k as f64 * h;
        let w = if k == 0 || k == m { 0.5 } else { 1.0 };
        s += w * (n as f64 * t - x * t.sin()).cos();
    }
    s * h / PI
}

/// `K_n(x) = ∫₀^∞ exp(-x cosh t) cosh(n t) dt`.
pub fn bessel_k(n: u32, x: f64) -> f64 {
    let t_max = (60.0 / x).acosh().max(1.0) + 1.0;
    let m = 40000;
    let h = t_max / m as f64;
    let mut s = 0.0;
    for k in 0..=m {
        let t = k as f64 * h;
        let w = if k == 0 || k == m { 0.5 } else { 1.0 };
        s += w * (-x * t.cosh()).exp() * (n as f64 * t).cosh();
    }
    s * h
}

/// Fundamental LP01 effective index of a circular step-index fiber from the
/// scalar dispersion equation `U J1(U)/J0(U) = W K1(W)/K0(W)`.
pub fn lp01_neff(radius: f64, n_core: f64, n_clad: f64, wavelength: f64) -> f64 {
    let k0 = 2.0 * PI / wavelength;
    let v = k0 * radius * (n_core * n_core - n_clad * n_clad).sqrt();
    let f = |u: f64| {
        let w = (v * v - u * u).sqrt();
        u * bessel_j(1, u) / bessel_j(0, u) - w * bessel_k(1, w) / bessel_k(0, w)
    };
    let (mut lo, mut hi) = (1e-6, v.min(2.404_825_557_695_773) * (1.0 - 1e-9));
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let u = 0.5 * (lo + hi);
    (n_core * n_core - (u / (k0 * radius)).powi(2)).sqrt()
}

pub fn v_number(radius: f64, n_core: f64, n_clad: f64, wavelength: f64) -> f64 {
    2.0 * PI / wavelength * radius * (n_core * n_core - n_clad * n_clad).sqrt()
}

/// Mie scattering cross-section of a homogeneous sphere (m²), size parameter
/// taken in the medium.
#[allow(clippy::needless_range_loop)]
pub fn mie_cross_section(radius: f64, n_particle: f64, n_medium: f64, wavelength: f64) -> f64 {
    let x = 2.0 * PI * n_medium * radius / wavelength;
    let m = Complex64::new(n_particle / n_medium, 0.0);
    let y = m * x;
    let nstop = (x + 4.0 * x.cbrt() + 2.0).ceil() as usize;
    let nmx = (nstop as f64).max(y.norm()).ceil() as usize + 15;
    let mut d = vec![Complex64::new(0.0, 0.0); nmx + 1];
    for n in (1..=nmx).rev() {
        let nf = n as f64;
        d[n - 1] = nf / y - 1.0 / (d[n] + nf / y);
    }
    let (mut psi0, mut psi1) = (x.cos(), x.sin());
    let (mut chi0, mut chi1) = (-x.sin(), x.cos());
    let mut xi1 = Complex64::new(psi1, -chi1);
    let mut sum = 0.0;
    for n in 1..=nstop {
        let nf = n as f64;
        let psi = (2.0 * nf - 1.0) * psi1 / x - psi0;
        let chi = (2.0 * nf - 1.0) * chi1 / x - chi0;
        let xi = Complex64::new(psi, -chi);
        let da = d[n] / m + nf / x;
        let db = d[n] * m + nf / x;
        let an = (da * psi - psi1) / (da * xi - xi1);
        let bn = (db * psi - psi1) / (db * xi - xi1);
        sum += (2.0 * nf + 1.0) * (an.norm_sqr() + bn.norm_sqr());
        psi0 = psi1;
        psi1 = psi;
        chi0 = chi1;
        chi1 = chi;
        xi1 = xi;
    }
    2.0 / (x * x) * sum * PI * radius * radius
}

/// Volume-averaged `exp(-z/γ)` over a sphere resting on `z = 0`, Simpson's rule
/// over horizontal slices.
pub fn sphere_weight_oracle(radius: f64, gamma: f64) -> f64 {
    let m = 20000;
    let h = 2.0 * radius / m as f64;
    let mut s = 0.0;
    for k in 0..=m {
        let z = k as f64 * h;
        let w = if k == 0 || k == m {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        s += w * PI * (2.0 * radius * z - z * z) * (-z / gamma).exp();
    }
    s * h / 3.0 / (4.0 / 3.0 * PI * radius.powi(3))
}

/// Sample variance about the mean.
pub fn variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
}
