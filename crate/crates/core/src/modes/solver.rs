//! Shift-invert Lanczos solver for the scalar Helmholtz eigenproblem
//! `(∇²_⊥ + k₀² n²(x, y)) ψ = β² ψ` with zero field on the window edge.
//!
//! The operator is discretized with the 5-point Laplacian and scaled by `h²`.
//! With the shift placed at `(k₀ n_max)²` the matrix `σI − H` is symmetric
//! positive definite, so every Lanczos step is a banded Cholesky solve and the
//! guided modes are the dominant eigenvalues of `(σI − H)⁻¹`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::banded::{dot, BandCholesky};
use super::geometry::CrossSection;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    /// Relative eigen-residual required for a mode to be reported.
    pub tolerance: f64,
    /// Krylov dimension per Lanczos run before giving up.
    pub max_krylov: usize,
    /// Ritz pairs are re-evaluated every this many Lanczos steps.
    pub check_interval: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_krylov: 400,
            check_interval: 10,
        }
    }
}

/// Scalar guided mode on the cross-section grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GuidedMode {
    pub ordinal: usize,
    pub n_eff: f64,
    pub wavelength: f64,
    pub spacing: f64,
    pub nx: usize,
    pub ny: usize,
    /// Row-major field, `sum(ψ²)·h² = 1`, largest-magnitude entry positive.
    pub field: Vec<f64>,
    /// Relative residual `‖Hψ − β²ψ‖ / ‖β²ψ‖`.
    pub residual: f64,
}

impl GuidedMode {
    pub fn beta(&self) -> f64 {
        self.n_eff * 2.0 * std::f64::consts::PI / self.wavelength
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.field[j * self.nx + i]
    }

    /// Cell holding the largest `|ψ|`.
    pub fn peak_cell(&self) -> (usize, usize) {
        let mut best = (0, 0.0f64);
        for (k, v) in self.field.iter().enumerate() {
            if v.abs() > best.1 {
                best = (k, v.abs());
            }
        }
        (best.0 % self.nx, best.0 / self.nx)
    }

    pub fn peak_amplitude(&self) -> f64 {
        self.field.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Scaled discrete operator `A = h²(σI − H)`.
struct ShiftedOperator<'a> {
    cs: &'a CrossSection,
    nx: usize,
    /// `h² (σ − k₀² n²)` per cell.
    potential: Vec<f64>,
    /// `h² σ`
    shift: f64,
}

impl<'a> ShiftedOperator<'a> {
    fn new(cs: &'a CrossSection) -> Self {
        let h2 = cs.cell_area();
        let k0 = cs.wavenumber();
        let sigma = (k0 * cs.max_index()).powi(2);
        let potential = cs
            .index_map()
            .iter()
            .map(|n| h2 * (sigma - (k0 * n).powi(2)))
            .collect();
        Self {
            cs,
            nx: cs.shape().0,
            potential,
            shift: h2 * sigma,
        }
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            4.0 + self.potential[i]
        } else if (i - j == 1 && !i.is_multiple_of(self.nx)) || i - j == self.nx {
            -1.0
        } else {
            0.0
        }
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let (nx, ny) = self.cs.shape();
        for j in 0..ny {
            for i in 0..nx {
                let k = j * nx + i;
                let mut s = (4.0 + self.potential[k]) * x[k];
                if i > 0 {
                    s -= x[k - 1];
                }
                if i + 1 < nx {
                    s -= x[k + 1];
                }
                if j > 0 {
                    s -= x[k - nx];
                }
                if j + 1 < ny {
                    s -= x[k + nx];
                }
                y[k] = s;
            }
        }
    }

    /// Scaled `h² β²` for a transformed eigenvalue `μ = 1/θ`.
    fn lambda_of(&self, mu: f64) -> f64 {
        self.shift - mu
    }

    fn relative_residual(&self, v: &[f64], mu: f64, scratch: &mut [f64]) -> f64 {
        self.apply(v, scratch);
        let mut r2 = 0.0;
        for (a, x) in scratch.iter().zip(v) {
            let r = a - mu * x;
            r2 += r * r;
        }
        let lambda = self.lambda_of(mu).abs();
        r2.sqrt() / (lambda * dot(v, v).sqrt())
    }
}

/// Krylov dimension before a Ritz value below cutoff ends a run.
const MIN_CUTOFF_KRYLOV: usize = 20;

struct RitzPair {
    mu: f64,
    vector: Vec<f64>,
    residual: f64,
}

/// Solves for up to `n_modes` guided modes in strictly decreasing `n_eff`.
pub fn solve_modes(cs: &CrossSection, n_modes: usize) -> Result<Vec<GuidedMode>> {
    solve_modes_with(cs, n_modes, &SolverSettings::default())
}

pub fn solve_modes_with(
    cs: &CrossSection,
    n_modes: usize,
    settings: &SolverSettings,
) -> Result<Vec<GuidedMode>> {
    if n_modes == 0 {
        return Err(Error::invalid("n_modes", "must be at least 1"));
    }
    if settings.max_krylov < 2 || settings.check_interval == 0 {
        return Err(Error::invalid("solver", "max_krylov >= 2 and check_interval >= 1 required"));
    }
    let op = ShiftedOperator::new(cs);
    let (nx, ny) = cs.shape();
    let n = nx * ny;
    let factor = BandCholesky::factor(n, nx, |i, j| op.entry(i, j))?;

    let k0 = cs.wavenumber();
    let h2 = cs.cell_area();
    let n_m = cs.geometry().background_index;
    // Scaled cutoff in μ: guided iff μ < h²(σ − k₀² n_m²).
    let mu_cut = op.shift - h2 * (k0 * n_m).powi(2);

    let mut rng = ChaCha8Rng::from_seed(cs.digest());
    let mut accepted: Vec<RitzPair> = Vec::new();
    let max_runs = 2 * n_modes + 4;
    for run in 0..max_runs {
        let need = if run == 0 { n_modes } else { 1 };
        let pairs = lanczos_run(
            &op,
            &factor,
            &accepted,
            need,
            mu_cut,
            settings,
            &mut rng,
        )?;
        if run == 0 {
            if pairs.is_empty() {
                return Err(Error::NoGuidedMode);
            }
            accepted.extend(pairs);
            continue;
        }
        // Later runs look for partners of degenerate modes a single Krylov
        // sequence cannot resolve.
        let Some(top) = pairs.into_iter().next() else { break };
        let improves = if accepted.len() < n_modes {
            true
        } else {
            let mut mus: Vec<f64> = accepted.iter().map(|p| p.mu).collect();
            mus.sort_by(f64::total_cmp);
            top.mu < mus[n_modes - 1]
        };
        if !improves {
            break;
        }
        accepted.push(top);
    }
    accepted.sort_by(|a, b| a.mu.total_cmp(&b.mu));
    accepted.truncate(n_modes);

    let modes = accepted
        .into_iter()
        .enumerate()
        .map(|(ordinal, pair)| {
            let beta2 = op.lambda_of(pair.mu) / h2;
            let mut field = pair.vector;
            normalize_field(&mut field, h2);
            GuidedMode {
                ordinal,
                n_eff: beta2.sqrt() / k0,
                wavelength: cs.wavelength(),
                spacing: cs.spacing(),
                nx,
                ny,
                field,
                residual: pair.residual,
            }
        })
        .collect();
    Ok(modes)
}

fn normalize_field(field: &mut [f64], cell_area: f64) {
    let power = dot(field, field) * cell_area;
    let mut peak = 0.0f64;
    for v in field.iter() {
        if v.abs() > peak.abs() {
            peak = *v;
        }
    }
    let scale = peak.signum() / power.sqrt();
    for v in field.iter_mut() {
        *v *= scale;
    }
}

fn orthogonalize(w: &mut [f64], against: impl Iterator<Item = impl AsRef<[f64]>> + Clone) {
    // Two passes of classical Gram-Schmidt keep the basis orthogonal to
    // working precision.
    for _ in 0..2 {
        for q in against.clone() {
            let q = q.as_ref();
            let c = dot(w, q);
            for (x, y) in w.iter_mut().zip(q) {
                *x -= c * y;
            }
        }
    }
}

fn lanczos_run(
    op: &ShiftedOperator<'_>,
    factor: &BandCholesky,
    deflate: &[RitzPair],
    need: usize,
    mu_cut: f64,
    settings: &SolverSettings,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<RitzPair>> {
    let n = op.potential.len();
    let deflation: Vec<Vec<f64>> = deflate
        .iter()
        .map(|p| {
            let norm = dot(&p.vector, &p.vector).sqrt();
            p.vector.iter().map(|x| x / norm).collect()
        })
        .collect();
    let max_m = settings.max_krylov.min(n.saturating_sub(deflation.len()));
    if max_m == 0 {
        return Ok(Vec::new());
    }

    let mut q0: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    orthogonalize(&mut q0, deflation.iter());
    let norm = dot(&q0, &q0).sqrt();
    q0.iter_mut().for_each(|x| *x /= norm);

    let mut basis: Vec<Vec<f64>> = vec![q0];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut scratch = vec![0.0; n];
    let theta_cut = 1.0 / mu_cut;

    loop {
        let m = basis.len();
        let mut w = basis[m - 1].clone();
        factor.solve_in_place(&mut w);
        let a = dot(&w, &basis[m - 1]);
        alpha.push(a);
        orthogonalize(&mut w, deflation.iter().chain(basis.iter()));
        let b = dot(&w, &w).sqrt();

        let exhausted = b <= 1e-14 * a.abs();
        let at_check = m.is_multiple_of(settings.check_interval) || m == max_m || exhausted;
        if at_check && m >= need.min(max_m) {
            let t = tridiagonal(&alpha, &beta);
            let eig = t.symmetric_eigen();
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));

            let mut pairs = Vec::new();
            let mut done = false;
            for &idx in &order {
                let theta = eig.eigenvalues[idx];
                let s = eig.eigenvectors.column(idx);
                let ritz_res = (b * s[m - 1]).abs();
                if theta <= 0.0 {
                    break;
                }
                if theta + ritz_res < theta_cut && m >= MIN_CUTOFF_KRYLOV.min(max_m) {
                    // Remaining spectrum lies below the guided cutoff.
                    done = true;
                    break;
                }
                let mut v = vec![0.0; n];
                for (k, q) in basis.iter().enumerate() {
                    let c = s[k];
                    for (x, y) in v.iter_mut().zip(q) {
                        *x += c * y;
                    }
                }
                let mu = 1.0 / theta;
                let residual = op.relative_residual(&v, mu, &mut scratch);
                if residual >= settings.tolerance {
                    break;
                }
                if mu >= mu_cut {
                    done = true;
                    break;
                }
                pairs.push(RitzPair {
                    mu,
                    vector: v,
                    residual,
                });
                if pairs.len() >= need {
                    done = true;
                    break;
                }
            }
            if done || exhausted {
                return Ok(pairs);
            }
        }
        if m >= max_m {
            return Err(Error::NotConverged { iterations: m });
        }
        beta.push(b);
        w.iter_mut().for_each(|x| *x /= b);
        basis.push(w);
    }
}

fn tridiagonal(alpha: &[f64], beta: &[f64]) -> DMatrix<f64> {
    let m = alpha.len();
    let mut t = DMatrix::zeros(m, m);
    for k in 0..m {
        t[(k, k)] = alpha[k];
        if k + 1 < m {
            t[(k, k + 1)] = beta[k];
            t[(k + 1, k)] = beta[k];
        }
    }
    t
}
