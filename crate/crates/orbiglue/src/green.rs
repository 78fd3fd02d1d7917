//! Flat-model Green's function integrals near a submanifold of codimension `k`.
//!
//! In complex dimension `n` the leading term of the bi-Laplacian Green's
//! function is `c |x - y|^{4-2n}`. Integrating it over a transverse slice
//! `Y ≅ C^{n-k}` at distance `d` gives `Λ(d)`, whose small-`d` behaviour is
//! governed by the Beta integral
//!
//! ```text
//! ∫_0^∞ R^{2n-2k-1} (1 + R²)^{2-n} dR = Γ(n-k) Γ(k-2) / (2 Γ(n-2)).
//! ```
//!
//! The constant `c` is never fixed here; every quantity is stated with `c = 1`.

use crate::quad::{self, QuadError};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GreenError {
    #[error("need n > k > 2 for convergence (2k - 3 > 1 at infinity, n - k > 0 at the origin); got n = {n}, k = {k}")]
    Convergence { n: u32, k: u32 },
    #[error("distance d = {d} outside (0, 1]")]
    Distance { d: f64 },
    #[error("quadrature tolerance must be positive, got {0}")]
    QuadTol(f64),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error("need at least one Monte-Carlo sample")]
    Samples,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GreenParams {
    pub n: u32,
    pub k: u32,
    #[serde(default = "default_tol")]
    pub quad_tol: f64,
}

fn default_tol() -> f64 {
    1e-12
}

impl GreenParams {
    pub fn new(n: u32, k: u32) -> Result<Self, GreenError> {
        let p = GreenParams { n, k, quad_tol: default_tol() };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), GreenError> {
        if self.k <= 2 || self.n <= self.k {
            return Err(GreenError::Convergence { n: self.n, k: self.k });
        }
        if !(self.quad_tol > 0.0) {
            return Err(GreenError::QuadTol(self.quad_tol));
        }
        Ok(())
    }

    /// Complex dimension `n - k` of the slice.
    pub fn m(&self) -> u32 {
        self.n - self.k
    }
}

fn factorial(j: u32) -> BigInt {
    (1..=j).fold(BigInt::from(1), |acc, i| acc * i)
}

/// `Γ(n-k) Γ(k-2) / (2 Γ(n-2))` as an exact rational.
///
/// ```
/// use orbiglue::green::*;
///
/// let p = GreenParams::new(5, 3).unwrap();
/// assert_eq!(beta_integral_rational(&p).unwrap().to_string(), "1/4");
/// assert!((beta_integral_quad(&p).unwrap() - 0.25).abs() < 1e-12);
/// ```
pub fn beta_integral_rational(p: &GreenParams) -> Result<BigRational, GreenError> {
    p.validate()?;
    let num = factorial(p.n - p.k - 1) * factorial(p.k - 3);
    let den = factorial(p.n - 3) * 2;
    Ok(BigRational::new(num, den))
}

pub fn beta_integral_exact(p: &GreenParams) -> Result<f64, GreenError> {
    Ok(beta_integral_rational(p)?.to_f64().expect("ratio of factorials is finite"))
}

/// `sin^{2n-2k-1} θ cos^{2k-5} θ`, the Beta integrand after `R = tan θ`.
fn beta_theta(p: &GreenParams) -> impl Fn(f64) -> f64 {
    let a = 2 * p.m() as i32 - 1;
    let b = 2 * p.k as i32 - 5;
    move |t: f64| t.sin().powi(a) * t.cos().powi(b)
}

/// The Beta integral by adaptive quadrature over `θ ∈ [0, π/2]`.
pub fn beta_integral_quad(p: &GreenParams) -> Result<f64, GreenError> {
    p.validate()?;
    Ok(quad::integrate(beta_theta(p), 0.0, FRAC_PI_2, p.quad_tol)?.value)
}

/// `Vol(S^{2m-1}) = 2π^m / (m-1)!`.
pub fn sphere_volume(m: u32) -> f64 {
    2.0 * PI.powi(m as i32) / factorial(m - 1).to_f64().unwrap()
}

/// `Vol(B^{2m}) = π^m / m!`.
pub fn ball_volume(m: u32) -> f64 {
    PI.powi(m as i32) / factorial(m).to_f64().unwrap()
}

/// `d^{2k-4} Λ(d)`, computed as `Vol(S^{2m-1}) ∫_0^{atan(1/d)} sin^{2m-1} cos^{2k-5} dθ`
/// with the interval split at `θ = π/4`, i.e. at `r = d`.
pub fn lambda_flat_scaled(d: f64, p: &GreenParams) -> Result<f64, GreenError> {
    p.validate()?;
    if !(d > 0.0 && d <= 1.0) {
        return Err(GreenError::Distance { d });
    }
    let f = beta_theta(p);
    let top = (1.0 / d).atan();
    let inner = quad::integrate(&f, 0.0, FRAC_PI_4, 0.5 * p.quad_tol)?.value;
    let outer = if top > FRAC_PI_4 { quad::integrate(&f, FRAC_PI_4, top, 0.5 * p.quad_tol)?.value } else { 0.0 };
    Ok(sphere_volume(p.m()) * (inner + outer))
}

/// `Λ(d) = Vol(S^{2m-1}) ∫_0^1 r^{2m-1} (d² + r²)^{2-n} dr`, the fiber
/// integral of the leading Green kernel over the unit ball of the slice.
pub fn lambda_flat(d: f64, p: &GreenParams) -> Result<f64, GreenError> {
    Ok(lambda_flat_scaled(d, p)? * d.powi(4 - 2 * p.k as i32))
}

/// `lim_{d→0} d^{2k-4} Λ(d) = Vol(S^{2n-2k-1}) · Γ(n-k)Γ(k-2)/(2Γ(n-2)) = π^{n-k} Γ(k-2)/Γ(n-2)`.
pub fn leading_coefficient(p: &GreenParams) -> Result<f64, GreenError> {
    Ok(sphere_volume(p.m()) * beta_integral_exact(p)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MonteCarlo {
    pub estimate: f64,
    pub std_err: f64,
    pub samples: usize,
    pub seed: u64,
}

/// `Λ(d)` by uniform sampling of the unit ball in `R^{2(n-k)}`.
pub fn lambda_flat_monte_carlo(d: f64, p: &GreenParams, samples: usize, seed: u64) -> Result<MonteCarlo, GreenError> {
    p.validate()?;
    if !(d > 0.0 && d <= 1.0) {
        return Err(GreenError::Distance { d });
    }
    if samples == 0 {
        return Err(GreenError::Samples);
    }
    let dim = 2 * p.m() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sum, mut sum2) = (0.0, 0.0);
    let mut y = vec![0.0; dim];
    for _ in 0..samples {
        for c in y.iter_mut() {
            *c = rng.sample(StandardNormal);
        }
        // Gaussian direction, radius with density ∝ r^{dim-1}.
        let scale = rng.random::<f64>().powf(1.0 / dim as f64) / y.iter().map(|c| c * c).sum::<f64>().sqrt();
        let r2: f64 = y.iter().map(|c| (c * scale).powi(2)).sum();
        let v = (d * d + r2).powi(2 - p.n as i32);
        sum += v;
        sum2 += v * v;
    }
    let nf = samples as f64;
    let mean = sum / nf;
    let var = (sum2 / nf - mean * mean).max(0.0);
    let vol = ball_volume(p.m());
    Ok(MonteCarlo { estimate: vol * mean, std_err: vol * (var / nf).sqrt(), samples, seed })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub n: u32,
    pub k: u32,
    pub exact: f64,
    pub quad: f64,
    pub abs_err: f64,
}

/// The Beta identity for every `3 <= k < n <= n_max`.
pub fn identity_table(n_max: u32, quad_tol: f64) -> Result<Vec<IdentityCheck>, GreenError> {
    let mut out = Vec::new();
    for n in 4..=n_max {
        for k in 3..n {
            let p = GreenParams { n, k, quad_tol };
            let exact = beta_integral_exact(&p)?;
            let quad = beta_integral_quad(&p)?;
            out.push(IdentityCheck { n, k, exact, quad, abs_err: (exact - quad).abs() });
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GreenRow {
    pub n: u32,
    pub k: u32,
    pub d: f64,
    pub lambda_flat: f64,
    pub scaled: f64,
}

pub fn lambda_sweep(p: &GreenParams, ds: &[f64]) -> Result<Vec<GreenRow>, GreenError> {
    ds.iter()
        .map(|&d| {
            let scaled = lambda_flat_scaled(d, p)?;
            Ok(GreenRow { n: p.n, k: p.k, d, lambda_flat: scaled * d.powi(4 - 2 * p.k as i32), scaled })
        })
        .collect()
}

pub fn sweep_to_csv(rows: &[GreenRow]) -> String {
    let mut out = String::from("n,k,d,lambda_flat,scaled\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{},{}\n", r.n, r.k, r.d, r.lambda_flat, r.scaled));
    }
    out
}

/// `Γ(x) = -(Vol X / Vol Y) λ Λ(x)`, the correction that makes the
/// leading error term orthogonal to constants.
pub fn gamma_correction(vol_x: f64, vol_y: f64, lambda: f64, big_lambda: f64) -> f64 {
    -(vol_x / vol_y) * lambda * big_lambda
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_cases() {
        let p = GreenParams::new(4, 3).unwrap();
        assert_eq!(beta_integral_exact(&p).unwrap(), 0.5);
        assert!((leading_coefficient(&p).unwrap() - PI).abs() < 1e-14);
        assert!(matches!(GreenParams::new(5, 2), Err(GreenError::Convergence { .. })));
        assert!(matches!(GreenParams::new(3, 3), Err(GreenError::Convergence { .. })));
    }

    #[test]
    fn scaled_at_one_is_half_the_quarter_circle() {
        // n = 4, k = 3: ∫_0^{π/4} sin θ cos θ dθ = 1/4.
        let p = GreenParams::new(4, 3).unwrap();
        assert!((lambda_flat_scaled(1.0, &p).unwrap() - 2.0 * PI * 0.25).abs() < 1e-12);
    }
}
