//! U(k)-invariant Kähler metrics on C^k.
//!
//! A potential `H(s)` with `s = |z|^2` gives `g_{ij̄} = H' δ_ij + H'' z̄_i z_j`
//! (with `ω = i∂∂̄H`). The metric has eigenvalue `H'` on the complex
//! tangent directions of the sphere (multiplicity `k-1`) and `H' + sH''`
//! in the radial direction. Scalar curvature is `S = 2 g^{ij̄} ρ_{ij̄}` with
//! `ρ = -i∂∂̄ log det g`.

use crate::jet::Jet;
use crate::linalg::{fd_weights, lstsq, ComplexLu};
use crate::ode::{self, OdeError, Tolerance};
use crate::quad;
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RadialError {
    #[error("complex dimension k = {k} is not supported (need k >= 2)")]
    InvalidK { k: usize },
    #[error("{form} potential requires {need}, got k = {k}")]
    FormDimension { form: &'static str, need: &'static str, k: usize },
    #[error("s = {s} is outside the domain of the potential")]
    OutsideDomain { s: f64 },
    #[error("metric degenerates at s = {s}")]
    Degenerate { s: f64 },
    #[error("finite-difference stencil around s = {s} leaves the domain of positivity")]
    Stencil { s: f64 },
    #[error("point has {got} complex coordinates, expected {k}")]
    PointDimension { got: usize, k: usize },
    #[error("bad sample grid: {0}")]
    Grid(String),
    #[error("ill-conditioned fit: {0}")]
    IllConditioned(String),
    #[error("fit residual {residual:e} above threshold {threshold:e}")]
    FitResidual { residual: f64, threshold: f64 },
    #[error("integration failed: {0}")]
    Solver(String),
}

/// Anything that supplies `H, H', H'', H''', H''''` at a radius-squared `s`.
pub trait Potential {
    fn k(&self) -> usize;
    fn derivs(&self, s: f64) -> Result<[f64; 5], RadialError>;

    /// The two eigenvalue functions `P = H'` and `Q = H' + sH''` with their
    /// first two derivatives. Override when `Q` is known without the
    /// cancellation in `H' + sH''`.
    fn eigen_jets(&self, s: f64) -> Result<([f64; 3], [f64; 3]), RadialError> {
        Ok(eigen_from_derivs(s, &self.derivs(s)?))
    }
}

/// `(P, P', P'')` and `(Q, Q', Q'')` from `[H, …, H'''']`.
pub fn eigen_from_derivs(s: f64, d: &[f64; 5]) -> ([f64; 3], [f64; 3]) {
    let p = [d[1], d[2], d[3]];
    let q = [d[1] + s * d[2], 2.0 * d[2] + s * d[3], 3.0 * d[3] + s * d[4]];
    (p, q)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Form {
    Flat,
    TruncatedAle { a: f64 },
    LogAle { a: f64 },
    FubiniLike,
    Sampled(SampledPotential),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RadialPotential {
    k: usize,
    form: Form,
}

fn check_k(k: usize) -> Result<(), RadialError> {
    if k < 2 {
        Err(RadialError::InvalidK { k })
    } else {
        Ok(())
    }
}

impl RadialPotential {
    /// `H = s/2`.
    pub fn flat(k: usize) -> Result<Self, RadialError> {
        check_k(k)?;
        Ok(RadialPotential { k, form: Form::Flat })
    }

    /// `H = s/2 + a s^{2-k}`, `k >= 3`.
    pub fn truncated_ale(k: usize, a: f64) -> Result<Self, RadialError> {
        check_k(k)?;
        if k == 2 {
            return Err(RadialError::FormDimension { form: "truncated ALE", need: "k >= 3", k });
        }
        Ok(RadialPotential { k, form: Form::TruncatedAle { a } })
    }

    /// `H = s/2 + a log s`, `k = 2` only.
    pub fn log_ale(k: usize, a: f64) -> Result<Self, RadialError> {
        check_k(k)?;
        if k != 2 {
            return Err(RadialError::FormDimension { form: "log ALE", need: "k = 2", k });
        }
        Ok(RadialPotential { k, form: Form::LogAle { a } })
    }

    /// `H = log(1 + s)`.
    pub fn fubini_like(k: usize) -> Result<Self, RadialError> {
        check_k(k)?;
        Ok(RadialPotential { k, form: Form::FubiniLike })
    }

    pub fn sampled(k: usize, samples: SampledPotential) -> Result<Self, RadialError> {
        check_k(k)?;
        Ok(RadialPotential { k, form: Form::Sampled(samples) })
    }

    pub fn form(&self) -> &Form {
        &self.form
    }

    /// Closed interval of admissible `s`; the lower end is open for forms
    /// singular at the origin.
    pub fn domain(&self) -> (f64, f64, bool) {
        match &self.form {
            Form::Flat | Form::FubiniLike => (0.0, f64::INFINITY, false),
            Form::TruncatedAle { .. } | Form::LogAle { .. } => (0.0, f64::INFINITY, true),
            Form::Sampled(p) => (p.s[0], *p.s.last().unwrap(), false),
        }
    }

    pub fn contains(&self, s: f64) -> bool {
        let (lo, hi, open) = self.domain();
        s.is_finite() && s <= hi && (s > lo || (!open && s == lo))
    }

    /// Jet of the potential at `s` for the closed forms.
    pub fn jet(&self, s: f64) -> Result<Jet, RadialError> {
        if !self.contains(s) {
            return Err(RadialError::OutsideDomain { s });
        }
        let x = Jet::var(s);
        Ok(match &self.form {
            Form::Flat => x.scale(0.5),
            Form::TruncatedAle { a } => x.scale(0.5) + x.powf(2.0 - self.k as f64).scale(*a),
            Form::LogAle { a } => x.scale(0.5) + x.ln().scale(*a),
            Form::FubiniLike => (x + 1.0).ln(),
            Form::Sampled(p) => Jet::from_derivs(p.eval(s)?),
        })
    }
}

impl Potential for RadialPotential {
    fn k(&self) -> usize {
        self.k
    }

    fn derivs(&self, s: f64) -> Result<[f64; 5], RadialError> {
        Ok(self.jet(s)?.derivs())
    }
}

/// `(λ_tangent, λ_radial) = (H', H' + sH'')`.
pub fn metric_eigenvalues<P: Potential + ?Sized>(h: &P, s: f64) -> Result<(f64, f64), RadialError> {
    let (p, q) = h.eigen_jets(s)?;
    Ok((p[0], q[0]))
}

/// `det g = H'^{k-1} (H' + sH'')`.
pub fn det_metric<P: Potential + ?Sized>(h: &P, s: f64) -> Result<f64, RadialError> {
    let (t, r) = metric_eigenvalues(h, s)?;
    Ok(t.powi(h.k() as i32 - 1) * r)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    FiniteDifference,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurvatureSample {
    pub s: f64,
    pub value: f64,
    pub method: Method,
}

/// Scalar curvature from the derivatives `d = [H, H', H'', H''', H'''']`.
///
/// With `P = H'`, `Q = P + sP'` and `F = (k-1) log P + log Q`,
/// `S = -2 [ (k-1) F'/P + (F' + s F'')/Q ]`.
pub fn curvature_from_derivs(k: usize, s: f64, d: &[f64; 5]) -> Result<f64, RadialError> {
    let (p, q) = eigen_from_derivs(s, d);
    curvature_from_eigen(k, s, &p, &q)
}

/// The same formula from `(P, P', P'')` and `(Q, Q', Q'')`.
pub fn curvature_from_eigen(k: usize, s: f64, pj: &[f64; 3], qj: &[f64; 3]) -> Result<f64, RadialError> {
    let [p, p1, p2] = *pj;
    let [q, q1, q2] = *qj;
    if !(p > 0.0 && q > 0.0) {
        return Err(RadialError::Degenerate { s });
    }
    let km1 = k as f64 - 1.0;
    let f1 = km1 * p1 / p + q1 / q;
    let f2 = km1 * (p2 / p - (p1 / p).powi(2)) + q2 / q - (q1 / q).powi(2);
    Ok(-2.0 * (km1 * f1 / p + (f1 + s * f2) / q))
}

pub fn scalar_curvature<P: Potential + ?Sized>(h: &P, s: f64) -> Result<CurvatureSample, RadialError> {
    let (p, q) = h.eigen_jets(s)?;
    let value = curvature_from_eigen(h.k(), s, &p, &q)?;
    Ok(CurvatureSample { s, value, method: Method::ClosedForm })
}

/// Default finite-difference step at a point of norm `r`.
pub fn default_step(r: f64) -> f64 {
    1e-3 * (1.0 + r)
}

/// Independent oracle: assembles the Hermitian matrix `g_{ij̄}` at stencil
/// points, takes `log det g`, forms `ρ_{ij̄} = -∂_i∂_j̄ log det g` by fourth
/// order central differences in the `2k` real coordinates and contracts
/// with the inverse metric. `h = None` uses [`default_step`].
pub fn scalar_curvature_fd<P: Potential + ?Sized>(
    pot: &P,
    z: &[Complex64],
    h: Option<f64>,
) -> Result<CurvatureSample, RadialError> {
    let k = pot.k();
    if z.len() != k {
        return Err(RadialError::PointDimension { got: z.len(), k });
    }
    let s0: f64 = z.iter().map(|w| w.norm_sqr()).sum();
    let h = h.unwrap_or_else(|| default_step(s0.sqrt()));
    let base: Vec<f64> = z.iter().flat_map(|w| [w.re, w.im]).collect();

    let metric = |x: &[f64]| -> Result<Vec<Vec<Complex64>>, RadialError> {
        let zz: Vec<Complex64> = x.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect();
        let s: f64 = zz.iter().map(|w| w.norm_sqr()).sum();
        let d = pot.derivs(s).map_err(|_| RadialError::Stencil { s: s0 })?;
        if !(d[1] > 0.0 && d[1] + s * d[2] > 0.0) {
            return Err(RadialError::Stencil { s: s0 });
        }
        Ok((0..k)
            .map(|i| {
                (0..k)
                    .map(|j| {
                        let delta = if i == j { d[1] } else { 0.0 };
                        Complex64::new(delta, 0.0) + zz[i].conj() * zz[j] * d[2]
                    })
                    .collect()
            })
            .collect())
    };
    let logdet = |x: &[f64]| -> Result<f64, RadialError> {
        let lu = ComplexLu::new(metric(x)?).ok_or(RadialError::Stencil { s: s0 })?;
        Ok(lu.det().re.ln())
    };

    const OFF: [f64; 4] = [-2.0, -1.0, 1.0, 2.0];
    const W1: [f64; 4] = [1.0 / 12.0, -8.0 / 12.0, 8.0 / 12.0, -1.0 / 12.0];
    let n = 2 * k;
    let f0 = logdet(&base)?;
    let mut hess = vec![vec![0.0; n]; n];
    for a in 0..n {
        // Stencil weights sum to zero, so differencing against f0 keeps a
        // constant log det exactly zero.
        let mut acc = 0.0;
        for (o, w) in OFF.iter().zip([-1.0, 16.0, 16.0, -1.0]) {
            let mut x = base.clone();
            x[a] += o * h;
            acc += w * (logdet(&x)? - f0);
        }
        hess[a][a] = acc / (12.0 * h * h);
        for b in a + 1..n {
            let mut acc = 0.0;
            for (oa, wa) in OFF.iter().zip(W1) {
                for (ob, wb) in OFF.iter().zip(W1) {
                    let mut x = base.clone();
                    x[a] += oa * h;
                    x[b] += ob * h;
                    acc += wa * wb * (logdet(&x)? - f0);
                }
            }
            hess[a][b] = acc / (h * h);
            hess[b][a] = hess[a][b];
        }
    }
    // ∂_i ∂_j̄ f = ¼ [f_{x_i x_j} + f_{y_i y_j} + i (f_{x_i y_j} - f_{y_i x_j})]
    let ricci: Vec<Vec<Complex64>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    let (xi, yi, xj, yj) = (2 * i, 2 * i + 1, 2 * j, 2 * j + 1);
                    let re = hess[xi][xj] + hess[yi][yj];
                    let im = hess[xi][yj] - hess[yi][xj];
                    -0.25 * Complex64::new(re, im)
                })
                .collect()
        })
        .collect();
    let g = metric(&base)?;
    let inv = ComplexLu::new(g).ok_or(RadialError::Degenerate { s: s0 })?.inverse();
    let mut tr = Complex64::new(0.0, 0.0);
    for i in 0..k {
        for j in 0..k {
            tr += inv[j][i] * ricci[i][j];
        }
    }
    Ok(CurvatureSample { s: s0, value: 2.0 * tr.re, method: Method::FiniteDifference })
}

/// One row of a curvature sweep along `z = (√s, 0, …, 0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub s: f64,
    pub closed: f64,
    pub fd: f64,
}

pub fn curvature_sweep<P: Potential + ?Sized>(pot: &P, grid: &[f64]) -> Result<Vec<SweepRow>, RadialError> {
    grid.iter()
        .map(|&s| {
            let mut z = vec![Complex64::new(0.0, 0.0); pot.k()];
            z[0] = Complex64::new(s.sqrt(), 0.0);
            let closed = scalar_curvature(pot, s)?.value;
            let fd = scalar_curvature_fd(pot, &z, None)?.value;
            Ok(SweepRow { s, closed, fd })
        })
        .collect()
}

pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("s,S_closed,S_fd\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.s, r.closed, r.fd));
    }
    out
}

/// A potential known on a grid through `H, H', H''` (and optionally
/// `H'''`, `H''''`). Missing third and fourth derivatives are estimated by
/// seven-point finite differences of `H''`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledPotential {
    s: Vec<f64>,
    cols: [Vec<f64>; 5],
}

const STENCIL: usize = 7;

impl SampledPotential {
    pub fn new(s: Vec<f64>, h: Vec<f64>, dh: Vec<f64>, ddh: Vec<f64>) -> Result<Self, RadialError> {
        check_grid(&s, &[&h, &dh, &ddh])?;
        let n = s.len();
        let mut d3 = vec![0.0; n];
        let mut d4 = vec![0.0; n];
        for j in 0..n {
            let lo = j.saturating_sub(STENCIL / 2).min(n - STENCIL);
            let w = fd_weights(s[j], &s[lo..lo + STENCIL], 2);
            d3[j] = (0..STENCIL).map(|i| w[1][i] * ddh[lo + i]).sum();
            d4[j] = (0..STENCIL).map(|i| w[2][i] * ddh[lo + i]).sum();
        }
        Ok(SampledPotential { s, cols: [h, dh, ddh, d3, d4] })
    }

    /// All five derivative columns supplied.
    pub fn with_derivatives(s: Vec<f64>, cols: [Vec<f64>; 5]) -> Result<Self, RadialError> {
        check_grid(&s, &cols.iter().collect::<Vec<_>>())?;
        Ok(SampledPotential { s, cols })
    }

    /// Samples a potential at the grid points.
    pub fn from_potential<P: Potential + ?Sized>(pot: &P, grid: &[f64]) -> Result<Self, RadialError> {
        let mut cols: [Vec<f64>; 5] = Default::default();
        for &s in grid {
            let d = pot.derivs(s)?;
            for (c, v) in cols.iter_mut().zip(d) {
                c.push(v);
            }
        }
        Self::with_derivatives(grid.to_vec(), cols)
    }

    pub fn grid(&self) -> &[f64] {
        &self.s
    }

    /// Column `i` holds the `i`-th derivative.
    pub fn column(&self, i: usize) -> &[f64] {
        &self.cols[i]
    }

    /// Derivatives at `s`. `H`, `H'` and `H''` each come from a quintic
    /// Hermite interpolant of the column and its next two derivatives; the
    /// `H''` interpolant also supplies `H'''` and `H''''`.
    pub fn eval(&self, s: f64) -> Result<[f64; 5], RadialError> {
        let n = self.s.len();
        if !(s >= self.s[0] && s <= self.s[n - 1]) {
            return Err(RadialError::OutsideDomain { s });
        }
        let j = match self.s.partition_point(|&x| x <= s) {
            0 => 0,
            p => (p - 1).min(n - 2),
        };
        let dx = self.s[j + 1] - self.s[j];
        let t = Jet::var((s - self.s[j]) / dx);
        let c = &self.cols;
        let quintic = |m: usize| {
            let (f0, d0, e0) = (c[m][j], c[m + 1][j] * dx, c[m + 2][j] * dx * dx);
            let (f1, d1, e1) = (c[m][j + 1], c[m + 1][j + 1] * dx, c[m + 2][j + 1] * dx * dx);
            let t2 = t * t;
            let t3 = t2 * t;
            let t4 = t3 * t;
            let t5 = t4 * t;
            let b0 = t3 * -10.0 + t4 * 15.0 - t5 * 6.0 + 1.0;
            let b1 = t - t3 * 6.0 + t4 * 8.0 - t5 * 3.0;
            let b2 = (t2 - t3 * 3.0 + t4 * 3.0 - t5).scale(0.5);
            let b5 = t3 * 10.0 - t4 * 15.0 + t5 * 6.0;
            let b4 = t3 * -4.0 + t4 * 7.0 - t5 * 3.0;
            let b3 = (t3 - t4 * 2.0 + t5).scale(0.5);
            (b0 * f0 + b1 * d0 + b2 * e0 + b5 * f1 + b4 * d1 + b3 * e1).derivs()
        };
        let h = quintic(0)[0];
        let p = quintic(1)[0];
        let r = quintic(2);
        Ok([h, p, r[0], r[1] / dx, r[2] / (dx * dx)])
    }

    /// CSV with columns `s,H,dH,d2H`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,H,dH,d2H\n");
        for j in 0..self.s.len() {
            out.push_str(&format!("{},{},{},{}\n", self.s[j], self.cols[0][j], self.cols[1][j], self.cols[2][j]));
        }
        out
    }
}

fn check_grid(s: &[f64], cols: &[&Vec<f64>]) -> Result<(), RadialError> {
    if s.len() < STENCIL {
        return Err(RadialError::Grid(format!("need at least {STENCIL} points, got {}", s.len())));
    }
    if cols.iter().any(|c| c.len() != s.len()) {
        return Err(RadialError::Grid("column lengths differ from grid length".into()));
    }
    if s.iter().chain(cols.iter().flat_map(|c| c.iter())).any(|v| !v.is_finite()) || s[0] < 0.0 {
        return Err(RadialError::Grid("non-finite or negative entries".into()));
    }
    let max_ratio = 10f64.powf(0.25);
    for w in s.windows(2) {
        if w[1] <= w[0] {
            return Err(RadialError::Grid(format!("not strictly increasing at s = {}", w[1])));
        }
        if w[0] > 0.0 && w[1] / w[0] > max_ratio * (1.0 + 1e-12) {
            return Err(RadialError::Grid(format!("fewer than 4 points per decade near s = {}", w[0])));
        }
    }
    Ok(())
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i == 0 {
                lo
            } else if i + 1 == n {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FitResult {
    /// Coefficient of `s^{2-k}` (or of `log s` when `k = 2`).
    pub a: f64,
    /// Additive constant; potentials are only defined up to one.
    pub constant: f64,
    pub residual_sup: f64,
    /// `sup |residual| / s^{2-k}` over the window.
    pub residual_rel: f64,
    pub window: (f64, f64),
}

/// Least-squares fit of `H - s/2` against `{1, s^{2-k}}` (or `{1, log s}`
/// for `k = 2`) on the outer half of the grid.
pub fn fit_expansion(h: &SampledPotential, k: usize) -> Result<FitResult, RadialError> {
    check_k(k)?;
    let n = h.s.len();
    let lo = n / 2;
    let s = &h.s[lo..];
    let (s_lo, s_hi) = (s[0], s[s.len() - 1]);
    if s.len() < 4 || s_lo <= 0.0 || s_hi / s_lo < 10.0 * (1.0 - 1e-12) {
        return Err(RadialError::IllConditioned(format!(
            "outer window [{s_lo}, {s_hi}] must contain 4 points and span a decade"
        )));
    }
    let basis = |x: f64| if k == 2 { x.ln() } else { x.powi(2 - k as i32) };
    let y: Vec<f64> = (lo..n).map(|j| h.cols[0][j] - 0.5 * h.s[j]).collect();
    let b: Vec<f64> = s.iter().map(|&x| basis(x)).collect();
    let c = lstsq(&[vec![1.0; s.len()], b.clone()], &y)
        .ok_or_else(|| RadialError::IllConditioned("basis columns are dependent on the window".into()))?;
    let mut sup = 0.0f64;
    let mut rel = 0.0f64;
    for i in 0..s.len() {
        let r = (y[i] - c[0] - c[1] * b[i]).abs();
        sup = sup.max(r);
        rel = rel.max(r / s[i].powi(2 - k as i32));
    }
    Ok(FitResult { a: c[1], constant: c[0], residual_sup: sup, residual_rel: rel, window: (s_lo, s_hi) })
}

/// Data at the inner radius. The scalar-flat equation is fourth order in
/// `H`, so besides `H, H', H''` it needs the conserved flux
/// `a = s^k H'^{k-1} F'(s)` (zero for the flat metric).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InnerData {
    pub s0: f64,
    pub h: f64,
    pub dh: f64,
    pub ddh: f64,
    pub flux: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    pub points_per_decade: usize,
    pub tol: Tolerance,
    /// Maximum `residual_rel` accepted from the fit.
    pub fit_threshold: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { points_per_decade: 200, tol: Tolerance::default(), fit_threshold: 1e3 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlatSolution {
    /// Normalized so that `H' -> 1/2`.
    pub potential: RadialPotential,
    pub fit: FitResult,
    /// `lim H'` before normalization.
    pub slope: f64,
    /// Flux after normalization.
    pub flux: f64,
    /// Conserved `b = x^{k-1}ψ - x^k - a x` of the unnormalized solution.
    pub invariant: f64,
    /// Largest relative drift of `b` along the grid.
    pub invariant_drift: f64,
}

impl FlatSolution {
    pub fn potential_grid(&self) -> &[f64] {
        match self.potential.form() {
            Form::Sampled(p) => p.grid(),
            _ => unreachable!("solver output is sampled"),
        }
    }
}

// Reduction used by the solver.
//
// Write P = H', Q = P + sP' and t = log s. The moment coordinate x = sP and
// ψ = dx/dt = sQ turn the curvature into
//     S = -(2 / x^{k-1}) [ (x^{k-1} ψ)_xx - k(k-1) x^{k-2} ],
// so S = 0 integrates twice to ψ = x + a x^{2-k} + b x^{1-k}. The first
// integration constant is
//     a = s^k P^{k-1} F'(s),   F = (k-1) log P + log Q,
// which, solved for P'' through Q' = 2P' + sP'', gives the second order
// equation
//     s P'' = (a s^{-k} P^{1-k} - (k-1) P'/P) Q - 2P'.
// We integrate (H - sP, P, P') in t with this right-hand side (the first
// component tends to a constant, which keeps H accurate at large s); b is checked as a
// conserved quantity, and P''' follows by differentiating the same relation.
fn second(k: f64, a: f64, s: f64, p: f64, p1: f64) -> f64 {
    let q = p + s * p1;
    ((a * s.powf(-k) * p.powf(1.0 - k) - (k - 1.0) * p1 / p) * q - 2.0 * p1) / s
}

fn third(k: f64, a: f64, s: f64, p: f64, p1: f64, p2: f64) -> f64 {
    let q = p + s * p1;
    let q1 = 2.0 * p1 + s * p2;
    let u = a * s.powf(-k) * p.powf(1.0 - k) - (k - 1.0) * p1 / p;
    let u1 = a * (-k * s.powf(-k - 1.0) * p.powf(1.0 - k) + (1.0 - k) * s.powf(-k) * p.powf(-k) * p1)
        - (k - 1.0) * (p2 / p - (p1 / p).powi(2));
    let n1 = u1 * q + u * q1 - 2.0 * p2;
    (n1 - p2) / s
}

fn invariant_b(k: usize, a: f64, s: f64, p: f64, p1: f64) -> f64 {
    let x = s * p;
    let psi = s * (p + s * p1);
    x.powi(k as i32 - 1) * psi - x.powi(k as i32) - a * x
}

/// Integrates the scalar-flat equation outward from the inner data to
/// `s_max`, normalizes `H' -> 1/2` and fits the ALE coefficient.
pub fn solve_scalar_flat(
    k: usize,
    inner: InnerData,
    s_max: f64,
    opts: SolveOptions,
) -> Result<FlatSolution, RadialError> {
    check_k(k)?;
    let InnerData { s0, h: h0, dh: p0, ddh: p10, flux: a } = inner;
    if !(s0 > 0.0 && s0.is_finite()) {
        return Err(RadialError::Grid(format!("inner radius s0 = {s0} must be positive")));
    }
    if !(s_max >= 100.0 * s0 && s_max.is_finite()) {
        return Err(RadialError::Grid(format!("s_max = {s_max} must be at least 100 s0")));
    }
    if !(p0 > 0.0 && p0 + s0 * p10 > 0.0) {
        return Err(RadialError::Degenerate { s: s0 });
    }
    let kf = k as f64;
    let decades = (s_max / s0).log10();
    let n = (decades * opts.points_per_decade as f64).ceil() as usize + 1;
    let grid = log_grid(s0, s_max, n.max(STENCIL));
    let ts: Vec<f64> = grid.iter().map(|s| s.ln()).collect();
    let rhs = |t: f64, y: &[f64; 3]| -> Result<[f64; 3], String> {
        let s = t.exp();
        let (p, p1) = (y[1], y[2]);
        if !(p > 0.0 && p + s * p1 > 0.0) {
            return Err("metric degenerates".into());
        }
        Ok([-s * s * p1, s * p1, s * second(kf, a, s, p, p1)])
    };
    let states = ode::integrate(rhs, ts[0], [h0 - s0 * p0, p0, p10], &ts[1..], opts.tol).map_err(|e| match e {
        OdeError::Rhs { t, .. } | OdeError::StepUnderflow { t } => RadialError::Degenerate { s: t.exp() },
        other => RadialError::Solver(other.to_string()),
    })?;
    let mut rows = vec![[h0, p0, p10]];
    rows.extend(grid[1..].iter().zip(states).map(|(s, y)| [y[0] + s * y[1], y[1], y[2]]));

    let b = invariant_b(k, a, s0, p0, p10);
    let mut drift = 0.0f64;
    for (s, y) in grid.iter().zip(&rows) {
        let bj = invariant_b(k, a, *s, y[1], y[2]);
        let scale = b.abs() + (s * y[1]).powi(k as i32);
        drift = drift.max((bj - b).abs() / scale);
    }

    // log C = log x0 - t0 + ∫_{x0}^∞ (1/ξ - 1/ψ(ξ)) dξ, with ξ = x0/u.
    let x0 = s0 * p0;
    let psi = |x: f64| x + a * x.powi(2 - k as i32) + b * x.powi(1 - k as i32);
    let integrand = |u: f64| {
        let x = x0 / u;
        let ps = psi(x);
        if ps <= 0.0 {
            return f64::NAN;
        }
        (1.0 / x - 1.0 / ps) * x0 / (u * u)
    };
    let q = quad::integrate(integrand, 0.0, 1.0, 1e-13).map_err(|e| RadialError::Solver(e.to_string()))?;
    let slope = (x0.ln() - s0.ln() + q.value).exp();
    let lam = 0.5 / slope;

    let mut cols: [Vec<f64>; 5] = Default::default();
    for (s, y) in grid.iter().zip(&rows) {
        let p2 = second(kf, a, *s, y[1], y[2]);
        let p3 = third(kf, a, *s, y[1], y[2], p2);
        for (c, v) in cols.iter_mut().zip([y[0], y[1], y[2], p2, p3]) {
            c.push(lam * v);
        }
    }
    let sampled = SampledPotential::with_derivatives(grid, cols)?;
    let fit = fit_expansion(&sampled, k)?;
    if !(fit.residual_rel <= opts.fit_threshold) {
        return Err(RadialError::FitResidual { residual: fit.residual_rel, threshold: opts.fit_threshold });
    }
    Ok(FlatSolution {
        potential: RadialPotential::sampled(k, sampled)?,
        fit,
        slope,
        flux: a * lam.powi(k as i32 - 1),
        invariant: b,
        invariant_drift: drift,
    })
}

/// Euclidean Laplacian of a radial function on C^k: `Δu = 4(s u'' + k u')`.
pub fn laplacian_radial<F: Fn(Jet) -> Jet>(u: F, k: usize, s: f64) -> f64 {
    let d = u(Jet::var(s)).derivs();
    4.0 * (s * d[2] + k as f64 * d[1])
}

/// `Δ(Δu)` for a radial `u`.
pub fn biharmonic_radial<F: Fn(Jet) -> Jet>(u: F, k: usize, s: f64) -> f64 {
    let d = u(Jet::var(s)).derivs();
    let kf = k as f64;
    let v1 = 4.0 * (s * d[3] + (kf + 1.0) * d[2]);
    let v2 = 4.0 * (s * d[4] + (kf + 2.0) * d[3]);
    4.0 * (s * v2 + kf * v1)
}
