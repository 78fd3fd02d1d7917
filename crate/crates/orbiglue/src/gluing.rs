//! The glued family on the flat model `C^k/Γ`.
//!
//! Near the singular point the flat potential `s/2` is corrected by a
//! rescaled ALE potential, cut off at `d = |z| ~ r_ε`:
//!
//! `Φ(s) = s/2 + ε² γ₁(d / r_ε) g(s / ε²)`,   `r_ε = ε^{2k/(2k+1)}`,
//!
//! where `g = H_ALE - σ/2` is the deviation of a unit-scale ALE potential
//! from flat. [`Profile::Truncated`] uses the leading term alone,
//! `g(σ) = A σ^{2-k}` (or `(A/2) log σ` when `k = 2`). [`Profile::Smooth`]
//! uses a complete scalar-flat metric on `O(-m)` whose expansion at
//! infinity has the same leading term (see [`SmoothProfile`]).
//!
//! The truncated potential is not a metric near `d ~ ε`: for `k = 3` its
//! tangential eigenvalue is `1/2 - A(ε/d)^4`.

use crate::jet::Jet;
use crate::ode::{self, Tolerance};
use crate::radial::{self, log_grid, Potential, RadialError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GluingError {
    #[error("invalid gluing configuration: {0}")]
    Config(String),
    #[error("d = {d} is below the model domain d >= eps/10 = {min}")]
    OutsideModel { d: f64, min: f64 },
    #[error("glued metric degenerates at d = {d}")]
    Degenerate { d: f64 },
    #[error("smooth profile construction failed: {0}")]
    Profile(String),
    #[error("rate fit needs at least 4 points with positive values: {0}")]
    RateFit(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    #[default]
    Truncated,
    Smooth,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ThreeRegion,
    FourRegion,
}

fn default_cutoff() -> f64 {
    1.0
}

fn default_ppd() -> usize {
    32
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GluingConfig {
    pub k: usize,
    pub eps: f64,
    #[serde(rename = "A")]
    pub a: f64,
    /// Weight exponent; defaults to `4 - 2k + 0.1` (and `-0.1` for `k = 2`).
    #[serde(default)]
    pub delta: Option<f64>,
    /// Sharpness `σ` of the transition `exp(-σ/t)` in the cutoff.
    #[serde(default = "default_cutoff")]
    pub cutoff: f64,
    #[serde(default = "default_ppd")]
    pub points_per_decade: usize,
    #[serde(default)]
    pub profile: Profile,
    /// Order `m` of the cap `O(-m)` for the smooth profile; defaults to 1
    /// when `A < 0` and `k + 1` when `A > 0`.
    #[serde(default)]
    pub cap_order: Option<u32>,
}

impl GluingConfig {
    pub fn new(k: usize, eps: f64, a: f64) -> Self {
        GluingConfig {
            k,
            eps,
            a,
            delta: None,
            cutoff: 1.0,
            points_per_decade: 32,
            profile: Profile::Truncated,
            cap_order: None,
        }
    }

    pub fn with_eps(&self, eps: f64) -> Self {
        GluingConfig { eps, ..self.clone() }
    }

    pub fn r_eps(&self) -> f64 {
        r_eps(self.k, self.eps)
    }

    pub fn delta(&self) -> f64 {
        self.delta.unwrap_or(if self.k == 2 { -0.1 } else { 4.0 - 2.0 * self.k as f64 + 0.1 })
    }

    pub fn cap_order(&self) -> u32 {
        self.cap_order.unwrap_or(if self.a < 0.0 { 1 } else { self.k as u32 + 1 })
    }

    pub fn validate(&self) -> Result<(), GluingError> {
        let bad = |m: String| Err(GluingError::Config(m));
        if self.k < 2 {
            return bad(format!("k = {} must be at least 2", self.k));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return bad(format!("eps = {} must lie in (0, 1)", self.eps));
        }
        if !self.a.is_finite() {
            return bad("A must be finite".into());
        }
        let d = self.delta();
        let lo = 4.0 - 2.0 * self.k as f64;
        if !(d < 0.0 && (self.k == 2 || d > lo)) {
            return bad(format!("delta = {d} must lie in ({lo}, 0)"));
        }
        if !(self.cutoff > 0.0 && self.cutoff.is_finite()) {
            return bad(format!("cutoff sharpness {} must be positive", self.cutoff));
        }
        if self.points_per_decade < 32 {
            return bad(format!("points_per_decade = {} must be at least 32", self.points_per_decade));
        }
        if self.profile == Profile::Smooth {
            let m = self.cap_order();
            if !(self.k >= 3 && m >= 1 && self.a * (m as f64 - self.k as f64) > 0.0) {
                return bad(format!(
                    "the smooth profile needs k >= 3 and sign(A) = sign(m - k); got k = {}, m = {m}, A = {}",
                    self.k, self.a
                ));
            }
        }
        Ok(())
    }

    /// Log-spaced `d` samples on `[eps/10, 10 r_eps]`, plus the region
    /// boundaries `eps`, `r_eps`, `2 r_eps` as exact nodes.
    pub fn grid(&self) -> Vec<f64> {
        let (lo, hi) = (self.eps / 10.0, 10.0 * self.r_eps());
        let n = ((hi / lo).log10() * self.points_per_decade as f64).ceil() as usize + 1;
        let mut g = log_grid(lo, hi, n);
        g.extend(self.boundaries());
        g.sort_by(f64::total_cmp);
        g.dedup();
        g
    }

    /// Upper ends of the four-region `Ω₁`, `Ω₂`, `Ω₃`.
    pub fn boundaries(&self) -> [f64; 3] {
        let r = self.r_eps();
        [self.eps, r, 2.0 * r]
    }
}

pub fn r_eps(k: usize, eps: f64) -> f64 {
    let k = k as f64;
    eps.powf(2.0 * k / (2.0 * k + 1.0))
}

fn bump(v: Jet, sharp: f64) -> Jet {
    if v.value() <= sharp / 700.0 {
        Jet::constant(0.0)
    } else {
        (v.recip() * -sharp).exp()
    }
}

fn gamma1_jet(t: Jet, sharp: f64) -> Jet {
    let x = t.value();
    if x <= 1.0 {
        return Jet::constant(1.0);
    }
    if x >= 2.0 {
        return Jet::constant(0.0);
    }
    let u = t - 1.0;
    let a = bump(u, sharp);
    let b = bump(Jet::constant(1.0) - u, sharp);
    Jet::constant(1.0) - a / (a + b)
}

/// `γ₁`: 1 on `(-∞, 1]`, 0 on `[2, ∞)`, smooth and decreasing in between.
pub fn cutoff_gamma1(t: f64, sharp: f64) -> f64 {
    gamma1_jet(Jet::constant(t), sharp).value()
}

/// `γ₁` and its first four derivatives.
pub fn cutoff_gamma1_derivs(t: f64, sharp: f64) -> [f64; 5] {
    gamma1_jet(Jet::var(t), sharp).derivs()
}

/// `γ₂ = 1 - γ₁`.
pub fn cutoff_gamma2(t: f64, sharp: f64) -> f64 {
    1.0 - cutoff_gamma1(t, sharp)
}

/// Deviation `g(σ)` of the unit-scale ALE potential from `σ/2`.
#[derive(Clone, Debug, PartialEq)]
enum Deviation {
    Power { k: usize, a: f64 },
    Log { a: f64 },
    Smooth(SmoothProfile),
}

impl Deviation {
    fn derivs(&self, sigma: f64) -> Result<[f64; 5], RadialError> {
        match self {
            Deviation::Power { k, a } => Ok(Jet::var(sigma).powf(2.0 - *k as f64).scale(*a).derivs()),
            Deviation::Log { a } => Ok(Jet::var(sigma).ln().scale(0.5 * a).derivs()),
            Deviation::Smooth(p) => p.deviation(sigma),
        }
    }
}

/// The glued potential for one configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct GluedPotential {
    cfg: GluingConfig,
    dev: Deviation,
}

impl GluedPotential {
    pub fn new(cfg: &GluingConfig) -> Result<Self, GluingError> {
        cfg.validate()?;
        let dev = match (cfg.profile, cfg.k) {
            (Profile::Truncated, 2) => Deviation::Log { a: cfg.a },
            (Profile::Truncated, k) => Deviation::Power { k, a: cfg.a },
            (Profile::Smooth, k) => {
                let sigma_hi = 4.0 * (cfg.r_eps() / cfg.eps).powi(2) * 1.01;
                Deviation::Smooth(SmoothProfile::new(k, cfg.cap_order(), cfg.a, 0.009, sigma_hi)?)
            }
        };
        Ok(GluedPotential { cfg: cfg.clone(), dev })
    }

    pub fn config(&self) -> &GluingConfig {
        &self.cfg
    }

    /// `Φ` and its first four derivatives in `s = d²`.
    pub fn eval(&self, s: f64) -> Result<[f64; 5], GluingError> {
        let d = s.sqrt();
        let min = self.cfg.eps / 10.0;
        if !(d >= min * (1.0 - 1e-12)) {
            return Err(GluingError::OutsideModel { d, min });
        }
        let r = self.cfg.r_eps();
        let flat = [0.5 * s, 0.5, 0.0, 0.0, 0.0];
        if d >= 2.0 * r {
            return Ok(flat);
        }
        let e2 = self.cfg.eps * self.cfg.eps;
        let g = self.dev.derivs(s / e2).map_err(|e| GluingError::Profile(e.to_string()))?;
        // f(s) = ε² g(s/ε²)
        let mut f = [0.0; 5];
        let mut scale = e2;
        for i in 0..5 {
            f[i] = scale * g[i];
            scale /= e2;
        }
        let f = Jet::from_derivs(f);
        let x = Jet::var(s);
        let phi = if d <= r { x.scale(0.5) + f } else { x.scale(0.5) + gamma1_jet(x.sqrt() / r, self.cfg.cutoff) * f };
        Ok(phi.derivs())
    }

    /// Jets of the two metric eigenvalues, see [`Potential::eigen_jets`].
    pub fn jets(&self, s: f64) -> Result<([f64; 3], [f64; 3]), GluingError> {
        let d = s.sqrt();
        let min = self.cfg.eps / 10.0;
        if !(d >= min * (1.0 - 1e-12)) {
            return Err(GluingError::OutsideModel { d, min });
        }
        self.eigen_jets(s).map_err(|e| GluingError::Profile(e.to_string()))
    }
}

impl Potential for GluedPotential {
    fn k(&self) -> usize {
        self.cfg.k
    }

    fn derivs(&self, s: f64) -> Result<[f64; 5], RadialError> {
        self.eval(s).map_err(|_| RadialError::OutsideDomain { s })
    }

    fn eigen_jets(&self, s: f64) -> Result<([f64; 3], [f64; 3]), RadialError> {
        let d = s.sqrt();
        if let Deviation::Smooth(prof) = &self.dev {
            if d >= self.cfg.eps / 10.0 * (1.0 - 1e-12) && d <= self.cfg.r_eps() {
                let e2 = self.cfg.eps * self.cfg.eps;
                let (mut p, mut q) = prof.eigen_jets(s / e2)?;
                for i in 1..3 {
                    p[i] /= e2.powi(i as i32);
                    q[i] /= e2.powi(i as i32);
                }
                return Ok((p, q));
            }
        }
        Ok(radial::eigen_from_derivs(s, &self.derivs(s)?))
    }
}

/// The complete scalar-flat ALE metric on the total space of `O(-m)` over
/// `CP^{k-1}`, asymptotic to `C^k/Z_m`, at unit scale and normalized so
/// that its potential is `σ/2 + A σ^{2-k} + O(σ^{1-k})`.
///
/// In the moment coordinate `x = σH'` the equation integrates to
/// `dx/dt = ψ(x) = x + a x^{2-k} + b x^{1-k}` with `t = log σ`. Smoothness
/// across the zero section `x = x₀` forces `ψ(x₀) = 0` and `ψ'(x₀) = m`,
/// i.e. `a = (m-k) x₀^{k-1}`, `b = -(m-k+1) x₀^k`, and then
/// `A = a 2^{k-2} / ((k-1)(k-2))`. So `A < 0` for `m < k` (the blow-up of
/// a smooth point is `m = 1`) and `A > 0` for `m > k`. We integrate `w = x - σ/2` and
/// `g = H - σ/2` (`dg/dt = w`) inward from `σ = 1e8`, where the asymptotic
/// series `w ≈ -a 2^{k-2} σ^{2-k}/(k-1) - b 2^{k-1} σ^{1-k}/k` is exact to
/// rounding; below `σ = 1` we switch to `u = x - x₀`, which keeps its
/// relative accuracy at the zero section. Between nodes `w` (or `u`) and `g`
/// are interpolated; derivatives of `H'` then come from `σ x' = ψ(x)`
/// directly, so the interpolated metric is itself scalar-flat up to
/// rounding.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothProfile {
    k: usize,
    m: u32,
    a: f64,
    b: f64,
    x0: f64,
    grid: Vec<f64>,
    w: Vec<f64>,
    u: Vec<f64>,
    g: Vec<f64>,
}

/// Below this σ the table is built and interpolated in `u = x - x₀`.
const SWITCH: f64 = 1.0;

impl SmoothProfile {
    pub fn new(k: usize, m: u32, a_coef: f64, sigma_lo: f64, sigma_hi: f64) -> Result<Self, GluingError> {
        let err = |m: String| GluingError::Profile(m);
        let mk = m as f64 - k as f64;
        if k < 3 || m == 0 || !(a_coef * mk > 0.0) {
            return Err(err(format!(
                "k = {k}, m = {m}: need k >= 3, m >= 1 and sign(A) = sign(m - k), got A = {a_coef}"
            )));
        }
        if !(0.0 < sigma_lo && sigma_lo < sigma_hi && sigma_hi < 1e7) {
            return Err(err(format!("bad table range [{sigma_lo}, {sigma_hi}]")));
        }
        let kf = k as f64;
        let x0 = ((kf - 1.0) * (kf - 2.0) * a_coef / (mk * 2f64.powi(k as i32 - 2))).powf(1.0 / (kf - 1.0));
        let a = mk * x0.powf(kf - 1.0);
        let b = -(mk + 1.0) * x0.powf(kf);
        let mut prof = SmoothProfile { k, m, a, b, x0, grid: Vec::new(), w: Vec::new(), u: Vec::new(), g: Vec::new() };

        let sigma_start = 1e8f64;
        let w_start = -a * 2f64.powf(kf - 2.0) * sigma_start.powf(2.0 - kf) / (kf - 1.0)
            - b * 2f64.powf(kf - 1.0) * sigma_start.powf(1.0 - kf) / kf;
        let g_start = a_coef * sigma_start.powf(2.0 - kf)
            + b * 2f64.powf(kf - 1.0) * sigma_start.powf(1.0 - kf) / (kf * (kf - 1.0));
        let decades = (sigma_hi / sigma_lo).log10();
        let n = (decades * 200.0).ceil() as usize + 1;
        let grid = log_grid(sigma_lo, sigma_hi, n);
        let tol = Tolerance { rtol: 1e-12, atol: 1e-300 };
        let fail = |e: ode::OdeError| err(e.to_string());

        // Outer phase, inward in τ = -t with state (w, g).
        let split = grid.partition_point(|&s| s < SWITCH);
        let mut outer: Vec<f64> = grid[split..].iter().rev().map(|s| -s.ln()).collect();
        if split > 0 {
            outer.push(-SWITCH.ln());
        }
        let rhs = |tau: f64, y: &[f64; 2]| -> Result<[f64; 2], String> {
            let sigma = (-tau).exp();
            if y[0] + 0.5 * sigma <= x0 {
                return Err("crossed the zero section".into());
            }
            Ok([-prof.w_dot(sigma, y[0]), -y[0]])
        };
        let mut ys = ode::integrate(rhs, -sigma_start.ln(), [w_start, g_start], &outer, tol).map_err(fail)?;
        let mut w = vec![0.0; grid.len()];
        let mut g = vec![0.0; grid.len()];
        let mut u = vec![0.0; grid.len()];
        if split > 0 {
            // Inner phase with u = x - x₀, which stays accurate at the zero section.
            let [w1, g1] = ys.pop().unwrap();
            let u1 = w1 + 0.5 * SWITCH - x0;
            let inner: Vec<f64> = grid[..split].iter().rev().map(|s| -s.ln()).collect();
            let rhs = |tau: f64, y: &[f64; 2]| -> Result<[f64; 2], String> {
                if y[0] <= 0.0 {
                    return Err("crossed the zero section".into());
                }
                let sigma = (-tau).exp();
                Ok([-prof.psi_u(y[0]), -(x0 + y[0] - 0.5 * sigma)])
            };
            let zs = ode::integrate(rhs, -SWITCH.ln(), [u1, g1], &inner, tol).map_err(fail)?;
            for (i, z) in (0..split).rev().zip(zs) {
                u[i] = z[0];
                g[i] = z[1];
                w[i] = x0 + z[0] - 0.5 * grid[i];
            }
        }
        for (i, y) in (split..grid.len()).rev().zip(ys) {
            w[i] = y[0];
            g[i] = y[1];
            u[i] = y[0] + 0.5 * grid[i] - x0;
        }
        prof.grid = grid;
        prof.w = w;
        prof.u = u;
        prof.g = g;
        Ok(prof)
    }

    /// `dw/dt = ψ(x) - σ/2` written without cancellation.
    fn w_dot(&self, sigma: f64, w: f64) -> f64 {
        let x = w + 0.5 * sigma;
        let kf = self.k as f64;
        w + self.a * x.powf(2.0 - kf) + self.b * x.powf(1.0 - kf)
    }

    /// `ψ(x₀ + u) = x^{1-k} u (x^{k-1} + x^{k-2} x₀ + … + x₀^{k-1} + a)`.
    fn psi_u(&self, u: f64) -> f64 {
        let x = self.x0 + u;
        let mut q = self.a;
        for j in 0..self.k {
            q += x.powi((self.k - 1 - j) as i32) * self.x0.powi(j as i32);
        }
        x.powi(1 - self.k as i32) * u * q
    }

    fn psi_u_jet(&self, u: Jet) -> Jet {
        let x = u + self.x0;
        let mut q = Jet::constant(self.a);
        for j in 0..self.k {
            q = q + x.powf((self.k - 1 - j) as f64).scale(self.x0.powi(j as i32));
        }
        x.powf(1.0 - self.k as f64) * u * q
    }

    pub fn order(&self) -> u32 {
        self.m
    }

    pub fn zero_section(&self) -> f64 {
        self.x0
    }

    pub fn range(&self) -> (f64, f64) {
        (self.grid[0], *self.grid.last().unwrap())
    }

    /// Derivatives of `g = H - σ/2` up to order four.
    pub fn deviation(&self, sigma: f64) -> Result<[f64; 5], RadialError> {
        let (g, w, uj) = self.state(sigma)?;
        let hp = ((uj + self.x0) / Jet::var(sigma)).derivs();
        Ok([g, w / sigma, hp[1], hp[2], hp[3]])
    }

    /// Interpolated `g` and `w`, and the jet of `u = x - x₀` at `σ`.
    fn state(&self, sigma: f64) -> Result<(f64, f64, Jet), RadialError> {
        let n = self.grid.len();
        if !(sigma >= self.grid[0] && sigma <= self.grid[n - 1]) {
            return Err(RadialError::OutsideDomain { s: sigma });
        }
        let j = match self.grid.partition_point(|&x| x <= sigma) {
            0 => 0,
            p => (p - 1).min(n - 2),
        };
        let kf = self.k as f64;
        let inner = self.grid[j] < SWITCH;
        // Value, first and second σ-derivative at a node, of u (inner) or w.
        let node = |i: usize| {
            let s = self.grid[i];
            let x = self.x0 + self.u[i];
            let psi = self.psi_u(self.u[i]);
            let dpsi = 1.0 + self.a * (2.0 - kf) * x.powf(1.0 - kf) + self.b * (1.0 - kf) * x.powf(-kf);
            let (v, vt) = if inner { (self.u[i], psi) } else { (self.w[i], self.w_dot(s, self.w[i])) };
            let vtt = if inner { dpsi * psi } else { vt + (dpsi - 1.0) * psi };
            let g1 = self.w[i] / s;
            let g2 = (self.w_dot(s, self.w[i]) - self.w[i]) / (s * s);
            ([v, vt / s, (vtt - vt) / (s * s)], [self.g[i], g1, g2])
        };
        let (vl, gl) = node(j);
        let (vr, gr) = node(j + 1);
        let dx = self.grid[j + 1] - self.grid[j];
        let t = (sigma - self.grid[j]) / dx;
        let v = quintic_hermite(t, dx, vl, vr);
        let g = quintic_hermite(t, dx, gl, gr);
        let u = if inner { v } else { v + 0.5 * sigma - self.x0 };
        let w = if inner { self.x0 + v - 0.5 * sigma } else { v };
        // Taylor coefficients of u(σ) from σ u' = ψ(x₀ + u), by Picard iteration.
        let sj = Jet::var(sigma);
        let mut uj = Jet::constant(u);
        for _ in 0..5 {
            let rate = self.psi_u_jet(uj) / sj;
            let mut c = [0.0; 5];
            c[0] = u;
            for i in 0..4 {
                c[i + 1] = rate.c[i] / (i as f64 + 1.0);
            }
            uj = Jet { c };
        }
        Ok((g, w, uj))
    }
}

impl Potential for SmoothProfile {
    fn k(&self) -> usize {
        self.k
    }

    fn derivs(&self, s: f64) -> Result<[f64; 5], RadialError> {
        let mut d = self.deviation(s)?;
        d[0] += 0.5 * s;
        d[1] += 0.5;
        Ok(d)
    }

    fn eigen_jets(&self, s: f64) -> Result<([f64; 3], [f64; 3]), RadialError> {
        let (_, _, uj) = self.state(s)?;
        let sj = Jet::var(s);
        let p = ((uj + self.x0) / sj).derivs();
        let q = (self.psi_u_jet(uj) / sj).derivs();
        Ok(([p[0], p[1], p[2]], [q[0], q[1], q[2]]))
    }
}

fn quintic_hermite(t: f64, dx: f64, l: [f64; 3], r: [f64; 3]) -> f64 {
    let (t2, t3) = (t * t, t * t * t);
    let (t4, t5) = (t3 * t, t3 * t2);
    (1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5) * l[0]
        + (t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5) * dx * l[1]
        + 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5) * dx * dx * l[2]
        + (10.0 * t3 - 15.0 * t4 + 6.0 * t5) * r[0]
        + (-4.0 * t3 + 7.0 * t4 - 3.0 * t5) * dx * r[1]
        + 0.5 * (t3 - 2.0 * t4 + t5) * dx * dx * r[2]
}

/// Region index (1-based). Ties go to the lower index.
pub fn region_of(d: f64, cfg: &GluingConfig, scheme: Scheme) -> u8 {
    let r = cfg.r_eps();
    match scheme {
        Scheme::ThreeRegion => {
            if d <= r {
                1
            } else if d <= 2.0 * r {
                2
            } else {
                3
            }
        }
        Scheme::FourRegion => {
            if d <= cfg.eps {
                1
            } else if d <= r {
                2
            } else if d <= 2.0 * r {
                3
            } else {
                4
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Positivity {
    pub eps: f64,
    pub min_margin: f64,
    pub argmin_d: f64,
}

/// Smallest metric eigenvalue of the glued metric over the grid.
///
/// ```
/// use orbiglue::gluing::*;
///
/// let mut cfg = GluingConfig::new(3, 1e-3, -1.0);
/// cfg.profile = Profile::Smooth;
/// assert_eq!(cfg.cap_order(), 1);
/// let p = positivity_scan(&cfg).unwrap();
/// assert!(p.min_margin > 0.0);
/// ```
pub fn positivity_scan(cfg: &GluingConfig) -> Result<Positivity, GluingError> {
    let pot = GluedPotential::new(cfg)?;
    let mut best = Positivity { eps: cfg.eps, min_margin: f64::INFINITY, argmin_d: f64::NAN };
    for d in cfg.grid() {
        let (p, q) = pot.jets(d * d)?;
        let m = p[0].min(q[0]);
        if m < best.min_margin {
            best.min_margin = m;
            best.argmin_d = d;
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DoublingSweep {
    pub scans: Vec<Positivity>,
    /// First ε in the sweep with a non-positive margin.
    pub first_failure: Option<f64>,
}

/// Positivity scans at `eps_start * 2^j` while `eps < 1`.
pub fn positivity_sweep(cfg: &GluingConfig, eps_start: f64) -> Result<DoublingSweep, GluingError> {
    let mut scans = Vec::new();
    let mut first_failure = None;
    let mut eps = eps_start;
    while eps < 1.0 {
        let p = positivity_scan(&cfg.with_eps(eps))?;
        if first_failure.is_none() && p.min_margin <= 0.0 {
            first_failure = Some(eps);
        }
        scans.push(p);
        eps *= 2.0;
    }
    Ok(DoublingSweep { scans, first_failure })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScanRow {
    pub eps: f64,
    pub region: u8,
    pub d: f64,
    pub s_val: f64,
    pub d_abs_s: f64,
    pub weighted_s: f64,
    pub eig_min: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegionStats {
    pub region: u8,
    pub count: usize,
    pub sup_abs_s: f64,
    pub sup_d_abs_s: f64,
    pub sup_weighted_s: f64,
    pub min_margin: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegionReport {
    pub eps: f64,
    pub r_eps: f64,
    pub delta: f64,
    pub regions: Vec<RegionStats>,
    #[serde(skip)]
    pub rows: Vec<ScanRow>,
}

impl RegionReport {
    pub fn region(&self, id: u8) -> &RegionStats {
        &self.regions[id as usize - 1]
    }

    /// Largest `ρ^{4-δ}|S|` over the whole grid.
    pub fn sup_weighted(&self) -> f64 {
        self.regions.iter().map(|r| r.sup_weighted_s).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("eps,region,d,S,d_abs_S,weighted_S,eig_min\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.eps, r.region, r.d, r.s_val, r.d_abs_s, r.weighted_s, r.eig_min
            ));
        }
        out
    }
}

/// Scalar curvature of the glued metric over the grid, aggregated over the
/// four regions, with `ρ = √(d² + ε²)`.
pub fn scalar_error_report(cfg: &GluingConfig) -> Result<RegionReport, GluingError> {
    let pot = GluedPotential::new(cfg)?;
    let delta = cfg.delta();
    let mut regions: Vec<RegionStats> = (1..=4)
        .map(|region| RegionStats {
            region,
            count: 0,
            sup_abs_s: 0.0,
            sup_d_abs_s: 0.0,
            sup_weighted_s: 0.0,
            min_margin: None,
        })
        .collect();
    let mut rows = Vec::new();
    let bounds = cfg.boundaries();
    for d in cfg.grid() {
        let s = d * d;
        let (p, q) = pot.jets(s)?;
        let eig = p[0].min(q[0]);
        let sv = radial::curvature_from_eigen(cfg.k, s, &p, &q).map_err(|_| GluingError::Degenerate { d })?;
        let rho = (s + cfg.eps * cfg.eps).sqrt();
        let row = ScanRow {
            eps: cfg.eps,
            region: region_of(d, cfg, Scheme::FourRegion),
            d,
            s_val: sv,
            d_abs_s: d * sv.abs(),
            weighted_s: rho.powf(4.0 - delta) * sv.abs(),
            eig_min: eig,
        };
        regions[row.region as usize - 1].count += 1;
        // Sups are over closed regions: a boundary node also counts for the
        // region above it.
        let upper = bounds.get(row.region as usize - 1) == Some(&d);
        let ids = if upper { row.region..=row.region + 1 } else { row.region..=row.region };
        for id in ids {
            let st = &mut regions[id as usize - 1];
            st.sup_abs_s = st.sup_abs_s.max(sv.abs());
            st.sup_d_abs_s = st.sup_d_abs_s.max(row.d_abs_s);
            st.sup_weighted_s = st.sup_weighted_s.max(row.weighted_s);
            st.min_margin = Some(st.min_margin.map_or(eig, |m| m.min(eig)));
        }
        rows.push(row);
    }
    Ok(RegionReport { eps: cfg.eps, r_eps: cfg.r_eps(), delta, regions, rows })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares of `log value` against `log r_ε`.
pub fn rate_fit(k: usize, pairs: &[(f64, f64)]) -> Result<RateFit, GluingError> {
    if pairs.len() < 4 {
        return Err(GluingError::RateFit(format!("got {} points", pairs.len())));
    }
    if let Some(&(e, v)) = pairs.iter().find(|p| !(p.1 > 0.0) || !(p.0 > 0.0)) {
        return Err(GluingError::RateFit(format!("non-positive entry ({e}, {v})")));
    }
    let xs: Vec<f64> = pairs.iter().map(|p| r_eps(k, p.0).ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(RateFit { slope, intercept, r2 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_values() {
        assert_eq!(cutoff_gamma1(0.5, 1.0), 1.0);
        assert_eq!(cutoff_gamma1(3.0, 1.0), 0.0);
        assert!((cutoff_gamma1(1.5, 1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn region_ties() {
        let cfg = GluingConfig::new(3, 1e-3, 1.0);
        assert_eq!(region_of(cfg.r_eps(), &cfg, Scheme::ThreeRegion), 1);
        assert_eq!(region_of(cfg.eps / 2.0, &cfg, Scheme::FourRegion), 1);
        assert_eq!(region_of(3.0 * cfg.r_eps(), &cfg, Scheme::FourRegion), 4);
    }

    #[test]
    fn flat_when_a_zero() {
        let p = positivity_scan(&GluingConfig::new(3, 1e-2, 0.0)).unwrap();
        assert_eq!(p.min_margin, 0.5);
    }
}
