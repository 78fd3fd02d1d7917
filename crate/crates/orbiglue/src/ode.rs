//! Dormand–Prince 5(4) integrator with adaptive step control.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("right-hand side failed at t = {t}: {reason}")]
    Rhs { t: f64, reason: String },
    #[error("too many steps ({steps}) before reaching t = {target}")]
    TooManySteps { steps: usize, target: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { rtol: 1e-10, atol: 1e-14 }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] =
    [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

/// Integrates `y' = f(t, y)` from `t0` and records the state at each of the
/// increasing `targets`. Steps are clipped to land exactly on the targets,
/// so no dense-output interpolation error enters the samples.
pub fn integrate<const N: usize, F>(
    f: F,
    t0: f64,
    y0: [f64; N],
    targets: &[f64],
    tol: Tolerance,
) -> Result<Vec<[f64; N]>, OdeError>
where
    F: Fn(f64, &[f64; N]) -> Result<[f64; N], String>,
{
    const MAX_STEPS: usize = 2_000_000;
    let rhs = |t: f64, y: &[f64; N]| f(t, y).map_err(|reason| OdeError::Rhs { t, reason });
    let mut out = Vec::with_capacity(targets.len());
    let mut t = t0;
    let mut y = y0;
    let mut h = 1e-3;
    let mut steps = 0usize;
    for &target in targets {
        while t < target {
            steps += 1;
            if steps > MAX_STEPS {
                return Err(OdeError::TooManySteps { steps, target });
            }
            let clipped = h >= target - t;
            let step = if clipped { target - t } else { h };
            let mut k = [[0.0; N]; 7];
            k[0] = rhs(t, &y)?;
            // A failing stage evaluation rejects the step instead of aborting.
            let mut stage_failed = false;
            for s in 1..7 {
                let mut ys = y;
                for i in 0..N {
                    let mut acc = 0.0;
                    for j in 0..s {
                        acc += A[s][j] * k[j][i];
                    }
                    ys[i] += step * acc;
                }
                match f(t + C[s] * step, &ys) {
                    Ok(v) if v.iter().all(|x| x.is_finite()) => k[s] = v,
                    _ => {
                        stage_failed = true;
                        break;
                    }
                }
            }
            if stage_failed {
                h = 0.25 * step;
                if h < 1e-14 * t.abs().max(1.0) {
                    return Err(OdeError::StepUnderflow { t });
                }
                continue;
            }
            let mut y5 = y;
            let mut err = 0.0f64;
            for i in 0..N {
                let mut s5 = 0.0;
                let mut s4 = 0.0;
                for j in 0..7 {
                    s5 += B5[j] * k[j][i];
                    s4 += B4[j] * k[j][i];
                }
                y5[i] += step * s5;
                let scale = tol.atol + tol.rtol * y[i].abs().max(y5[i].abs());
                err = err.max((step * (s5 - s4) / scale).abs());
            }
            if err <= 1.0 {
                t = if clipped { target } else { t + step };
                y = y5;
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            let next = step * factor;
            if !clipped || err > 1.0 {
                h = next;
            }
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(OdeError::StepUnderflow { t });
            }
        }
        out.push(y);
    }
    Ok(out)
}
