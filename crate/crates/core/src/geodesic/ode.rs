//! Explicit Runge–Kutta integrators for first-order systems `y' = f(r, y)`.

use crate::error::{GeometryError, Result};

/// Integration scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Classical fourth-order method with a fixed step.
    Rk4,
    /// Dormand–Prince 5(4) with step-size control.
    Dopri5,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { abs: 1e-10, rel: 1e-9 }
    }
}

fn axpy(y: &[f64], h: f64, terms: &[(&[f64], f64)]) -> Vec<f64> {
    let mut out = y.to_vec();
    for (k, c) in terms {
        if *c == 0.0 {
            continue;
        }
        for (o, v) in out.iter_mut().zip(k.iter()) {
            *o += h * c * v;
        }
    }
    out
}

/// One classical RK4 step.
pub fn rk4_step<F>(f: &F, r: f64, y: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(f64, &[f64]) -> Result<Vec<f64>>,
{
    let k1 = f(r, y)?;
    let k2 = f(r + 0.5 * h, &axpy(y, h, &[(&k1, 0.5)]))?;
    let k3 = f(r + 0.5 * h, &axpy(y, h, &[(&k2, 0.5)]))?;
    let k4 = f(r + h, &axpy(y, h, &[(&k3, 1.0)]))?;
    Ok(axpy(
        y,
        h,
        &[(&k1, 1.0 / 6.0), (&k2, 1.0 / 3.0), (&k3, 1.0 / 3.0), (&k4, 1.0 / 6.0)],
    ))
}

/// Fixed-step RK4 from `r0` to `r1` in `steps` steps.
pub fn rk4<F>(f: &F, r0: f64, r1: f64, y0: &[f64], steps: usize) -> Result<Vec<f64>>
where
    F: Fn(f64, &[f64]) -> Result<Vec<f64>>,
{
    let steps = steps.max(1);
    let h = (r1 - r0) / steps as f64;
    let mut y = y0.to_vec();
    for i in 0..steps {
        y = rk4_step(f, r0 + i as f64 * h, &y, h)?;
    }
    Ok(y)
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
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Adaptive Dormand–Prince integration from `r0` to `r1`.
pub fn dopri5<F>(f: &F, r0: f64, r1: f64, y0: &[f64], tol: Tolerances, h0: f64) -> Result<Vec<f64>>
where
    F: Fn(f64, &[f64]) -> Result<Vec<f64>>,
{
    let span = r1 - r0;
    if span == 0.0 {
        return Ok(y0.to_vec());
    }
    let dir = span.signum();
    let mut h = h0.abs().min(span.abs()).max(span.abs() * 1e-12) * dir;
    let mut r = r0;
    let mut y = y0.to_vec();
    let mut rejects = 0usize;
    while (r1 - r) * dir > 0.0 {
        if (r + h - r1) * dir > 0.0 {
            h = r1 - r;
        }
        let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
        let mut failed = None;
        for s in 0..7 {
            let terms: Vec<(&[f64], f64)> = (0..s).map(|j| (k[j].as_slice(), A[s][j])).collect();
            match f(r + C[s] * h, &axpy(&y, h, &terms)) {
                Ok(v) => k.push(v),
                Err(e) => {
                    failed = Some(e);
                    break;
                }
            }
        }
        if let Some(e) = failed {
            // A stage stepped outside the domain: retry smaller before giving up.
            rejects += 1;
            if rejects > 60 || h.abs() < 1e-14 * span.abs() {
                return Err(e);
            }
            h *= 0.25;
            continue;
        }
        let t5: Vec<(&[f64], f64)> = (0..7).map(|j| (k[j].as_slice(), B5[j])).collect();
        let t4: Vec<(&[f64], f64)> = (0..7).map(|j| (k[j].as_slice(), B4[j])).collect();
        let y5 = axpy(&y, h, &t5);
        let y4 = axpy(&y, h, &t4);
        let mut err = 0.0f64;
        for i in 0..y.len() {
            let sc = tol.abs + tol.rel * y[i].abs().max(y5[i].abs());
            err = err.max(((y5[i] - y4[i]) / sc).abs());
        }
        if !err.is_finite() {
            return Err(GeometryError::DomainExit { last_radius: r });
        }
        if err <= 1.0 {
            r += h;
            y = y5;
            rejects = 0;
        } else {
            rejects += 1;
            if rejects > 60 {
                return Err(GeometryError::DomainExit { last_radius: r });
            }
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn osc(_r: f64, y: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![y[1], -y[0]])
    }

    #[test]
    fn rk4_is_fourth_order() {
        let err = |n| (rk4(&osc, 0.0, 2.0, &[0.0, 1.0], n).unwrap()[0] - 2f64.sin()).abs();
        let ratio = err(50) / err(100);
        assert!(ratio > 14.0 && ratio < 18.0, "{ratio}");
    }

    #[test]
    fn dopri_meets_tolerance() {
        let y = dopri5(&osc, 0.0, 3.0, &[0.0, 1.0], Tolerances { abs: 1e-12, rel: 1e-12 }, 0.1).unwrap();
        assert!((y[0] - 3f64.sin()).abs() < 1e-10);
        assert!((y[1] - 3f64.cos()).abs() < 1e-10);
    }
}
