//! Deterministic low-discrepancy directions on spheres.

use nalgebra::{DMatrix, DVector};

use crate::error::{GeometryError, Result};

/// Root of `x^{d+1} = x + 1`; the base of the additive recurrence in `d` dimensions.
fn generalized_golden(d: usize) -> f64 {
    let mut x = 2.0f64;
    for _ in 0..64 {
        x = (1.0 + x).powf(1.0 / (d as f64 + 1.0));
    }
    x
}

/// `count` points of the additive recurrence in `[0,1)^d`.
pub fn kronecker(d: usize, count: usize) -> Vec<Vec<f64>> {
    let phi = generalized_golden(d);
    let alpha: Vec<f64> = (1..=d).map(|j| phi.powi(-(j as i32))).collect();
    (1..=count)
        .map(|i| {
            alpha
                .iter()
                .map(|a| (0.5 + a * i as f64).fract())
                .collect()
        })
        .collect()
}

/// `count` Euclidean unit vectors in `R^m`, reproducible and seedless.
///
/// Kronecker points are mapped to Gaussian vectors by Box–Muller and normalized.
/// The first `m` directions are the coordinate axes.
pub fn unit_directions(m: usize, count: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = (0..m.min(count))
        .map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let pairs = m.div_ceil(2);
    for u in kronecker(2 * pairs, count.saturating_sub(out.len())) {
        let mut v = Vec::with_capacity(2 * pairs);
        for p in 0..pairs {
            let u1 = u[2 * p].max(1e-300);
            let u2 = u[2 * p + 1];
            let rad = (-2.0 * u1.ln()).sqrt();
            let ang = std::f64::consts::TAU * u2;
            v.push(rad * ang.cos());
            v.push(rad * ang.sin());
        }
        v.truncate(m);
        let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        out.push(v.into_iter().map(|c| c / n).collect());
    }
    out
}

/// Maps Euclidean unit vectors `w` to `g`-unit vectors `θ = L^{-T} w`, `g = L Lᵀ`.
pub fn g_orthonormalize(g: &DMatrix<f64>, dirs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let l = g
        .clone()
        .cholesky()
        .ok_or_else(|| GeometryError::InvalidDirection("metric is not positive definite".into()))?
        .l();
    let lt = l.transpose();
    dirs.iter()
        .map(|w| {
            let th = lt
                .solve_upper_triangular(&DVector::from_column_slice(w))
                .ok_or_else(|| GeometryError::InvalidDirection("singular Cholesky factor".into()))?;
            Ok(th.as_slice().to_vec())
        })
        .collect()
}

/// Completes `theta` (a `g`-unit vector) to a `g`-orthonormal basis; returns the
/// `m - 1` complementary vectors as columns of an `m × (m-1)` matrix.
pub fn complement_frame(g: &DMatrix<f64>, theta: &[f64]) -> Result<DMatrix<f64>> {
    let m = theta.len();
    let inner = |a: &DVector<f64>, b: &DVector<f64>| a.dot(&(g * b));
    let t = DVector::from_column_slice(theta);
    let nt = inner(&t, &t);
    if !(nt > 0.0) || (nt - 1.0).abs() > 1e-8 {
        return Err(GeometryError::InvalidDirection(format!(
            "direction must be g-unit, has squared norm {nt}"
        )));
    }
    let mut basis: Vec<DVector<f64>> = vec![t];
    // Gram–Schmidt over coordinate axes, skipping the one most aligned with theta.
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| theta[b].abs().total_cmp(&theta[a].abs()));
    for &axis in order.iter().skip(1) {
        let mut v = DVector::zeros(m);
        v[axis] = 1.0;
        for _ in 0..2 {
            for b in &basis {
                let c = inner(b, &v);
                v -= b * c;
            }
        }
        let n = inner(&v, &v).sqrt();
        basis.push(v / n);
    }
    Ok(DMatrix::from_columns(&basis[1..]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn directions_are_unit_and_reproducible() {
        let a = unit_directions(4, 30);
        let b = unit_directions(4, 30);
        assert_eq!(a, b);
        for v in &a {
            assert!((v.iter().map(|c| c * c).sum::<f64>() - 1.0).abs() < 1e-14);
        }
        // well spread: mean close to zero
        let mean: Vec<f64> = (0..4).map(|j| a.iter().map(|v| v[j]).sum::<f64>() / 30.0).collect();
        assert!(mean.iter().all(|c| c.abs() < 0.3));
    }

    #[test]
    fn frame_is_orthonormal() {
        let g = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.0, 0.3, 1.0, 0.1, 0.0, 0.1, 0.5]);
        let th = g_orthonormalize(&g, &[vec![0.6, 0.0, 0.8]]).unwrap().remove(0);
        let e = complement_frame(&g, &th).unwrap();
        let mut full = DMatrix::zeros(3, 3);
        full.set_column(0, &DVector::from_column_slice(&th));
        full.columns_mut(1, 2).copy_from(&e);
        let gram = full.transpose() * &g * &full;
        assert!((gram - DMatrix::identity(3, 3)).amax() < 1e-14);
    }
}
