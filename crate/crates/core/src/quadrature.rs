//! Numerical integration helpers.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite Gauss–Legendre rule with `panels` equal panels of `order` points.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    let (x, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        let mut s = 0.0;
        for (xi, wi) in x.iter().zip(&w) {
            s += wi * f(mid + 0.5 * h * xi);
        }
        total += 0.5 * h * s;
    }
    total
}

/// Running integral `∫_{xs[0]}^{xs[i]} y` of tabulated data on a sorted grid,
/// interpolating with local polynomials through `window` neighbouring nodes.
pub fn cumulative_integral(xs: &[f64], ys: &[f64], window: usize) -> Vec<f64> {
    let n = xs.len();
    assert_eq!(n, ys.len());
    let w = window.min(n).max(2);
    let (gx, gw) = gauss_legendre(w.div_ceil(2) + 1);
    let mut out = vec![0.0; n];
    for i in 0..n.saturating_sub(1) {
        // window roughly centred on the interval [x_i, x_{i+1}]
        let start = (i + 1).saturating_sub(w / 2).min(n - w);
        let nodes = &xs[start..start + w];
        let vals = &ys[start..start + w];
        let (a, b) = (xs[i], xs[i + 1]);
        let mut s = 0.0;
        for (xi, wi) in gx.iter().zip(&gw) {
            let x = 0.5 * (a + b) + 0.5 * (b - a) * xi;
            s += wi * lagrange(nodes, vals, x);
        }
        out[i + 1] = out[i] + 0.5 * (b - a) * s;
    }
    out
}

/// Value at `x` of the interpolating polynomial through `(nodes, vals)`.
pub fn lagrange(nodes: &[f64], vals: &[f64], x: f64) -> f64 {
    let mut s = 0.0;
    for (j, (&xj, &yj)) in nodes.iter().zip(vals).enumerate() {
        let mut l = 1.0;
        for (k, &xk) in nodes.iter().enumerate() {
            if k != j {
                l *= (x - xk) / (xj - xk);
            }
        }
        s += yj * l;
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rules_integrate_polynomials() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            let deg = 2 * n - 1;
            let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32 - 1)).sum();
            let exact = if (deg - 1) % 2 == 0 { 2.0 / deg as f64 } else { 0.0 };
            assert!((s - exact).abs() < 1e-14, "n={n}");
        }
    }

    #[test]
    fn composite_rule() {
        let v = integrate(|x| x.sin(), 0.0, PI, 4, 10);
        assert!((v - 2.0).abs() < 1e-14);
    }

    #[test]
    fn cumulative_on_uneven_grid() {
        let xs: Vec<f64> = (0..240).map(|i| 0.1 * 1.01f64.powi(i)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 1.0 / (x * x)).collect();
        let c = cumulative_integral(&xs, &ys, 6);
        for (x, v) in xs.iter().zip(&c) {
            assert!((v - (10.0 - 1.0 / x)).abs() < 1e-8, "{x} {}", v - (10.0 - 1.0 / x));
        }
    }
}
