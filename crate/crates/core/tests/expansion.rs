use hml_core::catalog::{build, FubiniStudyChart, MetricSpec};
use hml_core::expansion::{density_coefficients, leading_coefficient, verify_leading_coefficient};
use hml_core::metric::metric_at;
use hml_core::series::{rational, TruncatedSeries};
use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;

/// `(sn_κ(r)/r)^{m-1}` as a series in `r`.
fn space_form_density(kappa: f64, m: usize, order: usize) -> Vec<f64> {
    let mut s = vec![0.0; order + 1];
    let mut term = 1.0;
    for j in 0..=order / 2 {
        if j > 0 {
            term *= -kappa / ((2 * j) as f64 * (2 * j + 1) as f64);
        }
        s[2 * j] = term;
    }
    let base = TruncatedSeries::new(s, order);
    let mut acc = TruncatedSeries::constant(1.0, order);
    for _ in 0..m - 1 {
        acc = acc.mul(&base).unwrap();
    }
    acc.coeffs().to_vec()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn coefficients_are_homogeneous(c in 0.3f64..3.0, x in prop::collection::vec(-0.4f64..0.4, 4), v in prop::collection::vec(-1.0f64..1.0, 4)) {
        prop_assume!(v.iter().map(|a| a * a).sum::<f64>() > 0.1);
        let fs = build(&MetricSpec::FubiniStudy { complex_dim: 2, chart: FubiniStudyChart::Affine }).unwrap();
        let a = density_coefficients(fs.metric.as_ref(), &x, &v).unwrap();
        let cv: Vec<f64> = v.iter().map(|t| t * c).collect();
        let b = density_coefficients(fs.metric.as_ref(), &x, &cv).unwrap();
        for k in 2..=6 {
            let want = c.powi(k as i32) * a.h[k];
            prop_assert!((b.h[k] - want).abs() < 1e-9 * want.abs().max(1.0), "H_{}", k);
        }
    }

    #[test]
    fn leading_coefficient_law(n in 2usize..=12, num in -7i64..=7, den in 1i64..=9) {
        prop_assume!(num != 0);
        let b = rational(num, den);
        let check = verify_leading_coefficient(n, &b).unwrap();
        prop_assert!(check.passed);
        let fact: BigInt = (1..=n as u64 + 1).map(BigInt::from).product();
        prop_assert_eq!(check.c_n, BigRational::new(BigInt::from(1 - n as i64), fact));
    }
}

#[test]
fn space_forms_match_closed_form() {
    for (spec, kappa) in [
        (MetricSpec::Euclidean { dim: 4 }, 0.0),
        (MetricSpec::Sphere { dim: 4, pole: Default::default() }, 1.0),
        (MetricSpec::SpaceForm { a: 0.5, b: -0.5, dim: 4 }, -1.0),
        (MetricSpec::SpaceForm { a: 0.5, b: 0.5, dim: 4 }, 1.0),
    ] {
        let e = build(&spec).unwrap();
        let p = [0.1, -0.05, 0.0, 0.12];
        let g = metric_at(e.metric.as_ref(), &p).unwrap();
        let v = [0.3, 0.5, -0.2, 0.1];
        let norm2: f64 = (0..4).flat_map(|i| (0..4).map(move |j| (i, j))).map(|(i, j)| g[(i, j)] * v[i] * v[j]).sum();
        let want = space_form_density(kappa, 4, 6);
        let got = density_coefficients(e.metric.as_ref(), &p, &v).unwrap();
        for k in 2..=6 {
            let w = want[k] * norm2.powf(k as f64 / 2.0);
            assert!((got.h[k] - w).abs() < 1e-9, "{} H_{k}: {} vs {w}", e.name, got.h[k]);
        }
    }
}

#[test]
fn paper_constants() {
    let listed = [(2, -1, 6), (3, -1, 12), (4, -1, 40), (5, -1, 180), (6, -1, 1008)];
    for (n, a, b) in listed {
        assert_eq!(leading_coefficient(n), rational(a, b));
    }
}
