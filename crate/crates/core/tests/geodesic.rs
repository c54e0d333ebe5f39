use hml_core::catalog::{build, FubiniStudyChart, MetricSpec, Pole};
use hml_core::geodesic::{
    centrally_harmonic_test, density_from_exp_map, radial_harmonic, sample_directions, shoot, shoot_path,
    HarmonicConfig, Scheme, ShootConfig, Verdict,
};
use proptest::prelude::*;

fn affine_residual(f: &[(f64, f64)], basis: impl Fn(f64) -> f64) -> f64 {
    // least squares f ≈ α basis(r) + β
    let n = f.len() as f64;
    let xs: Vec<f64> = f.iter().map(|p| basis(p.0)).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = f.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(f).map(|(x, p)| (x - mx) * (p.1 - my)).sum();
    let a = sxy / sxx;
    let b = my - a * mx;
    xs.iter().zip(f).map(|(x, p)| (p.1 - a * x - b).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn energy_is_conserved(which in 0usize..3, k in 0usize..8, r in 0.2f64..1.2) {
        let spec = [
            MetricSpec::FubiniStudy { complex_dim: 2, chart: FubiniStudyChart::Normal },
            MetricSpec::DeformedSphere { dim: 4, pole: Pole::North, psi: vec![1.0, 0.25] },
            MetricSpec::SpaceForm { a: 1.0, b: 0.5, dim: 3 },
        ][which].clone();
        let e = build(&spec).unwrap();
        let p = vec![0.0; e.metric.dim()];
        let d = &sample_directions(e.metric.as_ref(), &p, 8).unwrap()[k];
        let s = shoot(e.metric.as_ref(), &p, d, r, &ShootConfig::default()).unwrap();
        prop_assert!(s.energy_drift < 1e-9, "{}", s.energy_drift);
    }

    #[test]
    fn radial_harmonic_matches_flat_profiles(m in 2usize..7, r0 in 0.05f64..0.5) {
        let rs: Vec<f64> = (0..400).map(|i| r0 * (1.0 + 0.01 * i as f64)).collect();
        let samples: Vec<(f64, f64)> = rs.iter().map(|&r| (r, r.powi(m as i32 - 1))).collect();
        let f = radial_harmonic(&samples).unwrap();
        let res = if m == 2 {
            affine_residual(&f, |r| (r * r).ln())
        } else {
            affine_residual(&f, |r| r.powi(2 - m as i32))
        };
        let scale = f.iter().map(|p| p.1.abs()).fold(0.0, f64::max).max(1.0);
        prop_assert!(res / scale < 1e-7, "{res}");
    }
}

#[test]
fn rk4_converges_at_fourth_order_on_sphere() {
    let s = build(&MetricSpec::Sphere { dim: 3, pole: Pole::North }).unwrap();
    let p = [0.0; 3];
    let d = &sample_directions(s.metric.as_ref(), &p, 5).unwrap()[4];
    let r = 2.0f64;
    let err = |steps: usize| {
        let cfg = ShootConfig { steps, adaptive_fallback: false, scheme: Scheme::Rk4, ..Default::default() };
        (shoot(s.metric.as_ref(), &p, d, r, &cfg).unwrap().theta - r.sin().powi(2)).abs()
    };
    let (e1, e2, e3) = (err(20), err(40), err(80));
    let o1 = (e1 / e2).log2();
    let o2 = (e2 / e3).log2();
    assert!((o1 - 4.0).abs() < 0.3 && (o2 - 4.0).abs() < 0.3, "{o1} {o2}");
}

#[test]
fn density_agrees_with_exp_map_oracle() {
    let fs = build(&MetricSpec::FubiniStudy { complex_dim: 2, chart: FubiniStudyChart::Affine }).unwrap();
    let p = [0.3, -0.1, 0.2, 0.4];
    let d = &sample_directions(fs.metric.as_ref(), &p, 3).unwrap()[2];
    let s = shoot_path(fs.metric.as_ref(), &p, d, &[0.5, 0.9], &ShootConfig::default()).unwrap();
    for smp in s {
        let o = density_from_exp_map(fs.metric.as_ref(), &p, d, smp.radius, 1e-4).unwrap();
        let exact = smp.radius.sin().powi(3) * smp.radius.cos();
        assert!((smp.theta - exact).abs() < 1e-9);
        assert!((o - smp.theta).abs() < 1e-6, "{o} {}", smp.theta);
    }
}

#[test]
fn harmonic_verdicts() {
    let cfg = HarmonicConfig::default();
    let fs = build(&MetricSpec::FubiniStudy { complex_dim: 2, chart: FubiniStudyChart::Affine }).unwrap();
    let (rep, _) = centrally_harmonic_test(fs.metric.as_ref(), &[0.2, 0.1, -0.3, 0.0], &HarmonicConfig::for_metric(fs.metric.as_ref(), &[0.2, 0.1, -0.3, 0.0]));
    assert_eq!(rep.verdict, Verdict::Harmonic, "{rep:?}");
    assert!(rep.einstein_defect.unwrap() < 1e-9);
    let sp = build(&MetricSpec::DeformedSphere { dim: 4, pole: Pole::North, psi: vec![1.0, 0.25] }).unwrap();
    let (rep, _) = centrally_harmonic_test(sp.metric.as_ref(), &[0.0; 4], &cfg);
    assert_eq!(rep.verdict, Verdict::Harmonic);
    let (rep, _) = centrally_harmonic_test(sp.metric.as_ref(), &[1.0, 0.3, 0.0, 0.0], &cfg);
    assert_eq!(rep.verdict, Verdict::NotHarmonic);
    assert!(rep.max_theta_spread > 1e-3);
}
