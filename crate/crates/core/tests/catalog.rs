use hml_core::catalog::{build, build_named, FubiniStudyChart, MetricSpec, Pole, TwoDCoords};
use hml_core::geodesic::{centrally_harmonic_test, sample_directions, shoot_path, HarmonicConfig, ShootConfig, Verdict};
use hml_core::metric::{curvature, einstein_defect, sectional_curvature};
use hml_core::GeometryError;

fn entries() -> Vec<MetricSpec> {
    vec![
        MetricSpec::Euclidean { dim: 3 },
        MetricSpec::SpaceForm { a: 0.5, b: 0.5, dim: 3 },
        MetricSpec::SpaceForm { a: 0.5, b: -0.5, dim: 4 },
        MetricSpec::SpaceForm { a: 1.0, b: 0.0, dim: 3 },
        MetricSpec::Sphere { dim: 3, pole: Pole::South },
        MetricSpec::FubiniStudy { complex_dim: 2, chart: FubiniStudyChart::Normal },
        MetricSpec::FubiniStudy { complex_dim: 2, chart: FubiniStudyChart::Affine },
        MetricSpec::FubiniStudy { complex_dim: 1, chart: FubiniStudyChart::Normal },
        MetricSpec::TwoDFamily { n: 4, b: 0.3, coords: TwoDCoords::Cartesian },
        MetricSpec::DeformedSphere { dim: 4, pole: Pole::North, psi: vec![1.0, 0.25] },
        MetricSpec::DeformedSphere { dim: 3, pole: Pole::North, psi: vec![2.0] },
    ]
}

#[test]
fn declared_facts_hold() {
    for spec in entries() {
        let e = build(&spec).unwrap();
        let m = e.metric.dim();
        let p = vec![0.0; m];
        let x: Vec<f64> = (0..m).map(|i| 0.1 + 0.05 * i as f64).collect();
        let b = curvature(e.metric.as_ref(), &x, 0).unwrap();
        if e.facts.einstein {
            assert!(einstein_defect(&b) < 1e-8, "{}", e.name);
        }
        if let Some(k) = e.facts.constant_curvature {
            let mut u = vec![0.0; m];
            let mut v = vec![0.0; m];
            u[0] = 1.0;
            v[m - 1] = 1.0;
            v[0] = 0.3;
            assert!((sectional_curvature(&b, &u, &v).unwrap() - k).abs() < 1e-8, "{}", e.name);
        }
        if let Some(law) = e.facts.density {
            let d = &sample_directions(e.metric.as_ref(), &p, 3).unwrap()[2];
            let s = shoot_path(e.metric.as_ref(), &p, d, &[0.3, 0.7], &ShootConfig::default()).unwrap();
            for smp in s {
                assert!((smp.theta - law.eval(m, smp.radius)).abs() < 1e-9, "{}", e.name);
            }
        }
        if e.facts.harmonic_at_origin && m > 2 {
            let (rep, _) = centrally_harmonic_test(e.metric.as_ref(), &p, &HarmonicConfig::for_metric(e.metric.as_ref(), &p));
            assert_eq!(rep.verdict, Verdict::Harmonic, "{}: {rep:?}", e.name);
        }
    }
}

#[test]
fn named_construction_and_errors() {
    let e = build_named("g_ab", &serde_json::json!({"a": 0.5, "b": 0.5, "dim": 4})).unwrap();
    assert_eq!(e.facts.constant_curvature, Some(1.0));
    assert!(matches!(build_named("klein_bottle", &serde_json::json!({})), Err(GeometryError::UnknownFamily(_))));
    assert!(matches!(
        build_named("sphere", &serde_json::json!({"dim": 1})),
        Err(GeometryError::InvalidParameters(_))
    ));
    assert!(build(&MetricSpec::DeformedSphere { dim: 3, pole: Pole::North, psi: vec![1.0, -2.0] }).is_err());
    let s: MetricSpec = serde_json::from_str(r#"{"family":"deformed_sphere","dim":4,"psi":[1.0,0.25]}"#).unwrap();
    assert_eq!(s, MetricSpec::DeformedSphere { dim: 4, pole: Pole::North, psi: vec![1.0, 0.25] });
}
