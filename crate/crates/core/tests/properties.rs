use isostab::bounds::verify_bounds;
use isostab::gallery::{make_bounded_perturb, Admissibility, GraphProfile};
use isostab::report::{parse_report, Report, RunManifest};
use isostab::rng::{orthonormal_matrix, substream};
use isostab::{
    assemble_frame, certify, ExtractionConfig, Map, MapSpec, SamplerConfig,
};
use proptest::prelude::*;

fn envelope(eps: f64, t: f64) -> f64 {
    (2.0 * eps * t + eps * eps).sqrt()
}

/// Knots `0 = t_0 < t_1 < ...` from positive gaps.
fn knots_from(gaps: &[f64]) -> Vec<f64> {
    std::iter::once(0.0)
        .chain(gaps.iter().scan(0.0, |acc, g| {
            *acc += g;
            Some(*acc)
        }))
        .collect()
}

fn graph_spec(eps: f64, knots: &[f64], values: &[f64]) -> MapSpec {
    let profile = GraphProfile::interpolating(knots, values).unwrap();
    MapSpec::graph_family(eps, profile.knots(), profile.slopes())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // U of x -> R f(Q x) is R U_f Q
    #[test]
    fn extraction_commutes_with_orthogonal_conjugation(seed in 0u64..1000, eta in 0.05..1.0f64) {
        let mut rng = substream(seed, "prop-conj");
        let u = orthonormal_matrix(&mut rng, 3, 2);
        let base = make_bounded_perturb(&u, eta, seed).unwrap();
        let q = orthonormal_matrix(&mut rng, 2, 2);
        let r = orthonormal_matrix(&mut rng, 3, 3);
        let conj = base.conjugated(&q, &r).unwrap();
        let cfg = ExtractionConfig { seed, ..ExtractionConfig::default() };
        let (res_f, _) = assemble_frame(&Map::new(base).unwrap(), &cfg).unwrap();
        let (res_g, _) = assemble_frame(&Map::new(conj).unwrap(), &cfg).unwrap();
        let expected = r.matmul(&res_f.u).unwrap().matmul(&q).unwrap();
        let diff = res_g.u.sub(&expected).unwrap().max_abs();
        prop_assert!(diff <= 1e-5, "diff {diff:e}");
    }

    #[test]
    fn bounds_hold_for_random_bounded_perturbations(seed in 0u64..1000, eta in 0.01..1.0f64) {
        let mut rng = substream(seed, "prop-bounds");
        let u = orthonormal_matrix(&mut rng, 4, 2);
        let map = Map::new(make_bounded_perturb(&u, eta, seed).unwrap()).unwrap();
        prop_assert_eq!(map.analytic_admissibility(), Admissibility::Proven);
        let (_, frame) = assemble_frame(&map, &ExtractionConfig::default()).unwrap();
        let sampler = SamplerConfig { samples: 200, radius: 50.0, seed };
        let report = verify_bounds(&map, &frame, &sampler).unwrap();
        prop_assert!(report.all_pass, "margins {:e} {:e} {:e}",
            report.min_margin2, report.min_margin3, report.min_margin4);
    }

    // scaled chords of the concave envelope stay admissible
    #[test]
    fn graph_profiles_under_envelope_certify(
        gaps in proptest::collection::vec(0.1..50.0f64, 1..8),
        scale in 0.05..1.0f64,
        eps in 0.01..1.0f64,
    ) {
        let knots = knots_from(&gaps);
        let values: Vec<f64> = knots
            .iter()
            .map(|t| if *t == 0.0 { 0.0 } else { scale * envelope(eps, *t) })
            .collect();
        let map = Map::new(graph_spec(eps, &knots, &values)).unwrap();
        prop_assert_eq!(map.analytic_admissibility(), Admissibility::Proven);
        let radius = 2.0 * knots.last().unwrap();
        let cert = certify(&map, &SamplerConfig { samples: 500, radius, seed: 1 }).unwrap();
        prop_assert!(cert.certified, "violation {:e}", cert.max_violation);
    }

    // |f(t)| - t = sqrt(t^2 + g^2) - t exceeds eps at a knot above the envelope
    #[test]
    fn graph_profile_above_envelope_is_caught(t1 in 0.5..20.0f64, eps in 0.01..0.5f64, excess in 1.2..3.0f64) {
        let knots = [0.0, t1];
        let values = [0.0, excess * envelope(eps, t1)];
        let map = Map::new(graph_spec(eps, &knots, &values)).unwrap();
        prop_assert!(matches!(map.analytic_admissibility(), Admissibility::Violated(_)));
        let cert = certify(&map, &SamplerConfig { samples: 10, radius: 1.0, seed: 0 }).unwrap();
        prop_assert!(!cert.certified);
        let g = values[1];
        let oracle = (t1 * t1 + g * g).sqrt() - t1;
        prop_assert!(cert.max_violation >= oracle - 1e-12);
    }

    #[test]
    fn map_spec_toml_round_trips(seed in 0u64..1000, eta in 0.01..1.0f64) {
        let mut rng = substream(seed, "prop-toml");
        let u = orthonormal_matrix(&mut rng, 3, 3);
        let spec = make_bounded_perturb(&u, eta, seed).unwrap();
        let q = orthonormal_matrix(&mut rng, 3, 3);
        let spec = spec.conjugated(&q, &q.transpose()).unwrap();
        let back = MapSpec::from_toml_str(&spec.to_toml_string()).unwrap();
        prop_assert_eq!(back, spec);
    }
}

#[test]
fn bound_report_survives_report_json_bit_for_bit() {
    let map = Map::new(MapSpec::graph_sqrt(0.1)).unwrap();
    let (_, frame) = assemble_frame(&map, &ExtractionConfig::default()).unwrap();
    let report = verify_bounds(&map, &frame, &SamplerConfig { samples: 50, radius: 10.0, seed: 4 }).unwrap();
    let manifest = RunManifest {
        command: "bounds".into(),
        config: serde_json::json!({ "map": map.spec() }),
        seed: 4,
        tool_version: "test".into(),
        wall_time_ms: 0,
    };
    let text = Report::new(manifest, &report).to_json();
    let parsed = parse_report(&text).unwrap();
    let back: isostab::bounds::BoundReport = serde_json::from_value(parsed.payload).unwrap();
    assert_eq!(back, report);
    let spec: MapSpec = serde_json::from_value(parsed.manifest.config["map"].clone()).unwrap();
    assert_eq!(&spec, map.spec());
}
