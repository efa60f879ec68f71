use std::path::PathBuf;

use dpd_core::scenario::{load_scenario, parse_scenario, ObjectiveSpec, UniformRange};
use dpd_core::{ConvexSet, GraphSpec, Objective, Scenario, WeightRule};
use proptest::prelude::*;

fn bundled(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.json"))
}

#[test]
fn bundled_scenarios_load() {
    let s51 = load_scenario(bundled("example51")).unwrap();
    assert_eq!(s51.n(), 3);
    assert_eq!(s51.dim().unwrap(), 2);
    assert_eq!(s51.graph.weights, WeightRule::Metropolis);
    let s52 = load_scenario(bundled("example52")).unwrap();
    assert_eq!(s52.n(), 10);
    assert_eq!(s52.alpha, 0.8);
    assert_eq!(s52.graph.edges.len(), 20);
    assert!(matches!(s52.objectives, ObjectiveSpec::Generated { huber_uniform: UniformRange { low: 1.5, high: 2.5 } }));
    let p = s52.build().unwrap();
    assert!(p.graph.is_connected());
}

#[test]
fn example52_graph_matches_generator() {
    let s52 = load_scenario(bundled("example52")).unwrap();
    assert_eq!(dpd_core::generate_random_graph(10, 4.0, 2).unwrap(), s52.graph);
}

#[test]
fn bundled_round_trip() {
    for name in ["example51", "example52"] {
        let s = load_scenario(bundled(name)).unwrap();
        assert_eq!(parse_scenario(&s.to_json().unwrap()).unwrap(), s);
    }
}

#[test]
fn unbounded_box_round_trip() {
    let text = r#"{
        "name": "box",
        "graph": {"n": 1, "weights": "unit"},
        "objectives": [{"type": "huber", "center": [0.0, 1.0]}],
        "sets": [{"type": "box", "lower": [null, -1.0], "upper": [2.0, null]}],
        "alpha": 0.1
    }"#;
    let s = parse_scenario(text).unwrap();
    let ConvexSet::Box { lower, upper } = &s.sets.as_ref().unwrap()[0] else { panic!() };
    assert_eq!(lower[0], f64::NEG_INFINITY);
    assert_eq!(upper[1], f64::INFINITY);
    assert_eq!(parse_scenario(&s.to_json().unwrap()).unwrap(), s);
}

fn arb_scenario() -> impl Strategy<Value = Scenario> {
    (1usize..6, 1usize..4, any::<u64>(), 0.01f64..2.0, 0usize..50_000).prop_flat_map(|(n, m, seed, alpha, iters)| {
        let edges = proptest::collection::vec((1..=n, 1..=n), 0..8);
        let centers = proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, m), n);
        let radii = proptest::collection::vec(0.1f64..3.0, n);
        (edges, centers, radii, any::<bool>()).prop_map(move |(edges, centers, radii, constrained)| Scenario {
            name: format!("arb{n}"),
            description: None,
            graph: GraphSpec::new(n, edges, WeightRule::Metropolis),
            sets: constrained.then(|| {
                centers.iter().zip(&radii).map(|(c, r)| ConvexSet::ball(c.clone(), *r).unwrap()).collect()
            }),
            objectives: ObjectiveSpec::Explicit(centers.into_iter().map(|center| Objective::Huber { center }).collect()),
            alpha,
            dgd_alpha: None,
            max_iters: iters,
            stop_tol: 1e-9,
            seed,
            x0: None,
            lambda0: None,
        })
    })
}

proptest! {
    #[test]
    fn emit_then_load_is_identity(s in arb_scenario()) {
        let back = parse_scenario(&s.to_json().unwrap()).unwrap();
        prop_assert_eq!(back, s);
    }
}
