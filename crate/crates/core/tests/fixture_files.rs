//! The checked-in files under fixtures/ must stay in lockstep with the
//! constructors in `deflect_core::fixtures`.

use deflect_core::metrics::parse_regions;
use deflect_core::scenario::{parse_scenario, InjectorSpec};
use deflect_core::topology::{parse_network, validate_network, Multigraph, VertexId};
use deflect_core::{fixtures, livelock, sim};

fn read_fixture(name: &str) -> String {
    let path = format!("{}/../../fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

fn net(name: &str) -> Multigraph {
    parse_network(&read_fixture(name)).unwrap()
}

#[test]
fn network_files_match_their_constructors() {
    assert_eq!(net("tri.net"), fixtures::triangle());
    assert_eq!(net("pair2.net"), fixtures::parallel_pair());
    assert_eq!(net("loops4.net"), fixtures::ring_with_buffers());
    assert_eq!(net("ring5x2.net"), fixtures::bidirected_ring(5));
    assert_eq!(net("tworing.net"), fixtures::two_rings());
}

#[test]
fn region_file_names_ring_b() {
    let region = parse_regions(&read_fixture("tworing.regions")).unwrap();
    assert_eq!(region, (5..10).map(VertexId).collect::<Vec<_>>());
}

#[test]
fn demo_scenario_parses_and_runs() {
    let s = parse_scenario(&read_fixture("demo.scenario")).unwrap();
    assert_eq!(s.network, fixtures::bidirected_ring(5));
    assert_eq!(s.packets.len(), 1);
    let (mut sim, _) =
        sim::Simulation::from_specs(s.network.clone(), "inverse-distance", "none", 1).unwrap();
    sim.seed_initial(&s.packets).unwrap();
    let mut injector = s.injector.build(1);
    let trace = sim.run(&mut *injector, 40).unwrap();
    assert_eq!(trace.offered, 2);
    assert_eq!(trace.delivered, 3);
    assert_eq!(trace.final_in_flight, 0);
}

#[test]
fn bundled_livelock_scenario_is_still_a_livelock() {
    let s = parse_scenario(&read_fixture("figure1.scenario")).unwrap();
    assert!(validate_network(&s.network).ok());
    assert_eq!(s.injector, InjectorSpec::Saturate);
    assert_eq!(s.packets.len(), s.network.edge_count(), "full occupancy");
    let (mut sim, _) =
        sim::Simulation::from_specs(s.network.clone(), "distance", "none", 0).unwrap();
    sim.seed_initial(&s.packets).unwrap();
    let mut injector = s.injector.build(0);
    let report = livelock::detect_livelock(&mut sim, &mut *injector, 4000).unwrap();
    assert!(report.found);
    assert_eq!(report.cycle.unwrap().deliveries, 0);
}
