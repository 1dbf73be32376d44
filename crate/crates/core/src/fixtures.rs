//! Small networks and configurations used across tests, benchmarks, and the
//! bundled example files. Everything here is deterministic; the random
//! builders take explicit seeds.

use crate::sim::{InitialPacket, SimRng};
use crate::topology::{EdgeId, Multigraph, VertexId};

/// Directed 3-cycle: the smallest network where every vertex has a way out.
pub fn triangle() -> Multigraph {
    Multigraph::new(3, &[(0, 1), (1, 2), (2, 0)]).unwrap()
}

/// Two vertices joined by doubled edges in both directions.
pub fn parallel_pair() -> Multigraph {
    Multigraph::new(2, &[(0, 1), (1, 0), (0, 1), (1, 0)]).unwrap()
}

/// Directed 4-cycle with two buffer loops at vertex 0.
pub fn ring_with_buffers() -> Multigraph {
    Multigraph::new(4, &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 0), (0, 0)]).unwrap()
}

/// Cycle traversable both ways: edge `v` runs v to v+1, edge `n + v` runs
/// v to v-1 (all mod `n`). [`ring_cw_edge`] and [`ring_ccw_edge`] name them.
pub fn bidirected_ring(n: u32) -> Multigraph {
    assert!(n >= 3);
    let mut pairs = Vec::with_capacity(2 * n as usize);
    for v in 0..n {
        pairs.push((v, (v + 1) % n));
    }
    for v in 0..n {
        pairs.push((v, (v + n - 1) % n));
    }
    Multigraph::new(n, &pairs).unwrap()
}

/// Edge id of v -> v+1 in [`bidirected_ring`].
pub fn ring_cw_edge(_n: u32, v: u32) -> EdgeId {
    EdgeId(v)
}

/// Edge id of v -> v-1 in [`bidirected_ring`].
pub fn ring_ccw_edge(n: u32, v: u32) -> EdgeId {
    EdgeId(n + v)
}

/// Cycle with chords: edge `v` runs v to v+1, edge `n + v` runs v to v+2.
pub fn circulant_1_2(n: u32) -> Multigraph {
    assert!(n >= 3);
    let mut pairs = Vec::with_capacity(2 * n as usize);
    for v in 0..n {
        pairs.push((v, (v + 1) % n));
    }
    for v in 0..n {
        pairs.push((v, (v + 2) % n));
    }
    Multigraph::new(n, &pairs).unwrap()
}

/// Cycle with every edge doubled: ids `0..n` and `n..2n` both run v to v+1.
pub fn doubled_cycle(n: u32) -> Multigraph {
    assert!(n >= 2);
    let mut pairs = Vec::with_capacity(2 * n as usize);
    for v in 0..n {
        pairs.push((v, (v + 1) % n));
    }
    for v in 0..n {
        pairs.push((v, (v + 1) % n));
    }
    Multigraph::new(n, &pairs).unwrap()
}

/// Two bidirected 5-rings (vertices 0-4 and 5-9) joined by a bidirected
/// bridge between 0 and 5. 22 edges; the rings keep the layout of
/// [`bidirected_ring`] with ring B's ids offset by 10, bridge ids 20 and 21.
pub fn two_rings() -> Multigraph {
    let mut pairs = Vec::with_capacity(22);
    for v in 0..5 {
        pairs.push((v, (v + 1) % 5));
    }
    for v in 0..5 {
        pairs.push((v, (v + 4) % 5));
    }
    for v in 0..5 {
        pairs.push((5 + v, 5 + (v + 1) % 5));
    }
    for v in 0..5 {
        pairs.push((5 + v, 5 + (v + 4) % 5));
    }
    pairs.push((0, 5));
    pairs.push((5, 0));
    Multigraph::new(10, &pairs).unwrap()
}

/// Union of a random Hamiltonian cycle and `extra_perms` random permutation
/// edge sets: every vertex gains equal in- and out-degree, and the cycle
/// keeps the whole graph strongly connected. Self-loops can occur and act as
/// buffers.
pub fn random_allowed_network(seed: u64, vertices: u32, extra_perms: u32) -> Multigraph {
    assert!(vertices >= 2);
    let mut rng = SimRng::new(seed, 2);
    let n = vertices as usize;
    let mut order: Vec<u32> = (0..vertices).collect();
    rng.shuffle(&mut order);
    let mut pairs: Vec<(u32, u32)> = (0..n).map(|i| (order[i], order[(i + 1) % n])).collect();
    for _ in 0..extra_perms {
        let mut image: Vec<u32> = (0..vertices).collect();
        rng.shuffle(&mut image);
        for v in 0..n {
            pairs.push((v as u32, image[v]));
        }
    }
    Multigraph::new(vertices, &pairs).unwrap()
}

/// The full-occupancy pattern on [`bidirected_ring`]`(n)` that circulates
/// forever under plain farthest-first priority: each packet on a v -> v+1
/// edge aims one vertex past its head, each packet on a v -> v-1 edge two
/// past it. Every vertex then sees both residents demand the same output
/// edge, and the loser's deflection recreates the pattern exactly.
pub fn rotating_conflict_config(n: u32) -> Vec<InitialPacket> {
    let mut config = Vec::with_capacity(2 * n as usize);
    for v in 0..n {
        let head = (v + 1) % n;
        config.push(InitialPacket::new(
            ring_cw_edge(n, v),
            VertexId((head + 1) % n),
        ));
    }
    for v in 0..n {
        let head = (v + n - 1) % n;
        config.push(InitialPacket::new(
            ring_ccw_edge(n, v),
            VertexId((head + 2) % n),
        ));
    }
    config
}

/// A packet on every edge, each destined to a seeded-random vertex other
/// than the edge's head.
pub fn full_occupancy_config(g: &Multigraph, seed: u64) -> Vec<InitialPacket> {
    let mut rng = SimRng::new(seed, 2);
    let targets = g.non_isolated();
    let mut config = Vec::with_capacity(g.edge_count());
    for e in g.edges() {
        let candidates: Vec<VertexId> =
            targets.iter().copied().filter(|&v| v != e.dst).collect();
        if candidates.is_empty() {
            continue;
        }
        config.push(InitialPacket::new(
            e.id,
            candidates[rng.pick(candidates.len())],
        ));
    }
    config
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::validate_network;

    #[test]
    fn every_fixture_is_an_allowed_network() {
        let graphs = [
            triangle(),
            parallel_pair(),
            ring_with_buffers(),
            bidirected_ring(5),
            circulant_1_2(4),
            doubled_cycle(3),
            two_rings(),
            random_allowed_network(0, 9, 2),
            random_allowed_network(1, 2, 0),
        ];
        for g in &graphs {
            assert!(validate_network(g).ok(), "{g:?}");
        }
    }

    #[test]
    fn ring_edge_names_match_the_layout() {
        let g = bidirected_ring(7);
        for v in 0..7 {
            let cw = g.edges()[ring_cw_edge(7, v).idx()];
            assert_eq!((cw.src, cw.dst), (VertexId(v), VertexId((v + 1) % 7)));
            let ccw = g.edges()[ring_ccw_edge(7, v).idx()];
            assert_eq!((ccw.src, ccw.dst), (VertexId(v), VertexId((v + 6) % 7)));
        }
    }

    #[test]
    fn conflict_config_pairs_both_residents_on_one_exit() {
        // At every vertex of the ring, the two arriving packets must both
        // want the clockwise output edge; that contention is the point.
        let n = 5;
        let g = bidirected_ring(n);
        let tables = crate::schemes::RoutingTables::build(&g);
        let config = rotating_conflict_config(n);
        for init in &config {
            let head = g.edges()[init.edge.idx()].dst;
            let desired = tables.desired.get(head, init.destination);
            assert_eq!(desired.len(), 1, "edge {} head {head}", init.edge);
            assert_eq!(desired[0], ring_cw_edge(n, head.0));
        }
    }

    #[test]
    fn full_occupancy_covers_every_edge_exactly_once() {
        let g = two_rings();
        let config = full_occupancy_config(&g, 3);
        assert_eq!(config.len(), g.edge_count());
        let mut seen = vec![false; g.edge_count()];
        for p in &config {
            assert!(!seen[p.edge.idx()]);
            seen[p.edge.idx()] = true;
            assert_ne!(g.edges()[p.edge.idx()].dst, p.destination);
        }
    }

    #[test]
    fn random_networks_vary_with_the_seed_but_not_the_call() {
        let a = random_allowed_network(5, 10, 2);
        let b = random_allowed_network(5, 10, 2);
        let c = random_allowed_network(6, 10, 2);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.edge_count(), 30);
    }
}
