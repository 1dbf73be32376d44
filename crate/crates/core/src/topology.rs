//! Directed multigraphs with balanced degrees: the networks on which deflection
//! routing is total (every resident packet can always be forwarded, because the
//! number of residents at a router never exceeds its out-degree).
//!
//! Self-loop edges model one unit of buffer at a router; parallel edges model
//! extra link capacity; a chain of degree-1 virtual routers spliced into an edge
//! models a wire with latency > 1.

use std::collections::VecDeque;
use std::fmt;

use crate::{Error, Result};

/// Router index, dense in `0..vertex_count`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexId(pub u32);

impl VertexId {
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Directed link index, dense in `0..edge_count`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeId(pub u32);

impl EdgeId {
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One directed link. `src == dst` is a buffer loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub id: EdgeId,
    pub src: VertexId,
    pub dst: VertexId,
}

impl Edge {
    pub fn is_loop(&self) -> bool {
        self.src == self.dst
    }
}

/// Directed multigraph. Edge ids are dense and index [`Multigraph::edges`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Multigraph {
    vertices: u32,
    edges: Vec<Edge>,
}

impl Multigraph {
    /// Builds a graph from `(src, dst)` pairs; edge ids follow list order.
    pub fn new(vertices: u32, pairs: &[(u32, u32)]) -> Result<Self> {
        let mut edges = Vec::with_capacity(pairs.len());
        for (i, &(src, dst)) in pairs.iter().enumerate() {
            if src >= vertices || dst >= vertices {
                return Err(Error::InvalidNetwork(format!(
                    "edge {i} references vertex outside 0..{vertices}"
                )));
            }
            edges.push(Edge {
                id: EdgeId(i as u32),
                src: VertexId(src),
                dst: VertexId(dst),
            });
        }
        Ok(Multigraph { vertices, edges })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices as usize
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> Result<&Edge> {
        self.edges
            .get(id.idx())
            .ok_or_else(|| Error::InvalidNetwork(format!("unknown edge id {id}")))
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> {
        (0..self.vertices).map(VertexId)
    }

    /// Out-edge ids per vertex, each list ascending by edge id.
    pub fn out_edges(&self) -> Vec<Vec<EdgeId>> {
        let mut out = vec![Vec::new(); self.vertex_count()];
        for e in &self.edges {
            out[e.src.idx()].push(e.id);
        }
        out
    }

    pub fn out_degrees(&self) -> Vec<u32> {
        let mut d = vec![0u32; self.vertex_count()];
        for e in &self.edges {
            d[e.src.idx()] += 1;
        }
        d
    }

    pub fn in_degrees(&self) -> Vec<u32> {
        let mut d = vec![0u32; self.vertex_count()];
        for e in &self.edges {
            d[e.dst.idx()] += 1;
        }
        d
    }

    /// Vertices that touch at least one edge.
    pub fn non_isolated(&self) -> Vec<VertexId> {
        let ins = self.in_degrees();
        let outs = self.out_degrees();
        self.vertices()
            .filter(|v| ins[v.idx()] > 0 || outs[v.idx()] > 0)
            .collect()
    }
}

// ── network file format ─────────────────────────────────────────────────────
//
//   # comment
//   vertices <V>
//   edge <id> <src> <dst>
//
// Edge ids must cover 0..E-1 exactly; lines may list them in any order.

/// Parses the line-oriented network format.
pub fn parse_network(text: &str) -> Result<Multigraph> {
    let mut vertices: Option<u32> = None;
    let mut listed: Vec<(usize, u32, u32, u32)> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = lineno + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let keyword = parts.next().unwrap();
        let fields: Vec<&str> = parts.collect();
        let parse_u32 = |s: &str, what: &str| -> Result<u32> {
            s.parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("{what} `{s}` is not a non-negative integer"),
            })
        };
        match keyword {
            "vertices" => {
                if vertices.is_some() {
                    return Err(Error::Parse {
                        line: lineno,
                        message: "duplicate `vertices` line".into(),
                    });
                }
                if fields.len() != 1 {
                    return Err(Error::Parse {
                        line: lineno,
                        message: "expected `vertices <count>`".into(),
                    });
                }
                vertices = Some(parse_u32(fields[0], "vertex count")?);
            }
            "edge" => {
                if vertices.is_none() {
                    return Err(Error::Parse {
                        line: lineno,
                        message: "`vertices` must appear before any `edge` line".into(),
                    });
                }
                if fields.len() != 3 {
                    return Err(Error::Parse {
                        line: lineno,
                        message: "expected `edge <id> <src> <dst>`".into(),
                    });
                }
                let id = parse_u32(fields[0], "edge id")?;
                let src = parse_u32(fields[1], "source vertex")?;
                let dst = parse_u32(fields[2], "destination vertex")?;
                listed.push((lineno, id, src, dst));
            }
            other => {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("unknown keyword `{other}`"),
                });
            }
        }
    }

    let vertices = vertices.ok_or(Error::Parse {
        line: text.lines().count().max(1),
        message: "missing `vertices` line".into(),
    })?;

    let edge_count = listed.len();
    let mut slots: Vec<Option<(usize, u32, u32)>> = vec![None; edge_count];
    for (lineno, id, src, dst) in listed {
        let slot = slots.get_mut(id as usize).ok_or(Error::Parse {
            line: lineno,
            message: format!("edge id {id} out of range for {edge_count} edges"),
        })?;
        if slot.is_some() {
            return Err(Error::Parse {
                line: lineno,
                message: format!("duplicate edge id {id}"),
            });
        }
        *slot = Some((lineno, src, dst));
    }

    let mut pairs = Vec::with_capacity(slots.len());
    for (id, slot) in slots.iter().enumerate() {
        let (lineno, src, dst) = slot.ok_or(Error::Parse {
            line: 0,
            message: format!("edge id {id} missing (ids must be dense)"),
        })?;
        if src >= vertices || dst >= vertices {
            return Err(Error::Parse {
                line: lineno,
                message: format!("edge {id} references vertex outside 0..{vertices}"),
            });
        }
        pairs.push((src, dst));
    }
    Multigraph::new(vertices, &pairs)
}

/// Serializes a graph in the same format [`parse_network`] accepts.
pub fn write_network(g: &Multigraph) -> String {
    let mut out = String::new();
    out.push_str(&format!("vertices {}\n", g.vertex_count()));
    for e in g.edges() {
        out.push_str(&format!("edge {} {} {}\n", e.id, e.src, e.dst));
    }
    out
}

// ── validation ──────────────────────────────────────────────────────────────

/// A vertex whose in-degree differs from its out-degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DegreeImbalance {
    pub vertex: VertexId,
    pub in_degree: u32,
    pub out_degree: u32,
}

/// Outcome of [`validate_network`]; `ok()` iff both violation lists are empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub imbalances: Vec<DegreeImbalance>,
    /// Ordered pairs of non-isolated vertices with no directed path.
    pub unreachable: Vec<(VertexId, VertexId)>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.imbalances.is_empty() && self.unreachable.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok() {
            return write!(f, "ok");
        }
        for im in &self.imbalances {
            writeln!(
                f,
                "vertex {}: in-degree {} != out-degree {}",
                im.vertex, im.in_degree, im.out_degree
            )?;
        }
        for (u, v) in &self.unreachable {
            writeln!(f, "no path from {u} to {v}")?;
        }
        Ok(())
    }
}

/// Checks that every vertex is degree-balanced and that the non-isolated part
/// of the graph is strongly connected (every possible destination is reachable
/// from every router that can hold a packet).
pub fn validate_network(g: &Multigraph) -> ValidationReport {
    let ins = g.in_degrees();
    let outs = g.out_degrees();
    let imbalances = g
        .vertices()
        .filter(|v| ins[v.idx()] != outs[v.idx()])
        .map(|v| DegreeImbalance {
            vertex: v,
            in_degree: ins[v.idx()],
            out_degree: outs[v.idx()],
        })
        .collect();

    let dist = shortest_distances(g);
    let live = g.non_isolated();
    let mut unreachable = Vec::new();
    for &u in &live {
        for &v in &live {
            if dist.get(u, v).is_none() {
                unreachable.push((u, v));
            }
        }
    }
    ValidationReport {
        imbalances,
        unreachable,
    }
}

// ── distances ───────────────────────────────────────────────────────────────

/// All-pairs hop counts. Unreachable pairs are `None`, never a large number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceTable {
    n: usize,
    d: Vec<Option<u32>>,
}

impl DistanceTable {
    pub fn get(&self, from: VertexId, to: VertexId) -> Option<u32> {
        self.d[from.idx() * self.n + to.idx()]
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }
}

/// Per-source BFS over directed edges. `dist[v][v] == 0` for every vertex.
pub fn shortest_distances(g: &Multigraph) -> DistanceTable {
    let n = g.vertex_count();
    let out = g.out_edges();
    let mut d = vec![None; n * n];
    let mut queue = VecDeque::new();
    for s in 0..n {
        let row = &mut d[s * n..(s + 1) * n];
        row[s] = Some(0);
        queue.clear();
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            let du = row[u].unwrap();
            for &e in &out[u] {
                let w = g.edges()[e.idx()].dst.idx();
                if row[w].is_none() {
                    row[w] = Some(du + 1);
                    queue.push_back(w);
                }
            }
        }
    }
    DistanceTable { n, d }
}

/// Longest shortest path between non-isolated vertices. Errors if any such
/// pair is unreachable; returns 0 for a graph with no edges.
pub fn diameter(g: &Multigraph) -> Result<u32> {
    let dist = shortest_distances(g);
    let live = g.non_isolated();
    let mut best = 0;
    for &u in &live {
        for &v in &live {
            match dist.get(u, v) {
                Some(d) => best = best.max(d),
                None => return Err(Error::Unreachable { from: u, to: v }),
            }
        }
    }
    Ok(best)
}

// ── Eulerian circuit ────────────────────────────────────────────────────────

/// Closed walk using every edge exactly once. Deterministic: starts at the
/// lowest-id vertex with positive degree and consumes out-edges in ascending
/// edge-id order (Hierholzer's algorithm, so sub-cycles splice correctly).
pub fn eulerian_circuit(g: &Multigraph) -> Result<Vec<EdgeId>> {
    let report = validate_network(g);
    if !report.ok() {
        return Err(Error::InvalidNetwork(format!(
            "eulerian circuit needs a balanced, connected graph: {report}"
        )));
    }
    if g.edge_count() == 0 {
        return Ok(Vec::new());
    }

    let out = g.out_edges(); // ascending by construction
    let start = g
        .vertices()
        .find(|v| !out[v.idx()].is_empty())
        .expect("edge_count > 0");

    let mut next_unused = vec![0usize; g.vertex_count()];
    let mut vertex_stack = vec![start];
    let mut edge_stack: Vec<EdgeId> = Vec::new();
    let mut circuit = Vec::with_capacity(g.edge_count());

    while let Some(&v) = vertex_stack.last() {
        let cursor = &mut next_unused[v.idx()];
        if *cursor < out[v.idx()].len() {
            let e = out[v.idx()][*cursor];
            *cursor += 1;
            vertex_stack.push(g.edges()[e.idx()].dst);
            edge_stack.push(e);
        } else {
            vertex_stack.pop();
            if let Some(e) = edge_stack.pop() {
                circuit.push(e);
            }
        }
    }
    circuit.reverse();

    debug_assert_eq!(circuit.len(), g.edge_count());
    Ok(circuit)
}

// ── derived networks ────────────────────────────────────────────────────────

/// Adds `capacity` self-loop buffer edges at `v` (fresh ids appended).
pub fn add_buffer_loops(g: &Multigraph, v: VertexId, capacity: u32) -> Result<Multigraph> {
    if v.idx() >= g.vertex_count() {
        return Err(Error::InvalidNetwork(format!(
            "vertex {v} outside 0..{}",
            g.vertex_count()
        )));
    }
    let mut out = g.clone();
    for _ in 0..capacity {
        let id = EdgeId(out.edges.len() as u32);
        out.edges.push(Edge { id, src: v, dst: v });
    }
    Ok(out)
}

/// Replaces edge `e` (u -> v) with a path u -> w1 -> ... -> wn -> v through
/// `n` fresh degree-1 virtual routers, modelling a wire of latency n + 1.
/// Edge `e` keeps its id as the first hop; the remaining n hops get fresh ids.
pub fn interpolate_virtual_routers(g: &Multigraph, e: EdgeId, n: u32) -> Result<Multigraph> {
    if n == 0 {
        return Err(Error::InvalidNetwork(
            "interpolation needs at least one virtual router".into(),
        ));
    }
    let target = *g.edge(e)?;
    let mut out = g.clone();
    let first_new = out.vertices;
    out.vertices += n;

    out.edges[e.idx()].dst = VertexId(first_new);
    for i in 0..n {
        let src = VertexId(first_new + i);
        let dst = if i + 1 < n {
            VertexId(first_new + i + 1)
        } else {
            target.dst
        };
        let id = EdgeId(out.edges.len() as u32);
        out.edges.push(Edge { id, src, dst });
    }
    Ok(out)
}
