//! Conflict-resolution schemes. A scheme ranks the residents of a vertex each
//! tick; the engine grants edge choices in descending rank order, so a scheme
//! is just a priority rule plus an edge preference. All of them are total:
//! whatever a packet is denied, some free edge is always chosen (deflection).
//!
//! Spec strings (CLI and scenario files):
//! `distance`, `inverse-distance`, `random`, `eulerian`,
//! `collisions:<base>:<max>`, `promote:<sigma>:<tau>`.

use std::sync::Arc;

use crate::livelock::EpochLabel;
use crate::sim::{Packet, Resident, SimRng, Tick};
use crate::topology::{
    diameter, eulerian_circuit, shortest_distances, DistanceTable, EdgeId, Multigraph, VertexId,
};
use crate::{Error, Result};

/// Collision counters on packets are capped here unless a counting scheme
/// supplies its own bound.
pub const DEFAULT_COLLISION_CAP: u32 = 255;

/// Lexicographic priority; a larger key routes first. Composed schemes prefix
/// their tier in front of their base's key, so outer layers always dominate.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct PriorityKey(pub Vec<i64>);

impl PriorityKey {
    pub fn flat() -> Self {
        PriorityKey(Vec::new())
    }

    fn prefixed(tier: i64, mut base: PriorityKey) -> Self {
        base.0.insert(0, tier);
        base
    }
}

/// For every (vertex, destination): the output edges on some shortest path,
/// ascending by edge id. Empty exactly when the destination is the vertex
/// itself or unreachable.
#[derive(Debug, Clone)]
pub struct DesiredEdges {
    n: usize,
    per: Vec<Vec<EdgeId>>,
}

impl DesiredEdges {
    pub fn build(g: &Multigraph, dist: &DistanceTable) -> Self {
        let n = g.vertex_count();
        let mut per = vec![Vec::new(); n * n];
        for v in g.vertices() {
            for &e in g.out_edges()[v.idx()].iter() {
                let head = g.edges()[e.idx()].dst;
                for dest in g.vertices() {
                    if let (Some(d), Some(dh)) = (dist.get(v, dest), dist.get(head, dest)) {
                        if d > 0 && dh + 1 == d {
                            per[v.idx() * n + dest.idx()].push(e);
                        }
                    }
                }
            }
        }
        DesiredEdges { n, per }
    }

    pub fn get(&self, at: VertexId, dest: VertexId) -> &[EdgeId] {
        &self.per[at.idx() * self.n + dest.idx()]
    }
}

/// Immutable routing context shared by the engine and every scheme object.
#[derive(Debug, Clone)]
pub struct RoutingTables {
    pub dist: DistanceTable,
    pub desired: DesiredEdges,
    /// Longest finite shortest path, if the graph is connected.
    pub diameter: Option<u32>,
}

impl RoutingTables {
    pub fn build(g: &Multigraph) -> Self {
        let dist = shortest_distances(g);
        let desired = DesiredEdges::build(g, &dist);
        let diameter = diameter(g).ok();
        RoutingTables {
            dist,
            desired,
            diameter,
        }
    }
}

/// Behavioral contract of a scheme. Per vertex and tick the engine asks for a
/// ranking of the residents, then grants each one an edge in descending rank
/// order; equal keys fall back to [`Scheme::order_ties`] (ascending packet id
/// unless the scheme is randomized). Schemes hold only immutable tables.
pub trait Scheme {
    /// Spec string this scheme was built from.
    fn spec(&self) -> String;

    /// Priority keys, parallel to `residents` (all at one vertex).
    fn rank(&self, residents: &[Resident], clock: Tick) -> Vec<PriorityKey>;

    /// Orders a group of residents whose keys compare equal.
    fn order_ties(&self, group: &mut [usize], residents: &[Resident], _rng: &mut SimRng) {
        group.sort_by_key(|&i| residents[i].packet.id);
    }

    /// Output edges this resident's rule wants (its collision set).
    fn desired_edges(&self, r: &Resident) -> Vec<EdgeId>;

    /// Picks one of `free` (non-empty, ascending) for the resident.
    fn choose_edge(&self, r: &Resident, free: &[EdgeId], rng: &mut SimRng) -> EdgeId;

    /// Placement edge for a packet injected at `source`.
    fn place(&self, source: VertexId, destination: VertexId, free: &[EdgeId], rng: &mut SimRng)
        -> EdgeId;

    /// Label stamped on packets entering at `clock` (epoch wrappers only).
    fn label_for_entry(&self, _clock: Tick) -> Option<EpochLabel> {
        None
    }

    /// True once this scheme's bounded priority value has topped out for `p`.
    fn saturated(&self, _p: &Packet) -> bool {
        false
    }

    /// Hook run after each routing decision (promotion flips its flag here).
    fn on_routed(&self, _p: &mut Packet) {}

    /// Cap for stored per-packet collision counters.
    fn collision_cap(&self) -> u32 {
        DEFAULT_COLLISION_CAP
    }

    /// Certified worst-case flush time on `g`, when one exists.
    fn analytic_flush_bound(&self, _g: &Multigraph) -> Option<Tick> {
        None
    }

    /// Phase of any clock dependence (0 for clock-free schemes); folded into
    /// the evolution fingerprint so cycle detection stays sound.
    fn clock_phase(&self, _clock: Tick) -> u64 {
        0
    }
}

// ── shared edge selection ───────────────────────────────────────────────────

/// Greedy rule: first free desired edge (they all shorten the path equally),
/// otherwise the free edge minimizing the remaining distance, ties to the
/// lowest edge id. `free` is ascending, which supplies both tie rules.
fn greedy_pick(
    tables: &RoutingTables,
    g: &Multigraph,
    dest: VertexId,
    desired: &[EdgeId],
    free: &[EdgeId],
) -> EdgeId {
    debug_assert!(!free.is_empty());
    if let Some(&e) = free.iter().find(|e| desired.contains(e)) {
        return e;
    }
    let mut best = free[0];
    let mut best_d = u32::MAX;
    for &e in free {
        let head = g.edges()[e.idx()].dst;
        let d = tables.dist.get(head, dest).unwrap_or(u32::MAX);
        if d < best_d {
            best_d = d;
            best = e;
        }
    }
    best
}

fn random_pick(desired: &[EdgeId], free: &[EdgeId], rng: &mut SimRng) -> EdgeId {
    let candidates: Vec<EdgeId> = free.iter().copied().filter(|e| desired.contains(e)).collect();
    if candidates.is_empty() {
        free[rng.pick(free.len())]
    } else {
        candidates[rng.pick(candidates.len())]
    }
}

// ── distance priority (both orientations) ───────────────────────────────────

/// Priority by remaining distance. `far_wins` is the plain orientation (the
/// one that can livelock); with `far_wins == false` the nearest packet wins,
/// which flushes any configuration within packets x diameter.
pub struct DistancePriority {
    g: Multigraph,
    tables: Arc<RoutingTables>,
    far_wins: bool,
}

impl DistancePriority {
    pub fn new(g: &Multigraph, tables: &Arc<RoutingTables>, far_wins: bool) -> Self {
        DistancePriority {
            g: g.clone(),
            tables: tables.clone(),
            far_wins,
        }
    }

    fn remaining(&self, r: &Resident) -> i64 {
        self.tables
            .dist
            .get(r.vertex, r.packet.destination)
            .unwrap_or(u32::MAX) as i64
    }
}

impl Scheme for DistancePriority {
    fn spec(&self) -> String {
        if self.far_wins { "distance" } else { "inverse-distance" }.into()
    }

    fn rank(&self, residents: &[Resident], _clock: Tick) -> Vec<PriorityKey> {
        residents
            .iter()
            .map(|r| {
                let d = self.remaining(r);
                PriorityKey(vec![if self.far_wins { d } else { -d }])
            })
            .collect()
    }

    fn desired_edges(&self, r: &Resident) -> Vec<EdgeId> {
        self.tables.desired.get(r.vertex, r.packet.destination).to_vec()
    }

    fn choose_edge(&self, r: &Resident, free: &[EdgeId], _rng: &mut SimRng) -> EdgeId {
        let desired = self.tables.desired.get(r.vertex, r.packet.destination);
        greedy_pick(&self.tables, &self.g, r.packet.destination, desired, free)
    }

    fn place(
        &self,
        source: VertexId,
        destination: VertexId,
        free: &[EdgeId],
        _rng: &mut SimRng,
    ) -> EdgeId {
        let desired = self.tables.desired.get(source, destination);
        greedy_pick(&self.tables, &self.g, destination, desired, free)
    }

    fn analytic_flush_bound(&self, g: &Multigraph) -> Option<Tick> {
        if self.far_wins {
            None // the plain orientation is not flushable
        } else {
            let k = self.tables.diameter? as Tick;
            Some(g.edge_count() as Tick * k)
        }
    }
}

// ── random scheme ───────────────────────────────────────────────────────────

/// No priority at all: conflict order and every edge choice are drawn
/// uniformly from the run's seeded stream.
pub struct RandomScheme {
    tables: Arc<RoutingTables>,
}

impl RandomScheme {
    pub fn new(tables: &Arc<RoutingTables>) -> Self {
        RandomScheme {
            tables: tables.clone(),
        }
    }
}

impl Scheme for RandomScheme {
    fn spec(&self) -> String {
        "random".into()
    }

    fn rank(&self, residents: &[Resident], _clock: Tick) -> Vec<PriorityKey> {
        vec![PriorityKey::flat(); residents.len()]
    }

    fn order_ties(&self, group: &mut [usize], _residents: &[Resident], rng: &mut SimRng) {
        rng.shuffle(group);
    }

    fn desired_edges(&self, r: &Resident) -> Vec<EdgeId> {
        self.tables.desired.get(r.vertex, r.packet.destination).to_vec()
    }

    fn choose_edge(&self, r: &Resident, free: &[EdgeId], rng: &mut SimRng) -> EdgeId {
        let desired = self.tables.desired.get(r.vertex, r.packet.destination);
        random_pick(desired, free, rng)
    }

    fn place(
        &self,
        source: VertexId,
        destination: VertexId,
        free: &[EdgeId],
        rng: &mut SimRng,
    ) -> EdgeId {
        let desired = self.tables.desired.get(source, destination);
        random_pick(desired, free, rng)
    }
}

// ── collision counting ──────────────────────────────────────────────────────

/// Priority is the packet's (capped) denial count; equal counts defer to the
/// base scheme. Its bounded value is what scheme promotion watches.
pub struct CollisionCounting {
    base: Box<dyn Scheme>,
    max_count: u32,
}

impl CollisionCounting {
    pub fn new(base: Box<dyn Scheme>, max_count: u32) -> Result<Self> {
        if max_count == 0 {
            return Err(Error::Spec(
                format!("collisions:{}:{max_count}", base.spec()),
                "max count must be at least 1".into(),
            ));
        }
        Ok(CollisionCounting { base, max_count })
    }
}

impl Scheme for CollisionCounting {
    fn spec(&self) -> String {
        format!("collisions:{}:{}", self.base.spec(), self.max_count)
    }

    fn rank(&self, residents: &[Resident], clock: Tick) -> Vec<PriorityKey> {
        let base = self.base.rank(residents, clock);
        residents
            .iter()
            .zip(base)
            .map(|(r, key)| {
                let count = r.packet.collision_count.min(self.max_count) as i64;
                PriorityKey::prefixed(count, key)
            })
            .collect()
    }

    fn order_ties(&self, group: &mut [usize], residents: &[Resident], rng: &mut SimRng) {
        self.base.order_ties(group, residents, rng);
    }

    fn desired_edges(&self, r: &Resident) -> Vec<EdgeId> {
        self.base.desired_edges(r)
    }

    fn choose_edge(&self, r: &Resident, free: &[EdgeId], rng: &mut SimRng) -> EdgeId {
        self.base.choose_edge(r, free, rng)
    }

    fn place(
        &self,
        source: VertexId,
        destination: VertexId,
        free: &[EdgeId],
        rng: &mut SimRng,
    ) -> EdgeId {
        self.base.place(source, destination, free, rng)
    }

    fn saturated(&self, p: &Packet) -> bool {
        p.collision_count >= self.max_count
    }

    fn on_routed(&self, p: &mut Packet) {
        self.base.on_routed(p);
    }

    fn collision_cap(&self) -> u32 {
        self.max_count
    }

    fn clock_phase(&self, clock: Tick) -> u64 {
        self.base.clock_phase(clock)
    }
}

// ── Eulerian circuit scheme ─────────────────────────────────────────────────

/// Every packet follows a fixed Eulerian circuit: the packet arriving on edge
/// e continues on e's successor. Successors of distinct edges are distinct, so
/// no two residents ever want the same edge and nothing is ever denied.
pub struct EulerianScheme {
    successor: Vec<EdgeId>,
}

impl EulerianScheme {
    pub fn new(g: &Multigraph) -> Result<Self> {
        let circuit = eulerian_circuit(g)?;
        let mut successor = vec![EdgeId(0); circuit.len()];
        for (i, &e) in circuit.iter().enumerate() {
            successor[e.idx()] = circuit[(i + 1) % circuit.len()];
        }
        Ok(EulerianScheme { successor })
    }

    pub fn from_circuit(g: &Multigraph, circuit: &[EdgeId]) -> Result<Self> {
        if circuit.len() != g.edge_count() {
            return Err(Error::InvalidNetwork(format!(
                "circuit covers {} of {} edges",
                circuit.len(),
                g.edge_count()
            )));
        }
        let mut successor = vec![None; circuit.len()];
        for (i, &e) in circuit.iter().enumerate() {
            let next = circuit[(i + 1) % circuit.len()];
            if g.edges()[e.idx()].dst != g.edges()[next.idx()].src {
                return Err(Error::InvalidNetwork(format!(
                    "circuit breaks between edges {e} and {next}"
                )));
            }
            if successor[e.idx()].replace(next).is_some() {
                return Err(Error::InvalidNetwork(format!(
                    "edge {e} appears twice in the circuit"
                )));
            }
        }
        Ok(EulerianScheme {
            successor: successor.into_iter().map(Option::unwrap).collect(),
        })
    }
}

impl Scheme for EulerianScheme {
    fn spec(&self) -> String {
        "eulerian".into()
    }

    fn rank(&self, residents: &[Resident], _clock: Tick) -> Vec<PriorityKey> {
        vec![PriorityKey::flat(); residents.len()]
    }

    fn desired_edges(&self, r: &Resident) -> Vec<EdgeId> {
        vec![self.successor[r.arrived_on.idx()]]
    }

    fn choose_edge(&self, r: &Resident, _free: &[EdgeId], _rng: &mut SimRng) -> EdgeId {
        // Always free; the engine diagnoses the impossible double-booking.
        self.successor[r.arrived_on.idx()]
    }

    fn place(
        &self,
        _source: VertexId,
        _destination: VertexId,
        free: &[EdgeId],
        _rng: &mut SimRng,
    ) -> EdgeId {
        free[0]
    }

    fn analytic_flush_bound(&self, g: &Multigraph) -> Option<Tick> {
        Some(g.edge_count() as Tick)
    }
}

// ── scheme promotion ────────────────────────────────────────────────────────

/// Runs `sigma` until a packet's sigma-priority saturates, then permanently
/// promotes the packet into a strictly higher tier governed by `tau`. With no
/// saturation it is exactly sigma; with every packet promoted, exactly tau.
pub struct Promote {
    sigma: Box<dyn Scheme>,
    tau: Box<dyn Scheme>,
}

impl Promote {
    pub fn new(sigma: Box<dyn Scheme>, tau: Box<dyn Scheme>) -> Self {
        Promote { sigma, tau }
    }
}

impl Scheme for Promote {
    fn spec(&self) -> String {
        format!("promote:{}:{}", self.sigma.spec(), self.tau.spec())
    }

    fn rank(&self, residents: &[Resident], clock: Tick) -> Vec<PriorityKey> {
        let lower = self.sigma.rank(residents, clock);
        let upper = self.tau.rank(residents, clock);
        residents
            .iter()
            .zip(lower.into_iter().zip(upper))
            .map(|(r, (sk, tk))| {
                if r.packet.promoted {
                    PriorityKey::prefixed(1, tk)
                } else {
                    PriorityKey::prefixed(0, sk)
                }
            })
            .collect()
    }

    fn order_ties(&self, group: &mut [usize], residents: &[Resident], rng: &mut SimRng) {
        // Keys compared equal, so the whole group sits in one tier.
        if residents[group[0]].packet.promoted {
            self.tau.order_ties(group, residents, rng);
        } else {
            self.sigma.order_ties(group, residents, rng);
        }
    }

    fn desired_edges(&self, r: &Resident) -> Vec<EdgeId> {
        if r.packet.promoted {
            self.tau.desired_edges(r)
        } else {
            self.sigma.desired_edges(r)
        }
    }

    fn choose_edge(&self, r: &Resident, free: &[EdgeId], rng: &mut SimRng) -> EdgeId {
        if r.packet.promoted {
            self.tau.choose_edge(r, free, rng)
        } else {
            self.sigma.choose_edge(r, free, rng)
        }
    }

    fn place(
        &self,
        source: VertexId,
        destination: VertexId,
        free: &[EdgeId],
        rng: &mut SimRng,
    ) -> EdgeId {
        // New packets start unpromoted.
        self.sigma.place(source, destination, free, rng)
    }

    fn on_routed(&self, p: &mut Packet) {
        if p.promoted {
            self.tau.on_routed(p);
        } else {
            self.sigma.on_routed(p);
            if self.sigma.saturated(p) {
                p.promoted = true;
            }
        }
    }

    fn collision_cap(&self) -> u32 {
        self.sigma.collision_cap()
    }

    fn clock_phase(&self, clock: Tick) -> u64 {
        self.sigma
            .clock_phase(clock)
            .wrapping_mul(0x9e37_79b9_7f4a_7c15)
            ^ self.tau.clock_phase(clock)
    }
}

// ── spec parsing ────────────────────────────────────────────────────────────

/// Builds a scheme from its spec string against a specific graph.
pub fn build_scheme(
    spec: &str,
    g: &Multigraph,
    tables: &Arc<RoutingTables>,
) -> Result<Box<dyn Scheme>> {
    let tokens: Vec<&str> = spec.split(':').collect();
    let mut cursor = 0usize;
    let scheme = parse_tokens(spec, &tokens, &mut cursor, g, tables)?;
    if cursor != tokens.len() {
        return Err(Error::Spec(
            spec.into(),
            format!("trailing tokens after `{}`", tokens[..cursor].join(":")),
        ));
    }
    Ok(scheme)
}

fn parse_tokens(
    spec: &str,
    tokens: &[&str],
    cursor: &mut usize,
    g: &Multigraph,
    tables: &Arc<RoutingTables>,
) -> Result<Box<dyn Scheme>> {
    let head = *tokens.get(*cursor).ok_or_else(|| {
        Error::Spec(spec.into(), "expected a scheme name".into())
    })?;
    *cursor += 1;
    match head {
        "distance" => Ok(Box::new(DistancePriority::new(g, tables, true))),
        "inverse-distance" => Ok(Box::new(DistancePriority::new(g, tables, false))),
        "random" => Ok(Box::new(RandomScheme::new(tables))),
        "eulerian" => Ok(Box::new(EulerianScheme::new(g)?)),
        "collisions" => {
            let base = parse_tokens(spec, tokens, cursor, g, tables)?;
            let max = *tokens.get(*cursor).ok_or_else(|| {
                Error::Spec(spec.into(), "collisions needs a trailing max count".into())
            })?;
            *cursor += 1;
            let max_count: u32 = max.parse().map_err(|_| {
                Error::Spec(spec.into(), format!("`{max}` is not a count"))
            })?;
            Ok(Box::new(CollisionCounting::new(base, max_count)?))
        }
        "promote" => {
            let sigma = parse_tokens(spec, tokens, cursor, g, tables)?;
            let tau = parse_tokens(spec, tokens, cursor, g, tables)?;
            Ok(Box::new(Promote::new(sigma, tau)))
        }
        other => Err(Error::Spec(
            spec.into(),
            format!("unknown scheme `{other}`"),
        )),
    }
}
