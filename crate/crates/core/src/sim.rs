//! Synchronous step engine. Each tick runs five phases in a fixed order:
//! arrivals (edge -> resident at the edge's head), exits (residents at their
//! destination leave), routing (the scheme assigns every remaining resident a
//! distinct output edge, highest priority first), injection (requests accepted
//! while free output edges remain), then the clock advances.
//!
//! Everything is deterministic given the run seed: ties are broken by ascending
//! packet id unless the scheme is randomized, randomness comes from counted
//! ChaCha streams, and vertices/edges are always visited in ascending id order.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use rand_core::{RngCore, SeedableRng};
use sha2::{Digest as _, Sha256};

use crate::injector::Injector;
use crate::livelock::{self, EpochLabel};
use crate::schemes::{self, RoutingTables, Scheme};
use crate::topology::{validate_network, EdgeId, Multigraph, VertexId};
use crate::{Error, Result};

pub type Tick = u64;

/// Packet index, dense in order of creation (initial placement, then injection).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PacketId(pub u64);

impl PacketId {
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for PacketId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Packet {
    pub id: PacketId,
    pub source: VertexId,
    pub destination: VertexId,
    pub entry_time: Tick,
    /// Epoch label stamped at entry; never changes afterwards.
    pub label: Option<EpochLabel>,
    /// Times this packet was denied every desired edge (capped).
    pub collision_count: u32,
    /// Monotone: once promoted, a packet stays promoted.
    pub promoted: bool,
}

/// A packet together with the edge it just arrived on, resident at `vertex`.
#[derive(Debug, Clone, Copy)]
pub struct Resident {
    pub packet: Packet,
    pub arrived_on: EdgeId,
    pub vertex: VertexId,
}

/// Entry request for one new packet. Destination must differ from the source
/// and be reachable from it; [`InjectionRequest::validated`] checks both.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InjectionRequest {
    pub source: VertexId,
    pub destination: VertexId,
}

impl InjectionRequest {
    pub fn validated(
        source: VertexId,
        destination: VertexId,
        dist: &crate::topology::DistanceTable,
    ) -> Result<Self> {
        if source == destination {
            return Err(Error::Injection(format!(
                "source and destination are both {source}"
            )));
        }
        if dist.get(source, destination).is_none() {
            return Err(Error::Injection(format!(
                "{destination} is not reachable from {source}"
            )));
        }
        Ok(InjectionRequest {
            source,
            destination,
        })
    }
}

/// A packet pre-placed on an edge before the first tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InitialPacket {
    pub edge: EdgeId,
    pub destination: VertexId,
    pub collision_count: u32,
    pub promoted: bool,
}

impl InitialPacket {
    pub fn new(edge: EdgeId, destination: VertexId) -> Self {
        InitialPacket {
            edge,
            destination,
            collision_count: 0,
            promoted: false,
        }
    }
}

/// What one tick did.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// Packets that exited this tick, with their latency.
    pub delivered: Vec<(Packet, Tick)>,
    pub accepted: Vec<Packet>,
    pub rejected: Vec<InjectionRequest>,
    /// Desired-edge denials this tick (a packet got none of its desired edges).
    pub collisions: u64,
    /// Distinct epoch labels in flight after injection.
    pub distinct_labels: usize,
}

// ── counted RNG ─────────────────────────────────────────────────────────────

/// Seeded ChaCha stream that draws exactly one word per decision, so the
/// stream position (and hence the full RNG state) is `(seed, stream, draws)`.
#[derive(Debug, Clone)]
pub struct SimRng {
    seed: u64,
    stream: u64,
    draws: u64,
    rng: rand_chacha::ChaCha8Rng,
}

impl SimRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        SimRng {
            seed,
            stream,
            draws: 0,
            rng,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.draws += 1;
        self.rng.next_u64()
    }

    /// Uniform index in `0..n`.
    pub fn pick(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (self.next_u64() % n as u64) as usize
    }

    /// True with probability `p`.
    pub fn chance(&mut self, p: f64) -> bool {
        ((self.next_u64() >> 11) as f64) * (1.0 / (1u64 << 53) as f64) < p
    }

    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.pick(i + 1);
            xs.swap(i, j);
        }
    }

    pub fn draws(&self) -> u64 {
        self.draws
    }
}

impl PartialEq for SimRng {
    fn eq(&self, other: &Self) -> bool {
        // Position is a pure function of (seed, stream, draws).
        (self.seed, self.stream, self.draws) == (other.seed, other.stream, other.draws)
    }
}

// ── state and fingerprints ──────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub clock: Tick,
    /// One slot per edge; `Some` while a packet is in flight on it.
    pub occupancy: Vec<Option<Packet>>,
    pub rng: SimRng,
    pub next_packet_id: u64,
}

/// Fixed-width collision-resistant state digest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StateDigest(pub [u8; 32]);

impl fmt::Display for StateDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

fn label_code(label: Option<EpochLabel>) -> u8 {
    match label {
        None => 0,
        Some(EpochLabel::R) => 1,
        Some(EpochLabel::S) => 2,
        Some(EpochLabel::P) => 3,
        Some(EpochLabel::A) => 4,
        Some(EpochLabel::B) => 5,
    }
}

/// Digest of the configuration: occupancy pattern plus per-packet
/// (destination, label, collision count, promoted). The clock is never
/// included. With `canonicalize` packet ids and entry times are excluded, so
/// a recurring configuration hashes equal even though the identities rotated;
/// without it they are included.
pub fn state_fingerprint(state: &NetworkState, canonicalize: bool) -> StateDigest {
    let mut h = Sha256::new();
    h.update(b"config-v1");
    h.update((state.occupancy.len() as u64).to_le_bytes());
    for slot in &state.occupancy {
        match slot {
            None => h.update([0u8]),
            Some(p) => {
                h.update([1u8, label_code(p.label), p.promoted as u8]);
                h.update(p.destination.0.to_le_bytes());
                h.update(p.collision_count.to_le_bytes());
                if !canonicalize {
                    h.update(p.id.0.to_le_bytes());
                    h.update(p.entry_time.to_le_bytes());
                }
            }
        }
    }
    StateDigest(h.finalize().into())
}

/// Digest of everything the next steps depend on. Packet ids are relabeled to
/// their rank among in-flight ids (order-preserving, so id-order tie-breaks
/// commute with the relabeling); RNG position, injector state and the scheme's
/// clock phase are folded in. Recurrence of this digest implies the run is
/// genuinely periodic from the first occurrence on.
pub fn evolution_fingerprint(
    state: &NetworkState,
    scheme_phase: u64,
    injector_fingerprint: u64,
) -> StateDigest {
    let mut ids: Vec<u64> = state
        .occupancy
        .iter()
        .flatten()
        .map(|p| p.id.0)
        .collect();
    ids.sort_unstable();
    let rank = |id: u64| ids.binary_search(&id).expect("in-flight id") as u64;

    let mut h = Sha256::new();
    h.update(b"evolution-v1");
    h.update(scheme_phase.to_le_bytes());
    h.update(injector_fingerprint.to_le_bytes());
    h.update(state.rng.seed.to_le_bytes());
    h.update(state.rng.stream.to_le_bytes());
    h.update(state.rng.draws.to_le_bytes());
    h.update((state.occupancy.len() as u64).to_le_bytes());
    for slot in &state.occupancy {
        match slot {
            None => h.update([0u8]),
            Some(p) => {
                h.update([1u8, label_code(p.label), p.promoted as u8]);
                h.update(rank(p.id.0).to_le_bytes());
                h.update(p.destination.0.to_le_bytes());
                h.update(p.collision_count.to_le_bytes());
            }
        }
    }
    StateDigest(h.finalize().into())
}

// ── trace ───────────────────────────────────────────────────────────────────

/// Final per-packet accounting; `exit`/`latency` stay `None` while in flight.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketRecord {
    pub id: PacketId,
    pub src: VertexId,
    pub dst: VertexId,
    pub entry: Tick,
    pub exit: Option<Tick>,
    pub latency: Option<Tick>,
    pub label: Option<EpochLabel>,
    pub collisions: u32,
    pub promoted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepRecord {
    pub t: Tick,
    pub deliveries: u64,
    pub accepted: u64,
    pub rejections: u64,
    pub collisions: u64,
    pub in_flight: u64,
    pub distinct_labels: usize,
}

/// Aggregated outcome of [`Simulation::run`].
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub seed: u64,
    pub packets: Vec<PacketRecord>,
    pub steps: Vec<StepRecord>,
    pub offered: u64,
    pub accepted: u64,
    pub rejected: u64,
    pub delivered: u64,
    pub collisions: u64,
    /// Ticks on which three or more distinct labels were in flight.
    pub label_breach_ticks: u64,
    pub final_in_flight: u64,
    pub final_clock: Tick,
}

// ── simulation ──────────────────────────────────────────────────────────────

/// Read-only view handed to injectors while they build requests.
pub struct SimContext<'a> {
    pub g: &'a Multigraph,
    pub dist: &'a crate::topology::DistanceTable,
    /// Non-isolated vertices: the valid destinations, ascending.
    pub targets: &'a [VertexId],
    pub out_degrees: &'a [u32],
}

pub struct Simulation {
    g: Multigraph,
    tables: Arc<RoutingTables>,
    out_edges: Vec<Vec<EdgeId>>,
    out_degrees: Vec<u32>,
    targets: Vec<VertexId>,
    scheme: Box<dyn Scheme>,
    collision_cap: u32,
    state: NetworkState,
    records: Vec<PacketRecord>,
}

impl Simulation {
    /// Builds a simulation on a validated network. The scheme must have been
    /// built against `tables` for the same graph.
    pub fn new(
        g: Multigraph,
        tables: Arc<RoutingTables>,
        scheme: Box<dyn Scheme>,
        seed: u64,
    ) -> Result<Self> {
        let report = validate_network(&g);
        if !report.ok() {
            return Err(Error::InvalidNetwork(report.to_string()));
        }
        let occupancy = vec![None; g.edge_count()];
        let out_edges = g.out_edges();
        let out_degrees = g.out_degrees();
        let targets = g.non_isolated();
        let collision_cap = scheme.collision_cap();
        Ok(Simulation {
            g,
            tables,
            out_edges,
            out_degrees,
            targets,
            scheme,
            collision_cap,
            state: NetworkState {
                clock: 0,
                occupancy,
                rng: SimRng::new(seed, 0),
                next_packet_id: 0,
            },
            records: Vec::new(),
        })
    }

    /// Convenience: parse scheme and wrapper specs and build the simulation.
    /// Returns the delivery deadline (2T) when a wrapper is active.
    pub fn from_specs(
        g: Multigraph,
        scheme_spec: &str,
        wrapper_spec: &str,
        seed: u64,
    ) -> Result<(Simulation, Option<Tick>)> {
        let tables = Arc::new(RoutingTables::build(&g));
        let base = schemes::build_scheme(scheme_spec, &g, &tables)?;
        let (scheme, deadline) = livelock::apply_wrapper(base, wrapper_spec, &g, &tables)?;
        let sim = Simulation::new(g, tables, scheme, seed)?;
        Ok((sim, deadline))
    }

    pub fn graph(&self) -> &Multigraph {
        &self.g
    }

    pub fn tables(&self) -> &RoutingTables {
        &self.tables
    }

    pub fn scheme(&self) -> &dyn Scheme {
        self.scheme.as_ref()
    }

    pub fn clock(&self) -> Tick {
        self.state.clock
    }

    pub fn occupancy(&self) -> &[Option<Packet>] {
        &self.state.occupancy
    }

    pub fn in_flight(&self) -> u64 {
        self.state.occupancy.iter().flatten().count() as u64
    }

    pub fn state(&self) -> &NetworkState {
        &self.state
    }

    /// Restores a snapshot taken from this same simulation (cycle replay).
    pub fn restore_state(&mut self, state: NetworkState) {
        self.state = state;
    }

    pub fn records(&self) -> &[PacketRecord] {
        &self.records
    }

    pub fn context(&self) -> SimContext<'_> {
        SimContext {
            g: &self.g,
            dist: &self.tables.dist,
            targets: &self.targets,
            out_degrees: &self.out_degrees,
        }
    }

    pub fn fingerprint(&self, canonicalize: bool) -> StateDigest {
        state_fingerprint(&self.state, canonicalize)
    }

    /// Places packets on edges before the first tick. Labels are stamped as if
    /// the packets entered at clock 0; sources are the heads of their edges.
    pub fn seed_initial(&mut self, packets: &[InitialPacket]) -> Result<()> {
        if self.state.clock != 0 || self.state.next_packet_id != 0 {
            return Err(Error::Sim(
                "initial packets must be placed before the first tick".into(),
            ));
        }
        for init in packets {
            let edge = *self.g.edge(init.edge)?;
            if self.state.occupancy[edge.id.idx()].is_some() {
                return Err(Error::Sim(format!(
                    "two initial packets on edge {}",
                    edge.id
                )));
            }
            if self.tables.dist.get(edge.dst, init.destination).is_none() {
                return Err(Error::Injection(format!(
                    "destination {} unreachable from edge {} head {}",
                    init.destination, edge.id, edge.dst
                )));
            }
            let packet = Packet {
                id: PacketId(self.state.next_packet_id),
                source: edge.dst,
                destination: init.destination,
                entry_time: 0,
                label: self.scheme.label_for_entry(0),
                collision_count: init.collision_count.min(self.collision_cap),
                promoted: init.promoted,
            };
            self.state.next_packet_id += 1;
            self.push_record(&packet);
            self.state.occupancy[edge.id.idx()] = Some(packet);
        }
        Ok(())
    }

    fn push_record(&mut self, p: &Packet) {
        let record = PacketRecord {
            id: p.id,
            src: p.source,
            dst: p.destination,
            entry: p.entry_time,
            exit: None,
            latency: None,
            label: p.label,
            collisions: p.collision_count,
            promoted: p.promoted,
        };
        if p.id.idx() < self.records.len() {
            // Cycle replay re-creates a packet id; overwrite its record.
            self.records[p.id.idx()] = record;
        } else {
            debug_assert_eq!(p.id.idx(), self.records.len());
            self.records.push(record);
        }
    }

    /// Runs one tick. `requests` are attempted in list order after routing.
    pub fn step(&mut self, requests: &[InjectionRequest]) -> Result<StepReport> {
        let clock = self.state.clock;
        let vertex_count = self.g.vertex_count();

        // Phase 1: arrivals. Every in-flight packet becomes a resident at the
        // head of its edge; all edges are free from here on.
        let mut residents: Vec<Vec<Resident>> = vec![Vec::new(); vertex_count];
        for idx in 0..self.state.occupancy.len() {
            if let Some(packet) = self.state.occupancy[idx].take() {
                let edge = self.g.edges()[idx];
                residents[edge.dst.idx()].push(Resident {
                    packet,
                    arrived_on: edge.id,
                    vertex: edge.dst,
                });
            }
        }

        // Phase 2: exits.
        let mut delivered = Vec::new();
        for per_vertex in residents.iter_mut() {
            let mut i = 0;
            while i < per_vertex.len() {
                if per_vertex[i].packet.destination == per_vertex[i].vertex {
                    let resident = per_vertex.remove(i);
                    let latency = clock - resident.packet.entry_time;
                    let record = &mut self.records[resident.packet.id.idx()];
                    record.exit = Some(clock);
                    record.latency = Some(latency);
                    record.collisions = resident.packet.collision_count;
                    record.promoted = resident.packet.promoted;
                    delivered.push((resident.packet, latency));
                } else {
                    i += 1;
                }
            }
        }

        // Phase 3: routing, per vertex in ascending order.
        let mut collisions = 0u64;
        for v in 0..vertex_count {
            if residents[v].is_empty() {
                continue;
            }
            let here = &residents[v];
            let mut free: Vec<EdgeId> = self.out_edges[v].clone();
            if here.len() > free.len() {
                return Err(Error::Sim(format!(
                    "{} residents at vertex {v} but only {} output edges",
                    here.len(),
                    free.len()
                )));
            }

            let keys = self.scheme.rank(here, clock);
            debug_assert_eq!(keys.len(), here.len());
            let mut order: Vec<usize> = (0..here.len()).collect();
            order.sort_by(|&a, &b| keys[b].cmp(&keys[a]));
            let mut start = 0;
            while start < order.len() {
                let mut end = start + 1;
                while end < order.len() && keys[order[end]] == keys[order[start]] {
                    end += 1;
                }
                if end - start > 1 {
                    self.scheme
                        .order_ties(&mut order[start..end], here, &mut self.state.rng);
                }
                start = end;
            }

            for &i in &order {
                let resident = residents[v][i];
                let desired = self.scheme.desired_edges(&resident);
                let chosen = self
                    .scheme
                    .choose_edge(&resident, &free, &mut self.state.rng);
                let pos = free.iter().position(|&e| e == chosen).ok_or_else(|| {
                    Error::Sim(format!(
                        "scheme assigned edge {chosen} at vertex {v}, which is not a free \
                         output edge there (two packets asked for the same edge?)"
                    ))
                })?;
                free.remove(pos);

                let mut packet = resident.packet;
                if !desired.is_empty() && !desired.contains(&chosen) {
                    packet.collision_count = packet.collision_count.saturating_add(1).min(self.collision_cap);
                    collisions += 1;
                }
                self.scheme.on_routed(&mut packet);
                let record = &mut self.records[packet.id.idx()];
                record.collisions = packet.collision_count;
                record.promoted = packet.promoted;
                self.state.occupancy[chosen.idx()] = Some(packet);
            }
        }

        // Phase 4: injection, in request order. Exits above already freed
        // capacity, so a same-tick entry can reuse a vacated edge.
        let mut accepted = Vec::new();
        let mut rejected = Vec::new();
        for req in requests {
            if req.source.idx() >= vertex_count
                || req.destination == req.source
                || self.tables.dist.get(req.source, req.destination).is_none()
            {
                return Err(Error::Injection(format!(
                    "bad request {} -> {}",
                    req.source, req.destination
                )));
            }
            let free: Vec<EdgeId> = self.out_edges[req.source.idx()]
                .iter()
                .copied()
                .filter(|e| self.state.occupancy[e.idx()].is_none())
                .collect();
            if free.is_empty() {
                rejected.push(*req);
                continue;
            }
            let chosen = self
                .scheme
                .place(req.source, req.destination, &free, &mut self.state.rng);
            if self.state.occupancy[chosen.idx()].is_some() || !free.contains(&chosen) {
                return Err(Error::Sim(format!(
                    "scheme placed an injected packet on unavailable edge {chosen}"
                )));
            }
            let packet = Packet {
                id: PacketId(self.state.next_packet_id),
                source: req.source,
                destination: req.destination,
                entry_time: clock,
                label: self.scheme.label_for_entry(clock),
                collision_count: 0,
                promoted: false,
            };
            self.state.next_packet_id += 1;
            self.push_record(&packet);
            self.state.occupancy[chosen.idx()] = Some(packet);
            accepted.push(packet);
        }

        // Phase 5: advance the clock.
        self.state.clock += 1;

        let labels: BTreeSet<EpochLabel> = self
            .state
            .occupancy
            .iter()
            .flatten()
            .filter_map(|p| p.label)
            .collect();

        Ok(StepReport {
            delivered,
            accepted,
            rejected,
            collisions,
            distinct_labels: labels.len(),
        })
    }

    /// Runs `max_steps` ticks, pulling requests from `injector` each tick.
    pub fn run(&mut self, injector: &mut dyn Injector, max_steps: u64) -> Result<Trace> {
        let seed = self.state.rng.seed;
        let mut steps = Vec::with_capacity(max_steps as usize);
        let mut offered = 0u64;
        let mut accepted = 0u64;
        let mut rejected = 0u64;
        let mut delivered = 0u64;
        let mut collisions = 0u64;
        let mut breaches = 0u64;

        for _ in 0..max_steps {
            let t = self.state.clock;
            let requests = {
                let ctx = self.context();
                injector.requests(t, &ctx)
            };
            offered += requests.len() as u64;
            let report = self.step(&requests)?;
            accepted += report.accepted.len() as u64;
            rejected += report.rejected.len() as u64;
            delivered += report.delivered.len() as u64;
            collisions += report.collisions;
            if report.distinct_labels >= 3 {
                breaches += 1;
            }
            steps.push(StepRecord {
                t,
                deliveries: report.delivered.len() as u64,
                accepted: report.accepted.len() as u64,
                rejections: report.rejected.len() as u64,
                collisions: report.collisions,
                in_flight: self.in_flight(),
                distinct_labels: report.distinct_labels,
            });
        }

        Ok(Trace {
            seed,
            packets: self.records.clone(),
            steps,
            offered,
            accepted,
            rejected,
            delivered,
            collisions,
            label_breach_ticks: breaches,
            final_in_flight: self.in_flight(),
            final_clock: self.state.clock,
        })
    }
}
