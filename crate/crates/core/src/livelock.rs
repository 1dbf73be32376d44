//! Livelock machinery: epoch-label wrappers that bound every packet's
//! residence time, flush certification for schemes that drain any static
//! configuration, sound cycle detection, and a search that produces concrete
//! livelocking instances for schemes that have them.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::injector::{Injector, SaturatingInjector};
use crate::schemes::{build_scheme, PriorityKey, RoutingTables, Scheme};
use crate::sim::{
    evolution_fingerprint, InitialPacket, Packet, Resident, SimRng, Simulation, StateDigest, Tick,
};
use crate::topology::{EdgeId, Multigraph, VertexId};
use crate::{fixtures, Error, Result};

// ── epoch labels ────────────────────────────────────────────────────────────

/// Cohort label stamped on a packet at entry. `R`/`S`/`P` belong to the
/// three-letter rotation, `A`/`B` to the two-letter one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EpochLabel {
    R,
    S,
    P,
    A,
    B,
}

impl fmt::Display for EpochLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            EpochLabel::R => 'R',
            EpochLabel::S => 'S',
            EpochLabel::P => 'P',
            EpochLabel::A => 'A',
            EpochLabel::B => 'B',
        };
        write!(f, "{c}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpochVariant {
    /// Three labels, cyclic dominance: R beats S, S beats P, P beats R.
    Psr3,
    /// Two labels; the label not currently being assigned wins.
    Ab2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpochConfig {
    /// Epoch length in ticks.
    pub period: Tick,
    pub variant: EpochVariant,
}

impl EpochConfig {
    pub fn new(period: Tick, variant: EpochVariant) -> Result<Self> {
        if period == 0 {
            return Err(Error::Spec(
                "wrapper".into(),
                "epoch period must be at least 1 tick".into(),
            ));
        }
        Ok(EpochConfig { period, variant })
    }

    /// Number of ticks after which the label sequence repeats.
    pub fn cycle(&self) -> Tick {
        match self.variant {
            EpochVariant::Psr3 => 3 * self.period,
            EpochVariant::Ab2 => 2 * self.period,
        }
    }
}

/// Label assigned to packets entering at tick `t`.
pub fn epoch_label_for(t: Tick, cfg: &EpochConfig) -> EpochLabel {
    let epoch = t / cfg.period;
    match cfg.variant {
        EpochVariant::Psr3 => [EpochLabel::R, EpochLabel::S, EpochLabel::P][(epoch % 3) as usize],
        EpochVariant::Ab2 => [EpochLabel::A, EpochLabel::B][(epoch % 2) as usize],
    }
}

/// Which of two *distinct* labels outranks the other at tick `t`. In the
/// three-letter rotation dominance is cyclic and clock-free; in the two-letter
/// one the label currently being assigned is the younger cohort and loses.
/// Either way the older of two adjacent cohorts wins.
pub fn epoch_beats(a: EpochLabel, b: EpochLabel, t: Tick, cfg: &EpochConfig) -> std::cmp::Ordering {
    use std::cmp::Ordering;
    if a == b {
        return Ordering::Equal;
    }
    match cfg.variant {
        EpochVariant::Psr3 => match (a, b) {
            (EpochLabel::R, EpochLabel::S)
            | (EpochLabel::S, EpochLabel::P)
            | (EpochLabel::P, EpochLabel::R) => Ordering::Greater,
            (EpochLabel::S, EpochLabel::R)
            | (EpochLabel::P, EpochLabel::S)
            | (EpochLabel::R, EpochLabel::P) => Ordering::Less,
            _ => fallback_rank(a).cmp(&fallback_rank(b)),
        },
        EpochVariant::Ab2 => {
            let current = epoch_label_for(t, cfg);
            if a == current {
                Ordering::Less
            } else if b == current {
                Ordering::Greater
            } else {
                fallback_rank(a).cmp(&fallback_rank(b))
            }
        }
    }
}

/// Total order used only when labels outside the active rotation meet (a
/// breached state); keeps the engine deterministic instead of panicking.
fn fallback_rank(l: EpochLabel) -> i64 {
    match l {
        EpochLabel::R => 4,
        EpochLabel::S => 3,
        EpochLabel::P => 2,
        EpochLabel::A => 1,
        EpochLabel::B => 0,
    }
}

// ── the wrapper scheme ──────────────────────────────────────────────────────

/// Wraps a base scheme with epoch labels. Entering packets are stamped with
/// the label of the current epoch; at each vertex the cohort whose label
/// dominates outranks everything else, and within a cohort the base scheme
/// decides as before. With an epoch at least as long as the base scheme's
/// worst flush time, at most two labels are ever in flight and every packet
/// leaves within two epochs of entering.
pub struct EpochWrap {
    base: Box<dyn Scheme>,
    cfg: EpochConfig,
}

impl EpochWrap {
    pub fn new(base: Box<dyn Scheme>, cfg: EpochConfig) -> Self {
        EpochWrap { base, cfg }
    }

    pub fn config(&self) -> EpochConfig {
        self.cfg
    }

    fn tier(&self, label: Option<EpochLabel>, present: &[EpochLabel], clock: Tick) -> i64 {
        let l = match label {
            // Unlabeled packets only occur when a wrapped run resumes a bare
            // one; they rank below every cohort.
            None => return -1,
            Some(l) => l,
        };
        match present.len() {
            0 | 1 => 0,
            2 => {
                let winner =
                    if epoch_beats(present[0], present[1], clock, &self.cfg).is_gt() {
                        present[0]
                    } else {
                        present[1]
                    };
                i64::from(l == winner)
            }
            // Three or more labels at one vertex is already a breached state;
            // fall back to a fixed order so the tick still completes.
            _ => fallback_rank(l),
        }
    }
}

impl Scheme for EpochWrap {
    fn spec(&self) -> String {
        let name = match self.cfg.variant {
            EpochVariant::Psr3 => "psr3",
            EpochVariant::Ab2 => "ab2",
        };
        format!("{name}:{}({})", self.cfg.period, self.base.spec())
    }

    fn rank(&self, residents: &[Resident], clock: Tick) -> Vec<PriorityKey> {
        let mut present: Vec<EpochLabel> =
            residents.iter().filter_map(|r| r.packet.label).collect();
        present.sort_unstable();
        present.dedup();
        let base = self.base.rank(residents, clock);
        residents
            .iter()
            .zip(base)
            .map(|(r, mut key)| {
                key.0.insert(0, self.tier(r.packet.label, &present, clock));
                key
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

    fn label_for_entry(&self, clock: Tick) -> Option<EpochLabel> {
        Some(epoch_label_for(clock, &self.cfg))
    }

    fn saturated(&self, p: &Packet) -> bool {
        self.base.saturated(p)
    }

    fn on_routed(&self, p: &mut Packet) {
        self.base.on_routed(p);
    }

    fn collision_cap(&self) -> u32 {
        self.base.collision_cap()
    }

    fn analytic_flush_bound(&self, g: &Multigraph) -> Option<Tick> {
        // A static configuration is a single cohort, so it drains exactly as
        // the base scheme does.
        self.base.analytic_flush_bound(g)
    }

    fn clock_phase(&self, clock: Tick) -> u64 {
        (clock % self.cfg.cycle()) ^ self.base.clock_phase(clock).rotate_left(17)
    }
}

/// Applies a wrapper spec to a built scheme. Returns the (possibly wrapped)
/// scheme and, when a wrapper is active, the hard delivery deadline `2T`.
///
/// Specs: `none`, `psr3:<ticks>`, `psr3:auto`, `ab2:<ticks>`, `ab2:auto`,
/// `auto` (= `psr3:auto`). `auto` uses the base scheme's certified flush
/// bound as the epoch and fails for schemes that have none.
pub fn apply_wrapper(
    base: Box<dyn Scheme>,
    wrapper_spec: &str,
    g: &Multigraph,
    _tables: &Arc<RoutingTables>,
) -> Result<(Box<dyn Scheme>, Option<Tick>)> {
    let (variant, period_token) = match wrapper_spec {
        "none" => return Ok((base, None)),
        "auto" => (EpochVariant::Psr3, "auto"),
        other => match other.split_once(':') {
            Some(("psr3", t)) => (EpochVariant::Psr3, t),
            Some(("ab2", t)) => (EpochVariant::Ab2, t),
            _ => {
                return Err(Error::Spec(
                    wrapper_spec.into(),
                    "expected none, auto, psr3:<ticks|auto> or ab2:<ticks|auto>".into(),
                ))
            }
        },
    };
    let period: Tick = if period_token == "auto" {
        base.analytic_flush_bound(g)
            .ok_or_else(|| Error::NoAnalyticBound(base.spec()))?
    } else {
        period_token.parse().map_err(|_| {
            Error::Spec(
                wrapper_spec.into(),
                format!("`{period_token}` is not a tick count"),
            )
        })?
    };
    let cfg = EpochConfig::new(period, variant)?;
    let deadline = 2 * cfg.period;
    Ok((Box::new(EpochWrap::new(base, cfg)), Some(deadline)))
}

// ── flush certification ─────────────────────────────────────────────────────

/// Outcome of draining a configuration with no further injection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlushReport {
    /// Whether the network emptied within the budget.
    pub flushed: bool,
    /// Tick of the last delivery (0 if the network started empty).
    pub flush_time: Tick,
    pub budget: Tick,
}

/// Runs the simulation with no injection until it is empty or the budget is
/// spent. A configuration flushed "within" `budget` may deliver its last
/// packet on the tick numbered `budget` itself.
pub fn flush_check(sim: &mut Simulation, budget: Tick) -> Result<FlushReport> {
    let start = sim.clock();
    let mut flush_time = 0;
    while sim.in_flight() > 0 && sim.clock() <= start + budget {
        let report = sim.step(&[])?;
        if let Some((_, _)) = report.delivered.last() {
            flush_time = sim.clock() - 1;
        }
    }
    Ok(FlushReport {
        flushed: sim.in_flight() == 0,
        flush_time,
        budget,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlushEstimateMode {
    /// Drain random configurations and report the worst observed flush time.
    Measured { budget: Tick },
    /// Report the scheme's certified bound without running anything.
    Analytic,
}

/// Worst-case flush time of `scheme_spec` on `g`, either measured over
/// `trials` random configurations (each edge occupied with probability 1/2)
/// or taken from the scheme's certificate. Measured trials that fail to
/// drain within the budget are an error, not a silent maximum.
pub fn estimate_flush_time(
    g: &Multigraph,
    scheme_spec: &str,
    trials: u32,
    seed: u64,
    mode: FlushEstimateMode,
) -> Result<Tick> {
    match mode {
        FlushEstimateMode::Analytic => {
            let tables = Arc::new(RoutingTables::build(g));
            let scheme = build_scheme(scheme_spec, g, &tables)?;
            scheme
                .analytic_flush_bound(g)
                .ok_or_else(|| Error::NoAnalyticBound(scheme.spec()))
        }
        FlushEstimateMode::Measured { budget } => {
            let mut config_rng = SimRng::new(seed, 2);
            let mut worst = 0;
            for trial in 0..trials {
                let config = random_configuration(g, &mut config_rng);
                let (mut sim, _) =
                    Simulation::from_specs(g.clone(), scheme_spec, "none", seed ^ trial as u64)?;
                sim.seed_initial(&config)?;
                let report = flush_check(&mut sim, budget)?;
                if !report.flushed {
                    return Err(Error::NotFlushed {
                        trial: trial as usize,
                        budget,
                    });
                }
                worst = worst.max(report.flush_time);
            }
            Ok(worst)
        }
    }
}

/// Each edge independently carries a packet with probability 1/2, destined to
/// a uniformly random vertex other than the edge's head.
fn random_configuration(g: &Multigraph, rng: &mut SimRng) -> Vec<InitialPacket> {
    let targets = g.non_isolated();
    let mut config = Vec::new();
    for edge in g.edges() {
        if !rng.chance(0.5) {
            continue;
        }
        let candidates: Vec<VertexId> =
            targets.iter().copied().filter(|&v| v != edge.dst).collect();
        if candidates.is_empty() {
            continue;
        }
        let dest = candidates[rng.pick(candidates.len())];
        config.push(InitialPacket::new(edge.id, dest));
    }
    config
}

// ── cycle detection ─────────────────────────────────────────────────────────

/// Exact statistics of one period of a detected state cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CycleStats {
    /// First tick of the recurring segment.
    pub start: Tick,
    /// Period length in ticks.
    pub length: Tick,
    /// Requests offered by the injector during one period.
    pub offered: u64,
    /// Requests accepted during one period.
    pub accepted: u64,
    /// Packets delivered during one period.
    pub deliveries: u64,
    /// Packets in flight at the end of the period.
    pub in_flight: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LivelockReport {
    /// True when a provably eternal cycle moves packets without ever
    /// delivering one.
    pub found: bool,
    /// The recurring segment, if any recurrence was detected in budget;
    /// a delivering cycle is recorded here with `found == false`.
    pub cycle: Option<CycleStats>,
}

/// Steps the simulation until its full evolution state (configuration, packet
/// ranks, RNG position, injector state, scheme clock phase) recurs or the
/// budget runs out. The run is deterministic given that state, so recurrence
/// proves the segment repeats forever; the segment is then replayed from the
/// initial state to count what one period does. Livelock is a recurring
/// segment that keeps packets in flight but delivers none.
pub fn detect_livelock(
    sim: &mut Simulation,
    injector: &mut dyn Injector,
    budget: u64,
) -> Result<LivelockReport> {
    let initial_state = sim.state().clone();
    let initial_injector = injector.box_clone();

    let fp = |sim: &Simulation, injector: &dyn Injector| {
        evolution_fingerprint(
            sim.state(),
            sim.scheme().clock_phase(sim.clock()),
            injector.fingerprint(),
        )
    };

    let mut seen: HashMap<StateDigest, Tick> = HashMap::new();
    let recurrence = loop {
        let digest = fp(sim, injector);
        match seen.get(&digest) {
            Some(&start) => break Some((start, sim.clock())),
            None => {
                seen.insert(digest, sim.clock());
            }
        }
        if sim.clock() >= initial_state.clock + budget {
            break None;
        }
        let requests = {
            let ctx = sim.context();
            injector.requests(sim.clock(), &ctx)
        };
        sim.step(&requests)?;
    };

    let (start, end) = match recurrence {
        None => {
            return Ok(LivelockReport {
                found: false,
                cycle: None,
            })
        }
        Some(bounds) => bounds,
    };

    // Replay deterministically from the initial snapshot to measure exactly
    // one period.
    sim.restore_state(initial_state);
    let mut replay_injector = initial_injector;
    while sim.clock() < start {
        let requests = {
            let ctx = sim.context();
            replay_injector.requests(sim.clock(), &ctx)
        };
        sim.step(&requests)?;
    }
    let mut stats = CycleStats {
        start,
        length: end - start,
        offered: 0,
        accepted: 0,
        deliveries: 0,
        in_flight: 0,
    };
    while sim.clock() < end {
        let requests = {
            let ctx = sim.context();
            replay_injector.requests(sim.clock(), &ctx)
        };
        stats.offered += requests.len() as u64;
        let report = sim.step(&requests)?;
        stats.accepted += report.accepted.len() as u64;
        stats.deliveries += report.delivered.len() as u64;
    }
    stats.in_flight = sim.in_flight();

    // Livelock needs both halves of the definition: packets circulate without
    // ever exiting, and offered entries are all blocked. A quiescent loop with
    // nothing knocking (offered == 0) is not a livelock. Over a recurring
    // period conservation forces accepted == deliveries; both are checked.
    Ok(LivelockReport {
        found: stats.deliveries == 0
            && stats.accepted == 0
            && stats.offered > 0
            && stats.in_flight > 0,
        cycle: Some(stats),
    })
}

// ── instance search ─────────────────────────────────────────────────────────

/// Limits for [`find_livelock_example`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchBounds {
    pub max_vertices: u32,
    pub max_edges: u32,
    /// Configurations tried per graph and scheme.
    pub configs_per_graph: u32,
    /// Detection budget per configuration, in ticks.
    pub detect_budget: u64,
    /// Randomly generated graphs appended after the structured families.
    pub random_graphs: u32,
    pub seed: u64,
}

impl Default for SearchBounds {
    fn default() -> Self {
        SearchBounds {
            max_vertices: 8,
            max_edges: 24,
            configs_per_graph: 64,
            detect_budget: 4000,
            random_graphs: 4,
            seed: 0,
        }
    }
}

/// A concrete reproducible livelock: network, initial packets, the scheme
/// that spins on them, and the certified cycle.
#[derive(Debug, Clone)]
pub struct LivelockInstance {
    pub network: Multigraph,
    pub packets: Vec<InitialPacket>,
    pub scheme_spec: String,
    pub wrapper_spec: String,
    pub report: LivelockReport,
}

/// Searches small networks for a configuration on which one of the probed
/// schemes livelocks under saturating injection. Structured families (rings
/// with both orientations, rings with chords, doubled rings) are scanned in
/// ascending size with shift-pattern configurations before random graphs and
/// random configurations; the whole search is deterministic for fixed bounds.
pub fn find_livelock_example(
    bounds: &SearchBounds,
    scheme_specs: &[&str],
    wrapper_spec: &str,
) -> Result<Option<LivelockInstance>> {
    let mut graphs: Vec<Multigraph> = Vec::new();
    for n in 3..=bounds.max_vertices.max(3) {
        graphs.push(fixtures::bidirected_ring(n));
        graphs.push(fixtures::circulant_1_2(n));
        graphs.push(fixtures::doubled_cycle(n));
    }
    for i in 0..bounds.random_graphs {
        graphs.push(fixtures::random_allowed_network(
            bounds.seed.wrapping_add(i as u64),
            bounds.max_vertices.max(3),
            1,
        ));
    }

    for g in graphs {
        if g.vertex_count() as u32 > bounds.max_vertices
            || g.edge_count() as u32 > bounds.max_edges
        {
            continue;
        }
        let configs = candidate_configs(&g, bounds);
        for spec in scheme_specs {
            for config in &configs {
                let (mut sim, _) =
                    Simulation::from_specs(g.clone(), spec, wrapper_spec, bounds.seed)?;
                sim.seed_initial(config)?;
                let mut injector = SaturatingInjector;
                let report = detect_livelock(&mut sim, &mut injector, bounds.detect_budget)?;
                if report.found {
                    return Ok(Some(LivelockInstance {
                        network: g,
                        packets: config.clone(),
                        scheme_spec: (*spec).into(),
                        wrapper_spec: wrapper_spec.into(),
                        report,
                    }));
                }
            }
        }
    }
    Ok(None)
}

/// Initial configurations to probe on `g`. Graphs made of two edge classes
/// (ids `0..n` and `n..2n`) get every shift pattern `(a, b)`: each class-0
/// packet aims `a` vertices past its edge's head, each class-1 packet `b`
/// past it. Other graphs get seeded random full-occupancy configurations.
fn candidate_configs(g: &Multigraph, bounds: &SearchBounds) -> Vec<Vec<InitialPacket>> {
    let n = g.vertex_count() as u32;
    let limit = bounds.configs_per_graph as usize;
    let mut configs = Vec::new();
    if g.edge_count() as u32 == 2 * n && n >= 3 {
        'outer: for a in 1..n {
            for b in 1..n {
                if configs.len() >= limit {
                    break 'outer;
                }
                configs.push(shift_config(g, a, b));
            }
        }
    } else {
        let mut rng = SimRng::new(bounds.seed, 2);
        for _ in 0..limit.min(16) {
            let config: Vec<InitialPacket> = g
                .edges()
                .iter()
                .map(|e| {
                    let dest = VertexId((e.dst.0 + 1 + rng.pick(n as usize - 1) as u32) % n);
                    InitialPacket::new(e.id, dest)
                })
                .collect();
            configs.push(config);
        }
    }
    configs
}

/// Full occupancy on a two-class graph: class-0 edges aim `a` past their
/// head, class-1 edges aim `b` past it (mod the vertex count).
pub fn shift_config(g: &Multigraph, a: u32, b: u32) -> Vec<InitialPacket> {
    let n = g.vertex_count() as u32;
    g.edges()
        .iter()
        .map(|e| {
            let offset = if e.id.0 < n { a } else { b };
            InitialPacket::new(e.id, VertexId((e.dst.0 + offset) % n))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::injector::ZeroRate;
    use crate::sim::Trace;

    fn psr(period: Tick) -> EpochConfig {
        EpochConfig::new(period, EpochVariant::Psr3).unwrap()
    }

    fn ab(period: Tick) -> EpochConfig {
        EpochConfig::new(period, EpochVariant::Ab2).unwrap()
    }

    #[test]
    fn labels_rotate_with_the_epochs() {
        let cfg = psr(5);
        assert_eq!(epoch_label_for(0, &cfg), EpochLabel::R);
        assert_eq!(epoch_label_for(4, &cfg), EpochLabel::R);
        assert_eq!(epoch_label_for(5, &cfg), EpochLabel::S);
        assert_eq!(epoch_label_for(14, &cfg), EpochLabel::P);
        assert_eq!(epoch_label_for(15, &cfg), EpochLabel::R);
        let cfg = ab(4);
        assert_eq!(epoch_label_for(3, &cfg), EpochLabel::A);
        assert_eq!(epoch_label_for(7, &cfg), EpochLabel::B);
        assert_eq!(epoch_label_for(8, &cfg), EpochLabel::A);
    }

    #[test]
    fn dominance_always_favors_the_older_cohort() {
        use std::cmp::Ordering::Greater;
        let cfg = psr(3);
        // Cyclically: R > S, S > P, P > R, at any tick.
        for t in 0..20 {
            assert_eq!(epoch_beats(EpochLabel::R, EpochLabel::S, t, &cfg), Greater);
            assert_eq!(epoch_beats(EpochLabel::S, EpochLabel::P, t, &cfg), Greater);
            assert_eq!(epoch_beats(EpochLabel::P, EpochLabel::R, t, &cfg), Greater);
        }
        let cfg = ab(3);
        // While A is being assigned, resident B packets outrank it.
        assert_eq!(epoch_beats(EpochLabel::B, EpochLabel::A, 1, &cfg), Greater);
        assert_eq!(epoch_beats(EpochLabel::A, EpochLabel::B, 4, &cfg), Greater);
    }

    #[test]
    fn wrapper_specs_parse_and_yield_deadlines() {
        let g = fixtures::bidirected_ring(5);
        let tables = Arc::new(RoutingTables::build(&g));
        let build = |wrapper: &str| {
            let base = build_scheme("inverse-distance", &g, &tables).unwrap();
            apply_wrapper(base, wrapper, &g, &tables)
        };
        assert!(build("none").unwrap().1.is_none());
        assert_eq!(build("psr3:7").unwrap().1, Some(14));
        assert_eq!(build("ab2:9").unwrap().1, Some(18));
        // auto period = edges x diameter = 10 x 2.
        assert_eq!(build("auto").unwrap().1, Some(40));
        assert!(build("psr3:0").is_err());
        assert!(build("psr3:x").is_err());
        assert!(build("hourly").is_err());
        // No certified flush bound, no automatic epoch.
        let base = build_scheme("distance", &g, &tables).unwrap();
        assert!(matches!(
            apply_wrapper(base, "auto", &g, &tables),
            Err(Error::NoAnalyticBound(_))
        ));
    }

    #[test]
    fn single_cohort_runs_match_the_bare_scheme() {
        // All initial packets share one label, so the wrapper adds a constant
        // tier and every routing decision is the base scheme's.
        let g = fixtures::bidirected_ring(5);
        let config = fixtures::rotating_conflict_config(5);
        let routed = |wrapper: &str| -> Trace {
            let (mut sim, _) =
                Simulation::from_specs(g.clone(), "inverse-distance", wrapper, 9).unwrap();
            sim.seed_initial(&config).unwrap();
            sim.run(&mut ZeroRate, 60).unwrap()
        };
        let wrapped = routed("psr3:12");
        let bare = routed("none");
        let view = |t: &Trace| {
            (
                t.packets
                    .iter()
                    .map(|p| (p.id, p.src, p.dst, p.entry, p.exit, p.latency))
                    .collect::<Vec<_>>(),
                t.steps
                    .iter()
                    .map(|s| (s.t, s.deliveries, s.rejections, s.collisions, s.in_flight))
                    .collect::<Vec<_>>(),
            )
        };
        assert_eq!(view(&wrapped), view(&bare));
    }

    #[test]
    fn flush_time_of_a_lone_packet_is_its_distance() {
        let g = fixtures::bidirected_ring(5);
        let tables = RoutingTables::build(&g);
        // Packet on the edge into vertex 0, going to vertex 2: distance 2.
        let (mut sim, _) = Simulation::from_specs(g.clone(), "inverse-distance", "none", 0).unwrap();
        sim.seed_initial(&[InitialPacket::new(fixtures::ring_cw_edge(5, 4), VertexId(2))])
            .unwrap();
        assert_eq!(tables.dist.get(VertexId(0), VertexId(2)), Some(2));
        let report = flush_check(&mut sim, 50).unwrap();
        assert!(report.flushed);
        assert_eq!(report.flush_time, 2);
    }

    #[test]
    fn empty_network_flushes_instantly() {
        let (mut sim, _) =
            Simulation::from_specs(fixtures::triangle(), "distance", "none", 0).unwrap();
        let report = flush_check(&mut sim, 10).unwrap();
        assert!(report.flushed);
        assert_eq!(report.flush_time, 0);
    }

    #[test]
    fn near_wins_priority_flushes_within_packets_times_diameter() {
        let g = fixtures::bidirected_ring(6);
        let diam = RoutingTables::build(&g).diameter.unwrap() as Tick;
        let mut rng = SimRng::new(11, 2);
        for _ in 0..40 {
            let config = random_configuration(&g, &mut rng);
            let budget = config.len() as Tick * diam;
            let (mut sim, _) =
                Simulation::from_specs(g.clone(), "inverse-distance", "none", 5).unwrap();
            sim.seed_initial(&config).unwrap();
            let report = flush_check(&mut sim, budget.max(1)).unwrap();
            assert!(report.flushed, "stuck with {} packets", config.len());
            assert!(report.flush_time <= budget.max(1));
        }
    }

    #[test]
    fn measured_flush_times_stay_under_the_certificate() {
        let g = fixtures::bidirected_ring(5);
        let analytic =
            estimate_flush_time(&g, "inverse-distance", 0, 0, FlushEstimateMode::Analytic)
                .unwrap();
        assert_eq!(analytic, 20); // 10 edges x diameter 2
        let measured = estimate_flush_time(
            &g,
            "inverse-distance",
            25,
            3,
            FlushEstimateMode::Measured { budget: analytic },
        )
        .unwrap();
        assert!(measured <= analytic);
    }

    #[test]
    fn schemes_without_certificates_refuse_analytic_mode() {
        let g = fixtures::triangle();
        for spec in ["distance", "random"] {
            assert!(matches!(
                estimate_flush_time(&g, spec, 0, 0, FlushEstimateMode::Analytic),
                Err(Error::NoAnalyticBound(_))
            ));
        }
    }

    #[test]
    fn an_idle_network_cycles_without_being_a_livelock() {
        let (mut sim, _) =
            Simulation::from_specs(fixtures::triangle(), "inverse-distance", "none", 0).unwrap();
        let report = detect_livelock(&mut sim, &mut ZeroRate, 100).unwrap();
        assert!(!report.found);
        let cycle = report.cycle.unwrap();
        assert_eq!(cycle.offered, 0);
        assert_eq!(cycle.deliveries, 0);
        assert_eq!(cycle.in_flight, 0);
    }

    #[test]
    fn the_circulating_conflict_is_a_certified_livelock() {
        let g = fixtures::bidirected_ring(5);
        let (mut sim, _) = Simulation::from_specs(g, "distance", "none", 0).unwrap();
        sim.seed_initial(&fixtures::rotating_conflict_config(5)).unwrap();
        let mut injector = SaturatingInjector;
        let report = detect_livelock(&mut sim, &mut injector, 4000).unwrap();
        assert!(report.found);
        let cycle = report.cycle.unwrap();
        assert_eq!(cycle.deliveries, 0);
        assert_eq!(cycle.in_flight, 10);
        assert!(cycle.offered > 0, "saturating injection was being refused");
        assert_eq!(cycle.accepted, 0);
    }

    #[test]
    fn circulation_with_nothing_knocking_is_not_a_livelock() {
        // Same spinning configuration as above, but no entries are ever
        // offered, so nothing is being starved: a busy loop, not a livelock.
        let g = fixtures::bidirected_ring(5);
        let (mut sim, _) = Simulation::from_specs(g, "distance", "none", 0).unwrap();
        sim.seed_initial(&fixtures::rotating_conflict_config(5)).unwrap();
        let report = detect_livelock(&mut sim, &mut ZeroRate, 4000).unwrap();
        assert!(!report.found);
        let cycle = report.cycle.expect("the rotation still recurs");
        assert_eq!(cycle.offered, 0);
        assert_eq!(cycle.deliveries, 0);
        assert_eq!(cycle.in_flight, 10);
    }

    #[test]
    fn livelock_survives_packets_arriving_with_maxed_counters() {
        let g = fixtures::bidirected_ring(5);
        let config: Vec<InitialPacket> = fixtures::rotating_conflict_config(5)
            .into_iter()
            .map(|mut p| {
                p.collision_count = u32::MAX;
                p
            })
            .collect();
        let (mut sim, _) = Simulation::from_specs(g, "distance", "none", 0).unwrap();
        sim.seed_initial(&config).unwrap();
        let mut injector = SaturatingInjector;
        let report = detect_livelock(&mut sim, &mut injector, 200).unwrap();
        assert!(report.found);
        assert_eq!(report.cycle.unwrap().deliveries, 0);
    }

    #[test]
    fn the_conflict_configuration_is_a_fixed_point_up_to_identity() {
        // One tick maps the occupancy pattern onto itself once counters are
        // saturated: same destinations on the same edges, different packets.
        let g = fixtures::bidirected_ring(5);
        let config: Vec<InitialPacket> = fixtures::rotating_conflict_config(5)
            .into_iter()
            .map(|mut p| {
                p.collision_count = u32::MAX;
                p
            })
            .collect();
        let (mut sim, _) = Simulation::from_specs(g, "distance", "none", 0).unwrap();
        sim.seed_initial(&config).unwrap();
        let before_canonical = sim.fingerprint(true);
        let before_exact = sim.fingerprint(false);
        sim.step(&[]).unwrap();
        assert_eq!(sim.fingerprint(true), before_canonical);
        assert_ne!(sim.fingerprint(false), before_exact);
    }

    #[test]
    fn wrapping_a_flushable_scheme_defuses_the_conflict_network() {
        // Same network and initial packets that livelock plain far-first
        // priority; near-first priority under an epoch wrapper must deliver
        // every packet within two epochs even with saturating injection.
        let g = fixtures::bidirected_ring(5);
        let (mut sim, deadline) =
            Simulation::from_specs(g, "inverse-distance", "auto", 21).unwrap();
        let deadline = deadline.unwrap();
        assert_eq!(deadline, 40);
        sim.seed_initial(&fixtures::rotating_conflict_config(5)).unwrap();
        let mut injector = SaturatingInjector;
        let trace = sim.run(&mut injector, 500).unwrap();
        assert_eq!(trace.label_breach_ticks, 0);
        assert!(trace.delivered > 400);
        for p in &trace.packets {
            match p.latency {
                Some(l) => assert!(l <= deadline, "packet {} took {l}", p.id),
                None => assert!(
                    trace.final_clock - p.entry <= deadline,
                    "packet {} overstayed",
                    p.id
                ),
            }
        }
    }

    #[test]
    fn search_finds_a_livelock_for_far_first_priority() {
        let bounds = SearchBounds {
            max_vertices: 5,
            random_graphs: 0,
            ..SearchBounds::default()
        };
        let found = find_livelock_example(&bounds, &["distance"], "none")
            .unwrap()
            .expect("a livelock exists within these bounds");
        assert!(found.report.found);
        assert_eq!(found.report.cycle.unwrap().deliveries, 0);
        assert_eq!(found.scheme_spec, "distance");
        // The instance replays: re-detect from scratch.
        let (mut sim, _) =
            Simulation::from_specs(found.network.clone(), "distance", "none", bounds.seed)
                .unwrap();
        sim.seed_initial(&found.packets).unwrap();
        let mut injector = SaturatingInjector;
        let again = detect_livelock(&mut sim, &mut injector, 4000).unwrap();
        assert!(again.found);
    }

    #[test]
    fn search_comes_up_empty_for_the_circuit_follower() {
        let bounds = SearchBounds {
            max_vertices: 4,
            configs_per_graph: 6,
            detect_budget: 600,
            random_graphs: 0,
            ..SearchBounds::default()
        };
        let found = find_livelock_example(&bounds, &["eulerian"], "none").unwrap();
        assert!(found.is_none());
    }
}
