//! Traffic sources. An injector proposes entry requests each tick; the engine
//! accepts them only while free output capacity remains. Injectors must be
//! deterministic functions of their own state and the tick, and must summarize
//! that state in [`Injector::fingerprint`] so cycle detection stays sound.

use crate::sim::{InjectionRequest, SimContext, SimRng, Tick};
use crate::topology::VertexId;

pub trait Injector {
    /// Requests to attempt this tick, in priority order.
    fn requests(&mut self, clock: Tick, ctx: &SimContext) -> Vec<InjectionRequest>;

    /// Digest of all mutable injector state. Two injectors of the same kind
    /// with equal fingerprints must produce identical futures.
    fn fingerprint(&self) -> u64;

    fn box_clone(&self) -> Box<dyn Injector>;
}

/// Offers nothing, ever.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroRate;

impl Injector for ZeroRate {
    fn requests(&mut self, _clock: Tick, _ctx: &SimContext) -> Vec<InjectionRequest> {
        Vec::new()
    }

    fn fingerprint(&self) -> u64 {
        0
    }

    fn box_clone(&self) -> Box<dyn Injector> {
        Box::new(*self)
    }
}

/// Demands as much as the network could possibly accept: one request per
/// output edge of every vertex, destinations rotating through the other
/// vertices. Stateless and clock-free, so rejected requests repeat forever.
#[derive(Debug, Clone, Copy, Default)]
pub struct SaturatingInjector;

impl Injector for SaturatingInjector {
    fn requests(&mut self, _clock: Tick, ctx: &SimContext) -> Vec<InjectionRequest> {
        let mut out = Vec::new();
        for &v in ctx.targets {
            let degree = ctx.out_degrees[v.idx()] as usize;
            let candidates: Vec<VertexId> = ctx
                .targets
                .iter()
                .copied()
                .filter(|&u| u != v)
                .collect();
            if candidates.is_empty() {
                continue;
            }
            for k in 0..degree {
                out.push(InjectionRequest {
                    source: v,
                    destination: candidates[k % candidates.len()],
                });
            }
        }
        out
    }

    fn fingerprint(&self) -> u64 {
        0
    }

    fn box_clone(&self) -> Box<dyn Injector> {
        Box::new(*self)
    }
}

/// Independent Bernoulli arrivals: each tick, every vertex sources a request
/// with probability `rate`, destination uniform over the other vertices. Draws
/// come from the injector's own seeded stream, never the simulation's.
#[derive(Debug, Clone)]
pub struct RateInjector {
    rate: f64,
    rng: SimRng,
}

impl RateInjector {
    pub fn new(rate: f64, seed: u64) -> Self {
        RateInjector {
            rate,
            rng: SimRng::new(seed, 1),
        }
    }
}

impl Injector for RateInjector {
    fn requests(&mut self, _clock: Tick, ctx: &SimContext) -> Vec<InjectionRequest> {
        let mut out = Vec::new();
        for &v in ctx.targets {
            if ctx.out_degrees[v.idx()] == 0 || !self.rng.chance(self.rate) {
                continue;
            }
            let candidates: Vec<VertexId> = ctx
                .targets
                .iter()
                .copied()
                .filter(|&u| u != v)
                .collect();
            if candidates.is_empty() {
                continue;
            }
            let destination = candidates[self.rng.pick(candidates.len())];
            out.push(InjectionRequest {
                source: v,
                destination,
            });
        }
        out
    }

    fn fingerprint(&self) -> u64 {
        self.rng.draws()
    }

    fn box_clone(&self) -> Box<dyn Injector> {
        Box::new(self.clone())
    }
}

/// Replays a fixed list of (tick, source, destination) entries. Entries are
/// sorted by tick on construction (stably, so same-tick order is preserved);
/// entries for ticks that already passed are skipped.
#[derive(Debug, Clone)]
pub struct ScriptedInjector {
    entries: Vec<(Tick, VertexId, VertexId)>,
    cursor: usize,
}

impl ScriptedInjector {
    pub fn new(mut entries: Vec<(Tick, VertexId, VertexId)>) -> Self {
        entries.sort_by_key(|e| e.0);
        ScriptedInjector { entries, cursor: 0 }
    }
}

impl Injector for ScriptedInjector {
    fn requests(&mut self, clock: Tick, _ctx: &SimContext) -> Vec<InjectionRequest> {
        while self.cursor < self.entries.len() && self.entries[self.cursor].0 < clock {
            self.cursor += 1;
        }
        let mut out = Vec::new();
        while self.cursor < self.entries.len() && self.entries[self.cursor].0 == clock {
            let (_, source, destination) = self.entries[self.cursor];
            out.push(InjectionRequest {
                source,
                destination,
            });
            self.cursor += 1;
        }
        out
    }

    fn fingerprint(&self) -> u64 {
        self.cursor as u64
    }

    fn box_clone(&self) -> Box<dyn Injector> {
        Box::new(self.clone())
    }
}
