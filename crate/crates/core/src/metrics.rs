//! Run artifacts: byte-stable CSV encodings of per-packet and per-step
//! records, their parsers, and summary statistics. Fields are all integers or
//! single letters, so no quoting or escaping is ever needed.

use crate::livelock::EpochLabel;
use crate::sim::{PacketId, PacketRecord, StepRecord, Tick, Trace};
use crate::topology::VertexId;
use crate::{Error, Result};

pub const PACKETS_HEADER: &str = "packet_id,src,dst,entry,exit,latency,label,collisions,promoted";
pub const STEPS_HEADER: &str = "t,deliveries,rejections,in_flight";

/// One row of the steps file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepRow {
    pub t: Tick,
    pub deliveries: u64,
    pub rejections: u64,
    pub in_flight: u64,
}

impl From<&StepRecord> for StepRow {
    fn from(s: &StepRecord) -> Self {
        StepRow {
            t: s.t,
            deliveries: s.deliveries,
            rejections: s.rejections,
            in_flight: s.in_flight,
        }
    }
}

pub fn write_packets_csv(records: &[PacketRecord]) -> String {
    let mut out = String::from(PACKETS_HEADER);
    out.push('\n');
    for r in records {
        let exit = r.exit.map(|t| t.to_string()).unwrap_or_default();
        let latency = r.latency.map(|t| t.to_string()).unwrap_or_default();
        let label = r.label.map(|l| l.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.id.0, r.src.0, r.dst.0, r.entry, exit, latency, label, r.collisions, r.promoted as u8
        ));
    }
    out
}

pub fn write_steps_csv(steps: &[StepRecord]) -> String {
    let mut out = String::from(STEPS_HEADER);
    out.push('\n');
    for s in steps {
        out.push_str(&format!(
            "{},{},{},{}\n",
            s.t, s.deliveries, s.rejections, s.in_flight
        ));
    }
    out
}

fn bad_row(file: &str, line: usize, why: &str) -> Error {
    Error::Parse {
        line,
        message: format!("{file}: {why}"),
    }
}

fn parse_field<T: std::str::FromStr>(
    file: &str,
    line: usize,
    name: &str,
    raw: &str,
) -> Result<T> {
    raw.parse()
        .map_err(|_| bad_row(file, line, &format!("bad {name} `{raw}`")))
}

pub fn parse_packets_csv(text: &str) -> Result<Vec<PacketRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == PACKETS_HEADER => {}
        _ => return Err(bad_row("packets", 1, "missing header")),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let lineno = i + 1;
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 9 {
            return Err(bad_row("packets", lineno, "expected 9 columns"));
        }
        let opt = |name: &str, raw: &str| -> Result<Option<Tick>> {
            if raw.is_empty() {
                Ok(None)
            } else {
                parse_field("packets", lineno, name, raw).map(Some)
            }
        };
        let label = match cols[6] {
            "" => None,
            "R" => Some(EpochLabel::R),
            "S" => Some(EpochLabel::S),
            "P" => Some(EpochLabel::P),
            "A" => Some(EpochLabel::A),
            "B" => Some(EpochLabel::B),
            other => {
                return Err(bad_row(
                    "packets",
                    lineno,
                    &format!("unknown label `{other}`"),
                ))
            }
        };
        let promoted = match cols[8] {
            "0" => false,
            "1" => true,
            other => {
                return Err(bad_row(
                    "packets",
                    lineno,
                    &format!("promoted must be 0 or 1, got `{other}`"),
                ))
            }
        };
        out.push(PacketRecord {
            id: PacketId(parse_field("packets", lineno, "packet_id", cols[0])?),
            src: VertexId(parse_field("packets", lineno, "src", cols[1])?),
            dst: VertexId(parse_field("packets", lineno, "dst", cols[2])?),
            entry: parse_field("packets", lineno, "entry", cols[3])?,
            exit: opt("exit", cols[4])?,
            latency: opt("latency", cols[5])?,
            label,
            collisions: parse_field("packets", lineno, "collisions", cols[7])?,
            promoted,
        });
    }
    Ok(out)
}

pub fn parse_steps_csv(text: &str) -> Result<Vec<StepRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == STEPS_HEADER => {}
        _ => return Err(bad_row("steps", 1, "missing header")),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let lineno = i + 1;
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(bad_row("steps", lineno, "expected 4 columns"));
        }
        out.push(StepRow {
            t: parse_field("steps", lineno, "t", cols[0])?,
            deliveries: parse_field("steps", lineno, "deliveries", cols[1])?,
            rejections: parse_field("steps", lineno, "rejections", cols[2])?,
            in_flight: parse_field("steps", lineno, "in_flight", cols[3])?,
        });
    }
    Ok(out)
}

// ── summaries ───────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsSummary {
    pub delivered_count: u64,
    pub in_flight_count: u64,
    /// Mean latency over delivered packets; 0.0 when none were delivered.
    pub mean_latency: f64,
    pub max_latency: Tick,
    /// Packets whose residence exceeded the deadline, when one applies;
    /// still-flying packets count once their residence passes it.
    pub deadline_violations: Option<u64>,
}

/// Summarizes per-packet records. `now` is the clock after the last executed
/// step, used to measure the residence of packets still in flight.
pub fn summarize(records: &[PacketRecord], now: Tick, deadline: Option<Tick>) -> MetricsSummary {
    let mut delivered = 0u64;
    let mut in_flight = 0u64;
    let mut total = 0u128;
    let mut max_latency = 0;
    let mut violations = 0u64;
    for r in records {
        match r.latency {
            Some(l) => {
                delivered += 1;
                total += l as u128;
                max_latency = max_latency.max(l);
                if deadline.is_some_and(|d| l > d) {
                    violations += 1;
                }
            }
            None => {
                in_flight += 1;
                if deadline.is_some_and(|d| now.saturating_sub(r.entry) > d) {
                    violations += 1;
                }
            }
        }
    }
    MetricsSummary {
        delivered_count: delivered,
        in_flight_count: in_flight,
        mean_latency: if delivered == 0 {
            0.0
        } else {
            total as f64 / delivered as f64
        },
        max_latency,
        deadline_violations: deadline.map(|_| violations),
    }
}

pub fn summarize_trace(trace: &Trace, deadline: Option<Tick>) -> MetricsSummary {
    summarize(&trace.packets, trace.final_clock, deadline)
}

/// Delivered-latency histogram with fixed-width buckets: entry k covers
/// latencies `[k*width, (k+1)*width)`.
pub fn latency_histogram(records: &[PacketRecord], width: Tick) -> Vec<u64> {
    assert!(width > 0);
    let mut buckets = Vec::new();
    for r in records {
        if let Some(l) = r.latency {
            let k = (l / width) as usize;
            if buckets.len() <= k {
                buckets.resize(k + 1, 0);
            }
            buckets[k] += 1;
        }
    }
    buckets
}

// ── regions ─────────────────────────────────────────────────────────────────

/// Parses a region file: one vertex id per line, `#` comments allowed.
pub fn parse_regions(text: &str) -> Result<Vec<VertexId>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let v: u32 = line.parse().map_err(|_| Error::Parse {
            line: i + 1,
            message: format!("bad vertex id `{line}`"),
        })?;
        out.push(VertexId(v));
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Splits records into traffic *confined* outside the region (neither
/// endpoint inside) and traffic *targeting* it (destination inside).
/// Packets sourced inside but destined outside belong to neither class.
pub fn split_by_region(
    records: &[PacketRecord],
    region: &[VertexId],
) -> (Vec<PacketRecord>, Vec<PacketRecord>) {
    let inside = |v: VertexId| region.binary_search(&v).is_ok();
    let mut confined = Vec::new();
    let mut targeting = Vec::new();
    for r in records {
        if inside(r.dst) {
            targeting.push(*r);
        } else if !inside(r.src) {
            confined.push(*r);
        }
    }
    (confined, targeting)
}

/// Mean delivered latency per entry-time bucket: entry k covers packets that
/// entered during `[k*width, (k+1)*width)`. Buckets with no deliveries give
/// `None`.
pub fn latency_by_entry_bucket(records: &[PacketRecord], width: Tick) -> Vec<Option<f64>> {
    assert!(width > 0);
    let mut sums: Vec<(u128, u64)> = Vec::new();
    for r in records {
        if let Some(l) = r.latency {
            let k = (r.entry / width) as usize;
            if sums.len() <= k {
                sums.resize(k + 1, (0, 0));
            }
            sums[k].0 += l as u128;
            sums[k].1 += 1;
        }
    }
    sums.into_iter()
        .map(|(sum, n)| {
            if n == 0 {
                None
            } else {
                Some(sum as f64 / n as f64)
            }
        })
        .collect()
}
