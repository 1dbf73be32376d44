//! `deflect` — drive the routing simulator from the command line.
//!
//! Exit codes: 0 success (including a clean NOT_FOUND scan), 1 bad input or
//! invalid network, 2 broken runtime guarantee (failed flush, label breach,
//! missed delivery deadline).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use deflect_core::livelock::{
    estimate_flush_time, flush_check, find_livelock_example, FlushEstimateMode, SearchBounds,
};
use deflect_core::metrics::{
    latency_by_entry_bucket, latency_histogram, parse_packets_csv, parse_regions, parse_steps_csv,
    split_by_region, summarize, summarize_trace, write_packets_csv, write_steps_csv,
};
use deflect_core::scenario::{
    parse_injector_arg, parse_scenario, parse_script, write_scenario, InjectorSpec, Scenario,
};
use deflect_core::sim::{Simulation, Tick};
use deflect_core::topology::{parse_network, validate_network, Multigraph};
use deflect_core::{fixtures, Error};

/// Prints a line to stdout, exiting quietly when the reader has gone away
/// (e.g. the output is piped into `head`).
macro_rules! outln {
    ($($arg:tt)*) => {{
        use std::io::Write;
        if writeln!(std::io::stdout(), $($arg)*).is_err() {
            std::process::exit(0);
        }
    }};
}

#[derive(Parser)]
#[command(
    name = "deflect",
    version,
    about = "Deterministic simulator for deflection routing on balanced networks"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check that a network file is balanced and strongly connected.
    Validate {
        /// Network file.
        net: PathBuf,
    },
    /// Run a simulation and write packets.csv and steps.csv.
    Simulate {
        /// Network file (alternative to --scenario).
        #[arg(long, conflicts_with = "scenario")]
        net: Option<PathBuf>,
        /// Scenario file bundling network, initial packets and traffic.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Routing scheme spec, e.g. inverse-distance or
        /// promote:collisions:random:3:inverse-distance.
        #[arg(long, default_value = "inverse-distance")]
        scheme: String,
        /// Epoch wrapper: none, auto, psr3:<ticks|auto>, ab2:<ticks|auto>.
        #[arg(long, default_value = "none")]
        wrapper: String,
        /// Traffic when no scenario is given: none, saturate, rate:<p>,
        /// script:<path>.
        #[arg(long, default_value = "none")]
        inject: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        steps: u64,
        /// Directory for packets.csv and steps.csv (created if missing).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measure or certify how long a scheme takes to drain configurations.
    Flush {
        /// Network file (not needed with --config file:<scenario>).
        #[arg(long)]
        net: Option<PathBuf>,
        #[arg(long, default_value = "inverse-distance")]
        scheme: String,
        /// full | random:<trials> | file:<scenario-path>
        #[arg(long, default_value = "random:20")]
        config: String,
        /// Tick budget; defaults to the scheme's certified bound.
        #[arg(long)]
        budget: Option<Tick>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print the certified worst-case bound instead of running.
        #[arg(long)]
        analytic: bool,
    },
    /// Search small networks for configurations a scheme never drains.
    LivelockScan {
        #[arg(long, default_value_t = 6)]
        max_vertices: u32,
        #[arg(long, default_value_t = 20)]
        max_edges: u32,
        /// Comma-separated scheme specs to probe.
        #[arg(long, default_value = "distance")]
        schemes: String,
        #[arg(long, default_value = "none")]
        wrapper: String,
        /// Cycle-detection budget per configuration, in ticks.
        #[arg(long, default_value_t = 4000)]
        budget: u64,
        /// Configurations tried per graph and scheme.
        #[arg(long, default_value_t = 64)]
        configs: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the found instance as a scenario file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize a packets.csv file.
    Report {
        packets: PathBuf,
        /// Matching steps.csv, for the exact final clock.
        #[arg(long)]
        steps: Option<PathBuf>,
        /// Region file (one vertex id per line): split confined vs targeting
        /// traffic.
        #[arg(long)]
        regions: Option<PathBuf>,
        /// Bucket width for the latency histogram and entry timeline.
        #[arg(long)]
        bucket: Option<Tick>,
        /// Report residences beyond this as deadline violations.
        #[arg(long)]
        deadline: Option<Tick>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Keep exit code 2 reserved for breached guarantees; usage
            // errors are input errors like any other.
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Sim(_) | Error::NotFlushed { .. } => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(Error::Io)
}

fn load_network(path: &Path) -> Result<Multigraph, Error> {
    parse_network(&read(path)?)
}

fn run(cmd: Cmd) -> Result<ExitCode, Error> {
    match cmd {
        Cmd::Validate { net } => {
            let g = load_network(&net)?;
            let report = validate_network(&g);
            if report.ok() {
                outln!(
                    "ok: {} vertices, {} edges",
                    g.vertex_count(),
                    g.edge_count()
                );
                Ok(ExitCode::SUCCESS)
            } else {
                outln!("{report}");
                Ok(ExitCode::FAILURE)
            }
        }

        Cmd::Simulate {
            net,
            scenario,
            scheme,
            wrapper,
            inject,
            seed,
            steps,
            out,
        } => {
            let scn = match (net, scenario) {
                (None, Some(path)) => parse_scenario(&read(&path)?)?,
                (Some(path), None) => Scenario {
                    network: load_network(&path)?,
                    packets: Vec::new(),
                    injector: injector_arg_with_script(&inject)?,
                },
                _ => {
                    return Err(Error::Spec(
                        "simulate".into(),
                        "give exactly one of --net or --scenario".into(),
                    ))
                }
            };
            let (mut sim, deadline) =
                Simulation::from_specs(scn.network.clone(), &scheme, &wrapper, seed)?;
            sim.seed_initial(&scn.packets)?;
            let mut injector = scn.injector.build(seed);
            let trace = sim.run(&mut *injector, steps)?;
            let summary = summarize_trace(&trace, deadline);

            if let Some(dir) = out {
                fs::create_dir_all(&dir).map_err(Error::Io)?;
                fs::write(dir.join("packets.csv"), write_packets_csv(&trace.packets))
                    .map_err(Error::Io)?;
                fs::write(dir.join("steps.csv"), write_steps_csv(&trace.steps))
                    .map_err(Error::Io)?;
            }

            outln!(
                "steps={} offered={} accepted={} rejected={} delivered={} in_flight={} collisions={}",
                steps,
                trace.offered,
                trace.accepted,
                trace.rejected,
                trace.delivered,
                trace.final_in_flight,
                trace.collisions
            );
            outln!(
                "mean_latency={:.3} max_latency={}",
                summary.mean_latency, summary.max_latency
            );
            let mut breached = false;
            if trace.label_breach_ticks > 0 {
                eprintln!(
                    "breach: {} ticks with three or more labels in flight",
                    trace.label_breach_ticks
                );
                breached = true;
            }
            if let (Some(d), Some(v)) = (deadline, summary.deadline_violations) {
                outln!("deadline={d} violations={v}");
                if v > 0 {
                    eprintln!("breach: {v} packets outlived the {d}-tick deadline");
                    breached = true;
                }
            }
            Ok(if breached {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            })
        }

        Cmd::Flush {
            net,
            scheme,
            config,
            budget,
            seed,
            analytic,
        } => {
            if analytic {
                let g = required_net(&net)?;
                let bound = estimate_flush_time(&g, &scheme, 0, seed, FlushEstimateMode::Analytic)?;
                outln!("analytic_bound={bound}");
                return Ok(ExitCode::SUCCESS);
            }
            match config.split_once(':') {
                Some(("random", trials)) => {
                    let g = required_net(&net)?;
                    let trials: u32 = trials.parse().map_err(|_| {
                        Error::Spec(config.clone(), "random:<trials> needs a count".into())
                    })?;
                    let budget = budget_or_analytic(budget, &g, &scheme, seed)?;
                    let worst = estimate_flush_time(
                        &g,
                        &scheme,
                        trials,
                        seed,
                        FlushEstimateMode::Measured { budget },
                    )?;
                    outln!("trials={trials} budget={budget} worst_flush_time={worst}");
                    Ok(ExitCode::SUCCESS)
                }
                Some(("file", path)) => {
                    let scn = parse_scenario(&read(Path::new(path))?)?;
                    let budget = budget_or_analytic(budget, &scn.network, &scheme, seed)?;
                    let (mut sim, _) =
                        Simulation::from_specs(scn.network.clone(), &scheme, "none", seed)?;
                    sim.seed_initial(&scn.packets)?;
                    report_flush(flush_check(&mut sim, budget)?)
                }
                None if config == "full" => {
                    let g = required_net(&net)?;
                    let packets = fixtures::full_occupancy_config(&g, seed);
                    let budget = budget_or_analytic(budget, &g, &scheme, seed)?;
                    let (mut sim, _) = Simulation::from_specs(g, &scheme, "none", seed)?;
                    sim.seed_initial(&packets)?;
                    report_flush(flush_check(&mut sim, budget)?)
                }
                _ => Err(Error::Spec(
                    config,
                    "expected full, random:<trials>, or file:<path>".into(),
                )),
            }
        }

        Cmd::LivelockScan {
            max_vertices,
            max_edges,
            schemes,
            wrapper,
            budget,
            configs,
            seed,
            out,
        } => {
            let specs: Vec<&str> = schemes.split(',').filter(|s| !s.is_empty()).collect();
            if specs.is_empty() {
                return Err(Error::Spec(schemes, "no schemes to probe".into()));
            }
            let bounds = SearchBounds {
                max_vertices,
                max_edges,
                configs_per_graph: configs,
                detect_budget: budget,
                random_graphs: 4,
                seed,
            };
            match find_livelock_example(&bounds, &specs, &wrapper)? {
                None => {
                    outln!("NOT_FOUND");
                    Ok(ExitCode::SUCCESS)
                }
                Some(instance) => {
                    let cycle = instance.report.cycle.expect("found implies a cycle");
                    outln!(
                        "FOUND scheme={} vertices={} edges={} packets={} cycle_start={} cycle_length={} deliveries_in_cycle={}",
                        instance.scheme_spec,
                        instance.network.vertex_count(),
                        instance.network.edge_count(),
                        instance.packets.len(),
                        cycle.start,
                        cycle.length,
                        cycle.deliveries
                    );
                    if let Some(path) = out {
                        let scn = Scenario {
                            network: instance.network.clone(),
                            packets: instance.packets.clone(),
                            injector: InjectorSpec::Saturate,
                        };
                        fs::write(&path, write_scenario(&scn)).map_err(Error::Io)?;
                        outln!("wrote {}", path.display());
                    }
                    Ok(ExitCode::SUCCESS)
                }
            }
        }

        Cmd::Report {
            packets,
            steps,
            regions,
            bucket,
            deadline,
        } => {
            let records = parse_packets_csv(&read(&packets)?)?;
            let now = match steps {
                Some(path) => parse_steps_csv(&read(&path)?)?
                    .last()
                    .map(|row| row.t + 1)
                    .unwrap_or(0),
                None => records
                    .iter()
                    .filter_map(|r| r.exit)
                    .max()
                    .map(|t| t + 1)
                    .unwrap_or(0),
            };
            let summary = summarize(&records, now, deadline);
            outln!(
                "packets={} delivered={} in_flight={} mean_latency={:.3} max_latency={}",
                records.len(),
                summary.delivered_count,
                summary.in_flight_count,
                summary.mean_latency,
                summary.max_latency
            );
            if let (Some(d), Some(v)) = (deadline, summary.deadline_violations) {
                outln!("deadline={d} violations={v}");
            }
            if let Some(width) = bucket {
                let hist = latency_histogram(&records, width);
                for (k, count) in hist.iter().enumerate() {
                    outln!(
                        "latency[{}..{}]={count}",
                        k as Tick * width,
                        (k + 1) as Tick * width
                    );
                }
                for (k, mean) in latency_by_entry_bucket(&records, width)
                    .iter()
                    .enumerate()
                {
                    match mean {
                        Some(m) => outln!(
                            "entered[{}..{}] mean_latency={m:.3}",
                            k as Tick * width,
                            (k + 1) as Tick * width
                        ),
                        None => {}
                    }
                }
            }
            if let Some(path) = regions {
                let region = parse_regions(&read(&path)?)?;
                let (confined, targeting) = split_by_region(&records, &region);
                let c = summarize(&confined, now, None);
                let t = summarize(&targeting, now, None);
                outln!(
                    "confined_packets={} confined_mean_latency={:.3}",
                    confined.len(),
                    c.mean_latency
                );
                outln!(
                    "targeting_packets={} targeting_mean_latency={:.3}",
                    targeting.len(),
                    t.mean_latency
                );
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// CLI traffic argument, extended with `script:<path>` (reads the file).
fn injector_arg_with_script(arg: &str) -> Result<InjectorSpec, Error> {
    match arg.split_once(':') {
        Some(("script", path)) => Ok(InjectorSpec::Script(parse_script(&read(Path::new(
            path,
        ))?)?)),
        _ => parse_injector_arg(arg),
    }
}

fn required_net(net: &Option<PathBuf>) -> Result<Multigraph, Error> {
    match net {
        Some(path) => load_network(path),
        None => Err(Error::Spec(
            "flush".into(),
            "--net is required unless --config file:<path> carries one".into(),
        )),
    }
}

/// Explicit budget, or the scheme's certificate when it has one.
fn budget_or_analytic(
    budget: Option<Tick>,
    g: &Multigraph,
    scheme: &str,
    seed: u64,
) -> Result<Tick, Error> {
    match budget {
        Some(b) => Ok(b),
        None => estimate_flush_time(g, scheme, 0, seed, FlushEstimateMode::Analytic).map_err(
            |_| {
                Error::Spec(
                    "flush".into(),
                    format!("scheme `{scheme}` has no certified bound; give --budget"),
                )
            },
        ),
    }
}

fn report_flush(report: deflect_core::livelock::FlushReport) -> Result<ExitCode, Error> {
    if report.flushed {
        outln!(
            "flushed=true flush_time={} budget={}",
            report.flush_time, report.budget
        );
        Ok(ExitCode::SUCCESS)
    } else {
        outln!("flushed=false budget={}", report.budget);
        eprintln!("breach: configuration still has packets after the budget");
        Ok(ExitCode::from(2))
    }
}
