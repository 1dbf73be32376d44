//! Scenario files bundle a network, an initial packet placement, and a
//! traffic source into one reproducible text file:
//!
//! ```text
//! # comment
//! vertices 5
//! edge 0 0 1
//! packet 0 3
//! inject 4 1 3          # tick, source, destination
//! inject-rate 0.05      # or inject-saturate; at most one source kind
//! ```

use crate::injector::{Injector, RateInjector, SaturatingInjector, ScriptedInjector, ZeroRate};
use crate::sim::{InitialPacket, Tick};
use crate::topology::{parse_network, write_network, EdgeId, Multigraph, VertexId};
use crate::{Error, Result};

/// Traffic source description; build a live injector with
/// [`InjectorSpec::build`].
#[derive(Debug, Clone, PartialEq)]
pub enum InjectorSpec {
    None,
    Rate(f64),
    Saturate,
    Script(Vec<(Tick, u32, u32)>),
}

impl InjectorSpec {
    pub fn build(&self, seed: u64) -> Box<dyn Injector> {
        match self {
            InjectorSpec::None => Box::new(ZeroRate),
            InjectorSpec::Rate(p) => Box::new(RateInjector::new(*p, seed)),
            InjectorSpec::Saturate => Box::new(SaturatingInjector),
            InjectorSpec::Script(entries) => Box::new(ScriptedInjector::new(
                entries
                    .iter()
                    .map(|&(t, s, d)| (t, VertexId(s), VertexId(d)))
                    .collect(),
            )),
        }
    }
}

/// Parses a CLI-style injector argument: `none`, `saturate`, or `rate:<p>`.
/// Script sources only exist in scenario files (or via [`parse_script`]).
pub fn parse_injector_arg(arg: &str) -> Result<InjectorSpec> {
    match arg {
        "none" => Ok(InjectorSpec::None),
        "saturate" => Ok(InjectorSpec::Saturate),
        other => match other.split_once(':') {
            Some(("rate", p)) => {
                let rate: f64 = p.parse().map_err(|_| {
                    Error::Spec(arg.into(), format!("`{p}` is not a probability"))
                })?;
                if !(0.0..=1.0).contains(&rate) {
                    return Err(Error::Spec(
                        arg.into(),
                        "rate must lie in [0, 1]".into(),
                    ));
                }
                Ok(InjectorSpec::Rate(rate))
            }
            _ => Err(Error::Spec(
                arg.into(),
                "expected none, saturate, or rate:<p>".into(),
            )),
        },
    }
}

/// Parses a standalone script file: one `tick source destination` triple per
/// line, `#` comments allowed.
pub fn parse_script(text: &str) -> Result<Vec<(Tick, u32, u32)>> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: i + 1,
                message: "expected `tick source destination`".into(),
            });
        }
        let num = |raw: &str| -> Result<u64> {
            raw.parse().map_err(|_| Error::Parse {
                line: i + 1,
                message: format!("bad number `{raw}`"),
            })
        };
        entries.push((num(fields[0])?, num(fields[1])? as u32, num(fields[2])? as u32));
    }
    Ok(entries)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub network: Multigraph,
    pub packets: Vec<InitialPacket>,
    pub injector: InjectorSpec,
}

/// Parses a scenario file. Network lines may be interleaved with the rest;
/// they are collected and parsed as one network description.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let mut network_lines = String::new();
    let mut packet_lines: Vec<(usize, u32, u32)> = Vec::new();
    let mut script: Vec<(Tick, u32, u32)> = Vec::new();
    let mut rate: Option<f64> = None;
    let mut saturate = false;

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let num = |raw: &str| -> Result<u64> {
            raw.parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("bad number `{raw}`"),
            })
        };
        let arity = |want: usize| -> Result<()> {
            if fields.len() != want + 1 {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("{} takes {} fields", fields[0], want),
                });
            }
            Ok(())
        };
        match fields[0] {
            "vertices" | "edge" => {
                network_lines.push_str(line);
                network_lines.push('\n');
            }
            "packet" => {
                arity(2)?;
                packet_lines.push((lineno, num(fields[1])? as u32, num(fields[2])? as u32));
            }
            "inject" => {
                arity(3)?;
                script.push((num(fields[1])?, num(fields[2])? as u32, num(fields[3])? as u32));
            }
            "inject-rate" => {
                arity(1)?;
                let p: f64 = fields[1].parse().map_err(|_| Error::Parse {
                    line: lineno,
                    message: format!("bad rate `{}`", fields[1]),
                })?;
                rate = Some(p);
            }
            "inject-saturate" => {
                arity(0)?;
                saturate = true;
            }
            other => {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("unknown keyword `{other}`"),
                })
            }
        }
    }

    let network = parse_network(&network_lines)?;

    let mut packets = Vec::with_capacity(packet_lines.len());
    for (lineno, edge, dest) in packet_lines {
        if edge as usize >= network.edge_count() {
            return Err(Error::Parse {
                line: lineno,
                message: format!("packet on unknown edge {edge}"),
            });
        }
        if dest as usize >= network.vertex_count() {
            return Err(Error::Parse {
                line: lineno,
                message: format!("packet destined to unknown vertex {dest}"),
            });
        }
        packets.push(InitialPacket::new(EdgeId(edge), VertexId(dest)));
    }

    let injector = match (rate, saturate, script.is_empty()) {
        (None, false, true) => InjectorSpec::None,
        (Some(p), false, true) => InjectorSpec::Rate(p),
        (None, true, true) => InjectorSpec::Saturate,
        (None, false, false) => InjectorSpec::Script(script),
        _ => {
            return Err(Error::Parse {
                line: 0,
                message: "scenario mixes more than one traffic source".into(),
            })
        }
    };

    Ok(Scenario {
        network,
        packets,
        injector,
    })
}

pub fn write_scenario(s: &Scenario) -> String {
    let mut out = write_network(&s.network);
    for p in &s.packets {
        out.push_str(&format!("packet {} {}\n", p.edge.0, p.destination.0));
    }
    match &s.injector {
        InjectorSpec::None => {}
        InjectorSpec::Rate(p) => out.push_str(&format!("inject-rate {p}\n")),
        InjectorSpec::Saturate => out.push_str("inject-saturate\n"),
        InjectorSpec::Script(entries) => {
            for (t, src, dst) in entries {
                out.push_str(&format!("inject {t} {src} {dst}\n"));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::sim::Simulation;

    #[test]
    fn scenarios_round_trip() {
        let original = Scenario {
            network: fixtures::bidirected_ring(4),
            packets: fixtures::rotating_conflict_config(4),
            injector: InjectorSpec::Script(vec![(3, 0, 2), (3, 1, 3), (9, 2, 0)]),
        };
        let text = write_scenario(&original);
        let parsed = parse_scenario(&text).unwrap();
        assert_eq!(parsed, original);

        for injector in [
            InjectorSpec::None,
            InjectorSpec::Rate(0.25),
            InjectorSpec::Saturate,
        ] {
            let s = Scenario {
                injector,
                ..original.clone()
            };
            assert_eq!(parse_scenario(&write_scenario(&s)).unwrap(), s);
        }
    }

    #[test]
    fn parsed_scenarios_drive_a_simulation() {
        let text = "\
vertices 3
edge 0 0 1
edge 1 1 2
edge 2 2 0
packet 0 0
inject 2 1 0
";
        let s = parse_scenario(text).unwrap();
        let (mut sim, _) =
            Simulation::from_specs(s.network.clone(), "distance", "none", 0).unwrap();
        sim.seed_initial(&s.packets).unwrap();
        let mut injector = s.injector.build(0);
        let trace = sim.run(&mut *injector, 10).unwrap();
        assert_eq!(trace.offered, 1);
        assert_eq!(trace.delivered, 2);
    }

    #[test]
    fn bad_scenarios_name_their_line() {
        let cases = [
            ("vertices 3\nedge 0 0 1\nedge 1 1 2\nedge 2 2 0\npacket 9 0\n", 5),
            ("vertices 3\nedge 0 0 1\nedge 1 1 2\nedge 2 2 0\npacket 0 7\n", 5),
            ("vertices 3\nwat 1 2\n", 2),
            ("vertices 3\nedge 0 0 1\nedge 1 1 2\nedge 2 2 0\ninject 1\n", 5),
        ];
        for (text, want_line) in cases {
            match parse_scenario(text) {
                Err(Error::Parse { line, .. }) => assert_eq!(line, want_line, "{text}"),
                other => panic!("expected parse error for {text:?}, got {other:?}"),
            }
        }
    }

    #[test]
    fn conflicting_sources_are_rejected() {
        let text = "\
vertices 3
edge 0 0 1
edge 1 1 2
edge 2 2 0
inject-rate 0.5
inject-saturate
";
        assert!(parse_scenario(text).is_err());
    }

    #[test]
    fn injector_args_parse() {
        assert_eq!(parse_injector_arg("none").unwrap(), InjectorSpec::None);
        assert_eq!(
            parse_injector_arg("saturate").unwrap(),
            InjectorSpec::Saturate
        );
        assert_eq!(
            parse_injector_arg("rate:0.125").unwrap(),
            InjectorSpec::Rate(0.125)
        );
        assert!(parse_injector_arg("rate:1.5").is_err());
        assert!(parse_injector_arg("rate:x").is_err());
        assert!(parse_injector_arg("burst").is_err());
    }

    #[test]
    fn scripts_parse_with_comments() {
        let entries = parse_script("# warmup\n0 1 2\n5 2 0 # later\n").unwrap();
        assert_eq!(entries, vec![(0, 1, 2), (5, 2, 0)]);
        assert!(parse_script("1 2\n").is_err());
    }
}
