//! `rbn` — command-line front end: parses a model file, runs one analysis
//! and prints a JSON result. Exit codes: 0 the query holds (or the command
//! is purely informational), 1 the queried property is false, 2 error.

mod parse;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use num_bigint::BigUint;
use rbn_core::counting::{Bound, CountingConstraint, Cube};
use rbn_core::model::{Configuration, StateId};
use rbn_core::protocol::{ConsensusStatus, PredicateSpec, Protocol};
use rbn_core::Budget;
use serde_json::{json, Value};

use parse::{Model, ModelFile};

#[derive(Parser)]
#[command(name = "rbn", version, about = "Parameterized analysis of reconfigurable broadcast networks")]
struct Cli {
    /// Model file (rbn | protocol | asms | ionet)
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    /// Node budget for explicit searches
    #[arg(long, global = true)]
    budget: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Can some configuration of --from reach some configuration of --to?
    Reach {
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
    },
    /// Forward reachability closure of a named set, as a counting constraint
    Poststar { set: String },
    /// Backward reachability closure of a named set, as a counting constraint
    Prestar { set: String },
    /// Is the configuration a member of the expression's set?
    Member { expr: String, config: String },
    /// Is the expression's set empty?
    Empty { expr: String },
    /// Almost-sure coverability cut-off classification
    Cutoff {
        #[arg(long)]
        init: String,
        #[arg(long)]
        fin: String,
    },
    /// Does the protocol compute the predicate split into --phi0 / --phi1?
    VerifyProtocol {
        /// Named constraint for inputs mapped to 0 (read on input coordinates)
        #[arg(long)]
        phi0: String,
        /// Named constraint for inputs mapped to 1 (read on input coordinates)
        #[arg(long)]
        phi1: String,
    },
    /// One pseudo-random protocol run from an input vector
    Simulate {
        /// Comma-separated input vector, one count per input state
        #[arg(long)]
        input: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        steps: u64,
    },
    /// Materialize the symbolic graph of the given index; DOT output
    Symgraph {
        #[arg(long)]
        index: u64,
        /// Write DOT here instead of stdout
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Bounded cube-to-cube reachability for shared-memory models
    AsmsReach {
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        /// Inclusive agent-count range, e.g. 1..4
        #[arg(long)]
        sizes: String,
    },
    /// Brute-force membership in the forward closure of a named set
    OracleMember { set: String, config: String },
    /// Brute-force configuration-to-configuration search
    OracleReach {
        #[arg(long)]
        from_config: String,
        #[arg(long)]
        to_config: String,
        /// Ask for coverability instead of exact reachability
        #[arg(long, default_value_t = false)]
        cover: bool,
    },
    /// Reprint the model file in canonical form
    Show,
}

struct Failure {
    kind: &'static str,
    message: String,
}

impl Failure {
    fn new(kind: &'static str, message: impl Into<String>) -> Failure {
        Failure {
            kind,
            message: message.into(),
        }
    }
}

impl From<rbn_core::Error> for Failure {
    fn from(e: rbn_core::Error) -> Failure {
        let kind = match e {
            rbn_core::Error::BudgetExceeded { .. } => "budget",
            rbn_core::Error::DimensionMismatch { .. } => "dimension",
            rbn_core::Error::Precondition(_) => "precondition",
            rbn_core::Error::TooLarge(_) => "too-large",
        };
        Failure::new(kind, e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Failure {
        Failure::new("io", e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::from(0),
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            eprintln!(
                "{}",
                json!({ "error": { "kind": f.kind, "message": f.message } })
            );
            ExitCode::from(2)
        }
    }
}

fn big_json(b: &BigUint) -> Value {
    match u64::try_from(b) {
        Ok(v) => json!(v),
        Err(_) => json!(b.to_string()),
    }
}

fn bound_json(b: &Bound) -> Value {
    match b.as_finite() {
        Some(v) => big_json(v),
        None => json!("inf"),
    }
}

fn cube_json(c: &Cube) -> Value {
    json!({
        "lower": c.lower().iter().map(big_json).collect::<Vec<_>>(),
        "upper": c.upper().iter().map(bound_json).collect::<Vec<_>>(),
    })
}

fn constraint_json(states: &[String], c: &CountingConstraint) -> Value {
    json!({
        "arity": c.arity(),
        "states": states,
        "cubes": c.cubes().iter().map(cube_json).collect::<Vec<_>>(),
    })
}

fn config_json(c: &Configuration) -> Value {
    json!(c.counts())
}

fn load(cli_model: &Option<PathBuf>) -> Result<ModelFile, Failure> {
    let path = cli_model
        .as_ref()
        .ok_or_else(|| Failure::new("usage", "--model <file> is required"))?;
    let text = std::fs::read_to_string(path)?;
    parse::parse_model(&text).map_err(|e| Failure::new("parse", e.to_string()))
}

fn named_set(m: &ModelFile, name: &str) -> Result<CountingConstraint, Failure> {
    m.set(name)
        .ok_or_else(|| Failure::new("name", format!("unknown cube or constraint '{}'", name)))
}

fn need_rbn<'a>(m: &'a ModelFile) -> Result<&'a rbn_core::model::Rbn, Failure> {
    m.model
        .rbn()
        .ok_or_else(|| Failure::new("model", "this command needs an rbn or protocol model"))
}

fn need_protocol<'a>(m: &'a ModelFile) -> Result<&'a Protocol, Failure> {
    match &m.model {
        Model::Protocol(p) => Ok(p),
        _ => Err(Failure::new("model", "this command needs a protocol model")),
    }
}

fn state_by_name(m: &ModelFile, name: &str) -> Result<StateId, Failure> {
    m.model
        .state_names()
        .iter()
        .position(|s| s == name)
        .map(StateId)
        .ok_or_else(|| Failure::new("name", format!("unknown state '{}'", name)))
}

fn config_arg(m: &ModelFile, text: &str) -> Result<Configuration, Failure> {
    m.parse_config(text).map_err(|e| Failure::new("usage", e))
}

fn input_vector(text: &str) -> Result<Vec<u64>, Failure> {
    text.split(',')
        .map(|p| p.trim().parse::<u64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| Failure::new("usage", format!("bad input vector '{}'", text)))
}

/// Reads a named constraint over the full state space as a predicate side on
/// the input coordinates: every non-input coordinate must admit zero agents,
/// and the bounds at the input states become the predicate bounds.
fn project_inputs(p: &Protocol, c: &CountingConstraint) -> Result<CountingConstraint, Failure> {
    let zero = BigUint::from(0u32);
    let mut cubes = Vec::new();
    for cube in c.cubes() {
        for q in 0..p.rbn.n_states() {
            if !p.inputs.contains(&StateId(q)) && cube.lower()[q] > zero {
                return Err(Failure::new(
                    "precondition",
                    format!(
                        "predicate constraint requires agents on non-input state '{}'",
                        p.rbn.state_names()[q]
                    ),
                ));
            }
        }
        let lower = p.inputs.iter().map(|q| cube.lower()[q.0].clone()).collect();
        let upper = p.inputs.iter().map(|q| cube.upper()[q.0].clone()).collect();
        cubes.push(Cube::new(lower, upper));
    }
    Ok(CountingConstraint::new(p.inputs.len(), cubes))
}

fn parse_sizes(text: &str) -> Result<std::ops::RangeInclusive<u64>, Failure> {
    let (a, b) = text
        .split_once("..")
        .ok_or_else(|| Failure::new("usage", format!("bad size range '{}'", text)))?;
    let b = b.strip_prefix('=').unwrap_or(b);
    let lo = a
        .trim()
        .parse::<u64>()
        .map_err(|_| Failure::new("usage", format!("bad size range '{}'", text)))?;
    let hi = b
        .trim()
        .parse::<u64>()
        .map_err(|_| Failure::new("usage", format!("bad size range '{}'", text)))?;
    Ok(lo..=hi)
}

/// Returns Ok(true) for exit code 0, Ok(false) for exit code 1.
fn run(cli: Cli) -> Result<bool, Failure> {
    let budget = cli.budget.map(Budget::new).unwrap_or_default();
    let m = load(&cli.model)?;
    let states = m.model.state_names().to_vec();
    match cli.command {
        Command::Reach { from, to } => {
            let rbn = need_rbn(&m)?;
            let from = named_set(&m, &from)?;
            let to = named_set(&m, &to)?;
            match rbn_core::expr::cube_reach(rbn, &from, &to, budget)? {
                Some((target, run)) => {
                    println!(
                        "{}",
                        json!({
                            "reachable": true,
                            "target": config_json(&target),
                            "run": run.iter().map(config_json).collect::<Vec<_>>(),
                            "steps": run.len().saturating_sub(1),
                        })
                    );
                    Ok(true)
                }
                None => {
                    println!("{}", json!({ "reachable": false }));
                    Ok(false)
                }
            }
        }
        Command::Poststar { set } => {
            let rbn = need_rbn(&m)?;
            let a = named_set(&m, &set)?;
            let out = rbn_core::closure::poststar(rbn, &a, budget)?;
            println!("{}", constraint_json(&states, &out));
            Ok(true)
        }
        Command::Prestar { set } => {
            let rbn = need_rbn(&m)?;
            let a = named_set(&m, &set)?;
            let out = rbn_core::closure::prestar(rbn, &a, budget)?;
            println!("{}", constraint_json(&states, &out));
            Ok(true)
        }
        Command::Member { expr, config } => {
            let rbn = need_rbn(&m)?;
            let e = m
                .expr(&expr)
                .ok_or_else(|| Failure::new("name", format!("unknown expression '{}'", expr)))?;
            let c = config_arg(&m, &config)?;
            let member = rbn_core::expr::member(rbn, &e, &c, budget)?;
            println!(
                "{}",
                json!({ "member": member, "config": config_json(&c) })
            );
            Ok(member)
        }
        Command::Empty { expr } => {
            let rbn = need_rbn(&m)?;
            let e = m
                .expr(&expr)
                .ok_or_else(|| Failure::new("name", format!("unknown expression '{}'", expr)))?;
            match rbn_core::expr::is_empty(rbn, &e, budget)? {
                None => {
                    println!("{}", json!({ "empty": true }));
                    Ok(true)
                }
                Some(w) => {
                    println!("{}", json!({ "empty": false, "witness": config_json(&w) }));
                    Ok(false)
                }
            }
        }
        Command::Cutoff { init, fin } => {
            let rbn = need_rbn(&m)?;
            let init = state_by_name(&m, &init)?;
            let fin = state_by_name(&m, &fin)?;
            let v = rbn_core::almost_sure::cutoff(rbn, init, fin, budget)?;
            let positive = v.polarity == rbn_core::almost_sure::Polarity::Positive;
            println!(
                "{}",
                json!({
                    "polarity": if positive { "positive" } else { "negative" },
                    "bound": big_json(&v.bound),
                    "difference": constraint_json(&states, &v.difference),
                    "witness": v.witness.as_ref().map(|(q, c)| json!({
                        "state": states[q.0],
                        "config": config_json(c),
                    })),
                })
            );
            Ok(positive)
        }
        Command::VerifyProtocol { phi0, phi1 } => {
            let p = need_protocol(&m)?;
            let phi0 = project_inputs(p, &named_set(&m, &phi0)?)?;
            let phi1 = project_inputs(p, &named_set(&m, &phi1)?)?;
            let spec = PredicateSpec { phi: [phi0, phi1] };
            let verdict = rbn_core::protocol::verify_computes(p, &spec, budget)?;
            println!(
                "{}",
                json!({
                    "computes": verdict.computes,
                    "counterexample": verdict.counterexample.as_ref().map(|(b, c)| json!({
                        "bit": b,
                        "config": config_json(c),
                    })),
                })
            );
            Ok(verdict.computes)
        }
        Command::Simulate { input, seed, steps } => {
            let p = need_protocol(&m)?;
            let v = input_vector(&input)?;
            let (trace, status) = rbn_core::protocol::simulate_fair(p, &v, seed, steps)?;
            let status = match status {
                ConsensusStatus::Neither => "neither",
                ConsensusStatus::Zero => "zero",
                ConsensusStatus::One => "one",
                ConsensusStatus::Both => "both",
            };
            println!(
                "{}",
                json!({
                    "trace": trace.iter().map(config_json).collect::<Vec<_>>(),
                    "final_status": status,
                })
            );
            Ok(true)
        }
        Command::Symgraph { index, dot } => {
            let rbn = need_rbn(&m)?;
            let g = rbn_core::symbolic::materialize_graph(rbn, index, budget)?;
            let rendered = g.to_dot(rbn);
            match dot {
                Some(path) => {
                    std::fs::write(&path, rendered)?;
                    println!(
                        "{}",
                        json!({
                            "nodes": g.nodes.len(),
                            "edges": g.edges.len(),
                            "dot": path.display().to_string(),
                        })
                    );
                }
                None => print!("{}", rendered),
            }
            Ok(true)
        }
        Command::AsmsReach { from, to, sizes } => {
            let a = match &m.model {
                Model::Asms(a) => a,
                _ => return Err(Failure::new("model", "this command needs an asms model")),
            };
            let from = m
                .asms_cube(&from)
                .ok_or_else(|| Failure::new("name", format!("unknown cube '{}'", from)))?;
            let to = m
                .asms_cube(&to)
                .ok_or_else(|| Failure::new("name", format!("unknown cube '{}'", to)))?;
            let sizes = parse_sizes(&sizes)?;
            match rbn_core::asms::asms_cube_reach_bounded(a, &from, &to, sizes, budget)? {
                Some(hit) => {
                    println!(
                        "{}",
                        json!({
                            "reachable": true,
                            "witness": {
                                "counts": config_json(&hit.counts),
                                "register": a.letter_names()[hit.register.0],
                            },
                        })
                    );
                    Ok(true)
                }
                None => {
                    println!("{}", json!({ "reachable": false }));
                    Ok(false)
                }
            }
        }
        Command::OracleMember { set, config } => {
            let rbn = need_rbn(&m)?;
            let a = named_set(&m, &set)?;
            let c = config_arg(&m, &config)?;
            let member = rbn_core::model::member_poststar_oracle(rbn, &a, &c, budget)?;
            println!(
                "{}",
                json!({ "member": member, "config": config_json(&c) })
            );
            Ok(member)
        }
        Command::OracleReach {
            from_config,
            to_config,
            cover,
        } => {
            let rbn = need_rbn(&m)?;
            let from = config_arg(&m, &from_config)?;
            let to = config_arg(&m, &to_config)?;
            let hit = if cover {
                rbn.coverable_budget(&from, &to, budget)?
            } else {
                rbn.reachable_budget(&from, &to, budget)?
            };
            println!("{}", json!({ "reachable": hit }));
            Ok(hit)
        }
        Command::Show => {
            print!("{}", parse::serialize(&m));
            Ok(true)
        }
    }
}
