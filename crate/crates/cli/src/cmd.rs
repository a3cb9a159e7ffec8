//! Command dispatch and the exit-code contract.
//!
//! Exit codes: 0 — the command succeeded and the checked property holds;
//! 1 — the property fails or the preorder was refuted; 2 — usage or parse
//! error; 3 — precondition violation (undefined composition, interface
//! mismatch, non-convergent input, bad topology, or a blown state budget).
//!
//! Human-readable messages go to stderr; `--json` puts one machine-readable
//! object (`"schema": 1`) on stdout. Artifacts — DOT graphs, transition
//! listings, composed networks — go to stdout in either mode.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::ast::NetFile;
use crate::gen::TestGen;
use crate::parse::parse_file;
use crate::print::{net_to_block, print_net};
use crate::topo::parse_topology;

use wnet_core::checkers::{dfdsim_check, sim_check, CheckerError, SimCheck, SimStats};
use wnet_core::compose::extend;
use wnet_core::extensional::{build_plts, default_alphabet, Alphabet};
use wnet_core::routing::{check_equiv, RoutingError};
use wnet_core::syntax::{interface, well_formed, Name, Network, Val};
use wnet_core::testing::{
    build_reduction_mdp, refute, CounterexampleReport, Extremum, TestMode, TestingError,
    DEFAULT_MAX_ITER,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PRECONDITION: i32 = 3;

#[derive(Parser)]
#[command(
    name = "wnet",
    version,
    about = "Analyses networks of probabilistic wireless stations",
    long_about = "Analyses networks of probabilistic wireless stations: well-formedness, \
                  transition systems, composition, testing outcomes, simulation checks, \
                  and the gossip routing case study.\n\nNetworks live in DSL files; commands \
                  address them as FILE#NAME (the #NAME part may be dropped when the file \
                  holds a single network)."
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Numeric tolerance for value iteration and comparisons
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,
    /// Cap on explored states per analysis
    #[arg(long = "max-states", global = true, default_value_t = 200_000)]
    max_states: usize,
    /// Extra input vocabulary, e.g. `--inputs 1,2@e` (repeatable)
    #[arg(long = "inputs", global = true, value_name = "VALS@NODE")]
    inputs: Vec<String>,
    /// Seed for generated test suites
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Machine-readable JSON on stdout
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check well-formedness of a network (exit 0 well-formed, 1 not)
    Wf {
        /// Network address, FILE#NAME
        net: String,
        /// Export the topology as a DOT digraph on stdout
        #[arg(long)]
        dot: bool,
    },
    /// Explore and print the transition system of a network
    Lts {
        /// Network address, FILE#NAME
        net: String,
    },
    /// Extend a network with another (exit 3 when undefined)
    Compose {
        /// The network under test, FILE#NAME
        net: String,
        /// The extension occupying (part of) its interface, FILE#NAME
        ext: String,
        /// Name of the printed composite
        #[arg(long, default_value = "C")]
        name: String,
    },
    /// Bounds of the set of success probabilities of a network
    Results {
        /// Network address, FILE#NAME
        net: String,
        /// Optional test to compose with first, FILE#NAME
        test: Option<String>,
    },
    /// Search a finite suite for a counterexample to LEFT may-below RIGHT
    #[command(name = "refute-may")]
    RefuteMay {
        left: String,
        right: String,
        /// Use every network of this file as the suite, in file order
        #[arg(long)]
        tests: Option<PathBuf>,
        /// Number of generated tests when no suite file is given
        #[arg(long, default_value_t = 50)]
        count: usize,
    },
    /// Search a finite suite for a counterexample to LEFT must-below RIGHT
    #[command(name = "refute-must")]
    RefuteMust {
        left: String,
        right: String,
        /// Use every network of this file as the suite, in file order
        #[arg(long)]
        tests: Option<PathBuf>,
        /// Number of generated tests when no suite file is given
        #[arg(long, default_value_t = 50)]
        count: usize,
    },
    /// Check whether RIGHT simulates LEFT (exit 0 related, 1 not)
    Sim {
        left: String,
        right: String,
        /// Print the relation backing a positive answer
        #[arg(long)]
        witness: bool,
    },
    /// Check the divergence-free deadlock simulation of LEFT by RIGHT
    Dsim {
        left: String,
        right: String,
        /// Print the relation backing a positive answer
        #[arg(long)]
        witness: bool,
    },
    /// Check a routing protocol instance against its buffer specification
    Routing {
        /// Buffer capacity of the specification
        #[arg(long)]
        k: usize,
        /// Topology JSON file (edges plus weighted next-hop tables)
        #[arg(long)]
        topology: PathBuf,
        /// Payload values (defaults to 1..=k)
        #[arg(long, value_delimiter = ',')]
        values: Vec<i64>,
    },
}

/// A command failure carrying its exit code class.
enum Failure {
    Usage(String),
    Precondition(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Precondition(_) => EXIT_PRECONDITION,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Precondition(m) => m,
        }
    }
}

fn testing_failure(e: TestingError) -> Failure {
    Failure::Precondition(e.to_string())
}

fn checker_failure(e: CheckerError) -> Failure {
    Failure::Precondition(e.to_string())
}

/// Runs the CLI against real stdout/stderr and returns the exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let mut out = std::io::stdout();
    let mut err = std::io::stderr();
    run_with(argv, &mut out, &mut err)
}

/// Runs the CLI against the given output streams; the entry point used by
/// tests, which capture both.
pub fn run_with<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{e}");
            return e.exit_code();
        }
    };
    match dispatch(&cli, out, err) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "wnet: {}", f.message());
            if cli.json {
                let obj = json!({ "schema": 1, "error": f.message() });
                let _ = writeln!(out, "{obj}");
            }
            f.code()
        }
    }
}

// ---------------------------------------------------------------------------
// loading and shared plumbing

/// Resolves `FILE#NAME` (or `FILE` when unambiguous) to a parsed network.
fn load_net(addr: &str) -> Result<(String, Network), Failure> {
    let (path, name) = match addr.split_once('#') {
        Some((p, n)) => (p, Some(n)),
        None => (addr, None),
    };
    let file = load_file(path)?;
    match name {
        Some(n) => file
            .network(n)
            .map(|net| (n.to_string(), net))
            .ok_or_else(|| {
                let available: Vec<&str> = file.nets.iter().map(|b| b.name.as_str()).collect();
                Failure::Usage(format!(
                    "network `{n}` not found in {path} (available: {})",
                    available.join(", ")
                ))
            }),
        None => match file.nets.len() {
            1 => {
                let b = &file.nets[0];
                Ok((b.name.clone(), b.to_network(&file.defs)))
            }
            n => Err(Failure::Usage(format!(
                "{path} holds {n} networks; address one as {path}#NAME"
            ))),
        },
    }
}

fn load_file(path: &str) -> Result<NetFile, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read {path}: {e}")))?;
    parse_file(&text).map_err(|e| Failure::Usage(format!("{path}:{e}")))
}

/// The analysis vocabulary: defaults derived from the networks, extended by
/// every `--inputs v1,v2@node` flag.
fn alphabet_for(nets: &[&Network], flags: &[String]) -> Result<Alphabet, Failure> {
    let mut alphabet = default_alphabet(nets);
    for flag in flags {
        let (vals, node) = flag.split_once('@').ok_or_else(|| {
            Failure::Usage(format!("--inputs expects VALS@NODE, got `{flag}`"))
        })?;
        let node = Name::new(node.trim());
        for v in vals.split(',') {
            let v: i64 = v.trim().parse().map_err(|_| {
                Failure::Usage(format!("--inputs value `{v}` is not an integer"))
            })?;
            alphabet
                .values
                .entry(node.clone())
                .or_default()
                .insert(Val::Int(v));
        }
    }
    Ok(alphabet)
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    match &cli.cmd {
        Cmd::Wf { net, dot } => cmd_wf(cli, net, *dot, out, err),
        Cmd::Lts { net } => cmd_lts(cli, net, out, err),
        Cmd::Compose { net, ext, name } => cmd_compose(cli, net, ext, name, out, err),
        Cmd::Results { net, test } => cmd_results(cli, net, test.as_deref(), out, err),
        Cmd::RefuteMay {
            left,
            right,
            tests,
            count,
        } => cmd_refute(cli, TestMode::May, left, right, tests.as_deref(), *count, out, err),
        Cmd::RefuteMust {
            left,
            right,
            tests,
            count,
        } => cmd_refute(
            cli,
            TestMode::Must,
            left,
            right,
            tests.as_deref(),
            *count,
            out,
            err,
        ),
        Cmd::Sim {
            left,
            right,
            witness,
        } => cmd_sim(cli, false, left, right, *witness, out, err),
        Cmd::Dsim {
            left,
            right,
            witness,
        } => cmd_sim(cli, true, left, right, *witness, out, err),
        Cmd::Routing {
            k,
            topology,
            values,
        } => cmd_routing(cli, *k, topology, values, out, err),
    }
}

// ---------------------------------------------------------------------------
// wf

fn cmd_wf(
    cli: &Cli,
    addr: &str,
    dot: bool,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, Failure> {
    let (name, net) = load_net(addr)?;
    let ok = well_formed(&net);
    let (inputs, outputs) = interface(&net);
    if dot {
        let _ = write!(out, "{}", dot_graph(&name, &net));
    }
    if cli.json {
        let obj = json!({
            "schema": 1,
            "command": "wf",
            "net": name,
            "well_formed": ok,
            "inputs": inputs.iter().map(|n| n.as_str()).collect::<Vec<_>>(),
            "outputs": outputs.iter().map(|n| n.as_str()).collect::<Vec<_>>(),
        });
        let _ = writeln!(out, "{obj}");
    }
    let verdict = if ok { "well-formed" } else { "ill-formed" };
    let _ = writeln!(err, "{name}: {verdict}");
    Ok(if ok { EXIT_OK } else { EXIT_FAIL })
}

/// The topology as a DOT digraph: internal vertices are boxes, interface
/// vertices ellipses.
fn dot_graph(name: &str, net: &Network) -> String {
    let occupied = net.nodes();
    let mut s = String::new();
    let _ = writeln!(s, "digraph \"{name}\" {{");
    for v in net.graph.vertices() {
        let shape = if occupied.contains(v) { "box" } else { "ellipse" };
        let _ = writeln!(s, "  \"{v}\" [shape={shape}];");
    }
    for (f, t) in net.graph.edges() {
        let _ = writeln!(s, "  \"{f}\" -> \"{t}\";");
    }
    s.push_str("}\n");
    s
}

// ---------------------------------------------------------------------------
// lts

fn cmd_lts(
    cli: &Cli,
    addr: &str,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, Failure> {
    let (name, net) = load_net(addr)?;
    let alphabet = alphabet_for(&[&net], &cli.inputs)?;
    let plts = build_plts(&[net], &alphabet, cli.max_states)
        .map_err(|e| Failure::Precondition(e.to_string()))?;
    let convergent = plts.is_convergent();
    if cli.json {
        let states: Vec<_> = (0..plts.len())
            .map(|i| {
                json!({
                    "id": i,
                    "system": format!("{}", SystemDisplay(&plts, i)),
                    "omega": plts.omega(i),
                    "deadlocked": plts.deadlocked_state(i),
                    "transitions": plts
                        .transitions(i)
                        .iter()
                        .map(|(a, d)| {
                            json!({
                                "action": a.to_string(),
                                "to": d
                                    .iter()
                                    .map(|(j, p)| json!({ "state": j, "prob": p }))
                                    .collect::<Vec<_>>(),
                            })
                        })
                        .collect::<Vec<_>>(),
                })
            })
            .collect();
        let obj = json!({
            "schema": 1,
            "command": "lts",
            "net": name,
            "root": plts.roots()[0],
            "states": plts.len(),
            "convergent": convergent,
            "state_list": states,
        });
        let _ = writeln!(out, "{obj}");
    } else {
        for i in 0..plts.len() {
            let mut flags = String::new();
            if plts.omega(i) {
                flags.push_str(" (success)");
            }
            if plts.deadlocked_state(i) {
                flags.push_str(" (deadlock)");
            }
            let _ = writeln!(out, "state {i}{flags}: {}", SystemDisplay(&plts, i));
            for (a, d) in plts.transitions(i) {
                let targets: Vec<String> =
                    d.iter().map(|(j, p)| format!("{j}: {p}")).collect();
                let _ = writeln!(out, "  {a} -> {{{}}}", targets.join(", "));
            }
        }
    }
    let _ = writeln!(
        err,
        "{name}: {} states, root {}, convergent: {}",
        plts.len(),
        plts.roots()[0],
        if convergent { "yes" } else { "no" }
    );
    Ok(EXIT_OK)
}

/// Renders the system term of a transition-system state.
struct SystemDisplay<'a>(&'a wnet_core::extensional::Plts, usize);

impl std::fmt::Display for SystemDisplay<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let comps = self.0.system(self.1).components();
        if comps.is_empty() {
            return f.write_str("0");
        }
        for (i, (n, s)) in comps.iter().enumerate() {
            if i > 0 {
                f.write_str(" | ")?;
            }
            write!(f, "{n}:[{}]", crate::print::print_state(s))?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// compose

fn cmd_compose(
    cli: &Cli,
    left: &str,
    right: &str,
    name: &str,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, Failure> {
    let (lname, m) = load_net(left)?;
    let (rname, p) = load_net(right)?;
    let composed = extend(&m, &p).ok_or_else(|| {
        Failure::Precondition(format!(
            "composition undefined: `{rname}` occupies a vertex claimed by `{lname}`, \
             or their definitions clash"
        ))
    })?;
    let text = print_net(&net_to_block(name, &composed));
    if cli.json {
        let obj = json!({
            "schema": 1,
            "command": "compose",
            "left": lname,
            "right": rname,
            "name": name,
            "well_formed": well_formed(&composed),
            "text": text,
        });
        let _ = writeln!(out, "{obj}");
    } else {
        let _ = write!(out, "{text}");
    }
    let _ = writeln!(err, "composed `{lname}` with `{rname}`");
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------------------
// results

fn cmd_results(
    cli: &Cli,
    addr: &str,
    test: Option<&str>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, Failure> {
    let (mut name, mut net) = load_net(addr)?;
    if let Some(taddr) = test {
        let (tname, t) = load_net(taddr)?;
        net = extend(&net, &t).ok_or_else(|| {
            Failure::Precondition(format!(
                "composition undefined: `{tname}` occupies a vertex claimed by `{name}`, \
                 or their definitions clash"
            ))
        })?;
        name = format!("{name}*{tname}");
    }
    let started = Instant::now();
    let mdp = build_reduction_mdp(&net, cli.max_states).map_err(testing_failure)?;
    let (sup_v, sup_it) = mdp
        .value_iteration(Extremum::Sup, cli.tol, DEFAULT_MAX_ITER)
        .map_err(testing_failure)?;
    let (inf_v, inf_it) = mdp
        .value_iteration(Extremum::Inf, cli.tol, DEFAULT_MAX_ITER)
        .map_err(testing_failure)?;
    let millis = started.elapsed().as_secs_f64() * 1e3;
    let (sup, inf) = (sup_v[mdp.root()], inf_v[mdp.root()]);
    if cli.json {
        let obj = json!({
            "schema": 1,
            "command": "results",
            "net": name,
            "sup": sup,
            "inf": inf,
            "states": mdp.len(),
            "iterations": sup_it.max(inf_it),
            "tolerance": cli.tol,
            "millis": millis,
        });
        let _ = writeln!(out, "{obj}");
    }
    let _ = writeln!(
        err,
        "{name}: sup {sup} inf {inf} ({} states, {} sweeps, {millis:.1} ms)",
        mdp.len(),
        sup_it.max(inf_it)
    );
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------------------
// refute

#[allow(clippy::too_many_arguments)]
fn cmd_refute(
    cli: &Cli,
    mode: TestMode,
    left: &str,
    right: &str,
    tests: Option<&std::path::Path>,
    count: usize,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, Failure> {
    let (lname, m) = load_net(left)?;
    let (rname, n) = load_net(right)?;
    let (suite, labels): (Vec<Network>, Vec<String>) = match tests {
        Some(path) => {
            let path = path.to_string_lossy().to_string();
            let file = load_file(&path)?;
            let pairs = file.networks();
            if pairs.is_empty() {
                return Err(Failure::Usage(format!("{path} holds no networks")));
            }
            pairs.into_iter().map(|(n, net)| (net, n)).unzip()
        }
        None => {
            let suite = TestGen::new(cli.seed, &[&m, &n]).suite(count);
            let labels = (0..suite.len()).map(|i| format!("generated#{i}")).collect();
            (suite, labels)
        }
    };
    let mode_name = match mode {
        TestMode::May => "may",
        TestMode::Must => "must",
    };
    let outcome = refute(
        &m,
        &n,
        &suite,
        mode,
        cli.tol,
        DEFAULT_MAX_ITER,
        cli.max_states,
    )
    .map_err(testing_failure)?;
    match outcome {
        None => {
            if cli.json {
                let obj = json!({
                    "schema": 1,
                    "command": format!("refute-{mode_name}"),
                    "left": lname,
                    "right": rname,
                    "tests": suite.len(),
                    "refuted": false,
                });
                let _ = writeln!(out, "{obj}");
            }
            let _ = writeln!(
                err,
                "no counterexample to `{lname}` {mode_name}-below `{rname}` among {} tests",
                suite.len()
            );
            Ok(EXIT_OK)
        }
        Some(CounterexampleReport::InterfaceMismatch { left, right }) => {
            Err(Failure::Precondition(format!(
                "interface mismatch: `{lname}` has inputs {:?} outputs {:?}, \
                 `{rname}` has inputs {:?} outputs {:?}",
                left.0, left.1, right.0, right.1
            )))
        }
        Some(CounterexampleReport::FailingTest {
            index,
            left,
            right,
            ..
        }) => {
            let test_text = print_net(&net_to_block("T", &suite[index]));
            if cli.json {
                let obj = json!({
                    "schema": 1,
                    "command": format!("refute-{mode_name}"),
                    "left": lname,
                    "right": rname,
                    "tests": suite.len(),
                    "refuted": true,
                    "counterexample": {
                        "index": index,
                        "label": labels[index],
                        "left": { "sup": left.sup, "inf": left.inf },
                        "right": { "sup": right.sup, "inf": right.inf },
                        "test": test_text,
                    },
                });
                let _ = writeln!(out, "{obj}");
            } else {
                let _ = write!(out, "{test_text}");
            }
            let (la, ra) = match mode {
                TestMode::May => (left.sup, right.sup),
                TestMode::Must => (left.inf, right.inf),
            };
            let _ = writeln!(
                err,
                "refuted `{lname}` {mode_name}-below `{rname}`: test {} gives {} {la} \
                 on the left vs {ra} on the right",
                labels[index],
                match mode {
                    TestMode::May => "sup",
                    TestMode::Must => "inf",
                },
            );
            Ok(EXIT_FAIL)
        }
    }
}

// ---------------------------------------------------------------------------
// sim / dsim

fn sim_stats_json(stats: &SimStats) -> serde_json::Value {
    json!({
        "initial_pairs": stats.initial_pairs,
        "prefilter_pairs": stats.prefilter_pairs,
        "final_pairs": stats.final_pairs,
        "lp_calls": stats.lp_calls,
    })
}

fn cmd_sim(
    cli: &Cli,
    deadlock: bool,
    left: &str,
    right: &str,
    witness: bool,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, Failure> {
    let (lname, m) = load_net(left)?;
    let (rname, n) = load_net(right)?;
    let alphabet = alphabet_for(&[&m, &n], &cli.inputs)?;
    let command = if deadlock { "dsim" } else { "sim" };
    let check: SimCheck = if deadlock {
        dfdsim_check(&m, &n, &alphabet, cli.max_states)
    } else {
        sim_check(&m, &n, &alphabet, cli.max_states)
    }
    .map_err(checker_failure)?;
    let related = check.relation.is_some();
    if cli.json {
        let witness_pairs = check.relation.as_ref().filter(|_| witness).map(|rel| {
            rel.pairs
                .iter()
                .map(|(a, b)| json!([a, b]))
                .collect::<Vec<_>>()
        });
        let obj = json!({
            "schema": 1,
            "command": command,
            "left": lname,
            "right": rname,
            "related": related,
            "states": check.plts.len(),
            "stats": sim_stats_json(&check.stats),
            "witness": witness_pairs,
        });
        let _ = writeln!(out, "{obj}");
    } else if witness {
        if let Some(rel) = &check.relation {
            for (a, b) in &rel.pairs {
                let _ = writeln!(
                    out,
                    "{a} <= {b}   {} <= {}",
                    SystemDisplay(&check.plts, *a),
                    SystemDisplay(&check.plts, *b)
                );
            }
        }
    }
    let verdict = if related {
        format!("`{rname}` simulates `{lname}`")
    } else {
        format!("`{rname}` does not simulate `{lname}`")
    };
    let kind = if deadlock {
        "deadlock simulation"
    } else {
        "simulation"
    };
    let _ = writeln!(
        err,
        "{verdict} ({kind}; {} joint states, {} final pairs)",
        check.plts.len(),
        check.stats.final_pairs
    );
    Ok(if related { EXIT_OK } else { EXIT_FAIL })
}

// ---------------------------------------------------------------------------
// routing

fn cmd_routing(
    cli: &Cli,
    k: usize,
    topology: &std::path::Path,
    values: &[i64],
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, Failure> {
    let path = topology.to_string_lossy().to_string();
    let text = fs::read_to_string(topology)
        .map_err(|e| Failure::Usage(format!("cannot read {path}: {e}")))?;
    let topo = parse_topology(&text).map_err(Failure::Usage)?;
    let cfg = topo
        .into_config(k, values)
        .map_err(|e| Failure::Usage(format!("{path}: {e}")))?;
    let j = cfg.validate().map_err(|e| match e {
        RoutingError::InvalidTopology(problems) => {
            Failure::Precondition(format!("invalid topology: {}", problems.join("; ")))
        }
        RoutingError::Checker(e) => Failure::Precondition(e.to_string()),
    })?;
    let started = Instant::now();
    let report = check_equiv(&cfg, cli.max_states).map_err(|e| match e {
        RoutingError::InvalidTopology(problems) => {
            Failure::Precondition(format!("invalid topology: {}", problems.join("; ")))
        }
        RoutingError::Checker(e) => Failure::Precondition(e.to_string()),
    })?;
    let millis = started.elapsed().as_secs_f64() * 1e3;
    if cli.json {
        let obj = json!({
            "schema": 1,
            "command": "routing",
            "k": k,
            "j": j,
            "equivalent": report.equivalent,
            "spec_states": report.spec_states,
            "protocol_states": report.protocol_states,
            "forward": {
                "holds": report.forward_holds,
                "witness_pairs": report.forward_witness,
                "stats": sim_stats_json(&report.forward),
            },
            "backward": {
                "holds": report.backward_holds,
                "witness_pairs": report.backward_witness,
                "stats": sim_stats_json(&report.backward),
            },
            "millis": millis,
        });
        let _ = writeln!(out, "{obj}");
    }
    let verdict = if report.equivalent {
        "protocol and specification are deadlock-simulation equivalent"
    } else {
        "protocol and specification are NOT equivalent"
    };
    let _ = writeln!(
        err,
        "k={k} j={j}: {verdict} (spec {} states, protocol {} states, \
         forward {}, backward {}, {millis:.1} ms)",
        report.spec_states,
        report.protocol_states,
        if report.forward_holds { "holds" } else { "fails" },
        if report.backward_holds { "holds" } else { "fails" },
    );
    Ok(if report.equivalent { EXIT_OK } else { EXIT_FAIL })
}
