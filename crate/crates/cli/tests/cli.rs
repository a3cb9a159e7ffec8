//! The command-line contract: exit codes, stream discipline (JSON on
//! stdout, messages on stderr), and addressing.

use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
        .display()
        .to_string()
}

fn addr(file: &str, net: &str) -> String {
    format!("{}#{net}", fixture(file))
}

/// Runs the CLI in-process, capturing both streams.
fn run(args: &[&str]) -> (i32, String, String) {
    let mut out: Vec<u8> = Vec::new();
    let mut err: Vec<u8> = Vec::new();
    let argv = std::iter::once("wnet".to_string()).chain(args.iter().map(|s| s.to_string()));
    let code = wnet_cli::run_with(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).expect("stdout is UTF-8"),
        String::from_utf8(err).expect("stderr is UTF-8"),
    )
}

fn json_of(stdout: &str) -> Value {
    serde_json::from_str(stdout.trim()).expect("stdout is a JSON object")
}

#[test]
fn wf_answers_zero_for_well_formed_and_one_for_ill_formed() {
    let (code, _, err) = run(&["wf", &addr("fig4.net", "M")]);
    assert_eq!(code, 0);
    assert!(err.contains("well-formed"), "stderr: {err}");

    let (code, _, err) = run(&["wf", &addr("fig4.net", "N")]);
    assert_eq!(code, 1);
    assert!(err.contains("ill-formed"), "stderr: {err}");
}

#[test]
fn wf_json_reports_schema_verdict_and_interface() {
    let (code, out, _) = run(&["--json", "wf", &addr("fig4.net", "M")]);
    assert_eq!(code, 0);
    let v = json_of(&out);
    assert_eq!(v["schema"], 1);
    assert_eq!(v["command"], "wf");
    assert_eq!(v["well_formed"], true);
    assert_eq!(v["inputs"].as_array().unwrap().len(), 0);
    let outputs: Vec<&str> = v["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_str().unwrap())
        .collect();
    assert_eq!(outputs, ["o1", "o2"]);
}

#[test]
fn wf_dot_export_shapes_interface_and_internal_vertices() {
    let (code, out, _) = run(&["wf", "--dot", &addr("fig4.net", "M")]);
    assert_eq!(code, 0);
    assert!(out.contains("\"m\" [shape=box]"), "dot: {out}");
    assert!(out.contains("\"o1\" [shape=ellipse]"), "dot: {out}");
    assert!(out.contains("\"m\" -> \"o1\""), "dot: {out}");
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let (code, _, _) = run(&["frobnicate"]);
    assert_eq!(code, 2);
}

#[test]
fn missing_file_is_a_usage_error() {
    let (code, _, err) = run(&["wf", "/definitely/not/here.net#M"]);
    assert_eq!(code, 2);
    assert!(err.contains("cannot read"), "stderr: {err}");
}

#[test]
fn ambiguous_bare_file_address_lists_the_remedy() {
    let (code, _, err) = run(&["wf", &fixture("fig4.net")]);
    assert_eq!(code, 2);
    assert!(err.contains("#NAME"), "stderr: {err}");
}

#[test]
fn unknown_network_name_lists_what_is_available() {
    let (code, _, err) = run(&["wf", &addr("fig4.net", "Z")]);
    assert_eq!(code, 2);
    assert!(err.contains("available: M, N, T"), "stderr: {err}");
}

#[test]
fn sim_exit_codes_follow_the_verdict() {
    let (code, _, _) = run(&["sim", &addr("fig7.net", "N"), &addr("fig7.net", "M")]);
    assert_eq!(code, 0);
    let (code, _, _) = run(&["sim", &addr("fig7.net", "M"), &addr("fig7.net", "N")]);
    assert_eq!(code, 1);
}

#[test]
fn sim_json_carries_verdict_and_search_stats() {
    let (code, out, _) = run(&[
        "--json",
        "sim",
        &addr("fig7.net", "N"),
        &addr("fig7.net", "M"),
    ]);
    assert_eq!(code, 0);
    let v = json_of(&out);
    assert_eq!(v["schema"], 1);
    assert_eq!(v["related"], true);
    assert!(v["states"].as_u64().unwrap() > 0);
    assert!(v["stats"]["final_pairs"].as_u64().unwrap() > 0);
}

#[test]
fn dsim_on_a_divergent_network_is_a_precondition_error() {
    let (code, out, err) = run(&[
        "--json",
        "dsim",
        &addr("div.net", "M"),
        &addr("div.net", "N"),
    ]);
    assert_eq!(code, 3);
    let v = json_of(&out);
    assert_eq!(v["schema"], 1);
    assert!(v["error"].is_string());
    assert!(!err.is_empty());
}

#[test]
fn results_composes_and_reports_bounds() {
    let (code, out, _) = run(&[
        "--json",
        "results",
        &addr("fig5.net", "M"),
        &addr("fig5.net", "T"),
    ]);
    assert_eq!(code, 0);
    let v = json_of(&out);
    assert_eq!(v["schema"], 1);
    let sup = v["sup"].as_f64().unwrap();
    let inf = v["inf"].as_f64().unwrap();
    assert!((sup - 0.8).abs() < 1e-6, "sup {sup}");
    assert!((inf - 0.8).abs() < 1e-6, "inf {inf}");
    assert!(v["states"].as_u64().unwrap() > 0);
}

#[test]
fn results_on_an_overlapping_pair_is_a_precondition_error() {
    let (code, _, err) = run(&["results", &addr("fig4.net", "M"), &addr("fig4.net", "N")]);
    assert_eq!(code, 3);
    assert!(err.contains("composition undefined"), "stderr: {err}");
}

#[test]
fn compose_prints_reparseable_source() {
    let (code, out, _) = run(&["compose", &addr("fig4.net", "M"), &addr("fig4.net", "T")]);
    assert_eq!(code, 0);
    let file = wnet_cli::parse::parse_file(&out).expect("composition output parses");
    assert_eq!(file.nets.len(), 1);
    assert_eq!(file.nets[0].name, "C");
    let net = file.network("C").unwrap();
    assert_eq!(net.nodes().len(), 3);
}

#[test]
fn compose_of_overlapping_networks_is_a_precondition_error() {
    let (code, out, _) = run(&[
        "--json",
        "compose",
        &addr("fig4.net", "M"),
        &addr("fig4.net", "N"),
    ]);
    assert_eq!(code, 3);
    let v = json_of(&out);
    assert_eq!(v["schema"], 1);
    assert!(v["error"].as_str().unwrap().contains("undefined"));
}

#[test]
fn refute_may_finds_the_distinguishing_test_in_a_suite_file() {
    let (code, out, err) = run(&[
        "--json",
        "refute-may",
        &addr("fig7.net", "M"),
        &addr("fig7.net", "N"),
        "--tests",
        &fixture("fig7.net"),
    ]);
    assert_eq!(code, 1);
    let v = json_of(&out);
    assert_eq!(v["refuted"], true);
    assert_eq!(v["counterexample"]["label"], "T");
    assert!(err.contains("refuted"), "stderr: {err}");
}

#[test]
fn refute_must_finds_the_divergence_witness() {
    let (code, out, _) = run(&[
        "--json",
        "refute-must",
        &addr("div.net", "M"),
        &addr("div.net", "N"),
        "--tests",
        &fixture("div.net"),
    ]);
    assert_eq!(code, 1);
    let v = json_of(&out);
    assert_eq!(v["refuted"], true);
    assert_eq!(v["counterexample"]["label"], "T");
    let left_inf = v["counterexample"]["left"]["inf"].as_f64().unwrap();
    let right_inf = v["counterexample"]["right"]["inf"].as_f64().unwrap();
    assert!((left_inf - 1.0).abs() < 1e-6);
    assert!(right_inf.abs() < 1e-6);
}

#[test]
fn generated_suites_do_not_refute_an_actual_refinement() {
    let (code, out, err) = run(&[
        "--json",
        "refute-may",
        &addr("compfail.net", "M"),
        &addr("compfail.net", "N"),
    ]);
    assert_eq!(code, 0, "stderr: {err}");
    let v = json_of(&out);
    assert_eq!(v["refuted"], false);
    assert_eq!(v["tests"], 50);
}

#[test]
fn generated_suites_are_deterministic_per_seed() {
    let args = [
        "--json",
        "--seed",
        "7",
        "refute-may",
        &addr("compfail.net", "M"),
        &addr("compfail.net", "N"),
    ];
    let (c1, out1, _) = run(&args);
    let (c2, out2, _) = run(&args);
    assert_eq!(c1, c2);
    assert_eq!(out1, out2);
}

#[test]
fn lts_json_enumerates_the_reachable_states() {
    let (code, out, _) = run(&["--json", "lts", &addr("fig4.net", "M")]);
    assert_eq!(code, 0);
    let v = json_of(&out);
    assert_eq!(v["schema"], 1);
    assert_eq!(v["convergent"], true);
    let n = v["states"].as_u64().unwrap();
    assert_eq!(v["state_list"].as_array().unwrap().len() as u64, n);
    assert!(n >= 2);
}

#[test]
fn malformed_inputs_flag_is_a_usage_error() {
    let (code, _, err) = run(&["lts", &addr("fig4.net", "M"), "--inputs", "nonsense"]);
    assert_eq!(code, 2);
    assert!(err.contains("VALS@NODE"), "stderr: {err}");

    let (code, _, err) = run(&["lts", &addr("fig4.net", "M"), "--inputs", "x@o1"]);
    assert_eq!(code, 2);
    assert!(err.contains("not an integer"), "stderr: {err}");
}

#[test]
fn inputs_flag_enlarges_the_interface_vocabulary() {
    // `e` is an input vertex of this network and its occupant binds what it
    // hears, so extra feedable values mean extra reachable states.
    let (_, out_plain, _) = run(&["--json", "lts", &addr("fig5.net", "M")]);
    let (code, out_more, _) = run(&[
        "--json",
        "lts",
        &addr("fig5.net", "M"),
        "--inputs",
        "5,6@e",
    ]);
    assert_eq!(code, 0);
    let plain = json_of(&out_plain)["states"].as_u64().unwrap();
    let more = json_of(&out_more)["states"].as_u64().unwrap();
    assert!(more > plain, "expected {more} > {plain}");
}

#[test]
fn routing_verifies_the_smallest_instance() {
    let (code, out, err) = run(&[
        "--json",
        "routing",
        "--k",
        "1",
        "--topology",
        &fixture("line2.json"),
    ]);
    assert_eq!(code, 0, "stderr: {err}");
    let v = json_of(&out);
    assert_eq!(v["schema"], 1);
    assert_eq!(v["equivalent"], true);
    assert_eq!(v["j"], 2);
    assert_eq!(v["forward"]["holds"], true);
    assert_eq!(v["backward"]["holds"], true);
}

#[test]
fn routing_rejects_a_broken_topology_file() {
    let dir = std::env::temp_dir().join("wnet-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("selfloop.json");
    std::fs::write(&path, r#"{"edges": [["a", "a"]]}"#).unwrap();
    let (code, _, err) = run(&["routing", "--k", "1", "--topology", path.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("joins a vertex to itself"), "stderr: {err}");
}

// ---------------------------------------------------------------------------
// the installed binary behaves like the in-process entry point

#[test]
fn binary_smoke_test() {
    let bin = env!("CARGO_BIN_EXE_wnet");
    let code = |args: &[&str]| {
        Command::new(bin)
            .args(args)
            .output()
            .expect("binary runs")
            .status
            .code()
            .expect("exit code")
    };
    assert_eq!(code(&["wf", &addr("fig4.net", "N")]), 1);
    assert_eq!(
        code(&["sim", &addr("fig7.net", "N"), &addr("fig7.net", "M")]),
        0
    );
    assert_eq!(code(&["frobnicate"]), 2);
    assert_eq!(code(&["--help"]), 0);
}
