//! Every fixture file parses, round-trips through the printer, and passes
//! the expectations annotated in its comments.
//!
//! Annotation forms (one per `# expect:` line):
//!
//! ```text
//! wf NAME                      the network is well-formed
//! ill NAME                     the network is not well-formed
//! results NAME [TEST] sup X inf Y [tol T]
//!                              result bounds of NAME (optionally composed
//!                              with TEST) match to tolerance (default 1e-6)
//! sim A B yes|no               B (does not) simulate(s) A
//! dsim A B yes|no              deadlock-simulation verdict
//! dsim A B err not-convergent  the check rejects a divergent input
//! refute-may A B T yes|no      the single test T (does not) refute(s)
//! refute-must A B T yes|no     the corresponding preorder
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use wnet_cli::ast::NetFile;
use wnet_cli::parse::parse_file;
use wnet_cli::print::print_file;

use wnet_core::checkers::{dfdsim_check, sim_check, CheckerError, SimCheck};
use wnet_core::compose::extend;
use wnet_core::extensional::{default_alphabet, DEFAULT_STATE_BOUND};
use wnet_core::syntax::{well_formed, Network};
use wnet_core::testing::{refute, result_bounds, CounterexampleReport, TestMode, DEFAULT_MAX_ITER};

fn fixture_paths(ext: &str) -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
        .expect("fixtures directory exists")
        .map(|e| e.expect("directory entry").path())
        .filter(|p| p.extension().is_some_and(|e| e == ext))
        .collect();
    paths.sort();
    assert!(!paths.is_empty(), "no .{ext} fixtures found");
    paths
}

fn resolve(file: &NetFile, name: &str, ctx: &str) -> Network {
    file.network(name)
        .unwrap_or_else(|| panic!("{ctx}: no network named `{name}`"))
}

fn bounds_of(net: &Network, ctx: &str) -> (f64, f64) {
    let b = result_bounds(net, 1e-9, DEFAULT_MAX_ITER, DEFAULT_STATE_BOUND)
        .unwrap_or_else(|e| panic!("{ctx}: result bounds failed: {e}"));
    (b.sup, b.inf)
}

fn check(file: &NetFile, ann: &str, ctx: &str) {
    let toks: Vec<&str> = ann.split_whitespace().collect();
    match toks[0] {
        "wf" => assert!(
            well_formed(&resolve(file, toks[1], ctx)),
            "{ctx}: `{}` should be well-formed",
            toks[1]
        ),
        "ill" => assert!(
            !well_formed(&resolve(file, toks[1], ctx)),
            "{ctx}: `{}` should be ill-formed",
            toks[1]
        ),
        "results" => {
            let sup_at = toks
                .iter()
                .position(|t| *t == "sup")
                .unwrap_or_else(|| panic!("{ctx}: missing `sup`"));
            let target = match &toks[1..sup_at] {
                [a] => resolve(file, a, ctx),
                [a, t] => {
                    let m = resolve(file, a, ctx);
                    let test = resolve(file, t, ctx);
                    extend(&m, &test)
                        .unwrap_or_else(|| panic!("{ctx}: composition `{a}`*`{t}` undefined"))
                }
                other => panic!("{ctx}: bad results target {other:?}"),
            };
            let sup: f64 = toks[sup_at + 1].parse().expect("sup value");
            assert_eq!(toks[sup_at + 2], "inf", "{ctx}: missing `inf`");
            let inf: f64 = toks[sup_at + 3].parse().expect("inf value");
            let tol: f64 = match toks.get(sup_at + 4) {
                Some(&"tol") => toks[sup_at + 5].parse().expect("tol value"),
                None => 1e-6,
                other => panic!("{ctx}: trailing tokens {other:?}"),
            };
            let (got_sup, got_inf) = bounds_of(&target, ctx);
            assert!(
                (got_sup - sup).abs() <= tol,
                "{ctx}: sup {got_sup} differs from {sup}"
            );
            assert!(
                (got_inf - inf).abs() <= tol,
                "{ctx}: inf {got_inf} differs from {inf}"
            );
        }
        cmd @ ("sim" | "dsim") => {
            let a = resolve(file, toks[1], ctx);
            let b = resolve(file, toks[2], ctx);
            let alphabet = default_alphabet(&[&a, &b]);
            let outcome: Result<SimCheck, CheckerError> = if cmd == "sim" {
                sim_check(&a, &b, &alphabet, DEFAULT_STATE_BOUND)
            } else {
                dfdsim_check(&a, &b, &alphabet, DEFAULT_STATE_BOUND)
            };
            match toks[3] {
                "yes" => assert!(
                    outcome.unwrap_or_else(|e| panic!("{ctx}: {e}")).relation.is_some(),
                    "{ctx}: expected the relation to exist"
                ),
                "no" => assert!(
                    outcome.unwrap_or_else(|e| panic!("{ctx}: {e}")).relation.is_none(),
                    "{ctx}: expected no relation"
                ),
                "err" => {
                    let err = outcome.expect_err("expected an error");
                    match toks[4] {
                        "not-convergent" => {
                            assert_eq!(err, CheckerError::NotConvergent, "{ctx}")
                        }
                        "interface" => {
                            assert_eq!(err, CheckerError::InterfaceMismatch, "{ctx}")
                        }
                        other => panic!("{ctx}: unknown error kind `{other}`"),
                    }
                }
                other => panic!("{ctx}: unknown verdict `{other}`"),
            }
        }
        cmd @ ("refute-may" | "refute-must") => {
            let a = resolve(file, toks[1], ctx);
            let b = resolve(file, toks[2], ctx);
            let t = resolve(file, toks[3], ctx);
            let mode = if cmd == "refute-may" {
                TestMode::May
            } else {
                TestMode::Must
            };
            let outcome = refute(
                &a,
                &b,
                std::slice::from_ref(&t),
                mode,
                1e-9,
                DEFAULT_MAX_ITER,
                DEFAULT_STATE_BOUND,
            )
            .unwrap_or_else(|e| panic!("{ctx}: {e}"));
            match toks[4] {
                "yes" => assert!(
                    matches!(outcome, Some(CounterexampleReport::FailingTest { .. })),
                    "{ctx}: expected the test to refute, got {outcome:?}"
                ),
                "no" => assert!(outcome.is_none(), "{ctx}: unexpected refutation {outcome:?}"),
                other => panic!("{ctx}: unknown verdict `{other}`"),
            }
        }
        other => panic!("{ctx}: unknown annotation `{other}`"),
    }
}

#[test]
fn all_fixtures_parse_and_pass_their_annotations() {
    for path in fixture_paths("net") {
        let text = fs::read_to_string(&path).expect("fixture readable");
        let file =
            parse_file(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let mut ran = 0;
        for (lineno, line) in text.lines().enumerate() {
            let Some(rest) = line.trim().strip_prefix("# expect:") else {
                continue;
            };
            let ctx = format!("{}:{}", path.display(), lineno + 1);
            check(&file, rest.trim(), &ctx);
            ran += 1;
        }
        assert!(ran > 0, "{}: fixture carries no expectations", path.display());
    }
}

#[test]
fn fixtures_round_trip_through_the_printer() {
    for path in fixture_paths("net") {
        let text = fs::read_to_string(&path).expect("fixture readable");
        let file = parse_file(&text).expect("fixture parses");
        let printed = print_file(&file);
        let reparsed = parse_file(&printed)
            .unwrap_or_else(|e| panic!("{}: printed text fails to parse: {e}", path.display()));
        assert_eq!(reparsed, file, "{}: print is not faithful", path.display());
        assert_eq!(
            print_file(&reparsed),
            printed,
            "{}: printing is not a fixpoint",
            path.display()
        );
    }
}

#[test]
fn topology_fixtures_load_and_validate() {
    for path in fixture_paths("json") {
        let text = fs::read_to_string(&path).expect("fixture readable");
        let topo = wnet_cli::topo::parse_topology(&text)
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let cfg = topo
            .into_config(1, &[])
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        cfg.validate()
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}
