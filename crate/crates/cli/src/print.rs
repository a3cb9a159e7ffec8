//! Pretty-printing DSL syntax trees and semantic networks back to source.
//!
//! The printer emits exactly the grammar the parser accepts, with minimal
//! parentheses, so `parse ∘ print` is the identity on syntax trees and
//! `print ∘ parse ∘ print = print`.

use std::fmt::Write;

use crate::ast::{DefDecl, Edge, NetBlock, NetFile};
use wnet_core::syntax::{BinOp, Expr, Name, Network, Process, State};

pub fn print_expr(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(&mut out, e, 0);
    out
}

/// Precedence levels: 0 comparison, 1 additive, 2 multiplicative, 3 atom.
fn expr_prec(e: &Expr) -> u8 {
    match e {
        Expr::Bin(BinOp::Eq | BinOp::Le, ..) => 0,
        Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
        Expr::Bin(BinOp::Mul, ..) => 2,
        _ => 3,
    }
}

fn write_expr(out: &mut String, e: &Expr, min_prec: u8) {
    let prec = expr_prec(e);
    if prec < min_prec {
        out.push('(');
        write_expr(out, e, 0);
        out.push(')');
        return;
    }
    match e {
        Expr::Int(i) => {
            let _ = write!(out, "{i}");
        }
        Expr::Bool(b) => {
            let _ = write!(out, "{b}");
        }
        Expr::Var(x) => {
            let _ = write!(out, "{x}");
        }
        Expr::Const(n) => {
            let _ = write!(out, "'{n}");
        }
        Expr::Bin(op, l, r) => {
            // comparisons are non-associative; the additive and
            // multiplicative levels associate to the left
            let (lp, rp) = match prec {
                0 => (1, 1),
                1 => (1, 2),
                _ => (2, 3),
            };
            write_expr(out, l, lp);
            let _ = write!(out, " {op} ");
            write_expr(out, r, rp);
        }
    }
}

pub fn print_state(s: &State) -> String {
    let mut out = String::new();
    write_sum(&mut out, s);
    out
}

pub fn print_proc(p: &Process) -> String {
    let mut out = String::new();
    write_proc(&mut out, p);
    out
}

fn write_proc(out: &mut String, p: &Process) {
    match p {
        Process::StateLeaf(s) => write_sum(out, s),
        Process::PChoice(l, q, r) => {
            write_proc(out, l);
            let _ = write!(out, " |{q}| ");
            // the chain associates to the left, so a choice on the right
            // needs its own group
            match &**r {
                Process::PChoice(..) => {
                    out.push('(');
                    write_proc(out, r);
                    out.push(')');
                }
                Process::StateLeaf(s) => write_sum(out, s),
            }
        }
    }
}

fn write_sum(out: &mut String, s: &State) {
    match s {
        State::Sum(l, r) => {
            write_sum(out, l);
            out.push_str(" + ");
            write_prefix(out, r);
        }
        _ => write_prefix(out, s),
    }
}

fn write_prefix(out: &mut String, s: &State) {
    match s {
        State::Sum(..) => {
            out.push('(');
            write_sum(out, s);
            out.push(')');
        }
        State::Omega => out.push_str("omega"),
        State::Nil => out.push_str("nil"),
        State::Tau(p) => {
            out.push_str("tau.");
            write_cont(out, p);
        }
        State::Broadcast(c, e, p) => {
            let _ = write!(out, "{c}!<");
            write_expr(out, e, 0);
            out.push_str(">.");
            write_cont(out, p);
        }
        State::Receive(c, x, p) => {
            let _ = write!(out, "{c}?({x}).");
            write_cont(out, p);
        }
        State::Match(g, t, e) => {
            out.push_str("if ");
            write_expr(out, g, 0);
            out.push_str(" then ");
            write_prefix(out, t);
            out.push_str(" else ");
            write_prefix(out, e);
        }
        State::Call(name, args) => {
            let _ = write!(out, "{name}");
            if !args.is_empty() {
                out.push('(');
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    write_expr(out, a, 0);
                }
                out.push(')');
            }
        }
    }
}

/// A continuation after `.` re-parses at prefix level, so sums and choices
/// are grouped.
fn write_cont(out: &mut String, p: &Process) {
    match p {
        Process::StateLeaf(s) if !matches!(**s, State::Sum(..)) => write_prefix(out, s),
        _ => {
            out.push('(');
            write_proc(out, p);
            out.push(')');
        }
    }
}

fn write_def(out: &mut String, d: &DefDecl, indent: &str) {
    let _ = write!(out, "{indent}def {}", d.name);
    if !d.params.is_empty() {
        out.push('(');
        for (i, p) in d.params.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            let _ = write!(out, "{p}");
        }
        out.push(')');
    }
    out.push_str(" = ");
    write_sum(out, &d.body);
    out.push_str(";\n");
}

pub fn print_net(b: &NetBlock) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "net {} {{", b.name);
    if !b.nodes.is_empty() {
        out.push_str("  nodes: ");
        for (i, v) in b.nodes.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            let _ = write!(out, "{v}");
        }
        out.push_str(";\n");
    }
    if !b.edges.is_empty() {
        out.push_str("  edges: ");
        for (i, e) in b.edges.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            let arrow = if e.both { "<->" } else { "->" };
            let _ = write!(out, "{} {arrow} {}", e.from, e.to);
        }
        out.push_str(";\n");
    }
    for d in &b.defs {
        write_def(&mut out, d, "  ");
    }
    for (v, s) in &b.stations {
        let _ = write!(out, "  at {v}: ");
        write_sum(&mut out, s);
        out.push_str(";\n");
    }
    out.push_str("}\n");
    out
}

pub fn print_file(f: &NetFile) -> String {
    let mut out = String::new();
    for d in &f.defs {
        write_def(&mut out, d, "");
    }
    for (i, b) in f.nets.iter().enumerate() {
        if i > 0 || !f.defs.is_empty() {
            out.push('\n');
        }
        out.push_str(&print_net(b));
    }
    out
}

/// Rebuilds a printable block from a semantic network, e.g. for showing a
/// composition. Mutual edges collapse into `<->`; vertices and definitions
/// come out in their canonical order.
pub fn net_to_block(name: &str, net: &Network) -> NetBlock {
    let nodes: Vec<Name> = net.graph.vertices().cloned().collect();
    let mut edges: Vec<Edge> = Vec::new();
    for (f, t) in net.graph.edges() {
        if edges
            .iter()
            .any(|e| e.both && e.from == *t && e.to == *f)
        {
            continue;
        }
        let both = net.graph.connected(t, f);
        edges.push(Edge {
            from: f.clone(),
            to: t.clone(),
            both,
        });
    }
    let defs = net
        .defs
        .iter()
        .map(|(n, (params, body))| DefDecl {
            name: n.clone(),
            params: params.clone(),
            body: body.clone(),
        })
        .collect();
    let stations = net.system.components();
    NetBlock {
        name: name.to_string(),
        nodes,
        edges,
        defs,
        stations,
    }
}
