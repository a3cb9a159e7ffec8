//! Lexer and recursive-descent parser for the network DSL.
//!
//! File grammar:
//!
//! ```text
//! file  ::= (def | net)*
//! def   ::= "def" NAME ("(" NAME ("," NAME)* ")")? "=" STATE ";"
//! net   ::= "net" NAME "{" item* "}"
//! item  ::= "nodes" ":" id ("," id)* ";"
//!         | "edges" ":" edge ("," edge)* ";"
//!         | def
//!         | "at" id ":" STATE ";"
//! edge  ::= id ("->" | "<->") id
//! ```
//!
//! States and processes:
//!
//! ```text
//! PROC   ::= PTERM ("|" prob "|" PTERM)*          left-associative choice
//! PTERM  ::= PREFIX ("+" PREFIX)*                 left-associative sum
//! PREFIX ::= chan "!" "<" EXPR ">" "." PREFIX
//!          | chan "?" "(" x ")" "." PREFIX
//!          | "tau" "." PREFIX
//!          | "if" EXPR "then" PREFIX "else" PREFIX
//!          | "omega" | "nil" | A | A "(" EXPR ("," EXPR)* ")"
//!          | "(" PROC ")"
//! prob   ::= decimal in (0,1) | p "/" q
//! ```
//!
//! A parenthesised group is a full process; contexts that require a state
//! (sum operands, `if` branches, definition bodies, `at` clauses) reject a
//! proper probabilistic choice. Prefix continuations bind tighter than `+`,
//! which binds tighter than `|p|`. Comments run from `#` to end of line.

use thiserror::Error;

use crate::ast::{DefDecl, Edge, NetBlock, NetFile};
use wnet_core::syntax::{BinOp, Expr, Name, Process, Ratio, State};

/// A parse failure at a source position, describing what was expected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: expected {expected}")]
pub struct ParseError {
    pub line: u32,
    pub col: u32,
    pub expected: String,
}

const KEYWORDS: &[&str] = &[
    "net", "nodes", "edges", "def", "at", "if", "then", "else", "tau", "omega", "nil", "true",
    "false",
];

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    /// A run of digits, raw.
    Num(String),
    /// Integer and fractional digit runs of a decimal literal, raw.
    Dec(String, String),
    Tick,
    LBrace,
    RBrace,
    LParen,
    RParen,
    Lt,
    Gt,
    Comma,
    Semi,
    Colon,
    Dot,
    Plus,
    Minus,
    Star,
    Slash,
    Eq,
    Le,
    Arrow,
    Bidir,
    Bang,
    Question,
    Bar,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Num(s) => format!("`{s}`"),
            Tok::Dec(i, f) => format!("`{i}.{f}`"),
            Tok::Tick => "`'`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Lt => "`<`".into(),
            Tok::Gt => "`>`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Le => "`<=`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::Bidir => "`<->`".into(),
            Tok::Bang => "`!`".into(),
            Tok::Question => "`?`".into(),
            Tok::Bar => "`|`".into(),
            Tok::Eof => "end of file".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: u32,
    col: u32,
}

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (tl, tc) = (line, col);
        let mut push1 = |tok: Tok, width: u32, i: &mut usize, col: &mut u32| {
            out.push(Token {
                tok,
                line: tl,
                col: tc,
            });
            *i += width as usize;
            *col += width;
        };
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
                col += 1;
            }
            let word: String = chars[start..i].iter().collect();
            out.push(Token {
                tok: Tok::Ident(word),
                line: tl,
                col: tc,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
                col += 1;
            }
            let int: String = chars[start..i].iter().collect();
            // a dot glues into a decimal only when digits follow, so that
            // prefix continuations like `A(1)` keep their own dots
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                i += 1;
                col += 1;
                let fstart = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                    col += 1;
                }
                let frac: String = chars[fstart..i].iter().collect();
                out.push(Token {
                    tok: Tok::Dec(int, frac),
                    line: tl,
                    col: tc,
                });
            } else {
                out.push(Token {
                    tok: Tok::Num(int),
                    line: tl,
                    col: tc,
                });
            }
            continue;
        }
        match c {
            '<' if chars.get(i + 1) == Some(&'-') && chars.get(i + 2) == Some(&'>') => {
                push1(Tok::Bidir, 3, &mut i, &mut col)
            }
            '<' if chars.get(i + 1) == Some(&'=') => push1(Tok::Le, 2, &mut i, &mut col),
            '<' => push1(Tok::Lt, 1, &mut i, &mut col),
            '-' if chars.get(i + 1) == Some(&'>') => push1(Tok::Arrow, 2, &mut i, &mut col),
            '-' => push1(Tok::Minus, 1, &mut i, &mut col),
            '=' if chars.get(i + 1) == Some(&'=') => push1(Tok::Eq, 2, &mut i, &mut col),
            '=' => push1(Tok::Eq, 1, &mut i, &mut col),
            '>' => push1(Tok::Gt, 1, &mut i, &mut col),
            '{' => push1(Tok::LBrace, 1, &mut i, &mut col),
            '}' => push1(Tok::RBrace, 1, &mut i, &mut col),
            '(' => push1(Tok::LParen, 1, &mut i, &mut col),
            ')' => push1(Tok::RParen, 1, &mut i, &mut col),
            ',' => push1(Tok::Comma, 1, &mut i, &mut col),
            ';' => push1(Tok::Semi, 1, &mut i, &mut col),
            ':' => push1(Tok::Colon, 1, &mut i, &mut col),
            '.' => push1(Tok::Dot, 1, &mut i, &mut col),
            '+' => push1(Tok::Plus, 1, &mut i, &mut col),
            '*' => push1(Tok::Star, 1, &mut i, &mut col),
            '/' => push1(Tok::Slash, 1, &mut i, &mut col),
            '!' => push1(Tok::Bang, 1, &mut i, &mut col),
            '?' => push1(Tok::Question, 1, &mut i, &mut col),
            '|' => push1(Tok::Bar, 1, &mut i, &mut col),
            '\'' => push1(Tok::Tick, 1, &mut i, &mut col),
            other => {
                return Err(ParseError {
                    line: tl,
                    col: tc,
                    expected: format!("a token (found unexpected character `{other}`)"),
                })
            }
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn new(src: &str) -> Result<Self, ParseError> {
        Ok(Parser {
            toks: lex(src)?,
            pos: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn here(&self) -> (u32, u32) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, expected: impl Into<String>) -> Result<T, ParseError> {
        let (line, col) = self.here();
        Err(ParseError {
            line,
            col,
            expected: format!("{} (found {})", expected.into(), self.peek().describe()),
        })
    }

    fn err_at<T>(&self, at: (u32, u32), expected: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            line: at.0,
            col: at.1,
            expected: expected.into(),
        })
    }

    fn eat(&mut self, want: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            self.err(what)
        }
    }

    /// True (and consumed) when the next token is the given keyword.
    fn keyword(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Tok::Ident(s) if s == kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    /// A non-keyword identifier.
    fn ident(&mut self, what: &str) -> Result<Name, ParseError> {
        match self.peek() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                let name = Name::new(s);
                self.bump();
                Ok(name)
            }
            _ => self.err(what),
        }
    }

    // -- processes and states ------------------------------------------------

    fn parse_proc(&mut self) -> Result<Process, ParseError> {
        let mut acc = self.parse_pterm()?;
        while *self.peek() == Tok::Bar {
            self.bump();
            let q = self.parse_prob()?;
            self.eat(Tok::Bar, "`|` closing the probability")?;
            let rhs = self.parse_pterm()?;
            acc = Process::choice(acc, q, rhs);
        }
        Ok(acc)
    }

    fn parse_pterm(&mut self) -> Result<Process, ParseError> {
        let start = self.here();
        let mut acc = self.parse_prefix()?;
        while *self.peek() == Tok::Plus {
            self.bump();
            let rstart = self.here();
            let rhs = self.parse_prefix()?;
            let l = unwrap_state(acc, start, self)?;
            let r = unwrap_state(rhs, rstart, self)?;
            acc = Process::leaf(State::sum(l, r));
        }
        Ok(acc)
    }

    fn parse_prefix(&mut self) -> Result<Process, ParseError> {
        match self.peek().clone() {
            Tok::Ident(word) => match word.as_str() {
                "omega" => {
                    self.bump();
                    Ok(Process::leaf(State::Omega))
                }
                "nil" => {
                    self.bump();
                    Ok(Process::leaf(State::Nil))
                }
                "tau" => {
                    self.bump();
                    self.eat(Tok::Dot, "`.` after `tau`")?;
                    let cont = self.parse_prefix()?;
                    Ok(Process::leaf(State::Tau(cont)))
                }
                "if" => {
                    self.bump();
                    let guard = self.parse_expr()?;
                    if !self.keyword("then") {
                        return self.err("`then`");
                    }
                    let tstart = self.here();
                    let t = self.parse_prefix()?;
                    if !self.keyword("else") {
                        return self.err("`else`");
                    }
                    let estart = self.here();
                    let e = self.parse_prefix()?;
                    let t = unwrap_state(t, tstart, self)?;
                    let e = unwrap_state(e, estart, self)?;
                    Ok(Process::leaf(State::Match(guard, Box::new(t), Box::new(e))))
                }
                kw if KEYWORDS.contains(&kw) => self.err("a state"),
                _ => {
                    let name = Name::new(&word);
                    self.bump();
                    match self.peek() {
                        Tok::Bang => {
                            self.bump();
                            self.eat(Tok::Lt, "`<` opening the payload")?;
                            let e = self.parse_expr()?;
                            self.eat(Tok::Gt, "`>` closing the payload")?;
                            self.eat(Tok::Dot, "`.` before the continuation")?;
                            let cont = self.parse_prefix()?;
                            Ok(Process::leaf(State::Broadcast(name, e, cont)))
                        }
                        Tok::Question => {
                            self.bump();
                            self.eat(Tok::LParen, "`(` opening the binder")?;
                            let x = self.ident("a variable name")?;
                            self.eat(Tok::RParen, "`)` closing the binder")?;
                            self.eat(Tok::Dot, "`.` before the continuation")?;
                            let cont = self.parse_prefix()?;
                            Ok(Process::leaf(State::Receive(name, x, cont)))
                        }
                        Tok::LParen => {
                            self.bump();
                            let mut args = Vec::new();
                            if *self.peek() != Tok::RParen {
                                loop {
                                    args.push(self.parse_expr()?);
                                    if *self.peek() == Tok::Comma {
                                        self.bump();
                                    } else {
                                        break;
                                    }
                                }
                            }
                            self.eat(Tok::RParen, "`)` closing the arguments")?;
                            Ok(Process::leaf(State::Call(name, args)))
                        }
                        _ => Ok(Process::leaf(State::Call(name, Vec::new()))),
                    }
                }
            },
            Tok::LParen => {
                self.bump();
                let p = self.parse_proc()?;
                self.eat(Tok::RParen, "`)`")?;
                Ok(p)
            }
            _ => self.err("a state"),
        }
    }

    fn parse_prob(&mut self) -> Result<Ratio, ParseError> {
        let start = self.here();
        match self.peek().clone() {
            Tok::Num(num) => {
                self.bump();
                if *self.peek() == Tok::Slash {
                    self.bump();
                    let den = match self.peek().clone() {
                        Tok::Num(d) => {
                            self.bump();
                            d
                        }
                        _ => return self.err("a denominator"),
                    };
                    let (p, q) = match (num.parse::<u64>(), den.parse::<u64>()) {
                        (Ok(p), Ok(q)) => (p, q),
                        _ => return self.err_at(start, "a probability (literal too large)"),
                    };
                    if p == 0 || p >= q {
                        return self.err_at(start, "a probability strictly between 0 and 1");
                    }
                    Ok(Ratio::new(p, q))
                } else {
                    self.err_at(start, "a probability strictly between 0 and 1")
                }
            }
            Tok::Dec(int, frac) => {
                self.bump();
                let whole = int
                    .parse::<u64>()
                    .map_err(|_| ())
                    .or_else(|_| self.err_at(start, "a probability (literal too large)"))?;
                if whole != 0 {
                    return self.err_at(start, "a probability strictly between 0 and 1");
                }
                if frac.len() > 18 {
                    return self.err_at(start, "a probability (at most 18 decimal digits)");
                }
                let den = 10u64.pow(frac.len() as u32);
                let num = frac
                    .parse::<u64>()
                    .expect("digit run of bounded length parses");
                if num == 0 {
                    return self.err_at(start, "a probability strictly between 0 and 1");
                }
                Ok(Ratio::new(num, den))
            }
            _ => self.err("a probability"),
        }
    }

    // -- expressions ---------------------------------------------------------

    fn parse_expr(&mut self) -> Result<Expr, ParseError> {
        let l = self.parse_add()?;
        let op = match self.peek() {
            Tok::Eq => BinOp::Eq,
            Tok::Le => BinOp::Le,
            _ => return Ok(l),
        };
        self.bump();
        let r = self.parse_add()?;
        Ok(Expr::Bin(op, Box::new(l), Box::new(r)))
    }

    fn parse_add(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.parse_mul()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(acc),
            };
            self.bump();
            let r = self.parse_mul()?;
            acc = Expr::Bin(op, Box::new(acc), Box::new(r));
        }
    }

    fn parse_mul(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.parse_atom()?;
        while *self.peek() == Tok::Star {
            self.bump();
            let r = self.parse_atom()?;
            acc = Expr::Bin(BinOp::Mul, Box::new(acc), Box::new(r));
        }
        Ok(acc)
    }

    fn parse_atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Num(s) => {
                let v = match s.parse::<i64>() {
                    Ok(v) => v,
                    Err(_) => return self.err("an integer literal that fits in 64 bits"),
                };
                self.bump();
                Ok(Expr::Int(v))
            }
            Tok::Minus => {
                self.bump();
                match self.parse_atom()? {
                    Expr::Int(v) => Ok(Expr::Int(-v)),
                    e => Ok(Expr::Bin(
                        BinOp::Sub,
                        Box::new(Expr::Int(0)),
                        Box::new(e),
                    )),
                }
            }
            Tok::Ident(s) => match s.as_str() {
                "true" => {
                    self.bump();
                    Ok(Expr::Bool(true))
                }
                "false" => {
                    self.bump();
                    Ok(Expr::Bool(false))
                }
                kw if KEYWORDS.contains(&kw) => self.err("an expression"),
                _ => {
                    self.bump();
                    Ok(Expr::Var(Name::new(&s)))
                }
            },
            Tok::Tick => {
                self.bump();
                let n = self.ident("a constant name after `'`")?;
                Ok(Expr::Const(n))
            }
            Tok::LParen => {
                self.bump();
                let e = self.parse_expr()?;
                self.eat(Tok::RParen, "`)`")?;
                Ok(e)
            }
            _ => self.err("an expression"),
        }
    }

    // -- top-level structure -------------------------------------------------

    fn parse_def(&mut self) -> Result<DefDecl, ParseError> {
        // the `def` keyword is already consumed
        let name = self.ident("a definition name")?;
        let mut params = Vec::new();
        if *self.peek() == Tok::LParen {
            self.bump();
            if *self.peek() != Tok::RParen {
                loop {
                    let start = self.here();
                    let p = self.ident("a parameter name")?;
                    if params.contains(&p) {
                        return self.err_at(start, "a fresh parameter name");
                    }
                    params.push(p);
                    if *self.peek() == Tok::Comma {
                        self.bump();
                    } else {
                        break;
                    }
                }
            }
            self.eat(Tok::RParen, "`)` closing the parameters")?;
        }
        self.eat(Tok::Eq, "`=`")?;
        let bstart = self.here();
        let body = self.parse_pterm()?;
        let body = unwrap_state(body, bstart, self)?;
        self.eat(Tok::Semi, "`;` after the definition")?;
        Ok(DefDecl { name, params, body })
    }

    fn parse_net(&mut self) -> Result<NetBlock, ParseError> {
        // the `net` keyword is already consumed
        let name = self.ident("a network name")?;
        self.eat(Tok::LBrace, "`{`")?;
        let mut block = NetBlock {
            name: name.as_str().to_string(),
            nodes: Vec::new(),
            edges: Vec::new(),
            defs: Vec::new(),
            stations: Vec::new(),
        };
        loop {
            if self.keyword("nodes") {
                self.eat(Tok::Colon, "`:` after `nodes`")?;
                loop {
                    let start = self.here();
                    let v = self.ident("a vertex name")?;
                    if block.nodes.contains(&v) {
                        return self.err_at(start, "a fresh vertex name (already declared)");
                    }
                    block.nodes.push(v);
                    if *self.peek() == Tok::Comma {
                        self.bump();
                    } else {
                        break;
                    }
                }
                self.eat(Tok::Semi, "`;` after the vertex list")?;
            } else if self.keyword("edges") {
                self.eat(Tok::Colon, "`:` after `edges`")?;
                loop {
                    let start = self.here();
                    let from = self.declared_vertex(&block)?;
                    let both = match self.peek() {
                        Tok::Arrow => {
                            self.bump();
                            false
                        }
                        Tok::Bidir => {
                            self.bump();
                            true
                        }
                        _ => return self.err("`->` or `<->`"),
                    };
                    let to = self.declared_vertex(&block)?;
                    if from == to {
                        return self.err_at(start, "distinct edge endpoints");
                    }
                    let dup = block.edges.iter().any(|e| {
                        let fwd = e.from == from && e.to == to;
                        let rev = e.from == to && e.to == from;
                        fwd || (e.both && rev) || (both && (fwd || rev))
                    });
                    if dup {
                        return self.err_at(start, "a fresh edge (already declared)");
                    }
                    block.edges.push(Edge { from, to, both });
                    if *self.peek() == Tok::Comma {
                        self.bump();
                    } else {
                        break;
                    }
                }
                self.eat(Tok::Semi, "`;` after the edge list")?;
            } else if self.keyword("def") {
                let start = self.here();
                let d = self.parse_def()?;
                if block.defs.iter().any(|x| x.name == d.name) {
                    return self.err_at(start, "a fresh definition name (already defined here)");
                }
                block.defs.push(d);
            } else if self.keyword("at") {
                let start = self.here();
                let v = self.declared_vertex(&block)?;
                if block.stations.iter().any(|(n, _)| *n == v) {
                    return self.err_at(start, "a vertex without code (already occupied)");
                }
                self.eat(Tok::Colon, "`:` after the vertex")?;
                let sstart = self.here();
                let s = self.parse_pterm()?;
                let s = unwrap_state(s, sstart, self)?;
                self.eat(Tok::Semi, "`;` after the state")?;
                block.stations.push((v, s));
            } else if *self.peek() == Tok::RBrace {
                self.bump();
                return Ok(block);
            } else {
                return self.err("`nodes`, `edges`, `def`, `at`, or `}`");
            }
        }
    }

    fn declared_vertex(&mut self, block: &NetBlock) -> Result<Name, ParseError> {
        let start = self.here();
        let v = self.ident("a vertex name")?;
        if block.nodes.contains(&v) {
            Ok(v)
        } else {
            self.err_at(start, format!("a declared vertex (`{v}` is not in `nodes`)"))
        }
    }

    fn parse_file(&mut self) -> Result<NetFile, ParseError> {
        let mut file = NetFile::default();
        loop {
            if self.keyword("def") {
                let start = self.here();
                let d = self.parse_def()?;
                if file.defs.iter().any(|x| x.name == d.name) {
                    return self.err_at(start, "a fresh definition name (already defined)");
                }
                file.defs.push(d);
            } else if self.keyword("net") {
                let start = self.here();
                let b = self.parse_net()?;
                if file.nets.iter().any(|x| x.name == b.name) {
                    return self.err_at(start, "a fresh network name (already defined)");
                }
                file.nets.push(b);
            } else if *self.peek() == Tok::Eof {
                return Ok(file);
            } else {
                return self.err("`net`, `def`, or end of file");
            }
        }
    }

    fn expect_eof(&self) -> Result<(), ParseError> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            self.err("end of input")
        }
    }
}

fn unwrap_state(p: Process, at: (u32, u32), parser: &Parser) -> Result<State, ParseError> {
    match p {
        Process::StateLeaf(s) => Ok(*s),
        Process::PChoice(..) => parser.err_at(
            at,
            "a state (a probabilistic choice may only follow a prefix)",
        ),
    }
}

/// Parses a whole DSL file.
pub fn parse_file(src: &str) -> Result<NetFile, ParseError> {
    let mut p = Parser::new(src)?;
    let f = p.parse_file()?;
    p.expect_eof()?;
    Ok(f)
}

/// Parses a single state, for tools and tests.
pub fn parse_state(src: &str) -> Result<State, ParseError> {
    let mut p = Parser::new(src)?;
    let start = p.here();
    let t = p.parse_pterm()?;
    p.expect_eof()?;
    unwrap_state(t, start, &p)
}

/// Parses a single process, for tools and tests.
pub fn parse_proc(src: &str) -> Result<Process, ParseError> {
    let mut p = Parser::new(src)?;
    let t = p.parse_proc()?;
    p.expect_eof()?;
    Ok(t)
}
