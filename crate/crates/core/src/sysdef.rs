//! System definitions and the `.fss` text format.
//!
//! A file declares a prime field, a variable list, one polynomial update per
//! variable, and optional named outputs:
//!
//! ```text
//! # three-state example
//! field 3
//! vars x1 x2
//! update x1 = 2*x1 + x2
//! update x2 = x1 + x2
//! output z1 = x1^2 + x2
//! ```
//!
//! Statements are line-oriented; `#` starts a comment. Expressions allow
//! `+`, binary and leading `-`, `*`, parentheses, and `^` with a nonnegative
//! integer literal exponent. Integer literals of any length are folded into
//! the field during parsing, so the parser is total: every input yields
//! either a system or a located error. Rendering emits the canonical form,
//! and parsing a rendered system reproduces it exactly.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::field::{FieldError, FieldSpec, MAX_MODULUS};
use crate::poly::PolyFunc;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    /// Malformed input with its position (1-based line and column).
    #[error("line {line}, column {col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    /// The declared field modulus is composite.
    #[error("line {line}: field modulus {p} is not prime")]
    NotPrime { line: usize, p: u64 },
    /// The declared field modulus exceeds the supported range.
    #[error("line {line}: field modulus exceeds the maximum {MAX_MODULUS}")]
    ModulusTooLarge { line: usize },
    /// An expression uses a name that is not a declared variable.
    #[error("line {line}, column {col}: undeclared variable {name}")]
    UndeclaredVariable {
        line: usize,
        col: usize,
        name: String,
    },
    /// Two updates target the same variable.
    #[error("line {line}: duplicate update for {name}")]
    DuplicateUpdate { line: usize, name: String },
    /// A declared variable has no update statement.
    #[error("missing update for variable {name}")]
    MissingUpdate { name: String },
    /// The file has no field statement.
    #[error("missing field statement")]
    MissingField,
}

/// A finite state system: update map `F: F_p^n -> F_p^n` plus optional
/// outputs `g: F_p^n -> F_p^m`, all in canonical reduced form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FssSystem {
    spec: FieldSpec,
    var_names: Vec<String>,
    updates: Vec<PolyFunc>,
    output_names: Vec<String>,
    outputs: Vec<PolyFunc>,
}

impl FssSystem {
    /// Assembles a system from parts. Panics on inconsistent shapes; use
    /// [`parse_system`] for untrusted input.
    pub fn new(
        spec: FieldSpec,
        var_names: Vec<String>,
        updates: Vec<PolyFunc>,
        output_names: Vec<String>,
        outputs: Vec<PolyFunc>,
    ) -> Self {
        assert_eq!(var_names.len(), updates.len(), "one update per variable");
        assert_eq!(output_names.len(), outputs.len(), "one name per output");
        for f in updates.iter().chain(&outputs) {
            assert_eq!(f.spec(), spec, "polynomials must live over the field");
            assert_eq!(f.vars(), var_names.len(), "polynomial arity mismatch");
        }
        FssSystem {
            spec,
            var_names,
            updates,
            output_names,
            outputs,
        }
    }

    pub fn spec(&self) -> FieldSpec {
        self.spec
    }

    /// Number of state variables.
    pub fn n(&self) -> usize {
        self.var_names.len()
    }

    /// Number of outputs.
    pub fn m(&self) -> usize {
        self.outputs.len()
    }

    pub fn var_names(&self) -> &[String] {
        &self.var_names
    }

    pub fn output_names(&self) -> &[String] {
        &self.output_names
    }

    pub fn updates(&self) -> &[PolyFunc] {
        &self.updates
    }

    pub fn outputs(&self) -> &[PolyFunc] {
        &self.outputs
    }

    /// Applies the update map once.
    pub fn step(&self, x: &[u64]) -> Vec<u64> {
        self.updates
            .iter()
            .map(|f| f.eval(x).expect("state dimension matches").value())
            .collect()
    }

    /// Evaluates the outputs at a state.
    pub fn output(&self, x: &[u64]) -> Vec<u64> {
        self.outputs
            .iter()
            .map(|g| g.eval(x).expect("state dimension matches").value())
            .collect()
    }

    /// Runs the system for `steps` steps, returning states `x(0..=steps)`
    /// and outputs `z(0..=steps)`.
    pub fn simulate(&self, x0: &[u64], steps: usize) -> (Vec<Vec<u64>>, Vec<Vec<u64>>) {
        let mut x: Vec<u64> = x0.iter().map(|&v| self.spec.reduce(v)).collect();
        let mut states = Vec::with_capacity(steps + 1);
        let mut outputs = Vec::with_capacity(steps + 1);
        for _ in 0..steps {
            states.push(x.clone());
            outputs.push(self.output(&x));
            x = self.step(&x);
        }
        states.push(x.clone());
        outputs.push(self.output(&x));
        (states, outputs)
    }
}

/// Canonical text form: `field`, `vars`, updates in declaration order, then
/// outputs in declaration order.
pub fn render_system(sys: &FssSystem) -> String {
    let mut out = String::new();
    out.push_str(&format!("field {}\n", sys.spec.modulus()));
    out.push_str(&format!("vars {}\n", sys.var_names.join(" ")));
    for (name, f) in sys.var_names.iter().zip(&sys.updates) {
        out.push_str(&format!("update {} = {}\n", name, f.render(&sys.var_names)));
    }
    for (name, g) in sys.output_names.iter().zip(&sys.outputs) {
        out.push_str(&format!("output {} = {}\n", name, g.render(&sys.var_names)));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(String),
    Plus,
    Minus,
    Star,
    Caret,
    Equals,
    LParen,
    RParen,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    col: usize,
}

fn syntax(line: usize, col: usize, message: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        line,
        col,
        message: message.into(),
    }
}

fn tokenize_line(line_no: usize, line: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut toks = Vec::new();
    let bytes: Vec<char> = line.chars().collect();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let col = i + 1;
        match c {
            '#' => break,
            c if c.is_whitespace() => i += 1,
            '+' => {
                toks.push(Spanned { tok: Tok::Plus, col });
                i += 1;
            }
            '-' => {
                toks.push(Spanned { tok: Tok::Minus, col });
                i += 1;
            }
            '*' => {
                toks.push(Spanned { tok: Tok::Star, col });
                i += 1;
            }
            '^' => {
                toks.push(Spanned { tok: Tok::Caret, col });
                i += 1;
            }
            '=' => {
                toks.push(Spanned { tok: Tok::Equals, col });
                i += 1;
            }
            '(' => {
                toks.push(Spanned { tok: Tok::LParen, col });
                i += 1;
            }
            ')' => {
                toks.push(Spanned { tok: Tok::RParen, col });
                i += 1;
            }
            c if c.is_ascii_digit() => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                toks.push(Spanned {
                    tok: Tok::Int(bytes[start..i].iter().collect()),
                    col,
                });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == '_') {
                    i += 1;
                }
                toks.push(Spanned {
                    tok: Tok::Ident(bytes[start..i].iter().collect()),
                    col,
                });
            }
            other => {
                return Err(syntax(
                    line_no,
                    col,
                    format!("unexpected character {other:?}"),
                ));
            }
        }
    }
    Ok(toks)
}

/// Folds a digit string into `[0, p)` without ever overflowing.
fn fold_mod(digits: &str, p: u64) -> u64 {
    let mut r = 0u64;
    for d in digits.bytes() {
        r = (r * 10 + (d - b'0') as u64) % p;
    }
    r
}

/// Folds an exponent literal into the reduced range: `0` stays `0`, any
/// positive exponent lands in `[1, p-1]` congruent modulo `p - 1`.
fn fold_exponent(digits: &str, p: u64) -> u64 {
    if digits.bytes().all(|d| d == b'0') {
        return 0;
    }
    let r = fold_mod(digits, p - 1);
    (r + p - 2) % (p - 1) + 1
}

struct ExprParser<'a> {
    line: usize,
    toks: &'a [Spanned],
    pos: usize,
    spec: FieldSpec,
    var_index: &'a BTreeMap<String, usize>,
    n: usize,
}

impl<'a> ExprParser<'a> {
    fn peek(&self) -> Option<&Spanned> {
        self.toks.get(self.pos)
    }

    fn end_col(&self) -> usize {
        self.toks
            .last()
            .map(|s| s.col + 1)
            .unwrap_or(1)
    }

    fn expr(&mut self) -> Result<PolyFunc, ParseError> {
        let mut negate_first = false;
        if matches!(self.peek().map(|s| &s.tok), Some(Tok::Minus)) {
            self.pos += 1;
            negate_first = true;
        }
        let mut acc = self.term()?;
        if negate_first {
            acc = acc.neg();
        }
        loop {
            match self.peek().map(|s| s.tok.clone()) {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    let t = self.term()?;
                    acc = acc.add(&t).expect("same ring");
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    let t = self.term()?;
                    acc = acc.sub(&t).expect("same ring");
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<PolyFunc, ParseError> {
        let mut acc = self.factor()?;
        while matches!(self.peek().map(|s| &s.tok), Some(Tok::Star)) {
            self.pos += 1;
            let f = self.factor()?;
            acc = acc.mul(&f).expect("same ring");
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<PolyFunc, ParseError> {
        let base = self.base()?;
        if matches!(self.peek().map(|s| &s.tok), Some(Tok::Caret)) {
            self.pos += 1;
            match self.peek().cloned() {
                Some(Spanned {
                    tok: Tok::Int(digits),
                    ..
                }) => {
                    self.pos += 1;
                    let e = fold_exponent(&digits, self.spec.modulus());
                    return Ok(base.pow(e));
                }
                other => {
                    let col = other.map(|s| s.col).unwrap_or_else(|| self.end_col());
                    return Err(syntax(
                        self.line,
                        col,
                        "expected a nonnegative integer exponent after ^",
                    ));
                }
            }
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<PolyFunc, ParseError> {
        match self.peek().cloned() {
            Some(Spanned {
                tok: Tok::Int(digits),
                ..
            }) => {
                self.pos += 1;
                let c = fold_mod(&digits, self.spec.modulus());
                Ok(PolyFunc::constant(self.spec, self.n, c))
            }
            Some(Spanned {
                tok: Tok::Ident(name),
                col,
            }) => {
                self.pos += 1;
                match self.var_index.get(&name) {
                    Some(&i) => {
                        Ok(PolyFunc::coordinate(self.spec, self.n, i + 1)
                            .expect("index from the declaration map"))
                    }
                    None => Err(ParseError::UndeclaredVariable {
                        line: self.line,
                        col,
                        name,
                    }),
                }
            }
            Some(Spanned {
                tok: Tok::LParen, ..
            }) => {
                self.pos += 1;
                let inner = self.expr()?;
                match self.peek() {
                    Some(Spanned {
                        tok: Tok::RParen, ..
                    }) => {
                        self.pos += 1;
                        Ok(inner)
                    }
                    other => {
                        let col = other.map(|s| s.col).unwrap_or_else(|| self.end_col());
                        Err(syntax(self.line, col, "expected closing parenthesis"))
                    }
                }
            }
            other => {
                let col = other.map(|s| s.col).unwrap_or_else(|| self.end_col());
                Err(syntax(
                    self.line,
                    col,
                    "expected a number, variable, or parenthesized expression",
                ))
            }
        }
    }
}

/// Parses `.fss` text into a system. Total: any input produces either a
/// system or a located [`ParseError`].
pub fn parse_system(text: &str) -> Result<FssSystem, ParseError> {
    let mut field: Option<(FieldSpec, usize)> = None;
    let mut vars: Option<(Vec<String>, usize)> = None;
    let mut var_index: BTreeMap<String, usize> = BTreeMap::new();
    let mut updates: Vec<Option<PolyFunc>> = Vec::new();
    let mut output_names: Vec<String> = Vec::new();
    let mut outputs: Vec<PolyFunc> = Vec::new();

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let toks = tokenize_line(line_no, raw_line)?;
        if toks.is_empty() {
            continue;
        }
        let head = match &toks[0].tok {
            Tok::Ident(w) => w.as_str(),
            _ => {
                return Err(syntax(
                    line_no,
                    toks[0].col,
                    "expected field, vars, update, or output",
                ));
            }
        };
        match head {
            "field" => {
                if field.is_some() {
                    return Err(syntax(line_no, toks[0].col, "duplicate field statement"));
                }
                let digits = match toks.get(1) {
                    Some(Spanned {
                        tok: Tok::Int(d), ..
                    }) => d,
                    other => {
                        let col = other.map(|s| s.col).unwrap_or(toks[0].col + 6);
                        return Err(syntax(line_no, col, "expected a prime modulus"));
                    }
                };
                if toks.len() > 2 {
                    return Err(syntax(line_no, toks[2].col, "unexpected trailing tokens"));
                }
                if digits.len() > 10 {
                    return Err(ParseError::ModulusTooLarge { line: line_no });
                }
                let p: u64 = digits.parse().expect("digit count already bounded");
                let spec = FieldSpec::new(p).map_err(|e| match e {
                    FieldError::NotPrime(p) => ParseError::NotPrime { line: line_no, p },
                    _ => ParseError::ModulusTooLarge { line: line_no },
                })?;
                field = Some((spec, line_no));
            }
            "vars" => {
                if vars.is_some() {
                    return Err(syntax(line_no, toks[0].col, "duplicate vars statement"));
                }
                if toks.len() == 1 {
                    return Err(syntax(
                        line_no,
                        toks[0].col + 5,
                        "expected at least one variable name",
                    ));
                }
                let mut names = Vec::new();
                for s in &toks[1..] {
                    match &s.tok {
                        Tok::Ident(name) => {
                            if var_index.contains_key(name) {
                                return Err(syntax(
                                    line_no,
                                    s.col,
                                    format!("duplicate variable {name}"),
                                ));
                            }
                            var_index.insert(name.clone(), names.len());
                            names.push(name.clone());
                        }
                        _ => {
                            return Err(syntax(line_no, s.col, "expected a variable name"));
                        }
                    }
                }
                updates = vec![None; names.len()];
                vars = Some((names, line_no));
            }
            "update" | "output" => {
                let (spec, _) = field.ok_or(ParseError::MissingField)?;
                let (names, _) = vars.as_ref().ok_or_else(|| {
                    syntax(line_no, toks[0].col, "vars statement must come first")
                })?;
                let name = match toks.get(1) {
                    Some(Spanned {
                        tok: Tok::Ident(name),
                        ..
                    }) => name.clone(),
                    other => {
                        let col = other.map(|s| s.col).unwrap_or(toks[0].col);
                        return Err(syntax(line_no, col, "expected a name"));
                    }
                };
                match toks.get(2) {
                    Some(Spanned {
                        tok: Tok::Equals, ..
                    }) => {}
                    other => {
                        let col = other.map(|s| s.col).unwrap_or(toks[0].col);
                        return Err(syntax(line_no, col, "expected ="));
                    }
                }
                let mut parser = ExprParser {
                    line: line_no,
                    toks: &toks[3..],
                    pos: 0,
                    spec,
                    var_index: &var_index,
                    n: names.len(),
                };
                let poly = parser.expr()?;
                if let Some(extra) = parser.peek() {
                    return Err(syntax(line_no, extra.col, "unexpected trailing tokens"));
                }
                if head == "update" {
                    match var_index.get(&name) {
                        Some(&i) => {
                            if updates[i].is_some() {
                                return Err(ParseError::DuplicateUpdate {
                                    line: line_no,
                                    name,
                                });
                            }
                            updates[i] = Some(poly);
                        }
                        None => {
                            return Err(ParseError::UndeclaredVariable {
                                line: line_no,
                                col: toks[1].col,
                                name,
                            });
                        }
                    }
                } else {
                    if output_names.contains(&name) {
                        return Err(syntax(
                            line_no,
                            toks[1].col,
                            format!("duplicate output {name}"),
                        ));
                    }
                    output_names.push(name);
                    outputs.push(poly);
                }
            }
            other => {
                return Err(syntax(
                    line_no,
                    toks[0].col,
                    format!("unknown statement {other:?}"),
                ));
            }
        }
    }

    let (spec, _) = field.ok_or(ParseError::MissingField)?;
    let (names, line) = vars.ok_or_else(|| syntax(1, 1, "missing vars statement"))?;
    let _ = line;
    let mut resolved = Vec::with_capacity(names.len());
    for (name, upd) in names.iter().zip(updates) {
        match upd {
            Some(f) => resolved.push(f),
            None => return Err(ParseError::MissingUpdate { name: name.clone() }),
        }
    }
    Ok(FssSystem::new(spec, names, resolved, output_names, outputs))
}
