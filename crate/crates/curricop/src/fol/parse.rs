//! Reading and writing clause-normal-form problem files.
//!
//! One statement per line: `cnf(<id>, <role>, <lit> | <lit> | ...).`
//! Roles are `axiom` or `negated_conjecture`, negation is `~`, terms are
//! prefix applications over the closed signature, variables start with an
//! uppercase letter, `%` starts a comment. A few comment headers
//! (`% problem:`, `% statement:`, `% stage:`, `% split:`) carry metadata
//! so that serialization round-trips.

use std::collections::HashMap;

use thiserror::Error;

use super::{Clause, Functor, Literal, Polarity, ProblemMeta, ProblemSpec, Role, Term, VarId};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("{line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: {functor} expects {expected} arguments, got {got}")]
    Arity {
        line: usize,
        col: usize,
        functor: String,
        expected: usize,
        got: usize,
    },
    #[error("duplicate clause id '{0}'")]
    DuplicateClauseId(String),
    #[error("no negated_conjecture clause")]
    MissingNegatedConjecture,
    #[error("multiple negated_conjecture clauses")]
    MultipleNegatedConjecture,
}

struct LineParser<'a> {
    bytes: &'a [u8],
    pos: usize,
    line: usize,
    /// Name to id mapping for the clause being parsed; variable scope is
    /// a single clause.
    scope: HashMap<String, VarId>,
}

impl<'a> LineParser<'a> {
    fn new(text: &'a str, line: usize) -> Self {
        LineParser {
            bytes: text.as_bytes(),
            pos: 0,
            line,
            scope: HashMap::new(),
        }
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            line: self.line,
            col: self.pos + 1,
            msg: msg.into(),
        })
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ') | Some(b'\t')) {
            self.pos += 1;
        }
    }

    fn expect(&mut self, token: &str) -> Result<(), ParseError> {
        self.skip_ws();
        if self.bytes[self.pos..].starts_with(token.as_bytes()) {
            self.pos += token.len();
            Ok(())
        } else {
            self.err(format!("expected '{token}'"))
        }
    }

    fn ident(&mut self) -> Result<(String, usize), ParseError> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            Some(c) if c.is_ascii_alphabetic() => {}
            _ => return self.err("expected identifier"),
        }
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos])
            .expect("ascii checked")
            .to_string();
        Ok((text, start + 1))
    }

    fn term(&mut self, names: &mut Vec<String>) -> Result<Term, ParseError> {
        let (name, col) = self.ident()?;
        let first = name.as_bytes()[0];
        if first.is_ascii_uppercase() {
            let next = names.len() as VarId;
            let id = *self.scope.entry(name.clone()).or_insert_with(|| {
                names.push(name.clone());
                next
            });
            return Ok(Term::Var(id));
        }
        let functor = match name.as_str() {
            "o" => Functor::O,
            "s" => Functor::S,
            "plus" => Functor::Plus,
            "mul" => Functor::Mul,
            other => {
                return Err(ParseError::Syntax {
                    line: self.line,
                    col,
                    msg: format!("unknown symbol '{other}'"),
                })
            }
        };
        let args = self.maybe_args(names)?;
        if args.len() != functor.arity() {
            return Err(ParseError::Arity {
                line: self.line,
                col,
                functor: name,
                expected: functor.arity(),
                got: args.len(),
            });
        }
        Ok(Term::App(functor, args.into()))
    }

    fn maybe_args(&mut self, names: &mut Vec<String>) -> Result<Vec<Term>, ParseError> {
        self.skip_ws();
        if self.peek() != Some(b'(') {
            return Ok(vec![]);
        }
        self.pos += 1;
        let mut args = vec![self.term(names)?];
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b',') => {
                    self.pos += 1;
                    args.push(self.term(names)?);
                }
                Some(b')') => {
                    self.pos += 1;
                    return Ok(args);
                }
                _ => return self.err("expected ',' or ')'"),
            }
        }
    }

    fn literal(&mut self, names: &mut Vec<String>) -> Result<Literal, ParseError> {
        self.skip_ws();
        let polarity = if self.peek() == Some(b'~') {
            self.pos += 1;
            Polarity::Negative
        } else {
            Polarity::Positive
        };
        let (name, col) = self.ident()?;
        if name != "eq" {
            return Err(ParseError::Syntax {
                line: self.line,
                col,
                msg: format!("unknown predicate '{name}'"),
            });
        }
        let args = self.maybe_args(names)?;
        if args.len() != 2 {
            return Err(ParseError::Arity {
                line: self.line,
                col,
                functor: "eq".into(),
                expected: 2,
                got: args.len(),
            });
        }
        let mut it = args.into_iter();
        let left = it.next().expect("length checked");
        let right = it.next().expect("length checked");
        Ok(Literal { polarity, left, right })
    }

    fn statement(&mut self, names: &mut Vec<String>) -> Result<Clause, ParseError> {
        self.expect("cnf")?;
        self.expect("(")?;
        let (id, col) = self.ident()?;
        if !id.as_bytes()[0].is_ascii_lowercase() {
            return Err(ParseError::Syntax {
                line: self.line,
                col,
                msg: "clause id must start with a lowercase letter".into(),
            });
        }
        self.expect(",")?;
        let (role_name, role_col) = self.ident()?;
        let role = match role_name.as_str() {
            "axiom" => Role::Axiom,
            "negated_conjecture" => Role::NegatedConjecture,
            other => {
                return Err(ParseError::Syntax {
                    line: self.line,
                    col: role_col,
                    msg: format!("unknown role '{other}'"),
                })
            }
        };
        self.expect(",")?;
        let mut literals = vec![self.literal(names)?];
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b'|') => {
                    self.pos += 1;
                    literals.push(self.literal(names)?);
                }
                _ => break,
            }
        }
        self.expect(")")?;
        self.expect(".")?;
        self.skip_ws();
        if self.peek().is_some() {
            return self.err("trailing input after statement");
        }
        Ok(Clause { id, role, literals })
    }
}

/// Parses a problem file. Exactly one `negated_conjecture` clause is
/// required; it becomes the start clause.
pub fn parse_problem(text: &str) -> Result<ProblemSpec, ParseError> {
    let mut clauses: Vec<Clause> = Vec::new();
    let mut var_names: Vec<String> = Vec::new();
    let mut metadata = ProblemMeta::default();
    let mut problem_id: Option<String> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end();
        let trimmed = line.trim_start();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('%') {
            let comment = comment.trim();
            if let Some(v) = comment.strip_prefix("problem:") {
                problem_id = Some(v.trim().to_string());
            } else if let Some(v) = comment.strip_prefix("statement:") {
                metadata.statement = Some(v.trim().to_string());
            } else if let Some(v) = comment.strip_prefix("stage:") {
                metadata.stage = v.trim().parse().ok();
            } else if let Some(v) = comment.strip_prefix("split:") {
                metadata.split = Some(v.trim().to_string());
            }
            continue;
        }
        let mut parser = LineParser::new(line, line_no);
        let clause = parser.statement(&mut var_names)?;
        if clauses.iter().any(|c| c.id == clause.id) {
            return Err(ParseError::DuplicateClauseId(clause.id));
        }
        clauses.push(clause);
    }

    let mut start = None;
    for (i, c) in clauses.iter().enumerate() {
        if c.role == Role::NegatedConjecture {
            if start.is_some() {
                return Err(ParseError::MultipleNegatedConjecture);
            }
            start = Some(i);
        }
    }
    let start_clause = start.ok_or(ParseError::MissingNegatedConjecture)?;

    Ok(ProblemSpec {
        id: problem_id.unwrap_or_else(|| "problem".to_string()),
        clauses,
        start_clause,
        metadata,
        var_names,
    })
}

/// Serializes a problem in the canonical layout read back by
/// [`parse_problem`]. Parsing the output reproduces the input problem.
pub fn serialize_problem(p: &ProblemSpec) -> String {
    use std::fmt::Write;

    let mut out = String::new();
    writeln!(out, "% problem: {}", p.id).expect("string write");
    if let Some(stmt) = &p.metadata.statement {
        writeln!(out, "% statement: {stmt}").expect("string write");
    }
    if let Some(stage) = p.metadata.stage {
        writeln!(out, "% stage: {stage}").expect("string write");
    }
    if let Some(split) = &p.metadata.split {
        writeln!(out, "% split: {split}").expect("string write");
    }
    for c in &p.clauses {
        write!(out, "cnf({}, {}, ", c.id, c.role.name()).expect("string write");
        for (i, lit) in c.literals.iter().enumerate() {
            if i > 0 {
                out.push_str(" | ");
            }
            write!(
                out,
                "{}",
                super::LiteralDisplay { literal: lit, names: &p.var_names }
            )
            .expect("string write");
        }
        out.push_str(").\n");
    }
    out
}
