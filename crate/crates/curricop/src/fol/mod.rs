//! First-order terms, literals and clauses over the fixed arithmetic
//! signature {o/0, s/1, plus/2, mul/2} with the single predicate eq/2.
//!
//! The signature is closed: there is no way to construct a term with an
//! unknown functor, and every application carries exactly the declared
//! number of arguments. Variables are plain numeric ids; human-readable
//! names live in a per-problem table so that parsing and printing can
//! round-trip while the hot paths stay allocation-light.

mod parse;
mod subst;

pub use parse::{parse_problem, serialize_problem, ParseError};
pub use subst::{unify, Subst, Trail};

use std::fmt;
use std::rc::Rc;

/// Variable identifier. Ids below `ProblemSpec::var_names.len()` were
/// introduced by the parser or a generator and have printable names;
/// larger ids are fresh copies made during proof search.
pub type VarId = u32;

/// Function symbols of the arithmetic signature.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Functor {
    O,
    S,
    Plus,
    Mul,
}

impl Functor {
    pub fn arity(self) -> usize {
        match self {
            Functor::O => 0,
            Functor::S => 1,
            Functor::Plus | Functor::Mul => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Functor::O => "o",
            Functor::S => "s",
            Functor::Plus => "plus",
            Functor::Mul => "mul",
        }
    }
}

/// A first-order term. Argument lists are reference-counted so cloning a
/// term (which proof search does constantly) is cheap and shares structure.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Var(VarId),
    App(Functor, Rc<[Term]>),
}

impl Term {
    /// Builds an application, checking the arity of the closed signature.
    pub fn app(f: Functor, args: Vec<Term>) -> Term {
        assert_eq!(
            args.len(),
            f.arity(),
            "{} expects {} arguments",
            f.name(),
            f.arity()
        );
        Term::App(f, args.into())
    }

    pub fn var(v: VarId) -> Term {
        Term::Var(v)
    }

    pub fn o() -> Term {
        Term::app(Functor::O, vec![])
    }

    pub fn s(t: Term) -> Term {
        Term::app(Functor::S, vec![t])
    }

    pub fn plus(a: Term, b: Term) -> Term {
        Term::app(Functor::Plus, vec![a, b])
    }

    pub fn mul(a: Term, b: Term) -> Term {
        Term::app(Functor::Mul, vec![a, b])
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::App(_, args) => args.iter().all(Term::is_ground),
        }
    }

    /// Collects the distinct variables of the term in first-occurrence order.
    pub fn vars_into(&self, out: &mut Vec<VarId>) {
        match self {
            Term::Var(v) => {
                if !out.contains(v) {
                    out.push(*v);
                }
            }
            Term::App(_, args) => {
                for a in args.iter() {
                    a.vars_into(out);
                }
            }
        }
    }
}

/// The unary numeral s^n(o).
pub fn numeral(n: u64) -> Term {
    let mut t = Term::o();
    for _ in 0..n {
        t = Term::s(t);
    }
    t
}

/// Inverse of [`numeral`]: Some(n) iff the term is exactly s^n(o).
pub fn as_numeral(t: &Term) -> Option<u64> {
    let mut n = 0;
    let mut cur = t;
    loop {
        match cur {
            Term::App(Functor::S, args) => {
                n += 1;
                cur = &args[0];
            }
            Term::App(Functor::O, _) => return Some(n),
            _ => return None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn negate(self) -> Polarity {
        match self {
            Polarity::Positive => Polarity::Negative,
            Polarity::Negative => Polarity::Positive,
        }
    }
}

/// A literal: a possibly negated eq-atom. The predicate is always eq/2,
/// so only the polarity and the two argument terms are stored.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Literal {
    pub polarity: Polarity,
    pub left: Term,
    pub right: Term,
}

impl Literal {
    pub fn pos(left: Term, right: Term) -> Literal {
        Literal {
            polarity: Polarity::Positive,
            left,
            right,
        }
    }

    pub fn neg(left: Term, right: Term) -> Literal {
        Literal {
            polarity: Polarity::Negative,
            left,
            right,
        }
    }

    /// The name of the predicate symbol; the signature has only one.
    pub fn predicate(&self) -> &'static str {
        "eq"
    }

    /// Same atom, opposite polarity.
    pub fn complement(&self) -> Literal {
        Literal {
            polarity: self.polarity.negate(),
            left: self.left.clone(),
            right: self.right.clone(),
        }
    }

    pub fn vars_into(&self, out: &mut Vec<VarId>) {
        self.left.vars_into(out);
        self.right.vars_into(out);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Axiom,
    NegatedConjecture,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::Axiom => "axiom",
            Role::NegatedConjecture => "negated_conjecture",
        }
    }
}

/// A clause: a named disjunction of literals with a role marker.
/// Variables are implicitly universally quantified per clause.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Clause {
    pub id: String,
    pub role: Role,
    pub literals: Vec<Literal>,
}

impl Clause {
    pub fn new(id: impl Into<String>, role: Role, literals: Vec<Literal>) -> Clause {
        assert!(!literals.is_empty(), "clause must have at least one literal");
        Clause {
            id: id.into(),
            role,
            literals,
        }
    }

    /// Distinct variables of the clause in first-occurrence order.
    pub fn vars(&self) -> Vec<VarId> {
        let mut out = Vec::new();
        for lit in &self.literals {
            lit.vars_into(&mut out);
        }
        out
    }
}

/// Optional metadata carried in comment headers of a problem file.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ProblemMeta {
    pub statement: Option<String>,
    pub stage: Option<u8>,
    pub split: Option<String>,
}

/// A proof problem: a clause list with a designated start clause
/// (the negated conjecture) plus naming metadata.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProblemSpec {
    pub id: String,
    pub clauses: Vec<Clause>,
    /// Index into `clauses` of the negated conjecture.
    pub start_clause: usize,
    pub metadata: ProblemMeta,
    /// Printable names for parser/generator-introduced variables,
    /// indexed by `VarId`.
    pub var_names: Vec<String>,
}

impl ProblemSpec {
    /// First variable id that is guaranteed not to occur in any clause.
    pub fn first_fresh_var(&self) -> VarId {
        self.var_names.len() as VarId
    }

    /// True when every clause has at most one positive literal and the
    /// start clause has none. In that case every goal ever created by
    /// the tableau engine is negative and reduction steps can never
    /// apply, which the engine exploits to skip reduction scans.
    pub fn is_horn_with_negative_start(&self) -> bool {
        let start_ok = self.clauses[self.start_clause]
            .literals
            .iter()
            .all(|l| l.polarity == Polarity::Negative);
        start_ok
            && self.clauses.iter().all(|c| {
                c.literals
                    .iter()
                    .filter(|l| l.polarity == Polarity::Positive)
                    .count()
                    <= 1
            })
    }
}

/// Renders a term with variable names taken from `names`, falling back
/// to `_<id>` for fresh variables.
pub struct TermDisplay<'a> {
    pub term: &'a Term,
    pub names: &'a [String],
}

impl fmt::Display for TermDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_term(f, self.term, self.names)
    }
}

fn write_term(f: &mut fmt::Formatter<'_>, t: &Term, names: &[String]) -> fmt::Result {
    match t {
        Term::Var(v) => match names.get(*v as usize) {
            Some(name) => f.write_str(name),
            None => write!(f, "_{v}"),
        },
        Term::App(fun, args) => {
            f.write_str(fun.name())?;
            if !args.is_empty() {
                f.write_str("(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write_term(f, a, names)?;
                }
                f.write_str(")")?;
            }
            Ok(())
        }
    }
}

/// Renders a literal in problem-file syntax, e.g. `~eq(s(X),o)`.
pub struct LiteralDisplay<'a> {
    pub literal: &'a Literal,
    pub names: &'a [String],
}

impl fmt::Display for LiteralDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.literal.polarity == Polarity::Negative {
            f.write_str("~")?;
        }
        f.write_str("eq(")?;
        write_term(f, &self.literal.left, self.names)?;
        f.write_str(",")?;
        write_term(f, &self.literal.right, self.names)?;
        f.write_str(")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numeral_builds_nested_successors() {
        assert_eq!(numeral(0), Term::o());
        assert_eq!(numeral(3), Term::s(Term::s(Term::s(Term::o()))));
        assert_eq!(as_numeral(&numeral(3)), Some(3));
        assert_eq!(as_numeral(&Term::plus(Term::o(), Term::o())), None);
    }

    #[test]
    fn numeral_30_has_depth_31() {
        fn depth(t: &Term) -> usize {
            match t {
                Term::Var(_) => 1,
                Term::App(_, args) => 1 + args.iter().map(depth).max().unwrap_or(0),
            }
        }
        assert_eq!(depth(&numeral(30)), 31);
    }

    #[test]
    #[should_panic]
    fn app_checks_arity() {
        Term::app(Functor::S, vec![]);
    }

    #[test]
    fn complement_flips_polarity_only() {
        let l = Literal::neg(Term::o(), numeral(1));
        let c = l.complement();
        assert_eq!(c.polarity, Polarity::Positive);
        assert_eq!(c.left, l.left);
        assert_eq!(c.right, l.right);
    }

    #[test]
    fn display_uses_names_and_fresh_fallback() {
        let names = vec!["X".to_string()];
        let t = Term::plus(Term::var(0), Term::var(7));
        assert_eq!(format!("{}", TermDisplay { term: &t, names: &names }), "plus(X,_7)");
    }
}
