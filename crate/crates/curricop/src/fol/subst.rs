//! Global substitutions and first-order unification.
//!
//! The substitution is stored in triangular form: a binding's right-hand
//! side may mention variables that receive bindings later. Reads resolve
//! bindings transitively, so [`Subst::apply`] always returns a fully
//! resolved term and is therefore idempotent. The occurs check guarantees
//! the binding graph stays acyclic; it can be disabled for comparison
//! runs, in which case resolution guards against cycles with a depth cap.

use std::collections::{BTreeMap, HashMap};

use super::{Literal, Term, VarId};

/// Resolution depth cap used only when the occurs check is disabled and a
/// cyclic binding could otherwise loop forever.
const RESOLVE_DEPTH_LIMIT: usize = 1 << 20;

/// A global substitution: a map from variables to terms.
///
/// Invariants: no binding maps a variable to itself, and with the occurs
/// check enabled the binding graph is acyclic, so applying the
/// substitution twice equals applying it once.
#[derive(Clone, Debug, Default)]
pub struct Subst {
    map: HashMap<VarId, Term>,
}

/// Undo log for speculative unification: the variables bound since the
/// trail was captured, in binding order.
#[derive(Debug, Default)]
pub struct Trail(Vec<VarId>);

impl Trail {
    pub fn new() -> Trail {
        Trail(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Removes every binding recorded after `mark`.
    pub fn undo_to(&mut self, subst: &mut Subst, mark: usize) {
        while self.0.len() > mark {
            let v = self.0.pop().expect("trail length checked");
            subst.map.remove(&v);
        }
    }
}

impl Subst {
    pub fn new() -> Subst {
        Subst::default()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn get(&self, v: VarId) -> Option<&Term> {
        self.map.get(&v)
    }

    /// Follows variable bindings until reaching an unbound variable or an
    /// application. Does not descend into arguments.
    pub fn walk<'a>(&'a self, mut t: &'a Term) -> &'a Term {
        let mut depth = 0;
        while let Term::Var(v) = t {
            match self.map.get(v) {
                Some(next) => {
                    t = next;
                    depth += 1;
                    assert!(depth < RESOLVE_DEPTH_LIMIT, "cyclic substitution (occurs check off)");
                }
                None => break,
            }
        }
        t
    }

    /// Fully resolves a term, materializing the substituted form.
    /// The result contains no bound variables, so re-application is a
    /// fixpoint.
    pub fn apply(&self, t: &Term) -> Term {
        let walked = self.walk(t);
        match walked {
            Term::Var(v) => Term::Var(*v),
            Term::App(f, args) => {
                if args.iter().all(|a| self.is_resolved(a)) {
                    walked.clone()
                } else {
                    Term::App(*f, args.iter().map(|a| self.apply(a)).collect())
                }
            }
        }
    }

    pub fn apply_literal(&self, l: &Literal) -> Literal {
        Literal {
            polarity: l.polarity,
            left: self.apply(&l.left),
            right: self.apply(&l.right),
        }
    }

    /// True when the term mentions no bound variable, i.e. applying the
    /// substitution would return it unchanged.
    fn is_resolved(&self, t: &Term) -> bool {
        match t {
            Term::Var(v) => !self.map.contains_key(v),
            Term::App(_, args) => args.iter().all(|a| self.is_resolved(a)),
        }
    }

    /// The substitution in idempotent normal form: every right-hand side
    /// fully resolved. Sorted by variable id for deterministic iteration.
    pub fn normalized(&self) -> BTreeMap<VarId, Term> {
        self.map
            .iter()
            .map(|(v, t)| (*v, self.apply(t)))
            .collect()
    }

    /// Does `v` occur in `t` under the current bindings?
    pub fn occurs(&self, v: VarId, t: &Term) -> bool {
        match self.walk(t) {
            Term::Var(w) => *w == v,
            Term::App(_, args) => args.iter().any(|a| self.occurs(v, a)),
        }
    }

    fn bind(&mut self, v: VarId, t: Term, trail: &mut Trail) {
        debug_assert!(!matches!(t, Term::Var(w) if w == v), "self-binding");
        self.map.insert(v, t);
        trail.0.push(v);
    }

    /// Unifies two terms in place, extending the substitution. On failure
    /// the caller must roll back with the trail; bindings made before the
    /// failure are recorded there.
    pub(crate) fn unify_terms(
        &mut self,
        a: &Term,
        b: &Term,
        trail: &mut Trail,
        occurs_check: bool,
    ) -> bool {
        let a = self.walk(a).clone();
        let b = self.walk(b).clone();
        match (&a, &b) {
            (Term::Var(x), Term::Var(y)) if x == y => true,
            (Term::Var(x), _) => {
                if occurs_check && self.occurs(*x, &b) {
                    return false;
                }
                self.bind(*x, b, trail);
                true
            }
            (_, Term::Var(y)) => {
                if occurs_check && self.occurs(*y, &a) {
                    return false;
                }
                self.bind(*y, a, trail);
                true
            }
            (Term::App(f, fa), Term::App(g, ga)) => {
                if f != g {
                    return false;
                }
                fa.iter()
                    .zip(ga.iter())
                    .all(|(x, y)| self.unify_terms(x, y, trail, occurs_check))
            }
        }
    }

    /// Unifies the atoms of two complementary literals in place. Fails
    /// without rolling back; use the trail for that. Polarities must
    /// differ, otherwise the literals cannot be complementary.
    pub(crate) fn unify_complementary(
        &mut self,
        a: &Literal,
        b: &Literal,
        trail: &mut Trail,
        occurs_check: bool,
    ) -> bool {
        if a.polarity == b.polarity {
            return false;
        }
        self.unify_terms(&a.left, &b.left, trail, occurs_check)
            && self.unify_terms(&a.right, &b.right, trail, occurs_check)
    }

    /// Structural equality of two literals under the current bindings,
    /// without materializing either side.
    pub fn literals_equal(&self, a: &Literal, b: &Literal) -> bool {
        a.polarity == b.polarity
            && self.terms_equal(&a.left, &b.left)
            && self.terms_equal(&a.right, &b.right)
    }

    pub fn terms_equal(&self, a: &Term, b: &Term) -> bool {
        let a = self.walk(a);
        let b = self.walk(b);
        match (a, b) {
            (Term::Var(x), Term::Var(y)) => x == y,
            (Term::App(f, fa), Term::App(g, ga)) => {
                f == g
                    && fa
                        .iter()
                        .zip(ga.iter())
                        .all(|(x, y)| self.terms_equal(x, y))
            }
            _ => false,
        }
    }
}

/// Most general complementary unifier of two literals on top of an
/// existing substitution.
///
/// Returns the extended substitution when the literals have opposite
/// polarity and their atoms unify; returns `None` otherwise (including
/// when the polarities are equal). The input substitution is untouched.
pub fn unify(a: &Literal, b: &Literal, base: &Subst, occurs_check: bool) -> Option<Subst> {
    let mut s = base.clone();
    let mut trail = Trail::new();
    if s.unify_complementary(a, b, &mut trail, occurs_check) {
        Some(s)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fol::numeral;

    fn x() -> Term {
        Term::var(0)
    }

    #[test]
    fn unify_binds_variable_to_numeral() {
        // ~eq(plus(s(o),o), s(o)) against eq(plus(X,o), X)
        let goal = Literal::neg(Term::plus(numeral(1), Term::o()), numeral(1));
        let head = Literal::pos(Term::plus(x(), Term::o()), x());
        let s = unify(&goal, &head, &Subst::new(), true).expect("unifiable");
        assert_eq!(s.apply(&x()), numeral(1));
    }

    #[test]
    fn unify_rejects_functor_clash() {
        let goal = Literal::neg(Term::mul(numeral(1), numeral(1)), numeral(1));
        let head = Literal::pos(Term::plus(x(), Term::o()), x());
        assert!(unify(&goal, &head, &Subst::new(), true).is_none());
    }

    #[test]
    fn unify_rejects_equal_polarities() {
        let a = Literal::pos(x(), Term::o());
        let b = Literal::pos(x(), Term::o());
        assert!(unify(&a, &b, &Subst::new(), true).is_none());
    }

    #[test]
    fn occurs_check_blocks_cyclic_binding() {
        // ~eq(X, o) against eq(s(X), o)
        let a = Literal::neg(x(), Term::o());
        let b = Literal::pos(Term::s(x()), Term::o());
        assert!(unify(&a, &b, &Subst::new(), true).is_none());
        // With the check off the binding goes through (Prolog-style).
        assert!(unify(&a, &b, &Subst::new(), false).is_some());
    }

    #[test]
    fn apply_resolves_chains_and_is_idempotent() {
        let mut s = Subst::new();
        let mut trail = Trail::new();
        // X -> Y, then Y -> o
        assert!(s.unify_terms(&Term::var(0), &Term::var(1), &mut trail, true));
        assert!(s.unify_terms(&Term::var(1), &Term::o(), &mut trail, true));
        let t = Term::plus(Term::var(0), Term::var(1));
        let once = s.apply(&t);
        assert_eq!(once, Term::plus(Term::o(), Term::o()));
        assert_eq!(s.apply(&once), once);
        let norm = s.normalized();
        assert_eq!(norm[&0], Term::o());
        assert_eq!(norm[&1], Term::o());
    }

    #[test]
    fn trail_rolls_back_speculative_bindings() {
        let mut s = Subst::new();
        let mut trail = Trail::new();
        let mark = trail.len();
        assert!(s.unify_terms(&Term::var(0), &numeral(2), &mut trail, true));
        assert_eq!(s.len(), 1);
        trail.undo_to(&mut s, mark);
        assert!(s.is_empty());
    }

    #[test]
    fn apply_on_empty_subst_is_identity() {
        let s = Subst::new();
        let t = Term::plus(x(), numeral(2));
        assert_eq!(s.apply(&t), t);
    }
}
