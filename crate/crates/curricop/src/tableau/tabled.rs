//! Shortest-proof search with answer tabling for Horn problems.
//!
//! When every clause has at most one positive literal and the start
//! clause is all negative, the tableau never performs reductions and the
//! search is plain goal-directed resolution: each extension resolves a
//! goal with a clause head and pushes the body as new goals. The number
//! of extensions in a closed tableau equals the node count of its
//! derivation tree, which does not depend on the order goals are worked
//! on, so a shortest proof decomposes per goal: close one goal somehow,
//! then the remaining goals under the resulting bindings.
//!
//! That decomposition is what the table exploits. For every canonical
//! goal (the literal resolved against the current bindings, variables
//! renamed by first occurrence) the table stores the ways it can be
//! closed within a cost bound: the goal's instantiation after closing,
//! the extension count, and a replayable action sequence. A subgoal
//! reached through different contexts is then solved once instead of
//! once per context, turning exponential depth-first deepening into
//! dynamic programming over distinct subgoals. The outer loop raises
//! the cost bound one step at a time, so the first bound that yields a
//! closing combination is the exact shortest proof length.
//!
//! That guarantee has a price: the number of derivable equations below
//! a bound roughly doubles with each step, so exhaustive tables are
//! only viable for short proofs. Past a fixed threshold the driver
//! trades the certificate away and reruns the deepening with each
//! entry capped at the cheapest answers found. Eviction only ever
//! discards the most expensive answers of an entry, which is what makes
//! the cap gentle: the cheap closings a short proof is made of are the
//! last to go. Lengths reported past the threshold are best effort,
//! the shortest proof visible through the capped tables.
//!
//! Two refinements keep the table small. Goals are solved most
//! constrained first (fewest unbound variables), so a goal like
//! `~eq(Y,Z)` is deferred until its siblings have instantiated it;
//! solving it as is would force the table to enumerate every derivable
//! equation. And an answer subsumed by a more general answer of at most
//! the same cost is dropped: any closing combination through the
//! specific answer also goes through the general one, at no extra cost.
//! Neither changes the reported length; both only remove redundant
//! combinations. Actions are reassembled in goal order afterwards, so
//! reported proofs still replay left to right on the engine.

use std::collections::HashMap;
use std::rc::Rc;

use crate::fol::{Literal, Polarity, ProblemSpec, Subst, Term, Trail, VarId};

use super::{Action, Proof, ProofState, SearchError};

/// Largest bound attempted with exhaustive (exact) tables.
const EXACT_PHASE_CAP: usize = 12;

/// Answers kept per entry in the capped phase.
const ANSWER_CAP: usize = 64;

/// A clause usable for extending a (negative) goal: the contact action
/// for its single positive literal and the body literals in clause
/// order.
struct HornClause {
    action: Action,
    head: Literal,
    body: Vec<Literal>,
}

fn horn_clauses(problem: &ProblemSpec) -> Vec<HornClause> {
    let mut out = Vec::new();
    for (ci, clause) in problem.clauses.iter().enumerate() {
        let mut positives = clause
            .literals
            .iter()
            .enumerate()
            .filter(|(_, l)| l.polarity == Polarity::Positive);
        let Some((hi, head)) = positives.next() else {
            // All-negative clauses can never extend a negative goal.
            continue;
        };
        debug_assert!(positives.next().is_none(), "not a Horn clause");
        out.push(HornClause {
            action: Action::new(ci, hi),
            head: head.clone(),
            body: clause
                .literals
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != hi)
                .map(|(_, l)| l.clone())
                .collect(),
        });
    }
    out
}

/// Resolves a literal against the bindings and renames its variables by
/// first occurrence, so literals equal up to renaming and to bindings of
/// untouched variables get the same representation.
fn canonical_literal(lit: &Literal, subst: &Subst) -> Literal {
    fn go(t: &Term, subst: &Subst, map: &mut HashMap<VarId, VarId>) -> Term {
        let t = subst.walk(t);
        match t {
            Term::Var(v) => {
                let next = map.len() as VarId;
                Term::Var(*map.entry(*v).or_insert(next))
            }
            Term::App(f, args) => {
                if t.is_ground() {
                    t.clone()
                } else {
                    Term::App(*f, args.iter().map(|a| go(a, subst, map)).collect())
                }
            }
        }
    }
    let mut map = HashMap::new();
    Literal {
        polarity: lit.polarity,
        left: go(&lit.left, subst, &mut map),
        right: go(&lit.right, subst, &mut map),
    }
}

fn rename_apart(lit: &Literal, next_var: &mut VarId) -> Literal {
    let mut map = HashMap::new();
    ProofState::rename_literal(lit, &mut map, next_var)
}

/// Matching: true iff there is a substitution of `general`'s variables
/// that makes it syntactically equal to `specific` (whose variables act
/// as constants).
fn subsumes(general: &Literal, specific: &Literal) -> bool {
    fn match_term(g: &Term, s: &Term, map: &mut HashMap<VarId, Term>) -> bool {
        match (g, s) {
            (Term::Var(v), _) => match map.get(v) {
                Some(bound) => bound == s,
                None => {
                    map.insert(*v, s.clone());
                    true
                }
            },
            (Term::App(f, fa), Term::App(g2, ga)) => {
                f == g2 && fa.iter().zip(ga.iter()).all(|(x, y)| match_term(x, y, map))
            }
            (Term::App(..), Term::Var(_)) => false,
        }
    }
    let mut map = HashMap::new();
    general.polarity == specific.polarity
        && match_term(&general.left, &specific.left, &mut map)
        && match_term(&general.right, &specific.right, &mut map)
}

/// Variable-renaming canonical form of a clause body, shared map across
/// literals, for matching clauses up to renaming.
fn canonical_clause(lits: &[Literal]) -> Vec<Literal> {
    fn go(t: &Term, map: &mut HashMap<VarId, VarId>) -> Term {
        match t {
            Term::Var(v) => {
                let next = map.len() as VarId;
                Term::Var(*map.entry(*v).or_insert(next))
            }
            Term::App(f, args) => Term::App(*f, args.iter().map(|a| go(a, map)).collect()),
        }
    }
    let mut map = HashMap::new();
    lits.iter()
        .map(|l| Literal {
            polarity: l.polarity,
            left: go(&l.left, &mut map),
            right: go(&l.right, &mut map),
        })
        .collect()
}

/// True when every clause that could take part in a derivation (those
/// with a positive literal) is one of the standard arithmetic axioms up
/// to variable renaming. All of those hold in the standard model, which
/// licenses pruning ground goals whose sides have different values.
fn has_standard_axioms(problem: &ProblemSpec) -> bool {
    let std_axioms = crate::arith::axioms();
    let std_forms: Vec<Vec<Literal>> = std_axioms
        .iter()
        .filter(|c| c.literals.iter().any(|l| l.polarity == Polarity::Positive))
        .map(|c| canonical_clause(&c.literals))
        .collect();
    problem.clauses.iter().enumerate().all(|(i, c)| {
        i == problem.start_clause
            || c.literals.iter().all(|l| l.polarity == Polarity::Negative)
            || std_forms.contains(&canonical_clause(&c.literals))
    })
}

/// Value of a ground term in the standard model; None when a variable
/// occurs.
fn term_value(t: &Term) -> Option<u64> {
    match t {
        Term::Var(_) => None,
        Term::App(f, args) => {
            use crate::fol::Functor;
            match f {
                Functor::O => Some(0),
                Functor::S => term_value(&args[0]).map(|n| n + 1),
                Functor::Plus => Some(term_value(&args[0])? + term_value(&args[1])?),
                Functor::Mul => Some(term_value(&args[0])?.checked_mul(term_value(&args[1])?)?),
            }
        }
    }
}

/// One way of closing a tabled goal: the goal literal as instantiated by
/// the derivation, the derivation's extension count, and its actions in
/// replay order. Shared behind Rc so enumeration passes can hold a
/// snapshot while the entry evolves underneath.
struct TabledAnswer {
    lit: Literal,
    cost: u32,
    /// Symbol count of `lit`, the eviction tie breaker: among answers of
    /// equal cost the syntactically small ones (numerals rather than
    /// unreduced towers) are the ones later joins tend to need.
    size: u32,
    actions: Vec<Action>,
}

fn term_size(t: &Term) -> u32 {
    match t {
        Term::Var(_) => 1,
        Term::App(_, args) => 1 + args.iter().map(term_size).sum::<u32>(),
    }
}

fn literal_size(l: &Literal) -> u32 {
    term_size(&l.left) + term_size(&l.right)
}

struct TableEntry {
    key: Literal,
    /// Largest bound for which the entry has been saturated; -1
    /// initially, i32::MAX when provably empty forever.
    completed: i32,
    answers: Vec<Rc<TabledAnswer>>,
    /// Exact-duplicate lookup; rebuilt when subsumption drops answers.
    by_lit: HashMap<Literal, usize>,
}

struct Tabler {
    horn: Vec<HornClause>,
    /// Heads of unit clauses, for quick "closable in one step" checks.
    unit_heads: Vec<Literal>,
    index: HashMap<Literal, usize>,
    entries: Vec<TableEntry>,
    occurs_check: bool,
    /// True when the axioms are the standard arithmetic table, all valid
    /// in the standard model; then a ground goal equating terms of
    /// different values can never close and is pruned outright.
    semantic_prune: bool,
    /// Most answers an entry may hold; usize::MAX in the exact phase.
    /// Entries at the cap evict their most expensive answer, so pruning
    /// reasoning that depends on absence ("no answer below the bound
    /// means none exists") is only available when the cap is off.
    answer_cap: usize,
    used: usize,
    budget: usize,
}

impl Tabler {
    fn new(
        problem: &Rc<ProblemSpec>,
        budget: usize,
        occurs_check: bool,
        answer_cap: usize,
    ) -> Tabler {
        let horn = horn_clauses(problem);
        Tabler {
            unit_heads: horn
                .iter()
                .filter(|hc| hc.body.is_empty())
                .map(|hc| hc.head.clone())
                .collect(),
            horn,
            index: HashMap::new(),
            entries: Vec::new(),
            occurs_check,
            semantic_prune: has_standard_axioms(problem),
            answer_cap,
            used: 0,
            budget,
        }
    }

    fn exhaustive(&self) -> bool {
        self.answer_cap == usize::MAX
    }

    fn entry_index(&mut self, key: Literal) -> usize {
        if let Some(&i) = self.index.get(&key) {
            return i;
        }
        let i = self.entries.len();
        self.entries.push(TableEntry {
            key: key.clone(),
            completed: -1,
            answers: Vec::new(),
            by_lit: HashMap::new(),
        });
        self.index.insert(key, i);
        i
    }

    /// Adds an answer unless an existing one subsumes it at lower or
    /// equal cost; existing answers subsumed by the new one at higher or
    /// equal cost are dropped in turn. Over the cap the most expensive
    /// answer (largest first by cost, then by symbol count) is evicted,
    /// or the newcomer is rejected when it ranks worst itself.
    /// Enumeration passes hold Rc snapshots, so dropping or replacing
    /// never invalidates them.
    fn record_answer(&mut self, entry: usize, lit: Literal, cost: u32, actions: Vec<Action>) {
        let e = &mut self.entries[entry];
        // Exact repeats are by far the most common case; handle them
        // without a subsumption scan.
        if let Some(&i) = e.by_lit.get(&lit) {
            if cost < e.answers[i].cost {
                let size = e.answers[i].size;
                e.answers[i] = Rc::new(TabledAnswer { lit, cost, size, actions });
            }
            return;
        }
        for a in &e.answers {
            if a.cost <= cost && subsumes(&a.lit, &lit) {
                return;
            }
        }
        let before = e.answers.len();
        e.answers
            .retain(|a| !(cost <= a.cost && subsumes(&lit, &a.lit)));
        if e.answers.len() != before {
            e.by_lit = e
                .answers
                .iter()
                .enumerate()
                .map(|(i, a)| (a.lit.clone(), i))
                .collect();
        }
        let size = literal_size(&lit);
        if e.answers.len() >= self.answer_cap {
            let (wi, worst) = e
                .answers
                .iter()
                .enumerate()
                .max_by_key(|(i, a)| (a.cost, a.size, *i))
                .expect("cap is positive");
            if (worst.cost, worst.size) <= (cost, size) {
                return;
            }
            e.by_lit.remove(&worst.lit.clone());
            e.answers.swap_remove(wi);
            if wi < e.answers.len() {
                e.by_lit.insert(e.answers[wi].lit.clone(), wi);
            }
        }
        e.by_lit.insert(lit.clone(), e.answers.len());
        e.answers.push(Rc::new(TabledAnswer { lit, cost, size, actions }));
    }

    /// Admissible cost of closing a goal under the current bindings,
    /// combining two sound sources. The unit scan gives 2 when no unit
    /// clause head matches (an extension spawning at least one subgoal
    /// is then unavoidable), else 1. The table probe reads what is
    /// already known about the goal's entry: the cheapest recorded
    /// answer is a floor on any instance's cost, and in the exact phase
    /// an entry completed without answers has no derivation within the
    /// completed bound at all. Instantiating a goal further can only
    /// raise its true cost, so both bounds stay valid as siblings bind
    /// more variables.
    fn goal_lower_bound(&self, subst: &mut Subst, trail: &mut Trail, goal: &Literal) -> u32 {
        let probe = match self.index.get(&canonical_literal(goal, subst)) {
            None => 1,
            Some(&i) => {
                let e = &self.entries[i];
                match e.answers.iter().map(|a| a.cost).min() {
                    Some(c) => c,
                    None if self.exhaustive() => (e.completed.max(0) as u32).saturating_add(1),
                    // A capped table may have failed to derive a cheap
                    // answer it evicted the ingredients for.
                    None => 1,
                }
            }
        };
        let mut unit_scan = 2;
        let mut next: VarId = u32::MAX / 2;
        for head in &self.unit_heads {
            let fresh = rename_apart(head, &mut next);
            let mark = trail.len();
            let ok = subst.unify_complementary(goal, &fresh, trail, self.occurs_check);
            trail.undo_to(subst, mark);
            if ok {
                unit_scan = 1;
                break;
            }
        }
        probe.max(unit_scan)
    }

    /// Makes the entry's answer set complete (up to subsumption and the
    /// cap) for all costs <= bound.
    fn ensure(&mut self, entry: usize, bound: u32) -> Result<(), SearchError> {
        if self.entries[entry].completed >= bound as i32 {
            return Ok(());
        }
        if bound == 0 {
            self.entries[entry].completed = 0;
            return Ok(());
        }
        if self.semantic_prune {
            let key = &self.entries[entry].key;
            if let (Some(l), Some(r)) = (term_value(&key.left), term_value(&key.right)) {
                if l != r {
                    self.entries[entry].completed = i32::MAX;
                    return Ok(());
                }
            }
        }
        if self.exhaustive() {
            // What is already known may rule the bound out: either the
            // cheapest recorded answer exceeds it, or the entry was
            // previously completed past it without any answers.
            let e = &self.entries[entry];
            let completed = e.completed.max(0) as u32;
            let known_min = e
                .answers
                .iter()
                .filter(|a| a.cost <= completed)
                .map(|a| a.cost)
                .min()
                .unwrap_or_else(|| completed.saturating_add(1));
            if known_min > bound {
                let e = &mut self.entries[entry];
                e.completed = e.completed.max(bound as i32);
                return Ok(());
            }
        }
        let key = self.entries[entry].key.clone();
        for hci in 0..self.horn.len() {
            if self.used >= self.budget {
                return Err(SearchError::BudgetExhausted { budget: self.budget });
            }
            let contact = self.horn[hci].action;
            let mut next: VarId = 0;
            let goal_inst = rename_apart(&key, &mut next);
            let mut map = HashMap::new();
            let head = ProofState::rename_literal(&self.horn[hci].head, &mut map, &mut next);
            let body: Vec<(usize, Literal)> = self.horn[hci]
                .body
                .iter()
                .map(|l| ProofState::rename_literal(l, &mut map, &mut next))
                .enumerate()
                .collect();
            let mut subst = Subst::new();
            let mut trail = Trail::new();
            if !subst.unify_complementary(&goal_inst, &head, &mut trail, self.occurs_check) {
                continue;
            }
            self.used += 1;
            let mut slots = vec![Vec::new(); body.len()];
            self.solve_stack(
                &mut subst,
                &mut trail,
                &mut next,
                &body,
                &mut slots,
                bound - 1,
                &goal_inst,
                entry,
                contact,
                1,
            )?;
        }
        let e = &mut self.entries[entry];
        e.completed = e.completed.max(bound as i32);
        Ok(())
    }

    /// Index into `pending` of the goal to solve next: fewest unbound
    /// variables under the current bindings, ties broken by body
    /// position.
    fn select_goal(&self, subst: &Subst, pending: &[(usize, Literal)]) -> usize {
        fn count_vars(t: &Term, subst: &Subst, seen: &mut Vec<VarId>) {
            let t = subst.walk(t);
            match t {
                Term::Var(v) => {
                    if !seen.contains(v) {
                        seen.push(*v);
                    }
                }
                Term::App(_, args) => {
                    for a in args.iter() {
                        count_vars(a, subst, seen);
                    }
                }
            }
        }
        let mut best = 0;
        let mut best_key = (usize::MAX, usize::MAX);
        for (i, (pos, lit)) in pending.iter().enumerate() {
            let mut seen = Vec::new();
            count_vars(&lit.left, subst, &mut seen);
            count_vars(&lit.right, subst, &mut seen);
            let key = (seen.len(), *pos);
            if key < best_key {
                best_key = key;
                best = i;
            }
        }
        best
    }

    /// Enumerates all ways of closing the pending goals within `budget`
    /// extensions, recording each complete combination as an answer for
    /// `entry`: the instantiated `template` literal, the total cost, and
    /// the contact action followed by per-goal actions in body order.
    #[allow(clippy::too_many_arguments)]
    fn solve_stack(
        &mut self,
        subst: &mut Subst,
        trail: &mut Trail,
        next: &mut VarId,
        pending: &[(usize, Literal)],
        slots: &mut Vec<Vec<Action>>,
        budget: u32,
        template: &Literal,
        entry: usize,
        contact: Action,
        spent: u32,
    ) -> Result<(), SearchError> {
        if pending.is_empty() {
            let lit = canonical_literal(template, subst);
            let mut actions = vec![contact];
            for s in slots.iter() {
                actions.extend_from_slice(s);
            }
            self.record_answer(entry, lit, spent, actions);
            return Ok(());
        }
        let lbs: Vec<u32> = pending
            .iter()
            .map(|(_, lit)| self.goal_lower_bound(subst, trail, lit))
            .collect();
        let lb_total: u32 = lbs.iter().sum();
        if lb_total > budget {
            return Ok(());
        }
        let chosen = self.select_goal(subst, pending);
        let (pos, first) = pending[chosen].clone();
        let rest: Vec<(usize, Literal)> = pending
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != chosen)
            .map(|(_, g)| g.clone())
            .collect();
        let key = canonical_literal(&first, subst);
        let child = self.entry_index(key);
        let child_bound = budget - (lb_total - lbs[chosen]);
        self.ensure(child, child_bound)?;
        let mut order: Vec<Rc<TabledAnswer>> = self.entries[child]
            .answers
            .iter()
            .filter(|a| a.cost <= child_bound)
            .cloned()
            .collect();
        order.sort_by_key(|a| a.cost);
        for a in order {
            let fresh = rename_apart(&a.lit, next);
            let mark = trail.len();
            let ok = subst.unify_terms(&first.left, &fresh.left, trail, self.occurs_check)
                && subst.unify_terms(&first.right, &fresh.right, trail, self.occurs_check);
            if ok {
                slots[pos] = a.actions.clone();
                self.solve_stack(
                    subst,
                    trail,
                    next,
                    &rest,
                    slots,
                    budget - a.cost,
                    template,
                    entry,
                    contact,
                    spent + a.cost,
                )?;
            }
            trail.undo_to(subst, mark);
        }
        Ok(())
    }

    /// Like solve_stack for the start clause's goals, but stops at the
    /// first complete combination: at the first bound where one exists
    /// it is of minimal length among the combinations the table holds
    /// (exactly minimal when the table is exhaustive).
    #[allow(clippy::too_many_arguments)]
    fn solve_root(
        &mut self,
        subst: &mut Subst,
        trail: &mut Trail,
        next: &mut VarId,
        pending: &[(usize, Literal)],
        slots: &mut Vec<Vec<Action>>,
        budget: u32,
        found: &mut Option<Vec<Action>>,
    ) -> Result<(), SearchError> {
        if found.is_some() {
            return Ok(());
        }
        if pending.is_empty() {
            let mut actions = Vec::new();
            for s in slots.iter() {
                actions.extend_from_slice(s);
            }
            *found = Some(actions);
            return Ok(());
        }
        let lbs: Vec<u32> = pending
            .iter()
            .map(|(_, lit)| self.goal_lower_bound(subst, trail, lit))
            .collect();
        let lb_total: u32 = lbs.iter().sum();
        if lb_total > budget {
            return Ok(());
        }
        let chosen = self.select_goal(subst, pending);
        let (pos, first) = pending[chosen].clone();
        let rest: Vec<(usize, Literal)> = pending
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != chosen)
            .map(|(_, g)| g.clone())
            .collect();
        let key = canonical_literal(&first, subst);
        let child = self.entry_index(key);
        let child_bound = budget - (lb_total - lbs[chosen]);
        self.ensure(child, child_bound)?;
        let mut order: Vec<Rc<TabledAnswer>> = self.entries[child]
            .answers
            .iter()
            .filter(|a| a.cost <= child_bound)
            .cloned()
            .collect();
        order.sort_by_key(|a| a.cost);
        for a in order {
            if found.is_some() {
                return Ok(());
            }
            let fresh = rename_apart(&a.lit, next);
            let mark = trail.len();
            let ok = subst.unify_terms(&first.left, &fresh.left, trail, self.occurs_check)
                && subst.unify_terms(&first.right, &fresh.right, trail, self.occurs_check);
            if ok {
                slots[pos] = a.actions.clone();
                self.solve_root(subst, trail, next, &rest, slots, budget - a.cost, found)?;
            }
            trail.undo_to(subst, mark);
        }
        Ok(())
    }

    /// One pass over the start clause's goals at the given bound.
    fn root_pass(
        &mut self,
        problem: &ProblemSpec,
        bound: u32,
        found: &mut Option<Vec<Action>>,
    ) -> Result<(), SearchError> {
        let start = &problem.clauses[problem.start_clause];
        let mut next = problem.first_fresh_var();
        let mut map = HashMap::new();
        let goals: Vec<(usize, Literal)> = start
            .literals
            .iter()
            .map(|l| ProofState::rename_literal(l, &mut map, &mut next))
            .enumerate()
            .collect();
        let mut subst = Subst::new();
        let mut trail = Trail::new();
        let mut slots = vec![Vec::new(); goals.len()];
        self.solve_root(
            &mut subst,
            &mut trail,
            &mut next,
            &goals,
            &mut slots,
            bound,
            found,
        )
    }
}

/// Iterative deepening over proof length backed by the answer table.
/// Same contract as the public search entry point; only valid for Horn
/// problems with an all-negative start clause. Lengths up to the exact
/// phase cap are certified minimal; beyond it the capped tables make
/// the result the shortest proof found rather than a certificate.
pub(super) fn search(
    problem: &Rc<ProblemSpec>,
    max_depth: usize,
    step_budget: usize,
    occurs_check: bool,
) -> Result<Option<Proof>, SearchError> {
    debug_assert!(problem.is_horn_with_negative_start());
    let exact_cap = max_depth.min(EXACT_PHASE_CAP);
    let mut tab = Tabler::new(problem, step_budget, occurs_check, usize::MAX);
    for bound in 1..=exact_cap {
        let mut found = None;
        tab.root_pass(problem, bound as u32, &mut found)?;
        if let Some(actions) = found {
            return Ok(Some(Proof {
                problem_id: problem.id.clone(),
                actions,
            }));
        }
    }
    if max_depth <= exact_cap {
        return Ok(None);
    }
    let remaining = step_budget.saturating_sub(tab.used);
    let mut tab = Tabler::new(problem, remaining, occurs_check, ANSWER_CAP);
    for bound in (exact_cap + 1)..=max_depth {
        let mut found = None;
        tab.root_pass(problem, bound as u32, &mut found)?;
        if let Some(actions) = found {
            return Ok(Some(Proof {
                problem_id: problem.id.clone(),
                actions,
            }));
        }
    }
    Ok(None)
}
