//! The connection tableau calculus: proof states, extension steps and
//! automatic reduction steps.
//!
//! A proof attempt starts from the negated conjecture: each of its
//! literals becomes an open goal. An extension step unifies the current
//! goal (always the leftmost open goal) with the complement of a contact
//! literal of a freshly renamed clause; the remaining literals of that
//! clause become new goals whose path is the goal's path extended by the
//! goal literal. After every extension, reduction steps close any open
//! goal whose literal unifies with the complement of a literal on its own
//! path; they are applied eagerly, outermost path literal first, until no
//! reduction applies. Variable bindings accumulate in one global
//! substitution and are never undone within an episode, so a wrong
//! binding can only be recovered from by closing the affected branch some
//! other way.
//!
//! The tableau is closed when no open goals remain; the recorded action
//! sequence is then a proof, and proofs always replay from the initial
//! state.
//!
//! For problems where every clause has at most one positive literal and
//! the start clause is all negative (which includes every generated
//! arithmetic problem), every goal is a negative literal, complementary
//! path literals cannot exist, and the engine skips reduction scans
//! entirely.

mod search;
mod tabled;

pub use search::{iterative_deepening, SearchError};

use std::collections::{HashMap, VecDeque};
use std::rc::Rc;

use thiserror::Error;

use crate::fol::{Literal, ProblemSpec, Role, Subst, Term, Trail, VarId};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EngineError {
    #[error("start clause is not a negated_conjecture")]
    MissingStartClause,
    #[error("state is already closed")]
    ClosedState,
    #[error("action ({clause_id},{literal_idx}) is out of bounds")]
    InvalidAction { clause_id: usize, literal_idx: usize },
    #[error("action ({clause_id},{literal_idx}) is not applicable: contact literal does not unify")]
    Inapplicable { clause_id: usize, literal_idx: usize },
}

/// An extension step: contact literal `literal_idx` of clause
/// `clause_id` (an index into the problem's clause list).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Action {
    pub clause_id: usize,
    pub literal_idx: usize,
}

impl Action {
    pub fn new(clause_id: usize, literal_idx: usize) -> Action {
        Action { clause_id, literal_idx }
    }
}

/// A closing action sequence for a problem. Length is the number of
/// extension actions; automatic reductions are not counted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Proof {
    pub problem_id: String,
    pub actions: Vec<Action>,
}

impl Proof {
    pub fn length(&self) -> usize {
        self.actions.len()
    }
}

/// Result of replaying an action sequence against a problem.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReplayReport {
    pub closed: bool,
    /// Index of the first action that failed to apply, if any.
    pub failed_at: Option<usize>,
    /// Number of actions actually applied.
    pub final_length: usize,
}

/// Immutable spine of ancestor literals shared between sibling goals.
#[derive(Debug)]
struct PathNode {
    literal: Rc<Literal>,
    parent: Path,
}

type Path = Option<Rc<PathNode>>;

fn path_literals(path: &Path) -> Vec<Rc<Literal>> {
    let mut out = Vec::new();
    let mut cur = path;
    while let Some(node) = cur {
        out.push(node.literal.clone());
        cur = &node.parent;
    }
    out
}

/// An open branch tip: the literal to be closed and the branch's path.
#[derive(Clone, Debug)]
pub struct Goal {
    literal: Rc<Literal>,
    path: Path,
}

impl Drop for Goal {
    /// Unlinks the path iteratively. The default recursive drop would
    /// overflow the stack on the ancestor chains that episodes tens of
    /// thousands of steps long build up.
    fn drop(&mut self) {
        let mut cur = self.path.take();
        while let Some(node) = cur {
            match Rc::try_unwrap(node) {
                Ok(mut n) => cur = n.parent.take(),
                // Still shared with a sibling goal, whose own drop
                // will continue from here.
                Err(_) => break,
            }
        }
    }
}

impl Goal {
    pub fn literal(&self) -> &Literal {
        &self.literal
    }

    /// Ancestor literals, innermost (most recent) first.
    pub fn path_literals(&self) -> Vec<Rc<Literal>> {
        path_literals(&self.path)
    }

    pub fn depth(&self) -> usize {
        self.path_literals().len()
    }
}

/// A tableau in progress. Cloning is cheap enough for backtracking
/// search: goals and paths share structure through reference counts.
#[derive(Clone, Debug)]
pub struct ProofState {
    problem: Rc<ProblemSpec>,
    open_goals: VecDeque<Goal>,
    subst: Subst,
    steps_taken: usize,
    action_log: Vec<Action>,
    next_var: VarId,
    occurs_check: bool,
    /// True when reductions are provably impossible (Horn clause set with
    /// an all-negative start clause), letting apply skip reduction scans.
    skip_reductions: bool,
}

impl ProofState {
    pub fn problem(&self) -> &Rc<ProblemSpec> {
        &self.problem
    }

    pub fn subst(&self) -> &Subst {
        &self.subst
    }

    pub fn steps_taken(&self) -> usize {
        self.steps_taken
    }

    pub fn action_log(&self) -> &[Action] {
        &self.action_log
    }

    pub fn open_goals(&self) -> impl Iterator<Item = &Goal> {
        self.open_goals.iter()
    }

    pub fn open_goal_count(&self) -> usize {
        self.open_goals.len()
    }

    /// The current goal: the leftmost open goal, next to be worked on.
    pub fn current_goal(&self) -> Option<&Goal> {
        self.open_goals.front()
    }

    pub fn is_closed(&self) -> bool {
        self.open_goals.is_empty()
    }

    pub fn occurs_check(&self) -> bool {
        self.occurs_check
    }

    /// Rough node count of the live proof state, used by tests to check
    /// that memory grows at most linearly with episode length.
    pub fn approx_size(&self) -> usize {
        let mut size = self.action_log.len() + self.subst.len();
        for g in &self.open_goals {
            size += 1 + g.depth();
        }
        size
    }

    /// The proof recorded so far, meaningful once the state is closed.
    pub fn proof(&self) -> Proof {
        Proof {
            problem_id: self.problem.id.clone(),
            actions: self.action_log.clone(),
        }
    }

    fn rename_literal(
        lit: &Literal,
        map: &mut HashMap<VarId, VarId>,
        next_var: &mut VarId,
    ) -> Literal {
        fn rename_term(t: &Term, map: &mut HashMap<VarId, VarId>, next_var: &mut VarId) -> Term {
            match t {
                Term::Var(v) => {
                    let id = *map.entry(*v).or_insert_with(|| {
                        let id = *next_var;
                        *next_var += 1;
                        id
                    });
                    Term::Var(id)
                }
                Term::App(f, args) => {
                    if t.is_ground() {
                        t.clone()
                    } else {
                        Term::App(
                            *f,
                            args.iter().map(|a| rename_term(a, map, next_var)).collect(),
                        )
                    }
                }
            }
        }
        Literal {
            polarity: lit.polarity,
            left: rename_term(&lit.left, map, next_var),
            right: rename_term(&lit.right, map, next_var),
        }
    }

    /// Extension actions applicable to the current goal: every
    /// (clause, literal) pair whose freshly renamed literal unifies with
    /// the complement of the goal, in ascending (clause, literal) order.
    pub fn applicable_actions(&mut self) -> Result<Vec<Action>, EngineError> {
        if self.is_closed() {
            return Err(EngineError::ClosedState);
        }
        let goal_lit = self.open_goals.front().expect("not closed").literal.clone();
        let saved_next = self.next_var;
        let mut trail = Trail::new();
        let mut out = Vec::new();
        let problem = self.problem.clone();
        for (ci, clause) in problem.clauses.iter().enumerate() {
            for (li, lit) in clause.literals.iter().enumerate() {
                if lit.polarity == goal_lit.polarity {
                    continue;
                }
                let mut map = HashMap::new();
                let fresh = Self::rename_literal(lit, &mut map, &mut self.next_var);
                let mark = trail.len();
                if self
                    .subst
                    .unify_complementary(&goal_lit, &fresh, &mut trail, self.occurs_check)
                {
                    out.push(Action::new(ci, li));
                }
                trail.undo_to(&mut self.subst, mark);
                self.next_var = saved_next;
            }
        }
        Ok(out)
    }

    /// Applies one extension step followed by eager reductions. Returns
    /// the number of goals closed by reductions.
    pub fn apply_action(&mut self, a: Action) -> Result<usize, EngineError> {
        if self.is_closed() {
            return Err(EngineError::ClosedState);
        }
        let clause = self
            .problem
            .clauses
            .get(a.clause_id)
            .ok_or(EngineError::InvalidAction {
                clause_id: a.clause_id,
                literal_idx: a.literal_idx,
            })?;
        if a.literal_idx >= clause.literals.len() {
            return Err(EngineError::InvalidAction {
                clause_id: a.clause_id,
                literal_idx: a.literal_idx,
            });
        }
        let saved_next = self.next_var;
        let mut map = HashMap::new();
        let clause = clause.clone();
        let renamed: Vec<Literal> = clause
            .literals
            .iter()
            .map(|l| Self::rename_literal(l, &mut map, &mut self.next_var))
            .collect();

        let goal = self.open_goals.front().expect("not closed").clone();
        let mut trail = Trail::new();
        if !self.subst.unify_complementary(
            &goal.literal,
            &renamed[a.literal_idx],
            &mut trail,
            self.occurs_check,
        ) {
            trail.undo_to(&mut self.subst, 0);
            self.next_var = saved_next;
            return Err(EngineError::Inapplicable {
                clause_id: a.clause_id,
                literal_idx: a.literal_idx,
            });
        }

        self.open_goals.pop_front();
        let child_path: Path = Some(Rc::new(PathNode {
            literal: goal.literal.clone(),
            parent: goal.path.clone(),
        }));
        for (li, lit) in renamed.into_iter().enumerate().rev() {
            if li == a.literal_idx {
                continue;
            }
            self.open_goals.push_front(Goal {
                literal: Rc::new(lit),
                path: child_path.clone(),
            });
        }

        let reductions = if self.skip_reductions {
            0
        } else {
            self.reduce_to_fixpoint()
        };
        self.steps_taken += 1;
        self.action_log.push(a);
        Ok(reductions)
    }

    /// Closes every open goal whose literal unifies with the complement
    /// of a literal on its own path, repeatedly until a full pass closes
    /// nothing. Bindings made by reductions are permanent.
    fn reduce_to_fixpoint(&mut self) -> usize {
        let mut closed = 0;
        let mut trail = Trail::new();
        'restart: loop {
            for i in 0..self.open_goals.len() {
                let goal_lit = self.open_goals[i].literal.clone();
                let path = path_literals(&self.open_goals[i].path);
                // Outermost (closest to the root) path literal first.
                for path_lit in path.iter().rev() {
                    if path_lit.polarity == goal_lit.polarity {
                        continue;
                    }
                    let mark = trail.len();
                    if self.subst.unify_complementary(
                        &goal_lit,
                        path_lit,
                        &mut trail,
                        self.occurs_check,
                    ) {
                        self.open_goals.remove(i);
                        closed += 1;
                        continue 'restart;
                    }
                    trail.undo_to(&mut self.subst, mark);
                }
            }
            return closed;
        }
    }
}

/// Builds the initial state for a problem: one open goal per literal of
/// the start clause, in clause order, with an empty path.
pub fn init_state(problem: &Rc<ProblemSpec>) -> Result<ProofState, EngineError> {
    init_state_with(problem, true)
}

/// As [`init_state`] with an explicit occurs-check setting.
pub fn init_state_with(
    problem: &Rc<ProblemSpec>,
    occurs_check: bool,
) -> Result<ProofState, EngineError> {
    let start = problem
        .clauses
        .get(problem.start_clause)
        .filter(|c| c.role == Role::NegatedConjecture)
        .ok_or(EngineError::MissingStartClause)?;
    let mut next_var = problem.first_fresh_var();
    let mut map = HashMap::new();
    let goals: VecDeque<Goal> = start
        .literals
        .iter()
        .map(|l| Goal {
            literal: Rc::new(ProofState::rename_literal(l, &mut map, &mut next_var)),
            path: None,
        })
        .collect();
    Ok(ProofState {
        skip_reductions: problem.is_horn_with_negative_start(),
        problem: problem.clone(),
        open_goals: goals,
        subst: Subst::new(),
        steps_taken: 0,
        action_log: Vec::new(),
        next_var,
        occurs_check,
    })
}

/// Replays an action sequence. Applying stops at the first failure or as
/// soon as the tableau closes; trailing actions after closure are
/// ignored.
pub fn replay(problem: &Rc<ProblemSpec>, proof: &Proof) -> ReplayReport {
    let mut st = match init_state(problem) {
        Ok(st) => st,
        Err(_) => {
            return ReplayReport {
                closed: false,
                failed_at: Some(0),
                final_length: 0,
            }
        }
    };
    for (i, a) in proof.actions.iter().enumerate() {
        if st.is_closed() {
            break;
        }
        if st.apply_action(*a).is_err() {
            return ReplayReport {
                closed: false,
                failed_at: Some(i),
                final_length: i,
            };
        }
    }
    ReplayReport {
        closed: st.is_closed(),
        failed_at: None,
        final_length: st.steps_taken(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{make_problem, Expr, Statement};
    use crate::fol::{numeral, parse_problem, Polarity};

    fn one_times_one() -> Rc<ProblemSpec> {
        let st = Statement::new(Expr::mul(Expr::num(1), Expr::num(1)), Expr::num(1));
        Rc::new(make_problem(&st))
    }

    #[test]
    fn init_creates_one_goal_per_start_literal() {
        let p = one_times_one();
        let st = init_state(&p).expect("valid problem");
        assert_eq!(st.open_goal_count(), 1);
        let goal = st.current_goal().expect("one goal");
        assert_eq!(goal.literal().polarity, Polarity::Negative);
        assert_eq!(goal.depth(), 0);
        assert!(!st.is_closed());
    }

    #[test]
    fn init_with_two_literal_conjecture_creates_two_goals_in_order() {
        let p = Rc::new(
            parse_problem(
                "cnf(refl, axiom, eq(X,X)).\n\
                 cnf(goal, negated_conjecture, ~eq(o,o) | ~eq(s(o),s(o))).\n",
            )
            .expect("valid"),
        );
        let st = init_state(&p).expect("valid problem");
        assert_eq!(st.open_goal_count(), 2);
        let goals: Vec<_> = st.open_goals().collect();
        assert_eq!(goals[0].literal().left, Term::o());
        assert_eq!(goals[1].literal().left, numeral(1));
    }

    #[test]
    fn init_rejects_missing_start_clause() {
        let mut p = parse_problem(
            "cnf(a, axiom, eq(o,o)).\n\
             cnf(goal, negated_conjecture, ~eq(o,o)).\n",
        )
        .expect("valid");
        p.start_clause = 0; // point at an axiom
        assert_eq!(
            init_state(&Rc::new(p)).unwrap_err(),
            EngineError::MissingStartClause
        );
    }

    #[test]
    fn applicable_actions_at_one_times_one_init() {
        // Goal ~eq(mul(s(o),s(o)), s(o)): only the diffSuccessor head
        // eq(X,Y), the symmetry head eq(Y,X) and the transitivity head
        // eq(X,Z) unify; every other positive literal has a functor
        // clash on one side.
        let p = one_times_one();
        let mut st = init_state(&p).expect("valid problem");
        let actions = st.applicable_actions().expect("open state");
        assert_eq!(
            actions,
            vec![Action::new(1, 1), Action::new(7, 1), Action::new(8, 2)]
        );
    }

    #[test]
    fn applicable_actions_errors_on_closed_state() {
        let p = Rc::new(
            parse_problem(
                "cnf(refl, axiom, eq(X,X)).\n\
                 cnf(goal, negated_conjecture, ~eq(o,o)).\n",
            )
            .expect("valid"),
        );
        let mut st = init_state(&p).expect("valid problem");
        st.apply_action(Action::new(0, 0)).expect("reflexivity closes");
        assert!(st.is_closed());
        assert_eq!(st.applicable_actions().unwrap_err(), EngineError::ClosedState);
    }

    #[test]
    fn transitivity_extension_replaces_goal_with_two_subgoals() {
        let p = one_times_one();
        let mut st = init_state(&p).expect("valid problem");
        let r = st.apply_action(Action::new(8, 2)).expect("transitivity applies");
        assert_eq!(r, 0);
        assert_eq!(st.open_goal_count(), 2);
        let goals: Vec<_> = st.open_goals().collect();
        // ~eq(mul(1,1), Y) and ~eq(Y, 1) with a shared fresh Y.
        assert_eq!(goals[0].literal().polarity, Polarity::Negative);
        let y1 = &goals[0].literal().right;
        let y2 = &goals[1].literal().left;
        assert_eq!(y1, y2);
        assert!(matches!(y1, Term::Var(_)));
        // The Z of transitivity was bound to the conjecture's rhs; goal
        // literals stay unresolved, so read through the substitution.
        assert_eq!(st.subst().apply(&goals[1].literal().right), numeral(1));
        // Both subgoals sit under the extended path.
        assert_eq!(goals[0].depth(), 1);
        assert_eq!(goals[1].depth(), 1);
        assert_eq!(st.steps_taken(), 1);
    }

    #[test]
    fn unit_extension_consumes_goal() {
        // ~eq(plus(s(o),o), s(o)) closes in one addZero step.
        let st_stmt = Statement::new(Expr::plus(Expr::num(1), Expr::num(0)), Expr::num(1));
        let p = Rc::new(make_problem(&st_stmt));
        let mut st = init_state(&p).expect("valid problem");
        st.apply_action(Action::new(2, 0)).expect("addZero applies");
        assert!(st.is_closed());
        assert_eq!(st.proof().actions, vec![Action::new(2, 0)]);
    }

    #[test]
    fn inapplicable_action_leaves_state_unchanged() {
        let p = one_times_one();
        let mut st = init_state(&p).expect("valid problem");
        let before_goals = st.open_goal_count();
        // mulZero's head eq(mul(X,o),o) clashes with the goal.
        let err = st.apply_action(Action::new(4, 0)).unwrap_err();
        assert_eq!(
            err,
            EngineError::Inapplicable { clause_id: 4, literal_idx: 0 }
        );
        assert_eq!(st.open_goal_count(), before_goals);
        assert_eq!(st.steps_taken(), 0);
        assert!(st.subst().is_empty());
        // The failed attempt must not leak fresh variables either.
        let again = st.applicable_actions().expect("open state");
        assert_eq!(
            again,
            vec![Action::new(1, 1), Action::new(7, 1), Action::new(8, 2)]
        );
    }

    #[test]
    fn goal_accounting_holds_for_extensions() {
        let p = one_times_one();
        let mut st = init_state(&p).expect("valid problem");
        let before = st.open_goal_count();
        let m = 3; // transitivity has three literals
        let r = st.apply_action(Action::new(8, 2)).expect("applies");
        assert_eq!(st.open_goal_count(), before - 1 + (m - 1) - r);
    }

    #[test]
    fn reduction_closes_goal_with_complement_on_path() {
        // Non-Horn set driving a positive literal onto the path:
        //   start: ~eq(o,o)
        //   c2: eq(o,o) | eq(s(o),o)
        //   c3: ~eq(s(o),o) | eq(s(s(o)),o)
        //   c4: ~eq(s(s(o)),o) | ~eq(s(o),o)
        // Extending with c2, c3, c4 creates goal ~eq(s(o),o) whose path
        // holds eq(s(o),o); the reduction closes it automatically.
        let p = Rc::new(
            parse_problem(
                "cnf(goal, negated_conjecture, ~eq(o,o)).\n\
                 cnf(c2, axiom, eq(o,o) | eq(s(o),o)).\n\
                 cnf(c3, axiom, ~eq(s(o),o) | eq(s(s(o)),o)).\n\
                 cnf(c4, axiom, ~eq(s(s(o)),o) | ~eq(s(o),o)).\n",
            )
            .expect("valid"),
        );
        let mut st = init_state(&p).expect("valid problem");
        assert_eq!(st.apply_action(Action::new(1, 0)).expect("c2"), 0);
        assert_eq!(st.open_goal_count(), 1); // eq(s(o),o)
        assert_eq!(st.apply_action(Action::new(2, 0)).expect("c3"), 0);
        assert_eq!(st.open_goal_count(), 1); // eq(s(s(o)),o)
        let reductions = st.apply_action(Action::new(3, 0)).expect("c4");
        assert_eq!(reductions, 1);
        assert!(st.is_closed());
        assert_eq!(st.steps_taken(), 3);
    }

    #[test]
    fn replay_reproduces_closed_tableau() {
        let p = one_times_one();
        let mut st = init_state(&p).expect("valid problem");
        // Hand proof: trans, mulSuccessor, trans, addSuccessor, congS,
        // trans, addZero, mulZero.
        for a in [
            Action::new(8, 2),
            Action::new(5, 0),
            Action::new(8, 2),
            Action::new(3, 0),
            Action::new(9, 1),
            Action::new(8, 2),
            Action::new(2, 0),
            Action::new(4, 0),
        ] {
            st.apply_action(a).expect("hand proof step");
        }
        assert!(st.is_closed());
        let proof = st.proof();
        assert_eq!(proof.length(), 8);
        let report = replay(&p, &proof);
        assert_eq!(
            report,
            ReplayReport { closed: true, failed_at: None, final_length: 8 }
        );
    }

    #[test]
    fn replay_reports_first_corrupt_step() {
        let p = one_times_one();
        let proof = Proof {
            problem_id: p.id.clone(),
            actions: vec![Action::new(8, 2), Action::new(4, 0)],
        };
        let report = replay(&p, &proof);
        assert!(!report.closed);
        assert_eq!(report.failed_at, Some(1));
        assert_eq!(report.final_length, 1);
    }

    #[test]
    fn replay_of_empty_action_list_is_not_closed() {
        let p = one_times_one();
        let proof = Proof { problem_id: p.id.clone(), actions: vec![] };
        let report = replay(&p, &proof);
        assert!(!report.closed);
        assert_eq!(report.failed_at, None);
        assert_eq!(report.final_length, 0);
    }
}
