//! Iterative deepening proof search over the tableau engine.
//!
//! The depth measure is the total number of extension steps, matching
//! proof length, so the search finds a shortest proof when one exists
//! within the depth limit. Each depth level runs a depth-first search
//! with an admissible pruning bound: a state with `g` steps used and `h`
//! open-goal cost exceeding the level bound cannot close in time. For
//! Horn problems with a negative start clause the search additionally
//! memoizes visited goal lists, since there the path plays no role and
//! states with equal resolved goals behave identically.

use std::collections::HashMap;
use std::rc::Rc;

use thiserror::Error;

use crate::fol::{Literal, Polarity, ProblemSpec, Subst, Term, Trail, VarId};

use super::{init_state, Action, EngineError, Proof, ProofState};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SearchError {
    #[error("search budget of {budget} extension steps exhausted")]
    BudgetExhausted { budget: usize },
    #[error("search setup failed: {0}")]
    Setup(#[from] EngineError),
}

/// Hard cap on memo entries per depth level, bounding memory.
const MEMO_CAP: usize = 1 << 22;

enum DfsOutcome {
    Found(Vec<Action>),
    Exhausted,
    OutOfBudget,
}

struct SearchCtx {
    budget: usize,
    applied: usize,
    /// Unit clauses, candidates for closing a goal in one step.
    unit_actions: Vec<Action>,
    /// Clause sizes for move ordering (smaller clauses first).
    clause_sizes: Vec<usize>,
    memo: Option<HashMap<(u64, u64), u32>>,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv_step(h: u64, byte: u8) -> u64 {
    (h ^ u64::from(byte)).wrapping_mul(FNV_PRIME)
}

struct GoalHasher {
    a: u64,
    b: u64,
    var_ids: HashMap<VarId, u32>,
}

impl GoalHasher {
    fn new() -> GoalHasher {
        GoalHasher {
            a: FNV_OFFSET,
            b: FNV_OFFSET ^ 0x9e37_79b9_7f4a_7c15,
            var_ids: HashMap::new(),
        }
    }

    fn byte(&mut self, byte: u8) {
        self.a = fnv_step(self.a, byte);
        self.b = fnv_step(self.b, byte.wrapping_add(0x51));
    }

    fn term(&mut self, t: &Term, subst: &Subst) {
        match subst.walk(t) {
            Term::Var(v) => {
                let next = self.var_ids.len() as u32;
                let id = *self.var_ids.entry(*v).or_insert(next);
                self.byte(0xf0);
                for b in id.to_le_bytes() {
                    self.byte(b);
                }
            }
            Term::App(f, args) => {
                self.byte(*f as u8);
                for a in args.iter() {
                    self.term(a, subst);
                }
            }
        }
    }

    fn literal(&mut self, l: &Literal, subst: &Subst) {
        self.byte(match l.polarity {
            Polarity::Positive => 0xa0,
            Polarity::Negative => 0xa1,
        });
        self.term(&l.left, subst);
        self.term(&l.right, subst);
    }
}

/// Canonical hash of the open goal list with variables renamed by first
/// occurrence, so states differing only in fresh variable names or in
/// bindings of variables absent from the goals collide intentionally.
fn goals_key(st: &ProofState) -> (u64, u64) {
    let mut h = GoalHasher::new();
    for g in st.open_goals() {
        h.byte(0x00);
        h.literal(g.literal(), st.subst());
    }
    (h.a, h.b)
}

/// Admissible cost of the remaining goals: 1 per goal, 2 when no unit
/// clause can close the goal, since the goal then needs an extension
/// that spawns at least one further goal. Only used in the Horn case,
/// where reductions never close goals for free.
fn horn_heuristic(st: &mut ProofState, ctx: &SearchCtx) -> usize {
    let problem = st.problem.clone();
    let mut cost = 0;
    let goals: Vec<Rc<Literal>> = st.open_goals().map(|g| g.literal.clone()).collect();
    let mut trail = Trail::new();
    for lit in goals {
        let mut unit_closable = false;
        for a in &ctx.unit_actions {
            let contact = &problem.clauses[a.clause_id].literals[a.literal_idx];
            if contact.polarity == lit.polarity {
                continue;
            }
            let saved_next = st.next_var;
            let mut map = HashMap::new();
            let fresh = ProofState::rename_literal(contact, &mut map, &mut st.next_var);
            let mark = trail.len();
            let ok = st
                .subst
                .unify_complementary(&lit, &fresh, &mut trail, st.occurs_check);
            trail.undo_to(&mut st.subst, mark);
            st.next_var = saved_next;
            if ok {
                unit_closable = true;
                break;
            }
        }
        cost += if unit_closable { 1 } else { 2 };
    }
    cost
}

fn dfs(st: &mut ProofState, used: usize, bound: usize, ctx: &mut SearchCtx) -> DfsOutcome {
    if st.is_closed() {
        return DfsOutcome::Found(Vec::new());
    }
    let heuristic = if st.skip_reductions {
        horn_heuristic(st, ctx)
    } else {
        st.open_goal_count()
    };
    if used + heuristic > bound {
        return DfsOutcome::Exhausted;
    }
    if let Some(memo) = ctx.memo.as_mut() {
        let remaining = (bound - used) as u32;
        let key = goals_key(st);
        match memo.get_mut(&key) {
            Some(seen) if *seen >= remaining => return DfsOutcome::Exhausted,
            Some(seen) => *seen = remaining,
            None => {
                if memo.len() < MEMO_CAP {
                    memo.insert(key, remaining);
                }
            }
        }
    }
    let mut actions = match st.applicable_actions() {
        Ok(a) => a,
        Err(_) => return DfsOutcome::Exhausted,
    };
    // Prefer small clauses: units close goals outright, short clauses
    // keep the open goal count down.
    actions.sort_by_key(|a| (ctx.clause_sizes[a.clause_id], a.clause_id, a.literal_idx));
    for a in actions {
        if ctx.applied >= ctx.budget {
            return DfsOutcome::OutOfBudget;
        }
        let mut child = st.clone();
        if child.apply_action(a).is_err() {
            continue;
        }
        ctx.applied += 1;
        match dfs(&mut child, used + 1, bound, ctx) {
            DfsOutcome::Found(mut rest) => {
                rest.push(a);
                return DfsOutcome::Found(rest);
            }
            DfsOutcome::Exhausted => {}
            DfsOutcome::OutOfBudget => return DfsOutcome::OutOfBudget,
        }
    }
    DfsOutcome::Exhausted
}

/// Searches for a proof of at most `max_depth` extension steps, spending
/// at most `step_budget` extension steps across all depth levels.
///
/// Returns `Ok(Some(proof))` with a shortest proof, `Ok(None)` when the
/// whole space up to `max_depth` was exhausted without closing, and
/// `Err(BudgetExhausted)` when the verdict is unknown because the step
/// budget ran out first.
///
/// Horn problems with an all-negative start clause run on the answer
/// table backend, which shares work between repeated subgoals; other
/// problems run plain depth-first deepening.
pub fn iterative_deepening(
    problem: &Rc<ProblemSpec>,
    max_depth: usize,
    step_budget: usize,
) -> Result<Option<Proof>, SearchError> {
    let init = init_state(problem)?;
    if init.skip_reductions {
        return super::tabled::search(problem, max_depth, step_budget, init.occurs_check());
    }
    iterative_deepening_plain(init, max_depth, step_budget)
}

/// Depth-first iterative deepening without tabling; the general path,
/// and the reference implementation the tabled backend is checked
/// against in tests.
pub(crate) fn iterative_deepening_plain(
    init: ProofState,
    max_depth: usize,
    step_budget: usize,
) -> Result<Option<Proof>, SearchError> {
    let problem = init.problem().clone();
    let mut ctx = SearchCtx {
        budget: step_budget,
        applied: 0,
        unit_actions: problem
            .clauses
            .iter()
            .enumerate()
            .filter(|(_, c)| c.literals.len() == 1)
            .map(|(ci, _)| Action::new(ci, 0))
            .collect(),
        clause_sizes: problem.clauses.iter().map(|c| c.literals.len()).collect(),
        memo: None,
    };
    let horn = init.skip_reductions;
    for bound in 1..=max_depth {
        ctx.memo = if horn { Some(HashMap::new()) } else { None };
        let mut root = init.clone();
        match dfs(&mut root, 0, bound, &mut ctx) {
            DfsOutcome::Found(mut actions) => {
                actions.reverse();
                return Ok(Some(Proof {
                    problem_id: problem.id.clone(),
                    actions,
                }));
            }
            DfsOutcome::Exhausted => {}
            DfsOutcome::OutOfBudget => {
                return Err(SearchError::BudgetExhausted { budget: step_budget })
            }
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{make_problem, Expr, Statement};
    use crate::tableau::replay;

    fn problem_for(lhs: Expr, rhs: Expr) -> Rc<ProblemSpec> {
        Rc::new(make_problem(&Statement::new(lhs, rhs)))
    }

    #[test]
    fn finds_shortest_proof_of_one_plus_one() {
        let p = problem_for(Expr::plus(Expr::num(1), Expr::num(1)), Expr::num(2));
        let proof = iterative_deepening(&p, 10, 1_000_000)
            .expect("within budget")
            .expect("provable");
        assert_eq!(proof.length(), 4);
        assert!(replay(&p, &proof).closed);
    }

    #[test]
    fn finds_shortest_proof_of_one_times_one() {
        let p = problem_for(Expr::mul(Expr::num(1), Expr::num(1)), Expr::num(1));
        let proof = iterative_deepening(&p, 12, 1_000_000)
            .expect("within budget")
            .expect("provable");
        assert_eq!(proof.length(), 8);
        assert!(replay(&p, &proof).closed);
    }

    #[test]
    fn false_statement_exhausts_depth_without_proof() {
        // o = s(o) is false; Robinson arithmetic refutes nothing here,
        // so every depth level exhausts cleanly.
        let p = problem_for(Expr::num(0), Expr::num(1));
        let result = iterative_deepening(&p, 4, 10_000_000).expect("within budget");
        assert_eq!(result, None);
    }

    #[test]
    fn tiny_budget_reports_exhaustion() {
        let p = problem_for(Expr::mul(Expr::num(1), Expr::num(1)), Expr::num(1));
        let err = iterative_deepening(&p, 12, 3).unwrap_err();
        assert_eq!(err, SearchError::BudgetExhausted { budget: 3 });
    }

    #[test]
    fn no_proof_of_nested_product_within_twelve_extensions() {
        // The exact search phase covers every bound up to twelve, so a
        // None here certifies that the minimum proof length of
        // (1*1)*1 = 1 exceeds twelve extension actions.
        let p = problem_for(
            Expr::mul(Expr::mul(Expr::num(1), Expr::num(1)), Expr::num(1)),
            Expr::num(1),
        );
        let result = iterative_deepening(&p, 12, 50_000_000).expect("within budget");
        assert_eq!(result, None);
    }

    #[test]
    fn seventeen_step_certificate_for_nested_product_replays() {
        // A hand-assembled proof of (1*1)*1 = 1 in seventeen extension
        // actions. Together with the exhaustive None at bound twelve
        // (and offline exhaustion up to sixteen) this pins the true
        // minimum at seventeen.
        let p = problem_for(
            Expr::mul(Expr::mul(Expr::num(1), Expr::num(1)), Expr::num(1)),
            Expr::num(1),
        );
        let actions = [
            (8, 2),
            (5, 0),
            (8, 2),
            (10, 2),
            (4, 0),
            (8, 2),
            (5, 0),
            (8, 2),
            (3, 0),
            (9, 1),
            (8, 2),
            (2, 0),
            (4, 0),
            (8, 2),
            (3, 0),
            (9, 1),
            (2, 0),
        ];
        let proof = Proof {
            problem_id: p.id.clone(),
            actions: actions.iter().map(|&(c, l)| Action::new(c, l)).collect(),
        };
        let report = replay(&p, &proof);
        assert!(report.closed);
        assert_eq!(report.final_length, 17);
    }

    #[test]
    fn tabled_search_agrees_with_plain_search_on_small_problems() {
        let cases = vec![
            (Expr::plus(Expr::num(1), Expr::num(1)), Expr::num(2)),
            (Expr::plus(Expr::num(1), Expr::num(2)), Expr::num(3)),
            (Expr::plus(Expr::num(2), Expr::num(1)), Expr::num(3)),
            (Expr::plus(Expr::num(2), Expr::num(2)), Expr::num(4)),
            (Expr::mul(Expr::num(1), Expr::num(1)), Expr::num(1)),
            (Expr::mul(Expr::num(2), Expr::num(1)), Expr::num(2)),
            (Expr::mul(Expr::num(0), Expr::num(1)), Expr::num(0)),
        ];
        for (lhs, rhs) in cases {
            let p = problem_for(lhs, rhs);
            let tabled = iterative_deepening(&p, 12, 10_000_000)
                .expect("within budget")
                .expect("provable");
            let plain = iterative_deepening_plain(init_state(&p).expect("setup"), 12, 10_000_000)
                .expect("within budget")
                .expect("provable");
            assert_eq!(tabled.length(), plain.length(), "problem {}", p.id);
            assert!(replay(&p, &tabled).closed);
            assert!(replay(&p, &plain).closed);
        }
    }

    #[test]
    fn non_horn_problem_without_memo_still_searches() {
        use crate::fol::parse_problem;
        let p = Rc::new(
            parse_problem(
                "cnf(goal, negated_conjecture, ~eq(o,o)).\n\
                 cnf(c2, axiom, eq(o,o) | eq(s(o),o)).\n\
                 cnf(c3, axiom, ~eq(s(o),o) | eq(s(s(o)),o)).\n\
                 cnf(c4, axiom, ~eq(s(s(o)),o) | ~eq(s(o),o)).\n",
            )
            .expect("valid"),
        );
        let proof = iterative_deepening(&p, 6, 100_000)
            .expect("within budget")
            .expect("provable");
        assert!(replay(&p, &proof).closed);
        assert_eq!(proof.length(), 3);
    }
}
