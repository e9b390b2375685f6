//! Robinson arithmetic as a clause set, plus the staged dataset
//! generators for equational statements over unary numerals.
//!
//! The axiomatization has six arithmetic clauses and six equality
//! clauses (reflexivity, symmetry, transitivity and one congruence per
//! function symbol). Generated problems append a single negated
//! conjecture `~eq(lhs, rhs)` to the axioms, so clause indices of the
//! axioms are stable across problems; that stability is what makes
//! learned action preferences transfer between problems.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fol::{numeral, Clause, Literal, ProblemMeta, ProblemSpec, Role, Term, VarId};

/// Which form of the "zero is no successor" axiom to emit.
///
/// The standard form is `~eq(o, s(X))`. The literal table form
/// `~eq(o, X)` (kept only for comparison with an older presentation)
/// asserts that zero differs from everything including itself, which
/// together with reflexivity makes every problem trivially provable.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ZeroSuccessorForm {
    #[default]
    Standard,
    LiteralTableForm,
}

struct ClauseBuilder {
    names: Vec<String>,
}

impl ClauseBuilder {
    fn var(&mut self, name: &str) -> Term {
        let id = self.names.len() as VarId;
        self.names.push(name.to_string());
        Term::Var(id)
    }
}

/// The twelve axiom clauses with their variable name table, in the fixed
/// order relied on by action indices: zeroSuccessor, diffSuccessor,
/// addZero, addSuccessor, mulZero, mulSuccessor, reflexivity, symmetry,
/// transitivity, congruenceS, congruencePlus, congruenceMul.
pub fn axioms_with(form: ZeroSuccessorForm) -> (Vec<Clause>, Vec<String>) {
    let mut b = ClauseBuilder { names: Vec::new() };
    let mut clauses = Vec::with_capacity(12);

    {
        let x = b.var("X");
        let rhs = match form {
            ZeroSuccessorForm::Standard => Term::s(x),
            ZeroSuccessorForm::LiteralTableForm => x,
        };
        clauses.push(Clause::new(
            "zeroSuccessor",
            Role::Axiom,
            vec![Literal::neg(Term::o(), rhs)],
        ));
    }
    {
        let (x, y) = (b.var("X"), b.var("Y"));
        clauses.push(Clause::new(
            "diffSuccessor",
            Role::Axiom,
            vec![
                Literal::neg(Term::s(x.clone()), Term::s(y.clone())),
                Literal::pos(x, y),
            ],
        ));
    }
    {
        let x = b.var("X");
        clauses.push(Clause::new(
            "addZero",
            Role::Axiom,
            vec![Literal::pos(Term::plus(x.clone(), Term::o()), x)],
        ));
    }
    {
        let (x, y) = (b.var("X"), b.var("Y"));
        clauses.push(Clause::new(
            "addSuccessor",
            Role::Axiom,
            vec![Literal::pos(
                Term::plus(x.clone(), Term::s(y.clone())),
                Term::s(Term::plus(x, y)),
            )],
        ));
    }
    {
        let x = b.var("X");
        clauses.push(Clause::new(
            "mulZero",
            Role::Axiom,
            vec![Literal::pos(Term::mul(x, Term::o()), Term::o())],
        ));
    }
    {
        let (x, y) = (b.var("X"), b.var("Y"));
        clauses.push(Clause::new(
            "mulSuccessor",
            Role::Axiom,
            vec![Literal::pos(
                Term::mul(x.clone(), Term::s(y.clone())),
                Term::plus(Term::mul(x.clone(), y), x),
            )],
        ));
    }
    {
        let x = b.var("X");
        clauses.push(Clause::new(
            "reflexivity",
            Role::Axiom,
            vec![Literal::pos(x.clone(), x)],
        ));
    }
    {
        let (x, y) = (b.var("X"), b.var("Y"));
        clauses.push(Clause::new(
            "symmetry",
            Role::Axiom,
            vec![Literal::neg(x.clone(), y.clone()), Literal::pos(y, x)],
        ));
    }
    {
        let (x, y, z) = (b.var("X"), b.var("Y"), b.var("Z"));
        clauses.push(Clause::new(
            "transitivity",
            Role::Axiom,
            vec![
                Literal::neg(x.clone(), y.clone()),
                Literal::neg(y, z.clone()),
                Literal::pos(x, z),
            ],
        ));
    }
    {
        let (x, y) = (b.var("X"), b.var("Y"));
        clauses.push(Clause::new(
            "congruenceS",
            Role::Axiom,
            vec![
                Literal::neg(x.clone(), y.clone()),
                Literal::pos(Term::s(x), Term::s(y)),
            ],
        ));
    }
    {
        let (x1, y1, x2, y2) = (b.var("X1"), b.var("Y1"), b.var("X2"), b.var("Y2"));
        clauses.push(Clause::new(
            "congruencePlus",
            Role::Axiom,
            vec![
                Literal::neg(x1.clone(), y1.clone()),
                Literal::neg(x2.clone(), y2.clone()),
                Literal::pos(Term::plus(x1, x2), Term::plus(y1, y2)),
            ],
        ));
    }
    {
        let (x1, y1, x2, y2) = (b.var("X1"), b.var("Y1"), b.var("X2"), b.var("Y2"));
        clauses.push(Clause::new(
            "congruenceMul",
            Role::Axiom,
            vec![
                Literal::neg(x1.clone(), y1.clone()),
                Literal::neg(x2.clone(), y2.clone()),
                Literal::pos(Term::mul(x1, x2), Term::mul(y1, y2)),
            ],
        ));
    }

    (clauses, b.names)
}

/// The twelve axiom clauses in standard form.
pub fn axioms() -> Vec<Clause> {
    axioms_with(ZeroSuccessorForm::Standard).0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Op {
    Plus,
    Mul,
}

/// An arithmetic expression over nonnegative integer literals.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Num(u64),
    Bin(Op, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn num(n: u64) -> Expr {
        Expr::Num(n)
    }

    pub fn plus(l: Expr, r: Expr) -> Expr {
        Expr::Bin(Op::Plus, Box::new(l), Box::new(r))
    }

    pub fn mul(l: Expr, r: Expr) -> Expr {
        Expr::Bin(Op::Mul, Box::new(l), Box::new(r))
    }

    /// All integer literals of the expression, left to right.
    pub fn operands(&self) -> Vec<u64> {
        let mut out = Vec::new();
        self.collect_operands(&mut out);
        out
    }

    fn collect_operands(&self, out: &mut Vec<u64>) {
        match self {
            Expr::Num(n) => out.push(*n),
            Expr::Bin(_, l, r) => {
                l.collect_operands(out);
                r.collect_operands(out);
            }
        }
    }

    pub fn operator_count(&self) -> usize {
        match self {
            Expr::Num(_) => 0,
            Expr::Bin(_, l, r) => 1 + l.operator_count() + r.operator_count(),
        }
    }

    fn render(&self, top: bool, out: &mut String) {
        match self {
            Expr::Num(n) => out.push_str(&n.to_string()),
            Expr::Bin(op, l, r) => {
                if !top {
                    out.push('(');
                }
                l.render(false, out);
                out.push(match op {
                    Op::Plus => '+',
                    Op::Mul => '*',
                });
                r.render(false, out);
                if !top {
                    out.push(')');
                }
            }
        }
    }

    fn id_tokens(&self, out: &mut String) {
        match self {
            Expr::Num(n) => out.push_str(&n.to_string()),
            Expr::Bin(op, l, r) => {
                out.push(match op {
                    Op::Plus => 'a',
                    Op::Mul => 'm',
                });
                out.push('_');
                l.id_tokens(out);
                out.push('_');
                r.id_tokens(out);
            }
        }
    }
}

/// Evaluates an expression to its integer value.
pub fn eval_expr(e: &Expr) -> u64 {
    match e {
        Expr::Num(n) => *n,
        Expr::Bin(Op::Plus, l, r) => eval_expr(l) + eval_expr(r),
        Expr::Bin(Op::Mul, l, r) => eval_expr(l) * eval_expr(r),
    }
}

/// Translates an expression into a term over the arithmetic signature,
/// with integer literals as unary numerals.
pub fn expr_term(e: &Expr) -> Term {
    match e {
        Expr::Num(n) => numeral(*n),
        Expr::Bin(Op::Plus, l, r) => Term::plus(expr_term(l), expr_term(r)),
        Expr::Bin(Op::Mul, l, r) => Term::mul(expr_term(l), expr_term(r)),
    }
}

/// An equational statement `lhs = rhs`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Statement {
    pub lhs: Expr,
    pub rhs: Expr,
}

impl Statement {
    pub fn new(lhs: Expr, rhs: Expr) -> Statement {
        Statement { lhs, rhs }
    }

    pub fn is_true(&self) -> bool {
        eval_expr(&self.lhs) == eval_expr(&self.rhs)
    }

    /// Human-readable rendering, e.g. `((3+4)*2)+6=20`.
    pub fn text(&self) -> String {
        let mut out = String::new();
        self.lhs.render(true, &mut out);
        out.push('=');
        self.rhs.render(true, &mut out);
        out
    }

    /// Deterministic problem id derived from the statement: a prefix walk
    /// with `a`/`m` for the operators, sides separated by `__`.
    pub fn problem_id(&self) -> String {
        let mut out = String::from("eq_");
        self.lhs.id_tokens(&mut out);
        out.push_str("__");
        self.rhs.id_tokens(&mut out);
        out
    }
}

/// Builds the proof problem for a statement: the twelve axioms plus the
/// negated conjecture `~eq(lhs, rhs)` as the start clause.
pub fn make_problem(s: &Statement) -> ProblemSpec {
    let (mut clauses, var_names) = axioms_with(ZeroSuccessorForm::Standard);
    clauses.push(Clause::new(
        "goal",
        Role::NegatedConjecture,
        vec![Literal::neg(expr_term(&s.lhs), expr_term(&s.rhs))],
    ));
    let start_clause = clauses.len() - 1;
    ProblemSpec {
        id: s.problem_id(),
        clauses,
        start_clause,
        metadata: ProblemMeta {
            statement: Some(s.text()),
            stage: None,
            split: None,
        },
        var_names,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitKind {
    Train,
    Eval,
}

impl SplitKind {
    pub fn name(self) -> &'static str {
        match self {
            SplitKind::Train => "train",
            SplitKind::Eval => "eval",
        }
    }
}

/// Which dataset to generate. Sizes are fixed per (stage, split); the
/// seed only affects the sampled stages (2-eval, 3-train, 3-eval).
#[derive(Clone, Copy, Debug)]
pub struct StageSpec {
    pub stage: u8,
    pub split: SplitKind,
    pub seed: u64,
    /// Skip statements whose two sides are textually identical.
    pub exclude_trivial: bool,
}

impl StageSpec {
    pub fn new(stage: u8, split: SplitKind, seed: u64) -> StageSpec {
        StageSpec {
            stage,
            split,
            seed,
            exclude_trivial: false,
        }
    }

    /// The fixed dataset size for this stage and split.
    pub fn size(&self) -> usize {
        match (self.stage, self.split) {
            (1, SplitKind::Train) => 2,
            (1, SplitKind::Eval) => 1800,
            (2, SplitKind::Train) => 3,
            (2, SplitKind::Eval) => 1000,
            (3, SplitKind::Train) => 810,
            (3, SplitKind::Eval) => 1000,
            _ => panic!("stage must be 1, 2 or 3"),
        }
    }
}

/// Safety cap for the rejection samplers; generation is expected to
/// finish several orders of magnitude earlier.
const MAX_DRAWS_PER_STATEMENT: usize = 100_000;

/// Draws one expression with exactly three operators: first the tree
/// shape (uniform over the five shapes), then the operators in pre-order,
/// then the operands left to right.
fn draw_expr(rng: &mut ChaCha8Rng, lo: u64, hi: u64) -> Expr {
    fn op(rng: &mut ChaCha8Rng) -> Op {
        if rng.gen_range(0..2u8) == 0 {
            Op::Plus
        } else {
            Op::Mul
        }
    }
    let shape = rng.gen_range(0..5u8);
    let (o0, o1, o2) = (op(rng), op(rng), op(rng));
    let mut leaf = || Expr::Num(rng.gen_range(lo..hi));
    let (l0, l1, l2, l3) = (leaf(), leaf(), leaf(), leaf());
    let b = |op, l, r| Expr::Bin(op, Box::new(l), Box::new(r));
    match shape {
        0 => b(o0, b(o1, b(o2, l0, l1), l2), l3),
        1 => b(o0, b(o1, l0, b(o2, l1, l2)), l3),
        2 => b(o0, b(o1, l0, l1), b(o2, l2, l3)),
        3 => b(o0, l0, b(o1, b(o2, l1, l2), l3)),
        _ => b(o0, l0, b(o1, l1, b(o2, l2, l3))),
    }
}

/// Generates the statements for a stage and split. All statements are
/// true, pairwise distinct, and reproduced byte for byte by the same
/// spec.
pub fn gen_statements(spec: &StageSpec) -> Vec<Statement> {
    let size = spec.size();
    match (spec.stage, spec.split) {
        (1, SplitKind::Train) => vec![
            Statement::new(Expr::plus(Expr::num(1), Expr::num(1)), Expr::num(2)),
            Statement::new(Expr::mul(Expr::num(1), Expr::num(1)), Expr::num(1)),
        ],
        (1, SplitKind::Eval) => stage1_statements(30),
        (2, SplitKind::Train) => vec![
            Statement::new(Expr::plus(Expr::num(1), Expr::num(1)), Expr::num(2)),
            Statement::new(Expr::mul(Expr::num(1), Expr::num(1)), Expr::num(1)),
            Statement::new(
                Expr::mul(Expr::mul(Expr::num(1), Expr::num(1)), Expr::num(1)),
                Expr::num(1),
            ),
        ],
        (2, SplitKind::Eval) => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let mut seen = HashSet::new();
            let mut out = Vec::with_capacity(size);
            let mut draws = 0;
            while out.len() < size {
                draws += 1;
                assert!(draws < MAX_DRAWS_PER_STATEMENT * size, "sampler stuck");
                let lhs = draw_expr(&mut rng, 0, 10);
                let st = Statement::new(lhs.clone(), Expr::Num(eval_expr(&lhs)));
                if seen.insert(st.text()) {
                    out.push(st);
                }
            }
            out
        }
        (3, split) => {
            let (lo, hi) = match split {
                SplitKind::Train => (0, 2),
                SplitKind::Eval => (2, 10),
            };
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let mut seen = HashSet::new();
            let mut out = Vec::with_capacity(size);
            let mut draws = 0;
            while out.len() < size {
                draws += 1;
                assert!(draws < MAX_DRAWS_PER_STATEMENT * size, "sampler stuck");
                let lhs = draw_expr(&mut rng, lo, hi);
                let rhs = draw_expr(&mut rng, lo, hi);
                if eval_expr(&lhs) != eval_expr(&rhs) {
                    continue;
                }
                let st = Statement::new(lhs, rhs);
                if spec.exclude_trivial && st.lhs == st.rhs {
                    continue;
                }
                if seen.insert(st.text()) {
                    out.push(st);
                }
            }
            out
        }
        _ => panic!("stage must be 1, 2 or 3"),
    }
}

/// All true statements `n1+n2=n3` and `n1*n2=n3` with operands below
/// `bound`, additions first, in row-major operand order.
pub fn stage1_statements(bound: u64) -> Vec<Statement> {
    let mut out = Vec::with_capacity(2 * (bound * bound) as usize);
    for n1 in 0..bound {
        for n2 in 0..bound {
            out.push(Statement::new(
                Expr::plus(Expr::num(n1), Expr::num(n2)),
                Expr::num(n1 + n2),
            ));
        }
    }
    for n1 in 0..bound {
        for n2 in 0..bound {
            out.push(Statement::new(
                Expr::mul(Expr::num(n1), Expr::num(n2)),
                Expr::num(n1 * n2),
            ));
        }
    }
    out
}

/// Generates the full problem set for a stage and split, with stage and
/// split recorded in each problem's metadata.
pub fn gen_stage(spec: &StageSpec) -> Vec<ProblemSpec> {
    gen_statements(spec)
        .iter()
        .map(|st| {
            let mut p = make_problem(st);
            p.metadata.stage = Some(spec.stage);
            p.metadata.split = Some(spec.split.name().to_string());
            p
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fol::{serialize_problem, Polarity};

    #[test]
    fn axiom_table_has_twelve_clauses_in_pinned_order() {
        let clauses = axioms();
        let ids: Vec<&str> = clauses.iter().map(|c| c.id.as_str()).collect();
        assert_eq!(
            ids,
            [
                "zeroSuccessor",
                "diffSuccessor",
                "addZero",
                "addSuccessor",
                "mulZero",
                "mulSuccessor",
                "reflexivity",
                "symmetry",
                "transitivity",
                "congruenceS",
                "congruencePlus",
                "congruenceMul"
            ]
        );
        assert!(clauses.iter().all(|c| c.role == Role::Axiom));
    }

    #[test]
    fn zero_successor_standard_form_mentions_successor() {
        let (clauses, _) = axioms_with(ZeroSuccessorForm::Standard);
        let lit = &clauses[0].literals[0];
        assert_eq!(lit.polarity, Polarity::Negative);
        assert_eq!(lit.left, Term::o());
        assert!(matches!(&lit.right, Term::App(f, _) if f.name() == "s"));

        let (clauses, _) = axioms_with(ZeroSuccessorForm::LiteralTableForm);
        assert!(matches!(&clauses[0].literals[0].right, Term::Var(_)));
    }

    #[test]
    fn eval_expr_examples() {
        // ((3+4)*2)+6 = 20
        let e = Expr::plus(
            Expr::mul(Expr::plus(Expr::num(3), Expr::num(4)), Expr::num(2)),
            Expr::num(6),
        );
        assert_eq!(eval_expr(&e), 20);
        assert_eq!(
            Statement::new(e.clone(), Expr::num(20)).text(),
            "((3+4)*2)+6=20"
        );
        // ((8+5)*8)*5 = 520
        let e = Expr::mul(
            Expr::mul(Expr::plus(Expr::num(8), Expr::num(5)), Expr::num(8)),
            Expr::num(5),
        );
        assert_eq!(eval_expr(&e), 520);
        // 0*7 = 0
        assert_eq!(eval_expr(&Expr::mul(Expr::num(0), Expr::num(7))), 0);
    }

    #[test]
    fn make_problem_appends_goal_clause() {
        let st = Statement::new(Expr::plus(Expr::num(1), Expr::num(1)), Expr::num(2));
        let p = make_problem(&st);
        assert_eq!(p.clauses.len(), 13);
        assert_eq!(p.start_clause, 12);
        assert_eq!(p.id, "eq_a_1_1__2");
        assert_eq!(p.metadata.statement.as_deref(), Some("1+1=2"));
        let goal = &p.clauses[12];
        assert_eq!(goal.role, Role::NegatedConjecture);
        assert_eq!(goal.literals.len(), 1);
        assert_eq!(goal.literals[0].left, Term::plus(numeral(1), numeral(1)));
        assert_eq!(goal.literals[0].right, numeral(2));
    }

    #[test]
    fn stage1_sizes_and_contents() {
        let train = gen_statements(&StageSpec::new(1, SplitKind::Train, 0));
        assert_eq!(train.len(), 2);
        assert_eq!(train[0].text(), "1+1=2");
        assert_eq!(train[1].text(), "1*1=1");

        let eval = gen_statements(&StageSpec::new(1, SplitKind::Eval, 0));
        assert_eq!(eval.len(), 1800);
        assert_eq!(eval[0].text(), "0+0=0");
        assert!(eval.iter().any(|s| s.text() == "29*29=841"));
        assert!(eval.iter().all(Statement::is_true));
        let texts: HashSet<String> = eval.iter().map(Statement::text).collect();
        assert_eq!(texts.len(), 1800);
    }

    #[test]
    fn stage2_sizes_truth_and_shape() {
        let train = gen_statements(&StageSpec::new(2, SplitKind::Train, 0));
        assert_eq!(train.len(), 3);
        assert_eq!(train[2].text(), "(1*1)*1=1");

        let eval = gen_statements(&StageSpec::new(2, SplitKind::Eval, 7));
        assert_eq!(eval.len(), 1000);
        for st in &eval {
            assert!(st.is_true());
            assert_eq!(st.lhs.operator_count(), 3);
            assert_eq!(st.rhs.operator_count(), 0);
            assert!(st.lhs.operands().iter().all(|&n| n < 10));
        }
        let texts: HashSet<String> = eval.iter().map(Statement::text).collect();
        assert_eq!(texts.len(), 1000);
    }

    #[test]
    fn stage3_sizes_truth_and_bounds() {
        let train = gen_statements(&StageSpec::new(3, SplitKind::Train, 7));
        assert_eq!(train.len(), 810);
        for st in &train {
            assert!(st.is_true());
            assert_eq!(st.lhs.operator_count(), 3);
            assert_eq!(st.rhs.operator_count(), 3);
            assert!(st.lhs.operands().iter().all(|&n| n < 2));
            assert!(st.rhs.operands().iter().all(|&n| n < 2));
        }

        let eval = gen_statements(&StageSpec::new(3, SplitKind::Eval, 7));
        assert_eq!(eval.len(), 1000);
        for st in &eval {
            assert!(st.is_true());
            assert!(st
                .lhs
                .operands()
                .iter()
                .chain(st.rhs.operands().iter())
                .all(|&n| (2..10).contains(&n)));
        }
    }

    #[test]
    fn exclude_trivial_drops_identical_sides() {
        let mut spec = StageSpec::new(3, SplitKind::Train, 7);
        spec.exclude_trivial = true;
        let train = gen_statements(&spec);
        assert!(train.iter().all(|st| st.lhs != st.rhs));
    }

    #[test]
    fn generation_is_byte_identical_given_seed() {
        for stage in [2u8, 3] {
            for split in [SplitKind::Train, SplitKind::Eval] {
                let a = gen_stage(&StageSpec::new(stage, split, 42));
                let b = gen_stage(&StageSpec::new(stage, split, 42));
                let render = |ps: &[ProblemSpec]| {
                    ps.iter().map(serialize_problem).collect::<Vec<_>>().join("\n")
                };
                assert_eq!(render(&a), render(&b));
            }
        }
    }

    #[test]
    fn different_seed_changes_sampled_stages() {
        let a = gen_statements(&StageSpec::new(2, SplitKind::Eval, 1));
        let b = gen_statements(&StageSpec::new(2, SplitKind::Eval, 2));
        assert_ne!(
            a.iter().map(Statement::text).collect::<Vec<_>>(),
            b.iter().map(Statement::text).collect::<Vec<_>>()
        );
    }

    #[test]
    fn problem_ids_are_unique_within_a_stage() {
        let problems = gen_stage(&StageSpec::new(3, SplitKind::Train, 7));
        let ids: HashSet<&str> = problems.iter().map(|p| p.id.as_str()).collect();
        assert_eq!(ids.len(), problems.len());
    }
}
