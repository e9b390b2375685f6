//! Shows how proof states become sparse vectors: the term-tree triples
//! extracted from the goal of 1+1=2, the hashed state blocks, and the
//! feature vector of each applicable action.
//!
//!     cargo run --example inspect_features

use std::rc::Rc;

use curricop::arith::{make_problem, Expr, Statement};
use curricop::features::{
    hash_features, state_features, term_triples, ActionFeatureCache, FeatureConfig, FeatureTree,
};
use curricop::tableau::init_state;

fn main() {
    let stmt = Statement::new(Expr::plus(Expr::num(1), Expr::num(1)), Expr::num(2));
    let problem = Rc::new(make_problem(&stmt));
    let mut st = init_state(&problem).expect("init");
    let goal = st.current_goal().expect("start clause has a literal").literal().clone();

    // One triple per tree node: (grandparent, parent, node). Child
    // positions only annotate the node slot; variables collapse to a
    // single symbol so features generalize across renamings.
    println!("triples of the goal literal:");
    let triples = term_triples(&[FeatureTree::Lit(&goal)]);
    for (gp, p, n) in &triples {
        println!("  ({gp}, {p}, {n})");
    }

    let cfg = FeatureConfig::new(64);
    let hashed = hash_features(&triples, cfg.block_dim);
    println!("\nhashed into one block of {} buckets:", cfg.block_dim);
    for (idx, count) in hashed.iter() {
        println!("  bucket {idx:>3}  count {count}");
    }

    // A state observation is three such blocks side by side: current
    // goal, then all open goals plus the active path, then the clause
    // entered by the previous action.
    let state = state_features(&st, None, &cfg);
    println!(
        "\nstate vector: dim {} = 3 x {}, {} nonzero",
        state.dim(),
        cfg.block_dim,
        state.nnz()
    );
    for block in 0..3 {
        let lo = block * cfg.block_dim;
        let slice = state.slice(lo, lo + cfg.block_dim);
        println!("  block {}: {} nonzero, mass {}", block, slice.nnz(), slice.total());
    }

    // Action vectors hash the contacted clause with its entry literal
    // marked, so the same clause entered through different literals
    // featurizes differently.
    let cache = ActionFeatureCache::build(&problem, &cfg);
    println!("\napplicable actions and their feature vectors:");
    for a in st.applicable_actions().expect("engine") {
        let vec = cache.get(a).expect("offered action is cached");
        println!(
            "  clause {:>2} literal {}  ->  {} nonzero, mass {}",
            a.clause_id,
            a.literal_idx,
            vec.nnz(),
            vec.total()
        );
    }
}
