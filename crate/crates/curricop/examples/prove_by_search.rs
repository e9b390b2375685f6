//! Proves statements with iterative deepening search and prints the
//! shortest proof found for each, with timing.
//!
//!     cargo run --release --example prove_by_search
//!
//! Expected lengths: 4 for 1+1=2 and 8 for 1*1=1 (both certified
//! minimal by the exact search phase), and 18 for (1*1)*1=1. The true
//! minimum for the third is 17, but beyond the exact phase the search
//! caps each answer table, and the capped pass lands one step over.
//! The third problem takes tens of seconds in release mode.

use std::rc::Rc;
use std::time::Instant;

use curricop::arith::{make_problem, Expr, Statement};
use curricop::tableau::{iterative_deepening, replay};

fn main() {
    let one = || Expr::num(1);
    let statements = vec![
        Statement::new(Expr::plus(one(), one()), Expr::num(2)),
        Statement::new(Expr::mul(one(), one()), one()),
        Statement::new(Expr::mul(Expr::mul(one(), one()), one()), one()),
    ];
    for stmt in statements {
        let problem = Rc::new(make_problem(&stmt));
        let t0 = Instant::now();
        match iterative_deepening(&problem, 30, 50_000_000) {
            Ok(Some(proof)) => {
                let ok = replay(&problem, &proof).closed;
                println!(
                    "{:<16} length {:>2}  replay {}  {:.2?}",
                    stmt.text(),
                    proof.length(),
                    if ok { "ok" } else { "FAILED" },
                    t0.elapsed()
                );
                let rendered: Vec<String> = proof
                    .actions
                    .iter()
                    .map(|a| format!("{}.{}", a.clause_id, a.literal_idx))
                    .collect();
                println!("  actions: {}", rendered.join(" "));
            }
            Ok(None) => println!("{:<16} no proof within depth", stmt.text()),
            Err(e) => println!("{:<16} {}", stmt.text(), e),
        }
    }
}
