//! Steps the proof environment with a uniformly random policy and
//! prints the full transcript of one episode on 1+1=2, then measures
//! how often random play closes the tableau when started closer to the
//! end of a stored proof. The sharp decay with distance is the reason
//! the curriculum exists at all.
//!
//!     cargo run --example random_rollout

use std::rc::Rc;

use curricop::arith::{make_problem, Expr, Statement};
use curricop::env::{Env, EnvConfig, TerminationCause};
use curricop::fol::LiteralDisplay;
use curricop::tableau::iterative_deepening;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let stmt = Statement::new(Expr::plus(Expr::num(1), Expr::num(1)), Expr::num(2));
    let problem = Rc::new(make_problem(&stmt));
    let proof = iterative_deepening(&problem, 10, 1_000_000)
        .expect("search")
        .expect("1+1=2 is provable");
    println!("stored proof of {}: {} extensions\n", problem.id, proof.length());

    let mut env = Env::new(EnvConfig {
        step_limit: 12,
        ..EnvConfig::train()
    });
    let mut rng = ChaCha8Rng::seed_from_u64(0);

    println!("one random episode, step limit {}:", env.config().step_limit);
    let mut obs = env.reset(&problem, None, 1).expect("reset");
    loop {
        let st = env.state().expect("episode active");
        let goal = st.subst().apply_literal(
            st.current_goal().expect("open state has a goal").literal(),
        );
        let shown = LiteralDisplay {
            literal: &goal,
            names: &problem.var_names,
        };
        let pick = rng.gen_range(0..obs.actions.len());
        let (action, _) = obs.actions[pick];
        println!(
            "  step {:>2}  goal {:<40}  {} offered, took clause {} literal {}",
            obs.steps_taken,
            shown.to_string(),
            obs.actions.len(),
            action.clause_id,
            action.literal_idx
        );
        let out = env.step(pick).expect("step");
        if out.done {
            println!(
                "  ended after {} steps: {} (reward {})",
                out.observation.steps_taken,
                out.cause.expect("done has a cause").name(),
                out.reward
            );
            break;
        }
        obs = out.observation;
    }

    // Restart repeatedly at each curriculum level. Level c replays all
    // but c stored actions, so level 4 on a 4-step proof is the same
    // as starting from scratch.
    println!("\nrandom-play success out of 500 episodes per start:");
    let episodes = 500;
    for level in 1..=proof.length() {
        let mut closed = 0;
        for ep in 0..episodes {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + ep);
            let mut obs = env.reset(&problem, Some(&proof), level).expect("reset");
            loop {
                let pick = rng.gen_range(0..obs.actions.len());
                let out = env.step(pick).expect("step");
                if out.done {
                    if out.cause == Some(TerminationCause::Closed) {
                        closed += 1;
                    }
                    break;
                }
                obs = out.observation;
            }
        }
        println!(
            "  {} steps from the end: {:>3} / {}",
            level, closed, episodes
        );
    }
}
