//! Scratch calibration runs; not part of the deliverable examples.

use std::rc::Rc;
use std::time::Instant;

use curricop::arith::{make_problem, Expr, Statement};
use curricop::env::{Env, EnvConfig, TerminationCause};
use curricop::features::FeatureConfig;
use curricop::fol::{numeral, unify, Literal, Subst, Term};
use curricop::learner::{Learner, LearnerConfig};
use curricop::tableau::{init_state, iterative_deepening, replay};
use curricop::trainer::sample_episode;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn additions(hi: u64) -> Vec<Rc<curricop::fol::ProblemSpec>> {
    let mut out = Vec::new();
    for a in 0..hi {
        for b in 0..hi {
            let s = Statement::new(Expr::plus(Expr::num(a), Expr::num(b)), Expr::num(a + b));
            out.push(Rc::new(make_problem(&s)));
        }
    }
    out
}

fn main() {
    // 1. search on small additions plus 1*1
    let t0 = Instant::now();
    let mut probs = additions(3);
    probs.push(Rc::new(make_problem(&Statement::new(
        Expr::mul(Expr::num(1), Expr::num(1)),
        Expr::num(1),
    ))));
    let mut id_proofs = Vec::new();
    for p in &probs {
        let proof = iterative_deepening(p, 10, 5_000_000).unwrap().unwrap();
        assert!(replay(p, &proof).closed);
        id_proofs.push(proof);
    }
    println!(
        "ID: {} proofs, lengths {:?}, {:?}",
        id_proofs.len(),
        id_proofs.iter().map(|p| p.length()).collect::<Vec<_>>(),
        t0.elapsed()
    );

    // 2. random rollouts
    let mut env = Env::new(EnvConfig {
        step_limit: 30,
        features: FeatureConfig::new(64),
        ..EnvConfig::train()
    });
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut wins = 0usize;
    let n = 3000;
    for ep in 0..n {
        let p = &probs[ep % probs.len()];
        let mut obs = env.reset(p, None, 1).unwrap();
        loop {
            if obs.actions.is_empty() {
                break;
            }
            let pick = rng.gen_range(0..obs.actions.len());
            let out = env.step(pick).unwrap();
            if out.done {
                if out.cause == Some(TerminationCause::Closed) {
                    wins += 1;
                }
                break;
            }
            obs = out.observation;
        }
    }
    println!("random: {wins}/{n} wins, {:?}", t0.elapsed());

    // 3. curriculum restarts at each level
    let t0 = Instant::now();
    let mut wins = 0usize;
    let mut eps = 0usize;
    for (p, proof) in probs.iter().zip(&id_proofs) {
        for level in 1..=proof.length() {
            for e in 0..60 {
                eps += 1;
                let mut rng = ChaCha8Rng::seed_from_u64((level * 1000 + e) as u64);
                let mut obs = env.reset(p, Some(proof), level).unwrap();
                loop {
                    if obs.actions.is_empty() {
                        break;
                    }
                    let pick = rng.gen_range(0..obs.actions.len());
                    let out = env.step(pick).unwrap();
                    if out.done {
                        if out.cause == Some(TerminationCause::Closed) {
                            wins += 1;
                        }
                        break;
                    }
                    obs = out.observation;
                }
            }
        }
    }
    println!("curriculum restarts: {wins}/{eps} wins, {:?}", t0.elapsed());

    // 4. policy-mode episodes with an untrained learner
    let t0 = Instant::now();
    let learner = Learner::new(
        FeatureConfig::new(64),
        LearnerConfig {
            hidden: 8,
            hidden_layers: 1,
            ..LearnerConfig::default()
        },
        0,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut wins = 0usize;
    let n = 600;
    for ep in 0..n {
        let p = &probs[ep % probs.len()];
        let rec = sample_episode(&mut env, &learner, p, None, 1, &mut rng).unwrap();
        if rec.success {
            wins += 1;
        }
    }
    println!("policy: {wins}/{n} wins, {:?}", t0.elapsed());

    // 5. engine symmetry loop, 20000 steps
    let t0 = Instant::now();
    let big = Statement::new(
        Expr::mul(
            Expr::mul(Expr::plus(Expr::num(8), Expr::num(5)), Expr::num(8)),
            Expr::num(5),
        ),
        Expr::num(520),
    );
    let bp = Rc::new(make_problem(&big));
    let mut st = init_state(&bp).unwrap();
    for step in 0..20000usize {
        let actions = st.applicable_actions().unwrap();
        let sym = actions.iter().find(|a| a.clause_id == 7).copied().unwrap();
        st.apply_action(sym).unwrap();
        if (step + 1) % 4000 == 0 {
            println!("  step {}: approx_size {}", step + 1, st.approx_size());
        }
    }
    println!("engine 20000 steps: {:?}", t0.elapsed());
    let t0 = Instant::now();
    drop(st);
    println!("drop: {:?}", t0.elapsed());

    // 6. env symmetry loop, 600 steps
    let t0 = Instant::now();
    let mut env = Env::new(EnvConfig {
        step_limit: 600,
        features: FeatureConfig::new(64),
        ..EnvConfig::train()
    });
    let mut obs = env.reset(&bp, None, 1).unwrap();
    let mut out = None;
    loop {
        let pick = obs
            .actions
            .iter()
            .position(|(a, _)| a.clause_id == 7)
            .unwrap();
        let o = env.step(pick).unwrap();
        if o.done {
            out = Some(o);
            break;
        }
        obs = o.observation;
    }
    let o = out.unwrap();
    println!(
        "env 600 steps: cause {:?}, steps {}, {:?}",
        o.cause,
        o.observation.steps_taken,
        t0.elapsed()
    );

    // 7. unify oracle
    let t0 = Instant::now();
    let mut universe: Vec<Term> = vec![Term::o(), Term::var(0), Term::var(1)];
    let base = universe.clone();
    for t in &base {
        universe.push(Term::s(t.clone()));
    }
    for a in &base {
        for b in &base {
            universe.push(Term::plus(a.clone(), b.clone()));
        }
    }
    let mut ground: Vec<Term> = vec![Term::o()];
    ground.push(Term::s(Term::o()));
    ground.push(Term::plus(Term::o(), Term::o()));
    let d2: Vec<Term> = ground.clone();
    for t in &d2[1..] {
        ground.push(Term::s(t.clone()));
    }
    for a in &d2 {
        for b in &d2 {
            if !(matches!(a, Term::App(f, args) if f.name() == "o" && args.is_empty())
                && matches!(b, Term::App(f, args) if f.name() == "o" && args.is_empty()))
            {
                ground.push(Term::plus(a.clone(), b.clone()));
            }
        }
    }
    println!("universe {} terms, ground {} terms", universe.len(), ground.len());

    fn assign(t: &Term, bind: &[&Term; 2]) -> Term {
        match t {
            Term::Var(v) => bind[*v as usize].clone(),
            Term::App(f, args) => {
                Term::App(*f, args.iter().map(|a| assign(a, bind)).collect())
            }
        }
    }

    let empty = Subst::new();
    let mut pairs = 0usize;
    let mut unifiable = 0usize;
    let mut witnesses = 0usize;
    for l1 in &universe {
        for r1 in &universe {
            let goal = Literal::neg(l1.clone(), r1.clone());
            for l2 in &universe {
                for r2 in &universe {
                    pairs += 1;
                    let head = Literal::pos(l2.clone(), r2.clone());
                    match unify(&goal, &head, &empty, true) {
                        Some(s) => {
                            unifiable += 1;
                            assert_eq!(s.apply(l1), s.apply(l2));
                            assert_eq!(s.apply(r1), s.apply(r2));
                        }
                        None => {
                            for ga in &ground {
                                for gb in &ground {
                                    let bind = [ga, gb];
                                    if assign(l1, &bind) == assign(l2, &bind)
                                        && assign(r1, &bind) == assign(r2, &bind)
                                    {
                                        witnesses += 1;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    println!(
        "oracle: {pairs} pairs, {unifiable} unifiable, {witnesses} missed witnesses, {:?}",
        t0.elapsed()
    );
    let _ = numeral(1);
}
