//! A connection tableau prover for Robinson arithmetic packaged as an
//! episodic reinforcement-learning environment, together with a proof
//! curriculum trainer, a clipped-surrogate policy learner over hashed
//! term features, dataset generators and an evaluation harness.
//!
//! Start at [`arith::make_problem`] to build a problem, [`tableau`] for
//! the proof calculus, [`env`] for the episodic interface, and
//! [`trainer::train`] for the curriculum learning loop. The `examples/`
//! directory demonstrates each capability end to end.

pub mod arith;
pub mod cli;
pub mod config;
pub mod env;
pub mod evalrun;
pub mod features;
pub mod fol;
pub mod learner;
pub mod store;
pub mod tableau;
pub mod trainer;
