//! The proof store: the best (shortest) known closing action sequence
//! per problem.
//!
//! Updates are replay-validated, so everything inside the store closes
//! its tableau, and replacement is strictly-shorter-only, so stored
//! lengths never increase. On disk the store is a tab-separated text
//! file, one proof per line:
//!
//! ```text
//! problem_id<TAB>length<TAB>clause.literal clause.literal ...
//! ```
//!
//! Saves go through a temp file and rename, so a crash never leaves a
//! half-written store behind.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::rc::Rc;

use thiserror::Error;

use crate::fol::ProblemSpec;
use crate::tableau::{replay, Action, Proof};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("proof for {problem_id} does not replay to a closed tableau")]
    InvalidProof { problem_id: String },
    #[error("{path} line {line}: {reason}")]
    Parse {
        path: String,
        line: usize,
        reason: String,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Outcome of offering a proof to the store.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StoreUpdate {
    /// No proof was known for this problem before.
    NewlyProven,
    /// Strictly shorter than the incumbent, which it replaced.
    Shortened { from: usize },
    /// Not shorter than the incumbent; the store is unchanged.
    Kept,
}

#[derive(Clone, Debug, Default)]
pub struct ProofStore {
    proofs: BTreeMap<String, Proof>,
}

impl ProofStore {
    pub fn new() -> ProofStore {
        ProofStore::default()
    }

    pub fn len(&self) -> usize {
        self.proofs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.proofs.is_empty()
    }

    pub fn get(&self, problem_id: &str) -> Option<&Proof> {
        self.proofs.get(problem_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Proof)> {
        self.proofs.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Offers a proof. It must replay to a closed tableau on `problem`;
    /// trailing actions past the closing step are trimmed before
    /// storing. Replaces the incumbent only when strictly shorter.
    pub fn update(
        &mut self,
        problem: &Rc<ProblemSpec>,
        proof: Proof,
    ) -> Result<StoreUpdate, StoreError> {
        let report = replay(problem, &proof);
        if !report.closed {
            return Err(StoreError::InvalidProof {
                problem_id: problem.id.clone(),
            });
        }
        let mut proof = proof;
        proof.actions.truncate(report.final_length);
        proof.problem_id = problem.id.clone();

        match self.proofs.entry(problem.id.clone()) {
            Entry::Vacant(e) => {
                e.insert(proof);
                Ok(StoreUpdate::NewlyProven)
            }
            Entry::Occupied(mut e) => {
                let incumbent = e.get().length();
                if proof.length() < incumbent {
                    e.insert(proof);
                    Ok(StoreUpdate::Shortened { from: incumbent })
                } else {
                    Ok(StoreUpdate::Kept)
                }
            }
        }
    }

    /// Serializes to the tab-separated text form, problems in id order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (id, proof) in &self.proofs {
            let actions: Vec<String> = proof
                .actions
                .iter()
                .map(|a| format!("{}.{}", a.clause_id, a.literal_idx))
                .collect();
            out.push_str(id);
            out.push('\t');
            out.push_str(&proof.length().to_string());
            out.push('\t');
            out.push_str(&actions.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str, path: &str) -> Result<ProofStore, StoreError> {
        let mut store = ProofStore::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |reason: &str| StoreError::Parse {
                path: path.to_string(),
                line,
                reason: reason.to_string(),
            };
            if raw.trim().is_empty() {
                continue;
            }
            let mut fields = raw.split('\t');
            let id = fields.next().filter(|s| !s.is_empty()).ok_or_else(|| err("missing problem id"))?;
            let len: usize = fields
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| err("missing or non-numeric length"))?;
            let actions_field = fields.next().ok_or_else(|| err("missing action list"))?;
            if fields.next().is_some() {
                return Err(err("too many fields"));
            }
            let mut actions = Vec::with_capacity(len);
            for tok in actions_field.split_whitespace() {
                let (c, l) = tok
                    .split_once('.')
                    .ok_or_else(|| err(&format!("bad action token {tok}")))?;
                let action = c
                    .parse()
                    .ok()
                    .zip(l.parse().ok())
                    .map(|(c, l)| Action::new(c, l))
                    .ok_or_else(|| err(&format!("bad action token {tok}")))?;
                actions.push(action);
            }
            if actions.len() != len {
                return Err(err(&format!(
                    "declared length {len} but {} actions",
                    actions.len()
                )));
            }
            if store
                .proofs
                .insert(
                    id.to_string(),
                    Proof {
                        problem_id: id.to_string(),
                        actions,
                    },
                )
                .is_some()
            {
                return Err(err(&format!("duplicate problem id {id}")));
            }
        }
        Ok(store)
    }

    /// Atomic save: write a temp file next to `path`, then rename.
    pub fn save(&self, path: &Path) -> Result<(), StoreError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let tmp = path.with_extension("tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(self.to_text().as_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    /// Loads a store file. Replay validity of loaded proofs is checked
    /// lazily at first use (`update` and environment resets both
    /// validate); parsing only checks the format.
    pub fn load(path: &Path) -> Result<ProofStore, StoreError> {
        ProofStore::parse(&fs::read_to_string(path)?, &path.display().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{make_problem, Expr, Statement};

    fn one_plus_one() -> Rc<ProblemSpec> {
        Rc::new(make_problem(&Statement::new(
            Expr::plus(Expr::num(1), Expr::num(1)),
            Expr::num(2),
        )))
    }

    fn short_proof(p: &ProblemSpec) -> Proof {
        Proof {
            problem_id: p.id.clone(),
            actions: vec![
                Action::new(8, 2),
                Action::new(3, 0),
                Action::new(9, 1),
                Action::new(2, 0),
            ],
        }
    }

    /// A valid but longer proof: symmetry first, then prove the flipped
    /// statement with symmetry again before the usual four steps.
    fn long_proof(p: &ProblemSpec) -> Proof {
        Proof {
            problem_id: p.id.clone(),
            actions: vec![
                Action::new(7, 1),
                Action::new(7, 1),
                Action::new(8, 2),
                Action::new(3, 0),
                Action::new(9, 1),
                Action::new(2, 0),
            ],
        }
    }

    #[test]
    fn absent_then_shorter_then_tie() {
        let p = one_plus_one();
        let mut store = ProofStore::new();
        assert_eq!(
            store.update(&p, long_proof(&p)).unwrap(),
            StoreUpdate::NewlyProven
        );
        assert_eq!(store.get(&p.id).unwrap().length(), 6);

        assert_eq!(
            store.update(&p, short_proof(&p)).unwrap(),
            StoreUpdate::Shortened { from: 6 }
        );
        assert_eq!(store.get(&p.id).unwrap().length(), 4);

        // Same length again: the incumbent stays.
        assert_eq!(store.update(&p, short_proof(&p)).unwrap(), StoreUpdate::Kept);
        // Longer again: also kept.
        assert_eq!(store.update(&p, long_proof(&p)).unwrap(), StoreUpdate::Kept);
        assert_eq!(store.len(), 1);
    }

    #[test]
    fn invalid_proof_is_rejected() {
        let p = one_plus_one();
        let mut store = ProofStore::new();
        let bogus = Proof {
            problem_id: p.id.clone(),
            actions: vec![Action::new(2, 0)],
        };
        let err = store.update(&p, bogus).unwrap_err();
        assert!(matches!(err, StoreError::InvalidProof { .. }), "{err}");
        assert!(store.is_empty());
    }

    #[test]
    fn round_trips_through_text_and_disk() {
        let p = one_plus_one();
        let mut store = ProofStore::new();
        store.update(&p, short_proof(&p)).unwrap();

        let text = store.to_text();
        assert_eq!(text, format!("{}\t4\t8.2 3.0 9.1 2.0\n", p.id));
        let reparsed = ProofStore::parse(&text, "mem").unwrap();
        assert_eq!(reparsed.to_text(), text);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("proofs.tsv");
        store.save(&path).unwrap();
        let loaded = ProofStore::load(&path).unwrap();
        assert_eq!(loaded.to_text(), text);
        assert_eq!(loaded.get(&p.id).unwrap(), store.get(&p.id).unwrap());
    }

    #[test]
    fn malformed_lines_are_reported_with_position() {
        for (text, wants) in [
            ("just_an_id\n", "missing or non-numeric length"),
            ("id\ttwo\t0.0\n", "missing or non-numeric length"),
            ("id\t1\t0.0\textra\n", "too many fields"),
            ("id\t2\t0.0\n", "declared length 2 but 1 actions"),
            ("id\t1\tnodot\n", "bad action token nodot"),
            ("id\t1\t0.0\nid\t1\t0.0\n", "duplicate problem id id"),
        ] {
            let err = ProofStore::parse(text, "mem").unwrap_err();
            match err {
                StoreError::Parse { reason, .. } => {
                    assert!(reason.contains(wants), "{reason} vs {wants}")
                }
                other => panic!("unexpected {other}"),
            }
        }
    }

    #[test]
    fn trailing_actions_after_closure_are_trimmed() {
        let p = one_plus_one();
        let mut padded = short_proof(&p);
        padded.actions.push(Action::new(6, 0));
        let mut store = ProofStore::new();
        store.update(&p, padded).unwrap();
        assert_eq!(store.get(&p.id).unwrap().length(), 4);
    }
}
