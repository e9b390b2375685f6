//! Hashed term-tree features: fixed-length sparse count vectors for
//! proof states and actions.
//!
//! Every literal or term is walked as a tree and each node contributes
//! one triple `(grandparent, parent, node)`. Missing ancestors are
//! padded with the `TOP` label, and all variables collapse to a single
//! `VAR` class so vectors are stable under renaming apart. The node's
//! own label carries its 1-based argument position (`s@1`) while
//! ancestor slots carry the bare symbol, which makes `eq(a,b)` and
//! `eq(b,a)` featurize differently. A literal's root symbol includes
//! its polarity (`eq` or `~eq`), and in action features the contact
//! literal of the clause is additionally marked with a `*` prefix so
//! the chosen entry point is visible in the vector. For Horn clause
//! sets, where each clause offers at most one contact literal to a
//! negative goal, every offerable action gets its own vector; two
//! contact choices among identically shaped all-variable literals of
//! one clause (the two negative literals of transitivity) do collide,
//! a consequence of the VAR collapse that the engine never exercises
//! on Horn problems.
//!
//! Triples are bucketed by the 64-bit FNV-1a hash of the canonical
//! string `grandparent|parent|node` modulo a power-of-two dimension;
//! collisions add counts. State features concatenate three such blocks:
//! the current goal, the whole frontier (all open goals plus the path
//! of the current goal), and the previous action's clause.

use std::fmt;

use crate::fol::{Literal, Polarity, ProblemSpec, Term};
use crate::tableau::{Action, EngineError, ProofState};

const TOP: &str = "TOP";
const VAR: &str = "VAR";

/// Sizing knobs for the featurizer. `block_dim` is the bucket count of
/// one hashed block and must be a power of two.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FeatureConfig {
    pub block_dim: usize,
}

impl Default for FeatureConfig {
    fn default() -> FeatureConfig {
        FeatureConfig { block_dim: 256 }
    }
}

impl FeatureConfig {
    pub fn new(block_dim: usize) -> FeatureConfig {
        assert!(
            block_dim.is_power_of_two(),
            "block_dim must be a power of two, got {block_dim}"
        );
        FeatureConfig { block_dim }
    }

    /// Dimension of a state vector: goal, frontier and previous-action
    /// blocks side by side.
    pub fn state_dim(&self) -> usize {
        3 * self.block_dim
    }

    pub fn action_dim(&self) -> usize {
        self.block_dim
    }
}

/// One node of a formula tree as seen by the hasher: a symbol plus the
/// node's 1-based position under its parent (0 at a root and in
/// ancestor slots of a triple).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeLabel {
    pub symbol: &'static str,
    pub child_index: usize,
}

impl NodeLabel {
    fn root(symbol: &'static str) -> NodeLabel {
        NodeLabel { symbol, child_index: 0 }
    }

    /// The same symbol with the position stripped, as used when this
    /// node fills the parent or grandparent slot of a triple.
    fn as_ancestor(&self) -> NodeLabel {
        NodeLabel::root(self.symbol)
    }
}

impl fmt::Display for NodeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.child_index == 0 {
            write!(f, "{}", self.symbol)
        } else {
            write!(f, "{}@{}", self.symbol, self.child_index)
        }
    }
}

pub type Triple = (NodeLabel, NodeLabel, NodeLabel);

/// A tree to featurize: either a literal (root labelled with polarity
/// and predicate) or a bare term.
#[derive(Clone, Copy, Debug)]
pub enum FeatureTree<'a> {
    Lit(&'a Literal),
    Term(&'a Term),
}

/// Walks a forest and returns one triple per node, depth first, left to
/// right. The output length always equals the node count of the forest.
pub fn term_triples(forest: &[FeatureTree<'_>]) -> Vec<Triple> {
    let mut out = Vec::new();
    let top = NodeLabel::root(TOP);
    for tree in forest {
        match tree {
            FeatureTree::Lit(lit) => walk_literal(lit, false, &mut out),
            FeatureTree::Term(t) => walk_term(t, top, top, 0, &mut out),
        }
    }
    out
}

fn literal_root_symbol(lit: &Literal, contact: bool) -> &'static str {
    match (contact, lit.polarity) {
        (false, Polarity::Positive) => "eq",
        (false, Polarity::Negative) => "~eq",
        (true, Polarity::Positive) => "*eq",
        (true, Polarity::Negative) => "*~eq",
    }
}

fn walk_literal(lit: &Literal, contact: bool, out: &mut Vec<Triple>) {
    let top = NodeLabel::root(TOP);
    let root = NodeLabel::root(literal_root_symbol(lit, contact));
    out.push((top, top, root));
    walk_term(&lit.left, root, top, 1, out);
    walk_term(&lit.right, root, top, 2, out);
}

fn walk_term(
    t: &Term,
    parent: NodeLabel,
    grandparent: NodeLabel,
    child_index: usize,
    out: &mut Vec<Triple>,
) {
    let label = match t {
        Term::Var(_) => NodeLabel { symbol: VAR, child_index },
        Term::App(f, _) => NodeLabel { symbol: f.name(), child_index },
    };
    out.push((grandparent.as_ancestor(), parent.as_ancestor(), label));
    if let Term::App(_, args) = t {
        for (i, arg) in args.iter().enumerate() {
            walk_term(arg, label, parent, i + 1, out);
        }
    }
}

/// 64-bit FNV-1a over a byte string. Fixed constants, so feature
/// indices are identical across runs and platforms.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Hash of a triple's canonical string `grandparent|parent|node`,
/// computed without materializing the string.
fn triple_hash(t: &Triple) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    let mut feed = |bytes: &[u8]| {
        for &b in bytes {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    let label = |l: &NodeLabel, feed: &mut dyn FnMut(&[u8])| {
        feed(l.symbol.as_bytes());
        if l.child_index > 0 {
            feed(b"@");
            let mut buf = itoa_buf(l.child_index);
            feed(buf.as_bytes_mut());
        }
    };
    label(&t.0, &mut feed);
    feed(b"|");
    label(&t.1, &mut feed);
    feed(b"|");
    label(&t.2, &mut feed);
    h
}

/// Tiny stack formatter for small nonnegative integers.
struct Digits {
    buf: [u8; 20],
    len: usize,
}

impl Digits {
    fn as_bytes_mut(&mut self) -> &[u8] {
        &self.buf[self.buf.len() - self.len..]
    }
}

fn itoa_buf(mut n: usize) -> Digits {
    let mut d = Digits { buf: [0; 20], len: 0 };
    if n == 0 {
        d.buf[19] = b'0';
        d.len = 1;
        return d;
    }
    let mut i = 20;
    while n > 0 {
        i -= 1;
        d.buf[i] = b'0' + (n % 10) as u8;
        n /= 10;
    }
    d.len = 20 - i;
    d
}

/// A fixed-length nonnegative count vector stored sparsely. Indices are
/// kept sorted so iteration and the text rendering are deterministic.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SparseVec {
    dim: usize,
    entries: Vec<(u32, u32)>,
}

impl SparseVec {
    pub fn zeros(dim: usize) -> SparseVec {
        SparseVec { dim, entries: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Adds `count` at `index`. Panics on an out-of-range index; adding
    /// zero is a no-op so entries stay strictly positive.
    pub fn bump(&mut self, index: usize, count: u32) {
        assert!(index < self.dim, "index {index} out of range for dim {}", self.dim);
        if count == 0 {
            return;
        }
        let idx = index as u32;
        match self.entries.binary_search_by_key(&idx, |e| e.0) {
            Ok(i) => self.entries[i].1 += count,
            Err(i) => self.entries.insert(i, (idx, count)),
        }
    }

    pub fn get(&self, index: usize) -> u32 {
        self.entries
            .binary_search_by_key(&(index as u32), |e| e.0)
            .map(|i| self.entries[i].1)
            .unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.entries.iter().map(|&(i, c)| (i as usize, c))
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Sum of all counts.
    pub fn total(&self) -> u64 {
        self.entries.iter().map(|&(_, c)| u64::from(c)).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    /// The slice of entries whose indices fall in `[lo, hi)`, reindexed
    /// to start at zero. Used by tests to inspect single blocks.
    pub fn slice(&self, lo: usize, hi: usize) -> SparseVec {
        assert!(lo <= hi && hi <= self.dim);
        let mut out = SparseVec::zeros(hi - lo);
        for (i, c) in self.iter() {
            if i >= lo && i < hi {
                out.bump(i - lo, c);
            }
        }
        out
    }
}

/// Renders as space-separated `index:count` pairs in index order; the
/// empty vector renders as an empty string.
impl fmt::Display for SparseVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (n, (i, c)) in self.iter().enumerate() {
            if n > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{i}:{c}")?;
        }
        Ok(())
    }
}

/// Buckets a triple multiset into a count vector of the given
/// power-of-two dimension. Colliding triples add.
pub fn hash_features(triples: &[Triple], dim: usize) -> SparseVec {
    assert!(dim.is_power_of_two(), "dim must be a power of two, got {dim}");
    let mut v = SparseVec::zeros(dim);
    for t in triples {
        v.bump((triple_hash(t) & (dim as u64 - 1)) as usize, 1);
    }
    v
}

fn check_action(p: &ProblemSpec, a: Action) -> Result<(), EngineError> {
    let valid = p
        .clauses
        .get(a.clause_id)
        .is_some_and(|c| a.literal_idx < c.literals.len());
    if valid {
        Ok(())
    } else {
        Err(EngineError::InvalidAction {
            clause_id: a.clause_id,
            literal_idx: a.literal_idx,
        })
    }
}

/// Triples of an action's whole clause with the contact literal marked.
fn action_triples(p: &ProblemSpec, a: Action) -> Result<Vec<Triple>, EngineError> {
    check_action(p, a)?;
    let clause = &p.clauses[a.clause_id];
    let mut out = Vec::new();
    for (i, lit) in clause.literals.iter().enumerate() {
        walk_literal(lit, i == a.literal_idx, &mut out);
    }
    Ok(out)
}

/// Features of an extension action: the hashed triples of its clause,
/// contact literal marked. Depends only on the fixed clause set, so the
/// result is cacheable per (clause, literal) pair.
pub fn action_features(
    p: &ProblemSpec,
    a: Action,
    cfg: &FeatureConfig,
) -> Result<SparseVec, EngineError> {
    Ok(hash_features(&action_triples(p, a)?, cfg.block_dim))
}

/// Features of a proof state: three blocks of `block_dim` buckets each.
///
/// Block 0 holds the current goal literal, block 1 the whole frontier
/// (every open goal plus the ancestor path of the current goal), block
/// 2 the clause of the previous action (zero when there is none, as at
/// episode start). All literals are resolved through the state's global
/// substitution first, so bindings made by earlier steps show up.
pub fn state_features(st: &ProofState, prev: Option<Action>, cfg: &FeatureConfig) -> SparseVec {
    let dim = cfg.block_dim;
    let subst = st.subst();
    let mut out = SparseVec::zeros(3 * dim);

    let add_block = |out: &mut SparseVec, block: usize, triples: &[Triple]| {
        let base = block * dim;
        for t in triples {
            out.bump(base + (triple_hash(t) & (dim as u64 - 1)) as usize, 1);
        }
    };

    if let Some(goal) = st.current_goal() {
        let lit = subst.apply_literal(goal.literal());
        add_block(&mut out, 0, &term_triples(&[FeatureTree::Lit(&lit)]));
    }

    let mut frontier: Vec<Literal> = st
        .open_goals()
        .map(|g| subst.apply_literal(g.literal()))
        .collect();
    if let Some(goal) = st.current_goal() {
        for anc in goal.path_literals() {
            frontier.push(subst.apply_literal(&anc));
        }
    }
    let forest: Vec<FeatureTree<'_>> = frontier.iter().map(FeatureTree::Lit).collect();
    add_block(&mut out, 1, &term_triples(&forest));

    if let Some(a) = prev {
        if let Ok(triples) = action_triples(st.problem(), a) {
            add_block(&mut out, 2, &triples);
        }
    }
    out
}

/// Action features for every (clause, literal) pair of one problem,
/// computed once up front. Owns plain data only, so a built cache can
/// be shared freely across worker threads.
#[derive(Clone, Debug)]
pub struct ActionFeatureCache {
    by_clause: Vec<Vec<SparseVec>>,
}

impl ActionFeatureCache {
    pub fn build(p: &ProblemSpec, cfg: &FeatureConfig) -> ActionFeatureCache {
        let by_clause = p
            .clauses
            .iter()
            .enumerate()
            .map(|(ci, c)| {
                (0..c.literals.len())
                    .map(|li| {
                        action_features(p, Action::new(ci, li), cfg)
                            .expect("enumerated action is valid")
                    })
                    .collect()
            })
            .collect();
        ActionFeatureCache { by_clause }
    }

    pub fn get(&self, a: Action) -> Option<&SparseVec> {
        self.by_clause.get(a.clause_id)?.get(a.literal_idx)
    }
}
