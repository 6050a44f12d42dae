//! Core model: finite transition systems, partition-relation pairs, and
//! dense state relations.

use crate::error::{Error, Result};

pub type State = usize;
pub type BlockId = usize;

/// Finite transition system (Q, ->) with forward and backward adjacency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionSystem {
    num_states: usize,
    arcs: Vec<(State, State)>,
    succ_off: Vec<usize>,
    succ: Vec<State>,
    pred_off: Vec<usize>,
    pred: Vec<State>,
}

impl TransitionSystem {
    /// Builds a system with `num_states` states; arcs are deduplicated.
    pub fn new(num_states: usize, mut arcs: Vec<(State, State)>) -> Result<Self> {
        if num_states == 0 {
            return Err(Error::invalid("num_states must be positive"));
        }
        for &(u, v) in &arcs {
            if u >= num_states || v >= num_states {
                return Err(Error::invalid(format!(
                    "arc ({u}, {v}) out of range for {num_states} states"
                )));
            }
        }
        arcs.sort_unstable();
        arcs.dedup();
        let succ_adj = adjacency(num_states, arcs.iter().copied());
        let pred_adj = adjacency(num_states, arcs.iter().map(|&(u, v)| (v, u)));
        Ok(TransitionSystem {
            num_states,
            arcs,
            succ_off: succ_adj.0,
            succ: succ_adj.1,
            pred_off: pred_adj.0,
            pred: pred_adj.1,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_arcs(&self) -> usize {
        self.arcs.len()
    }

    /// Deduplicated arc list in ascending order.
    pub fn arcs(&self) -> &[(State, State)] {
        &self.arcs
    }

    pub fn successors(&self, q: State) -> &[State] {
        &self.succ[self.succ_off[q]..self.succ_off[q + 1]]
    }

    pub fn predecessors(&self, q: State) -> &[State] {
        &self.pred[self.pred_off[q]..self.pred_off[q + 1]]
    }

    pub fn has_successor(&self, q: State) -> bool {
        self.succ_off[q] < self.succ_off[q + 1]
    }
}

/// Compressed adjacency; rows are sorted because the input pairs are.
fn adjacency(n: usize, pairs: impl Iterator<Item = (State, State)> + Clone) -> (Vec<usize>, Vec<State>) {
    let mut off = vec![0usize; n + 1];
    for (u, _) in pairs.clone() {
        off[u + 1] += 1;
    }
    for i in 0..n {
        off[i + 1] += off[i];
    }
    let mut fill = off.clone();
    let mut target = vec![0 as State; off[n]];
    for (u, v) in pairs {
        target[fill[u]] = v;
        fill[u] += 1;
    }
    (off, target)
}

/// Relation over Q x Q as a dense boolean matrix; (q, q') in the relation
/// means q' is a candidate simulator of q.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateRelation {
    n: usize,
    bits: Vec<bool>,
}

impl StateRelation {
    pub fn empty(n: usize) -> Self {
        StateRelation { n, bits: vec![false; n * n] }
    }

    pub fn full(n: usize) -> Self {
        StateRelation { n, bits: vec![true; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut r = Self::empty(n);
        for q in 0..n {
            r.insert(q, q);
        }
        r
    }

    pub fn from_pairs(n: usize, pairs: impl IntoIterator<Item = (State, State)>) -> Self {
        let mut r = Self::empty(n);
        for (a, b) in pairs {
            r.insert(a, b);
        }
        r
    }

    pub fn num_states(&self) -> usize {
        self.n
    }

    pub fn contains(&self, a: State, b: State) -> bool {
        self.bits[a * self.n + b]
    }

    pub fn insert(&mut self, a: State, b: State) {
        self.bits[a * self.n + b] = true;
    }

    pub fn remove(&mut self, a: State, b: State) {
        self.bits[a * self.n + b] = false;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (State, State)> + '_ {
        let n = self.n;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i / n, i % n))
    }

    pub fn is_subset_of(&self, other: &StateRelation) -> bool {
        self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    /// Composition self . inner, applying `inner` first:
    /// (a, b) is in the result iff some m has (a, m) in inner and (m, b) in self.
    pub fn compose(&self, inner: &StateRelation) -> StateRelation {
        let n = self.n;
        let mut out = StateRelation::empty(n);
        for a in 0..n {
            for m in 0..n {
                if inner.contains(a, m) {
                    for b in 0..n {
                        if self.contains(m, b) {
                            out.insert(a, b);
                        }
                    }
                }
            }
        }
        out
    }

    pub fn converse(&self) -> StateRelation {
        let mut out = StateRelation::empty(self.n);
        for (a, b) in self.pairs() {
            out.insert(b, a);
        }
        out
    }

    pub fn union(&self, other: &StateRelation) -> StateRelation {
        let mut out = self.clone();
        for (i, &b) in other.bits.iter().enumerate() {
            if b {
                out.bits[i] = true;
            }
        }
        out
    }

    pub fn minus(&self, other: &StateRelation) -> StateRelation {
        let mut out = self.clone();
        for (i, &b) in other.bits.iter().enumerate() {
            if b {
                out.bits[i] = false;
            }
        }
        out
    }

    pub fn is_reflexive(&self) -> bool {
        (0..self.n).all(|q| self.contains(q, q))
    }

    pub fn is_transitive(&self) -> bool {
        let n = self.n;
        for a in 0..n {
            for b in 0..n {
                if self.contains(a, b) {
                    for c in 0..n {
                        if self.contains(b, c) && !self.contains(a, c) {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    pub fn is_preorder(&self) -> bool {
        self.is_reflexive() && self.is_transitive()
    }

    /// The arc relation of `ts` inverted: (a, b) present iff b -> a.
    pub fn predecessor_relation(ts: &TransitionSystem) -> StateRelation {
        Self::from_pairs(ts.num_states(), ts.arcs().iter().map(|&(u, v)| (v, u)))
    }
}

/// A partition of Q into blocks plus a reflexive, transitive, antisymmetric
/// relation over block indexes. Stored canonically: states ascending within a
/// block, blocks ordered by least state, rel pairs sorted (reflexive included).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionRelationPair {
    num_states: usize,
    blocks: Vec<Vec<State>>,
    block_of: Vec<BlockId>,
    rel: Vec<(BlockId, BlockId)>,
}

impl PartitionRelationPair {
    /// Validates the partition and the relation (reflexive closure is added,
    /// but a relation that is not already transitively closed or that breaks
    /// antisymmetry is rejected, never repaired).
    pub fn new(
        num_states: usize,
        blocks: Vec<Vec<State>>,
        rel: impl IntoIterator<Item = (BlockId, BlockId)>,
    ) -> Result<Self> {
        if num_states == 0 {
            return Err(Error::invalid("num_states must be positive"));
        }
        let k = blocks.len();
        let mut seen = vec![false; num_states];
        for (i, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::invalid(format!("block {i} is empty")));
            }
            for &q in block {
                if q >= num_states {
                    return Err(Error::invalid(format!(
                        "state {q} in block {i} out of range for {num_states} states"
                    )));
                }
                if seen[q] {
                    return Err(Error::invalid(format!("state {q} appears in two blocks")));
                }
                seen[q] = true;
            }
        }
        if let Some(q) = seen.iter().position(|&s| !s) {
            return Err(Error::invalid(format!("state {q} is not covered by any block")));
        }

        let words = k.div_ceil(64);
        let mut rows = vec![0u64; k * words];
        let set = |rows: &mut Vec<u64>, a: usize, b: usize| {
            rows[a * words + b / 64] |= 1u64 << (b % 64);
        };
        let get = |rows: &[u64], a: usize, b: usize| rows[a * words + b / 64] >> (b % 64) & 1 == 1;
        for i in 0..k {
            set(&mut rows, i, i);
        }
        for (a, b) in rel {
            if a >= k || b >= k {
                return Err(Error::invalid(format!("rel pair ({a}, {b}) names a missing block")));
            }
            set(&mut rows, a, b);
        }
        for a in 0..k {
            for b in 0..k {
                if a != b && get(&rows, a, b) && get(&rows, b, a) {
                    return Err(Error::invalid(format!(
                        "rel is not antisymmetric: both ({a}, {b}) and ({b}, {a}) present"
                    )));
                }
            }
        }
        for a in 0..k {
            for b in 0..k {
                if get(&rows, a, b) {
                    // row[a] must contain row[b]
                    for w in 0..words {
                        let missing = rows[b * words + w] & !rows[a * words + w];
                        if missing != 0 {
                            let c = w * 64 + missing.trailing_zeros() as usize;
                            return Err(Error::invalid(format!(
                                "rel is not transitively closed: ({a}, {b}) and ({b}, {c}) \
                                 present but ({a}, {c}) missing"
                            )));
                        }
                    }
                }
            }
        }
        let mut pairs = Vec::new();
        for a in 0..k {
            for b in 0..k {
                if get(&rows, a, b) {
                    pairs.push((a, b));
                }
            }
        }
        Ok(Self::from_parts_unchecked(num_states, blocks, pairs))
    }

    /// Canonicalizes without preorder validation; callers guarantee validity.
    pub(crate) fn from_parts_unchecked(
        num_states: usize,
        mut blocks: Vec<Vec<State>>,
        rel: Vec<(BlockId, BlockId)>,
    ) -> Self {
        for block in &mut blocks {
            block.sort_unstable();
        }
        let mut order: Vec<usize> = (0..blocks.len()).collect();
        order.sort_by_key(|&i| blocks[i][0]);
        let mut remap = vec![0usize; blocks.len()];
        for (new, &old) in order.iter().enumerate() {
            remap[old] = new;
        }
        let mut new_blocks = vec![Vec::new(); blocks.len()];
        for (old, block) in blocks.into_iter().enumerate() {
            new_blocks[remap[old]] = block;
        }
        let mut new_rel: Vec<(BlockId, BlockId)> =
            rel.into_iter().map(|(a, b)| (remap[a], remap[b])).collect();
        new_rel.sort_unstable();
        new_rel.dedup();
        let mut block_of = vec![0 as BlockId; num_states];
        for (i, block) in new_blocks.iter().enumerate() {
            for &q in block {
                block_of[q] = i;
            }
        }
        let out = PartitionRelationPair { num_states, blocks: new_blocks, block_of, rel: new_rel };
        debug_assert!(out.rel.iter().all(|&(a, b)| a < out.blocks.len() && b < out.blocks.len()));
        out
    }

    /// One block holding all of Q, related to itself: the preorder Q x Q.
    pub fn one_block(num_states: usize) -> Result<Self> {
        Self::new(num_states, vec![(0..num_states).collect()], [])
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[Vec<State>] {
        &self.blocks
    }

    pub fn block_of(&self, q: State) -> BlockId {
        self.block_of[q]
    }

    /// All rel pairs, reflexive ones included, in ascending order.
    pub fn rel_pairs(&self) -> &[(BlockId, BlockId)] {
        &self.rel
    }

    pub fn in_rel(&self, c: BlockId, d: BlockId) -> bool {
        self.rel.binary_search(&(c, d)).is_ok()
    }

    /// Expands the pair into the state relation it denotes:
    /// the union of C x D over related blocks (C, D).
    pub fn explicit_relation(&self) -> StateRelation {
        let mut out = StateRelation::empty(self.num_states);
        for &(c, d) in &self.rel {
            for &q in &self.blocks[c] {
                for &q2 in &self.blocks[d] {
                    out.insert(q, q2);
                }
            }
        }
        out
    }

    /// Splits every block on the has-a-successor predicate and deletes rel
    /// pairs from successor-having blocks to successor-free blocks, making
    /// the pair stable with respect to Q x Q.
    pub fn init_refine(&self, ts: &TransitionSystem) -> Result<Self> {
        if ts.num_states() != self.num_states {
            return Err(Error::invalid("transition system and partition disagree on state count"));
        }
        // Children of block i: live[i] = id of the successor-having half,
        // dead[i] = id of the successor-free half (if present).
        let mut live: Vec<Option<BlockId>> = vec![None; self.blocks.len()];
        let mut dead: Vec<Option<BlockId>> = vec![None; self.blocks.len()];
        let mut blocks = Vec::new();
        for (i, block) in self.blocks.iter().enumerate() {
            let (with, without): (Vec<State>, Vec<State>) =
                block.iter().copied().partition(|&q| ts.has_successor(q));
            if !with.is_empty() {
                live[i] = Some(blocks.len());
                blocks.push(with);
            }
            if !without.is_empty() {
                dead[i] = Some(blocks.len());
                blocks.push(without);
            }
        }
        let mut rel = Vec::new();
        for &(c, d) in &self.rel {
            for (cc, c_live) in [(live[c], true), (dead[c], false)] {
                for (dd, d_live) in [(live[d], true), (dead[d], false)] {
                    if let (Some(cc), Some(dd)) = (cc, dd) {
                        if !(c_live && !d_live) {
                            rel.push((cc, dd));
                        }
                    }
                }
            }
        }
        Ok(Self::from_parts_unchecked(self.num_states, blocks, rel))
    }
}

/// Quotient of `ts` by a partition: one state per block (numbered in listed
/// order), one arc per pair of blocks connected by at least one arc.
pub fn quotient(ts: &TransitionSystem, blocks: &[Vec<State>]) -> Result<TransitionSystem> {
    let mut block_of = vec![usize::MAX; ts.num_states()];
    for (i, block) in blocks.iter().enumerate() {
        for &q in block {
            if q >= ts.num_states() || block_of[q] != usize::MAX {
                return Err(Error::invalid("blocks do not partition the state space"));
            }
            block_of[q] = i;
        }
    }
    if block_of.iter().any(|&b| b == usize::MAX) {
        return Err(Error::invalid("blocks do not partition the state space"));
    }
    let arcs = ts.arcs().iter().map(|&(u, v)| (block_of[u], block_of[v])).collect();
    TransitionSystem::new(blocks.len(), arcs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> TransitionSystem {
        TransitionSystem::new(3, vec![(0, 1), (1, 2)]).unwrap()
    }

    #[test]
    fn arcs_deduplicate_and_index_consistently() {
        let ts = TransitionSystem::new(3, vec![(0, 1), (0, 1), (2, 0), (1, 1)]).unwrap();
        assert_eq!(ts.arcs(), &[(0, 1), (1, 1), (2, 0)]);
        for &(u, v) in ts.arcs() {
            assert!(ts.successors(u).contains(&v));
            assert!(ts.predecessors(v).contains(&u));
        }
        assert_eq!(ts.predecessors(1), &[0, 1]);
        assert!(!ts.has_successor(2) || ts.successors(2) == [0]);
    }

    #[test]
    fn arc_out_of_range_rejected() {
        assert!(TransitionSystem::new(2, vec![(0, 2)]).is_err());
        assert!(TransitionSystem::new(0, vec![]).is_err());
    }

    #[test]
    fn compose_applies_inner_first() {
        // r = {(0,1)}, s = {(1,2)}: s . r = {(0,2)}, r . s = {}.
        let r = StateRelation::from_pairs(3, [(0, 1)]);
        let s = StateRelation::from_pairs(3, [(1, 2)]);
        assert_eq!(s.compose(&r).pairs().collect::<Vec<_>>(), vec![(0, 2)]);
        assert_eq!(r.compose(&s).count(), 0);
    }

    #[test]
    fn one_block_expands_to_full_relation() {
        let prp = PartitionRelationPair::one_block(3).unwrap();
        assert_eq!(prp.explicit_relation(), StateRelation::full(3));
    }

    #[test]
    fn identity_rel_expands_to_block_squares() {
        let prp = PartitionRelationPair::new(3, vec![vec![0, 1], vec![2]], []).unwrap();
        let expected = StateRelation::from_pairs(3, [(0, 0), (0, 1), (1, 0), (1, 1), (2, 2)]);
        assert_eq!(prp.explicit_relation(), expected);
    }

    #[test]
    fn rel_pairs_expand_cross_products() {
        let prp =
            PartitionRelationPair::new(3, vec![vec![2], vec![0, 1]], [(0, 1)]).unwrap();
        // Canonical order puts {0,1} first; pair ({2}, {0,1}) becomes (1, 0).
        assert_eq!(prp.blocks(), &[vec![0, 1], vec![2]]);
        assert_eq!(prp.rel_pairs(), &[(0, 0), (1, 0), (1, 1)]);
        let expected =
            StateRelation::from_pairs(3, [(0, 0), (0, 1), (1, 0), (1, 1), (2, 0), (2, 1), (2, 2)]);
        assert_eq!(prp.explicit_relation(), expected);
    }

    #[test]
    fn non_closed_rel_rejected() {
        let blocks = vec![vec![0], vec![1], vec![2]];
        let err = PartitionRelationPair::new(3, blocks.clone(), [(0, 1), (1, 2)]).unwrap_err();
        assert!(err.to_string().contains("transitively closed"), "{err}");
        let err = PartitionRelationPair::new(3, blocks, [(0, 1), (1, 0)]).unwrap_err();
        assert!(err.to_string().contains("antisymmetric"), "{err}");
    }

    #[test]
    fn broken_partitions_rejected() {
        assert!(PartitionRelationPair::new(2, vec![vec![0]], []).is_err());
        assert!(PartitionRelationPair::new(2, vec![vec![0, 1], vec![1]], []).is_err());
        assert!(PartitionRelationPair::new(2, vec![vec![0, 1], vec![]], []).is_err());
    }

    #[test]
    fn init_refine_chain_drops_pairs_into_deadlocked_block() {
        let ts = chain();
        let refined = PartitionRelationPair::one_block(3).unwrap().init_refine(&ts).unwrap();
        assert_eq!(refined.blocks(), &[vec![0, 1], vec![2]]);
        let expected = StateRelation::full(3).minus(&StateRelation::from_pairs(3, [(0, 2), (1, 2)]));
        assert_eq!(refined.explicit_relation(), expected);
    }

    #[test]
    fn init_refine_total_system_is_noop() {
        let ts = TransitionSystem::new(2, vec![(0, 1), (1, 0)]).unwrap();
        let prp = PartitionRelationPair::one_block(2).unwrap();
        assert_eq!(prp.init_refine(&ts).unwrap(), prp);
    }

    #[test]
    fn init_refine_self_loop_and_deadlock() {
        let ts = TransitionSystem::new(2, vec![(0, 0)]).unwrap();
        let refined = PartitionRelationPair::one_block(2).unwrap().init_refine(&ts).unwrap();
        let expected = StateRelation::full(2).minus(&StateRelation::from_pairs(2, [(0, 1)]));
        assert_eq!(refined.explicit_relation(), expected);
    }

    #[test]
    fn quotient_collapses_cycle_to_self_loop() {
        let ts = TransitionSystem::new(2, vec![(0, 1), (1, 0)]).unwrap();
        let q = quotient(&ts, &[vec![0, 1]]).unwrap();
        assert_eq!(q.num_states(), 1);
        assert_eq!(q.arcs(), &[(0, 0)]);
    }

    #[test]
    fn quotient_preserves_arcs_blockwise() {
        let ts = TransitionSystem::new(3, vec![(0, 2), (1, 2)]).unwrap();
        let blocks = vec![vec![0, 1], vec![2]];
        let q = quotient(&ts, &blocks).unwrap();
        assert_eq!(q.num_states(), 2);
        assert_eq!(q.arcs(), &[(0, 1)]);
        for &(u, v) in ts.arcs() {
            let bu = blocks.iter().position(|b| b.contains(&u)).unwrap();
            let bv = blocks.iter().position(|b| b.contains(&v)).unwrap();
            assert!(q.arcs().contains(&(bu, bv)));
        }
    }

    #[test]
    fn quotient_rejects_non_partition() {
        let ts = chain();
        assert!(quotient(&ts, &[vec![0, 1]]).is_err());
        assert!(quotient(&ts, &[vec![0, 1], vec![1, 2]]).is_err());
    }
}
