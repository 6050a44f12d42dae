//! Array-backed refinable partition with immutable nodes.
//!
//! States live in one permutation array; every block owns a contiguous
//! subarray described by its node. Splitting swaps the marked states of a
//! block to the front of its subarray and gives both halves fresh child
//! nodes, so a node's state set never changes after creation. Ancestor
//! nodes therefore stay valid as stable names for past block contents.

use crate::error::{Error, Result};
use crate::model::{BlockId, State};

pub type NodeId = usize;

#[derive(Debug, Clone)]
pub struct BlockRecord {
    /// Node holding exactly this block's states.
    pub node: NodeId,
    /// Representative state; always a member of the block.
    pub rep: State,
    /// Scratch counter, zeroed by its users.
    pub count: u32,
}

#[derive(Debug, Clone)]
pub struct NodeRecord {
    /// First index of the subarray in the state permutation.
    pub begin: usize,
    /// Last index, inclusive.
    pub end: usize,
    /// Nodes this one's block lost rel pairs to, consumed this round.
    pub notrel: Vec<NodeId>,
    /// Same, accumulated for the next round.
    pub notrel_next: Vec<NodeId>,
}

#[derive(Debug, Clone)]
pub struct RefinablePartition {
    order: Vec<State>,    // the permutation T
    position: Vec<usize>, // order[position[q]] = q
    block_of: Vec<BlockId>,
    blocks: Vec<BlockRecord>,
    nodes: Vec<NodeRecord>,
    touched: Vec<BlockId>, // split scratch
    marked_in: Vec<u32>,   // split scratch: marked states seen per block
}

impl RefinablePartition {
    /// Builds the partition from listed blocks; block-ids follow the listing.
    pub fn from_blocks(num_states: usize, blocks: &[Vec<State>]) -> Result<Self> {
        if num_states == 0 {
            return Err(Error::invalid("num_states must be positive"));
        }
        let mut order = Vec::with_capacity(num_states);
        let mut block_of = vec![usize::MAX; num_states];
        let mut records = Vec::with_capacity(blocks.len());
        let mut nodes = Vec::with_capacity(blocks.len());
        for (i, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::invalid(format!("block {i} is empty")));
            }
            let begin = order.len();
            for &q in block {
                if q >= num_states || block_of[q] != usize::MAX {
                    return Err(Error::invalid("blocks do not partition the state space"));
                }
                block_of[q] = i;
                order.push(q);
            }
            nodes.push(NodeRecord {
                begin,
                end: order.len() - 1,
                notrel: Vec::new(),
                notrel_next: Vec::new(),
            });
            records.push(BlockRecord { node: i, rep: block[0], count: 0 });
        }
        if order.len() != num_states {
            return Err(Error::invalid("blocks do not partition the state space"));
        }
        let mut position = vec![0usize; num_states];
        for (idx, &q) in order.iter().enumerate() {
            position[q] = idx;
        }
        let marked_in = vec![0; records.len()];
        Ok(RefinablePartition {
            order,
            position,
            block_of,
            blocks: records,
            nodes,
            touched: Vec::new(),
            marked_in,
        })
    }

    pub fn num_states(&self) -> usize {
        self.order.len()
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Nodes ever created; stays below twice the final block count.
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn block(&self, b: BlockId) -> &BlockRecord {
        &self.blocks[b]
    }

    pub fn block_mut(&mut self, b: BlockId) -> &mut BlockRecord {
        &mut self.blocks[b]
    }

    pub fn node(&self, nd: NodeId) -> &NodeRecord {
        &self.nodes[nd]
    }

    pub fn node_mut(&mut self, nd: NodeId) -> &mut NodeRecord {
        &mut self.nodes[nd]
    }

    pub fn block_of(&self, q: State) -> BlockId {
        self.block_of[q]
    }

    /// Index of the state in the permutation; a state lies in a node exactly
    /// when its position falls inside the node's subarray.
    pub fn position_of(&self, q: State) -> usize {
        self.position[q]
    }

    /// The block's stored representative; changes only when a split
    /// transfers it and the caller reassigns.
    pub fn rep(&self, b: BlockId) -> State {
        self.blocks[b].rep
    }

    pub fn set_rep(&mut self, b: BlockId, q: State) {
        debug_assert_eq!(self.block_of[q], b);
        self.blocks[b].rep = q;
    }

    /// First state of the block's subarray (the ChooseState policy).
    pub fn first_state(&self, b: BlockId) -> State {
        self.order[self.nodes[self.blocks[b].node].begin]
    }

    /// Block of the node's first element (the ChooseBlock policy).
    pub fn choose_block(&self, nd: NodeId) -> BlockId {
        self.block_of[self.order[self.nodes[nd].begin]]
    }

    pub fn node_states(&self, nd: NodeId) -> &[State] {
        let rec = &self.nodes[nd];
        &self.order[rec.begin..=rec.end]
    }

    pub fn block_states(&self, b: BlockId) -> &[State] {
        self.node_states(self.blocks[b].node)
    }

    /// Blocks currently contained in the node, in subarray order.
    pub fn blocks_in_node(&self, nd: NodeId) -> impl Iterator<Item = BlockId> + '_ {
        let end = self.nodes[nd].end;
        let mut i = self.nodes[nd].begin;
        std::iter::from_fn(move || {
            if i > end {
                return None;
            }
            let b = self.block_of[self.order[i]];
            i = self.nodes[self.blocks[b].node].end + 1;
            Some(b)
        })
    }

    /// Current blocks as plain state sets, indexed by block-id.
    pub fn blocks_as_sets(&self) -> Vec<Vec<State>> {
        (0..self.num_blocks()).map(|b| self.block_states(b).to_vec()).collect()
    }

    /// Splits every block straddling `marked` into its marked part (a new
    /// block-id on a fresh node, placed at the front of the subarray) and its
    /// unmarked part (keeping the block-id, also on a fresh node). Runs in
    /// O(|marked|) plus the callback costs; `on_split(self, kept, new)` fires
    /// once per divided block, immediately after the division.
    pub fn split(
        &mut self,
        marked: &[State],
        mut on_split: impl FnMut(&mut Self, BlockId, BlockId),
    ) {
        debug_assert!(self.touched.is_empty());
        for &q in marked {
            let b = self.block_of[q];
            if self.marked_in[b] == 0 {
                self.touched.push(b);
            }
            let target = self.nodes[self.blocks[b].node].begin + self.marked_in[b] as usize;
            let pos = self.position[q];
            debug_assert!(pos >= target, "marked set contains state {q} twice");
            self.order.swap(pos, target);
            self.position[self.order[pos]] = pos;
            self.position[self.order[target]] = target;
            self.marked_in[b] += 1;
        }
        for t in 0..self.touched.len() {
            let b = self.touched[t];
            let m = self.marked_in[b] as usize;
            self.marked_in[b] = 0;
            let parent = self.blocks[b].node;
            let (begin, end) = (self.nodes[parent].begin, self.nodes[parent].end);
            if m == end - begin + 1 {
                continue; // wholly marked: nothing to divide
            }
            let new_block = self.blocks.len();
            self.nodes.push(NodeRecord {
                begin,
                end: begin + m - 1,
                notrel: Vec::new(),
                notrel_next: Vec::new(),
            });
            let marked_node = self.nodes.len() - 1;
            self.nodes.push(NodeRecord {
                begin: begin + m,
                end,
                notrel: Vec::new(),
                notrel_next: Vec::new(),
            });
            let rest_node = self.nodes.len() - 1;
            // New block inherits the parent's rep for now; the callback
            // decides which half gets a recomputed representative.
            self.blocks.push(BlockRecord {
                node: marked_node,
                rep: self.blocks[b].rep,
                count: 0,
            });
            self.blocks[b].node = rest_node;
            for i in begin..begin + m {
                self.block_of[self.order[i]] = new_block;
            }
            self.marked_in.push(0);
            on_split(self, b, new_block);
        }
        self.touched.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn set(states: &[State]) -> BTreeSet<State> {
        states.iter().copied().collect()
    }

    #[test]
    fn from_blocks_lays_out_listed_order() {
        let p = RefinablePartition::from_blocks(3, &[vec![0, 1], vec![2]]).unwrap();
        assert_eq!(p.num_blocks(), 2);
        assert_eq!(p.num_nodes(), 2);
        assert_eq!(p.block_states(0), &[0, 1]);
        assert_eq!(p.block_states(1), &[2]);
        assert_eq!(p.rep(0), 0);
        for q in 0..3 {
            assert_eq!(p.node_states(p.block(p.block_of(q)).node).contains(&q), true);
        }
    }

    #[test]
    fn block_ids_follow_listing() {
        let p = RefinablePartition::from_blocks(2, &[vec![1], vec![0]]).unwrap();
        assert_eq!(p.block_states(0), &[1]);
        assert_eq!(p.block_of(0), 1);
    }

    #[test]
    fn bad_partitions_rejected() {
        assert!(RefinablePartition::from_blocks(2, &[vec![0]]).is_err());
        assert!(RefinablePartition::from_blocks(2, &[vec![0, 1], vec![1]]).is_err());
        assert!(RefinablePartition::from_blocks(2, &[vec![0], vec![1], vec![]]).is_err());
    }

    #[test]
    fn split_moves_marked_to_front_and_freshens_nodes() {
        let mut p = RefinablePartition::from_blocks(3, &[vec![0, 1, 2]]).unwrap();
        let mut calls = Vec::new();
        p.split(&[1], |p, kept, new| {
            calls.push((kept, new));
            assert_eq!(p.block_states(new), &[1]);
            assert_eq!(set(p.block_states(kept)), set(&[0, 2]));
        });
        assert_eq!(calls, vec![(0, 1)]);
        assert_eq!(p.num_nodes(), 3);
        // Parent node 0 still covers all three states.
        assert_eq!(set(p.node_states(0)), set(&[0, 1, 2]));
        // Marked half sits first, so the parent's chosen block is the new one.
        assert_eq!(p.choose_block(0), 1);
        assert_eq!(p.blocks_in_node(0).collect::<Vec<_>>(), vec![1, 0]);
    }

    #[test]
    fn split_on_whole_block_or_block_union_is_noop() {
        let mut p = RefinablePartition::from_blocks(3, &[vec![0, 1], vec![2]]).unwrap();
        let mut calls = 0;
        p.split(&[0, 1], |_, _, _| calls += 1);
        p.split(&[2, 1, 0], |_, _, _| calls += 1);
        assert_eq!(calls, 0);
        assert_eq!(p.num_blocks(), 2);
        assert_eq!(p.num_nodes(), 2);
    }

    #[test]
    fn split_handles_several_blocks_at_once() {
        let mut p = RefinablePartition::from_blocks(4, &[vec![0, 1], vec![2, 3]]).unwrap();
        let mut calls = Vec::new();
        p.split(&[1, 3], |_, kept, new| calls.push((kept, new)));
        assert_eq!(calls, vec![(0, 2), (1, 3)]);
        assert_eq!(p.block_states(2), &[1]);
        assert_eq!(p.block_states(3), &[3]);
        assert_eq!(p.block_states(0), &[0]);
        assert_eq!(p.block_states(1), &[2]);
    }

    #[test]
    fn node_state_sets_survive_deeper_splits() {
        let mut p = RefinablePartition::from_blocks(4, &[vec![0, 1, 2, 3]]).unwrap();
        p.split(&[2, 3], |_, _, _| {});
        let first_gen: Vec<BTreeSet<State>> =
            (0..p.num_nodes()).map(|nd| set(p.node_states(nd))).collect();
        p.split(&[1], |_, _, _| {});
        p.split(&[3], |_, _, _| {});
        for (nd, states) in first_gen.iter().enumerate() {
            assert_eq!(&set(p.node_states(nd)), states, "node {nd} changed");
        }
        // Fully singleton now: 4 blocks, at most 2 * 4 - 1 nodes ever.
        assert_eq!(p.num_blocks(), 4);
        assert!(p.num_nodes() <= 2 * p.num_blocks() - 1);
    }

    #[test]
    fn positions_stay_inverse_of_order() {
        let mut p = RefinablePartition::from_blocks(5, &[vec![3, 1, 4, 0, 2]]).unwrap();
        p.split(&[4, 0], |_, _, _| {});
        p.split(&[1], |_, _, _| {});
        for q in 0..5 {
            let b = p.block_of(q);
            assert!(p.block_states(b).contains(&q));
        }
        let mut all: Vec<State> = (0..p.num_blocks()).flat_map(|b| p.block_states(b).to_vec()).collect();
        all.sort_unstable();
        assert_eq!(all, vec![0, 1, 2, 3, 4]);
    }
}
