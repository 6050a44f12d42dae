//! Partition-refinement engine for the coarsest simulation preorder.
//!
//! The engine maintains a partition-relation pair whose induced relation
//! shrinks from the initial preorder down to the coarsest simulation inside
//! it. Counters over block representatives let each round detect which
//! blocks lost all witnessing transitions without rescanning the relation.
//!
//! Everything here is sequential and deterministic: sets iterate in
//! insertion order, and an optional seeded shuffle exists only so tests can
//! confirm the result does not depend on processing order.

use crate::error::{Error, Result};
use crate::model::{BlockId, PartitionRelationPair, State, StateRelation, TransitionSystem};
use crate::oracle;
use crate::partition::{NodeId, RefinablePartition};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use std::collections::HashSet;

/// How much self-auditing the engine performs while running.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Checks {
    /// Only the always-on counter underflow guard.
    None,
    /// Re-derive every loop invariant from scratch each round and compare
    /// against the reference implementations. Quadratic and slow; meant for
    /// small inputs.
    Full,
}

/// Counters describing one engine run.
#[derive(Debug, Clone, Default)]
pub struct EngineStats {
    pub num_states: u64,
    pub num_arcs: u64,
    pub iterations: u64,
    pub final_blocks: u64,
    pub nodes_created: u64,
    pub relcount_entries: u64,
    pub loop_tally_simupdate: u64,
    pub loop_tally_split1: u64,
    pub loop_tally_split2: u64,
    pub loop_tally_refine: u64,
}

impl EngineStats {
    pub fn loop_total(&self) -> u64 {
        self.loop_tally_simupdate
            + self.loop_tally_split1
            + self.loop_tally_split2
            + self.loop_tally_refine
    }

    /// Budget the tallies are measured against: blocks * arcs + blocks^2
    /// + states + 1.
    pub fn work_budget(&self) -> u64 {
        self.final_blocks * self.num_arcs + self.final_blocks * self.final_blocks
            + self.num_states
            + 1
    }

    pub fn work_ratio(&self) -> f64 {
        self.loop_total() as f64 / self.work_budget() as f64
    }

    pub fn render(&self) -> String {
        format!(
            "iterations {}\nfinal_blocks {}\nnodes_created {}\nrelcount_entries {}\n\
             loop_tally_simupdate {}\nloop_tally_split1 {}\nloop_tally_split2 {}\n\
             loop_tally_refine {}\nratio {:.6}\n",
            self.iterations,
            self.final_blocks,
            self.nodes_created,
            self.relcount_entries,
            self.loop_tally_simupdate,
            self.loop_tally_split1,
            self.loop_tally_split2,
            self.loop_tally_refine,
            self.work_ratio(),
        )
    }
}

/// Set over a dense integer range with O(1) insert/membership and
/// insertion-order iteration.
#[derive(Debug, Default)]
struct DenseSet {
    member: Vec<bool>,
    items: Vec<usize>,
}

impl DenseSet {
    fn with_capacity(cap: usize) -> Self {
        DenseSet { member: vec![false; cap], items: Vec::new() }
    }

    fn insert(&mut self, x: usize) -> bool {
        if x >= self.member.len() {
            self.member.resize(x + 1, false);
        }
        if self.member[x] {
            return false;
        }
        self.member[x] = true;
        self.items.push(x);
        true
    }

    fn contains(&self, x: usize) -> bool {
        self.member.get(x).copied().unwrap_or(false)
    }

    fn items(&self) -> &[usize] {
        &self.items
    }

    fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    fn clear(&mut self) {
        for &x in &self.items {
            self.member[x] = false;
        }
        self.items.clear();
    }
}

pub struct Engine<'a> {
    ts: &'a TransitionSystem,
    p: RefinablePartition,
    /// rel[c][d]: block d currently simulates block c. Rows are kept at the
    /// current block count.
    rel: Vec<Vec<bool>>,
    /// relcount[b][e]: number of blocks E' with rep(e) -> E' and
    /// rel-from-previous-round between b and E'.
    relcount: Vec<Vec<u32>>,
    refiners: DenseSet,      // node ids with pending notrel work
    refiners_next: DenseSet, // collected during refine
    marked: DenseSet,        // states, input to split
    pre_blocks: DenseSet,    // scratch: blocks found through representatives
    touched: DenseSet,       // scratch: blocks
    touched2: DenseSet,      // scratch: blocks
    remove: DenseSet,        // scratch: blocks losing a rel pair
    fresh: DenseSet,         // blocks whose counter column a split refreshed
    stats: EngineStats,
    checks: Checks,
    /// Relation of the previous round, kept only under Checks::Full.
    prev_rel: Option<StateRelation>,
    /// Block pairs ever deleted, kept only under Checks::Full.
    deleted: HashSet<(BlockId, BlockId)>,
    shuffle: Option<ChaCha8Rng>,
}

impl<'a> Engine<'a> {
    /// Builds the engine and runs the initialisation round: splits blocks
    /// between states with and without successors, prunes the relation
    /// accordingly, and sets up counters and pending-work lists.
    pub fn new(
        ts: &'a TransitionSystem,
        init: &PartitionRelationPair,
        checks: Checks,
    ) -> Result<Engine<'a>> {
        if init.num_states() != ts.num_states() {
            return Err(Error::invalid(format!(
                "initial preorder covers {} states but the system has {}",
                init.num_states(),
                ts.num_states()
            )));
        }
        let n = ts.num_states();
        let k0 = init.num_blocks();
        let p = RefinablePartition::from_blocks(n, init.blocks())?;
        let mut rel = vec![vec![false; k0]; k0];
        for &(c, d) in init.rel_pairs() {
            rel[c][d] = true;
        }
        let relcount = vec![vec![0u32; k0]; k0];
        let mut engine = Engine {
            ts,
            p,
            rel,
            relcount,
            refiners: DenseSet::with_capacity(2 * k0),
            refiners_next: DenseSet::with_capacity(2 * k0),
            marked: DenseSet::with_capacity(n),
            pre_blocks: DenseSet::with_capacity(k0),
            touched: DenseSet::with_capacity(k0),
            touched2: DenseSet::with_capacity(k0),
            remove: DenseSet::with_capacity(k0),
            fresh: DenseSet::with_capacity(2 * k0),
            stats: EngineStats {
                num_states: n as u64,
                num_arcs: ts.num_arcs() as u64,
                ..EngineStats::default()
            },
            checks,
            prev_rel: None,
            deleted: HashSet::new(),
            shuffle: None,
        };
        engine.init()?;
        Ok(engine)
    }

    /// Enables seeded shuffling of every order-insensitive processing list.
    pub fn shuffle_processing_order(&mut self, seed: u64) {
        self.shuffle = Some(ChaCha8Rng::seed_from_u64(seed));
    }

    pub fn stats(&self) -> &EngineStats {
        &self.stats
    }

    pub fn partition(&self) -> &RefinablePartition {
        &self.p
    }

    /// Expands the block-level relation to a relation over states.
    pub fn current_relation(&self) -> StateRelation {
        let mut r = StateRelation::empty(self.ts.num_states());
        for c in 0..self.p.num_blocks() {
            for d in 0..self.p.num_blocks() {
                if self.rel[c][d] {
                    for &q in self.p.block_states(c) {
                        for &q2 in self.p.block_states(d) {
                            r.insert(q, q2);
                        }
                    }
                }
            }
        }
        r
    }

    /// Current blocks in canonical order (states ascending, blocks by first
    /// state).
    pub fn current_blocks(&self) -> Vec<Vec<State>> {
        let mut blocks = self.p.blocks_as_sets();
        for b in &mut blocks {
            b.sort_unstable();
        }
        blocks.sort_by_key(|b| b[0]);
        blocks
    }

    pub fn into_pair(self) -> PartitionRelationPair {
        let blocks = self.p.blocks_as_sets();
        let mut pairs = Vec::new();
        for (c, row) in self.rel.iter().enumerate() {
            for (d, &on) in row.iter().enumerate() {
                if on {
                    pairs.push((c, d));
                }
            }
        }
        PartitionRelationPair::from_parts_unchecked(self.ts.num_states(), blocks, pairs)
    }

    fn ordered(&mut self, mut items: Vec<usize>) -> Vec<usize> {
        if let Some(rng) = &mut self.shuffle {
            for i in (1..items.len()).rev() {
                let j = (rng.next_u64() % (i as u64 + 1)) as usize;
                items.swap(i, j);
            }
        }
        items
    }

    fn init(&mut self) -> Result<()> {
        // Split every block between states with and without successors.
        for q in 0..self.ts.num_states() {
            if self.ts.has_successor(q) {
                self.marked.insert(q);
            }
        }
        let marked_states = self.ordered(self.marked.items().to_vec());
        let ts = self.ts;
        let Engine { p, rel, relcount, touched, touched2, .. } = self;
        p.split(&marked_states, |p, kept, new| {
            split_update_data(ts, p, rel, relcount, touched, touched2, kept, new);
        });
        let k = self.p.num_blocks();
        // Blocks wholly made of states with successors are exactly those
        // whose rep is marked; drop rel pairs from them to dead-end blocks.
        for b in 0..k {
            if self.marked.contains(self.p.rep(b)) {
                self.touched.insert(b);
            }
        }
        for &c in self.touched.items() {
            for d in 0..k {
                if !self.touched.contains(d) {
                    self.rel[c][d] = false;
                }
            }
        }
        self.marked.clear();
        self.touched.clear();
        // Every missing rel pair is pending work.
        for c in 0..k {
            let nd = self.p.block(c).node;
            let missing: Vec<NodeId> = (0..k)
                .filter(|&d| !self.rel[c][d])
                .map(|d| self.p.block(d).node)
                .collect();
            if !missing.is_empty() {
                self.refiners.insert(nd);
            }
            self.p.node_mut(nd).notrel = missing;
        }
        // Rebuild all counters from scratch: against the implicit previous
        // relation (everything related to everything), relcount[b][e] is
        // just the number of blocks rep(e) reaches.
        for row in &mut self.relcount {
            row.clear();
            row.resize(k, 0);
        }
        for target in 0..k {
            debug_assert!(self.pre_blocks.is_empty());
            for &q in self.p.block_states(target) {
                for &e in self.ts.predecessors(q) {
                    let eb = self.p.block_of(e);
                    if self.p.rep(eb) == e {
                        self.pre_blocks.insert(eb);
                    }
                }
            }
            for &eb in self.pre_blocks.items() {
                for b in 0..k {
                    self.relcount[b][eb] += 1;
                }
            }
            self.pre_blocks.clear();
        }
        if self.checks == Checks::Full {
            self.prev_rel = Some(StateRelation::full(self.ts.num_states()));
        }
        Ok(())
    }

    /// Round phase 1: for every pending block pair that fell out of the
    /// relation, decrement the counters of representative predecessors.
    pub fn sim_update_data(&mut self) -> Result<()> {
        let order = self.ordered(self.refiners.items().to_vec());
        for nd in order {
            let b_prime = self.p.choose_block(nd);
            let gone: Vec<NodeId> = self.p.node(nd).notrel.clone();
            for nd2 in gone {
                let targets: Vec<BlockId> = self.p.blocks_in_node(nd2).collect();
                for target in targets {
                    debug_assert!(self.pre_blocks.is_empty());
                    for &q in self.p.block_states(target) {
                        for &e in self.ts.predecessors(q) {
                            self.stats.loop_tally_simupdate += 1;
                            let eb = self.p.block_of(e);
                            if self.p.rep(eb) == e {
                                self.pre_blocks.insert(eb);
                            }
                        }
                    }
                    for &eb in self.pre_blocks.items() {
                        let cell = &mut self.relcount[b_prime][eb];
                        if *cell == 0 {
                            return Err(Error::internal(format!(
                                "relation counter underflow at blocks ({b_prime}, {eb})"
                            )));
                        }
                        *cell -= 1;
                    }
                    self.pre_blocks.clear();
                }
            }
        }
        Ok(())
    }

    /// Round phase 2, one pass: split away states with a transition into the
    /// pending block's simulators from blocks whose counter hit zero.
    pub fn split1(&mut self) -> Result<()> {
        let order = self.ordered(self.refiners.items().to_vec());
        for nd in order {
            self.split1_node(nd)?;
        }
        Ok(())
    }

    fn split1_node(&mut self, nd: NodeId) -> Result<()> {
        let b_prime = self.p.choose_block(nd);
        let mut needs_split = false;
        for &q in self.p.node_states(nd) {
            for &e in self.ts.predecessors(q) {
                self.stats.loop_tally_split1 += 1;
                if self.relcount[b_prime][self.p.block_of(e)] == 0 {
                    needs_split = true;
                }
            }
        }
        if !needs_split {
            return Ok(());
        }
        debug_assert!(self.marked.is_empty());
        for &(q, q2) in self.ts.arcs() {
            self.stats.loop_tally_split1 += 1;
            if self.rel[b_prime][self.p.block_of(q2)] {
                self.marked.insert(q);
            }
        }
        self.split_marked();
        self.marked.clear();
        Ok(())
    }

    /// Round phase 3, one pass: split away states whose transitions into the
    /// pending block are all maximal, detected by comparing counters against
    /// the number of sub-blocks reached.
    pub fn split2(&mut self) -> Result<()> {
        let order = self.ordered(self.refiners.items().to_vec());
        for nd in order {
            self.split2_node(nd)?;
        }
        Ok(())
    }

    fn split2_node(&mut self, nd: NodeId) -> Result<()> {
        debug_assert!(self.touched.is_empty() && self.touched2.is_empty());
        let members: Vec<BlockId> = self.p.blocks_in_node(nd).collect();
        for sub in members {
            debug_assert!(self.pre_blocks.is_empty());
            for &q in self.p.block_states(sub) {
                for &e in self.ts.predecessors(q) {
                    self.stats.loop_tally_split2 += 1;
                    let eb = self.p.block_of(e);
                    if self.p.rep(eb) == e {
                        self.pre_blocks.insert(eb);
                    }
                }
            }
            for &eb in self.pre_blocks.items() {
                self.stats.loop_tally_split2 += 1;
                self.p.block_mut(eb).count += 1;
                self.touched.insert(eb);
            }
            self.pre_blocks.clear();
        }
        let b_prime = self.p.choose_block(nd);
        for &eb in self.touched.items() {
            self.stats.loop_tally_split2 += 1;
            // Equal counts mean every reached block lies inside this
            // node: the rep transition into it is maximal.
            if self.relcount[b_prime][eb] == self.p.block(eb).count {
                self.touched2.insert(eb);
            }
            self.p.block_mut(eb).count = 0;
        }
        debug_assert!(self.marked.is_empty());
        for &q in self.p.node_states(nd) {
            for &e in self.ts.predecessors(q) {
                self.stats.loop_tally_split2 += 1;
                if self.touched2.contains(self.p.block_of(e)) {
                    self.marked.insert(e);
                }
            }
        }
        self.touched.clear();
        self.touched2.clear();
        self.split_marked();
        self.marked.clear();
        Ok(())
    }

    /// Round phase 4: delete block pairs that lost their last witnessing
    /// transition, recording them as next round's pending work.
    pub fn refine(&mut self) -> Result<()> {
        debug_assert!(self.refiners_next.is_empty());
        let order = self.ordered(self.refiners.items().to_vec());
        for nd in order {
            let b_prime = self.p.choose_block(nd);
            debug_assert!(self.remove.is_empty());
            let gone: Vec<NodeId> = self.p.node(nd).notrel.clone();
            for nd2 in gone {
                for &q in self.p.node_states(nd2) {
                    for &e in self.ts.predecessors(q) {
                        self.stats.loop_tally_refine += 1;
                        let eb = self.p.block_of(e);
                        if self.relcount[b_prime][eb] == 0 {
                            self.remove.insert(eb);
                        }
                    }
                }
            }
            let removals = self.ordered(self.remove.items().to_vec());
            let sources = self.p.node_states(nd).to_vec();
            for q in sources {
                for &e in self.ts.predecessors(q) {
                    self.stats.loop_tally_refine += 1;
                    let c = self.p.block_of(e);
                    for &d in &removals {
                        self.stats.loop_tally_refine += 1;
                        if self.rel[c][d] {
                            self.rel[c][d] = false;
                            if self.checks == Checks::Full && !self.deleted.insert((c, d)) {
                                return Err(Error::internal(format!(
                                    "block pair ({c}, {d}) deleted twice"
                                )));
                            }
                            let c_node = self.p.block(c).node;
                            let d_node = self.p.block(d).node;
                            self.p.node_mut(c_node).notrel_next.push(d_node);
                            self.refiners_next.insert(c_node);
                        }
                    }
                }
            }
            self.remove.clear();
            self.p.node_mut(nd).notrel.clear();
        }
        self.refiners.clear();
        for &nd in self.refiners_next.items() {
            let rec = self.p.node_mut(nd);
            std::mem::swap(&mut rec.notrel, &mut rec.notrel_next);
        }
        std::mem::swap(&mut self.refiners, &mut self.refiners_next);
        Ok(())
    }

    fn split_marked(&mut self) {
        let marked_states = self.ordered(self.marked.items().to_vec());
        let ts = self.ts;
        let Engine { p, rel, relcount, touched, touched2, fresh, .. } = self;
        p.split(&marked_states, |p, kept, new| {
            split_update_data(ts, p, rel, relcount, touched, touched2, kept, new);
            // Both halves carry counter columns the re-examination pass
            // must look at again.
            fresh.insert(kept);
            fresh.insert(new);
        });
    }

    /// Splits performed while one pending node is processed can create new
    /// splitting situations at nodes scanned earlier in the same pass, but
    /// only through the refreshed counter columns of the two halves: a
    /// rebuilt column can hold a new zero or meet the maximality equality,
    /// while every untouched column moves in lockstep with the sub-block
    /// counts. So instead of rescanning every pending node this checks the
    /// refreshed blocks against each node and reruns the full per-node
    /// splitting just where a new situation is confirmed. Returns false
    /// once nothing needed another look.
    fn split_recheck(&mut self) -> Result<bool> {
        if self.fresh.is_empty() {
            return Ok(false);
        }
        let fresh: Vec<BlockId> = self.fresh.items().to_vec();
        self.fresh.clear();
        let order = self.ordered(self.refiners.items().to_vec());
        for nd in order {
            let b_prime = self.p.choose_block(nd);
            let begin = self.p.node(nd).begin;
            let end = self.p.node(nd).end;
            let mut zero_hit = false;
            'fresh: for &eb in &fresh {
                self.stats.loop_tally_split1 += 1;
                if self.relcount[b_prime][eb] != 0 {
                    continue;
                }
                for &q in self.p.block_states(eb) {
                    for &q2 in self.ts.successors(q) {
                        self.stats.loop_tally_split1 += 1;
                        let pos = self.p.position_of(q2);
                        if begin <= pos && pos <= end {
                            zero_hit = true;
                            break 'fresh;
                        }
                    }
                }
            }
            if zero_hit {
                self.split1_node(nd)?;
            }
            let mut maximal_hit = false;
            for &eb in &fresh {
                self.stats.loop_tally_split2 += 1;
                let counted = self.relcount[b_prime][eb];
                if counted == 0 {
                    continue;
                }
                debug_assert!(self.pre_blocks.is_empty());
                for &q2 in self.ts.successors(self.p.rep(eb)) {
                    self.stats.loop_tally_split2 += 1;
                    let pos = self.p.position_of(q2);
                    if begin <= pos && pos <= end {
                        self.pre_blocks.insert(self.p.block_of(q2));
                    }
                }
                let reached = self.pre_blocks.items().len() as u32;
                self.pre_blocks.clear();
                if reached == 0 || reached != counted {
                    continue;
                }
                // Only a real situation if some state of the block has no
                // transition into the node; a fully contained block cannot
                // be divided by it.
                'states: for &q in self.p.block_states(eb) {
                    for &q2 in self.ts.successors(q) {
                        self.stats.loop_tally_split2 += 1;
                        let pos = self.p.position_of(q2);
                        if begin <= pos && pos <= end {
                            continue 'states;
                        }
                    }
                    maximal_hit = true;
                    break;
                }
                if maximal_hit {
                    break;
                }
            }
            if maximal_hit {
                self.split2_node(nd)?;
            }
        }
        Ok(true)
    }

    /// Runs rounds until no pending work remains.
    pub fn run_to_fixpoint(&mut self) -> Result<()> {
        let n = self.ts.num_states() as u64;
        loop {
            if self.checks == Checks::Full {
                self.audit_round_start()?;
            }
            if self.refiners.is_empty() {
                break;
            }
            if self.stats.iterations > n * n {
                return Err(Error::internal("refinement failed to terminate"));
            }
            let before = if self.checks == Checks::Full {
                Some(self.current_relation())
            } else {
                None
            };
            self.sim_update_data()?;
            if let Some(r) = &before {
                self.audit_counters(r)?;
            }
            self.fresh.clear();
            self.split1()?;
            if let Some(r) = &before {
                self.audit_counters(r)?;
            }
            self.split2()?;
            if let Some(r) = &before {
                self.audit_counters(r)?;
            }
            while self.split_recheck()? {
                if let Some(r) = &before {
                    self.audit_counters(r)?;
                }
            }
            if let Some(r) = &before {
                let want = oracle::coarsest_block_stable_partition(self.ts, r)?;
                if self.current_blocks() != want {
                    return Err(Error::internal("partition is not the coarsest stable one"));
                }
            }
            self.refine()?;
            if let Some(r) = before {
                let prev = self.prev_rel.take().expect("checks keep the previous relation");
                let outcome = oracle::refine_oracle(self.ts, &r, &prev)?;
                if self.current_relation() != outcome.v {
                    return Err(Error::internal("refined relation disagrees with reference"));
                }
                if outcome.v == r && !self.refiners.is_empty() {
                    return Err(Error::internal("pending work left after a fixpoint round"));
                }
                self.prev_rel = Some(r);
            }
            self.stats.iterations += 1;
        }
        self.stats.final_blocks = self.p.num_blocks() as u64;
        self.stats.nodes_created = self.p.num_nodes() as u64;
        self.stats.relcount_entries =
            self.relcount.iter().map(|row| row.len() as u64).sum::<u64>();
        Ok(())
    }

    /// Checks::Full invariants that must hold at the top of every round.
    fn audit_round_start(&self) -> Result<()> {
        let k = self.p.num_blocks();
        let r = self.current_relation();
        let prev = self.prev_rel.as_ref().expect("checks keep the previous relation");
        if !r.is_preorder() {
            return Err(Error::internal("block relation stopped being a preorder"));
        }
        if !r.is_subset_of(prev) {
            return Err(Error::internal("relation grew between rounds"));
        }
        if !oracle::is_stable(self.ts, &r, prev) {
            return Err(Error::internal("relation lost stability at round start"));
        }
        // Pending nodes are exactly the current-block nodes with notrel work.
        for b in 0..k {
            let nd = self.p.block(b).node;
            let pending = !self.p.node(nd).notrel.is_empty();
            if pending != self.refiners.contains(nd) {
                return Err(Error::internal(format!("pending-work list wrong for block {b}")));
            }
        }
        for &nd in self.refiners.items() {
            let members: Vec<BlockId> = self.p.blocks_in_node(nd).collect();
            if members.len() != 1 || self.p.block(members[0]).node != nd {
                return Err(Error::internal("pending node no longer names a single block"));
            }
        }
        // The notrel lists encode exactly what the previous round removed.
        let mut recorded = StateRelation::empty(self.ts.num_states());
        for &nd in self.refiners.items() {
            for &nd2 in &self.p.node(nd).notrel {
                for &q in self.p.node_states(nd) {
                    for &q2 in self.p.node_states(nd2) {
                        recorded.insert(q, q2);
                    }
                }
            }
        }
        if recorded != prev.minus(&r) {
            return Err(Error::internal("notrel lists disagree with removed pairs"));
        }
        self.audit_counters(prev)
    }

    /// Recomputes every counter from the given relation and compares.
    fn audit_counters(&self, r: &StateRelation) -> Result<()> {
        let k = self.p.num_blocks();
        for e in 0..k {
            let rep = self.p.rep(e);
            if self.p.block_of(rep) != e {
                return Err(Error::internal(format!("block {e} has a foreign representative")));
            }
            let mut reached = vec![false; k];
            for &q2 in self.ts.successors(rep) {
                reached[self.p.block_of(q2)] = true;
            }
            for b in 0..k {
                let mut want = 0u32;
                for (target, &hit) in reached.iter().enumerate() {
                    if hit && block_product_in(&self.p, r, b, target) {
                        want += 1;
                    }
                }
                if self.relcount[b][e] != want {
                    return Err(Error::internal(format!(
                        "counter for blocks ({b}, {e}) is {} but recomputes to {want}",
                        self.relcount[b][e]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// True when every pair of the two blocks' product lies in `r`.
fn block_product_in(p: &RefinablePartition, r: &StateRelation, b: BlockId, d: BlockId) -> bool {
    p.block_states(b)
        .iter()
        .all(|&q| p.block_states(d).iter().all(|&q2| r.contains(q, q2)))
}

/// Settles relation rows, counters and representatives after one block
/// division. `kept` holds the unmarked half under the old id, `new` the
/// marked half. Exactly one half keeps the inherited representative; the
/// other gets a fresh one and its counter column rebuilt from that
/// representative's transitions.
fn split_update_data(
    ts: &TransitionSystem,
    p: &mut RefinablePartition,
    rel: &mut Vec<Vec<bool>>,
    relcount: &mut Vec<Vec<u32>>,
    touched: &mut DenseSet,
    touched2: &mut DenseSet,
    kept: BlockId,
    new: BlockId,
) {
    debug_assert_eq!(new, rel.len());
    let k = p.num_blocks();
    // The new block starts with the kept block's row, and every row holding
    // the kept block also holds the new one.
    let kept_row = rel[kept].clone();
    rel.push(kept_row);
    for row in rel.iter_mut() {
        row.resize(k, false);
    }
    for e in 0..k {
        rel[e][new] = rel[e][kept];
    }
    let kept_counts = relcount[kept].clone();
    relcount.push(kept_counts);
    for row in relcount.iter_mut() {
        row.resize(k, 0);
    }
    // The half that kept the inherited representative also keeps the
    // counter column; the other half is rebuilt below.
    let rebuilt = if p.block_of(p.rep(kept)) == kept {
        new
    } else {
        for b in 0..k {
            relcount[b][new] = relcount[b][kept];
        }
        kept
    };
    // Blocks whose representative reaches both halves gained a reachable
    // block and need their counters bumped. The rebuilt block's stale
    // representative cannot qualify: it now lies outside that block.
    debug_assert!(touched.is_empty() && touched2.is_empty());
    for &q in p.block_states(kept) {
        for &e in ts.predecessors(q) {
            let eb = p.block_of(e);
            if p.rep(eb) == e {
                touched.insert(eb);
            }
        }
    }
    for &q in p.block_states(new) {
        for &e in ts.predecessors(q) {
            let eb = p.block_of(e);
            if p.rep(eb) == e && touched.contains(eb) {
                touched2.insert(eb);
            }
        }
    }
    for &eb in touched2.items() {
        for b in 0..k {
            if rel[b][kept] {
                relcount[b][eb] += 1;
            }
        }
    }
    touched.clear();
    touched2.clear();
    let rep = p.first_state(rebuilt);
    p.set_rep(rebuilt, rep);
    for b in 0..k {
        relcount[b][rebuilt] = 0;
    }
    for &q2 in ts.successors(rep) {
        touched.insert(p.block_of(q2));
    }
    for &target in touched.items() {
        for b in 0..k {
            if rel[b][target] {
                relcount[b][rebuilt] += 1;
            }
        }
    }
    touched.clear();
}

/// Computes the coarsest simulation preorder inside `init`.
pub fn run(
    ts: &TransitionSystem,
    init: &PartitionRelationPair,
    checks: Checks,
) -> Result<PartitionRelationPair> {
    run_with_stats(ts, init, checks).map(|(pair, _)| pair)
}

/// Same as [`run`], also reporting the engine's counters.
pub fn run_with_stats(
    ts: &TransitionSystem,
    init: &PartitionRelationPair,
    checks: Checks,
) -> Result<(PartitionRelationPair, EngineStats)> {
    let mut engine = Engine::new(ts, init, checks)?;
    engine.run_to_fixpoint()?;
    let stats = engine.stats().clone();
    Ok((engine.into_pair(), stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::{parse_problem, serialize_result};
    use crate::model::TransitionSystem;
    use crate::oracle::naive_coarsest_simulation;

    fn chain() -> (TransitionSystem, PartitionRelationPair) {
        let ts = TransitionSystem::new(3, vec![(0, 1), (1, 2)]).unwrap();
        let init = PartitionRelationPair::one_block(3).unwrap();
        (ts, init)
    }

    #[test]
    fn init_splits_and_prunes_chain() {
        let (ts, init) = chain();
        let e = Engine::new(&ts, &init, Checks::None).unwrap();
        assert_eq!(e.current_blocks(), vec![vec![0, 1], vec![2]]);
        // Live states still simulate each other and the dead end simulates
        // everyone, but nothing simulates a dead end from a live block.
        let want: Vec<(State, State)> = vec![
            (0, 0), (0, 1), (1, 0), (1, 1), (2, 0), (2, 1), (2, 2),
        ];
        assert_eq!(e.current_relation().pairs().collect::<Vec<_>>(), want);
        // One block lost pairs, so exactly one node is pending.
        assert_eq!(e.refiners.items().len(), 1);
        let nd = e.refiners.items()[0];
        assert_eq!(e.p.choose_block(nd), e.p.block_of(0));
        let dead_node = e.p.block(e.p.block_of(2)).node;
        assert_eq!(e.p.node(nd).notrel, vec![dead_node]);
    }

    #[test]
    fn init_counts_reachable_blocks_per_representative() {
        let ts = TransitionSystem::new(1, vec![(0, 0)]).unwrap();
        let init = PartitionRelationPair::one_block(1).unwrap();
        let e = Engine::new(&ts, &init, Checks::None).unwrap();
        assert!(e.refiners.is_empty());
        assert_eq!(e.relcount, vec![vec![1]]);
    }

    #[test]
    fn init_with_no_arcs_leaves_identity_rows_pending() {
        let ts = TransitionSystem::new(2, vec![]).unwrap();
        let init = PartitionRelationPair::new(
            2,
            vec![vec![0], vec![1]],
            vec![(0, 0), (1, 1)],
        )
        .unwrap();
        let e = Engine::new(&ts, &init, Checks::None).unwrap();
        assert_eq!(e.refiners.items().len(), 2);
        assert_eq!(e.relcount, vec![vec![0, 0], vec![0, 0]]);
    }

    #[test]
    fn chain_round_reaches_the_simulation_in_one_refine() {
        let (ts, init) = chain();
        let mut e = Engine::new(&ts, &init, Checks::None).unwrap();
        e.sim_update_data().unwrap();
        // rep(live block) = 0 and 0 reaches only the live block, so no
        // counter touches the dead block and nothing decrements.
        assert_eq!(e.relcount[e.p.block_of(0)][e.p.block_of(0)], 1);
        e.split1().unwrap();
        assert_eq!(e.p.num_blocks(), 2, "no zero counter, no split");
        e.split2().unwrap();
        // 1 -> 2 is maximal while 0 -> 1 is not, so the live block divides.
        assert_eq!(e.current_blocks(), vec![vec![0], vec![1], vec![2]]);
        e.refine().unwrap();
        let want = naive_coarsest_simulation(&ts, &StateRelation::full(3)).unwrap();
        assert_eq!(e.current_relation(), want);
    }

    #[test]
    fn zero_counter_triggers_first_split_kind() {
        // 0 -> 2 and 1 -> 3 with singleton targets unrelated: the pending
        // round discovers rep 0 cannot match block {3} and splits {0, 1}.
        let ts = TransitionSystem::new(4, vec![(0, 2), (1, 3)]).unwrap();
        let init = PartitionRelationPair::new(
            4,
            vec![vec![0, 1], vec![2], vec![3]],
            vec![(0, 0), (1, 1), (2, 2)],
        )
        .unwrap();
        let mut e = Engine::new(&ts, &init, Checks::None).unwrap();
        e.sim_update_data().unwrap();
        assert_eq!(e.p.num_blocks(), 3);
        e.split1().unwrap();
        assert_eq!(e.current_blocks(), vec![vec![0], vec![1], vec![2], vec![3]]);
    }

    #[test]
    fn maximality_triggers_second_split_kind() {
        // Same shape but {3}'s states may also be simulated by {2}: no
        // counter reaches zero, yet 0 -> 2 is maximal while 1 -> 3 is not.
        let ts = TransitionSystem::new(4, vec![(0, 2), (1, 3)]).unwrap();
        let init = PartitionRelationPair::new(
            4,
            vec![vec![0, 1], vec![2], vec![3]],
            vec![(0, 0), (1, 1), (2, 2), (2, 1)],
        )
        .unwrap();
        let mut e = Engine::new(&ts, &init, Checks::None).unwrap();
        e.sim_update_data().unwrap();
        e.split1().unwrap();
        assert_eq!(e.p.num_blocks(), 3, "no counter is zero yet");
        e.split2().unwrap();
        assert_eq!(e.current_blocks(), vec![vec![0], vec![1], vec![2], vec![3]]);
        let r = e.current_relation();
        assert_eq!(
            e.current_blocks(),
            oracle::coarsest_block_stable_partition(&ts, &r).unwrap()
        );
    }

    #[test]
    fn chain_runs_to_known_result() {
        let (ts, init) = chain();
        let (pair, stats) = run_with_stats(&ts, &init, Checks::None).unwrap();
        assert_eq!(
            serialize_result(&pair),
            "blocks 3\n0: 0\n1: 1\n2: 2\nrel\n1 0\n2 0\n2 1\nend\n"
        );
        assert_eq!(stats.iterations, 2);
        assert_eq!(stats.final_blocks, 3);
        assert_eq!(stats.nodes_created, 5);
        assert_eq!(stats.relcount_entries, 9);
    }

    #[test]
    fn no_arcs_converges_without_rounds() {
        let ts = TransitionSystem::new(2, vec![]).unwrap();
        let init = PartitionRelationPair::one_block(2).unwrap();
        let (pair, stats) = run_with_stats(&ts, &init, Checks::None).unwrap();
        assert_eq!(stats.iterations, 0);
        assert_eq!(serialize_result(&pair), "blocks 1\n0: 0 1\nrel\nend\n");
    }

    #[test]
    fn shared_target_keeps_block_together() {
        let ts = TransitionSystem::new(3, vec![(0, 2), (1, 2)]).unwrap();
        let init = PartitionRelationPair::one_block(3).unwrap();
        let pair = run(&ts, &init, Checks::None).unwrap();
        assert_eq!(
            serialize_result(&pair),
            "blocks 2\n0: 0 1\n1: 2\nrel\n1 0\nend\n"
        );
    }

    #[test]
    fn full_checks_accept_small_runs() {
        let (ts, init) = chain();
        run(&ts, &init, Checks::Full).unwrap();
        let text = "ts 4\n0 1\n1 2\n2 3\n3 3\n1 0\nend\n";
        let (ts2, init2) = parse_problem(text).unwrap();
        let got = run(&ts2, &init2, Checks::Full).unwrap();
        let want = naive_coarsest_simulation(&ts2, &init2.explicit_relation()).unwrap();
        assert_eq!(got.explicit_relation(), want);
    }

    #[test]
    fn engine_matches_oracle_on_assorted_small_systems() {
        let cases: Vec<(usize, Vec<(State, State)>)> = vec![
            (1, vec![]),
            (2, vec![(0, 1), (1, 0)]),
            (3, vec![(0, 1), (0, 2), (1, 2), (2, 0)]),
            (4, vec![(0, 1), (1, 2), (2, 3)]),
            (4, vec![(0, 1), (2, 3), (1, 0), (3, 2)]),
            (5, vec![(0, 1), (1, 2), (3, 4), (4, 2), (2, 2)]),
        ];
        for (n, arcs) in cases {
            let ts = TransitionSystem::new(n, arcs.clone()).unwrap();
            let init = PartitionRelationPair::one_block(n).unwrap();
            let got = run(&ts, &init, Checks::Full).unwrap();
            let want = naive_coarsest_simulation(&ts, &StateRelation::full(n)).unwrap();
            assert_eq!(got.explicit_relation(), want, "n = {n}, arcs = {arcs:?}");
        }
    }

    #[test]
    fn cascading_splits_reach_the_stable_partition() {
        // The second pending node's split rebuilds a counter column to zero
        // for the first one, so a single pass over the pending nodes would
        // stop too early and lose the pair (1, 3).
        let ts = TransitionSystem::new(4, vec![(0, 0), (1, 2), (3, 1), (3, 2)]).unwrap();
        let init = PartitionRelationPair::new(4, vec![vec![0, 1, 3], vec![2]], vec![]).unwrap();
        let got = run(&ts, &init, Checks::Full).unwrap();
        assert_eq!(
            serialize_result(&got),
            "blocks 4\n0: 0\n1: 1\n2: 2\n3: 3\nrel\n1 3\nend\n"
        );
        let want = naive_coarsest_simulation(&ts, &init.explicit_relation()).unwrap();
        assert_eq!(got.explicit_relation(), want);
    }

    #[test]
    fn restricted_initial_preorder_is_respected() {
        let ts = TransitionSystem::new(4, vec![(0, 1), (2, 3)]).unwrap();
        // Two labelled groups: {0, 2} and {1, 3} may only relate within.
        let init = PartitionRelationPair::new(
            4,
            vec![vec![0, 2], vec![1, 3]],
            vec![(0, 0), (1, 1)],
        )
        .unwrap();
        let got = run(&ts, &init, Checks::Full).unwrap();
        let want = naive_coarsest_simulation(&ts, &init.explicit_relation()).unwrap();
        assert_eq!(got.explicit_relation(), want);
        assert!(got.explicit_relation().contains(0, 2));
        assert!(!got.explicit_relation().contains(0, 1));
    }

    #[test]
    fn shuffled_processing_order_changes_nothing() {
        let ts = TransitionSystem::new(
            6,
            vec![(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (0, 3), (5, 5)],
        )
        .unwrap();
        let init = PartitionRelationPair::one_block(6).unwrap();
        let baseline = serialize_result(&run(&ts, &init, Checks::None).unwrap());
        for seed in 0..8 {
            let mut e = Engine::new(&ts, &init, Checks::None).unwrap();
            e.shuffle_processing_order(seed);
            e.run_to_fixpoint().unwrap();
            assert_eq!(serialize_result(&e.into_pair()), baseline, "seed {seed}");
        }
    }

    #[test]
    fn stats_tallies_are_positive_on_real_work() {
        let (ts, init) = chain();
        let (_, stats) = run_with_stats(&ts, &init, Checks::None).unwrap();
        assert!(stats.loop_total() > 0);
        assert!(stats.work_ratio() <= 16.0);
        assert!(stats.nodes_created <= 2 * stats.final_blocks - 1);
    }
}
