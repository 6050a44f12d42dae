//! Brute-force reference implementations over dense relations. Everything
//! here favors being obviously correct over being fast; sizes are expected
//! to stay small (the CLI caps verification at 64 states by default).

use crate::error::{Error, Result};
use crate::model::{State, StateRelation, TransitionSystem};

/// Game semantics of simulation: for every (q, q') in `s`, each move of q is
/// matched by a move of q' staying inside `s`.
pub fn is_simulation(ts: &TransitionSystem, s: &StateRelation) -> bool {
    s.pairs().all(|(q, q2)| {
        ts.successors(q)
            .iter()
            .all(|&q1| ts.successors(q2).iter().any(|&q3| s.contains(q1, q3)))
    })
}

/// Greatest simulation included in `init`, by repeated deletion sweeps:
/// row-major scan, delete a pair on its first unmatched move, repeat until a
/// clean pass.
pub fn naive_coarsest_simulation(
    ts: &TransitionSystem,
    init: &StateRelation,
) -> Result<StateRelation> {
    if !init.is_preorder() {
        return Err(Error::invalid("initial relation is not a preorder"));
    }
    let n = ts.num_states();
    let mut rel = init.clone();
    loop {
        let mut changed = false;
        for q in 0..n {
            for q2 in 0..n {
                if rel.contains(q, q2) {
                    let matched = ts.successors(q).iter().all(|&q1| {
                        ts.successors(q2).iter().any(|&q3| rel.contains(q1, q3))
                    });
                    if !matched {
                        rel.remove(q, q2);
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            return Ok(rel);
        }
    }
}

/// Transitions q -> q' such that no transition q -> q'' leaves [q']_r strictly
/// above q' (every q'' with q' r q'' lands back in q's class of r).
pub fn maximal_transitions(ts: &TransitionSystem, r: &StateRelation) -> Vec<(State, State)> {
    ts.arcs()
        .iter()
        .copied()
        .filter(|&(q, q1)| {
            ts.successors(q)
                .iter()
                .all(|&q2| !r.contains(q1, q2) || r.contains(q2, q1))
        })
        .collect()
}

/// Stability of `r` relative to the coarser preorder `u`:
/// r composed with the predecessor relation stays below pred composed with u.
pub fn is_stable(ts: &TransitionSystem, r: &StateRelation, u: &StateRelation) -> bool {
    let pred = StateRelation::predecessor_relation(ts);
    r.compose(&pred).is_subset_of(&pred.compose(u))
}

/// Block-stability of the partition `blocks` relative to preorder `r`:
/// states of a block agree on membership in every predecessor set of r(b).
/// Also cross-checks the two equivalent relational formulations.
pub fn is_block_stable(
    ts: &TransitionSystem,
    blocks: &[Vec<State>],
    r: &StateRelation,
) -> Result<bool> {
    let n = ts.num_states();
    if !r.is_preorder() {
        return Err(Error::invalid("r is not a preorder"));
    }
    let p = equivalence_of_blocks(n, blocks)?;
    for (a, b) in p.pairs() {
        if !r.contains(a, b) {
            return Err(Error::invalid(format!(
                "partition not included in r: states {a} and {b} share a block but ({a}, {b}) is missing"
            )));
        }
    }

    let mut membership_form = true;
    'outer: for b in 0..n {
        let target = predecessors_of_image(ts, r, b);
        for block in blocks {
            if block.iter().any(|&d| target[d]) && !block.iter().all(|&d| target[d]) {
                membership_form = false;
                break 'outer;
            }
        }
    }

    let pred = StateRelation::predecessor_relation(ts);
    let stability_form = p.compose(&pred).is_subset_of(&pred.compose(r));

    let max_pred =
        StateRelation::from_pairs(n, maximal_transitions(ts, r).into_iter().map(|(u, v)| (v, u)));
    let classes = class_relation(r);
    let maximal_form = p.compose(&max_pred).is_subset_of(&pred.compose(&classes));

    assert_eq!(membership_form, stability_form, "block-stability formulations disagree");
    assert_eq!(membership_form, maximal_form, "maximal-transition formulation disagrees");
    Ok(membership_form)
}

/// Coarsest block-stable partition for `r`: start from r's blocks and split
/// on every predecessor set of r(b) until a clean pass.
pub fn coarsest_block_stable_partition(
    ts: &TransitionSystem,
    r: &StateRelation,
) -> Result<Vec<Vec<State>>> {
    if !r.is_preorder() {
        return Err(Error::invalid("r is not a preorder"));
    }
    let n = ts.num_states();
    let mut blocks = preorder_blocks(r);
    loop {
        let mut changed = false;
        for b in 0..n {
            let target = predecessors_of_image(ts, r, b);
            let mut next = Vec::with_capacity(blocks.len());
            for block in blocks {
                let (inside, outside): (Vec<State>, Vec<State>) =
                    block.iter().copied().partition(|&d| target[d]);
                if !inside.is_empty() && !outside.is_empty() {
                    changed = true;
                    next.push(inside);
                    next.push(outside);
                } else if inside.is_empty() {
                    next.push(outside);
                } else {
                    next.push(inside);
                }
            }
            blocks = next;
        }
        if !changed {
            blocks.sort_by_key(|b| b[0]);
            return Ok(blocks);
        }
    }
}

/// One refinement round and the cross-checks it was validated against.
pub struct RefineOutcome {
    /// The refined preorder: r minus the deleted pairs.
    pub v: StateRelation,
    /// Coarsest r-block-stable partition used for the block products.
    pub partition: Vec<Vec<State>>,
    /// Deleted pairs via the block-product formula over plain transitions.
    pub notrel_product: StateRelation,
    /// Deleted pairs via the pairwise formula over maximal transitions.
    pub notrel_maximal: StateRelation,
}

/// Refines the u-stable preorder `r` once, deleting the pairs that can no
/// longer be part of a simulation, and verifies the round's guarantees:
/// both deletion formulas agree, v is an r-stable preorder, every simulation
/// inside r survives structurally, and v's blocks are the partition's.
pub fn refine_oracle(
    ts: &TransitionSystem,
    r: &StateRelation,
    u: &StateRelation,
) -> Result<RefineOutcome> {
    let n = ts.num_states();
    if !r.is_preorder() || !u.is_preorder() {
        return Err(Error::invalid("r and u must be preorders"));
    }
    if !r.is_subset_of(u) {
        return Err(Error::invalid("r must be included in u"));
    }
    if !is_stable(ts, r, u) {
        return Err(Error::invalid("r is not u-stable"));
    }
    let notrel = u.minus(r);
    let partition = coarsest_block_stable_partition(ts, r)?;
    let mut class_of = vec![0usize; n];
    for (i, block) in partition.iter().enumerate() {
        for &q in block {
            class_of[q] = i;
        }
    }

    // Per anchor state b: who can reach NotRel(b) / r(b), via all transitions.
    let mut pred_notrel = Vec::with_capacity(n);
    let mut pred_r = Vec::with_capacity(n);
    for b in 0..n {
        pred_notrel.push(predecessors_of_image(ts, &notrel, b));
        pred_r.push(predecessors_of_image(ts, r, b));
    }

    let mut notrel_product = StateRelation::empty(n);
    for c in 0..n {
        for d in 0..n {
            if !r.contains(c, d) {
                continue;
            }
            let hit = ts
                .successors(c)
                .iter()
                .any(|&b| pred_notrel[b][d] && !pred_r[b][d]);
            if hit {
                for &c2 in &partition[class_of[c]] {
                    for &d2 in &partition[class_of[d]] {
                        notrel_product.insert(c2, d2);
                    }
                }
            }
        }
    }

    // Same anchors restricted to r-maximal transitions, pairwise.
    let maximal = maximal_transitions(ts, r);
    let mut max_succ: Vec<Vec<State>> = vec![Vec::new(); n];
    for &(q, q1) in &maximal {
        max_succ[q].push(q1);
    }
    let reaches_image_maximal = |d: usize, rel: &StateRelation, b: usize| {
        max_succ[d].iter().any(|&y| rel.contains(b, y))
    };
    let mut notrel_maximal = StateRelation::empty(n);
    for c in 0..n {
        for d in 0..n {
            if !r.contains(c, d) {
                continue;
            }
            let hit = max_succ[c].iter().any(|&b| {
                reaches_image_maximal(d, &notrel, b) && !reaches_image_maximal(d, r, b)
            });
            if hit {
                notrel_maximal.insert(c, d);
            }
        }
    }

    if notrel_product != notrel_maximal {
        return Err(Error::internal(
            "refinement formulas disagree: block products differ from maximal-transition pairs",
        ));
    }
    let v = r.minus(&notrel_product);
    if !is_stable(ts, &v, r) {
        return Err(Error::internal("refined relation is not r-stable"));
    }
    if !v.is_preorder() {
        return Err(Error::internal("refined relation is not a preorder"));
    }
    if preorder_blocks(&v) != partition {
        return Err(Error::internal("blocks of the refined relation differ from the partition"));
    }
    Ok(RefineOutcome { v, partition, notrel_product, notrel_maximal })
}

/// Blocks of a preorder: classes of mutual relation, ordered by least state.
pub fn preorder_blocks(r: &StateRelation) -> Vec<Vec<State>> {
    let n = r.num_states();
    let mut blocks: Vec<Vec<State>> = Vec::new();
    let mut assigned = vec![false; n];
    for q in 0..n {
        if assigned[q] {
            continue;
        }
        let class: Vec<State> =
            (q..n).filter(|&p| r.contains(q, p) && r.contains(p, q)).collect();
        for &p in &class {
            assigned[p] = true;
        }
        blocks.push(class);
    }
    blocks
}

/// The equivalence relation whose classes are `blocks`.
fn equivalence_of_blocks(n: usize, blocks: &[Vec<State>]) -> Result<StateRelation> {
    let mut seen = vec![false; n];
    let mut p = StateRelation::empty(n);
    for block in blocks {
        for &a in block {
            if a >= n || seen[a] {
                return Err(Error::invalid("blocks do not partition the state space"));
            }
            seen[a] = true;
            for &b in block {
                p.insert(a, b);
            }
        }
    }
    if seen.iter().any(|&s| !s) {
        return Err(Error::invalid("blocks do not partition the state space"));
    }
    Ok(p)
}

/// r restricted to mutually related pairs: the classes of r as a relation.
fn class_relation(r: &StateRelation) -> StateRelation {
    let mut out = StateRelation::empty(r.num_states());
    for (a, b) in r.pairs() {
        if r.contains(b, a) {
            out.insert(a, b);
        }
    }
    out
}

/// Membership vector of the set of states with a transition into rel(b).
fn predecessors_of_image(ts: &TransitionSystem, rel: &StateRelation, b: State) -> Vec<bool> {
    let mut out = vec![false; ts.num_states()];
    for y in 0..ts.num_states() {
        if rel.contains(b, y) {
            for &d in ts.predecessors(y) {
                out[d] = true;
            }
        }
    }
    out
}
