//! Seeded random problem instances.
//!
//! Documents come out byte-identical for equal configurations, so test
//! corpora can be named by seed alone. The stream cipher RNG is fixed and
//! all sampling goes through explicit modulo reduction; no platform or
//! library quirk can shift the output.

use crate::error::{Error, Result};
use crate::format::parse_problem;
use crate::model::{PartitionRelationPair, TransitionSystem};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use std::collections::HashMap;
use std::fmt::Write as _;

/// Shape of the generated initial preorder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PreorderKind {
    /// Everything may simulate everything: the document carries no blocks.
    Universal,
    /// States get labels from an alphabet of the given size; only equal
    /// labels may simulate each other.
    Labels { alphabet: usize },
    /// States are cut into the given number of classes and a random order
    /// between classes is emitted as an explicit blocks/rel section.
    Explicit { classes: usize },
}

#[derive(Debug, Clone, Copy)]
pub struct GenConfig {
    pub seed: u64,
    pub num_states: usize,
    pub num_arcs: usize,
    pub preorder: PreorderKind,
}

fn pick(rng: &mut ChaCha8Rng, bound: usize) -> usize {
    (rng.next_u64() % bound as u64) as usize
}

/// `count` distinct values from `0..total`, by a sparse Fisher-Yates over
/// the virtual index array.
fn sample_distinct(rng: &mut ChaCha8Rng, total: usize, count: usize) -> Vec<usize> {
    let mut moved: HashMap<usize, usize> = HashMap::new();
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let j = i + pick(rng, total - i);
        let at_j = moved.get(&j).copied().unwrap_or(j);
        let at_i = moved.get(&i).copied().unwrap_or(i);
        out.push(at_j);
        moved.insert(j, at_i);
    }
    out
}

fn shuffled_states(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut states: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = pick(rng, i + 1);
        states.swap(i, j);
    }
    states
}

/// Renders the instance for `config` as a problem document.
pub fn generate(config: &GenConfig) -> Result<String> {
    let n = config.num_states;
    if n == 0 {
        return Err(Error::invalid("num_states must be positive"));
    }
    if config.num_arcs > n * n {
        return Err(Error::invalid(format!(
            "cannot place {} distinct arcs over {n} states",
            config.num_arcs
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut arcs: Vec<(usize, usize)> = sample_distinct(&mut rng, n * n, config.num_arcs)
        .into_iter()
        .map(|idx| (idx / n, idx % n))
        .collect();
    arcs.sort_unstable();
    let mut doc = String::new();
    writeln!(doc, "ts {n}").unwrap();
    for (u, v) in arcs {
        writeln!(doc, "{u} {v}").unwrap();
    }
    doc.push_str("end\n");
    match config.preorder {
        PreorderKind::Universal => {}
        PreorderKind::Labels { alphabet } => {
            if alphabet == 0 || alphabet > 26 {
                return Err(Error::invalid("label alphabet size must be in 1..=26"));
            }
            for q in 0..n {
                let letter = (b'a' + pick(&mut rng, alphabet) as u8) as char;
                writeln!(doc, "label {q} {letter}").unwrap();
            }
        }
        PreorderKind::Explicit { classes } => {
            if classes == 0 || classes > n {
                return Err(Error::invalid(format!(
                    "cannot cut {n} states into {classes} classes"
                )));
            }
            let states = shuffled_states(&mut rng, n);
            let mut cuts = sample_distinct(&mut rng, n - 1, classes - 1)
                .into_iter()
                .map(|c| c + 1)
                .collect::<Vec<_>>();
            cuts.sort_unstable();
            cuts.push(n);
            writeln!(doc, "blocks {classes}").unwrap();
            let mut start = 0;
            for (i, &cut) in cuts.iter().enumerate() {
                let mut members = states[start..cut].to_vec();
                members.sort_unstable();
                let listed: Vec<String> = members.iter().map(|q| q.to_string()).collect();
                writeln!(doc, "{i}: {}", listed.join(" ")).unwrap();
                start = cut;
            }
            // Random order between classes, oriented along class indexes so
            // it stays acyclic, then closed under transitivity.
            let mut above = vec![vec![false; classes]; classes];
            for c in 0..classes {
                for d in c + 1..classes {
                    if pick(&mut rng, 10) < 3 {
                        above[c][d] = true;
                    }
                }
            }
            for m in 0..classes {
                for c in 0..classes {
                    for d in 0..classes {
                        if above[c][m] && above[m][d] {
                            above[c][d] = true;
                        }
                    }
                }
            }
            doc.push_str("rel\n");
            for c in 0..classes {
                for d in 0..classes {
                    if above[c][d] {
                        writeln!(doc, "{c} {d}").unwrap();
                    }
                }
            }
            doc.push_str("end\n");
        }
    }
    Ok(doc)
}

/// Generates and immediately parses, handing back a ready instance.
pub fn generate_instance(config: &GenConfig) -> Result<(TransitionSystem, PartitionRelationPair)> {
    parse_problem(&generate(config)?)
}
