//! Text format: parsing problem documents and serializing results.
//!
//! A problem document is line oriented. `#` starts a comment, blank lines are
//! ignored. The transition section `ts <n>` / `<u> <v>` lines / `end` is
//! mandatory; it may be followed by `label <q> <text>` lines and by a
//! partition section (`blocks` ... `rel` ... `end`). Explicit blocks win over
//! labels, labels win over the default single block with relation Q x Q.

use crate::error::{Error, Result};
use crate::model::{BlockId, PartitionRelationPair, State, TransitionSystem};

/// Parses a full problem document into a system and an initial pair.
pub fn parse_problem(text: &str) -> Result<(TransitionSystem, PartitionRelationPair)> {
    let lines = meaningful_lines(text);
    let mut p = Parser { lines: &lines, pos: 0 };

    let (header_line, header) = p.next_or("expected 'ts <num_states>'")?;
    let mut toks = header.split_whitespace();
    if toks.next() != Some("ts") {
        return Err(Error::parse(header_line, "expected 'ts <num_states>'"));
    }
    let n = parse_number(toks.next(), header_line, "state count")?;
    if toks.next().is_some() {
        return Err(Error::parse(header_line, "trailing tokens after 'ts <num_states>'"));
    }
    if n == 0 {
        return Err(Error::parse(header_line, "num_states must be positive"));
    }

    let mut arcs = Vec::new();
    loop {
        let (line, text) = p.next_or("missing 'end' of transition section")?;
        if text == "end" {
            break;
        }
        let (u, v) = parse_pair(text, line, "transition")?;
        check_state(u, n, line)?;
        check_state(v, n, line)?;
        arcs.push((u, v));
    }

    let mut labels: Vec<Option<String>> = vec![None; n];
    let mut saw_label = false;
    let mut partition = None;
    while let Some((line, text)) = p.peek() {
        if let Some(rest) = text.strip_prefix("label ") {
            p.pos += 1;
            if partition.is_some() {
                return Err(Error::parse(line, "label lines must precede the blocks section"));
            }
            let mut toks = rest.splitn(2, char::is_whitespace);
            let q = parse_number(toks.next(), line, "state")?;
            check_state(q, n, line)?;
            let value = toks.next().map(str::trim).unwrap_or("");
            if value.is_empty() {
                return Err(Error::parse(line, "expected 'label <state> <text>'"));
            }
            if labels[q].is_some() {
                return Err(Error::parse(line, format!("state {q} labeled twice")));
            }
            labels[q] = Some(value.to_string());
            saw_label = true;
        } else if text == "blocks" || text.starts_with("blocks ") {
            if partition.is_some() {
                return Err(Error::parse(line, "duplicate blocks section"));
            }
            partition = Some(parse_partition_sections(&mut p, n)?);
        } else {
            return Err(Error::parse(line, format!("unexpected line '{text}'")));
        }
    }

    let ts = TransitionSystem::new(n, arcs)
        .map_err(|e| Error::parse(header_line, e.to_string()))?;
    let prp = match partition {
        Some(prp) => prp,
        None if saw_label => label_partition(n, &labels)?,
        None => PartitionRelationPair::one_block(n)?,
    };
    Ok((ts, prp))
}

/// Parses a standalone partition document (`blocks` ... `rel` ... `end`),
/// the grammar `serialize_result` emits.
pub fn parse_partition_document(text: &str, num_states: usize) -> Result<PartitionRelationPair> {
    let lines = meaningful_lines(text);
    let mut p = Parser { lines: &lines, pos: 0 };
    match p.peek() {
        Some((_, t)) if t == "blocks" || t.starts_with("blocks ") => {}
        other => {
            let line = other.map(|(l, _)| l).unwrap_or(1);
            return Err(Error::parse(line, "expected 'blocks' section"));
        }
    }
    let prp = parse_partition_sections(&mut p, num_states)?;
    if let Some((line, text)) = p.peek() {
        return Err(Error::parse(line, format!("unexpected line '{text}'")));
    }
    Ok(prp)
}

/// Canonical text form of a pair: blocks ordered by least state with states
/// ascending, then the non-reflexive rel pairs in ascending order.
pub fn serialize_result(prp: &PartitionRelationPair) -> String {
    let mut out = String::new();
    out.push_str(&format!("blocks {}\n", prp.num_blocks()));
    for (i, block) in prp.blocks().iter().enumerate() {
        out.push_str(&format!("{i}:"));
        for &q in block {
            out.push_str(&format!(" {q}"));
        }
        out.push('\n');
    }
    out.push_str("rel\n");
    for &(a, b) in prp.rel_pairs() {
        if a != b {
            out.push_str(&format!("{a} {b}\n"));
        }
    }
    out.push_str("end\n");
    out
}

/// Renders a quotient system in problem-document form, with a trailing
/// comment block mapping each quotient state to the original block.
pub fn render_quotient_document(quotient: &TransitionSystem, blocks: &[Vec<State>]) -> String {
    let mut out = String::new();
    out.push_str(&format!("ts {}\n", quotient.num_states()));
    for &(u, v) in quotient.arcs() {
        out.push_str(&format!("{u} {v}\n"));
    }
    out.push_str("end\n");
    for (i, block) in blocks.iter().enumerate() {
        let states: Vec<String> = block.iter().map(|q| q.to_string()).collect();
        out.push_str(&format!("# state {i} = {{{}}}\n", states.join(" ")));
    }
    out
}

struct Parser<'a> {
    lines: &'a [(usize, &'a str)],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<(usize, &'a str)> {
        self.lines.get(self.pos).copied()
    }

    fn next_or(&mut self, msg: &str) -> Result<(usize, &'a str)> {
        match self.lines.get(self.pos) {
            Some(&item) => {
                self.pos += 1;
                Ok(item)
            }
            None => {
                let line = self.lines.last().map(|&(l, _)| l + 1).unwrap_or(1);
                Err(Error::parse(line, msg))
            }
        }
    }
}

/// Strips comments and blank lines, keeping 1-based line numbers.
fn meaningful_lines(text: &str) -> Vec<(usize, &str)> {
    text.lines()
        .enumerate()
        .filter_map(|(i, raw)| {
            let line = raw.find('#').map_or(raw, |p| &raw[..p]).trim();
            (!line.is_empty()).then_some((i + 1, line))
        })
        .collect()
}

fn parse_number(tok: Option<&str>, line: usize, what: &str) -> Result<usize> {
    let tok = tok.ok_or_else(|| Error::parse(line, format!("missing {what}")))?;
    tok.parse::<usize>()
        .map_err(|_| Error::parse(line, format!("invalid {what} '{tok}'")))
}

fn parse_pair(text: &str, line: usize, what: &str) -> Result<(usize, usize)> {
    let mut toks = text.split_whitespace();
    let a = parse_number(toks.next(), line, what)?;
    let b = parse_number(toks.next(), line, what)?;
    if toks.next().is_some() {
        return Err(Error::parse(line, format!("trailing tokens in {what} line '{text}'")));
    }
    Ok((a, b))
}

fn check_state(q: usize, n: usize, line: usize) -> Result<()> {
    if q >= n {
        return Err(Error::parse(line, format!("state {q} out of range (num_states = {n})")));
    }
    Ok(())
}

/// Parses `blocks [<count>]` block lines, then an optional `rel` section.
/// Accepts both the input grammar (`blocks ... end` then `rel ... end`) and
/// the serialized form where `rel` directly terminates the block list.
fn parse_partition_sections(p: &mut Parser, n: usize) -> Result<PartitionRelationPair> {
    let (header_line, header) = p.next_or("expected 'blocks'")?;
    let mut toks = header.split_whitespace();
    toks.next(); // "blocks"
    let announced = match toks.next() {
        Some(tok) => Some(parse_number(Some(tok), header_line, "block count")?),
        None => None,
    };
    if toks.next().is_some() {
        return Err(Error::parse(header_line, "trailing tokens after 'blocks'"));
    }

    let mut blocks: Vec<Vec<State>> = Vec::new();
    let mut seen = vec![false; n];
    loop {
        let (line, text) = p.next_or("missing 'end' of blocks section")?;
        if text == "end" {
            break;
        }
        if text == "rel" {
            p.pos -= 1;
            break;
        }
        let (idx_text, states_text) = text
            .split_once(':')
            .ok_or_else(|| Error::parse(line, "expected '<index>: <state> ...'"))?;
        let idx = parse_number(Some(idx_text.trim()), line, "block index")?;
        if idx != blocks.len() {
            return Err(Error::parse(
                line,
                format!("block index {idx} out of order (expected {})", blocks.len()),
            ));
        }
        let mut block = Vec::new();
        for tok in states_text.split_whitespace() {
            let q = parse_number(Some(tok), line, "state")?;
            check_state(q, n, line)?;
            if seen[q] {
                return Err(Error::parse(line, format!("state {q} appears in two blocks")));
            }
            seen[q] = true;
            block.push(q);
        }
        if block.is_empty() {
            return Err(Error::parse(line, format!("block {idx} is empty")));
        }
        blocks.push(block);
    }
    if let Some(k) = announced {
        if k != blocks.len() {
            return Err(Error::parse(
                header_line,
                format!("blocks header announces {k} blocks but {} listed", blocks.len()),
            ));
        }
    }
    if let Some(q) = seen.iter().position(|&s| !s) {
        return Err(Error::parse(header_line, format!("state {q} is not covered by any block")));
    }

    let mut rel: Vec<(BlockId, BlockId)> = Vec::new();
    let mut rel_line = header_line;
    if let Some((line, "rel")) = p.peek() {
        p.pos += 1;
        rel_line = line;
        loop {
            let (line, text) = p.next_or("missing 'end' of rel section")?;
            if text == "end" {
                break;
            }
            let (a, b) = parse_pair(text, line, "rel pair")?;
            for idx in [a, b] {
                if idx >= blocks.len() {
                    return Err(Error::parse(
                        line,
                        format!("block index {idx} out of range ({} blocks)", blocks.len()),
                    ));
                }
            }
            rel.push((a, b));
        }
    }

    PartitionRelationPair::new(n, blocks, rel).map_err(|e| Error::parse(rel_line, e.to_string()))
}

fn label_partition(n: usize, labels: &[Option<String>]) -> Result<PartitionRelationPair> {
    let mut classes: Vec<(&Option<String>, Vec<State>)> = Vec::new();
    for (q, label) in labels.iter().enumerate() {
        match classes.iter_mut().find(|(l, _)| *l == label) {
            Some((_, class)) => class.push(q),
            None => classes.push((label, vec![q])),
        }
    }
    let blocks = classes.into_iter().map(|(_, class)| class).collect();
    PartitionRelationPair::new(n, blocks, [])
}
