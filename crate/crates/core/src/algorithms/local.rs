//! Collective primitives over an explicit ordered list of ranks. They return
//! bare rounds so callers can run several of them side by side.

use crate::chunk::ChunkSet;
use crate::error::{Error, Result};
use crate::schedule::{Chunk, Event, Round};

use super::tree_levels;

fn check(ranks: &[usize], root_pos: usize) -> Result<()> {
    if ranks.is_empty() {
        return Err(Error::InvalidParams("empty rank list".into()));
    }
    if root_pos >= ranks.len() {
        return Err(Error::InvalidParams(format!(
            "root position {root_pos} out of range for {} ranks",
            ranks.len()
        )));
    }
    Ok(())
}

/// Binomial-tree broadcast of `payload` from `ranks[root_pos]`.
pub fn local_bcast(ranks: &[usize], root_pos: usize, payload: &[Chunk]) -> Result<Vec<Round>> {
    check(ranks, root_pos)?;
    Ok(tree_levels(ranks.len(), 1, root_pos)
        .into_iter()
        .map(|level| {
            Round::from_events(
                level
                    .into_iter()
                    .map(|s| Event::new(ranks[s.from], ranks[s.to], payload.iter().copied())),
            )
        })
        .collect())
}

/// Binomial-tree scatter from `ranks[root_pos]`; `blocks[i]` is what
/// `ranks[i]` must end up with. A transfer whose subtree needs nothing is
/// omitted.
pub fn local_scatter(ranks: &[usize], root_pos: usize, blocks: &[ChunkSet]) -> Result<Vec<Round>> {
    check(ranks, root_pos)?;
    if blocks.len() != ranks.len() {
        return Err(Error::InvalidParams("one block set per rank required".into()));
    }
    Ok(tree_levels(ranks.len(), 1, root_pos)
        .into_iter()
        .map(|level| {
            Round::from_events(level.into_iter().map(|s| {
                let payload = s.subrange.clone().flat_map(|i| blocks[i].iter());
                Event::new(ranks[s.from], ranks[s.to], payload)
            }))
        })
        .collect())
}

/// Dissemination allgather: in the round with distance `d`, position `i`
/// forwards to `i + d` whatever the receiver does not hold yet. Takes
/// `ceil(log2 |ranks|)` rounds; every rank ends with the union of `held`.
pub fn local_allgather(ranks: &[usize], held: &[ChunkSet]) -> Result<Vec<Round>> {
    check(ranks, 0)?;
    if held.len() != ranks.len() {
        return Err(Error::InvalidParams("one holding per rank required".into()));
    }
    let m = ranks.len();
    let mut held = held.to_vec();
    let mut rounds = Vec::new();
    let mut dist = 1;
    while dist < m {
        let sends: Vec<(usize, ChunkSet)> =
            (0..m).map(|i| ((i + dist) % m, held[i].difference(&held[(i + dist) % m]))).collect();
        let mut events = Vec::new();
        for (i, (to, payload)) in sends.into_iter().enumerate() {
            if payload.is_empty() {
                continue;
            }
            held[to].union_with(&payload);
            events.push(Event::new(ranks[i], ranks[to], payload.iter()));
        }
        rounds.push(Round::from_events(events));
        dist *= 2;
    }
    Ok(rounds)
}

/// Round-robin personalized exchange with up to `ports` sends per rank per
/// round: in round `t`, position `i` sends `blocks(i, j)` to
/// `j = i + t*ports + d` (mod len) for `d = 1..=ports`. Takes
/// `ceil((len - 1) / ports)` rounds.
pub(crate) fn round_robin_alltoall(
    ranks: &[usize],
    ports: usize,
    blocks: impl Fn(usize, usize) -> ChunkSet,
) -> Vec<Round> {
    let m = ranks.len();
    if m <= 1 {
        return Vec::new();
    }
    let offsets: Vec<usize> = (1..m).collect();
    offsets
        .chunks(ports)
        .map(|group| {
            Round::from_events(group.iter().flat_map(|&off| {
                let blocks = &blocks;
                (0..m).map(move |i| {
                    let j = (i + off) % m;
                    Event::new(ranks[i], ranks[j], blocks(i, j).iter())
                })
            }))
        })
        .collect()
}

/// One-ported round-robin alltoall; `blocks[i][j]` goes from `ranks[i]` to
/// `ranks[j]`.
pub fn local_alltoall(ranks: &[usize], blocks: &[Vec<ChunkSet>]) -> Result<Vec<Round>> {
    check(ranks, 0)?;
    if blocks.len() != ranks.len() || blocks.iter().any(|row| row.len() != ranks.len()) {
        return Err(Error::InvalidParams("block matrix must be |ranks| x |ranks|".into()));
    }
    Ok(round_robin_alltoall(ranks, 1, |i, j| blocks[i][j].clone()))
}
