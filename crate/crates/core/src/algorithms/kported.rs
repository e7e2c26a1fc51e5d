//! Divide-and-conquer broadcast and scatter, and round-robin alltoall, for
//! the k-ported model.

use crate::chunk::ChunkSet;
use crate::error::{Error, Result};
use crate::schedule::{Chunk, Event, OpKind, PhaseKind, Round, Schedule, ScheduleMeta};

use super::local::round_robin_alltoall;
use super::{block, tree_levels};

fn check(p: usize, k: usize, root: usize, c: usize) -> Result<()> {
    if p == 0 || k == 0 || c == 0 {
        return Err(Error::InvalidParams(format!("p={p}, k={k}, c={c} must all be positive")));
    }
    if root >= p {
        return Err(Error::InvalidParams(format!("root {root} out of range for p={p}")));
    }
    Ok(())
}

fn meta(algorithm: &'static str, op: OpKind, p: usize, k: usize, c: usize, root: Option<usize>) -> ScheduleMeta {
    ScheduleMeta { algorithm, op, p, nodes: None, per_node: None, k, c, root }
}

/// Every local root forwards all `c` elements to the new local root of each
/// other subrange. `ceil(log_{k+1} p)` rounds.
pub fn kported_bcast(p: usize, k: usize, root: usize, c: usize) -> Result<Schedule> {
    check(p, k, root, c)?;
    let data = Chunk::new(root, 0, c);
    let rounds = tree_levels(p, k, root)
        .into_iter()
        .map(|level| Round::from_events(level.into_iter().map(|s| Event::new(s.from, s.to, [data]))))
        .collect();
    let mut b = Schedule::builder(meta("kported", OpKind::Bcast, p, k, c, Some(root)));
    b.phase(PhaseKind::Flat, "tree", rounds);
    Ok(b.build())
}

/// Same tree as [`kported_bcast`]; the transfer into subrange `[s, e)`
/// carries blocks `b_s .. b_{e-1}`, i.e. root elements `[s*c, e*c)`.
pub fn kported_scatter(p: usize, k: usize, root: usize, c: usize) -> Result<Schedule> {
    check(p, k, root, c)?;
    let rounds = tree_levels(p, k, root)
        .into_iter()
        .map(|level| {
            Round::from_events(level.into_iter().map(|s| {
                let blocks = Chunk::new(root, s.subrange.start * c, s.subrange.end * c);
                Event::new(s.from, s.to, [blocks])
            }))
        })
        .collect();
    let mut b = Schedule::builder(meta("kported", OpKind::Scatter, p, k, c, Some(root)));
    b.phase(PhaseKind::Flat, "tree", rounds);
    Ok(b.build())
}

/// Each rank sends its blocks to the `k` next ranks per round;
/// `ceil((p - 1) / k)` rounds, the own block stays in place.
pub fn kported_alltoall(p: usize, k: usize, c: usize) -> Result<Schedule> {
    check(p, k, 0, c)?;
    let ranks: Vec<usize> = (0..p).collect();
    let rounds = round_robin_alltoall(&ranks, k, |i, j| -> ChunkSet { [block(i, j, c)].into_iter().collect() });
    let mut b = Schedule::builder(meta("kported", OpKind::Alltoall, p, k, c, None));
    b.phase(PhaseKind::Flat, "round-robin", rounds);
    Ok(b.build())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(s: &Schedule) -> Vec<Vec<(usize, usize)>> {
        s.rounds().iter().map(|r| r.events().iter().map(|e| (e.src, e.dst)).collect()).collect()
    }

    #[test]
    fn bcast_traces() {
        let s = kported_bcast(4, 1, 0, 3).unwrap();
        assert_eq!(pairs(&s), vec![vec![(0, 2)], vec![(0, 1), (2, 3)]]);
        assert!(s.events().all(|(_, _, e)| e.payload() == [Chunk::new(0, 0, 3)]));

        let s = kported_bcast(4, 1, 2, 3).unwrap();
        assert_eq!(pairs(&s), vec![vec![(2, 0)], vec![(0, 1), (2, 3)]]);

        assert!(kported_bcast(1, 3, 0, 3).unwrap().rounds().is_empty());
        assert!(kported_bcast(4, 1, 4, 3).is_err());
        assert!(kported_bcast(4, 0, 0, 3).is_err());
    }

    #[test]
    fn scatter_traces() {
        let s = kported_scatter(4, 1, 0, 1).unwrap();
        assert_eq!(pairs(&s), vec![vec![(0, 2)], vec![(0, 1), (2, 3)]]);
        let payloads: Vec<_> = s.events().map(|(_, _, e)| e.payload().to_vec()).collect();
        assert_eq!(
            payloads,
            vec![vec![Chunk::new(0, 2, 4)], vec![Chunk::new(0, 1, 2)], vec![Chunk::new(0, 3, 4)]]
        );

        let s = kported_scatter(2, 5, 1, 7).unwrap();
        assert_eq!(pairs(&s), vec![vec![(1, 0)]]);
        assert_eq!(s.rounds()[0].events()[0].size(), 7);
    }

    #[test]
    fn alltoall_traces() {
        let s = kported_alltoall(4, 1, 1).unwrap();
        assert_eq!(s.rounds().len(), 3);
        assert_eq!(pairs(&s)[0], vec![(0, 1), (1, 2), (2, 3), (3, 0)]);

        let s = kported_alltoall(4, 3, 1).unwrap();
        assert_eq!(s.rounds().len(), 1);
        assert_eq!(s.rounds()[0].len(), 12);
        assert!(s.events().all(|(_, _, e)| e.size() == 1));

        assert!(kported_alltoall(1, 2, 5).unwrap().rounds().is_empty());
    }

    #[test]
    fn alltoall_covers_each_pair_once() {
        for p in 1..12 {
            for k in 1..6 {
                let s = kported_alltoall(p, k, 2).unwrap();
                let mut seen = vec![0; p * p];
                for (_, _, e) in s.events() {
                    assert_eq!(e.payload(), &[block(e.src, e.dst, 2)]);
                    seen[e.src * p + e.dst] += 1;
                }
                for i in 0..p {
                    for j in 0..p {
                        assert_eq!(seen[i * p + j], usize::from(i != j));
                    }
                }
                assert_eq!(s.comm_rounds(), (p - 1).div_ceil(k));
            }
        }
    }
}
