//! Full-lane algorithms: split one collective into `n` sub-collectives that
//! run concurrently over the lane groups, with node-local pre/post phases.

use crate::chunk::ChunkSet;
use crate::error::{Error, Result};
use crate::machine::MachineShape;
use crate::schedule::{merge_concurrent, Chunk, OpKind, PhaseKind, Schedule, ScheduleMeta};

use super::local::round_robin_alltoall;
use super::{block, local_allgather, local_bcast, local_scatter, split_range};

fn meta(m: &MachineShape, op: OpKind, c: usize, root: Option<usize>) -> ScheduleMeta {
    ScheduleMeta {
        algorithm: "fulllane",
        op,
        p: m.ranks(),
        nodes: Some(m.nodes()),
        per_node: Some(m.per_node()),
        k: m.lanes(),
        c,
        root,
    }
}

fn check(m: &MachineShape, root: usize, c: usize) -> Result<()> {
    if c == 0 {
        return Err(Error::InvalidParams("element count c must be positive".into()));
    }
    m.node_of(root).map_err(|e| Error::InvalidParams(e.to_string()))?;
    Ok(())
}

/// Broadcast as scatter on the root node, `n` concurrent lane broadcasts,
/// then an allgather on every node.
///
/// The `c` elements are cut into `n` near-equal intervals, larger ones to
/// lower local indices; when `c < n` the upper local indices get nothing and
/// their lanes stay idle.
pub fn fulllane_bcast(m: &MachineShape, root: usize, c: usize) -> Result<Schedule> {
    check(m, root, c)?;
    let (nodes, n) = (m.nodes(), m.per_node());
    let root_node = m.node_of(root)?;
    let root_local = m.local_index(root)?;

    let split = split_range(0, c, n)?;
    let pieces: Vec<ChunkSet> = (0..n)
        .map(|j| {
            split
                .subranges
                .get(j)
                .map(|r| [Chunk::new(root, r.start, r.end)].into_iter().collect())
                .unwrap_or_default()
        })
        .collect();

    let mut b = Schedule::builder(meta(m, OpKind::Bcast, c, Some(root)));
    b.phase(
        PhaseKind::Local,
        "root-node scatter",
        local_scatter(&m.node_ranks(root_node)?, root_local, &pieces)?,
    );

    let mut lanes = Vec::new();
    for (j, piece) in pieces.iter().enumerate().filter(|(_, p)| !p.is_empty()) {
        lanes.push(local_bcast(&m.lane_group(j)?, root_node, &piece.to_vec())?);
    }
    b.phase(PhaseKind::InterNode, "lane bcast", merge_concurrent(lanes));

    let whole: ChunkSet = [Chunk::new(root, 0, c)].into_iter().collect();
    let mut gathers = Vec::new();
    for v in 0..nodes {
        let held: Vec<ChunkSet> = (0..n)
            .map(|j| if v == root_node && j == root_local { whole.clone() } else { pieces[j].clone() })
            .collect();
        gathers.push(local_allgather(&m.node_ranks(v)?, &held)?);
    }
    b.phase(PhaseKind::FinalLocal, "node allgather", merge_concurrent(gathers));
    Ok(b.build())
}

/// Scatter on the root node into `n` lane problems (local index `j` gets the
/// blocks of every rank with local index `j`), then `n` concurrent scatters
/// over the lane groups.
pub fn fulllane_scatter(m: &MachineShape, root: usize, c: usize) -> Result<Schedule> {
    check(m, root, c)?;
    let (nodes, n) = (m.nodes(), m.per_node());
    let root_node = m.node_of(root)?;
    let root_local = m.local_index(root)?;

    let mut lane_blocks = Vec::with_capacity(n);
    let mut groups = Vec::with_capacity(n);
    for j in 0..n {
        let group = m.lane_group(j)?;
        lane_blocks.push(group.iter().map(|&r| block(root, r, c)).collect::<ChunkSet>());
        groups.push(group);
    }

    let mut b = Schedule::builder(meta(m, OpKind::Scatter, c, Some(root)));
    b.phase(
        PhaseKind::Local,
        "root-node scatter",
        local_scatter(&m.node_ranks(root_node)?, root_local, &lane_blocks)?,
    );

    let mut lanes = Vec::with_capacity(n);
    for group in &groups {
        let own: Vec<ChunkSet> = group.iter().map(|&r| [block(root, r, c)].into_iter().collect()).collect();
        lanes.push(local_scatter(group, root_node, &own)?);
    }
    debug_assert!(groups.iter().all(|g| g.len() == nodes));
    b.phase(PhaseKind::InterNode, "lane scatter", merge_concurrent(lanes));
    Ok(b.build())
}

/// Node-local alltoall that routes every block to the processor whose local
/// index equals the destination's, then `n` concurrent alltoalls over the
/// lane groups carrying per-node combined blocks.
///
/// A block whose source already sits at the destination's local index skips
/// the local hop; all other cross-node blocks travel twice.
pub fn fulllane_alltoall(m: &MachineShape, c: usize) -> Result<Schedule> {
    if c == 0 {
        return Err(Error::InvalidParams("element count c must be positive".into()));
    }
    let (nodes, n) = (m.nodes(), m.per_node());

    let mut locals = Vec::with_capacity(nodes);
    for v in 0..nodes {
        let ranks = m.node_ranks(v)?;
        // position a -> position b: everything a has for local index b, on any node
        let dests: Vec<Vec<usize>> = (0..n).map(|b| m.lane_group(b)).collect::<Result<_>>()?;
        locals.push(round_robin_alltoall(&ranks, 1, |a, b| {
            dests[b].iter().map(|&dst| block(ranks[a], dst, c)).collect()
        }));
    }

    let mut lanes = Vec::with_capacity(n);
    for j in 0..n {
        let group = m.lane_group(j)?;
        let node_ranks: Vec<Vec<usize>> = (0..nodes).map(|v| m.node_ranks(v)).collect::<Result<_>>()?;
        lanes.push(round_robin_alltoall(&group, 1, |v, w| {
            node_ranks[v].iter().map(|&src| block(src, group[w], c)).collect()
        }));
    }

    let mut b = Schedule::builder(meta(m, OpKind::Alltoall, c, None));
    b.phase(PhaseKind::Local, "node alltoall", merge_concurrent(locals));
    b.phase(PhaseKind::InterNode, "lane alltoall", merge_concurrent(lanes));
    Ok(b.build())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::Placement;

    fn shape(nodes: usize, n: usize) -> MachineShape {
        MachineShape::new(nodes, n, 1, Placement::Block).unwrap()
    }

    fn lines(s: &Schedule) -> Vec<Vec<(usize, usize, Vec<Chunk>)>> {
        s.rounds()
            .iter()
            .map(|r| r.events().iter().map(|e| (e.src, e.dst, e.payload().to_vec())).collect())
            .collect()
    }

    #[test]
    fn bcast_two_by_two() {
        let s = fulllane_bcast(&shape(2, 2), 0, 8).unwrap();
        let ch = |lo, hi| vec![Chunk::new(0, lo, hi)];
        assert_eq!(
            lines(&s),
            vec![
                vec![(0, 1, ch(4, 8))],
                vec![(0, 2, ch(0, 4)), (1, 3, ch(4, 8))],
                // rank 0 already holds everything, so only 1 needs its missing half
                vec![(0, 1, ch(0, 4)), (2, 3, ch(0, 4)), (3, 2, ch(4, 8))],
            ]
        );
        assert_eq!(s.comm_rounds(), 3);
        assert_eq!(s.phases().len(), 3);
        assert!(fulllane_bcast(&shape(1, 1), 0, 8).unwrap().rounds().is_empty());
    }

    #[test]
    fn scatter_two_by_two() {
        let m = shape(2, 2);
        let s = fulllane_scatter(&m, 0, 1).unwrap();
        let st = s.stats(&m, Some(0));
        assert_eq!(st.root_node_out_elements, 2);
        assert_eq!(st.comm_rounds, 2);
        assert_eq!(lines(&s)[0], vec![(0, 1, vec![Chunk::new(0, 1, 2), Chunk::new(0, 3, 4)])]);

        let s = fulllane_scatter(&shape(1, 2), 0, 3).unwrap();
        assert_eq!(lines(&s), vec![vec![(0, 1, vec![Chunk::new(0, 3, 6)])]]);
    }

    #[test]
    fn alltoall_routes_through_destination_lane() {
        let m = shape(2, 2);
        let s = fulllane_alltoall(&m, 1).unwrap();
        let b03 = block(0, 3, 1);
        let hops: Vec<(usize, usize)> = s
            .events()
            .filter(|(_, _, e)| e.payload().contains(&b03))
            .map(|(_, _, e)| (e.src, e.dst))
            .collect();
        assert_eq!(hops, vec![(0, 1), (1, 3)]);

        let single = fulllane_alltoall(&shape(1, 2), 1).unwrap();
        assert_eq!(single.comm_rounds(), 1);
        assert_eq!(single.stats(&shape(1, 2), None).off_node_elements, 0);
    }
}
