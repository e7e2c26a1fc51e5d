//! k-lane algorithms derived from the k-ported ones: the nodes play the
//! k-ported processors and `k` processors per node serve as the ports.
//!
//! Conventions:
//! - inter-node transfers always land on local index 0 of the receiving node;
//! - the local roots of a node are local indices `0..k`; on the root's node
//!   they are the root followed by the lowest `k - 1` other local indices;
//! - port `q` of a node is served by its `q`-th local root, and in each tree
//!   round the node's sends are assigned to ports in subrange order;
//! - in the final phase local root `q` covers the `q`-th contiguous share of
//!   the remaining `n - k` processors.
//!
//! A node whose subtree is just itself has nothing to forward, so all of its
//! node-local work is deferred to the final phase.

use std::collections::BTreeMap;

use crate::chunk::ChunkSet;
use crate::error::{Error, Result};
use crate::machine::MachineShape;
use crate::schedule::{merge_concurrent, Chunk, Event, OpKind, PhaseKind, Round, Schedule, ScheduleMeta};

use super::local::round_robin_alltoall;
use super::{block, local_bcast, local_scatter, split_range, tree_levels, TreeSend};

fn meta(m: &MachineShape, op: OpKind, k: usize, c: usize, root: Option<usize>) -> ScheduleMeta {
    ScheduleMeta {
        algorithm: "klane",
        op,
        p: m.ranks(),
        nodes: Some(m.nodes()),
        per_node: Some(m.per_node()),
        k,
        c,
        root,
    }
}

fn check(m: &MachineShape, k: usize, root: usize, c: usize) -> Result<()> {
    if c == 0 {
        return Err(Error::InvalidParams("element count c must be positive".into()));
    }
    if k == 0 || k > m.per_node() {
        return Err(Error::InvalidParams(format!("k={k} must lie in 1..={}", m.per_node())));
    }
    m.node_of(root).map_err(|e| Error::InvalidParams(e.to_string()))?;
    Ok(())
}

/// Node-level view shared by the broadcast and scatter constructions.
struct NodeTree<'a> {
    m: &'a MachineShape,
    k: usize,
    root_node: usize,
    root_local: usize,
    levels: Vec<Vec<TreeSend>>,
}

impl<'a> NodeTree<'a> {
    fn new(m: &'a MachineShape, k: usize, root: usize) -> Result<Self> {
        let root_node = m.node_of(root)?;
        Ok(NodeTree {
            m,
            k,
            root_node,
            root_local: m.local_index(root)?,
            levels: tree_levels(m.nodes(), k, root_node),
        })
    }

    /// Local index of the processor that first holds the data on `node`.
    fn holder(&self, node: usize) -> usize {
        if node == self.root_node {
            self.root_local
        } else {
            0
        }
    }

    /// Local indices of the `k` local roots, holder first.
    fn local_roots(&self, node: usize) -> Vec<usize> {
        let holder = self.holder(node);
        std::iter::once(holder)
            .chain((0..self.m.per_node()).filter(|&j| j != holder))
            .take(self.k)
            .collect()
    }

    fn ranks(&self, node: usize, locals: &[usize]) -> Vec<usize> {
        locals.iter().map(|&j| self.m.rank_of(node, j).expect("valid local index")).collect()
    }

    /// Sends of one tree level with their port numbers.
    fn ported(level: &[TreeSend]) -> Vec<(usize, &TreeSend)> {
        let mut next_port: BTreeMap<usize, usize> = BTreeMap::new();
        level
            .iter()
            .map(|s| {
                let q = next_port.entry(s.from).or_default();
                *q += 1;
                (*q - 1, s)
            })
            .collect()
    }

    /// Inter-node round for one tree level.
    fn inter_round(&self, level: &[TreeSend], payload: impl Fn(&TreeSend) -> ChunkSet) -> Round {
        Round::from_events(Self::ported(level).into_iter().map(|(q, s)| {
            let src = self.m.rank_of(s.from, self.local_roots(s.from)[q]).expect("valid port");
            let dst = self.m.rank_of(s.to, 0).expect("valid node");
            Event::new(src, dst, payload(s).iter())
        }))
    }

    /// Nodes that receive in `level` and still have to forward afterwards.
    fn forwarding_receivers(level: &[TreeSend]) -> impl Iterator<Item = &TreeSend> {
        level.iter().filter(|s| s.subrange.len() > 1)
    }
}

/// Bcast through the node tree; see the module docs for rank conventions.
///
/// Phases: root-node spread to the local roots, then per tree level an
/// inter-node round followed by the spread on newly reached forwarding nodes,
/// then the final node-local phase. With `full_node_bcast` the spread on a
/// node covers all `n` processors at once and the final shares are skipped.
pub fn klane_bcast(m: &MachineShape, k: usize, root: usize, c: usize, full_node_bcast: bool) -> Result<Schedule> {
    check(m, k, root, c)?;
    let tree = NodeTree::new(m, k, root)?;
    let data = [Chunk::new(root, 0, c)];
    let whole: ChunkSet = data.into_iter().collect();

    let spread = |node: usize| -> Result<Vec<Round>> {
        if full_node_bcast {
            local_bcast(&m.node_ranks(node)?, tree.holder(node), &data)
        } else {
            local_bcast(&tree.ranks(node, &tree.local_roots(node)), 0, &data)
        }
    };

    let mut spread_done = vec![false; m.nodes()];
    let mut b = Schedule::builder(meta(m, OpKind::Bcast, k, c, Some(root)));
    if m.nodes() > 1 {
        b.phase(PhaseKind::Local, "root-node spread", spread(tree.root_node)?);
        spread_done[tree.root_node] = true;
    }
    let last = tree.levels.len().saturating_sub(1);
    for (l, level) in tree.levels.iter().enumerate() {
        b.phase(PhaseKind::InterNode, "node tree", vec![tree.inter_round(level, |_| whole.clone())]);
        if l < last {
            let mut parts = Vec::new();
            for s in NodeTree::forwarding_receivers(level) {
                parts.push(spread(s.to)?);
                spread_done[s.to] = true;
            }
            b.phase(PhaseKind::Local, "node spread", merge_concurrent(parts));
        }
    }

    let mut finals = Vec::new();
    for (v, &done) in spread_done.iter().enumerate() {
        let mut rounds = Vec::new();
        if !done {
            rounds.extend(spread(v)?);
        }
        if !full_node_bcast {
            let roots = tree.local_roots(v);
            let rest: Vec<usize> = (0..m.per_node()).filter(|j| !roots.contains(j)).collect();
            if !rest.is_empty() {
                let shares = split_range(0, rest.len(), k)?;
                let mut trees = Vec::new();
                for (q, share) in shares.subranges.into_iter().enumerate() {
                    let mut locals = vec![roots[q]];
                    locals.extend(&rest[share]);
                    trees.push(local_bcast(&tree.ranks(v, &locals), 0, &data)?);
                }
                rounds.extend(merge_concurrent(trees));
            }
        }
        finals.push(rounds);
    }
    b.phase(PhaseKind::FinalLocal, "node completion", merge_concurrent(finals));
    Ok(b.build())
}

/// Scatter through the node tree. A node's pending data is the blocks of
/// every rank on the nodes of its subtree. Before forwarding, the holder
/// scatters to each local root exactly what that port will send; the final
/// phase scatters every rank's own block from the holder.
pub fn klane_scatter(m: &MachineShape, k: usize, root: usize, c: usize) -> Result<Schedule> {
    check(m, k, root, c)?;
    let tree = NodeTree::new(m, k, root)?;
    let node_blocks = |node: usize| -> ChunkSet {
        m.node_ranks(node).expect("valid node").into_iter().map(|r| block(root, r, c)).collect()
    };
    let subtree_blocks = |s: &TreeSend| -> ChunkSet {
        let mut set = ChunkSet::new();
        for v in s.subrange.clone() {
            set.union_with(&node_blocks(v));
        }
        set
    };

    // What each port of each node forwards over the whole run.
    let mut port_load: Vec<Vec<ChunkSet>> = vec![vec![ChunkSet::new(); k]; m.nodes()];
    for level in &tree.levels {
        for (q, s) in NodeTree::ported(level) {
            port_load[s.from][q].union_with(&subtree_blocks(s));
        }
    }
    let spread = |node: usize| -> Result<Vec<Round>> {
        let roots = tree.local_roots(node);
        let mut loads = port_load[node][..roots.len()].to_vec();
        // the holder keeps its own port's data
        loads[0] = ChunkSet::new();
        local_scatter(&tree.ranks(node, &roots), 0, &loads)
    };

    let mut b = Schedule::builder(meta(m, OpKind::Scatter, k, c, Some(root)));
    if m.nodes() > 1 {
        b.phase(PhaseKind::Local, "root-node spread", spread(tree.root_node)?);
    }
    let last = tree.levels.len().saturating_sub(1);
    for (l, level) in tree.levels.iter().enumerate() {
        b.phase(PhaseKind::InterNode, "node tree", vec![tree.inter_round(level, subtree_blocks)]);
        if l < last {
            let mut parts = Vec::new();
            for s in NodeTree::forwarding_receivers(level) {
                parts.push(spread(s.to)?);
            }
            b.phase(PhaseKind::Local, "node spread", merge_concurrent(parts));
        }
    }

    let mut finals = Vec::new();
    for v in 0..m.nodes() {
        let ranks = m.node_ranks(v)?;
        let own: Vec<ChunkSet> = ranks.iter().map(|&r| [block(root, r, c)].into_iter().collect()).collect();
        finals.push(local_scatter(&ranks, tree.holder(v), &own)?);
    }
    b.phase(PhaseKind::FinalLocal, "node scatter", merge_concurrent(finals));
    Ok(b.build())
}

/// For each node distance `d = 1..N`, `n` step-rounds in which the
/// processor with local index `j` on node `v` sends its block for local index
/// `(j + s) mod n` on node `(v + d) mod N` straight to that processor; then a
/// node-local alltoall.
pub fn klane_alltoall(m: &MachineShape, c: usize) -> Result<Schedule> {
    if c == 0 {
        return Err(Error::InvalidParams("element count c must be positive".into()));
    }
    let (nodes, n) = (m.nodes(), m.per_node());
    let mut steps = Vec::with_capacity((nodes - 1) * n);
    for d in 1..nodes {
        for s in 0..n {
            let mut events = Vec::with_capacity(nodes * n);
            for v in 0..nodes {
                for j in 0..n {
                    let src = m.rank_of(v, j)?;
                    let dst = m.rank_of((v + d) % nodes, (j + s) % n)?;
                    events.push(Event::new(src, dst, [block(src, dst, c)]));
                }
            }
            steps.push(Round::from_events(events));
        }
    }

    let mut locals = Vec::with_capacity(nodes);
    for v in 0..nodes {
        let ranks = m.node_ranks(v)?;
        locals.push(round_robin_alltoall(&ranks, 1, |a, b| [block(ranks[a], ranks[b], c)].into_iter().collect()));
    }

    let mut b = Schedule::builder(meta(m, OpKind::Alltoall, m.lanes(), c, None));
    b.phase(PhaseKind::InterNode, "node exchange", steps);
    b.phase(PhaseKind::FinalLocal, "node alltoall", merge_concurrent(locals));
    Ok(b.build())
}
