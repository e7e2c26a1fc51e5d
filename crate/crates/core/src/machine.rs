//! Cluster topology: `N` nodes of `n` processors each, `k` lanes per node.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How global ranks are laid out over nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    /// Consecutive ranks share a node: node = r / n.
    #[default]
    Block,
    /// Ranks are dealt to nodes in turn: node = r mod N.
    RoundRobin,
}

impl fmt::Display for Placement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Placement::Block => f.write_str("block"),
            Placement::RoundRobin => f.write_str("rr"),
        }
    }
}

impl FromStr for Placement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "block" => Ok(Placement::Block),
            "rr" | "roundrobin" | "round-robin" => Ok(Placement::RoundRobin),
            other => Err(Error::InvalidParams(format!("unknown placement '{other}'"))),
        }
    }
}

/// An immutable, validated cluster shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MachineShape {
    nodes: usize,
    per_node: usize,
    lanes: usize,
    placement: Placement,
}

impl MachineShape {
    pub fn new(nodes: usize, per_node: usize, lanes: usize, placement: Placement) -> Result<Self> {
        if nodes == 0 || per_node == 0 || lanes == 0 {
            return Err(Error::InvalidShape(format!(
                "counts must be positive (N={nodes}, n={per_node}, k={lanes})"
            )));
        }
        if lanes > per_node {
            return Err(Error::InvalidShape(format!(
                "k={lanes} lanes exceeds n={per_node} processors per node"
            )));
        }
        nodes
            .checked_mul(per_node)
            .ok_or_else(|| Error::InvalidShape("N*n overflows".into()))?;
        Ok(MachineShape { nodes, per_node, lanes, placement })
    }

    /// Number of compute nodes, `N`.
    pub fn nodes(&self) -> usize {
        self.nodes
    }

    /// Processors per node, `n`.
    pub fn per_node(&self) -> usize {
        self.per_node
    }

    /// Lanes per node, `k`.
    pub fn lanes(&self) -> usize {
        self.lanes
    }

    pub fn placement(&self) -> Placement {
        self.placement
    }

    /// Total number of ranks, `p = N * n`.
    pub fn ranks(&self) -> usize {
        self.nodes * self.per_node
    }

    /// Same topology with a different lane count.
    pub fn with_lanes(&self, lanes: usize) -> Result<Self> {
        MachineShape::new(self.nodes, self.per_node, lanes, self.placement)
    }

    fn check_rank(&self, rank: usize) -> Result<()> {
        if rank < self.ranks() {
            Ok(())
        } else {
            Err(Error::RankOutOfRange { rank, p: self.ranks() })
        }
    }

    pub fn node_of(&self, rank: usize) -> Result<usize> {
        self.check_rank(rank)?;
        Ok(match self.placement {
            Placement::Block => rank / self.per_node,
            Placement::RoundRobin => rank % self.nodes,
        })
    }

    pub fn local_index(&self, rank: usize) -> Result<usize> {
        self.check_rank(rank)?;
        Ok(match self.placement {
            Placement::Block => rank % self.per_node,
            Placement::RoundRobin => rank / self.nodes,
        })
    }

    /// Inverse of `(node_of, local_index)`.
    pub fn rank_of(&self, node: usize, local: usize) -> Result<usize> {
        if node >= self.nodes {
            return Err(Error::IndexOutOfRange { index: node, n: self.nodes });
        }
        if local >= self.per_node {
            return Err(Error::IndexOutOfRange { index: local, n: self.per_node });
        }
        Ok(match self.placement {
            Placement::Block => node * self.per_node + local,
            Placement::RoundRobin => local * self.nodes + node,
        })
    }

    /// All ranks sharing local index `local`, one per node, ordered by node id.
    pub fn lane_group(&self, local: usize) -> Result<Vec<usize>> {
        if local >= self.per_node {
            return Err(Error::IndexOutOfRange { index: local, n: self.per_node });
        }
        (0..self.nodes).map(|v| self.rank_of(v, local)).collect()
    }

    /// The ranks on `node`, ordered by local index.
    pub fn node_ranks(&self, node: usize) -> Result<Vec<usize>> {
        if node >= self.nodes {
            return Err(Error::IndexOutOfRange { index: node, n: self.nodes });
        }
        (0..self.per_node).map(|j| self.rank_of(node, j)).collect()
    }

    pub(crate) fn same_node(&self, a: usize, b: usize) -> bool {
        // Callers have validated ranks.
        match self.placement {
            Placement::Block => a / self.per_node == b / self.per_node,
            Placement::RoundRobin => a % self.nodes == b % self.nodes,
        }
    }
}

impl fmt::Display for MachineShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "N={} n={} k={} p={} ({})",
            self.nodes,
            self.per_node,
            self.lanes,
            self.ranks(),
            self.placement
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(nodes: usize, per_node: usize, placement: Placement) -> MachineShape {
        MachineShape::new(nodes, per_node, 1, placement).unwrap()
    }

    #[test]
    fn builds_hydra_shape() {
        let m = MachineShape::new(36, 32, 2, Placement::Block).unwrap();
        assert_eq!(m.ranks(), 1152);
        let single = MachineShape::new(1, 1, 1, Placement::Block).unwrap();
        assert_eq!(single.ranks(), 1);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(matches!(
            MachineShape::new(2, 2, 3, Placement::Block),
            Err(Error::InvalidShape(_))
        ));
        assert!(MachineShape::new(0, 2, 1, Placement::Block).is_err());
        assert!(MachineShape::new(2, 0, 1, Placement::Block).is_err());
        assert!(MachineShape::new(2, 2, 0, Placement::Block).is_err());
    }

    #[test]
    fn node_and_local_index() {
        assert_eq!(shape(2, 2, Placement::Block).node_of(2).unwrap(), 1);
        assert_eq!(shape(2, 2, Placement::RoundRobin).node_of(2).unwrap(), 0);
        assert_eq!(shape(1, 4, Placement::Block).node_of(3).unwrap(), 0);

        assert_eq!(shape(2, 2, Placement::Block).local_index(3).unwrap(), 1);
        assert_eq!(shape(3, 2, Placement::RoundRobin).local_index(4).unwrap(), 1);
        assert_eq!(shape(1, 1, Placement::Block).local_index(0).unwrap(), 0);

        assert_eq!(
            shape(2, 2, Placement::Block).node_of(4),
            Err(Error::RankOutOfRange { rank: 4, p: 4 })
        );
        assert!(shape(2, 2, Placement::RoundRobin).local_index(9).is_err());
    }

    #[test]
    fn lane_groups() {
        assert_eq!(shape(2, 2, Placement::Block).lane_group(1).unwrap(), vec![1, 3]);
        assert_eq!(shape(3, 2, Placement::Block).lane_group(0).unwrap(), vec![0, 2, 4]);
        assert!(matches!(
            shape(3, 2, Placement::Block).lane_group(2),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn round_robin_lane_group_matches_enumeration() {
        let m = shape(2, 2, Placement::RoundRobin);
        let by_enumeration: Vec<usize> =
            (0..m.ranks()).filter(|&r| m.local_index(r).unwrap() == 1).collect();
        assert_eq!(by_enumeration, vec![2, 3]);
        assert_eq!(m.lane_group(1).unwrap(), by_enumeration);
    }

    #[test]
    fn placement_is_a_bijection() {
        for placement in [Placement::Block, Placement::RoundRobin] {
            for nodes in 1..=8 {
                for per_node in 1..=8 {
                    let m = shape(nodes, per_node, placement);
                    let mut seen = vec![false; m.ranks()];
                    for r in 0..m.ranks() {
                        let v = m.node_of(r).unwrap();
                        let j = m.local_index(r).unwrap();
                        assert!(v < nodes && j < per_node);
                        let slot = v * per_node + j;
                        assert!(!seen[slot], "{m}: pair ({v},{j}) hit twice");
                        seen[slot] = true;
                        assert_eq!(m.rank_of(v, j).unwrap(), r);
                        for s in 0..m.ranks() {
                            assert_eq!(
                                m.same_node(r, s),
                                v == m.node_of(s).unwrap(),
                                "{m}: same_node({r},{s})"
                            );
                        }
                    }
                    assert!(seen.into_iter().all(|x| x));

                    let mut covered: Vec<usize> =
                        (0..per_node).flat_map(|j| m.lane_group(j).unwrap()).collect();
                    covered.sort_unstable();
                    assert_eq!(covered, (0..m.ranks()).collect::<Vec<_>>());
                }
            }
        }
    }
}
