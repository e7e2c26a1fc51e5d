//! Schedule generators for the k-ported, full-lane and k-lane algorithm
//! families, and the node-local primitives they are built from.

mod fulllane;
mod klane;
mod kported;
mod local;

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::Serialize;

pub use crate::schedule::OpKind;
pub use fulllane::{fulllane_alltoall, fulllane_bcast, fulllane_scatter};
pub use klane::{klane_alltoall, klane_bcast, klane_scatter};
pub use kported::{kported_alltoall, kported_bcast, kported_scatter};
pub use local::{local_allgather, local_alltoall, local_bcast, local_scatter};

use crate::error::{Error, Result};
use crate::machine::MachineShape;
use crate::schedule::{Chunk, Schedule};

/// Contiguous, near-equal partition of a rank interval.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RangeSplit {
    pub subranges: Vec<Range<usize>>,
}

impl RangeSplit {
    pub fn len(&self) -> usize {
        self.subranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subranges.is_empty()
    }
}

/// Splits `[start, end)` into `min(parts, end - start)` non-empty subranges
/// whose sizes differ by at most one, larger subranges first.
pub fn split_range(start: usize, end: usize, parts: usize) -> Result<RangeSplit> {
    if start >= end {
        return Err(Error::EmptyRange { start, end });
    }
    if parts == 0 {
        return Err(Error::InvalidParams("cannot split into zero parts".into()));
    }
    let len = end - start;
    let count = parts.min(len);
    let (base, extra) = (len / count, len % count);
    let mut subranges = Vec::with_capacity(count);
    let mut lo = start;
    for i in 0..count {
        let hi = lo + base + usize::from(i < extra);
        subranges.push(lo..hi);
        lo = hi;
    }
    Ok(RangeSplit { subranges })
}

/// One transfer of the divide-and-conquer tree, in positions `0..len`.
/// `subrange` is the range the receiver becomes local root of.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct TreeSend {
    pub from: usize,
    pub to: usize,
    pub subrange: Range<usize>,
}

/// Rounds of the k-ported divide-and-conquer tree over `len` positions.
///
/// Each local root splits its range into `k + 1` parts and sends to the
/// first position of every part it does not belong to; the part holding the
/// root keeps it as local root. Recursion stops at singleton ranges.
pub(crate) fn tree_levels(len: usize, k: usize, root: usize) -> Vec<Vec<TreeSend>> {
    debug_assert!(root < len && k >= 1);
    let mut tasks = vec![(0..len, root)];
    let mut levels = Vec::new();
    loop {
        tasks.retain(|(range, _)| range.len() > 1);
        if tasks.is_empty() {
            break;
        }
        let mut sends = Vec::new();
        let mut next = Vec::new();
        for (range, local_root) in tasks {
            let split = split_range(range.start, range.end, k + 1).expect("non-empty range");
            for sub in split.subranges {
                if sub.contains(&local_root) {
                    next.push((sub, local_root));
                } else {
                    sends.push(TreeSend { from: local_root, to: sub.start, subrange: sub.clone() });
                    next.push((sub.clone(), sub.start));
                }
            }
        }
        levels.push(sends);
        tasks = next;
    }
    levels
}

/// Per-block element range of block `index` when blocks hold `c` elements.
pub(crate) fn block(origin: usize, index: usize, c: usize) -> Chunk {
    Chunk::new(origin, index * c, (index + 1) * c)
}

/// Parameters of one collective invocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct CollectiveParams {
    pub op: OpKind,
    /// Root rank; ignored for alltoall.
    pub root: usize,
    /// Bcast: total element count. Scatter/alltoall: elements per block.
    pub c: usize,
    /// Port count (k-ported) or lane count (k-lane).
    pub k: usize,
}

impl CollectiveParams {
    pub fn new(op: OpKind, root: usize, c: usize, k: usize) -> Self {
        CollectiveParams { op, root, c, k }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if self.c == 0 {
            return Err(Error::InvalidParams("element count c must be positive".into()));
        }
        if self.k == 0 {
            return Err(Error::InvalidParams("k must be positive".into()));
        }
        if self.op.needs_root() && self.root >= p {
            return Err(Error::InvalidParams(format!("root {} out of range for p={p}", self.root)));
        }
        Ok(())
    }

    pub fn root(&self) -> Option<usize> {
        self.op.needs_root().then_some(self.root)
    }
}

/// Algorithm family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Algorithm {
    KPorted,
    FullLane,
    /// k-ported reuse on the lane model. With `full_node_bcast`, a node
    /// that first receives broadcast data spreads it to all its processors
    /// immediately instead of to its k local roots.
    KLane { full_node_bcast: bool },
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] =
        [Algorithm::KPorted, Algorithm::KLane { full_node_bcast: false }, Algorithm::FullLane];

    pub fn is_lane(&self) -> bool {
        !matches!(self, Algorithm::KPorted)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::KPorted => "kported",
            Algorithm::FullLane => "fulllane",
            Algorithm::KLane { full_node_bcast: false } => "klane",
            Algorithm::KLane { full_node_bcast: true } => "klane-fullnode",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kported" => Ok(Algorithm::KPorted),
            "fulllane" => Ok(Algorithm::FullLane),
            "klane" => Ok(Algorithm::KLane { full_node_bcast: false }),
            "klane-fullnode" => Ok(Algorithm::KLane { full_node_bcast: true }),
            other => Err(Error::InvalidParams(format!("unknown algorithm '{other}'"))),
        }
    }
}

/// Generates the schedule of `algo` for `params` on machine `m`.
///
/// k-ported generators see `m` only as `p` ranks and take `params.k` as the
/// port count; lane generators take `params.k` as lanes (full-lane ignores
/// it). `full_node_bcast` only affects broadcast.
pub fn generate(algo: Algorithm, m: &MachineShape, params: &CollectiveParams) -> Result<Schedule> {
    params.validate(m.ranks())?;
    let CollectiveParams { op, root, c, k } = *params;
    let p = m.ranks();
    match (algo, op) {
        (Algorithm::KPorted, OpKind::Bcast) => kported_bcast(p, k, root, c),
        (Algorithm::KPorted, OpKind::Scatter) => kported_scatter(p, k, root, c),
        (Algorithm::KPorted, OpKind::Alltoall) => kported_alltoall(p, k, c),
        (Algorithm::FullLane, OpKind::Bcast) => fulllane_bcast(m, root, c),
        (Algorithm::FullLane, OpKind::Scatter) => fulllane_scatter(m, root, c),
        (Algorithm::FullLane, OpKind::Alltoall) => fulllane_alltoall(m, c),
        (Algorithm::KLane { full_node_bcast }, OpKind::Bcast) => {
            klane_bcast(m, k, root, c, full_node_bcast)
        }
        (Algorithm::KLane { .. }, OpKind::Scatter) => klane_scatter(m, k, root, c),
        (Algorithm::KLane { .. }, OpKind::Alltoall) => klane_alltoall(m, c),
    }
}
