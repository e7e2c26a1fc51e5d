//! Schedule representation: synchronous rounds of point-to-point transfers.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::chunk::ChunkSet;
use crate::error::Error;
use crate::machine::MachineShape;

/// A contiguous interval `[lo, hi)` of the data initially owned by `origin`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Chunk {
    pub origin: usize,
    pub lo: usize,
    pub hi: usize,
}

impl Chunk {
    pub fn new(origin: usize, lo: usize, hi: usize) -> Self {
        debug_assert!(lo < hi, "empty chunk ({origin},[{lo},{hi}))");
        Chunk { origin, lo, hi }
    }

    pub fn len(&self) -> usize {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }
}

impl fmt::Display for Chunk {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},[{},{}))", self.origin, self.lo, self.hi)
    }
}

/// The collective a schedule implements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpKind {
    Bcast,
    Scatter,
    Alltoall,
}

impl OpKind {
    pub const ALL: [OpKind; 3] = [OpKind::Bcast, OpKind::Scatter, OpKind::Alltoall];

    pub fn needs_root(self) -> bool {
        !matches!(self, OpKind::Alltoall)
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OpKind::Bcast => "bcast",
            OpKind::Scatter => "scatter",
            OpKind::Alltoall => "alltoall",
        })
    }
}

impl FromStr for OpKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "bcast" => Ok(OpKind::Bcast),
            "scatter" => Ok(OpKind::Scatter),
            "alltoall" => Ok(OpKind::Alltoall),
            other => Err(Error::InvalidParams(format!("unknown op '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    IntraNode,
    InterNode,
}

/// One point-to-point message. The payload is canonical (sorted, merged) and
/// counts as a single message regardless of how many chunks it carries.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Event {
    pub src: usize,
    pub dst: usize,
    payload: Vec<Chunk>,
}

impl Event {
    pub fn new(src: usize, dst: usize, payload: impl IntoIterator<Item = Chunk>) -> Self {
        let set: ChunkSet = payload.into_iter().collect();
        Event { src, dst, payload: set.to_vec() }
    }

    pub fn payload(&self) -> &[Chunk] {
        &self.payload
    }

    /// Payload size in elements.
    pub fn size(&self) -> usize {
        self.payload.iter().map(Chunk::len).sum()
    }

    pub fn kind(&self, m: &MachineShape) -> EventKind {
        if m.same_node(self.src, self.dst) {
            EventKind::IntraNode
        } else {
            EventKind::InterNode
        }
    }
}

/// Events that execute concurrently. Events are kept sorted by `(src, dst)`
/// and each pair appears at most once.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Round {
    events: Vec<Event>,
}

impl Round {
    /// Builds a round, merging the payloads of events that share a
    /// `(src, dst)` pair.
    pub fn from_events(events: impl IntoIterator<Item = Event>) -> Self {
        let mut by_pair: BTreeMap<(usize, usize), ChunkSet> = BTreeMap::new();
        for e in events {
            by_pair.entry((e.src, e.dst)).or_default().extend(e.payload);
        }
        let events = by_pair
            .into_iter()
            .filter(|(_, set)| !set.is_empty())
            .map(|((src, dst), set)| Event { src, dst, payload: set.to_vec() })
            .collect();
        Round { events }
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    /// Copy of this round without the event at `index`.
    pub fn without(&self, index: usize) -> Round {
        let mut events = self.events.clone();
        events.remove(index);
        Round { events }
    }
}

/// Merges independent sub-schedules so that their `i`-th rounds run
/// concurrently.
pub fn merge_concurrent(parts: impl IntoIterator<Item = Vec<Round>>) -> Vec<Round> {
    let mut merged: Vec<Vec<Event>> = Vec::new();
    for part in parts {
        for (i, round) in part.into_iter().enumerate() {
            if merged.len() <= i {
                merged.resize_with(i + 1, Vec::new);
            }
            merged[i].extend(round.events);
        }
    }
    merged.into_iter().map(Round::from_events).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PhaseKind {
    /// Rank-level algorithm with no node structure.
    Flat,
    /// Node-local communication only.
    Local,
    /// Inter-node communication.
    InterNode,
    /// Trailing node-local completion phase.
    FinalLocal,
}

/// A named block of consecutive rounds. A hierarchical algorithm's step is
/// one phase, however many rounds it occupies.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Phase {
    pub kind: PhaseKind,
    pub label: &'static str,
    pub rounds: Range<usize>,
}

/// What generated a schedule.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct ScheduleMeta {
    pub algorithm: &'static str,
    pub op: OpKind,
    pub p: usize,
    pub nodes: Option<usize>,
    pub per_node: Option<usize>,
    pub k: usize,
    pub c: usize,
    pub root: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Schedule {
    pub meta: ScheduleMeta,
    rounds: Vec<Round>,
    phases: Vec<Phase>,
}

impl Schedule {
    pub fn builder(meta: ScheduleMeta) -> ScheduleBuilder {
        ScheduleBuilder { meta, rounds: Vec::new(), phases: Vec::new() }
    }

    pub fn rounds(&self) -> &[Round] {
        &self.rounds
    }

    pub fn phases(&self) -> &[Phase] {
        &self.phases
    }

    pub fn event_count(&self) -> usize {
        self.rounds.iter().map(Round::len).sum()
    }

    pub fn comm_rounds(&self) -> usize {
        self.rounds.iter().filter(|r| !r.is_empty()).count()
    }

    /// Iterates `(round index, event index, event)`.
    pub fn events(&self) -> impl Iterator<Item = (usize, usize, &Event)> {
        self.rounds
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.events.iter().enumerate().map(move |(j, e)| (i, j, e)))
    }

    /// Copy with a single event removed. Phase boundaries are kept.
    pub fn without_event(&self, round: usize, index: usize) -> Schedule {
        let mut out = self.clone();
        out.rounds[round] = self.rounds[round].without(index);
        out
    }

    /// Copy with the rounds replaced; phase information is dropped.
    pub fn with_rounds(&self, rounds: Vec<Round>) -> Schedule {
        Schedule { meta: self.meta.clone(), rounds, phases: Vec::new() }
    }

    /// Checks structural invariants against `m`: valid ranks, `src != dst`,
    /// non-empty payloads.
    pub fn validate(&self, m: &MachineShape) -> Result<(), Error> {
        let p = m.ranks();
        for (i, _, e) in self.events() {
            for rank in [e.src, e.dst] {
                if rank >= p {
                    return Err(Error::RankOutOfRange { rank, p });
                }
            }
            if e.src == e.dst {
                return Err(Error::InvalidParams(format!("round {i}: self-send at rank {}", e.src)));
            }
            if e.payload.is_empty() {
                return Err(Error::InvalidParams(format!(
                    "round {i}: empty payload {}->{}",
                    e.src, e.dst
                )));
            }
        }
        Ok(())
    }

    /// Text dump: one `round,src,dst,origin,lo,hi` line per (event, chunk),
    /// sorted by `(round, src, dst, origin, lo)`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, _, e) in self.events() {
            for c in &e.payload {
                writeln!(out, "{},{},{},{},{},{}", i, e.src, e.dst, c.origin, c.lo, c.hi).unwrap();
            }
        }
        out
    }

    pub fn stats(&self, m: &MachineShape, root: Option<usize>) -> ScheduleStats {
        schedule_stats(self, m, root)
    }
}

pub struct ScheduleBuilder {
    meta: ScheduleMeta,
    rounds: Vec<Round>,
    phases: Vec<Phase>,
}

impl ScheduleBuilder {
    /// Appends a phase. Empty rounds are dropped; a phase with no events is
    /// not recorded.
    pub fn phase(&mut self, kind: PhaseKind, label: &'static str, rounds: Vec<Round>) -> &mut Self {
        let start = self.rounds.len();
        self.rounds.extend(rounds.into_iter().filter(|r| !r.is_empty()));
        if self.rounds.len() > start {
            self.phases.push(Phase { kind, label, rounds: start..self.rounds.len() });
        }
        self
    }

    pub fn build(self) -> Schedule {
        Schedule { meta: self.meta, rounds: self.rounds, phases: self.phases }
    }
}

/// Measured volume and round counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize)]
pub struct ScheduleStats {
    pub rounds: usize,
    pub comm_rounds: usize,
    pub off_node_elements: usize,
    pub on_node_elements: usize,
    /// Elements sent by the designated rank (0 when none given).
    pub root_out_elements: usize,
    /// Inter-node elements leaving the designated rank's node.
    pub root_node_out_elements: usize,
    pub max_node_concurrency: usize,
}

impl ScheduleStats {
    pub fn total_elements(&self) -> usize {
        self.off_node_elements + self.on_node_elements
    }

    /// Componentwise sum, except `max_node_concurrency` which takes the max.
    pub fn combine(&self, other: &ScheduleStats) -> ScheduleStats {
        ScheduleStats {
            rounds: self.rounds + other.rounds,
            comm_rounds: self.comm_rounds + other.comm_rounds,
            off_node_elements: self.off_node_elements + other.off_node_elements,
            on_node_elements: self.on_node_elements + other.on_node_elements,
            root_out_elements: self.root_out_elements + other.root_out_elements,
            root_node_out_elements: self.root_node_out_elements + other.root_node_out_elements,
            max_node_concurrency: self.max_node_concurrency.max(other.max_node_concurrency),
        }
    }
}

pub fn round_stats(round: &Round, m: &MachineShape, root: Option<usize>) -> ScheduleStats {
    let root_node = root.and_then(|r| m.node_of(r).ok());
    let mut st = ScheduleStats { rounds: 1, comm_rounds: usize::from(!round.is_empty()), ..Default::default() };
    let mut touching: BTreeMap<usize, usize> = BTreeMap::new();
    for e in &round.events {
        let size = e.size();
        if root == Some(e.src) {
            st.root_out_elements += size;
        }
        match e.kind(m) {
            EventKind::IntraNode => st.on_node_elements += size,
            EventKind::InterNode => {
                st.off_node_elements += size;
                let (a, b) = (m.node_of(e.src).unwrap(), m.node_of(e.dst).unwrap());
                if root_node == Some(a) {
                    st.root_node_out_elements += size;
                }
                *touching.entry(a).or_default() += 1;
                *touching.entry(b).or_default() += 1;
            }
        }
    }
    st.max_node_concurrency = touching.values().copied().max().unwrap_or(0);
    st
}

pub fn schedule_stats(s: &Schedule, m: &MachineShape, root: Option<usize>) -> ScheduleStats {
    s.rounds
        .iter()
        .map(|r| round_stats(r, m, root))
        .fold(ScheduleStats::default(), |acc, r| acc.combine(&r))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Role {
    Send,
    Recv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Violation {
    pub round: usize,
    pub rank: usize,
    pub role: Role,
    pub count: usize,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.role {
            Role::Send => "sends",
            Role::Recv => "receives",
        };
        write!(f, "round {}: rank {} {} {} messages", self.round, self.rank, what, self.count)
    }
}

/// Outcome of a port-count check; records the first violation found.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize)]
pub struct LegalityReport {
    pub violation: Option<Violation>,
}

impl LegalityReport {
    pub fn passed(&self) -> bool {
        self.violation.is_none()
    }
}

fn check_port_limit(s: &Schedule, limit: usize) -> LegalityReport {
    for (i, round) in s.rounds.iter().enumerate() {
        let mut sends: BTreeMap<usize, usize> = BTreeMap::new();
        let mut recvs: BTreeMap<usize, usize> = BTreeMap::new();
        for e in &round.events {
            *sends.entry(e.src).or_default() += 1;
            *recvs.entry(e.dst).or_default() += 1;
        }
        let over = |counts: &BTreeMap<usize, usize>, role| {
            counts
                .iter()
                .find(|&(_, &n)| n > limit)
                .map(|(&rank, &count)| Violation { round: i, rank, role, count })
        };
        if let Some(v) = over(&sends, Role::Send).or_else(|| over(&recvs, Role::Recv)) {
            return LegalityReport { violation: Some(v) };
        }
    }
    LegalityReport::default()
}

/// k-ported model: every rank sends at most `k` and receives at most `k`
/// messages per round.
pub fn check_ported_legality(s: &Schedule, _m: &MachineShape, k: usize) -> LegalityReport {
    check_port_limit(s, k)
}

/// Lane model: every rank sends at most one and receives at most one message
/// per round. Oversubscribing a node's lanes is legal and shows up as cost.
pub fn check_lane_step_legality(s: &Schedule, _m: &MachineShape) -> LegalityReport {
    check_port_limit(s, 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::Placement;

    fn meta(p: usize) -> ScheduleMeta {
        ScheduleMeta {
            algorithm: "test",
            op: OpKind::Bcast,
            p,
            nodes: None,
            per_node: None,
            k: 1,
            c: 1,
            root: Some(0),
        }
    }

    fn sched(p: usize, rounds: Vec<Vec<(usize, usize)>>) -> Schedule {
        let mut b = Schedule::builder(meta(p));
        let rounds = rounds
            .into_iter()
            .map(|r| Round::from_events(r.into_iter().map(|(s, d)| Event::new(s, d, [Chunk::new(0, 0, 1)]))))
            .collect();
        b.phase(PhaseKind::Flat, "test", rounds);
        b.build()
    }

    #[test]
    fn ported_legality() {
        let m = MachineShape::new(1, 3, 1, Placement::Block).unwrap();
        let s = sched(3, vec![vec![(0, 1), (0, 2)]]);
        let r = check_ported_legality(&s, &m, 1);
        assert_eq!(r.violation, Some(Violation { round: 0, rank: 0, role: Role::Send, count: 2 }));
        assert!(check_ported_legality(&s, &m, 2).passed());
        assert!(check_ported_legality(&sched(3, vec![]), &m, 1).passed());
    }

    #[test]
    fn lane_legality() {
        let m = MachineShape::new(2, 2, 1, Placement::Block).unwrap();
        assert!(check_lane_step_legality(&sched(4, vec![vec![(0, 2), (1, 3)]]), &m).passed());
        let bad = check_lane_step_legality(&sched(4, vec![vec![(0, 2), (0, 3)]]), &m);
        assert_eq!(bad.violation.map(|v| v.rank), Some(0));
        assert!(check_lane_step_legality(&sched(4, vec![vec![(0, 1)]]), &m).passed());
        let recv = check_lane_step_legality(&sched(4, vec![vec![(0, 3), (1, 3)]]), &m);
        assert_eq!(recv.violation.map(|v| (v.rank, v.role)), Some((3, Role::Recv)));
    }

    #[test]
    fn round_merges_duplicate_pairs() {
        let r = Round::from_events([
            Event::new(1, 0, [Chunk::new(1, 0, 2)]),
            Event::new(0, 1, [Chunk::new(0, 2, 4)]),
            Event::new(0, 1, [Chunk::new(0, 0, 2)]),
        ]);
        assert_eq!(r.len(), 2);
        assert_eq!(r.events()[0].payload(), &[Chunk::new(0, 0, 4)]);
        assert_eq!(r.events()[1].src, 1);
    }

    #[test]
    fn empty_schedule_stats_are_zero() {
        let m = MachineShape::new(2, 2, 1, Placement::Block).unwrap();
        assert_eq!(sched(4, vec![]).stats(&m, Some(0)), ScheduleStats::default());
        assert_eq!(sched(4, vec![]).dump(), "");
    }

    #[test]
    fn stats_classify_events() {
        let m = MachineShape::new(2, 2, 1, Placement::Block).unwrap();
        let s = sched(4, vec![vec![(0, 1)], vec![(0, 2), (1, 3)], vec![(2, 3)]]);
        let st = s.stats(&m, Some(0));
        assert_eq!(st.rounds, 3);
        assert_eq!(st.comm_rounds, 3);
        assert_eq!(st.on_node_elements, 2);
        assert_eq!(st.off_node_elements, 2);
        assert_eq!(st.root_out_elements, 2);
        assert_eq!(st.root_node_out_elements, 2);
        assert_eq!(st.max_node_concurrency, 2);
    }

    #[test]
    fn dump_format() {
        let s = sched(4, vec![vec![(2, 3), (0, 1)]]);
        assert_eq!(s.dump(), "0,0,1,0,0,1\n0,2,3,0,0,1\n");
    }
}
