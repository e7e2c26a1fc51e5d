//! Token-level execution of schedules, used as the correctness oracle.
//!
//! Every rank holds a canonical [`ChunkSet`]. A round is evaluated against
//! the state before the round, so data received in a round cannot be
//! forwarded in the same round. Receivers keep copies; nothing is dropped.

use std::fmt;

use crate::algorithms::CollectiveParams;
use crate::chunk::ChunkSet;
use crate::error::{Error, Result};
use crate::machine::MachineShape;
use crate::schedule::{Chunk, OpKind, Schedule};

/// Per-rank held data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcState {
    pub held: Vec<ChunkSet>,
}

impl ProcState {
    pub fn empty(p: usize) -> Self {
        ProcState { held: vec![ChunkSet::new(); p] }
    }

    pub fn ranks(&self) -> usize {
        self.held.len()
    }
}

pub fn initial_state(params: &CollectiveParams, m: &MachineShape) -> Result<ProcState> {
    let p = m.ranks();
    params.validate(p)?;
    let CollectiveParams { op, root, c, .. } = *params;
    let mut st = ProcState::empty(p);
    match op {
        OpKind::Bcast => st.held[root].insert(Chunk::new(root, 0, c)),
        OpKind::Scatter => st.held[root].insert(Chunk::new(root, 0, p * c)),
        OpKind::Alltoall => {
            for (i, held) in st.held.iter_mut().enumerate() {
                held.insert(Chunk::new(i, 0, p * c));
            }
        }
    }
    Ok(st)
}

/// What every rank must hold once the collective completes.
pub fn expected_final(params: &CollectiveParams, m: &MachineShape) -> Result<Vec<ChunkSet>> {
    let p = m.ranks();
    params.validate(p)?;
    let CollectiveParams { op, root, c, .. } = *params;
    Ok((0..p)
        .map(|i| match op {
            OpKind::Bcast => [Chunk::new(root, 0, c)].into_iter().collect(),
            OpKind::Scatter => [Chunk::new(root, i * c, (i + 1) * c)].into_iter().collect(),
            OpKind::Alltoall => (0..p).map(|j| Chunk::new(j, i * c, (i + 1) * c)).collect(),
        })
        .collect())
}

/// Runs the schedule; fails on the first chunk a sender does not hold.
pub fn execute(s: &Schedule, st: &ProcState) -> Result<ProcState> {
    let mut faults = Vec::new();
    let out = run(s, st, &mut |f| faults.push(f), true);
    match faults.into_iter().next() {
        Some((round, src, chunk)) => Err(Error::MissingData { round, src, chunk }),
        None => Ok(out),
    }
}

/// Core loop. With `stop_on_fault`, execution halts at the first fault;
/// otherwise unavailable chunks are skipped and execution continues.
fn run(
    s: &Schedule,
    st: &ProcState,
    on_fault: &mut dyn FnMut((usize, usize, Chunk)),
    stop_on_fault: bool,
) -> ProcState {
    let mut state = st.clone();
    for (i, round) in s.rounds().iter().enumerate() {
        let before = state.held.clone();
        for e in round.events() {
            for c in e.payload() {
                // Out-of-range ranks are schedule bugs; treat them as missing data.
                let available = e.dst < state.ranks() && before.get(e.src).is_some_and(|h| h.contains(c));
                if available {
                    state.held[e.dst].insert(*c);
                } else {
                    on_fault((i, e.src, *c));
                    if stop_on_fault {
                        return state;
                    }
                }
            }
        }
    }
    state
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Diagnostic {
    /// A rank lacks required data at the end.
    Missing { rank: usize, chunk: Chunk },
    /// A rank holds data it does not need (strict mode only).
    Extra { rank: usize, chunk: Chunk },
    /// A sender did not hold a chunk it was scheduled to send.
    MissingData { round: usize, src: usize, chunk: Chunk },
    /// The collective parameters do not fit the machine.
    InvalidParams(String),
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::Missing { rank, chunk } => write!(f, "final: rank {rank} missing {chunk}"),
            Diagnostic::Extra { rank, chunk } => write!(f, "final: rank {rank} holds extra {chunk}"),
            Diagnostic::MissingData { round, src, chunk } => {
                write!(f, "round {round}: rank {src} sends {chunk} it does not hold")
            }
            Diagnostic::InvalidParams(msg) => write!(f, "invalid parameters: {msg}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyResult {
    pub passed: bool,
    pub failures: Vec<Diagnostic>,
}

impl VerifyResult {
    fn from_failures(failures: Vec<Diagnostic>) -> Self {
        VerifyResult { passed: failures.is_empty(), failures }
    }
}

/// Checks that executing `s` from the initial state of `params` leaves every
/// rank holding at least its required data. Execution faults are reported
/// as failures rather than errors.
pub fn verify(params: &CollectiveParams, m: &MachineShape, s: &Schedule) -> VerifyResult {
    verify_with(params, m, s, false)
}

/// As [`verify`], but additionally reports data held beyond the requirement.
/// Relays in scatter trees legitimately hold extras, so this is a
/// diagnostic, not a correctness check.
pub fn verify_strict(params: &CollectiveParams, m: &MachineShape, s: &Schedule) -> VerifyResult {
    verify_with(params, m, s, true)
}

fn verify_with(params: &CollectiveParams, m: &MachineShape, s: &Schedule, strict: bool) -> VerifyResult {
    let (init, required) = match (initial_state(params, m), expected_final(params, m)) {
        (Ok(i), Ok(r)) => (i, r),
        (Err(e), _) | (_, Err(e)) => {
            return VerifyResult::from_failures(vec![Diagnostic::InvalidParams(e.to_string())]);
        }
    };
    let mut failures = Vec::new();
    let final_state = run(s, &init, &mut |(round, src, chunk)| failures.push(Diagnostic::MissingData { round, src, chunk }), false);
    for (rank, (held, need)) in final_state.held.iter().zip(&required).enumerate() {
        failures.extend(need.difference(held).iter().map(|chunk| Diagnostic::Missing { rank, chunk }));
        if strict {
            let initial = &init.held[rank];
            let extra = held.difference(need).difference(initial);
            failures.extend(extra.iter().map(|chunk| Diagnostic::Extra { rank, chunk }));
        }
    }
    VerifyResult::from_failures(failures)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::kported_bcast;
    use crate::machine::Placement;
    use crate::schedule::{Event, PhaseKind, Round, ScheduleMeta};

    fn line(p: usize) -> MachineShape {
        MachineShape::new(1, p, 1, Placement::Block).unwrap()
    }

    fn ch(o: usize, lo: usize, hi: usize) -> Chunk {
        Chunk::new(o, lo, hi)
    }

    #[test]
    fn initial_states() {
        let st = initial_state(&CollectiveParams::new(OpKind::Bcast, 0, 3, 1), &line(2)).unwrap();
        assert_eq!(st.held[0].to_vec(), vec![ch(0, 0, 3)]);
        assert!(st.held[1].is_empty());

        let st = initial_state(&CollectiveParams::new(OpKind::Scatter, 1, 2, 1), &line(2)).unwrap();
        assert_eq!(st.held[1].to_vec(), vec![ch(1, 0, 4)]);
        assert!(st.held[0].is_empty());

        let st = initial_state(&CollectiveParams::new(OpKind::Alltoall, 0, 1, 1), &line(2)).unwrap();
        assert_eq!(st.held[0].to_vec(), vec![ch(0, 0, 2)]);
        assert_eq!(st.held[1].to_vec(), vec![ch(1, 0, 2)]);

        assert!(initial_state(&CollectiveParams::new(OpKind::Bcast, 2, 1, 1), &line(2)).is_err());
    }

    #[test]
    fn expected_finals() {
        let e = expected_final(&CollectiveParams::new(OpKind::Bcast, 2, 5, 1), &line(3)).unwrap();
        assert!(e.iter().all(|s| s.to_vec() == vec![ch(2, 0, 5)]));
        let e = expected_final(&CollectiveParams::new(OpKind::Scatter, 0, 2, 1), &line(2)).unwrap();
        assert_eq!(e[1].to_vec(), vec![ch(0, 2, 4)]);
        let e = expected_final(&CollectiveParams::new(OpKind::Alltoall, 0, 1, 1), &line(2)).unwrap();
        assert_eq!(e[0].to_vec(), vec![ch(0, 0, 1), ch(1, 0, 1)]);
    }

    #[test]
    fn execute_bcast_tree() {
        let params = CollectiveParams::new(OpKind::Bcast, 0, 4, 1);
        let m = line(4);
        let s = kported_bcast(4, 1, 0, 4).unwrap();
        let out = execute(&s, &initial_state(&params, &m).unwrap()).unwrap();
        assert!(out.held.iter().all(|h| h.to_vec() == vec![ch(0, 0, 4)]));

        let empty = s.with_rounds(Vec::new());
        let init = initial_state(&params, &m).unwrap();
        assert_eq!(execute(&empty, &init).unwrap(), init);
    }

    #[test]
    fn execute_reports_missing_data() {
        let mut b = Schedule::builder(ScheduleMeta {
            algorithm: "test",
            op: OpKind::Bcast,
            p: 2,
            nodes: None,
            per_node: None,
            k: 1,
            c: 1,
            root: Some(1),
        });
        b.phase(PhaseKind::Flat, "t", vec![Round::from_events([Event::new(0, 1, [ch(0, 0, 1)])])]);
        let s = b.build();
        let err = execute(&s, &ProcState::empty(2)).unwrap_err();
        assert_eq!(err, Error::MissingData { round: 0, src: 0, chunk: ch(0, 0, 1) });
    }

    #[test]
    fn forwarding_within_a_round_is_illegal() {
        let mut b = Schedule::builder(kported_bcast(3, 1, 0, 1).unwrap().meta.clone());
        b.phase(
            PhaseKind::Flat,
            "t",
            vec![Round::from_events([Event::new(0, 1, [ch(0, 0, 1)]), Event::new(1, 2, [ch(0, 0, 1)])])],
        );
        let r = verify(&CollectiveParams::new(OpKind::Bcast, 0, 1, 1), &line(3), &b.build());
        assert!(!r.passed);
        assert!(r.failures.contains(&Diagnostic::MissingData { round: 0, src: 1, chunk: ch(0, 0, 1) }));
    }

    #[test]
    fn verify_detects_dropped_round() {
        let params = CollectiveParams::new(OpKind::Bcast, 0, 3, 1);
        let m = line(4);
        let s = kported_bcast(4, 1, 0, 3).unwrap();
        assert!(verify(&params, &m, &s).passed);

        let truncated = s.with_rounds(s.rounds()[..1].to_vec());
        let r = verify(&params, &m, &truncated);
        assert!(!r.passed);
        assert_eq!(
            r.failures,
            vec![
                Diagnostic::Missing { rank: 1, chunk: ch(0, 0, 3) },
                Diagnostic::Missing { rank: 3, chunk: ch(0, 0, 3) },
            ]
        );
    }

    #[test]
    fn single_rank_passes_empty() {
        let m = line(1);
        for op in OpKind::ALL {
            let params = CollectiveParams::new(op, 0, 5, 1);
            let s = kported_bcast(1, 1, 0, 5).unwrap();
            assert!(verify(&params, &m, &s).passed, "{op}");
        }
    }
}
