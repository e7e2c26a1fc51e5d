//! Linear latency/bandwidth cost model with per-node lane contention.
//!
//! A message of `m` elements costs `alpha + factor * beta * m`. Inter-node
//! bandwidth of a node is shared equally once more than `k` of its
//! processors send (or receive) off-node in the same round, so `factor` is
//! the oversubscription of the busier endpoint's lanes. Latency is not
//! affected by sharing, and node-local transfers never contend.
//!
//! Rounds are bulk-synchronous: a round lasts as long as its slowest
//! message and the schedule time is the sum of round times.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::machine::MachineShape;
use crate::schedule::{Event, EventKind, Round, Schedule};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostParams {
    pub alpha_inter: f64,
    pub beta_inter: f64,
    pub alpha_intra: f64,
    pub beta_intra: f64,
    /// Lanes per node.
    pub lanes: usize,
}

impl CostParams {
    pub const DEFAULT_ALPHA_INTER: f64 = 1.0;
    pub const DEFAULT_BETA_INTER: f64 = 0.01;
    pub const DEFAULT_ALPHA_INTRA: f64 = 0.3;
    pub const DEFAULT_BETA_INTRA: f64 = 0.002;

    /// Default coefficients with the machine's lane count.
    pub fn for_machine(m: &MachineShape) -> Self {
        CostParams {
            alpha_inter: Self::DEFAULT_ALPHA_INTER,
            beta_inter: Self::DEFAULT_BETA_INTER,
            alpha_intra: Self::DEFAULT_ALPHA_INTRA,
            beta_intra: Self::DEFAULT_BETA_INTRA,
            lanes: m.lanes(),
        }
    }

    pub fn with_lanes(self, lanes: usize) -> Self {
        CostParams { lanes, ..self }
    }

    /// Multiplies every coefficient by `factor`.
    pub fn scaled(self, factor: f64) -> Self {
        CostParams {
            alpha_inter: self.alpha_inter * factor,
            beta_inter: self.beta_inter * factor,
            alpha_intra: self.alpha_intra * factor,
            beta_intra: self.beta_intra * factor,
            lanes: self.lanes,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.lanes >= 1
            && [self.alpha_inter, self.beta_inter, self.alpha_intra, self.beta_intra]
                .iter()
                .all(|x| x.is_finite() && *x >= 0.0)
    }
}

/// The slowest message of a round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bottleneck {
    pub src: usize,
    pub dst: usize,
    pub size: usize,
    pub factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostReport {
    pub total_time: f64,
    pub per_round: Vec<f64>,
    pub per_round_bottleneck: Vec<Option<Bottleneck>>,
}

/// Per-node counts of off-node sends and receives in one round.
struct NodeLoad {
    out: BTreeMap<usize, usize>,
    inc: BTreeMap<usize, usize>,
}

impl NodeLoad {
    fn of(round: &Round, m: &MachineShape) -> Self {
        let mut load = NodeLoad { out: BTreeMap::new(), inc: BTreeMap::new() };
        for e in round.events() {
            if e.kind(m) == EventKind::InterNode {
                *load.out.entry(m.node_of(e.src).unwrap()).or_default() += 1;
                *load.inc.entry(m.node_of(e.dst).unwrap()).or_default() += 1;
            }
        }
        load
    }

    fn factor(&self, e: &Event, m: &MachineShape, lanes: usize) -> f64 {
        if e.kind(m) == EventKind::IntraNode {
            return 1.0;
        }
        let s = self.out[&m.node_of(e.src).unwrap()];
        let r = self.inc[&m.node_of(e.dst).unwrap()];
        (s.max(r) as f64 / lanes as f64).max(1.0)
    }
}

/// Bandwidth slowdown of `e` within `round`: `max(1, S/k, R/k)` where `S`
/// counts the round's off-node sends from `e`'s source node and `R` the
/// off-node receives at its destination node. Node-local events get 1.
pub fn contention_factor(round: &Round, m: &MachineShape, e: &Event, lanes: usize) -> f64 {
    NodeLoad::of(round, m).factor(e, m, lanes.max(1))
}

pub fn event_time(e: &Event, kind: EventKind, factor: f64, cp: &CostParams) -> f64 {
    let size = e.size() as f64;
    match kind {
        EventKind::InterNode => cp.alpha_inter + factor * cp.beta_inter * size,
        EventKind::IntraNode => cp.alpha_intra + cp.beta_intra * size,
    }
}

pub fn time_schedule(s: &Schedule, m: &MachineShape, cp: &CostParams) -> CostReport {
    let lanes = cp.lanes.max(1);
    let mut per_round = Vec::with_capacity(s.rounds().len());
    let mut per_round_bottleneck = Vec::with_capacity(s.rounds().len());
    for round in s.rounds() {
        let load = NodeLoad::of(round, m);
        let mut worst: Option<(f64, Bottleneck)> = None;
        for e in round.events() {
            let factor = load.factor(e, m, lanes);
            let t = event_time(e, e.kind(m), factor, cp);
            if worst.as_ref().is_none_or(|(w, _)| t > *w) {
                worst = Some((t, Bottleneck { src: e.src, dst: e.dst, size: e.size(), factor }));
            }
        }
        per_round.push(worst.map_or(0.0, |(t, _)| t));
        per_round_bottleneck.push(worst.map(|(_, b)| b));
    }
    CostReport { total_time: per_round.iter().sum(), per_round, per_round_bottleneck }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::{kported_bcast, klane_alltoall};
    use crate::machine::Placement;
    use crate::schedule::Chunk;

    fn ev(src: usize, dst: usize, size: usize) -> Event {
        Event::new(src, dst, [Chunk::new(src, 0, size)])
    }

    #[test]
    fn contention_examples() {
        let m = MachineShape::new(2, 4, 2, Placement::Block).unwrap();
        let single = Round::from_events([ev(0, 4, 1)]);
        assert_eq!(contention_factor(&single, &m, &single.events()[0], 2), 1.0);

        let four = Round::from_events((0..4).map(|j| ev(j, 4 + j, 1)));
        for e in four.events() {
            assert_eq!(contention_factor(&four, &m, e, 2), 2.0);
        }

        let mixed = Round::from_events([ev(0, 4, 1), ev(1, 5, 1), ev(2, 6, 1), ev(3, 2, 1)]);
        let local = mixed.events().iter().find(|e| e.src == 3).unwrap();
        assert_eq!(contention_factor(&mixed, &m, local, 1), 1.0);
    }

    #[test]
    fn event_time_examples() {
        let cp = CostParams { alpha_inter: 1.0, beta_inter: 0.01, alpha_intra: 0.5, beta_intra: 0.1, lanes: 1 };
        let e = ev(0, 1, 100);
        assert!((event_time(&e, EventKind::InterNode, 1.0, &cp) - 2.0).abs() < 1e-12);
        assert!((event_time(&e, EventKind::InterNode, 2.0, &cp) - 3.0).abs() < 1e-12);
        assert!((event_time(&ev(0, 1, 1), EventKind::IntraNode, 1.0, &cp) - 0.6).abs() < 1e-12);
    }

    #[test]
    fn schedule_times() {
        let m = MachineShape::new(4, 1, 1, Placement::Block).unwrap();
        let cp = CostParams { alpha_inter: 1.0, beta_inter: 0.0, alpha_intra: 1.0, beta_intra: 0.0, lanes: 1 };
        let s = kported_bcast(4, 1, 0, 7).unwrap();
        let r = time_schedule(&s, &m, &cp);
        assert_eq!(r.total_time, 2.0);
        assert_eq!(r.per_round, vec![1.0, 1.0]);
        assert!(r.per_round_bottleneck.iter().all(Option::is_some));

        let empty = s.with_rounds(Vec::new());
        assert_eq!(time_schedule(&empty, &m, &cp).total_time, 0.0);
    }

    #[test]
    fn more_lanes_never_slower() {
        let m = MachineShape::new(2, 2, 1, Placement::Block).unwrap();
        let s = klane_alltoall(&m, 1).unwrap();
        let cp = CostParams::for_machine(&m);
        let one = time_schedule(&s, &m, &cp.with_lanes(1)).total_time;
        let two = time_schedule(&s, &m, &cp.with_lanes(2)).total_time;
        assert!(two <= one);
    }
}
