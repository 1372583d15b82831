//! Greedy merit-order dispatch for one frame.
//!
//! Sources are drawn cheapest first (ties by actor name). Sinks are served
//! in three passes: critical demand of every load, then the rest of each
//! load's demand in descending benefit, then battery charging from any
//! non-battery source cheaper than the battery's own energy. Power only
//! moves along connectivity cells, so the state vector always sums to zero.

use std::cmp::Ordering;

use crate::grid::ActorKind;

/// What an actor can provide this frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Offer {
    pub kind: ActorKind,
    /// kW
    pub available: f64,
    /// $/kWh; for a battery, its effective (scarcity-adjusted) cost.
    pub cost: f64,
    pub connected: bool,
}

/// What an actor wants this frame; batteries bid their charge headroom.
#[derive(Debug, Clone, PartialEq)]
pub struct Bid {
    /// kW that must be met before any normal demand.
    pub required: f64,
    /// kW
    pub maximum: f64,
    /// $/kWh
    pub benefit: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct DispatchProblem<'a> {
    pub names: &'a [String],
    pub offers: &'a [Offer],
    pub bids: &'a [Bid],
    /// `connectivity[i][j]`: actor i may receive from actor j.
    pub connectivity: &'a [Vec<bool>],
    pub island_mode: bool,
    pub failing: &'a [bool],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dispatch {
    /// kW per actor, providing positive and receiving negative.
    pub state_vector: Vec<f64>,
    /// `flows[i][j]`: kW actor i receives from actor j.
    pub flows: Vec<Vec<f64>>,
    /// The part of `flows` that served critical demand.
    pub critical_flows: Vec<Vec<f64>>,
    /// kW of critical demand left unserved.
    pub unmet_critical: f64,
    /// kW of load demand (critical or not) left unserved.
    pub shed: f64,
}

impl DispatchProblem<'_> {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Whether the actor takes part in this frame at all.
    pub fn active(&self, i: usize) -> bool {
        let o = &self.offers[i];
        o.connected && !self.failing[i] && !(self.island_mode && o.kind == ActorKind::Utility)
    }

    pub fn capacity(&self, j: usize) -> f64 {
        if self.active(j) {
            self.offers[j].available.max(0.0)
        } else {
            0.0
        }
    }

    /// Whether source `j` may feed sink `i`.
    pub fn eligible(&self, i: usize, j: usize) -> bool {
        if i == j || !self.connectivity[i][j] || !self.active(i) || !self.active(j) {
            return false;
        }
        if self.offers[i].kind == ActorKind::Bess {
            self.offers[j].kind != ActorKind::Bess && self.offers[j].cost < self.offers[i].cost
        } else {
            true
        }
    }

    /// Source indices cheapest first, ties by name.
    pub fn merit_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| {
            self.offers[a]
                .cost
                .total_cmp(&self.offers[b].cost)
                .then_with(|| self.names[a].cmp(&self.names[b]))
        });
        order
    }

    /// Load sinks by descending benefit, ties by name.
    fn load_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len())
            .filter(|&i| self.active(i) && self.offers[i].kind != ActorKind::Bess)
            .collect();
        order.sort_by(|&a, &b| {
            self.bids[b]
                .benefit
                .partial_cmp(&self.bids[a].benefit)
                .unwrap_or(Ordering::Equal)
                .then_with(|| self.names[a].cmp(&self.names[b]))
        });
        order
    }

    pub fn required(&self, i: usize) -> f64 {
        self.bids[i].required.clamp(0.0, self.maximum(i))
    }

    pub fn maximum(&self, i: usize) -> f64 {
        self.bids[i].maximum.max(0.0)
    }
}

struct Ledger {
    spare: Vec<f64>,
    flows: Vec<Vec<f64>>,
}

impl Ledger {
    /// Moves up to `need` kW into sink `i`; returns what was not covered.
    fn fill(&mut self, p: &DispatchProblem<'_>, order: &[usize], i: usize, mut need: f64) -> f64 {
        for &j in order {
            if need <= 0.0 {
                break;
            }
            if self.spare[j] <= 0.0 || !p.eligible(i, j) {
                continue;
            }
            let take = need.min(self.spare[j]);
            self.spare[j] -= take;
            self.flows[i][j] += take;
            need -= take;
        }
        need.max(0.0)
    }
}

pub fn dispatch(p: &DispatchProblem<'_>) -> Dispatch {
    let n = p.len();
    let order = p.merit_order();
    let mut ledger = Ledger {
        spare: (0..n).map(|j| p.capacity(j)).collect(),
        flows: vec![vec![0.0; n]; n],
    };
    let loads = p.load_order();

    let mut unmet_critical = 0.0;
    for &i in &loads {
        unmet_critical += ledger.fill(p, &order, i, p.required(i));
    }
    let critical_flows = ledger.flows.clone();

    let mut shed = unmet_critical;
    for &i in &loads {
        shed += ledger.fill(p, &order, i, p.maximum(i) - p.required(i));
    }

    let mut batteries: Vec<usize> = (0..n)
        .filter(|&i| p.offers[i].kind == ActorKind::Bess && p.active(i))
        .collect();
    batteries.sort_by(|&a, &b| p.names[a].cmp(&p.names[b]));
    for i in batteries {
        let discharging = (0..n).any(|k| ledger.flows[k][i] > 0.0);
        if !discharging {
            ledger.fill(p, &order, i, p.maximum(i));
        }
    }

    let flows = ledger.flows;
    let state_vector = (0..n)
        .map(|a| {
            let provided: f64 = (0..n).map(|i| flows[i][a]).sum();
            let received: f64 = flows[a].iter().sum();
            provided - received
        })
        .collect();
    Dispatch {
        state_vector,
        flows,
        critical_flows,
        unmet_critical,
        shed,
    }
}
