//! Per-frame checks on a dispatch and the problem it solved.

use crate::dispatch::{Dispatch, DispatchProblem};
use crate::grid::ActorKind;

/// kW below which a quantity counts as zero.
pub const POWER_TOLERANCE: f64 = 1e-9;

fn spare(p: &DispatchProblem<'_>, d: &Dispatch, j: usize) -> f64 {
    let used: f64 = (0..p.len()).map(|i| d.flows[i][j]).sum();
    p.capacity(j) - used
}

/// Σ state vector = 0.
pub fn power_balance(d: &Dispatch) -> Result<(), String> {
    let total: f64 = d.state_vector.iter().sum();
    if total.abs() <= POWER_TOLERANCE {
        Ok(())
    } else {
        Err(format!("state vector sums to {total} kW"))
    }
}

/// Failing actors neither provide nor receive.
pub fn failure_coupling(p: &DispatchProblem<'_>, d: &Dispatch) -> Result<(), String> {
    for i in 0..p.len() {
        if p.failing[i] && d.state_vector[i] != 0.0 {
            return Err(format!(
                "failing actor '{}' at {} kW",
                p.names[i], d.state_vector[i]
            ));
        }
    }
    Ok(())
}

/// No flow comes from a source pricier than an idle eligible one.
pub fn merit_order(p: &DispatchProblem<'_>, d: &Dispatch) -> Result<(), String> {
    for i in 0..p.len() {
        for j in 0..p.len() {
            if d.flows[i][j] <= POWER_TOLERANCE {
                continue;
            }
            for m in 0..p.len() {
                if p.eligible(i, m) && p.offers[m].cost < p.offers[j].cost && spare(p, d, m) > POWER_TOLERANCE
                {
                    return Err(format!(
                        "'{}' draws from '{}' at {} while '{}' at {} has spare capacity",
                        p.names[i], p.names[j], p.offers[j].cost, p.names[m], p.offers[m].cost
                    ));
                }
            }
        }
    }
    Ok(())
}

/// While a sink's critical demand is unmet, no source that could feed it
/// serves anything else beyond critical demand.
pub fn criticality(p: &DispatchProblem<'_>, d: &Dispatch) -> Result<(), String> {
    let n = p.len();
    for k in 0..n {
        if !p.active(k) || p.offers[k].kind == ActorKind::Bess {
            continue;
        }
        let served: f64 = d.critical_flows[k].iter().sum();
        if p.required(k) - served <= POWER_TOLERANCE {
            continue;
        }
        for j in (0..n).filter(|&j| p.eligible(k, j)) {
            let beyond_critical: f64 = (0..n).map(|i| d.flows[i][j] - d.critical_flows[i][j]).sum();
            if beyond_critical > POWER_TOLERANCE {
                return Err(format!(
                    "'{}' serves {beyond_critical} kW of normal demand while '{}' lacks critical supply",
                    p.names[j], p.names[k]
                ));
            }
        }
    }
    Ok(())
}

/// A generator runs only when every cheaper source its sinks could use is exhausted.
pub fn generator_engagement(p: &DispatchProblem<'_>, d: &Dispatch) -> Result<(), String> {
    for g in (0..p.len()).filter(|&g| p.offers[g].kind == ActorKind::Generator) {
        for i in 0..p.len() {
            if d.flows[i][g] <= POWER_TOLERANCE {
                continue;
            }
            for m in 0..p.len() {
                if p.eligible(i, m) && p.offers[m].cost < p.offers[g].cost && spare(p, d, m) > POWER_TOLERANCE
                {
                    return Err(format!(
                        "generator '{}' feeds '{}' while cheaper '{}' has spare capacity",
                        p.names[g], p.names[i], p.names[m]
                    ));
                }
            }
        }
    }
    Ok(())
}

/// Every check above, in order; returns the first failure.
pub fn check_dispatch(p: &DispatchProblem<'_>, d: &Dispatch) -> Result<(), String> {
    power_balance(d)?;
    failure_coupling(p, d)?;
    merit_order(p, d)?;
    criticality(p, d)?;
    generator_engagement(p, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispatch::{dispatch, Bid, Offer};
    use proptest::prelude::*;

    const KINDS: [ActorKind; 6] = [
        ActorKind::Pv,
        ActorKind::Bess,
        ActorKind::Generator,
        ActorKind::Load,
        ActorKind::Building,
        ActorKind::Utility,
    ];

    fn actor() -> impl Strategy<Value = (usize, f64, f64, f64, f64, f64, bool, bool)> {
        (
            0..KINDS.len(),
            0.0f64..10.0,
            prop_oneof![Just(0.0), Just(0.15), Just(0.3), 0.0f64..0.5],
            0.0f64..1.0,
            0.0f64..8.0,
            0.0f64..3.0,
            proptest::bool::weighted(0.9),
            proptest::bool::weighted(0.15),
        )
    }

    proptest! {
        #[test]
        fn greedy_dispatch_satisfies_invariants(
            actors in proptest::collection::vec(actor(), 1..7),
            cells in proptest::collection::vec(proptest::bool::weighted(0.6), 49),
            island_mode: bool,
        ) {
            let n = actors.len();
            let names: Vec<String> = (0..n).map(|i| format!("a{i}")).collect();
            let offers: Vec<Offer> = actors
                .iter()
                .map(|&(k, avail, cost, _, _, _, connected, _)| Offer {
                    kind: KINDS[k],
                    available: if KINDS[k].is_sink() && KINDS[k] != ActorKind::Bess { 0.0 } else { avail },
                    cost,
                    connected,
                })
                .collect();
            let bids: Vec<Bid> = actors
                .iter()
                .map(|&(k, _, _, frac, max, benefit, _, _)| {
                    if KINDS[k].is_sink() {
                        let required = if KINDS[k] == ActorKind::Bess { 0.0 } else { max * frac };
                        Bid { required, maximum: max, benefit }
                    } else {
                        Bid { required: 0.0, maximum: 0.0, benefit: 0.0 }
                    }
                })
                .collect();
            let connectivity: Vec<Vec<bool>> =
                (0..n).map(|i| (0..n).map(|j| i != j && cells[i * 7 + j]).collect()).collect();
            let failing: Vec<bool> = actors.iter().map(|a| a.7).collect();
            let p = DispatchProblem {
                names: &names,
                offers: &offers,
                bids: &bids,
                connectivity: &connectivity,
                island_mode,
                failing: &failing,
            };
            let d = dispatch(&p);
            prop_assert_eq!(check_dispatch(&p, &d), Ok(()));
            for j in 0..n {
                prop_assert!(spare(&p, &d, j) >= -POWER_TOLERANCE);
            }
            for i in 0..n {
                let received: f64 = d.flows[i].iter().sum();
                prop_assert!(received <= p.maximum(i) + POWER_TOLERANCE);
            }
        }
    }
}
