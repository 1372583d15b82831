//! Domain functions exposed to edge relations.

use chg_core::expr::{
    bool_arg, probability_arg, real_arg, Arity, CallContext, DuplicateBuiltin, EvalError, Registry,
};
use chg_core::Value;

use crate::actors;
use crate::dispatch::{dispatch, Bid, Dispatch, DispatchProblem, Offer};
use crate::failure::actor_failure_step;
use crate::grid::{ActorKind, StartDate};
use crate::timing::{is_leap_year, timing};

fn mismatch(context: &str, v: &Value) -> EvalError {
    EvalError::TypeMismatch {
        context: context.to_owned(),
        found: v.type_name().to_owned(),
    }
}

fn int_arg(name: &str, v: &Value) -> Result<i64, EvalError> {
    v.as_i64().ok_or_else(|| mismatch(name, v))
}

fn tuple_arg<'v>(name: &str, v: &'v Value) -> Result<&'v [Value], EvalError> {
    v.as_tuple().ok_or_else(|| mismatch(name, v))
}

fn reals(items: impl IntoIterator<Item = f64>) -> Value {
    Value::Tuple(items.into_iter().map(Value::Real).collect())
}

fn matrix(rows: &[Vec<f64>]) -> Value {
    Value::Tuple(rows.iter().map(|r| reals(r.iter().copied())).collect())
}

fn domain(e: crate::MicrogridError) -> EvalError {
    EvalError::Domain(e.to_string())
}

/// Field order of the `timing` builtin's tuple.
pub const TIMING_FIELDS: [&str; 7] = [
    "hour",
    "day",
    "year",
    "hour index",
    "is leap year",
    "elapsed hours",
    "num leap years",
];

/// Field order of the `dispatch` builtin's tuple.
pub const DISPATCH_FIELDS: [&str; 5] = [
    "state vector",
    "unmet critical",
    "flows",
    "critical flows",
    "shed load",
];

pub fn offer_from_value(v: &Value) -> Result<Offer, EvalError> {
    let name = "supply tuple";
    let t = tuple_arg(name, v)?;
    let [kind, available, cost, connected, _per_unit] = t else {
        return Err(EvalError::Domain(format!(
            "{name} needs 5 items, got {}",
            t.len()
        )));
    };
    let kind = kind
        .as_str()
        .and_then(ActorKind::from_code)
        .ok_or_else(|| EvalError::Domain(format!("unknown actor kind {kind}")))?;
    Ok(Offer {
        kind,
        available: real_arg(name, available)?,
        cost: real_arg(name, cost)?,
        connected: bool_arg(name, connected)?,
    })
}

pub fn bid_from_value(v: &Value) -> Result<Bid, EvalError> {
    let name = "demand tuple";
    let t = tuple_arg(name, v)?;
    let [required, maximum, benefit] = t else {
        return Err(EvalError::Domain(format!(
            "{name} needs 3 items, got {}",
            t.len()
        )));
    };
    Ok(Bid {
        required: real_arg(name, required)?,
        maximum: real_arg(name, maximum)?,
        benefit: real_arg(name, benefit)?,
    })
}

fn bools(name: &str, v: &Value) -> Result<Vec<bool>, EvalError> {
    tuple_arg(name, v)?.iter().map(|b| bool_arg(name, b)).collect()
}

fn real_rows(name: &str, v: &Value) -> Result<Vec<Vec<f64>>, EvalError> {
    tuple_arg(name, v)?
        .iter()
        .map(|row| tuple_arg(name, row)?.iter().map(|x| real_arg(name, x)).collect())
        .collect()
}

/// Reads back the tuple produced by the `dispatch` builtin.
pub fn dispatch_from_value(v: &Value) -> Result<Dispatch, EvalError> {
    let name = "dispatch";
    let t = tuple_arg(name, v)?;
    let [sv, unmet, flows, critical, shed] = t else {
        return Err(EvalError::Domain(format!(
            "{name} needs 5 items, got {}",
            t.len()
        )));
    };
    Ok(Dispatch {
        state_vector: tuple_arg(name, sv)?
            .iter()
            .map(|x| real_arg(name, x))
            .collect::<Result<_, _>>()?,
        unmet_critical: real_arg(name, unmet)?,
        flows: real_rows(name, flows)?,
        critical_flows: real_rows(name, critical)?,
        shed: real_arg(name, shed)?,
    })
}

fn dispatch_builtin(a: &[Value]) -> Result<Value, EvalError> {
    let name = "dispatch";
    let names: Vec<String> = tuple_arg(name, &a[0])?
        .iter()
        .map(|v| v.as_str().map(str::to_owned).ok_or_else(|| mismatch(name, v)))
        .collect::<Result<_, _>>()?;
    let n = names.len();
    if a.len() != 4 + 2 * n {
        return Err(EvalError::Domain(format!(
            "dispatch over {n} actors needs {} arguments, got {}",
            4 + 2 * n,
            a.len()
        )));
    }
    let connectivity: Vec<Vec<bool>> = tuple_arg(name, &a[1])?
        .iter()
        .map(|row| bools(name, row))
        .collect::<Result<_, _>>()?;
    if connectivity.len() != n || connectivity.iter().any(|r| r.len() != n) {
        return Err(EvalError::Domain(format!("connectivity must be {n}x{n}")));
    }
    let island_mode = bool_arg(name, &a[2])?;
    let failing = bools(name, &a[3])?;
    if failing.len() != n {
        return Err(EvalError::Domain(format!("failing list must have {n} entries")));
    }
    let offers: Vec<Offer> = a[4..4 + n]
        .iter()
        .map(offer_from_value)
        .collect::<Result<_, _>>()?;
    let bids: Vec<Bid> = a[4 + n..].iter().map(bid_from_value).collect::<Result<_, _>>()?;
    let d = dispatch(&DispatchProblem {
        names: &names,
        offers: &offers,
        bids: &bids,
        connectivity: &connectivity,
        island_mode,
        failing: &failing,
    });
    Ok(Value::Tuple(vec![
        reals(d.state_vector.iter().copied()),
        Value::Real(d.unmet_critical),
        matrix(&d.flows),
        matrix(&d.critical_flows),
        Value::Real(d.shed),
    ]))
}

type Func = fn(&[Value], &mut CallContext<'_>) -> Result<Value, EvalError>;

fn table() -> Vec<(&'static str, Arity, &'static str, Func)> {
    vec![
        ("is_leap_year", Arity::Exact(1), "is_leap_year(year)", |a, _| {
            Ok(Value::Bool(is_leap_year(int_arg("is_leap_year", &a[0])?)))
        }),
        (
            "timing",
            Arity::Exact(4),
            "timing(seconds, start year, start day, start hour) -> (hour, day, year, hour index, is leap year, elapsed hours, num leap years)",
            |a, _| {
                let seconds = int_arg("timing", &a[0])?;
                let seconds = u64::try_from(seconds)
                    .map_err(|_| EvalError::Domain(format!("elapsed seconds {seconds} is negative")))?;
                let start = StartDate {
                    year: int_arg("timing", &a[1])?,
                    day: int_arg("timing", &a[2])?,
                    hour: int_arg("timing", &a[3])?,
                };
                if !(1..=366).contains(&start.day) || !(0..24).contains(&start.hour) {
                    return Err(EvalError::Domain(format!(
                        "start day {} / hour {} out of range",
                        start.day, start.hour
                    )));
                }
                let t = timing(seconds, start);
                Ok(Value::Tuple(vec![
                    Value::Int(t.hour),
                    Value::Int(t.day),
                    Value::Int(t.year),
                    Value::Int(t.hour_index),
                    Value::Bool(t.is_leap_year),
                    Value::Real(t.elapsed_hours),
                    Value::Int(t.num_leap_years),
                ]))
            },
        ),
        ("pv_supply", Arity::Exact(3), "pv_supply(sunlight, area, efficiency) in kW", |a, _| {
            let f = |i| real_arg("pv_supply", &a[i]);
            let (sun, area, eff) = (f(0)?, f(1)?, f(2)?);
            if sun < 0.0 || area < 0.0 || eff < 0.0 {
                return Err(EvalError::Domain("pv_supply inputs must be non-negative".into()));
            }
            Ok(Value::Real(actors::pv_supply(sun, area, eff)))
        }),
        (
            "bess_step",
            Arity::Exact(7),
            "bess_step(level, capacity, commanded, efficiency, max output, max charge rate, dt) -> (new level, actual power, is charging)",
            |a, _| {
                let f = |i| real_arg("bess_step", &a[i]);
                let s = actors::bess_step(f(0)?, f(1)?, f(2)?, f(3)?, f(4)?, f(5)?, f(6)?).map_err(domain)?;
                Ok(Value::Tuple(vec![
                    Value::Real(s.new_level),
                    Value::Real(s.actual_power),
                    Value::Bool(s.is_charging),
                ]))
            },
        ),
        ("bess_supply", Arity::Exact(3), "bess_supply(level, max output, dt)", |a, _| {
            let f = |i| real_arg("bess_supply", &a[i]);
            Ok(Value::Real(actors::bess_supply(f(0)?, f(1)?, f(2)?)))
        }),
        ("bess_cost", Arity::Exact(3), "bess_cost(base cost, scarcity factor, soc)", |a, _| {
            let f = |i| real_arg("bess_cost", &a[i]);
            Ok(Value::Real(actors::bess_cost(f(0)?, f(1)?, f(2)?)))
        }),
        (
            "trickle_headroom",
            Arity::Exact(6),
            "trickle_headroom(level, capacity, efficiency, max charge rate, trickle prop, dt)",
            |a, _| {
                let f = |i| real_arg("trickle_headroom", &a[i]);
                Ok(Value::Real(actors::trickle_headroom(f(0)?, f(1)?, f(2)?, f(3)?, f(4)?, f(5)?)))
            },
        ),
        (
            "generator_step",
            Arity::Exact(7),
            "generator_step(fuel, commanded, max output, max consumption, dt, refuel now, capacity) -> (new fuel, actual power, consumption, out of fuel)",
            |a, _| {
                let f = |i| real_arg("generator_step", &a[i]);
                let refuel = bool_arg("generator_step", &a[5])?;
                let s = actors::generator_step(f(0)?, f(1)?, f(2)?, f(3)?, f(4)?, refuel, f(6)?).map_err(domain)?;
                Ok(Value::Tuple(vec![
                    Value::Real(s.new_fuel),
                    Value::Real(s.actual_power),
                    Value::Real(s.consumption),
                    Value::Bool(s.out_of_fuel),
                ]))
            },
        ),
        (
            "generator_supply",
            Arity::Exact(4),
            "generator_supply(fuel, max output, max consumption, dt)",
            |a, _| {
                let f = |i| real_arg("generator_supply", &a[i]);
                Ok(Value::Real(actors::generator_supply(f(0)?, f(1)?, f(2)?, f(3)?)))
            },
        ),
        (
            "next_refuel_hour",
            Arity::Exact(4),
            "next_refuel_hour(current, elapsed hours, dt hours, prob refueling); two draws",
            |a, cx| {
                let current = int_arg("next_refuel_hour", &a[0])?;
                let elapsed = real_arg("next_refuel_hour", &a[1])?;
                let dt = real_arg("next_refuel_hour", &a[2])?;
                let p = probability_arg("next_refuel_hour", &a[3])?;
                let (schedule, hour) = (cx.draw(), cx.draw());
                Ok(Value::Int(actors::next_refuel_hour(current, elapsed, dt, p, schedule, hour)))
            },
        ),
        (
            "failure_step",
            Arity::Exact(3),
            "failure_step(failing, prob failing, prob fixed); one draw",
            |a, cx| {
                let failing = bool_arg("failure_step", &a[0])?;
                let pf = probability_arg("failure_step", &a[1])?;
                let px = probability_arg("failure_step", &a[2])?;
                Ok(Value::Bool(actor_failure_step(failing, pf, px, cx.draw())))
            },
        ),
        (
            "dispatch",
            Arity::AtLeast(4),
            "dispatch(names, connectivity, islanded, failing, supply tuples..., demand tuples...)",
            |a, _| dispatch_builtin(a),
        ),
    ]
}

/// Adds the microgrid functions to `registry`.
pub fn register_builtins(registry: &mut Registry) -> Result<(), DuplicateBuiltin> {
    for (name, arity, doc, f) in table() {
        registry.register(name, arity, doc, f)?;
    }
    Ok(())
}

/// Core functions plus the microgrid set.
pub fn microgrid_registry() -> Registry {
    let mut r = Registry::core();
    register_builtins(&mut r).expect("microgrid builtin names do not clash with core ones");
    r
}
