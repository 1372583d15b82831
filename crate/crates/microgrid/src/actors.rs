//! Per-actor physics over one frame of `dt` hours.

use crate::MicrogridError;

/// Fraction of the charge rate allowed while a battery sits in its trickle region.
pub const TRICKLE_RATE_FRACTION: f64 = 0.1;

fn contract(ok: bool, what: impl FnOnce() -> String) -> Result<(), MicrogridError> {
    if ok {
        Ok(())
    } else {
        Err(MicrogridError::ContractViolation(what()))
    }
}

fn non_negative(name: &str, x: f64) -> Result<(), MicrogridError> {
    contract(x >= 0.0 && x.is_finite(), || {
        format!("{name} must be non-negative, got {x}")
    })
}

/// PV output in kW for `sunlight` Wh/m² over the hour.
pub fn pv_supply(sunlight: f64, area: f64, efficiency: f64) -> f64 {
    efficiency * sunlight * area / 1000.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BessStep {
    /// kWh
    pub new_level: f64,
    /// kW, positive when discharging.
    pub actual_power: f64,
    pub is_charging: bool,
}

/// Integrates a battery over one frame. `commanded` is positive to discharge.
pub fn bess_step(
    level: f64,
    capacity: f64,
    commanded: f64,
    charge_efficiency: f64,
    max_output: f64,
    max_charge_rate: f64,
    dt: f64,
) -> Result<BessStep, MicrogridError> {
    non_negative("level", level)?;
    non_negative("capacity", capacity)?;
    non_negative("max output", max_output)?;
    non_negative("max charge rate", max_charge_rate)?;
    contract(level <= capacity, || {
        format!("level {level} exceeds capacity {capacity}")
    })?;
    contract((0.0..=1.0).contains(&charge_efficiency), || {
        format!("charge efficiency {charge_efficiency} outside [0, 1]")
    })?;
    contract(dt > 0.0 && dt.is_finite(), || {
        format!("dt must be positive, got {dt}")
    })?;
    contract(commanded.is_finite(), || {
        format!("commanded power {commanded} is not finite")
    })?;

    let p = commanded.clamp(-max_charge_rate, max_output);
    let (new_level, actual_power) = if p < 0.0 {
        let room = capacity - level;
        let stored = -p * charge_efficiency * dt;
        if room <= 0.0 {
            (capacity, 0.0)
        } else if stored > room {
            (capacity, -room / (charge_efficiency * dt))
        } else {
            ((level + stored).min(capacity), p)
        }
    } else if p * dt > level {
        (0.0, level / dt)
    } else {
        ((level - p * dt).max(0.0), p)
    };
    Ok(BessStep {
        new_level,
        actual_power,
        is_charging: actual_power < 0.0,
    })
}

/// Power a battery can deliver over the frame.
pub fn bess_supply(level: f64, max_output: f64, dt: f64) -> f64 {
    max_output.min(level / dt).max(0.0)
}

/// Effective price of battery energy; rises as the battery empties.
pub fn bess_cost(base_cost: f64, scarcity_factor: f64, soc: f64) -> f64 {
    base_cost * (1.0 + scarcity_factor * (1.0 - soc))
}

/// Charge power a battery can accept this frame. Below `trickle_prop` of
/// capacity the rate drops to [`TRICKLE_RATE_FRACTION`] of its maximum.
pub fn trickle_headroom(
    level: f64,
    capacity: f64,
    charge_efficiency: f64,
    max_charge_rate: f64,
    trickle_prop: f64,
    dt: f64,
) -> f64 {
    let rate = if level < trickle_prop * capacity {
        max_charge_rate * TRICKLE_RATE_FRACTION
    } else {
        max_charge_rate
    };
    if charge_efficiency <= 0.0 || level >= capacity {
        return 0.0;
    }
    rate.min((capacity - level) / (charge_efficiency * dt)).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorStep {
    /// L
    pub new_fuel: f64,
    /// kW
    pub actual_power: f64,
    /// L burned this frame.
    pub consumption: f64,
    pub out_of_fuel: bool,
}

/// Burns fuel linearly in output: full output costs `max_consumption` L/h.
#[allow(clippy::too_many_arguments)]
pub fn generator_step(
    fuel: f64,
    commanded: f64,
    max_output: f64,
    max_consumption: f64,
    dt: f64,
    refuel_now: bool,
    capacity: f64,
) -> Result<GeneratorStep, MicrogridError> {
    non_negative("commanded power", commanded)?;
    non_negative("fuel", fuel)?;
    non_negative("max output", max_output)?;
    non_negative("max consumption", max_consumption)?;
    non_negative("fuel capacity", capacity)?;
    contract(dt > 0.0 && dt.is_finite(), || {
        format!("dt must be positive, got {dt}")
    })?;

    let mut power = commanded.min(max_output);
    let mut consumption = if max_output > 0.0 {
        max_consumption * (power / max_output) * dt
    } else {
        0.0
    };
    if consumption > fuel {
        power *= fuel / consumption;
        consumption = fuel;
    }
    let after = (fuel - consumption).max(0.0);
    let new_fuel = if refuel_now { capacity } else { after };
    Ok(GeneratorStep {
        new_fuel,
        actual_power: power,
        consumption,
        out_of_fuel: new_fuel <= 0.0,
    })
}

/// Output the generator can sustain for the whole frame on its fuel.
pub fn generator_supply(fuel: f64, max_output: f64, max_consumption: f64, dt: f64) -> f64 {
    let full_burn = max_consumption * dt;
    if full_burn <= 0.0 {
        return max_output;
    }
    max_output.min(max_output * fuel / full_burn).max(0.0)
}

/// Next scheduled refuel, as an elapsed hour, or -1 when none is pending.
///
/// On the first frame of each simulated day one draw decides whether a
/// refuel happens and a second places it within the following 24 hours.
/// A refuel that has come due is cleared.
pub fn next_refuel_hour(
    current: i64,
    elapsed_hours: f64,
    dt_hours: f64,
    prob_refueling: f64,
    schedule_draw: f64,
    hour_draw: f64,
) -> i64 {
    let day = (elapsed_hours / 24.0).floor();
    let previous_day = ((elapsed_hours - dt_hours) / 24.0).floor();
    if day != previous_day {
        if schedule_draw < prob_refueling {
            elapsed_hours.floor() as i64 + 1 + (hour_draw * 24.0).floor() as i64
        } else {
            -1
        }
    } else if refuel_due(current, elapsed_hours) {
        -1
    } else {
        current
    }
}

pub fn refuel_due(next_refuel_hour: i64, elapsed_hours: f64) -> bool {
    next_refuel_hour >= 0 && elapsed_hours >= next_refuel_hour as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pv_examples() {
        assert_eq!(pv_supply(1000.0, 10.0, 0.2), 2.0);
        assert_eq!(pv_supply(0.0, 33.0, 0.18), 0.0);
        assert!((pv_supply(500.0, 20.0, 0.15) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn bess_examples() {
        let s = bess_step(5.0, 10.0, -2.0, 0.9, 3.0, 3.0, 1.0).unwrap();
        assert!((s.new_level - 6.8).abs() < 1e-12);
        assert!(s.is_charging);
        assert_eq!(s.actual_power, -2.0);

        let s = bess_step(5.0, 10.0, 2.0, 0.9, 3.0, 3.0, 1.0).unwrap();
        assert_eq!(s.new_level, 3.0);
        assert!(!s.is_charging);

        let s = bess_step(10.0, 10.0, -2.0, 0.9, 3.0, 3.0, 1.0).unwrap();
        assert_eq!((s.new_level, s.actual_power), (10.0, 0.0));
    }

    #[test]
    fn bess_clamps_and_limits() {
        let s = bess_step(5.0, 10.0, 9.0, 0.9, 3.0, 2.0, 1.0).unwrap();
        assert_eq!((s.new_level, s.actual_power), (2.0, 3.0));
        let s = bess_step(1.0, 10.0, 3.0, 0.9, 3.0, 2.0, 1.0).unwrap();
        assert_eq!((s.new_level, s.actual_power), (0.0, 1.0));
        let s = bess_step(9.5, 10.0, -2.0, 0.5, 3.0, 2.0, 1.0).unwrap();
        assert_eq!((s.new_level, s.actual_power), (10.0, -1.0));
        assert!(bess_step(-1.0, 10.0, 0.0, 0.9, 1.0, 1.0, 1.0).is_err());
        assert!(bess_step(11.0, 10.0, 0.0, 0.9, 1.0, 1.0, 1.0).is_err());
        assert!(bess_step(1.0, 10.0, 0.0, 0.9, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn generator_examples() {
        let s = generator_step(100.0, 5.0, 10.0, 10.0, 1.0, false, 200.0).unwrap();
        assert_eq!(s.new_fuel, 95.0);
        assert_eq!(s.actual_power, 5.0);

        let s = generator_step(0.0, 5.0, 10.0, 10.0, 1.0, false, 200.0).unwrap();
        assert_eq!(s.actual_power, 0.0);
        assert!(s.out_of_fuel);

        let s = generator_step(100.0, 5.0, 10.0, 10.0, 1.0, true, 200.0).unwrap();
        assert_eq!(s.new_fuel, 200.0);

        let s = generator_step(2.0, 10.0, 10.0, 10.0, 1.0, false, 200.0).unwrap();
        assert_eq!((s.new_fuel, s.actual_power, s.consumption), (0.0, 2.0, 2.0));
        assert!(s.out_of_fuel);

        assert!(generator_step(10.0, -1.0, 10.0, 10.0, 1.0, false, 200.0).is_err());
    }

    #[test]
    fn bess_cost_rises_when_depleted() {
        assert_eq!(bess_cost(0.1, 2.0, 1.0), 0.1);
        assert!((bess_cost(0.1, 2.0, 0.0) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn trickle_region() {
        assert_eq!(trickle_headroom(1.0, 20.0, 0.9, 4.0, 0.1, 1.0), 0.4);
        assert_eq!(trickle_headroom(10.0, 20.0, 0.9, 4.0, 0.1, 1.0), 4.0);
        assert!((trickle_headroom(19.1, 20.0, 0.9, 4.0, 0.1, 1.0) - 1.0).abs() < 1e-12);
        assert_eq!(trickle_headroom(20.0, 20.0, 0.9, 4.0, 0.1, 1.0), 0.0);
    }

    #[test]
    fn supplies_respect_stores() {
        assert_eq!(bess_supply(2.0, 5.0, 1.0), 2.0);
        assert_eq!(bess_supply(20.0, 5.0, 1.0), 5.0);
        assert_eq!(generator_supply(100.0, 10.0, 5.0, 1.0), 10.0);
        assert_eq!(generator_supply(2.5, 10.0, 5.0, 1.0), 5.0);
        assert_eq!(generator_supply(0.0, 10.0, 5.0, 1.0), 0.0);
    }

    #[test]
    fn refuel_scheduling() {
        // first frame of a day, draw succeeds: hour 1 + floor(0.5 * 24)
        assert_eq!(next_refuel_hour(-1, 0.0, 1.0, 0.5, 0.2, 0.5), 13);
        assert_eq!(next_refuel_hour(-1, 24.0, 1.0, 0.5, 0.7, 0.5), -1);
        assert_eq!(next_refuel_hour(13, 5.0, 1.0, 0.5, 0.0, 0.0), 13);
        assert_eq!(next_refuel_hour(13, 13.0, 1.0, 0.5, 0.0, 0.0), -1);
        assert!(refuel_due(13, 13.0) && !refuel_due(13, 12.0) && !refuel_due(-1, 50.0));
    }

    proptest! {
        #[test]
        fn bess_stays_in_bounds(
            cap in 0.1f64..100.0, frac in 0.0f64..=1.0, p in -50.0f64..50.0,
            eta in 0.0f64..=1.0, out in 0.0f64..20.0, rate in 0.0f64..20.0, dt in 0.01f64..4.0,
        ) {
            let level = cap * frac;
            let s = bess_step(level, cap, p, eta, out, rate, dt).unwrap();
            prop_assert!((0.0..=cap).contains(&s.new_level));
            prop_assert!(s.actual_power <= out && s.actual_power >= -rate);
            if s.actual_power > 0.0 {
                prop_assert!((level - s.actual_power * dt - s.new_level).abs() < 1e-9);
            }
        }

        #[test]
        fn generator_burns_linearly(
            fuel in 0.0f64..200.0, p in 0.0f64..30.0, out in 0.1f64..20.0,
            cons in 0.0f64..10.0, dt in 0.1f64..2.0,
        ) {
            let s = generator_step(fuel, p, out, cons, dt, false, 200.0).unwrap();
            prop_assert!(s.new_fuel <= fuel && s.new_fuel >= 0.0);
            prop_assert!(s.actual_power <= out);
            prop_assert!((s.consumption - cons * s.actual_power / out * dt).abs() < 1e-9);
        }
    }
}
