use serde::{Deserialize, Serialize};

use crate::MicrogridError;

/// One participant on the grid, with its nameplate parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ActorSpec {
    Pv {
        name: String,
        /// m²
        area: f64,
        efficiency: f64,
    },
    Bess {
        name: String,
        /// kWh
        charge_capacity: f64,
        /// kWh
        starting_level: f64,
        charge_efficiency: f64,
        /// kW
        max_output: f64,
        /// kW
        max_charge_rate: f64,
        scarcity_factor: f64,
        trickle_prop: f64,
        /// $/kWh
        base_cost: f64,
    },
    Generator {
        name: String,
        /// L
        fuel_capacity: f64,
        /// L
        starting_fuel: f64,
        /// kW
        max_output: f64,
        /// L/h at full output
        max_consumption: f64,
        /// $/kWh
        cost: f64,
        /// Chance per day that a refuel gets scheduled.
        prob_refueling: f64,
    },
    Load {
        name: String,
        /// kW
        normal_load: f64,
        /// kW
        critical_load: f64,
        /// $/kWh
        benefit: f64,
    },
    Building {
        name: String,
        load_table: String,
        normal_key: String,
        lights_key: String,
        equipment_key: String,
    },
    Utility {
        name: String,
        /// $/kWh
        cost: f64,
        /// kW
        max_import: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActorKind {
    Pv,
    Bess,
    Generator,
    Load,
    Building,
    Utility,
}

impl ActorKind {
    pub fn code(self) -> &'static str {
        match self {
            ActorKind::Pv => "pv",
            ActorKind::Bess => "bess",
            ActorKind::Generator => "generator",
            ActorKind::Load => "load",
            ActorKind::Building => "building",
            ActorKind::Utility => "utility",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        Some(match code {
            "pv" => ActorKind::Pv,
            "bess" => ActorKind::Bess,
            "generator" => ActorKind::Generator,
            "load" => ActorKind::Load,
            "building" => ActorKind::Building,
            "utility" => ActorKind::Utility,
            _ => return None,
        })
    }

    pub fn is_sink(self) -> bool {
        matches!(self, ActorKind::Load | ActorKind::Building | ActorKind::Bess)
    }
}

impl ActorSpec {
    pub fn name(&self) -> &str {
        match self {
            ActorSpec::Pv { name, .. }
            | ActorSpec::Bess { name, .. }
            | ActorSpec::Generator { name, .. }
            | ActorSpec::Load { name, .. }
            | ActorSpec::Building { name, .. }
            | ActorSpec::Utility { name, .. } => name,
        }
    }

    pub fn kind(&self) -> ActorKind {
        match self {
            ActorSpec::Pv { .. } => ActorKind::Pv,
            ActorSpec::Bess { .. } => ActorKind::Bess,
            ActorSpec::Generator { .. } => ActorKind::Generator,
            ActorSpec::Load { .. } => ActorKind::Load,
            ActorSpec::Building { .. } => ActorKind::Building,
            ActorSpec::Utility { .. } => ActorKind::Utility,
        }
    }

    fn check(&self) -> Result<(), String> {
        let unit = |what: &str, x: f64| {
            if (0.0..=1.0).contains(&x) {
                Ok(())
            } else {
                Err(format!("{}: {what} {x} outside [0, 1]", self.name()))
            }
        };
        let non_negative = |what: &str, x: f64| {
            if x >= 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(format!("{}: {what} {x} is negative or not finite", self.name()))
            }
        };
        match self {
            ActorSpec::Pv { area, efficiency, .. } => {
                non_negative("area", *area)?;
                unit("efficiency", *efficiency)
            }
            ActorSpec::Bess {
                charge_capacity,
                starting_level,
                charge_efficiency,
                max_output,
                max_charge_rate,
                scarcity_factor,
                trickle_prop,
                base_cost,
                ..
            } => {
                for (what, x) in [
                    ("charge capacity", charge_capacity),
                    ("starting level", starting_level),
                    ("max output", max_output),
                    ("max charge rate", max_charge_rate),
                    ("scarcity factor", scarcity_factor),
                    ("base cost", base_cost),
                ] {
                    non_negative(what, *x)?;
                }
                if *charge_capacity <= 0.0 {
                    return Err(format!("{}: charge capacity must be positive", self.name()));
                }
                if starting_level > charge_capacity {
                    return Err(format!(
                        "{}: starting level {starting_level} exceeds capacity {charge_capacity}",
                        self.name()
                    ));
                }
                unit("charge efficiency", *charge_efficiency)?;
                unit("trickle prop", *trickle_prop)
            }
            ActorSpec::Generator {
                fuel_capacity,
                starting_fuel,
                max_output,
                max_consumption,
                cost,
                prob_refueling,
                ..
            } => {
                for (what, x) in [
                    ("fuel capacity", fuel_capacity),
                    ("starting fuel", starting_fuel),
                    ("max output", max_output),
                    ("max consumption", max_consumption),
                    ("cost", cost),
                ] {
                    non_negative(what, *x)?;
                }
                if starting_fuel > fuel_capacity {
                    return Err(format!(
                        "{}: starting fuel {starting_fuel} exceeds capacity {fuel_capacity}",
                        self.name()
                    ));
                }
                unit("refuel probability", *prob_refueling)
            }
            ActorSpec::Load {
                normal_load,
                critical_load,
                benefit,
                ..
            } => {
                non_negative("normal load", *normal_load)?;
                non_negative("critical load", *critical_load)?;
                non_negative("benefit", *benefit)?;
                if critical_load > normal_load {
                    return Err(format!(
                        "{}: critical load {critical_load} exceeds normal load {normal_load}",
                        self.name()
                    ));
                }
                Ok(())
            }
            ActorSpec::Building { .. } => Ok(()),
            ActorSpec::Utility { cost, max_import, .. } => {
                non_negative("cost", *cost)?;
                non_negative("max import", *max_import)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartDate {
    pub year: i64,
    /// Day of the year, 1-based.
    pub day: i64,
    /// Hour of the day, 0-23.
    pub hour: i64,
}

/// Declarative description of a microgrid and its simulation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub actors: Vec<ActorSpec>,
    /// `connectivity[i][j]`: actor i may receive from actor j.
    pub connectivity: Vec<Vec<bool>>,
    pub island_mode: bool,
    pub has_random_failure: bool,
    /// Per actor, chance per step that a working actor fails.
    pub prob_failing: Vec<f64>,
    /// Per actor, chance per step that a failing actor is repaired.
    pub prob_fixed: Vec<f64>,
    /// Seconds per frame.
    pub time_step: u32,
    pub start: StartDate,
    pub use_random_date: bool,
    pub min_year: i64,
    pub max_year: i64,
    /// Multiplier on every `Load` actor's demand.
    #[serde(default = "unit_scale")]
    pub load_scale: f64,
}

fn unit_scale() -> f64 {
    1.0
}

impl GridSpec {
    /// Checks every structural and per-actor invariant.
    pub fn validate(&self) -> Result<(), MicrogridError> {
        let fail = |m: String| Err(MicrogridError::SpecInvariantViolation(m));
        let n = self.actors.len();
        if n == 0 {
            return fail("the grid has no actors".into());
        }
        let mut names: Vec<&str> = self.actors.iter().map(ActorSpec::name).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return fail(format!("actor name '{}' is used twice", w[0]));
        }
        if let Some(a) = self.actors.iter().find(|a| a.name().is_empty()) {
            return fail(format!("a {} actor has an empty name", a.kind().code()));
        }
        if self.connectivity.len() != n || self.connectivity.iter().any(|row| row.len() != n) {
            return fail(format!("connectivity must be {n}x{n}"));
        }
        if let Some(i) = (0..n).find(|&i| self.connectivity[i][i]) {
            return fail(format!(
                "actor '{}' is connected to itself",
                self.actors[i].name()
            ));
        }
        if self.prob_failing.len() != n || self.prob_fixed.len() != n {
            return fail(format!(
                "failure probabilities must have one entry per actor ({n})"
            ));
        }
        if let Some(p) = self
            .prob_failing
            .iter()
            .chain(&self.prob_fixed)
            .find(|p| !(0.0..=1.0).contains(*p))
        {
            return fail(format!("probability {p} outside [0, 1]"));
        }
        if self.time_step == 0 {
            return fail("time step must be positive".into());
        }
        if !(1..=366).contains(&self.start.day) || !(0..24).contains(&self.start.hour) {
            return fail(format!(
                "start day {} / hour {} out of range",
                self.start.day, self.start.hour
            ));
        }
        if self.start.day == 366 && !crate::timing::is_leap_year(self.start.year) {
            return fail(format!("{} has no day 366", self.start.year));
        }
        if self.min_year > self.max_year {
            return fail(format!(
                "min year {} exceeds max year {}",
                self.min_year, self.max_year
            ));
        }
        if !(self.load_scale >= 0.0 && self.load_scale.is_finite()) {
            return fail(format!("load scale {} must be non-negative", self.load_scale));
        }
        for a in &self.actors {
            a.check().map_err(MicrogridError::SpecInvariantViolation)?;
        }
        Ok(())
    }

    pub fn names(&self) -> Vec<&str> {
        self.actors.iter().map(ActorSpec::name).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.actors.iter().position(|a| a.name() == name)
    }

    /// Tables referenced by building actors, plus `solar` when a PV exists.
    pub fn required_tables(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.actors.iter().any(|a| a.kind() == ActorKind::Pv) {
            out.push(crate::build::SOLAR_TABLE.to_owned());
        }
        for a in &self.actors {
            if let ActorSpec::Building { load_table, .. } = a {
                if !out.contains(load_table) {
                    out.push(load_table.clone());
                }
            }
        }
        out
    }

    /// Five-actor demonstration grid: PV array, battery, diesel generator,
    /// critical load and utility feeder, with a building on the same bus.
    pub fn demo(island_mode: bool) -> Self {
        let actors = vec![
            ActorSpec::Pv {
                name: "pv".into(),
                area: 100.0,
                efficiency: 0.2,
            },
            ActorSpec::Bess {
                name: "battery".into(),
                charge_capacity: 20.0,
                starting_level: 10.0,
                charge_efficiency: 0.9,
                max_output: 5.0,
                max_charge_rate: 4.0,
                scarcity_factor: 1.5,
                trickle_prop: 0.1,
                base_cost: 0.05,
            },
            ActorSpec::Generator {
                name: "generator".into(),
                fuel_capacity: 200.0,
                starting_fuel: 150.0,
                max_output: 15.0,
                max_consumption: 5.0,
                cost: 0.3,
                prob_refueling: 0.5,
            },
            ActorSpec::Load {
                name: "clinic".into(),
                normal_load: 3.0,
                critical_load: 1.5,
                benefit: 1.0,
            },
            ActorSpec::Building {
                name: "office".into(),
                load_table: crate::build::BUILDING_TABLE.into(),
                normal_key: "normal_kw".into(),
                lights_key: "lights_kw".into(),
                equipment_key: "equipment_kw".into(),
            },
            ActorSpec::Utility {
                name: "utility".into(),
                cost: 0.15,
                max_import: 50.0,
            },
        ];
        let n = actors.len();
        // every sink may draw from every source
        let connectivity = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        i != j
                            && actors[i].kind().is_sink()
                            && !matches!(actors[j].kind(), ActorKind::Load | ActorKind::Building)
                    })
                    .collect()
            })
            .collect();
        GridSpec {
            actors,
            connectivity,
            island_mode,
            has_random_failure: true,
            prob_failing: vec![0.01; n],
            prob_fixed: vec![0.2; n],
            time_step: 3600,
            start: StartDate {
                year: 2004,
                day: 152,
                hour: 0,
            },
            use_random_date: false,
            min_year: 2000,
            max_year: 2010,
            load_scale: 1.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_violation(spec: &GridSpec) {
        assert!(matches!(
            spec.validate(),
            Err(MicrogridError::SpecInvariantViolation(_))
        ));
    }

    #[test]
    fn demo_is_valid() {
        GridSpec::demo(true).validate().unwrap();
        GridSpec::demo(false).validate().unwrap();
    }

    #[test]
    fn empty_grid_is_rejected() {
        let mut spec = GridSpec::demo(false);
        spec.actors.clear();
        spec.connectivity.clear();
        spec.prob_failing.clear();
        spec.prob_fixed.clear();
        assert_violation(&spec);
    }

    #[test]
    fn structural_invariants() {
        let mut spec = GridSpec::demo(false);
        spec.connectivity[0][0] = true;
        assert_violation(&spec);

        let mut spec = GridSpec::demo(false);
        spec.connectivity.pop();
        assert_violation(&spec);

        let mut spec = GridSpec::demo(false);
        spec.prob_fixed[2] = 1.5;
        assert_violation(&spec);

        let mut spec = GridSpec::demo(false);
        let dup = spec.actors[0].clone();
        spec.actors[1] = dup;
        assert_violation(&spec);
    }

    #[test]
    fn actor_invariants() {
        let mut spec = GridSpec::demo(false);
        if let ActorSpec::Bess { starting_level, .. } = &mut spec.actors[1] {
            *starting_level = 25.0;
        }
        assert_violation(&spec);

        let mut spec = GridSpec::demo(false);
        if let ActorSpec::Generator { starting_fuel, .. } = &mut spec.actors[2] {
            *starting_fuel = 201.0;
        }
        assert_violation(&spec);

        let mut spec = GridSpec::demo(false);
        if let ActorSpec::Load { critical_load, .. } = &mut spec.actors[3] {
            *critical_load = 3.5;
        }
        assert_violation(&spec);

        let mut spec = GridSpec::demo(false);
        if let ActorSpec::Pv { efficiency, .. } = &mut spec.actors[0] {
            *efficiency = 1.2;
        }
        assert_violation(&spec);
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = GridSpec::demo(true);
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<GridSpec>(&text).unwrap(), spec);
    }
}
