//! Seeded stand-ins for hourly irradiance and building-load datasets.
//!
//! Hour `h` (0-based) falls on day `h / 24 + 1` at local hour `h % 24`; the
//! `hour_index` column is `h + 1` so it lines up with the timing builtin.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::table::{Column, ColumnType, Table};
use crate::value::Value;

/// Hours in a leap year; the default length of generated tables.
pub const HOURS_PER_LEAP_YEAR: usize = 8784;

pub fn seasonal(day: f64) -> f64 {
    0.75 + 0.25 * (2.0 * PI * (day - 172.0) / 365.0).cos()
}

pub fn diurnal(hour: f64) -> f64 {
    if (6.0..=18.0).contains(&hour) {
        (PI * (hour - 6.0) / 12.0).sin()
    } else {
        0.0
    }
}

fn column(name: &str, ty: ColumnType) -> Column {
    Column {
        name: name.to_owned(),
        ty,
    }
}

/// Uniform in `[-fraction, fraction]`; always consumes exactly one draw.
fn noise(rng: &mut ChaCha8Rng, fraction: f64) -> f64 {
    fraction * (2.0 * rng.gen::<f64>() - 1.0)
}

/// Table `solar` with columns `hour_index` and `ghi` (Wh/m² over the hour).
/// `noise_fraction` must lie in `[0, 1)`.
pub fn generate_synthetic_solar(hours: usize, seed: u64, peak_irradiance: f64, noise_fraction: f64) -> Table {
    assert!(
        (0.0..1.0).contains(&noise_fraction),
        "noise_fraction must be in [0, 1)"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..hours)
        .map(|h| {
            let day = (h / 24 + 1) as f64;
            let hour = (h % 24) as f64;
            let eps = noise(&mut rng, noise_fraction);
            let ghi = (peak_irradiance * seasonal(day) * diurnal(hour) * (1.0 + eps)).max(0.0);
            vec![Value::Int(h as i64 + 1), Value::Real(ghi)]
        })
        .collect();
    Table::new(
        "solar",
        vec![
            column("hour_index", ColumnType::Integer),
            column("ghi", ColumnType::Real),
        ],
        rows,
    )
    .expect("rows match columns")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildingLoadParams {
    pub base_kw: f64,
    pub lights_fraction: f64,
    pub equipment_fraction: f64,
    pub noise_fraction: f64,
}

impl Default for BuildingLoadParams {
    fn default() -> Self {
        Self {
            base_kw: 10.0,
            lights_fraction: 0.2,
            equipment_fraction: 0.3,
            noise_fraction: 0.1,
        }
    }
}

/// Occupancy multiplier: 1.0 on weekdays from 09:00 to 17:00, else 0.3.
/// Day 1 is a Monday.
pub fn occupancy(day: usize, hour: usize) -> f64 {
    let weekday = (day - 1) % 7 < 5;
    if weekday && (9..17).contains(&hour) {
        1.0
    } else {
        0.3
    }
}

/// Table `building` with columns `hour_index`, `normal_kw`, `lights_kw`, `equipment_kw`.
/// Fractions are non-negative, lights plus equipment at most 1, noise below 1.
pub fn generate_synthetic_building_load(hours: usize, seed: u64, params: BuildingLoadParams) -> Table {
    let BuildingLoadParams {
        base_kw,
        lights_fraction,
        equipment_fraction,
        noise_fraction,
    } = params;
    assert!(lights_fraction >= 0.0 && equipment_fraction >= 0.0);
    assert!(lights_fraction + equipment_fraction <= 1.0);
    assert!((0.0..1.0).contains(&noise_fraction));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..hours)
        .map(|h| {
            let eps = noise(&mut rng, noise_fraction);
            let normal = base_kw * occupancy(h / 24 + 1, h % 24) * (1.0 + eps);
            vec![
                Value::Int(h as i64 + 1),
                Value::Real(normal),
                Value::Real(normal * lights_fraction),
                Value::Real(normal * equipment_fraction),
            ]
        })
        .collect();
    Table::new(
        "building",
        vec![
            column("hour_index", ColumnType::Integer),
            column("normal_kw", ColumnType::Real),
            column("lights_kw", ColumnType::Real),
            column("equipment_kw", ColumnType::Real),
        ],
        rows,
    )
    .expect("rows match columns")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn real(t: &Table, row: usize, col: &str) -> f64 {
        t.rows()[row][t.column_index(col).unwrap()].as_f64().unwrap()
    }

    #[test]
    fn solar_shape() {
        let t = generate_synthetic_solar(HOURS_PER_LEAP_YEAR, 7, 1000.0, 0.2);
        assert_eq!(t.row_count(), 8784);
        assert_eq!(real(&t, 0, "ghi"), 0.0);
        assert_eq!(t.rows()[0][0], Value::Int(1));
        let noon_172 = 171 * 24 + 12;
        let clean = generate_synthetic_solar(HOURS_PER_LEAP_YEAR, 7, 1000.0, 0.0);
        assert!((real(&clean, noon_172, "ghi") - 1000.0).abs() < 1e-9);
        assert!(t.column("ghi").unwrap().all(|v| v.as_f64().unwrap() >= 0.0));
    }

    #[test]
    fn solar_matches_formula_oracle() {
        let t = generate_synthetic_solar(24 * 3, 1, 800.0, 0.0);
        for h in 0..72 {
            let (d, hr) = ((h / 24 + 1) as f64, (h % 24) as f64);
            let expect = if (6.0..=18.0).contains(&hr) {
                800.0
                    * (0.75 + 0.25 * (2.0 * PI * (d - 172.0) / 365.0).cos())
                    * (PI * (hr - 6.0) / 12.0).sin()
            } else {
                0.0
            };
            assert!((real(&t, h, "ghi") - expect.max(0.0)).abs() < 1e-9, "hour {h}");
        }
    }

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(
            generate_synthetic_solar(500, 3, 900.0, 0.1),
            generate_synthetic_solar(500, 3, 900.0, 0.1)
        );
        assert_ne!(
            generate_synthetic_solar(500, 3, 900.0, 0.1),
            generate_synthetic_solar(500, 4, 900.0, 0.1)
        );
        let p = BuildingLoadParams::default();
        assert_eq!(
            generate_synthetic_building_load(300, 9, p),
            generate_synthetic_building_load(300, 9, p)
        );
    }

    #[test]
    fn building_profile() {
        let quiet = BuildingLoadParams {
            base_kw: 10.0,
            lights_fraction: 0.0,
            equipment_fraction: 0.4,
            noise_fraction: 0.0,
        };
        let t = generate_synthetic_building_load(24 * 7, 0, quiet);
        assert!((real(&t, 3, "normal_kw") - 3.0).abs() < 1e-12);
        assert!((real(&t, 10, "normal_kw") - 10.0).abs() < 1e-12);
        // day 6 is a Saturday
        assert!((real(&t, 5 * 24 + 10, "normal_kw") - 3.0).abs() < 1e-12);
        assert!(t.column("lights_kw").unwrap().all(|v| *v == Value::Real(0.0)));

        let noisy = generate_synthetic_building_load(1000, 5, BuildingLoadParams::default());
        for r in 0..noisy.row_count() {
            let normal = real(&noisy, r, "normal_kw");
            let remainder = normal - real(&noisy, r, "lights_kw") - real(&noisy, r, "equipment_kw");
            assert!(remainder >= 0.0);
            let base = 10.0 * occupancy(r / 24 + 1, r % 24);
            assert!((normal / base - 1.0).abs() <= 0.1 + 1e-12);
        }
    }
}
