use crate::grid::StartDate;

pub const SECONDS_PER_HOUR: i64 = 3600;
pub const HOURS_PER_DAY: i64 = 24;

/// Gregorian rule: every fourth year, except centuries not divisible by 400.
pub fn is_leap_year(year: i64) -> bool {
    year % 4 == 0 && (year % 100 != 0 || year % 400 == 0)
}

pub fn days_in_year(year: i64) -> i64 {
    if is_leap_year(year) {
        366
    } else {
        365
    }
}

fn leap_years_through(year: i64) -> i64 {
    year.div_euclid(4) - year.div_euclid(100) + year.div_euclid(400)
}

/// Calendar position of a simulation instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timing {
    /// 0-23
    pub hour: i64,
    /// 1-366
    pub day: i64,
    pub year: i64,
    /// Hour of the year, 1-8784.
    pub hour_index: i64,
    pub is_leap_year: bool,
    pub elapsed_hours: f64,
    /// Leap years entered by rolling over from the start year.
    pub num_leap_years: i64,
}

/// Position `elapsed_seconds` after `start`; partial hours round down.
pub fn timing(elapsed_seconds: u64, start: StartDate) -> Timing {
    const HOURS_PER_400_YEARS: u64 = 146_097 * 24;
    let whole_hours = elapsed_seconds / SECONDS_PER_HOUR as u64;
    let mut year = start.year + 400 * (whole_hours / HOURS_PER_400_YEARS) as i64;
    let mut offset =
        ((start.day - 1) * HOURS_PER_DAY + start.hour) as u64 + whole_hours % HOURS_PER_400_YEARS;
    loop {
        let len = (days_in_year(year) * HOURS_PER_DAY) as u64;
        if offset < len {
            break;
        }
        offset -= len;
        year += 1;
    }
    let offset = offset as i64;
    Timing {
        hour: offset % HOURS_PER_DAY,
        day: offset / HOURS_PER_DAY + 1,
        year,
        hour_index: offset + 1,
        is_leap_year: is_leap_year(year),
        elapsed_hours: elapsed_seconds as f64 / SECONDS_PER_HOUR as f64,
        num_leap_years: leap_years_through(year) - leap_years_through(start.year),
    }
}
