//! Schedule tables: one row per interval with every unit's output, the EV
//! fleet's output, the load and the reserve margin.
//!
//! ```text
//! hour,unit1,...,unitN,v2g,load,reserve_pct
//! 1,455.000000,372.270000,...,-127.270000,700.000000,10.00
//! ```
//!
//! A unit counts as committed when its printed output is positive.

use std::fmt::Write as _;

use thiserror::Error;

use crate::dispatch::DispatchResult;
use crate::model::Instance;
use crate::solution::{Commitment, Solution};

/// Decimal places used for MW columns.
pub const MW_DECIMALS: usize = 6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error("schedule has {found} columns, expected {expected}")]
    Columns { expected: usize, found: usize },
    #[error("schedule has {found} rows, expected {expected}")]
    Rows { expected: usize, found: usize },
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
}

/// Reserve margin at `t` as a percentage of net demand.
pub fn reserve_percent(instance: &Instance, solution: &Solution, t: usize) -> f64 {
    let net = solution.net_demand(instance, t);
    let capacity = solution.commitment.committed_capacity(instance, t);
    100.0 * (capacity - net) / net
}

pub fn header(units: usize) -> String {
    let mut h = String::from("hour");
    for i in 1..=units {
        let _ = write!(h, ",unit{i}");
    }
    h.push_str(",v2g,load,reserve_pct");
    h
}

pub fn to_csv(instance: &Instance, solution: &Solution, dispatch: &DispatchResult) -> String {
    let mut out = header(instance.unit_count());
    out.push('\n');
    for t in 0..instance.intervals() {
        let _ = write!(out, "{}", t + 1);
        for p in &dispatch.power[t] {
            let _ = write!(out, ",{:.*}", MW_DECIMALS, clean_zero(*p));
        }
        let _ = writeln!(
            out,
            ",{:.*},{:.*},{:.2}",
            MW_DECIMALS,
            clean_zero(solution.ev_power[t]),
            MW_DECIMALS,
            instance.demand()[t],
            reserve_percent(instance, solution, t)
        );
    }
    out
}

/// `-0.000000` and `0.000000` must print the same for byte-identical output.
fn clean_zero(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x
    }
}

/// A schedule table read back from text.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedSchedule {
    pub solution: Solution,
    /// Unit outputs as printed, `[interval][unit]`.
    pub power: Vec<Vec<f64>>,
    pub load: Vec<f64>,
    pub reserve_pct: Vec<f64>,
}

/// Parse a schedule for `instance`. Blank lines and `#` comments are skipped.
pub fn parse_csv(instance: &Instance, text: &str) -> Result<ParsedSchedule, ScheduleError> {
    let units = instance.unit_count();
    let expected = units + 4;
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(n, l)| (n + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (_, head) = lines.next().ok_or(ScheduleError::Rows {
        expected: instance.intervals(),
        found: 0,
    })?;
    let found = head.split(',').count();
    if found != expected {
        return Err(ScheduleError::Columns { expected, found });
    }

    let mut power = Vec::new();
    let mut ev = Vec::new();
    let mut load = Vec::new();
    let mut reserve = Vec::new();
    for (line, row) in lines {
        let fields: Vec<&str> = row.split(',').map(str::trim).collect();
        if fields.len() != expected {
            return Err(ScheduleError::Line {
                line,
                message: format!("{} fields, expected {expected}", fields.len()),
            });
        }
        let num = |s: &str| -> Result<f64, ScheduleError> {
            let s = s.trim_end_matches('%');
            s.parse::<f64>().map_err(|e| ScheduleError::Line {
                line,
                message: format!("`{s}`: {e}"),
            })
        };
        let hour = num(fields[0])?;
        if hour != (power.len() + 1) as f64 {
            return Err(ScheduleError::Line {
                line,
                message: format!("hour {hour} out of sequence"),
            });
        }
        power.push(
            fields[1..=units]
                .iter()
                .map(|f| num(f))
                .collect::<Result<Vec<_>, _>>()?,
        );
        ev.push(num(fields[units + 1])?);
        load.push(num(fields[units + 2])?);
        reserve.push(num(fields[units + 3])?);
    }
    if power.len() != instance.intervals() {
        return Err(ScheduleError::Rows {
            expected: instance.intervals(),
            found: power.len(),
        });
    }

    let rows: Vec<Vec<bool>> = power.iter().map(|r| r.iter().map(|p| *p > 0.0).collect()).collect();
    let commitment = Commitment::from_rows(&rows).expect("rows have equal length");
    Ok(ParsedSchedule {
        solution: Solution::new(commitment, ev),
        power,
        load,
        reserve_pct: reserve,
    })
}
