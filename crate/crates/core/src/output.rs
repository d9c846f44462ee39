//! Text and CSV rendering. Numbers are printed with 6 significant digits.

use std::io::Write;

use crate::efficacy::{Schedule, TrajectoryPoint};
use crate::experiments::{CaseRecord, ComparisonRow, FrontierPoint};
use crate::shortterm::CurvePoint;
use crate::solvers::TraceStep;

/// `%g`-style formatting with `digits` significant digits.
pub fn fmt_sig(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= digits as i32 {
        format!("{}e{}{:02}", trim_zeros(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn sig6(x: f64) -> String {
    fmt_sig(x, 6)
}

/// Completion times separated by spaces.
pub fn schedule_field(s: &Schedule) -> String {
    s.completions().iter().map(|&c| sig6(c)).collect::<Vec<_>>().join(" ")
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().from_writer(w)
}

pub fn write_trajectory_csv<W: Write>(w: W, points: &[TrajectoryPoint]) -> csv::Result<()> {
    let mut out = writer(w);
    out.write_record(["t", "f", "in_downtime", "segment"])?;
    for p in points {
        out.write_record([
            sig6(p.t),
            sig6(p.f),
            (p.in_downtime as u8).to_string(),
            p.segment_index.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_trace_csv<W: Write>(w: W, trace: &[TraceStep]) -> csv::Result<()> {
    let mut out = writer(w);
    out.write_record(["iteration", "lambda", "mu", "residual", "J"])?;
    for (i, s) in trace.iter().enumerate() {
        out.write_record([
            i.to_string(),
            sig6(s.lambda),
            sig6(s.mu),
            sig6(s.residual),
            sig6(s.objective),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_frontier_csv<W: Write>(w: W, points: &[FrontierPoint]) -> csv::Result<()> {
    let mut out = writer(w);
    out.write_record(["F", "G", "C", "J", "schedule"])?;
    for p in points {
        out.write_record([
            sig6(p.stats.f),
            sig6(p.stats.g),
            sig6(p.stats.c),
            sig6(p.objective),
            schedule_field(&p.schedule),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub const COMPARISON_COLUMNS: [&str; 6] =
    ["strategy", "efficacy", "work_time", "update_cost", "objective", "compute_seconds"];

pub fn write_comparison_csv<W: Write>(
    w: W,
    rows: &[ComparisonRow],
    with_timing: bool,
) -> csv::Result<()> {
    let mut out = writer(w);
    let cols = if with_timing { &COMPARISON_COLUMNS[..] } else { &COMPARISON_COLUMNS[..5] };
    out.write_record(cols)?;
    for r in rows {
        let mut rec = vec![
            r.strategy.clone(),
            sig6(r.efficacy),
            sig6(r.work_time),
            sig6(r.update_cost),
            sig6(r.objective),
        ];
        if with_timing {
            rec.push(sig6(r.compute_seconds));
        }
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// Per-policy schedules and per-segment action labels.
pub fn write_schedules_csv<W: Write>(w: W, rows: &[ComparisonRow]) -> csv::Result<()> {
    let mut out = writer(w);
    out.write_record(["strategy", "schedule", "actions"])?;
    for r in rows {
        let actions: Vec<&str> = r.actions.iter().map(|a| a.as_str()).collect();
        out.write_record([r.strategy.clone(), schedule_field(&r.schedule), actions.join(" ")])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_g_curve_csv<W: Write>(w: W, curve: &[CurvePoint]) -> csv::Result<()> {
    let mut out = writer(w);
    out.write_record(["t", "g", "dg"])?;
    for p in curve {
        out.write_record([sig6(p.t), sig6(p.g), sig6(p.dg)])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_cases_csv<W: Write>(w: W, policies: &[String], cases: &[CaseRecord]) -> csv::Result<()> {
    let mut out = writer(w);
    let mut header = vec!["index".to_string(), "seed".to_string()];
    header.extend(policies.iter().cloned());
    header.push("actions".into());
    out.write_record(&header)?;
    for c in cases {
        let mut rec = vec![c.index.to_string(), c.seed.to_string()];
        rec.extend(c.objectives.iter().map(|&j| sig6(j)));
        rec.push(c.actions.iter().map(|a| a.as_str()).collect::<Vec<_>>().join(" "));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// Fixed-width table of the comparison rows.
pub fn comparison_table(rows: &[ComparisonRow]) -> String {
    let mut cells: Vec<Vec<String>> = vec![COMPARISON_COLUMNS.iter().map(|s| s.to_string()).collect()];
    for r in rows {
        cells.push(vec![
            r.strategy.clone(),
            sig6(r.efficacy),
            sig6(r.work_time),
            sig6(r.update_cost),
            sig6(r.objective),
            sig6(r.compute_seconds),
        ]);
    }
    let widths: Vec<usize> =
        (0..COMPARISON_COLUMNS.len()).map(|k| cells.iter().map(|r| r[k].len()).max().unwrap_or(0)).collect();
    let mut s = String::new();
    for row in &cells {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(k, (c, &w))| if k == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        s.push_str(line.join("  ").trim_end());
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(1.0), "1");
        assert_eq!(sig6(0.7674), "0.7674");
        assert_eq!(sig6(std::f64::consts::PI), "3.14159");
        assert_eq!(sig6(123456.7), "123457");
        assert_eq!(sig6(999999.7), "1e+06");
        assert_eq!(sig6(1234567.0), "1.23457e+06");
        assert_eq!(sig6(0.0001234567), "0.000123457");
        assert_eq!(sig6(1.5e-7), "1.5e-07");
        assert_eq!(sig6(-2.5), "-2.5");
        assert_eq!(sig6(300.0), "300");
    }

    #[test]
    fn table_has_header_and_rows() {
        let row = ComparisonRow {
            strategy: "Zero-wait".into(),
            efficacy: 1.0,
            work_time: 2.0,
            update_cost: 0.0,
            objective: 0.5,
            compute_seconds: 0.001,
            schedule: Schedule::empty(),
            actions: vec![],
            stalled: None,
        };
        let t = comparison_table(&[row]);
        assert!(t.starts_with("strategy"));
        assert_eq!(t.lines().count(), 2);
    }
}
