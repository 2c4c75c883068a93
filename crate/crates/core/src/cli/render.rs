//! Table, CSV and JSON renderings of outcomes and reports.

use std::fmt::Write as _;

use crate::analysis::ComparisonReport;
use crate::error::{Error, Result};
use crate::format::{compact, sig6};
use crate::mechanisms::MechanismOutcome;
use crate::model::{FeasibilityReport, MarketParams, Mechanism};

pub const CSV_HEADER: [&str; 14] =
    ["mechanism", "v", "r", "d", "rho", "w", "w_prime", "alpha", "p", "demand", "pi1", "pi2", "pi_chain", "cs"];

/// Shortest string that parses back to the same `f64`.
pub fn float_field(x: f64) -> String {
    let a = x.abs();
    if x != 0.0 && x.is_finite() && !(1e-5..1e16).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

fn opt_field(x: Option<f64>) -> String {
    x.map(float_field).unwrap_or_default()
}

fn csv_record(o: &MechanismOutcome) -> [String; 14] {
    [
        o.mechanism.name().to_string(),
        float_field(o.params.v()),
        float_field(o.params.r()),
        float_field(o.params.d()),
        opt_field(o.rho),
        opt_field(o.wholesale_w),
        opt_field(o.upfront_w_prime),
        opt_field(o.sharing_ratio_alpha),
        float_field(o.price_p),
        float_field(o.demand),
        opt_field(o.profit_provider),
        opt_field(o.profit_app),
        float_field(o.profit_chain),
        float_field(o.consumer_surplus),
    ]
}

pub fn outcomes_csv(outcomes: &[MechanismOutcome]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for o in outcomes {
        w.write_record(csv_record(o)).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

/// Reads back what [`outcomes_csv`] wrote.
pub fn parse_outcomes_csv(text: &str) -> Result<Vec<MechanismOutcome>> {
    let bad = |msg: String| Error::InvalidParams(format!("csv: {msg}"));
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| bad(e.to_string()))?;
    if header.iter().ne(CSV_HEADER) {
        return Err(bad(format!("unexpected header `{}`", header.iter().collect::<Vec<_>>().join(","))));
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let opt = |i: usize| -> Result<Option<f64>> {
            let s = &record[i];
            if s.is_empty() {
                return Ok(None);
            }
            s.parse().map(Some).map_err(|_| bad(format!("column {}: not a number `{s}`", CSV_HEADER[i])))
        };
        let req = |i: usize| opt(i)?.ok_or_else(|| bad(format!("column {} is empty", CSV_HEADER[i])));
        let mechanism: Mechanism = record[0].parse()?;
        out.push(MechanismOutcome {
            mechanism,
            params: MarketParams::new(req(1)?, req(2)?, req(3)?)?,
            rho: opt(4)?,
            wholesale_w: opt(5)?,
            upfront_w_prime: opt(6)?,
            sharing_ratio_alpha: opt(7)?,
            price_p: req(8)?,
            demand: req(9)?,
            profit_provider: opt(10)?,
            profit_app: opt(11)?,
            profit_chain: req(12)?,
            consumer_surplus: req(13)?,
        });
    }
    Ok(out)
}

pub fn json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

pub fn outcome_table(o: &MechanismOutcome) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "mechanism={}", o.mechanism.name());
    let _ = writeln!(s, "v={}", sig6(o.params.v()));
    let _ = writeln!(s, "r={}", sig6(o.params.r()));
    let _ = writeln!(s, "d={}", sig6(o.params.d()));
    let mut line = |key: &str, x: Option<f64>| {
        if let Some(x) = x {
            let _ = writeln!(s, "{key}={}", sig6(x));
        }
    };
    line("rho", o.rho);
    line("w", o.wholesale_w);
    line("w_prime", o.upfront_w_prime);
    line("alpha", o.sharing_ratio_alpha);
    line("p", Some(o.price_p));
    line("demand", Some(o.demand));
    line("pi1", o.profit_provider);
    line("pi2", o.profit_app);
    line("pi_chain", Some(o.profit_chain));
    line("cs", Some(o.consumer_surplus));
    if o.has_negative_wholesale() {
        s.push_str("note: the wholesale price is negative, so the provider subsidizes the app provider to secure feedback\n");
    }
    s
}

fn label(m: Mechanism) -> &'static str {
    match m {
        Mechanism::Decentralized => "D",
        Mechanism::Centralized => "Centralized",
        Mechanism::BargainRatio => "B1",
        Mechanism::BargainBoth => "B2",
        Mechanism::RevenueSharing => "RS",
    }
}

const TABLE_COLUMNS: [&str; 9] = ["w", "alpha", "p", "demand", "pi1", "pi2", "pi_chain", "cs", "w_prime"];

fn row_cells(o: &MechanismOutcome) -> [String; 9] {
    let cell = |x: Option<f64>| x.map(sig6).unwrap_or_else(|| "-".into());
    [
        cell(o.wholesale_w),
        cell(o.sharing_ratio_alpha),
        cell(Some(o.price_p)),
        cell(Some(o.demand)),
        cell(o.profit_provider),
        cell(o.profit_app),
        cell(Some(o.profit_chain)),
        cell(Some(o.consumer_surplus)),
        cell(o.upfront_w_prime),
    ]
}

fn grid(s: &mut String, first: &str, rows: &[(String, Option<[String; 9]>, Option<String>)]) {
    let name_w = rows.iter().map(|r| r.0.len()).max().unwrap_or(0).max(first.len());
    let _ = write!(s, "{first:<name_w$}");
    for c in TABLE_COLUMNS {
        let _ = write!(s, "  {c:>12}");
    }
    s.push('\n');
    for (name, cells, note) in rows {
        let _ = write!(s, "{name:<name_w$}");
        match (cells, note) {
            (Some(cells), _) => {
                for c in cells {
                    let _ = write!(s, "  {c:>12}");
                }
            }
            (None, Some(note)) => {
                let _ = write!(s, "  {note}");
            }
            (None, None) => {}
        }
        s.push('\n');
    }
}

pub fn comparison_table(report: &ComparisonReport) -> String {
    let p = &report.params;
    let mut s = format!("v={} r={} d={}\n\n", compact(p.v()), compact(p.r()), compact(p.d()));
    let rows: Vec<_> = report
        .entries
        .iter()
        .map(|e| (label(e.mechanism).to_string(), e.outcome.as_ref().map(row_cells), e.note.clone()))
        .collect();
    grid(&mut s, "mechanism", &rows);

    s.push_str("\npreference ranking:\n");
    for ranking in &report.rankings {
        let _ = writeln!(s, "  {ranking}");
    }
    if !report.differences.is_empty() {
        s.push_str("\ndifferences (closed form / subtracted):\n");
        for diff in &report.differences {
            let _ = writeln!(
                s,
                "  {} {}-{}: {} / {}",
                diff.stakeholder.symbol(),
                label(diff.left),
                label(diff.right),
                sig6(diff.closed_form),
                sig6(diff.subtracted)
            );
        }
    }
    if !report.checks.is_empty() {
        s.push_str("\norderings:\n");
        for check in &report.checks {
            let _ = writeln!(s, "  [{}] {}", if check.holds { "ok" } else { "FAIL" }, check.claim);
        }
    }
    if let Some(gap) = report.double_marginalization_gap {
        let _ = writeln!(s, "\ndouble marginalization gap (centralized - decentralized chain profit): {}", sig6(gap));
    }
    s
}

pub fn sweep_table(param: &str, points: &[(f64, MechanismOutcome)]) -> String {
    let mut s = String::new();
    let rows: Vec<_> = points
        .iter()
        .map(|(x, o)| (format!("{param}={} {}", compact(*x), label(o.mechanism)), Some(row_cells(o)), None))
        .collect();
    grid(&mut s, "point", &rows);
    s
}

pub fn feasibility_table(report: &FeasibilityReport) -> String {
    let p = &report.params;
    let mut s = format!("v={} r={} d={}\n", compact(p.v()), compact(p.r()), compact(p.d()));
    for e in &report.entries {
        let _ = writeln!(
            s,
            "{:<16} v > {:<12} threshold={:<12} v={:<12} {}",
            e.mechanism.name(),
            e.condition,
            sig6(e.threshold),
            sig6(e.v),
            if e.satisfied { "pass" } else { "fail" }
        );
    }
    s
}

pub fn feasibility_csv(report: &FeasibilityReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["mechanism", "condition", "threshold", "v", "satisfied"]).expect("in-memory write");
    for e in &report.entries {
        w.write_record([
            e.mechanism.name().to_string(),
            e.condition.clone(),
            float_field(e.threshold),
            float_field(e.v),
            e.satisfied.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output")
}
