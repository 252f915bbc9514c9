//! Result tables from run records.

use std::fmt::Write;

use saa_core::BoundDirection;

use crate::record::RunRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Markdown,
}

pub const COLUMNS: [&str; 9] = [
    "instance",
    "method",
    "performance_index",
    "activated",
    "f_final",
    "wall_seconds",
    "bound",
    "direction",
    "bound_check",
];

/// Relative slack of the ordering check.
pub const ORDER_SLACK: f64 = 1e-6;

/// Records grouped by instance, groups in order of first appearance.
pub fn group(records: &[RunRecord]) -> Vec<(String, Vec<&RunRecord>)> {
    let mut groups: Vec<(String, Vec<&RunRecord>)> = Vec::new();
    for r in records {
        match groups.iter_mut().find(|(id, _)| *id == r.instance) {
            Some((_, v)) => v.push(r),
            None => groups.push((r.instance.clone(), vec![r])),
        }
    }
    groups
}

/// Upper values of `r`: its recovered objective and, for upper or exact
/// bounds, the bound itself. The flag marks values that bound the
/// relaxation (SCA) rather than the binary optimum.
fn uppers(r: &RunRecord) -> Vec<(f64, bool)> {
    let mut v = vec![(r.outcome.f_final, false)];
    match r.bound.direction {
        BoundDirection::Upper => v.push((r.bound.value, true)),
        BoundDirection::Exact => v.push((r.bound.value, false)),
        BoundDirection::Lower => {}
    }
    v
}

fn violated(l: f64, l_dir: BoundDirection, u: f64, u_relaxed: bool) -> bool {
    // an exact optimum of the binary problem need not lie below an upper
    // bound of the relaxation
    if l_dir == BoundDirection::Exact && u_relaxed {
        return false;
    }
    l > u + ORDER_SLACK * (1.0 + u.abs())
}

/// Whether `r` takes part in some `L > U` pair within its group.
pub fn order_violation(r: &RunRecord, group: &[&RunRecord]) -> bool {
    let lower_of = |x: &RunRecord| matches!(x.bound.direction, BoundDirection::Lower | BoundDirection::Exact);
    let mine = uppers(r);
    group.iter().any(|o| {
        let as_lower = lower_of(r)
            && uppers(o)
                .iter()
                .any(|&(u, rel)| violated(r.bound.value, r.bound.direction, u, rel));
        let as_upper = lower_of(o)
            && mine
                .iter()
                .any(|&(u, rel)| violated(o.bound.value, o.bound.direction, u, rel));
        as_lower || as_upper
    })
}

fn num(v: f64, exact: bool) -> String {
    if exact {
        format!("{v:?}")
    } else {
        format!("{v:.3}")
    }
}

fn direction(d: BoundDirection) -> &'static str {
    match d {
        BoundDirection::Lower => "lower",
        BoundDirection::Upper => "upper",
        BoundDirection::Exact => "exact",
    }
}

/// Table cells of one record, in [`COLUMNS`] order.
pub fn cells(r: &RunRecord, group: &[&RunRecord], exact: bool) -> Vec<String> {
    vec![
        r.instance.clone(),
        r.method.to_string(),
        r.performance_index().map(|v| num(v, exact)).unwrap_or_default(),
        r.outcome.activated.to_string(),
        num(r.outcome.f_final, exact),
        num(r.wall_seconds, exact),
        num(r.bound.value, exact),
        direction(r.bound.direction).to_string(),
        if order_violation(r, group) { "L>U" } else { "ok" }.to_string(),
    ]
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Renders the table. Values carry three decimals unless `exact`, which
/// prints the shortest representation that parses back to the same `f64`.
pub fn render(records: &[RunRecord], format: Format, exact: bool) -> String {
    let mut out = String::new();
    match format {
        Format::Csv => {
            out.push_str(&COLUMNS.join(","));
            out.push_str("\r\n");
            for (_, g) in group(records) {
                for r in &g {
                    let row: Vec<String> = cells(r, &g, exact).iter().map(|c| csv_field(c)).collect();
                    out.push_str(&row.join(","));
                    out.push_str("\r\n");
                }
            }
        }
        Format::Markdown => {
            let header = |out: &mut String| {
                let _ = writeln!(out, "| {} |", COLUMNS.join(" | "));
                let _ = writeln!(out, "|{}", "---|".repeat(COLUMNS.len()));
            };
            let groups = group(records);
            if groups.is_empty() {
                header(&mut out);
            }
            for (i, (id, g)) in groups.iter().enumerate() {
                if i > 0 {
                    out.push('\n');
                }
                let _ = writeln!(out, "Instance `{id}`\n");
                header(&mut out);
                for r in g {
                    let _ = writeln!(out, "| {} |", cells(r, g, exact).join(" | "));
                }
            }
        }
    }
    out
}
