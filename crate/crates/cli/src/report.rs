//! Human and JSON renderings of the library reports.

use anonarray::{
    format_decimal, AccessProfileArray, AnonymityProfile, AttributeSchema, ClosenessMatrix, ConstructionResult,
    Credential, FeasibilityReport, GuaranteeReport, HardViolation, HomogeneityReport, Validation,
};
use num_rational::BigRational;
use serde_json::{json, Value};

pub const FORMAT_VERSION: u64 = 1;

fn pairs_json(c: &Credential, schema: &AttributeSchema) -> Value {
    c.labels(schema).iter().map(|(a, v)| json!([a, v])).collect()
}

fn rational_json(x: &BigRational) -> Value {
    json!({ "exact": x.to_string(), "decimal": format_decimal(x) })
}

fn hard_json(array: &AccessProfileArray, violations: &[HardViolation]) -> Value {
    violations
        .iter()
        .map(|v| {
            json!({
                "row": v.row,
                "label": array.row_label(v.row),
                "constraint": pairs_json(&v.constraint, array.schema()),
            })
        })
        .collect()
}

fn hard_lines(array: &AccessProfileArray, violations: &[HardViolation]) -> String {
    violations
        .iter()
        .map(|v| {
            format!(
                "hard violation: row {} contains {}\n",
                array.row_label(v.row),
                v.constraint.display(array.schema())
            )
        })
        .collect()
}

pub fn guarantee_human(
    array: &AccessProfileArray,
    report: &GuaranteeReport,
    validation: Option<&Validation>,
) -> String {
    let schema = array.schema();
    let mut out = format!("t = {}\nr = {}\n", report.t, report.r);
    if let Some(w) = &report.min_witness {
        out += &format!("witness: {} (count {})\n", w.credential.display(schema), w.count);
    }
    out += &hard_lines(array, &report.hard_violations);
    for (c, n) in &report.soft_appearances {
        out += &format!("soft constraint {} appears {n} time(s)\n", c.display(schema));
    }
    if let Some(v) = validation {
        if v.valid {
            out += &format!("target r = {}: satisfied\n", v.r_target);
        } else {
            out += &format!("target r = {}: violated\n", v.r_target);
            for s in &v.violations {
                out += &format!(
                    "  {} count {} ({})\n",
                    s.credential.display(schema),
                    s.count,
                    s.kind.as_str()
                );
            }
        }
    }
    out
}

pub fn guarantee_json(array: &AccessProfileArray, report: &GuaranteeReport, validation: Option<&Validation>) -> Value {
    let schema = array.schema();
    let witness = report.min_witness.as_ref().map(|w| {
        json!({
            "columns": w.column_set.names(schema),
            "credential": pairs_json(&w.credential, schema),
            "count": w.count,
        })
    });
    let soft: Vec<Value> = report
        .soft_appearances
        .iter()
        .map(|(c, n)| json!({ "credential": pairs_json(c, schema), "count": n }))
        .collect();
    let mut doc = json!({
        "format_version": FORMAT_VERSION,
        "t": report.t,
        "r": report.r,
        "witness": witness,
        "hard_violations": hard_json(array, &report.hard_violations),
        "soft_appearances": soft,
    });
    if let Some(v) = validation {
        let violations: Vec<Value> = v
            .violations
            .iter()
            .map(|s| json!({ "credential": pairs_json(&s.credential, schema), "count": s.count, "kind": s.kind.as_str() }))
            .collect();
        doc["target"] = json!({ "r": v.r_target, "valid": v.valid, "violations": violations });
    }
    doc
}

pub fn profile_human(array: &AccessProfileArray, profile: &AnonymityProfile) -> String {
    let mut out: String = profile
        .entries
        .iter()
        .map(|e| format!("t = {}  r = {}\n", e.t, e.r))
        .collect();
    out += &hard_lines(array, &profile.hard_violations);
    out
}

pub fn profile_json(array: &AccessProfileArray, profile: &AnonymityProfile) -> Value {
    let entries: Vec<Value> = profile.entries.iter().map(|e| json!({ "t": e.t, "r": e.r })).collect();
    json!({
        "format_version": FORMAT_VERSION,
        "entries": entries,
        "hard_violations": hard_json(array, &profile.hard_violations),
    })
}

pub fn homogeneity_human(
    array: &AccessProfileArray,
    report: &HomogeneityReport,
    closeness: Option<&ClosenessMatrix>,
) -> String {
    let mut out = format!(
        "t = {}\nmin {} max {} global {}\n",
        report.t,
        format_decimal(&report.min),
        format_decimal(&report.max),
        format_decimal(&report.global)
    );
    for (i, h) in report.local.iter().enumerate() {
        let note = if report.isolated.contains(&i) {
            " (isolated)"
        } else {
            ""
        };
        out += &format!(
            "row {}: {} ({} neighbors){note}\n",
            array.row_label(i),
            format_decimal(h),
            report.neighbor_counts[i]
        );
    }
    if let Some(m) = closeness {
        out += "closeness:\n";
        for i in 0..m.n() {
            let cells: Vec<String> = m.row(i).iter().map(format_decimal).collect();
            out += &format!("  {}\n", cells.join(" "));
        }
    }
    out
}

pub fn homogeneity_json(
    array: &AccessProfileArray,
    report: &HomogeneityReport,
    closeness: Option<&ClosenessMatrix>,
) -> Value {
    let local: Vec<Value> = report
        .local
        .iter()
        .enumerate()
        .map(|(i, h)| {
            json!({
                "row": i,
                "label": array.row_label(i),
                "score": rational_json(h),
                "neighbors": report.neighbor_counts[i],
                "isolated": report.isolated.contains(&i),
            })
        })
        .collect();
    let mut doc = json!({
        "format_version": FORMAT_VERSION,
        "t": report.t,
        "min": rational_json(&report.min),
        "max": rational_json(&report.max),
        "global": rational_json(&report.global),
        "isolated_sentinel": report.sentinel,
        "local": local,
    });
    if let Some(m) = closeness {
        let rows: Vec<Value> = (0..m.n())
            .map(|i| m.row(i).iter().map(|c| Value::String(c.to_string())).collect())
            .collect();
        doc["closeness"] = Value::Array(rows);
    }
    doc
}

pub struct ConstructSummary<'a> {
    pub result: &'a ConstructionResult,
    pub global: &'a BigRational,
    pub out: Option<&'a str>,
}

pub fn construct_human(s: &ConstructSummary) -> String {
    let r = s.result;
    let mut out = format!(
        "rows = {} (padding {})\nlower bound = {}{}\nachieved r = {}\nglobal homogeneity = {}\n",
        r.array.n_rows(),
        r.padding_count,
        r.lower_bound,
        if r.meets_lower_bound() { " (met)" } else { "" },
        r.achieved.r,
        format_decimal(s.global)
    );
    if let Some(path) = s.out {
        out += &format!("written to {path}\n");
    }
    out
}

pub fn construct_json(s: &ConstructSummary, array_csv: Option<String>) -> Value {
    let r = s.result;
    let mut doc = json!({
        "format_version": FORMAT_VERSION,
        "rows": r.array.n_rows(),
        "padding_count": r.padding_count,
        "lower_bound": r.lower_bound,
        "meets_lower_bound": r.meets_lower_bound(),
        "achieved_r": r.achieved.r,
        "global_homogeneity": rational_json(s.global),
        "pruned": r.pruned,
        "attempt": r.attempt,
        "output": s.out,
    });
    if let Some(csv) = array_csv {
        doc["array_csv"] = Value::String(csv);
    }
    doc
}

pub fn feasibility_human(schema: &AttributeSchema, t: usize, report: &FeasibilityReport) -> String {
    let mut out = format!("implicit hard constraints (t = {t}):\n");
    if report.implicit_hard.is_empty() {
        out += "  none\n";
    }
    for c in &report.implicit_hard {
        out += &format!("  {}\n", c.display(schema));
    }
    if report.no_valid_row {
        out += "no row avoids every hard constraint\n";
    }
    out += &format!("feasible: {}\n", if report.feasible { "yes" } else { "no" });
    for w in &report.witnesses {
        match &w.forbidden_by {
            Some(by) => {
                out += &format!(
                    "  cannot appear: {} (forbidden by {})\n",
                    w.credential.display(schema),
                    by.display(schema)
                )
            }
            None => out += &format!("  cannot appear: {}\n", w.credential.display(schema)),
        }
    }
    out
}

pub fn feasibility_json(schema: &AttributeSchema, t: usize, report: &FeasibilityReport) -> Value {
    let implicit: Vec<Value> = report.implicit_hard.iter().map(|c| pairs_json(c, schema)).collect();
    let witnesses: Vec<Value> = report
        .witnesses
        .iter()
        .map(|w| {
            json!({
                "credential": pairs_json(&w.credential, schema),
                "forbidden_by": w.forbidden_by.as_ref().map(|c| pairs_json(c, schema)),
            })
        })
        .collect();
    json!({
        "format_version": FORMAT_VERSION,
        "t": t,
        "implicit_hard": implicit,
        "feasible": report.feasible,
        "no_valid_row": report.no_valid_row,
        "witnesses": witnesses,
    })
}
