//! Human-readable tables, rendered from the serialized JSON report so the
//! two outputs cannot disagree.

use std::fmt::Write;

use serde_json::Value;

fn num(v: &Value) -> String {
    match v.as_f64() {
        Some(x) => format!("{x:.2e}"),
        None => "n/a".into(),
    }
}

fn s(v: &Value) -> &str {
    v.as_str().unwrap_or("")
}

fn header(out: &mut String, report: &Value) {
    let _ = writeln!(
        out,
        "{} {} | {} | lagrangian: {}",
        s(&report["tool"]["name"]),
        s(&report["tool"]["version"]),
        s(&report["command"]),
        s(&report["lagrangian"])
    );
    if let Some(sm) = report.get("sampling") {
        let _ = writeln!(
            out,
            "samples: {} accepted of {} requested ({} rejected, rate {:.2})",
            sm["accepted"],
            sm["requested"],
            sm["rejected"],
            sm["rejection_rate"].as_f64().unwrap_or(0.0)
        );
    }
}

fn footer(out: &mut String, report: &Value) {
    let sm = &report["summary"];
    let verdict = if sm["degenerate"].as_bool() == Some(true) {
        "DEGENERATE"
    } else if sm["pass"].as_bool() == Some(true) {
        "PASS"
    } else {
        "FAIL"
    };
    let _ = writeln!(out, "result: {verdict} (exit {})", sm["exit_code"]);
}

pub fn render(report: &Value) -> String {
    match s(&report["command"]) {
        "check" => render_check(report),
        "compare" => render_compare(report),
        "tensors" => render_tensors(report),
        _ => String::new(),
    }
}

fn render_check(report: &Value) -> String {
    let mut out = String::new();
    header(&mut out, report);
    let _ = writeln!(
        out,
        "{:<20} {:<18} {:<6} {:>10}  failing",
        "connection", "suite", "verdict", "worst"
    );
    for r in report["reports"].as_array().into_iter().flatten() {
        let conds = r["conditions"].as_array().cloned().unwrap_or_default();
        let worst = conds
            .iter()
            .filter(|c| c["informational"].as_bool() != Some(true))
            .map(|c| c["residual"].as_f64().unwrap_or(f64::INFINITY))
            .fold(0.0f64, f64::max);
        let failing: Vec<&str> = conds
            .iter()
            .filter(|c| c["informational"].as_bool() != Some(true) && c["pass"].as_bool() != Some(true))
            .map(|c| s(&c["id"]))
            .collect();
        let _ = writeln!(
            out,
            "{:<20} {:<18} {:<6} {:>10}  {}",
            s(&r["connection"]),
            s(&r["suite"]),
            if r["pass"].as_bool() == Some(true) {
                "pass"
            } else {
                "FAIL"
            },
            if worst.is_finite() {
                format!("{worst:.2e}")
            } else {
                "n/a".into()
            },
            failing.join(",")
        );
        if let Some(t) = r.get("target") {
            let _ = writeln!(
                out,
                "{:<20}   distance to {}: {} (consistent: {})",
                "",
                s(&t["target"]),
                num(&t["distance"]),
                t["consistent"]
            );
        }
        for note in r["notes"].as_array().into_iter().flatten() {
            let _ = writeln!(out, "{:<20}   note: {}", "", s(note));
        }
    }
    footer(&mut out, report);
    out
}

fn render_compare(report: &Value) -> String {
    let mut out = String::new();
    header(&mut out, report);
    let m = &report["matrix"];
    let suites: Vec<&str> = m["suites"].as_array().into_iter().flatten().map(s).collect();
    let _ = write!(out, "{:<20}", "connection");
    for su in &suites {
        let _ = write!(out, " {su:>16}");
    }
    out.push('\n');
    for row in m["rows"].as_array().into_iter().flatten() {
        let _ = write!(out, "{:<20}", s(&row["connection"]));
        for cell in row["cells"].as_array().into_iter().flatten() {
            let mark = if cell["pass"].as_bool() == Some(true) {
                "pass"
            } else {
                "FAIL"
            };
            let _ = write!(out, " {:>16}", format!("{mark} {}", num(&cell["worst_residual"])));
        }
        out.push('\n');
    }
    let canonical = report["canonical"].as_array().cloned().unwrap_or_default();
    if !canonical.is_empty() {
        let _ = writeln!(out, "canonical metric connection vs Cartan:");
        for c in canonical {
            let _ = writeln!(
                out,
                "  {:<20} distance {} {}",
                s(&c["connection"]),
                num(&c["distance"]),
                if c["agrees"].as_bool() == Some(true) {
                    "agrees"
                } else {
                    "DIFFERS"
                }
            );
        }
    }
    footer(&mut out, report);
    out
}

fn tensor_rows(out: &mut String, name: &str, data: &Value, n: usize) {
    let vals: Vec<String> = data.as_array().into_iter().flatten().map(num).collect();
    if vals.is_empty() {
        return;
    }
    let _ = writeln!(out, "{name}:");
    let width = if vals.len() == n * n * n { n } else { n.max(1) };
    for (i, chunk) in vals.chunks(width).enumerate() {
        let label = if vals.len() == n * n * n {
            format!("[{}][{}]", i / n, i % n)
        } else {
            format!("[{i}]")
        };
        let _ = writeln!(out, "  {label:<8} {}", chunk.join("  "));
    }
}

fn render_tensors(report: &Value) -> String {
    let mut out = String::new();
    header(&mut out, report);
    let t = &report["tensors"];
    let n = t["point"]["x"].as_array().map_or(0, Vec::len);
    let _ = writeln!(out, "x = {}  y = {}", t["point"]["x"], t["point"]["y"]);
    tensor_rows(&mut out, "g", &t["metric"], n);
    tensor_rows(&mut out, "g^-1", &t["inverse_metric"], n);
    tensor_rows(&mut out, "C_abc", &t["cartan"]["data"], n);
    let spray: Vec<String> = t["spray"].as_array().into_iter().flatten().map(num).collect();
    let _ = writeln!(out, "G^a:\n  {}", spray.join("  "));
    tensor_rows(&mut out, "N^a_b", &t["nonlinear"], n);
    tensor_rows(&mut out, "gamma^a_bc", &t["formal_christoffel"]["data"], n);
    tensor_rows(&mut out, "Gamma^a_bc", &t["horizontal_christoffel"]["data"], n);
    tensor_rows(&mut out, "G^a_bc", &t["berwald"]["data"], n);
    tensor_rows(&mut out, "L_abc", &t["landsberg"]["data"], n);
    tensor_rows(&mut out, "R^a_bc", &t["curvature"]["data"], n);
    if let Some(flags) = t["flags"].as_object() {
        let _ = writeln!(out, "symmetry flags:");
        for (k, v) in flags {
            let _ = writeln!(out, "  {k}: {v}");
        }
    }
    out
}
