//! Markdown and CSV renderings of a JSON report. Both read only the JSON
//! value, so every number shown is the one stored in the `.json` file.

use std::fmt::Write as _;

use serde_json::{Map, Value};

fn scalar_text(v: &Value) -> Option<String> {
    match v {
        Value::Null => Some("-".into()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Number(n) => Some(n.to_string()),
        Value::String(s) => Some(s.clone()),
        Value::Array(xs) if xs.iter().all(|x| !x.is_array() && !x.is_object()) => {
            Some(format!("[{}]", xs.iter().map(|x| scalar_text(x).unwrap()).collect::<Vec<_>>().join(", ")))
        }
        _ => None,
    }
}

/// Columns of an array of objects whose values are all scalars, in order of
/// first appearance.
fn table_columns(xs: &[Value]) -> Option<Vec<String>> {
    if xs.is_empty() {
        return None;
    }
    let mut cols: Vec<String> = Vec::new();
    for x in xs {
        let obj = x.as_object()?;
        for (k, v) in obj {
            scalar_text(v)?;
            if !cols.contains(k) {
                cols.push(k.clone());
            }
        }
    }
    Some(cols)
}

fn escape_cell(s: &str) -> String {
    s.replace('|', "\\|")
}

fn md_value(out: &mut String, key: &str, v: &Value, depth: usize) {
    if let Some(t) = scalar_text(v) {
        let _ = writeln!(out, "- **{key}**: {}", escape_cell(&t));
        return;
    }
    let heading = "#".repeat((depth + 1).min(6));
    let _ = writeln!(out, "\n{heading} {key}\n");
    match v {
        Value::Object(m) => md_object(out, m, depth + 1),
        Value::Array(xs) => {
            if let Some(cols) = table_columns(xs) {
                let _ = writeln!(out, "| {} |", cols.join(" | "));
                let _ = writeln!(out, "|{}", "---|".repeat(cols.len()));
                for x in xs {
                    let cells: Vec<String> = cols
                        .iter()
                        .map(|c| x.get(c).and_then(scalar_text).map(|t| escape_cell(&t)).unwrap_or_default())
                        .collect();
                    let _ = writeln!(out, "| {} |", cells.join(" | "));
                }
                out.push('\n');
            } else {
                for (i, x) in xs.iter().enumerate() {
                    md_value(out, &format!("{key}[{i}]"), x, depth + 1);
                }
            }
        }
        _ => unreachable!("scalars handled above"),
    }
}

fn md_object(out: &mut String, m: &Map<String, Value>, depth: usize) {
    // scalars first so that each section opens with its own fields
    for (k, v) in m.iter().filter(|(_, v)| scalar_text(v).is_some()) {
        md_value(out, k, v, depth);
    }
    for (k, v) in m.iter().filter(|(_, v)| scalar_text(v).is_none()) {
        md_value(out, k, v, depth);
    }
}

pub fn markdown(title: &str, v: &Value) -> String {
    let mut out = format!("# {title}\n\n");
    match v {
        Value::Object(m) => md_object(&mut out, m, 1),
        other => md_value(&mut out, "value", other, 1),
    }
    out
}

fn flatten(prefix: &str, v: &Value, rows: &mut Vec<(String, String)>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let p = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&p, x, rows);
            }
        }
        Value::Array(xs) => {
            for (i, x) in xs.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), x, rows);
            }
        }
        other => rows.push((prefix.to_string(), scalar_text(other).unwrap())),
    }
}

/// One `path,value` row per leaf of the JSON tree.
pub fn csv(v: &Value) -> anyhow::Result<String> {
    let mut rows = Vec::new();
    flatten("", v, &mut rows);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["path", "value"])?;
    for (p, x) in rows {
        w.write_record([p, x])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn tables_and_sections() {
        let v = json!({"a": 1, "rows": [{"k": 0, "dim": 1}, {"k": 1, "dim": 2}], "nested": {"x": [1, 2]}});
        let md = markdown("t", &v);
        assert!(md.contains("| dim | k |"));
        assert!(md.contains("| 2 | 1 |"));
        assert!(md.contains("- **x**: [1, 2]"));
        let c = csv(&v).unwrap();
        assert!(c.contains("rows[1].dim,2"));
        assert!(c.starts_with("path,value"));
    }
}
