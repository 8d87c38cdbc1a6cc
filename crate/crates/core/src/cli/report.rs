//! Human-readable rendering of JSON artifacts, and CSV output.

use serde_json::Value;

use crate::error::{Error, Result};
use crate::optimize::SweepReport;

const INLINE_ARRAY: usize = 16;
const INLINE_OBJECTS: usize = 8;

/// Round to 9 significant digits and print the shortest form of the result.
pub fn sig9(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.8e}").parse().unwrap_or(x);
    let a = rounded.abs();
    if a != 0.0 && !(1e-5..1e16).contains(&a) {
        format!("{rounded:e}")
    } else {
        rounded.to_string()
    }
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::Null => Some("-".into()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Number(n) => Some(match (n.as_u64(), n.as_i64()) {
            (Some(u), _) => u.to_string(),
            (None, Some(i)) => i.to_string(),
            _ => sig9(n.as_f64().unwrap_or(f64::NAN)),
        }),
        Value::String(s) => Some(s.clone()),
        _ => None,
    }
}

fn is_matrix_tuple(v: &Value) -> bool {
    v.get("m").is_some() && v.get("k").is_some() && v.get("re").is_some() && v.get("im").is_some()
}

fn flatten(prefix: &str, v: &Value, rows: &mut Vec<(String, String)>) {
    if let Some(s) = scalar(v) {
        rows.push((prefix.to_string(), s));
        return;
    }
    if is_matrix_tuple(v) {
        let m = v["m"].as_u64().unwrap_or(0);
        let k = v["k"].as_u64().unwrap_or(0);
        rows.push((prefix.to_string(), format!("<{m} matrices of size {k}x{k}>")));
        return;
    }
    let join = |key: &str| {
        if prefix.is_empty() {
            key.to_string()
        } else {
            format!("{prefix}.{key}")
        }
    };
    match v {
        Value::Object(map) => {
            for (key, child) in map {
                flatten(&join(key), child, rows);
            }
        }
        Value::Array(items) => {
            let scalars: Option<Vec<String>> = items.iter().map(scalar).collect();
            match scalars {
                Some(s) if s.len() <= INLINE_ARRAY => rows.push((prefix.to_string(), format!("[{}]", s.join(", ")))),
                Some(s) => rows.push((prefix.to_string(), format!("<{} values>", s.len()))),
                None if items.len() <= INLINE_OBJECTS => {
                    for (i, child) in items.iter().enumerate() {
                        flatten(&format!("{prefix}[{i}]"), child, rows);
                    }
                }
                None => rows.push((prefix.to_string(), format!("<{} items>", items.len()))),
            }
        }
        _ => unreachable!("scalars handled above"),
    }
}

/// Key/value lines with the values aligned in one column.
pub fn aligned(rows: &[(String, String)]) -> String {
    let width = rows.iter().map(|(k, _)| k.chars().count()).max().unwrap_or(0);
    let mut out = String::new();
    for (k, v) in rows {
        out.push_str(&format!("{k:<width$}  {v}\n"));
    }
    out
}

/// Aligned text for a whole artifact.
pub fn render(v: &Value) -> String {
    let mut rows = Vec::new();
    flatten("", v, &mut rows);
    aligned(&rows)
}

/// Right-aligned columns under a header row.
pub fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, &w)| format!("{c:>w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            + "\n"
    };
    let mut out = line(header.to_vec());
    for r in rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
    }
    out
}

/// Text report for a sweep: summary lines followed by a per-dimension table.
pub fn render_sweep(s: &SweepReport) -> String {
    let mut rows = vec![
        ("polynomial".to_string(), s.polynomial.clone()),
        ("class".to_string(), s.class.to_string()),
        (
            "plateau_dim".to_string(),
            s.plateau_dim.map_or("-".into(), |d| d.to_string()),
        ),
        ("monotone".to_string(), s.monotone.to_string()),
        (
            "attainment_bound".to_string(),
            s.attainment_bound.map_or("overflow".into(), |b| b.to_string()),
        ),
    ];
    if s.bound_exceeds_cap {
        rows.push(("bound_exceeds_cap".into(), format!("true (cap {})", s.dim_cap)));
    }
    let body: Vec<Vec<String>> = s
        .entries
        .iter()
        .map(|e| {
            vec![
                e.dim.to_string(),
                sig9(e.value),
                e.iterations.to_string(),
                sig9(e.seconds),
                serde_json::to_value(e.source)
                    .ok()
                    .and_then(|v| v.as_str().map(String::from))
                    .unwrap_or_default(),
            ]
        })
        .collect();
    aligned(&rows) + "\n" + &table(&["dim", "value", "iterations", "seconds", "source"], &body)
}

/// RFC-4180 CSV with one row per swept dimension.
pub fn sweep_csv(s: &SweepReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(["dim", "value", "seed", "iterations", "seconds"])
        .map_err(csv_err)?;
    for e in &s.entries {
        w.write_record([
            e.dim.to_string(),
            format!("{:?}", e.value),
            e.seed.to_string(),
            e.iterations.to_string(),
            format!("{:?}", e.seconds),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(sig9(std::f64::consts::FRAC_1_SQRT_2), "0.707106781");
        assert_eq!(sig9(2.0), "2");
        assert_eq!(sig9(1.999_999_999_9), "2");
        assert_eq!(sig9(1.234_567_891_23e-9), "1.23456789e-9");
        assert_eq!(sig9(0.0), "0");
    }

    #[test]
    fn render_aligns_and_summarizes() {
        let v = json!({"value": 0.5, "name": "x", "point": {"m": 1, "k": 2, "re": [0.0], "im": [0.0]}, "list": [1, 2]});
        let text = render(&v);
        assert!(text.contains("list   [1, 2]"));
        assert!(text.contains("<1 matrices of size 2x2>"));
        assert!(text.contains("value  0.5"));
    }

    #[test]
    fn table_right_aligns() {
        let t = table(&["a", "bb"], &[vec!["100".into(), "1".into()]]);
        assert_eq!(t, "  a  bb\n100   1\n");
    }
}
