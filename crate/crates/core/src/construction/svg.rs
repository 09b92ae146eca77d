use std::fmt::Write;

use crate::logic::Truth;

use super::ConstructionTrace;

const CELL: f64 = 48.0;
const MARGIN: f64 = 24.0;

/// Intervals drawn at equal spacing, labelled by their points, with arcs for the true
/// atoms of the first binary relation between distinct positions.
pub fn trace_svg(trace: &ConstructionTrace) -> String {
    let n = trace.width();
    let width = 2.0 * MARGIN + CELL * n as f64;
    let base = 40.0 + CELL * (n as f64 / 2.0).min(8.0);
    let height = base + 70.0;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="monospace" font-size="10">"#
    );
    let _ = writeln!(out, r#"<title>{} at stage {}</title>"#, escape(&trace.theory().name), trace.stage());
    let x_of = |j: usize| MARGIN + CELL * (j as f64 + 0.5);
    let sig = trace.theory().signature.clone();
    if let Some(rel) = (0..sig.relations.len()).find(|&r| sig.arity(r) == 2) {
        let order = trace.order();
        for a in 0..n {
            for b in 0..n {
                if a == b || trace.p().atom(rel, &[order[a], order[b]]) != Truth::True {
                    continue;
                }
                let symmetric = trace.p().atom(rel, &[order[b], order[a]]) == Truth::True;
                if symmetric && b < a {
                    continue;
                }
                let (x0, x1) = (x_of(a), x_of(b));
                let lift = (x1 - x0).abs() / 2.0;
                let stroke = if symmetric { "#3366aa" } else { "#aa5533" };
                let _ = writeln!(
                    out,
                    r#"<path d="M {x0} {base} Q {} {} {x1} {base}" fill="none" stroke="{stroke}" stroke-width="1"/>"#,
                    (x0 + x1) / 2.0,
                    base - lift.min(base - 10.0) * 2.0,
                );
            }
        }
    }
    for (j, r) in trace.r().into_iter().enumerate() {
        let x = MARGIN + CELL * j as f64;
        let _ = writeln!(
            out,
            r##"<rect x="{x}" y="{base}" width="{CELL}" height="24" fill="#f4f4f4" stroke="#444"/>"##
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            x_of(j),
            base + 16.0,
            escape(&r.to_string())
        );
    }
    for (j, b) in trace.boundaries().iter().enumerate() {
        let x = MARGIN + CELL * j as f64;
        let _ = writeln!(
            out,
            r#"<text x="{x}" y="{}" text-anchor="middle" font-size="7" transform="rotate(45 {x} {})">{}</text>"#,
            base + 34.0,
            base + 34.0,
            escape(&b.to_string())
        );
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
