//! Scatter exports: TSV with a diagnostics header, and a static SVG.

use std::fmt::Write as _;
use std::path::Path;

use super::ProjectionResult;
use crate::data::write_atomic;
use crate::error::{Error, Result};

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22",
    "#17becf",
];

fn check_exportable(result: &ProjectionResult) -> Result<()> {
    if result.points.is_empty() {
        return Err(Error::Empty("scatter export of zero points".into()));
    }
    if result.points.iter().any(|p| p.len() < 2) {
        return Err(Error::InvalidArgument("scatter export needs at least 2 coordinates".into()));
    }
    if result.labels.len() != result.points.len() {
        return Err(Error::dim("scatter labels", result.points.len(), result.labels.len()));
    }
    if result.labels.iter().any(|l| l.contains(['\t', '\n'])) {
        return Err(Error::InvalidArgument("labels must not contain tabs or newlines".into()));
    }
    Ok(())
}

/// `# key<TAB>value` diagnostic lines, then `x<TAB>y<TAB>label` rows.
/// Coordinates are written with 17 significant digits.
pub fn scatter_tsv(result: &ProjectionResult) -> Result<String> {
    check_exportable(result)?;
    let mut out = String::new();
    writeln!(out, "# method\t{}", result.method).unwrap();
    writeln!(out, "# seed\t{}", result.seed).unwrap();
    for (k, v) in &result.diagnostics {
        writeln!(out, "# {k}\t{v:.16e}").unwrap();
    }
    out.push_str("x\ty\tlabel\n");
    for (p, l) in result.points.iter().zip(&result.labels) {
        writeln!(out, "{:.16e}\t{:.16e}\t{l}", p[0], p[1]).unwrap();
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterRow {
    pub x: f64,
    pub y: f64,
    pub label: String,
}

pub fn parse_scatter_tsv(text: &str) -> Result<Vec<ScatterRow>> {
    let mut rows = Vec::new();
    let mut header = false;
    for (n, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.is_empty() {
            continue;
        }
        if !header {
            if line != "x\ty\tlabel" {
                return Err(Error::Format(format!("line {}: expected scatter header", n + 1)));
            }
            header = true;
            continue;
        }
        let mut parts = line.splitn(3, '\t');
        let mut num = |what: &str| -> Result<f64> {
            parts
                .next()
                .ok_or_else(|| Error::Format(format!("line {}: missing {what}", n + 1)))?
                .parse()
                .map_err(|_| Error::Format(format!("line {}: bad {what}", n + 1)))
        };
        let x = num("x")?;
        let y = num("y")?;
        let label = parts
            .next()
            .ok_or_else(|| Error::Format(format!("line {}: missing label", n + 1)))?
            .to_string();
        rows.push(ScatterRow { x, y, label });
    }
    if !header {
        return Err(Error::Format("missing scatter header".into()));
    }
    Ok(rows)
}

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// One `<circle>` per point, colored by label in first-seen order.
pub fn scatter_svg(result: &ProjectionResult) -> Result<String> {
    check_exportable(result)?;
    const SIZE: f64 = 600.0;
    const MARGIN: f64 = 20.0;
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in &result.points {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    let span = (x1 - x0).max(y1 - y0).max(f64::MIN_POSITIVE);
    let scale = (SIZE - 2.0 * MARGIN) / span;

    let mut seen: Vec<&str> = Vec::new();
    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    )
    .unwrap();
    writeln!(out, r#"<title>{} projection</title>"#, escape_xml(&result.method)).unwrap();
    for (p, l) in result.points.iter().zip(&result.labels) {
        let idx = match seen.iter().position(|s| s == l) {
            Some(i) => i,
            None => {
                seen.push(l);
                seen.len() - 1
            }
        };
        let cx = MARGIN + (p[0] - x0) * scale;
        let cy = SIZE - MARGIN - (p[1] - y0) * scale;
        writeln!(
            out,
            r#"<circle cx="{cx:.3}" cy="{cy:.3}" r="3" fill="{}"><title>{}</title></circle>"#,
            PALETTE[idx % PALETTE.len()],
            escape_xml(l)
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Writes the TSV to `path`, and the SVG too when `svg` is given.
pub fn export_scatter(result: &ProjectionResult, path: &Path, svg: Option<&Path>) -> Result<()> {
    let tsv = scatter_tsv(result)?;
    let svg_text = svg.map(|_| scatter_svg(result)).transpose()?;
    write_atomic(path, tsv.as_bytes())?;
    if let (Some(p), Some(text)) = (svg, svg_text) {
        write_atomic(p, text.as_bytes())?;
    }
    Ok(())
}
