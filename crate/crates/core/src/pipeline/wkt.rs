//! WKT polygon ingest: one `POLYGON` per line, optionally prefixed by
//! `id<TAB>`. Only simple polygons without holes are accepted; anything
//! else is rejected with a line-numbered diagnostic.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::geometry::{GeomId, GeometryError, Point2, Polygon};

#[derive(Debug, Error)]
pub enum WktError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}:{line}: invalid polygon: {source}")]
    Validity {
        path: String,
        line: usize,
        source: GeometryError,
    },
    #[error("{path}: file contains no polygons")]
    EmptyFile { path: String },
    #[error("{path}:{line}: duplicate geometry id {id}")]
    DuplicateId {
        path: String,
        line: usize,
        id: GeomId,
    },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Reads a WKT-per-line file. Ids default to 0-based line numbers unless a
/// line carries an explicit `id<TAB>` prefix.
pub fn read_wkt_file(path: &Path) -> Result<Vec<Polygon>, WktError> {
    let display = path.display().to_string();
    let content = fs::read_to_string(path).map_err(|source| WktError::Io {
        path: display.clone(),
        source,
    })?;
    let mut polygons = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (index, raw) in content.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let lineno = index + 1;
        let (id, wkt) = match line.split_once('\t') {
            Some((id_text, rest)) => {
                let id = id_text.trim().parse::<GeomId>().map_err(|_| WktError::Parse {
                    path: display.clone(),
                    line: lineno,
                    message: format!("malformed id prefix {id_text:?}"),
                })?;
                (id, rest.trim())
            }
            None => (polygons.len() as GeomId, line),
        };
        if !seen.insert(id) {
            return Err(WktError::DuplicateId {
                path: display.clone(),
                line: lineno,
                id,
            });
        }
        let ring = parse_polygon_wkt(wkt).map_err(|message| WktError::Parse {
            path: display.clone(),
            line: lineno,
            message,
        })?;
        let polygon = Polygon::new(id, ring).map_err(|source| WktError::Validity {
            path: display.clone(),
            line: lineno,
            source,
        })?;
        polygons.push(polygon);
    }
    if polygons.is_empty() {
        return Err(WktError::EmptyFile { path: display });
    }
    Ok(polygons)
}

/// Parses `POLYGON ((x y, x y, ...))` into its exterior ring.
pub fn parse_polygon_wkt(text: &str) -> Result<Vec<Point2>, String> {
    let trimmed = text.trim();
    let upper = trimmed.to_ascii_uppercase();
    let Some(rest) = upper.strip_prefix("POLYGON") else {
        let kind = upper.split(['(', ' ']).next().unwrap_or("");
        return Err(format!(
            "unsupported geometry type {kind:?}: only simple POLYGON is accepted"
        ));
    };
    if rest.trim_start().starts_with("EMPTY") {
        return Err("empty polygon".into());
    }
    // Work on the original text past the keyword to keep coordinates intact.
    let body = trimmed[trimmed.len() - rest.len()..].trim();
    if !body.starts_with('(') || !body.ends_with(')') {
        return Err("expected parenthesized ring list".into());
    }
    let inner = body[1..body.len() - 1].trim();
    if !inner.starts_with('(') || !inner.ends_with(')') {
        return Err("expected parenthesized ring".into());
    }
    let ring_text = &inner[1..inner.len() - 1];
    if ring_text.contains('(') || ring_text.contains(')') {
        return Err("polygons with interior rings (holes) are not supported".into());
    }
    let mut ring = Vec::new();
    for pair in ring_text.split(',') {
        let mut nums = pair.split_whitespace();
        let x = nums
            .next()
            .ok_or_else(|| format!("missing x coordinate in {pair:?}"))?;
        let y = nums
            .next()
            .ok_or_else(|| format!("missing y coordinate in {pair:?}"))?;
        if nums.next().is_some() {
            return Err(format!("too many coordinates in {pair:?}: only 2D is supported"));
        }
        let x: f64 = x.parse().map_err(|_| format!("bad number {x:?}"))?;
        let y: f64 = y.parse().map_err(|_| format!("bad number {y:?}"))?;
        ring.push(Point2::new(x, y));
    }
    Ok(ring)
}

/// Serializes a polygon as canonical WKT with the ring explicitly closed.
pub fn to_wkt(p: &Polygon) -> String {
    let mut out = String::from("POLYGON ((");
    for (k, v) in p.vertices().iter().enumerate() {
        if k > 0 {
            out.push_str(", ");
        }
        out.push_str(&format!("{} {}", v.x, v.y));
    }
    let first = p.vertices()[0];
    out.push_str(&format!(", {} {}))", first.x, first.y));
    out
}

/// Writes one WKT line per polygon, prefixed with its id.
pub fn write_wkt_file(path: &Path, polygons: &[Polygon]) -> Result<(), WktError> {
    let display = path.display().to_string();
    let mut out = String::new();
    for p in polygons {
        out.push_str(&p.id().to_string());
        out.push('\t');
        out.push_str(&to_wkt(p));
        out.push('\n');
    }
    fs::write(path, out).map_err(|source| WktError::Io {
        path: display,
        source,
    })
}
