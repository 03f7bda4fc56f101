//! Plain-text grid description files.
//!
//! ```text
//! # anything after '#' is a comment
//! gridfile v1
//!
//! [defaults]          # optional; used when a row leaves a column out
//! inertia = 1.0
//! damping = 0.6
//! coupling = 1.63
//!
//! [nodes]
//! # id, power [, inertia [, damping]]
//! 1, -1.0
//! 2, 1.5, 1.0, 0.6
//!
//! [edges]
//! # a, b [, coupling]
//! 1, 2
//! ```
//!
//! The version line must be the first non-blank, non-comment line. Sections
//! may appear in any order but only once each; unknown section names and
//! unknown default keys are rejected. [`emit_grid`] writes every value
//! explicitly, so `parse_grid(&emit_grid(g))` reproduces `g` bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{GridError, Result};
use crate::grid::{validate_grid, GridEdge, GridNode, GridTopology, NodeId};

pub const FORMAT_HEADER: &str = "gridfile v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    Defaults,
    Nodes,
    Edges,
}

#[derive(Debug, Default, Clone, Copy)]
struct Defaults {
    inertia: Option<f64>,
    damping: Option<f64>,
    coupling: Option<f64>,
}

struct NodeRow {
    line: usize,
    id: u32,
    power: f64,
    inertia: Option<f64>,
    damping: Option<f64>,
}

struct EdgeRow {
    line: usize,
    a: u32,
    b: u32,
    coupling: Option<f64>,
}

fn err(line: usize, message: impl Into<String>) -> GridError {
    GridError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_f64(line: usize, field: &str, what: &str) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| err(line, format!("invalid {what} '{field}'")))?;
    if !v.is_finite() {
        return Err(err(line, format!("{what} must be finite")));
    }
    Ok(v)
}

fn parse_id(line: usize, field: &str) -> Result<u32> {
    field
        .parse()
        .map_err(|_| err(line, format!("invalid node id '{field}'")))
}

/// Parses a grid document without validating physical invariants.
pub fn parse_grid(text: &str) -> Result<GridTopology> {
    let mut header_seen = false;
    let mut section = Section::None;
    let mut visited = Vec::new();
    let mut defaults = Defaults::default();
    let mut node_rows = Vec::new();
    let mut edge_rows = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if !header_seen {
            if content != FORMAT_HEADER {
                return Err(err(
                    line,
                    format!("expected '{FORMAT_HEADER}' header, found '{content}'"),
                ));
            }
            header_seen = true;
            continue;
        }
        if let Some(name) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            section = match name.trim() {
                "defaults" => Section::Defaults,
                "nodes" => Section::Nodes,
                "edges" => Section::Edges,
                other => return Err(err(line, format!("unknown section [{other}]"))),
            };
            if visited.contains(&section) {
                return Err(err(line, format!("section [{}] repeated", name.trim())));
            }
            visited.push(section);
            continue;
        }
        match section {
            Section::None => return Err(err(line, "data outside of any section")),
            Section::Defaults => {
                let (key, value) = content
                    .split_once('=')
                    .ok_or_else(|| err(line, "expected 'key = value'"))?;
                let key = key.trim();
                let value = parse_f64(line, value.trim(), key)?;
                match key {
                    "inertia" => defaults.inertia = Some(value),
                    "damping" => defaults.damping = Some(value),
                    "coupling" => defaults.coupling = Some(value),
                    other => return Err(err(line, format!("unknown default '{other}'"))),
                }
            }
            Section::Nodes => {
                let fields: Vec<&str> = content.split(',').map(str::trim).collect();
                if !(2..=4).contains(&fields.len()) {
                    return Err(err(
                        line,
                        format!("node row needs 2 to 4 fields, found {}", fields.len()),
                    ));
                }
                node_rows.push(NodeRow {
                    line,
                    id: parse_id(line, fields[0])?,
                    power: parse_f64(line, fields[1], "power")?,
                    inertia: fields
                        .get(2)
                        .map(|f| parse_f64(line, f, "inertia"))
                        .transpose()?,
                    damping: fields
                        .get(3)
                        .map(|f| parse_f64(line, f, "damping"))
                        .transpose()?,
                });
            }
            Section::Edges => {
                let fields: Vec<&str> = content.split(',').map(str::trim).collect();
                if !(2..=3).contains(&fields.len()) {
                    return Err(err(
                        line,
                        format!("edge row needs 2 or 3 fields, found {}", fields.len()),
                    ));
                }
                edge_rows.push(EdgeRow {
                    line,
                    a: parse_id(line, fields[0])?,
                    b: parse_id(line, fields[1])?,
                    coupling: fields
                        .get(2)
                        .map(|f| parse_f64(line, f, "coupling"))
                        .transpose()?,
                });
            }
        }
    }
    if !header_seen {
        return Err(err(1, format!("missing '{FORMAT_HEADER}' header")));
    }

    let nodes = node_rows
        .into_iter()
        .map(|r| {
            let inertia = r
                .inertia
                .or(defaults.inertia)
                .ok_or_else(|| err(r.line, "no inertia given and no default set"))?;
            let damping = r
                .damping
                .or(defaults.damping)
                .ok_or_else(|| err(r.line, "no damping given and no default set"))?;
            Ok(GridNode {
                id: NodeId(r.id),
                power: r.power,
                inertia,
                damping,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let edges = edge_rows
        .into_iter()
        .map(|r| {
            let coupling = r
                .coupling
                .or(defaults.coupling)
                .ok_or_else(|| err(r.line, "no coupling given and no default set"))?;
            Ok(GridEdge {
                a: NodeId(r.a),
                b: NodeId(r.b),
                coupling,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GridTopology::new(nodes, edges))
}

/// Parses and validates.
pub fn read_grid(text: &str) -> Result<GridTopology> {
    let g = parse_grid(text)?;
    let violations = validate_grid(&g);
    if violations.is_empty() {
        Ok(g)
    } else {
        Err(GridError::Validation(violations))
    }
}

pub fn load_grid(path: impl AsRef<Path>) -> Result<GridTopology> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| GridError::io(path, e))?;
    read_grid(&text)
}

pub fn emit_grid(g: &GridTopology) -> String {
    let mut out = String::new();
    out.push_str(FORMAT_HEADER);
    out.push_str("\n\n[nodes]\n# id, power, inertia, damping\n");
    for n in g.nodes() {
        let _ = writeln!(
            out,
            "{}, {:?}, {:?}, {:?}",
            n.id.0, n.power, n.inertia, n.damping
        );
    }
    out.push_str("\n[edges]\n# a, b, coupling\n");
    for e in g.edges() {
        let _ = writeln!(out, "{}, {}, {:?}", e.a.0, e.b.0, e.coupling);
    }
    out
}

pub fn save_grid(g: &GridTopology, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, emit_grid(g)).map_err(|e| GridError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Violation;

    #[test]
    fn defaults_fill_missing_columns() {
        let g = parse_grid(
            "gridfile v1\n[defaults]\ninertia = 2\ndamping=0.5\ncoupling = 3\n\
             [nodes]\n1, 1.0\n2, -1.0, 4.0\n[edges]\n1, 2\n",
        )
        .unwrap();
        assert_eq!(g.nodes()[0].inertia, 2.0);
        assert_eq!(g.nodes()[1].inertia, 4.0);
        assert_eq!(g.nodes()[1].damping, 0.5);
        assert_eq!(g.edges()[0].coupling, 3.0);
    }

    #[test]
    fn unknown_section_rejected_with_line() {
        let e = parse_grid("# c\ngridfile v1\n[buses]\n").unwrap_err();
        assert!(matches!(e, GridError::Parse { line: 3, .. }), "{e}");
    }

    #[test]
    fn missing_header() {
        assert!(matches!(
            parse_grid("[nodes]\n1, 0, 1, 1\n"),
            Err(GridError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn bad_number_reports_line() {
        let e = parse_grid("gridfile v1\n[nodes]\n1, 1, 1, 1\n2, x, 1, 1\n").unwrap_err();
        assert!(matches!(e, GridError::Parse { line: 4, .. }));
    }

    #[test]
    fn missing_default() {
        let e = parse_grid("gridfile v1\n[nodes]\n1, 0\n").unwrap_err();
        assert!(e.to_string().contains("inertia"));
    }

    #[test]
    fn empty_node_table_fails_validation() {
        let e = read_grid("gridfile v1\n[nodes]\n[edges]\n").unwrap_err();
        match e {
            GridError::Validation(v) => assert_eq!(v, vec![Violation::EmptyGrid]),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn imbalance_fails_validation() {
        let e = read_grid(
            "gridfile v1\n[defaults]\ninertia=1\ndamping=1\ncoupling=1\n\
             [nodes]\n1, 1.0\n2, -0.5\n[edges]\n1,2\n",
        )
        .unwrap_err();
        assert!(matches!(
            e,
            GridError::Validation(ref v) if matches!(v[..], [Violation::PowerImbalance { .. }])
        ));
    }

    #[test]
    fn awkward_floats_round_trip() {
        let g = GridTopology::new(
            vec![
                GridNode::new(3, 0.1 + 0.2, 1e-300, 7.0 / 3.0),
                GridNode::new(1, -(0.1 + 0.2), 1.0, 0.6),
            ],
            vec![GridEdge::new(3, 1, std::f64::consts::PI)],
        );
        assert_eq!(parse_grid(&emit_grid(&g)).unwrap(), g);
    }
}
