//! Plain-text mesh dump, optionally with one value column.
//!
//! ```text
//! tvflow-mesh format_version=1
//! domain annulus a=1 b=2 N=2
//! resolution 4
//! nodes 5 values 1
//! <coords...> <weight> <boundary 0|1> [<value>]
//! ```
//!
//! One-dimensional meshes write one coordinate per node, rectangles two.

use std::fmt::Write as _;
use std::sync::Arc;

use super::{build_mesh, Domain, Field, Mesh, Resolution, Vec2};
use crate::error::{Error, Result};

pub const DUMP_FORMAT_VERSION: u32 = 1;

pub(super) fn write_dump(mesh: &Mesh, values: Option<&[f64]>) -> Result<String> {
    if let Some(v) = values {
        mesh.check_nodal(v)?;
    }
    let mut out = String::new();
    let _ = writeln!(out, "tvflow-mesh format_version={DUMP_FORMAT_VERSION}");
    let _ = match *mesh.domain() {
        Domain::Interval { length } => writeln!(out, "domain interval length={length:.16e}"),
        Domain::Annulus { inner, outer, dim } => {
            writeln!(out, "domain annulus a={inner:.16e} b={outer:.16e} N={dim}")
        }
        Domain::Rectangle { width, height } => {
            writeln!(out, "domain rectangle width={width:.16e} height={height:.16e}")
        }
    };
    let _ = match mesh.grid() {
        Some((nx, ny)) => writeln!(out, "resolution {nx} {ny}"),
        None => writeln!(out, "resolution {}", mesh.element_count()),
    };
    let _ = writeln!(out, "nodes {} values {}", mesh.node_count(), u8::from(values.is_some()));
    let two_d = mesh.grad_dim() == 2;
    for (i, x) in mesh.nodes().iter().enumerate() {
        let _ = write!(out, "{:.16e}", x[0]);
        if two_d {
            let _ = write!(out, " {:.16e}", x[1]);
        }
        let _ = write!(out, " {:.16e} {}", mesh.quad_weights()[i], u8::from(mesh.is_boundary(i)));
        if let Some(v) = values {
            let _ = write!(out, " {:.16e}", v[i]);
        }
        out.push('\n');
    }
    Ok(out)
}

/// Parsed contents of a mesh dump.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshDump {
    pub domain: Domain,
    pub resolution: Resolution,
    pub coords: Vec<Vec2>,
    pub weights: Vec<f64>,
    pub boundary: Vec<bool>,
    pub values: Option<Vec<f64>>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Dump(msg.into())
}

fn keyed(token: Option<&str>, key: &str) -> Result<f64> {
    let token = token.ok_or_else(|| bad(format!("missing `{key}=`")))?;
    let value = token
        .strip_prefix(key)
        .and_then(|t| t.strip_prefix('='))
        .ok_or_else(|| bad(format!("expected `{key}=`, found `{token}`")))?;
    value.parse().map_err(|_| bad(format!("bad number for `{key}`: `{value}`")))
}

fn number<T: std::str::FromStr>(token: Option<&str>, what: &str) -> Result<T> {
    token
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| bad(format!("bad or missing {what}")))
}

pub fn parse_dump(text: &str) -> Result<MeshDump> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| bad("empty dump"))?;
    if header.trim() != format!("tvflow-mesh format_version={DUMP_FORMAT_VERSION}") {
        return Err(bad(format!("unsupported header `{header}`")));
    }

    let line = lines.next().ok_or_else(|| bad("missing domain line"))?;
    let mut t = line.split_whitespace();
    if t.next() != Some("domain") {
        return Err(bad("expected domain line"));
    }
    let domain = match t.next() {
        Some("interval") => Domain::Interval { length: keyed(t.next(), "length")? },
        Some("annulus") => Domain::Annulus {
            inner: keyed(t.next(), "a")?,
            outer: keyed(t.next(), "b")?,
            dim: keyed(t.next(), "N")? as usize,
        },
        Some("rectangle") => Domain::Rectangle {
            width: keyed(t.next(), "width")?,
            height: keyed(t.next(), "height")?,
        },
        other => return Err(bad(format!("unknown domain kind {other:?}"))),
    };

    let line = lines.next().ok_or_else(|| bad("missing resolution line"))?;
    let mut t = line.split_whitespace();
    if t.next() != Some("resolution") {
        return Err(bad("expected resolution line"));
    }
    let first: usize = number(t.next(), "resolution")?;
    let resolution = match t.next() {
        Some(s) => Resolution::Grid(first, number(Some(s), "resolution")?),
        None => Resolution::Uniform(first),
    };

    let line = lines.next().ok_or_else(|| bad("missing nodes line"))?;
    let mut t = line.split_whitespace();
    if t.next() != Some("nodes") {
        return Err(bad("expected nodes line"));
    }
    let count: usize = number(t.next(), "node count")?;
    if t.next() != Some("values") {
        return Err(bad("expected `values` flag"));
    }
    let has_values = number::<u8>(t.next(), "values flag")? == 1;

    let coord_cols = domain.grad_dim();
    let width = coord_cols + 2 + usize::from(has_values);
    let mut coords = Vec::with_capacity(count);
    let mut weights = Vec::with_capacity(count);
    let mut boundary = Vec::with_capacity(count);
    let mut values = Vec::new();
    for (k, line) in lines.enumerate() {
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != width {
            return Err(bad(format!("node line {k}: expected {width} columns, found {}", cols.len())));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| bad(format!("node line {k}: bad number `{s}`")))
        };
        let mut x = [0.0; 2];
        for (c, slot) in x.iter_mut().enumerate().take(coord_cols) {
            *slot = num(cols[c])?;
        }
        coords.push(x);
        weights.push(num(cols[coord_cols])?);
        boundary.push(match cols[coord_cols + 1] {
            "0" => false,
            "1" => true,
            s => return Err(bad(format!("node line {k}: bad boundary flag `{s}`"))),
        });
        if has_values {
            values.push(num(cols[coord_cols + 2])?);
        }
    }
    if coords.len() != count {
        return Err(bad(format!("header announces {count} nodes, found {}", coords.len())));
    }
    Ok(MeshDump {
        domain,
        resolution,
        coords,
        weights,
        boundary,
        values: has_values.then_some(values),
    })
}

impl MeshDump {
    /// Rebuilds the mesh described by the header and checks it against the node lines.
    pub fn rebuild(&self) -> Result<Arc<Mesh>> {
        let mesh = build_mesh(self.domain, self.resolution)?;
        self.check_against(&mesh)?;
        Ok(mesh)
    }

    pub fn check_against(&self, mesh: &Mesh) -> Result<()> {
        if mesh.domain() != &self.domain || mesh.node_count() != self.coords.len() {
            return Err(bad("dump does not describe this mesh"));
        }
        for (i, (a, b)) in self.coords.iter().zip(mesh.nodes()).enumerate() {
            let scale = 1.0 + b[0].abs().max(b[1].abs());
            if (a[0] - b[0]).abs() > 1e-12 * scale || (a[1] - b[1]).abs() > 1e-12 * scale {
                return Err(bad(format!("node {i} coordinates differ from the mesh")));
            }
            if self.boundary[i] != mesh.is_boundary(i) {
                return Err(bad(format!("node {i} boundary flag differs from the mesh")));
            }
        }
        Ok(())
    }

    /// The value column as a field on `mesh`.
    pub fn into_field(self, mesh: Arc<Mesh>) -> Result<Field> {
        self.check_against(&mesh)?;
        let values = self.values.ok_or_else(|| bad("dump has no value column"))?;
        Field::new(mesh, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_round_trip() {
        for (domain, res) in [
            (Domain::Interval { length: 2.0 }, Resolution::Uniform(4)),
            (Domain::Annulus { inner: 0.5, outer: 3.0, dim: 3 }, Resolution::Uniform(7)),
            (Domain::Rectangle { width: 1.0, height: 0.5 }, Resolution::Grid(3, 2)),
        ] {
            let mesh = build_mesh(domain, res).unwrap();
            let vals: Vec<f64> = (0..mesh.node_count()).map(|i| (i as f64).sin() / 3.0).collect();
            let text = mesh.dump(Some(&vals)).unwrap();
            let parsed = parse_dump(&text).unwrap();
            assert_eq!(parsed.weights, mesh.quad_weights());
            let rebuilt = parsed.rebuild().unwrap();
            assert_eq!(*rebuilt, *mesh);
            let field = parsed.into_field(rebuilt).unwrap();
            assert_eq!(field.values(), vals.as_slice());
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_dump("").is_err());
        assert!(parse_dump("tvflow-mesh format_version=9\n").is_err());
        let mesh = build_mesh(Domain::Interval { length: 1.0 }, Resolution::Uniform(2)).unwrap();
        let text = mesh.dump(None).unwrap();
        let truncated: String = text.lines().take(5).map(|l| format!("{l}\n")).collect();
        assert!(parse_dump(&truncated).is_err());
        assert!(parse_dump(&text).unwrap().into_field(mesh).is_err());
    }
}
