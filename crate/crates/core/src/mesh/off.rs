//! Plain-text OFF serialization. Coordinates are written with 17 significant digits so that a
//! write/read round trip is exact.

use std::io::{BufRead, Write};

use super::{MeshError, MeshOrigin, Triangulation};
use crate::geom::Vec3;
use crate::surface::Surface;

pub fn write_off(tri: &Triangulation, mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "OFF")?;
    writeln!(
        w,
        "{} {} {}",
        tri.num_vertices(),
        tri.num_triangles(),
        tri.edges().len()
    )?;
    for p in tri.vertices() {
        writeln!(w, "{:.16e} {:.16e} {:.16e}", p.x, p.y, p.z)?;
    }
    for t in tri.triangles() {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    Ok(())
}

/// Reads an OFF file and validates it as a triangulation of `surface`.
pub fn read_off(surface: Surface, r: impl BufRead) -> Result<Triangulation, MeshError> {
    let mut tokens = Vec::new();
    for line in r.lines() {
        let line = line?;
        let content = line.split('#').next().unwrap_or("");
        tokens.extend(content.split_whitespace().map(str::to_owned));
    }
    let mut it = tokens.into_iter();
    let header = it
        .next()
        .ok_or_else(|| MeshError::Parse("empty input".into()))?;
    if header != "OFF" {
        return Err(MeshError::Parse(format!(
            "expected OFF header, found {header:?}"
        )));
    }
    let mut next_num = |what: &str| -> Result<String, MeshError> {
        it.next()
            .ok_or_else(|| MeshError::Parse(format!("unexpected end of input reading {what}")))
    };
    let parse_usize = |s: String| {
        s.parse::<usize>()
            .map_err(|e| MeshError::Parse(format!("{s:?}: {e}")))
    };
    let parse_f64 = |s: String| {
        s.parse::<f64>()
            .map_err(|e| MeshError::Parse(format!("{s:?}: {e}")))
    };
    let nv = parse_usize(next_num("vertex count")?)?;
    let nf = parse_usize(next_num("face count")?)?;
    let _ne = parse_usize(next_num("edge count")?)?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let x = parse_f64(next_num("coordinate")?)?;
        let y = parse_f64(next_num("coordinate")?)?;
        let z = parse_f64(next_num("coordinate")?)?;
        vertices.push(Vec3::new(x, y, z));
    }
    let mut triangles = Vec::with_capacity(nf);
    for f in 0..nf {
        let k = parse_usize(next_num("face size")?)?;
        if k != 3 {
            return Err(MeshError::Parse(format!(
                "face {f} has {k} vertices; only triangles are supported"
            )));
        }
        let a = parse_usize(next_num("index")?)?;
        let b = parse_usize(next_num("index")?)?;
        let c = parse_usize(next_num("index")?)?;
        triangles.push([a, b, c]);
    }
    if it.next().is_some() {
        return Err(MeshError::Parse("trailing data after last face".into()));
    }
    Triangulation::new(surface, vertices, triangles, MeshOrigin::Imported)
}
