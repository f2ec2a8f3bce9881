//! Wavefront OBJ reading and writing (`v` and `f` records only).

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use super::{Mesh, Point};
use crate::error::{Error, Result};

/// Reads a triangle mesh. Texture and normal records are ignored; the
/// reference shape is initialised to the loaded positions.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<Mesh> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_obj(&text)
}

pub fn parse_obj(text: &str) -> Result<Mesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let mut xyz = [0.0; 3];
                for slot in &mut xyz {
                    let tok = tokens.next().ok_or_else(|| Error::Parse {
                        line: lineno + 1,
                        message: "vertex needs three coordinates".into(),
                    })?;
                    *slot = tok.parse().map_err(|_| Error::Parse {
                        line: lineno + 1,
                        message: format!("bad coordinate {tok:?}"),
                    })?;
                }
                vertices.push(Point::new(xyz[0], xyz[1], xyz[2]));
            }
            Some("f") => {
                let corners = tokens
                    .map(|tok| resolve_index(tok, vertices.len(), lineno + 1))
                    .collect::<Result<Vec<_>>>()?;
                if corners.len() != 3 {
                    return Err(Error::NonTriangular {
                        face: faces.len(),
                        arity: corners.len(),
                    });
                }
                faces.push([corners[0], corners[1], corners[2]]);
            }
            _ => {}
        }
    }
    Mesh::new(vertices, faces)
}

/// `f` tokens may be `i`, `i/t`, `i//n` or `i/t/n`; negative indices are
/// relative to the vertices read so far.
fn resolve_index(token: &str, seen: usize, line: usize) -> Result<usize> {
    let head = token.split('/').next().unwrap_or("");
    let raw: i64 = head.parse().map_err(|_| Error::Parse {
        line,
        message: format!("bad face index {token:?}"),
    })?;
    match raw {
        0 => Err(Error::Parse {
            line,
            message: "face indices are 1-based".into(),
        }),
        r if r > 0 => Ok((r - 1) as usize),
        r => {
            let back = (-r) as usize;
            if back > seen {
                Err(Error::Parse {
                    line,
                    message: format!("relative index {r} precedes the first vertex"),
                })
            } else {
                Ok(seen - back)
            }
        }
    }
}

/// Writes the deformed positions with 17 significant digits.
pub fn write_obj(mesh: &Mesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_obj_to(mesh, &mut out)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn write_obj_to<W: Write>(mesh: &Mesh, out: &mut W) -> io::Result<()> {
    for v in mesh.vertices() {
        writeln!(out, "v {:.16e} {:.16e} {:.16e}", v.x, v.y, v.z)?;
    }
    for &[a, b, c] in mesh.faces() {
        writeln!(out, "f {} {} {}", a + 1, b + 1, c + 1)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const QUAD: &str = "\
# two triangles
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
vn 0 0 1
vt 0 0
f 1/1/1 2/1/1 3/1/1
f 1//1 3//1 -1
";

    #[test]
    fn parses_minimal_patch() {
        let m = parse_obj(QUAD).unwrap();
        assert_eq!(m.num_vertices(), 4);
        assert_eq!(m.num_faces(), 2);
        assert_eq!(m.topology().edges().len(), 5);
        assert_eq!(m.faces()[1], [0, 2, 3]);
    }

    #[test]
    fn rejects_out_of_range_index() {
        let err = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 4\n").unwrap_err();
        assert!(matches!(err, Error::IndexOutOfRange { index: 3, .. }));
    }

    #[test]
    fn rejects_quads() {
        let err = parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n").unwrap_err();
        assert!(matches!(err, Error::NonTriangular { arity: 4, .. }));
    }

    #[test]
    fn icosahedron_edges_all_interior() {
        let ico = crate::shapes::icosphere(0);
        let mut buf = Vec::new();
        write_obj_to(&ico, &mut buf).unwrap();
        let back = parse_obj(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back.num_vertices(), 12);
        assert_eq!(back.num_faces(), 20);
        let topo = back.topology();
        assert_eq!(topo.edges().len(), 30);
        assert!(topo.edges().iter().all(|e| e.is_interior()));
        // written at full precision
        assert_eq!(back.vertices(), ico.vertices());
    }

    #[test]
    fn missing_file_names_path() {
        let err = load_mesh("/definitely/not/here.obj").unwrap_err();
        assert!(err.to_string().contains("/definitely/not/here.obj"));
    }
}
