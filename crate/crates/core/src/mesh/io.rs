//! ASCII OFF (read/write) and a v/f subset of Wavefront OBJ (read).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{MeshError, TriangleMesh, Vec3};

fn parse_f64(token: &str, line: usize) -> Result<f64, MeshError> {
    token.parse().map_err(|_| MeshError::Parse {
        line,
        message: format!("expected a number, found {token:?}"),
    })
}

fn parse_usize(token: &str, line: usize) -> Result<usize, MeshError> {
    token.parse().map_err(|_| MeshError::Parse {
        line,
        message: format!("expected a non-negative integer, found {token:?}"),
    })
}

fn check_index(index: usize, face: usize, vertex_count: usize) -> Result<usize, MeshError> {
    if index < vertex_count {
        Ok(index)
    } else {
        Err(MeshError::DanglingIndex {
            triangle: face,
            index,
            vertex_count,
        })
    }
}

/// Non-empty, comment-stripped lines with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = raw.split('#').next().unwrap_or("").trim();
        (!line.is_empty()).then_some((i + 1, line))
    })
}

pub fn read_off<R: Read>(reader: R) -> Result<TriangleMesh, MeshError> {
    let mut text = String::new();
    BufReader::new(reader).read_to_string(&mut text)?;
    let mut lines = content_lines(&text);

    let (_, header) = lines
        .next()
        .ok_or_else(|| MeshError::MalformedHeader("empty file".into()))?;
    // Counts may follow the keyword on the same line.
    let rest = header
        .strip_prefix("OFF")
        .ok_or_else(|| MeshError::MalformedHeader(format!("expected OFF, found {header:?}")))?;
    let count_line = if rest.trim().is_empty() {
        lines
            .next()
            .map(|(_, l)| l)
            .ok_or_else(|| MeshError::MalformedHeader("missing element counts".into()))?
    } else {
        rest
    };
    let counts: Vec<usize> = count_line
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| MeshError::MalformedHeader(format!("bad counts {count_line:?}")))?;
    if counts.len() < 2 {
        return Err(MeshError::MalformedHeader(format!("bad counts {count_line:?}")));
    }
    let (vertex_count, face_count) = (counts[0], counts[1]);

    let mut vertices = Vec::with_capacity(vertex_count);
    for _ in 0..vertex_count {
        let (no, line) = lines.next().ok_or_else(|| MeshError::Parse {
            line: 0,
            message: "unexpected end of file in vertex list".into(),
        })?;
        let coords: Vec<f64> = line
            .split_whitespace()
            .take(3)
            .map(|t| parse_f64(t, no))
            .collect::<Result<_, _>>()?;
        if coords.len() != 3 {
            return Err(MeshError::Parse {
                line: no,
                message: "vertex needs three coordinates".into(),
            });
        }
        vertices.push([coords[0], coords[1], coords[2]]);
    }

    let mut triangles = Vec::with_capacity(face_count);
    for face in 0..face_count {
        let (no, line) = lines.next().ok_or_else(|| MeshError::Parse {
            line: 0,
            message: "unexpected end of file in face list".into(),
        })?;
        let mut tokens = line.split_whitespace();
        let count = parse_usize(tokens.next().unwrap_or(""), no)?;
        if count != 3 {
            return Err(MeshError::NonTriangleFace { face, count });
        }
        let mut tri = [0usize; 3];
        for slot in &mut tri {
            let token = tokens.next().ok_or_else(|| MeshError::Parse {
                line: no,
                message: "face lists fewer indices than declared".into(),
            })?;
            *slot = check_index(parse_usize(token, no)?, face, vertex_count)?;
        }
        triangles.push(tri);
    }
    TriangleMesh::new(vertices, triangles)
}

pub fn load_off(path: impl AsRef<Path>) -> Result<TriangleMesh, MeshError> {
    read_off(File::open(path)?)
}

/// Writes ASCII OFF with 17 significant digits per coordinate, which
/// round-trips every `f64` exactly.
pub fn write_off<W: Write>(mesh: &TriangleMesh, writer: W) -> Result<(), MeshError> {
    let mut w = BufWriter::new(writer);
    writeln!(w, "OFF")?;
    writeln!(w, "{} {} 0", mesh.vertex_count(), mesh.triangle_count())?;
    for v in mesh.vertices() {
        writeln!(w, "{:.16e} {:.16e} {:.16e}", v[0], v[1], v[2])?;
    }
    for t in mesh.triangles() {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_off(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<(), MeshError> {
    write_off(mesh, File::create(path)?)
}

/// Reads `v x y z` and `f a b c` records (1-based, `a/b/c` tokens allowed);
/// everything else is ignored.
pub fn read_obj<R: Read>(reader: R) -> Result<TriangleMesh, MeshError> {
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut faces: Vec<(usize, Vec<usize>)> = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let no = i + 1;
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let coords: Vec<f64> = tokens
                    .take(3)
                    .map(|t| parse_f64(t, no))
                    .collect::<Result<_, _>>()?;
                if coords.len() != 3 {
                    return Err(MeshError::Parse {
                        line: no,
                        message: "vertex needs three coordinates".into(),
                    });
                }
                vertices.push([coords[0], coords[1], coords[2]]);
            }
            Some("f") => {
                let indices = tokens
                    .map(|t| {
                        let first = t.split('/').next().unwrap_or("");
                        match parse_usize(first, no)? {
                            0 => Err(MeshError::Parse {
                                line: no,
                                message: "OBJ indices are 1-based".into(),
                            }),
                            k => Ok(k - 1),
                        }
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                faces.push((no, indices));
            }
            _ => {}
        }
    }
    let mut triangles = Vec::with_capacity(faces.len());
    for (face, (_, indices)) in faces.into_iter().enumerate() {
        if indices.len() != 3 {
            return Err(MeshError::NonTriangleFace {
                face,
                count: indices.len(),
            });
        }
        let mut tri = [0usize; 3];
        for (slot, index) in tri.iter_mut().zip(indices) {
            *slot = check_index(index, face, vertices.len())?;
        }
        triangles.push(tri);
    }
    TriangleMesh::new(vertices, triangles)
}

pub fn load_obj(path: impl AsRef<Path>) -> Result<TriangleMesh, MeshError> {
    read_obj(File::open(path)?)
}
