//! Plain-text mesh format, self-describing and diff-friendly:
//!
//! ```text
//! # comment
//! polymesh 1
//! region <name> <sigma_along> <sigma_across> <dir_x> <dir_y>
//! v <x> <y>
//! e <region_name> <i0> <i1> ... <ik>     # CCW vertex indices, k >= 2
//! ```
//!
//! Records are whitespace-delimited and may appear in any order after the
//! header; `#` starts a comment. Coordinates are written with full
//! round-trip precision, so export/import is lossless.

use super::{MeshError, PolyMesh, RegionTag};
use crate::geometry::Vec2;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

pub fn write_mesh_string(mesh: &PolyMesh) -> String {
    let mut out = String::new();
    out.push_str("polymesh 1\n");
    for r in &mesh.regions {
        let _ = writeln!(
            out,
            "region {} {} {} {} {}",
            r.name, r.sigma_along, r.sigma_across, r.direction.x, r.direction.y
        );
    }
    for v in &mesh.vertices {
        let _ = writeln!(out, "v {} {}", v.x, v.y);
    }
    for (el, &ri) in mesh.elements.iter().zip(&mesh.element_region) {
        let _ = write!(out, "e {}", mesh.regions[ri].name);
        for &vi in &el.vertices {
            let _ = write!(out, " {vi}");
        }
        out.push('\n');
    }
    out
}

pub fn export_mesh(mesh: &PolyMesh, path: impl AsRef<Path>) -> Result<(), MeshError> {
    std::fs::write(path, write_mesh_string(mesh))?;
    Ok(())
}

pub fn import_mesh(path: impl AsRef<Path>) -> Result<PolyMesh, MeshError> {
    let text = std::fs::read_to_string(path)?;
    parse_mesh(&text)
}

pub fn parse_mesh(text: &str) -> Result<PolyMesh, MeshError> {
    let mut vertices: Vec<Vec2> = Vec::new();
    let mut regions: Vec<RegionTag> = Vec::new();
    let mut region_index: HashMap<String, usize> = HashMap::new();
    // Element records keep their region name and line until all regions and
    // vertices are known.
    let mut raw_elements: Vec<(usize, String, Vec<usize>)> = Vec::new();
    let mut header_seen = false;

    for (lineno, raw_line) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        if !header_seen {
            if fields != ["polymesh", "1"] {
                return Err(MeshError::Parse {
                    line,
                    message: format!("expected header 'polymesh 1', found '{content}'"),
                });
            }
            header_seen = true;
            continue;
        }
        match fields[0] {
            "v" => {
                if fields.len() != 3 {
                    return Err(MeshError::Parse {
                        line,
                        message: "vertex records are 'v <x> <y>'".into(),
                    });
                }
                let x = parse_f64(fields[1], line)?;
                let y = parse_f64(fields[2], line)?;
                vertices.push(Vec2::new(x, y));
            }
            "region" => {
                if fields.len() != 6 {
                    return Err(MeshError::Parse {
                        line,
                        message:
                            "region records are 'region <name> <sigma_along> <sigma_across> <dir_x> <dir_y>'"
                                .into(),
                    });
                }
                let name = fields[1].to_string();
                if region_index.contains_key(&name) {
                    return Err(MeshError::Parse {
                        line,
                        message: format!("region '{name}' declared twice"),
                    });
                }
                let tag = RegionTag::new(
                    name.clone(),
                    parse_f64(fields[2], line)?,
                    parse_f64(fields[3], line)?,
                    Vec2::new(parse_f64(fields[4], line)?, parse_f64(fields[5], line)?),
                )
                .map_err(|e| MeshError::Parse {
                    line,
                    message: e.to_string(),
                })?;
                region_index.insert(name, regions.len());
                regions.push(tag);
            }
            "e" => {
                if fields.len() < 5 {
                    return Err(MeshError::Parse {
                        line,
                        message: "element records are 'e <region> <i0> <i1> <i2> ...' with at least 3 vertices"
                            .into(),
                    });
                }
                let idx: Result<Vec<usize>, _> = fields[2..]
                    .iter()
                    .map(|s| {
                        s.parse::<usize>().map_err(|_| MeshError::Parse {
                            line,
                            message: format!("invalid vertex index '{s}'"),
                        })
                    })
                    .collect();
                raw_elements.push((line, fields[1].to_string(), idx?));
            }
            other => {
                return Err(MeshError::Parse {
                    line,
                    message: format!("unknown record type '{other}'"),
                });
            }
        }
    }
    if !header_seen {
        return Err(MeshError::Parse {
            line: 1,
            message: "missing 'polymesh 1' header".into(),
        });
    }
    // Resolve references now that the whole file is read.
    let mut element_loops = Vec::with_capacity(raw_elements.len());
    let mut element_region = Vec::with_capacity(raw_elements.len());
    for (line, region_name, idx) in raw_elements {
        let ri = *region_index
            .get(&region_name)
            .ok_or_else(|| MeshError::Parse {
                line,
                message: format!("element references undeclared region '{region_name}'"),
            })?;
        for &vi in &idx {
            if vi >= vertices.len() {
                return Err(MeshError::Parse {
                    line,
                    message: format!(
                        "vertex index {vi} out of range (file declares {})",
                        vertices.len()
                    ),
                });
            }
        }
        element_loops.push(idx);
        element_region.push(ri);
    }
    if regions.is_empty() {
        return Err(MeshError::Parse {
            line: 1,
            message: "no region declarations".into(),
        });
    }
    PolyMesh::from_indexed(vertices, element_loops, regions, element_region)
}

fn parse_f64(s: &str, line: usize) -> Result<f64, MeshError> {
    s.parse::<f64>().map_err(|_| MeshError::Parse {
        line,
        message: format!("invalid number '{s}'"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rect;
    use crate::mesh::generate_voronoi_mesh;

    const TWO_TRIANGLES: &str = "\
# minimal mesh: unit square split along its diagonal
polymesh 1
region bulk 1.0 1.0 1 0
v 0 0
v 1 0
v 1 1
v 0 1
e bulk 0 1 2
e bulk 0 2 3
";

    #[test]
    fn minimal_file_parses() {
        let mesh = parse_mesh(TWO_TRIANGLES).unwrap();
        assert_eq!(mesh.n_elements(), 2);
        assert_eq!(mesh.n_interior_faces(), 1);
        assert_eq!(mesh.regions.len(), 1);
        assert!((mesh.total_area() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn missing_vertex_is_a_parse_error_with_line() {
        let bad = TWO_TRIANGLES.replace("e bulk 0 2 3", "e bulk 0 2 9");
        match parse_mesh(&bad).unwrap_err() {
            MeshError::Parse { line, message } => {
                assert_eq!(line, 9);
                assert!(message.contains("out of range"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_region_is_a_parse_error() {
        let bad = TWO_TRIANGLES.replace("e bulk 0 1 2", "e mystery 0 1 2");
        match parse_mesh(&bad).unwrap_err() {
            MeshError::Parse { line, message } => {
                assert_eq!(line, 8);
                assert!(message.contains("mystery"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn header_required() {
        assert!(matches!(
            parse_mesh("v 0 0\n").unwrap_err(),
            MeshError::Parse { line: 1, .. }
        ));
        assert!(matches!(
            parse_mesh("# only comments\n").unwrap_err(),
            MeshError::Parse { .. }
        ));
    }

    #[test]
    fn malformed_number_reports_line() {
        let bad = TWO_TRIANGLES.replace("v 1 0", "v 1 zero");
        match parse_mesh(&bad).unwrap_err() {
            MeshError::Parse { line, .. } => assert_eq!(line, 5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn declarations_may_come_in_any_order() {
        let shuffled = "\
polymesh 1
e bulk 0 1 2
v 0 0
v 1 0
v 0 1
region bulk 2.5 0.5 0 1
";
        let mesh = parse_mesh(shuffled).unwrap();
        assert_eq!(mesh.n_elements(), 1);
        assert_eq!(mesh.region_of(0).sigma_along, 2.5);
    }

    #[test]
    fn roundtrip_preserves_generated_mesh() {
        let mesh =
            generate_voronoi_mesh(Rect::new(-1.0, 0.0, 2.0, 2.0), 40, 8, 11).unwrap();
        let text = write_mesh_string(&mesh);
        let back = parse_mesh(&text).unwrap();
        assert_eq!(back.vertices.len(), mesh.vertices.len());
        for (a, b) in mesh.vertices.iter().zip(&back.vertices) {
            assert_eq!(a.x.to_bits(), b.x.to_bits());
            assert_eq!(a.y.to_bits(), b.y.to_bits());
        }
        assert_eq!(back.faces.len(), mesh.faces.len());
        for (fa, fb) in mesh.faces.iter().zip(&back.faces) {
            assert_eq!((fa.v0, fa.v1, fa.plus, fa.minus), (fb.v0, fb.v1, fb.plus, fb.minus));
        }
        assert_eq!(back.element_region, mesh.element_region);
    }

    #[test]
    fn export_writes_readable_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mesh.poly");
        let mesh = parse_mesh(TWO_TRIANGLES).unwrap();
        export_mesh(&mesh, &path).unwrap();
        let back = import_mesh(&path).unwrap();
        assert_eq!(back.n_elements(), 2);
    }
}
